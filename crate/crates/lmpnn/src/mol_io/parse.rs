//! Extended-XYZ parsing.
//!
//! Layout: line 1 is the atom count, line 2 the property record, then one
//! atom line per atom. QM9 files carry the twelve regression targets on
//! the property line and a trailing charge column per atom; trailing
//! frequency/SMILES/InChI lines are ignored. MD trajectory files are a
//! sequence of such blocks with an `energy=<float>` comment field and
//! optional fx fy fz columns per atom.

use std::collections::BTreeMap;

use super::{Molecule, ParseError, QM9_TARGETS};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ParseMode {
    /// QM9-style file: twelve targets on the property line, atom lines of
    /// `symbol x y z charge`, element whitelist {H, C, N, O, F}.
    Qm9,
    /// Plain extended XYZ: free-form comment (an `energy=<float>` token is
    /// picked up when present), atom lines of `symbol x y z` with optional
    /// force triplets, element whitelist {H, C, O}.
    Plain,
}

fn element_to_z(symbol: &str, mode: ParseMode) -> Option<u8> {
    let z = match symbol {
        "H" => 1,
        "C" => 6,
        "N" => 7,
        "O" => 8,
        "F" => 9,
        _ => return None,
    };
    match mode {
        ParseMode::Qm9 => Some(z),
        ParseMode::Plain => {
            if matches!(z, 1 | 6 | 8) {
                Some(z)
            } else {
                None
            }
        }
    }
}

fn z_to_symbol(z: u8) -> &'static str {
    match z {
        1 => "H",
        6 => "C",
        7 => "N",
        8 => "O",
        9 => "F",
        _ => "?",
    }
}

/// Parse a float, accepting the `*^` exponent marker that appears in a
/// handful of distributed QM9 records (e.g. `-1.8549*^-6`).
fn parse_float(token: &str) -> Option<f64> {
    match token.parse::<f64>() {
        Ok(v) => Some(v),
        Err(_) if token.contains("*^") => token.replace("*^", "e").parse::<f64>().ok(),
        Err(_) => None,
    }
}

/// Parse one extended-XYZ block.
pub fn parse_extended_xyz(text: &str, mode: ParseMode) -> Result<Molecule, ParseError> {
    let mut lines = text.lines().enumerate();
    let (idx, count_line) = lines
        .next()
        .ok_or(ParseError::MalformedAtomCount {
            line: 1,
            reason: "empty input".into(),
        })
        .map(|(i, l)| (i, l.trim()))?;
    let num_atoms: usize =
        count_line
            .parse()
            .map_err(|e: std::num::ParseIntError| ParseError::MalformedAtomCount {
                line: idx + 1,
                reason: e.to_string(),
            })?;
    if num_atoms == 0 {
        return Err(ParseError::MalformedAtomCount {
            line: idx + 1,
            reason: "atom count must be >= 1".into(),
        });
    }

    let (comment_idx, comment) = lines.next().ok_or(ParseError::UnexpectedEof {
        line: 2,
        expected: num_atoms,
    })?;
    let (id, targets) = parse_property_line(comment, comment_idx + 1, mode)?;

    let mut atomic_numbers = Vec::with_capacity(num_atoms);
    let mut positions = Vec::with_capacity(num_atoms);
    let mut forces: Vec<[f64; 3]> = Vec::new();
    for n in 0..num_atoms {
        let (i, raw) = lines.next().ok_or(ParseError::UnexpectedEof {
            line: comment_idx + 2 + n,
            expected: num_atoms,
        })?;
        let line_no = i + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        let expected = match mode {
            ParseMode::Qm9 => "5 (symbol x y z charge)",
            ParseMode::Plain => "4 or 7 (symbol x y z [fx fy fz])",
        };
        let ok_len = match mode {
            ParseMode::Qm9 => fields.len() == 5,
            ParseMode::Plain => fields.len() == 4 || fields.len() == 7,
        };
        if !ok_len {
            return Err(ParseError::MalformedAtomLine {
                line: line_no,
                found: fields.len(),
                expected: expected.into(),
            });
        }
        let z = element_to_z(fields[0], mode).ok_or_else(|| ParseError::UnknownElement {
            line: line_no,
            symbol: fields[0].to_string(),
        })?;
        let mut coord = [0.0f64; 3];
        for (c, token) in fields[1..4].iter().enumerate() {
            coord[c] = parse_float(token).ok_or_else(|| ParseError::NonNumericCoordinate {
                line: line_no,
                token: token.to_string(),
            })?;
        }
        if coord.iter().any(|v| !v.is_finite()) {
            return Err(ParseError::NonFiniteCoordinate { line: line_no });
        }
        if mode == ParseMode::Plain && fields.len() == 7 {
            let mut f = [0.0f64; 3];
            for (c, token) in fields[4..7].iter().enumerate() {
                f[c] = parse_float(token).ok_or_else(|| ParseError::NonNumericCoordinate {
                    line: line_no,
                    token: token.to_string(),
                })?;
            }
            forces.push(f);
        }
        atomic_numbers.push(z);
        positions.push(coord);
    }

    let forces = if forces.len() == num_atoms {
        Some(forces)
    } else {
        None
    };
    Ok(Molecule {
        id,
        atomic_numbers,
        positions,
        targets,
        forces,
    })
}

fn parse_property_line(
    line: &str,
    line_no: usize,
    mode: ParseMode,
) -> Result<(String, BTreeMap<String, f64>), ParseError> {
    let mut targets = BTreeMap::new();
    match mode {
        ParseMode::Qm9 => {
            // Field order: tag, index, A, B, C, then the twelve targets.
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() < 17 {
                return Err(ParseError::MissingPropertyField {
                    line: line_no,
                    found: fields.len(),
                    expected: 17,
                });
            }
            let id = format!("{}_{}", fields[0], fields[1]);
            for (name, token) in QM9_TARGETS.iter().zip(&fields[5..17]) {
                let value =
                    parse_float(token).ok_or_else(|| ParseError::NonNumericProperty {
                        line: line_no,
                        token: token.to_string(),
                    })?;
                targets.insert(name.to_string(), value);
            }
            Ok((id, targets))
        }
        ParseMode::Plain => {
            for token in line.split_whitespace() {
                if let Some(value) = token.strip_prefix("energy=") {
                    let value =
                        parse_float(value).ok_or_else(|| ParseError::NonNumericProperty {
                            line: line_no,
                            token: token.to_string(),
                        })?;
                    targets.insert("energy".to_string(), value);
                }
            }
            Ok((String::new(), targets))
        }
    }
}

/// Parse a multi-frame trajectory: consecutive extended-XYZ blocks.
/// Frames are assigned ids `frame_0`, `frame_1`, ...
pub fn parse_trajectory(text: &str, mode: ParseMode) -> Result<Vec<Molecule>, ParseError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut molecules = Vec::new();
    let mut cursor = 0;
    while cursor < lines.len() {
        if lines[cursor].trim().is_empty() {
            cursor += 1;
            continue;
        }
        let num_atoms: usize =
            lines[cursor]
                .trim()
                .parse()
                .map_err(|e: std::num::ParseIntError| ParseError::MalformedAtomCount {
                    line: cursor + 1,
                    reason: e.to_string(),
                })?;
        let end = cursor + 2 + num_atoms;
        if end > lines.len() {
            return Err(ParseError::UnexpectedEof {
                line: lines.len(),
                expected: num_atoms,
            });
        }
        let block = lines[cursor..end].join("\n");
        let mut mol = parse_extended_xyz(&block, mode)?;
        if mol.id.is_empty() {
            mol.id = format!("frame_{}", molecules.len());
        }
        molecules.push(mol);
        cursor = end;
    }
    Ok(molecules)
}

/// Serialize a molecule back to an extended-XYZ block. Coordinates are
/// written with enough digits to round-trip f64 exactly.
pub fn to_extended_xyz(mol: &Molecule, mode: ParseMode) -> String {
    let mut out = String::new();
    out.push_str(&format!("{}\n", mol.num_atoms()));
    match mode {
        ParseMode::Qm9 => {
            let (tag, index) = mol.id.split_once('_').unwrap_or(("gdb", mol.id.as_str()));
            let mut comment = format!("{tag} {index}\t0\t0\t0");
            for name in QM9_TARGETS {
                comment.push_str(&format!(
                    "\t{:.17e}",
                    mol.targets.get(name).copied().unwrap_or(0.0)
                ));
            }
            out.push_str(&comment);
            out.push('\n');
        }
        ParseMode::Plain => {
            if let Some(e) = mol.targets.get("energy") {
                out.push_str(&format!("energy={e:.17e}\n"));
            } else {
                out.push('\n');
            }
        }
    }
    for (i, (z, p)) in mol
        .atomic_numbers
        .iter()
        .zip(mol.positions.iter())
        .enumerate()
    {
        let mut line = format!("{}\t{:.17e}\t{:.17e}\t{:.17e}", z_to_symbol(*z), p[0], p[1], p[2]);
        match mode {
            ParseMode::Qm9 => line.push_str("\t0"),
            ParseMode::Plain => {
                if let Some(forces) = &mol.forces {
                    let f = forces[i];
                    line.push_str(&format!("\t{:.17e}\t{:.17e}\t{:.17e}", f[0], f[1], f[2]));
                }
            }
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}
