//! Command-line surface: dataset statistics, featurization, training,
//! evaluation, gamma-ratio reporting, gradient audits, and parameter
//! census.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
//! failure.

mod svg;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use lmpnn::graph::{build_graph, geometry_stats};
use lmpnn::model::{
    describe, featurize, gradient_audit, init_params, radial_table, ModelConfig,
};
use lmpnn::mol_io::{
    load_dataset_dir, load_exclusion_file, load_trajectory_file, Molecule, ParseMode,
};
use lmpnn::synthetic::random_molecule;
use lmpnn::trainer::{evaluate_checkpoint, md_energy_training, train, TrainConfig, TrainError};

const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Parser)]
#[command(
    name = "lmpnn",
    about = "Dual-branched Legendre message-passing network for molecular property prediction",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Dataset directory of .xyz files (falls back to LMPNN_DATA_DIR).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Parse mode for dataset files.
    #[arg(long, default_value = "qm9", value_parser = ["qm9", "plain"])]
    mode: String,
    /// Single multi-frame trajectory file instead of a directory.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Optional file of molecule ids to exclude.
    #[arg(long)]
    exclude: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Pooled pair-distance statistics of a dataset.
    Stats {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated cutoff list, angstrom.
        #[arg(long, default_value = "4.0,5.0,10.0", value_delimiter = ',')]
        cutoffs: Vec<f64>,
        /// Write JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit cutoff graphs plus basis expansions for every molecule.
    Featurize {
        #[command(flatten)]
        data: DataArgs,
        /// Cutoff radius override, angstrom.
        #[arg(long)]
        cutoff: Option<f64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// `json` writes one file per molecule; `binary` writes a single
        /// length-prefixed little-endian f64 file.
        #[arg(long, default_value = "json", value_parser = ["json", "binary"])]
        format: String,
    },
    /// Train a model from a JSON config file.
    Train {
        /// JSON file with `data`, `model`, and `train` sections.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        cutoff: Option<f64>,
        /// Output directory for logs and checkpoints.
        #[arg(long, default_value = "runs/latest")]
        out: PathBuf,
        /// Dataset directory override.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Force fully serial execution.
        #[arg(long)]
        single_threaded: bool,
    },
    /// Evaluate a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        target: Option<String>,
    },
    /// Render the gamma-ratio series from a training log.
    GammaReport {
        /// train_log.jsonl or summary.json produced by `train`.
        #[arg(long)]
        log: PathBuf,
        /// SVG output path.
        #[arg(long, default_value = "gamma_ratio.svg")]
        out: PathBuf,
    },
    /// Finite-difference audit of model gradients on a random molecule.
    Gradcheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        atoms: usize,
        /// Hidden width of the audited model.
        #[arg(long, default_value_t = 16)]
        hidden: usize,
    },
    /// Print parameter counts per block family and the gate registry.
    Describe {
        /// Optional config file; defaults describe the reference model.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

fn data_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct DataSection {
    dir: Option<PathBuf>,
    trajectory: Option<PathBuf>,
    mode: Option<String>,
    exclusion_file: Option<PathBuf>,
    /// MD protocols: explicit frame counts, validation carved from train.
    md_train_frames: Option<usize>,
    md_test_frames: Option<usize>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct RunConfig {
    data: DataSection,
    model: ModelConfig,
    train: TrainConfig,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help / --version are not usage errors.
            let benign = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            std::process::exit(if benign { 0 } else { 1 });
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.exit_code());
        }
    }
}

fn parse_mode(tag: &str) -> ParseMode {
    match tag {
        "plain" => ParseMode::Plain,
        _ => ParseMode::Qm9,
    }
}

fn resolve_data_dir(explicit: Option<&Path>) -> Result<PathBuf, CliError> {
    if let Some(p) = explicit {
        return Ok(p.to_path_buf());
    }
    std::env::var_os("LMPNN_DATA_DIR")
        .map(PathBuf::from)
        .ok_or_else(|| {
            CliError::Usage(
                "no dataset given: pass --data <dir> or set LMPNN_DATA_DIR".to_string(),
            )
        })
}

fn load_molecules(args: &DataArgs) -> Result<Vec<Molecule>, CliError> {
    if let Some(traj) = &args.trajectory {
        return load_trajectory_file(traj).map_err(data_err);
    }
    let dir = resolve_data_dir(args.data.as_deref())?;
    let exclude = match &args.exclude {
        Some(path) => Some(load_exclusion_file(path).map_err(data_err)?),
        None => None,
    };
    load_dataset_dir(&dir, parse_mode(&args.mode), exclude.as_ref()).map_err(data_err)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Stats { data, cutoffs, out } => {
            let molecules = load_molecules(&data)?;
            let stats = geometry_stats(&molecules, &cutoffs);
            let json = serde_json::to_string_pretty(&stats).map_err(data_err)?;
            match out {
                Some(path) => std::fs::write(path, json).map_err(data_err)?,
                None => println!("{json}"),
            }
            Ok(())
        }
        Command::Featurize {
            data,
            cutoff,
            out,
            format,
        } => run_featurize(&data, cutoff, &out, &format),
        Command::Train {
            config,
            seed,
            target,
            cutoff,
            out,
            data,
            single_threaded,
        } => run_train(&config, seed, target, cutoff, &out, data, single_threaded),
        Command::Eval {
            checkpoint,
            data,
            target,
        } => {
            let molecules = load_molecules(&data)?;
            let report = evaluate_checkpoint(&checkpoint, &molecules, target.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&report).map_err(data_err)?);
            Ok(())
        }
        Command::GammaReport { log, out } => run_gamma_report(&log, &out),
        Command::Gradcheck { seed, atoms, hidden } => run_gradcheck(seed, atoms, hidden),
        Command::Describe { config } => {
            let model_config = match config {
                Some(path) => read_run_config(&path)?.model,
                None => ModelConfig::default(),
            };
            let params = init_params(&model_config, 0).map_err(data_err)?;
            let census = describe(&params);
            println!("{}", serde_json::to_string_pretty(&census).map_err(data_err)?);
            Ok(())
        }
    }
}

fn read_run_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Usage(format!("cannot read config {}: {e}", path.display()))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config {} is invalid: {e}", path.display())))
}

fn run_train(
    config_path: &Path,
    seed: Option<u64>,
    target: Option<String>,
    cutoff: Option<f64>,
    out: &Path,
    data_override: Option<PathBuf>,
    single_threaded: bool,
) -> Result<(), CliError> {
    lmpnn::tensor::set_single_threaded(single_threaded);
    let mut run_config = read_run_config(config_path)?;
    if let Some(s) = seed {
        run_config.train.seed = s;
    }
    if let Some(t) = target {
        run_config.train.target = t;
    }
    if let Some(c) = cutoff {
        run_config.model.cutoff = c;
    }
    if let Some(d) = data_override {
        run_config.data.dir = Some(d);
    }

    let mode = parse_mode(run_config.data.mode.as_deref().unwrap_or("qm9"));
    let is_md = run_config.data.trajectory.is_some();
    let molecules = if let Some(traj) = &run_config.data.trajectory {
        load_trajectory_file(traj).map_err(data_err)?
    } else {
        let dir = resolve_data_dir(run_config.data.dir.as_deref())?;
        let exclude = match &run_config.data.exclusion_file {
            Some(p) => Some(load_exclusion_file(p).map_err(data_err)?),
            None => None,
        };
        load_dataset_dir(&dir, mode, exclude.as_ref()).map_err(data_err)?
    };

    let outcome = if is_md {
        if let (Some(train_frames), Some(test_frames)) = (
            run_config.data.md_train_frames,
            run_config.data.md_test_frames,
        ) {
            let mut md_train = TrainConfig::md_default(train_frames, test_frames);
            md_train.target = run_config.train.target.clone();
            md_train.seed = run_config.train.seed;
            md_energy_training(&molecules, &run_config.model, &md_train, Some(out))?
        } else {
            md_energy_training(&molecules, &run_config.model, &run_config.train, Some(out))?
        }
    } else {
        train(&molecules, &run_config.model, &run_config.train, Some(out))?
    };

    println!(
        "{}",
        serde_json::to_string_pretty(&outcome.summary).map_err(data_err)?
    );
    Ok(())
}

fn run_gamma_report(log_path: &Path, out: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(log_path)
        .map_err(|e| CliError::Usage(format!("cannot read log {}: {e}", log_path.display())))?;

    // Accept either the run summary or the per-epoch JSONL stream.
    let mut series: Vec<(u32, Option<f64>)> = Vec::new();
    if let Ok(summary) = serde_json::from_str::<lmpnn::trainer::TrainSummary>(&text) {
        series = summary.gamma_series;
    } else {
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let v: serde_json::Value = serde_json::from_str(line).map_err(data_err)?;
            if let (Some(epoch), Some(ratio)) = (v["epoch"].as_u64(), v.get("gamma_ratio")) {
                if !ratio.is_null() {
                    series.push((epoch as u32, ratio.as_f64()));
                }
            }
        }
    }

    println!("epoch  gamma_ratio");
    for (epoch, ratio) in &series {
        match ratio {
            Some(r) => println!("{epoch:>5}  {r:.6}"),
            None => println!("{epoch:>5}  undefined"),
        }
    }
    std::fs::write(out, svg::gamma_ratio_chart(&series)).map_err(data_err)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn run_gradcheck(seed: u64, atoms: usize, hidden: usize) -> Result<(), CliError> {
    let config = ModelConfig {
        hidden_width: hidden,
        ..ModelConfig::default()
    };
    let params = init_params(&config, seed).map_err(data_err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mol = random_molecule(&mut rng, atoms.clamp(2, 16), &[1, 6, 7, 8, 9]);
    let graph = build_graph(&mol, config.cutoff).map_err(data_err)?;
    let report = gradient_audit(&graph, &params, &config, 8, 1e-5, seed)
        .map_err(|e| CliError::Numeric(e.to_string()))?;
    println!("{}", serde_json::to_string_pretty(&report).map_err(data_err)?);
    if report.max_param_rel_error < GRADCHECK_TOLERANCE
        && report.max_force_rel_error < GRADCHECK_TOLERANCE
    {
        Ok(())
    } else {
        Err(CliError::Numeric(format!(
            "gradient audit failed: max parameter error {:.3e}, max force error {:.3e} (tolerance {GRADCHECK_TOLERANCE:.0e})",
            report.max_param_rel_error, report.max_force_rel_error
        )))
    }
}

fn run_featurize(
    data: &DataArgs,
    cutoff: Option<f64>,
    out: &Path,
    format: &str,
) -> Result<(), CliError> {
    let molecules = load_molecules(data)?;
    let config = ModelConfig {
        cutoff: cutoff.unwrap_or(4.0),
        // Featurization only needs the basis widths and the element
        // whitelist wide enough for both parse modes.
        elements: vec![1, 6, 7, 8, 9],
        ..ModelConfig::default()
    };
    let params = init_params(&config, 0).map_err(data_err)?;
    let table = radial_table(&config).map_err(data_err)?;
    std::fs::create_dir_all(out).map_err(data_err)?;

    let mut binary: Option<Vec<u8>> = if format == "binary" {
        let mut header = b"LMPF".to_vec();
        header.extend_from_slice(&1u32.to_le_bytes());
        header.extend_from_slice(&(molecules.len() as u64).to_le_bytes());
        Some(header)
    } else {
        None
    };

    for mol in &molecules {
        let graph = build_graph(mol, config.cutoff).map_err(data_err)?;
        let batch = featurize(&[&graph], &params, &config, &table).map_err(data_err)?;
        match binary.as_mut() {
            None => {
                let record = serde_json::json!({
                    "id": mol.id,
                    "molecule": mol,
                    "num_nodes": graph.num_nodes,
                    "node_z": graph.node_z,
                    "edges": graph.edges.iter()
                        .map(|e| serde_json::json!([e.src, e.dst, e.distance]))
                        .collect::<Vec<_>>(),
                    "angles": graph.angles.iter()
                        .map(|a| serde_json::json!([a.edge_in, a.edge_out, a.cos_alpha]))
                        .collect::<Vec<_>>(),
                    "radial": chunk_rows(&batch.radial, config.radial_functions),
                    "angular": chunk_rows(&batch.angular, config.angular_functions),
                });
                let path = out.join(format!("{}.json", sanitize(&mol.id)));
                std::fs::write(path, serde_json::to_vec_pretty(&record).map_err(data_err)?)
                    .map_err(data_err)?;
            }
            Some(buf) => {
                write_binary_record(buf, mol, &graph, &batch.radial, &batch.angular);
            }
        }
    }
    if let Some(buf) = binary {
        std::fs::write(out.join("features.bin"), buf).map_err(data_err)?;
    }
    eprintln!("featurized {} molecules into {}", molecules.len(), out.display());
    Ok(())
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn chunk_rows(flat: &[f64], width: usize) -> Vec<Vec<f64>> {
    if width == 0 {
        return Vec::new();
    }
    flat.chunks(width).map(|c| c.to_vec()).collect()
}

/// Binary layout per molecule: u64 id length + id bytes, then
/// length-prefixed (u64 LE count) arrays of little-endian f64:
/// node_z, positions (xyz interleaved), edge_src, edge_dst, distances,
/// angle_src_edge, angle_tgt_edge, cosines, radial, angular.
fn write_binary_record(
    buf: &mut Vec<u8>,
    mol: &Molecule,
    graph: &lmpnn::graph::MolecularGraph,
    radial: &[f64],
    angular: &[f64],
) {
    buf.extend_from_slice(&(mol.id.len() as u64).to_le_bytes());
    buf.extend_from_slice(mol.id.as_bytes());
    let arrays: Vec<Vec<f64>> = vec![
        graph.node_z.iter().map(|&z| z as f64).collect(),
        graph.positions.iter().flatten().copied().collect(),
        graph.edges.iter().map(|e| e.src as f64).collect(),
        graph.edges.iter().map(|e| e.dst as f64).collect(),
        graph.edges.iter().map(|e| e.distance).collect(),
        graph.angles.iter().map(|a| a.edge_in as f64).collect(),
        graph.angles.iter().map(|a| a.edge_out as f64).collect(),
        graph.angles.iter().map(|a| a.cos_alpha).collect(),
        radial.to_vec(),
        angular.to_vec(),
    ];
    for arr in arrays {
        buf.extend_from_slice(&(arr.len() as u64).to_le_bytes());
        for v in arr {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
}
