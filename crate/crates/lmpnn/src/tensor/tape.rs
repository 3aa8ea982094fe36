//! Recording tape for reverse-mode differentiation.
//!
//! A tape owns every intermediate tensor of one forward pass. Operations
//! append nodes and return lightweight ids; `backward` consumes the tape
//! and returns gradients for every gradient-requiring tensor reachable
//! from the loss. Re-differentiation needs a fresh forward pass.

use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matmul::{matmul, matmul_at, matmul_bt};
use super::TensorError;
use crate::basis::{legendre_sequence_with_deriv, rational_sequence_with_deriv, RadialBasisTable};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
}

impl Shape {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scalar() -> Self {
        Self { rows: 1, cols: 1 }
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.rows, self.cols)
    }
}

/// Handle to a tensor recorded on a tape.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct TensorId(pub(crate) usize);

#[derive(Copy, Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// Shifted softplus ln(1 + e^x) - ln 2; smooth and zero-preserving,
    /// which keeps position gradients (forces) well defined.
    SoftplusShifted,
    Identity,
}

fn softplus_shifted(x: f64) -> f64 {
    // max(x,0) + ln(1 + e^-|x|) is the overflow-safe softplus.
    x.max(0.0) + (-x.abs()).exp().ln_1p() - std::f64::consts::LN_2
}

/// Derivative of the shifted softplus expressed through its own output:
/// sigma'(z) = 1 - e^{-s}/2 where s = softplus_shifted(z).
fn softplus_shifted_deriv_from_output(s: f64) -> f64 {
    1.0 - 0.5 * (-s).exp()
}

enum Op {
    Leaf,
    Dense {
        x: usize,
        w: usize,
        b: usize,
        act: Activation,
    },
    Add {
        a: usize,
        b: usize,
    },
    Sub {
        a: usize,
        b: usize,
    },
    Mul {
        a: usize,
        b: usize,
    },
    ScaleScalar {
        x: usize,
        s: usize,
    },
    ScaleConst {
        x: usize,
        c: f64,
    },
    Gather {
        x: usize,
        indices: Rc<Vec<usize>>,
    },
    SegmentSum {
        x: usize,
        ids: Rc<Vec<usize>>,
    },
    ConcatCols {
        a: usize,
        b: usize,
    },
    SumAll {
        x: usize,
    },
    Dropout {
        x: usize,
        mask: Vec<f64>,
    },
    Distance {
        pos: usize,
        ends: Rc<Vec<(usize, usize)>>,
    },
    CosAngle {
        pos: usize,
        triplets: Rc<Vec<(usize, usize, usize)>>,
    },
    RadialBasis {
        d: usize,
        table: Rc<RadialBasisTable>,
    },
    AngularBasis {
        cos: usize,
        degrees: usize,
    },
}

struct Node {
    op: Op,
    shape: Shape,
    values: Vec<f64>,
    needs_grad: bool,
}

/// Gradients produced by one `backward` call, indexed by tensor id.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, t: TensorId) -> Option<&[f64]> {
        self.grads.get(t.0).and_then(|g| g.as_deref())
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, t: TensorId) -> Shape {
        self.nodes[t.0].shape
    }

    pub fn values(&self, t: TensorId) -> &[f64] {
        &self.nodes[t.0].values
    }

    fn push(&mut self, op: Op, shape: Shape, values: Vec<f64>, needs_grad: bool) -> TensorId {
        debug_assert_eq!(values.len(), shape.len());
        self.nodes.push(Node {
            op,
            shape,
            values,
            needs_grad,
        });
        TensorId(self.nodes.len() - 1)
    }

    fn needs(&self, id: usize) -> bool {
        self.nodes[id].needs_grad
    }

    /// Insert an input tensor. `requires_grad` marks it as a gradient
    /// target for `backward`.
    pub fn leaf(
        &mut self,
        shape: Shape,
        values: Vec<f64>,
        requires_grad: bool,
    ) -> Result<TensorId, TensorError> {
        if values.len() != shape.len() {
            return Err(TensorError::LengthMismatch {
                expected: shape.len(),
                got: values.len(),
            });
        }
        Ok(self.push(Op::Leaf, shape, values, requires_grad))
    }

    pub fn constant(&mut self, shape: Shape, values: Vec<f64>) -> Result<TensorId, TensorError> {
        self.leaf(shape, values, false)
    }

    pub fn scalar_constant(&mut self, value: f64) -> TensorId {
        self.push(Op::Leaf, Shape::scalar(), vec![value], false)
    }

    /// Fused dense layer act(x W + b); x is [M,K], W is [K,N], b is [1,N].
    pub fn dense(
        &mut self,
        x: TensorId,
        w: TensorId,
        b: TensorId,
        act: Activation,
    ) -> Result<TensorId, TensorError> {
        let (sx, sw, sb) = (self.shape(x), self.shape(w), self.shape(b));
        if sx.cols != sw.rows || sb.rows != 1 || sb.cols != sw.cols {
            return Err(TensorError::ShapeMismatch {
                op: "dense",
                detail: format!("x {sx}, w {sw}, b {sb}"),
            });
        }
        let (m, k, n) = (sx.rows, sx.cols, sw.cols);
        let mut out = matmul(&self.nodes[x.0].values, &self.nodes[w.0].values, m, k, n);
        let bias = &self.nodes[b.0].values;
        for row in out.chunks_exact_mut(n) {
            for (v, add) in row.iter_mut().zip(bias) {
                *v += add;
            }
        }
        if act == Activation::SoftplusShifted {
            for v in out.iter_mut() {
                *v = softplus_shifted(*v);
            }
        }
        let needs = self.needs(x.0) || self.needs(w.0) || self.needs(b.0);
        Ok(self.push(
            Op::Dense {
                x: x.0,
                w: w.0,
                b: b.0,
                act,
            },
            Shape::new(m, n),
            out,
            needs,
        ))
    }

    fn elementwise(
        &mut self,
        name: &'static str,
        a: TensorId,
        b: TensorId,
    ) -> Result<(Shape, bool), TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(TensorError::ShapeMismatch {
                op: name,
                detail: format!("{sa} vs {sb}"),
            });
        }
        Ok((sa, self.needs(a.0) || self.needs(b.0)))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        let (shape, needs) = self.elementwise("add", a, b)?;
        let values = self.nodes[a.0]
            .values
            .iter()
            .zip(&self.nodes[b.0].values)
            .map(|(x, y)| x + y)
            .collect();
        Ok(self.push(Op::Add { a: a.0, b: b.0 }, shape, values, needs))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        let (shape, needs) = self.elementwise("sub", a, b)?;
        let values = self.nodes[a.0]
            .values
            .iter()
            .zip(&self.nodes[b.0].values)
            .map(|(x, y)| x - y)
            .collect();
        Ok(self.push(Op::Sub { a: a.0, b: b.0 }, shape, values, needs))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        let (shape, needs) = self.elementwise("mul", a, b)?;
        let values = self.nodes[a.0]
            .values
            .iter()
            .zip(&self.nodes[b.0].values)
            .map(|(x, y)| x * y)
            .collect();
        Ok(self.push(Op::Mul { a: a.0, b: b.0 }, shape, values, needs))
    }

    /// gamma * x with a trainable scalar gamma of shape [1,1].
    pub fn scale_by_scalar(&mut self, x: TensorId, s: TensorId) -> Result<TensorId, TensorError> {
        let ss = self.shape(s);
        if ss != Shape::scalar() {
            return Err(TensorError::ShapeMismatch {
                op: "scale_by_scalar",
                detail: format!("scale must be [1, 1], got {ss}"),
            });
        }
        let gamma = self.nodes[s.0].values[0];
        let values = self.nodes[x.0].values.iter().map(|v| gamma * v).collect();
        let needs = self.needs(x.0) || self.needs(s.0);
        Ok(self.push(
            Op::ScaleScalar { x: x.0, s: s.0 },
            self.shape(x),
            values,
            needs,
        ))
    }

    pub fn scale_const(&mut self, x: TensorId, c: f64) -> TensorId {
        let values = self.nodes[x.0].values.iter().map(|v| c * v).collect();
        let needs = self.needs(x.0);
        self.push(Op::ScaleConst { x: x.0, c }, self.shape(x), values, needs)
    }

    /// Select rows of x by index; backward scatter-adds into the source.
    pub fn gather(&mut self, x: TensorId, indices: Rc<Vec<usize>>) -> Result<TensorId, TensorError> {
        let sx = self.shape(x);
        for &i in indices.iter() {
            if i >= sx.rows {
                return Err(TensorError::IndexOutOfRange {
                    index: i,
                    rows: sx.rows,
                });
            }
        }
        let n = sx.cols;
        let mut values = Vec::with_capacity(indices.len() * n);
        for &i in indices.iter() {
            values.extend_from_slice(&self.nodes[x.0].values[i * n..(i + 1) * n]);
        }
        let needs = self.needs(x.0);
        Ok(self.push(
            Op::Gather { x: x.0, indices: indices.clone() },
            Shape::new(indices.len(), n),
            values,
            needs,
        ))
    }

    /// Sum rows sharing a segment id; empty segments are zero rows.
    pub fn segment_sum(
        &mut self,
        x: TensorId,
        ids: Rc<Vec<usize>>,
        num_segments: usize,
    ) -> Result<TensorId, TensorError> {
        let sx = self.shape(x);
        if ids.len() != sx.rows {
            return Err(TensorError::LengthMismatch {
                expected: sx.rows,
                got: ids.len(),
            });
        }
        for &id in ids.iter() {
            if id >= num_segments {
                return Err(TensorError::SegmentIdOutOfRange { id, num_segments });
            }
        }
        let n = sx.cols;
        let mut values = vec![0.0; num_segments * n];
        for (row, &seg) in ids.iter().enumerate() {
            let src = &self.nodes[x.0].values[row * n..(row + 1) * n];
            let dst = &mut values[seg * n..(seg + 1) * n];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
        let needs = self.needs(x.0);
        Ok(self.push(
            Op::SegmentSum { x: x.0, ids: ids.clone() },
            Shape::new(num_segments, n),
            values,
            needs,
        ))
    }

    /// Concatenate along the feature axis: [M,A] ++ [M,B] -> [M,A+B].
    pub fn concat_cols(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.rows != sb.rows {
            return Err(TensorError::ShapeMismatch {
                op: "concat_cols",
                detail: format!("{sa} vs {sb}"),
            });
        }
        let mut values = Vec::with_capacity(sa.rows * (sa.cols + sb.cols));
        for row in 0..sa.rows {
            values.extend_from_slice(&self.nodes[a.0].values[row * sa.cols..(row + 1) * sa.cols]);
            values.extend_from_slice(&self.nodes[b.0].values[row * sb.cols..(row + 1) * sb.cols]);
        }
        let needs = self.needs(a.0) || self.needs(b.0);
        Ok(self.push(
            Op::ConcatCols { a: a.0, b: b.0 },
            Shape::new(sa.rows, sa.cols + sb.cols),
            values,
            needs,
        ))
    }

    /// Full reduction to a [1,1] scalar.
    pub fn sum_all(&mut self, x: TensorId) -> TensorId {
        let total: f64 = self.nodes[x.0].values.iter().sum();
        let needs = self.needs(x.0);
        self.push(Op::SumAll { x: x.0 }, Shape::scalar(), vec![total], needs)
    }

    pub fn mean_all(&mut self, x: TensorId) -> TensorId {
        let n = self.shape(x).len().max(1);
        let s = self.sum_all(x);
        self.scale_const(s, 1.0 / n as f64)
    }

    /// Inverted dropout. In training mode each element is zeroed with
    /// probability `rate` and survivors are scaled by 1/(1-rate);
    /// evaluation mode is the identity. Deterministic for a fixed seed.
    pub fn dropout(
        &mut self,
        x: TensorId,
        rate: f64,
        training: bool,
        seed: u64,
    ) -> Result<TensorId, TensorError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(TensorError::InvalidDropoutRate { rate });
        }
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keep_scale = 1.0 / (1.0 - rate);
        let mask: Vec<f64> = (0..self.shape(x).len())
            .map(|_| {
                if rng.random::<f64>() < rate {
                    0.0
                } else {
                    keep_scale
                }
            })
            .collect();
        let values = self.nodes[x.0]
            .values
            .iter()
            .zip(&mask)
            .map(|(v, m)| v * m)
            .collect();
        let needs = self.needs(x.0);
        Ok(self.push(Op::Dropout { x: x.0, mask }, self.shape(x), values, needs))
    }

    /// Euclidean length of each (src, dst) pair of rows of a [V,3]
    /// position tensor; output is [E,1].
    pub fn distances(
        &mut self,
        pos: TensorId,
        ends: Rc<Vec<(usize, usize)>>,
    ) -> Result<TensorId, TensorError> {
        let sp = self.shape(pos);
        if sp.cols != 3 {
            return Err(TensorError::ShapeMismatch {
                op: "distances",
                detail: format!("positions must be [V, 3], got {sp}"),
            });
        }
        for &(i, j) in ends.iter() {
            if i >= sp.rows || j >= sp.rows {
                return Err(TensorError::IndexOutOfRange {
                    index: i.max(j),
                    rows: sp.rows,
                });
            }
        }
        let p = &self.nodes[pos.0].values;
        let values: Vec<f64> = ends
            .iter()
            .map(|&(i, j)| {
                let dx = p[i * 3] - p[j * 3];
                let dy = p[i * 3 + 1] - p[j * 3 + 1];
                let dz = p[i * 3 + 2] - p[j * 3 + 2];
                (dx * dx + dy * dy + dz * dz).sqrt()
            })
            .collect();
        let needs = self.needs(pos.0);
        let shape = Shape::new(ends.len(), 1);
        Ok(self.push(Op::Distance { pos: pos.0, ends: ends.clone() }, shape, values, needs))
    }

    /// Cosine of the angle at pivot j between rays j->i and j->k for each
    /// (i, j, k) triplet; output is [A,1], clamped to [-1, 1].
    pub fn cos_angles(
        &mut self,
        pos: TensorId,
        triplets: Rc<Vec<(usize, usize, usize)>>,
    ) -> Result<TensorId, TensorError> {
        let sp = self.shape(pos);
        if sp.cols != 3 {
            return Err(TensorError::ShapeMismatch {
                op: "cos_angles",
                detail: format!("positions must be [V, 3], got {sp}"),
            });
        }
        let p = &self.nodes[pos.0].values;
        let mut values = Vec::with_capacity(triplets.len());
        for &(i, j, k) in triplets.iter() {
            if i >= sp.rows || j >= sp.rows || k >= sp.rows {
                return Err(TensorError::IndexOutOfRange {
                    index: i.max(j).max(k),
                    rows: sp.rows,
                });
            }
            let u = [p[i * 3] - p[j * 3], p[i * 3 + 1] - p[j * 3 + 1], p[i * 3 + 2] - p[j * 3 + 2]];
            let v = [p[k * 3] - p[j * 3], p[k * 3 + 1] - p[j * 3 + 1], p[k * 3 + 2] - p[j * 3 + 2]];
            let nu = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
            let nv = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
            values.push((dot / (nu * nv)).clamp(-1.0, 1.0));
        }
        let needs = self.needs(pos.0);
        let shape = Shape::new(triplets.len(), 1);
        Ok(self.push(
            Op::CosAngle { pos: pos.0, triplets: triplets.clone() },
            shape,
            values,
            needs,
        ))
    }

    /// Normalized radial expansion of a [E,1] distance tensor -> [E,n].
    pub fn radial_basis(
        &mut self,
        d: TensorId,
        table: Rc<RadialBasisTable>,
    ) -> Result<TensorId, TensorError> {
        let sd = self.shape(d);
        if sd.cols != 1 {
            return Err(TensorError::ShapeMismatch {
                op: "radial_basis",
                detail: format!("distances must be [E, 1], got {sd}"),
            });
        }
        let n = table.config().num_functions;
        let mut values = Vec::with_capacity(sd.rows * n);
        for &dist in &self.nodes[d.0].values {
            let row = table
                .expand(dist)
                .map_err(|e| TensorError::Basis(e.to_string()))?;
            values.extend_from_slice(&row);
        }
        let needs = self.needs(d.0);
        Ok(self.push(
            Op::RadialBasis { d: d.0, table: table.clone() },
            Shape::new(sd.rows, n),
            values,
            needs,
        ))
    }

    /// Angular expansion of a [A,1] cosine tensor -> [A,m], degrees 1..=m.
    pub fn angular_basis(&mut self, cos: TensorId, degrees: usize) -> Result<TensorId, TensorError> {
        let sc = self.shape(cos);
        if sc.cols != 1 {
            return Err(TensorError::ShapeMismatch {
                op: "angular_basis",
                detail: format!("cosines must be [A, 1], got {sc}"),
            });
        }
        let mut values = Vec::with_capacity(sc.rows * degrees);
        for &c in &self.nodes[cos.0].values {
            let (p, _) = legendre_sequence_with_deriv(degrees, c);
            values.extend_from_slice(&p[1..=degrees]);
        }
        let needs = self.needs(cos.0);
        Ok(self.push(
            Op::AngularBasis { cos: cos.0, degrees },
            Shape::new(sc.rows, degrees),
            values,
            needs,
        ))
    }

    /// Reverse pass from a scalar loss. Consumes the tape: a second call
    /// fails with `TapeConsumed`. Gradient buffers of interior nodes are
    /// released as soon as they have been propagated; only tensors whose
    /// `requires_grad` flag was set at creation keep their gradients.
    pub fn backward(&mut self, loss: TensorId) -> Result<Gradients, TensorError> {
        if self.consumed {
            return Err(TensorError::TapeConsumed);
        }
        self.consumed = true;
        if self.shape(loss) != Shape::scalar() {
            return Err(TensorError::NonScalarLoss {
                shape: self.shape(loss),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].needs_grad {
                grads[idx] = None;
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            match &self.nodes[idx].op {
                Op::Leaf => {
                    // Keep gradients of requested leaves.
                    grads[idx] = Some(g);
                    continue;
                }
                Op::Dense { x, w, b, act } => {
                    let (x, w, b, act) = (*x, *w, *b, *act);
                    let sx = self.nodes[x].shape;
                    let (m, k, n) = (sx.rows, sx.cols, self.nodes[w].shape.cols);
                    let g_z: Vec<f64> = match act {
                        Activation::Identity => g,
                        Activation::SoftplusShifted => self.nodes[idx]
                            .values
                            .iter()
                            .zip(&g)
                            .map(|(s, gv)| gv * softplus_shifted_deriv_from_output(*s))
                            .collect(),
                    };
                    if self.needs(x) {
                        let gx = matmul_bt(&g_z, &self.nodes[w].values, m, n, k);
                        accumulate(&mut grads[x], &gx);
                    }
                    if self.needs(w) {
                        let gw = matmul_at(&self.nodes[x].values, &g_z, m, k, n);
                        accumulate(&mut grads[w], &gw);
                    }
                    if self.needs(b) {
                        let mut gb = vec![0.0; n];
                        for row in g_z.chunks_exact(n) {
                            for (acc, v) in gb.iter_mut().zip(row) {
                                *acc += v;
                            }
                        }
                        accumulate(&mut grads[b], &gb);
                    }
                }
                Op::Add { a, b } => {
                    let (a, b) = (*a, *b);
                    if self.needs(a) {
                        accumulate(&mut grads[a], &g);
                    }
                    if self.needs(b) {
                        accumulate(&mut grads[b], &g);
                    }
                }
                Op::Sub { a, b } => {
                    let (a, b) = (*a, *b);
                    if self.needs(a) {
                        accumulate(&mut grads[a], &g);
                    }
                    if self.needs(b) {
                        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                        accumulate(&mut grads[b], &neg);
                    }
                }
                Op::Mul { a, b } => {
                    let (a, b) = (*a, *b);
                    if self.needs(a) {
                        let ga: Vec<f64> = g
                            .iter()
                            .zip(&self.nodes[b].values)
                            .map(|(gv, bv)| gv * bv)
                            .collect();
                        accumulate(&mut grads[a], &ga);
                    }
                    if self.needs(b) {
                        let gb: Vec<f64> = g
                            .iter()
                            .zip(&self.nodes[a].values)
                            .map(|(gv, av)| gv * av)
                            .collect();
                        accumulate(&mut grads[b], &gb);
                    }
                }
                Op::ScaleScalar { x, s } => {
                    let (x, s) = (*x, *s);
                    let gamma = self.nodes[s].values[0];
                    if self.needs(x) {
                        let gx: Vec<f64> = g.iter().map(|v| gamma * v).collect();
                        accumulate(&mut grads[x], &gx);
                    }
                    if self.needs(s) {
                        let gs: f64 = g
                            .iter()
                            .zip(&self.nodes[x].values)
                            .map(|(gv, xv)| gv * xv)
                            .sum();
                        accumulate(&mut grads[s], &[gs]);
                    }
                }
                Op::ScaleConst { x, c } => {
                    let (x, c) = (*x, *c);
                    if self.needs(x) {
                        let gx: Vec<f64> = g.iter().map(|v| c * v).collect();
                        accumulate(&mut grads[x], &gx);
                    }
                }
                Op::Gather { x, indices } => {
                    let x = *x;
                    if self.needs(x) {
                        let n = self.nodes[x].shape.cols;
                        let slot =
                            grads[x].get_or_insert_with(|| vec![0.0; self.nodes[x].shape.len()]);
                        for (row, &i) in indices.iter().enumerate() {
                            let src = &g[row * n..(row + 1) * n];
                            let dst = &mut slot[i * n..(i + 1) * n];
                            for (d, s) in dst.iter_mut().zip(src) {
                                *d += s;
                            }
                        }
                    }
                }
                Op::SegmentSum { x, ids } => {
                    let x = *x;
                    if self.needs(x) {
                        let n = self.nodes[x].shape.cols;
                        let slot =
                            grads[x].get_or_insert_with(|| vec![0.0; self.nodes[x].shape.len()]);
                        for (row, &seg) in ids.iter().enumerate() {
                            let src = &g[seg * n..(seg + 1) * n];
                            let dst = &mut slot[row * n..(row + 1) * n];
                            for (d, s) in dst.iter_mut().zip(src) {
                                *d += s;
                            }
                        }
                    }
                }
                Op::ConcatCols { a, b } => {
                    let (a, b) = (*a, *b);
                    let (ca, cb) = (self.nodes[a].shape.cols, self.nodes[b].shape.cols);
                    let rows = self.nodes[a].shape.rows;
                    if self.needs(a) {
                        let mut ga = Vec::with_capacity(rows * ca);
                        for row in 0..rows {
                            ga.extend_from_slice(&g[row * (ca + cb)..row * (ca + cb) + ca]);
                        }
                        accumulate(&mut grads[a], &ga);
                    }
                    if self.needs(b) {
                        let mut gb = Vec::with_capacity(rows * cb);
                        for row in 0..rows {
                            gb.extend_from_slice(
                                &g[row * (ca + cb) + ca..(row + 1) * (ca + cb)],
                            );
                        }
                        accumulate(&mut grads[b], &gb);
                    }
                }
                Op::SumAll { x } => {
                    let x = *x;
                    if self.needs(x) {
                        let gx = vec![g[0]; self.nodes[x].shape.len()];
                        accumulate(&mut grads[x], &gx);
                    }
                }
                Op::Dropout { x, mask } => {
                    let x = *x;
                    if self.needs(x) {
                        let gx: Vec<f64> = g.iter().zip(mask).map(|(gv, m)| gv * m).collect();
                        accumulate(&mut grads[x], &gx);
                    }
                }
                Op::Distance { pos, ends } => {
                    let pos = *pos;
                    if self.needs(pos) {
                        let p = &self.nodes[pos].values;
                        let d = &self.nodes[idx].values;
                        let slot =
                            grads[pos].get_or_insert_with(|| vec![0.0; self.nodes[pos].shape.len()]);
                        for (e, &(i, j)) in ends.iter().enumerate() {
                            let coef = g[e] / d[e];
                            for c in 0..3 {
                                let u = p[i * 3 + c] - p[j * 3 + c];
                                slot[i * 3 + c] += coef * u;
                                slot[j * 3 + c] -= coef * u;
                            }
                        }
                    }
                }
                Op::CosAngle { pos, triplets } => {
                    let pos = *pos;
                    if self.needs(pos) {
                        let p = &self.nodes[pos].values;
                        let cos = &self.nodes[idx].values;
                        let slot =
                            grads[pos].get_or_insert_with(|| vec![0.0; self.nodes[pos].shape.len()]);
                        for (a_idx, &(i, j, k)) in triplets.iter().enumerate() {
                            let mut u = [0.0; 3];
                            let mut v = [0.0; 3];
                            for c in 0..3 {
                                u[c] = p[i * 3 + c] - p[j * 3 + c];
                                v[c] = p[k * 3 + c] - p[j * 3 + c];
                            }
                            let nu = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
                            let nv = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                            let c_val = cos[a_idx];
                            let gv = g[a_idx];
                            for c in 0..3 {
                                let du = v[c] / (nu * nv) - c_val * u[c] / (nu * nu);
                                let dv = u[c] / (nu * nv) - c_val * v[c] / (nv * nv);
                                slot[i * 3 + c] += gv * du;
                                slot[k * 3 + c] += gv * dv;
                                slot[j * 3 + c] -= gv * (du + dv);
                            }
                        }
                    }
                }
                Op::RadialBasis { d, table } => {
                    let d = *d;
                    if self.needs(d) {
                        let n = table.config().num_functions;
                        let norms = table.norms();
                        let mut gd = vec![0.0; self.nodes[d].shape.len()];
                        for (e, &dist) in self.nodes[d].values.iter().enumerate() {
                            let (_, derivs) = rational_sequence_with_deriv(n, dist)
                                .map_err(|err| TensorError::Basis(err.to_string()))?;
                            let mut acc = 0.0;
                            for k in 1..=n {
                                acc += g[e * n + k - 1] * derivs[k] / norms[k - 1];
                            }
                            gd[e] = acc;
                        }
                        accumulate(&mut grads[d], &gd);
                    }
                }
                Op::AngularBasis { cos, degrees } => {
                    let (cos, degrees) = (*cos, *degrees);
                    if self.needs(cos) {
                        let mut gc = vec![0.0; self.nodes[cos].shape.len()];
                        for (a_idx, &c) in self.nodes[cos].values.iter().enumerate() {
                            let (_, dp) = legendre_sequence_with_deriv(degrees, c);
                            let mut acc = 0.0;
                            for k in 1..=degrees {
                                acc += g[a_idx * degrees + k - 1] * dp[k];
                            }
                            gc[a_idx] = acc;
                        }
                        accumulate(&mut grads[cos], &gc);
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, values: &[f64]) {
    match slot {
        Some(acc) => {
            for (a, v) in acc.iter_mut().zip(values) {
                *a += v;
            }
        }
        None => *slot = Some(values.to_vec()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::RadialBasisConfig;
    use crate::tensor::gradcheck::central_difference;

    fn pseudo_random(len: usize, seed: u64) -> Vec<f64> {
        let mut state = seed.wrapping_add(1);
        (0..len)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect()
    }

    #[test]
    fn dense_identity_passthrough() {
        let mut tape = Tape::new();
        let x = tape
            .leaf(Shape::new(2, 3), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], false)
            .unwrap();
        let mut eye = vec![0.0; 9];
        for i in 0..3 {
            eye[i * 3 + i] = 1.0;
        }
        let w = tape.constant(Shape::new(3, 3), eye).unwrap();
        let b = tape.constant(Shape::new(1, 3), vec![0.0; 3]).unwrap();
        let y = tape.dense(x, w, b, Activation::Identity).unwrap();
        assert_eq!(tape.values(y), tape.values(x));
    }

    #[test]
    fn dense_scalar_chain_rule() {
        // x=2, W=3, b=1 -> y=7 and dy/dx = 3.
        let mut tape = Tape::new();
        let x = tape.leaf(Shape::scalar(), vec![2.0], true).unwrap();
        let w = tape.leaf(Shape::scalar(), vec![3.0], true).unwrap();
        let b = tape.leaf(Shape::scalar(), vec![1.0], true).unwrap();
        let y = tape.dense(x, w, b, Activation::Identity).unwrap();
        assert_eq!(tape.values(y), &[7.0]);
        let grads = tape.backward(y).unwrap();
        assert_eq!(grads.get(x).unwrap(), &[3.0]);
        assert_eq!(grads.get(w).unwrap(), &[2.0]);
        assert_eq!(grads.get(b).unwrap(), &[1.0]);
    }

    #[test]
    fn dense_gradients_match_finite_differences() {
        let x0 = pseudo_random(4 * 5, 11);
        let w0 = pseudo_random(5 * 3, 12);
        let b0 = pseudo_random(3, 13);
        let run = |xv: &[f64], wv: &[f64], bv: &[f64]| -> f64 {
            let mut tape = Tape::new();
            let x = tape.leaf(Shape::new(4, 5), xv.to_vec(), true).unwrap();
            let w = tape.leaf(Shape::new(5, 3), wv.to_vec(), true).unwrap();
            let b = tape.leaf(Shape::new(1, 3), bv.to_vec(), true).unwrap();
            let y = tape.dense(x, w, b, Activation::SoftplusShifted).unwrap();
            let sq = tape.mul(y, y).unwrap();
            let loss = tape.sum_all(sq);
            tape.values(loss)[0]
        };

        let mut tape = Tape::new();
        let x = tape.leaf(Shape::new(4, 5), x0.clone(), true).unwrap();
        let w = tape.leaf(Shape::new(5, 3), w0.clone(), true).unwrap();
        let b = tape.leaf(Shape::new(1, 3), b0.clone(), true).unwrap();
        let y = tape.dense(x, w, b, Activation::SoftplusShifted).unwrap();
        let sq = tape.mul(y, y).unwrap();
        let loss = tape.sum_all(sq);
        let _ = loss;
        let grads = tape.backward(loss).unwrap();

        let eps = 1e-5;
        let fd_x = central_difference(&mut |v: &[f64]| run(v, &w0, &b0), &x0, eps);
        let fd_w = central_difference(&mut |v: &[f64]| run(&x0, v, &b0), &w0, eps);
        let fd_b = central_difference(&mut |v: &[f64]| run(&x0, &w0, v), &b0, eps);
        for (a, f) in grads.get(x).unwrap().iter().zip(&fd_x) {
            assert!((a - f).abs() < 1e-6 * f.abs().max(1.0), "{a} vs {f}");
        }
        for (a, f) in grads.get(w).unwrap().iter().zip(&fd_w) {
            assert!((a - f).abs() < 1e-6 * f.abs().max(1.0), "{a} vs {f}");
        }
        for (a, f) in grads.get(b).unwrap().iter().zip(&fd_b) {
            assert!((a - f).abs() < 1e-6 * f.abs().max(1.0), "{a} vs {f}");
        }
    }

    #[test]
    fn segment_sum_forward_and_empty_segment() {
        let mut tape = Tape::new();
        let x = tape
            .leaf(Shape::new(3, 1), vec![1.0, 2.0, 3.0], false)
            .unwrap();
        let y = tape
            .segment_sum(x, Rc::new(vec![0, 0, 1]), 2)
            .unwrap();
        assert_eq!(tape.values(y), &[3.0, 3.0]);

        let mut tape = Tape::new();
        let x = tape.leaf(Shape::new(2, 2), vec![1.0; 4], false).unwrap();
        let y = tape.segment_sum(x, Rc::new(vec![0, 2]), 3).unwrap();
        assert_eq!(tape.values(y), &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn segment_sum_rejects_out_of_range_ids() {
        let mut tape = Tape::new();
        let x = tape.leaf(Shape::new(2, 1), vec![1.0, 2.0], false).unwrap();
        let err = tape.segment_sum(x, Rc::new(vec![0, 5]), 2);
        assert!(matches!(err, Err(TensorError::SegmentIdOutOfRange { id: 5, .. })));
    }

    #[test]
    fn segment_sum_permutation_invariant() {
        let values = pseudo_random(6 * 2, 21);
        let ids = vec![2usize, 0, 1, 0, 2, 1];
        let perm = [3usize, 1, 5, 0, 2, 4];
        let mut permuted_values = Vec::new();
        let mut permuted_ids = Vec::new();
        for &p in &perm {
            permuted_values.extend_from_slice(&values[p * 2..(p + 1) * 2]);
            permuted_ids.push(ids[p]);
        }
        let mut t1 = Tape::new();
        let x1 = t1.leaf(Shape::new(6, 2), values, false).unwrap();
        let y1 = t1.segment_sum(x1, Rc::new(ids), 3).unwrap();
        let mut t2 = Tape::new();
        let x2 = t2.leaf(Shape::new(6, 2), permuted_values, false).unwrap();
        let y2 = t2.segment_sum(x2, Rc::new(permuted_ids), 3).unwrap();
        for (a, b) in t1.values(y1).iter().zip(t2.values(y2)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn scale_by_scalar_gradients() {
        // gamma = 0: output zero, dL/dgamma = sum(x * upstream).
        let mut tape = Tape::new();
        let x = tape
            .leaf(Shape::new(2, 2), vec![1.0, 2.0, 3.0, 4.0], true)
            .unwrap();
        let gamma = tape.leaf(Shape::scalar(), vec![0.0], true).unwrap();
        let y = tape.scale_by_scalar(x, gamma).unwrap();
        assert_eq!(tape.values(y), &[0.0; 4]);
        let loss = tape.sum_all(y);
        let grads = tape.backward(loss).unwrap();
        // upstream is all ones, so dL/dgamma = 1+2+3+4.
        assert_eq!(grads.get(gamma).unwrap(), &[10.0]);
        assert_eq!(grads.get(x).unwrap(), &[0.0; 4]);
    }

    #[test]
    fn backward_of_sum_is_ones() {
        let mut tape = Tape::new();
        let x = tape
            .leaf(Shape::new(3, 1), vec![5.0, -1.0, 2.0], true)
            .unwrap();
        let loss = tape.sum_all(x);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn backward_of_square_sum() {
        let mut tape = Tape::new();
        let x = tape
            .leaf(Shape::new(3, 1), vec![1.0, 2.0, 3.0], true)
            .unwrap();
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.sum_all(sq);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn tape_consumed_on_second_backward() {
        let mut tape = Tape::new();
        let x = tape.leaf(Shape::scalar(), vec![1.0], true).unwrap();
        let loss = tape.scale_const(x, 2.0);
        tape.backward(loss).unwrap();
        assert!(matches!(tape.backward(loss), Err(TensorError::TapeConsumed)));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let x = tape.leaf(Shape::new(2, 1), vec![1.0, 2.0], true).unwrap();
        assert!(matches!(
            tape.backward(x),
            Err(TensorError::NonScalarLoss { .. })
        ));
    }

    #[test]
    fn dropout_eval_and_zero_rate_are_identity() {
        let mut tape = Tape::new();
        let x = tape.leaf(Shape::new(2, 2), vec![1.0; 4], false).unwrap();
        let eval = tape.dropout(x, 0.33, false, 7).unwrap();
        assert_eq!(eval, x);
        let zero = tape.dropout(x, 0.0, true, 7).unwrap();
        assert_eq!(zero, x);
        assert!(tape.dropout(x, 1.0, true, 7).is_err());
    }

    #[test]
    fn dropout_statistics() {
        let n = 1_000_000usize;
        let mut tape = Tape::new();
        let x = tape.leaf(Shape::new(n, 1), vec![1.0; n], false).unwrap();
        let y = tape.dropout(x, 0.33, true, 97).unwrap();
        let survivors = tape.values(y).iter().filter(|v| **v != 0.0).count();
        let frac = survivors as f64 / n as f64;
        assert!((frac - 0.67).abs() < 0.005, "surviving fraction {frac}");
        let mean: f64 = tape.values(y).iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn dropout_deterministic_for_seed() {
        let mut t1 = Tape::new();
        let x1 = t1.leaf(Shape::new(100, 1), vec![1.0; 100], false).unwrap();
        let y1 = t1.dropout(x1, 0.5, true, 3).unwrap();
        let mut t2 = Tape::new();
        let x2 = t2.leaf(Shape::new(100, 1), vec![1.0; 100], false).unwrap();
        let y2 = t2.dropout(x2, 0.5, true, 3).unwrap();
        assert_eq!(t1.values(y1), t2.values(y2));
    }

    #[test]
    fn distance_gradients_match_finite_differences() {
        let pos0 = vec![0.1, 0.2, -0.3, 1.1, -0.4, 0.5, -0.7, 0.9, 0.2];
        let ends = Rc::new(vec![(0usize, 1usize), (1, 2), (2, 0)]);
        let run = |p: &[f64]| -> f64 {
            let mut tape = Tape::new();
            let pos = tape.leaf(Shape::new(3, 3), p.to_vec(), true).unwrap();
            let d = tape.distances(pos, ends.clone()).unwrap();
            let sq = tape.mul(d, d).unwrap();
            let loss = tape.sum_all(sq);
            tape.values(loss)[0]
        };
        let mut tape = Tape::new();
        let pos = tape.leaf(Shape::new(3, 3), pos0.clone(), true).unwrap();
        let d = tape.distances(pos, ends.clone()).unwrap();
        let sq = tape.mul(d, d).unwrap();
        let loss = tape.sum_all(sq);
        let grads = tape.backward(loss).unwrap();
        let fd = central_difference(&mut |p: &[f64]| run(p), &pos0, 1e-6);
        for (a, f) in grads.get(pos).unwrap().iter().zip(&fd) {
            assert!((a - f).abs() < 1e-6 * f.abs().max(1.0), "{a} vs {f}");
        }
    }

    #[test]
    fn cos_angle_gradients_match_finite_differences() {
        let pos0 = vec![0.0, 0.0, 0.0, 1.0, 0.1, -0.2, -0.3, 1.2, 0.4];
        let trips = Rc::new(vec![(1usize, 0usize, 2usize), (0, 1, 2)]);
        let run = |p: &[f64]| -> f64 {
            let mut tape = Tape::new();
            let pos = tape.leaf(Shape::new(3, 3), p.to_vec(), true).unwrap();
            let c = tape.cos_angles(pos, trips.clone()).unwrap();
            let sq = tape.mul(c, c).unwrap();
            let loss = tape.sum_all(sq);
            tape.values(loss)[0]
        };
        let mut tape = Tape::new();
        let pos = tape.leaf(Shape::new(3, 3), pos0.clone(), true).unwrap();
        let c = tape.cos_angles(pos, trips.clone()).unwrap();
        let sq = tape.mul(c, c).unwrap();
        let loss = tape.sum_all(sq);
        let grads = tape.backward(loss).unwrap();
        let fd = central_difference(&mut |p: &[f64]| run(p), &pos0, 1e-6);
        for (a, f) in grads.get(pos).unwrap().iter().zip(&fd) {
            assert!((a - f).abs() < 1e-6 * f.abs().max(1.0), "{a} vs {f}");
        }
    }

    #[test]
    fn basis_op_gradients_match_finite_differences() {
        let table = Rc::new(
            RadialBasisTable::new(RadialBasisConfig::default()).unwrap(),
        );
        let d0 = vec![0.8, 1.7, 3.2];
        let run_radial = |dv: &[f64]| -> f64 {
            let mut tape = Tape::new();
            let d = tape.leaf(Shape::new(3, 1), dv.to_vec(), true).unwrap();
            let r = tape.radial_basis(d, table.clone()).unwrap();
            let sq = tape.mul(r, r).unwrap();
            let loss = tape.sum_all(sq);
            tape.values(loss)[0]
        };
        let mut tape = Tape::new();
        let d = tape.leaf(Shape::new(3, 1), d0.clone(), true).unwrap();
        let r = tape.radial_basis(d, table.clone()).unwrap();
        let sq = tape.mul(r, r).unwrap();
        let loss = tape.sum_all(sq);
        let grads = tape.backward(loss).unwrap();
        let fd = central_difference(&mut |v: &[f64]| run_radial(v), &d0, 1e-6);
        for (a, f) in grads.get(d).unwrap().iter().zip(&fd) {
            assert!((a - f).abs() < 1e-5 * f.abs().max(1.0), "{a} vs {f}");
        }

        let c0 = vec![-0.7, 0.1, 0.9];
        let run_angular = |cv: &[f64]| -> f64 {
            let mut tape = Tape::new();
            let c = tape.leaf(Shape::new(3, 1), cv.to_vec(), true).unwrap();
            let q = tape.angular_basis(c, 12).unwrap();
            let sq = tape.mul(q, q).unwrap();
            let loss = tape.sum_all(sq);
            tape.values(loss)[0]
        };
        let mut tape = Tape::new();
        let c = tape.leaf(Shape::new(3, 1), c0.clone(), true).unwrap();
        let q = tape.angular_basis(c, 12).unwrap();
        let sq = tape.mul(q, q).unwrap();
        let loss = tape.sum_all(sq);
        let grads = tape.backward(loss).unwrap();
        let fd = central_difference(&mut |v: &[f64]| run_angular(v), &c0, 1e-6);
        for (a, f) in grads.get(c).unwrap().iter().zip(&fd) {
            assert!((a - f).abs() < 1e-5 * f.abs().max(1.0), "{a} vs {f}");
        }
    }

    #[test]
    fn gather_concat_backward() {
        let x0 = pseudo_random(4 * 2, 31);
        let run = |xv: &[f64]| -> f64 {
            let mut tape = Tape::new();
            let x = tape.leaf(Shape::new(4, 2), xv.to_vec(), true).unwrap();
            let g = tape.gather(x, Rc::new(vec![2, 0, 0, 3])).unwrap();
            let cat = tape.concat_cols(g, g).unwrap();
            let sq = tape.mul(cat, cat).unwrap();
            let loss = tape.sum_all(sq);
            tape.values(loss)[0]
        };
        let mut tape = Tape::new();
        let x = tape.leaf(Shape::new(4, 2), x0.clone(), true).unwrap();
        let g = tape.gather(x, Rc::new(vec![2, 0, 0, 3])).unwrap();
        let cat = tape.concat_cols(g, g).unwrap();
        let sq = tape.mul(cat, cat).unwrap();
        let loss = tape.sum_all(sq);
        let grads = tape.backward(loss).unwrap();
        let fd = central_difference(&mut |v: &[f64]| run(v), &x0, 1e-6);
        for (a, f) in grads.get(x).unwrap().iter().zip(&fd) {
            assert!((a - f).abs() < 1e-6 * f.abs().max(1.0), "{a} vs {f}");
        }
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let run = || -> Vec<f64> {
            let mut tape = Tape::new();
            let x = tape
                .leaf(Shape::new(8, 4), pseudo_random(32, 77), false)
                .unwrap();
            let w = tape
                .leaf(Shape::new(4, 4), pseudo_random(16, 78), false)
                .unwrap();
            let b = tape.leaf(Shape::new(1, 4), pseudo_random(4, 79), false).unwrap();
            let y = tape.dense(x, w, b, Activation::SoftplusShifted).unwrap();
            tape.values(y).to_vec()
        };
        assert_eq!(run(), run());
    }
}
