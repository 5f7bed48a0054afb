//! The hypernetwork decoder: variable nodes computed by a bias-free tanh MLP
//! `g` whose weight matrices are emitted, once per variable layer, by a
//! hypernetwork `f` reading the magnitudes of the current messages. Check
//! nodes use the odd Taylor polynomial of `2 arctanh` (exact or clipped
//! arctanh are available as ablations).
//!
//! Both networks are bias-free with tanh activations, which makes the
//! variable computation odd in `(l, x)` while `f`'s input `|x|` is sign
//! blind; together these give codeword-independent decoding errors, so
//! training on noisy zero codewords suffices.
//!
//! The first variable layer is determined directly by the LLRs
//! (`x = tanh(l/2)` per edge): with `x^0 = 0` a bias-free `f` would emit
//! all-zero weights for `g`, pinning every message and every gradient at
//! zero. From the second iteration on, `g`'s weights come from `f`.
//!
//! Two forward paths exist and are kept in lockstep (a test pins bit
//! equality): a plain evaluation for Monte-Carlo use, and a tape-building
//! version in [`build_decode_tape`] that training differentiates through.

use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::autodiff::{GradError, NodeId, Segments, Tape, Tensor};
use crate::bp::{hard_decision, DecodeOutput};
use crate::channel::stream_rng;
use crate::code::EdgeIndex;
use crate::math::{clamped_2atanh, sigmoid, taylor_2atanh};

#[derive(Debug, Error)]
pub enum HyperError {
    #[error("model built for {expected} edges, code has {got}")]
    EdgeCountMismatch { expected: usize, got: usize },
    #[error("model built for code length {expected}, LLR vector has {got}")]
    LlrShape { expected: usize, got: usize },
    #[error("graph construction failed: {0}")]
    Graph(#[from] GradError),
}

/// Architecture of the variable-node network `g`: input width, hidden
/// widths, and an implicit scalar output. tanh follows every layer
/// including the last; there are no bias terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
}

impl GSpec {
    /// Layer widths including input and the scalar output.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim];
        dims.extend_from_slice(&self.hidden);
        dims.push(1);
        dims
    }

    /// Number of weight matrices `p`.
    pub fn num_matrices(&self) -> usize {
        self.hidden.len() + 1
    }

    pub fn matrix_shapes(&self) -> Vec<(usize, usize)> {
        let dims = self.layer_dims();
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Total parameter count of `g`.
    pub fn param_count(&self) -> usize {
        self.matrix_shapes().iter().map(|(a, b)| a * b).sum()
    }
}

/// Architecture of the hypernetwork trunk: input width `E` and the hidden
/// widths (tanh, bias-free). The `p` linear projection heads hang off the
/// last trunk layer, one per matrix of `g`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FSpec {
    pub input_dim: usize,
    pub widths: Vec<usize>,
}

impl FSpec {
    pub fn trunk_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim];
        dims.extend_from_slice(&self.widths);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn last_width(&self) -> usize {
        *self.widths.last().expect("trunk has at least one layer")
    }
}

/// Hypernetwork weights: trunk matrices plus `p` projection heads.
#[derive(Debug, Clone)]
pub struct ThetaF {
    pub trunk: Vec<Tensor>,
    pub heads: Vec<Tensor>,
}

/// Check-node activation selection (degree `q` lives on the model).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CheckKind {
    Taylor,
    Arctanh,
    ArctanhClipped(f64),
}

/// Variable-node parameterization: hypernetwork-generated or directly
/// learned (the no-hypernetwork ablation, where `g` additionally receives
/// the magnitudes of its incoming messages).
#[derive(Debug, Clone)]
pub enum VariableNet {
    Hyper { f_spec: FSpec, theta_f: ThetaF },
    Fixed { theta_g: Vec<Tensor> },
}

/// Everything the decoder learns, bound to one code's edge structure.
#[derive(Debug, Clone)]
pub struct HyperModel {
    pub code_name: String,
    pub n: usize,
    pub edge_count: usize,
    pub d_v_max: usize,
    pub g_spec: GSpec,
    pub net: VariableNet,
    pub w_bar: Tensor,
    pub q: usize,
    pub iters: usize,
    pub use_abs: bool,
    pub check: CheckKind,
}

/// Construction knobs; defaults mirror the trained configuration
/// (L = 5, q = 1005, g hidden 16/16, f trunk 4 x 32).
#[derive(Debug, Clone)]
pub struct HyperModelConfig {
    pub iters: usize,
    pub q: usize,
    pub use_abs: bool,
    pub hypernetwork: bool,
    pub g_hidden: Vec<usize>,
    pub f_widths: Vec<usize>,
    pub check: CheckKind,
}

impl Default for HyperModelConfig {
    fn default() -> Self {
        Self {
            iters: 5,
            q: 1005,
            use_abs: true,
            hypernetwork: true,
            g_hidden: vec![16, 16],
            f_widths: vec![32; 4],
            check: CheckKind::Taylor,
        }
    }
}

impl HyperModelConfig {
    /// The deeper-hypernetwork variant: trunk 4 x 128.
    pub fn deeper_f(mut self) -> Self {
        self.f_widths = vec![128; 4];
        self
    }
}

fn uniform_tensor(rng: &mut impl Rng, rows: usize, cols: usize, bound: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::matrix(rows, cols, data)
}

impl HyperModel {
    /// Initialize for a code: trunk and fixed-g matrices uniform in
    /// +-sqrt(1/fan_in), projection heads uniform in +-1e-2 (so generated
    /// weights start near zero and check products stay away from +-1),
    /// `w_bar` all ones.
    pub fn init(code_name: &str, idx: &EdgeIndex, config: &HyperModelConfig, seed: u64) -> Self {
        let n = idx.num_vars();
        let edge_count = idx.len();
        let d_v_max = (0..n).map(|v| idx.var_all(v).len()).max().unwrap_or(1);
        let g_input = if config.hypernetwork { d_v_max } else { 2 * d_v_max - 1 };
        let g_spec = GSpec { input_dim: g_input, hidden: config.g_hidden.clone() };
        let mut rng = stream_rng(seed, 0xC0DE, 0x1217);
        let net = if config.hypernetwork {
            let f_spec = FSpec { input_dim: edge_count, widths: config.f_widths.clone() };
            let trunk = f_spec
                .trunk_shapes()
                .iter()
                .map(|&(fi, fo)| uniform_tensor(&mut rng, fi, fo, (1.0 / fi as f64).sqrt()))
                .collect();
            let last = f_spec.last_width();
            let heads = g_spec
                .matrix_shapes()
                .iter()
                .map(|&(a, b)| uniform_tensor(&mut rng, last, a * b, 1e-2))
                .collect();
            VariableNet::Hyper { f_spec, theta_f: ThetaF { trunk, heads } }
        } else {
            let theta_g = g_spec
                .matrix_shapes()
                .iter()
                .map(|&(a, b)| uniform_tensor(&mut rng, a, b, (1.0 / a as f64).sqrt()))
                .collect();
            VariableNet::Fixed { theta_g }
        };
        Self {
            code_name: code_name.to_string(),
            n,
            edge_count,
            d_v_max,
            g_spec,
            net,
            w_bar: Tensor::vector(vec![1.0; edge_count]),
            q: config.q,
            iters: config.iters,
            use_abs: config.use_abs,
            check: config.check,
        }
    }

    pub fn uses_hypernetwork(&self) -> bool {
        matches!(self.net, VariableNet::Hyper { .. })
    }

    /// Named parameter tensors, in checkpoint order.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        match &self.net {
            VariableNet::Hyper { theta_f, .. } => {
                for i in 0..theta_f.trunk.len() {
                    names.push(format!("trunk.{i}"));
                }
                for i in 0..theta_f.heads.len() {
                    names.push(format!("head.{i}"));
                }
            }
            VariableNet::Fixed { theta_g } => {
                for i in 0..theta_g.len() {
                    names.push(format!("g.{i}"));
                }
            }
        }
        names.push("w_bar".into());
        names
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut out: Vec<&Tensor> = Vec::new();
        match &self.net {
            VariableNet::Hyper { theta_f, .. } => {
                out.extend(theta_f.trunk.iter());
                out.extend(theta_f.heads.iter());
            }
            VariableNet::Fixed { theta_g } => out.extend(theta_g.iter()),
        }
        out.push(&self.w_bar);
        out
    }

    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        self.params().iter().map(|t| t.shape().to_vec()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::new();
        match &mut self.net {
            VariableNet::Hyper { theta_f, .. } => {
                out.extend(theta_f.trunk.iter_mut());
                out.extend(theta_f.heads.iter_mut());
            }
            VariableNet::Fixed { theta_g } => out.extend(theta_g.iter_mut()),
        }
        out.push(&mut self.w_bar);
        out
    }

    /// Run the hypernetwork on a message vector: `theta_g = heads(trunk(|x|))`
    /// (absolute value skipped when `use_abs` is off). Returns the `p` weight
    /// matrices of `g`.
    pub fn generate_weights(&self, x_prev: &[f64]) -> Vec<Tensor> {
        let (f_spec, theta_f) = match &self.net {
            VariableNet::Hyper { f_spec, theta_f } => (f_spec, theta_f),
            VariableNet::Fixed { theta_g } => return theta_g.clone(),
        };
        debug_assert_eq!(x_prev.len(), f_spec.input_dim);
        let mut h: Vec<f64> = if self.use_abs {
            x_prev.iter().map(|v| v.abs()).collect()
        } else {
            x_prev.to_vec()
        };
        for w in &theta_f.trunk {
            h = matvec_tanh(&h, w);
        }
        self.g_spec
            .matrix_shapes()
            .iter()
            .zip(&theta_f.heads)
            .map(|(&(a, b), head)| Tensor::matrix(a, b, matvec(&h, head)))
            .collect()
    }
}

/// `x^T W` with tanh, matching the tape's matmul accumulation order.
fn matvec_tanh(x: &[f64], w: &Tensor) -> Vec<f64> {
    matvec(x, w).into_iter().map(|v| v.tanh()).collect()
}

fn matvec(x: &[f64], w: &Tensor) -> Vec<f64> {
    let (rows, cols) = (w.shape()[0], w.shape()[1]);
    debug_assert_eq!(x.len(), rows);
    let mut out = vec![0.0; cols];
    let wd = w.data();
    for (p, &xv) in x.iter().enumerate() {
        if xv == 0.0 {
            continue;
        }
        let wrow = &wd[p * cols..(p + 1) * cols];
        for (o, wv) in out.iter_mut().zip(wrow) {
            *o += xv * wv;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Precomputed index arrays
// ---------------------------------------------------------------------------

/// Gather/scatter indices and check segments for one code, shared between
/// the plain forward pass and the training tape.
///
/// The `g` input of edge `e = (c, v)` is the row
/// `(l_v, x[N(v) \ e]..., 0-padding)`, gathered from the concatenation
/// `[x (E) | l (n) | 0]`; the fixed-g variant appends `|x[N(v) \ e]|`
/// (gathered from an `|x|` block at the end) with its own padding.
#[derive(Debug, Clone)]
pub struct HyperIndices {
    pub num_vars: usize,
    pub num_edges: usize,
    pub d_v_max: usize,
    pub var_of_edge: Arc<Vec<usize>>,
    pub g_gather_hyper: Arc<Vec<usize>>,
    pub g_gather_fixed: Arc<Vec<usize>>,
    pub segments: Arc<Segments>,
    /// `(-1)^(row degree)` per edge: the parity sign of the leave-one-out
    /// product rule in the spin-mean algebra.
    pub parity_sign: Arc<Vec<f64>>,
}

impl HyperIndices {
    pub fn build(idx: &EdgeIndex) -> Self {
        let n = idx.num_vars();
        let e_count = idx.len();
        let d_v_max = (0..n).map(|v| idx.var_all(v).len()).max().unwrap_or(1);
        let var_of_edge = Arc::new(idx.var_of_edge().to_vec());

        // Source layout: [x (E) | l (n) | zero (1) | absx (E, fixed only)].
        let l_base = e_count;
        let zero_slot = e_count + n;
        let abs_base = e_count + n + 1;

        let mut g_hyper = Vec::with_capacity(e_count * d_v_max);
        let mut g_fixed = Vec::with_capacity(e_count * (2 * d_v_max - 1));
        for e in 0..e_count {
            let (_, v) = idx.edge(e);
            let neigh = idx.var_neighbors(e);
            g_hyper.push(l_base + v);
            for &e2 in neigh {
                g_hyper.push(e2);
            }
            for _ in neigh.len()..d_v_max - 1 {
                g_hyper.push(zero_slot);
            }
            g_fixed.push(l_base + v);
            for &e2 in neigh {
                g_fixed.push(e2);
            }
            for _ in neigh.len()..d_v_max - 1 {
                g_fixed.push(zero_slot);
            }
            for &e2 in neigh {
                g_fixed.push(abs_base + e2);
            }
            for _ in neigh.len()..d_v_max - 1 {
                g_fixed.push(zero_slot);
            }
        }

        let mut offsets = vec![0usize];
        let mut members = Vec::with_capacity(e_count);
        for c in 0..idx.num_checks() {
            members.extend_from_slice(idx.chk_all(c));
            offsets.push(members.len());
        }
        let parity_sign = (0..e_count)
            .map(|e| {
                let (c, _) = idx.edge(e);
                if idx.chk_all(c).len() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();

        Self {
            num_vars: n,
            num_edges: e_count,
            d_v_max,
            var_of_edge,
            g_gather_hyper: Arc::new(g_hyper),
            g_gather_fixed: Arc::new(g_fixed),
            segments: Arc::new(Segments { offsets, members }),
            parity_sign: Arc::new(parity_sign),
        }
    }
}

// ---------------------------------------------------------------------------
// Plain forward pass
// ---------------------------------------------------------------------------

/// Apply `g` edge-wise to the gathered input rows. Public so the symmetry
/// properties can be exercised directly.
pub fn variable_update_hyper(
    l: &[f64],
    x_prev: &[f64],
    theta_g: &[Tensor],
    hidx: &HyperIndices,
    fixed_inputs: bool,
) -> Vec<f64> {
    let width = theta_g[0].shape()[0];
    let gather = if fixed_inputs { &hidx.g_gather_fixed } else { &hidx.g_gather_hyper };
    debug_assert_eq!(gather.len(), hidx.num_edges * width);
    // Source buffer [x | l | 0 | absx?].
    let mut src = Vec::with_capacity(hidx.num_edges * 2 + l.len() + 1);
    src.extend_from_slice(x_prev);
    src.extend_from_slice(l);
    src.push(0.0);
    if fixed_inputs {
        src.extend(x_prev.iter().map(|v| v.abs()));
    }
    let mut out = Vec::with_capacity(hidx.num_edges);
    let mut row = vec![0.0; width];
    for e in 0..hidx.num_edges {
        for (slot, &gi) in gather[e * width..(e + 1) * width].iter().enumerate() {
            row[slot] = src[gi];
        }
        let mut h = row.clone();
        for w in theta_g {
            h = matvec_tanh(&h, w);
        }
        out.push(h[0]);
    }
    out
}

fn check_layer_plain(x_var: &[f64], model: &HyperModel, hidx: &HyperIndices) -> Vec<f64> {
    let seg = &hidx.segments;
    let mut out = vec![0.0; x_var.len()];
    let mut vals = Vec::new();
    let mut loo = Vec::new();
    for s in 0..seg.num_segments() {
        let mem = seg.segment(s);
        vals.clear();
        vals.extend(mem.iter().map(|&e| x_var[e]));
        loo.resize(mem.len(), 0.0);
        crate::math::leave_one_out_products(&vals, &mut loo[..mem.len()]);
        for (slot, &e) in mem.iter().enumerate() {
            let t = loo[slot];
            let act = match model.check {
                CheckKind::Taylor => taylor_2atanh(t, model.q),
                CheckKind::Arctanh => clamped_2atanh(t),
                CheckKind::ArctanhClipped(th) => clamped_2atanh(t).clamp(-th, th),
            };
            out[e] = hidx.parity_sign[e] * act;
        }
    }
    out
}

fn marginal_plain(l: &[f64], x: &[f64], w_bar: &[f64], hidx: &HyperIndices) -> Vec<f64> {
    let mut s = vec![0.0; hidx.num_vars];
    for (e, &v) in hidx.var_of_edge.iter().enumerate() {
        s[v] += w_bar[e] * x[e];
    }
    l.iter().zip(&s).map(|(&lv, &sv)| sigmoid(lv + sv)).collect()
}

/// Decode one LLR vector with the model: `L` iterations of
/// (generate weights, variable layer, check layer), marginalizing after
/// every variable layer and once more after the final check layer.
pub fn hyper_decode(
    model: &HyperModel,
    l: &[f64],
    hidx: &HyperIndices,
) -> Result<DecodeOutput, HyperError> {
    if hidx.num_edges != model.edge_count {
        return Err(HyperError::EdgeCountMismatch {
            expected: model.edge_count,
            got: hidx.num_edges,
        });
    }
    if l.len() != model.n {
        return Err(HyperError::LlrShape { expected: model.n, got: l.len() });
    }
    let w_bar = model.w_bar.data();
    let fixed = !model.uses_hypernetwork();
    let mut marginals = Vec::with_capacity(model.iters + 1);
    let mut x_chk = vec![0.0; model.edge_count];
    for iter in 0..model.iters {
        let x_var = if iter == 0 {
            hidx.var_of_edge.iter().map(|&v| (0.5 * l[v]).tanh()).collect()
        } else {
            let theta_g = model.generate_weights(&x_chk);
            variable_update_hyper(l, &x_chk, &theta_g, hidx, fixed)
        };
        marginals.push(marginal_plain(l, &x_var, w_bar, hidx));
        x_chk = check_layer_plain(&x_var, model, hidx);
    }
    marginals.push(marginal_plain(l, &x_chk, w_bar, hidx));
    let hard = hard_decision(marginals.last().unwrap());
    Ok(DecodeOutput { hard, marginals })
}

// ---------------------------------------------------------------------------
// Tape-building forward pass (training)
// ---------------------------------------------------------------------------

/// Handles of the parameter nodes on a decode tape, in `param_names` order.
pub struct DecodeTape {
    pub param_ids: Vec<NodeId>,
    /// One node per variable layer plus the final check-layer marginal.
    pub marginal_ids: Vec<NodeId>,
}

/// Rebuild the decoder as a differentiable graph on `tape`. Parameter values
/// are copied from the model; gradients are read back via `param_ids`.
pub fn build_decode_tape(
    tape: &mut Tape,
    model: &HyperModel,
    l: &[f64],
    hidx: &HyperIndices,
) -> Result<DecodeTape, HyperError> {
    if hidx.num_edges != model.edge_count {
        return Err(HyperError::EdgeCountMismatch {
            expected: model.edge_count,
            got: hidx.num_edges,
        });
    }
    if l.len() != model.n {
        return Err(HyperError::LlrShape { expected: model.n, got: l.len() });
    }
    let e_count = model.edge_count;
    let n = model.n;

    let mut param_ids = Vec::new();
    enum NetNodes {
        Hyper { trunk: Vec<NodeId>, heads: Vec<NodeId> },
        Fixed { theta_g: Vec<NodeId> },
    }
    let net_nodes = match &model.net {
        VariableNet::Hyper { theta_f, .. } => {
            let trunk: Vec<NodeId> = theta_f.trunk.iter().map(|t| tape.param(t.clone())).collect();
            let heads: Vec<NodeId> = theta_f.heads.iter().map(|t| tape.param(t.clone())).collect();
            param_ids.extend(&trunk);
            param_ids.extend(&heads);
            NetNodes::Hyper { trunk, heads }
        }
        VariableNet::Fixed { theta_g } => {
            let ids: Vec<NodeId> = theta_g.iter().map(|t| tape.param(t.clone())).collect();
            param_ids.extend(&ids);
            NetNodes::Fixed { theta_g: ids }
        }
    };
    let w_bar = tape.param(model.w_bar.clone());
    param_ids.push(w_bar);

    let l_node = tape.leaf(Tensor::vector(l.to_vec()));
    let zero_node = tape.leaf(Tensor::vector(vec![0.0]));
    let sign_node = tape.leaf(Tensor::vector(hidx.parity_sign.as_ref().clone()));
    let g_width =
        if model.uses_hypernetwork() { hidx.d_v_max } else { 2 * hidx.d_v_max - 1 };
    let g_shapes = model.g_spec.matrix_shapes();

    let mut marginal_ids = Vec::with_capacity(model.iters + 1);
    let mut x_chk: Option<NodeId> = None;
    for iter in 0..model.iters {
        let x_var = if iter == 0 {
            let l_per_edge =
                tape.gather(l_node, hidx.var_of_edge.clone(), vec![e_count])?;
            let half = tape.scale(l_per_edge, 0.5);
            tape.tanh(half)
        } else {
            let x_prev = x_chk.expect("set after first iteration");
            // Generated (or fixed) weight matrices for this layer.
            let theta_g: Vec<NodeId> = match &net_nodes {
                NetNodes::Hyper { trunk, heads } => {
                    let f_in = if model.use_abs { tape.abs(x_prev) } else { x_prev };
                    let mut h = tape.reshape(f_in, vec![1, e_count])?;
                    for &w in trunk {
                        let z = tape.matmul(h, w)?;
                        h = tape.tanh(z);
                    }
                    heads
                        .iter()
                        .zip(&g_shapes)
                        .map(|(&head, &(a, b))| {
                            let flat = tape.matmul(h, head)?;
                            tape.reshape(flat, vec![a, b])
                        })
                        .collect::<Result<_, _>>()?
                }
                NetNodes::Fixed { theta_g } => theta_g.clone(),
            };
            // Gather the per-edge input rows of g.
            let (gather_idx, parts): (Arc<Vec<usize>>, Vec<NodeId>) =
                if model.uses_hypernetwork() {
                    (hidx.g_gather_hyper.clone(), vec![x_prev, l_node, zero_node])
                } else {
                    let absx = tape.abs(x_prev);
                    (hidx.g_gather_fixed.clone(), vec![x_prev, l_node, zero_node, absx])
                };
            let src = tape.concat(&parts)?;
            let mut h = tape.gather(src, gather_idx, vec![e_count, g_width])?;
            for &w in &theta_g {
                let z = tape.matmul(h, w)?;
                h = tape.tanh(z);
            }
            tape.reshape(h, vec![e_count])?
        };

        // Marginal after the variable layer.
        marginal_ids.push(marginal_node(tape, l_node, x_var, w_bar, hidx, n)?);

        // Check layer.
        let t = tape.loo_product(x_var, hidx.segments.clone())?;
        let act = match model.check {
            CheckKind::Taylor => tape.taylor_odd_poly(t, model.q),
            CheckKind::Arctanh => tape.atanh2(t),
            CheckKind::ArctanhClipped(th) => {
                let raw = tape.atanh2(t);
                tape.clamp(raw, -th, th)
            }
        };
        x_chk = Some(tape.mul(sign_node, act)?);
    }
    let final_x = x_chk.expect("at least one iteration");
    marginal_ids.push(marginal_node(tape, l_node, final_x, w_bar, hidx, n)?);

    Ok(DecodeTape { param_ids, marginal_ids })
}

fn marginal_node(
    tape: &mut Tape,
    l_node: NodeId,
    x: NodeId,
    w_bar: NodeId,
    hidx: &HyperIndices,
    n: usize,
) -> Result<NodeId, GradError> {
    let wx = tape.mul(w_bar, x)?;
    let summed = tape.scatter_add(wx, hidx.var_of_edge.clone(), n)?;
    let z = tape.add(l_node, summed)?;
    Ok(tape.sigmoid(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alist::parse_dense_matrix;
    use crate::code::LinearCode;
    use rand::Rng;

    fn toy() -> (LinearCode, EdgeIndex, HyperIndices) {
        // Irregular 3x5 toy: d_v_max = 2.
        let h = parse_dense_matrix("1 1 0 1 0\n1 0 1 0 1\n0 1 1 0 1\n").unwrap();
        let code = LinearCode::from_parity("toy", h).unwrap();
        let idx = EdgeIndex::build(&code);
        let hidx = HyperIndices::build(&idx);
        (code, idx, hidx)
    }

    fn model(seed: u64, config: HyperModelConfig) -> (HyperModel, HyperIndices) {
        let (_, idx, hidx) = toy();
        (HyperModel::init("toy", &idx, &config, seed), hidx)
    }

    #[test]
    fn generated_weights_are_sign_blind() {
        let (m, hidx) = model(1, HyperModelConfig::default());
        let x: Vec<f64> = (0..hidx.num_edges).map(|i| (i as f64 * 0.37).sin() * 0.9).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let a = m.generate_weights(&x);
        let b = m.generate_weights(&neg);
        for (wa, wb) in a.iter().zip(&b) {
            assert_eq!(wa.data(), wb.data());
        }
    }

    #[test]
    fn zero_messages_give_zero_weights() {
        let (m, hidx) = model(2, HyperModelConfig::default());
        let theta = m.generate_weights(&vec![0.0; hidx.num_edges]);
        for w in &theta {
            assert!(w.data().iter().all(|&v| v == 0.0), "bias-free f maps 0 to 0");
        }
    }

    #[test]
    fn zero_theta_gives_zero_update() {
        let (m, hidx) = model(3, HyperModelConfig::default());
        let theta: Vec<Tensor> =
            m.g_spec.matrix_shapes().iter().map(|&(a, b)| Tensor::zeros(vec![a, b])).collect();
        let l = vec![1.0, -2.0, 0.5, 3.0, -0.25];
        let x_prev = vec![0.3; hidx.num_edges];
        let out = variable_update_hyper(&l, &x_prev, &theta, &hidx, false);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn variable_update_is_odd() {
        let (m, hidx) = model(4, HyperModelConfig::default());
        let mut rng = stream_rng(11, 0, 0);
        for _ in 0..50 {
            let l: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let x: Vec<f64> = (0..hidx.num_edges).map(|_| rng.gen_range(-0.99..0.99)).collect();
            let theta = m.generate_weights(&x);
            let base = variable_update_hyper(&l, &x, &theta, &hidx, false);
            let ln: Vec<f64> = l.iter().map(|v| -v).collect();
            let xn: Vec<f64> = x.iter().map(|v| -v).collect();
            // theta is unchanged under the flip (|x| input).
            let theta_n = m.generate_weights(&xn);
            for (a, b) in theta.iter().zip(&theta_n) {
                assert_eq!(a.data(), b.data());
            }
            let flip = variable_update_hyper(&ln, &xn, &theta, &hidx, false);
            for (a, b) in base.iter().zip(&flip) {
                assert_eq!(*a, -*b, "g must be odd in (l, x)");
            }
        }
    }

    #[test]
    fn padding_fills_missing_neighbors_with_zero() {
        // Variable of degree 1: its g-input row is (l_v, 0) for d_v_max = 2.
        let h = parse_dense_matrix("1 1 1\n0 1 1\n").unwrap();
        let code = LinearCode::from_parity("t", h).unwrap();
        let idx = EdgeIndex::build(&code);
        let hidx = HyperIndices::build(&idx);
        assert_eq!(hidx.d_v_max, 2);
        // Edge 0 is (0, v0), v0 has degree 1: gather row = [l_0, zero].
        let width = hidx.d_v_max;
        let row = &hidx.g_gather_hyper[0..width];
        let e_count = idx.len();
        assert_eq!(row[0], e_count); // l slot of v0
        assert_eq!(row[1], e_count + 3); // zero slot
    }

    #[test]
    fn origin_is_fixed_point_of_decode() {
        let (m, hidx) = model(5, HyperModelConfig::default());
        let out = hyper_decode(&m, &[0.0; 5], &hidx).unwrap();
        assert_eq!(out.hard, vec![0; 5], "tie at 0.5 decides 0");
        for o in &out.marginals {
            assert!(o.iter().all(|&p| p == 0.5));
        }
    }

    #[test]
    fn decode_equivariance_under_codeword_flips() {
        // H = single parity check over 5 bits plus one extra row keeps it
        // simple; use the toy and its (valid) codeword from the null space.
        let (code, idx, hidx) = toy();
        let m = HyperModel::init("toy", &idx, &HyperModelConfig::default(), 6);
        // Find codewords by brute force.
        let mut codewords = Vec::new();
        for bits in 0u32..(1 << code.n()) {
            let cw: Vec<u8> = (0..code.n()).map(|v| ((bits >> v) & 1) as u8).collect();
            if code.is_codeword(&cw) {
                codewords.push(cw);
            }
        }
        assert!(codewords.len() > 1, "toy code has nontrivial codewords");
        let mut rng = stream_rng(12, 0, 0);
        for cw in &codewords {
            for _ in 0..10 {
                let l: Vec<f64> = (0..code.n()).map(|_| rng.gen_range(-4.0..4.0)).collect();
                let l_flip: Vec<f64> = l
                    .iter()
                    .zip(cw)
                    .map(|(&lv, &cv)| if cv == 1 { -lv } else { lv })
                    .collect();
                let base = hyper_decode(&m, &l, &hidx).unwrap();
                let flip = hyper_decode(&m, &l_flip, &hidx).unwrap();
                for v in 0..code.n() {
                    assert_eq!(flip.hard[v], base.hard[v] ^ cw[v], "cw={cw:?} l={l:?}");
                }
            }
        }
    }

    #[test]
    fn tape_forward_matches_plain_forward() {
        for config in [
            HyperModelConfig::default(),
            HyperModelConfig { use_abs: false, ..Default::default() },
            HyperModelConfig { hypernetwork: false, ..Default::default() },
            HyperModelConfig { check: CheckKind::ArctanhClipped(2.0), ..Default::default() },
        ] {
            let clipped = matches!(config.check, CheckKind::ArctanhClipped(_));
            let (m, hidx) = model(7, config);
            let mut rng = stream_rng(13, 0, 0);
            let l: Vec<f64> = (0..5).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let plain = hyper_decode(&m, &l, &hidx).unwrap();
            let mut tape = Tape::new();
            let graph = build_decode_tape(&mut tape, &m, &l, &hidx).unwrap();
            assert_eq!(graph.marginal_ids.len(), plain.marginals.len());
            for (id, o) in graph.marginal_ids.iter().zip(&plain.marginals) {
                let tape_o = tape.value(*id).data();
                if clipped {
                    // Plain inference clamps the arctanh input; the training
                    // tape does not. Values agree away from saturation.
                    for (a, b) in tape_o.iter().zip(o) {
                        assert!((a - b).abs() < 1e-9);
                    }
                } else {
                    assert_eq!(tape_o, &o[..], "bit-exact forward parity");
                }
            }
        }
    }

    #[test]
    fn model_code_shape_mismatch_detected() {
        let (m, _) = model(8, HyperModelConfig::default());
        let other = parse_dense_matrix("1 1 1 1\n1 1 0 1\n").unwrap();
        let other_code = LinearCode::from_parity("other", other).unwrap();
        let other_idx = EdgeIndex::build(&other_code);
        let other_hidx = HyperIndices::build(&other_idx);
        assert!(matches!(
            hyper_decode(&m, &[0.0; 4], &other_hidx),
            Err(HyperError::EdgeCountMismatch { .. })
        ));
    }
}
