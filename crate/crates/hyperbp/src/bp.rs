//! Classical message-passing decoders on the unrolled Tanner (Trellis) graph.
//!
//! Two algebraically equivalent formulations are provided:
//!
//! - **plain**: variable nodes sum LLRs, check nodes apply the
//!   `tanh`/`arctanh` product rule; this is vanilla sum-product BP.
//! - **tanh-domain (weighted)**: the `tanh` is moved into the variable node,
//!   whose output lies in (-1, 1), and per-edge weights `w` scale the summed
//!   messages; check nodes then act on plain products of the incoming values.
//!   With all weights at one this reproduces vanilla BP exactly.
//!
//! Check nodes come in three flavors: the exact `2 arctanh` rule (input
//! clamped away from the +-1 asymptotes), an optional output clip, and the
//! odd Taylor polynomial of degree `q` that the learned decoders train
//! through.
//!
//! Sign conventions: LLRs are `log P(c=1|y) / P(c=0|y)` (see [`crate::channel`]),
//! so the spin mean of a message `x` is `tanh(-x/2)`, and the check update is
//! `x_out = -2 arctanh( prod tanh(-x_in / 2) )` over the leave-one-out set.
//! Products of spin means are what parity constraints multiply; tracking the
//! sign this way is what makes the single-parity-check marginals match the
//! exact bitwise posteriors.

use thiserror::Error;

use crate::code::EdgeIndex;
use crate::math::{
    clamped_2atanh, leave_one_out_products, leave_one_out_sums, sigmoid, taylor_2atanh,
};

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("weight vector length {got} does not match edge count {expected}")]
    WeightShape { expected: usize, got: usize },
    #[error("LLR length {got} does not match code length {expected}")]
    LlrShape { expected: usize, got: usize },
    #[error("iteration count must be positive")]
    ZeroIterations,
}

/// Edge messages `x^j` plus the LLR vector flowing through the Trellis.
/// `j` is the index of the layer that produced `x` (0 before any update).
#[derive(Debug, Clone)]
pub struct MessageState {
    pub x: Vec<f64>,
    pub l: Vec<f64>,
    pub j: usize,
}

impl MessageState {
    /// Fresh state: `x^0 = 0`.
    pub fn new(l: Vec<f64>, num_edges: usize) -> Self {
        Self { x: vec![0.0; num_edges], l, j: 0 }
    }
}

/// Learnable weights of the tanh-domain formulation: `w` scales summed
/// messages in the variable update, `w_bar` scales the marginalization.
/// All-ones reproduces vanilla BP.
#[derive(Debug, Clone)]
pub struct BpWeights {
    pub w: Vec<f64>,
    pub w_bar: Vec<f64>,
}

impl BpWeights {
    pub fn unit(num_edges: usize) -> Self {
        Self { w: vec![1.0; num_edges], w_bar: vec![1.0; num_edges] }
    }
}

/// Check-node activation for the tanh-domain formulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TanhCheckOp {
    /// Odd Taylor polynomial of `2 arctanh`, degree `q`.
    Taylor { q: usize },
    /// Exact `2 arctanh` (input clamped); optional symmetric output clip.
    Arctanh { clip: Option<f64> },
}

/// Decoder selection.
#[derive(Debug, Clone)]
pub enum DecoderVariant {
    /// Plain sum-product BP.
    Vanilla,
    /// Tanh-domain formulation with per-edge weights.
    Weighted { weights: BpWeights, check_op: TanhCheckOp },
}

/// Iteration count plus variant; the full decoder configuration.
#[derive(Debug, Clone)]
pub struct DecodeConfig {
    pub variant: DecoderVariant,
    pub iters: usize,
}

impl DecodeConfig {
    pub fn vanilla(iters: usize) -> Self {
        Self { variant: DecoderVariant::Vanilla, iters }
    }

    pub fn weighted(weights: BpWeights, check_op: TanhCheckOp, iters: usize) -> Self {
        Self { variant: DecoderVariant::Weighted { weights, check_op }, iters }
    }
}

/// Hard decisions plus the `L + 1` marginal vectors used by the training
/// loss: one after each variable layer and the final one from the last check
/// layer.
#[derive(Debug, Clone)]
pub struct DecodeOutput {
    pub hard: Vec<u8>,
    pub marginals: Vec<Vec<f64>>,
}

impl DecodeOutput {
    /// The marginal vector the hard decisions were taken from.
    pub fn final_marginal(&self) -> &[f64] {
        self.marginals.last().expect("decode always produces at least one marginal")
    }
}

// ---------------------------------------------------------------------------
// Per-layer updates (functional forms)
// ---------------------------------------------------------------------------

/// Plain variable update: `x_e = l_v + sum_{e' in N(v) \ e} x_prev_{e'}`.
pub fn variable_update_plain(state: &MessageState, idx: &EdgeIndex) -> Vec<f64> {
    debug_assert_eq!(state.j % 2, 0, "variable layers produce odd j");
    let mut out = vec![0.0; idx.len()];
    let mut loo = Vec::new();
    let mut vals = Vec::new();
    for v in 0..idx.num_vars() {
        let edges = idx.var_all(v);
        vals.clear();
        vals.extend(edges.iter().map(|&e| state.x[e]));
        loo.resize(edges.len(), 0.0);
        leave_one_out_sums(&vals, &mut loo[..edges.len()]);
        for (slot, &e) in edges.iter().enumerate() {
            out[e] = state.l[v] + loo[slot];
        }
    }
    out
}

/// Plain check update: `x_e = -2 arctanh( prod_{e'} tanh(-x_prev_{e'} / 2) )`
/// over the leave-one-out set, the product clamped away from +-1.
pub fn check_update_plain(state: &MessageState, idx: &EdgeIndex) -> Vec<f64> {
    debug_assert_eq!(state.j % 2, 1, "check layers produce even j");
    let mu: Vec<f64> = state.x.iter().map(|&x| (-0.5 * x).tanh()).collect();
    check_from_spin_means(&mu, idx)
}

/// Weighted variable update (tanh domain):
/// `x_e = tanh( 0.5 (l_v + sum w_{e'} x_prev_{e'}) )`.
pub fn variable_update_weighted(
    state: &MessageState,
    weights: &[f64],
    idx: &EdgeIndex,
) -> Vec<f64> {
    debug_assert_eq!(state.j % 2, 0, "variable layers produce odd j");
    let mut out = vec![0.0; idx.len()];
    let mut loo = Vec::new();
    let mut vals = Vec::new();
    for v in 0..idx.num_vars() {
        let edges = idx.var_all(v);
        vals.clear();
        vals.extend(edges.iter().map(|&e| weights[e] * state.x[e]));
        loo.resize(edges.len(), 0.0);
        leave_one_out_sums(&vals, &mut loo[..edges.len()]);
        for (slot, &e) in edges.iter().enumerate() {
            out[e] = (0.5 * (state.l[v] + loo[slot])).tanh();
        }
    }
    out
}

/// Taylor check update on tanh-domain messages.
pub fn check_update_taylor(state: &MessageState, idx: &EdgeIndex, q: usize) -> Vec<f64> {
    debug_assert_eq!(state.j % 2, 1, "check layers produce even j");
    let mu: Vec<f64> = state.x.iter().map(|&t| -t).collect();
    check_products(&mu, idx, |t| -taylor_2atanh(t, q))
}

/// Exact-arctanh check update on tanh-domain messages, with optional
/// symmetric output clip (the clipped-activation ablation).
pub fn check_update_arctanh_exact(
    state: &MessageState,
    idx: &EdgeIndex,
    clip_threshold: Option<f64>,
) -> Vec<f64> {
    debug_assert_eq!(state.j % 2, 1, "check layers produce even j");
    let mu: Vec<f64> = state.x.iter().map(|&t| -t).collect();
    match clip_threshold {
        None => check_products(&mu, idx, |t| -clamped_2atanh(t)),
        Some(th) => check_products(&mu, idx, move |t| (-clamped_2atanh(t)).clamp(-th, th)),
    }
}

/// Marginalization: `o_v = sigma( l_v + sum_{e in N(v)} w_bar_e x_e )`.
pub fn marginalize(state: &MessageState, w_bar: &[f64], idx: &EdgeIndex) -> Vec<f64> {
    let mut out = Vec::with_capacity(idx.num_vars());
    for v in 0..idx.num_vars() {
        let s: f64 = idx.var_all(v).iter().map(|&e| w_bar[e] * state.x[e]).sum();
        out.push(sigmoid(state.l[v] + s));
    }
    out
}

/// Hard decisions from marginals: bit 1 iff `o > 0.5`; the tie at exactly
/// 0.5 decides 0.
pub fn hard_decision(o: &[f64]) -> Vec<u8> {
    o.iter().map(|&p| u8::from(p > 0.5)).collect()
}

/// Shared kernel: gather spin means per check row, leave-one-out products by
/// prefix/suffix, then map through the activation.
fn check_from_spin_means(mu: &[f64], idx: &EdgeIndex) -> Vec<f64> {
    check_products(mu, idx, |t| -clamped_2atanh(t))
}

fn check_products(mu: &[f64], idx: &EdgeIndex, act: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; idx.len()];
    let mut vals = Vec::new();
    let mut loo = Vec::new();
    for c in 0..idx.num_checks() {
        let edges = idx.chk_all(c);
        vals.clear();
        vals.extend(edges.iter().map(|&e| mu[e]));
        loo.resize(edges.len(), 0.0);
        leave_one_out_products(&vals, &mut loo[..edges.len()]);
        for (slot, &e) in edges.iter().enumerate() {
            out[e] = act(loo[slot]);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Full decoder
// ---------------------------------------------------------------------------

/// Run `config.iters` full iterations and return hard decisions plus all
/// loss marginals. The LLR vector must match the code length.
pub fn decode(idx: &EdgeIndex, l: &[f64], config: &DecodeConfig) -> Result<DecodeOutput, DecodeError> {
    if l.len() != idx.num_vars() {
        return Err(DecodeError::LlrShape { expected: idx.num_vars(), got: l.len() });
    }
    if config.iters == 0 {
        return Err(DecodeError::ZeroIterations);
    }
    if let DecoderVariant::Weighted { weights, .. } = &config.variant {
        for wv in [&weights.w, &weights.w_bar] {
            if wv.len() != idx.len() {
                return Err(DecodeError::WeightShape { expected: idx.len(), got: wv.len() });
            }
        }
    }

    let ones = vec![1.0; idx.len()];
    let w_bar: &[f64] = match &config.variant {
        DecoderVariant::Vanilla => &ones,
        DecoderVariant::Weighted { weights, .. } => &weights.w_bar,
    };

    let mut state = MessageState::new(l.to_vec(), idx.len());
    let mut marginals = Vec::with_capacity(config.iters + 1);
    for _ in 0..config.iters {
        state.x = match &config.variant {
            DecoderVariant::Vanilla => variable_update_plain(&state, idx),
            DecoderVariant::Weighted { weights, .. } => {
                variable_update_weighted(&state, &weights.w, idx)
            }
        };
        state.j += 1;
        marginals.push(marginalize(&state, w_bar, idx));
        state.x = match &config.variant {
            DecoderVariant::Vanilla => check_update_plain(&state, idx),
            DecoderVariant::Weighted { check_op, .. } => match check_op {
                TanhCheckOp::Taylor { q } => check_update_taylor(&state, idx, *q),
                TanhCheckOp::Arctanh { clip } => check_update_arctanh_exact(&state, idx, *clip),
            },
        };
        state.j += 1;
    }
    // Replace the last variable-layer marginal list entry count: the final
    // output marginalizes the last check layer (layer 2L).
    marginals.push(marginalize(&state, w_bar, idx));
    let hard = hard_decision(marginals.last().unwrap());
    Ok(DecodeOutput { hard, marginals })
}
