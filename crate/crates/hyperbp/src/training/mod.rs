//! Zero-codeword training of the learned decoders.
//!
//! Each step simulates a batch of noisy zero codewords spanning the
//! configured SNR list, unrolls the decoder on a fresh tape per sample,
//! averages the multiloss (cross entropy summed over every variable-layer
//! marginal plus the final output), backpropagates, and applies one Adam
//! update. Per-sample RNG streams are derived from `(seed, step, sample)`,
//! so runs are reproducible and resumption from a checkpoint is
//! bit-identical.

pub mod checkpoint;

pub use checkpoint::{CheckpointError, TrainState};

use std::path::PathBuf;
use std::time::Instant;

use rand::Rng as _;
use rayon::prelude::*;
use thiserror::Error;

use crate::autodiff::{clip_grad_norm, GradError, NodeId, Tape, Tensor};
use crate::channel::{stream_rng, AwgnChannel, ChannelError, ChannelSample};
use crate::code::{EdgeIndex, LinearCode};
use crate::hyper::{build_decode_tape, HyperError, HyperIndices, HyperModel};

/// Marginal clamp applied before the logs in the loss.
pub const LOSS_CLAMP_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite {what} at step {step}; training aborted")]
    NonFinite { step: u64, what: String },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Hyper(#[from] HyperError),
    #[error(transparent)]
    Graph(#[from] GradError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Batch composition, optimizer settings and housekeeping for one run.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub snr_list_db: Vec<f64>,
    pub per_snr_batch: usize,
    pub steps: u64,
    pub seed: u64,
    pub lr: f64,
    pub clip_grad_norm: Option<f64>,
    /// Checkpoint/validation cadence in steps; 0 disables.
    pub eval_every: u64,
    pub checkpoint_dir: Option<PathBuf>,
    pub record_csv: Option<PathBuf>,
    /// Frames per validation pass.
    pub val_frames: u64,
    pub val_snr_db: f64,
}

impl TrainConfig {
    /// BCH/LDPC defaults: SNRs 1..8 dB, 15 samples each (batch 120).
    pub fn bch_ldpc(steps: u64, seed: u64) -> Self {
        Self {
            snr_list_db: (1..=8).map(f64::from).collect(),
            per_snr_batch: 15,
            steps,
            seed,
            lr: 1e-4,
            clip_grad_norm: None,
            eval_every: 0,
            checkpoint_dir: None,
            record_csv: None,
            val_frames: 2000,
            val_snr_db: 4.0,
        }
    }

    /// Polar defaults: SNRs 1..6 dB, 15 samples each (batch 90).
    pub fn polar(steps: u64, seed: u64) -> Self {
        let mut c = Self::bch_ldpc(steps, seed);
        c.snr_list_db = (1..=6).map(f64::from).collect();
        c
    }

    pub fn batch_size(&self) -> usize {
        self.per_snr_batch * self.snr_list_db.len()
    }
}

/// One step's bookkeeping.
#[derive(Debug, Clone)]
pub struct TrainRecord {
    pub step: u64,
    pub loss: f64,
    pub per_snr_loss: Vec<f64>,
    pub grad_norm: f64,
    pub wall_ms: f64,
}

/// Validation measurement taken every `eval_every` steps.
#[derive(Debug, Clone)]
pub struct ValRecord {
    pub step: u64,
    pub snr_db: f64,
    pub frames: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub zero_codeword: bool,
}

#[derive(Debug, Default)]
pub struct TrainOutcome {
    pub records: Vec<TrainRecord>,
    pub val_records: Vec<ValRecord>,
    pub warnings: Vec<String>,
}

/// Simulate one batch of noisy zero codewords: `per_snr_batch` samples at
/// each configured SNR, RNG stream `(seed, step, sample-index)`.
pub fn make_batch(
    code: &LinearCode,
    config: &TrainConfig,
    step: u64,
) -> Result<Vec<ChannelSample>, ChannelError> {
    let zero = vec![0u8; code.n()];
    let mut out = Vec::with_capacity(config.batch_size());
    for (si, &snr) in config.snr_list_db.iter().enumerate() {
        let ch = AwgnChannel::from_snr(snr, code.rate())?;
        for j in 0..config.per_snr_batch {
            let sample_idx = (si * config.per_snr_batch + j) as u64;
            let mut rng = stream_rng(config.seed, step, sample_idx);
            out.push(ch.transmit(&zero, &mut rng));
        }
    }
    Ok(out)
}

/// Multiloss over the decoder's `L + 1` marginal vectors:
/// `-(1/n) sum_h sum_v [ c_v log o_v + (1 - c_v) log(1 - o_v) ]`,
/// marginals clamped to `[1e-12, 1 - 1e-12]` before the logs.
pub fn multiloss(marginals: &[Vec<f64>], c: &[u8]) -> f64 {
    let n = c.len() as f64;
    let mut acc = 0.0;
    for o in marginals {
        debug_assert_eq!(o.len(), c.len());
        for (&ov, &cv) in o.iter().zip(c) {
            let o1 = ov.clamp(LOSS_CLAMP_EPS, 1.0 - LOSS_CLAMP_EPS);
            let o0 = (1.0 - ov).clamp(LOSS_CLAMP_EPS, 1.0 - LOSS_CLAMP_EPS);
            acc += cv as f64 * o1.ln() + (1.0 - cv as f64) * o0.ln();
        }
    }
    -acc / n
}

/// Tape version of [`multiloss`]; `c` enters as constants.
pub fn multiloss_node(
    tape: &mut Tape,
    marginal_ids: &[NodeId],
    c: &[u8],
) -> Result<NodeId, GradError> {
    let n = c.len() as f64;
    let cv: Vec<f64> = c.iter().map(|&b| b as f64).collect();
    let all_zero = c.iter().all(|&b| b == 0);
    let c_node = tape.leaf(Tensor::vector(cv.clone()));
    let c_inv = tape.leaf(Tensor::vector(cv.iter().map(|v| 1.0 - v).collect()));
    let mut total: Option<NodeId> = None;
    for &o in marginal_ids {
        // log(1 - o) branch.
        let neg = tape.scale(o, -1.0);
        let om = tape.add_scalar(neg, 1.0);
        let om = tape.clamp(om, LOSS_CLAMP_EPS, 1.0 - LOSS_CLAMP_EPS);
        let log_om = tape.log(om);
        let t0 = tape.mul(c_inv, log_om)?;
        let mut term = tape.sum(t0);
        if !all_zero {
            let oc = tape.clamp(o, LOSS_CLAMP_EPS, 1.0 - LOSS_CLAMP_EPS);
            let log_o = tape.log(oc);
            let t1 = tape.mul(c_node, log_o)?;
            let s1 = tape.sum(t1);
            term = tape.add(term, s1)?;
        }
        total = Some(match total {
            None => term,
            Some(t) => tape.add(t, term)?,
        });
    }
    let total = total.expect("at least one marginal");
    Ok(tape.scale(total, -1.0 / n))
}

struct SampleResult {
    loss: f64,
    grads: Vec<Tensor>,
    nonfinite: Option<String>,
}

fn forward_backward(
    model: &HyperModel,
    hidx: &HyperIndices,
    sample: &ChannelSample,
) -> Result<SampleResult, TrainError> {
    let mut tape = Tape::new();
    let graph = build_decode_tape(&mut tape, model, &sample.l, hidx)?;
    let loss_id = multiloss_node(&mut tape, &graph.marginal_ids, &sample.c)?;
    let loss = tape.value(loss_id).item();
    if !loss.is_finite() {
        return Ok(SampleResult {
            loss,
            grads: Vec::new(),
            nonfinite: Some(first_nonfinite_diag(&tape)),
        });
    }
    tape.backward(loss_id)?;
    let names = model.param_names();
    let mut grads = Vec::with_capacity(graph.param_ids.len());
    for (id, name) in graph.param_ids.iter().zip(&names) {
        match tape.grad(*id) {
            Ok(g) => {
                if !g.is_finite() {
                    return Ok(SampleResult {
                        loss,
                        grads: Vec::new(),
                        nonfinite: Some(format!("gradient of {name}")),
                    });
                }
                grads.push(g.clone());
            }
            // Parameters unused by the graph (e.g. at L = 1) get zero grads.
            Err(_) => grads.push(Tensor::zeros(tape.value(*id).shape().to_vec())),
        }
    }
    Ok(SampleResult { loss, grads, nonfinite: None })
}

fn first_nonfinite_diag(tape: &Tape) -> String {
    for i in 0..tape.len() {
        let node = &tape.nodes[i];
        if !node.value.is_finite() {
            return format!("forward value (node {i}, op {})", op_name(&node.op));
        }
    }
    "loss".to_string()
}

fn op_name(op: &crate::autodiff::Op) -> &'static str {
    use crate::autodiff::Op::*;
    match op {
        Leaf => "leaf",
        Add(..) => "add",
        Sub(..) => "sub",
        Mul(..) => "mul",
        Scale(..) => "scale",
        AddScalar(..) => "add_scalar",
        MatMul(..) => "matmul",
        Tanh(..) => "tanh",
        Sigmoid(..) => "sigmoid",
        Abs(..) => "abs",
        Log(..) => "log",
        Clamp(..) => "clamp",
        Atanh2(..) => "arctanh",
        Gather(..) => "gather",
        ScatterAdd(..) => "scatter_add",
        LooProduct(..) => "leave_one_out_product",
        TaylorOddPoly(..) => "taylor_poly",
        Concat(..) => "concat",
        Sum(..) => "sum",
        Reshape(..) => "reshape",
    }
}

/// Quick BER measurement used for validation during training.
fn validation_ber(
    code: &LinearCode,
    model: &HyperModel,
    hidx: &HyperIndices,
    snr_db: f64,
    frames: u64,
    seed: u64,
    zero_codeword: bool,
) -> Result<(u64, f64), TrainError> {
    let ch = AwgnChannel::from_snr(snr_db, code.rate())?;
    let errors: u64 = (0..frames)
        .into_par_iter()
        .map(|f| {
            let mut rng = stream_rng(seed, 0x7a11, f);
            let cw = if zero_codeword {
                vec![0u8; code.n()]
            } else {
                let u: Vec<u8> = (0..code.k()).map(|_| rng.gen_range(0..2u8)).collect();
                code.encode(&u).expect("validation requires G")
            };
            let sample = ch.transmit(&cw, &mut rng);
            let out = crate::hyper::hyper_decode(model, &sample.l, hidx)
                .expect("model/code shapes verified");
            out.hard.iter().zip(&cw).filter(|(a, b)| a != b).count() as u64
        })
        .sum();
    let ber = errors as f64 / (frames as f64 * code.n() as f64);
    Ok((errors, ber))
}

/// Run (or resume) training until `config.steps`. Gradients are averaged
/// per batch in sample order, so identical seeds give identical loss curves.
/// A non-finite loss or gradient aborts with a diagnostic naming the layer.
pub fn train(
    code: &LinearCode,
    state: &mut TrainState,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    let idx = EdgeIndex::build(code);
    let hidx = HyperIndices::build(&idx);
    if hidx.num_edges != state.model.edge_count {
        return Err(TrainError::Hyper(HyperError::EdgeCountMismatch {
            expected: state.model.edge_count,
            got: hidx.num_edges,
        }));
    }
    state.adam.lr = config.lr;

    let mut outcome = TrainOutcome::default();
    if code.generator().is_none() {
        outcome.warnings.push(
            "generator matrix absent: validation falls back to zero codewords".to_string(),
        );
    }
    let mut csv: Option<std::fs::File> = match &config.record_csv {
        Some(path) => {
            use std::io::Write;
            let mut f = std::fs::File::create(path)?;
            writeln!(f, "step,loss,grad_norm,wall_ms")?;
            Some(f)
        }
        None => None,
    };

    let batch = config.batch_size();
    while state.step < config.steps {
        let step = state.step;
        let t0 = Instant::now();
        let samples = make_batch(code, config, step)?;
        debug_assert_eq!(samples.len(), batch);

        let model_ref = &state.model;
        let results: Vec<SampleResult> = samples
            .par_iter()
            .map(|s| forward_backward(model_ref, &hidx, s))
            .collect::<Result<_, _>>()?;

        // Deterministic order: fold sequentially over the batch.
        let mut mean_loss = 0.0;
        let mut grads: Option<Vec<Tensor>> = None;
        let mut per_snr = vec![0.0; config.snr_list_db.len()];
        for (i, r) in results.iter().enumerate() {
            if let Some(what) = &r.nonfinite {
                return Err(TrainError::NonFinite { step, what: what.clone() });
            }
            mean_loss += r.loss;
            per_snr[i / config.per_snr_batch] += r.loss;
            match &mut grads {
                None => grads = Some(r.grads.clone()),
                Some(acc) => {
                    for (a, g) in acc.iter_mut().zip(&r.grads) {
                        for (av, gv) in a.data_mut().iter_mut().zip(g.data()) {
                            *av += gv;
                        }
                    }
                }
            }
        }
        mean_loss /= batch as f64;
        for v in per_snr.iter_mut() {
            *v /= config.per_snr_batch as f64;
        }
        let mut grads = grads.expect("nonempty batch");
        let scale = 1.0 / batch as f64;
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= scale;
            }
        }
        let grad_norm =
            grads.iter().map(|g| g.data().iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt();
        if !grad_norm.is_finite() {
            return Err(TrainError::NonFinite { step, what: "batch gradient norm".to_string() });
        }
        if let Some(max_norm) = config.clip_grad_norm {
            clip_grad_norm(&mut grads, max_norm);
        }
        state.adam.step(&mut state.model.params_mut(), &grads)?;
        state.step += 1;

        let record = TrainRecord {
            step,
            loss: mean_loss,
            per_snr_loss: per_snr,
            grad_norm,
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        };
        if let Some(f) = csv.as_mut() {
            use std::io::Write;
            writeln!(
                f,
                "{},{:.17e},{:.17e},{:.3}",
                record.step, record.loss, record.grad_norm, record.wall_ms
            )?;
        }
        outcome.records.push(record);

        if config.eval_every > 0 && state.step % config.eval_every == 0 {
            if let Some(dir) = &config.checkpoint_dir {
                std::fs::create_dir_all(dir)?;
                checkpoint::save(&dir.join(format!("step_{:07}.ckpt", state.step)), state, code)?;
                checkpoint::save(&dir.join("latest.ckpt"), state, code)?;
            }
            let zero = code.generator().is_none();
            let (errors, ber) = validation_ber(
                code,
                &state.model,
                &hidx,
                config.val_snr_db,
                config.val_frames,
                config.seed ^ state.step,
                zero,
            )?;
            outcome.val_records.push(ValRecord {
                step: state.step,
                snr_db: config.val_snr_db,
                frames: config.val_frames,
                bit_errors: errors,
                ber,
                zero_codeword: zero,
            });
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests;
