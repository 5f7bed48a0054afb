//! Text checkpoint format.
//!
//! A checkpoint is a plain-text document: a header (format version, code
//! identity, architecture, ablation flags, edge-ordering tag, RNG seed and
//! step counter) followed by named tensors, each as `tensor <name> <dims...>`
//! and row-major values at 17 significant digits, which round-trips `f64`
//! exactly. Optimizer moments are stored the same way so resumed training is
//! bit-identical.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::autodiff::{AdamState, Tensor};
use crate::code::LinearCode;
use crate::hyper::{CheckKind, FSpec, GSpec, HyperModel, ThetaF, VariableNet};

pub const FORMAT_TAG: &str = "hyperbp-checkpoint v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("unsupported format tag `{0}`")]
    BadFormat(String),
    #[error("checkpoint is for code `{ckpt}` ({detail}), not the loaded code `{code}`")]
    CodeMismatch { ckpt: String, code: String, detail: String },
    #[error("truncated file: expected {expected}")]
    Truncated { expected: String },
}

/// Model plus optimizer and position, i.e. everything needed to resume.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub model: HyperModel,
    pub adam: AdamState,
    pub step: u64,
    pub seed: u64,
}

impl TrainState {
    /// Fresh state at step 0 with zeroed optimizer moments.
    pub fn new(model: HyperModel, lr: f64, seed: u64) -> Self {
        let adam = AdamState::new(&model.param_shapes(), lr);
        Self { model, adam, step: 0, seed }
    }
}

fn write_tensor(out: &mut String, name: &str, t: &Tensor) {
    let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
    writeln!(out, "tensor {} {}", name, dims.join(" ")).unwrap();
    let vals: Vec<String> = t.data().iter().map(|v| format!("{v:.16e}")).collect();
    writeln!(out, "{}", vals.join(" ")).unwrap();
}

/// Serialize a training state against its code.
pub fn to_text(state: &TrainState, code: &LinearCode) -> String {
    let m = &state.model;
    let mut out = String::new();
    writeln!(out, "{FORMAT_TAG}").unwrap();
    writeln!(out, "code {}", m.code_name).unwrap();
    writeln!(out, "n {}", m.n).unwrap();
    writeln!(out, "k {}", code.k()).unwrap();
    writeln!(out, "edges {}", m.edge_count).unwrap();
    writeln!(out, "d-v-max {}", m.d_v_max).unwrap();
    let dims: Vec<String> = m.g_spec.layer_dims().iter().map(|d| d.to_string()).collect();
    writeln!(out, "g-spec {}", dims.join(" ")).unwrap();
    match &m.net {
        VariableNet::Hyper { f_spec, .. } => {
            let mut fd = vec![f_spec.input_dim.to_string()];
            fd.extend(f_spec.widths.iter().map(|d| d.to_string()));
            writeln!(out, "f-spec {}", fd.join(" ")).unwrap();
        }
        VariableNet::Fixed { .. } => writeln!(out, "f-spec fixed").unwrap(),
    }
    writeln!(out, "q {}", m.q).unwrap();
    writeln!(out, "iters {}", m.iters).unwrap();
    writeln!(out, "use-abs {}", m.use_abs).unwrap();
    writeln!(out, "hypernetwork {}", m.uses_hypernetwork()).unwrap();
    match m.check {
        CheckKind::Taylor => writeln!(out, "check-op taylor").unwrap(),
        CheckKind::Arctanh => writeln!(out, "check-op arctanh").unwrap(),
        CheckKind::ArctanhClipped(th) => {
            writeln!(out, "check-op arctanh-clipped {th:.16e}").unwrap()
        }
    }
    writeln!(out, "edge-order column-major").unwrap();
    writeln!(out, "seed {}", state.seed).unwrap();
    writeln!(out, "step {}", state.step).unwrap();

    let names = m.param_names();
    let params = m.params();
    writeln!(out, "tensors {}", names.len()).unwrap();
    for (name, t) in names.iter().zip(&params) {
        write_tensor(&mut out, name, t);
    }
    writeln!(out, "adam-lr {:.16e}", state.adam.lr).unwrap();
    writeln!(out, "adam-step {}", state.adam.step_count()).unwrap();
    let (ms, vs) = state.adam.moments();
    for (name, t) in names.iter().zip(ms) {
        write_tensor(&mut out, &format!("adam-m.{name}"), t);
    }
    for (name, t) in names.iter().zip(vs) {
        write_tensor(&mut out, &format!("adam-v.{name}"), t);
    }
    writeln!(out, "end").unwrap();
    out
}

pub fn save(path: &Path, state: &TrainState, code: &LinearCode) -> Result<(), CheckpointError> {
    std::fs::write(path, to_text(state, code))?;
    Ok(())
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, expected: &str) -> Result<(usize, &'a str), CheckpointError> {
        for (i, line) in self.iter.by_ref() {
            if !line.trim().is_empty() {
                return Ok((i + 1, line.trim()));
            }
        }
        Err(CheckpointError::Truncated { expected: expected.to_string() })
    }

    fn field(&mut self, key: &str) -> Result<(usize, String), CheckpointError> {
        let (ln, line) = self.next(key)?;
        let rest = line.strip_prefix(key).and_then(|r| r.strip_prefix(' ')).ok_or_else(|| {
            CheckpointError::Malformed { line: ln, msg: format!("expected `{key} ...`, got `{line}`") }
        })?;
        Ok((ln, rest.to_string()))
    }

    fn usize_field(&mut self, key: &str) -> Result<usize, CheckpointError> {
        let (ln, v) = self.field(key)?;
        v.parse().map_err(|e| CheckpointError::Malformed { line: ln, msg: format!("{key}: {e}") })
    }

    fn u64_field(&mut self, key: &str) -> Result<u64, CheckpointError> {
        let (ln, v) = self.field(key)?;
        v.parse().map_err(|e| CheckpointError::Malformed { line: ln, msg: format!("{key}: {e}") })
    }
}

fn read_tensor(lines: &mut Lines, want_name: &str) -> Result<Tensor, CheckpointError> {
    let (ln, header) = lines.next("tensor header")?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("tensor") {
        return Err(CheckpointError::Malformed { line: ln, msg: format!("expected tensor header, got `{header}`") });
    }
    let name = toks.next().ok_or(CheckpointError::Malformed { line: ln, msg: "missing tensor name".into() })?;
    if name != want_name {
        return Err(CheckpointError::Malformed {
            line: ln,
            msg: format!("expected tensor `{want_name}`, found `{name}`"),
        });
    }
    let shape: Vec<usize> = toks
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|e| CheckpointError::Malformed { line: ln, msg: format!("shape: {e}") })?;
    let numel: usize = shape.iter().product();
    let (vln, vals_line) = lines.next("tensor values")?;
    let vals: Vec<f64> = vals_line
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|e| CheckpointError::Malformed { line: vln, msg: format!("values: {e}") })?;
    if vals.len() != numel {
        return Err(CheckpointError::Truncated {
            expected: format!("{numel} values for tensor {want_name}, found {}", vals.len()),
        });
    }
    Ok(Tensor::new(shape, vals))
}

/// Parse a checkpoint and validate it against `code`.
pub fn from_text(text: &str, code: &LinearCode) -> Result<TrainState, CheckpointError> {
    let mut lines = Lines { iter: text.lines().enumerate() };
    let (_, tag) = lines.next("format tag")?;
    if tag != FORMAT_TAG {
        return Err(CheckpointError::BadFormat(tag.to_string()));
    }
    let (_, name) = lines.field("code")?;
    let n = lines.usize_field("n")?;
    let k = lines.usize_field("k")?;
    let edges = lines.usize_field("edges")?;
    let d_v_max = lines.usize_field("d-v-max")?;
    let idx = crate::code::EdgeIndex::build(code);
    let code_dvm = (0..code.n()).map(|v| idx.var_all(v).len()).max().unwrap_or(1);
    let mismatch = |detail: String| CheckpointError::CodeMismatch {
        ckpt: name.clone(),
        code: code.name().to_string(),
        detail,
    };
    if name != code.name() {
        return Err(mismatch("name".into()));
    }
    if n != code.n() || k != code.k() {
        return Err(mismatch(format!("n={n} k={k}")));
    }
    if edges != code.edge_count() || d_v_max != code_dvm {
        return Err(mismatch(format!("edges={edges} d_v_max={d_v_max}")));
    }

    let (gln, gdims_s) = lines.field("g-spec")?;
    let gdims: Vec<usize> = gdims_s
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|e| CheckpointError::Malformed { line: gln, msg: format!("g-spec: {e}") })?;
    if gdims.len() < 2 || *gdims.last().unwrap() != 1 {
        return Err(CheckpointError::Malformed { line: gln, msg: "g-spec must end in 1".into() });
    }
    let g_spec = GSpec { input_dim: gdims[0], hidden: gdims[1..gdims.len() - 1].to_vec() };

    let (fln, f_s) = lines.field("f-spec")?;
    let f_spec = if f_s == "fixed" {
        None
    } else {
        let fd: Vec<usize> = f_s
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| CheckpointError::Malformed { line: fln, msg: format!("f-spec: {e}") })?;
        if fd.len() < 2 {
            return Err(CheckpointError::Malformed { line: fln, msg: "f-spec too short".into() });
        }
        Some(FSpec { input_dim: fd[0], widths: fd[1..].to_vec() })
    };

    let q = lines.usize_field("q")?;
    let iters = lines.usize_field("iters")?;
    let (aln, abs_s) = lines.field("use-abs")?;
    let use_abs: bool = abs_s
        .parse()
        .map_err(|_| CheckpointError::Malformed { line: aln, msg: "use-abs".into() })?;
    let (hln, hyp_s) = lines.field("hypernetwork")?;
    let hypernetwork: bool = hyp_s
        .parse()
        .map_err(|_| CheckpointError::Malformed { line: hln, msg: "hypernetwork".into() })?;
    if hypernetwork != f_spec.is_some() {
        return Err(CheckpointError::Malformed {
            line: hln,
            msg: "hypernetwork flag disagrees with f-spec".into(),
        });
    }
    let (cln, check_s) = lines.field("check-op")?;
    let check = match check_s.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["taylor"] => CheckKind::Taylor,
        ["arctanh"] => CheckKind::Arctanh,
        ["arctanh-clipped", th] => CheckKind::ArctanhClipped(th.parse().map_err(|e| {
            CheckpointError::Malformed { line: cln, msg: format!("clip threshold: {e}") }
        })?),
        _ => {
            return Err(CheckpointError::Malformed {
                line: cln,
                msg: format!("unknown check-op `{check_s}`"),
            })
        }
    };
    let (eln, order) = lines.field("edge-order")?;
    if order != "column-major" {
        return Err(CheckpointError::Malformed {
            line: eln,
            msg: format!("unsupported edge order `{order}`"),
        });
    }
    let seed = lines.u64_field("seed")?;
    let step = lines.u64_field("step")?;

    let count = lines.usize_field("tensors")?;
    // Expected names, derived from the specs.
    let mut names: Vec<String> = Vec::new();
    if let Some(fs) = &f_spec {
        for i in 0..fs.trunk_shapes().len() {
            names.push(format!("trunk.{i}"));
        }
        for i in 0..g_spec.num_matrices() {
            names.push(format!("head.{i}"));
        }
    } else {
        for i in 0..g_spec.num_matrices() {
            names.push(format!("g.{i}"));
        }
    }
    names.push("w_bar".into());
    if names.len() != count {
        return Err(CheckpointError::Malformed {
            line: 0,
            msg: format!("tensor count {count} does not match architecture ({})", names.len()),
        });
    }
    let mut tensors = Vec::with_capacity(count);
    for name in &names {
        tensors.push(read_tensor(&mut lines, name)?);
    }
    let w_bar = tensors.pop().expect("w_bar present");
    let net = if let Some(fs) = f_spec {
        let trunk_n = fs.trunk_shapes().len();
        let trunk: Vec<Tensor> = tensors.drain(..trunk_n).collect();
        let heads: Vec<Tensor> = tensors.drain(..).collect();
        VariableNet::Hyper { f_spec: fs, theta_f: ThetaF { trunk, heads } }
    } else {
        VariableNet::Fixed { theta_g: tensors }
    };

    let (lln, lr_s) = lines.field("adam-lr")?;
    let lr: f64 = lr_s
        .parse()
        .map_err(|e| CheckpointError::Malformed { line: lln, msg: format!("adam-lr: {e}") })?;
    let adam_step = lines.u64_field("adam-step")?;
    let mut ms = Vec::with_capacity(count);
    for name in &names {
        ms.push(read_tensor(&mut lines, &format!("adam-m.{name}"))?);
    }
    let mut vs = Vec::with_capacity(count);
    for name in &names {
        vs.push(read_tensor(&mut lines, &format!("adam-v.{name}"))?);
    }
    let (_, end) = lines.next("end marker")?;
    if end != "end" {
        return Err(CheckpointError::Malformed { line: 0, msg: format!("expected `end`, got `{end}`") });
    }

    let model = HyperModel {
        code_name: name,
        n,
        edge_count: edges,
        d_v_max,
        g_spec,
        net,
        w_bar,
        q,
        iters,
        use_abs,
        check,
    };
    let adam = AdamState::restore(lr, adam_step, ms, vs);
    Ok(TrainState { model, adam, step, seed })
}

pub fn load(path: &Path, code: &LinearCode) -> Result<TrainState, CheckpointError> {
    let text = std::fs::read_to_string(path)?;
    from_text(&text, code)
}
