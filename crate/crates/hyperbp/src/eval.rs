//! Monte-Carlo BER/FER estimation, reporting tables and curve export.
//!
//! Frames are embarrassingly parallel: each frame draws its RNG stream from
//! `(seed, snr, frame index)`, so results are bit-identical whether frames
//! run sequentially or across threads, and simulation proceeds in fixed-size
//! rounds until the stopping rule is met (enough bit errors or the frame
//! budget is exhausted).

use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bp::{decode, DecodeConfig, DecodeError};
use crate::channel::{stream_rng, AwgnChannel, ChannelError, ChannelSample};
use crate::code::{CodeError, EdgeIndex, LinearCode};
use crate::hyper::{hyper_decode, HyperError, HyperIndices, HyperModel};
use crate::math::taylor_2atanh;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("random-codeword evaluation requires a generator matrix (or select zero-codeword mode)")]
    GeneratorAbsent,
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Hyper(#[from] HyperError),
    #[error("taylor grid value {0} outside (-1, 1): exact arctanh undefined")]
    TaylorDomain(f64),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Stop at `min_bit_errors` collected errors or `max_frames`, whichever
/// comes first. Defaults: 500 errors, 1e7 frames (under 5% relative
/// standard error on the BER when uncensored).
#[derive(Debug, Clone, Copy)]
pub struct StopRule {
    pub min_bit_errors: u64,
    pub max_frames: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { min_bit_errors: 500, max_frames: 10_000_000 }
    }
}

/// Codeword source for the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Random messages through the generator matrix (the default).
    RandomCodewords,
    /// All-zero codewords (symmetry experiments).
    ZeroCodeword,
}

/// Decoder under test.
pub enum EvalDecoder<'a> {
    Bp { config: DecodeConfig, label: String },
    Hyper { model: &'a HyperModel, label: String },
}

impl<'a> EvalDecoder<'a> {
    pub fn vanilla_bp(iters: usize) -> Self {
        EvalDecoder::Bp { config: DecodeConfig::vanilla(iters), label: "bp".into() }
    }

    pub fn bp(config: DecodeConfig, label: impl Into<String>) -> Self {
        EvalDecoder::Bp { config, label: label.into() }
    }

    pub fn hyper(model: &'a HyperModel) -> Self {
        EvalDecoder::Hyper { model, label: "hyper".into() }
    }

    pub fn label(&self) -> &str {
        match self {
            EvalDecoder::Bp { label, .. } | EvalDecoder::Hyper { label, .. } => label,
        }
    }

    pub fn iters(&self) -> usize {
        match self {
            EvalDecoder::Bp { config, .. } => config.iters,
            EvalDecoder::Hyper { model, .. } => model.iters,
        }
    }
}

/// One Monte-Carlo measurement row.
#[derive(Debug, Clone)]
pub struct BerRecord {
    pub code: String,
    pub decoder: String,
    pub snr_db: f64,
    pub iters: usize,
    pub frames: u64,
    pub bit_errors: u64,
    pub frame_errors: u64,
    pub ber: f64,
    pub fer: f64,
    /// `-ln(ber)`; `None` when no bit errors were observed (censored).
    pub neg_ln_ber: Option<f64>,
    pub ci95: (f64, f64),
    pub censored: bool,
    pub seed: u64,
    pub wall_ms: f64,
}

impl BerRecord {
    /// Normal-approximation 95% interval on `-ln(ber)` (swapped ends: a
    /// higher BER bound is a lower `-ln`).
    pub fn neg_ln_ci(&self) -> Option<(f64, f64)> {
        if self.censored || self.ci95.0 <= 0.0 {
            return None;
        }
        Some((-self.ci95.1.ln(), -self.ci95.0.ln()))
    }
}

fn wilson_ci(errors: u64, trials: u64) -> (f64, f64) {
    let n = trials as f64;
    if errors == 0 {
        // Clopper-Pearson upper bound at zero successes.
        return (0.0, 1.0 - 0.025f64.powf(1.0 / n));
    }
    let p = errors as f64 / n;
    let half = 1.96 * (p * (1.0 - p) / n).sqrt();
    ((p - half).max(0.0), (p + half).min(1.0))
}

/// Simulate frames until the stop rule fires; core loop shared by the real
/// decoders and the estimator self-tests.
fn run_point_with<F>(
    code: &LinearCode,
    label: &str,
    iters: usize,
    decode_frame: F,
    snr_db: f64,
    stop: &StopRule,
    seed: u64,
    mode: EvalMode,
) -> Result<BerRecord, EvalError>
where
    F: Fn(&ChannelSample) -> Vec<u8> + Sync,
{
    if mode == EvalMode::RandomCodewords && code.generator().is_none() {
        return Err(EvalError::GeneratorAbsent);
    }
    let start = Instant::now();
    let ch = AwgnChannel::from_snr(snr_db, code.rate())?;
    let n = code.n();
    let k = code.k();
    const ROUND: u64 = 2048;

    let mut frames = 0u64;
    let mut bit_errors = 0u64;
    let mut frame_errors = 0u64;
    while bit_errors < stop.min_bit_errors && frames < stop.max_frames {
        let todo = ROUND.min(stop.max_frames - frames);
        let (be, fe) = (frames..frames + todo)
            .into_par_iter()
            .map(|f| {
                let mut rng = stream_rng(seed, snr_db.to_bits(), f);
                let cw = match mode {
                    EvalMode::ZeroCodeword => vec![0u8; n],
                    EvalMode::RandomCodewords => {
                        let u: Vec<u8> = (0..k).map(|_| rng.gen_range(0..2u8)).collect();
                        code.encode(&u).expect("generator checked above")
                    }
                };
                let sample = ch.transmit(&cw, &mut rng);
                let hard = decode_frame(&sample);
                let be = hard.iter().zip(&cw).filter(|(a, b)| a != b).count() as u64;
                (be, u64::from(be > 0))
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        bit_errors += be;
        frame_errors += fe;
        frames += todo;
    }

    let trials = frames * n as u64;
    let ber = bit_errors as f64 / trials as f64;
    let fer = frame_errors as f64 / frames as f64;
    let censored = bit_errors == 0;
    Ok(BerRecord {
        code: code.name().to_string(),
        decoder: label.to_string(),
        snr_db,
        iters,
        frames,
        bit_errors,
        frame_errors,
        ber,
        fer,
        neg_ln_ber: if censored { None } else { Some(-ber.ln()) },
        ci95: wilson_ci(bit_errors, trials),
        censored,
        seed,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Measure one (code, decoder, SNR) point.
pub fn run_point(
    code: &LinearCode,
    decoder: &EvalDecoder,
    snr_db: f64,
    stop: &StopRule,
    seed: u64,
    mode: EvalMode,
) -> Result<BerRecord, EvalError> {
    let idx = EdgeIndex::build(code);
    match decoder {
        EvalDecoder::Bp { config, label } => {
            // Fail fast on shape problems before the frame loop.
            decode(&idx, &vec![0.0; code.n()], config)?;
            run_point_with(
                code,
                label,
                config.iters,
                |s| decode(&idx, &s.l, config).expect("validated above").hard,
                snr_db,
                stop,
                seed,
                mode,
            )
        }
        EvalDecoder::Hyper { model, label } => {
            let hidx = HyperIndices::build(&idx);
            hyper_decode(model, &vec![0.0; code.n()], &hidx)?;
            run_point_with(
                code,
                label,
                model.iters,
                |s| hyper_decode(model, &s.l, &hidx).expect("validated above").hard,
                snr_db,
                stop,
                seed,
                mode,
            )
        }
    }
}

/// Measure a whole SNR grid. An empty grid yields an empty record list.
pub fn run_curve(
    code: &LinearCode,
    decoder: &EvalDecoder,
    snr_grid: &[f64],
    stop: &StopRule,
    seed: u64,
    mode: EvalMode,
) -> Result<Vec<BerRecord>, EvalError> {
    snr_grid.iter().map(|&snr| run_point(code, decoder, snr, stop, seed, mode)).collect()
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

pub const CSV_HEADER: &str = "code,decoder,snr_db,L,frames,bit_errors,frame_errors,ber,fer,neg_ln_ber,ci95_low,ci95_high,censored,seed,wall_ms";

/// CSV per the fixed schema; `config_echo` lines are prepended as `#`
/// comments so every file is self-describing.
pub fn csv_string(records: &[BerRecord], config_echo: &[String]) -> String {
    let mut out = String::new();
    for line in config_echo {
        writeln!(out, "# {line}").unwrap();
    }
    writeln!(out, "{CSV_HEADER}").unwrap();
    for r in records {
        let neg = r.neg_ln_ber.map(|v| format!("{v:.6}")).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{:e},{:e},{},{:e},{:e},{},{},{:.3}",
            r.code,
            r.decoder,
            r.snr_db,
            r.iters,
            r.frames,
            r.bit_errors,
            r.frame_errors,
            r.ber,
            r.fer,
            neg,
            r.ci95.0,
            r.ci95.1,
            r.censored,
            r.seed,
            r.wall_ms
        )
        .unwrap();
    }
    out
}

/// Two-column `(snr_db, ber)` plot data for one decoder series.
pub fn plot_data_string(records: &[BerRecord], config_echo: &[String]) -> String {
    let mut out = String::new();
    for line in config_echo {
        writeln!(out, "# {line}").unwrap();
    }
    for r in records {
        writeln!(out, "{} {:e}", r.snr_db, r.ber).unwrap();
    }
    out
}

/// Format records as a `-ln(BER)` table: one row per code, decoder column
/// groups with one column per SNR. The best value per (code, SNR) carries a
/// `*`; censored cells render as an em dash.
pub fn compare_table(records: &[BerRecord]) -> String {
    let mut codes: Vec<String> = Vec::new();
    let mut decoders: Vec<String> = Vec::new();
    let mut snrs: Vec<i64> = Vec::new();
    for r in records {
        if !codes.contains(&r.code) {
            codes.push(r.code.clone());
        }
        if !decoders.contains(&r.decoder) {
            decoders.push(r.decoder.clone());
        }
        let key = (r.snr_db * 1000.0).round() as i64;
        if !snrs.contains(&key) {
            snrs.push(key);
        }
    }
    snrs.sort_unstable();
    let fmt_snr = |key: i64| {
        let v = key as f64 / 1000.0;
        if (v - v.round()).abs() < 1e-9 {
            format!("{}", v.round() as i64)
        } else {
            format!("{v}")
        }
    };

    let cell = |code: &str, dec: &str, snr: i64| -> Option<&BerRecord> {
        records.iter().find(|r| {
            r.code == code && r.decoder == dec && ((r.snr_db * 1000.0).round() as i64) == snr
        })
    };

    let mut out = String::new();
    writeln!(out, "-ln(BER), higher is better ('*' best per code/SNR, '-' censored)").unwrap();
    let code_w = codes.iter().map(|c| c.len()).max().unwrap_or(4).max(4);
    let mut header = format!("{:<code_w$}", "code");
    for d in &decoders {
        for s in &snrs {
            header += &format!("  {:>10}", format!("{}@{}", d, fmt_snr(*s)));
        }
    }
    writeln!(out, "{header}").unwrap();
    for c in &codes {
        let mut line = format!("{c:<code_w$}");
        for d in &decoders {
            for s in &snrs {
                let best: Option<f64> = decoders
                    .iter()
                    .filter_map(|dd| cell(c, dd, *s).and_then(|r| r.neg_ln_ber))
                    .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))));
                let text = match cell(c, d, *s) {
                    None => String::new(),
                    Some(r) => match r.neg_ln_ber {
                        None => "-".to_string(),
                        Some(v) => {
                            let star = best.map_or(false, |b| (v - b).abs() < 1e-12);
                            format!("{v:.2}{}", if star { "*" } else { "" })
                        }
                    },
                };
                line += &format!("  {text:>10}");
            }
        }
        writeln!(out, "{line}").unwrap();
    }
    out
}

// ---------------------------------------------------------------------------
// Taylor curve (figure data)
// ---------------------------------------------------------------------------

/// `(t, taylor_q(t), 2 arctanh(t))` triples per requested degree.
#[derive(Debug, Clone)]
pub struct TaylorCurve {
    pub grid: Vec<f64>,
    /// One `(q, values)` series per degree.
    pub series: Vec<(usize, Vec<f64>)>,
    pub exact: Vec<f64>,
}

pub fn taylor_curve(q_list: &[usize], grid: &[f64]) -> Result<TaylorCurve, EvalError> {
    if let Some(&bad) = grid.iter().find(|t| t.abs() >= 1.0) {
        return Err(EvalError::TaylorDomain(bad));
    }
    let series = q_list
        .iter()
        .map(|&q| (q, grid.iter().map(|&t| taylor_2atanh(t, q)).collect()))
        .collect();
    let exact = grid.iter().map(|&t| 2.0 * t.atanh()).collect();
    Ok(TaylorCurve { grid: grid.to_vec(), series, exact })
}

impl TaylorCurve {
    /// Three-column plot data `(t, taylor_q, exact)` for one series.
    pub fn plot_string(&self, series_index: usize, config_echo: &[String]) -> String {
        let (q, vals) = &self.series[series_index];
        let mut out = String::new();
        for line in config_echo {
            writeln!(out, "# {line}").unwrap();
        }
        writeln!(out, "# t taylor_q{q} two_arctanh").unwrap();
        for ((t, v), e) in self.grid.iter().zip(vals).zip(&self.exact) {
            writeln!(out, "{t} {v:.12e} {e:.12e}").unwrap();
        }
        out
    }
}
