//! Command-line front end: code inspection, decoding, training, Monte-Carlo
//! evaluation and figure-data export. Every subcommand echoes its fully
//! resolved configuration (flags plus defaults) as `# key = value` lines so
//! any output is reproducible from its own header.
//!
//! Exit codes: 0 success, 2 usage, 3 input/format, 4 numeric abort during
//! training, 5 I/O.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hyperbp::alist::load_code;
use hyperbp::bp::{BpWeights, DecodeConfig, TanhCheckOp};
use hyperbp::channel::{stream_rng, AwgnChannel};
use hyperbp::code::{size_summary, LinearCode};
use hyperbp::eval::{
    compare_table, csv_string, plot_data_string, run_curve, taylor_curve, BerRecord, EvalDecoder,
    EvalMode, StopRule, CSV_HEADER,
};
use hyperbp::hyper::{CheckKind, HyperModelConfig, HyperModel};
use hyperbp::training::{checkpoint, train, TrainConfig, TrainError, TrainState};

const EXIT_INPUT: u8 = 3;
const EXIT_NUMERIC: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Parser)]
#[command(name = "hyperbp", version, about = "Belief-propagation decoders with learned variable nodes")]
struct Cli {
    /// Plain-text key=value file supplying flag defaults (flags override).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print code parameters and the degree profile.
    Info(CodeArgs),
    /// Decode a few simulated frames and print per-frame results.
    Decode(DecodeArgs),
    /// Train a learned decoder on noisy zero codewords.
    Train(TrainArgs),
    /// Monte-Carlo BER/FER over an SNR grid; CSV plus table output.
    Eval(EvalArgs),
    /// Emit arctanh-vs-Taylor curve data files.
    Taylor(TaylorArgs),
    /// Merge eval CSV files into one comparison table.
    Compare(CompareArgs),
}

#[derive(Args)]
struct CodeArgs {
    /// Parity-check matrix file (alist or dense 0/1 text).
    #[arg(long)]
    code: PathBuf,
    /// Generator matrix file (dense 0/1 text).
    #[arg(long)]
    gen: Option<PathBuf>,
}

#[derive(Args)]
struct DecoderArgs {
    /// Decoder: bp | weighted | hyper.
    #[arg(long, default_value = "bp")]
    decoder: String,
    /// Iterations L.
    #[arg(long, short = 'L', default_value_t = 5)]
    iters: usize,
    /// Taylor degree q (weighted/hyper decoders).
    #[arg(long, default_value_t = 1005)]
    q: usize,
    /// Check activation: taylor | arctanh | arctanh-clipped.
    #[arg(long, default_value = "taylor")]
    check_op: String,
    /// Clip threshold for --check-op arctanh-clipped.
    #[arg(long, default_value_t = 1.0)]
    clip_th: f64,
    /// Checkpoint with trained weights (hyper decoder).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct DecodeArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[command(flatten)]
    decoder: DecoderArgs,
    /// Eb/N0 in dB.
    #[arg(long, default_value_t = 4.0)]
    snr: f64,
    /// Number of frames to decode.
    #[arg(long, default_value_t = 10)]
    frames: u64,
    /// Simulate the all-zeros codeword instead of random messages.
    #[arg(long)]
    zero_codeword: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    code: CodeArgs,
    /// Training steps.
    #[arg(long, default_value_t = 20_000)]
    steps: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Comma-separated SNR list in dB (defaults to 1..8).
    #[arg(long)]
    snr_list: Option<String>,
    /// Samples per SNR per batch.
    #[arg(long, default_value_t = 15)]
    per_snr: usize,
    /// Adam learning rate.
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    /// Iterations L of the unrolled decoder.
    #[arg(long, short = 'L', default_value_t = 5)]
    iters: usize,
    /// Taylor degree q.
    #[arg(long, default_value_t = 1005)]
    q: usize,
    /// Check activation: taylor | arctanh | arctanh-clipped.
    #[arg(long, default_value = "taylor")]
    check_op: String,
    #[arg(long, default_value_t = 1.0)]
    clip_th: f64,
    /// Ablation: feed f the raw messages instead of their magnitudes.
    #[arg(long)]
    no_abs: bool,
    /// Ablation: fixed learned g (no hypernetwork), |x| appended to input.
    #[arg(long)]
    no_hypernetwork: bool,
    /// g hidden widths, comma separated.
    #[arg(long, default_value = "16,16")]
    g_hidden: String,
    /// Use the 4 x 128 hypernetwork trunk.
    #[arg(long)]
    deeper_f: bool,
    /// Optional global gradient-norm clip.
    #[arg(long)]
    grad_clip: Option<f64>,
    /// Checkpoint/validation cadence in steps (0 = only at the end).
    #[arg(long, default_value_t = 1000)]
    eval_every: u64,
    /// Output directory for checkpoints and the loss CSV.
    #[arg(long, default_value = "train-out")]
    out_dir: PathBuf,
    /// Resume from a checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[command(flatten)]
    decoder: DecoderArgs,
    /// Comma-separated SNR grid in dB.
    #[arg(long, default_value = "4,5,6")]
    snr: String,
    /// Stop after this many bit errors per point.
    #[arg(long, default_value_t = 500)]
    min_errors: u64,
    /// Frame budget per point.
    #[arg(long, default_value_t = 10_000_000)]
    max_frames: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Evaluate on the all-zeros codeword.
    #[arg(long, conflicts_with = "random_codewords")]
    zero_codeword: bool,
    /// Evaluate on random generator-encoded codewords (the default).
    #[arg(long)]
    random_codewords: bool,
    /// Worker threads for frame-level parallelism (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Write the records as CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write one two-column (snr, ber) plot-data file per decoder here.
    #[arg(long)]
    plot_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TaylorArgs {
    /// Comma-separated Taylor degrees.
    #[arg(long, default_value = "1,5,105,1005")]
    q: String,
    #[arg(long, default_value_t = -0.999)]
    t_min: f64,
    #[arg(long, default_value_t = 0.999)]
    t_max: f64,
    #[arg(long, default_value_t = 1e-3)]
    t_step: f64,
    /// Output directory for the curve files.
    #[arg(long, default_value = "taylor-out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Eval CSV files to merge.
    files: Vec<PathBuf>,
}

enum AppError {
    Input(String),
    Numeric(String),
    Io(String),
}

impl AppError {
    fn code(&self) -> u8 {
        match self {
            AppError::Input(_) => EXIT_INPUT,
            AppError::Numeric(_) => EXIT_NUMERIC,
            AppError::Io(_) => EXIT_IO,
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Input(m) | AppError::Numeric(m) | AppError::Io(m) => m,
        }
    }
}

fn input_err(e: impl std::fmt::Display) -> AppError {
    AppError::Input(e.to_string())
}

fn io_err(e: impl std::fmt::Display) -> AppError {
    AppError::Io(e.to_string())
}

fn read_file(path: &Path) -> Result<String, AppError> {
    std::fs::read_to_string(path).map_err(|e| io_err(format!("{}: {e}", path.display())))
}

fn load_code_files(args: &CodeArgs) -> Result<LinearCode, AppError> {
    let name = args
        .code
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "code".into());
    let h = read_file(&args.code)?;
    let g = match &args.gen {
        Some(p) => Some(read_file(p)?),
        None => None,
    };
    load_code(&name, &h, g.as_deref()).map_err(input_err)
}

fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>, AppError> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|e| input_err(format!("{what} `{t}`: {e}"))))
        .collect()
}

fn parse_usize_list(s: &str, what: &str) -> Result<Vec<usize>, AppError> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<usize>().map_err(|e| input_err(format!("{what} `{t}`: {e}"))))
        .collect()
}

fn parse_check_kind(op: &str, clip: f64) -> Result<CheckKind, AppError> {
    match op {
        "taylor" => Ok(CheckKind::Taylor),
        "arctanh" => Ok(CheckKind::Arctanh),
        "arctanh-clipped" => Ok(CheckKind::ArctanhClipped(clip)),
        other => Err(input_err(format!(
            "unknown check op `{other}` (taylor | arctanh | arctanh-clipped)"
        ))),
    }
}

fn tanh_check_op(op: &str, q: usize, clip: f64) -> Result<TanhCheckOp, AppError> {
    Ok(match parse_check_kind(op, clip)? {
        CheckKind::Taylor => TanhCheckOp::Taylor { q },
        CheckKind::Arctanh => TanhCheckOp::Arctanh { clip: None },
        CheckKind::ArctanhClipped(th) => TanhCheckOp::Arctanh { clip: Some(th) },
    })
}

/// Resolve the decoder selection against the loaded code, loading a trained
/// model from its checkpoint when required.
fn build_decoder<'m>(
    args: &DecoderArgs,
    code: &LinearCode,
    model_slot: &'m mut Option<HyperModel>,
) -> Result<EvalDecoder<'m>, AppError> {
    match args.decoder.as_str() {
        "bp" => Ok(EvalDecoder::bp(DecodeConfig::vanilla(args.iters), "bp")),
        "weighted" => {
            let weights = BpWeights::unit(code.edge_count());
            let op = tanh_check_op(&args.check_op, args.q, args.clip_th)?;
            Ok(EvalDecoder::bp(DecodeConfig::weighted(weights, op, args.iters), "weighted"))
        }
        "hyper" => {
            let path = args
                .checkpoint
                .as_ref()
                .ok_or_else(|| input_err("--decoder hyper needs --checkpoint"))?;
            let state = checkpoint::load(path, code).map_err(input_err)?;
            *model_slot = Some(state.model);
            Ok(EvalDecoder::hyper(model_slot.as_ref().unwrap()))
        }
        other => Err(input_err(format!("unknown decoder `{other}` (bp | weighted | hyper)"))),
    }
}

fn echo(lines: &[(String, String)]) -> Vec<String> {
    lines.iter().map(|(k, v)| format!("{k} = {v}")).collect()
}

fn print_echo(lines: &[String]) {
    for l in lines {
        println!("# {l}");
    }
}

fn cmd_info(args: &CodeArgs) -> Result<(), AppError> {
    let code = load_code_files(args)?;
    println!("{}", size_summary(&code));
    let mut hist = std::collections::BTreeMap::new();
    for &d in code.col_degrees() {
        *hist.entry(d).or_insert(0usize) += 1;
    }
    let profile: Vec<String> = hist.iter().map(|(d, c)| format!("d_v={d}: {c} vars")).collect();
    println!("variable degrees: {}", profile.join(", "));
    let mut hist = std::collections::BTreeMap::new();
    for &d in code.row_degrees() {
        *hist.entry(d).or_insert(0usize) += 1;
    }
    let profile: Vec<String> = hist.iter().map(|(d, c)| format!("d_c={d}: {c} checks")).collect();
    println!("check degrees: {}", profile.join(", "));
    println!("generator: {}", if code.generator().is_some() { "present" } else { "absent" });
    Ok(())
}

fn cmd_decode(args: &DecodeArgs) -> Result<(), AppError> {
    let code = load_code_files(&args.code)?;
    if !args.zero_codeword && code.generator().is_none() {
        return Err(input_err("random codewords need --gen (or pass --zero-codeword)"));
    }
    let mut model_slot = None;
    let decoder = build_decoder(&args.decoder, &code, &mut model_slot)?;
    let config_echo = echo(&[
        ("command".into(), "decode".into()),
        ("code".into(), code.name().into()),
        ("decoder".into(), decoder.label().into()),
        ("L".into(), decoder.iters().to_string()),
        ("snr_db".into(), args.snr.to_string()),
        ("frames".into(), args.frames.to_string()),
        ("zero_codeword".into(), args.zero_codeword.to_string()),
        ("seed".into(), args.seed.to_string()),
    ]);
    print_echo(&config_echo);

    let idx = hyperbp::code::EdgeIndex::build(&code);
    let hidx = hyperbp::hyper::HyperIndices::build(&idx);
    let ch = AwgnChannel::from_snr(args.snr, code.rate()).map_err(input_err)?;
    let mut total_bits = 0u64;
    let mut total_errs = 0u64;
    let mut frame_errs = 0u64;
    for f in 0..args.frames {
        let mut rng = stream_rng(args.seed, args.snr.to_bits(), f);
        let cw = if args.zero_codeword {
            vec![0u8; code.n()]
        } else {
            let u: Vec<u8> = (0..code.k()).map(|_| rand::Rng::gen_range(&mut rng, 0..2u8)).collect();
            code.encode(&u).map_err(input_err)?
        };
        let sample = ch.transmit(&cw, &mut rng);
        let hard = match &decoder {
            EvalDecoder::Bp { config, .. } => {
                hyperbp::bp::decode(&idx, &sample.l, config).map_err(input_err)?.hard
            }
            EvalDecoder::Hyper { model, .. } => {
                hyperbp::hyper::hyper_decode(model, &sample.l, &hidx).map_err(input_err)?.hard
            }
        };
        let errs = hard.iter().zip(&cw).filter(|(a, b)| a != b).count() as u64;
        total_bits += code.n() as u64;
        total_errs += errs;
        frame_errs += u64::from(errs > 0);
        println!(
            "frame {f:>4}: bit errors {errs:>3}  {}",
            if errs == 0 { "ok" } else { "FAILED" }
        );
    }
    println!(
        "frames {} bit_errors {} ber {:.3e} frame_errors {} fer {:.3e}",
        args.frames,
        total_errs,
        total_errs as f64 / total_bits as f64,
        frame_errs,
        frame_errs as f64 / args.frames as f64
    );
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<(), AppError> {
    let code = load_code_files(&args.code)?;
    let snr_list = match &args.snr_list {
        Some(s) => parse_f64_list(s, "--snr-list")?,
        None => (1..=8).map(f64::from).collect(),
    };
    let check = parse_check_kind(&args.check_op, args.clip_th)?;
    let g_hidden = parse_usize_list(&args.g_hidden, "--g-hidden")?;

    std::fs::create_dir_all(&args.out_dir).map_err(io_err)?;
    let config = TrainConfig {
        snr_list_db: snr_list.clone(),
        per_snr_batch: args.per_snr,
        steps: args.steps,
        seed: args.seed,
        lr: args.lr,
        clip_grad_norm: args.grad_clip,
        eval_every: args.eval_every,
        checkpoint_dir: Some(args.out_dir.clone()),
        record_csv: Some(args.out_dir.join("train.csv")),
        val_frames: 2000,
        val_snr_db: 4.0,
    };

    let mut state = match &args.resume {
        Some(path) => checkpoint::load(path, &code).map_err(input_err)?,
        None => {
            let mut mconfig = HyperModelConfig {
                iters: args.iters,
                q: args.q,
                use_abs: !args.no_abs,
                hypernetwork: !args.no_hypernetwork,
                g_hidden,
                check,
                ..Default::default()
            };
            if args.deeper_f {
                mconfig = mconfig.deeper_f();
            }
            let idx = hyperbp::code::EdgeIndex::build(&code);
            let model = HyperModel::init(code.name(), &idx, &mconfig, args.seed);
            TrainState::new(model, args.lr, args.seed)
        }
    };

    let config_echo = echo(&[
        ("command".into(), "train".into()),
        ("code".into(), code.name().into()),
        ("steps".into(), args.steps.to_string()),
        ("start_step".into(), state.step.to_string()),
        ("seed".into(), state.seed.to_string()),
        ("snr_list_db".into(), format!("{snr_list:?}")),
        ("per_snr_batch".into(), args.per_snr.to_string()),
        ("batch".into(), config.batch_size().to_string()),
        ("lr".into(), args.lr.to_string()),
        ("L".into(), state.model.iters.to_string()),
        ("q".into(), state.model.q.to_string()),
        ("use_abs".into(), state.model.use_abs.to_string()),
        ("hypernetwork".into(), state.model.uses_hypernetwork().to_string()),
        ("check_op".into(), format!("{:?}", state.model.check)),
        ("grad_clip".into(), format!("{:?}", args.grad_clip)),
        ("eval_every".into(), args.eval_every.to_string()),
        ("out_dir".into(), args.out_dir.display().to_string()),
    ]);
    print_echo(&config_echo);

    let outcome = match train(&code, &mut state, &config) {
        Ok(o) => o,
        Err(TrainError::NonFinite { step, what }) => {
            // Save what we have for post-mortem, then abort with the
            // dedicated exit code.
            let _ = checkpoint::save(&args.out_dir.join("aborted.ckpt"), &state, &code);
            return Err(AppError::Numeric(format!(
                "non-finite {what} at step {step}; aborted checkpoint written to {}",
                args.out_dir.join("aborted.ckpt").display()
            )));
        }
        Err(TrainError::Io(e)) => return Err(io_err(e)),
        Err(e) => return Err(input_err(e)),
    };
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    for v in &outcome.val_records {
        println!(
            "# val step {} snr {} frames {} bit_errors {} ber {:.3e}{}",
            v.step,
            v.snr_db,
            v.frames,
            v.bit_errors,
            v.ber,
            if v.zero_codeword { " (zero-codeword)" } else { "" }
        );
    }
    checkpoint::save(&args.out_dir.join("final.ckpt"), &state, &code).map_err(io_err)?;
    if let (Some(first), Some(last)) = (outcome.records.first(), outcome.records.last()) {
        println!(
            "steps {}..{}: loss {:.6} -> {:.6}",
            first.step, last.step, first.loss, last.loss
        );
    }
    println!("final checkpoint: {}", args.out_dir.join("final.ckpt").display());
    println!("loss csv: {}", args.out_dir.join("train.csv").display());
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), AppError> {
    if args.jobs > 0 {
        // Ignore failure when a pool already exists (e.g. repeated calls in
        // one process during tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(args.jobs).build_global();
    }
    let code = load_code_files(&args.code)?;
    let snrs = parse_f64_list(&args.snr, "--snr")?;
    let mode = if args.zero_codeword { EvalMode::ZeroCodeword } else { EvalMode::RandomCodewords };
    let mut model_slot = None;
    let decoder = build_decoder(&args.decoder, &code, &mut model_slot)?;
    let stop = StopRule { min_bit_errors: args.min_errors, max_frames: args.max_frames };

    let config_echo = echo(&[
        ("command".into(), "eval".into()),
        ("code".into(), code.name().into()),
        ("decoder".into(), decoder.label().into()),
        ("L".into(), decoder.iters().to_string()),
        ("snr_db".into(), format!("{snrs:?}")),
        ("min_bit_errors".into(), args.min_errors.to_string()),
        ("max_frames".into(), args.max_frames.to_string()),
        ("mode".into(), if args.zero_codeword { "zero-codeword".into() } else { "random-codewords".to_string() }),
        ("seed".into(), args.seed.to_string()),
        ("jobs".into(), args.jobs.to_string()),
    ]);
    print_echo(&config_echo);

    let records = run_curve(&code, &decoder, &snrs, &stop, args.seed, mode).map_err(input_err)?;
    let csv = csv_string(&records, &config_echo);
    print!("{csv}");
    println!("{}", compare_table(&records));
    if let Some(path) = &args.csv {
        std::fs::write(path, &csv).map_err(io_err)?;
    }
    if let Some(dir) = &args.plot_dir {
        std::fs::create_dir_all(dir).map_err(io_err)?;
        let path = dir.join(format!("{}_{}.dat", code.name(), decoder.label()));
        std::fs::write(&path, plot_data_string(&records, &config_echo)).map_err(io_err)?;
        println!("plot data: {}", path.display());
    }
    Ok(())
}

fn cmd_taylor(args: &TaylorArgs) -> Result<(), AppError> {
    let qs = parse_usize_list(&args.q, "--q")?;
    if args.t_step <= 0.0 || args.t_max < args.t_min {
        return Err(input_err("invalid t grid"));
    }
    let mut grid = Vec::new();
    let mut t = args.t_min;
    while t <= args.t_max + 1e-12 {
        grid.push(t);
        t += args.t_step;
    }
    let config_echo = echo(&[
        ("command".into(), "taylor".into()),
        ("q".into(), format!("{qs:?}")),
        ("t_min".into(), args.t_min.to_string()),
        ("t_max".into(), args.t_max.to_string()),
        ("t_step".into(), args.t_step.to_string()),
    ]);
    print_echo(&config_echo);
    let curve = taylor_curve(&qs, &grid).map_err(input_err)?;
    std::fs::create_dir_all(&args.out_dir).map_err(io_err)?;
    for (i, (q, _)) in curve.series.iter().enumerate() {
        let path = args.out_dir.join(format!("taylor_q{q}.dat"));
        std::fs::write(&path, curve.plot_string(i, &config_echo)).map_err(io_err)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<(), AppError> {
    if args.files.is_empty() {
        return Err(input_err("compare needs at least one CSV file"));
    }
    let mut records = Vec::new();
    for path in &args.files {
        let text = read_file(path)?;
        records.extend(parse_csv(&text).map_err(input_err)?);
    }
    println!("{}", compare_table(&records));
    Ok(())
}

fn parse_csv(text: &str) -> Result<Vec<BerRecord>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == CSV_HEADER {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 15 {
            return Err(format!("line {}: expected 15 CSV fields, got {}", i + 1, f.len()));
        }
        let parse = |s: &str, what: &str| -> Result<f64, String> {
            s.parse().map_err(|e| format!("line {}: {what}: {e}", i + 1))
        };
        let neg_ln_ber = if f[9].is_empty() { None } else { Some(parse(f[9], "neg_ln_ber")?) };
        out.push(BerRecord {
            code: f[0].into(),
            decoder: f[1].into(),
            snr_db: parse(f[2], "snr_db")?,
            iters: f[3].parse().map_err(|e| format!("line {}: L: {e}", i + 1))?,
            frames: f[4].parse().map_err(|e| format!("line {}: frames: {e}", i + 1))?,
            bit_errors: f[5].parse().map_err(|e| format!("line {}: bit_errors: {e}", i + 1))?,
            frame_errors: f[6].parse().map_err(|e| format!("line {}: frame_errors: {e}", i + 1))?,
            ber: parse(f[7], "ber")?,
            fer: parse(f[8], "fer")?,
            neg_ln_ber,
            ci95: (parse(f[10], "ci95_low")?, parse(f[11], "ci95_high")?),
            censored: f[12] == "true",
            seed: f[13].parse().map_err(|e| format!("line {}: seed: {e}", i + 1))?,
            wall_ms: parse(f[14], "wall_ms")?,
        });
    }
    Ok(out)
}

/// Merge `key=value` lines from `--config` into argv as defaulted flags:
/// a flag given on the command line wins over the file.
fn merge_config_file(mut argv: Vec<String>) -> Result<Vec<String>, AppError> {
    let pos = argv.iter().position(|a| a == "--config");
    let path = match pos {
        Some(i) => match argv.get(i + 1) {
            Some(p) => PathBuf::from(p),
            None => return Ok(argv), // let clap report the usage error
        },
        None => return Ok(argv),
    };
    let text = read_file(&path)?;
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| input_err(format!("{}:{}: expected key=value", path.display(), ln + 1)))?;
        let flag = format!("--{}", key.trim());
        if !argv.iter().any(|a| a == &flag) {
            let value = value.trim();
            if value == "true" {
                argv.push(flag);
            } else {
                argv.push(flag);
                argv.push(value.to_string());
            }
        }
    }
    Ok(argv)
}

fn run(cli: &Cli) -> Result<(), AppError> {
    match &cli.command {
        Command::Info(a) => cmd_info(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Taylor(a) => cmd_taylor(a),
        Command::Compare(a) => cmd_compare(a),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match merge_config_file(argv) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {}", e.message());
            return ExitCode::from(e.code());
        }
    };
    let cli = Cli::parse_from(argv);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
