//! Sweep vanilla BP over an SNR grid for one of the shipped codes and print
//! the measured BER / -ln(BER) per point, plus plot-data output.
//!
//! Usage: cargo run --release --example ber_curve -- [code] [L] [snr...]
//! Defaults: bch_63_51, L = 5, SNRs 4 5 6.

use hyperbp::alist::load_code;
use hyperbp::eval::{csv_string, plot_data_string, run_curve, EvalDecoder, EvalMode, StopRule};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = args.first().map(String::as_str).unwrap_or("bch_63_51");
    let iters: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let snrs: Vec<f64> = if args.len() > 2 {
        args[2..].iter().map(|s| s.parse().expect("SNR in dB")).collect()
    } else {
        vec![4.0, 5.0, 6.0]
    };

    let dir = format!("{}/codes", env!("CARGO_MANIFEST_DIR"));
    let h = std::fs::read_to_string(format!("{dir}/{name}.alist")).expect("alist file");
    let g = std::fs::read_to_string(format!("{dir}/{name}.gmat")).ok();
    let code = load_code(name, &h, g.as_deref()).expect("valid code files");
    println!(
        "{}: n={} k={} E={} d_v_max={}",
        code.name(),
        code.n(),
        code.k(),
        code.edge_count(),
        code.d_v_max()
    );

    // Random codewords when a generator ships with the code, otherwise the
    // all-zeros codeword (same statistics for the equivariant decoders).
    let mode = if code.generator().is_some() {
        EvalMode::RandomCodewords
    } else {
        println!("note: no generator matrix, simulating zero codewords");
        EvalMode::ZeroCodeword
    };
    let min_bit_errors = std::env::var("HYPERBP_MIN_ERRORS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(500);
    let stop = StopRule { min_bit_errors, max_frames: 10_000_000 };
    let decoder = EvalDecoder::vanilla_bp(iters);
    let records = run_curve(&code, &decoder, &snrs, &stop, 1, mode).expect("simulation");
    for r in &records {
        println!(
            "snr {:>4}  frames {:>9}  bit_errors {:>6}  ber {:.3e}  -ln(ber) {}",
            r.snr_db,
            r.frames,
            r.bit_errors,
            r.ber,
            r.neg_ln_ber.map(|v| format!("{v:.3}")).unwrap_or_else(|| "censored".into()),
        );
    }
    let echo = vec![format!("ber_curve code={name} L={iters} seed=1")];
    print!("{}", csv_string(&records, &echo));
    println!("--- plot data ({}) ---", decoder.label());
    print!("{}", plot_data_string(&records, &echo));
}
