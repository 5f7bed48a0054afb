use super::*;
use crate::alist::parse_dense_matrix;
use crate::autodiff::finite_difference_gradient;
use crate::hyper::{CheckKind, HyperModelConfig, VariableNet};

fn toy_code() -> LinearCode {
    let h = parse_dense_matrix("1 1 0 1 0\n1 0 1 0 1\n0 1 1 0 1\n").unwrap();
    LinearCode::from_parity("toy", h).unwrap()
}

fn tiny_config() -> HyperModelConfig {
    HyperModelConfig {
        iters: 2,
        q: 31,
        g_hidden: vec![4],
        f_widths: vec![6, 6],
        ..Default::default()
    }
}

fn tiny_model(code: &LinearCode, seed: u64, config: &HyperModelConfig) -> (HyperModel, HyperIndices) {
    let idx = EdgeIndex::build(code);
    let hidx = HyperIndices::build(&idx);
    (HyperModel::init(code.name(), &idx, config, seed), hidx)
}

#[test]
fn batch_composition_bch_defaults() {
    let code = toy_code();
    let config = TrainConfig::bch_ldpc(1, 7);
    let batch = make_batch(&code, &config, 0).unwrap();
    assert_eq!(batch.len(), 120);
    let mut counts = std::collections::BTreeMap::new();
    for s in &batch {
        *counts.entry(s.snr_db as i64).or_insert(0usize) += 1;
        assert!(s.c.iter().all(|&b| b == 0), "zero-codeword protocol");
    }
    assert_eq!(counts.len(), 8);
    assert!(counts.values().all(|&c| c == 15));
}

#[test]
fn batch_composition_polar_defaults() {
    let code = toy_code();
    let config = TrainConfig::polar(1, 7);
    let batch = make_batch(&code, &config, 0).unwrap();
    assert_eq!(batch.len(), 90);
    let snrs: std::collections::BTreeSet<i64> =
        batch.iter().map(|s| s.snr_db as i64).collect();
    assert_eq!(snrs, (1..=6).collect());
}

#[test]
fn multiloss_examples() {
    // All marginals 0.5, zero codeword, L = 5: (L + 1) ln 2.
    let n = 4;
    let marginals = vec![vec![0.5; n]; 6];
    let c = vec![0u8; n];
    let v = multiloss(&marginals, &c);
    assert!((v - 6.0 * std::f64::consts::LN_2).abs() < 1e-12);
    assert!((v - 4.1588830833596715).abs() < 1e-12);

    // Perfect confidence: loss goes to zero (clamped at the floor).
    let marginals = vec![vec![0.0; n]; 6];
    let v = multiloss(&marginals, &c);
    assert!(v.abs() < 1e-10);

    // Symmetric single-bit case.
    let v = multiloss(&[vec![0.5]], &[1]);
    assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
}

#[test]
fn loss_node_matches_plain_loss() {
    let mut tape = Tape::new();
    let o1 = tape.leaf(Tensor::vector(vec![0.2, 0.7, 0.5]));
    let o2 = tape.leaf(Tensor::vector(vec![0.9, 0.1, 0.4]));
    let c = vec![1u8, 0, 1];
    let id = multiloss_node(&mut tape, &[o1, o2], &c).unwrap();
    let plain = multiloss(&[vec![0.2, 0.7, 0.5], vec![0.9, 0.1, 0.4]], &c);
    assert!((tape.value(id).item() - plain).abs() < 1e-14);
}

#[test]
fn unrolled_decoder_gradient_matches_finite_differences() {
    let code = toy_code();
    let config = tiny_config();
    let (model, hidx) = tiny_model(&code, 3, &config);
    let sample_l: Vec<f64> = vec![1.2, -0.4, 0.8, -2.0, 0.3];
    let c = vec![0u8; 5];

    // Autodiff gradients.
    let mut tape = Tape::new();
    let graph = build_decode_tape(&mut tape, &model, &sample_l, &hidx).unwrap();
    let loss_id = multiloss_node(&mut tape, &graph.marginal_ids, &c).unwrap();
    tape.backward(loss_id).unwrap();
    let auto: Vec<Vec<f64>> =
        graph.param_ids.iter().map(|&id| tape.grad(id).unwrap().data().to_vec()).collect();

    // Finite differences, parameter tensor by parameter tensor.
    let names = model.param_names();
    for (pi, name) in names.iter().enumerate() {
        let base = model.params()[pi].clone();
        let f = |vals: &[f64]| {
            let mut m = model.clone();
            m.params_mut()[pi].data_mut().copy_from_slice(vals);
            let out = crate::hyper::hyper_decode(&m, &sample_l, &hidx).unwrap();
            multiloss(&out.marginals, &c)
        };
        let fd = finite_difference_gradient(f, base.data(), Some(1e-5));
        for (j, (a, b)) in auto[pi].iter().zip(&fd).enumerate() {
            let scale = 1.0f64.max(a.abs()).max(b.abs());
            assert!(
                (a - b).abs() <= 1e-4 * scale,
                "{name}[{j}]: autodiff {a} vs fd {b}"
            );
        }
    }
}

#[test]
fn training_reduces_loss_and_is_deterministic() {
    let run = || {
        let code = toy_code();
        let config = TrainConfig {
            snr_list_db: vec![2.0, 4.0],
            per_snr_batch: 8,
            steps: 120,
            seed: 42,
            lr: 5e-3,
            clip_grad_norm: None,
            eval_every: 0,
            checkpoint_dir: None,
            record_csv: None,
            val_frames: 0,
            val_snr_db: 4.0,
        };
        let (model, _) = tiny_model(&code, 9, &tiny_config());
        let mut state = TrainState::new(model, config.lr, config.seed);
        let outcome = train(&code, &mut state, &config).unwrap();
        outcome.records.iter().map(|r| r.loss).collect::<Vec<f64>>()
    };
    let losses = run();
    let first = losses[0];
    let last10: f64 = losses[losses.len() - 10..].iter().sum::<f64>() / 10.0;
    assert!(
        last10 < first,
        "loss should fall: first {first}, mean of last 10 {last10}"
    );
    // Bit-identical repeat.
    assert_eq!(losses, run());
}

#[test]
fn nonfinite_forward_aborts_with_diagnostic() {
    let code = toy_code();
    let mut config = tiny_config();
    config.check = CheckKind::Arctanh;
    let (mut model, _) = tiny_model(&code, 5, &config);
    // Saturate g: enormous generated weights push tanh outputs to exactly
    // +-1, whose leave-one-out products hit the arctanh asymptote.
    if let VariableNet::Hyper { theta_f, .. } = &mut model.net {
        for t in theta_f.trunk.iter_mut().chain(theta_f.heads.iter_mut()) {
            for v in t.data_mut() {
                *v *= 1e8;
            }
        }
    }
    let train_config = TrainConfig {
        snr_list_db: vec![4.0],
        per_snr_batch: 4,
        steps: 5,
        seed: 1,
        lr: 1e-4,
        clip_grad_norm: None,
        eval_every: 0,
        checkpoint_dir: None,
        record_csv: None,
        val_frames: 0,
        val_snr_db: 4.0,
    };
    let mut state = TrainState::new(model, 1e-4, 1);
    match train(&code, &mut state, &train_config) {
        Err(TrainError::NonFinite { what, .. }) => {
            assert!(
                what.contains("arctanh") || what.contains("gradient"),
                "diagnostic should name the layer: {what}"
            );
        }
        other => panic!("expected NonFinite abort, got {other:?}"),
    }
}

#[test]
fn checkpoint_round_trip_resumes_bit_exactly() {
    let code = toy_code();
    let config = TrainConfig {
        snr_list_db: vec![3.0],
        per_snr_batch: 6,
        steps: 8,
        seed: 77,
        lr: 1e-3,
        clip_grad_norm: None,
        eval_every: 0,
        checkpoint_dir: None,
        record_csv: None,
        val_frames: 0,
        val_snr_db: 4.0,
    };
    let (model, _) = tiny_model(&code, 21, &tiny_config());
    let mut state = TrainState::new(model, config.lr, config.seed);
    // Train 4 steps, snapshot, train 4 more.
    let mut half = config.clone();
    half.steps = 4;
    train(&code, &mut state, &half).unwrap();
    let text = checkpoint::to_text(&state, &code);
    let full = train(&code, &mut state, &config).unwrap();

    // Restore and finish: losses must match bit for bit.
    let mut restored = checkpoint::from_text(&text, &code).unwrap();
    assert_eq!(restored.step, 4);
    let resumed = train(&code, &mut restored, &config).unwrap();
    let a: Vec<f64> = full.records.iter().map(|r| r.loss).collect();
    let b: Vec<f64> = resumed.records.iter().map(|r| r.loss).collect();
    assert_eq!(a, b);
    for (p, q) in state.model.params().iter().zip(restored.model.params()) {
        assert_eq!(p.data(), q.data());
    }
}

#[test]
fn checkpoint_rejects_other_code() {
    let code = toy_code();
    let (model, _) = tiny_model(&code, 2, &tiny_config());
    let state = TrainState::new(model, 1e-4, 0);
    let text = checkpoint::to_text(&state, &code);
    let other = LinearCode::from_parity(
        "other",
        parse_dense_matrix("1 1 1 0\n0 1 1 1\n").unwrap(),
    )
    .unwrap();
    assert!(matches!(
        checkpoint::from_text(&text, &other),
        Err(CheckpointError::CodeMismatch { .. })
    ));
}

#[test]
fn checkpoint_truncation_detected() {
    let code = toy_code();
    let (model, _) = tiny_model(&code, 2, &tiny_config());
    let state = TrainState::new(model, 1e-4, 0);
    let text = checkpoint::to_text(&state, &code);
    let cut = &text[..text.len() / 2];
    let err = checkpoint::from_text(cut, &code).unwrap_err();
    assert!(
        matches!(err, CheckpointError::Truncated { .. } | CheckpointError::Malformed { .. }),
        "got {err:?}"
    );
}
