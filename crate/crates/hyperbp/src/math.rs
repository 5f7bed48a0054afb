//! Scalar kernels shared by the classical decoders and the autodiff ops.
//!
//! Keeping forward values and derivatives next to each other (with one
//! truncation rule) is what keeps the training graph consistent with the
//! plain decoding path.

/// Term-magnitude threshold below which the Taylor series is truncated early.
pub const TAYLOR_TERM_TOL: f64 = 1e-12;

/// Input clamp for the exact-arctanh check update: magnitudes are limited to
/// `1 - ARCTANH_CLAMP_EPS` before `atanh` to guard the asymptotes at +-1.
pub const ARCTANH_CLAMP_EPS: f64 = 1e-12;

/// Degree-`q` Taylor polynomial of `2 arctanh(t)`:
/// `2 sum_{m=0}^{q} t^(2m+1) / (2m+1)`.
///
/// The `m = 0` term is always evaluated; later terms stop once their
/// magnitude drops below [`TAYLOR_TERM_TOL`]. The derivative below applies
/// the identical truncation rule.
pub fn taylor_2atanh(t: f64, q: usize) -> f64 {
    let t2 = t * t;
    let mut pow = t; // t^(2m+1)
    let mut acc = 2.0 * pow;
    for m in 1..=q {
        pow *= t2;
        let term = 2.0 * pow / (2 * m + 1) as f64;
        if term.abs() < TAYLOR_TERM_TOL {
            break;
        }
        acc += term;
    }
    acc
}

/// Derivative of [`taylor_2atanh`] with the same truncation:
/// `2 sum t^(2m)` over exactly the terms the forward pass kept.
pub fn taylor_2atanh_deriv(t: f64, q: usize) -> f64 {
    let t2 = t * t;
    let mut pow_odd = t; // t^(2m+1), drives the inclusion rule
    let mut pow_even = 1.0; // t^(2m)
    let mut acc = 2.0;
    for m in 1..=q {
        pow_odd *= t2;
        pow_even *= t2;
        let term = 2.0 * pow_odd / (2 * m + 1) as f64;
        if term.abs() < TAYLOR_TERM_TOL {
            break;
        }
        acc += 2.0 * pow_even;
    }
    acc
}

/// Upper bound on |taylor_2atanh(t, q)| over |t| <= 1.
pub fn taylor_2atanh_bound(q: usize) -> f64 {
    (0..=q).map(|m| 2.0 / (2 * m + 1) as f64).sum()
}

/// `2 arctanh(t)` with the input magnitude clamped to `1 - ARCTANH_CLAMP_EPS`.
pub fn clamped_2atanh(t: f64) -> f64 {
    let lim = 1.0 - ARCTANH_CLAMP_EPS;
    2.0 * t.clamp(-lim, lim).atanh()
}

/// Logistic function.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Leave-one-out products by prefix/suffix accumulation: `out[i]` is the
/// product of all `vals[j]`, `j != i`. Never divides, so exact zeros among
/// the inputs are handled.
pub fn leave_one_out_products(vals: &[f64], out: &mut [f64]) {
    let d = vals.len();
    debug_assert_eq!(out.len(), d);
    if d == 0 {
        return;
    }
    // out[i] = prefix(i) while walking forward, then multiply by suffix.
    let mut acc = 1.0;
    for i in 0..d {
        out[i] = acc;
        acc *= vals[i];
    }
    let mut acc = 1.0;
    for i in (0..d).rev() {
        out[i] *= acc;
        acc *= vals[i];
    }
}

/// Leave-one-out sums: `out[i] = sum(vals) - vals[i]` computed by
/// prefix/suffix addition (robust when values are huge and cancel).
pub fn leave_one_out_sums(vals: &[f64], out: &mut [f64]) {
    let d = vals.len();
    debug_assert_eq!(out.len(), d);
    if d == 0 {
        return;
    }
    let mut acc = 0.0;
    for i in 0..d {
        out[i] = acc;
        acc += vals[i];
    }
    let mut acc = 0.0;
    for i in (0..d).rev() {
        out[i] += acc;
        acc += vals[i];
    }
}
