//! Log-space arithmetic.

/// `log(exp(a) + exp(b))`, tolerant of `-inf` operands.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `log(sum(exp(xs)))`; `-inf` for an empty slice or all `-inf` entries.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if m == f64::INFINITY {
        return f64::INFINITY;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// Log-softmax over the entries where `allowed` is true; disallowed entries
/// get `-inf`. A row with no finite allowed entry is all `-inf`.
pub fn masked_log_softmax(scores: &[f64], allowed: &[bool]) -> Vec<f64> {
    debug_assert_eq!(scores.len(), allowed.len());
    let kept: Vec<f64> = scores
        .iter()
        .zip(allowed)
        .filter(|(_, &a)| a)
        .map(|(&s, _)| s)
        .collect();
    let z = log_sum_exp(&kept);
    scores
        .iter()
        .zip(allowed)
        .map(|(&s, &a)| {
            if a && z.is_finite() {
                s - z
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

/// `log(1 + exp(x))` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of [`softplus`] for `y > 0`.
pub fn softplus_inverse(y: f64) -> f64 {
    if y > 30.0 {
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
