use serde::{Deserialize, Serialize};

use super::MetricsError;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function (Lanczos approximation, x > 0).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS_COEF[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

// modified Lentz evaluation of the incomplete-beta continued fraction
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b).
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// CDF of Student's t with `dof` degrees of freedom (non-integer allowed).
pub fn student_t_cdf(t: f64, dof: f64) -> f64 {
    if t.is_nan() || dof <= 0.0 {
        return f64::NAN;
    }
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let x = dof / (dof + t * t);
    let tail = 0.5 * regularized_incomplete_beta(dof / 2.0, 0.5, x);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Inverse of [`student_t_cdf`] by bisection.
pub fn student_t_quantile(p: f64, dof: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (-1.0, 1.0);
    while student_t_cdf(lo, dof) > p {
        lo *= 2.0;
    }
    while student_t_cdf(hi, dof) < p {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_cdf(mid, dof) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    /// (mean_a - mean_b) / standard error
    pub t: f64,
    /// Welch-Satterthwaite degrees of freedom
    pub dof: f64,
    /// Two-sided p-value
    pub p: f64,
}

/// Welch's unequal-variance t-test.
///
/// Identical samples (zero difference) give t = 0 and p = 1. Two samples
/// with zero variance and different means give an infinite statistic and
/// p = 0.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchResult, MetricsError> {
    if a.len() < 2 {
        return Err(MetricsError::TooFewSamples(a.len()));
    }
    if b.len() < 2 {
        return Err(MetricsError::TooFewSamples(b.len()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let sa = va / na;
    let sb = vb / nb;
    let se2 = sa + sb;
    let diff = ma - mb;
    if se2 == 0.0 {
        let dof = na + nb - 2.0;
        return Ok(if diff == 0.0 {
            WelchResult { t: 0.0, dof, p: 1.0 }
        } else {
            WelchResult { t: diff.signum() * f64::INFINITY, dof, p: 0.0 }
        });
    }
    let t = diff / se2.sqrt();
    let dof = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let p = (2.0 * student_t_cdf(-t.abs(), dof)).min(1.0);
    Ok(WelchResult { t, dof, p })
}

/// Cohen's d, (mean_a - mean_b) over the pooled standard deviation.
pub fn cohen_d(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    if a.len() < 2 {
        return Err(MetricsError::TooFewSamples(a.len()));
    }
    if b.len() < 2 {
        return Err(MetricsError::TooFewSamples(b.len()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0)).sqrt();
    if pooled == 0.0 {
        return Ok(if ma == mb { 0.0 } else { (ma - mb).signum() * f64::INFINITY });
    }
    Ok((ma - mb) / pooled)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub n: usize,
}

/// Mean with a t-based two-sided 95% interval. A single value yields a
/// degenerate interval.
pub fn mean_ci95(x: &[f64]) -> MeanCi {
    let n = x.len();
    if n == 0 {
        return MeanCi { mean: f64::NAN, lower: f64::NAN, upper: f64::NAN, n };
    }
    if n == 1 {
        return MeanCi { mean: x[0], lower: x[0], upper: x[0], n };
    }
    let (mean, var) = mean_var(x);
    let half = student_t_quantile(0.975, (n - 1) as f64) * (var / n as f64).sqrt();
    MeanCi { mean, lower: mean - half, upper: mean + half, n }
}
