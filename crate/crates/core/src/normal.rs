//! Standard normal CDF and quantile, the one-sample Kolmogorov–Smirnov test
//! against N(0, 1), and normal QQ data.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NormalError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample {0} is not finite")]
    NonFinite(f64),
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

// Acklam's rational approximation, relative error about 1.15e-9 before
// refinement.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.024_25;

fn acklam(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// `Φ⁻¹(p)`. Returns `±∞` at 0 and 1 and NaN outside `[0, 1]`.
pub fn std_normal_quantile(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    // Work in the lower half so the Newton residual keeps full precision.
    let (lo, sign) = if p > 0.5 { (1.0 - p, -1.0) } else { (p, 1.0) };
    let x = acklam(lo);
    let x = x - (std_normal_cdf(x) - lo) / std_normal_pdf(x);
    sign * x
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub d: f64,
    pub p_value: f64,
    pub n: usize,
}

/// `Q(λ) = 2 Σ_{j≥1} (-1)^{j-1} e^{-2 j² λ²}`, the limiting Kolmogorov tail.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        // The alternating series converges slowly here; the tail is 1 to
        // machine precision.
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=200 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn check_samples(samples: &[f64], needed: usize) -> Result<(), NormalError> {
    if samples.len() < needed {
        return Err(NormalError::TooFewSamples {
            needed,
            got: samples.len(),
        });
    }
    if let Some(&bad) = samples.iter().find(|x| !x.is_finite()) {
        return Err(NormalError::NonFinite(bad));
    }
    Ok(())
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// KS distance to N(0, 1) and its asymptotic p-value, using Stephens'
/// small-sample scaling `λ = (√n + 0.12 + 0.11/√n) D`.
pub fn ks_normal(samples: &[f64]) -> Result<KsResult, NormalError> {
    check_samples(samples, 20)?;
    let x = sorted(samples);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let f = std_normal_cdf(v);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    Ok(KsResult {
        d,
        p_value: kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d),
        n: x.len(),
    })
}

/// Sample quantile by linear interpolation between order statistics
/// (Hyndman–Fan type 7).
pub fn quantile_type7(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QqData {
    /// `(Φ⁻¹((i - 0.5)/n), i-th order statistic)`.
    pub points: Vec<(f64, f64)>,
    /// Line through the paired lower and upper quartiles.
    pub slope: f64,
    pub intercept: f64,
}

impl QqData {
    /// Largest `|sample - theoretical|` over the central `fraction` of the
    /// points.
    pub fn max_central_deviation(&self, fraction: f64) -> f64 {
        let n = self.points.len();
        let skip = ((1.0 - fraction) / 2.0 * n as f64).floor() as usize;
        self.points[skip..n - skip]
            .iter()
            .map(|(t, s)| (s - t).abs())
            .fold(0.0, f64::max)
    }
}

pub fn qq_points(samples: &[f64]) -> Result<QqData, NormalError> {
    check_samples(samples, 3)?;
    let x = sorted(samples);
    let n = x.len() as f64;
    let points = x
        .iter()
        .enumerate()
        .map(|(i, &v)| (std_normal_quantile((i as f64 + 0.5) / n), v))
        .collect();
    let (t1, t3) = (std_normal_quantile(0.25), std_normal_quantile(0.75));
    let (s1, s3) = (quantile_type7(&x, 0.25), quantile_type7(&x, 0.75));
    let slope = (s3 - s1) / (t3 - t1);
    Ok(QqData {
        points,
        slope,
        intercept: s1 - slope * t1,
    })
}
