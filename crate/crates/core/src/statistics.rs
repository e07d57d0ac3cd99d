//! The return-time CLT statistic, the entropy estimator built on it, a
//! covariance-corrected variant and diagnostics for the asymptotic regime.
//!
//! All internal logarithms are natural; entropies are taken and reported in
//! bits per symbol.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::moments::{EULER_GAMMA, PI2_OVER_6};
use crate::returns::ReturnTimeSet;

/// Products above this value are flagged in [`RegimeDiagnostics`].
pub const REGIME_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("censored return times at indices {0:?}")]
    CensoredData(Vec<usize>),
    #[error("empty return-time set")]
    Empty,
    #[error("entropy {0} must be finite and non-negative")]
    InvalidEntropy(f64),
    #[error("block length must be at least 1")]
    InvalidBlockLength,
    #[error("corrected variance k π²/6 + k(k-1) C = {0} is not positive")]
    CorrectionInvalid(f64),
    #[error("invalid process model: {0}")]
    InvalidModel(String),
}

/// An IID source described by its alphabet size and, optionally, symbol
/// probabilities. Without probabilities the source is equidistributed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessModel {
    alphabet_size: usize,
    probs: Option<Vec<f64>>,
}

impl ProcessModel {
    pub fn equidistributed(alphabet_size: usize) -> Result<Self, StatsError> {
        if alphabet_size < 2 {
            return Err(StatsError::InvalidModel(format!(
                "alphabet size {alphabet_size} is below 2"
            )));
        }
        Ok(Self {
            alphabet_size,
            probs: None,
        })
    }

    /// Probabilities must be non-negative and sum to 1 within `1e-12`.
    pub fn with_probs(probs: Vec<f64>) -> Result<Self, StatsError> {
        if probs.len() < 2 {
            return Err(StatsError::InvalidModel(
                "need at least two symbol probabilities".into(),
            ));
        }
        if let Some(bad) = probs.iter().find(|q| !(q.is_finite() && **q >= 0.0)) {
            return Err(StatsError::InvalidModel(format!("probability {bad} is invalid")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(StatsError::InvalidModel(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self {
            alphabet_size: probs.len(),
            probs: Some(probs),
        })
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn probs(&self) -> Option<&[f64]> {
        self.probs.as_deref()
    }

    /// Probability of symbol `i`.
    pub fn prob(&self, i: usize) -> f64 {
        match &self.probs {
            Some(q) => q[i],
            None => 1.0 / self.alphabet_size as f64,
        }
    }

    pub fn is_equidistributed(&self) -> bool {
        match &self.probs {
            None => true,
            Some(q) => {
                let u = 1.0 / q.len() as f64;
                q.iter().all(|&x| (x - u).abs() <= 1e-12)
            }
        }
    }

    pub fn q_max(&self) -> f64 {
        match &self.probs {
            Some(q) => q.iter().copied().fold(0.0, f64::max),
            None => 1.0 / self.alphabet_size as f64,
        }
    }

    /// Shannon entropy in bits per symbol.
    pub fn entropy_bits(&self) -> f64 {
        match &self.probs {
            None => (self.alphabet_size as f64).log2(),
            Some(q) => q.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum(),
        }
    }
}

fn log_values(s: &ReturnTimeSet) -> Result<Vec<f64>, StatsError> {
    if s.k() == 0 {
        return Err(StatsError::Empty);
    }
    let values = s.values().map_err(StatsError::CensoredData)?;
    Ok(values.iter().map(|&t| (t as f64).ln()).collect())
}

fn check_inputs(ell: usize, h_bits: f64) -> Result<(), StatsError> {
    if ell == 0 {
        return Err(StatsError::InvalidBlockLength);
    }
    if !(h_bits.is_finite() && h_bits >= 0.0) {
        return Err(StatsError::InvalidEntropy(h_bits));
    }
    Ok(())
}

/// `Σ (ln S_i - ℓ H ln 2 + γ)`.
fn centred_sum(logs: &[f64], ell: usize, h_bits: f64) -> f64 {
    let shift = ell as f64 * h_bits * LN_2 - EULER_GAMMA;
    logs.iter().map(|l| l - shift).sum()
}

/// `Σ_{i≤k} (ln S_i - ℓ H ln 2 + γ) / √(k π²/6)`.
pub fn clt_statistic(s: &ReturnTimeSet, ell: usize, h_bits: f64) -> Result<f64, StatsError> {
    check_inputs(ell, h_bits)?;
    let logs = log_values(s)?;
    let k = logs.len() as f64;
    Ok(centred_sum(&logs, ell, h_bits) / (k * PI2_OVER_6).sqrt())
}

/// Entropy estimate in bits per symbol, `Σ (ln S_i + γ) / (k ℓ ln 2)`.
pub fn entropy_estimate(s: &ReturnTimeSet, ell: usize) -> Result<f64, StatsError> {
    if ell == 0 {
        return Err(StatsError::InvalidBlockLength);
    }
    let logs = log_values(s)?;
    let k = logs.len() as f64;
    let total: f64 = logs.iter().map(|l| l + EULER_GAMMA).sum();
    Ok(total / (k * ell as f64 * LN_2))
}

/// `(p ln p) / 4`, the heuristic covariance of two log return times for
/// blocks of probability `p`.
pub fn heuristic_covariance(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * p.ln() / 4.0
    }
}

/// Heuristic covariance used by [`variance_corrected_statistic`]: with
/// `p = A^{-ℓ}` for equidistributed models, and `p = 2^{-Hℓ}` otherwise
/// (also when no model is given, using `h_bits`).
pub fn covariance_for(ell: usize, h_bits: f64, model: Option<&ProcessModel>) -> f64 {
    let p = match model {
        Some(m) if m.is_equidistributed() => (m.alphabet_size() as f64).powi(-(ell as i32)),
        Some(m) => (-(m.entropy_bits() * ell as f64) * LN_2).exp(),
        None => (-(h_bits * ell as f64) * LN_2).exp(),
    };
    heuristic_covariance(p)
}

/// The CLT statistic with denominator `√(k π²/6 + k(k-1) C)`.
pub fn corrected_statistic_with(
    s: &ReturnTimeSet,
    ell: usize,
    h_bits: f64,
    covariance: f64,
) -> Result<f64, StatsError> {
    check_inputs(ell, h_bits)?;
    let logs = log_values(s)?;
    let k = logs.len() as f64;
    let var = k * PI2_OVER_6 + k * (k - 1.0) * covariance;
    if !(var > 0.0) {
        return Err(StatsError::CorrectionInvalid(var));
    }
    Ok(centred_sum(&logs, ell, h_bits) / var.sqrt())
}

/// The CLT statistic with its variance reduced by the pairwise covariance
/// heuristic (see [`covariance_for`]).
pub fn variance_corrected_statistic(
    s: &ReturnTimeSet,
    ell: usize,
    h_bits: f64,
    model: Option<&ProcessModel>,
) -> Result<f64, StatsError> {
    corrected_statistic_with(s, ell, h_bits, covariance_for(ell, h_bits, model))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeDiagnostics {
    /// `k^{3/2} ℓ q_max^ℓ`.
    pub strict: f64,
    /// `k ℓ A^{-ℓ}`.
    pub equidistributed: f64,
    /// `k ℓ 2^{-Hℓ}`.
    pub aep: f64,
    pub strict_warn: bool,
    pub equidistributed_warn: bool,
    pub aep_warn: bool,
}

impl RegimeDiagnostics {
    pub fn any_warning(&self) -> bool {
        self.strict_warn || self.equidistributed_warn || self.aep_warn
    }
}

/// The three regime products, each flagged when above [`REGIME_THRESHOLD`].
pub fn regime_check(k: usize, ell: usize, model: &ProcessModel) -> RegimeDiagnostics {
    let (kf, lf) = (k as f64, ell as f64);
    let strict = kf.powf(1.5) * lf * model.q_max().powf(lf);
    let equidistributed = kf * lf * (model.alphabet_size() as f64).powf(-lf);
    let aep = kf * lf * (-model.entropy_bits() * lf * LN_2).exp();
    RegimeDiagnostics {
        strict,
        equidistributed,
        aep,
        strict_warn: strict > REGIME_THRESHOLD,
        equidistributed_warn: equidistributed > REGIME_THRESHOLD,
        aep_warn: aep > REGIME_THRESHOLD,
    }
}

/// `Σ q_i (-log₂ q_i - H)²`, the variance of the per-symbol surprisal.
pub fn information_variance(model: &ProcessModel) -> f64 {
    let Some(q) = model.probs() else {
        return 0.0;
    };
    let h = model.entropy_bits();
    q.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * (-x.log2() - h).powi(2))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatisticReport {
    pub k: usize,
    pub ell: usize,
    pub h_bits: f64,
    pub z: f64,
    pub h_hat_bits: f64,
    pub z_corrected: Option<f64>,
    pub regime: RegimeDiagnostics,
}

/// Builds the full report for one return-time set under `model`.
pub fn statistic_report(
    s: &ReturnTimeSet,
    ell: usize,
    model: &ProcessModel,
    correction: bool,
) -> Result<StatisticReport, StatsError> {
    let h_bits = model.entropy_bits();
    let z = clt_statistic(s, ell, h_bits)?;
    let z_corrected = if correction {
        Some(variance_corrected_statistic(s, ell, h_bits, Some(model))?)
    } else {
        None
    };
    Ok(StatisticReport {
        k: s.k(),
        ell,
        h_bits,
        z,
        h_hat_bits: entropy_estimate(s, ell)?,
        z_corrected,
        regime: regime_check(s.k(), ell, model),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::returns::{ReturnEntry, ReturnTime};
    use proptest::prelude::*;

    fn binary_entropy(q: f64) -> f64 {
        -q * q.log2() - (1.0 - q) * (1.0 - q).log2()
    }

    #[test]
    fn single_immediate_return() {
        let s = ReturnTimeSet::from_values(&[1]);
        let z = clt_statistic(&s, 1, 0.0).unwrap();
        assert!((z - 0.450_054).abs() < 1e-6);
        assert!((z - EULER_GAMMA / PI2_OVER_6.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn centred_input_gives_zero() {
        // Integer S cannot hit ℓ H ln 2 - γ exactly, so centre on Ĥ instead.
        let s = ReturnTimeSet::from_values(&[1, 1, 1]);
        let h = entropy_estimate(&s, 2).unwrap();
        assert!((h - EULER_GAMMA / (2.0 * LN_2)).abs() < 1e-15);
        assert!(clt_statistic(&s, 2, h).unwrap().abs() < 1e-14);
    }

    #[test]
    fn censored_sets_are_refused() {
        let s = ReturnTimeSet::from_entries(
            vec![
                ReturnEntry { index: 1, time: ReturnTime::Observed(3), horizon_used: 3 },
                ReturnEntry { index: 2, time: ReturnTime::Censored, horizon_used: 10 },
            ],
            12,
        );
        assert_eq!(clt_statistic(&s, 1, 1.0), Err(StatsError::CensoredData(vec![2])));
        assert_eq!(entropy_estimate(&s, 1), Err(StatsError::CensoredData(vec![2])));
    }

    #[test]
    fn zero_covariance_leaves_statistic_unchanged() {
        let s = ReturnTimeSet::from_values(&[3, 9, 1, 40, 7]);
        let z = clt_statistic(&s, 3, 1.0).unwrap();
        assert_eq!(corrected_statistic_with(&s, 3, 1.0, 0.0).unwrap(), z);
    }

    #[test]
    fn negative_covariance_inflates_statistic() {
        let values: Vec<u64> = (1..=250).map(|i| (i * 37 % 2000) as u64 + 1).collect();
        let s = ReturnTimeSet::from_values(&values);
        let model = ProcessModel::equidistributed(2).unwrap();
        let z = clt_statistic(&s, 10, 1.0).unwrap();
        let zc = variance_corrected_statistic(&s, 10, 1.0, Some(&model)).unwrap();
        assert!(zc.abs() > z.abs());
        assert!(covariance_for(10, 1.0, Some(&model)) < 0.0);
    }

    #[test]
    fn equidistributed_and_aep_covariances_coincide() {
        let model = ProcessModel::equidistributed(4).unwrap();
        let a = covariance_for(5, 2.0, Some(&model));
        let b = covariance_for(5, 2.0, None);
        assert!((a - b).abs() < 1e-18);
    }

    #[test]
    fn oversized_correction_is_refused() {
        let s = ReturnTimeSet::from_values(&[2; 100]);
        assert!(matches!(
            corrected_statistic_with(&s, 1, 1.0, -1.0),
            Err(StatsError::CorrectionInvalid(_))
        ));
    }

    #[test]
    fn regime_examples() {
        let binary = ProcessModel::equidistributed(2).unwrap();
        let r = regime_check(250, 10, &binary);
        assert!((r.strict - 250f64.powf(1.5) * 10.0 / 1024.0).abs() < 1e-9);
        assert!((r.strict - 38.6).abs() < 0.05);
        assert!((r.equidistributed - 2.441_406_25).abs() < 1e-12);
        assert!(r.strict_warn && r.equidistributed_warn && r.aep_warn);
        let r = regime_check(50, 20, &binary);
        assert!((r.equidistributed - 0.000_953_674).abs() < 1e-9);
        assert!(!r.equidistributed_warn && !r.aep_warn);
    }

    #[test]
    fn information_variance_examples() {
        assert_eq!(information_variance(&ProcessModel::equidistributed(5).unwrap()), 0.0);
        let uniform = ProcessModel::with_probs(vec![0.25; 4]).unwrap();
        assert!(information_variance(&uniform).abs() < 1e-15);

        let q = ProcessModel::with_probs(vec![0.75, 0.25]).unwrap();
        let h = binary_entropy(0.75);
        assert!((q.entropy_bits() - 0.811_278).abs() < 1e-6);
        let a = -0.75f64.log2() - h;
        let b = 2.0 - h;
        let oracle = 0.75 * a * a + 0.25 * b * b;
        assert!((information_variance(&q) - oracle).abs() < 1e-15);
        assert!((information_variance(&q) - 0.471_02).abs() < 1e-5);

        let m = ProcessModel::with_probs(vec![0.5, 0.25, 0.25]).unwrap();
        assert!((m.entropy_bits() - 1.5).abs() < 1e-15);
        assert!((information_variance(&m) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn model_validation() {
        assert!(ProcessModel::with_probs(vec![0.5, 0.4]).is_err());
        assert!(ProcessModel::with_probs(vec![1.2, -0.2]).is_err());
        assert!(ProcessModel::equidistributed(1).is_err());
        assert!(ProcessModel::with_probs(vec![0.5, 0.5]).unwrap().is_equidistributed());
    }

    proptest! {
        #[test]
        fn statistic_entropy_identity(
            values in proptest::collection::vec(1u64..1_000_000, 1..200),
            ell in 1usize..40,
            h in 0.0f64..3.0,
        ) {
            let s = ReturnTimeSet::from_values(&values);
            let k = values.len() as f64;
            let z = clt_statistic(&s, ell, h).unwrap();
            let hh = entropy_estimate(&s, ell).unwrap();
            let rebuilt = (hh - h) * k * ell as f64 * LN_2 / (k * PI2_OVER_6).sqrt();
            prop_assert!((z - rebuilt).abs() <= 1e-9 * (1.0 + z.abs()));
            prop_assert!(hh >= 0.0);
        }

        #[test]
        fn statistic_ignores_order(
            mut values in proptest::collection::vec(1u64..10_000, 2..50),
            h in 0.0f64..2.0,
        ) {
            let a = clt_statistic(&ReturnTimeSet::from_values(&values), 4, h).unwrap();
            values.reverse();
            let b = clt_statistic(&ReturnTimeSet::from_values(&values), 4, h).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn regime_products_decrease_in_ell(
            k in 1usize..100_000,
            q in 0.5f64..0.95,
            ell in 1usize..200,
        ) {
            let model = ProcessModel::with_probs(vec![q, 1.0 - q]).unwrap();
            // kℓx^ℓ decreases once ℓ >= 1 / ln(1/x); q_max bounds every base.
            let start = (1.0 / (1.0 / q).ln()).ceil() as usize;
            let ell = ell.max(start);
            let a = regime_check(k, ell, &model);
            let b = regime_check(k, ell + 1, &model);
            prop_assert!(b.strict <= a.strict);
            prop_assert!(b.equidistributed <= a.equidistributed);
            prop_assert!(b.aep <= a.aep);
        }
    }
}
