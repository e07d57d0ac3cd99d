//! The dependence structure of the modified return times: conditional tail
//! bounds, the pairwise conditional law and exact log-covariance, a sampler
//! based on ordered geometric spacings, and brute-force enumerations used
//! as oracles for all of them.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::Serialize;
use thiserror::Error;

use crate::blocks::{blockify, Alphabet, SymbolSequence};
use crate::moments::{exact_log_moment, GeomParam, Neumaier, SeriesValue, EULER_GAMMA};
use crate::returns::{modified_return_times, ReturnError};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DependenceError {
    #[error("invalid arguments: {0}")]
    InvalidArgs(String),
    #[error("target probabilities before m sum to {0}, which is not below 1")]
    InvalidMass(f64),
    #[error("p = {0} is too small for the covariance oracle's work budget")]
    TooSmall(f64),
    #[error(transparent)]
    Returns(#[from] ReturnError),
}

fn invalid(msg: impl Into<String>) -> DependenceError {
    DependenceError::InvalidArgs(msg.into())
}

/// Both sides of `(1 - p_m/(1-S*))^{s-1} <= P(R_m >= s | R_1..R_{m-1}) <= (1-p_m)^{s-m}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichBound {
    pub m: usize,
    pub s: u64,
    pub probs: Vec<f64>,
    pub s_star: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Bounds on the tail of the `m`-th waiting time given the first `m-1`, for
/// distinct targets with probabilities `probs[0..m]`.
pub fn conditional_sandwich(probs: &[f64], s: u64, m: usize) -> Result<SandwichBound, DependenceError> {
    if m < 2 {
        return Err(invalid(format!("m = {m} must be at least 2")));
    }
    if probs.len() < m {
        return Err(invalid(format!("need {m} probabilities, got {}", probs.len())));
    }
    if (s as usize) < m {
        return Err(invalid(format!("s = {s} must be at least m = {m}")));
    }
    if let Some(bad) = probs[..m].iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        return Err(invalid(format!("probability {bad} is not in (0, 1)")));
    }
    let s_star: f64 = probs[..m - 1].iter().sum();
    if s_star >= 1.0 {
        return Err(DependenceError::InvalidMass(s_star));
    }
    let pm = probs[m - 1];
    let lower = (1.0 - pm / (1.0 - s_star)).max(0.0).powf((s - 1) as f64);
    let upper = (1.0 - pm).powf((s - m as u64) as f64);
    Ok(SandwichBound {
        m,
        s,
        probs: probs[..m].to_vec(),
        s_star,
        lower,
        upper,
    })
}

/// Exact `P(R_m >= s | R_1 = a_1, .., R_{m-1} = a_{m-1})` for every `a` with
/// all entries at most `len`, by enumerating every stream of `len` IID
/// blocks over the reduced alphabet {target 1, .., target m, other}.
///
/// Returns `(a, probability of the condition, conditional tail)`, sorted by
/// `a`. Requires `s - 1 <= len`.
pub fn enumerate_conditional_tail(
    probs: &[f64],
    s: u64,
    m: usize,
    len: usize,
) -> Result<Vec<(Vec<u64>, f64, f64)>, DependenceError> {
    if m < 2 || probs.len() < m {
        return Err(invalid("need m >= 2 target probabilities"));
    }
    if s == 0 || (s - 1) as usize > len {
        return Err(invalid(format!("s - 1 = {} exceeds the stream length {len}", s.saturating_sub(1))));
    }
    let other = 1.0 - probs[..m].iter().sum::<f64>();
    if other < -1e-12 {
        return Err(DependenceError::InvalidMass(1.0 - other));
    }
    let mut weights: Vec<f64> = probs[..m].to_vec();
    weights.push(other.max(0.0));
    let letters = m + 1;
    let total = (letters as u64)
        .checked_pow(len as u32)
        .filter(|&t| t <= 1 << 26)
        .ok_or_else(|| invalid("enumeration too large"))?;

    let mut joint: HashMap<Vec<u64>, (f64, f64)> = HashMap::new();
    let mut stream = vec![0usize; len];
    for code in 0..total {
        let mut c = code;
        let mut w = 1.0;
        for slot in stream.iter_mut() {
            *slot = (c % letters as u64) as usize;
            c /= letters as u64;
            w *= weights[*slot];
        }
        if w == 0.0 {
            continue;
        }
        let mut first = vec![0u64; m];
        for (t, &sym) in stream.iter().enumerate() {
            if sym < m && first[sym] == 0 {
                first[sym] = t as u64 + 1;
            }
        }
        if first[..m - 1].contains(&0) {
            continue;
        }
        let tail = first[m - 1] == 0 || first[m - 1] >= s;
        let entry = joint.entry(first[..m - 1].to_vec()).or_insert((0.0, 0.0));
        entry.0 += w;
        if tail {
            entry.1 += w;
        }
    }
    let mut out: Vec<(Vec<u64>, f64, f64)> = joint
        .into_iter()
        .map(|(a, (pa, pt))| (a, pa, pt / pa))
        .collect();
    out.sort_by(|x, y| x.0.cmp(&y.0));
    Ok(out)
}

/// `P(R_j = y | R_i = x)` for distinct targets of equal probability `p`.
pub fn pair_conditional_pmf(p: f64, x: u64, y: u64) -> Result<f64, DependenceError> {
    if !(p > 0.0 && p < 0.5) {
        return Err(invalid(format!("p = {p} must lie in (0, 1/2)")));
    }
    if x == 0 || y == 0 {
        return Err(invalid("waiting times start at 1"));
    }
    if x == y {
        return Err(invalid("distinct targets never appear at the same time"));
    }
    let r = (1.0 - 2.0 * p) / (1.0 - p);
    Ok(if y < x {
        p / (1.0 - p) * r.powf((y - 1) as f64)
    } else {
        r.powf((x - 1) as f64) * (1.0 - p).powf((y - x - 1) as f64) * p
    })
}

/// One row `y -> P(R_j = y | R_i = x)` of the pairwise law, truncated where
/// the remaining mass is below the requested tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairLaw {
    pub p: f64,
    pub x: u64,
    /// `(y, pmf)` for `y = 1..`, skipping `y = x`.
    pub entries: Vec<(u64, f64)>,
    pub truncation_bound: f64,
}

impl PairLaw {
    pub fn row(p: f64, x: u64, tol: f64) -> Result<Self, DependenceError> {
        if !(tol > 0.0) {
            return Err(invalid("tolerance must be positive"));
        }
        pair_conditional_pmf(p, x, x + 1)?;
        let r = (1.0 - 2.0 * p) / (1.0 - p);
        let mut entries = Vec::new();
        let mut y = 1;
        loop {
            if y != x {
                entries.push((y, pair_conditional_pmf(p, x, y)?));
            }
            if y > x {
                // Mass beyond y is r^{x-1} (1-p)^{y-x}.
                let tail = r.powf((x - 1) as f64) * (1.0 - p).powf((y - x) as f64);
                if tail < tol {
                    return Ok(Self {
                        p,
                        x,
                        entries,
                        truncation_bound: tail,
                    });
                }
            }
            y += 1;
        }
    }

    pub fn total(&self) -> f64 {
        let mut acc = Neumaier::default();
        for &(_, v) in &self.entries {
            acc.add(v);
        }
        acc.value()
    }
}

/// Largest backward-recursion table the covariance oracle will allocate.
const MAX_TABLE: usize = 1 << 26;

/// `Cov(ln R_i, ln R_j)` for two distinct targets of probability `p`, from
/// the joint law `P(R_i = x) P(R_j = y | R_i = x)`.
///
/// The inner expectation `A(x) = E[ln R_j | R_i = x]` is assembled from a
/// running prefix sum over `y < x` and the backward recursion
/// `T(x) = ln(x+1) + (1-p) T(x+1)` for `T(x) = Σ_{g≥1} (1-p)^{g-1} ln(x+g)`,
/// started far enough out that its starting error is damped away.
pub fn exact_pair_log_covariance(p: f64, tol: f64) -> Result<SeriesValue, DependenceError> {
    if !(p > 0.0 && p <= 0.25) {
        return Err(invalid(format!("p = {p} must lie in (0, 1/4]")));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(invalid("tolerance must be positive"));
    }
    let q = 1.0 - p;
    let log_q = (-p).ln_1p();
    let mu = exact_log_moment(GeomParam::new(p).expect("p checked"), 1, tol.min(1e-12))
        .expect("valid arguments")
        .value;

    // |ln x - μ| |A(x) - μ| <= g(x) = (ln(x + 1/p) + μ)², and g(x+1)/g(x)
    // is non-increasing, so the ratio test bounds the discarded x-tail.
    let g = |x: f64| ((x + 1.0 / p).ln() + mu).powi(2);
    let x_tail = |n: f64| {
        let next = p * (n * log_q).exp() * g(n + 1.0);
        let rho = q * g(n + 2.0) / g(n + 1.0);
        next / (1.0 - rho)
    };
    let mut cutoff = (1.0 / p).ceil();
    while x_tail(cutoff) >= tol / 2.0 {
        cutoff *= 1.25;
    }
    let cutoff = cutoff as usize;
    let y_max = cutoff + (60.0 / p).ceil() as usize;
    if y_max > MAX_TABLE {
        return Err(DependenceError::TooSmall(p));
    }

    // T(Y) lies between (1/p) ln(Y+1) and (1/p) ln(Y + 1/p) (Jensen); start
    // from the upper value. The error shrinks by (1-p) per step back.
    let mut t = vec![0.0f64; cutoff + 2];
    let yf = y_max as f64;
    let start_err = ((yf + 1.0 / p) / (yf + 1.0)).ln() / p;
    let mut t_cur = (yf + 1.0 / p).ln() / p;
    for x in (1..y_max).rev() {
        t_cur = ((x + 1) as f64).ln() + q * t_cur;
        if x <= cutoff + 1 {
            t[x] = t_cur;
        }
    }
    let t_err = start_err * ((y_max - cutoff - 1) as f64 * log_q).exp();

    let r = (1.0 - 2.0 * p) / q;
    let log_r = r.ln();
    let mut prefix = Neumaier::default();
    let mut acc = Neumaier::default();
    let mut abs_dev = 0.0;
    for x in 1..=cutoff {
        let xf = x as f64;
        let r_pow = ((xf - 1.0) * log_r).exp();
        let a = p / q * prefix.value() + r_pow * p * t[x];
        let w = p * ((xf - 1.0) * log_q).exp();
        let d = xf.ln() - mu;
        acc.add(w * d * (a - mu));
        abs_dev += w * d.abs();
        prefix.add(r_pow * xf.ln());
    }
    Ok(SeriesValue {
        value: acc.value(),
        error_bound: x_tail(cutoff as f64) + abs_dev * p * t_err,
        terms: cutoff as u64,
    })
}

/// Reference envelopes for the pairwise log-covariance at block probability `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovarianceEnvelopes {
    /// `p ln p`, a lower bound.
    pub lower: f64,
    /// `(p ln p)/4`, the heuristic used by the variance correction.
    pub heuristic: f64,
    /// `-p(-ln p / 2 + γ)`, the asymptotic lower bound with its sign fixed.
    pub asymptotic_lower: f64,
}

pub fn covariance_envelopes(p: f64) -> CovarianceEnvelopes {
    let lp = p.ln();
    CovarianceEnvelopes {
        lower: p * lp,
        heuristic: p * lp / 4.0,
        asymptotic_lower: -p * (-lp / 2.0 + EULER_GAMMA),
    }
}

/// Draws from `Geom(p)` on `{1, 2, ..}`.
fn geometric(rng: &mut impl Rng, p: f64) -> u64 {
    if p >= 1.0 {
        return 1;
    }
    Geometric::new(p).expect("p in (0, 1)").sample(rng) + 1
}

/// `R_1..R_k` for `k` distinct equiprobable targets, built from independent
/// spacings `W_i ~ Geom((k+1-i) p)`: the partial sums `U_j` are the ordered
/// waiting times and a uniform permutation assigns them to indices.
pub fn ordered_spacings_sample(k: usize, p: f64, seed: u64) -> Result<Vec<u64>, DependenceError> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    if !(p > 0.0 && (k as f64) * p <= 1.0) {
        return Err(invalid(format!("need 0 < k p <= 1, got k = {k}, p = {p}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut u = 0u64;
    let mut values: Vec<u64> = (1..=k)
        .map(|i| {
            u += geometric(&mut rng, (k + 1 - i) as f64 * p);
            u
        })
        .collect();
    values.shuffle(&mut rng);
    Ok(values)
}

/// `R_1..R_k` from the block construction itself: `k` source blocks and a
/// post-source stream of equidistributed symbols, extended until every
/// target has appeared.
pub fn sample_modified_returns(
    alphabet_size: usize,
    ell: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<u64>, DependenceError> {
    let alphabet = Alphabet::new(alphabet_size).map_err(|e| invalid(e.to_string()))?;
    let space = alphabet
        .block_space(ell)
        .filter(|&s| s <= 1 << 40)
        .ok_or_else(|| invalid("block space too large for direct sampling"))?;
    let mut rng = rng_from_seed(seed);
    let target_seed: u64 = rng.random();
    let post = (space as usize).max(8) * (4 + (k as f64).ln().ceil() as usize);
    let mut symbols: Vec<u8> = Vec::new();
    let mut extend = |symbols: &mut Vec<u8>, blocks: usize| {
        symbols.extend((0..blocks * ell).map(|_| rng.random_range(0..alphabet_size as u8)));
    };
    extend(&mut symbols, k + post);
    loop {
        let seq = SymbolSequence::new(alphabet.clone(), symbols.clone()).expect("symbols in range");
        let blocks = blockify(&seq, ell).expect("non-empty");
        let horizon = (blocks.len() - k) as u64;
        let set = modified_return_times(&blocks, k, horizon, target_seed)?;
        if let Ok(values) = set.returns().values() {
            return Ok(values);
        }
        // Reveal more of the same stream; the targets do not change.
        extend(&mut symbols, post);
    }
}

/// Exact joint law of `(R_1, .., R_k)` for single-symbol blocks over an
/// equidistributed alphabet: every source string, every outcome of the
/// target draws and every post-source stream of length `len` is enumerated.
/// Waiting times beyond `len` are reported as `len + 1`.
pub fn enumerate_modified_joint_law(
    alphabet_size: usize,
    k: usize,
    len: usize,
) -> Result<HashMap<Vec<u64>, f64>, DependenceError> {
    if alphabet_size < k || k == 0 {
        return Err(invalid("need 1 <= k <= alphabet size"));
    }
    let a = alphabet_size as u64;
    let sources = a.pow(k as u32);
    let streams = a
        .checked_pow(len as u32)
        .filter(|&t| t <= 1 << 24)
        .ok_or_else(|| invalid("enumeration too large"))?;
    let unit = 1.0 / a as f64;

    // Law of the post-source first-appearance vector for a fixed target
    // tuple; computed once per distinct tuple.
    let mut cache: HashMap<Vec<u8>, HashMap<Vec<u64>, f64>> = HashMap::new();
    let stream_weight = unit.powi(len as i32);
    let mut post_law = |targets: &[u8]| -> HashMap<Vec<u64>, f64> {
        cache
            .entry(targets.to_vec())
            .or_insert_with(|| {
                let mut law = HashMap::new();
                for code in 0..streams {
                    let mut c = code;
                    let mut first = vec![len as u64 + 1; targets.len()];
                    for t in 0..len {
                        let sym = (c % a) as u8;
                        c /= a;
                        if let Some(j) = targets.iter().position(|&b| b == sym) {
                            if first[j] > len as u64 {
                                first[j] = t as u64 + 1;
                            }
                        }
                    }
                    *law.entry(first).or_insert(0.0) += stream_weight;
                }
                law
            })
            .clone()
    };

    let mut joint: HashMap<Vec<u64>, f64> = HashMap::new();
    for code in 0..sources {
        let mut c = code;
        let source: Vec<u8> = (0..k)
            .map(|_| {
                let s = (c % a) as u8;
                c /= a;
                s
            })
            .collect();
        let in_d: Vec<bool> = (0..k).map(|i| !source[i + 1..].contains(&source[i])).collect();
        let fixed: Vec<u8> = (0..k).filter(|&i| in_d[i]).map(|i| source[i]).collect();
        // All equally likely completions of the sequential draws.
        let mut branches: Vec<(Vec<Option<u8>>, Vec<u8>, f64)> = vec![(
            (0..k).map(|i| in_d[i].then_some(source[i])).collect(),
            fixed,
            unit.powi(k as i32),
        )];
        for i in 0..k {
            if in_d[i] {
                continue;
            }
            let mut next = Vec::new();
            for (targets, taken, w) in branches {
                let free: Vec<u8> = (0..alphabet_size as u8).filter(|v| !taken.contains(v)).collect();
                let share = w / free.len() as f64;
                for v in free {
                    let mut t = targets.clone();
                    t[i] = Some(v);
                    let mut tk = taken.clone();
                    tk.push(v);
                    next.push((t, tk, share));
                }
            }
            branches = next;
        }
        for (targets, _, w) in branches {
            let targets: Vec<u8> = targets.into_iter().map(|t| t.expect("assigned")).collect();
            for (first, pw) in post_law(&targets) {
                *joint.entry(first).or_insert(0.0) += w * pw;
            }
        }
    }
    Ok(joint)
}

/// Total-variation distance between a law and an empirical sample, with
/// every coordinate above `len` merged into `len + 1`.
pub fn total_variation(law: &HashMap<Vec<u64>, f64>, samples: &[Vec<u64>], len: usize) -> f64 {
    let cap = len as u64 + 1;
    let mut freq: HashMap<Vec<u64>, f64> = HashMap::new();
    let unit = 1.0 / samples.len() as f64;
    for s in samples {
        let key: Vec<u64> = s.iter().map(|&v| v.min(cap)).collect();
        *freq.entry(key).or_insert(0.0) += unit;
    }
    let mut tv = 0.0;
    for (key, &p) in law {
        tv += (p - freq.get(key).copied().unwrap_or(0.0)).abs();
    }
    for (key, &f) in &freq {
        if !law.contains_key(key) {
            tv += f;
        }
    }
    tv / 2.0
}

/// Coordinatewise non-decreasing functions of a return-time vector.
/// Indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Monotone {
    Sum(Vec<usize>),
    Max(Vec<usize>),
    /// `1{R_index > threshold}`.
    Exceeds { index: usize, threshold: u64 },
    /// `Σ ln R_i`.
    LogSum(Vec<usize>),
}

impl Monotone {
    pub fn indices(&self) -> Vec<usize> {
        match self {
            Monotone::Sum(ix) | Monotone::Max(ix) | Monotone::LogSum(ix) => ix.clone(),
            Monotone::Exceeds { index, .. } => vec![*index],
        }
    }

    pub fn eval(&self, r: &[u64]) -> f64 {
        match self {
            Monotone::Sum(ix) => ix.iter().map(|&i| r[i - 1] as f64).sum(),
            Monotone::Max(ix) => ix.iter().map(|&i| r[i - 1]).max().unwrap_or(0) as f64,
            Monotone::Exceeds { index, threshold } => f64::from(u8::from(r[index - 1] > *threshold)),
            Monotone::LogSum(ix) => ix.iter().map(|&i| (r[i - 1] as f64).ln()).sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovarianceEstimate {
    pub covariance: f64,
    pub standard_error: f64,
    pub samples: usize,
}

impl CovarianceEstimate {
    /// Consistent with a non-positive covariance: at most three standard
    /// errors above zero.
    pub fn consistent_with_na(&self) -> bool {
        self.covariance <= 3.0 * self.standard_error
    }
}

/// Sample covariance of `f1` and `f2` over the rows of `samples`, with the
/// standard error of the mean-product estimator.
pub fn na_empirical_check(
    samples: &[Vec<u64>],
    f1: &Monotone,
    f2: &Monotone,
) -> Result<CovarianceEstimate, DependenceError> {
    let (a, b) = (f1.indices(), f2.indices());
    if a.is_empty() || b.is_empty() {
        return Err(invalid("index sets must be non-empty"));
    }
    if a.iter().any(|i| b.contains(i)) {
        return Err(invalid("index sets must be disjoint"));
    }
    if samples.len() < 2 {
        return Err(invalid("need at least two samples"));
    }
    let width = samples.iter().map(Vec::len).min().unwrap_or(0);
    if a.iter().chain(b.iter()).any(|&i| i == 0 || i > width) {
        return Err(invalid("index outside the sample vectors"));
    }
    let n = samples.len() as f64;
    let x: Vec<f64> = samples.iter().map(|s| f1.eval(s)).collect();
    let y: Vec<f64> = samples.iter().map(|s| f2.eval(s)).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let prods: Vec<f64> = x.iter().zip(&y).map(|(u, v)| (u - mx) * (v - my)).collect();
    let covariance = prods.iter().sum::<f64>() / (n - 1.0);
    let mean_prod = prods.iter().sum::<f64>() / n;
    let var_prod = prods.iter().map(|d| (d - mean_prod).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(CovarianceEstimate {
        covariance,
        standard_error: (var_prod / n).sqrt(),
        samples: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sandwich_plug_in() {
        let b = conditional_sandwich(&[0.1, 0.1], 2, 2).unwrap();
        assert!((b.lower - (1.0 - 0.1 / 0.9)).abs() < 1e-15);
        assert_eq!(b.upper, 1.0);
        let b = conditional_sandwich(&[0.2, 0.1, 0.3], 3, 3).unwrap();
        assert_eq!(b.upper, 1.0);
        assert!(b.lower <= b.upper);
    }

    #[test]
    fn sandwich_rejects_bad_inputs() {
        assert!(matches!(conditional_sandwich(&[0.6, 0.5, 0.1], 4, 3), Err(DependenceError::InvalidMass(_))));
        assert!(conditional_sandwich(&[0.1, 0.1], 1, 2).is_err());
        assert!(conditional_sandwich(&[0.1], 3, 1).is_err());
    }

    #[test]
    fn sandwich_holds_for_two_bit_blocks() {
        let probs = [0.25; 3];
        let bound = conditional_sandwich(&probs, 5, 3).unwrap();
        let rows = enumerate_conditional_tail(&probs, 5, 3, 8).unwrap();
        assert!(!rows.is_empty());
        for (a, pa, tail) in rows {
            assert!(pa > 0.0);
            assert!(bound.lower <= tail + 1e-12 && tail <= bound.upper + 1e-12, "a={a:?} tail={tail}");
        }
    }

    #[test]
    fn pmf_plug_in_and_rejection() {
        assert!((pair_conditional_pmf(0.25, 3, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(pair_conditional_pmf(0.25, 3, 3).is_err());
        assert!(pair_conditional_pmf(0.5, 3, 1).is_err());
    }

    #[test]
    fn pmf_rows_normalise() {
        for x in [1, 2, 5] {
            let row = PairLaw::row(1.0 / 16.0, x, 1e-10).unwrap();
            assert!((row.total() - 1.0).abs() <= 1e-10 + 1e-14, "x={x}: {}", row.total());
        }
    }

    #[test]
    fn pmf_matches_two_step_enumeration() {
        // Two targets over a 4-letter alphabet: P(R_2 = y | R_1 = x) from the
        // enumerated joint law of first appearances.
        let law = enumerate_modified_joint_law(4, 2, 7).unwrap();
        let marginal = |x: u64| -> f64 { law.iter().filter(|(k, _)| k[0] == x).map(|(_, v)| v).sum() };
        for (x, y) in [(3u64, 1u64), (2, 4), (4, 6), (1, 2)] {
            let joint = law.get(&vec![x, y]).copied().unwrap_or(0.0);
            let cond = joint / marginal(x);
            let exact = pair_conditional_pmf(0.25, x, y).unwrap();
            assert!((cond - exact).abs() < 1e-12, "({x},{y}) {cond} vs {exact}");
        }
    }

    /// Direct double sum over the truncated joint law, as an independent
    /// check of the recursion.
    fn brute_covariance(p: f64) -> f64 {
        let n = (50.0 / p) as u64;
        let w = |x: u64| p * (1.0 - p).powf((x - 1) as f64);
        let mu: f64 = (1..=n).map(|x| w(x) * (x as f64).ln()).sum();
        let mut acc = 0.0;
        for x in 1..=n {
            let mut inner = 0.0;
            for y in 1..=n {
                if y != x {
                    inner += pair_conditional_pmf(p, x, y).unwrap() * ((y as f64).ln() - mu);
                }
            }
            acc += w(x) * ((x as f64).ln() - mu) * inner;
        }
        acc
    }

    #[test]
    fn covariance_matches_double_sum() {
        for p in [0.25, 0.125, 1.0 / 16.0] {
            let c = exact_pair_log_covariance(p, 1e-12).unwrap();
            let b = brute_covariance(p);
            assert!((c.value - b).abs() < 1e-9, "p={p}: {} vs {b}", c.value);
            assert!(c.error_bound < 1e-12);
        }
    }

    #[test]
    fn covariance_reference_values() {
        let cases = [(4, -0.061_341), (6, -0.018_648), (8, -0.005_103), (10, -0.001_324_5)];
        for (e, v) in cases {
            let c = exact_pair_log_covariance(2f64.powi(-e), 1e-12).unwrap().value;
            assert!((c - v).abs() < 1e-4 * v.abs(), "2^-{e}: {c}");
        }
    }

    #[test]
    fn covariance_envelope_checks() {
        for e in [4, 6, 8, 10, 12] {
            let p = 2f64.powi(-e);
            let c = exact_pair_log_covariance(p, 1e-13).unwrap().value;
            let env = covariance_envelopes(p);
            assert!(c <= 0.0 && c >= env.lower, "2^-{e}: {c}");
            assert!(c >= env.asymptotic_lower, "2^-{e}: {c}");
        }
    }

    #[test]
    fn spacings_are_distinct_and_single_index_is_geometric() {
        for seed in 0..200 {
            let r = ordered_spacings_sample(6, 0.1, seed).unwrap();
            let mut s = r.clone();
            s.sort_unstable();
            s.dedup();
            assert_eq!(s.len(), 6);
        }
        assert!(ordered_spacings_sample(20, 0.1, 0).is_err());
    }

    #[test]
    fn joint_law_sums_to_one() {
        let law = enumerate_modified_joint_law(3, 2, 5).unwrap();
        let total: f64 = law.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(law.keys().all(|k| k[0] != k[1] || k[0] == 6));
    }

    #[test]
    fn na_check_validation_and_monotone_library() {
        let rows = vec![vec![1, 2, 3], vec![2, 1, 5], vec![4, 4, 1]];
        assert!(na_empirical_check(&rows, &Monotone::Sum(vec![1, 2]), &Monotone::Max(vec![2, 3])).is_err());
        assert!(na_empirical_check(&rows, &Monotone::Sum(vec![1]), &Monotone::Sum(vec![4])).is_err());
        let e = na_empirical_check(&rows, &Monotone::Sum(vec![1]), &Monotone::Sum(vec![2])).unwrap();
        assert!(e.covariance.is_finite() && e.samples == 3);
        let r = [3u64, 7, 2];
        assert_eq!(Monotone::Max(vec![1, 3]).eval(&r), 3.0);
        assert_eq!(Monotone::Exceeds { index: 2, threshold: 6 }.eval(&r), 1.0);
        assert!((Monotone::LogSum(vec![1, 2]).eval(&r) - 21f64.ln()).abs() < 1e-15);
    }
}
