//! Moments of `ln R` for `R ~ Geom(p)`, inverse moments of `R`, the
//! dilogarithm and an Euler–Maclaurin gap calculator.
//!
//! Everything here is computed by direct summation with a rigorous bound on
//! the discarded tail, so the values can serve as reference oracles for the
//! statistical code.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

/// Euler's constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `π²/6`, the limiting variance of `ln R`.
pub const PI2_OVER_6: f64 = PI * PI / 6.0;

/// Largest number of series terms any single evaluation may use.
pub const MAX_TERMS: u64 = 1 << 33;

const RESYNC: u64 = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MomentError {
    #[error("p = {0} is not in (0, 1)")]
    InvalidParam(f64),
    #[error("moment order {0} is not supported")]
    InvalidOrder(u32),
    #[error("tolerance {0} must be positive and finite")]
    InvalidTolerance(f64),
    #[error("series did not reach the requested tolerance within {0} terms")]
    TermBudget(u64),
    #[error("dilogarithm argument {0} is outside [0, 1]")]
    Domain(f64),
    #[error("tails not certified to converge: {0}")]
    NonIntegrable(String),
}

/// Success probability of a geometric law on `{1, 2, ..}`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct GeomParam(f64);

impl GeomParam {
    pub fn new(p: f64) -> Result<Self, MomentError> {
        if p > 0.0 && p < 1.0 {
            Ok(Self(p))
        } else {
            Err(MomentError::InvalidParam(p))
        }
    }

    pub fn p(self) -> f64 {
        self.0
    }

    /// `P(R = r) = p (1-p)^(r-1)`.
    pub fn pmf(self, r: u64) -> f64 {
        if r == 0 {
            return 0.0;
        }
        self.0 * ((r - 1) as f64 * (-self.0).ln_1p()).exp()
    }
}

/// A series value with a bound on its absolute truncation error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub error_bound: f64,
    pub terms: u64,
}

/// Kahan–Babuška–Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Past this `r`, `ln r` inside a resync window comes from a short series
/// around the window start; the truncation is below 1e-15.
const LN_SERIES_FROM: u64 = 1 << 16;

/// Iterates `(r, p(1-p)^(r-1), ln r)`, recomputing the weight from scratch
/// every few hundred terms so rounding drift stays bounded.
struct GeomWeights {
    p: f64,
    log_q: f64,
    r: u64,
    w: f64,
    base_r: f64,
    base_inv: f64,
    base_ln: f64,
}

impl GeomWeights {
    fn new(p: GeomParam) -> Self {
        Self {
            p: p.0,
            log_q: (-p.0).ln_1p(),
            r: 0,
            w: 0.0,
            base_r: 1.0,
            base_inv: 1.0,
            base_ln: 0.0,
        }
    }

    #[inline]
    fn next(&mut self) -> (u64, f64, f64) {
        self.r += 1;
        let rf = self.r as f64;
        let ln = if self.r % RESYNC == 1 {
            self.w = self.p * ((self.r - 1) as f64 * self.log_q).exp();
            self.base_r = rf;
            self.base_inv = 1.0 / rf;
            self.base_ln = rf.ln();
            self.base_ln
        } else {
            self.w *= 1.0 - self.p;
            if self.r < LN_SERIES_FROM {
                rf.ln()
            } else {
                let x = (rf - self.base_r) * self.base_inv;
                self.base_ln + x * (1.0 - x * (0.5 - x * (1.0 / 3.0 - x * (0.25 - x * 0.2))))
            }
        };
        (self.r, self.w, ln)
    }
}

/// Bound on `Σ_{r>n} p(1-p)^(r-1) g(r)` when `g > 0` and `g(r+1)/g(r)` is
/// non-increasing for `r > n`. `ratio` is `g(n+2)/g(n+1)` and `next` the
/// term at `r = n+1`.
fn ratio_tail(next: f64, q: f64, ratio: f64) -> f64 {
    let rho = q * ratio;
    if rho < 1.0 {
        next / (1.0 - rho)
    } else {
        f64::INFINITY
    }
}

fn check_tol(tol: f64) -> Result<(), MomentError> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(MomentError::InvalidTolerance(tol))
    }
}

/// Raw moments `E (ln R)^m` for `m = 1, 2, 3` with per-moment tail bounds.
#[derive(Debug, Clone, Copy)]
struct RawMoments {
    m: [f64; 3],
    tail: [f64; 3],
    terms: u64,
}

impl RawMoments {
    fn mean_error(&self) -> f64 {
        self.tail[0]
    }

    fn variance(&self) -> (f64, f64) {
        let mu = self.m[0];
        let e1 = self.tail[0];
        let value = self.m[1] - mu * mu;
        (value, self.tail[1] + 2.0 * mu.abs() * e1 + e1 * e1)
    }

    fn third_central(&self) -> (f64, f64) {
        let [m1, m2, m3] = self.m;
        let [e1, e2, e3] = self.tail;
        let value = m3 - 3.0 * m1 * m2 + 2.0 * m1 * m1 * m1;
        let (a1, a2) = (m1.abs() + e1, m2.abs() + e2);
        let err = e3 + 3.0 * (a1 * e2 + a2 * e1 + e1 * e2) + 2.0 * ((a1 + e1).powi(3) - a1.powi(3));
        (value, err)
    }
}

/// Sums the raw moments until `done` accepts the current tail bounds.
fn raw_moments(p: GeomParam, done: impl Fn(&RawMoments) -> bool) -> Result<RawMoments, MomentError> {
    let q = 1.0 - p.0;
    let mut acc = [Neumaier::default(); 3];
    let mut weights = GeomWeights::new(p);
    loop {
        let (r, w, l) = weights.next();
        let wl = w * l;
        acc[0].add(wl);
        acc[1].add(wl * l);
        acc[2].add(wl * l * l);
        if r >= 2 && r % RESYNC == 0 {
            let l1 = ((r + 1) as f64).ln();
            let l2 = ((r + 2) as f64).ln();
            let next_w = p.0 * (r as f64 * weights.log_q).exp();
            let mut tail = [0.0; 3];
            for (m, slot) in tail.iter_mut().enumerate() {
                let e = (m + 1) as i32;
                *slot = ratio_tail(next_w * l1.powi(e), q, (l2 / l1).powi(e));
            }
            let current = RawMoments {
                m: [acc[0].value(), acc[1].value(), acc[2].value()],
                tail,
                terms: r,
            };
            if done(&current) {
                return Ok(current);
            }
        }
        if r >= MAX_TERMS {
            return Err(MomentError::TermBudget(MAX_TERMS));
        }
    }
}

/// `E (ln R)` for `order = 1`, `Var(ln R)` for `order = 2` and the signed
/// third central moment `E (ln R - μ)^3` for `order = 3`, with absolute error
/// below `tol`.
pub fn exact_log_moment(p: GeomParam, order: u32, tol: f64) -> Result<SeriesValue, MomentError> {
    check_tol(tol)?;
    let pick = |raw: &RawMoments| match order {
        1 => (raw.m[0], raw.mean_error()),
        2 => raw.variance(),
        _ => raw.third_central(),
    };
    if !(1..=3).contains(&order) {
        return Err(MomentError::InvalidOrder(order));
    }
    let raw = raw_moments(p, |raw| pick(raw).1 < tol)?;
    let (value, error_bound) = pick(&raw);
    Ok(SeriesValue {
        value,
        error_bound,
        terms: raw.terms,
    })
}

/// The leading-order mean `-γ - ln p`.
pub fn mu_asymptotic(p: GeomParam) -> f64 {
    -EULER_GAMMA - p.0.ln()
}

/// `E |ln R - μ|^3` with `μ = E ln R`, to absolute error `tol`.
///
/// Written as the signed third central moment plus twice the negative part
/// `Σ_{ln r < μ} w_r (μ - ln r)^3`, which only needs `r < e^μ ≈ 0.56/p`.
pub fn third_abs_central_moment(p: GeomParam, tol: f64) -> Result<SeriesValue, MomentError> {
    check_tol(tol)?;
    // The centre's error moves the result by at most 3 σ² |δμ|; σ² < 2 for
    // every p, so δμ < tol / 12 keeps that share below tol / 2.
    let raw = raw_moments(p, |raw| raw.mean_error() < tol / 12.0 && raw.third_central().1 < tol / 4.0)?;
    let mu = raw.m[0];
    let (var, var_err) = raw.variance();
    let (signed, signed_err) = raw.third_central();
    let centre_err = 3.0 * (var + var_err) * raw.mean_error();
    let [m1, m2, m3] = raw.m;
    let rounding = 4.0 * f64::EPSILON * (m3.abs() + 3.0 * (m1 * m2).abs() + 2.0 * m1.abs().powi(3));
    let mut negative = Neumaier::default();
    let mut weights = GeomWeights::new(p);
    loop {
        let (_, w, l) = weights.next();
        if l >= mu {
            break;
        }
        let d = mu - l;
        negative.add(w * d * d * d);
    }
    Ok(SeriesValue {
        value: signed + 2.0 * negative.value(),
        error_bound: signed_err + centre_err + rounding,
        terms: raw.terms,
    })
}

/// `E R^{-order}`: `-p ln p / (1-p)` for order 1 and `p Li₂(1-p) / (1-p)`
/// for order 2.
pub fn inverse_moment(p: GeomParam, order: u32) -> Result<f64, MomentError> {
    let pv = p.0;
    match order {
        1 => Ok(-pv * pv.ln() / (1.0 - pv)),
        2 => Ok(pv * dilogarithm(1.0 - pv)?.value / (1.0 - pv)),
        _ => Err(MomentError::InvalidOrder(order)),
    }
}

/// Direct series `Σ z^n / n²` for `0 <= z <= 1/2`, with its tail bound.
fn dilog_series(z: f64) -> SeriesValue {
    let mut acc = Neumaier::default();
    let mut zn = 1.0;
    let mut n = 0u64;
    loop {
        n += 1;
        zn *= z;
        let nf = n as f64;
        acc.add(zn / (nf * nf));
        let next = zn * z / ((nf + 1.0) * (nf + 1.0));
        let tail = next / (1.0 - z);
        if tail < 1e-17 * acc.value().max(f64::MIN_POSITIVE) || zn == 0.0 {
            return SeriesValue {
                value: acc.value(),
                error_bound: tail,
                terms: n,
            };
        }
    }
}

/// The dilogarithm `Li₂(z) = Σ_{n≥1} z^n / n²` on `[0, 1]`.
///
/// Arguments above 1/2 go through `Li₂(z) = π²/6 - ln z ln(1-z) - Li₂(1-z)`
/// so the series always runs with ratio at most 1/2.
pub fn dilogarithm(z: f64) -> Result<SeriesValue, MomentError> {
    if !(0.0..=1.0).contains(&z) {
        return Err(MomentError::Domain(z));
    }
    if z == 1.0 {
        return Ok(SeriesValue {
            value: PI2_OVER_6,
            error_bound: 0.0,
            terms: 0,
        });
    }
    if z <= 0.5 {
        return Ok(dilog_series(z));
    }
    let w = 1.0 - z;
    let inner = dilog_series(w);
    Ok(SeriesValue {
        value: PI2_OVER_6 - z.ln() * w.ln() - inner.value,
        error_bound: inner.error_bound,
        terms: inner.terms,
    })
}

/// `|f(x)| <= scale e^{-rate x}` and `|f'(x)| <= scale e^{-rate x}` for all
/// `x >= from`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayCertificate {
    pub from: f64,
    pub rate: f64,
    pub scale: f64,
}

impl DecayCertificate {
    fn envelope(&self, x: f64) -> f64 {
        self.scale * (-self.rate * x).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EulerMaclaurinGap {
    pub sum: f64,
    pub integral: f64,
    /// `|Σ_{i≥1} f(i) - ∫_1^∞ f|`.
    pub gap: f64,
    /// `½|f(1)| + ½ ∫_1^∞ |f'|`.
    pub bound: f64,
    /// Numerical error allowance shared by `gap` and `bound`.
    pub error_bound: f64,
    /// Last integer point summed.
    pub cutoff: u64,
}

/// `(P_n(t), P_{n-1}(t))` for the Legendre polynomials.
fn legendre(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

/// 16-point Gauss–Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre_16() -> ([f64; 16], [f64; 16]) {
    const N: usize = 16;
    let mut x = [0.0; N];
    let mut w = [0.0; N];
    for i in 0..N {
        let mut t = (PI * (i as f64 + 0.75) / (N as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (pn, pm) = legendre(N, t);
            let step = pn / (N as f64 * (t * pn - pm) / (t * t - 1.0));
            t -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (pn, pm) = legendre(N, t);
        let dp = N as f64 * (t * pn - pm) / (t * t - 1.0);
        x[i] = t;
        w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

/// Total variation of `f` on `[a, b]`, splitting at sign changes of `df`
/// found on a fine grid and refined by bisection.
fn variation(f: &impl Fn(f64) -> f64, df: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const STEPS: usize = 32;
    let h = (b - a) / STEPS as f64;
    let mut total = 0.0;
    let mut from = a;
    let mut x0 = a;
    let mut d0 = df(a);
    for s in 1..=STEPS {
        let x1 = if s == STEPS { b } else { a + s as f64 * h };
        let d1 = df(x1);
        if d0 * d1 < 0.0 {
            let (mut lo, mut hi) = (x0, x1);
            let lo_sign = d0.signum();
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if df(mid).signum() == lo_sign {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let root = 0.5 * (lo + hi);
            total += (f(root) - f(from)).abs();
            from = root;
        }
        x0 = x1;
        d0 = d1;
    }
    total + (f(b) - f(from)).abs()
}

/// Computes the gap between `Σ_{i≥1} f(i)` and `∫_1^∞ f(x) dx` together with
/// the first-order Euler–Maclaurin bound `½|f(1)| + ½ ∫_1^∞ |f'|`.
///
/// Summation and unit-interval quadrature run until the certificate bounds
/// every remaining tail below `tol`. The certificate is also spot-checked
/// at each integer it covers.
pub fn euler_maclaurin_gap(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    cert: DecayCertificate,
    tol: f64,
) -> Result<EulerMaclaurinGap, MomentError> {
    check_tol(tol)?;
    if !(cert.rate > 0.0 && cert.rate.is_finite() && cert.scale.is_finite() && cert.scale >= 0.0) {
        return Err(MomentError::NonIntegrable(format!(
            "certificate rate {} / scale {} do not describe a decaying envelope",
            cert.rate, cert.scale
        )));
    }
    let (nodes, weights) = gauss_legendre_16();
    let start = cert.from.max(1.0).ceil() as u64;
    let mut sum = Neumaier::default();
    let mut integral = Neumaier::default();
    let mut tv = 0.0;
    let mut i = 1u64;
    loop {
        let x = i as f64;
        let fx = f(x);
        if !fx.is_finite() {
            return Err(MomentError::NonIntegrable(format!("f({x}) is not finite")));
        }
        if i >= start && fx.abs() > cert.envelope(x) * (1.0 + 1e-12) {
            return Err(MomentError::NonIntegrable(format!(
                "|f({x})| = {} exceeds the certified envelope {}",
                fx.abs(),
                cert.envelope(x)
            )));
        }
        sum.add(fx);
        if i >= start {
            let e = cert.envelope(x + 1.0);
            let sum_tail = e / (1.0 - (-cert.rate).exp());
            let int_tail = cert.envelope(x) / cert.rate;
            if sum_tail.max(int_tail) < tol {
                let integral = integral.value();
                let total = sum.value();
                let gap = (total - integral).abs();
                let bound = 0.5 * f(1.0).abs() + 0.5 * tv;
                return Ok(EulerMaclaurinGap {
                    sum: total,
                    integral,
                    gap,
                    bound,
                    error_bound: sum_tail + 2.0 * int_tail,
                    cutoff: i,
                });
            }
        }
        let mut piece = 0.0;
        for (t, w) in nodes.iter().zip(weights.iter()) {
            piece += w * f(x + 0.5 * (t + 1.0));
        }
        integral.add(0.5 * piece);
        tv += variation(&f, &df, x, x + 1.0);
        i += 1;
        if i > 100_000_000 {
            return Err(MomentError::NonIntegrable(
                "tails did not fall below the tolerance within 10^8 unit intervals".into(),
            ));
        }
    }
}

/// Exact and leading-order moments of `ln R` at one `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentReport {
    pub p: f64,
    pub mu_exact: f64,
    pub mu_asym: f64,
    pub sigma2_exact: f64,
    pub sigma2_asym: f64,
    pub third_central_abs: f64,
    pub inverse_first: f64,
    pub inverse_second: f64,
    pub tail_truncation_error_bound: f64,
}

pub fn moment_report(p: GeomParam, tol: f64) -> Result<MomentReport, MomentError> {
    check_tol(tol)?;
    let raw = raw_moments(p, |raw| raw.mean_error() < tol && raw.variance().1 < tol)?;
    let (sigma2, var_err) = raw.variance();
    let abs3 = third_abs_central_moment(p, tol)?;
    Ok(MomentReport {
        p: p.0,
        mu_exact: raw.m[0],
        mu_asym: mu_asymptotic(p),
        sigma2_exact: sigma2,
        sigma2_asym: PI2_OVER_6,
        third_central_abs: abs3.value,
        inverse_first: inverse_moment(p, 1)?,
        inverse_second: inverse_moment(p, 2)?,
        tail_truncation_error_bound: raw.mean_error().max(var_err).max(abs3.error_bound),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gp(p: f64) -> GeomParam {
        GeomParam::new(p).unwrap()
    }

    /// Plain summation to a fixed, generous cutoff; used as an independent
    /// check of the certified routines.
    fn brute(p: f64, g: impl Fn(f64) -> f64) -> f64 {
        let n = (60.0 / p) as u64 + 200;
        let mut acc = Neumaier::default();
        for r in 1..=n {
            let w = p * ((r - 1) as f64 * (-p).ln_1p()).exp();
            acc.add(w * g(r as f64));
        }
        acc.value()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GeomParam::new(0.0).is_err());
        assert!(GeomParam::new(1.0).is_err());
        assert!(GeomParam::new(f64::NAN).is_err());
        assert!(exact_log_moment(gp(0.5), 4, 1e-9).is_err());
        assert!(exact_log_moment(gp(0.5), 1, 0.0).is_err());
        assert!(dilogarithm(1.5).is_err());
    }

    #[test]
    fn mean_at_one_half() {
        let v = exact_log_moment(gp(0.5), 1, 1e-10).unwrap();
        let oracle = brute(0.5, |r| r.ln());
        assert!((v.value - oracle).abs() < 1e-12);
        assert!((v.value - 0.507_833_922_868).abs() < 1e-11);
        assert!(v.error_bound < 1e-10);
    }

    #[test]
    fn moments_agree_with_plain_summation() {
        for &p in &[0.5, 0.25, 1.0 / 16.0, 1.0 / 1024.0] {
            let mu = brute(p, |r| r.ln());
            let var = brute(p, |r| (r.ln() - mu).powi(2));
            let c3 = brute(p, |r| (r.ln() - mu).powi(3));
            let a3 = brute(p, |r| (r.ln() - mu).abs().powi(3));
            assert!((exact_log_moment(gp(p), 1, 1e-11).unwrap().value - mu).abs() < 1e-10);
            assert!((exact_log_moment(gp(p), 2, 1e-11).unwrap().value - var).abs() < 1e-10);
            assert!((exact_log_moment(gp(p), 3, 1e-10).unwrap().value - c3).abs() < 1e-9);
            assert!((third_abs_central_moment(gp(p), 1e-10).unwrap().value - a3).abs() < 1e-9);
        }
    }

    #[test]
    fn asymptotic_mean_closed_forms() {
        assert!((mu_asymptotic(gp((-1.0f64).exp())) - 0.422_784).abs() < 1e-6);
        assert!((mu_asymptotic(gp(2f64.powi(-10))) - 6.354_256).abs() < 1e-6);
    }

    #[test]
    fn variance_near_limit_at_small_p() {
        let v = exact_log_moment(gp(2f64.powi(-13)), 2, 1e-10).unwrap();
        assert!((v.value - PI2_OVER_6).abs() < 0.01);
        assert!((v.value - 1.638_555_22).abs() < 1e-7);
    }

    #[test]
    fn reference_table() {
        // (exponent, mean, variance, E|ln R - μ|^3)
        let table = [
            (1, 0.507_834, 0.331_401, 0.271_071),
            (4, 2.295_166, 1.132_782, 1.815_736),
            (10, 6.357_771, 1.612_620, 3.839_110),
            (20, 13.285_735, 1.644_825, 4.107_697),
        ];
        for (e, mu, var, abs3) in table {
            let r = moment_report(gp(2f64.powi(-e)), 1e-10).unwrap();
            assert!((r.mu_exact - mu).abs() < 2e-6, "mu at 2^-{e}: {}", r.mu_exact);
            assert!((r.sigma2_exact - var).abs() < 2e-6, "var at 2^-{e}: {}", r.sigma2_exact);
            assert!((r.third_central_abs - abs3).abs() < 2e-6, "abs3 at 2^-{e}: {}", r.third_central_abs);
            assert!(r.tail_truncation_error_bound <= 1e-10);
        }
    }

    #[test]
    fn inverse_moments_match_series() {
        assert!((inverse_moment(gp(0.5), 1).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        for &p in &[0.9, 0.5, 0.1, 0.01, 1e-3] {
            let first = brute(p, |r| 1.0 / r);
            let second = brute(p, |r| 1.0 / (r * r));
            assert!((inverse_moment(gp(p), 1).unwrap() - first).abs() < 1e-12, "p={p}");
            assert!((inverse_moment(gp(p), 2).unwrap() - second).abs() < 1e-12, "p={p}");
        }
        assert!((inverse_moment(gp(0.5), 2).unwrap() - 0.582_240_526_465_012_5).abs() < 1e-14);
    }

    #[test]
    fn dilogarithm_special_values() {
        let ln2 = std::f64::consts::LN_2;
        assert_eq!(dilogarithm(0.0).unwrap().value, 0.0);
        assert!((dilogarithm(1.0).unwrap().value - PI2_OVER_6).abs() < 1e-15);
        assert!((dilogarithm(0.5).unwrap().value - (PI * PI / 12.0 - ln2 * ln2 / 2.0)).abs() < 1e-15);
        // Li₂ is continuous across the reflection point.
        let below = dilogarithm(0.5 - 1e-12).unwrap().value;
        let above = dilogarithm(0.5 + 1e-12).unwrap().value;
        assert!((above - below).abs() < 1e-11);
        // Golden-ratio value: Li₂(1/φ²) = π²/15 - ln²φ.
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let v = dilogarithm(1.0 / (phi * phi)).unwrap().value;
        assert!((v - (PI * PI / 15.0 - phi.ln().powi(2))).abs() < 1e-14);
    }

    #[test]
    fn second_inverse_moment_is_order_p_not_p_squared() {
        for e in [8, 12, 16] {
            let p = 2f64.powi(-e);
            let v = inverse_moment(gp(p), 2).unwrap();
            assert!((v / p - PI2_OVER_6).abs() < 20.0 * p * (-p.ln()));
            assert!(v > 100.0 * p * p);
        }
    }

    #[test]
    fn mean_gap_envelope() {
        // Validated envelope 0 <= μ - (-γ - ln p) <= p (|ln p|/2 + 1) over 2^-1..2^-20.
        for e in 1..=20 {
            let p = 2f64.powi(-e);
            let mu = exact_log_moment(gp(p), 1, 1e-12).unwrap().value;
            let d = mu - mu_asymptotic(gp(p));
            assert!(d >= 0.0, "2^-{e}: {d}");
            assert!(d <= p * (-p.ln() / 2.0 + 1.0), "2^-{e}: {d}");
        }
    }

    #[test]
    fn mean_gap_within_five_p_only_for_moderate_p() {
        for e in 6..=14 {
            let p = 2f64.powi(-e);
            let d = exact_log_moment(gp(p), 1, 1e-12).unwrap().value - mu_asymptotic(gp(p));
            assert!(d.abs() <= 5.0 * p, "2^-{e}: {}", d / p);
        }
        // The gap grows like (p/2)|ln p|, so the linear envelope fails eventually.
        let p = 2f64.powi(-20);
        let d = exact_log_moment(gp(p), 1, 1e-12).unwrap().value - mu_asymptotic(gp(p));
        assert!(d > 5.0 * p);
    }

    #[test]
    fn variance_gap_envelope() {
        // Validated envelope 0 <= π²/6 - σ² <= p |ln p| (|ln p| + 1) over 2^-3..2^-20.
        for e in 3..=20 {
            let p = 2f64.powi(-e);
            let lp = -p.ln();
            let v = exact_log_moment(gp(p), 2, 1e-11).unwrap().value;
            let d = PI2_OVER_6 - v;
            assert!(d >= 0.0, "2^-{e}: {d}");
            assert!(d <= p * lp * (lp + 1.0), "2^-{e}: {d}");
        }
    }

    #[test]
    fn variance_gap_within_five_p_log_p_only_for_moderate_p() {
        let gap = |e: i32| {
            let p = 2f64.powi(-e);
            let v = exact_log_moment(gp(p), 2, 1e-11).unwrap().value;
            (PI2_OVER_6 - v) / (p * -p.ln())
        };
        for e in 4..=10 {
            assert!(gap(e) <= 5.0, "2^-{e}: {}", gap(e));
        }
        assert!(gap(20) > 5.0);
    }

    #[test]
    fn third_absolute_moment_below_nine() {
        for e in 1..=20 {
            let v = third_abs_central_moment(gp(2f64.powi(-e)), 1e-9).unwrap();
            assert!(v.value > 0.0 && v.value <= 9.0, "2^-{e}: {}", v.value);
        }
    }

    #[test]
    fn euler_maclaurin_pure_exponential() {
        let r = euler_maclaurin_gap(
            |x| (-x).exp(),
            |x| -(-x).exp(),
            DecayCertificate { from: 1.0, rate: 1.0, scale: 1.0 },
            1e-14,
        )
        .unwrap();
        let e1 = (-1.0f64).exp();
        assert!((r.sum - e1 / (1.0 - e1)).abs() < 1e-12);
        assert!((r.integral - e1).abs() < 1e-12);
        assert!((r.bound - e1).abs() < 1e-12);
        assert!(r.gap <= r.bound);
    }

    /// `|f|, |f'| <= scale e^{-c x / 2}` for `f = e^{-cx} (ln x)^m`, `m = 1, 2`.
    fn log_weight_certificate(c: f64, m: i32) -> DecayCertificate {
        // ln x <= (4 / (c e)) e^{c x / 4}, and (1 + m c x)(ln x)^{m-1} e^{-c x/2}
        // is bounded the same way.
        let k = 4.0 / (c * std::f64::consts::E);
        let scale = (k.powi(m) + (1.0 + 2.0 * m as f64 / c) * k.powi(m - 1)).max(2.0);
        DecayCertificate { from: 1.0, rate: c / 2.0, scale }
    }

    #[test]
    fn euler_maclaurin_log_weights() {
        for &p in &[0.1, 0.3, 0.02] {
            let c = -(1.0f64 - p).ln();
            for m in [1, 2] {
                let f = move |x: f64| (-c * x).exp() * x.ln().powi(m);
                let df = move |x: f64| {
                    let l = x.ln();
                    (-c * x).exp() * (m as f64 * l.powi(m - 1) / x - c * l.powi(m))
                };
                let r = euler_maclaurin_gap(f, df, log_weight_certificate(c, m), 1e-10).unwrap();
                assert!(r.gap <= r.bound + r.error_bound, "p={p} m={m}: {} > {}", r.gap, r.bound);
                // Σ f(i) is the geometric moment up to a factor.
                let series = brute(p, |x| x.ln().powi(m)) * (1.0 - p) / p;
                assert!((r.sum - series).abs() < 1e-8 * series.max(1.0), "p={p} m={m}");
            }
        }
    }

    #[test]
    fn euler_maclaurin_rejects_bad_certificates() {
        let bad = DecayCertificate { from: 1.0, rate: 0.0, scale: 1.0 };
        assert!(matches!(
            euler_maclaurin_gap(|x| 1.0 / x, |x| -1.0 / (x * x), bad, 1e-9),
            Err(MomentError::NonIntegrable(_))
        ));
        let wrong = DecayCertificate { from: 1.0, rate: 2.0, scale: 1.0 };
        assert!(matches!(
            euler_maclaurin_gap(|x| (-x).exp(), |x| -(-x).exp(), wrong, 1e-9),
            Err(MomentError::NonIntegrable(_))
        ));
    }
}
