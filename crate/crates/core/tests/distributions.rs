//! Monte Carlo checks of the exact laws against direct simulation.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use rtclt_core::blocks::blockify;
use rtclt_core::dependence::{conditional_sandwich, enumerate_conditional_tail, pair_conditional_pmf, sample_modified_returns};
use rtclt_core::moments::{exact_log_moment, third_abs_central_moment, GeomParam};
use rtclt_core::returns::return_times;
use rtclt_core::rng::{derive_seed, rng_from_seed};
use rtclt_core::simulate::gen_iid;
use rtclt_core::statistics::ProcessModel;

#[test]
fn third_moment_matches_monte_carlo_at_2_pow_minus_10() {
    let p = 2f64.powi(-10);
    let gp = GeomParam::new(p).unwrap();
    let mu = exact_log_moment(gp, 1, 1e-12).unwrap().value;
    let exact_abs = third_abs_central_moment(gp, 1e-10).unwrap().value;
    let exact_signed = exact_log_moment(gp, 3, 1e-10).unwrap().value;
    let geo = Geometric::new(p).unwrap();
    let mut rng = rng_from_seed(2024);
    let n = 1_000_000;
    let d: Vec<f64> = (0..n).map(|_| ((geo.sample(&mut rng) + 1) as f64).ln() - mu).collect();
    for (values, exact) in [
        (d.iter().map(|x| x.abs().powi(3)).collect::<Vec<_>>(), exact_abs),
        (d.iter().map(|x| x.powi(3)).collect::<Vec<_>>(), exact_signed),
    ] {
        let m = values.iter().sum::<f64>() / n as f64;
        let sd = (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let se = sd / (n as f64).sqrt();
        assert!((m - exact).abs() < 4.0 * se, "{m} vs {exact} (se {se})");
    }
}

#[test]
fn first_return_time_is_geometric() {
    // S_1 of an equidistributed source is Geom(A^-ℓ); chi-square over bins
    // of expected count at least 50.
    let (ell, blocks, reps) = (6, 3000, 20_000);
    let p: f64 = 1.0 / 64.0;
    let model = ProcessModel::equidistributed(2).unwrap();
    let mut counts = std::collections::BTreeMap::<u64, u64>::new();
    let width: u64 = 8;
    for rep in 0..reps {
        let seq = gen_iid(&model, blocks * ell, derive_seed(31, rep)).unwrap();
        let set = return_times(&blockify(&seq, ell).unwrap(), 1, u64::MAX).unwrap();
        let s = set.values().unwrap()[0];
        *counts.entry((s - 1) / width).or_default() += 1;
    }
    let bin_prob = |b: u64| (1.0 - p).powf((b * width) as f64) - (1.0 - p).powf(((b + 1) * width) as f64);
    let mut last = 0;
    while bin_prob(last + 1) * reps as f64 >= 50.0 {
        last += 1;
    }
    let mut chi2 = 0.0;
    let mut observed_tail = 0;
    for (&b, &c) in &counts {
        if b < last {
            let e = bin_prob(b) * reps as f64;
            chi2 += (c as f64 - e).powi(2) / e;
        } else {
            observed_tail += c;
        }
    }
    let tail_e = (1.0 - p).powf((last * width) as f64) * reps as f64;
    chi2 += (observed_tail as f64 - tail_e).powi(2) / tail_e;
    let dof = last as f64;
    assert!((chi2 - dof) / (2.0 * dof).sqrt() < 3.1, "chi2 {chi2} on {dof} dof");
}

#[test]
fn modified_pair_law_matches_block_construction() {
    // Two targets among the four 2-bit blocks: p = 1/4 each.
    let n = 200_000;
    let samples: Vec<Vec<u64>> = (0..n).map(|i| sample_modified_returns(2, 2, 2, derive_seed(77, i)).unwrap()).collect();
    for x in 1..=3u64 {
        let given: Vec<&Vec<u64>> = samples.iter().filter(|r| r[0] == x).collect();
        let m = given.len() as f64;
        for y in 1..=6u64 {
            if y == x {
                assert!(given.iter().all(|r| r[1] != x));
                continue;
            }
            let freq = given.iter().filter(|r| r[1] == y).count() as f64 / m;
            let exact = pair_conditional_pmf(0.25, x, y).unwrap();
            let se = (exact * (1.0 - exact) / m).sqrt();
            assert!((freq - exact).abs() < 4.5 * se, "x={x} y={y}: {freq} vs {exact}");
        }
    }
}

#[test]
fn sandwich_holds_for_random_unequal_targets() {
    let mut rng = rng_from_seed(5);
    for _ in 0..60 {
        let m = rng.random_range(2..=3usize);
        let raw: Vec<f64> = (0..=m).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        // The last entry is the mass outside the targets.
        let probs: Vec<f64> = raw[..m].iter().map(|v| v / total).collect();
        for s in m as u64..=7 {
            let bound = conditional_sandwich(&probs, s, m).unwrap();
            for (a, _, tail) in enumerate_conditional_tail(&probs, s, m, 7).unwrap() {
                assert!(
                    bound.lower <= tail + 1e-12 && tail <= bound.upper + 1e-12,
                    "probs={probs:?} s={s} a={a:?}: {} <= {tail} <= {}",
                    bound.lower,
                    bound.upper
                );
            }
        }
    }
}
