use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use rtclt_core::baselines::{grassberger_entropy, overlapping_return_time, wyner_statistic};
use rtclt_core::dependence::{covariance_envelopes, exact_pair_log_covariance, PairLaw};
use rtclt_core::ingest::{analyze_segments, parse_digits, AnalyzeConfig, ScanScope};
use rtclt_core::moments::{moment_report, GeomParam};
use rtclt_core::normal::{qq_points, QqData};
use rtclt_core::simulate::{gen_iid, run_trials, summarize, HorizonPolicy, SampleSummary, SimError, TrialConfig};
use rtclt_core::statistics::{information_variance, ProcessModel, RegimeDiagnostics};

use crate::args::{AnalyzeArgs, BaselineArgs, BaselineMode, Horizon, MomentsArgs, NaCheckArgs, ProbArgs, Scope, SimulateArgs, Switch};
use crate::output::{sha256_hex, FileDigest, OutputDir};

/// Probabilities may miss 1 by this much before renormalization is required.
const PROB_TOLERANCE: f64 = 1e-9;

/// Whether every requested computation completed uncensored and valid.
pub enum Status {
    Complete,
    Incomplete(String),
}

pub fn parse_model(args: &ProbArgs) -> Result<ProcessModel> {
    let Some(text) = &args.probs else {
        let a = args.alphabet.ok_or_else(|| anyhow!("give --alphabet or --probs"))?;
        return ProcessModel::equidistributed(a).map_err(|e| anyhow!(e));
    };
    let probs = text
        .split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad probability {t:?}")))
        .collect::<Result<Vec<_>>>()?;
    if let Some(a) = args.alphabet {
        if a != probs.len() {
            bail!("--alphabet {a} does not match {} probabilities", probs.len());
        }
    }
    if let Some(bad) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        bail!("probability {bad} is not a non-negative number");
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROB_TOLERANCE && !args.renormalize {
        bail!("probabilities sum to {total}, not 1 (pass --renormalize to rescale)");
    }
    if total <= 0.0 {
        bail!("probabilities sum to zero");
    }
    ProcessModel::with_probs(probs.iter().map(|p| p / total).collect()).map_err(|e| anyhow!(e))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn qq_csv(qq: Option<&QqData>) -> String {
    let mut out = String::from("theoretical,sample\n");
    for (t, s) in qq.map(|q| q.points.as_slice()).unwrap_or_default() {
        writeln!(out, "{t},{s}").unwrap();
    }
    out
}

#[derive(Serialize)]
struct Distribution {
    n: usize,
    mean: Option<f64>,
    variance: Option<f64>,
    ks_d: Option<f64>,
    ks_p: Option<f64>,
    qq_slope: Option<f64>,
    qq_intercept: Option<f64>,
    qq_central90_max_deviation: Option<f64>,
}

impl Distribution {
    fn of(values: &[f64]) -> (Self, Option<SampleSummary>) {
        let s = summarize(values).ok();
        let d = Distribution {
            n: values.len(),
            mean: s.as_ref().map(|s| s.mean),
            variance: s.as_ref().map(|s| s.variance),
            ks_d: s.as_ref().and_then(|s| s.ks.map(|k| k.d)),
            ks_p: s.as_ref().and_then(|s| s.ks.map(|k| k.p_value)),
            qq_slope: s.as_ref().map(|s| s.qq.slope),
            qq_intercept: s.as_ref().map(|s| s.qq.intercept),
            qq_central90_max_deviation: s.as_ref().map(|s| s.qq_central_deviation),
        };
        (d, s)
    }
}

#[derive(Serialize)]
struct SimulateSummary {
    trials: usize,
    completed: usize,
    censored_trials: Vec<usize>,
    entropy_bits: f64,
    sized_symbols_per_trial: u64,
    symbols_generated: u64,
    z: Distribution,
    h_hat_mean: Option<f64>,
    z_corrected: Option<Distribution>,
    regime: RegimeDiagnostics,
}

pub fn simulate(args: &SimulateArgs) -> Result<Status> {
    let model = parse_model(&args.source)?;
    let mut config = TrialConfig::new(model, args.k, args.ell, args.trials, args.seed);
    config.correction = args.correction == Switch::On;
    config.horizon = match args.horizon {
        Horizon::Extend => HorizonPolicy::Extend {
            max_symbols: args.max_symbols,
        },
        Horizon::Fixed => HorizonPolicy::Fixed,
    };
    let run = match run_trials(&config) {
        Ok(run) => run,
        Err(SimError::CensoringBudgetExceeded { censored, trials, run }) => {
            let first = run.censored_trials().into_iter().take(5).map(|t| t.to_string()).collect::<Vec<_>>();
            bail!("{censored} of {trials} trials censored (first: {})", first.join(", "));
        }
        Err(e) => return Err(e.into()),
    };

    let mut out = OutputDir::open(&args.output.out_dir)?;
    let mut csv = String::from("trial,z,h_hat\n");
    for r in &run.results {
        writeln!(csv, "{},{},{}", r.trial, fmt_opt(r.z), fmt_opt(r.h_hat)).unwrap();
    }
    out.write("trials.csv", csv.as_bytes())?;
    let z = run.z_values();
    let (z_dist, z_summary) = Distribution::of(&z);
    out.write("qq.csv", qq_csv(z_summary.as_ref().map(|s| &s.qq)).as_bytes())?;
    if config.correction {
        let mut csv = String::from("trial,z_corrected\n");
        for r in &run.results {
            writeln!(csv, "{},{}", r.trial, fmt_opt(r.z_corrected)).unwrap();
        }
        out.write("trials_corrected.csv", csv.as_bytes())?;
    }
    let h = run.entropy_values();
    let censored = run.censored_trials();
    let summary = SimulateSummary {
        trials: config.trials,
        completed: z.len(),
        censored_trials: censored.clone(),
        entropy_bits: config.model.entropy_bits(),
        sized_symbols_per_trial: config.sized_symbols(),
        symbols_generated: run.results.iter().map(|r| r.symbols_generated).sum(),
        z: z_dist,
        h_hat_mean: (!h.is_empty()).then(|| h.iter().sum::<f64>() / h.len() as f64),
        z_corrected: config.correction.then(|| Distribution::of(&run.corrected_values()).0),
        regime: run.regime,
    };
    out.write_json("summary.json", &summary)?;
    let seeds = (0..config.trials).map(|t| config.trial_seed(t)).collect();
    let parameters = serde_json::json!({ "flags": args, "config": &config });
    out.commit("simulate", &parameters, seeds, Vec::new())?;
    Ok(if censored.is_empty() {
        Status::Complete
    } else {
        Status::Incomplete(format!("{} trials censored", censored.len()))
    })
}

#[derive(Serialize)]
struct SegmentError {
    segment: usize,
    message: String,
}

#[derive(Serialize)]
struct AnalyzeSummary {
    symbols: usize,
    segments: usize,
    discarded: usize,
    entropy_bits: f64,
    z: Distribution,
    h_hat_mean: Option<f64>,
    qq: Option<QqData>,
    errors: Vec<SegmentError>,
}

pub fn analyze(args: &AnalyzeArgs) -> Result<Status> {
    let bytes = std::fs::read(&args.file).with_context(|| format!("cannot read {}", args.file.display()))?;
    let input = FileDigest {
        path: args.file.display().to_string(),
        bytes: bytes.len() as u64,
        sha256: sha256_hex(&bytes),
    };
    let parsed = parse_digits(&bytes, args.alphabet).with_context(|| format!("{}", args.file.display()))?;
    drop(bytes);
    let config = AnalyzeConfig {
        k: args.k,
        ell: args.ell,
        segment_length: args.segment_length,
        scope: match args.scan_scope {
            Scope::Segment => ScanScope::Segment,
            Scope::Rest => ScanScope::Rest,
        },
    };
    let analysis = analyze_segments(&parsed.sequence, &config)?;

    let mut out = OutputDir::open(&args.output.out_dir)?;
    let mut csv = String::from("segment,z,h_hat\n");
    for r in &analysis.results {
        writeln!(csv, "{},{},{}", r.segment, fmt_opt(r.z), fmt_opt(r.h_hat)).unwrap();
    }
    out.write("segments.csv", csv.as_bytes())?;
    let z = analysis.z_values();
    let h: Vec<f64> = analysis.results.iter().filter_map(|r| r.h_hat).collect();
    let (z_dist, _) = Distribution::of(&z);
    let errors: Vec<SegmentError> = analysis
        .results
        .iter()
        .filter_map(|r| {
            r.error.as_ref().map(|m| SegmentError {
                segment: r.segment,
                message: m.clone(),
            })
        })
        .collect();
    let summary = AnalyzeSummary {
        symbols: parsed.len(),
        segments: analysis.results.len(),
        discarded: analysis.discarded,
        entropy_bits: analysis.entropy_bits,
        z: z_dist,
        h_hat_mean: (!h.is_empty()).then(|| h.iter().sum::<f64>() / h.len() as f64),
        qq: qq_points(&z).ok(),
        errors,
    };
    let status = if summary.segments == 0 {
        Status::Incomplete("file shorter than one segment".into())
    } else if !summary.errors.is_empty() {
        Status::Incomplete(format!(
            "{} of {} segments could not be analyzed",
            summary.errors.len(),
            summary.segments
        ))
    } else {
        Status::Complete
    };
    out.write_json("summary.json", &summary)?;
    out.commit("analyze", args, Vec::new(), vec![input])?;
    Ok(status)
}

pub fn moments(args: &MomentsArgs) -> Result<Status> {
    let report = moment_report(GeomParam::new(args.p)?, args.tol)?;
    let mut out = OutputDir::open(&args.output.out_dir)?;
    out.write_json("moments.json", &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    out.commit("moments", args, Vec::new(), Vec::new())?;
    Ok(Status::Complete)
}

#[derive(Serialize)]
struct NaReport {
    p: f64,
    covariance: f64,
    covariance_error_bound: f64,
    terms: u64,
    lower_envelope: f64,
    heuristic: f64,
    asymptotic_lower: f64,
    ratio_to_heuristic: f64,
    within_envelope: bool,
    /// `|Σ_y P(R_j = y | R_i = x) - 1|` for `x = 1` and `x = ⌈1/p⌉`.
    pmf_normalization_error: [f64; 2],
}

pub fn na_check(args: &NaCheckArgs) -> Result<Status> {
    let p = args.p;
    let c = exact_pair_log_covariance(p, args.tol)?;
    let env = covariance_envelopes(p);
    let norm = |x: u64| -> Result<f64> { Ok((PairLaw::row(p, x, args.tol)?.total() - 1.0).abs()) };
    let report = NaReport {
        p,
        covariance: c.value,
        covariance_error_bound: c.error_bound,
        terms: c.terms,
        lower_envelope: env.lower,
        heuristic: env.heuristic,
        asymptotic_lower: env.asymptotic_lower,
        ratio_to_heuristic: c.value / env.heuristic,
        within_envelope: c.value <= 0.0 && c.value >= env.lower,
        pmf_normalization_error: [norm(1)?, norm((1.0 / p).ceil() as u64)?],
    };
    let mut out = OutputDir::open(&args.output.out_dir)?;
    out.write_json("na_check.json", &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    out.commit("na-check", args, Vec::new(), Vec::new())?;
    Ok(if report.within_envelope {
        Status::Complete
    } else {
        Status::Incomplete("covariance outside [p ln p, 0]".into())
    })
}

#[derive(Serialize)]
struct BaselineRow {
    mode: BaselineMode,
    n: usize,
    seed: u64,
    entropy_bits: f64,
    information_variance: f64,
    /// Entropy estimate, Wyner statistic or `T_n`, by mode.
    value: Option<f64>,
    censored: bool,
    symbols: usize,
}

pub fn baseline(args: &BaselineArgs) -> Result<Status> {
    let model = parse_model(&args.source)?;
    let symbols = match args.mode {
        BaselineMode::Grassberger => args.n + args.extension,
        BaselineMode::Wyner | BaselineMode::Overlap => {
            let h = usize::try_from(args.horizon).context("horizon too large")?;
            args.n.checked_add(h).ok_or_else(|| anyhow!("horizon too large"))?
        }
    };
    let seq = gen_iid(&model, symbols, args.seed)?;
    let (value, censored) = match args.mode {
        BaselineMode::Grassberger => (Some(grassberger_entropy(&seq, args.n)?), false),
        BaselineMode::Wyner => match wyner_statistic(&seq, args.n, args.horizon, &model) {
            Ok(z) => (Some(z), false),
            Err(rtclt_core::baselines::BaselineError::Censored { .. }) => (None, true),
            Err(e) => return Err(e.into()),
        },
        BaselineMode::Overlap => {
            let t = overlapping_return_time(&seq, args.n, args.horizon)?.t;
            (t.map(|t| t as f64), t.is_none())
        }
    };
    let row = BaselineRow {
        mode: args.mode,
        n: args.n,
        seed: args.seed,
        entropy_bits: model.entropy_bits(),
        information_variance: information_variance(&model),
        value,
        censored,
        symbols,
    };
    let mut out = OutputDir::open(&args.output.out_dir)?;
    let mode = serde_json::to_value(args.mode)?;
    let csv = format!(
        "mode,n,seed,value\n{},{},{},{}\n",
        mode.as_str().unwrap_or_default(),
        args.n,
        args.seed,
        fmt_opt(value)
    );
    out.write("baseline.csv", csv.as_bytes())?;
    out.write_json("baseline.json", &row)?;
    println!("{}", serde_json::to_string_pretty(&row)?);
    out.commit("baseline", args, vec![args.seed], Vec::new())?;
    Ok(if censored {
        Status::Incomplete(format!("no return within {} shifts", args.horizon))
    } else {
        Status::Complete
    })
}
