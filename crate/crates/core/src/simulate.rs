//! IID sources and the Monte Carlo trial harness.

use rand::{Rng, RngCore};
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::Serialize;
use thiserror::Error;

use crate::blocks::{Alphabet, BlockSequence, BlockStore, KeyCodec, SymbolSequence};
use crate::normal::{ks_normal, qq_points, KsResult, NormalError, QqData};
use crate::returns::{ReturnError, ReturnTimeScanner};
use crate::rng::{derive_seed, rng_from_seed, SimRng};
use crate::statistics::{
    clt_statistic, covariance_for, corrected_statistic_with, entropy_estimate, regime_check, ProcessModel,
    RegimeDiagnostics, StatsError,
};

/// Block spaces up to this size are sampled directly from a block-level
/// alias table.
const BLOCK_TABLE_LIMIT: u128 = 1 << 20;

/// Largest chunk of blocks generated at once.
const CHUNK_BLOCKS: usize = 1 << 20;

/// Default ceiling on symbols generated for one trial.
pub const DEFAULT_MAX_SYMBOLS: u64 = 1 << 32;

/// Largest fraction of trials allowed to censor.
pub const CENSORING_BUDGET: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{censored} of {trials} trials censored, above the {:.1}% budget", CENSORING_BUDGET * 100.0)]
    CensoringBudgetExceeded {
        censored: usize,
        trials: usize,
        run: Box<TrialRun>,
    },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Returns(#[from] ReturnError),
    #[error(transparent)]
    Normal(#[from] NormalError),
}

enum SymbolSampler {
    Constant(u8),
    /// Equidistributed with `2^bits` symbols; `64 / bits` symbols per word.
    Bits(u32),
    Uniform(u8),
    Alias(WeightedAliasIndex<f64>),
}

impl SymbolSampler {
    fn new(model: &ProcessModel) -> Result<Self, SimError> {
        let a = model.alphabet_size();
        if a > 256 {
            return Err(SimError::InvalidConfig(format!("alphabet size {a} exceeds 256")));
        }
        if let Some(q) = model.probs() {
            if let Some(i) = q.iter().position(|&x| x == 1.0) {
                return Ok(Self::Constant(i as u8));
            }
        }
        if model.is_equidistributed() {
            return Ok(if a.is_power_of_two() {
                Self::Bits(a.trailing_zeros())
            } else {
                Self::Uniform(a as u8)
            });
        }
        let weights = model.probs().expect("non-uniform models carry probabilities").to_vec();
        WeightedAliasIndex::new(weights)
            .map(Self::Alias)
            .map_err(|e| SimError::InvalidConfig(e.to_string()))
    }

    fn fill(&self, rng: &mut SimRng, out: &mut Vec<u8>, n: usize) {
        match self {
            Self::Constant(c) => out.extend(std::iter::repeat_n(*c, n)),
            Self::Bits(bits) => {
                let per_word = (64 / bits) as usize;
                let mask = (1u64 << bits) - 1;
                let mut left = n;
                while left > 0 {
                    let mut word = rng.next_u64();
                    for _ in 0..per_word.min(left) {
                        out.push((word & mask) as u8);
                        word >>= bits;
                    }
                    left = left.saturating_sub(per_word);
                }
            }
            Self::Uniform(a) => out.extend((0..n).map(|_| rng.random_range(0..*a))),
            Self::Alias(table) => out.extend((0..n).map(|_| table.sample(rng) as u8)),
        }
    }
}

/// `n` IID symbols from `model`, reproducible from `seed`.
pub fn gen_iid(model: &ProcessModel, n: usize, seed: u64) -> Result<SymbolSequence, SimError> {
    if n == 0 {
        return Err(SimError::InvalidConfig("n must be at least 1".into()));
    }
    let sampler = SymbolSampler::new(model)?;
    let mut rng = rng_from_seed(seed);
    let mut symbols = Vec::with_capacity(n);
    sampler.fill(&mut rng, &mut symbols, n);
    let alphabet = Alphabet::new(model.alphabet_size()).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    Ok(SymbolSequence::from_trusted(alphabet, symbols))
}

/// Draws successive `ℓ`-blocks of an IID source directly as keys.
///
/// Small block spaces use an alias table over whole blocks (one draw per
/// block); otherwise blocks are assembled from individually drawn symbols.
/// Both give IID blocks with the product law.
pub struct BlockSource {
    alphabet: Alphabet,
    codec: KeyCodec,
    kind: BlockSampler,
}

enum BlockSampler {
    UniformBits(u32),
    UniformRange(u128),
    Table(WeightedAliasIndex<f64>),
    Symbols(SymbolSampler),
}

impl BlockSource {
    pub fn new(model: &ProcessModel, ell: usize) -> Result<Self, SimError> {
        if ell == 0 {
            return Err(SimError::InvalidConfig("block length must be at least 1".into()));
        }
        let alphabet = Alphabet::new(model.alphabet_size()).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        let codec = KeyCodec::new(&alphabet, ell);
        let kind = match codec.space() {
            Some(space) if model.is_equidistributed() && space <= 1u128 << 64 => {
                if space.is_power_of_two() {
                    BlockSampler::UniformBits(space.trailing_zeros())
                } else {
                    BlockSampler::UniformRange(space)
                }
            }
            Some(space) if space <= BLOCK_TABLE_LIMIT => {
                let a = model.alphabet_size();
                let weights: Vec<f64> = (0..space as usize)
                    .map(|mut key| {
                        let mut w = 1.0;
                        for _ in 0..ell {
                            w *= model.prob(key % a);
                            key /= a;
                        }
                        w
                    })
                    .collect();
                BlockSampler::Table(WeightedAliasIndex::new(weights).map_err(|e| SimError::InvalidConfig(e.to_string()))?)
            }
            _ => BlockSampler::Symbols(SymbolSampler::new(model)?),
        };
        Ok(Self { alphabet, codec, kind })
    }

    pub fn codec(&self) -> &KeyCodec {
        &self.codec
    }

    pub fn generate(&self, rng: &mut SimRng, blocks: usize) -> BlockSequence {
        let ell = self.codec.block_length();
        let store = match &self.kind {
            BlockSampler::UniformBits(bits) => {
                let mask = if *bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
                BlockStore::Packed((0..blocks).map(|_| (rng.next_u64() & mask) as u128).collect())
            }
            BlockSampler::UniformRange(space) => {
                let space = *space as u64;
                BlockStore::Packed((0..blocks).map(|_| rng.random_range(0..space) as u128).collect())
            }
            BlockSampler::Table(table) => BlockStore::Packed((0..blocks).map(|_| table.sample(rng) as u128).collect()),
            BlockSampler::Symbols(sampler) => {
                let mut buf = Vec::with_capacity(blocks * ell);
                sampler.fill(rng, &mut buf, blocks * ell);
                if self.codec.is_packed() {
                    BlockStore::Packed(buf.chunks_exact(ell).map(|c| self.codec.pack(c)).collect())
                } else {
                    BlockStore::Raw(buf.chunks_exact(ell).map(Box::<[u8]>::from).collect())
                }
            }
        };
        BlockSequence::from_store(self.alphabet.clone(), self.codec, store)
    }
}

/// How much data each trial may consume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum HorizonPolicy {
    /// Exactly the sized length; return times that do not resolve in it
    /// are censored.
    Fixed,
    /// Start at the sized length and keep drawing from the same stream until
    /// every return time resolves or `max_symbols` have been generated.
    Extend { max_symbols: u64 },
}

impl Default for HorizonPolicy {
    fn default() -> Self {
        HorizonPolicy::Extend {
            max_symbols: DEFAULT_MAX_SYMBOLS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialConfig {
    pub model: ProcessModel,
    pub k: usize,
    pub ell: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub horizon: HorizonPolicy,
    pub correction: bool,
}

impl TrialConfig {
    pub fn new(model: ProcessModel, k: usize, ell: usize, trials: usize, master_seed: u64) -> Self {
        Self {
            model,
            k,
            ell,
            trials,
            master_seed,
            horizon: HorizonPolicy::default(),
            correction: false,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.k == 0 || self.ell == 0 || self.trials == 0 {
            return Err(SimError::InvalidConfig("k, ℓ and trials must all be at least 1".into()));
        }
        if self.k >= u32::MAX as usize {
            return Err(SimError::InvalidConfig(format!("k = {} is too large", self.k)));
        }
        if self.model.q_max() >= 1.0 {
            return Err(SimError::InvalidConfig("a degenerate source never produces finite statistics".into()));
        }
        Ok(())
    }

    /// `kℓ + ℓ ⌈ln(10³ k) 2^{Hℓ}⌉` symbols: enough that a block of typical
    /// probability `2^{-Hℓ}` fails to recur with probability below
    /// `10⁻³ / k`.
    pub fn sized_symbols(&self) -> u64 {
        let h = self.model.entropy_bits();
        let typical = (h * self.ell as f64).exp2();
        let c = (self.k as f64 * 1e3).ln();
        let tail = (c * typical).ceil().min(u64::MAX as f64 / 4.0) as u64;
        (self.k as u64 * self.ell as u64).saturating_add((self.ell as u64).saturating_mul(tail))
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        derive_seed(self.master_seed, trial as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub z: Option<f64>,
    pub h_hat: Option<f64>,
    pub z_corrected: Option<f64>,
    pub symbols_generated: u64,
    /// 1-based indices of unresolved return times.
    pub censored: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRun {
    pub config: TrialConfig,
    pub results: Vec<TrialResult>,
    pub regime: RegimeDiagnostics,
}

impl TrialRun {
    pub fn z_values(&self) -> Vec<f64> {
        self.results.iter().filter_map(|r| r.z).collect()
    }

    pub fn corrected_values(&self) -> Vec<f64> {
        self.results.iter().filter_map(|r| r.z_corrected).collect()
    }

    pub fn entropy_values(&self) -> Vec<f64> {
        self.results.iter().filter_map(|r| r.h_hat).collect()
    }

    pub fn censored_trials(&self) -> Vec<usize> {
        self.results
            .iter()
            .filter(|r| !r.censored.is_empty())
            .map(|r| r.trial)
            .collect()
    }
}

/// Runs one trial; the outcome depends only on the configuration and the
/// trial index.
pub fn run_trial(config: &TrialConfig, source: &BlockSource, trial: usize) -> Result<TrialResult, SimError> {
    let seed = config.trial_seed(trial);
    let mut rng = rng_from_seed(seed);
    let ell = config.ell as u64;
    let sized_blocks = config.sized_symbols() / ell;
    let max_blocks = match config.horizon {
        HorizonPolicy::Fixed => sized_blocks,
        HorizonPolicy::Extend { max_symbols } => (max_symbols / ell).max(sized_blocks),
    };
    let mut scanner = ReturnTimeScanner::new(*source.codec(), config.k, u64::MAX)?;
    let mut generated = 0u64;
    let mut target = sized_blocks;
    loop {
        while generated < target && !scanner.is_complete() {
            let chunk = (target - generated).min(CHUNK_BLOCKS as u64) as usize;
            let blocks = source.generate(&mut rng, chunk);
            scanner.feed(&blocks)?;
            generated += chunk as u64;
        }
        if scanner.is_complete() || generated >= max_blocks {
            break;
        }
        target = (generated * 2).min(max_blocks);
    }
    let set = scanner.finish()?;
    let censored = set.censored();
    let (z, h_hat, z_corrected) = if censored.is_empty() {
        let h = config.model.entropy_bits();
        let z = clt_statistic(&set, config.ell, h)?;
        let zc = if config.correction {
            Some(corrected_statistic_with(
                &set,
                config.ell,
                h,
                covariance_for(config.ell, h, Some(&config.model)),
            )?)
        } else {
            None
        };
        (Some(z), Some(entropy_estimate(&set, config.ell)?), zc)
    } else {
        (None, None, None)
    };
    Ok(TrialResult {
        trial,
        seed,
        z,
        h_hat,
        z_corrected,
        symbols_generated: generated * ell,
        censored,
    })
}

/// Runs every trial in index order. Censored trials are kept in the result
/// with their unresolved indices; more than [`CENSORING_BUDGET`] of them is
/// an error.
pub fn run_trials(config: &TrialConfig) -> Result<TrialRun, SimError> {
    config.validate()?;
    if config.correction {
        let h = config.model.entropy_bits();
        let k = config.k as f64;
        let var = k * crate::moments::PI2_OVER_6 + k * (k - 1.0) * covariance_for(config.ell, h, Some(&config.model));
        if !(var > 0.0) {
            return Err(StatsError::CorrectionInvalid(var).into());
        }
    }
    let source = BlockSource::new(&config.model, config.ell)?;
    let results = (0..config.trials)
        .map(|t| run_trial(config, &source, t))
        .collect::<Result<Vec<_>, _>>()?;
    let run = TrialRun {
        config: config.clone(),
        results,
        regime: regime_check(config.k, config.ell, &config.model),
    };
    let censored = run.censored_trials().len();
    if censored as f64 > CENSORING_BUDGET * config.trials as f64 {
        return Err(SimError::CensoringBudgetExceeded {
            censored,
            trials: config.trials,
            run: Box::new(run),
        });
    }
    Ok(run)
}

/// Location, spread and normality diagnostics of a sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    /// Present with at least 20 values.
    pub ks: Option<KsResult>,
    /// Largest QQ deviation over the central 90% of points.
    pub qq_central_deviation: f64,
    #[serde(skip)]
    pub qq: QqData,
}

pub fn summarize(values: &[f64]) -> Result<SampleSummary, SimError> {
    let qq = qq_points(values)?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let ks = if values.len() >= 20 { Some(ks_normal(values)?) } else { None };
    Ok(SampleSummary {
        n: values.len(),
        mean,
        variance,
        ks,
        qq_central_deviation: qq.max_central_deviation(0.9),
        qq,
    })
}
