//! Central limit theorems for non-overlapping return times of IID
//! processes: return-time extraction, exact moments, dependence tools,
//! Monte Carlo harness and comparator estimators.

pub mod baselines;
pub mod blocks;
pub mod dependence;
pub mod ingest;
pub mod moments;
pub mod normal;
pub mod returns;
pub mod rng;
pub mod simulate;
pub mod statistics;

pub use blocks::{blockify, Alphabet, BlockKey, BlockSequence, KeyCodec, SequenceError, SymbolSequence};
pub use moments::{GeomParam, MomentError, MomentReport, SeriesValue, EULER_GAMMA};
pub use normal::{KsResult, QqData};
pub use returns::{ReturnEntry, ReturnError, ReturnTime, ReturnTimeScanner, ReturnTimeSet};
pub use rng::{derive_seed, rng_from_seed, SimRng};
pub use simulate::{HorizonPolicy, SimError, TrialConfig, TrialResult, TrialRun};
pub use statistics::{ProcessModel, RegimeDiagnostics, StatisticReport, StatsError};
