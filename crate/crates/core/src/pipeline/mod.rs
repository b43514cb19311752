//! Data loading, configuration, multi-chain fitting and file export.

pub mod config;
pub mod export;
pub mod fit;
pub mod prior;
pub mod returns;
pub mod simulate;
pub mod traces;

pub use config::{Innovation, Mode, RunConfig, StartMixture, Transform};
pub use export::export;
pub use fit::{fit, ChainReport, FitOutput};
pub use prior::{prior_recovery, PriorRecoveryConfig, PriorRecoveryDraws};
pub use returns::{load_returns, ReturnSeries};
pub use simulate::{simulate, write_simulation, SimulateParams, Simulated};
pub use traces::{Draw, Traces};
