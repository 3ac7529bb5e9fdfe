//! Monte Carlo simulator and analytic toolkit for BB84-type key distribution
//! with multi-pair down-conversion sources, weak coherent pulses and
//! triggered single-arm sources, including a photon-number-splitting
//! eavesdropper.

pub mod analytics;
pub mod cli;
pub mod detection;
pub mod eavesdropper;
pub mod error;
pub mod fock_measurement;
pub mod protocol_engine;
pub mod rng;
pub mod source_model;
pub mod stats;

pub use analytics::{analytic_report, exact_rates_oracle, oracle_for, AnalyticReport, EpOracleParams, OracleRates};
pub use detection::{ChannelParams, ClickOutcome};
pub use eavesdropper::{BlockPolicy, PnsConfig, ResolvedPns};
pub use error::{Error, Result};
pub use fock_measurement::Basis;
pub use protocol_engine::{run_experiment, Experiment, RateReport, RoundRecord};
pub use source_model::{Gain, Scheme, SourceParams};
pub use stats::Estimate;
