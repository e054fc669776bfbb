//! Monte Carlo BER sweeps, their configuration, and the self-checks.

pub mod checks;
pub mod config;
pub mod sweep;

pub use config::{LutSettings, SirControl, SweepConfig, SweepVariable};
pub use sweep::{
    estimate_ber, estimate_ber_with, prepare_bank, run_trial, tally_trials, write_csv, BerEstimate, Tally,
    TrialOutcome, CSV_HEADER,
};
