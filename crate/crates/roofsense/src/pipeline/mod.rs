//! Configuration, run bookkeeping and the subcommands tying the modules
//! together.

pub mod cli;
pub mod commands;
pub mod config;
pub mod experiment;
pub mod guard;
pub mod report;
pub mod run;

pub use config::{RunConfig, Strategy};
pub use experiment::{evaluate, Evaluation, ModelPair};
pub use guard::LeakageGuard;
pub use report::EvalSummary;
