//! Library side of the `shardgame` command: scenario loading, command
//! runners and CSV output.

pub mod commands;
pub mod error;
pub mod figures;
pub mod report;
pub mod scenario;

pub use commands::{run_scenario, Command, RunOutput};
pub use error::{CliError, Result};
pub use figures::{reproduce_figure, Figure, FigureOutcome};
pub use scenario::{load_scenario, parse_scenario, Scenario};
