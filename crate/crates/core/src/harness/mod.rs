//! Configuration, scenario registry and study runners behind the command
//! line.

mod config;
mod runs;
mod scenario;

pub use config::parse_config;
pub use runs::{
    bench_rows, run_bench, run_converge, run_graphlimit, run_meanfield, run_simulate, write_atomic,
    BenchRow, RunReport,
};
pub use scenario::{
    random_state, smallest_singular_value, InitialFamily, KernelChoice, Scenario, REGISTRY,
};

use crate::error::Error;

/// Process exit code for a failed run: 2 for configuration and initial-data
/// problems, 3 for solver failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::Precondition(_) => 2,
        _ => 3,
    }
}
