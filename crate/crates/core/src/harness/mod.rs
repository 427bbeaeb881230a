//! Configuration, run orchestration and file output.

mod config;
mod output;
mod runs;
mod selftest;

pub use config::{parse_config, Mode, Phi0Kind, RunConfig};
pub use output::{reports_csv, vtk_string, write_csv, write_text, write_vtk};
pub use runs::{
    convergence_study, convergence_study_with_workers, execute_run, fit_rate, mc_run,
    mc_run_with_workers, path_csv_name, run_path, worker_count, ConvergenceTable, LevelRow,
    McSummary, MeanSe, PathRun, Problem, RateFit,
};
pub use selftest::{run_selftest, Check};
