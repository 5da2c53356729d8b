//! Problem presets with exact solutions, refinement studies, the
//! verification suite, CSV output and the command-line front end.

pub mod cli;
pub mod config;
pub mod output;
pub mod presets;
pub mod study;
pub mod verify;

pub use presets::{exact_const_source, exact_frac_heat, BoundaryKind, PresetName, ProblemPreset};
pub use study::{convergence_study, ConvergenceRow, StudyConfig, StudyOutcome};
pub use verify::{verify_all, verify_with, CheckResult, VerifyReport, DEFAULT_SEED};
