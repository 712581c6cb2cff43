//! Convergence sweeps, eigenfunction alignment and inequality diagnostics.

pub mod alignment;
pub mod config;
pub mod diagnostics;
pub mod sweep;

pub use alignment::{align_level, alignment_experiment, alignment_from_artifacts, AlignmentRecord};
pub use config::{RhoRule, SweepConfig};
pub use diagnostics::{
    run_lemma_suite, Check, HalvingTest, Lemma, LemmaFit, LemmaSuiteReport, Measurement,
};
pub use sweep::{
    build_level, emit_report, run_sweep, run_sweep_with_artifacts, ConvergenceReport,
    LevelArtifacts, LevelResult, LevelStatus, ReportFormat, SlopeFit,
};
