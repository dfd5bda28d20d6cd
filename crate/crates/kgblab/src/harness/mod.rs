//! Experiment orchestration: ε ladders, slope fits, certification runs and
//! persisted reports.

mod config;
mod fit;
mod io;
mod runs;

pub use config::{ProfileConfig, ResolutionConfig, RunConfig};
pub use fit::{fit_slope, ScalingReport};
pub use io::{write_csv, write_json, GridEntry, Manifest};
pub use runs::{
    amplitude_gate_boundary, error_sample, kgb_self_convergence, linear_conservation, normal_form_at, par_map,
    pipeline_on_trajectory, probe_roundtrip, random_probe, run_drift_ladder, run_error_scaling, run_full_pipeline,
    run_kernel_ladder, run_residual_scan, whitham_self_convergence, DriftLadder, ErrorSample, ErrorScalingOutcome,
    KernelLadder, KernelLadderEntry, PipelineOutcome, ResidualScan, Setup,
};
