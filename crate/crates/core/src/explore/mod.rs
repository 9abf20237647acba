//! Design evaluation, parameter sweeps and constrained optimization.

mod design;
mod export;
mod optimize;
mod sweep;

pub use design::{
    evaluate, BeamBlock, ConstraintCheck, ConstraintKind, ConstraintSettings, DesignInputs,
    DesignPoint, GmKeyword, GmSetting, MaterialsBlock, PierceBlock, TransducerBlock,
    DEFAULT_PULL_IN_SAFETY, PARAMETER_PATHS,
};
pub use export::{flatten_point, write_rows_csv, FlatRow};
pub use optimize::{nelder_mead, optimize, LogEntry, NelderMeadOptions, OptimizeOutcome, Phase};
pub use sweep::{sweep, Axis, AxisScale, Objective, SweepRow, SweepSpec, DEFAULT_GRID_CAP};
