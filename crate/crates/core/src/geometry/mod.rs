//! Parameter-space geometry: safety margins of ReLU networks, escape
//! perturbations, training paths against thin safe sets, and gradient
//! alignment between capability and safety losses.

mod alignment;
mod margin;
mod paths;

pub use alignment::{
    gradient_alignment_experiment, AlignmentReport, AlignmentTask, TaskVariant,
};
pub use margin::{
    escape_experiment, escape_perturbation, random_safe_network, safety_margin, EscapeExperimentConfig,
    EscapeExperimentReport, EscapeFlag, EscapeOptions, EscapeResult, GridDomain, MarginStatus,
    SafetyMarginResult, MAX_GRID_POINTS,
};
pub use paths::{
    multi_path_trap, simulate_path, simulate_training_paths, simulate_training_paths_multi, Dynamics,
    HitRow, HitStatistics, PathBudget, Potential, ThinSafeSet, TrainingPath, DEFAULT_RADII,
};
