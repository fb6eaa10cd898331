//! View-aware rate allocation for streaming several point-cloud models under
//! one bandwidth budget.
//!
//! Models are classified by their position relative to the camera
//! ([`prioritizer`]), then the greedy allocator ([`allocator`]) picks one
//! representation level per model so the total bitrate fits the budget.
//! [`oracle`] solves small instances exactly to measure how far the greedy
//! result is from optimal, and [`simulator`] replays bandwidth and camera
//! traces interval by interval.

pub mod allocator;
pub mod generator;
pub mod geometry;
pub mod manifest;
pub mod oracle;
pub mod prioritizer;
pub mod report;
pub mod scene;
pub mod simulator;

pub use allocator::{
    allocate, total_quality, w_min, Allocation, AllocationEntry, BudgetTrail, Infeasible,
};
pub use generator::{generate_instances, GeneratorParams, Instance, InstanceGenerator};
pub use geometry::Vec3;
pub use manifest::{load_manifest, serialize_manifest, ManifestError};
pub use oracle::{gap_report, solve_exact, ExactSolver, GapReport, OracleResult};
pub use prioritizer::{classify, prioritize, visibility, PrioritizationConfig};
pub use scene::{
    validate_scene, Bps, Coefficient, PointCloudModel, PrioritizedModel, PriorityClass,
    PriorityWeights, Quality, RepresentationLadder, Scene, ValidationError, ValidationErrors,
    ViewState,
};
pub use simulator::{run_session, SessionReport, SessionTrace, TraceInterval};
