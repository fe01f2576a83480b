//! Constrained online convex optimization under local feasibility feedback.
//!
//! A learner plays one action per round against strongly convex, smooth
//! quadratic loss/constraint pairs. After committing, it observes the
//! constraint value at its action, a feasibility window around the action,
//! and gradients at points of its choice; the update is one damped projected
//! gradient step over a region assembled from that feedback. The crate ships
//! the algorithm, the projection toolkit behind it, the feedback oracle, and
//! a benchmark harness that checks the per-round contraction and the
//! path-length bounds on tracking error and constraint violation.

pub mod algorithm;
pub mod benchmark;
pub mod error;
pub mod geometry;
pub mod model;
pub mod optimize;
pub mod oracle;
pub mod point;
pub mod problem_io;

pub use algorithm::{advance, classify_round, AlgorithmState, RoundCase, RoundRecord};
pub use benchmark::{
    check_bounds, compute_metrics, execute_run, generate_sequence, solve_offline,
    theoretical_contraction, BoundReport, ContractionConstants, Metrics, OfflineSolution,
    ProblemSequence, RunLog, RunOutcome, SequenceSpec, StartMode,
};
pub use error::{Error, Result};
pub use geometry::{
    min_over_ball, project_ball, project_intersection, project_sublevel, BallSet, ConvexSet,
    IntersectionSet, ProjectionSettings, Region, SublevelSet,
};
pub use model::{derive_constants, AmbientSet, ConstantsBundle, QuadraticFunction, RoundPair};
pub use optimize::{optimize_step, OptimizeRequest};
pub use oracle::{FnKind, LocalFeasibleSet, QueryKind, QueryRecord, RoundOracle};
pub use point::Point;
pub use problem_io::ProblemDocument;
