//! Lazy task planning for prehensile object rearrangement in a workspace the
//! gripper can only enter from one side.

pub mod constraints;
pub mod fixtures;
pub mod geometry;
pub mod global;
pub mod harness;
pub mod io;
pub mod manipulation;
pub mod monotone;
pub mod plan;
pub mod tree;
pub mod world;

pub use constraints::{
    obtain_constraints, obtain_task_constraints, ConstraintOptions, ConstraintStore,
};
pub use geometry::{Point2, Rect};
pub use global::{perts_solve, ConcatPolicy, PertsConfig, PertsOutcome};
pub use harness::{
    classify_instance, run_suite, Classification, InstanceFilter, RunRecord, SuiteSpec,
};
pub use io::{load_instance, load_solution, save_instance, SolutionFile};
pub use manipulation::{MotionPlanner, PlannerConfig};
pub use monotone::{solve, SolveOutcome, SolverConfig, SolverKind};
pub use plan::{validate_plan, Action, Plan};
pub use world::{sample_instance, Arrangement, Instance, ObjectId, Placement, WorldSpec};
