//! Monotone solvers: every object moves at most once, straight to its goal.
//!
//! * `mrs`   – plain backtracking over orderings, eager verification.
//! * `dfsdp` – backtracking with one expansion per arrangement.
//! * `cirs`  – `dfsdp` plus forward checking against reachability constraints.
//! * `lrs`   – forward checking, lazy edges, branch verification at the goal
//!   and backjumping to the last accessible node on failure.

mod search;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintOptions;
use crate::manipulation::{EdgeVerifier, MotionStats, PickPlaceOracle};
use crate::tree::{NodeId, SearchTree};
use crate::world::{Arrangement, Instance};

pub use search::solve_local;

/// Default monotone wall-clock budget.
pub const DEFAULT_MONOTONE_BUDGET: Duration = Duration::from_secs(100);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Mrs,
    Dfsdp,
    Cirs,
    Lrs,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [
        SolverKind::Mrs,
        SolverKind::Dfsdp,
        SolverKind::Cirs,
        SolverKind::Lrs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Mrs => "mrs",
            SolverKind::Dfsdp => "dfsdp",
            SolverKind::Cirs => "cirs",
            SolverKind::Lrs => "lrs",
        }
    }

    fn dedup(self) -> bool {
        self != SolverKind::Mrs
    }

    fn uses_constraints(self) -> bool {
        matches!(self, SolverKind::Cirs | SolverKind::Lrs)
    }

    /// mRS re-plans everything; the others share an edge cache.
    pub fn caches_edges(self) -> bool {
        self != SolverKind::Mrs
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown solver {s:?} (expected mrs, dfsdp, cirs or lrs)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExpansionOrder {
    /// Ascending object id.
    #[default]
    Ascending,
    /// Shuffled per node with a seeded generator.
    Shuffled(u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub budget: Duration,
    pub order: ExpansionOrder,
    pub constraints: ConstraintOptions,
    /// Record a [`SearchEvent`] log (tests and debugging).
    pub trace: bool,
}

impl SolverConfig {
    pub fn new(kind: SolverKind) -> Self {
        SolverConfig {
            kind,
            budget: DEFAULT_MONOTONE_BUDGET,
            order: ExpansionOrder::Ascending,
            constraints: ConstraintOptions::default(),
            trace: false,
        }
    }

    pub fn with_budget(mut self, budget: Duration) -> Self {
        self.budget = budget;
        self
    }
}

/// Wall-clock limit shared by nested solver calls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Deadline(Option<Instant>);

impl Deadline {
    pub fn after(budget: Duration) -> Self {
        Deadline(Instant::now().checked_add(budget))
    }

    pub fn never() -> Self {
        Deadline(None)
    }

    pub fn expired(&self) -> bool {
        self.0.is_some_and(|t| Instant::now() >= t)
    }
}

/// What happened during a search, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchEvent {
    Expand(NodeId),
    /// An edge failed verification; the listed nodes were removed.
    Trim {
        failed: NodeId,
        removed: Vec<NodeId>,
    },
    /// Backjumping stopped here and sibling expansion continues.
    Resume(NodeId),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SolveStats {
    pub motion: MotionStats,
    pub nodes: u64,
    pub trimmed_nodes: u64,
    pub verified_edges: u64,
    pub failed_verifications: u64,
    pub forward_check_rejections: u64,
    pub total_time: Duration,
    pub timed_out: bool,
    /// Constraint extraction overflowed and the search ran unconstrained.
    pub constraint_overflow: bool,
}

impl SolveStats {
    pub fn other_time(&self) -> Duration {
        self.total_time.saturating_sub(self.motion.verify_time)
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub kind: SolverKind,
    pub tree: SearchTree,
    pub solved: bool,
    /// The goal node; its root branch is fully verified.
    pub goal_node: Option<NodeId>,
    pub stats: SolveStats,
    pub events: Vec<SearchEvent>,
}

impl SolveOutcome {
    pub fn solution_branch(&self) -> Option<Vec<NodeId>> {
        self.goal_node.map(|g| self.tree.branch(g))
    }
}

pub(crate) fn motion_delta(after: MotionStats, before: MotionStats) -> MotionStats {
    MotionStats {
        planner_calls: after.planner_calls - before.planner_calls,
        collision_checks: after.collision_checks - before.collision_checks,
        cache_hits: after.cache_hits - before.cache_hits,
        verify_time: after.verify_time.saturating_sub(before.verify_time),
    }
}

/// Solves `instance.start -> instance.goal` with a fresh verifier.
pub fn solve(
    instance: &Instance,
    oracle: &dyn PickPlaceOracle,
    config: &SolverConfig,
) -> SolveOutcome {
    let mut verifier = if config.kind.caches_edges() {
        EdgeVerifier::new(instance, oracle)
    } else {
        EdgeVerifier::uncached(instance, oracle)
    };
    solve_local(
        instance,
        &mut verifier,
        &instance.start,
        config,
        Deadline::after(config.budget),
    )
}

pub fn solve_mrs(
    instance: &Instance,
    oracle: &dyn PickPlaceOracle,
    budget: Duration,
) -> SolveOutcome {
    solve(
        instance,
        oracle,
        &SolverConfig::new(SolverKind::Mrs).with_budget(budget),
    )
}

pub fn solve_dfsdp(
    instance: &Instance,
    oracle: &dyn PickPlaceOracle,
    budget: Duration,
) -> SolveOutcome {
    solve(
        instance,
        oracle,
        &SolverConfig::new(SolverKind::Dfsdp).with_budget(budget),
    )
}

pub fn solve_cirs(
    instance: &Instance,
    oracle: &dyn PickPlaceOracle,
    budget: Duration,
) -> SolveOutcome {
    solve(
        instance,
        oracle,
        &SolverConfig::new(SolverKind::Cirs).with_budget(budget),
    )
}

/// The lazy solver on the local task `start -> instance.goal`.
pub fn lrs(
    instance: &Instance,
    start: &Arrangement,
    oracle: &dyn PickPlaceOracle,
    budget: Duration,
) -> SolveOutcome {
    let config = SolverConfig::new(SolverKind::Lrs).with_budget(budget);
    let mut verifier = EdgeVerifier::new(instance, oracle);
    solve_local(
        instance,
        &mut verifier,
        start,
        &config,
        Deadline::after(budget),
    )
}

#[cfg(test)]
mod tests;
