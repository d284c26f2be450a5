//! Non-monotone planning by perturbation search: grow a global tree out of
//! local monotone trees, and when they stall, push a random object into a
//! random buffer from a random accessible node and solve again from there.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintOptions;
use crate::geometry::Point2;
use crate::manipulation::{EdgePaths, EdgeVerifier, MotionStats, PickPlaceOracle};
use crate::monotone::{
    motion_delta, solve_local, Deadline, ExpansionOrder, SolveOutcome, SolverConfig, SolverKind,
};
use crate::plan::Plan;
use crate::tree::{EdgeKind, NodeId, SearchTree};
use crate::world::{Arrangement, Instance, ObjectId, Placement};

/// Default non-monotone wall-clock budget.
pub const DEFAULT_GLOBAL_BUDGET: Duration = Duration::from_secs(240);

/// How a returned local tree is merged into the global tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConcatPolicy {
    /// Keep only the already verified part.
    Greedy,
    /// Verify every edge first; drop what fails.
    Conservative,
    /// Keep everything and verify on demand.
    Hybrid,
}

impl ConcatPolicy {
    pub const ALL: [ConcatPolicy; 3] = [
        ConcatPolicy::Greedy,
        ConcatPolicy::Conservative,
        ConcatPolicy::Hybrid,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConcatPolicy::Greedy => "greedy",
            ConcatPolicy::Conservative => "conservative",
            ConcatPolicy::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for ConcatPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConcatPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ConcatPolicy::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                format!("unknown policy {s:?} (expected greedy, conservative or hybrid)")
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PertsConfig {
    pub policy: ConcatPolicy,
    /// Monotone solver used for every local task.
    pub local: SolverKind,
    pub budget: Duration,
    pub max_perturbations: Option<u64>,
    /// Whether objects already at their goal may be perturbed.
    pub perturb_goal_placed: bool,
    pub seed: u64,
    pub constraints: ConstraintOptions,
}

impl PertsConfig {
    pub fn new(policy: ConcatPolicy) -> Self {
        PertsConfig {
            policy,
            local: SolverKind::Lrs,
            budget: DEFAULT_GLOBAL_BUDGET,
            max_perturbations: None,
            perturb_goal_placed: true,
            seed: 0,
            constraints: ConstraintOptions::default(),
        }
    }

    pub fn with_budget(mut self, budget: Duration) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub at: NodeId,
    pub object: ObjectId,
    pub buffer: Point2,
    pub placement: Placement,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PertsStats {
    pub motion: MotionStats,
    pub iterations: u64,
    pub perturbations_attempted: u64,
    pub perturbations_added: u64,
    pub local_solves: u64,
    pub nodes: u64,
    pub trimmed_nodes: u64,
    /// Successful edge verifications, including perturbation moves.
    pub verified_edges: u64,
    pub failed_verifications: u64,
    pub total_time: Duration,
    pub timed_out: bool,
}

impl PertsStats {
    pub fn other_time(&self) -> Duration {
        self.total_time.saturating_sub(self.motion.verify_time)
    }
}

#[derive(Debug, Clone)]
pub struct PertsOutcome {
    pub plan: Option<Plan>,
    pub tree: SearchTree,
    pub goal_node: Option<NodeId>,
    pub stats: PertsStats,
}

impl PertsOutcome {
    pub fn solved(&self) -> bool {
        self.plan.is_some()
    }

    pub fn buffers_used(&self) -> usize {
        self.plan.as_ref().map_or(0, Plan::buffers_used)
    }
}

/// What one iteration of the outer loop did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    /// The selected node turned out inaccessible; these nodes were removed.
    Inaccessible { removed: Vec<NodeId> },
    /// No perturbation could be sampled or motion planned.
    PerturbationFailed,
    /// The perturbed arrangement is already in the tree.
    Duplicate,
    /// A buffer node was added and a local tree grown beneath it.
    Extended { buffer_node: NodeId },
}

/// Uniform over the live nodes of `tree`.
pub fn select_node(tree: &SearchTree, rng: &mut impl Rng) -> NodeId {
    let k = rng.gen_range(0..tree.len());
    tree.node_ids().nth(k).expect("index within live count")
}

/// Grid positions where `o` could be put down at `arrangement`, excluding its
/// current spot and its goal.
pub fn buffer_candidates(
    instance: &Instance,
    arrangement: &Arrangement,
    o: ObjectId,
) -> Vec<Placement> {
    (0..instance.grid.len() as u32)
        .map(Placement::Grid)
        .filter(|&p| p != arrangement.get(o) && p != instance.goal.get(o))
        .filter(|&p| instance.apply_move(arrangement, o, p).is_ok())
        .collect()
}

/// One random (object, buffer) attempt at `at`, motion planned through
/// `verifier`.
pub fn perturb_node(
    instance: &Instance,
    tree: &SearchTree,
    at: NodeId,
    verifier: &mut EdgeVerifier,
    rng: &mut impl Rng,
    perturb_goal_placed: bool,
) -> Option<(Perturbation, Arc<EdgePaths>)> {
    let arrangement = tree.arrangement(at);
    let objects: Vec<ObjectId> = instance
        .object_ids()
        .filter(|&o| perturb_goal_placed || !instance.at_goal(arrangement, o))
        .collect();
    let &object = objects.choose(rng)?;
    let &placement = buffer_candidates(instance, arrangement, object).choose(rng)?;
    let paths = verifier.verify_move(arrangement, object, placement)?;
    let buffer = instance.point(object, placement);
    Some((
        Perturbation {
            at,
            object,
            buffer,
            placement,
        },
        paths,
    ))
}

/// The outer loop as a resumable object, so tests can drive single steps.
pub struct Perts<'a> {
    instance: &'a Instance,
    verifier: EdgeVerifier<'a>,
    tree: SearchTree,
    config: PertsConfig,
    rng: ChaCha8Rng,
    deadline: Deadline,
    started: Instant,
    stats: PertsStats,
}

impl<'a> Perts<'a> {
    pub fn new(
        instance: &'a Instance,
        oracle: &'a dyn PickPlaceOracle,
        config: PertsConfig,
    ) -> Self {
        let mut verifier = EdgeVerifier::new(instance, oracle);
        verifier.set_caching(config.local.caches_edges());
        Perts {
            instance,
            verifier,
            tree: SearchTree::new(instance.start.clone()),
            config,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            deadline: Deadline::after(config.budget),
            started: Instant::now(),
            stats: PertsStats::default(),
        }
    }

    pub fn tree(&self) -> &SearchTree {
        &self.tree
    }

    pub fn stats(&self) -> PertsStats {
        let mut s = self.stats;
        s.motion = self.verifier.stats();
        s.nodes = self.tree.counters.created;
        s.trimmed_nodes = self.tree.counters.trimmed;
        s.total_time = self.started.elapsed();
        s
    }

    /// Solves the local task from the root and merges the result.
    pub fn initialize(&mut self) {
        let root = self.tree.root();
        self.extend_from(root);
    }

    fn local_config(&self) -> SolverConfig {
        SolverConfig {
            kind: self.config.local,
            budget: self.config.budget,
            order: ExpansionOrder::Ascending,
            constraints: self.config.constraints,
            trace: false,
        }
    }

    fn extend_from(&mut self, at: NodeId) {
        let start = self.tree.arrangement(at).clone();
        let config = self.local_config();
        let local = solve_local(
            self.instance,
            &mut self.verifier,
            &start,
            &config,
            self.deadline,
        );
        self.stats.local_solves += 1;
        self.stats.verified_edges += local.stats.verified_edges;
        self.stats.failed_verifications += local.stats.failed_verifications;
        self.concatenate(at, local);
    }

    /// Merges a local tree rooted at the arrangement of `at` per the policy.
    /// Arrangements already in the global tree absorb the local subtree.
    fn concatenate(&mut self, at: NodeId, local: SolveOutcome) {
        let mut local_tree = local.tree;
        if self.config.policy == ConcatPolicy::Conservative {
            self.verify_all(&mut local_tree);
        }
        let keep_unverified = self.config.policy == ConcatPolicy::Hybrid;
        let mut stack = vec![(local_tree.root(), at)];
        while let Some((l, g)) = stack.pop() {
            for &c in local_tree.node(l).children.iter().rev() {
                let child = local_tree.node(c);
                let edge = child.edge.as_ref().expect("non-root");
                if edge.paths.is_none() && !keep_unverified {
                    continue;
                }
                let mapped = match self.tree.find(&child.arrangement) {
                    Some(existing) => existing,
                    None => self.tree.add_child(
                        g,
                        child.arrangement.clone(),
                        edge.object,
                        edge.kind,
                        edge.paths.clone(),
                    ),
                };
                stack.push((c, mapped));
            }
        }
    }

    /// Top-down verification of every unverified edge of a local tree.
    fn verify_all(&mut self, local: &mut SearchTree) {
        let ids: Vec<NodeId> = local.node_ids().collect();
        for id in ids {
            if !local.contains(id) || local.edge_verified(id) {
                continue;
            }
            let node = local.node(id);
            let parent = local.arrangement(node.parent.unwrap()).clone();
            let object = node.edge.as_ref().unwrap().object;
            let to = node.arrangement.get(object);
            match self.verifier.verify_move(&parent, object, to) {
                Some(paths) => {
                    local.mark_verified(id, paths);
                    self.stats.verified_edges += 1;
                }
                None => {
                    local.delete_subtree(id);
                    self.stats.failed_verifications += 1;
                }
            }
        }
    }

    fn verify_branch(&mut self, id: NodeId) -> crate::tree::BranchCheck {
        let before = self.tree.counters;
        let check = self.tree.verify_branch(id, &mut self.verifier);
        self.stats.verified_edges += self.tree.counters.verified_edges - before.verified_edges;
        self.stats.failed_verifications +=
            self.tree.counters.failed_verifications - before.failed_verifications;
        check
    }

    /// If the goal is in the tree, verifies its branch. Returns the goal node
    /// once it is accessible.
    pub fn try_finish(&mut self) -> Option<NodeId> {
        let goal = self.tree.find(&self.instance.goal)?;
        self.verify_branch(goal).success.then_some(goal)
    }

    /// One outer-loop iteration at a chosen node.
    pub fn step_at(&mut self, node: NodeId) -> StepOutcome {
        self.stats.iterations += 1;
        let check = self.verify_branch(node);
        if !check.success {
            return StepOutcome::Inaccessible {
                removed: check.removed,
            };
        }
        self.stats.perturbations_attempted += 1;
        let before = self.verifier.stats();
        let attempt = perturb_node(
            self.instance,
            &self.tree,
            node,
            &mut self.verifier,
            &mut self.rng,
            self.config.perturb_goal_placed,
        );
        let fresh = motion_delta(self.verifier.stats(), before);
        let called = fresh.planner_calls + fresh.cache_hits > 0;
        let Some((p, paths)) = attempt else {
            if called {
                self.stats.failed_verifications += 1;
            }
            return StepOutcome::PerturbationFailed;
        };
        self.stats.verified_edges += 1;
        let arrangement = self.tree.arrangement(node).with(p.object, p.placement);
        if self.tree.find(&arrangement).is_some() {
            return StepOutcome::Duplicate;
        }
        let buffer_node = self.tree.add_child(
            node,
            arrangement,
            p.object,
            EdgeKind::BufferMove,
            Some(paths),
        );
        self.stats.perturbations_added += 1;
        self.extend_from(buffer_node);
        StepOutcome::Extended { buffer_node }
    }

    pub fn select(&mut self) -> NodeId {
        select_node(&self.tree, &mut self.rng)
    }

    fn out_of_budget(&self) -> bool {
        self.deadline.expired()
            || self
                .config
                .max_perturbations
                .is_some_and(|cap| self.stats.perturbations_attempted >= cap)
    }

    pub fn run(mut self) -> PertsOutcome {
        self.initialize();
        let goal = loop {
            if let Some(goal) = self.try_finish() {
                break Some(goal);
            }
            if self.out_of_budget() {
                self.stats.timed_out = self.deadline.expired();
                break None;
            }
            let node = self.select();
            self.step_at(node);
        };
        let plan = goal.map(|g| Plan::from_tree(&self.tree, g).expect("goal branch verified"));
        let stats = self.stats();
        PertsOutcome {
            plan,
            tree: self.tree,
            goal_node: goal,
            stats,
        }
    }
}

/// Runs the perturbation search on `instance.start -> instance.goal`.
pub fn perts_solve(
    instance: &Instance,
    oracle: &dyn PickPlaceOracle,
    config: PertsConfig,
) -> PertsOutcome {
    Perts::new(instance, oracle, config).run()
}
