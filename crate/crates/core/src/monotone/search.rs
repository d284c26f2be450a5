use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    motion_delta, Deadline, ExpansionOrder, SearchEvent, SolveOutcome, SolveStats, SolverConfig,
    SolverKind,
};
use crate::constraints::{obtain_task_constraints, ConstraintStore};
use crate::manipulation::EdgeVerifier;
use crate::tree::{EdgeKind, NodeId, SearchTree};
use crate::world::{Arrangement, Instance, ObjectId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Backtracking,
    Backjumping(NodeId),
}

struct Search<'s, 'a> {
    instance: &'a Instance,
    verifier: &'s mut EdgeVerifier<'a>,
    tree: SearchTree,
    store: Option<ConstraintStore>,
    deadline: Deadline,
    rng: Option<ChaCha8Rng>,
    mode: Mode,
    goal_node: Option<NodeId>,
    rejections: u64,
    timed_out: bool,
    events: Option<Vec<SearchEvent>>,
}

/// Runs one monotone solver on `start -> instance.goal`, charging planner
/// calls to `verifier`.
pub fn solve_local<'a>(
    instance: &'a Instance,
    verifier: &mut EdgeVerifier<'a>,
    start: &Arrangement,
    config: &SolverConfig,
    deadline: Deadline,
) -> SolveOutcome {
    let started = Instant::now();
    let motion_before = verifier.stats();
    let mut overflow = false;
    let store = if config.kind.uses_constraints() {
        match obtain_task_constraints(instance, start, config.constraints) {
            Ok(store) => Some(store),
            Err(_) => {
                overflow = true;
                None
            }
        }
    } else {
        None
    };
    let mut search = Search {
        instance,
        verifier,
        tree: SearchTree::with_dedup(start.clone(), config.kind.dedup()),
        store,
        deadline,
        rng: match config.order {
            ExpansionOrder::Ascending => None,
            ExpansionOrder::Shuffled(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        },
        mode: Mode::Backtracking,
        goal_node: None,
        rejections: 0,
        timed_out: false,
        events: config.trace.then(Vec::new),
    };

    let root = search.tree.root();
    let solved = if *start == instance.goal {
        search.goal_node = Some(root);
        true
    } else if config.kind == SolverKind::Lrs {
        search.grow_lazy(root)
    } else {
        search.grow_eager(root)
    };

    let tree = search.tree;
    let stats = SolveStats {
        motion: motion_delta(search.verifier.stats(), motion_before),
        nodes: tree.counters.created,
        trimmed_nodes: tree.counters.trimmed,
        verified_edges: tree.counters.verified_edges,
        failed_verifications: tree.counters.failed_verifications,
        forward_check_rejections: search.rejections,
        total_time: started.elapsed(),
        timed_out: search.timed_out,
        constraint_overflow: overflow,
    };
    SolveOutcome {
        kind: config.kind,
        tree,
        solved,
        goal_node: search.goal_node,
        stats,
        events: search.events.unwrap_or_default(),
    }
}

impl Search<'_, '_> {
    fn log(&mut self, event: SearchEvent) {
        if let Some(events) = self.events.as_mut() {
            events.push(event);
        }
    }

    fn candidates(&mut self, arrangement: &Arrangement) -> Vec<ObjectId> {
        let mut out: Vec<ObjectId> = self
            .instance
            .object_ids()
            .filter(|&o| !self.instance.at_goal(arrangement, o))
            .collect();
        if let Some(rng) = self.rng.as_mut() {
            out.shuffle(rng);
        }
        out
    }

    fn check_time(&mut self) -> bool {
        if self.deadline.expired() {
            self.timed_out = true;
        }
        self.timed_out
    }

    /// Forward checking and placement validity; the child arrangement if the
    /// move may be added to the tree.
    fn admissible(&mut self, arrangement: &Arrangement, o: ObjectId) -> Option<Arrangement> {
        if let Some(store) = &self.store {
            if !store.forward_checking(o, arrangement) {
                self.rejections += 1;
                return None;
            }
        }
        let child = self
            .instance
            .apply_move(arrangement, o, self.instance.goal.get(o))
            .ok()?;
        if self.tree.dedup() && self.tree.find(&child).is_some() {
            return None;
        }
        Some(child)
    }

    /// Depth-first search verifying every edge as it is created.
    fn grow_eager(&mut self, current: NodeId) -> bool {
        self.log(SearchEvent::Expand(current));
        let arrangement = self.tree.arrangement(current).clone();
        for o in self.candidates(&arrangement) {
            if self.check_time() {
                return false;
            }
            let Some(child) = self.admissible(&arrangement, o) else {
                continue;
            };
            let Some(paths) = self
                .verifier
                .verify_move(&arrangement, o, self.instance.goal.get(o))
            else {
                self.tree.counters.failed_verifications += 1;
                continue;
            };
            self.tree.counters.verified_edges += 1;
            let is_goal = child == self.instance.goal;
            let id = self
                .tree
                .add_child(current, child, o, EdgeKind::GoalMove, Some(paths));
            if is_goal {
                self.goal_node = Some(id);
                return true;
            }
            if self.grow_eager(id) {
                return true;
            }
        }
        false
    }

    /// Lazy depth-first search: edges are added unverified and checked only
    /// once a branch reaches the goal.
    fn grow_lazy(&mut self, current: NodeId) -> bool {
        self.log(SearchEvent::Expand(current));
        let arrangement = self.tree.arrangement(current).clone();
        for o in self.candidates(&arrangement) {
            if self.check_time() {
                return false;
            }
            let Some(child) = self.admissible(&arrangement, o) else {
                continue;
            };
            let is_goal = child == self.instance.goal;
            let id = self
                .tree
                .add_child(current, child, o, EdgeKind::GoalMove, None);
            if is_goal {
                let check = self.tree.verify_branch(id, self.verifier);
                if check.success {
                    self.goal_node = Some(id);
                    return true;
                }
                self.log(SearchEvent::Trim {
                    failed: check.removed[0],
                    removed: check.removed,
                });
                self.mode = Mode::Backjumping(check.last);
            } else if self.grow_lazy(id) {
                return true;
            }
            if self.timed_out {
                return false;
            }
            if let Mode::Backjumping(last) = self.mode {
                if last != current {
                    return false;
                }
                self.mode = Mode::Backtracking;
                self.log(SearchEvent::Resume(current));
            }
        }
        false
    }
}
