//! Reachability constraints: "don't move object `o` while clause `C` holds",
//! where `C` is a conjunction of start/goal occupancy literals derived from
//! grasp footprints alone. No motion planning happens here.

use std::collections::BTreeSet;
use std::fmt;

use serde_json::{json, Value};
use thiserror::Error;

use crate::manipulation::{blocked_by, generate_grasps};
use crate::world::{Arrangement, Instance, ObjectId};

/// Default cap on DNF clauses per grasp site.
pub const DEFAULT_CLAUSE_BUDGET: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConstraintError {
    #[error("constraint expansion for {object} exceeded {budget} clauses")]
    DnfBlowup { object: String, budget: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LiteralKind {
    AtStart,
    AtGoal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OccupancyLiteral {
    pub object: ObjectId,
    pub kind: LiteralKind,
}

impl OccupancyLiteral {
    pub fn start(o: ObjectId) -> Self {
        Self {
            object: o,
            kind: LiteralKind::AtStart,
        }
    }

    pub fn goal(o: ObjectId) -> Self {
        Self {
            object: o,
            kind: LiteralKind::AtGoal,
        }
    }
}

impl fmt::Display for OccupancyLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.kind {
            LiteralKind::AtStart => 'S',
            LiteralKind::AtGoal => 'G',
        };
        write!(f, "{tag}{}", self.object.0 + 1)
    }
}

/// Where a clause came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClauseOrigin {
    /// Read directly off grasp footprints: the move is geometrically blocked.
    Direct,
    /// Reciprocal of an all-goal direct clause: the move strands another
    /// object for the rest of a monotone plan.
    Elicited,
}

/// Conjunction of literals. An empty clause is always satisfied (every grasp
/// at the site is blocked by walls).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockClause {
    pub literals: BTreeSet<OccupancyLiteral>,
    pub origin: ClauseOrigin,
}

impl BlockClause {
    pub fn direct(literals: impl IntoIterator<Item = OccupancyLiteral>) -> Self {
        Self {
            literals: literals.into_iter().collect(),
            origin: ClauseOrigin::Direct,
        }
    }

    fn subsumes(&self, other: &BlockClause) -> bool {
        self.literals.is_subset(&other.literals)
    }
}

impl fmt::Display for BlockClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.literals.iter().map(|l| l.to_string()).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintOptions {
    pub clause_budget: usize,
    pub subsumption: bool,
    pub elicit: bool,
}

impl Default for ConstraintOptions {
    fn default() -> Self {
        ConstraintOptions {
            clause_budget: DEFAULT_CLAUSE_BUDGET,
            subsumption: true,
            elicit: true,
        }
    }
}

/// Constraints for one local task `start -> goal`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintStore {
    pub per_object: Vec<Vec<BlockClause>>,
    pub task_start: Arrangement,
    pub task_goal: Arrangement,
}

impl ConstraintStore {
    pub fn empty(task_start: Arrangement, task_goal: Arrangement) -> Self {
        let n = task_start.len();
        ConstraintStore {
            per_object: vec![Vec::new(); n],
            task_start,
            task_goal,
        }
    }

    pub fn clauses(&self, o: ObjectId) -> &[BlockClause] {
        &self.per_object[o.0]
    }

    pub fn clause_count(&self) -> usize {
        self.per_object.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.clause_count() == 0
    }

    pub fn literal_holds(&self, lit: OccupancyLiteral, arrangement: &Arrangement) -> bool {
        let reference = match lit.kind {
            LiteralKind::AtStart => &self.task_start,
            LiteralKind::AtGoal => &self.task_goal,
        };
        arrangement.get(lit.object) == reference.get(lit.object)
    }

    pub fn clause_satisfied(&self, clause: &BlockClause, arrangement: &Arrangement) -> bool {
        clause
            .literals
            .iter()
            .all(|&l| self.literal_holds(l, arrangement))
    }

    /// First clause of `o` that is satisfied at `arrangement`.
    pub fn violated_by(&self, o: ObjectId, arrangement: &Arrangement) -> Option<&BlockClause> {
        self.clauses(o)
            .iter()
            .find(|c| self.clause_satisfied(c, arrangement))
    }

    /// `false` iff moving `o` at `arrangement` violates a stored constraint.
    pub fn forward_checking(&self, o: ObjectId, arrangement: &Arrangement) -> bool {
        self.violated_by(o, arrangement).is_none()
    }

    /// `{"o3": [[["G","o2"],["S","o1"]], ...], ...}`
    pub fn to_json(&self, instance: &Instance) -> Value {
        let mut map = serde_json::Map::new();
        for o in instance.object_ids() {
            let clauses: Vec<Value> = self
                .clauses(o)
                .iter()
                .map(|c| {
                    Value::Array(
                        c.literals
                            .iter()
                            .map(|l| {
                                let tag = if l.kind == LiteralKind::AtStart {
                                    "S"
                                } else {
                                    "G"
                                };
                                json!([tag, instance.name(l.object)])
                            })
                            .collect(),
                    )
                })
                .collect();
            map.insert(instance.name(o).to_string(), Value::Array(clauses));
        }
        Value::Object(map)
    }
}

/// Constraints for the instance's own start arrangement.
pub fn obtain_constraints(instance: &Instance) -> Result<ConstraintStore, ConstraintError> {
    obtain_task_constraints(instance, &instance.start, ConstraintOptions::default())
}

/// Constraints for the local task `task_start -> instance.goal`. Objects in
/// `task_start` are treated as sitting at their starts.
pub fn obtain_task_constraints(
    instance: &Instance,
    task_start: &Arrangement,
    options: ConstraintOptions,
) -> Result<ConstraintStore, ConstraintError> {
    let goal = &instance.goal;
    let mut store = ConstraintStore::empty(task_start.clone(), goal.clone());
    let world = &instance.world;

    for o in instance.object_ids() {
        if task_start.get(o) == goal.get(o) {
            continue;
        }
        // every other object's start and goal position, labelled
        let mut labelled = Vec::with_capacity(2 * instance.n());
        for j in instance.object_ids().filter(|&j| j != o) {
            labelled.push((OccupancyLiteral::goal(j), instance.point(j, goal.get(j))));
            if task_start.get(j) != goal.get(j) {
                labelled.push((
                    OccupancyLiteral::start(j),
                    instance.point(j, task_start.get(j)),
                ));
            }
        }

        let mut clauses = BTreeSet::new();
        for site in [
            instance.point(o, task_start.get(o)),
            instance.point(o, goal.get(o)),
        ] {
            let mut blockers = Vec::new();
            let mut reachable = false;
            for grasp in generate_grasps(world, site) {
                if grasp.hits_walls(world) {
                    continue;
                }
                let b = blocked_by(&grasp, &labelled, world);
                if b.is_empty() {
                    reachable = true;
                    break;
                }
                blockers.push(b);
            }
            if reachable {
                continue;
            }
            let expanded =
                expand_dnf(&blockers, options).ok_or_else(|| ConstraintError::DnfBlowup {
                    object: instance.name(o).to_string(),
                    budget: options.clause_budget,
                })?;
            clauses.extend(expanded.into_iter().map(BlockClause::direct));
        }
        store.per_object[o.0] = clauses.into_iter().collect();
    }

    if options.elicit {
        let mut elicited: Vec<(ObjectId, BlockClause)> = Vec::new();
        for o in instance.object_ids() {
            // elicit from the minimal direct clauses so the result does not
            // depend on whether subsumption pruning is enabled
            let minimal = remove_subsumed(store.clauses(o).to_vec());
            for clause in &minimal {
                let all_goal = clause
                    .literals
                    .iter()
                    .all(|l| l.kind == LiteralKind::AtGoal);
                if clause.literals.is_empty() || !all_goal {
                    continue;
                }
                for c in &clause.literals {
                    let mut lits: BTreeSet<_> = clause
                        .literals
                        .iter()
                        .filter(|l| l.object != c.object)
                        .copied()
                        .collect();
                    lits.insert(OccupancyLiteral::start(o));
                    elicited.push((
                        c.object,
                        BlockClause {
                            literals: lits,
                            origin: ClauseOrigin::Elicited,
                        },
                    ));
                }
            }
        }
        for (c, clause) in elicited {
            if !store.per_object[c.0].contains(&clause) {
                store.per_object[c.0].push(clause);
            }
        }
    }

    for clauses in &mut store.per_object {
        clauses.sort();
        clauses.dedup_by(|a, b| a.literals == b.literals);
        if options.subsumption {
            *clauses = remove_subsumed(std::mem::take(clauses));
        }
    }
    Ok(store)
}

/// AND over grasps of OR over each grasp's blockers, distributed into a set of
/// conjunctions. Contradictory conjunctions (an object both at start and goal)
/// are dropped. `None` if the budget is exceeded.
pub fn expand_dnf(
    blockers: &[Vec<OccupancyLiteral>],
    options: ConstraintOptions,
) -> Option<Vec<BTreeSet<OccupancyLiteral>>> {
    let mut clauses: BTreeSet<BTreeSet<OccupancyLiteral>> = BTreeSet::from([BTreeSet::new()]);
    for alternatives in blockers {
        let mut next = BTreeSet::new();
        for clause in &clauses {
            for &lit in alternatives {
                let contradiction = clause
                    .iter()
                    .any(|l| l.object == lit.object && l.kind != lit.kind);
                if contradiction {
                    continue;
                }
                let mut c = clause.clone();
                c.insert(lit);
                next.insert(c);
                if next.len() > options.clause_budget {
                    return None;
                }
            }
        }
        clauses = next;
        if options.subsumption {
            clauses = minimal_sets(clauses);
        }
    }
    Some(clauses.into_iter().collect())
}

fn minimal_sets(
    sets: BTreeSet<BTreeSet<OccupancyLiteral>>,
) -> BTreeSet<BTreeSet<OccupancyLiteral>> {
    let mut by_size: Vec<_> = sets.into_iter().collect();
    by_size.sort_by_key(|s| s.len());
    let mut kept: Vec<BTreeSet<OccupancyLiteral>> = Vec::new();
    for s in by_size {
        if !kept.iter().any(|k| k.is_subset(&s)) {
            kept.push(s);
        }
    }
    kept.into_iter().collect()
}

/// Drops clauses that are supersets of another clause. Direct clauses win
/// ties so that the geometric reason for a rejection is kept.
fn remove_subsumed(mut clauses: Vec<BlockClause>) -> Vec<BlockClause> {
    clauses.sort_by(|a, b| {
        a.literals
            .len()
            .cmp(&b.literals.len())
            .then(a.origin.cmp(&b.origin))
    });
    let mut kept: Vec<BlockClause> = Vec::new();
    for c in clauses {
        if !kept.iter().any(|k| k.subsumes(&c)) {
            kept.push(c);
        }
    }
    kept.sort();
    kept
}
