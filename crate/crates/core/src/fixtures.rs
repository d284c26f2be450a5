//! Hand-built scenes and a scriptable oracle, shared by tests, benchmarks and
//! the acceptance suite.

use std::sync::Mutex;

use crate::geometry::{Point2, Rect};
use crate::manipulation::{EdgePaths, MotionPlanner, PickPlaceOracle, PickPlaceQuery};
use crate::world::{Instance, WorldSpec};

fn names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("o{i}")).collect()
}

/// `n` objects in a wide front row, far enough apart that no grasp or path
/// ever interacts with another object. Every ordering is feasible.
pub fn spread_instance(n: usize) -> Instance {
    let world = WorldSpec {
        workspace: Rect::new(Point2::new(0.0, 0.0), Point2::new(9.6 * n as f64, 7.2)),
        ..WorldSpec::default()
    };
    let starts = (0..n)
        .map(|i| Point2::new(2.2 + 9.6 * i as f64, 1.0))
        .collect();
    let goals = (0..n)
        .map(|i| Point2::new(5.8 + 9.6 * i as f64, 1.0))
        .collect();
    Instance::new(world, names(n), starts, goals).expect("valid spread instance")
}

/// Single-grasp (straight-in) variant of the default shelf.
pub fn straight_in_world() -> WorldSpec {
    WorldSpec {
        grasp_count: 1,
        ..WorldSpec::default()
    }
}

/// Two objects whose starts sit right in front of each other's goals: neither
/// can go first, but parking either one in a buffer frees both.
/// With `extra_free`, a third object with an unobstructed move is added.
pub fn swap_instance(extra_free: bool) -> Instance {
    let mut starts = vec![Point2::new(10.6, 3.4), Point2::new(3.4, 3.4)];
    let mut goals = vec![Point2::new(3.4, 5.8), Point2::new(10.6, 5.8)];
    if extra_free {
        starts.push(Point2::new(7.0, 8.2));
        goals.push(Point2::new(5.8, 8.2));
    }
    let n = starts.len();
    Instance::new(straight_in_world(), names(n), starts, goals).expect("valid swap instance")
}

/// Delegates to the grid planner unless `rule` rejects the query. Every
/// query that reaches the oracle is logged.
pub struct ScriptedOracle<F> {
    inner: MotionPlanner,
    rule: F,
    log: Mutex<Vec<PickPlaceQuery>>,
}

impl<F: Fn(&PickPlaceQuery) -> bool + Sync> ScriptedOracle<F> {
    /// `rule(q) == false` forces the query to fail.
    pub fn new(instance: &Instance, rule: F) -> Self {
        ScriptedOracle {
            inner: MotionPlanner::grid(instance),
            rule,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> Vec<PickPlaceQuery> {
        self.log.lock().unwrap().clone()
    }
}

impl<F: Fn(&PickPlaceQuery) -> bool + Sync> PickPlaceOracle for ScriptedOracle<F> {
    fn plan(
        &self,
        instance: &Instance,
        query: &PickPlaceQuery,
        checks: &mut u64,
    ) -> Option<EdgePaths> {
        self.log.lock().unwrap().push(query.clone());
        if !(self.rule)(query) {
            return None;
        }
        self.inner.plan(instance, query, checks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manipulation::plan_pick_and_place;
    use crate::world::ObjectId;

    #[test]
    fn spread_moves_are_all_free() {
        let inst = spread_instance(4);
        for o in inst.object_ids() {
            let q = PickPlaceQuery {
                arrangement: inst.start.clone(),
                object: o,
                place_at: inst.goal.get(o),
            };
            assert!(plan_pick_and_place(&inst, &q).is_some());
        }
    }

    #[test]
    fn swap_blocks_both_first_moves() {
        let inst = swap_instance(false);
        for o in inst.object_ids() {
            let q = PickPlaceQuery {
                arrangement: inst.start.clone(),
                object: o,
                place_at: inst.goal.get(o),
            };
            assert!(plan_pick_and_place(&inst, &q).is_none());
        }
        let q = PickPlaceQuery {
            arrangement: inst.start.clone(),
            object: ObjectId(0),
            place_at: crate::world::Placement::Grid(
                inst.grid.index_of(Point2::new(13.0, 8.2)).unwrap() as u32,
            ),
        };
        assert!(plan_pick_and_place(&inst, &q).is_some());
    }
}
