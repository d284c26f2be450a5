use std::collections::HashSet;
use std::time::Duration;

use super::*;
use crate::fixtures::{spread_instance, straight_in_world, ScriptedOracle};
use crate::geometry::Point2;
use crate::manipulation::{plan_pick_and_place, MotionPlanner, PickPlaceQuery};
use crate::plan::{validate_plan, Plan};
use crate::world::{sample_instance, ObjectId, WorldSpec};

const BUDGET: Duration = Duration::from_secs(20);

fn run(instance: &Instance, kind: SolverKind) -> SolveOutcome {
    let planner = MotionPlanner::grid(instance);
    solve(
        instance,
        &planner,
        &SolverConfig::new(kind).with_budget(BUDGET),
    )
}

fn traced(kind: SolverKind) -> SolverConfig {
    SolverConfig {
        trace: true,
        ..SolverConfig::new(kind).with_budget(BUDGET)
    }
}

/// Tries every ordering of the objects, fully motion planning each.
fn exhaustive_monotone(instance: &Instance) -> bool {
    fn permute(instance: &Instance, alpha: &Arrangement, left: &mut Vec<ObjectId>) -> bool {
        if left.is_empty() {
            return true;
        }
        for i in 0..left.len() {
            let o = left[i];
            let Ok(next) = instance.apply_move(alpha, o, instance.goal.get(o)) else {
                continue;
            };
            let q = PickPlaceQuery {
                arrangement: alpha.clone(),
                object: o,
                place_at: instance.goal.get(o),
            };
            if plan_pick_and_place(instance, &q).is_none() {
                continue;
            }
            left.remove(i);
            let ok = permute(instance, &next, left);
            left.insert(i, o);
            if ok {
                return true;
            }
        }
        false
    }
    let mut left: Vec<ObjectId> = instance
        .object_ids()
        .filter(|&o| !instance.at_goal(&instance.start, o))
        .collect();
    permute(instance, &instance.start, &mut left)
}

#[test]
fn single_free_object() {
    let inst = spread_instance(1);
    for kind in SolverKind::ALL {
        let out = run(&inst, kind);
        assert!(out.solved, "{kind}");
        assert_eq!(out.stats.motion.planner_calls, 1, "{kind}");
        let plan = Plan::from_tree(&out.tree, out.goal_node.unwrap()).unwrap();
        validate_plan(&inst, &plan, true).unwrap();
    }
}

#[test]
fn free_instances_stay_within_bookkeeping_bounds() {
    let inst = spread_instance(3);
    let mrs = run(&inst, SolverKind::Mrs);
    assert!(mrs.solved);
    assert!(mrs.stats.motion.planner_calls < mrs.stats.nodes);

    let dp = solve(
        &inst,
        &MotionPlanner::grid(&inst),
        &traced(SolverKind::Dfsdp),
    );
    let expanded: HashSet<_> = dp
        .events
        .iter()
        .filter_map(|e| match e {
            SearchEvent::Expand(n) => Some(dp.tree.arrangement(*n).clone()),
            _ => None,
        })
        .collect();
    assert!(expanded.len() <= 8);
}

#[test]
fn lrs_trivial_and_blocked() {
    let inst = spread_instance(2);
    let planner = MotionPlanner::grid(&inst);
    let out = lrs(&inst, &inst.goal, &planner, BUDGET);
    assert!(out.solved);
    assert_eq!(out.stats.motion.planner_calls, 0);

    // goal grasp permanently obstructed by static geometry: the oracle says no
    let never = ScriptedOracle::new(&inst, |_: &PickPlaceQuery| false);
    let single = spread_instance(1);
    let out = lrs(&single, &single.start, &never, BUDGET);
    assert!(!out.solved);
    assert_eq!(out.tree.len(), 1);
}

#[test]
fn all_moves_constraint_blocked_at_root() {
    // each object's start blocks the other's only (straight-in) goal grasp
    let inst = crate::fixtures::swap_instance(false);
    let out = solve(&inst, &MotionPlanner::grid(&inst), &traced(SolverKind::Lrs));
    assert!(!out.solved);
    assert_eq!(out.tree.len(), 1);
    assert_eq!(out.stats.motion.planner_calls, 0);
    assert_eq!(out.stats.forward_check_rejections, 2);
}

#[test]
fn lazy_branch_reaches_goal_before_any_verification() {
    let inst = spread_instance(2);
    let oracle = ScriptedOracle::new(&inst, |_: &PickPlaceQuery| true);
    let out = solve(&inst, &oracle, &traced(SolverKind::Lrs));
    assert!(out.solved);
    assert_eq!(
        out.events,
        vec![
            SearchEvent::Expand(NodeId(0)),
            SearchEvent::Expand(NodeId(1))
        ]
    );
    assert_eq!(out.tree.len(), 3);
    let calls = oracle.calls();
    assert_eq!(calls.len(), 2);
    // verification happens root-first along the finished branch
    assert_eq!(calls[0].arrangement, inst.start);
}

/// Three unconstrained objects A, B, C; the oracle refuses to move B once A is
/// at its goal. The first lazy branch R-A-AB-ABC fails at its second edge.
#[test]
fn backjump_trims_and_resumes_at_last_accessible_node() {
    let inst = spread_instance(3);
    let a_done = inst.start.with(ObjectId(0), inst.goal.get(ObjectId(0)));
    let fail_from = a_done.clone();
    let oracle = ScriptedOracle::new(&inst, move |q: &PickPlaceQuery| {
        !(q.arrangement == fail_from && q.object == ObjectId(1))
    });
    let out = solve(&inst, &oracle, &traced(SolverKind::Lrs));
    assert!(out.solved);

    let (r, a, ab, abc) = (NodeId(0), NodeId(1), NodeId(2), NodeId(3));
    assert_eq!(out.tree.arrangement(a), &a_done);
    let trim = out.events.iter().find_map(|e| match e {
        SearchEvent::Trim { failed, removed } => Some((*failed, removed.clone())),
        _ => None,
    });
    assert_eq!(trim, Some((ab, vec![ab, abc])));
    let after_trim: Vec<_> = out
        .events
        .iter()
        .skip_while(|e| !matches!(e, SearchEvent::Trim { .. }))
        .collect();
    assert_eq!(after_trim[1], &SearchEvent::Resume(a));

    // final tree: R, A, AC, F
    let live: Vec<_> = out.tree.node_ids().collect();
    assert_eq!(live.len(), 4);
    assert_eq!(&live[..2], &[r, a]);
    let ac = a_done.with(ObjectId(2), inst.goal.get(ObjectId(2)));
    assert_eq!(out.tree.arrangement(live[2]), &ac);
    assert_eq!(out.tree.arrangement(live[3]), &inst.goal);
    assert_eq!(out.stats.trimmed_nodes, 2);
    out.tree.check_well_formed().unwrap();
    let plan = Plan::from_tree(&out.tree, out.goal_node.unwrap()).unwrap();
    let order: Vec<_> = plan.actions.iter().map(|a| a.object.0).collect();
    assert_eq!(order, vec![0, 2, 1]);
}

/// Moving the last object fails whenever the first is already placed, so
/// every ordering starting with o1 dead-ends at the shared state {o1,o2,o3}.
#[test]
fn dfsdp_expands_shared_dead_end_once() {
    let inst = spread_instance(4);
    let goal0 = inst.goal.get(ObjectId(0));
    let rule = move |q: &PickPlaceQuery| {
        !(q.object == ObjectId(3) && q.arrangement.get(ObjectId(0)) == goal0)
    };
    let shared = inst
        .object_ids()
        .take(3)
        .fold(inst.start.clone(), |a, o| a.with(o, inst.goal.get(o)));
    let count = |out: &SolveOutcome| {
        out.events
            .iter()
            .filter(|e| matches!(e, SearchEvent::Expand(n) if out.tree.get(*n).is_some_and(|t| t.arrangement == shared)))
            .count()
    };
    let oracle = ScriptedOracle::new(&inst, rule);
    let dp = solve(&inst, &oracle, &traced(SolverKind::Dfsdp));
    let oracle = ScriptedOracle::new(&inst, rule);
    let mrs = solve(&inst, &oracle, &traced(SolverKind::Mrs));
    assert!(dp.solved && mrs.solved);
    assert_eq!(count(&dp), 1);
    assert!(count(&mrs) > 1);
    assert!(dp.stats.motion.planner_calls < mrs.stats.motion.planner_calls);
}

#[test]
fn cirs_never_plans_a_constrained_move() {
    // o1's only goal grasp is blocked while o2 sits at its start
    let world = straight_in_world();
    let inst = Instance::new(
        world,
        vec!["o1".into(), "o2".into()],
        vec![Point2::new(1.5, 8.0), Point2::new(8.2, 2.9)],
        vec![Point2::new(8.2, 5.8), Point2::new(13.0, 8.2)],
    )
    .unwrap();
    let oracle = ScriptedOracle::new(&inst, |_: &PickPlaceQuery| true);
    let out = solve(&inst, &oracle, &SolverConfig::new(SolverKind::Cirs));
    assert!(out.solved);
    assert!(out.stats.forward_check_rejections >= 1);
    assert!(oracle
        .calls()
        .iter()
        .all(|q| !(q.object == ObjectId(0) && q.arrangement == inst.start)));
}

#[test]
fn solvers_agree_with_exhaustive_orderings() {
    let world = WorldSpec::default();
    let mut verdicts = [0usize; 2];
    for seed in 0..40u64 {
        let n = 2 + (seed % 3) as usize;
        let inst = sample_instance(&world, n, seed).unwrap();
        let truth = exhaustive_monotone(&inst);
        verdicts[truth as usize] += 1;
        let mut calls = Vec::new();
        for kind in SolverKind::ALL {
            let out = run(&inst, kind);
            assert_eq!(out.solved, truth, "seed {seed} {kind}");
            out.tree.check_well_formed().unwrap();
            if out.solved {
                let plan = Plan::from_tree(&out.tree, out.goal_node.unwrap()).unwrap();
                validate_plan(&inst, &plan, true)
                    .unwrap_or_else(|e| panic!("seed {seed} {kind}: {e}"));
            }
            if kind == SolverKind::Lrs {
                let s = out.stats;
                assert_eq!(
                    s.motion.planner_calls,
                    s.verified_edges + s.failed_verifications
                );
                assert_eq!(s.motion.cache_hits, 0);
            }
            calls.push(out.stats.motion.planner_calls);
        }
        if truth {
            assert!(calls[3] <= calls[2], "seed {seed}: {calls:?}");
        }
    }
    assert!(verdicts[0] > 0 && verdicts[1] > 0, "{verdicts:?}");
}

#[test]
fn shuffled_order_is_reproducible_and_complete() {
    let inst = sample_instance(&WorldSpec::default(), 4, 9).unwrap();
    let truth = exhaustive_monotone(&inst);
    let planner = MotionPlanner::grid(&inst);
    for seed in 0..5 {
        let config = SolverConfig {
            order: ExpansionOrder::Shuffled(seed),
            ..SolverConfig::new(SolverKind::Lrs)
        };
        let a = solve(&inst, &planner, &config);
        let b = solve(&inst, &planner, &config);
        assert_eq!(a.solved, truth);
        assert_eq!(a.stats.motion.planner_calls, b.stats.motion.planner_calls);
    }
}

#[test]
fn solver_names_round_trip() {
    for kind in SolverKind::ALL {
        assert_eq!(kind.as_str().parse::<SolverKind>(), Ok(kind));
    }
    assert!("bogus".parse::<SolverKind>().is_err());
}
