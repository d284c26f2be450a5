//! Rearrangement plans and an independent replay check.
//!
//! The replay re-derives every collision fact from the geometry primitives
//! rather than trusting the planner that produced the paths.

use thiserror::Error;

use crate::geometry::{capsule_disc_intersect, Capsule, Disc, Point2};
use crate::manipulation::{generate_grasps, transfer_radius, Phase};
use crate::tree::{BranchNotVerified, BranchStep, EdgeKind, NodeId, SearchTree};
use crate::world::{Arrangement, Instance, ObjectId, Placement, WorldError};

/// Tolerance for path endpoints matching object positions.
const ENDPOINT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub object: ObjectId,
    pub from: Placement,
    pub to: Placement,
    pub kind: EdgeKind,
    pub transit: Vec<Point2>,
    pub transfer: Vec<Point2>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Plan {
    pub actions: Vec<Action>,
}

impl Plan {
    pub fn from_steps(steps: &[BranchStep]) -> Self {
        Plan {
            actions: steps
                .iter()
                .map(|s| Action {
                    object: s.object,
                    from: s.parent.get(s.object),
                    to: s.child.get(s.object),
                    kind: s.kind,
                    transit: s.paths.transit.waypoints.clone(),
                    transfer: s.paths.transfer.waypoints.clone(),
                })
                .collect(),
        }
    }

    /// The verified branch from the root of `tree` to `node`.
    pub fn from_tree(tree: &SearchTree, node: NodeId) -> Result<Self, BranchNotVerified> {
        Ok(Self::from_steps(&tree.trace_back(node)?))
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn buffers_used(&self) -> usize {
        self.actions
            .iter()
            .filter(|a| a.kind == EdgeKind::BufferMove)
            .count()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("action {step}: object is not where the plan says it starts")]
    WrongSource { step: usize },
    #[error("action {step}: invalid placement: {source}")]
    Placement { step: usize, source: WorldError },
    #[error("action {step}: no collision-free grasp at the {site} site")]
    NoGrasp { step: usize, site: &'static str },
    #[error("action {step}: {phase:?} path does not start and end at the expected points")]
    Endpoints { step: usize, phase: Phase },
    #[error("action {step}: {phase:?} segment {segment} collides or leaves the workspace")]
    Collision {
        step: usize,
        phase: Phase,
        segment: usize,
    },
    #[error("action {step}: a monotone plan moves each object once, directly to its goal")]
    NotMonotone { step: usize },
    #[error("action {step}: kind does not match the destination")]
    WrongKind { step: usize },
    #[error("the plan ends away from the goal arrangement")]
    GoalNotReached,
}

fn disc_blocks_capsule(c: &Capsule, obstacles: &[Disc]) -> bool {
    obstacles.iter().any(|d| capsule_disc_intersect(c, d))
}

fn grasp_exists(instance: &Instance, at: Point2, obstacles: &[Disc]) -> bool {
    generate_grasps(&instance.world, at).iter().any(|g| {
        !g.hits_walls(&instance.world)
            && g.footprint
                .iter()
                .all(|s| !disc_blocks_capsule(&s.as_capsule(), obstacles))
    })
}

fn path_ok(
    instance: &Instance,
    path: &[Point2],
    radius: f64,
    obstacles: &[Disc],
) -> Result<(), Option<usize>> {
    let ws = &instance.world.workspace;
    let floor = instance.world.staging_point().y;
    let inside = |p: &Point2| {
        p.x >= ws.min.x + radius
            && p.x <= ws.max.x - radius
            && p.y >= floor
            && p.y <= ws.max.y - radius
    };
    if path.is_empty() {
        return Err(None);
    }
    for (i, w) in path.windows(2).enumerate() {
        if !inside(&w[0])
            || !inside(&w[1])
            || disc_blocks_capsule(&Capsule::new(w[0], w[1], radius), obstacles)
        {
            return Err(Some(i));
        }
    }
    if path.len() == 1
        && (!inside(&path[0])
            || disc_blocks_capsule(&Capsule::new(path[0], path[0], radius), obstacles))
    {
        return Err(Some(0));
    }
    Ok(())
}

fn ends_at(path: &[Point2], a: Point2, b: Point2) -> bool {
    match (path.first(), path.last()) {
        (Some(f), Some(l)) => f.distance(a) <= ENDPOINT_EPS && l.distance(b) <= ENDPOINT_EPS,
        _ => false,
    }
}

/// Replays `plan` from the instance start. Returns the final arrangement,
/// which must equal the goal.
pub fn validate_plan(
    instance: &Instance,
    plan: &Plan,
    monotone: bool,
) -> Result<Arrangement, ReplayError> {
    let world = &instance.world;
    let mut alpha = instance.start.clone();
    let mut moved = vec![false; instance.n()];
    for (step, a) in plan.actions.iter().enumerate() {
        let o = a.object;
        if alpha.get(o) != a.from {
            return Err(ReplayError::WrongSource { step });
        }
        let is_goal = a.to == instance.goal.get(o);
        if (a.kind == EdgeKind::GoalMove) != is_goal {
            return Err(ReplayError::WrongKind { step });
        }
        if monotone && (moved[o.0] || !is_goal) {
            return Err(ReplayError::NotMonotone { step });
        }
        moved[o.0] = true;

        let from = instance.point(o, a.from);
        let to = instance.point(o, a.to);
        let obstacles = instance.obstacle_discs(&alpha, Some(o));
        if !grasp_exists(instance, from, &obstacles) {
            return Err(ReplayError::NoGrasp { step, site: "pick" });
        }
        if !grasp_exists(instance, to, &obstacles) {
            return Err(ReplayError::NoGrasp {
                step,
                site: "place",
            });
        }
        if !ends_at(&a.transit, world.staging_point(), from) {
            return Err(ReplayError::Endpoints {
                step,
                phase: Phase::Transit,
            });
        }
        if !ends_at(&a.transfer, from, to) {
            return Err(ReplayError::Endpoints {
                step,
                phase: Phase::Transfer,
            });
        }
        path_ok(instance, &a.transit, world.gripper_radius, &obstacles).map_err(|s| {
            ReplayError::Collision {
                step,
                phase: Phase::Transit,
                segment: s.unwrap_or(0),
            }
        })?;
        path_ok(instance, &a.transfer, transfer_radius(instance), &obstacles).map_err(|s| {
            ReplayError::Collision {
                step,
                phase: Phase::Transfer,
                segment: s.unwrap_or(0),
            }
        })?;
        alpha = instance
            .apply_move(&alpha, o, a.to)
            .map_err(|source| ReplayError::Placement { step, source })?;
    }
    if alpha != instance.goal {
        return Err(ReplayError::GoalNotReached);
    }
    Ok(alpha)
}
