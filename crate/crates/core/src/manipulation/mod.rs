//! The abstract gripper: grasp generation, pick-and-place motion planning and
//! the cached edge verifier that every solver funnels its planner calls through.

mod grasp;
mod planner;
mod verify;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use grasp::{blocked_by, generate_grasps, grasp_headings, grasp_is_free, GraspPose};
pub use planner::{GridSearch, PathSearch, PlannerConfig, PlannerKind, RoadmapSearch, Scene};
pub use verify::{EdgeVerifier, MalformedEdge, MotionStats};

use crate::geometry::Point2;
use crate::world::{Arrangement, Instance, ObjectId, Placement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Empty gripper from the staging point to the pick grasp.
    Transit,
    /// Gripper carrying the object from the pick grasp to the place grasp.
    Transfer,
}

/// Gripper-center trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionPath {
    pub waypoints: Vec<Point2>,
    pub carried_object: Option<ObjectId>,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PickPlaceQuery {
    pub arrangement: Arrangement,
    pub object: ObjectId,
    pub place_at: Placement,
}

/// A verified pick-and-place for one tree edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgePaths {
    pub object: ObjectId,
    pub from: Placement,
    pub to: Placement,
    pub pick: GraspPose,
    pub place: GraspPose,
    pub transit: MotionPath,
    pub transfer: MotionPath,
}

/// Anything that can decide a pick-and-place query. The geometric
/// [`MotionPlanner`] is the production oracle; tests substitute scripted ones.
pub trait PickPlaceOracle: Sync {
    fn plan(
        &self,
        instance: &Instance,
        query: &PickPlaceQuery,
        checks: &mut u64,
    ) -> Option<EdgePaths>;
}

/// Radius of the moving body while carrying an object.
pub fn transfer_radius(instance: &Instance) -> f64 {
    instance
        .world
        .gripper_radius
        .max(instance.world.object_radius)
}

#[derive(Debug, Clone)]
pub struct MotionPlanner {
    search: PathSearch,
}

impl MotionPlanner {
    pub fn new(instance: &Instance, config: &PlannerConfig) -> Self {
        MotionPlanner {
            search: PathSearch::new(&instance.world, config),
        }
    }

    pub fn grid(instance: &Instance) -> Self {
        Self::new(instance, &PlannerConfig::default())
    }
}

impl PickPlaceOracle for MotionPlanner {
    fn plan(
        &self,
        instance: &Instance,
        query: &PickPlaceQuery,
        checks: &mut u64,
    ) -> Option<EdgePaths> {
        let world = &instance.world;
        let o = query.object;
        let from = instance.position(&query.arrangement, o);
        let to = instance.point(o, query.place_at);
        let obstacles = instance.obstacle_discs(&query.arrangement, Some(o));

        let pick = first_free_grasp(instance, from, &obstacles, checks)?;
        let place = first_free_grasp(instance, to, &obstacles, checks)?;

        let scene = Scene {
            world,
            obstacles: &obstacles,
        };
        let transit = self.search.find_path(
            &scene,
            world.gripper_radius,
            world.staging_point(),
            from,
            checks,
        )?;
        let transfer =
            self.search
                .find_path(&scene, transfer_radius(instance), from, to, checks)?;
        Some(EdgePaths {
            object: o,
            from: query.arrangement.get(o),
            to: query.place_at,
            pick,
            place,
            transit: MotionPath {
                waypoints: transit,
                carried_object: None,
                phase: Phase::Transit,
            },
            transfer: MotionPath {
                waypoints: transfer,
                carried_object: Some(o),
                phase: Phase::Transfer,
            },
        })
    }
}

fn first_free_grasp(
    instance: &Instance,
    at: Point2,
    obstacles: &[crate::geometry::Disc],
    checks: &mut u64,
) -> Option<GraspPose> {
    generate_grasps(&instance.world, at).into_iter().find(|g| {
        *checks += 1;
        grasp_is_free(g, obstacles, &instance.world)
    })
}

/// Convenience wrapper: plan one move with a fresh grid planner.
pub fn plan_pick_and_place(instance: &Instance, query: &PickPlaceQuery) -> Option<Arc<EdgePaths>> {
    let mut checks = 0;
    MotionPlanner::grid(instance)
        .plan(instance, query, &mut checks)
        .map(Arc::new)
}
