//! Workspace description, the candidate position grid, arrangements and
//! rearrangement instances.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{disc_disc_intersect, disc_in_rect, Disc, Point2, Rect};

/// Start-point rejection rounds allowed before sampling gives up.
pub const MAX_REJECTION_ROUNDS: usize = 10_000;

/// Coordinates closer than this are treated as the same grid point.
const SNAP_EPS: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("invalid world: {0}")]
    InvalidWorld(String),
    #[error("no candidate position fits in the workspace")]
    EmptyGrid,
    #[error("could not place {n} objects after {rounds} rejection rounds")]
    SamplingExhausted { n: usize, rounds: usize },
    #[error("requested {requested} objects but the grid only has {available} positions")]
    TooManyObjects { requested: usize, available: usize },
    #[error("placing {object} collides with {other}")]
    PlacementCollision { object: String, other: String },
    #[error("{object} at ({x}, {y}) leaves the workspace")]
    OutOfWorkspace { object: String, x: f64, y: f64 },
    #[error("goal of {object} at ({x}, {y}) is not a grid position")]
    OffGridGoal { object: String, x: f64, y: f64 },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
}

/// Side of the workspace the gripper enters from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpenSide {
    /// The `y = workspace.min.y` edge.
    #[default]
    Front,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WorldFile", into = "WorldFile")]
pub struct WorldSpec {
    pub workspace: Rect,
    pub open_side: OpenSide,
    pub object_radius: f64,
    pub gripper_radius: f64,
    pub wrist_length: f64,
    pub grid_resolution: f64,
    pub grasp_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct WorldFile {
    workspace: [f64; 4],
    #[serde(default)]
    open_side: OpenSide,
    object_radius: f64,
    gripper_radius: f64,
    wrist_length: f64,
    grid_resolution: f64,
    grasp_count: usize,
}

impl TryFrom<WorldFile> for WorldSpec {
    type Error = WorldError;

    fn try_from(f: WorldFile) -> Result<Self, Self::Error> {
        let [x0, y0, x1, y1] = f.workspace;
        let world = WorldSpec {
            workspace: Rect::new(Point2::new(x0, y0), Point2::new(x1, y1)),
            open_side: f.open_side,
            object_radius: f.object_radius,
            gripper_radius: f.gripper_radius,
            wrist_length: f.wrist_length,
            grid_resolution: f.grid_resolution,
            grasp_count: f.grasp_count,
        };
        world.validate()?;
        Ok(world)
    }
}

impl From<WorldSpec> for WorldFile {
    fn from(w: WorldSpec) -> Self {
        WorldFile {
            workspace: [
                w.workspace.min.x,
                w.workspace.min.y,
                w.workspace.max.x,
                w.workspace.max.y,
            ],
            open_side: w.open_side,
            object_radius: w.object_radius,
            gripper_radius: w.gripper_radius,
            wrist_length: w.wrist_length,
            grid_resolution: w.grid_resolution,
            grasp_count: w.grasp_count,
        }
    }
}

impl Default for WorldSpec {
    /// A 6 x 4 shelf of unit-radius objects.
    fn default() -> Self {
        WorldSpec {
            workspace: Rect::new(Point2::new(0.0, 0.0), Point2::new(14.4, 9.6)),
            open_side: OpenSide::Front,
            object_radius: 1.0,
            gripper_radius: 0.5,
            wrist_length: 5.0,
            grid_resolution: 2.4,
            grasp_count: 3,
        }
    }
}

impl WorldSpec {
    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |msg: &str| Err(WorldError::InvalidWorld(msg.to_string()));
        if !self.workspace.is_valid() {
            return bad("workspace must have finite min <= max corners");
        }
        if !(self.object_radius > 0.0 && self.object_radius.is_finite()) {
            return bad("object_radius must be positive");
        }
        if !(self.gripper_radius > 0.0 && self.gripper_radius.is_finite()) {
            return bad("gripper_radius must be positive");
        }
        if !(self.wrist_length >= 0.0 && self.wrist_length.is_finite()) {
            return bad("wrist_length must be non-negative");
        }
        if !(self.grid_resolution > 0.0 && self.grid_resolution.is_finite()) {
            return bad("grid_resolution must be positive");
        }
        if self.grasp_count == 0 {
            return bad("grasp_count must be at least 1");
        }
        Ok(())
    }

    /// Where the gripper waits between actions: centered, one object
    /// diameter outside the open side.
    pub fn staging_point(&self) -> Point2 {
        let ws = &self.workspace;
        Point2::new(
            (ws.min.x + ws.max.x) / 2.0,
            ws.min.y - 2.0 * self.object_radius,
        )
    }

    pub fn object_disc(&self, at: Point2) -> Disc {
        Disc::new(at, self.object_radius)
    }

    pub fn contains_object(&self, at: Point2) -> bool {
        at.is_finite() && disc_in_rect(&self.object_disc(at), &self.workspace)
    }
}

/// The lattice of candidate goal and buffer positions, row-major from the
/// front-left corner.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionGrid {
    pub positions: Vec<Point2>,
    pub resolution: f64,
    pub columns: usize,
    pub rows: usize,
}

impl PositionGrid {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn get(&self, idx: usize) -> Option<Point2> {
        self.positions.get(idx).copied()
    }

    /// Index of the grid position at `p`, if any.
    pub fn index_of(&self, p: Point2) -> Option<usize> {
        self.positions.iter().position(|q| q.distance(p) < SNAP_EPS)
    }
}

pub fn build_grid(world: &WorldSpec) -> Result<PositionGrid, WorldError> {
    world.validate()?;
    let ws = &world.workspace;
    let r = world.object_radius;
    let step = world.grid_resolution;
    // a count along one axis; tolerate float drift at the far edge
    let fit = |lo: f64, hi: f64| -> usize {
        let span = hi - lo - 2.0 * r;
        if span < -SNAP_EPS {
            0
        } else {
            ((span.max(0.0) + SNAP_EPS) / step).floor() as usize + 1
        }
    };
    let columns = fit(ws.min.x, ws.max.x);
    let rows = fit(ws.min.y, ws.max.y);
    if columns == 0 || rows == 0 {
        return Err(WorldError::EmptyGrid);
    }
    let positions = (0..rows)
        .flat_map(|j| {
            (0..columns).map(move |i| {
                Point2::new(
                    ws.min.x + r + i as f64 * step,
                    ws.min.y + r + j as f64 * step,
                )
            })
        })
        .collect();
    Ok(PositionGrid {
        positions,
        resolution: step,
        columns,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObjectId(pub usize);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Canonical placement token. Off-grid start points are interned per object,
/// so arrangements compare and hash exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Placement {
    /// The object's own (off-grid) start point.
    Start,
    Grid(u32),
}

/// One placement per object, indexed by [`ObjectId`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Arrangement(Vec<Placement>);

impl Arrangement {
    pub fn new(placements: Vec<Placement>) -> Self {
        Self(placements)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, o: ObjectId) -> Placement {
        self.0[o.0]
    }

    pub fn placements(&self) -> &[Placement] {
        &self.0
    }

    pub fn with(&self, o: ObjectId, p: Placement) -> Arrangement {
        let mut next = self.0.clone();
        next[o.0] = p;
        Arrangement(next)
    }

    /// Objects whose placement differs between `self` and `other`.
    pub fn diff(&self, other: &Arrangement) -> Vec<ObjectId> {
        self.0
            .iter()
            .zip(&other.0)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| ObjectId(i))
            .collect()
    }
}

/// A rearrangement problem: objects, the grid, and start and goal arrangements.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub world: WorldSpec,
    pub grid: PositionGrid,
    pub objects: Vec<String>,
    pub start_points: Vec<Point2>,
    pub start: Arrangement,
    pub goal: Arrangement,
}

impl Instance {
    /// Builds an instance from raw coordinates. Start points that coincide
    /// with a grid position are interned as that grid position; goal points
    /// must be grid positions.
    pub fn new(
        world: WorldSpec,
        objects: Vec<String>,
        start_points: Vec<Point2>,
        goal_points: Vec<Point2>,
    ) -> Result<Self, WorldError> {
        let grid = build_grid(&world)?;
        if objects.len() != start_points.len() || objects.len() != goal_points.len() {
            return Err(WorldError::InvalidInstance(
                "objects, start and goal must have the same length".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &objects {
            if !seen.insert(name.as_str()) {
                return Err(WorldError::InvalidInstance(format!(
                    "duplicate object name {name}"
                )));
            }
        }
        let start = Arrangement(
            start_points
                .iter()
                .map(|&p| {
                    grid.index_of(p)
                        .map_or(Placement::Start, |i| Placement::Grid(i as u32))
                })
                .collect(),
        );
        let goal = goal_points
            .iter()
            .zip(&objects)
            .map(|(&p, name)| {
                grid.index_of(p)
                    .map(|i| Placement::Grid(i as u32))
                    .ok_or_else(|| WorldError::OffGridGoal {
                        object: name.clone(),
                        x: p.x,
                        y: p.y,
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let instance = Instance {
            world,
            grid,
            objects,
            start_points,
            start,
            goal: Arrangement(goal),
        };
        instance.check_arrangement(&instance.start)?;
        instance.check_arrangement(&instance.goal)?;
        Ok(instance)
    }

    pub fn n(&self) -> usize {
        self.objects.len()
    }

    pub fn object_ids(&self) -> impl Iterator<Item = ObjectId> + '_ {
        (0..self.objects.len()).map(ObjectId)
    }

    pub fn name(&self, o: ObjectId) -> &str {
        &self.objects[o.0]
    }

    pub fn object_by_name(&self, name: &str) -> Option<ObjectId> {
        self.objects.iter().position(|n| n == name).map(ObjectId)
    }

    pub fn point(&self, o: ObjectId, p: Placement) -> Point2 {
        match p {
            Placement::Start => self.start_points[o.0],
            Placement::Grid(i) => self.grid.positions[i as usize],
        }
    }

    pub fn position(&self, arrangement: &Arrangement, o: ObjectId) -> Point2 {
        self.point(o, arrangement.get(o))
    }

    /// Object discs of every object except `skip`.
    pub fn obstacle_discs(&self, arrangement: &Arrangement, skip: Option<ObjectId>) -> Vec<Disc> {
        self.object_ids()
            .filter(|&o| Some(o) != skip)
            .map(|o| self.world.object_disc(self.position(arrangement, o)))
            .collect()
    }

    /// Interns a raw point for `o`: its own start point, or a grid position.
    pub fn locate(&self, o: ObjectId, p: Point2) -> Option<Placement> {
        if self.start_points[o.0].distance(p) < SNAP_EPS && self.start.get(o) == Placement::Start {
            return Some(Placement::Start);
        }
        self.grid.index_of(p).map(|i| Placement::Grid(i as u32))
    }

    /// First object (other than `o`) whose disc overlaps `o` placed at `p`.
    pub fn placement_conflict(
        &self,
        arrangement: &Arrangement,
        o: ObjectId,
        p: Point2,
    ) -> Option<ObjectId> {
        let disc = self.world.object_disc(p);
        self.object_ids().filter(|&j| j != o).find(|&j| {
            disc_disc_intersect(
                &disc,
                &self.world.object_disc(self.position(arrangement, j)),
            )
        })
    }

    /// Persistent move: returns a new arrangement with `o` at `to`.
    pub fn apply_move(
        &self,
        arrangement: &Arrangement,
        o: ObjectId,
        to: Placement,
    ) -> Result<Arrangement, WorldError> {
        let p = self.point(o, to);
        if !self.world.contains_object(p) {
            return Err(WorldError::OutOfWorkspace {
                object: self.name(o).to_string(),
                x: p.x,
                y: p.y,
            });
        }
        if let Some(other) = self.placement_conflict(arrangement, o, p) {
            return Err(WorldError::PlacementCollision {
                object: self.name(o).to_string(),
                other: self.name(other).to_string(),
            });
        }
        Ok(arrangement.with(o, to))
    }

    /// Point-valued variant of [`Instance::apply_move`]; `p` must be `o`'s
    /// start point or a grid position.
    pub fn apply_move_to_point(
        &self,
        arrangement: &Arrangement,
        o: ObjectId,
        p: Point2,
    ) -> Result<Arrangement, WorldError> {
        if !self.world.contains_object(p) {
            return Err(WorldError::OutOfWorkspace {
                object: self.name(o).to_string(),
                x: p.x,
                y: p.y,
            });
        }
        let to = self.locate(o, p).ok_or_else(|| {
            WorldError::InvalidInstance(format!(
                "({}, {}) is neither a start nor a grid position",
                p.x, p.y
            ))
        })?;
        self.apply_move(arrangement, o, to)
    }

    pub fn check_arrangement(&self, arrangement: &Arrangement) -> Result<(), WorldError> {
        if arrangement.len() != self.n() {
            return Err(WorldError::InvalidInstance(
                "arrangement size mismatch".into(),
            ));
        }
        for o in self.object_ids() {
            let p = self.position(arrangement, o);
            if !self.world.contains_object(p) {
                return Err(WorldError::OutOfWorkspace {
                    object: self.name(o).to_string(),
                    x: p.x,
                    y: p.y,
                });
            }
            if let Some(other) = self.placement_conflict(arrangement, o, p) {
                return Err(WorldError::PlacementCollision {
                    object: self.name(o).to_string(),
                    other: self.name(other).to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn at_goal(&self, arrangement: &Arrangement, o: ObjectId) -> bool {
        arrangement.get(o) == self.goal.get(o)
    }
}

/// Samples an instance: continuous collision-free starts, goals a random
/// subset of the grid under a random bijection.
pub fn sample_instance(world: &WorldSpec, n: usize, seed: u64) -> Result<Instance, WorldError> {
    let grid = build_grid(world)?;
    if n > grid.len() {
        return Err(WorldError::TooManyObjects {
            requested: n,
            available: grid.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ws = &world.workspace;
    let r = world.object_radius;
    let clearance_sq = (2.0 * r) * (2.0 * r);

    let mut starts: Vec<Point2> = Vec::with_capacity(n);
    let mut rounds = 0;
    while starts.len() < n {
        if rounds >= MAX_REJECTION_ROUNDS {
            return Err(WorldError::SamplingExhausted { n, rounds });
        }
        rounds += 1;
        let p = Point2::new(
            sample_span(&mut rng, ws.min.x + r, ws.max.x - r),
            sample_span(&mut rng, ws.min.y + r, ws.max.y - r),
        );
        if starts.iter().all(|q| q.distance_sq(p) >= clearance_sq) {
            starts.push(p);
        }
    }

    let mut cells: Vec<usize> = (0..grid.len()).collect();
    cells.shuffle(&mut rng);
    let mut goals: Vec<Point2> = Vec::with_capacity(n);
    for idx in cells {
        if goals.len() == n {
            break;
        }
        let p = grid.positions[idx];
        if goals.iter().all(|q| q.distance_sq(p) >= clearance_sq) {
            goals.push(p);
        }
    }
    if goals.len() < n {
        return Err(WorldError::TooManyObjects {
            requested: n,
            available: goals.len(),
        });
    }

    let objects = (1..=n).map(|i| format!("o{i}")).collect();
    Instance::new(world.clone(), objects, starts, goals)
}

fn sample_span(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world(x1: f64, y1: f64, r: f64, step: f64) -> WorldSpec {
        WorldSpec {
            workspace: Rect::new(Point2::new(0.0, 0.0), Point2::new(x1, y1)),
            object_radius: r,
            grid_resolution: step,
            ..WorldSpec::default()
        }
    }

    #[test]
    fn grid_enumeration() {
        let g = build_grid(&world(10.0, 10.0, 1.0, 2.0)).unwrap();
        assert_eq!(g.len(), 25);
        let coords = [1.0, 3.0, 5.0, 7.0, 9.0];
        for (k, p) in g.positions.iter().enumerate() {
            assert_eq!(p.x, coords[k % 5]);
            assert_eq!(p.y, coords[k / 5]);
        }

        let g = build_grid(&world(2.0, 2.0, 1.0, 1.0)).unwrap();
        assert_eq!(g.positions, vec![Point2::new(1.0, 1.0)]);

        assert_eq!(
            build_grid(&world(1.0, 1.0, 1.0, 1.0)),
            Err(WorldError::EmptyGrid)
        );
    }

    #[test]
    fn grid_is_row_major_and_unique() {
        let g = build_grid(&WorldSpec::default()).unwrap();
        for w in g.positions.windows(2) {
            assert!((w[0].y, w[0].x) < (w[1].y, w[1].x));
        }
        for p in &g.positions {
            assert!(WorldSpec::default().contains_object(*p));
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let w = WorldSpec::default();
        assert_eq!(
            sample_instance(&w, 6, 42).unwrap(),
            sample_instance(&w, 6, 42).unwrap()
        );
        assert_ne!(
            sample_instance(&w, 6, 42).unwrap(),
            sample_instance(&w, 6, 43).unwrap()
        );
    }

    #[test]
    fn full_grid_goals_are_a_permutation() {
        let w = world(20.0, 20.0, 1.0, 9.0);
        let inst = sample_instance(&w, 9, 1).unwrap();
        let mut cells: Vec<_> = inst.goal.placements().to_vec();
        cells.sort();
        let expected: Vec<_> = (0..9).map(Placement::Grid).collect();
        assert_eq!(cells, expected);
    }

    #[test]
    fn sampling_exhausts_when_overfull() {
        // six discs only fit in a 6 x 4 box as an exact packing
        let w = world(6.0, 4.0, 1.0, 2.0);
        assert!(matches!(
            sample_instance(&w, 6, 0),
            Err(WorldError::SamplingExhausted { .. })
        ));
        let w = world(4.0, 4.0, 1.0, 2.0);
        assert!(matches!(
            sample_instance(&w, 5, 0),
            Err(WorldError::TooManyObjects { .. })
        ));
    }

    #[test]
    fn sampled_instances_satisfy_invariants() {
        let w = WorldSpec::default();
        for seed in 0..1000 {
            let n = 2 + (seed as usize % 7);
            let inst = sample_instance(&w, n, seed).unwrap();
            inst.check_arrangement(&inst.start).unwrap();
            inst.check_arrangement(&inst.goal).unwrap();
            for o in inst.object_ids() {
                assert!(matches!(inst.goal.get(o), Placement::Grid(_)));
            }
        }
    }

    #[test]
    fn moves_are_persistent() {
        let w = WorldSpec::default();
        let inst = sample_instance(&w, 5, 9).unwrap();
        let before = inst.start.clone();

        let same = inst
            .apply_move(&inst.start, ObjectId(0), inst.start.get(ObjectId(0)))
            .unwrap();
        assert_eq!(same, inst.start);

        let occupied = inst.position(&inst.start, ObjectId(1));
        let err = inst.apply_move_to_point(&inst.start, ObjectId(0), occupied);
        assert!(err.is_err());

        let free = (0..inst.grid.len() as u32)
            .map(Placement::Grid)
            .find(|&p| {
                inst.placement_conflict(&inst.start, ObjectId(2), inst.point(ObjectId(2), p))
                    .is_none()
            })
            .unwrap();
        let moved = inst.apply_move(&inst.start, ObjectId(2), free).unwrap();
        assert_eq!(moved.diff(&inst.start), vec![ObjectId(2)]);
        assert_eq!(inst.start, before);
    }

    #[test]
    fn out_of_workspace_rejected() {
        let w = WorldSpec::default();
        let inst = sample_instance(&w, 2, 1).unwrap();
        let err = inst.apply_move_to_point(&inst.start, ObjectId(0), Point2::new(-5.0, 1.0));
        assert!(matches!(err, Err(WorldError::OutOfWorkspace { .. })));
    }
}
