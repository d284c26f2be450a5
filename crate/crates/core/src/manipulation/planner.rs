//! Gripper-center path search: a deterministic lattice A* (the default) and a
//! seeded PRM*-style roadmap behind the same interface.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{capsule_disc_intersect, disc_disc_intersect, Capsule, Disc, Point2};
use crate::world::WorldSpec;

/// Static obstacles and the box a moving disc's center must stay in.
#[derive(Debug, Clone)]
pub struct Scene<'a> {
    pub world: &'a WorldSpec,
    pub obstacles: &'a [Disc],
}

impl Scene<'_> {
    /// Center bounds for a body of `radius`: side and back walls are closed,
    /// the open side extends down to the staging row.
    pub fn center_bounds(&self, radius: f64) -> (Point2, Point2) {
        let ws = &self.world.workspace;
        let lo = Point2::new(ws.min.x + radius, self.world.staging_point().y);
        let hi = Point2::new(ws.max.x - radius, ws.max.y - radius);
        (lo, hi)
    }

    pub fn in_bounds(&self, p: Point2, radius: f64) -> bool {
        let (lo, hi) = self.center_bounds(radius);
        p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y
    }

    pub fn point_free(&self, p: Point2, radius: f64, checks: &mut u64) -> bool {
        *checks += 1;
        let body = Disc::new(p, radius);
        self.in_bounds(p, radius)
            && self
                .obstacles
                .iter()
                .all(|d| !disc_disc_intersect(&body, d))
    }

    /// Sweep test; the bounds are convex so checking both endpoints suffices.
    pub fn segment_free(&self, a: Point2, b: Point2, radius: f64, checks: &mut u64) -> bool {
        *checks += 1;
        let sweep = Capsule::new(a, b, radius);
        self.in_bounds(a, radius)
            && self.in_bounds(b, radius)
            && self
                .obstacles
                .iter()
                .all(|d| !capsule_disc_intersect(&sweep, d))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    Grid,
    Roadmap,
}

/// Planner selection and budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub planner: PlannerKind,
    pub grid_factor: u32,
    pub roadmap_samples: usize,
    pub roadmap_seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            planner: PlannerKind::Grid,
            grid_factor: 4,
            roadmap_samples: 2000,
            roadmap_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub enum PathSearch {
    Grid(GridSearch),
    Roadmap(RoadmapSearch),
}

impl PathSearch {
    pub fn new(world: &WorldSpec, config: &PlannerConfig) -> Self {
        match config.planner {
            PlannerKind::Grid => PathSearch::Grid(GridSearch::new(world, config.grid_factor)),
            PlannerKind::Roadmap => PathSearch::Roadmap(RoadmapSearch::new(
                world,
                config.roadmap_samples,
                config.roadmap_seed,
            )),
        }
    }

    pub fn find_path(
        &self,
        scene: &Scene,
        radius: f64,
        from: Point2,
        to: Point2,
        checks: &mut u64,
    ) -> Option<Vec<Point2>> {
        if !scene.point_free(from, radius, checks) || !scene.point_free(to, radius, checks) {
            return None;
        }
        if scene.segment_free(from, to, radius, checks) {
            return Some(vec![from, to]);
        }
        match self {
            PathSearch::Grid(g) => g.search(scene, radius, from, to, checks),
            PathSearch::Roadmap(r) => r.search(scene, radius, from, to, checks),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Frontier {
    f: f64,
    g: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Generic A* over an implicit graph. Node `goal` is the target; `neighbors`
/// yields (node, point) pairs, edges are collision-checked lazily on
/// relaxation.
fn astar<N>(
    points: &dyn Fn(usize) -> Point2,
    start: usize,
    goal: usize,
    mut neighbors: N,
    mut edge_free: impl FnMut(Point2, Point2) -> bool,
) -> Option<Vec<usize>>
where
    N: FnMut(usize, &mut Vec<usize>),
{
    let goal_pt = points(goal);
    let mut best: HashMap<usize, f64> = HashMap::new();
    let mut parent: HashMap<usize, usize> = HashMap::new();
    let mut open = BinaryHeap::new();
    best.insert(start, 0.0);
    open.push(Frontier {
        f: points(start).distance(goal_pt),
        g: 0.0,
        node: start,
    });
    let mut scratch = Vec::new();
    while let Some(Frontier { g, node, .. }) = open.pop() {
        if node == goal {
            let mut path = vec![goal];
            let mut cur = goal;
            while let Some(&p) = parent.get(&cur) {
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Some(path);
        }
        if g > best.get(&node).copied().unwrap_or(f64::INFINITY) {
            continue;
        }
        let here = points(node);
        scratch.clear();
        neighbors(node, &mut scratch);
        for &next in &scratch {
            let there = points(next);
            let cand = g + here.distance(there);
            if cand >= best.get(&next).copied().unwrap_or(f64::INFINITY) {
                continue;
            }
            if !edge_free(here, there) {
                continue;
            }
            best.insert(next, cand);
            parent.insert(next, node);
            open.push(Frontier {
                f: cand + there.distance(goal_pt),
                g: cand,
                node: next,
            });
        }
    }
    None
}

/// 8-connected lattice over the gripper-center region at `resolution / factor`.
#[derive(Debug, Clone)]
pub struct GridSearch {
    origin: Point2,
    step: f64,
    nx: usize,
    ny: usize,
}

impl GridSearch {
    pub fn new(world: &WorldSpec, factor: u32) -> Self {
        let ws = &world.workspace;
        let step = world.grid_resolution / factor.max(1) as f64;
        let origin = Point2::new(ws.min.x, world.staging_point().y);
        let nx = ((ws.max.x - ws.min.x) / step).floor() as usize + 1;
        let ny = ((ws.max.y - origin.y) / step).floor() as usize + 1;
        GridSearch {
            origin,
            step,
            nx,
            ny,
        }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    fn point(&self, id: usize) -> Point2 {
        let (i, j) = (id % self.nx, id / self.nx);
        self.origin
            .offset(i as f64 * self.step, j as f64 * self.step)
    }

    /// Lattice cells around `p` that an off-lattice endpoint may link to.
    fn anchors(&self, p: Point2) -> Vec<usize> {
        let ci = ((p.x - self.origin.x) / self.step).floor() as i64;
        let cj = ((p.y - self.origin.y) / self.step).floor() as i64;
        let mut out = Vec::new();
        for dj in -1..=2 {
            for di in -1..=2 {
                let (i, j) = (ci + di, cj + dj);
                if i >= 0 && j >= 0 && (i as usize) < self.nx && (j as usize) < self.ny {
                    out.push(j as usize * self.nx + i as usize);
                }
            }
        }
        out
    }

    fn search(
        &self,
        scene: &Scene,
        radius: f64,
        from: Point2,
        to: Point2,
        checks: &mut u64,
    ) -> Option<Vec<Point2>> {
        let cells = self.nx * self.ny;
        let (start, goal) = (cells, cells + 1);
        let start_links = self.anchors(from);
        let goal_links = self.anchors(to);
        let mut free: Vec<Option<bool>> = vec![None; cells];
        let checks_cell = std::cell::Cell::new(0u64);

        let points = |id: usize| match id {
            id if id == start => from,
            id if id == goal => to,
            id => self.point(id),
        };
        let nx = self.nx as i64;
        let ny = self.ny as i64;
        let neighbors = |id: usize, out: &mut Vec<usize>| {
            let mut push_cell = |c: usize, out: &mut Vec<usize>| {
                let ok = *free[c].get_or_insert_with(|| {
                    let mut local = 0;
                    let r = scene.point_free(self.point(c), radius, &mut local);
                    checks_cell.set(checks_cell.get() + local);
                    r
                });
                if ok {
                    out.push(c);
                }
            };
            if id == start {
                for &c in &start_links {
                    push_cell(c, out);
                }
                return;
            }
            let (i, j) = ((id % self.nx) as i64, (id / self.nx) as i64);
            for dj in -1..=1 {
                for di in -1..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (a, b) = (i + di, j + dj);
                    if a >= 0 && b >= 0 && a < nx && b < ny {
                        push_cell((b * nx + a) as usize, out);
                    }
                }
            }
            if goal_links.contains(&id) {
                out.push(goal);
            }
        };
        let edge_free = |a: Point2, b: Point2| {
            let mut local = 0;
            let r = scene.segment_free(a, b, radius, &mut local);
            checks_cell.set(checks_cell.get() + local);
            r
        };
        let ids = astar(&points, start, goal, neighbors, edge_free);
        *checks += checks_cell.get();
        ids.map(|ids| ids.into_iter().map(points).collect())
    }
}

/// Sampling roadmap with an r-disc connection radius shrinking as
/// `sqrt(log N / N)`. Samples are fixed per seed; obstacles filter them per
/// query.
#[derive(Debug, Clone)]
pub struct RoadmapSearch {
    samples: Vec<Point2>,
    radius: f64,
    bucket: f64,
    origin: Point2,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl RoadmapSearch {
    pub fn new(world: &WorldSpec, samples: usize, seed: u64) -> Self {
        let ws = &world.workspace;
        let origin = Point2::new(ws.min.x, world.staging_point().y);
        let (w, h) = (ws.max.x - origin.x, ws.max.y - origin.y);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Point2> = (0..samples)
            .map(|_| origin.offset(rng.gen_range(0.0..=w), rng.gen_range(0.0..=h)))
            .collect();
        let n = samples.max(2) as f64;
        let gamma = 2.0 * (1.5f64).sqrt() * (w * h / std::f64::consts::PI).sqrt();
        let radius = gamma * (n.ln() / n).sqrt();
        let bucket = radius.max(1e-9);
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in pts.iter().enumerate() {
            buckets
                .entry(Self::key(origin, bucket, *p))
                .or_default()
                .push(i);
        }
        RoadmapSearch {
            samples: pts,
            radius,
            bucket,
            origin,
            buckets,
        }
    }

    pub fn connection_radius(&self) -> f64 {
        self.radius
    }

    fn key(origin: Point2, bucket: f64, p: Point2) -> (i64, i64) {
        (
            ((p.x - origin.x) / bucket).floor() as i64,
            ((p.y - origin.y) / bucket).floor() as i64,
        )
    }

    fn near(&self, p: Point2, out: &mut Vec<usize>) {
        let (ki, kj) = Self::key(self.origin, self.bucket, p);
        let r2 = self.radius * self.radius;
        for dj in -1..=1 {
            for di in -1..=1 {
                if let Some(ids) = self.buckets.get(&(ki + di, kj + dj)) {
                    out.extend(
                        ids.iter()
                            .copied()
                            .filter(|&i| self.samples[i].distance_sq(p) <= r2),
                    );
                }
            }
        }
    }

    fn search(
        &self,
        scene: &Scene,
        radius: f64,
        from: Point2,
        to: Point2,
        checks: &mut u64,
    ) -> Option<Vec<Point2>> {
        let n = self.samples.len();
        let (start, goal) = (n, n + 1);
        let mut free: Vec<Option<bool>> = vec![None; n];
        let checks_cell = std::cell::Cell::new(0u64);
        let points = |id: usize| match id {
            id if id == start => from,
            id if id == goal => to,
            id => self.samples[id],
        };
        let r2 = self.radius * self.radius;
        let neighbors = |id: usize, out: &mut Vec<usize>| {
            let here = points(id);
            let mut cand = Vec::new();
            self.near(here, &mut cand);
            for c in cand {
                if c == id {
                    continue;
                }
                let ok = *free[c].get_or_insert_with(|| {
                    let mut local = 0;
                    let r = scene.point_free(self.samples[c], radius, &mut local);
                    checks_cell.set(checks_cell.get() + local);
                    r
                });
                if ok {
                    out.push(c);
                }
            }
            if id != goal && here.distance_sq(to) <= r2 {
                out.push(goal);
            }
        };
        let edge_free = |a: Point2, b: Point2| {
            let mut local = 0;
            let r = scene.segment_free(a, b, radius, &mut local);
            checks_cell.set(checks_cell.get() + local);
            r
        };
        let ids = astar(&points, start, goal, neighbors, edge_free);
        *checks += checks_cell.get();
        ids.map(|ids| ids.into_iter().map(points).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn replay_ok(scene: &Scene, path: &[Point2], radius: f64) -> bool {
        let mut c = 0;
        path.windows(2)
            .all(|w| scene.segment_free(w[0], w[1], radius, &mut c))
    }

    #[test]
    fn straight_line_in_empty_scene() {
        let world = WorldSpec::default();
        let scene = Scene {
            world: &world,
            obstacles: &[],
        };
        let search = PathSearch::new(&world, &PlannerConfig::default());
        let mut checks = 0;
        let path = search
            .find_path(
                &scene,
                0.5,
                world.staging_point(),
                Point2::new(7.0, 8.0),
                &mut checks,
            )
            .unwrap();
        assert_eq!(path.len(), 2);
    }

    #[test]
    fn detours_around_a_wall_of_discs() {
        let world = WorldSpec::default();
        let wall: Vec<Disc> = (0..4)
            .map(|i| Disc::new(Point2::new(5.0 + 2.0 * i as f64, 4.0), 1.0))
            .collect();
        let scene = Scene {
            world: &world,
            obstacles: &wall,
        };
        for config in [
            PlannerConfig::default(),
            PlannerConfig {
                planner: PlannerKind::Roadmap,
                ..PlannerConfig::default()
            },
        ] {
            let search = PathSearch::new(&world, &config);
            let mut checks = 0;
            let from = Point2::new(8.0, 1.5);
            let to = Point2::new(8.0, 7.0);
            let path = search
                .find_path(&scene, 0.5, from, to, &mut checks)
                .expect("path");
            assert!(path.len() > 2);
            assert!(replay_ok(&scene, &path, 0.5));
            assert_eq!(path[0], from);
            assert_eq!(*path.last().unwrap(), to);
        }
    }

    #[test]
    fn enclosed_target_is_unreachable() {
        let world = WorldSpec::default();
        let c = Point2::new(7.2, 5.0);
        let ring: Vec<Disc> = (0..6)
            .map(|i| {
                let a = i as f64 * std::f64::consts::PI / 3.0;
                Disc::new(c.offset(2.0 * a.cos(), 2.0 * a.sin()), 1.0)
            })
            .collect();
        let scene = Scene {
            world: &world,
            obstacles: &ring,
        };
        let search = PathSearch::new(&world, &PlannerConfig::default());
        let mut checks = 0;
        assert!(search
            .find_path(&scene, 0.5, world.staging_point(), c, &mut checks)
            .is_none());
    }

    #[test]
    fn grid_search_is_deterministic() {
        let world = WorldSpec::default();
        let wall: Vec<Disc> = (0..5)
            .map(|i| Disc::new(Point2::new(3.0 + 2.0 * i as f64, 4.0), 1.0))
            .collect();
        let scene = Scene {
            world: &world,
            obstacles: &wall,
        };
        let search = PathSearch::new(&world, &PlannerConfig::default());
        let run = || {
            let mut checks = 0;
            let p = search.find_path(
                &scene,
                1.0,
                Point2::new(7.0, 1.2),
                Point2::new(7.0, 7.5),
                &mut checks,
            );
            (p, checks)
        };
        assert_eq!(run(), run());
    }
}
