use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::geometry::{Capsule, Disc, Point2, Shape};
use crate::world::WorldSpec;

/// A grasp configuration: gripper disc on the object plus the wrist trailing
/// back toward the open side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspPose {
    pub target: Point2,
    /// Approach angle in radians, measured from the inward normal of the
    /// open side; positive angles lean toward +x.
    pub heading: f64,
    pub footprint: Vec<Shape>,
}

impl GraspPose {
    /// Unit vector of the approach direction.
    pub fn approach(&self) -> (f64, f64) {
        (self.heading.sin(), self.heading.cos())
    }

    /// True if any footprint shape crosses a closed wall (left, right, back).
    pub fn hits_walls(&self, world: &WorldSpec) -> bool {
        let ws = &world.workspace;
        self.footprint.iter().any(|s| {
            let c = s.as_capsule();
            [c.a, c.b].iter().any(|p| {
                p.x - c.radius < ws.min.x || p.x + c.radius > ws.max.x || p.y + c.radius > ws.max.y
            })
        })
    }
}

/// The `k` grasp headings, fanned evenly across the half-plane facing the
/// open side.
pub fn grasp_headings(k: usize) -> Vec<f64> {
    (1..=k)
        .map(|i| -FRAC_PI_2 + i as f64 * PI / (k as f64 + 1.0))
        .collect()
}

pub fn generate_grasps(world: &WorldSpec, target: Point2) -> Vec<GraspPose> {
    grasp_headings(world.grasp_count)
        .into_iter()
        .map(|heading| {
            let (dx, dy) = (heading.sin(), heading.cos());
            let wrist_end = target.offset(-dx * world.wrist_length, -dy * world.wrist_length);
            GraspPose {
                target,
                heading,
                footprint: vec![
                    Shape::Disc(Disc::new(target, world.gripper_radius)),
                    Shape::Capsule(Capsule::new(target, wrist_end, world.gripper_radius)),
                ],
            }
        })
        .collect()
}

/// Labels of the positions whose object disc overlaps the grasp footprint.
pub fn blocked_by<L: Clone>(
    grasp: &GraspPose,
    others: &[(L, Point2)],
    world: &WorldSpec,
) -> Vec<L> {
    others
        .iter()
        .filter(|(_, p)| {
            let disc = world.object_disc(*p);
            grasp.footprint.iter().any(|s| s.intersects_disc(&disc))
        })
        .map(|(label, _)| label.clone())
        .collect()
}

/// True if the grasp is usable: inside the walls and clear of every disc.
pub fn grasp_is_free(grasp: &GraspPose, obstacles: &[Disc], world: &WorldSpec) -> bool {
    !grasp.hits_walls(world)
        && obstacles
            .iter()
            .all(|d| grasp.footprint.iter().all(|s| !s.intersects_disc(d)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;

    fn world(k: usize) -> WorldSpec {
        WorldSpec {
            grasp_count: k,
            ..WorldSpec::default()
        }
    }

    #[test]
    fn single_grasp_comes_straight_in() {
        let g = generate_grasps(&world(1), Point2::new(5.0, 5.0));
        assert_eq!(g.len(), 1);
        assert!(g[0].heading.abs() < 1e-12);
        let Shape::Capsule(c) = g[0].footprint[1] else {
            panic!()
        };
        assert!((c.b.x - 5.0).abs() < 1e-12);
        assert!((c.b.y - 0.0).abs() < 1e-12);
    }

    #[test]
    fn fan_is_symmetric() {
        let h = grasp_headings(3);
        assert_eq!(h.len(), 3);
        assert!((h[0] + h[2]).abs() < 1e-12);
        assert!(h[1].abs() < 1e-12);
        assert!((h[2] - PI / 4.0).abs() < 1e-12);
        for k in 1..8 {
            let h = grasp_headings(k);
            for (a, b) in h.iter().zip(h.iter().rev()) {
                assert!((a + b).abs() < 1e-12);
            }
            assert!(h.iter().all(|t| t.abs() < FRAC_PI_2));
        }
    }

    #[test]
    fn back_wall_targets_fit_iff_wrist_fits() {
        let w = world(3);
        let target = Point2::new(7.2, 8.6);
        for g in generate_grasps(&w, target) {
            let expected = g.footprint.iter().all(|s| {
                let c = s.as_capsule();
                let ws: &Rect = &w.workspace;
                [c.a, c.b].iter().all(|p| {
                    p.x - c.radius >= ws.min.x
                        && p.x + c.radius <= ws.max.x
                        && p.y + c.radius <= ws.max.y
                })
            });
            assert_eq!(!g.hits_walls(&w), expected);
        }
        // near the left wall the left-leaning grasp clips the wall
        let g = generate_grasps(&w, Point2::new(1.0, 5.0));
        assert!(g[2].hits_walls(&w));
        assert!(!g[1].hits_walls(&w));
    }

    #[test]
    fn blocking_sets() {
        let w = world(1);
        let g = &generate_grasps(&w, Point2::new(5.0, 6.0))[0];
        assert!(blocked_by::<&str>(g, &[], &w).is_empty());
        let others = [
            ("front", Point2::new(5.0, 3.0)),
            ("side", Point2::new(8.0, 6.0)),
        ];
        assert_eq!(blocked_by(g, &others, &w), vec!["front"]);
    }
}
