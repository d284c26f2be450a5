//! Planar collision primitives.
//!
//! Everything above this layer (placement validity, grasp footprints, the
//! motion planners) reduces to three shapes: discs, capsules and axis-aligned
//! rectangles. Contact is strict: two shapes that merely touch do not collide.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_sq(self, other: Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        Point2::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }

    pub fn offset(self, dx: f64, dy: f64) -> Point2 {
        Point2::new(self.x + dx, self.y + dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: Point2,
    pub radius: f64,
}

impl Disc {
    pub const fn new(center: Point2, radius: f64) -> Self {
        Self { center, radius }
    }
}

/// A disc swept along the segment `a`-`b`. `a == b` is a plain disc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capsule {
    pub a: Point2,
    pub b: Point2,
    pub radius: f64,
}

impl Capsule {
    pub const fn new(a: Point2, b: Point2, radius: f64) -> Self {
        Self { a, b, radius }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point2,
    pub max: Point2,
}

impl Rect {
    pub const fn new(min: Point2, max: Point2) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn is_valid(&self) -> bool {
        self.min.is_finite()
            && self.max.is_finite()
            && self.min.x <= self.max.x
            && self.min.y <= self.max.y
    }
}

/// Either shape a footprint can be made of.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Disc(Disc),
    Capsule(Capsule),
}

impl Shape {
    pub fn intersects_disc(&self, d: &Disc) -> bool {
        match self {
            Shape::Disc(s) => disc_disc_intersect(s, d),
            Shape::Capsule(c) => capsule_disc_intersect(c, d),
        }
    }

    /// The segment endpoints and radius; a disc is a zero-length capsule.
    pub fn as_capsule(&self) -> Capsule {
        match *self {
            Shape::Disc(d) => Capsule::new(d.center, d.center, d.radius),
            Shape::Capsule(c) => c,
        }
    }
}

pub fn disc_disc_intersect(a: &Disc, b: &Disc) -> bool {
    let reach = a.radius + b.radius;
    a.center.distance_sq(b.center) < reach * reach
}

/// Closest point to `p` on the segment `a`-`b`.
pub fn closest_point_on_segment(a: Point2, b: Point2, p: Point2) -> Point2 {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len_sq = dx * dx + dy * dy;
    if len_sq == 0.0 {
        return a;
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len_sq).clamp(0.0, 1.0);
    a.lerp(b, t)
}

pub fn segment_point_distance(a: Point2, b: Point2, p: Point2) -> f64 {
    closest_point_on_segment(a, b, p).distance(p)
}

pub fn capsule_disc_intersect(c: &Capsule, d: &Disc) -> bool {
    let closest = closest_point_on_segment(c.a, c.b, d.center);
    let reach = c.radius + d.radius;
    closest.distance_sq(d.center) < reach * reach
}

/// Boundary contact counts as inside.
pub fn disc_in_rect(d: &Disc, r: &Rect) -> bool {
    d.center.x - d.radius >= r.min.x
        && d.center.x + d.radius <= r.max.x
        && d.center.y - d.radius >= r.min.y
        && d.center.y + d.radius <= r.max.y
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn disc(x: f64, y: f64, r: f64) -> Disc {
        Disc::new(Point2::new(x, y), r)
    }

    #[test]
    fn disc_pairs() {
        assert!(!disc_disc_intersect(
            &disc(0.0, 0.0, 1.0),
            &disc(3.0, 0.0, 1.0)
        ));
        assert!(disc_disc_intersect(
            &disc(0.0, 0.0, 0.3),
            &disc(0.0, 0.0, 2.0)
        ));
        // separation 1.999 < 2
        assert!(disc_disc_intersect(
            &disc(0.0, 0.0, 1.0),
            &disc(1.999, 0.0, 1.0)
        ));
        // tangency is free
        assert!(!disc_disc_intersect(
            &disc(0.0, 0.0, 1.0),
            &disc(2.0, 0.0, 1.0)
        ));
    }

    #[test]
    fn capsule_against_disc() {
        let c = Capsule::new(Point2::new(0.0, 0.0), Point2::new(10.0, 0.0), 1.0);
        assert!(!capsule_disc_intersect(&c, &disc(5.0, 3.0, 1.0)));
        assert!(capsule_disc_intersect(&c, &disc(5.0, 1.5, 1.0)));
        // beyond the end cap
        assert!(!capsule_disc_intersect(&c, &disc(12.5, 0.0, 1.0)));
        assert!(capsule_disc_intersect(&c, &disc(11.5, 0.0, 1.0)));

        let point = Capsule::new(Point2::new(0.0, 0.0), Point2::new(0.0, 0.0), 1.0);
        let d = disc(1.5, 0.0, 1.0);
        assert!(capsule_disc_intersect(&point, &d));
        assert_eq!(
            capsule_disc_intersect(&point, &d),
            disc_disc_intersect(&disc(0.0, 0.0, 1.0), &d)
        );
    }

    #[test]
    fn discs_in_rect() {
        let r = Rect::new(Point2::new(0.0, 0.0), Point2::new(10.0, 10.0));
        assert!(disc_in_rect(&disc(5.0, 5.0, 1.0), &r));
        assert!(!disc_in_rect(&disc(0.5, 5.0, 1.0), &r));
        assert!(disc_in_rect(&disc(1.0, 1.0, 1.0), &r));
    }

    fn coord() -> impl Strategy<Value = f64> {
        -20.0..20.0f64
    }

    fn radius() -> impl Strategy<Value = f64> {
        0.01..5.0f64
    }

    proptest! {
        #[test]
        fn disc_intersection_is_symmetric(ax in coord(), ay in coord(), ar in radius(),
                                          bx in coord(), by in coord(), br in radius()) {
            let a = disc(ax, ay, ar);
            let b = disc(bx, by, br);
            prop_assert_eq!(disc_disc_intersect(&a, &b), disc_disc_intersect(&b, &a));
        }

        #[test]
        fn degenerate_capsule_is_a_disc(ax in coord(), ay in coord(), ar in radius(),
                                        bx in coord(), by in coord(), br in radius()) {
            let p = Point2::new(ax, ay);
            let b = disc(bx, by, br);
            prop_assert_eq!(
                capsule_disc_intersect(&Capsule::new(p, p, ar), &b),
                disc_disc_intersect(&disc(ax, ay, ar), &b)
            );
        }

        #[test]
        fn shrinking_radii_never_creates_contact(ax in coord(), ay in coord(), ar in radius(),
                                                 bx in coord(), by in coord(), br in radius(),
                                                 s1 in 0.0..1.0f64, s2 in 0.0..1.0f64) {
            let a = disc(ax, ay, ar);
            let b = disc(bx, by, br);
            if !disc_disc_intersect(&a, &b) {
                prop_assert!(!disc_disc_intersect(&disc(ax, ay, ar * s1), &disc(bx, by, br * s2)));
            }
        }
    }

    /// Dense sampling along the segment as an independent oracle.
    #[test]
    fn capsule_matches_sampled_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let mut compared = 0;
        for _ in 0..10_000 {
            let a = Point2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
            let b = Point2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
            let cr = rng.gen_range(0.1..2.0);
            let d = disc(
                rng.gen_range(-12.0..12.0),
                rng.gen_range(-12.0..12.0),
                rng.gen_range(0.1..2.0),
            );
            let cap = Capsule::new(a, b, cr);

            // skip near-tangent configurations: sampling cannot resolve them
            let gap = segment_point_distance(a, b, d.center) - (cr + d.radius);
            let spacing = a.distance(b) / 999.0;
            if gap.abs() < 1e-6 || (gap < 0.0 && gap.abs() < spacing * spacing) {
                continue;
            }
            let sampled = (0..1000).any(|i| {
                let p = a.lerp(b, i as f64 / 999.0);
                disc_disc_intersect(&Disc::new(p, cr), &d)
            });
            assert_eq!(
                capsule_disc_intersect(&cap, &d),
                sampled,
                "{cap:?} vs {d:?}"
            );
            compared += 1;
        }
        assert!(compared > 9_000);
    }
}
