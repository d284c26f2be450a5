//! SVG rendering of an instance and, optionally, a plan on top of it.

use std::fmt::Write as _;
use std::path::Path;

use crate::geometry::Point2;
use crate::plan::Plan;
use crate::tree::EdgeKind;
use crate::world::Instance;

const SCALE: f64 = 40.0;
const MARGIN: f64 = 1.0;

struct Frame {
    min_x: f64,
    max_y: f64,
}

impl Frame {
    fn x(&self, p: Point2) -> f64 {
        (p.x - self.min_x + MARGIN) * SCALE
    }

    fn y(&self, p: Point2) -> f64 {
        (self.max_y - p.y + MARGIN) * SCALE
    }

    fn points(&self, path: &[Point2]) -> String {
        path.iter()
            .map(|&p| format!("{:.1},{:.1}", self.x(p), self.y(p)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Draws the workspace, grid, start discs (solid), goal circles (dashed) and,
/// with a plan, one numbered group per action holding its transit and
/// transfer paths.
pub fn render_svg(instance: &Instance, plan: Option<&Plan>) -> String {
    let w = &instance.world;
    let ws = w.workspace;
    let staging = w.staging_point();
    let min_y = staging.y - w.object_radius;
    let f = Frame {
        min_x: ws.min.x,
        max_y: ws.max.y,
    };
    let width = (ws.width() + 2.0 * MARGIN) * SCALE;
    let height = (ws.max.y - min_y + 2.0 * MARGIN) * SCALE;
    let r = w.object_radius * SCALE;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(
        s,
        r##"<rect class="workspace" x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="#f4f1ea" stroke="#333" stroke-width="2"/>"##,
        f.x(ws.min),
        f.y(ws.max),
        ws.width() * SCALE,
        ws.height() * SCALE
    );
    // the open side
    let _ = writeln!(
        s,
        r##"<line class="open-side" x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#f4f1ea" stroke-width="3"/>"##,
        f.x(ws.min),
        f.y(ws.min),
        f.x(Point2::new(ws.max.x, ws.min.y)),
        f.y(ws.min)
    );
    let _ = writeln!(
        s,
        r##"<circle class="staging" cx="{:.1}" cy="{:.1}" r="4" fill="#888"/>"##,
        f.x(staging),
        f.y(staging)
    );
    for p in &instance.grid.positions {
        let _ = writeln!(
            s,
            r##"<circle class="grid" cx="{:.1}" cy="{:.1}" r="2" fill="#aaa"/>"##,
            f.x(*p),
            f.y(*p)
        );
    }
    for o in instance.object_ids() {
        let p = instance.position(&instance.start, o);
        let _ = writeln!(
            s,
            r##"<circle class="start" data-object="{name}" cx="{:.1}" cy="{:.1}" r="{r:.1}" fill="#6a9fd4" stroke="#245"/>"##,
            f.x(p),
            f.y(p),
            name = instance.name(o)
        );
        let _ = writeln!(
            s,
            r##"<text class="label" x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"##,
            f.x(p),
            f.y(p) + 4.0,
            instance.name(o)
        );
    }
    for o in instance.object_ids() {
        let p = instance.position(&instance.goal, o);
        let _ = writeln!(
            s,
            r##"<circle class="goal" data-object="{name}" cx="{:.1}" cy="{:.1}" r="{r:.1}" fill="none" stroke="#c33" stroke-dasharray="6,4"/>"##,
            f.x(p),
            f.y(p),
            name = instance.name(o)
        );
    }
    if let Some(plan) = plan {
        for (i, a) in plan.actions.iter().enumerate() {
            let colour = match a.kind {
                EdgeKind::GoalMove => "#2a7",
                EdgeKind::BufferMove => "#d80",
            };
            let _ = writeln!(
                s,
                r#"<g class="action" data-step="{}" data-object="{}">"#,
                i + 1,
                instance.name(a.object)
            );
            let _ = writeln!(
                s,
                r##"  <polyline class="transit" points="{}" fill="none" stroke="#999" stroke-dasharray="3,3"/>"##,
                f.points(&a.transit)
            );
            let _ = writeln!(
                s,
                r#"  <polyline class="transfer" points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
                f.points(&a.transfer)
            );
            let to = instance.point(a.object, a.to);
            let _ = writeln!(
                s,
                r#"  <text class="step" x="{:.1}" y="{:.1}" font-size="11" fill="{colour}">{}</text>"#,
                f.x(to) + r * 0.7,
                f.y(to) - r * 0.7,
                i + 1
            );
            let _ = writeln!(s, "</g>");
        }
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(instance: &Instance, plan: Option<&Plan>, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, render_svg(instance, plan))
}
