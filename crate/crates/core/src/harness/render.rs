//! SVG plot of an episode log.

use std::fmt::Write;

use crate::geometry::{ConvexRegion, Point};
use crate::graph::EdgeStatus;

use super::episode::EpisodeLog;

const SCALE: f64 = 100.0;
const PAD: f64 = 20.0;
const STYLE: &str = "\
.workspace{fill:#fff;stroke:#000;stroke-width:2}
.obstacle{fill:#888;stroke:none}
.region{fill:#4a90d9;fill-opacity:0.08;stroke:#4a90d9;stroke-width:1}
.footprint{fill:none;stroke:#333;stroke-width:1}
.trajectory{fill:none;stroke:#d0021b;stroke-width:2}
.edge-untried{stroke:#bbb;stroke-width:1;stroke-dasharray:4 3}
.edge-certified{stroke:#7ed321;stroke-width:1}
.edge-invalid{stroke:#f5a623;stroke-width:1;stroke-dasharray:2 2}
.edge-executed{stroke:#4a4a4a;stroke-width:1}
.goal{fill:#2a9d3a}
.start{fill:#1f4fa8}
";

pub fn edge_class(status: EdgeStatus) -> &'static str {
    match status {
        EdgeStatus::Untried => "edge-untried",
        EdgeStatus::Certified => "edge-certified",
        EdgeStatus::Invalid => "edge-invalid",
        EdgeStatus::Executed => "edge-executed",
    }
}

struct Frame {
    h: f64,
}

impl Frame {
    fn x(&self, x: f64) -> f64 {
        PAD + x * SCALE
    }

    fn y(&self, y: f64) -> f64 {
        PAD + (self.h - y) * SCALE
    }

    fn points(&self, pts: &[Point]) -> String {
        pts.iter()
            .map(|p| format!("{:.3},{:.3}", self.x(p.x), self.y(p.y)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Region clipped to `bounds`, so unbounded or huge regions stay on the page.
fn region_polygon(region: &ConvexRegion, bounds: &ConvexRegion) -> Vec<Point> {
    let mut hs = region.halfspaces().to_vec();
    hs.extend_from_slice(bounds.halfspaces());
    ConvexRegion::new(hs).map(|r| r.polygon()).unwrap_or_default()
}

/// Renders workspace, obstacles, node regions and footprints, graph edges
/// and the executed path. Output depends only on the log.
pub fn render_svg(log: &EpisodeLog) -> String {
    let [w, h] = log.scene.workspace;
    let f = Frame { h };
    let bounds = ConvexRegion::axis_box(0.0, w, 0.0, h).expect("workspace box");
    let mut s = String::new();
    let (pw, ph) = (w * SCALE + 2.0 * PAD, h * SCALE + 2.0 * PAD);
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{pw:.0}" height="{ph:.0}" viewBox="0 0 {pw:.0} {ph:.0}">"#
    )
    .unwrap();
    writeln!(s, "<style>\n{STYLE}</style>").unwrap();
    writeln!(
        s,
        r#"<rect class="workspace" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}"/>"#,
        f.x(0.0),
        f.y(h),
        w * SCALE,
        h * SCALE
    )
    .unwrap();

    for node in &log.nodes {
        let poly = region_polygon(&node.region, &bounds);
        if poly.len() >= 3 {
            writeln!(
                s,
                r#"<polygon class="region" points="{}"/>"#,
                f.points(&poly)
            )
            .unwrap();
        }
    }
    for o in &log.scene.obstacles {
        writeln!(
            s,
            r#"<circle class="obstacle" cx="{:.3}" cy="{:.3}" r="{:.3}"/>"#,
            f.x(o.x),
            f.y(o.y),
            o.r * SCALE
        )
        .unwrap();
    }
    for e in &log.edges {
        let a = log.nodes[e.source].pose.position;
        let b = e.target.position;
        writeln!(
            s,
            r#"<line class="{}" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#,
            edge_class(e.status),
            f.x(a.x),
            f.y(a.y),
            f.x(b.x),
            f.y(b.y)
        )
        .unwrap();
    }
    for node in &log.nodes {
        let verts = log.scene.robot.world_vertices(&node.pose);
        writeln!(
            s,
            r#"<polygon class="footprint" points="{}"/>"#,
            f.points(&verts)
        )
        .unwrap();
    }

    let mut path: Vec<Point> = Vec::new();
    for leg in &log.executed {
        let n = 50;
        for i in 0..=n {
            let p = leg.trajectory.pose_at(i as f64 / n as f64).position;
            if path.last() != Some(&p) {
                path.push(p);
            }
        }
    }
    if path.is_empty() {
        path.push(log.scene.start.position);
    }
    writeln!(
        s,
        r#"<polyline class="trajectory" points="{}"/>"#,
        f.points(&path)
    )
    .unwrap();
    let st = log.scene.start.position;
    writeln!(
        s,
        r#"<circle class="start" cx="{:.3}" cy="{:.3}" r="5"/>"#,
        f.x(st.x),
        f.y(st.y)
    )
    .unwrap();
    writeln!(
        s,
        r#"<circle class="goal" cx="{:.3}" cy="{:.3}" r="5"/>"#,
        f.x(log.scene.goal.x),
        f.y(log.scene.goal.y)
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}
