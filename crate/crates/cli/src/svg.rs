//! Phase-portrait plot: basin raster, level graphs, separatrix and
//! equilibria over the admissible region.

use std::fmt::Write;

use syntrophic::{BasinGrid, BasinLabel, EquilibriumRecord, PlanarState, Separatrix, Stability};

pub struct Palette {
    pub basins: [&'static str; 4],
    pub unresolved: &'static str,
    pub gamma1: &'static str,
    pub gamma2: &'static str,
    pub separatrix: &'static str,
    pub stable: &'static str,
    pub saddle: &'static str,
    pub unstable: &'static str,
}

pub const PALETTE: Palette = Palette {
    basins: ["#cfe3f7", "#f9dcc4", "#e4f2d9", "#eadcf4"],
    unresolved: "#9a9a9a",
    gamma1: "#d62728",
    gamma2: "#1f77b4",
    separatrix: "#2ca02c",
    stable: "#000000",
    saddle: "#ff7f0e",
    unstable: "#7f7f7f",
};

const WIDTH: f64 = 520.0;
const HEIGHT: f64 = 520.0;
const MARGIN: f64 = 50.0;
const LEGEND: f64 = 170.0;

struct Frame {
    s1_in: f64,
    s2_in: f64,
}

impl Frame {
    fn x(&self, x1: f64) -> f64 {
        MARGIN + x1 / self.s1_in * WIDTH
    }

    fn y(&self, x2: f64) -> f64 {
        MARGIN + HEIGHT - x2 / (self.s1_in + self.s2_in) * HEIGHT
    }

    fn point(&self, p: PlanarState) -> String {
        format!("{:.2},{:.2}", self.x(p.x1), self.y(p.x2))
    }
}

fn polyline(out: &mut String, frame: &Frame, points: &[PlanarState], color: &str, width: f64) {
    if points.len() < 2 {
        return;
    }
    let coords: Vec<String> = points.iter().map(|p| frame.point(*p)).collect();
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="{color}" stroke-width="{width}" points="{}"/>"#,
        coords.join(" ")
    );
}

pub fn render(
    grid: &BasinGrid,
    nullclines: &[(&str, Vec<PlanarState>)],
    separatrix: Option<&Separatrix>,
    equilibria: &[EquilibriumRecord],
) -> String {
    let frame = Frame {
        s1_in: grid.config.s1_in,
        s2_in: grid.config.s2_in,
    };
    let total_w = 2.0 * MARGIN + WIDTH + LEGEND;
    let total_h = 2.0 * MARGIN + HEIGHT;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_w}" height="{total_h}" viewBox="0 0 {total_w} {total_h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let (cw, ch) = grid.cell_size();
    let (pw, ph) = (
        cw / frame.s1_in * WIDTH,
        ch / (frame.s1_in + frame.s2_in) * HEIGHT,
    );
    let _ = writeln!(out, r#"<g shape-rendering="crispEdges">"#);
    for (p, label) in grid.cells() {
        let fill = match label {
            BasinLabel::Attractor(k) => PALETTE.basins[k % PALETTE.basins.len()],
            BasinLabel::Unresolved => PALETTE.unresolved,
            BasinLabel::Outside => continue,
        };
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
            frame.x(p.x1 - 0.5 * cw),
            frame.y(p.x2 + 0.5 * ch),
            pw + 0.05,
            ph + 0.05
        );
    }
    let _ = writeln!(out, "</g>");

    // Region boundary: 0 <= x1 <= s1_in, 0 <= x2 <= x1 + s2_in.
    let corners = [
        PlanarState::new(0.0, 0.0),
        PlanarState::new(frame.s1_in, 0.0),
        PlanarState::new(frame.s1_in, frame.s1_in + frame.s2_in),
        PlanarState::new(0.0, frame.s2_in),
    ];
    let coords: Vec<String> = corners.iter().map(|p| frame.point(*p)).collect();
    let _ = writeln!(
        out,
        r##"<polygon fill="none" stroke="#333333" stroke-width="1" points="{}"/>"##,
        coords.join(" ")
    );

    for (name, points) in nullclines {
        let color = if *name == "F1" {
            PALETTE.gamma1
        } else {
            PALETTE.gamma2
        };
        polyline(&mut out, &frame, points, color, 2.0);
    }
    if let Some(sep) = separatrix {
        polyline(&mut out, &frame, &sep.polyline(), PALETTE.separatrix, 2.0);
    }
    for e in equilibria {
        let fill = match e.stability {
            Stability::StableNode => PALETTE.stable,
            Stability::Saddle => PALETTE.saddle,
            _ => PALETTE.unstable,
        };
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="5" fill="{fill}"><title>{} {}</title></circle>"#,
            frame.x(e.location.x1),
            frame.y(e.location.x2),
            e.kind,
            e.stability
        );
    }

    // Axes.
    let (x0, y0) = (frame.x(0.0), frame.y(0.0));
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">x1</text>"#,
        frame.x(0.5 * frame.s1_in),
        y0 + 35.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">x2</text>"#,
        x0 - 30.0,
        frame.y(0.5 * (frame.s1_in + frame.s2_in)),
        x0 - 30.0,
        frame.y(0.5 * (frame.s1_in + frame.s2_in))
    );
    for v in [0.0, frame.s1_in] {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            frame.x(v),
            y0 + 16.0,
            trim(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
        x0 - 6.0,
        frame.y(frame.s1_in + frame.s2_in) + 4.0,
        trim(frame.s1_in + frame.s2_in)
    );

    // Legend.
    let lx = 2.0 * MARGIN + WIDTH - 20.0;
    let mut ly = MARGIN + 10.0;
    for k in 0..grid.attractors.len() {
        let color = PALETTE.basins[k % PALETTE.basins.len()];
        let name = grid.label_name(BasinLabel::Attractor(k));
        legend_entry(&mut out, lx, &mut ly, &format!("basin of {name}"), |y| {
            format!(
                r##"<rect x="{lx:.2}" y="{:.2}" width="16" height="10" fill="{color}" stroke="#333333"/>"##,
                y - 5.0
            )
        });
    }
    let mut lines = vec![("Gamma 1", PALETTE.gamma1), ("Gamma 2", PALETTE.gamma2)];
    if separatrix.is_some() {
        lines.push(("separatrix", PALETTE.separatrix));
    }
    for (name, color) in lines {
        legend_entry(&mut out, lx, &mut ly, name, |y| {
            format!(
                r#"<line x1="{lx:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/>"#,
                lx + 16.0
            )
        });
    }
    for (name, color) in [
        ("stable node", PALETTE.stable),
        ("saddle", PALETTE.saddle),
        ("unstable node", PALETTE.unstable),
    ] {
        legend_entry(&mut out, lx, &mut ly, name, |y| {
            format!(
                r#"<circle cx="{:.2}" cy="{y:.2}" r="5" fill="{color}"/>"#,
                lx + 8.0
            )
        });
    }
    let _ = writeln!(
        out,
        r#"<text x="{lx:.2}" y="{:.2}">D = {}</text>"#,
        ly + 10.0,
        trim(grid.dilution)
    );
    out.push_str("</svg>\n");
    out
}

fn trim(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

fn legend_entry(
    out: &mut String,
    lx: f64,
    ly: &mut f64,
    text: &str,
    swatch: impl FnOnce(f64) -> String,
) {
    let _ = writeln!(out, "{}", swatch(*ly));
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}">{text}</text>"#,
        lx + 24.0,
        *ly + 4.0
    );
    *ly += 20.0;
}
