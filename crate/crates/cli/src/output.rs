//! File writers: JSON, CSV, PGM masks and the SVG overlay.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use modgrad::basin::GridComponent;
use modgrad::equilibria::{Classification, CriticalPoint};
use modgrad::ode::{LyapunovTrace, Trajectory};
use serde_json::Value;

use crate::CliError;

/// Files are collected in memory and written together once the command has
/// finished, so a failing run leaves no partial output.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn json(&mut self, name: &str, value: &Value) {
        let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
        text.push('\n');
        self.files.push((name.to_string(), text.into_bytes()));
    }

    pub fn text(&mut self, name: &str, text: String) {
        self.files.push((name.to_string(), text.into_bytes()));
    }

    pub fn bytes(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn write_all(self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in self.files {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn axis_header(prefix: &str, n: usize) -> String {
    (1..=n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>().join(",")
}

fn row(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(float).collect::<Vec<_>>().join(",")
}

/// `t,x1..xn`.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.samples[0].x.len();
    let mut out = format!("t,{}\n", axis_header("x", n));
    for s in &traj.samples {
        let _ = writeln!(out, "{},{}", float(s.t), row(s.x.iter().copied()));
    }
    out
}

/// `t,V,Vdot,lambda1,gradnorm2`.
pub fn lyapunov_csv(trace: &LyapunovTrace) -> String {
    let mut out = String::from("t,V,Vdot,lambda1,gradnorm2\n");
    for r in &trace.rows {
        let _ = writeln!(out, "{}", row([r.t, r.v, r.v_dot, r.lambda1, r.grad_norm2]));
    }
    out
}

/// Centres of the masked cells.
pub fn cells_csv(comp: &GridComponent) -> String {
    let mut out = format!("{}\n", axis_header("x", comp.grid.dim()));
    for cell in comp.masked_cells() {
        let _ = writeln!(out, "{}", row(comp.grid.center(cell)));
    }
    out
}

/// Faces between a masked cell and an unmasked cell or the wall, as segments
/// `(x1_start, x2_start) → (x1_end, x2_end)`. Two-dimensional grids only.
pub fn boundary_segments(comp: &GridComponent) -> Vec<[f64; 4]> {
    let g = &comp.grid;
    let (w0, w1) = (g.cell_width(0), g.cell_width(1));
    let mut out = Vec::new();
    for cell in comp.masked_cells() {
        let lo = g.corner(cell);
        let (x0, y0, x1, y1) = (lo[0], lo[1], lo[0] + w0, lo[1] + w1);
        for (face, neighbour) in g.face_neighbours(cell).into_iter().enumerate() {
            if neighbour.is_some_and(|nb| comp.mask[nb]) {
                continue;
            }
            out.push(match face {
                0 => [x0, y0, x0, y1],
                1 => [x1, y0, x1, y1],
                2 => [x0, y0, x1, y0],
                _ => [x0, y1, x1, y1],
            });
        }
    }
    out
}

/// Boundary segments for n = 2, boundary cell centres otherwise.
pub fn boundary_csv(comp: &GridComponent) -> String {
    if comp.grid.dim() == 2 {
        let mut out = String::from("x1_start,x2_start,x1_end,x2_end\n");
        for s in boundary_segments(comp) {
            let _ = writeln!(out, "{}", row(s));
        }
        out
    } else {
        let mut out = format!("{}\n", axis_header("x", comp.grid.dim()));
        for &cell in &comp.boundary_cells {
            let _ = writeln!(out, "{}", row(comp.grid.center(cell)));
        }
        out
    }
}

/// Binary PGM (P5), one byte per cell, 255 inside. The top row is the
/// largest `x2`.
pub fn mask_pgm(comp: &GridComponent) -> Vec<u8> {
    let res = comp.grid.resolution();
    let (w, h) = (res[0], res[1]);
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    for j in (0..h).rev() {
        for i in 0..w {
            out.push(if comp.mask[comp.grid.flatten(&[i, j])] { 255 } else { 0 });
        }
    }
    out
}

/// Standalone SVG: mask outline, anchor, critical points and H6 witnesses.
pub fn basin_svg(comp: &GridComponent, critical_points: &[CriticalPoint], h6_witnesses: &[Vec<f64>]) -> String {
    const SIZE: f64 = 600.0;
    let d = comp.grid.domain();
    let (lo, hi) = (d.lo(), d.hi());
    let scale = SIZE / (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let (width, height) = ((hi[0] - lo[0]) * scale, (hi[1] - lo[1]) * scale);
    let px = |x: f64| (x - lo[0]) * scale;
    let py = |y: f64| height - (y - lo[1]) * scale;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.3} {height:.3}">"#
    );
    let _ = writeln!(
        s,
        r##"<rect x="0" y="0" width="{width:.3}" height="{height:.3}" fill="#ffffff" stroke="#000000" stroke-width="1"/>"##
    );
    let mut path = String::new();
    for [x0, y0, x1, y1] in boundary_segments(comp) {
        let _ = write!(path, "M{:.3} {:.3}L{:.3} {:.3}", px(x0), py(y0), px(x1), py(y1));
    }
    let _ = writeln!(
        s,
        r##"<path d="{path}" fill="none" stroke="#1f5fbf" stroke-width="1.5"/>"##
    );
    for p in critical_points {
        let (x, y) = (px(p.location[0]), py(p.location[1]));
        let colour = match p.classification {
            Classification::IsolatedLocalMax => "#2a9d2a",
            Classification::Saddle => "#d97b00",
            Classification::LocalMin => "#7a3fbf",
            Classification::Degenerate => "#777777",
        };
        let _ = writeln!(
            s,
            r##"<circle cx="{x:.3}" cy="{y:.3}" r="4" fill="{colour}"><title>{} ({:.6}, {:.6}) f = {:.6}</title></circle>"##,
            crate::json::classification(p.classification),
            p.location[0],
            p.location[1],
            p.value
        );
    }
    for w in h6_witnesses {
        let (x, y) = (px(w[0]), py(w[1]));
        let _ = writeln!(
            s,
            r##"<path d="M{:.3} {:.3}L{:.3} {:.3}M{:.3} {:.3}L{:.3} {:.3}" stroke="#cc0000" stroke-width="2"/>"##,
            x - 7.0,
            y - 7.0,
            x + 7.0,
            y + 7.0,
            x - 7.0,
            y + 7.0,
            x + 7.0,
            y - 7.0
        );
    }
    let (ax, ay) = (px(comp.anchor[0]), py(comp.anchor[1]));
    let _ = writeln!(
        s,
        r##"<circle cx="{ax:.3}" cy="{ay:.3}" r="6" fill="none" stroke="#000000" stroke-width="2"><title>anchor, c = {}</title></circle>"##,
        comp.c
    );
    s.push_str("</svg>\n");
    s
}
