//! CSV and SVG emission for sweep tables and trajectories.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::experiments::{Regime, SweepTable};
use crate::model::{RateSet, Scenario};
use crate::observables::currents;
use crate::solver::Trajectory;

pub const CSV_HEADER: &str = "param,I_S_numeric,I_S_analytic,I_D,Delta_I_D,max_violation";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("refusing to write an empty table")]
    EmptyTable,
    #[error("no successful rows to plot")]
    NothingToPlot,
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// RFC 4180 field quoting.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

/// Renders a sweep table. Failed rows carry `error: <message>` in the
/// numeric current column and leave the others empty.
pub fn render_csv(table: &SweepTable) -> Result<String, OutputError> {
    if table.rows.is_empty() {
        return Err(OutputError::EmptyTable);
    }
    let mut s = String::with_capacity(64 * (table.rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for row in &table.rows {
        let fields = match &row.outcome {
            Ok(v) => [
                format_float(row.param),
                format_float(v.system_current),
                opt(v.analytic_current),
                opt(v.detector_current),
                opt(v.delta_detector_current),
                format_float(v.max_violation),
            ],
            Err(e) => [
                format_float(row.param),
                csv_field(&format!("error: {e}")),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ],
        };
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    Ok(s)
}

/// Time series `t`, every population, then `I_S` and (when the scenario has
/// a detector) `I_D`.
pub fn render_trajectory_csv(
    traj: &Trajectory,
    scenario: Scenario,
    rates: &RateSet,
) -> Result<String, OutputError> {
    let first = traj.states.first().ok_or(OutputError::EmptyTable)?;
    let labels: Vec<_> = first.layout.diagonal_labels().collect();
    let mut s = String::from("t");
    for (_, l) in &labels {
        let _ = write!(s, ",{}", csv_field(l.as_str()));
    }
    s.push_str(",I_S");
    if scenario.has_detector() {
        s.push_str(",I_D");
    }
    s.push('\n');
    for (t, x) in traj.times.iter().zip(&traj.states) {
        s.push_str(&format_float(*t));
        for (k, _) in &labels {
            let _ = write!(s, ",{}", format_float(x.values[*k]));
        }
        // Layouts always match the scenario, so the currents exist.
        let c = currents(scenario, rates, x).expect("scenario layout");
        let _ = write!(s, ",{}", format_float(c.system));
        if let Some(d) = c.detector {
            let _ = write!(s, ",{}", format_float(d));
        }
        s.push('\n');
    }
    Ok(s)
}

fn write_file(path: &Path, contents: &str) -> Result<(), OutputError> {
    fs::write(path, contents).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_csv(table: &SweepTable, path: &Path) -> Result<(), OutputError> {
    let text = render_csv(table)?;
    write_file(path, &text)
}

pub fn write_svg(table: &SweepTable, path: &Path) -> Result<(), OutputError> {
    let text = render_svg(table)?;
    write_file(path, &text)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 60.0;

type Segment = (Option<Regime>, Vec<(f64, f64)>);

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Line chart of the numeric system current against the sweep parameter.
///
/// Consecutive rows sharing a blocking regime form one `<polyline>`, so a
/// Fermi-level sweep shows one segment per plateau. The x axis is
/// logarithmic when the parameter is positive and spans two decades or more.
pub fn render_svg(table: &SweepTable) -> Result<String, OutputError> {
    if table.rows.is_empty() {
        return Err(OutputError::EmptyTable);
    }
    let points: Vec<(f64, f64, Option<Regime>)> = table
        .rows
        .iter()
        .filter_map(|r| {
            r.outcome
                .as_ref()
                .ok()
                .map(|v| (r.param, v.system_current, r.regime))
        })
        .collect();
    if points.is_empty() {
        return Err(OutputError::NothingToPlot);
    }

    let (xmin, xmax) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.0), hi.max(p.0))
        });
    let log_x = xmin > 0.0 && xmax / xmin >= 100.0;
    let tx = |x: f64| if log_x { x.log10() } else { x };
    let (x0, x1) = (tx(xmin), tx(xmax));
    let ymax = points.iter().map(|p| p.1).fold(0.0, f64::max);
    let ymin = points.iter().map(|p| p.1).fold(0.0, f64::min);
    let (y0, y1) = if ymax > ymin {
        (ymin, ymax * 1.05)
    } else {
        (ymin - 1.0, ymin + 1.0)
    };
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| {
        if x1 > x0 {
            MARGIN_LEFT + (tx(x) - x0) / (x1 - x0) * plot_w
        } else {
            MARGIN_LEFT + 0.5 * plot_w
        }
    };
    let sy = |y: f64| MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (bx, by) = (MARGIN_LEFT, MARGIN_TOP + plot_h);
    let _ = writeln!(
        s,
        r#"<path class="axes" d="M{bx} {MARGIN_TOP} L{bx} {by} L{} {by}" stroke="black" fill="none"/>"#,
        MARGIN_LEFT + plot_w
    );
    for (x, anchor) in [(xmin, "start"), (xmax, "end")] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="{anchor}">{x:.4e}</text>"#,
            sx(x),
            by + 15.0,
        );
    }
    for y in [y0, y1] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{y:.4e}</text>"#,
            bx - 5.0,
            sy(y) + 4.0,
        );
    }
    let xlabel = if log_x {
        format!("{} (log scale)", table.parameter)
    } else {
        table.parameter.clone()
    };
    let _ = writeln!(
        s,
        r#"<text class="xlabel" x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + 0.5 * plot_w,
        HEIGHT - 15.0,
        escape(&xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text class="ylabel" x="18" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.2})">system current I_S (e·rate)</text>"#,
        MARGIN_TOP + 0.5 * plot_h,
        MARGIN_TOP + 0.5 * plot_h
    );

    let mut segments: Vec<Segment> = Vec::new();
    for &(x, y, regime) in &points {
        match segments.last_mut() {
            Some((r, pts)) if *r == regime => pts.push((x, y)),
            _ => segments.push((regime, vec![(x, y)])),
        }
    }
    for (regime, pts) in &segments {
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let class = regime.map(|r| r.name()).unwrap_or("sweep");
        let _ = writeln!(
            s,
            r#"<polyline class="segment {class}" points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
            coords.join(" ")
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
