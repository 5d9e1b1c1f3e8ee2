use crate::agents::CurveRow;
use crate::episode::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::world::Scenario;
use std::collections::BTreeMap;
use std::fmt::Write as _;

const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];
const SIZE: f64 = 600.0;
const MARGIN: f64 = 40.0;

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (SIZE - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        SIZE - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (SIZE - 2.0 * MARGIN)
    }
}

fn header(out: &mut String) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#);
}

fn star(cx: f64, cy: f64, r: f64) -> String {
    (0..10)
        .map(|k| {
            let rr = if k % 2 == 0 { r } else { 0.45 * r };
            let a = -std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::PI / 5.0;
            format!("{:.2},{:.2}", cx + rr * a.cos(), cy + rr * a.sin())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Trajectory panel: one polyline per vehicle with start dot and goal star,
/// hull outlines with velocity arrows every `marker_every` samples, buoys as
/// grey discs.
pub fn trajectory_svg(scenario: &Scenario, records: &[TrajectoryRecord], marker_every: usize) -> Result<String> {
    if records.is_empty() {
        return Err(Error::Empty("trajectory log".into()));
    }
    let half = scenario.world_size / 2.0;
    let ax = Axes { x0: -half, x1: half, y0: -half, y1: half };
    let scale = (SIZE - 2.0 * MARGIN) / scenario.world_size;
    let mut by_vehicle: BTreeMap<usize, Vec<&TrajectoryRecord>> = BTreeMap::new();
    for r in records {
        by_vehicle.entry(r.vehicle).or_default().push(r);
    }
    let mut out = String::new();
    header(&mut out);
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{w}" height="{w}" fill="none" stroke="#999"/>"##,
        w = SIZE - 2.0 * MARGIN
    );
    for b in &scenario.buoys {
        let _ = writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#888"/>"##,
            ax.px(b.position[0]),
            ax.py(b.position[1]),
            b.radius * scale
        );
    }
    for (&id, track) in &by_vehicle {
        let color = COLORS[id % COLORS.len()];
        let points: Vec<String> = track.iter().map(|r| format!("{:.2},{:.2}", ax.px(r.x), ax.py(r.y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            points.join(" ")
        );
        let first = track[0];
        let _ =
            writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}"/>"#, ax.px(first.x), ax.py(first.y));
        if let Some(g) = scenario.goals.get(id) {
            let _ = writeln!(out, r#"<polygon points="{}" fill="{color}"/>"#, star(ax.px(g[0]), ax.py(g[1]), 8.0));
        }
        for r in track.iter().step_by(marker_every.max(1)) {
            let (cx, cy) = (ax.px(r.x), ax.py(r.y));
            let (s, c) = r.yaw.sin_cos();
            let vx = c * r.u - s * r.v;
            let vy = s * r.u + c * r.v;
            let _ = writeln!(
                out,
                r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{:.2}" fill="none" stroke="{color}" stroke-opacity="0.6"/>"#,
                scale
            );
            let _ = writeln!(
                out,
                r#"<line x1="{cx:.2}" y1="{cy:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="1"/>"#,
                cx + vx * scale,
                cy - vy * scale
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-size="8" fill="{color}">{:.1}</text>"#,
                cx + 4.0,
                cy - 4.0,
                r.t
            );
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Learning curves of one controller across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveFamily {
    pub label: String,
    pub runs: Vec<Vec<CurveRow>>,
}

/// Mean and standard error of `values`.
fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-step mean ± standard error across runs of `metric`.
pub fn curve_band(family: &CurveFamily, metric: fn(&CurveRow) -> f64) -> Vec<(u64, f64, f64)> {
    let mut by_step: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for run in &family.runs {
        for row in run {
            by_step.entry(row.step).or_default().push(metric(row));
        }
    }
    by_step
        .into_iter()
        .map(|(step, v)| {
            let (m, se) = mean_stderr(&v);
            (step, m, se)
        })
        .collect()
}

/// Success-rate learning curves with mean ± standard-error bands.
pub fn curve_svg(families: &[CurveFamily], metric: fn(&CurveRow) -> f64, y_label: &str) -> Result<String> {
    let bands: Vec<_> = families.iter().map(|f| curve_band(f, metric)).collect();
    let all: Vec<&(u64, f64, f64)> = bands.iter().flatten().collect();
    if all.is_empty() {
        return Err(Error::Empty("learning curves".into()));
    }
    let x1 = all.iter().map(|p| p.0).max().unwrap_or(1).max(1) as f64;
    let lo = all.iter().map(|p| p.1 - p.2).fold(f64::INFINITY, f64::min);
    let hi = all.iter().map(|p| p.1 + p.2).fold(f64::NEG_INFINITY, f64::max);
    let (y0, y1) = if hi > lo { (lo, hi) } else { (lo - 1.0, hi + 1.0) };
    let ax = Axes { x0: 0.0, x1, y0, y1 };
    let mut out = String::new();
    header(&mut out);
    let _ = writeln!(
        out,
        r##"<line x1="{MARGIN}" y1="{b}" x2="{r}" y2="{b}" stroke="#333"/><line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{b}" stroke="#333"/>"##,
        b = SIZE - MARGIN,
        r = SIZE - MARGIN
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.0}" y="{:.0}" font-size="12" text-anchor="middle">step</text>"#,
        SIZE / 2.0,
        SIZE - 8.0
    );
    let _ = writeln!(out, r#"<text x="8" y="{:.0}" font-size="12">{y_label}</text>"#, MARGIN - 12.0);
    let _ = writeln!(out, r#"<text x="{MARGIN}" y="{:.0}" font-size="10">{y0:.3}</text>"#, SIZE - MARGIN + 14.0);
    let _ = writeln!(out, r#"<text x="{MARGIN}" y="{:.0}" font-size="10">{y1:.3}</text>"#, MARGIN - 2.0);
    for (k, (family, band)) in families.iter().zip(&bands).enumerate() {
        let color = COLORS[k % COLORS.len()];
        let upper = band.iter().map(|&(s, m, e)| format!("{:.2},{:.2}", ax.px(s as f64), ax.py(m + e)));
        let lower = band.iter().rev().map(|&(s, m, e)| format!("{:.2},{:.2}", ax.px(s as f64), ax.py(m - e)));
        let polygon: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(
            out,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            polygon.join(" ")
        );
        let line: Vec<String> =
            band.iter().map(|&(s, m, _)| format!("{:.2},{:.2}", ax.px(s as f64), ax.py(m))).collect();
        let _ =
            writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        let _ = writeln!(
            out,
            r#"<text x="{:.0}" y="{:.0}" font-size="12" fill="{color}">{}</text>"#,
            SIZE - MARGIN - 100.0,
            MARGIN + 14.0 * (k as f64 + 1.0),
            family.label
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}
