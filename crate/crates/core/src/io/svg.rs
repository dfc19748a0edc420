//! Three stacked panels: threshold, fluid objective, relative gap.
//! Output depends only on the table, so identical inputs give identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use super::table::{SweepRow, SweepTable};
use super::{write_atomic, IoError, IoResult};

const WIDTH: f64 = 760.0;
const PANEL_H: f64 = 200.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 30.0;
const GAP: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
];

struct Panel {
    title: &'static str,
    value: fn(&SweepRow) -> f64,
}

const PANELS: [Panel; 3] = [
    Panel {
        title: "threshold",
        value: |r| r.tau,
    },
    Panel {
        title: "fluid objective",
        value: |r| r.fluid_w,
    },
    Panel {
        title: "relative gap",
        value: |r| r.rel_gap,
    },
];

fn tick(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

pub fn sweep_svg(table: &SweepTable, axis_label: &str) -> String {
    let rows = table.rows();
    let (mut x_lo, mut x_hi) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.axis), hi.max(r.axis)));
    if !x_lo.is_finite() {
        (x_lo, x_hi) = (0.0, 1.0);
    } else if x_hi - x_lo <= 0.0 {
        (x_lo, x_hi) = (x_lo - 0.5, x_hi + 0.5);
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let height = TOP + 3.0 * PANEL_H + 2.0 * GAP + 40.0;
    let sx = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let policies = table.policies();

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (k, panel) in PANELS.iter().enumerate() {
        let top = TOP + k as f64 * (PANEL_H + GAP);
        let bottom = top + PANEL_H;
        let y_hi = match k {
            0 => 1.0,
            _ => {
                let m = rows.iter().map(panel.value).filter(|v| v.is_finite()).fold(0.0_f64, f64::max);
                if m > 0.0 { m * 1.05 } else { 1.0 }
            }
        };
        let sy = |y: f64| bottom - (y / y_hi).clamp(0.0, 1.0) * PANEL_H;
        let _ = writeln!(
            out,
            r##"<rect x="{LEFT}" y="{top}" width="{plot_w}" height="{PANEL_H}" fill="none" stroke="#444"/>"##
        );
        let _ = writeln!(
            out,
            r#"<text x="{LEFT}" y="{:.2}" font-weight="bold">{}</text>"#,
            top - 8.0,
            panel.title
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let y = bottom - f * PANEL_H;
            let x = LEFT + f * plot_w;
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#444"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                LEFT - 4.0,
                LEFT - 6.0,
                y + 4.0,
                tick(f * y_hi)
            );
            let _ = writeln!(
                out,
                r##"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="#444"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                bottom + 4.0,
                bottom + 16.0,
                tick(x_lo + f * (x_hi - x_lo))
            );
        }
        for (j, policy) in policies.iter().enumerate() {
            let color = PALETTE[j % PALETTE.len()];
            let points: Vec<String> = rows
                .iter()
                .filter(|r| r.policy == *policy)
                .filter(|r| (panel.value)(r).is_finite())
                .map(|r| format!("{:.2},{:.2}", sx(r.axis), sy((panel.value)(r))))
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                points.join(" ")
            );
        }
    }
    let axis_y = TOP + 3.0 * PANEL_H + 2.0 * GAP + 30.0;
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{axis_y:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(axis_label)
    );
    for (j, policy) in policies.iter().enumerate() {
        let color = PALETTE[j % PALETTE.len()];
        let y = TOP + 10.0 + 16.0 * j as f64;
        let x = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 18.0,
            x + 24.0,
            y + 4.0,
            escape(policy)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Fails on an empty table, which has nothing to draw.
pub fn render_sweep_svg(table: &SweepTable, axis_label: &str, path: &Path) -> IoResult<()> {
    if table.rows().is_empty() {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            message: "sweep table is empty".into(),
        });
    }
    write_atomic(path, sweep_svg(table, axis_label).as_bytes())
}
