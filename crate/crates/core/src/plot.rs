//! Static SVG charts: `g(τ)` curves, time signals, spectra and graph drawings.
//!
//! Output is plain text with fixed-precision coordinates, so identical
//! inputs give identical files.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::noise::{PsdPoint, Signal};
use crate::reconstruct::TraceRecord;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 64.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Linear map from data range to pixel range.
#[derive(Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, px_lo: f64, px_hi: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        Axis { lo, hi, px_lo, px_hi }
    }

    fn from_data<'a>(vals: impl Iterator<Item = &'a f64>, px_lo: f64, px_hi: f64) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in vals.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        Axis::new(lo, hi, px_lo, px_hi)
    }

    fn px(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

struct Chart {
    body: String,
    x: Axis,
    y: Axis,
}

impl Chart {
    fn new(title: &str, x: Axis, y: Axis, x_label: &str, y_label: &str) -> Self {
        let mut body = String::new();
        let _ = write!(
            body,
            r##"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect width="{W}" height="{H}" fill="white"/>
<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>
<rect x="{LEFT}" y="{TOP}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>
<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>
<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>
"##,
            W / 2.0,
            esc(title),
            W - LEFT - RIGHT,
            H - TOP - BOTTOM,
            LEFT + (W - LEFT - RIGHT) / 2.0,
            H - 10.0,
            esc(x_label),
            TOP + (H - TOP - BOTTOM) / 2.0,
            TOP + (H - TOP - BOTTOM) / 2.0,
            esc(y_label),
        );
        let mut c = Chart { body, x, y };
        c.ticks();
        c
    }

    fn ticks(&mut self) {
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let xv = self.x.lo + f * (self.x.hi - self.x.lo);
            let yv = self.y.lo + f * (self.y.hi - self.y.lo);
            let _ = writeln!(
                self.body,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                self.x.px(xv),
                H - BOTTOM + 16.0,
                fmt_tick(xv)
            );
            let _ = writeln!(
                self.body,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                self.y.px(yv) + 4.0,
                fmt_tick(yv)
            );
        }
    }

    fn polyline(&mut self, xs: &[f64], ys: &[f64], y: Axis, color: &str) {
        let pts: Vec<String> = xs
            .iter()
            .zip(ys)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(&a, &b)| format!("{:.2},{:.2}", self.x.px(a), y.px(b)))
            .collect();
        let _ = writeln!(
            self.body,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
    }

    fn vline(&mut self, x: f64, color: &str, dash: bool) {
        let d = if dash { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<line class="marker" x1="{0:.2}" y1="{TOP}" x2="{0:.2}" y2="{1:.1}" stroke="{color}"{d}/>"#,
            self.x.px(x),
            H - BOTTOM
        );
    }

    fn band(&mut self, lo: f64, hi: f64) {
        let _ = writeln!(
            self.body,
            r##"<rect x="{:.2}" y="{TOP}" width="{:.2}" height="{:.1}" fill="#ffdd88" fill-opacity="0.35"/>"##,
            self.x.px(lo),
            self.x.px(hi) - self.x.px(lo),
            H - TOP - BOTTOM
        );
    }

    fn legend(&mut self, entries: &[(&str, &str)]) {
        for (k, (label, color)) in entries.iter().enumerate() {
            let y = TOP + 14.0 + 16.0 * k as f64;
            let _ = writeln!(
                self.body,
                r#"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                LEFT + 10.0,
                LEFT + 30.0,
                LEFT + 36.0,
                y + 4.0,
                esc(label)
            );
        }
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn fmt_tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

/// `g(τ)` with the mistaken-entry percentage on a right-hand axis when error
/// counts are present. Solid vertical line: selected `τ`; dashed: first
/// zero-error `τ`.
pub fn g_trace_svg(trace: &[TraceRecord], nodes: usize, title: &str) -> String {
    let taus: Vec<f64> = trace.iter().map(|r| r.tau).collect();
    let gs: Vec<f64> = trace.iter().map(|r| r.g).collect();
    let (x0, x1) = (LEFT, W - RIGHT);
    let (y0, y1) = (H - BOTTOM, TOP);
    let x = Axis::from_data(taus.iter(), x0, x1);
    let gmax = gs.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let y = Axis::new(0.0, gmax.max(1e-12), y0, y1);
    let mut chart = Chart::new(title, x, y, "threshold τ", "g = |λ_target − λ*|");
    chart.polyline(&taus, &gs, y, PALETTE[0]);
    let mut legend = vec![("g(τ)", PALETTE[0])];

    let entries = (nodes * nodes.saturating_sub(1) / 2).max(1) as f64;
    if trace.iter().all(|r| r.error_count.is_some()) && !trace.is_empty() {
        let pct: Vec<f64> = trace
            .iter()
            .map(|r| 100.0 * r.error_count.unwrap_or(0) as f64 / entries)
            .collect();
        let pmax = pct.iter().copied().fold(0.0, f64::max).max(1e-9);
        let y2 = Axis::new(0.0, pmax, y0, y1);
        chart.polyline(&taus, &pct, y2, PALETTE[1]);
        let _ = writeln!(
            chart.body,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="start" fill="{}">{} %</text>"#,
            W - RIGHT + 4.0,
            TOP + 4.0,
            PALETTE[1],
            fmt_tick(pmax)
        );
        legend.push(("mistaken entries (%)", PALETTE[1]));
        if let Some(r) = trace.iter().find(|r| r.error_count == Some(0)) {
            chart.vline(r.tau, PALETTE[1], true);
        }
    }
    if let Some(best) = trace.iter().min_by(|a, b| a.g.total_cmp(&b.g).then(a.tau.total_cmp(&b.tau))) {
        chart.vline(best.tau, PALETTE[0], false);
    }
    chart.legend(&legend);
    chart.finish()
}

/// Overlaid time signals; all must share `dt`. An optional `offset` shifts a
/// signal left by that many samples (e.g. to undo a filter delay).
pub fn signals_svg(series: &[(&str, &Signal, usize)], title: &str) -> String {
    let all: Vec<f64> = series.iter().flat_map(|(_, s, _)| s.samples.iter().copied()).collect();
    let t_max = series
        .iter()
        .map(|(_, s, _)| s.len() as f64 * s.dt)
        .fold(0.0, f64::max);
    let x = Axis::new(0.0, t_max, LEFT, W - RIGHT);
    let y = Axis::from_data(all.iter(), H - BOTTOM, TOP);
    let mut chart = Chart::new(title, x, y, "time", "value");
    let mut legend = Vec::new();
    for (k, (label, s, offset)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let ts: Vec<f64> = (0..s.len()).map(|i| (i as f64 - *offset as f64) * s.dt).collect();
        let keep = *offset..s.len();
        chart.polyline(&ts[keep.clone()], &s.samples[keep], y, color);
        legend.push((*label, color));
    }
    chart.legend(&legend);
    chart.finish()
}

/// PSD on a log10 power axis with the optional band shaded.
pub fn psd_svg(points: &[PsdPoint], band: Option<(f64, f64)>, title: &str) -> String {
    let fs: Vec<f64> = points.iter().map(|p| p.freq).collect();
    let floor = points
        .iter()
        .map(|p| p.power)
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE)
        * 1e-8;
    let logp: Vec<f64> = points.iter().map(|p| p.power.max(floor).log10()).collect();
    let x = Axis::new(0.0, 0.5, LEFT, W - RIGHT);
    let y = Axis::from_data(logp.iter(), H - BOTTOM, TOP);
    let mut chart = Chart::new(title, x, y, "normalized frequency (cycles/sample)", "log10 power");
    if let Some((lo, hi)) = band {
        chart.band(lo, hi);
    }
    chart.polyline(&fs, &logp, y, PALETTE[0]);
    chart.finish()
}

/// Node placement for [`graph_svg`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    Circular,
    /// Node `r·cols + c` at row `r`, column `c`.
    Grid { rows: usize, cols: usize },
}

pub fn graph_svg(g: &Graph, layout: Layout, title: &str) -> String {
    let n = g.node_count();
    let (cx, cy) = (W / 2.0, (H + TOP) / 2.0);
    let pos: Vec<(f64, f64)> = match layout {
        Layout::Grid { rows, cols } if rows * cols == n && rows > 0 && cols > 0 => {
            let sx = (W - 2.0 * LEFT) / (cols.max(2) - 1) as f64;
            let sy = (H - TOP - BOTTOM) / (rows.max(2) - 1) as f64;
            (0..n)
                .map(|i| (LEFT + (i % cols) as f64 * sx, TOP + (i / cols) as f64 * sy))
                .collect()
        }
        _ => {
            let r = (H - TOP - BOTTOM) / 2.0;
            (0..n)
                .map(|i| {
                    let a = 2.0 * PI * i as f64 / n.max(1) as f64 - PI / 2.0;
                    (cx + r * a.cos(), cy + r * a.sin())
                })
                .collect()
        }
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="10">
<rect width="{W}" height="{H}" fill="white"/>
<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{} ({} nodes, {} edges)</text>"##,
        W / 2.0,
        esc(title),
        n,
        g.edge_count()
    );
    for (i, j) in g.edges() {
        let _ = writeln!(
            out,
            r##"<line class="edge" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#555"/>"##,
            pos[i].0, pos[i].1, pos[j].0, pos[j].1
        );
    }
    for (i, (x, y)) in pos.iter().enumerate() {
        let _ = writeln!(
            out,
            r##"<circle class="node" cx="{x:.2}" cy="{y:.2}" r="7" fill="#1f77b4"/><text x="{x:.2}" y="{:.2}" text-anchor="middle" fill="white">{i}</text>"##,
            y + 3.5
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_svg(path: impl AsRef<Path>, svg: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
