//! Self-contained SVG figures: `n*` against `m`, and error-versus-`n` curves.

use std::fmt::Write;

use super::output::PlotOptions;
use super::SweepResult;

const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Maps data values to pixels along one axis.
#[derive(Debug, Clone, Copy)]
struct Scale {
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
    log: bool,
}

impl Scale {
    fn new(mut lo: f64, mut hi: f64, from: f64, to: f64, log: bool) -> Self {
        if log {
            lo = lo.max(f64::MIN_POSITIVE).log10();
            hi = hi.max(f64::MIN_POSITIVE).log10();
        }
        if hi <= lo {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
            lo -= pad;
            hi += pad;
        }
        Self { lo, hi, from, to, log }
    }

    fn px(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.lo.floor() as i32, self.hi.ceil() as i32);
            let mut out: Vec<f64> = (a..=b).map(|e| 10f64.powi(e)).collect();
            if b - a <= 1 {
                out = (a..=b).flat_map(|e| [1.0, 2.0, 5.0].map(|k| k * 10f64.powi(e))).collect();
            }
            out.into_iter().filter(|&t| (self.lo - 1e-9..=self.hi + 1e-9).contains(&t.log10())).collect()
        } else {
            let span = self.hi - self.lo;
            let raw = span / 5.0;
            let mag = 10f64.powf(raw.log10().floor());
            let step = [1.0, 2.0, 5.0, 10.0].iter().map(|k| k * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
            let first = (self.lo / step).ceil() as i64;
            let last = (self.hi / step).floor() as i64;
            (first..=last).map(|i| i as f64 * step).collect()
        }
    }
}

fn label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        let e = v.abs().log10().floor() as i32;
        let mant = v / 10f64.powi(e);
        if (mant - mant.round()).abs() < 1e-9 {
            format!("{}e{}", mant.round(), e)
        } else {
            format!("{mant:.1}e{e}")
        }
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    }
}

struct Frame {
    svg: String,
    x: Scale,
    y: Scale,
}

impl Frame {
    fn new(opts: &PlotOptions, title: &str, x: (f64, f64, bool, &str), y: (f64, f64, bool, &str)) -> Self {
        let (w, h) = (opts.width.max(320) as f64, opts.height.max(240) as f64);
        let xs = Scale::new(x.0, x.1, MARGIN_LEFT, w - MARGIN_RIGHT, x.2);
        let ys = Scale::new(y.0, y.1, h - MARGIN_BOTTOM, MARGIN_TOP, y.2);
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(svg, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
        let (x0, x1, y0, y1) = (xs.from, xs.to, ys.from, ys.to);
        let _ = writeln!(svg, r#"<g stroke="black" fill="none"><path d="M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}"/></g>"#);
        let _ = writeln!(svg, r#"<g font-size="11" fill="black">"#);
        for t in xs.ticks() {
            let px = xs.px(t);
            let _ = writeln!(
                svg,
                r##"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{y1:.2}" stroke="#dddddd"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                y0 + 5.0,
                y0 + 18.0,
                label(t)
            );
        }
        for t in ys.ticks() {
            let py = ys.px(t);
            let _ = writeln!(
                svg,
                r##"<line x1="{:.2}" y1="{py:.2}" x2="{x0:.2}" y2="{py:.2}" stroke="black"/><line x1="{x0:.2}" y1="{py:.2}" x2="{x1:.2}" y2="{py:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                x0 - 5.0,
                x0 - 8.0,
                py + 4.0,
                label(t)
            );
        }
        let _ = writeln!(svg, "</g>");
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, h - 12.0, escape(x.3));
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(y.3)
        );
        Self { svg, x: xs, y: ys }
    }

    fn legend(&mut self, row: usize, color: &str, text: &str, dashed: bool) {
        let x = self.x.to + 15.0;
        let y = self.y.to + 10.0 + 18.0 * row as f64;
        let dash = if dashed { r#" stroke-dasharray="6,3,2,3""# } else { "" };
        let _ = writeln!(
            self.svg,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 20.0,
            x + 26.0,
            y + 4.0,
            escape(text)
        );
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>\n");
        self.svg
    }
}

fn polyline(points: &[(f64, f64)], color: &str, dashed: bool) -> String {
    let pts: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let dash = if dashed { r#" stroke-dasharray="6,3,2,3""# } else { "" };
    format!(r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#, pts.join(" ")) + "\n"
}

/// Log-log scatter of `(m, n*)`; boundary hits are drawn hollow, and the
/// theoretical allocation is a dash-dot line when configured.
pub fn nstar_svg(result: &SweepResult, opts: &PlotOptions) -> String {
    let ms: Vec<f64> = result.config.m_grid.iter().map(|&m| m as f64).collect();
    let mut ys: Vec<f64> = result.config.n_grid.iter().map(|&n| n as f64).collect();
    ys.extend(result.theory_curve.values().copied().filter(|v| *v > 0.0));
    let fold = |v: &[f64], f: fn(f64, f64) -> f64, init| v.iter().copied().fold(init, f);
    let mut frame = Frame::new(
        opts,
        "Optimal number of cells per read budget",
        (fold(&ms, f64::min, f64::INFINITY), fold(&ms, f64::max, 0.0), true, "reads m"),
        (fold(&ys, f64::min, f64::INFINITY), fold(&ys, f64::max, 0.0), true, "cells n*"),
    );
    if !result.theory_curve.is_empty() {
        let pts: Vec<(f64, f64)> = result
            .theory_curve
            .iter()
            .filter(|(_, &n)| n > 0.0)
            .map(|(&m, &n)| (frame.x.px(m as f64), frame.y.px(n)))
            .collect();
        frame.svg.push_str(&polyline(&pts, PALETTE[1], true));
        frame.legend(1, PALETTE[1], "theory", true);
    }
    for (&m, s) in &result.n_star {
        let (x, y) = (frame.x.px(m as f64), frame.y.px(s.n as f64));
        let fill = if s.boundary { "white" } else { PALETTE[0] };
        let _ = writeln!(frame.svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{fill}" stroke="{}" stroke-width="1.5"/>"#, PALETTE[0]);
    }
    frame.legend(0, PALETTE[0], "observed n*", false);
    frame.finish()
}

/// Mean `W(noisy, mu)` against `n`, one curve per budget `m`.
pub fn error_curves_svg(result: &SweepResult, opts: &PlotOptions) -> String {
    let ns: Vec<f64> = result.config.n_grid.iter().map(|&n| n as f64).collect();
    let ymax = result.cells.iter().map(|c| c.mean_w).fold(0.0, f64::max);
    let mut frame = Frame::new(
        opts,
        "Mean Wasserstein error",
        (
            ns.iter().copied().fold(f64::INFINITY, f64::min),
            ns.iter().copied().fold(0.0, f64::max),
            true,
            "cells n",
        ),
        (0.0, if ymax > 0.0 { ymax * 1.05 } else { 1.0 }, false, "mean W"),
    );
    for (row, &m) in result.config.m_grid.iter().enumerate() {
        let color = PALETTE[row % PALETTE.len()];
        let pts: Vec<(f64, f64)> = result
            .cells
            .iter()
            .filter(|c| c.m == m)
            .map(|c| (frame.x.px(c.n as f64), frame.y.px(c.mean_w)))
            .collect();
        if pts.is_empty() {
            continue;
        }
        frame.svg.push_str(&polyline(&pts, color, false));
        if let Some(s) = result.n_star.get(&m) {
            if let Some(c) = result.cell(m, s.n) {
                let _ = writeln!(
                    frame.svg,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}"/>"#,
                    frame.x.px(c.n as f64),
                    frame.y.px(c.mean_w)
                );
            }
        }
        frame.legend(row, color, &format!("m = {}", label(m as f64)), false);
    }
    frame.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        assert_eq!(label(1000.0), "1000");
        assert_eq!(label(1e6), "1e6");
        assert_eq!(label(0.25), "0.25");
        assert_eq!(label(2.5e-5), "2.5e-5");
    }

    #[test]
    fn log_ticks_cover_decades() {
        let s = Scale::new(10.0, 10_000.0, 0.0, 100.0, true);
        assert_eq!(s.ticks(), vec![10.0, 100.0, 1000.0, 10_000.0]);
        assert!((s.px(100.0) - 100.0 / 3.0).abs() < 1e-9);
        let lin = Scale::new(0.0, 0.9, 0.0, 1.0, false);
        assert_eq!(lin.ticks().len(), 5);
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }
}
