//! Static SVG rendering: time series, phase planes with equilibrium markers,
//! spectra, and eigenvalue scans.
//!
//! Output is a pure function of the input. Pixel coordinates are printed with
//! two decimals, tick labels through one fixed formatter, and colors come
//! from a fixed palette, so identical inputs produce byte-identical files on
//! every platform.

use crate::phase::{EquilibriumKind, EquilibriumReport, FieldGrid};
use crate::{Error, Result};
use std::fmt::Write as _;

/// One named curve. `xs` and `ys` must have equal length; non-finite points
/// split the drawn line instead of being interpolated over.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl Series {
    pub fn new(label: impl Into<String>, xs: Vec<f64>, ys: Vec<f64>) -> Self {
        Series {
            label: label.into(),
            xs,
            ys,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.xs.len() != self.ys.len() {
            return Err(Error::InvalidParams(format!(
                "series '{}' has {} x values but {} y values",
                self.label,
                self.xs.len(),
                self.ys.len()
            )));
        }
        Ok(())
    }
}

/// Titles and canvas geometry for one figure.
#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub width: u32,
    pub height: u32,
}

impl Default for PlotSpec {
    fn default() -> Self {
        PlotSpec {
            title: String::new(),
            x_label: String::new(),
            y_label: String::new(),
            width: 720,
            height: 480,
        }
    }
}

impl PlotSpec {
    pub fn titled(
        title: impl Into<String>,
        x_label: impl Into<String>,
        y_label: impl Into<String>,
    ) -> Self {
        PlotSpec {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Self::default()
        }
    }
}

const PALETTE: [&str; 8] = [
    "#1b6ca8", "#c84b31", "#2d8659", "#8d5fd3", "#b8860b", "#3a9fbf", "#c94277", "#5f6f52",
];

const MARGIN_LEFT: f64 = 58.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 44.0;

/// Data range of one axis, padded and repaired so the scale is always usable.
#[derive(Debug, Clone, Copy)]
struct AxisRange {
    lo: f64,
    hi: f64,
}

impl AxisRange {
    fn from_values<'a>(values: impl Iterator<Item = &'a f64>) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in values {
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() || !hi.is_finite() {
            return AxisRange { lo: 0.0, hi: 1.0 };
        }
        if lo == hi {
            let pad = if lo == 0.0 { 0.5 } else { 0.1 * lo.abs() };
            return AxisRange {
                lo: lo - pad,
                hi: hi + pad,
            };
        }
        let pad = 0.03 * (hi - lo);
        AxisRange {
            lo: lo - pad,
            hi: hi + pad,
        }
    }

    fn span(&self) -> f64 {
        self.hi - self.lo
    }
}

/// 1-2-5 tick positions covering the range, about `target` of them.
fn ticks(r: AxisRange, target: usize) -> Vec<f64> {
    let raw = r.span() / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = match raw / mag {
        r if r <= 1.0 => mag,
        r if r <= 2.0 => 2.0 * mag,
        r if r <= 5.0 => 5.0 * mag,
        _ => 10.0 * mag,
    };
    let first = (r.lo / step).ceil();
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let v = (first + k as f64) * step;
        if v > r.hi + 1e-9 * step {
            break;
        }
        out.push(if v.abs() < 1e-12 * step { 0.0 } else { v });
        k += 1;
    }
    out
}

/// Fixed tick-label formatter: plain decimals in a mid range, exponent
/// notation outside it, trailing zeros trimmed.
fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        return format!("{v:e}");
    }
    let s = format!("{v:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Affine maps from data coordinates to pixels (y inverted).
struct Frame {
    x: AxisRange,
    y: AxisRange,
    px0: f64,
    px1: f64,
    py0: f64,
    py1: f64,
}

impl Frame {
    fn new(spec: &PlotSpec, x: AxisRange, y: AxisRange) -> Self {
        Frame {
            x,
            y,
            px0: MARGIN_LEFT,
            px1: spec.width as f64 - MARGIN_RIGHT,
            py0: spec.height as f64 - MARGIN_BOTTOM,
            py1: MARGIN_TOP,
        }
    }

    fn sx(&self, v: f64) -> f64 {
        self.px0 + (v - self.x.lo) / self.x.span() * (self.px1 - self.px0)
    }

    fn sy(&self, v: f64) -> f64 {
        self.py0 + (v - self.y.lo) / self.y.span() * (self.py1 - self.py0)
    }
}

fn open_svg(out: &mut String, spec: &PlotSpec) {
    let (w, h) = (spec.width, spec.height);
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(out, "<rect width=\"{w}\" height=\"{h}\" fill=\"#ffffff\"/>");
}

fn draw_axes(out: &mut String, spec: &PlotSpec, f: &Frame) {
    let _ = writeln!(out, "<g stroke=\"#d8d8d8\" stroke-width=\"1\">");
    for &tx in &ticks(f.x, 6) {
        let px = f.sx(tx);
        let _ = writeln!(
            out,
            "<line x1=\"{px:.2}\" y1=\"{:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\"/>",
            f.py0, f.py1
        );
    }
    for &ty in &ticks(f.y, 5) {
        let py = f.sy(ty);
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{:.2}\" y2=\"{py:.2}\"/>",
            f.px0, f.px1
        );
    }
    let _ = writeln!(out, "</g>");

    let _ = writeln!(
        out,
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>",
        f.px0,
        f.py1,
        f.px1 - f.px0,
        f.py0 - f.py1
    );

    let _ = writeln!(out, "<g fill=\"#333333\">");
    for &tx in &ticks(f.x, 6) {
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            f.sx(tx),
            f.py0 + 16.0,
            fmt_num(tx)
        );
    }
    for &ty in &ticks(f.y, 5) {
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            f.px0 - 6.0,
            f.sy(ty) + 4.0,
            fmt_num(ty)
        );
    }
    let _ = writeln!(out, "</g>");

    if !spec.title.is_empty() {
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"19\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
            0.5 * (f.px0 + f.px1),
            xml_escape(&spec.title)
        );
    }
    if !spec.x_label.is_empty() {
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            0.5 * (f.px0 + f.px1),
            f.py0 + 34.0,
            xml_escape(&spec.x_label)
        );
    }
    if !spec.y_label.is_empty() {
        let cy = 0.5 * (f.py0 + f.py1);
        let _ = writeln!(
            out,
            "<text x=\"15\" y=\"{cy:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 15 {cy:.2})\">{}</text>",
            xml_escape(&spec.y_label)
        );
    }
}

/// Polyline segments of one series, split at non-finite points.
fn draw_series(out: &mut String, f: &Frame, s: &Series, color: &str) {
    let mut points = String::new();
    let mut count = 0usize;
    let flush = |out: &mut String, points: &mut String, count: &mut usize| {
        if *count >= 2 {
            let _ = writeln!(
                out,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.3\" points=\"{}\"/>",
                points.trim_end()
            );
        }
        points.clear();
        *count = 0;
    };
    for (&x, &y) in s.xs.iter().zip(&s.ys) {
        if x.is_finite() && y.is_finite() {
            let _ = write!(points, "{:.2},{:.2} ", f.sx(x), f.sy(y));
            count += 1;
        } else {
            flush(out, &mut points, &mut count);
        }
    }
    flush(out, &mut points, &mut count);
}

fn draw_legend(out: &mut String, f: &Frame, series: &[Series]) {
    if series.iter().filter(|s| !s.label.is_empty()).count() < 2 {
        return;
    }
    let _ = writeln!(out, "<g font-size=\"11\">");
    let mut row = 0usize;
    for (i, s) in series.iter().enumerate() {
        if s.label.is_empty() {
            continue;
        }
        let color = PALETTE[i % PALETTE.len()];
        let y = f.py1 + 14.0 + 15.0 * row as f64;
        let x = f.px1 - 118.0;
        let _ = writeln!(
            out,
            "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"14\" height=\"4\" fill=\"{color}\"/>",
            y - 4.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{y:.2}\" fill=\"#333333\">{}</text>",
            x + 19.0,
            xml_escape(&s.label)
        );
        row += 1;
    }
    let _ = writeln!(out, "</g>");
}

/// Render named curves against shared axes. With no series (or only empty
/// ones) the result is a valid figure showing axes alone.
pub fn line_chart(spec: &PlotSpec, series: &[Series]) -> Result<String> {
    for s in series {
        s.validate()?;
    }
    let x = AxisRange::from_values(series.iter().flat_map(|s| s.xs.iter()));
    let y = AxisRange::from_values(series.iter().flat_map(|s| s.ys.iter()));
    let f = Frame::new(spec, x, y);
    let mut out = String::new();
    open_svg(&mut out, spec);
    draw_axes(&mut out, spec, &f);
    for (i, s) in series.iter().enumerate() {
        draw_series(&mut out, &f, s, PALETTE[i % PALETTE.len()]);
    }
    draw_legend(&mut out, &f, series);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Phase-plane figure: optional direction field, trajectories, and one marker
/// per equilibrium in the report (class `eq`; filled when attracting).
pub fn phase_plane(
    spec: &PlotSpec,
    field: Option<&FieldGrid>,
    paths: &[Series],
    report: Option<&EquilibriumReport>,
) -> Result<String> {
    for s in paths {
        s.validate()?;
    }
    let mut xv: Vec<f64> = paths.iter().flat_map(|s| s.xs.iter().copied()).collect();
    let mut yv: Vec<f64> = paths.iter().flat_map(|s| s.ys.iter().copied()).collect();
    if let Some(g) = field {
        xv.extend_from_slice(&g.xs);
        yv.extend_from_slice(&g.ys);
    }
    if let Some(r) = report {
        xv.extend(r.equilibria.iter().map(|e| e.point.0));
        yv.extend(r.equilibria.iter().map(|e| e.point.1));
    }
    let x = AxisRange::from_values(xv.iter());
    let y = AxisRange::from_values(yv.iter());
    let f = Frame::new(spec, x, y);
    let mut out = String::new();
    open_svg(&mut out, spec);
    draw_axes(&mut out, spec, &f);

    if let Some(g) = field {
        // Short oriented segments, head marked by a dot; length grows with
        // the normalized magnitude so slow regions stay visually quiet.
        let cell = ((f.px1 - f.px0) / g.xs.len().max(1) as f64)
            .min((f.py0 - f.py1) / g.ys.len().max(1) as f64);
        let _ = writeln!(
            &mut out,
            "<g stroke=\"#9aa7b0\" stroke-width=\"1\" fill=\"#9aa7b0\">"
        );
        for (iy, &gy) in g.ys.iter().enumerate() {
            for (ix, &gx) in g.xs.iter().enumerate() {
                let k = iy * g.xs.len() + ix;
                let m = g.magnitude[k];
                if m == 0.0 {
                    continue;
                }
                let norm = g.dx[k].hypot(g.dy[k]);
                let (ux, uy) = (g.dx[k] / norm, g.dy[k] / norm);
                let half = 0.5 * cell * (0.25 + 0.6 * m);
                let (cx, cy) = (f.sx(gx), f.sy(gy));
                let (hx, hy) = (cx + ux * half, cy - uy * half);
                let _ = writeln!(
                    &mut out,
                    "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{hx:.2}\" y2=\"{hy:.2}\"/><circle cx=\"{hx:.2}\" cy=\"{hy:.2}\" r=\"1.1\"/>",
                    cx - ux * half,
                    cy + uy * half
                );
            }
        }
        let _ = writeln!(&mut out, "</g>");
    }

    for (i, s) in paths.iter().enumerate() {
        draw_series(&mut out, &f, s, PALETTE[i % PALETTE.len()]);
    }

    if let Some(r) = report {
        for e in &r.equilibria {
            let (cx, cy) = (f.sx(e.point.0), f.sy(e.point.1));
            let attracting = matches!(
                e.kind,
                EquilibriumKind::StableNode | EquilibriumKind::StableSpiral
            );
            let shape = if matches!(e.kind, EquilibriumKind::Saddle) {
                format!(
                    "<rect class=\"eq\" x=\"{:.2}\" y=\"{:.2}\" width=\"9\" height=\"9\" fill=\"#ffffff\" stroke=\"#222222\" stroke-width=\"1.5\"/>",
                    cx - 4.5,
                    cy - 4.5
                )
            } else {
                let fill = if attracting { "#222222" } else { "#ffffff" };
                format!(
                    "<circle class=\"eq\" cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"5\" fill=\"{fill}\" stroke=\"#222222\" stroke-width=\"1.5\"/>"
                )
            };
            let _ = writeln!(&mut out, "{shape}");
        }
    }

    draw_legend(&mut out, &f, paths);
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::{find_equilibria, sample_field};

    #[test]
    fn empty_input_is_a_valid_axes_only_figure() {
        let svg = line_chart(&PlotSpec::titled("empty", "t", "m"), &[]).unwrap();
        assert!(svg.starts_with("<svg "));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(!svg.contains("<polyline"));
        assert!(svg.contains("empty"));
    }

    #[test]
    fn identical_inputs_render_byte_identical_output() {
        let s = vec![
            Series::new("m1", vec![0.0, 1.0, 2.0], vec![0.3, -0.2, 0.9]),
            Series::new("m2", vec![0.0, 1.0, 2.0], vec![-0.1, 0.4, -0.8]),
        ];
        let spec = PlotSpec::titled("means", "t", "m");
        let a = line_chart(&spec, &s).unwrap();
        let b = line_chart(&spec, &s).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.matches("<polyline").count(), 2);
    }

    #[test]
    fn non_finite_samples_split_the_line() {
        let s = vec![Series::new(
            "",
            (0..7).map(|i| i as f64).collect(),
            vec![0.0, 1.0, 2.0, f64::NAN, 2.0, 1.0, 0.0],
        )];
        let svg = line_chart(&PlotSpec::default(), &s).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
    }

    #[test]
    fn mismatched_columns_are_rejected() {
        let s = vec![Series::new("bad", vec![0.0, 1.0], vec![0.0])];
        assert!(line_chart(&PlotSpec::default(), &s).is_err());
    }

    #[test]
    fn phase_plane_marks_every_equilibrium() {
        for b in [2.5, 4.0, 7.0] {
            let report = find_equilibria(2.0, b).unwrap();
            let svg = phase_plane(&PlotSpec::default(), None, &[], Some(&report)).unwrap();
            assert_eq!(svg.matches("class=\"eq\"").count(), report.equilibria.len());
        }
    }

    #[test]
    fn field_overlay_is_deterministic() {
        let g = sample_field(2.0, 2.5, (-2.0, 2.0, -2.0, 2.0), 12).unwrap();
        let report = find_equilibria(2.0, 2.5).unwrap();
        let spec = PlotSpec::titled("portrait", "x", "y");
        let a = phase_plane(&spec, Some(&g), &[], Some(&report)).unwrap();
        let b = phase_plane(&spec, Some(&g), &[], Some(&report)).unwrap();
        assert_eq!(a, b);
        assert!(a.matches("<line").count() > 100);
    }

    #[test]
    fn tick_labels_use_the_fixed_formatter() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(2.5), "2.5");
        assert_eq!(fmt_num(-0.125), "-0.125");
        assert_eq!(fmt_num(20000.0), "20000");
        assert_eq!(fmt_num(1.0e-4), "1e-4");
        assert_eq!(fmt_num(2.0e6), "2e6");
    }
}
