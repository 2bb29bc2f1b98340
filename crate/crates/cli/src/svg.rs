//! Static SVG line and bar charts, written by hand.

use std::fmt::Write;

const PANEL_W: f64 = 520.0;
const PANEL_H: f64 = 340.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 34.0;
const MARGIN_B: f64 = 48.0;
/// Series longer than this are thinned by a fixed stride.
const MAX_POINTS: usize = 2000;

const COLORS: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub dashed: bool,
}

impl Series {
    pub fn new(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            x,
            y,
            dashed: false,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

#[derive(Debug, Clone)]
pub enum Chart {
    Lines {
        title: String,
        x_label: String,
        y_label: String,
        log_x: bool,
        log_y: bool,
        series: Vec<Series>,
    },
    Bars {
        title: String,
        y_label: String,
        bars: Vec<(String, f64)>,
    },
}

impl Chart {
    pub fn lines(title: &str, x_label: &str, y_label: &str, series: Vec<Series>) -> Self {
        Chart::Lines {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_x: false,
            log_y: false,
            series,
        }
    }

    pub fn semilog_y(title: &str, x_label: &str, y_label: &str, series: Vec<Series>) -> Self {
        Chart::Lines {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_x: false,
            log_y: true,
            series,
        }
    }

    pub fn log_log(title: &str, x_label: &str, y_label: &str, series: Vec<Series>) -> Self {
        Chart::Lines {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_x: true,
            log_y: true,
            series,
        }
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Axis range and ticks, in data units (log10 units for log axes).
struct Axis {
    lo: f64,
    hi: f64,
    ticks: Vec<f64>,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = values
            .filter(|v| v.is_finite() && (!log || *v > 0.0))
            .map(|v| if log { v.log10() } else { v })
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            });
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 * (1.0 + lo.abs()) {
            lo -= 0.5;
            hi += 0.5;
        }
        let ticks = if log {
            lo = lo.floor();
            hi = hi.ceil();
            let every = (((hi - lo) / 8.0).ceil() as i32).max(1);
            (lo as i32..=hi as i32)
                .filter(|d| (d - lo as i32) % every == 0)
                .map(f64::from)
                .collect()
        } else {
            let raw = (hi - lo) / 5.0;
            let mag = 10f64.powf(raw.log10().floor());
            let step = [1.0, 2.0, 5.0, 10.0]
                .iter()
                .map(|k| k * mag)
                .find(|s| *s >= raw)
                .unwrap_or(10.0 * mag);
            lo = (lo / step).floor() * step;
            hi = (hi / step).ceil() * step;
            let n = ((hi - lo) / step).round() as i64;
            (0..=n).map(|k| lo + k as f64 * step).collect()
        };
        Self { lo, hi, ticks, log }
    }

    fn map(&self, v: f64, a: f64, b: f64) -> Option<f64> {
        let v = if self.log {
            if v <= 0.0 {
                return None;
            }
            v.log10()
        } else {
            v
        };
        v.is_finite()
            .then(|| a + (v - self.lo) / (self.hi - self.lo) * (b - a))
    }

    fn label(&self, t: f64) -> String {
        if self.log {
            format!("1e{}", t as i32)
        } else {
            fmt_tick(t)
        }
    }
}

fn frame(out: &mut String, x0: f64, y0: f64, title: &str) -> (f64, f64, f64, f64) {
    let (l, r) = (x0 + MARGIN_L, x0 + PANEL_W - MARGIN_R);
    let (t, b) = (y0 + MARGIN_T, y0 + PANEL_H - MARGIN_B);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">{}</text>"#,
        (l + r) / 2.0,
        y0 + 20.0,
        esc(title)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{l:.1}" y="{t:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#333"/>"##,
        r - l,
        b - t
    );
    (l, r, t, b)
}

fn lines_panel(
    out: &mut String,
    x0: f64,
    y0: f64,
    (title, x_label, y_label): (&str, &str, &str),
    (log_x, log_y): (bool, bool),
    series: &[Series],
) {
    let (l, r, t, b) = frame(out, x0, y0, title);
    let ax = Axis::new(series.iter().flat_map(|s| s.x.iter().copied()), log_x);
    let ay = Axis::new(series.iter().flat_map(|s| s.y.iter().copied()), log_y);
    for &tv in &ax.ticks {
        let px = ax
            .map(if log_x { 10f64.powf(tv) } else { tv }, l, r)
            .unwrap_or(l);
        let _ = writeln!(
            out,
            r##"<line x1="{px:.1}" y1="{b:.1}" x2="{px:.1}" y2="{:.1}" stroke="#333"/><text x="{px:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"##,
            b + 5.0,
            b + 18.0,
            ax.label(tv)
        );
    }
    for &tv in &ay.ticks {
        let py = ay
            .map(if log_y { 10f64.powf(tv) } else { tv }, b, t)
            .unwrap_or(b);
        let _ = writeln!(
            out,
            r##"<line x1="{:.1}" y1="{py:.1}" x2="{l:.1}" y2="{py:.1}" stroke="#333"/><text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{}</text>"##,
            l - 5.0,
            l - 8.0,
            py + 4.0,
            ay.label(tv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">{}</text>"#,
        (l + r) / 2.0,
        b + 36.0,
        esc(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
        x0 + 16.0,
        (t + b) / 2.0,
        x0 + 16.0,
        (t + b) / 2.0,
        esc(y_label)
    );
    let legend_w = 34.0
        + 6.5
            * series
                .iter()
                .map(|s| s.label.chars().count())
                .max()
                .unwrap_or(0) as f64;
    let lx = r - legend_w - 4.0;
    let mut legend = String::new();
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let stride = s.x.len().div_ceil(MAX_POINTS).max(1);
        let last = s.x.len().saturating_sub(1);
        let mut d = String::new();
        let mut pen_down = false;
        for m in (0..s.x.len()).filter(|m| m % stride == 0 || *m == last) {
            match (ax.map(s.x[m], l, r), ay.map(s.y[m], b, t)) {
                (Some(px), Some(py)) => {
                    let _ = write!(d, "{}{px:.2},{py:.2} ", if pen_down { "L" } else { "M" });
                    pen_down = true;
                }
                _ => pen_down = false,
            }
        }
        let dash = if s.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        let _ = writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>"#,
            d.trim_end()
        );
        if s.x.len() <= 12 {
            for m in 0..s.x.len() {
                if let (Some(px), Some(py)) = (ax.map(s.x[m], l, r), ay.map(s.y[m], b, t)) {
                    let _ = writeln!(
                        out,
                        r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{color}"/>"#
                    );
                }
            }
        }
        let ly = t + 14.0 + 15.0 * k as f64;
        let _ = writeln!(
            legend,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
            lx + 4.0,
            lx + 24.0,
            lx + 29.0,
            ly + 4.0,
            esc(&s.label)
        );
    }
    if !series.is_empty() {
        let _ = writeln!(
            out,
            r#"<rect x="{lx:.1}" y="{:.1}" width="{legend_w:.1}" height="{:.1}" fill="white" fill-opacity="0.85"/>"#,
            t + 4.0,
            15.0 * series.len() as f64 + 6.0
        );
        out.push_str(&legend);
    }
}

fn bars_panel(
    out: &mut String,
    x0: f64,
    y0: f64,
    title: &str,
    y_label: &str,
    bars: &[(String, f64)],
) {
    let (l, r, t, b) = frame(out, x0, y0, title);
    let ay = Axis::new(bars.iter().map(|b| b.1).chain([0.0]), false);
    for &tv in &ay.ticks {
        let py = ay.map(tv, b, t).unwrap_or(b);
        let _ = writeln!(
            out,
            r##"<line x1="{:.1}" y1="{py:.1}" x2="{l:.1}" y2="{py:.1}" stroke="#333"/><text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{}</text>"##,
            l - 5.0,
            l - 8.0,
            py + 4.0,
            fmt_tick(tv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
        x0 + 16.0,
        (t + b) / 2.0,
        x0 + 16.0,
        (t + b) / 2.0,
        esc(y_label)
    );
    let slot = (r - l) / bars.len().max(1) as f64;
    let zero = ay.map(0.0, b, t).unwrap_or(b);
    for (k, (label, v)) in bars.iter().enumerate() {
        let top = ay.map(*v, b, t).unwrap_or(zero);
        let x = l + slot * (k as f64 + 0.2);
        let _ = writeln!(
            out,
            r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"/><text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text><text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10">{:.3e}</text>"#,
            top.min(zero),
            slot * 0.6,
            (zero - top).abs(),
            COLORS[k % COLORS.len()],
            x + slot * 0.3,
            b + 16.0,
            esc(label),
            x + slot * 0.3,
            top.min(zero) - 4.0,
            v
        );
    }
}

/// Lays charts out on a grid of `columns` and appends a metadata block
/// (`σ`, `N`, config, timestamp) below them.
pub fn render(charts: &[Chart], columns: usize, meta: &[String]) -> String {
    let columns = columns.max(1);
    let rows = charts.len().div_ceil(columns).max(1);
    let meta_h = 18.0 * meta.len() as f64 + 16.0;
    let width = PANEL_W * columns.min(charts.len().max(1)) as f64;
    let height = PANEL_H * rows as f64 + meta_h;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (k, c) in charts.iter().enumerate() {
        let x0 = PANEL_W * (k % columns) as f64;
        let y0 = PANEL_H * (k / columns) as f64;
        match c {
            Chart::Lines {
                title,
                x_label,
                y_label,
                log_x,
                log_y,
                series,
            } => lines_panel(
                &mut out,
                x0,
                y0,
                (title, x_label, y_label),
                (*log_x, *log_y),
                series,
            ),
            Chart::Bars {
                title,
                y_label,
                bars,
            } => bars_panel(&mut out, x0, y0, title, y_label, bars),
        }
    }
    let _ = writeln!(out, r##"<g font-size="12" fill="#333">"##);
    for (k, line) in meta.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{MARGIN_L:.1}" y="{:.1}">{}</text>"#,
            PANEL_H * rows as f64 + 18.0 * (k + 1) as f64,
            esc(line)
        );
    }
    out.push_str("</g>\n</svg>\n");
    out
}
