use std::fmt::Write as _;
use std::path::Path;

use image::{ImageBuffer, Rgb, RgbImage};
use rust_decimal::prelude::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::chart::{ChartKind, ChartSpec};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];
const RIGHT_AXIS: &str = "#d62728";
const GRID: &str = "#dddddd";
const INK: &str = "#333333";
const MAX_X_LABELS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartFormat {
    #[default]
    Svg,
    Png,
}

impl ChartFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ChartFormat::Svg => "svg",
            ChartFormat::Png => "png",
        }
    }

    pub fn parse(s: &str) -> Option<ChartFormat> {
        match s.to_ascii_lowercase().as_str() {
            "svg" => Some(ChartFormat::Svg),
            "png" => Some(ChartFormat::Png),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Anchor {
    Start,
    Middle,
    End,
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Rect {
        x: f64,
        y: f64,
        w: f64,
        h: f64,
        fill: &'static str,
    },
    Line {
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
        stroke: &'static str,
        width: f64,
    },
    Path {
        points: Vec<(f64, f64)>,
        stroke: &'static str,
    },
    Dot {
        cx: f64,
        cy: f64,
        r: f64,
        fill: &'static str,
    },
    Text {
        x: f64,
        y: f64,
        size: f64,
        anchor: Anchor,
        rotate: f64,
        fill: &'static str,
        content: String,
    },
}

fn text(x: f64, y: f64, size: f64, anchor: Anchor, content: impl Into<String>) -> Shape {
    Shape::Text {
        x,
        y,
        size,
        anchor,
        rotate: 0.0,
        fill: INK,
        content: content.into(),
    }
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nf = if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    nf * mag
}

/// Linear value axis with rounded tick positions.
struct Axis {
    lo: f64,
    hi: f64,
    step: f64,
    top: f64,
    bottom: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, top: f64, bottom: f64) -> Axis {
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if (hi - lo).abs() < f64::EPSILON {
            hi = lo + 1.0;
        }
        let step = nice_step(hi - lo);
        Axis {
            lo: (lo / step).floor() * step,
            hi: (hi / step).ceil() * step,
            step,
            top,
            bottom,
        }
    }

    fn y(&self, v: f64) -> f64 {
        self.bottom - (v - self.lo) / (self.hi - self.lo) * (self.bottom - self.top)
    }

    fn ticks(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step).round() as i64;
        (0..=n).map(|i| self.lo + i as f64 * self.step).collect()
    }

    fn label(&self, v: f64) -> String {
        let v = if v.abs() < self.step * 1e-9 { 0.0 } else { v };
        if self.step >= 1.0 {
            format!("{v:.0}")
        } else {
            let digits = (-self.step.log10()).ceil() as usize;
            format!("{v:.digits$}")
        }
    }
}

fn short(s: &str, max: usize) -> String {
    if s.chars().count() <= max {
        s.to_string()
    } else {
        let cut: String = s.chars().take(max - 3).collect();
        format!("{cut}...")
    }
}

fn looks_like_dates(categories: &[String]) -> bool {
    !categories.is_empty()
        && categories.iter().all(|c| {
            let b = c.as_bytes();
            b.len() >= 7 && b[..4].iter().all(u8::is_ascii_digit) && b[4] == b'-'
        })
}

fn layout(spec: &ChartSpec) -> Vec<Shape> {
    let mut out = vec![Shape::Rect {
        x: 0.0,
        y: 0.0,
        w: WIDTH,
        h: HEIGHT,
        fill: "#ffffff",
    }];
    out.push(text(WIDTH / 2.0, 28.0, 16.0, Anchor::Middle, short(&spec.title, 90)));
    if spec.kind == ChartKind::Placeholder || spec.categories.is_empty() {
        let msg = spec
            .message
            .clone()
            .unwrap_or_else(|| super::chart::PLACEHOLDER_MESSAGE.into());
        out.push(text(WIDTH / 2.0, HEIGHT / 2.0, 14.0, Anchor::Middle, msg));
        return out;
    }

    let dual = spec.kind == ChartKind::DualAxis;
    let (left, right, top, bottom) = (
        80.0,
        if dual { WIDTH - 80.0 } else { WIDTH - 30.0 },
        50.0,
        HEIGHT - 130.0,
    );
    let f = |d: &rust_decimal::Decimal| d.to_f64().unwrap_or(0.0);
    let left_series: Vec<_> = if dual {
        spec.series[..1].iter().collect()
    } else {
        spec.series.iter().collect()
    };
    let axis = Axis::new(left_series.iter().flat_map(|s| s.values.iter().map(f)), top, bottom);

    for t in axis.ticks() {
        let y = axis.y(t);
        out.push(Shape::Line {
            x1: left,
            y1: y,
            x2: right,
            y2: y,
            stroke: GRID,
            width: 1.0,
        });
        out.push(text(left - 6.0, y + 4.0, 11.0, Anchor::End, axis.label(t)));
    }
    out.push(Shape::Line {
        x1: left,
        y1: top,
        x2: left,
        y2: bottom,
        stroke: INK,
        width: 1.0,
    });
    out.push(Shape::Line {
        x1: left,
        y1: bottom,
        x2: right,
        y2: bottom,
        stroke: INK,
        width: 1.0,
    });

    let n = spec.categories.len();
    let band = (right - left) / n as f64;
    let cx = |i: usize| left + band * (i as f64 + 0.5);
    let every = n.div_ceil(MAX_X_LABELS);
    for (i, c) in spec.categories.iter().enumerate() {
        if i % every != 0 {
            continue;
        }
        out.push(Shape::Line {
            x1: cx(i),
            y1: bottom,
            x2: cx(i),
            y2: bottom + 4.0,
            stroke: INK,
            width: 1.0,
        });
        out.push(Shape::Text {
            x: cx(i),
            y: bottom + 14.0,
            size: 11.0,
            anchor: Anchor::End,
            rotate: -45.0,
            fill: INK,
            content: short(c, 18),
        });
    }
    out.push(text(
        (left + right) / 2.0,
        HEIGHT - 12.0,
        13.0,
        Anchor::Middle,
        short(&spec.x_label, 60),
    ));
    out.push(Shape::Text {
        x: 20.0,
        y: (top + bottom) / 2.0,
        size: 13.0,
        anchor: Anchor::Middle,
        rotate: -90.0,
        fill: if dual { PALETTE[0] } else { INK },
        content: short(&spec.y_label, 40),
    });

    let bars = |out: &mut Vec<Shape>, series: &[&super::chart::Series]| {
        let k = series.len() as f64;
        let w = band * 0.8 / k;
        let zero = axis.y(0.0);
        for (si, s) in series.iter().enumerate() {
            for (i, v) in s.values.iter().enumerate() {
                let y = axis.y(f(v));
                out.push(Shape::Rect {
                    x: cx(i) - band * 0.4 + w * si as f64,
                    y: y.min(zero),
                    w,
                    h: (zero - y).abs(),
                    fill: PALETTE[si % PALETTE.len()],
                });
            }
        }
    };
    let line = |out: &mut Vec<Shape>, values: &[rust_decimal::Decimal], ax: &Axis, color: &'static str| {
        let pts: Vec<(f64, f64)> = values.iter().enumerate().map(|(i, v)| (cx(i), ax.y(f(v)))).collect();
        if pts.len() > 1 {
            out.push(Shape::Path {
                points: pts.clone(),
                stroke: color,
            });
        }
        if pts.len() <= MAX_X_LABELS {
            for (x, y) in pts {
                out.push(Shape::Dot {
                    cx: x,
                    cy: y,
                    r: 3.0,
                    fill: color,
                });
            }
        }
    };

    match spec.kind {
        ChartKind::Bar => bars(&mut out, &left_series),
        ChartKind::Line => {
            for (si, s) in spec.series.iter().enumerate() {
                line(&mut out, &s.values, &axis, PALETTE[si % PALETTE.len()]);
            }
        }
        ChartKind::DualAxis => {
            if looks_like_dates(&spec.categories) {
                line(&mut out, &spec.series[0].values, &axis, PALETTE[0]);
            } else {
                bars(&mut out, &left_series);
            }
            let raxis = Axis::new(spec.series[1].values.iter().map(f), top, bottom);
            out.push(Shape::Line {
                x1: right,
                y1: top,
                x2: right,
                y2: bottom,
                stroke: RIGHT_AXIS,
                width: 1.0,
            });
            for t in raxis.ticks() {
                let y = raxis.y(t);
                out.push(Shape::Line {
                    x1: right,
                    y1: y,
                    x2: right + 4.0,
                    y2: y,
                    stroke: RIGHT_AXIS,
                    width: 1.0,
                });
                out.push(Shape::Text {
                    x: right + 6.0,
                    y: y + 4.0,
                    size: 11.0,
                    anchor: Anchor::Start,
                    rotate: 0.0,
                    fill: RIGHT_AXIS,
                    content: raxis.label(t),
                });
            }
            out.push(Shape::Text {
                x: WIDTH - 12.0,
                y: (top + bottom) / 2.0,
                size: 13.0,
                anchor: Anchor::Middle,
                rotate: 90.0,
                fill: RIGHT_AXIS,
                content: short(&spec.series[1].name, 40),
            });
            line(&mut out, &spec.series[1].values, &raxis, RIGHT_AXIS);
        }
        ChartKind::Placeholder => unreachable!(),
    }

    if spec.series.len() > 1 && !dual {
        for (si, s) in spec.series.iter().take(PALETTE.len()).enumerate() {
            let y = top + 8.0 + 16.0 * si as f64;
            out.push(Shape::Rect {
                x: right - 130.0,
                y: y - 8.0,
                w: 10.0,
                h: 10.0,
                fill: PALETTE[si],
            });
            out.push(text(right - 115.0, y + 1.0, 11.0, Anchor::Start, short(&s.name, 18)));
        }
    }
    out
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
    out
}

/// SVG 1.1 document. Coordinates are printed with one decimal so output is
/// byte-identical for identical specs.
pub fn to_svg(spec: &ChartSpec) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    for shape in layout(spec) {
        let _ = match shape {
            Shape::Rect { x, y, w, h, fill } => {
                writeln!(
                    s,
                    r#"<rect x="{x:.1}" y="{y:.1}" width="{w:.1}" height="{h:.1}" fill="{fill}"/>"#
                )
            }
            Shape::Line {
                x1,
                y1,
                x2,
                y2,
                stroke,
                width,
            } => writeln!(
                s,
                r#"<line x1="{x1:.1}" y1="{y1:.1}" x2="{x2:.1}" y2="{y2:.1}" stroke="{stroke}" stroke-width="{width:.1}"/>"#
            ),
            Shape::Path { points, stroke } => {
                let pts: Vec<String> = points.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
                writeln!(
                    s,
                    r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="2.0"/>"#,
                    pts.join(" ")
                )
            }
            Shape::Dot { cx, cy, r, fill } => {
                writeln!(s, r#"<circle cx="{cx:.1}" cy="{cy:.1}" r="{r:.1}" fill="{fill}"/>"#)
            }
            Shape::Text {
                x,
                y,
                size,
                anchor,
                rotate,
                fill,
                content,
            } => {
                let anchor = match anchor {
                    Anchor::Start => "start",
                    Anchor::Middle => "middle",
                    Anchor::End => "end",
                };
                let transform = if rotate != 0.0 {
                    format!(r#" transform="rotate({rotate:.1} {x:.1} {y:.1})""#)
                } else {
                    String::new()
                };
                writeln!(
                    s,
                    r#"<text x="{x:.1}" y="{y:.1}" font-size="{size:.1}" text-anchor="{anchor}" fill="{fill}"{transform}>{}</text>"#,
                    escape(&content)
                )
            }
        };
    }
    s.push_str("</svg>\n");
    s
}

fn rgb(hex: &str) -> Rgb<u8> {
    let v = u32::from_str_radix(hex.trim_start_matches('#'), 16).unwrap_or(0);
    Rgb([(v >> 16) as u8, (v >> 8) as u8, v as u8])
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

fn segment(img: &mut RgbImage, (x0, y0): (f64, f64), (x1, y1): (f64, f64), c: Rgb<u8>, thick: bool) {
    let steps = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as i64;
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let x = (x0 + (x1 - x0) * t).round() as i64;
        let y = (y0 + (y1 - y0) * t).round() as i64;
        put(img, x, y, c);
        if thick {
            put(img, x + 1, y, c);
            put(img, x, y + 1, c);
        }
    }
}

/// Raster variant drawing the same geometry. Text is not rasterized.
pub fn to_png(spec: &ChartSpec) -> Result<Vec<u8>, image::ImageError> {
    let mut img: RgbImage = ImageBuffer::from_pixel(WIDTH as u32, HEIGHT as u32, Rgb([255, 255, 255]));
    for shape in layout(spec) {
        match shape {
            Shape::Rect { x, y, w, h, fill } => {
                let c = rgb(fill);
                for py in y.round() as i64..(y + h).round() as i64 {
                    for px in x.round() as i64..(x + w).round() as i64 {
                        put(&mut img, px, py, c);
                    }
                }
            }
            Shape::Line {
                x1,
                y1,
                x2,
                y2,
                stroke,
                width,
            } => segment(&mut img, (x1, y1), (x2, y2), rgb(stroke), width > 1.0),
            Shape::Path { points, stroke } => {
                for w in points.windows(2) {
                    segment(&mut img, w[0], w[1], rgb(stroke), true);
                }
            }
            Shape::Dot { cx, cy, r, fill } => {
                let c = rgb(fill);
                let ri = r.ceil() as i64;
                for dy in -ri..=ri {
                    for dx in -ri..=ri {
                        if ((dx * dx + dy * dy) as f64) <= r * r {
                            put(&mut img, cx.round() as i64 + dx, cy.round() as i64 + dy, c);
                        }
                    }
                }
            }
            Shape::Text { .. } => {}
        }
    }
    let mut bytes = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)?;
    Ok(bytes)
}

pub fn render_chart(spec: &ChartSpec, path: &Path, format: ChartFormat) -> std::io::Result<()> {
    let bytes = match format {
        ChartFormat::Svg => to_svg(spec).into_bytes(),
        ChartFormat::Png => to_png(spec).map_err(std::io::Error::other)?,
    };
    std::fs::write(path, bytes)
}
