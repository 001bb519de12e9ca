//! SVG scatter plots of a 2-D embedding.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::embedding::Embedding2D;
use crate::error::{Error, Result};
use crate::io::write_string_atomic;

pub const CANVAS: f64 = 800.0;
pub const POINT_RADIUS: f64 = 2.0;
const PAD: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub fn color_of(index: usize) -> &'static str {
    PALETTE[index % PALETTE.len()]
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn of(values: impl Iterator<Item = f64>) -> Axis {
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Axis { lo, hi }
    }

    /// Maps into [0, 1]; a zero-width axis puts everything in the middle.
    fn unit(&self, v: f64) -> f64 {
        if self.hi > self.lo {
            (v - self.lo) / (self.hi - self.lo)
        } else {
            0.5
        }
    }
}

/// SVG document with the points of `tags` (all tags when empty). Axis ranges
/// always cover the whole embedding so per-tag plots share a frame.
pub fn scatter_svg(e: &Embedding2D, tags: &[String]) -> Result<String> {
    if e.is_empty() {
        return Err(Error::Parameter("cannot plot an empty embedding".into()));
    }
    let all_tags = e.tags();
    let shown: Vec<&String> = if tags.is_empty() { all_tags.iter().collect() } else { tags.iter().collect() };
    let xa = Axis::of(e.points.iter().map(|p| p[0]));
    let ya = Axis::of(e.points.iter().map(|p| p[1]));
    let span = CANVAS - 2.0 * PAD;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{CANVAS}" height="{CANVAS}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{span}" height="{span}" fill="none" stroke="gray"/>"#
    );
    let bottom = CANVAS - PAD;
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="{}" font-size="12" font-family="sans-serif">{:.4}</text>"#,
        bottom + 18.0,
        xa.lo
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" font-family="sans-serif" text-anchor="end">{:.4}</text>"#,
        CANVAS - PAD,
        bottom + 18.0,
        xa.hi
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{bottom}" font-size="12" font-family="sans-serif" text-anchor="end">{:.4}</text>"#,
        PAD - 6.0,
        ya.lo
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" font-family="sans-serif" text-anchor="end">{:.4}</text>"#,
        PAD - 6.0,
        PAD + 12.0,
        ya.hi
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="13" font-family="sans-serif" text-anchor="middle">dim1</text>"#,
        CANVAS / 2.0,
        bottom + 36.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" font-size="13" font-family="sans-serif" text-anchor="middle" transform="rotate(-90 18 {})">dim2</text>"#,
        CANVAS / 2.0,
        CANVAS / 2.0
    );

    for (li, tag) in shown.iter().enumerate() {
        // Colour follows the tag's position in the full embedding, so a
        // dataset keeps its colour across the per-tag and overlay plots.
        let ci = all_tags.iter().position(|t| t == *tag).unwrap_or(li);
        let fill = color_of(ci);
        let _ = writeln!(
            s,
            r#"<g fill="{fill}" fill-opacity="0.7"><title>{}</title>"#,
            escape(tag)
        );
        for p in e.points_of(tag) {
            let cx = PAD + xa.unit(p[0]) * span;
            let cy = CANVAS - PAD - ya.unit(p[1]) * span;
            let _ = writeln!(s, r#"<circle cx="{cx:.3}" cy="{cy:.3}" r="{POINT_RADIUS}"/>"#);
        }
        let _ = writeln!(s, "</g>");
        let ly = 20.0 + 16.0 * li as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{fill}"/><text x="{}" y="{ly}" font-size="12" font-family="sans-serif">{}</text>"#,
            CANVAS - 150.0,
            ly - 9.0,
            CANVAS - 135.0,
            escape(tag)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn file_safe(tag: &str) -> String {
    tag.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Writes `{stem}_{tag}.svg` for every tag plus `{stem}_overlay.svg` into
/// `dir` and returns the paths in that order.
pub fn render_scatter(e: &Embedding2D, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    if e.is_empty() {
        return Err(Error::Parameter("cannot plot an empty embedding".into()));
    }
    let mut paths = Vec::new();
    for tag in e.tags() {
        let path = dir.join(format!("{stem}_{}.svg", file_safe(&tag)));
        write_string_atomic(&path, &scatter_svg(e, std::slice::from_ref(&tag))?)?;
        paths.push(path);
    }
    let path = dir.join(format!("{stem}_overlay.svg"));
    write_string_atomic(&path, &scatter_svg(e, &[])?)?;
    paths.push(path);
    Ok(paths)
}
