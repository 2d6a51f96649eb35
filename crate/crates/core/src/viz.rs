//! Static SVG timelines: one row per system plus an optional reference row.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::{Label, Segmentation};
use crate::error::{Error, Result};

const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#393b79", "#637939",
];

pub fn step_color(step: usize) -> &'static str {
    PALETTE[step % PALETTE.len()]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimelineStyle {
    /// Horizontal pixels per timestep.
    pub px_per_second: f64,
    pub row_height: f64,
    pub label_width: f64,
    /// Timesteps per second of video.
    pub fps: f64,
}

impl Default for TimelineStyle {
    fn default() -> Self {
        TimelineStyle {
            px_per_second: 4.0,
            row_height: 20.0,
            label_width: 90.0,
            fps: 1.0,
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders `rows` (name, segmentation) as stacked bars. Every region is a
/// `rect` with class `region`; background regions have no fill. All rows
/// must cover the same number of timesteps.
pub fn timeline_svg(title: &str, rows: &[(&str, &Segmentation)], step_names: &[String], style: &TimelineStyle) -> Result<String> {
    let t_len = rows.first().map_or(0, |(_, s)| s.len());
    if let Some((name, s)) = rows.iter().find(|(_, s)| s.len() != t_len) {
        return Err(Error::Validation(format!(
            "row {name} covers {} timesteps, expected {t_len}",
            s.len()
        )));
    }
    let scale = style.px_per_second / style.fps;
    let width = style.label_width + t_len as f64 * scale + 10.0;
    let height = (rows.len() as f64 + 2.5) * style.row_height + 10.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<title>{}</title>"#, escape(title));
    for (i, (name, seg)) in rows.iter().enumerate() {
        let y = (i as f64 + 0.25) * style.row_height;
        let h = style.row_height * 0.8;
        let _ = writeln!(
            svg,
            r#"<g class="row" data-name="{0}"><text x="2" y="{1}">{0}</text>"#,
            escape(name),
            y + h * 0.75
        );
        let mut start = 0;
        for region in &seg.regions {
            let x = style.label_width + start as f64 * scale;
            let w = region.duration as f64 * scale;
            let (fill, name) = match region.label {
                Label::Background => ("none".to_string(), "background".to_string()),
                Label::Step(j) => (
                    step_color(j).to_string(),
                    step_names.get(j).cloned().unwrap_or_else(|| format!("step {j}")),
                ),
            };
            let _ = writeln!(
                svg,
                r#"<rect class="region" x="{x}" y="{y}" width="{w}" height="{h}" fill="{fill}" stroke="{stroke}" stroke-width="0.5" data-start="{start}" data-duration="{d}"><title>{label}</title></rect>"#,
                stroke = if fill == "none" { "#cccccc" } else { "none" },
                d = region.duration,
                label = escape(&name),
            );
            start += region.duration;
        }
        svg.push_str("</g>\n");
    }
    let axis_y = (rows.len() as f64 + 0.5) * style.row_height;
    let seconds = t_len as f64 / style.fps;
    let tick = [1.0, 5.0, 10.0, 30.0, 60.0, 120.0, 300.0]
        .into_iter()
        .find(|&s| seconds / s <= 12.0)
        .unwrap_or(600.0);
    let _ = writeln!(
        svg,
        r##"<line x1="{0}" y1="{axis_y}" x2="{1}" y2="{axis_y}" stroke="#000"/>"##,
        style.label_width,
        style.label_width + seconds * style.px_per_second
    );
    let mut s = 0.0;
    while s <= seconds {
        let x = style.label_width + s * style.px_per_second;
        let _ = writeln!(
            svg,
            r##"<text x="{x}" y="{0}" text-anchor="middle">{s}</text>"##,
            axis_y + style.row_height * 0.8
        );
        s += tick;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{0}" y="{1}">seconds</text>"#,
        2,
        axis_y + style.row_height * 0.8
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn write_timeline(
    path: &Path,
    title: &str,
    rows: &[(&str, &Segmentation)],
    step_names: &[String],
    style: &TimelineStyle,
) -> Result<()> {
    let svg = timeline_svg(title, rows, step_names, style)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Background as Bkg, Step};

    fn rects(svg: &str) -> Vec<(f64, String)> {
        svg.lines()
            .filter(|l| l.contains(r#"class="region""#))
            .map(|l| {
                let attr = |k: &str| {
                    let i = l.find(&format!(" {k}=\"")).unwrap() + k.len() + 3;
                    l[i..i + l[i..].find('"').unwrap()].to_string()
                };
                (attr("width").parse().unwrap(), attr("fill"))
            })
            .collect()
    }

    fn rows_of(svg: &str) -> Vec<&str> {
        svg.split(r#"<g class="row""#).skip(1).collect()
    }

    #[test]
    fn widths_and_counts() {
        let seg = Segmentation::from_pairs(&[(Bkg, 3), (Step(0), 5), (Bkg, 2), (Step(2), 4)]).unwrap();
        let style = TimelineStyle::default();
        let svg = timeline_svg("v", &[("GT", &seg)], &[], &style).unwrap();
        let r = rects(&svg);
        assert_eq!(r.len(), seg.regions.len());
        let total: f64 = r.iter().map(|(w, _)| w).sum();
        assert!((total - 14.0 * style.px_per_second).abs() < 1e-9);
        assert_eq!(r[0].1, "none");
        assert_eq!(r[1].1, step_color(0));
    }

    #[test]
    fn identical_rows_render_identically() {
        let seg = Segmentation::from_pairs(&[(Step(1), 4), (Bkg, 6)]).unwrap();
        let svg = timeline_svg("v", &[("GT", &seg), ("GT", &seg)], &["a".into(), "b".into()], &TimelineStyle::default()).unwrap();
        let rows = rows_of(&svg);
        assert_eq!(rects(rows[0]), rects(rows[1]));
    }

    #[test]
    fn length_mismatch() {
        let a = Segmentation::from_pairs(&[(Bkg, 4)]).unwrap();
        let b = Segmentation::from_pairs(&[(Bkg, 5)]).unwrap();
        assert!(timeline_svg("v", &[("a", &a), ("b", &b)], &[], &TimelineStyle::default()).is_err());
    }
}
