//! Grouped bar charts as standalone SVG.
//!
//! Layout depends only on the number of groups and bars, and every number is
//! printed with fixed precision, so equal inputs give byte-identical files.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use palmforge_core::summary::min_mean_max;

use crate::error::{IoContext, Result};
use crate::experiment::Summary;

const LEFT: f64 = 56.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PLOT_HEIGHT: f64 = 240.0;
const BAR_WIDTH: f64 = 18.0;
const BAR_GAP: f64 = 4.0;
const GROUP_GAP: f64 = 28.0;
const PALETTE: [&str; 6] = ["#2f7d4f", "#4f9dd9", "#d98f2f", "#9b59b6", "#c0392b", "#7f8c8d"];

#[derive(Debug, Clone, PartialEq)]
pub struct Bar {
    pub label: String,
    /// `None` leaves an empty slot.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarGroup {
    pub label: String,
    pub bars: Vec<Bar>,
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

fn group_width(g: &BarGroup) -> f64 {
    let n = g.bars.len().max(1) as f64;
    n * BAR_WIDTH + (n - 1.0) * BAR_GAP
}

/// Renders a grouped bar chart with a fixed 0 to 1 value axis.
pub fn bar_chart_svg(title: &str, y_label: &str, groups: &[BarGroup]) -> String {
    let inner: f64 = groups.iter().map(group_width).sum::<f64>() + GROUP_GAP * (groups.len() + 1) as f64;
    let width = LEFT + inner + RIGHT;
    let height = TOP + PLOT_HEIGHT + BOTTOM;
    let base = TOP + PLOT_HEIGHT;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{width:.0}" height="{height:.0}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
        TOP + PLOT_HEIGHT / 2.0,
        TOP + PLOT_HEIGHT / 2.0,
        escape(y_label)
    );
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let y = base - v * PLOT_HEIGHT;
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            width - RIGHT
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT:.2}" y1="{base:.2}" x2="{:.2}" y2="{base:.2}" stroke="black"/>"#,
        width - RIGHT
    );

    let mut x = LEFT + GROUP_GAP;
    for g in groups {
        let gw = group_width(g);
        let _ = writeln!(s, r#"<g class="group" data-label="{}">"#, escape(&g.label));
        for (i, bar) in g.bars.iter().enumerate() {
            let bx = x + i as f64 * (BAR_WIDTH + BAR_GAP);
            if let Some(v) = bar.value {
                let h = v.clamp(0.0, 1.0) * PLOT_HEIGHT;
                let _ = writeln!(
                    s,
                    r#"<rect class="bar" x="{bx:.2}" y="{:.2}" width="{BAR_WIDTH:.2}" height="{h:.2}" fill="{}"><title>{}: {v:.4}</title></rect>"#,
                    base - h,
                    PALETTE[i % PALETTE.len()],
                    escape(&bar.label)
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="9">{}</text>"#,
                bx + BAR_WIDTH / 2.0,
                base + 12.0,
                escape(&bar.label)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x + gw / 2.0,
            base + 30.0,
            escape(&g.label)
        );
        s.push_str("</g>\n");
        x += gw + GROUP_GAP;
    }
    s.push_str("</svg>\n");
    s
}

/// One group per variant, one bar per repetition.
pub fn map_by_variant(summary: &Summary) -> Vec<BarGroup> {
    summary
        .rows
        .iter()
        .map(|row| BarGroup {
            label: row.variant.clone(),
            bars: (1..=row.repetitions)
                .map(|rep| Bar {
                    label: format!("rep{rep}"),
                    value: row.results.iter().find(|r| r.rep == rep).map(|r| r.map),
                })
                .collect(),
        })
        .collect()
}

/// One group per tag value, one bar per variant (mean over repetitions).
pub fn map_by_group(summary: &Summary) -> Vec<BarGroup> {
    let values: BTreeSet<&String> = summary
        .rows
        .iter()
        .flat_map(|r| r.results.iter().flat_map(|x| x.group_maps.keys()))
        .collect();
    values
        .into_iter()
        .map(|value| BarGroup {
            label: value.clone(),
            bars: summary
                .rows
                .iter()
                .map(|row| {
                    let maps: Vec<f64> = row.results.iter().filter_map(|r| r.group_maps.get(value).copied()).collect();
                    Bar {
                        label: row.variant.clone(),
                        value: min_mean_max(&maps).map(|m| m.1),
                    }
                })
                .collect(),
        })
        .collect()
}

fn chart_key(summary: &Summary) -> Option<String> {
    if let Some(k) = &summary.group_key {
        return Some(k.clone());
    }
    let keys: BTreeSet<&str> = summary
        .rows
        .iter()
        .filter_map(|r| r.metadata.get("group_by").map(String::as_str))
        .collect();
    keys.into_iter().next().map(str::to_string)
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// All charts for a summary as `(file name, svg)`.
pub fn summary_charts(summary: &Summary) -> Vec<(String, String)> {
    let y = format!("mAP@{}", summary.iou_threshold);
    let mut charts = vec![(
        "map_by_variant.svg".to_string(),
        bar_chart_svg(&format!("{y} by variant"), &y, &map_by_variant(summary)),
    )];
    let groups = map_by_group(summary);
    if !groups.is_empty() {
        let key = chart_key(summary).unwrap_or_else(|| "group".into());
        charts.push((
            format!("map_by_{}.svg", file_safe(&key)),
            bar_chart_svg(&format!("{y} by {key}"), &y, &groups),
        ));
    }
    charts
}

pub fn write_charts(summary: &Summary, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).at(dir)?;
    let mut written = Vec::new();
    for (name, svg) in summary_charts(summary) {
        let path = dir.join(name);
        fs::write(&path, svg).at(&path)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(label: &str, values: &[f64]) -> BarGroup {
        BarGroup {
            label: label.into(),
            bars: values
                .iter()
                .enumerate()
                .map(|(i, &v)| Bar { label: format!("rep{}", i + 1), value: Some(v) })
                .collect(),
        }
    }

    #[test]
    fn cardinality() {
        let groups = [group("a", &[0.1, 0.2, 0.3]), group("b", &[0.4, 0.5, 0.6]), group("c", &[0.7, 0.8, 0.9])];
        let svg = bar_chart_svg("t", "y", &groups);
        assert_eq!(svg.matches(r#"<rect class="bar""#).count(), 9);
        assert_eq!(svg.matches(r#"<g class="group""#).count(), 3);
        let single = bar_chart_svg("t", "y", &groups[..1]);
        assert_eq!(single.matches(r#"<g class="group""#).count(), 1);
    }

    #[test]
    fn escapes_labels() {
        let svg = bar_chart_svg("a<b", "y", &[group("x&y", &[0.5])]);
        assert!(svg.contains("a&lt;b"));
        assert!(svg.contains("x&amp;y"));
        assert!(!svg.contains("x&y"));
    }

    #[test]
    fn missing_values_leave_a_slot() {
        let mut g = group("a", &[0.5, 0.5]);
        g.bars[1].value = None;
        let svg = bar_chart_svg("t", "y", &[g]);
        assert_eq!(svg.matches(r#"<rect class="bar""#).count(), 1);
        assert!(svg.contains(">rep2</text>"));
    }
}
