//! Static SVG charts of training metrics and diagnostics.

use std::fmt::Write;

use cotagree_core::selfplay::{running_mean, IterationRecord, ENTROPY_WINDOW};

use crate::commands::DiagnoseReport;

const W: f64 = 720.0;
const H: f64 = 360.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 44.0;
const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub struct Series<'a> {
    pub name: &'a str,
    pub values: Vec<f64>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = write!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = write!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, (LEFT + W - RIGHT) / 2.0, escape(title));
}

fn y_range(series: &[Series], refs: &[(f64, &str)]) -> (f64, f64) {
    let all = series.iter().flat_map(|s| s.values.iter().copied()).chain(refs.iter().map(|r| r.0));
    let (mut lo, mut hi) = all.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Line chart over the iteration index, with optional horizontal reference
/// lines.
pub fn line_chart(title: &str, series: &[Series], refs: &[(f64, &str)]) -> String {
    let n = series.iter().map(|s| s.values.len()).max().unwrap_or(0);
    let (lo, hi) = y_range(series, refs);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let x = |i: usize| LEFT + if n > 1 { pw * i as f64 / (n - 1) as f64 } else { 0.0 };
    let y = |v: f64| TOP + ph * (1.0 - (v - lo) / (hi - lo));

    let mut out = String::new();
    header(&mut out, title);
    let _ = write!(out, r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##);
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let _ = write!(out, r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.2}</text>"#, LEFT - 6.0, y(v) + 4.0);
    }
    for k in 0..=4 {
        let i = (n.saturating_sub(1)) * k / 4;
        let _ = write!(out, r#"<text x="{:.1}" y="{}" text-anchor="middle">{i}</text>"#, x(i), H - BOTTOM + 16.0);
    }
    let _ = write!(out, r#"<text x="{}" y="{}" text-anchor="middle">iteration</text>"#, LEFT + pw / 2.0, H - 8.0);
    for (v, label) in refs {
        let yy = y(*v);
        let _ = write!(
            out,
            r##"<line x1="{LEFT}" x2="{}" y1="{yy:.1}" y2="{yy:.1}" stroke="#999" stroke-dasharray="4 3"/><text x="{}" y="{:.1}" fill="#666">{}</text>"##,
            LEFT + pw,
            LEFT + pw + 4.0,
            yy + 4.0,
            escape(label),
        );
    }
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        if !s.values.is_empty() {
            let pts: Vec<String> = s.values.iter().enumerate().map(|(i, &v)| format!("{:.1},{:.1}", x(i), y(v))).collect();
            let _ = write!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.3" points="{}"/>"#, pts.join(" "));
        }
        let ly = TOP + 14.0 + 18.0 * k as f64;
        let lx = W - RIGHT + 12.0;
        let _ = write!(
            out,
            r#"<line x1="{lx}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            escape(s.name),
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Vertical bars, one per labelled value.
pub fn bar_chart(title: &str, labels: &[String], values: &[f64]) -> String {
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let hi = values.iter().copied().fold(0.0f64, f64::max).max(1e-9) * 1.1;
    let mut out = String::new();
    header(&mut out, title);
    let _ = write!(out, r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##);
    let slot = pw / values.len().max(1) as f64;
    for (k, (label, &v)) in labels.iter().zip(values).enumerate() {
        let h = ph * (v.max(0.0) / hi);
        let bx = LEFT + slot * k as f64 + slot * 0.15;
        let _ = write!(
            out,
            r##"<rect x="{bx:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="#1f77b4"/><text x="{:.1}" y="{}" text-anchor="middle">{}</text><text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10">{v:.3}</text>"##,
            TOP + ph - h,
            slot * 0.7,
            bx + slot * 0.35,
            H - BOTTOM + 16.0,
            escape(label),
            bx + slot * 0.35,
            TOP + ph - h - 4.0
        );
    }
    let _ = write!(out, r#"<text x="{}" y="{}" text-anchor="middle">step</text>"#, LEFT + pw / 2.0, H - 8.0);
    out.push_str("</svg>\n");
    out
}

/// Grid of leave-one-out similarities; blank where a member has no step.
pub fn heatmap(title: &str, rows: &[String], cols: &[String], values: &[Vec<Option<f64>>]) -> String {
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let (cw, rh) = (pw / cols.len().max(1) as f64, ph / rows.len().max(1) as f64);
    let mut out = String::new();
    header(&mut out, title);
    for (r, row) in values.iter().enumerate() {
        let _ = write!(out, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, LEFT - 6.0, TOP + rh * (r as f64 + 0.5) + 4.0, escape(&rows[r]));
        for (c, v) in row.iter().enumerate() {
            let Some(v) = v else { continue };
            // white at 0 or below, dark blue at 1
            let t = v.clamp(0.0, 1.0);
            let shade = |full: f64| (255.0 - t * (255.0 - full)).round() as u8;
            let _ = write!(
                out,
                r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="#{:02x}{:02x}{:02x}" stroke="white"/><text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10" fill="{}">{v:.2}</text>"##,
                LEFT + cw * c as f64,
                TOP + rh * r as f64,
                cw,
                rh,
                shade(8.0),
                shade(48.0),
                shade(107.0),
                LEFT + cw * (c as f64 + 0.5),
                TOP + rh * (r as f64 + 0.5) + 4.0,
                if t > 0.6 { "white" } else { "black" }
            );
        }
    }
    for (c, label) in cols.iter().enumerate() {
        let _ = write!(out, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, LEFT + cw * (c as f64 + 0.5), H - BOTTOM + 16.0, escape(label));
    }
    let _ = write!(out, r#"<text x="{}" y="{}" text-anchor="middle">step</text>"#, LEFT + pw / 2.0, H - 8.0);
    out.push_str("</svg>\n");
    out
}

fn col(records: &[IterationRecord], f: fn(&IterationRecord) -> f64) -> Vec<f64> {
    records.iter().map(f).collect()
}

/// One chart per training series, keyed by file name.
pub fn training_charts(records: &[IterationRecord]) -> Vec<(String, String)> {
    let entropy = col(records, |r| r.answer_entropy);
    let s = |name, values| Series { name, values };
    vec![
        ("proposer_reward.svg", line_chart("Proposer reward", &[s("g(H)", col(records, |r| r.proposer_reward))], &[])),
        (
            "answer_entropy.svg",
            line_chart(
                "Answer entropy (nats)",
                &[s("H", entropy.clone()), s("running mean", running_mean(&entropy, ENTROPY_WINDOW))],
                &[(0.3, "0.3"), (0.6, "0.6"), (1.1, "1.1"), (1.4, "1.4")],
            ),
        ),
        ("majority_density.svg", line_chart("Majority-group density", &[s("|G|/N", col(records, |r| r.majority_density))], &[])),
        (
            "mean_step_similarity.svg",
            line_chart("Mean step similarity", &[s("cosine", col(records, |r| r.mean_step_similarity))], &[]),
        ),
        ("group_size.svg", line_chart("Dominant group size", &[s("|G|", col(records, |r| r.group_size as f64))], &[])),
        (
            "valid_step_positions.svg",
            line_chart("Valid step positions", &[s("positions", col(records, |r| r.valid_step_positions as f64))], &[]),
        ),
        (
            "reward_decomposition.svg",
            line_chart(
                "Solver reward decomposition",
                &[
                    s("r_ans", col(records, |r| r.mean_r_ans)),
                    s("r_step", col(records, |r| r.mean_r_step)),
                    s("r_sol", col(records, |r| r.mean_r_sol)),
                    s("lambda", col(records, |r| r.lambda)),
                ],
                &[],
            ),
        ),
        (
            "solver_policy.svg",
            line_chart(
                "Solver generator probabilities",
                &[
                    s("grounded", col(records, |r| r.p_grounded)),
                    s("shortcut", col(records, |r| r.p_shortcut)),
                    s("off-mode", col(records, |r| r.p_offmode)),
                ],
                &[],
            ),
        ),
        (
            "kl_coefficients.svg",
            line_chart("KL coefficients", &[s("beta solver", col(records, |r| r.beta_s)), s("beta proposer", col(records, |r| r.beta_p))], &[]),
        ),
    ]
    .into_iter()
    .map(|(n, svg)| (n.to_string(), svg))
    .collect()
}

fn file_safe(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Aggregate disagreement profile plus one heatmap per diagnosed group.
pub fn diagnostic_charts(report: &DiagnoseReport) -> Vec<(String, String)> {
    let labels: Vec<String> = report.aggregate.steps.iter().map(|j| j.to_string()).collect();
    let mut out = vec![(
        "disagreement_profile.svg".to_string(),
        bar_chart("Disagreement by step (1 - mean leave-one-out similarity)", &labels, &report.aggregate.values),
    )];
    for g in &report.groups {
        if let Some(h) = &g.heatmap {
            let rows: Vec<String> = h.row_labels.iter().map(|r| format!("rollout {r}")).collect();
            out.push((
                format!("loo_{}.svg", file_safe(&g.id)),
                heatmap(&format!("Leave-one-out similarity: {}", g.id), &rows, &h.column_labels, &h.values),
            ));
        }
    }
    out
}
