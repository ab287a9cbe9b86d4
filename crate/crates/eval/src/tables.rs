//! Plain-text renderings of experiment reports.

use std::fmt::Write;

use crate::bench::BenchReport;
use crate::discovery::{AblationReport, DiscoveryReport, DriftPoint};
use crate::expressiveness::ExpressivenessReport;
use crate::hops::ScalingReport;

fn rule(widths: &[usize]) -> String {
    widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-")
}

fn row(widths: &[usize], cells: &[String]) -> String {
    cells
        .iter()
        .zip(widths)
        .enumerate()
        .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
        .collect::<Vec<_>>()
        .join(" | ")
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let head: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    writeln!(out, "{}", row(&widths, &head)).ok();
    writeln!(out, "{}", rule(&widths)).ok();
    for r in rows {
        writeln!(out, "{}", row(&widths, r)).ok();
    }
    out
}

fn pct(x: f64) -> String {
    format!("{:.1}%", x * 100.0)
}

pub fn expressiveness_table(hierarchical: &ExpressivenessReport, flat: &ExpressivenessReport) -> String {
    let line = |name: &str, r: &ExpressivenessReport| {
        vec![
            name.to_string(),
            r.total.to_string(),
            pct(r.coverage),
            r.collisions.to_string(),
            pct(r.collision_rate),
            format!("{:.2}", r.depth_mean),
            r.depth_max.to_string(),
        ]
    };
    table(
        &["scheme", "tools", "coverage", "collisions", "collision rate", "mean depth", "max depth"],
        &[line("hierarchical", hierarchical), line("flat", flat)],
    )
}

pub fn discovery_table(r: &DiscoveryReport) -> String {
    let mode = |name: &str, m: &crate::discovery::ModeMetrics| {
        vec![
            name.to_string(),
            m.queries.to_string(),
            format!("{:.3}", m.precision),
            format!("{:.3}", m.recall),
            format!("{:.1}", m.mean_result_size),
            format!("{:.2}", m.mean_hops),
        ]
    };
    let mut out = table(&["query", "count", "precision", "recall", "mean results", "mean hops"], &[mode("prefix", &r.prefix), mode("exact", &r.exact)]);
    writeln!(
        out,
        "overall precision {:.3} recall {:.3} F1 {:.3}; size ratio prefix/exact {:.2}",
        r.precision, r.recall, r.f1, r.size_ratio
    )
    .ok();
    out
}

pub fn ablation_table(scoped: &DiscoveryReport, a: &AblationReport) -> String {
    table(
        &["keys", "precision", "recall", "false positives", "cross-root", "mean results"],
        &[
            vec![
                "trust-scoped".into(),
                format!("{:.3}", scoped.precision),
                format!("{:.3}", scoped.recall),
                "0".into(),
                "0".into(),
                format!("{:.1}", scoped.prefix.mean_result_size),
            ],
            vec![
                "global".into(),
                format!("{:.3}", a.scoped_ground_truth.precision),
                format!("{:.3}", a.illusory_recall),
                a.false_positives.to_string(),
                a.cross_root_false_positives.to_string(),
                format!("{:.1}", a.scoped_ground_truth.prefix.mean_result_size),
            ],
        ],
    )
}

pub fn drift_table(points: &[DriftPoint]) -> String {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                pct(p.drift_fraction),
                p.drifted_agents.to_string(),
                format!("{:.3}", p.report.precision),
                format!("{:.3}", p.report.recall),
                format!("{:.3}", p.report.f1),
            ]
        })
        .collect();
    table(&["drift", "agents", "precision", "recall", "F1"], &rows)
}

pub fn scaling_table(r: &ScalingReport) -> String {
    let rows: Vec<Vec<String>> = r
        .sizes
        .iter()
        .zip(&r.fit.residuals)
        .map(|(s, res)| {
            vec![
                s.n.to_string(),
                s.lookups.to_string(),
                format!("{:.2}", s.mean),
                format!("{:.1}", s.p95),
                format!("{}-{}", s.min, s.max),
                format!("{res:+.2}"),
            ]
        })
        .collect();
    let mut out = table(&["nodes", "lookups", "mean hops", "p95", "range", "fit residual"], &rows);
    writeln!(
        out,
        "fit: hops = {:.3} * log2(N) + {:.3} (R^2 {:.3}); growth {:.2}x; monotone {}",
        r.fit.a, r.fit.b, r.fit.r_squared, r.growth_ratio, r.monotone
    )
    .ok();
    out
}

pub fn bench_table(r: &BenchReport) -> String {
    let rows: Vec<Vec<String>> = r
        .results
        .iter()
        .map(|b| {
            vec![
                b.name.to_string(),
                format!("{:.0}", b.median_ns),
                format!("{:.0}", b.threshold_ns),
                if b.pass { "ok".into() } else { "over".into() },
            ]
        })
        .collect();
    let mut out = table(&["operation", "median ns", "limit ns", "status"], &rows);
    writeln!(out, "profile: {}", r.profile).ok();
    out
}
