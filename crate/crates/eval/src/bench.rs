//! Wall-clock medians of the core operations, checked against fixed
//! per-operation thresholds.

use std::hint::black_box;
use std::time::Instant;

use agenturi_core::{derive_key, path_starts_with, AgentUri, CapabilityPath, TrustRoot, MAX_URI_LEN};
use serde::Serialize;

pub const TYPICAL_URI: &str = "agent://acme.com/workflow/approval/invoice/agent_01h455vb4pex5vsknk084sn02q";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub name: &'static str,
    pub median_ns: f64,
    pub threshold_ns: f64,
    pub samples: usize,
    pub iterations_per_sample: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    /// `release` when built without debug assertions.
    pub profile: &'static str,
    pub results: Vec<BenchResult>,
    pub all_pass: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct BenchOptions {
    pub samples: usize,
    pub iterations_per_sample: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions { samples: 101, iterations_per_sample: 2_000 }
    }
}

/// A valid URI of exactly [`MAX_URI_LEN`] octets.
pub fn max_length_uri() -> String {
    let head = "agent://acme.com/";
    let tail = "/agent_01h455vb4pex5vsknk084sn02q";
    let mut path = String::new();
    let mut i = 0;
    while head.len() + path.len() + tail.len() < MAX_URI_LEN {
        if !path.is_empty() {
            path.push('/');
        }
        let room = MAX_URI_LEN - head.len() - path.len() - tail.len();
        let seg = format!("segment{i:02}-{}", "x".repeat(40));
        path.push_str(&seg[..seg.len().min(room.max(1))]);
        i += 1;
    }
    let uri = format!("{head}{path}{tail}");
    debug_assert_eq!(uri.len(), MAX_URI_LEN);
    uri
}

fn median_ns(opts: BenchOptions, mut op: impl FnMut()) -> f64 {
    for _ in 0..opts.iterations_per_sample {
        op();
    }
    let mut per_op: Vec<f64> = (0..opts.samples)
        .map(|_| {
            let start = Instant::now();
            for _ in 0..opts.iterations_per_sample {
                op();
            }
            start.elapsed().as_nanos() as f64 / opts.iterations_per_sample as f64
        })
        .collect();
    per_op.sort_by(f64::total_cmp);
    per_op[per_op.len() / 2]
}

pub fn run_benchmarks(opts: BenchOptions) -> BenchReport {
    let long = max_length_uri();
    let with_query = format!("{}?session=42#frag", TYPICAL_URI.replace("acme.com", "ACME.com"));
    let parsed = AgentUri::parse(&with_query).expect("valid");
    let deep: CapabilityPath = "a1/b2/c3/d4/e5".parse().expect("valid");
    let prefix = deep.clone();
    let root: TrustRoot = "acme.com".parse().expect("valid");
    let path: CapabilityPath = "workflow/approval/invoice".parse().expect("valid");

    let mut results = Vec::new();
    let mut add = |name, threshold_ns: f64, median: f64| {
        results.push(BenchResult {
            name,
            median_ns: median,
            threshold_ns,
            samples: opts.samples,
            iterations_per_sample: opts.iterations_per_sample,
            pass: median < threshold_ns,
        })
    };
    add("parse_typical", 5_000.0, median_ns(opts, || drop(black_box(AgentUri::parse(black_box(TYPICAL_URI))))));
    add("parse_max_length", 20_000.0, median_ns(opts, || drop(black_box(AgentUri::parse(black_box(&long))))));
    add("canonicalize", 2_000.0, median_ns(opts, || drop(black_box(black_box(&parsed).canonical()))));
    add("path_starts_with_depth5", 500.0, median_ns(opts, || {
        black_box(path_starts_with(black_box(&deep), black_box(&prefix)));
    }));
    add("derive_key", 5_000.0, median_ns(opts, || {
        black_box(derive_key(black_box(&root), black_box(&path)));
    }));
    let all_pass = results.iter().all(|r| r.pass);
    BenchReport { profile: if cfg!(debug_assertions) { "debug" } else { "release" }, results, all_pass }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_length_uri_is_valid_and_exact() {
        let uri = max_length_uri();
        assert_eq!(uri.len(), MAX_URI_LEN);
        assert!(AgentUri::parse(&uri).is_ok());
        assert!(AgentUri::parse(&format!("{uri}x")).is_err());
    }

    #[test]
    fn report_shape() {
        let r = run_benchmarks(BenchOptions { samples: 3, iterations_per_sample: 10 });
        let names: Vec<_> = r.results.iter().map(|b| b.name).collect();
        assert_eq!(names, ["parse_typical", "parse_max_length", "canonicalize", "path_starts_with_depth5", "derive_key"]);
        assert!(r.results.iter().all(|b| b.median_ns > 0.0));
    }
}
