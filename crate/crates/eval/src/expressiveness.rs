use std::collections::BTreeMap;

use agenturi_core::CapabilityPath;
use serde::Serialize;

use crate::corpus::ToolCorpusEntry;
use crate::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpressivenessReport {
    pub total: usize,
    pub mapped: usize,
    pub coverage: f64,
    /// Entries beyond the first that land on an already used path.
    pub collisions: usize,
    pub collision_rate: f64,
    pub depth_mean: f64,
    pub depth_max: usize,
    /// Paths shared by more than one entry, with the entries involved.
    pub colliding_paths: BTreeMap<String, Vec<ToolCorpusEntry>>,
}

/// Lowercases, collapses every run of characters outside `[a-z0-9]` into
/// one hyphen and trims hyphens from both ends.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut gap = false;
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_ascii_alphanumeric() {
            if gap && !out.is_empty() {
                out.push('-');
            }
            gap = false;
            out.push(c);
        } else {
            gap = true;
        }
    }
    out
}

/// `normalize(category)/normalize(tool_name)`.
pub fn map_entry(entry: &ToolCorpusEntry) -> Option<CapabilityPath> {
    CapabilityPath::from_segments([normalize(&entry.category), normalize(&entry.tool_name)]).ok()
}

/// `normalize(tool_name)` as a single segment.
pub fn map_entry_flat(entry: &ToolCorpusEntry) -> Option<CapabilityPath> {
    CapabilityPath::from_segments([normalize(&entry.tool_name)]).ok()
}

pub fn map_corpus(entries: &[ToolCorpusEntry]) -> Result<(Vec<Option<CapabilityPath>>, ExpressivenessReport), EvalError> {
    report_for(entries, map_entry)
}

pub fn map_corpus_flat(entries: &[ToolCorpusEntry]) -> Result<ExpressivenessReport, EvalError> {
    report_for(entries, map_entry_flat).map(|(_, r)| r)
}

fn report_for(
    entries: &[ToolCorpusEntry],
    map: fn(&ToolCorpusEntry) -> Option<CapabilityPath>,
) -> Result<(Vec<Option<CapabilityPath>>, ExpressivenessReport), EvalError> {
    if entries.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let paths: Vec<Option<CapabilityPath>> = entries.iter().map(map).collect();
    let mut by_path: BTreeMap<String, Vec<ToolCorpusEntry>> = BTreeMap::new();
    for (entry, path) in entries.iter().zip(&paths) {
        if let Some(p) = path {
            let group = by_path.entry(p.canonical()).or_default();
            if !group.contains(entry) {
                group.push(entry.clone());
            }
        }
    }
    let mapped = paths.iter().flatten().count();
    let collisions = by_path.values().map(|g| g.len() - 1).sum();
    let depths: Vec<usize> = paths.iter().flatten().map(CapabilityPath::depth).collect();
    let total = entries.len();
    let report = ExpressivenessReport {
        total,
        mapped,
        coverage: mapped as f64 / total as f64,
        collisions,
        collision_rate: collisions as f64 / total as f64,
        depth_mean: if depths.is_empty() { 0.0 } else { depths.iter().sum::<usize>() as f64 / depths.len() as f64 },
        depth_max: depths.iter().copied().max().unwrap_or(0),
        colliding_paths: by_path.into_iter().filter(|(_, g)| g.len() > 1).collect(),
    };
    Ok((paths, report))
}
