use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::EvalError;

const SAMPLE: &str = include_str!("../data/sample_corpus.jsonl");
const COLLISIONS: &str = include_str!("../data/collision_corpus.jsonl");

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolCorpusEntry {
    pub framework: String,
    pub category: String,
    pub tool_name: String,
}

/// Parses JSON lines; blank lines and `#` comments are skipped.
pub fn parse_jsonl(text: &str) -> Result<Vec<ToolCorpusEntry>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let entry: ToolCorpusEntry =
            serde_json::from_str(line).map_err(|e| EvalError::BadCorpus(format!("line {}: {e}", i + 1)))?;
        if entry.framework.is_empty() || entry.category.is_empty() || entry.tool_name.is_empty() {
            return Err(EvalError::BadCorpus(format!("line {}: empty field", i + 1)));
        }
        out.push(entry);
    }
    Ok(out)
}

pub fn load_jsonl(path: &Path) -> Result<Vec<ToolCorpusEntry>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    parse_jsonl(&text)
}

/// Forty tools across five agent frameworks, every tool name distinct.
pub fn sample_corpus() -> Vec<ToolCorpusEntry> {
    parse_jsonl(SAMPLE).expect("bundled corpus parses")
}

/// Frameworks that expose identically named tools in different categories.
pub fn collision_corpus() -> Vec<ToolCorpusEntry> {
    parse_jsonl(COLLISIONS).expect("bundled corpus parses")
}
