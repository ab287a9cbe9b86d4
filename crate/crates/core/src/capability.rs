//! Hierarchical capability paths and the segment-aware prefix predicate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ParseError;

/// Ordered, non-empty list of lowercase `[a-z0-9-]+` segments.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CapabilityPath {
    segments: Vec<String>,
}

impl CapabilityPath {
    /// Parses `a/b/c`. One leading slash is tolerated so that `/workflow`
    /// and `workflow` name the same path. Percent-escapes of unreserved
    /// characters are decoded before validation.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let body = text.strip_prefix('/').unwrap_or(text);
        if body.is_empty() {
            return Err(ParseError::EmptyCapabilityPath);
        }
        let segments = body.split('/').map(normalize_segment).collect::<Result<Vec<_>, _>>()?;
        Ok(CapabilityPath { segments })
    }

    /// Builds a path from already separated segments.
    pub fn from_segments<I, S>(segments: I) -> Result<Self, ParseError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let segments = segments
            .into_iter()
            .map(|s| normalize_segment(s.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        if segments.is_empty() {
            return Err(ParseError::EmptyCapabilityPath);
        }
        Ok(CapabilityPath { segments })
    }

    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    pub fn depth(&self) -> usize {
        self.segments.len()
    }

    /// True when `prefix` is a leading run of whole segments of `self`.
    pub fn starts_with(&self, prefix: &CapabilityPath) -> bool {
        self.segments.starts_with(&prefix.segments)
    }

    /// The path truncated to `depth` segments, or `None` if `depth` is zero
    /// or deeper than the path.
    pub fn ancestor(&self, depth: usize) -> Option<CapabilityPath> {
        if depth == 0 || depth > self.segments.len() {
            return None;
        }
        Some(CapabilityPath { segments: self.segments[..depth].to_vec() })
    }

    /// Every prefix of the path from depth 1 through the full path.
    pub fn prefixes(&self) -> impl Iterator<Item = CapabilityPath> + '_ {
        (1..=self.segments.len()).map(|d| CapabilityPath { segments: self.segments[..d].to_vec() })
    }

    pub fn parent(&self) -> Option<CapabilityPath> {
        self.ancestor(self.segments.len() - 1)
    }

    pub fn last_segment(&self) -> &str {
        self.segments.last().expect("non-empty")
    }

    /// Appends one segment, validating it.
    pub fn child(&self, segment: &str) -> Result<CapabilityPath, ParseError> {
        let mut segments = self.segments.clone();
        segments.push(normalize_segment(segment)?);
        Ok(CapabilityPath { segments })
    }

    /// Canonical text: segments joined by `/`, no leading or trailing slash.
    pub fn canonical(&self) -> String {
        self.segments.join("/")
    }

    pub(crate) fn text_len(&self) -> usize {
        self.segments.iter().map(String::len).sum::<usize>() + self.segments.len() - 1
    }
}

/// True iff some claimed capability is a segment-boundary prefix of `path`.
pub fn capability_covers(path: &CapabilityPath, caps: &[CapabilityPath]) -> bool {
    caps.iter().any(|c| path.starts_with(c))
}

fn is_segment_char(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'-'
}

fn is_unreserved(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'-' | b'.' | b'_' | b'~')
}

fn hex_val(b: u8) -> Option<u8> {
    (b as char).to_digit(16).map(|d| d as u8)
}

/// Decodes unreserved percent-escapes, lowercases, and validates one segment.
pub(crate) fn normalize_segment(raw: &str) -> Result<String, ParseError> {
    if raw.is_empty() {
        return Err(ParseError::BadSegment("empty segment".into()));
    }
    let bytes = raw.as_bytes();
    let mut out = String::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let decoded = if b == b'%' {
            let escaped = bytes
                .get(i + 1..i + 3)
                .and_then(|h| Some((hex_val(h[0])? << 4) | hex_val(h[1])?))
                .filter(|&d| is_unreserved(d));
            match escaped {
                Some(d) => {
                    i += 3;
                    d
                }
                None => return Err(ParseError::BadSegment(format!("`{raw}` contains a reserved or malformed escape"))),
            }
        } else {
            i += 1;
            b
        };
        if !is_segment_char(decoded) {
            return Err(ParseError::BadSegment(format!("`{raw}` contains a character outside [a-z0-9-]")));
        }
        out.push(decoded.to_ascii_lowercase() as char);
    }
    Ok(out)
}

impl fmt::Display for CapabilityPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.segments.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            f.write_str(s)?;
        }
        Ok(())
    }
}

impl FromStr for CapabilityPath {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CapabilityPath::parse(s)
    }
}

impl Serialize for CapabilityPath {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CapabilityPath {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        CapabilityPath::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> CapabilityPath {
        s.parse().unwrap()
    }

    #[test]
    fn prefix_is_segment_aware() {
        assert!(p("workflow/approval/invoice").starts_with(&p("workflow")));
        assert!(p("workflow/approval").starts_with(&p("workflow/approval")));
        assert!(!p("workflow").starts_with(&p("work")));
        assert!(!p("work").starts_with(&p("workflow")));
        assert!(!p("workflow").starts_with(&p("workflow/approval")));
    }

    #[test]
    fn coverage_examples() {
        let caps = [p("workflow")];
        assert!(capability_covers(&p("workflow"), &caps));
        assert!(capability_covers(&p("workflow/approval/invoice"), &caps));
        assert!(!capability_covers(&p("financial"), &caps));
        assert!(!capability_covers(&p("work"), &caps));
        assert!(!capability_covers(&p("workflow"), &[p("work")]));
        assert!(!capability_covers(&p("workflow"), &[]));
    }

    #[test]
    fn parse_normalizes() {
        assert_eq!(p("/Workflow/Approval").canonical(), "workflow/approval");
        assert_eq!(p("work%66low").canonical(), "workflow");
        assert_eq!(p("a%2Db").canonical(), "a-b");
    }

    #[test]
    fn parse_rejects() {
        assert_eq!(CapabilityPath::parse(""), Err(ParseError::EmptyCapabilityPath));
        assert_eq!(CapabilityPath::parse("/"), Err(ParseError::EmptyCapabilityPath));
        for bad in ["a//b", "a/", "a_b", "a.b", "a%2Fb", "a%2eb", "a%zz", "a%4", "caf\u{e9}", "a b"] {
            assert!(matches!(CapabilityPath::parse(bad), Err(ParseError::BadSegment(_))), "{bad:?}");
        }
    }

    #[test]
    fn prefixes_and_ancestors() {
        let path = p("workflow/approval/invoice");
        let all: Vec<_> = path.prefixes().map(|x| x.canonical()).collect();
        assert_eq!(all, ["workflow", "workflow/approval", "workflow/approval/invoice"]);
        assert_eq!(path.parent().unwrap().canonical(), "workflow/approval");
        assert_eq!(p("workflow").parent(), None);
        assert_eq!(path.ancestor(0), None);
        assert_eq!(path.depth(), 3);
        assert_eq!(path.text_len(), path.canonical().len());
    }
}
