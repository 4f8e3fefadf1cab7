//! Identifier paths: dot-separated, index-bearing element addresses such as
//! `filters[0].sections[1]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Name of the segment that designates a model's root element.
pub const ROOT_SEGMENT: &str = "root";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Segment {
    pub name: String,
    pub index: Option<usize>,
}

impl Segment {
    pub fn step(name: impl Into<String>, index: usize) -> Self {
        Segment {
            name: name.into(),
            index: Some(index),
        }
    }

    pub fn bare(name: impl Into<String>) -> Self {
        Segment {
            name: name.into(),
            index: None,
        }
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "{}[{}]", self.name, i),
            None => f.write_str(&self.name),
        }
    }
}

/// Address of an element inside a model.
///
/// A leading segment without an index (`root`, or a template parameter alias
/// such as `sourceModel`) designates the root element; every following
/// segment is a collection step `name[index]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElementPath {
    segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid path `{input}` at byte {offset}: {message}")]
pub struct PathSyntaxError {
    pub input: String,
    pub offset: usize,
    pub message: String,
}

impl ElementPath {
    /// The path of a model's root element, printed as `root`.
    pub fn root() -> Self {
        ElementPath {
            segments: vec![Segment::bare(ROOT_SEGMENT)],
        }
    }

    /// Builds a path from segments; an empty list yields [`ElementPath::root`].
    pub fn from_segments(segments: Vec<Segment>) -> Self {
        if segments.is_empty() {
            Self::root()
        } else {
            ElementPath { segments }
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Collection steps, i.e. the path with any leading root designator removed.
    pub fn steps(&self) -> &[Segment] {
        match self.segments.first() {
            Some(first) if first.index.is_none() => &self.segments[1..],
            _ => &self.segments,
        }
    }

    pub fn is_root(&self) -> bool {
        self.steps().is_empty()
    }

    /// Model-root-relative form: drops a leading root designator (`root`,
    /// `sourceModel`, ...). The root itself normalizes to `root`.
    pub fn normalized(&self) -> ElementPath {
        ElementPath::from_segments(self.steps().to_vec())
    }

    pub fn child(&self, name: &str, index: usize) -> ElementPath {
        let mut segments = self.steps().to_vec();
        segments.push(Segment::step(name, index));
        ElementPath { segments }
    }

    /// The same element addressed through a named root designator.
    pub fn with_alias(&self, alias: &str) -> ElementPath {
        let mut segments = vec![Segment::bare(alias)];
        segments.extend(self.steps().iter().cloned());
        ElementPath { segments }
    }

    /// Parses `seg ('.' seg)*` where `seg := ident ('[' nat ']')?`.
    pub fn parse(input: &str) -> Result<Self, PathSyntaxError> {
        let err = |offset: usize, message: &str| PathSyntaxError {
            input: input.to_string(),
            offset,
            message: message.to_string(),
        };
        let bytes = input.as_bytes();
        let mut pos = 0;
        let mut segments = Vec::new();
        loop {
            let start = pos;
            match bytes.get(pos) {
                Some(b) if b.is_ascii_alphabetic() || *b == b'_' => pos += 1,
                Some(_) => return Err(err(pos, "expected identifier")),
                None => return Err(err(pos, "unexpected end of path")),
            }
            while pos < bytes.len() && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_') {
                pos += 1;
            }
            let name = &input[start..pos];
            let mut index = None;
            if bytes.get(pos) == Some(&b'[') {
                pos += 1;
                let digits = pos;
                while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                    pos += 1;
                }
                if digits == pos {
                    return Err(err(pos, "expected index"));
                }
                if pos - digits > 1 && bytes[digits] == b'0' {
                    return Err(err(digits, "index has leading zero"));
                }
                let value = input[digits..pos]
                    .parse::<usize>()
                    .map_err(|_| err(digits, "index out of range"))?;
                if bytes.get(pos) != Some(&b']') {
                    return Err(err(pos, "expected `]`"));
                }
                pos += 1;
                index = Some(value);
            }
            segments.push(Segment {
                name: name.to_string(),
                index,
            });
            match bytes.get(pos) {
                None => break,
                Some(b'.') => pos += 1,
                Some(_) => return Err(err(pos, "expected `.` or end of path")),
            }
        }
        Ok(ElementPath { segments })
    }
}

impl fmt::Display for ElementPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, seg) in self.segments.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{seg}")?;
        }
        Ok(())
    }
}

impl FromStr for ElementPath {
    type Err = PathSyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ElementPath::parse(s)
    }
}

impl Serialize for ElementPath {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ElementPath {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        ElementPath::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Parses a path string.
pub fn parse_path(s: &str) -> Result<ElementPath, PathSyntaxError> {
    ElementPath::parse(s)
}

/// Prints a path in its canonical string form.
pub fn print_path(p: &ElementPath) -> String {
    p.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_nested_collection_steps() {
        let p = parse_path("filters[0].sections[1]").unwrap();
        assert_eq!(
            p.segments(),
            &[Segment::step("filters", 0), Segment::step("sections", 1)]
        );
        let q = parse_path("filters[1].sections[0]").unwrap();
        assert_eq!(
            q.segments(),
            &[Segment::step("filters", 1), Segment::step("sections", 0)]
        );
    }

    #[test]
    fn root_is_a_single_bare_segment() {
        let p = parse_path("root").unwrap();
        assert_eq!(p.segments(), &[Segment::bare("root")]);
        assert!(p.is_root());
        assert_eq!(p, ElementPath::root());
    }

    #[test]
    fn alias_is_dropped_by_normalization() {
        let p = parse_path("sourceModel.elements[3]").unwrap();
        assert_eq!(p.normalized().to_string(), "elements[3]");
        assert_eq!(parse_path("sourceModel").unwrap().normalized(), ElementPath::root());
    }

    #[test]
    fn syntax_errors_carry_byte_offsets() {
        assert_eq!(parse_path("").unwrap_err().offset, 0);
        assert_eq!(parse_path("a.").unwrap_err().offset, 2);
        assert_eq!(parse_path("a[x]").unwrap_err().offset, 2);
        assert_eq!(parse_path("a[1").unwrap_err().offset, 3);
        assert_eq!(parse_path("a[01]").unwrap_err().offset, 2);
        assert_eq!(parse_path("a b").unwrap_err().offset, 1);
        assert_eq!(parse_path("9a").unwrap_err().offset, 0);
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(
            segs in prop::collection::vec(("[a-zA-Z_][a-zA-Z0-9_]{0,6}", prop::option::of(0usize..1000)), 1..6)
        ) {
            let s = segs
                .iter()
                .map(|(n, i)| match i { Some(i) => format!("{n}[{i}]"), None => n.clone() })
                .collect::<Vec<_>>()
                .join(".");
            let p = parse_path(&s).unwrap();
            prop_assert_eq!(print_path(&p), s);
            prop_assert_eq!(p.segments().len(), segs.len());
        }
    }
}
