//! Parser for the polystore query surface: nested island scope calls
//! wrapped around island-native query text.
//!
//! ```text
//! query  := ['TRAINING:'] scope
//! scope  := ISLAND '(' body ')'        -- no space before '('
//! body   := (text | scope)*
//! ```
//!
//! A scope call is recognized wherever a *registered* island name is
//! immediately followed by `(`; every other identifier, including
//! SQL's `COUNT(`, stays literal body text. Parentheses inside the body
//! must balance. Single-quoted strings are opaque — island names,
//! quotes escaped as `''` and parentheses inside them are plain text.
//! Reserializing the tree reproduces the input byte for byte (minus the
//! `TRAINING:` prefix).

use thiserror::Error;

use super::registry::IslandRegistry;

#[derive(Debug, Error, PartialEq)]
pub enum PolyError {
    #[error("query is empty")]
    Empty,
    #[error("unknown island `{name}` at byte {position}")]
    UnknownIsland { name: String, position: usize },
    #[error("unbalanced parenthesis at byte {position}")]
    Unbalanced { position: usize },
    #[error("unterminated string starting at byte {position}")]
    UnterminatedString { position: usize },
    #[error("trailing text after the root scope at byte {position}")]
    TrailingText { position: usize },
    #[error("query must start with an island scope, e.g. RELATIONAL(...)")]
    MissingScope,
}

/// One island scope call: the island name and the body as alternating
/// literal text and child scopes. `Placeholder` segments only appear in
/// remainders produced by decomposition, never in parsed input.
#[derive(Debug, Clone, PartialEq)]
pub struct ScopeNode {
    pub island: String,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Segment {
    Text(String),
    Child(ScopeNode),
    Placeholder(usize),
}

impl ScopeNode {
    /// Serializes the node back to query text. For parsed input this is
    /// the identity; placeholders render as `$c<i>`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write(&mut out);
        out
    }

    fn write(&self, out: &mut String) {
        out.push_str(&self.island);
        out.push('(');
        self.write_body(out);
        out.push(')');
    }

    /// The body only, without the island wrapper.
    pub fn body_text(&self) -> String {
        let mut out = String::new();
        self.write_body(&mut out);
        out
    }

    fn write_body(&self, out: &mut String) {
        for seg in &self.segments {
            match seg {
                Segment::Text(t) => out.push_str(t),
                Segment::Child(c) => c.write(out),
                Segment::Placeholder(i) => {
                    out.push_str("$c");
                    out.push_str(&i.to_string());
                }
            }
        }
    }

    pub fn children(&self) -> impl Iterator<Item = &ScopeNode> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Child(c) => Some(c),
            _ => None,
        })
    }

    /// True when the subtree mentions only `island` scopes.
    pub fn single_island(&self) -> bool {
        self.children().all(|c| c.island == self.island && c.single_island())
    }
}

/// A parsed polystore query.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyAst {
    pub root: ScopeNode,
    pub training: bool,
}

impl PolyAst {
    /// The query text without the training prefix.
    pub fn to_text(&self) -> String {
        self.root.to_text()
    }
}

const TRAINING_PREFIX: &str = "TRAINING:";

pub fn poly_parse(text: &str, registry: &IslandRegistry) -> Result<PolyAst, PolyError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(PolyError::Empty);
    }
    let (training, rest) = match trimmed.strip_prefix(TRAINING_PREFIX) {
        Some(rest) => (true, rest.trim_start()),
        None => (false, trimmed),
    };

    let mut p = Scanner {
        text: rest,
        bytes: rest.as_bytes(),
        pos: 0,
        registry,
    };
    let Some((island, after_name)) = p.island_call_at(0) else {
        // leading identifier looks like a scope but is not registered?
        if let Some(name) = leading_ident(rest) {
            if rest[name.len()..].starts_with('(') {
                return Err(PolyError::UnknownIsland {
                    name: name.to_string(),
                    position: 0,
                });
            }
        }
        return Err(PolyError::MissingScope);
    };
    p.pos = after_name; // positioned on '('
    let root = p.scope(island)?;
    if p.pos != p.bytes.len() {
        return Err(PolyError::TrailingText { position: p.pos });
    }
    Ok(PolyAst { root, training })
}

fn leading_ident(text: &str) -> Option<&str> {
    let end = text
        .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .unwrap_or(text.len());
    if end == 0 {
        None
    } else {
        Some(&text[..end])
    }
}

struct Scanner<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    registry: &'a IslandRegistry,
}

impl<'a> Scanner<'a> {
    /// If a registered island name starts at `at` and is immediately
    /// followed by `(`, returns the name and the byte offset of the `(`.
    fn island_call_at(&self, at: usize) -> Option<(&'a str, usize)> {
        // identifier boundary on the left
        if at > 0 {
            let prev = self.bytes[at - 1];
            if prev == b'_' || prev == b'$' || prev.is_ascii_alphanumeric() {
                return None;
            }
        }
        let rest = &self.text[at..];
        let end = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        if end == 0 {
            return None;
        }
        let name = &rest[..end];
        if rest[end..].starts_with('(') && self.registry.contains(name) {
            Some((name, at + end))
        } else {
            None
        }
    }

    /// Parses a scope whose `(` is at `self.pos`.
    fn scope(&mut self, island: &str) -> Result<ScopeNode, PolyError> {
        debug_assert_eq!(self.bytes[self.pos], b'(');
        let open_pos = self.pos;
        self.pos += 1;
        let mut segments = Vec::new();
        let mut text_start = self.pos;
        let mut depth = 0usize;

        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'\'' => {
                    let start = self.pos;
                    self.pos += 1;
                    loop {
                        match self.bytes.get(self.pos) {
                            Some(b'\'') => {
                                if self.bytes.get(self.pos + 1) == Some(&b'\'') {
                                    self.pos += 2;
                                } else {
                                    self.pos += 1;
                                    break;
                                }
                            }
                            Some(_) => self.pos += 1,
                            None => {
                                return Err(PolyError::UnterminatedString { position: start })
                            }
                        }
                    }
                }
                b'(' => {
                    depth += 1;
                    self.pos += 1;
                }
                b')' => {
                    if depth == 0 {
                        // closes this scope
                        if text_start < self.pos {
                            segments
                                .push(Segment::Text(self.text[text_start..self.pos].to_string()));
                        }
                        self.pos += 1;
                        return Ok(ScopeNode {
                            island: island.to_string(),
                            segments,
                        });
                    }
                    depth -= 1;
                    self.pos += 1;
                }
                _ => {
                    if let Some((child_island, paren_at)) = self.island_call_at(self.pos) {
                        if text_start < self.pos {
                            segments
                                .push(Segment::Text(self.text[text_start..self.pos].to_string()));
                        }
                        self.pos = paren_at;
                        let child = self.scope(child_island)?;
                        segments.push(Segment::Child(child));
                        text_start = self.pos;
                    } else {
                        self.pos += 1;
                    }
                }
            }
        }
        Err(PolyError::Unbalanced { position: open_pos })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg() -> IslandRegistry {
        IslandRegistry::new()
    }

    #[test]
    fn parses_flagship_nested_query() {
        let q = "ARRAY(multiply(RELATIONAL(select * from A),B))";
        let ast = poly_parse(q, &reg()).unwrap();
        assert!(!ast.training);
        assert_eq!(ast.root.island, "ARRAY");
        let children: Vec<_> = ast.root.children().collect();
        assert_eq!(children.len(), 1);
        assert_eq!(children[0].island, "RELATIONAL");
        assert_eq!(children[0].segments, vec![Segment::Text("select * from A".into())]);
        assert_eq!(ast.to_text(), q);
    }

    #[test]
    fn single_scope_has_no_children() {
        let ast = poly_parse("RELATIONAL(select * from A)", &reg()).unwrap();
        assert_eq!(ast.root.children().count(), 0);
    }

    #[test]
    fn quoted_text_is_opaque() {
        let q = "RELATIONAL(select * from A where note = '(ARRAY(')";
        let ast = poly_parse(q, &reg()).unwrap();
        assert_eq!(ast.root.children().count(), 0);
        assert_eq!(ast.to_text(), q);
    }

    #[test]
    fn training_prefix_sets_flag() {
        let ast = poly_parse("TRAINING: D_ARR(count(A))", &reg()).unwrap();
        assert!(ast.training);
        assert_eq!(ast.root.island, "D_ARR");
    }

    #[test]
    fn unknown_island_at_root_is_reported() {
        let err = poly_parse("GRAPH(match x)", &reg()).unwrap_err();
        assert_eq!(
            err,
            PolyError::UnknownIsland {
                name: "GRAPH".into(),
                position: 0
            }
        );
    }

    #[test]
    fn count_paren_inside_body_is_not_a_scope() {
        let ast = poly_parse("RELATIONAL(select COUNT(*) from T)", &reg()).unwrap();
        assert_eq!(ast.root.children().count(), 0);
        assert_eq!(ast.to_text(), "RELATIONAL(select COUNT(*) from T)");
    }

    #[test]
    fn unbalanced_and_unterminated_errors_have_positions() {
        assert!(matches!(
            poly_parse("ARRAY(count(A)", &reg()).unwrap_err(),
            PolyError::Unbalanced { .. }
        ));
        assert!(matches!(
            poly_parse("RELATIONAL(select 'x from T)", &reg()).unwrap_err(),
            PolyError::UnterminatedString { .. }
        ));
        assert!(matches!(
            poly_parse("ARRAY(count(A)) junk", &reg()).unwrap_err(),
            PolyError::TrailingText { .. }
        ));
    }

    #[test]
    fn island_name_needs_immediate_paren_and_boundary() {
        // space before '(' keeps it literal text
        let ast = poly_parse("RELATIONAL(select * from T where ARRAY (x) = 1)", &reg()).unwrap();
        assert_eq!(ast.root.children().count(), 0);
        // MYARRAY( must not match ARRAY
        let ast = poly_parse("RELATIONAL(select MYARRAY(a) from T)", &reg());
        assert!(ast.is_ok());
        assert_eq!(ast.unwrap().root.children().count(), 0);
    }
}
