//! Decomposition of a parsed query into engine-local containers and the
//! cross-island remainder.
//!
//! A *container* is an innermost scope — one whose body holds no child
//! scopes — so its text is a complete, hole-free statement in its
//! island's language. Everything above the containers becomes the
//! remainder: the outermost scope structure with `$c<i>` placeholders
//! where the containers were. A query that is one scope deep yields one
//! container and the trivial remainder `$c0`.

use atoll_engines::{ArrayEngine, RelationalEngine};

use super::kvlang;
use super::registry::{Island, IslandRegistry, Language};
use super::scope::{PolyAst, ScopeNode, Segment};
use super::IslandError;

/// A hole-free single-island subquery with its candidate metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub id: usize,
    pub island: String,
    pub text: String,
    /// Objects the container references, sorted. Empty when the island
    /// text fails to parse eagerly; execution will surface the error.
    pub objects: Vec<String>,
    /// The original subtree, kept so decomposition stays invertible.
    pub subtree: ScopeNode,
}

/// The enclosing scope structure with container placeholders.
#[derive(Debug, Clone, PartialEq)]
pub struct Remainder {
    /// Host island: the outermost scope's island.
    pub island: String,
    /// Root node whose leaf holes are `Segment::Placeholder`s.
    pub node: ScopeNode,
}

impl Remainder {
    /// Remainder text in the host island's language, placeholders
    /// rendered as `$c<i>`. The trivial remainder is just `$c0`.
    pub fn text(&self) -> String {
        match &self.node.segments[..] {
            [Segment::Placeholder(i)] => format!("$c{i}"),
            _ => self.node.body_text(),
        }
    }

    /// True when the query was entirely within one island.
    pub fn is_trivial(&self) -> bool {
        matches!(&self.node.segments[..], [Segment::Placeholder(_)])
    }

    /// Remainder text ready for host-engine execution: scope markers of
    /// the host island are spliced away (they are semantically
    /// redundant), foreign internal scopes are rejected — a remainder
    /// can only run on one island's engines.
    pub fn execution_text(&self) -> Result<String, ForeignScope> {
        fn write(node: &ScopeNode, host: &str, out: &mut String) -> Result<(), ForeignScope> {
            for seg in &node.segments {
                match seg {
                    Segment::Text(t) => out.push_str(t),
                    Segment::Placeholder(i) => {
                        out.push_str("$c");
                        out.push_str(&i.to_string());
                    }
                    Segment::Child(c) => {
                        if c.island != host {
                            return Err(ForeignScope {
                                host: host.to_string(),
                                found: c.island.clone(),
                            });
                        }
                        write(c, host, out)?;
                    }
                }
            }
            Ok(())
        }
        if self.is_trivial() {
            return Ok(self.text());
        }
        let mut out = String::new();
        write(&self.node, &self.island, &mut out)?;
        Ok(out)
    }
}

/// A remainder contains an internal scope of a different island; such
/// queries are parseable but not plannable in v1.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("remainder on island `{host}` contains a nested `{found}` scope that is itself cross-island; this nesting is not plannable")]
pub struct ForeignScope {
    pub host: String,
    pub found: String,
}

pub fn decompose(ast: &PolyAst) -> (Vec<Container>, Remainder) {
    let mut containers = Vec::new();
    let node = walk(&ast.root, &mut containers);
    match node {
        Segment::Placeholder(i) => {
            // whole query is one container; remainder is trivial
            let island = containers[i].island.clone();
            (
                containers,
                Remainder {
                    island: island.clone(),
                    node: ScopeNode {
                        island,
                        segments: vec![Segment::Placeholder(i)],
                    },
                },
            )
        }
        Segment::Child(root) => (
            containers,
            Remainder {
                island: root.island.clone(),
                node: root,
            },
        ),
        Segment::Text(_) => unreachable!("walk never returns bare text for a scope"),
    }
}

/// Rewrites a scope node bottom-up: leaves become placeholders, interior
/// nodes keep their structure.
fn walk(node: &ScopeNode, containers: &mut Vec<Container>) -> Segment {
    if node.children().next().is_none() {
        let id = containers.len();
        let text = node.body_text();
        let objects = referenced_objects_by_language(language_of(&node.island), &text)
            .unwrap_or_default();
        containers.push(Container {
            id,
            island: node.island.clone(),
            text,
            objects,
            subtree: node.clone(),
        });
        return Segment::Placeholder(id);
    }
    let segments = node
        .segments
        .iter()
        .map(|seg| match seg {
            Segment::Text(t) => Segment::Text(t.clone()),
            Segment::Child(c) => walk(c, containers),
            Segment::Placeholder(i) => Segment::Placeholder(*i),
        })
        .collect();
    Segment::Child(ScopeNode {
        island: node.island.clone(),
        segments,
    })
}

/// Substitutes container subtrees back into a remainder, undoing
/// [`decompose`]. Used by tests to check the round trip.
pub fn substitute(remainder: &Remainder, containers: &[Container]) -> ScopeNode {
    fn rebuild(node: &ScopeNode, containers: &[Container]) -> ScopeNode {
        let segments = node
            .segments
            .iter()
            .map(|seg| match seg {
                Segment::Text(t) => Segment::Text(t.clone()),
                Segment::Child(c) => Segment::Child(rebuild(c, containers)),
                Segment::Placeholder(i) => Segment::Child(containers[*i].subtree.clone()),
            })
            .collect();
        ScopeNode {
            island: node.island.clone(),
            segments,
        }
    }
    if remainder.is_trivial() {
        let Segment::Placeholder(i) = remainder.node.segments[0] else { unreachable!() };
        return containers[i].subtree.clone();
    }
    rebuild(&remainder.node, containers)
}

fn language_of(island: &str) -> Language {
    // registry islands are fixed; default to SQL for unknown names
    IslandRegistry::global()
        .get(island)
        .map(|i| i.language)
        .unwrap_or(Language::Sql)
}

/// Objects referenced by an island-language fragment: table, array or
/// store names, sorted, with `$c<i>` placeholders excluded. Parse errors
/// from the island's own parser propagate.
pub fn referenced_objects(island: &Island, text: &str) -> Result<Vec<String>, IslandError> {
    referenced_objects_by_language(island.language, text)
}

fn referenced_objects_by_language(
    language: Language,
    text: &str,
) -> Result<Vec<String>, IslandError> {
    let mut names = match language {
        Language::Sql => RelationalEngine::referenced_tables(text)?,
        Language::ArrayExpr => ArrayEngine::referenced_arrays(text)?,
        Language::KvOps => kvlang::referenced_stores(text)?,
    };
    names.retain(|n| !n.starts_with('$'));
    Ok(names)
}
