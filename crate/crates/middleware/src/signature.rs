//! Query signatures: the monitor's key for "have we run something like
//! this before?".
//!
//! The structure hash covers the remainder skeleton and every
//! container's text with literals replaced by typed placeholders and
//! object names replaced by positional slots. Objects and constants are
//! carried alongside: two queries differing only in literal values share
//! a structure hash and objects but differ in constants; the same shape
//! over different tables shares the hash but not the objects.

use std::collections::HashMap;

use atoll_engines::array::{ArrayExpr, CellPredicate, CellTerm};
use atoll_engines::relational::parse_statement;
use atoll_engines::value::Value;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use atoll_islands::kvlang::{parse_kv_query, KvQuery};
use atoll_islands::registry::{IslandRegistry, Language};
use atoll_islands::{Container, Remainder};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub structure_hash: String,
    /// Referenced objects across containers and remainder, sorted.
    pub objects: Vec<String>,
    /// Literals in query order, with type tags.
    pub constants: Vec<Constant>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constant {
    pub tag: ConstantTag,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstantTag {
    Number,
    Text,
}

impl Constant {
    pub fn number(v: f64) -> Constant {
        Constant {
            tag: ConstantTag::Number,
            text: format!("{v}"),
        }
    }

    pub fn text(s: &str) -> Constant {
        Constant {
            tag: ConstantTag::Text,
            text: s.to_string(),
        }
    }
}

/// Distance between two constant lists: mean over positions of a
/// normalized per-pair distance — `|a−b| / (1 + |a| + |b|)` for numbers,
/// 0/1 (Hamming) for text or mismatched tags. Lists of different length
/// are infinitely far apart.
pub fn constants_distance(a: &[Constant], b: &[Constant]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    if a.is_empty() {
        return 0.0;
    }
    let total: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| match (x.tag, y.tag) {
            (ConstantTag::Number, ConstantTag::Number) => {
                let (fx, fy) = (
                    x.text.parse::<f64>().unwrap_or(f64::NAN),
                    y.text.parse::<f64>().unwrap_or(f64::NAN),
                );
                if fx.is_nan() || fy.is_nan() {
                    if x.text == y.text {
                        0.0
                    } else {
                        1.0
                    }
                } else {
                    (fx - fy).abs() / (1.0 + fx.abs() + fy.abs())
                }
            }
            (ConstantTag::Text, ConstantTag::Text)
                if x.text == y.text => {
                    0.0
                }
            _ => 1.0,
        })
        .sum();
    total / a.len() as f64
}

/// Computes the signature of a decomposed query.
///
/// The remainder is normalized first, assigning placeholder slots in
/// appearance order; containers are then normalized in slot order, not
/// id order. Relabeling container ids therefore cannot change the hash,
/// the objects or the constants.
pub fn signature_of(containers: &[Container], remainder: &Remainder) -> Signature {
    let mut norm = Normalizer::default();

    let remainder_segment = if remainder.is_trivial() {
        let c = &containers[0];
        norm.placeholders.insert(format!("c{}", c.id), 0);
        format!("{}:$p0", remainder.island)
    } else {
        let text = remainder
            .execution_text()
            .unwrap_or_else(|_| remainder.text());
        format!(
            "{}:{}",
            remainder.island,
            norm.segment(language_of(&remainder.island), &text)
        )
    };

    // container ids in placeholder-slot order, then any unreferenced
    // leftovers by id
    let mut by_slot: Vec<(usize, usize)> = norm
        .placeholders
        .iter()
        .filter_map(|(name, slot)| {
            let id = name.strip_prefix('c')?.parse::<usize>().ok()?;
            Some((*slot, id))
        })
        .collect();
    by_slot.sort();
    let mut order: Vec<usize> = by_slot.into_iter().map(|(_, id)| id).collect();
    for c in containers {
        if !order.contains(&c.id) {
            order.push(c.id);
        }
    }

    let mut segments = vec![remainder_segment];
    for id in order {
        if let Some(c) = containers.iter().find(|c| c.id == id) {
            let lang = language_of(&c.island);
            segments.push(format!("{}:{}", c.island, norm.segment(lang, &c.text)));
        }
    }

    let mut hasher = Sha256::new();
    for s in &segments {
        hasher.update(s.as_bytes());
        hasher.update([0u8]);
    }
    let structure_hash = hex(&hasher.finalize());

    let mut objects: Vec<String> = norm.objects.keys().cloned().collect();
    objects.sort();

    Signature {
        structure_hash,
        objects,
        constants: norm.constants,
    }
}

fn language_of(island: &str) -> Language {
    IslandRegistry::global()
        .get(island)
        .map(|i| i.language)
        .unwrap_or(Language::Sql)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Shared normalization state: object → slot assignment in first-seen
/// order, placeholder renumbering, collected constants.
#[derive(Default)]
struct Normalizer {
    objects: HashMap<String, usize>,
    placeholders: HashMap<String, usize>,
    constants: Vec<Constant>,
}

impl Normalizer {
    fn object_slot(&mut self, name: &str) -> String {
        if let Some(stripped) = name.strip_prefix('$') {
            let next = self.placeholders.len();
            let id = *self
                .placeholders
                .entry(stripped.to_string())
                .or_insert(next);
            return format!("$p{id}");
        }
        let next = self.objects.len();
        let id = *self.objects.entry(name.to_string()).or_insert(next);
        format!("@{id}")
    }

    /// Falls back to the raw text when the segment does not parse in its
    /// island language; the signature stays deterministic either way.
    fn segment(&mut self, language: Language, text: &str) -> String {
        match language {
            Language::Sql => self.sql(text),
            Language::ArrayExpr => self.array(text),
            Language::KvOps => self.kv(text),
        }
        .unwrap_or_else(|| format!("raw:{text}"))
    }

    fn sql(&mut self, text: &str) -> Option<String> {
        use atoll_engines::relational::{Operand, Projection, SelectItem};
        let stmt = parse_statement(text).ok()?;

        let mut out = String::from("select ");
        match &stmt.projection {
            Projection::Star => out.push('*'),
            Projection::Items { distinct, items } => {
                if *distinct {
                    out.push_str("distinct ");
                }
                let rendered: Vec<String> = items
                    .iter()
                    .map(|item| match item {
                        SelectItem::Column(c) => c.display(),
                        SelectItem::CountStar => "count(*)".to_string(),
                        SelectItem::Sum(s) => match &s.right {
                            None => format!("sum({})", s.left.display()),
                            Some(r) => format!("sum({} * {})", s.left.display(), r.display()),
                        },
                    })
                    .collect();
                out.push_str(&rendered.join(", "));
            }
        }
        let from_slot = self.object_slot(&stmt.from.table);
        out.push_str(&format!(" from {from_slot}"));
        if let Some(join) = &stmt.join {
            let join_slot = self.object_slot(&join.table.table);
            out.push_str(&format!(
                " join {join_slot} on {} = {}",
                join.left.display(),
                join.right.display()
            ));
        }
        if !stmt.predicates.is_empty() {
            let preds: Vec<String> = stmt
                .predicates
                .iter()
                .map(|p| {
                    let render = |this: &mut Self, op: &Operand| match op {
                        Operand::Column(c) => c.display(),
                        Operand::Literal(v) => {
                            this.constants.push(match v {
                                Value::Text(s) => Constant::text(s),
                                Value::Int(i) => Constant::number(*i as f64),
                                Value::Float(f) => Constant::number(*f),
                            });
                            match v {
                                Value::Text(_) => "?s".to_string(),
                                _ => "?n".to_string(),
                            }
                        }
                    };
                    let left = render(self, &p.left);
                    let right = render(self, &p.right);
                    format!("{left} {} {right}", p.op.symbol())
                })
                .collect();
            out.push_str(&format!(" where {}", preds.join(" and ")));
        }
        if !stmt.group_by.is_empty() {
            let cols: Vec<String> = stmt.group_by.iter().map(|c| c.display()).collect();
            out.push_str(&format!(" group by {}", cols.join(", ")));
        }
        if let Some(limit) = stmt.limit {
            self.constants.push(Constant::number(limit as f64));
            out.push_str(" limit ?n");
        }
        Some(out)
    }

    fn array(&mut self, text: &str) -> Option<String> {
        let expr = atoll_engines::array::parse_expr(text).ok()?;
        Some(self.array_expr(&expr))
    }

    fn array_expr(&mut self, expr: &ArrayExpr) -> String {
        match expr {
            ArrayExpr::Ref(name) => self.object_slot(name),
            ArrayExpr::Scan(e) => format!("scan({})", self.array_expr(e)),
            ArrayExpr::Count(e) => format!("count({})", self.array_expr(e)),
            ArrayExpr::Distinct(e) => format!("distinct({})", self.array_expr(e)),
            ArrayExpr::DwtHaar(e) => format!("dwt_haar({})", self.array_expr(e)),
            ArrayExpr::Multiply(a, b) => {
                format!("multiply({}, {})", self.array_expr(a), self.array_expr(b))
            }
            ArrayExpr::Filter(e, preds) => {
                let inner = self.array_expr(e);
                let rendered: Vec<String> = preds
                    .iter()
                    .map(|CellPredicate { term, op, value }| {
                        self.constants.push(Constant::number(*value));
                        let t = match term {
                            CellTerm::Value => "val".to_string(),
                            CellTerm::Dim(d) => format!("d{d}"),
                        };
                        format!("{t} {} ?n", op.symbol())
                    })
                    .collect();
                format!("filter({inner}, {})", rendered.join(" and "))
            }
            ArrayExpr::BinHist { input, lo, hi, bins } => {
                let inner = self.array_expr(input);
                for v in [*lo, *hi, *bins as f64] {
                    self.constants.push(Constant::number(v));
                }
                format!("bin_hist({inner}, ?n, ?n, ?n)")
            }
            ArrayExpr::Subarray { input, ranges } => {
                let inner = self.array_expr(input);
                let mut rendered = Vec::new();
                for (lo, hi) in ranges {
                    self.constants.push(Constant::number(*lo as f64));
                    self.constants.push(Constant::number(*hi as f64));
                    rendered.push("?n, ?n".to_string());
                }
                format!("subarray({inner}, {})", rendered.join(", "))
            }
        }
    }

    fn kv(&mut self, text: &str) -> Option<String> {
        match parse_kv_query(text).ok()? {
            KvQuery::Scan { store, prefix } => {
                let slot = self.object_slot(&store);
                self.constants.push(Constant::text(&prefix));
                Some(format!("scan({slot}, ?s)"))
            }
            KvQuery::TermCount { store, prefix, field } => {
                let slot = self.object_slot(&store);
                self.constants.push(Constant::text(&prefix));
                self.constants.push(Constant::text(&field));
                Some(format!("termcount({slot}, ?s, ?s)"))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use atoll_islands::registry::IslandRegistry;
    use atoll_islands::{decompose, poly_parse};

    fn sig(query: &str) -> Signature {
        let ast = poly_parse(query, &IslandRegistry::new()).unwrap();
        let (containers, remainder) = decompose(&ast);
        signature_of(&containers, &remainder)
    }

    #[test]
    fn literal_change_keeps_hash_changes_constants() {
        let a = sig("RELATIONAL(select a from T where a > 5)");
        let b = sig("RELATIONAL(select a from T where a > 7)");
        assert_eq!(a.structure_hash, b.structure_hash);
        assert_eq!(a.objects, b.objects);
        assert_eq!(a.constants[0].text, "5");
        assert_eq!(b.constants[0].text, "7");
    }

    #[test]
    fn identical_queries_identical_signatures() {
        let q = "ARRAY(multiply(RELATIONAL(select * from A),B))";
        assert_eq!(sig(q), sig(q));
    }

    #[test]
    fn table_swap_keeps_hash_changes_objects() {
        let a = sig("RELATIONAL(select a from T where a > 5)");
        let b = sig("RELATIONAL(select a from U where a > 5)");
        assert_eq!(a.structure_hash, b.structure_hash);
        assert_ne!(a.objects, b.objects);
        assert_eq!(a.objects, vec!["T".to_string()]);
        assert_eq!(b.objects, vec!["U".to_string()]);
    }

    #[test]
    fn remainder_objects_are_included() {
        let s = sig("ARRAY(multiply(RELATIONAL(select * from A),B))");
        assert_eq!(s.objects, vec!["A".to_string(), "B".to_string()]);
    }

    #[test]
    fn constant_distance_prefers_nearer_literals() {
        let five = vec![Constant::number(5.0)];
        let four = vec![Constant::number(4.0)];
        let ninety = vec![Constant::number(90.0)];
        assert!(constants_distance(&five, &four) < constants_distance(&five, &ninety));
        assert_eq!(constants_distance(&five, &five), 0.0);
    }

    #[test]
    fn different_statements_differ_in_hash() {
        let a = sig("RELATIONAL(select count(*) from T)");
        let b = sig("RELATIONAL(select distinct a from T)");
        assert_ne!(a.structure_hash, b.structure_hash);
    }

    #[test]
    fn container_id_permutation_does_not_change_signature() {
        use atoll_islands::scope::{ScopeNode, Segment};

        let q = "ARRAY(multiply(RELATIONAL(select * from A),RELATIONAL(select * from B)))";
        let ast = poly_parse(q, &IslandRegistry::new()).unwrap();
        let (containers, remainder) = decompose(&ast);
        let original = signature_of(&containers, &remainder);

        // relabel ids 0<->1 everywhere and reverse the slice
        fn swap_placeholders(node: &ScopeNode) -> ScopeNode {
            ScopeNode {
                island: node.island.clone(),
                segments: node
                    .segments
                    .iter()
                    .map(|s| match s {
                        Segment::Placeholder(i) => Segment::Placeholder(1 - i),
                        Segment::Child(c) => Segment::Child(swap_placeholders(c)),
                        Segment::Text(t) => Segment::Text(t.clone()),
                    })
                    .collect(),
            }
        }
        let mut permuted: Vec<_> = containers.clone();
        permuted.reverse();
        for c in &mut permuted {
            c.id = 1 - c.id;
        }
        let permuted_remainder = atoll_islands::Remainder {
            island: remainder.island.clone(),
            node: swap_placeholders(&remainder.node),
        };
        let relabeled = signature_of(&permuted, &permuted_remainder);
        assert_eq!(original, relabeled);
    }
}
