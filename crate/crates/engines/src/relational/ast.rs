//! Parsed form of one statement in the dialect.

use crate::value::Value;

pub use crate::value::CmpOp;

/// Column reference, optionally qualified by a table name or alias.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnRef {
    pub qualifier: Option<String>,
    pub column: String,
}

impl ColumnRef {
    pub fn bare(column: impl Into<String>) -> ColumnRef {
        ColumnRef {
            qualifier: None,
            column: column.into(),
        }
    }

    pub fn display(&self) -> String {
        match &self.qualifier {
            Some(q) => format!("{q}.{}", self.column),
            None => self.column.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Column(ColumnRef),
    Literal(Value),
}

/// One conjunct of the WHERE clause: `operand ⊙ operand` with at least
/// one column operand.
#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub left: Operand,
    pub op: CmpOp,
    pub right: Operand,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRef {
    pub table: String,
    pub alias: Option<String>,
}

impl TableRef {
    /// The name columns may qualify against: the alias when present.
    pub fn binding(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.table)
    }
}

/// Inner equi-join: `JOIN table ON left = right`.
#[derive(Debug, Clone, PartialEq)]
pub struct Join {
    pub table: TableRef,
    pub left: ColumnRef,
    pub right: ColumnRef,
}

/// `SUM(col)` or `SUM(col * col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SumExpr {
    pub left: ColumnRef,
    pub right: Option<ColumnRef>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectItem {
    Column(ColumnRef),
    CountStar,
    Sum(SumExpr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    /// `SELECT *`
    Star,
    /// `SELECT [DISTINCT] a, b, SUM(x), COUNT(*)`
    Items { distinct: bool, items: Vec<SelectItem> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectStatement {
    pub projection: Projection,
    pub from: TableRef,
    pub join: Option<Join>,
    pub predicates: Vec<Predicate>,
    pub group_by: Vec<ColumnRef>,
    pub limit: Option<usize>,
}

impl SelectStatement {
    /// True when the statement is a bare `SELECT COUNT(*) …` without
    /// grouping, which produces a scalar.
    pub fn is_bare_count(&self) -> bool {
        self.group_by.is_empty()
            && matches!(
                &self.projection,
                Projection::Items { distinct: false, items } if items.len() == 1
                    && matches!(items[0], SelectItem::CountStar)
            )
    }

    /// All literals in the statement, in source order. Used by query
    /// signatures.
    pub fn literals(&self) -> Vec<Value> {
        let mut out = Vec::new();
        for p in &self.predicates {
            for side in [&p.left, &p.right] {
                if let Operand::Literal(v) = side {
                    out.push(v.clone());
                }
            }
        }
        out
    }
}
