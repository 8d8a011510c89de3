//! Recursive-descent parser for the dialect.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::RelationalError;
use crate::value::Value;

/// Parses one statement of the dialect.
///
/// ```text
/// statement  := SELECT projection FROM table_ref
///               [JOIN table_ref ON column '=' column]
///               [WHERE predicate (AND predicate)*]
///               [GROUP BY column (',' column)*]
///               [LIMIT integer]
/// projection := '*' | [DISTINCT] item (',' item)*
/// item       := COUNT '(' '*' ')'
///             | SUM '(' column ['*' column] ')'
///             | column
/// column     := identifier ['.' identifier]
/// table_ref  := identifier [identifier]        -- optional alias
/// predicate  := operand op operand              -- at least one column
/// op         := '=' | '<>' | '<' | '<=' | '>' | '>='
/// literal    := integer | float | 'text'        -- '' escapes a quote
/// ```
///
/// Keywords are case-insensitive. There are no subqueries, no ORDER BY,
/// no outer joins and at most one equi-join. Errors carry the byte
/// position of the offending token.
pub fn parse_statement(input: &str) -> Result<SelectStatement, RelationalError> {
    let tokens = tokenize(input)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        end: input.len(),
    };
    let stmt = p.statement()?;
    if let Some(t) = p.peek() {
        return Err(p.error_at(t.pos, "trailing input after statement"));
    }
    Ok(stmt)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> usize {
        self.peek().map(|t| t.pos).unwrap_or(self.end)
    }

    fn error_at(&self, position: usize, message: impl Into<String>) -> RelationalError {
        RelationalError::Parse {
            position,
            message: message.into(),
        }
    }

    fn expected(&self, what: &str) -> RelationalError {
        let found = match self.peek() {
            Some(t) => format!("{:?}", t.tok),
            None => "end of input".to_string(),
        };
        self.error_at(self.here(), format!("expected {what}, found {found}"))
    }

    /// Consumes the next token if it is the given keyword.
    fn eat_keyword(&mut self, kw: &str) -> bool {
        if let Some(Token { tok: Tok::Ident(s), .. }) = self.peek() {
            if s.eq_ignore_ascii_case(kw) {
                self.pos += 1;
                return true;
            }
        }
        false
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), RelationalError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.expected(&format!("keyword {kw}")))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek().map(|t| &t.tok) == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), RelationalError> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.expected(what))
        }
    }

    /// Identifier that is not one of the reserved keywords.
    fn ident(&mut self, what: &str) -> Result<String, RelationalError> {
        match self.peek() {
            Some(Token { tok: Tok::Ident(s), .. }) if !is_keyword(s) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.expected(what)),
        }
    }

    fn statement(&mut self) -> Result<SelectStatement, RelationalError> {
        self.expect_keyword("select")?;
        let projection = self.projection()?;
        self.expect_keyword("from")?;
        let from = self.table_ref()?;

        let join = if self.eat_keyword("join") {
            let table = self.table_ref()?;
            self.expect_keyword("on")?;
            let left = self.column()?;
            self.expect(Tok::Eq, "`=` in join condition")?;
            let right = self.column()?;
            Some(Join { table, left, right })
        } else {
            None
        };

        let mut predicates = Vec::new();
        if self.eat_keyword("where") {
            loop {
                predicates.push(self.predicate()?);
                if !self.eat_keyword("and") {
                    break;
                }
            }
        }

        let mut group_by = Vec::new();
        if self.eat_keyword("group") {
            self.expect_keyword("by")?;
            loop {
                group_by.push(self.column()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }

        let limit = if self.eat_keyword("limit") {
            match self.next() {
                Some(Token { tok: Tok::Int(n), pos }) => {
                    if n < 0 {
                        return Err(self.error_at(pos, "LIMIT must be non-negative"));
                    }
                    Some(n as usize)
                }
                _ => return Err(self.expected("integer after LIMIT")),
            }
        } else {
            None
        };

        Ok(SelectStatement {
            projection,
            from,
            join,
            predicates,
            group_by,
            limit,
        })
    }

    fn projection(&mut self) -> Result<Projection, RelationalError> {
        if self.eat(&Tok::Star) {
            return Ok(Projection::Star);
        }
        let distinct = self.eat_keyword("distinct");
        let mut items = Vec::new();
        loop {
            items.push(self.select_item(distinct)?);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        Ok(Projection::Items { distinct, items })
    }

    fn select_item(&mut self, in_distinct: bool) -> Result<SelectItem, RelationalError> {
        if let Some(Token { tok: Tok::Ident(s), pos }) = self.peek().cloned() {
            if s.eq_ignore_ascii_case("count") {
                self.pos += 1;
                self.expect(Tok::LParen, "`(` after COUNT")?;
                self.expect(Tok::Star, "`*` inside COUNT")?;
                self.expect(Tok::RParen, "`)` after COUNT(*)")?;
                if in_distinct {
                    return Err(self.error_at(pos, "COUNT(*) cannot appear under DISTINCT"));
                }
                return Ok(SelectItem::CountStar);
            }
            if s.eq_ignore_ascii_case("sum") {
                self.pos += 1;
                self.expect(Tok::LParen, "`(` after SUM")?;
                let left = self.column()?;
                let right = if self.eat(&Tok::Star) {
                    Some(self.column()?)
                } else {
                    None
                };
                self.expect(Tok::RParen, "`)` after SUM argument")?;
                if in_distinct {
                    return Err(self.error_at(pos, "SUM cannot appear under DISTINCT"));
                }
                return Ok(SelectItem::Sum(SumExpr { left, right }));
            }
        }
        Ok(SelectItem::Column(self.column()?))
    }

    fn table_ref(&mut self) -> Result<TableRef, RelationalError> {
        let table = self.ident("table name")?;
        // A following non-keyword identifier is an alias.
        let alias = match self.peek() {
            Some(Token { tok: Tok::Ident(s), .. }) if !is_keyword(s) => {
                let a = s.clone();
                self.pos += 1;
                Some(a)
            }
            _ => None,
        };
        Ok(TableRef { table, alias })
    }

    fn column(&mut self) -> Result<ColumnRef, RelationalError> {
        let first = self.ident("column name")?;
        if self.eat(&Tok::Dot) {
            let column = self.ident("column name after `.`")?;
            Ok(ColumnRef {
                qualifier: Some(first),
                column,
            })
        } else {
            Ok(ColumnRef {
                qualifier: None,
                column: first,
            })
        }
    }

    fn predicate(&mut self) -> Result<Predicate, RelationalError> {
        let start = self.here();
        let left = self.operand()?;
        let op = match self.next() {
            Some(Token { tok: Tok::Eq, .. }) => CmpOp::Eq,
            Some(Token { tok: Tok::Ne, .. }) => CmpOp::Ne,
            Some(Token { tok: Tok::Lt, .. }) => CmpOp::Lt,
            Some(Token { tok: Tok::Le, .. }) => CmpOp::Le,
            Some(Token { tok: Tok::Gt, .. }) => CmpOp::Gt,
            Some(Token { tok: Tok::Ge, .. }) => CmpOp::Ge,
            _ => return Err(self.expected("comparison operator")),
        };
        let right = self.operand()?;
        if matches!(left, Operand::Literal(_)) && matches!(right, Operand::Literal(_)) {
            return Err(self.error_at(start, "predicate needs at least one column operand"));
        }
        Ok(Predicate { left, op, right })
    }

    fn operand(&mut self) -> Result<Operand, RelationalError> {
        match self.peek().cloned() {
            Some(Token { tok: Tok::Int(n), .. }) => {
                self.pos += 1;
                Ok(Operand::Literal(Value::Int(n)))
            }
            Some(Token { tok: Tok::Float(f), .. }) => {
                self.pos += 1;
                Ok(Operand::Literal(Value::Float(f)))
            }
            Some(Token { tok: Tok::Str(s), .. }) => {
                self.pos += 1;
                Ok(Operand::Literal(Value::Text(s)))
            }
            _ => Ok(Operand::Column(self.column()?)),
        }
    }
}

fn is_keyword(s: &str) -> bool {
    const KEYWORDS: &[&str] = &[
        "select", "distinct", "count", "sum", "from", "join", "on", "where", "and", "group",
        "by", "limit",
    ];
    KEYWORDS.iter().any(|k| s.eq_ignore_ascii_case(k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_star_select() {
        let s = parse_statement("select * from A").unwrap();
        assert_eq!(s.projection, Projection::Star);
        assert_eq!(s.from.table, "A");
    }

    #[test]
    fn parses_join_with_aliases_and_group_by() {
        let s = parse_statement(
            "SELECT a.d0, b.d1, SUM(a.val * b.val) FROM A_cells a JOIN B_cells b \
             ON a.d1 = b.d0 GROUP BY a.d0, b.d1",
        )
        .unwrap();
        assert_eq!(s.from.alias.as_deref(), Some("a"));
        let join = s.join.unwrap();
        assert_eq!(join.table.table, "B_cells");
        assert_eq!(s.group_by.len(), 2);
    }

    #[test]
    fn parses_where_conjunction() {
        let s = parse_statement("select a from T where a > 5 and b = 'x''y'").unwrap();
        assert_eq!(s.predicates.len(), 2);
        assert_eq!(
            s.predicates[1].right,
            Operand::Literal(Value::Text("x'y".into()))
        );
    }

    #[test]
    fn rejects_outside_dialect_with_position() {
        for bad in [
            "insert into T values (1)",
            "select * from T order by a",
            "select a from",
            "select * from T where 1 = 2",
            "select * from T limit",
            "select * from T extra garbage",
        ] {
            match parse_statement(bad) {
                Err(RelationalError::Parse { .. }) => (),
                other => panic!("`{bad}` should be a parse error, got {other:?}"),
            }
        }
    }
}
