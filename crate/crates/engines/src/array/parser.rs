//! Parser for the functional operator language.
//!
//! ```text
//! expr := identifier
//!       | scan '(' expr ')'
//!       | count '(' expr ')'
//!       | distinct '(' expr ')'
//!       | dwt_haar '(' expr ')'
//!       | multiply '(' expr ',' expr ')'
//!       | filter '(' expr ',' pred (and pred)* ')'
//!       | bin_hist '(' expr ',' number ',' number ',' integer ')'
//!       | subarray '(' expr ',' integer ',' integer [',' integer ',' integer] ')'
//! pred := (val | d0 | d1 | …) op number
//! op   := '=' | '<>' | '<' | '<=' | '>' | '>='
//! ```
//!
//! Identifiers may start with `$`, which the polystore layer uses for
//! container placeholders.

use crate::value::CmpOp;

use super::ArrayError;

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayExpr {
    Ref(String),
    Scan(Box<ArrayExpr>),
    Count(Box<ArrayExpr>),
    Distinct(Box<ArrayExpr>),
    DwtHaar(Box<ArrayExpr>),
    Multiply(Box<ArrayExpr>, Box<ArrayExpr>),
    Filter(Box<ArrayExpr>, Vec<CellPredicate>),
    BinHist {
        input: Box<ArrayExpr>,
        lo: f64,
        hi: f64,
        bins: usize,
    },
    Subarray {
        input: Box<ArrayExpr>,
        ranges: Vec<(usize, usize)>,
    },
}

impl ArrayExpr {
    pub fn collect_refs(&self, out: &mut Vec<String>) {
        match self {
            ArrayExpr::Ref(name) => out.push(name.clone()),
            ArrayExpr::Scan(e)
            | ArrayExpr::Count(e)
            | ArrayExpr::Distinct(e)
            | ArrayExpr::DwtHaar(e) => e.collect_refs(out),
            ArrayExpr::Multiply(a, b) => {
                a.collect_refs(out);
                b.collect_refs(out);
            }
            ArrayExpr::Filter(e, _) => e.collect_refs(out),
            ArrayExpr::BinHist { input, .. } | ArrayExpr::Subarray { input, .. } => {
                input.collect_refs(out)
            }
        }
    }
}

/// Predicate over one cell: its value or one of its coordinates against
/// a numeric literal.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPredicate {
    pub term: CellTerm,
    pub op: CmpOp,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellTerm {
    Value,
    Dim(usize),
}

pub fn parse_expr(text: &str) -> Result<ArrayExpr, ArrayError> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        end: text.len(),
    };
    let expr = p.expr()?;
    if let Some((_, pos)) = p.peek() {
        return Err(ArrayError::Parse {
            position: *pos,
            message: "trailing input after expression".into(),
        });
    }
    Ok(expr)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Integer(i64),
    LParen,
    RParen,
    Comma,
    Cmp(CmpOp),
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ArrayError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'(' => {
                out.push((Tok::LParen, i));
                i += 1;
            }
            b')' => {
                out.push((Tok::RParen, i));
                i += 1;
            }
            b',' => {
                out.push((Tok::Comma, i));
                i += 1;
            }
            b'=' => {
                out.push((Tok::Cmp(CmpOp::Eq), i));
                i += 1;
            }
            b'<' => {
                let (tok, w) = match bytes.get(i + 1) {
                    Some(b'>') => (Tok::Cmp(CmpOp::Ne), 2),
                    Some(b'=') => (Tok::Cmp(CmpOp::Le), 2),
                    _ => (Tok::Cmp(CmpOp::Lt), 1),
                };
                out.push((tok, i));
                i += w;
            }
            b'>' => {
                let (tok, w) = match bytes.get(i + 1) {
                    Some(b'=') => (Tok::Cmp(CmpOp::Ge), 2),
                    _ => (Tok::Cmp(CmpOp::Gt), 1),
                };
                out.push((tok, i));
                i += w;
            }
            c if c.is_ascii_digit() || (c == b'-' && matches!(bytes.get(i + 1), Some(d) if d.is_ascii_digit())) => {
                let start = i;
                if bytes[i] == b'-' {
                    i += 1;
                }
                let mut is_float = false;
                while i < bytes.len() {
                    match bytes[i] {
                        b'0'..=b'9' => i += 1,
                        b'.' if !is_float => {
                            is_float = true;
                            i += 1;
                        }
                        b'e' | b'E' if matches!(bytes.get(i + 1), Some(b'0'..=b'9' | b'-' | b'+')) => {
                            is_float = true;
                            i += 2;
                        }
                        _ => break,
                    }
                }
                let raw = &text[start..i];
                let tok = if is_float {
                    Tok::Number(raw.parse().map_err(|_| ArrayError::Parse {
                        position: start,
                        message: format!("bad number `{raw}`"),
                    })?)
                } else {
                    Tok::Integer(raw.parse().map_err(|_| ArrayError::Parse {
                        position: start,
                        message: format!("bad integer `{raw}`"),
                    })?)
                };
                out.push((tok, start));
            }
            c if c == b'_' || c == b'$' || c.is_ascii_alphabetic() => {
                let start = i;
                i += 1;
                while i < bytes.len() && (bytes[i] == b'_' || bytes[i].is_ascii_alphanumeric()) {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
            }
            other => {
                return Err(ArrayError::Parse {
                    position: i,
                    message: format!("unexpected character `{}`", other as char),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&(Tok, usize)> {
        self.tokens.get(self.pos)
    }

    fn here(&self) -> usize {
        self.peek().map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn err(&self, message: impl Into<String>) -> ArrayError {
        ArrayError::Parse {
            position: self.here(),
            message: message.into(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ArrayError> {
        if self.peek().map(|(t, _)| t) == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn number(&mut self, what: &str) -> Result<f64, ArrayError> {
        match self.peek().cloned() {
            Some((Tok::Number(f), _)) => {
                self.pos += 1;
                Ok(f)
            }
            Some((Tok::Integer(n), _)) => {
                self.pos += 1;
                Ok(n as f64)
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn integer(&mut self, what: &str) -> Result<usize, ArrayError> {
        match self.peek().cloned() {
            Some((Tok::Integer(n), pos)) if n >= 0 => {
                self.pos += 1;
                let _ = pos;
                Ok(n as usize)
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn expr(&mut self) -> Result<ArrayExpr, ArrayError> {
        let (name, pos) = match self.peek().cloned() {
            Some((Tok::Ident(name), pos)) => {
                self.pos += 1;
                (name, pos)
            }
            _ => return Err(self.err("expected operator or array name")),
        };
        if self.peek().map(|(t, _)| t) != Some(&Tok::LParen) {
            return Ok(ArrayExpr::Ref(name));
        }
        self.pos += 1; // consume '('
        let expr = match name.as_str() {
            "scan" => ArrayExpr::Scan(Box::new(self.expr()?)),
            "count" => ArrayExpr::Count(Box::new(self.expr()?)),
            "distinct" => ArrayExpr::Distinct(Box::new(self.expr()?)),
            "dwt_haar" => ArrayExpr::DwtHaar(Box::new(self.expr()?)),
            "multiply" => {
                let a = self.expr()?;
                self.expect(Tok::Comma, "`,` between multiply operands")?;
                let b = self.expr()?;
                ArrayExpr::Multiply(Box::new(a), Box::new(b))
            }
            "filter" => {
                let input = self.expr()?;
                self.expect(Tok::Comma, "`,` before filter predicate")?;
                let mut preds = vec![self.predicate()?];
                while let Some((Tok::Ident(s), _)) = self.peek() {
                    if s == "and" {
                        self.pos += 1;
                        preds.push(self.predicate()?);
                    } else {
                        break;
                    }
                }
                ArrayExpr::Filter(Box::new(input), preds)
            }
            "bin_hist" => {
                let input = self.expr()?;
                self.expect(Tok::Comma, "`,` after bin_hist input")?;
                let lo = self.number("lower bound")?;
                self.expect(Tok::Comma, "`,` after lower bound")?;
                let hi = self.number("upper bound")?;
                self.expect(Tok::Comma, "`,` after upper bound")?;
                let bins = self.integer("bin count")?;
                ArrayExpr::BinHist {
                    input: Box::new(input),
                    lo,
                    hi,
                    bins,
                }
            }
            "subarray" => {
                let input = self.expr()?;
                let mut ranges = Vec::new();
                while self.peek().map(|(t, _)| t) == Some(&Tok::Comma) {
                    self.pos += 1;
                    let lo = self.integer("range start")?;
                    self.expect(Tok::Comma, "`,` between range bounds")?;
                    let hi = self.integer("range end")?;
                    ranges.push((lo, hi));
                }
                if ranges.is_empty() || ranges.len() > 2 {
                    return Err(ArrayError::Parse {
                        position: pos,
                        message: "subarray takes one or two index ranges".into(),
                    });
                }
                ArrayExpr::Subarray {
                    input: Box::new(input),
                    ranges,
                }
            }
            other => {
                return Err(ArrayError::Parse {
                    position: pos,
                    message: format!("unknown operator `{other}`"),
                })
            }
        };
        self.expect(Tok::RParen, "closing `)`")?;
        Ok(expr)
    }

    fn predicate(&mut self) -> Result<CellPredicate, ArrayError> {
        let term = match self.peek().cloned() {
            Some((Tok::Ident(s), pos)) => {
                self.pos += 1;
                if s == "val" {
                    CellTerm::Value
                } else if let Some(rest) = s.strip_prefix('d') {
                    let idx = rest.parse::<usize>().map_err(|_| ArrayError::Parse {
                        position: pos,
                        message: format!("predicate term must be `val` or `d<k>`, got `{s}`"),
                    })?;
                    CellTerm::Dim(idx)
                } else {
                    return Err(ArrayError::Parse {
                        position: pos,
                        message: format!("predicate term must be `val` or `d<k>`, got `{s}`"),
                    });
                }
            }
            _ => return Err(self.err("expected predicate term")),
        };
        let op = match self.peek().cloned() {
            Some((Tok::Cmp(op), _)) => {
                self.pos += 1;
                op
            }
            _ => return Err(self.err("expected comparison operator")),
        };
        let value = self.number("numeric literal")?;
        Ok(CellPredicate { term, op, value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nested_expression() {
        let e = parse_expr("count(filter(A, val > 0.5 and d0 < 2))").unwrap();
        let ArrayExpr::Count(inner) = e else { panic!() };
        let ArrayExpr::Filter(input, preds) = *inner else { panic!() };
        assert_eq!(*input, ArrayExpr::Ref("A".into()));
        assert_eq!(preds.len(), 2);
        assert_eq!(preds[1].term, CellTerm::Dim(0));
    }

    #[test]
    fn placeholder_idents_parse() {
        let e = parse_expr("multiply($c0, B)").unwrap();
        let mut refs = Vec::new();
        e.collect_refs(&mut refs);
        assert_eq!(refs, vec!["$c0".to_string(), "B".to_string()]);
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse_expr("multiply(A B)").unwrap_err();
        assert!(matches!(err, ArrayError::Parse { position: 11, .. }), "{err:?}");
        let err = parse_expr("frobnicate(A)").unwrap_err();
        assert!(matches!(err, ArrayError::Parse { .. }));
    }
}
