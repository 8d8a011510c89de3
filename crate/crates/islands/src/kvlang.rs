//! The TEXT island's operator language over the key-value engine.
//!
//! ```text
//! query := scan '(' store ',' 'prefix' ')'
//!        | termcount '(' store ',' 'prefix' ',' 'field' ')'
//! ```
//!
//! `scan` returns the matching documents; `termcount` returns a
//! two-column (term, count) relation.

use atoll_engines::{KvEngine, KvError, Relation, Schema, Value, ValueType};
use thiserror::Error;

use super::result::QueryValue;

#[derive(Debug, Error, PartialEq)]
pub enum KvLangError {
    #[error("kv query parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },
    #[error(transparent)]
    Engine(#[from] KvError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum KvQuery {
    Scan { store: String, prefix: String },
    TermCount { store: String, prefix: String, field: String },
}

impl KvQuery {
    pub fn store(&self) -> &str {
        match self {
            KvQuery::Scan { store, .. } | KvQuery::TermCount { store, .. } => store,
        }
    }
}

pub fn parse_kv_query(text: &str) -> Result<KvQuery, KvLangError> {
    let mut p = Cursor { text, pos: 0 };
    p.skip_ws();
    let op = p.ident()?;
    p.expect('(')?;
    let store = p.ident()?;
    p.expect(',')?;
    let prefix = p.string()?;
    let query = match op.as_str() {
        "scan" => KvQuery::Scan { store, prefix },
        "termcount" => {
            p.expect(',')?;
            let field = p.string()?;
            KvQuery::TermCount { store, prefix, field }
        }
        other => {
            return Err(KvLangError::Parse {
                position: 0,
                message: format!("unknown operator `{other}` (expected scan or termcount)"),
            })
        }
    };
    p.expect(')')?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(KvLangError::Parse {
            position: p.pos,
            message: "trailing input after query".into(),
        });
    }
    Ok(query)
}

/// Store names referenced by a query, `$` placeholders included (the
/// caller filters them).
pub fn referenced_stores(text: &str) -> Result<Vec<String>, KvLangError> {
    Ok(vec![parse_kv_query(text)?.store().to_string()])
}

pub fn run_kv_query(engine: &KvEngine, text: &str) -> Result<QueryValue, KvLangError> {
    match parse_kv_query(text)? {
        KvQuery::Scan { store, prefix } => Ok(QueryValue::Docs(engine.scan(&store, &prefix)?)),
        KvQuery::TermCount { store, prefix, field } => {
            let counts = engine.termcount(&store, &prefix, &field)?;
            let rows = counts
                .into_iter()
                .map(|(term, n)| vec![Value::Text(term), Value::Int(n as i64)])
                .collect();
            Ok(QueryValue::Table(Relation {
                name: String::new(),
                schema: Schema(vec![
                    ("term".to_string(), ValueType::Text),
                    ("count".to_string(), ValueType::Int64),
                ]),
                rows,
            }))
        }
    }
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.text[self.pos..].chars().next() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn err(&self, message: impl Into<String>) -> KvLangError {
        KvLangError::Parse {
            position: self.pos,
            message: message.into(),
        }
    }

    fn expect(&mut self, c: char) -> Result<(), KvLangError> {
        self.skip_ws();
        if self.text[self.pos..].starts_with(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.err(format!("expected `{c}`")))
        }
    }

    fn ident(&mut self) -> Result<String, KvLangError> {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let mut end = 0;
        for (i, c) in rest.char_indices() {
            if c.is_ascii_alphanumeric() || c == '_' || (i == 0 && c == '$') {
                end = i + c.len_utf8();
            } else {
                break;
            }
        }
        if end == 0 {
            return Err(self.err("expected identifier"));
        }
        self.pos += end;
        Ok(rest[..end].to_string())
    }

    /// Single-quoted string with `''` escapes.
    fn string(&mut self) -> Result<String, KvLangError> {
        self.skip_ws();
        if !self.text[self.pos..].starts_with('\'') {
            return Err(self.err("expected quoted string"));
        }
        let start = self.pos;
        self.pos += 1;
        let mut out = String::new();
        loop {
            let rest = &self.text[self.pos..];
            let Some(c) = rest.chars().next() else {
                return Err(KvLangError::Parse {
                    position: start,
                    message: "unterminated string".into(),
                });
            };
            if c == '\'' {
                if rest[1..].starts_with('\'') {
                    out.push('\'');
                    self.pos += 2;
                } else {
                    self.pos += 1;
                    return Ok(out);
                }
            } else {
                out.push(c);
                self.pos += c.len_utf8();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scan_and_termcount() {
        assert_eq!(
            parse_kv_query("scan(notes, 'note/')").unwrap(),
            KvQuery::Scan {
                store: "notes".into(),
                prefix: "note/".into()
            }
        );
        assert_eq!(
            parse_kv_query("termcount(notes, '', 'text')").unwrap(),
            KvQuery::TermCount {
                store: "notes".into(),
                prefix: "".into(),
                field: "text".into()
            }
        );
    }

    #[test]
    fn rejects_unknown_op_and_trailing() {
        assert!(parse_kv_query("erase(notes, '')").is_err());
        assert!(parse_kv_query("scan(notes, '') x").is_err());
    }

    #[test]
    fn termcount_runs_against_engine() {
        let eng = KvEngine::new();
        eng.put(
            "n",
            "k",
            [("t".to_string(), "a a b".to_string())].into_iter().collect(),
        );
        let QueryValue::Table(rel) = run_kv_query(&eng, "termcount(n, '', 't')").unwrap() else {
            panic!()
        };
        assert_eq!(rel.rows.len(), 2);
        assert_eq!(rel.rows[0], vec![Value::Text("a".into()), Value::Int(2)]);
    }
}
