//! CSV loader. First line is the header `col:type,...`; data lines are
//! comma-separated with text fields single-quoted and `''` escaping a
//! quote. All errors carry 1-based file line numbers (the header is
//! line 1).

use super::{Relation, RelationalEngine, RelationalError, Schema};
use crate::value::{Value, ValueType};

pub fn load_csv(
    engine: &RelationalEngine,
    name: &str,
    text: &str,
) -> Result<usize, RelationalError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(RelationalError::BadLiteral {
        line: 1,
        message: "missing header line".into(),
    })?;
    let schema = parse_header(header)?;

    if engine.has_table(name) {
        let existing = engine.table(name)?;
        if existing.schema != schema {
            return Err(RelationalError::BadLiteral {
                line: 1,
                message: format!("header does not match schema of existing table `{name}`"),
            });
        }
    } else {
        engine.create_table(name, schema.clone())?;
    }

    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.is_empty() {
            continue;
        }
        let fields = split_fields(line, line_no)?;
        if fields.len() != schema.arity() {
            return Err(RelationalError::ArityMismatch {
                line: line_no,
                expected: schema.arity(),
                found: fields.len(),
            });
        }
        let mut row = Vec::with_capacity(fields.len());
        for (field, (_, ty)) in fields.into_iter().zip(&schema.0) {
            let text = match field {
                Field::Quoted(s) => {
                    if *ty != ValueType::Text {
                        return Err(RelationalError::BadLiteral {
                            line: line_no,
                            message: format!("quoted value in {ty} column"),
                        });
                    }
                    row.push(Value::Text(s));
                    continue;
                }
                Field::Bare(s) => s,
            };
            let value = Value::parse_typed(&text, *ty).map_err(|message| {
                RelationalError::BadLiteral { line: line_no, message }
            })?;
            row.push(value);
        }
        rows.push(row);
    }

    engine.insert_rows(name, rows)
}

fn parse_header(header: &str) -> Result<Schema, RelationalError> {
    let mut columns = Vec::new();
    for part in header.split(',') {
        let Some((name, ty)) = part.split_once(':') else {
            return Err(RelationalError::BadLiteral {
                line: 1,
                message: format!("header field `{part}` is not `name:type`"),
            });
        };
        let name = name.trim();
        let ty = ValueType::parse_name(ty.trim()).ok_or_else(|| RelationalError::BadLiteral {
            line: 1,
            message: format!("unknown type `{}` in header", ty.trim()),
        })?;
        if name.is_empty() {
            return Err(RelationalError::BadLiteral {
                line: 1,
                message: "empty column name in header".into(),
            });
        }
        columns.push((name.to_string(), ty));
    }
    Schema::new(columns)
}

enum Field {
    Bare(String),
    Quoted(String),
}

/// Splits one data line on commas, honoring single-quoted fields.
fn split_fields(line: &str, line_no: usize) -> Result<Vec<Field>, RelationalError> {
    let mut fields = Vec::new();
    let mut chars = line.chars().peekable();
    loop {
        match chars.peek() {
            Some('\'') => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('\'') => {
                            if chars.peek() == Some(&'\'') {
                                chars.next();
                                s.push('\'');
                            } else {
                                break;
                            }
                        }
                        Some(c) => s.push(c),
                        None => {
                            return Err(RelationalError::BadLiteral {
                                line: line_no,
                                message: "unterminated quoted field".into(),
                            })
                        }
                    }
                }
                fields.push(Field::Quoted(s));
                match chars.next() {
                    Some(',') | None => (),
                    Some(c) => {
                        return Err(RelationalError::BadLiteral {
                            line: line_no,
                            message: format!("unexpected `{c}` after quoted field"),
                        })
                    }
                }
                if chars.peek().is_none() {
                    break;
                }
            }
            _ => {
                let mut s = String::new();
                let mut ended_line = true;
                for c in chars.by_ref() {
                    if c == ',' {
                        ended_line = false;
                        break;
                    }
                    s.push(c);
                }
                fields.push(Field::Bare(s));
                if ended_line {
                    break;
                }
            }
        }
    }
    Ok(fields)
}

/// Renders a relation back to the CSV format, used by exports and tests.
pub fn to_csv(relation: &Relation) -> String {
    let mut out = String::new();
    let header: Vec<String> = relation
        .schema
        .0
        .iter()
        .map(|(n, t)| format!("{n}:{t}"))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in &relation.rows {
        let fields: Vec<String> = row
            .iter()
            .map(|v| match v {
                Value::Text(s) => format!("'{}'", s.replace('\'', "''")),
                other => other.render(),
            })
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}
