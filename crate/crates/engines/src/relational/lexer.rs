//! Tokenizer for the SQL dialect. Byte positions are kept on every token
//! so parse errors can point at the offending input.

use super::RelationalError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Star,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub pos: usize,
}

pub fn tokenize(input: &str) -> Result<Vec<Token>, RelationalError> {
    let bytes = input.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'(' => {
                out.push(Token { tok: Tok::LParen, pos: i });
                i += 1;
            }
            b')' => {
                out.push(Token { tok: Tok::RParen, pos: i });
                i += 1;
            }
            b',' => {
                out.push(Token { tok: Tok::Comma, pos: i });
                i += 1;
            }
            b'.' => {
                out.push(Token { tok: Tok::Dot, pos: i });
                i += 1;
            }
            b'*' => {
                out.push(Token { tok: Tok::Star, pos: i });
                i += 1;
            }
            b'=' => {
                out.push(Token { tok: Tok::Eq, pos: i });
                i += 1;
            }
            b'<' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    out.push(Token { tok: Tok::Ne, pos: i });
                    i += 2;
                } else if bytes.get(i + 1) == Some(&b'=') {
                    out.push(Token { tok: Tok::Le, pos: i });
                    i += 2;
                } else {
                    out.push(Token { tok: Tok::Lt, pos: i });
                    i += 1;
                }
            }
            b'>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    out.push(Token { tok: Tok::Ge, pos: i });
                    i += 2;
                } else {
                    out.push(Token { tok: Tok::Gt, pos: i });
                    i += 1;
                }
            }
            b'\'' => {
                let (s, next) = lex_string(input, i)?;
                out.push(Token { tok: Tok::Str(s), pos: i });
                i = next;
            }
            b'0'..=b'9' => {
                let (tok, next) = lex_number(input, i)?;
                out.push(Token { tok, pos: i });
                i = next;
            }
            b'-' if matches!(bytes.get(i + 1), Some(b'0'..=b'9')) => {
                let (tok, next) = lex_number(input, i)?;
                out.push(Token { tok, pos: i });
                i = next;
            }
            // `$` admits the polystore layer's container placeholders
            c if c == b'_' || c == b'$' || c.is_ascii_alphabetic() => {
                let start = i;
                i += 1;
                while i < bytes.len() && (bytes[i] == b'_' || bytes[i].is_ascii_alphanumeric()) {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(input[start..i].to_string()),
                    pos: start,
                });
            }
            other => {
                return Err(RelationalError::Parse {
                    position: i,
                    message: format!("unexpected character `{}`", other as char),
                })
            }
        }
    }
    Ok(out)
}

/// Single-quoted string with `''` as the escape for a literal quote.
fn lex_string(input: &str, start: usize) -> Result<(String, usize), RelationalError> {
    let bytes = input.as_bytes();
    let mut s = String::new();
    let mut i = start + 1;
    while i < bytes.len() {
        if bytes[i] == b'\'' {
            if bytes.get(i + 1) == Some(&b'\'') {
                s.push('\'');
                i += 2;
            } else {
                return Ok((s, i + 1));
            }
        } else {
            // copy the full UTF-8 character
            let ch = input[i..].chars().next().unwrap();
            s.push(ch);
            i += ch.len_utf8();
        }
    }
    Err(RelationalError::Parse {
        position: start,
        message: "unterminated string literal".into(),
    })
}

fn lex_number(input: &str, start: usize) -> Result<(Tok, usize), RelationalError> {
    let bytes = input.as_bytes();
    let mut i = start;
    if bytes[i] == b'-' {
        i += 1;
    }
    let mut is_float = false;
    while i < bytes.len() {
        match bytes[i] {
            b'0'..=b'9' => i += 1,
            b'.' if !is_float && matches!(bytes.get(i + 1), Some(b'0'..=b'9')) => {
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
    let text = &input[start..i];
    let tok = if is_float {
        Tok::Float(text.parse().map_err(|_| RelationalError::Parse {
            position: start,
            message: format!("bad float literal `{text}`"),
        })?)
    } else {
        Tok::Int(text.parse().map_err(|_| RelationalError::Parse {
            position: start,
            message: format!("bad integer literal `{text}`"),
        })?)
    };
    Ok((tok, i))
}
