use super::SqlError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    /// Backtick-quoted identifier; never a keyword.
    QuotedIdent(String),
    Number(String),
    Str(String),
    Symbol(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte offset into the query text.
    pub pos: usize,
}

impl Token {
    pub fn describe(&self) -> String {
        match &self.kind {
            TokenKind::Ident(s) => s.clone(),
            TokenKind::QuotedIdent(s) => format!("`{s}`"),
            TokenKind::Number(s) => s.clone(),
            TokenKind::Str(s) => format!("{s:?}"),
            TokenKind::Symbol(s) => (*s).to_string(),
        }
    }
}

const SYMBOLS: &[&str] = &[
    "<=", ">=", "<>", "!=", "==", "||", "=", "<", ">", "+", "-", "*", "/", "%", ",", "(", ")", ".",
    ";",
];

pub fn tokenize(sql: &str) -> Result<Vec<Token>, SqlError> {
    let bytes = sql.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c == b'\'' || c == b'"' {
            let quote = c;
            let mut value = String::new();
            i += 1;
            loop {
                let Some(&b) = bytes.get(i) else {
                    return Err(SqlError::UnterminatedString { pos: start });
                };
                if b == quote {
                    // doubled quote is an escaped quote
                    if bytes.get(i + 1) == Some(&quote) {
                        value.push(quote as char);
                        i += 2;
                        continue;
                    }
                    i += 1;
                    break;
                }
                let ch = sql[i..].chars().next().expect("in bounds");
                value.push(ch);
                i += ch.len_utf8();
            }
            tokens.push(Token {
                kind: TokenKind::Str(value),
                pos: start,
            });
            continue;
        }
        if c == b'`' {
            let Some(end) = sql[i + 1..].find('`') else {
                return Err(SqlError::UnterminatedString { pos: start });
            };
            tokens.push(Token {
                kind: TokenKind::QuotedIdent(sql[i + 1..i + 1 + end].to_string()),
                pos: start,
            });
            i += end + 2;
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit()))
        {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            tokens.push(Token {
                kind: TokenKind::Number(sql[start..i].to_string()),
                pos: start,
            });
            continue;
        }
        let ch = sql[i..].chars().next().expect("in bounds");
        if ch.is_alphabetic() || ch == '_' {
            while i < bytes.len() {
                let ch = sql[i..].chars().next().expect("in bounds");
                if ch.is_alphanumeric() || ch == '_' {
                    i += ch.len_utf8();
                } else {
                    break;
                }
            }
            tokens.push(Token {
                kind: TokenKind::Ident(sql[start..i].to_string()),
                pos: start,
            });
            continue;
        }
        match SYMBOLS.iter().find(|s| sql[i..].starts_with(**s)) {
            Some(sym) => {
                tokens.push(Token {
                    kind: TokenKind::Symbol(sym),
                    pos: start,
                });
                i += sym.len();
            }
            None => return Err(SqlError::UnexpectedChar { pos: start, ch }),
        }
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(sql: &str) -> Vec<TokenKind> {
        tokenize(sql).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn basic_tokens() {
        assert_eq!(
            kinds("SELECT T1.name FROM t AS T1 WHERE x >= 3.5"),
            vec![
                TokenKind::Ident("SELECT".into()),
                TokenKind::Ident("T1".into()),
                TokenKind::Symbol("."),
                TokenKind::Ident("name".into()),
                TokenKind::Ident("FROM".into()),
                TokenKind::Ident("t".into()),
                TokenKind::Ident("AS".into()),
                TokenKind::Ident("T1".into()),
                TokenKind::Ident("WHERE".into()),
                TokenKind::Ident("x".into()),
                TokenKind::Symbol(">="),
                TokenKind::Number("3.5".into()),
            ]
        );
    }

    #[test]
    fn strings_both_quotes() {
        assert_eq!(
            kinds(r#"'it''s' "Bob""#),
            vec![TokenKind::Str("it's".into()), TokenKind::Str("Bob".into())]
        );
        assert!(matches!(
            tokenize("'open"),
            Err(SqlError::UnterminatedString { pos: 0 })
        ));
    }

    #[test]
    fn bad_char_has_position() {
        assert!(matches!(
            tokenize("SELECT a FROM b WHERE c ? 1"),
            Err(SqlError::UnexpectedChar { pos: 24, ch: '?' })
        ));
    }
}
