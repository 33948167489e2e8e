use std::fmt;

use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Token {
    Ident(String),
    Number(String),
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Colon,
    Amp,
    Pipe,
    Tilde,
    Implies,
    NotEqual,
    Union,
    Slash,
    Star,
    Minus,
    Eof,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Ident(s) => write!(f, "identifier `{s}`"),
            Token::Number(s) => write!(f, "number `{s}`"),
            Token::Str(s) => write!(f, "string {s:?}"),
            Token::Eof => f.write_str("end of input"),
            other => write!(f, "`{}`", other.symbol()),
        }
    }
}

impl Token {
    pub(crate) fn symbol(&self) -> &'static str {
        match self {
            Token::LParen => "(",
            Token::RParen => ")",
            Token::LBracket => "[",
            Token::RBracket => "]",
            Token::LBrace => "{",
            Token::RBrace => "}",
            Token::Comma => ",",
            Token::Dot => ".",
            Token::Colon => ":",
            Token::Amp => "&",
            Token::Pipe => "|",
            Token::Tilde => "~",
            Token::Implies => "=>",
            Token::NotEqual => "!=",
            Token::Union => "++",
            Token::Slash => "/",
            Token::Star => "*",
            Token::Minus => "-",
            Token::Ident(_) => "identifier",
            Token::Number(_) => "number",
            Token::Str(_) => "string",
            Token::Eof => "end of input",
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Spanned {
    pub token: Token,
    pub line: usize,
    pub column: usize,
    /// Byte offsets into the source.
    pub start: usize,
    pub end: usize,
}

pub(crate) fn tokenize(source: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut chars = source.char_indices().peekable();
    let mut line = 1;
    let mut column = 1;

    macro_rules! bump {
        () => {{
            let next = chars.next();
            if let Some((_, c)) = next {
                if c == '\n' {
                    line += 1;
                    column = 1;
                } else {
                    column += 1;
                }
            }
            next
        }};
    }

    while let Some(&(start, c)) = chars.peek() {
        let (tok_line, tok_column) = (line, column);
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '#' {
            while let Some(&(_, c)) = chars.peek() {
                if c == '\n' {
                    break;
                }
                bump!();
            }
            continue;
        }
        let error = |message: String| ParseError {
            line: tok_line,
            column: tok_column,
            message,
            expected: Vec::new(),
        };
        let token = if c.is_alphabetic() || c == '_' {
            let mut text = String::new();
            while let Some(&(_, c)) = chars.peek() {
                if c.is_alphanumeric() || c == '_' {
                    text.push(c);
                    bump!();
                } else {
                    break;
                }
            }
            Token::Ident(text)
        } else if c.is_ascii_digit() {
            let mut text = String::new();
            while let Some(&(_, c)) = chars.peek() {
                if c.is_ascii_digit() {
                    text.push(c);
                    bump!();
                } else {
                    break;
                }
            }
            // a fractional part only when a digit follows the dot, so `1.` at
            // the end of a rule still closes it
            if let Some(&(i, '.')) = chars.peek() {
                if source[i + 1..].starts_with(|c: char| c.is_ascii_digit()) {
                    text.push('.');
                    bump!();
                    while let Some(&(_, c)) = chars.peek() {
                        if c.is_ascii_digit() {
                            text.push(c);
                            bump!();
                        } else {
                            break;
                        }
                    }
                }
            }
            if let Some(&(i, e)) = chars.peek() {
                if e == 'e' || e == 'E' {
                    let rest = &source[i + 1..];
                    let signed = rest.starts_with(['+', '-'])
                        && rest[1..].starts_with(|c: char| c.is_ascii_digit());
                    if signed || rest.starts_with(|c: char| c.is_ascii_digit()) {
                        text.push(e);
                        bump!();
                        if signed {
                            text.push(bump!().unwrap().1);
                        }
                        while let Some(&(_, c)) = chars.peek() {
                            if c.is_ascii_digit() {
                                text.push(c);
                                bump!();
                            } else {
                                break;
                            }
                        }
                    }
                }
            }
            // identifiers such as `2nd` are constants, not numbers
            if let Some(&(_, c)) = chars.peek() {
                if c.is_alphabetic() || c == '_' {
                    while let Some(&(_, c)) = chars.peek() {
                        if c.is_alphanumeric() || c == '_' {
                            text.push(c);
                            bump!();
                        } else {
                            break;
                        }
                    }
                    out.push(Spanned {
                        token: Token::Ident(text),
                        line: tok_line,
                        column: tok_column,
                        start,
                        end: chars.peek().map_or(source.len(), |&(i, _)| i),
                    });
                    continue;
                }
            }
            Token::Number(text)
        } else if c == '"' {
            bump!();
            let mut text = String::new();
            loop {
                match bump!() {
                    None => return Err(error("unterminated string literal".into())),
                    Some((_, '"')) => break,
                    Some((_, '\\')) => match bump!() {
                        Some((_, 'n')) => text.push('\n'),
                        Some((_, 't')) => text.push('\t'),
                        Some((_, '"')) => text.push('"'),
                        Some((_, '\\')) => text.push('\\'),
                        Some((_, other)) => {
                            return Err(error(format!("unknown escape `\\{other}`")))
                        }
                        None => return Err(error("unterminated string literal".into())),
                    },
                    Some((_, c)) => text.push(c),
                }
            }
            Token::Str(text)
        } else {
            bump!();
            let next = chars.peek().map(|&(_, c)| c);
            let two = |tok: Token, chars: &mut std::iter::Peekable<std::str::CharIndices>| {
                chars.next();
                tok
            };
            match (c, next) {
                ('=', Some('>')) => {
                    column += 1;
                    two(Token::Implies, &mut chars)
                }
                ('!', Some('=')) => {
                    column += 1;
                    two(Token::NotEqual, &mut chars)
                }
                ('+', Some('+')) => {
                    column += 1;
                    two(Token::Union, &mut chars)
                }
                ('(', _) => Token::LParen,
                (')', _) => Token::RParen,
                ('[', _) => Token::LBracket,
                (']', _) => Token::RBracket,
                ('{', _) => Token::LBrace,
                ('}', _) => Token::RBrace,
                (',', _) => Token::Comma,
                ('.', _) => Token::Dot,
                (':', _) => Token::Colon,
                ('&', _) => Token::Amp,
                ('|', _) => Token::Pipe,
                ('~', _) => Token::Tilde,
                ('/', _) => Token::Slash,
                ('*', _) => Token::Star,
                ('-', _) => Token::Minus,
                (other, _) => return Err(error(format!("unexpected character `{other}`"))),
            }
        };
        let end = chars.peek().map_or(source.len(), |&(i, _)| i);
        out.push(Spanned { token, line: tok_line, column: tok_column, start, end });
    }
    out.push(Spanned {
        token: Token::Eof,
        line,
        column,
        start: source.len(),
        end: source.len(),
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(source: &str) -> Vec<Token> {
        tokenize(source).unwrap().into_iter().map(|s| s.token).collect()
    }

    #[test]
    fn numbers_and_rule_terminator() {
        assert_eq!(
            kinds("1.0 : a(X) => b(X)."),
            vec![
                Token::Number("1.0".into()),
                Token::Colon,
                Token::Ident("a".into()),
                Token::LParen,
                Token::Ident("X".into()),
                Token::RParen,
                Token::Implies,
                Token::Ident("b".into()),
                Token::LParen,
                Token::Ident("X".into()),
                Token::RParen,
                Token::Dot,
                Token::Eof,
            ]
        );
        assert_eq!(kinds("2.")[0], Token::Number("2".into()));
        assert_eq!(kinds("1e-3")[0], Token::Number("1e-3".into()));
        assert_eq!(kinds("2nd")[0], Token::Ident("2nd".into()));
    }

    #[test]
    fn positions_and_comments() {
        let toks = tokenize("# header\n  open p/1.\n").unwrap();
        assert_eq!((toks[0].line, toks[0].column), (2, 3));
        assert_eq!(toks[0].token, Token::Ident("open".into()));
    }

    #[test]
    fn strings_and_operators() {
        assert_eq!(
            kinds(r#""a \"b\"" != ++ ~"#),
            vec![
                Token::Str("a \"b\"".into()),
                Token::NotEqual,
                Token::Union,
                Token::Tilde,
                Token::Eof
            ]
        );
        let err = tokenize("a @ b").unwrap_err();
        assert_eq!((err.line, err.column), (1, 3));
    }
}
