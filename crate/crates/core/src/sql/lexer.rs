use super::{ParseError, ParseErrorKind};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    /// Unquoted word: keyword or identifier. Keywords compare case-insensitively.
    Word(String),
    QuotedIdent(String),
    Str(String),
    Number(String),
    Comma,
    LParen,
    RParen,
    Star,
    Plus,
    Minus,
    Slash,
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    Arrow,
    LongArrow,
    DoubleColon,
    Semicolon,
    Dot,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("'{w}'"),
            Tok::QuotedIdent(w) => format!("\"{w}\""),
            Tok::Str(s) => format!("string '{s}'"),
            Tok::Number(n) => format!("number {n}"),
            Tok::Comma => "','".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Star => "'*'".into(),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Eq => "'='".into(),
            Tok::NotEq => "'<>'".into(),
            Tok::Lt => "'<'".into(),
            Tok::LtEq => "'<='".into(),
            Tok::Gt => "'>'".into(),
            Tok::GtEq => "'>='".into(),
            Tok::Arrow => "'->'".into(),
            Tok::LongArrow => "'->>'".into(),
            Tok::DoubleColon => "'::'".into(),
            Tok::Semicolon => "';'".into(),
            Tok::Dot => "'.'".into(),
            Tok::Eof => "end of input".into(),
        }
    }

    pub(crate) fn is_keyword(&self, kw: &str) -> bool {
        matches!(self, Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub offset: usize,
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |offset: usize, message: String| ParseError {
        offset,
        message,
        kind: ParseErrorKind::Syntax,
    };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        // comments
        if c == b'-' && bytes.get(i + 1) == Some(&b'-') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            match src[i + 2..].find("*/") {
                Some(end) => {
                    i += 2 + end + 2;
                    continue;
                }
                None => return Err(err(i, "unterminated block comment".into())),
            }
        }
        let tok = match c {
            b',' => {
                i += 1;
                Tok::Comma
            }
            b'(' => {
                i += 1;
                Tok::LParen
            }
            b')' => {
                i += 1;
                Tok::RParen
            }
            b'*' => {
                i += 1;
                Tok::Star
            }
            b'+' => {
                i += 1;
                Tok::Plus
            }
            b'/' => {
                i += 1;
                Tok::Slash
            }
            b';' => {
                i += 1;
                Tok::Semicolon
            }
            b'=' => {
                i += 1;
                Tok::Eq
            }
            b'-' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    if bytes.get(i + 2) == Some(&b'>') {
                        i += 3;
                        Tok::LongArrow
                    } else {
                        i += 2;
                        Tok::Arrow
                    }
                } else {
                    i += 1;
                    Tok::Minus
                }
            }
            b'<' => match bytes.get(i + 1) {
                Some(b'=') => {
                    i += 2;
                    Tok::LtEq
                }
                Some(b'>') => {
                    i += 2;
                    Tok::NotEq
                }
                _ => {
                    i += 1;
                    Tok::Lt
                }
            },
            b'>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 2;
                    Tok::GtEq
                } else {
                    i += 1;
                    Tok::Gt
                }
            }
            b'!' if bytes.get(i + 1) == Some(&b'=') => {
                i += 2;
                Tok::NotEq
            }
            b':' if bytes.get(i + 1) == Some(&b':') => {
                i += 2;
                Tok::DoubleColon
            }
            b'\'' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match src[i..].find('\'') {
                        None => return Err(err(start, "unterminated string literal".into())),
                        Some(rel) => {
                            s.push_str(&src[i..i + rel]);
                            i += rel + 1;
                            if bytes.get(i) == Some(&b'\'') {
                                s.push('\'');
                                i += 1;
                            } else {
                                break;
                            }
                        }
                    }
                }
                Tok::Str(s)
            }
            b'"' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match src[i..].find('"') {
                        None => return Err(err(start, "unterminated quoted identifier".into())),
                        Some(rel) => {
                            s.push_str(&src[i..i + rel]);
                            i += rel + 1;
                            if bytes.get(i) == Some(&b'"') {
                                s.push('"');
                                i += 1;
                            } else {
                                break;
                            }
                        }
                    }
                }
                if s.is_empty() {
                    return Err(err(start, "zero-length quoted identifier".into()));
                }
                Tok::QuotedIdent(s)
            }
            b'0'..=b'9' => {
                i = scan_number(bytes, i);
                Tok::Number(src[start..i].to_string())
            }
            b'.' if bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                i = scan_number(bytes, i);
                Tok::Number(src[start..i].to_string())
            }
            b'.' => {
                i += 1;
                Tok::Dot
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$') {
                    i += 1;
                }
                Tok::Word(src[start..i].to_string())
            }
            _ => {
                let ch = src[i..].chars().next().unwrap();
                return Err(err(i, format!("unexpected character '{ch}'")));
            }
        };
        out.push(Token { tok, offset: start });
    }
    out.push(Token {
        tok: Tok::Eof,
        offset: src.len(),
    });
    Ok(out)
}

fn scan_number(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    i
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn json_arrows_and_casts() {
        assert_eq!(
            toks("a->>'k'::FLOAT"),
            vec![
                Tok::Word("a".into()),
                Tok::LongArrow,
                Tok::Str("k".into()),
                Tok::DoubleColon,
                Tok::Word("FLOAT".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn escaped_quotes_and_comments() {
        assert_eq!(
            toks("'it''s' -- trailing\n1.5e3"),
            vec![Tok::Str("it's".into()), Tok::Number("1.5e3".into()), Tok::Eof]
        );
    }

    #[test]
    fn offsets_are_bytes() {
        let t = tokenize("SELECT  x").unwrap();
        assert_eq!(t[1].offset, 8);
    }

    #[test]
    fn unterminated_string() {
        let e = tokenize("SELECT 'abc").unwrap_err();
        assert_eq!(e.offset, 7);
    }
}
