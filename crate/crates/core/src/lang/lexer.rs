//! Tokenizer. Newlines are insignificant: every declaration starts with a
//! reserved keyword, so `:=` or `filter` may sit on a continuation line and a
//! trailing backslash is plain whitespace.

use super::ast::Span;
use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    /// Numeric literal, kept as text so rationals can be parsed exactly.
    Number(String),
    Str(String),
    Input,
    Output,
    Trigger,
    Filter,
    If,
    Then,
    Else,
    True,
    False,
    Delta,
    Colon,
    Assign,
    Comma,
    LParen,
    RParen,
    At,
    Dot,
    Plus,
    Minus,
    Star,
    Slash,
    Pow,
    EqEq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Not,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            Tok::Str(_) => "string".into(),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.text()),
        }
    }

    pub fn text(&self) -> &'static str {
        match self {
            Tok::Input => "input",
            Tok::Output => "output",
            Tok::Trigger => "trigger",
            Tok::Filter => "filter",
            Tok::If => "if",
            Tok::Then => "then",
            Tok::Else => "else",
            Tok::True => "true",
            Tok::False => "false",
            Tok::Delta => "δ",
            Tok::Colon => ":",
            Tok::Assign => ":=",
            Tok::Comma => ",",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::At => "@",
            Tok::Dot => ".",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Pow => "**",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::And => "∧",
            Tok::Or => "∨",
            Tok::Not => "!",
            Tok::Ident(_) | Tok::Number(_) | Tok::Str(_) => "",
            Tok::Eof => "<eof>",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut it = src.char_indices().peekable();
    while let Some(&(start, c)) = it.peek() {
        if c.is_whitespace() || c == '\\' {
            it.next();
            continue;
        }
        if c == '/' && src[start..].starts_with("//") {
            while let Some(&(_, c)) = it.peek() {
                if c == '\n' {
                    break;
                }
                it.next();
            }
            continue;
        }
        if is_ident_start(c) {
            let mut end = start;
            while let Some(&(i, c)) = it.peek() {
                if !is_ident_continue(c) {
                    break;
                }
                end = i + c.len_utf8();
                it.next();
            }
            let word = &src[start..end];
            let tok = match word {
                "input" => Tok::Input,
                "output" => Tok::Output,
                "trigger" => Tok::Trigger,
                "filter" => Tok::Filter,
                "if" => Tok::If,
                "then" => Tok::Then,
                "else" => Tok::Else,
                "true" => Tok::True,
                "false" => Tok::False,
                "δ" | "delta" => Tok::Delta,
                "and" => Tok::And,
                "or" => Tok::Or,
                "not" => Tok::Not,
                _ => Tok::Ident(word.to_string()),
            };
            out.push(Token { tok, span: Span::new(start, end) });
            continue;
        }
        if c.is_ascii_digit() {
            let end = lex_number(src, start);
            while let Some(&(i, _)) = it.peek() {
                if i >= end {
                    break;
                }
                it.next();
            }
            out.push(Token { tok: Tok::Number(src[start..end].to_string()), span: Span::new(start, end) });
            continue;
        }
        if c == '"' {
            it.next();
            let mut text = String::new();
            let mut end = None;
            while let Some((i, c)) = it.next() {
                match c {
                    '"' => {
                        end = Some(i + 1);
                        break;
                    }
                    '\\' => match it.next() {
                        Some((_, 'n')) => text.push('\n'),
                        Some((_, c)) => text.push(c),
                        None => break,
                    },
                    c => text.push(c),
                }
            }
            let Some(end) = end else {
                return Err(ParseError::syntax(src, src.len(), vec!["`\"`".into()], "end of input"));
            };
            out.push(Token { tok: Tok::Str(text), span: Span::new(start, end) });
            continue;
        }
        let rest = &src[start..];
        let (tok, len) = if rest.starts_with(":=") {
            (Tok::Assign, 2)
        } else if rest.starts_with("**") {
            (Tok::Pow, 2)
        } else if rest.starts_with("==") {
            (Tok::EqEq, 2)
        } else if rest.starts_with("!=") {
            (Tok::Ne, 2)
        } else if rest.starts_with("<=") {
            (Tok::Le, 2)
        } else if rest.starts_with(">=") {
            (Tok::Ge, 2)
        } else if rest.starts_with("&&") {
            (Tok::And, 2)
        } else if rest.starts_with("||") {
            (Tok::Or, 2)
        } else {
            let t = match c {
                ':' => Tok::Colon,
                ',' => Tok::Comma,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '@' => Tok::At,
                '.' => Tok::Dot,
                '+' => Tok::Plus,
                '-' | '−' => Tok::Minus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                '<' => Tok::Lt,
                '>' => Tok::Gt,
                '∧' => Tok::And,
                '∨' => Tok::Or,
                '!' | '¬' => Tok::Not,
                _ => return Err(ParseError::syntax(src, start, vec!["token".into()], &format!("character `{c}`"))),
            };
            (t, c.len_utf8())
        };
        for _ in 0..rest[..len].chars().count() {
            it.next();
        }
        out.push(Token { tok, span: Span::new(start, start + len) });
    }
    out.push(Token { tok: Tok::Eof, span: Span::new(src.len(), src.len()) });
    Ok(out)
}

/// digits [ '.' digits ] [ (e|E) [+-] digits ]
fn lex_number(src: &str, start: usize) -> usize {
    let b = src.as_bytes();
    let mut i = start;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    if i + 1 < b.len() && b[i] == b'.' && b[i + 1].is_ascii_digit() {
        i += 1;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        if j < b.len() && b[j].is_ascii_digit() {
            while j < b.len() && b[j].is_ascii_digit() {
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
    fn projection_after_number_is_not_a_float() {
        assert_eq!(
            toks("xLim.0.offset"),
            vec![
                Tok::Ident("xLim".into()),
                Tok::Dot,
                Tok::Number("0".into()),
                Tok::Dot,
                Tok::Ident("offset".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn delta_keyword_versus_delta_identifier() {
        assert_eq!(toks("δ(x)")[0], Tok::Delta);
        assert_eq!(toks("delta(x)")[0], Tok::Delta);
        assert_eq!(toks("δx")[0], Tok::Ident("δx".into()));
    }

    #[test]
    fn unicode_and_ascii_connectives() {
        assert_eq!(toks("a ∧ b and c && d")[1], Tok::And);
        assert_eq!(toks("a ∧ b and c && d")[3], Tok::And);
        assert_eq!(toks("a ∧ b and c && d")[5], Tok::And);
        assert_eq!(toks("a ∨ b or c || d")[5], Tok::Or);
    }

    #[test]
    fn comments_and_continuations_are_whitespace() {
        assert_eq!(toks("a // comment\n \\\n b"), vec![Tok::Ident("a".into()), Tok::Ident("b".into()), Tok::Eof]);
    }

    #[test]
    fn numbers_with_units_split() {
        assert_eq!(toks("1Hz"), vec![Tok::Number("1".into()), Tok::Ident("Hz".into()), Tok::Eof]);
        assert_eq!(toks("2.5e-3"), vec![Tok::Number("2.5e-3".into()), Tok::Eof]);
    }

    #[test]
    fn unterminated_string_is_an_error() {
        assert!(tokenize("trigger x \"oops").is_err());
    }
}
