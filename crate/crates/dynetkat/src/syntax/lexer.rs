//! Tokenizer for program and property files. Comments run from `#` or `//`
//! to end of line.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Number(u64),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Semi,
    Colon,
    Comma,
    Dot,
    Plus,
    Star,
    Tilde,
    Bang,
    Question,
    Equals,
    Arrow,   // <-
    ParPipe, // ||
    OPlus,   // (+)
    Caret,
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub col: usize,
}

pub struct Lexer;

impl Lexer {
    pub fn tokenize(src: &str) -> Result<Vec<Token>> {
        let mut out = Vec::new();
        let chars: Vec<char> = src.chars().collect();
        let mut i = 0;
        let (mut line, mut col) = (1usize, 1usize);
        let err = |line: usize, col: usize, msg: String| Error::Parse { line, col, msg };
        while i < chars.len() {
            let c = chars[i];
            let (tline, tcol) = (line, col);
            let mut push = |kind: TokenKind| {
                out.push(Token {
                    kind,
                    line: tline,
                    col: tcol,
                })
            };
            match c {
                '\n' => {
                    line += 1;
                    col = 1;
                    i += 1;
                    continue;
                }
                c if c.is_whitespace() => {}
                '#' => {
                    while i < chars.len() && chars[i] != '\n' {
                        i += 1;
                        col += 1;
                    }
                    continue;
                }
                '/' if chars.get(i + 1) == Some(&'/') => {
                    while i < chars.len() && chars[i] != '\n' {
                        i += 1;
                        col += 1;
                    }
                    continue;
                }
                '{' => push(TokenKind::LBrace),
                '}' => push(TokenKind::RBrace),
                '(' => {
                    if chars.get(i + 1) == Some(&'+') && chars.get(i + 2) == Some(&')') {
                        push(TokenKind::OPlus);
                        i += 2;
                        col += 2;
                    } else {
                        push(TokenKind::LParen);
                    }
                }
                ')' => push(TokenKind::RParen),
                '[' => push(TokenKind::LBracket),
                ']' => push(TokenKind::RBracket),
                ';' => push(TokenKind::Semi),
                ':' => push(TokenKind::Colon),
                ',' => push(TokenKind::Comma),
                '.' => push(TokenKind::Dot),
                '+' => push(TokenKind::Plus),
                '*' => push(TokenKind::Star),
                '~' => push(TokenKind::Tilde),
                '!' => push(TokenKind::Bang),
                '?' => push(TokenKind::Question),
                '^' => push(TokenKind::Caret),
                '=' => push(TokenKind::Equals),
                '<' => {
                    if chars.get(i + 1) == Some(&'-') {
                        push(TokenKind::Arrow);
                        i += 1;
                        col += 1;
                    } else {
                        return Err(err(line, col, "expected `<-`".into()));
                    }
                }
                '|' => {
                    if chars.get(i + 1) == Some(&'|') {
                        push(TokenKind::ParPipe);
                        i += 1;
                        col += 1;
                    } else {
                        return Err(err(line, col, "expected `||`".into()));
                    }
                }
                c if c.is_ascii_digit() => {
                    let start = i;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                        col += 1;
                    }
                    // idents may start with a digit when followed by letters
                    // (e.g. value names); otherwise it is a number
                    if i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                        while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                            i += 1;
                            col += 1;
                        }
                        let s: String = chars[start..i].iter().collect();
                        push(TokenKind::Ident(s));
                    } else {
                        let s: String = chars[start..i].iter().collect();
                        let n = s
                            .parse()
                            .map_err(|_| err(tline, tcol, format!("bad number `{s}`")))?;
                        push(TokenKind::Number(n));
                    }
                    continue;
                }
                c if c.is_alphabetic() || c == '_' => {
                    let start = i;
                    while i < chars.len()
                        && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'')
                    {
                        i += 1;
                        col += 1;
                    }
                    let s: String = chars[start..i].iter().collect();
                    push(TokenKind::Ident(s));
                    continue;
                }
                other => {
                    return Err(err(line, col, format!("unexpected character `{other}`")));
                }
            }
            i += 1;
            col += 1;
        }
        out.push(Token {
            kind: TokenKind::Eof,
            line,
            col,
        });
        Ok(out)
    }
}
