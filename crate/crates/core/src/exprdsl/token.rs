//! Tokenizer for the expression grammar.
//!
//! Offsets are 0-based character offsets into the source, so diagnostics
//! point at the right spot even when the source contains multi-byte text.

use super::ExprError;

/// Token classes produced by [`tokenize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Number,
    Identifier,
    Operator,
    LeftParen,
    RightParen,
    Comma,
}

/// A single lexeme with its position in the source.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    /// 0-based character offset of the first character of the lexeme.
    pub position: usize,
}

struct Scanner<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    pos: usize,
}

impl<'a> Scanner<'a> {
    fn new(source: &'a str) -> Self {
        Scanner {
            chars: source.chars().peekable(),
            pos: 0,
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Split `source` into tokens, rejecting any character outside the grammar.
pub fn tokenize(source: &str) -> Result<Vec<Token>, ExprError> {
    let mut sc = Scanner::new(source);
    let mut tokens = Vec::new();

    while let Some(c) = sc.peek() {
        let start = sc.pos;
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                sc.bump();
            }
            '+' | '-' | '*' | '/' | '^' => {
                sc.bump();
                tokens.push(Token {
                    kind: TokenKind::Operator,
                    lexeme: c.to_string(),
                    position: start,
                });
            }
            '(' => {
                sc.bump();
                tokens.push(Token {
                    kind: TokenKind::LeftParen,
                    lexeme: "(".to_string(),
                    position: start,
                });
            }
            ')' => {
                sc.bump();
                tokens.push(Token {
                    kind: TokenKind::RightParen,
                    lexeme: ")".to_string(),
                    position: start,
                });
            }
            ',' => {
                sc.bump();
                tokens.push(Token {
                    kind: TokenKind::Comma,
                    lexeme: ",".to_string(),
                    position: start,
                });
            }
            c if c.is_ascii_digit() || c == '.' => {
                let lexeme = scan_number(&mut sc)?;
                tokens.push(Token {
                    kind: TokenKind::Number,
                    lexeme,
                    position: start,
                });
            }
            c if is_ident_start(c) => {
                let mut lexeme = String::new();
                while let Some(c) = sc.peek() {
                    if is_ident_continue(c) {
                        lexeme.push(c);
                        sc.bump();
                    } else {
                        break;
                    }
                }
                tokens.push(Token {
                    kind: TokenKind::Identifier,
                    lexeme,
                    position: start,
                });
            }
            other => {
                return Err(ExprError::Lexical {
                    offset: start,
                    found: other,
                });
            }
        }
    }

    Ok(tokens)
}

/// Scan a decimal literal: digits, optional fraction, optional exponent.
/// Leading-dot forms like `.5` are accepted; the literal must be a finite f64.
fn scan_number(sc: &mut Scanner) -> Result<String, ExprError> {
    let start = sc.pos;
    let mut lexeme = String::new();
    let mut saw_digit = false;

    while let Some(c) = sc.peek() {
        if c.is_ascii_digit() {
            saw_digit = true;
            lexeme.push(c);
            sc.bump();
        } else {
            break;
        }
    }
    if sc.peek() == Some('.') {
        lexeme.push('.');
        sc.bump();
        while let Some(c) = sc.peek() {
            if c.is_ascii_digit() {
                saw_digit = true;
                lexeme.push(c);
                sc.bump();
            } else {
                break;
            }
        }
    }
    if !saw_digit {
        return Err(ExprError::MalformedNumber { offset: start });
    }
    if matches!(sc.peek(), Some('e') | Some('E')) {
        lexeme.push(sc.bump().unwrap());
        if matches!(sc.peek(), Some('+') | Some('-')) {
            lexeme.push(sc.bump().unwrap());
        }
        let mut exp_digits = false;
        while let Some(c) = sc.peek() {
            if c.is_ascii_digit() {
                exp_digits = true;
                lexeme.push(c);
                sc.bump();
            } else {
                break;
            }
        }
        if !exp_digits {
            return Err(ExprError::MalformedNumber { offset: sc.pos });
        }
    }

    // A literal that overflows to infinity is rejected here so that every
    // Number token carries a finite value.
    match lexeme.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(lexeme),
        _ => Err(ExprError::MalformedNumber { offset: start }),
    }
}
