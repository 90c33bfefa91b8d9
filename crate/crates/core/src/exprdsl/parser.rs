//! Recursive descent parser for the expression grammar:
//!
//! ```text
//! expr   := term (("+"|"-") term)*
//! term   := factor (("*"|"/") factor)*
//! factor := ("-" factor) | power
//! power  := atom ("^" factor)?
//! atom   := number | identifier | identifier "(" expr ("," expr)* ")" | "(" expr ")"
//! ```
//!
//! `^` binds tightest and is right-associative, then unary minus, then
//! `*` `/`, then `+` `-` (left-associative). Every variable occurring in the
//! source must be a member of the declared variable set.

use super::ast::{BinOp, Builtin, ExprAst};
use super::token::{tokenize, Token, TokenKind};
use super::ExprError;

/// Parse `source` into an AST, checking variables against `variables`.
pub fn parse(source: &str, variables: &[&str]) -> Result<ExprAst, ExprError> {
    let tokens = tokenize(source)?;
    let end = source.chars().count();
    let mut parser = Parser {
        tokens: &tokens,
        index: 0,
        variables,
        end_offset: end,
    };
    let ast = parser.expr()?;
    if let Some(tok) = parser.peek() {
        return Err(ExprError::Syntax {
            offset: tok.position,
            message: format!("unexpected `{}`", tok.lexeme),
        });
    }
    Ok(ast)
}

struct Parser<'a> {
    tokens: &'a [Token],
    index: usize,
    variables: &'a [&'a str],
    end_offset: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.index)
    }

    fn bump(&mut self) -> Option<&'a Token> {
        let tok = self.tokens.get(self.index);
        if tok.is_some() {
            self.index += 1;
        }
        tok
    }

    fn eat_operator(&mut self, symbols: &[&str]) -> Option<&'a str> {
        let tok = self.peek()?;
        if tok.kind == TokenKind::Operator && symbols.contains(&tok.lexeme.as_str()) {
            self.bump();
            Some(match tok.lexeme.as_str() {
                "+" => "+",
                "-" => "-",
                "*" => "*",
                "/" => "/",
                _ => "^",
            })
        } else {
            None
        }
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> Result<&'a Token, ExprError> {
        match self.peek() {
            Some(tok) if tok.kind == kind => Ok(self.bump().unwrap()),
            Some(tok) => Err(ExprError::Syntax {
                offset: tok.position,
                message: format!("expected {what}, found `{}`", tok.lexeme),
            }),
            None => Err(ExprError::Syntax {
                offset: self.end_offset,
                message: format!("expected {what}, found end of input"),
            }),
        }
    }

    fn expr(&mut self) -> Result<ExprAst, ExprError> {
        let mut lhs = self.term()?;
        while let Some(sym) = self.eat_operator(&["+", "-"]) {
            let rhs = self.term()?;
            let op = if sym == "+" { BinOp::Add } else { BinOp::Sub };
            lhs = ExprAst::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<ExprAst, ExprError> {
        let mut lhs = self.factor()?;
        while let Some(sym) = self.eat_operator(&["*", "/"]) {
            let rhs = self.factor()?;
            let op = if sym == "*" { BinOp::Mul } else { BinOp::Div };
            lhs = ExprAst::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<ExprAst, ExprError> {
        if self.eat_operator(&["-"]).is_some() {
            let child = self.factor()?;
            return Ok(ExprAst::Negate(Box::new(child)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<ExprAst, ExprError> {
        let base = self.atom()?;
        if self.eat_operator(&["^"]).is_some() {
            // Right-associative: the exponent is a full factor, so `2^3^2`
            // is `2^(3^2)` and `2^-3` works.
            let exponent = self.factor()?;
            return Ok(ExprAst::Binary {
                op: BinOp::Pow,
                lhs: Box::new(base),
                rhs: Box::new(exponent),
            });
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<ExprAst, ExprError> {
        let tok = match self.peek() {
            Some(tok) => tok,
            None => {
                return Err(ExprError::Syntax {
                    offset: self.end_offset,
                    message: "expected expression, found end of input".to_string(),
                })
            }
        };
        match tok.kind {
            TokenKind::Number => {
                self.bump();
                // Finiteness was checked by the tokenizer.
                let value: f64 = tok.lexeme.parse().expect("tokenizer rejects bad literals");
                Ok(ExprAst::Constant(value))
            }
            TokenKind::Identifier => {
                self.bump();
                if self.peek().map(|t| t.kind) == Some(TokenKind::LeftParen) {
                    self.call(tok)
                } else {
                    if !self.variables.contains(&tok.lexeme.as_str()) {
                        return Err(ExprError::UndeclaredVariable {
                            name: tok.lexeme.clone(),
                            offset: tok.position,
                        });
                    }
                    Ok(ExprAst::Variable(tok.lexeme.clone()))
                }
            }
            TokenKind::LeftParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(TokenKind::RightParen, "`)`")?;
                Ok(inner)
            }
            _ => Err(ExprError::Syntax {
                offset: tok.position,
                message: format!("expected expression, found `{}`", tok.lexeme),
            }),
        }
    }

    fn call(&mut self, name: &Token) -> Result<ExprAst, ExprError> {
        let func = Builtin::lookup(&name.lexeme).ok_or_else(|| ExprError::UnknownFunction {
            name: name.lexeme.clone(),
            offset: name.position,
        })?;
        self.expect(TokenKind::LeftParen, "`(`")?;
        let mut args = vec![self.expr()?];
        while self.peek().map(|t| t.kind) == Some(TokenKind::Comma) {
            self.bump();
            args.push(self.expr()?);
        }
        self.expect(TokenKind::RightParen, "`)`")?;
        if args.len() != func.arity() {
            return Err(ExprError::Arity {
                name: func.name().to_string(),
                expected: func.arity(),
                found: args.len(),
                offset: name.position,
            });
        }
        Ok(ExprAst::Call { func, args })
    }
}
