//! Lexer and recursive-descent parser for the expression DSL.

use std::fmt;

use super::{Ast, BinOp, Func};
use crate::Real;

/// Syntax error with source position (1-based line and column).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number `{v}`"),
            Tok::Ident(s) => format!("name `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn err(line: usize, col: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        col,
        message: message.into(),
    }
}

fn lex(source: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = source.chars().collect();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    while i < chars.len() {
        let c = chars[i];
        let (tline, tcol) = (line, col);
        let advance = |i: &mut usize, line: &mut usize, col: &mut usize| {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        };
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                advance(&mut i, &mut line, &mut col);
            }
            '+' | '-' | '*' | '/' | '^' | '(' | ')' | ',' => {
                out.push(Spanned {
                    tok: match c {
                        '+' => Tok::Plus,
                        '-' => Tok::Minus,
                        '*' => Tok::Star,
                        '/' => Tok::Slash,
                        '^' => Tok::Caret,
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        _ => Tok::Comma,
                    },
                    line: tline,
                    col: tcol,
                });
                advance(&mut i, &mut line, &mut col);
            }
            '0'..='9' | '.' => {
                let start = i;
                let mut seen_digit = false;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    seen_digit = true;
                    advance(&mut i, &mut line, &mut col);
                }
                if i < chars.len() && chars[i] == '.' {
                    advance(&mut i, &mut line, &mut col);
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        seen_digit = true;
                        advance(&mut i, &mut line, &mut col);
                    }
                }
                if !seen_digit {
                    return Err(err(tline, tcol, "expected digits in numeric literal"));
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    advance(&mut i, &mut line, &mut col);
                    if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                        advance(&mut i, &mut line, &mut col);
                    }
                    if i >= chars.len() || !chars[i].is_ascii_digit() {
                        return Err(err(tline, tcol, "missing exponent digits in numeric literal"));
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        advance(&mut i, &mut line, &mut col);
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let value: f64 = text
                    .parse()
                    .map_err(|_| err(tline, tcol, format!("invalid numeric literal `{text}`")))?;
                if !value.is_finite() {
                    return Err(err(
                        tline,
                        tcol,
                        format!("numeric literal `{text}` is out of range"),
                    ));
                }
                out.push(Spanned {
                    tok: Tok::Num(value),
                    line: tline,
                    col: tcol,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    advance(&mut i, &mut line, &mut col);
                }
                out.push(Spanned {
                    tok: Tok::Ident(chars[start..i].iter().collect()),
                    line: tline,
                    col: tcol,
                });
            }
            other => {
                return Err(err(tline, tcol, format!("unexpected character `{other}`")));
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser<'a, R> {
    toks: &'a [Spanned],
    pos: usize,
    _marker: std::marker::PhantomData<R>,
}

pub(super) fn parse<R: Real>(source: &str) -> Result<Ast<R>, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        _marker: std::marker::PhantomData,
    };
    let ast = p.expr()?;
    p.expect_eof()?;
    Ok(ast)
}

impl<'a, R: Real> Parser<'a, R> {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> &Spanned {
        let t = &self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if &self.peek().tok == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_eof(&mut self) -> Result<(), ParseError> {
        let t = self.peek();
        if t.tok == Tok::Eof {
            Ok(())
        } else {
            Err(err(
                t.line,
                t.col,
                format!("unexpected {} after expression", t.tok.describe()),
            ))
        }
    }

    fn expr(&mut self) -> Result<Ast<R>, ParseError> {
        let mut node = self.term()?;
        loop {
            if self.eat(&Tok::Plus) {
                let rhs = self.term()?;
                node = Ast::Bin(BinOp::Add, Box::new(node), Box::new(rhs));
            } else if self.eat(&Tok::Minus) {
                let rhs = self.term()?;
                node = Ast::Bin(BinOp::Sub, Box::new(node), Box::new(rhs));
            } else {
                return Ok(node);
            }
        }
    }

    fn term(&mut self) -> Result<Ast<R>, ParseError> {
        let mut node = self.factor()?;
        loop {
            if self.eat(&Tok::Star) {
                let rhs = self.factor()?;
                node = Ast::Bin(BinOp::Mul, Box::new(node), Box::new(rhs));
            } else if self.eat(&Tok::Slash) {
                let rhs = self.factor()?;
                node = Ast::Bin(BinOp::Div, Box::new(node), Box::new(rhs));
            } else {
                return Ok(node);
            }
        }
    }

    fn factor(&mut self) -> Result<Ast<R>, ParseError> {
        if self.eat(&Tok::Minus) {
            let inner = self.factor()?;
            Ok(Ast::Neg(Box::new(inner)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Ast<R>, ParseError> {
        let base = self.atom()?;
        if &self.peek().tok == &Tok::Caret {
            let caret = self.bump();
            let (cline, ccol) = (caret.line, caret.col);
            let exponent = self.factor()?;
            let value = fold_const(&exponent).ok_or_else(|| {
                err(cline, ccol, "exponent of `^` must be a constant integer")
            })?;
            if value.fract() != 0.0 || value.abs() > i32::MAX as f64 {
                return Err(err(
                    cline,
                    ccol,
                    format!("non-integer exponent `{value}` on `^`"),
                ));
            }
            Ok(Ast::Pow(Box::new(base), value as i32))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Ast<R>, ParseError> {
        let t = self.bump();
        let (line, col) = (t.line, t.col);
        match &t.tok {
            Tok::Num(v) => Ok(Ast::Const(R::of(*v))),
            Tok::Ident(name) => {
                let name = name.clone();
                if self.eat(&Tok::LParen) {
                    let func = Func::from_name(&name)
                        .ok_or_else(|| err(line, col, format!("unknown function name `{name}`")))?;
                    let mut args = vec![self.expr()?];
                    while self.eat(&Tok::Comma) {
                        args.push(self.expr()?);
                    }
                    let close = self.bump();
                    if close.tok != Tok::RParen {
                        return Err(err(
                            close.line,
                            close.col,
                            format!("expected `)` in call to `{name}`, found {}", close.tok.describe()),
                        ));
                    }
                    if args.len() != func.arity() {
                        return Err(err(
                            line,
                            col,
                            format!(
                                "`{name}` takes {} argument(s), got {}",
                                func.arity(),
                                args.len()
                            ),
                        ));
                    }
                    Ok(Ast::Call(func, args))
                } else if Func::from_name(&name).is_some() {
                    Err(err(
                        line,
                        col,
                        format!("expected `(` after function name `{name}`"),
                    ))
                } else {
                    Ok(Ast::Var(name))
                }
            }
            Tok::LParen => {
                let inner = self.expr()?;
                let close = self.bump();
                if close.tok != Tok::RParen {
                    return Err(err(
                        close.line,
                        close.col,
                        format!("expected `)`, found {}", close.tok.describe()),
                    ));
                }
                Ok(inner)
            }
            other => Err(err(
                line,
                col,
                format!("expected a value, found {}", other.describe()),
            )),
        }
    }
}

/// Evaluates constant subtrees; `None` when the tree references variables or
/// hits a domain error.
fn fold_const<R: Real>(node: &Ast<R>) -> Option<f64> {
    let expr = super::Expression::from_ast(node.clone());
    expr.evaluate_with(&|_| None).ok().map(|v| v.as_f64())
}

#[cfg(test)]
mod tests {
    use crate::expr::{Ast, Expression, ParseError};

    fn parse64(src: &str) -> Result<Expression<f64>, ParseError> {
        Expression::parse(src)
    }

    #[test]
    fn reports_line_and_column() {
        let e = parse64("1 +\n 2 *").unwrap_err();
        assert_eq!((e.line, e.col), (2, 5));

        let e = parse64("2 @ 3").unwrap_err();
        assert_eq!((e.line, e.col), (1, 3));
    }

    #[test]
    fn unknown_function() {
        let e = parse64("foo(1)").unwrap_err();
        assert!(e.message.contains("unknown function name `foo`"), "{e}");
    }

    #[test]
    fn wrong_arity() {
        let e = parse64("sin(1,2)").unwrap_err();
        assert!(e.message.contains("takes 1 argument"), "{e}");
        let e = parse64("min(1)").unwrap_err();
        assert!(e.message.contains("takes 2 argument"), "{e}");
    }

    #[test]
    fn non_integer_exponent_rejected() {
        let e = parse64("x^2.5").unwrap_err();
        assert!(e.message.contains("non-integer exponent"), "{e}");
        let e = parse64("x^y").unwrap_err();
        assert!(e.message.contains("constant integer"), "{e}");
        // constant folding admits parenthesized integer arithmetic
        assert!(parse64("x^(1+1)").is_ok());
        assert!(parse64("x^-2").is_ok());
    }

    #[test]
    fn no_implicit_multiplication() {
        assert!(parse64("2x").is_err());
    }

    #[test]
    fn function_name_is_not_a_variable() {
        let e = parse64("sin + 1").unwrap_err();
        assert!(e.message.contains("expected `(`"), "{e}");
    }

    #[test]
    fn scientific_literals() {
        let v = parse64("1.5e-3").unwrap().evaluate(&[]).unwrap();
        assert_eq!(v, 1.5e-3);
        assert!(parse64("1e999").is_err()); // overflows f64
        assert!(parse64("1e").is_err());
    }

    #[test]
    fn pow_node_structure() {
        let e = parse64("x^-2").unwrap();
        assert!(matches!(e.ast(), Ast::Pow(_, -2)));
    }
}
