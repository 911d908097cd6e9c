//! Arithmetic expression DSL for field components.
//!
//! Grammar (implemented in [`parser`]):
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-' factor | power
//! power  := atom ('^' factor)?          -- right-associative, integer exponent
//! atom   := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Precedence is `^` > unary minus > `*`,`/` > `+`,`-`, so `-2^2` is `-(2^2)`.
//! Exponents of `^` must constant-fold to integers, which keeps evaluation
//! total on negative bases; fractional powers are spelled `sqrt`, `cbrt`, or
//! `pow`. `cbrt` is the real cube root (`cbrt(-8) = -2`). Expressions are
//! immutable after parse and evaluation is reentrant.

mod parser;

use std::collections::BTreeSet;
use std::fmt;

use crate::Real;

pub use parser::ParseError;

/// Built-in function of the DSL.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Cbrt,
    Abs,
    Sign,
    Pow,
    Min,
    Max,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Cbrt => "cbrt",
            Func::Abs => "abs",
            Func::Sign => "sign",
            Func::Pow => "pow",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Pow | Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "cbrt" => Func::Cbrt,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            "pow" => Func::Pow,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }
}

/// Binary operator node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Expression tree node.
#[derive(Debug, Clone, PartialEq)]
pub enum Ast<R> {
    Const(R),
    Var(String),
    Neg(Box<Ast<R>>),
    Bin(BinOp, Box<Ast<R>>, Box<Ast<R>>),
    /// Integer power of a base expression.
    Pow(Box<Ast<R>>, i32),
    Call(Func, Vec<Ast<R>>),
}

/// Evaluation failure.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// A parsed, immutable arithmetic expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression<R> {
    root: Ast<R>,
}

impl<R: Real> Expression<R> {
    /// Parses DSL source text.
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        parser::parse(source).map(|root| Expression { root })
    }

    /// The constant-zero expression.
    pub fn zero() -> Self {
        Expression {
            root: Ast::Const(R::zero()),
        }
    }

    /// True when the expression is syntactically the constant zero.
    pub fn is_zero(&self) -> bool {
        matches!(&self.root, Ast::Const(c) if *c == R::zero())
    }

    pub fn ast(&self) -> &Ast<R> {
        &self.root
    }

    pub fn from_ast(root: Ast<R>) -> Self {
        Expression { root }
    }

    /// Evaluates against a slice of `(name, value)` bindings.
    pub fn evaluate(&self, bindings: &[(&str, R)]) -> Result<R, EvalError> {
        self.evaluate_with(&|name| {
            bindings
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, v)| *v)
        })
    }

    /// Evaluates with a variable-lookup closure; the workhorse entry point.
    pub fn evaluate_with(&self, lookup: &impl Fn(&str) -> Option<R>) -> Result<R, EvalError> {
        eval_node(&self.root, lookup)
    }

    /// All variable names referenced by the expression.
    pub fn variables(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        collect_vars(&self.root, &mut out);
        out
    }

    /// Lists every referenced variable outside `allowed`, sorted and deduplicated.
    pub fn check_bindings(&self, allowed: &[&str]) -> Vec<String> {
        self.variables()
            .into_iter()
            .filter(|v| !allowed.contains(v))
            .map(str::to_string)
            .collect()
    }

    /// Replaces every occurrence of variable `name` with `replacement`.
    pub fn substitute(&self, name: &str, replacement: &Expression<R>) -> Expression<R> {
        Expression {
            root: subst_node(&self.root, name, &replacement.root),
        }
    }
}

fn collect_vars<'a, R>(node: &'a Ast<R>, out: &mut BTreeSet<&'a str>) {
    match node {
        Ast::Const(_) => {}
        Ast::Var(name) => {
            out.insert(name.as_str());
        }
        Ast::Neg(x) => collect_vars(x, out),
        Ast::Bin(_, l, r) => {
            collect_vars(l, out);
            collect_vars(r, out);
        }
        Ast::Pow(b, _) => collect_vars(b, out),
        Ast::Call(_, args) => {
            for a in args {
                collect_vars(a, out);
            }
        }
    }
}

fn subst_node<R: Real>(node: &Ast<R>, name: &str, replacement: &Ast<R>) -> Ast<R> {
    match node {
        Ast::Const(c) => Ast::Const(*c),
        Ast::Var(v) if v == name => replacement.clone(),
        Ast::Var(v) => Ast::Var(v.clone()),
        Ast::Neg(x) => Ast::Neg(Box::new(subst_node(x, name, replacement))),
        Ast::Bin(op, l, r) => Ast::Bin(
            *op,
            Box::new(subst_node(l, name, replacement)),
            Box::new(subst_node(r, name, replacement)),
        ),
        Ast::Pow(b, e) => Ast::Pow(Box::new(subst_node(b, name, replacement)), *e),
        Ast::Call(f, args) => Ast::Call(
            *f,
            args.iter().map(|a| subst_node(a, name, replacement)).collect(),
        ),
    }
}

fn eval_node<R: Real>(node: &Ast<R>, lookup: &impl Fn(&str) -> Option<R>) -> Result<R, EvalError> {
    match node {
        Ast::Const(c) => Ok(*c),
        Ast::Var(name) => {
            lookup(name).ok_or_else(|| EvalError::UnboundVariable(name.clone()))
        }
        Ast::Neg(x) => Ok(-eval_node(x, lookup)?),
        Ast::Bin(op, l, r) => {
            let a = eval_node(l, lookup)?;
            let b = eval_node(r, lookup)?;
            match op {
                BinOp::Add => Ok(a + b),
                BinOp::Sub => Ok(a - b),
                BinOp::Mul => Ok(a * b),
                BinOp::Div => {
                    if b == R::zero() {
                        Err(EvalError::Domain("division by zero".into()))
                    } else {
                        Ok(a / b)
                    }
                }
            }
        }
        Ast::Pow(b, e) => {
            let base = eval_node(b, lookup)?;
            if base == R::zero() && *e < 0 {
                return Err(EvalError::Domain("zero raised to a negative power".into()));
            }
            Ok(base.powi(*e))
        }
        Ast::Call(f, args) => {
            let x = eval_node(&args[0], lookup)?;
            match f {
                Func::Sin => Ok(x.sin()),
                Func::Cos => Ok(x.cos()),
                Func::Tan => Ok(x.tan()),
                Func::Exp => Ok(x.exp()),
                Func::Log => {
                    if x <= R::zero() {
                        Err(EvalError::Domain(format!("log of nonpositive value {x}")))
                    } else {
                        Ok(x.ln())
                    }
                }
                Func::Sqrt => {
                    if x < R::zero() {
                        Err(EvalError::Domain(format!("sqrt of negative value {x}")))
                    } else {
                        Ok(x.sqrt())
                    }
                }
                Func::Cbrt => Ok(x.cbrt()),
                Func::Abs => Ok(x.abs()),
                Func::Sign => Ok(if x > R::zero() {
                    R::one()
                } else if x < R::zero() {
                    -R::one()
                } else {
                    R::zero()
                }),
                Func::Pow => {
                    let y = eval_node(&args[1], lookup)?;
                    let v = x.powf(y);
                    if v.is_nan() && !x.is_nan() && !y.is_nan() {
                        Err(EvalError::Domain(format!(
                            "pow({x}, {y}) is undefined over the reals"
                        )))
                    } else {
                        Ok(v)
                    }
                }
                Func::Min => Ok(x.min(eval_node(&args[1], lookup)?)),
                Func::Max => Ok(x.max(eval_node(&args[1], lookup)?)),
            }
        }
    }
}

// Display emits text that reparses to a structurally identical tree.
// Precedence levels: +,- = 1; *,/ = 2; unary minus = 3; ^ = 4; atoms = 5.

fn prec<R>(node: &Ast<R>) -> u8 {
    match node {
        Ast::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Ast::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Ast::Neg(_) => 3,
        Ast::Pow(..) => 4,
        Ast::Const(_) | Ast::Var(_) | Ast::Call(..) => 5,
    }
}

fn fmt_node<R: Real>(node: &Ast<R>, min_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let p = prec(node);
    let parens = p < min_prec;
    if parens {
        write!(f, "(")?;
    }
    match node {
        Ast::Const(c) => write!(f, "{c}")?,
        Ast::Var(name) => write!(f, "{name}")?,
        Ast::Neg(x) => {
            write!(f, "-")?;
            fmt_node(x, 4, f)?;
        }
        Ast::Bin(op, l, r) => {
            let sym = match op {
                BinOp::Add => "+",
                BinOp::Sub => "-",
                BinOp::Mul => "*",
                BinOp::Div => "/",
            };
            fmt_node(l, p, f)?;
            write!(f, "{sym}")?;
            fmt_node(r, p + 1, f)?;
        }
        Ast::Pow(b, e) => {
            fmt_node(b, 5, f)?;
            write!(f, "^{e}")?;
        }
        Ast::Call(func, args) => {
            write!(f, "{}(", func.name())?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                fmt_node(a, 1, f)?;
            }
            write!(f, ")")?;
        }
    }
    if parens {
        write!(f, ")")?;
    }
    Ok(())
}

impl<R: Real> fmt::Display for Expression<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_node(&self.root, 1, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval64(src: &str, bindings: &[(&str, f64)]) -> f64 {
        Expression::<f64>::parse(src)
            .unwrap()
            .evaluate(bindings)
            .unwrap()
    }

    #[test]
    fn precedence_basics() {
        assert_eq!(eval64("2+3*4", &[]), 14.0);
        assert_eq!(eval64("(2+3)*4", &[]), 20.0);
        assert_eq!(eval64("2^3^2", &[]), 512.0); // right-associative
        assert_eq!(eval64("-2^2", &[]), -4.0); // ^ binds tighter than unary minus
        assert_eq!(eval64("2*-3", &[]), -6.0);
    }

    #[test]
    fn cbrt_is_the_real_cube_root() {
        assert_eq!(eval64("cbrt(-8)", &[]), -2.0);
        assert_eq!(eval64("cbrt(x1^2+x2^2-1)", &[("x1", 1.0), ("x2", 0.0)]), 0.0);
    }

    #[test]
    fn trig_example() {
        let v = eval64(
            "-x2 + x1*sin(t)",
            &[("t", std::f64::consts::FRAC_PI_2), ("x1", 2.0), ("x2", 3.0)],
        );
        assert!((v - (-1.0)).abs() < 1e-15);
    }

    #[test]
    fn case_study_nonlinearity_value() {
        // two routes: DSL evaluation vs direct powf arithmetic
        let v = eval64("x1*cbrt(x1^2-1)/2", &[("x1", 2.0)]);
        assert!((v - 3f64.powf(1.0 / 3.0)).abs() < 1e-14);
        assert!((v - 1.442249570307408).abs() < 1e-9);
    }

    #[test]
    fn sin_squared() {
        let v = eval64("sin(t)^2", &[("t", std::f64::consts::FRAC_PI_4)]);
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn domain_errors_are_reported_not_nan() {
        let log = Expression::<f64>::parse("log(x1)").unwrap();
        assert!(matches!(
            log.evaluate(&[("x1", 0.0)]),
            Err(EvalError::Domain(_))
        ));
        assert!(matches!(
            log.evaluate(&[("x1", -1.0)]),
            Err(EvalError::Domain(_))
        ));
        let sqrt = Expression::<f64>::parse("sqrt(x1)").unwrap();
        assert!(matches!(
            sqrt.evaluate(&[("x1", -1e-30)]),
            Err(EvalError::Domain(_))
        ));
        let div = Expression::<f64>::parse("1/x1").unwrap();
        assert!(matches!(
            div.evaluate(&[("x1", 0.0)]),
            Err(EvalError::Domain(_))
        ));
        let pw = Expression::<f64>::parse("pow(x1, 0.5)").unwrap();
        assert!(matches!(
            pw.evaluate(&[("x1", -2.0)]),
            Err(EvalError::Domain(_))
        ));
    }

    #[test]
    fn unbound_variable() {
        let e = Expression::<f64>::parse("x1+x2").unwrap();
        assert_eq!(
            e.evaluate(&[("x1", 1.0)]),
            Err(EvalError::UnboundVariable("x2".into()))
        );
    }

    #[test]
    fn sign_function() {
        assert_eq!(eval64("sign(-3)", &[]), -1.0);
        assert_eq!(eval64("sign(0)", &[]), 0.0);
        assert_eq!(eval64("sign(2.5)", &[]), 1.0);
    }

    #[test]
    fn check_bindings_reports_violations() {
        let e = Expression::<f64>::parse("eps*x1").unwrap();
        assert_eq!(e.check_bindings(&["t", "x1"]), vec!["eps".to_string()]);

        let ok = Expression::<f64>::parse("sin(t)*x1").unwrap();
        assert!(ok.check_bindings(&["t", "x1"]).is_empty());

        let e3 = Expression::<f64>::parse("x3").unwrap();
        assert_eq!(e3.check_bindings(&["t", "x1", "x2"]), vec!["x3".to_string()]);
    }

    #[test]
    fn substitution() {
        let e = Expression::<f64>::parse("x1^2 + x2").unwrap();
        let r = Expression::<f64>::parse("x1*cos(t)").unwrap();
        let s = e.substitute("x1", &r);
        let v = s
            .evaluate(&[("x1", 2.0), ("x2", 1.0), ("t", 0.0)])
            .unwrap();
        assert_eq!(v, 5.0);
    }

    #[test]
    fn display_round_trips() {
        for src in [
            "2+3*4",
            "-x2+x1*sin(t)",
            "x1*cbrt(x1^2-1)/2",
            "a-(b+c)",
            "-(x1+1)^2",
            "min(x1,max(x2,3))",
            "x1^-2",
            "2/(3/4)",
        ] {
            let e = Expression::<f64>::parse(src).unwrap();
            let printed = e.to_string();
            let again = Expression::<f64>::parse(&printed).unwrap();
            assert_eq!(e, again, "{src} -> {printed}");
        }
    }

    #[test]
    fn f32_evaluation() {
        let e = Expression::<f32>::parse("cbrt(-8) + sin(0)").unwrap();
        assert_eq!(e.evaluate(&[]).unwrap(), -2.0f32);
    }
}
