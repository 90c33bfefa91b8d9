//! Expression AST and its canonical printed form.

use std::collections::BTreeSet;
use std::fmt;

/// Binary operators, in source syntax.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// The fixed builtin function table. Call arity is enforced at parse time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Min,
    Max,
    Pow,
    Logmean,
}

impl Builtin {
    pub fn lookup(name: &str) -> Option<Builtin> {
        Some(match name {
            "sin" => Builtin::Sin,
            "cos" => Builtin::Cos,
            "exp" => Builtin::Exp,
            "ln" => Builtin::Ln,
            "sqrt" => Builtin::Sqrt,
            "abs" => Builtin::Abs,
            "min" => Builtin::Min,
            "max" => Builtin::Max,
            "pow" => Builtin::Pow,
            "logmean" => Builtin::Logmean,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Sin => "sin",
            Builtin::Cos => "cos",
            Builtin::Exp => "exp",
            Builtin::Ln => "ln",
            Builtin::Sqrt => "sqrt",
            Builtin::Abs => "abs",
            Builtin::Min => "min",
            Builtin::Max => "max",
            Builtin::Pow => "pow",
            Builtin::Logmean => "logmean",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Sin | Builtin::Cos | Builtin::Exp | Builtin::Ln | Builtin::Sqrt
            | Builtin::Abs => 1,
            Builtin::Min | Builtin::Max | Builtin::Pow | Builtin::Logmean => 2,
        }
    }
}

/// Parsed arithmetic expression over a declared variable set.
///
/// ASTs are immutable after construction and safe to share across threads;
/// evaluation holds no mutable state.
#[derive(Debug, Clone, PartialEq)]
pub enum ExprAst {
    Constant(f64),
    Variable(String),
    Negate(Box<ExprAst>),
    Binary {
        op: BinOp,
        lhs: Box<ExprAst>,
        rhs: Box<ExprAst>,
    },
    Call {
        func: Builtin,
        args: Vec<ExprAst>,
    },
}

impl ExprAst {
    /// Every variable name occurring in the expression, sorted.
    pub fn variables(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_variables(&mut out);
        out
    }

    fn collect_variables<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            ExprAst::Constant(_) => {}
            ExprAst::Variable(name) => {
                out.insert(name.as_str());
            }
            ExprAst::Negate(child) => child.collect_variables(out),
            ExprAst::Binary { lhs, rhs, .. } => {
                lhs.collect_variables(out);
                rhs.collect_variables(out);
            }
            ExprAst::Call { args, .. } => {
                for arg in args {
                    arg.collect_variables(out);
                }
            }
        }
    }
}

/// Canonical fully parenthesized text. `parse(print(t))` is structurally
/// equal to `t` for any AST the parser can produce.
pub fn print(ast: &ExprAst) -> String {
    ast.to_string()
}

impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // Rust's float Display is the shortest decimal form that parses
            // back to the same f64, which keeps the round trip exact.
            ExprAst::Constant(value) => write!(f, "{value}"),
            ExprAst::Variable(name) => write!(f, "{name}"),
            ExprAst::Negate(child) => write!(f, "(-{child})"),
            ExprAst::Binary { op, lhs, rhs } => {
                write!(f, "({lhs} {} {rhs})", op.symbol())
            }
            ExprAst::Call { func, args } => {
                write!(f, "{}(", func.name())?;
                for (i, arg) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{arg}")?;
                }
                write!(f, ")")
            }
        }
    }
}
