//! IEEE double-precision evaluation of expression ASTs.

use super::ast::{BinOp, Builtin, ExprAst};
use super::ExprError;

/// Evaluate `ast` with the given variable bindings.
///
/// Deterministic: equal `ast` and `env` give bit-identical results. Any
/// non-finite intermediate (overflow, division by zero) is an error, as are
/// the domain violations of `ln`, `sqrt`, `logmean` and fractional powers of
/// negative bases.
pub fn eval(ast: &ExprAst, env: &[(&str, f64)]) -> Result<f64, ExprError> {
    let value = match ast {
        ExprAst::Constant(c) => *c,
        ExprAst::Variable(name) => lookup(env, name)?,
        ExprAst::Negate(child) => -eval(child, env)?,
        ExprAst::Binary { op, lhs, rhs } => {
            let a = eval(lhs, env)?;
            let b = eval(rhs, env)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
                BinOp::Pow => power(a, b)?,
            }
        }
        ExprAst::Call { func, args } => {
            let mut vals = [0.0f64; 2];
            for (slot, arg) in vals.iter_mut().zip(args.iter()) {
                *slot = eval(arg, env)?;
            }
            apply_builtin(*func, &vals[..args.len()])?
        }
    };
    if !value.is_finite() {
        return Err(ExprError::NonFinite {
            expression: ast.to_string(),
        });
    }
    Ok(value)
}

fn lookup(env: &[(&str, f64)], name: &str) -> Result<f64, ExprError> {
    env.iter()
        .find(|(n, _)| *n == name)
        .map(|(_, v)| *v)
        .ok_or_else(|| ExprError::UnboundVariable {
            name: name.to_string(),
        })
}

fn power(base: f64, exponent: f64) -> Result<f64, ExprError> {
    if base < 0.0 && exponent.fract() != 0.0 {
        return Err(ExprError::Domain {
            message: format!("negative base {base} raised to non-integer exponent {exponent}"),
        });
    }
    Ok(base.powf(exponent))
}

fn apply_builtin(func: Builtin, args: &[f64]) -> Result<f64, ExprError> {
    let value = match func {
        Builtin::Sin => args[0].sin(),
        Builtin::Cos => args[0].cos(),
        Builtin::Exp => args[0].exp(),
        Builtin::Ln => {
            if args[0] <= 0.0 {
                return Err(ExprError::Domain {
                    message: format!("ln of non-positive value {}", args[0]),
                });
            }
            args[0].ln()
        }
        Builtin::Sqrt => {
            if args[0] < 0.0 {
                return Err(ExprError::Domain {
                    message: format!("sqrt of negative value {}", args[0]),
                });
            }
            args[0].sqrt()
        }
        Builtin::Abs => args[0].abs(),
        Builtin::Min => args[0].min(args[1]),
        Builtin::Max => args[0].max(args[1]),
        Builtin::Pow => power(args[0], args[1])?,
        Builtin::Logmean => logmean(args[0], args[1])?,
    };
    Ok(value)
}

/// Logarithmic mean `(p - q) / (ln p - ln q)` with its continuous extension
/// `logmean(p, p) = p`. Requires `p, q > 0`.
///
/// Computed as `(p - q) / ln1p((p - q) / q)`, which stays accurate near the
/// diagonal where the naive difference of logarithms cancels.
fn logmean(p: f64, q: f64) -> Result<f64, ExprError> {
    if p <= 0.0 || q <= 0.0 {
        return Err(ExprError::Domain {
            message: format!("logmean requires positive arguments, got ({p}, {q})"),
        });
    }
    if p == q {
        return Ok(p);
    }
    let diff = p - q;
    let log_ratio = (diff / q).ln_1p();
    if log_ratio == 0.0 {
        // p and q differ by less than one ulp of their ratio.
        return Ok(0.5 * (p + q));
    }
    Ok(diff / log_ratio)
}
