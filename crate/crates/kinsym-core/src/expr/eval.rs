//! Floating-point evaluation against a symbol/function environment.

use super::zero::AppShape;
use super::{Expr, ExprError, UnOp};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Concrete implementation of a placeholder function.
///
/// `Shape` evaluates a symbolic body (differentiated per the derivative
/// multi-index); `Native` is an arbitrary closure receiving argument values
/// and the derivative multi-index, returning `None` outside its domain.
#[derive(Clone)]
pub enum FuncImpl {
    Shape(AppShape),
    Native(Arc<dyn Fn(&[f64], &[u8]) -> Option<f64> + Send + Sync>),
}

impl fmt::Debug for FuncImpl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FuncImpl::Shape(s) => write!(f, "Shape({})", s.body),
            FuncImpl::Native(_) => f.write_str("Native(..)"),
        }
    }
}

impl FuncImpl {
    pub fn call(&self, args: &[f64], deriv: &[u8]) -> Result<f64, ExprError> {
        match self {
            FuncImpl::Shape(shape) => shape.eval_at(deriv, args),
            FuncImpl::Native(f) => f(args, deriv).ok_or(ExprError::Domain {
                op: "native function",
                val: args.first().copied().unwrap_or(f64::NAN),
            }),
        }
    }
}

/// Evaluation environment: symbol values plus placeholder implementations.
#[derive(Clone, Debug, Default)]
pub struct Env {
    vals: BTreeMap<String, f64>,
    funcs: BTreeMap<String, FuncImpl>,
}

impl Env {
    pub fn new() -> Env {
        Env::default()
    }

    pub fn from_pairs(pairs: &[(&str, f64)]) -> Env {
        let mut env = Env::new();
        for (k, v) in pairs {
            env.insert(*k, *v);
        }
        env
    }

    /// Builder-style insertion.
    pub fn with(mut self, name: &str, v: f64) -> Env {
        self.insert(name, v);
        self
    }

    pub fn insert(&mut self, name: impl Into<String>, v: f64) {
        self.vals.insert(name.into(), v);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.vals.get(name).copied()
    }

    pub fn vals(&self) -> &BTreeMap<String, f64> {
        &self.vals
    }

    pub fn bind_shape(&mut self, name: impl Into<String>, shape: AppShape) {
        self.funcs.insert(name.into(), FuncImpl::Shape(shape));
    }

    pub fn bind_native(
        &mut self,
        name: impl Into<String>,
        f: impl Fn(&[f64], &[u8]) -> Option<f64> + Send + Sync + 'static,
    ) {
        self.funcs.insert(name.into(), FuncImpl::Native(Arc::new(f)));
    }

    pub fn func(&self, name: &str) -> Option<&FuncImpl> {
        self.funcs.get(name)
    }
}

/// Largest |exponent| still treated as an exact integer power.
const INT_EXP_BOUND: f64 = 1e9;

impl Expr {
    /// Evaluate to a finite `f64`, or report the offending operation.
    pub fn eval(&self, env: &Env) -> Result<f64, ExprError> {
        let v = self.eval_inner(env)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::Domain { op: "overflow", val: v })
        }
    }

    fn eval_inner(&self, env: &Env) -> Result<f64, ExprError> {
        match self {
            Expr::Num(r) => Ok(*r.numer() as f64 / *r.denom() as f64),
            Expr::Sym(s) => env
                .get(s)
                .ok_or_else(|| ExprError::UnboundSymbol(s.clone())),
            Expr::Add(terms) => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.eval_inner(env)?;
                }
                Ok(acc)
            }
            Expr::Mul(factors) => {
                let mut acc = 1.0;
                for f in factors {
                    acc *= f.eval_inner(env)?;
                }
                Ok(acc)
            }
            Expr::Pow(b, e) => {
                let vb = b.eval_inner(env)?;
                let ve = e.eval_inner(env)?;
                eval_pow(vb, ve)
            }
            Expr::Un(op, a) => {
                let va = a.eval_inner(env)?;
                match op {
                    UnOp::Exp => Ok(va.exp()),
                    UnOp::Ln => {
                        if va <= 0.0 {
                            Err(ExprError::Domain { op: "ln", val: va })
                        } else {
                            Ok(va.ln())
                        }
                    }
                    UnOp::Sqrt => {
                        if va < 0.0 {
                            Err(ExprError::Domain { op: "sqrt", val: va })
                        } else {
                            Ok(va.sqrt())
                        }
                    }
                    UnOp::Abs => Ok(va.abs()),
                    UnOp::Sin => Ok(va.sin()),
                    UnOp::Cos => Ok(va.cos()),
                    UnOp::Atan => Ok(va.atan()),
                }
            }
            Expr::App(app) => {
                let f = env
                    .func(&app.name)
                    .ok_or_else(|| ExprError::UnboundFunction(app.name.clone()))?;
                let mut args = Vec::with_capacity(app.args.len());
                for a in &app.args {
                    args.push(a.eval_inner(env)?);
                }
                f.call(&args, &app.deriv)
            }
        }
    }
}

fn eval_pow(vb: f64, ve: f64) -> Result<f64, ExprError> {
    let rounded = ve.round();
    let integral = (ve - rounded).abs() < 1e-12 && ve.abs() < INT_EXP_BOUND;
    if vb == 0.0 {
        if integral && rounded == 0.0 {
            return Ok(1.0);
        }
        if ve > 0.0 {
            return Ok(0.0);
        }
        return Err(ExprError::Domain { op: "pow (zero base)", val: ve });
    }
    if vb > 0.0 {
        return Ok(vb.powf(ve));
    }
    // Negative base: only integer exponents are real.
    if integral {
        let mag = (-vb).powf(rounded);
        let sign = if (rounded as i64) % 2 == 0 { 1.0 } else { -1.0 };
        Ok(sign * mag)
    } else {
        Err(ExprError::Domain { op: "pow (negative base)", val: vb })
    }
}
