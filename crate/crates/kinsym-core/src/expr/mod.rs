//! Immutable symbolic expression trees over the variables `t, x, c, f`,
//! named parameters, exact rational constants, and placeholder functions
//! `G`, `Phi`, `Psi` carrying partial-derivative tags.
//!
//! The kernel is deliberately small: sums, products, powers (rational or
//! symbolic exponent), `exp/ln/sqrt/abs/sin/cos/atan`, and placeholder
//! applications. `tan`, `cosh`, `sinh`, `coth` are constructor sugar over
//! the primitives. Everything downstream (residuals, prolongations,
//! transformations) is built from these nodes.

mod diff;
mod eval;
mod normalize;
mod parse;
mod print;
mod zero;

pub use eval::{Env, FuncImpl};
pub use parse::{parse, parse_with_funcs, FuncDecls};
pub use zero::{
    default_instantiations, default_shapes, is_zero, symbolic_zero, AppShape, Instantiation,
    SampleSpec, SymRange, Verdict, Witness, ZeroCfg,
};

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

/// Exact rational scalar used for constants and constant folding.
pub type Rat = num_rational::Ratio<i64>;

/// The four independent variables of the kinetic equation, in canonical
/// order. Any other bare identifier is a named parameter.
pub const VARS: [&str; 4] = ["t", "x", "c", "f"];

/// Built-in unary functions.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnOp {
    Exp,
    Ln,
    Sqrt,
    Abs,
    Sin,
    Cos,
    Atan,
}

impl UnOp {
    pub fn name(self) -> &'static str {
        match self {
            UnOp::Exp => "exp",
            UnOp::Ln => "ln",
            UnOp::Sqrt => "sqrt",
            UnOp::Abs => "abs",
            UnOp::Sin => "sin",
            UnOp::Cos => "cos",
            UnOp::Atan => "atan",
        }
    }

    pub fn from_name(s: &str) -> Option<UnOp> {
        match s {
            "exp" => Some(UnOp::Exp),
            "ln" => Some(UnOp::Ln),
            "sqrt" => Some(UnOp::Sqrt),
            "abs" => Some(UnOp::Abs),
            "sin" => Some(UnOp::Sin),
            "cos" => Some(UnOp::Cos),
            "atan" => Some(UnOp::Atan),
            _ => None,
        }
    }
}

/// Application of a placeholder function, e.g. `G(c^3*f)` or the mixed
/// partial `Psi[1,0](c, t*f)`. `deriv[i]` is the derivative order with
/// respect to the i-th argument slot; it always has one entry per argument.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct App {
    pub name: String,
    pub deriv: Vec<u8>,
    pub args: Vec<Expr>,
}

/// Symbolic expression node. Structural equality/order/hash; `normalize`
/// produces the canonical form used for symbolic zero recognition.
///
/// Serialized form is the canonical prefix JSON produced by serde's external
/// tagging, e.g. `{"add":[{"sym":"t"},{"num":[1,2]}]}`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expr {
    /// Exact rational constant, serialized as `[numer, denom]`.
    Num(#[serde(with = "rat_serde")] Rat),
    /// Variable (`t x c f`) or named parameter.
    Sym(String),
    /// n-ary sum.
    Add(Vec<Expr>),
    /// n-ary product.
    Mul(Vec<Expr>),
    /// `base ^ exponent`; the exponent may be rational or symbolic.
    Pow(Box<Expr>, Box<Expr>),
    /// Built-in unary function application.
    Un(UnOp, Box<Expr>),
    /// Placeholder function application with derivative tags.
    App(App),
}

mod rat_serde {
    use super::Rat;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
        (*r.numer(), *r.denom()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        let (n, den) = <(i64, i64)>::deserialize(d)?;
        if den == 0 {
            return Err(serde::de::Error::custom("zero denominator"));
        }
        Ok(Rat::new(n, den))
    }
}

/// Errors from parsing, evaluation, and structural checks.
#[derive(Debug, Clone, thiserror::Error)]
pub enum ExprError {
    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },
    #[error("unbound symbol `{0}`")]
    UnboundSymbol(String),
    #[error("unknown function `{0}` (builtins are exp/ln/sqrt/abs/sin/cos/atan; placeholders must be declared)")]
    UnknownFunction(String),
    #[error("function `{name}` applied to {got} arguments, expected {want}")]
    Arity { name: String, want: usize, got: usize },
    #[error("domain error in {op} at value {val}")]
    Domain { op: &'static str, val: f64 },
    #[error("no placeholder binding for `{0}` in environment")]
    UnboundFunction(String),
    #[error("sampling failed: {0}")]
    Sampling(String),
}

// ---------------------------------------------------------------------------
// constructors
// ---------------------------------------------------------------------------

/// Integer constant.
pub fn num(n: i64) -> Expr {
    Expr::Num(Rat::from_integer(n))
}

/// Rational constant `n/d`.
pub fn rat(n: i64, d: i64) -> Expr {
    Expr::Num(Rat::new(n, d))
}

/// Variable or parameter symbol.
pub fn sym(s: &str) -> Expr {
    Expr::Sym(s.to_string())
}

/// n-ary sum (structural; `normalize` flattens and folds).
pub fn add(terms: Vec<Expr>) -> Expr {
    match terms.len() {
        0 => num(0),
        1 => terms.into_iter().next().unwrap(),
        _ => Expr::Add(terms),
    }
}

/// n-ary product (structural).
pub fn mul(factors: Vec<Expr>) -> Expr {
    match factors.len() {
        0 => num(1),
        1 => factors.into_iter().next().unwrap(),
        _ => Expr::Mul(factors),
    }
}

pub fn pow(base: Expr, exponent: Expr) -> Expr {
    Expr::Pow(Box::new(base), Box::new(exponent))
}

/// Integer power.
pub fn powi(base: Expr, k: i64) -> Expr {
    pow(base, num(k))
}

/// Rational power `base^(n/d)`.
pub fn powr(base: Expr, n: i64, d: i64) -> Expr {
    pow(base, rat(n, d))
}

pub fn exp(e: Expr) -> Expr {
    Expr::Un(UnOp::Exp, Box::new(e))
}

pub fn ln(e: Expr) -> Expr {
    Expr::Un(UnOp::Ln, Box::new(e))
}

pub fn sqrt(e: Expr) -> Expr {
    Expr::Un(UnOp::Sqrt, Box::new(e))
}

pub fn abs(e: Expr) -> Expr {
    Expr::Un(UnOp::Abs, Box::new(e))
}

pub fn sin(e: Expr) -> Expr {
    Expr::Un(UnOp::Sin, Box::new(e))
}

pub fn cos(e: Expr) -> Expr {
    Expr::Un(UnOp::Cos, Box::new(e))
}

pub fn atan(e: Expr) -> Expr {
    Expr::Un(UnOp::Atan, Box::new(e))
}

/// `tan` as the sin/cos quotient (not a primitive node).
pub fn tan(e: Expr) -> Expr {
    sin(e.clone()) / cos(e)
}

/// Hyperbolic cosine via exponentials.
pub fn cosh(e: Expr) -> Expr {
    rat(1, 2) * (exp(e.clone()) + exp(-e))
}

/// Hyperbolic sine via exponentials.
pub fn sinh(e: Expr) -> Expr {
    rat(1, 2) * (exp(e.clone()) - exp(-e))
}

/// Hyperbolic cotangent via exponentials.
pub fn coth(e: Expr) -> Expr {
    cosh(e.clone()) / sinh(e)
}

/// Placeholder application with zero derivative tags.
pub fn app(name: &str, args: Vec<Expr>) -> Expr {
    let deriv = vec![0; args.len()];
    Expr::App(App { name: name.to_string(), deriv, args })
}

/// Placeholder application with explicit derivative multi-index.
pub fn app_d(name: &str, deriv: Vec<u8>, args: Vec<Expr>) -> Expr {
    assert_eq!(deriv.len(), args.len(), "derivative tag per argument");
    Expr::App(App { name: name.to_string(), deriv, args })
}

/// Associated-function aliases for the free constructors, for call sites that
/// read better fully qualified (`Expr::num(0)`).
impl Expr {
    pub fn num(n: i64) -> Expr {
        num(n)
    }
    pub fn rat(n: i64, d: i64) -> Expr {
        rat(n, d)
    }
    pub fn sym(s: &str) -> Expr {
        sym(s)
    }
    pub fn add_of(terms: Vec<Expr>) -> Expr {
        add(terms)
    }
    pub fn mul_of(factors: Vec<Expr>) -> Expr {
        mul(factors)
    }
    pub fn pow(base: Expr, exponent: Expr) -> Expr {
        pow(base, exponent)
    }
    pub fn powi(base: Expr, k: i64) -> Expr {
        powi(base, k)
    }
    pub fn exp(e: Expr) -> Expr {
        exp(e)
    }
    pub fn ln(e: Expr) -> Expr {
        ln(e)
    }
    pub fn sqrt(e: Expr) -> Expr {
        sqrt(e)
    }
    pub fn abs(e: Expr) -> Expr {
        abs(e)
    }
    pub fn sin(e: Expr) -> Expr {
        sin(e)
    }
    pub fn cos(e: Expr) -> Expr {
        cos(e)
    }
    pub fn atan(e: Expr) -> Expr {
        atan(e)
    }
}

// ---------------------------------------------------------------------------
// operator sugar
// ---------------------------------------------------------------------------

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(vec![self, rhs])
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Add(vec![self, Expr::Mul(vec![num(-1), rhs])])
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(vec![self, rhs])
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::Mul(vec![self, pow(rhs, num(-1))])
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Mul(vec![num(-1), self])
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::fmt_expr(self, f)
    }
}

// ---------------------------------------------------------------------------
// structural queries and substitution
// ---------------------------------------------------------------------------

impl Expr {
    /// True for the literal rational `0`.
    pub fn is_zero_const(&self) -> bool {
        matches!(self, Expr::Num(r) if r.numer() == &0)
    }

    /// True for the literal rational `1`.
    pub fn is_one_const(&self) -> bool {
        matches!(self, Expr::Num(r) if *r == Rat::from_integer(1))
    }

    /// All symbols occurring in the tree.
    pub fn free_syms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |e| {
            if let Expr::Sym(s) = e {
                out.insert(s.clone());
            }
        });
        out
    }

    /// Symbols that are not one of the canonical variables `t x c f`.
    pub fn free_params(&self) -> BTreeSet<String> {
        self.free_syms().into_iter().filter(|s| !VARS.contains(&s.as_str())).collect()
    }

    /// Names of placeholder functions applied anywhere in the tree.
    pub fn placeholder_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |e| {
            if let Expr::App(a) = e {
                out.insert(a.name.clone());
            }
        });
        out
    }

    pub fn contains_sym(&self, name: &str) -> bool {
        let mut found = false;
        self.walk(&mut |e| {
            if let Expr::Sym(s) = e {
                if s == name {
                    found = true;
                }
            }
        });
        found
    }

    /// Depth-first visit of every node.
    pub fn walk(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Num(_) | Expr::Sym(_) => {}
            Expr::Add(v) | Expr::Mul(v) => v.iter().for_each(|e| e.walk(f)),
            Expr::Pow(b, e) => {
                b.walk(f);
                e.walk(f);
            }
            Expr::Un(_, a) => a.walk(f),
            Expr::App(a) => a.args.iter().for_each(|e| e.walk(f)),
        }
    }

    /// Rebuild the tree with `f` applied to children bottom-up.
    pub fn map(&self, f: &impl Fn(Expr) -> Expr) -> Expr {
        let rebuilt = match self {
            Expr::Num(_) | Expr::Sym(_) => self.clone(),
            Expr::Add(v) => Expr::Add(v.iter().map(|e| e.map(f)).collect()),
            Expr::Mul(v) => Expr::Mul(v.iter().map(|e| e.map(f)).collect()),
            Expr::Pow(b, e) => Expr::Pow(Box::new(b.map(f)), Box::new(e.map(f))),
            Expr::Un(op, a) => Expr::Un(*op, Box::new(a.map(f))),
            Expr::App(a) => Expr::App(App {
                name: a.name.clone(),
                deriv: a.deriv.clone(),
                args: a.args.iter().map(|e| e.map(f)).collect(),
            }),
        };
        f(rebuilt)
    }

    /// Substitute a symbol by an expression everywhere.
    pub fn subst_sym(&self, name: &str, value: &Expr) -> Expr {
        self.map(&|e| match &e {
            Expr::Sym(s) if s == name => value.clone(),
            _ => e,
        })
    }

    /// Simultaneous substitution of several symbols.
    pub fn subst(&self, bindings: &[(&str, Expr)]) -> Expr {
        self.map(&|e| {
            if let Expr::Sym(s) = &e {
                for (name, value) in bindings {
                    if s == name {
                        return value.clone();
                    }
                }
            }
            e
        })
    }

    /// Replace every application of placeholder `name` by the concrete shape,
    /// honoring derivative tags: `G^(k)(u)` becomes the k-th derivative of
    /// the shape body evaluated at `u`.
    ///
    /// The shape body is written in formal argument symbols `z1..zn`
    /// (`z` alone is accepted for unary shapes).
    pub fn instantiate(&self, name: &str, shape: &zero::AppShape) -> Expr {
        self.map(&|e| match &e {
            Expr::App(a) if a.name == name => shape.apply(&a.deriv, &a.args),
            _ => e,
        })
    }

    /// Serialize to the canonical prefix JSON string.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("expression serialization cannot fail")
    }

    /// Parse the canonical prefix JSON form.
    pub fn from_json(s: &str) -> Result<Expr, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Best rational approximation of `x` with denominator at most `max_den`,
/// accepted only if it reproduces `x` within `tol` (continued fractions).
pub fn rationalize(x: f64, max_den: i64, tol: f64) -> Option<Rat> {
    if !x.is_finite() || x.abs() > 1e15 {
        return None;
    }
    let (mut p0, mut q0, mut p1, mut q1) = (1i64, 0i64, x.floor() as i64, 1i64);
    let mut frac = x - x.floor();
    for _ in 0..64 {
        let cand = Rat::new_raw(p1, q1).reduced();
        if (x - *cand.numer() as f64 / *cand.denom() as f64).abs() <= tol {
            return Some(cand);
        }
        if frac.abs() < 1e-15 {
            break;
        }
        let inv = 1.0 / frac;
        let a = inv.floor();
        if a > 1e15 {
            break;
        }
        frac = inv - a;
        let a = a as i64;
        let p2 = a.checked_mul(p1)?.checked_add(p0)?;
        let q2 = a.checked_mul(q1)?.checked_add(q0)?;
        if q2 > max_den {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
    }
    let cand = Rat::new_raw(p1, q1).reduced();
    if (x - *cand.numer() as f64 / *cand.denom() as f64).abs() <= tol {
        Some(cand)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operator_sugar_builds_expected_trees() {
        let e = sym("t") + sym("x");
        assert_eq!(e, Expr::Add(vec![sym("t"), sym("x")]));
        let e = sym("t") - sym("x");
        assert_eq!(e, Expr::Add(vec![sym("t"), Expr::Mul(vec![num(-1), sym("x")])]));
        let e = sym("t") / sym("x");
        assert_eq!(e, Expr::Mul(vec![sym("t"), powi(sym("x"), -1)]));
    }

    #[test]
    fn free_symbol_classification() {
        let e = parse("P*f^(-1) + Q*c").unwrap();
        let params = e.free_params();
        assert!(params.contains("P") && params.contains("Q"));
        assert!(!params.contains("f") && !params.contains("c"));
    }

    #[test]
    fn json_round_trip_preserves_structure() {
        let e = parse("(c^2 + n)^(3/2) * exp(a*c) + 1/3").unwrap();
        let back = Expr::from_json(&e.to_json()).unwrap();
        assert_eq!(e, back);
    }

    #[test]
    fn substitution_is_simultaneous() {
        // t -> x, x -> t must swap, not cascade.
        let e = parse("t + 2*x").unwrap();
        let swapped = e.subst(&[("t", sym("x")), ("x", sym("t"))]);
        assert_eq!(swapped, parse("x + 2*t").unwrap());
    }
}
