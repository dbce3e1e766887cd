//! Point-symmetry vector fields of the kinetic equation and their
//! prolongations.
//!
//! A generator is determined by its base components `X = tau ∂t + xi ∂x`
//! with `tau, xi` functions of `(t, x)`; the determining equations force the
//! remaining components:
//!
//! ```text
//!   alpha = xi_t + c xi_x - c tau_t - c^2 tau_x          (velocity direction)
//!   eta   = f (3 c tau_x - 2 xi_x + tau_t)               (density direction)
//!   phi   = alpha_t + c alpha_x + F (xi_x - 2 tau_t - 3 c tau_x)
//! ```
//!
//! `phi` is the force-direction component of the equivalence prolongation,
//! used when transporting a force law along a symmetry candidate.

use crate::expr::{self, Env, Expr, ExprError, SymRange};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Errors from field construction and closure checking.
#[derive(Debug, Clone, thiserror::Error)]
pub enum FieldError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("linear solve failed: {0}")]
    Degenerate(String),
}

/// Base components of a point symmetry candidate, `tau ∂t + xi ∂x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    pub tau: Expr,
    pub xi: Expr,
}

/// Fully prolonged field over `(t, x, c, f)`, optionally with the
/// force-direction component `phi`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prolonged {
    pub tau: Expr,
    pub xi: Expr,
    pub alpha: Expr,
    pub eta: Expr,
    pub phi: Option<Expr>,
}

impl VectorField {
    pub fn new(tau: Expr, xi: Expr) -> VectorField {
        VectorField { tau, xi }
    }

    /// Parse both components from infix text.
    pub fn parse(tau: &str, xi: &str) -> Result<VectorField, ExprError> {
        Ok(VectorField { tau: expr::parse(tau)?, xi: expr::parse(xi)? })
    }

    /// Velocity-direction component of the prolongation.
    pub fn alpha(&self) -> Expr {
        let c = expr::sym("c");
        (self.xi.diff("t") + c.clone() * self.xi.diff("x")
            - c.clone() * self.tau.diff("t")
            - Expr::powi(c, 2) * self.tau.diff("x"))
        .normalize()
    }

    /// Density-direction component of the prolongation.
    pub fn eta(&self) -> Expr {
        let c = expr::sym("c");
        let f = expr::sym("f");
        (f * (expr::num(3) * c * self.tau.diff("x") - expr::num(2) * self.xi.diff("x")
            + self.tau.diff("t")))
        .normalize()
    }

    /// Prolong over `(t, x, c, f)`.
    pub fn prolong_tx(&self) -> Prolonged {
        Prolonged {
            tau: self.tau.clone(),
            xi: self.xi.clone(),
            alpha: self.alpha(),
            eta: self.eta(),
            phi: None,
        }
    }

    /// Prolong over `(t, x, c, f, F)`: adds the force-direction component for
    /// the given force law.
    pub fn prolong_equiv(&self, force: &Expr) -> Prolonged {
        let c = expr::sym("c");
        let alpha = self.alpha();
        let phi = (alpha.diff("t") + c.clone() * alpha.diff("x")
            + force.clone()
                * (self.xi.diff("x") - expr::num(2) * self.tau.diff("t")
                    - expr::num(3) * c * self.tau.diff("x")))
        .normalize();
        let mut p = self.prolong_tx();
        p.phi = Some(phi);
        p
    }

    /// Apply the base field to a function of `(t, x)`: `tau h_t + xi h_x`.
    pub fn apply_base(&self, h: &Expr) -> Expr {
        (self.tau.clone() * h.diff("t") + self.xi.clone() * h.diff("x")).normalize()
    }
}

impl Prolonged {
    /// Apply the prolonged field to a function of `(t, x, c, f)`.
    pub fn apply(&self, h: &Expr) -> Expr {
        (self.tau.clone() * h.diff("t")
            + self.xi.clone() * h.diff("x")
            + self.alpha.clone() * h.diff("c")
            + self.eta.clone() * h.diff("f"))
        .normalize()
    }
}

/// Commutator `[a, b]` of two base fields (prolongation is a homomorphism,
/// so base components determine the bracket).
pub fn lie_bracket(a: &VectorField, b: &VectorField) -> VectorField {
    VectorField {
        tau: (a.apply_base(&b.tau) - b.apply_base(&a.tau)).normalize(),
        xi: (a.apply_base(&b.xi) - b.apply_base(&a.xi)).normalize(),
    }
}

/// An ordered basis of candidate symmetry generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Algebra {
    pub basis: Vec<VectorField>,
}

impl Algebra {
    pub fn new(basis: Vec<VectorField>) -> Algebra {
        Algebra { basis }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

/// Settings for the numeric closure check.
#[derive(Clone, Debug)]
pub struct ClosureCfg {
    /// Sample points in the `(t, x)` plane.
    pub n_points: usize,
    /// Residual threshold, relative to `1 + max|bracket value|`.
    pub tol: f64,
    pub seed: u64,
    /// Denominator bound when rationalizing structure constants.
    pub max_den: i64,
}

impl Default for ClosureCfg {
    fn default() -> ClosureCfg {
        ClosureCfg { n_points: 40, tol: 1e-8, seed: 0, max_den: 64 }
    }
}

/// Least-squares expansion of one bracket over the basis.
#[derive(Clone, Debug, Serialize)]
pub struct BracketExpansion {
    pub i: usize,
    pub j: usize,
    /// Coefficients of `[X_i, X_j]` in the basis.
    pub coeffs: Vec<f64>,
    /// Rational snap of each coefficient, when one exists nearby.
    pub rational: Vec<Option<(i64, i64)>>,
    pub residual: f64,
}

/// Result of checking that a basis closes under the bracket.
#[derive(Clone, Debug, Serialize)]
pub struct ClosureReport {
    pub closed: bool,
    pub brackets: Vec<BracketExpansion>,
    pub max_residual: f64,
}

/// Check numerically that every pairwise bracket lies in the span of the
/// basis. Parameters occurring in the fields must be bound in `params`.
pub fn closure_check(
    basis: &[VectorField],
    params: &BTreeMap<String, f64>,
    cfg: &ClosureCfg,
) -> Result<ClosureReport, FieldError> {
    let k = basis.len();
    let s = cfg.n_points;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let range = SymRange::symmetric(0.5, 2.0);
    let pts: Vec<(f64, f64)> = (0..s).map(|_| (range.draw(&mut rng), range.draw(&mut rng))).collect();

    let env_at = |t: f64, x: f64| {
        let mut env = Env::new();
        for (name, v) in params {
            env.insert(name.clone(), *v);
        }
        env.insert("t", t);
        env.insert("x", x);
        env
    };

    let mut b = DMatrix::<f64>::zeros(2 * s, k);
    for (col, field) in basis.iter().enumerate() {
        for (row, (t, x)) in pts.iter().enumerate() {
            let env = env_at(*t, *x);
            b[(2 * row, col)] = field.tau.eval(&env)?;
            b[(2 * row + 1, col)] = field.xi.eval(&env)?;
        }
    }
    let svd = b.clone().svd(true, true);

    let mut brackets = Vec::new();
    let mut max_residual: f64 = 0.0;
    let mut closed = true;
    for i in 0..k {
        for j in (i + 1)..k {
            let br = lie_bracket(&basis[i], &basis[j]);
            let mut y = DVector::<f64>::zeros(2 * s);
            for (row, (t, x)) in pts.iter().enumerate() {
                let env = env_at(*t, *x);
                y[2 * row] = br.tau.eval(&env)?;
                y[2 * row + 1] = br.xi.eval(&env)?;
            }
            let coeffs = svd
                .solve(&y, 1e-12)
                .map_err(|e| FieldError::Degenerate(e.to_string()))?;
            let residual = (&b * &coeffs - &y).amax();
            let scale = 1.0 + y.amax();
            if residual > cfg.tol * scale {
                closed = false;
            }
            max_residual = max_residual.max(residual / scale);
            let rational = coeffs
                .iter()
                .map(|&v| {
                    expr::rationalize(v, cfg.max_den, 1e-6)
                        .map(|r| (*r.numer(), *r.denom()))
                })
                .collect();
            brackets.push(BracketExpansion {
                i,
                j,
                coeffs: coeffs.iter().copied().collect(),
                rational,
                residual: residual / scale,
            });
        }
    }
    Ok(ClosureReport { closed, brackets, max_residual })
}
