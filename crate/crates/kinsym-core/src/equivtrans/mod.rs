//! Finite equivalence transformations of the kinetic equation.
//!
//! Any invertible change of the independent variables, `tb = phi(t, x)` and
//! `xb = psi(t, x)`, induces a point transformation of the remaining phase
//! variables that keeps the equation shape `f_t + c f_x + (F f)_c = 0` intact:
//!
//! ```text
//! cb = (psi_t + c psi_x) / (phi_t + c phi_x)
//! fb = f (phi_t + c phi_x)^3 / J^2          J = psi_x phi_t - phi_x psi_t
//! Fb = F J / (phi_t + c phi_x)^3  +  ((d/dt + c d/dx) cb) / (phi_t + c phi_x)
//! ```
//!
//! [`Diffeo2`] carries one such map symbolically; [`catalog`] exposes the named
//! changes of variables used to reduce force-law families to canonical form.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, parse_with_funcs, Env, Expr, ExprError, FuncDecls, SampleSpec, SymRange};
use crate::fields::VectorField;

/// Errors raised while building or applying equivalence transformations.
#[derive(Debug, Error)]
pub enum TransformError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    /// The map is singular where it was evaluated.
    #[error("map degenerates at the evaluation point: {0}")]
    Degenerate(String),
    #[error("map has no stored inverse")]
    MissingInverse,
    #[error("unknown catalog map `{0}`")]
    UnknownMap(String),
}

/// Phase point in the order `(t, x, c, f)`.
pub type Point = [f64; 4];

/// A diffeomorphism of the `(t, x)` plane, optionally with an explicit inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diffeo2 {
    /// Image time coordinate as an expression in `t` and `x`.
    pub phi: Expr,
    /// Image space coordinate as an expression in `t` and `x`.
    pub psi: Expr,
    /// Explicit inverse; the symbols `t`, `x` inside these expressions stand
    /// for the *image* coordinates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inv: Option<(Expr, Expr)>,
}

impl Diffeo2 {
    pub fn new(phi: Expr, psi: Expr) -> Diffeo2 {
        Diffeo2 { phi, psi, inv: None }
    }

    pub fn parse(phi: &str, psi: &str) -> Result<Diffeo2, ExprError> {
        Ok(Diffeo2::new(expr::parse(phi)?, expr::parse(psi)?))
    }

    pub fn with_inverse(mut self, inv_t: Expr, inv_x: Expr) -> Diffeo2 {
        self.inv = Some((inv_t, inv_x));
        self
    }

    /// Derivative `phi_t + c phi_x` of the image time along the free flow.
    pub fn den(&self) -> Expr {
        (self.phi.diff("t") + expr::sym("c") * self.phi.diff("x")).normalize()
    }

    /// Jacobian determinant `psi_x phi_t - phi_x psi_t`.
    pub fn jacobian(&self) -> Expr {
        (self.psi.diff("x") * self.phi.diff("t") - self.phi.diff("x") * self.psi.diff("t"))
            .normalize()
    }

    /// Image speed as an expression in the source variables `t, x, c`.
    pub fn cbar(&self) -> Expr {
        ((self.psi.diff("t") + expr::sym("c") * self.psi.diff("x")) / self.den()).normalize()
    }

    /// Image density as an expression in the source variables `t, x, c, f`.
    pub fn fbar(&self) -> Expr {
        (expr::sym("f") * expr::powi(self.den(), 3) / expr::powi(self.jacobian(), 2)).normalize()
    }

    /// The transformed force law, written in source coordinates: its value at
    /// `(t, x, c, f)` is the new force at the image of that point.
    pub fn push_force(&self, force: &Expr) -> Expr {
        let den = self.den();
        let cb = self.cbar();
        let advected = cb.diff("t") + expr::sym("c") * cb.diff("x");
        (force.clone() * self.jacobian() / expr::powi(den.clone(), 3) + advected / den).normalize()
    }

    /// The transformed force law written in image coordinates: the symbols
    /// `t, x, c, f` of the result stand for the image variables. Requires the
    /// stored explicit inverse.
    pub fn transform_force_image(&self, force: &Expr) -> Result<Expr, TransformError> {
        let (inv_t, inv_x) = self.inv.as_ref().ok_or(TransformError::MissingInverse)?;
        let pt = self.phi.diff("t");
        let px = self.phi.diff("x");
        let st = self.psi.diff("t");
        let sx = self.psi.diff("x");
        // Source speed and density for a given image speed/density, still at
        // the source base point: solve cbar = (st + c sx)/(pt + c px) for c,
        // then f = fbar J^2 / D^3.
        let cb = expr::sym("__cb");
        let c_src = ((st - cb.clone() * pt.clone()) / (cb * px.clone() - sx)).normalize();
        let d_src = (pt + c_src.clone() * px).normalize();
        let f_src = (expr::sym("__fb") * expr::powi(self.jacobian(), 2)
            / expr::powi(d_src, 3))
        .normalize();
        let fresh = [("t", expr::sym("__tb")), ("x", expr::sym("__xb"))];
        let back = [
            ("t", inv_t.subst(&fresh)),
            ("x", inv_x.subst(&fresh)),
        ];
        let rename = [
            ("__tb", expr::sym("t")),
            ("__xb", expr::sym("x")),
            ("__cb", expr::sym("c")),
            ("__fb", expr::sym("f")),
        ];
        Ok(self
            .push_force(force)
            .subst(&[("c", c_src), ("f", f_src)])
            .subst(&back)
            .subst(&rename)
            .normalize())
    }

    /// Image components `(tau_bar, xi_bar)` of the base field
    /// `tau ∂t + xi ∂x`, written in image coordinates. Requires the stored
    /// explicit inverse.
    pub fn pushforward_pair(&self, tau: &Expr, xi: &Expr) -> Result<(Expr, Expr), TransformError> {
        let (inv_t, inv_x) = self.inv.as_ref().ok_or(TransformError::MissingInverse)?;
        let tb = (tau.clone() * self.phi.diff("t") + xi.clone() * self.phi.diff("x")).normalize();
        let xb = (tau.clone() * self.psi.diff("t") + xi.clone() * self.psi.diff("x")).normalize();
        let fresh = [("t", expr::sym("__tb")), ("x", expr::sym("__xb"))];
        let back = [
            ("t", inv_t.subst(&fresh)),
            ("x", inv_x.subst(&fresh)),
        ];
        let rename = [("__tb", expr::sym("t")), ("__xb", expr::sym("x"))];
        let pull = |e: Expr| e.subst(&back).subst(&rename).normalize();
        Ok((pull(tb), pull(xb)))
    }

    /// Simultaneous substitution of the image coordinates into `e`: rewrites an
    /// expression in image variables as an expression in source variables.
    pub fn subst_image(&self, e: &Expr) -> Expr {
        e.subst(&[
            ("t", self.phi.clone()),
            ("x", self.psi.clone()),
            ("c", self.cbar()),
            ("f", self.fbar()),
        ])
        .normalize()
    }

    /// Composition `self . inner` (apply `inner` first).
    pub fn after(&self, inner: &Diffeo2) -> Diffeo2 {
        let image = [("t", inner.phi.clone()), ("x", inner.psi.clone())];
        let inv = match (&self.inv, &inner.inv) {
            (Some((st, sx)), Some((it, ix))) => {
                let back = [("t", st.clone()), ("x", sx.clone())];
                Some((it.subst(&back).normalize(), ix.subst(&back).normalize()))
            }
            _ => None,
        };
        Diffeo2 {
            phi: self.phi.subst(&image).normalize(),
            psi: self.psi.subst(&image).normalize(),
            inv,
        }
    }

    /// Numeric image of a phase point.
    pub fn transform_point(
        &self,
        p: Point,
        params: &BTreeMap<String, f64>,
    ) -> Result<Point, TransformError> {
        let env = point_env(p, params);
        let den = self.den().eval(&env)?;
        let jac = self.jacobian().eval(&env)?;
        if den.abs() < 1e-12 || jac.abs() < 1e-12 {
            return Err(TransformError::Degenerate(format!(
                "speed denominator {den:.3e}, jacobian {jac:.3e}"
            )));
        }
        Ok([
            self.phi.eval(&env)?,
            self.psi.eval(&env)?,
            self.cbar().eval(&env)?,
            self.fbar().eval(&env)?,
        ])
    }

    /// Numeric preimage of a phase point; requires the stored explicit inverse.
    pub fn pull_back_point(
        &self,
        p: Point,
        params: &BTreeMap<String, f64>,
    ) -> Result<Point, TransformError> {
        let (inv_t, inv_x) = self.inv.as_ref().ok_or(TransformError::MissingInverse)?;
        let [tb, xb, cb, fb] = p;
        let benv = point_env([tb, xb, 0.0, 0.0], params);
        let t = inv_t.eval(&benv)?;
        let x = inv_x.eval(&benv)?;
        let env = point_env([t, x, 0.0, 0.0], params);
        let pt = self.phi.diff("t").eval(&env)?;
        let px = self.phi.diff("x").eval(&env)?;
        let st = self.psi.diff("t").eval(&env)?;
        let sx = self.psi.diff("x").eval(&env)?;
        // cb = (st + c sx)/(pt + c px) solved for the source speed c.
        let denom = cb * px - sx;
        if denom.abs() < 1e-12 {
            return Err(TransformError::Degenerate(format!(
                "speed inversion denominator {denom:.3e}"
            )));
        }
        let c = (st - cb * pt) / denom;
        let den = pt + c * px;
        let jac = sx * pt - px * st;
        if den.abs() < 1e-12 || jac.abs() < 1e-12 {
            return Err(TransformError::Degenerate(format!(
                "speed denominator {den:.3e}, jacobian {jac:.3e}"
            )));
        }
        let f = fb * jac * jac / den.powi(3);
        Ok([t, x, c, f])
    }
}

fn point_env(p: Point, params: &BTreeMap<String, f64>) -> Env {
    let mut env = Env::new();
    for (k, v) in params {
        env.insert(k.clone(), *v);
    }
    env.insert("t", p[0]);
    env.insert("x", p[1]);
    env.insert("c", p[2]);
    env.insert("f", p[3]);
    env
}

/// Residual of the claim that `map` carries the force law `force` to `target`:
/// the pushed force minus `target` evaluated at the image point, both written
/// in source coordinates. The claim holds iff this vanishes identically.
pub fn reduction_residual(map: &Diffeo2, force: &Expr, target: &Expr) -> Expr {
    (map.push_force(force) - map.subst_image(target)).normalize()
}

/// Gap between the finite transformation linearized at the identity and the
/// force component of the prolonged field.
///
/// For the near-identity map `(t, x) -> (t + eps tau, x + eps xi)` the pushed
/// force at a fixed source point is differentiable in `eps`, and its derivative
/// at zero equals the prolongation coefficient `phi` of the field. Returns the
/// absolute difference between a central finite difference and the symbolic
/// coefficient, evaluated at `point`.
pub fn finite_vs_infinitesimal_gap(
    field: &VectorField,
    force: &Expr,
    point: &Env,
    eps: f64,
) -> Result<f64, TransformError> {
    let phi_inf = field
        .prolong_equiv(force)
        .phi
        .expect("prolong_equiv always fills the force component");
    let exact = phi_inf.eval(point)?;
    let q = expr::rationalize(eps, 1_000_000_000, 1e-12)
        .unwrap_or_else(|| num_rational::Ratio::new((eps * 1e9).round() as i64, 1_000_000_000));
    let eps_exact = *q.numer() as f64 / *q.denom() as f64;
    let step = expr::rat(*q.numer(), *q.denom());
    let mut side = [0.0f64; 2];
    for (i, sign) in [1i64, -1].into_iter().enumerate() {
        let h = expr::num(sign) * step.clone();
        let map = Diffeo2::new(
            (expr::sym("t") + h.clone() * field.tau.clone()).normalize(),
            (expr::sym("x") + h * field.xi.clone()).normalize(),
        );
        side[i] = map.push_force(force).eval(point)?;
    }
    Ok(((side[0] - side[1]) / (2.0 * eps_exact) - exact).abs())
}

/// A named change of variables from the built-in catalog, together with the
/// closed forms it induces (used as oracle expectations by the verifier).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapEntry {
    pub name: String,
    /// Scalar parameters appearing in the map, sampled away from zero.
    #[serde(default)]
    pub params: Vec<String>,
    /// Placeholder functions appearing in the map.
    #[serde(default)]
    pub funcs: Vec<String>,
    pub phi: String,
    pub psi: String,
    #[serde(default)]
    pub inv_phi: Option<String>,
    #[serde(default)]
    pub inv_psi: Option<String>,
    /// Expected image speed in source coordinates.
    #[serde(default)]
    pub cbar: Option<String>,
    /// Expected image density in source coordinates.
    #[serde(default)]
    pub fbar: Option<String>,
    /// Expected transformed force law; the symbol `FORCE` stands for the value
    /// of the source force at the source point.
    #[serde(default)]
    pub force: Option<String>,
    /// Sampling ranges `name -> [lo, hi, both_signs]` overriding the defaults.
    #[serde(default)]
    pub ranges: BTreeMap<String, (f64, f64, bool)>,
}

impl MapEntry {
    /// Placeholder declarations for parsing the stored formulas.
    pub fn decls(&self) -> FuncDecls {
        FuncDecls::new(&self.funcs)
    }

    /// Parse one of the stored formula strings.
    pub fn parse_expr(&self, src: &str) -> Result<Expr, ExprError> {
        parse_with_funcs(src, &self.decls())
    }

    /// Build the diffeomorphism (with inverse when stored).
    pub fn diffeo(&self) -> Result<Diffeo2, ExprError> {
        let mut d = Diffeo2::new(self.parse_expr(&self.phi)?, self.parse_expr(&self.psi)?);
        if let (Some(it), Some(ix)) = (&self.inv_phi, &self.inv_psi) {
            d = d.with_inverse(self.parse_expr(it)?, self.parse_expr(ix)?);
        }
        Ok(d)
    }

    /// Sampling spec for verifying this entry's closed forms.
    pub fn sample_spec(&self) -> SampleSpec {
        let mut spec = SampleSpec::default();
        for (name, (lo, hi, both)) in &self.ranges {
            let r = if *both {
                SymRange::symmetric(*lo, *hi)
            } else {
                SymRange::positive(*lo, *hi)
            };
            spec = spec.with_range(name, r);
        }
        // Guards cannot mention placeholder functions (they are evaluated
        // before instantiation), so only parameter-free maps get them; samples
        // hitting a singular locus of the others are rejected by domain errors.
        if self.funcs.is_empty() {
            if let Ok(d) = self.diffeo() {
                spec = spec
                    .with_guard(expr::abs(d.den()))
                    .with_guard(expr::abs(d.jacobian()));
            }
        }
        spec
    }
}

static CATALOG: OnceLock<Vec<MapEntry>> = OnceLock::new();

/// The built-in catalog of named changes of variables.
pub fn catalog() -> &'static [MapEntry] {
    CATALOG.get_or_init(|| {
        serde_json::from_str(include_str!("maps.json")).expect("embedded map catalog is valid")
    })
}

/// Look up a named map.
pub fn catalog_map(name: &str) -> Result<&'static MapEntry, TransformError> {
    catalog()
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| TransformError::UnknownMap(name.to_string()))
}
