//! Classifying-equation residuals and symmetry-algebra dimension estimation.
//!
//! A candidate generator `X = tau ∂t + xi ∂x` is a symmetry of
//! `f_t + c f_x + (F f)_c = 0` exactly when the classifying residual
//! vanishes identically. Three equivalent formulations are provided:
//!
//! * [`residual_merged`]: the merged second-order condition, linear in
//!   `(tau, xi)` and their derivatives — the workhorse for verification and
//!   dimension estimation;
//! * [`residual_prolonged`]: the same condition assembled from the prolonged
//!   field (`alpha`, `eta`) and the force-direction component;
//! * [`lie_onshell_residual`]: the textbook invariance condition on the jet
//!   space, with `f_t` eliminated on solutions.
//!
//! For a fixed force law the merged residual is linear in the generator, so
//! restricting `tau, xi` to a polynomial ansatz turns "find all symmetries"
//! into a numeric nullspace problem; see [`estimate_dimension`].

use crate::expr::{self, rationalize, Env, Expr, ExprError, SampleSpec};
use crate::fields::{FieldError, VectorField};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, thiserror::Error)]
pub enum ClassifyError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("invalid input: {0}")]
    BadInput(String),
}

/// Merged classifying residual (vanishes iff `X` is a symmetry):
///
/// ```text
/// tau F_t + xi F_x + (xi_t + c(xi_x - tau_t) - c^2 tau_x) F_c
///   + f (3c tau_x - 2 xi_x + tau_t) F_f + (3c tau_x - xi_x + 2 tau_t) F
///   - [xi_tt + c(2 xi_tx - tau_tt) + c^2(xi_xx - 2 tau_tx) - c^3 tau_xx]
/// ```
pub fn residual_merged(force: &Expr, field: &VectorField) -> Expr {
    let c = expr::sym("c");
    let f = expr::sym("f");
    let (tau, xi) = (&field.tau, &field.xi);
    let (tau_t, tau_x) = (tau.diff("t"), tau.diff("x"));
    let (xi_t, xi_x) = (xi.diff("t"), xi.diff("x"));
    let lhs = tau.clone() * force.diff("t")
        + xi.clone() * force.diff("x")
        + (xi_t.clone()
            + c.clone() * (xi_x.clone() - tau_t.clone())
            - Expr::powi(c.clone(), 2) * tau_x.clone())
            * force.diff("c")
        + f * (expr::num(3) * c.clone() * tau_x.clone() - expr::num(2) * xi_x.clone()
            + tau_t.clone())
            * force.diff("f")
        + (expr::num(3) * c.clone() * tau_x.clone() - xi_x.clone()
            + expr::num(2) * tau_t.clone())
            * force.clone();
    let rhs = xi_t.diff("t")
        + c.clone() * (expr::num(2) * xi_t.diff("x") - tau_t.diff("t"))
        + Expr::powi(c.clone(), 2) * (xi_x.diff("x") - expr::num(2) * tau_t.diff("x"))
        - Expr::powi(c, 3) * tau_x.diff("x");
    (lhs - rhs).normalize()
}

/// Classifying residual assembled from the prolonged field:
///
/// ```text
/// tau F_t + xi F_x + alpha F_c + eta F_f
///   - [alpha_t + c alpha_x + F alpha_c - F (tau_t + c tau_x)]
/// ```
///
/// Identically equal to [`residual_merged`] as a symbolic expression.
pub fn residual_prolonged(force: &Expr, field: &VectorField) -> Expr {
    let c = expr::sym("c");
    let p = field.prolong_tx();
    let transported = p.alpha.diff("t")
        + c.clone() * p.alpha.diff("x")
        + force.clone() * p.alpha.diff("c")
        - force.clone() * (field.tau.diff("t") + c * field.tau.diff("x"));
    let advected = p.tau.clone() * force.diff("t")
        + p.xi.clone() * force.diff("x")
        + p.alpha.clone() * force.diff("c")
        + p.eta.clone() * force.diff("f");
    (advected - transported).normalize()
}

/// Variant of [`residual_prolonged`] for density-independent force laws
/// (`F = F(t, x, c)`): the `eta F_f` advection term is dropped, and a force
/// law mentioning `f` is rejected.
pub fn residual_prolonged_plain(
    force: &Expr,
    field: &VectorField,
) -> Result<Expr, ClassifyError> {
    if force.contains_sym("f") {
        return Err(ClassifyError::BadInput(
            "force law depends on f; use the density-dependent residual".into(),
        ));
    }
    let c = expr::sym("c");
    let p = field.prolong_tx();
    let transported = p.alpha.diff("t")
        + c.clone() * p.alpha.diff("x")
        + force.clone() * p.alpha.diff("c")
        - force.clone() * (field.tau.diff("t") + c * field.tau.diff("x"));
    let advected = p.tau.clone() * force.diff("t")
        + p.xi.clone() * force.diff("x")
        + p.alpha.clone() * force.diff("c");
    Ok((advected - transported).normalize())
}

/// Jet-space invariance residual, on solutions.
///
/// The prolonged field acts on `Delta = f_t + c f_x + (F f)_c` over the jet
/// coordinates `(t, x, c, f, ft, fx, fc)`; `f_t` is then eliminated via the
/// equation itself. The result is affine in the remaining jets `fx, fc` and
/// vanishes identically iff `X` is a symmetry.
pub fn lie_onshell_residual(force: &Expr, field: &VectorField) -> Expr {
    let (t, x, c, f) = (expr::sym("t"), expr::sym("x"), expr::sym("c"), expr::sym("f"));
    let _ = (t, x);
    let (ft, fx, fc) = (expr::sym("ft"), expr::sym("fx"), expr::sym("fc"));
    let p = field.prolong_tx();
    let (tau, xi, alpha, eta) = (&p.tau, &p.xi, &p.alpha, &p.eta);

    // Total derivatives D_v(theta) = theta_v + theta_f * f_v on functions of
    // (t, x, c, f); the jet components of the prolongation follow.
    let dtot = |theta: &Expr, v: &str, fv: &Expr| theta.diff(v) + theta.diff("f") * fv.clone();
    let jet = |v: &str, fv: &Expr| {
        dtot(eta, v, fv)
            - ft.clone() * dtot(tau, v, fv)
            - fx.clone() * dtot(xi, v, fv)
            - fc.clone() * dtot(alpha, v, fv)
    };
    let eta_t = jet("t", &ft);
    let eta_x = jet("x", &fx);
    let eta_c = jet("c", &fc);

    let (f_t, f_x, f_c, f_f) = (
        force.diff("t"),
        force.diff("x"),
        force.diff("c"),
        force.diff("f"),
    );
    // Partials of Delta = ft + c fx + F fc + F_c f + F_f f fc in jet space.
    let d_t = f_t.clone() * fc.clone() + f_c.diff("t") * f.clone() + f_f.diff("t") * f.clone() * fc.clone();
    let d_x = f_x.clone() * fc.clone() + f_c.diff("x") * f.clone() + f_f.diff("x") * f.clone() * fc.clone();
    let d_c = fx.clone()
        + f_c.clone() * fc.clone()
        + f_c.diff("c") * f.clone()
        + f_f.diff("c") * f.clone() * fc.clone();
    let d_f = expr::num(2) * f_f.clone() * fc.clone()
        + f_c.diff("f") * f.clone()
        + f_c.clone()
        + f_f.diff("f") * f.clone() * fc.clone();

    let applied = tau.clone() * d_t
        + xi.clone() * d_x
        + alpha.clone() * d_c
        + eta.clone() * d_f
        + eta_t
        + c.clone() * eta_x
        + (force.clone() + f_f.clone() * f.clone()) * eta_c;

    // Eliminate f_t on solutions.
    let ft_onshell =
        -(c * fx.clone() + force.clone() * fc.clone() + f_c * f.clone() + f_f * f * fc);
    applied.subst_sym("ft", &ft_onshell).normalize()
}

/// Split the on-shell residual (affine in `fx`, `fc`) into its constant part
/// and the two jet coefficients; each must vanish identically for a symmetry.
pub fn onshell_coefficients(force: &Expr, field: &VectorField) -> [Expr; 3] {
    let r = lie_onshell_residual(force, field);
    let zero = Expr::num(0);
    let one = Expr::num(1);
    let base = r.subst(&[("fx", zero.clone()), ("fc", zero.clone())]).normalize();
    let coeff_fx = (r.subst(&[("fx", one.clone()), ("fc", zero.clone())]) - base.clone()).normalize();
    let coeff_fc = (r.subst(&[("fx", zero), ("fc", one)]) - base.clone()).normalize();
    [base, coeff_fx, coeff_fc]
}

/// Settings for [`estimate_dimension`].
#[derive(Clone, Debug)]
pub struct DimCfg {
    /// Sample rows; 0 means `max(3 * columns, 120)`.
    pub n_rows: usize,
    pub seed: u64,
    /// A singular value below `null_tol * sigma_max` counts as null.
    pub null_tol: f64,
    /// Rationalization bounds for the reported basis.
    pub max_den: i64,
    pub rat_tol: f64,
    /// Rejection budget per sample row.
    pub max_attempts: usize,
}

impl Default for DimCfg {
    fn default() -> DimCfg {
        DimCfg {
            n_rows: 0,
            seed: 0,
            null_tol: 1e-8,
            max_den: 64,
            rat_tol: 1e-6,
            max_attempts: 500,
        }
    }
}

/// Outcome of a dimension estimate.
#[derive(Clone, Debug, Serialize)]
pub struct DimReport {
    /// Force law, printed.
    pub force: String,
    /// Polynomial ansatz degree for `tau, xi`.
    pub degree: usize,
    /// Nullspace dimension = estimated symmetry-algebra dimension within the
    /// ansatz space.
    pub dim: usize,
    /// Rationalized nullspace basis as vector fields.
    pub basis: Vec<VectorField>,
    /// `sigma_max / sigma_min` over the non-null block (1.0 when everything
    /// is null).
    pub condition_estimate: f64,
    /// Spectral gap `sigma_smallest_nonnull / sigma_largest_null`
    /// (infinity reported as 0.0 when there is no null part... see `dim`).
    pub singular_values: Vec<f64>,
    pub rows: usize,
    pub columns: usize,
}

/// Monomials `t^a x^b` with `a + b <= degree`, in a fixed order.
fn monomials(degree: usize) -> Vec<Expr> {
    let mut out = Vec::new();
    for total in 0..=degree {
        for a in (0..=total).rev() {
            let b = total - a;
            let mut fac = Vec::new();
            if a > 0 {
                fac.push(Expr::powi(expr::sym("t"), a as i64));
            }
            if b > 0 {
                fac.push(Expr::powi(expr::sym("x"), b as i64));
            }
            out.push(expr::mul(fac).normalize());
        }
    }
    out
}

/// Estimate the dimension of the symmetry algebra of `force` within the
/// polynomial ansatz `tau, xi in span{t^a x^b : a+b <= degree}`.
///
/// The merged residual is linear in the generator, so each sample point in
/// `(t, x, c, f)` contributes one linear equation on the `2M` ansatz
/// coefficients; the nullspace of the sampled system (by SVD with column
/// equilibration) is the algebra. Free parameters in the force law must be
/// pinned via `spec.fixed`; the caller re-runs over parameter draws.
pub fn estimate_dimension(
    force: &Expr,
    degree: usize,
    spec: &SampleSpec,
    cfg: &DimCfg,
) -> Result<DimReport, ClassifyError> {
    if !force.placeholder_names().is_empty() {
        return Err(ClassifyError::BadInput(
            "instantiate placeholder functions before estimating dimension".into(),
        ));
    }
    let mons = monomials(degree);
    let m = mons.len();
    let cols = 2 * m;
    let zero = Expr::num(0);
    // Expand so that a monomial field solving the equation on its own yields
    // an exactly zero tree, not one that cancels only in floating point.
    let mut residuals = Vec::with_capacity(cols);
    for mon in &mons {
        let e = VectorField::new(mon.clone(), zero.clone());
        residuals.push(residual_merged(force, &e).expand());
    }
    for mon in &mons {
        let e = VectorField::new(zero.clone(), mon.clone());
        residuals.push(residual_merged(force, &e).expand());
    }

    // Everything that is not a coordinate must be pinned.
    let mut unpinned = Vec::new();
    for r in &residuals {
        for s in r.free_params() {
            if !spec.fixed.contains_key(&s) && !unpinned.contains(&s) {
                unpinned.push(s);
            }
        }
    }
    if !unpinned.is_empty() {
        return Err(ClassifyError::BadInput(format!(
            "free parameters must be fixed for dimension estimation: {}",
            unpinned.join(", ")
        )));
    }

    let rows = if cfg.n_rows == 0 { (3 * cols).max(120) } else { cfg.n_rows };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    let coords = ["t", "x", "c", "f"];
    for row in 0..rows {
        let vals = draw_row(&residuals, spec, &coords, cfg, &mut rng)?;
        for (col, v) in vals.into_iter().enumerate() {
            a[(row, col)] = v;
        }
    }

    // Column equilibration stabilizes the SVD across wildly different
    // monomial scales. Columns that are tiny relative to the largest one are
    // residuals that vanish up to rounding; scaling those up would turn noise
    // into a full-rank column, so they are left alone.
    let mut scales = vec![1.0f64; cols];
    let global = (0..cols).map(|c| a.column(c).norm()).fold(0.0f64, f64::max);
    for col in 0..cols {
        let norm = a.column(col).norm();
        if norm > global * 1e-10 {
            scales[col] = norm;
            for row in 0..rows {
                a[(row, col)] /= norm;
            }
        }
    }

    let svd = a.clone().svd(true, true);
    let mut sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    sigma.sort_by(|p, q| q.partial_cmp(p).unwrap());
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let threshold = cfg.null_tol * sigma_max;
    let dim = if sigma_max == 0.0 {
        cols
    } else {
        sigma.iter().filter(|&&s| s <= threshold).count()
    };
    let condition_estimate = {
        let nonnull: Vec<f64> = sigma.iter().copied().filter(|&s| s > threshold).collect();
        match (nonnull.first(), nonnull.last()) {
            (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
            _ => 1.0,
        }
    };

    // Nullspace basis in the original (un-equilibrated) coefficient space.
    let v_t = svd.v_t.as_ref().ok_or_else(|| {
        ClassifyError::BadInput("SVD did not return right singular vectors".into())
    })?;
    let mut null_rows: Vec<Vec<f64>> = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if sigma_max == 0.0 || s <= threshold {
            let mut v: Vec<f64> = (0..cols).map(|j| v_t[(i, j)] / scales[j]).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
            null_rows.push(v);
        }
    }
    let basis = clean_basis(&mut null_rows, &mons, cfg);

    Ok(DimReport {
        force: force.to_string(),
        degree,
        dim,
        basis,
        condition_estimate,
        singular_values: sigma,
        rows,
        columns: cols,
    })
}

/// Draw one admissible sample point and evaluate every ansatz residual there.
fn draw_row(
    residuals: &[Expr],
    spec: &SampleSpec,
    coords: &[&str],
    cfg: &DimCfg,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, ClassifyError> {
    'attempt: for _ in 0..cfg.max_attempts {
        let mut env = Env::new();
        for (k, v) in &spec.fixed {
            env.insert(k.clone(), *v);
        }
        for name in coords {
            let range = spec
                .ranges
                .get(*name)
                .copied()
                .unwrap_or_else(|| default_coord_range(name));
            env.insert(*name, range.draw(rng));
        }
        for g in &spec.guards {
            match g.eval(&env) {
                Ok(v) if v >= spec.guard_floor => {}
                Ok(_) => continue 'attempt,
                Err(ExprError::Domain { .. }) => continue 'attempt,
                Err(other) => return Err(other.into()),
            }
        }
        let mut vals = Vec::with_capacity(residuals.len());
        for r in residuals {
            match r.eval(&env) {
                Ok(v) => vals.push(v),
                Err(ExprError::Domain { .. }) => continue 'attempt,
                Err(other) => return Err(other.into()),
            }
        }
        return Ok(vals);
    }
    Err(ClassifyError::Expr(ExprError::Sampling(format!(
        "no admissible sample row within {} attempts",
        cfg.max_attempts
    ))))
}

fn default_coord_range(name: &str) -> crate::expr::SymRange {
    if name == "f" {
        crate::expr::SymRange::positive(0.5, 2.0)
    } else {
        crate::expr::SymRange::symmetric(0.5, 2.0)
    }
}

/// Gauss-Jordan elimination on the nullspace rows, then rational snapping,
/// turning raw SVD vectors into readable generators.
fn clean_basis(rows: &mut Vec<Vec<f64>>, mons: &[Expr], cfg: &DimCfg) -> Vec<VectorField> {
    let k = rows.len();
    if k == 0 {
        return Vec::new();
    }
    let cols = rows[0].len();
    let mut pivot_row = 0;
    for col in 0..cols {
        if pivot_row >= k {
            break;
        }
        // Partial pivot.
        let (best, best_val) = (pivot_row..k)
            .map(|r| (r, rows[r][col].abs()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if best_val < 1e-9 {
            continue;
        }
        rows.swap(pivot_row, best);
        let p = rows[pivot_row][col];
        for v in rows[pivot_row].iter_mut() {
            *v /= p;
        }
        for r in 0..k {
            if r != pivot_row {
                let factor = rows[r][col];
                if factor.abs() > 1e-12 {
                    for j in 0..cols {
                        let delta = factor * rows[pivot_row][j];
                        rows[r][j] -= delta;
                    }
                }
            }
        }
        pivot_row += 1;
    }

    let m = mons.len();
    let mut out = Vec::with_capacity(k);
    for row in rows.iter() {
        let snap = |v: f64| -> Expr {
            if let Some(r) = rationalize(v, cfg.max_den, cfg.rat_tol) {
                Expr::Num(r)
            } else if let Some(r) = rationalize(v, 1_000_000, 1e-9) {
                Expr::Num(r)
            } else {
                // Last resort: widest continued-fraction approximation.
                Expr::Num(rationalize(v, i64::MAX / 4, 1e-12).unwrap_or_else(|| crate::expr::Rat::from_integer(0)))
            }
        };
        let tau_terms: Vec<Expr> = (0..m)
            .filter(|&j| row[j].abs() > 1e-9)
            .map(|j| snap(row[j]) * mons[j].clone())
            .collect();
        let xi_terms: Vec<Expr> = (0..m)
            .filter(|&j| row[m + j].abs() > 1e-9)
            .map(|j| snap(row[m + j]) * mons[j].clone())
            .collect();
        out.push(VectorField::new(
            expr::add(tau_terms).normalize(),
            expr::add(xi_terms).normalize(),
        ));
    }
    out
}

/// Convenience: run [`estimate_dimension`] over several parameter draws and
/// report the minimum dimension (a generator must survive every draw).
pub fn estimate_dimension_over_draws(
    force: &Expr,
    degree: usize,
    spec: &SampleSpec,
    cfg: &DimCfg,
    param_draws: &[BTreeMap<String, f64>],
) -> Result<DimReport, ClassifyError> {
    let mut best: Option<DimReport> = None;
    for (i, draw) in param_draws.iter().enumerate() {
        let mut s = spec.clone();
        for (k, v) in draw {
            s.fixed.insert(k.clone(), *v);
        }
        let mut c = cfg.clone();
        c.seed = cfg.seed.wrapping_add(i as u64);
        let rep = estimate_dimension(force, degree, &s, &c)?;
        best = match best {
            None => Some(rep),
            Some(prev) if rep.dim < prev.dim => Some(rep),
            Some(prev) => Some(prev),
        };
    }
    best.ok_or_else(|| ClassifyError::BadInput("no parameter draws supplied".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{is_zero, parse, SampleSpec, Verdict, ZeroCfg};

    fn vf(tau: &str, xi: &str) -> VectorField {
        VectorField::parse(tau, xi).unwrap()
    }

    #[test]
    fn merged_residual_flags_scaling_against_inverse_density() {
        // F = P/f with X = t ∂t + x ∂x leaves residual 2 P / f.
        let force = parse("P*f^(-1)").unwrap();
        let r = residual_merged(&force, &vf("t", "x"));
        let diff = r - parse("2*P*f^(-1)").unwrap();
        assert!(matches!(
            is_zero(&diff, &SampleSpec::default(), &ZeroCfg::default()).unwrap(),
            Verdict::SymbolicZero | Verdict::NumericZero { .. }
        ));
    }

    #[test]
    fn merged_residual_accepts_lorentz_like_scaling() {
        // F = P/f with X = t ∂t - x ∂x is a symmetry.
        let force = parse("P*f^(-1)").unwrap();
        let r = residual_merged(&force, &vf("t", "-x"));
        assert_eq!(r, Expr::num(0));
    }

    #[test]
    fn prolonged_equals_merged_symbolically() {
        let force = parse("P*f^(-1)").unwrap();
        for (tau, xi) in [("t", "x"), ("t^2", "t*x"), ("x", "t"), ("t*x", "x^2")] {
            let field = vf(tau, xi);
            let d = residual_prolonged(&force, &field) - residual_merged(&force, &field);
            assert!(d.expand().is_zero_const(), "mismatch for ({tau}, {xi})");
        }
        let poly_force = parse("c^3 + t*x*c - f*x").unwrap();
        let field = vf("t^2 + x", "t*x - 1");
        let d = residual_prolonged(&poly_force, &field) - residual_merged(&poly_force, &field);
        assert!(d.expand().is_zero_const());
    }

    #[test]
    fn plain_residual_rejects_density_dependence() {
        let force = parse("P*f^2").unwrap();
        assert!(residual_prolonged_plain(&force, &vf("t", "x")).is_err());
        let force = parse("c^(-3)").unwrap();
        assert!(residual_prolonged_plain(&force, &vf("t", "x")).is_ok());
    }

    #[test]
    fn onshell_residual_vanishes_for_free_streaming() {
        let force = Expr::num(0);
        let mut spec = SampleSpec::default();
        spec.per_sample.insert("fx".to_string());
        spec.per_sample.insert("fc".to_string());
        for (tau, xi) in [("1", "0"), ("t^2", "t*x"), ("t*x", "x^2"), ("x", "0")] {
            let r = lie_onshell_residual(&force, &vf(tau, xi));
            assert!(
                is_zero(&r, &spec, &ZeroCfg::default()).unwrap().is_zero(),
                "({tau}, {xi})"
            );
        }
    }

    #[test]
    fn onshell_residual_vanishes_for_inverse_density_boost() {
        // F = P/f admits x ∂t. Note this force law is degenerate (F f is
        // density-independent, so the flux term vanishes identically); the
        // on-shell condition is then weaker than the classifying residual,
        // which is why no negative case is asserted here.
        let force = parse("P*f^(-1)").unwrap();
        let mut spec = SampleSpec::default();
        spec.per_sample.insert("fx".to_string());
        spec.per_sample.insert("fc".to_string());
        let r = lie_onshell_residual(&force, &vf("x", "0"));
        assert!(is_zero(&r, &spec, &ZeroCfg::default()).unwrap().is_zero());
    }

    #[test]
    fn onshell_residual_splits_quadratic_density_force() {
        // F = P f^2 is non-degenerate: the on-shell condition accepts the
        // tabled scaling 5t ∂t + 4x ∂x and flags the naive t ∂t + x ∂x.
        let force = parse("P*f^2").unwrap();
        let mut spec = SampleSpec::default();
        spec.per_sample.insert("fx".to_string());
        spec.per_sample.insert("fc".to_string());
        let r = lie_onshell_residual(&force, &vf("5*t", "4*x"));
        assert!(is_zero(&r, &spec, &ZeroCfg::default()).unwrap().is_zero());
        let r = lie_onshell_residual(&force, &vf("t", "x"));
        assert!(!is_zero(&r, &spec, &ZeroCfg::default()).unwrap().is_zero());
    }

    #[test]
    fn onshell_coefficients_are_exact_jet_split() {
        let force = parse("c^2 - x").unwrap();
        let field = vf("t^2", "t*x");
        let [base, cfx, cfc] = onshell_coefficients(&force, &field);
        let rebuilt = base + cfx * expr::sym("fx") + cfc * expr::sym("fc");
        let r = lie_onshell_residual(&force, &field);
        assert!((rebuilt - r).expand().is_zero_const());
    }

    #[test]
    fn free_streaming_has_eight_dimensional_algebra() {
        let report =
            estimate_dimension(&Expr::num(0), 3, &SampleSpec::default(), &DimCfg::default())
                .unwrap();
        assert_eq!(report.dim, 8, "singular values {:?}", report.singular_values);
        assert_eq!(report.basis.len(), 8);
    }

    #[test]
    fn inverse_density_has_five_dimensional_algebra() {
        let force = parse("P*f^(-1)").unwrap();
        let spec = SampleSpec::default().with_fixed("P", 1.3);
        let report = estimate_dimension(&force, 3, &spec, &DimCfg::default()).unwrap();
        assert_eq!(report.dim, 5, "singular values {:?}", report.singular_values);
    }

    #[test]
    fn unpinned_parameters_are_rejected() {
        let force = parse("P*f^(-1)").unwrap();
        let err = estimate_dimension(&force, 2, &SampleSpec::default(), &DimCfg::default());
        assert!(matches!(err, Err(ClassifyError::BadInput(_))));
    }
}
