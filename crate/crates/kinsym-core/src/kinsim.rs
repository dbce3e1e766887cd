//! Numerical cross-validation of the symbolic results: characteristic
//! integration of the kinetic equation, Liouville weight transport, the
//! particle-number flux functional, and solution mapping under finite
//! group transformations.
//!
//! The transport equation `f_t + c f_x + (F f)_c = 0` is solved along the
//! characteristics `dx = c dt, dc = F dt`, along which the density obeys
//! `dw = -F_c w dt`. All integrations use an embedded Dormand–Prince 5(4)
//! pair with adaptive step control (or a fixed step on request).

use std::collections::BTreeMap;

use thiserror::Error;

use crate::equivtrans::{Diffeo2, TransformError};
use crate::expr::{self, Env, Expr, ExprError};

#[derive(Debug, Error)]
pub enum KinsimError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("step size underflow at t = {t:.6e} (force singular or too stiff)")]
    StepUnderflow { t: f64 },
    #[error("step budget exhausted at t = {t:.6e}")]
    MaxSteps { t: f64 },
    #[error("state became non-finite at t = {t:.6e}")]
    NonFinite { t: f64 },
    #[error("surface measure 1 - c th_x - F th_c changes sign inside the box (node x={x:.4}, c={c:.4})")]
    SurfaceSign { x: f64, c: f64 },
    #[error("force law depends on the density; the characteristic system needs F = F(t, x, c)")]
    DensityDependentForce,
}

/// State carried along one characteristic: base point, speed, and the
/// Liouville weight (the density value transported by the flow).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CharState {
    pub t: f64,
    pub x: f64,
    pub c: f64,
    pub w: f64,
}

impl CharState {
    pub fn new(t: f64, x: f64, c: f64, w: f64) -> CharState {
        CharState { t, x, c, w }
    }
}

/// Integrator configuration. `fixed_step` disables the adaptive control.
#[derive(Debug, Clone)]
pub struct OdeCfg {
    pub rtol: f64,
    pub atol: f64,
    pub fixed_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeCfg {
    fn default() -> OdeCfg {
        OdeCfg {
            rtol: 1e-10,
            atol: 1e-10,
            fixed_step: None,
            max_steps: 200_000,
        }
    }
}

/// Right-hand side of the characteristic system, with the force and its
/// speed derivative held as compiled expressions.
struct CharRhs<'a> {
    force: &'a Expr,
    force_c: Expr,
    params: &'a BTreeMap<String, f64>,
}

impl<'a> CharRhs<'a> {
    fn new(force: &'a Expr, params: &'a BTreeMap<String, f64>) -> Result<CharRhs<'a>, KinsimError> {
        if force.contains_sym("f") {
            return Err(KinsimError::DensityDependentForce);
        }
        Ok(CharRhs {
            force,
            force_c: force.diff("c").normalize(),
            params,
        })
    }

    /// Derivatives of (x, c, w) at time t.
    fn eval(&self, t: f64, y: [f64; 3]) -> Result<[f64; 3], KinsimError> {
        let mut env = Env::new();
        for (k, v) in self.params {
            env.insert(k.clone(), *v);
        }
        env.insert("t", t);
        env.insert("x", y[0]);
        env.insert("c", y[1]);
        let f = self.force.eval(&env)?;
        let fc = self.force_c.eval(&env)?;
        Ok([y[1], f, -fc * y[2]])
    }
}

// Dormand–Prince 5(4) tableau.
const DP_C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
    ],
    &[
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
    &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Difference between the 5th- and 4th-order weights, used for the error
// estimate (the 5th-order weights are the last row of DP_A; FSAL).
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Core stepper: integrates from `s0.t` to `t_end` (either direction),
/// invoking `on_step` at the initial state and after every accepted step.
fn integrate_core(
    rhs: &CharRhs,
    s0: CharState,
    t_end: f64,
    cfg: &OdeCfg,
    on_step: &mut dyn FnMut(CharState),
) -> Result<CharState, KinsimError> {
    let mut t = s0.t;
    let mut y = [s0.x, s0.c, s0.w];
    on_step(s0);
    let span = t_end - t;
    if span == 0.0 {
        return Ok(s0);
    }
    let dir = span.signum();
    let mut h = match cfg.fixed_step {
        Some(h) => {
            let n = (span.abs() / h).ceil().max(1.0);
            span / n
        }
        None => dir * (span.abs() / 100.0).min(0.1),
    };
    let mut k1 = rhs.eval(t, y)?;
    let mut steps = 0usize;
    while (t_end - t) * dir > 0.0 {
        if steps >= cfg.max_steps {
            return Err(KinsimError::MaxSteps { t });
        }
        steps += 1;
        if (t + h - t_end) * dir > 0.0 {
            h = t_end - t;
        }
        // Seven stages; k7 is the derivative at the 5th-order result (FSAL).
        let mut k = [[0.0f64; 3]; 7];
        k[0] = k1;
        let mut failed = false;
        for (i, row) in DP_A.iter().enumerate() {
            let mut yi = y;
            for (j, a) in row.iter().enumerate() {
                for d in 0..3 {
                    yi[d] += h * a * k[j][d];
                }
            }
            match rhs.eval(t + DP_C[i] * h, yi) {
                Ok(ki) if ki.iter().all(|v| v.is_finite()) => k[i + 1] = ki,
                _ => {
                    failed = true;
                    break;
                }
            }
        }
        let ynew = {
            let mut v = y;
            if !failed {
                for (j, a) in DP_A[5].iter().enumerate() {
                    for d in 0..3 {
                        v[d] += h * a * k[j][d];
                    }
                }
            }
            v
        };
        let err = if failed || ynew.iter().any(|v| !v.is_finite()) {
            f64::INFINITY
        } else if cfg.fixed_step.is_some() {
            0.0
        } else {
            let mut acc = 0.0;
            for d in 0..3 {
                let mut e = 0.0;
                for j in 0..7 {
                    e += DP_E[j] * k[j][d];
                }
                e *= h;
                let sc = cfg.atol + cfg.rtol * y[d].abs().max(ynew[d].abs());
                acc += (e / sc) * (e / sc);
            }
            (acc / 3.0).sqrt()
        };
        if err <= 1.0 {
            t += h;
            y = ynew;
            k1 = k[6];
            on_step(CharState::new(t, y[0], y[1], y[2]));
            if !y.iter().all(|v| v.is_finite()) {
                return Err(KinsimError::NonFinite { t });
            }
        }
        if cfg.fixed_step.is_none() {
            let factor = if err.is_finite() && err > 0.0 {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            } else if err == 0.0 {
                5.0
            } else {
                0.2
            };
            h *= factor;
            if h.abs() < 1e-14 * (1.0 + t.abs()) {
                return Err(KinsimError::StepUnderflow { t });
            }
        }
    }
    Ok(CharState::new(t, y[0], y[1], y[2]))
}

/// Integrate one characteristic of `f_t + c f_x + (F f)_c = 0` from `s0` to
/// `t_end`, returning the accepted-step trajectory (first entry `s0`).
pub fn integrate_characteristic(
    force: &Expr,
    params: &BTreeMap<String, f64>,
    s0: CharState,
    t_end: f64,
    cfg: &OdeCfg,
) -> Result<Vec<CharState>, KinsimError> {
    let rhs = CharRhs::new(force, params)?;
    let mut traj = Vec::new();
    integrate_core(&rhs, s0, t_end, cfg, &mut |s| traj.push(s))?;
    Ok(traj)
}

/// Endpoint-only variant of [`integrate_characteristic`].
pub fn integrate_endpoint(
    force: &Expr,
    params: &BTreeMap<String, f64>,
    s0: CharState,
    t_end: f64,
    cfg: &OdeCfg,
) -> Result<CharState, KinsimError> {
    let rhs = CharRhs::new(force, params)?;
    integrate_core(&rhs, s0, t_end, cfg, &mut |_| {})
}

/// Solution value at `(t, x, c)` from the initial datum `f0(x, c)`: the
/// backward characteristic lands at `(0, x0, c0)` and the weight ODE supplies
/// the density factor accumulated along the way.
pub fn evaluate_solution(
    force: &Expr,
    params: &BTreeMap<String, f64>,
    f0: &dyn Fn(f64, f64) -> f64,
    t: f64,
    x: f64,
    c: f64,
    cfg: &OdeCfg,
) -> Result<f64, KinsimError> {
    if t == 0.0 {
        return Ok(f0(x, c));
    }
    let rhs = CharRhs::new(force, params)?;
    let end = integrate_core(&rhs, CharState::new(t, x, c, 1.0), 0.0, cfg, &mut |_| {})?;
    // Backward from w(t) = 1 gives w(0) = exp(+int_0^t F_c), the reciprocal
    // of the forward volume factor.
    Ok(f0(end.x, end.c) / end.w)
}

/// A surface `t = theta(x, c)` with its quadrature box.
#[derive(Debug, Clone)]
pub struct Surface {
    pub theta: Expr,
    pub x_lo: f64,
    pub x_hi: f64,
    pub c_lo: f64,
    pub c_hi: f64,
}

impl Surface {
    pub fn new(theta: Expr, x_box: (f64, f64), c_box: (f64, f64)) -> Surface {
        Surface {
            theta,
            x_lo: x_box.0,
            x_hi: x_box.1,
            c_lo: c_box.0,
            c_hi: c_box.1,
        }
    }

    pub fn parse(theta: &str, x_box: (f64, f64), c_box: (f64, f64)) -> Result<Surface, ExprError> {
        Ok(Surface::new(expr::parse(theta)?, x_box, c_box))
    }

    /// The constant-time plane t = v.
    pub fn plane(v: f64, x_box: (f64, f64), c_box: (f64, f64)) -> Surface {
        let theta = if v == 0.0 {
            expr::num(0)
        } else {
            expr::parse(&format!("{v:?}")).expect("float literal")
        };
        Surface::new(theta, x_box, c_box)
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Evaluate P_n and P_n' by the three-term recurrence.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Particle-number flux of the field `(1, c, F) f` through the surface
/// `t = theta(x, c)`: the tensor-product Gauss–Legendre quadrature of
/// `(1 - c theta_x - F theta_c) f(theta, x, c)` over the box.
pub fn flux_through_surface(
    force: &Expr,
    params: &BTreeMap<String, f64>,
    f: &dyn Fn(f64, f64, f64) -> Result<f64, KinsimError>,
    surf: &Surface,
    n_nodes: usize,
) -> Result<f64, KinsimError> {
    let theta_x = surf.theta.diff("x").normalize();
    let theta_c = surf.theta.diff("c").normalize();
    let (nodes, weights) = gauss_legendre(n_nodes);
    let (xm, xr) = (0.5 * (surf.x_hi + surf.x_lo), 0.5 * (surf.x_hi - surf.x_lo));
    let (cm, cr) = (0.5 * (surf.c_hi + surf.c_lo), 0.5 * (surf.c_hi - surf.c_lo));
    let mut total = 0.0;
    let mut measure_sign = 0.0f64;
    for (xi, wx) in nodes.iter().zip(&weights) {
        let x = xm + xr * xi;
        for (ci, wc) in nodes.iter().zip(&weights) {
            let c = cm + cr * ci;
            let mut env = Env::new();
            for (k, v) in params {
                env.insert(k.clone(), *v);
            }
            env.insert("x", x);
            env.insert("c", c);
            let tv = surf.theta.eval(&env)?;
            env.insert("t", tv);
            let fv = force.eval(&env)?;
            let measure = 1.0 - c * theta_x.eval(&env)? - fv * theta_c.eval(&env)?;
            if measure_sign == 0.0 {
                measure_sign = measure.signum();
            } else if measure.signum() != measure_sign {
                return Err(KinsimError::SurfaceSign { x, c });
            }
            total += wx * wc * measure * f(tv, x, c)?;
        }
    }
    Ok(total * xr * cr)
}

/// A separable Gaussian initial datum centred at `(x0, c0)`; its total mass
/// is `2 pi sx sc`.
pub fn gaussian_datum(x0: f64, c0: f64, sx: f64, sc: f64) -> impl Fn(f64, f64) -> f64 {
    move |x, c| {
        let u = (x - x0) / sx;
        let v = (c - c0) / sc;
        (-0.5 * (u * u + v * v)).exp()
    }
}

/// Transport a solution sampler through a point transformation: the image
/// solution of the transformed force law, sampled at image coordinates.
/// The map must carry an explicit inverse.
pub fn map_solution<'a>(
    map: &'a Diffeo2,
    params: &'a BTreeMap<String, f64>,
    f: impl Fn(f64, f64, f64) -> Result<f64, KinsimError> + 'a,
) -> impl Fn(f64, f64, f64) -> Result<f64, KinsimError> + 'a {
    move |tb, xb, cb| {
        // Pulling back a unit image density yields the reciprocal of the
        // density factor attached to this point.
        let src = map.pull_back_point([tb, xb, cb, 1.0], params)?;
        Ok(f(src[0], src[1], src[2])? / src[3])
    }
}

/// Uniform grid for the upwind reference solver.
#[derive(Debug, Clone)]
pub struct GridCfg {
    pub x_lo: f64,
    pub x_hi: f64,
    pub c_lo: f64,
    pub c_hi: f64,
    pub nx: usize,
    pub nc: usize,
    pub cfl: f64,
}

/// Grid solution snapshot with bilinear sampling between cell centres.
#[derive(Debug, Clone)]
pub struct GridSolution {
    pub cfg: GridCfg,
    pub t: f64,
    pub data: Vec<f64>,
}

impl GridSolution {
    fn dx(&self) -> f64 {
        (self.cfg.x_hi - self.cfg.x_lo) / self.cfg.nx as f64
    }

    fn dc(&self) -> f64 {
        (self.cfg.c_hi - self.cfg.c_lo) / self.cfg.nc as f64
    }

    pub fn sample(&self, x: f64, c: f64) -> f64 {
        let (dx, dc) = (self.dx(), self.dc());
        let u = (x - self.cfg.x_lo) / dx - 0.5;
        let v = (c - self.cfg.c_lo) / dc - 0.5;
        let (i, j) = (u.floor(), v.floor());
        let (su, sv) = (u - i, v - j);
        let at = |i: f64, j: f64| -> f64 {
            if i < 0.0 || j < 0.0 || i >= self.cfg.nx as f64 || j >= self.cfg.nc as f64 {
                0.0
            } else {
                self.data[i as usize * self.cfg.nc + j as usize]
            }
        };
        at(i, j) * (1.0 - su) * (1.0 - sv)
            + at(i + 1.0, j) * su * (1.0 - sv)
            + at(i, j + 1.0) * (1.0 - su) * sv
            + at(i + 1.0, j + 1.0) * su * sv
    }
}

/// First-order conservative upwind solver for `f_t + c f_x + (F f)_c = 0`.
/// A deliberately independent reference scheme: no characteristics, no
/// adaptive machinery. Outside the box the density is taken to vanish.
pub fn upwind_solve(
    force: &Expr,
    params: &BTreeMap<String, f64>,
    f0: &dyn Fn(f64, f64) -> f64,
    t_end: f64,
    cfg: &GridCfg,
) -> Result<GridSolution, KinsimError> {
    if force.contains_sym("f") {
        return Err(KinsimError::DensityDependentForce);
    }
    let (nx, nc) = (cfg.nx, cfg.nc);
    let dx = (cfg.x_hi - cfg.x_lo) / nx as f64;
    let dc = (cfg.c_hi - cfg.c_lo) / nc as f64;
    let xc: Vec<f64> = (0..nx).map(|i| cfg.x_lo + (i as f64 + 0.5) * dx).collect();
    let cc: Vec<f64> = (0..nc).map(|j| cfg.c_lo + (j as f64 + 0.5) * dc).collect();
    let cface: Vec<f64> = (0..=nc).map(|j| cfg.c_lo + j as f64 * dc).collect();
    let mut f: Vec<f64> = xc
        .iter()
        .flat_map(|&x| cc.iter().map(move |&c| f0(x, c)))
        .collect();

    let time_dependent = force.contains_sym("t");
    let mut env = Env::new();
    for (k, v) in params {
        env.insert(k.clone(), *v);
    }
    // Speed of the c-advection on the c-faces of every column.
    let mut fvel = vec![0.0f64; nx * (nc + 1)];
    let eval_faces = |env: &mut Env, t: f64, fvel: &mut Vec<f64>| -> Result<f64, KinsimError> {
        env.insert("t", t);
        let mut vmax = 0.0f64;
        for (i, &x) in xc.iter().enumerate() {
            env.insert("x", x);
            for (j, &cf) in cface.iter().enumerate() {
                env.insert("c", cf);
                let v = force.eval(env)?;
                fvel[i * (nc + 1) + j] = v;
                vmax = vmax.max(v.abs());
            }
        }
        Ok(vmax)
    };
    let mut vmax = eval_faces(&mut env, 0.0, &mut fvel)?;
    let cmax = cc.iter().fold(0.0f64, |m, c| m.max(c.abs()));

    let mut t = 0.0;
    let mut fnew = vec![0.0f64; nx * nc];
    while t < t_end {
        if time_dependent {
            vmax = eval_faces(&mut env, t, &mut fvel)?;
        }
        let rate = cmax / dx + vmax / dc;
        let mut dt = cfg.cfl / rate.max(1e-12);
        if t + dt > t_end {
            dt = t_end - t;
        }
        let get = |f: &[f64], i: isize, j: isize| -> f64 {
            if i < 0 || j < 0 || i >= nx as isize || j >= nc as isize {
                0.0
            } else {
                f[i as usize * nc + j as usize]
            }
        };
        for i in 0..nx {
            for j in 0..nc {
                let (ii, jj) = (i as isize, j as isize);
                let c = cc[j];
                // Upwind flux differences for x-advection at speed c.
                let hx = if c >= 0.0 {
                    c * (get(&f, ii, jj) - get(&f, ii - 1, jj))
                } else {
                    c * (get(&f, ii + 1, jj) - get(&f, ii, jj))
                };
                // Conservative upwind fluxes through the two c-faces.
                let flux = |vface: f64, fl: f64, fr: f64| -> f64 {
                    vface.max(0.0) * fl + vface.min(0.0) * fr
                };
                let v_hi = fvel[i * (nc + 1) + j + 1];
                let v_lo = fvel[i * (nc + 1) + j];
                let hc = flux(v_hi, get(&f, ii, jj), get(&f, ii, jj + 1))
                    - flux(v_lo, get(&f, ii, jj - 1), get(&f, ii, jj));
                fnew[i * nc + j] = f[i * nc + j] - dt / dx * hx - dt / dc * hc;
            }
        }
        std::mem::swap(&mut f, &mut fnew);
        t += dt;
    }
    Ok(GridSolution {
        cfg: cfg.clone(),
        t,
        data: f,
    })
}
