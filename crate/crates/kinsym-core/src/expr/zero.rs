//! Two-tier zero testing: symbolic normalization first, then randomized
//! numeric sampling with guard-aware rejection.
//!
//! An identity that survives `normalize`/`expand` is retried numerically:
//! placeholder functions are instantiated with concrete shapes, variables are
//! drawn fresh each sample, parameters are redrawn on a coarser schedule, and
//! the residual is compared against a scale built from the top-level additive
//! terms so cancellation of large terms is not mistaken for smallness.

use super::{parse, Env, Expr, ExprError};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

/// Concrete shape for a placeholder function, written in the formal argument
/// symbols `z1..zn` (`z` is accepted for unary shapes).
#[derive(Clone, Debug, PartialEq)]
pub struct AppShape {
    pub arity: usize,
    pub body: Expr,
}

impl AppShape {
    pub fn new(arity: usize, body: Expr) -> AppShape {
        AppShape { arity, body }
    }

    /// Parse a unary shape body such as `"z^2 + 1"`.
    pub fn unary(src: &str) -> AppShape {
        AppShape::of_arity(src, 1)
    }

    /// Parse a shape body of the given arity (formal symbols `z1..zn`).
    pub fn of_arity(src: &str, arity: usize) -> AppShape {
        let body = parse(src).unwrap_or_else(|e| panic!("bad shape `{src}`: {e}"));
        AppShape { arity, body }
    }

    fn formal(i: usize) -> String {
        format!("z{}", i + 1)
    }

    /// Body with `z` canonicalized to `z1` and the derivative multi-index
    /// applied symbolically.
    fn derived_body(&self, deriv: &[u8]) -> Expr {
        assert_eq!(deriv.len(), self.arity, "derivative tag per argument");
        let mut body = if self.arity == 1 {
            self.body.subst_sym("z", &Expr::sym("z1"))
        } else {
            self.body.clone()
        };
        for (i, &k) in deriv.iter().enumerate() {
            let v = AppShape::formal(i);
            for _ in 0..k {
                body = body.diff(&v).normalize();
            }
        }
        body
    }

    /// Substitute concrete arguments into the (derived) body.
    pub fn apply(&self, deriv: &[u8], args: &[Expr]) -> Expr {
        assert_eq!(args.len(), self.arity, "argument count matches arity");
        let body = self.derived_body(deriv);
        let bindings: Vec<(String, Expr)> = args
            .iter()
            .enumerate()
            .map(|(i, a)| (AppShape::formal(i), a.clone()))
            .collect();
        let refs: Vec<(&str, Expr)> = bindings
            .iter()
            .map(|(n, a)| (n.as_str(), a.clone()))
            .collect();
        body.subst(&refs)
    }

    /// Numeric evaluation of the derived body at concrete argument values.
    pub fn eval_at(&self, deriv: &[u8], args: &[f64]) -> Result<f64, ExprError> {
        assert_eq!(args.len(), self.arity, "argument count matches arity");
        let body = self.derived_body(deriv);
        let mut env = Env::new();
        for (i, v) in args.iter().enumerate() {
            env.insert(AppShape::formal(i), *v);
        }
        if self.arity == 1 {
            env.insert("z", args[0]);
        }
        body.eval(&env)
    }
}

/// Two default instantiations per arity: a polynomial with asymmetric weights
/// and a bounded transcendental one. A residual that vanishes identically for
/// both is treated as vanishing for generic shapes.
pub fn default_shapes(arity: usize) -> Vec<(String, AppShape)> {
    if arity == 1 {
        return vec![
            ("z^2 + 1".to_string(), AppShape::unary("z^2 + 1")),
            (
                "exp(z/(1 + z^2))".to_string(),
                AppShape::unary("exp(z/(1 + z^2))"),
            ),
        ];
    }
    let mut poly = String::from("1");
    let mut num = String::new();
    let mut den = String::from("1");
    for i in 0..arity {
        poly += &format!(" + {}*z{}^2", i + 2, i + 1);
        if i > 0 {
            num += " + ";
        }
        num += &format!("{}*z{}", i + 1, i + 1);
        den += &format!(" + z{}^2", i + 1);
    }
    let expo = format!("exp(({num})/({den}))");
    vec![
        (poly.clone(), AppShape::of_arity(&poly, arity)),
        (expo.clone(), AppShape::of_arity(&expo, arity)),
    ]
}

/// Sampling interval for one symbol. With `both_signs` the draw comes from
/// `[-hi,-lo] ∪ [lo,hi]`, keeping values away from the origin.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SymRange {
    pub lo: f64,
    pub hi: f64,
    pub both_signs: bool,
}

impl SymRange {
    pub fn positive(lo: f64, hi: f64) -> SymRange {
        SymRange { lo, hi, both_signs: false }
    }

    pub fn symmetric(lo: f64, hi: f64) -> SymRange {
        SymRange { lo, hi, both_signs: true }
    }

    /// Draw one value from the interval (or its two sign lobes).
    pub fn draw(&self, rng: &mut impl Rng) -> f64 {
        let u = rng.gen_range(self.lo..=self.hi);
        if self.both_signs && rng.gen_bool(0.5) {
            -u
        } else {
            u
        }
    }
}

/// Default range: the density `f` stays positive, everything else is drawn
/// from both sign lobes.
fn default_range(sym: &str) -> SymRange {
    if sym == "f" {
        SymRange::positive(0.5, 2.0)
    } else {
        SymRange::symmetric(0.5, 2.0)
    }
}

/// Where and how to draw sample points.
#[derive(Clone, Debug)]
pub struct SampleSpec {
    /// Per-symbol range overrides; anything absent uses the default lobes.
    pub ranges: BTreeMap<String, SymRange>,
    /// Symbols pinned to fixed values (never drawn).
    pub fixed: BTreeMap<String, f64>,
    /// Domain guards: every expression here must evaluate to at least
    /// `guard_floor` for a draw to be accepted (wrap in `abs` for pure
    /// nonvanishing constraints).
    pub guards: Vec<Expr>,
    pub guard_floor: f64,
    /// Symbols that are not canonical variables but must still be redrawn
    /// every sample (e.g. jet coordinates `fx`, `fc`).
    pub per_sample: BTreeSet<String>,
}

impl Default for SampleSpec {
    fn default() -> SampleSpec {
        SampleSpec {
            ranges: BTreeMap::new(),
            fixed: BTreeMap::new(),
            guards: Vec::new(),
            guard_floor: 1e-2,
            per_sample: BTreeSet::new(),
        }
    }
}

impl SampleSpec {
    pub fn with_range(mut self, sym: &str, range: SymRange) -> SampleSpec {
        self.ranges.insert(sym.to_string(), range);
        self
    }

    pub fn with_fixed(mut self, sym: &str, v: f64) -> SampleSpec {
        self.fixed.insert(sym.to_string(), v);
        self
    }

    pub fn with_guard(mut self, g: Expr) -> SampleSpec {
        self.guards.push(g);
        self
    }

    fn range_for(&self, sym: &str) -> SymRange {
        self.ranges.get(sym).copied().unwrap_or_else(|| default_range(sym))
    }
}

/// One assignment of concrete shapes to placeholder names.
#[derive(Clone, Debug)]
pub struct Instantiation {
    pub label: String,
    pub shapes: BTreeMap<String, AppShape>,
}

/// Tolerances and schedules for the numeric tier.
#[derive(Clone, Debug)]
pub struct ZeroCfg {
    /// Relative residual threshold.
    pub tol: f64,
    /// Sample points per instantiation.
    pub n_samples: usize,
    /// Number of distinct parameter vectors across the sample run.
    pub param_draws: usize,
    pub seed: u64,
    /// Explicit placeholder instantiations; empty means the defaults for each
    /// placeholder's arity.
    pub instantiations: Vec<Instantiation>,
    /// Rejection budget per sample point.
    pub max_attempts: usize,
}

impl Default for ZeroCfg {
    fn default() -> ZeroCfg {
        ZeroCfg {
            tol: 1e-9,
            n_samples: 100,
            param_draws: 3,
            seed: 0,
            instantiations: Vec::new(),
            max_attempts: 500,
        }
    }
}

/// A concrete refutation: the point, the residual value, and the scale of the
/// terms that were supposed to cancel.
#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub env: BTreeMap<String, f64>,
    pub value: f64,
    pub scale: f64,
    pub instantiation: String,
}

/// Outcome of a zero test.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    /// Vanished under normalization/expansion alone.
    SymbolicZero,
    /// Survived symbolically but vanished at every sample point.
    NumericZero { max_rel: f64 },
    /// A sample point where the expression does not vanish.
    NonZero { witness: Witness },
}

impl Verdict {
    pub fn is_zero(&self) -> bool {
        !matches!(self, Verdict::NonZero { .. })
    }
}

/// True when normalization or expansion alone reduces `e` to the literal 0.
pub fn symbolic_zero(e: &Expr) -> bool {
    e.normalize().is_zero_const() || e.expand().is_zero_const()
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn placeholder_arities(e: &Expr) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    e.walk(&mut |n| {
        if let Expr::App(a) = n {
            out.entry(a.name.clone()).or_insert(a.args.len());
        }
    });
    out
}

fn build_instantiations(
    e: &Expr,
    cfg: &ZeroCfg,
) -> Result<Vec<Instantiation>, ExprError> {
    let arities = placeholder_arities(e);
    if !cfg.instantiations.is_empty() {
        for inst in &cfg.instantiations {
            for name in arities.keys() {
                if !inst.shapes.contains_key(name) {
                    return Err(ExprError::UnboundFunction(name.clone()));
                }
            }
        }
        return Ok(cfg.instantiations.clone());
    }
    Ok(default_instantiations(e, 2))
}

/// The built-in placeholder instantiations for `e`, up to `count` (at most
/// two shape families are shipped). For a placeholder-free expression this is
/// the single empty instantiation.
pub fn default_instantiations(e: &Expr, count: usize) -> Vec<Instantiation> {
    let arities = placeholder_arities(e);
    if arities.is_empty() {
        return vec![Instantiation { label: String::new(), shapes: BTreeMap::new() }];
    }
    let mut out = Vec::new();
    for k in 0..count.min(2) {
        let mut shapes = BTreeMap::new();
        let mut label = String::new();
        for (name, &arity) in &arities {
            let (desc, shape) = default_shapes(arity).swap_remove(k);
            if !label.is_empty() {
                label += "; ";
            }
            label += &format!("{name} = {desc}");
            shapes.insert(name.clone(), shape);
        }
        out.push(Instantiation { label, shapes });
    }
    out
}

/// Decide whether `e` vanishes identically on the sampling domain.
///
/// Symbolic tier first (`normalize`, then `expand`); the numeric tier samples
/// each placeholder instantiation at `n_samples` points, redrawing parameters
/// every `ceil(n_samples/param_draws)` samples, and returns the first
/// violating point as a witness.
pub fn is_zero(e: &Expr, spec: &SampleSpec, cfg: &ZeroCfg) -> Result<Verdict, ExprError> {
    if symbolic_zero(e) {
        return Ok(Verdict::SymbolicZero);
    }
    let insts = build_instantiations(e, cfg)?;
    let mut max_rel: f64 = 0.0;
    for inst in &insts {
        let mut concrete = e.clone();
        for (name, shape) in &inst.shapes {
            concrete = concrete.instantiate(name, shape);
        }
        let cn = concrete.normalize();
        if cn.is_zero_const() {
            continue;
        }
        let terms: Vec<Expr> = match &cn {
            Expr::Add(v) => v.clone(),
            other => vec![other.clone()],
        };
        let all_syms = cn.free_syms();
        let mut fast: Vec<String> = Vec::new(); // redrawn every sample
        let mut slow: Vec<String> = Vec::new(); // redrawn per parameter draw
        for s in &all_syms {
            if spec.fixed.contains_key(s) {
                continue;
            }
            if super::VARS.contains(&s.as_str()) || spec.per_sample.contains(s) {
                fast.push(s.clone());
            } else {
                slow.push(s.clone());
            }
        }
        let cadence = cfg.n_samples.div_ceil(cfg.param_draws).max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ fnv1a(&inst.label));
        let mut slow_vals: BTreeMap<String, f64> = BTreeMap::new();
        for s in 0..cfg.n_samples {
            if s % cadence == 0 {
                slow_vals = slow
                    .iter()
                    .map(|p| (p.clone(), spec.range_for(p).draw(&mut rng)))
                    .collect();
            }
            let point = sample_point(&terms, spec, &slow_vals, &fast, cfg, &mut rng)?;
            let (env_map, term_vals) = point;
            let value: f64 = term_vals.iter().sum();
            let scale: f64 = term_vals.iter().map(|v| v.abs()).sum();
            let rel = value.abs() / (1.0 + scale);
            if rel > cfg.tol {
                return Ok(Verdict::NonZero {
                    witness: Witness {
                        env: env_map,
                        value,
                        scale,
                        instantiation: inst.label.clone(),
                    },
                });
            }
            max_rel = max_rel.max(rel);
        }
    }
    Ok(Verdict::NumericZero { max_rel })
}

type Point = (BTreeMap<String, f64>, Vec<f64>);

/// Draw fast symbols until guards pass and every term evaluates; domain
/// failures reject the draw, genuine errors (unbound symbols) propagate.
fn sample_point(
    terms: &[Expr],
    spec: &SampleSpec,
    slow_vals: &BTreeMap<String, f64>,
    fast: &[String],
    cfg: &ZeroCfg,
    rng: &mut ChaCha8Rng,
) -> Result<Point, ExprError> {
    'attempt: for _ in 0..cfg.max_attempts {
        let mut env = Env::new();
        let mut env_map = BTreeMap::new();
        for (k, v) in &spec.fixed {
            env.insert(k.clone(), *v);
            env_map.insert(k.clone(), *v);
        }
        for (k, v) in slow_vals {
            env.insert(k.clone(), *v);
            env_map.insert(k.clone(), *v);
        }
        for sym in fast {
            let v = spec.range_for(sym).draw(rng);
            env.insert(sym.clone(), v);
            env_map.insert(sym.clone(), v);
        }
        for g in &spec.guards {
            match g.eval(&env) {
                Ok(v) if v >= spec.guard_floor => {}
                Ok(_) => continue 'attempt,
                Err(ExprError::Domain { .. }) => continue 'attempt,
                Err(other) => return Err(other),
            }
        }
        let mut term_vals = Vec::with_capacity(terms.len());
        for t in terms {
            match t.eval(&env) {
                Ok(v) => term_vals.push(v),
                Err(ExprError::Domain { .. }) => continue 'attempt,
                Err(other) => return Err(other),
            }
        }
        return Ok((env_map, term_vals));
    }
    Err(ExprError::Sampling(format!(
        "no admissible sample point within {} attempts (guards too tight?)",
        cfg.max_attempts
    )))
}
