//! The built-in classification catalog.
//!
//! Force laws with a nontrivial symmetry algebra fall into families, each with
//! a canonical representative; auxiliary representatives reduce to a canonical
//! one through an equivalence change of variables. The catalog stores five
//! tables of entries, layered by symmetry dimension, and [`verify_entry`]
//! machine-checks every claim an entry makes: each listed generator solves the
//! classifying equation, the generators close under the Lie bracket, the
//! polynomial-ansatz dimension estimate matches the claimed dimension, and
//! each reduction lands exactly on its target form.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{estimate_dimension, residual_merged, ClassifyError, DimCfg};
use crate::equivtrans::{catalog_map, reduction_residual, Diffeo2, TransformError};
use crate::expr::{
    default_shapes, is_zero, parse_with_funcs, AppShape, Expr, ExprError, FuncDecls,
    Instantiation, SampleSpec, SymRange, Verdict, ZeroCfg,
};
use crate::fields::{closure_check, ClosureCfg, ClosureReport, FieldError, VectorField};

/// Errors raised while loading or verifying catalog entries.
#[derive(Debug, Error)]
pub enum CatalogError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error("catalog entry `{0}` is malformed: {1}")]
    BadEntry(String, String),
    #[error("unknown catalog entry `{0}`")]
    UnknownEntry(String),
    #[error("no table {0} in the catalog")]
    UnknownTable(u8),
}

/// Whether an entry carries its own algebra or reduces to another entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryKind {
    /// Carries a basis of the symmetry algebra and an expected dimension.
    Canonical,
    /// Carries a change of variables onto a canonical form.
    Aux,
}

/// A placeholder function used by an entry's formulas.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FuncSpec {
    pub name: String,
    #[serde(default = "one")]
    pub arity: usize,
}

fn one() -> usize {
    1
}

/// Reference to a change of variables: a named catalog map with parameter
/// bindings, or an explicit pair of coordinate formulas.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapRef {
    Named {
        name: String,
        #[serde(default)]
        bind: BTreeMap<String, String>,
    },
    Explicit {
        phi: String,
        psi: String,
    },
}

/// Claim that the entry's force law is carried onto `target` by `map`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Reduction {
    pub map: MapRef,
    /// Target force law written in image coordinates; entry parameters and
    /// placeholder functions may appear.
    pub target: String,
    /// Canonical entry this reduction lands in (documentation only).
    #[serde(default)]
    pub target_id: Option<String>,
}

/// One classification table row.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogEntry {
    pub id: String,
    #[serde(skip, default)]
    pub table: u8,
    pub kind: EntryKind,
    #[serde(default)]
    pub note: Option<String>,
    #[serde(default)]
    pub funcs: Vec<FuncSpec>,
    pub force: String,
    #[serde(default)]
    pub params: Vec<String>,
    /// Derived constants, substituted into every formula in list order.
    #[serde(default)]
    pub derived: Vec<[String; 2]>,
    #[serde(default)]
    pub basis: Vec<[String; 2]>,
    #[serde(default)]
    pub dim: Option<usize>,
    /// Concrete force for the dimension layer when `force` has placeholders.
    #[serde(default)]
    pub dim_force: Option<String>,
    /// Parameter pinnings for the closure and dimension layers.
    #[serde(default)]
    pub pins: Vec<BTreeMap<String, f64>>,
    #[serde(default)]
    pub ranges: BTreeMap<String, (f64, f64, bool)>,
    #[serde(default)]
    pub guards: Vec<String>,
    /// Instantiation sets: placeholder name -> shape body in `z1..zk`.
    #[serde(default)]
    pub shapes: Vec<BTreeMap<String, String>>,
    #[serde(default)]
    pub reduction: Option<Reduction>,
}

impl CatalogEntry {
    pub fn decls(&self) -> FuncDecls {
        let mut d = FuncDecls::new::<&str>(&[]);
        for f in &self.funcs {
            d = d.with_arity(&f.name, f.arity);
        }
        d
    }

    /// Parse a formula and substitute the derived constants.
    pub fn parse_expr(&self, src: &str) -> Result<Expr, CatalogError> {
        let decls = self.decls();
        let mut e = parse_with_funcs(src, &decls)?;
        for [name, def] in &self.derived {
            let d = parse_with_funcs(def, &decls)?;
            e = e.subst_sym(name, &d);
        }
        Ok(e)
    }

    /// The force law with derived constants substituted.
    pub fn force_expr(&self) -> Result<Expr, CatalogError> {
        self.parse_expr(&self.force)
    }

    /// The generator basis with derived constants substituted.
    pub fn basis_fields(&self) -> Result<Vec<VectorField>, CatalogError> {
        self.basis
            .iter()
            .map(|[tau, xi]| Ok(VectorField::new(self.parse_expr(tau)?, self.parse_expr(xi)?)))
            .collect()
    }

    /// Sampling spec from the entry's ranges and guards.
    pub fn sample_spec(&self) -> Result<SampleSpec, CatalogError> {
        let mut spec = SampleSpec::default();
        for (name, (lo, hi, both)) in &self.ranges {
            let r = if *both {
                SymRange::symmetric(*lo, *hi)
            } else {
                SymRange::positive(*lo, *hi)
            };
            spec = spec.with_range(name, r);
        }
        for g in &self.guards {
            spec = spec.with_guard(self.parse_expr(g)?);
        }
        Ok(spec)
    }

    /// Instantiation sets parsed into shapes (empty when the entry has none).
    pub fn instantiations(&self) -> Result<Vec<Instantiation>, CatalogError> {
        let mut out = Vec::new();
        for (i, set) in self.shapes.iter().enumerate() {
            let mut shapes = BTreeMap::new();
            let mut label = format!("set {}", i + 1);
            for f in &self.funcs {
                let body = set.get(&f.name).ok_or_else(|| {
                    CatalogError::BadEntry(
                        self.id.clone(),
                        format!("instantiation set {} misses `{}`", i + 1, f.name),
                    )
                })?;
                label += &format!("; {} = {}", f.name, body);
                shapes.insert(f.name.clone(), AppShape::of_arity(body, f.arity));
            }
            out.push(Instantiation { label, shapes });
        }
        Ok(out)
    }

    /// Build the reduction's change of variables.
    pub fn reduction_map(&self) -> Result<Diffeo2, CatalogError> {
        let red = self.reduction.as_ref().ok_or_else(|| {
            CatalogError::BadEntry(self.id.clone(), "no reduction on this entry".into())
        })?;
        match &red.map {
            MapRef::Explicit { phi, psi } => {
                Ok(Diffeo2::new(self.parse_expr(phi)?, self.parse_expr(psi)?))
            }
            MapRef::Named { name, bind } => {
                let entry = catalog_map(name)?;
                let mut d = entry.diffeo()?;
                if !bind.is_empty() {
                    let mut subs: Vec<(&str, Expr)> = Vec::new();
                    for (param, val) in bind {
                        subs.push((param.as_str(), self.parse_expr(val)?));
                    }
                    d = Diffeo2 {
                        phi: d.phi.subst(&subs).normalize(),
                        psi: d.psi.subst(&subs).normalize(),
                        inv: None,
                    };
                }
                Ok(d)
            }
        }
    }
}

/// Configuration for [`verify_entry`].
#[derive(Debug, Clone)]
pub struct VerifyCfg {
    pub zero: ZeroCfg,
    pub closure: ClosureCfg,
    pub dim: DimCfg,
    /// Polynomial degree of the dimension-estimation ansatz.
    pub degree: usize,
    pub check_closure: bool,
    pub check_dim: bool,
    pub check_reductions: bool,
}

impl Default for VerifyCfg {
    fn default() -> VerifyCfg {
        VerifyCfg {
            zero: ZeroCfg::default(),
            closure: ClosureCfg::default(),
            dim: DimCfg::default(),
            degree: 3,
            check_closure: true,
            check_dim: true,
            check_reductions: true,
        }
    }
}

/// Outcome of one generator's classifying-equation check.
#[derive(Debug, Clone, Serialize)]
pub struct GenCheck {
    pub tau: String,
    pub xi: String,
    pub verdict: Verdict,
}

/// Outcome of the dimension layer for one parameter pinning.
#[derive(Debug, Clone, Serialize)]
pub struct DimCheck {
    pub pin: BTreeMap<String, f64>,
    pub expected: usize,
    pub estimated: usize,
}

/// Outcome of the reduction layer.
#[derive(Debug, Clone, Serialize)]
pub struct ReductionCheck {
    pub target: String,
    pub verdict: Verdict,
}

/// Everything checked about one entry.
#[derive(Debug, Clone, Serialize)]
pub struct EntryReport {
    pub id: String,
    pub table: u8,
    pub kind: EntryKind,
    pub generators: Vec<GenCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closure: Option<ClosureReport>,
    pub dimension: Vec<DimCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reduction: Option<ReductionCheck>,
    pub passed: bool,
}

/// Everything checked about one table.
#[derive(Debug, Clone, Serialize)]
pub struct TableReport {
    pub table: u8,
    pub entries: Vec<EntryReport>,
    pub passed: bool,
}

/// Run parameters echoed into the aggregated report so results are
/// reproducible from the report alone.
#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub seed: u64,
    pub tol: f64,
    pub samples: usize,
    pub draws: usize,
    pub degree: usize,
    pub check_closure: bool,
    pub check_dim: bool,
    pub check_reductions: bool,
}

impl RunMeta {
    pub fn of(cfg: &VerifyCfg) -> RunMeta {
        RunMeta {
            seed: cfg.zero.seed,
            tol: cfg.zero.tol,
            samples: cfg.zero.n_samples,
            draws: cfg.zero.param_draws,
            degree: cfg.degree,
            check_closure: cfg.check_closure,
            check_dim: cfg.check_dim,
            check_reductions: cfg.check_reductions,
        }
    }
}

/// Aggregated verification report over several tables.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub meta: RunMeta,
    pub tables: Vec<TableReport>,
    pub passed: bool,
}

/// Verify a set of tables and aggregate the per-table reports.
pub fn verify_tables(tables: &[u8], cfg: &VerifyCfg) -> Result<VerificationReport, CatalogError> {
    let mut out = Vec::new();
    let mut passed = true;
    for &n in tables {
        let rep = verify_table(n, cfg)?;
        passed &= rep.passed;
        out.push(rep);
    }
    Ok(VerificationReport {
        meta: RunMeta::of(cfg),
        tables: out,
        passed,
    })
}

fn load(table: u8, json: &'static str) -> Vec<CatalogEntry> {
    let mut entries: Vec<CatalogEntry> =
        serde_json::from_str(json).unwrap_or_else(|e| panic!("embedded table {table}: {e}"));
    for e in &mut entries {
        e.table = table;
    }
    entries
}

static TABLES: OnceLock<Vec<Vec<CatalogEntry>>> = OnceLock::new();

fn tables() -> &'static Vec<Vec<CatalogEntry>> {
    TABLES.get_or_init(|| {
        vec![
            load(1, include_str!("table1.json")),
            load(2, include_str!("table2.json")),
            load(3, include_str!("table3.json")),
            load(4, include_str!("table4.json")),
            load(5, include_str!("table5.json")),
        ]
    })
}

/// Entries of one table (1-5).
pub fn table(n: u8) -> Result<&'static [CatalogEntry], CatalogError> {
    tables()
        .get((n as usize).wrapping_sub(1))
        .map(|v| v.as_slice())
        .ok_or(CatalogError::UnknownTable(n))
}

/// All entries of all tables.
pub fn entries() -> impl Iterator<Item = &'static CatalogEntry> {
    tables().iter().flatten()
}

/// Look up an entry by id.
pub fn find(id: &str) -> Result<&'static CatalogEntry, CatalogError> {
    entries()
        .find(|e| e.id == id)
        .ok_or_else(|| CatalogError::UnknownEntry(id.to_string()))
}

/// Machine-check every claim `entry` makes.
pub fn verify_entry(entry: &CatalogEntry, cfg: &VerifyCfg) -> Result<EntryReport, CatalogError> {
    let force = entry.force_expr()?;
    let spec = entry.sample_spec()?;
    let mut zero_cfg = cfg.zero.clone();
    let insts = entry.instantiations()?;
    if !insts.is_empty() {
        zero_cfg.instantiations = insts;
    }

    let mut passed = true;

    // Layer 1: each listed generator solves the classifying equation.
    let fields = entry.basis_fields()?;
    let mut generators = Vec::new();
    for (field, [tau, xi]) in fields.iter().zip(&entry.basis) {
        let residual = residual_merged(&force, field);
        let verdict = is_zero(&residual, &spec, &zero_cfg)?;
        passed &= verdict.is_zero();
        generators.push(GenCheck { tau: tau.clone(), xi: xi.clone(), verdict });
    }

    // Layer 2: the generators close under the Lie bracket.
    let closure = if cfg.check_closure && fields.len() >= 2 {
        let pin = entry.pins.first().cloned().unwrap_or_default();
        let report = closure_check(&fields, &pin, &cfg.closure)?;
        passed &= report.closed;
        Some(report)
    } else {
        None
    };

    // Layer 3: the polynomial-ansatz estimate reproduces the claimed dimension.
    let mut dimension = Vec::new();
    if cfg.check_dim {
        if let Some(expected) = entry.dim {
            let dim_force = match &entry.dim_force {
                Some(src) => entry.parse_expr(src)?,
                None => {
                    // Instantiate placeholders with the first shape set (or the
                    // default shape) so the linear solve sees a concrete force.
                    let mut e = force.clone();
                    for f in &entry.funcs {
                        let shape = match entry.shapes.first().and_then(|s| s.get(&f.name)) {
                            Some(body) => AppShape::of_arity(body, f.arity),
                            None => default_shapes(f.arity).swap_remove(0).1,
                        };
                        e = e.instantiate(&f.name, &shape);
                    }
                    e.normalize()
                }
            };
            let pins: Vec<BTreeMap<String, f64>> = if entry.pins.is_empty() {
                vec![BTreeMap::new()]
            } else {
                entry.pins.clone()
            };
            for pin in pins {
                let mut dspec = entry.sample_spec()?;
                for (k, v) in &pin {
                    dspec = dspec.with_fixed(k, *v);
                }
                let report = estimate_dimension(&dim_force, cfg.degree, &dspec, &cfg.dim)?;
                passed &= report.dim == expected;
                dimension.push(DimCheck { pin, expected, estimated: report.dim });
            }
        }
    }

    // Layer 4: the reduction lands exactly on its target form.
    let reduction = if cfg.check_reductions {
        match &entry.reduction {
            Some(red) => {
                let map = entry.reduction_map()?;
                let target = entry.parse_expr(&red.target)?;
                let residual = reduction_residual(&map, &force, &target);
                let verdict = is_zero(&residual, &spec, &zero_cfg)?;
                passed &= verdict.is_zero();
                Some(ReductionCheck { target: red.target.clone(), verdict })
            }
            None => None,
        }
    } else {
        None
    };

    Ok(EntryReport {
        id: entry.id.clone(),
        table: entry.table,
        kind: entry.kind,
        generators,
        closure,
        dimension,
        reduction,
        passed,
    })
}

/// Verify every entry of one table.
pub fn verify_table(n: u8, cfg: &VerifyCfg) -> Result<TableReport, CatalogError> {
    let mut reports = Vec::new();
    let mut passed = true;
    for entry in table(n)? {
        let report = verify_entry(entry, cfg)?;
        passed &= report.passed;
        reports.push(report);
    }
    Ok(TableReport { table: n, entries: reports, passed })
}

/// Corrupt one generator of a canonical entry by adding `coeff * monomial`
/// with `monomial` drawn from `t^2`, `t*x`, `x^2`. Returns the mutated entry
/// and a description of the change; verification of the result must fail.
pub fn mutate_entry(entry: &CatalogEntry, seed: u64) -> (CatalogEntry, String) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = entry.clone();
    let gen = rng.gen_range(0..out.basis.len());
    let comp = rng.gen_range(0..2usize);
    let monomial = ["t^2", "t*x", "x^2"][rng.gen_range(0..3usize)];
    let coeff = (rng.gen_range(0.5..=1.5f64) * 100.0).round() / 100.0;
    let which = if comp == 0 { "tau" } else { "xi" };
    let desc = format!(
        "{}: generator {} {} += {}*{}",
        entry.id,
        gen + 1,
        which,
        coeff,
        monomial
    );
    let slot = &mut out.basis[gen][comp];
    *slot = format!("{} + {}*{}", slot, coeff, monomial);
    (out, desc)
}

#[cfg(test)]
mod tests;
