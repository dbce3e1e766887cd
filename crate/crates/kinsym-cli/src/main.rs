//! `kinsym` — command-line front end for the kinetic-equation symmetry
//! verification engine. Machine output is JSON on stdout; `--pretty` adds a
//! human-readable table on stderr. Exit codes: 0 pass, 1 verification or
//! numerical failure, 2 usage/parse error.

mod config;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{parse_params, RunConfig};
use kinsym_core::catalog::{self, VerificationReport};
use kinsym_core::classify::{self, ClassifyError};
use kinsym_core::equivtrans::{catalog_map, Diffeo2};
use kinsym_core::expr::{self, default_instantiations, is_zero, SampleSpec, SymRange, Verdict};
use kinsym_core::fields::{lie_bracket, VectorField};
use kinsym_core::kinsim::{
    evaluate_solution, flux_through_surface, gaussian_datum, integrate_characteristic, CharState,
    OdeCfg, Surface,
};

#[derive(Debug, Parser)]
#[command(name = "kinsym", version, about = "Symmetry classification checks for the 1D kinetic equation")]
struct Cli {
    /// `key = value` config file; explicit flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Also print a human-readable summary to stderr.
    #[arg(long, global = true)]
    pretty: bool,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Flag-level overrides of the run configuration.
#[derive(Debug, Args)]
struct Overrides {
    /// RNG seed for all sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Relative residual tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Sample points per zero test.
    #[arg(long, global = true)]
    samples: Option<usize>,

    /// Distinct parameter draws per zero test.
    #[arg(long, global = true)]
    draws: Option<usize>,

    /// Placeholder instantiations per zero test (1 or 2).
    #[arg(long, global = true)]
    instantiations: Option<usize>,

    /// Polynomial ansatz degree for dimension estimates.
    #[arg(long, global = true)]
    degree: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test whether one generator solves the classifying equation of a force law.
    Check {
        /// Force law F(t, x, c, f).
        #[arg(long, short = 'F', alias = "F", allow_hyphen_values = true)]
        force: String,
        /// Time component of the generator.
        #[arg(long, allow_hyphen_values = true)]
        tau: String,
        /// Space component of the generator.
        #[arg(long, allow_hyphen_values = true)]
        xi: String,
        /// Pin a named parameter, e.g. -p P=1.3 (repeatable).
        #[arg(long = "param", short = 'p')]
        params: Vec<String>,
        /// Sample this symbol on the positive side only (repeatable).
        #[arg(long)]
        positive: Vec<String>,
    },

    /// Verify classification tables end to end.
    VerifyTable {
        /// Table numbers (default: all five).
        tables: Vec<u8>,
        /// Skip the Lie-bracket closure layer.
        #[arg(long)]
        skip_closure: bool,
        /// Skip the dimension-estimate layer.
        #[arg(long)]
        skip_dim: bool,
        /// Skip the reduction layer.
        #[arg(long)]
        skip_reductions: bool,
    },

    /// Estimate the symmetry-algebra dimension of a force law.
    Dim {
        /// Force law F(t, x, c, f); parameters must be pinned.
        #[arg(long, short = 'F', alias = "F", allow_hyphen_values = true)]
        force: String,
        #[arg(long = "param", short = 'p')]
        params: Vec<String>,
        #[arg(long)]
        positive: Vec<String>,
    },

    /// Apply a point transformation to a force law and/or a phase point.
    Transform {
        /// Named map from the built-in catalog.
        #[arg(long, conflicts_with_all = ["phi", "psi"])]
        map: Option<String>,
        /// Image time for an explicit map (with --psi).
        #[arg(long, requires = "psi")]
        phi: Option<String>,
        /// Image space for an explicit map (with --phi).
        #[arg(long, requires = "phi")]
        psi: Option<String>,
        /// Force law to transform.
        #[arg(long, short = 'F', alias = "F", allow_hyphen_values = true)]
        force: Option<String>,
        /// Phase point t,x,c,f to transform numerically.
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
        #[arg(long = "param", short = 'p')]
        params: Vec<String>,
    },

    /// Integrate characteristics and check the flux functional.
    Simulate {
        /// Force law F(t, x, c); must be free of the density.
        #[arg(long, short = 'F', alias = "F", allow_hyphen_values = true)]
        force: String,
        #[arg(long = "param", short = 'p')]
        params: Vec<String>,
        /// Initial characteristic state t,x,c,w.
        #[arg(long, allow_hyphen_values = true)]
        state: Option<String>,
        /// Integration horizon for --state.
        #[arg(long, allow_hyphen_values = true)]
        t_end: Option<f64>,
        /// Write the trajectory as CSV to this path.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Fixed step size instead of adaptive control.
        #[arg(long)]
        fixed_step: Option<f64>,
        /// Gaussian datum x0,c0,sx,sc for flux checks.
        #[arg(long, allow_hyphen_values = true)]
        datum: Option<String>,
        /// Surface t = theta(x, c) (repeatable).
        #[arg(long, allow_hyphen_values = true)]
        surface: Vec<String>,
        /// Quadrature box xlo:xhi:clo:chi.
        #[arg(long, allow_hyphen_values = true)]
        boxes: Option<String>,
        /// Gauss-Legendre nodes per axis.
        #[arg(long, default_value_t = 48)]
        nodes: usize,
        /// ODE tolerance (absolute and relative).
        #[arg(long)]
        ode_tol: Option<f64>,
    },

    /// Lie bracket of two generators.
    Bracket {
        #[arg(long, allow_hyphen_values = true)]
        tau1: String,
        #[arg(long, allow_hyphen_values = true)]
        xi1: String,
        #[arg(long, allow_hyphen_values = true)]
        tau2: String,
        #[arg(long, allow_hyphen_values = true)]
        xi2: String,
    },
}

enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    fn usage(e: impl std::fmt::Display) -> CliError {
        CliError::Usage(e.to_string())
    }

    fn failure(e: impl std::fmt::Display) -> CliError {
        CliError::Failure(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(passed) => {
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("kinsym: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("kinsym: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(CliError::Usage)?,
        None => RunConfig::default(),
    };
    let o = &cli.overrides;
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.tol {
        cfg.tol = v;
    }
    if let Some(v) = o.samples {
        cfg.samples = v;
    }
    if let Some(v) = o.draws {
        cfg.draws = v;
    }
    if let Some(v) = o.instantiations {
        cfg.instantiations = v;
    }
    if let Some(v) = o.degree {
        cfg.degree = v;
    }
    if !(1..=2).contains(&cfg.instantiations) {
        return Err(CliError::Usage(
            "instantiations must be 1 or 2 (two built-in shape families)".into(),
        ));
    }
    let pretty = cli.pretty || cfg.format == "table";

    match cli.command {
        Command::Check {
            force,
            tau,
            xi,
            params,
            positive,
        } => cmd_check(&cfg, pretty, &force, &tau, &xi, &params, &positive),
        Command::VerifyTable {
            tables,
            skip_closure,
            skip_dim,
            skip_reductions,
        } => cmd_verify_table(&cfg, pretty, &tables, skip_closure, skip_dim, skip_reductions),
        Command::Dim {
            force,
            params,
            positive,
        } => cmd_dim(&cfg, pretty, &force, &params, &positive),
        Command::Transform {
            map,
            phi,
            psi,
            force,
            point,
            params,
        } => cmd_transform(pretty, map, phi, psi, force, point, &params),
        Command::Simulate {
            force,
            params,
            state,
            t_end,
            csv,
            fixed_step,
            datum,
            surface,
            boxes,
            nodes,
            ode_tol,
        } => cmd_simulate(
            pretty, &force, &params, state, t_end, csv, fixed_step, datum, &surface, boxes,
            nodes, ode_tol,
        ),
        Command::Bracket { tau1, xi1, tau2, xi2 } => cmd_bracket(pretty, &tau1, &xi1, &tau2, &xi2),
    }
}

fn emit<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string(value).expect("report serializes"));
}

/// Build the sampling spec for ad-hoc expressions: pins from `--param`,
/// positive-only ranges from `--positive`.
fn build_spec(params: &BTreeMap<String, f64>, positive: &[String]) -> SampleSpec {
    let mut spec = SampleSpec::default();
    for (k, v) in params {
        spec = spec.with_fixed(k, *v);
    }
    for sym in positive {
        spec = spec.with_range(sym, SymRange::positive(0.2, 2.0));
    }
    spec
}

#[derive(Serialize)]
struct CheckReport {
    force: String,
    tau: String,
    xi: String,
    residual: Verdict,
    passed: bool,
}

fn cmd_check(
    cfg: &RunConfig,
    pretty: bool,
    force: &str,
    tau: &str,
    xi: &str,
    params: &[String],
    positive: &[String],
) -> Result<bool, CliError> {
    let force = expr::parse(force).map_err(CliError::usage)?;
    let field = VectorField::parse(tau, xi).map_err(CliError::usage)?;
    let params = parse_params(params).map_err(CliError::Usage)?;
    let residual = classify::residual_merged(&force, &field);
    let spec = build_spec(&params, positive);
    let mut zero = cfg.zero_cfg();
    if cfg.instantiations != 2 {
        zero.instantiations = default_instantiations(&residual, cfg.instantiations);
    }
    let verdict = is_zero(&residual, &spec, &zero).map_err(CliError::failure)?;
    let report = CheckReport {
        force: force.to_string(),
        tau: field.tau.to_string(),
        xi: field.xi.to_string(),
        passed: verdict.is_zero(),
        residual: verdict,
    };
    emit(&report);
    if pretty {
        eprintln!(
            "{}  ({} d/dt + {} d/dx on F = {})",
            if report.passed { "PASS" } else { "FAIL" },
            report.tau,
            report.xi,
            report.force
        );
    }
    Ok(report.passed)
}

fn cmd_verify_table(
    cfg: &RunConfig,
    pretty: bool,
    tables: &[u8],
    skip_closure: bool,
    skip_dim: bool,
    skip_reductions: bool,
) -> Result<bool, CliError> {
    let tables: Vec<u8> = if tables.is_empty() {
        vec![1, 2, 3, 4, 5]
    } else {
        tables.to_vec()
    };
    let mut vcfg = cfg.verify_cfg();
    vcfg.check_closure = !skip_closure;
    vcfg.check_dim = !skip_dim;
    vcfg.check_reductions = !skip_reductions;
    let report = catalog::verify_tables(&tables, &vcfg).map_err(|e| match e {
        catalog::CatalogError::UnknownTable(_) => CliError::usage(e),
        other => CliError::failure(other),
    })?;
    emit(&report);
    if pretty {
        print_verification_table(&report);
    }
    Ok(report.passed)
}

fn print_verification_table(report: &VerificationReport) {
    let mut rows = vec![vec![
        "entry".to_string(),
        "kind".to_string(),
        "generators".to_string(),
        "closure".to_string(),
        "dimension".to_string(),
        "reduction".to_string(),
        "status".to_string(),
    ]];
    for table in &report.tables {
        for e in &table.entries {
            let gens = if e.generators.is_empty() {
                "-".to_string()
            } else {
                format!(
                    "{}/{}",
                    e.generators.iter().filter(|g| g.verdict.is_zero()).count(),
                    e.generators.len()
                )
            };
            let closure = match &e.closure {
                None => "-".to_string(),
                Some(c) if c.closed => "closed".to_string(),
                Some(_) => "OPEN".to_string(),
            };
            let dim = if e.dimension.is_empty() {
                "-".to_string()
            } else {
                e.dimension
                    .iter()
                    .map(|d| format!("{}={}", d.estimated, d.expected))
                    .collect::<Vec<_>>()
                    .join(",")
            };
            let red = match &e.reduction {
                None => "-".to_string(),
                Some(r) if r.verdict.is_zero() => "ok".to_string(),
                Some(_) => "FAIL".to_string(),
            };
            rows.push(vec![
                e.id.clone(),
                format!("{:?}", e.kind).to_lowercase(),
                gens,
                closure,
                dim,
                red,
                if e.passed { "pass".into() } else { "FAIL".into() },
            ]);
        }
    }
    print_table(&rows);
    eprintln!(
        "overall: {}",
        if report.passed { "PASS" } else { "FAIL" }
    );
}

fn print_table(rows: &[Vec<String>]) {
    if rows.is_empty() {
        return;
    }
    let cols = rows[0].len();
    let mut width = vec![0usize; cols];
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            width[i] = width[i].max(cell.len());
        }
    }
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, cell)| format!("{:w$}", cell, w = width[i]))
            .collect();
        eprintln!("{}", line.join("  "));
    }
}

#[derive(Serialize)]
struct DimBasisEntry {
    tau: String,
    xi: String,
}

#[derive(Serialize)]
struct DimOut {
    force: String,
    degree: usize,
    dim: usize,
    basis: Vec<DimBasisEntry>,
    condition_estimate: f64,
    rows: usize,
    columns: usize,
}

fn cmd_dim(
    cfg: &RunConfig,
    pretty: bool,
    force: &str,
    params: &[String],
    positive: &[String],
) -> Result<bool, CliError> {
    let force = expr::parse(force).map_err(CliError::usage)?;
    let params = parse_params(params).map_err(CliError::Usage)?;
    let spec = build_spec(&params, positive);
    let report = classify::estimate_dimension(&force, cfg.degree, &spec, &cfg.dim_cfg()).map_err(
        |e| match e {
            ClassifyError::BadInput(_) => CliError::usage(e),
            other => CliError::failure(other),
        },
    )?;
    let out = DimOut {
        force: report.force.clone(),
        degree: report.degree,
        dim: report.dim,
        basis: report
            .basis
            .iter()
            .map(|f| DimBasisEntry {
                tau: f.tau.to_string(),
                xi: f.xi.to_string(),
            })
            .collect(),
        condition_estimate: report.condition_estimate,
        rows: report.rows,
        columns: report.columns,
    };
    emit(&out);
    if pretty {
        eprintln!("dim = {} (degree-{} ansatz)", out.dim, out.degree);
        for field in &out.basis {
            eprintln!("  tau = {:24}  xi = {}", field.tau, field.xi);
        }
    }
    Ok(true)
}

#[derive(Serialize)]
struct TransformReport {
    map: String,
    phi: String,
    psi: String,
    cbar: String,
    fbar: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    force_source: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    force_image: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    point_image: Option<[f64; 4]>,
}

fn cmd_transform(
    pretty: bool,
    map: Option<String>,
    phi: Option<String>,
    psi: Option<String>,
    force: Option<String>,
    point: Option<String>,
    params: &[String],
) -> Result<bool, CliError> {
    let params = parse_params(params).map_err(CliError::Usage)?;
    let (label, diffeo) = match (map, phi, psi) {
        (Some(name), None, None) => {
            let entry = catalog_map(&name).map_err(CliError::usage)?;
            (name, entry.diffeo().map_err(CliError::usage)?)
        }
        (None, Some(phi), Some(psi)) => (
            "explicit".to_string(),
            Diffeo2::parse(&phi, &psi).map_err(CliError::usage)?,
        ),
        _ => {
            return Err(CliError::Usage(
                "pass either --map NAME or both --phi and --psi".into(),
            ))
        }
    };
    let force = force
        .map(|f| expr::parse(&f))
        .transpose()
        .map_err(CliError::usage)?;
    let point = point
        .map(|p| parse_floats::<4>(&p, "t,x,c,f"))
        .transpose()?;

    let force_source = force.as_ref().map(|f| diffeo.push_force(f).expand());
    let force_image = match (&force, &diffeo.inv) {
        (Some(f), Some(_)) => Some(
            diffeo
                .transform_force_image(f)
                .map_err(CliError::failure)?
                .expand(),
        ),
        _ => None,
    };
    let point_image = point
        .map(|p| diffeo.transform_point(p, &params))
        .transpose()
        .map_err(CliError::failure)?;

    let report = TransformReport {
        map: label,
        phi: diffeo.phi.to_string(),
        psi: diffeo.psi.to_string(),
        cbar: diffeo.cbar().to_string(),
        fbar: diffeo.fbar().to_string(),
        force_source: force_source.map(|e| e.to_string()),
        force_image: force_image.map(|e| e.to_string()),
        point_image,
    };
    emit(&report);
    if pretty {
        eprintln!("map {}: tbar = {}, xbar = {}", report.map, report.phi, report.psi);
        eprintln!("  cbar = {}", report.cbar);
        eprintln!("  fbar = {}", report.fbar);
        if let Some(f) = &report.force_image {
            eprintln!("  Fbar = {f}");
        } else if let Some(f) = &report.force_source {
            eprintln!("  Fbar (at source point) = {f}");
        }
        if let Some(p) = &report.point_image {
            eprintln!("  point -> ({}, {}, {}, {})", p[0], p[1], p[2], p[3]);
        }
    }
    Ok(true)
}

fn parse_floats<const N: usize>(s: &str, what: &str) -> Result<[f64; N], CliError> {
    let parts: Vec<&str> = s.split([',', ':']).collect();
    if parts.len() != N {
        return Err(CliError::Usage(format!(
            "expected {N} comma-separated numbers ({what}), got {s:?}"
        )));
    }
    let mut out = [0.0; N];
    for (i, p) in parts.iter().enumerate() {
        out[i] = p
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad number {p:?} in {what}")))?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct TrajectoryReport {
    steps: usize,
    end: CharState,
    #[serde(skip_serializing_if = "Option::is_none")]
    csv: Option<String>,
}

#[derive(Serialize)]
struct FluxEntry {
    theta: String,
    value: f64,
}

#[derive(Serialize)]
struct SimulateReport {
    force: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    trajectory: Option<TrajectoryReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    fluxes: Vec<FluxEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_rel_spread: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    pretty: bool,
    force: &str,
    params: &[String],
    state: Option<String>,
    t_end: Option<f64>,
    csv: Option<PathBuf>,
    fixed_step: Option<f64>,
    datum: Option<String>,
    surfaces: &[String],
    boxes: Option<String>,
    nodes: usize,
    ode_tol: Option<f64>,
) -> Result<bool, CliError> {
    let force = expr::parse(force).map_err(CliError::usage)?;
    let params = parse_params(params).map_err(CliError::Usage)?;
    let mut ode = OdeCfg {
        fixed_step,
        ..OdeCfg::default()
    };
    if let Some(tol) = ode_tol {
        ode.rtol = tol;
        ode.atol = tol;
    }

    let mut report = SimulateReport {
        force: force.to_string(),
        trajectory: None,
        fluxes: Vec::new(),
        max_rel_spread: None,
    };

    if let Some(state) = state {
        let [t0, x0, c0, w0] = parse_floats::<4>(&state, "t,x,c,w")?;
        let t_end =
            t_end.ok_or_else(|| CliError::Usage("--state needs --t-end".into()))?;
        let traj = integrate_characteristic(
            &force,
            &params,
            CharState::new(t0, x0, c0, w0),
            t_end,
            &ode,
        )
        .map_err(CliError::failure)?;
        let csv_path = match &csv {
            Some(path) => {
                let mut text = String::from("t,x,c,w\n");
                for s in &traj {
                    text += &format!("{},{},{},{}\n", s.t, s.x, s.c, s.w);
                }
                std::fs::write(path, text)
                    .map_err(|e| CliError::Failure(format!("writing {}: {e}", path.display())))?;
                Some(path.display().to_string())
            }
            None => None,
        };
        report.trajectory = Some(TrajectoryReport {
            steps: traj.len() - 1,
            end: *traj.last().expect("trajectory has the initial state"),
            csv: csv_path,
        });
    }

    if !surfaces.is_empty() {
        let datum = datum.ok_or_else(|| CliError::Usage("--surface needs --datum".into()))?;
        let [x0, c0, sx, sc] = parse_floats::<4>(&datum, "x0,c0,sx,sc")?;
        let boxes = boxes.ok_or_else(|| CliError::Usage("--surface needs --boxes".into()))?;
        let [x_lo, x_hi, c_lo, c_hi] = parse_floats::<4>(&boxes, "xlo:xhi:clo:chi")?;
        let f0 = gaussian_datum(x0, c0, sx, sc);
        let sampler = |t: f64, x: f64, c: f64| {
            evaluate_solution(&force, &params, &f0, t, x, c, &ode)
        };
        for theta in surfaces {
            let surf = Surface::parse(theta, (x_lo, x_hi), (c_lo, c_hi))
                .map_err(CliError::usage)?;
            let value = flux_through_surface(&force, &params, &sampler, &surf, nodes)
                .map_err(CliError::failure)?;
            report.fluxes.push(FluxEntry {
                theta: theta.clone(),
                value,
            });
        }
        if report.fluxes.len() > 1 {
            let vals: Vec<f64> = report.fluxes.iter().map(|f| f.value).collect();
            let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
            let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
            let scale = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
            report.max_rel_spread = Some((hi - lo) / scale.max(1e-300));
        }
    }

    if report.trajectory.is_none() && report.fluxes.is_empty() {
        return Err(CliError::Usage(
            "nothing to do: pass --state/--t-end or --datum/--surface/--boxes".into(),
        ));
    }
    emit(&report);
    if pretty {
        if let Some(t) = &report.trajectory {
            eprintln!(
                "trajectory: {} steps, end t={} x={} c={} w={}",
                t.steps, t.end.t, t.end.x, t.end.c, t.end.w
            );
        }
        for f in &report.fluxes {
            eprintln!("flux through t = {:24}  {:.12}", f.theta, f.value);
        }
        if let Some(s) = report.max_rel_spread {
            eprintln!("max relative spread: {s:.3e}");
        }
    }
    Ok(true)
}

#[derive(Serialize)]
struct BracketReport {
    tau: String,
    xi: String,
}

fn cmd_bracket(
    pretty: bool,
    tau1: &str,
    xi1: &str,
    tau2: &str,
    xi2: &str,
) -> Result<bool, CliError> {
    let a = VectorField::parse(tau1, xi1).map_err(CliError::usage)?;
    let b = VectorField::parse(tau2, xi2).map_err(CliError::usage)?;
    let bracket = lie_bracket(&a, &b);
    let report = BracketReport {
        tau: bracket.tau.normalize().to_string(),
        xi: bracket.xi.normalize().to_string(),
    };
    emit(&report);
    if pretty {
        eprintln!("[X1, X2] = ({}) d/dt + ({}) d/dx", report.tau, report.xi);
    }
    Ok(true)
}
