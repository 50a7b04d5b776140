//! One batch run: config → model → checks → decomposition → solve → artifacts.
//!
//! Nothing is written until every input has been read and validated, so a
//! config error leaves no artifacts behind.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use halfrange_core::discretize::{assemble_operators, build_grid, random_jpositive_instance, DiscreteModel, Grid, GridSpec};
use halfrange_core::duhamel::{solve_nonhomogeneous, solve_nonhomogeneous_halfspace, ForcedSolution, ForcingFunction, TailModel};
use halfrange_core::export::{parse_solution_csv, solution_csv};
use halfrange_core::halfrange::{boundary_residuals, build_g, build_r, BoundaryData, Slab, SolveOptions};
use halfrange_core::kinetic::{pairing_defect, reduce, KineticError, KineticProblem, TModel};
use halfrange_core::krein::{decompose, KreinDecomposition};
use halfrange_core::oracle::{brute_force_bvp_extrapolated_on, brute_force_bvp_on, graded_nodes, relative_l2_difference};
use halfrange_core::problem::{admissibility, detect_turning_points, CoefficientSet};
use nalgebra::DVector;

use crate::cache;
use crate::config::{ConfigError, ForcingConfig, Profile, ProblemConfig, RunConfig};
use crate::report::{
    BoundaryResiduals, CacheSummary, ContractionSummary, Delta, KineticAxioms, OracleSummary, ProblemSummary, RunReport,
    SpectrumSummary,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ADMISSIBILITY: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;
pub const EXIT_ORACLE: i32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Checks, decomposition, solve, solution CSV.
    Solve,
    /// Checks, decomposition and contractions only; admissibility failures are fatal.
    Check,
    /// Solve plus the space-time oracle.
    Compare,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::Check => "check",
            Mode::Compare => "compare",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub config: PathBuf,
    pub mode: Mode,
    pub strict: bool,
    pub cache_dir: Option<PathBuf>,
}

/// Runs one invocation and returns the process exit code.
pub fn run(inv: &Invocation) -> i32 {
    match execute(inv) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            EXIT_CONFIG
        }
    }
}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// A boundary or forcing profile after reading its inputs; eigenmodes wait
/// for the decomposition.
enum Resolved {
    Vector(DVector<f64>),
    Eigenmode { index: usize, scale: f64 },
}

impl Resolved {
    fn finish(self, k: &KreinDecomposition) -> DVector<f64> {
        match self {
            Resolved::Vector(v) => v,
            Resolved::Eigenmode { index, scale } => k.vectors().column(index) * scale,
        }
    }
}

enum ForcingInput {
    None,
    Constant(Resolved, TailModel),
    Sampled(ForcingFunction),
}

struct Built {
    label: String,
    coefficients: Option<(CoefficientSet, Grid)>,
    kinetic: Option<TModel>,
    /// `Err` carries a kinetic-axiom failure.
    model: Result<DiscreteModel, String>,
    dim: usize,
}

struct Artifacts {
    solution_csv: Option<String>,
    oracle_csv: Option<String>,
    cache: Option<(PathBuf, KreinDecomposition)>,
}

fn execute(inv: &Invocation) -> Result<i32, ConfigError> {
    let start = Instant::now();
    let mut timings: BTreeMap<&'static str, f64> = BTreeMap::new();
    let cfg = RunConfig::load(&inv.config)?;
    let tau = cfg.tau();
    if inv.mode == Mode::Compare && tau.is_none() {
        return Err(bad("--compare needs a finite slab"));
    }
    if let Some(t) = cfg.oracle.tau {
        if Some(t) != tau {
            return Err(bad(format!("[oracle] tau = {t} does not match the slab length {tau:?}")));
        }
    }
    let slab = tau.map_or(Slab::HalfSpace, Slab::Finite);

    let built = build_model(&cfg)?;
    let grid = built.coefficients.as_ref().map(|(_, g)| g);
    let plus = resolve_profile(&cfg.boundary.plus, built.dim, grid)?;
    let minus = match &cfg.boundary.minus {
        Some(p) => resolve_profile(p, built.dim, grid)?,
        None => Resolved::Vector(DVector::zeros(built.dim)),
    };
    let hash = built.model.as_ref().map(DiscreteModel::hash).unwrap_or_default();
    let forcing = match &cfg.forcing {
        ForcingConfig::None => ForcingInput::None,
        ForcingConfig::Constant { profile, tail } => {
            ForcingInput::Constant(resolve_profile(profile, built.dim, grid)?, tail.unwrap_or_default())
        }
        ForcingConfig::Csv { path, tail } => {
            let file = fs::File::open(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
            let expected = (!hash.is_empty()).then_some(hash.as_str());
            let f = ForcingFunction::from_csv(file, expected, *tail).map_err(|e| bad(format!("{}: {e}", path.display())))?;
            if f.dim() != built.dim {
                return Err(bad(format!("forcing has {} components, model has {}", f.dim(), built.dim)));
            }
            if tau.is_none() {
                f.check_integrable().map_err(|e| bad(e.to_string()))?;
            }
            ForcingInput::Sampled(f)
        }
    };
    let xs = output_positions(&cfg);
    let cache_dir = inv.cache_dir.clone().or_else(|| cfg.cache.dir.clone());
    timings.insert("setup", start.elapsed().as_secs_f64());

    let mut report = RunReport {
        mode: inv.mode.name(),
        strict: inv.strict,
        status: "ok",
        exit_code: EXIT_OK,
        error: None,
        problem: ProblemSummary {
            preset: cfg.problem.name(),
            label: built.label.clone(),
            dim: built.dim,
            model_hash: hash.clone(),
            tau,
        },
        admissibility: None,
        admissibility_pass: None,
        kinetic_axioms: None,
        spectrum: None,
        gamma: None,
        beta_proj: None,
        restriction_conditions: None,
        contraction: None,
        boundary_residuals: None,
        oracle: None,
        cache: CacheSummary {
            enabled: cache_dir.is_some(),
            ..CacheSummary::default()
        },
        timings: None,
    };
    let mut artifacts = Artifacts {
        solution_csv: None,
        oracle_csv: None,
        cache: None,
    };

    // hard checks on the problem itself
    if let Some((c, g)) = &built.coefficients {
        let t = Instant::now();
        let a = admissibility(c, g, &cfg.tolerances.admissibility);
        let pass = a.pass();
        report.admissibility = Some(a);
        report.admissibility_pass = Some(pass);
        timings.insert("admissibility", t.elapsed().as_secs_f64());
        if !pass {
            if inv.mode == Mode::Check || inv.strict {
                return finish(&cfg, report, artifacts, timings, "admissibility_failed", EXIT_ADMISSIBILITY, None);
            }
            eprintln!("warning: admissibility checks failed; continuing without --strict");
        }
    }
    let m = match built.model {
        Ok(m) => m,
        Err(e) => {
            report.kinetic_axioms = Some(KineticAxioms {
                pass: false,
                failure: Some(e.clone()),
                pairing_defect: None,
            });
            return finish(&cfg, report, artifacts, timings, "kinetic_axioms_failed", EXIT_ADMISSIBILITY, Some(e));
        }
    };
    if let Some(tm) = &built.kinetic {
        report.kinetic_axioms = Some(KineticAxioms {
            pass: true,
            failure: None,
            pairing_defect: Some(pairing_defect(tm, &m, 100, 0)),
        });
    }

    // decomposition, possibly from the cache
    let t = Instant::now();
    let cache_path = cache_dir.as_deref().map(|d| cache::path_for(d, &m));
    let cached = cache_path.as_deref().and_then(|p| cache::load(p, &m));
    report.cache.hit = cached.is_some();
    report.cache.path = cache_path.as_ref().map(|p| p.display().to_string());
    let k = match cached {
        Some(k) => k,
        None => match decompose(&m) {
            Ok(k) => k,
            Err(e) => return solver_failure(&cfg, report, artifacts, timings, e),
        },
    };
    timings.insert("decomposition", t.elapsed().as_secs_f64());
    report.spectrum = Some(SpectrumSummary {
        min_abs: k.min_abs_eigenvalue(),
        max_abs: k.max_abs_eigenvalue(),
        n_plus: k.n_plus(),
        n_minus: k.n_minus(),
    });
    report.gamma = Some(k.gamma());
    report.beta_proj = Some(k.beta_proj());
    let (cp, cm) = k.restriction_conditions();
    report.restriction_conditions = Some([cp, cm]);

    let t = Instant::now();
    let r = match build_r(&k) {
        Ok(r) => r,
        Err(e) => return solver_failure(&cfg, report, artifacts, timings, e),
    };
    if let Some(tau) = tau {
        match build_g(&k, &r, tau) {
            Ok(g) => {
                report.contraction = Some(ContractionSummary {
                    tau,
                    norm_g_plus: g.norm_plus,
                    norm_g_minus: g.norm_minus,
                })
            }
            Err(e) => return solver_failure(&cfg, report, artifacts, timings, e),
        }
    }
    timings.insert("contractions", t.elapsed().as_secs_f64());

    // boundary and forcing data that needed the eigenvectors
    let a = plus.finish(&k);
    let b = minus.finish(&k);
    let bd = BoundaryData::from_profiles(&m, &a, &b, slab).map_err(|e| bad(e.to_string()))?;
    let forcing = match forcing {
        ForcingInput::None => None,
        ForcingInput::Sampled(f) => Some(f),
        ForcingInput::Constant(p, tail) => {
            let f = ForcingFunction::new(vec![0.0], vec![p.finish(&k)], tail).map_err(|e| bad(e.to_string()))?;
            if tau.is_none() {
                f.check_integrable().map_err(|e| bad(e.to_string()))?;
            }
            Some(f)
        }
    };
    if !hash.is_empty() && cache_path.is_some() && !report.cache.hit {
        artifacts.cache = cache_path.clone().map(|p| (p, k.clone()));
    }

    if inv.mode == Mode::Check {
        return finish(&cfg, report, artifacts, timings, "ok", EXIT_OK, None);
    }

    let t = Instant::now();
    let opts = SolveOptions {
        neumann_check: cfg.tolerances.neumann_check,
        agreement_tol: cfg.tolerances.neumann_agreement,
        ..SolveOptions::default()
    };
    // forcing seen by the reduced equation ψ' = −Bψ + g
    let n = m.dim();
    let reduced_forcing: Option<ForcingFunction> = match (&built.kinetic, &forcing) {
        (Some(tm), Some(f)) => {
            let t = tm.t();
            let values = f.values().iter().map(|v| v.component_div(&t)).collect();
            Some(ForcingFunction::new(f.positions().to_vec(), values, f.tail()).map_err(|e| bad(e.to_string()))?)
        }
        (None, Some(f)) => Some(f.clone()),
        _ => None,
    };
    let kinetic_problem = built.kinetic.clone().map(|tm| KineticProblem {
        model: tm,
        reduced: m.clone(),
        decomposition: k.clone(),
    });
    let solved: Result<ForcedSolution<'_>, String> = match &kinetic_problem {
        Some(p) => p.solve(&bd, forcing.as_ref(), &opts).map_err(|e| e.to_string()),
        None => {
            let f = reduced_forcing.clone().unwrap_or_else(|| ForcingFunction::zero(n));
            match slab {
                Slab::Finite(_) => solve_nonhomogeneous(&k, &bd, &f, &opts),
                Slab::HalfSpace => solve_nonhomogeneous_halfspace(&k, bd.phi_plus(), &f),
            }
            .map_err(|e| e.to_string())
        }
    };
    let solution = match solved {
        Ok(s) => s,
        Err(e) => return solver_failure(&cfg, report, artifacts, timings, e),
    };
    let rows: Result<Vec<DVector<f64>>, _> = xs.iter().map(|&x| solution.evaluate(x)).collect();
    let rows = match rows {
        Ok(r) => r,
        Err(e) => return solver_failure(&cfg, report, artifacts, timings, e),
    };
    let text = solution_csv(&m, &xs, &rows);
    timings.insert("solve", t.elapsed().as_secs_f64());

    // residuals from the emitted numbers, not the solver's own
    let (_, parsed_xs, parsed) = parse_solution_csv(&text).map_err(|e| bad(format!("emitted CSV does not parse: {e}")))?;
    let last = parsed_xs.len() - 1;
    let (rp, rm) = boundary_residuals(&m, &parsed[0], tau.map(|_| &parsed[last]), &bd);
    let tol = cfg.tolerances.boundary_residual;
    let residual_pass = rp <= tol && rm <= tol;
    report.boundary_residuals = Some(BoundaryResiduals {
        plus: rp,
        minus: rm,
        tolerance: tol,
        pass: residual_pass,
    });
    artifacts.solution_csv = Some(text);

    let mut oracle_pass = true;
    if inv.mode == Mode::Compare {
        let t = Instant::now();
        let tau = tau.expect("compare mode checked for a finite slab");
        let nodes = oracle_nodes(cfg.oracle.nx, tau, &xs);
        let g = reduced_forcing.unwrap_or_else(|| ForcingFunction::zero(n));
        let f = |x: f64| g.value(x);
        let oracle = if cfg.oracle.extrapolate {
            brute_force_bvp_extrapolated_on(&m, &bd, &f, &nodes)
        } else {
            brute_force_bvp_on(&m, &bd, &f, &nodes)
        };
        let oracle = match oracle {
            Ok(o) => o,
            Err(e) => return solver_failure(&cfg, report, artifacts, timings, e),
        };
        let spectral: Result<Vec<DVector<f64>>, _> = oracle.xs.iter().map(|&x| solution.evaluate(x)).collect();
        let spectral = match spectral {
            Ok(s) => s,
            Err(e) => return solver_failure(&cfg, report, artifacts, timings, e),
        };
        let deltas: Vec<Delta> = xs
            .iter()
            .map(|&x| {
                let j = oracle.xs.partition_point(|&v| v < x);
                let o = &oracle.values[j];
                let d = m.norm(&(&spectral[j] - o));
                let s = m.norm(o);
                Delta {
                    x,
                    delta: if s == 0.0 { d } else { d / s },
                }
            })
            .collect();
        let max_delta = deltas.iter().map(|d| d.delta).fold(0.0, f64::max);
        let tolerance = cfg.tolerances.oracle_delta;
        oracle_pass = max_delta <= tolerance;
        report.oracle = Some(OracleSummary {
            nx: cfg.oracle.nx,
            extrapolated: cfg.oracle.extrapolate,
            unknowns: oracle.diagnostics.unknowns,
            lower_bandwidth: oracle.diagnostics.lower_bandwidth,
            upper_bandwidth: oracle.diagnostics.upper_bandwidth,
            solver_residual: oracle.diagnostics.residual,
            l2_relative_difference: relative_l2_difference(&m, &oracle.xs, &spectral, &oracle.values),
            max_delta,
            tolerance,
            pass: oracle_pass,
            deltas,
        });
        if cfg.output.oracle_csv.is_some() {
            artifacts.oracle_csv = Some(oracle.to_csv(&m));
        }
        timings.insert("oracle", t.elapsed().as_secs_f64());
    }

    if !residual_pass {
        let msg = format!("boundary residuals {rp:e}, {rm:e} exceed {tol:e}");
        return finish(&cfg, report, artifacts, timings, "boundary_residual_exceeded", EXIT_SOLVER, Some(msg));
    }
    if !oracle_pass {
        return finish(&cfg, report, artifacts, timings, "oracle_mismatch", EXIT_ORACLE, None);
    }
    finish(&cfg, report, artifacts, timings, "ok", EXIT_OK, None)
}

fn solver_failure(
    cfg: &RunConfig,
    report: RunReport,
    artifacts: Artifacts,
    timings: BTreeMap<&'static str, f64>,
    e: impl std::fmt::Display,
) -> Result<i32, ConfigError> {
    finish(cfg, report, artifacts, timings, "solver_error", EXIT_SOLVER, Some(e.to_string()))
}

fn finish(
    cfg: &RunConfig,
    mut report: RunReport,
    artifacts: Artifacts,
    timings: BTreeMap<&'static str, f64>,
    status: &'static str,
    code: i32,
    error: Option<String>,
) -> Result<i32, ConfigError> {
    if let Some(e) = &error {
        eprintln!("{status}: {e}");
    }
    report.status = status;
    report.exit_code = code;
    report.error = error;
    if cfg.output.timings {
        report.timings = Some(timings);
    }
    let json = serde_json::to_string_pretty(&report).map_err(|e| bad(e.to_string()))?;
    let out = &cfg.output;
    if let Some(text) = &artifacts.solution_csv {
        write(&out.solution_csv, text)?;
    }
    if let (Some(path), Some(text)) = (&out.oracle_csv, &artifacts.oracle_csv) {
        write(path, text)?;
    }
    write(&out.report_json, &json)?;
    if let Some((path, k)) = &artifacts.cache {
        // a cache that cannot be written only costs time on the next run
        if let Err(e) = cache::store(path, k) {
            eprintln!("warning: cache not written to {}: {e}", path.display());
        }
    }
    Ok(code)
}

fn write(path: &Path, text: &str) -> Result<(), ConfigError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| bad(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| bad(format!("{}: {e}", path.display())))
}

fn build_model(cfg: &RunConfig) -> Result<Built, ConfigError> {
    match &cfg.problem {
        ProblemConfig::RandomJpositive { n, seed, gap } => {
            let m = random_jpositive_instance(*n, *seed, *gap);
            Ok(Built {
                label: format!("random_jpositive(n={n}, seed={seed})"),
                coefficients: None,
                kinetic: None,
                dim: m.dim(),
                model: Ok(m),
            })
        }
        ProblemConfig::Kinetic { csv, t, a } => {
            let parsed = match (csv, t, a) {
                (Some(path), _, _) => {
                    let file = fs::File::open(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
                    TModel::from_csv(file)
                }
                (None, Some(t), Some(a)) => TModel::from_value(t.clone(), a.clone()),
                _ => return Err(bad("kinetic preset needs either csv or both t and a")),
            };
            let tm = match parsed {
                Ok(tm) => tm,
                Err(e @ KineticError::ZeroTEntry(_)) => {
                    return Ok(Built {
                        label: "kinetic".into(),
                        coefficients: None,
                        kinetic: None,
                        model: Err(e.to_string()),
                        dim: 0,
                    })
                }
                Err(e) => return Err(bad(e.to_string())),
            };
            let model = match reduce(&tm) {
                Ok(m) => Ok(m),
                Err(e @ (KineticError::NotPositive { .. } | KineticError::NotSymmetric { .. })) => Err(e.to_string()),
                Err(e) => return Err(bad(e.to_string())),
            };
            Ok(Built {
                label: "kinetic".into(),
                coefficients: None,
                dim: tm.dim(),
                kinetic: Some(tm),
                model,
            })
        }
        _ => {
            let d = cfg.discretization.as_ref().expect("validated: grid presets have a discretization");
            let c = coefficients(&cfg.problem, d.half_width)?;
            // turning points from a provisional uniform grid become cell faces
            let provisional = build_grid(&GridSpec::uniform(d.half_width, d.nodes)).map_err(|e| bad(e.to_string()))?;
            let turning_points = detect_turning_points(&c, &provisional, &cfg.tolerances.admissibility).unwrap_or_default();
            let spec = GridSpec {
                half_width: d.half_width,
                nodes: d.nodes,
                grading: d.grading,
                turning_points,
                symmetric: c.symmetric(),
            };
            let grid = build_grid(&spec).map_err(|e| bad(e.to_string()))?;
            c.validate(&grid).map_err(bad)?;
            let m = assemble_operators(&c, &grid).map_err(|e| bad(e.to_string()))?;
            Ok(Built {
                label: c.label().to_string(),
                dim: m.dim(),
                coefficients: Some((c, grid)),
                kinetic: None,
                model: Ok(m),
            })
        }
    }
}

fn coefficients(p: &ProblemConfig, half_width: f64) -> Result<CoefficientSet, ConfigError> {
    Ok(match p {
        ProblemConfig::SignumPower { alpha, k } => CoefficientSet::signum_power(*alpha, *k, half_width),
        ProblemConfig::PowerWithR {
            alpha_plus,
            alpha_minus,
            r,
            k,
        } => CoefficientSet::power_with_r(*alpha_plus, *alpha_minus, *r, *k, half_width),
        ProblemConfig::FokkerPlanck { b } => {
            CoefficientSet::fokker_planck(b.iter().map(|&[c, e]| (c, e)).collect(), half_width)
        }
        ProblemConfig::CustomSampled { csv } => {
            let file = fs::File::open(csv).map_err(|e| bad(format!("{}: {e}", csv.display())))?;
            let c = CoefficientSet::from_csv(file).map_err(|e| bad(format!("{}: {e}", csv.display())))?;
            if half_width > c.half_width() {
                return Err(bad(format!(
                    "half_width {half_width} exceeds the tabulated range ±{}",
                    c.half_width()
                )));
            }
            c.with_half_width(half_width)
        }
        ProblemConfig::Kinetic { .. } | ProblemConfig::RandomJpositive { .. } => {
            unreachable!("presets without coefficients are handled by build_model")
        }
    })
}

fn resolve_profile(p: &Profile, dim: usize, grid: Option<&Grid>) -> Result<Resolved, ConfigError> {
    let on_grid = |f: &dyn Fn(f64) -> f64| -> Result<Resolved, ConfigError> {
        let g = grid.ok_or_else(|| bad("indicator and gaussian_bump profiles need a μ-grid"))?;
        Ok(Resolved::Vector(DVector::from_iterator(g.len(), g.nodes().iter().map(|&mu| f(mu)))))
    };
    let sized = |v: Vec<f64>, what: &str| {
        if v.len() == dim {
            Ok(Resolved::Vector(DVector::from_vec(v)))
        } else {
            Err(bad(format!("{what} has {} entries, model has {dim}", v.len())))
        }
    };
    match p {
        Profile::Zero => Ok(Resolved::Vector(DVector::zeros(dim))),
        Profile::Indicator { lo, hi, value } => on_grid(&|mu| if *lo < mu && mu < *hi { *value } else { 0.0 }),
        Profile::GaussianBump {
            center,
            width,
            amplitude,
        } => on_grid(&|mu| amplitude * (-((mu - center) / width).powi(2)).exp()),
        Profile::Eigenmode { index, scale } => {
            if *index < dim {
                Ok(Resolved::Eigenmode {
                    index: *index,
                    scale: *scale,
                })
            } else {
                Err(bad(format!("eigenmode index {index} out of range for dimension {dim}")))
            }
        }
        Profile::Values { values } => sized(values.clone(), "profile"),
        Profile::Csv { path } => sized(read_column(path)?, &path.display().to_string()),
    }
}

/// Last column of a CSV, skipping `#` comments and a non-numeric header row.
fn read_column(path: &Path) -> Result<Vec<f64>, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.rsplit(',').next().unwrap_or_default().trim();
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            _ if out.is_empty() && i == first_data_line(&text) => continue,
            _ => return Err(bad(format!("{}: line {} is not a number", path.display(), i + 1))),
        }
    }
    Ok(out)
}

fn first_data_line(text: &str) -> usize {
    text.lines()
        .position(|l| !l.trim().is_empty() && !l.trim().starts_with('#'))
        .unwrap_or(0)
}

/// Graded oracle nodes with every output position among them. A graded node
/// closer to an output position than a quarter of its neighbouring spacing is
/// moved onto it; otherwise the position is inserted.
fn oracle_nodes(nx: usize, tau: f64, xs: &[f64]) -> Vec<f64> {
    let mut nodes = graded_nodes(nx, tau);
    for &x in xs {
        let j = nodes.partition_point(|&v| v < x);
        let near = [j.checked_sub(1), (j < nodes.len()).then_some(j)]
            .into_iter()
            .flatten()
            .min_by(|&a, &b| (nodes[a] - x).abs().total_cmp(&(nodes[b] - x).abs()));
        let Some(i) = near else {
            nodes.push(x);
            continue;
        };
        let lo = if i > 0 { nodes[i] - nodes[i - 1] } else { f64::INFINITY };
        let hi = if i + 1 < nodes.len() { nodes[i + 1] - nodes[i] } else { f64::INFINITY };
        let movable = i != 0 && i + 1 != nodes.len();
        if (nodes[i] - x).abs() < 0.25 * lo.min(hi) && (movable || nodes[i] == x) {
            nodes[i] = x;
        } else {
            nodes.insert(j, x);
        }
    }
    nodes.dedup();
    nodes
}

/// Sample positions, sorted and always containing the slab ends.
fn output_positions(cfg: &RunConfig) -> Vec<f64> {
    let out = &cfg.output;
    let mut xs = match (cfg.tau(), &out.x) {
        (_, Some(x)) => x.clone(),
        (Some(tau), None) => {
            let s = out.samples.unwrap_or(11);
            (0..s).map(|i| tau * i as f64 / (s - 1) as f64).collect()
        }
        (None, None) => match out.samples {
            Some(s) => {
                let x_max = out.x_max.unwrap_or(10.0);
                (0..s).map(|i| x_max * i as f64 / (s - 1) as f64).collect()
            }
            None => vec![0.0, 0.5, 1.0, 2.0, 5.0, 10.0],
        },
    };
    xs.push(0.0);
    if let Some(tau) = cfg.tau() {
        xs.push(tau);
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_nodes_contain_outputs_and_stay_increasing() {
        let xs: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        for nx in [3, 4, 17, 400] {
            let nodes = oracle_nodes(nx, 1.0, &xs);
            assert!(nodes.windows(2).all(|w| w[1] > w[0]));
            assert_eq!((nodes[0], *nodes.last().unwrap()), (0.0, 1.0));
            for x in &xs {
                assert!(nodes.contains(x));
            }
            // midpoints of every interval are new points, so bisection is safe
            assert!(nodes.windows(2).all(|w| {
                let m = 0.5 * (w[0] + w[1]);
                w[0] < m && m < w[1]
            }));
        }
    }

    #[test]
    fn output_positions_include_slab_ends() {
        let text = r#"
[problem]
preset = "random_jpositive"
n = 3
seed = 0

[slab]
tau = 2.0

[boundary]
plus = { kind = "zero" }
minus = { kind = "zero" }

[output]
solution_csv = "s.csv"
report_json = "r.json"
x = [1.5, 0.5, 1.5]
"#;
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(output_positions(&cfg), vec![0.0, 0.5, 1.5, 2.0]);
        let half = RunConfig::parse(
            &text
                .replace("tau = 2.0", "halfspace = true")
                .replace("minus = { kind = \"zero\" }\n", "")
                .replace("x = [1.5, 0.5, 1.5]", "samples = 3\nx_max = 4.0"),
        )
        .unwrap();
        half.validate().unwrap();
        assert_eq!(output_positions(&half), vec![0.0, 2.0, 4.0]);
    }
}
