//! Run configuration, read from a single TOML file.
//!
//! Relative paths inside the file are resolved against the file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use halfrange_core::duhamel::TailModel;
use halfrange_core::problem::{AdmissibilityOptions, RProfile};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub discretization: Option<DiscretizationConfig>,
    pub slab: SlabConfig,
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub forcing: ForcingConfig,
    pub output: OutputConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub cache: CacheConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// `w = sgn(μ)|μ|^α`, `p ≡ 1`, `q ≡ k`.
    SignumPower {
        alpha: f64,
        #[serde(default)]
        k: f64,
    },
    /// `w = ±r(μ)|μ|^{α±}`.
    PowerWithR {
        alpha_plus: f64,
        alpha_minus: f64,
        r: RProfile,
        #[serde(default)]
        k: f64,
    },
    /// `w = μ/b(μ)` with `b = Σ c_j |μ|^{e_j}` given as `[[c, e], …]`.
    FokkerPlanck { b: Vec<[f64; 2]> },
    /// Tabulated `mu,w,p,q` rows.
    CustomSampled { csv: PathBuf },
    /// `T ψ' = −Aψ + f` with diagonal `T`, from a CSV (`t_i, a_i1, …`) or inline.
    Kinetic {
        csv: Option<PathBuf>,
        t: Option<Vec<f64>>,
        a: Option<Vec<Vec<f64>>>,
    },
    /// Synthetic model with `W = I`.
    RandomJpositive {
        n: usize,
        seed: u64,
        #[serde(default = "default_gap")]
        gap: f64,
    },
}

fn default_gap() -> f64 {
    0.1
}

impl ProblemConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemConfig::SignumPower { .. } => "signum_power",
            ProblemConfig::PowerWithR { .. } => "power_with_r",
            ProblemConfig::FokkerPlanck { .. } => "fokker_planck",
            ProblemConfig::CustomSampled { .. } => "custom_sampled",
            ProblemConfig::Kinetic { .. } => "kinetic",
            ProblemConfig::RandomJpositive { .. } => "random_jpositive",
        }
    }

    /// Presets that live on a μ-grid.
    pub fn uses_grid(&self) -> bool {
        !matches!(self, ProblemConfig::Kinetic { .. } | ProblemConfig::RandomJpositive { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationConfig {
    /// Truncation half-width `M`.
    pub half_width: f64,
    pub nodes: usize,
    #[serde(default = "one")]
    pub grading: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlabConfig {
    pub tau: Option<f64>,
    #[serde(default)]
    pub halfspace: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    /// Profile whose `Q₊` part is imposed at `x = 0`.
    pub plus: Profile,
    /// Profile whose `Q₋` part is imposed at `x = τ`; finite slabs only.
    pub minus: Option<Profile>,
}

/// A vector on the model's index set.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Zero,
    /// `value` on nodes with `lo < μ < hi`.
    Indicator {
        lo: f64,
        hi: f64,
        #[serde(default = "one")]
        value: f64,
    },
    /// `amplitude·exp(−((μ − center)/width)²)`.
    GaussianBump {
        center: f64,
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Eigenvector `index` of `B`, eigenvalues in ascending order.
    Eigenmode {
        index: usize,
        #[serde(default = "one")]
        scale: f64,
    },
    Values { values: Vec<f64> },
    /// One value per line; with several columns the last one is used.
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingConfig {
    #[default]
    None,
    /// `f(x) = profile` on `[0, ∞)` unless a decaying tail is declared.
    Constant { profile: Profile, tail: Option<TailModel> },
    /// Samples `x, f_1, …, f_n` with an optional `# model_hash=` header.
    Csv {
        path: PathBuf,
        #[serde(default)]
        tail: TailModel,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub solution_csv: PathBuf,
    pub report_json: PathBuf,
    pub oracle_csv: Option<PathBuf>,
    /// Explicit sample positions.
    pub x: Option<Vec<f64>>,
    /// Number of equispaced samples on `[0, τ]` (or `[0, x_max]` on the half-space).
    pub samples: Option<usize>,
    pub x_max: Option<f64>,
    #[serde(default = "yes")]
    pub timings: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub boundary_residual: f64,
    pub oracle_delta: f64,
    /// Also run the Neumann series and require agreement with the direct solve.
    pub neumann_check: bool,
    pub neumann_agreement: f64,
    pub admissibility: AdmissibilityOptions,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            boundary_residual: 1e-8,
            oracle_delta: 2e-2,
            neumann_check: false,
            neumann_agreement: 1e-8,
            admissibility: AdmissibilityOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub nx: usize,
    /// Richardson-extrapolate from `nx` and `2nx − 1` nodes.
    pub extrapolate: bool,
    /// If given, must equal the slab length.
    pub tau: Option<f64>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            nx: 400,
            extrapolate: false,
            tau: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheConfig {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| bad(e.to_string()))
    }

    /// Reads, parses and validates; relative paths become absolute.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.problem {
            ProblemConfig::CustomSampled { csv } => fix(csv),
            ProblemConfig::Kinetic { csv: Some(csv), .. } => fix(csv),
            _ => {}
        }
        for p in [Some(&mut self.boundary.plus), self.boundary.minus.as_mut()].into_iter().flatten() {
            if let Profile::Csv { path } = p {
                fix(path);
            }
        }
        match &mut self.forcing {
            ForcingConfig::Csv { path, .. } => fix(path),
            ForcingConfig::Constant {
                profile: Profile::Csv { path },
                ..
            } => fix(path),
            _ => {}
        }
        fix(&mut self.output.solution_csv);
        fix(&mut self.output.report_json);
        if let Some(p) = &mut self.output.oracle_csv {
            fix(p);
        }
        if let Some(p) = &mut self.cache.dir {
            fix(p);
        }
    }

    /// Slab length, `None` for the half-space.
    pub fn tau(&self) -> Option<f64> {
        if self.slab.halfspace {
            None
        } else {
            self.slab.tau
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match (self.slab.tau, self.slab.halfspace) {
            (Some(_), true) => return Err(bad("[slab] sets both tau and halfspace")),
            (None, false) => return Err(bad("[slab] needs tau or halfspace = true")),
            (Some(t), false) if !(t > 0.0 && t.is_finite()) => {
                return Err(bad(format!("[slab] tau = {t} must be positive and finite")))
            }
            _ => {}
        }
        match (&self.boundary.minus, self.slab.halfspace) {
            (Some(_), true) => return Err(bad("[boundary] minus is meaningless on the half-space")),
            (None, false) => return Err(bad("[boundary] minus is required on a finite slab")),
            _ => {}
        }
        if self.problem.uses_grid() {
            let d = self
                .discretization
                .as_ref()
                .ok_or_else(|| bad(format!("preset {} needs a [discretization] section", self.problem.name())))?;
            if !(d.half_width > 0.0 && d.half_width.is_finite()) {
                return Err(bad(format!("half_width = {} must be positive", d.half_width)));
            }
            if d.nodes < 2 {
                return Err(bad(format!("nodes = {} is below 2", d.nodes)));
            }
            if !(d.grading > 0.0 && d.grading.is_finite()) {
                return Err(bad(format!("grading = {} must be positive", d.grading)));
            }
        } else if self.discretization.is_some() {
            return Err(bad(format!("preset {} takes no [discretization] section", self.problem.name())));
        } else {
            for p in [Some(&self.boundary.plus), self.boundary.minus.as_ref()].into_iter().flatten() {
                if matches!(p, Profile::Indicator { .. } | Profile::GaussianBump { .. }) {
                    return Err(bad("indicator and gaussian_bump profiles need a μ-grid"));
                }
            }
        }
        match &self.problem {
            ProblemConfig::SignumPower { alpha, k } => finite(&[*alpha, *k])?,
            ProblemConfig::PowerWithR {
                alpha_plus,
                alpha_minus,
                k,
                ..
            } => finite(&[*alpha_plus, *alpha_minus, *k])?,
            ProblemConfig::FokkerPlanck { b } => {
                if b.is_empty() {
                    return Err(bad("fokker_planck needs at least one b term"));
                }
                finite(&b.concat())?;
            }
            ProblemConfig::CustomSampled { csv } => exists(csv)?,
            ProblemConfig::Kinetic { csv, t, a } => match (csv, t, a) {
                (Some(p), None, None) => exists(p)?,
                (None, Some(_), Some(_)) => {}
                _ => return Err(bad("kinetic preset needs either csv or both t and a")),
            },
            ProblemConfig::RandomJpositive { n, gap, .. } => {
                if *n < 2 {
                    return Err(bad("random_jpositive needs n ≥ 2"));
                }
                if !(*gap > 0.0) {
                    return Err(bad("random_jpositive needs gap > 0"));
                }
            }
        }
        for p in [Some(&self.boundary.plus), self.boundary.minus.as_ref()].into_iter().flatten() {
            check_profile(p)?;
        }
        match &self.forcing {
            ForcingConfig::None => {}
            ForcingConfig::Constant { profile, .. } => check_profile(profile)?,
            ForcingConfig::Csv { path, .. } => exists(path)?,
        }
        let o = &self.output;
        if o.x.is_some() && (o.samples.is_some() || o.x_max.is_some()) {
            return Err(bad("[output] x excludes samples and x_max"));
        }
        if let Some(xs) = &o.x {
            if xs.is_empty() {
                return Err(bad("[output] x is empty"));
            }
            for &x in xs {
                let inside = x >= 0.0 && x.is_finite() && self.tau().is_none_or(|t| x <= t);
                if !inside {
                    return Err(bad(format!("[output] x = {x} lies outside the slab")));
                }
            }
        }
        if let Some(s) = o.samples {
            if s < 2 {
                return Err(bad("[output] samples must be at least 2"));
            }
        }
        match (o.x_max, self.slab.halfspace) {
            (Some(_), false) => return Err(bad("[output] x_max applies to the half-space only")),
            (Some(x), true) if !(x > 0.0 && x.is_finite()) => return Err(bad("[output] x_max must be positive")),
            _ => {}
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("boundary_residual", t.boundary_residual),
            ("oracle_delta", t.oracle_delta),
            ("neumann_agreement", t.neumann_agreement),
        ] {
            if !(v > 0.0) {
                return Err(bad(format!("[tolerances] {name} must be positive")));
            }
        }
        if self.oracle.nx < 3 {
            return Err(bad("[oracle] nx must be at least 3"));
        }
        Ok(())
    }
}

fn finite(v: &[f64]) -> Result<(), ConfigError> {
    match v.iter().find(|x| !x.is_finite()) {
        Some(x) => Err(bad(format!("non-finite parameter {x}"))),
        None => Ok(()),
    }
}

fn exists(p: &Path) -> Result<(), ConfigError> {
    if p.is_file() {
        Ok(())
    } else {
        Err(bad(format!("{} does not exist", p.display())))
    }
}

fn check_profile(p: &Profile) -> Result<(), ConfigError> {
    match p {
        Profile::Zero | Profile::Eigenmode { .. } => Ok(()),
        Profile::Indicator { lo, hi, value } => {
            finite(&[*lo, *hi, *value])?;
            if lo < hi {
                Ok(())
            } else {
                Err(bad(format!("indicator needs lo < hi, got {lo} and {hi}")))
            }
        }
        Profile::GaussianBump {
            center,
            width,
            amplitude,
        } => {
            finite(&[*center, *width, *amplitude])?;
            if *width > 0.0 {
                Ok(())
            } else {
                Err(bad("gaussian_bump width must be positive"))
            }
        }
        Profile::Values { values } => finite(values),
        Profile::Csv { path } => exists(path),
    }
}
