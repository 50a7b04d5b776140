//! Coefficient data `(w, p, q)` for the Sturm–Liouville realisations and the
//! admissibility checks run on them: turning points, simplicity of the weight,
//! the integral conditions on the weight's prefactor at infinity, and the
//! uniform-positivity ratio `q/|w|`.

use std::fmt;
use std::io::Read;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretize::Grid;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("weight has constant sign on the grid")]
    NoSignChange,
    #[error("weight changes sign {count} times, more than the allowed {max}")]
    AmbiguousSign { count: usize, max: usize },
    #[error("power-law fit at μ0 = {mu0} ({side}) failed: {reason}")]
    FitFailure {
        mu0: f64,
        side: Side,
        reason: String,
    },
    #[error("potential q is not identically zero (q({mu}) = {value})")]
    NonzeroPotential { mu: f64, value: f64 },
    #[error("tail integral on the {side} side does not converge (integrand decays like |μ|^{rate:.3})")]
    TailDivergence { side: Side, rate: f64 },
    #[error("invalid coefficient table: {0}")]
    BadTable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Left => write!(f, "left"),
            Side::Right => write!(f, "right"),
        }
    }
}

/// Declared power-law form `w(μ) = ±r(μ)|μ|^{α±}` on `ℝ±`.
#[derive(Clone)]
pub struct PowerLawTag {
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    pub r: ScalarFn,
    pub c_plus: f64,
    pub c_minus: f64,
}

/// Declared local behaviour `±ρ|μ − μ0|^β` on each side of a turning point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplicityTag {
    pub location: f64,
    pub beta_left: f64,
    pub beta_right: f64,
    pub rho: f64,
}

#[derive(Clone, Default)]
pub struct AnalyticDescriptor {
    pub power_law: Option<PowerLawTag>,
    pub turning_points: Vec<SimplicityTag>,
}

/// The triple `(w, p, q)` on the truncated interval `[−M, M]`.
#[derive(Clone)]
pub struct CoefficientSet {
    w: ScalarFn,
    p: ScalarFn,
    q: ScalarFn,
    descriptor: Option<AnalyticDescriptor>,
    half_width: f64,
    symmetric: bool,
    resolution: f64,
    label: String,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("label", &self.label)
            .field("half_width", &self.half_width)
            .field("symmetric", &self.symmetric)
            .finish_non_exhaustive()
    }
}

/// `sgn(μ)|μ|^a` with the value 0 at the origin for every exponent.
pub fn signed_power(mu: f64, a: f64) -> f64 {
    if mu == 0.0 {
        0.0
    } else {
        mu.signum() * mu.abs().powf(a)
    }
}

/// Prefactor profiles for the `power_with_r` preset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RProfile {
    /// `r ≡ c`
    Constant { c: f64 },
    /// `r = c + amplitude·exp(−(μ/width)²)`
    Gaussian { c: f64, amplitude: f64, width: f64 },
    /// `r = c + amplitude / (1 + |μ|^exponent)`
    Algebraic { c: f64, amplitude: f64, exponent: f64 },
}

impl RProfile {
    pub fn limit(&self) -> f64 {
        match *self {
            RProfile::Constant { c } | RProfile::Gaussian { c, .. } | RProfile::Algebraic { c, .. } => c,
        }
    }

    pub fn eval(&self, mu: f64) -> f64 {
        match *self {
            RProfile::Constant { c } => c,
            RProfile::Gaussian { c, amplitude, width } => c + amplitude * (-(mu / width).powi(2)).exp(),
            RProfile::Algebraic {
                c,
                amplitude,
                exponent,
            } => c + amplitude / (1.0 + mu.abs().powf(exponent)),
        }
    }
}

impl CoefficientSet {
    /// Arbitrary closed-form coefficients without a descriptor.
    pub fn custom(
        w: impl Fn(f64) -> f64 + Send + Sync + 'static,
        p: impl Fn(f64) -> f64 + Send + Sync + 'static,
        q: impl Fn(f64) -> f64 + Send + Sync + 'static,
        half_width: f64,
    ) -> Self {
        Self {
            w: Arc::new(w),
            p: Arc::new(p),
            q: Arc::new(q),
            descriptor: None,
            half_width,
            symmetric: false,
            resolution: 0.0,
            label: "custom".into(),
        }
    }

    /// `w = sgn(μ)|μ|^α`, `p ≡ 1`, `q ≡ k`.
    pub fn signum_power(alpha: f64, k: f64, half_width: f64) -> Self {
        let mut c = Self::custom(move |mu| signed_power(mu, alpha), |_| 1.0, move |_| k, half_width);
        c.symmetric = true;
        c.label = "signum_power".into();
        c.descriptor = Some(AnalyticDescriptor {
            power_law: Some(PowerLawTag {
                alpha_plus: alpha,
                alpha_minus: alpha,
                r: Arc::new(|_| 1.0),
                c_plus: 1.0,
                c_minus: 1.0,
            }),
            turning_points: vec![SimplicityTag {
                location: 0.0,
                beta_left: alpha,
                beta_right: alpha,
                rho: 1.0,
            }],
        });
        c
    }

    /// `w = ±r(μ)|μ|^{α±}`, `p ≡ 1`, `q ≡ k`.
    pub fn power_with_r(alpha_plus: f64, alpha_minus: f64, r: RProfile, k: f64, half_width: f64) -> Self {
        let w = move |mu: f64| {
            if mu > 0.0 {
                r.eval(mu) * mu.powf(alpha_plus)
            } else if mu < 0.0 {
                -r.eval(mu) * (-mu).powf(alpha_minus)
            } else {
                0.0
            }
        };
        let mut c = Self::custom(w, |_| 1.0, move |_| k, half_width);
        c.symmetric = alpha_plus == alpha_minus;
        c.label = "power_with_r".into();
        let rho = r.eval(0.0);
        c.descriptor = Some(AnalyticDescriptor {
            power_law: Some(PowerLawTag {
                alpha_plus,
                alpha_minus,
                r: Arc::new(move |mu| r.eval(mu)),
                c_plus: r.limit(),
                c_minus: r.limit(),
            }),
            turning_points: vec![SimplicityTag {
                location: 0.0,
                beta_left: alpha_minus,
                beta_right: alpha_plus,
                rho,
            }],
        });
        c
    }

    /// Stationary Fokker–Planck equation `μ ψ_x = b(μ) ψ_μμ` written with
    /// `w = μ / b(μ)`, `p ≡ 1`, `q ≡ 0`, where `b(μ) = Σ c_j |μ|^{e_j}`.
    pub fn fokker_planck(b_terms: Vec<(f64, f64)>, half_width: f64) -> Self {
        let b = move |mu: f64| -> f64 {
            b_terms
                .iter()
                .map(|&(c, e)| if mu == 0.0 && e > 0.0 { 0.0 } else { c * mu.abs().powf(e) })
                .sum()
        };
        let w = move |mu: f64| if mu == 0.0 { 0.0 } else { mu / b(mu) };
        let mut c = Self::custom(w, |_| 1.0, |_| 0.0, half_width);
        c.symmetric = true;
        c.label = "fokker_planck".into();
        c
    }

    /// Piecewise-linear interpolation of tabulated `(μ, w, p, q)` rows.
    pub fn from_table(rows: Vec<[f64; 4]>) -> Result<Self, ProblemError> {
        if rows.len() < 4 {
            return Err(ProblemError::BadTable(format!("need at least 4 rows, got {}", rows.len())));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ProblemError::BadTable("non-finite entry".into()));
        }
        if rows.windows(2).any(|r| r[1][0] <= r[0][0]) {
            return Err(ProblemError::BadTable("μ column must be strictly increasing".into()));
        }
        let mu: Arc<Vec<f64>> = Arc::new(rows.iter().map(|r| r[0]).collect());
        let resolution = rows.windows(2).map(|r| r[1][0] - r[0][0]).fold(f64::INFINITY, f64::min);
        let half_width = mu[0].abs().min(mu[mu.len() - 1].abs());
        let column = |k: usize| -> ScalarFn {
            let mu = Arc::clone(&mu);
            let vals: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            Arc::new(move |x| interpolate(&mu, &vals, x))
        };
        Ok(Self {
            w: column(1),
            p: column(2),
            q: column(3),
            descriptor: None,
            half_width,
            symmetric: false,
            resolution,
            label: "custom_sampled".into(),
        })
    }

    /// Reads a CSV table with a header row and columns `μ, w, p, q`.
    pub fn from_csv(mut reader: impl Read) -> Result<Self, ProblemError> {
        let mut text = String::new();
        reader
            .read_to_string(&mut text)
            .map_err(|e| ProblemError::BadTable(e.to_string()))?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| ProblemError::BadTable("empty file".into()))?;
        if header.split(',').count() != 4 || header.split(',').any(|h| h.trim().parse::<f64>().is_ok()) {
            return Err(ProblemError::BadTable("expected a header row with 4 column names".into()));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let vals: Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| ProblemError::BadTable(format!("row {}: {e}", i + 1)))?;
            if vals.len() != 4 {
                return Err(ProblemError::BadTable(format!("row {} has {} columns", i + 1, vals.len())));
            }
            rows.push([vals[0], vals[1], vals[2], vals[3]]);
        }
        Self::from_table(rows)
    }

    pub fn w(&self, mu: f64) -> f64 {
        (self.w)(mu)
    }

    pub fn p(&self, mu: f64) -> f64 {
        (self.p)(mu)
    }

    pub fn q(&self, mu: f64) -> f64 {
        (self.q)(mu)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn with_half_width(mut self, half_width: f64) -> Self {
        self.half_width = half_width;
        self
    }

    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn with_symmetry(mut self, symmetric: bool) -> Self {
        self.symmetric = symmetric;
        self
    }

    pub fn descriptor(&self) -> Option<&AnalyticDescriptor> {
        self.descriptor.as_ref()
    }

    pub fn with_descriptor(mut self, descriptor: AnalyticDescriptor) -> Self {
        self.descriptor = Some(descriptor);
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Smallest μ-scale the coefficients resolve (0 for closed forms).
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// The same problem with `w` multiplied by `factor > 0`; the descriptor's
    /// prefactor and limits scale along with it.
    pub fn scaled(&self, factor: f64) -> Self {
        let w = Arc::clone(&self.w);
        let mut out = self.clone();
        out.w = Arc::new(move |mu| factor * w(mu));
        if let Some(d) = out.descriptor.as_mut() {
            if let Some(pl) = d.power_law.as_mut() {
                let r = Arc::clone(&pl.r);
                pl.r = Arc::new(move |mu| factor * r(mu));
                pl.c_plus *= factor;
                pl.c_minus *= factor;
            }
            for t in &mut d.turning_points {
                t.rho *= factor;
            }
        }
        out
    }

    /// Positivity of `p` on the grid and agreement of `w` with the declared
    /// local power laws near each declared turning point.
    pub fn validate(&self, grid: &Grid) -> Result<(), String> {
        for &mu in grid.nodes() {
            let p = self.p(mu);
            if !(p > 0.0) {
                return Err(format!("p({mu}) = {p} is not positive"));
            }
        }
        if let Some(d) = &self.descriptor {
            for t in &d.turning_points {
                let h = 1e-6 * self.half_width;
                let right = self.w(t.location + h).abs();
                let left = self.w(t.location - h).abs();
                let want_r = t.rho * h.powf(t.beta_right);
                let want_l = t.rho * h.powf(t.beta_left);
                if (right / want_r - 1.0).abs() > 1e-3 || (left / want_l - 1.0).abs() > 1e-3 {
                    return Err(format!("w does not match its declared power law at {}", t.location));
                }
            }
        }
        Ok(())
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let j = xs.partition_point(|&v| v <= x) - 1;
    let t = (x - xs[j]) / (xs[j + 1] - xs[j]);
    ys[j] + t * (ys[j + 1] - ys[j])
}

/// Tunables for the admissibility checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdmissibilityOptions {
    pub max_sign_changes: usize,
    /// Allowed drift of the log-log slope between the two smallest windows.
    pub slope_tolerance: f64,
    /// Number of halvings of the initial window in the simplicity fit.
    pub window_halvings: usize,
    /// Upper end of the numerically integrated part of the tail integrals.
    pub kos_horizon: f64,
    /// Integrals at or above this value count as divergent.
    pub kos_cap: f64,
    pub positivity_threshold: f64,
}

impl Default for AdmissibilityOptions {
    fn default() -> Self {
        Self {
            max_sign_changes: 8,
            slope_tolerance: 1e-2,
            window_halvings: 24,
            kos_horizon: 1e4,
            kos_cap: 1e6,
            positivity_threshold: 1e-12,
        }
    }
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Locations where `w` changes sign between adjacent grid nodes, refined by
/// bisection on the sign of `w` down to floating-point resolution.
pub fn detect_turning_points(
    c: &CoefficientSet,
    grid: &Grid,
    opts: &AdmissibilityOptions,
) -> Result<Vec<f64>, ProblemError> {
    let samples: Vec<(f64, i8)> = grid
        .nodes()
        .iter()
        .map(|&mu| (mu, sign(c.w(mu))))
        .filter(|&(_, s)| s != 0)
        .collect();
    let brackets: Vec<(f64, f64)> = samples
        .windows(2)
        .filter(|p| p[0].1 != p[1].1)
        .map(|p| (p[0].0, p[1].0))
        .collect();
    if brackets.is_empty() {
        return Err(ProblemError::NoSignChange);
    }
    if brackets.len() > opts.max_sign_changes {
        return Err(ProblemError::AmbiguousSign {
            count: brackets.len(),
            max: opts.max_sign_changes,
        });
    }
    Ok(brackets.into_iter().map(|(a, b)| bisect_sign(c, a, b)).collect())
}

fn bisect_sign(c: &CoefficientSet, mut a: f64, mut b: f64) -> f64 {
    let sa = sign(c.w(a));
    loop {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            return mid;
        }
        let s = sign(c.w(mid));
        if s == 0 {
            return mid;
        }
        if s == sa {
            a = mid;
        } else {
            b = mid;
        }
    }
}

/// One-sided power-law certificate at a turning point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplicityCertificate {
    pub location: f64,
    pub beta_left: f64,
    pub beta_right: f64,
    pub rho_left: f64,
    pub rho_right: f64,
    /// Slope drift between the two smallest windows, per side.
    pub drift_left: f64,
    pub drift_right: f64,
    pub pass: bool,
}

struct SideFit {
    beta: f64,
    rho: f64,
    drift: f64,
}

/// Fits `log|w|` against `log|μ − μ0|` on geometrically shrinking one-sided
/// windows and certifies `w ≈ ±ρ|μ − μ0|^β` with `β > −1`.
pub fn check_simplicity(
    c: &CoefficientSet,
    mu0: f64,
    opts: &AdmissibilityOptions,
) -> Result<SimplicityCertificate, ProblemError> {
    let m = c.half_width();
    let room = (m - mu0.abs()).max(0.0);
    let window = (0.1 * m).min(0.5 * room);
    let right = fit_side(c, mu0, window, Side::Right, opts)?;
    let left = fit_side(c, mu0, window, Side::Left, opts)?;
    let pass = right.beta > -1.0 && left.beta > -1.0 && right.rho > 0.0 && left.rho > 0.0;
    Ok(SimplicityCertificate {
        location: mu0,
        beta_left: left.beta,
        beta_right: right.beta,
        rho_left: left.rho,
        rho_right: right.rho,
        drift_left: left.drift,
        drift_right: right.drift,
        pass,
    })
}

fn fit_side(
    c: &CoefficientSet,
    mu0: f64,
    window: f64,
    side: Side,
    opts: &AdmissibilityOptions,
) -> Result<SideFit, ProblemError> {
    let fail = |reason: String| ProblemError::FitFailure { mu0, side, reason };
    if !(window > 0.0) {
        return Err(fail("no room for a fitting window".into()));
    }
    let dir = match side {
        Side::Right => 1.0,
        Side::Left => -1.0,
    };
    let min_window = 8.0 * c.resolution();
    let mut fits: Vec<(f64, f64)> = Vec::new();
    let mut delta = window;
    let mut side_sign = 0;
    for _ in 0..=opts.window_halvings {
        if delta < min_window {
            break;
        }
        let mut xs = Vec::with_capacity(9);
        let mut ys = Vec::with_capacity(9);
        for j in 0..=8 {
            let d = delta * 2f64.powf(-(j as f64) / 8.0);
            let w = c.w(mu0 + dir * d);
            let s = sign(w);
            if s == 0 || !w.is_finite() {
                return Err(fail(format!("w vanishes or is not finite at distance {d:e}")));
            }
            if side_sign == 0 {
                side_sign = s;
            } else if s != side_sign {
                return Err(fail(format!("w changes sign inside the window at distance {d:e}")));
            }
            xs.push(d.ln());
            ys.push(w.abs().ln());
        }
        fits.push(least_squares(&xs, &ys));
        delta *= 0.5;
    }
    if fits.len() < 2 {
        return Err(fail("coefficient data too coarse for two fitting windows".into()));
    }
    let (slope, intercept) = fits[fits.len() - 1];
    let drift = (slope - fits[fits.len() - 2].0).abs();
    if !(drift <= opts.slope_tolerance) {
        return Err(fail(format!(
            "log-log slope still drifting by {drift:.3e} on the smallest window (slope {slope:.4})"
        )));
    }
    Ok(SideFit {
        beta: slope,
        rho: intercept.exp(),
        drift,
    })
}

/// Least-squares line `y = a x + b`; returns `(a, b)`.
fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let a = sxy / sxx;
    (a, my - a * mx)
}

/// One side of the tail-integral condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailIntegral {
    pub alpha: f64,
    pub limit: f64,
    /// Adaptive quadrature over `[1, horizon]`.
    pub bulk: f64,
    /// Power-law extrapolation beyond the horizon.
    pub tail: f64,
    /// Fitted decay exponent `s` of the integrand `~ μ^{−s}` near the horizon.
    pub decay_rate: f64,
}

impl TailIntegral {
    pub fn total(&self) -> f64 {
        self.bulk + self.tail
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KosReport {
    pub plus: TailIntegral,
    pub minus: TailIntegral,
    /// True when `α±`, `c±` were estimated from the far-field behaviour of `w`.
    pub estimated: bool,
    pub pass: bool,
}

/// Evaluates `∫₁^∞ μ^{α₊/2}|r(μ) − c₊| dμ` and its mirror on `(−∞, −1]` for
/// `w = ±r(μ)|μ|^{α±}`, with `q ≡ 0` required.
pub fn check_kos_conditions(c: &CoefficientSet, opts: &AdmissibilityOptions) -> Result<KosReport, ProblemError> {
    let m = c.half_width();
    for k in 0..=2000 {
        let mu = -m + 2.0 * m * k as f64 / 2000.0;
        let q = c.q(mu);
        if q != 0.0 {
            return Err(ProblemError::NonzeroPotential { mu, value: q });
        }
    }
    let horizon = opts.kos_horizon.max(2.0);
    let tag = c.descriptor().and_then(|d| d.power_law.clone());
    let estimated = tag.is_none();
    let (alpha_plus, alpha_minus, c_plus, c_minus, r): (f64, f64, f64, f64, ScalarFn) = match tag {
        Some(t) => (t.alpha_plus, t.alpha_minus, t.c_plus, t.c_minus, t.r),
        None => {
            let ap = far_slope(c, horizon, 1.0);
            let am = far_slope(c, horizon, -1.0);
            let w = c.w.clone();
            let r: ScalarFn = Arc::new(move |mu: f64| {
                let a = if mu > 0.0 { ap } else { am };
                w(mu).abs() / mu.abs().powf(a)
            });
            (ap, am, r(horizon), r(-horizon), r)
        }
    };
    let plus = tail_integral(&r, alpha_plus, c_plus, horizon, 1.0, Side::Right)?;
    let minus = tail_integral(&r, alpha_minus, c_minus, horizon, -1.0, Side::Left)?;
    // estimated exponents are only known to the slope tolerance
    let margin = if estimated { opts.slope_tolerance } else { 0.0 };
    let pass = alpha_plus > -1.0 + margin
        && alpha_minus > -1.0 + margin
        && c_plus > 0.0
        && c_minus > 0.0
        && plus.total() < opts.kos_cap
        && minus.total() < opts.kos_cap;
    Ok(KosReport {
        plus,
        minus,
        estimated,
        pass,
    })
}

fn far_slope(c: &CoefficientSet, horizon: f64, dir: f64) -> f64 {
    let xs: Vec<f64> = (0..=8).map(|j| (horizon * 2f64.powf(-(j as f64) / 8.0)).ln()).collect();
    let ys: Vec<f64> = xs.iter().map(|&lx| c.w(dir * lx.exp()).abs().ln()).collect();
    least_squares(&xs, &ys).0
}

fn tail_integral(
    r: &ScalarFn,
    alpha: f64,
    limit: f64,
    horizon: f64,
    dir: f64,
    side: Side,
) -> Result<TailIntegral, ProblemError> {
    let g = |t: f64| t.powf(0.5 * alpha) * (r(dir * t) - limit).abs();
    // integrate over geometric pieces so the adaptive rule sees the scale change
    let mut bulk = 0.0;
    let mut a = 1.0;
    while a < horizon {
        let b = (2.0 * a).min(horizon);
        bulk += adaptive_simpson(&g, a, b, 1e-12 * (b - a).max(1.0), 40);
        a = b;
    }
    let g_end = g(horizon);
    if !(g_end > 1e-300) {
        return Ok(TailIntegral {
            alpha,
            limit,
            bulk,
            tail: 0.0,
            decay_rate: f64::INFINITY,
        });
    }
    let xs: Vec<f64> = (0..=8).map(|j| (horizon * 4f64.powf(-(j as f64) / 8.0)).ln()).collect();
    let ys: Vec<f64> = xs.iter().map(|&lx| g(lx.exp()).max(1e-300).ln()).collect();
    let rate = -least_squares(&xs, &ys).0;
    if !(rate > 1.0) {
        return Err(ProblemError::TailDivergence { side, rate: -rate });
    }
    Ok(TailIntegral {
        alpha,
        limit,
        bulk,
        tail: g_end * horizon / (rate - 1.0),
        decay_rate: rate,
    })
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, depth)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    /// `min q(μ_i)/|w(μ_i)|` over the grid.
    pub infimum: f64,
    pub pass: bool,
}

pub fn check_uniform_positivity(c: &CoefficientSet, grid: &Grid, threshold: f64) -> PositivityReport {
    let infimum = grid
        .nodes()
        .iter()
        .map(|&mu| c.q(mu) / c.w(mu).abs())
        .fold(f64::INFINITY, f64::min);
    PositivityReport {
        infimum,
        pass: infimum > threshold,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplicityOutcome {
    pub location: f64,
    pub certificate: Option<SimplicityCertificate>,
    pub failure: Option<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KosOutcome {
    pub report: Option<KosReport>,
    pub failure: Option<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub turning_points: Vec<f64>,
    pub turning_point_note: Option<String>,
    pub simplicity: Vec<SimplicityOutcome>,
    pub kos: KosOutcome,
    pub uniform_positivity: PositivityReport,
}

impl AdmissibilityReport {
    /// Every turning point simple and either the uniform-positivity or the
    /// tail-integral route certified.
    pub fn pass(&self) -> bool {
        !self.turning_points.is_empty()
            && self.simplicity.iter().all(|s| s.pass)
            && (self.uniform_positivity.pass || self.kos.pass)
    }
}

/// Runs every check and records failures instead of returning them.
pub fn admissibility(c: &CoefficientSet, grid: &Grid, opts: &AdmissibilityOptions) -> AdmissibilityReport {
    let (turning_points, turning_point_note) = match detect_turning_points(c, grid, opts) {
        Ok(t) => (t, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    let simplicity = turning_points
        .iter()
        .map(|&t| match check_simplicity(c, t, opts) {
            Ok(cert) => SimplicityOutcome {
                location: t,
                certificate: Some(cert),
                failure: None,
                pass: cert.pass,
            },
            Err(e) => SimplicityOutcome {
                location: t,
                certificate: None,
                failure: Some(e.to_string()),
                pass: false,
            },
        })
        .collect();
    let kos = if turning_points.len() != 1 || turning_points[0].abs() > 1e-12 * c.half_width().max(1.0) {
        KosOutcome {
            report: None,
            failure: Some("not applicable: requires a single turning point at the origin".into()),
            pass: false,
        }
    } else {
        match check_kos_conditions(c, opts) {
            Ok(r) => KosOutcome {
                pass: r.pass,
                report: Some(r),
                failure: None,
            },
            Err(e) => KosOutcome {
                report: None,
                failure: Some(e.to_string()),
                pass: false,
            },
        }
    };
    AdmissibilityReport {
        turning_points,
        turning_point_note,
        simplicity,
        kos,
        uniform_positivity: check_uniform_positivity(c, grid, opts.positivity_threshold),
    }
}
