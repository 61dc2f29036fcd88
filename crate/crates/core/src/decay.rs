//! Linear decay oracles, radial quadrature, power-law fits and the time
//! window in which a finite box reproduces whole-space algebraic decay.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::diagnostics::SplittingSchedule;
use crate::error::{Error, Result};
use crate::spectral::Grid;
use crate::system::{PhysParams, State};

/// Relative tolerance of every radial integral.
pub const QUADRATURE_RTOL: f64 = 1e-10;

/// Least-squares slope of `log value` against `log(1 + t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub n_samples: usize,
}

/// Radial amplitude `a(r) = |û₀(ξ)|` at `|ξ| = r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadialProfile {
    /// `1` for `r ≤ cutoff`, then `exp(−(r − cutoff)² / (2 width²))`;
    /// `width = 0` gives a sharp ball.
    FlatThenGaussian { cutoff: f64, width: f64 },
    /// `r^exponent` for `r ≤ cutoff`, zero beyond.
    Power { exponent: f64, cutoff: f64 },
}

impl RadialProfile {
    pub fn flat(cutoff: f64) -> Self {
        RadialProfile::FlatThenGaussian { cutoff, width: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, reason: String| {
            Err(Error::InvalidParameter {
                name: format!("profile.{name}"),
                reason,
            })
        };
        match *self {
            RadialProfile::FlatThenGaussian { cutoff, width } => {
                if !(cutoff.is_finite() && cutoff >= 0.0) {
                    return bad("cutoff", format!("must be >= 0, got {cutoff}"));
                }
                if !(width.is_finite() && width >= 0.0) {
                    return bad("width", format!("must be >= 0, got {width}"));
                }
                if cutoff == 0.0 && width == 0.0 {
                    return Err(Error::DegenerateProfile(
                        "cutoff and width are both zero".into(),
                    ));
                }
            }
            RadialProfile::Power { exponent, cutoff } => {
                if !(cutoff.is_finite() && cutoff > 0.0) {
                    return bad("cutoff", format!("must be > 0, got {cutoff}"));
                }
                // a² r² must be integrable at the origin
                if !(exponent.is_finite() && exponent > -1.5) {
                    return bad("exponent", format!("must be > -1.5, got {exponent}"));
                }
            }
        }
        Ok(())
    }

    pub fn amplitude(&self, r: f64) -> f64 {
        match *self {
            RadialProfile::FlatThenGaussian { cutoff, width } => {
                if r <= cutoff {
                    1.0
                } else if width == 0.0 {
                    0.0
                } else {
                    let z = (r - cutoff) / width;
                    (-0.5 * z * z).exp()
                }
            }
            RadialProfile::Power { exponent, cutoff } => {
                if r > cutoff {
                    0.0
                } else if r > 0.0 {
                    r.powf(exponent)
                } else if exponent == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `sup_r a(r)`.
    pub fn sup(&self) -> f64 {
        match *self {
            RadialProfile::FlatThenGaussian { .. } => 1.0,
            RadialProfile::Power { exponent, cutoff } => {
                if exponent >= 0.0 {
                    cutoff.powf(exponent)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Interior breakpoints where `a` is not smooth, and the radius beyond
    /// which `a` vanishes or drops below `e^{-40}`.
    fn support(&self) -> (Vec<f64>, f64) {
        match *self {
            RadialProfile::FlatThenGaussian { cutoff, width } => {
                let breaks = if cutoff > 0.0 && width > 0.0 {
                    vec![cutoff]
                } else {
                    vec![]
                };
                (breaks, cutoff + 9.0 * width)
            }
            RadialProfile::Power { cutoff, .. } => (vec![], cutoff),
        }
    }
}

/// `∫_lo^hi f` to relative tolerance [`QUADRATURE_RTOL`], split at `breaks`.
fn integrate(f: impl Fn(f64) -> f64 + Copy, lo: f64, hi: f64, breaks: &[f64]) -> Result<f64> {
    let mut nodes = vec![lo];
    nodes.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
    nodes.push(hi);
    let pieces: Vec<(f64, f64)> = nodes.windows(2).map(|w| (w[0], w[1])).collect();
    let rough: f64 = pieces
        .iter()
        .map(|&(a, b)| quadrature::integrate(f, a, b, 1e-6).integral.abs())
        .sum();
    if rough == 0.0 {
        return Ok(0.0);
    }
    let target = 0.1 * QUADRATURE_RTOL * rough / pieces.len() as f64;
    let mut total = 0.0;
    let mut error = 0.0;
    for &(a, b) in &pieces {
        let out = quadrature::integrate(f, a, b, target);
        total += out.integral;
        error += out.error_estimate;
    }
    if !(total.is_finite() && error <= QUADRATURE_RTOL * total.abs()) {
        return Err(Error::QuadratureNonConvergence {
            error,
            intervals: pieces.len(),
        });
    }
    Ok(total)
}

/// `4π ∫₀^∞ e^{−2μ r² t} a(r)² r² dr`, the energy of the whole-space heat
/// flow started from a radial profile.
pub fn quadrature_linear_energy(profile: &RadialProfile, mu: f64, t: f64) -> Result<f64> {
    profile.validate()?;
    if !(mu > 0.0 && t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "t".into(),
            reason: format!("need mu > 0 and t >= 0, got mu = {mu}, t = {t}"),
        });
    }
    let (mut breaks, end) = profile.support();
    if t > 0.0 {
        // the heat factor concentrates the mass within a few σ of the origin
        let sigma = 1.0 / (2.0 * mu * t).sqrt();
        breaks.extend([sigma, 4.0 * sigma, 12.0 * sigma]);
        breaks.sort_by(f64::total_cmp);
    }
    let f = |r: f64| {
        let a = profile.amplitude(r);
        (-2.0 * mu * r * r * t).exp() * a * a * r * r
    };
    Ok(4.0 * PI * integrate(f, 0.0, end, &breaks)?)
}

/// Low-frequency integral over the ball `|ξ| ≤ g(t)`, with the Hölder bound
/// it obeys when `a ∈ L^q(ℝ³)`, `1/p + 1/q = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellIntegral {
    /// `4π ∫₀^{g(t)} a(r)² r² dr`
    pub value: f64,
    /// `‖a‖²_{L^q} |B_{g(t)}|^{1 − 2/q}`, infinite when `a ∉ L^q`
    pub bound: f64,
    /// `−(3/2)(2/p − 1)`
    pub bound_exponent: f64,
}

pub fn lemma22_shell_integral(
    profile: &RadialProfile,
    p: f64,
    schedule: &SplittingSchedule,
    t: f64,
) -> Result<ShellIntegral> {
    profile.validate()?;
    schedule.validate()?;
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::InvalidParameter {
            name: "p".into(),
            reason: format!("must lie in [1, 2], got {p}"),
        });
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "t".into(),
            reason: format!("must be >= 0, got {t}"),
        });
    }
    let g = schedule.radius(t);
    let (breaks, end) = profile.support();
    let value = 4.0
        * PI
        * integrate(
            |r| {
                let a = profile.amplitude(r);
                a * a * r * r
            },
            0.0,
            g.min(end),
            &breaks,
        )?;
    let ball = 4.0 * PI / 3.0 * g.powi(3);
    let bound = if p == 1.0 {
        profile.sup().powi(2) * ball
    } else {
        let q = p / (p - 1.0);
        let lq = match *profile {
            RadialProfile::Power { exponent, cutoff } => {
                let e = exponent * q + 3.0;
                if e > 0.0 {
                    4.0 * PI * cutoff.powf(e) / e
                } else {
                    f64::INFINITY
                }
            }
            _ => 4.0 * PI * integrate(|r| profile.amplitude(r).powf(q) * r * r, 0.0, end, &breaks)?,
        };
        lq.powf(2.0 / q) * ball.powf(1.0 - 2.0 / q)
    };
    Ok(ShellIntegral {
        value,
        bound,
        bound_exponent: -1.5 * (2.0 / p - 1.0),
    })
}

/// Exact linear semigroup: `û(k) e^{−μ|k|²t}`, `F̂(k) e^{−νt}`.
pub fn linear_oracle_evolve(initial: &State, params: &PhysParams, t: f64) -> Result<State> {
    params.validate()?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "t".into(),
            reason: format!("must be >= 0, got {t}"),
        });
    }
    let mut out = initial.clone();
    let factors: Vec<f64> = initial
        .grid()
        .k_squared()
        .iter()
        .map(|k| (-params.mu * k * t).exp())
        .collect();
    for c in out.u.iter_mut() {
        for (x, e) in c.coeffs_mut().iter_mut().zip(&factors) {
            *x *= e;
        }
    }
    let damping = (-params.nu * t).exp();
    for c in out.f.iter_mut() {
        c.scale(damping);
    }
    out.time = initial.time + t;
    Ok(out)
}

/// Lattice counterpart of [`quadrature_linear_energy`]:
/// `k_min³ Σ_k a(|k|)² e^{−2μ|k|²t}` over the retained modes.
pub fn lattice_linear_energy(grid: &Grid, profile: &RadialProfile, mu: f64, t: f64) -> f64 {
    let k = grid.axis_wavenumbers();
    let kept = grid.retained_indices();
    let mut total = 0.0;
    for &i0 in &kept {
        for &i1 in &kept {
            for &i2 in &kept {
                let r_sq = k[i0] * k[i0] + k[i1] * k[i1] + k[i2] * k[i2];
                let a = profile.amplitude(r_sq.sqrt());
                total += a * a * (-2.0 * mu * r_sq * t).exp();
            }
        }
    }
    total * grid.k_min().powi(3)
}

/// Least-squares fit of `log value = c + exponent · log(1 + t)` over the
/// samples with `t_lo ≤ t ≤ t_hi`.
pub fn fit_power_law(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let (t_lo, t_hi) = window;
    if !(t_lo < t_hi) {
        return Err(Error::EmptyWindow {
            t_lo,
            t_hi,
            hint: "the window start must precede its end".into(),
        });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(t, v) in series.iter().filter(|(t, _)| *t >= t_lo && *t <= t_hi) {
        if !(v > 0.0) {
            return Err(Error::NonPositiveValue { time: t, value: v });
        }
        xs.push((1.0 + t).ln());
        ys.push(v.ln());
    }
    let n = xs.len();
    if n < 5 {
        return Err(Error::InsufficientData(format!(
            "power-law fit needs at least 5 samples in [{t_lo}, {t_hi}], got {n}"
        )));
    }
    let mean_x = xs.iter().sum::<f64>() / n as f64;
    let mean_y = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all samples share one time".into()));
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(DecayFit {
        exponent: slope,
        stderr: (ssr / (n as f64 - 2.0) / sxx).sqrt(),
        window,
        n_samples: n,
    })
}

/// Settings of [`validity_window`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowSettings {
    /// `t_hi = c_win / (μ k_min²)`
    pub c_win: f64,
    /// Earliest admissible window start.
    pub transient_skip: f64,
}

impl Default for WindowSettings {
    fn default() -> Self {
        Self {
            c_win: 0.25,
            transient_skip: 0.0,
        }
    }
}

impl WindowSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_win.is_finite() && self.c_win > 0.0) {
            return Err(Error::InvalidParameter {
                name: "window.c_win".into(),
                reason: format!("must be > 0, got {}", self.c_win),
            });
        }
        if !(self.transient_skip.is_finite() && self.transient_skip >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "window.transient_skip".into(),
                reason: format!("must be >= 0, got {}", self.transient_skip),
            });
        }
        Ok(())
    }
}

/// Window in which decay on the box follows the whole-space law. It opens
/// once `g(t) ≤ k_max_retained / 4` (and not before the transient skip) and
/// closes at `c_win / (μ k_min²)`, when the slowest lattice mode starts to
/// dominate.
pub fn validity_window(
    grid: &Grid,
    params: &PhysParams,
    schedule: &SplittingSchedule,
    settings: &WindowSettings,
) -> Result<(f64, f64)> {
    params.validate()?;
    schedule.validate()?;
    settings.validate()?;
    let opens = |g: &Grid| {
        let k = g.k_max_retained() / 4.0;
        settings
            .transient_skip
            .max(schedule.gamma / (k * k) - 1.0)
            .max(0.0)
    };
    let t_lo = opens(grid);
    let t_hi = settings.c_win / (params.mu * grid.k_min().powi(2));
    if t_lo >= t_hi {
        // Both ends scale with box_length² at fixed n, so only n helps.
        let needed = (grid.n_points()..=1 << 16)
            .step_by(2)
            .find(|&n| Grid::new(n, grid.box_length()).is_ok_and(|g| opens(&g) < t_hi));
        let hint = match needed {
            Some(n) => format!("need n_points >= {n} at box_length {}", grid.box_length()),
            None => "reduce the transient skip".to_string(),
        };
        return Err(Error::EmptyWindow { t_lo, t_hi, hint });
    }
    Ok((t_lo, t_hi))
}
