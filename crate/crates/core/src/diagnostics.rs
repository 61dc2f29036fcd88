//! Per-sample diagnostics: energies, Sobolev seminorms, low-frequency shell
//! masses, the energy identity residual and the pointwise spectral bound
//! ratios.
//!
//! For general coefficients the energy identity reads
//! `d/dt (‖u‖² + ‖F‖²) + 2ν‖F‖² + 2μ‖∇u‖² = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{PhysParams, State};

/// Frequency splitting radius `g(t) = sqrt(γ / (t + 1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplittingSchedule {
    pub gamma: f64,
}

impl Default for SplittingSchedule {
    fn default() -> Self {
        Self { gamma: 4.0 }
    }
}

impl SplittingSchedule {
    pub fn new(gamma: f64) -> Result<Self> {
        let s = Self { gamma };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidParameter {
                name: "schedule.gamma".into(),
                reason: format!("must be > 0, got {}", self.gamma),
            });
        }
        Ok(())
    }

    pub fn radius(&self, t: f64) -> f64 {
        (self.gamma / (t + 1.0)).sqrt()
    }
}

/// One row of the diagnostic time series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesRecord {
    pub time: f64,
    pub l2_u_sq: f64,
    pub l2_f_sq: f64,
    /// `hm_sq[j] = ‖∇^j u‖² + ‖∇^j F‖²` for `j = 0..=m`.
    pub hm_sq: Vec<f64>,
    /// `2μ‖∇u‖²`
    pub dissipation_u: f64,
    /// `2ν‖F‖²`
    pub damping_f: f64,
    pub shell_mass_u: f64,
    pub shell_mass_f: f64,
    pub ratio_u: f64,
    pub ratio_f: f64,
}

impl TimeSeriesRecord {
    pub fn energy(&self) -> f64 {
        self.l2_u_sq + self.l2_f_sq
    }

    /// `Σ_{j ≤ m} hm_sq[j]`, or `None` when fewer orders were recorded.
    pub fn hm_total(&self, m: usize) -> Option<f64> {
        self.hm_sq.get(..=m).map(|v| v.iter().sum())
    }
}

/// Builds records against a fixed initial state, reusing wavenumber tables.
pub struct Recorder {
    params: PhysParams,
    schedule: SplittingSchedule,
    m_order: usize,
    initial: State,
    k_sq: Vec<f64>,
}

impl Recorder {
    pub fn new(
        params: PhysParams,
        schedule: SplittingSchedule,
        initial: State,
        m_order: usize,
    ) -> Result<Self> {
        params.validate()?;
        schedule.validate()?;
        let k_sq = initial.grid().k_squared();
        Ok(Self {
            params,
            schedule,
            m_order,
            initial,
            k_sq,
        })
    }

    pub fn initial(&self) -> &State {
        &self.initial
    }

    pub fn m_order(&self) -> usize {
        self.m_order
    }

    pub fn record(&self, state: &State) -> Result<TimeSeriesRecord> {
        state.ensure_same_grid(&self.initial)?;
        let grid = *state.grid();
        let volume = grid.volume();
        let g = self.schedule.radius(state.time);
        let g_sq = g * g;
        let m = self.m_order;
        let mut hm_u = vec![0.0; m + 1];
        let mut hm_f = vec![0.0; m + 1];
        let (mut shell_u, mut shell_f) = (0.0, 0.0);
        let (mut ratio_u, mut ratio_f) = (0.0f64, 0.0f64);
        let mut powers = vec![0.0; m + 1];
        for (idx, &k_sq) in self.k_sq.iter().enumerate() {
            let u_sq: f64 = state.u.iter().map(|c| c.coeffs()[idx].norm_sqr()).sum();
            let f_sq: f64 = state.f.iter().map(|c| c.coeffs()[idx].norm_sqr()).sum();
            if u_sq == 0.0 && f_sq == 0.0 {
                continue;
            }
            powers[0] = 1.0;
            for j in 1..=m {
                powers[j] = powers[j - 1] * k_sq;
            }
            for j in 0..=m {
                hm_u[j] += powers[j] * u_sq;
                hm_f[j] += powers[j] * f_sq;
            }
            if k_sq <= g_sq {
                shell_u += u_sq;
                shell_f += f_sq;
            }
            let u0: f64 = self
                .initial
                .u
                .iter()
                .map(|c| c.coeffs()[idx].norm_sqr())
                .sum();
            let f0: f64 = self
                .initial
                .f
                .iter()
                .map(|c| c.coeffs()[idx].norm_sqr())
                .sum();
            let k = k_sq.sqrt();
            if k > 0.0 {
                ratio_u = ratio_u.max(u_sq.sqrt() / (u0.sqrt() + 1.0 / k));
                ratio_f = ratio_f.max(f_sq.sqrt() / (f0.sqrt() + k));
            } else if f0 > 0.0 {
                ratio_f = ratio_f.max((f_sq / f0).sqrt());
            }
        }
        let hm_sq: Vec<f64> = hm_u
            .iter()
            .zip(&hm_f)
            .map(|(a, b)| (a + b) * volume)
            .collect();
        let l2_u_sq = hm_u[0] * volume;
        let l2_f_sq = hm_f[0] * volume;
        let grad_u_sq = hm_u.get(1).copied().unwrap_or_else(|| {
            self.k_sq
                .iter()
                .enumerate()
                .map(|(idx, k)| {
                    k * state
                        .u
                        .iter()
                        .map(|c| c.coeffs()[idx].norm_sqr())
                        .sum::<f64>()
                })
                .sum()
        }) * volume;
        Ok(TimeSeriesRecord {
            time: state.time,
            l2_u_sq,
            l2_f_sq,
            hm_sq,
            dissipation_u: 2.0 * self.params.mu * grad_u_sq,
            damping_f: 2.0 * self.params.nu * l2_f_sq,
            shell_mass_u: shell_u * volume,
            shell_mass_f: shell_f * volume,
            ratio_u,
            ratio_f,
        })
    }
}

/// Diagnostics of `state` against `initial_state` up to order `m_order`.
pub fn record(
    state: &State,
    params: &PhysParams,
    schedule: &SplittingSchedule,
    initial_state: &State,
    m_order: usize,
) -> Result<TimeSeriesRecord> {
    Recorder::new(*params, *schedule, initial_state.clone(), m_order)?.record(state)
}

/// Finite-difference rule for the time derivative in the energy identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// Three-point centered difference, second order.
    #[default]
    Centered2,
    /// Five-point centered difference, fourth order.
    Centered4,
}

impl Stencil {
    fn half_width(self) -> usize {
        match self {
            Stencil::Centered2 => 1,
            Stencil::Centered4 => 2,
        }
    }
}

/// Weights of the derivative at `nodes[centre]` of the Lagrange interpolant
/// through `nodes` (distinct, any spacing).
pub fn derivative_weights(nodes: &[f64], centre: usize) -> Vec<f64> {
    let x = nodes[centre];
    let n = nodes.len();
    let mut w = vec![0.0; n];
    for (j, wj) in w.iter_mut().enumerate() {
        if j == centre {
            *wj = (0..n)
                .filter(|&i| i != j)
                .map(|i| 1.0 / (x - nodes[i]))
                .sum();
        } else {
            let mut num = 1.0;
            let mut den = 1.0;
            for i in (0..n).filter(|&i| i != j) {
                den *= nodes[j] - nodes[i];
                if i != centre {
                    num *= x - nodes[i];
                }
            }
            *wj = num / den;
        }
    }
    w
}

/// Residual of the energy identity at every interior sample,
/// `dE/dt + damping_f + dissipation_u`, as `(time, residual)` pairs.
pub fn energy_identity_residual(
    records: &[TimeSeriesRecord],
    stencil: Stencil,
) -> Result<Vec<(f64, f64)>> {
    let hw = stencil.half_width();
    if records.len() < 2 * hw + 1 {
        return Err(Error::InsufficientData(format!(
            "energy identity residual needs at least {} records, got {}",
            2 * hw + 1,
            records.len()
        )));
    }
    if records.windows(2).any(|w| !(w[0].time < w[1].time)) {
        return Err(Error::InsufficientData(
            "record times must be strictly increasing".into(),
        ));
    }
    let times: Vec<f64> = records.iter().map(|r| r.time).collect();
    let energy: Vec<f64> = records.iter().map(|r| r.energy()).collect();
    let mut out = Vec::with_capacity(records.len() - 2 * hw);
    for c in hw..records.len() - hw {
        let nodes = &times[c - hw..=c + hw];
        let w = derivative_weights(nodes, hw);
        let de: f64 = w
            .iter()
            .zip(&energy[c - hw..=c + hw])
            .map(|(a, b)| a * b)
            .sum();
        let r = &records[c];
        out.push((r.time, de + r.damping_f + r.dissipation_u));
    }
    Ok(out)
}

/// Largest increase of `Σ_{j ≤ m} hm_sq[j]` between consecutive records,
/// relative to its first value; 0 when the sum never grows.
pub fn hm_monotonicity_violation(records: &[TimeSeriesRecord], m: usize) -> Result<f64> {
    let totals = records
        .iter()
        .map(|r| {
            r.hm_total(m).ok_or_else(|| {
                Error::InsufficientData(format!(
                    "record at t = {} has orders up to {}, need {m}",
                    r.time,
                    r.hm_sq.len().saturating_sub(1)
                ))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let Some(&first) = totals.first() else {
        return Ok(0.0);
    };
    let worst = totals
        .windows(2)
        .map(|w| (w[1] - w[0]).max(0.0))
        .fold(0.0, f64::max);
    if worst == 0.0 {
        Ok(0.0)
    } else {
        Ok(worst / first)
    }
}

/// `(max_t ratio_u, max_t ratio_f)`.
pub fn lemma41_constants(records: &[TimeSeriesRecord]) -> (f64, f64) {
    records.iter().fold((0.0f64, 0.0f64), |(a, b), r| {
        (a.max(r.ratio_u), b.max(r.ratio_f))
    })
}
