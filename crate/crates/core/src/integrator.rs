//! Integrating-factor fourth-order Runge–Kutta time stepping.
//!
//! The stiff linear parts are integrated exactly with the per-mode factors
//! `e^{−μ|k|²h}` for `u` and `e^{−νh}` for `F`; the nonlinear tendency is
//! advanced by classical RK4 in the transformed variables:
//!
//! ```text
//! a = N(v)
//! b = N(E (v + h/2 a))
//! c = N(E v + h/2 b)
//! d = N(E² v + h E c)
//! v⁺ = E² v + h/6 (E² a + 2E (b + c) + d)
//! ```
//!
//! with `E = e^{Lh/2}`. With the nonlinearity off the update is the exact
//! linear semigroup.

use std::ops::Range;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::Grid;
use crate::system::{
    compute_rhs_into, physical_max_magnitudes, PhysParams, RhsWorkspace, State, Tendency,
};

/// Relative slack under which a remaining interval counts as one step.
const LANDING_SLACK: f64 = 1e-9;
/// Relative distance from `dt` under which a substep reuses `dt` itself.
const SNAP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepControl {
    pub dt: f64,
    pub cfl_safety: f64,
    pub max_steps: usize,
    pub nan_check_interval: usize,
    /// Ceiling applied by [`suggest_dt`].
    pub dt_cap: f64,
    pub include_nonlinear: bool,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            dt: 0.01,
            cfl_safety: 0.5,
            max_steps: 10_000_000,
            nan_check_interval: 10,
            dt_cap: 0.1,
            include_nonlinear: true,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, reason: String| {
            Err(Error::InvalidParameter {
                name: format!("control.{name}"),
                reason,
            })
        };
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt", format!("must be > 0, got {}", self.dt));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad(
                "cfl_safety",
                format!("must be in (0, 1], got {}", self.cfl_safety),
            );
        }
        if self.max_steps == 0 {
            return bad("max_steps", "must be positive".into());
        }
        if self.nan_check_interval == 0 {
            return bad("nan_check_interval", "must be positive".into());
        }
        if !(self.dt_cap.is_finite() && self.dt_cap > 0.0) {
            return bad("dt_cap", format!("must be > 0, got {}", self.dt_cap));
        }
        Ok(())
    }
}

/// Reusable stepping buffers for one grid and parameter set.
pub struct Stepper {
    grid: Grid,
    params: PhysParams,
    ws: RhsWorkspace,
    stages: [Tendency; 4],
    scratch: State,
    k_sq: Vec<f64>,
    // flat index ranges of the retained modes
    runs: Vec<Range<usize>>,
    factors: Option<Factors>,
}

/// Per-mode propagators `E = e^{Lh/2}` and `E² = e^{Lh}` for one step size.
struct Factors {
    h: f64,
    u_half: Vec<f64>,
    u_full: Vec<f64>,
    f_half: Vec<f64>,
    f_full: Vec<f64>,
}

impl Factors {
    fn for_component(&self, comp: usize) -> (&[f64], &[f64]) {
        if comp < 3 {
            (&self.u_half, &self.u_full)
        } else {
            (&self.f_half, &self.f_full)
        }
    }
}

fn retained_runs(grid: &Grid) -> Vec<Range<usize>> {
    let n = grid.n_points();
    let c = grid.dealias_cutoff();
    let kept = grid.retained_indices();
    let mut runs = Vec::with_capacity(2 * kept.len() * kept.len());
    for &i0 in &kept {
        for &i1 in &kept {
            let base = (i0 * n + i1) * n;
            runs.push(base..base + c + 1);
            runs.push(base + n - c..base + n);
        }
    }
    runs
}

fn tendency(t: &Tendency, comp: usize) -> &[C64] {
    if comp < 3 {
        t.du[comp].coeffs()
    } else {
        t.df[comp - 3].coeffs()
    }
}

/// Writes one intermediate stage: for every component and retained mode,
/// `out = rule(v, E, E², t)` with `t` the tendency of `src` at that mode.
fn write_stage(
    out: &mut State,
    v: &State,
    src: &Tendency,
    fac: &Factors,
    runs: &[Range<usize>],
    rule: impl Fn(C64, f64, f64, C64) -> C64,
) {
    for (comp, (o, field)) in out.fields_mut().zip(v.fields()).enumerate() {
        let (e, e2) = fac.for_component(comp);
        let (o, v, t) = (o.coeffs_mut(), field.coeffs(), tendency(src, comp));
        for r in runs {
            for i in r.clone() {
                o[i] = rule(v[i], e[i], e2[i], t[i]);
            }
        }
    }
}

impl Stepper {
    pub fn new(grid: Grid, params: PhysParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            grid,
            params,
            ws: RhsWorkspace::new(grid),
            stages: std::array::from_fn(|_| Tendency::zeros(grid)),
            scratch: State::zeros(grid),
            k_sq: grid.k_squared(),
            runs: retained_runs(&grid),
            factors: None,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &PhysParams {
        &self.params
    }

    fn prepare_factors(&mut self, h: f64) {
        if self.factors.as_ref().map_or(true, |f| f.h != h) {
            let (mu, nu) = (self.params.mu, self.params.nu);
            let len = self.k_sq.len();
            self.factors = Some(Factors {
                h,
                u_half: self
                    .k_sq
                    .iter()
                    .map(|k| (-mu * k * 0.5 * h).exp())
                    .collect(),
                u_full: self.k_sq.iter().map(|k| (-mu * k * h).exp()).collect(),
                f_half: vec![(-nu * 0.5 * h).exp(); len],
                f_full: vec![(-nu * h).exp(); len],
            });
        }
    }

    /// Advances `state` in place by `h`.
    pub fn advance(&mut self, state: &mut State, h: f64, include_nonlinear: bool) -> Result<()> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt".into(),
                reason: format!("must be > 0, got {h}"),
            });
        }
        if state.fields().any(|c| *c.grid() != self.grid) {
            return Err(Error::GridMismatch);
        }
        self.prepare_factors(h);
        let t0 = state.time;
        let params = self.params;
        let Self {
            ws,
            stages,
            scratch,
            factors,
            runs,
            ..
        } = self;
        let fac = factors.as_ref().expect("factors prepared");

        if !include_nonlinear {
            for (comp, field) in state.fields_mut().enumerate() {
                let (_, e2) = fac.for_component(comp);
                for (x, e) in field.coeffs_mut().iter_mut().zip(e2) {
                    *x *= e;
                }
            }
            state.time = t0 + h;
            return Ok(());
        }

        let [a, b, c, d] = stages;
        compute_rhs_into(state, &params, true, ws, a)?;

        write_stage(scratch, state, a, fac, runs, |v, e, _, t| {
            e * (v + 0.5 * h * t)
        });
        scratch.time = t0 + 0.5 * h;
        compute_rhs_into(scratch, &params, true, ws, b)?;

        write_stage(scratch, state, b, fac, runs, |v, e, _, t| {
            e * v + 0.5 * h * t
        });
        compute_rhs_into(scratch, &params, true, ws, c)?;

        write_stage(scratch, state, c, fac, runs, |v, e, e2, t| {
            e2 * v + h * e * t
        });
        scratch.time = t0 + h;
        compute_rhs_into(scratch, &params, true, ws, d)?;

        // Tendencies vanish outside the retained band, where this reduces
        // to the exact linear factor.
        let h6 = h / 6.0;
        for (comp, field) in state.fields_mut().enumerate() {
            let (e, e2) = fac.for_component(comp);
            let v = field.coeffs_mut();
            let (ta, tb, tc, td) = (
                tendency(a, comp),
                tendency(b, comp),
                tendency(c, comp),
                tendency(d, comp),
            );
            for i in 0..v.len() {
                v[i] = e2[i] * v[i] + h6 * (e2[i] * ta[i] + 2.0 * e[i] * (tb[i] + tc[i]) + td[i]);
            }
        }
        state.time = t0 + h;
        Ok(())
    }
}

/// One step of size `dt`.
pub fn step(state: &State, params: &PhysParams, dt: f64, include_nonlinear: bool) -> Result<State> {
    let mut stepper = Stepper::new(*state.grid(), *params)?;
    let mut next = state.clone();
    stepper.advance(&mut next, dt, include_nonlinear)?;
    ensure_finite_state(&next, 1)?;
    Ok(next)
}

fn ensure_finite_state(state: &State, step: usize) -> Result<()> {
    const NAMES: [&str; 12] = [
        "u1", "u2", "u3", "F11", "F12", "F13", "F21", "F22", "F23", "F31", "F32", "F33",
    ];
    for (field, name) in state.fields().zip(NAMES) {
        if field
            .coeffs()
            .iter()
            .any(|c| !(c.re.is_finite() && c.im.is_finite()))
        {
            return Err(Error::NonFinite {
                field: name.into(),
                step,
                time: state.time,
            });
        }
    }
    Ok(())
}

/// Advisory step size: `min(cfl_safety Δx / (max|u| + max|F| + tiny), dt_cap, control.dt)`
/// with the maxima taken pointwise on the lattice.
pub fn suggest_dt(state: &State, control: &StepControl) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let (u_max, f_max) = physical_max_magnitudes(state)?;
    let advective = control.cfl_safety * state.grid().spacing() / (u_max + f_max + TINY);
    Ok(advective.min(control.dt_cap).min(control.dt))
}

/// Steps `state` to `t_end` with fixed `control.dt`, shortening the substep
/// before each sample time and `t_end` so they are hit exactly, and calls
/// `sink` at every sample time in `[state.time, t_end]`.
pub fn evolve<S>(
    state: State,
    params: &PhysParams,
    control: &StepControl,
    t_end: f64,
    sample_times: &[f64],
    sink: S,
) -> Result<State>
where
    S: FnMut(&State) -> Result<()>,
{
    let mut stepper = Stepper::new(*state.grid(), *params)?;
    evolve_with(&mut stepper, state, control, t_end, sample_times, sink)
}

/// [`evolve`] reusing an existing [`Stepper`].
pub fn evolve_with<S>(
    stepper: &mut Stepper,
    mut state: State,
    control: &StepControl,
    t_end: f64,
    sample_times: &[f64],
    mut sink: S,
) -> Result<State>
where
    S: FnMut(&State) -> Result<()>,
{
    control.validate()?;
    if !(t_end.is_finite() && t_end >= state.time) {
        return Err(Error::InvalidParameter {
            name: "t_end".into(),
            reason: format!("must be >= current time {}, got {t_end}", state.time),
        });
    }
    if sample_times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter {
            name: "sample_times".into(),
            reason: "must be strictly increasing".into(),
        });
    }
    let dt = control.dt;
    let mut targets: Vec<(f64, bool)> = sample_times
        .iter()
        .filter(|&&t| t >= state.time && t <= t_end)
        .map(|&t| (t, true))
        .collect();
    if targets.last().map_or(true, |&(t, _)| t < t_end) {
        targets.push((t_end, false));
    }
    let mut steps = 0usize;
    for (target, is_sample) in targets {
        while state.time < target {
            let remaining = target - state.time;
            let landing = remaining <= dt * (1.0 + LANDING_SLACK);
            let h = if !landing || (remaining - dt).abs() <= SNAP_TOLERANCE * dt {
                dt
            } else {
                remaining
            };
            steps += 1;
            if steps > control.max_steps {
                return Err(Error::MaxStepsExceeded {
                    max_steps: control.max_steps,
                    t_end,
                });
            }
            stepper
                .advance(&mut state, h, control.include_nonlinear)
                .map_err(|e| with_step(e, steps))?;
            if landing {
                state.time = target;
            }
            if steps % control.nan_check_interval == 0 || landing {
                ensure_finite_state(&state, steps)?;
            }
        }
        if is_sample {
            sink(&state)?;
        }
    }
    Ok(state)
}

fn with_step(err: Error, step: usize) -> Error {
    match err {
        Error::NonFinite { field, time, .. } => Error::NonFinite { field, step, time },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{max_divergence, ProfileShape, SpectrumProfile};
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::new(16, 2.0 * PI).unwrap()
    }

    fn random_state(amp: f64) -> State {
        let profile = |seed| SpectrumProfile {
            shape: ProfileShape::FlatLowKGaussianCutoff,
            cutoff_k: 2.0,
            target_l2_norm: amp,
            seed,
        };
        State::from_profiles(grid(), &profile(1), &profile(2)).unwrap()
    }

    fn rel_diff(a: &State, b: &State) -> f64 {
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for (x, y) in a.fields().zip(b.fields()) {
            for (p, q) in x.coeffs().iter().zip(y.coeffs()) {
                num = num.max((p - q).norm());
                den = den.max(q.norm());
            }
        }
        num / den
    }

    #[test]
    fn linear_step_applies_exact_viscous_factor() {
        let mut s = State::zeros(grid());
        s.u[1].set_hermitian([3, 0, 0], Complex64::new(0.7, -0.2));
        let params = PhysParams::new(0.3, 1.0).unwrap();
        let next = step(&s, &params, 0.05, false).unwrap();
        let expect = Complex64::new(0.7, -0.2) * (-0.3 * 9.0 * 0.05f64).exp();
        assert!((next.u[1].get([3, 0, 0]) - expect).norm() <= 1e-16);
        assert_eq!(next.time, 0.05);
    }

    #[test]
    fn linear_step_damps_deformation_uniformly() {
        let s = random_state(1.0);
        let params = PhysParams::new(1.0, 2.0).unwrap();
        let next = step(&s, &params, 0.1, false).unwrap();
        let factor = (-2.0 * 0.1f64).exp();
        for (a, b) in next.f.iter().zip(&s.f) {
            for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
                assert!((x - y * factor).norm() <= 1e-16 * y.norm().max(1e-300));
            }
        }
    }

    #[test]
    fn linear_flow_composes() {
        let s = random_state(1.0);
        let p = PhysParams::default();
        let one = step(&s, &p, 0.2, false).unwrap();
        let two = step(&step(&s, &p, 0.1, false).unwrap(), &p, 0.1, false).unwrap();
        assert!(rel_diff(&one, &two) < 1e-14);
    }

    #[test]
    fn nonlinear_step_keeps_constraints() {
        let s = random_state(30.0);
        let next = step(&s, &PhysParams::default(), 0.01, true).unwrap();
        let scale = next.u.iter().map(|c| c.max_abs()).fold(0.0, f64::max);
        assert!(max_divergence(&next.u) <= 1e-13 * scale);
        for j in 0..3 {
            assert!(max_divergence(&next.column(j)) <= 1e-13 * scale);
        }
        assert!(rel_diff(&next, &s) > 1e-6);
    }

    #[test]
    fn evolve_hits_sample_times_exactly() {
        let control = StepControl {
            dt: 0.3,
            include_nonlinear: false,
            ..StepControl::default()
        };
        let mut seen = Vec::new();
        let s = random_state(1.0);
        let end = evolve(
            s,
            &PhysParams::default(),
            &control,
            8.0,
            &[1.0, 2.0, 4.0, 8.0],
            |st| {
                seen.push(st.time);
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(seen, vec![1.0, 2.0, 4.0, 8.0]);
        assert_eq!(end.time, 8.0);
    }

    #[test]
    fn evolve_to_current_time_is_identity() {
        let s = random_state(1.0);
        let mut calls = 0;
        let control = StepControl::default();
        let out = evolve(
            s.clone(),
            &PhysParams::default(),
            &control,
            0.0,
            &[0.0],
            |_| {
                calls += 1;
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(out, s);
        assert_eq!(calls, 1);
    }

    #[test]
    fn linear_evolve_matches_semigroup() {
        let s = random_state(1.0);
        let params = PhysParams::new(0.7, 1.3).unwrap();
        let control = StepControl {
            dt: 0.013,
            include_nonlinear: false,
            ..StepControl::default()
        };
        let out = evolve(s.clone(), &params, &control, 1.0, &[], |_| Ok(())).unwrap();
        let mut expect = s.clone();
        let k_sq = grid().k_squared();
        for c in expect.u.iter_mut() {
            for (x, k) in c.coeffs_mut().iter_mut().zip(&k_sq) {
                *x *= (-0.7 * k).exp();
            }
        }
        for c in expect.f.iter_mut() {
            c.scale((-1.3f64).exp());
        }
        assert!(rel_diff(&out, &expect) < 1e-12);
    }

    #[test]
    fn step_budget_is_enforced() {
        let control = StepControl {
            dt: 0.1,
            max_steps: 5,
            include_nonlinear: false,
            ..StepControl::default()
        };
        let err = evolve(
            random_state(1.0),
            &PhysParams::default(),
            &control,
            1.0,
            &[],
            |_| Ok(()),
        );
        assert!(matches!(
            err,
            Err(Error::MaxStepsExceeded { max_steps: 5, .. })
        ));
    }

    #[test]
    fn blow_up_reports_step_and_field() {
        let mut s = random_state(1.0);
        s.f[4].set_hermitian([1, 0, 0], Complex64::new(f64::INFINITY, 0.0));
        let control = StepControl::default();
        match evolve(s, &PhysParams::default(), &control, 1.0, &[], |_| Ok(())) {
            Err(Error::NonFinite { field, step, .. }) => {
                assert_eq!(field, "F22");
                assert_eq!(step, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_inputs_rejected() {
        let s = random_state(1.0);
        let p = PhysParams::default();
        assert!(step(&s, &p, 0.0, true).is_err());
        let c = StepControl::default();
        assert!(evolve(s.clone(), &p, &c, -1.0, &[], |_| Ok(())).is_err());
        assert!(evolve(s.clone(), &p, &c, 1.0, &[0.5, 0.2], |_| Ok(())).is_err());
        for bad in [
            StepControl { dt: -1.0, ..c },
            StepControl {
                cfl_safety: 1.5,
                ..c
            },
            StepControl { max_steps: 0, ..c },
            StepControl {
                nan_check_interval: 0,
                ..c
            },
            StepControl { dt_cap: 0.0, ..c },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn suggested_dt_bounds() {
        let control = StepControl {
            dt: 0.05,
            dt_cap: 0.02,
            cfl_safety: 0.5,
            ..StepControl::default()
        };
        assert_eq!(suggest_dt(&State::zeros(grid()), &control).unwrap(), 0.02);
        let loose = StepControl {
            dt: 1e9,
            dt_cap: 1e9,
            ..control
        };
        let mut s = State::zeros(grid());
        s.u[0].set_hermitian([0, 1, 0], Complex64::new(0.5, 0.0));
        let slow = suggest_dt(&s, &loose).unwrap();
        s.u[0].set_hermitian([0, 1, 0], Complex64::new(1.0, 0.0));
        let fast = suggest_dt(&s, &loose).unwrap();
        assert!((slow / fast - 2.0).abs() < 1e-12);
        assert!((slow - 0.5 * grid().spacing()).abs() < 1e-12);
    }
}
