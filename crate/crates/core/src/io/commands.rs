//! Entry points behind the `oldroyd` subcommands.

use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::decay::{
    fit_power_law, lemma22_shell_integral, quadrature_linear_energy, validity_window, DecayFit,
    RadialProfile,
};
use crate::diagnostics::{Recorder, TimeSeriesRecord};
use crate::error::{Error, Result};
use crate::integrator::evolve;
use crate::system::{
    compute_rhs, divergence_residuals, energy_exchange_residuals, inner_product, State,
};

use super::checkpoint::{checkpoint_read, checkpoint_write};
use super::config::{CheckConfig, RunConfig};
use super::series::{SeriesWriter, Table};

/// Process exit status when the solution becomes non-finite.
pub const EXIT_BLOWUP: i32 = 3;
/// Process exit status when `check` finds a violated invariant.
pub const EXIT_CHECK_FAILED: i32 = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed {
        records: Vec<TimeSeriesRecord>,
        state: State,
    },
    /// The solution stopped being finite; `records` holds the samples
    /// written before that.
    BlowUp {
        time: f64,
        field: String,
        step: usize,
        records: Vec<TimeSeriesRecord>,
    },
}

impl RunOutcome {
    pub fn records(&self) -> &[TimeSeriesRecord] {
        match self {
            RunOutcome::Completed { records, .. } | RunOutcome::BlowUp { records, .. } => records,
        }
    }
}

/// Initial data of a configuration, reproducible from its seed.
pub fn initial_state(config: &RunConfig) -> Result<State> {
    let grid = config.grid.build()?;
    let (u_profile, f_profile) = config.initial.profiles();
    State::from_profiles(grid, &u_profile, &f_profile)
}

/// Evolves the configured initial data through every sample time, writing
/// one CSV row per sample and checkpoints as configured. With `resume` the
/// run continues from a checkpoint and writes only the later samples.
pub fn cmd_run(config: &RunConfig, resume: Option<&Path>) -> Result<RunOutcome> {
    config.validate()?;
    let initial = initial_state(config)?;
    let start = match resume {
        None => initial.clone(),
        Some(path) => {
            let (state, params) = checkpoint_read(path)?;
            state.ensure_same_grid(&initial).map_err(|_| {
                Error::Config(format!(
                    "checkpoint {} is on a different grid",
                    path.display()
                ))
            })?;
            if params != config.params {
                return Err(Error::Config(format!(
                    "checkpoint {} was written with {params:?}, config has {:?}",
                    path.display(),
                    config.params
                )));
            }
            state
        }
    };
    let recorder = Recorder::new(config.params, config.schedule, initial, config.m_order)?;
    let resumed = resume.is_some();
    let samples: Vec<f64> = config
        .outputs
        .samples
        .times()
        .into_iter()
        .filter(|&t| {
            if resumed {
                t > start.time
            } else {
                t >= start.time
            }
        })
        .collect();
    let t_end = config.outputs.samples.t_end().max(start.time);
    let outputs = &config.outputs;
    let mut writer = SeriesWriter::create(&outputs.csv, config.m_order)?;
    let mut records = Vec::with_capacity(samples.len());
    let sink = |state: &State| -> Result<()> {
        let record = recorder.record(state)?;
        writer.write(&record)?;
        records.push(record);
        if let Some(path) = &outputs.checkpoint {
            if outputs.checkpoint_every > 0 && records.len() % outputs.checkpoint_every == 0 {
                checkpoint_write(path, state, &config.params)?;
            }
        }
        Ok(())
    };
    match evolve(
        start,
        &config.params,
        &config.control,
        t_end,
        &samples,
        sink,
    ) {
        Ok(state) => {
            if let Some(path) = &outputs.checkpoint {
                checkpoint_write(path, &state, &config.params)?;
            }
            Ok(RunOutcome::Completed { records, state })
        }
        Err(Error::NonFinite { field, step, time }) => Ok(RunOutcome::BlowUp {
            time,
            field,
            step,
            records,
        }),
        Err(e) => Err(e),
    }
}

/// Fitted exponents of one `p` in the low-frequency shell sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellFit {
    pub label: &'static str,
    pub p: f64,
    pub bound_exponent: f64,
    /// `None` when the integral is zero over the sweep.
    pub value: Option<DecayFit>,
    /// `None` when the profile is not in the dual Lebesgue space.
    pub bound: Option<DecayFit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    /// Linear energy exponent over the last two decades of the sweep.
    pub energy: DecayFit,
    pub shells: Vec<ShellFit>,
    /// Largest relative gap to the closed form, for Gaussian profiles.
    pub closed_form_gap: Option<f64>,
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fit = |d: &Option<DecayFit>| match d {
            Some(d) => format!("{:+.6} ± {:.1e}", d.exponent, d.stderr),
            None => "n/a".into(),
        };
        writeln!(
            f,
            "linear energy     exponent {:+.6} ± {:.1e}",
            self.energy.exponent, self.energy.stderr
        )?;
        for s in &self.shells {
            writeln!(
                f,
                "shell p = {:<6.4} value {}  bound {}  expected {:+.4}",
                s.p,
                fit(&s.value),
                fit(&s.bound),
                s.bound_exponent
            )?;
        }
        if let Some(gap) = self.closed_form_gap {
            writeln!(f, "closed-form gap   {gap:.3e}")?;
        }
        Ok(())
    }
}

const SHELL_POWERS: [(&str, f64); 3] = [("p1", 1.0), ("p4_3", 4.0 / 3.0), ("p2", 2.0)];

fn gaussian_closed_form(profile: &RadialProfile, mu: f64, t: f64) -> Option<f64> {
    match *profile {
        RadialProfile::FlatThenGaussian { cutoff, width } if cutoff == 0.0 && width > 0.0 => {
            Some(std::f64::consts::PI.powf(1.5) * (2.0 * mu * t + 1.0 / (width * width)).powf(-1.5))
        }
        _ => None,
    }
}

/// Sweeps the radial quadratures over the oracle sample times, writes them
/// to the oracle CSV and fits their exponents.
pub fn cmd_oracle(config: &RunConfig) -> Result<OracleReport> {
    config.validate()?;
    let oracle = &config.oracle;
    let times = oracle.samples.times();
    let mu = config.params.mu;
    let has_closed_form = gaussian_closed_form(&oracle.profile, mu, 0.0).is_some();

    let mut columns = vec!["time".to_string(), "energy".into()];
    if has_closed_form {
        columns.push("energy_closed_form".into());
    }
    for (label, _) in SHELL_POWERS {
        columns.push(format!("shell_{label}"));
        columns.push(format!("bound_{label}"));
    }
    let mut rows = Vec::with_capacity(times.len());
    for &t in &times {
        let mut row = vec![t, quadrature_linear_energy(&oracle.profile, mu, t)?];
        if let Some(exact) = gaussian_closed_form(&oracle.profile, mu, t) {
            row.push(exact);
        }
        for (_, p) in SHELL_POWERS {
            let shell = lemma22_shell_integral(&oracle.profile, p, &config.schedule, t)?;
            row.push(shell.value);
            row.push(shell.bound);
        }
        rows.push(row);
    }

    if let Some(dir) = oracle.csv.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = csv::Writer::from_path(&oracle.csv).map_err(|e| Error::Csv(e.to_string()))?;
    out.write_record(&columns)
        .map_err(|e| Error::Csv(e.to_string()))?;
    for row in &rows {
        out.write_record(row.iter().map(|v| format!("{v:e}")))
            .map_err(|e| Error::Csv(e.to_string()))?;
    }
    out.flush()?;

    let window = (times[0], times[times.len() - 1]);
    let series = |col: usize| -> Vec<(f64, f64)> { rows.iter().map(|r| (r[0], r[col])).collect() };
    let usable = |col: usize| rows.iter().all(|r| r[col].is_finite() && r[col] > 0.0);
    // the linear energy is fitted over the last two decades only, where the
    // heat kernel has shrunk well inside the profile's flat core
    let energy = fit_power_law(&series(1), ((window.1 / 100.0).max(window.0), window.1))?;
    let first_shell = if has_closed_form { 3 } else { 2 };
    let mut shells = Vec::new();
    for (i, (label, p)) in SHELL_POWERS.into_iter().enumerate() {
        let (vc, bc) = (first_shell + 2 * i, first_shell + 2 * i + 1);
        let value = if usable(vc) {
            Some(fit_power_law(&series(vc), window)?)
        } else {
            None
        };
        let bound = if usable(bc) {
            Some(fit_power_law(&series(bc), window)?)
        } else {
            None
        };
        shells.push(ShellFit {
            label,
            p,
            bound_exponent: -1.5 * (2.0 / p - 1.0),
            value,
            bound,
        });
    }
    let closed_form_gap = has_closed_form.then(|| {
        rows.iter()
            .map(|r| (r[1] - r[2]).abs() / r[2])
            .fold(0.0, f64::max)
    });
    Ok(OracleReport {
        energy,
        shells,
        closed_form_gap,
    })
}

/// Power-law fit of one column of a time-series CSV; `l2_sum` selects
/// `l2_u_sq + l2_F_sq`.
pub fn cmd_fit(csv: &Path, column: &str, window: (f64, f64)) -> Result<DecayFit> {
    let table = Table::read(csv)?;
    fit_power_law(&table.column(column)?, window)
}

/// Validity window of a configuration.
pub fn config_window(config: &RunConfig) -> Result<(f64, f64)> {
    validity_window(
        &config.grid.build()?,
        &config.params,
        &config.schedule,
        &config.window,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckItem {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
}

impl CheckItem {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub time: f64,
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(CheckItem::passed)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "checkpoint at t = {}", self.time)?;
        for item in &self.items {
            writeln!(
                f,
                "{} {:<24} {:.3e} (tolerance {:.0e})",
                if item.passed() { "pass" } else { "FAIL" },
                item.name,
                item.value,
                item.tolerance
            )?;
        }
        Ok(())
    }
}

/// Structural invariants of a checkpointed state: reality (checked on
/// read), dealiasing, both constraints, the three nonlinear cancellations
/// and the zero net energy transfer of the full nonlinear tendency.
pub fn cmd_check(checkpoint: &Path, check: &CheckConfig) -> Result<CheckReport> {
    let (state, params) = checkpoint_read(checkpoint)?;
    let grid = *state.grid();
    let mask = grid.retained_mask();
    let mut outside = 0.0f64;
    let mut inside = 0.0f64;
    for field in state.fields() {
        for (c, &kept) in field.coeffs().iter().zip(&mask) {
            if kept {
                inside = inside.max(c.norm());
            } else {
                outside = outside.max(c.norm());
            }
        }
    }
    let aliased = if outside == 0.0 {
        0.0
    } else {
        outside / inside.max(f64::MIN_POSITIVE)
    };
    let (div_u, div_f) = divergence_residuals(&state);
    let [adv_u, adv_f, coupling] = energy_exchange_residuals(&state)?;
    let rhs = compute_rhs(&state, &params, true)?;
    let mut transfer = 0.0;
    let mut scale = 0.0;
    for (x, dx) in state.fields().zip(rhs.fields()) {
        transfer += inner_product(x, dx).re;
        scale += (x.l2_norm_sq() * dx.l2_norm_sq()).sqrt();
    }
    let transfer = if scale == 0.0 {
        0.0
    } else {
        transfer.abs() / scale
    };
    let c = check.cancellation_tolerance;
    Ok(CheckReport {
        time: state.time,
        items: vec![
            CheckItem {
                name: "dealiased",
                value: aliased,
                tolerance: 0.0,
            },
            CheckItem {
                name: "div u",
                value: div_u,
                tolerance: check.div_u_tolerance,
            },
            CheckItem {
                name: "div F^T",
                value: div_f,
                tolerance: check.div_f_tolerance,
            },
            CheckItem {
                name: "advection of u",
                value: adv_u,
                tolerance: c,
            },
            CheckItem {
                name: "advection of F",
                value: adv_f,
                tolerance: c,
            },
            CheckItem {
                name: "stretching exchange",
                value: coupling,
                tolerance: c,
            },
            CheckItem {
                name: "nonlinear transfer",
                value: transfer,
                tolerance: c,
            },
        ],
    })
}

/// Prints a fit as `exponent stderr t_lo t_hi samples`.
pub fn print_fit(out: &mut impl Write, column: &str, fit: &DecayFit) -> std::io::Result<()> {
    writeln!(
        out,
        "{column}: exponent {:+.6} stderr {:.3e} window [{}, {}] samples {}",
        fit.exponent, fit.stderr, fit.window.0, fit.window.1, fit.n_samples
    )
}
