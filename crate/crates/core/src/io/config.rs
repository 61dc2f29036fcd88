//! Run configuration as a TOML document.
//!
//! Every table and key is optional; omitted values take the defaults below.
//! Unknown keys are rejected.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::decay::{RadialProfile, WindowSettings};
use crate::diagnostics::{SplittingSchedule, Stencil};
use crate::error::{Error, Result};
use crate::integrator::StepControl;
use crate::spectral::{Grid, ProfileShape, SpectrumProfile};
use crate::system::PhysParams;

fn range_error(name: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name: name.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n_points: usize,
    pub box_length: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_points: 32,
            box_length: 20.0 * PI,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        if self.n_points < 8 || self.n_points % 2 != 0 {
            return Err(range_error(
                "grid.n_points",
                format!("must be even and >= 8, got {}", self.n_points),
            ));
        }
        if !(self.box_length.is_finite() && self.box_length > 0.0) {
            return Err(range_error(
                "grid.box_length",
                format!("must be > 0, got {}", self.box_length),
            ));
        }
        Grid::new(self.n_points, self.box_length)
    }
}

/// Random initial data; amplitudes are the L² norms of `u₀` and `F₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub profile: ProfileShape,
    pub cutoff_k: f64,
    pub u_amplitude: f64,
    pub f_amplitude: f64,
    pub seed: u64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            profile: ProfileShape::FlatLowKGaussianCutoff,
            cutoff_k: std::f64::consts::FRAC_1_SQRT_2,
            u_amplitude: 0.05,
            f_amplitude: 0.05,
            seed: 1,
        }
    }
}

impl InitialConfig {
    fn validate(&self) -> Result<()> {
        if !(self.cutoff_k.is_finite() && self.cutoff_k > 0.0) {
            return Err(range_error(
                "initial.cutoff_k",
                format!("must be > 0, got {}", self.cutoff_k),
            ));
        }
        for (name, v) in [
            ("initial.u_amplitude", self.u_amplitude),
            ("initial.f_amplitude", self.f_amplitude),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(range_error(name, format!("must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Velocity and deformation spectra; the two seeds are decorrelated.
    pub fn profiles(&self) -> (SpectrumProfile, SpectrumProfile) {
        let make = |amplitude, seed| SpectrumProfile {
            shape: self.profile,
            cutoff_k: self.cutoff_k,
            target_l2_norm: amplitude,
            seed,
        };
        (
            make(self.u_amplitude, self.seed),
            make(self.f_amplitude, self.seed ^ 0x5851_f42d_4c95_7f2d),
        )
    }
}

/// Sample times of a run or oracle sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SampleSpec {
    /// `t_end · i / count` for `i = 0..=count`.
    Linear { t_end: f64, count: usize },
    /// `t0 ρ^i` for `i = 0..count`, ending at `t_end`, optionally preceded
    /// by `t = 0`.
    Geometric {
        t0: f64,
        t_end: f64,
        count: usize,
        #[serde(default)]
        include_zero: bool,
    },
}

impl SampleSpec {
    fn validate(&self, name: &str) -> Result<()> {
        match *self {
            SampleSpec::Linear { t_end, count } => {
                if !(t_end.is_finite() && t_end > 0.0) {
                    return Err(range_error(name, format!("t_end must be > 0, got {t_end}")));
                }
                if count == 0 {
                    return Err(range_error(name, "count must be positive"));
                }
            }
            SampleSpec::Geometric {
                t0, t_end, count, ..
            } => {
                if !(t0.is_finite() && t0 > 0.0 && t_end.is_finite() && t_end > t0) {
                    return Err(range_error(
                        name,
                        format!("need 0 < t0 < t_end, got t0 = {t0}, t_end = {t_end}"),
                    ));
                }
                if count < 2 {
                    return Err(range_error(name, "count must be at least 2"));
                }
            }
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        match *self {
            SampleSpec::Linear { t_end, count } => (0..=count)
                .map(|i| {
                    if i == count {
                        t_end
                    } else {
                        t_end * i as f64 / count as f64
                    }
                })
                .collect(),
            SampleSpec::Geometric {
                t0,
                t_end,
                count,
                include_zero,
            } => {
                let ratio = (t_end / t0).powf(1.0 / (count - 1) as f64);
                let mut times: Vec<f64> = Vec::with_capacity(count + 1);
                if include_zero {
                    times.push(0.0);
                }
                times.extend((0..count).map(|i| {
                    if i + 1 == count {
                        t_end
                    } else {
                        t0 * ratio.powi(i as i32)
                    }
                }));
                times
            }
        }
    }

    pub fn t_end(&self) -> f64 {
        match *self {
            SampleSpec::Linear { t_end, .. } | SampleSpec::Geometric { t_end, .. } => t_end,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub samples: SampleSpec,
    pub csv: PathBuf,
    pub checkpoint: Option<PathBuf>,
    /// Write the checkpoint every this many samples; 0 writes it only at
    /// the end of the run.
    pub checkpoint_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            samples: SampleSpec::Geometric {
                t0: 0.1,
                t_end: 25.0,
                count: 40,
                include_zero: true,
            },
            csv: PathBuf::from("series.csv"),
            checkpoint: None,
            checkpoint_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub profile: RadialProfile,
    pub samples: SampleSpec,
    pub csv: PathBuf,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            profile: RadialProfile::flat(1.0),
            samples: SampleSpec::Geometric {
                t0: 10.0,
                t_end: 1e4,
                count: 40,
                include_zero: false,
            },
            csv: PathBuf::from("oracle.csv"),
        }
    }
}

/// Settings of `oldroyd check`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckConfig {
    pub div_u_tolerance: f64,
    pub div_f_tolerance: f64,
    pub cancellation_tolerance: f64,
    pub stencil: Stencil,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            div_u_tolerance: 1e-10,
            div_f_tolerance: 1e-8,
            cancellation_tolerance: 1e-10,
            stencil: Stencil::Centered4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub params: PhysParams,
    pub initial: InitialConfig,
    pub control: StepControl,
    pub schedule: SplittingSchedule,
    pub window: WindowSettings,
    pub outputs: OutputConfig,
    pub oracle: OracleConfig,
    pub check: CheckConfig,
    /// Highest derivative order in the diagnostics.
    pub m_order: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            params: PhysParams::default(),
            initial: InitialConfig::default(),
            control: StepControl::default(),
            schedule: SplittingSchedule::default(),
            window: WindowSettings::default(),
            outputs: OutputConfig::default(),
            oracle: OracleConfig::default(),
            check: CheckConfig::default(),
            m_order: 3,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.build()?;
        self.params.validate()?;
        self.initial.validate()?;
        self.control.validate()?;
        self.schedule.validate()?;
        self.window.validate()?;
        self.outputs.samples.validate("outputs.samples")?;
        self.oracle.samples.validate("oracle.samples")?;
        self.oracle.profile.validate()?;
        if self.m_order < 3 {
            return Err(range_error(
                "m_order",
                format!("must be >= 3, got {}", self.m_order),
            ));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Parses and validates a TOML run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}
