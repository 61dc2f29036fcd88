//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the report is
//! always printed.
//!
//! The reference run (n = 64, k_min = 0.1, μ = ν = 1, amplitudes 0.05,
//! dt = 0.01, T = 25, a sample every step) is computed once and shared by
//! criteria 1, 2, 4, 7, 8 and 9.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use oldroyd_core::decay::{
    fit_power_law, lemma22_shell_integral, linear_oracle_evolve, quadrature_linear_energy,
    RadialProfile,
};
use oldroyd_core::diagnostics::{
    energy_identity_residual, hm_monotonicity_violation, lemma41_constants, Recorder,
    SplittingSchedule, Stencil, TimeSeriesRecord,
};
use oldroyd_core::integrator::evolve;
use oldroyd_core::io::{
    cmd_fit, cmd_run, config_window, initial_state, RunConfig, RunOutcome, SampleSpec,
    SeriesWriter, Table, L2_SUM,
};
use oldroyd_core::spectral::{Grid, ProfileShape, SpectrumProfile};
use oldroyd_core::system::{divergence_residuals, energy_exchange_residuals, State};

/// Relative level below which residual differences are roundoff.
const ROUNDOFF_FLOOR: f64 = 1e-12;

struct Verdict {
    id: &'static str,
    passed: bool,
    detail: String,
}

fn reference_config() -> RunConfig {
    let mut c = RunConfig::default();
    c.grid.n_points = 64;
    c.grid.box_length = 2.0 * PI / 0.1;
    c.initial.u_amplitude = 0.05;
    c.initial.f_amplitude = 0.05;
    c.control.dt = 0.01;
    c.outputs.samples = SampleSpec::Linear {
        t_end: 25.0,
        count: 2500,
    };
    c
}

struct Trace {
    records: Vec<TimeSeriesRecord>,
    /// `(div u, div Fᵀ)` at every sample.
    divergence: Vec<(f64, f64)>,
    elapsed: Duration,
}

fn trace(config: &RunConfig, initial: &State, csv: Option<&Path>) -> Trace {
    let recorder = Recorder::new(
        config.params,
        config.schedule,
        initial.clone(),
        config.m_order,
    )
    .unwrap();
    let mut writer = csv.map(|p| SeriesWriter::create(p, config.m_order).unwrap());
    let mut records = Vec::new();
    let mut divergence = Vec::new();
    let start = Instant::now();
    let samples = config.outputs.samples;
    evolve(
        initial.clone(),
        &config.params,
        &config.control,
        samples.t_end(),
        &samples.times(),
        |s| {
            let r = recorder.record(s)?;
            if let Some(w) = writer.as_mut() {
                w.write(&r)?;
            }
            records.push(r);
            divergence.push(divergence_residuals(s));
            Ok(())
        },
    )
    .unwrap();
    Trace {
        records,
        divergence,
        elapsed: start.elapsed(),
    }
}

fn max_abs_residual(records: &[TimeSeriesRecord]) -> f64 {
    let e0 = records[0].energy();
    energy_identity_residual(records, Stencil::Centered4)
        .unwrap()
        .iter()
        .map(|(_, r)| r.abs() / e0)
        .fold(0.0, f64::max)
}

/// Largest gap between two residual series sampled at the same times.
fn residual_gap(a: &[TimeSeriesRecord], b: &[TimeSeriesRecord]) -> f64 {
    let e0 = a[0].energy();
    let ra = energy_identity_residual(a, Stencil::Centered4).unwrap();
    let rb = energy_identity_residual(b, Stencil::Centered4).unwrap();
    assert!(ra.iter().zip(&rb).all(|(x, y)| x.0 == y.0));
    ra.iter()
        .zip(&rb)
        .map(|(x, y)| (x.1 - y.1).abs() / e0)
        .fold(0.0, f64::max)
}

/// Stepper contributions at dt and dt/2, from runs at dt, dt/2 and dt/4.
fn stepper_contributions(
    config: &RunConfig,
    initial: &State,
    dts: [f64; 3],
    mut first: Option<Trace>,
) -> ([f64; 2], Vec<Trace>) {
    let mut traces = Vec::new();
    for dt in dts {
        if let Some(t) = first.take() {
            traces.push(t);
            continue;
        }
        let mut c = config.clone();
        c.control.dt = dt;
        traces.push(trace(&c, initial, None));
    }
    let gaps = [
        residual_gap(&traces[0].records, &traces[1].records),
        residual_gap(&traces[1].records, &traces[2].records),
    ];
    (gaps, traces)
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn geometric(t0: f64, t1: f64, count: usize) -> Vec<f64> {
    SampleSpec::Geometric {
        t0,
        t_end: t1,
        count,
        include_zero: false,
    }
    .times()
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for case in 0..20 {
        let n = [16, 24, 32][case % 3];
        let grid = Grid::new(n, rng.gen_range(2.0..60.0)).unwrap();
        let mut profile = || SpectrumProfile {
            shape: ProfileShape::FlatLowKGaussianCutoff,
            cutoff_k: rng.gen_range(0.3..3.0),
            target_l2_norm: 10f64.powf(rng.gen_range(-3.0..1.5)),
            seed: rng.gen(),
        };
        let (pu, pf) = (profile(), profile());
        let state = State::from_profiles(grid, &pu, &pf).unwrap();
        for r in energy_exchange_residuals(&state).unwrap() {
            worst = worst.max(r);
        }
    }
    let elapsed = start.elapsed();
    Verdict {
        id: "3",
        passed: worst <= 1e-10 && elapsed < Duration::from_secs(60),
        detail: format!(
            "nonlinear cancellations on 20 random states: worst {worst:.2e} (≤ 1e-10), {:.1} s",
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_5() -> Verdict {
    let profile = RadialProfile::flat(1.0);
    let schedule = SplittingSchedule::default();
    let times = geometric(10.0, 1e4, 40);
    let mut passed = true;
    let mut parts = Vec::new();
    for (p, target) in [(1.0, -1.5), (4.0 / 3.0, -0.75), (2.0, 0.0)] {
        let shells: Vec<_> = times
            .iter()
            .map(|&t| {
                (
                    t,
                    lemma22_shell_integral(&profile, p, &schedule, t).unwrap(),
                )
            })
            .collect();
        let bound: Vec<_> = shells.iter().map(|(t, s)| (*t, s.bound)).collect();
        let value: Vec<_> = shells.iter().map(|(t, s)| (*t, s.value)).collect();
        let fb = fit_power_law(&bound, (10.0, 1e4)).unwrap();
        let fv = fit_power_law(&value, (10.0, 1e4)).unwrap();
        passed &= within(fb.exponent, target, 0.005);
        parts.push(format!(
            "p = {p:.3}: bound {:+.4} (target {target:+.3}), value {:+.4}",
            fb.exponent, fv.exponent
        ));
    }
    Verdict {
        id: "5",
        passed,
        detail: format!(
            "low-frequency shell exponents over [10, 1e4]: {}",
            parts.join("; ")
        ),
    }
}

fn criterion_6(config: &RunConfig, initial: &State) -> Verdict {
    let profile = RadialProfile::flat(1.0);
    let series: Vec<_> = geometric(1e2, 1e4, 40)
        .into_iter()
        .map(|t| {
            (
                t,
                quadrature_linear_energy(&profile, config.params.mu, t).unwrap(),
            )
        })
        .collect();
    let quad = fit_power_law(&series, (1e2, 1e4)).unwrap();

    let window = config_window(config).unwrap();
    let lattice: Vec<_> = geometric(window.0.max(1e-3), window.1, 40)
        .into_iter()
        .map(|t| {
            (
                t,
                linear_oracle_evolve(initial, &config.params, t)
                    .unwrap()
                    .energy(),
            )
        })
        .collect();
    let lat = fit_power_law(&lattice, window).unwrap();
    Verdict {
        id: "6",
        passed: within(quad.exponent, -1.5, 0.01) && within(lat.exponent, -1.5, 0.1),
        detail: format!(
            "linear energy: quadrature {:+.4} over [1e2, 1e4] (−1.5 ± 0.01), lattice semigroup {:+.4} over [{:.2}, {:.2}] (−1.5 ± 0.1)",
            quad.exponent, lat.exponent, window.0, window.1
        ),
    }
}

fn main() {
    let out_dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&out_dir).unwrap();
    let mut verdicts: Vec<Verdict> = Vec::new();
    let report = |v: &Verdict| {
        println!(
            "criterion {:>2} {} {}",
            v.id,
            if v.passed { "PASS" } else { "FAIL" },
            v.detail
        )
    };

    let v = criterion_3();
    report(&v);
    verdicts.push(v);
    let v = criterion_5();
    report(&v);
    verdicts.push(v);

    let config = reference_config();
    let initial = initial_state(&config).unwrap();
    let v = criterion_6(&config, &initial);
    report(&v);
    verdicts.push(v);

    // the shared reference run
    let csv = out_dir.join("reference.csv");
    let reference = trace(&config, &initial, Some(&csv));
    println!(
        "reference run: {} samples in {:.1} s, series at {}",
        reference.records.len(),
        reference.elapsed.as_secs_f64(),
        csv.display()
    );

    // 1: energy identity and its refinement
    let residual = max_abs_residual(&reference.records);
    let mut short = config.clone();
    short.outputs.samples = SampleSpec::Linear {
        t_end: 1.0,
        count: 20,
    };
    let head = Trace {
        records: reference
            .records
            .iter()
            .step_by(5)
            .take(21)
            .cloned()
            .collect(),
        divergence: reference
            .divergence
            .iter()
            .step_by(5)
            .take(21)
            .cloned()
            .collect(),
        elapsed: Duration::ZERO,
    };
    let (gaps, refined) =
        stepper_contributions(&short, &initial, [0.01, 0.005, 0.0025], Some(head));
    let ratio = gaps[0] / gaps[1];
    let at_floor = gaps[0] <= ROUNDOFF_FLOOR && gaps[1] <= ROUNDOFF_FLOOR;
    let mut strong = RunConfig::default();
    strong.grid.n_points = 32;
    strong.grid.box_length = 2.0 * PI;
    strong.initial.cutoff_k = 2.0;
    strong.initial.u_amplitude = 10.0;
    strong.initial.f_amplitude = 10.0;
    strong.outputs.samples = short.outputs.samples;
    let strong_initial = initial_state(&strong).unwrap();
    let (strong_gaps, _) =
        stepper_contributions(&strong, &strong_initial, [0.01, 0.005, 0.0025], None);
    let strong_ratio = strong_gaps[0] / strong_gaps[1];
    let refinement_ok = ratio >= 8.0 || (at_floor && strong_ratio >= 8.0);
    let within_time = reference.elapsed <= Duration::from_secs(15 * 60);
    let v = Verdict {
        id: "1",
        passed: residual <= 1e-6 && refinement_ok && within_time,
        detail: format!(
            "energy identity max |residual|/E(0) = {residual:.2e} (≤ 1e-6); stepper contribution at dt 0.01 / 0.005 = {:.2e} / {:.2e} (ratio {ratio:.2}{}); strongly nonlinear 2π box ratio {strong_ratio:.1} ({:.2e} / {:.2e}); reference run {:.1} min (≤ 15)",
            gaps[0],
            gaps[1],
            if at_floor { ", both at roundoff" } else { "" },
            strong_gaps[0],
            strong_gaps[1],
            reference.elapsed.as_secs_f64() / 60.0
        ),
    };
    report(&v);
    verdicts.push(v);

    // 2: constraints
    let div_u = reference.divergence.iter().map(|d| d.0).fold(0.0, f64::max);
    let div_f_end = reference.divergence.last().unwrap().1;
    let div_f_short: Vec<f64> = refined
        .iter()
        .map(|t| t.divergence.last().unwrap().1)
        .collect();
    let f_ratio = div_f_short[0] / div_f_short[1].max(f64::MIN_POSITIVE);
    let f_floor = div_f_short[..2].iter().all(|&d| d <= ROUNDOFF_FLOOR);
    let v = Verdict {
        id: "2",
        passed: div_u <= 1e-10 && div_f_end <= 1e-8 && (f_ratio >= 8.0 || f_floor),
        detail: format!(
            "max div u {div_u:.2e} (≤ 1e-10); div Fᵀ at T {div_f_end:.2e} (≤ 1e-8); at t = 1 for dt 0.01 / 0.005 / 0.0025: {:.2e} / {:.2e} / {:.2e}{}",
            div_f_short[0],
            div_f_short[1],
            div_f_short[2],
            if f_floor { " (roundoff floor)" } else { "" }
        ),
    };
    report(&v);
    verdicts.push(v);

    // 4: H^m monotonicity
    let violation = hm_monotonicity_violation(&reference.records, 3).unwrap();
    let v = Verdict {
        id: "4",
        passed: violation <= 1e-8,
        detail: format!("H^3 energy growth between samples {violation:.2e} relative (≤ 1e-8)"),
    };
    report(&v);
    verdicts.push(v);

    // 7, 8: nonlinear decay rates inside the validity window
    let window = config_window(&config).unwrap();
    let span = (1.0 + window.1) / (1.0 + window.0);
    let l2 = cmd_fit(&csv, L2_SUM, window).unwrap();
    let v = Verdict {
        id: "7",
        passed: within(l2.exponent, -1.5, 0.15),
        detail: format!(
            "‖u‖² + ‖F‖² exponent {:+.4} ± {:.1e} (−1.5 ± 0.15) over [{:.2}, {:.2}], 1 + t spans {span:.1}×, {} samples",
            l2.exponent, l2.stderr, window.0, window.1, l2.n_samples
        ),
    };
    report(&v);
    verdicts.push(v);
    let h1 = cmd_fit(&csv, "hm_sq_1", window).unwrap();
    let h2 = cmd_fit(&csv, "hm_sq_2", window).unwrap();
    let v = Verdict {
        id: "8",
        passed: within(h1.exponent, -2.5, 0.2),
        detail: format!(
            "‖∇u‖² + ‖∇F‖² exponent {:+.4} (−2.5 ± 0.2); second order {:+.4} (reported, −3.5 ± 0.3 {})",
            h1.exponent,
            h2.exponent,
            if within(h2.exponent, -3.5, 0.3) { "met" } else { "not met" }
        ),
    };
    report(&v);
    verdicts.push(v);

    // 9: Fourier-side bounds
    let (ratio_u, ratio_f) = lemma41_constants(&reference.records);
    let mut linear = config.clone();
    linear.control.include_nonlinear = false;
    linear.outputs.samples = SampleSpec::Linear {
        t_end: 25.0,
        count: 100,
    };
    let linear_trace = trace(&linear, &initial, None);
    let (lin_u, lin_f) = lemma41_constants(&linear_trace.records);
    let v = Verdict {
        id: "9",
        passed: ratio_u.is_finite()
            && ratio_f.is_finite()
            && ratio_u <= 10.0
            && ratio_f <= 10.0
            && lin_u <= 1.0
            && lin_f <= 1.0,
        detail: format!(
            "max ratio_u {ratio_u:.3e}, ratio_F {ratio_f:.3e} (≤ 10); linear-only {lin_u:.3e}, {lin_f:.3e} (≤ 1)"
        ),
    };
    report(&v);
    verdicts.push(v);

    // 10: perturbative regime
    let deviation = |eps: f64| {
        let mut c = config.clone();
        c.initial.u_amplitude = eps;
        c.initial.f_amplitude = eps;
        let init = initial_state(&c).unwrap();
        let exact = linear_oracle_evolve(&init, &c.params, 5.0).unwrap();
        let run = evolve(init, &c.params, &c.control, 5.0, &[], |_| Ok(())).unwrap();
        let gap: f64 = run
            .fields()
            .zip(exact.fields())
            .map(|(a, b)| {
                let mut d = a.clone();
                d.add_scaled(-1.0, b).unwrap();
                d.l2_norm_sq()
            })
            .sum();
        (gap / exact.energy()).sqrt()
    };
    let (d2, d1) = (deviation(0.02), deviation(0.01));
    let v = Verdict {
        id: "10",
        passed: within(d2 / d1, 2.0, 0.4),
        detail: format!(
            "relative gap to the linear semigroup at T = 5: ε = 0.02 {d2:.3e}, ε = 0.01 {d1:.3e}, ratio {:.3} (2.0 ± 0.4)",
            d2 / d1
        ),
    };
    report(&v);
    verdicts.push(v);

    // 11: determinism and resume
    let mut small = config.clone();
    small.outputs.samples = SampleSpec::Linear {
        t_end: 0.5,
        count: 50,
    };
    small.outputs.csv = out_dir.join("repeat_a.csv");
    cmd_run(&small, None).unwrap();
    let first = std::fs::read(&small.outputs.csv).unwrap();
    small.outputs.csv = out_dir.join("repeat_b.csv");
    cmd_run(&small, None).unwrap();
    let identical = std::fs::read(&small.outputs.csv).unwrap() == first;
    let full = Table::read(&small.outputs.csv).unwrap();

    let mut half = small.clone();
    half.outputs.samples = SampleSpec::Linear {
        t_end: 0.25,
        count: 25,
    };
    half.outputs.csv = out_dir.join("half.csv");
    half.outputs.checkpoint = Some(out_dir.join("half.chk"));
    cmd_run(&half, None).unwrap();
    let mut rest = small.clone();
    rest.outputs.csv = out_dir.join("rest.csv");
    let outcome = cmd_run(&rest, half.outputs.checkpoint.as_deref()).unwrap();
    let resumed = Table::read(&rest.outputs.csv).unwrap();
    let mut worst = 0.0f64;
    for (a, b) in resumed.rows.iter().zip(&full.rows[26..]) {
        for (x, y) in a.iter().zip(b) {
            if *y != 0.0 {
                worst = worst.max((x - y).abs() / y.abs());
            } else {
                worst = worst.max(x.abs());
            }
        }
    }
    let complete = matches!(outcome, RunOutcome::Completed { .. })
        && resumed.rows.len() == full.rows.len() - 26;
    let v = Verdict {
        id: "11",
        passed: identical && complete && worst <= 1e-12,
        detail: format!(
            "rerun CSV byte-identical: {identical}; resumed rows {} with max relative deviation {worst:.2e} (≤ 1e-12)",
            resumed.rows.len()
        ),
    };
    report(&v);
    verdicts.push(v);

    let failed: Vec<&str> = verdicts
        .iter()
        .filter(|v| !v.passed)
        .map(|v| v.id)
        .collect();
    println!(
        "acceptance: {} of {} criteria passed{}",
        verdicts.len() - failed.len(),
        verdicts.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failed: {}", failed.join(", "))
        }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
