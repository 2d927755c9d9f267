//! Runners for single experiment configs.

use heatlab::asymptotics::{concentration_sweep, full_theorem1_experiment, rate_fit, ConvergenceSeries, Theorem1Options};
use heatlab::counterexample::{cch_limit_scan, harmonic_profile, supnorm_failure_demo, Verdict};
use heatlab::estimates::{
    check_gradient, check_time_derivative, check_two_sided, check_upper, estimate_holder, lemma1_integrals,
    lemma1_tail, lemma1_tail_slope, CheckMode, EstimateOptions, EstimateReport,
};
use heatlab::io::{fmt_sci, write_table};
use heatlab::kernel::{euclidean_relative_error, numeric_kernel, KERNEL_MASS_TOLERANCE};
use heatlab::planar::planar_experiment;
use heatlab::space::fit_doubling_exponents;
use heatlab::Model;

use crate::config::{ExperimentConfig, ExperimentSpec};
use crate::error::CliError;
use crate::output::{Artifact, Check, Outcome};

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    match &cfg.spec {
        ExperimentSpec::KernelAccuracy { space, t, r_max, tolerance } => {
            kernel_accuracy(cfg, &cfg.model(space)?, *t, *r_max, *tolerance)
        }
        ExperimentSpec::Estimates { space, source, times, d_list, deltas, samples_per_time } => {
            let model = cfg.model(space)?;
            let source = model.space.nearest_index(source.unwrap_or(model.space.default_base_point()));
            let opts = EstimateOptions {
                samples_per_time: samples_per_time.unwrap_or(EstimateOptions::default().samples_per_time),
                seed: cfg.seed,
            };
            estimates(cfg, &model, source, times, d_list, deltas, &opts)
        }
        ExperimentSpec::Lemma1 { space, center, c, t, r, tail_range } => {
            let model = cfg.model(space)?;
            let center = center.unwrap_or(model.space.default_base_point());
            lemma1(cfg, &model, center, *c, *t, *r, *tail_range)
        }
        ExperimentSpec::Concentration { space, base_point, times, phi, nu_prime } => {
            let model = cfg.model(space)?;
            let x0 = base_point.unwrap_or(model.space.default_base_point());
            let nu_prime = match nu_prime {
                Some(v) => *v,
                None => lower_exponent(&model, x0)?,
            };
            let sweep = concentration_sweep(&model, x0, times, phi, nu_prime)?;
            let rows: Vec<Vec<f64>> =
                sweep.rows.iter().map(|r| vec![r.t, r.phi, r.mass_in, r.mass_out, r.scaled_out]).collect();
            let csv = Artifact::csv("concentration.csv", "kernel mass concentrates in the critical annulus", cfg.seed, |o| {
                write_table(o, &["t", "phi", "mass_in", "mass_out", "scaled_out"], &rows)
            })?;
            let check = Check::new(
                "mass_in_increasing",
                "kernel mass inside the annulus increases along the sweep",
                "strictly increasing",
                true,
                sweep.mass_in_increasing,
            )
            .with("fitted_constant", sweep.fitted_constant)
            .with("nu_prime", nu_prime);
            Ok(Outcome { checks: vec![check], artifacts: vec![csv, Artifact::json("concentration.json", &sweep)?] })
        }
        ExperimentSpec::Theorem1 { space, initial_data, base_point, times, phi, p, planar, rate_window } => {
            let series = match (space, planar) {
                (Some(space), None) => {
                    let model = cfg.model(space)?;
                    let x0 = base_point.unwrap_or(model.space.default_base_point());
                    let u0 = initial_data.as_ref().ok_or_else(|| CliError::Config("initial_data missing".into()))?;
                    let nu_prime = lower_exponent(&model, x0).unwrap_or(1.0);
                    let opts = Theorem1Options { phi: *phi, p: *p, nu_prime };
                    full_theorem1_experiment(&model, u0, x0, times, &opts)?
                }
                (None, Some(planar)) => planar_experiment(planar)?,
                _ => return Err(CliError::Config("theorem1 needs exactly one of space and planar".into())),
            };
            theorem1(cfg, &series, *rate_window)
        }
        ExperimentSpec::Counterexample { space, x1, x2, times, window_start, probes, control, control_probes } => {
            counterexample(cfg, space, *x1, *x2, times, *window_start, probes, control.as_ref(), *control_probes)
        }
        ExperimentSpec::AcceptanceAll {} => Ok(crate::acceptance::run_battery().into_outcome()),
    }
}

/// Far-field lower volume-growth exponent at `x0`, over the largest two
/// decades the domain allows.
fn lower_exponent(model: &Model, x0: f64) -> Result<f64, CliError> {
    let r_max = model.space.reach(x0) * 0.9;
    Ok(fit_doubling_exponents(&model.space, x0, r_max / 100.0, r_max)?.nu_prime)
}

fn kernel_accuracy(cfg: &ExperimentConfig, model: &Model, t: f64, r_max: f64, tolerance: f64) -> Result<Outcome, CliError> {
    let slice = numeric_kernel(model, 0, t)?;
    let err = euclidean_relative_error(&model.space, &slice, r_max)?;
    let mass = slice.mass();
    let n = model.space.dimension();
    let rows: Vec<Vec<f64>> = model
        .space
        .nodes()
        .iter()
        .zip(&slice.values)
        .take_while(|(r, _)| **r <= r_max)
        .map(|(&r, &h)| Ok(vec![r, h, heatlab::kernel::euclidean_kernel(n, t, r)?]))
        .collect::<heatlab::Result<_>>()?;
    let csv = Artifact::csv("kernel.csv", "numeric kernel against the closed form", cfg.seed, |o| {
        write_table(o, &["r", "numeric", "exact"], &rows)
    })?;
    Ok(Outcome {
        checks: vec![
            Check::new("relative_error", "relative sup error against the closed form", &format!("≤ {tolerance:e}"), true, err <= tolerance)
                .with("relative_error", err),
            Check::new("mass", "kernel mass", "[1 − 1e-6, 1]", true, (mass - 1.0).abs() <= KERNEL_MASS_TOLERANCE)
                .with("mass", mass),
        ],
        artifacts: vec![csv],
    })
}

fn estimate_check(name: &str, statement: &str, rep: &EstimateReport) -> Check {
    let mut c = Check::new(name, statement, "inequality at every sample with 1% margin", rep.mode == CheckMode::Asserted, rep.pass);
    for (k, v) in &rep.constants {
        c = c.with(k, *v);
    }
    if let Some(r2) = rep.r_squared {
        c = c.with("r_squared", r2);
    }
    c.with("max_ratio", rep.max_ratio)
}

fn estimates(
    cfg: &ExperimentConfig,
    model: &Model,
    source: usize,
    times: &[f64],
    d_list: &[f64],
    deltas: &[f64],
    opts: &EstimateOptions,
) -> Result<Outcome, CliError> {
    let mid = times[times.len() / 2];
    let reports = vec![
        check_two_sided(model, source, times, opts)?,
        check_upper(model, source, times, opts)?,
        check_time_derivative(model, source, mid, d_list)?,
        check_gradient(model, source, mid, d_list)?,
        estimate_holder(model, source, mid, deltas)?,
    ];
    let statements = [
        ("two_sided", "two-sided Gaussian bounds on V(x,√t) h_t"),
        ("upper", "Gaussian upper bound on V(x,√t) h_t"),
        ("time_derivative", "Gaussian bound on t V(x,√t) ∂_t h_t"),
        ("gradient", "Gaussian bound on √t V(x,√t) ∇h_t"),
        ("holder", "Hölder continuity of h_t with exponent θ"),
    ];
    let checks = reports.iter().zip(statements).map(|(r, (n, s))| estimate_check(n, s, r)).collect();
    let summary = Artifact::csv("estimates.csv", "kernel estimate battery", cfg.seed, |o| {
        use std::io::Write;
        writeln!(o, "estimate,mode,pass,max_ratio,r_squared,constants")?;
        for (r, (name, _)) in reports.iter().zip(statements) {
            let constants: Vec<String> = r.constants.iter().map(|(k, v)| format!("{k}={}", fmt_sci(*v))).collect();
            writeln!(
                o,
                "{name},{},{},{},{},{}",
                if r.mode == CheckMode::Asserted { "asserted" } else { "report_only" },
                r.pass,
                fmt_sci(r.max_ratio),
                r.r_squared.map(fmt_sci).unwrap_or_default(),
                constants.join(";")
            )?;
        }
        Ok(())
    })?;
    Ok(Outcome { checks, artifacts: vec![summary, Artifact::json("estimates.json", &reports)?] })
}

fn lemma1(
    cfg: &ExperimentConfig,
    model: &Model,
    center: f64,
    c: f64,
    t: f64,
    r: f64,
    tail_range: [f64; 2],
) -> Result<Outcome, CliError> {
    let values = lemma1_integrals(model, center, c, t, r)?;
    let fit = lemma1_tail_slope(model, center, c, t, tail_range[0], tail_range[1], 17)?;
    let samples: Vec<f64> = (0..17)
        .map(|k| tail_range[0] * (tail_range[1] / tail_range[0]).powf(k as f64 / 16.0))
        .collect();
    let rows: Vec<Vec<f64>> =
        samples.iter().map(|&s| vec![s, lemma1_tail(model, center, c, t, s * t.sqrt())]).collect();
    let monotone = rows.windows(2).all(|w| w[1][1] <= w[0][1]);
    let csv = Artifact::csv("lemma1_tail.csv", "Gaussian integral outside B(x₀, r)", cfg.seed, |o| {
        write_table(o, &["r_over_sqrt_t", "lhs_intr"], &rows)
    })?;
    let mut check = Check::new("tail_monotone", "tail integral is non-increasing in r", "non-increasing", true, monotone)
        .with("lhs_int", values.lhs_int)
        .with("lhs_intr", values.lhs_intr)
        .with("tail_slope", fit.slope);
    for (n, ratio) in &values.ratios {
        check = check.with(&format!("ratio_n{n}"), *ratio);
    }
    let trunc = Check::new("truncation", "integrand negligible at the domain boundary", "≤ 1e-12 of peak", false, !values.truncation_warning);
    Ok(Outcome { checks: vec![check, trunc], artifacts: vec![csv, Artifact::json("lemma1.json", &values)?] })
}

fn theorem1(cfg: &ExperimentConfig, series: &ConvergenceSeries, window: Option<[f64; 2]>) -> Result<Outcome, CliError> {
    let slack = series.interpolation_slack();
    let bounded = series.rows.iter().all(|r| r.l1_gap <= (series.initial_l1 + series.mass.abs()) * (1.0 + 1e-12));
    let split = series
        .rows
        .iter()
        .map(|r| ((r.inside_gap + r.outside_gap) - r.l1_gap).abs() / r.l1_gap.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let mut checks = vec![
        Check::new("interpolation", "Lᵖ gap ≤ L¹^{1/p} · weighted sup^{1/p′}", "relative slack ≤ 1e-6", true, slack <= 1e-6)
            .with("slack", slack),
        Check::new("l1_bound", "L¹ gap ≤ ‖u₀‖₁ + |M|", "at every t", true, bounded),
        Check::new("split", "inside + outside gap = L¹ gap", "relative ≤ 1e-12", true, split <= 1e-12).with("residual", split),
    ];
    let times = series.times();
    let [lo, hi] = window.unwrap_or([
        times.iter().copied().fold(f64::INFINITY, f64::min),
        times.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    ]);
    match rate_fit(series, lo, hi) {
        Ok(fit) => checks.push(
            Check::new("rate", "power-law decay rate of the L¹ gap", "reported", false, true)
                .with("eta", fit.eta)
                .with("r_squared", fit.r_squared),
        ),
        Err(e) => log::info!("rate fit skipped: {e}"),
    }
    let csv = Artifact::csv("series.csv", "convergence of u(t) to M h_t", cfg.seed, |o| series.write_csv(o))?;
    Ok(Outcome { checks, artifacts: vec![csv, Artifact::json("series.json", series)?] })
}

#[allow(clippy::too_many_arguments)]
fn counterexample(
    cfg: &ExperimentConfig,
    space: &heatlab::space::SpaceConfig,
    x1: f64,
    x2: f64,
    times: &[f64],
    window_start: f64,
    probes: &[f64],
    control: Option<&heatlab::space::SpaceConfig>,
    control_probes: Option<[f64; 2]>,
) -> Result<Outcome, CliError> {
    let model = cfg.model(space)?;
    let profile = harmonic_profile(&model.space)?;
    let demo = supnorm_failure_demo(&model, x1, x2, times, window_start)?;
    let mut checks = vec![Check::new(
        "plateau",
        "scaled kernel difference settles on a nonzero plateau",
        "|g| ≥ 10× noise and max|g|/min|g| ≤ 2 on the window",
        true,
        demo.verdict == Verdict::FailConfirmed,
    )
    .with("plateau", demo.plateau)
    .with("drift", demo.drift)];
    let mut artifacts = vec![
        Artifact::csv("profile.csv", "harmonic profile of the two-ended space", cfg.seed, |o| profile.write_csv(o))?,
        Artifact::csv("gap.csv", "plateau of the scaled kernel difference", cfg.seed, |o| demo.write_csv(o))?,
    ];
    let mut cch_rows = Vec::new();
    for &p in probes {
        let scan = cch_limit_scan(&model, p, times)?;
        for s in &scan.samples {
            cch_rows.push(vec![scan.probe, s.t, s.far_point, s.value]);
        }
        checks.push(
            Check::new(&format!("cch_probe_{p}"), "long-time limit of t^{n/2} h_t(x_t, probe)", "reported", false, true)
                .with("plateau", scan.plateau)
                .with("drift", scan.drift)
                .with("profile", profile.value_at(p)),
        );
    }
    if !cch_rows.is_empty() {
        artifacts.push(Artifact::csv("cch.csv", "long-time limit against the harmonic profile", cfg.seed, |o| {
            write_table(o, &["probe", "t", "x_t", "scaled_kernel"], &cch_rows)
        })?);
    }
    if let Some(control) = control {
        let cm = cfg.model(control)?;
        let [c1, c2] = control_probes.unwrap_or([1.0, 2.0]);
        let cd = supnorm_failure_demo(&cm, c1, c2, times, window_start)?;
        checks.push(
            Check::new("control", "scaled kernel difference decays on the one-ended control", "last/first ≤ 0.2", true, cd.verdict == Verdict::Decaying)
                .with("decay", cd.decay),
        );
        artifacts.push(Artifact::csv("control.csv", "scaled kernel difference on the control space", cfg.seed, |o| cd.write_csv(o))?);
    }
    Ok(Outcome { checks, artifacts })
}
