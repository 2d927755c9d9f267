//! The acceptance battery: ten criteria with fixed parameters, thresholds
//! and output files.

use std::collections::BTreeMap;
use std::time::Instant;

use heatlab::asymptotics::{concentration_sweep, rate_fit, Phi};
use heatlab::counterexample::{cch_limit_scan, harmonic_profile, supnorm_failure_demo, Verdict};
use heatlab::estimates::{check_time_derivative, check_two_sided, estimate_holder, lemma1_integrals, lemma1_tail, lemma1_tail_slope, EstimateOptions};
use heatlab::evolve::TimeSchedule;
use heatlab::io::{fmt_sci, write_table};
use heatlab::kernel::{euclidean_kernel, euclidean_relative_error, numeric_kernel, semigroup_check, symmetry_check};
use heatlab::planar::{planar_experiment, PlanarConfig};
use heatlab::{Model, Space};
use rayon::prelude::*;

use crate::error::CliError;
use crate::output::{Artifact, Check, Outcome};

/// Seed of every sampled quantity in the battery.
pub const ACCEPTANCE_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub pass: bool,
    pub measured: BTreeMap<String, f64>,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    fn new(id: u8, title: &'static str) -> Self {
        CriterionResult { id, title, pass: true, measured: BTreeMap::new(), detail: String::new(), seconds: 0.0 }
    }

    /// Records `value` and folds `ok` into the verdict, noting the failed
    /// condition.
    fn require(&mut self, key: &str, value: f64, ok: bool, condition: &str) {
        self.measured.insert(key.to_string(), value);
        if !ok {
            self.pass = false;
            if !self.detail.is_empty() {
                self.detail.push_str("; ");
            }
            self.detail.push_str(&format!("{key} = {value:.6e} violates {condition}"));
        }
    }

    fn record(&mut self, key: &str, value: f64) {
        self.measured.insert(key.to_string(), value);
    }

    fn failed(id: u8, title: &'static str, err: &CliError) -> Self {
        CriterionResult { pass: false, detail: err.to_string(), ..Self::new(id, title) }
    }

    /// One summary line.
    pub fn line(&self) -> String {
        let values: Vec<String> = self.measured.iter().map(|(k, v)| format!("{k}={v:.6}")).collect();
        let mut s = format!(
            "criterion {:>2} {:<26} {}  [{:.2}s] {}",
            self.id,
            self.title,
            if self.pass { "PASS" } else { "FAIL" },
            self.seconds,
            values.join(" ")
        );
        if !self.detail.is_empty() {
            s.push_str(&format!("  ({})", self.detail));
        }
        s
    }
}

type JobOutput = (Vec<CriterionResult>, Vec<Artifact>);

struct Job {
    ids: &'static [(u8, &'static str)],
    run: fn() -> Result<JobOutput, CliError>,
}

const JOBS: &[Job] = &[
    Job { ids: &[(1, "kernel accuracy")], run: kernel_accuracy },
    Job { ids: &[(2, "structural identities")], run: structural_identities },
    Job { ids: &[(3, "estimate battery")], run: estimate_battery },
    Job { ids: &[(4, "gaussian integrals")], run: gaussian_integrals },
    Job { ids: &[(5, "concentration")], run: concentration },
    Job { ids: &[(6, "convergence rate"), (7, "weighted sup gap")], run: planar_gaps },
    Job { ids: &[(8, "two-ended counterexample")], run: counterexample },
    Job { ids: &[(9, "solver order")], run: solver_order },
];

fn euclid(n: u32, extent: f64, points: usize) -> Result<Model, CliError> {
    Ok(Model::new(Space::euclidean(n, extent, points)?)?)
}

fn runtime(c: &mut CriterionResult, start: Instant, limit_s: f64) {
    let s = start.elapsed().as_secs_f64();
    c.seconds = s;
    if s > limit_s {
        c.pass = false;
        c.detail.push_str(&format!("runtime {s:.1}s exceeds {limit_s}s"));
    }
}

/// Criterion 1: the plane, t = 1, against `(4πt)⁻¹ e^{−r²/4t}` on `r ≤ 4`.
fn kernel_accuracy() -> Result<JobOutput, CliError> {
    let start = Instant::now();
    let mut c = CriterionResult::new(1, "kernel accuracy");
    let model = euclid(2, 40.0, 4000)?;
    let slice = numeric_kernel(&model, 0, 1.0)?;
    let err = euclidean_relative_error(&model.space, &slice, 4.0)?;
    c.require("relative_error", err, err <= 1e-3, "≤ 1e-3");
    runtime(&mut c, start, 60.0);
    let rows: Vec<Vec<f64>> = model
        .space
        .nodes()
        .iter()
        .zip(&slice.values)
        .take_while(|(r, _)| **r <= 4.0)
        .step_by(10)
        .map(|(&r, &h)| Ok(vec![r, h, euclidean_kernel(2, 1.0, r)?]))
        .collect::<heatlab::Result<_>>()?;
    let csv = Artifact::csv("c01_kernel.csv", "numeric kernel against the closed form", ACCEPTANCE_SEED, |o| {
        write_table(o, &["r", "numeric", "exact"], &rows)
    })?;
    Ok((vec![c], vec![csv]))
}

/// Criterion 2: mass, symmetry and semigroup residuals on the plane (t = s = 1)
/// and the dumbbell (t = s = 4).
fn structural_identities() -> Result<JobOutput, CliError> {
    let start = Instant::now();
    let mut c = CriterionResult::new(2, "structural identities");
    let plane = euclid(2, 40.0, 4000)?;
    let dumbbell = Model::new(Space::dumbbell(3, 1.0, 60.0, 6000)?)?;
    let neck = dumbbell.space.nearest_index(0.0);
    let mut rows = Vec::new();
    for (label, model, source, t) in [("plane", &plane, 0, 1.0), ("dumbbell", &dumbbell, neck, 4.0)] {
        let mass = numeric_kernel(model, source, t)?.mass();
        let sym = symmetry_check(model, t, 8, ACCEPTANCE_SEED)?;
        let semi = semigroup_check(model, t, t, source)?;
        c.require(&format!("{label}_mass_defect"), 1.0 - mass, (0.0..=1e-6).contains(&(1.0 - mass)), "mass ∈ [1 − 1e-6, 1]");
        c.require(&format!("{label}_symmetry"), sym, sym <= 1e-8, "≤ 1e-8");
        c.require(&format!("{label}_semigroup"), semi, semi <= 3e-3, "≤ 3e-3");
        rows.push(vec![t, mass, sym, semi]);
    }
    runtime(&mut c, start, 120.0);
    let csv = Artifact::csv("c02_structure.csv", "mass, symmetry and semigroup identities (plane, dumbbell)", ACCEPTANCE_SEED, |o| {
        write_table(o, &["t", "mass", "symmetry_residual", "semigroup_residual"], &rows)
    })?;
    Ok((vec![c], vec![csv]))
}

/// Criterion 3: two-sided fit, time derivative and Hölder exponent on the
/// plane.
fn estimate_battery() -> Result<JobOutput, CliError> {
    let start = Instant::now();
    let mut c = CriterionResult::new(3, "estimate battery");
    let model = euclid(2, 60.0, 6000)?;
    let opts = EstimateOptions { seed: ACCEPTANCE_SEED, ..Default::default() };
    let two = check_two_sided(&model, 0, &[1.0, 4.0, 16.0], &opts)?;
    let (icpt, slope, r2) = (two.constant("intercept"), two.constant("slope"), two.r_squared.unwrap_or(f64::NAN));
    c.require("intercept", icpt, (icpt - 0.25).abs() <= 0.01, "0.25 ± 0.01");
    c.require("slope", slope, (slope + 0.25).abs() <= 0.01, "−0.25 ± 0.01");
    c.require("r_squared", r2, r2 >= 0.99, "≥ 0.99");
    let td = check_time_derivative(&model, 0, 4.0, &[0.0, 1.0, 2.0, 4.0, 8.0])?;
    let scaled = td.constant("scaled_at_origin");
    c.require("time_derivative_scaled", scaled, (scaled - 0.25).abs() <= 0.01, "0.25 ± 0.01");
    let deltas: Vec<f64> = (0..6).map(|k| 0.02 * 2f64.powi(k)).collect();
    let holder = estimate_holder(&model, 0, 4.0, &deltas)?;
    let theta = holder.constant("theta");
    c.require("theta", theta, (0.9..=1.05).contains(&theta), "[0.9, 1.05]");
    runtime(&mut c, start, f64::INFINITY);
    let csv = Artifact::csv("c03_estimates.csv", "estimate battery on the plane", ACCEPTANCE_SEED, |o| {
        use std::io::Write;
        writeln!(o, "estimate,constant,value")?;
        for rep in [&two, &td, &holder] {
            let name = serde_json::to_value(rep.estimate).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            for (k, v) in &rep.constants {
                writeln!(o, "{name},{k},{}", fmt_sci(*v))?;
            }
        }
        Ok(())
    })?;
    Ok((vec![c], vec![csv]))
}

/// Criterion 4: Gaussian integral over the plane and decay of its tail.
fn gaussian_integrals() -> Result<JobOutput, CliError> {
    let start = Instant::now();
    let mut c = CriterionResult::new(4, "gaussian integrals");
    let model = euclid(2, 40.0, 4000)?;
    let v = lemma1_integrals(&model, 0.0, 0.25, 1.0, 1.0)?;
    c.require("full_integral", v.lhs_int, (v.lhs_int - 4.0).abs() <= 0.02, "4.00 ± 0.02");
    let fit = lemma1_tail_slope(&model, 0.0, 0.25, 1.0, 2.0, 10.0, 17)?;
    c.require("tail_slope", fit.slope, fit.slope <= -4.0, "≤ −4");
    runtime(&mut c, start, 60.0);
    let rows: Vec<Vec<f64>> = (0..17)
        .map(|k| {
            let s = 2.0 * 5f64.powf(k as f64 / 16.0);
            vec![s, lemma1_tail(&model, 0.0, 0.25, 1.0, s)]
        })
        .collect();
    let csv = Artifact::csv("c04_gaussian_tail.csv", "Gaussian integral outside B(0, r)", ACCEPTANCE_SEED, |o| {
        write_table(o, &["r_over_sqrt_t", "lhs_intr"], &rows)
    })?;
    Ok((vec![c], vec![csv]))
}

/// Criterion 5: kernel mass inside `t^{1/4} ≤ r ≤ t^{3/4}` on the plane.
fn concentration() -> Result<JobOutput, CliError> {
    let start = Instant::now();
    let mut c = CriterionResult::new(5, "concentration");
    let model = euclid(2, 1000.0, 10000)?;
    let sweep = concentration_sweep(&model, 0.0, &[1e2, 1e3, 1e4], &Phi::default(), 2.0)?;
    let first = sweep.rows[0].mass_in;
    let last = sweep.rows[2].mass_in;
    c.require("mass_in_t1e2", first, (first - 0.893).abs() <= 0.01, "0.893 ± 0.01");
    c.require("mass_in_t1e4", last, last >= 0.99, "≥ 0.99");
    c.require("increasing", sweep.mass_in_increasing as u8 as f64, sweep.mass_in_increasing, "monotone increase");
    runtime(&mut c, start, f64::INFINITY);
    let rows: Vec<Vec<f64>> = sweep.rows.iter().map(|r| vec![r.t, r.phi, r.mass_in, r.mass_out]).collect();
    let csv = Artifact::csv("c05_concentration.csv", "kernel mass in the critical annulus", ACCEPTANCE_SEED, |o| {
        write_table(o, &["t", "phi", "mass_in", "mass_out"], &rows)
    })?;
    Ok((vec![c], vec![csv]))
}

/// Criteria 6 and 7: a unit triangle bump of radius 2 centred at distance 3
/// on the plane, closed-form kernel on a 400² grid.
fn planar_gaps() -> Result<JobOutput, CliError> {
    let start = Instant::now();
    let mut rate = CriterionResult::new(6, "convergence rate");
    let mut sup = CriterionResult::new(7, "weighted sup gap");
    let series = planar_experiment(&PlanarConfig::default())?;
    let fit = rate_fit(&series, 1e2, 1e4)?;
    rate.require("eta", fit.eta, (0.4..=0.6).contains(&fit.eta), "[0.4, 0.6]");
    rate.record("r_squared", fit.r_squared);
    let w = |t: f64| series.row_at(t).map(|r| r.wsup_gap).unwrap_or(f64::NAN);
    let ratio = w(1e4) / w(1e2);
    sup.require("wsup_ratio", ratio, ratio <= 0.1, "≤ 0.1");
    let slack = series.interpolation_slack();
    sup.require("interpolation_slack", slack, slack <= 1e-6, "≤ 1e-6");
    runtime(&mut rate, start, 300.0);
    sup.seconds = rate.seconds;
    let csv = Artifact::csv("c06_c07_planar_series.csv", "convergence of u(t) to M h_t on the plane", ACCEPTANCE_SEED, |o| {
        series.write_csv(o)
    })?;
    Ok((vec![rate, sup], vec![csv]))
}

/// Criterion 8: plateau on the dumbbell, decay on the Euclidean control,
/// and the long-time limit against the harmonic profile.
fn counterexample() -> Result<JobOutput, CliError> {
    let start = Instant::now();
    let mut c = CriterionResult::new(8, "two-ended counterexample");
    let times: Vec<f64> = (0..7).map(|k| 50.0 * 2f64.powf(k as f64 / 2.0)).collect();
    let dumbbell = Model::new(Space::dumbbell(3, 1.0, 200.0, 20000)?)?;
    let demo = supnorm_failure_demo(&dumbbell, 1.0, -1.0, &times, 100.0)?;
    let noise_margin = demo
        .samples
        .iter()
        .filter(|s| s.t >= 100.0)
        .map(|s| s.g.abs() / s.noise_floor)
        .fold(f64::INFINITY, f64::min);
    c.require("plateau", demo.plateau, demo.plateau > 0.0, "positive");
    c.require("noise_margin", noise_margin, noise_margin >= 10.0, "≥ 10");
    c.require("drift", demo.drift, demo.drift <= 2.0, "≤ 2");
    c.require("verdict_fail_confirmed", (demo.verdict == Verdict::FailConfirmed) as u8 as f64, demo.verdict == Verdict::FailConfirmed, "plateau verdict");

    let plane = euclid(3, 200.0, 20000)?;
    let control = supnorm_failure_demo(&plane, 1.0, 2.0, &times, 100.0)?;
    c.require("control_decay", control.decay, control.decay <= 0.2, "≤ 0.2");

    let profile = harmonic_profile(&dumbbell.space)?;
    let p2 = cch_limit_scan(&dumbbell, 2.0, &times)?;
    let p4 = cch_limit_scan(&dumbbell, 4.0, &times)?;
    let measured = p2.plateau / p4.plateau;
    let expected = profile.value_at(2.0) / profile.value_at(4.0);
    c.record("profile_ratio", expected);
    c.require("cch_ratio", measured, (measured / expected - 1.0).abs() <= 0.15, "within 15% of Φ(2)/Φ(4)");
    c.require("cch_ratio_vs_0_827", measured / 0.827, (measured / 0.827 - 1.0).abs() <= 0.15, "within 15% of 0.827");
    runtime(&mut c, start, 600.0);

    let gap = Artifact::csv("c08_gap.csv", "plateau of t^{3/2}(h_t(x_t,1) − h_t(x_t,−1)) on the dumbbell", ACCEPTANCE_SEED, |o| demo.write_csv(o))?;
    let ctrl = Artifact::csv("c08_control.csv", "scaled kernel difference on Euclidean space", ACCEPTANCE_SEED, |o| control.write_csv(o))?;
    let rows: Vec<Vec<f64>> = p2
        .samples
        .iter()
        .zip(&p4.samples)
        .map(|(a, b)| vec![a.t, a.far_point, a.value, b.value])
        .collect();
    let cch = Artifact::csv("c08_cch.csv", "t^{3/2} h_t(x_t, x) at x = 2 and x = 4", ACCEPTANCE_SEED, |o| {
        write_table(o, &["t", "x_t", "probe_2", "probe_4"], &rows)
    })?;
    Ok((vec![c], vec![gap, ctrl, cch]))
}

/// Criterion 9: error of criterion 1 at (N, 128 steps/decade) against
/// (2N, 256 steps/decade); `dt_min = h²/4` halves `dt` with `h`.
fn solver_order() -> Result<JobOutput, CliError> {
    let start = Instant::now();
    let mut c = CriterionResult::new(9, "solver order");
    let error_at = |points: usize, steps: usize| -> Result<f64, CliError> {
        let space = Space::euclidean(2, 40.0, points)?;
        let schedule = TimeSchedule::with_steps(&space, steps);
        let model = Model::with_schedule(space, schedule)?;
        let slice = numeric_kernel(&model, 0, 1.0)?;
        Ok(euclidean_relative_error(&model.space, &slice, 4.0)?)
    };
    let coarse = error_at(4000, 128)?;
    let fine = error_at(8000, 256)?;
    c.record("coarse_error", coarse);
    c.record("fine_error", fine);
    let ratio = coarse / fine;
    c.require("reduction", ratio, (3.0..=5.0).contains(&ratio), "[3, 5]");
    runtime(&mut c, start, f64::INFINITY);
    let csv = Artifact::csv("c09_order.csv", "error reduction under halving h and dt", ACCEPTANCE_SEED, |o| {
        write_table(o, &["points", "steps_per_decade", "relative_error"], &[vec![4000.0, 128.0, coarse], vec![8000.0, 256.0, fine]])
    })?;
    Ok((vec![c], vec![csv]))
}

/// Criteria 1 to 9, jobs in parallel, results in criterion order.
pub fn run_criteria() -> JobOutput {
    let outputs: Vec<JobOutput> = JOBS
        .par_iter()
        .map(|job| match (job.run)() {
            Ok(out) => out,
            Err(e) => (job.ids.iter().map(|(id, title)| CriterionResult::failed(*id, title, &e)).collect(), Vec::new()),
        })
        .collect();
    let mut results = Vec::new();
    let mut artifacts = Vec::new();
    for (r, a) in outputs {
        results.extend(r);
        artifacts.extend(a);
    }
    (results, artifacts)
}

#[derive(Debug, Clone)]
pub struct BatteryRun {
    pub criteria: Vec<CriterionResult>,
    pub artifacts: Vec<Artifact>,
}

/// All ten criteria; the last reruns the first nine and compares every CSV
/// body byte for byte.
pub fn run_battery() -> BatteryRun {
    let (mut criteria, artifacts) = run_criteria();
    let start = Instant::now();
    let (_, again) = run_criteria();
    let mut det = CriterionResult::new(10, "determinism");
    let mismatched = artifacts
        .iter()
        .filter(|a| !again.iter().any(|b| b.name == a.name && b.body() == a.body()))
        .count();
    det.record("files", artifacts.len() as f64);
    let same_set = artifacts.len() == again.len();
    det.require("mismatched_files", mismatched as f64, mismatched == 0 && same_set && !artifacts.is_empty(), "identical CSV bodies");
    det.seconds = start.elapsed().as_secs_f64();
    criteria.push(det);
    BatteryRun { criteria, artifacts }
}

impl BatteryRun {
    pub fn all_pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }

    pub fn into_outcome(self) -> Outcome {
        let checks = self
            .criteria
            .iter()
            .map(|c| {
                let mut check = Check::new(&format!("criterion_{:02}", c.id), c.title, if c.detail.is_empty() { "met" } else { &c.detail }, true, c.pass);
                for (k, v) in &c.measured {
                    check = check.with(k, *v);
                }
                check.with("seconds", c.seconds)
            })
            .collect();
        Outcome { checks, artifacts: self.artifacts }
    }
}
