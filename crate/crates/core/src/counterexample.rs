//! The two-ended space: harmonic profile, the long-time limit of
//! `t^{n/2} h_t(x_t, ·)`, and the resulting failure of weighted sup-norm
//! convergence, with a Euclidean control.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{HeatError, Result};
use crate::estimates::gradient_at;
use crate::io::fmt_sci;
use crate::kernel::{numeric_kernel, numeric_kernels, HeatModel};
use crate::space::SpaceSpec;

/// `|g|` must exceed this multiple of the noise floor on a plateau.
pub const PLATEAU_NOISE_FACTOR: f64 = 10.0;
/// Largest admissible `max|g| / min|g|` on a plateau.
pub const PLATEAU_MAX_DRIFT: f64 = 2.0;
/// Control runs must shrink to this fraction of their first value.
pub const CONTROL_DECAY: f64 = 0.2;

/// `Φ(r) = ∫_{−L}^{r} A⁻¹ / ∫_{−L}^{L} A⁻¹` on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicProfile {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    /// `∫_{−L}^{L} A⁻¹`.
    pub normalization: f64,
}

impl HarmonicProfile {
    /// Piecewise-linear interpolation.
    pub fn value_at(&self, r: f64) -> f64 {
        let n = self.nodes.len();
        if r <= self.nodes[0] {
            return self.values[0];
        }
        if r >= self.nodes[n - 1] {
            return self.values[n - 1];
        }
        let k = self.nodes.partition_point(|&x| x <= r) - 1;
        let s = (r - self.nodes[k]) / (self.nodes[k + 1] - self.nodes[k]);
        self.values[k] + s * (self.values[k + 1] - self.values[k])
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] > w[0])
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r,phi")?;
        for (r, v) in self.nodes.iter().zip(&self.values) {
            writeln!(out, "{},{}", fmt_sci(*r), fmt_sci(*v))?;
        }
        Ok(())
    }
}

pub fn harmonic_profile(space: &SpaceSpec<f64>) -> Result<HarmonicProfile> {
    if !space.is_two_ended() {
        return Err(HeatError::InvalidParameter("harmonic profile needs a two-ended space".into()));
    }
    if space.dimension() < 3 {
        return Err(HeatError::InvalidParameter(format!(
            "harmonic profile needs n ≥ 3 (A⁻¹ is not integrable for n = {})",
            space.dimension()
        )));
    }
    let h = space.spacing();
    let inv: Vec<f64> = space.density().iter().map(|a| 1.0 / a).collect();
    let mut cumulative = Vec::with_capacity(inv.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for w in inv.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        cumulative.push(acc);
    }
    let values = cumulative.iter().map(|c| c / acc).collect();
    Ok(HarmonicProfile { nodes: space.nodes().to_vec(), values, normalization: acc })
}

/// Max over interior nodes of `|LΦ|`.
pub fn harmonicity_residual(model: &HeatModel<f64>, profile: &HarmonicProfile) -> f64 {
    let l = model.operator.apply_vec(&profile.values);
    l[1..l.len() - 1].iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// The node standing for `x_t`, nearest `+√t`.
pub fn far_point(space: &SpaceSpec<f64>, t: f64) -> usize {
    space.nearest_index(t.sqrt())
}

fn check_scan_times(model: &HeatModel<f64>, times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(HeatError::InvalidParameter("empty time list".into()));
    }
    let limit = model.space.extent() / 6.0;
    if let Some(t) = times.iter().find(|t| t.sqrt() > limit * (1.0 + 1e-12)) {
        return Err(HeatError::Precondition(format!("√t = {} exceeds L/6 = {limit}", t.sqrt())));
    }
    Ok(())
}

fn plateau_of(ts: &[f64], gs: &[f64], from: f64) -> (f64, f64) {
    let window: Vec<f64> = ts.iter().zip(gs).filter(|(t, _)| **t >= from).map(|(_, g)| *g).collect();
    if window.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    let max = window.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
    let min = window.iter().fold(f64::INFINITY, |m, g| m.min(g.abs()));
    (mean, max / min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CchSample {
    pub t: f64,
    pub far_point: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CchScan {
    pub probe: f64,
    pub samples: Vec<CchSample>,
    /// Mean over the last decade of `t`.
    pub plateau: f64,
    /// `max / min` over the last decade.
    pub drift: f64,
    pub flags: Vec<String>,
}

/// `t^{n/2} h_t(x_t, probe)` for each `t`, from one kernel run sourced at
/// the probe.
pub fn cch_limit_scan(model: &HeatModel<f64>, probe: f64, times: &[f64]) -> Result<CchScan> {
    check_scan_times(model, times)?;
    let space = &model.space;
    let half_dim = space.dimension() as f64 / 2.0;
    let source = space.nearest_index(probe);
    let slices = numeric_kernels(model, source, times)?;
    let mut flags = Vec::new();
    let mut samples = Vec::with_capacity(times.len());
    for s in &slices {
        if s.time.sqrt() < 10.0 * space.spacing() {
            flags.push(format!("x_t unresolved at t = {}", s.time));
        }
        let i = far_point(space, s.time);
        samples.push(CchSample { t: s.time, far_point: space.node(i), value: s.time.powf(half_dim) * s.values[i] });
    }
    let ts: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let gs: Vec<f64> = samples.iter().map(|s| s.value).collect();
    let t_max = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (plateau, drift) = plateau_of(&ts, &gs, t_max / 10.0);
    Ok(CchScan { probe: space.node(source), samples, plateau, drift, flags })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// `g` settles on a nonzero plateau: weighted sup convergence fails.
    FailConfirmed,
    /// `g` decays: the control behaves as convergence predicts.
    Decaying,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::FailConfirmed => "fail_confirmed",
            Verdict::Decaying => "decaying",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSample {
    pub t: f64,
    pub far_point: f64,
    /// `t^{n/2} (h_t(x_t, x₁) − h_t(x_t, x₂))`.
    pub g: f64,
    pub noise_floor: f64,
}

/// `g(t)` with kernels sourced at `x₁` and `x₂` (symmetry puts `x_t` in the
/// second slot). The noise floor is `t^{n/2}` times the peak kernel value
/// times the kernel mass residual, never below machine precision.
pub fn scaled_difference_series(model: &HeatModel<f64>, x1: f64, x2: f64, times: &[f64]) -> Result<Vec<GapSample>> {
    check_scan_times(model, times)?;
    let space = &model.space;
    let half_dim = space.dimension() as f64 / 2.0;
    let (s1, s2) = (space.nearest_index(x1), space.nearest_index(x2));
    let first = numeric_kernels(model, s1, times)?;
    let second = if s1 == s2 { first.clone() } else { numeric_kernels(model, s2, times)? };
    Ok(first
        .iter()
        .zip(&second)
        .map(|(a, b)| {
            let t = a.time;
            let i = far_point(space, t);
            let scale = t.powf(half_dim);
            let residual = ((a.mass() - 1.0).abs() + (b.mass() - 1.0).abs()).max(f64::EPSILON);
            GapSample {
                t,
                far_point: space.node(i),
                g: scale * (a.values[i] - b.values[i]),
                noise_floor: scale * residual * a.max_value().max(b.max_value()),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureDemo {
    pub x1: f64,
    pub x2: f64,
    pub window_start: f64,
    pub samples: Vec<GapSample>,
    /// Mean of `g` over the window.
    pub plateau: f64,
    /// `max|g| / min|g|` over the window.
    pub drift: f64,
    /// `|g(t_last)| / |g(t_first)|`.
    pub decay: f64,
    pub verdict: Verdict,
    pub control: bool,
}

impl FailureDemo {
    pub const CSV_HEADER: &'static str = "t,g,plateau_estimate,noise_floor,verdict";

    /// Rows carry the mean of `g` over `[t/10, t]` as the running plateau.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for s in &self.samples {
            let running: Vec<f64> =
                self.samples.iter().filter(|o| o.t >= s.t / 10.0 && o.t <= s.t).map(|o| o.g).collect();
            let plateau = running.iter().sum::<f64>() / running.len() as f64;
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt_sci(s.t),
                fmt_sci(s.g),
                fmt_sci(plateau),
                fmt_sci(s.noise_floor),
                self.verdict.as_str()
            )?;
        }
        Ok(())
    }
}

/// Runs `g(t)` and classifies it over `t ≥ window_start`.
///
/// On a two-ended space `x₁, x₂` must lie in the neck region `|r| ≤ 2R`
/// with `Φ(x₁) ≠ Φ(x₂)`, and the verdict is `FailConfirmed` when
/// `|g| ≥ 10×` noise and `max|g|/min|g| ≤ 2` on the window. On a one-ended
/// space the run is a control, `Decaying` when the last `|g|` is at most
/// `0.2` of the first.
pub fn supnorm_failure_demo(
    model: &HeatModel<f64>,
    x1: f64,
    x2: f64,
    times: &[f64],
    window_start: f64,
) -> Result<FailureDemo> {
    let space = &model.space;
    let control = !space.is_two_ended();
    if !control {
        let neck = 2.0 * space.neck_radius().unwrap_or(1.0);
        if x1.abs() > neck || x2.abs() > neck {
            return Err(HeatError::Precondition(format!("probes must lie within |r| ≤ {neck}")));
        }
        let profile = harmonic_profile(space)?;
        if profile.value_at(x1) == profile.value_at(x2) {
            return Err(HeatError::Precondition("probes must have distinct harmonic profile values".into()));
        }
    }
    let samples = scaled_difference_series(model, x1, x2, times)?;
    let window: Vec<&GapSample> = samples.iter().filter(|s| s.t >= window_start).collect();
    if window.is_empty() {
        return Err(HeatError::InvalidParameter(format!("no times at or after {window_start}")));
    }
    if !control {
        if let Some(s) = window.iter().find(|s| s.noise_floor > s.g.abs()) {
            return Err(HeatError::NumericalAbort(format!(
                "noise floor {:.3e} exceeds |g| = {:.3e} at t = {}",
                s.noise_floor,
                s.g.abs(),
                s.t
            )));
        }
    }
    let ts: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let gs: Vec<f64> = samples.iter().map(|s| s.g).collect();
    let (plateau, drift) = plateau_of(&ts, &gs, window_start);
    let decay = (samples[samples.len() - 1].g / samples[0].g).abs();
    let verdict = if control {
        if decay <= CONTROL_DECAY {
            Verdict::Decaying
        } else {
            Verdict::Inconclusive
        }
    } else if window.iter().all(|s| s.g.abs() >= PLATEAU_NOISE_FACTOR * s.noise_floor) && drift <= PLATEAU_MAX_DRIFT {
        Verdict::FailConfirmed
    } else {
        Verdict::Inconclusive
    };
    Ok(FailureDemo {
        x1: space.node(space.nearest_index(x1)),
        x2: space.node(space.nearest_index(x2)),
        window_start,
        samples,
        plateau,
        drift,
        decay,
        verdict,
        control,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeckGradientSample {
    pub t: f64,
    /// `t^{n/2} sup_{|y| ≤ 2R} |∇_y h_t(x_t, y)|`.
    pub scaled_sup: f64,
}

/// Gradient of the kernel across the neck seen from `x_t`. One kernel run
/// per time, sourced at `x_t`.
pub fn neck_gradient_scan(model: &HeatModel<f64>, times: &[f64]) -> Result<Vec<NeckGradientSample>> {
    check_scan_times(model, times)?;
    let space = &model.space;
    let neck = 2.0 * space.neck_radius().ok_or_else(|| HeatError::InvalidParameter("space has no neck".into()))?;
    let half_dim = space.dimension() as f64 / 2.0;
    times
        .iter()
        .map(|&t| {
            let slice = numeric_kernel(model, far_point(space, t), t)?;
            let sup = (0..space.len())
                .filter(|&i| space.node(i).abs() <= neck)
                .map(|i| gradient_at(model, &slice.values, i))
                .fold(0.0, f64::max);
            Ok(NeckGradientSample { t, scaled_sup: t.powf(half_dim) * sup })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dumbbell(extent: f64, points: usize) -> HeatModel<f64> {
        HeatModel::new(SpaceSpec::dumbbell(3, 1.0, extent, points).unwrap()).unwrap()
    }

    // finite-domain closed form for A = 4π(1 + r²)
    fn phi_exact(r: f64, l: f64) -> f64 {
        (r.atan() + l.atan()) / (2.0 * l.atan())
    }

    #[test]
    fn profile_matches_arctangent() {
        let space = SpaceSpec::dumbbell(3, 1.0, 200.0, 20000).unwrap();
        let p = harmonic_profile(&space).unwrap();
        assert_eq!(p.values[0], 0.0);
        assert_eq!(*p.values.last().unwrap(), 1.0);
        assert!(p.is_strictly_increasing());
        for (&r, &v) in p.nodes.iter().zip(&p.values).step_by(97) {
            assert!((v - phi_exact(r, 200.0)).abs() < 2e-5, "r = {r}");
        }
        assert!((p.value_at(0.0) - 0.5).abs() < 1e-12);
        let wide = p.value_at(2.0) - p.value_at(-2.0);
        assert!((wide - 2.0 * 2f64.atan() / (2.0 * 200f64.atan())).abs() < 2e-5);
        // on the infinite line the same difference is 2 arctan 2 / π
        assert!((2.0 * 2f64.atan() / std::f64::consts::PI - 0.7048).abs() < 1e-4);
        assert!((phi_exact(2.0, 1e12) / phi_exact(4.0, 1e12) - 0.9245).abs() < 1e-3);
    }

    #[test]
    fn profile_rejects_low_dimension_and_one_end() {
        assert!(harmonic_profile(&SpaceSpec::dumbbell(2, 1.0, 50.0, 1000).unwrap()).is_err());
        assert!(harmonic_profile(&SpaceSpec::euclidean(3, 50.0, 1000).unwrap()).is_err());
    }

    #[test]
    fn profile_is_discretely_harmonic() {
        let m = dumbbell(60.0, 3000);
        let p = harmonic_profile(&m.space).unwrap();
        let h = m.space.spacing();
        assert!(harmonicity_residual(&m, &p) <= 1e-6 / (h * h));
    }

    #[test]
    fn identical_sources_give_zero() {
        let m = dumbbell(60.0, 3000);
        let s = scaled_difference_series(&m, 1.0, 1.0, &[16.0, 64.0]).unwrap();
        assert!(s.iter().all(|x| x.g == 0.0));
        assert!(supnorm_failure_demo(&m, 1.0, 1.0, &[16.0, 64.0], 16.0).is_err());
    }

    #[test]
    fn gap_is_antisymmetric() {
        let m = dumbbell(60.0, 3000);
        let a = scaled_difference_series(&m, 1.0, -1.0, &[25.0, 64.0]).unwrap();
        let b = scaled_difference_series(&m, -1.0, 1.0, &[25.0, 64.0]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.g, -y.g);
        }
    }

    #[test]
    fn mirrored_scan_is_reproduced() {
        let m = dumbbell(60.0, 3000);
        let times = [16.0, 36.0];
        let a = cch_limit_scan(&m, 1.0, &times).unwrap();
        let n = m.space.len();
        let src = m.space.nearest_index(-1.0);
        assert_eq!(src, n - 1 - m.space.nearest_index(1.0));
        let slices = numeric_kernels(&m, src, &times).unwrap();
        for (s, k) in a.samples.iter().zip(&slices) {
            let i = n - 1 - far_point(&m.space, s.t);
            let mirrored = s.t.powf(1.5) * k.values[i];
            assert!((mirrored - s.value).abs() <= 1e-12 * s.value.abs());
        }
    }

    #[test]
    fn plateau_on_the_dumbbell() {
        let m = dumbbell(150.0, 7500);
        let times = [50.0, 100.0, 141.0, 200.0, 283.0, 400.0];
        let demo = supnorm_failure_demo(&m, 1.0, -1.0, &times, 100.0).unwrap();
        assert_eq!(demo.verdict, Verdict::FailConfirmed, "{demo:?}");
        assert!(demo.plateau > 0.0);
        let mut buf = Vec::new();
        demo.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(FailureDemo::CSV_HEADER));
        assert_eq!(text.lines().count(), times.len() + 1);
    }

    #[test]
    fn euclidean_control_decays() {
        let m = HeatModel::new(SpaceSpec::euclidean(3, 150.0, 7500).unwrap()).unwrap();
        let demo = supnorm_failure_demo(&m, 1.0, 2.0, &[50.0, 100.0, 200.0, 400.0], 100.0).unwrap();
        assert!(demo.control);
        assert!(demo.decay <= 0.2, "{}", demo.decay);
        assert_eq!(demo.verdict, Verdict::Decaying);
    }

    #[test]
    fn cch_probes_follow_profile() {
        let m = dumbbell(150.0, 7500);
        let times = [50.0, 100.0, 200.0, 400.0];
        let plateau = |x: f64| cch_limit_scan(&m, x, &times).unwrap().plateau;
        let (p2, p4) = (plateau(2.0), plateau(4.0));
        let profile = harmonic_profile(&m.space).unwrap();
        let expected = profile.value_at(2.0) / profile.value_at(4.0);
        assert!((p2 / p4 / expected - 1.0).abs() < 0.15, "{} vs {expected}", p2 / p4);
        let deep = cch_limit_scan(&m, -20.0, &[100.0, 200.0, 400.0]).unwrap();
        assert!(deep.plateau < 0.2 * p4, "{} {p4}", deep.plateau);
        let (f1, f2) = (plateau(8.0), plateau(10.0));
        assert!((f1 / f2 - 1.0).abs() < 0.1);
    }

    #[test]
    fn scan_preconditions() {
        let m = dumbbell(60.0, 3000);
        assert!(cch_limit_scan(&m, 1.0, &[200.0]).is_err());
        let scan = cch_limit_scan(&m, 1.0, &[0.1, 1.0]).unwrap();
        assert!(!scan.flags.is_empty());
    }

    #[test]
    fn neck_gradient_stays_bounded_below() {
        let m = dumbbell(150.0, 7500);
        let scan = neck_gradient_scan(&m, &[50.0, 100.0, 200.0, 400.0]).unwrap();
        let max = scan.iter().map(|s| s.scaled_sup).fold(0.0, f64::max);
        let min = scan.iter().map(|s| s.scaled_sup).fold(f64::INFINITY, f64::min);
        assert!(min > 0.5 * max, "{scan:?}");
    }
}
