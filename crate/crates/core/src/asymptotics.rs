//! Long-time behaviour of solutions: the critical annulus, concentration of
//! the kernel, the gaps `u(t) − M h_t(·, x₀)` in L¹, weighted sup and
//! weighted Lᵖ, and power-law rate fits of those gaps.

use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{HeatError, Result};
use crate::fit::{fit_line, LineFit};
use crate::io::fmt_sci;
use crate::kernel::{numeric_kernels, propagate, HeatModel, KernelSlice, KERNEL_MASS_TOLERANCE};
use crate::space::SpaceSpec;

/// Largest admissible `|u|` mass fraction in the outer 2% of the domain.
pub const LEAKAGE_THRESHOLD: f64 = 1e-6;
/// Width of the band next to a truncation wall, as a fraction of the domain.
pub const LEAKAGE_BAND: f64 = 0.02;
/// Gaps below this are treated as solver noise by [`rate_fit`].
pub const NOISE_FLOOR: f64 = 1e-6;

/// Scale function of the annulus `φ(t)√t ≤ d(x, x₀) ≤ √t/φ(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Phi {
    /// `φ(t) = t^{−exponent}`.
    Power { exponent: f64 },
    /// A fixed value; violates `φ → 0` and is only for bookkeeping runs.
    Constant { value: f64 },
}

impl Default for Phi {
    fn default() -> Self {
        Phi::Power { exponent: 0.25 }
    }
}

impl Phi {
    /// `φ(t) = t^{ε − θ/2}`.
    pub fn from_epsilon(epsilon: f64, theta: f64) -> Self {
        Phi::Power { exponent: theta / 2.0 - epsilon }
    }

    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Phi::Power { exponent } => t.powf(-exponent),
            Phi::Constant { value } => value,
        }
    }

    /// Whether `φ → 0` and `φ(t)√t → ∞`.
    pub fn satisfies_hypotheses(&self) -> bool {
        match *self {
            Phi::Power { exponent } => exponent > 0.0 && exponent < 0.5,
            Phi::Constant { .. } => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusSpec {
    pub base_point: f64,
    pub time: f64,
    pub phi: f64,
    pub inner: f64,
    pub outer: f64,
    /// Grid index ranges inside the annulus (one per side of the base point).
    pub index_ranges: Vec<Range<usize>>,
    pub hypothesis_ok: bool,
}

impl AnnulusSpec {
    pub fn contains_distance(&self, d: f64) -> bool {
        d >= self.inner && d <= self.outer
    }

    pub fn contains_index(&self, i: usize) -> bool {
        self.index_ranges.iter().any(|r| r.contains(&i))
    }
}

pub fn annulus(space: &SpaceSpec<f64>, base_point: f64, t: f64, phi: &Phi) -> Result<AnnulusSpec> {
    let value = phi.at(t);
    if !(value > 0.0 && value < 1.0) {
        return Err(HeatError::Precondition(format!("φ({t}) = {value} must lie in (0, 1)")));
    }
    let inner = value * t.sqrt();
    let outer = t.sqrt() / value;
    if outer > space.reach(base_point) {
        return Err(HeatError::Precondition(format!(
            "annulus outer radius {outer} exceeds the domain reach {}",
            space.reach(base_point)
        )));
    }
    let inside = |i: usize| {
        let d = (space.node(i) - base_point).abs();
        d >= inner && d <= outer
    };
    let mut index_ranges = Vec::new();
    let mut i = 0;
    while i < space.len() {
        if inside(i) {
            let start = i;
            while i < space.len() && inside(i) {
                i += 1;
            }
            index_ranges.push(start..i);
        } else {
            i += 1;
        }
    }
    Ok(AnnulusSpec {
        base_point,
        time: t,
        phi: value,
        inner,
        outer,
        index_ranges,
        hypothesis_ok: phi.satisfies_hypotheses(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concentration {
    pub t: f64,
    pub phi: f64,
    pub mass_in: f64,
    pub mass_out: f64,
    pub kernel_mass: f64,
    /// `mass_out / φ^{ν′}`; bounded along a sweep when the kernel
    /// concentrates at the predicted rate.
    pub scaled_out: f64,
    pub flags: Vec<String>,
}

/// Kernel mass inside and outside the annulus.
pub fn concentration(slice: &KernelSlice<f64>, annulus: &AnnulusSpec, nu_prime: f64) -> Result<Concentration> {
    let kernel_mass = slice.mass();
    if (kernel_mass - 1.0).abs() > KERNEL_MASS_TOLERANCE {
        return Err(HeatError::Precondition(format!("kernel mass {kernel_mass} is not within 1e-6 of 1")));
    }
    let mut mass_in = 0.0;
    let mut mass_out = 0.0;
    for (i, (&h, &w)) in slice.values.iter().zip(&slice.weights).enumerate() {
        if annulus.contains_index(i) {
            mass_in += w * h;
        } else {
            mass_out += w * h;
        }
    }
    let mut flags = Vec::new();
    if !annulus.hypothesis_ok {
        flags.push("φ violates φ → 0 or φ√t → ∞".to_string());
    }
    Ok(Concentration {
        t: annulus.time,
        phi: annulus.phi,
        mass_in,
        mass_out,
        kernel_mass,
        scaled_out: mass_out / annulus.phi.powf(nu_prime),
        flags,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationSweep {
    pub rows: Vec<Concentration>,
    /// Smallest `C` with `mass_out ≤ C φ^{ν′}` along the sweep.
    pub fitted_constant: f64,
    pub mass_in_increasing: bool,
}

pub fn concentration_sweep(
    model: &HeatModel<f64>,
    base_point: f64,
    times: &[f64],
    phi: &Phi,
    nu_prime: f64,
) -> Result<ConcentrationSweep> {
    let source = model.space.nearest_index(base_point);
    let slices = numeric_kernels(model, source, times)?;
    let rows = slices
        .iter()
        .map(|s| concentration(s, &annulus(&model.space, s.source_position, s.time, phi)?, nu_prime))
        .collect::<Result<Vec<_>>>()?;
    let fitted_constant = rows.iter().map(|r| r.scaled_out).fold(0.0, f64::max);
    let mass_in_increasing = rows.windows(2).all(|w| w[1].t <= w[0].t || w[1].mass_in > w[0].mass_in);
    Ok(ConcentrationSweep { rows, fitted_constant, mass_in_increasing })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapNorms {
    pub l1: f64,
    pub weighted_sup: f64,
    pub lp: f64,
    pub p: f64,
}

impl GapNorms {
    /// `L1^{1/p} · wsup^{1/p′}`, the interpolation bound on the Lᵖ gap.
    pub fn interpolation_bound(&self) -> f64 {
        self.l1.powf(1.0 / self.p) * self.weighted_sup.powf(1.0 - 1.0 / self.p)
    }
}

/// Norms of `u − M h` with weights `w` and per-node ball volumes `vols`
/// (`V(r_i, √t)`).
pub fn gap_norms_from(weights: &[f64], vols: &[f64], u: &[f64], h: &[f64], mass: f64, p: f64) -> Result<GapNorms> {
    if !(p >= 1.0) {
        return Err(HeatError::InvalidParameter(format!("p must be at least 1, got {p}")));
    }
    if u.len() != h.len() || u.len() != weights.len() || u.len() != vols.len() {
        return Err(HeatError::InvalidParameter("solution, kernel and weights differ in length".into()));
    }
    // 1/p′ = 1 − 1/p
    let dual = 1.0 - 1.0 / p;
    let (mut l1, mut sup, mut lp) = (0.0_f64, 0.0_f64, 0.0_f64);
    for i in 0..u.len() {
        let g = (u[i] - mass * h[i]).abs();
        l1 += weights[i] * g;
        sup = sup.max(g * vols[i]);
        lp += weights[i] * (g * vols[i].powf(dual)).powf(p);
    }
    Ok(GapNorms { l1, weighted_sup: sup, lp: lp.powf(1.0 / p), p })
}

/// `V(r_i, √t)` at every node.
pub fn node_volumes(space: &SpaceSpec<f64>, t: f64) -> Vec<f64> {
    space.nodes().iter().map(|&r| space.ball_volume(r, t.sqrt())).collect()
}

pub fn gap_norms(space: &SpaceSpec<f64>, u: &[f64], slice: &KernelSlice<f64>, mass: f64, p: f64) -> Result<GapNorms> {
    gap_norms_from(&slice.weights, &node_volumes(space, slice.time), u, &slice.values, mass, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub t: f64,
    pub l1_gap: f64,
    pub wsup_gap: f64,
    pub lp_gap: f64,
    pub mass_in: f64,
    pub mass_out: f64,
    pub inside_gap: f64,
    pub outside_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSeries {
    pub mass: f64,
    pub p: f64,
    pub initial_l1: f64,
    pub rows: Vec<ConvergenceRow>,
    pub max_leakage: f64,
    pub flags: Vec<String>,
}

impl ConvergenceSeries {
    pub const CSV_HEADER: &'static str = "t,l1_gap,wsup_gap,lp_gap,mass_in,mass_out,inside_gap,outside_gap";

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn row_at(&self, t: f64) -> Option<&ConvergenceRow> {
        self.rows.iter().find(|r| r.t == t)
    }

    /// Largest relative excess of the Lᵖ gap over its interpolation bound.
    pub fn interpolation_slack(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                let bound = r.l1_gap.powf(1.0 / self.p) * r.wsup_gap.powf(1.0 - 1.0 / self.p);
                if bound > 0.0 {
                    r.lp_gap / bound - 1.0
                } else if r.lp_gap > 0.0 {
                    f64::INFINITY
                } else {
                    -1.0
                }
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            let cells = [r.t, r.l1_gap, r.wsup_gap, r.lp_gap, r.mass_in, r.mass_out, r.inside_gap, r.outside_gap];
            let line: Vec<String> = cells.iter().map(|&v| fmt_sci(v)).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Slope of `log(L¹ gap)` against `log t`.
    pub slope: f64,
    /// `−slope`.
    pub eta: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: usize,
}

impl RateFit {
    /// `min(ν′, θ)/2`, the rate below which every η is admissible.
    pub fn theory_rate(nu_prime: f64, theta: f64) -> f64 {
        nu_prime.min(theta) / 2.0
    }
}

fn fit_power(ts: &[f64], ys: &[f64], what: &str) -> Result<RateFit> {
    if ts.is_empty() {
        return Err(HeatError::FitRefused(format!("no {what} samples in the window")));
    }
    let t_min = ts.iter().copied().fold(f64::INFINITY, f64::min);
    let t_max = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if t_max / t_min < 100.0 * (1.0 - 1e-12) {
        return Err(HeatError::FitRefused(format!("window [{t_min}, {t_max}] spans less than two decades")));
    }
    if let Some(y) = ys.iter().find(|&&y| !(y >= NOISE_FLOOR)) {
        return Err(HeatError::FitRefused(format!("{what} {y} is below the noise floor {NOISE_FLOOR}")));
    }
    let lx: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let LineFit { slope, intercept, r_squared, samples } = fit_line(&lx, &ly)?;
    Ok(RateFit { slope, eta: -slope, intercept, r_squared, samples })
}

/// Power-law fit of the L¹ gap over `t ∈ [t_min, t_max]`.
pub fn rate_fit(series: &ConvergenceSeries, t_min: f64, t_max: f64) -> Result<RateFit> {
    let rows: Vec<&ConvergenceRow> = series.rows.iter().filter(|r| r.t >= t_min && r.t <= t_max).collect();
    let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.l1_gap).collect();
    fit_power(&ts, &ys, "L¹ gap")
}

/// Power-law fit of the kernel mass outside the annulus.
pub fn outside_mass_fit(sweep: &ConcentrationSweep) -> Result<RateFit> {
    let ts: Vec<f64> = sweep.rows.iter().map(|r| r.t).collect();
    let ys: Vec<f64> = sweep.rows.iter().map(|r| r.mass_out).collect();
    fit_power(&ts, &ys, "outside mass")
}

/// Profile of a compactly supported bump of unit height on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpShape {
    /// `(1 − s)₊`.
    Triangle,
    /// `(1 − s²)₊²`.
    Smooth,
}

impl BumpShape {
    pub fn profile(self, s: f64) -> f64 {
        let s = s.abs();
        if s >= 1.0 {
            return 0.0;
        }
        match self {
            BumpShape::Triangle => 1.0 - s,
            BumpShape::Smooth => (1.0 - s * s).powi(2),
        }
    }
}

/// Initial data, normalised so that its discrete mass is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    /// `M δ` at the node nearest `position` (the base point if absent).
    Delta { position: Option<f64>, mass: f64 },
    /// Bump of radius `radius` at `center`, carrying mass `mass`.
    Bump { shape: BumpShape, center: f64, radius: f64, mass: f64 },
    /// `+amplitude` of mass at `first`, `−amplitude` at `second`; total
    /// mass zero.
    SignedPair { shape: BumpShape, first: f64, second: f64, radius: f64, amplitude: f64 },
}

fn bump_values(space: &SpaceSpec<f64>, weights: &[f64], shape: BumpShape, center: f64, radius: f64, mass: f64) -> Result<Vec<f64>> {
    if !(radius > 0.0) {
        return Err(HeatError::InvalidParameter(format!("bump radius must be positive, got {radius}")));
    }
    let raw: Vec<f64> = space.nodes().iter().map(|&r| shape.profile((r - center) / radius)).collect();
    let total: f64 = raw.iter().zip(weights).map(|(f, w)| f * w).sum();
    if !(total > 0.0) {
        return Err(HeatError::InvalidParameter(format!(
            "bump at {center} with radius {radius} covers no grid node"
        )));
    }
    Ok(raw.into_iter().map(|f| f * mass / total).collect())
}

impl InitialData {
    pub fn discretize(&self, space: &SpaceSpec<f64>, weights: &[f64], base_point: f64) -> Result<Vec<f64>> {
        match *self {
            InitialData::Delta { position, mass } => {
                let j = space.nearest_index(position.unwrap_or(base_point));
                let mut v = vec![0.0; space.len()];
                v[j] = mass / weights[j];
                Ok(v)
            }
            InitialData::Bump { shape, center, radius, mass } => bump_values(space, weights, shape, center, radius, mass),
            InitialData::SignedPair { shape, first, second, radius, amplitude } => {
                let a = bump_values(space, weights, shape, first, radius, amplitude)?;
                let b = bump_values(space, weights, shape, second, radius, amplitude)?;
                Ok(a.iter().zip(&b).map(|(x, y)| x - y).collect())
            }
        }
    }

    /// Largest distance from `base_point` to the support.
    pub fn support_radius(&self, space: &SpaceSpec<f64>, base_point: f64) -> f64 {
        match *self {
            InitialData::Delta { position, .. } => {
                (space.node(space.nearest_index(position.unwrap_or(base_point))) - base_point).abs()
            }
            InitialData::Bump { center, radius, .. } => (center - base_point).abs() + radius,
            InitialData::SignedPair { first, second, radius, .. } => {
                (first - base_point).abs().max((second - base_point).abs()) + radius
            }
        }
    }
}

/// `|u|` mass fraction within the outer band next to each truncation wall
/// (the pole of a half-line is not a wall).
pub fn boundary_leakage(space: &SpaceSpec<f64>, weights: &[f64], u: &[f64]) -> f64 {
    let (lo, hi) = space.domain();
    let band = LEAKAGE_BAND * (hi - lo);
    let mut total = 0.0;
    let mut edge = 0.0;
    for (i, (&v, &w)) in u.iter().zip(weights).enumerate() {
        let r = space.node(i);
        let m = w * v.abs();
        total += m;
        let near_upper = hi - r <= band;
        let near_lower = !space.has_pole() && r - lo <= band;
        if near_upper || near_lower {
            edge += m;
        }
    }
    if total > 0.0 {
        edge / total
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Options {
    pub phi: Phi,
    pub p: f64,
    pub nu_prime: f64,
}

impl Default for Theorem1Options {
    fn default() -> Self {
        Theorem1Options { phi: Phi::default(), p: 2.0, nu_prime: 1.0 }
    }
}

/// Evolves `u0` and the kernel at `base_point` to every `t` of `times` and
/// records the gaps, split over the annulus and its complement.
pub fn full_theorem1_experiment(
    model: &HeatModel<f64>,
    u0: &InitialData,
    base_point: f64,
    times: &[f64],
    opts: &Theorem1Options,
) -> Result<ConvergenceSeries> {
    if times.is_empty() {
        return Err(HeatError::InvalidParameter("empty time schedule".into()));
    }
    let space = &model.space;
    let weights = model.operator.weights();
    let values = u0.discretize(space, weights, base_point)?;
    let mass = model.operator.mass(&values);
    let initial_l1 = model.operator.l1_norm(&values);
    let mut flags = Vec::new();
    let t_min = times.iter().copied().fold(f64::INFINITY, f64::min);
    if u0.support_radius(space, base_point) > t_min.sqrt() {
        flags.push("initial data not supported in B(x₀, √t_min)".to_string());
    }
    if !opts.phi.satisfies_hypotheses() {
        flags.push("φ violates φ → 0 or φ√t → ∞".to_string());
    }
    let states = propagate(model, values, times)?;
    let mut max_leakage = 0.0_f64;
    for s in &states {
        let leak = boundary_leakage(space, weights, &s.values);
        if leak > LEAKAGE_THRESHOLD {
            return Err(HeatError::NumericalAbort(format!(
                "boundary mass leakage {leak:.3e} at t = {} exceeds the threshold {LEAKAGE_THRESHOLD:e}; extend the domain",
                s.time
            )));
        }
        max_leakage = max_leakage.max(leak);
    }
    let source = space.nearest_index(base_point);
    let slices = numeric_kernels(model, source, times)?;
    let mut rows = Vec::with_capacity(times.len());
    for (state, slice) in states.iter().zip(&slices) {
        let t = state.time;
        let norms = gap_norms(space, &state.values, slice, mass, opts.p)?;
        let ann = annulus(space, slice.source_position, t, &opts.phi)?;
        let conc = concentration(slice, &ann, opts.nu_prime)?;
        let (mut inside, mut outside) = (0.0, 0.0);
        for (i, ((w, u), h)) in weights.iter().zip(&state.values).zip(&slice.values).enumerate() {
            let g = w * (u - mass * h).abs();
            if ann.contains_index(i) {
                inside += g;
            } else {
                outside += g;
            }
        }
        rows.push(ConvergenceRow {
            t,
            l1_gap: norms.l1,
            wsup_gap: norms.weighted_sup,
            lp_gap: norms.lp,
            mass_in: conc.mass_in,
            mass_out: conc.mass_out,
            inside_gap: inside,
            outside_gap: outside,
        });
    }
    Ok(ConvergenceSeries { mass, p: opts.p, initial_l1, rows, max_leakage, flags })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn euclid(n: u32, extent: f64, points: usize) -> HeatModel<f64> {
        HeatModel::new(SpaceSpec::euclidean(n, extent, points).unwrap()).unwrap()
    }

    #[test]
    fn annulus_radii() {
        let s = SpaceSpec::euclidean(2, 2000.0, 2000).unwrap();
        let a = annulus(&s, 0.0, 16.0, &Phi::default()).unwrap();
        assert!((a.inner - 2.0).abs() < 1e-12 && (a.outer - 8.0).abs() < 1e-12);
        assert!(a.contains_distance(4.0));
        assert!(a.contains_index(4));
        assert!(!a.contains_index(1));
        let b = annulus(&s, 0.0, 1e4, &Phi::default()).unwrap();
        assert!((b.inner - 10.0).abs() < 1e-9 && (b.outer - 1000.0).abs() < 1e-9);
        assert!(annulus(&s, 0.0, 1.0, &Phi::default()).is_err());
        assert!(annulus(&s, 0.0, 0.5, &Phi::default()).is_err());
        assert!(annulus(&s, 0.0, 1e6, &Phi::default()).is_err());
    }

    #[test]
    fn dumbbell_annulus_has_two_sides() {
        let s = SpaceSpec::dumbbell(3, 1.0, 100.0, 2000).unwrap();
        let a = annulus(&s, 0.0, 16.0, &Phi::default()).unwrap();
        assert_eq!(a.index_ranges.len(), 2);
    }

    #[test]
    fn concentration_matches_gaussian_shells() {
        // mass in ρ₁ ≤ r ≤ ρ₂ is e^{−ρ₁²/4t} − e^{−ρ₂²/4t}
        let m = euclid(2, 1000.0, 10000);
        let sweep = concentration_sweep(&m, 0.0, &[1e2, 1e3, 1e4], &Phi::default(), 2.0).unwrap();
        let oracle = |t: f64| {
            let f = t.powf(-0.25);
            let (a, b) = (f * t.sqrt(), t.sqrt() / f);
            (-a * a / (4.0 * t)).exp() - (-b * b / (4.0 * t)).exp()
        };
        assert!((oracle(100.0) - 0.8932).abs() < 1e-4);
        for row in &sweep.rows {
            assert!((row.mass_in - oracle(row.t)).abs() < 5e-3, "{row:?}");
        }
        assert!(sweep.mass_in_increasing);
        assert!(sweep.rows[2].mass_in >= 0.99);
        assert!(sweep.fitted_constant.is_finite());
    }

    #[test]
    fn outside_mass_decays_like_phi_power() {
        let m = euclid(2, 1000.0, 10000);
        // the outer tail e^{−√t/4} masks the φ² regime below t ≈ 10³
        let times: Vec<f64> = (0..5).map(|k| 1e3 * 10f64.powf(k as f64 / 4.0)).collect();
        let sweep = concentration_sweep(&m, 0.0, &times, &Phi::default(), 2.0).unwrap();
        let lt: Vec<f64> = times.iter().map(|t| t.ln()).collect();
        let lm: Vec<f64> = sweep.rows.iter().map(|r| r.mass_out.ln()).collect();
        let fit = fit_line(&lt, &lm).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.05, "{fit:?}");
        assert!(outside_mass_fit(&sweep).is_err(), "one decade only");
    }

    #[test]
    fn constant_phi_is_flagged() {
        let m = euclid(2, 200.0, 2000);
        let sweep = concentration_sweep(&m, 0.0, &[100.0], &Phi::Constant { value: 0.5 }, 2.0).unwrap();
        assert!(!sweep.rows[0].flags.is_empty());
        assert!(sweep.rows[0].mass_in > 0.0 && sweep.rows[0].mass_out > 0.0);
    }

    #[test]
    fn delta_data_has_zero_gap() {
        let m = euclid(3, 200.0, 2000);
        let u0 = InitialData::Delta { position: None, mass: 1.0 };
        let s = full_theorem1_experiment(&m, &u0, 0.0, &[16.0, 64.0, 256.0], &Theorem1Options::default()).unwrap();
        for r in &s.rows {
            assert_eq!(r.l1_gap, 0.0);
            assert_eq!(r.wsup_gap, 0.0);
            assert_eq!(r.lp_gap, 0.0);
        }
        assert!(rate_fit(&s, 16.0, 256.0).is_err());
    }

    #[test]
    fn p_one_reduces_to_l1() {
        let m = euclid(2, 100.0, 1000);
        let u0 = InitialData::Bump { shape: BumpShape::Triangle, center: 0.0, radius: 2.0, mass: 1.0 };
        let opts = Theorem1Options { p: 1.0, ..Default::default() };
        let s = full_theorem1_experiment(&m, &u0, 0.0, &[4.0, 16.0], &opts).unwrap();
        for r in &s.rows {
            assert!((r.lp_gap - r.l1_gap).abs() <= 1e-14 * r.l1_gap);
        }
    }

    #[test]
    fn centred_triangle_in_three_dimensions() {
        let m = euclid(3, 300.0, 3000);
        let u0 = InitialData::Bump { shape: BumpShape::Triangle, center: 0.0, radius: 2.0, mass: 1.0 };
        let s = full_theorem1_experiment(&m, &u0, 0.0, &[100.0, 300.0, 900.0], &Theorem1Options::default()).unwrap();
        assert!((s.mass - 1.0).abs() < 1e-12);
        let (a, b) = (s.row_at(100.0).unwrap(), s.row_at(900.0).unwrap());
        assert!(b.l1_gap <= a.l1_gap / 2.0, "{} {}", a.l1_gap, b.l1_gap);
        for r in &s.rows {
            assert!(r.l1_gap <= s.initial_l1 + s.mass.abs());
            assert!(((r.inside_gap + r.outside_gap) - r.l1_gap).abs() <= 1e-12 * r.l1_gap);
        }
        assert!(s.interpolation_slack() <= 1e-6);
        assert!(s.flags.is_empty());
    }

    #[test]
    fn signed_pair_gap_is_the_norm() {
        let m = euclid(3, 300.0, 3000);
        let u0 = InitialData::SignedPair { shape: BumpShape::Smooth, first: 3.0, second: 9.0, radius: 2.0, amplitude: 1.0 };
        let s = full_theorem1_experiment(&m, &u0, 0.0, &[100.0, 300.0, 900.0], &Theorem1Options::default()).unwrap();
        assert!(s.mass.abs() < 1e-14);
        for w in s.rows.windows(2) {
            assert!(w[1].l1_gap < w[0].l1_gap);
        }
        assert!(!s.flags.is_empty(), "support exceeds √t_min");
    }

    #[test]
    fn dumbbell_even_bump_gap_decreases() {
        let m = HeatModel::new(SpaceSpec::dumbbell(3, 1.0, 120.0, 6000).unwrap()).unwrap();
        let u0 = InitialData::Bump { shape: BumpShape::Triangle, center: 0.0, radius: 2.0, mass: 1.0 };
        let s = full_theorem1_experiment(&m, &u0, 0.0, &[25.0, 50.0, 100.0, 200.0], &Theorem1Options::default()).unwrap();
        for w in s.rows.windows(2) {
            assert!(w[1].wsup_gap < w[0].wsup_gap);
        }
        assert!(s.interpolation_slack() <= 1e-6);
    }

    #[test]
    fn dumbbell_weighted_sup_is_orientation_invariant() {
        let space = SpaceSpec::dumbbell(3, 1.0, 60.0, 3000).unwrap();
        let vols = node_volumes(&space, 9.0);
        let w = space.cell_measures();
        let n = space.len();
        let u: Vec<f64> = (0..n).map(|i| ((i * 7919) % 113) as f64 * 1e-3).collect();
        let h: Vec<f64> = (0..n).map(|i| ((i * 104729) % 97) as f64 * 1e-3).collect();
        let a = gap_norms_from(&w, &vols, &u, &h, 0.7, 2.0).unwrap();
        let ur: Vec<f64> = u.iter().rev().copied().collect();
        let hr: Vec<f64> = h.iter().rev().copied().collect();
        let b = gap_norms_from(&w, &vols, &ur, &hr, 0.7, 2.0).unwrap();
        assert!((a.weighted_sup - b.weighted_sup).abs() <= 1e-13 * a.weighted_sup);
    }

    #[test]
    fn leakage_aborts_on_short_domain() {
        let m = euclid(2, 30.0, 600);
        let u0 = InitialData::Bump { shape: BumpShape::Triangle, center: 0.0, radius: 2.0, mass: 1.0 };
        let err = full_theorem1_experiment(&m, &u0, 0.0, &[25.0, 100.0], &Theorem1Options::default()).unwrap_err();
        assert!(matches!(err, HeatError::NumericalAbort(_)), "{err}");
    }

    #[test]
    fn csv_layout() {
        let m = euclid(3, 300.0, 3000);
        let u0 = InitialData::Bump { shape: BumpShape::Triangle, center: 0.0, radius: 2.0, mass: 1.0 };
        let s = full_theorem1_experiment(&m, &u0, 0.0, &[100.0], &Theorem1Options::default()).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], ConvergenceSeries::CSV_HEADER);
        assert_eq!(lines[1].split(',').count(), 8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn interpolation_holds_for_arbitrary_gaps(
            seed in proptest::collection::vec((0.0f64..2.0, 0.0f64..2.0, 0.1f64..5.0, 0.01f64..1.0), 5..60),
            mass in -2.0f64..2.0,
            p in 1.0f64..6.0,
        ) {
            let u: Vec<f64> = seed.iter().map(|s| s.0).collect();
            let h: Vec<f64> = seed.iter().map(|s| s.1).collect();
            let v: Vec<f64> = seed.iter().map(|s| s.2).collect();
            let w: Vec<f64> = seed.iter().map(|s| s.3).collect();
            let g = gap_norms_from(&w, &v, &u, &h, mass, p).unwrap();
            prop_assert!(g.lp <= g.interpolation_bound() * (1.0 + 1e-9) + 1e-300);
            prop_assert!(g.l1 >= 0.0 && g.weighted_sup >= 0.0);
        }
    }
}
