//! Heat kernels: the closed-form Euclidean kernel and kernels extracted from
//! the discrete semigroup, with their structural identities.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HeatError, Result};
use crate::evolve::{evolve_to, DiscreteOperator, SolutionState, TimeSchedule};
use crate::io::fmt_sci;
use crate::scalar::Real;
use crate::space::SpaceSpec;

/// Mass tolerance of extracted kernels.
pub const KERNEL_MASS_TOLERANCE: f64 = 1e-6;

/// A space together with its discrete operator and time schedule.
#[derive(Debug, Clone)]
pub struct HeatModel<T> {
    pub space: SpaceSpec<T>,
    pub operator: DiscreteOperator<T>,
    pub schedule: TimeSchedule<T>,
}

impl<T: Real> HeatModel<T> {
    pub fn new(space: SpaceSpec<T>) -> Result<Self> {
        let schedule = TimeSchedule::for_space(&space);
        Self::with_schedule(space, schedule)
    }

    pub fn with_schedule(space: SpaceSpec<T>, schedule: TimeSchedule<T>) -> Result<Self> {
        let operator = DiscreteOperator::build(&space)?;
        Ok(HeatModel { space, operator, schedule })
    }

    /// Distance from `r` to the nearest truncation wall. The pole of a
    /// half-line is a genuine point of the space, not a wall.
    pub fn wall_distance(&self, r: T) -> T {
        let (lo, hi) = self.space.domain();
        if self.space.has_pole() {
            hi - r
        } else {
            (hi - r).min(r - lo)
        }
    }

    /// Largest time a kernel sourced at `r` can be run to: `6√t ≤` wall
    /// distance.
    pub fn max_kernel_time(&self, r: T) -> T {
        let d = self.wall_distance(r) / T::lit(6.0);
        d * d
    }
}

/// `h_t(·, y)` at one time for one grid source.
#[derive(Debug, Clone)]
pub struct KernelSlice<T> {
    pub time: T,
    pub source: usize,
    pub source_position: T,
    pub values: Vec<T>,
    pub weights: Vec<T>,
    /// Kernel width `2√t` spans fewer than ten grid cells.
    pub under_resolved: bool,
}

/// Metadata header of an exported kernel slice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelHeader {
    pub t: f64,
    pub source: usize,
    pub source_position: f64,
    pub mass: f64,
    pub min_value: f64,
}

impl<T: Real> KernelSlice<T> {
    pub fn mass(&self) -> T {
        self.weights.iter().zip(&self.values).map(|(&w, &h)| w * h).sum()
    }

    pub fn max_value(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }

    pub fn min_value(&self) -> T {
        self.values.iter().fold(T::infinity(), |m, &v| m.min(v))
    }

    pub fn header(&self) -> KernelHeader {
        KernelHeader {
            t: self.time.as_f64(),
            source: self.source,
            source_position: self.source_position.as_f64(),
            mass: self.mass().as_f64(),
            min_value: self.min_value().as_f64(),
        }
    }

    /// Writes `r,h,w` rows.
    pub fn write_csv<W: Write>(&self, space: &SpaceSpec<T>, mut out: W) -> Result<()> {
        writeln!(out, "r,h,w")?;
        for ((r, h), w) in space.nodes().iter().zip(&self.values).zip(&self.weights) {
            writeln!(out, "{},{},{}", fmt_sci(r.as_f64()), fmt_sci(h.as_f64()), fmt_sci(w.as_f64()))?;
        }
        Ok(())
    }
}

/// `(4πt)^{−n/2} exp(−d²/4t)`.
pub fn euclidean_kernel<T: Real>(n: u32, t: T, d: T) -> Result<T> {
    if !(t > T::zero()) {
        return Err(HeatError::InvalidParameter(format!("kernel time must be positive, got {t}")));
    }
    if n == 0 {
        return Err(HeatError::InvalidParameter("dimension must be at least 1".into()));
    }
    let four_pi_t = T::lit(4.0) * T::PI() * t;
    Ok(four_pi_t.powf(-T::lit(f64::from(n)) / T::lit(2.0)) * (-d * d / (T::lit(4.0) * t)).exp())
}

fn check_kernel_time<T: Real>(model: &HeatModel<T>, source: usize, t: T, enforce_floor: bool) -> Result<()> {
    if source >= model.space.len() {
        return Err(HeatError::InvalidParameter(format!("source index {source} outside grid")));
    }
    if !(t > T::zero()) {
        return Err(HeatError::InvalidParameter(format!("kernel time must be positive, got {t}")));
    }
    let r = model.space.node(source);
    let tmax = model.max_kernel_time(r);
    if t > tmax {
        return Err(HeatError::Precondition(format!(
            "t = {t} exceeds the truncation limit {tmax} (6√t must not exceed the wall distance {})",
            model.wall_distance(r)
        )));
    }
    if enforce_floor && t < T::lit(100.0) * model.schedule.dt_min {
        return Err(HeatError::Precondition(format!(
            "t = {t} is below 100·dt_min = {}",
            T::lit(100.0) * model.schedule.dt_min
        )));
    }
    Ok(())
}

fn slice_from<T: Real>(model: &HeatModel<T>, source: usize, state: SolutionState<T>) -> KernelSlice<T> {
    let h = model.space.spacing();
    let width = T::lit(2.0) * state.time.sqrt();
    let under_resolved = width < T::lit(10.0) * h;
    if under_resolved {
        log::warn!(
            "kernel at t = {} is under-resolved: width {} spans fewer than 10 cells of {}",
            state.time,
            width,
            h
        );
    }
    KernelSlice {
        time: state.time,
        source,
        source_position: model.space.node(source),
        values: state.values,
        weights: model.operator.weights().to_vec(),
        under_resolved,
    }
}

/// `max |h − h_exact| / max h_exact` over nodes with `r ≤ r_max`, against
/// the Euclidean closed form for a kernel sourced at the pole.
pub fn euclidean_relative_error(space: &SpaceSpec<f64>, slice: &KernelSlice<f64>, r_max: f64) -> Result<f64> {
    if !space.has_pole() || slice.source != 0 {
        return Err(HeatError::InvalidParameter("closed-form comparison needs a pole-sourced kernel".into()));
    }
    let mut worst = 0.0_f64;
    let mut peak = 0.0_f64;
    for (r, h) in space.nodes().iter().zip(&slice.values).take_while(|(r, _)| **r <= r_max) {
        let e = euclidean_kernel(space.dimension(), slice.time, *r)?;
        worst = worst.max((h - e).abs());
        peak = peak.max(e);
    }
    Ok(worst / peak)
}

/// Kernel slices `h_t(·, r_source)` for every `t` in `times`, from one run
/// started at the discrete delta `δ_{ij}/w_j`.
pub fn numeric_kernels<T: Real>(model: &HeatModel<T>, source: usize, times: &[T]) -> Result<Vec<KernelSlice<T>>> {
    if times.is_empty() {
        return Ok(Vec::new());
    }
    for &t in times {
        check_kernel_time(model, source, t, true)?;
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    sorted.dedup();
    let last = *sorted.last().expect("non-empty");
    let start = SolutionState::delta(&model.operator, source, T::one())?;
    let ev = evolve_to(start, &model.operator, last, &model.schedule, &sorted)?;
    let by_time: Vec<KernelSlice<T>> = ev.snapshots.into_iter().map(|s| slice_from(model, source, s)).collect();
    Ok(times
        .iter()
        .map(|t| by_time.iter().find(|s| s.time == *t).expect("snapshot present").clone())
        .collect())
}

/// `h_t(·, r_source)`.
pub fn numeric_kernel<T: Real>(model: &HeatModel<T>, source: usize, t: T) -> Result<KernelSlice<T>> {
    Ok(numeric_kernels(model, source, &[t])?.remove(0))
}

/// Evolves arbitrary data `values` (given at time zero) to each `t` of
/// `times` with the model's schedule.
pub fn propagate<T: Real>(model: &HeatModel<T>, values: Vec<T>, times: &[T]) -> Result<Vec<SolutionState<T>>> {
    let mut sorted = times.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    sorted.dedup();
    let last = *sorted.last().ok_or_else(|| HeatError::InvalidParameter("no target times".into()))?;
    let start = SolutionState::new(&model.operator, T::zero(), values)?;
    let ev = evolve_to(start, &model.operator, last, &model.schedule, &sorted)?;
    Ok(times
        .iter()
        .map(|t| ev.snapshots.iter().find(|s| s.time == *t).expect("snapshot present").clone())
        .collect())
}

/// Chapman–Kolmogorov residual
/// `max_i |h_{t+s}(r_i, y) − Σ_k w_k h_t(r_i, r_k) h_s(r_k, y)| / max h_{t+s}`.
///
/// The composition is the discrete semigroup of duration `t` applied to the
/// slice `h_s(·, y)`, which equals the sum over `k` by symmetry of the
/// discrete kernel.
pub fn semigroup_check<T: Real>(model: &HeatModel<T>, t: T, s: T, source: usize) -> Result<f64> {
    check_kernel_time(model, source, t + s, false)?;
    if !(t > T::zero()) || !(s > T::zero()) {
        return Err(HeatError::InvalidParameter("semigroup times must be positive".into()));
    }
    let direct = numeric_kernels(model, source, &[t + s])?.remove(0);
    let start = SolutionState::delta(&model.operator, source, T::one())?;
    let first = evolve_to(start, &model.operator, s, &model.schedule, &[])?;
    let composed = propagate(model, first.state.values, &[t])?.remove(0);
    let peak = direct.max_value();
    let worst = direct
        .values
        .iter()
        .zip(&composed.values)
        .map(|(&a, &b)| (a - b).abs())
        .fold(T::zero(), T::max);
    Ok((worst / peak).as_f64())
}

/// Largest relative asymmetry `|h_t(i,j) − h_t(j,i)| / max(|h_t(i,j)|, |h_t(j,i)|)`
/// over `pairs` grid-index pairs drawn with `seed` from nodes whose wall
/// distance admits `t`.
pub fn symmetry_check<T: Real>(model: &HeatModel<T>, t: T, pairs: usize, seed: u64) -> Result<f64> {
    let admissible: Vec<usize> = (0..model.space.len())
        .filter(|&i| model.max_kernel_time(model.space.node(i)) >= t)
        .collect();
    if admissible.len() < 2 {
        return Err(HeatError::Precondition(format!("no admissible source pairs for t = {t}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // keep pairs within a few kernel widths so the values are not underflowed
    let reach = (T::lit(4.0) * t.sqrt() / model.space.spacing()).to_usize().unwrap_or(1).max(1);
    let mut worst = 0.0_f64;
    for _ in 0..pairs {
        let a = admissible[rng.gen_range(0..admissible.len())];
        let lo = a.saturating_sub(reach);
        let hi = (a + reach).min(model.space.len() - 1);
        let candidates: Vec<usize> = admissible.iter().copied().filter(|&b| b >= lo && b <= hi).collect();
        let b = candidates[rng.gen_range(0..candidates.len())];
        let hab = numeric_kernel(model, b, t)?.values[a];
        let hba = numeric_kernel(model, a, t)?.values[b];
        let scale = hab.abs().max(hba.abs());
        if scale > T::zero() {
            worst = worst.max(((hab - hba).abs() / scale).as_f64());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn euclid_model(n: u32, extent: f64, points: usize) -> HeatModel<f64> {
        HeatModel::new(SpaceSpec::euclidean(n, extent, points).unwrap()).unwrap()
    }

    #[test]
    fn closed_form_values() {
        let v = euclidean_kernel(2, 1.0_f64, 0.0).unwrap();
        assert!((v - 1.0 / (4.0 * PI)).abs() < 1e-15);
        assert!((v - 0.0795775).abs() < 1e-7);
        assert_eq!(euclidean_kernel(3, 2.0_f64, 1.5).unwrap(), euclidean_kernel(3, 2.0_f64, -1.5).unwrap());
        assert!(euclidean_kernel(2, 0.0_f64, 1.0).is_err());
        assert!(euclidean_kernel(2, -1.0_f64, 1.0).is_err());
    }

    #[test]
    fn closed_form_integrates_to_one() {
        // polar quadrature ∫_0^∞ h(r) 2πr dr, independent Simpson rule
        let n = 20000;
        let rmax = 40.0;
        let dr = rmax / n as f64;
        let f = |r: f64| euclidean_kernel(2, 1.0, r).unwrap() * 2.0 * PI * r;
        let mut acc = f(0.0) + f(rmax);
        for k in 1..n {
            acc += f(k as f64 * dr) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        assert!((acc * dr / 3.0 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn numeric_kernel_matches_closed_form() {
        let m = euclid_model(2, 40.0, 4000);
        let k = numeric_kernel(&m, 0, 1.0).unwrap();
        let mut worst = 0.0_f64;
        let mut peak = 0.0_f64;
        for (r, h) in m.space.nodes().iter().zip(&k.values).take_while(|(r, _)| **r <= 4.0) {
            let e = euclidean_kernel(2, 1.0, *r).unwrap();
            worst = worst.max((h - e).abs());
            peak = peak.max(e);
        }
        assert!(worst / peak <= 1e-3, "relative error {}", worst / peak);
        assert!(!k.under_resolved);
    }

    #[test]
    fn kernel_mass_and_positivity() {
        let spaces = [
            SpaceSpec::<f64>::euclidean(2, 40.0, 2000).unwrap(),
            SpaceSpec::<f64>::euclidean(3, 40.0, 2000).unwrap(),
            SpaceSpec::<f64>::dumbbell(3, 1.0, 40.0, 4000).unwrap(),
        ];
        for s in spaces {
            let src = s.nearest_index(s.default_base_point() + 0.5);
            let m = HeatModel::new(s).unwrap();
            for k in numeric_kernels(&m, src, &[0.5, 4.0, 25.0]).unwrap() {
                let mass = k.mass();
                assert!((1.0 - KERNEL_MASS_TOLERANCE..=1.0 + 1e-12).contains(&mass), "mass {mass}");
                assert!(k.min_value() >= -1e-8 * k.max_value());
            }
        }
    }

    #[test]
    fn kernel_preconditions() {
        let m = euclid_model(2, 12.0, 1200);
        assert!(matches!(numeric_kernel(&m, 0, 5.0), Err(HeatError::Precondition(_))));
        assert!(matches!(numeric_kernel(&m, 0, 1e-6), Err(HeatError::Precondition(_))));
        assert!(numeric_kernel(&m, 5000, 1.0).is_err());
        assert!(numeric_kernel(&m, 0, 4.0).is_ok());
    }

    #[test]
    fn dumbbell_kernel_is_symmetric() {
        let s = SpaceSpec::<f64>::dumbbell(3, 1.0, 40.0, 2000).unwrap();
        let m = HeatModel::new(s).unwrap();
        let res = symmetry_check(&m, 4.0, 10, 7).unwrap();
        assert!(res <= 1e-8, "symmetry residual {res}");
    }

    #[test]
    fn semigroup_identity() {
        let m = euclid_model(2, 40.0, 4000);
        let res = semigroup_check(&m, 1.0, 1.0, 0).unwrap();
        assert!(res <= 1e-3, "euclidean residual {res}");
        let small = semigroup_check(&m, 1.0, 10.0 * m.schedule.dt_min, 0).unwrap();
        assert!(small <= 1e-3, "s→0 residual {small}");
    }

    #[test]
    fn semigroup_identity_dumbbell() {
        let s = SpaceSpec::<f64>::dumbbell(3, 1.0, 60.0, 6000).unwrap();
        let src = s.nearest_index(0.0);
        let m = HeatModel::new(s).unwrap();
        let res = semigroup_check(&m, 4.0, 4.0, src).unwrap();
        assert!(res <= 3e-3, "dumbbell residual {res}");
    }

    #[test]
    fn peak_decreases_in_time() {
        let m = euclid_model(2, 40.0, 2000);
        let times = [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0];
        let ks = numeric_kernels(&m, 0, &times).unwrap();
        for w in ks.windows(2) {
            assert!(w[1].values[0] < w[0].values[0]);
        }
    }

    #[test]
    fn weak_form_of_heat_equation() {
        // Crank–Nicolson satisfies d/dt Σ w φ h = Σ w (Lφ) h at step midpoints.
        let m = euclid_model(2, 20.0, 1000);
        let phi: Vec<f64> = m.space.nodes().iter().map(|r| (-r * r / 8.0).exp()).collect();
        let lphi = m.operator.apply_vec(&phi);
        let ks = numeric_kernels(&m, 0, &[1.0, 1.01]).unwrap();
        let pair = |u: &[f64], v: &[f64]| m.operator.mass(&u.iter().zip(v).map(|(a, b)| a * b).collect::<Vec<_>>());
        let lhs = (pair(&phi, &ks[1].values) - pair(&phi, &ks[0].values)) / 0.01;
        let mid: Vec<f64> = ks[0].values.iter().zip(&ks[1].values).map(|(a, b)| 0.5 * (a + b)).collect();
        let rhs = pair(&lphi, &mid);
        assert!((lhs - rhs).abs() <= 1e-4 * rhs.abs(), "{lhs} vs {rhs}");
    }

    #[test]
    fn slice_export() {
        let m = euclid_model(2, 20.0, 400);
        let k = numeric_kernel(&m, 0, 1.0).unwrap();
        let hdr = serde_json::to_value(k.header()).unwrap();
        assert_eq!(hdr["source"], 0);
        assert!((hdr["mass"].as_f64().unwrap() - 1.0).abs() < 1e-12);
        let mut buf = Vec::new();
        k.write_csv(&m.space, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("r,h,w\n"));
    }
}
