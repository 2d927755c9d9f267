//! Discrete weighted Laplacian and Crank–Nicolson time stepping.
//!
//! The operator is the flux-form stencil
//!
//! ```text
//! (Lu)_i = [g_{i+1/2}(u_{i+1} − u_i) − g_{i−1/2}(u_i − u_{i−1})] / w_i,
//! g_{i+1/2} = A(r_i + h/2) / h,
//! ```
//!
//! with `w_i` the cell-integrated measure of node `i` and zero flux through
//! both ends. Writing `K` for the symmetric stiffness matrix and `W` for the
//! diagonal of weights, `L = W⁻¹K` and `1ᵀK = 0`, so constants are harmonic
//! and `Σ w_i u_i` is conserved by any scheme of the form
//! `(W − aK) u' = (W + bK) u`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{HeatError, Result};
use crate::io::{checksum_values, fmt_sci};
use crate::scalar::Real;
use crate::space::{SpaceConfig, SpaceSpec};
use crate::tridiag::Tridiagonal;

/// Default number of steps per decade of `t` once past the `dt_min` floor.
pub const DEFAULT_STEPS_PER_DECADE: usize = 128;

/// Minimum admissible steps per decade.
pub const MIN_STEPS_PER_DECADE: usize = 64;

#[derive(Debug, Clone)]
pub struct DiscreteOperator<T> {
    weights: Vec<T>,
    // g_{i+1/2} for i in 0..N
    conductance: Vec<T>,
    spacing: T,
}

impl<T: Real> DiscreteOperator<T> {
    pub fn build(space: &SpaceSpec<T>) -> Result<Self> {
        if space.len() < 3 {
            return Err(HeatError::InvalidParameter(format!(
                "operator needs at least 3 grid points, got {}",
                space.len()
            )));
        }
        let h = space.spacing();
        let half = h * T::lit(0.5);
        let conductance = space.nodes()[..space.len() - 1]
            .iter()
            .map(|&r| space.density_at(r + half) / h)
            .collect();
        Ok(DiscreteOperator { weights: space.cell_measures(), conductance, spacing: h })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Node weights `w_i`.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Face conductances `g_{i+1/2}`.
    pub fn conductance(&self) -> &[T] {
        &self.conductance
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    /// Stencil row `i` as `(L_{i,i−1}, L_{i,i}, L_{i,i+1})`; missing
    /// neighbours are zero.
    pub fn stencil(&self, i: usize) -> (T, T, T) {
        let n = self.len();
        let left = if i > 0 { self.conductance[i - 1] } else { T::zero() };
        let right = if i + 1 < n { self.conductance[i] } else { T::zero() };
        let w = self.weights[i];
        (left / w, -(left + right) / w, right / w)
    }

    /// `out = L u`.
    pub fn apply(&self, u: &[T], out: &mut [T]) {
        let n = self.len();
        for i in 0..n {
            let mut flux = T::zero();
            if i + 1 < n {
                flux = flux + self.conductance[i] * (u[i + 1] - u[i]);
            }
            if i > 0 {
                flux = flux - self.conductance[i - 1] * (u[i] - u[i - 1]);
            }
            out[i] = flux / self.weights[i];
        }
    }

    pub fn apply_vec(&self, u: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); u.len()];
        self.apply(u, &mut out);
        out
    }

    /// Discrete mass `Σ w_i u_i`.
    pub fn mass(&self, u: &[T]) -> T {
        self.weights.iter().zip(u).map(|(&w, &v)| w * v).sum()
    }

    /// `Σ w_i |u_i|`.
    pub fn l1_norm(&self, u: &[T]) -> T {
        self.weights.iter().zip(u).map(|(&w, &v)| w * v.abs()).sum()
    }

    /// `max |w_i L_{i,i+1} − w_{i+1} L_{i+1,i}|` relative to the largest
    /// conductance.
    pub fn self_adjointness_residual(&self) -> T {
        let gmax = self.conductance.iter().fold(T::zero(), |m, &g| m.max(g));
        (0..self.len() - 1)
            .map(|i| {
                let forward = self.weights[i] * self.stencil(i).2;
                let backward = self.weights[i + 1] * self.stencil(i + 1).0;
                (forward - backward).abs() / gmax
            })
            .fold(T::zero(), T::max)
    }

    /// `max_i |Σ_j L_{ij}|` relative to the largest diagonal entry.
    pub fn row_sum_residual(&self) -> T {
        let mut worst = T::zero();
        let mut scale = T::zero();
        for i in 0..self.len() {
            let (a, b, c) = self.stencil(i);
            worst = worst.max((a + b + c).abs());
            scale = scale.max(b.abs());
        }
        worst / scale
    }

    /// Crank–Nicolson system matrices for step `dt`: implicit `W − dt/2 K`
    /// and explicit `W + dt/2 K`.
    fn crank_nicolson_matrices(&self, dt: T, implicit: &mut Tridiagonal<T>, explicit: &mut Tridiagonal<T>) {
        let n = self.len();
        let tau = dt * T::lit(0.5);
        for i in 0..n {
            let left = if i > 0 { self.conductance[i - 1] } else { T::zero() };
            let right = if i + 1 < n { self.conductance[i] } else { T::zero() };
            let w = self.weights[i];
            implicit.lower[i] = -tau * left;
            implicit.upper[i] = -tau * right;
            implicit.diag[i] = w + tau * (left + right);
            explicit.lower[i] = tau * left;
            explicit.upper[i] = tau * right;
            explicit.diag[i] = w - tau * (left + right);
        }
    }
}

/// Solution values at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionState<T> {
    pub time: T,
    pub values: Vec<T>,
    pub mass: T,
}

impl<T: Real> SolutionState<T> {
    pub fn new(op: &DiscreteOperator<T>, time: T, values: Vec<T>) -> Result<Self> {
        if values.len() != op.len() {
            return Err(HeatError::InvalidParameter(format!(
                "state has {} values but the grid has {} nodes",
                values.len(),
                op.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(HeatError::InvalidParameter("initial values must be finite".into()));
        }
        let mass = op.mass(&values);
        Ok(SolutionState { time, values, mass })
    }

    /// Discrete delta at node `j` scaled to total mass `mass`.
    pub fn delta(op: &DiscreteOperator<T>, j: usize, mass: T) -> Result<Self> {
        if j >= op.len() {
            return Err(HeatError::InvalidParameter(format!("source index {j} outside grid")));
        }
        let mut values = vec![T::zero(); op.len()];
        values[j] = mass / op.weights()[j];
        Self::new(op, T::zero(), values)
    }

    pub fn max_value(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }

    pub fn min_value(&self) -> T {
        self.values.iter().fold(T::infinity(), |m, &v| m.min(v))
    }

    /// Writes `r,u,w` rows.
    pub fn write_csv<W: Write>(&self, space: &SpaceSpec<T>, op: &DiscreteOperator<T>, mut out: W) -> Result<()> {
        writeln!(out, "r,u,w")?;
        for ((r, u), w) in space.nodes().iter().zip(&self.values).zip(op.weights()) {
            writeln!(out, "{},{},{}", fmt_sci(r.as_f64()), fmt_sci(u.as_f64()), fmt_sci(w.as_f64()))?;
        }
        Ok(())
    }
}

/// Geometric time-step schedule: `dt(t) = max(dt_min, t·(10^{1/s} − 1))`
/// with `s` steps per decade, so steps are fine where the kernel is sharp and
/// grow with `t` afterwards. `dt` depends on `t` alone, which makes runs
/// restartable bit-for-bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSchedule<T> {
    pub steps_per_decade: usize,
    pub dt_min: T,
}

impl<T: Real> TimeSchedule<T> {
    pub fn new(steps_per_decade: usize, dt_min: T) -> Result<Self> {
        if steps_per_decade < MIN_STEPS_PER_DECADE {
            return Err(HeatError::InvalidParameter(format!(
                "need at least {MIN_STEPS_PER_DECADE} steps per decade, got {steps_per_decade}"
            )));
        }
        if !(dt_min > T::zero()) {
            return Err(HeatError::InvalidParameter(format!("dt_min must be positive, got {dt_min}")));
        }
        Ok(TimeSchedule { steps_per_decade, dt_min })
    }

    /// Default schedule for a grid: `dt_min = h²/4`.
    pub fn for_space(space: &SpaceSpec<T>) -> Self {
        Self::with_steps(space, DEFAULT_STEPS_PER_DECADE)
    }

    pub fn with_steps(space: &SpaceSpec<T>, steps_per_decade: usize) -> Self {
        let h = space.spacing();
        TimeSchedule { steps_per_decade: steps_per_decade.max(MIN_STEPS_PER_DECADE), dt_min: h * h * T::lit(0.25) }
    }

    pub fn growth(&self) -> T {
        T::lit(10f64.powf(1.0 / self.steps_per_decade as f64) - 1.0)
    }

    pub fn dt_at(&self, t: T) -> T {
        self.dt_min.max(t * self.growth())
    }
}

/// Result of [`evolve_to`].
#[derive(Debug, Clone)]
pub struct Evolution<T> {
    pub state: SolutionState<T>,
    /// States at the requested snapshot times, in increasing time order.
    pub snapshots: Vec<SolutionState<T>>,
    pub steps: usize,
    /// Largest per-step relative change of `Σ w_i u_i`.
    pub max_mass_drift: f64,
    /// Largest `−min u / max |u|` seen after any step.
    pub worst_undershoot: f64,
}

/// Crank–Nicolson stepper with reusable scratch buffers.
pub struct CrankNicolson<'a, T> {
    op: &'a DiscreteOperator<T>,
    implicit: Tridiagonal<T>,
    explicit: Tridiagonal<T>,
    rhs: Vec<T>,
    scratch: Vec<T>,
    cached_dt: Option<T>,
}

impl<'a, T: Real> CrankNicolson<'a, T> {
    pub fn new(op: &'a DiscreteOperator<T>) -> Self {
        let n = op.len();
        let blank = || Tridiagonal { lower: vec![T::zero(); n], diag: vec![T::zero(); n], upper: vec![T::zero(); n] };
        CrankNicolson {
            op,
            implicit: blank(),
            explicit: blank(),
            rhs: vec![T::zero(); n],
            scratch: vec![T::zero(); n],
            cached_dt: None,
        }
    }

    /// Advances `values` in place by `dt`.
    pub fn advance(&mut self, values: &mut [T], dt: T) -> Result<()> {
        if !(dt > T::zero()) {
            return Err(HeatError::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        if self.cached_dt != Some(dt) {
            self.op.crank_nicolson_matrices(dt, &mut self.implicit, &mut self.explicit);
            if !self.implicit.is_diagonally_dominant() {
                return Err(HeatError::Solver("Crank–Nicolson matrix lost diagonal dominance".into()));
            }
            self.cached_dt = Some(dt);
        }
        let mass_before = self.op.mass(values);
        self.explicit.apply(values, &mut self.rhs);
        self.implicit.solve_in_place(&mut self.rhs, &mut self.scratch)?;
        // The direct solve loses conservation at the level ε·dt/h² relative;
        // project the round-off defect back proportionally to |u_i|.
        let defect = self.op.mass(&self.rhs) - mass_before;
        let spread = self.op.l1_norm(&self.rhs);
        if spread > T::zero() && defect != T::zero() {
            let c = defect / spread;
            for v in self.rhs.iter_mut() {
                *v = *v - c * v.abs();
            }
        }
        values.copy_from_slice(&self.rhs);
        Ok(())
    }
}

/// One Crank–Nicolson step `(I − dt/2 L) u' = (I + dt/2 L) u`.
pub fn step<T: Real>(state: &SolutionState<T>, op: &DiscreteOperator<T>, dt: T) -> Result<SolutionState<T>> {
    let mut values = state.values.clone();
    CrankNicolson::new(op).advance(&mut values, dt)?;
    let mass = op.mass(&values);
    Ok(SolutionState { time: state.time + dt, values, mass })
}

/// Evolves `state` to `t_target`, stopping exactly at every snapshot time in
/// `(state.time, t_target]`.
pub fn evolve_to<T: Real>(
    state: SolutionState<T>,
    op: &DiscreteOperator<T>,
    t_target: T,
    schedule: &TimeSchedule<T>,
    snapshot_times: &[T],
) -> Result<Evolution<T>> {
    if !(t_target > state.time) {
        return Err(HeatError::Precondition(format!(
            "target time {t_target} must exceed current time {}",
            state.time
        )));
    }
    let mut stops: Vec<T> = snapshot_times
        .iter()
        .copied()
        .filter(|&s| s > state.time && s < t_target)
        .collect();
    stops.sort_by(|a, b| a.partial_cmp(b).expect("finite snapshot times"));
    stops.dedup();
    stops.push(t_target);
    let wants_target_snapshot = snapshot_times.contains(&t_target);

    let mut stepper = CrankNicolson::new(op);
    let SolutionState { mut time, mut values, .. } = state;
    let mut mass = op.mass(&values);
    let mut snapshots = Vec::new();
    let mut steps = 0;
    let mut max_mass_drift = 0.0_f64;
    let mut worst_undershoot = 0.0_f64;
    for (k, &stop) in stops.iter().enumerate() {
        while time < stop {
            let mut dt = schedule.dt_at(time);
            if time + dt >= stop {
                dt = stop - time;
            }
            stepper.advance(&mut values, dt)?;
            time = if time + dt >= stop { stop } else { time + dt };
            steps += 1;
            let new_mass = op.mass(&values);
            let scale = op.l1_norm(&values).max(T::min_positive_value());
            max_mass_drift = max_mass_drift.max(((new_mass - mass).abs() / scale).as_f64());
            mass = new_mass;
            let (lo, hi) = values.iter().fold((T::infinity(), T::zero()), |(lo, hi), &v| (lo.min(v), hi.max(v.abs())));
            if hi > T::zero() {
                worst_undershoot = worst_undershoot.max((-lo / hi).as_f64());
            }
        }
        let is_last = k + 1 == stops.len();
        if !is_last || wants_target_snapshot {
            snapshots.push(SolutionState { time, values: values.clone(), mass });
        }
    }
    Ok(Evolution {
        state: SolutionState { time, values, mass },
        snapshots,
        steps,
        max_mass_drift,
        worst_undershoot,
    })
}

/// Run manifest: `(space, schedule, t_list, checksums)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub space: SpaceConfig,
    pub schedule: TimeSchedule<f64>,
    pub t_list: Vec<f64>,
    /// FNV-1a checksums of the snapshot values, one per entry of `t_list`.
    pub checksums: Vec<String>,
}

impl RunManifest {
    pub fn new<T: Real>(space: &SpaceSpec<T>, schedule: &TimeSchedule<T>, snapshots: &[SolutionState<T>]) -> Self {
        RunManifest {
            space: SpaceConfig::from_space(space),
            schedule: TimeSchedule { steps_per_decade: schedule.steps_per_decade, dt_min: schedule.dt_min.as_f64() },
            t_list: snapshots.iter().map(|s| s.time.as_f64()).collect(),
            checksums: snapshots.iter().map(|s| checksum_values(&s.values)).collect(),
        }
    }
}
