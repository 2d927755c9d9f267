//! Weighted one-dimensional model spaces.
//!
//! A rotationally symmetric manifold is represented by its radial axis with
//! measure `dμ = A(r) dr`. Euclidean space ℝⁿ becomes the half-line `[0, L]`
//! with `A(r) = ω_{n−1} r^{n−1}` (reflecting pole at `r = 0`); the connected
//! sum ℝⁿ#ℝⁿ becomes the full line `[−L, L]` with
//! `A(r) = ω_{n−1} (R² + r²)^{(n−1)/2}`, whose two halves are the ends E±.
//! Distances along the axis are `|r − s|`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{HeatError, Result};
use crate::quadrature;
use crate::scalar::Real;
use crate::special::unit_sphere_area;

/// Smallest admissible number of grid intervals.
pub const MIN_POINTS: usize = 100;

/// Default ceiling for the fitted doubling constant.
pub const DEFAULT_DOUBLING_CEILING: f64 = 1.0e3;

#[derive(Debug, Clone, PartialEq)]
pub enum SpaceKind<T> {
    /// ℝⁿ reduced to its radial half-line.
    EuclideanRadial,
    /// Two Euclidean ends joined by a neck of radius `neck_radius`.
    DumbbellLine { neck_radius: T },
    /// Half-line with polynomial density `Σ c_k r^k`.
    CustomDensity { coefficients: Vec<T> },
}

/// Truncation boundary condition. Only the mass-conserving variant exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    ReflectingBothEnds,
}

/// A weighted 1-D metric-measure space on a uniform grid. Immutable after
/// construction.
#[derive(Debug, Clone)]
pub struct SpaceSpec<T> {
    kind: SpaceKind<T>,
    dimension: u32,
    sphere_area: T,
    extent: T,
    lower: T,
    upper: T,
    intervals: usize,
    spacing: T,
    nodes: Vec<T>,
    density: Vec<T>,
    // trapezoid prefix integral of A at the nodes
    cumulative: Vec<T>,
    boundary: Boundary,
}

impl<T: Real> SpaceSpec<T> {
    /// Builds a space of the given kind with `points` grid intervals.
    ///
    /// `extent` is the half-line length `L` for half-line spaces and the
    /// half-width `L` of `[−L, L]` for the dumbbell.
    pub fn build(kind: SpaceKind<T>, dimension: u32, extent: T, points: usize) -> Result<Self> {
        if dimension < 2 {
            return Err(HeatError::InvalidParameter(format!("dimension must be at least 2, got {dimension}")));
        }
        if !(extent > T::zero()) || !extent.is_finite() {
            return Err(HeatError::InvalidParameter(format!("extent must be positive, got {extent}")));
        }
        if points < MIN_POINTS {
            return Err(HeatError::InvalidParameter(format!(
                "need at least {MIN_POINTS} grid intervals, got {points}"
            )));
        }
        let (lower, upper) = match &kind {
            SpaceKind::EuclideanRadial | SpaceKind::CustomDensity { .. } => (T::zero(), extent),
            SpaceKind::DumbbellLine { neck_radius } => {
                if !(*neck_radius > T::zero()) {
                    return Err(HeatError::InvalidParameter(format!(
                        "neck radius must be positive, got {neck_radius}"
                    )));
                }
                if extent < T::lit(10.0) * *neck_radius {
                    return Err(HeatError::InvalidParameter(format!(
                        "dumbbell extent {extent} must be at least 10 neck radii ({neck_radius})"
                    )));
                }
                (-extent, extent)
            }
        };
        if let SpaceKind::CustomDensity { coefficients } = &kind {
            if coefficients.is_empty() {
                return Err(HeatError::InvalidParameter("custom density needs coefficients".into()));
            }
        }
        let spacing = (upper - lower) / T::from_usize_lossy(points);
        if !(spacing > T::zero()) {
            return Err(HeatError::InvalidParameter("grid spacing underflows".into()));
        }
        let mut space = SpaceSpec {
            kind,
            dimension,
            sphere_area: unit_sphere_area(dimension),
            extent,
            lower,
            upper,
            intervals: points,
            spacing,
            nodes: Vec::new(),
            density: Vec::new(),
            cumulative: Vec::new(),
            boundary: Boundary::ReflectingBothEnds,
        };
        space.nodes = (0..=points)
            .map(|i| {
                if i == points {
                    upper
                } else {
                    lower + spacing * T::from_usize_lossy(i)
                }
            })
            .collect();
        space.density = space.nodes.iter().map(|&r| space.density_at(r)).collect();
        for (i, &a) in space.density.iter().enumerate() {
            let pole_node = i == 0 && space.has_pole();
            if !(a > T::zero()) && !pole_node || !a.is_finite() {
                return Err(HeatError::InvalidParameter(format!(
                    "density must be positive at every grid node; A({}) = {a}",
                    space.nodes[i]
                )));
            }
        }
        let half = T::lit(0.5);
        let mut acc = T::zero();
        space.cumulative.push(acc);
        for w in space.density.windows(2) {
            acc = acc + half * spacing * (w[0] + w[1]);
            space.cumulative.push(acc);
        }
        Ok(space)
    }

    pub fn euclidean(dimension: u32, extent: T, points: usize) -> Result<Self> {
        Self::build(SpaceKind::EuclideanRadial, dimension, extent, points)
    }

    pub fn dumbbell(dimension: u32, neck_radius: T, extent: T, points: usize) -> Result<Self> {
        Self::build(SpaceKind::DumbbellLine { neck_radius }, dimension, extent, points)
    }

    pub fn custom(coefficients: Vec<T>, dimension: u32, extent: T, points: usize) -> Result<Self> {
        Self::build(SpaceKind::CustomDensity { coefficients }, dimension, extent, points)
    }

    /// Area density `A(r)`.
    pub fn density_at(&self, r: T) -> T {
        match &self.kind {
            SpaceKind::EuclideanRadial => self.sphere_area * r.abs().powi(self.dimension as i32 - 1),
            SpaceKind::DumbbellLine { neck_radius } => {
                let exponent = T::lit(f64::from(self.dimension - 1) / 2.0);
                self.sphere_area * (*neck_radius * *neck_radius + r * r).powf(exponent)
            }
            SpaceKind::CustomDensity { coefficients } => {
                coefficients.iter().rev().fold(T::zero(), |acc, &c| acc * r + c)
            }
        }
    }

    pub fn kind(&self) -> &SpaceKind<T> {
        &self.kind
    }

    pub fn dimension(&self) -> u32 {
        self.dimension
    }

    /// `ω_{n−1}`, surface area of the unit sphere in ℝⁿ.
    pub fn sphere_area(&self) -> T {
        self.sphere_area
    }

    pub fn extent(&self) -> T {
        self.extent
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Number of grid nodes (intervals + 1).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> T {
        self.nodes[i]
    }

    pub fn density(&self) -> &[T] {
        &self.density
    }

    pub fn domain(&self) -> (T, T) {
        (self.lower, self.upper)
    }

    /// Half-line spaces have a reflecting pole at `r = 0`.
    pub fn has_pole(&self) -> bool {
        matches!(self.kind, SpaceKind::EuclideanRadial)
    }

    pub fn is_two_ended(&self) -> bool {
        matches!(self.kind, SpaceKind::DumbbellLine { .. })
    }

    pub fn neck_radius(&self) -> Option<T> {
        match self.kind {
            SpaceKind::DumbbellLine { neck_radius } => Some(neck_radius),
            _ => None,
        }
    }

    /// Default base point: the pole of a half-line, the neck centre of the
    /// dumbbell.
    pub fn default_base_point(&self) -> T {
        if self.is_two_ended() {
            T::zero()
        } else {
            self.lower
        }
    }

    pub fn distance(&self, r: T, s: T) -> T {
        (r - s).abs()
    }

    /// Index of the grid node nearest to `r` (clamped to the domain).
    pub fn nearest_index(&self, r: T) -> usize {
        let x = ((r - self.lower) / self.spacing).round();
        let x = x.max(T::zero()).min(T::from_usize_lossy(self.intervals));
        x.to_usize().unwrap_or(0)
    }

    /// Largest distance from `r` to a point of the domain.
    pub fn reach(&self, r: T) -> T {
        (r - self.lower).max(self.upper - r)
    }

    /// Measure of `[a, b] ∩ domain` by the trapezoid rule on the grid, with
    /// partial end panels evaluated from the closed-form density.
    pub fn measure_between(&self, a: T, b: T) -> T {
        let a = a.max(self.lower);
        let b = b.min(self.upper);
        if !(b > a) {
            return T::zero();
        }
        let half = T::lit(0.5);
        let last = self.intervals;
        let cell_of = |x: T| -> usize {
            let k = ((x - self.lower) / self.spacing).floor().to_usize().unwrap_or(0);
            k.min(last - 1)
        };
        let ia = cell_of(a);
        let ib = cell_of(b);
        let (da, db) = (self.density_at(a), self.density_at(b));
        if ia == ib {
            return half * (b - a) * (da + db);
        }
        let head = half * (self.nodes[ia + 1] - a) * (da + self.density[ia + 1]);
        let body = self.cumulative[ib] - self.cumulative[ia + 1];
        let tail = half * (b - self.nodes[ib]) * (self.density[ib] + db);
        head + body + tail
    }

    /// `V(r₀, ρ)`: measure of the ball `[r₀ − ρ, r₀ + ρ]` clipped to the
    /// domain. On a half-line the ball around the pole is `[0, ρ]`.
    pub fn ball_volume(&self, center: T, radius: T) -> T {
        assert!(radius >= T::zero(), "ball radius must be non-negative");
        self.measure_between(center - radius, center + radius)
    }

    /// Total measure of the truncated domain.
    pub fn total_measure(&self) -> T {
        self.cumulative[self.intervals]
    }

    /// Cell-integrated measure of every node: `∫ A` over
    /// `[r_i − h/2, r_i + h/2] ∩ domain`, by Gauss–Legendre on each half
    /// cell. End nodes receive half cells.
    pub fn cell_measures(&self) -> Vec<T> {
        let half = self.spacing * T::lit(0.5);
        let dens = |r: T| self.density_at(r);
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let mut w = T::zero();
                if i > 0 {
                    w = w + quadrature::gauss_legendre(dens, r - half, r);
                }
                if i < self.intervals {
                    w = w + quadrature::gauss_legendre(dens, r, r + half);
                }
                w
            })
            .collect()
    }

    /// `∫_a^b f(r) dμ(r)` by the composite five-point rule over grid cells.
    pub fn integrate<F: Fn(T) -> T>(&self, f: F, a: T, b: T) -> T {
        let a = a.max(self.lower);
        let b = b.min(self.upper);
        if !(b > a) {
            return T::zero();
        }
        let panels = ((b - a) / self.spacing).ceil().to_usize().unwrap_or(1).max(1);
        quadrature::composite(|r| f(r) * self.density_at(r), a, b, panels)
    }

    /// Volumes `V(center, ρ)` for each radius.
    pub fn volume_table(&self, center: T, radii: &[T]) -> VolumeTable<T> {
        VolumeTable {
            center,
            radii: radii.to_vec(),
            volumes: radii.iter().map(|&r| self.ball_volume(center, r)).collect(),
        }
    }
}

/// Ball volumes around a fixed centre.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeTable<T> {
    pub center: T,
    pub radii: Vec<T>,
    pub volumes: Vec<T>,
}

impl<T: Real> VolumeTable<T> {
    /// Writes `radius,volume` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "radius,volume")?;
        for (r, v) in self.radii.iter().zip(&self.volumes) {
            writeln!(out, "{:.16e},{:.16e}", r.as_f64(), v.as_f64())?;
        }
        Ok(())
    }
}

/// Empirical volume-growth exponents on a sampled radius window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoublingFit {
    /// Upper exponent: sup of `log(V(R)/V(r)) / log(R/r)`.
    pub nu: f64,
    /// Lower exponent: inf of the same quotient.
    pub nu_prime: f64,
    /// sup of `V(2r)/V(r)`.
    pub doubling_constant: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub pairs: usize,
}

pub fn fit_doubling_exponents<T: Real>(space: &SpaceSpec<T>, center: T, r_min: T, r_max: T) -> Result<DoublingFit> {
    fit_doubling_exponents_with(space, center, r_min, r_max, 41, DEFAULT_DOUBLING_CEILING)
}

/// Fits `ν`, `ν′` and the doubling constant over `samples` log-spaced radii
/// in `[r_min, r_max]`. Pairs with `R/r < 2` are excluded.
pub fn fit_doubling_exponents_with<T: Real>(
    space: &SpaceSpec<T>,
    center: T,
    r_min: T,
    r_max: T,
    samples: usize,
    ceiling: f64,
) -> Result<DoublingFit> {
    let (lo, hi) = (r_min.as_f64(), r_max.as_f64());
    if !(lo > 0.0) || !(hi >= 2.0 * lo) {
        return Err(HeatError::Precondition(format!(
            "radius range [{lo}, {hi}] must be positive with R/r >= 2"
        )));
    }
    if hi / lo < 100.0 {
        return Err(HeatError::Precondition(format!(
            "radius range [{lo}, {hi}] spans less than two decades"
        )));
    }
    if lo < space.spacing().as_f64() || hi > space.reach(center).as_f64() {
        return Err(HeatError::Precondition(format!(
            "radius range [{lo}, {hi}] is not resolved by the grid (spacing {}, reach {})",
            space.spacing(),
            space.reach(center)
        )));
    }
    let samples = samples.max(3);
    let radii: Vec<f64> = (0..samples)
        .map(|k| lo * (hi / lo).powf(k as f64 / (samples - 1) as f64))
        .collect();
    let vol = |r: f64| space.ball_volume(center, T::lit(r)).as_f64();
    let volumes: Vec<f64> = radii.iter().map(|&r| vol(r)).collect();
    let mut nu = f64::NEG_INFINITY;
    let mut nu_prime = f64::INFINITY;
    let mut pairs = 0;
    for i in 0..samples {
        for j in i + 1..samples {
            let ratio = radii[j] / radii[i];
            if ratio < 2.0 {
                continue;
            }
            let q = (volumes[j] / volumes[i]).ln() / ratio.ln();
            nu = nu.max(q);
            nu_prime = nu_prime.min(q);
            pairs += 1;
        }
    }
    let doubling_constant = radii
        .iter()
        .filter(|&&r| 2.0 * r <= hi)
        .map(|&r| vol(2.0 * r) / vol(r))
        .fold(f64::NEG_INFINITY, f64::max);
    if !(doubling_constant <= ceiling) {
        return Err(HeatError::NotDoubling { constant: doubling_constant, ceiling });
    }
    Ok(DoublingFit { nu, nu_prime, doubling_constant, r_min: lo, r_max: hi, pairs })
}

/// Outcome of comparing ball volumes at two centres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// `V(x, r) / V(y, r)`.
    pub ratio: f64,
    /// `C (1 + d(x,y)/r)^ν`.
    pub bound: f64,
    pub pass: bool,
}

/// Checks `V(x,r)/V(y,r) ≤ C (1 + d(x,y)/r)^ν` with `C` the doubling constant
/// and `ν` the upper exponent of `fit`.
pub fn volume_comparison_check<T: Real>(space: &SpaceSpec<T>, x: T, y: T, r: T, fit: &DoublingFit) -> ComparisonReport {
    let ratio = (space.ball_volume(x, r) / space.ball_volume(y, r)).as_f64();
    let d_over_r = (space.distance(x, y) / r).as_f64();
    let bound = fit.doubling_constant.max(1.0) * (1.0 + d_over_r).powf(fit.nu);
    ComparisonReport { ratio, bound, pass: ratio <= bound * (1.0 + 1e-12) }
}

/// Serializable description of a space: `{kind, n, R, extent, points}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceConfig {
    pub kind: SpaceKindTag,
    pub n: u32,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub neck_radius: Option<f64>,
    pub extent: f64,
    pub points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKindTag {
    EuclideanRadial,
    DumbbellLine,
    CustomDensity,
}

impl SpaceConfig {
    pub fn euclidean(n: u32, extent: f64, points: usize) -> Self {
        SpaceConfig { kind: SpaceKindTag::EuclideanRadial, n, neck_radius: None, extent, points, coefficients: None }
    }

    pub fn dumbbell(n: u32, neck_radius: f64, extent: f64, points: usize) -> Self {
        SpaceConfig {
            kind: SpaceKindTag::DumbbellLine,
            n,
            neck_radius: Some(neck_radius),
            extent,
            points,
            coefficients: None,
        }
    }

    pub fn build<T: Real>(&self) -> Result<SpaceSpec<T>> {
        let kind = match self.kind {
            SpaceKindTag::EuclideanRadial => SpaceKind::EuclideanRadial,
            SpaceKindTag::DumbbellLine => {
                let r = self
                    .neck_radius
                    .ok_or_else(|| HeatError::InvalidParameter("dumbbell_line requires \"R\"".into()))?;
                SpaceKind::DumbbellLine { neck_radius: T::lit(r) }
            }
            SpaceKindTag::CustomDensity => {
                let c = self
                    .coefficients
                    .as_ref()
                    .ok_or_else(|| HeatError::InvalidParameter("custom_density requires \"coefficients\"".into()))?;
                SpaceKind::CustomDensity { coefficients: c.iter().map(|&v| T::lit(v)).collect() }
            }
        };
        SpaceSpec::build(kind, self.n, T::lit(self.extent), self.points)
    }

    pub fn from_space<T: Real>(space: &SpaceSpec<T>) -> Self {
        let (kind, neck_radius, coefficients) = match space.kind() {
            SpaceKind::EuclideanRadial => (SpaceKindTag::EuclideanRadial, None, None),
            SpaceKind::DumbbellLine { neck_radius } => (SpaceKindTag::DumbbellLine, Some(neck_radius.as_f64()), None),
            SpaceKind::CustomDensity { coefficients } => (
                SpaceKindTag::CustomDensity,
                None,
                Some(coefficients.iter().map(|c| c.as_f64()).collect()),
            ),
        };
        SpaceConfig {
            kind,
            n: space.dimension(),
            neck_radius,
            extent: space.extent().as_f64(),
            points: space.intervals(),
            coefficients,
        }
    }
}
