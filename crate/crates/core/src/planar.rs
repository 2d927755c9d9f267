//! Solutions of the heat equation on the Euclidean plane with genuinely
//! off-centre data, from the closed-form kernel by tensor quadrature.
//!
//! The Gaussian kernel factorises over coordinates, so on tensor grids
//! `u(t) = G₁ U₀ G₂ᵀ` with `G` the one-dimensional kernel matrices and
//! `U₀` the initial data times the source cell area.

use serde::{Deserialize, Serialize};

use crate::asymptotics::{BumpShape, ConvergenceRow, ConvergenceSeries, Phi, LEAKAGE_BAND, LEAKAGE_THRESHOLD};
use crate::error::{HeatError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarConfig {
    /// Points per axis of the evaluation grid.
    pub grid: usize,
    /// Points per axis of the source grid covering the bump's square.
    pub source_grid: usize,
    pub center: [f64; 2],
    pub radius: f64,
    pub mass: f64,
    pub shape: BumpShape,
    pub times: Vec<f64>,
    pub p: f64,
    pub phi: Phi,
    /// The evaluation box is `[−w√t − margin, w√t + margin]²` with `w` this
    /// factor.
    pub width_factor: f64,
    pub margin: f64,
}

impl Default for PlanarConfig {
    fn default() -> Self {
        PlanarConfig {
            grid: 400,
            source_grid: 200,
            center: [3.0, 0.0],
            radius: 2.0,
            mass: 1.0,
            shape: BumpShape::Triangle,
            times: (0..=8).map(|k| 100.0 * 10f64.powf(k as f64 / 4.0)).collect(),
            p: 2.0,
            phi: Phi::default(),
            width_factor: 8.0,
            margin: 5.0,
        }
    }
}

fn midpoints(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let d = (hi - lo) / n as f64;
    (0..n).map(|k| lo + (k as f64 + 0.5) * d).collect()
}

fn gauss_1d(t: f64, z: f64) -> f64 {
    (-z * z / (4.0 * t)).exp() / (4.0 * std::f64::consts::PI * t).sqrt()
}

/// Row-major `rows × cols` matrix with entries `f(i, j)`.
fn matrix(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let mut m = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            m.push(f(i, j));
        }
    }
    m
}

/// `a (n×k) · bᵀ` with `b (m×k)`.
fn mul_transposed(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let ar = &a[i * k..(i + 1) * k];
        for j in 0..m {
            let br = &b[j * k..(j + 1) * k];
            out[i * m + j] = ar.iter().zip(br).map(|(x, y)| x * y).sum();
        }
    }
    out
}

/// Convergence series of `u(t) − M h_t(·, 0)` for a bump on the plane.
/// Ball volumes are exact, `V(x, √t) = πt`.
pub fn planar_experiment(cfg: &PlanarConfig) -> Result<ConvergenceSeries> {
    if cfg.grid < 10 || cfg.source_grid < 2 {
        return Err(HeatError::InvalidParameter("planar grids are too coarse".into()));
    }
    if !(cfg.radius > 0.0) || !(cfg.p >= 1.0) || cfg.times.iter().any(|&t| !(t > 0.0)) {
        return Err(HeatError::InvalidParameter("radius, p or times out of range".into()));
    }
    let (a, m) = (cfg.radius, cfg.source_grid);
    let ys1 = midpoints(cfg.center[0] - a, cfg.center[0] + a, m);
    let ys2 = midpoints(cfg.center[1] - a, cfg.center[1] + a, m);
    let dy = 2.0 * a / m as f64;
    let mut source = matrix(m, m, |k, l| {
        let r = ((ys1[k] - cfg.center[0]).powi(2) + (ys2[l] - cfg.center[1]).powi(2)).sqrt();
        cfg.shape.profile(r / a)
    });
    let raw: f64 = source.iter().sum::<f64>() * dy * dy;
    if !(raw > 0.0) {
        return Err(HeatError::InvalidParameter("bump covers no source node".into()));
    }
    // scaled to mass M and multiplied by the source cell area
    source.iter_mut().for_each(|v| *v *= cfg.mass / raw * dy * dy);

    let n = cfg.grid;
    let dual = 1.0 - 1.0 / cfg.p;
    let mut rows = Vec::with_capacity(cfg.times.len());
    let mut max_leakage = 0.0_f64;
    for &t in &cfg.times {
        let half = cfg.width_factor * t.sqrt() + cfg.margin;
        let xs = midpoints(-half, half, n);
        let dx = 2.0 * half / n as f64;
        let g1 = matrix(n, m, |i, k| gauss_1d(t, xs[i] - ys1[k]));
        let g2 = matrix(n, m, |j, l| gauss_1d(t, xs[j] - ys2[l]));
        // (G₁ U₀) is n×m; multiplying by G₂ᵀ needs U₀ᵀ-major rows, so form
        // G₁ U₀ as (U₀ᵀ G₁ᵀ)ᵀ via rows of U₀ᵀ
        let source_t = matrix(m, m, |l, k| source[k * m + l]);
        let g1u = mul_transposed(&g1, &source_t, n, m, m);
        let u = mul_transposed(&g1u, &g2, n, m, n);
        let kernel: Vec<f64> = xs.iter().map(|&x| gauss_1d(t, x)).collect();
        let vol = std::f64::consts::PI * t;
        let phi = cfg.phi.at(t);
        let (inner, outer) = (phi * t.sqrt(), t.sqrt() / phi);
        let band = half * (1.0 - LEAKAGE_BAND);
        let mut row = ConvergenceRow {
            t,
            l1_gap: 0.0,
            wsup_gap: 0.0,
            lp_gap: 0.0,
            mass_in: 0.0,
            mass_out: 0.0,
            inside_gap: 0.0,
            outside_gap: 0.0,
        };
        let (mut total_abs, mut edge_abs) = (0.0, 0.0);
        let cell = dx * dx;
        for i in 0..n {
            for j in 0..n {
                let h = kernel[i] * kernel[j];
                let v = u[i * n + j];
                let g = (v - cfg.mass * h).abs();
                let d = (xs[i] * xs[i] + xs[j] * xs[j]).sqrt();
                row.l1_gap += g * cell;
                row.wsup_gap = row.wsup_gap.max(g * vol);
                row.lp_gap += cell * (g * vol.powf(dual)).powf(cfg.p);
                if d >= inner && d <= outer {
                    row.mass_in += h * cell;
                    row.inside_gap += g * cell;
                } else {
                    row.mass_out += h * cell;
                    row.outside_gap += g * cell;
                }
                total_abs += v.abs() * cell;
                if xs[i].abs() >= band || xs[j].abs() >= band {
                    edge_abs += v.abs() * cell;
                }
            }
        }
        row.lp_gap = row.lp_gap.powf(1.0 / cfg.p);
        let leak = if total_abs > 0.0 { edge_abs / total_abs } else { 0.0 };
        if leak > LEAKAGE_THRESHOLD {
            return Err(HeatError::NumericalAbort(format!(
                "planar box leaks {leak:.3e} of the mass at t = {t}, above {LEAKAGE_THRESHOLD:e}"
            )));
        }
        max_leakage = max_leakage.max(leak);
        rows.push(row);
    }
    Ok(ConvergenceSeries {
        mass: cfg.mass,
        p: cfg.p,
        initial_l1: cfg.mass.abs(),
        rows,
        max_leakage,
        flags: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::rate_fit;

    #[test]
    fn centred_gaussian_data_has_tiny_gap() {
        // a narrow bump at the origin is nearly M δ₀
        let cfg = PlanarConfig {
            center: [0.0, 0.0],
            radius: 0.05,
            grid: 200,
            source_grid: 20,
            times: vec![100.0],
            ..Default::default()
        };
        let s = planar_experiment(&cfg).unwrap();
        assert!(s.rows[0].l1_gap < 1e-4, "{:?}", s.rows[0]);
    }

    #[test]
    fn kernel_mass_on_the_box() {
        let cfg = PlanarConfig { grid: 200, source_grid: 40, times: vec![100.0, 1e4], ..Default::default() };
        let s = planar_experiment(&cfg).unwrap();
        for r in &s.rows {
            assert!((r.mass_in + r.mass_out - 1.0).abs() < 1e-7, "{r:?}");
            assert!(((r.inside_gap + r.outside_gap) - r.l1_gap).abs() <= 1e-12);
        }
    }

    #[test]
    fn first_moment_asymptotics() {
        // u − h ≈ −m·∇h with |m| = 3: L¹ gap → 3·E|∂₁h| = 3/√(πt)
        let cfg = PlanarConfig { grid: 300, source_grid: 100, times: vec![1e4], ..Default::default() };
        let s = planar_experiment(&cfg).unwrap();
        let oracle = 3.0 / (std::f64::consts::PI * 1e4).sqrt();
        assert!((s.rows[0].l1_gap / oracle - 1.0).abs() < 0.02, "{} {oracle}", s.rows[0].l1_gap);
    }

    #[test]
    fn off_centre_rate_is_one_half() {
        let s = planar_experiment(&PlanarConfig::default()).unwrap();
        let fit = rate_fit(&s, 1e2, 1e4).unwrap();
        assert!((0.4..=0.6).contains(&fit.eta), "{fit:?}");
        let ratio = s.row_at(1e4).unwrap().wsup_gap / s.row_at(1e2).unwrap().wsup_gap;
        assert!(ratio <= 0.1, "{ratio}");
        assert!(s.interpolation_slack() <= 1e-6);
    }

    #[test]
    fn narrow_box_aborts() {
        let cfg = PlanarConfig { width_factor: 2.0, margin: 0.0, grid: 100, source_grid: 20, times: vec![100.0], ..Default::default() };
        assert!(matches!(planar_experiment(&cfg), Err(HeatError::NumericalAbort(_))));
    }
}
