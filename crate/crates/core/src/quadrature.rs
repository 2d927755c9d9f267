//! Fixed-order Gauss–Legendre quadrature.

use crate::scalar::Real;

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Five-point Gauss–Legendre rule on `[a, b]`; exact for polynomials of
/// degree nine.
pub fn gauss_legendre<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T) -> T {
    let half = (b - a) * T::lit(0.5);
    let mid = (a + b) * T::lit(0.5);
    GL5_NODES
        .iter()
        .zip(GL5_WEIGHTS.iter())
        .map(|(&x, &w)| T::lit(w) * f(mid + half * T::lit(x)))
        .sum::<T>()
        * half
}

/// Composite five-point rule over `panels` equal panels.
pub fn composite<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, panels: usize) -> T {
    let panels = panels.max(1);
    let width = (b - a) / T::from_usize_lossy(panels);
    (0..panels)
        .map(|k| {
            let lo = a + width * T::from_usize_lossy(k);
            gauss_legendre(&f, lo, lo + width)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exactness() {
        let v = gauss_legendre(|x: f64| x.powi(9) + 3.0 * x.powi(4), 0.0, 2.0);
        let exact = 2f64.powi(10) / 10.0 + 3.0 * 2f64.powi(5) / 5.0;
        assert!((v - exact).abs() < 1e-11 * exact);
    }

    #[test]
    fn gaussian_integral() {
        let v = composite(|x: f64| (-x * x).exp(), -10.0, 10.0, 200);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }
}
