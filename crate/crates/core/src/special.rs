//! Gamma function and unit-sphere measures.

use crate::scalar::Real;

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function via the Lanczos approximation (g = 7, nine terms), with
/// reflection for arguments below one half. Relative accuracy is about
/// 1e-15 in `f64`.
pub fn gamma<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    if x < half {
        // Γ(x)Γ(1−x) = π / sin(πx)
        let pi = T::PI();
        return pi / ((pi * x).sin() * gamma(T::one() - x));
    }
    let x = x - T::one();
    let mut acc = T::lit(LANCZOS_COEFFS[0]);
    for (k, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc = acc + T::lit(c) / (x + T::from_usize_lossy(k));
    }
    let t = x + T::lit(LANCZOS_G) + half;
    (T::lit(2.0) * T::PI()).sqrt() * t.powf(x + half) * (-t).exp() * acc
}

/// Surface area of the unit sphere in ℝ^dim, `2π^{dim/2} / Γ(dim/2)`.
pub fn unit_sphere_area<T: Real>(dim: u32) -> T {
    let half_dim = T::lit(f64::from(dim) / 2.0);
    T::lit(2.0) * T::PI().powf(half_dim) / gamma(half_dim)
}

/// Volume of the unit ball in ℝ^dim.
pub fn unit_ball_volume<T: Real>(dim: u32) -> T {
    unit_sphere_area::<T>(dim) / T::lit(f64::from(dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integer_factorials() {
        let mut fact = 1.0_f64;
        for k in 1..=20u32 {
            assert_relative_eq!(gamma(f64::from(k)), fact, max_relative = 1e-13);
            fact *= f64::from(k);
        }
    }

    #[test]
    fn half_integers() {
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert_relative_eq!(gamma(0.5_f64), sqrt_pi, max_relative = 1e-14);
        assert_relative_eq!(gamma(1.5_f64), sqrt_pi / 2.0, max_relative = 1e-14);
        assert_relative_eq!(gamma(2.5_f64), 0.75 * sqrt_pi, max_relative = 1e-14);
        assert_relative_eq!(gamma(-0.5_f64), -2.0 * sqrt_pi, max_relative = 1e-13);
    }

    #[test]
    fn sphere_areas() {
        use std::f64::consts::PI;
        assert_relative_eq!(unit_sphere_area::<f64>(1), 2.0, max_relative = 1e-13);
        assert_relative_eq!(unit_sphere_area::<f64>(2), 2.0 * PI, max_relative = 1e-13);
        assert_relative_eq!(unit_sphere_area::<f64>(3), 4.0 * PI, max_relative = 1e-13);
        assert_relative_eq!(unit_sphere_area::<f64>(4), 2.0 * PI * PI, max_relative = 1e-13);
        assert_relative_eq!(unit_ball_volume::<f64>(3), 4.0 * PI / 3.0, max_relative = 1e-13);
        assert_relative_eq!(unit_sphere_area::<f32>(3), 4.0 * std::f32::consts::PI, max_relative = 1e-5);
    }
}
