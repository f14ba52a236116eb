//! Special functions and exact small arithmetic used by every closed-form
//! constant in the crate: Gamma/Beta, the sine-power integral S(a,b),
//! Euclidean unit-ball volumes, exact half-integers and exact quarter-turn
//! (i^k) phases.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpecFunError {
    #[error("gamma pole at nonpositive integer z = {0}")]
    GammaPole(f64),
}

// Lanczos approximation, g = 607/128, 15 terms (Godfrey/Pugh coefficients).
const LANCZOS_G: f64 = 607.0 / 128.0;
const LANCZOS_C: [f64; 15] = [
    0.999_999_999_999_997_09,
    57.156_235_665_862_923,
    -59.597_960_355_475_491,
    14.136_097_974_741_747,
    -0.491_913_816_097_620_2,
    3.399_464_998_481_188_9e-5,
    4.652_362_892_704_857_6e-5,
    -9.837_447_530_487_956_5e-5,
    1.580_887_032_249_124_9e-4,
    -2.102_644_417_241_048_8e-4,
    2.174_396_181_152_126_4e-4,
    -1.643_181_065_367_639e-4,
    8.441_822_398_385_274_5e-5,
    -2.619_083_840_158_140_9e-5,
    3.689_918_265_953_162_3e-6,
];

fn is_nonpositive_integer(z: Complex64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round()
}

/// Complex Gamma function. At least 12 significant digits for |z| <= 30
/// away from the poles.
pub fn gamma(z: Complex64) -> Result<Complex64, SpecFunError> {
    if is_nonpositive_integer(z) {
        return Err(SpecFunError::GammaPole(z.re));
    }
    Ok(gamma_unchecked(z))
}

fn gamma_unchecked(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        // Reflection: Gamma(z) = pi / (sin(pi z) Gamma(1-z)).
        let s = (Complex64::new(PI, 0.0) * z).sin();
        return Complex64::new(PI, 0.0) / (s * gamma_unchecked(Complex64::new(1.0, 0.0) - z));
    }
    let mut a = Complex64::new(LANCZOS_C[0], 0.0);
    for (k, &c) in LANCZOS_C.iter().enumerate().skip(1) {
        a += c / (z + (k as f64 - 1.0));
    }
    let t = z + (LANCZOS_G - 0.5);
    (2.0 * PI).sqrt() * t.powc(z - 0.5) * (-t).exp() * a
}

/// Real Gamma for non-pole real arguments.
pub fn gamma_real(x: f64) -> Result<f64, SpecFunError> {
    gamma(Complex64::new(x, 0.0)).map(|g| g.re)
}

/// Euler Beta function B(a,b) = Gamma(a)Gamma(b)/Gamma(a+b).
pub fn beta(a: f64, b: f64) -> Result<f64, SpecFunError> {
    // A pole of Gamma(a+b) with finite numerator means B = 0 is the
    // continued value (e.g. B(-1/2, 1/2) = 0).
    let ga = gamma_real(a)?;
    let gb = gamma_real(b)?;
    match gamma_real(a + b) {
        Ok(gab) => Ok(ga * gb / gab),
        Err(_) => Ok(0.0),
    }
}

/// S(a,b) = \int_0^{pi/2} sin^a t cos^b t dt = B((a+1)/2, (b+1)/2) / 2.
pub fn sine_integral_s(a: u32, b: u32) -> f64 {
    beta((a as f64 + 1.0) / 2.0, (b as f64 + 1.0) / 2.0).expect("positive arguments") / 2.0
}

/// Volume of the k-dimensional Euclidean unit ball.
pub fn ball_volume(k: u32) -> f64 {
    PI.powf(k as f64 / 2.0) / gamma_real(k as f64 / 2.0 + 1.0).expect("positive argument")
}

/// Exact half-integer: the represented value is `twice / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfInteger {
    twice: i64,
}

impl HalfInteger {
    pub const fn from_twice(twice: i64) -> Self {
        HalfInteger { twice }
    }

    pub const fn from_int(n: i64) -> Self {
        HalfInteger { twice: 2 * n }
    }

    pub const fn twice(self) -> i64 {
        self.twice
    }

    pub const fn is_integer(self) -> bool {
        self.twice % 2 == 0
    }

    /// Only valid when `is_integer()`.
    pub fn as_integer(self) -> i64 {
        debug_assert!(self.is_integer());
        self.twice / 2
    }

    pub fn to_f64(self) -> f64 {
        self.twice as f64 / 2.0
    }

    /// floor(value + 1/2), exact.
    pub fn floor_plus_half(self) -> i64 {
        (self.twice + 1).div_euclid(2)
    }

    pub fn is_negative(self) -> bool {
        self.twice < 0
    }
}

impl std::ops::Add<i64> for HalfInteger {
    type Output = HalfInteger;
    fn add(self, n: i64) -> HalfInteger {
        HalfInteger::from_twice(self.twice + 2 * n)
    }
}

impl std::ops::Neg for HalfInteger {
    type Output = HalfInteger;
    fn neg(self) -> HalfInteger {
        HalfInteger::from_twice(-self.twice)
    }
}

impl fmt::Display for HalfInteger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

/// i^k computed exactly (k may be negative).
pub fn quarter_turn(k: i64) -> Complex64 {
    match k.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// e^{i k pi / 4} computed exactly (eighth turns; needed for e^{i pi s/2}
/// with half-integer s).
pub fn eighth_turn(k: i64) -> Complex64 {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    match k.rem_euclid(8) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(r, r),
        2 => Complex64::new(0.0, 1.0),
        3 => Complex64::new(-r, r),
        4 => Complex64::new(-1.0, 0.0),
        5 => Complex64::new(-r, -r),
        6 => Complex64::new(0.0, -1.0),
        _ => Complex64::new(r, -r),
    }
}

/// e^{i pi s / 2} for exact half-integer s, with no floating branch cuts.
pub fn half_pi_phase(s: HalfInteger) -> Complex64 {
    eighth_turn(s.twice())
}

/// (-1)^k for possibly negative k.
pub fn neg_one_pow(k: i64) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// sqrt(lambda)^k as a complex number using the principal branch
/// sqrt(-1) = i, computed with exact quarter turns for the phase.
pub fn sqrt_pow(lambda: f64, k: i64) -> Complex64 {
    let mag = lambda.abs().sqrt().powi(k as i32);
    if lambda >= 0.0 {
        Complex64::new(mag, 0.0)
    } else {
        quarter_turn(k) * mag
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT_PI: f64 = 1.772_453_850_905_516;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn gamma_classical_values() {
        assert!(close(gamma_real(0.5).unwrap(), SQRT_PI, 1e-13));
        assert!(close(gamma_real(1.0).unwrap(), 1.0, 1e-13));
        assert!(close(gamma_real(5.0).unwrap(), 24.0, 1e-13));
        // Reflection oracle: Gamma(-1/4) = -4 Gamma(3/4) * ... direct value.
        assert!(close(gamma_real(-0.25).unwrap(), -4.901_666_809_860_711, 1e-12));
    }

    #[test]
    fn gamma_pole_detection() {
        assert_eq!(gamma_real(0.0), Err(SpecFunError::GammaPole(0.0)));
        assert_eq!(gamma_real(-3.0), Err(SpecFunError::GammaPole(-3.0)));
        assert!(gamma_real(-3.5).is_ok());
    }

    #[test]
    fn gamma_recurrence_on_grid() {
        // Gamma(z+1) = z Gamma(z), sampled off the poles, including complex z.
        for &re in &[-7.3, -2.25, -0.6, 0.5, 1.7, 4.2, 11.9, 24.5] {
            for &im in &[0.0, -3.1, 0.7, 9.4] {
                let z = Complex64::new(re, im);
                let lhs = gamma(z + 1.0).unwrap();
                let rhs = z * gamma(z).unwrap();
                assert!(
                    (lhs - rhs).norm() <= 1e-12 * rhs.norm(),
                    "recurrence failed at {z}"
                );
            }
        }
    }

    #[test]
    fn sine_integral_small_cases() {
        assert!(close(sine_integral_s(0, 0), std::f64::consts::FRAC_PI_2, 1e-13));
        assert!(close(sine_integral_s(1, 0), 1.0, 1e-13));
        assert!(close(sine_integral_s(1, 1), 0.5, 1e-13));
        assert!(close(sine_integral_s(2, 0), std::f64::consts::FRAC_PI_4, 1e-13));
    }

    #[test]
    fn sine_integral_matches_quadrature() {
        for a in 0..=8u32 {
            for b in 0..=8u32 {
                let direct = crate::quad::integrate(
                    |t| Complex64::new(t.sin().powi(a as i32) * t.cos().powi(b as i32), 0.0),
                    0.0,
                    std::f64::consts::FRAC_PI_2,
                    1e-13,
                )
                .value
                .re;
                assert!(
                    close(sine_integral_s(a, b), direct, 1e-10),
                    "S({a},{b}) mismatch"
                );
                assert_eq!(sine_integral_s(a, b), sine_integral_s(b, a));
            }
        }
    }

    #[test]
    fn ball_volumes() {
        assert!(close(ball_volume(0), 1.0, 1e-14));
        assert!(close(ball_volume(1), 2.0, 1e-14));
        assert!(close(ball_volume(2), PI, 1e-14));
        assert!(close(ball_volume(3), 4.0 * PI / 3.0, 1e-14));
        for k in 2..=12u32 {
            let rec = ball_volume(k - 2) * 2.0 * PI / k as f64;
            assert!(close(ball_volume(k), rec, 1e-12), "recurrence at k={k}");
        }
    }

    #[test]
    fn half_integer_arithmetic() {
        let s = HalfInteger::from_twice(-3); // -3/2
        assert!(!s.is_integer());
        assert_eq!(s.to_f64(), -1.5);
        assert_eq!(s.floor_plus_half(), -1);
        assert_eq!((s + 1).twice(), -1);
        assert_eq!(HalfInteger::from_int(-2).floor_plus_half(), -2);
        assert_eq!(HalfInteger::from_twice(-1).floor_plus_half(), 0);
        assert_eq!(format!("{}", s), "-3/2");
        assert_eq!(format!("{}", HalfInteger::from_int(4)), "4");
    }

    #[test]
    fn exact_phases() {
        assert_eq!(quarter_turn(0), Complex64::new(1.0, 0.0));
        assert_eq!(quarter_turn(-1), Complex64::new(0.0, -1.0));
        assert_eq!(quarter_turn(6), Complex64::new(-1.0, 0.0));
        // e^{i pi s/2} at s = -3/2 is e^{-3 pi i/4}.
        let ph = half_pi_phase(HalfInteger::from_twice(-3));
        assert!((ph - Complex64::from_polar(1.0, -3.0 * PI / 4.0)).norm() < 1e-15);
        assert_eq!(sqrt_pow(-1.0, 2), Complex64::new(-1.0, 0.0));
        assert_eq!(sqrt_pow(4.0, 3), Complex64::new(8.0, 0.0));
    }
}
