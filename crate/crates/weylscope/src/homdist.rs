//! Homogeneous distributions on the real line.
//!
//! A [`HomDistribution`] is a finite combination of one-sided powers
//! x_+^s, x_-^s (half-integer or integer s, negative integer powers only in
//! the even/odd combinations) and delta derivatives. The module provides
//! the chi families, finite-part (Hadamard) pairing against test functions,
//! residues of the meromorphic power families and the Fourier table with
//! the convention  F f (xi) = \int e^{-i xi x} f(x) dx.

use crate::quad::{self, NeumaierSum};
use crate::specfun::{gamma_real, half_pi_phase, neg_one_pow, quarter_turn, HalfInteger};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use std::rc::Rc;
use thiserror::Error;

pub const DEFAULT_PAIR_TOL: f64 = 1e-11;

#[derive(Debug, Error)]
pub enum HomDistError {
    #[error("lone one-sided power with negative integer exponent {0}")]
    LoneIntegerPower(i64),
    #[error("combination at a family pole (exponent {0}, wrong parity)")]
    PoleCombination(i64),
    #[error("chi requires negative exponent, got {0}")]
    NonnegativeExponent(HalfInteger),
    #[error("{0} is not a pole of the family")]
    NotAPole(i64),
    #[error("test function smoothness {available} insufficient, need {needed}")]
    InsufficientSmoothness { needed: usize, available: usize },
    #[error("nonconvergent tail: unbounded support without decay flag")]
    NonconvergentTail,
    #[error("Fourier table pole: {0}")]
    TablePole(String),
    #[error("pairing exponent {0} too close to a negative integer")]
    NearPoleExponent(f64),
}

pub type Result<T> = std::result::Result<T, HomDistError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
    pub fn flip(self) -> Side {
        match self {
            Side::Plus => Side::Minus,
            Side::Minus => Side::Plus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTerm {
    pub side: Side,
    pub exponent: HalfInteger,
    pub coeff: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaTerm {
    pub order: u32,
    pub coeff: Complex64,
}

/// Canonical finite combination of one-sided powers and delta derivatives.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HomDistribution {
    pub power_terms: Vec<PowerTerm>,
    pub delta_terms: Vec<DeltaTerm>,
}

impl HomDistribution {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn delta(order: u32) -> Self {
        HomDistribution {
            power_terms: vec![],
            delta_terms: vec![DeltaTerm {
                order,
                coeff: Complex64::new(1.0, 0.0),
            }],
        }
    }

    pub fn power(side: Side, exponent: HalfInteger) -> Result<Self> {
        if exponent.is_integer() && exponent.is_negative() {
            return Err(HomDistError::LoneIntegerPower(exponent.as_integer()));
        }
        Ok(HomDistribution {
            power_terms: vec![PowerTerm {
                side,
                exponent,
                coeff: Complex64::new(1.0, 0.0),
            }],
            delta_terms: vec![],
        })
    }

    /// |x|^s = x_+^s + x_-^s. For negative odd integer s this is a family
    /// pole and is rejected.
    pub fn abs_pow(s: HalfInteger) -> Result<Self> {
        Self::two_sided(s, 1.0)
    }

    /// sign(x)|x|^s = x_+^s - x_-^s. Pole at negative even integer s.
    pub fn sign_abs_pow(s: HalfInteger) -> Result<Self> {
        Self::two_sided(s, -1.0)
    }

    /// x^s for integer s: |x|^s for even s, sign(x)|x|^s for odd s
    /// (the regularized combination for s < 0, never at a pole).
    pub fn x_pow(s: i64) -> Self {
        let minus = neg_one_pow(s);
        Self::two_sided(HalfInteger::from_int(s), minus).expect("right-parity combination")
    }

    fn two_sided(s: HalfInteger, minus_factor: f64) -> Result<Self> {
        if s.is_integer() && s.is_negative() {
            let n = s.as_integer();
            if neg_one_pow(n) != minus_factor {
                return Err(HomDistError::PoleCombination(n));
            }
        }
        Ok(HomDistribution {
            power_terms: vec![
                PowerTerm {
                    side: Side::Plus,
                    exponent: s,
                    coeff: Complex64::new(1.0, 0.0),
                },
                PowerTerm {
                    side: Side::Minus,
                    exponent: s,
                    coeff: Complex64::new(minus_factor, 0.0),
                },
            ],
            delta_terms: vec![],
        })
    }

    pub fn scaled(mut self, c: Complex64) -> Self {
        for t in &mut self.power_terms {
            t.coeff *= c;
        }
        for t in &mut self.delta_terms {
            t.coeff *= c;
        }
        self
    }

    pub fn plus(mut self, other: &HomDistribution) -> Self {
        self.power_terms.extend_from_slice(&other.power_terms);
        self.delta_terms.extend_from_slice(&other.delta_terms);
        self.canonicalize();
        self
    }

    /// Reflection x -> -x: swaps sides, delta^{(k)} picks up (-1)^k.
    pub fn reflect(&self) -> Self {
        let mut d = self.clone();
        for t in &mut d.power_terms {
            t.side = t.side.flip();
        }
        for t in &mut d.delta_terms {
            t.coeff *= neg_one_pow(t.order as i64);
        }
        d.canonicalize();
        d
    }

    /// Merge duplicate (side, exponent) / order entries, drop zeros, sort.
    pub fn canonicalize(&mut self) {
        self.power_terms
            .sort_by_key(|t| (t.exponent, t.side == Side::Minus));
        let mut merged: Vec<PowerTerm> = Vec::with_capacity(self.power_terms.len());
        for t in self.power_terms.drain(..) {
            match merged.last_mut() {
                Some(last) if last.side == t.side && last.exponent == t.exponent => {
                    last.coeff += t.coeff;
                }
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coeff.norm() > 0.0);
        self.power_terms = merged;

        self.delta_terms.sort_by_key(|t| t.order);
        let mut merged: Vec<DeltaTerm> = Vec::with_capacity(self.delta_terms.len());
        for t in self.delta_terms.drain(..) {
            match merged.last_mut() {
                Some(last) if last.order == t.order => last.coeff += t.coeff,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coeff.norm() > 0.0);
        self.delta_terms = merged;
    }

    /// Validate the canonical-form invariants (negative integer powers only
    /// in right-parity combinations).
    pub fn validate(&self) -> Result<()> {
        let mut i = 0;
        let terms = &self.power_terms;
        while i < terms.len() {
            let t = terms[i];
            if t.exponent.is_integer() && t.exponent.is_negative() {
                let n = t.exponent.as_integer();
                // canonical order groups the two sides of one exponent
                if i + 1 >= terms.len()
                    || terms[i + 1].exponent != t.exponent
                    || terms[i + 1].side == t.side
                {
                    return Err(HomDistError::LoneIntegerPower(n));
                }
                let (cp, cm) = if t.side == Side::Plus {
                    (t.coeff, terms[i + 1].coeff)
                } else {
                    (terms[i + 1].coeff, t.coeff)
                };
                if (cm - cp * neg_one_pow(n)).norm() > 1e-14 * (cp.norm() + cm.norm()) {
                    return Err(HomDistError::PoleCombination(n));
                }
                i += 2;
            } else {
                i += 1;
            }
        }
        Ok(())
    }

    pub fn max_delta_order(&self) -> Option<u32> {
        self.delta_terms.iter().map(|t| t.order).max()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let power_terms: Vec<_> = self
            .power_terms
            .iter()
            .map(|t| {
                let (num, den) = if t.exponent.is_integer() {
                    (t.exponent.as_integer(), 1)
                } else {
                    (t.exponent.twice(), 2)
                };
                serde_json::json!({
                    "side": match t.side { Side::Plus => "plus", Side::Minus => "minus" },
                    "exp_num": num,
                    "exp_den": den,
                    "coeff_re": t.coeff.re,
                    "coeff_im": t.coeff.im,
                })
            })
            .collect();
        let delta_terms: Vec<_> = self
            .delta_terms
            .iter()
            .map(|t| {
                serde_json::json!({
                    "order": t.order,
                    "coeff_re": t.coeff.re,
                    "coeff_im": t.coeff.im,
                })
            })
            .collect();
        serde_json::json!({ "power_terms": power_terms, "delta_terms": delta_terms })
    }
}

// ---------------------------------------------------------------------------
// chi families
// ---------------------------------------------------------------------------

/// chi_i^s for half-integer s < 0 (parity index i mod 2).
///
/// Proper half-integer s: chi_0^s = x_+^s, chi_1^s = (-1)^{s+1/2} x_-^s.
/// Integer s: chi_0^s = x^s (regularized combination),
/// chi_1^s = (-1)^{s+1} pi/(-s-1)! * delta^{(-s-1)}.
pub fn chi(i: u8, s: HalfInteger) -> Result<HomDistribution> {
    if !s.is_negative() {
        return Err(HomDistError::NonnegativeExponent(s));
    }
    let i = i % 2;
    if s.is_integer() {
        let n = s.as_integer(); // n <= -1
        if i == 0 {
            Ok(HomDistribution::x_pow(n))
        } else {
            let k = (-n - 1) as u32;
            let c = neg_one_pow(n + 1) * PI / gamma_real(k as f64 + 1.0).unwrap();
            Ok(HomDistribution::delta(k).scaled(Complex64::new(c, 0.0)))
        }
    } else if i == 0 {
        HomDistribution::power(Side::Plus, s)
    } else {
        let c = neg_one_pow(s.floor_plus_half()); // (-1)^{s+1/2}
        Ok(HomDistribution::power(Side::Minus, s)?.scaled(Complex64::new(c, 0.0)))
    }
}

/// Symbolic point values chi_i^s(1) = delta_{0,i} and
/// chi_i^s(-1) = (-1)^{floor(s+1/2)} delta_{2s,i} (Kronecker indices mod 2).
/// s = 0 is allowed with the convention chi_i^0(+-1) := delta_{i,0}.
pub fn chi_eval_pm1(i: u8, s: HalfInteger, sign: i8) -> f64 {
    let i = i % 2;
    if s.twice() == 0 {
        return if i == 0 { 1.0 } else { 0.0 };
    }
    if sign > 0 {
        if i == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        let parity_match = (s.twice().rem_euclid(2)) as u8 == i;
        if parity_match {
            neg_one_pow(s.floor_plus_half())
        } else {
            0.0
        }
    }
}

// ---------------------------------------------------------------------------
// Test functions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub enum Support {
    /// Support contained in [-neg, pos].
    Compact { neg: f64, pos: f64 },
    /// Rapid decay; numerically negligible beyond |x| > cutoff.
    Schwartz { cutoff: f64 },
}

impl Support {
    /// Effective radius on the given side.
    fn radius(&self, side: Side) -> f64 {
        match (self, side) {
            (Support::Compact { pos, .. }, Side::Plus) => *pos,
            (Support::Compact { neg, .. }, Side::Minus) => *neg,
            (Support::Schwartz { cutoff }, _) => *cutoff,
        }
    }
}

type ValueFn = Rc<dyn Fn(f64) -> Complex64>;
type DerivFn = Rc<dyn Fn(usize, f64) -> Complex64>;
type TailFn = Rc<dyn Fn(Side, f64, f64) -> Complex64>;

/// Test function with a value oracle, derivative oracle and support data.
#[derive(Clone)]
pub struct TestFunction1D {
    value: ValueFn,
    deriv: DerivFn,
    pub support: Support,
    pub smoothness: usize,
    /// Optional accurate far-field oracle: (side, s, b) ->
    /// \int_b^inf x^s phi(side * x) dx. Falls back to adaptive quadrature.
    tail: Option<TailFn>,
    /// Radius around 0 on which the Taylor series of the function (from the
    /// derivative oracle at 0, any order) converges to the function. When
    /// set, the finite-part band near 0 is summed analytically instead of by
    /// quadrature, which would otherwise amplify the cancellation noise of
    /// eval(x) - T(x) by x^s.
    analytic_radius: Option<f64>,
}

impl TestFunction1D {
    pub fn new(value: ValueFn, deriv: DerivFn, support: Support, smoothness: usize) -> Self {
        let tf = Self::new_unchecked(value, deriv, support, smoothness);
        tf.spot_check();
        tf
    }

    /// Constructor without the finite-difference spot check, for oracles
    /// whose derivative closure is only meaningful at x = 0 (profile local
    /// models).
    pub fn new_unchecked(
        value: ValueFn,
        deriv: DerivFn,
        support: Support,
        smoothness: usize,
    ) -> Self {
        TestFunction1D {
            value,
            deriv,
            support,
            smoothness,
            tail: None,
            analytic_radius: None,
        }
    }

    pub fn with_tail(mut self, tail: TailFn) -> Self {
        self.tail = Some(tail);
        self
    }

    pub fn with_analytic_radius(mut self, r: f64) -> Self {
        self.analytic_radius = Some(r);
        self
    }

    /// Consistency of the derivative oracle with finite differences.
    fn spot_check(&self) {
        if self.smoothness == 0 {
            return;
        }
        let r = match self.support {
            Support::Compact { pos, .. } => pos,
            Support::Schwartz { cutoff } => cutoff / 4.0,
        };
        for &x in &[0.13 * r, -0.41 * r] {
            let h = 1e-5 * r.max(1.0);
            let fd = ((self.value)(x + h) - (self.value)(x - h)) / (2.0 * h);
            let an = (self.deriv)(1, x);
            let scale = an.norm().max((self.value)(x).norm()).max(1.0);
            assert!(
                (fd - an).norm() <= 1e-3 * scale,
                "derivative oracle inconsistent at x={x}: fd={fd}, oracle={an}"
            );
        }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        (self.value)(x)
    }

    pub fn eval_deriv(&self, j: usize, x: f64) -> Complex64 {
        if j == 0 {
            (self.value)(x)
        } else {
            (self.deriv)(j, x)
        }
    }
}

// ---------------------------------------------------------------------------
// Finite-part pairing
// ---------------------------------------------------------------------------

/// Finite part of \int_0^inf x^s eval(x) dx given the derivatives of `eval`
/// at 0 (for the Taylor subtraction), a split point b, and a far-field
/// integral over (b, inf). `skip` marks a Taylor order whose finite-part
/// correction must be omitted (structurally-cancelling term of integer
/// combinations).
fn finite_part_one_side(
    s: f64,
    eval: &dyn Fn(f64) -> Complex64,
    derivs0: &[Complex64],
    b: f64,
    far: Complex64,
    skip: Option<usize>,
    tol: f64,
    series: Option<(f64, &[Complex64])>,
) -> Complex64 {
    let depth = derivs0.len();
    let taylor = |x: f64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut fact = 1.0;
        let mut xp = 1.0;
        for (i, d) in derivs0.iter().enumerate() {
            acc += d / fact * xp;
            xp *= x;
            fact *= (i + 1) as f64;
        }
        acc
    };
    // Band integral of x^s (eval - T) over [0, b]. Near 0 the subtracted
    // integrand is the cancellation noise of two nearly equal floats
    // amplified by x^s, so when the Taylor series at 0 is trusted the inner
    // piece [0, c] is summed analytically term by term and quadrature only
    // covers [c, b].
    let band = if b <= 0.0 {
        Complex64::new(0.0, 0.0)
    } else if let Some((c, highs)) = series {
        let c = c.min(b);
        let mut inner = NeumaierSum::default();
        let mut fact = 1.0;
        for k in 1..=depth {
            fact *= k as f64;
        }
        let mut quiet = 0;
        for (off, d) in highs.iter().enumerate() {
            let k = depth + off;
            if k > depth {
                fact *= k as f64;
            }
            let p = s + k as f64 + 1.0;
            let term = d / fact * c.powf(p) / p;
            inner.add(term);
            if term.norm() <= 1e-17 * (1.0 + inner.value().norm()) {
                quiet += 1;
                if quiet >= 2 {
                    break;
                }
            } else {
                quiet = 0;
            }
        }
        let outer = if b > c {
            quad::integrate(|x| x.powf(s) * (eval(x) - taylor(x)), c, b, tol).value
        } else {
            Complex64::new(0.0, 0.0)
        };
        inner.value() + outer
    } else {
        let e = s + depth as f64; // local order of eval - T
        if e >= 0.45 {
            quad::integrate(
                |x| x.powf(s) * (eval(x) - taylor(x)),
                0.0,
                b,
                tol,
            )
            .value
        } else {
            // x = u^m with m chosen so the u-integrand is at least C^0.
            let m = ((2.0 / (e + 1.0)).ceil() as i32).clamp(2, 8);
            let ub = b.powf(1.0 / m as f64);
            quad::integrate(
                |u| {
                    let x = u.powi(m);
                    m as f64 * u.powi(m - 1) * x.powf(s) * (eval(x) - taylor(x))
                },
                0.0,
                ub,
                tol,
            )
            .value
        }
    };
    // Analytic finite part of \int_0^b x^s T(x) dx.
    let mut corr = Complex64::new(0.0, 0.0);
    let mut fact = 1.0;
    for (i, d) in derivs0.iter().enumerate() {
        if Some(i) != skip {
            let p = s + i as f64 + 1.0;
            corr += d / fact * b.powf(p) / p;
        }
        fact *= (i + 1) as f64;
    }
    band + corr + far
}

/// Pairing of a single one-sided power x_side^s (real s, not a negative
/// integer) against phi.
pub fn pair_power(side: Side, s: f64, phi: &TestFunction1D, tol: f64) -> Result<Complex64> {
    if s < -0.5 && (s - s.round()).abs() < 1e-9 && s.round() < 0.0 {
        return Err(HomDistError::NearPoleExponent(s));
    }
    let sg = side.sign();
    let radius = phi.support.radius(side);
    let k_min = if s > -1.0 { 0 } else { (-s).ceil() as usize - 1 };
    let extra = 2.min(phi.smoothness.saturating_sub(k_min));
    let depth = k_min + extra;
    if phi.smoothness < k_min {
        return Err(HomDistError::InsufficientSmoothness {
            needed: k_min,
            available: phi.smoothness,
        });
    }
    let b = radius.min(1.0);
    let eval = |x: f64| phi.eval(sg * x);
    let sided = |i: usize| {
        let reflect = if sg < 0.0 { neg_one_pow(i as i64) } else { 1.0 };
        phi.eval_deriv(i, 0.0) * reflect
    };
    let derivs0: Vec<Complex64> = (0..depth).map(sided).collect();
    let far = far_field(side, s, phi, b, tol);
    let (cut, highs) = series_data(phi, b, depth, &sided);
    let series = highs.as_deref().map(|h| (cut, h));
    Ok(finite_part_one_side(
        s, &eval, &derivs0, b, far, None, tol, series,
    ))
}

/// Higher Taylor data for the analytic inner band, when the test function
/// vouches for its series at 0.
fn series_data(
    phi: &TestFunction1D,
    b: f64,
    depth: usize,
    sided: &dyn Fn(usize) -> Complex64,
) -> (f64, Option<Vec<Complex64>>) {
    const EXTRA_ORDERS: usize = 40;
    match phi.analytic_radius {
        Some(r) if r > 0.0 => {
            let cut = (0.5 * r).min(0.5 * b);
            let highs = (depth..depth + EXTRA_ORDERS).map(sided).collect();
            (cut, Some(highs))
        }
        _ => (0.0, None),
    }
}

fn far_field(side: Side, s: f64, phi: &TestFunction1D, b: f64, tol: f64) -> Complex64 {
    if let Some(tail) = &phi.tail {
        return tail(side, s, b);
    }
    let sg = side.sign();
    let radius = phi.support.radius(side);
    if radius <= b {
        return Complex64::new(0.0, 0.0);
    }
    quad::integrate(|x| x.powf(s) * phi.eval(sg * x), b, radius, tol).value
}

/// Pairing of the valid combination c * (x_+^{-m} + (-1)^m x_-^{-m}).
fn pair_integer_combo(
    m: u32,
    c: Complex64,
    phi: &TestFunction1D,
    tol: f64,
) -> Result<Complex64> {
    let m = m as usize;
    if phi.smoothness < m {
        return Err(HomDistError::InsufficientSmoothness {
            needed: m,
            available: phi.smoothness,
        });
    }
    let s = -(m as f64);
    let parity = neg_one_pow(m as i64);
    let eval = |x: f64| phi.eval(x) + parity * phi.eval(-x);
    let extra = 2.min(phi.smoothness - m);
    let depth = m + extra;
    let combined = |i: usize| {
        let f = 1.0 + parity * neg_one_pow(i as i64);
        // f vanishes exactly at the would-be divergent order i = m-1.
        phi.eval_deriv(i, 0.0) * f
    };
    let derivs0: Vec<Complex64> = (0..depth).map(combined).collect();
    let b = phi
        .support
        .radius(Side::Plus)
        .min(phi.support.radius(Side::Minus))
        .min(1.0);
    let far = far_field(Side::Plus, s, phi, b, tol)
        + parity * far_field(Side::Minus, s, phi, b, tol);
    let (cut, highs) = series_data(phi, b, depth, &combined);
    let series = highs.as_deref().map(|h| (cut, h));
    Ok(c * finite_part_one_side(
        s,
        &eval,
        &derivs0,
        b,
        far,
        Some(m - 1),
        tol,
        series,
    ))
}

/// Regularized (finite-part) pairing < d, phi >.
pub fn regularized_pair(d: &HomDistribution, phi: &TestFunction1D) -> Result<Complex64> {
    regularized_pair_tol(d, phi, DEFAULT_PAIR_TOL)
}

pub fn regularized_pair_tol(
    d: &HomDistribution,
    phi: &TestFunction1D,
    tol: f64,
) -> Result<Complex64> {
    let mut dc = d.clone();
    dc.canonicalize();
    dc.validate()?;
    let mut sum = NeumaierSum::default();
    for t in &dc.delta_terms {
        if (t.order as usize) > phi.smoothness {
            return Err(HomDistError::InsufficientSmoothness {
                needed: t.order as usize,
                available: phi.smoothness,
            });
        }
        sum.add(t.coeff * neg_one_pow(t.order as i64) * phi.eval_deriv(t.order as usize, 0.0));
    }
    let mut i = 0;
    let terms = &dc.power_terms;
    while i < terms.len() {
        let t = terms[i];
        if t.exponent.is_integer() && t.exponent.is_negative() {
            // validated right-parity pair (plus sorts first)
            let m = (-t.exponent.as_integer()) as u32;
            let c_plus = if t.side == Side::Plus {
                t.coeff
            } else {
                terms[i + 1].coeff
            };
            sum.add(pair_integer_combo(m, c_plus, phi, tol)?);
            i += 2;
        } else {
            sum.add(t.coeff * pair_power(t.side, t.exponent.to_f64(), phi, tol)?);
            i += 1;
        }
    }
    Ok(sum.value())
}

// ---------------------------------------------------------------------------
// Meromorphic families, residues
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    XPlus,
    XMinus,
    Abs,
    SignAbs,
}

impl Family {
    pub fn is_pole(self, k: i64) -> bool {
        if k >= 0 {
            return false;
        }
        match self {
            Family::XPlus | Family::XMinus => true,
            Family::Abs => (-k) % 2 == 1,
            Family::SignAbs => (-k) % 2 == 0,
        }
    }

    /// Pairing of the family member at real s (off the poles).
    pub fn pair_at(self, s: f64, phi: &TestFunction1D, tol: f64) -> Result<Complex64> {
        let p = pair_power(Side::Plus, s, phi, tol)?;
        match self {
            Family::XPlus => Ok(p),
            Family::XMinus => pair_power(Side::Minus, s, phi, tol),
            Family::Abs => Ok(p + pair_power(Side::Minus, s, phi, tol)?),
            Family::SignAbs => Ok(p - pair_power(Side::Minus, s, phi, tol)?),
        }
    }
}

/// Residue of the named family at the pole s = -k.
pub fn residue(fam: Family, at: i64) -> Result<HomDistribution> {
    if at >= 0 || !fam.is_pole(at) {
        return Err(HomDistError::NotAPole(at));
    }
    let k = (-at) as u32;
    let fact = gamma_real(k as f64).unwrap(); // (k-1)!
    let d = match fam {
        Family::XPlus => HomDistribution::delta(k - 1)
            .scaled(Complex64::new(neg_one_pow(k as i64 - 1) / fact, 0.0)),
        Family::XMinus => {
            HomDistribution::delta(k - 1).scaled(Complex64::new(1.0 / fact, 0.0))
        }
        Family::Abs => HomDistribution::delta(k - 1).scaled(Complex64::new(2.0 / fact, 0.0)),
        Family::SignAbs => {
            HomDistribution::delta(k - 1).scaled(Complex64::new(-2.0 / fact, 0.0))
        }
    };
    Ok(d)
}

/// |lim_{s -> -k} (s+k) <fam(s), phi>  -  <Res, phi>| with Richardson
/// extrapolation along real s.
pub fn residue_numeric_check(fam: Family, at: i64, phi: &TestFunction1D) -> Result<f64> {
    let res = residue(fam, at)?;
    let target = regularized_pair(&res, phi)?;
    let k = at as f64;
    let eps: Vec<f64> = vec![0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625];
    let g: Vec<Complex64> = eps
        .iter()
        .map(|&e| {
            fam.pair_at(k + e, phi, 1e-12).map(|v| v * e)
        })
        .collect::<Result<_>>()?;
    // Neville extrapolation of the polynomial-in-eps data to eps = 0.
    let mut tab = g.clone();
    let n = tab.len();
    for lvl in 1..n {
        for j in 0..(n - lvl) {
            let num = eps[j] * tab[j + 1] - eps[j + lvl] * tab[j];
            tab[j] = num / (eps[j] - eps[j + lvl]);
        }
    }
    Ok((tab[0] - target).norm())
}

// ---------------------------------------------------------------------------
// Fourier table
// ---------------------------------------------------------------------------

/// Fourier transform per the table (convention F f = \int e^{-i xi x} f dx).
pub fn fourier(d: &HomDistribution) -> Result<HomDistribution> {
    let mut dc = d.clone();
    dc.canonicalize();
    dc.validate()?;
    let mut out = HomDistribution::zero();

    for t in &dc.delta_terms {
        // F(delta^{(k)}) = i^k xi^k
        let c = t.coeff * quarter_turn(t.order as i64);
        out = out.plus(&HomDistribution::x_pow(t.order as i64).scaled(c));
    }

    // Group power terms by exponent into even/odd combinations.
    let mut i = 0;
    let terms = &dc.power_terms;
    while i < terms.len() {
        let t = terms[i];
        let s = t.exponent;
        let (c_plus, c_minus) = if i + 1 < terms.len()
            && terms[i + 1].exponent == s
            && terms[i + 1].side != t.side
        {
            let pair = terms[i + 1];
            i += 2;
            if t.side == Side::Plus {
                (t.coeff, pair.coeff)
            } else {
                (pair.coeff, t.coeff)
            }
        } else {
            i += 1;
            match t.side {
                Side::Plus => (t.coeff, Complex64::new(0.0, 0.0)),
                Side::Minus => (Complex64::new(0.0, 0.0), t.coeff),
            }
        };
        if s.is_integer() {
            out = out.plus(&fourier_integer_power(s.as_integer(), c_plus, c_minus)?);
        } else {
            out = out.plus(&fourier_half_integer_power(s, c_plus, c_minus));
        }
    }
    out.canonicalize();
    Ok(out)
}

/// F(x_+-^s) for proper half-integer s:
/// F(x_+^s) = Gamma(s+1) [ -i e^{-i pi s/2} xi_+^{-s-1} + i e^{i pi s/2} xi_-^{-s-1} ]
/// F(x_-^s) = Gamma(s+1) [  i e^{ i pi s/2} xi_+^{-s-1} - i e^{-i pi s/2} xi_-^{-s-1} ]
fn fourier_half_integer_power(
    s: HalfInteger,
    c_plus: Complex64,
    c_minus: Complex64,
) -> HomDistribution {
    let g = gamma_real(s.to_f64() + 1.0).expect("half-integer, no pole");
    let i_unit = Complex64::new(0.0, 1.0);
    let ph = half_pi_phase(s); // e^{i pi s / 2}, exact
    let out_exp = -(s + 1); // -s-1, half-integer
    let coeff_plus = g * (c_plus * (-i_unit) * ph.conj() + c_minus * i_unit * ph);
    let coeff_minus = g * (c_plus * i_unit * ph + c_minus * (-i_unit) * ph.conj());
    HomDistribution {
        power_terms: vec![
            PowerTerm {
                side: Side::Plus,
                exponent: out_exp,
                coeff: coeff_plus,
            },
            PowerTerm {
                side: Side::Minus,
                exponent: out_exp,
                coeff: coeff_minus,
            },
        ],
        delta_terms: vec![],
    }
}

/// F of integer-exponent combinations, split into the even part a|x|^n and
/// odd part b sign(x)|x|^n.
fn fourier_integer_power(
    n: i64,
    c_plus: Complex64,
    c_minus: Complex64,
) -> Result<HomDistribution> {
    let a = (c_plus + c_minus) * 0.5;
    let b = (c_plus - c_minus) * 0.5;
    let mut out = HomDistribution::zero();
    if a.norm() > 0.0 {
        out = out.plus(&fourier_even_abs(n, a)?);
    }
    if b.norm() > 0.0 {
        out = out.plus(&fourier_odd_sign(n, b)?);
    }
    Ok(out)
}

/// F(a |x|^n), integer n.
fn fourier_even_abs(n: i64, a: Complex64) -> Result<HomDistribution> {
    if n >= 0 && n % 2 == 0 {
        // |x|^n = x^n -> 2 pi i^n delta^{(n)}
        return Ok(HomDistribution::delta(n as u32).scaled(a * 2.0 * PI * quarter_turn(n)));
    }
    if n >= 1 {
        // odd n >= 1: coefficient -2 sin(pi n/2) Gamma(n+1) = -2 (-1)^{(n-1)/2} n!
        let c = -2.0 * neg_one_pow((n - 1) / 2) * gamma_real(n as f64 + 1.0).unwrap();
        return Ok(HomDistribution::abs_pow(HalfInteger::from_int(-n - 1))
            .expect("even combination, even negative exponent")
            .scaled(a * c));
    }
    if (-n) % 2 == 0 {
        // n = -2m: limit value (-1)^m pi/(2m-1)! on |xi|^{2m-1}
        let m = (-n) / 2;
        let c = neg_one_pow(m) * PI / gamma_real((2 * m) as f64).unwrap();
        return Ok(HomDistribution::abs_pow(HalfInteger::from_int(-n - 1))
            .expect("positive odd exponent")
            .scaled(a * c));
    }
    Err(HomDistError::TablePole(format!("|x|^{n} is at a family pole")))
}

/// F(b sign(x)|x|^n), integer n.
fn fourier_odd_sign(n: i64, b: Complex64) -> Result<HomDistribution> {
    if n >= 0 && n % 2 == 1 {
        return Ok(HomDistribution::delta(n as u32).scaled(b * 2.0 * PI * quarter_turn(n)));
    }
    if n >= 0 {
        // even n >= 0: coefficient -2i cos(pi n/2) Gamma(n+1) = -2i (-1)^{n/2} n!
        let c = Complex64::new(0.0, -2.0 * neg_one_pow(n / 2))
            * gamma_real(n as f64 + 1.0).unwrap();
        return Ok(HomDistribution::sign_abs_pow(HalfInteger::from_int(-n - 1))
            .expect("odd combination, odd negative exponent")
            .scaled(b * c));
    }
    if (-n) % 2 == 1 {
        // n = -(2m+1): limit value -i pi (-1)^m / (2m)! on sign|xi|^{2m}
        let m = (-n - 1) / 2;
        let c = Complex64::new(0.0, -PI * neg_one_pow(m))
            / gamma_real((2 * m) as f64 + 1.0).unwrap();
        return Ok(HomDistribution::sign_abs_pow(HalfInteger::from_int(-n - 1))
            .expect("nonnegative even exponent")
            .scaled(b * c));
    }
    Err(HomDistError::TablePole(format!(
        "sign|x|^{n} is at a family pole"
    )))
}

/// |<F d, phi> - <d, F phi>| for a Gaussian-polynomial test pair.
pub fn fourier_duality_check(d: &HomDistribution, phi: &GaussPoly1) -> Result<f64> {
    let fd = fourier(d)?;
    let lhs = regularized_pair(&fd, &phi.to_test_function())?;
    let fphi = phi.fourier();
    let rhs = regularized_pair(d, &fphi.to_test_function())?;
    Ok((lhs - rhs).norm())
}

// ---------------------------------------------------------------------------
// Gaussian-polynomial test family
// ---------------------------------------------------------------------------

/// Polynomial with complex coefficients, p(x) = sum c[j] x^j.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<Complex64>);

impl Poly {
    pub fn eval(&self, x: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.0.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn derivative(&self) -> Poly {
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, c)| c * j as f64)
                .collect(),
        )
    }

    pub fn scaled(&self, c: Complex64) -> Poly {
        Poly(self.0.iter().map(|a| a * c).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        for (i, a) in self.0.iter().enumerate() {
            c[i] += a;
        }
        for (i, a) in other.0.iter().enumerate() {
            c[i] += a;
        }
        Poly(c)
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.0.is_empty() || other.0.is_empty() {
            return Poly(vec![]);
        }
        let mut c = vec![Complex64::new(0.0, 0.0); self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly(c)
    }

    /// Shift x -> x (monomial multiply).
    pub fn mul_x(&self) -> Poly {
        let mut c = vec![Complex64::new(0.0, 0.0)];
        c.extend_from_slice(&self.0);
        Poly(c)
    }
}

/// p(x - center) * exp(-(x - center)^2 / (2 w^2)).
#[derive(Debug, Clone)]
pub struct GaussPoly1 {
    pub poly: Poly,
    pub width: f64,
    pub center: f64,
}

impl GaussPoly1 {
    pub fn new(poly: Poly, width: f64) -> Self {
        GaussPoly1 {
            poly,
            width,
            center: 0.0,
        }
    }

    pub fn centered(poly: Poly, width: f64, center: f64) -> Self {
        GaussPoly1 {
            poly,
            width,
            center,
        }
    }

    pub fn value(&self, x: f64) -> Complex64 {
        let y = x - self.center;
        self.poly.eval(y) * (-y * y / (2.0 * self.width * self.width)).exp()
    }

    /// Polynomial factor of the j-th derivative (w.r.t. x).
    fn deriv_poly(&self, j: usize) -> Poly {
        let w2 = self.width * self.width;
        let mut p = self.poly.clone();
        for _ in 0..j {
            // (p e^{-y^2/2w^2})' = (p' - p y / w^2) e^{...}
            p = p
                .derivative()
                .add(&p.mul_x().scaled(Complex64::new(-1.0 / w2, 0.0)));
        }
        p
    }

    pub fn deriv(&self, j: usize, x: f64) -> Complex64 {
        let y = x - self.center;
        self.deriv_poly(j).eval(y) * (-y * y / (2.0 * self.width * self.width)).exp()
    }

    /// Analytic Fourier transform (requires center 0):
    /// F(x^j e^{-x^2/2w^2}) built from F(gauss) = w sqrt(2 pi) e^{-w^2 xi^2/2}
    /// and F(x f) = i (F f)'.
    pub fn fourier(&self) -> GaussPoly1 {
        assert_eq!(self.center, 0.0, "fourier of centered family only");
        let w = self.width;
        let out_width = 1.0 / w;
        let i_unit = Complex64::new(0.0, 1.0);
        // Apply the operator i d/dxi j times to the base Gaussian, tracking
        // the polynomial factor in xi.
        let mut acc = Poly(vec![Complex64::new(0.0, 0.0)]);
        let mut cur = Poly(vec![Complex64::new(w * (2.0 * PI).sqrt(), 0.0)]);
        for (j, c) in self.poly.0.iter().enumerate() {
            if j > 0 {
                // cur <- i (cur' - cur * xi w^2)
                cur = cur
                    .derivative()
                    .add(&cur.mul_x().scaled(Complex64::new(-w * w, 0.0)))
                    .scaled(i_unit);
            }
            acc = acc.add(&cur.scaled(*c));
        }
        GaussPoly1::new(acc, out_width)
    }

    pub fn to_test_function(&self) -> TestFunction1D {
        let degree = self.poly.0.len();
        let cutoff =
            self.center.abs() + self.width * (14.0 + 2.0 * (degree as f64).sqrt());
        let me = self.clone();
        let me2 = self.clone();
        TestFunction1D::new(
            Rc::new(move |x| me.value(x)),
            Rc::new(move |j, x| me2.deriv(j, x)),
            Support::Schwartz { cutoff },
            64,
        )
        .with_analytic_radius(f64::INFINITY)
    }
}
