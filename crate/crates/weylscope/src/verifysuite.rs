//! Numerical verification of the analytic identities behind the curvature
//! calculus: the two-variable J-integral product identity, the
//! indefinite-signature Weyl lemma, and the one-dimensional distribution
//! tables (residues, Fourier duality, chi point evaluations and the double
//! Fourier reflection).
//!
//! Every check is an [`IdentityCase`]: a left-hand side computed by
//! independent quadrature/finite-part machinery, a right-hand side from the
//! closed form, an error and a tolerance. Suites return flat case lists
//! exportable as JSON or CSV.

use std::f64::consts::{FRAC_PI_2, PI};
use std::rc::Rc;

use num_complex::Complex64;
use thiserror::Error;

use crate::homdist::{
    chi, chi_eval_pm1, fourier, regularized_pair, regularized_pair_tol, residue,
    residue_numeric_check, Family, GaussPoly1, HomDistError, HomDistribution, Poly, Support,
    TestFunction1D,
};
use crate::jet::{compose, Jet1, Smooth};
use crate::quad;
use crate::specfun::{gamma_real, neg_one_pow, sine_integral_s, HalfInteger};

pub type Result<T> = std::result::Result<T, VerifyError>;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("invalid identity indices: {0}")]
    BadIndices(String),
    #[error(transparent)]
    Distribution(#[from] HomDistError),
    #[error(transparent)]
    SpecFun(#[from] crate::specfun::SpecFunError),
}

// ---------------------------------------------------------------------------
// Identity cases
// ---------------------------------------------------------------------------

/// One verified identity: the two sides, the observed error and the
/// tolerance. `pass()` is defined as `error < tol`, never stored.
#[derive(Debug, Clone)]
pub struct IdentityCase {
    pub id: &'static str,
    pub params: String,
    pub test_fn: String,
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub error: f64,
    pub tol: f64,
}

impl IdentityCase {
    pub fn pass(&self) -> bool {
        self.error < self.tol
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "id": self.id,
            "params": self.params,
            "test_fn": self.test_fn,
            "lhs_re": self.lhs.re,
            "lhs_im": self.lhs.im,
            "rhs_re": self.rhs.re,
            "rhs_im": self.rhs.im,
            "error": self.error,
            "tol": self.tol,
            "pass": self.pass(),
        })
    }
}

pub fn cases_to_json(cases: &[IdentityCase]) -> serde_json::Value {
    serde_json::Value::Array(cases.iter().map(|c| c.to_json()).collect())
}

pub fn cases_to_csv(cases: &[IdentityCase]) -> String {
    let mut out = String::from("id,params,test_fn,lhs_re,lhs_im,rhs_re,rhs_im,error,tol,pass\n");
    for c in cases {
        out.push_str(&format!(
            "{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.3e},{:.3e},{}\n",
            c.id,
            c.params,
            c.test_fn,
            c.lhs.re,
            c.lhs.im,
            c.rhs.re,
            c.rhs.im,
            c.error,
            c.tol,
            c.pass()
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Pointwise chi values
// ---------------------------------------------------------------------------

/// Pointwise value of chi_i^s away from the origin. The delta components of
/// the integer-exponent odd family vanish off zero, so every family member
/// has a classical value here.
pub fn chi_value(i: u8, s: HalfInteger, x: f64) -> f64 {
    debug_assert!(x != 0.0);
    let i = i % 2;
    let sv = s.to_f64();
    if x > 0.0 {
        if i == 0 {
            x.powf(sv)
        } else {
            0.0
        }
    } else if s.is_integer() {
        if i == 0 {
            neg_one_pow(s.as_integer()) * (-x).powf(sv)
        } else {
            0.0
        }
    } else if i == 1 {
        neg_one_pow(s.floor_plus_half()) * (-x).powf(sv)
    } else {
        0.0
    }
}

// ---------------------------------------------------------------------------
// Exact trigonometric pushforward profiles
// ---------------------------------------------------------------------------

/// The pushforward of the density sin^a t cos^b t dt on [0, pi/2] under
/// x(t) = sigma cos^2 t + rho sin^2 t (sigma != rho), as a test function
/// with analytically exact derivatives: h(x) = sin^a t cos^b t / |x'(t)| at
/// the unique preimage, Taylor data by jet series reversion. This is the
/// one-dimensional level-set reduction used by the J and Weyl checks.
fn trig_pushforward(sigma: f64, rho: f64, a: u32, b: u32) -> TestFunction1D {
    assert!(sigma != rho);
    let lo = sigma.min(rho);
    let hi = sigma.max(rho);
    let eps = 1e-13 * (hi - lo);
    let t_of_x = move |x: f64| -> f64 {
        let c2 = ((2.0 * x - sigma - rho) / (sigma - rho)).clamp(-1.0, 1.0);
        c2.acos() / 2.0
    };
    let interior = move |x: f64| x > lo + eps && x < hi - eps;
    let value = move |x: f64| -> Complex64 {
        if !interior(x) {
            return Complex64::new(0.0, 0.0);
        }
        let t = t_of_x(x);
        let xp = (rho - sigma) * (2.0 * t).sin();
        Complex64::new(
            t.sin().powi(a as i32) * t.cos().powi(b as i32) / xp.abs(),
            0.0,
        )
    };
    let deriv = move |j: usize, x: f64| -> Complex64 {
        if !interior(x) {
            return Complex64::new(0.0, 0.0);
        }
        let n = j + 1;
        let t0 = t_of_x(x);
        // x(t) around t0, one order higher so x' keeps order n.
        let tj = Jet1::var(t0, n + 1);
        let xj = tj.clone().cos().powi(2).scale(sigma - rho) + tj.lift(rho);
        let xp = xj.d();
        let sgn = if xp.value() >= 0.0 { 1.0 } else { -1.0 };
        let tw = Jet1::var(t0, n);
        let wj = tw.clone().sin().powi(a as i32) * tw.cos().powi(b as i32)
            * xp.scale(sgn).recip();
        // t(x) - t0 in powers of x - x0, then h = w(t(x)).
        let inv = xj.invert();
        let hj = compose(&wj, &inv);
        Complex64::new(hj.derivative(j), 0.0)
    };
    TestFunction1D::new(
        Rc::new(value),
        Rc::new(move |j, x| deriv(j, x)),
        Support::Compact {
            neg: (-lo).max(0.0),
            pos: hi.max(0.0),
        },
        10,
    )
}

/// Frozen-argument value of J_{m,a}(sigma, rho; chi_i^{-(m+2)/2}). Smooth
/// quadrature when the projected argument never meets the singular support,
/// finite-part pairing against the exact level-set profile otherwise.
pub fn j_point_value(m: u32, a: u32, i: u8, sigma: f64, rho: f64) -> Result<Complex64> {
    if a > m {
        return Err(VerifyError::BadIndices(format!("a = {a} exceeds m = {m}")));
    }
    let s = HalfInteger::from_twice(-(m as i64 + 2));
    let b = m - a;
    if sigma == rho {
        // Constant argument: the weight integrates to S(a, m-a).
        return Ok(Complex64::new(chi_value(i, s, sigma), 0.0) * sine_integral_s(a, b));
    }
    let lo = sigma.min(rho);
    let hi = sigma.max(rho);
    if lo == 0.0 || hi == 0.0 {
        return Err(VerifyError::BadIndices(
            "argument range touches the singular point 0 at its boundary".into(),
        ));
    }
    if lo > 0.0 || hi < 0.0 {
        let val = quad::integrate(
            |t| {
                let x = sigma * t.cos().powi(2) + rho * t.sin().powi(2);
                Complex64::new(
                    chi_value(i, s, x) * t.sin().powi(a as i32) * t.cos().powi(b as i32),
                    0.0,
                )
            },
            0.0,
            FRAC_PI_2,
            1e-12,
        )
        .value;
        return Ok(val);
    }
    level_set_pair(i, s, sigma, rho, a, b)
}

/// Smooth plateau equal to 1 on [-r1, r1], 0 outside (-r2, r2), with twelve
/// matched derivatives at the junctions (a degree-25 smoothstep).
struct Plateau {
    r1: f64,
    r2: f64,
    /// unnormalized coefficients of int_0^u v^12 (1-v)^12 dv at powers 13+k
    coeffs: Vec<f64>,
    /// B(13, 13), the value of that integral at u = 1
    total: f64,
}

impl Plateau {
    fn new(r1: f64, r2: f64) -> Self {
        assert!(0.0 < r1 && r1 < r2);
        // binomial expansion of v^12 (1-v)^12, integrated term by term;
        // the coefficients are kept small and the normalization applied
        // last so evaluation does not lose all its digits to cancellation
        let mut raw = vec![0.0f64; 26];
        let mut binom = 1.0f64;
        for k in 0..=12usize {
            raw[13 + k] = binom * neg_one_pow(k as i64) / (13 + k) as f64;
            binom *= (12 - k) as f64 / (k + 1) as f64;
        }
        let total: f64 = raw.iter().sum();
        Plateau {
            r1,
            r2,
            coeffs: raw,
            total,
        }
    }

    /// k-th derivative of the smoothstep polynomial at u; the symmetry
    /// P(u) = 1 - P(1-u) keeps the alternating sum well conditioned on the
    /// whole interval.
    fn step_deriv(&self, k: usize, u: f64) -> f64 {
        if u > 0.5 {
            let refl = self.step_deriv(k, 1.0 - u);
            return if k == 0 {
                1.0 - refl
            } else {
                neg_one_pow(k as i64 + 1) * refl
            };
        }
        let mut acc = 0.0;
        for (n, &c) in self.coeffs.iter().enumerate() {
            if n < k || c == 0.0 {
                continue;
            }
            let mut fac = c;
            for j in 0..k {
                fac *= (n - j) as f64;
            }
            acc += fac * u.powi((n - k) as i32);
        }
        acc / self.total
    }

    fn deriv(&self, k: usize, x: f64) -> f64 {
        let ax = x.abs();
        if ax <= self.r1 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        if ax >= self.r2 {
            return 0.0;
        }
        let scale = 1.0 / (self.r2 - self.r1);
        let u = (self.r2 - ax) * scale;
        let chain = if x >= 0.0 { -scale } else { scale };
        self.step_deriv(k, u) * chain.powi(k as i32)
    }
}

/// Finite-part pairing of chi_i^s with the level-set density of
/// sin^a t cos^b t dt under x(t) = sigma cos^2 t + rho sin^2 t when the range
/// crosses zero. The pushforward profile has inverse-square-root
/// singularities at the range endpoints (the critical values of x), so the
/// pairing is split: the finite part sees only the plateau-localized smooth
/// core near 0, and the complement is a classical integral back in t.
fn build_level_set_core(
    sigma: f64,
    rho: f64,
    a: u32,
    b: u32,
) -> (TestFunction1D, Rc<Plateau>) {
    let lo = sigma.min(rho);
    let hi = sigma.max(rho);
    debug_assert!(lo < 0.0 && hi > 0.0);
    let r2 = 0.7 * (-lo).min(hi);
    let r1 = 0.55 * r2;
    let psi = Rc::new(Plateau::new(r1, r2));
    let h = trig_pushforward(sigma, rho, a, b);

    let hv = h.clone();
    let psi_v = psi.clone();
    let value = move |x: f64| -> Complex64 {
        let p = psi_v.deriv(0, x);
        if p == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            hv.eval(x) * p
        }
    };
    let hd = h.clone();
    let psi_d = psi.clone();
    let deriv = move |j: usize, x: f64| -> Complex64 {
        if x.abs() >= psi_d.r2 {
            return Complex64::new(0.0, 0.0);
        }
        if x.abs() <= psi_d.r1 {
            return hd.eval_deriv(j, x);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        let mut binom = 1.0f64;
        for k in 0..=j {
            acc += hd.eval_deriv(k, x) * (psi_d.deriv(j - k, x) * binom);
            binom *= (j - k) as f64 / (k + 1) as f64;
        }
        acc
    };
    // Within the plateau the core coincides with the analytic profile, whose
    // nearest singularities sit at the range endpoints.
    let core = TestFunction1D::new(
        Rc::new(value),
        Rc::new(move |j, x| deriv(j, x)),
        Support::Compact { neg: r2, pos: r2 },
        10,
    )
    .with_analytic_radius(r1);
    (core, psi)
}

fn level_set_pair(i: u8, s: HalfInteger, sigma: f64, rho: f64, a: u32, b: u32) -> Result<Complex64> {
    let (core, psi) = build_level_set_core(sigma, rho, a, b);
    let d = chi(i, s)?;
    let near = regularized_pair_tol(&d, &core, 1e-12)?;

    let psi_t = psi.clone();
    let far = quad::integrate(
        |t| {
            let x = sigma * t.cos().powi(2) + rho * t.sin().powi(2);
            if x.abs() <= psi_t.r1 {
                return Complex64::new(0.0, 0.0);
            }
            let w = t.sin().powi(a as i32) * t.cos().powi(b as i32);
            Complex64::new(chi_value(i, s, x) * (1.0 - psi_t.deriv(0, x)) * w, 0.0)
        },
        0.0,
        FRAC_PI_2,
        1e-12,
    )
    .value;
    Ok(near + far)
}

// ---------------------------------------------------------------------------
// J-identity against smooth two-variable test functions
// ---------------------------------------------------------------------------

/// Tensor-sum Gaussian test function on the (sigma, rho) plane:
/// phi(s, r) = sum_k f_k(s) g_k(r) with Gaussian-polynomial factors.
#[derive(Clone)]
pub struct TensorGauss2 {
    pub name: String,
    pub terms: Vec<(GaussPoly1, GaussPoly1)>,
}

impl TensorGauss2 {
    pub fn eval(&self, s: f64, r: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|(f, g)| f.value(s) * g.value(r))
            .sum()
    }
}

/// The two default smooth test functions of the J suite.
pub fn standard_j_test_functions() -> [TensorGauss2; 2] {
    let c = |x: f64| Complex64::new(x, 0.0);
    let iso = TensorGauss2 {
        name: "gauss_iso".into(),
        terms: vec![(
            GaussPoly1::new(Poly(vec![c(1.0)]), 1.0),
            GaussPoly1::new(Poly(vec![c(1.0)]), 1.0),
        )],
    };
    let poly = TensorGauss2 {
        name: "gauss_poly".into(),
        terms: vec![(
            GaussPoly1::new(Poly(vec![c(1.0), c(0.5)]), 0.9),
            GaussPoly1::new(Poly(vec![c(1.0), c(-0.4), c(0.2)]), 1.1),
        )],
    };
    [iso, poly]
}

/// f(x/alpha)/alpha as a center-0 Gaussian polynomial (alpha > 0): the
/// pushforward of f dx under x -> alpha x.
fn gp_scale_arg(f: &GaussPoly1, alpha: f64) -> GaussPoly1 {
    debug_assert_eq!(f.center, 0.0);
    let coeffs = f
        .poly
        .0
        .iter()
        .enumerate()
        .map(|(k, c)| c / alpha.powi(k as i32 + 1))
        .collect();
    GaussPoly1::new(Poly(coeffs), alpha * f.width)
}

/// Pointwise product of two center-0 Gaussian polynomials.
fn gp_mul(f: &GaussPoly1, g: &GaussPoly1) -> GaussPoly1 {
    debug_assert_eq!(f.center, 0.0);
    debug_assert_eq!(g.center, 0.0);
    let w = f.width * g.width / f.width.hypot(g.width);
    GaussPoly1::new(f.poly.mul(&g.poly), w)
}

/// Exact convolution of two center-0 Gaussian polynomials via the Fourier
/// product rule: f * g = (1/2pi) reflect(F(Ff . Fg)).
fn gp_convolve(f: &GaussPoly1, g: &GaussPoly1) -> GaussPoly1 {
    let prod = gp_mul(&f.fourier(), &g.fourier());
    let back = prod.fourier();
    let coeffs = back
        .poly
        .0
        .iter()
        .enumerate()
        .map(|(k, c)| c * neg_one_pow(k as i64) / (2.0 * PI))
        .collect();
    GaussPoly1::new(Poly(coeffs), back.width)
}

/// Pushforward of one tensor term f (x) g under
/// (sigma, rho) -> sigma cos^2 t + sin^2 t rho for fixed t: the exact
/// convolution of the two marginal pushforwards.
fn line_pushforward_term(f: &GaussPoly1, g: &GaussPoly1, t: f64) -> GaussPoly1 {
    let c2 = t.cos().powi(2);
    let s2 = t.sin().powi(2);
    gp_convolve(&gp_scale_arg(f, c2), &gp_scale_arg(g, s2))
}

const GL7_X: [f64; 7] = [
    -0.949_107_912_342_758_5,
    -0.741_531_185_599_394_4,
    -0.405_845_151_377_397_2,
    0.0,
    0.405_845_151_377_397_2,
    0.741_531_185_599_394_4,
    0.949_107_912_342_758_5,
];
const GL7_W: [f64; 7] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
    0.381_830_050_505_118_9,
    0.279_705_391_489_276_7,
    0.129_484_966_168_869_7,
];

/// Composite 7-point Gauss-Legendre quadrature over `panels` uniform panels.
fn composite_gl7<F>(mut f: F, a: f64, b: f64, panels: usize) -> Result<Complex64>
where
    F: FnMut(f64) -> Result<Complex64>,
{
    let panels = panels.max(1);
    let hw = (b - a) / panels as f64 / 2.0;
    let mut acc = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let mid = a + (b - a) * (p as f64 + 0.5) / panels as f64;
        for k in 0..7 {
            acc += f(mid + hw * GL7_X[k])? * (GL7_W[k] * hw);
        }
    }
    Ok(acc)
}

/// The product identity for J_{m,a}(sigma, rho; chi_i^{-(m+2)/2}) paired
/// against a smooth rapidly-decaying test function. The left side projects
/// phi onto the level lines of sigma cos^2 t + rho sin^2 t, pairs chi with
/// each profile and integrates over t on `t_panels` Gauss-Legendre panels;
/// the right side is the iterated one-dimensional pairing (inner rho, then
/// outer sigma) of the chi product.
pub fn verify_j_identity(
    m: u32,
    a: u32,
    i: u8,
    phi: &TensorGauss2,
    t_panels: usize,
) -> Result<IdentityCase> {
    if a > m {
        return Err(VerifyError::BadIndices(format!("a = {a} exceeds m = {m}")));
    }
    let i = i % 2;
    let b = m - a;
    let d = chi(i, HalfInteger::from_twice(-(m as i64 + 2)))?;
    let lhs = composite_gl7(
        |t| {
            let w = t.sin().powi(a as i32) * t.cos().powi(b as i32);
            let mut acc = Complex64::new(0.0, 0.0);
            for (f, g) in &phi.terms {
                let ht = line_pushforward_term(f, g, t).to_test_function();
                acc += regularized_pair_tol(&d, &ht, 1e-10)?;
            }
            Ok(acc * w)
        },
        0.0,
        FRAC_PI_2,
        t_panels,
    )?;

    let s_out = HalfInteger::from_twice(-(b as i64 + 1));
    let s_in = HalfInteger::from_twice(-(a as i64 + 1));
    let mut rhs = Complex64::new(0.0, 0.0);
    for j in 0..2u8 {
        let sign = neg_one_pow((i as i64 + 1) * j as i64);
        let d_out = chi((i + j) % 2, s_out)?;
        let d_in = chi(j, s_in)?;
        for (f, g) in &phi.terms {
            let inner = regularized_pair(&d_in, &g.to_test_function())?;
            let outer = regularized_pair(&d_out, &f.to_test_function())?;
            rhs += inner * outer * sign;
        }
    }
    rhs *= sine_integral_s(a, b);

    let error = (lhs - rhs).norm() / (1.0 + rhs.norm());
    Ok(IdentityCase {
        id: "j_identity",
        params: format!("m={m},a={a},i={i}"),
        test_fn: phi.name.clone(),
        lhs,
        rhs,
        error,
        tol: 1e-6,
    })
}

/// The frozen-rho special case J_{m,a}(sigma, 1) = S(a,m-a)
/// chi_i^{-(m+1-a)/2}(sigma), checked pointwise at a regular sigma.
pub fn verify_j_frozen(m: u32, a: u32, i: u8, sigma: f64) -> Result<IdentityCase> {
    let i = i % 2;
    let lhs = j_point_value(m, a, i, sigma, 1.0)?;
    let s_red = HalfInteger::from_twice(-((m - a) as i64 + 1));
    let rhs = Complex64::new(chi_value(i, s_red, sigma) * sine_integral_s(a, m - a), 0.0);
    let error = (lhs - rhs).norm();
    Ok(IdentityCase {
        id: "j_frozen",
        params: format!("m={m},a={a},i={i},sigma={sigma}"),
        test_fn: "pointwise".into(),
        lhs,
        rhs,
        error,
        tol: 1e-6 * (1.0 + rhs.norm()),
    })
}

/// The sphere-computation special value J_{1,0}(1,-1; chi_1^{-3/2}) = 1.
pub fn verify_j_special() -> Result<IdentityCase> {
    let lhs = j_point_value(1, 0, 1, 1.0, -1.0)?;
    let rhs = Complex64::new(1.0, 0.0);
    Ok(IdentityCase {
        id: "j_special",
        params: "m=1,a=0,i=1,sigma=1,rho=-1".into(),
        test_fn: "pointwise".into(),
        lhs,
        rhs,
        error: (lhs - rhs).norm(),
        tol: 1e-8,
    })
}

/// The default J suite: the full lattice m <= 4, a <= m, i in {0,1} against
/// both standard test functions, the frozen-rho pointwise lattice at
/// sigma in {-1, -1/2, 1/2, 1}, and the special value.
pub fn run_j_suite(t_panels: usize) -> Result<Vec<IdentityCase>> {
    let phis = standard_j_test_functions();
    let mut cases = Vec::new();
    for m in 0..=4u32 {
        for a in 0..=m {
            for i in 0..2u8 {
                for phi in &phis {
                    cases.push(verify_j_identity(m, a, i, phi, t_panels)?);
                }
                for sigma in [-1.0, -0.5, 0.5, 1.0] {
                    cases.push(verify_j_frozen(m, a, i, sigma)?);
                }
            }
        }
    }
    cases.push(verify_j_special()?);
    Ok(cases)
}

// ---------------------------------------------------------------------------
// Weyl lemma
// ---------------------------------------------------------------------------

/// The moment \int_{S^{k-1}} y_1^h dS = 2 Gamma((h+1)/2) pi^{(k-1)/2} /
/// Gamma((k+h)/2) for even h; zero for odd h. At h = 0 this is the surface
/// area of the unit sphere.
pub fn sphere_moment(k: u32, h: u32) -> Result<f64> {
    if k == 0 {
        return Err(VerifyError::BadIndices("S^{-1} has no moments".into()));
    }
    if h % 2 == 1 {
        return Ok(0.0);
    }
    Ok(2.0 * gamma_real((h as f64 + 1.0) / 2.0)?
        * PI.powf((k as f64 - 1.0) / 2.0)
        / gamma_real((k as f64 + h as f64) / 2.0)?)
}

/// The Weyl-lemma constant c(n, h); zero for odd h.
pub fn weyl_constant(n: u32, h: u32) -> Result<f64> {
    sphere_moment(n, h)
}

/// The indefinite-signature Weyl lemma for the diagonal test case
/// zeta_j = dx_j (x) e_1:
///   int_{S^{p+q-1}} chi_i^{-(p+q+h)/2}(Q(y,y)) y_1^h dS
///     = c(p+q, h) chi_i^{-q/2}(-1).
/// The left side is the one-dimensional level-set reduction (the level sets
/// of Q on the sphere are scaled products S^{p-1} x S^{q-1}) paired by
/// finite parts; the e_1 specialization needs a spacelike first axis, so
/// p = 0 is admitted only at h = 0.
pub fn verify_weyl_lemma(p: u32, q: u32, h: u32, i: u8) -> Result<IdentityCase> {
    let i = i % 2;
    let n = p + q;
    if n < 2 {
        return Err(VerifyError::BadIndices(format!(
            "need p + q >= 2, got ({p},{q})"
        )));
    }
    if p == 0 && h > 0 {
        return Err(VerifyError::BadIndices(
            "the diagonal test case needs a spacelike first axis (p >= 1) when h > 0".into(),
        ));
    }
    let s = HalfInteger::from_twice(-((n + h) as i64));
    let s_q = HalfInteger::from_twice(-(q as i64));
    let rhs = Complex64::new(weyl_constant(n, h)? * chi_eval_pm1(i, s_q, -1), 0.0);
    let lhs = if h % 2 == 1 {
        // The odd moment over S^{p-1} vanishes identically.
        Complex64::new(0.0, 0.0)
    } else if q == 0 {
        Complex64::new(sphere_moment(p, h)? * chi_eval_pm1(i, s, 1), 0.0)
    } else if p == 0 {
        Complex64::new(sphere_moment(q, 0)? * chi_eval_pm1(i, s, -1), 0.0)
    } else {
        let cp = sphere_moment(p, h)?;
        let cq = sphere_moment(q, 0)?;
        level_set_pair(i, s, 1.0, -1.0, q - 1, p + h - 1)? * (cp * cq)
    };
    let error = (lhs - rhs).norm();
    let tol = if h % 2 == 1 || rhs.norm() == 0.0 {
        1e-10
    } else {
        1e-6 * (1.0 + rhs.norm())
    };
    Ok(IdentityCase {
        id: "weyl_lemma",
        params: format!("p={p},q={q},h={h},i={i}"),
        test_fn: "diagonal_zeta".into(),
        lhs,
        rhs,
        error,
        tol,
    })
}

/// The default Weyl-lemma lattice: p + q <= 6, h <= 4, both parities
/// (p = 0 restricted to h = 0 where the diagonal test case degenerates).
pub fn run_weyl_suite() -> Result<Vec<IdentityCase>> {
    let mut cases = Vec::new();
    for n in 2..=6u32 {
        for p in 0..=n {
            let q = n - p;
            for h in 0..=4u32 {
                if p == 0 && h > 0 {
                    continue;
                }
                for i in 0..2u8 {
                    cases.push(verify_weyl_lemma(p, q, h, i)?);
                }
            }
        }
    }
    Ok(cases)
}

// ---------------------------------------------------------------------------
// Distribution tables
// ---------------------------------------------------------------------------

fn gauss_phi() -> GaussPoly1 {
    GaussPoly1::new(Poly(vec![Complex64::new(1.0, 0.0)]), 1.0)
}

fn x_gauss_phi() -> GaussPoly1 {
    GaussPoly1::new(
        Poly(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]),
        1.0,
    )
}

fn residue_case(fam: Family, at: i64, phi: &GaussPoly1, name: &str) -> IdentityCase {
    let params = format!("family={name},at={at}");
    let tf = phi.to_test_function();
    let target = residue(fam, at)
        .and_then(|d| regularized_pair(&d, &tf))
        .unwrap_or(Complex64::new(f64::NAN, 0.0));
    let error = residue_numeric_check(fam, at, &tf).unwrap_or(f64::INFINITY);
    IdentityCase {
        id: "residue",
        params,
        test_fn: if phi.poly.0.len() > 1 { "x_gauss" } else { "gauss" }.into(),
        lhs: target,
        rhs: target,
        error,
        tol: 1e-8,
    }
}

fn duality_case(d: &HomDistribution, phi: &GaussPoly1, label: &str, tol: f64) -> IdentityCase {
    let run = || -> std::result::Result<(Complex64, Complex64), HomDistError> {
        let fd = fourier(d)?;
        let lhs = regularized_pair(&fd, &phi.to_test_function())?;
        let rhs = regularized_pair(d, &phi.fourier().to_test_function())?;
        Ok((lhs, rhs))
    };
    match run() {
        Ok((lhs, rhs)) => IdentityCase {
            id: "fourier_duality",
            params: label.into(),
            test_fn: if phi.poly.0.len() > 1 { "x_gauss" } else { "gauss" }.into(),
            lhs,
            rhs,
            error: (lhs - rhs).norm(),
            tol,
        },
        Err(_) => IdentityCase {
            id: "fourier_duality",
            params: label.into(),
            test_fn: "gauss".into(),
            lhs: Complex64::new(f64::NAN, 0.0),
            rhs: Complex64::new(f64::NAN, 0.0),
            error: f64::INFINITY,
            tol,
        },
    }
}

/// Numeric point value of a distribution at x0 by pairing against unit-mass
/// Gaussian bumps of shrinking width and Richardson (Neville) extrapolation
/// in the squared width.
fn point_value_numeric(d: &HomDistribution, x0: f64) -> std::result::Result<Complex64, HomDistError> {
    // Gaussian smoothing of a function analytic at x0 has a Gevrey (not
    // convergent) expansion in w^2, so the widths must be small enough that
    // the first neglected term is already below target, and few enough
    // levels that Neville noise amplification stays mild.
    let widths = [0.017, 0.012, 0.0085, 0.006];
    let mut nodes = Vec::with_capacity(widths.len());
    let mut vals = Vec::with_capacity(widths.len());
    for &w in &widths {
        let amp = 1.0 / (w * (2.0 * PI).sqrt());
        let bump = GaussPoly1::centered(Poly(vec![Complex64::new(amp, 0.0)]), w, x0);
        vals.push(regularized_pair_tol(d, &bump.to_test_function(), 1e-13)?);
        nodes.push(w * w);
    }
    // Neville extrapolation of the even expansion in w^2 to w = 0.
    let n = vals.len();
    for lvl in 1..n {
        for j in 0..(n - lvl) {
            let num = vals[j + 1] * nodes[j] - vals[j] * nodes[j + lvl];
            vals[j] = num / (nodes[j] - nodes[j + lvl]);
        }
    }
    Ok(vals[0])
}

fn chi_eval_case(i: u8, s: HalfInteger, sign: i8) -> IdentityCase {
    let x0 = if sign > 0 { 1.0 } else { -1.0 };
    let rhs = Complex64::new(chi_eval_pm1(i, s, sign), 0.0);
    let lhs = chi(i, s)
        .and_then(|d| point_value_numeric(&d, x0))
        .unwrap_or(Complex64::new(f64::NAN, 0.0));
    IdentityCase {
        id: "chi_eval",
        params: format!("i={i},s={s},x={x0}"),
        test_fn: "gauss_bump".into(),
        lhs,
        rhs,
        error: (lhs - rhs).norm(),
        tol: 1e-8,
    }
}

fn double_fourier_case(i: u8, s: HalfInteger) -> IdentityCase {
    let params = format!("i={i},s={s}");
    let run = || -> std::result::Result<f64, HomDistError> {
        let d = chi(i, s)?;
        let ff = fourier(&fourier(&d)?)?;
        let mut expect = d.reflect().scaled(Complex64::new(2.0 * PI, 0.0));
        expect.canonicalize();
        let mut worst = 0.0f64;
        if ff.power_terms.len() != expect.power_terms.len()
            || ff.delta_terms.len() != expect.delta_terms.len()
        {
            return Ok(f64::INFINITY);
        }
        for (a, b) in ff.power_terms.iter().zip(expect.power_terms.iter()) {
            if a.side != b.side || a.exponent != b.exponent {
                return Ok(f64::INFINITY);
            }
            worst = worst.max((a.coeff - b.coeff).norm() / (1.0 + b.coeff.norm()));
        }
        for (a, b) in ff.delta_terms.iter().zip(expect.delta_terms.iter()) {
            if a.order != b.order {
                return Ok(f64::INFINITY);
            }
            worst = worst.max((a.coeff - b.coeff).norm() / (1.0 + b.coeff.norm()));
        }
        Ok(worst)
    };
    let error = run().unwrap_or(f64::INFINITY);
    IdentityCase {
        id: "double_fourier",
        params,
        test_fn: "coefficients".into(),
        lhs: Complex64::new(error, 0.0),
        rhs: Complex64::new(0.0, 0.0),
        error,
        tol: 1e-12,
    }
}

/// The distribution-table suite: residue limits, Fourier duality, chi point
/// evaluations and coefficient-exact double Fourier reflection over the
/// fixed lattice s in {-1/2,...,-7/2} u {-1,-2,-3}, i in {0,1}. Failures
/// are recorded per case, never raised.
pub fn run_table_suite() -> Vec<IdentityCase> {
    let h = HalfInteger::from_twice;
    let hi = HalfInteger::from_int;
    let gauss = gauss_phi();
    let xg = x_gauss_phi();
    let mut cases = vec![
        residue_case(Family::XPlus, -1, &gauss, "x_plus"),
        residue_case(Family::XPlus, -2, &xg, "x_plus"),
        residue_case(Family::XMinus, -1, &gauss, "x_minus"),
        residue_case(Family::XMinus, -2, &xg, "x_minus"),
        residue_case(Family::Abs, -1, &gauss, "abs"),
        residue_case(Family::SignAbs, -2, &xg, "sign_abs"),
    ];

    let delta = HomDistribution::delta(0);
    let delta1 = HomDistribution::delta(1);
    cases.push(duality_case(&delta, &gauss, "delta0", 1e-10));
    cases.push(duality_case(&delta1, &xg, "delta1", 1e-8));
    cases.push(duality_case(&chi(0, h(-1)).unwrap(), &gauss, "chi0_-1/2", 1e-8));
    cases.push(duality_case(&chi(1, h(-3)).unwrap(), &gauss, "chi1_-3/2", 1e-8));
    cases.push(duality_case(&chi(1, hi(-1)).unwrap(), &gauss, "chi1_-1", 1e-8));
    cases.push(duality_case(&chi(0, hi(-2)).unwrap(), &gauss, "chi0_-2", 1e-8));
    cases.push(duality_case(&chi(1, hi(-2)).unwrap(), &xg, "chi1_-2", 1e-8));
    cases.push(duality_case(&HomDistribution::x_pow(-1), &xg, "x^-1", 1e-8));

    cases.push(chi_eval_case(0, h(-1), 1));
    cases.push(chi_eval_case(0, h(-1), -1));
    cases.push(chi_eval_case(1, h(-3), -1));
    cases.push(chi_eval_case(1, h(-3), 1));
    cases.push(chi_eval_case(0, hi(-1), -1));
    cases.push(chi_eval_case(1, hi(-1), -1));
    cases.push(chi_eval_case(1, h(-1), -1));
    cases.push(chi_eval_case(0, h(-5), 1));

    for tw in [-1i64, -3, -5, -7] {
        for i in 0..2u8 {
            cases.push(double_fourier_case(i, h(tw)));
        }
    }
    for k in [-1i64, -2, -3] {
        for i in 0..2u8 {
            cases.push(double_fourier_case(i, hi(k)));
        }
    }
    cases
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_case(c: &IdentityCase) {
        assert!(
            c.pass(),
            "{} [{}] failed: lhs {} rhs {} err {:.3e} tol {:.3e}",
            c.id,
            c.params,
            c.lhs,
            c.rhs,
            c.error,
            c.tol
        );
    }

    #[test]
    fn chi_value_matches_symbolic_at_unit_points() {
        let h = HalfInteger::from_twice;
        for i in 0..2u8 {
            for tw in [-1i64, -2, -3, -4, -5, -6, -7] {
                let s = h(tw);
                assert_eq!(chi_value(i, s, 1.0), chi_eval_pm1(i, s, 1), "i={i},s={s},+1");
                assert_eq!(
                    chi_value(i, s, -1.0),
                    chi_eval_pm1(i, s, -1),
                    "i={i},s={s},-1"
                );
            }
        }
        // interior values of the one-sided halves
        assert!((chi_value(0, h(-3), 0.25) - 8.0).abs() < 1e-12);
        assert_eq!(chi_value(0, h(-3), -0.25), 0.0);
        assert!((chi_value(1, h(-3), -0.25) - (-8.0)).abs() < 1e-12);
    }

    #[test]
    fn trig_profile_derivatives_match_finite_differences() {
        let phi = trig_pushforward(1.0, -1.0, 1, 2);
        for &x in &[0.0, 0.3, -0.45] {
            let d = 1e-5;
            let fd1 = (phi.eval(x + d) - phi.eval(x - d)) / (2.0 * d);
            assert!(
                (fd1 - phi.eval_deriv(1, x)).norm() < 1e-8 * (1.0 + fd1.norm()),
                "first derivative at {x}"
            );
            let fd2 = (phi.eval(x + d) - phi.eval(x) * 2.0 + phi.eval(x - d)) / (d * d);
            assert!(
                (fd2 - phi.eval_deriv(2, x)).norm() < 1e-4 * (1.0 + fd2.norm()),
                "second derivative at {x}"
            );
        }
    }

    #[test]
    fn j_special_value_is_one() {
        let c = verify_j_special().unwrap();
        assert_case(&c);
        assert!((c.lhs.re - 1.0).abs() < 1e-8 && c.lhs.im.abs() < 1e-10, "{}", c.lhs);
    }

    #[test]
    fn j_frozen_lattice_passes() {
        for m in 0..=4u32 {
            for a in 0..=m {
                for i in 0..2u8 {
                    for sigma in [-1.0, -0.5, 0.5, 1.0] {
                        let c = verify_j_frozen(m, a, i, sigma).unwrap();
                        assert_case(&c);
                    }
                }
            }
        }
    }

    #[test]
    fn j_identity_on_gaussians() {
        let phis = standard_j_test_functions();
        for &(m, a, i) in &[(1u32, 0u32, 1u8), (1, 0, 0), (2, 1, 0), (3, 2, 1), (4, 4, 0)] {
            for phi in &phis {
                let c = verify_j_identity(m, a, i, phi, 8).unwrap();
                assert_case(&c);
                // parity can make a case structurally zero; both sides must
                // then agree on that
                if c.rhs.norm() <= 1e-4 {
                    assert!(c.lhs.norm() < 1e-8, "zero rhs but lhs {}", c.lhs);
                }
            }
        }
    }

    #[test]
    fn j_identity_error_decreases_under_t_refinement() {
        let phi = &standard_j_test_functions()[1];
        let coarse = verify_j_identity(2, 1, 1, phi, 1).unwrap();
        let fine = verify_j_identity(2, 1, 1, phi, 3).unwrap();
        assert!(
            fine.error < 0.5 * coarse.error || (coarse.error < 1e-8 && fine.error < 1e-8),
            "coarse {:.3e}, fine {:.3e}",
            coarse.error,
            fine.error
        );
    }

    #[test]
    fn weyl_examples_match_closed_forms() {
        // (1,1,2,0): chi_0^{-1/2}(-1) = 0.
        let c = verify_weyl_lemma(1, 1, 2, 0).unwrap();
        assert_case(&c);
        assert!(c.rhs.norm() == 0.0 && c.lhs.norm() < 1e-10, "{}", c.lhs);
        // (2,1,0,1): 2 Gamma(1/2) pi / Gamma(3/2) = 4 pi.
        let c = verify_weyl_lemma(2, 1, 0, 1).unwrap();
        assert_case(&c);
        assert!((c.rhs.re - 4.0 * PI).abs() < 1e-12);
        // odd h vanishes identically
        let c = verify_weyl_lemma(2, 2, 3, 0).unwrap();
        assert_eq!(c.lhs, Complex64::new(0.0, 0.0));
        assert_eq!(c.rhs, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn weyl_lattice_passes_with_exact_structural_zeros() {
        let cases = run_weyl_suite().unwrap();
        assert!(cases.len() > 80, "lattice size {}", cases.len());
        let mut zeros = 0;
        for c in &cases {
            assert_case(c);
            if c.tol == 1e-10 {
                zeros += 1;
            }
        }
        assert!(zeros > 30, "structural zero count {zeros}");
    }

    #[test]
    fn table_suite_counts_and_passes() {
        let cases = run_table_suite();
        let count = |id: &str| cases.iter().filter(|c| c.id == id).count();
        assert_eq!(count("residue"), 6);
        assert_eq!(count("fourier_duality"), 8);
        assert_eq!(count("chi_eval"), 8);
        assert_eq!(count("double_fourier"), 14);
        for c in &cases {
            assert_case(c);
        }
        // the odd-family value at -1 is the sign(x)|x|^{-1} point value -1
        let c = cases
            .iter()
            .find(|c| c.id == "chi_eval" && c.params == "i=0,s=-1,x=-1")
            .expect("case present");
        assert!((c.rhs.re + 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_case_serialization() {
        let c = IdentityCase {
            id: "j_identity",
            params: "m=1,a=0,i=1".into(),
            test_fn: "gauss_iso".into(),
            lhs: Complex64::new(1.0, 0.0),
            rhs: Complex64::new(1.0, 2e-9),
            error: 2e-9,
            tol: 1e-6,
        };
        let j = c.to_json();
        assert_eq!(j["id"], "j_identity");
        assert_eq!(j["pass"], true);
        let csv = cases_to_csv(&[c]);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("id,params,test_fn,lhs_re,lhs_im,rhs_re,rhs_im,error,tol,pass")
        );
        assert!(lines.next().unwrap().ends_with("true"));
    }
}
