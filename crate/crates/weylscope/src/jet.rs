//! Truncated Taylor (jet) arithmetic.
//!
//! `Jet1` / `Jet2` carry Taylor coefficients (derivatives divided by
//! factorials) of a function of one / two real variables around a base
//! point. Chart maps and scalar fields are written generically over the
//! [`Smooth`] trait so the same code path yields plain values (`f64`) and
//! analytic derivatives of any order (jets). No finite differencing is
//! involved anywhere jets are used.

/// Scalar type over which chart maps and fields are evaluated.
pub trait Smooth:
    Clone
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Neg<Output = Self>
{
    /// A constant with the same jet shape as `self`.
    fn lift(&self, c: f64) -> Self;
    /// The value at the base point.
    fn value(&self) -> f64;
    fn scale(self, c: f64) -> Self;
    fn recip(self) -> Self;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn powi(self, n: i32) -> Self;
}

impl Smooth for f64 {
    fn lift(&self, c: f64) -> f64 {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn scale(self, c: f64) -> f64 {
        self * c
    }
    fn recip(self) -> f64 {
        1.0 / self
    }
    fn sqrt(self) -> f64 {
        f64::sqrt(self)
    }
    fn exp(self) -> f64 {
        f64::exp(self)
    }
    fn sin(self) -> f64 {
        f64::sin(self)
    }
    fn cos(self) -> f64 {
        f64::cos(self)
    }
    fn powi(self, n: i32) -> f64 {
        f64::powi(self, n)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

// ---------------------------------------------------------------------------
// One variable
// ---------------------------------------------------------------------------

/// Taylor jet of a function of one variable: `c[k] = f^{(k)}(x0)/k!`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet1 {
    pub c: Vec<f64>,
}

impl Jet1 {
    pub fn constant(v: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = v;
        Jet1 { c }
    }

    /// The identity function x at base point x0.
    pub fn var(x0: f64, order: usize) -> Self {
        let mut j = Jet1::constant(x0, order);
        if order >= 1 {
            j.c[1] = 1.0;
        }
        j
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    /// k-th derivative at the base point.
    pub fn derivative(&self, k: usize) -> f64 {
        if k < self.c.len() {
            self.c[k] * factorial(k)
        } else {
            0.0
        }
    }

    /// Jet of the derivative function f'.
    pub fn d(&self) -> Jet1 {
        let n = self.order();
        let mut c = vec![0.0; n.max(1)];
        for k in 1..=n {
            c[k - 1] = self.c[k] * k as f64;
        }
        Jet1 { c }
    }

    /// Jet of the antiderivative with value `f0` at the base point
    /// (order grows by one).
    pub fn antiderivative(&self, f0: f64) -> Jet1 {
        let n = self.order();
        let mut c = vec![0.0; n + 2];
        c[0] = f0;
        for k in 0..=n {
            c[k + 1] = self.c[k] / (k + 1) as f64;
        }
        Jet1 { c }
    }

    /// Compose a univariate Taylor series `a` (around `self.c[0]`) with self:
    /// result = sum_k a[k] (self - self(x0))^k, truncated.
    fn apply_series(&self, a: &[f64]) -> Jet1 {
        let mut p = self.clone();
        p.c[0] = 0.0;
        let mut acc = Jet1::constant(*a.last().unwrap_or(&0.0), self.order());
        for k in (0..a.len().saturating_sub(1)).rev() {
            acc = acc * p.clone();
            acc.c[0] += a[k];
        }
        acc
    }

    /// Generalized power (x0 must be > 0 unless p is a small nonneg integer).
    pub fn powf(&self, p: f64) -> Jet1 {
        let x0 = self.c[0];
        assert!(x0 > 0.0, "powf requires positive base value, got {x0}");
        let n = self.order();
        let mut a = vec![0.0; n + 1];
        let mut binom = 1.0;
        for (k, ak) in a.iter_mut().enumerate() {
            *ak = binom * x0.powf(p - k as f64);
            binom *= (p - k as f64) / (k as f64 + 1.0);
        }
        self.apply_series(&a)
    }

    /// Inverse-function jet: given self = u(t) around t0 with u'(t0) != 0,
    /// returns the jet of the inverse t(x) around x0 = u(t0).
    pub fn invert(&self) -> Jet1 {
        let n = self.order();
        assert!(self.c[1] != 0.0, "series reversion needs nonvanishing derivative");
        let mut v = self.clone();
        v.c[0] = 0.0; // u - u0 in powers of (t - t0)
        // w(x) with v(w(x)) = x - x0 and w(0) = 0, solved order by order.
        let mut w = Jet1::constant(0.0, n);
        for k in 1..=n {
            let comp = compose_zero(&v, &w);
            let target = if k == 1 { 1.0 } else { 0.0 };
            w.c[k] += (target - comp.c[k]) / v.c[1];
        }
        // The constant term is left at zero: the jet only stores
        // coefficients, so the caller owns the inverse's base value t0.
        w
    }
}

/// Composition v(w) where both have zero constant term.
fn compose_zero(v: &Jet1, w: &Jet1) -> Jet1 {
    debug_assert_eq!(w.c[0], 0.0);
    let n = w.order();
    let mut acc = Jet1::constant(0.0, n);
    for k in (1..=v.order().min(n)).rev() {
        acc = acc * w.clone();
        acc.c[0] += v.c[k];
    }
    acc = acc * w.clone();
    acc.c[0] += v.c[0];
    acc
}

/// Full composition f(g) where f is a jet around g's value.
pub fn compose(f: &Jet1, g: &Jet1) -> Jet1 {
    g.apply_series(&f.c)
}

impl std::ops::Add for Jet1 {
    type Output = Jet1;
    fn add(self, rhs: Jet1) -> Jet1 {
        let c = self.c.iter().zip(rhs.c.iter()).map(|(a, b)| a + b).collect();
        Jet1 { c }
    }
}

impl std::ops::Sub for Jet1 {
    type Output = Jet1;
    fn sub(self, rhs: Jet1) -> Jet1 {
        let c = self.c.iter().zip(rhs.c.iter()).map(|(a, b)| a - b).collect();
        Jet1 { c }
    }
}

impl std::ops::Mul for Jet1 {
    type Output = Jet1;
    fn mul(self, rhs: Jet1) -> Jet1 {
        let n = self.order().min(rhs.order());
        let mut c = vec![0.0; n + 1];
        for i in 0..=n {
            for j in 0..=(n - i) {
                c[i + j] += self.c[i] * rhs.c[j];
            }
        }
        Jet1 { c }
    }
}

impl std::ops::Neg for Jet1 {
    type Output = Jet1;
    fn neg(mut self) -> Jet1 {
        for v in &mut self.c {
            *v = -*v;
        }
        self
    }
}

impl Smooth for Jet1 {
    fn lift(&self, c: f64) -> Jet1 {
        Jet1::constant(c, self.order())
    }
    fn value(&self) -> f64 {
        self.c[0]
    }
    fn scale(mut self, c: f64) -> Jet1 {
        for v in &mut self.c {
            *v *= c;
        }
        self
    }
    fn recip(self) -> Jet1 {
        let x0 = self.c[0];
        assert!(x0 != 0.0);
        let n = self.order();
        let mut a = vec![0.0; n + 1];
        let mut v = 1.0 / x0;
        for ak in a.iter_mut() {
            *ak = v;
            v = -v / x0;
        }
        self.apply_series(&a)
    }
    fn sqrt(self) -> Jet1 {
        self.powf(0.5)
    }
    fn exp(self) -> Jet1 {
        let n = self.order();
        let e = self.c[0].exp();
        let a: Vec<f64> = (0..=n).map(|k| e / factorial(k)).collect();
        self.apply_series(&a)
    }
    fn sin(self) -> Jet1 {
        let n = self.order();
        let (s, c) = self.c[0].sin_cos();
        let a: Vec<f64> = (0..=n)
            .map(|k| {
                let v = match k % 4 {
                    0 => s,
                    1 => c,
                    2 => -s,
                    _ => -c,
                };
                v / factorial(k)
            })
            .collect();
        self.apply_series(&a)
    }
    fn cos(self) -> Jet1 {
        let n = self.order();
        let (s, c) = self.c[0].sin_cos();
        let a: Vec<f64> = (0..=n)
            .map(|k| {
                let v = match k % 4 {
                    0 => c,
                    1 => -s,
                    2 => -c,
                    _ => s,
                };
                v / factorial(k)
            })
            .collect();
        self.apply_series(&a)
    }
    fn powi(self, p: i32) -> Jet1 {
        if p < 0 {
            return Smooth::recip(self).powi(-p);
        }
        let mut acc = Jet1::constant(1.0, self.order());
        for _ in 0..p {
            acc = acc * self.clone();
        }
        acc
    }
}

// ---------------------------------------------------------------------------
// Two variables
// ---------------------------------------------------------------------------

/// Taylor jet in two variables up to total degree `deg`:
/// coefficient (i,j) is d_u^i d_v^j f / (i! j!).
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    deg: usize,
    c: Vec<f64>,
}

fn idx2(deg: usize, i: usize, j: usize) -> usize {
    debug_assert!(i + j <= deg);
    i * (deg + 1) - i * (i.saturating_sub(1)) / 2 + j
}

impl Jet2 {
    pub fn constant(v: f64, deg: usize) -> Self {
        let mut c = vec![0.0; (deg + 1) * (deg + 2) / 2];
        c[0] = v;
        Jet2 { deg, c }
    }

    pub fn var_u(u0: f64, deg: usize) -> Self {
        let mut j = Jet2::constant(u0, deg);
        if deg >= 1 {
            let k = idx2(deg, 1, 0);
            j.c[k] = 1.0;
        }
        j
    }

    pub fn var_v(v0: f64, deg: usize) -> Self {
        let mut j = Jet2::constant(v0, deg);
        if deg >= 1 {
            let k = idx2(deg, 0, 1);
            j.c[k] = 1.0;
        }
        j
    }

    pub fn deg(&self) -> usize {
        self.deg
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j <= self.deg {
            self.c[idx2(self.deg, i, j)]
        } else {
            0.0
        }
    }

    /// Mixed partial derivative d_u^i d_v^j at the base point.
    pub fn derivative(&self, i: usize, j: usize) -> f64 {
        self.coeff(i, j) * factorial(i) * factorial(j)
    }

    fn apply_series(&self, a: &[f64]) -> Jet2 {
        let mut p = self.clone();
        p.c[0] = 0.0;
        let mut acc = Jet2::constant(*a.last().unwrap_or(&0.0), self.deg);
        for k in (0..a.len().saturating_sub(1)).rev() {
            acc = acc * p.clone();
            acc.c[0] += a[k];
        }
        acc
    }

    pub fn powf(&self, p: f64) -> Jet2 {
        let x0 = self.c[0];
        assert!(x0 > 0.0, "powf requires positive base value, got {x0}");
        let mut a = vec![0.0; self.deg + 1];
        let mut binom = 1.0;
        for (k, ak) in a.iter_mut().enumerate() {
            *ak = binom * x0.powf(p - k as f64);
            binom *= (p - k as f64) / (k as f64 + 1.0);
        }
        self.apply_series(&a)
    }

    /// Jet of the partial derivative d_u f (degree drops by one).
    pub fn du(&self) -> Jet2 {
        let d = self.deg.saturating_sub(1);
        let mut out = Jet2::constant(0.0, d);
        for i in 0..=d {
            for j in 0..=(d - i) {
                out.c[idx2(d, i, j)] = self.coeff(i + 1, j) * (i + 1) as f64;
            }
        }
        out
    }

    /// Jet of the partial derivative d_v f (degree drops by one).
    pub fn dv(&self) -> Jet2 {
        let d = self.deg.saturating_sub(1);
        let mut out = Jet2::constant(0.0, d);
        for i in 0..=d {
            for j in 0..=(d - i) {
                out.c[idx2(d, i, j)] = self.coeff(i, j + 1) * (j + 1) as f64;
            }
        }
        out
    }
}

impl std::ops::Add for Jet2 {
    type Output = Jet2;
    fn add(mut self, rhs: Jet2) -> Jet2 {
        for (a, b) in self.c.iter_mut().zip(rhs.c.iter()) {
            *a += b;
        }
        self
    }
}

impl std::ops::Sub for Jet2 {
    type Output = Jet2;
    fn sub(mut self, rhs: Jet2) -> Jet2 {
        for (a, b) in self.c.iter_mut().zip(rhs.c.iter()) {
            *a -= b;
        }
        self
    }
}

impl std::ops::Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: Jet2) -> Jet2 {
        let d = self.deg;
        let mut out = Jet2::constant(0.0, d);
        for i1 in 0..=d {
            for j1 in 0..=(d - i1) {
                let a = self.c[idx2(d, i1, j1)];
                if a == 0.0 {
                    continue;
                }
                for i2 in 0..=(d - i1 - j1) {
                    for j2 in 0..=(d - i1 - j1 - i2) {
                        let b = rhs.c[idx2(d, i2, j2)];
                        if b != 0.0 {
                            out.c[idx2(d, i1 + i2, j1 + j2)] += a * b;
                        }
                    }
                }
            }
        }
        out
    }
}

impl std::ops::Neg for Jet2 {
    type Output = Jet2;
    fn neg(mut self) -> Jet2 {
        for v in &mut self.c {
            *v = -*v;
        }
        self
    }
}

impl Smooth for Jet2 {
    fn lift(&self, c: f64) -> Jet2 {
        Jet2::constant(c, self.deg)
    }
    fn value(&self) -> f64 {
        self.c[0]
    }
    fn scale(mut self, c: f64) -> Jet2 {
        for v in &mut self.c {
            *v *= c;
        }
        self
    }
    fn recip(self) -> Jet2 {
        let x0 = self.c[0];
        assert!(x0 != 0.0);
        let mut a = vec![0.0; self.deg + 1];
        let mut v = 1.0 / x0;
        for ak in a.iter_mut() {
            *ak = v;
            v = -v / x0;
        }
        self.apply_series(&a)
    }
    fn sqrt(self) -> Jet2 {
        self.powf(0.5)
    }
    fn exp(self) -> Jet2 {
        let e = self.c[0].exp();
        let a: Vec<f64> = (0..=self.deg).map(|k| e / factorial(k)).collect();
        self.apply_series(&a)
    }
    fn sin(self) -> Jet2 {
        let (s, c) = self.c[0].sin_cos();
        let a: Vec<f64> = (0..=self.deg)
            .map(|k| {
                let v = match k % 4 {
                    0 => s,
                    1 => c,
                    2 => -s,
                    _ => -c,
                };
                v / factorial(k)
            })
            .collect();
        self.apply_series(&a)
    }
    fn cos(self) -> Jet2 {
        let (s, c) = self.c[0].sin_cos();
        let a: Vec<f64> = (0..=self.deg)
            .map(|k| {
                let v = match k % 4 {
                    0 => c,
                    1 => -s,
                    2 => -c,
                    _ => s,
                };
                v / factorial(k)
            })
            .collect();
        self.apply_series(&a)
    }
    fn powi(self, p: i32) -> Jet2 {
        if p < 0 {
            return Smooth::recip(self).powi(-p);
        }
        let mut acc = Jet2::constant(1.0, self.deg);
        for _ in 0..p {
            acc = acc * self.clone();
        }
        acc
    }
}

/// arccos for a one-variable jet with |value| < 1, via integration of
/// -(1-x^2)^{-1/2}.
pub fn acos_jet(x: &Jet1) -> Jet1 {
    let n = x.order();
    assert!(x.c[0].abs() < 1.0);
    // Taylor of arccos around x0 from its derivative's jet.
    let id = Jet1::var(x.c[0], n.saturating_sub(1).max(1));
    let one = Jet1::constant(1.0, id.order());
    let da = -((one - id.clone() * id).powf(-0.5));
    let mut series = da.antiderivative(x.c[0].acos());
    series.c.truncate(n + 1);
    while series.c.len() < n + 1 {
        series.c.push(0.0);
    }
    x.apply_series(&series.c)
}

/// Stack-allocated two-variable jet of fixed total degree 2, for hot loops
/// (millions of chart-map evaluations) where [`Jet2`]'s heap coefficients
/// dominate the cost. Coefficients are Taylor coefficients in the order
/// [1, du, dv, du^2, du dv, dv^2].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedJet2 {
    pub c: [f64; 6],
}

impl FixedJet2 {
    pub fn constant(x: f64) -> FixedJet2 {
        FixedJet2 {
            c: [x, 0.0, 0.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn var_u(x: f64) -> FixedJet2 {
        FixedJet2 {
            c: [x, 1.0, 0.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn var_v(x: f64) -> FixedJet2 {
        FixedJet2 {
            c: [x, 0.0, 1.0, 0.0, 0.0, 0.0],
        }
    }

    /// Partial derivative d^{i+j} f / du^i dv^j at the base point.
    pub fn derivative(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (0, 0) => self.c[0],
            (1, 0) => self.c[1],
            (0, 1) => self.c[2],
            (2, 0) => 2.0 * self.c[3],
            (1, 1) => self.c[4],
            (0, 2) => 2.0 * self.c[5],
            _ => 0.0,
        }
    }

    /// d/du as a jet (exact through first order; higher terms zero).
    pub fn du(&self) -> FixedJet2 {
        FixedJet2 {
            c: [self.c[1], 2.0 * self.c[3], self.c[4], 0.0, 0.0, 0.0],
        }
    }

    /// d/dv as a jet (exact through first order; higher terms zero).
    pub fn dv(&self) -> FixedJet2 {
        FixedJet2 {
            c: [self.c[2], self.c[4], 2.0 * self.c[5], 0.0, 0.0, 0.0],
        }
    }

    /// Composition with a scalar function given by value and first two
    /// derivatives at the base point.
    fn compose(&self, f0: f64, f1: f64, f2: f64) -> FixedJet2 {
        let [_, g10, g01, g20, g11, g02] = self.c;
        FixedJet2 {
            c: [
                f0,
                f1 * g10,
                f1 * g01,
                f1 * g20 + 0.5 * f2 * g10 * g10,
                f1 * g11 + f2 * g10 * g01,
                f1 * g02 + 0.5 * f2 * g01 * g01,
            ],
        }
    }
}

impl std::ops::Add for FixedJet2 {
    type Output = FixedJet2;
    fn add(mut self, rhs: FixedJet2) -> FixedJet2 {
        for (a, b) in self.c.iter_mut().zip(rhs.c) {
            *a += b;
        }
        self
    }
}

impl std::ops::Sub for FixedJet2 {
    type Output = FixedJet2;
    fn sub(mut self, rhs: FixedJet2) -> FixedJet2 {
        for (a, b) in self.c.iter_mut().zip(rhs.c) {
            *a -= b;
        }
        self
    }
}

impl std::ops::Neg for FixedJet2 {
    type Output = FixedJet2;
    fn neg(mut self) -> FixedJet2 {
        for a in &mut self.c {
            *a = -*a;
        }
        self
    }
}

impl std::ops::Mul for FixedJet2 {
    type Output = FixedJet2;
    fn mul(self, rhs: FixedJet2) -> FixedJet2 {
        let a = &self.c;
        let b = &rhs.c;
        FixedJet2 {
            c: [
                a[0] * b[0],
                a[0] * b[1] + a[1] * b[0],
                a[0] * b[2] + a[2] * b[0],
                a[0] * b[3] + a[1] * b[1] + a[3] * b[0],
                a[0] * b[4] + a[1] * b[2] + a[2] * b[1] + a[4] * b[0],
                a[0] * b[5] + a[2] * b[2] + a[5] * b[0],
            ],
        }
    }
}

impl Smooth for FixedJet2 {
    fn lift(&self, c: f64) -> FixedJet2 {
        FixedJet2::constant(c)
    }
    fn value(&self) -> f64 {
        self.c[0]
    }
    fn scale(mut self, c: f64) -> FixedJet2 {
        for a in &mut self.c {
            *a *= c;
        }
        self
    }
    fn recip(self) -> FixedJet2 {
        let x = self.c[0];
        assert!(x != 0.0);
        let inv = 1.0 / x;
        self.compose(inv, -inv * inv, 2.0 * inv * inv * inv)
    }
    fn sqrt(self) -> FixedJet2 {
        let x = self.c[0];
        assert!(x > 0.0);
        let r = x.sqrt();
        self.compose(r, 0.5 / r, -0.25 / (r * x))
    }
    fn exp(self) -> FixedJet2 {
        let e = self.c[0].exp();
        self.compose(e, e, e)
    }
    fn sin(self) -> FixedJet2 {
        let (s, c) = self.c[0].sin_cos();
        self.compose(s, c, -s)
    }
    fn cos(self) -> FixedJet2 {
        let (s, c) = self.c[0].sin_cos();
        self.compose(c, -s, -c)
    }
    fn powi(self, n: i32) -> FixedJet2 {
        let x = self.c[0];
        let f0 = x.powi(n);
        let f1 = n as f64 * x.powi(n - 1);
        let f2 = (n as f64) * (n as f64 - 1.0) * x.powi(n - 2);
        self.compose(f0, f1, f2)
    }
}
