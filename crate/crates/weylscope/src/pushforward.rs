//! Coarea pushforward profiles.
//!
//! Given a scalar field sigma and a density F on a 1D or 2D parameter
//! domain, this module computes the pushforward density
//! h(t) = \int_{sigma = t} F / |grad sigma|, samples it on a t-grid with
//! geometric refinement toward t = 0, fits a local polynomial model of h
//! near 0, and pairs homogeneous distributions against h.
//!
//! The pairing splits each power term x_side^s at a scale c inside the
//! local-model window: on [0, c] the profile is replaced by its fitted
//! Taylor polynomial (analytic finite-part corrections), on [c, 2c] a
//! smooth blend beta interpolates to the far regime, and the far part
//! \int x^s (1 - beta(|x|)) h(x) dx is evaluated *in the parameter domain*
//! as \int F(u) g(sigma(u)) du with a smooth integrand g — this sidesteps
//! both contour-extraction error and endpoint singularities of h.

use std::rc::Rc;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::homdist::{HomDistError, HomDistribution, Side, DEFAULT_PAIR_TOL};
use crate::quad::{self, NeumaierSum};
use crate::specfun::neg_one_pow;

type Result<T> = std::result::Result<T, PushforwardError>;

#[derive(Debug, Error)]
pub enum PushforwardError {
    #[error("degenerate field: {0}")]
    DegenerateField(String),
    #[error("gradient oracle disagrees with finite differences at {at:?} (rel {rel:.2e})")]
    GradientInconsistent { at: (f64, f64), rel: f64 },
    #[error("regular-value margin {margin:.3e} below threshold {threshold:.3e}")]
    MarginTooSmall { margin: f64, threshold: f64 },
    #[error("profile domain [{t_min:.3e}, {t_max:.3e}] excludes the singular point 0")]
    SingularityExcluded { t_min: f64, t_max: f64 },
    #[error("pairing needs {needed} derivatives at 0, local model provides {available}")]
    SmoothnessDeficit { needed: usize, available: usize },
    #[error(transparent)]
    Distribution(#[from] HomDistError),
}

// ---------------------------------------------------------------------------
// Thread pool helpers
// ---------------------------------------------------------------------------

/// Worker count: WEYLSCOPE_THREADS if set, else available parallelism
/// capped at 8.
pub fn thread_count() -> usize {
    std::env::var("WEYLSCOPE_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
                .min(8)
        })
}

/// Deterministic parallel map over 0..n: contiguous chunks per worker,
/// results concatenated in index order.
fn par_map<T: Send, F: Fn(usize) -> T + Sync>(n: usize, f: F) -> Vec<T> {
    let workers = thread_count().min(n.max(1));
    if workers <= 1 {
        return (0..n).map(f).collect();
    }
    let chunk = n.div_ceil(workers);
    let f = &f;
    let mut out = Vec::with_capacity(n);
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let lo = w * chunk;
                let hi = ((w + 1) * chunk).min(n);
                s.spawn(move || (lo..hi).map(f).collect::<Vec<T>>())
            })
            .collect();
        for h in handles {
            out.extend(h.join().expect("worker panicked"));
        }
    });
    out
}

// ---------------------------------------------------------------------------
// Domains, fields, densities
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub enum Domain1 {
    Interval { a: f64, b: f64 },
    /// Angle parameter on [0, 2 pi), periodic.
    Circle,
}

impl Domain1 {
    fn range(&self) -> (f64, f64, bool) {
        match *self {
            Domain1::Interval { a, b } => (a, b, false),
            Domain1::Circle => (0.0, std::f64::consts::TAU, true),
        }
    }
}

/// Scalar field on a 1D domain with an exact derivative oracle.
#[derive(Clone)]
pub struct Field1 {
    pub domain: Domain1,
    pub sigma: Rc<dyn Fn(f64) -> f64>,
    pub dsigma: Rc<dyn Fn(f64) -> f64>,
}

/// Complex density on a 1D domain (with respect to the parameter measure).
#[derive(Clone)]
pub struct Density1 {
    pub value: Rc<dyn Fn(f64) -> Complex64>,
}

/// One rectangular chart of a 2D domain. Partition-of-unity weights for
/// atlases (e.g. two sphere caps) are folded into the density by the caller.
#[derive(Debug, Clone, Copy)]
pub struct Chart2 {
    pub u: (f64, f64),
    pub v: (f64, f64),
    pub periodic_u: bool,
    pub periodic_v: bool,
}

type Field2Fn = Arc<dyn Fn(usize, f64, f64) -> f64 + Send + Sync>;
type Grad2Fn = Arc<dyn Fn(usize, f64, f64) -> (f64, f64) + Send + Sync>;
type Dens2Fn = Arc<dyn Fn(usize, f64, f64) -> Complex64 + Send + Sync>;

/// Scalar field on a 2D atlas; oracles take (chart index, u, v).
#[derive(Clone)]
pub struct Field2 {
    pub charts: Vec<Chart2>,
    pub sigma: Field2Fn,
    pub grad: Grad2Fn,
}

/// Complex density on a 2D atlas, with respect to du dv (chart weights and
/// geometric area factors included by the caller).
#[derive(Clone)]
pub struct Density2 {
    pub value: Dens2Fn,
}

/// Resolution knobs for profile construction.
#[derive(Debug, Clone, Copy)]
pub struct GridConfig {
    /// 1D: sample count along the domain. 2D: cells per chart side.
    pub cells: usize,
    /// Base uniform t-grid size (clusters near 0 and the endpoints are added).
    pub t_samples: usize,
    /// Local-model window as a fraction of the sampled sigma range.
    pub window_frac: f64,
    /// Exclusion radius |t| < blend_frac * window when fitting the model.
    pub blend_frac: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            cells: 512,
            t_samples: 256,
            window_frac: 0.1,
            blend_frac: 0.1,
        }
    }
}

// ---------------------------------------------------------------------------
// Local polynomial model of h near t = 0
// ---------------------------------------------------------------------------

/// Degree <= 4 least-squares polynomial model of h on |t| <= window.
#[derive(Debug, Clone)]
pub struct LocalModel {
    /// Coefficients of t^k, k = 0..=4.
    pub coeffs: [Complex64; 5],
    pub degree: usize,
    pub window: f64,
    /// Uncertainty of each t^k coefficient (window-halving disagreement).
    pub coeff_unc: [f64; 5],
}

impl LocalModel {
    fn zero(window: f64) -> Self {
        LocalModel {
            coeffs: [Complex64::new(0.0, 0.0); 5],
            degree: 4,
            window,
            coeff_unc: [0.0; 5],
        }
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * t + c;
        }
        acc
    }

    /// j-th derivative of the model at t = 0.
    pub fn deriv0(&self, j: usize) -> Complex64 {
        if j > 4 {
            return Complex64::new(0.0, 0.0);
        }
        let fact: f64 = (1..=j).map(|i| i as f64).product();
        self.coeffs[j] * fact
    }

    fn deriv0_unc(&self, j: usize) -> f64 {
        if j > 4 {
            return 0.0;
        }
        let fact: f64 = (1..=j).map(|i| i as f64).product();
        self.coeff_unc[j] * fact
    }
}

/// Weighted least-squares fit of degree <= 4 on scaled abscissae t/w.
fn fit_poly(ts: &[f64], hs: &[Complex64], w: f64, degree: usize) -> [Complex64; 5] {
    let deg = degree.min(4);
    let n = deg + 1;
    let mut ata = [[0.0f64; 5]; 5];
    let mut atb = [Complex64::new(0.0, 0.0); 5];
    for (&t, &h) in ts.iter().zip(hs) {
        let x = t / w;
        let mut pows = [1.0f64; 5];
        for k in 1..n {
            pows[k] = pows[k - 1] * x;
        }
        for i in 0..n {
            for j in 0..n {
                ata[i][j] += pows[i] * pows[j];
            }
            atb[i] += pows[i] * h;
        }
    }
    // Gaussian elimination with partial pivoting on the (n x n) system.
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&a, &b| ata[a][col].abs().total_cmp(&ata[b][col].abs()))
            .expect("nonempty");
        if ata[piv][col].abs() < 1e-300 {
            continue;
        }
        ata.swap(col, piv);
        atb.swap(col, piv);
        for row in col + 1..n {
            let f = ata[row][col] / ata[col][col];
            for k in col..n {
                ata[row][k] -= f * ata[col][k];
            }
            atb[row] -= f * atb[col];
        }
    }
    let mut sol = [Complex64::new(0.0, 0.0); 5];
    for col in (0..n).rev() {
        if ata[col][col].abs() < 1e-300 {
            continue;
        }
        let mut acc = atb[col];
        for k in col + 1..n {
            acc -= ata[col][k] * sol[k];
        }
        sol[col] = acc / ata[col][col];
    }
    // Unscale: coefficient of t^k is sol[k] / w^k.
    let mut out = [Complex64::new(0.0, 0.0); 5];
    let mut wp = 1.0;
    for k in 0..n {
        out[k] = sol[k] / wp;
        wp *= w;
    }
    out
}

/// Fit the local model from (t, h) samples with t_blend <= |t| <= window,
/// estimating coefficient uncertainty by refitting on the half window.
fn build_local_model(
    ts: &[f64],
    hs: &[Complex64],
    window: f64,
    t_blend: f64,
) -> LocalModel {
    let select = |w: f64| -> (Vec<f64>, Vec<Complex64>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (&t, &h) in ts.iter().zip(hs) {
            if t.abs() >= t_blend && t.abs() <= w {
                xs.push(t);
                ys.push(h);
            }
        }
        (xs, ys)
    };
    let (xs, ys) = select(window);
    if xs.len() < 2 {
        return LocalModel::zero(window);
    }
    let degree = 4.min(xs.len() - 1);
    let coeffs = fit_poly(&xs, &ys, window, degree);
    let (xs2, ys2) = select(0.5 * window);
    let mut coeff_unc = [0.0f64; 5];
    if xs2.len() >= 2 {
        let deg2 = degree.min(xs2.len() - 1);
        let alt = fit_poly(&xs2, &ys2, 0.5 * window, deg2);
        for k in 0..5 {
            coeff_unc[k] = (coeffs[k] - alt[k]).norm();
        }
    }
    LocalModel {
        coeffs,
        degree,
        window,
        coeff_unc,
    }
}

// ---------------------------------------------------------------------------
// Cubic spline interpolation of the sampled profile (2D pipeline)
// ---------------------------------------------------------------------------

struct Spline {
    xs: Vec<f64>,
    ys: Vec<Complex64>,
    /// Second derivatives at the knots (natural boundary conditions).
    m: Vec<Complex64>,
}

impl Spline {
    fn new(xs: Vec<f64>, ys: Vec<Complex64>) -> Spline {
        let n = xs.len();
        let zero = Complex64::new(0.0, 0.0);
        let mut m = vec![zero; n];
        if n >= 3 {
            // Thomas algorithm for the natural-spline tridiagonal system.
            let mut sub = vec![0.0; n];
            let mut diag = vec![1.0; n];
            let mut sup = vec![0.0; n];
            let mut rhs = vec![zero; n];
            for i in 1..n - 1 {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                sub[i] = h0;
                diag[i] = 2.0 * (h0 + h1);
                sup[i] = h1;
                rhs[i] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            }
            for i in 1..n {
                let f = sub[i] / diag[i - 1];
                diag[i] -= f * sup[i - 1];
                rhs[i] = rhs[i] - f * rhs[i - 1];
            }
            m[n - 1] = rhs[n - 1] / diag[n - 1];
            for i in (0..n - 1).rev() {
                m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];
            }
        }
        Spline { xs, ys, m }
    }

    fn eval(&self, x: f64) -> Complex64 {
        let n = self.xs.len();
        if n == 0 {
            return Complex64::new(0.0, 0.0);
        }
        // Clamp to the nearest knot outside the sampled range (the grid is
        // clustered toward the endpoints, so the gap is tiny).
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = match self.xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * (h * h) / 6.0
    }
}

// ---------------------------------------------------------------------------
// Profile type
// ---------------------------------------------------------------------------

type EvalFn = Rc<dyn Fn(f64) -> Complex64>;
/// Maps a smooth weight g to (\int_domain F(u) g(sigma(u)) du, error estimate).
type FarFn = Rc<dyn Fn(&dyn Fn(f64) -> Complex64) -> (Complex64, f64)>;

pub struct PushforwardProfile {
    /// Sample grid (sorted) and profile values, for export and interpolation.
    pub ts: Vec<f64>,
    pub hs: Vec<Complex64>,
    pub t_min: f64,
    pub t_max: f64,
    pub model: LocalModel,
    /// Regular-value margin: min |grad sigma| on the zero level set
    /// (infinite when sigma never vanishes).
    pub margin: f64,
    /// Scale of |grad sigma| over the domain, for margin thresholds.
    pub field_scale: f64,
    /// Total mass \int F, computed in the parameter domain.
    pub mass: Complex64,
    /// Relative defect |<1, h> - mass| / max(|mass|, eps).
    pub mass_defect: f64,
    /// Resolution length scale (for error heuristics and reports).
    pub grid_delta: f64,
    eval: EvalFn,
    far: FarFn,
}

impl PushforwardProfile {
    /// Profile value h(t) (exact re-evaluation in 1D, spline in 2D).
    pub fn h_at(&self, t: f64) -> Complex64 {
        (self.eval)(t)
    }

    /// CSV export: `t,re_h,im_h` per sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,re_h,im_h\n");
        for (&t, &h) in self.ts.iter().zip(&self.hs) {
            out.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", t, h.re, h.im));
        }
        out
    }
}

/// Quintic smoothstep blend: 1 for x <= c, 0 for x >= 2c, C^2 in between.
fn blend(x: f64, c: f64) -> f64 {
    if x <= c {
        1.0
    } else if x >= 2.0 * c {
        0.0
    } else {
        let s = (x - c) / c;
        1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }
}

/// t-grid: uniform base plus geometric clusters toward 0 (within the model
/// window) and toward both endpoints.
fn build_t_grid(t_lo: f64, t_hi: f64, n_base: usize, window: f64, t_blend: f64) -> Vec<f64> {
    let range = t_hi - t_lo;
    let eps = 1e-9 * range;
    let mut pts = Vec::new();
    let n = n_base.max(8);
    for i in 0..n {
        pts.push(t_lo + eps + (range - 2.0 * eps) * (i as f64 + 0.5) / n as f64);
    }
    for side in [1.0f64, -1.0] {
        // Dense window coverage for the local-model fit, then geometric
        // refinement below the blend radius.
        for j in 0..24 {
            let t = side * (t_blend + (window - t_blend) * (j as f64 + 0.5) / 24.0);
            if t > t_lo + eps && t < t_hi - eps {
                pts.push(t);
            }
        }
        for j in 1..=16 {
            let t = side * t_blend * 0.5f64.powi(j);
            if t > t_lo + eps && t < t_hi - eps {
                pts.push(t);
            }
        }
    }
    for j in 1..=10 {
        let d = range * 0.05 * 0.5f64.powi(j);
        pts.push(t_lo + d);
        pts.push(t_hi - d);
    }
    pts.retain(|t| t.is_finite() && *t > t_lo && *t < t_hi);
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * range);
    pts
}

// ---------------------------------------------------------------------------
// 1D pipeline: exact level-set evaluation by root bracketing
// ---------------------------------------------------------------------------

struct Sampler1 {
    xs: Vec<f64>,
    ss: Vec<f64>,
    sigma: Rc<dyn Fn(f64) -> f64>,
    dsigma: Rc<dyn Fn(f64) -> f64>,
    dens: Rc<dyn Fn(f64) -> Complex64>,
}

impl Sampler1 {
    /// All roots of sigma = t, bracketed on the sample grid and refined by
    /// bisection (a root at a sample counts once: zero treated as positive).
    fn roots(&self, t: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..self.xs.len() - 1 {
            let f0 = self.ss[i] - t;
            let f1 = self.ss[i + 1] - t;
            if (f0 < 0.0) == (f1 < 0.0) {
                continue;
            }
            let (mut lo, mut hi) = (self.xs[i], self.xs[i + 1]);
            let mut flo = f0;
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let fm = (self.sigma)(mid) - t;
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-15 * (1.0 + lo.abs()) {
                    break;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        out
    }

    fn h(&self, t: f64, floor: f64) -> Complex64 {
        let mut acc = NeumaierSum::default();
        for r in self.roots(t) {
            let dp = (self.dsigma)(r).abs().max(floor);
            acc.add((self.dens)(r) / dp);
        }
        acc.value()
    }
}

/// Pushforward profile over a 1D domain: h(t) is evaluated exactly per
/// query by root bracketing, so the local model and pairings see no
/// interpolation error.
pub fn coarea_profile_1d(
    field: &Field1,
    dens: &Density1,
    grid: &GridConfig,
) -> Result<PushforwardProfile> {
    let (a, b, periodic) = field.domain.range();
    let n = grid.cells.max(16);
    // Spot-check the derivative oracle against finite differences.
    for &frac in &[0.21, 0.63] {
        let x = a + frac * (b - a);
        let h = 1e-6 * (b - a);
        let fd = ((field.sigma)(x + h) - (field.sigma)(x - h)) / (2.0 * h);
        let an = (field.dsigma)(x);
        let scale = an.abs().max(fd.abs()).max(1e-12);
        if (fd - an).abs() > 1e-4 * scale {
            return Err(PushforwardError::GradientInconsistent {
                at: (x, 0.0),
                rel: (fd - an).abs() / scale,
            });
        }
    }
    let m = if periodic { n } else { n - 1 };
    let xs: Vec<f64> = (0..=m).map(|i| a + (b - a) * i as f64 / m as f64).collect();
    let ss: Vec<f64> = xs.iter().map(|&x| (field.sigma)(x)).collect();
    let (t_lo, t_hi) = min_max(&ss);
    let range = t_hi - t_lo;
    if !(range > 1e-12 * (t_lo.abs() + t_hi.abs() + 1.0)) {
        return Err(PushforwardError::DegenerateField(
            "sigma is numerically constant".into(),
        ));
    }
    let field_scale = xs
        .iter()
        .map(|&x| (field.dsigma)(x).abs())
        .fold(0.0f64, f64::max);
    let sampler = Rc::new(Sampler1 {
        xs,
        ss,
        sigma: field.sigma.clone(),
        dsigma: field.dsigma.clone(),
        dens: dens.value.clone(),
    });
    let floor = 1e-14 * field_scale.max(1e-300);
    let margin = if t_lo < 0.0 && t_hi > 0.0 {
        sampler
            .roots(0.0)
            .iter()
            .map(|&r| (field.dsigma)(r).abs())
            .fold(f64::INFINITY, f64::min)
    } else {
        f64::INFINITY
    };

    let window = grid.window_frac * range;
    let t_blend = grid.blend_frac * window;
    let ts = build_t_grid(t_lo, t_hi, grid.t_samples, window, t_blend);
    let s2 = sampler.clone();
    let hs: Vec<Complex64> = ts.iter().map(|&t| s2.h(t, floor)).collect();

    // Exact evaluator: dense Chebyshev-style window samples for the fit.
    let mut fit_ts = Vec::new();
    for side in [1.0f64, -1.0] {
        for j in 0..48 {
            let t = side * (t_blend + (window - t_blend) * (j as f64 + 0.5) / 48.0);
            if t > t_lo && t < t_hi {
                fit_ts.push(t);
            }
        }
    }
    let fit_hs: Vec<Complex64> = fit_ts.iter().map(|&t| s2.h(t, floor)).collect();
    let model = build_local_model(&fit_ts, &fit_hs, window, t_blend);

    let s3 = sampler.clone();
    let eval: EvalFn = Rc::new(move |t: f64| {
        if t < t_lo || t > t_hi {
            Complex64::new(0.0, 0.0)
        } else {
            s3.h(t, floor)
        }
    });

    let sig = field.sigma.clone();
    let fval = dens.value.clone();
    let far: FarFn = Rc::new(move |g: &dyn Fn(f64) -> Complex64| {
        let r = quad::integrate(|x| fval(x) * g(sig(x)), a, b, 1e-12);
        (r.value, r.error)
    });
    let (mass, _) = far(&|_| Complex64::new(1.0, 0.0));

    let ev = eval.clone();
    let total = quad::integrate(|t| ev(t), t_lo, t_hi, 1e-10).value;
    let mass_defect = (total - mass).norm() / mass.norm().max(1e-300);

    Ok(PushforwardProfile {
        ts,
        hs,
        t_min: t_lo,
        t_max: t_hi,
        model,
        margin,
        field_scale,
        mass,
        mass_defect,
        grid_delta: (b - a) / n as f64,
        eval,
        far,
    })
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    })
}

// ---------------------------------------------------------------------------
// 2D pipeline: marching squares with block min/max acceleration
// ---------------------------------------------------------------------------

struct ChartGrid {
    chart: Chart2,
    n: usize,
    du: f64,
    dv: f64,
    /// sigma at grid corners, (n+1) x (n+1), row-major in j (v index).
    sig: Vec<f64>,
    /// F at grid corners.
    dens: Vec<Complex64>,
    /// Per-block (B x B cells) min/max of the corner values.
    block_min: Vec<f64>,
    block_max: Vec<f64>,
    nb: usize,
}

const BLOCK: usize = 32;

impl ChartGrid {
    fn build(idx: usize, chart: Chart2, n: usize, sigma: &Field2Fn, dens: &Dens2Fn) -> ChartGrid {
        let du = (chart.u.1 - chart.u.0) / n as f64;
        let dv = (chart.v.1 - chart.v.0) / n as f64;
        let rows = par_map(n + 1, |j| {
            let v = chart.v.0 + dv * j as f64;
            let mut s_row = Vec::with_capacity(n + 1);
            let mut f_row = Vec::with_capacity(n + 1);
            for i in 0..=n {
                let u = chart.u.0 + du * i as f64;
                s_row.push(sigma(idx, u, v));
                f_row.push(dens(idx, u, v));
            }
            (s_row, f_row)
        });
        let mut sig = Vec::with_capacity((n + 1) * (n + 1));
        let mut den = Vec::with_capacity((n + 1) * (n + 1));
        for (s_row, f_row) in rows {
            sig.extend(s_row);
            den.extend(f_row);
        }
        let nb = n.div_ceil(BLOCK);
        let mut block_min = vec![f64::INFINITY; nb * nb];
        let mut block_max = vec![f64::NEG_INFINITY; nb * nb];
        for j in 0..=n {
            for i in 0..=n {
                let s = sig[j * (n + 1) + i];
                // A corner belongs to every block whose cell range touches it.
                let bi0 = i.saturating_sub(1) / BLOCK;
                let bi1 = (i / BLOCK).min(nb - 1);
                let bj0 = j.saturating_sub(1) / BLOCK;
                let bj1 = (j / BLOCK).min(nb - 1);
                for bj in bj0..=bj1 {
                    for bi in bi0..=bi1 {
                        let k = bj * nb + bi;
                        block_min[k] = block_min[k].min(s);
                        block_max[k] = block_max[k].max(s);
                    }
                }
            }
        }
        ChartGrid {
            chart,
            n,
            du,
            dv,
            sig,
            dens: den,
            block_min,
            block_max,
            nb,
        }
    }

    fn corner(&self, i: usize, j: usize) -> f64 {
        self.sig[j * (self.n + 1) + i]
    }

    /// Marching-squares sweep at level t. Each extracted segment invokes
    /// `emit(midpoint_u, midpoint_v, length)`.
    fn contour<E: FnMut(f64, f64, f64)>(
        &self,
        idx: usize,
        t: f64,
        sigma: &Field2Fn,
        emit: &mut E,
    ) {
        for bj in 0..self.nb {
            for bi in 0..self.nb {
                let k = bj * self.nb + bi;
                if t < self.block_min[k] || t > self.block_max[k] {
                    continue;
                }
                let i1 = ((bi + 1) * BLOCK).min(self.n);
                let j1 = ((bj + 1) * BLOCK).min(self.n);
                for j in bj * BLOCK..j1 {
                    for i in bi * BLOCK..i1 {
                        self.cell(idx, i, j, t, sigma, emit);
                    }
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn cell<E: FnMut(f64, f64, f64)>(
        &self,
        idx: usize,
        i: usize,
        j: usize,
        t: f64,
        sigma: &Field2Fn,
        emit: &mut E,
    ) {
        let nudge = 1e-14 * (1.0 + t.abs());
        let adj = |f: f64| if f == 0.0 { nudge } else { f };
        let f00 = adj(self.corner(i, j) - t);
        let f10 = adj(self.corner(i + 1, j) - t);
        let f01 = adj(self.corner(i, j + 1) - t);
        let f11 = adj(self.corner(i + 1, j + 1) - t);
        let mask = (f00 < 0.0) as u8
            | (((f10 < 0.0) as u8) << 1)
            | (((f11 < 0.0) as u8) << 2)
            | (((f01 < 0.0) as u8) << 3);
        if mask == 0 || mask == 15 {
            return;
        }
        let u0 = self.chart.u.0 + self.du * i as f64;
        let v0 = self.chart.v.0 + self.dv * j as f64;
        // Edge crossings by linear interpolation; (u, v) in parameter units.
        let bottom = || (u0 + self.du * f00 / (f00 - f10), v0);
        let right = || (u0 + self.du, v0 + self.dv * f10 / (f10 - f11));
        let top = || (u0 + self.du * f01 / (f01 - f11), v0 + self.dv);
        let left = || (u0, v0 + self.dv * f00 / (f00 - f01));
        let mut seg = |p: (f64, f64), q: (f64, f64)| {
            let len = ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt();
            if len > 0.0 {
                emit(0.5 * (p.0 + q.0), 0.5 * (p.1 + q.1), len);
            }
        };
        match mask {
            1 | 14 => seg(bottom(), left()),
            2 | 13 => seg(bottom(), right()),
            4 | 11 => seg(right(), top()),
            8 | 7 => seg(top(), left()),
            3 | 12 => seg(left(), right()),
            6 | 9 => seg(bottom(), top()),
            5 | 10 => {
                // Saddle: connect according to the cell-center sample.
                let center_in = sigma(idx, u0 + 0.5 * self.du, v0 + 0.5 * self.dv) - t < 0.0;
                let corner00_in = mask == 5;
                if center_in == corner00_in {
                    // Inside region connects diagonally through the center.
                    seg(bottom(), right());
                    seg(top(), left());
                } else {
                    seg(bottom(), left());
                    seg(right(), top());
                }
            }
            _ => unreachable!(),
        }
    }

    /// Trapezoid sum of F(u) g(sigma(u)) over this chart, at corner stride
    /// `step` (1 = full resolution, 2 = halved, for Richardson estimates).
    fn weighted_sum(&self, g: &dyn Fn(f64) -> Complex64, step: usize) -> Complex64 {
        let n = self.n;
        let cell = self.du * self.dv * (step * step) as f64;
        let mut acc = NeumaierSum::default();
        let mut j = 0;
        while j <= n {
            let wj = trap_weight(j, n, step, self.chart.periodic_v);
            if wj > 0.0 {
                let mut i = 0;
                while i <= n {
                    let wi = trap_weight(i, n, step, self.chart.periodic_u);
                    if wi > 0.0 {
                        let s = self.sig[j * (n + 1) + i];
                        let gv = g(s);
                        if gv.re != 0.0 || gv.im != 0.0 {
                            acc.add(self.dens[j * (n + 1) + i] * gv * (wi * wj * cell));
                        }
                    }
                    i += step;
                }
            }
            j += step;
        }
        acc.value()
    }
}

fn trap_weight(i: usize, n: usize, step: usize, periodic: bool) -> f64 {
    if periodic {
        // Periodic trapezoid = rectangle rule; skip the duplicated endpoint.
        if i == n {
            0.0
        } else {
            1.0
        }
    } else if i == 0 || i + step > n {
        0.5
    } else {
        1.0
    }
}

/// Pushforward profile over a 2D atlas: marching-squares contours per
/// t-level (parallel over levels) plus trapezoid domain sums for masses
/// and far-field weights.
pub fn coarea_profile_2d(
    field: &Field2,
    dens: &Density2,
    grid: &GridConfig,
) -> Result<PushforwardProfile> {
    if field.charts.is_empty() {
        return Err(PushforwardError::DegenerateField("no charts".into()));
    }
    // Even cell count so the half-resolution Richardson sweep hits the
    // boundary corners.
    let n = grid.cells.max(16).next_multiple_of(2);
    // Gradient oracle spot check per chart.
    for (idx, ch) in field.charts.iter().enumerate() {
        for &(fu, fv) in &[(0.27, 0.58), (0.71, 0.33)] {
            let u = ch.u.0 + fu * (ch.u.1 - ch.u.0);
            let v = ch.v.0 + fv * (ch.v.1 - ch.v.0);
            let hu = 1e-6 * (ch.u.1 - ch.u.0);
            let hv = 1e-6 * (ch.v.1 - ch.v.0);
            let fd = (
                ((field.sigma)(idx, u + hu, v) - (field.sigma)(idx, u - hu, v)) / (2.0 * hu),
                ((field.sigma)(idx, u, v + hv) - (field.sigma)(idx, u, v - hv)) / (2.0 * hv),
            );
            let an = (field.grad)(idx, u, v);
            let scale = (an.0.powi(2) + an.1.powi(2))
                .sqrt()
                .max((fd.0.powi(2) + fd.1.powi(2)).sqrt())
                .max(1e-12);
            let diff = ((fd.0 - an.0).powi(2) + (fd.1 - an.1).powi(2)).sqrt();
            if diff > 1e-4 * scale {
                return Err(PushforwardError::GradientInconsistent {
                    at: (u, v),
                    rel: diff / scale,
                });
            }
        }
    }

    let grids: Vec<ChartGrid> = field
        .charts
        .iter()
        .enumerate()
        .map(|(idx, &ch)| ChartGrid::build(idx, ch, n, &field.sigma, &dens.value))
        .collect();
    let grid_delta = grids
        .iter()
        .map(|g| g.du.max(g.dv))
        .fold(0.0f64, f64::max);

    let (mut t_lo, mut t_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for g in &grids {
        let (lo, hi) = min_max(&g.sig);
        t_lo = t_lo.min(lo);
        t_hi = t_hi.max(hi);
    }
    let range = t_hi - t_lo;
    if !(range > 1e-12 * (t_lo.abs() + t_hi.abs() + 1.0)) {
        return Err(PushforwardError::DegenerateField(
            "sigma is numerically constant".into(),
        ));
    }

    // Field scale from a coarse |grad| sweep.
    let mut field_scale = 0.0f64;
    for (idx, ch) in field.charts.iter().enumerate() {
        for j in 0..=32 {
            for i in 0..=32 {
                let u = ch.u.0 + (ch.u.1 - ch.u.0) * i as f64 / 32.0;
                let v = ch.v.0 + (ch.v.1 - ch.v.0) * j as f64 / 32.0;
                let (gu, gv) = (field.grad)(idx, u, v);
                field_scale = field_scale.max((gu * gu + gv * gv).sqrt());
            }
        }
    }
    let floor = 1e-14 * field_scale.max(1e-300);

    let window = grid.window_frac * range;
    let t_blend = grid.blend_frac * window;
    let ts = build_t_grid(t_lo, t_hi, grid.t_samples, window, t_blend);

    let sigma = field.sigma.clone();
    let gradf = field.grad.clone();
    let densf = dens.value.clone();
    let level_value = {
        let grids = &grids;
        let sigma = &sigma;
        let gradf = &gradf;
        let densf = &densf;
        move |t: f64| -> Complex64 {
            let mut acc = NeumaierSum::default();
            for (idx, g) in grids.iter().enumerate() {
                g.contour(idx, t, sigma, &mut |u, v, len| {
                    let (gu, gv) = gradf(idx, u, v);
                    let gn = (gu * gu + gv * gv).sqrt().max(floor);
                    acc.add(densf(idx, u, v) * (len / gn));
                });
            }
            acc.value()
        }
    };
    let hs: Vec<Complex64> = par_map(ts.len(), |k| level_value(ts[k]));

    // Regular-value margin on the zero level set.
    let margin = if t_lo < 0.0 && t_hi > 0.0 {
        let mut m = f64::INFINITY;
        for (idx, g) in grids.iter().enumerate() {
            g.contour(idx, 0.0, &sigma, &mut |u, v, _| {
                let (gu, gv) = gradf(idx, u, v);
                m = m.min((gu * gu + gv * gv).sqrt());
            });
        }
        m
    } else {
        f64::INFINITY
    };

    let model = build_local_model(&ts, &hs, window, t_blend);

    let spline = Rc::new(Spline::new(ts.clone(), hs.clone()));
    let sp = spline.clone();
    let eval: EvalFn = Rc::new(move |t: f64| {
        if t < t_lo || t > t_hi {
            Complex64::new(0.0, 0.0)
        } else {
            sp.eval(t)
        }
    });

    let grids = Rc::new(grids);
    let g2 = grids.clone();
    let far: FarFn = Rc::new(move |g: &dyn Fn(f64) -> Complex64| {
        let mut full = NeumaierSum::default();
        let mut half = NeumaierSum::default();
        for cg in g2.iter() {
            full.add(cg.weighted_sum(g, 1));
            half.add(cg.weighted_sum(g, 2));
        }
        let v = full.value();
        // Richardson: trapezoid error shrinks 4x per halving.
        let err = (v - half.value()).norm() / 3.0;
        (v, err)
    });
    let (mass, _) = far(&|_| Complex64::new(1.0, 0.0));

    let ev = eval.clone();
    let total = quad::integrate(|t| ev(t), t_lo, t_hi, 1e-10).value;
    let mass_defect = (total - mass).norm() / mass.norm().max(1e-300);

    Ok(PushforwardProfile {
        ts,
        hs,
        t_min: t_lo,
        t_max: t_hi,
        model,
        margin,
        field_scale,
        mass,
        mass_defect,
        grid_delta,
        eval,
        far,
    })
}

// ---------------------------------------------------------------------------
// Pairing distributions against profiles
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct ProfilePairing {
    pub value: Complex64,
    pub error_est: f64,
}

/// Regularized pairing < d, h > with the default tolerance.
pub fn pair_profile(d: &HomDistribution, h: &PushforwardProfile) -> Result<ProfilePairing> {
    pair_profile_tol(d, h, DEFAULT_PAIR_TOL)
}

/// Regularized pairing < d, h >.
///
/// Delta terms are read off the local model. Each power term x_side^s is
/// split at c inside the model window: [0, c] analytically from the model
/// (finite-part corrections), [c, 2c] as a blended band integral of the
/// sampled profile, and the rest as a smooth weighted integral back in the
/// parameter domain.
pub fn pair_profile_tol(
    d: &HomDistribution,
    h: &PushforwardProfile,
    tol: f64,
) -> Result<ProfilePairing> {
    let mut dc = d.clone();
    dc.canonicalize();
    dc.validate()?;

    let singular_at_zero = !dc.delta_terms.is_empty()
        || dc.power_terms.iter().any(|t| t.exponent.to_f64() < 0.0);
    let zero_interior = h.t_min < 0.0 && h.t_max > 0.0;
    if singular_at_zero && zero_interior {
        // Below a few grid cells the sampled margin cannot certify a regular
        // value, so the threshold never drops under the resolution scale.
        let threshold = h.field_scale * (4.0 * h.grid_delta).max(1e-6);
        if h.margin < threshold {
            return Err(PushforwardError::MarginTooSmall {
                margin: h.margin,
                threshold,
            });
        }
    }

    let mut sum = NeumaierSum::default();
    let mut err = 0.0f64;

    for t in &dc.delta_terms {
        if !zero_interior {
            return Err(PushforwardError::SingularityExcluded {
                t_min: h.t_min,
                t_max: h.t_max,
            });
        }
        let order = t.order as usize;
        if order > h.model.degree {
            return Err(PushforwardError::SmoothnessDeficit {
                needed: order,
                available: h.model.degree,
            });
        }
        sum.add(t.coeff * neg_one_pow(t.order as i64) * h.model.deriv0(order));
        err += t.coeff.norm() * h.model.deriv0_unc(order);
    }

    // Power terms: collect the smooth far weights into one domain sweep.
    struct Piece {
        side: Side,
        s: f64,
        coeff: Complex64,
        c: f64,
        parity: Option<f64>, // Some(p): integer combo, eval h(x) + p h(-x)
        skip: Option<usize>,
    }
    let mut pieces: Vec<Piece> = Vec::new();
    let terms = &dc.power_terms;
    let mut i = 0;
    while i < terms.len() {
        let t = terms[i];
        let s = t.exponent.to_f64();
        if t.exponent.is_integer() && t.exponent.is_negative() {
            let m = (-t.exponent.as_integer()) as usize;
            let c_plus = if t.side == Side::Plus {
                t.coeff
            } else {
                terms[i + 1].coeff
            };
            pieces.push(Piece {
                side: Side::Plus,
                s,
                coeff: c_plus,
                c: 0.0,
                parity: Some(neg_one_pow(m as i64)),
                skip: Some(m - 1),
            });
            i += 2;
        } else {
            pieces.push(Piece {
                side: t.side,
                s,
                coeff: t.coeff,
                c: 0.0,
                parity: None,
                skip: None,
            });
            i += 1;
        }
    }

    for p in &mut pieces {
        let extent = |side: Side| match side {
            Side::Plus => h.t_max.max(0.0),
            Side::Minus => (-h.t_min).max(0.0),
        };
        let ep = extent(Side::Plus);
        let em = extent(Side::Minus);
        let ext = match p.parity {
            Some(_) => {
                // The combined evaluation h(x) + par h(-x) is populated as
                // soon as either side is; keep the conservative min only
                // when both sides carry mass.
                if ep > 0.0 && em > 0.0 {
                    ep.min(em)
                } else {
                    ep.max(em)
                }
            }
            None => extent(p.side),
        };
        if ext <= 1e-12 * (h.t_max - h.t_min) {
            p.c = 0.0; // side unpopulated: term vanishes
            continue;
        }
        let mut c = h.model.window.min(ext / 2.2);
        // If the support starts strictly after 0, keep [0, c] inside the gap
        // so that dropping (h - T) there is exact.
        let start = match p.parity {
            Some(_) => {
                let sp = if h.t_max > 0.0 {
                    h.t_min.max(0.0)
                } else {
                    f64::INFINITY
                };
                let sm = if h.t_min < 0.0 {
                    (-h.t_max).max(0.0)
                } else {
                    f64::INFINITY
                };
                sp.min(sm).min(ext)
            }
            None => match p.side {
                Side::Plus => h.t_min.max(0.0),
                Side::Minus => (-h.t_max).max(0.0),
            },
        };
        if start > 0.0 {
            c = c.min(start);
        }
        p.c = c;
        let k_min = if p.s > -1.0 {
            0usize
        } else {
            (-p.s).ceil() as usize - 1
        };
        if k_min > h.model.degree {
            return Err(PushforwardError::SmoothnessDeficit {
                needed: k_min,
                available: h.model.degree,
            });
        }
    }

    // Model-side contributions per piece.
    for p in &pieces {
        if p.c <= 0.0 {
            continue;
        }
        let k_min = if p.s > -1.0 {
            0usize
        } else {
            (-p.s).ceil() as usize - 1
        };
        let depth = (k_min + 2).min(h.model.degree + 1);
        // Effective Taylor coefficients of the one-sided (or parity-combined)
        // profile at 0.
        let derivs: Vec<Complex64> = (0..depth)
            .map(|j| {
                let d = h.model.deriv0(j);
                match p.parity {
                    Some(par) => d * (1.0 + par * neg_one_pow(j as i64)),
                    None => {
                        if p.side == Side::Minus {
                            d * neg_one_pow(j as i64)
                        } else {
                            d
                        }
                    }
                }
            })
            .collect();
        let uncs: Vec<f64> = (0..depth)
            .map(|j| {
                let u = h.model.deriv0_unc(j);
                match p.parity {
                    Some(_) => 2.0 * u,
                    None => u,
                }
            })
            .collect();
        let c = p.c;
        let taylor = |x: f64| -> Complex64 {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut fact = 1.0;
            let mut xp = 1.0;
            for (j, dj) in derivs.iter().enumerate() {
                acc += dj / fact * xp;
                xp *= x;
                fact *= (j + 1) as f64;
            }
            acc
        };
        // (a) analytic finite part of int_0^{2c} beta x^s T.
        let mut fp = Complex64::new(0.0, 0.0);
        let mut fp_unc = 0.0f64;
        let mut fact = 1.0;
        for (j, dj) in derivs.iter().enumerate() {
            if p.skip != Some(j) {
                let pw = p.s + j as f64 + 1.0;
                let base = c.powf(pw) / pw;
                let band = quad::integrate(
                    |x| Complex64::new(blend(x, c) * x.powf(p.s + j as f64), 0.0),
                    c,
                    2.0 * c,
                    tol,
                )
                .value;
                fp += dj / fact * (base + band);
                fp_unc += uncs[j] / fact * (base + band).norm();
            }
            fact *= (j + 1) as f64;
        }
        // (b) blended band of the sampled residual on [c, 2c].
        let side_sign = if p.side == Side::Minus { -1.0 } else { 1.0 };
        let heval = |x: f64| -> Complex64 {
            match p.parity {
                Some(par) => h.h_at(x) + par * h.h_at(-x),
                None => h.h_at(side_sign * x),
            }
        };
        let band = quad::integrate(
            |x| blend(x, c) * x.powf(p.s) * (heval(x) - taylor(x)),
            c,
            2.0 * c,
            tol,
        );
        // (c) dropped residual on [0, c]: bounded by the model uncertainty.
        let mut drop_bound = 0.0f64;
        let mut fact = 1.0;
        for (j, &u) in uncs.iter().enumerate() {
            let pw = p.s + j as f64 + 1.0;
            if pw.abs() > 1e-9 {
                drop_bound += u / fact * c.powf(pw) / pw.abs();
            }
            fact *= (j + 1) as f64;
        }
        sum.add(p.coeff * (fp + band.value));
        err += p.coeff.norm() * (fp_unc + band.error + drop_bound);
    }

    // Far contribution: one smooth weighted domain integral for all pieces.
    if pieces.iter().any(|p| p.c > 0.0) {
        let g = |y: f64| -> Complex64 {
            let mut acc = Complex64::new(0.0, 0.0);
            for p in &pieces {
                if p.c <= 0.0 {
                    continue;
                }
                let w = 1.0 - blend(y.abs(), p.c);
                if w <= 0.0 {
                    continue;
                }
                let matched = match p.parity {
                    Some(par) => {
                        if y > 0.0 {
                            1.0
                        } else {
                            par
                        }
                    }
                    None => match p.side {
                        Side::Plus if y > 0.0 => 1.0,
                        Side::Minus if y < 0.0 => 1.0,
                        _ => 0.0,
                    },
                };
                if matched != 0.0 {
                    acc += p.coeff * matched * w * y.abs().powf(p.s);
                }
            }
            acc
        };
        let (fv, fe) = (h.far)(&g);
        sum.add(fv);
        err += fe;
    }

    Ok(ProfilePairing {
        value: sum.value(),
        error_est: err.max(1e-15),
    })
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homdist::{chi, HomDistribution};
    use crate::specfun::{beta, HalfInteger};
    use std::f64::consts::{PI, TAU};

    fn unit_square_linear() -> (Field2, Density2) {
        let charts = vec![Chart2 {
            u: (0.0, 1.0),
            v: (0.0, 1.0),
            periodic_u: false,
            periodic_v: false,
        }];
        (
            Field2 {
                charts,
                sigma: Arc::new(|_, u, _| u - 0.5),
                grad: Arc::new(|_, _, _| (1.0, 0.0)),
            },
            Density2 {
                value: Arc::new(|_, _, _| Complex64::new(1.0, 0.0)),
            },
        )
    }

    fn arcsine_profile(cells: usize) -> PushforwardProfile {
        // sigma = cos 2theta on the circle with F = dtheta / 2pi pushes to
        // the arcsine law h(t) = 1 / (pi sqrt(1 - t^2)).
        let field = Field1 {
            domain: Domain1::Circle,
            sigma: Rc::new(|x: f64| (2.0 * x).cos()),
            dsigma: Rc::new(|x: f64| -2.0 * (2.0 * x).sin()),
        };
        let dens = Density1 {
            value: Rc::new(|_| Complex64::new(1.0 / TAU, 0.0)),
        };
        let grid = GridConfig {
            cells,
            window_frac: 0.02,
            ..GridConfig::default()
        };
        coarea_profile_1d(&field, &dens, &grid).expect("profile")
    }

    #[test]
    fn linear_field_flat_profile() {
        let (field, dens) = unit_square_linear();
        let grid = GridConfig {
            cells: 128,
            t_samples: 128,
            ..GridConfig::default()
        };
        let p = coarea_profile_2d(&field, &dens, &grid).expect("profile");
        assert!((p.t_min + 0.5).abs() < 1e-12 && (p.t_max - 0.5).abs() < 1e-12);
        for &t in &[-0.3, -0.05, 0.11, 0.42] {
            assert!((p.h_at(t).re - 1.0).abs() < 1e-9, "h({t}) = {}", p.h_at(t));
        }
        assert!((p.mass.re - 1.0).abs() < 1e-12);
        assert!(p.mass_defect < 1e-5, "mass defect {}", p.mass_defect);
        assert!((p.margin - 1.0).abs() < 1e-12);
        let d0 = pair_profile(&HomDistribution::delta(0), &p).expect("pair");
        assert!((d0.value.re - 1.0).abs() < 1e-8, "delta pairing {}", d0.value);
    }

    #[test]
    fn arcsine_closed_forms() {
        let p = arcsine_profile(4096);
        // h(0) = 1/pi via the delta pairing.
        let d0 = pair_profile(&HomDistribution::delta(0), &p).expect("pair");
        assert!(
            (d0.value.re - 1.0 / PI).abs() < 1e-8,
            "h(0) = {} vs {}",
            d0.value.re,
            1.0 / PI
        );
        // <delta', even profile> = 0.
        let d1 = pair_profile(&HomDistribution::delta(1), &p).expect("pair");
        assert!(d1.value.norm() < 1e-7, "odd pairing {}", d1.value);
        // <x_-^{-3/2}, h> = B(-1/4, 1/2) / (2 pi) by analytic continuation.
        let d = HomDistribution::power(Side::Minus, HalfInteger::from_twice(-3)).expect("dist");
        let got = pair_profile(&d, &p).expect("pair");
        let want = beta(-0.25, 0.5).expect("beta") / (2.0 * PI);
        assert!(
            (got.value.re - want).abs() < 1e-6,
            "finite part {} vs {} (err est {})",
            got.value.re,
            want,
            got.error_est
        );
        assert!(got.value.im.abs() < 1e-9);
        assert!(p.mass_defect < 1e-6, "mass defect {}", p.mass_defect);
    }

    #[test]
    fn translation_recovers_point_values() {
        // delta_0 against the profile of sigma - c recovers h(c).
        for &c in &[0.37, -0.52] {
            let field = Field1 {
                domain: Domain1::Circle,
                sigma: Rc::new(move |x: f64| (2.0 * x).cos() - c),
                dsigma: Rc::new(|x: f64| -2.0 * (2.0 * x).sin()),
            };
            let dens = Density1 {
                value: Rc::new(|_| Complex64::new(1.0 / TAU, 0.0)),
            };
            let grid = GridConfig {
                cells: 4096,
                window_frac: 0.02,
                ..GridConfig::default()
            };
            let p = coarea_profile_1d(&field, &dens, &grid).expect("profile");
            let d0 = pair_profile(&HomDistribution::delta(0), &p).expect("pair");
            let want = 1.0 / (PI * (1.0 - c * c).sqrt());
            assert!(
                (d0.value.re - want).abs() < 1e-6 * want,
                "h({c}) = {} vs {}",
                d0.value.re,
                want
            );
        }
    }

    #[test]
    fn two_dim_pairing_matches_one_dim() {
        // sigma(u, v) = cos 2u independent of v, with a smooth v-marginal:
        // the 2D pipeline must agree with the exact 1D profile pairing.
        let field2 = Field2 {
            charts: vec![Chart2 {
                u: (0.0, TAU),
                v: (0.0, 1.0),
                periodic_u: true,
                periodic_v: false,
            }],
            sigma: Arc::new(|_, u, _| (2.0 * u).cos()),
            grad: Arc::new(|_, u, _| (-2.0 * (2.0 * u).sin(), 0.0)),
        };
        let dens2 = Density2 {
            value: Arc::new(|_, _, v: f64| {
                Complex64::new((PI * v).sin().powi(2) / PI, 0.0)
            }),
        };
        let grid = GridConfig {
            cells: 1024,
            t_samples: 512,
            ..GridConfig::default()
        };
        let p2 = coarea_profile_2d(&field2, &dens2, &grid).expect("2d profile");
        // The v-marginal integrates to 1/(2 pi), so the pushforward equals
        // the arcsine profile with F = dtheta / (2 pi).
        let p1 = arcsine_profile(4096);
        let d = chi(1, HalfInteger::from_twice(-3)).expect("chi");
        let got2 = pair_profile(&d, &p2).expect("2d pair");
        let got1 = pair_profile(&d, &p1).expect("1d pair");
        assert!(
            (got2.value - got1.value).norm() < 5e-4,
            "2d {} vs 1d {} (est {})",
            got2.value,
            got1.value,
            got2.error_est
        );
    }

    fn two_dim_arcsine_pairing(cells: usize) -> ProfilePairing {
        let field2 = Field2 {
            charts: vec![Chart2 {
                u: (0.0, TAU),
                v: (0.0, 1.0),
                periodic_u: true,
                periodic_v: false,
            }],
            sigma: Arc::new(|_, u, _| (2.0 * u).cos()),
            grad: Arc::new(|_, u, _| (-2.0 * (2.0 * u).sin(), 0.0)),
        };
        let dens2 = Density2 {
            value: Arc::new(|_, _, v: f64| Complex64::new((PI * v).sin().powi(2) / PI, 0.0)),
        };
        let grid = GridConfig {
            cells,
            t_samples: 512,
            ..GridConfig::default()
        };
        let p = coarea_profile_2d(&field2, &dens2, &grid).expect("profile");
        let d = HomDistribution::power(Side::Minus, HalfInteger::from_twice(-3)).expect("dist");
        pair_profile(&d, &p).expect("pair")
    }

    #[test]
    fn grid_convergence_within_error_estimate() {
        let coarse = two_dim_arcsine_pairing(512);
        let fine = two_dim_arcsine_pairing(1024);
        let diff = (coarse.value - fine.value).norm();
        assert!(
            diff < 4.0 * (coarse.error_est + 1e-8),
            "doubling moved the result by {diff:.2e}, estimate was {:.2e}",
            coarse.error_est
        );
    }

    #[test]
    fn degenerate_margin_rejected() {
        // sigma = u v has a critical point on its own zero level.
        let field = Field2 {
            charts: vec![Chart2 {
                u: (-1.0, 1.0),
                v: (-1.0, 1.0),
                periodic_u: false,
                periodic_v: false,
            }],
            sigma: Arc::new(|_, u, v| u * v),
            grad: Arc::new(|_, u, v| (v, u)),
        };
        let dens = Density2 {
            value: Arc::new(|_, _, _| Complex64::new(1.0, 0.0)),
        };
        let p = coarea_profile_2d(&field, &dens, &GridConfig::default()).expect("profile");
        assert!(p.margin < 1e-2, "margin {}", p.margin);
        match pair_profile(&HomDistribution::delta(0), &p) {
            Err(PushforwardError::MarginTooSmall { .. }) => {}
            other => panic!("expected margin failure, got {other:?}"),
        }
    }

    #[test]
    fn singularity_outside_domain_rejected_for_deltas() {
        // sigma ranges over [1, 3]: delta pairings must fail loudly.
        let field = Field1 {
            domain: Domain1::Interval { a: 0.0, b: 1.0 },
            sigma: Rc::new(|x: f64| 2.0 + (PI * x).sin()),
            dsigma: Rc::new(|x: f64| PI * (PI * x).cos()),
        };
        let dens = Density1 {
            value: Rc::new(|_| Complex64::new(1.0, 0.0)),
        };
        let p = coarea_profile_1d(&field, &dens, &GridConfig::default()).expect("profile");
        match pair_profile(&HomDistribution::delta(0), &p) {
            Err(PushforwardError::SingularityExcluded { .. }) => {}
            other => panic!("expected exclusion failure, got {other:?}"),
        }
        // A regular power pairing on the populated side still works:
        // <x_+^{1/2}, h> = \int_0^1 sigma(x)^{1/2} dx by coarea.
        let d = HomDistribution::power(Side::Plus, HalfInteger::from_twice(1)).expect("dist");
        let got = pair_profile(&d, &p).expect("pair");
        let want = quad::integrate(
            |x| Complex64::new((2.0 + (PI * x).sin()).sqrt(), 0.0),
            0.0,
            1.0,
            1e-12,
        )
        .value;
        assert!(
            (got.value - want).norm() < 1e-7,
            "got {} want {}",
            got.value,
            want
        );
    }

    #[test]
    fn integer_combo_with_gapped_support() {
        // sigma ranges over [1, 3]: the pairing of the regularized x^{-2}
        // combination is the plain integral \int sigma(x)^{-2} dx by coarea.
        let field = Field1 {
            domain: Domain1::Interval { a: 0.0, b: 1.0 },
            sigma: Rc::new(|x: f64| 2.0 + (PI * x).sin()),
            dsigma: Rc::new(|x: f64| PI * (PI * x).cos()),
        };
        let dens = Density1 {
            value: Rc::new(|_| Complex64::new(1.0, 0.0)),
        };
        let p = coarea_profile_1d(&field, &dens, &GridConfig::default()).expect("profile");
        let d = HomDistribution::x_pow(-2);
        let got = pair_profile(&d, &p).expect("pair");
        let want = crate::quad::integrate(
            |x| Complex64::new((2.0 + (PI * x).sin()).powi(-2), 0.0),
            0.0,
            1.0,
            1e-13,
        )
        .value;
        assert!(
            (got.value - want).norm() < 1e-7,
            "got {} want {}",
            got.value,
            want
        );
    }

    #[test]
    fn csv_export_roundtrip() {
        let p = arcsine_profile(512);
        let csv = p.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,re_h,im_h"));
        let first = lines.next().expect("one sample");
        let cols: Vec<f64> = first.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), 3);
        assert!((cols[0] - p.ts[0]).abs() < 1e-15);
    }

    #[test]
    fn saddle_disambiguation_is_consistent() {
        // sigma = u v on [-1,1]^2: every nonzero level is a hyperbola; mass
        // conservation exercises the saddle cells around the origin.
        let field = Field2 {
            charts: vec![Chart2 {
                u: (-1.0, 1.0),
                v: (-1.0, 1.0),
                periodic_u: false,
                periodic_v: false,
            }],
            sigma: Arc::new(|_, u, v| u * v),
            grad: Arc::new(|_, u, v| (v, u)),
        };
        let dens = Density2 {
            value: Arc::new(|_, _, _| Complex64::new(0.25, 0.0)),
        };
        let grid = GridConfig {
            cells: 768,
            t_samples: 512,
            ..GridConfig::default()
        };
        let p = coarea_profile_2d(&field, &dens, &grid).expect("profile");
        assert!((p.mass.re - 1.0).abs() < 1e-12);
        // h has a logarithmic singularity at 0, so check mass only loosely.
        assert!(p.mass_defect < 5e-3, "mass defect {}", p.mass_defect);
        // h(1/4) = 2 * 0.25 * \int_{1/4}^{1} du / u ... by symmetry of the
        // four quadrants: h(t) = 4 * 0.25 * ln(1/t) / ... evaluate directly:
        // level uv = t in one quadrant: length measure gives
        // \int F / |grad| dl = 0.25 * \int_t^1 du / sqrt(u^2 + t^2/u^2) *
        // sqrt(1 + t^2/u^4) du = 0.25 \int_t^1 du / u, summed over 4 arcs
        // (two quadrants for t > 0, each traversed twice in u and v): total
        // h(t) = 2 * 0.25 * 2 * ln(1/t) / 2 = 0.5 ln(1/t).
        let t = 0.25;
        let want = 0.5 * (1.0f64 / t).ln();
        assert!(
            (p.h_at(t).re - want).abs() < 5e-3 * want,
            "h({t}) = {} vs {}",
            p.h_at(t).re,
            want
        );
    }
}
