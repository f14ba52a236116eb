//! Adaptive Gauss-Kronrod (G7,K15) quadrature for complex-valued integrands,
//! plus compensated summation helpers.

use num_complex::Complex64;

// 15-point Kronrod abscissae (positive half) and weights; the embedded
// 7-point Gauss weights sit at the odd-indexed Kronrod nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_813,
    0.949_107_912_342_759,
    0.864_864_423_359_769,
    0.741_531_185_599_394,
    0.586_087_235_467_691,
    0.405_845_151_377_397,
    0.207_784_955_007_898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529,
    0.063_092_092_629_979,
    0.104_790_010_322_250,
    0.140_653_259_715_525,
    0.169_004_726_639_267,
    0.190_350_578_064_785,
    0.204_432_940_075_298,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_870,
    0.279_705_391_489_277,
    0.381_830_050_505_119,
    0.417_959_183_673_469,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
    pub evals: usize,
}

/// One K15/G7 panel: returns the Kronrod value and the QUADPACK-style
/// error estimate resasc * min(1, (200 |K-G| / resasc)^{3/2}).
fn kronrod_panel<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut vals = [[Complex64::new(0.0, 0.0); 2]; 8];
    for (j, &x) in XGK.iter().enumerate() {
        if x == 0.0 {
            vals[j][0] = f(c);
        } else {
            vals[j][0] = f(c - h * x);
            vals[j][1] = f(c + h * x);
        }
    }
    let mut kronrod = Complex64::new(0.0, 0.0);
    let mut gauss = Complex64::new(0.0, 0.0);
    for (j, &wk) in WGK.iter().enumerate() {
        let s = vals[j][0] + vals[j][1];
        kronrod += wk * s;
        if j % 2 == 1 {
            // Odd Kronrod indices carry the embedded G7 nodes; the center
            // node (j = 7) enters with s = f(c) only.
            gauss += WG[j / 2] * s;
        }
    }
    let mean = kronrod * 0.5;
    let mut resasc = 0.0;
    for (j, &wk) in WGK.iter().enumerate() {
        if XGK[j] == 0.0 {
            resasc += wk * (vals[j][0] - mean).norm();
        } else {
            resasc += wk * ((vals[j][0] - mean).norm() + (vals[j][1] - mean).norm());
        }
    }
    resasc *= h.abs();
    let raw = (kronrod - gauss).norm() * h.abs();
    let err = if resasc > 0.0 && raw > 0.0 {
        resasc * (200.0 * raw / resasc).powf(1.5).min(1.0)
    } else {
        raw
    };
    (kronrod * h, err)
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    err: f64,
    lo: f64,
    hi: f64,
    val: Complex64,
}

/// Adaptive quadrature of `f` over [a, b] to absolute tolerance `tol`:
/// global strategy, always splitting the worst panel, with a hard work cap
/// so roundoff-floored error estimates cannot cause runaway subdivision.
pub fn integrate<F: FnMut(f64) -> Complex64>(mut f: F, a: f64, b: f64, tol: f64) -> QuadResult {
    const MAX_PANELS: usize = 4000;
    let tol = tol.max(1e-15);
    if b <= a {
        return QuadResult {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
            evals: 0,
        };
    }
    let mut evals = 15usize;
    let (val, err) = kronrod_panel(&mut f, a, b);
    let mut panels = vec![Panel {
        err,
        lo: a,
        hi: b,
        val,
    }];
    loop {
        let total_err: f64 = panels.iter().map(|p| p.err).sum();
        if total_err <= tol || panels.len() >= MAX_PANELS {
            break;
        }
        // split the worst panel
        let (wi, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .expect("nonempty");
        let w = panels.swap_remove(wi);
        if (w.hi - w.lo) < 1e-14 * (b - a).abs() + 1e-300 {
            // refinement floor: keep as-is, stop charging its error
            panels.push(Panel { err: 0.0, ..w });
            continue;
        }
        let mid = 0.5 * (w.lo + w.hi);
        for (lo, hi) in [(w.lo, mid), (mid, w.hi)] {
            let (val, err) = kronrod_panel(&mut f, lo, hi);
            evals += 15;
            panels.push(Panel { err, lo, hi, val });
        }
    }
    // fixed-order (by position) compensated reduction for determinism
    panels.sort_by(|x, y| x.lo.total_cmp(&y.lo));
    let mut sum = NeumaierSum::default();
    let mut err_total = 0.0;
    for p in &panels {
        sum.add(p.val);
        err_total += p.err;
    }
    QuadResult {
        value: sum.value(),
        error: err_total,
        evals,
    }
}

/// Adaptive quadrature split at interior breakpoints (kinks, crossings).
pub fn integrate_piecewise<F: FnMut(f64) -> Complex64>(
    mut f: F,
    breakpoints: &[f64],
    tol: f64,
) -> QuadResult {
    let mut value = NeumaierSum::default();
    let mut error = 0.0;
    let mut evals = 0;
    for w in breakpoints.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let r = integrate(&mut f, w[0], w[1], tol / (breakpoints.len() as f64 - 1.0).max(1.0));
        value.add(r.value);
        error += r.error;
        evals += r.evals;
    }
    QuadResult {
        value: value.value(),
        error,
        evals,
    }
}

/// Neumaier (improved Kahan) compensated sum over Complex64.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    s_re: f64,
    c_re: f64,
    s_im: f64,
    c_im: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, v: Complex64) {
        Self::add_part(&mut self.s_re, &mut self.c_re, v.re);
        Self::add_part(&mut self.s_im, &mut self.c_im, v.im);
    }

    fn add_part(s: &mut f64, c: &mut f64, v: f64) {
        let t = *s + v;
        if s.abs() >= v.abs() {
            *c += (*s - t) + v;
        } else {
            *c += (v - t) + *s;
        }
        *s = t;
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.s_re + self.c_re, self.s_im + self.c_im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn smooth_integrals() {
        let r = integrate(|x| Complex64::new(x.sin(), 0.0), 0.0, PI, 1e-12);
        assert!((r.value.re - 2.0).abs() < 1e-11);
        let r = integrate(|x| Complex64::new((-x * x).exp(), 0.0), -8.0, 8.0, 1e-13);
        assert!((r.value.re - PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn complex_integrand() {
        // \int_0^1 e^{ix} dx = sin 1 + i(1 - cos 1)
        let r = integrate(|x| Complex64::new(0.0, x).exp(), 0.0, 1.0, 1e-13);
        assert!((r.value - Complex64::new(1f64.sin(), 1.0 - 1f64.cos())).norm() < 1e-12);
    }

    #[test]
    fn integrable_endpoint_singularity() {
        // \int_0^1 x^{-1/2} dx = 2
        let r = integrate(|x| Complex64::new(x.sqrt().recip(), 0.0), 1e-300, 1.0, 1e-10);
        assert!((r.value.re - 2.0).abs() < 1e-8, "got {}", r.value.re);
    }

    #[test]
    fn piecewise_kink() {
        let r = integrate_piecewise(
            |x| Complex64::new(x.abs(), 0.0),
            &[-1.0, 0.0, 2.0],
            1e-13,
        );
        assert!((r.value.re - 2.5).abs() < 1e-12);
    }

    #[test]
    fn compensated_sum() {
        let mut s = NeumaierSum::default();
        s.add(Complex64::new(1e16, 0.0));
        for _ in 0..10 {
            s.add(Complex64::new(0.1, 0.0));
        }
        s.add(Complex64::new(-1e16, 0.0));
        assert!((s.value().re - 1.0).abs() < 1e-12);
    }
}
