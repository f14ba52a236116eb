//! Pseudo-Euclidean geometry of parametric curves and surfaces.
//!
//! The ambient space R^{p,q} carries the quadratic form
//! Q = diag(+1 x p, -1 x q) alongside the Euclidean form P and the
//! involution S with Q(a, b) = P(Sa, b). Chart maps are written
//! generically over [`Smooth`], so every geometric quantity (unit normals,
//! sigma = Q(nu_E), shape operators, Christoffel symbols, curvature
//! tensors) is obtained from analytic jets — no finite differencing.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::jet::{FixedJet2, Jet1, Jet2, Smooth};
use crate::pushforward::Chart2;

type Result<T> = std::result::Result<T, PseudoGeomError>;

#[derive(Debug, Error)]
pub enum PseudoGeomError {
    #[error("unknown or malformed target `{0}`")]
    BadTarget(String),
    #[error("target needs ambient dimension {expected}, got {got}")]
    AmbientMismatch { expected: usize, got: usize },
    #[error("rank-deficient chart differential at chart {chart}, (u,v)=({u:.4},{v:.4})")]
    RankDeficient { chart: usize, u: f64, v: f64 },
    #[error("degenerate metric/normal space at (u,v)=({u:.4},{v:.4})")]
    DegeneratePoint { u: f64, v: f64 },
}

// ---------------------------------------------------------------------------
// Ambient space
// ---------------------------------------------------------------------------

/// R^{p,q} with Q = diag(+1 x p, -1 x q).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AmbientSpace {
    pub p: usize,
    pub q: usize,
}

impl AmbientSpace {
    pub fn new(p: usize, q: usize) -> Result<AmbientSpace> {
        if p + q < 1 {
            return Err(PseudoGeomError::BadTarget("ambient 0,0".into()));
        }
        Ok(AmbientSpace { p, q })
    }

    pub fn dim(&self) -> usize {
        self.p + self.q
    }

    /// Sign of Q on the k-th coordinate.
    pub fn sign(&self, k: usize) -> f64 {
        if k < self.p {
            1.0
        } else {
            -1.0
        }
    }

    pub fn q_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .enumerate()
            .map(|(k, (x, y))| self.sign(k) * x * y)
            .sum()
    }

    pub fn p_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// The involution S (flips the negative block), so Q(a,b) = P(Sa, b).
    pub fn involution(&self, a: &[f64]) -> Vec<f64> {
        a.iter()
            .enumerate()
            .map(|(k, x)| self.sign(k) * x)
            .collect()
    }
}

/// Q-weighted dot product for jet-valued vectors.
fn q_dot_s<T: Smooth>(amb: &AmbientSpace, a: &[T], b: &[T]) -> T {
    let mut acc = a[0].lift(0.0);
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        acc = acc + (x.clone() * y.clone()).scale(amb.sign(k));
    }
    acc
}

fn p_dot_s<T: Smooth>(a: &[T], b: &[T]) -> T {
    let mut acc = a[0].lift(0.0);
    for (x, y) in a.iter().zip(b) {
        acc = acc + x.clone() * y.clone();
    }
    acc
}

fn cross3<T: Smooth>(a: &[T], b: &[T]) -> Vec<T> {
    vec![
        a[1].clone() * b[2].clone() - a[2].clone() * b[1].clone(),
        a[2].clone() * b[0].clone() - a[0].clone() * b[2].clone(),
        a[0].clone() * b[1].clone() - a[1].clone() * b[0].clone(),
    ]
}

fn cosh_s<T: Smooth>(x: &T) -> T {
    (x.clone().exp() + (-x.clone()).exp()).scale(0.5)
}

fn sinh_s<T: Smooth>(x: &T) -> T {
    (x.clone().exp() - (-x.clone()).exp()).scale(0.5)
}

/// Polynomial c_0 + c_1 x + ... evaluated generically (Horner).
fn poly_s<T: Smooth>(x: &T, coeffs: &[f64]) -> T {
    let mut acc = x.lift(*coeffs.last().unwrap_or(&0.0));
    for &c in coeffs.iter().rev().skip(1) {
        acc = acc * x.clone() + x.lift(c);
    }
    acc
}

/// Quintic smoothstep: 0 for x <= 0, 1 for x >= 1, C^2 monotone in between.
pub fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
    }
}

// ---------------------------------------------------------------------------
// Signature of symmetric forms
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Signature {
    pub pos: usize,
    pub neg: usize,
    pub kernel_dim: usize,
    /// Orthonormal basis of the numerical kernel (|eigenvalue| <= tol).
    pub kernel: Vec<Vec<f64>>,
}

/// Cyclic Jacobi eigendecomposition of a small symmetric matrix.
fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[i][j] * m[i][j];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = 0.5 * (m[q][q] - m[p][p]) / m[p][q];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let eigvals: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    // Columns of v are the eigenvectors.
    let eigvecs: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| v[i][j]).collect()).collect();
    (eigvals, eigvecs)
}

/// Eigenvalue counts above/below +-tol with a kernel basis.
pub fn signature_at(g: &[Vec<f64>], tol: f64) -> Signature {
    let (vals, vecs) = jacobi_eigen(g);
    let mut sig = Signature {
        pos: 0,
        neg: 0,
        kernel_dim: 0,
        kernel: Vec::new(),
    };
    for (lam, vec) in vals.iter().zip(vecs) {
        if *lam > tol {
            sig.pos += 1;
        } else if *lam < -tol {
            sig.neg += 1;
        } else {
            sig.kernel_dim += 1;
            sig.kernel.push(vec);
        }
    }
    sig
}

// ---------------------------------------------------------------------------
// Surface catalog
// ---------------------------------------------------------------------------

/// Closed-form chart maps of the built-in surfaces, generic over [`Smooth`].
#[derive(Debug, Clone)]
pub enum SurfaceKind {
    /// Polar cap of an ellipsoid (a sin u cos v, b sin u sin v, +-c cos u).
    EllipsoidCap { a: f64, b: f64, c: f64, south: bool },
    /// ((big + small cos v) cos u, (big + small cos v) sin u, small sin v).
    Torus { big: f64, small: f64 },
    /// De Sitter surface x^2 + y^2 - z^2 = 1: (cosh u cos v, cosh u sin v, sinh u).
    Pseudosphere,
    /// Graph z = u^2 - v^2.
    Saddle,
    /// (u, v, a u v, b (u^2 - v^2)) in a 4-dimensional ambient.
    Saddle4 { a: f64, b: f64 },
    /// Surface of revolution whose profile has slope exactly 1 on a band
    /// (the normal is Q-null on the whole band: not LC-transversal).
    RevolutionLightband,
}

impl SurfaceKind {
    pub fn eval<T: Smooth>(&self, u: &T, v: &T) -> Vec<T> {
        match *self {
            SurfaceKind::EllipsoidCap { a, b, c, south } => {
                let (su, cu) = (u.clone().sin(), u.clone().cos());
                let (sv, cv) = (v.clone().sin(), v.clone().cos());
                let zc = if south { -c } else { c };
                vec![
                    (su.clone() * cv).scale(a),
                    (su * sv).scale(b),
                    cu.scale(zc),
                ]
            }
            SurfaceKind::Torus { big, small } => {
                let (su, cu) = (u.clone().sin(), u.clone().cos());
                let (sv, cv) = (v.clone().sin(), v.clone().cos());
                let ring = cv.scale(small) + u.lift(big);
                vec![ring.clone() * cu, ring * su, sv.scale(small)]
            }
            SurfaceKind::Pseudosphere => {
                let (ch, sh) = (cosh_s(u), sinh_s(u));
                let (sv, cv) = (v.clone().sin(), v.clone().cos());
                vec![ch.clone() * cv, ch * sv, sh]
            }
            SurfaceKind::Saddle => {
                vec![
                    u.clone(),
                    v.clone(),
                    u.clone() * u.clone() - v.clone() * v.clone(),
                ]
            }
            SurfaceKind::Saddle4 { a, b } => {
                vec![
                    u.clone(),
                    v.clone(),
                    (u.clone() * v.clone()).scale(a),
                    (u.clone() * u.clone() - v.clone() * v.clone()).scale(b),
                ]
            }
            SurfaceKind::RevolutionLightband => {
                let rho = lightband_rho(u);
                let (sv, cv) = (v.clone().sin(), v.clone().cos());
                vec![rho.clone() * cv, rho * sv, u.clone()]
            }
        }
    }
}

/// Radius profile with slope exactly 1 on |z| <= 0.3, smoothly flattening
/// to constants on |z| >= 0.8 (quintic-smoothstep slope).
fn lightband_rho<T: Smooth>(z: &T) -> T {
    let z0 = z.value();
    if z0.abs() <= 0.3 {
        return z.lift(2.0) + z.clone();
    }
    let sgn = z0.signum();
    if z0.abs() >= 0.8 {
        // T(1) = 1 - 2.5 + 3 - 1 = 1/2, so the plateau sits at 2 +- 0.55.
        return z.lift(2.0 + sgn * 0.55);
    }
    // xi = (|z| - 0.3) / 0.5; antiderivative of 1 - smoothstep(xi):
    // T(xi) = xi - 2.5 xi^4 + 3 xi^5 - xi^6.
    let xi = (z.clone().scale(sgn) + z.lift(-0.3)).scale(2.0);
    let t = poly_s(&xi, &[0.0, 1.0, 0.0, 0.0, -2.5, 3.0, -1.0]);
    t.scale(0.5 * sgn) + z.lift(2.0 + 0.3 * sgn)
}

/// Partition-of-unity weight attached to a chart (a function of u alone).
#[derive(Debug, Clone, Copy)]
pub enum ChartWeight {
    One,
    /// 1 for u <= lo, smoothstep down to 0 at u = hi.
    CapBlend { lo: f64, hi: f64 },
}

impl ChartWeight {
    pub fn value(&self, u: f64) -> f64 {
        match *self {
            ChartWeight::One => 1.0,
            ChartWeight::CapBlend { lo, hi } => smoothstep((hi - u) / (hi - lo)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SurfaceChart {
    pub kind: SurfaceKind,
    pub rect: Chart2,
    pub weight: ChartWeight,
    /// +-1: fixes nu_E = orient * (f_u x f_v)/|...| to point outward
    /// (for closed surfaces) or to the conventional side (open ones).
    pub orient: f64,
}

#[derive(Debug, Clone)]
pub struct Surface {
    pub name: String,
    pub ambient: AmbientSpace,
    pub charts: Vec<SurfaceChart>,
    /// Closed without boundary (Gauss-Bonnet applicable).
    pub closed: bool,
    /// Post-composed ambient Q-isometries: planar rotations (i, j, angle)
    /// with both axes inside the + block or both inside the - block.
    pub rotations: Vec<(usize, usize, f64)>,
}

const POLE_INSET: f64 = 1e-6;

impl Surface {
    pub fn ellipsoid(ambient: AmbientSpace, a: f64, b: f64, c: f64) -> Result<Surface> {
        if ambient.dim() != 3 {
            return Err(PseudoGeomError::AmbientMismatch {
                expected: 3,
                got: ambient.dim(),
            });
        }
        let cap_hi = 0.75 * std::f64::consts::PI;
        let rect = Chart2 {
            u: (POLE_INSET, cap_hi),
            v: (0.0, std::f64::consts::TAU),
            periodic_u: false,
            periodic_v: true,
        };
        let weight = ChartWeight::CapBlend {
            lo: 0.25 * std::f64::consts::PI,
            hi: cap_hi,
        };
        Ok(Surface {
            name: format!("ellipsoid:{a},{b},{c}"),
            ambient,
            charts: vec![
                SurfaceChart {
                    kind: SurfaceKind::EllipsoidCap {
                        a,
                        b,
                        c,
                        south: false,
                    },
                    rect,
                    weight,
                    orient: 1.0,
                },
                SurfaceChart {
                    kind: SurfaceKind::EllipsoidCap {
                        a,
                        b,
                        c,
                        south: true,
                    },
                    rect,
                    weight,
                    orient: -1.0,
                },
            ],
            closed: true,
            rotations: Vec::new(),
        })
    }

    pub fn sphere(ambient: AmbientSpace, r: f64) -> Result<Surface> {
        let mut s = Surface::ellipsoid(ambient, r, r, r)?;
        s.name = format!("sphere:{r}");
        Ok(s)
    }

    pub fn torus(ambient: AmbientSpace, big: f64, small: f64) -> Result<Surface> {
        if ambient.dim() != 3 {
            return Err(PseudoGeomError::AmbientMismatch {
                expected: 3,
                got: ambient.dim(),
            });
        }
        Ok(Surface {
            name: format!("torus:{big},{small}"),
            ambient,
            charts: vec![SurfaceChart {
                kind: SurfaceKind::Torus { big, small },
                rect: Chart2 {
                    u: (0.0, std::f64::consts::TAU),
                    v: (0.0, std::f64::consts::TAU),
                    periodic_u: true,
                    periodic_v: true,
                },
                weight: ChartWeight::One,
                orient: 1.0,
            }],
            closed: true,
            rotations: Vec::new(),
        })
    }

    pub fn pseudosphere(ambient: AmbientSpace) -> Result<Surface> {
        if ambient.dim() != 3 {
            return Err(PseudoGeomError::AmbientMismatch {
                expected: 3,
                got: ambient.dim(),
            });
        }
        Ok(Surface {
            name: "pseudosphere".into(),
            ambient,
            charts: vec![SurfaceChart {
                kind: SurfaceKind::Pseudosphere,
                rect: Chart2 {
                    u: (-1.2, 1.2),
                    v: (0.0, std::f64::consts::TAU),
                    periodic_u: false,
                    periodic_v: true,
                },
                weight: ChartWeight::One,
                orient: 1.0,
            }],
            closed: false,
            rotations: Vec::new(),
        })
    }

    pub fn saddle(ambient: AmbientSpace) -> Result<Surface> {
        if ambient.dim() != 3 {
            return Err(PseudoGeomError::AmbientMismatch {
                expected: 3,
                got: ambient.dim(),
            });
        }
        Ok(Surface {
            name: "graph:saddle".into(),
            ambient,
            charts: vec![SurfaceChart {
                kind: SurfaceKind::Saddle,
                rect: Chart2 {
                    u: (-1.0, 1.0),
                    v: (-1.0, 1.0),
                    periodic_u: false,
                    periodic_v: false,
                },
                weight: ChartWeight::One,
                orient: 1.0,
            }],
            closed: false,
            rotations: Vec::new(),
        })
    }

    pub fn saddle4(ambient: AmbientSpace, a: f64, b: f64) -> Result<Surface> {
        if ambient.dim() != 4 {
            return Err(PseudoGeomError::AmbientMismatch {
                expected: 4,
                got: ambient.dim(),
            });
        }
        Ok(Surface {
            name: format!("saddle4:{a},{b}"),
            ambient,
            charts: vec![SurfaceChart {
                kind: SurfaceKind::Saddle4 { a, b },
                rect: Chart2 {
                    u: (-1.0, 1.0),
                    v: (-1.0, 1.0),
                    periodic_u: false,
                    periodic_v: false,
                },
                weight: ChartWeight::One,
                orient: 1.0,
            }],
            closed: false,
            rotations: Vec::new(),
        })
    }

    pub fn revolution_lightband(ambient: AmbientSpace) -> Result<Surface> {
        if ambient.dim() != 3 {
            return Err(PseudoGeomError::AmbientMismatch {
                expected: 3,
                got: ambient.dim(),
            });
        }
        Ok(Surface {
            name: "revolution:lightband".into(),
            ambient,
            charts: vec![SurfaceChart {
                kind: SurfaceKind::RevolutionLightband,
                rect: Chart2 {
                    u: (-1.0, 1.0),
                    v: (0.0, std::f64::consts::TAU),
                    periodic_u: false,
                    periodic_v: true,
                },
                weight: ChartWeight::One,
                orient: 1.0,
            }],
            closed: false,
            rotations: Vec::new(),
        })
    }

    pub fn jets(&self, chart: usize, u: f64, v: f64, deg: usize) -> Vec<Jet2> {
        let mut f = self.charts[chart]
            .kind
            .eval(&Jet2::var_u(u, deg), &Jet2::var_v(v, deg));
        self.apply_rotations(&mut f);
        f
    }

    pub fn point(&self, chart: usize, u: f64, v: f64) -> Vec<f64> {
        let mut f = self.charts[chart].kind.eval(&u, &v);
        self.apply_rotations(&mut f);
        f
    }

    fn apply_rotations<T: Smooth>(&self, f: &mut [T]) {
        for &(i, j, theta) in &self.rotations {
            let (s, c) = theta.sin_cos();
            let a = f[i].clone().scale(c) + f[j].clone().scale(-s);
            let b = f[i].clone().scale(s) + f[j].clone().scale(c);
            f[i] = a;
            f[j] = b;
        }
    }

    /// Post-compose with a Q-preserving planar rotation: both coordinate
    /// axes must lie in the same definiteness block.
    pub fn with_rotation(mut self, i: usize, j: usize, theta: f64) -> Result<Surface> {
        let n = self.ambient.dim();
        if i >= n || j >= n || i == j || self.ambient.sign(i) != self.ambient.sign(j) {
            return Err(PseudoGeomError::BadTarget(format!(
                "rotation axes ({i},{j}) not in one block of R^{{{},{}}}",
                self.ambient.p, self.ambient.q
            )));
        }
        self.rotations.push((i, j, theta));
        Ok(self)
    }

    /// Induced metric g_ij = Q(f_i, f_j) at a parameter.
    pub fn induced_metric(&self, chart: usize, u: f64, v: f64) -> [[f64; 2]; 2] {
        let f = self.jets(chart, u, v, 1);
        let fu: Vec<f64> = f.iter().map(|j| j.derivative(1, 0)).collect();
        let fv: Vec<f64> = f.iter().map(|j| j.derivative(0, 1)).collect();
        let amb = &self.ambient;
        [
            [amb.q_dot(&fu, &fu), amb.q_dot(&fu, &fv)],
            [amb.q_dot(&fv, &fu), amb.q_dot(&fv, &fv)],
        ]
    }

    /// Induced metric entries as jets of total degree `deg`.
    pub fn metric_jets(&self, chart: usize, u: f64, v: f64, deg: usize) -> [[Jet2; 2]; 2] {
        let f = self.jets(chart, u, v, deg + 1);
        let fu: Vec<Jet2> = f.iter().map(|j| j.du()).collect();
        let fv: Vec<Jet2> = f.iter().map(|j| j.dv()).collect();
        let amb = &self.ambient;
        [
            [q_dot_s(amb, &fu, &fu), q_dot_s(amb, &fu, &fv)],
            [q_dot_s(amb, &fv, &fu), q_dot_s(amb, &fv, &fv)],
        ]
    }

    /// The induced metric of a chart as a standalone metric field.
    pub fn metric_field(&self, chart: usize) -> MetricField2 {
        let s = self.clone();
        MetricField2 {
            name: format!("induced({}#{})", self.name, chart),
            rect: self.charts[chart].rect,
            eval: Arc::new(move |u, v, deg| s.metric_jets(chart, u, v, deg)),
        }
    }

    /// Partition-of-unity weight of a chart at parameter u.
    pub fn chart_weight(&self, chart: usize, u: f64) -> f64 {
        self.charts[chart].weight.value(u)
    }

    /// Hypersurface data (3-dimensional ambient only).
    pub fn hypersurface_data(&self, chart: usize, u: f64, v: f64) -> Result<HypersurfaceSample> {
        if self.ambient.dim() != 3 {
            return Err(PseudoGeomError::AmbientMismatch {
                expected: 3,
                got: self.ambient.dim(),
            });
        }
        // FixedJet2 keeps this allocation-free apart from small vectors:
        // this routine runs millions of times per contour grid.
        let mut f = self
            .charts[chart]
            .kind
            .eval(&FixedJet2::var_u(u), &FixedJet2::var_v(v));
        self.apply_rotations(&mut f);
        let fu: Vec<FixedJet2> = f.iter().map(|j| j.du()).collect();
        let fv: Vec<FixedJet2> = f.iter().map(|j| j.dv()).collect();
        let c = cross3(&fu, &fv);
        let n2 = p_dot_s(&c, &c);
        if n2.value() <= 1e-24 {
            return Err(PseudoGeomError::RankDeficient { chart, u, v });
        }
        let inv_norm = n2.sqrt().recip();
        let orient = self.charts[chart].orient;
        let nu: Vec<FixedJet2> = c.iter().map(|ci| (*ci * inv_norm).scale(orient)).collect();
        let sigma_jet = q_dot_s(&self.ambient, &nu, &nu);
        let nu_val: Vec<f64> = nu.iter().map(|j| j.value()).collect();
        // First and second fundamental forms w.r.t. the Euclidean structure.
        let fu_val: Vec<f64> = fu.iter().map(|j| j.value()).collect();
        let fv_val: Vec<f64> = fv.iter().map(|j| j.value()).collect();
        let i11 = self.ambient.p_dot(&fu_val, &fu_val);
        let i12 = self.ambient.p_dot(&fu_val, &fv_val);
        let i22 = self.ambient.p_dot(&fv_val, &fv_val);
        let det_i = i11 * i22 - i12 * i12;
        if det_i <= 1e-24 {
            return Err(PseudoGeomError::RankDeficient { chart, u, v });
        }
        let second = |i: usize, j: usize| -> f64 {
            f.iter()
                .zip(&nu_val)
                .map(|(fk, nk)| fk.derivative(i, j) * nk)
                .sum()
        };
        let ii11 = second(2, 0);
        let ii12 = second(1, 1);
        let ii22 = second(0, 2);
        Ok(HypersurfaceSample {
            nu: nu_val,
            sigma: sigma_jet.value(),
            grad_sigma: (sigma_jet.derivative(1, 0), sigma_jet.derivative(0, 1)),
            k_e: (ii11 * ii22 - ii12 * ii12) / det_i,
            da_e: det_i.sqrt(),
        })
    }
}

/// Pointwise hypersurface package: Euclidean unit normal, sigma = Q(nu_E),
/// its parameter gradient, Euclidean Gauss curvature and area density.
#[derive(Debug, Clone)]
pub struct HypersurfaceSample {
    pub nu: Vec<f64>,
    pub sigma: f64,
    pub grad_sigma: (f64, f64),
    pub k_e: f64,
    pub da_e: f64,
}

// ---------------------------------------------------------------------------
// Metric fields and LC-regularity
// ---------------------------------------------------------------------------

type MetricEvalFn = Arc<dyn Fn(f64, f64, usize) -> [[Jet2; 2]; 2] + Send + Sync>;

/// A 2D field of symmetric bilinear forms with analytic jets.
#[derive(Clone)]
pub struct MetricField2 {
    pub name: String,
    pub rect: Chart2,
    pub eval: MetricEvalFn,
}

/// Catalog metric fields: `metric:y_dy2` is dx^2 + y dy^2, `metric:y2_dy2`
/// is dx^2 + y^2 dy^2, both on [-1,1]^2.
pub fn metric_target(target: &str) -> Result<MetricField2> {
    let rect = Chart2 {
        u: (-1.0, 1.0),
        v: (-1.0, 1.0),
        periodic_u: false,
        periodic_v: false,
    };
    let eval: MetricEvalFn = match target {
        "metric:y_dy2" => Arc::new(|_u, v, deg| {
            let vv = Jet2::var_v(v, deg);
            let one = Jet2::constant(1.0, deg);
            let zero = Jet2::constant(0.0, deg);
            [[one, zero.clone()], [zero, vv]]
        }),
        "metric:y2_dy2" => Arc::new(|_u, v, deg| {
            let vv = Jet2::var_v(v, deg);
            let one = Jet2::constant(1.0, deg);
            let zero = Jet2::constant(0.0, deg);
            [[one, zero.clone()], [zero, vv.clone() * vv]]
        }),
        other => return Err(PseudoGeomError::BadTarget(other.into())),
    };
    Ok(MetricField2 {
        name: target.into(),
        rect,
        eval,
    })
}

#[derive(Debug, Clone)]
pub struct LcViolation {
    pub u: f64,
    pub v: f64,
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct LcVerdict {
    pub regular: bool,
    /// Minimum |d g(v,v)| over located degenerate points (infinite if none).
    pub min_margin: f64,
    pub threshold: f64,
    pub degenerate_points: usize,
    pub violations: Vec<LcViolation>,
}

/// LC-regularity: at every degeneracy of g the differential of v -> g(v,v)
/// must be nonzero on kernel vectors. Degeneracies are located as sign
/// changes and near-zero local minima of det g on an n x n grid, refined
/// by bisection / parabolic descent.
pub fn lc_regular_check(field: &MetricField2, n: usize) -> LcVerdict {
    let n = n.max(16);
    let (u0, u1) = field.rect.u;
    let (v0, v1) = field.rect.v;
    let du = (u1 - u0) / n as f64;
    let dv = (v1 - v0) / n as f64;
    let det_at = |u: f64, v: f64| -> f64 {
        let g = (field.eval)(u, v, 0);
        g[0][0].value() * g[1][1].value() - g[0][1].value() * g[0][1].value()
    };
    let mut dets = vec![0.0; (n + 1) * (n + 1)];
    let mut det_scale = 0.0f64;
    let mut dg_scale = 0.0f64;
    for j in 0..=n {
        for i in 0..=n {
            let (u, v) = (u0 + du * i as f64, v0 + dv * j as f64);
            dets[j * (n + 1) + i] = det_at(u, v);
            det_scale = det_scale.max(dets[j * (n + 1) + i].abs());
            if i % 8 == 0 && j % 8 == 0 {
                let g = (field.eval)(u, v, 1);
                for row in &g {
                    for e in row {
                        dg_scale = dg_scale
                            .max(e.derivative(1, 0).abs())
                            .max(e.derivative(0, 1).abs());
                    }
                }
            }
        }
    }
    let mut candidates: Vec<(f64, f64)> = Vec::new();
    // Sign changes along grid edges, refined by bisection.
    let bisect = |mut a: (f64, f64), mut b: (f64, f64)| {
        let mut fa = det_at(a.0, a.1);
        for _ in 0..60 {
            let mid = (0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1));
            let fm = det_at(mid.0, mid.1);
            if (fm < 0.0) == (fa < 0.0) {
                a = mid;
                fa = fm;
            } else {
                b = mid;
            }
        }
        (0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1))
    };
    for j in 0..=n {
        for i in 0..=n {
            let d00 = dets[j * (n + 1) + i];
            let (u, v) = (u0 + du * i as f64, v0 + dv * j as f64);
            if i < n {
                let d10 = dets[j * (n + 1) + i + 1];
                if (d00 < 0.0) != (d10 < 0.0) {
                    candidates.push(bisect((u, v), (u + du, v)));
                }
            }
            if j < n {
                let d01 = dets[(j + 1) * (n + 1) + i];
                if (d00 < 0.0) != (d01 < 0.0) {
                    candidates.push(bisect((u, v), (u, v + dv)));
                }
            }
        }
    }
    // Touching degeneracies: near-zero local minima of |det|, refined by
    // coordinate-wise parabolic descent.
    let cand_tol = det_scale.max(1e-300) * (8.0 / n as f64).powi(2);
    for j in 1..n {
        for i in 1..n {
            let d = dets[j * (n + 1) + i].abs();
            if d >= cand_tol {
                continue;
            }
            let neighbors = [
                dets[j * (n + 1) + i - 1].abs(),
                dets[j * (n + 1) + i + 1].abs(),
                dets[(j - 1) * (n + 1) + i].abs(),
                dets[(j + 1) * (n + 1) + i].abs(),
            ];
            if neighbors.iter().any(|&x| x < d) {
                continue;
            }
            let (mut u, mut v) = (u0 + du * i as f64, v0 + dv * j as f64);
            let (mut hu, mut hv) = (du, dv);
            for _ in 0..24 {
                // Parabolic vertex along u, then along v.
                let (fm, f0, fp) = (det_at(u - hu, v), det_at(u, v), det_at(u + hu, v));
                let denom = fm - 2.0 * f0 + fp;
                if denom.abs() > 1e-300 {
                    u += 0.5 * hu * (fm - fp) / denom;
                }
                let (gm, g0, gp) = (det_at(u, v - hv), det_at(u, v), det_at(u, v + hv));
                let denom = gm - 2.0 * g0 + gp;
                if denom.abs() > 1e-300 {
                    v += 0.5 * hv * (gm - gp) / denom;
                }
                hu *= 0.5;
                hv *= 0.5;
            }
            if u > u0 && u < u1 && v > v0 && v < v1 && det_at(u, v).abs() < cand_tol {
                candidates.push((u, v));
            }
        }
    }
    let threshold = 1e-3 * dg_scale.max(1e-300);
    let mut min_margin = f64::INFINITY;
    let mut violations = Vec::new();
    let degenerate_points = candidates.len();
    for (u, v) in candidates {
        let gjet = (field.eval)(u, v, 1);
        let g = [
            [gjet[0][0].value(), gjet[0][1].value()],
            [gjet[1][0].value(), gjet[1][1].value()],
        ];
        let sig = signature_at(
            &[g[0].to_vec(), g[1].to_vec()],
            1e-6 * (g[0][0].abs() + g[1][1].abs() + g[0][1].abs()).max(1e-300),
        );
        let kernel = if sig.kernel.is_empty() {
            // Use the eigenvector of the smallest |eigenvalue| as the
            // near-kernel direction.
            let (vals, vecs) = jacobi_eigen(&[g[0].to_vec(), g[1].to_vec()]);
            let k = if vals[0].abs() <= vals[1].abs() { 0 } else { 1 };
            vec![vecs[k].clone()]
        } else {
            sig.kernel
        };
        for vker in kernel {
            let quad = |comp: usize| -> f64 {
                let mut acc = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        let d = if comp == 0 {
                            gjet[i][j].derivative(1, 0)
                        } else {
                            gjet[i][j].derivative(0, 1)
                        };
                        acc += d * vker[i] * vker[j];
                    }
                }
                acc
            };
            let margin = quad(0).hypot(quad(1));
            min_margin = min_margin.min(margin);
            if margin < threshold {
                violations.push(LcViolation { u, v, margin });
            }
        }
    }
    LcVerdict {
        regular: violations.is_empty(),
        min_margin,
        threshold,
        degenerate_points,
        violations,
    }
}

#[derive(Debug, Clone)]
pub struct TransversalVerdict {
    pub transversal: bool,
    /// min |grad sigma| over the located zero set of sigma (infinite when
    /// sigma never vanishes: vacuously transversal).
    pub margin: f64,
    pub threshold: f64,
    pub zero_samples: usize,
}

/// LC-transversality of a hypersurface: 0 must be a regular value of
/// sigma = Q(nu_E) on the parameter domain.
pub fn lc_transversal_check(surface: &Surface, n: usize) -> Result<TransversalVerdict> {
    let n = n.max(16);
    let mut margin = f64::INFINITY;
    let mut grad_scale = 0.0f64;
    let mut zero_samples = 0usize;
    let mut max_delta = 0.0f64;
    for chart in 0..surface.charts.len() {
        let rect = surface.charts[chart].rect;
        let du = (rect.u.1 - rect.u.0) / n as f64;
        let dv = (rect.v.1 - rect.v.0) / n as f64;
        max_delta = max_delta.max(du).max(dv);
        let sample = |u: f64, v: f64| surface.hypersurface_data(chart, u, v);
        let mut sig = vec![0.0; (n + 1) * (n + 1)];
        for j in 0..=n {
            for i in 0..=n {
                let h = sample(rect.u.0 + du * i as f64, rect.v.0 + dv * j as f64)?;
                sig[j * (n + 1) + i] = h.sigma;
                grad_scale = grad_scale.max(h.grad_sigma.0.hypot(h.grad_sigma.1));
            }
        }
        let sig_scale = sig.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        let mut visit = |u: f64, v: f64| -> Result<()> {
            let h = sample(u, v)?;
            margin = margin.min(h.grad_sigma.0.hypot(h.grad_sigma.1));
            zero_samples += 1;
            Ok(())
        };
        for j in 0..=n {
            for i in 0..=n {
                let s00 = sig[j * (n + 1) + i];
                let (u, v) = (rect.u.0 + du * i as f64, rect.v.0 + dv * j as f64);
                // Exact (or near-exact) zeros at samples: lightlike bands.
                if s00.abs() <= 1e-12 * sig_scale.max(1e-300) {
                    visit(u, v)?;
                    continue;
                }
                // Sign changes along edges, refined by bisection on sigma.
                let refine = |a: (f64, f64), b: (f64, f64)| -> Result<(f64, f64)> {
                    let (mut a, mut b) = (a, b);
                    let mut fa = sample(a.0, a.1)?.sigma;
                    for _ in 0..60 {
                        let mid = (0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1));
                        let fm = sample(mid.0, mid.1)?.sigma;
                        if (fm < 0.0) == (fa < 0.0) {
                            a = mid;
                            fa = fm;
                        } else {
                            b = mid;
                        }
                    }
                    Ok((0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1)))
                };
                if i < n {
                    let s10 = sig[j * (n + 1) + i + 1];
                    if (s00 < 0.0) != (s10 < 0.0) {
                        let r = refine((u, v), (u + du, v))?;
                        visit(r.0, r.1)?;
                    }
                }
                if j < n {
                    let s01 = sig[(j + 1) * (n + 1) + i];
                    if (s00 < 0.0) != (s01 < 0.0) {
                        let r = refine((u, v), (u, v + dv))?;
                        visit(r.0, r.1)?;
                    }
                }
            }
        }
    }
    let threshold = grad_scale.max(1e-300) * (4.0 * max_delta).max(1e-6);
    Ok(TransversalVerdict {
        transversal: margin >= threshold || margin.is_infinite(),
        margin,
        threshold,
        zero_samples,
    })
}

// ---------------------------------------------------------------------------
// Curvature tensor
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CurvatureTensorField {
    pub g: [[f64; 2]; 2],
    /// christoffel[l][i][j] = Gamma^l_{ij}.
    pub christoffel: [[[f64; 2]; 2]; 2],
    /// riemann[l][k][i][j] = R_{lkij} (fully lowered).
    pub riemann: [[[[f64; 2]; 2]; 2]; 2],
    /// Gauss curvature K = R_{1212}/det g.
    pub gauss: f64,
    pub signature: (usize, usize),
    /// Q-orthonormal tangent frame (rows, in parameter coordinates).
    pub frame: [[f64; 2]; 2],
    pub epsilons: [f64; 2],
    /// mixed[r][s][i][j] = eps_r eps_s R(e_r, e_s, e_i, e_j) in the frame.
    pub mixed: [[[[f64; 2]; 2]; 2]; 2],
    pub symmetry_defect: f64,
    pub bianchi_defect: f64,
}

/// Intrinsic curvature of a 2D metric field at a nondegenerate point.
pub fn curvature_tensor(field: &MetricField2, u: f64, v: f64) -> Result<CurvatureTensorField> {
    let gj = (field.eval)(u, v, 2);
    let g = [
        [gj[0][0].value(), gj[0][1].value()],
        [gj[1][0].value(), gj[1][1].value()],
    ];
    let det = g[0][0] * g[1][1] - g[0][1] * g[0][1];
    let scale = g[0][0].abs() + g[1][1].abs() + g[0][1].abs();
    if det.abs() <= 1e-9 * scale * scale {
        return Err(PseudoGeomError::DegeneratePoint { u, v });
    }
    // Inverse metric as jets.
    let detj = gj[0][0].clone() * gj[1][1].clone() - gj[0][1].clone() * gj[0][1].clone();
    let invdet = detj.recip();
    let ginv = [
        [
            gj[1][1].clone() * invdet.clone(),
            -(gj[0][1].clone() * invdet.clone()),
        ],
        [
            -(gj[1][0].clone() * invdet.clone()),
            gj[0][0].clone() * invdet,
        ],
    ];
    let dg = |i: usize, j: usize, k: usize| -> Jet2 {
        // partial_k g_{ij} as a (deg-1) jet
        if k == 0 {
            gj[i][j].du()
        } else {
            gj[i][j].dv()
        }
    };
    // Gamma^l_{ij} as degree-1 jets.
    let mut gamma: Vec<Vec<Vec<Jet2>>> =
        vec![vec![vec![Jet2::constant(0.0, 1); 2]; 2]; 2];
    for l in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = Jet2::constant(0.0, 1);
                for m in 0..2 {
                    let term = dg(m, i, j) + dg(m, j, i) - dg(i, j, m);
                    let gin_trunc = truncate_deg1(&ginv[l][m]);
                    acc = acc + (gin_trunc * term).scale(0.5);
                }
                gamma[l][i][j] = acc;
            }
        }
    }
    // R^l_{kij} = d_i Gamma^l_{jk} - d_j Gamma^l_{ik}
    //           + Gamma^l_{im} Gamma^m_{jk} - Gamma^l_{jm} Gamma^m_{ik}.
    let dgamma = |l: usize, i: usize, j: usize, k: usize| -> f64 {
        if k == 0 {
            gamma[l][i][j].derivative(1, 0)
        } else {
            gamma[l][i][j].derivative(0, 1)
        }
    };
    let gval = |l: usize, i: usize, j: usize| gamma[l][i][j].value();
    let mut upper = [[[[0.0f64; 2]; 2]; 2]; 2];
    for l in 0..2 {
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut r = dgamma(l, j, k, i) - dgamma(l, i, k, j);
                    for m in 0..2 {
                        r += gval(l, i, m) * gval(m, j, k) - gval(l, j, m) * gval(m, i, k);
                    }
                    upper[l][k][i][j] = r;
                }
            }
        }
    }
    let mut riemann = [[[[0.0f64; 2]; 2]; 2]; 2];
    for l in 0..2 {
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut r = 0.0;
                    for m in 0..2 {
                        r += g[l][m] * upper[m][k][i][j];
                    }
                    riemann[l][k][i][j] = r;
                }
            }
        }
    }
    let r1212 = riemann[0][1][0][1];
    let gauss = r1212 / det;
    // Symmetry and first-Bianchi defects (relative to the curvature scale).
    let rscale = riemann
        .iter()
        .flatten()
        .flatten()
        .flatten()
        .fold(0.0f64, |m, &x| m.max(x.abs()))
        .max(1e-300);
    let mut symmetry_defect = 0.0f64;
    let mut bianchi_defect = 0.0f64;
    for l in 0..2 {
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    symmetry_defect = symmetry_defect
                        .max((riemann[l][k][i][j] + riemann[k][l][i][j]).abs())
                        .max((riemann[l][k][i][j] + riemann[l][k][j][i]).abs())
                        .max((riemann[l][k][i][j] - riemann[i][j][l][k]).abs());
                    bianchi_defect = bianchi_defect.max(
                        (riemann[l][k][i][j] + riemann[l][i][j][k] + riemann[l][j][k][i]).abs(),
                    );
                }
            }
        }
    }
    symmetry_defect /= rscale;
    bianchi_defect /= rscale;
    let sig = signature_at(
        &[g[0].to_vec(), g[1].to_vec()],
        1e-9 * scale.max(1e-300),
    );
    // Q-orthonormal frame by pivoted Gram-Schmidt on g.
    let quad = |x: &[f64; 2]| -> f64 {
        let mut acc = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                acc += g[i][j] * x[i] * x[j];
            }
        }
        acc
    };
    let gdot = |x: &[f64; 2], y: &[f64; 2]| -> f64 {
        let mut acc = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                acc += g[i][j] * x[i] * y[j];
            }
        }
        acc
    };
    let basis = [[1.0, 0.0], [0.0, 1.0]];
    let (first, secnd) = if quad(&basis[0]).abs() >= quad(&basis[1]).abs() {
        (0usize, 1usize)
    } else {
        (1, 0)
    };
    let q1 = quad(&basis[first]);
    let eps1 = q1.signum();
    let inv1 = q1.abs().sqrt().recip();
    let e1 = [basis[first][0] * inv1, basis[first][1] * inv1];
    let proj = eps1 * gdot(&basis[secnd], &e1);
    let mut w = [
        basis[secnd][0] - proj * e1[0],
        basis[secnd][1] - proj * e1[1],
    ];
    let q2 = quad(&w);
    if q2.abs() <= 1e-12 * scale {
        return Err(PseudoGeomError::DegeneratePoint { u, v });
    }
    let eps2 = q2.signum();
    let inv2 = q2.abs().sqrt().recip();
    w = [w[0] * inv2, w[1] * inv2];
    let frame = [e1, w];
    let epsilons = [eps1, eps2];
    let mut mixed = [[[[0.0f64; 2]; 2]; 2]; 2];
    for r in 0..2 {
        for s in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut acc = 0.0;
                    for a in 0..2 {
                        for b in 0..2 {
                            for c in 0..2 {
                                for d in 0..2 {
                                    acc += riemann[a][b][c][d]
                                        * frame[r][a]
                                        * frame[s][b]
                                        * frame[i][c]
                                        * frame[j][d];
                                }
                            }
                        }
                    }
                    mixed[r][s][i][j] = epsilons[r] * epsilons[s] * acc;
                }
            }
        }
    }
    let mut christoffel = [[[0.0f64; 2]; 2]; 2];
    for l in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                christoffel[l][i][j] = gval(l, i, j);
            }
        }
    }
    Ok(CurvatureTensorField {
        g,
        christoffel,
        riemann,
        gauss,
        signature: (sig.pos, sig.neg),
        frame,
        epsilons,
        mixed,
        symmetry_defect,
        bianchi_defect,
    })
}

fn truncate_deg1(j: &Jet2) -> Jet2 {
    let mut out = Jet2::constant(j.value(), 1);
    out = out + Jet2::var_u(0.0, 1).scale(j.derivative(1, 0))
        + Jet2::var_v(0.0, 1).scale(j.derivative(0, 1));
    out
}

// ---------------------------------------------------------------------------
// Theorema Egregium
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct EgregiumResult {
    pub k_intrinsic: f64,
    pub k_extrinsic: f64,
    pub discrepancy: f64,
}

/// Intrinsic vs extrinsic Gauss curvature via the eps-signed Gauss
/// equations: R_1212 = sum_r eps_r det(II_r), K = R_1212 / det g.
pub fn egregium_check(surface: &Surface, chart: usize, u: f64, v: f64) -> Result<EgregiumResult> {
    let k_int = curvature_tensor(&surface.metric_field(chart), u, v)?.gauss;
    let amb = &surface.ambient;
    let n = amb.dim();
    let f = surface.jets(chart, u, v, 2);
    let fu: Vec<f64> = f.iter().map(|j| j.derivative(1, 0)).collect();
    let fv: Vec<f64> = f.iter().map(|j| j.derivative(0, 1)).collect();
    let g = surface.induced_metric(chart, u, v);
    let det_g = g[0][0] * g[1][1] - g[0][1] * g[0][1];
    let gscale = g[0][0].abs() + g[1][1].abs() + g[0][1].abs();
    if det_g.abs() <= 1e-9 * gscale * gscale {
        return Err(PseudoGeomError::DegeneratePoint { u, v });
    }
    // Euclidean-orthonormal basis of the Q-normal space: the P-orthogonal
    // complement of span{S f_u, S f_v}.
    let rows = [amb.involution(&fu), amb.involution(&fv)];
    let mut ortho: Vec<Vec<f64>> = Vec::new();
    for r in &rows {
        let mut w = r.clone();
        for e in &ortho {
            let c = amb.p_dot(&w, e);
            for (wk, ek) in w.iter_mut().zip(e) {
                *wk -= c * ek;
            }
        }
        let nn = amb.p_dot(&w, &w).sqrt();
        if nn <= 1e-12 {
            return Err(PseudoGeomError::RankDeficient { chart, u, v });
        }
        for wk in &mut w {
            *wk /= nn;
        }
        ortho.push(w);
    }
    let mut normals_euc: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        let mut w = vec![0.0; n];
        w[k] = 1.0;
        for e in ortho.iter().chain(&normals_euc) {
            let c = amb.p_dot(&w, e);
            for (wk, ek) in w.iter_mut().zip(e) {
                *wk -= c * ek;
            }
        }
        let nn = amb.p_dot(&w, &w).sqrt();
        if nn > 1e-8 {
            for wk in &mut w {
                *wk /= nn;
            }
            normals_euc.push(w);
        }
        if normals_euc.len() == n - 2 {
            break;
        }
    }
    if normals_euc.len() != n - 2 {
        return Err(PseudoGeomError::RankDeficient { chart, u, v });
    }
    // Q-orthonormalize the normal basis with pivoting on |Q(w,w)|.
    let mut pool = normals_euc;
    let mut normals: Vec<(Vec<f64>, f64)> = Vec::new();
    while !pool.is_empty() {
        let (pick, _) = pool
            .iter()
            .enumerate()
            .map(|(k, w)| (k, amb.q_dot(w, w).abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty pool");
        let mut w = pool.swap_remove(pick);
        let qw = amb.q_dot(&w, &w);
        if qw.abs() <= 1e-10 {
            return Err(PseudoGeomError::DegeneratePoint { u, v });
        }
        let eps = qw.signum();
        let inv = qw.abs().sqrt().recip();
        for wk in &mut w {
            *wk *= inv;
        }
        for other in &mut pool {
            let c = eps * amb.q_dot(other, &w);
            for (ok, wk) in other.iter_mut().zip(&w) {
                *ok -= c * wk;
            }
        }
        normals.push((w, eps));
    }
    let second: Vec<Vec<f64>> = vec![
        f.iter().map(|j| j.derivative(2, 0)).collect(),
        f.iter().map(|j| j.derivative(1, 1)).collect(),
        f.iter().map(|j| j.derivative(0, 2)).collect(),
    ];
    let mut r1212 = 0.0;
    for (nr, eps) in &normals {
        let ii11 = amb.q_dot(&second[0], nr);
        let ii12 = amb.q_dot(&second[1], nr);
        let ii22 = amb.q_dot(&second[2], nr);
        r1212 += eps * (ii11 * ii22 - ii12 * ii12);
    }
    let k_ext = r1212 / det_g;
    Ok(EgregiumResult {
        k_intrinsic: k_int,
        k_extrinsic: k_ext,
        discrepancy: (k_int - k_ext).abs(),
    })
}

/// Max |K_int - K_ext| over `count` random nondegenerate parameters.
pub fn egregium_sweep(surface: &Surface, count: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_disc = 0.0f64;
    let mut done = 0usize;
    let mut attempts = 0usize;
    while done < count {
        attempts += 1;
        if attempts > 100 * count {
            return Err(PseudoGeomError::DegeneratePoint {
                u: f64::NAN,
                v: f64::NAN,
            });
        }
        let chart = rng.gen_range(0..surface.charts.len());
        let rect = surface.charts[chart].rect;
        let u = rng.gen_range(rect.u.0..rect.u.1);
        let v = rng.gen_range(rect.v.0..rect.v.1);
        let g = surface.induced_metric(chart, u, v);
        let det = g[0][0] * g[1][1] - g[0][1] * g[0][1];
        let scale = (g[0][0].abs() + g[1][1].abs() + g[0][1].abs()).max(1e-300);
        if det.abs() < 0.05 * scale * scale {
            continue;
        }
        match egregium_check(surface, chart, u, v) {
            Ok(r) => {
                max_disc = max_disc.max(r.discrepancy);
                done += 1;
            }
            Err(PseudoGeomError::DegeneratePoint { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(max_disc)
}

// ---------------------------------------------------------------------------
// Curves in the plane (for the R^{1,1} machinery)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum CurveKind {
    /// Circle of radius r; ccw = false traverses clockwise (inner boundary).
    Circle { r: f64, ccw: bool },
    /// Ellipse (a cos t, b sin t), counterclockwise.
    Ellipse { a: f64, b: f64 },
    /// r(t) = r (1 + amp cos(mode t)): smooth radial perturbation.
    Wobble { r: f64, amp: f64, mode: i32, ccw: bool },
}

impl CurveKind {
    pub fn eval<T: Smooth>(&self, t: &T) -> [T; 2] {
        match *self {
            CurveKind::Circle { r, ccw } => {
                let tt = if ccw { t.clone() } else { -t.clone() };
                [tt.clone().cos().scale(r), tt.sin().scale(r)]
            }
            CurveKind::Ellipse { a, b } => [t.clone().cos().scale(a), t.clone().sin().scale(b)],
            CurveKind::Wobble { r, amp, mode, ccw } => {
                let tt = if ccw { t.clone() } else { -t.clone() };
                let radius = (tt.clone().scale(mode as f64).cos().scale(amp) + t.lift(1.0))
                    .scale(r);
                [radius.clone() * tt.clone().cos(), radius * tt.sin()]
            }
        }
    }
}

/// A closed 1D boundary (possibly several components), each parametrized on
/// [0, 2 pi) with the enclosed domain on the left.
#[derive(Debug, Clone)]
pub struct Curve {
    pub name: String,
    pub ambient: AmbientSpace,
    pub components: Vec<CurveKind>,
}

#[derive(Debug, Clone)]
pub struct CurveSample {
    pub point: [f64; 2],
    pub tangent: [f64; 2],
    /// Outward unit normal (domain on the left of the tangent).
    pub nu: [f64; 2],
    pub sigma: f64,
    pub dsigma: f64,
    pub speed: f64,
    /// Q(tangent, tangent): the induced (1D) metric.
    pub q_tangent: f64,
    /// nu x nu' (angular velocity of the normal direction): its sign is the
    /// local degree of the Gauss map.
    pub dnu_cross: f64,
}

/// Pointwise curve package with analytic jets (sigma' included).
pub fn curve_sample(ambient: &AmbientSpace, kind: &CurveKind, s: f64) -> CurveSample {
    let t = Jet1::var(s, 3);
    let f = kind.eval(&t);
    let d1 = [f[0].d(), f[1].d()];
    let speed2 = d1[0].clone() * d1[0].clone() + d1[1].clone() * d1[1].clone();
    let inv_speed = speed2.clone().sqrt().recip();
    // nu = (t2, -t1)/|t'|: outward when the domain lies on the left.
    let nu = [
        d1[1].clone() * inv_speed.clone(),
        -(d1[0].clone() * inv_speed),
    ];
    let sigma = {
        let s0 = ambient.sign(0);
        let s1 = ambient.sign(1);
        (nu[0].clone() * nu[0].clone()).scale(s0) + (nu[1].clone() * nu[1].clone()).scale(s1)
    };
    let tv = [d1[0].c[0], d1[1].c[0]];
    let dnu_cross = nu[0].c[0] * nu[1].derivative(1) - nu[1].c[0] * nu[0].derivative(1);
    CurveSample {
        point: [f[0].c[0], f[1].c[0]],
        tangent: tv,
        nu: [nu[0].c[0], nu[1].c[0]],
        sigma: sigma.c[0],
        dsigma: sigma.derivative(1),
        speed: speed2.c[0].sqrt(),
        q_tangent: ambient.sign(0) * tv[0] * tv[0] + ambient.sign(1) * tv[1] * tv[1],
        dnu_cross,
    }
}

// ---------------------------------------------------------------------------
// Target parsing
// ---------------------------------------------------------------------------

fn split_target(target: &str) -> (&str, Vec<f64>) {
    match target.split_once(':') {
        None => (target, Vec::new()),
        Some((name, rest)) => {
            let args: Vec<f64> = rest
                .split(',')
                .filter_map(|a| a.trim().parse().ok())
                .collect();
            (name, args)
        }
    }
}

/// Catalog surface lookup, e.g. `sphere:1`, `ellipsoid:1,1.3,2.1`,
/// `torus:2,0.5`, `pseudosphere`, `graph:saddle`, `saddle4:0.7,0.4`,
/// `revolution:lightband`.
pub fn surface_target(target: &str, ambient: AmbientSpace) -> Result<Surface> {
    let (name, args) = split_target(target);
    match (name, args.as_slice()) {
        ("sphere", [r]) if *r > 0.0 => Surface::sphere(ambient, *r),
        ("ellipsoid", [a, b, c]) if *a > 0.0 && *b > 0.0 && *c > 0.0 => {
            Surface::ellipsoid(ambient, *a, *b, *c)
        }
        ("torus", [big, small]) if *small > 0.0 && *big > *small => {
            Surface::torus(ambient, *big, *small)
        }
        ("pseudosphere", []) => Surface::pseudosphere(ambient),
        ("graph", []) if target == "graph:saddle" => Surface::saddle(ambient),
        ("saddle4", [a, b]) => Surface::saddle4(ambient, *a, *b),
        ("revolution", []) if target == "revolution:lightband" => {
            Surface::revolution_lightband(ambient)
        }
        _ => Err(PseudoGeomError::BadTarget(target.into())),
    }
}

/// Catalog boundary-curve lookup in R^{1,1}: `disc:R`, `annulus:R,r`,
/// `ellipse:a,b`, `wobble:R,amp,mode`.
pub fn curve_target(target: &str) -> Result<Curve> {
    let ambient = AmbientSpace { p: 1, q: 1 };
    let (name, args) = split_target(target);
    let components = match (name, args.as_slice()) {
        ("disc", [r]) if *r > 0.0 => vec![CurveKind::Circle { r: *r, ccw: true }],
        ("annulus", [router, rinner]) if *rinner > 0.0 && *router > *rinner => vec![
            CurveKind::Circle {
                r: *router,
                ccw: true,
            },
            CurveKind::Circle {
                r: *rinner,
                ccw: false,
            },
        ],
        ("ellipse", [a, b]) if *a > 0.0 && *b > 0.0 => {
            vec![CurveKind::Ellipse { a: *a, b: *b }]
        }
        ("wobble", [r, amp, mode]) if *r > 0.0 => vec![CurveKind::Wobble {
            r: *r,
            amp: *amp,
            mode: *mode as i32,
            ccw: true,
        }],
        _ => return Err(PseudoGeomError::BadTarget(target.into())),
    };
    Ok(Curve {
        name: target.into(),
        ambient,
        components,
    })
}

/// Closed catalog surfaces usable for Gauss-Bonnet sweeps.
pub fn catalog_closed_surfaces() -> &'static [&'static str] {
    &["sphere:1", "ellipsoid:1,1.3,2.1", "torus:2,0.5"]
}

/// All 3-dimensional catalog surfaces (LC-check sweeps).
pub fn catalog_surfaces_3d() -> &'static [&'static str] {
    &[
        "sphere:1",
        "ellipsoid:1,1.3,2.1",
        "torus:2,0.5",
        "pseudosphere",
        "graph:saddle",
        "revolution:lightband",
    ]
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn r21() -> AmbientSpace {
        AmbientSpace { p: 2, q: 1 }
    }
    fn r30() -> AmbientSpace {
        AmbientSpace { p: 3, q: 0 }
    }

    #[test]
    fn signature_examples() {
        let s = signature_at(&[vec![1.0, 0.0], vec![0.0, 0.0]], 1e-9);
        assert_eq!((s.pos, s.neg, s.kernel_dim), (1, 0, 1));
        assert!((s.kernel[0][1].abs() - 1.0).abs() < 1e-12);
        let s = signature_at(&[vec![1.0, 0.0], vec![0.0, -1.0]], 1e-9);
        assert_eq!((s.pos, s.neg, s.kernel_dim), (1, 1, 0));
        // Degenerate tangent of the unit circle in R^{1,1} at theta = pi/4.
        let amb = AmbientSpace { p: 1, q: 1 };
        let kind = CurveKind::Circle { r: 1.0, ccw: true };
        let cs = curve_sample(&amb, &kind, PI / 4.0);
        assert!(cs.q_tangent.abs() < 1e-12, "Q(t,t) = {}", cs.q_tangent);
        // Q(t,t) = -cos 2 theta along the circle.
        let cs = curve_sample(&amb, &kind, 0.3);
        assert!((cs.q_tangent + (0.6f64).cos()).abs() < 1e-12);
    }

    #[test]
    fn sylvester_congruence_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = [1.0, -1.0, 0.0, 2.0];
        for _ in 0..25 {
            // Random invertible A (diagonally dominated to stay invertible).
            let n = 4;
            let mut a = vec![vec![0.0; n]; n];
            for (i, row) in a.iter_mut().enumerate() {
                for (j, e) in row.iter_mut().enumerate() {
                    *e = rng.gen_range(-0.4..0.4) + if i == j { 1.5 } else { 0.0 };
                }
            }
            // B = A^T D A.
            let mut b = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    for (k, dk) in d.iter().enumerate() {
                        b[i][j] += a[k][i] * dk * a[k][j];
                    }
                }
            }
            let s = signature_at(&b, 1e-9);
            assert_eq!((s.pos, s.neg, s.kernel_dim), (2, 1, 1));
        }
    }

    #[test]
    fn sphere_hypersurface_values() {
        let s = Surface::sphere(r21(), 1.0).expect("sphere");
        // Near the north pole: nu = (0,0,1), sigma = -1, K_E = 1.
        let h = s.hypersurface_data(0, 1e-4, 0.7).expect("sample");
        assert!((h.nu[2] - 1.0).abs() < 1e-7, "nu = {:?}", h.nu);
        assert!((h.sigma + 1.0).abs() < 1e-7);
        assert!((h.k_e - 1.0).abs() < 1e-9);
        // Equator point (1, 0, 0): sigma = +1, K_E = 1, outward normal.
        let h = s.hypersurface_data(0, PI / 2.0, 0.0).expect("sample");
        assert!((h.nu[0] - 1.0).abs() < 1e-12);
        assert!((h.sigma - 1.0).abs() < 1e-12);
        assert!((h.k_e - 1.0).abs() < 1e-12);
        assert!((h.da_e - 1.0).abs() < 1e-12); // sin(pi/2) = 1
        // P(nu,nu) = 1 and P-orthogonality to the tangent plane.
        let f = s.jets(0, 1.1, 2.3, 1);
        let h = s.hypersurface_data(0, 1.1, 2.3).expect("sample");
        let fu: Vec<f64> = f.iter().map(|j| j.derivative(1, 0)).collect();
        let fv: Vec<f64> = f.iter().map(|j| j.derivative(0, 1)).collect();
        assert!((r21().p_dot(&h.nu, &h.nu) - 1.0).abs() < 1e-12);
        assert!(r21().p_dot(&h.nu, &fu).abs() < 1e-10);
        assert!(r21().p_dot(&h.nu, &fv).abs() < 1e-10);
        // South cap outward orientation: nu = (0,0,-1) at the south pole.
        let h = s.hypersurface_data(1, 1e-4, 0.2).expect("sample");
        assert!((h.nu[2] + 1.0).abs() < 1e-7);
        assert!((h.sigma + 1.0).abs() < 1e-7);
    }

    #[test]
    fn ellipsoid_pole_curvature() {
        // (a,b,c) = (1,1,2) near (0,0,2): K_E = c^2/(a^2 b^2) = 4, sigma = -1.
        let s = Surface::ellipsoid(r21(), 1.0, 1.0, 2.0).expect("ellipsoid");
        let h = s.hypersurface_data(0, 1e-4, 0.0).expect("sample");
        assert!((h.k_e - 4.0).abs() < 1e-6, "K_E = {}", h.k_e);
        assert!((h.sigma + 1.0).abs() < 1e-7);
    }

    #[test]
    fn induced_metric_saddle_origin() {
        let s = Surface::saddle(r21()).expect("saddle");
        let g = s.induced_metric(0, 0.0, 0.0);
        assert!((g[0][0] - 1.0).abs() < 1e-14 && (g[1][1] - 1.0).abs() < 1e-14);
        assert!(g[0][1].abs() < 1e-14);
    }

    #[test]
    fn pseudosphere_signature_and_curvature() {
        let s = Surface::pseudosphere(r21()).expect("pseudosphere");
        let ct = curvature_tensor(&s.metric_field(0), 0.25, 1.3).expect("curvature");
        assert_eq!(ct.signature, (1, 1));
        assert!((ct.gauss - 1.0).abs() < 1e-9, "K = {}", ct.gauss);
    }

    #[test]
    fn hyperbolic_plane_curvature() {
        // (du^2 + dv^2)/v^2 on a strip: K = -1, symmetries and Bianchi hold.
        let field = MetricField2 {
            name: "hyperbolic".into(),
            rect: Chart2 {
                u: (-1.0, 1.0),
                v: (0.5, 3.0),
                periodic_u: false,
                periodic_v: false,
            },
            eval: Arc::new(|_u, v, deg| {
                let vv = Jet2::var_v(v, deg);
                let w = (vv.clone() * vv).recip();
                let zero = Jet2::constant(0.0, deg);
                [[w.clone(), zero.clone()], [zero, w]]
            }),
        };
        for &(u, v) in &[(0.0, 1.0), (0.4, 2.2), (-0.7, 0.8)] {
            let ct = curvature_tensor(&field, u, v).expect("curvature");
            assert!((ct.gauss + 1.0).abs() < 1e-9, "K = {} at ({u},{v})", ct.gauss);
            assert!(ct.symmetry_defect < 1e-9 && ct.bianchi_defect < 1e-9);
            assert_eq!(ct.signature, (2, 0));
            assert_eq!(ct.epsilons, [1.0, 1.0]);
        }
    }

    #[test]
    fn sphere_intrinsic_curvature() {
        let s = Surface::sphere(r30(), 1.0).expect("sphere");
        let ct = curvature_tensor(&s.metric_field(0), 1.1, 0.4).expect("curvature");
        assert!((ct.gauss - 1.0).abs() < 1e-9, "K = {}", ct.gauss);
        assert_eq!(ct.signature, (2, 0));
    }

    #[test]
    fn egregium_pointwise_examples() {
        let s = Surface::sphere(r30(), 1.0).expect("sphere");
        let e = egregium_check(&s, 0, 0.9, 1.7).expect("egregium");
        assert!((e.k_intrinsic - 1.0).abs() < 1e-9 && e.discrepancy < 1e-9);

        let s = Surface::pseudosphere(r21()).expect("pseudosphere");
        let e = egregium_check(&s, 0, -0.4, 2.0).expect("egregium");
        assert!((e.k_intrinsic - 1.0).abs() < 1e-9 && e.discrepancy < 1e-9);

        // Saddle z = u^2 - v^2 with timelike z: K(0,0) = +4.
        let s = Surface::saddle(r21()).expect("saddle");
        let e = egregium_check(&s, 0, 0.0, 0.0).expect("egregium");
        assert!((e.k_extrinsic - 4.0).abs() < 1e-10, "K_ext = {}", e.k_extrinsic);
        assert!(e.discrepancy < 1e-9, "disc = {}", e.discrepancy);

        // R^{2,2} saddle (u, v, a uv, b(u^2-v^2)): K(0,0) = a^2 + 4 b^2.
        let s = Surface::saddle4(AmbientSpace { p: 2, q: 2 }, 0.7, 0.4).expect("saddle4");
        let e = egregium_check(&s, 0, 0.0, 0.0).expect("egregium");
        let want = 0.7f64.powi(2) + 4.0 * 0.4f64.powi(2);
        assert!(
            (e.k_extrinsic - want).abs() < 1e-10,
            "K_ext = {} vs {}",
            e.k_extrinsic,
            want
        );
        assert!(e.discrepancy < 1e-9, "disc = {}", e.discrepancy);
    }

    #[test]
    fn egregium_random_sweeps() {
        let cases: Vec<Surface> = vec![
            Surface::sphere(r30(), 1.0).unwrap(),
            Surface::sphere(r21(), 1.0).unwrap(),
            Surface::pseudosphere(r21()).unwrap(),
            Surface::saddle(r21()).unwrap(),
            Surface::saddle4(AmbientSpace { p: 2, q: 2 }, 0.7, 0.4).unwrap(),
            Surface::torus(r21(), 2.0, 0.5).unwrap(),
        ];
        for s in &cases {
            let disc = egregium_sweep(s, 200, 20260823).expect("sweep");
            assert!(disc < 1e-6, "{}: max discrepancy {disc:.3e}", s.name);
        }
    }

    #[test]
    fn lc_regular_catalog_metrics() {
        let pass = metric_target("metric:y_dy2").expect("metric");
        let verdict = lc_regular_check(&pass, 256);
        assert!(verdict.regular, "verdict {verdict:?}");
        assert!((verdict.min_margin - 1.0).abs() < 1e-6);

        let fail = metric_target("metric:y2_dy2").expect("metric");
        let verdict = lc_regular_check(&fail, 256);
        assert!(!verdict.regular);
        let worst = verdict
            .violations
            .iter()
            .min_by(|a, b| a.margin.total_cmp(&b.margin))
            .expect("violation");
        assert!(worst.v.abs() < 1e-3, "violation at v = {}", worst.v);
    }

    #[test]
    fn transversality_catalog() {
        let s = Surface::sphere(r21(), 1.0).expect("sphere");
        let v = lc_transversal_check(&s, 96).expect("check");
        assert!(v.transversal, "{v:?}");
        assert!(v.zero_samples > 0);

        let s = Surface::sphere(r30(), 1.0).expect("sphere");
        let v = lc_transversal_check(&s, 96).expect("check");
        assert!(v.transversal && v.margin.is_infinite(), "{v:?}");

        let s = Surface::torus(r21(), 2.0, 0.5).expect("torus");
        let v = lc_transversal_check(&s, 96).expect("check");
        assert!(v.transversal, "{v:?}");

        let s = Surface::revolution_lightband(r21()).expect("lightband");
        let v = lc_transversal_check(&s, 96).expect("check");
        assert!(!v.transversal, "{v:?}");
        assert!(v.margin < v.threshold);
    }

    #[test]
    fn transversality_agrees_with_lc_regularity() {
        for target in catalog_surfaces_3d() {
            let s = surface_target(target, r21()).expect("target");
            let tv = lc_transversal_check(&s, 96).expect("check");
            let mut lc_all = true;
            for chart in 0..s.charts.len() {
                let verdict = lc_regular_check(&s.metric_field(chart), 96);
                lc_all &= verdict.regular;
            }
            assert_eq!(
                tv.transversal, lc_all,
                "{target}: transversal {} vs LC-regular {}",
                tv.transversal, lc_all
            );
        }
    }

    #[test]
    fn cap_partition_of_unity() {
        let s = Surface::sphere(r21(), 1.0).expect("sphere");
        for k in 0..=20 {
            let theta = 0.25 * PI + 0.5 * PI * k as f64 / 20.0;
            let wn = s.chart_weight(0, theta);
            let ws = s.chart_weight(1, PI - theta);
            assert!((wn + ws - 1.0).abs() < 1e-12, "PoU at theta = {theta}");
        }
    }

    #[test]
    fn bad_targets_rejected() {
        assert!(surface_target("sphere:-1", r21()).is_err());
        assert!(surface_target("blob:1", r21()).is_err());
        assert!(curve_target("disc").is_err());
        assert!(metric_target("metric:nope").is_err());
        assert!(Surface::saddle4(r21(), 1.0, 1.0).is_err());
    }
}
