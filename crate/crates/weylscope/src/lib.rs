//! Numerical toolkit for curvature measures of submanifolds of the
//! pseudo-Euclidean spaces R^{p,q}.
//!
//! The library is organized bottom-up:
//!
//! * [`specfun`] — Gamma/Beta, sine-power integrals, ball volumes, exact
//!   half-integer arithmetic and exact quarter-turn phases.
//! * [`quad`] — adaptive Gauss-Kronrod quadrature with compensated summation.
//! * [`jet`] — truncated Taylor (jet) arithmetic in one and two variables,
//!   used to get analytic derivatives of chart maps and profile functions.
//! * [`homdist`] — homogeneous distributions on the line (x_+^s, x_-^s,
//!   delta derivatives, the chi families), finite-part pairing, residues and
//!   the Fourier table.
//! * [`pushforward`] — coarea pushforward profiles h(t) = \int_{sigma=t} F/|grad sigma|
//!   over 1D and 2D parameter domains, and pairing distributions against them.
//! * [`pseudogeom`] — R^{p,q} linear algebra, parametric curves/surfaces,
//!   induced metrics, light-cone regularity/transversality checks, curvature
//!   tensors and the signed Gauss equations.
//! * [`lkmeasures`] — Lipschitz-Killing densities, Gauss-Bonnet for
//!   light-cone-transversal hypersurfaces, the R^{1,1} intersection count,
//!   tube volumes and the metric-scaling law.
//! * [`verifysuite`] — self-contained identity suites (J-integral, Weyl
//!   lemma, residue/Fourier/evaluation tables).
//! * [`cli`] — key=value run configuration, dispatch and report output.

pub mod cli;
pub mod homdist;
pub mod jet;
pub mod lkmeasures;
pub mod pseudogeom;
pub mod pushforward;
pub mod quad;
pub mod specfun;
pub mod verifysuite;

pub use num_complex::Complex64;
