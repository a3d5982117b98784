//! Mode-wise analysis of the linearized system.
//!
//! For a Fourier mode of radius `r = |xi|` the compressible pair `(a_hat, m_hat)`,
//! `m = Lambda^{-1} div u`, evolves under
//!
//! ```text
//! A(r) = [[0, -r], [c r^{2s*-1}, -lambda]]
//! ```
//!
//! with damping `lambda` and coupling `c = kappa rho_bar` (both one when normalized),
//! while the rotational part of `u` is purely damped. The eigenvalues are
//! `-lambda/2 +- sqrt(lambda^2 - 4 c r^{2s*}) / 2`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

/// Discriminant tolerance below which the double root is used.
const DEGENERATE_TOL: f64 = 1e-14;

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn max_abs_diff(a: &Mat2, b: &Mat2) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

/// The 2x2 system of a single Fourier mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSystem {
    pub xi_norm: f64,
    pub s_star: f64,
    pub damping: f64,
    pub coupling: f64,
}

/// Eigenvalues of a mode matrix. `lambda1` carries the `+` branch of the square root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub lambda1: Complex64,
    pub lambda2: Complex64,
    pub degenerate: bool,
}

impl EigenPair {
    pub fn is_real(&self) -> bool {
        self.lambda1.im == 0.0 && self.lambda2.im == 0.0
    }
}

impl ModeSystem {
    /// Normalized system (`lambda = kappa = rho_bar = 1`).
    pub fn new(xi_norm: f64, s_star: f64) -> Self {
        Self::with_coefficients(xi_norm, s_star, 1.0, 1.0)
    }

    pub fn with_coefficients(xi_norm: f64, s_star: f64, damping: f64, coupling: f64) -> Self {
        Self {
            xi_norm,
            s_star,
            damping,
            coupling,
        }
    }

    /// `c r^{2s*}`, the determinant of the mode matrix.
    pub fn stiffness(&self) -> f64 {
        if self.xi_norm == 0.0 {
            0.0
        } else {
            self.coupling * self.xi_norm.powf(2.0 * self.s_star)
        }
    }

    /// Mode matrix; the lower-left entry is defined as zero at `r = 0`.
    pub fn matrix(&self) -> Mat2 {
        let r = self.xi_norm;
        let lower = if r == 0.0 {
            0.0
        } else {
            self.coupling * r.powf(2.0 * self.s_star - 1.0)
        };
        [[0.0, -r], [lower, -self.damping]]
    }

    pub fn eigenvalues(&self) -> EigenPair {
        let mu = -0.5 * self.damping;
        let k = self.stiffness();
        // lambda^2 - 4k; scaled so the degeneracy test reads 4 r^{2s*} = 1 when normalized
        let rel = 1.0 - 4.0 * k / (self.damping * self.damping);
        if rel.abs() <= DEGENERATE_TOL {
            let l = Complex64::new(mu, 0.0);
            return EigenPair {
                lambda1: l,
                lambda2: l,
                degenerate: true,
            };
        }
        if rel > 0.0 {
            let root = 0.5 * self.damping * rel.sqrt();
            // Product of the roots is k; avoids cancellation in mu + root for small k.
            let l2 = mu - root;
            let l1 = if k == 0.0 { 0.0 } else { k / l2 };
            EigenPair {
                lambda1: Complex64::new(l1, 0.0),
                lambda2: Complex64::new(l2, 0.0),
                degenerate: false,
            }
        } else {
            let im = 0.5 * self.damping * (-rel).sqrt();
            EigenPair {
                lambda1: Complex64::new(mu, im),
                lambda2: Complex64::new(mu, -im),
                degenerate: false,
            }
        }
    }

    /// `exp(t A)` from the spectral decomposition `A = mu I + (A - mu I)`, where
    /// `(A - mu I)^2 = delta^2 I` and the eigenvalues are `mu +- delta`:
    /// `exp(tA) = e^{mu t} (cosh(delta t) I + sinh(delta t)/delta (A - mu I))`.
    /// The double root `delta = 0` reduces to `e^{mu t} (I + t (A - mu I))`.
    pub fn propagator(&self, t: f64) -> Result<Mat2> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidParameter(format!("propagation time must be >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(IDENTITY);
        }
        let a = self.matrix();
        let eig = self.eigenvalues();
        let mu = -0.5 * self.damping;
        let (c, s) = if eig.degenerate {
            let e = (mu * t).exp();
            (Complex64::new(e, 0.0), Complex64::new(e * t, 0.0))
        } else {
            let delta = 0.5 * (eig.lambda1 - eig.lambda2);
            let z = delta * t;
            if z.norm() < 1e-2 {
                // Taylor series of cosh(z) and sinh(z)/z; truncation below 1e-22.
                let z2 = z * z;
                let cosh = 1.0 + z2 / 2.0 * (1.0 + z2 / 12.0 * (1.0 + z2 / 30.0 * (1.0 + z2 / 56.0)));
                let sinhc = 1.0 + z2 / 6.0 * (1.0 + z2 / 20.0 * (1.0 + z2 / 42.0 * (1.0 + z2 / 72.0)));
                let e = (mu * t).exp();
                (cosh * e, sinhc * t * e)
            } else {
                let e1 = (eig.lambda1 * t).exp();
                let e2 = (eig.lambda2 * t).exp();
                ((e1 + e2) * 0.5, (e1 - e2) / (2.0 * delta))
            }
        };
        // Real combination; imaginary parts cancel for conjugate roots.
        let (c, s) = (c.re, s.re);
        let shifted = [[a[0][0] - mu, a[0][1]], [a[1][0], a[1][1] - mu]];
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = s * shifted[i][j] + if i == j { c } else { 0.0 };
            }
        }
        Ok(out)
    }
}

/// Closed-form eigenvalues of the normalized mode matrix.
pub fn eigenvalues(xi_norm: f64, s_star: f64) -> EigenPair {
    ModeSystem::new(xi_norm, s_star).eigenvalues()
}

/// `exp(t A(xi))` of the normalized mode matrix.
pub fn propagator(xi_norm: f64, s_star: f64, t: f64) -> Result<Mat2> {
    ModeSystem::new(xi_norm, s_star).propagator(t)
}

/// Decay factor of the rotational part, `exp(-t)`.
pub fn vorticity_decay(t: f64) -> f64 {
    (-t).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Low,
    High,
}

/// One row of an asymptotic table.
///
/// Low regime: `first = lambda1 / (-r^{2s*})`, `second = lambda2 / (-1)`.
/// High regime: `first = Re lambda / (-1/2)`, `second = |Im lambda| / r^{s*}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticRow {
    pub xi_norm: f64,
    pub first: f64,
    pub second: f64,
}

/// Ratios of the eigenvalues to their low- or high-frequency equivalents over
/// `|xi| in {1e-1, ..., 1e-6}` (low) or `{10, ..., 1e6}` (high).
pub fn asymptotic_check(s_star: f64, regime: Regime) -> Vec<AsymptoticRow> {
    let exponents: Vec<i32> = match regime {
        Regime::Low => (1..=6).map(|e| -e).collect(),
        Regime::High => (1..=6).collect(),
    };
    exponents
        .into_iter()
        .map(|e| {
            let r = 10f64.powi(e);
            let eig = eigenvalues(r, s_star);
            match regime {
                Regime::Low => AsymptoticRow {
                    xi_norm: r,
                    first: eig.lambda1.re / -r.powf(2.0 * s_star),
                    second: -eig.lambda2.re,
                },
                Regime::High => AsymptoticRow {
                    xi_norm: r,
                    first: eig.lambda1.re / -0.5,
                    second: eig.lambda1.im.abs() / r.powf(s_star),
                },
            }
        })
        .collect()
}

/// Largest `c` with `max Re lambda(r) <= -c r^{2s*} / (1 + r^{2s*})` over the given radii.
pub fn dissipation_constant(s_star: f64, radii: &[f64]) -> f64 {
    radii
        .iter()
        .filter(|&&r| r > 0.0)
        .map(|&r| {
            let eig = eigenvalues(r, s_star);
            let top = eig.lambda1.re.max(eig.lambda2.re);
            let w = r.powf(2.0 * s_star);
            -top * (1.0 + w) / w
        })
        .fold(f64::INFINITY, f64::min)
}

/// `n` log-spaced radii in `[lo, hi]`.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Radial initial density profile `|a0_hat(xi)| = |xi|^{-sigma1 - d/2}` on `|xi| <= cutoff`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayProfile {
    pub dim: usize,
    pub sigma1: f64,
    pub cutoff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    /// Relative change between successive node doublings that stops refinement.
    pub rel_tol: f64,
    pub initial_nodes: usize,
    pub max_nodes: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-3,
            initial_nodes: 256,
            max_nodes: 1 << 20,
        }
    }
}

/// `(t, ||Lambda^sigma a(t)||_{L^2}, fractional-heat reference)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayPoint {
    pub t: f64,
    pub norm: f64,
    pub reference: f64,
}

impl DecayPoint {
    pub const CSV_HEADER: &'static str = "t,norm,reference_norm";

    pub fn to_csv_row(&self) -> String {
        format!("{},{:e},{:e}", self.t, self.norm, self.reference)
    }
}

/// Surface measure of the unit sphere in `R^d`, `2 pi^{d/2} / Gamma(d/2)`.
fn sphere_area(dim: usize) -> f64 {
    // Gamma(d/2) by recursion from Gamma(1/2) = sqrt(pi), Gamma(1) = 1.
    let mut gamma = if dim.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut x = if dim.is_multiple_of(2) { 1.0 } else { 0.5 };
    while x < dim as f64 / 2.0 - 1e-12 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(dim as f64 / 2.0) / gamma
}

/// `||Lambda^sigma a(t)||_{L^2(R^d)}` for the linear flow started from `(a0, m0 = 0)`
/// with the radial profile `profile`, and the same norm for `exp(-t Lambda^{2s*}) a0`.
///
/// In log-radius `v = ln r` the integrand is `r^{2(sigma - sigma1)} |P_aa(r, t)|^2`.
/// Nodes span `[r_lo, cutoff]` with `r_lo <= 1e-8` pushed down until
/// `t r_lo^{2s*} <= 1e-8`; below `r_lo` the propagator is one to that accuracy and the
/// tail `r_lo^beta / beta`, `beta = 2(sigma - sigma1)`, is added in closed form.
/// Trapezoidal nodes are doubled until the result changes by less than `rel_tol`.
pub fn linear_decay_quadrature(
    profile: &DecayProfile,
    s_star: f64,
    sigma: f64,
    t_grid: &[f64],
    options: &QuadratureOptions,
) -> Result<Vec<DecayPoint>> {
    let beta = 2.0 * (sigma - profile.sigma1);
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "profile is not integrable: need sigma > sigma1, got sigma = {sigma}, sigma1 = {}",
            profile.sigma1
        )));
    }
    if !(s_star > 0.0 && s_star < 1.0) {
        return Err(Error::InvalidParameter(format!("s* must lie in (0, 1), got {s_star}")));
    }
    if !(profile.cutoff > 0.0) {
        return Err(Error::InvalidParameter("profile cutoff must be positive".into()));
    }
    let measure = sphere_area(profile.dim) / (2.0 * PI).powi(profile.dim as i32);
    t_grid
        .iter()
        .map(|&t| {
            if !(t >= 0.0) {
                return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
            }
            let lo_heat = (1e-8 / t.max(1.0)).powf(1.0 / (2.0 * s_star));
            let r_lo = lo_heat.min(1e-8).min(0.5 * profile.cutoff);
            let tail = r_lo.powf(beta) / beta;
            let norm_sq = adaptive_log_trapezoid(r_lo, profile.cutoff, options, |r| {
                let p = propagator(r, s_star, t).map(|m| m[0][0]).unwrap_or(f64::NAN);
                r.powf(beta) * p * p
            })?;
            let heat_sq = adaptive_log_trapezoid(r_lo, profile.cutoff, options, |r| {
                let h = (-t * r.powf(2.0 * s_star)).exp();
                r.powf(beta) * h * h
            })?;
            Ok(DecayPoint {
                t,
                norm: (measure * (norm_sq + tail)).sqrt(),
                reference: (measure * (heat_sq + tail)).sqrt(),
            })
        })
        .collect()
}

fn adaptive_log_trapezoid<F: Fn(f64) -> f64>(
    lo: f64,
    hi: f64,
    options: &QuadratureOptions,
    integrand: F,
) -> Result<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let rule = |n: usize| -> f64 {
        let h = (b - a) / n as f64;
        let inner: f64 = (1..n).map(|i| integrand((a + h * i as f64).exp())).sum();
        h * (inner + 0.5 * (integrand(lo) + integrand(hi)))
    };
    let mut n = options.initial_nodes.max(2);
    let mut prev = rule(n);
    while n < options.max_nodes {
        n *= 2;
        let next = rule(n);
        if !next.is_finite() {
            return Err(Error::NonFinite("radial quadrature".into()));
        }
        if (next - prev).abs() <= options.rel_tol * next.abs() {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::NonFinite(format!(
        "radial quadrature did not converge with {} nodes",
        options.max_nodes
    )))
}

/// One row of an eigenvalue scan: `xi,re1,im1,re2,im2`.
pub fn eigen_scan_rows(s_star: f64, radii: &[f64]) -> Vec<String> {
    radii
        .iter()
        .map(|&r| {
            let e = eigenvalues(r, s_star);
            format!(
                "{:e},{:e},{:e},{:e},{:e}",
                r, e.lambda1.re, e.lambda1.im, e.lambda2.re, e.lambda2.im
            )
        })
        .collect()
}

pub const EIGEN_SCAN_HEADER: &str = "xi,re1,im1,re2,im2";
