//! Periodic spectral grid, Fourier transforms and Fourier multipliers.
//!
//! Fields live on a periodic box `[0, L_0) x [0, L_1)` sampled at `N_i` points per
//! axis and are stored row-major (axis 0 slowest). Spectra are stored in FFT order:
//! storage index `i` on an axis of `N` points carries the integer wavenumber
//! `k = i` for `i < N/2` and `k = i - N` otherwise, so `k` ranges over
//! `[-N/2, N/2)` and the physical wavenumber is `xi = 2 pi k / L`.
//!
//! The forward transform is normalized so that the returned coefficients `c_k`
//! satisfy `f(x) = sum_k c_k exp(i xi_k . x)`. The zero coefficient is the mean.
//!
//! The homogeneous operators used throughout (negative powers of `|xi|`) are only
//! defined modulo constants on the torus. Mean-zero fields stand in for that
//! quotient: every symbol that is singular at the origin requires a mean-zero
//! input and returns a mean-zero output.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Wavevector or position; the second entry is unused (zero) on 1D grids.
pub type Wavevector = [f64; 2];

/// Mean coefficients below this fraction of the spectral norm count as zero.
const MEAN_ZERO_TOL: f64 = 1e-12;

#[derive(Clone)]
struct AxisPlan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Periodic box descriptor with its wavenumber lattice and FFT plans.
#[derive(Clone)]
pub struct SpectralGrid {
    dim: usize,
    lengths: Vec<f64>,
    modes: Vec<usize>,
    wavenumbers: Vec<Vec<f64>>,
    plans: Vec<AxisPlan>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("dim", &self.dim)
            .field("lengths", &self.lengths)
            .field("modes", &self.modes)
            .finish()
    }
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.lengths == other.lengths && self.modes == other.modes
    }
}

/// Integer wavenumber carried by storage index `i` on an axis of `n` points.
fn integer_wavenumber(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl SpectralGrid {
    /// Builds a grid. `lengths` and `modes` carry one entry per axis.
    pub fn new(dim: usize, lengths: &[f64], modes: &[usize]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if lengths.len() != dim || modes.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} lengths and mode counts, got {} and {}",
                lengths.len(),
                modes.len()
            )));
        }
        for &l in lengths {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidGrid(format!("box length must be positive, got {l}")));
            }
        }
        for &n in modes {
            if n % 2 != 0 || n < 8 {
                return Err(Error::InvalidGrid(format!(
                    "mode counts must be even and at least 8, got {n}"
                )));
            }
        }
        let mut planner = FftPlanner::new();
        let plans = modes
            .iter()
            .map(|&n| AxisPlan {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
            .collect();
        let wavenumbers = lengths
            .iter()
            .zip(modes)
            .map(|(&l, &n)| {
                (0..n)
                    .map(|i| 2.0 * PI * integer_wavenumber(i, n) as f64 / l)
                    .collect()
            })
            .collect();
        Ok(Self {
            dim,
            lengths: lengths.to_vec(),
            modes: modes.to_vec(),
            wavenumbers,
            plans,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.modes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume of one grid cell, the uniform quadrature weight.
    pub fn cell_volume(&self) -> f64 {
        self.lengths
            .iter()
            .zip(&self.modes)
            .map(|(&l, &n)| l / n as f64)
            .product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Physical wavenumbers of one axis in storage order.
    pub fn axis_wavenumbers(&self, axis: usize) -> &[f64] {
        &self.wavenumbers[axis]
    }

    /// Physical wavenumbers of one axis in ascending order.
    pub fn sorted_wavenumbers(&self, axis: usize) -> Vec<f64> {
        let mut xi = self.wavenumbers[axis].clone();
        xi.sort_by(f64::total_cmp);
        xi
    }

    fn split(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.modes[1], idx % self.modes[1]]
        }
    }

    fn join(&self, parts: [usize; 2]) -> usize {
        if self.dim == 1 {
            parts[0]
        } else {
            parts[0] * self.modes[1] + parts[1]
        }
    }

    /// Integer lattice coordinates `k` of a storage index.
    pub fn lattice_point(&self, idx: usize) -> [i64; 2] {
        let parts = self.split(idx);
        let mut k = [0i64; 2];
        for axis in 0..self.dim {
            k[axis] = integer_wavenumber(parts[axis], self.modes[axis]);
        }
        k
    }

    /// Physical wavevector `xi` of a storage index.
    pub fn xi(&self, idx: usize) -> Wavevector {
        let parts = self.split(idx);
        let mut xi = [0.0; 2];
        for axis in 0..self.dim {
            xi[axis] = self.wavenumbers[axis][parts[axis]];
        }
        xi
    }

    pub fn xi_norm(&self, idx: usize) -> f64 {
        let xi = self.xi(idx);
        xi[0].hypot(xi[1])
    }

    /// True when any component sits on the Nyquist wavenumber `-N/2`.
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let parts = self.split(idx);
        (0..self.dim).any(|axis| parts[axis] == self.modes[axis] / 2)
    }

    /// Storage index of the lattice point `-k` (modulo the lattice).
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let parts = self.split(idx);
        let mut out = [0usize; 2];
        for axis in 0..self.dim {
            let n = self.modes[axis];
            out[axis] = (n - parts[axis]) % n;
        }
        self.join(out)
    }

    /// Physical coordinates of grid point `idx`.
    pub fn position(&self, idx: usize) -> Wavevector {
        let parts = self.split(idx);
        let mut x = [0.0; 2];
        for axis in 0..self.dim {
            x[axis] = parts[axis] as f64 * self.lengths[axis] / self.modes[axis] as f64;
        }
        x
    }

    /// Smallest nonzero `|xi|` on the lattice.
    pub fn min_nonzero_xi(&self) -> f64 {
        self.lengths
            .iter()
            .map(|&l| 2.0 * PI / l)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest `|xi|` over lattice points whose integer wavenumbers satisfy
    /// `|k_i| <= fraction * N_i / 2` on every axis.
    pub fn max_xi_within(&self, fraction: f64) -> f64 {
        (0..self.len())
            .filter(|&idx| self.in_band(idx, fraction))
            .map(|idx| self.xi_norm(idx))
            .fold(0.0, f64::max)
    }

    /// Membership in the dealiasing band `|k_i| <= fraction * N_i / 2` for all axes.
    pub fn in_band(&self, idx: usize, fraction: f64) -> bool {
        let k = self.lattice_point(idx);
        (0..self.dim).all(|axis| {
            let cut = (fraction * self.modes[axis] as f64 / 2.0).floor() as i64;
            k[axis].abs() <= cut && k[axis] != -(self.modes[axis] as i64) / 2
        })
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(Error::ShapeMismatch {
                expected: self.len(),
                actual: n,
            });
        }
        Ok(())
    }

    fn transform_in_place(&self, data: &mut [Complex64], forward: bool) {
        let pick = |p: &AxisPlan| {
            if forward {
                p.forward.clone()
            } else {
                p.inverse.clone()
            }
        };
        if self.dim == 1 {
            pick(&self.plans[0]).process(data);
            return;
        }
        let (n0, n1) = (self.modes[0], self.modes[1]);
        let rows = pick(&self.plans[1]);
        for row in data.chunks_exact_mut(n1) {
            rows.process(row);
        }
        let cols = pick(&self.plans[0]);
        let mut column = vec![Complex64::new(0.0, 0.0); n0];
        for c in 0..n1 {
            for r in 0..n0 {
                column[r] = data[r * n1 + c];
            }
            cols.process(&mut column);
            for r in 0..n0 {
                data[r * n1 + c] = column[r];
            }
        }
    }

    /// Fourier coefficients of a real field.
    pub fn forward(&self, field: &[f64]) -> Result<Vec<Complex64>> {
        self.check_len(field.len())?;
        let mut data: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform_in_place(&mut data, true);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
        Ok(data)
    }

    /// Complex field synthesized from Fourier coefficients.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(coeffs.len())?;
        let mut data = coeffs.to_vec();
        self.transform_in_place(&mut data, false);
        Ok(data)
    }

    /// Real part of the synthesized field.
    pub fn inverse_real(&self, coeffs: &[Complex64]) -> Result<Vec<f64>> {
        Ok(self.inverse(coeffs)?.into_iter().map(|c| c.re).collect())
    }

    pub fn mean(&self, field: &[f64]) -> f64 {
        field.iter().sum::<f64>() / field.len() as f64
    }

    /// Discrete `L^p` norm by uniform-cell quadrature; `p = inf` is the grid max.
    pub fn lp_norm(&self, field: &[f64], p: f64) -> f64 {
        if p.is_infinite() {
            field.iter().fold(0.0, |m, v| m.max(v.abs()))
        } else if p == 2.0 {
            (field.iter().map(|v| v * v).sum::<f64>() * self.cell_volume()).sqrt()
        } else {
            (field.iter().map(|v| v.abs().powf(p)).sum::<f64>() * self.cell_volume()).powf(1.0 / p)
        }
    }

    /// `L^p` norm of the pointwise Euclidean norm of a vector field.
    pub fn lp_norm_vector(&self, components: &[Vec<f64>], p: f64) -> f64 {
        match components.len() {
            0 => 0.0,
            1 => self.lp_norm(&components[0], p),
            _ => {
                let magnitude: Vec<f64> = (0..components[0].len())
                    .map(|i| components.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
                    .collect();
                self.lp_norm(&magnitude, p)
            }
        }
    }

    pub fn l2_norm(&self, field: &[f64]) -> f64 {
        self.lp_norm(field, 2.0)
    }

    /// `L^2` norm evaluated on the spectral side (Parseval).
    pub fn spectral_l2_norm(&self, coeffs: &[Complex64]) -> f64 {
        (coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.volume()).sqrt()
    }

    /// `int f g dx` by uniform quadrature.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() * self.cell_volume()
    }
}

/// Convenience wrapper matching the operation name used by the CLI and docs.
pub fn make_grid(dim: usize, lengths: &[f64], modes: &[usize]) -> Result<SpectralGrid> {
    SpectralGrid::new(dim, lengths, modes)
}

fn spectral_norm(coeffs: &[Complex64]) -> f64 {
    coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Multiplies a spectrum by `symbol` in place.
///
/// A symbol that is non-finite at the origin is treated as singular there: the input
/// must be mean-zero and the output zero mode is set to zero. At lattice points with a
/// Nyquist component the conjugate partner is the point itself reflected through the
/// lattice, not `-xi`; when the symbol is not Hermitian across that pair the mode is
/// zeroed so that real inputs stay real (this is what happens for odd symbols such as
/// `i xi`).
pub fn multiply_spectrum<F>(grid: &SpectralGrid, coeffs: &mut [Complex64], symbol: F) -> Result<()>
where
    F: Fn(&Wavevector) -> Complex64,
{
    grid.check_len(coeffs.len())?;
    let at_zero = symbol(&[0.0, 0.0]);
    if at_zero.re.is_finite() && at_zero.im.is_finite() {
        coeffs[0] *= at_zero;
    } else {
        let total = spectral_norm(coeffs);
        if coeffs[0].norm() > MEAN_ZERO_TOL * total {
            return Err(Error::NonzeroMean { mean: coeffs[0].re });
        }
        coeffs[0] = Complex64::new(0.0, 0.0);
    }
    for idx in 1..coeffs.len() {
        let m = symbol(&grid.xi(idx));
        if !(m.re.is_finite() && m.im.is_finite()) {
            return Err(Error::NonFinite(format!("symbol at xi = {:?}", grid.xi(idx))));
        }
        if grid.is_nyquist(idx) {
            let partner = symbol(&grid.xi(grid.conjugate_index(idx)));
            let scale = m.norm().max(partner.norm());
            if (partner - m.conj()).norm() > 1e-12 * scale {
                coeffs[idx] = Complex64::new(0.0, 0.0);
                continue;
            }
        }
        coeffs[idx] *= m;
    }
    Ok(())
}

/// Returns `F^{-1}(m(xi) F(field))`.
pub fn apply_multiplier<F>(grid: &SpectralGrid, field: &[f64], symbol: F) -> Result<Vec<f64>>
where
    F: Fn(&Wavevector) -> Complex64,
{
    let mut coeffs = grid.forward(field)?;
    multiply_spectrum(grid, &mut coeffs, symbol)?;
    grid.inverse_real(&coeffs)
}

/// Applies a matrix symbol `m(xi)` (row-major, `rows x inputs.len()`) to a vector of
/// fields and returns `rows` output fields.
pub fn apply_matrix_multiplier<F>(
    grid: &SpectralGrid,
    inputs: &[&[f64]],
    rows: usize,
    symbol: F,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&Wavevector) -> Vec<Complex64>,
{
    let cols = inputs.len();
    let spectra = inputs
        .iter()
        .map(|f| grid.forward(f))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(rows);
    for r in 0..rows {
        let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
        for (c, spectrum) in spectra.iter().enumerate() {
            let mut term = spectrum.clone();
            multiply_spectrum(grid, &mut term, |xi| symbol(xi)[r * cols + c])?;
            acc.iter_mut().zip(&term).for_each(|(a, t)| *a += t);
        }
        out.push(grid.inverse_real(&acc)?);
    }
    Ok(out)
}

/// Symbol of `Lambda^sigma`; zero at the origin for `sigma > 0`, singular for `sigma < 0`.
pub fn frac_symbol(xi: &Wavevector, sigma: f64) -> Complex64 {
    let r = xi[0].hypot(xi[1]);
    if sigma == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(r.powf(sigma), 0.0)
    }
}

/// `Lambda^sigma f = F^{-1}(|xi|^sigma F f)`.
pub fn frac_lambda(grid: &SpectralGrid, field: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if sigma == 0.0 {
        grid.check_len(field.len())?;
        return Ok(field.to_vec());
    }
    apply_multiplier(grid, field, |xi| frac_symbol(xi, sigma))
}

/// Symbol of `d_axis Lambda^sigma`: `i xi_axis |xi|^sigma`.
pub fn grad_frac_symbol(xi: &Wavevector, axis: usize, sigma: f64) -> Complex64 {
    Complex64::new(0.0, xi[axis]) * frac_symbol(xi, sigma)
}

/// `grad Lambda^sigma f` as `dim` component fields.
pub fn grad_frac_lambda(grid: &SpectralGrid, field: &[f64], sigma: f64) -> Result<Vec<Vec<f64>>> {
    let mut coeffs_base = grid.forward(field)?;
    // A negative power needs a mean-zero input even though i xi kills the mean.
    if sigma < 0.0 {
        multiply_spectrum(grid, &mut coeffs_base, |xi| frac_symbol(xi, sigma))?;
    }
    (0..grid.dim())
        .map(|axis| {
            let mut c = coeffs_base.clone();
            let s = if sigma < 0.0 { 0.0 } else { sigma };
            multiply_spectrum(grid, &mut c, |xi| grad_frac_symbol(xi, axis, s))?;
            grid.inverse_real(&c)
        })
        .collect()
}

pub fn gradient(grid: &SpectralGrid, field: &[f64]) -> Result<Vec<Vec<f64>>> {
    grad_frac_lambda(grid, field, 0.0)
}

pub fn divergence(grid: &SpectralGrid, u: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_components(grid, u)?;
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (axis, comp) in u.iter().enumerate() {
        let mut c = grid.forward(comp)?;
        multiply_spectrum(grid, &mut c, |xi| Complex64::new(0.0, xi[axis]))?;
        acc.iter_mut().zip(&c).for_each(|(a, t)| *a += t);
    }
    grid.inverse_real(&acc)
}

/// Unit-coefficient Riesz force `grad Lambda^{alpha-d} a`, equal to
/// `grad Lambda^{2 s* - 2} a`. Requires mean-zero `a`.
pub fn riesz_force(grid: &SpectralGrid, a: &[f64], params: &RieszParams) -> Result<Vec<Vec<f64>>> {
    grad_frac_lambda(grid, a, params.alpha - params.dim as f64)
}

fn check_components(grid: &SpectralGrid, u: &[Vec<f64>]) -> Result<()> {
    if u.len() != grid.dim() {
        return Err(Error::ShapeMismatch {
            expected: grid.dim(),
            actual: u.len(),
        });
    }
    for c in u {
        grid.check_len(c.len())?;
    }
    Ok(())
}

/// Hodge split `m = Lambda^{-1} div u`, `omega = Lambda^{-1} curl u`.
///
/// In 1D `omega` is identically zero. Each component of `u` must be mean-zero.
pub fn hodge_split(grid: &SpectralGrid, u: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_components(grid, u)?;
    let inputs: Vec<&[f64]> = u.iter().map(|c| c.as_slice()).collect();
    let m = apply_matrix_multiplier(grid, &inputs, 1, |xi| {
        let r = xi[0].hypot(xi[1]);
        (0..grid.dim())
            .map(|axis| Complex64::new(0.0, xi[axis] / r))
            .collect()
    })?
    .remove(0);
    let omega = if grid.dim() == 1 {
        vec![0.0; grid.len()]
    } else {
        apply_matrix_multiplier(grid, &inputs, 1, |xi| {
            let r = xi[0].hypot(xi[1]);
            vec![Complex64::new(0.0, -xi[1] / r), Complex64::new(0.0, xi[0] / r)]
        })?
        .remove(0)
    };
    Ok((m, omega))
}

/// Inverse of [`hodge_split`]: `u = -Lambda^{-1} grad m - Lambda^{-1} grad_perp omega`
/// with `grad_perp = (-d_2, d_1)`.
pub fn hodge_reconstruct(grid: &SpectralGrid, m: &[f64], omega: &[f64]) -> Result<Vec<Vec<f64>>> {
    let dim = grid.dim();
    apply_matrix_multiplier(grid, &[m, omega], dim, |xi| {
        let r = xi[0].hypot(xi[1]);
        let mut s = Vec::with_capacity(2 * dim);
        for axis in 0..dim {
            s.push(Complex64::new(0.0, -xi[axis] / r));
            let perp = if dim == 1 {
                0.0
            } else if axis == 0 {
                xi[1] / r
            } else {
                -xi[0] / r
            };
            s.push(Complex64::new(0.0, perp));
        }
        s
    })
}

/// Coefficients of the system: exponent `alpha`, damping `lambda`, interaction
/// strength `kappa` and background density `rho_bar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RieszParams {
    pub dim: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub rho_bar: f64,
}

impl RieszParams {
    /// Normalized parameters `lambda = kappa = rho_bar = 1`.
    pub fn new(dim: usize, alpha: f64) -> Result<Self> {
        Self::with_coefficients(dim, alpha, 1.0, 1.0, 1.0)
    }

    /// Parameters from the half dissipation order `s* = (alpha - d + 2) / 2`.
    pub fn from_s_star(dim: usize, s_star: f64) -> Result<Self> {
        Self::new(dim, 2.0 * s_star + dim as f64 - 2.0)
    }

    pub fn with_coefficients(dim: usize, alpha: f64, lambda: f64, kappa: f64, rho_bar: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let d = dim as f64;
        if !(alpha > d - 2.0 && alpha < d) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (d-2, d) = ({}, {}), got {alpha}",
                d - 2.0,
                d
            )));
        }
        for (name, v) in [("lambda", lambda), ("kappa", kappa), ("rho_bar", rho_bar)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            dim,
            alpha,
            lambda,
            kappa,
            rho_bar,
        })
    }

    pub fn s_star(&self) -> f64 {
        (self.alpha - self.dim as f64 + 2.0) / 2.0
    }

    /// Coefficient of `grad Lambda^{2s*-2} a` in the velocity equation when `a` is the
    /// relative fluctuation `rho / rho_bar - 1`.
    pub fn coupling(&self) -> f64 {
        self.kappa * self.rho_bar
    }
}

/// Density fluctuation `a = rho / rho_bar - 1` and velocity `u` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub a: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub t: f64,
}

impl FieldState {
    pub fn zeros(grid: &SpectralGrid, t: f64) -> Self {
        Self {
            a: vec![0.0; grid.len()],
            u: vec![vec![0.0; grid.len()]; grid.dim()],
            t,
        }
    }

    /// Checks shapes against the grid and finiteness of every entry.
    pub fn validate(&self, grid: &SpectralGrid) -> Result<()> {
        grid.check_len(self.a.len())?;
        check_components(grid, &self.u)?;
        let finite = self.a.iter().chain(self.u.iter().flatten()).all(|v| v.is_finite());
        if !finite || !self.t.is_finite() {
            return Err(Error::NonFinite(format!("field state at t = {}", self.t)));
        }
        Ok(())
    }

    /// Multiplies both `a` and `u` by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            a: self.a.iter().map(|v| c * v).collect(),
            u: self.u.iter().map(|comp| comp.iter().map(|v| c * v).collect()).collect(),
            t: self.t,
        }
    }

    /// Smallest value of `1 + a` on the grid.
    pub fn min_density(&self) -> f64 {
        self.a.iter().fold(f64::INFINITY, |m, v| m.min(1.0 + v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(n: usize, l: f64) -> SpectralGrid {
        SpectralGrid::new(1, &[l], &[n]).unwrap()
    }

    fn mode_field(grid: &SpectralGrid, f: impl Fn(Wavevector) -> f64) -> Vec<f64> {
        (0..grid.len()).map(|i| f(grid.position(i))).collect()
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn lattice_of_unit_box() {
        let g = grid1(8, 2.0 * PI);
        let xi = g.sorted_wavenumbers(0);
        let expected: Vec<f64> = (-4..4).map(|k| k as f64).collect();
        assert!(max_abs_diff(&xi, &expected) < 1e-14);
    }

    #[test]
    fn lattice_scales_with_length() {
        let g = grid1(8, 4.0 * PI);
        let xi = g.sorted_wavenumbers(0);
        let expected: Vec<f64> = (-4..4).map(|k| 0.5 * k as f64).collect();
        assert!(max_abs_diff(&xi, &expected) < 1e-14);
    }

    #[test]
    fn two_dimensional_lattice_has_one_zero_mode() {
        let g = SpectralGrid::new(2, &[2.0 * PI, 2.0 * PI], &[8, 8]).unwrap();
        assert_eq!(g.len(), 64);
        let zeros = (0..g.len()).filter(|&i| g.xi_norm(i) == 0.0).count();
        assert_eq!(zeros, 1);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(SpectralGrid::new(1, &[1.0], &[9]).is_err());
        assert!(SpectralGrid::new(1, &[1.0], &[6]).is_err());
        assert!(SpectralGrid::new(1, &[0.0], &[8]).is_err());
        assert!(SpectralGrid::new(1, &[-1.0], &[8]).is_err());
        assert!(SpectralGrid::new(3, &[1.0; 3], &[8; 3]).is_err());
        assert!(SpectralGrid::new(2, &[1.0], &[8]).is_err());
    }

    #[test]
    fn identity_symbol_is_exact() {
        let g = grid1(32, 2.0 * PI);
        let f = mode_field(&g, |x| 1.0 + x[0].sin() + 0.3 * (5.0 * x[0]).cos());
        let out = apply_multiplier(&g, &f, |_| Complex64::new(1.0, 0.0)).unwrap();
        assert!(max_abs_diff(&f, &out) < 1e-14);
    }

    #[test]
    fn single_mode_is_eigenfunction() {
        let g = grid1(32, 2.0 * PI);
        let f = mode_field(&g, |x| (3.0 * x[0]).cos());
        let out = apply_multiplier(&g, &f, |xi| frac_symbol(xi, 0.4)).unwrap();
        let expected: Vec<f64> = f.iter().map(|v| 3f64.powf(0.4) * v).collect();
        assert!(max_abs_diff(&out, &expected) < 1e-13);
    }

    #[test]
    fn singular_symbol_rejects_mean() {
        let g = grid1(16, 2.0 * PI);
        let f = mode_field(&g, |x| 1.0 + x[0].cos());
        let err = apply_multiplier(&g, &f, |xi| frac_symbol(xi, -1.0)).unwrap_err();
        assert!(matches!(err, Error::NonzeroMean { .. }));
        assert!(frac_lambda(&g, &f, -0.5).is_err());
        assert!(riesz_force(&g, &f, &RieszParams::new(1, 0.0).unwrap()).is_err());
    }

    #[test]
    fn frac_lambda_examples() {
        let g = grid1(32, 2.0 * PI);
        let f = mode_field(&g, |x| (3.0 * x[0]).sin());
        // sigma = 2 s* with s* = 0.5
        let out = frac_lambda(&g, &f, 1.0).unwrap();
        let expected: Vec<f64> = f.iter().map(|v| 3.0 * v).collect();
        assert!(max_abs_diff(&out, &expected) < 1e-13);

        let h = mode_field(&g, |x| 2.0 + x[0].cos());
        assert_eq!(frac_lambda(&g, &h, 0.0).unwrap(), h);
    }

    #[test]
    fn riesz_force_single_mode() {
        let g = grid1(32, 2.0 * PI);
        let params = RieszParams::new(1, 0.0).unwrap();
        for k in [1.0, 2.0, 5.0] {
            let a = mode_field(&g, |x| (k * x[0]).cos());
            let f = riesz_force(&g, &a, &params).unwrap();
            let expected = mode_field(&g, |x| -(k * x[0]).sin());
            assert!(max_abs_diff(&f[0], &expected) < 1e-13);
        }
        let zero = riesz_force(&g, &vec![0.0; 32], &params).unwrap();
        assert!(zero[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn odd_symbol_zeroes_nyquist() {
        let g = grid1(8, 2.0 * PI);
        // Pure Nyquist mode cos(4x) alternates +-1 on the grid.
        let f: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let d = divergence(&g, &[f.clone()]).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-15));
        let even = frac_lambda(&g, &f, 1.0).unwrap();
        assert!(max_abs_diff(&even, &f.iter().map(|v| 4.0 * v).collect::<Vec<_>>()) < 1e-13);
    }

    #[test]
    fn hodge_of_gradient_has_no_vorticity() {
        let g = SpectralGrid::new(2, &[2.0 * PI, 2.0 * PI], &[16, 16]).unwrap();
        let phi = mode_field(&g, |x| (x[0] + 2.0 * x[1]).sin() + (3.0 * x[1]).cos());
        let u = gradient(&g, &phi).unwrap();
        let (m, omega) = hodge_split(&g, &u).unwrap();
        assert!(omega.iter().all(|v| v.abs() < 1e-12));
        assert!(m.iter().any(|v| v.abs() > 1e-3));
    }

    #[test]
    fn hodge_of_solenoidal_field_has_no_divergence_part() {
        let g = SpectralGrid::new(2, &[2.0 * PI, 2.0 * PI], &[16, 16]).unwrap();
        let psi = mode_field(&g, |x| (2.0 * x[0] - x[1]).cos());
        let grad = gradient(&g, &psi).unwrap();
        let u = vec![grad[1].iter().map(|v| -v).collect(), grad[0].clone()];
        let (m, omega) = hodge_split(&g, &u).unwrap();
        assert!(m.iter().all(|v| v.abs() < 1e-12));
        assert!(omega.iter().any(|v| v.abs() > 1e-3));
    }

    #[test]
    fn hodge_one_dimensional() {
        let g = grid1(16, 2.0 * PI);
        let u = mode_field(&g, |x| (2.0 * x[0]).sin());
        let (m, omega) = hodge_split(&g, &[u.clone()]).unwrap();
        // Lambda^{-1} d_x sin(2x) = cos(2x)
        let expected = mode_field(&g, |x| (2.0 * x[0]).cos());
        assert!(max_abs_diff(&m, &expected) < 1e-13);
        assert!(omega.iter().all(|&v| v == 0.0));
        let back = hodge_reconstruct(&g, &m, &omega).unwrap();
        assert!(max_abs_diff(&back[0], &u) < 1e-13);
        assert!(hodge_split(&g, &[vec![1.0; 16]]).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(RieszParams::new(1, -1.0).is_err());
        assert!(RieszParams::new(1, 1.0).is_err());
        assert!(RieszParams::new(2, 0.5).unwrap().s_star() == 0.25);
        assert!(RieszParams::with_coefficients(1, 0.0, 0.0, 1.0, 1.0).is_err());
        let p = RieszParams::from_s_star(2, 0.75).unwrap();
        assert!((p.alpha - 1.5).abs() < 1e-15);
    }
}
