//! Time integration of the damped Euler-Riesz system
//!
//! ```text
//! a_t + div u = -div(a u)
//! u_t + lambda u + c grad Lambda^{2s*-2} a = -u . grad u
//! ```
//!
//! on a periodic grid. The linear part is propagated exactly per Fourier mode; the
//! quadratic terms are formed in physical space from dealiased inputs.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{FieldState, RieszParams, SpectralGrid};
use crate::spectrum::{Mat2, ModeSystem};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// Lawson (integrating-factor) classical RK4.
    IfRk4,
    /// Lawson Euler, first order.
    ExponentialEuler,
}

impl Integrator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Integrator::IfRk4 => "if-rk4",
            Integrator::ExponentialEuler => "exp-euler",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub integrator: Integrator,
    /// Fraction of the per-axis half band kept when forming products.
    pub dealias: f64,
    pub snapshot_times: Vec<f64>,
    pub positivity_floor: f64,
    /// Disables the quadratic terms, leaving the exact linear flow.
    pub nonlinear: bool,
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            integrator: Integrator::IfRk4,
            dealias: 2.0 / 3.0,
            snapshot_times: Vec::new(),
            positivity_floor: 0.05,
            nonlinear: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if !(self.dealias > 0.0 && self.dealias <= 1.0) {
            return Err(Error::InvalidParameter(format!("dealias must lie in (0, 1], got {}", self.dealias)));
        }
        if !(self.positivity_floor > 0.0 && self.positivity_floor < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "positivity_floor must lie in (0, 1), got {}",
                self.positivity_floor
            )));
        }
        if self.snapshot_times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("snapshot times must be finite".into()));
        }
        Ok(())
    }

    /// Step size guideline `c / max(|xi|_max ||u||_inf, 1)`.
    pub fn cfl_dt(grid: &SpectralGrid, state: &FieldState, c: f64) -> f64 {
        let umax = state.u.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        c / (grid.max_xi_within(1.0) * umax).max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    PositivityViolation { t: f64, min_density: f64 },
    Blowup { t: f64 },
}

impl RunStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::PositivityViolation { .. } => "positivity_violation",
            RunStatus::Blowup { .. } => "blowup",
        }
    }
}

/// A named scalar observed at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRecord {
    pub t: f64,
    pub name: String,
    pub value: f64,
}

impl DiagnosticRecord {
    pub fn new(t: f64, name: impl Into<String>, value: f64) -> Self {
        Self {
            t,
            name: name.into(),
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<FieldState>,
    /// One entry per snapshot.
    pub diagnostics: Vec<Vec<DiagnosticRecord>>,
    pub status: RunStatus,
    pub steps: usize,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &FieldState {
        self.snapshots.last().expect("trajectory holds the initial state")
    }
}

/// Spectral representation of `(a, u)`.
#[derive(Debug, Clone, PartialEq)]
struct Spectra {
    a: Vec<Complex64>,
    u: Vec<Vec<Complex64>>,
}

impl Spectra {
    fn from_state(grid: &SpectralGrid, state: &FieldState) -> Result<Self> {
        Ok(Self {
            a: grid.forward(&state.a)?,
            u: state.u.iter().map(|c| grid.forward(c)).collect::<Result<_>>()?,
        })
    }

    fn to_state(&self, grid: &SpectralGrid, t: f64) -> Result<FieldState> {
        Ok(FieldState {
            a: grid.inverse_real(&self.a)?,
            u: self.u.iter().map(|c| grid.inverse_real(c)).collect::<Result<_>>()?,
            t,
        })
    }

    fn slices_mut(&mut self) -> impl Iterator<Item = &mut Vec<Complex64>> {
        std::iter::once(&mut self.a).chain(self.u.iter_mut())
    }

    fn slices(&self) -> impl Iterator<Item = &Vec<Complex64>> {
        std::iter::once(&self.a).chain(self.u.iter())
    }

    /// `self + h other`.
    fn axpy(&self, h: f64, other: &Spectra) -> Spectra {
        let mut out = self.clone();
        for (o, x) in out.slices_mut().zip(other.slices()) {
            o.iter_mut().zip(x).for_each(|(o, x)| *o += h * x);
        }
        out
    }

    fn is_finite(&self) -> bool {
        self.slices().flatten().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Exact linear flow over a fixed step `h`, tabulated per mode.
struct LinearFlow {
    h: f64,
    modes: Vec<Mat2>,
    rotational: f64,
}

impl LinearFlow {
    fn new(grid: &SpectralGrid, params: &RieszParams, h: f64) -> Result<Self> {
        let s = params.s_star();
        let (lambda, c) = (params.lambda, params.coupling());
        let modes = (0..grid.len())
            .map(|idx| ModeSystem::with_coefficients(grid.xi_norm(idx), s, lambda, c).propagator(h))
            .collect::<Result<_>>()?;
        Ok(Self {
            h,
            modes,
            rotational: (-lambda * h).exp(),
        })
    }

    fn apply(&self, grid: &SpectralGrid, w: &Spectra) -> Spectra {
        let mut out = w.clone();
        let dim = grid.dim();
        for idx in 0..grid.len() {
            if grid.is_nyquist(idx) {
                out.a[idx] = ZERO;
                out.u.iter_mut().for_each(|c| c[idx] = ZERO);
                continue;
            }
            let r = grid.xi_norm(idx);
            if r == 0.0 {
                out.u.iter_mut().for_each(|c| c[idx] *= self.rotational);
                continue;
            }
            let xi = grid.xi(idx);
            let n = [xi[0] / r, xi[1] / r];
            let i = Complex64::new(0.0, 1.0);
            let mut m = ZERO;
            for d in 0..dim {
                m += i * n[d] * w.u[d][idx];
            }
            let p = &self.modes[idx];
            let a = w.a[idx];
            let a_new = p[0][0] * a + p[0][1] * m;
            let m_new = p[1][0] * a + p[1][1] * m;
            out.a[idx] = a_new;
            for d in 0..dim {
                let par = -i * n[d] * m;
                let perp = w.u[d][idx] - par;
                out.u[d][idx] = -i * n[d] * m_new + self.rotational * perp;
            }
        }
        out
    }
}

fn mask(grid: &SpectralGrid, coeffs: &mut [Complex64], band: &[bool]) {
    debug_assert_eq!(coeffs.len(), grid.len());
    coeffs.iter_mut().zip(band).for_each(|(c, &keep)| {
        if !keep {
            *c = ZERO;
        }
    });
}

fn band_mask(grid: &SpectralGrid, fraction: f64) -> Vec<bool> {
    (0..grid.len()).map(|idx| grid.in_band(idx, fraction)).collect()
}

fn derivative(grid: &SpectralGrid, coeffs: &[Complex64], axis: usize) -> Vec<Complex64> {
    coeffs
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            if grid.is_nyquist(idx) {
                ZERO
            } else {
                Complex64::new(0.0, grid.xi(idx)[axis]) * c
            }
        })
        .collect()
}

/// Quadratic terms `(-div(a u), -u . grad u)` in spectral form, dealiased.
fn nonlinear_spectra(grid: &SpectralGrid, w: &Spectra, band: &[bool]) -> Result<Spectra> {
    let dim = grid.dim();
    let mut a_hat = w.a.clone();
    mask(grid, &mut a_hat, band);
    let a = grid.inverse_real(&a_hat)?;
    let mut u_hat = w.u.clone();
    u_hat.iter_mut().for_each(|c| mask(grid, c, band));
    let u: Vec<Vec<f64>> = u_hat.iter().map(|c| grid.inverse_real(c)).collect::<Result<_>>()?;

    let mut da = vec![ZERO; grid.len()];
    for d in 0..dim {
        let flux: Vec<f64> = a.iter().zip(&u[d]).map(|(a, u)| a * u).collect();
        let flux_hat = grid.forward(&flux)?;
        da.iter_mut()
            .zip(derivative(grid, &flux_hat, d))
            .for_each(|(o, v)| *o -= v);
    }
    mask(grid, &mut da, band);

    let mut du = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut adv = vec![0.0; grid.len()];
        for j in 0..dim {
            let grad = grid.inverse_real(&derivative(grid, &u_hat[i], j))?;
            adv.iter_mut()
                .zip(u[j].iter().zip(&grad))
                .for_each(|(o, (u, g))| *o -= u * g);
        }
        let mut adv_hat = grid.forward(&adv)?;
        mask(grid, &mut adv_hat, band);
        du.push(adv_hat);
    }
    let out = Spectra { a: da, u: du };
    if !out.is_finite() {
        return Err(Error::NonFinite("nonlinear terms".into()));
    }
    Ok(out)
}

/// Quadratic terms `(-div(a u), -u . grad u)` of a physical state, with products formed
/// from inputs truncated to the `dealias` band.
pub fn rhs_nonlinear(grid: &SpectralGrid, state: &FieldState, dealias: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    state.validate(grid)?;
    let w = Spectra::from_state(grid, state)?;
    let n = nonlinear_spectra(grid, &w, &band_mask(grid, dealias))?;
    let s = n.to_state(grid, state.t)?;
    Ok((s.a, s.u))
}

/// Advances the linearized system exactly by `dt`.
pub fn linear_step(grid: &SpectralGrid, params: &RieszParams, state: &FieldState, dt: f64) -> Result<FieldState> {
    state.validate(grid)?;
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let flow = LinearFlow::new(grid, params, dt)?;
    let w = Spectra::from_state(grid, state)?;
    flow.apply(grid, &w).to_state(grid, state.t + dt)
}

struct Stepper<'g> {
    grid: &'g SpectralGrid,
    params: RieszParams,
    integrator: Integrator,
    nonlinear: bool,
    band: Vec<bool>,
    full: LinearFlow,
    half: LinearFlow,
}

impl<'g> Stepper<'g> {
    fn new(grid: &'g SpectralGrid, params: &RieszParams, config: &SolverConfig) -> Result<Self> {
        Ok(Self {
            grid,
            params: *params,
            integrator: config.integrator,
            nonlinear: config.nonlinear,
            band: band_mask(grid, config.dealias),
            full: LinearFlow::new(grid, params, config.dt)?,
            half: LinearFlow::new(grid, params, 0.5 * config.dt)?,
        })
    }

    fn n(&self, w: &Spectra) -> Result<Spectra> {
        nonlinear_spectra(self.grid, w, &self.band)
    }

    fn step(&self, w: &Spectra, h: f64) -> Result<Spectra> {
        let fresh;
        let (full, half) = if (h - self.full.h).abs() <= 1e-12 * self.full.h {
            (&self.full, &self.half)
        } else {
            fresh = (
                LinearFlow::new(self.grid, &self.params, h)?,
                LinearFlow::new(self.grid, &self.params, 0.5 * h)?,
            );
            (&fresh.0, &fresh.1)
        };
        let g = self.grid;
        if !self.nonlinear {
            return Ok(full.apply(g, w));
        }
        match self.integrator {
            Integrator::ExponentialEuler => {
                let k1 = self.n(w)?;
                Ok(full.apply(g, &w.axpy(h, &k1)))
            }
            Integrator::IfRk4 => {
                let ew_half = half.apply(g, w);
                let k1 = self.n(w)?;
                let k2 = self.n(&half.apply(g, &w.axpy(0.5 * h, &k1)))?;
                let k3 = self.n(&ew_half.axpy(0.5 * h, &k2))?;
                let ew = full.apply(g, w);
                let k4 = self.n(&ew.axpy(h, &half.apply(g, &k3)))?;
                let mid = half.apply(g, &k2.axpy(1.0, &k3));
                let ek1 = full.apply(g, &k1);
                let mut out = ew;
                for (((o, e1), m), q4) in out.slices_mut().zip(ek1.slices()).zip(mid.slices()).zip(k4.slices()) {
                    for idx in 0..o.len() {
                        o[idx] += h / 6.0 * (e1[idx] + 2.0 * m[idx] + q4[idx]);
                    }
                }
                Ok(out)
            }
        }
    }
}

fn default_records(grid: &SpectralGrid, state: &FieldState) -> Vec<DiagnosticRecord> {
    vec![
        DiagnosticRecord::new(state.t, "mean_a", grid.mean(&state.a)),
        DiagnosticRecord::new(state.t, "l2_a", grid.l2_norm(&state.a)),
        DiagnosticRecord::new(state.t, "l2_u", grid.lp_norm_vector(&state.u, 2.0)),
        DiagnosticRecord::new(state.t, "min_density", state.min_density()),
    ]
}

/// Integrates from `initial` to `config.t_end`, recording the initial state, every
/// requested snapshot time inside the run and the final time.
pub fn integrate(
    grid: &SpectralGrid,
    initial: &FieldState,
    params: &RieszParams,
    config: &SolverConfig,
) -> Result<Trajectory> {
    integrate_with_observer(grid, initial, params, config, |_| Ok(Vec::new()))
}

/// As [`integrate`], with `observer` adding records to every snapshot.
pub fn integrate_with_observer<F>(
    grid: &SpectralGrid,
    initial: &FieldState,
    params: &RieszParams,
    config: &SolverConfig,
    mut observer: F,
) -> Result<Trajectory>
where
    F: FnMut(&FieldState) -> Result<Vec<DiagnosticRecord>>,
{
    config.validate()?;
    initial.validate(grid)?;
    if params.dim != grid.dim() {
        return Err(Error::InvalidParameter(format!(
            "parameters are for d = {}, grid has d = {}",
            params.dim,
            grid.dim()
        )));
    }
    if initial.min_density() < config.positivity_floor {
        return Err(Error::InvalidParameter(format!(
            "initial density minimum {} is below the floor {}",
            initial.min_density(),
            config.positivity_floor
        )));
    }
    let mean = grid.mean(&initial.a);
    if mean.abs() > 1e-12 * (1.0 + grid.l2_norm(&initial.a)) {
        return Err(Error::NonzeroMean { mean });
    }

    let t0 = initial.t;
    let t_end = t0 + config.t_end;
    let mut stops: Vec<f64> = config
        .snapshot_times
        .iter()
        .copied()
        .filter(|&t| t > t0 && t < t_end)
        .collect();
    stops.push(t_end);
    stops.sort_by(f64::total_cmp);
    stops.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));

    let stepper = Stepper::new(grid, params, config)?;
    let mut record = |state: &FieldState| -> Result<Vec<DiagnosticRecord>> {
        let mut r = default_records(grid, state);
        r.extend(observer(state)?);
        Ok(r)
    };
    let mut traj = Trajectory {
        snapshots: vec![initial.clone()],
        diagnostics: vec![record(initial)?],
        status: RunStatus::Completed,
        steps: 0,
    };
    if config.t_end == 0.0 {
        return Ok(traj);
    }

    let mut w = Spectra::from_state(grid, initial)?;
    // drop the round-off mean so it cannot outlive the decaying field
    w.a[0] = ZERO;
    let mut t = t0;
    let tol = 1e-9 * config.dt;
    for stop in stops {
        while t < stop - tol {
            let h = if stop - t <= config.dt + tol { stop - t } else { config.dt };
            let next = match stepper.step(&w, h) {
                Ok(n) if n.is_finite() => n,
                Ok(_) | Err(Error::NonFinite(_)) => {
                    traj.status = RunStatus::Blowup { t: t + h };
                    return Ok(traj);
                }
                Err(e) => return Err(e),
            };
            w = next;
            t = if stop - t <= config.dt + tol { stop } else { t + h };
            traj.steps += 1;
            let a = grid.inverse_real(&w.a)?;
            let floor = a.iter().fold(f64::INFINITY, |m, v| m.min(1.0 + v));
            if !floor.is_finite() {
                traj.status = RunStatus::Blowup { t };
                return Ok(traj);
            }
            if floor < config.positivity_floor {
                log::warn!("density minimum {floor} below floor at t = {t}");
                traj.status = RunStatus::PositivityViolation { t, min_density: floor };
                return Ok(traj);
            }
        }
        let state = w.to_state(grid, t)?;
        traj.diagnostics.push(record(&state)?);
        traj.snapshots.push(state);
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PresetKind {
    /// `a = A cos(k x_1)` for lattice index `k` along the first axis, `u = 0`.
    SingleMode { mode: usize },
    /// Periodic bump `exp(kappa (cos(2 pi x_i / L_i) - 1))` minus its mean, `u = 0`.
    SmoothBump,
    /// Cosine series with `|a_hat| = |xi|^{-sigma1 - d/2}` on `0 < |xi| <= 1`, `u = 0`.
    LowFrequencyPowerlaw,
}

const BUMP_CONCENTRATION: f64 = 4.0;

/// Mean-zero initial data of the given kind with `max |a| = amplitude`.
pub fn perturbation_preset(kind: PresetKind, amplitude: f64, grid: &SpectralGrid, sigma1: f64) -> Result<FieldState> {
    if !amplitude.is_finite() || amplitude < 0.0 {
        return Err(Error::InvalidParameter(format!("amplitude must be >= 0, got {amplitude}")));
    }
    let shape: Vec<f64> = match kind {
        PresetKind::SingleMode { mode } => {
            if mode == 0 || mode >= grid.modes()[0] / 2 {
                return Err(Error::InvalidParameter(format!("mode {mode} is not a resolved nonzero mode")));
            }
            let k = 2.0 * PI * mode as f64 / grid.lengths()[0];
            (0..grid.len()).map(|i| (k * grid.position(i)[0]).cos()).collect()
        }
        PresetKind::SmoothBump => {
            let raw: Vec<f64> = (0..grid.len())
                .map(|i| {
                    let x = grid.position(i);
                    (0..grid.dim())
                        .map(|d| (BUMP_CONCENTRATION * ((2.0 * PI * x[d] / grid.lengths()[d]).cos() - 1.0)).exp())
                        .product()
                })
                .collect();
            let m = grid.mean(&raw);
            raw.into_iter().map(|v| v - m).collect()
        }
        PresetKind::LowFrequencyPowerlaw => {
            let exponent = -sigma1 - grid.dim() as f64 / 2.0;
            let coeffs: Vec<Complex64> = (0..grid.len())
                .map(|idx| {
                    let r = grid.xi_norm(idx);
                    if r > 0.0 && r <= 1.0 && !grid.is_nyquist(idx) {
                        Complex64::new(r.powf(exponent), 0.0)
                    } else {
                        ZERO
                    }
                })
                .collect();
            if coeffs.iter().all(|c| *c == ZERO) {
                return Err(Error::InvalidParameter("box too small: no lattice modes with 0 < |xi| <= 1".into()));
            }
            grid.inverse_real(&coeffs)?
        }
    };
    let peak = shape.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { amplitude / peak } else { 0.0 };
    let mut state = FieldState::zeros(grid, 0.0);
    state.a = shape.iter().map(|v| scale * v).collect();
    if state.min_density() <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "amplitude {amplitude} leaves 1 + a nonpositive"
        )));
    }
    Ok(state)
}
