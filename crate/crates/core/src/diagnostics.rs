//! Observables along solutions: effective velocity, equation residuals, the hybrid
//! energy and dissipation functionals, block Lyapunov functionals and decay fits.
//!
//! With general coefficients `gamma = c / lambda`, the effective velocity is
//! `z = u + gamma grad Lambda^{2s*-2} a`, and the pair `(a, z)` satisfies
//!
//! ```text
//! a_t + gamma Lambda^{2s*} a + div z + div(a u) = 0
//! z_t + lambda z + gamma grad Lambda^{2s*-2} div z + gamma^2 grad Lambda^{4s*-2} a
//!     + gamma grad Lambda^{2s*-2} div(a u) + u . grad u = 0
//! ```

use crate::error::{Error, Result};
use crate::grid::{divergence, frac_lambda, grad_frac_lambda, FieldState, RieszParams, SpectralGrid};
use crate::lp::{chemin_lerner_from_blocks, BesovSpec, BlockNorms, LpPartition};
use crate::solver::rhs_nonlinear;

fn gamma(params: &RieszParams) -> f64 {
    params.coupling() / params.lambda
}

fn add_scaled(out: &mut [f64], c: f64, x: &[f64]) {
    out.iter_mut().zip(x).for_each(|(o, x)| *o += c * x);
}

/// `z = u + gamma grad Lambda^{2s*-2} a`.
pub fn effective_velocity(grid: &SpectralGrid, state: &FieldState, params: &RieszParams) -> Result<Vec<Vec<f64>>> {
    state.validate(grid)?;
    let force = grad_frac_lambda(grid, &state.a, 2.0 * params.s_star() - 2.0)?;
    let g = gamma(params);
    Ok(state
        .u
        .iter()
        .zip(&force)
        .map(|(u, f)| u.iter().zip(f).map(|(u, f)| u + g * f).collect())
        .collect())
}

fn check_window(window: &[FieldState]) -> Result<()> {
    if window.len() < 3 {
        return Err(Error::TimeSeries(format!(
            "centered differences need at least 3 snapshots, got {}",
            window.len()
        )));
    }
    if window.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(Error::TimeSeries("snapshot times must increase strictly".into()));
    }
    Ok(())
}

fn centered(prev: &[f64], next: &[f64], dt: f64) -> Vec<f64> {
    prev.iter().zip(next).map(|(p, n)| (n - p) / dt).collect()
}

fn relative(grid: &SpectralGrid, residual: &[Vec<f64>], reference: &[Vec<f64>]) -> f64 {
    let r = grid.lp_norm_vector(residual, 2.0);
    let scale = grid.lp_norm_vector(reference, 2.0);
    if r == 0.0 {
        0.0
    } else {
        r / scale
    }
}

/// Largest relative residual of the `a` equation over the interior snapshots of
/// `window`, with centered time differences and quadratic terms dealiased as in the
/// solver. Each residual is measured against `||a||_{L^2}` at the same time.
pub fn a_equation_residual(
    grid: &SpectralGrid,
    params: &RieszParams,
    window: &[FieldState],
    dealias: f64,
) -> Result<f64> {
    check_window(window)?;
    let g = gamma(params);
    let mut worst: f64 = 0.0;
    for w in window.windows(3) {
        let s = &w[1];
        let mut res = centered(&w[0].a, &w[2].a, w[2].t - w[0].t);
        add_scaled(&mut res, g, &frac_lambda(grid, &s.a, 2.0 * params.s_star())?);
        let z = effective_velocity(grid, s, params)?;
        add_scaled(&mut res, 1.0, &divergence(grid, &z)?);
        let (da, _) = rhs_nonlinear(grid, s, dealias)?;
        add_scaled(&mut res, -1.0, &da);
        worst = worst.max(relative(grid, &[res], std::slice::from_ref(&s.a)));
    }
    Ok(worst)
}

/// Largest relative residual of the `z` equation over the interior snapshots of
/// `window`, measured against `||z||_{L^2}`.
pub fn z_equation_residual(
    grid: &SpectralGrid,
    params: &RieszParams,
    window: &[FieldState],
    dealias: f64,
) -> Result<f64> {
    check_window(window)?;
    let g = gamma(params);
    let s_star = params.s_star();
    let mut worst: f64 = 0.0;
    for w in window.windows(3) {
        let s = &w[1];
        let z_prev = effective_velocity(grid, &w[0], params)?;
        let z_next = effective_velocity(grid, &w[2], params)?;
        let z = effective_velocity(grid, s, params)?;
        let dt = w[2].t - w[0].t;
        let mut res: Vec<Vec<f64>> = z_prev.iter().zip(&z_next).map(|(p, n)| centered(p, n, dt)).collect();
        let (da, du) = rhs_nonlinear(grid, s, dealias)?;
        let div_z = divergence(grid, &z)?;
        let coupled = grad_frac_lambda(grid, &div_z, 2.0 * s_star - 2.0)?;
        let density = grad_frac_lambda(grid, &s.a, 4.0 * s_star - 2.0)?;
        // da = -div(a u)
        let flux = grad_frac_lambda(grid, &da, 2.0 * s_star - 2.0)?;
        for i in 0..grid.dim() {
            add_scaled(&mut res[i], params.lambda, &z[i]);
            add_scaled(&mut res[i], g, &coupled[i]);
            add_scaled(&mut res[i], g * g, &density[i]);
            add_scaled(&mut res[i], -g, &flux[i]);
            add_scaled(&mut res[i], -1.0, &du[i]);
        }
        worst = worst.max(relative(grid, &res, &z));
    }
    Ok(worst)
}

/// Instantaneous hybrid energy and dissipation functionals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalRecord {
    pub t: f64,
    pub p: f64,
    pub j1: i32,
    /// `||a||^l_{B^{d/p-1}_{p,1}}`
    pub a_low: f64,
    /// `||u||^l_{B^{d/p}_{p,1}}`
    pub u_low: f64,
    /// `||a||^h_{B^{d/2+1}_{2,1}}`
    pub a_high: f64,
    /// `||u||^h_{B^{d/2+2-s*}_{2,1}}`
    pub u_high: f64,
    pub e_p: f64,
    /// `||a||^l_{B^{d/p-1+2s*}_{p,1}}`, `||u||^l_{B^{d/p}_{p,1}}`, `||a||^h_{B^{d/2+1}_{2,1}}`,
    /// `||u||^h_{B^{d/2+2-s*}_{2,1}}` and `||a_t||_{B^{d/p}_{p,1}}`.
    pub d_terms: [f64; 5],
    pub d_p: f64,
}

impl FunctionalRecord {
    pub fn components(&self) -> [(&'static str, f64); 4] {
        [
            ("a_low", self.a_low),
            ("u_low", self.u_low),
            ("a_high", self.a_high),
            ("u_high", self.u_high),
        ]
    }
}

struct FunctionalSpecs {
    e: [BesovSpec; 4],
    d: [BesovSpec; 5],
}

fn functional_specs(dim: usize, s_star: f64, p: f64, j1: i32) -> FunctionalSpecs {
    let d = dim as f64;
    let a_high = BesovSpec::high(d / 2.0 + 1.0, 2.0, 1.0, j1);
    let u_high = BesovSpec::high(d / 2.0 + 2.0 - s_star, 2.0, 1.0, j1);
    FunctionalSpecs {
        e: [
            BesovSpec::low(d / p - 1.0, p, 1.0, j1),
            BesovSpec::low(d / p, p, 1.0, j1),
            a_high,
            u_high,
        ],
        d: [
            BesovSpec::low(d / p - 1.0 + 2.0 * s_star, p, 1.0, j1),
            BesovSpec::low(d / p, p, 1.0, j1),
            a_high,
            u_high,
            BesovSpec::full(d / p, p, 1.0),
        ],
    }
}

fn admissible_p(dim: usize, p: f64) -> bool {
    let upper = if dim <= 4 { 4.0 } else { 2.0 * dim as f64 / (dim as f64 - 2.0) };
    (2.0..=upper).contains(&p)
}

/// `a_t = -div u - div(a u)` evaluated spectrally.
fn density_rate(grid: &SpectralGrid, state: &FieldState) -> Result<Vec<f64>> {
    let flux: Vec<Vec<f64>> = state
        .u
        .iter()
        .map(|u| u.iter().zip(&state.a).map(|(u, a)| (1.0 + a) * u).collect())
        .collect();
    Ok(divergence(grid, &flux)?.into_iter().map(|v| -v).collect())
}

struct SnapshotNorms {
    a2: BlockNorms,
    u2: BlockNorms,
    ap: BlockNorms,
    up: BlockNorms,
    dap: BlockNorms,
}

fn snapshot_norms(partition: &LpPartition, state: &FieldState, p: f64) -> Result<SnapshotNorms> {
    let grid = partition.grid();
    let u: Vec<&[f64]> = state.u.iter().map(|c| c.as_slice()).collect();
    let dta = density_rate(grid, state)?;
    Ok(SnapshotNorms {
        a2: partition.block_norms(&[&state.a], 2.0)?,
        u2: partition.block_norms(&u, 2.0)?,
        ap: partition.block_norms(&[&state.a], p)?,
        up: partition.block_norms(&u, p)?,
        dap: partition.block_norms(&[&dta], p)?,
    })
}

/// Hybrid energy `E_p` and dissipation integrand `D_p` at one instant.
pub fn energy_functionals(
    partition: &LpPartition,
    state: &FieldState,
    params: &RieszParams,
    p: f64,
    j1: i32,
) -> Result<FunctionalRecord> {
    let grid = partition.grid();
    state.validate(grid)?;
    if !admissible_p(grid.dim(), p) {
        log::warn!("p = {p} is outside the admissible range for d = {}", grid.dim());
    }
    let specs = functional_specs(grid.dim(), params.s_star(), p, j1);
    let n = snapshot_norms(partition, state, p)?;
    let e = [
        n.ap.besov(&specs.e[0])?,
        n.up.besov(&specs.e[1])?,
        n.a2.besov(&specs.e[2])?,
        n.u2.besov(&specs.e[3])?,
    ];
    let d_terms = [
        n.ap.besov(&specs.d[0])?,
        n.up.besov(&specs.d[1])?,
        n.a2.besov(&specs.d[2])?,
        n.u2.besov(&specs.d[3])?,
        n.dap.besov(&specs.d[4])?,
    ];
    Ok(FunctionalRecord {
        t: state.t,
        p,
        j1,
        a_low: e[0],
        u_low: e[1],
        a_high: e[2],
        u_high: e[3],
        e_p: e.iter().sum(),
        d_terms,
        d_p: d_terms.iter().sum(),
    })
}

/// Time-norm versions over a trajectory: `E_p` with Chemin-Lerner `L^inf_t` norms and
/// the time-integrated `D_p` with `L^1_t` norms.
pub fn time_functionals(
    partition: &LpPartition,
    states: &[FieldState],
    params: &RieszParams,
    p: f64,
    j1: i32,
) -> Result<(f64, f64)> {
    let grid = partition.grid();
    let times: Vec<f64> = states.iter().map(|s| s.t).collect();
    let specs = functional_specs(grid.dim(), params.s_star(), p, j1);
    let norms = states
        .iter()
        .map(|s| snapshot_norms(partition, s, p))
        .collect::<Result<Vec<_>>>()?;
    let series = |f: fn(&SnapshotNorms) -> &BlockNorms| -> Vec<BlockNorms> {
        norms.iter().map(|n| f(n).clone()).collect()
    };
    let (a2, u2, ap, up, dap) = (
        series(|n| &n.a2),
        series(|n| &n.u2),
        series(|n| &n.ap),
        series(|n| &n.up),
        series(|n| &n.dap),
    );
    let inf = f64::INFINITY;
    let e = chemin_lerner_from_blocks(&times, &ap, inf, &specs.e[0])?
        + chemin_lerner_from_blocks(&times, &up, inf, &specs.e[1])?
        + chemin_lerner_from_blocks(&times, &a2, inf, &specs.e[2])?
        + chemin_lerner_from_blocks(&times, &u2, inf, &specs.e[3])?;
    let d = chemin_lerner_from_blocks(&times, &ap, 1.0, &specs.d[0])?
        + chemin_lerner_from_blocks(&times, &up, 1.0, &specs.d[1])?
        + chemin_lerner_from_blocks(&times, &a2, 1.0, &specs.d[2])?
        + chemin_lerner_from_blocks(&times, &u2, 1.0, &specs.d[3])?
        + chemin_lerner_from_blocks(&times, &dap, 1.0, &specs.d[4])?;
    Ok((e, d))
}

/// `(1/2) int (1 + a) |u|^2 + (c/2) ||Lambda^{s*-1} a||^2`, the physical energy per unit
/// background density. It dissipates at rate `lambda int (1 + a) |u|^2`.
pub fn physical_energy(grid: &SpectralGrid, state: &FieldState, params: &RieszParams) -> Result<f64> {
    state.validate(grid)?;
    let dv = grid.cell_volume();
    let kinetic: f64 = (0..grid.len())
        .map(|i| (1.0 + state.a[i]) * state.u.iter().map(|c| c[i] * c[i]).sum::<f64>())
        .sum::<f64>()
        * dv;
    let potential = grid.l2_norm(&frac_lambda(grid, &state.a, params.s_star() - 1.0)?).powi(2);
    Ok(0.5 * kinetic + 0.5 * params.coupling() * potential)
}

/// `L_j^2` together with `||Lambda^{s*} a_j||^2 + ||Lambda u_j||^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovBlock {
    pub j: i32,
    pub value: f64,
    pub reference: f64,
}

impl LyapunovBlock {
    pub fn ratio(&self) -> f64 {
        self.value / self.reference
    }
}

/// `L_j^2 = ||Lambda^{s*} a_j||^2 + ||Lambda u_j||^2 + int S_{j-1} a |Lambda u_j|^2
///          - 2 c_tilde int a_j div u_j` for a high block `j >= J1 - 1`.
pub fn lyapunov_block(
    partition: &LpPartition,
    state: &FieldState,
    j: i32,
    j1: i32,
    c_tilde: f64,
    params: &RieszParams,
) -> Result<LyapunovBlock> {
    if j < j1 - 1 {
        return Err(Error::BlockOutOfRange {
            j,
            j_min: j1 - 1,
            j_max: partition.j_max(),
        });
    }
    if !(c_tilde >= 0.0) {
        return Err(Error::InvalidParameter(format!("c_tilde must be >= 0, got {c_tilde}")));
    }
    let grid = partition.grid();
    state.validate(grid)?;
    let a_j = partition.dyadic_block(&state.a, j)?;
    let u_j = state
        .u
        .iter()
        .map(|c| partition.dyadic_block(c, j))
        .collect::<Result<Vec<_>>>()?;
    let lam_a = frac_lambda(grid, &a_j, params.s_star())?;
    let lam_u = u_j
        .iter()
        .map(|c| frac_lambda(grid, c, 1.0))
        .collect::<Result<Vec<_>>>()?;
    let low = partition.low_pass(&state.a, j - 1)?;
    let dv = grid.cell_volume();
    let grad_sq: Vec<f64> = (0..grid.len())
        .map(|i| lam_u.iter().map(|c| c[i] * c[i]).sum())
        .collect();
    let reference = grid.l2_norm(&lam_a).powi(2) + grad_sq.iter().sum::<f64>() * dv;
    let weighted: f64 = low.iter().zip(&grad_sq).map(|(a, g)| a * g).sum::<f64>() * dv;
    let cross = grid.inner(&a_j, &divergence(grid, &u_j)?);
    Ok(LyapunovBlock {
        j,
        value: reference + weighted - 2.0 * c_tilde * cross,
        reference,
    })
}

/// Log-log least-squares fit of a norm series against `1 + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub window: (f64, f64),
    pub slope: f64,
    pub predicted: f64,
    pub rel_err: f64,
    pub r2: f64,
    pub samples: usize,
}

impl DecayFit {
    pub const CSV_HEADER: &'static str = "name,t0,t1,slope,predicted,rel_err,r2";

    pub fn to_csv_row(&self, name: &str) -> String {
        format!(
            "{name},{},{},{:.6},{:.6},{:.6},{:.6}",
            self.window.0, self.window.1, self.slope, self.predicted, self.rel_err, self.r2
        )
    }
}

/// Default window `[max(1, t_end / 10), t_end]`.
pub fn default_fit_window(t_end: f64) -> (f64, f64) {
    ((t_end / 10.0).max(1.0), t_end)
}

/// Fits `log(norm) = c + slope log(1 + t)` over samples with `t` in `window`
/// (default [`default_fit_window`] of the last time).
pub fn fit_decay(series: &[(f64, f64)], predicted: f64, window: Option<(f64, f64)>) -> Result<DecayFit> {
    let t_end = series.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let window = window.unwrap_or_else(|| default_fit_window(t_end));
    if !(window.1 > window.0) {
        return Err(Error::TimeSeries(format!("empty fit window {window:?}")));
    }
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .copied()
        .collect();
    if pts.len() < 8 {
        return Err(Error::TimeSeries(format!(
            "need at least 8 samples in the fit window, got {}",
            pts.len()
        )));
    }
    if let Some((t, v)) = pts.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::TimeSeries(format!("nonpositive norm {v} at t = {t}")));
    }
    let xs: Vec<f64> = pts.iter().map(|(t, _)| (1.0 + t).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, v)| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(DecayFit {
        window,
        slope,
        predicted,
        rel_err: (slope - predicted).abs() / predicted.abs(),
        r2,
        samples: pts.len(),
    })
}

/// Exponent `-(sigma - sigma1) / (2 s*)` of the low-frequency decay.
pub fn predicted_exponent(sigma: f64, sigma1: f64, s_star: f64) -> f64 {
    -(sigma - sigma1) / (2.0 * s_star)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::sample_band_field;
    use crate::solver::{integrate, perturbation_preset, PresetKind, SolverConfig};
    use crate::spectrum::{log_space, ModeSystem};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid1(n: usize, l: f64) -> SpectralGrid {
        SpectralGrid::new(1, &[l], &[n]).unwrap()
    }

    fn random_state(grid: &SpectralGrid, seed: u64, amp: f64) -> FieldState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hi = grid.max_xi_within(0.5);
        let lo = grid.min_nonzero_xi();
        let mut s = FieldState::zeros(grid, 0.0);
        let scale = |f: Vec<f64>| -> Vec<f64> {
            let m = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            f.into_iter().map(|v| amp * v / m).collect()
        };
        s.a = scale(sample_band_field(grid, lo, hi, &mut rng).unwrap());
        for c in s.u.iter_mut() {
            *c = scale(sample_band_field(grid, lo, hi, &mut rng).unwrap());
        }
        s
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn effective_velocity_examples() {
        let grid = SpectralGrid::new(2, &[6.0, 9.0], &[16, 16]).unwrap();
        let params = RieszParams::from_s_star(2, 0.4).unwrap();
        let mut s = random_state(&grid, 1, 0.1);
        s.a = vec![0.0; grid.len()];
        let z = effective_velocity(&grid, &s, &params).unwrap();
        assert_eq!(z, s.u);

        let s = random_state(&grid, 2, 0.1);
        let force = grad_frac_lambda(&grid, &s.a, 2.0 * 0.4 - 2.0).unwrap();
        let cancel = FieldState {
            a: s.a.clone(),
            u: force.iter().map(|c| c.iter().map(|v| -v).collect()).collect(),
            t: 0.0,
        };
        let z = effective_velocity(&grid, &cancel, &params).unwrap();
        assert!(z.iter().flatten().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn effective_velocity_is_linear() {
        let grid = SpectralGrid::new(2, &[6.0, 9.0], &[16, 16]).unwrap();
        let params = RieszParams::from_s_star(2, 0.7).unwrap();
        let s1 = random_state(&grid, 3, 0.2);
        let s2 = random_state(&grid, 4, 0.3);
        let sum = FieldState {
            a: s1.a.iter().zip(&s2.a).map(|(x, y)| x + y).collect(),
            u: s1
                .u
                .iter()
                .zip(&s2.u)
                .map(|(x, y)| x.iter().zip(y).map(|(x, y)| x + y).collect())
                .collect(),
            t: 0.0,
        };
        let z1 = effective_velocity(&grid, &s1, &params).unwrap();
        let z2 = effective_velocity(&grid, &s2, &params).unwrap();
        let z = effective_velocity(&grid, &sum, &params).unwrap();
        for i in 0..2 {
            let added: Vec<f64> = z1[i].iter().zip(&z2[i]).map(|(x, y)| x + y).collect();
            assert!(max_diff(&z[i], &added) < 1e-13);
        }
    }

    #[test]
    fn residuals_vanish_on_zero_trajectory_and_need_three_snapshots() {
        let grid = grid1(16, 2.0 * PI);
        let params = RieszParams::from_s_star(1, 0.5).unwrap();
        let w: Vec<FieldState> = (0..3).map(|k| FieldState::zeros(&grid, k as f64)).collect();
        assert_eq!(a_equation_residual(&grid, &params, &w, 2.0 / 3.0).unwrap(), 0.0);
        assert_eq!(z_equation_residual(&grid, &params, &w, 2.0 / 3.0).unwrap(), 0.0);
        assert!(z_equation_residual(&grid, &params, &w[..2], 2.0 / 3.0).is_err());
    }

    #[test]
    fn residuals_are_small_along_a_linear_run() {
        let grid = grid1(64, 16.0 * PI);
        let params = RieszParams::from_s_star(1, 0.6).unwrap();
        let init = perturbation_preset(PresetKind::SmoothBump, 0.01, &grid, 0.0).unwrap();
        let mut cfg = SolverConfig::new(1e-3, 0.5);
        cfg.nonlinear = false;
        cfg.snapshot_times = vec![0.499, 0.5];
        let mut cfg_start = cfg.clone();
        cfg_start.t_end = 0.498;
        let a = integrate(&grid, &init, &params, &cfg_start).unwrap();
        let mut window = vec![a.last().clone()];
        let b = integrate(&grid, a.last(), &params, &{
            let mut c = cfg.clone();
            c.t_end = 0.002;
            c.snapshot_times = vec![0.499];
            c
        })
        .unwrap();
        window.extend(b.snapshots.into_iter().skip(1));
        assert_eq!(window.len(), 3);
        // Linear flow: residual is the O(dt^2) differencing error plus the quadratic
        // terms the linear run omits, which scale with the amplitude.
        let ra = a_equation_residual(&grid, &params, &window, 2.0 / 3.0).unwrap();
        let rz = z_equation_residual(&grid, &params, &window, 2.0 / 3.0).unwrap();
        assert!(ra < 0.05 && rz < 0.05, "ra = {ra}, rz = {rz}");
    }

    #[test]
    fn functionals_of_zero_state_and_scaling() {
        let grid = grid1(256, 64.0 * PI);
        let part = LpPartition::new(&grid).unwrap();
        let params = RieszParams::from_s_star(1, 0.5).unwrap();
        let rec = energy_functionals(&part, &FieldState::zeros(&grid, 0.0), &params, 2.0, 0).unwrap();
        assert_eq!(rec.e_p, 0.0);
        assert_eq!(rec.d_p, 0.0);

        let s = random_state(&grid, 5, 0.1);
        let r1 = energy_functionals(&part, &s, &params, 3.0, 0).unwrap();
        let r2 = energy_functionals(&part, &s.scaled(-2.5), &params, 3.0, 0).unwrap();
        for ((_, x), (_, y)) in r1.components().iter().zip(r2.components().iter()) {
            assert!((y - 2.5 * x).abs() <= 1e-12 * y.abs().max(1e-300));
        }
        let sum: f64 = r1.components().iter().map(|c| c.1).sum();
        assert_eq!(r1.e_p, sum);
        assert!(r1.components().iter().all(|c| c.1 >= 0.0));
    }

    #[test]
    fn low_shell_density_mode_only_feeds_a_low() {
        let grid = grid1(256, 64.0 * PI);
        let part = LpPartition::new(&grid).unwrap();
        let params = RieszParams::from_s_star(1, 0.5).unwrap();
        // |xi| = 1/8, far below the J1 = 0 threshold
        let s = perturbation_preset(PresetKind::SingleMode { mode: 4 }, 0.1, &grid, 0.0).unwrap();
        let rec = energy_functionals(&part, &s, &params, 2.0, 0).unwrap();
        assert!(rec.a_low > 0.0);
        assert_eq!(rec.u_low, 0.0);
        assert!(rec.a_high < 1e-12 * rec.a_low && rec.u_high == 0.0);
    }

    #[test]
    fn time_functionals_bound_instantaneous_values() {
        let grid = grid1(128, 32.0 * PI);
        let part = LpPartition::new(&grid).unwrap();
        let params = RieszParams::from_s_star(1, 0.5).unwrap();
        let init = perturbation_preset(PresetKind::SmoothBump, 0.05, &grid, 0.0).unwrap();
        let mut cfg = SolverConfig::new(0.05, 2.0);
        cfg.snapshot_times = (1..40).map(|k| 0.05 * k as f64).collect();
        let traj = integrate(&grid, &init, &params, &cfg).unwrap();
        let (e, d) = time_functionals(&part, &traj.snapshots, &params, 2.0, 0).unwrap();
        for s in &traj.snapshots {
            assert!(energy_functionals(&part, s, &params, 2.0, 0).unwrap().e_p <= e * (1.0 + 1e-12));
        }
        assert!(d > 0.0);
    }

    #[test]
    fn physical_energy_decreases() {
        let grid = grid1(128, 32.0 * PI);
        let params = RieszParams::from_s_star(1, 0.3).unwrap();
        let init = perturbation_preset(PresetKind::SmoothBump, 0.2, &grid, 0.0).unwrap();
        let mut cfg = SolverConfig::new(0.05, 5.0);
        cfg.snapshot_times = (1..100).map(|k| 0.05 * k as f64).collect();
        let traj = integrate(&grid, &init, &params, &cfg).unwrap();
        let e: Vec<f64> = traj
            .snapshots
            .iter()
            .map(|s| physical_energy(&grid, s, &params).unwrap())
            .collect();
        for w in e.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-6));
        }
        assert!(e.last().unwrap() < &e[0]);
    }

    #[test]
    fn lyapunov_examples() {
        let grid = grid1(128, 32.0 * PI);
        let part = LpPartition::new(&grid).unwrap();
        let params = RieszParams::from_s_star(1, 0.5).unwrap();
        let s = random_state(&grid, 7, 0.1);
        let j = 0;
        let mut no_a = s.clone();
        no_a.a = vec![0.0; grid.len()];
        let l = lyapunov_block(&part, &no_a, j, 0, 0.0, &params).unwrap();
        let u_j = part.dyadic_block(&s.u[0], j).unwrap();
        let expect = grid.l2_norm(&frac_lambda(&grid, &u_j, 1.0).unwrap()).powi(2);
        assert!((l.value - expect).abs() < 1e-12 * expect);

        let mut no_u = s.clone();
        no_u.u = vec![vec![0.0; grid.len()]];
        let l = lyapunov_block(&part, &no_u, j, 0, 0.0, &params).unwrap();
        let a_j = part.dyadic_block(&s.a, j).unwrap();
        let expect = grid.l2_norm(&frac_lambda(&grid, &a_j, 0.5).unwrap()).powi(2);
        assert!((l.value - expect).abs() < 1e-12 * expect);

        assert!(lyapunov_block(&part, &s, -2, 0, 0.05, &params).is_err());
    }

    #[test]
    fn lyapunov_equivalence_bracket() {
        let grid = grid1(128, 32.0 * PI);
        let part = LpPartition::new(&grid).unwrap();
        let params = RieszParams::from_s_star(1, 0.5).unwrap();
        let (c_tilde, amp) = (0.05, 0.01);
        let mut worst: f64 = 0.0;
        for seed in 0..10 {
            let s = random_state(&grid, 100 + seed, amp);
            for j in -1..=part.j_max() {
                let l = lyapunov_block(&part, &s, j, 0, c_tilde, &params).unwrap();
                if l.reference > 0.0 {
                    worst = worst.max((l.ratio() - 1.0).abs());
                }
            }
        }
        // |cross| <= c_tilde 2^{...} bounded on high blocks; weighted term <= ||a||_inf
        assert!(worst < 0.5, "bracket half-width {worst}");
    }

    #[test]
    fn fit_decay_examples() {
        let ts: Vec<f64> = (0..=100).map(|k| k as f64).collect();
        let exact: Vec<(f64, f64)> = ts.iter().map(|&t| (t, (1.0 + t).powf(-2.0))).collect();
        let fit = fit_decay(&exact, -2.0, None).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-10);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert_eq!(fit.window, (10.0, 100.0));

        let scaled: Vec<(f64, f64)> = exact.iter().map(|&(t, v)| (t, 7.5 * v)).collect();
        let fit2 = fit_decay(&scaled, -2.0, None).unwrap();
        assert!((fit2.slope - fit.slope).abs() < 1e-12);

        let exp: Vec<(f64, f64)> = (0..=90).map(|k| 1.0 + 0.1 * k as f64).map(|t| (t, (-t).exp())).collect();
        let fe = fit_decay(&exp, -1.0, Some((1.0, 10.0))).unwrap();
        assert!(fe.slope < -3.0 && fe.r2 < 0.999);

        assert!(fit_decay(&exact[..5], -2.0, Some((0.0, 4.0))).is_err());
        let mut bad = exact.clone();
        bad[50].1 = 0.0;
        assert!(fit_decay(&bad, -2.0, None).is_err());
    }

    #[test]
    fn z_component_of_low_modes_is_damped() {
        // Compressible part of z: Lambda^{-1} div z = m - r^{2s*-1} a. On the slow branch
        // m ~ r^{2s*-1} a (1 + r^{2s*}), leaving z ~ r^{4s*-1} a.
        for s in [0.25, 0.5, 0.75] {
            let k = if s >= 0.5 { (2.0 * s as f64).min(1.0) } else { 4.0 * s - 1.0 };
            let mut c: f64 = 0.0;
            for r in log_space(1e-4, 0.2, 40) {
                let w = r.powf(2.0 * s - 1.0);
                for t in [0.5, 2.0, 10.0, 50.0, 500.0] {
                    let p = ModeSystem::new(r, s).propagator(t).unwrap();
                    for col in 0..2 {
                        let (a, m) = (p[0][col], p[1][col]);
                        let z0 = if col == 0 { -w } else { 1.0 };
                        let z = m - w * a;
                        let bound = z0.abs() * (-t / 2.0f64).exp() + r.powf(k) * a.abs();
                        c = c.max(z.abs() / bound);
                    }
                }
            }
            assert!(c.is_finite() && c < 10.0, "s* = {s}: C = {c}");
        }
    }
}
