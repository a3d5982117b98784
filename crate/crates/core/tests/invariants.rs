use std::f64::consts::PI;

use riesz_core::diagnostics::physical_energy;
use riesz_core::grid::apply_multiplier;
use riesz_core::lp::LpPartition;
use riesz_core::solver::{integrate, perturbation_preset, PresetKind, SolverConfig};
use riesz_core::spectrum::propagator;
use riesz_core::{snapshot, Complex64, RieszParams, SpectralGrid};

fn grid2() -> SpectralGrid {
    SpectralGrid::new(2, &[8.0 * PI, 8.0 * PI], &[32, 32]).unwrap()
}

fn every(dt: f64, t_end: f64) -> Vec<f64> {
    let n = (t_end / dt).round() as usize;
    (1..n).map(|k| k as f64 * dt).collect()
}

#[test]
fn mass_and_mean_velocity_are_conserved() {
    let grid = grid2();
    for s in [0.25, 0.5, 0.75] {
        let params = RieszParams::from_s_star(2, s).unwrap();
        let init = perturbation_preset(PresetKind::SmoothBump, 0.2, &grid, -1.0).unwrap();
        let mut cfg = SolverConfig::new(0.02, 2.0);
        cfg.snapshot_times = every(0.25, 2.0);
        let traj = integrate(&grid, &init, &params, &cfg).unwrap();
        assert!(traj.status.is_completed());
        for st in &traj.snapshots {
            assert!(grid.mean(&st.a).abs() <= 1e-12, "s*={s} t={} mean a {:e}", st.t, grid.mean(&st.a));
            for c in &st.u {
                assert!(grid.mean(c).abs() <= 1e-10, "s*={s} t={} mean u {:e}", st.t, grid.mean(c));
            }
            assert!(st.a.iter().chain(st.u.iter().flatten()).all(|v| v.is_finite()));
        }
    }
}

#[test]
fn linear_run_matches_propagator_per_block() {
    let grid = grid2();
    let part = LpPartition::new(&grid).unwrap();
    let s = 0.5;
    let params = RieszParams::from_s_star(2, s).unwrap();
    let init = perturbation_preset(PresetKind::SmoothBump, 0.1, &grid, -1.0).unwrap();
    let mut cfg = SolverConfig::new(0.05, 10.0);
    cfg.nonlinear = false;
    cfg.snapshot_times = vec![1.0, 2.5, 5.0, 7.5];
    let traj = integrate(&grid, &init, &params, &cfg).unwrap();
    for st in &traj.snapshots[1..] {
        let t = st.t;
        let exact = apply_multiplier(&grid, &init.a, |xi| {
            let r = xi[0].hypot(xi[1]);
            Complex64::new(propagator(r, s, t).unwrap()[0][0], 0.0)
        })
        .unwrap();
        let got = part.block_norms(&[&st.a], 2.0).unwrap();
        let want = part.block_norms(&[&exact], 2.0).unwrap();
        let scale = want.values.iter().cloned().fold(0.0f64, f64::max);
        for (g, w) in got.values.iter().zip(&want.values) {
            assert!((g - w).abs() <= 1e-8 * scale.max(1e-300), "t={t}: {g} vs {w}");
        }
    }
}

#[test]
fn small_data_energy_does_not_increase() {
    let grid = grid2();
    let params = RieszParams::from_s_star(2, 0.5).unwrap();
    let init = perturbation_preset(PresetKind::SmoothBump, 0.01, &grid, -1.0).unwrap();
    let mut cfg = SolverConfig::new(0.02, 4.0);
    cfg.snapshot_times = every(0.1, 4.0);
    let traj = integrate(&grid, &init, &params, &cfg).unwrap();
    let energy: Vec<f64> = traj
        .snapshots
        .iter()
        .map(|st| physical_energy(&grid, st, &params).unwrap())
        .collect();
    for w in energy.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-6), "{} -> {}", w[0], w[1]);
    }
    assert!(energy.last().unwrap() < &energy[0]);
}

#[test]
fn trajectory_snapshots_round_trip() {
    let grid = grid2();
    let params = RieszParams::from_s_star(2, 0.75).unwrap();
    let init = perturbation_preset(PresetKind::SingleMode { mode: 2 }, 0.05, &grid, -1.0).unwrap();
    let traj = integrate(&grid, &init, &params, &SolverConfig::new(0.05, 0.5)).unwrap();
    let last = traj.last();
    let mut buf = Vec::new();
    snapshot::write_state(&mut buf, &grid, last).unwrap();
    let (g, back) = snapshot::read_state(buf.as_slice()).unwrap();
    assert_eq!(g.modes(), grid.modes());
    assert_eq!(&back, last);
}
