use anyhow::{anyhow, bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use riesz_core::diagnostics::{
    a_equation_residual, default_fit_window, effective_velocity, energy_functionals, fit_decay, lyapunov_block,
    physical_energy, predicted_exponent, z_equation_residual, DecayFit, FunctionalRecord,
};
use riesz_core::lp::{phi, sample_annulus_field, BesovSpec, LpPartition, NormReport};
use riesz_core::solver::{integrate_with_observer, perturbation_preset, DiagnosticRecord, RunStatus, Trajectory};
use riesz_core::spectrum::{
    asymptotic_check, dissipation_constant, eigen_scan_rows, linear_decay_quadrature, log_space, DecayPoint,
    DecayProfile, QuadratureOptions, Regime, EIGEN_SCAN_HEADER,
};
use riesz_core::grid::gradient;
use riesz_core::{FieldState, RieszParams, SpectralGrid};

use crate::artifacts::{csv_field, num, ArtifactWriter, RunHeader};
use crate::config::{Config, SweepAxis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Kind {
    Simulate,
    LinearAnalyze,
    DecayVerify,
    LpInspect,
    Sweep,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::Simulate => "simulate",
            Kind::LinearAnalyze => "linear-analyze",
            Kind::DecayVerify => "decay-verify",
            Kind::LpInspect => "lp-inspect",
            Kind::Sweep => "sweep",
        }
    }
}

/// One invocation of the harness.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: Kind,
    pub config: Config,
    pub config_digest: String,
    pub out: std::path::PathBuf,
    pub seed: u64,
    pub workers: usize,
}

/// How a completed experiment ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Completion {
    Ok,
    /// The simulation stopped early under the blow-up policy; artifacts describe the abort.
    Aborted(String),
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Completion> {
    let header = RunHeader {
        experiment: spec.name.clone(),
        kind: spec.kind.as_str().into(),
        config_digest: spec.config_digest.clone(),
        seed: spec.seed,
        grid: spec.config.grid_descriptor(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers.max(1))
        .build()
        .context("building worker pool")?;
    let mut w = ArtifactWriter::create(&spec.out, header)?;
    let completion = pool.install(|| match spec.kind {
        Kind::Simulate => simulate(&spec.config, &mut w),
        Kind::LinearAnalyze => linear_analyze(&spec.config, &mut w).map(|_| Completion::Ok),
        Kind::DecayVerify => decay_verify(&spec.config, &mut w).map(|_| Completion::Ok),
        Kind::LpInspect => lp_inspect(&spec.config, spec.seed, &mut w).map(|_| Completion::Ok),
        Kind::Sweep => sweep(&spec.config, &mut w).map(|_| Completion::Ok),
    })?;
    let manifest = w.finish()?;
    log::info!("wrote {}", manifest.display());
    Ok(completion)
}

// ---------------------------------------------------------------- simulate

struct Setup {
    grid: SpectralGrid,
    params: RieszParams,
    initial: FieldState,
}

fn setup(cfg: &Config) -> Result<Setup> {
    let grid = cfg.build_grid()?;
    let params = cfg.build_params()?;
    let mut initial =
        perturbation_preset(cfg.preset_kind()?, cfg.preset.amplitude, &grid, cfg.sigma1()).context("preset")?;
    let v = cfg.preset.velocity_amplitude;
    if v != 0.0 {
        let grad = gradient(&grid, &initial.a)?;
        let peak = (0..grid.len())
            .map(|i| grad.iter().map(|g| g[i] * g[i]).sum::<f64>().sqrt())
            .fold(0.0f64, f64::max);
        if peak > 0.0 {
            initial.u = grad.into_iter().map(|g| g.into_iter().map(|x| v * x / peak).collect()).collect();
        }
    }
    Ok(Setup { grid, params, initial })
}

fn wants(cfg: &Config, name: &str) -> bool {
    cfg.diagnostics.names.iter().any(|n| n == name)
}

/// Per-snapshot observables selected in `diagnostics.names` (residuals excluded).
fn observe(
    cfg: &Config,
    grid: &SpectralGrid,
    partition: Option<&LpPartition>,
    params: &RieszParams,
    state: &FieldState,
    functionals: &mut Vec<FunctionalRecord>,
) -> riesz_core::Result<Vec<DiagnosticRecord>> {
    let mut out = Vec::new();
    if wants(cfg, "physical_energy") {
        out.push(DiagnosticRecord::new(state.t, "physical_energy", physical_energy(grid, state, params)?));
    }
    if wants(cfg, "z_l2") {
        let z = effective_velocity(grid, state, params)?;
        out.push(DiagnosticRecord::new(state.t, "z_l2", grid.lp_norm_vector(&z, 2.0)));
    }
    let Some(part) = partition else { return Ok(out) };
    if wants(cfg, "e_p") || wants(cfg, "d_p") {
        let rec = energy_functionals(part, state, params, cfg.diagnostics.p, cfg.diagnostics.j1)?;
        if wants(cfg, "e_p") {
            out.push(DiagnosticRecord::new(state.t, "e_p", rec.e_p));
            for (name, v) in rec.components() {
                out.push(DiagnosticRecord::new(state.t, format!("e_p.{name}"), v));
            }
        }
        if wants(cfg, "d_p") {
            out.push(DiagnosticRecord::new(state.t, "d_p", rec.d_p));
        }
        functionals.push(rec);
    }
    if wants(cfg, "lyapunov") {
        let lo = (cfg.diagnostics.j1 - 1).max(part.j_min());
        let mut total = 0.0;
        for j in lo..=part.j_max() {
            total += lyapunov_block(part, state, j, cfg.diagnostics.j1, cfg.diagnostics.c_tilde, params)?.value;
        }
        out.push(DiagnosticRecord::new(state.t, "lyapunov", total));
    }
    Ok(out)
}

struct SimRun {
    setup: Setup,
    trajectory: Trajectory,
    functionals: Vec<FunctionalRecord>,
}

fn run_simulation(cfg: &Config) -> Result<SimRun> {
    let setup = setup(cfg)?;
    let solver = cfg.solver_config()?;
    let needs_partition = ["e_p", "d_p", "lyapunov"].iter().any(|n| wants(cfg, n));
    let partition = if needs_partition {
        Some(LpPartition::new(&setup.grid)?)
    } else {
        None
    };
    let mut functionals = Vec::new();
    let grid = &setup.grid;
    let params = &setup.params;
    let trajectory = integrate_with_observer(grid, &setup.initial, params, &solver, |state| {
        observe(cfg, grid, partition.as_ref(), params, state, &mut functionals)
    })?;
    Ok(SimRun {
        setup,
        trajectory,
        functionals,
    })
}

/// Residual records at the interior snapshots, each from its centered triple.
fn residual_records(cfg: &Config, run: &SimRun) -> Result<Vec<DiagnosticRecord>> {
    let snaps = &run.trajectory.snapshots;
    let mut out = Vec::new();
    if snaps.len() < 3 {
        if wants(cfg, "a_residual") || wants(cfg, "z_residual") {
            log::warn!("residual diagnostics need at least 3 snapshots, got {}", snaps.len());
        }
        return Ok(out);
    }
    let (grid, params) = (&run.setup.grid, &run.setup.params);
    for w in snaps.windows(3) {
        let t = w[1].t;
        if wants(cfg, "a_residual") {
            let r = a_equation_residual(grid, params, w, cfg.solver.dealias)?;
            out.push(DiagnosticRecord::new(t, "a_residual", r));
        }
        if wants(cfg, "z_residual") {
            let r = z_equation_residual(grid, params, w, cfg.solver.dealias)?;
            out.push(DiagnosticRecord::new(t, "z_residual", r));
        }
    }
    Ok(out)
}

fn status_json(status: &RunStatus) -> serde_json::Value {
    match status {
        RunStatus::Completed => json!({ "status": status.as_str() }),
        RunStatus::PositivityViolation { t, min_density } => {
            json!({ "status": status.as_str(), "t": t, "min_density": min_density })
        }
        RunStatus::Blowup { t } => json!({ "status": status.as_str(), "t": t }),
    }
}

fn series(traj: &Trajectory, name: &str) -> Vec<(f64, f64)> {
    traj.diagnostics
        .iter()
        .flatten()
        .filter(|r| r.name == name)
        .map(|r| (r.t, r.value))
        .collect()
}

pub const FUNCTIONALS_HEADER: &str = "t,p,j1,a_low,u_low,a_high,u_high,e_p,d1,d2,d3,d4,d5,d_p";

fn functional_row(r: &FunctionalRecord) -> String {
    let mut cols = vec![num(r.t), num(r.p), r.j1.to_string()];
    cols.extend([r.a_low, r.u_low, r.a_high, r.u_high, r.e_p].map(num));
    cols.extend(r.d_terms.iter().map(|&v| num(v)));
    cols.push(num(r.d_p));
    cols.join(",")
}

fn simulate(cfg: &Config, w: &mut ArtifactWriter) -> Result<Completion> {
    let run = run_simulation(cfg)?;
    let traj = &run.trajectory;
    let mut records: Vec<DiagnosticRecord> = traj.diagnostics.iter().flatten().cloned().collect();
    records.extend(residual_records(cfg, &run)?);
    records.sort_by(|a, b| a.t.total_cmp(&b.t));
    w.ndjson("diagnostics.ndjson", &records)?;

    if !run.functionals.is_empty() {
        let rows: Vec<String> = run.functionals.iter().map(functional_row).collect();
        w.csv("functionals.csv", FUNCTIONALS_HEADER, &rows)?;
    }

    let s_star = run.setup.params.s_star();
    let predicted = predicted_exponent(0.0, cfg.sigma1(), s_star);
    let window = cfg
        .diagnostics
        .fit_window
        .map(|[a, b]| (a, b))
        .unwrap_or_else(|| default_fit_window(cfg.solver.t_end));
    let mut fit_rows = Vec::new();
    for name in ["l2_a"] {
        match fit_decay(&series(traj, name), predicted, Some(window)) {
            Ok(f) => fit_rows.push(f.to_csv_row(name)),
            Err(e) => log::info!("no decay fit for {name}: {e}"),
        }
    }
    if !fit_rows.is_empty() {
        w.csv("decay_fits.csv", DecayFit::CSV_HEADER, &fit_rows)?;
    }

    if cfg.snapshots.write {
        for (i, s) in traj.snapshots.iter().enumerate() {
            w.snapshot(&format!("snapshots/state_{i:05}.bin"), &run.setup.grid, s)?;
        }
    }

    let last = traj.last();
    let summary = json!({
        "run": status_json(&traj.status),
        "steps": traj.steps,
        "t_last_snapshot": last.t,
        "min_density": last.min_density(),
        "snapshots": traj.snapshots.len(),
        "s_star": s_star,
        "integrator": cfg.solver.integrator,
        "dt": cfg.solver.dt,
    });
    w.json("summary.json", &summary)?;
    Ok(match traj.status {
        RunStatus::Completed => Completion::Ok,
        RunStatus::PositivityViolation { t, min_density } => {
            Completion::Aborted(format!("positivity violation at t = {t}, min density {min_density}"))
        }
        RunStatus::Blowup { t } => Completion::Aborted(format!("blow-up at t = {t}")),
    })
}

// ---------------------------------------------------------------- linear-analyze

fn linear_analyze(cfg: &Config, w: &mut ArtifactWriter) -> Result<()> {
    let lin = &cfg.linear;
    let radii = log_space(lin.xi_min, lin.xi_max, lin.points);
    let mut summary = Vec::new();
    for &s in &lin.s_star {
        if !(s > 0.0 && s < 1.0) {
            bail!("linear.s_star: values must lie in (0, 1), got {s}");
        }
        w.csv(&format!("eigen_scan_s{s}.csv"), EIGEN_SCAN_HEADER, &eigen_scan_rows(s, &radii))?;
        let mut rows = Vec::new();
        let mut worst = [0.0f64; 4];
        for (k, regime) in [Regime::Low, Regime::High].into_iter().enumerate() {
            let tag = if k == 0 { "low" } else { "high" };
            for r in asymptotic_check(s, regime) {
                rows.push(format!("{tag},{},{},{}", num(r.xi_norm), num(r.first), num(r.second)));
                worst[2 * k] = worst[2 * k].max((r.first - 1.0).abs());
                worst[2 * k + 1] = worst[2 * k + 1].max((r.second - 1.0).abs());
            }
        }
        w.csv(&format!("asymptotic_s{s}.csv"), "regime,xi,first_ratio,second_ratio", &rows)?;
        let c = dissipation_constant(s, &radii);
        summary.push(format!(
            "{},{},{}",
            num(s),
            num(c),
            worst.map(num).join(",")
        ));
    }
    w.csv(
        "linear_summary.csv",
        "s_star,dissipation_constant,low_first_dev,low_second_dev,high_first_dev,high_second_dev",
        &summary,
    )
}

// ---------------------------------------------------------------- decay-verify

struct DecayCase {
    name: String,
    dim: usize,
    sigma: f64,
    sigma1: f64,
    s_star: f64,
}

fn decay_cases(cfg: &Config) -> Vec<DecayCase> {
    let dc = &cfg.decay;
    let mut cases = Vec::new();
    for &d in &dc.dims {
        let dd = d as f64;
        let pairs: Vec<[f64; 2]> = if dc.pairs.is_empty() {
            vec![[0.0, -dd / 2.0], [dd / 2.0 - 1.0, -dd / 2.0]]
        } else {
            dc.pairs.clone()
        };
        let mut seen = Vec::new();
        for [sigma, sigma1] in pairs {
            if seen.contains(&(sigma, sigma1)) {
                continue;
            }
            seen.push((sigma, sigma1));
            if sigma <= sigma1 {
                log::warn!("skipping non-integrable pair d={d} sigma={sigma} sigma1={sigma1}");
                continue;
            }
            for &s in &dc.s_star {
                cases.push(DecayCase {
                    name: format!("d{d}_sigma{sigma}_sigma1{sigma1}_s{s}"),
                    dim: d,
                    sigma,
                    sigma1,
                    s_star: s,
                });
            }
        }
    }
    cases
}

fn decay_verify(cfg: &Config, w: &mut ArtifactWriter) -> Result<()> {
    let dc = &cfg.decay;
    let t_grid = log_space(dc.t_min, dc.t_max, dc.points);
    let opts = QuadratureOptions {
        rel_tol: dc.rel_tol,
        ..QuadratureOptions::default()
    };
    let cases = decay_cases(cfg);
    let results: Vec<Result<Vec<DecayPoint>>> = cases
        .par_iter()
        .map(|c| {
            let profile = DecayProfile {
                dim: c.dim,
                sigma1: c.sigma1,
                cutoff: dc.cutoff,
            };
            linear_decay_quadrature(&profile, c.s_star, c.sigma, &t_grid, &opts).with_context(|| c.name.clone())
        })
        .collect();
    let window = Some((dc.t_min, dc.t_max));
    let mut fits = Vec::new();
    let mut series_rows = Vec::new();
    for (c, pts) in cases.iter().zip(results) {
        let pts = pts?;
        let predicted = predicted_exponent(c.sigma, c.sigma1, c.s_star);
        let full: Vec<(f64, f64)> = pts.iter().map(|p| (p.t, p.norm)).collect();
        let heat: Vec<(f64, f64)> = pts.iter().map(|p| (p.t, p.reference)).collect();
        fits.push(fit_decay(&full, predicted, window)?.to_csv_row(&c.name));
        fits.push(fit_decay(&heat, predicted, window)?.to_csv_row(&format!("{}_heat", c.name)));
        series_rows.extend(pts.iter().map(|p| format!("{},{}", c.name, p.to_csv_row())));
    }
    if dc.simulate {
        let run = run_simulation(cfg)?;
        if !run.trajectory.status.is_completed() {
            bail!("decay simulation aborted: {}", run.trajectory.status.as_str());
        }
        let win = cfg
            .diagnostics
            .fit_window
            .map(|[a, b]| (a, b))
            .unwrap_or_else(|| default_fit_window(cfg.solver.t_end));
        let predicted = predicted_exponent(0.0, cfg.sigma1(), run.setup.params.s_star());
        let f = fit_decay(&series(&run.trajectory, "l2_a"), predicted, Some(win))?;
        fits.push(f.to_csv_row("simulation_l2_a"));
    }
    w.csv("decay_fits.csv", DecayFit::CSV_HEADER, &fits)?;
    w.csv("decay_series.csv", &format!("name,{}", DecayPoint::CSV_HEADER), &series_rows)
}

// ---------------------------------------------------------------- lp-inspect

fn lp_inspect(cfg: &Config, seed: u64, w: &mut ArtifactWriter) -> Result<()> {
    let grid = cfg.build_grid()?;
    let part = LpPartition::new(&grid)?;
    let (lo, hi) = part.covered_band();

    let shells: Vec<String> = part
        .indices()
        .map(|j| format!("{j},{},{}", num(0.75 * 2f64.powi(j)), num((8.0 / 3.0) * 2f64.powi(j))))
        .collect();
    w.csv("partition.csv", "j,support_lo,support_hi", &shells)?;

    let mut unity = Vec::new();
    let mut worst: f64 = 0.0;
    for r in log_space(lo, hi, cfg.lp.radii.max(2)) {
        let sum: f64 = part.indices().map(|j| phi(r * 2f64.powi(-j))).sum();
        worst = worst.max((sum - 1.0).abs());
        unity.push(format!("{},{},{}", num(r), num(sum), num(sum - 1.0)));
    }
    w.csv("partition_of_unity.csv", "xi,block_sum,deviation", &unity)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bern = Vec::new();
    let mut wu = Vec::new();
    for j in part.indices() {
        for sample in 0..cfg.lp.samples {
            let f = match sample_annulus_field(&grid, j, &mut rng) {
                Ok(f) => f,
                Err(e) => {
                    log::info!("annulus {j} has no resolved modes: {e}");
                    break;
                }
            };
            for &p in &cfg.lp.p {
                for q in [p, f64::INFINITY] {
                    for &k in &cfg.lp.bernstein_k {
                        let ratio = part.verify_bernstein(&f, j, k, p, q)?;
                        bern.push(format!("{j},{k},{},{},{sample},{}", num(p), num(q), num(ratio)));
                    }
                }
                if p >= 2.0 && p.is_finite() {
                    for &aw in &cfg.lp.alpha_w {
                        if p > 2.0 && aw > 1.0 {
                            continue;
                        }
                        let ratio = part.verify_wu_lower_bound(&f, j, p, aw)?;
                        wu.push(format!("{j},{},{},{sample},{}", num(p), num(aw), num(ratio)));
                    }
                }
            }
        }
    }
    w.csv("bernstein.csv", "j,k,p,q,sample,ratio", &bern)?;
    w.csv("dissipation_lower_bound.csv", "j,p,alpha_w,sample,ratio", &wu)?;

    let preset = perturbation_preset(cfg.preset_kind()?, cfg.preset.amplitude, &grid, cfg.sigma1())?;
    let d = grid.dim() as f64;
    let mut norms = Vec::new();
    for &p in &cfg.lp.p {
        for s in [d / p - 1.0, d / p] {
            let rep: NormReport = part.besov_report(0.0, &[&preset.a], &BesovSpec::full(s, p, 1.0))?;
            norms.push(rep.to_csv_row());
        }
    }
    w.csv("preset_norms.csv", NormReport::CSV_HEADER, &norms)?;

    w.json(
        "lp_summary.json",
        &json!({
            "j_min": part.j_min(),
            "j_max": part.j_max(),
            "covered_band": [lo, hi],
            "lattice_partition_residue": part.partition_residue(),
            "radial_partition_residue": worst,
        }),
    )
}

// ---------------------------------------------------------------- sweep

pub const SWEEP_HEADER: &str =
    "axis,value,status,steps,t_final,min_density,l2_a,l2_u,physical_energy,e_p,error,observed_order,message";

#[derive(Debug, Clone, Default)]
struct Headline {
    status: String,
    steps: usize,
    t_final: f64,
    min_density: f64,
    l2_a: f64,
    l2_u: f64,
    energy: f64,
    e_p: f64,
    last: Option<FieldState>,
}

fn headline(cfg: &Config) -> Result<Headline> {
    let setup = setup(cfg)?;
    let solver = cfg.solver_config()?;
    let traj = integrate_with_observer(&setup.grid, &setup.initial, &setup.params, &solver, |_| Ok(Vec::new()))?;
    let last = traj.last().clone();
    let grid = &setup.grid;
    let part = LpPartition::new(grid)?;
    let rec = energy_functionals(&part, &last, &setup.params, cfg.diagnostics.p, cfg.diagnostics.j1)?;
    Ok(Headline {
        status: traj.status.as_str().into(),
        steps: traj.steps,
        t_final: last.t,
        min_density: last.min_density(),
        l2_a: grid.l2_norm(&last.a),
        l2_u: grid.lp_norm_vector(&last.u, 2.0),
        energy: physical_energy(grid, &last, &setup.params)?,
        e_p: rec.e_p,
        last: Some(last),
    })
}

fn headline_row(axis: &str, value: f64, h: &Result<Headline>, err: Option<f64>, order: Option<f64>) -> String {
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    match h {
        Ok(h) => format!(
            "{axis},{},{},{},{},{},{},{},{},{},{},{},",
            num(value),
            h.status,
            h.steps,
            num(h.t_final),
            num(h.min_density),
            num(h.l2_a),
            num(h.l2_u),
            num(h.energy),
            num(h.e_p),
            opt(err),
            opt(order)
        ),
        Err(e) => format!("{axis},{},failed,,,,,,,,,,{}", num(value), csv_field(&format!("{e:#}"))),
    }
}

fn with_value(base: &Config, axis: SweepAxis, value: f64) -> Result<Config> {
    let mut c = base.clone();
    match axis {
        SweepAxis::SStar => {
            c.params.alpha = None;
            c.params.s_star = Some(value);
        }
        SweepAxis::Amplitude => c.preset.amplitude = value,
        SweepAxis::GridSize => {
            if value.fract() != 0.0 || value < 0.0 {
                bail!("grid size must be a whole number, got {value}");
            }
            c.grid.modes = vec![value as usize; c.grid.dim];
        }
        SweepAxis::Dt => c.solver.dt = value,
        SweepAxis::J1 => c.diagnostics.j1 = value as i32,
    }
    c.validate()?;
    Ok(c)
}

fn sweep(cfg: &Config, w: &mut ArtifactWriter) -> Result<()> {
    let axis = SweepAxis::parse(&cfg.sweep.axis)?;
    match axis {
        SweepAxis::Amplitude if cfg.sweep.bisect => sweep_bisect(cfg, w),
        SweepAxis::J1 => sweep_j1(cfg, w),
        SweepAxis::Dt => sweep_dt(cfg, w),
        _ => {
            if cfg.sweep.values.is_empty() {
                bail!("sweep.values: no values given for axis {}", axis.as_str());
            }
            let results: Vec<Result<Headline>> = cfg
                .sweep
                .values
                .par_iter()
                .map(|&v| headline(&with_value(cfg, axis, v)?))
                .collect();
            let rows: Vec<String> = cfg
                .sweep
                .values
                .iter()
                .zip(&results)
                .map(|(&v, h)| headline_row(axis.as_str(), v, h, None, None))
                .collect();
            w.csv("sweep.csv", SWEEP_HEADER, &rows)
        }
    }
}

fn relative_state_error(a: &FieldState, reference: &FieldState, grid: &SpectralGrid) -> f64 {
    let diff_a: Vec<f64> = a.a.iter().zip(&reference.a).map(|(x, y)| x - y).collect();
    let diff_u: Vec<Vec<f64>> = a
        .u
        .iter()
        .zip(&reference.u)
        .map(|(p, q)| p.iter().zip(q).map(|(x, y)| x - y).collect())
        .collect();
    let num = grid.l2_norm(&diff_a).hypot(grid.lp_norm_vector(&diff_u, 2.0));
    let den = grid.l2_norm(&reference.a).hypot(grid.lp_norm_vector(&reference.u, 2.0));
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// dt sweep with errors against a run at a quarter of the finest step; the order column
/// compares consecutive rows.
fn sweep_dt(cfg: &Config, w: &mut ArtifactWriter) -> Result<()> {
    let values: Vec<f64> = if cfg.sweep.values.is_empty() {
        (0..=cfg.sweep.halvings).map(|k| cfg.solver.dt / 2f64.powi(k as i32)).collect()
    } else {
        cfg.sweep.values.clone()
    };
    let finest = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut jobs = values.clone();
    jobs.push(finest / 4.0);
    let mut results: Vec<Result<Headline>> = jobs
        .par_iter()
        .map(|&v| headline(&with_value(cfg, SweepAxis::Dt, v)?))
        .collect();
    let reference = results.pop().unwrap();
    let grid = cfg.build_grid()?;
    let errors: Vec<Option<f64>> = results
        .iter()
        .map(|h| match (h, &reference) {
            (Ok(h), Ok(r)) if h.status == "completed" && r.status == "completed" => {
                Some(relative_state_error(h.last.as_ref()?, r.last.as_ref()?, &grid))
            }
            _ => None,
        })
        .collect();
    let mut rows = Vec::new();
    for i in 0..values.len() {
        let order = if i > 0 {
            match (errors[i - 1], errors[i]) {
                (Some(e0), Some(e1)) if e0 > 0.0 && e1 > 0.0 => {
                    Some((e0 / e1).ln() / (values[i - 1] / values[i]).ln())
                }
                _ => None,
            }
        } else {
            None
        };
        rows.push(headline_row("dt", values[i], &results[i], errors[i], order));
    }
    if let Err(e) = &reference {
        log::warn!("dt sweep reference run failed: {e:#}");
    }
    w.csv("sweep.csv", SWEEP_HEADER, &rows)
}

/// E_p components at the initial and final state for each J1, from one shared run.
fn sweep_j1(cfg: &Config, w: &mut ArtifactWriter) -> Result<()> {
    let values: Vec<f64> = if cfg.sweep.values.is_empty() {
        (-2..=2).map(f64::from).collect()
    } else {
        cfg.sweep.values.clone()
    };
    let setup = setup(cfg)?;
    let solver = cfg.solver_config()?;
    let traj = integrate_with_observer(&setup.grid, &setup.initial, &setup.params, &solver, |_| Ok(Vec::new()))?;
    let part = LpPartition::new(&setup.grid)?;
    let states = [&traj.snapshots[0], traj.last()];
    let rows: Vec<String> = values
        .par_iter()
        .map(|&v| {
            if v.fract() != 0.0 {
                return format!("{},failed,,,,,,,{}", num(v), csv_field("J1 must be an integer"));
            }
            let j1 = v as i32;
            let recs: Result<Vec<FunctionalRecord>> = states
                .iter()
                .map(|s| Ok(energy_functionals(&part, s, &setup.params, cfg.diagnostics.p, j1)?))
                .collect();
            match recs {
                Ok(recs) => recs
                    .iter()
                    .map(|r| {
                        format!(
                            "{j1},{},{},{},{},{},{},{},",
                            traj.status.as_str(),
                            num(r.t),
                            num(r.a_low),
                            num(r.u_low),
                            num(r.a_high),
                            num(r.u_high),
                            num(r.e_p)
                        )
                    })
                    .collect::<Vec<_>>()
                    .join("\n"),
                Err(e) => format!("{j1},failed,,,,,,,{}", csv_field(&format!("{e:#}"))),
            }
        })
        .collect();
    w.csv("sweep.csv", "j1,status,t,a_low,u_low,a_high,u_high,e_p,message", &rows)
}

/// Largest amplitude in `amplitude_range` whose run completes, per `s*`.
fn sweep_bisect(cfg: &Config, w: &mut ArtifactWriter) -> Result<()> {
    let s_values: Vec<f64> = if cfg.sweep.s_star.is_empty() {
        vec![cfg.s_star()?]
    } else {
        cfg.sweep.s_star.clone()
    };
    let [lo0, hi0] = cfg.sweep.amplitude_range;
    let steps = cfg.sweep.bisect_steps;
    let completes = |c: &Config, amp: f64| -> Result<bool> {
        let c = with_value(c, SweepAxis::Amplitude, amp)?;
        let setup = match setup(&c) {
            Ok(s) => s,
            // amplitudes that already violate 1 + a > 0
            Err(_) => return Ok(false),
        };
        let solver = c.solver_config()?;
        if setup.initial.min_density() < solver.positivity_floor {
            return Ok(false);
        }
        let traj = integrate_with_observer(&setup.grid, &setup.initial, &setup.params, &solver, |_| Ok(Vec::new()))?;
        Ok(traj.status.is_completed())
    };
    let rows: Vec<String> = s_values
        .par_iter()
        .map(|&s| {
            let result: Result<(f64, Option<f64>, usize)> = (|| {
                let c = with_value(cfg, SweepAxis::SStar, s)?;
                if completes(&c, hi0)? {
                    return Ok((hi0, None, 1));
                }
                if !completes(&c, lo0)? {
                    return Err(anyhow!("lower amplitude {lo0} already aborts"));
                }
                let (mut lo, mut hi) = (lo0, hi0);
                for _ in 0..steps {
                    let mid = 0.5 * (lo + hi);
                    if completes(&c, mid)? {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok((lo, Some(hi), steps + 2))
            })();
            match result {
                Ok((ok, fail, runs)) => format!(
                    "{},{},{},{runs},",
                    num(s),
                    num(ok),
                    fail.map(num).unwrap_or_default()
                ),
                Err(e) => format!("{},,,,{}", num(s), csv_field(&format!("{e:#}"))),
            }
        })
        .collect();
    w.csv(
        "sweep.csv",
        "s_star,amplitude_max,amplitude_abort,runs,message",
        &rows,
    )
}
