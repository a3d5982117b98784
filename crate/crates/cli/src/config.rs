use std::f64::consts::PI;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use riesz_core::solver::{Integrator, PresetKind, SolverConfig};
use riesz_core::{RieszParams, SpectralGrid};

/// Parsed run configuration. Every section is optional and falls back to the
/// normalized defaults; unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub grid: GridSection,
    pub params: ParamsSection,
    pub solver: SolverSection,
    pub preset: PresetSection,
    pub snapshots: SnapshotSection,
    pub diagnostics: DiagnosticsSection,
    pub linear: LinearSection,
    pub decay: DecaySection,
    pub lp: LpSection,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub modes: Vec<usize>,
    pub lengths: Vec<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            dim: 2,
            modes: vec![32, 32],
            lengths: vec![8.0 * PI, 8.0 * PI],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsSection {
    pub s_star: Option<f64>,
    pub alpha: Option<f64>,
    pub lambda: f64,
    pub kappa: f64,
    pub rho_bar: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        Self {
            s_star: None,
            alpha: None,
            lambda: 1.0,
            kappa: 1.0,
            rho_bar: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub integrator: String,
    pub dt: f64,
    pub t_end: f64,
    pub dealias: f64,
    pub positivity_floor: f64,
    pub nonlinear: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            integrator: "if-rk4".into(),
            dt: 0.01,
            t_end: 1.0,
            dealias: 2.0 / 3.0,
            positivity_floor: 0.05,
            nonlinear: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PresetSection {
    pub kind: String,
    pub amplitude: f64,
    pub mode: usize,
    pub sigma1: Option<f64>,
    /// Peak of the compressive velocity `u = U grad a / max|grad a|`; zero leaves `u = 0`.
    pub velocity_amplitude: f64,
}

impl Default for PresetSection {
    fn default() -> Self {
        Self {
            kind: "smooth-bump".into(),
            amplitude: 0.01,
            mode: 1,
            sigma1: None,
            velocity_amplitude: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnapshotSection {
    pub every: Option<f64>,
    pub times: Vec<f64>,
    pub write: bool,
}

impl Default for SnapshotSection {
    fn default() -> Self {
        Self {
            every: None,
            times: Vec::new(),
            write: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSection {
    pub names: Vec<String>,
    pub p: f64,
    pub j1: i32,
    pub c_tilde: f64,
    pub fit_window: Option<[f64; 2]>,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            names: vec!["physical_energy".into(), "e_p".into()],
            p: 2.0,
            j1: 0,
            c_tilde: 0.05,
            fit_window: None,
        }
    }
}

pub const DIAGNOSTIC_NAMES: &[&str] = &[
    "physical_energy",
    "e_p",
    "d_p",
    "z_l2",
    "lyapunov",
    "a_residual",
    "z_residual",
];

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearSection {
    pub s_star: Vec<f64>,
    pub xi_min: f64,
    pub xi_max: f64,
    pub points: usize,
}

impl Default for LinearSection {
    fn default() -> Self {
        Self {
            s_star: vec![0.25, 0.5, 0.75],
            xi_min: 1e-6,
            xi_max: 1e6,
            points: 121,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecaySection {
    pub dims: Vec<usize>,
    pub s_star: Vec<f64>,
    /// `(sigma, sigma1)` pairs; empty means `sigma in {0, d/2 - 1}` with `sigma1 = -d/2`.
    pub pairs: Vec<[f64; 2]>,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub cutoff: f64,
    pub rel_tol: f64,
    pub simulate: bool,
}

impl Default for DecaySection {
    fn default() -> Self {
        Self {
            dims: vec![1, 2, 3],
            s_star: vec![0.25, 0.75],
            pairs: Vec::new(),
            t_min: 1e2,
            t_max: 1e4,
            points: 21,
            cutoff: 1.0,
            rel_tol: 1e-3,
            simulate: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LpSection {
    pub p: Vec<f64>,
    pub bernstein_k: Vec<u32>,
    pub samples: usize,
    pub alpha_w: Vec<f64>,
    pub radii: usize,
}

impl Default for LpSection {
    fn default() -> Self {
        Self {
            p: vec![1.0, 2.0, 4.0],
            bernstein_k: vec![0, 1, 2],
            samples: 3,
            alpha_w: vec![0.5, 1.0],
            radii: 200,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub axis: String,
    pub values: Vec<f64>,
    /// For the amplitude axis: bisect for the largest non-aborting amplitude per `s*`.
    pub bisect: bool,
    pub amplitude_range: [f64; 2],
    pub bisect_steps: usize,
    /// `s*` values of the amplitude bisection; empty uses `params.s_star`.
    pub s_star: Vec<f64>,
    /// For the dt axis without explicit values: `solver.dt` halved this many times.
    pub halvings: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            axis: "s_star".into(),
            values: Vec::new(),
            bisect: false,
            amplitude_range: [0.0, 1.0],
            bisect_steps: 12,
            s_star: Vec::new(),
            halvings: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    SStar,
    Amplitude,
    J1,
    GridSize,
    Dt,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "s_star" => SweepAxis::SStar,
            "amplitude" => SweepAxis::Amplitude,
            "j1" | "J1" => SweepAxis::J1,
            "grid_size" => SweepAxis::GridSize,
            "dt" => SweepAxis::Dt,
            other => bail!(
                "sweep.axis: unknown axis `{other}`, expected one of s_star, amplitude, j1, grid_size, dt"
            ),
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::SStar => "s_star",
            SweepAxis::Amplitude => "amplitude",
            SweepAxis::J1 => "j1",
            SweepAxis::GridSize => "grid_size",
            SweepAxis::Dt => "dt",
        }
    }
}

/// Raw config text together with its digest.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: Config,
    pub digest: String,
}

pub fn load(path: Option<&Path>) -> Result<LoadedConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?,
        None => String::new(),
    };
    let name = path.map(|p| p.display().to_string()).unwrap_or_else(|| "<defaults>".into());
    let config = parse(&text).with_context(|| format!("in config {name}"))?;
    Ok(LoadedConfig {
        config,
        digest: digest_hex(text.as_bytes()),
    })
}

pub fn parse(text: &str) -> Result<Config> {
    // toml errors carry the line, column and offending key
    let config: Config = toml::from_str(text)?;
    config.validate()?;
    Ok(config)
}

pub fn digest_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.build_grid()?;
        self.build_params()?;
        self.integrator()?;
        self.preset_kind()?;
        for name in &self.diagnostics.names {
            if !DIAGNOSTIC_NAMES.contains(&name.as_str()) {
                bail!(
                    "diagnostics.names: unknown diagnostic `{name}`, expected one of {}",
                    DIAGNOSTIC_NAMES.join(", ")
                );
            }
        }
        if !(self.diagnostics.p >= 1.0) {
            bail!("diagnostics.p: must be >= 1, got {}", self.diagnostics.p);
        }
        if !(self.diagnostics.c_tilde >= 0.0) {
            bail!("diagnostics.c_tilde: must be >= 0, got {}", self.diagnostics.c_tilde);
        }
        if let Some(e) = self.snapshots.every {
            if !(e > 0.0) {
                bail!("snapshots.every: must be positive, got {e}");
            }
        }
        if let Some([t0, t1]) = self.diagnostics.fit_window {
            if !(t1 > t0 && t0 >= 1.0) {
                bail!("diagnostics.fit_window: need t1 > t0 >= 1, got [{t0}, {t1}]");
            }
        }
        if self.linear.points < 2 || !(self.linear.xi_min > 0.0 && self.linear.xi_max > self.linear.xi_min) {
            bail!("linear: need 0 < xi_min < xi_max and points >= 2");
        }
        if self.decay.points < 8 || !(self.decay.t_min >= 1.0 && self.decay.t_max > self.decay.t_min) {
            bail!("decay: need 1 <= t_min < t_max and points >= 8");
        }
        if let Some(d) = self.decay.dims.iter().find(|&&d| d == 0) {
            bail!("decay.dims: dimension must be positive, got {d}");
        }
        SweepAxis::parse(&self.sweep.axis)?;
        let [lo, hi] = self.sweep.amplitude_range;
        if !(lo >= 0.0 && hi > lo) {
            bail!("sweep.amplitude_range: need 0 <= lo < hi, got [{lo}, {hi}]");
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<SpectralGrid> {
        SpectralGrid::new(self.grid.dim, &self.grid.lengths, &self.grid.modes).context("grid")
    }

    pub fn s_star(&self) -> Result<f64> {
        Ok(self.build_params()?.s_star())
    }

    pub fn build_params(&self) -> Result<RieszParams> {
        let d = self.grid.dim;
        let p = &self.params;
        let alpha = match (p.s_star, p.alpha) {
            (Some(_), Some(_)) => bail!("params: give either s_star or alpha, not both"),
            (Some(s), None) => 2.0 * s + d as f64 - 2.0,
            (None, Some(a)) => a,
            (None, None) => d as f64 - 1.0,
        };
        RieszParams::with_coefficients(d, alpha, p.lambda, p.kappa, p.rho_bar).context("params")
    }

    pub fn integrator(&self) -> Result<Integrator> {
        Ok(match self.solver.integrator.as_str() {
            "if-rk4" => Integrator::IfRk4,
            "exp-euler" => Integrator::ExponentialEuler,
            other => bail!("solver.integrator: unknown integrator `{other}`, expected if-rk4 or exp-euler"),
        })
    }

    pub fn preset_kind(&self) -> Result<PresetKind> {
        Ok(match self.preset.kind.as_str() {
            "single-mode" => PresetKind::SingleMode { mode: self.preset.mode },
            "smooth-bump" => PresetKind::SmoothBump,
            "low-frequency-powerlaw" => PresetKind::LowFrequencyPowerlaw,
            other => bail!(
                "preset.kind: unknown preset `{other}`, expected single-mode, smooth-bump or low-frequency-powerlaw"
            ),
        })
    }

    /// `sigma1` of the preset, defaulting to `-d/2`.
    pub fn sigma1(&self) -> f64 {
        self.preset.sigma1.unwrap_or(-(self.grid.dim as f64) / 2.0)
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        let t_end = self.solver.t_end;
        let mut times: Vec<f64> = match self.snapshots.every {
            Some(every) => {
                let n = (t_end / every + 1e-9).floor() as usize;
                (1..=n).map(|k| k as f64 * every).collect()
            }
            None => self.snapshots.times.clone(),
        };
        times.retain(|&t| t > 0.0 && t <= t_end);
        times
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let mut cfg = SolverConfig::new(self.solver.dt, self.solver.t_end);
        cfg.integrator = self.integrator()?;
        cfg.dealias = self.solver.dealias;
        cfg.positivity_floor = self.solver.positivity_floor;
        cfg.nonlinear = self.solver.nonlinear;
        cfg.snapshot_times = self.snapshot_times();
        cfg.validate().context("solver")?;
        Ok(cfg)
    }

    pub fn grid_descriptor(&self) -> String {
        let modes: Vec<String> = self.grid.modes.iter().map(|m| m.to_string()).collect();
        let lengths: Vec<String> = self.grid.lengths.iter().map(|l| format!("{l:e}")).collect();
        format!("d={} modes={} lengths={}", self.grid.dim, modes.join("x"), lengths.join("x"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let c = parse("").unwrap();
        assert_eq!(c.grid.dim, 2);
        assert_eq!(c.s_star().unwrap(), 0.5);
        assert_eq!(c.integrator().unwrap(), Integrator::IfRk4);
    }

    #[test]
    fn unknown_key_reports_line_and_key() {
        let err = parse("[grid]\ndim = 1\nmodez = [16]\n").unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("modez"), "{msg}");
    }

    #[test]
    fn wrong_type_reports_line() {
        let err = parse("[solver]\n\ndt = \"fast\"\n").unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("dt"), "{msg}");
    }

    #[test]
    fn semantic_errors_name_the_key() {
        let err = parse("[solver]\nintegrator = \"euler\"\n").unwrap_err();
        assert!(format!("{err:#}").contains("solver.integrator"));
        let err = parse("[diagnostics]\nnames = [\"entropy\"]\n").unwrap_err();
        assert!(format!("{err:#}").contains("diagnostics.names"));
        let err = parse("[params]\ns_star = 0.5\nalpha = 1.0\n").unwrap_err();
        assert!(format!("{err:#}").contains("params"));
    }

    #[test]
    fn snapshot_schedule_from_interval() {
        let c = parse("[solver]\nt_end = 1.0\n[snapshots]\nevery = 0.25\n").unwrap();
        assert_eq!(c.snapshot_times(), vec![0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn alpha_and_s_star_agree() {
        let a = parse("[grid]\ndim = 1\nmodes = [16]\nlengths = [6.0]\n[params]\nalpha = 0.0\n").unwrap();
        assert_eq!(a.s_star().unwrap(), 0.5);
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            digest_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
