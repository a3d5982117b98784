//! Littlewood-Paley decomposition on the periodic grid and homogeneous Besov norms.
//!
//! The low-pass profile is the fixed C-infinity transition
//!
//! ```text
//! chi(r) = 1                                  r <= 3/4
//! chi(r) = h(x) / (h(x) + h(1 - x))           x = (4/3 - r) / (4/3 - 3/4)
//! chi(r) = 0                                  r >= 4/3
//! ```
//!
//! with `h(x) = exp(-1/x)` for `x > 0`. The annulus profile is
//! `phi(r) = chi(r/2) - chi(r)`, supported in `[3/4, 8/3]`, and the block
//! `u_j` multiplies the spectrum by `phi(|xi| / 2^j)`.
//!
//! On a finite grid only a window `j_min..=j_max` of blocks is resolved. The blocks
//! telescope to `chi(|xi| / 2^{j_max+1}) - chi(|xi| / 2^{j_min})`, which is exactly one on
//! `(4/3) 2^{j_min} <= |xi| <= (3/2) 2^{j_max}`; the range is chosen so that this band
//! contains every lattice wavenumber from the smallest nonzero one up to the
//! dealiased maximum.

use rand::Rng;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{multiply_spectrum, SpectralGrid};

/// Default fraction of the per-axis Nyquist band kept by the partition (2/3 rule).
pub const DEFAULT_BAND_FRACTION: f64 = 2.0 / 3.0;

const CHI_INNER: f64 = 0.75;
const CHI_OUTER: f64 = 4.0 / 3.0;

fn transition(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

/// Radial low-pass profile: one on `[0, 3/4]`, zero from `4/3` on, smooth and
/// non-increasing in between.
pub fn chi(r: f64) -> f64 {
    transition((CHI_OUTER - r) / (CHI_OUTER - CHI_INNER))
}

/// Annulus profile `chi(r/2) - chi(r)`.
pub fn phi(r: f64) -> f64 {
    chi(0.5 * r) - chi(r)
}

/// Low/high split of a Besov norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    Full,
    /// Blocks `j <= J1`.
    Low,
    /// Blocks `j >= J1 - 1`.
    High,
}

impl Flavor {
    pub fn as_str(&self) -> &'static str {
        match self {
            Flavor::Full => "full",
            Flavor::Low => "low",
            Flavor::High => "high",
        }
    }
}

/// `B^s_{p,r}` with an optional low/high restriction at threshold `j1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesovSpec {
    pub s: f64,
    pub p: f64,
    pub r: f64,
    pub flavor: Flavor,
    pub j1: i32,
}

impl BesovSpec {
    pub fn full(s: f64, p: f64, r: f64) -> Self {
        Self {
            s,
            p,
            r,
            flavor: Flavor::Full,
            j1: 0,
        }
    }

    pub fn low(s: f64, p: f64, r: f64, j1: i32) -> Self {
        Self {
            s,
            p,
            r,
            flavor: Flavor::Low,
            j1,
        }
    }

    pub fn high(s: f64, p: f64, r: f64, j1: i32) -> Self {
        Self {
            s,
            p,
            r,
            flavor: Flavor::High,
            j1,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0) || !(self.r >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "Besov exponents must lie in [1, inf], got p = {}, r = {}",
                self.p, self.r
            )));
        }
        if !self.s.is_finite() {
            return Err(Error::InvalidParameter("regularity index must be finite".into()));
        }
        Ok(())
    }
}

/// Resolved dyadic window on a grid together with the sparse block weights.
#[derive(Debug, Clone)]
pub struct LpPartition {
    grid: SpectralGrid,
    j_min: i32,
    j_max: i32,
    /// `weights[j - j_min]` lists `(storage index, phi(|xi| / 2^j))` with nonzero weight.
    weights: Vec<Vec<(usize, f64)>>,
    /// Sum of block weights per storage index.
    coverage: Vec<f64>,
}

/// Blocks of one field over the resolved window.
#[derive(Debug, Clone, PartialEq)]
pub struct LpDecomposition {
    pub j_min: i32,
    pub blocks: Vec<Vec<f64>>,
    /// Relative `L^2` size of `(u - mean u) - sum_j u_j`.
    pub residual: f64,
}

impl LpDecomposition {
    pub fn block(&self, j: i32) -> Option<&Vec<f64>> {
        usize::try_from(j - self.j_min).ok().and_then(|i| self.blocks.get(i))
    }

    pub fn j_max(&self) -> i32 {
        self.j_min + self.blocks.len() as i32 - 1
    }
}

/// `L^p` norms of every resolved block of a (possibly vector) field.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockNorms {
    pub j_min: i32,
    pub p: f64,
    pub values: Vec<f64>,
    pub residual: f64,
}

impl BlockNorms {
    pub fn j_max(&self) -> i32 {
        self.j_min + self.values.len() as i32 - 1
    }

    pub fn get(&self, j: i32) -> Option<f64> {
        usize::try_from(j - self.j_min).ok().and_then(|i| self.values.get(i).copied())
    }

    /// Index window selected by `spec`, clipped to the resolved range.
    fn window(&self, spec: &BesovSpec) -> Result<(i32, i32)> {
        window(self.j_min, self.j_max(), spec)
    }

    /// Besov (semi-)norm assembled from the block norms.
    pub fn besov(&self, spec: &BesovSpec) -> Result<f64> {
        spec.validate()?;
        if spec.p != self.p {
            return Err(Error::InvalidParameter(format!(
                "block norms were computed for p = {}, spec asks for p = {}",
                self.p, spec.p
            )));
        }
        let (lo, hi) = self.window(spec)?;
        let weighted = (lo..=hi).map(|j| 2f64.powf(j as f64 * spec.s) * self.get(j).unwrap());
        Ok(lr_sum(weighted, spec.r))
    }
}

fn window(j_min: i32, j_max: i32, spec: &BesovSpec) -> Result<(i32, i32)> {
    match spec.flavor {
        Flavor::Full => Ok((j_min, j_max)),
        _ if spec.j1 < j_min || spec.j1 > j_max => Err(Error::InvalidParameter(format!(
            "threshold J1 = {} outside resolved range [{j_min}, {j_max}]",
            spec.j1
        ))),
        Flavor::Low => Ok((j_min, spec.j1)),
        Flavor::High => Ok(((spec.j1 - 1).max(j_min), j_max)),
    }
}

/// `l^r` norm of a nonnegative sequence.
pub fn lr_sum(values: impl Iterator<Item = f64>, r: f64) -> f64 {
    if r.is_infinite() {
        values.fold(0.0, f64::max)
    } else if r == 1.0 {
        values.sum()
    } else {
        values.map(|v| v.powf(r)).sum::<f64>().powf(1.0 / r)
    }
}

impl LpPartition {
    /// Partition covering every lattice wavenumber up to the 2/3-dealiased maximum.
    pub fn new(grid: &SpectralGrid) -> Result<Self> {
        Self::with_band_fraction(grid, DEFAULT_BAND_FRACTION)
    }

    /// Partition covering lattice wavenumbers with `|k_i| <= fraction * N_i / 2`.
    pub fn with_band_fraction(grid: &SpectralGrid, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "band fraction must lie in (0, 1], got {fraction}"
            )));
        }
        let xi_min = grid.min_nonzero_xi();
        let xi_max = grid.max_xi_within(fraction);
        // (4/3) 2^j_min <= xi_min and (3/2) 2^j_max >= xi_max
        let j_min = (0.75 * xi_min).log2().floor() as i32;
        let j_max = (xi_max / 1.5).log2().ceil() as i32;
        Self::with_range(grid, j_min, j_max)
    }

    /// Partition with an explicit dyadic window.
    pub fn with_range(grid: &SpectralGrid, j_min: i32, j_max: i32) -> Result<Self> {
        if j_max - j_min + 1 < 3 {
            return Err(Error::InvalidGrid(format!(
                "grid resolves only {} dyadic shells, need at least 3",
                (j_max - j_min + 1).max(0)
            )));
        }
        let mut weights = Vec::with_capacity((j_max - j_min + 1) as usize);
        let mut coverage = vec![0.0; grid.len()];
        for j in j_min..=j_max {
            let scale = 2f64.powi(-j);
            let mut block = Vec::new();
            for idx in 1..grid.len() {
                let w = phi(grid.xi_norm(idx) * scale);
                if w > 0.0 {
                    block.push((idx, w));
                    coverage[idx] += w;
                }
            }
            weights.push(block);
        }
        Ok(Self {
            grid: grid.clone(),
            j_min,
            j_max,
            weights,
            coverage,
        })
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    pub fn indices(&self) -> impl Iterator<Item = i32> {
        self.j_min..=self.j_max
    }

    /// Band `[(4/3) 2^j_min, (3/2) 2^j_max]` on which the resolved blocks sum to one.
    pub fn covered_band(&self) -> (f64, f64) {
        (
            CHI_OUTER * 2f64.powi(self.j_min),
            1.5 * 2f64.powi(self.j_max),
        )
    }

    /// Largest deviation from one of the summed block weights over covered lattice points.
    pub fn partition_residue(&self) -> f64 {
        let (lo, hi) = self.covered_band();
        (1..self.grid.len())
            .filter(|&idx| {
                let r = self.grid.xi_norm(idx);
                r >= lo && r <= hi
            })
            .map(|idx| (self.coverage[idx] - 1.0).abs())
            .fold(0.0, f64::max)
    }

    fn check_j(&self, j: i32) -> Result<()> {
        if j < self.j_min || j > self.j_max {
            return Err(Error::BlockOutOfRange {
                j,
                j_min: self.j_min,
                j_max: self.j_max,
            });
        }
        Ok(())
    }

    fn block_from_spectrum(&self, coeffs: &[Complex64], j: i32) -> Result<Vec<f64>> {
        let mut out = vec![Complex64::new(0.0, 0.0); coeffs.len()];
        for &(idx, w) in &self.weights[(j - self.j_min) as usize] {
            out[idx] = coeffs[idx] * w;
        }
        self.grid.inverse_real(&out)
    }

    fn residual_from_spectrum(&self, coeffs: &[Complex64]) -> f64 {
        let mut total = 0.0;
        let mut missing = 0.0;
        for (idx, c) in coeffs.iter().enumerate().skip(1) {
            let e = c.norm_sqr();
            total += e;
            missing += e * (1.0 - self.coverage[idx]).powi(2);
        }
        if total == 0.0 {
            0.0
        } else {
            (missing / total).sqrt()
        }
    }

    /// Relative `L^2` mass of the field not reconstructed by the resolved blocks.
    pub fn residual(&self, field: &[f64]) -> Result<f64> {
        Ok(self.residual_from_spectrum(&self.grid.forward(field)?))
    }

    /// `u_j = F^{-1}(phi(2^{-j} xi) F u)`.
    pub fn dyadic_block(&self, field: &[f64], j: i32) -> Result<Vec<f64>> {
        self.check_j(j)?;
        let coeffs = self.grid.forward(field)?;
        self.block_from_spectrum(&coeffs, j)
    }

    /// Every resolved block of `field`.
    pub fn decompose(&self, field: &[f64]) -> Result<LpDecomposition> {
        let coeffs = self.grid.forward(field)?;
        let blocks = self
            .indices()
            .map(|j| self.block_from_spectrum(&coeffs, j))
            .collect::<Result<Vec<_>>>()?;
        Ok(LpDecomposition {
            j_min: self.j_min,
            blocks,
            residual: self.residual_from_spectrum(&coeffs),
        })
    }

    /// Homogeneous low-pass `S_j u = F^{-1}(chi(2^{-j} xi) F u)` without the mean.
    pub fn low_pass(&self, field: &[f64], j: i32) -> Result<Vec<f64>> {
        let mut coeffs = self.grid.forward(field)?;
        let scale = 2f64.powi(-j);
        multiply_spectrum(&self.grid, &mut coeffs, |xi| {
            let r = xi[0].hypot(xi[1]);
            if r == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(chi(r * scale), 0.0)
            }
        })?;
        self.grid.inverse_real(&coeffs)
    }

    /// `L^p` norm of every block of a vector field (pointwise Euclidean norm).
    pub fn block_norms(&self, components: &[&[f64]], p: f64) -> Result<BlockNorms> {
        if !(p >= 1.0) {
            return Err(Error::InvalidParameter(format!("p must be >= 1, got {p}")));
        }
        let spectra = components
            .iter()
            .map(|c| self.grid.forward(c))
            .collect::<Result<Vec<_>>>()?;
        let mut values = Vec::with_capacity(self.weights.len());
        for j in self.indices() {
            let blocks = spectra
                .iter()
                .map(|s| self.block_from_spectrum(s, j))
                .collect::<Result<Vec<_>>>()?;
            values.push(self.grid.lp_norm_vector(&blocks, p));
        }
        let residual = if spectra.is_empty() {
            0.0
        } else {
            let mut missing = 0.0;
            let mut total = 0.0;
            for s in &spectra {
                for (idx, c) in s.iter().enumerate().skip(1) {
                    total += c.norm_sqr();
                    missing += c.norm_sqr() * (1.0 - self.coverage[idx]).powi(2);
                }
            }
            if total == 0.0 {
                0.0
            } else {
                (missing / total).sqrt()
            }
        };
        Ok(BlockNorms {
            j_min: self.j_min,
            p,
            values,
            residual,
        })
    }

    /// `(sum_j (2^{js} ||u_j||_{L^p})^r)^{1/r}` over the window chosen by `spec`.
    pub fn besov_norm(&self, field: &[f64], spec: &BesovSpec) -> Result<f64> {
        self.besov_norm_vector(&[field], spec)
    }

    pub fn besov_norm_vector(&self, components: &[&[f64]], spec: &BesovSpec) -> Result<f64> {
        spec.validate()?;
        window(self.j_min, self.j_max, spec)?;
        self.block_norms(components, spec.p)?.besov(spec)
    }

    /// Besov value together with the unresolved residual, ready for CSV output.
    pub fn besov_report(&self, time: f64, components: &[&[f64]], spec: &BesovSpec) -> Result<NormReport> {
        spec.validate()?;
        let norms = self.block_norms(components, spec.p)?;
        Ok(NormReport {
            time,
            spec: *spec,
            value: norms.besov(spec)?,
            residual: norms.residual,
        })
    }

    /// Chemin-Lerner norm `|| 2^{js} ||u_j||_{L^rho_T(L^p)} ||_{l^r}` of a time series of
    /// (vector) fields, with trapezoidal time quadrature; `rho = inf` takes the max.
    pub fn chemin_lerner_norm(
        &self,
        times: &[f64],
        snapshots: &[Vec<Vec<f64>>],
        rho: f64,
        spec: &BesovSpec,
    ) -> Result<f64> {
        spec.validate()?;
        let series = snapshots
            .iter()
            .map(|comps| {
                let refs: Vec<&[f64]> = comps.iter().map(|c| c.as_slice()).collect();
                self.block_norms(&refs, spec.p)
            })
            .collect::<Result<Vec<_>>>()?;
        chemin_lerner_from_blocks(times, &series, rho, spec)
    }

    /// `||D^k u||_{L^q} / (2^{j(k + d(1/p - 1/q))} ||u||_{L^p})` for `u` supported in
    /// the `j`-th annulus. `D^k u` is the full tensor of `k`-th partial derivatives with
    /// pointwise Frobenius norm.
    pub fn verify_bernstein(&self, u: &[f64], j: i32, k: u32, p: f64, q: f64) -> Result<f64> {
        if !(p >= 1.0 && q >= p) {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= p <= q, got p = {p}, q = {q}"
            )));
        }
        let coeffs = self.grid.forward(u)?;
        self.check_annulus_support(&coeffs, j)?;
        let dim = self.grid.dim();
        let mut derivatives = Vec::new();
        let count = dim.pow(k);
        for code in 0..count {
            let mut axes = Vec::with_capacity(k as usize);
            let mut rest = code;
            for _ in 0..k {
                axes.push(rest % dim);
                rest /= dim;
            }
            let mut c = coeffs.clone();
            multiply_spectrum(&self.grid, &mut c, |xi| {
                axes.iter()
                    .fold(Complex64::new(1.0, 0.0), |acc, &a| acc * Complex64::new(0.0, xi[a]))
            })?;
            derivatives.push(self.grid.inverse_real(&c)?);
        }
        let numerator = self.grid.lp_norm_vector(&derivatives, q);
        let d = dim as f64;
        let inv = |x: f64| if x.is_infinite() { 0.0 } else { 1.0 / x };
        let exponent = k as f64 + d * (inv(p) - inv(q));
        let denominator = 2f64.powf(j as f64 * exponent) * self.grid.lp_norm(u, p);
        Ok(numerator / denominator)
    }

    /// `D(f) / (2^{2 alpha_w j} ||f||_{L^p}^p)` with
    /// `D(f) = int |f|^{p-2} f (-Delta)^{alpha_w} f dx` for annulus-supported `f`.
    pub fn verify_wu_lower_bound(&self, f: &[f64], j: i32, p: f64, alpha_w: f64) -> Result<f64> {
        let admissible = (p == 2.0 && alpha_w >= 0.0)
            || (p > 2.0 && p.is_finite() && (0.0..=1.0).contains(&alpha_w));
        if !admissible {
            return Err(Error::InvalidParameter(format!(
                "need p = 2 with alpha_w >= 0, or 2 < p < inf with 0 <= alpha_w <= 1; got p = {p}, alpha_w = {alpha_w}"
            )));
        }
        let mut coeffs = self.grid.forward(f)?;
        self.check_annulus_support(&coeffs, j)?;
        multiply_spectrum(&self.grid, &mut coeffs, |xi| {
            Complex64::new(xi[0].hypot(xi[1]).powf(2.0 * alpha_w), 0.0)
        })?;
        let frac = self.grid.inverse_real(&coeffs)?;
        let weight: Vec<f64> = f.iter().map(|v| v.abs().powf(p - 2.0) * v).collect();
        let dissipation = self.grid.inner(&weight, &frac);
        let lp = self.grid.lp_norm(f, p);
        Ok(dissipation / (2f64.powf(2.0 * alpha_w * j as f64) * lp.powf(p)))
    }

    fn check_annulus_support(&self, coeffs: &[Complex64], j: i32) -> Result<()> {
        let lo = CHI_INNER * 2f64.powi(j);
        let hi = (8.0 / 3.0) * 2f64.powi(j);
        let mut total = 0.0;
        let mut outside = 0.0;
        for (idx, c) in coeffs.iter().enumerate() {
            let r = self.grid.xi_norm(idx);
            total += c.norm_sqr();
            if r < lo || r > hi {
                outside += c.norm_sqr();
            }
        }
        let leakage = if total > 0.0 { (outside / total).sqrt() } else { 0.0 };
        if leakage > 1e-10 {
            return Err(Error::SupportViolation { j, leakage });
        }
        Ok(())
    }
}

/// Chemin-Lerner norm from per-snapshot block norms.
pub fn chemin_lerner_from_blocks(
    times: &[f64],
    series: &[BlockNorms],
    rho: f64,
    spec: &BesovSpec,
) -> Result<f64> {
    if times.len() < 2 || times.len() != series.len() {
        return Err(Error::TimeSeries(format!(
            "need at least 2 snapshots with matching times, got {} times and {} snapshots",
            times.len(),
            series.len()
        )));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::TimeSeries("snapshot times must be strictly increasing".into()));
    }
    if !(rho >= 1.0) {
        return Err(Error::InvalidParameter(format!("time exponent must be >= 1, got {rho}")));
    }
    let first = &series[0];
    let (lo, hi) = first.window(spec)?;
    let weighted = (lo..=hi).map(|j| {
        let g: Vec<f64> = series.iter().map(|b| b.get(j).unwrap_or(0.0)).collect();
        let time_norm = if rho.is_infinite() {
            g.iter().copied().fold(0.0, f64::max)
        } else {
            let integral: f64 = times
                .windows(2)
                .zip(g.windows(2))
                .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0].powf(rho) + v[1].powf(rho)))
                .sum();
            integral.powf(1.0 / rho)
        };
        2f64.powf(j as f64 * spec.s) * time_norm
    });
    Ok(lr_sum(weighted, spec.r))
}

/// One CSV row of a norm report: `time,s,p,r,flavor,J1,value,residual`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport {
    pub time: f64,
    pub spec: BesovSpec,
    pub value: f64,
    pub residual: f64,
}

impl NormReport {
    pub const CSV_HEADER: &'static str = "time,s,p,r,flavor,J1,value,residual";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:e},{:e}",
            self.time,
            self.spec.s,
            self.spec.p,
            self.spec.r,
            self.spec.flavor.as_str(),
            self.spec.j1,
            self.value,
            self.residual
        )
    }
}

/// Random real field whose spectrum fills the lattice points with `lo < |xi| < hi`
/// (Nyquist modes excluded).
pub fn sample_band_field<R: Rng + ?Sized>(grid: &SpectralGrid, lo: f64, hi: f64, rng: &mut R) -> Result<Vec<f64>> {
    let noise: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut coeffs = grid.forward(&noise)?;
    for (idx, c) in coeffs.iter_mut().enumerate() {
        let r = grid.xi_norm(idx);
        if !(r > lo && r < hi) || grid.is_nyquist(idx) {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    grid.inverse_real(&coeffs)
}

/// Random real field supported strictly inside the `j`-th annulus `2^j [3/4, 8/3]`.
pub fn sample_annulus_field<R: Rng + ?Sized>(grid: &SpectralGrid, j: i32, rng: &mut R) -> Result<Vec<f64>> {
    let scale = 2f64.powi(j);
    sample_band_field(grid, CHI_INNER * scale, (8.0 / 3.0) * scale, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid1(n: usize, l: f64) -> SpectralGrid {
        SpectralGrid::new(1, &[l], &[n]).unwrap()
    }

    #[test]
    fn chi_shape() {
        assert_eq!(chi(0.0), 1.0);
        assert_eq!(chi(0.75), 1.0);
        assert_eq!(chi(4.0 / 3.0), 0.0);
        assert_eq!(chi(2.0), 0.0);
        let mut prev = 1.0;
        for i in 0..=1000 {
            let v = chi(0.7 + 0.7 * i as f64 / 1000.0);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn phi_at_dyadic_radius() {
        // Independent evaluation of the mollifier at r = 1: x = (4/3 - 1) / (7/12) = 4/7.
        let x: f64 = 4.0 / 7.0;
        let h = |t: f64| (-1.0 / t).exp();
        let chi_one = h(x) / (h(x) + h(1.0 - x));
        for j in -3..4 {
            let r = 2f64.powi(j);
            assert!((phi(r / 2f64.powi(j)) - (1.0 - chi_one)).abs() < 1e-15);
        }
        assert!((1.0 - chi_one - 0.358_165_95).abs() < 1e-7);
    }

    #[test]
    fn phi_support() {
        for j in -2..3 {
            let s = 2f64.powi(j);
            for i in 0..200 {
                let below = 0.75 * s * i as f64 / 200.0;
                let above = (8.0 / 3.0) * s * (1.0 + i as f64 / 50.0);
                assert_eq!(phi(below / s), 0.0);
                assert_eq!(phi(above / s), 0.0);
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        for grid in [
            grid1(64, 2.0 * PI),
            grid1(512, 50.0),
            SpectralGrid::new(2, &[2.0 * PI, 4.0 * PI], &[32, 64]).unwrap(),
        ] {
            let part = LpPartition::new(&grid).unwrap();
            assert!(part.partition_residue() <= 1e-10);
            let (lo, hi) = part.covered_band();
            assert!(lo <= grid.min_nonzero_xi());
            assert!(hi >= grid.max_xi_within(DEFAULT_BAND_FRACTION));
        }
    }

    #[test]
    fn too_small_grid_is_rejected() {
        let g = grid1(8, 2.0 * PI);
        assert!(LpPartition::with_range(&g, 0, 1).is_err());
        // The smallest admissible grid still hosts three shells.
        assert!(LpPartition::new(&g).is_ok());
    }

    #[test]
    fn single_mode_lives_in_its_block() {
        let g = grid1(128, 2.0 * PI);
        let part = LpPartition::new(&g).unwrap();
        let u: Vec<f64> = (0..g.len()).map(|i| (8.0 * g.position(i)[0]).cos()).collect();
        let j = 3;
        let w = phi(1.0);
        let uj = part.dyadic_block(&u, j).unwrap();
        for (a, b) in uj.iter().zip(&u) {
            assert!((a - w * b).abs() < 1e-13);
        }
        for far in [j - 2, j + 2] {
            let b = part.dyadic_block(&u, far).unwrap();
            assert!(b.iter().all(|v| v.abs() < 1e-14));
        }
        assert!(part.dyadic_block(&u, part.j_max() + 1).is_err());
    }

    #[test]
    fn reconstruction_matches_residual() {
        let g = grid1(256, 2.0 * PI);
        let part = LpPartition::new(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dec = part.decompose(&u).unwrap();
        let mean = g.mean(&u);
        let mut sum = vec![0.0; g.len()];
        for b in &dec.blocks {
            sum.iter_mut().zip(b).for_each(|(s, v)| *s += v);
        }
        let diff: Vec<f64> = u.iter().zip(&sum).map(|(a, b)| a - mean - b).collect();
        let centered: Vec<f64> = u.iter().map(|a| a - mean).collect();
        let rel = g.l2_norm(&diff) / g.l2_norm(&centered);
        assert!((rel - dec.residual).abs() < 1e-12);
        assert!(dec.residual > 0.0);

        // band-limited input is reconstructed exactly
        let v = sample_band_field(&g, 0.5, g.max_xi_within(DEFAULT_BAND_FRACTION), &mut rng).unwrap();
        assert!(part.residual(&v).unwrap() < 1e-12);
    }

    #[test]
    fn besov_basic_properties() {
        let g = grid1(128, 2.0 * PI);
        let part = LpPartition::new(&g).unwrap();
        let spec = BesovSpec::full(0.5, 2.0, 1.0);
        assert_eq!(part.besov_norm(&vec![0.0; 128], &spec).unwrap(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = sample_band_field(&g, 0.5, 30.0, &mut rng).unwrap();
        let base = part.besov_norm(&u, &spec).unwrap();
        for c in [-3.0, 0.5, 2.0] {
            let cu: Vec<f64> = u.iter().map(|v| c * v).collect();
            let scaled = part.besov_norm(&cu, &spec).unwrap();
            assert!((scaled - c.abs() * base).abs() < 1e-12 * base);
        }
    }

    #[test]
    fn besov_of_single_mode() {
        // Only blocks j0 - 1 and j0 see |xi| = 2^j0, with weights phi(2) and phi(1).
        let g = grid1(256, 2.0 * PI);
        let part = LpPartition::new(&g).unwrap();
        let j0 = 4;
        let u: Vec<f64> = (0..g.len()).map(|i| (16.0 * g.position(i)[0]).sin()).collect();
        let l2 = g.l2_norm(&u);
        for s in [-1.0, 0.0, 0.7] {
            let direct = (2f64.powf(j0 as f64 * s) * phi(1.0) + 2f64.powf((j0 - 1) as f64 * s) * phi(2.0)) * l2;
            let v = part.besov_norm(&u, &BesovSpec::full(s, 2.0, 1.0)).unwrap();
            assert!((v - direct).abs() < 1e-12 * direct);
        }
    }

    #[test]
    fn low_high_windows() {
        let g = grid1(256, 20.0 * PI);
        let part = LpPartition::new(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = sample_band_field(&g, 0.0, 20.0, &mut rng).unwrap();
        let norms = part.block_norms(&[&u], 2.0).unwrap();
        let j1 = 0;
        let low = norms.besov(&BesovSpec::low(0.0, 2.0, 1.0, j1)).unwrap();
        let high = norms.besov(&BesovSpec::high(0.0, 2.0, 1.0, j1)).unwrap();
        let full = norms.besov(&BesovSpec::full(0.0, 2.0, 1.0)).unwrap();
        let overlap = norms.get(j1).unwrap() + norms.get(j1 - 1).unwrap();
        assert!((low + high - full - overlap).abs() < 1e-12 * full);
        assert!(norms.besov(&BesovSpec::low(0.0, 2.0, 1.0, part.j_max() + 1)).is_err());
        assert!(part.besov_norm(&u, &BesovSpec::full(0.0, 0.5, 1.0)).is_err());
    }

    #[test]
    fn chemin_lerner_examples() {
        let g = grid1(128, 2.0 * PI);
        let part = LpPartition::new(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u0 = sample_band_field(&g, 0.5, 20.0, &mut rng).unwrap();
        let spec = BesovSpec::full(0.3, 2.0, 1.0);
        let b = part.besov_norm(&u0, &spec).unwrap();

        let dup = part
            .chemin_lerner_norm(&[0.0, 5.0], &[vec![u0.clone()], vec![u0.clone()]], f64::INFINITY, &spec)
            .unwrap();
        assert!((dup - b).abs() < 1e-13 * b);

        // u(t) = e^{-t} u0 over [0, 40] with rho = 1 integrates to (1 - e^{-40}) ||u0||
        let times: Vec<f64> = (0..=8000).map(|i| i as f64 * 0.005).collect();
        let snaps: Vec<Vec<Vec<f64>>> = times
            .iter()
            .map(|t| vec![u0.iter().map(|v| (-t).exp() * v).collect()])
            .collect();
        let cl = part.chemin_lerner_norm(&times, &snaps, 1.0, &spec).unwrap();
        assert!((cl - b).abs() < 1e-5 * b);

        // With r = 1 the Chemin-Lerner L^inf norm dominates sup_t of the Besov norm.
        let sup = snaps
            .iter()
            .map(|s| part.besov_norm(&s[0], &spec).unwrap())
            .fold(0.0, f64::max);
        let cl_inf = part.chemin_lerner_norm(&times, &snaps, f64::INFINITY, &spec).unwrap();
        assert!(cl_inf >= sup * (1.0 - 1e-14));

        assert!(part
            .chemin_lerner_norm(&[1.0, 0.0], &[vec![u0.clone()], vec![u0.clone()]], 1.0, &spec)
            .is_err());
        assert!(part.chemin_lerner_norm(&[0.0], &[vec![u0]], 1.0, &spec).is_err());
    }

    #[test]
    fn bernstein_single_mode_is_exact() {
        let g = grid1(128, 2.0 * PI);
        let part = LpPartition::new(&g).unwrap();
        let j = 3;
        let u: Vec<f64> = (0..g.len()).map(|i| (8.0 * g.position(i)[0]).cos()).collect();
        let ratio = part.verify_bernstein(&u, j, 1, 2.0, 2.0).unwrap();
        assert!((ratio - 1.0).abs() < 1e-13);
        // support violation
        assert!(part.verify_bernstein(&u, j + 2, 1, 2.0, 2.0).is_err());
    }

    #[test]
    fn wu_ratio_for_single_mode() {
        let g = grid1(128, 2.0 * PI);
        let part = LpPartition::new(&g).unwrap();
        let j = 3;
        let u: Vec<f64> = (0..g.len()).map(|i| (10.0 * g.position(i)[0]).cos()).collect();
        for aw in [0.0, 0.3, 1.0, 1.7] {
            let ratio = part.verify_wu_lower_bound(&u, j, 2.0, aw).unwrap();
            let expected = (10.0 / 8.0f64).powf(2.0 * aw);
            assert!((ratio - expected).abs() < 1e-12 * expected);
        }
        assert!(part.verify_wu_lower_bound(&u, j, 4.0, 1.5).is_err());
        assert!(part.verify_wu_lower_bound(&u, j, 1.5, 0.5).is_err());
        assert!(part.verify_wu_lower_bound(&u, j, 2.0, -0.1).is_err());
    }

    #[test]
    fn report_row_format() {
        let r = NormReport {
            time: 1.5,
            spec: BesovSpec::high(2.0, 2.0, 1.0, -1),
            value: 0.25,
            residual: 0.0,
        };
        assert_eq!(r.to_csv_row(), "1.5,2,2,1,high,-1,2.5e-1,0e0");
    }
}
