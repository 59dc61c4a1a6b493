//! Band reference points and the light/heavy quasiparticle regimes set by the mass operator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hartree_fock::{BandStructure, ScfResult};
use crate::linalg::{ensure_hermitian, CMatrix, CVector};

/// |ΔMₙ(0)| below this counts as a light electron (scaled by the regime threshold).
pub const LIGHT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Min,
    Max,
}

impl ExtremumKind {
    /// Minimum for occupied (electron-like) bands, maximum otherwise.
    pub fn default_for(occupied: bool) -> Self {
        if occupied {
            Self::Min
        } else {
            Self::Max
        }
    }
}

/// Extremum of a set of band samples; rejects empty or non-finite input.
pub fn extremum(samples: &[f64], kind: ExtremumKind) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("band has no samples"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("band contains non-finite samples"));
    }
    let fold = match kind {
        ExtremumKind::Min => samples.iter().copied().fold(f64::INFINITY, f64::min),
        ExtremumKind::Max => samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    Ok(fold)
}

/// εₙ(0) = Extr Eₙ(kᵢ) / N over the band samples.
pub fn reference_point(samples: &[f64], electrons: usize, kind: ExtremumKind) -> Result<f64> {
    if electrons == 0 {
        return Err(Error::invalid("electron count must be positive"));
    }
    Ok(extremum(samples, kind)? / electrons as f64)
}

/// [`reference_point`] for one band of a band structure; unconverged bands are rejected.
pub fn band_reference_point(
    structure: &BandStructure,
    band: usize,
    electrons: usize,
    kind: ExtremumKind,
) -> Result<f64> {
    reference_point(structure.row(band)?, electrons, kind)
}

/// Correlation self-energy Σᶜ(k) acting on discrete-orthonormal orbital coefficients.
pub trait CorrelationSelfEnergy: Sync {
    fn kernel(&self, k: f64, dim: usize) -> Result<CMatrix>;
}

/// Σᶜ = c·I at every k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantSelfEnergy(pub f64);

impl CorrelationSelfEnergy for ConstantSelfEnergy {
    fn kernel(&self, _k: f64, dim: usize) -> Result<CMatrix> {
        Ok(CMatrix::identity(dim, dim) * crate::linalg::c(self.0))
    }
}

/// Σᶜ = Σᵢ wᵢ |uᵢ⟩⟨uᵢ| with real weights, independent of k.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableSelfEnergy {
    pub terms: Vec<(f64, CVector)>,
}

impl CorrelationSelfEnergy for SeparableSelfEnergy {
    fn kernel(&self, _k: f64, dim: usize) -> Result<CMatrix> {
        let mut sigma = CMatrix::zeros(dim, dim);
        for (weight, u) in &self.terms {
            if u.len() != dim {
                return Err(Error::DimensionMismatch {
                    what: "separable self-energy vector",
                    expected: dim,
                    found: u.len(),
                });
            }
            sigma += u * u.adjoint() * crate::linalg::c(*weight);
        }
        Ok(sigma)
    }
}

/// User-supplied kernels at fixed k-points.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedSelfEnergy {
    pub kgrid: Vec<f64>,
    pub kernels: Vec<CMatrix>,
}

impl CorrelationSelfEnergy for TabulatedSelfEnergy {
    fn kernel(&self, k: f64, dim: usize) -> Result<CMatrix> {
        let index = self
            .kgrid
            .iter()
            .position(|&q| (q - k).abs() <= 1e-12)
            .ok_or_else(|| Error::invalid(format!("no tabulated self-energy at k = {k}")))?;
        let kernel = &self.kernels[index];
        if kernel.nrows() != dim || kernel.ncols() != dim {
            return Err(Error::DimensionMismatch {
                what: "tabulated self-energy",
                expected: dim,
                found: kernel.nrows(),
            });
        }
        Ok(kernel.clone())
    }
}

/// Σᶜ(k) given by a closure.
pub struct KernelFn<F>(pub F);

impl<F> CorrelationSelfEnergy for KernelFn<F>
where
    F: Fn(f64, usize) -> CMatrix + Sync,
{
    fn kernel(&self, k: f64, dim: usize) -> Result<CMatrix> {
        Ok((self.0)(k, dim))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassShift {
    pub band: usize,
    pub kgrid: Vec<f64>,
    /// ⟨ψₙ(k)|Σᶜ(k)|ψₙ(k)⟩ at each k.
    pub expectations: Vec<f64>,
    /// ΔMₙ(0), extrapolated to k = 0.
    pub delta_m0: f64,
    /// ΔMₙ(kᵢ) = expectation − ΔMₙ(0).
    pub delta_mk: Vec<f64>,
}

impl MassShift {
    /// max |ΔMₙ(k) − ΔMₙ(−k)| over mirrored pairs of a symmetric grid.
    pub fn evenness_deviation(&self) -> f64 {
        let n = self.delta_mk.len();
        (0..n)
            .map(|j| (self.delta_mk[j] - self.delta_mk[n - 1 - j]).abs())
            .fold(0.0, f64::max)
    }
}

/// Lagrange extrapolation to k = 0 through (up to) the three samples nearest 0.
pub fn extrapolate_to_zero(kgrid: &[f64], values: &[f64]) -> Result<f64> {
    if kgrid.is_empty() || kgrid.len() != values.len() {
        return Err(Error::invalid("extrapolation needs matching, nonempty samples"));
    }
    let mut order: Vec<usize> = (0..kgrid.len()).collect();
    order.sort_by(|&a, &b| {
        kgrid[a]
            .abs()
            .total_cmp(&kgrid[b].abs())
            .then(kgrid[a].total_cmp(&kgrid[b]))
    });
    let nodes: Vec<usize> = order.into_iter().take(3).collect();
    if let Some(&exact) = nodes.iter().find(|&&i| kgrid[i] == 0.0) {
        return Ok(values[exact]);
    }
    let mut total = 0.0;
    for &i in &nodes {
        let mut weight = 1.0;
        for &j in &nodes {
            if i != j {
                weight *= (0.0 - kgrid[j]) / (kgrid[i] - kgrid[j]);
            }
        }
        total += weight * values[i];
    }
    Ok(total)
}

/// Mass operator of band `band` from its converged orbitals at every k.
pub fn mass_shift(band: usize, sigma: &dyn CorrelationSelfEnergy, orbitals: &[ScfResult]) -> Result<MassShift> {
    if orbitals.is_empty() {
        return Err(Error::invalid("mass shift needs at least one k-point"));
    }
    let mut kgrid = Vec::with_capacity(orbitals.len());
    let mut expectations = Vec::with_capacity(orbitals.len());
    for run in orbitals {
        if band >= run.eigenvalues.len() {
            return Err(Error::invalid(format!("band {band} does not exist")));
        }
        if !run.converged {
            return Err(Error::UnconvergedBand(band));
        }
        let psi = run.coefficient(band);
        let kernel = sigma.kernel(run.momentum, psi.len())?;
        ensure_hermitian(&kernel, "correlation self-energy", 1e-12)?;
        expectations.push((psi.adjoint() * &kernel * &psi)[(0, 0)].re);
        kgrid.push(run.momentum);
    }
    let delta_m0 = extrapolate_to_zero(&kgrid, &expectations)?;
    let delta_mk = expectations.iter().map(|v| v - delta_m0).collect();
    Ok(MassShift {
        band,
        kgrid,
        expectations,
        delta_m0,
        delta_mk,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneReference {
    pub plus_level: f64,
    pub minus_level: f64,
    pub pair_energy: f64,
}

/// ε(0)ₙ± = (Extr Ẽ ∓ ΔMₙ(0))/2 and aₙ = (ε⁺ − ε⁻)/2.
pub fn zone_reference(extr_tilde: f64, delta_m0: f64) -> ZoneReference {
    let plus_level = (extr_tilde - delta_m0) / 2.0;
    let minus_level = (extr_tilde + delta_m0) / 2.0;
    ZoneReference {
        plus_level,
        minus_level,
        pair_energy: (plus_level - minus_level) / 2.0,
    }
}

/// εₙ(0) = Extr Eₙ/N − ΔMₙ(0).
pub fn strict_reference(extr_over_n: f64, delta_m0: f64) -> f64 {
    extr_over_n - delta_m0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Light,
    Heavy,
}

/// True when ΔMₙ(0) is neither light nor heavy.
pub fn is_indeterminate(delta_m0: f64, threshold: f64) -> bool {
    !(delta_m0.abs() < LIGHT_TOLERANCE * threshold || delta_m0 >= threshold)
}

/// Light when |ΔMₙ(0)| is negligible, heavy when ΔMₙ(0) ≥ threshold; anything in
/// between is reported as light with a warning.
pub fn classify_regime(delta_m0: f64, threshold: f64) -> Regime {
    if delta_m0 >= threshold {
        return Regime::Heavy;
    }
    if is_indeterminate(delta_m0, threshold) {
        log::warn!("ΔM(0) = {delta_m0} is neither light nor heavy (threshold {threshold}); treating as light");
    }
    Regime::Light
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LevelOptions {
    pub heavy_threshold: f64,
    /// Gauge constant C subtracted from the extremum.
    pub offset_constant: f64,
}

impl Default for LevelOptions {
    fn default() -> Self {
        Self {
            heavy_threshold: 1.0,
            offset_constant: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiparticleLevel {
    pub band: usize,
    pub extremum_kind: ExtremumKind,
    /// εₙ(0) = Extr Eₙ/N − ΔMₙ(0).
    pub reference_epsilon0: f64,
    /// ε̃ₙ(0) = εₙ(0) + ΔMₙ(0).
    pub shifted_reference: f64,
    pub delta_m0: f64,
    pub pair_energy: f64,
    pub plus_level: f64,
    pub minus_level: f64,
    pub regime: Regime,
    pub indeterminate: bool,
    pub offset_constant: f64,
    /// (min + max)/2 of the band divided by N.
    pub band_midpoint: f64,
}

/// Assembles the quasiparticle description of one band.
///
/// In the light regime the pair levels are evaluated with ΔMₙ(0) → 0, so the
/// pair energy vanishes.
pub fn quasiparticle_level(
    samples: &[f64],
    band: usize,
    electrons: usize,
    kind: ExtremumKind,
    mass: &MassShift,
    options: &LevelOptions,
) -> Result<QuasiparticleLevel> {
    if !(options.heavy_threshold > 0.0) {
        return Err(Error::invalid("heavy threshold must be positive"));
    }
    let extr_over_n = reference_point(samples, electrons, kind)?;
    let lo = reference_point(samples, electrons, ExtremumKind::Min)?;
    let hi = reference_point(samples, electrons, ExtremumKind::Max)?;
    let delta_m0 = mass.delta_m0;
    let regime = classify_regime(delta_m0, options.heavy_threshold);
    let effective = match regime {
        Regime::Light => 0.0,
        Regime::Heavy => delta_m0,
    };
    let zone = zone_reference(extr_over_n - options.offset_constant, effective);
    let reference_epsilon0 = strict_reference(extr_over_n, delta_m0);
    Ok(QuasiparticleLevel {
        band,
        extremum_kind: kind,
        reference_epsilon0,
        shifted_reference: reference_epsilon0 + delta_m0,
        delta_m0,
        pair_energy: zone.pair_energy,
        plus_level: zone.plus_level,
        minus_level: zone.minus_level,
        regime,
        indeterminate: is_indeterminate(delta_m0, options.heavy_threshold),
        offset_constant: options.offset_constant,
        band_midpoint: 0.5 * (lo + hi),
    })
}
