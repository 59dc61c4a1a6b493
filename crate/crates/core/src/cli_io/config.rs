//! Run configuration: strict TOML parsing plus range validation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green_dyson::{DysonMethod, FrequencyOptions};
use crate::hartree_fock::ScfOptions;
use crate::model_system::{SystemSpec, MIN_GRID_POINTS};
use crate::quasiparticle::ExtremumKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Oracle,
    Scf,
    Bands,
    Quasiparticle,
    Dyson,
    Spectrum,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Oracle,
        Stage::Scf,
        Stage::Bands,
        Stage::Quasiparticle,
        Stage::Dyson,
        Stage::Spectrum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Oracle => "oracle",
            Stage::Scf => "scf",
            Stage::Bands => "bands",
            Stage::Quasiparticle => "quasiparticle",
            Stage::Dyson => "dyson",
            Stage::Spectrum => "spectrum",
        }
    }

    /// Stages whose outputs this stage consumes.
    pub fn dependencies(self) -> &'static [Stage] {
        match self {
            Stage::Oracle | Stage::Scf | Stage::Bands | Stage::Spectrum => &[],
            Stage::Quasiparticle => &[Stage::Bands],
            Stage::Dyson => &[Stage::Scf],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Number of spatial orbitals kept in the full-CI expansion.
    #[serde(default = "default_cutoff")]
    pub orbital_cutoff: usize,
}

fn default_cutoff() -> usize {
    8
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            orbital_cutoff: default_cutoff(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScfConfig {
    #[serde(default = "default_mixing")]
    pub mixing: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Bands kept per k-point.
    #[serde(default = "default_bands")]
    pub bands: usize,
}

fn default_mixing() -> f64 {
    ScfOptions::default().mixing
}
fn default_tol() -> f64 {
    ScfOptions::default().tol
}
fn default_max_iter() -> usize {
    ScfOptions::default().max_iter
}
fn default_bands() -> usize {
    4
}

impl Default for ScfConfig {
    fn default() -> Self {
        Self {
            mixing: default_mixing(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            bands: default_bands(),
        }
    }
}

impl ScfConfig {
    pub fn options(&self) -> ScfOptions {
        ScfOptions {
            mixing: self.mixing,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

/// Correlation self-energy used by the quasiparticle and Dyson stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SelfEnergySpec {
    Zero,
    /// Σᶜ = value·I.
    Constant {
        value: f64,
    },
    /// Σᶜ(k) = amplitude·cos(kL)·I with L the cell length.
    Cosine {
        amplitude: f64,
    },
    /// Σᶜ(k) = weight·|ψ_band(k)⟩⟨ψ_band(k)| on one HF band.
    Projector {
        weight: f64,
        band: usize,
    },
}

impl Default for SelfEnergySpec {
    fn default() -> Self {
        Self::Constant { value: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumChoice {
    /// Minimum for occupied bands, maximum for empty ones.
    Auto,
    Min,
    Max,
}

impl ExtremumChoice {
    pub fn resolve(self, occupied: bool) -> ExtremumKind {
        match self {
            Self::Auto => ExtremumKind::default_for(occupied),
            Self::Min => ExtremumKind::Min,
            Self::Max => ExtremumKind::Max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuasiparticleConfig {
    #[serde(default = "default_extremum")]
    pub extremum: ExtremumChoice,
    #[serde(default = "default_threshold")]
    pub heavy_threshold: f64,
    #[serde(default)]
    pub offset_constant: f64,
}

fn default_extremum() -> ExtremumChoice {
    ExtremumChoice::Auto
}
fn default_threshold() -> f64 {
    1.0
}

impl Default for QuasiparticleConfig {
    fn default() -> Self {
        Self {
            extremum: default_extremum(),
            heavy_threshold: default_threshold(),
            offset_constant: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DysonConfig {
    /// Lowest HF orbitals kept in the propagator basis.
    #[serde(default = "default_orbitals")]
    pub orbitals: usize,
    #[serde(default = "default_method")]
    pub method: DysonMethod,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
}

fn default_orbitals() -> usize {
    16
}
fn default_method() -> DysonMethod {
    DysonMethod::Direct
}
fn default_points() -> usize {
    FrequencyOptions::default().points
}
fn default_margin() -> f64 {
    FrequencyOptions::default().margin
}
fn default_eta() -> f64 {
    FrequencyOptions::default().eta
}

impl Default for DysonConfig {
    fn default() -> Self {
        Self {
            orbitals: default_orbitals(),
            method: default_method(),
            points: default_points(),
            margin: default_margin(),
            eta: default_eta(),
        }
    }
}

impl DysonConfig {
    pub fn frequency_options(&self) -> FrequencyOptions {
        FrequencyOptions {
            points: self.points,
            margin: self.margin,
            eta: self.eta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default = "default_mass")]
    pub mass: f64,
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    #[serde(default = "default_ns")]
    pub n: Vec<u32>,
    #[serde(default = "default_ks")]
    pub k: Vec<i32>,
    /// Principal quantum numbers used to extrapolate ΔM∞.
    #[serde(default = "default_limit_sequence")]
    pub limit_sequence: Vec<u32>,
    #[serde(default)]
    pub hydrogenic: HydrogenicConfig,
}

fn default_mass() -> f64 {
    1.0
}
fn default_gammas() -> Vec<f64> {
    vec![0.025, 0.05, 0.1, 0.2]
}
fn default_ns() -> Vec<u32> {
    vec![1, 2, 3, 4]
}
fn default_ks() -> Vec<i32> {
    vec![1, 2]
}
fn default_limit_sequence() -> Vec<u32> {
    vec![10, 100, 1000]
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            mass: default_mass(),
            gammas: default_gammas(),
            n: default_ns(),
            k: default_ks(),
            limit_sequence: default_limit_sequence(),
            hydrogenic: HydrogenicConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydrogenicConfig {
    #[serde(default = "default_n_max")]
    pub n_max: u32,
    #[serde(default = "default_charge")]
    pub charge: f64,
    #[serde(default = "default_h_points")]
    pub grid_points: usize,
    #[serde(default = "default_h_spacing")]
    pub spacing: f64,
}

fn default_n_max() -> u32 {
    3
}
fn default_charge() -> f64 {
    1.0
}
fn default_h_points() -> usize {
    301
}
fn default_h_spacing() -> f64 {
    0.1
}

impl Default for HydrogenicConfig {
    fn default() -> Self {
        Self {
            n_max: default_n_max(),
            charge: default_charge(),
            grid_points: default_h_points(),
            spacing: default_h_spacing(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Output directory, used when the command line gives none.
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default = "default_stages")]
    pub stages: Vec<Stage>,
    pub system: SystemSpec,
    #[serde(default)]
    pub scf: ScfConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub self_energy: SelfEnergySpec,
    #[serde(default)]
    pub quasiparticle: QuasiparticleConfig,
    #[serde(default)]
    pub dyson: DysonConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
}

fn default_seed() -> u64 {
    7
}
fn default_stages() -> Vec<Stage> {
    Stage::ALL.to_vec()
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            output_dir: None,
            stages: default_stages(),
            system: SystemSpec::soft_chain(16, 0.5, 1.5, 2, 8),
            scf: ScfConfig::default(),
            oracle: OracleConfig::default(),
            self_energy: SelfEnergySpec::default(),
            quasiparticle: QuasiparticleConfig::default(),
            dyson: DysonConfig::default(),
            spectrum: SpectrumConfig::default(),
        }
    }
}

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

fn require(ok: bool, path: &str, message: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(config_error(path, message))
    }
}

impl RunConfig {
    /// Parses TOML, rejecting unknown keys and reporting the offending field path.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let deserializer = toml::Deserializer::parse(text).map_err(|e| config_error("", e.message().to_string()))?;
        let config: RunConfig = serde_path_to_error::deserialize(deserializer).map_err(|e| {
            let path = e.path().to_string();
            config_error(&path, e.into_inner().message().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error("", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// SHA-256 of the canonical JSON form of the config.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("run config serializes");
        crate::model_system::hex_digest(&bytes)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        require(
            s.grid_points >= MIN_GRID_POINTS,
            "system.grid_points",
            "must be at least 8",
        )?;
        require(s.grid_points <= 4096, "system.grid_points", "must be at most 4096")?;
        require(
            s.spacing > 0.0 && s.spacing.is_finite(),
            "system.spacing",
            "must be positive",
        )?;
        require(s.well_depth.is_finite(), "system.well_depth", "must be finite")?;
        require(
            s.softening > 0.0 && s.softening.is_finite(),
            "system.softening",
            "must be positive",
        )?;
        require(s.electrons >= 1, "system.electrons", "must be at least 1")?;
        require(
            s.electrons <= 2 * s.grid_points,
            "system.electrons",
            "exceeds the number of spin-orbitals",
        )?;
        match s.boundary {
            crate::model_system::Boundary::Periodic => require(
                s.k_points >= 1,
                "system.k_points",
                "periodic systems need at least one k-point",
            )?,
            crate::model_system::Boundary::Box => {
                require(s.k_points == 0, "system.k_points", "box systems take no k-points")?
            }
        }
        require(s.k_points <= 256, "system.k_points", "must be at most 256")?;

        let scf = &self.scf;
        require(
            scf.mixing > 0.0 && scf.mixing <= 1.0,
            "scf.mixing",
            "must lie in (0, 1]",
        )?;
        require(scf.tol > 0.0 && scf.tol < 1.0, "scf.tol", "must lie in (0, 1)")?;
        require(
            scf.max_iter >= 1 && scf.max_iter <= 100_000,
            "scf.max_iter",
            "must lie in [1, 100000]",
        )?;
        require(
            scf.bands >= 1 && scf.bands <= s.grid_points,
            "scf.bands",
            "must lie in [1, grid_points]",
        )?;

        let oracle = &self.oracle;
        require(
            oracle.orbital_cutoff >= 1 && oracle.orbital_cutoff <= s.grid_points,
            "oracle.orbital_cutoff",
            "must lie in [1, grid_points]",
        )?;

        match &self.self_energy {
            SelfEnergySpec::Zero => {}
            SelfEnergySpec::Constant { value } => require(value.is_finite(), "self_energy.value", "must be finite")?,
            SelfEnergySpec::Cosine { amplitude } => {
                require(amplitude.is_finite(), "self_energy.amplitude", "must be finite")?
            }
            SelfEnergySpec::Projector { weight, band } => {
                require(weight.is_finite(), "self_energy.weight", "must be finite")?;
                require(*band < s.grid_points, "self_energy.band", "must be below grid_points")?;
            }
        }

        let qp = &self.quasiparticle;
        require(
            qp.heavy_threshold > 0.0 && qp.heavy_threshold.is_finite(),
            "quasiparticle.heavy_threshold",
            "must be positive",
        )?;
        require(
            qp.offset_constant.is_finite(),
            "quasiparticle.offset_constant",
            "must be finite",
        )?;

        let d = &self.dyson;
        require(
            d.orbitals >= 1 && d.orbitals <= s.grid_points,
            "dyson.orbitals",
            "must lie in [1, grid_points]",
        )?;
        require(
            d.points >= 2 && d.points <= 1_000_000,
            "dyson.points",
            "must lie in [2, 1000000]",
        )?;
        require(
            d.margin > 0.0 && d.margin.is_finite(),
            "dyson.margin",
            "must be positive",
        )?;
        require(d.eta > 0.0 && d.eta.is_finite(), "dyson.eta", "must be positive")?;

        let sp = &self.spectrum;
        require(
            sp.mass > 0.0 && sp.mass.is_finite(),
            "spectrum.mass",
            "must be positive",
        )?;
        require(!sp.gammas.is_empty(), "spectrum.gammas", "must not be empty")?;
        require(
            sp.gammas.iter().all(|g| (0.0..1.0).contains(g)),
            "spectrum.gammas",
            "values must lie in [0, 1)",
        )?;
        require(
            !sp.n.is_empty() && sp.n.iter().all(|&n| n >= 1),
            "spectrum.n",
            "values must be at least 1",
        )?;
        require(
            !sp.k.is_empty() && sp.k.iter().all(|&k| k != 0),
            "spectrum.k",
            "values must be nonzero",
        )?;
        require(
            sp.limit_sequence.len() >= 3,
            "spectrum.limit_sequence",
            "needs at least three values",
        )?;
        require(
            sp.limit_sequence.windows(2).all(|w| w[1] > w[0]) && sp.limit_sequence[0] >= 1,
            "spectrum.limit_sequence",
            "must be strictly increasing and positive",
        )?;
        let h = &sp.hydrogenic;
        require(
            h.n_max >= 1 && (h.n_max as usize) <= h.grid_points,
            "spectrum.hydrogenic.n_max",
            "must lie in [1, grid_points]",
        )?;
        require(
            h.charge > 0.0 && h.charge.is_finite(),
            "spectrum.hydrogenic.charge",
            "must be positive",
        )?;
        require(
            h.grid_points >= MIN_GRID_POINTS && h.grid_points <= 4096,
            "spectrum.hydrogenic.grid_points",
            "must lie in [8, 4096]",
        )?;
        require(
            h.spacing > 0.0 && h.spacing <= 0.2 / h.charge,
            "spectrum.hydrogenic.spacing",
            "must lie in (0, 0.2/charge]",
        )?;

        require(!self.stages.is_empty(), "stages", "must not be empty")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
stages = ["scf"]

[system]
grid_points = 32
spacing = 0.3
electrons = 1
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let config = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(config.system.well_depth, 2.0);
        assert_eq!(config.scf.tol, 1e-10);
        assert_eq!(config.stages, vec![Stage::Scf]);
        assert_eq!(config.dyson.points, 2000);
    }

    #[test]
    fn unknown_key_reports_path() {
        let text = MINIMAL.replace("electrons = 1", "electrons = 1\ncharge = 3");
        match RunConfig::from_toml_str(&text) {
            Err(Error::Config { path, message }) => {
                assert_eq!(path, "system.charge");
                assert!(message.contains("charge"), "{message}");
            }
            other => panic!("expected config error, got {other:?}"),
        }
        let nested = format!("{MINIMAL}\n[scf]\nmix = 0.3\n");
        assert!(matches!(RunConfig::from_toml_str(&nested), Err(Error::Config { .. })));
    }

    #[test]
    fn out_of_range_value_reports_path() {
        let text = format!("{MINIMAL}\n[scf]\nmixing = 1.5\n");
        match RunConfig::from_toml_str(&text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "scf.mixing"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_type_reports_path() {
        let text = MINIMAL.replace("spacing = 0.3", "spacing = \"wide\"");
        match RunConfig::from_toml_str(&text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "system.spacing"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn self_energy_variants_parse() {
        let text = format!("{MINIMAL}\n[self_energy]\nkind = \"projector\"\nweight = 0.2\nband = 1\n");
        let config = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(config.self_energy, SelfEnergySpec::Projector { weight: 0.2, band: 1 });
        let bad = format!("{MINIMAL}\n[self_energy]\nkind = \"constant\"\nvalue = 0.2\nextra = 1\n");
        assert!(RunConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn round_trip_and_hash_are_stable() {
        let config = RunConfig::default();
        let text = config.to_toml_string();
        let back = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, config);
        assert_eq!(back.hash(), config.hash());
        let mut other = config.clone();
        other.seed += 1;
        assert_ne!(other.hash(), config.hash());
    }
}
