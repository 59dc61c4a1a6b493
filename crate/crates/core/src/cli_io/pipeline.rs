//! Stage orchestration: oracle → SCF → bands → quasiparticle → Dyson, plus the
//! boson spectrum sweep.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::config::{RunConfig, SelfEnergySpec, Stage};
use super::output::{fmt_f64, LinePlot, OutputDir, Stamp};
use crate::density_matrix::{trace_energy_identity, DensityMatrix, KOperator};
use crate::error::{Error, Result};
use crate::green_dyson::{
    dressed_eigenproblem, dyson_solve, find_peaks, free_green, hf_orbital_hamiltonian, peak_alignment, FrequencyGrid,
    SelfEnergyModel,
};
use crate::hartree_fock::{band_structure, scf_solve, BandOptions, BandRun, ScfResult};
use crate::hydrogenic_spectrum::{hydrogenic_basis, mass_operator_limit, mass_spectrum, truncation_exponent};
use crate::linalg::{c, eigvalsh, CMatrix};
use crate::many_body_oracle::oracle_record;
use crate::model_system::{build_soft_coulomb_system, Boundary, Grid, ModelSystem};
use crate::quasiparticle::{
    band_reference_point, mass_shift, quasiparticle_level, ConstantSelfEnergy, CorrelationSelfEnergy, ExtremumKind,
    KernelFn, LevelOptions, QuasiparticleLevel, TabulatedSelfEnergy,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: StageStatus,
    pub message: Option<String>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub version: String,
    pub config_hash: String,
    pub system_hash: String,
    pub seed: u64,
    /// True when any requested stage failed or was skipped.
    pub degraded: bool,
    pub stages: Vec<StageRecord>,
    pub metrics: BTreeMap<String, f64>,
    /// Every emitted file, relative to the output directory.
    pub outputs: Vec<String>,
}

impl RunReport {
    pub fn stage(&self, stage: Stage) -> Option<&StageRecord> {
        self.stages.iter().find(|r| r.stage == stage)
    }
}

/// Requested stages plus everything they depend on, in pipeline order.
pub fn resolve_stages(requested: &[Stage]) -> Vec<Stage> {
    let mut wanted: Vec<Stage> = requested.to_vec();
    let mut i = 0;
    while i < wanted.len() {
        for &dep in wanted[i].dependencies() {
            if !wanted.contains(&dep) {
                wanted.push(dep);
            }
        }
        i += 1;
    }
    Stage::ALL.iter().copied().filter(|s| wanted.contains(s)).collect()
}

struct Context<'a> {
    config: &'a RunConfig,
    system: ModelSystem,
    out: OutputDir,
    metrics: BTreeMap<String, f64>,
    gamma_scf: Option<ScfResult>,
    bands: Option<BandRun>,
}

/// Runs the configured stages, writing every artifact under `out_dir`.
pub fn run_pipeline(config: &RunConfig, out_dir: &Path) -> Result<RunReport> {
    run_stages(config, &config.stages, out_dir)
}

/// Runs `stages` (and their dependencies) for `config`.
pub fn run_stages(config: &RunConfig, stages: &[Stage], out_dir: &Path) -> Result<RunReport> {
    config.validate()?;
    let system = build_soft_coulomb_system(&config.system).map_err(|e| Error::Config {
        path: "system".into(),
        message: e.to_string(),
    })?;
    let stamp = Stamp::new(config.hash());
    let mut out = OutputDir::create(out_dir, stamp.clone())?;
    let mut outputs = Vec::new();

    let config_text = format!(
        "# config_hash={} version={}\n{}",
        stamp.config_hash,
        stamp.version,
        config.to_toml_string()
    );
    std::fs::write(out.path("config.toml"), config_text)?;
    outputs.push("config.toml".to_string());
    out.json(
        "system.json",
        &serde_json::json!({ "system_hash": system.content_hash(), "system": system }),
    )?;
    outputs.extend(out.take_written());

    let mut ctx = Context {
        config,
        system,
        out,
        metrics: BTreeMap::new(),
        gamma_scf: None,
        bands: None,
    };

    let mut records: Vec<StageRecord> = Vec::new();
    for stage in resolve_stages(stages) {
        let blocked = stage
            .dependencies()
            .iter()
            .find(|dep| records.iter().any(|r| r.stage == **dep && r.status != StageStatus::Ok));
        let record = if let Some(dep) = blocked {
            StageRecord {
                stage,
                status: StageStatus::Skipped,
                message: Some(format!("dependency `{}` did not complete", dep.name())),
                outputs: Vec::new(),
            }
        } else {
            let result = match stage {
                Stage::Oracle => oracle_stage(&mut ctx),
                Stage::Scf => scf_stage(&mut ctx),
                Stage::Bands => bands_stage(&mut ctx),
                Stage::Quasiparticle => quasiparticle_stage(&mut ctx),
                Stage::Dyson => dyson_stage(&mut ctx),
                Stage::Spectrum => spectrum_stage(&mut ctx),
            };
            let written = ctx.out.take_written();
            match result {
                Ok(StageOutcome::Done) => StageRecord {
                    stage,
                    status: StageStatus::Ok,
                    message: None,
                    outputs: written,
                },
                Ok(StageOutcome::NotApplicable(reason)) => StageRecord {
                    stage,
                    status: StageStatus::Skipped,
                    message: Some(reason),
                    outputs: written,
                },
                Err(e) => {
                    log::warn!("stage {} failed: {e}", stage.name());
                    StageRecord {
                        stage,
                        status: StageStatus::Failed,
                        message: Some(e.to_string()),
                        outputs: written,
                    }
                }
            }
        };
        outputs.extend(record.outputs.iter().cloned());
        records.push(record);
    }

    outputs.push("report.json".to_string());
    let report = RunReport {
        version: stamp.version.clone(),
        config_hash: stamp.config_hash.clone(),
        system_hash: ctx.system.content_hash(),
        seed: config.seed,
        degraded: records.iter().any(|r| r.status != StageStatus::Ok),
        stages: records,
        metrics: ctx.metrics,
        outputs,
    };
    ctx.out.json("report.json", &report)?;
    Ok(report)
}

enum StageOutcome {
    Done,
    NotApplicable(String),
}

fn oracle_stage(ctx: &mut Context) -> Result<StageOutcome> {
    let record = oracle_record(&ctx.system, ctx.config.oracle.orbital_cutoff)?;
    ctx.metrics.insert("oracle_energy".into(), record.energy);
    ctx.out.json("oracle.json", &record)?;
    Ok(StageOutcome::Done)
}

#[derive(Serialize)]
struct DensityRecord {
    order: usize,
    electrons: usize,
    trace: f64,
    target: f64,
    hermitian_deviation: f64,
    system_hash: String,
}

fn density_record(rho: &DensityMatrix, system_hash: &str) -> DensityRecord {
    DensityRecord {
        order: rho.order(),
        electrons: rho.electrons(),
        trace: rho.trace(),
        target: rho.normalization_target(),
        hermitian_deviation: rho.hermitian_deviation(),
        system_hash: system_hash.to_string(),
    }
}

fn scf_stage(ctx: &mut Context) -> Result<StageOutcome> {
    let run = scf_solve(&ctx.system, 0.0, &ctx.config.scf.options())?;
    let split = run.energy_split(&ctx.system)?;
    let self_action_residual = if ctx.system.electron_count() == 1 {
        Some((run.eigenvalues[0] - eigvalsh(&ctx.system.one_body(0.0))[0]).abs())
    } else {
        None
    };
    let (rho1, rho2) = run.density_matrices()?;
    let hash = ctx.system.content_hash();
    let densities = vec![density_record(&rho1, &hash), density_record(&rho2, &hash)];

    ctx.metrics.insert("scf_ground_eigenvalue".into(), run.eigenvalues[0]);
    ctx.metrics.insert("scf_iterations".into(), run.iterations as f64);
    ctx.metrics.insert("hf_energy".into(), split.total());
    if let Some(r) = self_action_residual {
        ctx.metrics.insert("self_action_residual".into(), r);
    }
    ctx.out.json(
        "scf.json",
        &serde_json::json!({
            "momentum": run.momentum,
            "electrons": run.electrons,
            "occupied_orbitals": run.occupied,
            "eigenvalues": run.eigenvalues,
            "iterations": run.iterations,
            "final_residual": run.final_residual,
            "residual_history": run.residual_history,
            "energy_history": run.energy_history,
            "energy_monotone": run.energy_monotone,
            "orthonormality_deviation": run.orthonormality_deviation(),
            "one_electron_energy": split.one_electron,
            "excitation_energy": split.excitation,
            "total_energy": split.total(),
            "self_action_residual": self_action_residual,
        }),
    )?;
    ctx.out.json("density_matrices.json", &densities)?;
    ctx.gamma_scf = Some(run);
    Ok(StageOutcome::Done)
}

fn bands_stage(ctx: &mut Context) -> Result<StageOutcome> {
    if ctx.system.boundary() != Boundary::Periodic {
        return Ok(StageOutcome::NotApplicable(
            "band structure needs a periodic system".into(),
        ));
    }
    let options = BandOptions {
        scf: ctx.config.scf.options(),
        bands: ctx.config.scf.bands,
    };
    let run = band_structure(&ctx.system, &options)?;
    let structure = &run.structure;

    let mut rows = Vec::new();
    for (n, band) in structure.bands.iter().enumerate() {
        for (j, &k) in structure.kgrid.iter().enumerate() {
            rows.push(vec![
                fmt_f64(k),
                n.to_string(),
                fmt_f64(band[j]),
                structure.k_converged[j].to_string(),
            ]);
        }
    }
    ctx.out.csv("bands.csv", &["k", "band", "energy", "converged"], &rows)?;

    let history: Vec<serde_json::Value> = structure
        .kgrid
        .iter()
        .zip(&run.scf)
        .map(|(&k, scf)| match scf {
            Some(s) => serde_json::json!({
                "k": k,
                "converged": true,
                "iterations": s.iterations,
                "final_residual": s.final_residual,
                "residual_history": s.residual_history,
                "energy_history": s.energy_history,
            }),
            None => serde_json::json!({
                "k": k,
                "converged": false,
                "error": run.failures.iter().find(|f| f.0 == k).map(|f| f.1.clone()),
            }),
        })
        .collect();
    ctx.out.json("scf_history.json", &history)?;
    ctx.metrics
        .insert("band_symmetry_deviation".into(), structure.symmetry_deviation);

    if !run.failures.is_empty() {
        let message = format!(
            "SCF failed at {} of {} k-points",
            run.failures.len(),
            structure.kgrid.len()
        );
        ctx.bands = Some(run);
        return Err(Error::Unsupported(message));
    }

    ctx.out.band_plot("bands.svg", structure, &[])?;

    let electrons = ctx.system.electron_count();
    let epsilon0 = band_reference_point(structure, 0, electrons, ExtremumKind::Min)?;
    let converged: Vec<&ScfResult> = run.scf.iter().flatten().collect();
    let projectors: Vec<_> = converged.iter().flat_map(|s| s.occupied_projectors()).collect();
    let operators = converged
        .iter()
        .map(|s| s.rebuilt_fock(&ctx.system).map(|f| f.to_k_operator()))
        .collect::<Result<Vec<KOperator>>>()?;
    let dispersion: Vec<Vec<f64>> = structure
        .bands
        .iter()
        .map(|b| b.iter().map(|e| e - epsilon0).collect())
        .collect();
    let identity = trace_energy_identity(
        &projectors,
        &operators,
        &structure.kgrid,
        &dispersion,
        epsilon0,
        electrons,
    )?;
    ctx.metrics.insert("trace_identity_residual".into(), identity.residual);
    ctx.out.json(
        "trace_identity.json",
        &serde_json::json!({ "epsilon0": epsilon0, "electrons": electrons, "report": identity }),
    )?;
    ctx.bands = Some(run);
    Ok(StageOutcome::Done)
}

/// Σᶜ(k) on grid coefficients for the configured model.
fn correlation_model(
    spec: &SelfEnergySpec,
    system: &ModelSystem,
    scf: &[ScfResult],
) -> Result<Box<dyn CorrelationSelfEnergy>> {
    Ok(match *spec {
        SelfEnergySpec::Zero => Box::new(ConstantSelfEnergy(0.0)),
        SelfEnergySpec::Constant { value } => Box::new(ConstantSelfEnergy(value)),
        SelfEnergySpec::Cosine { amplitude } => {
            let length = system.grid().length();
            Box::new(KernelFn(move |k: f64, dim: usize| {
                CMatrix::identity(dim, dim) * c(amplitude * (k * length).cos())
            }))
        }
        SelfEnergySpec::Projector { weight, band } => {
            let mut kgrid = Vec::new();
            let mut kernels = Vec::new();
            for run in scf {
                if band >= run.eigenvalues.len() {
                    return Err(Error::invalid(format!("self-energy band {band} does not exist")));
                }
                let psi = run.coefficient(band);
                kgrid.push(run.momentum);
                kernels.push(&psi * psi.adjoint() * c(weight));
            }
            Box::new(TabulatedSelfEnergy { kgrid, kernels })
        }
    })
}

fn quasiparticle_stage(ctx: &mut Context) -> Result<StageOutcome> {
    let run = ctx
        .bands
        .as_ref()
        .ok_or_else(|| Error::invalid("band stage produced no data"))?;
    let structure = &run.structure;
    let scf: Vec<ScfResult> = run.scf.iter().flatten().cloned().collect();
    let sigma = correlation_model(&ctx.config.self_energy, &ctx.system, &scf)?;
    let qp = &ctx.config.quasiparticle;
    let options = LevelOptions {
        heavy_threshold: qp.heavy_threshold,
        offset_constant: qp.offset_constant,
    };
    let electrons = ctx.system.electron_count();
    let mut levels: Vec<QuasiparticleLevel> = Vec::new();
    let mut shifts = Vec::new();
    for n in 0..structure.band_count() {
        let kind = qp.extremum.resolve(structure.occupations[n] > 0);
        let shift = mass_shift(n, sigma.as_ref(), &scf)?;
        let level = quasiparticle_level(structure.row(n)?, n, electrons, kind, &shift, &options)?;
        levels.push(level);
        shifts.push(shift);
    }
    let rows: Vec<Vec<String>> = levels
        .iter()
        .map(|l| {
            vec![
                l.band.to_string(),
                format!("{:?}", l.extremum_kind).to_lowercase(),
                fmt_f64(l.reference_epsilon0),
                fmt_f64(l.shifted_reference),
                fmt_f64(l.delta_m0),
                fmt_f64(l.pair_energy),
                fmt_f64(l.plus_level),
                fmt_f64(l.minus_level),
                format!("{:?}", l.regime).to_lowercase(),
                fmt_f64(l.offset_constant),
                fmt_f64(l.band_midpoint),
            ]
        })
        .collect();
    ctx.out.csv(
        "quasiparticle.csv",
        &[
            "band",
            "extremum",
            "reference_epsilon0",
            "shifted_reference",
            "delta_m0",
            "pair_energy",
            "plus_level",
            "minus_level",
            "regime",
            "offset_constant",
            "band_midpoint",
        ],
        &rows,
    )?;
    ctx.out.json(
        "quasiparticle.json",
        &serde_json::json!({ "levels": levels, "mass_shifts": shifts }),
    )?;
    let occupied: Vec<QuasiparticleLevel> = levels
        .iter()
        .filter(|l| structure.occupations[l.band] > 0)
        .cloned()
        .collect();
    ctx.out.band_plot("bands_levels.svg", structure, &occupied)?;
    if let Some(first) = levels.first() {
        ctx.metrics
            .insert("qp_band0_reference".into(), first.reference_epsilon0);
        ctx.metrics.insert("qp_band0_pair_energy".into(), first.pair_energy);
    }
    Ok(StageOutcome::Done)
}

/// Σ in the HF orbital basis for the Dyson stage (evaluated at k = 0).
fn orbital_self_energy(spec: &SelfEnergySpec, dim: usize) -> Result<SelfEnergyModel> {
    Ok(match *spec {
        SelfEnergySpec::Zero => SelfEnergyModel::Zero,
        SelfEnergySpec::Constant { value } => SelfEnergyModel::Constant(CMatrix::identity(dim, dim) * c(value)),
        SelfEnergySpec::Cosine { amplitude } => SelfEnergyModel::Constant(CMatrix::identity(dim, dim) * c(amplitude)),
        SelfEnergySpec::Projector { weight, band } => {
            if band >= dim {
                return Err(Error::invalid(format!(
                    "self-energy band {band} lies outside the {dim}-orbital basis"
                )));
            }
            let mut m = CMatrix::zeros(dim, dim);
            m[(band, band)] = c(weight);
            SelfEnergyModel::Constant(m)
        }
    })
}

fn dyson_stage(ctx: &mut Context) -> Result<StageOutcome> {
    let scf = ctx
        .gamma_scf
        .as_ref()
        .ok_or_else(|| Error::invalid("SCF stage produced no data"))?;
    let d = &ctx.config.dyson;
    let dim = d.orbitals.min(scf.eigenvalues.len());
    let h = hf_orbital_hamiltonian(scf, dim)?;
    let sigma = orbital_self_energy(&ctx.config.self_energy, dim)?;
    let static_sigma = sigma.static_kernel(dim).expect("configured models are static");
    let dressed_levels = dressed_eigenproblem(&h, &static_sigma)?;
    let hf_levels = scf.eigenvalues[..dim].to_vec();
    let span: Vec<f64> = hf_levels.iter().chain(&dressed_levels).copied().collect();
    let grid = FrequencyGrid::spanning(&span, &d.frequency_options())?;
    let g0 = free_green(&h, &grid)?.with_rhs_scale(-scf.eigenvalues[0]);
    let g = dyson_solve(&g0, &sigma, d.method)?;

    let free_spectrum = g0.spectral_function();
    let dressed_spectrum = g.spectral_function();
    let peaks = find_peaks(&grid.omegas, &dressed_spectrum);
    let alignment = peak_alignment(&peaks, &dressed_levels);

    let rows: Vec<Vec<String>> = (0..grid.len())
        .map(|i| {
            vec![
                fmt_f64(grid.omegas[i]),
                fmt_f64(free_spectrum[i]),
                fmt_f64(dressed_spectrum[i]),
                fmt_f64(g.residuals[i]),
            ]
        })
        .collect();
    ctx.out
        .csv("spectral.csv", &["omega", "free", "dressed", "dyson_residual"], &rows)?;
    ctx.out.line_plot(
        "spectral.svg",
        &LinePlot {
            title: "spectral function".into(),
            xlabel: "omega (hartree)".into(),
            ylabel: "-Im Tr G / pi".into(),
            x: grid.omegas.clone(),
            series: vec![free_spectrum, dressed_spectrum],
        },
    )?;
    ctx.out.json(
        "dyson.json",
        &serde_json::json!({
            "orbitals": dim,
            "method": d.method,
            "eta": grid.eta,
            "points": grid.len(),
            "frequency_spacing": grid.spacing(),
            "max_residual": g.max_residual(),
            "singular_frequencies": g.singular,
            "notes": g.notes,
            "rhs_scale": g.rhs_scale,
            "hf_levels": hf_levels,
            "dressed_levels": dressed_levels,
            "peaks": peaks,
            "peak_alignment": alignment,
        }),
    )?;
    ctx.metrics.insert("dyson_max_residual".into(), g.max_residual());
    ctx.metrics.insert("dyson_peak_alignment".into(), alignment);
    if !g.singular.is_empty() {
        return Err(Error::invalid(format!(
            "Dyson matrix singular at {} frequencies",
            g.singular.len()
        )));
    }
    Ok(StageOutcome::Done)
}

fn spectrum_stage(ctx: &mut Context) -> Result<StageOutcome> {
    let sp = &ctx.config.spectrum;
    let rows = mass_spectrum(sp.mass, &sp.gammas, &sp.n, &sp.k)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.k.to_string(),
                fmt_f64(r.gamma),
                fmt_f64(r.energy),
                fmt_f64(r.twice_energy),
            ]
        })
        .collect();
    ctx.out.csv(
        "mass_spectrum.csv",
        &["n", "k", "gamma", "energy", "twice_energy"],
        &csv_rows,
    )?;

    let limits =
        sp.k.iter()
            .map(|&k| {
                let gamma = sp.gammas.iter().copied().fold(0.0, f64::max);
                mass_operator_limit(sp.mass, gamma, k, &sp.limit_sequence)
                    .map(|limit| serde_json::json!({ "k": k, "gamma": gamma, "delta_m_infinity": limit }))
            })
            .collect::<Result<Vec<_>>>()?;
    let positive: Vec<f64> = sp.gammas.iter().copied().filter(|&g| g > 0.0).collect();
    let mut exponents = Vec::new();
    if positive.len() >= 2 {
        for &n in &sp.n {
            for &k in &sp.k {
                let slope = truncation_exponent(sp.mass, n, k, &positive).ok();
                exponents.push(serde_json::json!({ "n": n, "k": k, "exponent": slope }));
            }
        }
    }
    let h = &sp.hydrogenic;
    let grid = Grid::centered(h.grid_points, h.spacing)?;
    let basis = hydrogenic_basis(h.n_max, h.charge, &grid)?;
    ctx.out.json(
        "spectrum.json",
        &serde_json::json!({
            "mass": sp.mass,
            "limit_sequence": sp.limit_sequence,
            "mass_operator_limits": limits,
            "truncation_exponents": exponents,
            "hydrogenic": {
                "charge": h.charge,
                "levels": basis.levels,
                "grid_energies": basis.grid_energies,
                "orthonormality_deviation": basis.orthonormality_deviation(),
            },
        }),
    )?;
    if let Some(first) = limits.first().and_then(|v| v["delta_m_infinity"].as_f64()) {
        ctx.metrics.insert("delta_m_infinity".into(), first);
    }
    Ok(StageOutcome::Done)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_system::SystemSpec;

    fn fast_config() -> RunConfig {
        let mut config = RunConfig::default();
        config.dyson.points = 400;
        config
    }

    #[test]
    fn dependencies_are_pulled_in_and_ordered() {
        assert_eq!(
            resolve_stages(&[Stage::Quasiparticle]),
            vec![Stage::Bands, Stage::Quasiparticle]
        );
        assert_eq!(
            resolve_stages(&[Stage::Dyson, Stage::Oracle]),
            vec![Stage::Oracle, Stage::Scf, Stage::Dyson]
        );
    }

    #[test]
    fn minimal_box_run_reports_self_action_residual() {
        let config = RunConfig {
            system: SystemSpec::soft_well(32, 0.3, 2.0, 1),
            stages: vec![Stage::Scf],
            ..RunConfig::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let report = run_pipeline(&config, dir.path()).unwrap();
        assert!(!report.degraded);
        assert!(report.metrics["self_action_residual"] <= 1e-12);
        assert!(dir.path().join("scf.json").exists());
    }

    #[test]
    fn full_run_emits_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_pipeline(&fast_config(), dir.path()).unwrap();
        assert!(!report.degraded, "{:?}", report.stages);
        for name in [
            "report.json",
            "oracle.json",
            "scf.json",
            "bands.csv",
            "bands.svg",
            "trace_identity.json",
            "quasiparticle.csv",
            "spectral.csv",
            "dyson.json",
            "mass_spectrum.csv",
        ] {
            assert!(dir.path().join(name).exists(), "{name} missing");
            assert!(report.outputs.iter().any(|o| o == name));
        }
        assert!(report.metrics["trace_identity_residual"] <= 1e-8);
        assert!(report.metrics["dyson_max_residual"] <= 1e-10);
    }

    #[test]
    fn box_system_skips_band_dependents() {
        let mut config = fast_config();
        config.system = SystemSpec::soft_well(24, 0.4, 2.0, 2);
        config.stages = vec![Stage::Quasiparticle, Stage::Scf];
        let dir = tempfile::tempdir().unwrap();
        let report = run_pipeline(&config, dir.path()).unwrap();
        assert!(report.degraded);
        assert_eq!(report.stage(Stage::Scf).unwrap().status, StageStatus::Ok);
        assert_eq!(report.stage(Stage::Bands).unwrap().status, StageStatus::Skipped);
        assert_eq!(report.stage(Stage::Quasiparticle).unwrap().status, StageStatus::Skipped);
    }

    #[test]
    fn failing_stage_keeps_earlier_outputs() {
        let mut config = fast_config();
        config.system.electrons = 3;
        config.stages = vec![Stage::Spectrum, Stage::Scf, Stage::Dyson];
        let dir = tempfile::tempdir().unwrap();
        let report = run_pipeline(&config, dir.path()).unwrap();
        assert!(report.degraded);
        assert_eq!(report.stage(Stage::Spectrum).unwrap().status, StageStatus::Ok);
        assert_eq!(report.stage(Stage::Scf).unwrap().status, StageStatus::Failed);
        assert_eq!(report.stage(Stage::Dyson).unwrap().status, StageStatus::Skipped);
        assert!(dir.path().join("mass_spectrum.csv").exists());
    }
}
