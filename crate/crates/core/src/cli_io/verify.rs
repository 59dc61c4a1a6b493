//! Desk-scale invariant suite behind the `verify` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::density_matrix::{energy_from_density_matrices, trace_energy_identity, KOperator};
use crate::error::Result;
use crate::green_dyson::{
    dressed_eigenproblem, dyson_solve, find_peaks, free_green, hf_orbital_hamiltonian, peak_alignment, DysonMethod,
    FrequencyGrid, FrequencyOptions, SelfEnergyModel,
};
use crate::hartree_fock::{band_structure, scf_solve, BandOptions, ScfOptions, ScfResult};
use crate::hydrogenic_spectrum::{
    boson_energy, hydrogenic_basis, mass_operator_limit, truncation_exponent, BosonSpectrumParams,
};
use crate::linalg::{c, eigvalsh, CMatrix, C64};
use crate::many_body_oracle::{exact_reduced_density_matrix, full_ci_ground_state};
use crate::model_system::{build_soft_coulomb_system, Grid, SystemSpec};
use crate::quasiparticle::{band_reference_point, zone_reference, ExtremumKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    /// `"<="` or `">="`: how `value` must compare with `bound`.
    pub relation: &'static str,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            bound,
            relation: "<=",
            passed: value <= bound,
        }
    }

    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            bound,
            relation: ">=",
            passed: value >= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

fn random_hermitian(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    (&a + a.adjoint()) * c(0.5 * scale)
}

fn rdm_normalization() -> Result<f64> {
    let mut worst: f64 = 0.0;
    for electrons in 1..=4 {
        let system = build_soft_coulomb_system(&SystemSpec::soft_well(16, 0.5, 2.0, electrons))?;
        let state = full_ci_ground_state(&system, 6)?.state;
        for order in 1..=electrons {
            let rho = exact_reduced_density_matrix(&state, order)?;
            let target = rho.normalization_target();
            worst = worst.max((rho.trace() - target).abs() / target);
        }
    }
    Ok(worst)
}

fn energy_functional(rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let spec = SystemSpec::soft_well(16, rng.random_range(0.3..0.6), rng.random_range(1.0..3.0), 2);
        let system = build_soft_coulomb_system(&spec)?;
        let solution = full_ci_ground_state(&system, 6)?;
        let rho1 = exact_reduced_density_matrix(&solution.state, 1)?;
        let rho2 = exact_reduced_density_matrix(&solution.state, 2)?;
        let energy = energy_from_density_matrices(&rho1, &rho2, &system.one_body(0.0), system.interaction_kernel())?;
        worst = worst.max((energy - solution.energy).abs());
    }
    Ok(worst)
}

fn self_action() -> Result<f64> {
    let mut worst: f64 = 0.0;
    let well = build_soft_coulomb_system(&SystemSpec::soft_well(32, 0.3, 2.0, 1))?;
    let chain = build_soft_coulomb_system(&SystemSpec::soft_chain(16, 0.5, 1.5, 1, 4))?;
    for (system, ks) in [(&well, vec![0.0]), (&chain, chain.kgrid().to_vec())] {
        for k in ks {
            let run = scf_solve(system, k, &ScfOptions::default())?;
            worst = worst.max((run.eigenvalues[0] - eigvalsh(&system.one_body(k))[0]).abs());
        }
    }
    Ok(worst)
}

fn crystal_checks(checks: &mut Vec<Check>) -> Result<()> {
    let system = build_soft_coulomb_system(&SystemSpec::soft_chain(16, 0.5, 1.5, 2, 8))?;
    let run = band_structure(&system, &BandOptions::default())?;
    checks.push(Check::at_most("band_symmetry", run.structure.symmetry_deviation, 1e-8));
    let scf: Vec<&ScfResult> = run.scf.iter().flatten().collect();
    let epsilon0 = band_reference_point(&run.structure, 0, 2, ExtremumKind::Min)?;
    let projectors: Vec<_> = scf.iter().flat_map(|s| s.occupied_projectors()).collect();
    let operators = scf
        .iter()
        .map(|s| s.rebuilt_fock(&system).map(|f| f.to_k_operator()))
        .collect::<Result<Vec<KOperator>>>()?;
    let dispersion: Vec<Vec<f64>> = run
        .structure
        .bands
        .iter()
        .map(|b| b.iter().map(|e| e - epsilon0).collect())
        .collect();
    let report = trace_energy_identity(&projectors, &operators, &run.structure.kgrid, &dispersion, epsilon0, 2)?;
    checks.push(Check::at_most("trace_energy_identity", report.residual, 1e-8));
    Ok(())
}

fn variational(checks: &mut Vec<Check>) -> Result<()> {
    let system = build_soft_coulomb_system(&SystemSpec::soft_well(32, 0.3, 2.0, 2))?;
    let hf = scf_solve(&system, 0.0, &ScfOptions::default())?
        .energy_split(&system)?
        .total();
    let ci = full_ci_ground_state(&system, 12)?.energy;
    checks.push(Check::at_least("hf_above_ci", hf - ci, -1e-10));
    checks.push(Check::at_most("hf_ci_gap_fraction", (hf - ci) / ci.abs(), 0.1));
    Ok(())
}

fn dyson_checks(rng: &mut ChaCha8Rng, checks: &mut Vec<Check>) -> Result<()> {
    let system = build_soft_coulomb_system(&SystemSpec::soft_well(64, 0.25, 2.0, 2))?;
    let scf = scf_solve(&system, 0.0, &ScfOptions::default())?;
    let h = hf_orbital_hamiltonian(&scf, 16)?;
    let sigma = random_hermitian(16, 0.05, rng);
    let dressed = dressed_eigenproblem(&h, &sigma)?;
    let span: Vec<f64> = scf.eigenvalues[..16].iter().chain(&dressed).copied().collect();
    let grid = FrequencyGrid::spanning(&span, &FrequencyOptions::default())?;
    let g0 = free_green(&h, &grid)?;

    let zero = dyson_solve(&g0, &SelfEnergyModel::Zero, DysonMethod::Direct)?;
    let identical = zero.matrices.iter().zip(&g0.matrices).all(|(a, b)| {
        a.iter()
            .zip(b.iter())
            .all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits())
    });
    checks.push(Check::at_most(
        "dyson_zero_bitwise",
        if identical { 0.0 } else { 1.0 },
        0.0,
    ));

    let constant = dyson_solve(&g0, &SelfEnergyModel::Constant(sigma), DysonMethod::Direct)?;
    let table: Vec<CMatrix> = (0..grid.len()).map(|_| random_hermitian(16, 0.05, rng)).collect();
    let tabulated = dyson_solve(&g0, &SelfEnergyModel::Tabulated(table), DysonMethod::Direct)?;
    let residual = [&zero, &constant, &tabulated]
        .iter()
        .map(|g| {
            if g.singular.is_empty() {
                g.max_residual()
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    checks.push(Check::at_most("dyson_residual", residual, 1e-10));

    let peaks = find_peaks(&grid.omegas, &constant.spectral_function());
    checks.push(Check::at_most(
        "spectral_peak_alignment_minus_spacing",
        peak_alignment(&peaks, &dressed) - grid.spacing(),
        0.0,
    ));
    Ok(())
}

fn zone_algebra(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let extr = rng.random_range(-10.0..10.0);
        let delta = rng.random_range(1.0..10.0);
        let z = zone_reference(extr, delta);
        let exact = if z.pair_energy == (z.plus_level - z.minus_level) / 2.0 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(exact).max((z.pair_energy + delta / 2.0).abs());
    }
    worst.max(zone_reference(rng.random_range(-10.0..10.0), 0.0).pair_energy.abs())
}

fn boson_checks(checks: &mut Vec<Check>) -> Result<()> {
    let mut zero_coupling: f64 = 0.0;
    for n in 1..=5 {
        for k in [-2, 1, 3] {
            zero_coupling = zero_coupling.max((boson_energy(&BosonSpectrumParams::new(1.0, 0.0, n, k)?)? - 0.5).abs());
        }
    }
    checks.push(Check::at_most("boson_zero_coupling", zero_coupling, 0.0));
    let value = boson_energy(&BosonSpectrumParams::new(1.0, 0.1, 1, 1)?)?;
    checks.push(Check::at_most(
        "boson_reference_value",
        (value - 0.494987625).abs(),
        1e-15,
    ));
    let mut limit_error: f64 = 0.0;
    for m in [1.0, 2.0] {
        limit_error = limit_error.max((mass_operator_limit(m, 0.1, 1, &[10, 100, 1000])? - m).abs());
    }
    checks.push(Check::at_most("mass_operator_limit", limit_error, 1e-8));
    checks.push(Check::at_least(
        "truncation_exponent",
        truncation_exponent(1.0, 2, 1, &[0.2, 0.1, 0.05, 0.025])?,
        4.0,
    ));
    let basis = hydrogenic_basis(4, 1.0, &Grid::centered(301, 0.1)?)?;
    checks.push(Check::at_most(
        "hydrogenic_orthonormality",
        basis.orthonormality_deviation(),
        1e-10,
    ));
    Ok(())
}

/// Runs every invariant check; randomized fixtures draw from `seed`.
pub fn run_invariant_suite(seed: u64) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = vec![
        Check::at_most("rdm_normalization", rdm_normalization()?, 1e-10),
        Check::at_most("energy_functional", energy_functional(&mut rng)?, 1e-10),
        Check::at_most("self_action_cancellation", self_action()?, 1e-12),
    ];
    crystal_checks(&mut checks)?;
    variational(&mut checks)?;
    dyson_checks(&mut rng, &mut checks)?;
    checks.push(Check::at_most("zone_reference_algebra", zone_algebra(&mut rng), 1e-12));
    boson_checks(&mut checks)?;
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport { seed, checks, passed })
}
