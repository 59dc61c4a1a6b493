use std::sync::OnceLock;

use proptest::prelude::*;
use quasiband::cli_io::RunConfig;
use quasiband::density_matrix::{energy_from_density_matrices, DensityMatrix, SpinOrbitalBasis};
use quasiband::green_dyson::{dyson_solve, free_green, DysonMethod, FrequencyGrid, SelfEnergyModel};
use quasiband::hartree_fock::{scf_solve, ScfOptions};
use quasiband::hydrogenic_spectrum::{boson_energy, BosonSpectrumParams};
use quasiband::linalg::{eigvalsh, sorted_eigh, CMatrix, C64};
use quasiband::many_body_oracle::{exact_reduced_density_matrix, full_ci_ground_state};
use quasiband::model_system::{build_soft_coulomb_system, symmetric_kgrid, ModelSystem, SystemSpec};

fn hermitian(entries: &[(f64, f64)], n: usize) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |i, j| {
        let (re, im) = entries[i * n + j];
        C64::new(re, im)
    });
    (&a + a.adjoint()) * C64::new(0.5, 0.0)
}

fn entries(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n * n)
}

struct CiFixture {
    system: ModelSystem,
    rho1: DensityMatrix,
    rho2: DensityMatrix,
}

fn ci_fixture() -> &'static CiFixture {
    static FIXTURE: OnceLock<CiFixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let system = build_soft_coulomb_system(&SystemSpec::soft_well(16, 0.5, 2.0, 2)).unwrap();
        let state = full_ci_ground_state(&system, 6).unwrap().state;
        CiFixture {
            rho1: exact_reduced_density_matrix(&state, 1).unwrap(),
            rho2: exact_reduced_density_matrix(&state, 2).unwrap(),
            system,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn determinant_density_matrices_are_normalized(
        raw in entries(8),
        electrons in 1usize..=4,
        order in 1usize..=4,
    ) {
        prop_assume!(order <= electrons);
        let (_, vectors) = sorted_eigh(&hermitian(&raw, 8), None);
        let basis = SpinOrbitalBasis::interleaved(vectors.columns(0, 4).into_owned(), 0.5).unwrap();
        let basis = basis.subset(&(0..electrons).collect::<Vec<_>>()).unwrap();
        let rho = DensityMatrix::of_determinant(basis, order).unwrap();
        let target: f64 = ((electrons - order + 1)..=electrons).map(|x| x as f64).product();
        prop_assert!((rho.trace() - target).abs() <= 1e-10 * target);
        prop_assert!(rho.hermitian_deviation() <= 1e-12);
    }

    #[test]
    fn energy_functional_is_affine_in_interaction_strength(scale in -2.0..3.0f64) {
        let f = ci_fixture();
        let h = f.system.one_body(0.0);
        let energy = |lambda: f64| {
            let scaled = f.system.with_interaction_scale(lambda);
            energy_from_density_matrices(&f.rho1, &f.rho2, &h, scaled.interaction_kernel()).unwrap()
        };
        let (e0, e1) = (energy(0.0), energy(1.0));
        prop_assert!((energy(scale) - (e0 + scale * (e1 - e0))).abs() <= 1e-10);
    }

    #[test]
    fn one_electron_scf_matches_bare_ground_state(
        spacing in 0.3..0.7f64,
        depth in 0.5..3.0f64,
        k_points in 1usize..6,
    ) {
        let system = build_soft_coulomb_system(&SystemSpec::soft_chain(12, spacing, depth, 1, k_points)).unwrap();
        for &k in system.kgrid() {
            let run = scf_solve(&system, k, &ScfOptions::default()).unwrap();
            prop_assert!((run.eigenvalues[0] - eigvalsh(&system.one_body(k))[0]).abs() <= 1e-12);
        }
    }

    #[test]
    fn dyson_residual_is_small_for_random_static_self_energies(
        raw_h in entries(6),
        raw_sigma in entries(6),
        strength in 0.0..0.1f64,
    ) {
        let h = hermitian(&raw_h, 6);
        let sigma = hermitian(&raw_sigma, 6) * C64::new(strength, 0.0);
        let grid = FrequencyGrid::uniform(-3.0, 3.0, 101, 0.05).unwrap();
        let g0 = free_green(&h, &grid).unwrap();
        let direct = dyson_solve(&g0, &SelfEnergyModel::Constant(sigma.clone()), DysonMethod::Direct).unwrap();
        prop_assert!(direct.singular.is_empty());
        prop_assert!(direct.max_residual() <= 1e-10);
        let iterative = dyson_solve(&g0, &SelfEnergyModel::Constant(sigma), DysonMethod::Iterative).unwrap();
        prop_assert!(iterative.max_residual() <= 1e-10);
    }

    #[test]
    fn boson_energy_scales_with_mass(
        mass in 0.1..10.0f64,
        gamma in 0.0..0.5f64,
        n in 1u32..8,
        k in prop_oneof![-4i32..=-1, 1i32..=4],
    ) {
        let unit = boson_energy(&BosonSpectrumParams::new(1.0, gamma, n, k).unwrap()).unwrap();
        let scaled = boson_energy(&BosonSpectrumParams::new(mass, gamma, n, k).unwrap()).unwrap();
        prop_assert!((scaled - mass * unit).abs() <= 1e-14 * mass);
        let flipped = boson_energy(&BosonSpectrumParams::new(mass, gamma, n, -k).unwrap()).unwrap();
        prop_assert_eq!(scaled, flipped);
    }

    #[test]
    fn kgrid_is_mirror_symmetric(count in 1usize..40, period in 0.5..20.0f64) {
        let ks = symmetric_kgrid(count, period);
        prop_assert_eq!(ks.len(), count);
        for j in 0..count {
            prop_assert!((ks[j] + ks[count - 1 - j]).abs() <= 1e-14);
        }
    }

    #[test]
    fn config_toml_round_trip_preserves_hash(seed in any::<u64>(), points in 16usize..64, electrons in 1usize..4) {
        let mut config = RunConfig { seed, ..RunConfig::default() };
        config.system.grid_points = points;
        config.system.electrons = electrons;
        let back = RunConfig::from_toml_str(&config.to_toml_string()).unwrap();
        prop_assert_eq!(back.hash(), config.hash());
    }
}
