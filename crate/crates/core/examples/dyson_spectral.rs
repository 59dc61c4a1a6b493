//! Free and dressed Green functions in the Hartree-Fock orbital basis.

use quasiband::error::Result;
use quasiband::green_dyson::{
    dressed_eigenproblem, dyson_solve, find_peaks, free_green, hf_orbital_hamiltonian, peak_alignment, DysonMethod,
    FrequencyGrid, FrequencyOptions, SelfEnergyModel,
};
use quasiband::hartree_fock::{scf_solve, ScfOptions};
use quasiband::linalg::{c, CMatrix};
use quasiband::model_system::{build_soft_coulomb_system, SystemSpec};

fn main() -> Result<()> {
    let system = build_soft_coulomb_system(&SystemSpec::soft_well(64, 0.25, 2.0, 2))?;
    let scf = scf_solve(&system, 0.0, &ScfOptions::default())?;
    let h = hf_orbital_hamiltonian(&scf, 8)?;
    let sigma = CMatrix::from_fn(8, 8, |i, j| c(if i == j { -0.05 } else { 0.01 }));
    let dressed = dressed_eigenproblem(&h, &sigma)?;
    let levels: Vec<f64> = scf.eigenvalues[..8].iter().chain(&dressed).copied().collect();
    let grid = FrequencyGrid::spanning(&levels, &FrequencyOptions::default())?;
    let g0 = free_green(&h, &grid)?;
    let g = dyson_solve(&g0, &SelfEnergyModel::Constant(sigma), DysonMethod::Direct)?;
    let peaks = find_peaks(&grid.omegas, &g.spectral_function());
    println!("HF levels      {:?}", &scf.eigenvalues[..8]);
    println!("dressed levels {dressed:?}");
    println!("spectral peaks {peaks:?}");
    println!("max Dyson residual {:.3e}", g.max_residual());
    println!(
        "peak alignment {:.3e} (grid spacing {:.3e})",
        peak_alignment(&peaks, &dressed),
        grid.spacing()
    );
    Ok(())
}
