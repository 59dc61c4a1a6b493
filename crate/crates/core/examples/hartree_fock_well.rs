//! Closed-shell Hartree-Fock in a soft-Coulomb well compared with full CI.

use quasiband::error::Result;
use quasiband::hartree_fock::{scf_solve, ScfOptions};
use quasiband::many_body_oracle::full_ci_ground_state;
use quasiband::model_system::{build_soft_coulomb_system, SystemSpec};

fn main() -> Result<()> {
    let system = build_soft_coulomb_system(&SystemSpec::soft_well(32, 0.3, 2.0, 2))?;
    let scf = scf_solve(&system, 0.0, &ScfOptions::default())?;
    let split = scf.energy_split(&system)?;
    let ci = full_ci_ground_state(&system, 12)?.energy;
    println!("iterations     {}", scf.iterations);
    println!("residual       {:.3e}", scf.final_residual);
    println!("orbital eigs   {:?}", &scf.eigenvalues[..4]);
    println!("E_HF           {:.12}", split.total());
    println!("E_CI           {ci:.12}");
    println!("correlation    {:.6e}", ci - split.total());
    Ok(())
}
