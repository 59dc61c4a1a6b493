//! Reduced density matrices of a correlated two-electron state and the energy
//! recovered from them.

use quasiband::density_matrix::energy_from_density_matrices;
use quasiband::error::Result;
use quasiband::many_body_oracle::{exact_reduced_density_matrix, full_ci_ground_state};
use quasiband::model_system::{build_soft_coulomb_system, SystemSpec};

fn main() -> Result<()> {
    let system = build_soft_coulomb_system(&SystemSpec::soft_well(16, 0.5, 2.0, 2))?;
    let ci = full_ci_ground_state(&system, 8)?;
    let rho1 = exact_reduced_density_matrix(&ci.state, 1)?;
    let rho2 = exact_reduced_density_matrix(&ci.state, 2)?;
    let energy = energy_from_density_matrices(&rho1, &rho2, &system.one_body(0.0), system.interaction_kernel())?;
    println!("Sp rho_1 = {:.12}", rho1.trace());
    println!("Sp rho_2 = {:.12}", rho2.trace());
    println!("natural occupations: {:?}", &rho1.occupation_numbers()?[..4]);
    println!("E from <H>           = {:.14}", ci.energy);
    println!("E from density mats. = {energy:.14}");
    Ok(())
}
