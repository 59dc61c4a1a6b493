//! Band reference points and pair levels for a light and a heavy mass operator.

use quasiband::error::Result;
use quasiband::hartree_fock::{band_structure, BandOptions, ScfResult};
use quasiband::model_system::{build_soft_coulomb_system, SystemSpec};
use quasiband::quasiparticle::{mass_shift, quasiparticle_level, ConstantSelfEnergy, ExtremumKind, LevelOptions};

fn main() -> Result<()> {
    let system = build_soft_coulomb_system(&SystemSpec::soft_chain(16, 0.5, 1.5, 2, 8))?;
    let run = band_structure(&system, &BandOptions::default())?;
    let scf: Vec<ScfResult> = run.scf.iter().flatten().cloned().collect();
    let samples = run.structure.row(0)?;
    let options = LevelOptions::default();
    for sigma in [0.0, 1.5] {
        let mass = mass_shift(0, &ConstantSelfEnergy(sigma), &scf)?;
        let level = quasiparticle_level(samples, 0, 2, ExtremumKind::Min, &mass, &options)?;
        println!(
            "ΔM(0) = {:.3}: regime {:?}, ε(0) = {:.8}, ε⁺ = {:.8}, ε⁻ = {:.8}, a = {:.8}",
            level.delta_m0,
            level.regime,
            level.reference_epsilon0,
            level.plus_level,
            level.minus_level,
            level.pair_energy
        );
    }
    Ok(())
}
