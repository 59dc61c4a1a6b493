//! Full-CI ground states of a soft-Coulomb well for one to four electrons.

use quasiband::error::Result;
use quasiband::many_body_oracle::oracle_record;
use quasiband::model_system::{build_soft_coulomb_system, SystemSpec};

fn main() -> Result<()> {
    println!("{:>3} {:>10} {:>22}", "N", "dets", "E_CI (hartree)");
    for electrons in 1..=4 {
        let system = build_soft_coulomb_system(&SystemSpec::soft_well(16, 0.5, 2.0, electrons))?;
        let record = oracle_record(&system, 6)?;
        println!("{electrons:>3} {:>10} {:>22.14}", record.dimension, record.energy);
        for t in &record.traces {
            println!("      Sp rho_{} = {:.12} (target {})", t.order, t.trace, t.target);
        }
    }
    Ok(())
}
