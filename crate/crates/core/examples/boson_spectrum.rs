//! Charged vector-boson levels and the large-n mass-operator limit.

use quasiband::error::Result;
use quasiband::hydrogenic_spectrum::{mass_operator_limit, mass_spectrum, truncation_exponent};

fn main() -> Result<()> {
    println!("{:>3} {:>3} {:>7} {:>20}", "n", "k", "gamma", "E1");
    for row in mass_spectrum(1.0, &[0.05, 0.1, 0.2], &[1, 2, 3], &[1, 2])? {
        println!("{:>3} {:>3} {:>7.3} {:>20.15}", row.n, row.k, row.gamma, row.energy);
    }
    for m in [1.0, 2.0] {
        println!(
            "ΔM∞(m = {m}) = {:.12}",
            mass_operator_limit(m, 0.1, 1, &[10, 100, 1000])?
        );
    }
    println!(
        "residual exponent {:.6}",
        truncation_exponent(1.0, 2, 1, &[0.2, 0.1, 0.05, 0.025])?
    );
    Ok(())
}
