//! Bound states of the softened 1D hydrogen-like well as an orthonormal basis.

use quasiband::error::Result;
use quasiband::hydrogenic_spectrum::hydrogenic_basis;
use quasiband::model_system::Grid;

fn main() -> Result<()> {
    for charge in [1.0, 2.0] {
        let grid = Grid::centered(401, 0.1 / charge)?;
        let basis = hydrogenic_basis(4, charge, &grid)?;
        println!(
            "Z = {charge}: orthonormality deviation {:.3e}",
            basis.orthonormality_deviation()
        );
        for (level, energy) in basis.levels.iter().zip(&basis.grid_energies) {
            println!("  n = {}  grid energy {energy:>14.10}", level.n);
        }
    }
    Ok(())
}
