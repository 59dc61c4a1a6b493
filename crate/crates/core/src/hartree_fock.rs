//! Closed-shell Hartree–Fock on the model systems, one crystal momentum at a time.
//!
//! The Fock operator is ĥ + V̂ˢᶜ − Σ̂ˣ with a local Hartree potential built from the
//! electron density and a fully nonlocal exchange matrix built from the per-spin
//! density matrix. A single electron sees no mean field at all: its exchange term
//! is its own Hartree field, so the two cancel identically.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density_matrix::{hf_decomposition, DensityMatrix, HfSplit, KOperator, Projector, Spin, SpinOrbitalBasis};
use crate::error::{Error, Result};
use crate::linalg::{c, ensure_hermitian, max_abs, sorted_eigh, CMatrix, CVector};
use crate::model_system::{Boundary, ModelSystem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScfOptions {
    pub mixing: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ScfOptions {
    fn default() -> Self {
        Self {
            mixing: 0.5,
            tol: 1e-10,
            max_iter: 500,
        }
    }
}

impl ScfOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return Err(Error::invalid(format!("mixing must be in (0, 1], got {}", self.mixing)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FockOperator {
    pub h_core: CMatrix,
    pub hartree: CMatrix,
    pub exchange: CMatrix,
    pub total: CMatrix,
    pub momentum: f64,
}

impl FockOperator {
    pub fn mean_field(&self) -> CMatrix {
        &self.hartree - &self.exchange
    }

    pub fn to_k_operator(&self) -> KOperator {
        KOperator {
            momentum: self.momentum,
            one_body: self.h_core.clone(),
            interaction: self.mean_field(),
        }
    }
}

/// Number of doubly occupied orbitals, or the single orbital of a lone electron.
fn occupied_orbitals(electrons: usize) -> Result<usize> {
    match electrons {
        1 => Ok(1),
        n if n % 2 == 0 => Ok(n / 2),
        n => Err(Error::Unsupported(format!(
            "closed-shell Hartree-Fock needs an even electron count (or exactly 1), got {n}"
        ))),
    }
}

/// Assembles the Fock operator at momentum `k`.
///
/// `density` is the spin-summed electron density n(r) and `spin_density_matrix`
/// the per-spin ρ(r, r′) = Σₘ ψₘ(r)ψₘ*(r′), both as sampled values.
pub fn build_fock(
    system: &ModelSystem,
    density: &[f64],
    spin_density_matrix: &CMatrix,
    k: f64,
) -> Result<FockOperator> {
    let g = system.dim();
    if density.len() != g {
        return Err(Error::DimensionMismatch {
            what: "density",
            expected: g,
            found: density.len(),
        });
    }
    if spin_density_matrix.nrows() != g || spin_density_matrix.ncols() != g {
        return Err(Error::DimensionMismatch {
            what: "density matrix",
            expected: g,
            found: spin_density_matrix.nrows(),
        });
    }
    let w = system.grid().spacing();
    let v = system.interaction_kernel();
    let h_core = system.one_body(k);

    let mut hartree = CMatrix::zeros(g, g);
    for i in 0..g {
        let field: f64 = (0..g).map(|j| v[(i, j)] * density[j]).sum();
        hartree[(i, i)] = c(field * w);
    }
    let exchange = if system.electron_count() == 1 {
        hartree.clone()
    } else {
        CMatrix::from_fn(g, g, |i, j| spin_density_matrix[(i, j)] * (v[(i, j)] * w))
    };
    let total = &h_core + (&hartree - &exchange);
    Ok(FockOperator {
        h_core,
        hartree,
        exchange,
        total,
        momentum: k,
    })
}

#[derive(Debug, Clone)]
pub struct ScfResult {
    pub momentum: f64,
    pub electrons: usize,
    /// Spatial orbitals occupied in the ground determinant.
    pub occupied: usize,
    /// Sampled orbitals ψₙ(k, r) as columns, normalized under grid quadrature.
    pub orbitals: CMatrix,
    /// Orbital energies, ascending.
    pub eigenvalues: Vec<f64>,
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    pub residual_history: Vec<f64>,
    pub energy_history: Vec<f64>,
    /// False when the energy rose after the third iteration.
    pub energy_monotone: bool,
    /// Operator whose eigenvectors are `orbitals`.
    pub fock: FockOperator,
    pub spacing: f64,
}

impl ScfResult {
    /// Orbitals as discrete-orthonormal coefficient columns.
    pub fn coefficients(&self) -> CMatrix {
        &self.orbitals * c(self.spacing.sqrt())
    }

    pub fn coefficient(&self, band: usize) -> CVector {
        self.orbitals.column(band) * c(self.spacing.sqrt())
    }

    /// Largest deviation of the quadrature overlap matrix from the identity.
    pub fn orthonormality_deviation(&self) -> f64 {
        let overlap = self.orbitals.adjoint() * &self.orbitals * c(self.spacing);
        let n = overlap.nrows();
        max_abs(&(&overlap - CMatrix::identity(n, n)))
    }

    fn occupied_spins(&self) -> Vec<Spin> {
        if self.electrons == 1 {
            vec![Spin::Up]
        } else {
            vec![Spin::Up, Spin::Down]
        }
    }

    /// Spin-orbitals of the ground determinant.
    pub fn occupied_basis(&self) -> Result<SpinOrbitalBasis> {
        let spatial = self.coefficients().columns(0, self.occupied).into_owned();
        let orbitals = (0..self.occupied)
            .flat_map(|m| self.occupied_spins().into_iter().map(move |s| (m, s)))
            .collect();
        SpinOrbitalBasis::new(spatial, self.spacing, orbitals)
    }

    /// ρ₁ and ρ₂ of the ground determinant.
    pub fn density_matrices(&self) -> Result<(DensityMatrix, DensityMatrix)> {
        let basis = self.occupied_basis()?;
        Ok((
            DensityMatrix::of_determinant(basis.clone(), 1)?,
            DensityMatrix::of_determinant(basis, 2)?,
        ))
    }

    /// HF energy split into ε⁽⁰⁾N and E^HF through the determinant's density matrices.
    pub fn energy_split(&self, system: &ModelSystem) -> Result<HfSplit> {
        let (rho1, rho2) = self.density_matrices()?;
        hf_decomposition(
            &rho1,
            &rho2,
            &system.one_body(self.momentum),
            system.interaction_kernel(),
        )
    }

    /// Per-spin density matrix and electron density of the converged orbitals.
    pub fn densities(&self) -> (CMatrix, Vec<f64>) {
        density_of(&self.orbitals, self.occupied, self.electrons)
    }

    /// Fock operator rebuilt from the converged orbitals' own density.
    pub fn rebuilt_fock(&self, system: &ModelSystem) -> Result<FockOperator> {
        let (rho, density) = self.densities();
        build_fock(system, &density, &rho, self.momentum)
    }

    /// Band-diagonal projectors |n;k⟩⟨n;k| for every occupied spin-orbital.
    pub fn occupied_projectors(&self) -> Vec<Projector> {
        (0..self.occupied)
            .flat_map(|m| {
                let state = self.coefficient(m);
                self.occupied_spins()
                    .into_iter()
                    .map(move |s| Projector::band(m, self.momentum, state.clone(), s))
            })
            .collect()
    }
}

fn density_of(orbitals: &CMatrix, occupied: usize, electrons: usize) -> (CMatrix, Vec<f64>) {
    let occ = orbitals.columns(0, occupied);
    let rho = occ * occ.adjoint();
    let spin_factor = if electrons == 1 { 1.0 } else { 2.0 };
    let density = (0..rho.nrows()).map(|i| spin_factor * rho[(i, i)].re).collect();
    (rho, density)
}

fn scf_energy(fock: &FockOperator, rho: &CMatrix, electrons: usize, w: f64) -> f64 {
    let spin_factor = if electrons == 1 { 1.0 } else { 2.0 };
    let one = (&fock.h_core * rho).trace().re;
    let two = (fock.mean_field() * rho).trace().re;
    spin_factor * (one + 0.5 * two) * w
}

/// Self-consistent closed-shell solution at crystal momentum `k`.
pub fn scf_solve(system: &ModelSystem, k: f64, options: &ScfOptions) -> Result<ScfResult> {
    options.validate()?;
    let electrons = system.electron_count();
    let occupied = occupied_orbitals(electrons)?;
    let g = system.dim();
    if occupied > g {
        return Err(Error::invalid("more occupied orbitals than grid points"));
    }
    let w = system.grid().spacing();
    let scale = c(1.0 / w.sqrt());

    let (_, guess) = sorted_eigh(&system.one_body(k), None);
    let mut previous = guess.clone();
    let (mut rho_in, mut density_in) = density_of(&(guess * scale), occupied, electrons);

    let mut residual_history = Vec::new();
    let mut energy_history = Vec::new();
    for iteration in 1..=options.max_iter {
        let fock = build_fock(system, &density_in, &rho_in, k)?;
        ensure_hermitian(&fock.total, "Fock operator", 1e-12)?;
        energy_history.push(scf_energy(&fock, &rho_in, electrons, w));
        let (values, vectors) = sorted_eigh(&fock.total, Some(&previous.columns(0, occupied).into_owned()));
        let orbitals = &vectors * scale;
        let (rho_out, density_out) = density_of(&orbitals, occupied, electrons);
        let change = max_abs(&(&rho_out - &rho_in));
        residual_history.push(change);
        if change < options.tol {
            let energy_monotone = energy_history
                .windows(2)
                .enumerate()
                .all(|(i, pair)| i + 1 < 3 || pair[1] <= pair[0] + 1e-12);
            if !energy_monotone {
                log::warn!("SCF energy increased after iteration 3 at k = {k}");
            }
            return Ok(ScfResult {
                momentum: k,
                electrons,
                occupied,
                orbitals,
                eigenvalues: values,
                iterations: iteration,
                final_residual: change,
                converged: true,
                residual_history,
                energy_history,
                energy_monotone,
                fock,
                spacing: w,
            });
        }
        let a = options.mixing;
        rho_in = rho_in * c(1.0 - a) + rho_out * c(a);
        density_in = density_in
            .iter()
            .zip(&density_out)
            .map(|(x, y)| (1.0 - a) * x + a * y)
            .collect();
        previous = vectors;
    }
    let last = residual_history.last().copied().unwrap_or(f64::NAN);
    Err(Error::ScfNotConverged {
        iterations: options.max_iter,
        last,
        history: residual_history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandOptions {
    #[serde(default)]
    pub scf: ScfOptions,
    /// Number of bands kept per k-point.
    #[serde(default = "default_band_count")]
    pub bands: usize,
}

fn default_band_count() -> usize {
    4
}

impl Default for BandOptions {
    fn default() -> Self {
        Self {
            scf: ScfOptions::default(),
            bands: default_band_count(),
        }
    }
}

/// εₙ(k) samples on a symmetric k-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandStructure {
    pub kgrid: Vec<f64>,
    /// `bands[n][j]` is band `n` at `kgrid[j]`; NaN where the SCF failed.
    pub bands: Vec<Vec<f64>>,
    /// Electrons per band (2 for doubly occupied, 1 for a lone electron).
    pub occupations: Vec<usize>,
    pub k_converged: Vec<bool>,
    /// max over converged bands and k of |εₙ(k) − εₙ(−k)|.
    pub symmetry_deviation: f64,
}

impl BandStructure {
    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    pub fn is_band_converged(&self, band: usize) -> bool {
        band < self.bands.len() && self.k_converged.iter().all(|&ok| ok)
    }

    /// Samples of one band, rejected when any k-point failed to converge.
    pub fn row(&self, band: usize) -> Result<&[f64]> {
        if band >= self.bands.len() {
            return Err(Error::invalid(format!("band {band} does not exist")));
        }
        if !self.is_band_converged(band) {
            return Err(Error::UnconvergedBand(band));
        }
        Ok(&self.bands[band])
    }

    pub fn occupied_bands(&self) -> usize {
        self.occupations.iter().filter(|&&o| o > 0).count()
    }
}

#[derive(Debug, Clone)]
pub struct BandRun {
    pub structure: BandStructure,
    /// Per-k SCF results, `None` where the SCF failed.
    pub scf: Vec<Option<ScfResult>>,
    pub failures: Vec<(f64, String)>,
}

/// Runs the SCF at every k of a periodic system (in parallel) and collects bands.
pub fn band_structure(system: &ModelSystem, options: &BandOptions) -> Result<BandRun> {
    if system.boundary() != Boundary::Periodic {
        return Err(Error::invalid("band structure needs a periodic system"));
    }
    let kgrid = system.kgrid().to_vec();
    if kgrid.is_empty() {
        return Err(Error::invalid("k-grid is empty"));
    }
    options.scf.validate()?;
    let occupied = occupied_orbitals(system.electron_count())?;
    let nbands = options.bands.max(occupied).min(system.dim());

    let results: Vec<Result<ScfResult>> = kgrid.par_iter().map(|&k| scf_solve(system, k, &options.scf)).collect();

    let mut bands = vec![vec![f64::NAN; kgrid.len()]; nbands];
    let mut k_converged = vec![false; kgrid.len()];
    let mut scf = Vec::with_capacity(kgrid.len());
    let mut failures = Vec::new();
    for (j, result) in results.into_iter().enumerate() {
        match result {
            Ok(run) => {
                for (n, band) in bands.iter_mut().enumerate() {
                    band[j] = run.eigenvalues[n];
                }
                k_converged[j] = true;
                scf.push(Some(run));
            }
            Err(err) => {
                log::warn!("SCF failed at k = {}: {err}", kgrid[j]);
                failures.push((kgrid[j], err.to_string()));
                scf.push(None);
            }
        }
    }

    let count = kgrid.len();
    let mut symmetry_deviation: f64 = 0.0;
    for band in &bands {
        for j in 0..count {
            let mirror = count - 1 - j;
            if k_converged[j] && k_converged[mirror] {
                symmetry_deviation = symmetry_deviation.max((band[j] - band[mirror]).abs());
            }
        }
    }
    let electrons_per_band = if system.electron_count() == 1 { 1 } else { 2 };
    let occupations = (0..nbands)
        .map(|n| if n < occupied { electrons_per_band } else { 0 })
        .collect();

    Ok(BandRun {
        structure: BandStructure {
            kgrid,
            bands,
            occupations,
            k_converged,
            symmetry_deviation,
        },
        scf,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigvalsh, hermitian_deviation};
    use crate::model_system::{build_soft_coulomb_system, SystemSpec};

    fn box_system(electrons: usize) -> ModelSystem {
        build_soft_coulomb_system(&SystemSpec::soft_well(64, 0.25, 2.0, electrons)).unwrap()
    }

    #[test]
    fn lone_electron_sees_bare_operator() {
        let sys = box_system(1);
        let g = sys.dim();
        let (_, vecs) = sorted_eigh(&sys.one_body(0.0), None);
        let phi = vecs.column(0) / c(sys.grid().spacing().sqrt());
        let rho = &phi * phi.adjoint();
        let density: Vec<f64> = (0..g).map(|i| rho[(i, i)].re).collect();
        let fock = build_fock(&sys, &density, &rho, 0.0).unwrap();
        assert!(max_abs(&(&fock.hartree - &fock.exchange)) <= 1e-12);
        assert!(max_abs(&(&fock.total - &fock.h_core)) <= 1e-12);
        assert!(max_abs(&fock.hartree) > 0.1);
    }

    #[test]
    fn empty_density_gives_bare_operator() {
        let sys = box_system(2);
        let g = sys.dim();
        let fock = build_fock(&sys, &vec![0.0; g], &CMatrix::zeros(g, g), 0.0).unwrap();
        assert_eq!(max_abs(&fock.hartree), 0.0);
        assert_eq!(max_abs(&fock.exchange), 0.0);
        assert_eq!(fock.total, fock.h_core);
    }

    #[test]
    fn fock_rejects_wrong_dimensions() {
        let sys = box_system(2);
        assert!(build_fock(&sys, &[0.0; 3], &CMatrix::zeros(64, 64), 0.0).is_err());
        assert!(build_fock(&sys, &[0.0; 64], &CMatrix::zeros(3, 3), 0.0).is_err());
    }

    #[test]
    fn hartree_expectation_matches_direct_double_sum() {
        let sys = box_system(2);
        let run = scf_solve(&sys, 0.0, &ScfOptions::default()).unwrap();
        let (rho, density) = run.densities();
        let fock = build_fock(&sys, &density, &rho, 0.0).unwrap();
        let phi = run.orbitals.column(0);
        let w = sys.grid().spacing();
        let expectation = (phi.adjoint() * &fock.hartree * phi)[(0, 0)].re * w;
        // ∫∫ |φ₀(r)|² v(r, r′) n(r′) dr dr′ by explicit quadrature
        let v = sys.interaction_kernel();
        let mut direct = 0.0;
        for i in 0..sys.dim() {
            for j in 0..sys.dim() {
                direct += phi[i].norm_sqr() * v[(i, j)] * 2.0 * phi[j].norm_sqr() * w * w;
            }
        }
        assert!((expectation - direct).abs() < 1e-10);
    }

    #[test]
    fn noninteracting_scf_converges_immediately() {
        let sys = box_system(2).with_interaction_scale(0.0);
        let run = scf_solve(&sys, 0.0, &ScfOptions::default()).unwrap();
        assert_eq!(run.iterations, 1);
        let bare = eigvalsh(&sys.one_body(0.0));
        for (a, b) in run.eigenvalues.iter().zip(&bare) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn lone_electron_eigenvalue_is_bare() {
        let sys = box_system(1);
        let run = scf_solve(&sys, 0.0, &ScfOptions::default()).unwrap();
        let bare = eigvalsh(&sys.one_body(0.0));
        assert!((run.eigenvalues[0] - bare[0]).abs() <= 1e-12);
    }

    #[test]
    fn converged_orbitals_are_orthonormal_and_fock_hermitian() {
        let sys = box_system(2);
        let run = scf_solve(&sys, 0.0, &ScfOptions::default()).unwrap();
        assert!(run.converged);
        assert!(run.orthonormality_deviation() < 1e-10);
        assert!(hermitian_deviation(&run.fock.total) < 1e-12);
        assert!(run.eigenvalues.windows(2).all(|p| p[0] <= p[1]));
        assert!(run.energy_monotone);
    }

    #[test]
    fn odd_electron_count_is_unsupported() {
        let sys = box_system(3);
        assert!(matches!(
            scf_solve(&sys, 0.0, &ScfOptions::default()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn non_convergence_reports_history() {
        let sys = box_system(2);
        let options = ScfOptions {
            max_iter: 2,
            tol: 1e-14,
            mixing: 0.1,
        };
        match scf_solve(&sys, 0.0, &options) {
            Err(Error::ScfNotConverged { history, .. }) => assert_eq!(history.len(), 2),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn free_lattice_follows_stencil_dispersion() {
        let spec = SystemSpec::soft_chain(16, 0.5, 0.0, 2, 8);
        let sys = build_soft_coulomb_system(&spec).unwrap().with_interaction_scale(0.0);
        let run = band_structure(&sys, &BandOptions::default()).unwrap();
        let h = sys.grid().spacing();
        for (j, &k) in run.structure.kgrid.iter().enumerate() {
            let expected = (1.0 - (k * h).cos()) / (h * h);
            assert!((run.structure.bands[0][j] - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn gamma_only_grid_reduces_to_scf() {
        let spec = SystemSpec::soft_chain(16, 0.5, 1.0, 2, 1);
        let sys = build_soft_coulomb_system(&spec).unwrap();
        let run = band_structure(&sys, &BandOptions::default()).unwrap();
        assert_eq!(run.structure.kgrid, vec![0.0]);
        let direct = scf_solve(&sys, 0.0, &ScfOptions::default()).unwrap();
        for n in 0..run.structure.band_count() {
            assert_eq!(run.structure.bands[n][0], direct.eigenvalues[n]);
        }
    }

    #[test]
    fn bands_are_even_in_k() {
        let spec = SystemSpec::soft_chain(16, 0.5, 1.5, 2, 6);
        let sys = build_soft_coulomb_system(&spec).unwrap();
        let run = band_structure(&sys, &BandOptions::default()).unwrap();
        assert!(run.structure.symmetry_deviation <= 1e-8);
        assert_eq!(run.structure.occupations, vec![2, 0, 0, 0]);
    }

    #[test]
    fn box_system_has_no_bands() {
        assert!(band_structure(&box_system(2), &BandOptions::default()).is_err());
    }
}
