//! Discretized one-dimensional model systems: an isolated soft well in a box and
//! a periodic chain of soft wells (one well per cell).
//!
//! Units are atomic (ħ = m = e = 1). Grid functions are sampled values; integrals
//! are quadratures with weight `spacing` per coordinate.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, C64};

pub const MIN_GRID_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Wavefunctions vanish outside the grid.
    Box,
    /// The grid is one unit cell of an infinite chain.
    Periodic,
}

/// Uniform grid, centred on the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    points: Vec<f64>,
    spacing: f64,
}

impl Grid {
    pub fn centered(count: usize, spacing: f64) -> Result<Self> {
        if count < 1 {
            return Err(Error::invalid("grid needs at least one point"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::invalid(format!("grid spacing must be positive, got {spacing}")));
        }
        let mid = (count as f64 - 1.0) / 2.0;
        let points = (0..count).map(|i| (i as f64 - mid) * spacing).collect();
        Ok(Self { points, spacing })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Extent covered by the grid; for a periodic grid this is the lattice period.
    pub fn length(&self) -> f64 {
        self.spacing * self.points.len() as f64
    }

    /// Smallest distance between two grid points, taking periodic images into account.
    pub fn distance(&self, i: usize, j: usize, boundary: Boundary) -> f64 {
        let d = (self.points[i] - self.points[j]).abs();
        match boundary {
            Boundary::Box => d,
            Boundary::Periodic => d.min(self.length() - d),
        }
    }
}

/// Symmetric Monkhorst–Pack style k-grid over the first Brillouin zone of a chain
/// with the given period. Contains Γ only when `count` is odd.
pub fn symmetric_kgrid(count: usize, period: f64) -> Vec<f64> {
    (0..count)
        .map(|j| (2.0 * j as f64 + 1.0 - count as f64) * PI / (count as f64 * period))
        .collect()
}

/// Parameters of a soft-Coulomb model system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub grid_points: usize,
    pub spacing: f64,
    #[serde(default = "default_depth")]
    pub well_depth: f64,
    #[serde(default = "default_softening")]
    pub softening: f64,
    pub electrons: usize,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    #[serde(default)]
    pub k_points: usize,
}

fn default_depth() -> f64 {
    2.0
}
fn default_softening() -> f64 {
    1.0
}
fn default_boundary() -> Boundary {
    Boundary::Box
}

impl SystemSpec {
    pub fn soft_well(grid_points: usize, spacing: f64, well_depth: f64, electrons: usize) -> Self {
        Self {
            grid_points,
            spacing,
            well_depth,
            softening: 1.0,
            electrons,
            boundary: Boundary::Box,
            k_points: 0,
        }
    }

    pub fn soft_chain(grid_points: usize, spacing: f64, well_depth: f64, electrons: usize, k_points: usize) -> Self {
        Self {
            grid_points,
            spacing,
            well_depth,
            softening: 1.0,
            electrons,
            boundary: Boundary::Periodic,
            k_points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSystem {
    grid: Grid,
    external_potential: Vec<f64>,
    interaction_kernel: DMatrix<f64>,
    electron_count: usize,
    boundary: Boundary,
    kgrid: Vec<f64>,
}

impl ModelSystem {
    /// Assembles a system from explicit arrays, checking every structural invariant.
    pub fn new(
        grid: Grid,
        external_potential: Vec<f64>,
        interaction_kernel: DMatrix<f64>,
        electron_count: usize,
        boundary: Boundary,
        kgrid: Vec<f64>,
    ) -> Result<Self> {
        let n = grid.len();
        if n < MIN_GRID_POINTS {
            return Err(Error::invalid(format!(
                "grid has {n} points, at least {MIN_GRID_POINTS} are required"
            )));
        }
        if external_potential.len() != n {
            return Err(Error::DimensionMismatch {
                what: "external potential",
                expected: n,
                found: external_potential.len(),
            });
        }
        if interaction_kernel.nrows() != n || interaction_kernel.ncols() != n {
            return Err(Error::DimensionMismatch {
                what: "interaction kernel",
                expected: n,
                found: interaction_kernel.nrows().max(interaction_kernel.ncols()),
            });
        }
        if electron_count == 0 {
            return Err(Error::invalid("electron count must be at least 1"));
        }
        for i in 0..n {
            for j in 0..n {
                let v = interaction_kernel[(i, j)];
                if !v.is_finite() {
                    return Err(Error::invalid(format!(
                        "interaction kernel entry ({i},{j}) is not finite"
                    )));
                }
                if v != interaction_kernel[(j, i)] {
                    return Err(Error::invalid(format!(
                        "interaction kernel is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        if external_potential.iter().any(|u| !u.is_finite()) {
            return Err(Error::invalid("external potential has non-finite entries"));
        }
        match boundary {
            Boundary::Periodic => {
                if kgrid.is_empty() {
                    return Err(Error::invalid("periodic system needs a non-empty k-grid"));
                }
                for &k in &kgrid {
                    if !kgrid.iter().any(|&q| (q + k).abs() <= 1e-12 * (1.0 + k.abs())) {
                        return Err(Error::invalid(format!("k-grid is not symmetric: -({k}) is missing")));
                    }
                }
            }
            Boundary::Box => {
                if !kgrid.is_empty() {
                    return Err(Error::invalid("box systems carry no k-grid"));
                }
            }
        }
        Ok(Self {
            grid,
            external_potential,
            interaction_kernel,
            electron_count,
            boundary,
            kgrid,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn external_potential(&self) -> &[f64] {
        &self.external_potential
    }

    pub fn interaction_kernel(&self) -> &DMatrix<f64> {
        &self.interaction_kernel
    }

    pub fn electron_count(&self) -> usize {
        self.electron_count
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn kgrid(&self) -> &[f64] {
        &self.kgrid
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    /// Same system with the two-body kernel multiplied by `factor` (0 switches it off).
    pub fn with_interaction_scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.interaction_kernel *= factor;
        out
    }

    pub fn with_electrons(&self, electrons: usize) -> Result<Self> {
        if electrons == 0 {
            return Err(Error::invalid("electron count must be at least 1"));
        }
        let mut out = self.clone();
        out.electron_count = electrons;
        Ok(out)
    }

    /// Replaces the external potential, keeping grid and kernel.
    pub fn with_external_potential(&self, potential: Vec<f64>) -> Result<Self> {
        Self::new(
            self.grid.clone(),
            potential,
            self.interaction_kernel.clone(),
            self.electron_count,
            self.boundary,
            self.kgrid.clone(),
        )
    }

    /// One-body operator p²/2 + U at crystal momentum `k` (ignored for a box), acting
    /// on sampled grid values.
    pub fn one_body(&self, k: f64) -> CMatrix {
        let mut h = bloch_laplacian(&self.grid, self.boundary, k) * c(-0.5);
        for (i, &u) in self.external_potential.iter().enumerate() {
            h[(i, i)] += u;
        }
        h
    }

    /// Self-describing JSON snapshot of the full system.
    pub fn snapshot(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let raw: ModelSystem = serde_json::from_str(text)?;
        Self::new(
            raw.grid,
            raw.external_potential,
            raw.interaction_kernel,
            raw.electron_count,
            raw.boundary,
            raw.kgrid,
        )
    }

    /// SHA-256 of the compact JSON snapshot, hex encoded.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("model system serializes");
        hex_digest(&bytes)
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Soft-Coulomb well `-depth / sqrt(d² + s²)` centred on the grid origin; on a
/// periodic grid `d` is the minimum-image distance, giving one well per cell.
pub fn soft_well_potential(grid: &Grid, boundary: Boundary, depth: f64, softening: f64) -> Vec<f64> {
    let period = grid.length();
    grid.points()
        .iter()
        .map(|&x| {
            let d = match boundary {
                Boundary::Box => x,
                Boundary::Periodic => {
                    let a = x.abs();
                    a.min(period - a)
                }
            };
            -depth / (d * d + softening * softening).sqrt()
        })
        .collect()
}

pub fn soft_coulomb_kernel(grid: &Grid, boundary: Boundary, softening: f64) -> DMatrix<f64> {
    let n = grid.len();
    DMatrix::from_fn(n, n, |i, j| {
        let d = grid.distance(i, j, boundary);
        1.0 / (d * d + softening * softening).sqrt()
    })
}

pub fn build_soft_coulomb_system(spec: &SystemSpec) -> Result<ModelSystem> {
    if !(spec.softening > 0.0 && spec.softening.is_finite()) {
        return Err(Error::invalid(format!(
            "softening must be positive (kernel is singular otherwise), got {}",
            spec.softening
        )));
    }
    if spec.grid_points < MIN_GRID_POINTS {
        return Err(Error::invalid(format!(
            "grid has {} points, at least {MIN_GRID_POINTS} are required",
            spec.grid_points
        )));
    }
    if !spec.well_depth.is_finite() {
        return Err(Error::invalid("well depth must be finite"));
    }
    let grid = Grid::centered(spec.grid_points, spec.spacing)?;
    let potential = soft_well_potential(&grid, spec.boundary, spec.well_depth, spec.softening);
    let kernel = soft_coulomb_kernel(&grid, spec.boundary, spec.softening);
    let kgrid = match spec.boundary {
        Boundary::Box => Vec::new(),
        Boundary::Periodic => {
            if spec.k_points == 0 {
                return Err(Error::invalid("periodic system needs k_points >= 1"));
            }
            symmetric_kgrid(spec.k_points, grid.length())
        }
    };
    ModelSystem::new(grid, potential, kernel, spec.electrons, spec.boundary, kgrid)
}

/// Three-point finite-difference Laplacian. The periodic stencil wraps around the cell.
pub fn laplacian_matrix(grid: &Grid, boundary: Boundary) -> DMatrix<f64> {
    let n = grid.len();
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let mut lap = DMatrix::zeros(n, n);
    for i in 0..n {
        lap[(i, i)] = -2.0 * inv_h2;
        if i + 1 < n {
            lap[(i, i + 1)] = inv_h2;
            lap[(i + 1, i)] = inv_h2;
        }
    }
    if boundary == Boundary::Periodic && n > 2 {
        lap[(0, n - 1)] += inv_h2;
        lap[(n - 1, 0)] += inv_h2;
    }
    lap
}

/// Laplacian acting on Bloch functions with ψ(x + L) = e^{ikL} ψ(x): the coupling
/// that wraps across the cell boundary carries the phase.
pub fn bloch_laplacian(grid: &Grid, boundary: Boundary, k: f64) -> CMatrix {
    let n = grid.len();
    if boundary == Boundary::Box || n < 3 {
        return laplacian_matrix(grid, boundary).map(c);
    }
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let mut lap = laplacian_matrix(grid, Boundary::Box).map(c);
    let phase = C64::from_polar(1.0, k * grid.length());
    lap[(n - 1, 0)] = phase * inv_h2;
    lap[(0, n - 1)] = phase.conj() * inv_h2;
    lap
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigvalsh, hermitian_deviation, max_abs, CVector};

    fn box_spec() -> SystemSpec {
        SystemSpec::soft_well(64, 0.25, 2.0, 2)
    }

    #[test]
    fn kernel_values_at_reference_separations() {
        let grid = Grid::centered(8, 3f64.sqrt()).unwrap();
        let v = soft_coulomb_kernel(&grid, Boundary::Box, 1.0);
        assert_eq!(v[(3, 3)], 1.0);
        assert!((v[(3, 4)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn box_system_scan() {
        let sys = build_soft_coulomb_system(&box_spec()).unwrap();
        let v = sys.interaction_kernel();
        for i in 0..sys.dim() {
            for j in 0..sys.dim() {
                assert_eq!(v[(i, j)], v[(j, i)]);
            }
        }
        // minimum of U sits at the two central points of an even grid
        let u = sys.external_potential();
        let (imin, umin) = u
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |b, (i, &x)| if x < b.1 { (i, x) } else { b });
        assert!(imin == 31 || imin == 32);
        assert_eq!(u[31], u[32]);
        assert!(umin < -1.9);
        let x = sys.grid().points()[imin];
        assert!(x.abs() <= 0.125 + 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut spec = box_spec();
        spec.softening = 0.0;
        assert!(build_soft_coulomb_system(&spec).is_err());
        spec.softening = -1.0;
        assert!(build_soft_coulomb_system(&spec).is_err());
        let mut spec = box_spec();
        spec.grid_points = 7;
        assert!(build_soft_coulomb_system(&spec).is_err());
        let mut spec = box_spec();
        spec.boundary = Boundary::Periodic;
        spec.k_points = 0;
        assert!(build_soft_coulomb_system(&spec).is_err());
    }

    #[test]
    fn periodic_potential_has_lattice_period() {
        let spec = SystemSpec::soft_chain(24, 0.3, 1.5, 2, 8);
        let sys = build_soft_coulomb_system(&spec).unwrap();
        let grid = sys.grid();
        let period = grid.length();
        let image = |x: f64| (x - period * (x / period).round()).abs();
        for (i, &x) in grid.points().iter().enumerate() {
            for shift in [0.0, period, -2.0 * period] {
                let a = image(x + shift);
                let u = -1.5 / (a * a + 1.0).sqrt();
                assert!((u - sys.external_potential()[i]).abs() <= 1e-12);
            }
        }
        let k = sys.kgrid();
        assert_eq!(k.len(), 8);
        for j in 0..8 {
            assert_eq!(k[j], -k[7 - j]);
        }
    }

    #[test]
    fn tridiagonal_box_stencil() {
        let grid = Grid::centered(3, 0.5).unwrap();
        let lap = laplacian_matrix(&grid, Boundary::Box);
        let expected = DMatrix::from_row_slice(3, 3, &[-2.0, 1.0, 0.0, 1.0, -2.0, 1.0, 0.0, 1.0, -2.0]) / 0.25;
        assert_eq!(lap, expected);
    }

    #[test]
    fn constant_is_annihilated_on_ring() {
        let grid = Grid::centered(16, 0.4).unwrap();
        let lap = laplacian_matrix(&grid, Boundary::Periodic);
        let ones = nalgebra::DVector::from_element(16, 3.0);
        assert!((lap * ones).amax() < 1e-12);
    }

    #[test]
    fn plane_wave_stencil_eigenvalue() {
        let n = 20;
        let h = 0.3;
        let grid = Grid::centered(n, h).unwrap();
        let lap = laplacian_matrix(&grid, Boundary::Periodic).map(c);
        for m in 0..n {
            let k = 2.0 * std::f64::consts::PI * m as f64 / (n as f64 * h);
            let wave = CVector::from_iterator(n, grid.points().iter().map(|&x| C64::from_polar(1.0, k * x)));
            let expected = -(2.0 / (h * h)) * (1.0 - (k * h).cos());
            let residual = &lap * &wave - &wave * c(expected);
            assert!(max_abs(&residual) < 1e-10, "m = {m}: {}", max_abs(&residual));
        }
    }

    #[test]
    fn bloch_laplacian_twisted_plane_wave() {
        let n = 12;
        let h = 0.25;
        let grid = Grid::centered(n, h).unwrap();
        let length = grid.length();
        let k = 0.7 * std::f64::consts::PI / length;
        let lap = bloch_laplacian(&grid, Boundary::Periodic, k);
        assert!(hermitian_deviation(&lap) < 1e-15);
        let wave = CVector::from_iterator(n, grid.points().iter().map(|&x| C64::from_polar(1.0, k * x)));
        let expected = -(2.0 / (h * h)) * (1.0 - (k * h).cos());
        assert!(max_abs(&(&lap * &wave - &wave * c(expected))) < 1e-10);
    }

    #[test]
    fn kinetic_is_positive_semidefinite() {
        for boundary in [Boundary::Box, Boundary::Periodic] {
            let grid = Grid::centered(30, 0.2).unwrap();
            let kinetic = bloch_laplacian(&grid, boundary, 0.3) * c(-0.5);
            let scale = 1.0 / (grid.spacing() * grid.spacing());
            assert!(eigvalsh(&kinetic)[0] / scale >= -1e-10);
        }
    }

    #[test]
    fn snapshot_round_trip_preserves_hash() {
        let sys = build_soft_coulomb_system(&SystemSpec::soft_chain(16, 0.5, 1.0, 2, 4)).unwrap();
        let text = sys.snapshot().unwrap();
        let back = ModelSystem::from_snapshot(&text).unwrap();
        assert_eq!(back, sys);
        assert_eq!(back.content_hash(), sys.content_hash());
    }
}
