//! Charged vector-boson energy expansion and a hydrogen-like basis on the grid.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sorted_eigh_real, to_complex, CMatrix};
use crate::model_system::{laplacian_matrix, Boundary, Grid};

/// Core softening of the 1D hydrogen-like well −Z/sqrt(x² + s²).
pub const HYDROGENIC_SOFTENING: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BosonSpectrumParams {
    pub mass: f64,
    pub gamma: f64,
    pub n: u32,
    pub k: i32,
}

impl BosonSpectrumParams {
    pub fn new(mass: f64, gamma: f64, n: u32, k: i32) -> Result<Self> {
        let params = Self { mass, gamma, n, k };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::invalid(format!("mass must be positive, got {}", self.mass)));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid(format!(
                "coupling must lie in [0, 1), got {}",
                self.gamma
            )));
        }
        if self.n == 0 {
            return Err(Error::invalid("principal quantum number must be at least 1"));
        }
        if self.k == 0 {
            return Err(Error::invalid("quantum number k must be nonzero"));
        }
        Ok(())
    }
}

/// E₁ = m/2 − mγ²/2n² − (mγ⁴/8n³)(4/|k| − 3/n) − (mγ⁶/8n⁴)(3/n² − 8/(n|k|) + 4/k²).
pub fn boson_energy(params: &BosonSpectrumParams) -> Result<f64> {
    params.validate()?;
    let m = params.mass;
    let g2 = params.gamma * params.gamma;
    let n = f64::from(params.n);
    let k = f64::from(params.k.unsigned_abs());
    let second = m * g2 / (2.0 * n * n);
    let fourth = m * g2 * g2 / (8.0 * n.powi(3)) * (4.0 / k - 3.0 / n);
    let sixth = m * g2 * g2 * g2 / (8.0 * n.powi(4)) * (3.0 / (n * n) - 8.0 / (n * k) + 4.0 / (k * k));
    Ok(m / 2.0 - second - fourth - sixth)
}

/// ΔM∞ = lim 2E₁(n), by quadratic extrapolation in 1/n² through the last three n.
pub fn mass_operator_limit(mass: f64, gamma: f64, k: i32, n_sequence: &[u32]) -> Result<f64> {
    if n_sequence.len() < 3 {
        return Err(Error::invalid(
            "mass-operator extrapolation needs at least three n values",
        ));
    }
    if n_sequence.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("n sequence must be strictly increasing"));
    }
    let tail = &n_sequence[n_sequence.len() - 3..];
    let mut nodes = Vec::with_capacity(3);
    for &n in tail {
        let e = boson_energy(&BosonSpectrumParams::new(mass, gamma, n, k)?)?;
        let x = 1.0 / (f64::from(n) * f64::from(n));
        nodes.push((x, 2.0 * e));
    }
    // weights sum to one, so extrapolate the differences from the last value
    let anchor = nodes[2].1;
    let mut total = anchor;
    for (i, &(xi, yi)) in nodes.iter().enumerate() {
        let mut weight = 1.0;
        for (j, &(xj, _)) in nodes.iter().enumerate() {
            if i != j {
                weight *= xj / (xj - xi);
            }
        }
        total += weight * (yi - anchor);
    }
    Ok(total)
}

/// Log-log slope of |E₁ − m/2 + mγ²/2n²| against γ (least squares).
pub fn truncation_exponent(mass: f64, n: u32, k: i32, gammas: &[f64]) -> Result<f64> {
    if gammas.len() < 2 {
        return Err(Error::invalid("need at least two coupling values"));
    }
    let mut points = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let e = boson_energy(&BosonSpectrumParams::new(mass, gamma, n, k)?)?;
        let nf = f64::from(n);
        let residual = (e - mass / 2.0 + mass * gamma * gamma / (2.0 * nf * nf)).abs();
        if !(residual > 0.0) {
            return Err(Error::invalid(format!("residual vanishes at γ = {gamma}")));
        }
        points.push((gamma.ln(), residual.ln()));
    }
    let count = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / count;
    let my = points.iter().map(|p| p.1).sum::<f64>() / count;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassSpectrumRow {
    pub n: u32,
    pub k: i32,
    pub gamma: f64,
    pub energy: f64,
    pub twice_energy: f64,
}

/// E₁ over every (γ, n, k) combination, in that nesting order.
pub fn mass_spectrum(mass: f64, gammas: &[f64], ns: &[u32], ks: &[i32]) -> Result<Vec<MassSpectrumRow>> {
    let mut rows = Vec::with_capacity(gammas.len() * ns.len() * ks.len());
    for &gamma in gammas {
        for &n in ns {
            for &k in ks {
                let energy = boson_energy(&BosonSpectrumParams::new(mass, gamma, n, k)?)?;
                rows.push(MassSpectrumRow {
                    n,
                    k,
                    gamma,
                    energy,
                    twice_energy: 2.0 * energy,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HydrogenicLevel {
    pub n: u32,
    /// −Z²/(2n²).
    pub energy: f64,
    pub degeneracy: u32,
}

impl HydrogenicLevel {
    pub fn new(n: u32, z: f64) -> Self {
        let nf = f64::from(n);
        Self {
            n,
            energy: -z * z / (2.0 * nf * nf),
            degeneracy: n * n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HydrogenicBasis {
    pub charge: f64,
    pub softening: f64,
    pub spacing: f64,
    /// Sampled bound states as columns, orthonormal under grid quadrature.
    pub functions: DMatrix<f64>,
    /// Grid eigenvalues of −½d²/dx² − Z/sqrt(x² + s²).
    pub grid_energies: Vec<f64>,
    pub levels: Vec<HydrogenicLevel>,
}

impl HydrogenicBasis {
    /// Discrete-orthonormal coefficient columns, usable as a spin-orbital basis.
    pub fn coefficients(&self) -> CMatrix {
        to_complex(&(&self.functions * self.spacing.sqrt()))
    }

    /// Largest deviation of the quadrature overlap from the identity.
    pub fn orthonormality_deviation(&self) -> f64 {
        let overlap = self.functions.transpose() * &self.functions * self.spacing;
        let n = overlap.nrows();
        (overlap - DMatrix::identity(n, n)).amax()
    }
}

/// Lowest `n_max` states of the 1D hydrogen-like well with the default softening.
pub fn hydrogenic_basis(n_max: u32, charge: f64, grid: &Grid) -> Result<HydrogenicBasis> {
    hydrogenic_basis_with_softening(n_max, charge, HYDROGENIC_SOFTENING, grid)
}

pub fn hydrogenic_basis_with_softening(
    n_max: u32,
    charge: f64,
    softening: f64,
    grid: &Grid,
) -> Result<HydrogenicBasis> {
    if n_max == 0 {
        return Err(Error::invalid("n_max must be at least 1"));
    }
    if !(charge > 0.0 && charge.is_finite()) {
        return Err(Error::invalid(format!("charge must be positive, got {charge}")));
    }
    if !(softening > 0.0) {
        return Err(Error::invalid("softening must be positive"));
    }
    let required = 0.2 / charge;
    if grid.spacing() > required {
        return Err(Error::UnderResolvedGrid {
            spacing: grid.spacing(),
            required,
        });
    }
    let count = n_max as usize;
    if count > grid.len() {
        return Err(Error::invalid("more states requested than grid points"));
    }
    let mut hamiltonian = laplacian_matrix(grid, Boundary::Box) * -0.5;
    for (i, &x) in grid.points().iter().enumerate() {
        hamiltonian[(i, i)] -= charge / (x * x + softening * softening).sqrt();
    }
    let (values, vectors) = sorted_eigh_real(&hamiltonian);
    let mut functions = vectors.columns(0, count) / grid.spacing().sqrt();
    for mut column in functions.column_iter_mut() {
        // fix the sign so the largest-magnitude sample is positive
        let peak = column
            .iter()
            .copied()
            .fold(0.0_f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if peak < 0.0 {
            column.neg_mut();
        }
    }
    Ok(HydrogenicBasis {
        charge,
        softening,
        spacing: grid.spacing(),
        functions,
        grid_energies: values[..count].to_vec(),
        levels: (1..=n_max).map(|n| HydrogenicLevel::new(n, charge)).collect(),
    })
}
