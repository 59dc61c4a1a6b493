//! Frequency-domain one-particle Green functions and the Dyson equation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hartree_fock::ScfResult;
use crate::linalg::{c, eigvalsh, ensure_hermitian, max_abs, sorted_eigh, CMatrix, CVector, C64};

pub const DYSON_DAMPING: f64 = 0.5;
pub const DYSON_MAX_SWEEPS: usize = 200;
const DYSON_SWEEP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrequencyOptions {
    pub points: usize,
    /// Distance the grid extends beyond the lowest and highest level.
    pub margin: f64,
    pub eta: f64,
}

impl Default for FrequencyOptions {
    fn default() -> Self {
        Self {
            points: 2000,
            margin: 1.0,
            eta: 1e-3,
        }
    }
}

/// Real frequencies ω shifted to ω + iη.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub omegas: Vec<f64>,
    pub eta: f64,
}

impl FrequencyGrid {
    pub fn uniform(lo: f64, hi: f64, points: usize, eta: f64) -> Result<Self> {
        if points < 2 || !(hi > lo) {
            return Err(Error::invalid("frequency grid needs at least 2 points and hi > lo"));
        }
        Self::new(
            (0..points)
                .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
                .collect(),
            eta,
        )
    }

    pub fn new(omegas: Vec<f64>, eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::invalid(format!("broadening must be positive, got {eta}")));
        }
        if omegas.is_empty() || omegas.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("frequency grid must be nonempty and finite"));
        }
        Ok(Self { omegas, eta })
    }

    /// Grid spanning [min level − margin, max level + margin].
    pub fn spanning(levels: &[f64], options: &FrequencyOptions) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::invalid("no levels to span"));
        }
        let lo = levels.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = levels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::uniform(lo - options.margin, hi + options.margin, options.points, options.eta)
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// Largest gap between neighbouring frequencies.
    pub fn spacing(&self) -> f64 {
        self.omegas.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
    }

    pub fn complex(&self, index: usize) -> C64 {
        C64::new(self.omegas[index], self.eta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GreenKind {
    Free,
    Dressed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreenFunction {
    pub grid: FrequencyGrid,
    pub matrices: Vec<CMatrix>,
    pub kind: GreenKind,
    /// Frequencies where I − G⁰Σ could not be inverted; their matrices are NaN.
    pub singular: Vec<usize>,
    /// Per-frequency Dyson residual ‖G − G⁰ − G⁰ΣG‖_max (empty for free propagators).
    pub residuals: Vec<f64>,
    pub notes: Vec<String>,
    /// Scale (−ε(0))N of the source term, kept as metadata; propagators use a unit source.
    pub rhs_scale: f64,
}

impl GreenFunction {
    pub fn dim(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.nrows())
    }

    pub fn with_rhs_scale(mut self, scale: f64) -> Self {
        self.rhs_scale = scale;
        self
    }

    /// A(ω) = −Im Tr G(ω) / π.
    pub fn spectral_function(&self) -> Vec<f64> {
        self.matrices
            .iter()
            .map(|g| -g.trace().im / std::f64::consts::PI)
            .collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals
            .iter()
            .copied()
            .filter(|r| r.is_finite())
            .fold(0.0, f64::max)
    }
}

/// Turns −0.0 into +0.0 so later exact arithmetic keeps zeros bit-stable.
fn positive_zeros(m: CMatrix) -> CMatrix {
    m.map(|z| C64::new(z.re + 0.0, z.im + 0.0))
}

/// G⁰(ω) = (ω + iη − ĥ)⁻¹ through the spectral decomposition of ĥ.
pub fn free_green(hamiltonian: &CMatrix, grid: &FrequencyGrid) -> Result<GreenFunction> {
    ensure_hermitian(hamiltonian, "one-particle Hamiltonian", 1e-12)?;
    if !(grid.eta > 0.0) {
        return Err(Error::invalid("broadening must be positive"));
    }
    let (levels, vectors) = sorted_eigh(hamiltonian, None);
    let adjoint = vectors.adjoint();
    let matrices = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let z = grid.complex(i);
            let mut scaled = vectors.clone();
            for (col, &e) in levels.iter().enumerate() {
                let factor = c(1.0) / (z - c(e));
                for value in scaled.column_mut(col).iter_mut() {
                    *value *= factor;
                }
            }
            positive_zeros(&scaled * &adjoint)
        })
        .collect();
    Ok(GreenFunction {
        grid: grid.clone(),
        matrices,
        kind: GreenKind::Free,
        singular: Vec::new(),
        residuals: Vec::new(),
        notes: Vec::new(),
        rhs_scale: 1.0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelfEnergyModel {
    Zero,
    /// Frequency-independent Hermitian kernel.
    Constant(CMatrix),
    /// One kernel per grid frequency.
    Tabulated(Vec<CMatrix>),
}

impl SelfEnergyModel {
    pub fn validate(&self, dim: usize, frequencies: usize) -> Result<()> {
        let check = |m: &CMatrix| -> Result<()> {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    what: "self-energy",
                    expected: dim,
                    found: m.nrows(),
                });
            }
            ensure_hermitian(m, "self-energy", 1e-12)
        };
        match self {
            Self::Zero => Ok(()),
            Self::Constant(m) => check(m),
            Self::Tabulated(list) => {
                if list.len() != frequencies {
                    return Err(Error::DimensionMismatch {
                        what: "tabulated self-energy frequencies",
                        expected: frequencies,
                        found: list.len(),
                    });
                }
                list.iter().try_for_each(check)
            }
        }
    }

    pub fn at(&self, index: usize, dim: usize) -> CMatrix {
        match self {
            Self::Zero => CMatrix::zeros(dim, dim),
            Self::Constant(m) => m.clone(),
            Self::Tabulated(list) => list[index].clone(),
        }
    }

    /// The frequency-independent kernel, if there is one.
    pub fn static_kernel(&self, dim: usize) -> Option<CMatrix> {
        match self {
            Self::Zero => Some(CMatrix::zeros(dim, dim)),
            Self::Constant(m) => Some(m.clone()),
            Self::Tabulated(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DysonMethod {
    Direct,
    Iterative,
}

/// max |G − G⁰ − G⁰ΣG|.
pub fn dyson_residual(g0: &CMatrix, sigma: &CMatrix, g: &CMatrix) -> f64 {
    max_abs(&(g - g0 - g0 * sigma * g))
}

fn direct_solve(g0: &CMatrix, sigma: &CMatrix) -> Option<CMatrix> {
    let n = g0.nrows();
    let a = CMatrix::identity(n, n) - g0 * sigma;
    let lu = a.clone().lu();
    let mut g = lu.solve(g0)?;
    if g.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    let correction = g0 - &a * &g;
    if max_abs(&correction) > 0.0 {
        g += lu.solve(&correction)?;
    }
    Some(g)
}

fn iterative_solve(g0: &CMatrix, sigma: &CMatrix) -> Option<CMatrix> {
    let mut g = g0.clone();
    for _ in 0..DYSON_MAX_SWEEPS {
        let update = g0 + g0 * sigma * &g;
        let next = &g * c(1.0 - DYSON_DAMPING) + update * c(DYSON_DAMPING);
        let change = max_abs(&(&next - &g));
        g = next;
        if !change.is_finite() {
            return None;
        }
        if change < DYSON_SWEEP_TOL {
            return Some(g);
        }
    }
    None
}

enum Outcome {
    Solved(CMatrix, bool),
    Singular,
}

/// Solves G = G⁰ + G⁰ΣG at every frequency of `g0`.
pub fn dyson_solve(g0: &GreenFunction, sigma: &SelfEnergyModel, method: DysonMethod) -> Result<GreenFunction> {
    let dim = g0.dim();
    sigma.validate(dim, g0.grid.len())?;
    let outcomes: Vec<Outcome> = g0
        .matrices
        .par_iter()
        .enumerate()
        .map(|(i, g0i)| {
            let s = sigma.at(i, dim);
            match method {
                DysonMethod::Direct => direct_solve(g0i, &s).map_or(Outcome::Singular, |g| Outcome::Solved(g, false)),
                DysonMethod::Iterative => match iterative_solve(g0i, &s) {
                    Some(g) => Outcome::Solved(g, false),
                    None => direct_solve(g0i, &s).map_or(Outcome::Singular, |g| Outcome::Solved(g, true)),
                },
            }
        })
        .collect();

    let mut matrices = Vec::with_capacity(outcomes.len());
    let mut residuals = Vec::with_capacity(outcomes.len());
    let mut singular = Vec::new();
    let mut fallbacks = 0;
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Outcome::Solved(g, fell_back) => {
                fallbacks += usize::from(fell_back);
                residuals.push(dyson_residual(&g0.matrices[i], &sigma.at(i, dim), &g));
                matrices.push(g);
            }
            Outcome::Singular => {
                singular.push(i);
                residuals.push(f64::NAN);
                matrices.push(CMatrix::from_element(dim, dim, C64::new(f64::NAN, f64::NAN)));
            }
        }
    }
    let mut notes = Vec::new();
    if fallbacks > 0 {
        notes.push(format!(
            "iterative Dyson did not converge at {fallbacks} frequencies; used direct solve there"
        ));
    }
    if !singular.is_empty() {
        log::warn!("I - G0*Sigma singular at {} frequencies", singular.len());
        notes.push(format!("I - G0*Sigma singular at {} frequencies", singular.len()));
    }
    Ok(GreenFunction {
        grid: g0.grid.clone(),
        matrices,
        kind: GreenKind::Dressed,
        singular,
        residuals,
        notes,
        rhs_scale: g0.rhs_scale,
    })
}

/// Spectrum of ĥ + Σᶜ for a frequency-independent Hermitian Σᶜ.
pub fn dressed_eigenproblem(hamiltonian: &CMatrix, sigma: &CMatrix) -> Result<Vec<f64>> {
    ensure_hermitian(hamiltonian, "one-particle Hamiltonian", 1e-12)?;
    ensure_hermitian(sigma, "self-energy", 1e-12)?;
    if sigma.nrows() != hamiltonian.nrows() {
        return Err(Error::DimensionMismatch {
            what: "self-energy",
            expected: hamiltonian.nrows(),
            found: sigma.nrows(),
        });
    }
    Ok(eigvalsh(&(hamiltonian + sigma)))
}

/// Frequencies at local maxima of a sampled curve.
pub fn find_peaks(omegas: &[f64], values: &[f64]) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .filter(|&i| {
            let left = i == 0 || values[i] > values[i - 1];
            let right = i + 1 == n || values[i] >= values[i + 1];
            left && right && n > 1
        })
        .map(|i| omegas[i])
        .collect()
}

/// Largest distance from any level to its nearest peak.
pub fn peak_alignment(peaks: &[f64], levels: &[f64]) -> f64 {
    levels
        .iter()
        .map(|e| peaks.iter().map(|p| (p - e).abs()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// ĥ^HF restricted to the lowest `orbitals` HF orbitals, diagonal in that basis.
pub fn hf_orbital_hamiltonian(scf: &ScfResult, orbitals: usize) -> Result<CMatrix> {
    if orbitals == 0 || orbitals > scf.eigenvalues.len() {
        return Err(Error::invalid(format!(
            "orbital count must be in 1..={}, got {orbitals}",
            scf.eigenvalues.len()
        )));
    }
    let diagonal = CVector::from_iterator(orbitals, scf.eigenvalues[..orbitals].iter().map(|&e| c(e)));
    Ok(CMatrix::from_diagonal(&diagonal))
}
