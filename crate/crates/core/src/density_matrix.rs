//! Reduced density matrices with the energy functionals built on them, plus
//! pure-state projectors.
//!
//! A [`DensityMatrix`] of order `n` lives on a finite spin-orbital basis. Because
//! ρₙ is antisymmetric in each group of arguments, only sorted `n`-subsets of
//! spin-orbitals are stored; [`DensityMatrix::element`] restores the value for any
//! ordered tuple (with its permutation sign) and [`DensityMatrix::trace`] returns
//! the trace over ordered tuples, normalized to `N!/(N-n)!`.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, factorial, hermitian_deviation, CMatrix, CVector, C64};

/// Largest subset count a density matrix is allowed to index.
pub const MAX_TUPLES: usize = 6000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn index(self) -> usize {
        match self {
            Spin::Up => 0,
            Spin::Down => 1,
        }
    }
}

/// Orthonormal spin-orbitals sampled on a grid.
///
/// Spatial parts are stored as discrete-orthonormal coefficient columns
/// (`Σᵢ |cᵢ|² = 1`); the sampled function values are `c / sqrt(spacing)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinOrbitalBasis {
    spatial: CMatrix,
    spacing: f64,
    orbitals: Vec<(usize, Spin)>,
}

impl SpinOrbitalBasis {
    pub fn new(spatial: CMatrix, spacing: f64, orbitals: Vec<(usize, Spin)>) -> Result<Self> {
        if orbitals.len() > 128 {
            return Err(Error::invalid("at most 128 spin-orbitals are supported"));
        }
        if let Some(&(m, _)) = orbitals.iter().find(|(m, _)| *m >= spatial.ncols()) {
            return Err(Error::invalid(format!(
                "spin-orbital refers to missing spatial orbital {m}"
            )));
        }
        Ok(Self {
            spatial,
            spacing,
            orbitals,
        })
    }

    /// Spin-orbital `2m + s` is spatial orbital `m` with spin `s` (up first).
    pub fn interleaved(spatial: CMatrix, spacing: f64) -> Result<Self> {
        let orbitals = (0..spatial.ncols())
            .flat_map(|m| [(m, Spin::Up), (m, Spin::Down)])
            .collect();
        Self::new(spatial, spacing, orbitals)
    }

    /// Every grid point as a spatial orbital, both spins.
    pub fn grid(points: usize, spacing: f64) -> Result<Self> {
        Self::interleaved(CMatrix::identity(points, points), spacing)
    }

    pub fn len(&self) -> usize {
        self.orbitals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orbitals.is_empty()
    }

    pub fn grid_points(&self) -> usize {
        self.spatial.nrows()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn spatial_coefficients(&self) -> &CMatrix {
        &self.spatial
    }

    pub fn orbitals(&self) -> &[(usize, Spin)] {
        &self.orbitals
    }

    pub fn spin(&self, p: usize) -> Spin {
        self.orbitals[p].1
    }

    /// Sampled value of spin-orbital `p`'s spatial part at grid point `i`.
    pub fn value(&self, p: usize, i: usize) -> C64 {
        self.spatial[(i, self.orbitals[p].0)] / self.spacing.sqrt()
    }

    pub fn subset(&self, keep: &[usize]) -> Result<Self> {
        let orbitals = keep
            .iter()
            .map(|&p| {
                self.orbitals
                    .get(p)
                    .copied()
                    .ok_or_else(|| Error::invalid(format!("spin-orbital {p} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.spatial.clone(), self.spacing, orbitals)
    }
}

/// All sorted `n`-subsets of `0..d` as bitmasks, lexicographic in their element lists.
pub(crate) fn subsets(d: usize, n: usize) -> Vec<u128> {
    fn rec(start: usize, d: usize, left: usize, acc: u128, out: &mut Vec<u128>) {
        if left == 0 {
            out.push(acc);
            return;
        }
        for p in start..=d - left {
            rec(p + 1, d, left - 1, acc | (1u128 << p), out);
        }
    }
    let mut out = Vec::new();
    if n <= d {
        rec(0, d, n, 0, &mut out);
    }
    out
}

pub(crate) fn bits(mask: u128) -> Vec<usize> {
    (0..128).filter(|&p| mask >> p & 1 == 1).collect()
}

/// Sign of the permutation sorting the concatenation (elements of `first`, then `second`).
pub(crate) fn merge_sign(first: u128, second: u128) -> f64 {
    let mut inversions = 0u32;
    for b in bits(second) {
        let above = if b >= 127 { 0 } else { first >> (b + 1) };
        inversions += above.count_ones();
    }
    if inversions.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Sign of the permutation sorting `tuple`, or `None` when it repeats an index.
fn tuple_sign(tuple: &[usize]) -> Option<(u128, f64)> {
    let mut mask = 0u128;
    let mut inversions = 0;
    for (a, &p) in tuple.iter().enumerate() {
        if p >= 128 || mask >> p & 1 == 1 {
            return None;
        }
        mask |= 1u128 << p;
        inversions += tuple[a + 1..].iter().filter(|&&q| q < p).count();
    }
    Some((mask, if inversions % 2 == 0 { 1.0 } else { -1.0 }))
}

#[derive(Debug, Clone)]
pub struct DensityMatrix {
    order: usize,
    electrons: usize,
    basis: SpinOrbitalBasis,
    tuples: Vec<u128>,
    index: HashMap<u128, usize>,
    matrix: CMatrix,
}

impl DensityMatrix {
    fn empty(basis: SpinOrbitalBasis, order: usize, electrons: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("density matrix order must be at least 1"));
        }
        let tuples = subsets(basis.len(), order);
        if tuples.len() > MAX_TUPLES {
            return Err(Error::invalid(format!(
                "order-{order} density matrix over {} spin-orbitals needs {} tuples (limit {MAX_TUPLES})",
                basis.len(),
                tuples.len()
            )));
        }
        let index = tuples.iter().enumerate().map(|(i, &t)| (t, i)).collect();
        let dim = tuples.len();
        Ok(Self {
            order,
            electrons,
            basis,
            tuples,
            index,
            matrix: CMatrix::zeros(dim, dim),
        })
    }

    /// Reduced matrix of an `N`-electron state given as determinant amplitudes
    /// (bitmasks over the basis). The sum over the remaining `N - n` labels is
    /// carried out directly; amplitudes must be normalized by the caller.
    pub fn from_determinants(
        basis: SpinOrbitalBasis,
        electrons: usize,
        determinants: &[(u128, C64)],
        order: usize,
    ) -> Result<Self> {
        if order == 0 || order > electrons {
            return Err(Error::invalid(format!("order {order} out of range 1..={electrons}")));
        }
        let mut rho = Self::empty(basis, order, electrons)?;
        let mut groups: BTreeMap<u128, Vec<(usize, C64)>> = BTreeMap::new();
        for &(det, amp) in determinants {
            if det.count_ones() as usize != electrons {
                return Err(Error::invalid("determinant with wrong electron count"));
            }
            let occ = bits(det);
            if occ.last().is_some_and(|&p| p >= rho.basis.len()) {
                return Err(Error::invalid("determinant refers to a spin-orbital outside the basis"));
            }
            for picked in subsets(occ.len(), order) {
                let tuple: u128 = bits(picked).iter().fold(0, |m, &a| m | 1u128 << occ[a]);
                let rest = det ^ tuple;
                let sign = merge_sign(tuple, rest);
                groups.entry(rest).or_default().push((rho.index[&tuple], amp * sign));
            }
        }
        for members in groups.values() {
            for &(i, a) in members {
                for &(j, b) in members {
                    rho.matrix[(i, j)] += a * b.conj();
                }
            }
        }
        Ok(rho)
    }

    /// Reduced matrix of the single determinant occupying every spin-orbital of `basis`.
    /// For `order > N` the result has no tuples and zero trace.
    pub fn of_determinant(basis: SpinOrbitalBasis, order: usize) -> Result<Self> {
        let electrons = basis.len();
        if order > electrons {
            return Self::empty(basis, order, electrons);
        }
        let det = (0..electrons).fold(0u128, |m, p| m | 1u128 << p);
        Self::from_determinants(basis, electrons, &[(det, c(1.0))], order)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn electrons(&self) -> usize {
        self.electrons
    }

    pub fn basis(&self) -> &SpinOrbitalBasis {
        &self.basis
    }

    /// Sorted spin-orbital subsets labelling the rows/columns of [`Self::matrix`].
    pub fn tuples(&self) -> &[u128] {
        &self.tuples
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `N!/(N-n)!`, or 0 when `n > N`.
    pub fn normalization_target(&self) -> f64 {
        if self.order > self.electrons {
            0.0
        } else {
            factorial(self.electrons) / factorial(self.electrons - self.order)
        }
    }

    /// Trace over ordered `n`-tuples.
    pub fn trace(&self) -> f64 {
        factorial(self.order) * self.matrix.diagonal().iter().map(|z| z.re).sum::<f64>()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        hermitian_deviation(&self.matrix)
    }

    /// ρₙ(p′₁…p′ₙ; p₁…pₙ) for ordered spin-orbital tuples.
    pub fn element(&self, primed: &[usize], unprimed: &[usize]) -> C64 {
        assert_eq!(primed.len(), self.order);
        assert_eq!(unprimed.len(), self.order);
        match (tuple_sign(primed), tuple_sign(unprimed)) {
            (Some((a, sa)), Some((b, sb))) => match (self.index.get(&a), self.index.get(&b)) {
                (Some(&i), Some(&j)) => self.matrix[(i, j)] * (sa * sb),
                _ => C64::default(),
            },
            _ => C64::default(),
        }
    }

    /// Σ_q ρₙ(I′ q; I q) over the last argument pair, indexed by the sorted
    /// `(n-1)`-subsets of the same basis. Equals `(N - n + 1) ρₙ₋₁`.
    pub fn partial_trace(&self) -> Result<CMatrix> {
        if self.order < 2 {
            return Err(Error::invalid("partial trace needs order >= 2"));
        }
        let lower = subsets(self.basis.len(), self.order - 1);
        let lower_index: HashMap<u128, usize> = lower.iter().enumerate().map(|(i, &t)| (t, i)).collect();
        let mut out = CMatrix::zeros(lower.len(), lower.len());
        for (a, &ta) in self.tuples.iter().enumerate() {
            for q in bits(ta) {
                let ra = ta ^ (1u128 << q);
                let sa = merge_sign(ra, 1u128 << q);
                for (b, &tb) in self.tuples.iter().enumerate() {
                    if tb >> q & 1 == 0 {
                        continue;
                    }
                    let rb = tb ^ (1u128 << q);
                    let sb = merge_sign(rb, 1u128 << q);
                    out[(lower_index[&ra], lower_index[&rb])] += self.matrix[(a, b)] * (sa * sb);
                }
            }
        }
        Ok(out)
    }

    /// Eigenvalues of an order-1 matrix (natural occupation numbers), descending.
    pub fn occupation_numbers(&self) -> Result<Vec<f64>> {
        if self.order != 1 {
            return Err(Error::invalid("occupation numbers need an order-1 matrix"));
        }
        let mut occ: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        occ.sort_by(|a, b| b.total_cmp(a));
        Ok(occ)
    }

    /// ρ₁(r′σ; rσ) on the grid for one spin, as sampled values (row = r′).
    pub fn grid_one_body_spin(&self, spin: Spin) -> Result<CMatrix> {
        if self.order != 1 {
            return Err(Error::invalid("grid one-body matrix needs order 1"));
        }
        let g = self.basis.grid_points();
        let mut rho = CMatrix::zeros(g, g);
        let members: Vec<usize> = (0..self.basis.len()).filter(|&p| self.basis.spin(p) == spin).collect();
        for &pp in &members {
            for &p in &members {
                let d = self.matrix[(pp, p)];
                if d == C64::default() {
                    continue;
                }
                for i in 0..g {
                    let left = d * self.basis.value(pp, i);
                    for j in 0..g {
                        rho[(i, j)] += left * self.basis.value(p, j).conj();
                    }
                }
            }
        }
        Ok(rho)
    }

    /// Spin-summed ρ₁(r′; r) on the grid.
    pub fn grid_one_body(&self) -> Result<CMatrix> {
        Ok(self.grid_one_body_spin(Spin::Up)? + self.grid_one_body_spin(Spin::Down)?)
    }

    /// Spin-summed diagonal pair density P(r₁, r₂) = Σ_{σ₁σ₂} ρ₂(x₁x₂; x₁x₂) on the grid.
    pub fn grid_pair_density(&self) -> Result<DMatrix<f64>> {
        if self.order != 2 {
            return Err(Error::invalid("pair density needs an order-2 matrix"));
        }
        let g = self.basis.grid_points();
        let mut pair = DMatrix::<f64>::zeros(g, g);
        if self.tuples.is_empty() {
            return Ok(pair);
        }
        let pairs: Vec<(usize, usize)> = self
            .tuples
            .iter()
            .map(|&t| {
                let b = bits(t);
                (b[0], b[1])
            })
            .collect();
        for s1 in [Spin::Up, Spin::Down] {
            for s2 in [Spin::Up, Spin::Down] {
                // antisymmetric pair functions A_ab(r₁s₁, r₂s₂), one row per tuple
                let mut amp = CMatrix::zeros(pairs.len(), g * g);
                for (row, &(a, b)) in pairs.iter().enumerate() {
                    let direct = self.basis.spin(a) == s1 && self.basis.spin(b) == s2;
                    let swapped = self.basis.spin(b) == s1 && self.basis.spin(a) == s2;
                    if !direct && !swapped {
                        continue;
                    }
                    for i in 0..g {
                        for j in 0..g {
                            let mut value = C64::default();
                            if direct {
                                value += self.basis.value(a, i) * self.basis.value(b, j);
                            }
                            if swapped {
                                value -= self.basis.value(b, i) * self.basis.value(a, j);
                            }
                            amp[(row, i * g + j)] = value;
                        }
                    }
                }
                let weighted = &self.matrix * amp.conjugate();
                for i in 0..g {
                    for j in 0..g {
                        let col = i * g + j;
                        let mut sum = C64::default();
                        for row in 0..pairs.len() {
                            sum += amp[(row, col)] * weighted[(row, col)];
                        }
                        pair[(i, j)] += sum.re;
                    }
                }
            }
        }
        Ok(pair)
    }

    /// Whether ρ₂ equals the antisymmetrized product ρ₁ ∧ ρ₁ within `tol`.
    pub fn is_factorized_by(&self, rho1: &DensityMatrix, tol: f64) -> bool {
        if self.order != 2 || rho1.order != 1 || self.basis != rho1.basis {
            return false;
        }
        for (a, &ta) in self.tuples.iter().enumerate() {
            let pa = bits(ta);
            for (b, &tb) in self.tuples.iter().enumerate() {
                let pb = bits(tb);
                let d1 = |x: usize, y: usize| rho1.matrix[(x, y)];
                let wedge = d1(pa[0], pb[0]) * d1(pa[1], pb[1]) - d1(pa[0], pb[1]) * d1(pa[1], pb[0]);
                if (wedge - self.matrix[(a, b)]).norm() > tol {
                    return false;
                }
            }
        }
        true
    }
}

fn check_grid_operands(
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
    h_matrix: &CMatrix,
    v_kernel: &DMatrix<f64>,
) -> Result<usize> {
    if rho1.order != 1 {
        return Err(Error::invalid("first density matrix must have order 1"));
    }
    if rho2.order != 2 {
        return Err(Error::invalid("second density matrix must have order 2"));
    }
    if rho1.electrons != rho2.electrons {
        return Err(Error::DimensionMismatch {
            what: "electron count of rho1/rho2",
            expected: rho1.electrons,
            found: rho2.electrons,
        });
    }
    let g = rho1.basis.grid_points();
    for (what, found) in [
        ("rho2 grid", rho2.basis.grid_points()),
        ("one-body operator", h_matrix.nrows()),
        ("one-body operator", h_matrix.ncols()),
        ("two-body kernel", v_kernel.nrows()),
        ("two-body kernel", v_kernel.ncols()),
    ] {
        if found != g {
            return Err(Error::DimensionMismatch {
                what,
                expected: g,
                found,
            });
        }
    }
    Ok(g)
}

/// Sp ĥρ₁ with the one-body operator acting on sampled grid values.
pub fn one_body_energy(rho1: &DensityMatrix, h_matrix: &CMatrix) -> Result<f64> {
    let rho = rho1.grid_one_body()?;
    if h_matrix.nrows() != rho.nrows() || !h_matrix.is_square() {
        return Err(Error::DimensionMismatch {
            what: "one-body operator",
            expected: rho.nrows(),
            found: h_matrix.nrows(),
        });
    }
    let w = rho1.basis.spacing();
    Ok((h_matrix * &rho).trace().re * w)
}

/// ½ Sp v ρ₂ for a local two-body kernel v(r₁, r₂).
pub fn two_body_energy(rho2: &DensityMatrix, v_kernel: &DMatrix<f64>) -> Result<f64> {
    let pair = rho2.grid_pair_density()?;
    if v_kernel.shape() != pair.shape() {
        return Err(Error::DimensionMismatch {
            what: "two-body kernel",
            expected: pair.nrows(),
            found: v_kernel.nrows(),
        });
    }
    let w = rho2.basis.spacing();
    Ok(0.5 * v_kernel.component_mul(&pair).sum() * w * w)
}

/// E = Sp ĥρ₁ + ½ Sp v ρ₂ with traces over the diagonal grid arguments.
pub fn energy_from_density_matrices(
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
    h_matrix: &CMatrix,
    v_kernel: &DMatrix<f64>,
) -> Result<f64> {
    check_grid_operands(rho1, rho2, h_matrix, v_kernel)?;
    Ok(one_body_energy(rho1, h_matrix)? + two_body_energy(rho2, v_kernel)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HfSplit {
    /// ε⁽⁰⁾N = Sp ĥρ₁.
    pub one_electron: f64,
    /// E^HF = ½ Sp v ρ₂.
    pub excitation: f64,
}

impl HfSplit {
    pub fn total(&self) -> f64 {
        self.one_electron + self.excitation
    }
}

/// Splits the energy of a single-determinant state into ε⁽⁰⁾N and E^HF.
pub fn hf_decomposition(
    rho1: &DensityMatrix,
    rho2_hf: &DensityMatrix,
    h_matrix: &CMatrix,
    v_kernel: &DMatrix<f64>,
) -> Result<HfSplit> {
    check_grid_operands(rho1, rho2_hf, h_matrix, v_kernel)?;
    if !rho2_hf.is_factorized_by(rho1, 1e-10) {
        return Err(Error::Unsupported(
            "two-body matrix is not the antisymmetrized product of the one-body matrix".into(),
        ));
    }
    Ok(HfSplit {
        one_electron: one_body_energy(rho1, h_matrix)?,
        excitation: two_body_energy(rho2_hf, v_kernel)?,
    })
}

/// |m; k′⟩⟨n; k| over an orbital (grid coefficient) basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    pub bra_band: usize,
    pub ket_band: usize,
    pub bra_momentum: f64,
    pub ket_momentum: f64,
    pub spin: Spin,
    ket: CVector,
    bra: CVector,
    matrix: CMatrix,
}

impl Projector {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ket_band: usize,
        ket_momentum: f64,
        ket: CVector,
        bra_band: usize,
        bra_momentum: f64,
        bra: CVector,
        spin: Spin,
    ) -> Result<Self> {
        if ket.len() != bra.len() {
            return Err(Error::DimensionMismatch {
                what: "projector bra/ket",
                expected: ket.len(),
                found: bra.len(),
            });
        }
        let matrix = &ket * bra.adjoint();
        Ok(Self {
            bra_band,
            ket_band,
            bra_momentum,
            ket_momentum,
            spin,
            ket,
            bra,
            matrix,
        })
    }

    /// |n; k⟩⟨n; k|.
    pub fn band(band: usize, momentum: f64, state: CVector, spin: Spin) -> Self {
        let matrix = &state * state.adjoint();
        Self {
            bra_band: band,
            ket_band: band,
            bra_momentum: momentum,
            ket_momentum: momentum,
            spin,
            bra: state.clone(),
            ket: state,
            matrix,
        }
    }

    pub fn ket(&self) -> &CVector {
        &self.ket
    }

    pub fn bra(&self) -> &CVector {
        &self.bra
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.ket.len()
    }

    pub fn is_diagonal(&self) -> bool {
        self.bra_band == self.ket_band && self.bra_momentum == self.ket_momentum
    }

    /// Sp(ρ̂ A) = ⟨bra|A|ket⟩.
    pub fn trace_with(&self, operator: &CMatrix) -> C64 {
        self.bra.dotc(&(operator * &self.ket))
    }

    pub fn trace(&self) -> C64 {
        self.bra.dotc(&self.ket)
    }
}

/// ρ = |ψ⟩⟨ψ| for a normalized state vector.
pub fn pure_state_projector(state: &CVector) -> Result<Projector> {
    let norm = state.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { norm });
    }
    Ok(Projector::band(0, 0.0, state.clone(), Spin::Up))
}

/// One-body part and mean-field interaction at one crystal momentum.
#[derive(Debug, Clone)]
pub struct KOperator {
    pub momentum: f64,
    pub one_body: CMatrix,
    pub interaction: CMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceIdentityReport {
    /// Sp ρ̂(ĥ + v).
    pub lhs: f64,
    /// ε = ∫dk Σₙ ⟨n;k|n;k⟩ εₙ(k).
    pub quasiparticle_energy: f64,
    /// εₙ(0) N + ε.
    pub rhs: f64,
    pub residual: f64,
}

/// Compares Sp ρ̂(ĥ + v) with εₙ(0)N + ε.
///
/// The k-integral is the normalized average over `kgrid` (weight `1/len`), so that
/// ∫dk ⟨n;k|n;k⟩ = 1 for unit band vectors. `dispersion[n][j]` is εₙ(k_j), the band
/// energy measured from `epsilon0`. Every projector must be band- and
/// momentum-diagonal, and an operator must exist for its momentum.
pub fn trace_energy_identity(
    projectors: &[Projector],
    operators: &[KOperator],
    kgrid: &[f64],
    dispersion: &[Vec<f64>],
    epsilon0: f64,
    electrons: usize,
) -> Result<TraceIdentityReport> {
    if kgrid.is_empty() {
        return Err(Error::invalid("k-grid is empty"));
    }
    let weight = 1.0 / kgrid.len() as f64;
    let k_index = |k: f64| -> Result<usize> {
        kgrid
            .iter()
            .position(|&q| (q - k).abs() <= 1e-12 * (1.0 + k.abs()))
            .ok_or_else(|| Error::invalid(format!("momentum {k} is not on the k-grid")))
    };
    let mut lhs = 0.0;
    let mut epsilon = 0.0;
    for p in projectors {
        if !p.is_diagonal() {
            return Err(Error::invalid("trace identity needs band-diagonal projectors"));
        }
        let op = operators
            .iter()
            .find(|o| (o.momentum - p.ket_momentum).abs() <= 1e-12 * (1.0 + o.momentum.abs()))
            .ok_or_else(|| Error::invalid(format!("no operator at momentum {}", p.ket_momentum)))?;
        for m in [&op.one_body, &op.interaction] {
            if m.nrows() != p.dim() || m.ncols() != p.dim() {
                return Err(Error::DimensionMismatch {
                    what: "projector/operator",
                    expected: p.dim(),
                    found: m.nrows(),
                });
            }
        }
        let j = k_index(p.ket_momentum)?;
        let band = dispersion
            .get(p.ket_band)
            .ok_or_else(|| Error::invalid(format!("no dispersion for band {}", p.ket_band)))?;
        if band.len() != kgrid.len() {
            return Err(Error::DimensionMismatch {
                what: "dispersion samples",
                expected: kgrid.len(),
                found: band.len(),
            });
        }
        lhs += weight * (p.trace_with(&op.one_body) + p.trace_with(&op.interaction)).re;
        epsilon += weight * p.trace().re * band[j];
    }
    let rhs = epsilon0 * electrons as f64 + epsilon;
    Ok(TraceIdentityReport {
        lhs,
        quasiparticle_energy: epsilon,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    fn random_state(dim: usize, seed: u64) -> CVector {
        // small deterministic LCG, enough for fixtures here
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let v = CVector::from_fn(dim, |_, _| C64::new(next(), next()));
        let n = v.norm();
        v / c(n)
    }

    #[test]
    fn axis_projector() {
        let mut e0 = CVector::zeros(3);
        e0[0] = c(1.0);
        let p = pure_state_projector(&e0).unwrap();
        let mut expected = CMatrix::zeros(3, 3);
        expected[(0, 0)] = c(1.0);
        assert_eq!(p.matrix(), &expected);
    }

    #[test]
    fn equal_superposition_projector() {
        let s = 0.5f64.sqrt();
        let v = CVector::from_vec(vec![c(s), c(s)]);
        let p = pure_state_projector(&v).unwrap();
        for z in p.matrix().iter() {
            assert!((z - c(0.5)).norm() < 1e-15);
        }
    }

    #[test]
    fn random_projector_is_idempotent() {
        let v = random_state(7, 3);
        let p = pure_state_projector(&v).unwrap();
        let m = p.matrix();
        assert!((m.trace() - c(1.0)).norm() < 1e-12);
        assert!(max_abs(&(m * m - m)) < 1e-12);
        assert!(hermitian_deviation(m) < 1e-15);
    }

    #[test]
    fn rejects_unnormalized_state() {
        let v = CVector::from_vec(vec![c(1.0), c(1.0)]);
        assert!(matches!(pure_state_projector(&v), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn off_diagonal_projector_squares_to_zero() {
        let a = CVector::from_vec(vec![c(1.0), c(0.0), c(0.0)]);
        let b = CVector::from_vec(vec![c(0.0), C64::new(0.0, 1.0), c(0.0)]);
        let p = Projector::new(1, 0.2, b, 0, 0.1, a, Spin::Up).unwrap();
        let m = p.matrix();
        assert!(max_abs(&(m * m)) <= 1e-10);
        assert!(max_abs(&(m - p.ket() * p.bra().adjoint())) <= 1e-14);
    }

    #[test]
    fn merge_sign_counts_inversions() {
        // (1, 3) followed by (0, 2): sorting needs 3 transpositions
        assert_eq!(merge_sign(0b1010, 0b0101), -1.0);
        assert_eq!(merge_sign(0b0011, 0b1100), 1.0);
        assert_eq!(tuple_sign(&[2, 0, 1]).unwrap().1, 1.0);
        assert_eq!(tuple_sign(&[1, 0]).unwrap().1, -1.0);
        assert!(tuple_sign(&[1, 1]).is_none());
    }

    fn two_orbital_basis() -> SpinOrbitalBasis {
        // two orthonormal grid functions on 8 points
        let g = 8;
        let h = 0.5;
        let mut spatial = CMatrix::zeros(g, 2);
        for i in 0..g {
            spatial[(i, 0)] = c(1.0 / (g as f64).sqrt());
            spatial[(i, 1)] = c(if i < g / 2 { 1.0 } else { -1.0 } / (g as f64).sqrt());
        }
        SpinOrbitalBasis::interleaved(spatial, h).unwrap()
    }

    #[test]
    fn determinant_traces_and_hermiticity() {
        let basis = two_orbital_basis();
        for n_el in 1..=4 {
            let occ = basis.subset(&(0..n_el).collect::<Vec<_>>()).unwrap();
            for order in 1..=n_el {
                let rho = DensityMatrix::of_determinant(occ.clone(), order).unwrap();
                assert!((rho.trace() - rho.normalization_target()).abs() < 1e-12);
                assert!(rho.hermitian_deviation() < 1e-15);
            }
        }
    }

    #[test]
    fn order_beyond_particle_count_is_empty() {
        let basis = two_orbital_basis().subset(&[0]).unwrap();
        let rho2 = DensityMatrix::of_determinant(basis, 2).unwrap();
        assert!(rho2.tuples().is_empty());
        assert_eq!(rho2.trace(), 0.0);
        assert_eq!(rho2.normalization_target(), 0.0);
    }

    #[test]
    fn from_determinants_rejects_bad_order() {
        let basis = two_orbital_basis();
        assert!(DensityMatrix::from_determinants(basis.clone(), 2, &[(0b11, c(1.0))], 3).is_err());
        assert!(DensityMatrix::from_determinants(basis, 2, &[(0b11, c(1.0))], 0).is_err());
    }

    #[test]
    fn spin_zero_density_matches_closed_shell_matrix() {
        let basis = two_orbital_basis();
        let occ = basis.subset(&[0, 1, 2, 3]).unwrap();
        let rho1 = DensityMatrix::of_determinant(occ, 1).unwrap();
        let up = rho1.grid_one_body_spin(Spin::Up).unwrap();
        let g = basis.grid_points();
        let h = basis.spacing();
        let spatial = basis.spatial_coefficients();
        for i in 0..g {
            for j in 0..g {
                let direct: C64 = (0..2).map(|m| spatial[(i, m)] * spatial[(j, m)].conj() / c(h)).sum();
                assert!((up[(i, j)] - direct).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn noninteracting_pair_energy() {
        let basis = two_orbital_basis();
        let occ = basis.subset(&[0, 1]).unwrap();
        let rho1 = DensityMatrix::of_determinant(occ.clone(), 1).unwrap();
        let rho2 = DensityMatrix::of_determinant(occ, 2).unwrap();
        // operator with orbital 0 as eigenvector, eigenvalue e0 = -0.7
        let g = basis.grid_points();
        let phi = basis.spatial_coefficients().column(0).into_owned();
        let h_op = &phi * phi.adjoint() * c(-0.7);
        let v = DMatrix::<f64>::zeros(g, g);
        let e = energy_from_density_matrices(&rho1, &rho2, &h_op, &v).unwrap();
        assert!((e + 1.4).abs() < 1e-12);
        let split = hf_decomposition(&rho1, &rho2, &h_op, &v).unwrap();
        assert_eq!(split.excitation, 0.0);
    }

    #[test]
    fn single_electron_has_no_excitation_term() {
        let basis = two_orbital_basis();
        let occ = basis.subset(&[0]).unwrap();
        let rho1 = DensityMatrix::of_determinant(occ.clone(), 1).unwrap();
        let rho2 = DensityMatrix::of_determinant(occ, 2).unwrap();
        let g = basis.grid_points();
        let v = DMatrix::from_element(g, g, 1.0);
        let h_op = CMatrix::identity(g, g);
        let split = hf_decomposition(&rho1, &rho2, &h_op, &v).unwrap();
        assert_eq!(split.excitation, 0.0);
        assert!((split.one_electron - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlated_state_is_not_factorized() {
        let basis = two_orbital_basis();
        let s = 0.5f64.sqrt();
        // (|0↑0↓⟩ + |1↑1↓⟩)/√2
        let dets = [(0b0011u128, c(s)), (0b1100u128, c(s))];
        let rho1 = DensityMatrix::from_determinants(basis.clone(), 2, &dets, 1).unwrap();
        let rho2 = DensityMatrix::from_determinants(basis.clone(), 2, &dets, 2).unwrap();
        let g = basis.grid_points();
        let err = hf_decomposition(&rho1, &rho2, &CMatrix::identity(g, g), &DMatrix::zeros(g, g));
        assert!(matches!(err, Err(Error::Unsupported(_))));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let basis = two_orbital_basis();
        let occ = basis.subset(&[0, 1]).unwrap();
        let rho1 = DensityMatrix::of_determinant(occ.clone(), 1).unwrap();
        let rho2 = DensityMatrix::of_determinant(occ, 2).unwrap();
        let r = energy_from_density_matrices(&rho1, &rho2, &CMatrix::identity(5, 5), &DMatrix::zeros(8, 8));
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
        let r = energy_from_density_matrices(&rho2, &rho1, &CMatrix::identity(8, 8), &DMatrix::zeros(8, 8));
        assert!(r.is_err());
    }

    #[test]
    fn trace_identity_single_orbital_without_interaction() {
        let e = -0.37;
        let state = CVector::from_vec(vec![c(0.6), C64::new(0.0, 0.8)]);
        let h_op = &state * state.adjoint() * c(e);
        let p = Projector::band(0, 0.0, state, Spin::Up);
        let op = KOperator {
            momentum: 0.0,
            one_body: h_op,
            interaction: CMatrix::zeros(2, 2),
        };
        let eps0 = -0.1;
        let report = trace_energy_identity(&[p], &[op], &[0.0], &[vec![e - eps0]], eps0, 1).unwrap();
        assert!(report.residual < 1e-15);
    }

    #[test]
    fn trace_identity_rejects_mismatch() {
        let p = Projector::band(0, 0.0, CVector::from_vec(vec![c(1.0), c(0.0)]), Spin::Up);
        let op = KOperator {
            momentum: 0.0,
            one_body: CMatrix::zeros(3, 3),
            interaction: CMatrix::zeros(3, 3),
        };
        assert!(trace_energy_identity(&[p], &[op], &[0.0], &[vec![0.0]], 0.0, 1).is_err());
    }
}
