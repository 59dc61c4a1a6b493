//! Full configuration interaction for a handful of electrons.
//!
//! The one-particle basis is the lowest `orbital_cutoff` eigenvectors of the
//! one-body operator, each carrying both spins. Determinants are bitmasks over
//! spin-orbitals `2m + s`; the Hamiltonian is assembled with Slater–Condon rules
//! and diagonalized densely.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::density_matrix::{bits, subsets, DensityMatrix, Spin, SpinOrbitalBasis};
use crate::error::{Error, Result};
use crate::linalg::{c, sorted_eigh_real, C64};
use crate::model_system::ModelSystem;

pub const MAX_ELECTRONS: usize = 4;
pub const MAX_CONFIGURATIONS: usize = 20_000;

/// Antisymmetric N-electron state expanded in determinants of a spin-orbital basis.
#[derive(Debug, Clone)]
pub struct NBodyWavefunction {
    electrons: usize,
    basis: SpinOrbitalBasis,
    determinants: Vec<u128>,
    amplitudes: Vec<C64>,
}

impl NBodyWavefunction {
    pub fn new(
        electrons: usize,
        basis: SpinOrbitalBasis,
        determinants: Vec<u128>,
        amplitudes: Vec<C64>,
    ) -> Result<Self> {
        if determinants.len() != amplitudes.len() {
            return Err(Error::DimensionMismatch {
                what: "determinant amplitudes",
                expected: determinants.len(),
                found: amplitudes.len(),
            });
        }
        if determinants.iter().any(|d| d.count_ones() as usize != electrons) {
            return Err(Error::invalid("determinant with wrong electron count"));
        }
        Ok(Self {
            electrons,
            basis,
            determinants,
            amplitudes,
        })
    }

    pub fn electrons(&self) -> usize {
        self.electrons
    }

    pub fn basis(&self) -> &SpinOrbitalBasis {
        &self.basis
    }

    pub fn determinants(&self) -> &[u128] {
        &self.determinants
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn spin_labels(&self) -> Vec<Spin> {
        self.basis.orbitals().iter().map(|&(_, s)| s).collect()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Coefficient of the ordered spin-orbital tuple: the sorted determinant's
    /// amplitude times the sign of the sorting permutation, zero when an index repeats.
    pub fn amplitude(&self, tuple: &[usize]) -> C64 {
        assert_eq!(tuple.len(), self.electrons);
        let mut mask = 0u128;
        let mut inversions = 0;
        for (a, &p) in tuple.iter().enumerate() {
            if mask >> p & 1 == 1 {
                return C64::default();
            }
            mask |= 1u128 << p;
            inversions += tuple[a + 1..].iter().filter(|&&q| q < p).count();
        }
        let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
        self.determinants
            .iter()
            .position(|&d| d == mask)
            .map_or(C64::default(), |i| self.amplitudes[i] * sign)
    }

    pub(crate) fn pairs(&self) -> Vec<(u128, C64)> {
        self.determinants
            .iter()
            .copied()
            .zip(self.amplitudes.iter().copied())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CiOptions {
    pub orbital_cutoff: usize,
    /// Restrict to determinants with this many spin-up electrons.
    pub spin_up: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct CiSolution {
    pub energy: f64,
    pub state: NBodyWavefunction,
    /// Eigenvalues of the one-body operator for the retained orbitals.
    pub orbital_energies: Vec<f64>,
    pub dimension: usize,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Occupied spin-orbitals below `p`, as the fermionic sign of acting at `p`.
fn phase(mask: u128, p: usize) -> f64 {
    let below = if p == 0 { 0 } else { mask & ((1u128 << p) - 1) };
    if below.count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

struct Integrals {
    one_body: DMatrix<f64>,
    eri: Vec<f64>,
    spatial: usize,
}

impl Integrals {
    fn chem(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        let m = self.spatial;
        self.eri[((p * m + q) * m + r) * m + s]
    }

    /// ⟨pq||rs⟩ over spin-orbitals 2m + s.
    fn antisym(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        let direct = if p % 2 == r % 2 && q % 2 == s % 2 {
            self.chem(p / 2, r / 2, q / 2, s / 2)
        } else {
            0.0
        };
        let exchange = if p % 2 == s % 2 && q % 2 == r % 2 {
            self.chem(p / 2, s / 2, q / 2, r / 2)
        } else {
            0.0
        };
        direct - exchange
    }

    fn h(&self, p: usize, q: usize) -> f64 {
        if p % 2 == q % 2 {
            self.one_body[(p / 2, q / 2)]
        } else {
            0.0
        }
    }

    fn element(&self, bra: u128, ket: u128) -> f64 {
        let diff = bra ^ ket;
        match diff.count_ones() {
            0 => {
                let occ = bits(ket);
                let mut e = 0.0;
                for (a, &p) in occ.iter().enumerate() {
                    e += self.h(p, p);
                    for &q in &occ[a + 1..] {
                        e += self.antisym(p, q, p, q);
                    }
                }
                e
            }
            2 => {
                let a = (bra & diff).trailing_zeros() as usize;
                let r = (ket & diff).trailing_zeros() as usize;
                let mut sign = phase(ket, r);
                let mid = ket ^ (1u128 << r);
                sign *= phase(mid, a);
                let mut e = self.h(a, r);
                for j in bits(ket) {
                    if j != r {
                        e += self.antisym(a, j, r, j);
                    }
                }
                sign * e
            }
            4 => {
                let created = bits(bra & diff);
                let removed = bits(ket & diff);
                let (a, b) = (created[0], created[1]);
                let (r, s) = (removed[0], removed[1]);
                // a†_a a†_b a_s a_r |ket⟩
                let mut m = ket;
                let mut sign = phase(m, r);
                m ^= 1u128 << r;
                sign *= phase(m, s);
                m ^= 1u128 << s;
                sign *= phase(m, b);
                m ^= 1u128 << b;
                sign *= phase(m, a);
                sign * self.antisym(a, b, r, s)
            }
            _ => 0.0,
        }
    }
}

fn ci_orbitals(system: &ModelSystem, cutoff: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let g = system.dim();
    if cutoff == 0 || cutoff > g {
        return Err(Error::invalid(format!(
            "orbital cutoff must be in 1..={g}, got {cutoff}"
        )));
    }
    let h = system.one_body(0.0).map(|z| z.re);
    let (values, vectors) = sorted_eigh_real(&h);
    Ok((values[..cutoff].to_vec(), vectors.columns(0, cutoff).into_owned()))
}

fn build_integrals(system: &ModelSystem, orbitals: &DMatrix<f64>) -> Integrals {
    let m = orbitals.ncols();
    let g = orbitals.nrows();
    let h = system.one_body(0.0).map(|z| z.re);
    let one_body = orbitals.transpose() * h * orbitals;
    let v = system.interaction_kernel();
    // pair products φp(i)φq(i) as columns
    let mut products = DMatrix::zeros(g, m * m);
    for p in 0..m {
        for q in 0..m {
            for i in 0..g {
                products[(i, p * m + q)] = orbitals[(i, p)] * orbitals[(i, q)];
            }
        }
    }
    let contracted = products.transpose() * v * &products;
    let mut eri = vec![0.0; m * m * m * m];
    for pq in 0..m * m {
        for rs in 0..m * m {
            eri[pq * m * m + rs] = contracted[(pq, rs)];
        }
    }
    Integrals {
        one_body,
        eri,
        spatial: m,
    }
}

pub fn full_ci_ground_state(system: &ModelSystem, orbital_cutoff: usize) -> Result<CiSolution> {
    full_ci_ground_state_with(
        system,
        &CiOptions {
            orbital_cutoff,
            spin_up: None,
        },
    )
}

pub fn full_ci_ground_state_with(system: &ModelSystem, options: &CiOptions) -> Result<CiSolution> {
    let electrons = system.electron_count();
    if electrons > MAX_ELECTRONS {
        return Err(Error::invalid(format!(
            "full CI supports at most {MAX_ELECTRONS} electrons, got {electrons}"
        )));
    }
    let spin_orbitals = 2 * options.orbital_cutoff;
    if spin_orbitals > 128 {
        return Err(Error::invalid("orbital cutoff above 64 is not supported"));
    }
    let size = binomial(spin_orbitals, electrons);
    if size > MAX_CONFIGURATIONS as u128 {
        return Err(Error::ConfigurationOverflow {
            size,
            limit: MAX_CONFIGURATIONS,
            electrons,
            spin_orbitals,
        });
    }
    let (orbital_energies, orbitals) = ci_orbitals(system, options.orbital_cutoff)?;
    let up_mask = (0..options.orbital_cutoff).fold(0u128, |m, k| m | 1u128 << (2 * k));
    let determinants: Vec<u128> = subsets(spin_orbitals, electrons)
        .into_iter()
        .filter(|&d| {
            options
                .spin_up
                .is_none_or(|n_up| (d & up_mask).count_ones() as usize == n_up)
        })
        .collect();
    if determinants.is_empty() {
        return Err(Error::invalid("no determinant matches the requested spin sector"));
    }
    let integrals = build_integrals(system, &orbitals);
    let dim = determinants.len();
    let mut hamiltonian = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        for b in a..dim {
            let e = integrals.element(determinants[a], determinants[b]);
            hamiltonian[(a, b)] = e;
            hamiltonian[(b, a)] = e;
        }
    }
    let (values, vectors) = sorted_eigh_real(&hamiltonian);
    let ground = vectors.column(0);
    let norm = ground.norm();
    let amplitudes = ground.iter().map(|&x| c(x / norm)).collect();
    let basis = SpinOrbitalBasis::interleaved(orbitals.map(c), system.grid().spacing())?;
    let state = NBodyWavefunction::new(electrons, basis, determinants, amplitudes)?;
    Ok(CiSolution {
        energy: values[0],
        state,
        orbital_energies,
        dimension: dim,
    })
}

/// ρₙ of the state, summing directly over the remaining `N - n` spin-orbital labels.
pub fn exact_reduced_density_matrix(state: &NBodyWavefunction, order: usize) -> Result<DensityMatrix> {
    if order == 0 || order > state.electrons {
        return Err(Error::invalid(format!(
            "order {order} out of range 1..={}",
            state.electrons
        )));
    }
    DensityMatrix::from_determinants(state.basis.clone(), state.electrons, &state.pairs(), order)
}

/// Regression record for one oracle run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub system_hash: String,
    pub orbital_cutoff: usize,
    pub dimension: usize,
    pub energy: f64,
    pub occupation_numbers: Vec<f64>,
    pub traces: Vec<TraceRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub order: usize,
    pub trace: f64,
    pub target: f64,
}

pub fn oracle_record(system: &ModelSystem, orbital_cutoff: usize) -> Result<OracleRecord> {
    let solution = full_ci_ground_state(system, orbital_cutoff)?;
    let rho1 = exact_reduced_density_matrix(&solution.state, 1)?;
    let mut traces = Vec::new();
    for order in 1..=solution.state.electrons().min(2) {
        let rho = exact_reduced_density_matrix(&solution.state, order)?;
        traces.push(TraceRecord {
            order,
            trace: rho.trace(),
            target: rho.normalization_target(),
        });
    }
    Ok(OracleRecord {
        system_hash: system.content_hash(),
        orbital_cutoff,
        dimension: solution.dimension,
        energy: solution.energy,
        occupation_numbers: rho1.occupation_numbers()?,
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_system::{build_soft_coulomb_system, SystemSpec};

    fn well(points: usize, electrons: usize) -> ModelSystem {
        build_soft_coulomb_system(&SystemSpec::soft_well(points, 0.4, 2.0, electrons)).unwrap()
    }

    #[test]
    fn noninteracting_opposite_spins_share_lowest_orbital() {
        let sys = well(24, 2).with_interaction_scale(0.0);
        let sol = full_ci_ground_state(&sys, 4).unwrap();
        let e0 = sol.orbital_energies[0];
        assert!((sol.energy - 2.0 * e0).abs() < 1e-12);
    }

    #[test]
    fn noninteracting_same_spin_obeys_exclusion() {
        let sys = well(24, 2).with_interaction_scale(0.0);
        let sol = full_ci_ground_state_with(
            &sys,
            &CiOptions {
                orbital_cutoff: 4,
                spin_up: Some(2),
            },
        )
        .unwrap();
        let e = &sol.orbital_energies;
        assert!((sol.energy - (e[0] + e[1])).abs() < 1e-12);
    }

    #[test]
    fn overflow_is_reported_with_size() {
        let sys = well(64, 4);
        match full_ci_ground_state(&sys, 40) {
            Err(Error::ConfigurationOverflow { size, .. }) => assert_eq!(size, binomial(80, 4)),
            other => panic!("expected overflow, got {other:?}"),
        }
        assert!(full_ci_ground_state(&well(16, 5), 4).is_err());
    }

    #[test]
    fn energy_decreases_with_cutoff() {
        let sys = well(20, 2);
        let mut last = f64::INFINITY;
        for cutoff in 2..=7 {
            let e = full_ci_ground_state(&sys, cutoff).unwrap().energy;
            assert!(e <= last + 1e-12, "cutoff {cutoff}: {e} > {last}");
            last = e;
        }
    }

    #[test]
    fn state_is_normalized_and_antisymmetric() {
        let sys = well(16, 3);
        let sol = full_ci_ground_state(&sys, 4).unwrap();
        let psi = &sol.state;
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        for &det in psi.determinants().iter().take(20) {
            let occ = bits(det);
            let forward = psi.amplitude(&occ);
            for a in 0..occ.len() {
                for b in a + 1..occ.len() {
                    let mut swapped = occ.clone();
                    swapped.swap(a, b);
                    assert_eq!(psi.amplitude(&swapped), -forward);
                }
            }
        }
        assert_eq!(psi.amplitude(&[0, 0, 1]), C64::default());
    }

    #[test]
    fn single_particle_matrix_is_outer_product() {
        let sys = well(16, 1);
        let sol = full_ci_ground_state(&sys, 5).unwrap();
        let rho = exact_reduced_density_matrix(&sol.state, 1).unwrap();
        assert!((rho.trace() - 1.0).abs() < 1e-12);
        let amps = sol.state.amplitudes();
        for (a, &da) in sol.state.determinants().iter().enumerate() {
            for (b, &db) in sol.state.determinants().iter().enumerate() {
                let i = da.trailing_zeros() as usize;
                let j = db.trailing_zeros() as usize;
                assert!((rho.matrix()[(i, j)] - amps[a] * amps[b].conj()).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn order_out_of_range_is_rejected() {
        let sol = full_ci_ground_state(&well(16, 2), 3).unwrap();
        assert!(exact_reduced_density_matrix(&sol.state, 0).is_err());
        assert!(exact_reduced_density_matrix(&sol.state, 3).is_err());
    }

    #[test]
    fn slater_condon_matches_brute_force_on_small_space() {
        // second-quantized H applied by brute force on 3 spatial orbitals, 2 electrons
        let sys = well(12, 2);
        let (_, orbitals) = ci_orbitals(&sys, 3).unwrap();
        let ints = build_integrals(&sys, &orbitals);
        let dets = subsets(6, 2);
        for &bra in &dets {
            for &ket in &dets {
                let mut brute = 0.0;
                for p in 0..6 {
                    for q in 0..6 {
                        if let Some((s, m)) = excite(ket, q, p) {
                            if m == bra {
                                brute += s * ints.h(p, q);
                            }
                        }
                    }
                }
                for p in 0..6 {
                    for q in 0..6 {
                        for r in 0..6 {
                            for s in 0..6 {
                                if let Some((sign, m)) = double(ket, p, q, r, s) {
                                    if m == bra {
                                        brute += 0.25 * sign * ints.antisym(p, q, r, s);
                                    }
                                }
                            }
                        }
                    }
                }
                assert!((brute - ints.element(bra, ket)).abs() < 1e-12);
            }
        }
    }

    fn annihilate(m: u128, p: usize) -> Option<(f64, u128)> {
        (m >> p & 1 == 1).then(|| (phase(m, p), m ^ 1u128 << p))
    }

    fn create(m: u128, p: usize) -> Option<(f64, u128)> {
        (m >> p & 1 == 0).then(|| (phase(m, p), m | 1u128 << p))
    }

    fn excite(m: u128, from: usize, to: usize) -> Option<(f64, u128)> {
        let (s1, m) = annihilate(m, from)?;
        let (s2, m) = create(m, to)?;
        Some((s1 * s2, m))
    }

    // a†p a†q a_s a_r
    fn double(m: u128, p: usize, q: usize, r: usize, s: usize) -> Option<(f64, u128)> {
        let (s1, m) = annihilate(m, r)?;
        let (s2, m) = annihilate(m, s)?;
        let (s3, m) = create(m, q)?;
        let (s4, m) = create(m, p)?;
        Some((s1 * s2 * s3 * s4, m))
    }
}
