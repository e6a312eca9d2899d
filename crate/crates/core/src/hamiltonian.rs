//! Max-cut Hamiltonians, their brute-force spectra, and level populations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::pauli::{Pauli, PauliString};
use crate::statevec::StateVector;

/// Energies closer than this are treated as one level.
pub const LEVEL_TOLERANCE: f64 = 1e-9;

/// Largest register [`brute_force_spectrum`] will enumerate.
pub const MAX_SPECTRUM_QUBITS: usize = 24;

/// One weighted Pauli term `coeff · string` (a partial Hamiltonian).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub coeff: f64,
    pub string: PauliString,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    n_qubits: usize,
    constant: f64,
    terms: Vec<Term>,
}

impl Hamiltonian {
    pub fn new(n_qubits: usize, constant: f64, terms: Vec<Term>) -> Result<Hamiltonian> {
        if let Some(t) = terms.iter().find(|t| t.string.n_qubits() != n_qubits) {
            return Err(Error::DimensionMismatch {
                expected: n_qubits,
                found: t.string.n_qubits(),
            });
        }
        if !constant.is_finite() || terms.iter().any(|t| !t.coeff.is_finite()) {
            return Err(Error::NonFinite("hamiltonian coefficient"));
        }
        Ok(Hamiltonian {
            n_qubits,
            constant,
            terms,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(|t| t.string.is_diagonal())
    }

    /// Diagonal of `H` in the computational basis, constant included.
    pub fn diagonal_energies(&self) -> Result<Vec<f64>> {
        if !self.is_diagonal() {
            return Err(Error::NonDiagonal);
        }
        if self.n_qubits > MAX_SPECTRUM_QUBITS {
            return Err(Error::Capacity {
                what: "spectrum qubits",
                requested: self.n_qubits,
                limit: MAX_SPECTRUM_QUBITS,
            });
        }
        let dim = 1usize << self.n_qubits;
        let mut energies = vec![self.constant; dim];
        for t in &self.terms {
            let z = t.string.z_mask();
            for (x, e) in energies.iter_mut().enumerate() {
                if (z & x as u64).count_ones() & 1 == 0 {
                    *e += t.coeff;
                } else {
                    *e -= t.coeff;
                }
            }
        }
        Ok(energies)
    }

    /// `constant + Σ_m coeff_m ⟨P_m⟩`, evaluated term by term.
    pub fn expectation(&self, s: &StateVector) -> Result<f64> {
        if s.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: s.n_qubits(),
            });
        }
        Ok(self.constant
            + self
                .terms
                .iter()
                .map(|t| t.coeff * s.string_expectation(&t.string).re)
                .sum::<f64>())
    }
}

/// `H = -Σ_{(i,j)∈E} d_ij (1 - Z_i Z_j)/2`, one term per edge in edge order.
pub fn maxcut_hamiltonian(g: &Graph) -> Result<Hamiltonian> {
    let n = g.n_vertices();
    let mut constant = 0.0;
    let mut terms = Vec::with_capacity(g.edges().len());
    for e in g.edges() {
        constant -= e.weight / 2.0;
        let string = PauliString::from_letters(n, &[(e.i, Pauli::Z), (e.j, Pauli::Z)])?;
        terms.push(Term {
            coeff: e.weight / 2.0,
            string,
        });
    }
    Hamiltonian::new(n, constant, terms)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub energy: f64,
    pub degeneracy: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub energies: Vec<f64>,
    pub ground_energy: f64,
    pub ground_states: Vec<usize>,
    /// Distinct levels in ascending energy.
    pub levels: Vec<Level>,
    level_of: Vec<u32>,
}

impl Spectrum {
    pub fn from_energies(energies: Vec<f64>) -> Result<Spectrum> {
        if energies.is_empty() {
            return Err(Error::InvalidArgument("empty spectrum".into()));
        }
        let mut order: Vec<usize> = (0..energies.len()).collect();
        order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]));
        let mut levels: Vec<Level> = Vec::new();
        let mut level_of = vec![0u32; energies.len()];
        let mut last = f64::NEG_INFINITY;
        for &x in &order {
            let e = energies[x];
            if levels.is_empty() || e - last > LEVEL_TOLERANCE {
                levels.push(Level {
                    energy: e,
                    degeneracy: 0,
                });
            }
            last = e;
            let idx = levels.len() - 1;
            levels[idx].degeneracy += 1;
            level_of[x] = idx as u32;
        }
        let ground_energy = levels[0].energy;
        let ground_states = (0..energies.len()).filter(|&x| level_of[x] == 0).collect();
        Ok(Spectrum {
            energies,
            ground_energy,
            ground_states,
            levels,
            level_of,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.energies.len().trailing_zeros() as usize
    }

    /// Index into [`Spectrum::levels`] of basis state `x`.
    pub fn level_index(&self, x: usize) -> usize {
        self.level_of[x] as usize
    }
}

pub fn brute_force_spectrum(h: &Hamiltonian) -> Result<Spectrum> {
    Spectrum::from_energies(h.diagonal_energies()?)
}

/// Population of each energy level, `n(E) = Σ_{i: E_i = E} |⟨i|ψ⟩|²`, ascending in `E`.
pub fn spectral_decomposition(s: &StateVector, spec: &Spectrum) -> Result<Vec<(f64, f64)>> {
    if s.dim() != spec.energies.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.energies.len(),
            found: s.dim(),
        });
    }
    let mut weights = vec![0.0; spec.levels.len()];
    for (x, a) in s.amplitudes().iter().enumerate() {
        weights[spec.level_index(x)] += a.norm_sqr();
    }
    Ok(spec
        .levels
        .iter()
        .zip(weights)
        .map(|(l, w)| (l.energy, w))
        .collect())
}
