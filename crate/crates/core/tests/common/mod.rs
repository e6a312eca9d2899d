//! Independent dense-matrix oracles shared by the integration tests.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use qite_core::{Graph, Pauli, PauliString, StateVector};
use rand::Rng;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn pauli_2x2(p: Pauli) -> DMatrix<Complex64> {
    let z = c(0.0);
    let o = c(1.0);
    match p {
        Pauli::I => DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        Pauli::X => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        Pauli::Y => DMatrix::from_row_slice(2, 2, &[z, -I, I, z]),
        Pauli::Z => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    }
}

/// Dense matrix of `p`, qubit 0 is the least significant index bit.
pub fn dense_pauli(p: &PauliString) -> DMatrix<Complex64> {
    let mut m = DMatrix::from_element(1, 1, c(1.0));
    for q in (0..p.n_qubits()).rev() {
        m = m.kronecker(&pauli_2x2(p.letter(q)));
    }
    m
}

/// `exp(-iθP)` by the general matrix exponential.
pub fn dense_rotation(p: &PauliString, theta: f64) -> DMatrix<Complex64> {
    (dense_pauli(p) * Complex64::new(0.0, -theta)).exp()
}

pub fn matvec(m: &DMatrix<Complex64>, v: &[Complex64]) -> Vec<Complex64> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|k| m[(r, k)] * v[k]).sum())
        .collect()
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn random_state<R: Rng>(rng: &mut R, n: usize) -> StateVector {
    let amps: Vec<Complex64> = (0..1usize << n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(n, amps.into_iter().map(|a| a / norm).collect()).unwrap()
}

pub fn random_pauli<R: Rng>(rng: &mut R, n: usize) -> PauliString {
    let mask = (1u64 << n) - 1;
    PauliString::from_masks(n, rng.gen::<u64>() & mask, rng.gen::<u64>() & mask).unwrap()
}

/// Max-cut energies `-Σ_{cut edges} w`, computed straight from the edge list.
pub fn cut_energies(g: &Graph) -> Vec<f64> {
    (0..1usize << g.n_vertices())
        .map(|x| {
            -g.edges()
                .iter()
                .filter(|e| (x >> e.i & 1) != (x >> e.j & 1))
                .map(|e| e.weight)
                .sum::<f64>()
        })
        .collect()
}

/// Normalized `exp(-τH)ψ` for diagonal `H`.
pub fn ite_oracle(psi: &[Complex64], energies: &[f64], tau: f64) -> Vec<Complex64> {
    let e0 = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let v: Vec<Complex64> = psi
        .iter()
        .zip(energies)
        .map(|(a, e)| a * (-tau * (e - e0)).exp())
        .collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / norm).collect()
}

pub fn fidelity(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.conj() * y)
        .sum::<Complex64>()
        .norm_sqr()
}
