//! Dense state vectors.
//!
//! Basis index bit `q` holds the computational-basis value of qubit `q`, so the
//! dense matrix of a Pauli string is `P_{n-1} ⊗ … ⊗ P_0`.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::{PauliString, PhasedPauli};

/// Largest register a [`StateVector`] will allocate.
pub const MAX_STATE_QUBITS: usize = 24;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

fn check_capacity(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_STATE_QUBITS {
        return Err(Error::Capacity {
            what: "state vector qubits",
            requested: n_qubits,
            limit: MAX_STATE_QUBITS,
        });
    }
    Ok(())
}

/// `i^{#Y}`, the prefactor turning `X^x Z^z` into the Hermitian string.
#[inline]
pub(crate) fn y_phase(p: &PauliString) -> Complex64 {
    match p.count_y() % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

#[inline]
fn parity_sign(mask: u64, k: usize) -> f64 {
    if (mask & k as u64).count_ones() & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl StateVector {
    /// Equal-weight superposition of every basis state.
    pub fn uniform(n_qubits: usize) -> Result<StateVector> {
        check_capacity(n_qubits)?;
        let dim = 1usize << n_qubits;
        let a = (dim as f64).sqrt().recip();
        Ok(StateVector {
            n_qubits,
            amps: vec![Complex64::new(a, 0.0); dim],
        })
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<StateVector> {
        check_capacity(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: index + 1,
            });
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amps })
    }

    /// Wraps and normalizes arbitrary amplitudes.
    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<StateVector> {
        check_capacity(n_qubits)?;
        if amps.len() != 1usize << n_qubits {
            return Err(Error::DimensionMismatch {
                expected: 1 << n_qubits,
                found: amps.len(),
            });
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite("amplitude"));
        }
        let mut s = StateVector { n_qubits, amps };
        let norm = s.norm();
        if norm == 0.0 {
            return Err(Error::Underflow("state has zero norm".into()));
        }
        s.scale(norm.recip());
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Underflow(format!(
                "cannot normalize state of norm {norm}"
            )));
        }
        self.scale(norm.recip());
        Ok(())
    }

    fn scale(&mut self, f: f64) {
        for a in &mut self.amps {
            *a *= f;
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        self.check_dim(other.n_qubits)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// `Σ_x |ψ_x|² E_x` for a diagonal observable given by its diagonal.
    pub fn diagonal_expectation(&self, diagonal: &[f64]) -> Result<f64> {
        if diagonal.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: diagonal.len(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(diagonal)
            .map(|(a, e)| a.norm_sqr() * e)
            .sum())
    }

    fn check_dim(&self, n_qubits: usize) -> Result<()> {
        if n_qubits != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: n_qubits,
            });
        }
        Ok(())
    }

    /// Writes `P|self⟩` into `out` for an unphased string.
    pub(crate) fn pauli_image_into(&self, p: &PauliString, out: &mut [Complex64]) {
        let x = p.x_mask() as usize;
        let z = p.z_mask();
        let ph = y_phase(p);
        for (k, a) in self.amps.iter().enumerate() {
            out[k ^ x] = ph * parity_sign(z, k) * a;
        }
    }

    /// Returns `p|self⟩`.
    pub fn apply_pauli(&self, p: &PhasedPauli) -> Result<StateVector> {
        let mut out = self.clone();
        out.apply_pauli_in_place(p)?;
        Ok(out)
    }

    pub fn apply_pauli_in_place(&mut self, p: &PhasedPauli) -> Result<()> {
        self.check_dim(p.string.n_qubits())?;
        let mut out = vec![ZERO; self.dim()];
        self.pauli_image_into(&p.string, &mut out);
        let ph = p.phase.to_complex();
        for a in &mut out {
            *a *= ph;
        }
        self.amps = out;
        Ok(())
    }

    /// Returns `exp(-iθP)|self⟩`.
    pub fn apply_rotation(&self, p: &PauliString, theta: f64) -> Result<StateVector> {
        let mut out = self.clone();
        out.rotate(p, theta)?;
        Ok(out)
    }

    /// In-place `exp(-iθP)`, using `exp(-iθP) = cos θ − i sin θ P`.
    pub fn rotate(&mut self, p: &PauliString, theta: f64) -> Result<()> {
        self.check_dim(p.n_qubits())?;
        if !theta.is_finite() {
            return Err(Error::NonFinite("rotation angle"));
        }
        if theta == 0.0 {
            return Ok(());
        }
        let (s, c) = theta.sin_cos();
        // -i sin θ · i^{#Y}
        let f = Complex64::new(0.0, -s) * y_phase(p);
        let x = p.x_mask() as usize;
        let z = p.z_mask();
        if x == 0 {
            for (k, a) in self.amps.iter_mut().enumerate() {
                *a *= c + f * parity_sign(z, k);
            }
            return Ok(());
        }
        let high = 1usize << (usize::BITS - 1 - x.leading_zeros());
        for k in 0..self.amps.len() {
            if k & high != 0 {
                continue;
            }
            let j = k ^ x;
            let ak = self.amps[k];
            let aj = self.amps[j];
            // (Pψ)[j] = ph·sgn(k)ψ[k],  (Pψ)[k] = ph·sgn(j)ψ[j]
            self.amps[k] = c * ak + f * parity_sign(z, j) * aj;
            self.amps[j] = c * aj + f * parity_sign(z, k) * ak;
        }
        Ok(())
    }

    /// `⟨self|p|self⟩`.
    pub fn expectation(&self, p: &PhasedPauli) -> Result<Complex64> {
        self.check_dim(p.string.n_qubits())?;
        Ok(p.phase.to_complex() * self.string_expectation(&p.string))
    }

    pub(crate) fn string_expectation(&self, p: &PauliString) -> Complex64 {
        let x = p.x_mask() as usize;
        let z = p.z_mask();
        let mut acc = ZERO;
        for (k, a) in self.amps.iter().enumerate() {
            acc += self.amps[k ^ x].conj() * parity_sign(z, k) * a;
        }
        y_phase(p) * acc
    }

    /// Exact imaginary-time evolution `e^{-τH}|self⟩` (renormalized) for a
    /// Hamiltonian that is diagonal with the given `energies`.
    pub fn exact_ite(&self, energies: &[f64], tau: f64) -> Result<StateVector> {
        if energies.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: energies.len(),
            });
        }
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "imaginary time must be finite and non-negative, got {tau}"
            )));
        }
        if tau == 0.0 {
            return Ok(self.clone());
        }
        // shift by the smallest populated energy so the largest factor is 1
        let shift = self
            .amps
            .iter()
            .zip(energies)
            .filter(|(a, _)| a.norm_sqr() > 0.0)
            .map(|(_, e)| *e)
            .fold(f64::INFINITY, f64::min);
        let amps: Vec<Complex64> = self
            .amps
            .iter()
            .zip(energies)
            .map(|(a, e)| a * (-tau * (e - shift)).exp())
            .collect();
        let mut out = StateVector {
            n_qubits: self.n_qubits,
            amps,
        };
        if out.norm() == 0.0 {
            return Err(Error::Underflow(
                "all amplitudes vanished; rescale energies relative to their minimum".into(),
            ));
        }
        out.normalize()?;
        Ok(out)
    }

    /// Writes `index,real,imag` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,real,imag")?;
        for (k, a) in self.amps.iter().enumerate() {
            writeln!(w, "{k},{:.17e},{:.17e}", a.re, a.im)?;
        }
        Ok(())
    }

    pub(crate) fn amps_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    /// Unnormalized wrapper for intermediate vectors.
    pub(crate) fn from_raw(n_qubits: usize, amps: Vec<Complex64>) -> StateVector {
        debug_assert_eq!(amps.len(), 1usize << n_qubits);
        StateVector { n_qubits, amps }
    }
}

/// Free-function forms matching the operation names used elsewhere.
pub fn uniform_init(n_qubits: usize) -> Result<StateVector> {
    StateVector::uniform(n_qubits)
}

pub fn apply_pauli(s: &StateVector, p: &PhasedPauli) -> Result<StateVector> {
    s.apply_pauli(p)
}

pub fn apply_rotation(s: &StateVector, p: &PauliString, theta: f64) -> Result<StateVector> {
    s.apply_rotation(p, theta)
}

pub fn expectation(s: &StateVector, p: &PhasedPauli) -> Result<Complex64> {
    s.expectation(p)
}

pub fn exact_ite(s0: &StateVector, energies: &[f64], tau: f64) -> Result<StateVector> {
    s0.exact_ite(energies, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::Phase;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn uniform_amplitudes() {
        let s = StateVector::uniform(1).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(s
            .amplitudes()
            .iter()
            .all(|a| (a - c(h, 0.0)).norm() < 1e-15));
        let s = StateVector::uniform(2).unwrap();
        assert!(s
            .amplitudes()
            .iter()
            .all(|a| (a - c(0.5, 0.0)).norm() < 1e-15));
        let s = StateVector::uniform(10).unwrap();
        assert_eq!(s.dim(), 1024);
        assert!(s
            .amplitudes()
            .iter()
            .all(|a| (a - c(1.0 / 32.0, 0.0)).norm() < 1e-15));
        assert!(matches!(
            StateVector::uniform(25),
            Err(Error::Capacity { .. })
        ));
        assert!(StateVector::uniform(0).is_err());
    }

    #[test]
    fn pauli_actions() {
        let zero = StateVector::basis(1, 0).unwrap();
        let one = zero.apply_pauli(&ps("X").into()).unwrap();
        assert_eq!(one.amplitudes(), &[c(0.0, 0.0), c(1.0, 0.0)]);

        let plus = StateVector::uniform(1).unwrap();
        let minus = plus.apply_pauli(&ps("Z").into()).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((minus.amplitudes()[1] - c(-h, 0.0)).norm() < 1e-15);

        // Y|0> = i|1>, so (-i)Y|0> = |1>
        let p = PhasedPauli::new(Phase::MINUS_I, ps("Y"));
        let out = zero.apply_pauli(&p).unwrap();
        assert!((out.amplitudes()[0]).norm() < 1e-15);
        assert!((out.amplitudes()[1] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rotation_cases() {
        let s = StateVector::uniform(2).unwrap();
        assert_eq!(s.apply_rotation(&ps("XZ"), 0.0).unwrap(), s);

        let zero = StateVector::basis(1, 0).unwrap();
        let r = zero
            .apply_rotation(&ps("Z"), std::f64::consts::FRAC_PI_2)
            .unwrap();
        assert!((r.amplitudes()[0] - c(0.0, -1.0)).norm() < 1e-15);

        assert!(matches!(
            zero.apply_rotation(&ps("Z"), f64::NAN),
            Err(Error::NonFinite(_))
        ));
        assert!(zero.apply_rotation(&ps("ZZ"), 0.1).is_err());
    }

    #[test]
    fn expectation_cases() {
        let plus = StateVector::uniform(1).unwrap();
        let zero = StateVector::basis(1, 0).unwrap();
        assert!((plus.expectation(&ps("X").into()).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        assert!(zero.expectation(&ps("X").into()).unwrap().norm() < 1e-15);
    }

    #[test]
    fn exact_ite_single_edge_large_tau() {
        let s = StateVector::uniform(2).unwrap();
        let out = s.exact_ite(&[0.0, -1.0, -1.0, 0.0], 50.0).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let want = [0.0, h, h, 0.0];
        for (a, w) in out.amplitudes().iter().zip(want) {
            assert!((a - c(w, 0.0)).norm() < 1e-12);
        }
        assert_eq!(s.exact_ite(&[0.0; 4], 0.0).unwrap(), s);
        assert!(s.exact_ite(&[0.0; 3], 1.0).is_err());
        assert!(s.exact_ite(&[0.0; 4], -1.0).is_err());
    }

    #[test]
    fn exact_ite_survives_large_exponents() {
        let s = StateVector::uniform(2).unwrap();
        let out = s.exact_ite(&[1e4, 2e4, 3e4, 4e4], 10.0).unwrap();
        assert!((out.amplitudes()[0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_dump() {
        let mut buf = Vec::new();
        StateVector::basis(1, 1)
            .unwrap()
            .write_csv(&mut buf)
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("index,real,imag\n0,"));
        assert_eq!(text.lines().count(), 3);
    }
}
