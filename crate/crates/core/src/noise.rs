//! Density-matrix replay under thermal relaxation and readout error.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::statevec::StateVector;

pub const MAX_DENSITY_QUBITS: usize = 6;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Thermal relaxation and readout parameters. Times: `t1_us`, `t2_us` in
/// microseconds, gate durations in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub t1_us: f64,
    pub t2_us: f64,
    pub tg1_ns: f64,
    pub tg2_ns: f64,
    /// Row-stochastic `[[p00, p01], [p10, p11]]`; row = prepared, column = read.
    pub readout: [[f64; 2]; 2],
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            t1_us: 100.0,
            t2_us: 80.0,
            tg1_ns: 0.02,
            tg2_ns: 0.1,
            readout: [[0.995, 0.005], [0.02, 0.98]],
        }
    }
}

impl NoiseModel {
    /// No relaxation and perfect readout.
    pub fn ideal() -> NoiseModel {
        NoiseModel {
            t1_us: f64::INFINITY,
            t2_us: f64::INFINITY,
            readout: [[1.0, 0.0], [0.0, 1.0]],
            ..NoiseModel::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidNoise(m));
        for (name, v) in [
            ("t1_us", self.t1_us),
            ("t2_us", self.t2_us),
            ("tg1_ns", self.tg1_ns),
            ("tg2_ns", self.tg2_ns),
        ] {
            if !(v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.t1_us.is_finite() && self.t2_us > 2.0 * self.t1_us * (1.0 + 1e-12) {
            return bad(format!(
                "t2 ({}) exceeds 2·t1 ({})",
                self.t2_us,
                2.0 * self.t1_us
            ));
        }
        for row in &self.readout {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p))
                || (row[0] + row[1] - 1.0).abs() > 1e-12
            {
                return bad(format!("readout row {row:?} is not a probability vector"));
            }
        }
        Ok(())
    }

    fn gate_time_us(&self, g: &Gate) -> f64 {
        if g.is_two_qubit() {
            self.tg2_ns * 1e-3
        } else {
            self.tg1_ns * 1e-3
        }
    }

    /// Relaxation channel for one qubit over `t_us`.
    pub fn relaxation(&self, t_us: f64) -> Kraus1 {
        thermal_relaxation(t_us, self.t1_us, self.t2_us)
    }
}

/// Single-qubit channel as row-major 2×2 Kraus operators.
#[derive(Debug, Clone, PartialEq)]
pub struct Kraus1 {
    pub ops: Vec<[Complex64; 4]>,
}

impl Kraus1 {
    /// `max |Σ K†K − I|`
    pub fn completeness_error(&self) -> f64 {
        let mut acc = [ZERO; 4];
        for k in &self.ops {
            for i in 0..2 {
                for j in 0..2 {
                    acc[2 * i + j] += k[i].conj() * k[j] + k[2 + i].conj() * k[2 + j];
                }
            }
        }
        let id = [ONE, ZERO, ZERO, ONE];
        acc.iter()
            .zip(&id)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Kraus1) -> Kraus1 {
        let mut ops = Vec::with_capacity(self.ops.len() * next.ops.len());
        for b in &next.ops {
            for a in &self.ops {
                ops.push(mul2(b, a));
            }
        }
        Kraus1 { ops }
    }

    fn is_identity(&self) -> bool {
        self.ops.len() == 1 && self.ops[0] == [ONE, ZERO, ZERO, ONE]
    }
}

fn mul2(a: &[Complex64; 4], b: &[Complex64; 4]) -> [Complex64; 4] {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

fn real(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

pub fn amplitude_damping(p: f64) -> Kraus1 {
    Kraus1 {
        ops: vec![
            [ONE, ZERO, ZERO, real((1.0 - p).sqrt())],
            [ZERO, real(p.sqrt()), ZERO, ZERO],
        ],
    }
}

pub fn phase_damping(lambda: f64) -> Kraus1 {
    Kraus1 {
        ops: vec![
            [ONE, ZERO, ZERO, real((1.0 - lambda).sqrt())],
            [ZERO, ZERO, ZERO, real(lambda.sqrt())],
        ],
    }
}

/// Amplitude damping `p = 1 − e^{−t/T1}` then pure dephasing with
/// `1/Tφ = 1/T2 − 1/(2T1)`, `λ = 1 − e^{−2t/Tφ}`.
pub fn thermal_relaxation(t: f64, t1: f64, t2: f64) -> Kraus1 {
    let p = 1.0 - (-t / t1).exp();
    let rate_phi = (1.0 / t2 - 0.5 / t1).max(0.0);
    let lambda = 1.0 - (-2.0 * t * rate_phi).exp();
    let mut ops = Vec::new();
    for k in amplitude_damping(p).then(&phase_damping(lambda)).ops {
        if k.iter().any(|z| z.norm() > 0.0) {
            ops.push(k);
        }
    }
    Kraus1 { ops }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    /// Row-major `dim × dim`.
    data: Vec<Complex64>,
}

impl DensityMatrix {
    fn check(n_qubits: usize) -> Result<()> {
        if n_qubits > MAX_DENSITY_QUBITS {
            return Err(Error::Capacity {
                what: "density-matrix qubits",
                requested: n_qubits,
                limit: MAX_DENSITY_QUBITS,
            });
        }
        Ok(())
    }

    pub fn from_state(s: &StateVector) -> Result<DensityMatrix> {
        Self::check(s.n_qubits())?;
        let a = s.amplitudes();
        let dim = a.len();
        let mut data = vec![ZERO; dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                data[r * dim + c] = a[r] * a[c].conj();
            }
        }
        Ok(DensityMatrix {
            n_qubits: s.n_qubits(),
            data,
        })
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<DensityMatrix> {
        Self::check(n_qubits)?;
        let dim = 1usize << n_qubits;
        let mut data = vec![ZERO; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = real(1.0 / dim as f64);
        }
        Ok(DensityMatrix { n_qubits, data })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim() + c]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i).re).collect()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut e = 0.0f64;
        for r in 0..dim {
            for c in 0..=r {
                e = e.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        e
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let dim = self.dim();
        let m = DMatrix::from_fn(dim, dim, |r, c| {
            // symmetrize before the Hermitian solver
            (self.get(r, c) + self.get(c, r).conj()) * 0.5
        });
        m.symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// `ρ → UρU†` for the ideal gate.
    pub fn apply_gate(&mut self, g: &Gate) -> Result<()> {
        let (a, b) = g.qubits();
        if a >= self.n_qubits || b.is_some_and(|b| b >= self.n_qubits) {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: a.max(b.unwrap_or(0)) + 1,
            });
        }
        match *g {
            Gate::Cnot { control, target } => {
                let (cb, tb) = (1usize << control, 1usize << target);
                let perm = |k: usize| if k & cb != 0 { k ^ tb } else { k };
                let dim = self.dim();
                let old = self.data.clone();
                for r in 0..dim {
                    for c in 0..dim {
                        self.data[perm(r) * dim + perm(c)] = old[r * dim + c];
                    }
                }
            }
            _ => {
                let u = g.matrix_1q().expect("single-qubit gate");
                self.sandwich(a, &u);
            }
        }
        Ok(())
    }

    /// `ρ → KρK†` on qubit `q`, in place.
    fn sandwich(&mut self, q: usize, k: &[Complex64; 4]) {
        let dim = self.dim();
        let bit = 1usize << q;
        for c in 0..dim {
            for r in 0..dim {
                if r & bit == 0 {
                    let (x0, x1) = (self.data[r * dim + c], self.data[(r | bit) * dim + c]);
                    self.data[r * dim + c] = k[0] * x0 + k[1] * x1;
                    self.data[(r | bit) * dim + c] = k[2] * x0 + k[3] * x1;
                }
            }
        }
        for r in 0..dim {
            let row = &mut self.data[r * dim..(r + 1) * dim];
            for c in 0..dim {
                if c & bit == 0 {
                    let (x0, x1) = (row[c], row[c | bit]);
                    row[c] = x0 * k[0].conj() + x1 * k[1].conj();
                    row[c | bit] = x0 * k[2].conj() + x1 * k[3].conj();
                }
            }
        }
    }

    pub fn apply_channel(&mut self, q: usize, ch: &Kraus1) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: q + 1,
            });
        }
        if ch.is_identity() {
            return Ok(());
        }
        let mut acc = vec![ZERO; self.data.len()];
        for k in &ch.ops {
            let mut part = self.clone();
            part.sandwich(q, k);
            for (a, v) in acc.iter_mut().zip(&part.data) {
                *a += v;
            }
        }
        self.data = acc;
        Ok(())
    }
}

/// Ideal gate followed by relaxation on every touched qubit.
pub fn apply_gate_noisy(rho: &mut DensityMatrix, g: &Gate, nm: &NoiseModel) -> Result<()> {
    nm.validate()?;
    apply_gate_with(rho, g, &nm.relaxation(nm.gate_time_us(g)))
}

fn apply_gate_with(rho: &mut DensityMatrix, g: &Gate, ch: &Kraus1) -> Result<()> {
    rho.apply_gate(g)?;
    let (a, b) = g.qubits();
    rho.apply_channel(a, ch)?;
    if let Some(b) = b {
        rho.apply_channel(b, ch)?;
    }
    Ok(())
}

/// Pushes a bitstring distribution through the per-qubit confusion matrix.
pub fn apply_readout(probs: &[f64], readout: &[[f64; 2]; 2]) -> Result<Vec<f64>> {
    let dim = probs.len();
    if !dim.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "distribution length {dim} is not a power of two"
        )));
    }
    let mut p = probs.to_vec();
    let n = dim.trailing_zeros();
    for q in 0..n {
        let bit = 1usize << q;
        for k in 0..dim {
            if k & bit == 0 {
                let (p0, p1) = (p[k], p[k | bit]);
                p[k] = p0 * readout[0][0] + p1 * readout[1][0];
                p[k | bit] = p0 * readout[0][1] + p1 * readout[1][1];
            }
        }
    }
    Ok(p)
}

pub fn measure_energy_noisy(rho: &DensityMatrix, h: &Hamiltonian, nm: &NoiseModel) -> Result<f64> {
    if h.n_qubits() != rho.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: h.n_qubits(),
            found: rho.n_qubits(),
        });
    }
    let energies = h.diagonal_energies()?;
    let p = apply_readout(&rho.diagonal(), &nm.readout)?;
    Ok(p.iter().zip(&energies).map(|(a, b)| a * b).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Replay {
    pub energy_ideal: f64,
    pub energy_noisy: f64,
}

/// Runs `circuits` in order from the uniform state, with and without noise.
pub fn replay(circuits: &[Circuit], h: &Hamiltonian, nm: &NoiseModel) -> Result<Replay> {
    nm.validate()?;
    let n = h.n_qubits();
    DensityMatrix::check(n)?;
    let energies = h.diagonal_energies()?;
    let mut psi = StateVector::uniform(n)?;
    let mut rho = DensityMatrix::from_state(&psi)?;
    let ch1 = nm.relaxation(nm.tg1_ns * 1e-3);
    let ch2 = nm.relaxation(nm.tg2_ns * 1e-3);
    for c in circuits {
        c.apply(&mut psi)?;
        for g in c.gates() {
            apply_gate_with(&mut rho, g, if g.is_two_qubit() { &ch2 } else { &ch1 })?;
        }
    }
    Ok(Replay {
        energy_ideal: psi.diagonal_expectation(&energies)?,
        energy_noisy: measure_energy_noisy(&rho, h, nm)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::compile_rotation;
    use crate::graph::Graph;
    use crate::hamiltonian::maxcut_hamiltonian;

    #[test]
    fn default_model_is_valid() {
        NoiseModel::default().validate().unwrap();
        NoiseModel::ideal().validate().unwrap();
        let mut bad = NoiseModel::default();
        bad.t2_us = 250.0;
        assert!(bad.validate().is_err());
        bad = NoiseModel::default();
        bad.readout[0] = [0.9, 0.2];
        assert!(bad.validate().is_err());
        bad = NoiseModel::default();
        bad.tg1_ns = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn kraus_completeness() {
        for ch in [
            amplitude_damping(0.3),
            phase_damping(0.7),
            thermal_relaxation(0.5, 100.0, 80.0),
            thermal_relaxation(1e-4, 100.0, 200.0),
            thermal_relaxation(0.1, f64::INFINITY, f64::INFINITY),
        ] {
            assert!(ch.completeness_error() < 1e-12);
        }
    }

    #[test]
    fn excited_state_decays() {
        let nm = NoiseModel::default();
        let mut rho = DensityMatrix::from_state(&StateVector::basis(1, 1).unwrap()).unwrap();
        let t = nm.tg1_ns * 1e-3;
        rho.apply_channel(0, &nm.relaxation(t)).unwrap();
        let expected = (-t / nm.t1_us).exp();
        assert!((rho.get(1, 1).re - expected).abs() < 1e-15);
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coherence_decays_at_t2() {
        let mut rho = DensityMatrix::from_state(&StateVector::uniform(1).unwrap()).unwrap();
        rho.apply_channel(0, &thermal_relaxation(10.0, 100.0, 80.0))
            .unwrap();
        let expected = 0.5 * (-10.0f64 / 80.0).exp();
        assert!((rho.get(0, 1).norm() - expected).abs() < 1e-12);
    }

    #[test]
    fn ideal_model_matches_unitary() {
        let mut s = StateVector::uniform(3).unwrap();
        s.rotate(&"XYZ".parse().unwrap(), 0.2).unwrap();
        let c = compile_rotation(&"YIX".parse().unwrap(), 0.7).unwrap();
        let mut rho = DensityMatrix::from_state(&s).unwrap();
        for g in c.gates() {
            apply_gate_noisy(&mut rho, g, &NoiseModel::ideal()).unwrap();
        }
        c.apply(&mut s).unwrap();
        let expected = DensityMatrix::from_state(&s).unwrap();
        let diff = rho
            .data
            .iter()
            .zip(&expected.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn mixed_state_is_fixed_by_unitaries() {
        let mut rho = DensityMatrix::maximally_mixed(2).unwrap();
        let before = rho.clone();
        rho.apply_gate(&Gate::H(0)).unwrap();
        rho.apply_gate(&Gate::Cnot {
            control: 0,
            target: 1,
        })
        .unwrap();
        let diff = rho
            .data
            .iter()
            .zip(&before.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-15);
    }

    #[test]
    fn readout_rows() {
        let nm = NoiseModel::default();
        let p = apply_readout(&[1.0, 0.0], &nm.readout).unwrap();
        assert!((p[0] - 0.995).abs() < 1e-15 && (p[1] - 0.005).abs() < 1e-15);
        let p = apply_readout(&[0.0, 1.0], &nm.readout).unwrap();
        assert!((p[0] - 0.02).abs() < 1e-15 && (p[1] - 0.98).abs() < 1e-15);
        let p = apply_readout(&[0.25; 4], &[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(p, vec![0.25; 4]);
    }

    #[test]
    fn empty_replay_gives_uniform_energy() {
        let h = maxcut_hamiltonian(&Graph::complete(4).unwrap()).unwrap();
        let r = replay(&[], &h, &NoiseModel::ideal()).unwrap();
        assert!((r.energy_ideal - h.constant()).abs() < 1e-12);
        assert!((r.energy_noisy - h.constant()).abs() < 1e-12);
    }

    #[test]
    fn capacity_enforced() {
        assert!(DensityMatrix::maximally_mixed(7).is_err());
    }
}
