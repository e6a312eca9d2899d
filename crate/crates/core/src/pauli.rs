//! Pauli strings on up to 64 qubits in the symplectic (X mask, Z mask) form.
//!
//! Bit `q` of each mask belongs to qubit `q`. The per-qubit letter is read off
//! the pair of bits: `(0,0) = I`, `(1,0) = X`, `(1,1) = Y`, `(0,1) = Z`.
//! Internally a string is stored as `i^{|x & z|} X^x Z^z`, which makes `Y = iXZ`
//! and lets products be computed with a handful of popcounts.
//!
//! Textual form is one letter per qubit with qubit 0 first, e.g. `"XIZY"`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest number of qubits a [`PauliString`] can describe.
pub const MAX_PAULI_QUBITS: usize = 64;

/// A single-qubit Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Result<Pauli> {
        match c {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(Error::InvalidPauliChar(other)),
        }
    }

    /// The three non-identity letters, in `X, Y, Z` order.
    pub const NON_IDENTITY: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];
}

/// A global phase restricted to the fourth roots of unity, stored as the
/// exponent `k` of `i^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_exponent(k: i64) -> Phase {
        Phase(k.rem_euclid(4) as u8)
    }

    pub fn exponent(self) -> u8 {
        self.0
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.0 {
            0 => "+1",
            1 => "+i",
            2 => "-1",
            _ => "-i",
        })
    }
}

/// A tensor product of single-qubit Pauli operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_qubits: usize,
    x: u64,
    z: u64,
}

fn width_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl PauliString {
    /// Builds a string from raw masks. Bits at or above `n_qubits` must be clear.
    pub fn from_masks(n_qubits: usize, x: u64, z: u64) -> Result<PauliString> {
        if n_qubits == 0 || n_qubits > MAX_PAULI_QUBITS {
            return Err(Error::Capacity {
                what: "pauli string width",
                requested: n_qubits,
                limit: MAX_PAULI_QUBITS,
            });
        }
        let outside = !width_mask(n_qubits);
        if (x | z) & outside != 0 {
            return Err(Error::InvalidArgument(format!(
                "mask has bits set beyond qubit {}",
                n_qubits - 1
            )));
        }
        Ok(PauliString { n_qubits, x, z })
    }

    pub fn identity(n_qubits: usize) -> Result<PauliString> {
        PauliString::from_masks(n_qubits, 0, 0)
    }

    /// A string with `letter` on qubit `q` and identity elsewhere.
    pub fn single(n_qubits: usize, q: usize, letter: Pauli) -> Result<PauliString> {
        PauliString::from_letters(n_qubits, &[(q, letter)])
    }

    /// Builds a string from `(qubit, letter)` pairs; unspecified qubits get `I`.
    pub fn from_letters(n_qubits: usize, letters: &[(usize, Pauli)]) -> Result<PauliString> {
        let mut s = PauliString::identity(n_qubits)?;
        for &(q, p) in letters {
            if q >= n_qubits {
                return Err(Error::DimensionMismatch {
                    expected: n_qubits,
                    found: q + 1,
                });
            }
            s = s.with_letter(q, p);
        }
        Ok(s)
    }

    /// Copy of `self` with qubit `q` replaced by `letter`. Panics if `q` is out of range.
    pub fn with_letter(mut self, q: usize, letter: Pauli) -> PauliString {
        assert!(q < self.n_qubits, "qubit {q} out of range");
        let bit = 1u64 << q;
        let (xb, zb) = letter.bits();
        self.x = (self.x & !bit) | if xb { bit } else { 0 };
        self.z = (self.z & !bit) | if zb { bit } else { 0 };
        self
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn letter(&self, q: usize) -> Pauli {
        Pauli::from_bits(self.x >> q & 1 == 1, self.z >> q & 1 == 1)
    }

    pub fn is_identity(&self) -> bool {
        self.x | self.z == 0
    }

    /// True when every letter is `I` or `Z`.
    pub fn is_diagonal(&self) -> bool {
        self.x == 0
    }

    pub fn support_mask(&self) -> u64 {
        self.x | self.z
    }

    /// Qubits carrying a non-identity letter, ascending.
    pub fn support(&self) -> Vec<usize> {
        let mut mask = self.support_mask();
        let mut out = Vec::with_capacity(mask.count_ones() as usize);
        while mask != 0 {
            out.push(mask.trailing_zeros() as usize);
            mask &= mask - 1;
        }
        out
    }

    pub fn weight(&self) -> usize {
        self.support_mask().count_ones() as usize
    }

    pub fn count_y(&self) -> usize {
        (self.x & self.z).count_ones() as usize
    }

    /// True when the two strings commute (symplectic inner product is zero).
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// Exact operator product `self · other` with its global phase.
    pub fn multiply(&self, other: &PauliString) -> Result<PhasedPauli> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        Ok(self.mul_unchecked(other))
    }

    pub(crate) fn mul_unchecked(&self, other: &PauliString) -> PhasedPauli {
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        // i^{|xa&za|} X^xa Z^za · i^{|xb&zb|} X^xb Z^zb
        //   = i^{|xa&za| + |xb&zb| + 2|za&xb|} X^x Z^z
        //   = i^{... - |x&z|} · (i^{|x&z|} X^x Z^z)
        let k = (self.x & self.z).count_ones() as i64
            + (other.x & other.z).count_ones() as i64
            + 2 * (self.z & other.x).count_ones() as i64
            - (x & z).count_ones() as i64;
        PhasedPauli {
            phase: Phase::from_exponent(k),
            string: PauliString {
                n_qubits: self.n_qubits,
                x,
                z,
            },
        }
    }

    /// Canonical sort key: X mask first, then Z mask.
    fn key(&self) -> (usize, u64, u64) {
        (self.n_qubits, self.x, self.z)
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PauliString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n_qubits {
            write!(f, "{}", self.letter(q).as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<PauliString> {
        let letters: Vec<Pauli> = s
            .trim()
            .chars()
            .map(Pauli::from_char)
            .collect::<Result<_>>()?;
        let mut out = PauliString::identity(letters.len())?;
        for (q, p) in letters.into_iter().enumerate() {
            out = out.with_letter(q, p);
        }
        Ok(out)
    }
}

/// A Pauli string with a fourth-root-of-unity prefactor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PhasedPauli {
    pub phase: Phase,
    pub string: PauliString,
}

impl PhasedPauli {
    pub fn new(phase: Phase, string: PauliString) -> PhasedPauli {
        PhasedPauli { phase, string }
    }

    pub fn multiply(&self, other: &PhasedPauli) -> Result<PhasedPauli> {
        let p = self.string.multiply(&other.string)?;
        Ok(PhasedPauli {
            phase: self.phase * other.phase * p.phase,
            string: p.string,
        })
    }
}

impl From<PauliString> for PhasedPauli {
    fn from(string: PauliString) -> Self {
        PhasedPauli {
            phase: Phase::ONE,
            string,
        }
    }
}

impl fmt::Display for PhasedPauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.phase, self.string)
    }
}

/// Free-function form of [`PauliString::multiply`].
pub fn multiply(a: &PauliString, b: &PauliString) -> Result<PhasedPauli> {
    a.multiply(b)
}

/// Free-function form of [`PauliString::support`].
pub fn support(p: &PauliString) -> Vec<usize> {
    p.support()
}
