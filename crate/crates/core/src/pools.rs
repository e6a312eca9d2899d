//! Expansion pools for the Hermitian generator of each imaginary-time step.
//!
//! * `LA`: every string on the term's support plus all of its interaction set.
//! * `eLA-D`: union over `(D-k)`-subsets of the interaction set.
//! * `NLA-D`: one shared pool of every string of weight `1..=D`.
//! * `NLA-D2.5`: `NLA-D2` plus the per-term `eLA-D3` strings, shared.
//!
//! Pools never contain the identity and are kept in canonical
//! [`PauliString`] order without duplicates.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::pauli::{Pauli, PauliString};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    La,
    Ela,
    Nla,
    Nla25,
}

impl Method {
    /// LA and eLA build one pool per partial Hamiltonian.
    pub fn per_term(self) -> bool {
        matches!(self, Method::La | Method::Ela)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::La => "LA",
            Method::Ela => "eLA",
            Method::Nla => "NLA",
            Method::Nla25 => "NLA-D2.5",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::La => "la",
            Method::Ela => "ela",
            Method::Nla => "nla",
            Method::Nla25 => "nla25",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Method> {
        match s.trim().to_ascii_lowercase().as_str() {
            "la" => Ok(Method::La),
            "ela" => Ok(Method::Ela),
            "nla" => Ok(Method::Nla),
            "nla25" | "nla2.5" | "nla-d2.5" => Ok(Method::Nla25),
            other => Err(Error::UnsupportedMethod(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DomainSpec {
    pub method: Method,
    /// Maximum string weight `D`. Ignored for `NLA-D2.5`.
    pub domain_size: usize,
}

impl DomainSpec {
    pub fn new(method: Method, domain_size: usize) -> DomainSpec {
        DomainSpec {
            method,
            domain_size,
        }
    }

    pub fn per_term(&self) -> bool {
        self.method.per_term()
    }

    /// Label such as `NLA-D2` or `NLA-D2.5`.
    pub fn label(&self) -> String {
        match self.method {
            Method::Nla25 => "NLA-D2.5".into(),
            m => format!("{}-D{}", m.name(), self.domain_size),
        }
    }

    /// Checks `D` against every partial Hamiltonian of `h`.
    pub fn validate(&self, h: &Hamiltonian) -> Result<()> {
        let d = self.domain_size;
        match self.method {
            Method::Nla => {
                if d == 0 || d > h.n_qubits() {
                    return Err(Error::InvalidDomain {
                        method: "NLA",
                        reason: format!("need 1 <= D <= {}, got {d}", h.n_qubits()),
                    });
                }
            }
            Method::Nla25 => {}
            Method::La | Method::Ela => {
                for m in 0..h.n_terms() {
                    let k = h.terms()[m].string.weight();
                    let full = k + interaction_set(h, m).len();
                    let ok = match self.method {
                        Method::La => d == k || d == full,
                        _ => k <= d && d <= full,
                    };
                    if !ok {
                        let reason = if self.method == Method::La {
                            format!("term {m} admits D = {k} or D = {full}, got {d}")
                        } else {
                            format!("term {m} needs {k} <= D <= {full}, got {d}")
                        };
                        return Err(Error::InvalidDomain {
                            method: self.method.name(),
                            reason,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Canonically ordered, duplicate-free, identity-free list of strings.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Pool {
    strings: Vec<PauliString>,
}

impl Pool {
    pub fn from_set(set: BTreeSet<PauliString>) -> Pool {
        Pool {
            strings: set.into_iter().filter(|s| !s.is_identity()).collect(),
        }
    }

    pub fn strings(&self) -> &[PauliString] {
        &self.strings
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    pub fn to_set(&self) -> BTreeSet<PauliString> {
        self.strings.iter().copied().collect()
    }

    /// Position of `s` in the pool, if present.
    pub fn index_of(&self, s: &PauliString) -> Option<usize> {
        self.strings.binary_search(s).ok()
    }

    /// One string per line in text form.
    pub fn dump(&self) -> String {
        let mut out = String::with_capacity(self.strings.len() * 12);
        for s in &self.strings {
            out.push_str(&s.to_string());
            out.push('\n');
        }
        out
    }
}

/// Pools for a whole Hamiltonian: one shared pool or one per term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pools {
    Shared(Pool),
    PerTerm(Vec<Pool>),
}

impl Pools {
    pub fn for_term(&self, m: usize) -> &Pool {
        match self {
            Pools::Shared(p) => p,
            Pools::PerTerm(v) => &v[m],
        }
    }

    pub fn is_shared(&self) -> bool {
        matches!(self, Pools::Shared(_))
    }

    /// Pool sizes, one entry for a shared pool.
    pub fn sizes(&self) -> Vec<usize> {
        match self {
            Pools::Shared(p) => vec![p.len()],
            Pools::PerTerm(v) => v.iter().map(Pool::len).collect(),
        }
    }
}

/// Qubits outside `support(h[m])` that some other term couples to it.
pub fn interaction_set(h: &Hamiltonian, m: usize) -> Vec<usize> {
    let own = h.terms()[m].string.support_mask();
    let mut mask = 0u64;
    for (i, t) in h.terms().iter().enumerate() {
        let other = t.string.support_mask();
        if i != m && other & own != 0 {
            mask |= other & !own;
        }
    }
    let mut out = Vec::new();
    while mask != 0 {
        out.push(mask.trailing_zeros() as usize);
        mask &= mask - 1;
    }
    out
}

/// Every non-identity string supported inside `qubits`.
fn strings_on(n: usize, qubits: &[usize], out: &mut BTreeSet<PauliString>) -> Result<()> {
    const LETTERS: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    let total = 4usize
        .checked_pow(qubits.len() as u32)
        .ok_or(Error::Capacity {
            what: "pool domain",
            requested: qubits.len(),
            limit: 30,
        })?;
    let base = PauliString::identity(n)?;
    for code in 1..total {
        let mut s = base;
        let mut c = code;
        for &q in qubits {
            s = s.with_letter(q, LETTERS[c % 4]);
            c /= 4;
        }
        out.insert(s);
    }
    Ok(())
}

/// Calls `f` with every `k`-subset of `items`, in lexicographic order.
fn for_each_subset<F: FnMut(&[usize]) -> Result<()>>(
    items: &[usize],
    k: usize,
    mut f: F,
) -> Result<()> {
    if k > items.len() {
        return Ok(());
    }
    let n = items.len();
    let mut idx: Vec<usize> = (0..k).collect();
    let mut chosen = vec![0usize; k];
    'outer: loop {
        for (c, &i) in chosen.iter_mut().zip(&idx) {
            *c = items[i];
        }
        f(&chosen)?;
        let mut i = k;
        while i > 0 {
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                continue 'outer;
            }
        }
        return Ok(());
    }
}

/// Every string of weight exactly `w` on `n` qubits.
fn strings_of_weight(n: usize, w: usize, out: &mut BTreeSet<PauliString>) -> Result<()> {
    let qubits: Vec<usize> = (0..n).collect();
    let base = PauliString::identity(n)?;
    let combos = 3usize.pow(w as u32);
    for_each_subset(&qubits, w, |subset| {
        for code in 0..combos {
            let mut s = base;
            let mut c = code;
            for &q in subset {
                s = s.with_letter(q, Pauli::NON_IDENTITY[c % 3]);
                c /= 3;
            }
            out.insert(s);
        }
        Ok(())
    })
}

fn ela_strings(h: &Hamiltonian, m: usize, d: usize, out: &mut BTreeSet<PauliString>) -> Result<()> {
    let term = h.terms()[m].string;
    let own = term.support();
    let neighbours = interaction_set(h, m);
    let extra = d.saturating_sub(own.len());
    for_each_subset(&neighbours, extra, |chosen| {
        let mut qubits = own.clone();
        qubits.extend_from_slice(chosen);
        strings_on(h.n_qubits(), &qubits, out)
    })
}

/// Builds the pool of one method. `m` is required for per-term methods and
/// ignored otherwise.
pub fn build_pool(spec: &DomainSpec, h: &Hamiltonian, m: Option<usize>) -> Result<Pool> {
    spec.validate(h)?;
    let n = h.n_qubits();
    let bound = pool_size_bound(spec, h, m);
    if bound > MAX_POOL_SIZE as u128 {
        return Err(Error::Capacity {
            what: "pool strings",
            requested: usize::try_from(bound).unwrap_or(usize::MAX),
            limit: MAX_POOL_SIZE,
        });
    }
    let mut set = BTreeSet::new();
    match spec.method {
        Method::La | Method::Ela => {
            let m = m.ok_or_else(|| {
                Error::InvalidArgument(format!("{} pools need a term index", spec.method.name()))
            })?;
            if m >= h.n_terms() {
                return Err(Error::InvalidArgument(format!(
                    "term index {m} out of range for {} terms",
                    h.n_terms()
                )));
            }
            ela_strings(h, m, spec.domain_size, &mut set)?;
        }
        Method::Nla => {
            for w in 1..=spec.domain_size {
                strings_of_weight(n, w, &mut set)?;
            }
        }
        Method::Nla25 => {
            for w in 1..=2.min(n) {
                strings_of_weight(n, w, &mut set)?;
            }
            for m in 0..h.n_terms() {
                let k = h.terms()[m].string.weight();
                let d = 3.min(k + interaction_set(h, m).len()).max(k);
                ela_strings(h, m, d, &mut set)?;
            }
        }
    }
    Ok(Pool::from_set(set))
}

/// Largest pool [`build_pool`] will enumerate.
pub const MAX_POOL_SIZE: usize = 1 << 22;

/// Upper bound on the pool size, before deduplication.
fn pool_size_bound(spec: &DomainSpec, h: &Hamiltonian, m: Option<usize>) -> u128 {
    let n = h.n_qubits();
    let nla = |d: usize| -> u128 {
        (1..=d.min(n))
            .map(|w| binomial(n, w).saturating_mul(3u128.saturating_pow(w as u32)))
            .fold(0u128, u128::saturating_add)
    };
    let ela = |m: usize, d: usize| -> u128 {
        let k = h.terms()[m].string.weight();
        let l = interaction_set(h, m).len();
        binomial(l, d.saturating_sub(k)).saturating_mul(4u128.saturating_pow(d as u32))
    };
    match spec.method {
        Method::Nla => nla(spec.domain_size),
        Method::La | Method::Ela => match m {
            Some(m) if m < h.n_terms() => ela(m, spec.domain_size),
            _ => 0,
        },
        Method::Nla25 => (0..h.n_terms())
            .map(|m| {
                let k = h.terms()[m].string.weight();
                ela(m, 3.min(k + interaction_set(h, m).len()).max(k))
            })
            .fold(nla(2), u128::saturating_add),
    }
}

/// Builds every pool `spec` needs for `h`.
pub fn build_pools(spec: &DomainSpec, h: &Hamiltonian) -> Result<Pools> {
    if spec.per_term() {
        spec.validate(h)?;
        (0..h.n_terms())
            .map(|m| build_pool(spec, h, Some(m)))
            .collect::<Result<Vec<_>>>()
            .map(Pools::PerTerm)
    } else {
        build_pool(spec, h, None).map(Pools::Shared)
    }
}

/// Closed-form scalings of the linear-system size and gate operations per qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scaling {
    pub linear_system_size: u128,
    pub gate_ops_per_qubit: f64,
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// LA/eLA: `4^D` and `4^D N_ham D / N_bit`. NLA: `4^D C(N_bit, D)` and
/// `4^D C(N_bit-1, D-1)`. NLA-D2.5 is bounded by its NLA-D3 value.
pub fn pool_size_scaling(method: Method, d: usize, n_bit: usize, n_ham: usize) -> Result<Scaling> {
    if n_bit == 0 {
        return Err(Error::InvalidArgument("n_bit must be positive".into()));
    }
    let d = if method == Method::Nla25 { 3 } else { d };
    if d == 0 {
        return Err(Error::InvalidArgument(
            "domain size must be positive".into(),
        ));
    }
    let four_d = 4u128.checked_pow(d as u32).ok_or(Error::Capacity {
        what: "domain size",
        requested: d,
        limit: 63,
    })?;
    Ok(match method {
        Method::La | Method::Ela => Scaling {
            linear_system_size: four_d,
            gate_ops_per_qubit: four_d as f64 * n_ham as f64 * d as f64 / n_bit as f64,
        },
        Method::Nla | Method::Nla25 => Scaling {
            linear_system_size: four_d * binomial(n_bit, d),
            gate_ops_per_qubit: four_d as f64 * binomial(n_bit - 1, d - 1) as f64,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::hamiltonian::maxcut_hamiltonian;

    fn petersen() -> Hamiltonian {
        maxcut_hamiltonian(&Graph::petersen()).unwrap()
    }

    #[test]
    fn subsets_enumerate_all() {
        let mut seen = Vec::new();
        for_each_subset(&[1, 2, 3, 4], 2, |s| {
            seen.push(s.to_vec());
            Ok(())
        })
        .unwrap();
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[0], vec![1, 2]);
        assert_eq!(seen[5], vec![3, 4]);
        let mut count = 0;
        for_each_subset(&[1, 2], 0, |_| {
            count += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(count, 1);
        for_each_subset(&[7], 1, |s| {
            assert_eq!(s, &[7]);
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn interaction_sets() {
        let h = petersen();
        for m in 0..h.n_terms() {
            assert_eq!(interaction_set(&h, m).len(), 4);
        }
        let k5 = maxcut_hamiltonian(&Graph::complete(5).unwrap()).unwrap();
        assert_eq!(interaction_set(&k5, 0), vec![2, 3, 4]);
        let edge = maxcut_hamiltonian(&Graph::unweighted(2, &[(0, 1)]).unwrap()).unwrap();
        assert!(interaction_set(&edge, 0).is_empty());
    }

    #[test]
    fn nla_d2_size() {
        let pool = build_pool(&DomainSpec::new(Method::Nla, 2), &petersen(), None).unwrap();
        assert_eq!(pool.len(), 435);
    }

    #[test]
    fn ela_d3_size() {
        let pool = build_pool(&DomainSpec::new(Method::Ela, 3), &petersen(), Some(0)).unwrap();
        assert_eq!(pool.len(), 207);
    }

    #[test]
    fn la_full_domain_k4() {
        let h = maxcut_hamiltonian(&Graph::complete(4).unwrap()).unwrap();
        let pool = build_pool(&DomainSpec::new(Method::La, 4), &h, Some(0)).unwrap();
        assert_eq!(pool.len(), 255);
    }

    #[test]
    fn la_rejects_intermediate_domain() {
        let h = petersen();
        for d in 3..=5 {
            let err = build_pool(&DomainSpec::new(Method::La, d), &h, Some(0)).unwrap_err();
            assert!(
                err.to_string().contains("domain size invalid for LA"),
                "{err}"
            );
        }
        assert!(DomainSpec::new(Method::La, 6).validate(&h).is_ok());
        assert!(DomainSpec::new(Method::La, 2).validate(&h).is_ok());
        assert!(DomainSpec::new(Method::Ela, 7).validate(&h).is_err());
        assert!(DomainSpec::new(Method::Ela, 1).validate(&h).is_err());
        assert!(DomainSpec::new(Method::Nla, 11).validate(&h).is_err());
    }

    #[test]
    fn per_term_needs_index() {
        let h = petersen();
        assert!(build_pool(&DomainSpec::new(Method::Ela, 3), &h, None).is_err());
        assert!(build_pool(&DomainSpec::new(Method::Ela, 3), &h, Some(99)).is_err());
    }

    #[test]
    fn pool_is_sorted_and_dumpable() {
        let h = maxcut_hamiltonian(&Graph::complete(3).unwrap()).unwrap();
        let pool = build_pool(&DomainSpec::new(Method::Nla, 1), &h, None).unwrap();
        assert!(pool.strings().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(pool.dump().lines().count(), 9);
        assert!(pool.index_of(&"IZI".parse().unwrap()).is_some());
    }

    #[test]
    fn nla25_petersen_size() {
        // 435 strings of weight <= 2 plus 27 weight-3 strings on each of the
        // 30 length-2 paths of the Petersen graph.
        let pool = build_pool(&DomainSpec::new(Method::Nla25, 0), &petersen(), None).unwrap();
        assert_eq!(pool.len(), 435 + 30 * 27);
    }

    #[test]
    fn scaling_values() {
        let la = pool_size_scaling(Method::La, 6, 10, 15).unwrap();
        assert_eq!(la.linear_system_size, 4096);
        assert_eq!(la.gate_ops_per_qubit, 36864.0);
        let nla = pool_size_scaling(Method::Nla, 2, 10, 15).unwrap();
        assert_eq!(nla.linear_system_size, 720);
        assert_eq!(nla.gate_ops_per_qubit, 16.0 * 9.0);
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn method_parsing() {
        assert_eq!("NLA".parse::<Method>().unwrap(), Method::Nla);
        assert_eq!("nla2.5".parse::<Method>().unwrap(), Method::Nla25);
        assert!("qaoa".parse::<Method>().is_err());
        assert_eq!(DomainSpec::new(Method::Ela, 3).label(), "eLA-D3");
    }
}
