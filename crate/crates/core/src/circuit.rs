//! Gate-level compilation of Pauli rotations, depth scheduling and resource counts.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::pauli::{Pauli, PauliString};
use crate::pools::{build_pool, pool_size_scaling, DomainSpec, Pool, Pools};
use crate::qite::{Evaluation, Trajectory};
use crate::statevec::StateVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Gate {
    H(usize),
    Rx(usize, f64),
    Rz(usize, f64),
    Cnot { control: usize, target: usize },
}

impl Gate {
    pub fn name(&self) -> &'static str {
        match self {
            Gate::H(_) => "H",
            Gate::Rx(..) => "RX",
            Gate::Rz(..) => "RZ",
            Gate::Cnot { .. } => "CNOT",
        }
    }

    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::H(q) | Gate::Rx(q, _) | Gate::Rz(q, _) => (q, None),
            Gate::Cnot { control, target } => (control, Some(target)),
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Cnot { .. })
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Rx(_, a) | Gate::Rz(_, a) => Some(a),
            _ => None,
        }
    }

    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::Rx(q, a) => Gate::Rx(q, -a),
            Gate::Rz(q, a) => Gate::Rz(q, -a),
            g => g,
        }
    }

    /// 2×2 unitary of a single-qubit gate, row-major.
    pub fn matrix_1q(&self) -> Option<[Complex64; 4]> {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        match *self {
            Gate::H(_) => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                Some([c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)])
            }
            Gate::Rx(_, a) => {
                let (sn, cs) = (a / 2.0).sin_cos();
                Some([c(cs, 0.0), c(0.0, -sn), c(0.0, -sn), c(cs, 0.0)])
            }
            Gate::Rz(_, a) => {
                let (sn, cs) = (a / 2.0).sin_cos();
                Some([c(cs, -sn), c(0.0, 0.0), c(0.0, 0.0), c(cs, sn)])
            }
            Gate::Cnot { .. } => None,
        }
    }

    fn check(&self, n_qubits: usize) -> Result<()> {
        let (a, b) = self.qubits();
        for q in std::iter::once(a).chain(b) {
            if q >= n_qubits {
                return Err(Error::DimensionMismatch {
                    expected: n_qubits,
                    found: q + 1,
                });
            }
        }
        if b == Some(a) {
            return Err(Error::InvalidArgument(format!(
                "CNOT control equals target ({a})"
            )));
        }
        if self.angle().is_some_and(|x| !x.is_finite()) {
            return Err(Error::NonFinite("gate angle"));
        }
        Ok(())
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Gate::H(q) => write!(f, "H {q}"),
            Gate::Rx(q, a) => write!(f, "RX {q} {a:.17e}"),
            Gate::Rz(q, a) => write!(f, "RZ {q} {a:.17e}"),
            Gate::Cnot { control, target } => write!(f, "CNOT {control} {target}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Circuit {
        Circuit {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, g: Gate) -> Result<()> {
        g.check(self.n_qubits)?;
        self.gates.push(g);
        Ok(())
    }

    pub fn append(&mut self, other: &Circuit) -> Result<()> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        self.gates.extend_from_slice(&other.gates);
        Ok(())
    }

    pub fn cnot_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_two_qubit()).count()
    }

    pub fn depth(&self) -> usize {
        depth(self)
    }

    /// Reversed circuit with every gate inverted.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
        }
    }

    pub fn apply(&self, s: &mut StateVector) -> Result<()> {
        if s.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: s.n_qubits(),
            });
        }
        let amps = s.amps_mut();
        for g in &self.gates {
            apply_gate(amps, g);
        }
        Ok(())
    }

    /// One gate per line, `KIND q0 [q1] [angle]`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for g in &self.gates {
            out.push_str(&g.to_string());
            out.push('\n');
        }
        out
    }
}

fn apply_gate(amps: &mut [Complex64], g: &Gate) {
    match *g {
        Gate::Cnot { control, target } => {
            let (cb, tb) = (1usize << control, 1usize << target);
            for k in 0..amps.len() {
                if k & cb != 0 && k & tb == 0 {
                    amps.swap(k, k | tb);
                }
            }
        }
        _ => {
            let (q, _) = g.qubits();
            let m = g.matrix_1q().expect("single-qubit gate");
            let bit = 1usize << q;
            for k in 0..amps.len() {
                if k & bit == 0 {
                    let (a0, a1) = (amps[k], amps[k | bit]);
                    amps[k] = m[0] * a0 + m[1] * a1;
                    amps[k | bit] = m[2] * a0 + m[3] * a1;
                }
            }
        }
    }
}

/// Emits the gates of `exp(-iθP)` in order: basis change, CNOT ladder over
/// the ascending support, `RZ(2θ)` on the last qubit, ladder back, undo.
pub fn for_each_rotation_gate(p: &PauliString, theta: f64, mut f: impl FnMut(Gate)) -> Result<()> {
    if p.is_identity() {
        return Err(Error::IdentityString);
    }
    if !theta.is_finite() {
        return Err(Error::NonFinite("rotation angle"));
    }
    let support = p.support();
    for &q in &support {
        match p.letter(q) {
            Pauli::X => f(Gate::H(q)),
            Pauli::Y => f(Gate::Rx(q, FRAC_PI_2)),
            _ => {}
        }
    }
    for w in support.windows(2) {
        f(Gate::Cnot {
            control: w[0],
            target: w[1],
        });
    }
    f(Gate::Rz(
        *support.last().expect("non-identity"),
        2.0 * theta,
    ));
    for w in support.windows(2).rev() {
        f(Gate::Cnot {
            control: w[0],
            target: w[1],
        });
    }
    for &q in &support {
        match p.letter(q) {
            Pauli::X => f(Gate::H(q)),
            Pauli::Y => f(Gate::Rx(q, -FRAC_PI_2)),
            _ => {}
        }
    }
    Ok(())
}

/// Circuit for `exp(-iθP)`.
pub fn compile_rotation(p: &PauliString, theta: f64) -> Result<Circuit> {
    let mut c = Circuit::new(p.n_qubits());
    for_each_rotation_gate(p, theta, |g| c.gates.push(g))?;
    Ok(c)
}

/// Ordered product of rotations `exp(-iΔτ a_I σ_I)`, skipping zero coefficients.
pub fn compile_generator(
    strings: &[PauliString],
    a: &[f64],
    dtau: f64,
    n_qubits: usize,
) -> Result<Circuit> {
    if strings.len() != a.len() {
        return Err(Error::DimensionMismatch {
            expected: strings.len(),
            found: a.len(),
        });
    }
    let mut c = Circuit::new(n_qubits);
    for (p, &ai) in strings.iter().zip(a) {
        if ai != 0.0 {
            if p.n_qubits() != n_qubits {
                return Err(Error::DimensionMismatch {
                    expected: n_qubits,
                    found: p.n_qubits(),
                });
            }
            for_each_rotation_gate(p, dtau * ai, |g| c.gates.push(g))?;
        }
    }
    Ok(c)
}

/// Greedy per-qubit frontier scheduler that never stores the gates.
#[derive(Debug, Clone, Default)]
pub struct DepthCounter {
    frontier: Vec<usize>,
    depth: usize,
    gates: usize,
    cnots: usize,
}

impl DepthCounter {
    pub fn new(n_qubits: usize) -> DepthCounter {
        DepthCounter {
            frontier: vec![0; n_qubits],
            ..DepthCounter::default()
        }
    }

    pub fn push(&mut self, g: &Gate) {
        let (a, b) = g.qubits();
        let level = match b {
            Some(b) => self.frontier[a].max(self.frontier[b]) + 1,
            None => self.frontier[a] + 1,
        };
        self.frontier[a] = level;
        if let Some(b) = b {
            self.frontier[b] = level;
            self.cnots += 1;
        }
        self.gates += 1;
        self.depth = self.depth.max(level);
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn gate_count(&self) -> usize {
        self.gates
    }

    pub fn cnot_count(&self) -> usize {
        self.cnots
    }
}

pub fn depth(c: &Circuit) -> usize {
    let mut d = DepthCounter::new(c.n_qubits);
    for g in &c.gates {
        d.push(g);
    }
    d.depth()
}

/// Gate and depth totals for one imaginary-time step with every coefficient nonzero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepResources {
    pub n_bit: usize,
    pub method: String,
    pub domain_size: usize,
    /// Rotations per step.
    pub operators: u64,
    pub gate_count: u64,
    pub cnot_count: u64,
    pub depth: u64,
    /// Largest exact `S` dimension over the step's solves.
    pub linear_system_size: usize,
    /// Closed-form linear-system size from the scaling table.
    pub table1_bound: u128,
}

impl StepResources {
    pub const CSV_HEADER: &'static str = "n_bit,method,D,gate_count,depth,table1_bound";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.n_bit,
            self.method,
            self.domain_size,
            self.gate_count,
            self.depth,
            self.table1_bound
        )
    }
}

fn count_pool(counter: &mut DepthCounter, pool: &Pool) -> Result<()> {
    for p in pool.strings() {
        for_each_rotation_gate(p, 1.0, |g| counter.push(&g))?;
    }
    Ok(())
}

fn finish_resources(
    h: &Hamiltonian,
    spec: &DomainSpec,
    counter: &DepthCounter,
    operators: u64,
    system: usize,
) -> Result<StepResources> {
    let scaling = pool_size_scaling(spec.method, spec.domain_size, h.n_qubits(), h.n_terms())?;
    Ok(StepResources {
        n_bit: h.n_qubits(),
        method: spec.method.name().to_string(),
        domain_size: spec.domain_size,
        operators,
        gate_count: counter.gate_count() as u64,
        cnot_count: counter.cnot_count() as u64,
        depth: counter.depth() as u64,
        linear_system_size: system,
        table1_bound: scaling.linear_system_size,
    })
}

/// Resources of one step from prebuilt pools. A shared pool is one pass per
/// step; per-term pools are one pass per partial Hamiltonian.
pub fn step_resources(h: &Hamiltonian, spec: &DomainSpec, pools: &Pools) -> Result<StepResources> {
    let mut counter = DepthCounter::new(h.n_qubits());
    let (mut ops, mut system) = (0u64, 0usize);
    match pools {
        Pools::Shared(p) => {
            count_pool(&mut counter, p)?;
            ops += p.len() as u64;
            system = p.len();
        }
        Pools::PerTerm(ps) => {
            for p in ps {
                count_pool(&mut counter, p)?;
                ops += p.len() as u64;
                system = system.max(p.len());
            }
        }
    }
    finish_resources(h, spec, &counter, ops, system)
}

/// Same as [`step_resources`] but builds per-term pools one at a time.
pub fn step_resources_streaming(h: &Hamiltonian, spec: &DomainSpec) -> Result<StepResources> {
    spec.validate(h)?;
    if !spec.per_term() {
        let pools = Pools::Shared(build_pool(spec, h, None)?);
        return step_resources(h, spec, &pools);
    }
    let mut counter = DepthCounter::new(h.n_qubits());
    let (mut ops, mut system) = (0u64, 0usize);
    for m in 0..h.n_terms() {
        let p = build_pool(spec, h, Some(m))?;
        count_pool(&mut counter, &p)?;
        ops += p.len() as u64;
        system = system.max(p.len());
    }
    finish_resources(h, spec, &counter, ops, system)
}

/// Circuits that reproduce a noiseless run, one per step (or per block for
/// compressed runs). Steps that applied a summed generator become one pass
/// over the shared pool; otherwise each term gets its own pass.
/// Uncompressed trajectories must have recorded their coefficients.
pub fn trajectory_circuits(
    traj: &Trajectory,
    pools: &Pools,
    n_qubits: usize,
) -> Result<Vec<Circuit>> {
    if !traj.blocks.is_empty() {
        let pool = match pools {
            Pools::Shared(p) => p,
            Pools::PerTerm(_) => {
                return Err(Error::UnsupportedMethod(
                    "compressed circuits need a shared pool".into(),
                ))
            }
        };
        return traj
            .blocks
            .iter()
            .map(|b| compile_generator(pool.strings(), &b.a_sum, traj.dtau, n_qubits))
            .collect();
    }
    let mut out = Vec::new();
    for step in traj.steps.iter().skip(1) {
        if step.solves.iter().any(|s| s.a.is_empty()) {
            return Err(Error::InvalidArgument(
                "trajectory has no recorded coefficients".into(),
            ));
        }
        match pools {
            Pools::Shared(pool) if traj.evaluation == Evaluation::StepState => {
                let mut sum = vec![0.0; pool.len()];
                for s in &step.solves {
                    for (acc, v) in sum.iter_mut().zip(&s.a) {
                        *acc += v;
                    }
                }
                out.push(compile_generator(
                    pool.strings(),
                    &sum,
                    traj.dtau,
                    n_qubits,
                )?);
            }
            _ => {
                let mut c = Circuit::new(n_qubits);
                for s in &step.solves {
                    let pool = pools.for_term(s.term);
                    c.append(&compile_generator(
                        pool.strings(),
                        &s.a,
                        traj.dtau,
                        n_qubits,
                    )?)?;
                }
                out.push(c);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn zz_rotation_gates() {
        let c = compile_rotation(&ps("ZZ"), 0.3).unwrap();
        assert_eq!(
            c.gates(),
            &[
                Gate::Cnot {
                    control: 0,
                    target: 1
                },
                Gate::Rz(1, 0.6),
                Gate::Cnot {
                    control: 0,
                    target: 1
                }
            ]
        );
        assert_eq!(c.depth(), 3);
    }

    #[test]
    fn single_z_is_one_gate() {
        let c = compile_rotation(&ps("Z"), 0.25).unwrap();
        assert_eq!(c.gates(), &[Gate::Rz(0, 0.5)]);
    }

    #[test]
    fn gate_count_formula() {
        let p = ps("XYIZY");
        let c = compile_rotation(&p, 0.1).unwrap();
        // 2(w-1) + 1 + 2#X + 2#Y
        assert_eq!(c.len(), 2 * 3 + 1 + 2 + 4);
        assert_eq!(c.cnot_count(), 6);
    }

    #[test]
    fn identity_rejected() {
        assert_eq!(compile_rotation(&ps("II"), 0.1), Err(Error::IdentityString));
    }

    #[test]
    fn depth_cases() {
        assert_eq!(Circuit::new(3).depth(), 0);
        let mut c = Circuit::new(2);
        c.push(Gate::H(0)).unwrap();
        c.push(Gate::Rz(1, 0.2)).unwrap();
        assert_eq!(c.depth(), 1);
        let mut c = Circuit::new(2);
        c.push(Gate::Cnot {
            control: 0,
            target: 1,
        })
        .unwrap();
        c.push(Gate::Rz(1, 0.1)).unwrap();
        c.push(Gate::Cnot {
            control: 0,
            target: 1,
        })
        .unwrap();
        assert_eq!(c.depth(), 3);
    }

    #[test]
    fn push_validates() {
        let mut c = Circuit::new(2);
        assert!(c.push(Gate::H(2)).is_err());
        assert!(c
            .push(Gate::Cnot {
                control: 1,
                target: 1
            })
            .is_err());
        assert!(c.push(Gate::Rz(0, f64::NAN)).is_err());
    }

    #[test]
    fn matches_state_rotation() {
        let mut s = StateVector::uniform(3).unwrap();
        s.rotate(&ps("YIX"), 0.4).unwrap();
        let p = ps("XYZ");
        let expected = s.apply_rotation(&p, 0.3).unwrap();
        let mut got = s.clone();
        compile_rotation(&p, 0.3).unwrap().apply(&mut got).unwrap();
        let diff = got
            .amplitudes()
            .iter()
            .zip(expected.amplitudes())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn text_dump() {
        let c = compile_rotation(&ps("YZ"), 0.5).unwrap();
        let text = c.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with("RX 0 1.5707963"));
        assert_eq!(lines[1], "CNOT 0 1");
        assert!(lines[2].starts_with("RZ 1 1.0000"));
    }

    #[test]
    fn resource_counts() {
        use crate::graph::Graph;
        use crate::hamiltonian::maxcut_hamiltonian;
        use crate::pools::Method;
        let h = maxcut_hamiltonian(&Graph::petersen()).unwrap();
        let r = step_resources_streaming(&h, &DomainSpec::new(Method::Nla, 2)).unwrap();
        assert_eq!(r.operators, 435);
        assert_eq!(r.table1_bound, 16 * 45);
        let la = step_resources_streaming(&h, &DomainSpec::new(Method::La, 6)).unwrap();
        assert_eq!(la.operators, 15 * 4095);
        assert_eq!(la.linear_system_size, 4095);
        assert!(la.depth >= 100 * r.depth, "{} vs {}", la.depth, r.depth);
    }
}
