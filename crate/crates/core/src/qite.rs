//! The QITE driver.
//!
//! For each partial Hamiltonian `h[m] = c·P_m` the unitary `exp(-iΔτ A)` with
//! `A = Σ_I a_I σ_I` is fitted to the normalized action of `exp(-Δτ h[m])` on
//! the current state. To first order in `Δτ` that is the real least-squares
//! problem
//!
//! ```text
//!   min_a ‖ Σ_I a_I σ_I|ψ⟩ + i h[m]|ψ⟩ ‖²
//!   ⇔  Re⟨σ_I σ_J⟩ a_J = Im⟨σ_I h[m]⟩
//! ```
//!
//! which is solved with a small ridge term. The constant offset of `h[m]`
//! drops out of the right-hand side because `⟨σ_I⟩` is real.
//!
//! Internally the solve is restricted to the symmetry sector picked out by the
//! state: when `ψ` and `h[m]` are real, only strings with an odd number of `Y`
//! can enter, and when `ψ` is an eigenstate of the global flip `X^⊗n` that
//! commutes with `h[m]`, only strings commuting with the flip can enter. The
//! discarded blocks of `S` decouple exactly and carry a zero right-hand side,
//! so the reduced solution equals the full one.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{
    brute_force_spectrum, spectral_decomposition, Hamiltonian, Spectrum, Term,
};
use crate::pauli::PauliString;
use crate::pools::{build_pools, DomainSpec, Pool, Pools};
use crate::statevec::StateVector;

pub const DEFAULT_RIDGE: f64 = 1e-8;

/// Largest register for which [`UpdateMode::ExactExponential`] is allowed.
pub const MAX_EXACT_UPDATE_QUBITS: usize = 10;

const SYMMETRY_TOL: f64 = 1e-12;

/// Full linear system for one partial Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    /// `Re⟨ψ|σ_I σ_J|ψ⟩`
    pub s: DMatrix<f64>,
    /// `Im⟨ψ|σ_I h[m]|ψ⟩`
    pub b: DVector<f64>,
    /// `⟨ψ|exp(-2Δτ c P_m)|ψ⟩`, the normalization of the target state.
    pub c: f64,
}

/// How the fitted generator is turned into a state update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// Ordered product of single-string rotations in pool order.
    #[default]
    ProductFormula,
    /// `exp(-iΔτ A)` applied exactly (Taylor series on the vector).
    ExactExponential,
}

/// Per-term solve record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepSolve {
    pub term: usize,
    /// Coefficients over the term's pool. Empty unless coefficients are recorded.
    pub a: Vec<f64>,
    /// `‖ exp(-Δτh)ψ/√c − exp(-iΔτA)ψ ‖²` after the update.
    pub residual: f64,
    /// Condition estimate from the factorization (`(max L_ii / min L_ii)^2`).
    pub gram_cond: f64,
    /// Number of unknowns left after the symmetry reduction.
    pub reduced_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EarlyStop {
    pub tol: f64,
    pub window: usize,
}

impl Default for EarlyStop {
    fn default() -> Self {
        EarlyStop {
            tol: 1e-10,
            window: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOptions {
    pub dtau: f64,
    pub n_steps: usize,
    pub ridge: f64,
    pub compress: bool,
    pub update: UpdateMode,
    pub evaluation: Evaluation,
    /// Keep every coefficient vector in the trajectory.
    pub record_coefficients: bool,
    pub early_stop: Option<EarlyStop>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            dtau: 0.01,
            n_steps: 1000,
            ridge: DEFAULT_RIDGE,
            compress: false,
            update: UpdateMode::ProductFormula,
            evaluation: Evaluation::StepState,
            record_coefficients: false,
            early_stop: None,
        }
    }
}

impl RunOptions {
    pub fn new(dtau: f64, n_steps: usize) -> RunOptions {
        RunOptions {
            dtau,
            n_steps,
            ..RunOptions::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dtau > 0.0) || !self.dtau.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "dtau must be positive, got {}",
                self.dtau
            )));
        }
        if !(self.ridge >= 0.0) || !self.ridge.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "ridge must be non-negative, got {}",
                self.ridge
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub tau: f64,
    pub energy: f64,
    pub r: f64,
    /// `(E, n(E))` in ascending energy.
    pub populations: Vec<(f64, f64)>,
    pub solves: Vec<StepSolve>,
}

impl StepRecord {
    pub fn total_residual(&self) -> f64 {
        self.solves.iter().map(|s| s.residual).sum()
    }
}

/// A run of consecutive steps merged into one exponential.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompressionBlock {
    pub start_step: usize,
    pub end_step: usize,
    pub n_comp: usize,
    /// Summed coefficients over the shared pool.
    pub a_sum: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub spec: DomainSpec,
    pub dtau: f64,
    pub evaluation: Evaluation,
    pub ground_energy: f64,
    pub pool_sizes: Vec<usize>,
    /// Record 0 is the initial state.
    pub steps: Vec<StepRecord>,
    /// Only filled by compressed runs.
    pub blocks: Vec<CompressionBlock>,
    pub stopped_early: bool,
    #[serde(skip)]
    pub final_state: StateVector,
}

impl Trajectory {
    pub fn final_energy(&self) -> f64 {
        self.steps.last().map(|s| s.energy).unwrap_or(f64::NAN)
    }

    pub fn final_r(&self) -> f64 {
        self.steps.last().map(|s| s.r).unwrap_or(f64::NAN)
    }

    pub fn energies(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.energy).collect()
    }
}

/// `r = E / E_GS`; only defined for a negative ground energy.
pub fn figure_of_merit(energy: f64, ground_energy: f64) -> Result<f64> {
    if !(ground_energy < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "figure of merit needs a negative ground energy, got {ground_energy}"
        )));
    }
    Ok(energy / ground_energy)
}

fn check_term(s: &StateVector, term: &Term) -> Result<()> {
    if term.string.n_qubits() != s.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: s.n_qubits(),
            found: term.string.n_qubits(),
        });
    }
    Ok(())
}

/// `⟨ψ|exp(-2Δτ c P)|ψ⟩ = cosh(2Δτc) − sinh(2Δτc)⟨P⟩`.
fn normalization(s: &StateVector, term: &Term, dtau: f64) -> f64 {
    let x = 2.0 * dtau * term.coeff;
    x.cosh() - x.sinh() * s.string_expectation(&term.string).re
}

/// Assembles the full (unreduced) system for one term.
pub fn assemble_system(
    s: &StateVector,
    pool: &Pool,
    term: &Term,
    dtau: f64,
) -> Result<LinearSystem> {
    check_term(s, term)?;
    if pool.is_empty() {
        return Err(Error::InvalidArgument("pool is empty".into()));
    }
    if let Some(p) = pool.strings().first() {
        if p.n_qubits() != s.n_qubits() {
            return Err(Error::DimensionMismatch {
                expected: s.n_qubits(),
                found: p.n_qubits(),
            });
        }
    }
    let keep: Vec<usize> = (0..pool.len()).collect();
    let sector = Sector::full(s.n_qubits());
    let (m, y) = embed(s, pool, &keep, term, &sector);
    let st = m.transpose();
    Ok(LinearSystem {
        s: &st * &m,
        b: &st * &y,
        c: normalization(s, term, dtau),
    })
}

/// Solves `(S + δI) a = b` by Cholesky, falling back to a pseudo-inverse.
pub fn solve_step(s: &DMatrix<f64>, b: &DVector<f64>, delta: f64) -> Result<DVector<f64>> {
    let n = s.nrows();
    if s.ncols() != n || b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if s.ncols() != n { s.ncols() } else { b.len() },
        });
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ridge must be >= 0, got {delta}"
        )));
    }
    let scale = s.amax().max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (s[(i, j)] - s[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::InvalidArgument(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let mut reg = s.clone();
    for i in 0..n {
        reg[(i, i)] += delta;
    }
    let a = match reg.clone().cholesky() {
        Some(ch) => ch.solve(b),
        None => pseudo_inverse_solve(reg, b)?,
    };
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("solution is not finite".into()));
    }
    Ok(a)
}

/// Minimum-norm least-squares solve through a symmetric eigendecomposition.
fn pseudo_inverse_solve(m: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = m.nrows();
    let eig = m.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let cutoff = lmax * f64::EPSILON * n.max(1) as f64;
    let proj = eig.eigenvectors.transpose() * b;
    let mut scaled = DVector::zeros(n);
    for i in 0..n {
        let l = eig.eigenvalues[i];
        if l.abs() > cutoff {
            scaled[i] = proj[i] / l;
        }
    }
    let a = &eig.eigenvectors * scaled;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver(
            "pseudo-inverse produced non-finite values".into(),
        ));
    }
    Ok(a)
}

/// Which real coordinates of `σ_I|ψ⟩` enter the Gram matrix.
#[derive(Debug, Clone)]
struct Sector {
    /// Keep only strings with an odd number of Y; use imaginary parts only.
    real: bool,
    /// Keep only strings commuting with `X^⊗n`; use half the basis, scaled by √2.
    flip: bool,
    n_qubits: usize,
}

impl Sector {
    fn full(n_qubits: usize) -> Sector {
        Sector {
            real: false,
            flip: false,
            n_qubits,
        }
    }

    fn detect(s: &StateVector, term: &Term) -> Sector {
        let amps = s.amplitudes();
        let term_real = term.string.count_y() % 2 == 0;
        let real = term_real && amps.iter().all(|a| a.im.abs() <= SYMMETRY_TOL);
        let dim = amps.len();
        let flip_commutes = term.string.z_mask().count_ones() % 2 == 0;
        let flip = flip_commutes
            && [1.0, -1.0].iter().any(|&lam| {
                (0..dim / 2).all(|k| (amps[dim - 1 - k] - amps[k] * lam).norm() <= SYMMETRY_TOL)
            });
        Sector {
            real,
            flip,
            n_qubits: s.n_qubits(),
        }
    }

    fn admits(&self, p: &PauliString) -> bool {
        (!self.real || p.count_y() % 2 == 1) && (!self.flip || p.z_mask().count_ones() % 2 == 0)
    }

    fn basis_len(&self) -> usize {
        let dim = 1usize << self.n_qubits;
        if self.flip {
            dim / 2
        } else {
            dim
        }
    }

    fn rows(&self) -> usize {
        if self.real {
            self.basis_len()
        } else {
            2 * self.basis_len()
        }
    }

    fn write_column(&self, v: &[Complex64], col: &mut [f64]) {
        let len = self.basis_len();
        let f = if self.flip {
            std::f64::consts::SQRT_2
        } else {
            1.0
        };
        // with the flip symmetry the kept half is the one with the top bit clear
        if self.real {
            for k in 0..len {
                col[k] = f * v[k].im;
            }
        } else {
            for k in 0..len {
                col[k] = f * v[k].re;
                col[len + k] = f * v[k].im;
            }
        }
    }
}

/// Real embedding `M` (columns `σ_I|ψ⟩`) and target `y = -i h[m]|ψ⟩`.
fn embed(
    s: &StateVector,
    pool: &Pool,
    keep: &[usize],
    term: &Term,
    sector: &Sector,
) -> (DMatrix<f64>, DVector<f64>) {
    let rows = sector.rows();
    let mut m = DMatrix::<f64>::zeros(rows, keep.len());
    let mut scratch = vec![Complex64::new(0.0, 0.0); s.dim()];
    for (col, &idx) in keep.iter().enumerate() {
        s.pauli_image_into(&pool.strings()[idx], &mut scratch);
        sector.write_column(&scratch, m.column_mut(col).as_mut_slice());
    }
    s.pauli_image_into(&term.string, &mut scratch);
    let minus_i_c = Complex64::new(0.0, -term.coeff);
    for a in scratch.iter_mut() {
        *a *= minus_i_c;
    }
    let mut y = DVector::<f64>::zeros(rows);
    sector.write_column(&scratch, y.as_mut_slice());
    (m, y)
}

fn cond_estimate(l: &DMatrix<f64>) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..l.nrows() {
        let d = l[(i, i)].abs();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if lo == 0.0 {
        f64::INFINITY
    } else {
        (hi / lo).powi(2)
    }
}

enum Factor {
    /// Cholesky of `MᵀM + δ`
    Primal(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    /// Cholesky of `MMᵀ + δ`; `(MᵀM + δ)⁻¹ Mᵀ = Mᵀ (MMᵀ + δ)⁻¹`
    Dual(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    /// Both factorizations failed; `MᵀM` for the pseudo-inverse path.
    Gram(DMatrix<f64>),
}

/// A factored system in one symmetry sector.
struct Factored {
    real: bool,
    flip: bool,
    keep: Vec<usize>,
    mt: DMatrix<f64>,
    factor: Factor,
    ridge: f64,
    cond: f64,
}

impl Factored {
    fn matches(&self, sector: &Sector, keep: &[usize]) -> bool {
        self.real == sector.real && self.flip == sector.flip && self.keep == keep
    }

    fn build(
        m: DMatrix<f64>,
        sector: &Sector,
        keep: Vec<usize>,
        ridge: f64,
        allow_dual: bool,
    ) -> Factored {
        let (rows, p) = m.shape();
        let mt = m.transpose();
        let mut factor = None;
        let mut cond = f64::INFINITY;
        if allow_dual && p > rows {
            let mut k = &m * &mt;
            for i in 0..rows {
                k[(i, i)] += ridge;
            }
            if let Some(ch) = k.cholesky() {
                cond = cond_estimate(&ch.l());
                factor = Some(Factor::Dual(ch));
            }
        }
        let factor = match factor {
            Some(f) => f,
            None => {
                let g = &mt * &m;
                let mut reg = g.clone();
                for i in 0..p {
                    reg[(i, i)] += ridge;
                }
                match reg.cholesky() {
                    Some(ch) => {
                        cond = cond_estimate(&ch.l());
                        Factor::Primal(ch)
                    }
                    None => Factor::Gram(g),
                }
            }
        };
        Factored {
            real: sector.real,
            flip: sector.flip,
            keep,
            mt,
            factor,
            ridge,
            cond,
        }
    }

    /// Coefficients for target `y`; `m_now` overrides the stored `M` for `b = Mᵀy`.
    fn solve(
        &self,
        y: &DVector<f64>,
        m_now: Option<&DMatrix<f64>>,
        pool_len: usize,
    ) -> Result<Vec<f64>> {
        let b = || match m_now {
            Some(m) => m.tr_mul(y),
            None => &self.mt * y,
        };
        let sol = match &self.factor {
            Factor::Primal(ch) => ch.solve(&b()),
            Factor::Dual(ch) => &self.mt * ch.solve(y),
            Factor::Gram(g) => solve_step(g, &b(), self.ridge)?,
        };
        let mut a = vec![0.0; pool_len];
        for (k, &idx) in self.keep.iter().enumerate() {
            a[idx] = sol[k];
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver("coefficients are not finite".into()));
        }
        Ok(a)
    }
}

/// Where the linear systems of one Trotter step are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Evaluation {
    /// `S` and `b` for term `m` at the state left by terms `1..m-1`.
    PerTerm,
    /// `S` at the step's starting state, `b` at the running state (shared pools).
    ReuseGram,
    /// `S` and every `b[m]` at the step's starting state `Ψ_n`. A shared pool
    /// then applies the summed generator once per step.
    #[default]
    StepState,
}

impl std::str::FromStr for Evaluation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Evaluation> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "per_term" => Ok(Evaluation::PerTerm),
            "reuse_gram" => Ok(Evaluation::ReuseGram),
            "step_state" | "step" => Ok(Evaluation::StepState),
            _ => Err(Error::Parse(format!(
                "unknown evaluation {s:?} (per_term, reuse_gram, step_state)"
            ))),
        }
    }
}

impl std::str::FromStr for UpdateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<UpdateMode> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "product" | "product_formula" => Ok(UpdateMode::ProductFormula),
            "exact" | "exact_exponential" => Ok(UpdateMode::ExactExponential),
            _ => Err(Error::Parse(format!(
                "unknown update mode {s:?} (product_formula, exact_exponential)"
            ))),
        }
    }
}

struct Solved {
    a: Vec<f64>,
    cond: f64,
    reduced: usize,
}

fn sector_keep(s: &StateVector, pool: &Pool, term: &Term) -> (Sector, Vec<usize>) {
    let sector = Sector::detect(s, term);
    let keep = (0..pool.len())
        .filter(|&i| sector.admits(&pool.strings()[i]))
        .collect();
    (sector, keep)
}

/// Solves one term's system in its symmetry sector at state `s`. Returns
/// coefficients over the whole pool (zeros outside the sector).
fn solve_term(s: &StateVector, pool: &Pool, term: &Term, ridge: f64) -> Result<Solved> {
    let (sector, keep) = sector_keep(s, pool, term);
    if keep.is_empty() {
        return Ok(Solved {
            a: vec![0.0; pool.len()],
            cond: 1.0,
            reduced: 0,
        });
    }
    let (m, y) = embed(s, pool, &keep, term, &sector);
    let reduced = keep.len();
    let f = Factored::build(m, &sector, keep, ridge, true);
    Ok(Solved {
        a: f.solve(&y, None, pool.len())?,
        cond: f.cond,
        reduced,
    })
}

/// Solves at `s` using a factorization cached from `anchor`, (re)building it
/// at `anchor` when the sector changes.
fn solve_term_cached(
    anchor: &StateVector,
    s: &StateVector,
    pool: &Pool,
    term: &Term,
    ridge: f64,
    cache: &mut Option<Factored>,
) -> Result<Solved> {
    let same = std::ptr::eq(anchor, s);
    let (sector, keep) = sector_keep(s, pool, term);
    if keep.is_empty() {
        return Ok(Solved {
            a: vec![0.0; pool.len()],
            cond: 1.0,
            reduced: 0,
        });
    }
    if !cache.as_ref().is_some_and(|f| f.matches(&sector, &keep)) {
        let (anchor_sector, anchor_keep) = sector_keep(anchor, pool, term);
        if anchor_keep != keep
            || anchor_sector.real != sector.real
            || anchor_sector.flip != sector.flip
        {
            // the anchor sits in a different sector; nothing to reuse
            return solve_term(s, pool, term, ridge);
        }
        let (m, _) = embed(anchor, pool, &keep, term, &sector);
        *cache = Some(Factored::build(m, &sector, keep.clone(), ridge, same));
    }
    let f = cache.as_ref().expect("factorization cached above");
    let (m_now, y) = embed(s, pool, &keep, term, &sector);
    let a = if same {
        f.solve(&y, None, pool.len())?
    } else {
        f.solve(&y, Some(&m_now), pool.len())?
    };
    Ok(Solved {
        a,
        cond: f.cond,
        reduced: keep.len(),
    })
}

/// Applies `exp(-iΔτ Σ_I a_I σ_I)` to `s`.
pub fn apply_generator(
    s: &mut StateVector,
    strings: &[PauliString],
    a: &[f64],
    dtau: f64,
    mode: UpdateMode,
) -> Result<()> {
    if strings.len() != a.len() {
        return Err(Error::DimensionMismatch {
            expected: strings.len(),
            found: a.len(),
        });
    }
    if a.iter().all(|&v| v == 0.0) {
        return Ok(());
    }
    match mode {
        UpdateMode::ProductFormula => {
            for (p, &ai) in strings.iter().zip(a) {
                if ai != 0.0 {
                    s.rotate(p, dtau * ai)?;
                }
            }
        }
        UpdateMode::ExactExponential => {
            if s.n_qubits() > MAX_EXACT_UPDATE_QUBITS {
                return Err(Error::Capacity {
                    what: "exact-exponential update qubits",
                    requested: s.n_qubits(),
                    limit: MAX_EXACT_UPDATE_QUBITS,
                });
            }
            exact_exponential(s, strings, a, dtau);
        }
    }
    s.normalize()
}

/// `exp(-iΔτA)ψ` by scaled Taylor series; `‖A‖ ≤ Σ|a_I|` picks the substeps.
fn exact_exponential(s: &mut StateVector, strings: &[PauliString], a: &[f64], dtau: f64) {
    let active: Vec<(PauliString, f64)> = strings
        .iter()
        .zip(a)
        .filter(|(_, &v)| v != 0.0)
        .map(|(p, &v)| (*p, v))
        .collect();
    if active.is_empty() {
        return;
    }
    let bound: f64 = active.iter().map(|(_, v)| v.abs()).sum::<f64>() * dtau.abs();
    let substeps = bound.ceil().max(1.0) as usize;
    let h = dtau / substeps as f64;
    let dim = s.dim();
    let mut img = vec![Complex64::new(0.0, 0.0); dim];
    for _ in 0..substeps {
        let mut term = StateVector::from_raw(s.n_qubits(), s.amplitudes().to_vec());
        let mut acc = term.amplitudes().to_vec();
        for k in 1..200 {
            let mut next = vec![Complex64::new(0.0, 0.0); dim];
            for (p, v) in &active {
                term.pauli_image_into(p, &mut img);
                for (n, x) in next.iter_mut().zip(&img) {
                    *n += x * *v;
                }
            }
            let f = Complex64::new(0.0, -h / k as f64);
            let mut norm = 0.0;
            for x in next.iter_mut() {
                *x *= f;
                norm += x.norm_sqr();
            }
            for (acc_x, x) in acc.iter_mut().zip(&next) {
                *acc_x += x;
            }
            term = StateVector::from_raw(s.n_qubits(), next);
            if norm.sqrt() < 1e-18 {
                break;
            }
        }
        s.amps_mut().copy_from_slice(&acc);
    }
}

/// `‖ exp(-Δτ c P)ψ / √norm − φ ‖²`
fn eq1_residual(before: &StateVector, after: &StateVector, term: &Term, dtau: f64) -> Result<f64> {
    let x = dtau * term.coeff;
    let mut img = vec![Complex64::new(0.0, 0.0); before.dim()];
    before.pauli_image_into(&term.string, &mut img);
    let (ch, sh) = (x.cosh(), x.sinh());
    let target: Vec<Complex64> = before
        .amplitudes()
        .iter()
        .zip(&img)
        .map(|(a, p)| a * ch - p * sh)
        .collect();
    let target = StateVector::from_amplitudes(before.n_qubits(), target)?;
    Ok(target
        .amplitudes()
        .iter()
        .zip(after.amplitudes())
        .map(|(t, a)| (t - a).norm_sqr())
        .sum())
}

/// Solver settings shared by [`qite_step`] and the run loops.
#[derive(Debug, Clone, Copy)]
pub struct StepConfig {
    pub dtau: f64,
    pub ridge: f64,
    pub update: UpdateMode,
    pub evaluation: Evaluation,
}

impl StepConfig {
    pub fn new(dtau: f64) -> StepConfig {
        StepConfig {
            dtau,
            ridge: DEFAULT_RIDGE,
            update: UpdateMode::ProductFormula,
            evaluation: Evaluation::StepState,
        }
    }
}

/// One first-order Trotter step over every partial Hamiltonian in term order.
/// Every returned [`StepSolve`] carries its coefficient vector.
pub fn qite_step(
    s: &StateVector,
    h: &Hamiltonian,
    pools: &Pools,
    cfg: &StepConfig,
) -> Result<(StateVector, Vec<StepSolve>)> {
    if !(cfg.dtau > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dtau must be positive, got {}",
            cfg.dtau
        )));
    }
    if s.n_qubits() != h.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: h.n_qubits(),
            found: s.n_qubits(),
        });
    }
    let mut state = s.clone();
    let mut solves = Vec::with_capacity(h.n_terms());
    let mut cache: Option<Factored> = None;
    if let (Evaluation::StepState, Pools::Shared(pool)) = (cfg.evaluation, pools) {
        // one exponential of the summed generator; per-term residuals are for
        // each term's own generator acting on Ψ_n
        let mut sum = vec![0.0; pool.len()];
        for (m, term) in h.terms().iter().enumerate() {
            let solved = solve_term_cached(s, s, pool, term, cfg.ridge, &mut cache)?;
            let mut alone = s.clone();
            apply_generator(&mut alone, pool.strings(), &solved.a, cfg.dtau, cfg.update)?;
            for (acc, v) in sum.iter_mut().zip(&solved.a) {
                *acc += v;
            }
            solves.push(StepSolve {
                term: m,
                residual: eq1_residual(s, &alone, term, cfg.dtau)?,
                a: solved.a,
                gram_cond: solved.cond,
                reduced_size: solved.reduced,
            });
        }
        apply_generator(&mut state, pool.strings(), &sum, cfg.dtau, cfg.update)?;
        return Ok((state, solves));
    }
    for (m, term) in h.terms().iter().enumerate() {
        let pool = pools.for_term(m);
        let solved = match (cfg.evaluation, pools.is_shared()) {
            (Evaluation::PerTerm, _) | (Evaluation::ReuseGram, false) => {
                solve_term(&state, pool, term, cfg.ridge)?
            }
            (Evaluation::StepState, false) => solve_term(s, pool, term, cfg.ridge)?,
            (Evaluation::ReuseGram, true) => {
                solve_term_cached(s, &state, pool, term, cfg.ridge, &mut cache)?
            }
            (Evaluation::StepState, true) => unreachable!("handled above"),
        };
        let before = state.clone();
        apply_generator(&mut state, pool.strings(), &solved.a, cfg.dtau, cfg.update)?;
        let residual = eq1_residual(&before, &state, term, cfg.dtau)?;
        solves.push(StepSolve {
            term: m,
            a: solved.a,
            residual,
            gram_cond: solved.cond,
            reduced_size: solved.reduced,
        });
    }
    Ok((state, solves))
}

struct Recorder<'a> {
    spectrum: &'a Spectrum,
    record_coefficients: bool,
    early_stop: Option<EarlyStop>,
    quiet_steps: usize,
}

impl Recorder<'_> {
    fn record(
        &self,
        step: usize,
        dtau: f64,
        state: &StateVector,
        mut solves: Vec<StepSolve>,
    ) -> Result<StepRecord> {
        let energy = state.diagonal_expectation(&self.spectrum.energies)?;
        let r = figure_of_merit(energy, self.spectrum.ground_energy).unwrap_or(f64::NAN);
        if !self.record_coefficients {
            for s in &mut solves {
                s.a = Vec::new();
            }
        }
        Ok(StepRecord {
            step,
            tau: step as f64 * dtau,
            energy,
            r,
            populations: spectral_decomposition(state, self.spectrum)?,
            solves,
        })
    }

    /// Updates the convergence counter; true when the run should stop.
    fn converged(&mut self, prev: f64, now: f64) -> bool {
        match &self.early_stop {
            Some(es) => {
                if (now - prev).abs() < es.tol {
                    self.quiet_steps += 1;
                } else {
                    self.quiet_steps = 0;
                }
                self.quiet_steps >= es.window
            }
            None => false,
        }
    }
}

/// Runs QITE from the uniform superposition. Dispatches to
/// [`compress_run`] when `opts.compress` is set.
pub fn run(h: &Hamiltonian, spec: &DomainSpec, opts: &RunOptions) -> Result<Trajectory> {
    if opts.compress {
        return compress_run(h, spec, opts);
    }
    opts.validate()?;
    let pools = build_pools(spec, h)?;
    let spectrum = brute_force_spectrum(h)?;
    let cfg = step_config(opts);
    let mut rec = recorder(&spectrum, opts);
    let mut state = StateVector::uniform(h.n_qubits())?;
    let mut steps = vec![rec.record(0, opts.dtau, &state, Vec::new())?];
    let mut stopped_early = false;
    for n in 1..=opts.n_steps {
        let (next, solves) = qite_step(&state, h, &pools, &cfg)?;
        state = next;
        let record = rec.record(n, opts.dtau, &state, solves)?;
        let prev = steps[steps.len() - 1].energy;
        let now = record.energy;
        steps.push(record);
        if rec.converged(prev, now) {
            stopped_early = n < opts.n_steps;
            break;
        }
    }
    Ok(Trajectory {
        spec: *spec,
        dtau: opts.dtau,
        evaluation: opts.evaluation,
        ground_energy: spectrum.ground_energy,
        pool_sizes: pools.sizes(),
        steps,
        blocks: Vec::new(),
        stopped_early,
        final_state: state,
    })
}

fn step_config(opts: &RunOptions) -> StepConfig {
    StepConfig {
        dtau: opts.dtau,
        ridge: opts.ridge,
        update: opts.update,
        evaluation: opts.evaluation,
    }
}

fn recorder<'a>(spectrum: &'a Spectrum, opts: &RunOptions) -> Recorder<'a> {
    Recorder {
        spectrum,
        record_coefficients: opts.record_coefficients,
        early_stop: opts.early_stop.clone(),
        quiet_steps: 0,
    }
}

/// QITE with imaginary-time-step compression.
///
/// Each step's per-term coefficient vectors are summed into the open block.
/// The working state is re-prepared from the end of the last closed block by
/// one exponential of the block sum. When that raises the energy above the
/// previous step's, the block is closed without the current step and a new
/// block starts with it.
pub fn compress_run(h: &Hamiltonian, spec: &DomainSpec, opts: &RunOptions) -> Result<Trajectory> {
    opts.validate()?;
    let pools = build_pools(spec, h)?;
    let pool = match &pools {
        Pools::Shared(p) => p.clone(),
        Pools::PerTerm(_) => {
            return Err(Error::UnsupportedMethod(format!(
                "compression needs a shared pool; {} builds one pool per term",
                spec.label()
            )))
        }
    };
    let spectrum = brute_force_spectrum(h)?;
    let cfg = step_config(opts);
    let mut rec = recorder(&spectrum, opts);

    let mut closed_state = StateVector::uniform(h.n_qubits())?;
    let mut state = closed_state.clone();
    let mut steps = vec![rec.record(0, opts.dtau, &state, Vec::new())?];
    let mut blocks = Vec::new();
    let mut a_sum = vec![0.0; pool.len()];
    let mut open_start = 1;
    let mut stopped_early = false;
    let mut last_step = 0;

    for n in 1..=opts.n_steps {
        let (_, solves) = qite_step(&state, h, &pools, &cfg)?;
        let mut step_sum = vec![0.0; pool.len()];
        for s in &solves {
            for (acc, v) in step_sum.iter_mut().zip(&s.a) {
                *acc += v;
            }
        }
        let candidate: Vec<f64> = a_sum.iter().zip(&step_sum).map(|(a, b)| a + b).collect();
        let mut next = closed_state.clone();
        apply_generator(
            &mut next,
            pool.strings(),
            &candidate,
            opts.dtau,
            opts.update,
        )?;
        let prev_energy = steps[steps.len() - 1].energy;
        let energy = next.diagonal_expectation(&spectrum.energies)?;
        if energy > prev_energy && n > open_start {
            blocks.push(CompressionBlock {
                start_step: open_start,
                end_step: n - 1,
                n_comp: n - open_start,
                a_sum: std::mem::replace(&mut a_sum, step_sum),
            });
            closed_state = state.clone();
            open_start = n;
            next = closed_state.clone();
            apply_generator(&mut next, pool.strings(), &a_sum, opts.dtau, opts.update)?;
        } else {
            a_sum = candidate;
        }
        state = next;
        let record = rec.record(n, opts.dtau, &state, solves)?;
        let now = record.energy;
        steps.push(record);
        last_step = n;
        if rec.converged(prev_energy, now) {
            stopped_early = n < opts.n_steps;
            break;
        }
    }
    if last_step >= open_start {
        blocks.push(CompressionBlock {
            start_step: open_start,
            end_step: last_step,
            n_comp: last_step + 1 - open_start,
            a_sum,
        });
    }
    Ok(Trajectory {
        spec: *spec,
        dtau: opts.dtau,
        evaluation: opts.evaluation,
        ground_energy: spectrum.ground_energy,
        pool_sizes: pools.sizes(),
        steps,
        blocks,
        stopped_early,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::hamiltonian::maxcut_hamiltonian;
    use crate::pauli::Pauli;
    use crate::pools::{build_pool, Method};
    use std::collections::BTreeSet;

    fn pool_of(strs: &[&str]) -> Pool {
        Pool::from_set(
            strs.iter()
                .map(|s| s.parse().unwrap())
                .collect::<BTreeSet<_>>(),
        )
    }

    #[test]
    fn plus_state_z_term_system() {
        let plus = StateVector::uniform(1).unwrap();
        let pool = pool_of(&["X", "Y", "Z"]);
        // canonical order is Z, X, Y
        let term = Term {
            coeff: 1.0,
            string: "Z".parse().unwrap(),
        };
        let sys = assemble_system(&plus, &pool, &term, 0.01).unwrap();
        assert!((sys.s.clone() - DMatrix::identity(3, 3)).amax() < 1e-12);
        assert!((sys.b.clone() - DVector::from_vec(vec![0.0, 0.0, 1.0])).amax() < 1e-12);
        // ⟨+|e^{-2Δτ Z}|+⟩ = cosh(2Δτ)
        assert!((sys.c - (0.02f64).cosh()).abs() < 1e-12);

        let a = solve_step(&sys.s, &sys.b, 0.5).unwrap();
        assert!((a - DVector::from_vec(vec![0.0, 0.0, 1.0 / 1.5])).amax() < 1e-12);
    }

    #[test]
    fn real_state_diagonal_pool_gives_zero_b() {
        let h = maxcut_hamiltonian(&Graph::complete(3).unwrap()).unwrap();
        let pool = pool_of(&["ZII", "IZI", "ZZI", "IIZ"]);
        let mut s = StateVector::uniform(3).unwrap();
        s.rotate(&"YXI".parse().unwrap(), 0.4).unwrap();
        let sys = assemble_system(&s, &pool, &h.terms()[0], 0.01).unwrap();
        assert!(sys.b.amax() < 1e-14);
    }

    #[test]
    fn single_string_pool_has_unit_gram() {
        let s = StateVector::uniform(2).unwrap();
        let term = Term {
            coeff: 0.5,
            string: "ZZ".parse().unwrap(),
        };
        let sys = assemble_system(&s, &pool_of(&["XY"]), &term, 0.1).unwrap();
        assert!((sys.s[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let s = DMatrix::<f64>::identity(4, 4) * 2.0;
        let a = solve_step(&s, &DVector::zeros(4), 1e-8).unwrap();
        assert_eq!(a.amax(), 0.0);
    }

    #[test]
    fn solve_rejects_asymmetric_and_negative_ridge() {
        let mut s = DMatrix::<f64>::identity(2, 2);
        s[(0, 1)] = 1.0;
        assert!(solve_step(&s, &DVector::zeros(2), 0.0).is_err());
        assert!(solve_step(&DMatrix::identity(2, 2), &DVector::zeros(2), -1.0).is_err());
    }

    #[test]
    fn singular_system_falls_back_to_min_norm() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 2.0]);
        let a = solve_step(&s, &b, 0.0).unwrap();
        assert!((a[0] - 1.0).abs() < 1e-12 && (a[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn figure_of_merit_cases() {
        assert!((figure_of_merit(-11.42, -12.0).unwrap() - 0.951_666).abs() < 1e-5);
        assert_eq!(figure_of_merit(-12.0, -12.0).unwrap(), 1.0);
        assert_eq!(figure_of_merit(0.0, -12.0).unwrap(), 0.0);
        assert!(figure_of_merit(-1.0, 0.0).is_err());
    }

    #[test]
    fn step_with_no_edges_is_identity() {
        let h = maxcut_hamiltonian(&Graph::unweighted(3, &[]).unwrap()).unwrap();
        let pools = build_pools(&DomainSpec::new(Method::Nla, 2), &h).unwrap();
        let s = StateVector::uniform(3).unwrap();
        let (out, solves) = qite_step(&s, &h, &pools, &StepConfig::new(0.01)).unwrap();
        assert!(solves.is_empty());
        assert_eq!(out, s);
    }

    #[test]
    fn sector_reduction_matches_full_solve() {
        let h = maxcut_hamiltonian(&Graph::petersen()).unwrap();
        let pool = build_pool(&DomainSpec::new(Method::Nla, 2), &h, None).unwrap();
        let mut s = StateVector::uniform(10).unwrap();
        // stay real and flip-symmetric
        s.rotate(
            &PauliString::from_letters(10, &[(0, Pauli::Y), (1, Pauli::Z)]).unwrap(),
            0.2,
        )
        .unwrap();
        s.rotate(
            &PauliString::from_letters(10, &[(3, Pauli::Z), (7, Pauli::Y)]).unwrap(),
            -0.35,
        )
        .unwrap();
        let term = h.terms()[2];
        let sector = Sector::detect(&s, &term);
        assert!(sector.real && sector.flip);
        let reduced = solve_term(&s, &pool, &term, 1e-8).unwrap();
        let sys = assemble_system(&s, &pool, &term, 0.01).unwrap();
        let full = solve_step(&sys.s, &sys.b, 1e-8).unwrap();
        let diff = reduced
            .a
            .iter()
            .zip(full.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-6, "max difference {diff}");
        assert!(reduced.reduced < pool.len());
    }

    #[test]
    fn dual_and_primal_agree() {
        // complex, non-symmetric state: pool size 255 > rows 32 on K4
        let h = maxcut_hamiltonian(&Graph::complete(4).unwrap()).unwrap();
        let pool = build_pool(&DomainSpec::new(Method::Nla, 4), &h, None).unwrap();
        let mut s = StateVector::uniform(4).unwrap();
        s.rotate(&"XIII".parse().unwrap(), 0.3).unwrap();
        s.rotate(&"IZII".parse().unwrap(), 0.2).unwrap();
        let term = h.terms()[1];
        assert!(!Sector::detect(&s, &term).flip);
        let dual = solve_term(&s, &pool, &term, 1e-6).unwrap();
        let sys = assemble_system(&s, &pool, &term, 0.01).unwrap();
        let primal = solve_step(&sys.s, &sys.b, 1e-6).unwrap();
        let diff = dual
            .a
            .iter()
            .zip(primal.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-6, "max difference {diff}");
    }

    #[test]
    fn zero_steps_gives_initial_record() {
        let h = maxcut_hamiltonian(&Graph::complete(4).unwrap()).unwrap();
        let t = run(
            &h,
            &DomainSpec::new(Method::Nla, 2),
            &RunOptions::new(0.01, 0),
        )
        .unwrap();
        assert_eq!(t.steps.len(), 1);
        assert!((t.steps[0].energy - h.constant()).abs() < 1e-12);
    }

    #[test]
    fn compression_rejects_per_term_pools() {
        let h = maxcut_hamiltonian(&Graph::petersen()).unwrap();
        let mut opts = RunOptions::new(0.01, 3);
        opts.compress = true;
        assert!(matches!(
            run(&h, &DomainSpec::new(Method::Ela, 3), &opts),
            Err(Error::UnsupportedMethod(_))
        ));
    }

    #[test]
    fn bad_options_rejected() {
        let h = maxcut_hamiltonian(&Graph::complete(3).unwrap()).unwrap();
        let spec = DomainSpec::new(Method::Nla, 2);
        assert!(run(&h, &spec, &RunOptions::new(0.0, 3)).is_err());
        let mut o = RunOptions::new(0.1, 3);
        o.ridge = -1.0;
        assert!(run(&h, &spec, &o).is_err());
    }
}
