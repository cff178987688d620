//! Quantum imaginary-time evolution on a statevector.
//!
//! Each Trotter factor `e^{-Δτ h[m]}` is replaced by a unitary `e^{-iΔτ A[m]}`
//! on a domain around the support of `h[m]`, with `A[m] = Σ_I a_I σ_I` found
//! from the real least-squares problem
//!
//! ```text
//! min_a || Δ0 + i Σ_I a_I σ_I |Ψ⟩ ||²   ⇔   (S + Sᵀ) a = -b
//! S_IJ = ⟨Ψ|σ_I σ_J|Ψ⟩,   b_I = 2 Im⟨Ψ|σ_I|Δ0⟩
//! ```
//!
//! where `Δ0 = (|Ψ̄'⟩ - |Ψ⟩)/Δτ` is the change produced by the normalized
//! non-unitary step.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{Hamiltonian, LocalTerm};
use crate::linalg;
use crate::pauli::{multiply, OperatorPool, PauliString, PauliSum, PoolKind};
use crate::statevector::{StateVector, DEFAULT_MAX_DOMAIN, DEFAULT_MAX_QUBITS};

/// How the right-hand side `b` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BMode {
    /// From Pauli expectations only, with `c` truncated at first order in `Δτ`.
    Measurable,
    /// From the emulator's exact normalized step.
    ExactDelta0,
}

/// Which side of the normal equations is factorized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveRoute {
    /// Primal unless the pool outgrows the state space.
    Auto,
    /// Build `S + Sᵀ` and `b` over the pool.
    Primal,
    /// Factorize the Gram matrix on the state-space side.
    Gram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QiteConfig {
    pub dtau: f64,
    pub n_steps: usize,
    pub domain_size: usize,
    /// Diagonal shift added to `S + Sᵀ`.
    pub delta: f64,
    pub pool_kind: PoolKind,
    pub trotter_order: u8,
    pub b_mode: BMode,
    /// Relative eigenvalue cutoff of the pseudoinverse.
    pub pinv_tol: f64,
    /// Keep the `1/√c` factor on the measurable `b`.
    pub scale_b_by_norm: bool,
    /// Standard deviation of Gaussian noise added to every expectation value.
    pub noise_sigma: f64,
    pub noise_seed: u64,
    pub max_domain: usize,
    pub max_qubits: usize,
    pub route: SolveRoute,
}

impl Default for QiteConfig {
    fn default() -> Self {
        QiteConfig {
            dtau: 0.1,
            n_steps: 10,
            domain_size: 2,
            delta: 0.0,
            pool_kind: PoolKind::PauliFull,
            trotter_order: 1,
            b_mode: BMode::Measurable,
            pinv_tol: 1e-8,
            scale_b_by_norm: true,
            noise_sigma: 0.0,
            noise_seed: 0,
            max_domain: DEFAULT_MAX_DOMAIN,
            max_qubits: DEFAULT_MAX_QUBITS,
            route: SolveRoute::Auto,
        }
    }
}

impl QiteConfig {
    /// Total imaginary time `n_steps · Δτ`.
    pub fn beta(&self) -> f64 {
        self.dtau * self.n_steps as f64
    }

    pub fn validate(&self, h: &Hamiltonian) -> Result<()> {
        if !(self.dtau > 0.0 && self.dtau.is_finite()) {
            return Err(Error::Config(format!("dtau must be positive, got {}", self.dtau)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("delta must be non-negative, got {}", self.delta)));
        }
        if !(self.pinv_tol > 0.0 && self.pinv_tol < 1.0) {
            return Err(Error::Config(format!("pinv_tol must lie in (0, 1), got {}", self.pinv_tol)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!("noise_sigma must be non-negative, got {}", self.noise_sigma)));
        }
        if self.trotter_order != 1 && self.trotter_order != 2 {
            return Err(Error::Config(format!("trotter_order must be 1 or 2, got {}", self.trotter_order)));
        }
        if h.n_qubits() > self.max_qubits {
            return Err(Error::Resource(format!("{} qubits exceeds the limit of {}", h.n_qubits(), self.max_qubits)));
        }
        let widest = h.terms().iter().map(|t| t.support().len()).max().unwrap_or(0);
        if self.domain_size < widest {
            return Err(Error::Config(format!("domain_size {} is smaller than the widest term ({widest})", self.domain_size)));
        }
        if self.domain_size.min(h.n_qubits()) > self.max_domain {
            return Err(Error::Resource(format!("domain_size {} exceeds the limit of {}", self.domain_size, self.max_domain)));
        }
        Ok(())
    }
}

/// Domain of `min(d, n_qubits)` qubits around `support`, ascending.
///
/// Grows by repeatedly adding the free qubit closest to any support qubit
/// (ties go to the lower index), so contiguous supports widen symmetrically,
/// chain ends push growth to the open side, and separated supports grow a
/// neighbourhood around each endpoint.
pub fn choose_domain(support: &[usize], d: usize, n_qubits: usize) -> Vec<usize> {
    let mut domain: Vec<usize> = support.to_vec();
    domain.sort_unstable();
    domain.dedup();
    let target = d.min(n_qubits).max(domain.len());
    while domain.len() < target {
        let next = (0..n_qubits)
            .filter(|q| !domain.contains(q))
            .min_by_key(|&q| (support.iter().map(|&s| s.abs_diff(q)).min().unwrap_or(usize::MAX), q));
        match next {
            Some(q) => {
                domain.push(q);
                domain.sort_unstable();
            }
            None => break,
        }
    }
    domain
}

/// The symmetrized normal equations of one QITE step.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    /// `S + Sᵀ = 2 Re S`.
    pub smat: DMatrix<f64>,
    pub bvec: DVector<f64>,
    /// Squared norm of the non-unitary step (first-order estimate in measurable mode).
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub term_index: usize,
    /// `⟨Ψ|e^{-2Δτ h[m]}|Ψ⟩`.
    pub c: f64,
    pub a_coeffs: Vec<f64>,
    /// `‖(S + Sᵀ + δ)a + b‖`.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `β_l = l·Δτ` for `l = 0..=n_steps`.
    pub betas: Vec<f64>,
    /// `E(β_l)`, evaluated after each full sweep.
    pub energies: Vec<f64>,
    /// `1/n_l²`, accumulated from per-step norms; the first entry is 1.
    pub inv_sq_norms: Vec<f64>,
    pub records: Vec<StepRecord>,
    pub final_state: StateVector,
}

/// Expectation source with optional Gaussian noise, memoized per string so
/// every appearance of a string sees the same measured value.
struct Tomography<'a> {
    state: &'a StateVector,
    cache: HashMap<PauliString, f64>,
    noise: Option<(Normal<f64>, &'a mut ChaCha8Rng)>,
}

impl<'a> Tomography<'a> {
    fn new(state: &'a StateVector, noise: Option<(Normal<f64>, &'a mut ChaCha8Rng)>) -> Self {
        Tomography { state, cache: HashMap::new(), noise }
    }

    fn value(&mut self, s: &PauliString) -> Result<f64> {
        if let Some(v) = self.cache.get(s) {
            return Ok(*v);
        }
        let mut v = if s.is_identity() { 1.0 } else { self.state.expectation(s)? };
        if !s.is_identity() {
            if let Some((dist, rng)) = self.noise.as_mut() {
                v += dist.sample(*rng);
            }
        }
        self.cache.insert(*s, v);
        Ok(v)
    }

    /// `⟨a·b⟩` including the product phase.
    fn product(&mut self, a: &PauliString, b: &PauliString) -> Result<Complex64> {
        let p = multiply(a, b)?;
        Ok(p.phase.to_complex() * self.value(&p.string)?)
    }

    fn sum(&mut self, sum: &PauliSum) -> Result<f64> {
        sum.terms.iter().try_fold(0.0, |acc, (c, s)| Ok(acc + c * self.value(s)?))
    }
}

fn single_strings(pool: &[PauliSum]) -> Option<Vec<PauliString>> {
    pool.iter()
        .map(|op| match op.terms.as_slice() {
            [(c, s)] if *c == 1.0 => Some(*s),
            _ => None,
        })
        .collect()
}

fn first_order_c(expect_h: f64, dtau: f64) -> Result<f64> {
    let c = 1.0 - 2.0 * dtau * expect_h;
    if c <= 0.0 {
        return Err(Error::numerical(format!("first-order norm estimate c = {c} is not positive; reduce dtau")));
    }
    Ok(c)
}

/// Right-hand-side target `Δ0` as a vector, for a given mode.
fn delta0_vector(state: &StateVector, term: &LocalTerm, dtau: f64, mode: BMode, scale_b: bool) -> Result<(StateVector, f64)> {
    match mode {
        BMode::ExactDelta0 => {
            let (next, c) = state.apply_term_exp(term, dtau)?;
            let amps = next.amplitudes().iter().zip(state.amplitudes()).map(|(a, b)| (a - b) / dtau).collect();
            Ok((StateVector::from_amplitudes(state.n_qubits(), amps)?, c))
        }
        BMode::Measurable => {
            let c = first_order_c(state.expectation_sum(term.pauli_sum())?, dtau)?;
            let scale = if scale_b { -1.0 / c.sqrt() } else { -1.0 };
            let h_psi = state.apply_sum(term.pauli_sum())?;
            let amps = h_psi.amplitudes().iter().map(|a| a * scale).collect();
            Ok((StateVector::from_amplitudes(state.n_qubits(), amps)?, c))
        }
    }
}

/// Builds `S + Sᵀ`, `b` and `c` for one step.
///
/// For Pauli pools every `S` entry is a single string expectation,
/// `S_IJ = phase · ⟨σ_I σ_J⟩`; measurable `b` uses
/// `b_I = -(2/√c) Im⟨Ψ|σ_I h|Ψ⟩` with `c = 1 - 2Δτ⟨h⟩`.
pub fn build_linear_system(
    state: &StateVector,
    term: &LocalTerm,
    pool: &[PauliSum],
    b_mode: BMode,
    dtau: f64,
    scale_b_by_norm: bool,
) -> Result<LinearSystem> {
    build_system_with(state, term, pool, b_mode, dtau, scale_b_by_norm, None)
}

fn build_system_with(
    state: &StateVector,
    term: &LocalTerm,
    pool: &[PauliSum],
    b_mode: BMode,
    dtau: f64,
    scale_b_by_norm: bool,
    noise: Option<(Normal<f64>, &mut ChaCha8Rng)>,
) -> Result<LinearSystem> {
    if pool.is_empty() {
        return Err(Error::InvalidPool("empty operator pool".into()));
    }
    let p = pool.len();
    let mut smat = DMatrix::zeros(p, p);
    let mut bvec = DVector::zeros(p);
    let mut tomo = Tomography::new(state, noise);

    let c;
    if let Some(strings) = single_strings(pool) {
        for i in 0..p {
            for j in i..p {
                let v = 2.0 * tomo.product(&strings[i], &strings[j])?.re;
                smat[(i, j)] = v;
                smat[(j, i)] = v;
            }
        }
        match b_mode {
            BMode::Measurable => {
                c = first_order_c(tomo.sum(term.pauli_sum())?, dtau)?;
                let scale = if scale_b_by_norm { 2.0 / c.sqrt() } else { 2.0 };
                for (i, s) in strings.iter().enumerate() {
                    let mut im = 0.0;
                    for (coeff, hs) in &term.pauli_sum().terms {
                        im += coeff * tomo.product(s, hs)?.im;
                    }
                    bvec[i] = -scale * im;
                }
            }
            BMode::ExactDelta0 => {
                let (d0, exact_c) = delta0_vector(state, term, dtau, b_mode, scale_b_by_norm)?;
                c = exact_c;
                for (i, s) in strings.iter().enumerate() {
                    bvec[i] = 2.0 * state.apply_pauli(s)?.inner_product(&d0)?.im;
                }
            }
        }
    } else {
        // General Hermitian pool operators: work with the vectors σ_I|Ψ⟩.
        let vectors: Vec<StateVector> = pool.iter().map(|op| state.apply_sum(op)).collect::<Result<_>>()?;
        for i in 0..p {
            for j in i..p {
                let v = 2.0 * vectors[i].inner_product(&vectors[j])?.re;
                smat[(i, j)] = v;
                smat[(j, i)] = v;
            }
        }
        let (d0, cc) = delta0_vector(state, term, dtau, b_mode, scale_b_by_norm)?;
        c = cc;
        for (i, v) in vectors.iter().enumerate() {
            bvec[i] = 2.0 * v.inner_product(&d0)?.im;
        }
    }
    Ok(LinearSystem { smat, bvec, c })
}

/// Solves `(S + Sᵀ + δI) a = -b` by pseudoinverse and reports the residual.
pub fn solve_step(smat: &DMatrix<f64>, bvec: &DVector<f64>, delta: f64, pinv_tol: f64) -> Result<(DVector<f64>, f64)> {
    if smat.nrows() != smat.ncols() || smat.nrows() != bvec.len() {
        return Err(Error::dim(format!("{}x{} system with {} right-hand sides", smat.nrows(), smat.ncols(), bvec.len())));
    }
    let mut shifted = smat.clone();
    for i in 0..shifted.nrows() {
        shifted[(i, i)] += delta;
    }
    let a = linalg::pinv_symmetric_solve(&shifted, &(-bvec), pinv_tol)?;
    let residual = (&shifted * &a + bvec).norm();
    Ok((a, residual))
}

/// Same minimum-norm solution, factorized on the `2·2ⁿ` state-space side:
/// `a = Wᵀ (2WWᵀ + δ)⁺ 2d` with `W_I = ι(-iσ_I|Ψ⟩)`, `d = ι(Δ0)` and `ι` the
/// real embedding `ψ ↦ (Re ψ, Im ψ)`.
fn solve_gram(state: &StateVector, pool: &[PauliSum], d0: &StateVector, delta: f64, pinv_tol: f64) -> Result<(DVector<f64>, f64)> {
    let n = state.dim();
    let p = pool.len();
    let mut w = DMatrix::<f64>::zeros(2 * n, p);
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    for (k, op) in pool.iter().enumerate() {
        v.fill(Complex64::new(0.0, 0.0));
        for (c, s) in &op.terms {
            state.accumulate_pauli(s, Complex64::new(*c, 0.0), &mut v)?;
        }
        for (r, a) in v.iter().enumerate() {
            // -i(x + iy) = y - ix
            w[(r, k)] = a.im;
            w[(n + r, k)] = -a.re;
        }
    }
    let mut d = DVector::<f64>::zeros(2 * n);
    for (r, a) in d0.amplitudes().iter().enumerate() {
        d[r] = a.re;
        d[n + r] = a.im;
    }
    let mut gram = &w * w.transpose() * 2.0;
    for i in 0..2 * n {
        gram[(i, i)] += delta;
    }
    let y = linalg::pinv_symmetric_solve(&gram, &(&d * 2.0), pinv_tol)?;
    let a = w.transpose() * y;
    // (2WᵀW + δ)a + b with b = -2Wᵀd
    let residual = (w.transpose() * ((&w * &a) - &d) * 2.0 + &a * delta).norm();
    Ok((a, residual))
}

/// Per-evolution state shared between steps: pool cache and noise stream.
pub struct Stepper {
    config: QiteConfig,
    n_qubits: usize,
    pools: HashMap<Vec<usize>, Arc<Vec<PauliSum>>>,
    rng: ChaCha8Rng,
}

impl Stepper {
    pub fn new(config: QiteConfig, n_qubits: usize) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.noise_seed);
        Stepper { config, n_qubits, pools: HashMap::new(), rng }
    }

    pub fn config(&self) -> &QiteConfig {
        &self.config
    }

    fn pool_for(&mut self, domain: &[usize]) -> Result<Arc<Vec<PauliSum>>> {
        if let Some(p) = self.pools.get(domain) {
            return Ok(Arc::clone(p));
        }
        let pool = Arc::new(OperatorPool::new(self.config.pool_kind, domain.to_vec(), self.n_qubits)?.enumerate()?);
        self.pools.insert(domain.to_vec(), Arc::clone(&pool));
        Ok(pool)
    }

    /// One reconstruction step for `term` with imaginary-time step `dtau`.
    pub fn step(&mut self, state: &StateVector, term: &LocalTerm, term_index: usize, dtau: f64) -> Result<(StateVector, StepRecord)> {
        let cfg = self.config.clone();
        let domain = choose_domain(term.support(), cfg.domain_size, self.n_qubits);
        if cfg.pool_kind == PoolKind::FermionicNumberConserving && !term.support().iter().all(|q| domain.contains(q)) {
            return Err(Error::InvalidPool("term support not inside its domain".into()));
        }
        let pool = self.pool_for(&domain)?;
        let noisy = cfg.noise_sigma > 0.0;
        let use_gram = match cfg.route {
            SolveRoute::Primal => false,
            SolveRoute::Gram => true,
            SolveRoute::Auto => !noisy && pool.len() > 2 * state.dim(),
        };
        if use_gram && noisy {
            return Err(Error::Config("expectation noise requires the primal solve route".into()));
        }

        let (a, residual, c_used) = if use_gram {
            let (d0, c) = delta0_vector(state, term, dtau, cfg.b_mode, cfg.scale_b_by_norm)?;
            let (a, r) = solve_gram(state, &pool, &d0, cfg.delta, cfg.pinv_tol)?;
            (a, r, c)
        } else {
            let noise = if noisy {
                let dist = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
                Some((dist, &mut self.rng))
            } else {
                None
            };
            let sys = build_system_with(state, term, &pool, cfg.b_mode, dtau, cfg.scale_b_by_norm, noise)?;
            let (a, r) = solve_step(&sys.smat, &sys.bvec, cfg.delta, cfg.pinv_tol)?;
            (a, r, sys.c)
        };
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite generator coefficients"));
        }

        let mut generator = Vec::new();
        for (coef, op) in a.iter().zip(pool.iter()) {
            if *coef != 0.0 {
                generator.extend(op.terms.iter().map(|(w, s)| (coef * w, *s)));
            }
        }
        let next = state.apply_domain_unitary(&domain, &PauliSum::new(generator), dtau, cfg.max_domain)?;
        // The ledger needs ⟨e^{-2Δτh}⟩ itself, a local expectation, rather
        // than the first-order value used for b.
        let c = match cfg.b_mode {
            BMode::ExactDelta0 => c_used,
            BMode::Measurable => state.apply_term_exp(term, dtau)?.1,
        };
        let record = StepRecord { term_index, c, a_coeffs: a.iter().copied().collect(), residual };
        Ok((next, record))
    }
}

/// One QITE step with the configured `Δτ`.
pub fn qite_step(state: &StateVector, term: &LocalTerm, config: &QiteConfig) -> Result<(StateVector, StepRecord)> {
    Stepper::new(config.clone(), state.n_qubits()).step(state, term, 0, config.dtau)
}

/// Term indices and step sizes of one Trotter sweep.
pub fn sweep_schedule(n_terms: usize, dtau: f64, order: u8) -> Vec<(usize, f64)> {
    if order == 1 || n_terms == 1 {
        return (0..n_terms).map(|m| (m, dtau)).collect();
    }
    let half = dtau / 2.0;
    let mut out: Vec<(usize, f64)> = (0..n_terms - 1).map(|m| (m, half)).collect();
    out.push((n_terms - 1, dtau));
    out.extend((0..n_terms - 1).rev().map(|m| (m, half)));
    out
}

pub fn qite_evolve(state0: &StateVector, h: &Hamiltonian, config: &QiteConfig) -> Result<Trajectory> {
    qite_evolve_observed(state0, h, config, |_, _| {})
}

/// As [`qite_evolve`], calling `observer(l, state)` for every sweep boundary `l`.
pub fn qite_evolve_observed<F>(state0: &StateVector, h: &Hamiltonian, config: &QiteConfig, observer: F) -> Result<Trajectory>
where
    F: FnMut(usize, &StateVector),
{
    config.validate(h)?;
    let mut stepper = Stepper::new(config.clone(), h.n_qubits());
    evolve_with(&mut stepper, state0, h, config.n_steps, observer)
}

/// Runs `n_steps` sweeps with an existing stepper, reusing its pool cache and
/// noise stream.
pub fn evolve_with<F>(stepper: &mut Stepper, state0: &StateVector, h: &Hamiltonian, n_steps: usize, mut observer: F) -> Result<Trajectory>
where
    F: FnMut(usize, &StateVector),
{
    if state0.n_qubits() != h.n_qubits() || stepper.n_qubits != h.n_qubits() {
        return Err(Error::dim(format!("{}-qubit state for {}-qubit Hamiltonian", state0.n_qubits(), h.n_qubits())));
    }
    let dtau = stepper.config.dtau;
    let mut state = state0.clone();
    state.normalize()?;
    let schedule = sweep_schedule(h.terms().len(), dtau, stepper.config.trotter_order);

    let mut betas = vec![0.0];
    let mut energies = vec![h.energy(&state)?];
    let mut inv_sq_norms = vec![1.0];
    let mut records = Vec::with_capacity(n_steps * schedule.len());
    observer(0, &state);
    for l in 1..=n_steps {
        let mut norm_factor = 1.0;
        for &(m, dt) in &schedule {
            let (next, rec) = stepper.step(&state, &h.terms()[m], m, dt)?;
            norm_factor *= rec.c;
            records.push(rec);
            state = next;
        }
        betas.push(l as f64 * dtau);
        energies.push(h.energy(&state)?);
        inv_sq_norms.push(inv_sq_norms[l - 1] * norm_factor);
        observer(l, &state);
    }
    Ok(Trajectory { betas, energies, inv_sq_norms, records, final_state: state })
}
