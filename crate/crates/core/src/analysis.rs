//! Dense reference computations and diagnostics.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{cut_value, Hamiltonian};
use crate::linalg::hermitian_eigh;
use crate::pauli::{odd_y_count, PauliSum};
use crate::qlanczos::KrylovLedger;
use crate::statevector::{StateVector, DEFAULT_MAX_QUBITS, DEFAULT_MAX_RDM_QUBITS};

/// Published VQE Pauli-measurement counts, used as reference rows in reports.
pub const VQE_REFERENCE_COUNTS: [(&str, u64); 4] =
    [("1D Heisenberg, 4 sites", 25_600), ("1D Heisenberg, 6 sites", 403_200), ("1D AFM TFI, 4 sites", 12_800), ("1D AFM TFI, 6 sites", 69_360)];

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `k` belongs to `eigenvalues[k]`.
    pub eigenvectors: DMatrix<Complex64>,
}

impl SpectralDecomposition {
    pub fn of(h: &Hamiltonian) -> Result<Self> {
        Self::with_limit(h, DEFAULT_MAX_QUBITS)
    }

    pub fn with_limit(h: &Hamiltonian, max_qubits: usize) -> Result<Self> {
        if h.n_qubits() > max_qubits {
            return Err(Error::Resource(format!("dense diagonalization of {} qubits exceeds the limit of {max_qubits}", h.n_qubits())));
        }
        let (eigenvalues, eigenvectors) = hermitian_eigh(&h.dense_matrix()?);
        Ok(SpectralDecomposition { eigenvalues, eigenvectors })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, k: usize) -> Result<StateVector> {
        let n_qubits = self.dim().trailing_zeros() as usize;
        StateVector::from_amplitudes(n_qubits, self.eigenvectors.column(k).iter().copied().collect())
    }

    /// Normalized `e^{-βH}|ψ⟩`.
    pub fn propagate(&self, state: &StateVector, beta: f64) -> Result<StateVector> {
        Ok(self.propagate_unnormalized(state, beta)?.0)
    }

    /// Returns the normalized propagated state and `ln ‖e^{-βH}ψ‖²`.
    fn propagate_unnormalized(&self, state: &StateVector, beta: f64) -> Result<(StateVector, f64)> {
        if state.dim() != self.dim() {
            return Err(Error::dim(format!("state of dimension {} for a {}-dimensional operator", state.dim(), self.dim())));
        }
        let psi = DVector::from_column_slice(state.amplitudes());
        let coeffs = self.eigenvectors.adjoint() * psi;
        // shift by the lowest populated level so the weights stay in range
        let shift = (0..self.dim())
            .filter(|&k| coeffs[k].norm_sqr() > 0.0)
            .map(|k| self.eigenvalues[k])
            .fold(f64::INFINITY, f64::min);
        if !shift.is_finite() {
            return Err(Error::numerical("cannot propagate the zero vector"));
        }
        let weighted = DVector::from_fn(self.dim(), |k, _| coeffs[k] * (-beta * (self.eigenvalues[k] - shift)).exp());
        let out = &self.eigenvectors * weighted;
        let mut sv = StateVector::from_amplitudes(state.n_qubits(), out.iter().copied().collect())?;
        let n2 = sv.normalize()?;
        Ok((sv, n2.ln() - 2.0 * beta * shift))
    }
}

/// Lowest eigenvalue and its eigenvector.
pub fn exact_ground(h: &Hamiltonian) -> Result<(f64, StateVector)> {
    let spec = SpectralDecomposition::of(h)?;
    Ok((spec.eigenvalues[0], spec.eigenvector(0)?))
}

/// Normalized `e^{-βH}|ψ0⟩`.
pub fn exact_ite(state0: &StateVector, h: &Hamiltonian, beta: f64) -> Result<StateVector> {
    if beta == 0.0 {
        let mut s = state0.clone();
        s.normalize()?;
        return Ok(s);
    }
    SpectralDecomposition::of(h)?.propagate(state0, beta)
}

/// Ledger and states of exact (untrotterized) imaginary-time evolution,
/// `Φ_l ∝ e^{-lΔτH}|ψ0⟩` for `l = 0..=n_steps`.
pub fn oracle_ledger(state0: &StateVector, h: &Hamiltonian, dtau: f64, n_steps: usize) -> Result<(KrylovLedger, Vec<StateVector>)> {
    let spec = SpectralDecomposition::of(h)?;
    let mut psi0 = state0.clone();
    psi0.normalize()?;
    let mut inv = Vec::with_capacity(n_steps + 1);
    let mut energies = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    for l in 0..=n_steps {
        // ‖e^{-lΔτH}ψ0‖² = 1/n_l²
        let (s, log_n2) = spec.propagate_unnormalized(&psi0, l as f64 * dtau)?;
        inv.push(log_n2.exp());
        energies.push(h.energy(&s)?);
        states.push(s);
    }
    Ok((KrylovLedger::new(inv, energies)?, states))
}

/// `Tr[O e^{-βH}] / Tr[e^{-βH}]`.
pub fn gibbs_average(h: &Hamiltonian, o: &PauliSum, beta: f64) -> Result<f64> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Config(format!("beta must be non-negative, got {beta}")));
    }
    let spec = SpectralDecomposition::of(h)?;
    gibbs_average_with(&spec, o, beta)
}

/// As [`gibbs_average`] with a precomputed decomposition of `H`.
pub fn gibbs_average_with(spec: &SpectralDecomposition, o: &PauliSum, beta: f64) -> Result<f64> {
    let n_qubits = spec.dim().trailing_zeros() as usize;
    let all: Vec<usize> = (0..n_qubits).collect();
    let om = if o.is_empty() { DMatrix::zeros(spec.dim(), spec.dim()) } else { o.matrix_on(&all)? };
    let e0 = spec.eigenvalues[0];
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..spec.dim() {
        let w = (-beta * (spec.eigenvalues[k] - e0)).exp();
        let v = spec.eigenvectors.column(k);
        let ov = (v.adjoint() * &om * v)[(0, 0)].re;
        num += w * ov;
        den += w;
    }
    Ok(num / den)
}

/// `I(i,j) = S(i) + S(j) - S(i,j)` in nats.
pub fn mutual_information(state: &StateVector, i: usize, j: usize) -> Result<f64> {
    if i == j {
        return Err(Error::Domain(format!("mutual information needs two distinct qubits, got {i} twice")));
    }
    let si = state.reduced_density_matrix(&[i], DEFAULT_MAX_RDM_QUBITS)?.entropy();
    let sj = state.reduced_density_matrix(&[j], DEFAULT_MAX_RDM_QUBITS)?.entropy();
    let sij = state.reduced_density_matrix(&[i, j], DEFAULT_MAX_RDM_QUBITS)?.entropy();
    Ok(si + sj - sij)
}

/// Largest cut value over all vertex bipartitions.
pub fn maxcut_optimum(edges: &[(usize, usize)], n_vertices: usize) -> usize {
    (0..1usize << n_vertices).map(|z| cut_value(edges, z)).max().unwrap_or(0)
}

/// Probability that a computational-basis measurement yields a cut of value `c_max`.
pub fn maxcut_success(state: &StateVector, edges: &[(usize, usize)], c_max: usize) -> f64 {
    state
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|&(z, _)| cut_value(edges, z) == c_max)
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostQuery {
    /// Number of Hamiltonian terms.
    pub k: u64,
    /// Number of Trotter steps.
    pub t: u64,
    /// Domain size.
    pub d: u32,
    #[serde(default)]
    pub odd_y: bool,
}

/// Pauli expectations measured by second-order-Trotter QITE:
/// `(2K - 1) · T · P(D)` with `P(D) = 4^D` or the odd-Y count.
pub fn qite_measurement_count(q: &CostQuery) -> Result<u64> {
    if q.k == 0 || q.t == 0 || q.d == 0 {
        return Err(Error::Config("K, T and D must be positive".into()));
    }
    let per_step = if q.odd_y {
        odd_y_count(q.d)?
    } else {
        4u64.checked_pow(q.d).ok_or_else(|| Error::Resource(format!("4^{} overflows", q.d)))?
    };
    (2 * q.k - 1)
        .checked_mul(q.t)
        .and_then(|v| v.checked_mul(per_step))
        .ok_or_else(|| Error::Resource("measurement count overflows".into()))
}
