//! Quantum Lanczos from the QITE norm ledger.
//!
//! With `|Φ_l⟩` the normalized state after `l` sweeps and `n_l` its
//! normalization constant, vectors of equal parity have overlaps and
//! Hamiltonian matrix elements given entirely by the ledger:
//!
//! ```text
//! S_{ll'} = n_l n_l' / n_r²,   H_{ll'} = S_{ll'} E_r,   r = (l + l') / 2
//! ```

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::Hamiltonian;
use crate::linalg::symmetric_eigh;
use crate::qite::{qite_evolve, QiteConfig, Trajectory};
use crate::statevector::StateVector;

#[derive(Debug, Clone, PartialEq)]
pub struct KrylovLedger {
    /// `1/n_l²`, starting with 1.
    pub inv_sq_norms: Vec<f64>,
    /// `E_l = ⟨Φ_l|H|Φ_l⟩`.
    pub energies: Vec<f64>,
}

impl KrylovLedger {
    pub fn new(inv_sq_norms: Vec<f64>, energies: Vec<f64>) -> Result<Self> {
        if inv_sq_norms.len() != energies.len() || inv_sq_norms.is_empty() {
            return Err(Error::dim(format!("ledger with {} norms and {} energies", inv_sq_norms.len(), energies.len())));
        }
        if inv_sq_norms.iter().chain(&energies).any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite ledger entry"));
        }
        if inv_sq_norms.iter().any(|&v| v <= 0.0) {
            return Err(Error::numerical("ledger norms must be positive"));
        }
        Ok(KrylovLedger { inv_sq_norms, energies })
    }

    pub fn from_trajectory(traj: &Trajectory) -> Result<Self> {
        Self::new(traj.inv_sq_norms.clone(), traj.energies.clone())
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    fn log_norm(&self, l: usize) -> f64 {
        -0.5 * self.inv_sq_norms[l].ln()
    }

    /// `⟨Φ_l|Φ_l'⟩` from the norm identity; `l` and `l'` must share parity.
    pub fn overlap(&self, l: usize, lp: usize) -> Result<f64> {
        if !(l + lp).is_multiple_of(2) {
            return Err(Error::dim(format!("indices {l} and {lp} have different parity")));
        }
        if l.max(lp) >= self.len() {
            return Err(Error::dim(format!("index {} beyond ledger of length {}", l.max(lp), self.len())));
        }
        let r = (l + lp) / 2;
        Ok((self.log_norm(l) + self.log_norm(lp) - 2.0 * self.log_norm(r)).exp())
    }

    /// Copy with additive Gaussian noise on energies and relative noise on norms.
    pub fn with_noise<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> Result<Self> {
        let dist = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
        let mut inv = self.inv_sq_norms.clone();
        let mut en = self.energies.clone();
        for (k, (v, e)) in inv.iter_mut().zip(en.iter_mut()).enumerate() {
            if k > 0 {
                *v *= (1.0 + dist.sample(rng)).abs();
            }
            *e += dist.sample(rng);
        }
        Self::new(inv, en)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    fn first(self) -> usize {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KrylovMatrices {
    pub s: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub indices: Vec<usize>,
}

/// Overlap and Hamiltonian matrices on the given ledger indices.
pub fn build_matrices(ledger: &KrylovLedger, indices: &[usize]) -> Result<KrylovMatrices> {
    let k = indices.len();
    let mut s = DMatrix::zeros(k, k);
    let mut h = DMatrix::zeros(k, k);
    for (a, &l) in indices.iter().enumerate() {
        for (b, &lp) in indices.iter().enumerate().skip(a) {
            let v = ledger.overlap(l, lp)?;
            let e = ledger.energies[(l + lp) / 2];
            s[(a, b)] = v;
            s[(b, a)] = v;
            h[(a, b)] = v * e;
            h[(b, a)] = v * e;
        }
    }
    Ok(KrylovMatrices { s, h, indices: indices.to_vec() })
}

/// All indices of `parity` up to and including `upto`.
pub fn parity_indices(parity: Parity, upto: usize) -> Vec<usize> {
    (parity.first()..=upto).step_by(2).collect()
}

/// Greedy subsequence of `parity_indices(parity, upto)`: each accepted vector
/// has overlap magnitude below `s` with the previously accepted one.
pub fn stabilize(ledger: &KrylovLedger, s: f64, parity: Parity, upto: usize) -> Result<Vec<usize>> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Config(format!("stabilization parameter must lie in (0, 1), got {s}")));
    }
    let candidates = parity_indices(parity, upto.min(ledger.len().saturating_sub(1)));
    let Some((&first, rest)) = candidates.split_first() else {
        return Err(Error::dim("no ledger index of the requested parity"));
    };
    let mut selected = vec![first];
    for &l in rest {
        let last = *selected.last().unwrap_or(&first);
        if ledger.overlap(l, last)?.abs() < s {
            selected.push(l);
        }
    }
    Ok(selected)
}

/// The greedy sequence of [`stabilize`], anchored at `upto` itself.
///
/// If the newest vector was not accepted, trailing accepted vectors (other
/// than the first) whose overlap with it is at least `s` are dropped and the
/// newest vector is appended. Keeping `Φ_upto` in the basis makes the lowest
/// root a variational improvement on `E_upto` in the exact case.
pub fn anchored_basis(ledger: &KrylovLedger, s: f64, parity: Parity, upto: usize) -> Result<Vec<usize>> {
    let mut selected = stabilize(ledger, s, parity, upto)?;
    let last = parity_indices(parity, upto.min(ledger.len().saturating_sub(1)))
        .last()
        .copied()
        .ok_or_else(|| Error::dim("no ledger index of the requested parity"))?;
    if selected.last() == Some(&last) {
        return Ok(selected);
    }
    while selected.len() > 1 {
        let tail = selected[selected.len() - 1];
        if ledger.overlap(tail, last)?.abs() < s {
            break;
        }
        selected.pop();
    }
    selected.push(last);
    Ok(selected)
}

#[derive(Debug, Clone)]
pub struct GevpSolution {
    /// Roots ascending.
    pub eigenvalues: Vec<f64>,
    /// Coefficients of the lowest root on the Krylov vectors.
    pub ground: DVector<f64>,
    /// Dimension of the retained `S` eigenspace.
    pub n_retained: usize,
}

/// Solves `H x = E S x` after discarding `S` eigenvalues below `eps`.
pub fn solve_gevp(mats: &KrylovMatrices, eps: f64) -> Result<GevpSolution> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("eps must be positive, got {eps}")));
    }
    let (svals, svecs) = symmetric_eigh(&mats.s);
    let keep: Vec<usize> = (0..svals.len()).filter(|&k| svals[k] >= eps).collect();
    if keep.is_empty() {
        return Err(Error::numerical("every overlap eigenvalue is below the threshold"));
    }
    let x = DMatrix::from_fn(mats.s.nrows(), keep.len(), |r, c| svecs[(r, keep[c])] / svals[keep[c]].sqrt());
    let mut reduced = x.transpose() * &mats.h * &x;
    reduced = (&reduced + reduced.transpose()) * 0.5;
    let (roots, vecs) = symmetric_eigh(&reduced);
    if roots.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite generalized eigenvalue"));
    }
    let ground = &x * vecs.column(0);
    Ok(GevpSolution { eigenvalues: roots, ground, n_retained: keep.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QlanczosConfig {
    pub s: f64,
    pub eps: f64,
    pub parity: Parity,
}

impl QlanczosConfig {
    /// Settings for noiseless emulation.
    pub fn exact() -> Self {
        QlanczosConfig { s: 0.95, eps: 1e-14, parity: Parity::Even }
    }

    /// Settings for noisy ledgers.
    pub fn noisy() -> Self {
        QlanczosConfig { s: 0.75, eps: 1e-2, parity: Parity::Even }
    }
}

impl Default for QlanczosConfig {
    fn default() -> Self {
        Self::exact()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QlanczosPoint {
    pub step: usize,
    pub e_qite: f64,
    pub e_qlanczos: f64,
    pub n_retained: usize,
}

/// QLanczos estimate on every prefix of the ledger ending at an index of the
/// configured parity.
pub fn qlanczos_from_ledger(ledger: &KrylovLedger, cfg: &QlanczosConfig) -> Result<Vec<QlanczosPoint>> {
    let mut out = Vec::new();
    for l in parity_indices(cfg.parity, ledger.len().saturating_sub(1)) {
        let indices = anchored_basis(ledger, cfg.s, cfg.parity, l)?;
        let mats = build_matrices(ledger, &indices)?;
        let sol = solve_gevp(&mats, cfg.eps)?;
        out.push(QlanczosPoint { step: l, e_qite: ledger.energies[l], e_qlanczos: sol.eigenvalues[0], n_retained: sol.n_retained });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct QlanczosRun {
    pub trajectory: Trajectory,
    pub points: Vec<QlanczosPoint>,
}

pub fn qlanczos_run(h: &Hamiltonian, state0: &StateVector, qite_config: &QiteConfig, cfg: &QlanczosConfig) -> Result<QlanczosRun> {
    let trajectory = qite_evolve(state0, h, qite_config)?;
    let ledger = KrylovLedger::from_trajectory(&trajectory)?;
    let points = qlanczos_from_ledger(&ledger, cfg)?;
    Ok(QlanczosRun { trajectory, points })
}
