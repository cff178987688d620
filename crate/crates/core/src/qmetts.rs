//! Minimally entangled typical thermal states sampled with QITE.
//!
//! Each chain step evolves the current product state `|i⟩` to
//! `|φ_i⟩ ∝ e^{-βH/2}|i⟩`, records `⟨φ_i|O|φ_i⟩`, and collapses `|φ_i⟩` onto a
//! new product state by measuring every qubit in the scheduled basis.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::Hamiltonian;
use crate::pauli::{PauliString, PauliSum};
use crate::qite::{evolve_with, BMode, QiteConfig, Stepper};
use crate::statevector::{Basis, ProductLabel, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisSchedule {
    /// Odd chain steps collapse in the X basis, even steps in Z.
    Alternating,
    AllZ,
}

impl BasisSchedule {
    pub fn basis(self, step: usize) -> Basis {
        match self {
            BasisSchedule::Alternating if step % 2 == 1 => Basis::X,
            _ => Basis::Z,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MettsConfig {
    pub beta: f64,
    /// Propagation settings; `n_steps` is replaced by `β/(2Δτ)`.
    pub qite: QiteConfig,
    /// Chain length, warmup included.
    pub n_samples: usize,
    pub n_warmup: usize,
    pub schedule: BasisSchedule,
    pub seed: u64,
}

impl Default for MettsConfig {
    fn default() -> Self {
        MettsConfig {
            beta: 1.0,
            qite: QiteConfig { b_mode: BMode::ExactDelta0, ..QiteConfig::default() },
            n_samples: 210,
            n_warmup: 10,
            schedule: BasisSchedule::Alternating,
            seed: 0,
        }
    }
}

impl MettsConfig {
    /// Sweeps needed to reach `β/2`.
    pub fn qite_steps(&self) -> Result<usize> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be non-negative, got {}", self.beta)));
        }
        let steps = self.beta / (2.0 * self.qite.dtau);
        let rounded = steps.round();
        if (steps - rounded).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::Config(format!("beta/2 = {} is not a multiple of dtau = {}", self.beta / 2.0, self.qite.dtau)));
        }
        Ok(rounded as usize)
    }

    pub fn validate(&self, h: &Hamiltonian) -> Result<()> {
        self.qite_steps()?;
        if self.n_samples <= self.n_warmup {
            return Err(Error::Config(format!("n_samples ({}) must exceed n_warmup ({})", self.n_samples, self.n_warmup)));
        }
        self.qite.validate(h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MettsSample {
    pub step: usize,
    /// Product state that was evolved at this step.
    pub label: ProductLabel,
    pub value: f64,
}

/// `H` as an observable, with its constant offset carried by the identity.
pub fn energy_observable(h: &Hamiltonian) -> Result<PauliSum> {
    let mut sum = h.to_pauli_sum();
    if h.offset() != 0.0 {
        sum.terms.push((h.offset(), PauliString::identity(h.n_qubits())?));
    }
    Ok(sum)
}

pub fn metts_chain(h: &Hamiltonian, observable: &PauliSum, config: &MettsConfig) -> Result<Vec<MettsSample>> {
    config.validate(h)?;
    let n = h.n_qubits();
    let n_steps = config.qite_steps()?;
    let mut qite = config.qite.clone();
    qite.n_steps = n_steps;
    let noisy = qite.noise_sigma > 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut stepper = Stepper::new(qite.clone(), n);

    let bits = (0..n).map(|_| rng.random::<bool>()).collect();
    let mut label = ProductLabel { bases: vec![Basis::Z; n], bits };
    let mut samples = Vec::with_capacity(config.n_samples);
    for step in 0..config.n_samples {
        if noisy {
            stepper = Stepper::new(QiteConfig { noise_seed: rng.random(), ..qite.clone() }, n);
        }
        let start = StateVector::product(&label)?;
        let phi = evolve_with(&mut stepper, &start, h, n_steps, |_, _| {})?.final_state;
        let value = phi.expectation_sum(observable)?;
        if !value.is_finite() {
            return Err(Error::numerical(format!("non-finite observable at chain step {step}")));
        }
        samples.push(MettsSample { step, label: label.clone(), value });
        let bases = vec![config.schedule.basis(step); n];
        label = phi.measure_collapse(&bases, &mut rng)?.0;
    }
    Ok(samples)
}

/// Mean and blocked standard error of `values[discard..]`.
///
/// Adjacent pairs are averaged repeatedly; the reported error is the largest
/// naive estimate over levels that still hold at least 8 blocks.
pub fn block_error(values: &[f64], discard: usize) -> Result<(f64, f64)> {
    let data = values.get(discard..).unwrap_or(&[]);
    if data.len() < 8 {
        return Err(Error::Config(format!("blocking needs at least 8 values after warmup, got {}", data.len())));
    }
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    let mut level: Vec<f64> = data.to_vec();
    let mut best = 0.0f64;
    while level.len() >= 8 {
        let m = level.len() as f64;
        let mu = level.iter().sum::<f64>() / m;
        let var = level.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / m;
        best = best.max((var / (m - 1.0)).sqrt());
        level = level.chunks_exact(2).map(|p| 0.5 * (p[0] + p[1])).collect();
    }
    Ok((mean, best))
}

/// Integrated autocorrelation time `1 + 2 Σ_t ρ(t)`, summed up to the first
/// window `W ≥ 5 τ(W)`.
pub fn integrated_autocorrelation(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 4 {
        return Err(Error::Config(format!("autocorrelation needs at least 4 values, got {n}")));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let c0 = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return Ok(1.0);
    }
    let mut tau = 1.0;
    for t in 1..n / 2 {
        let ct = (0..n - t).map(|k| (values[k] - mean) * (values[k + t] - mean)).sum::<f64>() / n as f64;
        tau += 2.0 * ct / c0;
        if t as f64 >= 5.0 * tau {
            break;
        }
    }
    Ok(tau)
}
