//! Dense statevector emulation.
//!
//! Amplitude index bit `q` is the computational-basis value of qubit `q`
//! (qubit 0 is the least significant bit). Global phases are kept as-is.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::hamiltonians::LocalTerm;
use crate::linalg;
use crate::pauli::{PauliString, PauliSum, Phase};

/// Largest register the dense kernels will allocate.
pub const HARD_MAX_QUBITS: usize = 30;
pub const DEFAULT_MAX_QUBITS: usize = 14;
pub const DEFAULT_MAX_DOMAIN: usize = 12;
pub const DEFAULT_MAX_RDM_QUBITS: usize = 8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

/// Single-qubit measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Z,
    X,
}

/// A product state in a per-qubit basis, e.g. `0+1-`.
///
/// Displayed with qubit 0 as the leftmost character.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProductLabel {
    pub bases: Vec<Basis>,
    pub bits: Vec<bool>,
}

impl ProductLabel {
    pub fn computational(n_qubits: usize, index: usize) -> Self {
        ProductLabel { bases: vec![Basis::Z; n_qubits], bits: (0..n_qubits).map(|q| index >> q & 1 == 1).collect() }
    }

    pub fn n_qubits(&self) -> usize {
        self.bits.len()
    }

    pub fn parse(label: &str) -> Result<Self> {
        let mut bases = Vec::new();
        let mut bits = Vec::new();
        for ch in label.chars() {
            let (b, v) = match ch {
                '0' => (Basis::Z, false),
                '1' => (Basis::Z, true),
                '+' => (Basis::X, false),
                '-' => (Basis::X, true),
                other => return Err(Error::Parse(format!("bad product-state symbol '{other}' in \"{label}\""))),
            };
            bases.push(b);
            bits.push(v);
        }
        if bits.is_empty() {
            return Err(Error::Parse("empty product-state label".into()));
        }
        Ok(ProductLabel { bases, bits })
    }
}

impl fmt::Display for ProductLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (b, v) in self.bases.iter().zip(&self.bits) {
            let ch = match (b, v) {
                (Basis::Z, false) => '0',
                (Basis::Z, true) => '1',
                (Basis::X, false) => '+',
                (Basis::X, true) => '-',
            };
            write!(f, "{ch}")?;
        }
        Ok(())
    }
}

fn check_size(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 {
        return Err(Error::dim("a state needs at least one qubit"));
    }
    if n_qubits > HARD_MAX_QUBITS {
        return Err(Error::Resource(format!("{n_qubits} qubits exceeds the dense limit of {HARD_MAX_QUBITS}")));
    }
    Ok(())
}

/// Index offsets of the `2^k` local basis states of `qubits`.
fn local_offsets(qubits: &[usize]) -> Vec<usize> {
    (0..1usize << qubits.len())
        .map(|local| qubits.iter().enumerate().fold(0usize, |acc, (pos, &q)| acc | ((local >> pos & 1) << q)))
        .collect()
}

fn qubit_mask(qubits: &[usize]) -> usize {
    qubits.iter().fold(0usize, |m, &q| m | 1 << q)
}

impl StateVector {
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_size(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::dim(format!("basis index {index} out of range for {n_qubits} qubits")));
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amps })
    }

    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        check_size(n_qubits)?;
        if amps.len() != 1usize << n_qubits {
            return Err(Error::dim(format!("{} amplitudes for {n_qubits} qubits", amps.len())));
        }
        Ok(StateVector { n_qubits, amps })
    }

    pub fn product(label: &ProductLabel) -> Result<Self> {
        let n = label.n_qubits();
        check_size(n)?;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![Complex64::new(1.0, 0.0)];
        // Build the Kronecker product from the most significant qubit down.
        for q in (0..n).rev() {
            let (a0, a1) = match (label.bases[q], label.bits[q]) {
                (Basis::Z, false) => (1.0, 0.0),
                (Basis::Z, true) => (0.0, 1.0),
                (Basis::X, false) => (h, h),
                (Basis::X, true) => (h, -h),
            };
            let mut next = Vec::with_capacity(amps.len() * 2);
            for &amp in &amps {
                next.push(amp * a0);
                next.push(amp * a1);
            }
            amps = next;
        }
        Ok(StateVector { n_qubits: n, amps })
    }

    /// `|+⟩^{⊗n}`.
    pub fn plus(n_qubits: usize) -> Result<Self> {
        Self::product(&ProductLabel { bases: vec![Basis::X; n_qubits], bits: vec![false; n_qubits] })
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

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Scales to unit norm and returns the squared norm before scaling.
    pub fn normalize(&mut self) -> Result<f64> {
        let n2 = self.norm_sqr();
        if !(n2 > 0.0 && n2.is_finite()) {
            return Err(Error::numerical(format!("cannot normalize a state with squared norm {n2}")));
        }
        let inv = 1.0 / n2.sqrt();
        self.amps.iter_mut().for_each(|a| *a *= inv);
        Ok(n2)
    }

    /// True when every amplitude is real within `tol`.
    pub fn is_real(&self, tol: f64) -> bool {
        self.amps.iter().all(|a| a.im.abs() <= tol)
    }

    fn check_string(&self, s: &PauliString) -> Result<()> {
        if s.n_qubits() != self.n_qubits {
            return Err(Error::dim(format!("{}-qubit string on {}-qubit state", s.n_qubits(), self.n_qubits)));
        }
        Ok(())
    }

    fn check_qubits(&self, qubits: &[usize]) -> Result<()> {
        let mut seen = 0usize;
        for &q in qubits {
            if q >= self.n_qubits {
                return Err(Error::dim(format!("qubit {q} out of range for {} qubits", self.n_qubits)));
            }
            if seen >> q & 1 == 1 {
                return Err(Error::Domain(format!("qubit {q} listed twice in {qubits:?}")));
            }
            seen |= 1 << q;
        }
        Ok(())
    }

    /// `⟨ψ|σ|ψ⟩` without discarding the imaginary part.
    pub fn expectation_complex(&self, s: &PauliString) -> Result<Complex64> {
        self.check_string(s)?;
        let x = s.x_mask() as usize;
        let z = s.z_mask() as usize;
        let mut acc = ZERO;
        for (j, &amp) in self.amps.iter().enumerate() {
            if amp == ZERO {
                continue;
            }
            let term = self.amps[j ^ x].conj() * amp;
            if (j & z).count_ones() % 2 == 1 {
                acc -= term;
            } else {
                acc += term;
            }
        }
        Ok(acc * Phase::from_power(s.y_count() as u8).to_complex())
    }

    pub fn expectation(&self, s: &PauliString) -> Result<f64> {
        Ok(self.expectation_complex(s)?.re)
    }

    pub fn expectation_sum(&self, sum: &PauliSum) -> Result<f64> {
        sum.terms.iter().try_fold(0.0, |acc, (c, s)| Ok(acc + c * self.expectation(s)?))
    }

    /// `σ|ψ⟩`.
    pub fn apply_pauli(&self, s: &PauliString) -> Result<StateVector> {
        let mut out = vec![ZERO; self.amps.len()];
        self.accumulate_pauli(s, Complex64::new(1.0, 0.0), &mut out)?;
        Ok(StateVector { n_qubits: self.n_qubits, amps: out })
    }

    /// `out += coeff · σ|ψ⟩`.
    pub fn accumulate_pauli(&self, s: &PauliString, coeff: Complex64, out: &mut [Complex64]) -> Result<()> {
        self.check_string(s)?;
        if out.len() != self.amps.len() {
            return Err(Error::dim(format!("output buffer of length {} for {} amplitudes", out.len(), self.amps.len())));
        }
        let x = s.x_mask() as usize;
        let z = s.z_mask() as usize;
        let phase = Phase::from_power(s.y_count() as u8).to_complex() * coeff;
        for (j, &amp) in self.amps.iter().enumerate() {
            let sign = if (j & z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            out[j ^ x] += amp * phase * sign;
        }
        Ok(())
    }

    /// `Σ c_k σ_k |ψ⟩`.
    pub fn apply_sum(&self, sum: &PauliSum) -> Result<StateVector> {
        let mut out = vec![ZERO; self.amps.len()];
        for (c, s) in &sum.terms {
            self.accumulate_pauli(s, Complex64::new(*c, 0.0), &mut out)?;
        }
        Ok(StateVector { n_qubits: self.n_qubits, amps: out })
    }

    /// Applies a dense `2^k × 2^k` operator on `qubits` in place.
    pub fn apply_local_matrix(&mut self, qubits: &[usize], m: &DMatrix<Complex64>) -> Result<()> {
        self.check_qubits(qubits)?;
        let dim = 1usize << qubits.len();
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::dim(format!("{}x{} matrix on {} qubits", m.nrows(), m.ncols(), qubits.len())));
        }
        let offsets = local_offsets(qubits);
        let mask = qubit_mask(qubits);
        let mut gathered = vec![ZERO; dim];
        for base in 0..self.amps.len() {
            if base & mask != 0 {
                continue;
            }
            for (g, &off) in gathered.iter_mut().zip(&offsets) {
                *g = self.amps[base | off];
            }
            for (r, &off) in offsets.iter().enumerate() {
                let mut acc = ZERO;
                for (c, g) in gathered.iter().enumerate() {
                    acc += m[(r, c)] * g;
                }
                self.amps[base | off] = acc;
            }
        }
        Ok(())
    }

    /// Exact normalized `e^{-Δτ h}|ψ⟩` and `c = ⟨ψ|e^{-2Δτ h}|ψ⟩`.
    pub fn apply_term_exp(&self, term: &LocalTerm, dtau: f64) -> Result<(StateVector, f64)> {
        if !(dtau > 0.0 && dtau.is_finite()) {
            return Err(Error::Domain(format!("imaginary time step must be positive, got {dtau}")));
        }
        let h = term.matrix()?;
        let defect = linalg::hermitian_defect(&h);
        if defect > 1e-10 {
            return Err(Error::NonHermitian(defect));
        }
        let propagator = linalg::hermitian_function(&h, |l| Complex64::new((-dtau * l).exp(), 0.0));
        let mut out = self.clone();
        out.apply_local_matrix(term.support(), &propagator)?;
        let c = out.normalize()?;
        Ok((out, c))
    }

    /// Applies `e^{-iΔτ A}` with `A` a real-weighted Pauli sum acting within `domain`.
    pub fn apply_domain_unitary(
        &self,
        domain: &[usize],
        generator: &PauliSum,
        dtau: f64,
        max_domain: usize,
    ) -> Result<StateVector> {
        if domain.len() > max_domain {
            return Err(Error::Resource(format!("domain of {} qubits exceeds limit {max_domain}", domain.len())));
        }
        self.check_qubits(domain)?;
        let mut out = self.clone();
        if generator.terms.iter().all(|(c, _)| *c == 0.0) {
            return Ok(out);
        }
        let a = generator.matrix_on(domain)?;
        let u = linalg::hermitian_function(&a, |l| Complex64::new(0.0, -dtau * l).exp());
        out.apply_local_matrix(domain, &u)?;
        Ok(out)
    }

    pub fn reduced_density_matrix(&self, qubits: &[usize], max_qubits: usize) -> Result<DensityMatrix> {
        if qubits.len() > max_qubits {
            return Err(Error::Resource(format!("{} qubits exceeds reduced-state limit {max_qubits}", qubits.len())));
        }
        if qubits.is_empty() {
            return Err(Error::Domain("reduced density matrix over no qubits".into()));
        }
        self.check_qubits(qubits)?;
        let dim = 1usize << qubits.len();
        let offsets = local_offsets(qubits);
        let mask = qubit_mask(qubits);
        let mut rho = DMatrix::<Complex64>::zeros(dim, dim);
        for base in 0..self.amps.len() {
            if base & mask != 0 {
                continue;
            }
            for (a, &oa) in offsets.iter().enumerate() {
                let va = self.amps[base | oa];
                if va == ZERO {
                    continue;
                }
                for (b, &ob) in offsets.iter().enumerate() {
                    rho[(a, b)] += va * self.amps[base | ob].conj();
                }
            }
        }
        Ok(DensityMatrix { qubits: qubits.to_vec(), entries: rho })
    }

    /// Samples a product state `|i'⟩` of the given bases with probability
    /// `|⟨i'|ψ⟩|²` and returns it with its label.
    pub fn measure_collapse<R: Rng + ?Sized>(&self, bases: &[Basis], rng: &mut R) -> Result<(ProductLabel, StateVector)> {
        if bases.len() != self.n_qubits {
            return Err(Error::dim(format!("{} bases for {} qubits", bases.len(), self.n_qubits)));
        }
        let mut rotated = self.clone();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let hadamard = DMatrix::from_row_slice(2, 2, &[h.into(), h.into(), h.into(), (-h).into()]);
        for (q, b) in bases.iter().enumerate() {
            if *b == Basis::X {
                rotated.apply_local_matrix(&[q], &hadamard)?;
            }
        }
        let total = rotated.norm_sqr();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        let mut last_nonzero = 0;
        for (j, a) in rotated.amps.iter().enumerate() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            last_nonzero = j;
            acc += p;
            if target < acc {
                chosen = Some(j);
                break;
            }
        }
        let index = chosen.unwrap_or(last_nonzero);
        let label = ProductLabel { bases: bases.to_vec(), bits: (0..self.n_qubits).map(|q| index >> q & 1 == 1).collect() };
        let collapsed = StateVector::product(&label)?;
        Ok((label, collapsed))
    }

    pub fn inner_product(&self, other: &StateVector) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::dim(format!("{} vs {} qubits", self.n_qubits, other.n_qubits)));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner_product(other)?.norm_sqr())
    }
}

/// Reduced state of a qubit subset.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub qubits: Vec<usize>,
    pub entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn trace(&self) -> f64 {
        (0..self.entries.nrows()).map(|i| self.entries[(i, i)].re).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigh(&self.entries).0
    }

    /// Von Neumann entropy in nats; eigenvalues below `1e-14` count as zero.
    pub fn entropy(&self) -> f64 {
        self.eigenvalues().into_iter().filter(|&p| p > 1e-14).map(|p| -p * p.ln()).sum()
    }
}
