//! Model Hamiltonians as ordered lists of local terms.
//!
//! The term order of every builder is the Trotter sweep order: bonds left to
//! right, then single-site fields. Spin operators are `S = σ/2`.

use std::path::Path;

use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{PauliLetter, PauliString, PauliSum};
use crate::statevector::StateVector;

/// One Trotter factor `h[m]`: a real-weighted Pauli sum on a declared support.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTerm {
    support: Vec<usize>,
    pauli_sum: PauliSum,
}

impl LocalTerm {
    pub fn new(support: Vec<usize>, pauli_sum: PauliSum) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Model("local term with empty support".into()));
        }
        let mut sorted = support.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != support.len() {
            return Err(Error::Model(format!("repeated qubit in support {support:?}")));
        }
        for (c, s) in &pauli_sum.terms {
            if !c.is_finite() {
                return Err(Error::Model(format!("non-finite coefficient on {s}")));
            }
            if !s.acts_within(&support) {
                return Err(Error::Model(format!("{s} acts outside support {support:?}")));
            }
        }
        Ok(LocalTerm { support, pauli_sum })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn pauli_sum(&self) -> &PauliSum {
        &self.pauli_sum
    }

    /// Dense matrix on the support, local bit `k` ↔ `support[k]`.
    pub fn matrix(&self) -> Result<DMatrix<Complex64>> {
        self.pauli_sum.matrix_on(&self.support)
    }
}

/// Parameters of a buildable model; kept on the Hamiltonian as metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    OneQubitField { alpha: f64, beta: f64 },
    Heisenberg { n: usize, j: f64, b: f64 },
    HeisenbergLongRange { n: usize },
    Tfi { n: usize, j: f64, h: f64 },
    /// `-Σ Z_i Z_{i+1} - h Σ X_i`.
    TfiFerro { n: usize, h: f64 },
    Hubbard { n_sites: usize, u: f64, mu: f64 },
    H2 { g: [f64; 6] },
    Maxcut { n_vertices: usize, edges: Vec<(usize, usize)> },
}

impl ModelSpec {
    pub fn build(&self) -> Result<Hamiltonian> {
        match self {
            ModelSpec::OneQubitField { alpha, beta } => one_qubit_field(*alpha, *beta),
            ModelSpec::Heisenberg { n, j, b } => heisenberg_1d(*n, *j, *b),
            ModelSpec::HeisenbergLongRange { n } => heisenberg_long_range(*n),
            ModelSpec::Tfi { n, j, h } => tfi_1d(*n, *j, *h),
            ModelSpec::TfiFerro { n, h } => tfi_ferro(*n, *h),
            ModelSpec::Hubbard { n_sites, u, mu } => hubbard_1d_jw(*n_sites, *u, *mu),
            ModelSpec::H2 { g } => h2_bk(*g),
            ModelSpec::Maxcut { n_vertices, edges } => maxcut(edges, *n_vertices),
        }
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            ModelSpec::OneQubitField { .. } => 1,
            ModelSpec::Heisenberg { n, .. }
            | ModelSpec::HeisenbergLongRange { n }
            | ModelSpec::Tfi { n, .. }
            | ModelSpec::TfiFerro { n, .. } => *n,
            ModelSpec::Hubbard { n_sites, .. } => 2 * n_sites,
            ModelSpec::H2 { .. } => 2,
            ModelSpec::Maxcut { n_vertices, .. } => *n_vertices,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    n_qubits: usize,
    terms: Vec<LocalTerm>,
    /// Identity contribution kept outside the terms.
    offset: f64,
    model: ModelSpec,
}

impl Hamiltonian {
    pub fn new(n_qubits: usize, terms: Vec<LocalTerm>, offset: f64, model: ModelSpec) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Model("Hamiltonian needs at least one term".into()));
        }
        for t in &terms {
            if let Some(&q) = t.support.iter().find(|&&q| q >= n_qubits) {
                return Err(Error::Model(format!("term support qubit {q} outside {n_qubits} qubits")));
            }
            if t.pauli_sum.terms.iter().any(|(_, s)| s.n_qubits() != n_qubits) {
                return Err(Error::Model("term string register size differs from the Hamiltonian".into()));
            }
        }
        Ok(Hamiltonian { n_qubits, terms, offset, model })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[LocalTerm] {
        &self.terms
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    /// True when no string carries an odd number of Y letters, i.e. the
    /// matrix is real in the computational basis.
    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|t| t.pauli_sum.terms.iter().all(|(_, s)| s.y_count() % 2 == 0))
    }

    /// `Σ_m ⟨ψ|h[m]|ψ⟩ + offset`.
    pub fn energy(&self, state: &StateVector) -> Result<f64> {
        let mut e = self.offset;
        for t in &self.terms {
            e += state.expectation_sum(&t.pauli_sum)?;
        }
        Ok(e)
    }

    /// All terms flattened into one Pauli sum (offset excluded).
    pub fn to_pauli_sum(&self) -> PauliSum {
        PauliSum::new(self.terms.iter().flat_map(|t| t.pauli_sum.terms.iter().copied()).collect())
    }

    /// Dense `2^n × 2^n` matrix including the offset.
    pub fn dense_matrix(&self) -> Result<DMatrix<Complex64>> {
        let all: Vec<usize> = (0..self.n_qubits).collect();
        let mut m = self.to_pauli_sum().matrix_on(&all)?;
        for i in 0..m.nrows() {
            m[(i, i)] += Complex64::new(self.offset, 0.0);
        }
        Ok(m)
    }
}

fn string(n: usize, letters: &[(usize, PauliLetter)]) -> Result<PauliString> {
    PauliString::from_letters(n, letters)
}

fn spin_exchange(n: usize, i: usize, j: usize, scale: f64) -> Result<LocalTerm> {
    use PauliLetter::*;
    let sum = PauliSum::new(vec![
        (scale, string(n, &[(i, X), (j, X)])?),
        (scale, string(n, &[(i, Y), (j, Y)])?),
        (scale, string(n, &[(i, Z), (j, Z)])?),
    ]);
    LocalTerm::new(vec![i, j], sum)
}

fn single_site(n: usize, q: usize, letter: PauliLetter, coeff: f64) -> Result<LocalTerm> {
    LocalTerm::new(vec![q], PauliSum::new(vec![(coeff, PauliString::single(n, q, letter)?)]))
}

fn require_chain(n: usize, what: &str) -> Result<()> {
    if n < 2 {
        return Err(Error::Model(format!("{what} needs at least 2 sites, got {n}")));
    }
    Ok(())
}

/// `αX + βZ` on one qubit.
pub fn one_qubit_field(alpha: f64, beta: f64) -> Result<Hamiltonian> {
    if alpha == 0.0 && beta == 0.0 {
        warn!("one-qubit field model with alpha = beta = 0 is identically zero");
    }
    let sum = PauliSum::new(vec![
        (alpha, PauliString::single(1, 0, PauliLetter::X)?),
        (beta, PauliString::single(1, 0, PauliLetter::Z)?),
    ]);
    Hamiltonian::new(1, vec![LocalTerm::new(vec![0], sum)?], 0.0, ModelSpec::OneQubitField { alpha, beta })
}

/// `J Σ S_i·S_{i+1} + B Σ Z_i`, open chain. Bonds first, then one field term per site.
pub fn heisenberg_1d(n: usize, j: f64, b: f64) -> Result<Hamiltonian> {
    require_chain(n, "Heisenberg chain")?;
    let mut terms = Vec::new();
    for i in 0..n - 1 {
        terms.push(spin_exchange(n, i, i + 1, j / 4.0)?);
    }
    if b != 0.0 {
        for i in 0..n {
            terms.push(single_site(n, i, PauliLetter::Z, b)?);
        }
    }
    Hamiltonian::new(n, terms, 0.0, ModelSpec::Heisenberg { n, j, b })
}

/// `Σ_{i<j} S_i·S_j / (|i-j|+1)`, pairs in lexicographic order.
pub fn heisenberg_long_range(n: usize) -> Result<Hamiltonian> {
    require_chain(n, "long-range Heisenberg chain")?;
    let mut terms = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let coupling = 1.0 / ((j - i) as f64 + 1.0);
            terms.push(spin_exchange(n, i, j, coupling / 4.0)?);
        }
    }
    Hamiltonian::new(n, terms, 0.0, ModelSpec::HeisenbergLongRange { n })
}

/// `J Σ Z_i Z_{i+1} + h Σ X_i`, open chain.
pub fn tfi_1d(n: usize, j: f64, h: f64) -> Result<Hamiltonian> {
    let (terms, _) = tfi_terms(n, j, h)?;
    Hamiltonian::new(n, terms, 0.0, ModelSpec::Tfi { n, j, h })
}

/// Ferromagnetic transverse-field Ising chain `-Σ Z_i Z_{i+1} - h Σ X_i`.
pub fn tfi_ferro(n: usize, h: f64) -> Result<Hamiltonian> {
    let (terms, _) = tfi_terms(n, -1.0, -h)?;
    Hamiltonian::new(n, terms, 0.0, ModelSpec::TfiFerro { n, h })
}

fn tfi_terms(n: usize, j: f64, h: f64) -> Result<(Vec<LocalTerm>, ())> {
    require_chain(n, "transverse-field Ising chain")?;
    use PauliLetter::*;
    let mut terms = Vec::new();
    for i in 0..n - 1 {
        terms.push(LocalTerm::new(vec![i, i + 1], PauliSum::new(vec![(j, string(n, &[(i, Z), (i + 1, Z)])?)]))?);
    }
    if h != 0.0 {
        for i in 0..n {
            terms.push(single_site(n, i, X, h)?);
        }
    }
    Ok((terms, ()))
}

/// Jordan-Wigner Hubbard chain with unit hopping.
///
/// Spin-orbital `2i` is site `i` spin up, `2i+1` spin down. Terms: hoppings
/// `p → p+2` for ascending `p` on support `{p, p+1, p+2}`, then on-site `U`
/// terms, then chemical-potential terms. Zero-weight blocks are omitted.
pub fn hubbard_1d_jw(n_sites: usize, u: f64, mu: f64) -> Result<Hamiltonian> {
    require_chain(n_sites, "Hubbard chain")?;
    use PauliLetter::*;
    let n = 2 * n_sites;
    let mut terms = Vec::new();
    for p in 0..n - 2 {
        let sum = PauliSum::new(vec![
            (-0.5, string(n, &[(p, X), (p + 1, Z), (p + 2, X)])?),
            (-0.5, string(n, &[(p, Y), (p + 1, Z), (p + 2, Y)])?),
        ]);
        terms.push(LocalTerm::new(vec![p, p + 1, p + 2], sum)?);
    }
    if u != 0.0 {
        for i in 0..n_sites {
            let (a, b) = (2 * i, 2 * i + 1);
            let sum = PauliSum::new(vec![
                (u / 4.0, PauliString::identity(n)?),
                (-u / 4.0, string(n, &[(a, Z)])?),
                (-u / 4.0, string(n, &[(b, Z)])?),
                (u / 4.0, string(n, &[(a, Z), (b, Z)])?),
            ]);
            terms.push(LocalTerm::new(vec![a, b], sum)?);
        }
    }
    if mu != 0.0 {
        for p in 0..n {
            let sum = PauliSum::new(vec![(mu / 2.0, PauliString::identity(n)?), (-mu / 2.0, string(n, &[(p, Z)])?)]);
            terms.push(LocalTerm::new(vec![p], sum)?);
        }
    }
    Hamiltonian::new(n, terms, 0.0, ModelSpec::Hubbard { n_sites, u, mu })
}

/// Two-qubit hydrogen Hamiltonian `g0 + g1 Z0 + g2 Z1 + g3 Z0Z1 + g4 X0X1 + g5 Y0Y1`.
///
/// `g0` is carried as the energy offset.
pub fn h2_bk(g: [f64; 6]) -> Result<Hamiltonian> {
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Model("non-finite H2 coefficient".into()));
    }
    use PauliLetter::*;
    let sum = PauliSum::new(vec![
        (g[1], string(2, &[(0, Z)])?),
        (g[2], string(2, &[(1, Z)])?),
        (g[3], string(2, &[(0, Z), (1, Z)])?),
        (g[4], string(2, &[(0, X), (1, X)])?),
        (g[5], string(2, &[(0, Y), (1, Y)])?),
    ]);
    Hamiltonian::new(2, vec![LocalTerm::new(vec![0, 1], sum)?], g[0], ModelSpec::H2 { g })
}

/// One row of the hydrogen coefficient table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H2Row {
    pub bond_length: f64,
    pub g: [f64; 6],
}

/// Parses whitespace-separated rows `R g0 g1 g2 g3 g4 g5`; `#` starts a comment.
pub fn parse_h2_table(text: &str) -> Result<Vec<H2Row>> {
    let mut rows = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(Error::Parse(format!("line {}: expected 7 fields (R g0..g5), found {}", lineno + 1, fields.len())));
        }
        let mut values = [0.0f64; 7];
        for (v, f) in values.iter_mut().zip(&fields) {
            *v = f.parse().map_err(|_| Error::Parse(format!("line {}: '{f}' is not a number", lineno + 1)))?;
        }
        rows.push(H2Row { bond_length: values[0], g: [values[1], values[2], values[3], values[4], values[5], values[6]] });
    }
    Ok(rows)
}

pub fn load_h2_table(path: &Path) -> Result<Vec<H2Row>> {
    parse_h2_table(&std::fs::read_to_string(path)?)
}

/// Looks up the row whose bond length matches within `1e-9`.
pub fn h2_coefficients(rows: &[H2Row], bond_length: f64) -> Result<[f64; 6]> {
    rows.iter()
        .find(|r| (r.bond_length - bond_length).abs() < 1e-9)
        .map(|r| r.g)
        .ok_or_else(|| Error::Model(format!("no H2 coefficients for bond length {bond_length}")))
}

/// `-Σ_{(i,j)∈E} (1 - Z_i Z_j)/2`, one term per edge.
pub fn maxcut(edges: &[(usize, usize)], n_vertices: usize) -> Result<Hamiltonian> {
    if edges.is_empty() {
        return Err(Error::Model("MAXCUT graph without edges".into()));
    }
    let mut terms = Vec::new();
    for &(i, j) in edges {
        if i == j {
            return Err(Error::Model(format!("self-loop on vertex {i}")));
        }
        if i >= n_vertices || j >= n_vertices {
            return Err(Error::Model(format!("edge ({i},{j}) outside {n_vertices} vertices")));
        }
        let sum = PauliSum::new(vec![
            (-0.5, PauliString::identity(n_vertices)?),
            (0.5, string(n_vertices, &[(i, PauliLetter::Z), (j, PauliLetter::Z)])?),
        ]);
        terms.push(LocalTerm::new(vec![i, j], sum)?);
    }
    Hamiltonian::new(n_vertices, terms, 0.0, ModelSpec::Maxcut { n_vertices, edges: edges.to_vec() })
}

/// Six-vertex graph used for the MAXCUT experiments.
pub fn reference_maxcut_edges() -> Vec<(usize, usize)> {
    vec![(0, 3), (1, 4), (2, 3), (2, 4), (2, 5), (4, 5)]
}

/// Number of edges cut by the computational-basis string `z` (bit `q` = vertex `q`).
pub fn cut_value(edges: &[(usize, usize)], z: usize) -> usize {
    edges.iter().filter(|&&(i, j)| (z >> i & 1) != (z >> j & 1)).count()
}
