//! Pauli strings, their group product, and operator pools for the QITE domain basis.
//!
//! A [`PauliString`] is stored in symplectic form: bit `q` of `x_mask` / `z_mask`
//! records the X / Z component on qubit `q`, with `Y = i·X·Z`. Phases never live on
//! the string itself; products return a [`PhasedPauli`].

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register a bitmask string can describe.
pub const MAX_PAULI_QUBITS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PauliLetter {
    X,
    Y,
    Z,
}

impl PauliLetter {
    fn bits(self) -> (bool, bool) {
        match self {
            PauliLetter::X => (true, false),
            PauliLetter::Y => (true, true),
            PauliLetter::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Option<Self> {
        match (x, z) {
            (true, false) => Some(PauliLetter::X),
            (true, true) => Some(PauliLetter::Y),
            (false, true) => Some(PauliLetter::Z),
            (false, false) => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            PauliLetter::X => 'X',
            PauliLetter::Y => 'Y',
            PauliLetter::Z => 'Z',
        }
    }
}

/// Phase-free tensor product of single-qubit Pauli letters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n_qubits: usize,
    x_mask: u64,
    z_mask: u64,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_PAULI_QUBITS {
            return Err(Error::dim(format!("n_qubits must be in 1..={MAX_PAULI_QUBITS}, got {n_qubits}")));
        }
        Ok(PauliString { n_qubits, x_mask: 0, z_mask: 0 })
    }

    pub fn from_letters(n_qubits: usize, letters: &[(usize, PauliLetter)]) -> Result<Self> {
        let mut s = Self::identity(n_qubits)?;
        for &(q, letter) in letters {
            if q >= n_qubits {
                return Err(Error::dim(format!("qubit {q} out of range for {n_qubits} qubits")));
            }
            if s.letter(q).is_some() {
                return Err(Error::Domain(format!("qubit {q} listed twice")));
            }
            s.set(q, Some(letter));
        }
        Ok(s)
    }

    pub fn single(n_qubits: usize, qubit: usize, letter: PauliLetter) -> Result<Self> {
        Self::from_letters(n_qubits, &[(qubit, letter)])
    }

    /// Parses a dense label such as `"XIZY"`; character `k` acts on qubit `k`.
    pub fn from_label(label: &str) -> Result<Self> {
        let n = label.chars().count();
        let mut s = Self::identity(n)?;
        for (q, ch) in label.chars().enumerate() {
            let letter = match ch {
                'I' | 'i' | '_' => None,
                'X' | 'x' => Some(PauliLetter::X),
                'Y' | 'y' => Some(PauliLetter::Y),
                'Z' | 'z' => Some(PauliLetter::Z),
                other => return Err(Error::Parse(format!("bad Pauli letter '{other}' in \"{label}\""))),
            };
            s.set(q, letter);
        }
        Ok(s)
    }

    fn set(&mut self, q: usize, letter: Option<PauliLetter>) {
        let bit = 1u64 << q;
        self.x_mask &= !bit;
        self.z_mask &= !bit;
        if let Some(l) = letter {
            let (x, z) = l.bits();
            if x {
                self.x_mask |= bit;
            }
            if z {
                self.z_mask |= bit;
            }
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x_mask
    }

    pub fn z_mask(&self) -> u64 {
        self.z_mask
    }

    pub fn letter(&self, q: usize) -> Option<PauliLetter> {
        if q >= self.n_qubits {
            return None;
        }
        PauliLetter::from_bits(self.x_mask >> q & 1 == 1, self.z_mask >> q & 1 == 1)
    }

    /// Non-identity letters in ascending qubit order.
    pub fn letters(&self) -> impl Iterator<Item = (usize, PauliLetter)> + '_ {
        (0..self.n_qubits).filter_map(move |q| self.letter(q).map(|l| (q, l)))
    }

    pub fn support(&self) -> Vec<usize> {
        self.letters().map(|(q, _)| q).collect()
    }

    pub fn weight(&self) -> usize {
        (self.x_mask | self.z_mask).count_ones() as usize
    }

    pub fn y_count(&self) -> usize {
        (self.x_mask & self.z_mask).count_ones() as usize
    }

    pub fn is_identity(&self) -> bool {
        self.x_mask == 0 && self.z_mask == 0
    }

    /// True when every non-identity letter sits on one of `qubits`.
    pub fn acts_within(&self, qubits: &[usize]) -> bool {
        let mask = qubits.iter().fold(0u64, |m, &q| if q < 64 { m | 1 << q } else { m });
        (self.x_mask | self.z_mask) & !mask == 0
    }

    /// Dense matrix on the listed qubits; local basis bit `k` belongs to `qubits[k]`.
    pub fn matrix_on(&self, qubits: &[usize]) -> Result<DMatrix<Complex64>> {
        let dim = 1usize << qubits.len();
        let mut m = DMatrix::zeros(dim, dim);
        self.accumulate_on(qubits, 1.0, &mut m)?;
        Ok(m)
    }

    /// Adds `coeff` times the local matrix into `m`.
    fn accumulate_on(&self, qubits: &[usize], coeff: f64, m: &mut DMatrix<Complex64>) -> Result<()> {
        if !self.acts_within(qubits) {
            return Err(Error::Domain(format!("{self} does not act within {qubits:?}")));
        }
        let (mut lx, mut lz) = (0usize, 0usize);
        for (pos, &q) in qubits.iter().enumerate() {
            if self.x_mask >> q & 1 == 1 {
                lx |= 1 << pos;
            }
            if self.z_mask >> q & 1 == 1 {
                lz |= 1 << pos;
            }
        }
        let dim = 1usize << qubits.len();
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::dim(format!("{}x{} matrix on {} qubits", m.nrows(), m.ncols(), qubits.len())));
        }
        let base = Phase::from_power(self.y_count() as u8).to_complex() * coeff;
        for col in 0..dim {
            let sign = if (col & lz).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            m[(col ^ lx, col)] += base * sign;
        }
        Ok(())
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "I");
        }
        let mut first = true;
        for (q, l) in self.letters() {
            if !first {
                write!(f, " ")?;
            }
            write!(f, "{}{}", l.as_char(), q)?;
            first = false;
        }
        Ok(())
    }
}

/// A fourth root of unity, stored as the power of `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    PlusOne,
    PlusI,
    MinusOne,
    MinusI,
}

impl Phase {
    pub fn from_power(k: u8) -> Self {
        match k % 4 {
            0 => Phase::PlusOne,
            1 => Phase::PlusI,
            2 => Phase::MinusOne,
            _ => Phase::MinusI,
        }
    }

    pub fn power(self) -> u8 {
        match self {
            Phase::PlusOne => 0,
            Phase::PlusI => 1,
            Phase::MinusOne => 2,
            Phase::MinusI => 3,
        }
    }

    pub fn to_complex(self) -> Complex64 {
        match self {
            Phase::PlusOne => Complex64::new(1.0, 0.0),
            Phase::PlusI => Complex64::new(0.0, 1.0),
            Phase::MinusOne => Complex64::new(-1.0, 0.0),
            Phase::MinusI => Complex64::new(0.0, -1.0),
        }
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase::from_power(self.power() + rhs.power())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PhasedPauli {
    pub phase: Phase,
    pub string: PauliString,
}

/// Group product `a·b`.
pub fn multiply(a: &PauliString, b: &PauliString) -> Result<PhasedPauli> {
    if a.n_qubits != b.n_qubits {
        return Err(Error::dim(format!("cannot multiply {}-qubit and {}-qubit strings", a.n_qubits, b.n_qubits)));
    }
    let string = PauliString { n_qubits: a.n_qubits, x_mask: a.x_mask ^ b.x_mask, z_mask: a.z_mask ^ b.z_mask };
    // a = i^ya X^xa Z^za; moving Z^za past X^xb costs (-1)^|za & xb|.
    let swaps = (a.z_mask & b.x_mask).count_ones();
    let power = a.y_count() as i64 + b.y_count() as i64 - string.y_count() as i64 + 2 * swaps as i64;
    Ok(PhasedPauli { phase: Phase::from_power(power.rem_euclid(4) as u8), string })
}

/// Real-weighted sum of Pauli strings; Hermitian by construction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PauliSum {
    pub terms: Vec<(f64, PauliString)>,
}

impl PauliSum {
    pub fn new(terms: Vec<(f64, PauliString)>) -> Self {
        PauliSum { terms }
    }

    pub fn single(s: PauliString) -> Self {
        PauliSum { terms: vec![(1.0, s)] }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn matrix_on(&self, qubits: &[usize]) -> Result<DMatrix<Complex64>> {
        let dim = 1usize << qubits.len();
        let mut m = DMatrix::zeros(dim, dim);
        for (c, s) in &self.terms {
            s.accumulate_on(qubits, *c, &mut m)?;
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolKind {
    PauliFull,
    PauliOddY,
    FermionicNumberConserving,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorPool {
    kind: PoolKind,
    domain: Vec<usize>,
    n_qubits: usize,
}

const LETTERS: [Option<PauliLetter>; 4] = [None, Some(PauliLetter::X), Some(PauliLetter::Y), Some(PauliLetter::Z)];

impl OperatorPool {
    pub fn new(kind: PoolKind, domain: Vec<usize>, n_qubits: usize) -> Result<Self> {
        if domain.is_empty() {
            return Err(Error::InvalidPool("empty domain".into()));
        }
        let mut seen = domain.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != domain.len() {
            return Err(Error::InvalidPool(format!("repeated qubit in domain {domain:?}")));
        }
        if let Some(&q) = domain.iter().find(|&&q| q >= n_qubits) {
            return Err(Error::InvalidPool(format!("domain qubit {q} outside {n_qubits}-qubit register")));
        }
        if domain.len() > 31 {
            return Err(Error::Resource(format!("pool domain of {} qubits is too large to enumerate", domain.len())));
        }
        Ok(OperatorPool { kind, domain, n_qubits })
    }

    pub fn kind(&self) -> PoolKind {
        self.kind
    }

    pub fn domain(&self) -> &[usize] {
        &self.domain
    }

    /// All Pauli strings on the domain in base-4 order (I < X < Y < Z), first
    /// domain qubit most significant.
    pub fn pauli_strings(&self) -> Result<Vec<PauliString>> {
        let d = self.domain.len();
        let total = 1usize << (2 * d);
        let mut out = Vec::with_capacity(total);
        for idx in 0..total {
            let mut s = PauliString::identity(self.n_qubits)?;
            for (pos, &q) in self.domain.iter().enumerate() {
                let digit = (idx >> (2 * (d - 1 - pos))) & 3;
                s.set(q, LETTERS[digit]);
            }
            out.push(s);
        }
        Ok(out)
    }

    /// The basis operators spanning the reconstruction generator.
    pub fn enumerate(&self) -> Result<Vec<PauliSum>> {
        match self.kind {
            PoolKind::PauliFull => Ok(self.pauli_strings()?.into_iter().map(PauliSum::single).collect()),
            PoolKind::PauliOddY => Ok(self
                .pauli_strings()?
                .into_iter()
                .filter(|s| s.y_count() % 2 == 1)
                .map(PauliSum::single)
                .collect()),
            PoolKind::FermionicNumberConserving => fermionic_pool(&self.domain, self.n_qubits),
        }
    }
}

/// Number of `d`-qubit Pauli strings carrying an odd number of Y letters.
pub fn odd_y_count(d: u32) -> Result<u64> {
    if d == 0 {
        return Err(Error::Domain("odd-Y count needs D >= 1".into()));
    }
    if d > 31 {
        return Err(Error::Domain(format!("odd-Y count overflows for D = {d}")));
    }
    let two_d = 1u64 << d;
    Ok(two_d * (two_d - 1) / 2)
}

/// Same count built by appending one letter at a time.
pub fn odd_y_count_recursive(d: u32) -> Result<u64> {
    if d == 0 {
        return Err(Error::Domain("odd-Y count needs D >= 1".into()));
    }
    if d > 31 {
        return Err(Error::Domain(format!("odd-Y count overflows for D = {d}")));
    }
    let mut y = 1u64;
    for k in 1..d {
        y = 3 * y + ((1u64 << (2 * k)) - y);
    }
    Ok(y)
}

type ComplexSum = BTreeMap<PauliString, Complex64>;

fn sum_mul(a: &ComplexSum, b: &ComplexSum) -> Result<ComplexSum> {
    let mut out = ComplexSum::new();
    for (sa, ca) in a {
        for (sb, cb) in b {
            let p = multiply(sa, sb)?;
            *out.entry(p.string).or_insert(Complex64::new(0.0, 0.0)) += ca * cb * p.phase.to_complex();
        }
    }
    out.retain(|_, c| c.norm() > 1e-14);
    Ok(out)
}

/// Jordan-Wigner image of a ladder operator on `qubit`, with the parity string
/// starting at `floor` (strings below the domain cancel in pairs).
fn jw_ladder(n_qubits: usize, floor: usize, qubit: usize, creation: bool) -> Result<ComplexSum> {
    let mut zs: Vec<(usize, PauliLetter)> = (floor..qubit).map(|k| (k, PauliLetter::Z)).collect();
    let mut with = |letter| -> Result<PauliString> {
        zs.push((qubit, letter));
        let s = PauliString::from_letters(n_qubits, &zs);
        zs.pop();
        s
    };
    let y_coeff = if creation { Complex64::new(0.0, -0.5) } else { Complex64::new(0.0, 0.5) };
    let mut out = ComplexSum::new();
    out.insert(with(PauliLetter::X)?, Complex64::new(0.5, 0.0));
    out.insert(with(PauliLetter::Y)?, y_coeff);
    Ok(out)
}

/// Hermitian parts of the number-conserving fermionic operator strings on the
/// domain orbitals, mapped to real Pauli sums.
fn fermionic_pool(domain: &[usize], n_qubits: usize) -> Result<Vec<PauliSum>> {
    let mut orbitals = domain.to_vec();
    orbitals.sort_unstable();
    let floor = orbitals[0];
    let identity = PauliString::identity(n_qubits)?;
    let one: ComplexSum = [(identity, Complex64::new(1.0, 0.0))].into_iter().collect();

    let d = orbitals.len();
    let mut seen: BTreeMap<Vec<(PauliString, i64)>, ()> = BTreeMap::new();
    let mut pool = Vec::new();
    // Per orbital: 0 -> 1, 1 -> f, 2 -> f^dagger, 3 -> f^dagger f.
    for code in 0..(1usize << (2 * d)) {
        let choice: Vec<usize> = (0..d).map(|pos| (code >> (2 * (d - 1 - pos))) & 3).collect();
        let creations = choice.iter().filter(|&&c| c == 2 || c == 3).count();
        let annihilations = choice.iter().filter(|&&c| c == 1 || c == 3).count();
        if creations != annihilations {
            continue;
        }
        let mut op = one.clone();
        for (pos, &c) in choice.iter().enumerate() {
            let q = orbitals[pos];
            let factor = match c {
                0 => continue,
                1 => jw_ladder(n_qubits, floor, q, false)?,
                2 => jw_ladder(n_qubits, floor, q, true)?,
                _ => sum_mul(&jw_ladder(n_qubits, floor, q, true)?, &jw_ladder(n_qubits, floor, q, false)?)?,
            };
            op = sum_mul(&op, &factor)?;
        }
        // O + O^dagger and i(O - O^dagger) have real Pauli coefficients.
        let hermitian: Vec<(f64, PauliString)> = op.iter().map(|(s, c)| (2.0 * c.re, *s)).collect();
        let anti: Vec<(f64, PauliString)> = op.iter().map(|(s, c)| (-2.0 * c.im, *s)).collect();
        for candidate in [hermitian, anti] {
            if let Some(sum) = canonical_generator(candidate) {
                let key: Vec<(PauliString, i64)> =
                    sum.terms.iter().map(|(c, s)| (*s, (c * 1e9).round() as i64)).collect();
                if seen.insert(key, ()).is_none() {
                    pool.push(sum);
                }
            }
        }
    }
    Ok(pool)
}

/// Drops zero weights, scales to unit 2-norm and fixes the sign of the first term.
fn canonical_generator(terms: Vec<(f64, PauliString)>) -> Option<PauliSum> {
    let mut kept: Vec<(f64, PauliString)> = terms.into_iter().filter(|(c, _)| c.abs() > 1e-12).collect();
    if kept.is_empty() {
        return None;
    }
    kept.sort_by_key(|k| k.1);
    let norm = kept.iter().map(|(c, _)| c * c).sum::<f64>().sqrt();
    let sign = if kept[0].0 < 0.0 { -1.0 } else { 1.0 };
    Some(PauliSum::new(kept.into_iter().map(|(c, s)| (sign * c / norm, s)).collect()))
}
