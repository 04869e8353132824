//! Pauli-string algebra over packed symplectic bit vectors, and Pauli channels.
//!
//! Convention, fixed once and exercised by the dense oracles in the tests:
//! a `PauliString` represents the operator
//!
//! ```text
//!     i^phase_exponent · P_0 ⊗ P_1 ⊗ … ⊗ P_{n−1},    P_q ∈ {I, X, Y, Z}
//! ```
//!
//! with the Hermitian Y (so Y = iXZ). Under this convention X·Z = −iY, i.e.
//! the product carries `phase_exponent = 3`. Conjugation by the Clifford
//! gates used in the simulator only ever toggles the sign (adds 2 to the
//! exponent), since Hermiticity is preserved.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;


/// One tensor factor of a Pauli string.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum PauliKind {
    I,
    X,
    Y,
    Z,
}

impl PauliKind {
    /// The (x, z) symplectic bits of this factor.
    pub fn bits(self) -> (u8, u8) {
        match self {
            PauliKind::I => (0, 0),
            PauliKind::X => (1, 0),
            PauliKind::Y => (1, 1),
            PauliKind::Z => (0, 1),
        }
    }

    pub fn from_bits(x: u8, z: u8) -> Self {
        match (x & 1, z & 1) {
            (0, 0) => PauliKind::I,
            (1, 0) => PauliKind::X,
            (1, 1) => PauliKind::Y,
            (0, 1) => PauliKind::Z,
            _ => unreachable!(),
        }
    }

    pub fn label(self) -> char {
        match self {
            PauliKind::I => 'I',
            PauliKind::X => 'X',
            PauliKind::Y => 'Y',
            PauliKind::Z => 'Z',
        }
    }

    pub fn from_label(c: char) -> Option<Self> {
        match c {
            'I' => Some(PauliKind::I),
            'X' => Some(PauliKind::X),
            'Y' => Some(PauliKind::Y),
            'Z' => Some(PauliKind::Z),
            _ => None,
        }
    }

    /// All four kinds in canonical order.
    pub const ALL: [PauliKind; 4] = [PauliKind::I, PauliKind::X, PauliKind::Y, PauliKind::Z];
    /// The three non-identity kinds, in the order used for fault labels.
    pub const FAULTS: [PauliKind; 3] = [PauliKind::X, PauliKind::Y, PauliKind::Z];
}

/// A signed n-qubit Pauli operator with packed symplectic bit vectors.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    phase_exponent: u8,
}

#[inline]
fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

impl PauliString {
    /// The identity operator on `n` qubits.
    pub fn identity(n: usize) -> Self {
        let w = words_for(n);
        PauliString { n, x: vec![0; w], z: vec![0; w], phase_exponent: 0 }
    }

    /// A single-qubit Pauli embedded on qubit `q` of `n`.
    pub fn single(n: usize, q: usize, kind: PauliKind) -> Self {
        let mut p = Self::identity(n);
        p.set_kind(q, kind);
        p
    }

    /// Build from per-qubit kinds.
    pub fn from_kinds(kinds: &[PauliKind]) -> Self {
        let mut p = Self::identity(kinds.len());
        for (q, &k) in kinds.iter().enumerate() {
            p.set_kind(q, k);
        }
        p
    }

    /// Parse a label like `XIZY`, `+XZ`, `-iYY`.
    pub fn from_label(s: &str) -> Option<Self> {
        let (phase, rest) = if let Some(r) = s.strip_prefix("+i") {
            (1u8, r)
        } else if let Some(r) = s.strip_prefix("-i") {
            (3u8, r)
        } else if let Some(r) = s.strip_prefix('+') {
            (0u8, r)
        } else if let Some(r) = s.strip_prefix('-') {
            (2u8, r)
        } else {
            (0u8, s)
        };
        let mut kinds = Vec::with_capacity(rest.len());
        for c in rest.chars() {
            kinds.push(PauliKind::from_label(c)?);
        }
        let mut p = Self::from_kinds(&kinds);
        p.phase_exponent = phase;
        Some(p)
    }

    /// Render as `+XIZY` style label (phase prefix `+`, `+i`, `-`, `-i`).
    pub fn label(&self) -> String {
        let prefix = match self.phase_exponent {
            0 => "+",
            1 => "+i",
            2 => "-",
            3 => "-i",
            _ => unreachable!(),
        };
        let mut s = String::with_capacity(prefix.len() + self.n);
        s.push_str(prefix);
        for q in 0..self.n {
            s.push(self.kind_at(q).label());
        }
        s
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn phase_exponent(&self) -> u8 {
        self.phase_exponent
    }

    pub fn set_phase_exponent(&mut self, e: u8) {
        self.phase_exponent = e & 3;
    }

    /// Multiply the global phase by i^k.
    pub fn mul_phase(&mut self, k: u8) {
        self.phase_exponent = (self.phase_exponent + k) & 3;
    }

    #[inline]
    pub fn x_bit(&self, q: usize) -> u8 {
        ((self.x[q / 64] >> (q % 64)) & 1) as u8
    }

    #[inline]
    pub fn z_bit(&self, q: usize) -> u8 {
        ((self.z[q / 64] >> (q % 64)) & 1) as u8
    }

    #[inline]
    fn set_x_bit(&mut self, q: usize, b: u8) {
        let (w, s) = (q / 64, q % 64);
        self.x[w] = (self.x[w] & !(1 << s)) | (((b & 1) as u64) << s);
    }

    #[inline]
    fn set_z_bit(&mut self, q: usize, b: u8) {
        let (w, s) = (q / 64, q % 64);
        self.z[w] = (self.z[w] & !(1 << s)) | (((b & 1) as u64) << s);
    }

    pub fn kind_at(&self, q: usize) -> PauliKind {
        PauliKind::from_bits(self.x_bit(q), self.z_bit(q))
    }

    /// Replace the tensor factor at `q` (global phase untouched).
    pub fn set_kind(&mut self, q: usize, kind: PauliKind) {
        assert!(q < self.n, "qubit index {q} out of range ({})", self.n);
        let (xb, zb) = kind.bits();
        self.set_x_bit(q, xb);
        self.set_z_bit(q, zb);
    }

    /// Number of non-identity tensor factors.
    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(&xw, &zw)| (xw | zw).count_ones() as usize)
            .sum()
    }

    /// Qubits with a non-identity factor, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&q| self.kind_at(q) != PauliKind::I).collect()
    }

    /// True iff the operator is exactly the identity (trivial bits, phase 0).
    pub fn is_identity(&self) -> bool {
        self.phase_exponent == 0 && self.has_trivial_bits()
    }

    /// True iff every tensor factor is I (the phase may be anything).
    pub fn has_trivial_bits(&self) -> bool {
        self.x.iter().all(|&w| w == 0) && self.z.iter().all(|&w| w == 0)
    }

    fn y_count(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(&xw, &zw)| (xw & zw).count_ones() as usize)
            .sum()
    }

    /// Operator product `self · other` with exact phase tracking.
    ///
    /// Internally both factors convert to X^x Z^z form (exponent of i picks up
    /// one unit per Y factor), where reordering Z^z1 past X^x2 contributes
    /// (−1)^(z1·x2); the result converts back.
    pub fn mul(&self, other: &PauliString) -> PauliString {
        assert_eq!(self.n, other.n, "length mismatch: {} vs {}", self.n, other.n);
        let t1 = self.phase_exponent as usize + self.y_count();
        let t2 = other.phase_exponent as usize + other.y_count();
        let cross: u32 = self
            .z
            .iter()
            .zip(&other.x)
            .map(|(&zw, &xw)| (zw & xw).count_ones())
            .sum();
        let x: Vec<u64> = self.x.iter().zip(&other.x).map(|(&a, &b)| a ^ b).collect();
        let z: Vec<u64> = self.z.iter().zip(&other.z).map(|(&a, &b)| a ^ b).collect();
        let mut out = PauliString { n: self.n, x, z, phase_exponent: 0 };
        let t = t1 + t2 + 2 * (cross as usize & 1);
        out.phase_exponent = ((t + 4 * self.n).wrapping_sub(out.y_count()) & 3) as u8;
        out
    }

    /// In-place left multiplication by a single-qubit Pauli:
    /// self ← P_q · self, with exact phase tracking (allocation-free
    /// equivalent of `single(n, q, kind).mul(&self)`).
    pub fn left_mul_single(&mut self, q: usize, kind: PauliKind) {
        let (xp, zp) = kind.bits();
        if xp | zp == 0 {
            return;
        }
        let xs = self.x_bit(q);
        let zs = self.z_bit(q);
        let xn = xp ^ xs;
        let zn = zp ^ zs;
        let t = (xp & zp) as usize
            + (xs & zs) as usize
            + 2 * (zp & xs) as usize
            + 4
            - (xn & zn) as usize;
        self.set_x_bit(q, xn);
        self.set_z_bit(q, zn);
        self.mul_phase((t & 3) as u8);
    }

    /// Hermitian adjoint (inverts the phase of non-Hermitian strings).
    pub fn adjoint(&self) -> PauliString {
        let mut out = self.clone();
        if out.phase_exponent & 1 == 1 {
            out.phase_exponent ^= 2;
        }
        out
    }

    /// Do the two operators commute? (Symplectic form even.)
    pub fn commutes(&self, other: &PauliString) -> bool {
        assert_eq!(self.n, other.n, "length mismatch: {} vs {}", self.n, other.n);
        let s: u32 = self
            .x
            .iter()
            .zip(&other.z)
            .map(|(&a, &b)| (a & b).count_ones())
            .chain(self.z.iter().zip(&other.x).map(|(&a, &b)| (a & b).count_ones()))
            .sum();
        s & 1 == 0
    }

    /// Tensor product `self ⊗ other` (other's qubits appended after self's).
    pub fn tensor(&self, other: &PauliString) -> PauliString {
        let n = self.n + other.n;
        let mut out = PauliString::identity(n);
        for q in 0..self.n {
            out.set_kind(q, self.kind_at(q));
        }
        for q in 0..other.n {
            out.set_kind(self.n + q, other.kind_at(q));
        }
        out.phase_exponent = (self.phase_exponent + other.phase_exponent) & 3;
        out
    }

    /// Restrict to a subset of qubits (phase kept).
    pub fn restrict(&self, qubits: &[usize]) -> PauliString {
        let mut out = PauliString::identity(qubits.len());
        for (i, &q) in qubits.iter().enumerate() {
            out.set_kind(i, self.kind_at(q));
        }
        out.phase_exponent = self.phase_exponent;
        out
    }

    /// In-place conjugation by a Hadamard on `q`: P ← H P H.
    pub fn conj_h(&mut self, q: usize) {
        let xb = self.x_bit(q);
        let zb = self.z_bit(q);
        if xb & zb == 1 {
            self.mul_phase(2);
        }
        self.set_x_bit(q, zb);
        self.set_z_bit(q, xb);
    }

    /// In-place conjugation by CNOT with control `c`, target `t`.
    pub fn conj_cnot(&mut self, c: usize, t: usize) {
        let (xc, zc) = (self.x_bit(c), self.z_bit(c));
        let (xt, zt) = (self.x_bit(t), self.z_bit(t));
        if xc & zt & (1 ^ xt ^ zc) == 1 {
            self.mul_phase(2);
        }
        self.set_x_bit(t, xt ^ xc);
        self.set_z_bit(c, zc ^ zt);
    }

    /// In-place conjugation by a Pauli gate of `kind` on `q`.
    pub fn conj_pauli(&mut self, q: usize, kind: PauliKind) {
        let (xb, zb) = (self.x_bit(q), self.z_bit(q));
        let flip = match kind {
            PauliKind::I => 0,
            PauliKind::X => zb,
            PauliKind::Y => xb ^ zb,
            PauliKind::Z => xb,
        };
        if flip == 1 {
            self.mul_phase(2);
        }
    }

    /// Lexicographic key (x bits then z bits, qubit 0 most significant) used
    /// for canonical ordering of channel entries.
    pub fn lex_key(&self) -> (Vec<u8>, Vec<u8>) {
        let xb = (0..self.n).map(|q| self.x_bit(q)).collect();
        let zb = (0..self.n).map(|q| self.z_bit(q)).collect();
        (xb, zb)
    }

    /// Copy with phase exponent forced to 0 (the "phase-free" representative).
    pub fn phase_free(&self) -> PauliString {
        let mut p = self.clone();
        p.phase_exponent = 0;
        p
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({})", self.label())
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// A probability distribution over phase-free Pauli strings: a Pauli channel
/// ρ ↦ Σ_P probs[P] · P ρ P.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliChannel {
    n: usize,
    probs: BTreeMap<(Vec<u8>, Vec<u8>), f64>,
}

impl PauliChannel {
    /// The identity channel on `n` qubits.
    pub fn identity(n: usize) -> Self {
        let mut probs = BTreeMap::new();
        probs.insert(PauliString::identity(n).lex_key(), 1.0);
        PauliChannel { n, probs }
    }

    /// Build from (operator, probability) pairs; merges duplicates, drops
    /// zero entries, and validates normalization to 1e-12.
    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (PauliString, f64)>) -> Self {
        let mut probs: BTreeMap<(Vec<u8>, Vec<u8>), f64> = BTreeMap::new();
        for (p, w) in pairs {
            assert_eq!(p.n(), n, "channel key length mismatch");
            assert!(w >= -1e-12, "negative probability {w}");
            if w > 0.0 {
                *probs.entry(p.phase_free().lex_key()).or_insert(0.0) += w;
            }
        }
        let total: f64 = probs.values().sum();
        assert!((total - 1.0).abs() < 1e-12, "probabilities sum to {total}, not 1");
        PauliChannel { n, probs }
    }

    /// Single-qubit depolarizing channel: identity with prob 1−p, each of
    /// X, Y, Z with prob p/3.
    pub fn depolarizing(p: f64) -> Self {
        assert!((0.0..=1.0).contains(&p));
        Self::from_pairs(
            1,
            [
                (PauliString::identity(1), 1.0 - p),
                (PauliString::single(1, 0, PauliKind::X), p / 3.0),
                (PauliString::single(1, 0, PauliKind::Y), p / 3.0),
                (PauliString::single(1, 0, PauliKind::Z), p / 3.0),
            ],
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Probability of a given (phase-free) Pauli.
    pub fn prob(&self, p: &PauliString) -> f64 {
        *self.probs.get(&p.phase_free().lex_key()).unwrap_or(&0.0)
    }

    /// Entries in canonical lexicographic order.
    pub fn entries(&self) -> Vec<(PauliString, f64)> {
        self.probs
            .iter()
            .map(|((xb, zb), &w)| {
                let mut p = PauliString::identity(self.n);
                for q in 0..self.n {
                    p.set_kind(q, PauliKind::from_bits(xb[q], zb[q]));
                }
                (p, w)
            })
            .collect()
    }

    /// Serial composition (independent Pauli errors convolve).
    pub fn compose(&self, other: &PauliChannel) -> PauliChannel {
        assert_eq!(self.n, other.n);
        let mut pairs: Vec<(PauliString, f64)> = Vec::new();
        for (p, wp) in self.entries() {
            for (q, wq) in other.entries() {
                pairs.push((p.mul(&q), wp * wq));
            }
        }
        PauliChannel::from_pairs(self.n, pairs)
    }

    /// Tensor product channel.
    pub fn tensor(&self, other: &PauliChannel) -> PauliChannel {
        let mut pairs: Vec<(PauliString, f64)> = Vec::new();
        for (p, wp) in self.entries() {
            for (q, wq) in other.entries() {
                pairs.push((p.tensor(&q), wp * wq));
            }
        }
        PauliChannel::from_pairs(self.n + other.n, pairs)
    }

    /// Total-variation distance between the probability vectors.
    pub fn tv_distance(&self, other: &PauliChannel) -> f64 {
        assert_eq!(self.n, other.n);
        let mut keys: Vec<_> = self.probs.keys().chain(other.probs.keys()).cloned().collect();
        keys.sort();
        keys.dedup();
        0.5 * keys
            .iter()
            .map(|k| {
                (self.probs.get(k).unwrap_or(&0.0) - other.probs.get(k).unwrap_or(&0.0)).abs()
            })
            .sum::<f64>()
    }

    /// Sample one Pauli according to the distribution.
    pub fn sample(&self, rng: &mut impl rand::Rng) -> PauliString {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let entries = self.entries();
        for (p, w) in &entries {
            acc += w;
            if u < acc {
                return p.clone();
            }
        }
        entries.last().map(|(p, _)| p.clone()).unwrap_or_else(|| PauliString::identity(self.n))
    }
}

/// Binary entropy in bits, with 0·log 0 = 0.
pub fn binary_entropy(p: f64) -> f64 {
    assert!((-1e-15..=1.0 + 1e-15).contains(&p), "binary_entropy({p}) out of [0,1]");
    let p = p.clamp(0.0, 1.0);
    let mut s = 0.0;
    if p > 0.0 {
        s -= p * p.log2();
    }
    if p < 1.0 {
        s -= (1.0 - p) * (1.0 - p).log2();
    }
    s
}

/// Shannon entropy (bits) of a probability vector.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn left_mul_single_agrees_with_mul_for_all_factor_pairs() {
        use PauliKind::{I, X, Y, Z};
        for existing in [I, X, Y, Z] {
            for phase in 0..4u8 {
                for kind in [I, X, Y, Z] {
                    let mut p = PauliString::identity(3);
                    p.set_kind(1, existing);
                    p.set_kind(2, Y);
                    p.set_phase_exponent(phase);
                    let want = PauliString::single(3, 1, kind).mul(&p);
                    p.left_mul_single(1, kind);
                    assert_eq!(p, want, "P_{kind:?} * {existing:?} (phase {phase})");
                }
            }
        }
    }

    #[test]
    fn single_qubit_products() {
        let x = PauliString::from_label("X").unwrap();
        let y = PauliString::from_label("Y").unwrap();
        let z = PauliString::from_label("Z").unwrap();

        // X·X = I.
        let xx = x.mul(&x);
        assert!(xx.is_identity());

        // X·Z = −iY under the Y = iXZ convention.
        let xz = x.mul(&z);
        assert_eq!(xz.kind_at(0), PauliKind::Y);
        assert_eq!(xz.phase_exponent(), 3);

        // Z·X = +iY.
        let zx = z.mul(&x);
        assert_eq!(zx.phase_exponent(), 1);

        // X·Y = iZ, Y·X = −iZ, Y·Y = I.
        assert_eq!(x.mul(&y).label(), "+iZ");
        assert_eq!(y.mul(&x).label(), "-iZ");
        assert!(y.mul(&y).is_identity());
    }

    #[test]
    fn disjoint_supports_commute_and_tensor() {
        let a = PauliString::from_label("XI").unwrap();
        let b = PauliString::from_label("IZ").unwrap();
        let ab = a.mul(&b);
        assert_eq!(ab.label(), "+XZ");
        assert!(a.commutes(&b));

        let x = PauliString::from_label("X").unwrap();
        let z = PauliString::from_label("Z").unwrap();
        assert_eq!(x.tensor(&z).label(), "+XZ");
    }

    #[test]
    fn commutation_cases() {
        let xz = PauliString::from_label("XZ").unwrap();
        let zx = PauliString::from_label("ZX").unwrap();
        assert!(xz.commutes(&zx), "two anticommuting factors compose to commuting");
        let x = PauliString::from_label("X").unwrap();
        let z = PauliString::from_label("Z").unwrap();
        assert!(!x.commutes(&z));
        assert!(x.commutes(&x));
    }

    #[test]
    fn label_round_trip() {
        for s in ["+XIZY", "-iYY", "+iZ", "-X", "+IIII"] {
            let p = PauliString::from_label(s).unwrap();
            assert_eq!(p.label(), s.to_string());
        }
        // Bare labels parse with phase 0.
        assert_eq!(PauliString::from_label("XZ").unwrap().label(), "+XZ");
    }

    #[test]
    fn conjugation_rules() {
        // H: X ↔ Z, Y → −Y.
        let mut p = PauliString::from_label("X").unwrap();
        p.conj_h(0);
        assert_eq!(p.label(), "+Z");
        let mut p = PauliString::from_label("Y").unwrap();
        p.conj_h(0);
        assert_eq!(p.label(), "-Y");

        // CNOT: X_c → X_c X_t, Z_t → Z_c Z_t, Y_c Y_t → −X_c Z_t.
        let mut p = PauliString::from_label("XI").unwrap();
        p.conj_cnot(0, 1);
        assert_eq!(p.label(), "+XX");
        let mut p = PauliString::from_label("IZ").unwrap();
        p.conj_cnot(0, 1);
        assert_eq!(p.label(), "+ZZ");
        let mut p = PauliString::from_label("YY").unwrap();
        p.conj_cnot(0, 1);
        assert_eq!(p.label(), "-XZ");

        // Conjugation by a Pauli gate flips anticommuting frames.
        let mut p = PauliString::from_label("Z").unwrap();
        p.conj_pauli(0, PauliKind::X);
        assert_eq!(p.label(), "-Z");
        let mut p = PauliString::from_label("X").unwrap();
        p.conj_pauli(0, PauliKind::X);
        assert_eq!(p.label(), "+X");
    }

    #[test]
    fn weight_and_support() {
        let p = PauliString::from_label("XIYZI").unwrap();
        assert_eq!(p.weight(), 3);
        assert_eq!(p.support(), vec![0, 2, 3]);
    }

    #[test]
    fn adjoint_inverts() {
        for s in ["+X", "+iZ", "-iY", "-XZ", "+iXY"] {
            let p = PauliString::from_label(s).unwrap();
            let prod = p.mul(&p.adjoint());
            assert!(prod.is_identity(), "{s}: P·P† = {}", prod.label());
        }
    }

    #[test]
    fn depolarizing_channel_shape() {
        let d = PauliChannel::depolarizing(0.3);
        assert!((d.prob(&PauliString::identity(1)) - 0.7).abs() < 1e-15);
        for k in PauliKind::FAULTS {
            assert!((d.prob(&PauliString::single(1, 0, k)) - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn channel_composition_of_two_depolarizings() {
        // Composing D_p with D_q: identity coefficient (1−p)(1−q) + p·q/3.
        let p = 0.2;
        let q = 0.15;
        let c = PauliChannel::depolarizing(p).compose(&PauliChannel::depolarizing(q));
        let id_prob = (1.0 - p) * (1.0 - q) + p * q / 3.0;
        assert!((c.prob(&PauliString::identity(1)) - id_prob).abs() < 1e-12);
        // Each non-identity entry equals (1 − id_prob)/3 by symmetry.
        let x_prob = c.prob(&PauliString::single(1, 0, PauliKind::X));
        assert!((x_prob - (1.0 - id_prob) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn tv_distance_basics() {
        let a = PauliChannel::depolarizing(0.0);
        let b = PauliChannel::depolarizing(0.3);
        assert!(a.tv_distance(&a).abs() < 1e-15);
        assert!((a.tv_distance(&b) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert!((binary_entropy(0.5) - 1.0).abs() < 1e-15);
        assert!((binary_entropy(0.11) - 0.4999409).abs() < 1e-4);
        for i in 1..10 {
            let p = i as f64 / 10.0;
            assert!((binary_entropy(p) - binary_entropy(1.0 - p)).abs() < 1e-12);
        }
    }
}
