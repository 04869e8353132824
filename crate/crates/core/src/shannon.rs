//! Desk-scale information-theory laboratory: weak typicality for classical
//! sources (plain and conditional), quantum typical projectors, the
//! pretty-good measurement, and the random-codebook packing experiment with
//! its explicit success floor.
//!
//! Conventions: all entropies and typicality slacks are in bits (base-2
//! logarithms); concentration tails use the natural exponential. Budgets
//! keep everything exhaustive or dense: sequence enumerations up to 10^7,
//! dense operators up to dimension 2^10.

use rand::Rng;
use rayon::prelude::*;

use crate::dense::{
    dagger, eigh, eye, kron, trace, trace_norm_hermitian, CMat, DensityOperator, C64,
};
use crate::rng::{stream, DOMAIN_SHANNON};
use crate::FtError;

const ENUMERATION_BUDGET: u64 = 10_000_000;
const DENSE_BUDGET: usize = 1 << 10;

// ---------------------------------------------------------------------------
// Classical typicality
// ---------------------------------------------------------------------------

/// A block-length-n typicality question about an i.i.d. source.
#[derive(Clone, Debug)]
pub struct TypicalSetSpec {
    pub dist: Vec<f64>,
    pub n: usize,
    pub delta: f64,
}

impl TypicalSetSpec {
    pub fn new(dist: Vec<f64>, n: usize, delta: f64) -> Result<Self, FtError> {
        if dist.is_empty() || dist.iter().any(|&p| !(0.0..=1.0 + 1e-12).contains(&p)) {
            return Err(FtError::Invalid("distribution entries must lie in [0,1]".into()));
        }
        let total: f64 = dist.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(FtError::Invalid(format!("distribution sums to {total}, not 1")));
        }
        if n == 0 {
            return Err(FtError::Invalid("block length must be at least 1".into()));
        }
        if delta <= 0.0 {
            return Err(FtError::Invalid("typicality slack must be positive".into()));
        }
        Ok(TypicalSetSpec { dist, n, delta })
    }

    /// Shannon entropy of the source in bits.
    pub fn entropy(&self) -> f64 {
        shannon_entropy(&self.dist)
    }

    /// Smallest nonzero symbol probability.
    pub fn min_support_prob(&self) -> f64 {
        self.dist.iter().cloned().filter(|&p| p > 0.0).fold(1.0, f64::min)
    }
}

pub fn shannon_entropy(dist: &[f64]) -> f64 {
    dist.iter().map(|&p| if p > 0.0 { -p * p.log2() } else { 0.0 }).sum()
}

/// log₂ probability of a sequence under the i.i.d. source; −∞ when any
/// symbol has probability zero.
pub fn sequence_log2_prob(dist: &[f64], seq: &[u8]) -> f64 {
    let mut s = 0.0;
    for &x in seq {
        let p = dist[x as usize];
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        s += p.log2();
    }
    s
}

/// Membership in the δ-typical set: |−(1/n)log₂ p(xⁿ) − H| ≤ δ.
pub fn is_typical(spec: &TypicalSetSpec, seq: &[u8]) -> bool {
    assert_eq!(seq.len(), spec.n);
    let lp = sequence_log2_prob(&spec.dist, seq);
    if lp == f64::NEG_INFINITY {
        return false;
    }
    (-lp / spec.n as f64 - spec.entropy()).abs() <= spec.delta
}

fn decode_sequence(mut index: u64, alphabet: usize, n: usize) -> Vec<u8> {
    let mut seq = vec![0u8; n];
    for slot in (0..n).rev() {
        seq[slot] = (index % alphabet as u64) as u8;
        index /= alphabet as u64;
    }
    seq
}

fn enumeration_size(alphabet: usize, n: usize) -> Result<u64, FtError> {
    let total = (alphabet as u64).checked_pow(n as u32).filter(|&t| t <= ENUMERATION_BUDGET);
    total.ok_or_else(|| {
        FtError::Budget(format!(
            "enumerating {alphabet}^{n} sequences exceeds the 10^7 budget"
        ))
    })
}

/// The full δ-typical set by exhaustive enumeration.
pub fn typical_set(spec: &TypicalSetSpec) -> Result<Vec<Vec<u8>>, FtError> {
    let total = enumeration_size(spec.dist.len(), spec.n)?;
    Ok((0..total)
        .map(|i| decode_sequence(i, spec.dist.len(), spec.n))
        .filter(|s| is_typical(spec, s))
        .collect())
}

/// Every typical sequence obeys p(xⁿ) ≤ 2^{−n(H−δ)}. True on all inputs —
/// a falsification would expose an implementation bug, not new mathematics.
pub fn check_equipartition(spec: &TypicalSetSpec) -> Result<bool, FtError> {
    let cap = -(spec.n as f64) * (spec.entropy() - spec.delta);
    Ok(typical_set(spec)?
        .iter()
        .all(|s| sequence_log2_prob(&spec.dist, s) <= cap + 1e-9))
}

/// The Hoeffding concentration floor 1 − exp(−2nδ²/log₂(p_min)²). When the
/// smallest support probability is 1 the empirical entropy is deterministic
/// and the floor is exactly 1.
pub fn concentration_floor(n: usize, delta: f64, min_prob: f64) -> f64 {
    assert!(min_prob > 0.0 && min_prob <= 1.0);
    if min_prob >= 1.0 {
        return 1.0;
    }
    let range = min_prob.log2();
    1.0 - (-2.0 * n as f64 * delta * delta / (range * range)).exp()
}

#[derive(Clone, Copy, Debug)]
pub struct TypicalityEstimate {
    pub empirical: f64,
    pub floor: f64,
    pub se: f64,
    pub trials: u64,
}

fn sample_symbol(dist: &[f64], rng: &mut impl Rng) -> u8 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return i as u8;
        }
    }
    (dist.len() - 1) as u8
}

/// Monte-Carlo estimate of P(Xⁿ typical) with its concentration floor.
pub fn typicality_probability(spec: &TypicalSetSpec, trials: u64, seed: u64) -> TypicalityEstimate {
    assert!(trials > 0);
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, DOMAIN_SHANNON, t, 0);
            let seq: Vec<u8> = (0..spec.n).map(|_| sample_symbol(&spec.dist, &mut rng)).collect();
            u64::from(is_typical(spec, &seq))
        })
        .sum();
    let empirical = hits as f64 / trials as f64;
    TypicalityEstimate {
        empirical,
        floor: concentration_floor(spec.n, spec.delta, spec.min_support_prob()),
        se: (empirical * (1.0 - empirical) / trials as f64).sqrt(),
        trials,
    }
}

/// Exact P(Xⁿ typical) by summing over symbol-count type classes; the
/// typicality statistic depends on a sequence only through its type.
pub fn exact_typicality_probability(spec: &TypicalSetSpec) -> f64 {
    let a = spec.dist.len();
    let n = spec.n;
    let ln_fact = ln_factorials(n);
    let h = spec.entropy();
    let mut total = 0.0;
    let mut counts = vec![0usize; a];
    fn walk(
        sym: usize,
        left: usize,
        counts: &mut Vec<usize>,
        spec: &TypicalSetSpec,
        ln_fact: &[f64],
        h: f64,
        total: &mut f64,
    ) {
        let a = spec.dist.len();
        if sym == a - 1 {
            counts[sym] = left;
            // Type-class statistic and weight.
            let mut log2p = 0.0;
            let mut valid = true;
            for (x, &k) in counts.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                if spec.dist[x] <= 0.0 {
                    valid = false;
                    break;
                }
                log2p += k as f64 * spec.dist[x].log2();
            }
            if valid && (-log2p / spec.n as f64 - h).abs() <= spec.delta {
                let mut ln_weight = ln_fact[spec.n];
                for (x, &k) in counts.iter().enumerate() {
                    ln_weight -= ln_fact[k];
                    if k > 0 {
                        ln_weight += k as f64 * spec.dist[x].ln();
                    }
                }
                *total += ln_weight.exp();
            }
            return;
        }
        for k in 0..=left {
            counts[sym] = k;
            walk(sym + 1, left - k, counts, spec, ln_fact, h, total);
        }
    }
    walk(0, n, &mut counts, spec, &ln_fact, h, &mut total);
    total
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n + 1];
    for k in 1..=n {
        v[k] = v[k - 1] + (k as f64).ln();
    }
    v
}

// ---------------------------------------------------------------------------
// Conditional typicality
// ---------------------------------------------------------------------------

/// A joint distribution over a product alphabet A × B.
#[derive(Clone, Debug)]
pub struct JointDist {
    pub probs: Vec<Vec<f64>>,
}

impl JointDist {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self, FtError> {
        if probs.is_empty() || probs[0].is_empty() {
            return Err(FtError::Invalid("joint distribution must be nonempty".into()));
        }
        let b = probs[0].len();
        if probs.iter().any(|row| row.len() != b) {
            return Err(FtError::Invalid("joint distribution rows differ in length".into()));
        }
        let total: f64 = probs.iter().flatten().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(FtError::Invalid(format!("joint distribution sums to {total}")));
        }
        if probs.iter().flatten().any(|&p| p < -1e-12) {
            return Err(FtError::Invalid("joint distribution has negative mass".into()));
        }
        Ok(JointDist { probs })
    }

    pub fn alphabet_x(&self) -> usize {
        self.probs.len()
    }

    pub fn alphabet_y(&self) -> usize {
        self.probs[0].len()
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        self.probs.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn entropy_joint(&self) -> f64 {
        self.probs
            .iter()
            .flatten()
            .map(|&p| if p > 0.0 { -p * p.log2() } else { 0.0 })
            .sum()
    }

    pub fn entropy_x(&self) -> f64 {
        shannon_entropy(&self.marginal_x())
    }

    /// H(Y|X) = H(X,Y) − H(X): the center of the conditional statistic.
    pub fn conditional_entropy(&self) -> f64 {
        self.entropy_joint() - self.entropy_x()
    }

    /// Smallest conditional probability p(y|x) over the joint support.
    pub fn r_min(&self) -> f64 {
        let px = self.marginal_x();
        let mut r = 1.0f64;
        for (x, row) in self.probs.iter().enumerate() {
            for &p in row {
                if p > 0.0 {
                    r = r.min(p / px[x]);
                }
            }
        }
        r
    }
}

/// log₂ of the conditional probability Π p(y_i|x_i); −∞ off the support.
fn conditional_log2_prob(joint: &JointDist, xn: &[u8], yn: &[u8]) -> f64 {
    let px = joint.marginal_x();
    let mut s = 0.0;
    for (&x, &y) in xn.iter().zip(yn) {
        let p = joint.probs[x as usize][y as usize];
        if p <= 0.0 || px[x as usize] <= 0.0 {
            return f64::NEG_INFINITY;
        }
        s += (p / px[x as usize]).log2();
    }
    s
}

/// Membership in the conditional δ-typical set given xⁿ. Sequences over a
/// conditioning string that leaves the support are never typical (the set
/// is empty by convention).
pub fn is_conditionally_typical(joint: &JointDist, xn: &[u8], yn: &[u8], delta: f64) -> bool {
    assert_eq!(xn.len(), yn.len());
    let px = joint.marginal_x();
    if xn.iter().any(|&x| px[x as usize] <= 0.0) {
        return false;
    }
    let lp = conditional_log2_prob(joint, xn, yn);
    if lp == f64::NEG_INFINITY {
        return false;
    }
    (-lp / xn.len() as f64 - joint.conditional_entropy()).abs() <= delta
}

/// The conditional δ-typical set for one conditioning string.
pub fn conditional_typical_set(
    joint: &JointDist,
    xn: &[u8],
    delta: f64,
) -> Result<Vec<Vec<u8>>, FtError> {
    let total = enumeration_size(joint.alphabet_y(), xn.len())?;
    Ok((0..total)
        .map(|i| decode_sequence(i, joint.alphabet_y(), xn.len()))
        .filter(|yn| is_conditionally_typical(joint, xn, yn, delta))
        .collect())
}

/// |T^{Yⁿ|xⁿ}| ≤ 2^{n(H(X,Y)−H(X)+δ)} for every conditioning string, by
/// exhaustive enumeration of both strings.
pub fn check_conditional_size_bound(
    joint: &JointDist,
    n: usize,
    delta: f64,
) -> Result<bool, FtError> {
    let ax = enumeration_size(joint.alphabet_x(), n)?;
    enumeration_size(joint.alphabet_x() * joint.alphabet_y(), n)?;
    let cap = (n as f64 * (joint.conditional_entropy() + delta)).exp2();
    for i in 0..ax {
        let xn = decode_sequence(i, joint.alphabet_x(), n);
        let size = conditional_typical_set(joint, &xn, delta)?.len() as f64;
        if size > cap * (1.0 + 1e-9) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Exact E_{Xⁿ} P(Yⁿ conditionally typical) by summing over joint type
/// classes of (x, y) pairs.
pub fn exact_conditional_typicality(joint: &JointDist, n: usize, delta: f64) -> f64 {
    let px = joint.marginal_x();
    // Flatten the joint support into (probability, conditional statistic).
    let mut cells: Vec<(f64, f64)> = Vec::new();
    for (x, row) in joint.probs.iter().enumerate() {
        for &p in row {
            if p > 0.0 {
                cells.push((p, -(p / px[x]).log2()));
            }
        }
    }
    let hc = joint.conditional_entropy();
    let ln_fact = ln_factorials(n);
    let mut total = 0.0;
    let mut counts = vec![0usize; cells.len()];
    fn walk(
        cell: usize,
        left: usize,
        counts: &mut Vec<usize>,
        cells: &[(f64, f64)],
        n: usize,
        delta: f64,
        hc: f64,
        ln_fact: &[f64],
        total: &mut f64,
    ) {
        if cell == cells.len() - 1 {
            counts[cell] = left;
            let stat: f64 =
                counts.iter().zip(cells).map(|(&k, &(_, s))| k as f64 * s).sum::<f64>()
                    / n as f64;
            if (stat - hc).abs() <= delta {
                let mut ln_weight = ln_fact[n];
                for (&k, &(p, _)) in counts.iter().zip(cells) {
                    ln_weight -= ln_fact[k];
                    if k > 0 {
                        ln_weight += k as f64 * p.ln();
                    }
                }
                *total += ln_weight.exp();
            }
            return;
        }
        for k in 0..=left {
            counts[cell] = k;
            walk(cell + 1, left - k, counts, cells, n, delta, hc, ln_fact, total);
        }
    }
    if cells.len() == 1 {
        // Deterministic pair source: the statistic is constant.
        return if (cells[0].1 - hc).abs() <= delta { 1.0 } else { 0.0 };
    }
    walk(0, n, &mut counts, &cells, n, delta, hc, &ln_fact, &mut total);
    total
}

/// Monte-Carlo estimate of the averaged conditional typicality with its
/// concentration floor 1 − exp(−2nδ²/log₂(r_min)²).
pub fn conditional_typicality_probability(
    joint: &JointDist,
    n: usize,
    delta: f64,
    trials: u64,
    seed: u64,
) -> TypicalityEstimate {
    assert!(trials > 0);
    let flat: Vec<f64> = joint.probs.iter().flatten().cloned().collect();
    let b = joint.alphabet_y();
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, DOMAIN_SHANNON, t, 1);
            let mut xn = vec![0u8; n];
            let mut yn = vec![0u8; n];
            for i in 0..n {
                let cell = sample_symbol(&flat, &mut rng) as usize;
                xn[i] = (cell / b) as u8;
                yn[i] = (cell % b) as u8;
            }
            u64::from(is_conditionally_typical(joint, &xn, &yn, delta))
        })
        .sum();
    let empirical = hits as f64 / trials as f64;
    TypicalityEstimate {
        empirical,
        floor: concentration_floor(n, delta, joint.r_min()),
        se: (empirical * (1.0 - empirical) / trials as f64).sqrt(),
        trials,
    }
}

// ---------------------------------------------------------------------------
// Quantum typicality
// ---------------------------------------------------------------------------

/// The δ-typical projector of ρ^{⊗n}, held in the eigenbasis of ρ: a base
/// change plus a 0/1 mask over product eigenvalue strings.
#[derive(Clone, Debug)]
pub struct QuantumTypicalProjector {
    pub n: usize,
    pub delta: f64,
    /// Eigenbasis of ρ (columns).
    pub basis: CMat,
    /// Eigenvalues of ρ in basis order.
    pub spectrum: Vec<f64>,
    /// One flag per product index (d^n entries, last factor fastest).
    pub typical_mask: Vec<bool>,
    pub entropy: f64,
}

impl QuantumTypicalProjector {
    pub fn rank(&self) -> usize {
        self.typical_mask.iter().filter(|&&b| b).count()
    }

    /// Tr(Π ρ^{⊗n}) = the typical eigenvalue mass, computed in the shared
    /// eigenbasis without dense algebra.
    pub fn trace_with_state_power(&self) -> f64 {
        let d = self.spectrum.len();
        self.typical_mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(idx, _)| {
                decode_sequence(idx as u64, d, self.n)
                    .iter()
                    .map(|&k| self.spectrum[k as usize].max(0.0))
                    .product::<f64>()
            })
            .sum()
    }

    /// Π ρ^{⊗n} Π ≤ 2^{−n(S−δ)} Π, checked eigenvalue by eigenvalue in the
    /// shared eigenbasis.
    pub fn check_operator_bound(&self) -> bool {
        let d = self.spectrum.len();
        let cap = (-(self.n as f64) * (self.entropy - self.delta)).exp2();
        self.typical_mask.iter().enumerate().filter(|(_, &b)| b).all(|(idx, _)| {
            let lam: f64 = decode_sequence(idx as u64, d, self.n)
                .iter()
                .map(|&k| self.spectrum[k as usize].max(0.0))
                .product();
            lam <= cap * (1.0 + 1e-9)
        })
    }

    /// The projector as a dense matrix (budgeted).
    pub fn dense(&self) -> Result<CMat, FtError> {
        let d = self.spectrum.len();
        let dim = self.typical_mask.len();
        if dim > DENSE_BUDGET {
            return Err(FtError::Budget(format!("dense projector dimension {dim} exceeds 2^10")));
        }
        let mut big_basis = eye(1);
        for _ in 0..self.n {
            big_basis = kron(&big_basis, &self.basis);
        }
        let mut masked = CMat::zeros((dim, dim));
        for (i, &b) in self.typical_mask.iter().enumerate() {
            if b {
                masked[(i, i)] = C64::new(1.0, 0.0);
            }
        }
        let _ = d;
        Ok(big_basis.dot(&masked).dot(&dagger(&big_basis)))
    }
}

/// Build the δ-typical projector of ρ^{⊗n}. Quantum typicality reduces to
/// classical typicality of the spectrum distribution.
pub fn quantum_typical_projector(
    rho: &DensityOperator,
    n: usize,
    delta: f64,
) -> Result<QuantumTypicalProjector, FtError> {
    if rho.dim > 4 {
        return Err(FtError::Budget(format!("state dimension {} exceeds 4", rho.dim)));
    }
    let size = (rho.dim as u64).checked_pow(n as u32).filter(|&s| s <= 10_000);
    let size = size.ok_or_else(|| {
        FtError::Budget(format!("{}^{n} product indices exceed the 10^4 budget", rho.dim))
    })?;
    let (evals, basis) = eigh(&rho.matrix);
    let spectrum: Vec<f64> = evals.iter().map(|&l| l.max(0.0)).collect();
    let spec = TypicalSetSpec::new(normalized(&spectrum), n, delta)?;
    let typical_mask: Vec<bool> = (0..size)
        .map(|i| is_typical(&spec, &decode_sequence(i, rho.dim, n)))
        .collect();
    Ok(QuantumTypicalProjector {
        n,
        delta,
        basis,
        spectrum,
        typical_mask,
        entropy: spec.entropy(),
    })
}

fn normalized(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

/// The conditional δ-typical projector of an ensemble {p_x, ρ_x} for one
/// conditioning string, as (dense matrix, rank). Its eigenbasis is the
/// product of the per-symbol eigenbases, so it commutes with ρ_{xⁿ}.
pub fn conditional_typical_projector(
    ensemble: &[(f64, DensityOperator)],
    xn: &[u8],
    delta: f64,
) -> Result<(CMat, usize), FtError> {
    let d = ensemble[0].1.dim;
    if ensemble.iter().any(|(_, s)| s.dim != d) {
        return Err(FtError::Invalid("ensemble states have mixed dimensions".into()));
    }
    let n = xn.len();
    let dim = d.checked_pow(n as u32).filter(|&s| s <= DENSE_BUDGET);
    let dim = dim.ok_or_else(|| FtError::Budget(format!("{d}^{n} exceeds the dense budget")))?;
    // Joint distribution p(x, y) = p_x · spec_y(ρ_x) defines the statistic.
    let eigs: Vec<(Vec<f64>, CMat)> = ensemble.iter().map(|(_, s)| eigh(&s.matrix)).collect();
    let joint = JointDist::new(
        ensemble
            .iter()
            .zip(&eigs)
            .map(|((p, _), (evals, _))| evals.iter().map(|&l| p * l.max(0.0)).collect())
            .collect(),
    )?;
    let mut basis = eye(1);
    for &x in xn {
        basis = kron(&basis, &eigs[x as usize].1);
    }
    let mut dense = CMat::zeros((dim, dim));
    let mut rank = 0usize;
    for idx in 0..dim as u64 {
        let yn = decode_sequence(idx, d, n);
        if is_conditionally_typical(&joint, xn, &yn, delta) {
            dense_mark(&mut dense, idx as usize);
            rank += 1;
        }
    }
    Ok((basis.dot(&dense).dot(&dagger(&basis)), rank))
}

fn dense_mark(m: &mut CMat, i: usize) {
    m[(i, i)] = C64::new(1.0, 0.0);
}

// ---------------------------------------------------------------------------
// Pretty-good measurement and packing
// ---------------------------------------------------------------------------

/// A pretty-good measurement built from weighted PSD operators.
#[derive(Clone, Debug)]
pub struct PgmMeasurement {
    pub elements: Vec<CMat>,
    /// Identity minus the element sum: the projector onto the
    /// orthocomplement of the joint support (an abstain outcome).
    pub complement: CMat,
    /// The Gram operator was numerically singular and a pseudo-inverse
    /// square root was used.
    pub singular: bool,
}

/// Λ_s = G^{−1/2} Y_s G^{−1/2} with G = Σ Y_s and a pseudo-inverse cutoff
/// of 1e-10·‖G‖ on the square root.
pub fn pgm_povm(ops: &[CMat]) -> PgmMeasurement {
    assert!(!ops.is_empty());
    let dim = ops[0].nrows();
    let mut gram = CMat::zeros((dim, dim));
    for y in ops {
        assert_eq!(y.dim(), (dim, dim));
        gram = gram + y;
    }
    let (evals, evecs) = eigh(&gram);
    let lam_max = evals.iter().cloned().fold(0.0, f64::max);
    let cutoff = 1e-10 * lam_max.max(1e-300);
    let mut singular = false;
    let mut inv_sqrt = CMat::zeros((dim, dim));
    for (k, &lam) in evals.iter().enumerate() {
        if lam <= cutoff {
            singular = true;
            continue;
        }
        let w = 1.0 / lam.sqrt();
        for i in 0..dim {
            for j in 0..dim {
                inv_sqrt[(i, j)] += evecs[(i, k)] * evecs[(j, k)].conj() * w;
            }
        }
    }
    let elements: Vec<CMat> =
        ops.iter().map(|y| inv_sqrt.dot(y).dot(&inv_sqrt)).collect();
    let mut complement = eye(dim);
    for e in &elements {
        complement = complement - e;
    }
    PgmMeasurement { elements, complement, singular }
}

/// Best discrimination success between two weighted hypotheses:
/// w₀·Tr(M ρ₀) + w₁·Tr((1−M) ρ₁) maximized = ½(1 + ‖w₀ρ₀ − w₁ρ₁‖₁)
/// for normalized weights.
pub fn helstrom_success(w0: f64, rho0: &DensityOperator, w1: f64, rho1: &DensityOperator) -> f64 {
    assert!((w0 + w1 - 1.0).abs() < 1e-9);
    let diff = rho0.matrix.mapv(|v| v * w0) - rho1.matrix.mapv(|v| v * w1);
    0.5 * (1.0 + trace_norm_hermitian(&diff))
}

/// Closed-form per-state error of the pretty-good measurement on two
/// equally weighted pure states with |⟨ψ₀|ψ₁⟩| = c: (1 − √(1−c²))/2.
pub fn two_state_pgm_error(overlap: f64) -> f64 {
    assert!((0.0..=1.0).contains(&overlap));
    0.5 * (1.0 - (1.0 - overlap * overlap).sqrt())
}

/// One random-codebook packing run.
#[derive(Clone, Debug)]
pub struct PackingReport {
    pub mean_success: f64,
    pub per_codebook: Vec<f64>,
    /// The explicit random-coding floor
    /// 1 − 4e₁ − 2e₂ − 4M·2^{−n(χ−2δ)} with Hoeffding tails e₁, e₂.
    pub floor: f64,
    pub floor_positive: bool,
    pub chi: f64,
    pub rate_bits: f64,
}

fn is_diagonal(m: &CMat) -> bool {
    m.indexed_iter().all(|((i, j), v)| i == j || v.norm() < 1e-14)
}

/// Draw i.i.d. codewords from the prior, sandwich each codeword projector
/// as Y = Π Π_{xⁿ} Π, decode with the pretty-good measurement of the Y's
/// and average the exact success probability over codebooks.
///
/// When every output state is diagonal in the computational basis all the
/// operators involved share that basis, and the whole experiment runs on
/// diagonals (same formulas, larger block lengths within the enumeration
/// budget); otherwise dense algebra caps the product dimension at 2^10.
pub fn packing_experiment(
    outputs: &[DensityOperator],
    prior: &[f64],
    n: usize,
    m: usize,
    delta: f64,
    codebooks: usize,
    seed: u64,
) -> Result<PackingReport, FtError> {
    if outputs.len() != prior.len() || outputs.is_empty() {
        return Err(FtError::Invalid("outputs and prior must match and be nonempty".into()));
    }
    if (prior.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(FtError::Invalid("prior must sum to 1".into()));
    }
    if m == 0 || codebooks == 0 {
        return Err(FtError::Invalid("need at least one message and one codebook".into()));
    }
    let d = outputs[0].dim;
    if outputs.iter().any(|s| s.dim != d) {
        return Err(FtError::Invalid("output states have mixed dimensions".into()));
    }
    let diagonal = outputs.iter().all(|s| is_diagonal(&s.matrix));
    let cap = if diagonal { 1u64 << 17 } else { DENSE_BUDGET as u64 };
    let dim = (d as u64).checked_pow(n as u32).filter(|&s| s <= cap);
    let dim = dim.ok_or_else(|| {
        FtError::Budget(format!("{d}^{n} exceeds the packing budget ({cap})"))
    })? as usize;

    // Average output state and the ensemble's classical statistics:
    // χ = S(σ) + H(X) − H(X,Y) over the joint (input, eigenvalue) source.
    let mut avg = CMat::zeros((d, d));
    for (p, s) in prior.iter().zip(outputs) {
        avg = avg + s.matrix.mapv(|v| v * *p);
    }
    let sigma = DensityOperator::new(avg);
    let eigs: Vec<(Vec<f64>, CMat)> = outputs.iter().map(|s| eigh(&s.matrix)).collect();
    let joint = JointDist::new(
        prior
            .iter()
            .zip(&eigs)
            .map(|(p, (evals, _))| evals.iter().map(|&l| p * l.max(0.0)).collect())
            .collect(),
    )?;
    let chi = crate::dense::von_neumann_entropy(&sigma) + joint.entropy_x() - joint.entropy_joint();
    let (sigma_evals, _) = eigh(&sigma.matrix);
    let lam_min = sigma_evals.iter().cloned().filter(|&l| l > 1e-12).fold(1.0, f64::min);
    let mu_min = eigs
        .iter()
        .zip(prior)
        .filter(|(_, &p)| p > 0.0)
        .flat_map(|((evals, _), _)| evals.iter().cloned())
        .filter(|&l| l > 1e-12)
        .fold(1.0, f64::min);
    let e1 = 1.0 - concentration_floor(n, delta, lam_min);
    let e2 = 1.0 - concentration_floor(n, delta, mu_min);
    let rate_bits = (m as f64).log2() / n as f64;
    let floor = 1.0 - 4.0 * e1 - 2.0 * e2
        - 4.0 * m as f64 * (-(n as f64) * (chi - 2.0 * delta)).exp2();

    let per_codebook: Vec<f64> = if diagonal {
        run_packing_diagonal(outputs, prior, &joint, n, m, dim, delta, codebooks, seed)
    } else {
        run_packing_dense(outputs, prior, n, m, delta, codebooks, seed)?
    };
    let mean_success = per_codebook.iter().sum::<f64>() / codebooks as f64;
    Ok(PackingReport {
        mean_success,
        per_codebook,
        floor,
        floor_positive: floor > 0.0,
        chi,
        rate_bits,
    })
}

fn run_packing_dense(
    outputs: &[DensityOperator],
    prior: &[f64],
    n: usize,
    m: usize,
    delta: f64,
    codebooks: usize,
    seed: u64,
) -> Result<Vec<f64>, FtError> {
    let mut avg = CMat::zeros((outputs[0].dim, outputs[0].dim));
    for (p, s) in prior.iter().zip(outputs) {
        avg = avg + s.matrix.mapv(|v| v * *p);
    }
    let sigma = DensityOperator::new(avg);
    let marginal = quantum_typical_projector(&sigma, n, delta)?;
    let pi = marginal.dense()?;
    let ensemble: Vec<(f64, DensityOperator)> =
        prior.iter().cloned().zip(outputs.iter().cloned()).collect();
    Ok((0..codebooks)
        .into_par_iter()
        .map(|cb| {
            let mut rng = stream(seed, DOMAIN_SHANNON, cb as u64, 2);
            let codewords: Vec<Vec<u8>> = (0..m)
                .map(|_| (0..n).map(|_| sample_symbol(prior, &mut rng)).collect())
                .collect();
            let mut ys = Vec::with_capacity(m);
            let mut states = Vec::with_capacity(m);
            for cw in &codewords {
                let (cond, _) = conditional_typical_projector(&ensemble, cw, delta)
                    .expect("budget already checked");
                ys.push(pi.dot(&cond).dot(&pi));
                let mut state = eye(1);
                for &x in cw {
                    state = kron(&state, &outputs[x as usize].matrix);
                }
                states.push(state);
            }
            let pgm = pgm_povm(&ys);
            let mut success = 0.0;
            for (lam, state) in pgm.elements.iter().zip(&states) {
                success += trace(&lam.dot(state)).re;
            }
            success / m as f64
        })
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn run_packing_diagonal(
    outputs: &[DensityOperator],
    prior: &[f64],
    joint: &JointDist,
    n: usize,
    m: usize,
    dim: usize,
    delta: f64,
    codebooks: usize,
    seed: u64,
) -> Vec<f64> {
    let d = outputs[0].dim;
    // Per-symbol diagonals p(y|x) and the averaged diagonal of σ.
    let diags: Vec<Vec<f64>> = outputs
        .iter()
        .map(|s| (0..d).map(|i| s.matrix[(i, i)].re.max(0.0)).collect())
        .collect();
    let mut sigma_diag = vec![0.0f64; d];
    for (p, dg) in prior.iter().zip(&diags) {
        for (s, v) in sigma_diag.iter_mut().zip(dg) {
            *s += p * v;
        }
    }
    let entropy = shannon_entropy(&sigma_diag);
    let hc = joint.conditional_entropy();
    let marginal_mask: Vec<bool> = (0..dim as u64)
        .map(|i| {
            let yn = decode_sequence(i, d, n);
            let mut lp = 0.0;
            for &y in &yn {
                if sigma_diag[y as usize] <= 0.0 {
                    return false;
                }
                lp += sigma_diag[y as usize].log2();
            }
            (-lp / n as f64 - entropy).abs() <= delta
        })
        .collect();
    (0..codebooks)
        .into_par_iter()
        .map(|cb| {
            let mut rng = stream(seed, DOMAIN_SHANNON, cb as u64, 2);
            let codewords: Vec<Vec<u8>> = (0..m)
                .map(|_| (0..n).map(|_| sample_symbol(prior, &mut rng)).collect())
                .collect();
            // Y diagonals are 0/1 masks; the Gram stays diagonal.
            let mut ys: Vec<Vec<f64>> = Vec::with_capacity(m);
            let mut states: Vec<Vec<f64>> = Vec::with_capacity(m);
            for cw in &codewords {
                let mut y = vec![0.0f64; dim];
                let mut st = vec![0.0f64; dim];
                for i in 0..dim as u64 {
                    let yn = decode_sequence(i, d, n);
                    let mut weight = 1.0;
                    let mut lcond = 0.0;
                    let mut on_support = true;
                    for (&x, &yy) in cw.iter().zip(&yn) {
                        let q = diags[x as usize][yy as usize];
                        weight *= q;
                        if q <= 0.0 {
                            on_support = false;
                        } else {
                            lcond += q.log2();
                        }
                    }
                    st[i as usize] = weight;
                    let typical = on_support && (-lcond / n as f64 - hc).abs() <= delta;
                    if typical && marginal_mask[i as usize] {
                        y[i as usize] = 1.0;
                    }
                }
                ys.push(y);
                states.push(st);
            }
            let mut gram = vec![0.0f64; dim];
            for y in &ys {
                for (g, v) in gram.iter_mut().zip(y) {
                    *g += v;
                }
            }
            let gmax = gram.iter().cloned().fold(0.0, f64::max);
            let cutoff = 1e-10 * gmax.max(1e-300);
            let mut success = 0.0;
            for (y, st) in ys.iter().zip(&states) {
                for i in 0..dim {
                    if gram[i] > cutoff {
                        success += y[i] / gram[i] * st[i];
                    }
                }
            }
            success / m as f64
        })
        .collect()
}
