//! Entropic functionals, capacity optimizers, and closed-form lower bounds
//! on communication capacities under interface and channel noise.
//!
//! Everything here is a pure function of its inputs. The structural
//! constants of the code (the interface location count `c` and the circuit
//! threshold `p0`) are parameters throughout, never hard-coded: they are
//! measured elsewhere in this crate or supplied by the caller.

use std::collections::BTreeMap;

use ndarray::Array1;
use rand::Rng;
use serde::Serialize;

use crate::dense::{
    eigh, trace, von_neumann_entropy, CMat, CqChannel, CVec, DenseChannel, DensityOperator, C64,
};
use crate::pauli::binary_entropy;
use crate::rng::{stream, DOMAIN_OPTIMIZER};
use crate::FtError;

/// Validity threshold for the k-letter quantum bound under adversarial
/// Pauli perturbations: p^k must not exceed (2 − √3)/4 ≈ 0.0669873.
pub fn avp_quantum_validity_threshold() -> f64 {
    (2.0 - 3.0f64.sqrt()) / 4.0
}

// ---------------------------------------------------------------------------
// Ensembles and the Holevo quantity
// ---------------------------------------------------------------------------

/// An ensemble of quantum states with preparation probabilities.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub probs: Vec<f64>,
    pub states: Vec<DensityOperator>,
}

impl Ensemble {
    pub fn new(probs: Vec<f64>, states: Vec<DensityOperator>) -> Result<Self, FtError> {
        if probs.len() != states.len() || probs.is_empty() {
            return Err(FtError::Invalid(format!(
                "ensemble needs matching nonempty lists, got {} probabilities and {} states",
                probs.len(),
                states.len()
            )));
        }
        if probs.iter().any(|&p| !(-1e-12..=1.0 + 1e-12).contains(&p)) {
            return Err(FtError::Invalid("ensemble probabilities outside [0,1]".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(FtError::Invalid(format!(
                "ensemble probabilities sum to {total}, not 1"
            )));
        }
        let d = states[0].dim;
        if states.iter().any(|s| s.dim != d) {
            return Err(FtError::Invalid("ensemble states have mixed dimensions".into()));
        }
        Ok(Ensemble { probs, states })
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim
    }

    /// The average state Σ p_i ρ_i.
    pub fn average_state(&self) -> DensityOperator {
        let d = self.dim();
        let mut m = CMat::zeros((d, d));
        for (p, s) in self.probs.iter().zip(&self.states) {
            m = m + s.matrix.mapv(|v| v * *p);
        }
        DensityOperator::new(m)
    }
}

/// Holevo quantity χ = S(Σ p_i ρ_i) − Σ p_i S(ρ_i), in bits.
pub fn holevo_chi(e: &Ensemble) -> f64 {
    let mixed = von_neumann_entropy(&e.average_state());
    let avg_entropy: f64 = e
        .probs
        .iter()
        .zip(&e.states)
        .map(|(p, s)| if *p > 0.0 { p * von_neumann_entropy(s) } else { 0.0 })
        .sum();
    (mixed - avg_entropy).max(0.0)
}

/// Quantum relative entropy D(ρ‖σ) = Tr ρ(log₂ρ − log₂σ) in bits.
/// Returns +∞ when the support of ρ is not contained in the support of σ.
pub fn relative_entropy(rho: &DensityOperator, sigma: &DensityOperator) -> f64 {
    assert_eq!(rho.dim, sigma.dim, "relative entropy needs equal dimensions");
    let (evals, evecs) = eigh(&sigma.matrix);
    let mut tr_rho_log_sigma = 0.0;
    for (k, &lam) in evals.iter().enumerate() {
        let v: CVec = evecs.column(k).to_owned();
        let rv: CVec = rho.matrix.dot(&v);
        let weight = v
            .iter()
            .zip(rv.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>()
            .max(0.0);
        if weight <= 1e-12 {
            continue;
        }
        if lam <= 1e-12 {
            return f64::INFINITY;
        }
        tr_rho_log_sigma += weight * lam.log2();
    }
    -von_neumann_entropy(rho) - tr_rho_log_sigma
}

/// Result of the alternating Holevo-capacity maximization.
#[derive(Clone, Debug)]
pub struct CqCapacityReport {
    /// Primal value χ at the returned input distribution (a lower bound).
    pub value: f64,
    /// Dual certificate max_i D(ρ_i‖σ*) (an upper bound on the capacity).
    pub dual: f64,
    pub input_dist: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Holevo capacity of a cq channel by alternating multiplicative updates
/// p_i ← p_i·2^{D(ρ_i‖σ_p)} (normalized), stopping when the duality gap
/// max_i D(ρ_i‖σ_p) − χ(p) falls below `tol` bits.
pub fn holevo_capacity_cq(t: &CqChannel, tol: f64) -> Result<CqCapacityReport, FtError> {
    let a = t.alphabet_size();
    if a > 32 {
        return Err(FtError::Budget(format!("cq alphabet {a} exceeds 32")));
    }
    if t.dim() > 8 {
        return Err(FtError::Budget(format!("cq output dimension {} exceeds 8", t.dim())));
    }
    assert!(tol > 0.0, "tolerance must be positive");
    let mut probs = vec![1.0 / a as f64; a];
    let cap_iterations = 10_000;
    let mut best = CqCapacityReport {
        value: 0.0,
        dual: f64::INFINITY,
        input_dist: probs.clone(),
        iterations: 0,
        converged: false,
    };
    for it in 0..cap_iterations {
        let ensemble = Ensemble::new(probs.clone(), t.outputs.clone())?;
        let sigma = ensemble.average_state();
        let divergences: Vec<f64> =
            t.outputs.iter().map(|rho| relative_entropy(rho, &sigma)).collect();
        let primal: f64 = probs
            .iter()
            .zip(&divergences)
            .map(|(p, d)| if *p > 0.0 { p * d } else { 0.0 })
            .sum();
        let dual = divergences.iter().cloned().fold(f64::MIN, f64::max);
        if primal > best.value || it == 0 {
            best.value = primal;
            best.dual = dual;
            best.input_dist = probs.clone();
            best.iterations = it + 1;
        }
        if dual - primal <= tol {
            best.converged = true;
            best.dual = dual;
            return Ok(best);
        }
        // Multiplicative update in a numerically safe exponent window.
        let max_d = dual;
        let mut next: Vec<f64> =
            probs.iter().zip(&divergences).map(|(p, d)| p * 2f64.powf(d - max_d)).collect();
        let norm: f64 = next.iter().sum();
        for w in next.iter_mut() {
            *w = (*w / norm).max(1e-300);
        }
        let renorm: f64 = next.iter().sum();
        for w in next.iter_mut() {
            *w /= renorm;
        }
        probs = next;
    }
    best.iterations = cap_iterations;
    Ok(best)
}

// ---------------------------------------------------------------------------
// Coherent information
// ---------------------------------------------------------------------------

/// Coherent information I_coh(ρ, T) = S(T(ρ)) − S(T^c(ρ)) in bits, with the
/// environment entropy taken through the complementary channel of the Kraus
/// isometry.
pub fn coherent_information(t: &DenseChannel, rho: &DensityOperator) -> f64 {
    assert_eq!(t.dim_in, rho.dim, "input state dimension mismatch");
    let out = t.apply(rho);
    let env = t.complementary().apply(rho);
    von_neumann_entropy(&out) - von_neumann_entropy(&env)
}

/// The same quantity computed as S(ρ_B) − S(ρ_AB) on (id⊗T) applied to a
/// purification of ρ; agrees with [`coherent_information`] and serves as its
/// independent oracle.
pub fn coherent_information_via_purification(t: &DenseChannel, rho: &DensityOperator) -> f64 {
    assert_eq!(t.dim_in, rho.dim, "input state dimension mismatch");
    let d = rho.dim;
    let (evals, evecs) = eigh(&rho.matrix);
    // |φ⟩ = Σ_k √λ_k |k⟩_A ⊗ |v_k⟩_{A'} purifies ρ on the A' factor.
    let mut phi = CVec::zeros(d * d);
    for (k, &lam) in evals.iter().enumerate() {
        if lam <= 0.0 {
            continue;
        }
        let amp = lam.max(0.0).sqrt();
        for i in 0..d {
            phi[k * d + i] += evecs[(i, k)] * C64::new(amp, 0.0);
        }
    }
    let joint_in = DensityOperator::from_pure(&phi);
    let id_t = DenseChannel::identity(d).tensor(t);
    let joint = id_t.apply(&joint_in);
    von_neumann_entropy(&t.apply(rho)) - von_neumann_entropy(&joint)
}

/// Outcome of the multi-start coherent-information maximization.
#[derive(Clone, Debug)]
pub struct CoherentOptReport {
    pub value: f64,
    pub input: DensityOperator,
    /// Final simplex value spread of the winning start (achieved tolerance).
    pub spread: f64,
}

/// ρ(t) = L L†/Tr(L L†) from d² real parameters: d real diagonal entries of
/// a lower-triangular L followed by interleaved (re, im) off-diagonal pairs.
fn state_from_params(d: usize, t: &[f64]) -> DensityOperator {
    assert_eq!(t.len(), d * d);
    let mut l = CMat::zeros((d, d));
    for i in 0..d {
        l[(i, i)] = C64::new(t[i], 0.0);
    }
    let mut idx = d;
    for i in 1..d {
        for j in 0..i {
            l[(i, j)] = C64::new(t[idx], t[idx + 1]);
            idx += 2;
        }
    }
    let mut m = l.dot(&l.mapv(|v| v.conj()).reversed_axes());
    // Floor keeps the state full-rank so entropies stay differentiable.
    for i in 0..d {
        m[(i, i)] += C64::new(1e-12, 0.0);
    }
    let tr = trace(&m).re;
    DensityOperator::new(m.mapv(|v| v / tr))
}

/// Compact Nelder–Mead minimizer; returns (argmin, value, final spread).
fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    max_iter: usize,
    tol: f64,
) -> (Vec<f64>, f64, f64) {
    let n = x0.len();
    let mut simplex: Vec<Array1<f64>> = Vec::with_capacity(n + 1);
    simplex.push(Array1::from(x0.to_vec()));
    for i in 0..n {
        let mut v = Array1::from(x0.to_vec());
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| f(x.as_slice().unwrap())).collect();
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let (best, second_worst, worst) = (order[0], order[n - 1], order[n]);
        if values[worst] - values[best] < tol {
            break;
        }
        let mut centroid = Array1::<f64>::zeros(n);
        for &i in order.iter().take(n) {
            centroid = centroid + &simplex[i];
        }
        centroid.mapv_inplace(|v| v / n as f64);
        let reflect = &centroid + (&centroid - &simplex[worst]);
        let f_reflect = f(reflect.as_slice().unwrap());
        if f_reflect < values[best] {
            let expand = &centroid + (&reflect - &centroid).mapv(|v| 2.0 * v);
            let f_expand = f(expand.as_slice().unwrap());
            if f_expand < f_reflect {
                simplex[worst] = expand;
                values[worst] = f_expand;
            } else {
                simplex[worst] = reflect;
                values[worst] = f_reflect;
            }
        } else if f_reflect < values[second_worst] {
            simplex[worst] = reflect;
            values[worst] = f_reflect;
        } else {
            let contract = &centroid + (&simplex[worst] - &centroid).mapv(|v| 0.5 * v);
            let f_contract = f(contract.as_slice().unwrap());
            if f_contract < values[worst] {
                simplex[worst] = contract;
                values[worst] = f_contract;
            } else {
                let best_point = simplex[best].clone();
                for i in 0..=n {
                    if i == best {
                        continue;
                    }
                    simplex[i] = &best_point + (&simplex[i] - &best_point).mapv(|v| 0.5 * v);
                    values[i] = f(simplex[i].as_slice().unwrap());
                }
            }
        }
    }
    let mut best_i = 0;
    for i in 1..=n {
        if values[i] < values[best_i] {
            best_i = i;
        }
    }
    let spread = values.iter().cloned().fold(f64::MIN, f64::max)
        - values.iter().cloned().fold(f64::MAX, f64::min);
    (simplex[best_i].to_vec(), values[best_i], spread)
}

/// Maximal coherent information over input states by multi-start
/// derivative-free simplex ascent on a Cholesky parameterization of the
/// state set. Multi-letter inputs are the caller's job: pass `t.tensor(&t)`
/// for two letters (input dimension at most 4).
pub fn max_coherent_information(
    t: &DenseChannel,
    restarts: usize,
    tol: f64,
) -> Result<CoherentOptReport, FtError> {
    let d = t.dim_in;
    if d > 4 {
        return Err(FtError::Budget(format!("optimizer input dimension {d} exceeds 4")));
    }
    let restarts = restarts.max(16);
    let complement = t.complementary();
    let mut objective = |params: &[f64]| {
        let rho = state_from_params(d, params);
        let value = von_neumann_entropy(&t.apply(&rho)) - von_neumann_entropy(&complement.apply(&rho));
        -value
    };
    let n = d * d;
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    for start in 0..restarts {
        let x0: Vec<f64> = if start == 0 {
            // The maximally mixed state: L = I/√d.
            let mut v = vec![0.0; n];
            for x in v.iter_mut().take(d) {
                *x = 1.0 / (d as f64).sqrt();
            }
            v
        } else {
            let mut rng = stream(0xB057_A211, DOMAIN_OPTIMIZER, start as u64, 0);
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        let result = nelder_mead(&mut objective, &x0, 0.15, 4_000, tol * 1e-2);
        if best.as_ref().map_or(true, |b| result.1 < b.1) {
            best = Some(result);
        }
    }
    let (params, neg_value, spread) = best.expect("at least one start");
    Ok(CoherentOptReport {
        value: -neg_value,
        input: state_from_params(d, &params),
        spread,
    })
}

/// Coherent information of the qubit depolarizing channel at maximally
/// mixed input: 1 − h₂(q) − q·log₂3 (the hashing form).
pub fn depolarizing_coherent_info(q: f64) -> f64 {
    1.0 - binary_entropy(q) - q * 3f64.log2()
}

/// The noise weight where the hashing form crosses zero, by bisection.
pub fn depolarizing_hashing_zero() -> f64 {
    let mut lo = 0.1;
    let mut hi = 0.3;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if depolarizing_coherent_info(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------------------
// Bound reports
// ---------------------------------------------------------------------------

/// One evaluated lower bound with its parameters and validity.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    /// Bound value in bits.
    pub value: f64,
    /// All stated preconditions hold.
    pub valid: bool,
    /// Names of the violated preconditions when `valid` is false.
    pub violated: Vec<String>,
    /// The evaluated formula, spelled out.
    pub provenance: String,
}

impl BoundReport {
    fn new(name: &str, provenance: &str, value: f64) -> Self {
        BoundReport {
            name: name.into(),
            params: BTreeMap::new(),
            value,
            valid: true,
            violated: Vec::new(),
            provenance: provenance.into(),
        }
    }

    fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.into(), value);
        self
    }

    fn require(mut self, name: &str, holds: bool) -> Self {
        if !holds {
            self.valid = false;
            self.violated.push(name.into());
        }
        self
    }
}

/// Lower bound on the interface-noise classical capacity of a cq channel
/// with output dimension d: C − 2cpj² − 2(1+2cpj)·h₂(2cpj/(1+2cpj)) for
/// j = ⌈log₂ d⌉. Valid for p ≤ min(p0/2, 1/(2cj)).
pub fn ft_cq_lower_bound(c_bits: f64, d: usize, c: f64, p: f64, p0: f64) -> BoundReport {
    assert!(d >= 2, "output dimension must be at least 2");
    let j = (d as f64).log2().ceil();
    let a = 2.0 * c * p * j;
    let value = c_bits - a * j - 2.0 * (1.0 + a) * binary_entropy(a / (1.0 + a));
    BoundReport::new(
        "ft_cq_lower_bound",
        "C - 2cpj^2 - 2(1+2cpj) h2(2cpj/(1+2cpj)), j = ceil(log2 d)",
        value,
    )
    .with_param("C", c_bits)
    .with_param("d", d as f64)
    .with_param("c", c)
    .with_param("p", p)
    .with_param("p0", p0)
    .require("p <= p0/2", p <= p0 / 2.0)
    .require("p <= 1/(2c ceil(log2 d))", p <= 1.0 / (2.0 * c * j))
}

/// The continuity penalty 2p·log₂(dB) + (1+p)·h₂(p/(1+p)) in bits.
pub fn continuity_penalty(p: f64, d_b: usize) -> f64 {
    assert!((0.0..=1.0).contains(&p), "p must lie in [0,1]");
    if p == 0.0 {
        return 0.0;
    }
    2.0 * p * (d_b as f64).log2() + (1.0 + p) * binary_entropy(p / (1.0 + p))
}

/// Lower bound on the quantum capacity under adversarial channel
/// perturbations with separable environment: Q − continuity penalty.
/// Conditional on a positive classical capacity and on p not exceeding the
/// (existential, caller-supplied) threshold p0.
pub fn sep_avp_quantum_bound(
    q_bits: f64,
    p: f64,
    d_b: usize,
    p0: f64,
    classical_capacity_positive: bool,
) -> BoundReport {
    let value = q_bits - continuity_penalty(p, d_b);
    BoundReport::new(
        "sep_avp_quantum_bound",
        "Q - 2p log2(dB) - (1+p) h2(p/(1+p))",
        value,
    )
    .with_param("Q", q_bits)
    .with_param("p", p)
    .with_param("dB", d_b as f64)
    .with_param("p0", p0)
    .require("C(T) > 0", classical_capacity_positive)
    .require("p <= p0", p <= p0)
}

/// k-letter lower bound on the classical capacity under adversarial channel
/// perturbations of strength p with arbitrary environment states.
pub fn avp_classical_lower_bound(chi_k: f64, k: usize, p: f64, d_b: usize) -> BoundReport {
    assert!(k >= 1);
    let log_db = (d_b as f64).log2();
    let penalty = if p == 0.0 {
        0.0
    } else {
        (2.0 * k as f64 * p * log_db).sqrt() * (p / d_b as f64).ln().abs()
            + 3.0 * p * log_db
            + (1.0 + p) * binary_entropy(p / (1.0 + p))
    };
    BoundReport::new(
        "avp_classical_lower_bound",
        "chi_k/k - sqrt(2kp log2 dB)|ln(p/dB)| - 3p log2 dB - (1+p) h2(p/(1+p))",
        chi_k / k as f64 - penalty,
    )
    .with_param("chi_k", chi_k)
    .with_param("k", k as f64)
    .with_param("p", p)
    .with_param("dB", d_b as f64)
    .require("p < 1", p < 1.0)
}

/// The entanglement-fidelity continuity profile
/// η(ε) = (2ε + 4√(ε(1−ε)))·log₂(dA) + h₂(2ε) + h₂(2√(ε(1−ε))).
pub fn eta(epsilon: f64, d_a: usize) -> f64 {
    assert!(
        (0.0..=0.5).contains(&epsilon),
        "eta needs epsilon in [0, 1/2], got {epsilon}"
    );
    let root = (epsilon * (1.0 - epsilon)).sqrt();
    (2.0 * epsilon + 4.0 * root) * (d_a as f64).log2()
        + binary_entropy(2.0 * epsilon)
        + binary_entropy((2.0 * root).min(1.0))
}

/// k-letter lower bound on the quantum capacity under adversarial channel
/// perturbations of strength p with arbitrary environment states. Valid
/// only while p^k ≤ (2 − √3)/4.
pub fn avp_quantum_lower_bound(
    icoh_k: f64,
    k: usize,
    p: f64,
    d_a: usize,
    d_b: usize,
) -> BoundReport {
    assert!(k >= 1);
    let log_db = (d_b as f64).log2();
    let eps = p.powi(k as i32);
    let valid_region = eps <= avp_quantum_validity_threshold();
    let penalty = if p == 0.0 {
        0.0
    } else {
        let micro = (p / d_a as f64).min(p * p / d_b as f64);
        eta(eps.min(0.5), d_a)
            + 3.0 * (k as f64 * p * log_db).sqrt() * micro.ln().abs()
            + 4.0 * p * log_db
            + (1.0 + p) * binary_entropy(p / (1.0 + p))
    };
    BoundReport::new(
        "avp_quantum_lower_bound",
        "I_k/k - eta(p^k) - 3 sqrt(kp log2 dB)|ln(min(p/dA, p^2/dB))| - 4p log2 dB - (1+p) h2(p/(1+p))",
        icoh_k / k as f64 - penalty,
    )
    .with_param("icoh_k", icoh_k)
    .with_param("k", k as f64)
    .with_param("p", p)
    .with_param("dA", d_a as f64)
    .with_param("dB", d_b as f64)
    .require("p^k <= (2-sqrt(3))/4", valid_region)
    .require("p < 1", p < 1.0)
}

/// The two factors of the postselection decomposition: a growth factor
/// d_B^{m(p+δ)} and a Chernoff tail exp(−mδ²/3p), both carried in log
/// domain to avoid overflow. At p = 0 the tail is 0 by convention.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PostselectionFactors {
    /// log₂ of the growth factor: m(p+δ)·log₂(dB).
    pub growth_log2: f64,
    /// Natural log of the tail: −mδ²/(3p); −∞ at p = 0.
    pub tail_ln: f64,
    /// The growth factor itself (may overflow to +∞ for large m).
    pub growth: f64,
    /// The tail itself (underflows to 0 for large m or tiny p).
    pub tail: f64,
}

pub fn postselection_factor(m: u64, p: f64, delta: f64, d_b: usize) -> PostselectionFactors {
    assert!(p >= 0.0 && delta > 0.0, "needs p ≥ 0 and δ > 0");
    let growth_log2 = m as f64 * (p + delta) * (d_b as f64).log2();
    let tail_ln = if p == 0.0 {
        f64::NEG_INFINITY
    } else {
        -(m as f64) * delta * delta / (3.0 * p)
    };
    PostselectionFactors {
        growth_log2,
        tail_ln,
        growth: growth_log2.exp2(),
        tail: tail_ln.exp(),
    }
}

/// The largest code goodness with rate at least one half:
/// α₀ = min{α : h₂(2α) = 1/2}, by bisection to 1e-12.
pub fn alpha0() -> f64 {
    let mut lo = 0.0;
    let mut hi = 0.25;
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if binary_entropy(2.0 * mid) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Lower bound Q ≥ 1 − 2h₂(8cp + 2q) on the interface-noise quantum
/// capacity of (1−q)id + q·T achieved by asymptotically good codes. Valid
/// for p ≤ min(p0/2, 1/c) and 4cp + q ≤ α₀. Outside the validity region the
/// entropy argument is clamped to 1 so the report stays finite.
pub fn good_code_bound(p: f64, q: f64, c: f64, p0: f64) -> BoundReport {
    let arg = 8.0 * c * p + 2.0 * q;
    let value = 1.0 - 2.0 * binary_entropy(arg.min(1.0));
    BoundReport::new("good_code_bound", "1 - 2 h2(8cp + 2q)", value)
        .with_param("p", p)
        .with_param("q", q)
        .with_param("c", c)
        .with_param("p0", p0)
        .with_param("alpha0", alpha0())
        .require("p <= p0/2", p <= p0 / 2.0)
        .require("p <= 1/c", p <= 1.0 / c)
        .require("4cp + q <= alpha0", 4.0 * c * p + q <= alpha0())
}

/// The decoupling error bound
/// ε_m = 4√3·exp(−mδ²/ln(μ_min)²) + 2^{−(m/2)(I_coh − R − 3δ)}.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecouplingErrorBound {
    /// The concentration term 4√3·exp(−mδ²/ln(μ_min)²).
    pub term_gauss: f64,
    /// The rate term 2^{−(m/2)(I_coh − R − 3δ)} (may be +∞ when R ≫ I_coh).
    pub term_rate: f64,
    /// log₂ of the rate term.
    pub rate_exponent_log2: f64,
    /// The full bound; not clipped, so vacuous values exceed 1.
    pub epsilon: f64,
    /// The bound proves nothing: ε ≥ 1 or the rate exceeds I_coh − 3δ.
    pub vacuous: bool,
}

pub fn decoupling_error(m: u64, r: f64, delta: f64, mu_min: f64, icoh: f64) -> DecouplingErrorBound {
    assert!(mu_min > 0.0 && mu_min < 1.0, "needs μ_min in (0,1)");
    assert!(m > 0 && delta > 0.0 && r > 0.0, "needs positive m, δ, R");
    let log_mu = mu_min.ln();
    let term_gauss = 4.0 * 3f64.sqrt() * (-(m as f64) * delta * delta / (log_mu * log_mu)).exp();
    let rate_exponent_log2 = -(m as f64 / 2.0) * (icoh - r - 3.0 * delta);
    let term_rate = rate_exponent_log2.exp2();
    let epsilon = term_gauss + term_rate;
    DecouplingErrorBound {
        term_gauss,
        term_rate,
        rate_exponent_log2,
        epsilon,
        vacuous: !(epsilon < 1.0) || r + 3.0 * delta >= icoh,
    }
}

/// Fidelity form of the decoupling bound: F ≥ 1 − 2ε_m, clipped to [0,1];
/// `valid = false` marks saturation (the clipped bound proves nothing).
pub fn decoupling_fidelity_bound(
    m: u64,
    r: f64,
    delta: f64,
    mu_min: f64,
    icoh: f64,
) -> BoundReport {
    let err = decoupling_error(m, r, delta, mu_min, icoh);
    let raw = 1.0 - 2.0 * err.epsilon;
    BoundReport::new(
        "decoupling_fidelity_bound",
        "1 - 2 [4 sqrt(3) exp(-m d^2/ln(mu)^2) + 2^{-(m/2)(I-R-3d)}]",
        raw.clamp(0.0, 1.0),
    )
    .with_param("m", m as f64)
    .with_param("R", r)
    .with_param("delta", delta)
    .with_param("mu_min", mu_min)
    .with_param("icoh", icoh)
    .with_param("epsilon", err.epsilon)
    .require("epsilon < 1/2", raw > 0.0)
    .require("R + 3 delta < icoh", r + 3.0 * delta < icoh)
}
