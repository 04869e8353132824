//! Small dense complex linear algebra: operators, states, channels, and a
//! cyclic Jacobi eigensolver for Hermitian matrices.
//!
//! Everything here is desk scale (dimension ≤ 2^10, and ≤ 2^7 for states);
//! the module exists to provide exact oracles for the bit-level simulators
//! and the entropic quantities used by the capacity evaluators.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::pauli::{PauliChannel, PauliKind, PauliString};

pub type C64 = Complex64;
pub type CMat = Array2<C64>;
pub type CVec = Array1<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Identity matrix of dimension `d`.
pub fn eye(d: usize) -> CMat {
    CMat::eye(d)
}

/// Conjugate transpose.
pub fn dagger(a: &CMat) -> CMat {
    a.t().mapv(|v| v.conj())
}

/// Kronecker product a ⊗ b.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = CMat::zeros((ra * rb, ca * cb));
    for i in 0..ra {
        for j in 0..ca {
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Frobenius norm.
pub fn fro_norm(a: &CMat) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Trace.
pub fn trace(a: &CMat) -> C64 {
    a.diag().sum()
}

/// Max-abs deviation from Hermiticity.
pub fn hermiticity_error(a: &CMat) -> f64 {
    let ad = dagger(a);
    (a - &ad).iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// The 2^n × 2^n matrix of a Pauli string (dense oracle; n ≤ 10 guarded).
pub fn pauli_matrix(p: &PauliString) -> CMat {
    assert!(p.n() <= 10, "dense Pauli matrix capped at 10 qubits");
    let i2 = eye(2);
    let x = CMat::from_shape_vec((2, 2), vec![ZERO, ONE, ONE, ZERO]).unwrap();
    let y = CMat::from_shape_vec(
        (2, 2),
        vec![ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO],
    )
    .unwrap();
    let z = CMat::from_shape_vec((2, 2), vec![ONE, ZERO, ZERO, -ONE]).unwrap();
    let mut out = CMat::eye(1);
    for q in 0..p.n() {
        let f = match p.kind_at(q) {
            PauliKind::I => &i2,
            PauliKind::X => &x,
            PauliKind::Y => &y,
            PauliKind::Z => &z,
        };
        out = kron(&out, f);
    }
    let phase = C64::new(0.0, 1.0).powu(p.phase_exponent() as u32);
    out.mapv_inplace(|v| v * phase);
    out
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations. Returns eigenvalues ascending and the unitary whose columns
/// are the corresponding eigenvectors. Residuals satisfy
/// ‖A v − λ v‖ ≤ 1e-10 ‖A‖ for the dimensions used here.
pub fn eigh(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigh needs a square matrix");
    assert!(
        hermiticity_error(a) <= 1e-8 * (1.0 + fro_norm(a)),
        "eigh input is not Hermitian"
    );
    let mut m = a.clone();
    // Symmetrize to kill representation drift.
    let md = dagger(&m);
    m = (&m + &md).mapv(|v| v * C64::new(0.5, 0.0));

    let mut v = eye(n);
    let scale = fro_norm(&m).max(1e-300);
    let tol = 1e-15 * scale;
    for _sweep in 0..120 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = m[(p, q)];
                let abs = alpha.norm();
                if abs <= tol / (n as f64) {
                    continue;
                }
                let phi = alpha.arg();
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let tau = (aqq - app) / (2.0 * abs);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let eip = C64::from_polar(1.0, phi);
                let eim = eip.conj();
                // G is identity except G_pp = c, G_pq = s, G_qp = −s·e^{−iφ},
                // G_qq = c·e^{−iφ}; update A ← G† A G and V ← V G.
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = akp * c - akq * s * eim;
                    m[(k, q)] = akp * s + akq * c * eim;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = apk * c - aqk * s * eip;
                    m[(q, k)] = apk * s + aqk * c * eip;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * s * eim;
                    v[(k, q)] = vkp * s + vkq * c * eim;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let evals: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| evals[i].partial_cmp(&evals[j]).unwrap());
    let sorted_vals: Vec<f64> = order.iter().map(|&i| evals[i]).collect();
    let mut sorted_vecs = CMat::zeros((n, n));
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            sorted_vecs[(k, new)] = v[(k, old)];
        }
    }
    (sorted_vals, sorted_vecs)
}

/// A validated quantum state (Hermitian, PSD within tolerance, unit trace).
#[derive(Clone, Debug)]
pub struct DensityOperator {
    pub dim: usize,
    pub matrix: CMat,
}

impl DensityOperator {
    pub fn new(matrix: CMat) -> Self {
        let dim = matrix.nrows();
        assert_eq!(dim, matrix.ncols(), "state matrix must be square");
        assert!(
            hermiticity_error(&matrix) <= 1e-10 * (1.0 + fro_norm(&matrix)),
            "state is not Hermitian"
        );
        let tr = trace(&matrix);
        assert!(
            (tr.re - 1.0).abs() <= 1e-10 && tr.im.abs() <= 1e-10,
            "state trace {tr} ≠ 1"
        );
        let (evals, _) = eigh(&matrix);
        assert!(
            evals.iter().all(|&l| l >= -1e-10),
            "state has eigenvalue {} < −1e-10",
            evals[0]
        );
        DensityOperator { dim, matrix }
    }

    /// |ψ⟩⟨ψ| from an (unnormalized) state vector.
    pub fn from_pure(psi: &CVec) -> Self {
        let norm: f64 = psi.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(norm > 1e-12, "zero vector");
        let d = psi.len();
        let mut m = CMat::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = psi[i] * psi[j].conj() / (norm * norm);
            }
        }
        DensityOperator::new(m)
    }

    /// Computational basis state |k⟩⟨k| in dimension `d`.
    pub fn basis(d: usize, k: usize) -> Self {
        let mut v = CVec::zeros(d);
        v[k] = ONE;
        Self::from_pure(&v)
    }

    /// Maximally mixed state I/d.
    pub fn maximally_mixed(d: usize) -> Self {
        DensityOperator::new(eye(d).mapv(|v| v / d as f64))
    }
}

/// Von Neumann entropy in bits. Eigenvalues below 1e-12 are treated as 0;
/// eigenvalues in (−1e-10, 0) are clipped; anything more negative is an error.
pub fn von_neumann_entropy(rho: &DensityOperator) -> f64 {
    let (evals, _) = eigh(&rho.matrix);
    let mut s = 0.0;
    for &l in &evals {
        assert!(l >= -1e-10, "entropy of non-PSD input (eigenvalue {l})");
        if l > 1e-12 {
            s -= l * l.log2();
        }
    }
    s
}

/// A completely positive trace-preserving map in Kraus form.
#[derive(Clone, Debug)]
pub struct DenseChannel {
    pub dim_in: usize,
    pub dim_out: usize,
    pub kraus_ops: Vec<CMat>,
}

impl DenseChannel {
    pub fn new(dim_in: usize, dim_out: usize, kraus_ops: Vec<CMat>) -> Self {
        assert!(!kraus_ops.is_empty(), "channel needs at least one Kraus operator");
        for k in &kraus_ops {
            assert_eq!(k.dim(), (dim_out, dim_in), "Kraus operator has wrong shape");
        }
        let mut sum = CMat::zeros((dim_in, dim_in));
        for k in &kraus_ops {
            sum = sum + dagger(k).dot(k);
        }
        let err = (&sum - &eye(dim_in)).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(err <= 1e-10, "Kraus completeness violated by {err}");
        DenseChannel { dim_in, dim_out, kraus_ops }
    }

    pub fn identity(d: usize) -> Self {
        DenseChannel::new(d, d, vec![eye(d)])
    }

    /// Conjugation by a single unitary.
    pub fn from_unitary(u: CMat) -> Self {
        let d = u.nrows();
        DenseChannel::new(d, d, vec![u])
    }

    /// Kraus form of a Pauli channel.
    pub fn from_pauli_channel(ch: &PauliChannel) -> Self {
        let d = 1usize << ch.n();
        let ops = ch
            .entries()
            .into_iter()
            .map(|(p, w)| pauli_matrix(&p).mapv(|v| v * w.sqrt()))
            .collect();
        DenseChannel::new(d, d, ops)
    }

    /// The fully depolarizing direction: ρ ↦ (1−p)ρ + p·I/d·Tr(ρ).
    pub fn uniform_depolarizing(d: usize, p: f64) -> Self {
        assert!((0.0..=1.0).contains(&p));
        let mut ops: Vec<CMat> = vec![eye(d).mapv(|v| v * (1.0 - p).sqrt())];
        // I/d Tr(ρ) = Σ_{ij} |i⟩⟨j| ρ |j⟩⟨i| / d.
        for i in 0..d {
            for j in 0..d {
                let mut k = CMat::zeros((d, d));
                k[(i, j)] = C64::new((p / d as f64).sqrt(), 0.0);
                ops.push(k);
            }
        }
        DenseChannel::new(d, d, ops)
    }

    pub fn apply(&self, rho: &DensityOperator) -> DensityOperator {
        assert_eq!(rho.dim, self.dim_in, "dimension mismatch");
        let mut out = CMat::zeros((self.dim_out, self.dim_out));
        for k in &self.kraus_ops {
            out = out + k.dot(&rho.matrix).dot(&dagger(k));
        }
        DensityOperator::new(out)
    }

    /// Apply to an arbitrary (not necessarily normalized) operator.
    pub fn apply_raw(&self, op: &CMat) -> CMat {
        let mut out = CMat::zeros((self.dim_out, self.dim_out));
        for k in &self.kraus_ops {
            out = out + k.dot(op).dot(&dagger(k));
        }
        out
    }

    /// Serial composition: self after other.
    pub fn compose_after(&self, other: &DenseChannel) -> DenseChannel {
        assert_eq!(other.dim_out, self.dim_in);
        let mut ops = Vec::new();
        for a in &self.kraus_ops {
            for b in &other.kraus_ops {
                ops.push(a.dot(b));
            }
        }
        DenseChannel::new(other.dim_in, self.dim_out, ops)
    }

    pub fn tensor(&self, other: &DenseChannel) -> DenseChannel {
        let mut ops = Vec::new();
        for a in &self.kraus_ops {
            for b in &other.kraus_ops {
                ops.push(kron(a, b));
            }
        }
        DenseChannel::new(self.dim_in * other.dim_in, self.dim_out * other.dim_out, ops)
    }

    /// Choi operator (id ⊗ T)(|Ω⟩⟨Ω|) with |Ω⟩ = Σ_i |ii⟩ (unnormalized).
    pub fn choi(&self) -> CMat {
        let d_in = self.dim_in;
        let d_out = self.dim_out;
        let mut choi = CMat::zeros((d_in * d_out, d_in * d_out));
        for i in 0..d_in {
            for j in 0..d_in {
                let mut eij = CMat::zeros((d_in, d_in));
                eij[(i, j)] = ONE;
                let tij = self.apply_raw(&eij);
                for k in 0..d_out {
                    for l in 0..d_out {
                        choi[(i * d_out + k, j * d_out + l)] = tij[(k, l)];
                    }
                }
            }
        }
        choi
    }

    /// Complementary channel to the environment of the Stinespring isometry
    /// V = Σ_j K_j ⊗ |j⟩: T^c(ρ)_{jk} = Tr(K_k ρ K_j†).
    pub fn complementary(&self) -> DenseChannel {
        let e = self.kraus_ops.len();
        let d_in = self.dim_in;
        // Kraus operators of T^c: L_m (for m = 0..dim_out−1) with
        // (L_m)_{j, i} = (K_j)_{m, i}.
        let mut ops = Vec::with_capacity(self.dim_out);
        for m in 0..self.dim_out {
            let mut l = CMat::zeros((e, d_in));
            for (j, k) in self.kraus_ops.iter().enumerate() {
                for i in 0..d_in {
                    l[(j, i)] = k[(m, i)];
                }
            }
            ops.push(l);
        }
        DenseChannel::new(d_in, e, ops)
    }
}

/// A classical-quantum channel: symbol i ↦ outputs[i].
#[derive(Clone, Debug)]
pub struct CqChannel {
    pub outputs: Vec<DensityOperator>,
}

impl CqChannel {
    pub fn new(outputs: Vec<DensityOperator>) -> Self {
        assert!(!outputs.is_empty());
        let d = outputs[0].dim;
        assert!(outputs.iter().all(|o| o.dim == d), "outputs must share a dimension");
        CqChannel { outputs }
    }

    pub fn alphabet_size(&self) -> usize {
        self.outputs.len()
    }

    pub fn dim(&self) -> usize {
        self.outputs[0].dim
    }

    /// k-fold tensor power; alphabet is the k-fold product, symbol index in
    /// base `alphabet_size` with the first factor most significant.
    pub fn tensor_power(&self, k: usize) -> CqChannel {
        assert!(k >= 1);
        let mut outs: Vec<DensityOperator> = self.outputs.clone();
        for _ in 1..k {
            let mut next = Vec::with_capacity(outs.len() * self.outputs.len());
            for a in &outs {
                for b in &self.outputs {
                    next.push(DensityOperator::new(kron(&a.matrix, &b.matrix)));
                }
            }
            outs = next;
        }
        CqChannel::new(outs)
    }
}

/// Apply a Pauli channel to a dense state.
pub fn apply_pauli_channel(ch: &PauliChannel, rho: &DensityOperator) -> DensityOperator {
    assert_eq!(1usize << ch.n(), rho.dim, "dimension mismatch");
    DenseChannel::from_pauli_channel(ch).apply(rho)
}

/// Pauli-twirl of a dense channel: the Pauli channel with
/// p_Q = 4^{−n} Σ_P (−1)^{⟨P,Q⟩} λ_P, where λ_P = Tr(P·ch(P))/2^n is the
/// diagonal of the Pauli transfer matrix and ⟨P,Q⟩ is the symplectic form.
/// Entries are clipped at 0 and renormalized (drift ≤ numerical noise for a
/// CPTP input). Twirling an already-Pauli channel returns it unchanged.
pub fn pauli_twirl(ch: &DenseChannel) -> PauliChannel {
    assert_eq!(ch.dim_in, ch.dim_out, "twirl needs a square channel");
    let n = (ch.dim_in as f64).log2().round() as usize;
    assert_eq!(1usize << n, ch.dim_in, "dimension must be a power of 2");
    assert!(n <= 5, "dense twirl capped at 5 qubits");
    let d = ch.dim_in as f64;

    let all_paulis: Vec<PauliString> = pauli_strings(n);
    let lambdas: Vec<f64> = all_paulis
        .iter()
        .map(|p| {
            let pm = pauli_matrix(p);
            let tp = ch.apply_raw(&pm);
            (trace(&pm.dot(&tp)).re) / d
        })
        .collect();

    let mut pairs: Vec<(PauliString, f64)> = Vec::with_capacity(all_paulis.len());
    for q in &all_paulis {
        let mut w = 0.0;
        for (p, &lam) in all_paulis.iter().zip(&lambdas) {
            let sign = if p.commutes(q) { 1.0 } else { -1.0 };
            w += sign * lam;
        }
        w /= (4.0f64).powi(n as i32);
        pairs.push((q.clone(), w.max(0.0)));
    }
    let total: f64 = pairs.iter().map(|(_, w)| w).sum();
    assert!(total > 0.0);
    for (_, w) in pairs.iter_mut() {
        *w /= total;
    }
    PauliChannel::from_pairs(n, pairs)
}

/// All 4^n phase-free Pauli strings in lexicographic kind order.
pub fn pauli_strings(n: usize) -> Vec<PauliString> {
    let mut out = Vec::with_capacity(1 << (2 * n));
    let mut kinds = vec![PauliKind::I; n];
    fn rec(q: usize, n: usize, kinds: &mut Vec<PauliKind>, out: &mut Vec<PauliString>) {
        if q == n {
            out.push(PauliString::from_kinds(kinds));
            return;
        }
        for k in PauliKind::ALL {
            kinds[q] = k;
            rec(q + 1, n, kinds, out);
        }
    }
    rec(0, n, &mut kinds, &mut out);
    out
}

/// Partial trace over the complement of `keep` for a state on ⊗_i C^{dims[i]}.
pub fn partial_trace(m: &CMat, dims: &[usize], keep: &[usize]) -> CMat {
    let total: usize = dims.iter().product();
    assert_eq!(m.nrows(), total);
    let keep_dim: usize = keep.iter().map(|&i| dims[i]).product();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let traced_dim: usize = traced.iter().map(|&i| dims[i]).product();

    let index_of = |keep_idx: usize, traced_idx: usize| -> usize {
        // Reassemble the full multi-index in factor order.
        let mut digits = vec![0usize; dims.len()];
        let mut ki = keep_idx;
        for &f in keep.iter().rev() {
            digits[f] = ki % dims[f];
            ki /= dims[f];
        }
        let mut ti = traced_idx;
        for &f in traced.iter().rev() {
            digits[f] = ti % dims[f];
            ti /= dims[f];
        }
        let mut idx = 0usize;
        for (f, &d) in dims.iter().enumerate() {
            idx = idx * d + digits[f];
        }
        idx
    };

    let mut out = CMat::zeros((keep_dim, keep_dim));
    for a in 0..keep_dim {
        for b in 0..keep_dim {
            let mut s = ZERO;
            for t in 0..traced_dim {
                s += m[(index_of(a, t), index_of(b, t))];
            }
            out[(a, b)] = s;
        }
    }
    out
}

/// Trace norm of a Hermitian matrix (sum of |eigenvalues|).
pub fn trace_norm_hermitian(a: &CMat) -> f64 {
    let (evals, _) = eigh(a);
    evals.iter().map(|l| l.abs()).sum()
}
