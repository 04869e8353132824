//! The 7-qubit CSS code: stabilizer data, ideal encoder/decoder circuits,
//! verified ancilla preparation, and the error-correction gadget.
//!
//! Conventions fixed here and used everywhere downstream:
//!
//! - Generators g₁..g₃ are X-type on the supports {3,4,5,6}, {1,2,5,6},
//!   {0,2,4,6}; g₄..g₆ are Z-type on the same supports. The supports are the
//!   rows of the [7,4] parity-check matrix in `bits::HAMMING_MASKS` (mask 2,
//!   mask 1, mask 0 respectively).
//! - The syndrome of a Pauli P is the 6-bit word whose k-th bit records
//!   whether P anticommutes with g_{k+1}.
//! - `syndrome_table[s]` is the corrector family the ideal decoder is built
//!   from: products of six fixed single-generator correctors
//!   (destabilizers), so the family is multiplicative in s and the decoder
//!   is a Clifford circuit. `minimal_correction(s)` is the weight-minimal
//!   corrector (at most one Z and one X) used by the error-correction
//!   gadget's classical decode.
//! - Error correction is Steane-style with verified ancillas and a
//!   skip-on-reject discipline: each sector prepares one encoded ancilla,
//!   verifies it against a sacrificial copy, and gates the data↔ancilla
//!   interaction and the frame correction on the verification's accept bit.
//!   A rejected sector degrades that round of EC to the identity, keeping
//!   the circuit's location set static.

use crate::bits::HAMMING_MASKS;
use crate::circuit::{compose_parallel, compose_serial, CircuitBuilder, CircuitDiagram, LocKind};
use crate::pauli::{PauliKind, PauliString};
use crate::tableau::StabilizerTableau;

/// Pauli string of one kind supported on the set bits of `mask`.
pub fn pauli_from_mask(n: usize, mask: u64, kind: PauliKind) -> PauliString {
    let mut p = PauliString::identity(n);
    for q in 0..n {
        if mask >> q & 1 == 1 {
            p.set_kind(q, kind);
        }
    }
    p
}

/// Stabilizer data of the 7-qubit code.
#[derive(Clone, Debug)]
pub struct CodeSpec {
    pub n_phys: usize,
    /// g₁..g₆: three X-type then three Z-type generators.
    pub generators: Vec<PauliString>,
    /// Full-weight logical representatives X^{⊗7}, Z^{⊗7}.
    pub logical_x: PauliString,
    pub logical_z: PauliString,
    /// Weight-3 logical representatives on the support {2,4,5}.
    pub logical_x_rep: PauliString,
    pub logical_z_rep: PauliString,
    /// D₁..D₆: Dₖ anticommutes with gₖ and commutes with everything else
    /// (including both logical representatives).
    pub destabilizers: Vec<PauliString>,
    /// Multiplicative corrector family: syndrome_table[s] = Π Dₖ^{sₖ}.
    pub syndrome_table: Vec<PauliString>,
}

impl CodeSpec {
    /// 6-bit syndrome: bit k set iff `p` anticommutes with g_{k+1}.
    pub fn syndrome_of(&self, p: &PauliString) -> u8 {
        let mut s = 0u8;
        for (k, g) in self.generators.iter().enumerate() {
            if !p.commutes(g) {
                s |= 1 << k;
            }
        }
        s
    }

    /// Weight-minimal corrector: at most one Z (from syndrome bits 1..3) and
    /// one X (from bits 4..6), combined to Y on a shared line.
    pub fn minimal_correction(&self, s: u8) -> PauliString {
        let b = |k: usize| (s as usize) >> k & 1;
        // Bits k = 0,1,2 come from the X-type generators on masks 2,1,0, so
        // the Hamming position of the Z error is b2 + 2·b1 + 4·b0.
        let pos_z = b(2) + 2 * b(1) + 4 * b(0);
        let pos_x = b(5) + 2 * b(4) + 4 * b(3);
        let mut p = PauliString::identity(7);
        if pos_z > 0 {
            p.set_kind(pos_z - 1, PauliKind::Z);
        }
        if pos_x > 0 {
            let q = pos_x - 1;
            let kind = if p.kind_at(q) == PauliKind::Z {
                PauliKind::Y
            } else {
                PauliKind::X
            };
            p.set_kind(q, kind);
        }
        p
    }
}

/// Build the code data.
pub fn steane_spec() -> CodeSpec {
    let gen_masks = [HAMMING_MASKS[2], HAMMING_MASKS[1], HAMMING_MASKS[0]];
    let mut generators = Vec::new();
    for &m in &gen_masks {
        generators.push(pauli_from_mask(7, m, PauliKind::X));
    }
    for &m in &gen_masks {
        generators.push(pauli_from_mask(7, m, PauliKind::Z));
    }
    let rep_mask = 0b0110100u64; // lines {2,4,5}
    let destabilizers = vec![
        PauliString::single(7, 3, PauliKind::Z),
        PauliString::single(7, 1, PauliKind::Z),
        PauliString::single(7, 0, PauliKind::Z),
        pauli_from_mask(7, 0b1110000, PauliKind::X), // lines {4,5,6}
        pauli_from_mask(7, 0b1100100, PauliKind::X), // lines {2,5,6}
        pauli_from_mask(7, 0b1010100, PauliKind::X), // lines {2,4,6}
    ];
    let mut syndrome_table = Vec::with_capacity(64);
    for s in 0..64usize {
        let mut e = PauliString::identity(7);
        for (k, d) in destabilizers.iter().enumerate() {
            if s >> k & 1 == 1 {
                e = e.mul(d);
            }
        }
        syndrome_table.push(e);
    }
    CodeSpec {
        n_phys: 7,
        generators,
        logical_x: pauli_from_mask(7, 0x7f, PauliKind::X),
        logical_z: pauli_from_mask(7, 0x7f, PauliKind::Z),
        logical_x_rep: pauli_from_mask(7, rep_mask, PauliKind::X),
        logical_z_rep: pauli_from_mask(7, rep_mask, PauliKind::Z),
        destabilizers,
        syndrome_table,
    }
}

// ---------------------------------------------------------------------------
// Clifford maps and circuit synthesis
// ---------------------------------------------------------------------------

/// A Clifford unitary represented by the images of X_q and Z_q under
/// conjugation.
#[derive(Clone, Debug)]
pub struct CliffordMap {
    pub n: usize,
    pub x_images: Vec<PauliString>,
    pub z_images: Vec<PauliString>,
}

impl CliffordMap {
    pub fn identity(n: usize) -> Self {
        CliffordMap {
            n,
            x_images: (0..n).map(|q| PauliString::single(n, q, PauliKind::X)).collect(),
            z_images: (0..n).map(|q| PauliString::single(n, q, PauliKind::Z)).collect(),
        }
    }

    /// Check the symplectic and Hermiticity conditions.
    pub fn is_valid(&self) -> bool {
        let all = |k: usize| {
            if k < self.n {
                &self.x_images[k]
            } else {
                &self.z_images[k - self.n]
            }
        };
        for k in 0..2 * self.n {
            if all(k).phase_exponent() % 2 != 0 {
                return false;
            }
            for j in 0..2 * self.n {
                let want_anticommute = j % self.n == k % self.n && j != k;
                if all(k).commutes(all(j)) == want_anticommute {
                    return false;
                }
            }
        }
        true
    }

    /// Image of an arbitrary Pauli string under conjugation, with exact
    /// phase. Uses the canonical decomposition P = i^φ Π_q X_q^{x} Z_q^{z}.
    pub fn image(&self, p: &PauliString) -> PauliString {
        assert_eq!(p.n(), self.n);
        let mut phase = p.phase_exponent();
        for q in 0..self.n {
            phase = (phase + p.x_bit(q) * p.z_bit(q)) % 4;
        }
        let mut acc = PauliString::identity(self.n);
        acc.set_phase_exponent(phase);
        for q in 0..self.n {
            if p.x_bit(q) == 1 {
                acc = acc.mul(&self.x_images[q]);
            }
            if p.z_bit(q) == 1 {
                acc = acc.mul(&self.z_images[q]);
            }
        }
        acc
    }

    /// Composition: (self ∘ other), i.e. conjugate first by `other`.
    pub fn compose_after(&self, other: &CliffordMap) -> CliffordMap {
        assert_eq!(self.n, other.n);
        CliffordMap {
            n: self.n,
            x_images: other.x_images.iter().map(|p| self.image(p)).collect(),
            z_images: other.z_images.iter().map(|p| self.image(p)).collect(),
        }
    }

    /// Conjugation map of a unitary (gate-only) circuit.
    pub fn from_ideal_circuit(c: &CircuitDiagram) -> CliffordMap {
        let mut m = CliffordMap::identity(c.n_lines);
        for loc in &c.locations {
            let conj = |p: &mut PauliString| match loc.kind {
                LocKind::Hadamard => p.conj_h(loc.qubits[0]),
                LocKind::Cnot => p.conj_cnot(loc.qubits[0], loc.qubits[1]),
                LocKind::PauliX => p.conj_pauli(loc.qubits[0], PauliKind::X),
                LocKind::PauliY => p.conj_pauli(loc.qubits[0], PauliKind::Y),
                LocKind::PauliZ => p.conj_pauli(loc.qubits[0], PauliKind::Z),
                LocKind::Wait => {}
                _ => panic!("non-unitary location {:?} in conjugation map", loc.kind),
            };
            for p in m.x_images.iter_mut().chain(m.z_images.iter_mut()) {
                conj(p);
            }
        }
        m
    }
}

/// One gate of a synthesized Clifford circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CliffGate {
    H(usize),
    Cnot(usize, usize),
    X(usize),
    Z(usize),
}

fn conj_by_gate(p: &mut PauliString, g: CliffGate) {
    match g {
        CliffGate::H(q) => p.conj_h(q),
        CliffGate::Cnot(c, t) => p.conj_cnot(c, t),
        CliffGate::X(q) => p.conj_pauli(q, PauliKind::X),
        CliffGate::Z(q) => p.conj_pauli(q, PauliKind::Z),
    }
}

/// Gate sequence realizing the INVERSE of `map`: conjugating the images by
/// the returned gates, in order, reduces the map to the identity. The
/// algorithm needs no phase gate because it only handles maps whose images
/// are free of Y factors (real Clifford maps); intermediate Y factors always
/// occur in pairs and are eliminated pairwise.
pub fn synthesize_inverse(map: &CliffordMap) -> Vec<CliffGate> {
    assert!(map.is_valid(), "not a valid Clifford map");
    for p in map.x_images.iter().chain(&map.z_images) {
        for q in 0..map.n {
            assert!(
                !(p.x_bit(q) == 1 && p.z_bit(q) == 1),
                "synthesis requires Y-free images"
            );
        }
    }
    let n = map.n;
    let mut xs = map.x_images.clone();
    let mut zs = map.z_images.clone();
    let mut gates: Vec<CliffGate> = Vec::new();
    let mut emit = |g: CliffGate, xs: &mut Vec<PauliString>, zs: &mut Vec<PauliString>| {
        for p in xs.iter_mut().chain(zs.iter_mut()) {
            conj_by_gate(p, g);
        }
        gates.push(g);
    };
    for q in 0..n {
        // --- bring the X image to ±X_q ---
        if (q..n).all(|j| xs[q].x_bit(j) == 0) {
            let j = (q..n).find(|&j| xs[q].z_bit(j) == 1).expect("invalid map");
            emit(CliffGate::H(j), &mut xs, &mut zs);
        }
        if xs[q].x_bit(q) == 0 {
            let j = (q..n).find(|&j| xs[q].x_bit(j) == 1).unwrap();
            emit(CliffGate::Cnot(q, j), &mut xs, &mut zs);
            emit(CliffGate::Cnot(j, q), &mut xs, &mut zs);
            emit(CliffGate::Cnot(q, j), &mut xs, &mut zs);
        }
        for j in q + 1..n {
            if xs[q].x_bit(j) == 1 {
                emit(CliffGate::Cnot(q, j), &mut xs, &mut zs);
            }
        }
        for j in q + 1..n {
            if xs[q].z_bit(j) == 1 {
                // CZ(q, j) built from H and CNOT.
                emit(CliffGate::H(j), &mut xs, &mut zs);
                emit(CliffGate::Cnot(q, j), &mut xs, &mut zs);
                emit(CliffGate::H(j), &mut xs, &mut zs);
            }
        }
        assert_eq!(xs[q].z_bit(q), 0, "realness violated at pivot {q}");
        // --- bring the Z image to ±Z_q ---
        if zs[q].x_bit(q) == 1 {
            let j = (q + 1..n)
                .find(|&j| zs[q].x_bit(j) == 1)
                .expect("realness guarantees an X partner");
            emit(CliffGate::Cnot(j, q), &mut xs, &mut zs);
        }
        loop {
            let ys: Vec<usize> = (q + 1..n)
                .filter(|&j| zs[q].x_bit(j) == 1 && zs[q].z_bit(j) == 1)
                .collect();
            if ys.is_empty() {
                break;
            }
            assert!(ys.len() >= 2, "unpaired Y factor in Z image at pivot {q}");
            emit(CliffGate::Cnot(ys[0], ys[1]), &mut xs, &mut zs);
        }
        for j in q + 1..n {
            if zs[q].x_bit(j) == 1 {
                emit(CliffGate::H(j), &mut xs, &mut zs);
            }
        }
        assert_eq!(zs[q].z_bit(q), 1, "Z image lost its pivot");
        for j in q + 1..n {
            if zs[q].z_bit(j) == 1 {
                emit(CliffGate::Cnot(j, q), &mut xs, &mut zs);
            }
        }
    }
    // Fix signs with a final Pauli layer.
    for q in 0..n {
        if xs[q].phase_exponent() == 2 {
            emit(CliffGate::Z(q), &mut xs, &mut zs);
        }
        if zs[q].phase_exponent() == 2 {
            emit(CliffGate::X(q), &mut xs, &mut zs);
        }
    }
    for q in 0..n {
        assert_eq!(xs[q].label(), PauliString::single(n, q, PauliKind::X).label());
        assert_eq!(zs[q].label(), PauliString::single(n, q, PauliKind::Z).label());
    }
    gates
}

/// Noise-free circuit applying the gates in the given time order.
pub fn gates_to_ideal_circuit(n: usize, gates: &[CliffGate]) -> CircuitDiagram {
    let mut b = CircuitBuilder::new(n, 0, (0..n).collect()).ideal();
    for q in 0..n {
        b.wait(q);
    }
    b.end_timestep();
    for &g in gates {
        match g {
            CliffGate::H(q) => {
                b.h(q);
            }
            CliffGate::Cnot(c, t) => {
                b.cnot(c, t);
            }
            CliffGate::X(q) => {
                b.gate(LocKind::PauliX, q);
            }
            CliffGate::Z(q) => {
                b.gate(LocKind::PauliZ, q);
            }
        }
        b.end_timestep();
    }
    b.finish((0..n).collect(), vec![])
}

/// The encoder's conjugation map: line 0 carries the logical qubit, lines
/// 1..6 the syndrome bits of g₁..g₆.
pub fn encoder_map() -> CliffordMap {
    let spec = steane_spec();
    let mut x_images = vec![spec.logical_x_rep.clone()];
    let mut z_images = vec![spec.logical_z_rep.clone()];
    for k in 0..6 {
        x_images.push(spec.destabilizers[k].clone());
        z_images.push(spec.generators[k].clone());
    }
    CliffordMap { n: 7, x_images, z_images }
}

/// Replace the output-line ordering (a pure relabeling of which output feeds
/// which downstream input).
pub fn with_output_order(mut c: CircuitDiagram, order: Vec<usize>) -> CircuitDiagram {
    assert_eq!(order.len(), c.output_lines.len());
    let old: std::collections::HashSet<usize> = c.output_lines.iter().copied().collect();
    assert!(order.iter().all(|q| old.contains(q)), "order must permute outputs");
    c.output_lines = order;
    c
}

fn ideal_wait_circuit(n: usize) -> CircuitDiagram {
    let mut b = CircuitBuilder::new(n, 0, (0..n).collect()).ideal();
    for q in 0..n {
        b.wait(q);
    }
    b.end_timestep();
    b.finish((0..n).collect(), vec![])
}

/// Noise-free encoder circuit. Level 1 maps (data, 6 syndrome lines) to one
/// code block; level l applies the level-1 encoder, then encodes each of the
/// 7 resulting lines with the level-(l−1) encoder.
pub fn ideal_encoder_circuit(level: usize) -> CircuitDiagram {
    assert!(level >= 1, "unsupported level");
    if level == 1 {
        let mut gates = synthesize_inverse(&encoder_map());
        gates.reverse();
        return gates_to_ideal_circuit(7, &gates);
    }
    let prev = ideal_encoder_circuit(level - 1);
    let k = prev.n_lines; // 7^(level-1)
    let outer = compose_parallel(&ideal_encoder_circuit(1), &ideal_wait_circuit(7 * k - 7));
    // Output j of the level-1 encoder must feed block j's data line; the
    // pass-through lines fill each block's syndrome inputs.
    let mut order = Vec::new();
    for j in 0..7 {
        order.push(j);
        for i in 0..k - 1 {
            order.push(7 + j * (k - 1) + i);
        }
    }
    let outer = with_output_order(outer, order);
    let mut inner = prev.clone();
    for _ in 0..6 {
        inner = compose_parallel(&inner, &prev);
    }
    compose_serial(&outer, &inner)
}

/// Noise-free decoder circuit, the exact inverse of `ideal_encoder_circuit`.
pub fn ideal_decoder_circuit(level: usize) -> CircuitDiagram {
    assert!(level >= 1, "unsupported level");
    if level == 1 {
        let gates = synthesize_inverse(&encoder_map());
        return gates_to_ideal_circuit(7, &gates);
    }
    let prev = ideal_decoder_circuit(level - 1);
    let k = prev.n_lines;
    let mut inner = prev.clone();
    for _ in 0..6 {
        inner = compose_parallel(&inner, &prev);
    }
    // Each block decodes to (data at its first line, syndromes after); route
    // the 7 data lines into the outer level-1 decoder.
    let mut order = Vec::new();
    for j in 0..7 {
        order.push(j * k);
    }
    for j in 0..7 {
        for i in 1..k {
            order.push(j * k + i);
        }
    }
    let inner = with_output_order(inner, order);
    let outer = compose_parallel(&ideal_decoder_circuit(1), &ideal_wait_circuit(7 * k - 7));
    compose_serial(&inner, &outer)
}

// ---------------------------------------------------------------------------
// Encoded-state preparation and verification
// ---------------------------------------------------------------------------

/// Timesteps used by the unverified preparation of one encoded block.
pub const PREP_STEPS: usize = 5;

const ZERO_CNOT_LAYERS: [[(usize, usize); 3]; 3] = [
    [(0, 2), (1, 5), (3, 6)],
    [(0, 4), (1, 6), (3, 5)],
    [(0, 6), (1, 2), (3, 4)],
];
const PLUS_CNOT_LAYERS: [[(usize, usize); 3]; 3] = [
    [(0, 5), (1, 4), (3, 6)],
    [(0, 6), (2, 4), (3, 5)],
    [(1, 6), (2, 5), (3, 4)],
];

/// Emit timestep `step` of the preparation of |0̄⟩ (plus = false) or |+̄⟩
/// (plus = true) on the given lines. The caller owns `end_timestep`.
pub fn emit_prep_step(b: &mut CircuitBuilder, lines: &[usize], plus: bool, step: usize) {
    emit_prep_step_guarded(b, lines, plus, step, &[]);
}

/// As `emit_prep_step` with every location guarded. With a nonempty guard
/// the target lines must be live (a guarded preparation never revives).
pub fn emit_prep_step_guarded(
    b: &mut CircuitBuilder,
    lines: &[usize],
    plus: bool,
    step: usize,
    guards: &[(usize, bool)],
) {
    match step {
        0 => {
            for &q in lines {
                if guards.is_empty() {
                    b.prep(q);
                } else {
                    b.prep_guarded(q, guards.to_vec());
                }
            }
        }
        1 => {
            let hs: &[usize] = if plus { &[0, 1, 2, 3] } else { &[0, 1, 3] };
            for &q in hs {
                if guards.is_empty() {
                    b.h(lines[q]);
                } else {
                    b.gate_guarded(LocKind::Hadamard, lines[q], guards.to_vec());
                }
            }
        }
        2..=4 => {
            let layers = if plus { &PLUS_CNOT_LAYERS } else { &ZERO_CNOT_LAYERS };
            for &(c, t) in &layers[step - 2] {
                if guards.is_empty() {
                    b.cnot(lines[c], lines[t]);
                } else {
                    b.cnot_guarded(lines[c], lines[t], guards.to_vec());
                }
            }
        }
        _ => panic!("prep has {PREP_STEPS} steps"),
    }
}

/// Classical bits produced by one EC round on one block.
#[derive(Clone, Debug)]
pub struct EcRecord {
    /// Accept bit of the X-syndrome sector (|+̄⟩ ancilla, Z-verified).
    pub acc_a: usize,
    /// Accept bit of the Z-syndrome sector (|0̄⟩ ancilla, X-verified).
    pub acc_b: usize,
    /// X-syndrome measurement word (7 bits) and Z-syndrome word.
    pub w_a: Vec<usize>,
    pub w_b: Vec<usize>,
}

/// One block undergoing EC: 7 data lines plus 28 fresh ancilla lines
/// (ancilla A, sacrificial A, ancilla B, sacrificial B).
#[derive(Clone, Debug)]
pub struct EcBlock {
    pub data: [usize; 7],
    pub anc: [usize; 28],
}

/// Timesteps used by one EC round.
pub const EC_STEPS: usize = 13;

/// Emit one EC round on several blocks in lockstep. Calls `end_timestep`
/// once per step.
pub fn emit_ec_round(b: &mut CircuitBuilder, blocks: &[EcBlock]) -> Vec<EcRecord> {
    let mut records = Vec::new();
    for _ in blocks {
        let y_a = b.add_cbits(7);
        let y_b = b.add_cbits(7);
        let acc = b.add_cbits(2);
        let w_a = b.add_cbits(7);
        let w_b = b.add_cbits(7);
        records.push((y_a, y_b, acc[0], acc[1], w_a, w_b));
    }
    for step in 0..EC_STEPS {
        for (blk, (y_a, y_b, acc_a, acc_b, w_a, w_b)) in blocks.iter().zip(&records) {
            let anc_a = &blk.anc[0..7];
            let sac_a = &blk.anc[7..14];
            let anc_b = &blk.anc[14..21];
            let sac_b = &blk.anc[21..28];
            match step {
                0..=4 => {
                    emit_prep_step(b, anc_a, true, step);
                    emit_prep_step(b, sac_a, true, step);
                    emit_prep_step(b, anc_b, false, step);
                    emit_prep_step(b, sac_b, false, step);
                }
                5 => {
                    // Verifications: Z-type errors on ancilla A copy onto the
                    // sacrificial block; X-type errors on ancilla B do.
                    for i in 0..7 {
                        b.cnot(sac_a[i], anc_a[i]);
                        b.cnot(anc_b[i], sac_b[i]);
                    }
                }
                6 => {
                    for i in 0..7 {
                        b.h(sac_a[i]);
                        b.measure(sac_b[i], y_b[i]);
                    }
                    b.classical(LocKind::Accept, y_b.clone(), Some(*acc_b), vec![], vec![]);
                }
                7 => {
                    for i in 0..7 {
                        b.measure(sac_a[i], y_a[i]);
                    }
                    b.classical(LocKind::Accept, y_a.clone(), Some(*acc_a), vec![], vec![]);
                }
                8 => {
                    for i in 0..7 {
                        b.cnot_guarded(blk.data[i], anc_a[i], vec![(*acc_a, true)]);
                    }
                }
                9 => {
                    for i in 0..7 {
                        b.measure(anc_a[i], w_a[i]);
                    }
                    b.classical(
                        LocKind::CorrX,
                        w_a.clone(),
                        None,
                        blk.data.to_vec(),
                        vec![(*acc_a, true)],
                    );
                }
                10 => {
                    for i in 0..7 {
                        b.cnot_guarded(anc_b[i], blk.data[i], vec![(*acc_b, true)]);
                    }
                }
                11 => {
                    for i in 0..7 {
                        b.h(anc_b[i]);
                    }
                }
                12 => {
                    for i in 0..7 {
                        b.measure(anc_b[i], w_b[i]);
                    }
                    b.classical(
                        LocKind::CorrZ,
                        w_b.clone(),
                        None,
                        blk.data.to_vec(),
                        vec![(*acc_b, true)],
                    );
                }
                _ => unreachable!(),
            }
        }
        b.end_timestep();
    }
    records
        .into_iter()
        .map(|(_, _, acc_a, acc_b, w_a, w_b)| EcRecord { acc_a, acc_b, w_a, w_b })
        .collect()
}

/// Standalone one-round EC circuit on one block: data lines 0..6, ancillas
/// 7..34. Classical outputs are the two accept bits.
pub fn ec_circuit_level1() -> CircuitDiagram {
    let mut b = CircuitBuilder::new(35, 0, (0..7).collect());
    let block = EcBlock {
        data: [0, 1, 2, 3, 4, 5, 6],
        anc: std::array::from_fn(|i| 7 + i),
    };
    let recs = emit_ec_round(&mut b, &[block]);
    b.finish((0..7).collect(), vec![recs[0].acc_a, recs[0].acc_b])
}

/// Embed a 7-qubit Pauli onto the given lines of a wider register.
pub fn embed(n: usize, lines: &[usize], p: &PauliString) -> PauliString {
    let mut out = PauliString::identity(n);
    out.set_phase_exponent(p.phase_exponent());
    for (k, &q) in lines.iter().enumerate() {
        out.set_kind(q, p.kind_at(k));
    }
    out
}

/// Overwrite the tableau rows of the given lines with an encoded block
/// state: `stabs[k]`/`destabs[k]` become the stabilizer/destabilizer of
/// line `lines[k]`.
pub fn install_block(
    t: &mut StabilizerTableau,
    lines: &[usize],
    stabs: &[PauliString],
    destabs: &[PauliString],
) {
    let n = t.n;
    assert_eq!(stabs.len(), lines.len());
    assert_eq!(destabs.len(), lines.len());
    for (k, &q) in lines.iter().enumerate() {
        t.rows[q] = embed(n, lines, &destabs[k]);
        t.rows[n + q] = embed(n, lines, &stabs[k]);
    }
    debug_assert!(t.is_valid());
}

/// Stabilizer/destabilizer bases for the three reference codewords.
pub fn codeword_basis(which: char) -> (Vec<PauliString>, Vec<PauliString>) {
    let spec = steane_spec();
    let mut neg_z = spec.logical_z_rep.clone();
    neg_z.mul_phase(2);
    let (logical_stab, logical_destab) = match which {
        '0' => (spec.logical_z_rep.clone(), spec.logical_x_rep.clone()),
        '1' => (neg_z, spec.logical_x_rep.clone()),
        '+' => (spec.logical_x_rep.clone(), spec.logical_z_rep.clone()),
        _ => panic!("unknown codeword"),
    };
    let mut stabs = vec![logical_stab];
    let mut destabs = vec![logical_destab];
    for k in 0..6 {
        stabs.push(spec.generators[k].clone());
        destabs.push(spec.destabilizers[k].clone());
    }
    (stabs, destabs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{enumerate_patterns_up_to_weight, FaultLabel, FaultPattern};
    use crate::frame::propagate;
    use crate::pauli::PauliKind::{I, X, Y, Z};
    use crate::tableau::{noiseless_reference, run_tableau};

    fn all_weight_le2() -> Vec<PauliString> {
        let mut out = Vec::new();
        for q in 0..7 {
            for k in [X, Y, Z] {
                out.push(PauliString::single(7, q, k));
            }
        }
        for q in 0..7 {
            for r in q + 1..7 {
                for k in [X, Y, Z] {
                    for m in [X, Y, Z] {
                        let mut p = PauliString::identity(7);
                        p.set_kind(q, k);
                        p.set_kind(r, m);
                        out.push(p);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn spec_invariants() {
        let spec = steane_spec();
        for (i, g) in spec.generators.iter().enumerate() {
            assert_eq!(g.phase_exponent(), 0);
            for h in &spec.generators[i + 1..] {
                assert!(g.commutes(h));
            }
            assert!(spec.logical_x.commutes(g));
            assert!(spec.logical_z.commutes(g));
            assert!(spec.logical_x_rep.commutes(g));
            assert!(spec.logical_z_rep.commutes(g));
        }
        assert!(!spec.logical_x.commutes(&spec.logical_z));
        assert!(!spec.logical_x_rep.commutes(&spec.logical_z_rep));
        // Representatives differ from the full-weight logicals by stabilizers.
        assert_eq!(spec.syndrome_of(&spec.logical_x_rep), 0);
        assert_eq!(spec.syndrome_of(&spec.logical_z_rep), 0);
        // Destabilizer pairing.
        for (k, d) in spec.destabilizers.iter().enumerate() {
            assert_eq!(spec.syndrome_of(d), 1 << k, "destabilizer {k}");
            for (j, e) in spec.destabilizers.iter().enumerate() {
                if j != k {
                    assert!(d.commutes(e));
                }
            }
            assert!(d.commutes(&spec.logical_x_rep));
            assert!(d.commutes(&spec.logical_z_rep));
        }
        // Corrector family: multiplicative, correct syndromes, identity at 0.
        assert!(spec.syndrome_table[0].is_identity());
        for s in 0..64u8 {
            assert_eq!(spec.syndrome_of(&spec.syndrome_table[s as usize]), s);
            assert_eq!(spec.syndrome_table[s as usize].phase_exponent(), 0);
        }
    }

    #[test]
    fn minimal_correction_roundtrip() {
        let spec = steane_spec();
        for s in 0..64u8 {
            let e = spec.minimal_correction(s);
            assert_eq!(spec.syndrome_of(&e), s, "syndrome {s}");
            let x_weight = (0..7).filter(|&q| e.x_bit(q) == 1).count();
            let z_weight = (0..7).filter(|&q| e.z_bit(q) == 1).count();
            assert!(x_weight <= 1 && z_weight <= 1);
        }
        // Weight-1 errors are corrected exactly (21 cases).
        for q in 0..7 {
            for k in [X, Y, Z] {
                let e = PauliString::single(7, q, k);
                let s = spec.syndrome_of(&e);
                assert_ne!(s, 0);
                assert_eq!(spec.minimal_correction(s).label(), e.label());
            }
        }
    }

    #[test]
    fn distance_is_exactly_three() {
        let spec = steane_spec();
        // No nonidentity weight ≤ 2 error is undetectable.
        for p in all_weight_le2() {
            assert_ne!(spec.syndrome_of(&p), 0, "undetected {}", p);
        }
        // A weight-3 logical exists.
        assert_eq!(spec.logical_x_rep.weight(), 3);
        assert_eq!(spec.syndrome_of(&spec.logical_x_rep), 0);
        assert!(!spec.logical_x_rep.commutes(&spec.logical_z));
    }

    #[test]
    fn encoder_map_is_valid_and_synthesizes() {
        let map = encoder_map();
        assert!(map.is_valid());
        let enc = ideal_encoder_circuit(1);
        let from_circ = CliffordMap::from_ideal_circuit(&enc);
        for q in 0..7 {
            assert_eq!(from_circ.x_images[q].label(), map.x_images[q].label());
            assert_eq!(from_circ.z_images[q].label(), map.z_images[q].label());
        }
        // Decoder is the exact inverse.
        let dec = ideal_decoder_circuit(1);
        let composed = CliffordMap::from_ideal_circuit(&dec).compose_after(&from_circ);
        let id = CliffordMap::identity(7);
        for q in 0..7 {
            assert_eq!(composed.x_images[q].label(), id.x_images[q].label());
            assert_eq!(composed.z_images[q].label(), id.z_images[q].label());
        }
    }

    #[test]
    fn random_real_maps_synthesize() {
        use rand::Rng;
        // Random Y-free symplectic maps built from random H/CNOT/CZ/Pauli
        // words; synthesis must reproduce them exactly.
        for trial in 0..30u64 {
            let mut rng = crate::rng::stream(42, 9, trial, 0);
            let n = 2 + (trial % 4) as usize;
            let mut gates = Vec::new();
            for _ in 0..25 {
                match rng.gen_range(0..4) {
                    0 => gates.push(CliffGate::H(rng.gen_range(0..n))),
                    1 => {
                        let c = rng.gen_range(0..n);
                        let t = (c + 1 + rng.gen_range(0..n - 1)) % n;
                        gates.push(CliffGate::Cnot(c, t));
                    }
                    2 => gates.push(CliffGate::X(rng.gen_range(0..n))),
                    _ => gates.push(CliffGate::Z(rng.gen_range(0..n))),
                }
            }
            let c = gates_to_ideal_circuit(n, &gates);
            let map = CliffordMap::from_ideal_circuit(&c);
            // Random real-Clifford words can produce Y-carrying images;
            // restrict to Y-free cases, which are the ones we synthesize.
            let y_free = map.x_images.iter().chain(&map.z_images).all(|p| {
                (0..n).all(|q| !(p.x_bit(q) == 1 && p.z_bit(q) == 1))
            });
            if !y_free {
                continue;
            }
            let inv_gates = synthesize_inverse(&map);
            let mut gates_fwd = inv_gates;
            gates_fwd.reverse();
            let resynth = CliffordMap::from_ideal_circuit(&gates_to_ideal_circuit(n, &gates_fwd));
            for q in 0..n {
                assert_eq!(resynth.x_images[q].label(), map.x_images[q].label());
                assert_eq!(resynth.z_images[q].label(), map.z_images[q].label());
            }
        }
    }

    #[test]
    fn decoder_separates_logical_and_syndrome() {
        // Dec*(E_s |ī⟩) = |i⟩|s⟩ for all 128 combinations.
        let spec = steane_spec();
        let enc = ideal_encoder_circuit(1);
        let dec = ideal_decoder_circuit(1);
        for i in 0..2u8 {
            for s in 0..64usize {
                let mut t = StabilizerTableau::zero_state(7);
                if i == 1 {
                    t.apply_pauli(&PauliString::single(7, 0, X));
                }
                let rec = run_tableau(&enc, &FaultPattern::empty(), &t, 1, 0).unwrap();
                let mut t = rec.final_tableau.unwrap();
                t.apply_pauli(&spec.syndrome_table[s]);
                let rec = run_tableau(&dec, &FaultPattern::empty(), &t, 1, 0).unwrap();
                let t = rec.final_tableau.unwrap();
                let z0 = t.expectation(&PauliString::single(7, 0, Z));
                assert_eq!(z0, if i == 0 { 1 } else { -1 }, "logical at (i={i}, s={s})");
                for k in 0..6 {
                    let zk = t.expectation(&PauliString::single(7, k + 1, Z));
                    let want = if s >> k & 1 == 0 { 1 } else { -1 };
                    assert_eq!(zk, want, "syndrome bit {k} at (i={i}, s={s})");
                }
            }
        }
    }

    #[test]
    fn level2_recursion_matches_map_composition() {
        let enc2 = ideal_encoder_circuit(2);
        assert_eq!(enc2.n_lines, 49);
        let dec2 = ideal_decoder_circuit(2);
        // Serial composition wires encoder output position k to decoder
        // input position k; the result must be the positional identity.
        let composite = compose_serial(&enc2, &dec2);
        let m = CliffordMap::from_ideal_circuit(&composite);
        for (k, (&in_q, &out_q)) in enc2
            .input_lines
            .iter()
            .zip(&composite.output_lines)
            .enumerate()
        {
            assert_eq!(
                m.x_images[in_q].label(),
                PauliString::single(49, out_q, X).label(),
                "X at position {k}"
            );
            assert_eq!(
                m.z_images[in_q].label(),
                PauliString::single(49, out_q, Z).label(),
                "Z at position {k}"
            );
        }
        // The encoder sends Z_0 to a level-2 logical operator: per-block
        // restriction (blocks are consecutive 7-line groups of the output
        // list) has zero syndrome on every block.
        let spec = steane_spec();
        let m_enc = CliffordMap::from_ideal_circuit(&enc2);
        let z0_image = m_enc.image(&PauliString::single(49, 0, Z));
        let mut nontrivial_blocks = 0;
        for blk in 0..7 {
            let lines: Vec<usize> = enc2.output_lines[7 * blk..7 * blk + 7].to_vec();
            let restricted = z0_image.restrict(&lines);
            assert_eq!(spec.syndrome_of(&restricted), 0, "block {blk}");
            if !restricted.is_identity() {
                nontrivial_blocks += 1;
            }
        }
        assert_eq!(nontrivial_blocks, 3, "weight-3 representative across blocks");
    }

    #[test]
    fn prep_circuits_produce_codewords() {
        let spec = steane_spec();
        for plus in [false, true] {
            let mut b = CircuitBuilder::new(7, 0, vec![]);
            for step in 0..PREP_STEPS {
                emit_prep_step(&mut b, &[0, 1, 2, 3, 4, 5, 6], plus, step);
                b.end_timestep();
            }
            let c = b.finish((0..7).collect(), vec![]);
            let t = StabilizerTableau::zero_state(7);
            let rec = run_tableau(&c, &FaultPattern::empty(), &t, 5, 0).unwrap();
            let t = rec.final_tableau.unwrap();
            for g in &spec.generators {
                assert_eq!(t.expectation(g), 1, "generator on plus={plus}");
            }
            let logical = if plus { &spec.logical_x } else { &spec.logical_z };
            assert_eq!(t.expectation(logical), 1, "logical on plus={plus}");
        }
    }

    #[test]
    fn ec_verifications_accept_deterministically() {
        let c = ec_circuit_level1();
        let mut t = StabilizerTableau::zero_state(35);
        let (stabs, destabs) = codeword_basis('0');
        install_block(&mut t, &[0, 1, 2, 3, 4, 5, 6], &stabs, &destabs);
        for seed in 0..30u64 {
            let rec = run_tableau(&c, &FaultPattern::empty(), &t, seed, 0).unwrap();
            assert_eq!(rec.cbits[c.classical_out[0]], 1, "accept A at seed {seed}");
            assert_eq!(rec.cbits[c.classical_out[1]], 1, "accept B at seed {seed}");
        }
    }

    #[test]
    fn ec_corrects_all_weight_one_errors() {
        let spec = steane_spec();
        let c = ec_circuit_level1();
        let data: Vec<usize> = (0..7).collect();
        for which in ['0', '1', '+'] {
            let (stabs, destabs) = codeword_basis(which);
            for e in std::iter::once(PauliString::identity(7)).chain(
                (0..7).flat_map(|q| [X, Y, Z].map(|k| PauliString::single(7, q, k))),
            ) {
                let mut t = StabilizerTableau::zero_state(35);
                install_block(&mut t, &data, &stabs, &destabs);
                t.apply_pauli(&embed(35, &data, &e));
                let rec = run_tableau(&c, &FaultPattern::empty(), &t, 11, 0).unwrap();
                let t_out = rec.final_tableau.unwrap();
                for g in &spec.generators {
                    assert_eq!(t_out.expectation(&embed(35, &data, g)), 1, "{which} {e}");
                }
                assert_eq!(
                    t_out.expectation(&embed(35, &data, &stabs[0])),
                    1,
                    "logical after {which} with error {e}"
                );
            }
        }
    }

    #[test]
    fn some_weight_two_error_is_logical_after_ec() {
        // X₀X₁ has the syndrome of X₂; correcting it completes the logical
        // X₀X₁X₂ = X̄·g₁.
        let c = ec_circuit_level1();
        let data: Vec<usize> = (0..7).collect();
        let (stabs, destabs) = codeword_basis('0');
        let mut t = StabilizerTableau::zero_state(35);
        install_block(&mut t, &data, &stabs, &destabs);
        let mut e = PauliString::identity(7);
        e.set_kind(0, X);
        e.set_kind(1, X);
        t.apply_pauli(&embed(35, &data, &e));
        let rec = run_tableau(&c, &FaultPattern::empty(), &t, 13, 0).unwrap();
        let t_out = rec.final_tableau.unwrap();
        assert_eq!(t_out.expectation(&embed(35, &data, &stabs[0])), -1);
    }

    #[test]
    fn frame_predictions_match_tableau_on_ec() {
        // For every weight-1 pattern and a batch of weight-2 patterns, the
        // coin-free frame engine predicts the faulty output's generator and
        // logical expectations exactly: sign(P) = ±1 according to whether
        // the residual deviation commutes with P.
        let spec = steane_spec();
        let c = ec_circuit_level1();
        let data: Vec<usize> = (0..7).collect();
        let (stabs, destabs) = codeword_basis('0');
        let mut input = StabilizerTableau::zero_state(35);
        install_block(&mut input, &data, &stabs, &destabs);

        let mut checks: Vec<PauliString> = spec.generators.iter().map(|g| embed(35, &data, g)).collect();
        checks.push(embed(35, &data, &stabs[0]));

        let patterns = enumerate_patterns_up_to_weight(&c, 1).unwrap();
        // A deterministic thinning of the weight-2 pairs keeps the test fast
        // without materializing the full quadratic set.
        let label_for = |loc_id: usize, k: crate::pauli::PauliKind| {
            if c.location(loc_id).kind == LocKind::Cnot {
                FaultLabel::Two(k, I)
            } else {
                FaultLabel::One(k)
            }
        };
        let ids: Vec<usize> = c.slotted_locations().map(|l| l.id).collect();
        let kinds = [X, Y, Z];
        let mut weight2 = Vec::new();
        let mut counter = 0usize;
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                counter += 1;
                if counter % 211 != 0 {
                    continue;
                }
                let mut f = FaultPattern::empty();
                f.assignments
                    .insert(ids[i], label_for(ids[i], kinds[counter % 3]));
                f.assignments
                    .insert(ids[j], label_for(ids[j], kinds[(counter / 3) % 3]));
                weight2.push(f);
            }
        }
        let all: Vec<FaultPattern> = patterns
            .into_iter()
            .map(|(f, _)| f)
            .chain(weight2)
            .collect();
        for f in &all {
            let run = propagate(&c, f).unwrap();
            let rec = run_tableau(&c, f, &input, 21, 0).unwrap();
            let t_out = rec.final_tableau.unwrap();
            for p in &checks {
                let sign = if run.deviation.commutes(p) { 1 } else { -1 };
                assert_eq!(
                    t_out.expectation(p),
                    sign,
                    "pattern {:?} on {}",
                    f.assignments,
                    p
                );
            }
        }
        // Make sure the run exercised a nontrivial number of patterns.
        assert!(all.len() > 1000, "only {} patterns", all.len());
    }

    #[test]
    fn ec_budget_is_modest() {
        let c = ec_circuit_level1();
        assert_eq!(c.depth, EC_STEPS);
        let slots = c.slot_count();
        assert!(slots < 450, "EC uses {slots} slots");
        // Noiseless reference exists and accepts; used by downstream tests.
        let reference = noiseless_reference(&c, 17);
        assert_eq!(reference.cbits[c.classical_out[0]], 1);
    }

    #[test]
    fn embed_and_install_roundtrip() {
        let p = PauliString::from_label("+XIZ").unwrap();
        let e = embed(6, &[1, 3, 5], &p);
        assert_eq!(e.kind_at(1), X);
        assert_eq!(e.kind_at(3), I);
        assert_eq!(e.kind_at(5), Z);
        assert_eq!(e.kind_at(0), I);
        let (stabs, destabs) = codeword_basis('+');
        let mut t = StabilizerTableau::zero_state(9);
        install_block(&mut t, &[2, 3, 4, 5, 6, 7, 8], &stabs, &destabs);
        assert!(t.is_valid());
        let spec = steane_spec();
        let lines: Vec<usize> = (2..9).collect();
        assert_eq!(t.expectation(&embed(9, &lines, &spec.logical_x_rep)), 1);
        assert_eq!(t.expectation(&embed(9, &lines, &spec.generators[3])), 1);
    }
}
