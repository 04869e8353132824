//! Teleportation interfaces between the bare level and the encoded levels.
//!
//! Encoding works by preparing the entangled resource
//! (|0>|0_L> + |1>|1_L>)/sqrt(2) between a bare ancilla and a freshly
//! prepared block, Bell-measuring the input qubit against the bare half,
//! and steering transversal Pauli corrections from the two outcome bits;
//! a round of error correction closes the gadget. Decoding runs the mirror
//! image: a resource pair between a bare output qubit and a fresh block,
//! followed by a logical Bell measurement of the incoming block against the
//! fresh one (transversal CNOT, transversal Hadamard, transversal
//! measurement, logical readout of both words) whose outcome bits steer
//! bare Pauli corrections on the output qubit.
//!
//! Both directions necessarily expose bare, unprotected operations, so the
//! interface failure probability is linear in the fault rate; the exact
//! first- and second-order coefficients are computed here by enumeration,
//! and Monte-Carlo estimation covers both levels.

use std::collections::HashMap;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::circuit::{
    compose_serial, sample_fault_pattern, CircuitBuilder, CircuitDiagram, FaultLabel,
    FaultPattern, LocKind, NoiseModel,
};
use crate::frame::{decision_index, propagate_from, propagate_trace};
use crate::gadgets::{block_logical_class, ec_circuit, implement, slotted_location_count};
use crate::pauli::{PauliKind, PauliString};
use crate::steane::{emit_ec_round, emit_prep_step, steane_spec, CodeSpec, EcBlock, PREP_STEPS};
use crate::FtError;

/// Representative of a logical single-qubit Pauli on one block.
pub fn logical_rep(spec: &CodeSpec, p: PauliKind) -> PauliString {
    match p {
        PauliKind::I => PauliString::identity(7),
        PauliKind::X => spec.logical_x_rep.clone(),
        PauliKind::Z => spec.logical_z_rep.clone(),
        PauliKind::Y => {
            let mut y = spec.logical_x_rep.mul(&spec.logical_z_rep);
            y.mul_phase(1);
            y
        }
    }
}

/// Stabilizer/destabilizer bases for the six logical Pauli eigenstates,
/// suitable for `install_block`.
pub fn eigenstate_basis(kind: PauliKind, negative: bool) -> (Vec<PauliString>, Vec<PauliString>) {
    assert!(kind != PauliKind::I, "an eigenstate needs a non-identity axis");
    let spec = steane_spec();
    let mut logical_stab = logical_rep(&spec, kind);
    if negative {
        logical_stab.mul_phase(2);
    }
    let logical_destab = match kind {
        PauliKind::X => spec.logical_z_rep.clone(),
        _ => spec.logical_x_rep.clone(),
    };
    let mut stabs = vec![logical_stab];
    let mut destabs = vec![logical_destab];
    for k in 0..6 {
        stabs.push(spec.generators[k].clone());
        destabs.push(spec.destabilizers[k].clone());
    }
    (stabs, destabs)
}

fn logical_x_support(spec: &CodeSpec) -> Vec<usize> {
    (0..7)
        .filter(|&q| spec.logical_x_rep.kind_at(q) == PauliKind::X)
        .collect()
}

/// Interface circuit encoding one bare qubit into a level-1 block
/// (1 input line, 7 output lines), ending in an error-correction round.
pub fn build_enc_0_1() -> CircuitDiagram {
    let spec = steane_spec();
    let input = 0usize;
    let bare = 1usize;
    let block: [usize; 7] = core::array::from_fn(|k| 2 + k);
    let pool: [usize; 28] = core::array::from_fn(|k| 9 + k);
    let (m1, m2) = (0usize, 1usize);

    let mut b = CircuitBuilder::new(37, 2, vec![input]);
    // Resource state: |+> on the bare ancilla, |0_L> on the block, then a
    // controlled logical X from the ancilla onto the block.
    b.prep(bare);
    emit_prep_step(&mut b, &block, false, 0);
    b.end_timestep();
    b.h(bare);
    emit_prep_step(&mut b, &block, false, 1);
    b.end_timestep();
    for step in 2..PREP_STEPS {
        emit_prep_step(&mut b, &block, false, step);
        b.end_timestep();
    }
    for q in logical_x_support(&spec) {
        b.cnot(bare, block[q]);
        b.end_timestep();
    }
    // Bell measurement of the input against the bare resource half.
    b.cnot(input, bare);
    b.end_timestep();
    b.h(input);
    b.end_timestep();
    b.measure(input, m1);
    b.measure(bare, m2);
    b.end_timestep();
    // Outcome-steered transversal corrections complete the teleportation.
    for q in 0..7 {
        b.cpauli(LocKind::CPauliX, m2, block[q]);
    }
    b.end_timestep();
    for q in 0..7 {
        b.cpauli(LocKind::CPauliZ, m1, block[q]);
    }
    b.end_timestep();
    emit_ec_round(&mut b, &[EcBlock { data: block, anc: pool }]);
    b.finish(block.to_vec(), vec![])
}

/// Interface circuit decoding a level-1 block back to one bare qubit
/// (7 input lines, 1 output line).
pub fn build_dec_1_0() -> CircuitDiagram {
    let spec = steane_spec();
    let block: Vec<usize> = (0..7).collect();
    let fresh: [usize; 7] = core::array::from_fn(|k| 7 + k);
    let out = 14usize;
    // Classical bits: 14 raw measurement bits, then the two logical words.
    let (m_block, m_fresh) = (14usize, 15usize);

    let mut b = CircuitBuilder::new(15, 16, block.clone());
    // Resource state: |+> on the bare output, |0_L> on the fresh block,
    // then a controlled logical X.
    b.prep(out);
    emit_prep_step(&mut b, &fresh, false, 0);
    b.end_timestep();
    b.h(out);
    emit_prep_step(&mut b, &fresh, false, 1);
    b.end_timestep();
    for step in 2..PREP_STEPS {
        emit_prep_step(&mut b, &fresh, false, step);
        b.end_timestep();
    }
    for q in logical_x_support(&spec) {
        b.cnot(out, fresh[q]);
        b.end_timestep();
    }
    // Logical Bell measurement of the incoming block against the fresh one.
    for q in 0..7 {
        b.cnot(block[q], fresh[q]);
    }
    b.end_timestep();
    for q in 0..7 {
        b.h(block[q]);
    }
    b.end_timestep();
    for q in 0..7 {
        b.measure(block[q], q);
    }
    for q in 0..7 {
        b.measure(fresh[q], 7 + q);
    }
    b.classical(LocKind::DecodeL, (0..7).collect(), Some(m_block), vec![], vec![]);
    b.classical(LocKind::DecodeL, (7..14).collect(), Some(m_fresh), vec![], vec![]);
    b.end_timestep();
    // Outcome-steered bare corrections complete the teleportation.
    b.cpauli(LocKind::CPauliX, m_fresh, out);
    b.end_timestep();
    b.cpauli(LocKind::CPauliZ, m_block, out);
    b.end_timestep();
    b.finish(vec![out], vec![])
}

/// An encoder/decoder pair for one level, plus the decoder test harness
/// (a leading error-correction round feeding the decoder, which is the
/// context the decoder runs in).
#[derive(Clone, Debug)]
pub struct InterfacePair {
    pub level: usize,
    pub enc_circuit: CircuitDiagram,
    pub dec_circuit: CircuitDiagram,
    pub dec_test_circuit: CircuitDiagram,
}

fn interface_cache(level: usize) -> &'static InterfacePair {
    static LEVEL1: OnceLock<InterfacePair> = OnceLock::new();
    static LEVEL2: OnceLock<InterfacePair> = OnceLock::new();
    let build = |level: usize| -> InterfacePair {
        let enc01 = build_enc_0_1();
        let dec10 = build_dec_1_0();
        let (enc, dec) = match level {
            1 => (enc01, dec10),
            2 => {
                let enc12 = implement(&enc01, 1).expect("level-1 encoder implements");
                let dec21 = implement(&dec10, 1).expect("level-1 decoder implements");
                (compose_serial(&enc01, &enc12), compose_serial(&dec21, &dec10))
            }
            _ => unreachable!(),
        };
        let ec = ec_circuit(level).expect("error-correction round builds");
        let dec_test = compose_serial(&ec, &dec);
        InterfacePair { level, enc_circuit: enc, dec_circuit: dec, dec_test_circuit: dec_test }
    };
    match level {
        1 => LEVEL1.get_or_init(|| build(1)),
        2 => LEVEL2.get_or_init(|| build(2)),
        _ => panic!("unsupported interface level"),
    }
}

/// Build the interface pair for level 1 or 2. Level 2 composes the level-1
/// interface with the implemented (one level deeper) counterpart.
pub fn build_interface(level: usize) -> Result<InterfacePair, FtError> {
    if !(1..=2).contains(&level) {
        return Err(FtError::Invalid(format!("unsupported interface level {level}")));
    }
    Ok(interface_cache(level).clone())
}

pub(crate) fn kind_from_flips(x: u8, z: u8) -> PauliKind {
    match (x, z) {
        (0, 0) => PauliKind::I,
        (1, 0) => PauliKind::X,
        (0, 1) => PauliKind::Z,
        _ => PauliKind::Y,
    }
}

/// Logical class of a deviation on grouped output lines under the ideal
/// hierarchical decoder: blocks of seven reduce to one virtual qubit per
/// block, recursively down to one logical qubit.
pub(crate) fn hierarchical_class(spec: &CodeSpec, dev: &PauliString, outputs: &[usize], level: usize) -> (u8, u8) {
    match level {
        1 => {
            let (x, z, _) = block_logical_class(spec, &dev.restrict(outputs));
            (x, z)
        }
        2 => {
            let mut outer = PauliString::identity(7);
            for k in 0..7 {
                let (x, z, _) = block_logical_class(spec, &dev.restrict(&outputs[7 * k..7 * k + 7]));
                outer.set_kind(k, kind_from_flips(x, z));
            }
            let (x, z, _) = block_logical_class(spec, &outer);
            (x, z)
        }
        _ => panic!("unsupported interface level"),
    }
}

/// Deviation representing a logical Pauli arriving on the (grouped) input
/// lines of `c` at the given level.
pub(crate) fn embedded_input(spec: &CodeSpec, c: &CircuitDiagram, level: usize, p: PauliKind) -> PauliString {
    let mut dev = PauliString::identity(c.n_lines);
    if p == PauliKind::I {
        return dev;
    }
    let rep = logical_rep(spec, p);
    match level {
        1 => {
            for (k, &q) in c.input_lines.iter().enumerate() {
                dev.set_kind(q, rep.kind_at(k));
            }
        }
        2 => {
            for k in 0..7 {
                let inner = logical_rep(spec, rep.kind_at(k));
                for (j, &q) in c.input_lines[7 * k..7 * k + 7].iter().enumerate() {
                    dev.set_kind(q, inner.kind_at(j));
                }
            }
        }
        _ => panic!("unsupported interface level"),
    }
    dev
}

pub(crate) const FRAME_AXES: [PauliKind; 4] = [PauliKind::I, PauliKind::X, PauliKind::Y, PauliKind::Z];

/// Index of a Pauli kind in `FRAME_AXES` order.
pub(crate) fn frame_index(p: PauliKind) -> usize {
    match p {
        PauliKind::I => 0,
        PauliKind::X => 1,
        PauliKind::Y => 2,
        PauliKind::Z => 3,
    }
}

pub(crate) fn flips_of(p: PauliKind) -> (u8, u8) {
    match p {
        PauliKind::I => (0, 0),
        PauliKind::X => (1, 0),
        PauliKind::Y => (1, 1),
        PauliKind::Z => (0, 1),
    }
}

/// Operational correctness of the encoder under a fault pattern: all four
/// logical Pauli frames pushed through the faulty circuit come out as the
/// same logical Pauli under the ideal decoder. (The four frames genuinely
/// differ once faults interact with the acceptance guards, so all four are
/// propagated.)
pub fn enc_is_correct(pair: &InterfacePair, f: &FaultPattern) -> Result<bool, FtError> {
    let spec = steane_spec();
    let c = &pair.enc_circuit;
    for p in FRAME_AXES {
        let mut init = PauliString::identity(c.n_lines);
        if p != PauliKind::I {
            init.set_kind(c.input_lines[0], p);
        }
        let run = propagate_from(c, f, init)?;
        if hierarchical_class(&spec, &run.deviation, &c.output_lines, pair.level) != flips_of(p) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Operational correctness of the decoder under a fault pattern, evaluated
/// on the decoder preceded by an error-correction round (its operating
/// context). The fault pattern addresses `pair.dec_test_circuit`.
pub fn dec_is_correct(pair: &InterfacePair, f: &FaultPattern) -> Result<bool, FtError> {
    let spec = steane_spec();
    let c = &pair.dec_test_circuit;
    let out = c.output_lines[0];
    for p in FRAME_AXES {
        let init = embedded_input(&spec, c, pair.level, p);
        let run = propagate_from(c, f, init)?;
        if run.deviation.kind_at(out) != p {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Exact low-order failure coefficients of one interface circuit:
/// P(not correct) = c1*p + c2*p^2 + O(p^3), obtained by enumerating all
/// fault patterns of weight at most two. `n1`/`n2` count the failing
/// weight-1/weight-2 label patterns and `slots` is the total number of
/// fault slots.
#[derive(Clone, Copy, Debug)]
pub struct ExactCoefficients {
    pub n1: u64,
    pub n2: u64,
    pub slots: u64,
    pub c1: f64,
    pub c2: f64,
}

impl ExactCoefficients {
    /// Exact total probability of the failing patterns of weight <= 2
    /// (no series truncation; the weight >= 3 remainder is separate).
    pub fn probability_low_weight(&self, p: f64) -> f64 {
        let l = self.slots as f64;
        self.n1 as f64 * (p / 3.0) * (1.0 - p).powf(l - 1.0)
            + self.n2 as f64 * (p / 3.0).powi(2) * (1.0 - p).powf(l - 2.0)
    }

    /// Series value c1*p + c2*p^2.
    pub fn series(&self, p: f64) -> f64 {
        self.c1 * p + self.c2 * p * p
    }
}

/// Packed deviation on the output lines: bit k of `x`/`z` is the X/Z
/// component on output line k.
#[derive(Clone, Copy, Default, PartialEq, Eq, Debug)]
struct OutBits {
    x: u64,
    z: u64,
}

impl OutBits {
    #[inline]
    fn xor(self, o: OutBits) -> OutBits {
        OutBits { x: self.x ^ o.x, z: self.z ^ o.z }
    }
}

fn pack_outputs(dev: &PauliString, outputs: &[usize]) -> OutBits {
    let mut o = OutBits::default();
    for (k, &q) in outputs.iter().enumerate() {
        o.x |= (dev.x_bit(q) as u64) << k;
        o.z |= (dev.z_bit(q) as u64) << k;
    }
    o
}

/// Logical flips of a packed 7-bit block deviation after minimal-weight
/// correction; bit-level twin of `block_logical_class`.
fn class7(x: u64, z: u64) -> (u8, u8) {
    // XOR of the (1-based) parity-check positions over the support.
    let pos = |mut w: u64| -> u64 {
        let mut p = 0;
        while w != 0 {
            p ^= w.trailing_zeros() as u64 + 1;
            w &= w - 1;
        }
        p
    };
    const REP: u64 = 0b011_0100; // support of the logical representatives
    let px = pos(x);
    let pz = pos(z);
    let xr = if px != 0 { x ^ (1 << (px - 1)) } else { x };
    let zr = if pz != 0 { z ^ (1 << (pz - 1)) } else { z };
    (((xr & REP).count_ones() & 1) as u8, ((zr & REP).count_ones() & 1) as u8)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Target {
    Encode,
    Decode,
}

const KINDS: [PauliKind; 3] = [PauliKind::X, PauliKind::Y, PauliKind::Z];

/// Precomputed single-fault responses of one level-1 interface circuit.
///
/// For every fault slot and Pauli kind the engine stores, per logical input
/// frame, the final output deviation (relative to the no-fault baseline)
/// and the set of decision locations whose classical inputs differed from
/// the baseline. Any fault pattern whose faults touch pairwise-disjoint
/// decision sets composes exactly by XOR (propagation is linear away from
/// decisions); everything else falls back to full propagation, so the
/// engine is exact at every weight.
pub struct ResponseEngine {
    circuit: CircuitDiagram,
    target: Target,
    slots: Vec<(usize, usize, LocKind)>,
    slot_of: HashMap<(usize, usize), usize>,
    inits: [PauliString; 4],
    expected: [(u8, u8); 4],
    base_out: [OutBits; 4],
    resp_out: Vec<[OutBits; 4]>,
    resp_touch: Vec<[[u64; 4]; 4]>,
}

fn label_for(kind: LocKind, which: usize, k: PauliKind) -> FaultLabel {
    if kind == LocKind::Cnot {
        if which == 0 {
            FaultLabel::Two(k, PauliKind::I)
        } else {
            FaultLabel::Two(PauliKind::I, k)
        }
    } else {
        FaultLabel::One(k)
    }
}

impl ResponseEngine {
    fn new(circuit: CircuitDiagram, target: Target, level: usize) -> Result<Self, FtError> {
        assert_eq!(level, 1, "the response engine covers the level-1 circuits");
        let spec = steane_spec();
        let dix = decision_index(&circuit);
        if dix.count() > 256 {
            return Err(FtError::Budget(format!(
                "{} decision locations exceed the response-engine width",
                dix.count()
            )));
        }
        let inits: [PauliString; 4] = core::array::from_fn(|i| match target {
            Target::Encode => {
                let mut d = PauliString::identity(circuit.n_lines);
                if FRAME_AXES[i] != PauliKind::I {
                    d.set_kind(circuit.input_lines[0], FRAME_AXES[i]);
                }
                d
            }
            Target::Decode => embedded_input(&spec, &circuit, 1, FRAME_AXES[i]),
        });
        let expected: [(u8, u8); 4] = core::array::from_fn(|i| flips_of(FRAME_AXES[i]));

        let empty = FaultPattern::empty();
        let mut base_out = [OutBits::default(); 4];
        let mut base_trace: Vec<Vec<u64>> = Vec::with_capacity(4);
        for fr in 0..4 {
            let (run, trace) = propagate_trace(&circuit, &empty, inits[fr].clone(), &dix)?;
            base_out[fr] = pack_outputs(&run.deviation, &circuit.output_lines);
            base_trace.push(trace);
        }

        let slots: Vec<(usize, usize, LocKind)> = circuit
            .slotted_locations()
            .flat_map(|l| (0..l.kind.slots()).map(move |w| (l.id, w, l.kind)))
            .collect();
        let slot_of: HashMap<(usize, usize), usize> =
            slots.iter().enumerate().map(|(s, &(id, w, _))| ((id, w), s)).collect();

        let mut resp_out = Vec::with_capacity(slots.len() * 3);
        let mut resp_touch = Vec::with_capacity(slots.len() * 3);
        for &(id, which, kind) in &slots {
            for k in KINDS {
                let f = FaultPattern::single(id, label_for(kind, which, k));
                let mut outs = [OutBits::default(); 4];
                let mut touches = [[0u64; 4]; 4];
                for fr in 0..4 {
                    let (run, trace) = propagate_trace(&circuit, &f, inits[fr].clone(), &dix)?;
                    outs[fr] = pack_outputs(&run.deviation, &circuit.output_lines).xor(base_out[fr]);
                    for (d, (&a, &b)) in trace.iter().zip(&base_trace[fr]).enumerate() {
                        if a != b {
                            touches[fr][d / 64] |= 1 << (d % 64);
                        }
                    }
                }
                resp_out.push(outs);
                resp_touch.push(touches);
            }
        }
        let engine = ResponseEngine {
            circuit,
            target,
            slots,
            slot_of,
            inits,
            expected,
            base_out,
            resp_out,
            resp_touch,
        };
        for fr in 0..4 {
            assert!(engine.classify(fr, engine.base_out[fr]), "zero-noise baseline must be correct");
        }
        Ok(engine)
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    /// Classification value of an output deviation: logical (x, z) flips for
    /// the encoder target, bare-line (x, z) bits for the decoder target.
    #[inline]
    fn value(&self, o: OutBits) -> (u8, u8) {
        match self.target {
            Target::Encode => class7(o.x, o.z),
            Target::Decode => ((o.x & 1) as u8, (o.z & 1) as u8),
        }
    }

    #[inline]
    fn classify(&self, fr: usize, o: OutBits) -> bool {
        self.value(o) == self.expected[fr]
    }

    fn responses_of(&self, f: &FaultPattern) -> Vec<usize> {
        let mut responses = Vec::with_capacity(4);
        for (&id, &lab) in &f.assignments {
            match lab {
                FaultLabel::One(k) => {
                    if k != PauliKind::I {
                        responses.push(self.slot_of[&(id, 0)] * 3 + kind_index(k));
                    }
                }
                FaultLabel::Two(a, b) => {
                    if a != PauliKind::I {
                        responses.push(self.slot_of[&(id, 0)] * 3 + kind_index(a));
                    }
                    if b != PauliKind::I {
                        responses.push(self.slot_of[&(id, 1)] * 3 + kind_index(b));
                    }
                }
            }
        }
        responses
    }

    /// Superposed output of one frame; None when two responses touch a
    /// common decision of that frame (full propagation required).
    #[inline]
    fn superposed_frame(&self, fr: usize, responses: &[usize]) -> Option<OutBits> {
        let mut seen = [0u64; 4];
        let mut out = self.base_out[fr];
        for &r in responses {
            let t = &self.resp_touch[r][fr];
            if t.iter().zip(&seen).any(|(&a, &b)| a & b != 0) {
                return None;
            }
            for w in 0..4 {
                seen[w] |= t[w];
            }
            out = out.xor(self.resp_out[r][fr]);
        }
        Some(out)
    }

    /// Exact classification values of all four input frames at once.
    pub(crate) fn frame_values(&self, f: &FaultPattern) -> [(u8, u8); 4] {
        let responses = self.responses_of(f);
        core::array::from_fn(|fr| {
            let out = self.superposed_frame(fr, &responses).unwrap_or_else(|| {
                let run = propagate_from(&self.circuit, f, self.inits[fr].clone())
                    .expect("pattern covers the circuit");
                pack_outputs(&run.deviation, &self.circuit.output_lines)
            });
            self.value(out)
        })
    }

    /// Correctness by superposition for a response set; None when two
    /// responses touch a common decision (full propagation required).
    #[inline]
    fn superposed(&self, responses: &[usize]) -> Option<bool> {
        for fr in 0..4 {
            match self.superposed_frame(fr, responses) {
                Some(out) => {
                    if !self.classify(fr, out) {
                        return Some(false);
                    }
                }
                None => return None,
            }
        }
        Some(true)
    }

    fn full_run(&self, f: &FaultPattern) -> bool {
        for fr in 0..4 {
            let run = propagate_from(&self.circuit, f, self.inits[fr].clone())
                .expect("pattern covers the circuit");
            let out = pack_outputs(&run.deviation, &self.circuit.output_lines);
            if !self.classify(fr, out) {
                return false;
            }
        }
        true
    }

    /// Exact operational correctness of the circuit under the pattern.
    pub fn is_correct(&self, f: &FaultPattern) -> bool {
        let responses = self.responses_of(f);
        if responses.is_empty() {
            return true;
        }
        self.superposed(&responses).unwrap_or_else(|| self.full_run(f))
    }

    pub(crate) fn pattern_for(&self, picks: &[(usize, PauliKind)]) -> FaultPattern {
        let mut f = FaultPattern::empty();
        for &(s, k) in picks {
            let (id, which, kind) = self.slots[s];
            let lab = label_for(kind, which, k);
            f.assignments
                .entry(id)
                .and_modify(|have| {
                    if let (FaultLabel::Two(a0, b0), FaultLabel::Two(a1, b1)) = (*have, lab) {
                        *have = FaultLabel::Two(
                            if a1 == PauliKind::I { a0 } else { a1 },
                            if b1 == PauliKind::I { b0 } else { b1 },
                        );
                    }
                })
                .or_insert(lab);
        }
        f
    }

    /// Failing weight-1 label patterns, read straight off the stored
    /// single-fault responses (each one is an exact full run).
    fn exact_coefficients_n1_only(&self) -> u64 {
        let mut n1 = 0u64;
        for r in 0..3 * self.slots.len() {
            let ok = (0..4).all(|fr| self.classify(fr, self.base_out[fr].xor(self.resp_out[r][fr])));
            if !ok {
                n1 += 1;
            }
        }
        n1
    }

    /// Exact failure coefficients by complete weight-1 and weight-2
    /// enumeration over fault slots and Pauli kinds.
    pub fn exact_coefficients(&self) -> ExactCoefficients {
        let s = self.slots.len();
        let n1 = self.exact_coefficients_n1_only();
        let n2: u64 = (0..s)
            .into_par_iter()
            .map(|i| {
                let mut local = 0u64;
                for j in i + 1..s {
                    for ki in 0..3 {
                        for kj in 0..3 {
                            let pair = [i * 3 + ki, j * 3 + kj];
                            let ok = self.superposed(&pair).unwrap_or_else(|| {
                                self.full_run(&self.pattern_for(&[
                                    (i, KINDS[ki]),
                                    (j, KINDS[kj]),
                                ]))
                            });
                            if !ok {
                                local += 1;
                            }
                        }
                    }
                }
                local
            })
            .sum();
        let slots = self.circuit.slot_count() as u64;
        let l = slots as f64;
        ExactCoefficients {
            n1,
            n2,
            slots,
            c1: n1 as f64 / 3.0,
            c2: n2 as f64 / 9.0 - n1 as f64 * (l - 1.0) / 3.0,
        }
    }

    /// Monte-Carlo failure count over iid fault patterns.
    pub fn mc_failures(&self, p: f64, trials: u64, seed: u64) -> u64 {
        let nm = NoiseModel::new(p);
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let f = sample_fault_pattern(&self.circuit, &nm, seed, t);
                u64::from(!self.is_correct(&f))
            })
            .sum()
    }
}

fn kind_index(k: PauliKind) -> usize {
    match k {
        PauliKind::X => 0,
        PauliKind::Y => 1,
        PauliKind::Z => 2,
        PauliKind::I => unreachable!("identity is not a fault"),
    }
}

pub(crate) fn engines_level1() -> Result<&'static (ResponseEngine, ResponseEngine), FtError> {
    static CACHE: OnceLock<(ResponseEngine, ResponseEngine)> = OnceLock::new();
    if let Some(v) = CACHE.get() {
        return Ok(v);
    }
    let pair = build_interface(1)?;
    let enc = ResponseEngine::new(pair.enc_circuit.clone(), Target::Encode, 1)?;
    let dec = ResponseEngine::new(pair.dec_test_circuit.clone(), Target::Decode, 1)?;
    Ok(CACHE.get_or_init(|| (enc, dec)))
}

fn exact_level1() -> Result<(ExactCoefficients, ExactCoefficients), FtError> {
    static CACHE: OnceLock<(ExactCoefficients, ExactCoefficients)> = OnceLock::new();
    if let Some(v) = CACHE.get() {
        return Ok(*v);
    }
    let (enc, dec) = engines_level1()?;
    let e = enc.exact_coefficients();
    let d = dec.exact_coefficients();
    Ok(*CACHE.get_or_init(|| (e, d)))
}

/// Monte-Carlo failure estimate of one interface level, with the exact
/// low-order coefficients attached at level 1. `loc_count_enc` and
/// `loc_count_dec` always report the level-1 building blocks (encoder, and
/// decoder with its leading error-correction round): their maximum is the
/// location count entering the linear failure envelope at every level.
#[derive(Clone, Debug)]
pub struct FailureEstimate {
    pub level: usize,
    pub p: f64,
    pub trials: u64,
    pub fail_enc: u64,
    pub fail_dec: u64,
    pub p_fail_enc: f64,
    pub se_enc: f64,
    pub p_fail_dec: f64,
    pub se_dec: f64,
    pub linear_coeff_enc: f64,
    pub linear_coeff_dec: f64,
    pub exact_enc: Option<ExactCoefficients>,
    pub exact_dec: Option<ExactCoefficients>,
    pub loc_count_enc: usize,
    pub loc_count_dec: usize,
}

/// Location count of the level-1 building blocks: the linear envelope at
/// every level uses the larger of the two.
pub fn interface_location_counts() -> Result<(usize, usize), FtError> {
    let pair = build_interface(1)?;
    Ok((
        slotted_location_count(&pair.enc_circuit),
        slotted_location_count(&pair.dec_test_circuit),
    ))
}

const DEC_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn estimate_failure(
    level: usize,
    p: f64,
    trials: u64,
    seed: u64,
) -> Result<FailureEstimate, FtError> {
    let pair = build_interface(level)?;
    let nm = NoiseModel::new(p);
    let (fail_enc, fail_dec) = if level == 1 {
        let (enc, dec) = engines_level1()?;
        (enc.mc_failures(p, trials, seed), dec.mc_failures(p, trials, seed ^ DEC_SEED_SALT))
    } else {
        let fe: u64 = (0..trials)
            .into_par_iter()
            .map(|t| {
                let f = sample_fault_pattern(&pair.enc_circuit, &nm, seed, t);
                u64::from(!enc_is_correct(&pair, &f).expect("sampled pattern covers the circuit"))
            })
            .sum();
        let fd: u64 = (0..trials)
            .into_par_iter()
            .map(|t| {
                let f = sample_fault_pattern(&pair.dec_test_circuit, &nm, seed ^ DEC_SEED_SALT, t);
                u64::from(!dec_is_correct(&pair, &f).expect("sampled pattern covers the circuit"))
            })
            .sum();
        (fe, fd)
    };
    let rate = |fails: u64| fails as f64 / trials.max(1) as f64;
    let se = |fails: u64| {
        let q = rate(fails);
        (q * (1.0 - q) / trials.max(1) as f64).sqrt()
    };
    let (exact_enc, exact_dec) = if level == 1 {
        let (e, d) = exact_level1()?;
        (Some(e), Some(d))
    } else {
        (None, None)
    };
    let (loc_count_enc, loc_count_dec) = interface_location_counts()?;
    Ok(FailureEstimate {
        level,
        p,
        trials,
        fail_enc,
        fail_dec,
        p_fail_enc: rate(fail_enc),
        se_enc: se(fail_enc),
        p_fail_dec: rate(fail_dec),
        se_dec: se(fail_dec),
        linear_coeff_enc: if p > 0.0 { rate(fail_enc) / p } else { 0.0 },
        linear_coeff_dec: if p > 0.0 { rate(fail_dec) / p } else { 0.0 },
        exact_enc,
        exact_dec,
        loc_count_enc,
        loc_count_dec,
    })
}

/// Least-squares slope of log(y) against log(x); points with y = 0 are
/// skipped.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(x, y)| x > 0.0 && y > 0.0)
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    assert!(n >= 2.0, "need at least two usable points for a slope");
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{enumerate_patterns_up_to_weight, tail_probability_bound, FaultLabel};
    use crate::frame::propagate;
    use crate::pauli::PauliKind::{I, X, Y, Z};
    use crate::steane::{embed, install_block};
    use crate::tableau::{run_tableau, StabilizerTableau};

    const EIGENSTATES: [(PauliKind, bool); 6] =
        [(Z, false), (Z, true), (X, false), (X, true), (Y, false), (Y, true)];

    #[test]
    fn encoder_maps_all_six_bare_eigenstates_to_logical_ones() {
        let enc = build_enc_0_1();
        let spec = steane_spec();
        for (kind, negative) in EIGENSTATES {
            let mut t = StabilizerTableau::zero_state(enc.n_lines);
            t.set_line_state(enc.input_lines[0], kind, negative);
            let rec = run_tableau(&enc, &FaultPattern::empty(), &t, 17, 0).unwrap();
            let fin = rec.final_tableau.unwrap();
            let logical = embed(enc.n_lines, &enc.output_lines, &logical_rep(&spec, kind));
            let want = if negative { -1 } else { 1 };
            assert_eq!(fin.expectation(&logical), want, "logical {kind:?} sign");
            for g in &spec.generators {
                assert_eq!(
                    fin.expectation(&embed(enc.n_lines, &enc.output_lines, g)),
                    1,
                    "syndrome must be zero"
                );
            }
        }
    }

    #[test]
    fn decoder_maps_all_six_logical_eigenstates_to_bare_ones() {
        let dec = build_dec_1_0();
        for (kind, negative) in EIGENSTATES {
            let mut t = StabilizerTableau::zero_state(dec.n_lines);
            let (stabs, destabs) = eigenstate_basis(kind, negative);
            install_block(&mut t, &dec.input_lines, &stabs, &destabs);
            let rec = run_tableau(&dec, &FaultPattern::empty(), &t, 23, 0).unwrap();
            let fin = rec.final_tableau.unwrap();
            let out = PauliString::single(dec.n_lines, dec.output_lines[0], kind);
            let want = if negative { -1 } else { 1 };
            assert_eq!(fin.expectation(&out), want, "bare {kind:?} sign");
        }
    }

    #[test]
    fn flipped_bell_outcome_becomes_exactly_a_logical_z() {
        let enc = build_enc_0_1();
        let spec = steane_spec();
        // A fault flipping the X-basis readout of the input qubit makes the
        // correction machinery apply the wrong phase correction; the net
        // effect must be exactly a logical Z with clean syndrome.
        let meas_in = enc
            .locations
            .iter()
            .find(|l| l.kind == LocKind::MeasureZ && l.qubits == vec![enc.input_lines[0]])
            .expect("the input qubit is measured")
            .id;
        let f = FaultPattern::single(meas_in, FaultLabel::One(X));
        let run = propagate(&enc, &f).unwrap();
        let (x, z, s) = block_logical_class(&spec, &run.deviation.restrict(&enc.output_lines));
        assert_eq!((x, z), (0, 1), "wrong frame: not a logical Z");
        assert_eq!(s, 0, "syndrome must stay clean");
    }

    #[test]
    fn interfaces_are_correct_under_zero_noise_at_both_levels() {
        for level in [1, 2] {
            let pair = build_interface(level).unwrap();
            assert!(enc_is_correct(&pair, &FaultPattern::empty()).unwrap(), "enc level {level}");
            assert!(dec_is_correct(&pair, &FaultPattern::empty()).unwrap(), "dec level {level}");
        }
    }

    fn trailing_ec_start(enc: &CircuitDiagram) -> usize {
        enc.locations
            .iter()
            .filter(|l| l.kind == LocKind::CPauliZ)
            .map(|l| l.timestep)
            .max()
            .expect("encoder has correction steps")
            + 1
    }

    #[test]
    fn any_single_fault_inside_the_trailing_ec_is_harmless() {
        let pair = build_interface(1).unwrap();
        let ec_from = trailing_ec_start(&pair.enc_circuit);
        let timestep_of: std::collections::HashMap<usize, usize> = pair
            .enc_circuit
            .locations
            .iter()
            .map(|l| (l.id, l.timestep))
            .collect();
        let mut seen = 0;
        for (f, w) in enumerate_patterns_up_to_weight(&pair.enc_circuit, 1).unwrap() {
            if w == 0 {
                continue;
            }
            let id = f.faulted_ids().next().unwrap();
            if timestep_of[&id] < ec_from {
                continue;
            }
            seen += 1;
            assert!(enc_is_correct(&pair, &f).unwrap(), "single fault at location {id}");
        }
        assert!(seen > 300, "the error-correction round has many slots");
    }

    #[test]
    fn weight_one_failures_exist_and_all_precede_the_trailing_ec() {
        let pair = build_interface(1).unwrap();
        let ec_from = trailing_ec_start(&pair.enc_circuit);
        let timestep_of: std::collections::HashMap<usize, usize> = pair
            .enc_circuit
            .locations
            .iter()
            .map(|l| (l.id, l.timestep))
            .collect();
        let mut failures = 0;
        for (f, w) in enumerate_patterns_up_to_weight(&pair.enc_circuit, 1).unwrap() {
            if w == 1 && !enc_is_correct(&pair, &f).unwrap() {
                failures += 1;
                let id = f.faulted_ids().next().unwrap();
                assert!(
                    timestep_of[&id] < ec_from,
                    "weight-1 failures only come from the unprotected segment"
                );
            }
        }
        assert!(failures > 0, "bare-segment faults must produce a linear term");
    }

    #[test]
    fn a_known_weight_two_pattern_flips_the_logical_qubit() {
        let pair = build_interface(1).unwrap();
        let enc = &pair.enc_circuit;
        // Two X faults on distinct block lines right before the trailing EC:
        // the minimal-weight correction completes them to a logical X.
        let t_corr = enc
            .locations
            .iter()
            .filter(|l| l.kind == LocKind::CPauliZ)
            .map(|l| l.timestep)
            .max()
            .unwrap();
        let spec = steane_spec();
        let sup = logical_x_support(&spec);
        let pick = |k: usize| {
            enc.locations
                .iter()
                .find(|l| {
                    l.timestep == t_corr
                        && l.kind.is_quantum()
                        && l.qubits == vec![enc.output_lines[sup[k]]]
                })
                .expect("block line is busy at the correction step")
                .id
        };
        let mut f = FaultPattern::empty();
        f.assignments.insert(pick(0), FaultLabel::One(X));
        f.assignments.insert(pick(1), FaultLabel::One(X));
        assert!(!enc_is_correct(&pair, &f).unwrap());
        let run = propagate(enc, &f).unwrap();
        let (x, z, _) = block_logical_class(&spec, &run.deviation.restrict(&enc.output_lines));
        assert_eq!((x, z), (1, 0), "the residual must be a logical X");
    }

    #[test]
    fn failure_estimate_is_zero_at_zero_noise() {
        let est = estimate_failure(1, 0.0, 64, 5).unwrap();
        assert_eq!(est.fail_enc, 0);
        assert_eq!(est.fail_dec, 0);
        assert_eq!(est.linear_coeff_enc, 0.0);
    }

    #[test]
    fn monte_carlo_matches_the_exact_low_weight_mass() {
        let p = 2e-4;
        let est = estimate_failure(1, p, 200_000, 11).unwrap();
        for (label, rate, se, exact, c) in [
            ("enc", est.p_fail_enc, est.se_enc, est.exact_enc.unwrap(), &est.loc_count_enc),
            ("dec", est.p_fail_dec, est.se_dec, est.exact_dec.unwrap(), &est.loc_count_dec),
        ] {
            assert!(exact.n1 > 0, "{label}: linear term present");
            assert!(*c > 0);
            let reference = exact.probability_low_weight(p);
            let slack = 3.0 * se + tail_probability_bound(exact.slots as usize, 3, p);
            assert!(
                (rate - reference).abs() <= slack,
                "{label}: MC {rate:.6} vs exact {reference:.6} (slack {slack:.6})"
            );
        }
    }

    #[test]
    fn packed_block_classifier_agrees_with_the_pauli_one() {
        let spec = steane_spec();
        for x in 0u64..128 {
            for z in 0u64..128 {
                let mut p = PauliString::identity(7);
                for q in 0..7 {
                    p.set_kind(q, kind_from_flips((x >> q & 1) as u8, (z >> q & 1) as u8));
                }
                let (fx, fz, _) = block_logical_class(&spec, &p);
                assert_eq!(class7(x, z), (fx, fz), "x={x:07b} z={z:07b}");
            }
        }
    }

    #[test]
    fn superposition_engine_matches_full_propagation() {
        let pair = build_interface(1).unwrap();
        let (enc, dec) = engines_level1().unwrap();
        type Oracle<'a> = Box<dyn Fn(&FaultPattern) -> bool + 'a>;
        let cases: [(&str, &ResponseEngine, Oracle); 2] = [
            ("enc", enc, Box::new(|f| enc_is_correct(&pair, f).unwrap())),
            ("dec", dec, Box::new(|f| dec_is_correct(&pair, f).unwrap())),
        ];
        for (label, eng, oracle) in cases {
            // Weight-1 failing counts against direct enumeration.
            let mut fails = 0u64;
            for (f, w) in enumerate_patterns_up_to_weight(&eng.circuit, 1).unwrap() {
                if w == 1 && !oracle(&f) {
                    fails += 1;
                }
            }
            assert_eq!(eng.exact_coefficients_n1_only(), fails, "{label}: weight-1 count");
            // Stride-sampled weight-2 patterns, all nine kind pairs each,
            // including both slots of a shared two-qubit location.
            let s = eng.slot_count();
            let picks: Vec<usize> = (0..40).map(|k| k * s / 40).collect();
            for (a, &i) in picks.iter().enumerate() {
                for &j in &picks[a + 1..] {
                    for ki in 0..3 {
                        for kj in 0..3 {
                            let f = eng.pattern_for(&[(i, KINDS[ki]), (j, KINDS[kj])]);
                            assert_eq!(
                                eng.is_correct(&f),
                                oracle(&f),
                                "{label}: slots {i},{j} kinds {ki},{kj}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn failure_curve_matches_the_exact_mass_and_flattens_to_slope_one() {
        let (enc, dec) = engines_level1().unwrap();
        let (xe, xd) = exact_level1().unwrap();
        for (label, eng, ex) in [("enc", enc, xe), ("dec", dec, xd)] {
            // The exact series' local log-log slope tends to 1 from above as
            // p -> 0: pure linear behavior in the small-p limit.
            assert!(ex.c1 > 0.0 && ex.c2 > 0.0, "{label}");
            let local_slope = |p: f64| 1.0 + ex.c2 * p / (ex.c1 + ex.c2 * p);
            assert!(local_slope(1e-6) < 1.01, "{label}");
            // Monte-Carlo points at the bottom of the working range agree
            // pointwise with the exactly enumerated weight-<=2 mass, and
            // their joint slope sits near 1 (the quadratic term already
            // contributes ~10% here; it takes over around p = c1/c2).
            let mut pts = Vec::new();
            for (k, trials) in [(14, 600_000u64), (13, 400_000), (12, 300_000)] {
                let p = 2f64.powi(-k);
                let fails = eng.mc_failures(p, trials, 31 + k as u64);
                let rate = fails as f64 / trials as f64;
                let se = (rate * (1.0 - rate) / trials as f64).sqrt();
                let reference = ex.probability_low_weight(p);
                let slack = 3.0 * se + tail_probability_bound(ex.slots as usize, 3, p);
                assert!(
                    (rate - reference).abs() <= slack,
                    "{label} at p=2^-{k}: MC {rate:.6} vs exact {reference:.6}"
                );
                pts.push((p, rate));
            }
            let slope = loglog_slope(&pts);
            assert!((slope - 1.0).abs() < 0.2, "{label}: slope {slope}");
        }
    }

    #[test]
    fn sampled_single_faults_in_the_implemented_segment_are_harmless_at_level_two() {
        // The composed level-2 encoder has a bare level-1 head (whose single
        // faults can and do fail — that is the linear term) followed by the
        // implemented segment, which tolerates any single fault. Sample the
        // latter: its location ids start past the head's.
        let pair1 = build_interface(1).unwrap();
        let shift = pair1.enc_circuit.locations.iter().map(|l| l.id + 1).max().unwrap();
        let pair = build_interface(2).unwrap();
        let ids: Vec<usize> = pair
            .enc_circuit
            .slotted_locations()
            .map(|l| l.id)
            .filter(|&id| id >= shift)
            .collect();
        assert!(ids.len() > 100_000, "implemented segment dominates the circuit");
        for k in 0..8 {
            let id = ids[k * ids.len() / 8];
            let f = FaultPattern::single(id, FaultLabel::One(Y));
            assert!(enc_is_correct(&pair, &f).unwrap(), "single fault at location {id}");
        }
    }

    #[test]
    fn level_two_decoder_survives_an_injected_inner_block_error() {
        let pair = build_interface(2).unwrap();
        let spec = steane_spec();
        let c = &pair.dec_test_circuit;
        // A correctable (weight-1) physical error on one inner block of the
        // incoming level-2 state, on top of a logical Y frame.
        let mut init = embedded_input(&spec, c, 2, Y);
        let touched = c.input_lines[10];
        let was = init.kind_at(touched);
        init.set_kind(
            touched,
            match was {
                I => X,
                X => I,
                Y => Z,
                Z => Y,
            },
        );
        let run = propagate_from(c, &FaultPattern::empty(), init).unwrap();
        assert_eq!(run.deviation.kind_at(c.output_lines[0]), Y);
    }
}
