//! Fault-tolerant implementation of circuits on the concatenated code.
//!
//! `implement_full` replaces every line of a source circuit by a 7-qubit
//! block and every location by its rectangle: a transversal gadget followed
//! by an error-correction round on each surviving output block (both blocks
//! for a CNOT; none after measurements and traces, which instead decode their
//! transversal readout classically). Encoded preparations are verified
//! against a sacrificial block and retried once on reject, so any single
//! internal fault leaves the block within one physical error of the
//! codeword. The returned [`Implementation`] also records the rectangle and
//! extended-rectangle structure used by the goodness criteria.
//!
//! Ancilla blocks are drawn from a shared pool of lines that are revived by
//! each preparation, keeping the implemented circuit within a fixed line
//! budget; error corrections are scheduled in waves of at most [`EC_WAVE`]
//! concurrent blocks while the remaining blocks idle (their wait locations
//! are billed to the rectangle whose block they pad).

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use crate::circuit::{
    sample_fault_pattern, CircuitBuilder, CircuitDiagram, FaultPattern, LocKind, Location,
    NoiseModel,
};
use crate::frame::propagate;
use crate::pauli::{PauliKind, PauliString};
use crate::steane::{
    ec_circuit_level1, embed, emit_ec_round, emit_prep_step, emit_prep_step_guarded, steane_spec,
    CodeSpec, EcBlock, PREP_STEPS,
};
use crate::tableau::{run_tableau, StabilizerTableau};
use crate::FtError;

/// Maximum number of blocks error-corrected concurrently (bounds the ancilla
/// pool at 28·EC_WAVE lines).
pub const EC_WAVE: usize = 5;
/// Maximum number of verified preparations running concurrently (each takes
/// 14 pool lines).
pub const PREP_WAVE: usize = 10;
/// Timesteps of the verified preparation gadget: two prepare-and-verify
/// attempts of PREP_STEPS + 2 steps each, then a three-step swap selecting
/// the backup block when the first verification rejected, then a trace of
/// the backup lines. The backup runs unconditionally so the selection never
/// lets a single fault deposit more than one error on the output block.
pub const PREP_GADGET_STEPS: usize = 2 * (PREP_STEPS + 2) + 4;

/// Ownership zone of an implemented line while emission proceeds.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Zone {
    /// Gadget region of the rectangle (transversal layer, preparation
    /// machinery, and idle padding).
    Gadget(usize),
    /// Trailing error correction of the rectangle on the given source line.
    Ec(usize, usize),
    /// Padding after a finished EC, to be billed to the next rectangle that
    /// claims the source line.
    Pending(usize),
}

/// One rectangle of the implemented circuit.
#[derive(Clone, Debug)]
pub struct Rect {
    /// Location id in the source circuit.
    pub source_loc: usize,
    pub kind: LocKind,
    /// Source lines the location touches.
    pub lines: Vec<usize>,
    /// Slotted location ids of the error corrections feeding this rectangle
    /// (the trailing ECs of the upstream rectangles; empty for preparations).
    pub leading_ec: Vec<usize>,
    /// Slotted location ids of the gadget region.
    pub gadget: Vec<usize>,
    /// Trailing error correction per source line: (line, slotted ids).
    pub trailing_ec: Vec<(usize, Vec<usize>)>,
}

impl Rect {
    fn trailing_entry(&mut self, line: usize) -> &mut Vec<usize> {
        let idx = self
            .trailing_ec
            .iter()
            .position(|(q, _)| *q == line)
            .expect("trailing EC entry not created");
        &mut self.trailing_ec[idx].1
    }
}

/// An implemented circuit with its rectangle structure.
pub struct Implementation {
    pub circuit: CircuitDiagram,
    pub source: CircuitDiagram,
    pub rects: Vec<Rect>,
    /// Source location id → rectangle index.
    pub rect_of_source: HashMap<usize, usize>,
    /// Source line → the 7 implemented lines of its block.
    pub blocks: Vec<[usize; 7]>,
    /// Source classical bit → implemented classical bit.
    pub cbit_map: Vec<Option<usize>>,
}

impl Implementation {
    /// Slotted location ids of the extended rectangle of `rect`: leading
    /// ECs, gadget, and trailing ECs.
    pub fn exrec_ids(&self, rect: usize) -> Vec<usize> {
        let r = &self.rects[rect];
        let mut ids = r.leading_ec.clone();
        ids.extend_from_slice(&r.gadget);
        for (_, ec) in &r.trailing_ec {
            ids.extend_from_slice(ec);
        }
        ids
    }

    /// (#one-slot, #two-slot) locations in the extended rectangle.
    pub fn exrec_profile(&self, rect: usize) -> (usize, usize) {
        let mut m1 = 0;
        let mut m2 = 0;
        for id in self.exrec_ids(rect) {
            match self.circuit.location(id).kind.slots() {
                1 => m1 += 1,
                2 => m2 += 1,
                _ => unreachable!("exrec member without slots"),
            }
        }
        (m1, m2)
    }
}

fn block_of(line: usize) -> [usize; 7] {
    std::array::from_fn(|i| 7 * line + i)
}

/// Attribute freshly emitted slotted locations to rectangle zones.
fn attribute(
    b: &CircuitBuilder,
    cursor: &mut usize,
    owner: &[Option<Zone>],
    rects: &mut [Rect],
    pending: &mut [Vec<usize>],
) {
    for l in &b.emitted()[*cursor..] {
        if l.kind.slots() == 0 {
            continue;
        }
        let q = l.qubits[0];
        match owner[q].unwrap_or_else(|| panic!("unowned line {q} at location {}", l.id)) {
            Zone::Gadget(r) => rects[r].gadget.push(l.id),
            Zone::Ec(r, line) => rects[r].trailing_entry(line).push(l.id),
            Zone::Pending(line) => pending[line].push(l.id),
        }
    }
    *cursor = b.emitted().len();
}

struct PrepInst {
    /// Output block lines.
    lines: [usize; 7],
    /// First verifier; remeasured lines are revived as the backup block.
    pa: Vec<usize>,
    /// Second verifier (checks the backup block).
    pb: Vec<usize>,
    y1: Vec<usize>,
    acc1: usize,
    y2: Vec<usize>,
    acc2: usize,
    guards: Vec<(usize, bool)>,
}

/// Emit one substep (0..PREP_GADGET_STEPS) of the verified preparation of an
/// encoded |0̄⟩ on `inst.lines`. Attempt 1 prepares the block and verifies it
/// against `pa`; a backup block is then always prepared on the freed `pa`
/// lines and verified against `pb`; finally a transversal swap guarded on
/// the first verification rejecting selects the backup. Faults on the
/// guarded swap touch at most one output line each, so any single internal
/// fault leaves the accepted output within one physical error of the
/// codeword (or a state-trivial logical Z).
fn emit_prep_substep(b: &mut CircuitBuilder, inst: &PrepInst, u: usize) {
    let swap_guards: Vec<(usize, bool)> = inst
        .guards
        .iter()
        .copied()
        .chain(std::iter::once((inst.acc1, false)))
        .collect();
    match u {
        0..=4 => {
            emit_prep_step_guarded(b, &inst.lines, false, u, &inst.guards);
            emit_prep_step(b, &inst.pa, false, u);
        }
        5 => {
            for i in 0..7 {
                b.cnot_guarded(inst.lines[i], inst.pa[i], inst.guards.clone());
            }
        }
        6 => {
            for i in 0..7 {
                b.measure(inst.pa[i], inst.y1[i]);
            }
            b.classical(LocKind::Accept, inst.y1.clone(), Some(inst.acc1), vec![], vec![]);
        }
        7..=11 => {
            emit_prep_step(b, &inst.pa, false, u - 7);
            emit_prep_step(b, &inst.pb, false, u - 7);
        }
        12 => {
            for i in 0..7 {
                b.cnot(inst.pa[i], inst.pb[i]);
            }
        }
        13 => {
            for i in 0..7 {
                b.measure(inst.pb[i], inst.y2[i]);
            }
            b.classical(LocKind::Accept, inst.y2.clone(), Some(inst.acc2), vec![], vec![]);
        }
        14 | 16 => {
            for i in 0..7 {
                b.cnot_guarded(inst.lines[i], inst.pa[i], swap_guards.clone());
            }
        }
        15 => {
            for i in 0..7 {
                b.cnot_guarded(inst.pa[i], inst.lines[i], swap_guards.clone());
            }
        }
        17 => {
            for i in 0..7 {
                b.trace_out(inst.pa[i]);
            }
        }
        _ => unreachable!(),
    }
}

/// Implement `src` one concatenation level up (Def-3 rectangles) and return
/// the circuit together with its rectangle structure.
pub fn implement_full(src: &CircuitDiagram) -> Result<Implementation, FtError> {
    if src.ideal {
        return Err(FtError::Invalid("cannot implement an ideal circuit".into()));
    }
    if let Some(l) = src.locations.iter().find(|l| l.kind == LocKind::TGate) {
        return Err(FtError::TGate(format!("location {}", l.id)));
    }
    let nb = src.n_lines;
    let mut by_step: Vec<Vec<&Location>> = vec![Vec::new(); src.depth];
    for l in &src.locations {
        by_step[l.timestep].push(l);
    }

    // Pool sized for the widest concurrent lease demand.
    let mut pool_size = 0usize;
    for step in &by_step {
        let preps = step.iter().filter(|l| l.kind == LocKind::PrepareZ).count();
        let ec_blocks: usize = step
            .iter()
            .filter(|l| l.kind.is_quantum() && !l.kind.consumes_line())
            .map(|l| l.qubits.len())
            .sum();
        pool_size = pool_size
            .max(14 * preps.min(PREP_WAVE))
            .max(28 * ec_blocks.min(EC_WAVE));
    }
    let pool_base = 7 * nb;
    let n_lines = pool_base + pool_size;

    let input_lines: Vec<usize> = src
        .input_lines
        .iter()
        .flat_map(|&s| block_of(s))
        .collect();
    let n_class_in = src.classical_in.len();
    let mut b = CircuitBuilder::new(n_lines, n_class_in, input_lines)
        .with_classical_in((0..n_class_in).collect());

    let mut cbit_map: Vec<Option<usize>> = vec![None; src.n_cbits];
    for (i, &sb) in src.classical_in.iter().enumerate() {
        cbit_map[sb] = Some(i);
    }
    let map_bits = |cbit_map: &[Option<usize>], bits: &[usize]| -> Vec<usize> {
        bits.iter()
            .map(|&x| cbit_map[x].expect("read of unmapped source bit"))
            .collect()
    };
    let map_guards = |cbit_map: &[Option<usize>], g: &[(usize, bool)]| -> Vec<(usize, bool)> {
        g.iter()
            .map(|&(x, w)| (cbit_map[x].expect("guard on unmapped source bit"), w))
            .collect()
    };

    let mut owner: Vec<Option<Zone>> = vec![None; n_lines];
    let mut pending: Vec<Vec<usize>> = vec![Vec::new(); nb];
    let mut last_ec: Vec<Vec<usize>> = vec![Vec::new(); nb];
    let mut free_pool: Vec<usize> = (pool_base..n_lines).rev().collect();
    let mut rects: Vec<Rect> = Vec::new();
    let mut rect_of_source: HashMap<usize, usize> = HashMap::new();
    let mut cursor = 0usize;

    for t in 0..src.depth {
        let locs = &by_step[t];
        if locs.is_empty() {
            continue;
        }

        // Create the stage's rectangles and claim lines.
        let mut preps: Vec<(usize, usize, Vec<(usize, bool)>)> = Vec::new();
        let mut ec_needed: Vec<(usize, usize)> = Vec::new();
        for l in locs.iter() {
            let r = rects.len();
            let leading = if l.kind.is_quantum() && l.kind != LocKind::PrepareZ {
                l.qubits
                    .iter()
                    .flat_map(|&q| last_ec[q].iter().copied())
                    .collect()
            } else {
                Vec::new()
            };
            let mut rect = Rect {
                source_loc: l.id,
                kind: l.kind,
                lines: l.qubits.clone(),
                leading_ec: leading,
                gadget: Vec::new(),
                trailing_ec: Vec::new(),
            };
            if l.kind.is_quantum() {
                if l.kind.consumes_line() {
                    assert!(l.guards.is_empty(), "guarded consuming locations unsupported");
                }
                for &q in &l.qubits {
                    rect.gadget.append(&mut pending[q]);
                    for line in block_of(q) {
                        owner[line] = Some(Zone::Gadget(r));
                    }
                }
                if l.kind == LocKind::PrepareZ {
                    preps.push((r, l.qubits[0], map_guards(&cbit_map, &l.guards)));
                }
                if !l.kind.consumes_line() {
                    for &q in &l.qubits {
                        ec_needed.push((r, q));
                    }
                }
            }
            rects.push(rect);
            rect_of_source.insert(l.id, r);
        }

        // Phase A: gadgets. Preparations run in waves of PREP_WAVE; all
        // other gadgets take the first substep.
        let n_prep_waves = preps.len().div_ceil(PREP_WAVE).max(0);
        let stage_len = if preps.is_empty() {
            1
        } else {
            PREP_GADGET_STEPS * n_prep_waves
        };
        let prep_chunks: Vec<&[(usize, usize, Vec<(usize, bool)>)]> =
            preps.chunks(PREP_WAVE).collect();
        let mut live_wave: Vec<PrepInst> = Vec::new();

        for s in 0..stage_len {
            let w = s / PREP_GADGET_STEPS;
            let u = s % PREP_GADGET_STEPS;
            if u == 0 && w < prep_chunks.len() {
                // Lease pool lines and classical bits for this wave only.
                for (r, q, guards) in prep_chunks[w] {
                    let pa: Vec<usize> = (0..7)
                        .map(|_| free_pool.pop().expect("ancilla pool exhausted"))
                        .collect();
                    let pb: Vec<usize> = (0..7)
                        .map(|_| free_pool.pop().expect("ancilla pool exhausted"))
                        .collect();
                    let y1 = b.add_cbits(7);
                    let y2 = b.add_cbits(7);
                    let accs = b.add_cbits(2);
                    for &v in pa.iter().chain(&pb) {
                        owner[v] = Some(Zone::Gadget(*r));
                    }
                    live_wave.push(PrepInst {
                        lines: block_of(*q),
                        pa,
                        pb,
                        y1,
                        acc1: accs[0],
                        y2,
                        acc2: accs[1],
                        guards: guards.clone(),
                    });
                }
            }
            if s == 0 {
                for l in locs.iter() {
                    let mapped_guards = map_guards(&cbit_map, &l.guards);
                    match l.kind {
                        LocKind::PauliX
                        | LocKind::PauliY
                        | LocKind::PauliZ
                        | LocKind::Hadamard
                        | LocKind::Wait => {
                            for line in block_of(l.qubits[0]) {
                                b.gate_guarded(l.kind, line, mapped_guards.clone());
                            }
                        }
                        LocKind::Trace => {
                            for line in block_of(l.qubits[0]) {
                                b.trace_out(line);
                            }
                        }
                        LocKind::Cnot => {
                            let bc = block_of(l.qubits[0]);
                            let bt = block_of(l.qubits[1]);
                            for i in 0..7 {
                                b.cnot_guarded(bc[i], bt[i], mapped_guards.clone());
                            }
                        }
                        LocKind::MeasureZ => {
                            let phys = b.add_cbits(7);
                            for (i, line) in block_of(l.qubits[0]).into_iter().enumerate() {
                                b.measure(line, phys[i]);
                            }
                            let out = b.add_cbits(1)[0];
                            cbit_map[l.cbit_out.unwrap()] = Some(out);
                            b.classical(LocKind::DecodeL, phys, Some(out), vec![], vec![]);
                        }
                        LocKind::CPauliX | LocKind::CPauliZ => {
                            assert!(l.guards.is_empty(), "guarded CPauli unsupported");
                            let bit = cbit_map[l.cbits_in[0]].expect("unmapped control bit");
                            for line in block_of(l.qubits[0]) {
                                b.cpauli(l.kind, bit, line);
                            }
                        }
                        LocKind::CorrX | LocKind::CorrZ => {
                            let bits = map_bits(&cbit_map, &l.cbits_in);
                            for rep in [2usize, 4, 5] {
                                let targets: Vec<usize> =
                                    l.qubits.iter().map(|&q| block_of(q)[rep]).collect();
                                b.classical(
                                    l.kind,
                                    bits.clone(),
                                    None,
                                    targets,
                                    mapped_guards.clone(),
                                );
                            }
                        }
                        LocKind::Accept | LocKind::DecodeL => {
                            let bits = map_bits(&cbit_map, &l.cbits_in);
                            let out = b.add_cbits(1)[0];
                            cbit_map[l.cbit_out.unwrap()] = Some(out);
                            b.classical(l.kind, bits, Some(out), vec![], mapped_guards);
                        }
                        LocKind::PrepareZ => {} // handled by the wave machinery
                        LocKind::TGate => unreachable!(),
                    }
                }
            }
            for inst in &live_wave {
                emit_prep_substep(&mut b, inst, u);
            }
            b.end_timestep();
            if u == PREP_GADGET_STEPS - 1 && !live_wave.is_empty() {
                attribute(&b, &mut cursor, &owner, &mut rects, &mut pending);
                for inst in live_wave.drain(..) {
                    for v in inst.pa.into_iter().chain(inst.pb) {
                        owner[v] = None;
                        free_pool.push(v);
                    }
                }
            }
        }
        attribute(&b, &mut cursor, &owner, &mut rects, &mut pending);

        // Phase B: trailing error corrections in waves.
        for wave in ec_needed.chunks(EC_WAVE) {
            let mut ec_blocks = Vec::new();
            for &(r, q) in wave {
                let anc: [usize; 28] =
                    std::array::from_fn(|_| free_pool.pop().expect("ancilla pool exhausted"));
                for &a in &anc {
                    owner[a] = Some(Zone::Ec(r, q));
                }
                for line in block_of(q) {
                    owner[line] = Some(Zone::Ec(r, q));
                }
                rects[r].trailing_ec.push((q, Vec::new()));
                ec_blocks.push((r, q, anc));
            }
            let blocks: Vec<EcBlock> = ec_blocks
                .iter()
                .map(|&(_, q, anc)| EcBlock {
                    data: block_of(q),
                    anc,
                })
                .collect();
            emit_ec_round(&mut b, &blocks);
            attribute(&b, &mut cursor, &owner, &mut rects, &mut pending);
            for (r, q, anc) in ec_blocks {
                last_ec[q] = rects[r].trailing_entry(q).clone();
                for a in anc {
                    owner[a] = None;
                    free_pool.push(a);
                }
                for line in block_of(q) {
                    owner[line] = Some(Zone::Pending(q));
                }
            }
        }
    }

    let output_lines: Vec<usize> = src
        .output_lines
        .iter()
        .flat_map(|&s| block_of(s))
        .collect();
    let classical_out: Vec<usize> = src
        .classical_out
        .iter()
        .map(|&x| cbit_map[x].expect("unmapped output bit"))
        .collect();
    let circuit = b.finish(output_lines, classical_out);
    Ok(Implementation {
        circuit,
        source: src.clone(),
        rects,
        rect_of_source,
        blocks: (0..nb).map(block_of).collect(),
        cbit_map,
    })
}

/// Def-3 implementation at the given level (1 or 2).
pub fn implement(c: &CircuitDiagram, level: usize) -> Result<CircuitDiagram, FtError> {
    match level {
        1 => Ok(implement_full(c)?.circuit),
        2 => {
            let inner = implement_full(c)?;
            Ok(implement_full(&inner.circuit)?.circuit)
        }
        _ => Err(FtError::Invalid(format!("unsupported level {level}"))),
    }
}

/// Error-correction circuit at the given level: one Steane round at level 1,
/// its implementation at level 2.
pub fn ec_circuit(level: usize) -> Result<CircuitDiagram, FtError> {
    match level {
        1 => Ok(ec_circuit_level1()),
        2 => implement(&ec_circuit_level1(), 1),
        _ => Err(FtError::Invalid(format!("unsupported level {level}"))),
    }
}

/// Number of locations carrying fault slots.
pub fn slotted_location_count(c: &CircuitDiagram) -> usize {
    c.slotted_locations().count()
}

// ---------------------------------------------------------------------------
// Logical embedding and zero-noise equivalence
// ---------------------------------------------------------------------------

/// Embed a source-level Pauli as its logical representative on the blocks.
pub fn logical_embedding(impl_: &Implementation, p_src: &PauliString) -> PauliString {
    let spec = steane_spec();
    let n = impl_.circuit.n_lines;
    let mut out = PauliString::identity(n);
    out.set_phase_exponent(p_src.phase_exponent());
    for q in 0..p_src.n() {
        let rep = match p_src.kind_at(q) {
            PauliKind::I => continue,
            PauliKind::X => spec.logical_x_rep.clone(),
            PauliKind::Z => spec.logical_z_rep.clone(),
            PauliKind::Y => {
                let mut t = spec.logical_x_rep.mul(&spec.logical_z_rep);
                t.mul_phase(1);
                t
            }
        };
        out = out.mul(&embed(n, &impl_.blocks[q], &rep));
    }
    out
}

/// Encode a source-level stabilizer state: each source line's block carries
/// the logical image of the source rows plus the six code generators.
pub fn encode_tableau(impl_: &Implementation, tsrc: &StabilizerTableau) -> StabilizerTableau {
    assert_eq!(tsrc.n, impl_.source.n_lines);
    let spec = steane_spec();
    let n = impl_.circuit.n_lines;
    let mut t = StabilizerTableau::zero_state(n);
    for q in 0..tsrc.n {
        let lines = impl_.blocks[q];
        t.rows[lines[0]] = logical_embedding(impl_, &tsrc.rows[q]);
        t.rows[n + lines[0]] = logical_embedding(impl_, &tsrc.rows[tsrc.n + q]);
        for j in 1..7 {
            t.rows[lines[j]] = embed(n, &lines, &spec.destabilizers[j - 1]);
            t.rows[n + lines[j]] = embed(n, &lines, &spec.generators[j - 1]);
        }
    }
    debug_assert!(t.is_valid());
    t
}

/// Zero-noise Def-3 identity on a stabilizer input, for measurement-free
/// sources: the implemented circuit must reproduce every stabilizer of the
/// source's final state (logically embedded) and leave every block with
/// clean syndrome.
pub fn zero_noise_equivalent(
    impl_: &Implementation,
    tsrc: &StabilizerTableau,
    seed: u64,
) -> bool {
    assert!(
        impl_
            .source
            .locations
            .iter()
            .all(|l| !matches!(l.kind, LocKind::MeasureZ | LocKind::Trace)),
        "zero-noise state comparison needs a measurement-free source"
    );
    let t0 = encode_tableau(impl_, tsrc);
    let rec = run_tableau(&impl_.circuit, &FaultPattern::empty(), &t0, seed, 0)
        .expect("implemented run failed");
    let timpl = rec.final_tableau.expect("tableau missing");
    let rec_src = run_tableau(
        &impl_.source,
        &FaultPattern::empty(),
        tsrc,
        seed.wrapping_add(1),
        0,
    )
    .expect("source run failed");
    let tsrc_f = rec_src.final_tableau.expect("tableau missing");
    let n_src = impl_.source.n_lines;
    for q in 0..n_src {
        let row = &tsrc_f.rows[n_src + q];
        if timpl.expectation(&logical_embedding(impl_, row)) != 1 {
            return false;
        }
    }
    let spec = steane_spec();
    for q in 0..n_src {
        for g in &spec.generators {
            if timpl.expectation(&embed(impl_.circuit.n_lines, &impl_.blocks[q], g)) != 1 {
                return false;
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Residual logical classification and Lemma-6 transformation check
// ---------------------------------------------------------------------------

/// Logical action of a residual 7-qubit block Pauli: (x_flip, z_flip,
/// syndrome). The deviation is reduced by the weight-minimal corrector of
/// its syndrome — the same policy the error corrections apply — before
/// reading the logical commutations, so any weight-1 residual classifies as
/// trivial. (The multiplicative destabilizer family used to label decoder
/// output basis states is intentionally not used here: no multiplicative
/// family agrees with minimal-weight correction on every single-qubit
/// error, because correctors at Hamming positions i⊕j=k differ from the
/// position-k corrector by a weight-3, hence logical, codeword.)
pub fn block_logical_class(spec: &CodeSpec, r: &PauliString) -> (u8, u8, u8) {
    let s = spec.syndrome_of(r);
    let reduced = r.mul(&spec.minimal_correction(s));
    let x_flip = u8::from(!reduced.commutes(&spec.logical_z_rep));
    let z_flip = u8::from(!reduced.commutes(&spec.logical_x_rep));
    (x_flip, z_flip, s)
}

/// Reference for the state-level part of the transformation check: the
/// source circuit run noiselessly on one half of maximally entangled input
/// pairs (the Choi state). A residual logical Pauli on the output blocks is
/// harmless exactly when it fixes this state up to sign, which makes the
/// check valid for every input simultaneously (a logical Z on a freshly
/// prepared |0̄⟩ passes; on a wire it does not).
pub struct SourceReference {
    tableau: StabilizerTableau,
}

pub fn source_reference(src: &CircuitDiagram) -> SourceReference {
    let n = src.n_lines;
    let n_ref = src.input_lines.len();
    let mut widened = src.clone();
    widened.n_lines = n + n_ref;
    let mut t = StabilizerTableau::zero_state(n + n_ref);
    for (k, &i) in src.input_lines.iter().enumerate() {
        let r = n + k;
        let mut xx = PauliString::identity(n + n_ref);
        xx.set_kind(i, PauliKind::X);
        xx.set_kind(r, PauliKind::X);
        let mut zz = PauliString::identity(n + n_ref);
        zz.set_kind(i, PauliKind::Z);
        zz.set_kind(r, PauliKind::Z);
        t.rows[n + n_ref + i] = xx;
        t.rows[i] = PauliString::single(n + n_ref, i, PauliKind::Z);
        t.rows[n + n_ref + r] = zz;
        t.rows[r] = PauliString::single(n + n_ref, r, PauliKind::X);
    }
    debug_assert!(t.is_valid());
    let rec = run_tableau(&widened, &FaultPattern::empty(), &t, 0x5eed, 0)
        .expect("source reference run failed");
    SourceReference {
        tableau: rec.final_tableau.expect("tableau missing"),
    }
}

/// Lemma-6 operational check against a precomputed reference: the faulty
/// implemented run must reproduce the source circuit's classical outputs
/// exactly, and the residual logical action on the output blocks must fix
/// the source's Choi state (syndromes are unconstrained).
pub fn verify_transformation_with(
    impl_: &Implementation,
    sref: &SourceReference,
    f: &FaultPattern,
) -> Result<bool, FtError> {
    let run = propagate(&impl_.circuit, f)?;
    for &sb in &impl_.source.classical_out {
        let ib = impl_.cbit_map[sb].expect("unmapped output bit");
        if run.cbit_delta[ib] != 0 {
            return Ok(false);
        }
    }
    let spec = steane_spec();
    let n_tot = sref.tableau.n;
    let mut residual = PauliString::identity(n_tot);
    let mut trivial = true;
    for &s in &impl_.source.output_lines {
        let r = run.deviation.restrict(&impl_.blocks[s]);
        let (x, z, _) = block_logical_class(&spec, &r);
        match (x, z) {
            (0, 0) => {}
            (1, 0) => {
                residual.set_kind(s, PauliKind::X);
                trivial = false;
            }
            (0, 1) => {
                residual.set_kind(s, PauliKind::Z);
                trivial = false;
            }
            (1, 1) => {
                residual.set_kind(s, PauliKind::Y);
                trivial = false;
            }
            _ => unreachable!(),
        }
    }
    if trivial {
        return Ok(true);
    }
    Ok(sref.tableau.expectation(&residual) != 0)
}

/// As [`verify_transformation_with`], computing the reference on the fly.
pub fn verify_transformation(impl_: &Implementation, f: &FaultPattern) -> Result<bool, FtError> {
    verify_transformation_with(impl_, &source_reference(&impl_.source), f)
}

// ---------------------------------------------------------------------------
// Extended-rectangle goodness
// ---------------------------------------------------------------------------

/// Inverse index: slotted location id → extended rectangles containing it.
pub struct ExRecIndex {
    pub member_of: HashMap<usize, Vec<u32>>,
    pub n_rects: usize,
}

pub fn exrec_index(impl_: &Implementation) -> ExRecIndex {
    let mut member_of: HashMap<usize, Vec<u32>> = HashMap::new();
    for r in 0..impl_.rects.len() {
        for id in impl_.exrec_ids(r) {
            member_of.entry(id).or_default().push(r as u32);
        }
    }
    ExRecIndex {
        member_of,
        n_rects: impl_.rects.len(),
    }
}

/// Faulty-location tallies per extended rectangle.
pub fn faulty_counts(idx: &ExRecIndex, f: &FaultPattern) -> HashMap<u32, u32> {
    let mut counts: HashMap<u32, u32> = HashMap::new();
    for id in f.faulted_ids() {
        if let Some(rs) = idx.member_of.get(&id) {
            for &r in rs {
                *counts.entry(r).or_insert(0) += 1;
            }
        }
    }
    counts
}

/// Level-1 goodness of one extended rectangle: at most one faulty location.
pub fn exrec_good_level1(impl_: &Implementation, rect: usize, f: &FaultPattern) -> bool {
    let ids: HashSet<usize> = impl_.exrec_ids(rect).into_iter().collect();
    f.faulted_ids().filter(|id| ids.contains(id)).count() <= 1
}

/// True iff every level-1 extended rectangle is good under `f`.
pub fn all_exrecs_good_level1(idx: &ExRecIndex, f: &FaultPattern) -> bool {
    faulty_counts(idx, f).values().all(|&c| c <= 1)
}

/// Exact probability that an extended rectangle with `m1` one-slot and `m2`
/// two-slot locations has at least two faulty locations under i.i.d. slot
/// noise of strength p.
pub fn exrec_bad_probability(m1: usize, m2: usize, p: f64) -> f64 {
    let slots = (m1 + 2 * m2) as i32;
    let p_good = (1.0 - p).powi(slots)
        + m1 as f64 * p * (1.0 - p).powi(slots - 1)
        + m2 as f64 * (2.0 * p - p * p) * (1.0 - p).powi(slots - 2);
    (1.0 - p_good).max(0.0)
}

/// Two-level implementation: `outer` implements `inner.circuit`, so the
/// level-2 extended rectangle of a source location consists of the level-1
/// extended rectangles of its inner locations.
pub struct TwoLevel {
    pub inner: Implementation,
    pub outer: Implementation,
}

pub fn implement_two_levels(src: &CircuitDiagram) -> Result<TwoLevel, FtError> {
    let inner = implement_full(src)?;
    let outer = implement_full(&inner.circuit)?;
    Ok(TwoLevel { inner, outer })
}

/// Level-2 goodness: at most one bad sub-exrec (a sub-exrec is the level-1
/// extended rectangle, in the outer implementation, of an inner location in
/// the inner extended rectangle).
pub fn exrec_good_level2(
    tl: &TwoLevel,
    rect: usize,
    outer_idx: &ExRecIndex,
    f: &FaultPattern,
) -> bool {
    let counts = faulty_counts(outer_idx, f);
    let bad_inner: HashSet<usize> = counts
        .iter()
        .filter(|&(_, &c)| c >= 2)
        .map(|(&r, _)| tl.outer.rects[r as usize].source_loc)
        .collect();
    if bad_inner.is_empty() {
        return true;
    }
    tl.inner
        .exrec_ids(rect)
        .iter()
        .filter(|j| bad_inner.contains(j))
        .count()
        <= 1
}

/// Monte-Carlo frequency of level-1 badness for one extended rectangle.
pub fn mc_exrec_bad_level1(
    impl_: &Implementation,
    rect: usize,
    p: f64,
    trials: u64,
    seed: u64,
) -> f64 {
    let ids: HashSet<usize> = impl_.exrec_ids(rect).into_iter().collect();
    let nm = NoiseModel::new(p);
    let bad: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let f = sample_fault_pattern(&impl_.circuit, &nm, seed, trial);
            let hits = f.faulted_ids().filter(|id| ids.contains(id)).count();
            u64::from(hits >= 2)
        })
        .sum();
    bad as f64 / trials as f64
}

/// Monte-Carlo frequency of level-2 badness for one inner extended
/// rectangle.
pub fn mc_exrec_bad_level2(
    tl: &TwoLevel,
    rect: usize,
    outer_idx: &ExRecIndex,
    p: f64,
    trials: u64,
    seed: u64,
) -> f64 {
    let nm = NoiseModel::new(p);
    let members: HashSet<usize> = tl.inner.exrec_ids(rect).into_iter().collect();
    let bad: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let f = sample_fault_pattern(&tl.outer.circuit, &nm, seed, trial);
            let counts = faulty_counts(outer_idx, &f);
            let bad_subs = counts
                .iter()
                .filter(|&(_, &c)| c >= 2)
                .filter(|&(&r, _)| members.contains(&tl.outer.rects[r as usize].source_loc))
                .count();
            u64::from(bad_subs >= 2)
        })
        .sum();
    bad as f64 / trials as f64
}

/// Threshold fit: the largest p₀ with P_l(p) ≤ p₀ (p/p₀)^{2^l} across the
/// grid for levels 1 and 2.
pub fn fit_p0(grid: &[f64], p1: &[f64], p2: &[f64]) -> f64 {
    let mut a = f64::INFINITY;
    for (&p, &q) in grid.iter().zip(p1) {
        if q > 0.0 {
            a = a.min(p * p / q);
        }
    }
    let mut b3 = f64::INFINITY;
    for (&p, &q) in grid.iter().zip(p2) {
        if q > 0.0 {
            b3 = b3.min(p.powi(4) / q);
        }
    }
    a.min(b3.cbrt())
}

// ---------------------------------------------------------------------------
// Gadget library
// ---------------------------------------------------------------------------

/// The bare gadget circuits (rectangles minus the trailing EC) plus the EC
/// round itself, exported for inspection and serialization.
pub struct GadgetSet {
    pub gadgets: Vec<(LocKind, CircuitDiagram)>,
    pub ec: CircuitDiagram,
}

pub fn gadget_set() -> GadgetSet {
    let mut gadgets = Vec::new();
    for kind in [
        LocKind::PauliX,
        LocKind::PauliY,
        LocKind::PauliZ,
        LocKind::Hadamard,
        LocKind::Wait,
    ] {
        let mut b = CircuitBuilder::new(7, 0, (0..7).collect());
        for q in 0..7 {
            b.gate(kind, q);
        }
        gadgets.push((kind, b.finish((0..7).collect(), vec![])));
    }
    {
        let mut b = CircuitBuilder::new(14, 0, (0..14).collect());
        for i in 0..7 {
            b.cnot(i, 7 + i);
        }
        gadgets.push((LocKind::Cnot, b.finish((0..14).collect(), vec![])));
    }
    {
        let mut b = CircuitBuilder::new(7, 8, (0..7).collect());
        for q in 0..7 {
            b.measure(q, q);
        }
        b.classical(LocKind::DecodeL, (0..7).collect(), Some(7), vec![], vec![]);
        gadgets.push((LocKind::MeasureZ, b.finish(vec![], vec![7])));
    }
    {
        let mut b = CircuitBuilder::new(7, 0, (0..7).collect());
        for q in 0..7 {
            b.trace_out(q);
        }
        gadgets.push((LocKind::Trace, b.finish(vec![], vec![])));
    }
    {
        let mut b = CircuitBuilder::new(21, 16, vec![]);
        let inst = PrepInst {
            lines: std::array::from_fn(|i| i),
            pa: (7..14).collect(),
            pb: (14..21).collect(),
            y1: (0..7).collect(),
            acc1: 14,
            y2: (7..14).collect(),
            acc2: 15,
            guards: vec![],
        };
        for u in 0..PREP_GADGET_STEPS {
            emit_prep_substep(&mut b, &inst, u);
            b.end_timestep();
        }
        gadgets.push((LocKind::PrepareZ, b.finish((0..7).collect(), vec![])));
    }
    for kind in [LocKind::CPauliX, LocKind::CPauliZ] {
        let mut b = CircuitBuilder::new(7, 1, (0..7).collect()).with_classical_in(vec![0]);
        for q in 0..7 {
            b.cpauli(kind, 0, q);
        }
        gadgets.push((kind, b.finish((0..7).collect(), vec![])));
    }
    GadgetSet {
        gadgets,
        ec: ec_circuit_level1(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::FaultLabel;
    use crate::steane::codeword_basis;
    use crate::steane::install_block;

    fn single_op_source(kind: LocKind) -> CircuitDiagram {
        match kind {
            LocKind::Cnot => {
                let mut b = CircuitBuilder::new(2, 0, vec![0, 1]);
                b.cnot(0, 1);
                b.finish(vec![0, 1], vec![])
            }
            LocKind::MeasureZ => {
                let mut b = CircuitBuilder::new(1, 1, vec![0]);
                b.measure(0, 0);
                b.finish(vec![], vec![0])
            }
            LocKind::PrepareZ => {
                let mut b = CircuitBuilder::new(1, 0, vec![]);
                b.prep(0);
                b.finish(vec![0], vec![])
            }
            _ => {
                let mut b = CircuitBuilder::new(1, 0, vec![0]);
                b.gate(kind, 0);
                b.finish(vec![0], vec![])
            }
        }
    }

    #[test]
    fn implemented_gates_are_zero_noise_identities() {
        for kind in [LocKind::Wait, LocKind::Hadamard, LocKind::PauliX] {
            let src = single_op_source(kind);
            let impl_ = implement_full(&src).unwrap();
            impl_.circuit.validate();
            // Six Pauli eigenstates of the source line.
            for (stab, neg) in [
                (PauliKind::Z, false),
                (PauliKind::Z, true),
                (PauliKind::X, false),
                (PauliKind::X, true),
                (PauliKind::Y, false),
                (PauliKind::Y, true),
            ] {
                let mut tsrc = StabilizerTableau::zero_state(1);
                tsrc.set_line_state(0, stab, neg);
                assert!(
                    zero_noise_equivalent(&impl_, &tsrc, 7),
                    "{kind:?} on {stab:?}/{neg}"
                );
            }
        }
    }

    #[test]
    fn implemented_cnot_matches_source_on_entangled_inputs() {
        let src = single_op_source(LocKind::Cnot);
        let impl_ = implement_full(&src).unwrap();
        for (s0, n0, s1, n1) in [
            (PauliKind::Z, false, PauliKind::Z, true),
            (PauliKind::X, false, PauliKind::Z, false),
            (PauliKind::Z, true, PauliKind::X, true),
            (PauliKind::Y, false, PauliKind::Y, false),
        ] {
            let mut tsrc = StabilizerTableau::zero_state(2);
            tsrc.set_line_state(0, s0, n0);
            tsrc.set_line_state(1, s1, n1);
            assert!(zero_noise_equivalent(&impl_, &tsrc, 11));
        }
    }

    #[test]
    fn implemented_five_gate_circuit_is_zero_noise_identity() {
        let mut b = CircuitBuilder::new(2, 0, vec![0, 1]);
        b.h(0);
        b.end_timestep();
        b.cnot(0, 1);
        b.end_timestep();
        b.gate(LocKind::PauliZ, 0);
        b.gate(LocKind::PauliX, 1);
        b.end_timestep();
        b.cnot(1, 0);
        b.end_timestep();
        let src = b.finish(vec![0, 1], vec![]);
        let impl_ = implement_full(&src).unwrap();
        for seed in [3u64, 5] {
            let mut tsrc = StabilizerTableau::zero_state(2);
            tsrc.set_line_state(0, PauliKind::Z, seed == 5);
            assert!(zero_noise_equivalent(&impl_, &tsrc, seed));
        }
    }

    #[test]
    fn implemented_measurement_decodes_logical_readout() {
        // prep → X → measure: nominal outcome 1.
        let mut b = CircuitBuilder::new(1, 1, vec![]);
        b.prep(0);
        b.end_timestep();
        b.gate(LocKind::PauliX, 0);
        b.end_timestep();
        b.measure(0, 0);
        let src = b.finish(vec![], vec![0]);
        let impl_ = implement_full(&src).unwrap();
        impl_.circuit.validate();
        let t0 = StabilizerTableau::zero_state(impl_.circuit.n_lines);
        let rec = run_tableau(&impl_.circuit, &FaultPattern::empty(), &t0, 5, 0).unwrap();
        let out = impl_.cbit_map[0].unwrap();
        assert_eq!(rec.cbits[out], 1);

        // Reference outcome from the source run.
        let tsrc = StabilizerTableau::zero_state(1);
        let rec_src = run_tableau(&src, &FaultPattern::empty(), &tsrc, 9, 0).unwrap();
        assert_eq!(rec_src.cbits[0], 1);
    }

    #[test]
    fn prep_rectangle_tolerates_every_single_fault() {
        let src = single_op_source(LocKind::PrepareZ);
        let impl_ = implement_full(&src).unwrap();
        let slotted: Vec<(usize, usize)> = impl_
            .circuit
            .slotted_locations()
            .map(|l| (l.id, l.kind.slots()))
            .collect();
        let mut checked = 0usize;
        for (id, slots) in slotted {
            let labels: Vec<FaultLabel> = if slots == 2 {
                let mut v = Vec::new();
                for a in [PauliKind::I, PauliKind::X, PauliKind::Y, PauliKind::Z] {
                    for z in [PauliKind::I, PauliKind::X, PauliKind::Y, PauliKind::Z] {
                        if a != PauliKind::I || z != PauliKind::I {
                            v.push(FaultLabel::Two(a, z));
                        }
                    }
                }
                v
            } else {
                vec![
                    FaultLabel::One(PauliKind::X),
                    FaultLabel::One(PauliKind::Y),
                    FaultLabel::One(PauliKind::Z),
                ]
            };
            for label in labels {
                let f = FaultPattern::single(id, label);
                assert!(
                    verify_transformation(&impl_, &f).unwrap(),
                    "single fault {label:?} at {id} breaks the preparation"
                );
                checked += 1;
            }
        }
        assert!(checked > 500, "exhaustiveness sanity: {checked}");
    }

    #[test]
    fn lemma6_holds_for_every_single_fault_on_classical_circuit() {
        // prep → H → H → measure: nominal outcome 0 either way; the double
        // Hadamard exercises gate rectangles between the ECs.
        let mut b = CircuitBuilder::new(1, 1, vec![]);
        b.prep(0);
        b.end_timestep();
        b.h(0);
        b.end_timestep();
        b.h(0);
        b.end_timestep();
        b.measure(0, 0);
        let src = b.finish(vec![], vec![0]);
        let impl_ = implement_full(&src).unwrap();
        let idx = exrec_index(&impl_);
        let mut counterexamples = 0usize;
        let mut total = 0usize;
        for l in impl_.circuit.slotted_locations() {
            let labels: Vec<FaultLabel> = if l.kind.slots() == 2 {
                vec![
                    FaultLabel::Two(PauliKind::X, PauliKind::I),
                    FaultLabel::Two(PauliKind::I, PauliKind::Z),
                    FaultLabel::Two(PauliKind::Y, PauliKind::Y),
                ]
            } else {
                vec![
                    FaultLabel::One(PauliKind::X),
                    FaultLabel::One(PauliKind::Y),
                    FaultLabel::One(PauliKind::Z),
                ]
            };
            for label in labels {
                let f = FaultPattern::single(l.id, label);
                assert!(all_exrecs_good_level1(&idx, &f));
                if !verify_transformation(&impl_, &f).unwrap() {
                    counterexamples += 1;
                }
                total += 1;
            }
        }
        assert_eq!(counterexamples, 0, "of {total} single-fault patterns");
    }

    #[test]
    fn exrec_partition_shares_ecs_between_adjacent_rectangles() {
        let mut b = CircuitBuilder::new(1, 0, vec![0]);
        b.wait(0);
        b.end_timestep();
        b.wait(0);
        b.end_timestep();
        b.wait(0);
        let src = b.finish(vec![0], vec![]);
        let impl_ = implement_full(&src).unwrap();
        assert_eq!(impl_.rects.len(), 3);
        for r in 0..3 {
            let rect = &impl_.rects[r];
            assert_eq!(rect.trailing_ec.len(), 1);
            if r > 0 {
                assert_eq!(
                    rect.leading_ec,
                    impl_.rects[r - 1].trailing_ec[0].1,
                    "EC shared between rect {} and {}",
                    r - 1,
                    r
                );
            } else {
                assert!(rect.leading_ec.is_empty());
            }
        }
        // Every slotted location belongs to at least one exrec.
        let idx = exrec_index(&impl_);
        for l in impl_.circuit.slotted_locations() {
            assert!(
                idx.member_of.contains_key(&l.id),
                "location {} unassigned",
                l.id
            );
        }
    }

    #[test]
    fn exrec_goodness_probability_matches_monte_carlo() {
        let src = single_op_source(LocKind::Wait);
        let impl_ = implement_full(&src).unwrap();
        let (m1, m2) = impl_.exrec_profile(0);
        let p = 0.01;
        let exact = exrec_bad_probability(m1, m2, p);
        let trials = 20_000u64;
        let freq = mc_exrec_bad_level1(&impl_, 0, p, trials, 99);
        let sigma = (exact * (1.0 - exact) / trials as f64).sqrt();
        assert!(
            (freq - exact).abs() < 4.0 * sigma + 1e-9,
            "freq {freq} vs exact {exact} (sigma {sigma})"
        );
        assert_eq!(exrec_bad_probability(m1, m2, 0.0), 0.0);
    }

    #[test]
    fn level2_goodness_smoke() {
        let src = single_op_source(LocKind::PrepareZ);
        let tl = implement_two_levels(&src).unwrap();
        let outer_idx = exrec_index(&tl.outer);
        assert!(exrec_good_level2(&tl, 0, &outer_idx, &FaultPattern::empty()));
        // A dense pattern is certainly bad.
        let nm = NoiseModel::new(0.5);
        let f = sample_fault_pattern(&tl.outer.circuit, &nm, 1, 0);
        assert!(!exrec_good_level2(&tl, 0, &outer_idx, &f));
        // Monotonicity spot check: goodness is defined by counting bad
        // sub-exrecs, so removing faults cannot make it worse.
        let empty_count = faulty_counts(&outer_idx, &FaultPattern::empty()).len();
        assert_eq!(empty_count, 0);
    }

    #[test]
    fn ec_circuit_level2_preserves_encoded_zero() {
        let ec1 = ec_circuit_level1();
        let impl_ = implement_full(&ec1).unwrap();
        // Source-level input: level-1 |0̄⟩ on the seven data lines.
        let mut tsrc = StabilizerTableau::zero_state(ec1.n_lines);
        let (stabs, destabs) = codeword_basis('0');
        install_block(&mut tsrc, &[0, 1, 2, 3, 4, 5, 6], &stabs, &destabs);
        let t0 = encode_tableau(&impl_, &tsrc);
        let rec = run_tableau(&impl_.circuit, &FaultPattern::empty(), &t0, 21, 0).unwrap();
        let tf = rec.final_tableau.unwrap();
        // The level-2 logical Z and every inner/outer stabilizer must hold.
        let spec = steane_spec();
        let n = impl_.circuit.n_lines;
        let mut logical = PauliString::identity(ec1.n_lines);
        for q in [2usize, 4, 5] {
            logical.set_kind(q, PauliKind::Z);
        }
        assert_eq!(tf.expectation(&logical_embedding(&impl_, &logical)), 1);
        for q in 0..7 {
            for g in &spec.generators {
                assert_eq!(tf.expectation(&embed(n, &impl_.blocks[q], g)), 1, "block {q}");
            }
        }
        // Outer generators: logical embeddings of the level-1 generators.
        for g in &spec.generators {
            let mut outer = PauliString::identity(ec1.n_lines);
            for q in 0..7 {
                outer.set_kind(q, g.kind_at(q));
            }
            assert_eq!(tf.expectation(&logical_embedding(&impl_, &outer)), 1);
        }
    }

    #[test]
    fn gadget_set_is_well_formed() {
        let set = gadget_set();
        assert_eq!(set.gadgets.len(), 11);
        for (kind, g) in &set.gadgets {
            g.validate();
            match kind {
                LocKind::Cnot => assert_eq!(g.n_in(), 14),
                LocKind::PrepareZ => assert_eq!(g.n_in(), 0),
                _ => assert_eq!(g.n_in(), 7),
            }
        }
        assert_eq!(set.ec.n_in(), 7);
    }

    #[test]
    fn fit_p0_is_the_binding_constraint() {
        let grid = [1e-4, 2e-4];
        let p1 = [1e-5, 4e-5];
        let p2 = [1e-9, 1.6e-8];
        let p0 = fit_p0(&grid, &p1, &p2);
        // Level-1 constraint: min p²/P1 = min(1e-3, 1e-3) = 1e-3.
        // Level-2: min p⁴/P2 = min(1e-7, 1e-7) = 1e-7 → cbrt ≈ 4.64e-3.
        assert!((p0 - 1e-3).abs() < 1e-12);
        assert!(fit_p0(&grid, &[0.0, 0.0], &p2) > 1e-3);
    }
}
