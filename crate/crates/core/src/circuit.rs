//! Located circuit diagrams, Pauli fault patterns, and the i.i.d. noise model.
//!
//! A circuit is a timestep-ordered list of *locations* acting on qubit lines
//! and classical bits. Each location of a noisy circuit carries fault *slots*
//! (two for CNOT, one for every other quantum kind, none for classical
//! bookkeeping nodes); a fault pattern assigns a Pauli label to every slot and
//! occurs with probability (1−p)^{l_id}(p/3)^{l_x+l_y+l_z}.
//!
//! Fault insertion convention: the labelled Pauli acts *before* out-degree-0
//! locations (measurements, traces), *after* out-degree-1 locations, and as a
//! tensor pair *after* a CNOT.
//!
//! Locations may carry guards (classical bit conditions). A guarded-off
//! location suppresses its gate or classical action, but its fault slots
//! remain: the qubits still idle through that timestep, so inserted noise
//! still applies. Liveness is static: a line is live from its first location
//! (timestep 0 for input lines) until it is consumed or the circuit ends; an
//! unguarded preparation on a consumed line begins a new live interval, so
//! ancilla slots can be reused.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::pauli::PauliKind;
use crate::rng;

/// Hard cap on exhaustive fault-pattern enumeration.
pub const ENUMERATION_BUDGET: u64 = 10_000_000;

/// Location kinds. The first ten are the elementary noisy operations; the
/// classically controlled Paulis are noisy single-qubit locations used by the
/// teleportation interfaces; the remaining four are noiseless classical
/// bookkeeping nodes (syndrome-decode frame corrections, acceptance tests,
/// logical readout decoding).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum LocKind {
    PauliX,
    PauliY,
    PauliZ,
    Hadamard,
    TGate,
    Wait,
    Cnot,
    PrepareZ,
    MeasureZ,
    Trace,
    /// Apply X to the qubit iff the control bit is 1. One noisy slot.
    CPauliX,
    /// Apply Z to the qubit iff the control bit is 1. One noisy slot.
    CPauliZ,
    /// Hamming-decode 7 measurement bits; apply a frame X on the indicated
    /// block qubit. Noiseless classical node.
    CorrX,
    /// As CorrX with a frame Z correction.
    CorrZ,
    /// Acceptance test of a verification readout: output bit 1 iff the 7
    /// input bits lie in the Hamming code with even parity.
    Accept,
    /// Logical Z readout of a measured block: Hamming-correct the 7 bits,
    /// output the corrected parity.
    DecodeL,
}

impl LocKind {
    /// Number of fault slots this location carries.
    pub fn slots(self) -> usize {
        match self {
            LocKind::Cnot => 2,
            LocKind::CorrX | LocKind::CorrZ | LocKind::Accept | LocKind::DecodeL => 0,
            _ => 1,
        }
    }

    /// Out-degree in the sense of the fault-insertion convention.
    pub fn out_degree(self) -> usize {
        match self {
            LocKind::MeasureZ | LocKind::Trace => 0,
            LocKind::Cnot => 2,
            LocKind::CorrX | LocKind::CorrZ | LocKind::Accept | LocKind::DecodeL => 0,
            _ => 1,
        }
    }

    /// True for kinds that occupy a qubit line for a timestep.
    pub fn is_quantum(self) -> bool {
        !matches!(
            self,
            LocKind::CorrX | LocKind::CorrZ | LocKind::Accept | LocKind::DecodeL
        )
    }

    /// True if the location consumes its qubit line.
    pub fn consumes_line(self) -> bool {
        matches!(self, LocKind::MeasureZ | LocKind::Trace)
    }
}

/// One located operation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Location {
    pub id: usize,
    pub kind: LocKind,
    /// Qubit lines touched: 1 for single-qubit kinds, 2 for CNOT (control
    /// first), 7 correction targets for CorrX/CorrZ, empty for Accept/DecodeL.
    pub qubits: Vec<usize>,
    /// Classical bits read (CPauli control; 7 measurement bits for the
    /// classical decode kinds).
    pub cbits_in: Vec<usize>,
    /// Classical bit written (MeasureZ, Accept, DecodeL).
    pub cbit_out: Option<usize>,
    /// Guards: all (bit, value) conditions must hold for the action to fire.
    pub guards: Vec<(usize, bool)>,
    pub timestep: usize,
}

/// A circuit diagram over a fixed set of qubit lines and classical bits.
/// `locations` is sorted by (timestep, id) and is the execution order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CircuitDiagram {
    pub n_lines: usize,
    pub n_cbits: usize,
    pub input_lines: Vec<usize>,
    pub output_lines: Vec<usize>,
    pub classical_in: Vec<usize>,
    pub classical_out: Vec<usize>,
    pub locations: Vec<Location>,
    /// Noise-free circuits (ideal encoders/decoders) carry no fault slots.
    pub ideal: bool,
    pub depth: usize,
}

impl CircuitDiagram {
    pub fn n_in(&self) -> usize {
        self.input_lines.len()
    }

    pub fn n_out(&self) -> usize {
        self.output_lines.len()
    }

    /// Slot count: (#locations with out_degree ≤ 1) + 2·(#CNOT); zero for
    /// ideal circuits.
    pub fn slot_count(&self) -> usize {
        if self.ideal {
            return 0;
        }
        self.locations.iter().map(|l| l.kind.slots()).sum()
    }

    /// Locations carrying at least one slot, in execution order.
    pub fn slotted_locations(&self) -> impl Iterator<Item = &Location> {
        let ideal = self.ideal;
        self.locations
            .iter()
            .filter(move |l| !ideal && l.kind.slots() > 0)
    }

    /// Global slot index of the first slot of each slotted location.
    pub fn slot_offsets(&self) -> BTreeMap<usize, usize> {
        let mut map = BTreeMap::new();
        let mut next = 0usize;
        for l in self.slotted_locations() {
            map.insert(l.id, next);
            next += l.kind.slots();
        }
        map
    }

    pub fn location(&self, id: usize) -> &Location {
        // Ids are dense indices for builder-produced circuits; fall back to
        // a scan for anything exotic.
        if let Some(l) = self.locations.get(id) {
            if l.id == id {
                return l;
            }
        }
        self.locations
            .iter()
            .find(|l| l.id == id)
            .expect("unknown location id")
    }

    /// DAG edges: consecutive quantum locations sharing a line, plus
    /// classical producer → consumer pairs.
    pub fn wiring(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        let mut last_on_line: Vec<Option<usize>> = vec![None; self.n_lines];
        let mut last_writer: Vec<Option<usize>> = vec![None; self.n_cbits];
        for l in &self.locations {
            if l.kind.is_quantum() {
                for &q in &l.qubits {
                    if let Some(prev) = last_on_line[q] {
                        edges.push((prev, l.id));
                    }
                    last_on_line[q] = Some(l.id);
                }
            }
            for b in l
                .cbits_in
                .iter()
                .copied()
                .chain(l.guards.iter().map(|&(b, _)| b))
            {
                if let Some(prev) = last_writer[b] {
                    edges.push((prev, l.id));
                }
            }
            if let Some(b) = l.cbit_out {
                last_writer[b] = Some(l.id);
            }
        }
        edges
    }

    /// Structural validation: ordering, line occupancy, classical dataflow,
    /// arities. Panics with a description on violation.
    pub fn validate(&self) {
        let mut prev_key = (0usize, 0usize);
        let mut seen_ids = std::collections::HashSet::new();
        let mut line_alive = vec![true; self.n_lines];
        let mut cbit_written = vec![false; self.n_cbits];
        for &b in &self.classical_in {
            cbit_written[b] = true;
        }
        for (i, l) in self.locations.iter().enumerate() {
            let key = (l.timestep, l.id);
            assert!(i == 0 || key > prev_key, "locations out of order at {}", l.id);
            prev_key = key;
            assert!(seen_ids.insert(l.id), "duplicate location id {}", l.id);
            let arity = match l.kind {
                LocKind::Cnot => 2,
                LocKind::CorrX | LocKind::CorrZ => 7,
                LocKind::Accept | LocKind::DecodeL => 0,
                _ => 1,
            };
            assert_eq!(l.qubits.len(), arity, "location {} arity", l.id);
            if l.kind == LocKind::Cnot {
                assert_ne!(l.qubits[0], l.qubits[1], "CNOT on one line at {}", l.id);
            }
            for &q in &l.qubits {
                assert!(q < self.n_lines, "line {} out of range at {}", q, l.id);
                if l.kind.is_quantum() && !line_alive[q] {
                    // An unguarded preparation revives a consumed line (fresh
                    // ancilla in a reused slot); anything else is an error.
                    assert!(
                        l.kind == LocKind::PrepareZ && l.guards.is_empty(),
                        "location {} uses dead line {}",
                        l.id,
                        q
                    );
                    line_alive[q] = true;
                }
            }
            if l.kind.is_quantum() && l.kind.consumes_line() && l.guards.is_empty() {
                line_alive[l.qubits[0]] = false;
            }
            match l.kind {
                LocKind::CPauliX | LocKind::CPauliZ => assert_eq!(l.cbits_in.len(), 1),
                LocKind::CorrX | LocKind::CorrZ | LocKind::Accept | LocKind::DecodeL => {
                    assert_eq!(l.cbits_in.len(), 7, "location {} needs 7 bits", l.id)
                }
                _ => assert!(l.cbits_in.is_empty(), "location {} reads bits", l.id),
            }
            for &(b, _) in &l.guards {
                assert!(cbit_written[b], "guard on unwritten bit {} at {}", b, l.id);
            }
            for &b in &l.cbits_in {
                assert!(cbit_written[b], "read of unwritten bit {} at {}", b, l.id);
            }
            match l.kind {
                LocKind::MeasureZ | LocKind::Accept | LocKind::DecodeL => {
                    let b = l.cbit_out.expect("missing output bit");
                    assert!(b < self.n_cbits);
                    cbit_written[b] = true;
                }
                _ => assert!(l.cbit_out.is_none(), "location {} writes a bit", l.id),
            }
        }
        // Per-timestep single occupancy of quantum lines.
        let mut used: std::collections::HashSet<(usize, usize)> = std::collections::HashSet::new();
        for l in &self.locations {
            if l.kind.is_quantum() {
                for &q in &l.qubits {
                    assert!(
                        used.insert((l.timestep, q)),
                        "line {} used twice in timestep {}",
                        q,
                        l.timestep
                    );
                }
            }
        }
        for &q in &self.output_lines {
            assert!(q < self.n_lines);
        }
    }
}

/// Fault label for one location: a single Pauli for out-degree ≤ 1, an
/// ordered pair for a CNOT.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum FaultLabel {
    One(PauliKind),
    Two(PauliKind, PauliKind),
}

impl FaultLabel {
    pub fn weight(&self) -> usize {
        match self {
            FaultLabel::One(a) => usize::from(*a != PauliKind::I),
            FaultLabel::Two(a, b) => {
                usize::from(*a != PauliKind::I) + usize::from(*b != PauliKind::I)
            }
        }
    }

    pub fn is_identity(&self) -> bool {
        self.weight() == 0
    }
}

/// Sparse fault pattern: locations absent from the map carry the identity
/// label. Conceptually every location of the circuit has exactly one
/// assignment.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultPattern {
    pub assignments: BTreeMap<usize, FaultLabel>,
}

impl FaultPattern {
    pub fn empty() -> Self {
        FaultPattern::default()
    }

    pub fn single(id: usize, label: FaultLabel) -> Self {
        let mut assignments = BTreeMap::new();
        if !label.is_identity() {
            assignments.insert(id, label);
        }
        FaultPattern { assignments }
    }

    pub fn weight(&self) -> usize {
        self.assignments.values().map(|l| l.weight()).sum()
    }

    /// Label at a location (identity when unassigned).
    pub fn label_at(&self, loc: &Location) -> FaultLabel {
        self.assignments.get(&loc.id).copied().unwrap_or(match loc.kind {
            LocKind::Cnot => FaultLabel::Two(PauliKind::I, PauliKind::I),
            _ => FaultLabel::One(PauliKind::I),
        })
    }

    /// Ids of faulted locations.
    pub fn faulted_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.assignments
            .iter()
            .filter(|(_, l)| !l.is_identity())
            .map(|(&id, _)| id)
    }

    /// Number of distinct faulted locations (a CNOT pair counts once).
    pub fn faulty_location_count(&self) -> usize {
        self.faulted_ids().count()
    }

    /// Restriction to a set of location ids.
    pub fn restrict(&self, ids: &std::collections::HashSet<usize>) -> FaultPattern {
        FaultPattern {
            assignments: self
                .assignments
                .iter()
                .filter(|(id, _)| ids.contains(id))
                .map(|(&id, &l)| (id, l))
                .collect(),
        }
    }

    /// Checks that every assignment names a slotted location of `c` with the
    /// right arity.
    pub fn covers(&self, c: &CircuitDiagram) -> bool {
        let by_id: BTreeMap<usize, LocKind> =
            c.slotted_locations().map(|l| (l.id, l.kind)).collect();
        self.assignments.iter().all(|(id, label)| match by_id.get(id) {
            Some(LocKind::Cnot) => matches!(label, FaultLabel::Two(_, _)),
            Some(_) => matches!(label, FaultLabel::One(_)),
            None => false,
        })
    }
}

/// The i.i.d. noise model: each slot is faulty with probability p, uniformly
/// over {X, Y, Z} when faulty.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p: f64,
}

impl NoiseModel {
    pub fn new(p: f64) -> Self {
        assert!((0.0..=1.0).contains(&p), "p = {p} out of range");
        NoiseModel { p }
    }
}

/// P(F) = (1−p)^{l_id}(p/3)^{l_x}(p/3)^{l_y}(p/3)^{l_z}.
pub fn fault_pattern_probability(c: &CircuitDiagram, f: &FaultPattern, nm: &NoiseModel) -> f64 {
    assert!(f.covers(c), "pattern does not match the circuit");
    let total = c.slot_count();
    let w = f.weight();
    (1.0 - nm.p).powi((total - w) as i32) * (nm.p / 3.0).powi(w as i32)
}

/// Probability of any one pattern of given weight on a circuit with `slots`
/// slots (all weight-w patterns are equiprobable).
pub fn weight_probability(slots: usize, w: usize, p: f64) -> f64 {
    (1.0 - p).powi((slots - w) as i32) * (p / 3.0).powi(w as i32)
}

/// Upper bound on the total probability of patterns with weight > w:
/// C(L, w+1) p^{w+1}.
pub fn tail_probability_bound(slots: usize, w: usize, p: f64) -> f64 {
    binomial(slots as u64, (w + 1) as u64) as f64 * p.powi((w + 1) as i32)
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r as u64
}

/// Sample a fault pattern: each slot independently non-identity with
/// probability p, uniform over {X, Y, Z} when faulty. Deterministic given
/// (master seed, trial). Sparse geometric skipping over the global slot
/// index — the sampled law is exactly the per-slot i.i.d. product.
pub fn sample_fault_pattern(
    c: &CircuitDiagram,
    nm: &NoiseModel,
    master_seed: u64,
    trial: u64,
) -> FaultPattern {
    use rand::Rng;
    let mut pattern = FaultPattern::empty();
    if nm.p == 0.0 || c.ideal {
        return pattern;
    }
    // Slot index → (location index in execution order, slot-within-location).
    let slotted: Vec<&Location> = c.slotted_locations().collect();
    let total: usize = c.slot_count();
    let mut rng = rng::stream(master_seed, rng::DOMAIN_FAULTS, trial, 0);
    let mut faulted: BTreeMap<usize, Vec<(usize, PauliKind)>> = BTreeMap::new();

    // Cumulative offsets for binary search from global slot to location.
    let mut offsets = Vec::with_capacity(slotted.len());
    let mut acc = 0usize;
    for l in &slotted {
        offsets.push(acc);
        acc += l.kind.slots();
    }

    let mut pos: u64 = 0;
    loop {
        let skip = if nm.p >= 1.0 {
            0
        } else {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            (u.ln() / (1.0 - nm.p).ln()).floor() as u64
        };
        pos = pos.saturating_add(skip);
        if pos >= total as u64 {
            break;
        }
        let kind = [PauliKind::X, PauliKind::Y, PauliKind::Z][rng.gen_range(0..3)];
        let li = offsets.partition_point(|&o| o <= pos as usize) - 1;
        let loc = slotted[li];
        faulted
            .entry(loc.id)
            .or_default()
            .push((pos as usize - offsets[li], kind));
        pos += 1;
    }

    for (id, picks) in faulted {
        let loc = c.location(id);
        let label = match loc.kind {
            LocKind::Cnot => {
                let mut pair = [PauliKind::I, PauliKind::I];
                for (which, k) in picks {
                    pair[which] = k;
                }
                FaultLabel::Two(pair[0], pair[1])
            }
            _ => FaultLabel::One(picks[0].1),
        };
        pattern.assignments.insert(id, label);
    }
    pattern
}

/// All fault patterns with at most `max_weight` non-identity slots, paired
/// with their weight. Errors if the pattern count exceeds the enumeration
/// budget.
pub fn enumerate_patterns_up_to_weight(
    c: &CircuitDiagram,
    max_weight: usize,
) -> Result<Vec<(FaultPattern, usize)>, crate::FtError> {
    let slotted: Vec<(usize, usize)> = c
        .slotted_locations()
        .flat_map(|l| (0..l.kind.slots()).map(move |w| (l.id, w)))
        .collect();
    let total = slotted.len() as u64;
    let mut count: u64 = 0;
    for w in 0..=max_weight as u64 {
        count = count.saturating_add(binomial(total, w).saturating_mul(3u64.pow(w as u32)));
    }
    if count > ENUMERATION_BUDGET {
        return Err(crate::FtError::Budget(format!(
            "enumeration of {count} patterns exceeds the {ENUMERATION_BUDGET} cap"
        )));
    }

    let kind_by_id: BTreeMap<usize, LocKind> =
        c.slotted_locations().map(|l| (l.id, l.kind)).collect();
    let make = |picks: &[(usize, usize, PauliKind)]| -> FaultPattern {
        let mut by_loc: BTreeMap<usize, Vec<(usize, PauliKind)>> = BTreeMap::new();
        for &(id, which, k) in picks {
            by_loc.entry(id).or_default().push((which, k));
        }
        let mut pattern = FaultPattern::empty();
        for (id, picks) in by_loc {
            let label = match kind_by_id[&id] {
                LocKind::Cnot => {
                    let mut pair = [PauliKind::I, PauliKind::I];
                    for (which, k) in picks {
                        pair[which] = k;
                    }
                    FaultLabel::Two(pair[0], pair[1])
                }
                _ => FaultLabel::One(picks[0].1),
            };
            pattern.assignments.insert(id, label);
        }
        pattern
    };

    let mut out = Vec::with_capacity(count as usize);
    out.push((FaultPattern::empty(), 0));
    if max_weight >= 1 {
        for &(id, which) in &slotted {
            for k in PauliKind::FAULTS {
                out.push((make(&[(id, which, k)]), 1));
            }
        }
    }
    if max_weight >= 2 {
        for i in 0..slotted.len() {
            for j in (i + 1)..slotted.len() {
                let (id1, w1) = slotted[i];
                let (id2, w2) = slotted[j];
                for k1 in PauliKind::FAULTS {
                    for k2 in PauliKind::FAULTS {
                        out.push((make(&[(id1, w1, k1), (id2, w2, k2)]), 2));
                    }
                }
            }
        }
    }
    assert!(
        max_weight <= 2,
        "weights above 2 are outside every planned budget"
    );
    Ok(out)
}

// ---------------------------------------------------------------------------
// Builder
// ---------------------------------------------------------------------------

/// Incremental circuit construction with automatic wait padding: when a
/// timestep is closed, every live line without a location in it receives a
/// wait. Lines become live at their first location (input lines at timestep
/// 0) and output lines stay live to the end.
pub struct CircuitBuilder {
    n_lines: usize,
    n_cbits: usize,
    input_lines: Vec<usize>,
    classical_in: Vec<usize>,
    locations: Vec<Location>,
    current: Vec<Location>,
    timestep: usize,
    next_id: usize,
    first_use: Vec<Option<usize>>,
    consumed: Vec<bool>,
    cbit_written: Vec<bool>,
    ideal: bool,
}

impl CircuitBuilder {
    pub fn new(n_lines: usize, n_cbits: usize, input_lines: Vec<usize>) -> Self {
        let mut first_use = vec![None; n_lines];
        for &q in &input_lines {
            first_use[q] = Some(0);
        }
        CircuitBuilder {
            n_lines,
            n_cbits,
            input_lines,
            classical_in: Vec::new(),
            locations: Vec::new(),
            current: Vec::new(),
            timestep: 0,
            next_id: 0,
            first_use,
            consumed: vec![false; n_lines],
            cbit_written: vec![false; n_cbits],
            ideal: false,
        }
    }

    pub fn ideal(mut self) -> Self {
        self.ideal = true;
        self
    }

    pub fn with_classical_in(mut self, bits: Vec<usize>) -> Self {
        for &b in &bits {
            self.cbit_written[b] = true;
        }
        self.classical_in = bits;
        self
    }

    fn push(&mut self, mut loc: Location) -> usize {
        loc.id = self.next_id;
        loc.timestep = self.timestep;
        self.next_id += 1;
        if loc.kind.is_quantum() {
            for &q in &loc.qubits {
                if self.consumed[q] {
                    assert!(
                        loc.kind == LocKind::PrepareZ && loc.guards.is_empty(),
                        "line {q} already consumed"
                    );
                    self.consumed[q] = false;
                }
                assert!(
                    !self.current.iter().any(|o| o.kind.is_quantum() && o.qubits.contains(&q)),
                    "line {q} used twice in timestep {}",
                    self.timestep
                );
                if self.first_use[q].is_none() {
                    self.first_use[q] = Some(self.timestep);
                }
            }
            if loc.kind.consumes_line() && loc.guards.is_empty() {
                self.consumed[loc.qubits[0]] = true;
            }
        }
        if let Some(b) = loc.cbit_out {
            self.cbit_written[b] = true;
        }
        let id = loc.id;
        self.current.push(loc);
        id
    }

    fn simple(&mut self, kind: LocKind, qubits: Vec<usize>) -> usize {
        self.push(Location {
            id: 0,
            kind,
            qubits,
            cbits_in: vec![],
            cbit_out: None,
            guards: vec![],
            timestep: 0,
        })
    }

    pub fn gate(&mut self, kind: LocKind, q: usize) -> usize {
        assert!(matches!(
            kind,
            LocKind::PauliX
                | LocKind::PauliY
                | LocKind::PauliZ
                | LocKind::Hadamard
                | LocKind::TGate
                | LocKind::Wait
                | LocKind::Trace
        ));
        self.simple(kind, vec![q])
    }

    pub fn gate_guarded(&mut self, kind: LocKind, q: usize, guards: Vec<(usize, bool)>) -> usize {
        assert!(matches!(
            kind,
            LocKind::PauliX
                | LocKind::PauliY
                | LocKind::PauliZ
                | LocKind::Hadamard
                | LocKind::Wait
        ));
        self.push(Location {
            id: 0,
            kind,
            qubits: vec![q],
            cbits_in: vec![],
            cbit_out: None,
            guards,
            timestep: 0,
        })
    }

    pub fn h(&mut self, q: usize) -> usize {
        self.gate(LocKind::Hadamard, q)
    }

    pub fn wait(&mut self, q: usize) -> usize {
        self.gate(LocKind::Wait, q)
    }

    pub fn prep(&mut self, q: usize) -> usize {
        self.simple(LocKind::PrepareZ, vec![q])
    }

    /// Guarded preparation. Unlike an unguarded one, this never revives a
    /// consumed line: the line must be live.
    pub fn prep_guarded(&mut self, q: usize, guards: Vec<(usize, bool)>) -> usize {
        self.push(Location {
            id: 0,
            kind: LocKind::PrepareZ,
            qubits: vec![q],
            cbits_in: vec![],
            cbit_out: None,
            guards,
            timestep: 0,
        })
    }

    pub fn cnot(&mut self, c: usize, t: usize) -> usize {
        self.simple(LocKind::Cnot, vec![c, t])
    }

    pub fn cnot_guarded(&mut self, c: usize, t: usize, guards: Vec<(usize, bool)>) -> usize {
        self.push(Location {
            id: 0,
            kind: LocKind::Cnot,
            qubits: vec![c, t],
            cbits_in: vec![],
            cbit_out: None,
            guards,
            timestep: 0,
        })
    }

    pub fn measure(&mut self, q: usize, bit: usize) -> usize {
        self.push(Location {
            id: 0,
            kind: LocKind::MeasureZ,
            qubits: vec![q],
            cbits_in: vec![],
            cbit_out: Some(bit),
            guards: vec![],
            timestep: 0,
        })
    }

    pub fn trace_out(&mut self, q: usize) -> usize {
        self.simple(LocKind::Trace, vec![q])
    }

    pub fn cpauli(&mut self, kind: LocKind, control_bit: usize, q: usize) -> usize {
        assert!(matches!(kind, LocKind::CPauliX | LocKind::CPauliZ));
        self.push(Location {
            id: 0,
            kind,
            qubits: vec![q],
            cbits_in: vec![control_bit],
            cbit_out: None,
            guards: vec![],
            timestep: 0,
        })
    }

    /// Classical nodes (zero slots). `corr` kinds name 7 target qubits but do
    /// not occupy them for the timestep.
    pub fn classical(
        &mut self,
        kind: LocKind,
        cbits_in: Vec<usize>,
        cbit_out: Option<usize>,
        qubits: Vec<usize>,
        guards: Vec<(usize, bool)>,
    ) -> usize {
        assert!(!kind.is_quantum());
        self.push(Location {
            id: 0,
            kind,
            qubits,
            cbits_in,
            cbit_out,
            guards,
            timestep: 0,
        })
    }

    /// Close the current timestep, padding idle live lines with waits.
    pub fn end_timestep(&mut self) {
        let occupied: std::collections::HashSet<usize> = self
            .current
            .iter()
            .filter(|l| l.kind.is_quantum())
            .flat_map(|l| l.qubits.iter().copied())
            .collect();
        let idle: Vec<usize> = (0..self.n_lines)
            .filter(|&q| {
                !occupied.contains(&q)
                    && !self.consumed[q]
                    && self.first_use[q].map_or(false, |t| t <= self.timestep)
            })
            .collect();
        for q in idle {
            self.simple(LocKind::Wait, vec![q]);
        }
        self.locations.append(&mut self.current);
        self.timestep += 1;
    }

    /// Timestep index the next location will carry.
    pub fn now(&self) -> usize {
        self.timestep
    }

    /// Locations emitted so far (closed timesteps only).
    pub fn emitted(&self) -> &[Location] {
        &self.locations
    }

    pub fn fresh_cbits(&self) -> usize {
        self.n_cbits
    }

    pub fn add_cbits(&mut self, k: usize) -> Vec<usize> {
        let start = self.n_cbits;
        self.n_cbits += k;
        self.cbit_written.resize(self.n_cbits, false);
        (start..start + k).collect()
    }

    pub fn finish(
        mut self,
        output_lines: Vec<usize>,
        classical_out: Vec<usize>,
    ) -> CircuitDiagram {
        if !self.current.is_empty() {
            self.end_timestep();
        }
        for &q in &output_lines {
            assert!(!self.consumed[q], "output line {q} was consumed");
            assert!(self.first_use[q].is_some(), "output line {q} never used");
        }
        let c = CircuitDiagram {
            n_lines: self.n_lines,
            n_cbits: self.n_cbits,
            input_lines: self.input_lines,
            output_lines,
            classical_in: self.classical_in,
            classical_out,
            locations: self.locations,
            ideal: self.ideal,
            depth: self.timestep,
        };
        c.validate();
        c
    }
}

// ---------------------------------------------------------------------------
// Composition
// ---------------------------------------------------------------------------

/// Serial composition: run `a`, feed its output lines into `b`'s input lines
/// in order. Lines of `b` are renamed; `b`'s other lines get fresh indices;
/// classical bits of `b` get fresh indices. Output lines idleing while the
/// other factor still runs are not an issue here since timelines concatenate.
pub fn compose_serial(a: &CircuitDiagram, b: &CircuitDiagram) -> CircuitDiagram {
    assert_eq!(
        a.n_out(),
        b.n_in(),
        "serial composition arity mismatch: {} outputs vs {} inputs",
        a.n_out(),
        b.n_in()
    );
    assert_eq!(a.ideal, b.ideal, "cannot mix ideal and noisy circuits");
    let mut line_map: Vec<Option<usize>> = vec![None; b.n_lines];
    for (i, &bq) in b.input_lines.iter().enumerate() {
        line_map[bq] = Some(a.output_lines[i]);
    }
    let mut next_line = a.n_lines;
    for q in 0..b.n_lines {
        if line_map[q].is_none() {
            line_map[q] = Some(next_line);
            next_line += 1;
        }
    }
    let cbit_shift = a.n_cbits;
    let id_shift = a.locations.iter().map(|l| l.id + 1).max().unwrap_or(0);
    let t_shift = a.depth;

    let mut locations = a.locations.clone();
    for l in &b.locations {
        locations.push(Location {
            id: l.id + id_shift,
            kind: l.kind,
            qubits: l.qubits.iter().map(|&q| line_map[q].unwrap()).collect(),
            cbits_in: l.cbits_in.iter().map(|&b| b + cbit_shift).collect(),
            cbit_out: l.cbit_out.map(|b| b + cbit_shift),
            guards: l.guards.iter().map(|&(b, v)| (b + cbit_shift, v)).collect(),
            timestep: l.timestep + t_shift,
        });
    }
    let c = CircuitDiagram {
        n_lines: next_line,
        n_cbits: a.n_cbits + b.n_cbits,
        input_lines: a.input_lines.clone(),
        output_lines: b
            .output_lines
            .iter()
            .map(|&q| line_map[q].unwrap())
            .collect(),
        classical_in: a.classical_in.clone(),
        classical_out: a
            .classical_out
            .iter()
            .copied()
            .chain(b.classical_out.iter().map(|&x| x + cbit_shift))
            .collect(),
        locations,
        ideal: a.ideal,
        depth: a.depth + b.depth,
    };
    c.validate();
    c
}

/// Parallel composition: disjoint union with aligned timesteps. Output lines
/// of the shorter factor are padded with waits to the common depth.
pub fn compose_parallel(a: &CircuitDiagram, b: &CircuitDiagram) -> CircuitDiagram {
    assert_eq!(a.ideal, b.ideal, "cannot mix ideal and noisy circuits");
    let line_shift = a.n_lines;
    let cbit_shift = a.n_cbits;
    let id_shift = a.locations.iter().map(|l| l.id + 1).max().unwrap_or(0);
    let depth = a.depth.max(b.depth);

    let mut locations = a.locations.clone();
    let mut next_id = id_shift;
    for l in &b.locations {
        locations.push(Location {
            id: l.id + id_shift,
            kind: l.kind,
            qubits: l.qubits.iter().map(|&q| q + line_shift).collect(),
            cbits_in: l.cbits_in.iter().map(|&x| x + cbit_shift).collect(),
            cbit_out: l.cbit_out.map(|x| x + cbit_shift),
            guards: l.guards.iter().map(|&(x, v)| (x + cbit_shift, v)).collect(),
            timestep: l.timestep,
        });
        next_id = next_id.max(l.id + id_shift + 1);
    }
    // Pad the shorter factor's surviving output lines to the common depth.
    let mut pad = |lines: &[usize], from: usize, shift: usize, locations: &mut Vec<Location>| {
        for t in from..depth {
            for &q in lines {
                locations.push(Location {
                    id: next_id,
                    kind: LocKind::Wait,
                    qubits: vec![q + shift],
                    cbits_in: vec![],
                    cbit_out: None,
                    guards: vec![],
                    timestep: t,
                });
                next_id += 1;
            }
        }
    };
    if a.depth < depth {
        pad(&a.output_lines, a.depth, 0, &mut locations);
    }
    if b.depth < depth {
        pad(&b.output_lines, b.depth, line_shift, &mut locations);
    }
    locations.sort_by_key(|l| (l.timestep, l.id));

    let c = CircuitDiagram {
        n_lines: a.n_lines + b.n_lines,
        n_cbits: a.n_cbits + b.n_cbits,
        input_lines: a
            .input_lines
            .iter()
            .copied()
            .chain(b.input_lines.iter().map(|&q| q + line_shift))
            .collect(),
        output_lines: a
            .output_lines
            .iter()
            .copied()
            .chain(b.output_lines.iter().map(|&q| q + line_shift))
            .collect(),
        classical_in: a
            .classical_in
            .iter()
            .copied()
            .chain(b.classical_in.iter().map(|&x| x + cbit_shift))
            .collect(),
        classical_out: a
            .classical_out
            .iter()
            .copied()
            .chain(b.classical_out.iter().map(|&x| x + cbit_shift))
            .collect(),
        locations,
        ideal: a.ideal,
        depth,
    };
    c.validate();
    c
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

impl CircuitDiagram {
    /// One line per timestep, header first; operations joined by " ; ".
    pub fn to_text(&self) -> String {
        let fmt_list = |prefix: &str, items: &[usize], tag: char| {
            let body: Vec<String> = items.iter().map(|i| format!("{tag}{i}")).collect();
            format!("{prefix} {}", body.join(" ")).trim_end().to_string()
        };
        let mut lines = vec![
            format!("LINES {}", self.n_lines),
            format!("CBITS {}", self.n_cbits),
            fmt_list("IN", &self.input_lines, 'q'),
            fmt_list("OUT", &self.output_lines, 'q'),
            fmt_list("CIN", &self.classical_in, 'c'),
            fmt_list("COUT", &self.classical_out, 'c'),
            format!("IDEAL {}", u8::from(self.ideal)),
            "---".to_string(),
        ];
        for t in 0..self.depth {
            let ops: Vec<String> = self
                .locations
                .iter()
                .filter(|l| l.timestep == t)
                .map(|l| l.token())
                .collect();
            lines.push(ops.join(" ; "));
        }
        lines.join("\n")
    }

    pub fn from_text(text: &str) -> Result<CircuitDiagram, String> {
        let mut n_lines = 0usize;
        let mut n_cbits = 0usize;
        let mut input_lines = vec![];
        let mut output_lines = vec![];
        let mut classical_in = vec![];
        let mut classical_out = vec![];
        let mut ideal = false;
        let mut it = text.lines();
        let parse_idx = |tok: &str, tag: char| -> Result<usize, String> {
            tok.strip_prefix(tag)
                .ok_or_else(|| format!("expected {tag}-index, got {tok}"))?
                .parse::<usize>()
                .map_err(|e| format!("bad index {tok}: {e}"))
        };
        for line in it.by_ref() {
            let line = line.trim();
            if line == "---" {
                break;
            }
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("LINES") => n_lines = parts.next().unwrap_or("0").parse().map_err(|e| format!("{e}"))?,
                Some("CBITS") => n_cbits = parts.next().unwrap_or("0").parse().map_err(|e| format!("{e}"))?,
                Some("IN") => input_lines = parts.map(|t| parse_idx(t, 'q')).collect::<Result<_, _>>()?,
                Some("OUT") => output_lines = parts.map(|t| parse_idx(t, 'q')).collect::<Result<_, _>>()?,
                Some("CIN") => classical_in = parts.map(|t| parse_idx(t, 'c')).collect::<Result<_, _>>()?,
                Some("COUT") => classical_out = parts.map(|t| parse_idx(t, 'c')).collect::<Result<_, _>>()?,
                Some("IDEAL") => ideal = parts.next() == Some("1"),
                Some(other) => return Err(format!("unknown header {other}")),
                None => {}
            }
        }
        let mut locations = Vec::new();
        let mut next_id = 0usize;
        let mut depth = 0usize;
        for (t, line) in it.enumerate() {
            depth = t + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            for op in line.split(" ; ") {
                let mut loc = Location::parse_token(op, parse_idx)?;
                loc.id = next_id;
                loc.timestep = t;
                next_id += 1;
                locations.push(loc);
            }
        }
        let c = CircuitDiagram {
            n_lines,
            n_cbits,
            input_lines,
            output_lines,
            classical_in,
            classical_out,
            locations,
            ideal,
            depth,
        };
        c.validate();
        Ok(c)
    }
}

impl Location {
    /// Token form, e.g. `?c3=1 CNOT q0 q4` or `MEASZ q2 -> c0`.
    pub fn token(&self) -> String {
        let mut s = String::new();
        for &(b, v) in &self.guards {
            s.push_str(&format!("?c{b}={} ", u8::from(v)));
        }
        let qs = |qubits: &[usize]| {
            qubits
                .iter()
                .map(|q| format!("q{q}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let cs = |bits: &[usize]| {
            bits.iter()
                .map(|b| format!("c{b}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        match self.kind {
            LocKind::PauliX => s.push_str(&format!("X {}", qs(&self.qubits))),
            LocKind::PauliY => s.push_str(&format!("Y {}", qs(&self.qubits))),
            LocKind::PauliZ => s.push_str(&format!("Z {}", qs(&self.qubits))),
            LocKind::Hadamard => s.push_str(&format!("H {}", qs(&self.qubits))),
            LocKind::TGate => s.push_str(&format!("T {}", qs(&self.qubits))),
            LocKind::Wait => s.push_str(&format!("WAIT {}", qs(&self.qubits))),
            LocKind::Cnot => s.push_str(&format!("CNOT {}", qs(&self.qubits))),
            LocKind::PrepareZ => s.push_str(&format!("PREP {}", qs(&self.qubits))),
            LocKind::Trace => s.push_str(&format!("TRACE {}", qs(&self.qubits))),
            LocKind::MeasureZ => s.push_str(&format!(
                "MEASZ {} -> c{}",
                qs(&self.qubits),
                self.cbit_out.unwrap()
            )),
            LocKind::CPauliX => s.push_str(&format!(
                "CPX c{} {}",
                self.cbits_in[0],
                qs(&self.qubits)
            )),
            LocKind::CPauliZ => s.push_str(&format!(
                "CPZ c{} {}",
                self.cbits_in[0],
                qs(&self.qubits)
            )),
            LocKind::CorrX => s.push_str(&format!(
                "CORRX {} -> {}",
                cs(&self.cbits_in),
                qs(&self.qubits)
            )),
            LocKind::CorrZ => s.push_str(&format!(
                "CORRZ {} -> {}",
                cs(&self.cbits_in),
                qs(&self.qubits)
            )),
            LocKind::Accept => s.push_str(&format!(
                "ACCEPT {} -> c{}",
                cs(&self.cbits_in),
                self.cbit_out.unwrap()
            )),
            LocKind::DecodeL => s.push_str(&format!(
                "DECODEL {} -> c{}",
                cs(&self.cbits_in),
                self.cbit_out.unwrap()
            )),
        }
        s
    }

    fn parse_token(
        op: &str,
        parse_idx: impl Fn(&str, char) -> Result<usize, String> + Copy,
    ) -> Result<Location, String> {
        let mut guards = Vec::new();
        let mut toks: Vec<&str> = op.split_whitespace().collect();
        while let Some(first) = toks.first() {
            if let Some(rest) = first.strip_prefix('?') {
                let (bit, val) = rest
                    .split_once('=')
                    .ok_or_else(|| format!("bad guard {first}"))?;
                guards.push((parse_idx(bit, 'c')?, val == "1"));
                toks.remove(0);
            } else {
                break;
            }
        }
        let name = *toks.first().ok_or("empty op")?;
        let args = &toks[1..];
        let qubit_args = |args: &[&str]| -> Result<Vec<usize>, String> {
            args.iter().map(|t| parse_idx(t, 'q')).collect()
        };
        let mut loc = Location {
            id: 0,
            kind: LocKind::Wait,
            qubits: vec![],
            cbits_in: vec![],
            cbit_out: None,
            guards,
            timestep: 0,
        };
        match name {
            "X" | "Y" | "Z" | "H" | "T" | "WAIT" | "CNOT" | "PREP" | "TRACE" => {
                loc.kind = match name {
                    "X" => LocKind::PauliX,
                    "Y" => LocKind::PauliY,
                    "Z" => LocKind::PauliZ,
                    "H" => LocKind::Hadamard,
                    "T" => LocKind::TGate,
                    "WAIT" => LocKind::Wait,
                    "CNOT" => LocKind::Cnot,
                    "PREP" => LocKind::PrepareZ,
                    _ => LocKind::Trace,
                };
                loc.qubits = qubit_args(args)?;
            }
            "MEASZ" => {
                loc.kind = LocKind::MeasureZ;
                let arrow = args.iter().position(|&t| t == "->").ok_or("MEASZ needs ->")?;
                loc.qubits = qubit_args(&args[..arrow])?;
                loc.cbit_out = Some(parse_idx(args[arrow + 1], 'c')?);
            }
            "CPX" | "CPZ" => {
                loc.kind = if name == "CPX" {
                    LocKind::CPauliX
                } else {
                    LocKind::CPauliZ
                };
                loc.cbits_in = vec![parse_idx(args[0], 'c')?];
                loc.qubits = qubit_args(&args[1..])?;
            }
            "CORRX" | "CORRZ" | "ACCEPT" | "DECODEL" => {
                loc.kind = match name {
                    "CORRX" => LocKind::CorrX,
                    "CORRZ" => LocKind::CorrZ,
                    "ACCEPT" => LocKind::Accept,
                    _ => LocKind::DecodeL,
                };
                let arrow = args
                    .iter()
                    .position(|&t| t == "->")
                    .ok_or_else(|| format!("{name} needs ->"))?;
                loc.cbits_in = args[..arrow]
                    .iter()
                    .map(|t| parse_idx(t, 'c'))
                    .collect::<Result<_, _>>()?;
                match loc.kind {
                    LocKind::CorrX | LocKind::CorrZ => {
                        loc.qubits = qubit_args(&args[arrow + 1..])?;
                    }
                    _ => loc.cbit_out = Some(parse_idx(args[arrow + 1], 'c')?),
                }
            }
            other => return Err(format!("unknown op {other}")),
        }
        Ok(loc)
    }
}
