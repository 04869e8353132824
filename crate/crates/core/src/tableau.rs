//! Stabilizer-tableau ground-truth engine.
//!
//! The tableau holds 2n rows of Hermitian Pauli strings: n destabilizers
//! followed by n stabilizers. Gates conjugate every row; Z measurements use
//! the standard destabilizer bookkeeping, with coin flips drawn from a
//! per-(trial, location) random stream so independent engines can replay the
//! same run. Faults are inserted exactly per the located-circuit convention:
//! before measurements and traces, after everything else, pairwise after a
//! CNOT.

use serde::{Deserialize, Serialize};

use crate::bits::{hamming_accept, hamming_logical, hamming_position};
use crate::circuit::{CircuitDiagram, FaultLabel, FaultPattern, LocKind, Location};
use crate::pauli::{PauliKind, PauliString};
use crate::rng;
use crate::FtError;

/// Destabilizer/stabilizer tableau of an n-qubit stabilizer state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilizerTableau {
    pub n: usize,
    /// Rows 0..n are destabilizers, rows n..2n stabilizers. Destabilizer
    /// signs are not meaningful and are kept Hermitian by fiat.
    pub rows: Vec<PauliString>,
}

impl StabilizerTableau {
    /// |0⟩^{⊗n}.
    pub fn zero_state(n: usize) -> Self {
        let mut rows = Vec::with_capacity(2 * n);
        for q in 0..n {
            rows.push(PauliString::single(n, q, PauliKind::X));
        }
        for q in 0..n {
            rows.push(PauliString::single(n, q, PauliKind::Z));
        }
        StabilizerTableau { n, rows }
    }

    /// Overwrite one line's (destabilizer, stabilizer) pair, e.g. to prepare
    /// a ±X/±Y/±Z product eigenstate before a run.
    pub fn set_line_state(&mut self, q: usize, stab: PauliKind, negative: bool) {
        let destab_kind = match stab {
            PauliKind::Z | PauliKind::Y => PauliKind::X,
            PauliKind::X => PauliKind::Z,
            PauliKind::I => panic!("stabilizer kind must be nontrivial"),
        };
        self.rows[q] = PauliString::single(self.n, q, destab_kind);
        let mut s = PauliString::single(self.n, q, stab);
        if negative {
            s.mul_phase(2);
        }
        self.rows[self.n + q] = s;
    }

    pub fn stabilizer_rows(&self) -> &[PauliString] {
        &self.rows[self.n..]
    }

    /// Structural sanity: rows Hermitian, stabilizers pairwise commuting,
    /// destabilizer i anticommutes with stabilizer i and commutes with the
    /// other stabilizers.
    pub fn is_valid(&self) -> bool {
        let n = self.n;
        if self.rows.len() != 2 * n {
            return false;
        }
        if self.rows.iter().any(|r| r.phase_exponent() % 2 != 0) {
            return false;
        }
        for i in n..2 * n {
            for j in (i + 1)..2 * n {
                if !self.rows[i].commutes(&self.rows[j]) {
                    return false;
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let commute = self.rows[i].commutes(&self.rows[n + j]);
                if (i == j) == commute {
                    return false;
                }
            }
        }
        true
    }

    fn conj_h(&mut self, q: usize) {
        for r in &mut self.rows {
            r.conj_h(q);
        }
    }

    fn conj_cnot(&mut self, c: usize, t: usize) {
        for r in &mut self.rows {
            r.conj_cnot(c, t);
        }
    }

    /// Conjugate by a Pauli unitary: rows anticommuting with it flip sign.
    pub fn apply_pauli(&mut self, p: &PauliString) {
        for r in &mut self.rows {
            if !r.commutes(p) {
                r.mul_phase(2);
            }
        }
    }

    fn apply_pauli_kind(&mut self, q: usize, kind: PauliKind) {
        if kind == PauliKind::I {
            return;
        }
        let p = PauliString::single(self.n, q, kind);
        self.apply_pauli(&p);
    }

    /// Row multiplication row_h ← row_i · row_h (phases exact for stabilizer
    /// rows; destabilizer rows are re-Hermitized since their sign carries no
    /// information).
    fn rowsum(&mut self, h: usize, i: usize) {
        let prod = self.rows[i].mul(&self.rows[h]);
        self.rows[h] = prod;
        if h < self.n {
            let ph = self.rows[h].phase_exponent() & 2;
            self.rows[h].set_phase_exponent(ph);
        } else {
            assert!(
                self.rows[h].phase_exponent() % 2 == 0,
                "stabilizer rowsum produced a non-Hermitian row"
            );
        }
    }

    /// Measure Z on line q. `coin` resolves a random outcome; ignored when
    /// the outcome is deterministic. Returns the outcome bit.
    pub fn measure_z(&mut self, q: usize, coin: u8) -> u8 {
        let n = self.n;
        let pivot = (n..2 * n).find(|&i| self.rows[i].x_bit(q) == 1);
        match pivot {
            Some(p) => {
                for h in 0..2 * n {
                    if h != p && self.rows[h].x_bit(q) == 1 {
                        self.rowsum(h, p);
                    }
                }
                self.rows[p - n] = self.rows[p].clone();
                // Destabilizer signs are noise; keep the row Hermitian as-is.
                let outcome = coin & 1;
                let mut z = PauliString::single(n, q, PauliKind::Z);
                if outcome == 1 {
                    z.mul_phase(2);
                }
                self.rows[p] = z;
                outcome
            }
            None => {
                // Deterministic: accumulate the stabilizer combination whose
                // product is ±Z_q, selected by destabilizer anticommutation.
                let mut acc = PauliString::identity(n);
                for i in 0..n {
                    if self.rows[i].x_bit(q) == 1 {
                        acc = self.rows[n + i].mul(&acc);
                    }
                }
                debug_assert_eq!(acc.phase_free(), PauliString::single(n, q, PauliKind::Z));
                u8::from(acc.phase_exponent() == 2)
            }
        }
    }

    /// Fresh |0⟩ on line q: measure and correct.
    pub fn prepare_z(&mut self, q: usize, coin: u8) {
        if self.measure_z(q, coin) == 1 {
            self.apply_pauli_kind(q, PauliKind::X);
        }
    }

    /// Expectation value of a Pauli observable on this state: +1/−1 when ±P
    /// is in the stabilizer group, 0 when P anticommutes with some
    /// stabilizer.
    pub fn expectation(&self, p: &PauliString) -> i8 {
        assert_eq!(p.n(), self.n);
        let n = self.n;
        if (n..2 * n).any(|i| !self.rows[i].commutes(p)) {
            return 0;
        }
        let mut acc = PauliString::identity(n);
        for i in 0..n {
            if !self.rows[i].commutes(p) {
                acc = self.rows[n + i].mul(&acc);
            }
        }
        assert_eq!(
            acc.phase_free(),
            p.phase_free(),
            "observable commutes with the group but is not in its span"
        );
        let diff = (4 + acc.phase_exponent() as i16 - p.phase_exponent() as i16) % 4;
        if diff == 0 {
            1
        } else {
            -1
        }
    }

    /// Replace every row by `f(row)` (caller guarantees f is a symplectic
    /// automorphism, e.g. conjugation by a Clifford unitary).
    pub fn map_rows(&mut self, f: impl Fn(&PauliString) -> PauliString) {
        for r in &mut self.rows {
            let mut img = f(r);
            if img.phase_exponent() % 2 != 0 {
                let ph = img.phase_exponent() & 2;
                img.set_phase_exponent(ph);
            }
            *r = img;
        }
    }
}

/// Result of one simulated run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimRecord {
    /// Measurement outcome bits in execution order.
    pub outcomes: Vec<u8>,
    /// Final value of every classical bit.
    pub cbits: Vec<u8>,
    pub final_tableau: Option<StabilizerTableau>,
    pub residual_frame: Option<PauliString>,
}

fn guards_pass(loc: &Location, cbits: &[u8]) -> bool {
    loc.guards.iter().all(|&(b, v)| (cbits[b] == 1) == v)
}

fn word7(cbits: &[u8], bits: &[usize]) -> u64 {
    bits.iter()
        .enumerate()
        .map(|(k, &b)| (cbits[b] as u64) << k)
        .sum()
}

/// Execute the faulty circuit [c]_f on `input` exactly. Coins for random
/// measurement outcomes come from the (master_seed, trial, location) stream.
pub fn run_tableau(
    c: &CircuitDiagram,
    f: &FaultPattern,
    input: &StabilizerTableau,
    master_seed: u64,
    trial: u64,
) -> Result<SimRecord, FtError> {
    use rand::Rng;
    if input.n != c.n_lines {
        return Err(FtError::Invalid(format!(
            "input has {} lines, circuit has {}",
            input.n, c.n_lines
        )));
    }
    if c.ideal && !f.assignments.is_empty() {
        return Err(FtError::Invalid(
            "ideal circuits admit no fault patterns".into(),
        ));
    }
    if !f.covers(c) {
        return Err(FtError::Invalid("pattern does not cover the circuit".into()));
    }
    let mut state = input.clone();
    let mut cbits = vec![0u8; c.n_cbits];
    let mut outcomes = Vec::new();

    for loc in &c.locations {
        let live = guards_pass(loc, &cbits);
        let label = if c.ideal {
            FaultLabel::One(PauliKind::I)
        } else {
            f.label_at(loc)
        };
        let coin = || {
            let mut s = rng::stream(master_seed, rng::DOMAIN_COINS, trial, loc.id as u64);
            s.gen_range(0..2u8)
        };
        match loc.kind {
            LocKind::TGate => {
                return Err(FtError::TGate(format!("location {}", loc.id)));
            }
            LocKind::MeasureZ | LocKind::Trace => {
                // Fault before the location.
                if let FaultLabel::One(k) = label {
                    state.apply_pauli_kind(loc.qubits[0], k);
                }
                if live {
                    let bit = state.measure_z(loc.qubits[0], coin());
                    if loc.kind == LocKind::MeasureZ {
                        cbits[loc.cbit_out.unwrap()] = bit;
                        outcomes.push(bit);
                    }
                }
            }
            LocKind::Cnot => {
                if live {
                    state.conj_cnot(loc.qubits[0], loc.qubits[1]);
                }
                if let FaultLabel::Two(a, b) = label {
                    state.apply_pauli_kind(loc.qubits[0], a);
                    state.apply_pauli_kind(loc.qubits[1], b);
                }
            }
            LocKind::Hadamard
            | LocKind::Wait
            | LocKind::PauliX
            | LocKind::PauliY
            | LocKind::PauliZ
            | LocKind::PrepareZ
            | LocKind::CPauliX
            | LocKind::CPauliZ => {
                if live {
                    match loc.kind {
                        LocKind::Hadamard => state.conj_h(loc.qubits[0]),
                        LocKind::PauliX => state.apply_pauli_kind(loc.qubits[0], PauliKind::X),
                        LocKind::PauliY => state.apply_pauli_kind(loc.qubits[0], PauliKind::Y),
                        LocKind::PauliZ => state.apply_pauli_kind(loc.qubits[0], PauliKind::Z),
                        LocKind::PrepareZ => state.prepare_z(loc.qubits[0], coin()),
                        LocKind::CPauliX => {
                            if cbits[loc.cbits_in[0]] == 1 {
                                state.apply_pauli_kind(loc.qubits[0], PauliKind::X);
                            }
                        }
                        LocKind::CPauliZ => {
                            if cbits[loc.cbits_in[0]] == 1 {
                                state.apply_pauli_kind(loc.qubits[0], PauliKind::Z);
                            }
                        }
                        _ => {}
                    }
                }
                // Fault after the location.
                if let FaultLabel::One(k) = label {
                    state.apply_pauli_kind(loc.qubits[0], k);
                }
            }
            LocKind::CorrX | LocKind::CorrZ => {
                if live {
                    let y = word7(&cbits, &loc.cbits_in);
                    let pos = hamming_position(y);
                    if pos > 0 {
                        let kind = if loc.kind == LocKind::CorrX {
                            PauliKind::X
                        } else {
                            PauliKind::Z
                        };
                        state.apply_pauli_kind(loc.qubits[pos - 1], kind);
                    }
                }
            }
            LocKind::Accept => {
                if live {
                    let y = word7(&cbits, &loc.cbits_in);
                    cbits[loc.cbit_out.unwrap()] = u8::from(hamming_accept(y));
                }
            }
            LocKind::DecodeL => {
                if live {
                    let y = word7(&cbits, &loc.cbits_in);
                    cbits[loc.cbit_out.unwrap()] = hamming_logical(y);
                }
            }
        }
    }

    Ok(SimRecord {
        outcomes,
        cbits,
        final_tableau: Some(state),
        residual_frame: None,
    })
}

/// Noiseless run from the all-|0⟩ input: the standard reference record for
/// frame runs.
pub fn noiseless_reference(c: &CircuitDiagram, master_seed: u64) -> SimRecord {
    run_tableau(
        c,
        &FaultPattern::empty(),
        &StabilizerTableau::zero_state(c.n_lines),
        master_seed,
        0,
    )
    .expect("noiseless run cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::CircuitBuilder;
    use crate::dense::{pauli_matrix, CMat, CVec, ONE};

    #[test]
    fn zero_state_is_valid_and_deterministic() {
        let mut t = StabilizerTableau::zero_state(3);
        assert!(t.is_valid());
        for q in 0..3 {
            assert_eq!(t.measure_z(q, 1), 0, "|0⟩ must measure 0");
        }
    }

    #[test]
    fn prep_measure_and_forced_flip() {
        // prepare |0⟩, measure → 0.
        let mut b = CircuitBuilder::new(1, 1, vec![]);
        b.prep(0);
        b.end_timestep();
        b.measure(0, 0);
        b.end_timestep();
        let c = b.finish(vec![], vec![0]);
        let rec = run_tableau(
            &c,
            &FaultPattern::empty(),
            &StabilizerTableau::zero_state(1),
            1,
            0,
        )
        .unwrap();
        assert_eq!(rec.outcomes, vec![0]);

        // X fault after prep → 1.
        let prep_id = c
            .locations
            .iter()
            .find(|l| l.kind == LocKind::PrepareZ)
            .unwrap()
            .id;
        let f = FaultPattern::single(prep_id, FaultLabel::One(PauliKind::X));
        let rec = run_tableau(&c, &f, &StabilizerTableau::zero_state(1), 1, 0).unwrap();
        assert_eq!(rec.outcomes, vec![1]);
    }

    #[test]
    fn bell_pair_outcomes_correlate() {
        let mut b = CircuitBuilder::new(2, 2, vec![]);
        b.prep(0);
        b.prep(1);
        b.end_timestep();
        b.h(0);
        b.end_timestep();
        b.cnot(0, 1);
        b.end_timestep();
        b.measure(0, 0);
        b.measure(1, 1);
        b.end_timestep();
        let c = b.finish(vec![], vec![0, 1]);
        let mut ones = 0u32;
        let trials = 4000;
        for trial in 0..trials {
            let rec = run_tableau(
                &c,
                &FaultPattern::empty(),
                &StabilizerTableau::zero_state(2),
                3,
                trial,
            )
            .unwrap();
            assert_eq!(rec.outcomes[0], rec.outcomes[1], "Bell outcomes agree");
            ones += rec.outcomes[0] as u32;
        }
        let mean = trials as f64 / 2.0;
        let sd = (trials as f64 * 0.25).sqrt();
        assert!((ones as f64 - mean).abs() < 4.0 * sd);
    }

    /// Bare 3-qubit teleportation with classically controlled corrections.
    fn teleport_circuit() -> CircuitDiagram {
        let mut b = CircuitBuilder::new(3, 2, vec![0]);
        b.prep(1);
        b.prep(2);
        b.end_timestep();
        b.h(1);
        b.end_timestep();
        b.cnot(1, 2);
        b.end_timestep();
        b.cnot(0, 1);
        b.end_timestep();
        b.h(0);
        b.end_timestep();
        b.measure(0, 0);
        b.measure(1, 1);
        b.end_timestep();
        b.cpauli(LocKind::CPauliX, 1, 2);
        b.end_timestep();
        b.cpauli(LocKind::CPauliZ, 0, 2);
        b.end_timestep();
        b.finish(vec![2], vec![])
    }

    #[test]
    fn teleportation_identity_on_all_six_eigenstates() {
        let c = teleport_circuit();
        for kind in [PauliKind::X, PauliKind::Y, PauliKind::Z] {
            for negative in [false, true] {
                for trial in 0..16 {
                    let mut input = StabilizerTableau::zero_state(3);
                    input.set_line_state(0, kind, negative);
                    let rec = run_tableau(&c, &FaultPattern::empty(), &input, 11, trial)
                        .unwrap();
                    let t = rec.final_tableau.unwrap();
                    let mut want = PauliString::single(3, 2, kind);
                    if negative {
                        want.mul_phase(2);
                    }
                    assert_eq!(t.expectation(&want), 1, "{kind:?} neg={negative}");
                }
            }
        }
    }

    /// Three lines: line 2 is measured to set the guard bit, lines 0→1 hold
    /// a guarded CNOT. `set_guard` puts an X on line 2 first.
    fn guarded_cnot_circuit(set_guard: bool) -> (CircuitDiagram, usize) {
        let mut b = CircuitBuilder::new(3, 1, vec![]);
        b.prep(0);
        b.prep(1);
        b.prep(2);
        b.end_timestep();
        if set_guard {
            b.gate(LocKind::PauliX, 2);
        } else {
            b.wait(2);
        }
        b.gate(LocKind::PauliX, 0); // control line to |1⟩
        b.end_timestep();
        b.measure(2, 0);
        b.end_timestep();
        let cnot_id = b.cnot_guarded(0, 1, vec![(0, true)]);
        b.end_timestep();
        (b.finish(vec![0, 1], vec![0]), cnot_id)
    }

    #[test]
    fn guard_false_suppresses_gate_but_not_fault() {
        let z1 = PauliString::single(3, 1, PauliKind::Z);
        let mut neg_z1 = z1.clone();
        neg_z1.mul_phase(2);

        // Guard bit 0: gate suppressed, target stays |0⟩.
        let (c, cnot_id) = guarded_cnot_circuit(false);
        let rec = run_tableau(
            &c,
            &FaultPattern::empty(),
            &StabilizerTableau::zero_state(3),
            5,
            0,
        )
        .unwrap();
        assert_eq!(rec.final_tableau.unwrap().expectation(&z1), 1);

        // Same circuit with an (I, X) fault on the suppressed CNOT: the
        // inserted noise still acts, flipping the target.
        let f = FaultPattern::single(cnot_id, FaultLabel::Two(PauliKind::I, PauliKind::X));
        let rec = run_tableau(&c, &f, &StabilizerTableau::zero_state(3), 5, 0).unwrap();
        assert_eq!(rec.final_tableau.unwrap().expectation(&neg_z1), 1);

        // Guard bit 1: the gate fires and flips the target.
        let (c, _) = guarded_cnot_circuit(true);
        let rec = run_tableau(
            &c,
            &FaultPattern::empty(),
            &StabilizerTableau::zero_state(3),
            5,
            0,
        )
        .unwrap();
        assert_eq!(rec.final_tableau.unwrap().expectation(&neg_z1), 1);
    }

    #[test]
    fn t_gate_rejected() {
        let mut b = CircuitBuilder::new(1, 0, vec![0]);
        b.gate(LocKind::TGate, 0);
        b.end_timestep();
        let c = b.finish(vec![0], vec![]);
        let r = run_tableau(
            &c,
            &FaultPattern::empty(),
            &StabilizerTableau::zero_state(1),
            0,
            0,
        );
        assert!(matches!(r, Err(FtError::TGate(_))));
    }

    #[test]
    fn determinism_same_inputs_same_record() {
        let c = teleport_circuit();
        let mut input = StabilizerTableau::zero_state(3);
        input.set_line_state(0, PauliKind::Y, true);
        let f = FaultPattern::single(3, FaultLabel::One(PauliKind::Y));
        let a = run_tableau(&c, &f, &input, 42, 7).unwrap();
        let b = run_tableau(&c, &f, &input, 42, 7).unwrap();
        assert_eq!(a.outcomes, b.outcomes);
        assert_eq!(a.cbits, b.cbits);
        assert_eq!(a.final_tableau, b.final_tableau);
    }

    // ------------------------------------------------------------------
    // Dense state-vector oracle for fault-free unitary circuits.
    // ------------------------------------------------------------------

    fn apply_1q(state: &mut CVec, n: usize, q: usize, u: &CMat) {
        let stride = 1usize << (n - 1 - q);
        let dim = state.len();
        let mut out = CVec::zeros(dim);
        for i in 0..dim {
            let bit = (i / stride) % 2;
            let base = i - bit * stride;
            for b2 in 0..2 {
                out[i] += u[(bit, b2)] * state[base + b2 * stride];
            }
        }
        *state = out;
    }

    fn apply_cnot(state: &mut CVec, n: usize, c: usize, t: usize) {
        let dim = state.len();
        let cb = 1usize << (n - 1 - c);
        let tb = 1usize << (n - 1 - t);
        let mut out = CVec::zeros(dim);
        for i in 0..dim {
            let j = if i & cb != 0 { i ^ tb } else { i };
            out[j] = state[i];
        }
        *state = out;
    }

    #[test]
    fn random_clifford_circuits_match_dense_states() {
        use rand::Rng;
        let h = CMat::from_shape_vec((2, 2), vec![ONE, ONE, ONE, -ONE])
            .unwrap()
            .mapv(|v| v / (2.0f64).sqrt());
        let x = pauli_matrix(&PauliString::from_label("X").unwrap());
        let y = pauli_matrix(&PauliString::from_label("Y").unwrap());
        let z = pauli_matrix(&PauliString::from_label("Z").unwrap());

        for seed in 0..20u64 {
            let n = 2 + (seed % 3) as usize; // 2..4 qubits
            let mut rng = rng::stream(77, 9, seed, 0);
            let mut b = CircuitBuilder::new(n, 0, (0..n).collect());
            let mut state = CVec::zeros(1 << n);
            state[0] = ONE;
            for _ in 0..12 {
                let gate = rng.gen_range(0..5);
                let q = rng.gen_range(0..n);
                match gate {
                    0 => {
                        b.h(q);
                        apply_1q(&mut state, n, q, &h);
                    }
                    1 => {
                        b.gate(LocKind::PauliX, q);
                        apply_1q(&mut state, n, q, &x);
                    }
                    2 => {
                        b.gate(LocKind::PauliY, q);
                        apply_1q(&mut state, n, q, &y);
                    }
                    3 => {
                        b.gate(LocKind::PauliZ, q);
                        apply_1q(&mut state, n, q, &z);
                    }
                    _ => {
                        let t = (q + 1 + rng.gen_range(0..n - 1)) % n;
                        b.cnot(q, t);
                        apply_cnot(&mut state, n, q, t);
                    }
                }
                b.end_timestep();
            }
            let c = b.finish((0..n).collect(), vec![]);
            let rec = run_tableau(
                &c,
                &FaultPattern::empty(),
                &StabilizerTableau::zero_state(n),
                0,
                0,
            )
            .unwrap();
            let t = rec.final_tableau.unwrap();
            // The dense state must be a +1 eigenstate of every stabilizer row.
            for row in t.stabilizer_rows() {
                let m = pauli_matrix(row);
                let mv: CVec = m.dot(&state);
                let diff: f64 = mv
                    .iter()
                    .zip(state.iter())
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                assert!(diff < 1e-10, "seed {seed}: row {row} not stabilizing");
            }
        }
    }

    #[test]
    fn expectation_values() {
        let mut t = StabilizerTableau::zero_state(2);
        let z0 = PauliString::from_label("ZI").unwrap();
        let x0 = PauliString::from_label("XI").unwrap();
        assert_eq!(t.expectation(&z0), 1);
        assert_eq!(t.expectation(&x0), 0);
        let mut mz0 = z0.clone();
        mz0.mul_phase(2);
        assert_eq!(t.expectation(&mz0), -1);
        // After H on qubit 0: X stabilized.
        t.conj_h(0);
        assert_eq!(t.expectation(&x0), 1);
        assert_eq!(t.expectation(&z0), 0);
    }

    #[test]
    fn corr_and_decode_nodes() {
        // Put a known word into bits 0..6 by measuring prepared lines (with
        // X gates where the word has ones), then CORRX-correct a block and
        // DECODEL the word.
        // Word with a single 1 at position 4 → Hamming position 5 → the
        // correction must hit target line index 4.
        let mut b = CircuitBuilder::new(14, 9, vec![]);
        for q in 0..14 {
            b.prep(q);
        }
        b.end_timestep();
        b.gate(LocKind::PauliX, 4);
        b.end_timestep();
        for q in 0..7 {
            b.measure(q, q);
        }
        b.end_timestep();
        b.classical(LocKind::CorrX, (0..7).collect(), None, (7..14).collect(), vec![]);
        b.classical(LocKind::DecodeL, (0..7).collect(), Some(7), vec![], vec![]);
        b.classical(LocKind::Accept, (0..7).collect(), Some(8), vec![], vec![]);
        b.end_timestep();
        for q in 7..14 {
            b.wait(q);
        }
        b.end_timestep();
        let c = b.finish((7..14).collect(), vec![7, 8]);
        let rec = run_tableau(
            &c,
            &FaultPattern::empty(),
            &StabilizerTableau::zero_state(14),
            0,
            0,
        )
        .unwrap();
        // DECODEL: word 0010000 has position 5; corrected to zero word →
        // logical 0... the raw parity is 1, position ≠ 0 so flip → 0.
        assert_eq!(rec.cbits[7], 0);
        // ACCEPT: not a codeword → reject.
        assert_eq!(rec.cbits[8], 0);
        // CORRX applied X on block line 7 + 4 = 11.
        let t = rec.final_tableau.unwrap();
        let mut want = PauliString::single(14, 11, PauliKind::Z);
        want.mul_phase(2); // X|0⟩ = |1⟩ has ⟨Z⟩ = −1
        assert_eq!(t.expectation(&want), 1);
    }
}
