//! The effective data-qubit channel of one fault-tolerant communication hop.
//!
//! One hop brings an encoded data qubit down to a bare physical qubit
//! through the decode interface (preceded by an error-correction round, its
//! operating context), sends the bare qubit through the physical Pauli
//! channel, and re-encodes it through the encode interface. Relative to an
//! ideal wire the hop acts on the data qubit as
//!
//! ```text
//!     (1 - q) T  +  q N
//! ```
//!
//! where `T` is the physical channel, `q` is the probability that the hop's
//! fault pattern breaks either interface, and `N` is the residual channel on
//! such failures. When both interfaces are correct the inserted channel
//! Pauli passes through unchanged, so the decomposition is exact; `N` soaks
//! up everything else (and depends on `T`, the level and the interfaces).
//! This module extracts the decomposition by Monte Carlo — and exactly at
//! low fault weight — and checks the total-variation budget `2(j1+j2)·c·p`
//! derived from the interface location counts (here `j1 = j2 = 1`).

use rand::Rng;
use rayon::prelude::*;

use crate::circuit::{sample_fault_pattern, FaultPattern, NoiseModel};
use crate::frame::propagate_from;
use crate::interfaces::{
    build_interface, embedded_input, engines_level1, frame_index, hierarchical_class,
    interface_location_counts, kind_from_flips, InterfacePair, ResponseEngine, FRAME_AXES,
};
use crate::pauli::{PauliChannel, PauliKind, PauliString};
use crate::rng::{stream, DOMAIN_CHANNEL};
use crate::steane::{steane_spec, CodeSpec};
use crate::FtError;

/// Salt decorrelating the encoder-side fault stream from the decoder-side.
const ENC_SEED_SALT: u64 = 0xD1B5_4A32_D192_ED03;

/// One extracted hop: the physical channel, the failure weight, the
/// residual channel conditioned on failure, and their mixture.
#[derive(Clone, Debug)]
pub struct EffectiveChannelEstimate {
    pub level: usize,
    pub p: f64,
    pub trials: u64,
    pub physical: PauliChannel,
    /// Probability that the hop's fault pattern breaks an interface.
    pub q_fail: f64,
    pub se_q: f64,
    /// Net-error distribution over the failing trials (a valid channel).
    pub residual: PauliChannel,
    /// The full effective channel (1 − q_fail)·physical + q_fail·residual.
    pub composed: PauliChannel,
    /// Standard error of each composed entry, in I, X, Y, Z order.
    pub entry_se: [f64; 4],
    /// Residual recovered the other way: the known physical contribution
    /// subtracted from the raw all-trials histogram. Sampling noise may push
    /// entries slightly negative; large negatives are flagged below.
    pub residual_subtracted: [f64; 4],
    /// Subtracted-residual entries below −3σ as (kind index, value, 3σ):
    /// any entry here signals a model violation, not sampling noise.
    pub violations: Vec<(usize, f64, f64)>,
    /// Set when produced by the exact low-weight mode.
    pub exact_low_weight: bool,
    /// Exact mode only: probability mass beyond the enumerated weight
    /// (the estimate conditions on the enumerated patterns).
    pub tail_mass: f64,
}

/// Distance of the extracted hop from the bare physical channel, against
/// the linear interface budget.
#[derive(Clone, Copy, Debug)]
pub struct ChannelDistanceReport {
    /// Total-variation distance between the Pauli probability vectors.
    pub tv: f64,
    /// Diamond-norm distance; for Pauli-channel differences this is exactly
    /// the ℓ1 distance of the probability vectors, i.e. 2·tv.
    pub diamond_equiv: f64,
    /// The linear budget 2(j1+j2)·ĉ·p with ĉ the larger interface location
    /// count and j1 = j2 = 1.
    pub bound_rhs: f64,
    /// Statistical scale of tv (the failure-weight standard error).
    pub sigma: f64,
    pub within_budget: bool,
}

fn kind_mul(a: PauliKind, b: PauliKind) -> PauliKind {
    let (ax, az) = a.bits();
    let (bx, bz) = b.bits();
    PauliKind::from_bits(ax ^ bx, az ^ bz)
}

fn kind_prob(t: &PauliChannel, k: PauliKind) -> f64 {
    let mut p = PauliString::identity(1);
    p.set_kind(0, k);
    t.prob(&p)
}

/// The channel's support as (kind, probability) pairs.
fn kind_entries(t: &PauliChannel) -> Vec<(PauliKind, f64)> {
    t.entries().iter().map(|(p, w)| (p.kind_at(0), *w)).collect()
}

fn sample_kind(tk: &[(PauliKind, f64)], seed: u64, trial: u64) -> PauliKind {
    let mut rng = stream(seed, DOMAIN_CHANNEL, trial, 0);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(k, w) in tk {
        acc += w;
        if u < acc {
            return k;
        }
    }
    tk.last().expect("channel has support").0
}

/// Per-frame tables of one hop under a fault pattern pair: `dec[fr]` is the
/// bare-line Pauli the decode side emits for logical input frame `fr`, and
/// `enc[k]` is the logical class the encode side produces for bare input
/// kind `k` (both indexed in I, X, Y, Z order).
struct HopTables {
    dec: [PauliKind; 4],
    enc: [PauliKind; 4],
}

impl HopTables {
    /// Both interfaces correct: the decode side reproduces every frame on
    /// the bare line and the encode side encodes every bare kind faithfully.
    fn correct(&self) -> bool {
        (0..4).all(|fr| self.dec[fr] == FRAME_AXES[fr] && self.enc[fr] == FRAME_AXES[fr])
    }

    /// Net logical error on the data line when `inserted` crosses the bare
    /// segment (the data content itself is the identity frame).
    fn net(&self, inserted: PauliKind) -> PauliKind {
        self.enc[frame_index(kind_mul(self.dec[0], inserted))]
    }
}

fn tables_fast(dec: &ResponseEngine, enc: &ResponseEngine, f_dec: &FaultPattern, f_enc: &FaultPattern) -> HopTables {
    let dv = dec.frame_values(f_dec);
    let ev = enc.frame_values(f_enc);
    HopTables {
        dec: core::array::from_fn(|fr| kind_from_flips(dv[fr].0, dv[fr].1)),
        enc: core::array::from_fn(|fr| kind_from_flips(ev[fr].0, ev[fr].1)),
    }
}

fn tables_full(
    spec: &CodeSpec,
    pair: &InterfacePair,
    f_dec: &FaultPattern,
    f_enc: &FaultPattern,
) -> Result<HopTables, FtError> {
    let c_dec = &pair.dec_test_circuit;
    let out = c_dec.output_lines[0];
    let mut dec = [PauliKind::I; 4];
    for fr in 0..4 {
        let init = embedded_input(spec, c_dec, pair.level, FRAME_AXES[fr]);
        let run = propagate_from(c_dec, f_dec, init)?;
        dec[fr] = run.deviation.kind_at(out);
    }
    let c_enc = &pair.enc_circuit;
    let mut enc = [PauliKind::I; 4];
    for fr in 0..4 {
        let mut init = PauliString::identity(c_enc.n_lines);
        if FRAME_AXES[fr] != PauliKind::I {
            init.set_kind(c_enc.input_lines[0], FRAME_AXES[fr]);
        }
        let run = propagate_from(c_enc, f_enc, init)?;
        let (x, z) = hierarchical_class(spec, &run.deviation, &c_enc.output_lines, pair.level);
        enc[fr] = kind_from_flips(x, z);
    }
    Ok(HopTables { dec, enc })
}

/// Finish an estimate from accumulated masses. `mass_correct` and
/// `fail_hist` are probability masses (Monte Carlo: counts / trials).
#[allow(clippy::too_many_arguments)]
fn assemble(
    level: usize,
    p: f64,
    trials: u64,
    t: &PauliChannel,
    mass_correct: f64,
    fail_hist: [f64; 4],
    raw_hist: [f64; 4],
    entry_se: [f64; 4],
    se_q: f64,
    exact_low_weight: bool,
    tail_mass: f64,
) -> EffectiveChannelEstimate {
    let q_fail: f64 = fail_hist.iter().sum();
    let kind_of = |i: usize| {
        let mut s = PauliString::identity(1);
        s.set_kind(0, FRAME_AXES[i]);
        s
    };
    let residual = if q_fail > 0.0 {
        PauliChannel::from_pairs(1, (0..4).map(|i| (kind_of(i), fail_hist[i] / q_fail)))
    } else {
        t.clone()
    };
    let composed = PauliChannel::from_pairs(
        1,
        (0..4).map(|i| {
            let w = mass_correct * kind_prob(t, FRAME_AXES[i]) + fail_hist[i];
            (kind_of(i), w)
        }),
    );
    let mut residual_subtracted = [0.0; 4];
    let mut violations = Vec::new();
    if q_fail > 0.0 {
        for i in 0..4 {
            let sub = (raw_hist[i] - mass_correct * kind_prob(t, FRAME_AXES[i])) / q_fail;
            residual_subtracted[i] = sub;
            if trials > 0 {
                let se_raw = (raw_hist[i] * (1.0 - raw_hist[i]) / trials as f64).sqrt();
                let three_sigma = 3.0 * se_raw / q_fail;
                if sub < -three_sigma {
                    violations.push((i, sub, three_sigma));
                }
            }
        }
    }
    EffectiveChannelEstimate {
        level,
        p,
        trials,
        physical: t.clone(),
        q_fail,
        se_q,
        residual,
        composed,
        entry_se,
        residual_subtracted,
        violations,
        exact_low_weight,
        tail_mass,
    }
}

/// Monte-Carlo extraction of the effective hop channel.
pub fn extract(
    t: &PauliChannel,
    level: usize,
    p: f64,
    trials: u64,
    seed: u64,
) -> Result<EffectiveChannelEstimate, FtError> {
    if t.n() != 1 {
        return Err(FtError::Invalid(format!(
            "the physical channel must act on one qubit, got {}",
            t.n()
        )));
    }
    if trials == 0 {
        return Err(FtError::Invalid("extraction needs at least one trial".into()));
    }
    let pair = build_interface(level)?;
    let spec = steane_spec();
    let nm = NoiseModel::new(p);
    let tk = kind_entries(t);
    let fast = if level == 1 { Some(engines_level1()?) } else { None };

    let (n_fail, fail_counts, raw_counts) = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let f_dec = sample_fault_pattern(&pair.dec_test_circuit, &nm, seed, trial);
            let f_enc = sample_fault_pattern(&pair.enc_circuit, &nm, seed ^ ENC_SEED_SALT, trial);
            let inserted = sample_kind(&tk, seed, trial);
            let tables = match fast {
                Some((enc_eng, dec_eng)) => tables_fast(dec_eng, enc_eng, &f_dec, &f_enc),
                None => tables_full(&spec, &pair, &f_dec, &f_enc)
                    .expect("sampled pattern covers the circuit"),
            };
            let correct = tables.correct();
            let net = frame_index(tables.net(inserted));
            let mut fail = [0u64; 4];
            let mut raw = [0u64; 4];
            raw[net] = 1;
            if !correct {
                fail[net] = 1;
            }
            (u64::from(!correct), fail, raw)
        })
        .reduce(
            || (0u64, [0u64; 4], [0u64; 4]),
            |a, b| {
                (
                    a.0 + b.0,
                    core::array::from_fn(|i| a.1[i] + b.1[i]),
                    core::array::from_fn(|i| a.2[i] + b.2[i]),
                )
            },
        );

    let n = trials as f64;
    let q = n_fail as f64 / n;
    let se_q = (q * (1.0 - q) / n).sqrt();
    let fail_hist: [f64; 4] = core::array::from_fn(|i| fail_counts[i] as f64 / n);
    let raw_hist: [f64; 4] = core::array::from_fn(|i| raw_counts[i] as f64 / n);
    // Per-trial contribution to a composed entry is T[k] on correct trials
    // and an indicator on failing ones; its second moment gives the se.
    let entry_se: [f64; 4] = core::array::from_fn(|i| {
        let tk_i = kind_prob(t, FRAME_AXES[i]);
        let mean = (1.0 - q) * tk_i + fail_hist[i];
        let second = ((trials - n_fail) as f64 * tk_i * tk_i + fail_counts[i] as f64) / n;
        ((second - mean * mean).max(0.0) / n).sqrt()
    });
    Ok(assemble(level, p, trials, t, 1.0 - q, fail_hist, raw_hist, entry_se, se_q, false, 0.0))
}

/// Exact extraction over all fault patterns of weight ≤ 1 at level 1: the
/// estimate conditions on at most one fault across the hop, with the
/// ignored mass reported in `tail_mass`. No statistical error.
pub fn extract_exact_weight1(t: &PauliChannel, p: f64) -> Result<EffectiveChannelEstimate, FtError> {
    if t.n() != 1 {
        return Err(FtError::Invalid(format!(
            "the physical channel must act on one qubit, got {}",
            t.n()
        )));
    }
    let (enc_eng, dec_eng) = engines_level1()?;
    let tk = kind_entries(t);
    let l = (dec_eng.slot_count() + enc_eng.slot_count()) as f64;
    let m0 = (1.0 - p).powf(l);
    let m1 = (p / 3.0) * (1.0 - p).powf(l - 1.0);

    let mut mass_correct = 0.0;
    let mut fail_hist = [0.0; 4];
    let empty = FaultPattern::empty();
    let mut account = |tables: &HopTables, mass: f64| {
        if tables.correct() {
            mass_correct += mass;
        } else {
            for &(k, w) in &tk {
                fail_hist[frame_index(tables.net(k))] += mass * w;
            }
        }
    };
    account(&tables_fast(dec_eng, enc_eng, &empty, &empty), m0);
    for (eng, is_dec) in [(dec_eng, true), (enc_eng, false)] {
        for s in 0..eng.slot_count() {
            for k in [PauliKind::X, PauliKind::Y, PauliKind::Z] {
                let f = eng.pattern_for(&[(s, k)]);
                let tables = if is_dec {
                    tables_fast(dec_eng, enc_eng, &f, &empty)
                } else {
                    tables_fast(dec_eng, enc_eng, &empty, &f)
                };
                account(&tables, m1);
            }
        }
    }
    let total = m0 + l * 3.0 * m1;
    mass_correct /= total;
    for h in fail_hist.iter_mut() {
        *h /= total;
    }
    // The conditional composed distribution doubles as the raw histogram:
    // correct mass contributes T exactly.
    let raw_hist: [f64; 4] =
        core::array::from_fn(|i| mass_correct * kind_prob(t, FRAME_AXES[i]) + fail_hist[i]);
    Ok(assemble(1, p, 0, t, mass_correct, fail_hist, raw_hist, [0.0; 4], 0.0, true, 1.0 - total))
}

/// Distance of the extracted hop from the bare physical channel against the
/// linear interface budget (Pauli-sector diamond distance = 2·tv).
pub fn distance_to_ideal(est: &EffectiveChannelEstimate) -> Result<ChannelDistanceReport, FtError> {
    let tv = est.composed.tv_distance(&est.physical);
    let (loc_enc, loc_dec) = interface_location_counts()?;
    let c_hat = loc_enc.max(loc_dec) as f64;
    let bound_rhs = 4.0 * c_hat * est.p;
    let sigma = est.se_q;
    Ok(ChannelDistanceReport {
        tv,
        diamond_equiv: 2.0 * tv,
        bound_rhs,
        sigma,
        within_budget: tv <= bound_rhs + 4.0 * sigma,
    })
}
