//! Single-photon BB84 with a lossy channel and a probabilistic-resend
//! attacker.
//!
//! Eve sits next to Adam's transmitter, measures a fraction `f` of the
//! qubits (Breidbart basis by default), deletes the ones whose outcome she
//! dislikes and forwards the rest to Babe over a lossless line. Deleted
//! qubits look like ordinary channel loss to the users, but the surviving
//! sifted key is no longer uniformly distributed from Eve's point of view.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, check_range, Error, Result};
use crate::qubit::{
    bb84_ensemble, bb84_state, born_probability, measure_and_resend, Bb84Basis, MeasBasis,
    OutcomeTable, QubitState,
};
use crate::rng::TrialStreams;

/// What Eve does with her measurement outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DeletionPolicy {
    None,
    /// Delete every qubit she measured as bit 1.
    DeleteBitOne,
    /// Delete outcomes whose posterior confidence (over the four BB84 states)
    /// is below the threshold.
    DeleteLowConfidence(f64),
}

impl DeletionPolicy {
    fn deletes(&self, outcome: bool, table: &OutcomeTable) -> bool {
        match *self {
            DeletionPolicy::None => false,
            DeletionPolicy::DeleteBitOne => table.guess(outcome),
            DeletionPolicy::DeleteLowConfidence(t) => table.confidence(outcome) < t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bb84Config {
    pub n_sent: u64,
    /// Channel transmittance for qubits Eve leaves alone.
    pub eta: f64,
    pub attack_fraction: f64,
    pub attack_basis: MeasBasis,
    pub deletion_policy: DeletionPolicy,
    /// Fraction of the sifted key disclosed for the QBER check.
    pub check_fraction: f64,
    pub qber_threshold: f64,
    /// Independent flip probability at Babe's detector.
    pub intrinsic_error: f64,
    /// Eve lowers the attack fraction and adds extra loss on unattacked
    /// qubits so that Babe's arrival rate equals `eta` exactly.
    pub match_arrival_rate: bool,
}

impl Default for Bb84Config {
    fn default() -> Self {
        Self {
            n_sent: 100_000,
            eta: 0.1,
            attack_fraction: 0.0,
            attack_basis: MeasBasis::breidbart(),
            deletion_policy: DeletionPolicy::None,
            check_fraction: 0.5,
            qber_threshold: 0.11,
            intrinsic_error: 0.0,
            match_arrival_rate: false,
        }
    }
}

impl Bb84Config {
    pub fn validate(&self) -> Result<()> {
        if self.n_sent == 0 {
            return Err(Error::OutOfRange {
                name: "n_sent",
                value: 0.0,
                allowed: "[1,inf)",
            });
        }
        check_range("eta", self.eta, "(0,1]", self.eta > 0.0 && self.eta <= 1.0)?;
        check_probability("attack_fraction", self.attack_fraction)?;
        check_range(
            "check_fraction",
            self.check_fraction,
            "(0,1]",
            self.check_fraction > 0.0 && self.check_fraction <= 1.0,
        )?;
        check_probability("qber_threshold", self.qber_threshold)?;
        check_probability("intrinsic_error", self.intrinsic_error)?;
        if let DeletionPolicy::DeleteLowConfidence(t) = self.deletion_policy {
            check_probability("confidence_threshold", t)?;
        }
        Ok(())
    }

    fn outcome_table(&self) -> OutcomeTable {
        OutcomeTable::new(&bb84_ensemble(), &self.attack_basis)
    }

    /// Probability that Eve keeps an attacked qubit.
    pub fn keep_probability(&self) -> f64 {
        let table = self.outcome_table();
        [false, true]
            .into_iter()
            .filter(|&o| !self.deletion_policy.deletes(o, &table))
            .map(|o| table.outcome_mass(o))
            .sum()
    }

    /// Attack fraction and unattacked survival probability actually used.
    pub fn effective_attack(&self) -> EffectiveAttack {
        if !self.match_arrival_rate {
            return EffectiveAttack {
                attack_fraction: self.attack_fraction,
                unattacked_survival: self.eta,
            };
        }
        let k = self.keep_probability();
        let mut f = self.attack_fraction;
        if k > 0.0 {
            f = f.min(self.eta / k);
        }
        if k < 1.0 {
            f = f.min((1.0 - self.eta) / (1.0 - k));
        }
        let survival = if f < 1.0 {
            ((self.eta - f * k) / (1.0 - f)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        EffectiveAttack {
            attack_fraction: f,
            unattacked_survival: survival,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveAttack {
    pub attack_fraction: f64,
    pub unattacked_survival: f64,
}

/// What happened to one sent qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitRecord {
    pub adam_bit: bool,
    pub adam_basis: Bb84Basis,
    pub attacked: bool,
    pub eve_outcome: Option<bool>,
    pub deleted: bool,
    pub arrived: bool,
    pub babe_basis: Option<Bb84Basis>,
    pub babe_bit: Option<bool>,
}

impl QubitRecord {
    pub fn is_sifted(&self) -> bool {
        self.arrived && self.babe_basis == Some(self.adam_basis)
    }

    pub fn is_lost(&self) -> bool {
        !self.deleted && !self.arrived
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionCounts {
    pub sent: u64,
    pub attacked: u64,
    pub deleted: u64,
    pub lost: u64,
    pub arrived: u64,
    pub sifted: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionTranscript {
    /// Per-qubit records; empty after [`SessionTranscript::compact`].
    pub records: Vec<QubitRecord>,
    pub counts: SessionCounts,
    /// Adam's bits at the sifted positions (K″).
    pub sifted_key: Vec<bool>,
    /// Babe's bits at the same positions.
    pub babe_sifted: Vec<bool>,
    /// Indices into `sifted_key` disclosed for the QBER check, ascending.
    pub checked_positions: Vec<usize>,
    /// Indices into `sifted_key` that remain as key, ascending.
    pub key_positions: Vec<usize>,
    pub qber_observed: Option<f64>,
    pub aborted: bool,
}

impl SessionTranscript {
    /// A transcript made directly from sifted bit strings.
    pub fn from_sifted(adam: Vec<bool>, babe: Vec<bool>) -> Self {
        assert_eq!(adam.len(), babe.len());
        let n = adam.len() as u64;
        Self {
            counts: SessionCounts {
                sent: n,
                arrived: n,
                sifted: n,
                ..Default::default()
            },
            key_positions: (0..adam.len()).collect(),
            sifted_key: adam,
            babe_sifted: babe,
            ..Default::default()
        }
    }

    /// Drop per-qubit records, keeping counts and keys.
    pub fn compact(mut self) -> Self {
        self.records = Vec::new();
        self
    }

    pub fn key_bits(&self) -> impl Iterator<Item = bool> + '_ {
        self.key_positions.iter().map(|&i| self.sifted_key[i])
    }

    /// Every sent qubit is deleted, lost or arrived; sifted ⊂ arrived;
    /// checked and key bits partition the sifted key.
    pub fn check_conservation(&self) -> Result<()> {
        let c = &self.counts;
        let mut ok = c.deleted + c.lost + c.arrived == c.sent
            && c.sifted <= c.arrived
            && c.sifted as usize == self.sifted_key.len()
            && self.checked_positions.len() + self.key_positions.len() == self.sifted_key.len();
        if !self.records.is_empty() {
            ok &= self.records.len() as u64 == c.sent
                && self.records.iter().filter(|r| r.is_sifted()).count() as u64 == c.sifted
                && self.records.iter().all(|r| !(r.deleted && r.arrived))
                && self.records.iter().all(|r| r.attacked || !r.deleted);
        }
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("qubit bookkeeping broken: {c:?}")))
        }
    }
}

/// Run one session of `config.n_sent` qubits.
pub fn run_session<R: Rng + ?Sized>(config: &Bb84Config, rng: &mut R) -> Result<SessionTranscript> {
    config.validate()?;
    let table = config.outcome_table();
    let attack = config.effective_attack();
    let mut t = SessionTranscript {
        records: Vec::with_capacity(config.n_sent as usize),
        ..Default::default()
    };
    for _ in 0..config.n_sent {
        let adam_bit = rng.random_bool(0.5);
        let adam_basis = Bb84Basis::from_bit(rng.random_bool(0.5));
        let mut state = bb84_state(adam_bit, adam_basis);
        let mut rec = QubitRecord {
            adam_bit,
            adam_basis,
            attacked: false,
            eve_outcome: None,
            deleted: false,
            arrived: false,
            babe_basis: None,
            babe_bit: None,
        };
        if attack.attack_fraction > 0.0 && rng.random_bool(attack.attack_fraction) {
            rec.attacked = true;
            let (outcome, resent) = measure_and_resend(&state, &config.attack_basis, rng);
            rec.eve_outcome = Some(outcome);
            rec.deleted = config.deletion_policy.deletes(outcome, &table);
            rec.arrived = !rec.deleted;
            state = resent;
        } else {
            rec.arrived = rng.random_bool(attack.unattacked_survival);
        }
        if rec.arrived {
            let babe_basis = Bb84Basis::from_bit(rng.random_bool(0.5));
            let (mut bit, _) = measure_and_resend(&state, &babe_basis.meas_basis(), rng);
            if config.intrinsic_error > 0.0 && rng.random_bool(config.intrinsic_error) {
                bit = !bit;
            }
            rec.babe_basis = Some(babe_basis);
            rec.babe_bit = Some(bit);
        }
        let c = &mut t.counts;
        c.sent += 1;
        c.attacked += rec.attacked as u64;
        c.deleted += rec.deleted as u64;
        c.lost += rec.is_lost() as u64;
        c.arrived += rec.arrived as u64;
        if rec.is_sifted() {
            c.sifted += 1;
            t.sifted_key.push(rec.adam_bit);
            t.babe_sifted.push(rec.babe_bit.unwrap_or_default());
        }
        t.records.push(rec);
    }
    match estimate_qber(&mut t, config.check_fraction, rng) {
        Ok(q) => t.aborted = q > config.qber_threshold,
        Err(Error::EmptySift) => t.aborted = true,
        Err(e) => return Err(e),
    }
    Ok(t)
}

/// Disclose a random `check_fraction` of the sifted key (at least one bit),
/// record the disagreement rate and remove the checked bits from the key.
pub fn estimate_qber<R: Rng + ?Sized>(
    transcript: &mut SessionTranscript,
    check_fraction: f64,
    rng: &mut R,
) -> Result<f64> {
    check_range(
        "check_fraction",
        check_fraction,
        "(0,1]",
        check_fraction > 0.0 && check_fraction <= 1.0,
    )?;
    let n = transcript.sifted_key.len();
    if n == 0 {
        return Err(Error::EmptySift);
    }
    let count = ((check_fraction * n as f64).round() as usize).clamp(1, n);
    let mut checked = index::sample(rng, n, count).into_vec();
    checked.sort_unstable();
    let mut is_checked = vec![false; n];
    for &i in &checked {
        is_checked[i] = true;
    }
    let errors = checked
        .iter()
        .filter(|&&i| transcript.sifted_key[i] != transcript.babe_sifted[i])
        .count();
    let qber = errors as f64 / count as f64;
    transcript.key_positions = (0..n).filter(|&i| !is_checked[i]).collect();
    transcript.checked_positions = checked;
    transcript.qber_observed = Some(qber);
    Ok(qber)
}

/// Deviation of the pooled key's zero frequency from 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyBiasReport {
    pub n_key_bits: u64,
    pub zero_fraction: f64,
    /// Binomial standard deviation `1/(2√n)` of the zero fraction under a uniform key.
    pub expected_fluctuation: f64,
    pub bias_sigmas: f64,
    pub sessions_used: usize,
    pub sessions_aborted: usize,
}

/// Pool the key bits (check bits excluded) of all non-aborted sessions.
pub fn key_bias_report(transcripts: &[SessionTranscript]) -> Result<KeyBiasReport> {
    let mut n = 0u64;
    let mut zeros = 0u64;
    let mut used = 0;
    for t in transcripts.iter().filter(|t| !t.aborted) {
        used += 1;
        for bit in t.key_bits() {
            n += 1;
            zeros += (!bit) as u64;
        }
    }
    if used == 0 {
        return Err(Error::AllAborted);
    }
    if n == 0 {
        return Err(Error::EmptySift);
    }
    let zero_fraction = zeros as f64 / n as f64;
    let expected_fluctuation = 0.5 / (n as f64).sqrt();
    Ok(KeyBiasReport {
        n_key_bits: n,
        zero_fraction,
        expected_fluctuation,
        bias_sigmas: (zero_fraction - 0.5) / expected_fluctuation,
        sessions_used: used,
        sessions_aborted: transcripts.len() - used,
    })
}

/// Largest attack fraction that keeps the added error within `qber_budget`.
pub fn max_attack_fraction(qber_budget: f64, per_attacked_error: f64) -> Result<f64> {
    check_range(
        "per_attacked_error",
        per_attacked_error,
        "(0,1]",
        per_attacked_error > 0.0 && per_attacked_error <= 1.0,
    )?;
    check_range("qber_budget", qber_budget, "[0,inf)", qber_budget >= 0.0)?;
    Ok((qber_budget / per_attacked_error).min(1.0))
}

/// Error rate Eve's measure-and-resend in `basis` causes on a sifted qubit.
pub fn per_attacked_error(basis: &MeasBasis) -> f64 {
    let mut err = 0.0;
    for adam_basis in [Bb84Basis::Z, Bb84Basis::X] {
        for bit in [false, true] {
            let (p0, p1) = basis_probabilities(&bb84_state(bit, adam_basis), basis);
            for (outcome, p_e) in [(false, p0), (true, p1)] {
                let (b0, b1) = basis_probabilities(&basis.eigenstate(outcome), &adam_basis.meas_basis());
                err += 0.25 * p_e * if bit { b0 } else { b1 };
            }
        }
    }
    err
}

fn basis_probabilities(state: &QubitState, basis: &MeasBasis) -> (f64, f64) {
    // states here are built from basis eigenstates and are normalized
    born_probability(state, basis).unwrap_or((0.5, 0.5))
}

/// Closed-form per-qubit statistics of a session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionExpectation {
    pub arrival_rate: f64,
    pub sifted_rate: f64,
    /// Share of the sifted key that Eve attacked and forwarded.
    pub attacked_share: f64,
    pub zero_fraction: f64,
    pub qber: f64,
}

/// Enumerate every state, Eve outcome and Babe outcome to get the expected
/// arrival rate, sifted zero fraction and QBER.
pub fn expected_statistics(config: &Bb84Config) -> Result<SessionExpectation> {
    config.validate()?;
    let table = config.outcome_table();
    let attack = config.effective_attack();
    let eps = config.intrinsic_error;
    let (mut arrived, mut sifted, mut attacked_sifted, mut zeros, mut errors) =
        (0.0, 0.0, 0.0, 0.0, 0.0);
    for basis in [Bb84Basis::Z, Bb84Basis::X] {
        for bit in [false, true] {
            let state = bb84_state(bit, basis);
            let prior = 0.25;
            let mut paths: Vec<(f64, QubitState, bool)> = vec![(
                (1.0 - attack.attack_fraction) * attack.unattacked_survival,
                state,
                false,
            )];
            let (p0, p1) = born_probability(&state, &config.attack_basis)?;
            for (outcome, p) in [(false, p0), (true, p1)] {
                if !config.deletion_policy.deletes(outcome, &table) {
                    paths.push((
                        attack.attack_fraction * p,
                        config.attack_basis.eigenstate(outcome),
                        true,
                    ));
                }
            }
            for (w, s, attacked) in paths {
                let w = prior * w;
                arrived += w;
                let ws = 0.5 * w;
                sifted += ws;
                if attacked {
                    attacked_sifted += ws;
                }
                if !bit {
                    zeros += ws;
                }
                let (b0, b1) = born_probability(&s, &basis.meas_basis())?;
                let wrong = if bit { b0 } else { b1 };
                errors += ws * (wrong * (1.0 - eps) + (1.0 - wrong) * eps);
            }
        }
    }
    Ok(SessionExpectation {
        arrival_rate: arrived,
        sifted_rate: sifted,
        attacked_share: attacked_sifted / sifted,
        zero_fraction: zeros / sifted,
        qber: errors / sifted,
    })
}

/// Run `n_sessions` independent sessions (trial `i` uses stream `i`),
/// returning compacted transcripts in trial order.
pub fn run_ensemble(
    config: &Bb84Config,
    n_sessions: u64,
    streams: &TrialStreams,
) -> Result<Vec<SessionTranscript>> {
    (0..n_sessions)
        .into_par_iter()
        .map(|i| {
            let t = run_session(config, &mut streams.stream(i, "bb84.session"))?;
            t.check_conservation()?;
            Ok(t.compact())
        })
        .collect()
}
