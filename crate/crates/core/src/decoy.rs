//! Attenuated-laser sources, photon-number splitting, coherent beam
//! splitting and decoy-state yield checks.
//!
//! A pulse is kept in two views at once: the definite coherent amplitude
//! `√S·e^{iφ}` and, once sampled, the photon count `n ~ Poisson(S)`. Coherent
//! splitting divides the amplitude deterministically; splitting in the
//! photon-number picture can only move whole photons, binomially.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::error::{check_probability, check_range, Error, Result};
use crate::rng::TrialStreams;

const BATCH: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyLevel {
    /// Mean photon number `S`.
    pub mean_photons: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoyScheme {
    levels: Vec<DecoyLevel>,
    signal_index: usize,
}

impl DecoyScheme {
    pub fn new(levels: Vec<DecoyLevel>, signal_index: usize) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        let mut sum = 0.0;
        for (i, l) in levels.iter().enumerate() {
            check_range("S", l.mean_photons, "[0,inf)", l.mean_photons >= 0.0)?;
            check_probability("level probability", l.probability)?;
            if levels[..i].iter().any(|o| o.mean_photons == l.mean_photons) {
                return Err(Error::DuplicateLevel(l.mean_photons));
            }
            sum += l.probability;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::BadPriors { sum });
        }
        if signal_index >= levels.len() {
            return Err(Error::Invalid(format!(
                "signal_index {signal_index} out of range for {} levels",
                levels.len()
            )));
        }
        Ok(Self {
            levels,
            signal_index,
        })
    }

    /// A signal level plus one decoy level; the signal is level 0.
    pub fn signal_and_decoy(s_signal: f64, s_decoy: f64, p_signal: f64) -> Result<Self> {
        Self::new(
            vec![
                DecoyLevel {
                    mean_photons: s_signal,
                    probability: p_signal,
                },
                DecoyLevel {
                    mean_photons: s_decoy,
                    probability: 1.0 - p_signal,
                },
            ],
            0,
        )
    }

    pub fn levels(&self) -> &[DecoyLevel] {
        &self.levels
    }

    pub fn signal_index(&self) -> usize {
        self.signal_index
    }

    fn pick_level<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, l) in self.levels.iter().enumerate() {
            acc += l.probability;
            if u < acc {
                return i;
            }
        }
        self.levels.len() - 1
    }
}

/// What leaves Eve's station towards Babe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Forwarded {
    /// Eve did not touch the pulse; it goes through the ordinary lossy channel.
    Untouched,
    /// Remaining coherent amplitude, over a lossless line.
    Amplitude(Complex64),
    /// Remaining photon count, over a lossless line.
    Count(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseRecord {
    pub level: usize,
    pub s_level: f64,
    /// Pulse phase; definite for the pulse, unknown to Eve's classical record.
    pub phase: f64,
    pub amplitude: Complex64,
    pub realized_n: Option<u64>,
    pub eve_split_photons: u64,
    pub eve_split_amplitude: Complex64,
    pub forwarded: Forwarded,
    pub deleted: bool,
    pub tagged: bool,
    /// Babe's click, once the pulse has been transmitted.
    pub detected: Option<bool>,
}

impl PulseRecord {
    pub fn new(level: usize, s_level: f64, phase: f64) -> Self {
        Self {
            level,
            s_level,
            phase,
            amplitude: Complex64::from_polar(s_level.sqrt(), phase),
            realized_n: None,
            eve_split_photons: 0,
            eve_split_amplitude: Complex64::new(0.0, 0.0),
            forwarded: Forwarded::Untouched,
            deleted: false,
            tagged: false,
            detected: None,
        }
    }

    /// Sample the photon count of the pulse if not done yet.
    pub fn sample_photon_count<R: Rng + ?Sized>(&mut self, rng: &mut R) -> u64 {
        *self
            .realized_n
            .get_or_insert_with(|| poisson_sample(self.s_level, rng))
    }
}

/// `Poisson(mean)`, with the degenerate `mean = 0` case.
pub fn poisson_sample<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let n: f64 = Poisson::new(mean).expect("positive finite mean").sample(rng);
    n as u64
}

/// Photon count registered by an ideal counter on a coherent amplitude.
pub fn photon_count<R: Rng + ?Sized>(amplitude: Complex64, rng: &mut R) -> u64 {
    poisson_sample(amplitude.norm_sqr(), rng)
}

/// Emit one pulse: pick a level, draw a uniform phase. The photon count is
/// left unsampled.
pub fn emit_pulse<R: Rng + ?Sized>(scheme: &DecoyScheme, rng: &mut R) -> PulseRecord {
    let level = scheme.pick_level(rng);
    let phase = rng.random_range(0.0..2.0 * PI);
    PulseRecord::new(level, scheme.levels[level].mean_photons, phase)
}

/// Emit one pulse and sample its photon count.
pub fn emit_pulse_with_count<R: Rng + ?Sized>(scheme: &DecoyScheme, rng: &mut R) -> PulseRecord {
    let mut p = emit_pulse(scheme, rng);
    p.sample_photon_count(rng);
    p
}

/// Photon-number splitting: from a multi-photon pulse Eve keeps one photon
/// and forwards the rest losslessly; the pulse becomes tagged.
pub fn pns_split(pulse: &PulseRecord) -> Result<PulseRecord> {
    let n = pulse.realized_n.ok_or(Error::PhotonCountMissing)?;
    let mut out = *pulse;
    if n >= 2 {
        out.eve_split_photons = 1;
        out.forwarded = Forwarded::Count(n - 1);
        out.tagged = true;
    }
    Ok(out)
}

/// Coherent beam splitting: Eve takes amplitude `√κ·α`, `√(1-κ)·α` goes on.
pub fn coherent_split(pulse: &PulseRecord, kappa: f64) -> Result<PulseRecord> {
    check_probability("kappa", kappa)?;
    let mut out = *pulse;
    out.eve_split_amplitude = kappa.sqrt() * pulse.amplitude;
    out.forwarded = Forwarded::Amplitude((1.0 - kappa).sqrt() * pulse.amplitude);
    Ok(out)
}

/// Splitting in the photon-number picture: each photon independently goes
/// to Eve with probability `κ`. Returns `(eve, forwarded)` counts.
pub fn binomial_split<R: Rng + ?Sized>(
    pulse: &PulseRecord,
    kappa: f64,
    rng: &mut R,
) -> Result<(u64, u64)> {
    check_probability("kappa", kappa)?;
    let n = pulse.realized_n.ok_or(Error::PhotonCountMissing)?;
    let eve = Binomial::new(n, kappa)
        .map_err(|e| Error::Invalid(e.to_string()))?
        .sample(rng);
    Ok((eve, n - eve))
}

fn poisson_log_weight(k: u64, mean: f64) -> f64 {
    if mean <= 0.0 {
        if k == 0 {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        k as f64 * mean.ln() - mean
    }
}

/// `P(k; mean)`.
pub fn poisson_pmf(k: u64, mean: f64) -> f64 {
    (poisson_log_weight(k, mean) - ln_gamma(k as f64 + 1.0)).exp()
}

fn check_priors(priors: (f64, f64)) -> Result<()> {
    check_probability("prior_a", priors.0)?;
    check_probability("prior_b", priors.1)?;
    let sum = priors.0 + priors.1;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::BadPriors { sum });
    }
    Ok(())
}

/// Likelihood-ratio decision between `Poisson(κ·s_a)` and `Poisson(κ·s_b)`
/// given a count on Eve's arm; `true` means level a. Ties go to a.
pub fn likelihood_ratio_decision(
    count: u64,
    kappa: f64,
    s_a: f64,
    s_b: f64,
    priors: (f64, f64),
) -> bool {
    let la = priors.0.ln() + poisson_log_weight(count, kappa * s_a);
    let lb = priors.1.ln() + poisson_log_weight(count, kappa * s_b);
    la >= lb
}

fn count_cutoff(means: &[f64]) -> u64 {
    let m = means.iter().copied().fold(0.0, f64::max);
    (m + 20.0 * m.sqrt() + 60.0).ceil() as u64
}

/// Exact success probability of the likelihood-ratio rule.
pub fn likelihood_ratio_success(kappa: f64, s_a: f64, s_b: f64, priors: (f64, f64)) -> f64 {
    let (ma, mb) = (kappa * s_a, kappa * s_b);
    (0..=count_cutoff(&[ma, mb]))
        .map(|k| (priors.0 * poisson_pmf(k, ma)).max(priors.1 * poisson_pmf(k, mb)))
        .sum()
}

/// Exact success probability of "say the brighter level iff count >= tau".
pub fn threshold_rule_success(
    kappa: f64,
    s_a: f64,
    s_b: f64,
    priors: (f64, f64),
    tau: u64,
) -> f64 {
    let (ma, mb) = (kappa * s_a, kappa * s_b);
    let a_brighter = s_a >= s_b;
    (0..=count_cutoff(&[ma, mb]))
        .map(|k| {
            let say_a = (k >= tau) == a_brighter;
            if say_a {
                priors.0 * poisson_pmf(k, ma)
            } else {
                priors.1 * poisson_pmf(k, mb)
            }
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationResult {
    pub success: f64,
    pub std_error: f64,
    pub analytic: f64,
    pub n_trials: u64,
}

/// Eve coherently splits off `κ` of each pulse, counts photons on her arm
/// and guesses the level with the likelihood-ratio rule.
pub fn discriminate_levels_poisson(
    kappa: f64,
    s_a: f64,
    s_b: f64,
    priors: (f64, f64),
    n_trials: u64,
    streams: &TrialStreams,
) -> Result<DiscriminationResult> {
    check_probability("kappa", kappa)?;
    check_range("s_a", s_a, "[0,inf)", s_a >= 0.0)?;
    check_range("s_b", s_b, "[0,inf)", s_b >= 0.0)?;
    check_priors(priors)?;
    if n_trials == 0 {
        return Err(Error::Invalid("discrimination needs n_trials >= 1".into()));
    }
    let n_batches = n_trials.div_ceil(BATCH);
    let correct: u64 = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = streams.stream(b, "decoy.discriminate");
            let len = BATCH.min(n_trials - b * BATCH);
            let mut hits = 0u64;
            for _ in 0..len {
                let is_a = rng.random_bool(priors.0);
                let s = if is_a { s_a } else { s_b };
                let pulse = PulseRecord::new(0, s, rng.random_range(0.0..2.0 * PI));
                let split = coherent_split(&pulse, kappa).expect("kappa checked");
                let k = photon_count(split.eve_split_amplitude, &mut rng);
                hits += (likelihood_ratio_decision(k, kappa, s_a, s_b, priors) == is_a) as u64;
            }
            hits
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let p = correct as f64 / n_trials as f64;
    Ok(DiscriminationResult {
        success: p,
        std_error: (p * (1.0 - p) / n_trials as f64).sqrt(),
        analytic: likelihood_ratio_success(kappa, s_a, s_b, priors),
        n_trials,
    })
}

/// Minimum error probability for telling coherent states `|α⟩` and `|β⟩` apart.
pub fn helstrom_error(alpha: Complex64, beta: Complex64, priors: (f64, f64)) -> Result<f64> {
    check_priors(priors)?;
    let overlap2 = (-(alpha - beta).norm_sqr()).exp();
    let disc = (1.0 - 4.0 * priors.0 * priors.1 * overlap2).max(0.0);
    Ok(0.5 * (1.0 - disc.sqrt()))
}

/// Attacks on the decoy channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DecoyAttack {
    None,
    /// With probability `aggression` per pulse, Eve runs a rate-matched naive
    /// PNS: multi-photon pulses are split and forwarded losslessly, single
    /// photons are blocked as needed to keep Babe's total click rate equal to
    /// the no-attack rate.
    NaivePns { aggression: f64 },
    /// Eve splits off `kappa`, guesses the level from her count, deletes the
    /// pulse if she guesses `delete_level`, otherwise forwards the remainder
    /// losslessly.
    CoherentSplit {
        kappa: f64,
        delete_level: Option<usize>,
    },
}

/// Block/forward probabilities that make a naive PNS attack rate-neutral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaivePnsPlan {
    pub forward_multi: f64,
    pub forward_single: f64,
}

impl NaivePnsPlan {
    pub fn calibrate(scheme: &DecoyScheme, eta: f64) -> Self {
        let mut target = 0.0;
        let mut multi = 0.0;
        let mut single = 0.0;
        for l in scheme.levels() {
            let s = l.mean_photons;
            target += l.probability * expected_yield(s, eta);
            multi += l.probability * multi_photon_probability(s);
            single += l.probability * poisson_pmf(1, s);
        }
        if multi >= target {
            Self {
                forward_multi: if multi > 0.0 { target / multi } else { 0.0 },
                forward_single: 0.0,
            }
        } else {
            Self {
                forward_multi: 1.0,
                forward_single: if single > 0.0 {
                    ((target - multi) / single).min(1.0)
                } else {
                    0.0
                },
            }
        }
    }
}

/// No-attack click probability `1 - e^{-ηS}` with an ideal detector.
pub fn expected_yield(s: f64, eta: f64) -> f64 {
    -(-eta * s).exp_m1()
}

/// `P(n >= 2)` for `Poisson(S)`.
pub fn multi_photon_probability(s: f64) -> f64 {
    1.0 - (-s).exp() * (1.0 + s)
}

/// Per-ensemble random streams: source draws, Eve's decisions and the
/// channel are kept apart so that changing the attack never shifts the
/// source sequence.
struct PulseStreams {
    source: crate::rng::RngStream,
    attack: crate::rng::RngStream,
    channel: crate::rng::RngStream,
}

/// Emit `n_pulses`, apply the attack and the channel, and record Babe's clicks.
pub fn simulate_ensemble(
    scheme: &DecoyScheme,
    eta: f64,
    attack: &DecoyAttack,
    n_pulses: u64,
    streams: &TrialStreams,
    ensemble: u64,
) -> Result<Vec<PulseRecord>> {
    check_range("eta", eta, "(0,1]", eta > 0.0 && eta <= 1.0)?;
    match *attack {
        DecoyAttack::None => {}
        DecoyAttack::NaivePns { aggression } => check_probability("aggression", aggression)?,
        DecoyAttack::CoherentSplit { kappa, delete_level } => {
            check_probability("kappa", kappa)?;
            if delete_level.is_some_and(|l| l >= scheme.levels().len()) {
                return Err(Error::Invalid("delete_level out of range".into()));
            }
        }
    }
    let plan = NaivePnsPlan::calibrate(scheme, eta);
    let mut s = PulseStreams {
        source: streams.stream(ensemble, "decoy.source"),
        attack: streams.stream(ensemble, "decoy.attack"),
        channel: streams.stream(ensemble, "decoy.channel"),
    };
    let mut out = Vec::with_capacity(n_pulses as usize);
    for _ in 0..n_pulses {
        let mut p = emit_pulse_with_count(scheme, &mut s.source);
        let u_attack: f64 = s.attack.random();
        let u_decide: f64 = s.attack.random();
        let u_channel: f64 = s.channel.random();
        let n = p.realized_n.unwrap_or(0);
        match *attack {
            DecoyAttack::NaivePns { aggression } if u_attack < aggression => {
                p = pns_split(&p)?;
                let forward = match n {
                    0 => false,
                    1 => u_decide < plan.forward_single,
                    _ => u_decide < plan.forward_multi,
                };
                if !forward {
                    p.deleted = n > 0;
                    p.forwarded = Forwarded::Count(0);
                } else if n == 1 {
                    p.forwarded = Forwarded::Count(1);
                }
                p.detected = Some(forward);
            }
            DecoyAttack::CoherentSplit {
                kappa,
                delete_level,
            } => {
                p = coherent_split(&p, kappa)?;
                let k = photon_count(p.eve_split_amplitude, &mut s.attack);
                let guess = guess_level(scheme, kappa, k);
                if delete_level == Some(guess) {
                    p.deleted = true;
                    p.detected = Some(false);
                } else {
                    let remaining = (1.0 - kappa) * p.s_level;
                    p.detected = Some(u_channel < expected_yield(remaining, 1.0));
                }
            }
            _ => {
                // each photon survives with probability eta
                let survive = 1.0 - (1.0 - eta).powi(n.min(i32::MAX as u64) as i32);
                p.detected = Some(u_channel < survive);
            }
        }
        out.push(p);
    }
    Ok(out)
}

/// MAP level guess from a count on a `κ` split of the pulse.
pub fn guess_level(scheme: &DecoyScheme, kappa: f64, count: u64) -> usize {
    let mut best = 0;
    let mut best_w = f64::NEG_INFINITY;
    for (i, l) in scheme.levels().iter().enumerate() {
        let w = l.probability.ln() + poisson_log_weight(count, kappa * l.mean_photons);
        if w > best_w {
            best_w = w;
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelYield {
    pub s_level: f64,
    pub emitted: u64,
    pub detected: u64,
    pub observed: f64,
    pub expected: f64,
    /// Normalized deviation of the observed from the expected yield.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldCheck {
    pub levels: Vec<LevelYield>,
    pub alarm: bool,
    pub tolerance_sigmas: f64,
}

impl YieldCheck {
    /// False-alarm probability of the check under the normal approximation,
    /// with one two-sided test per level of nonzero `S`.
    pub fn nominal_false_alarm(n_tested_levels: usize, tolerance_sigmas: f64) -> f64 {
        let normal = Normal::standard();
        let per_level = 2.0 * (1.0 - normal.cdf(tolerance_sigmas));
        1.0 - (1.0 - per_level).powi(n_tested_levels as i32)
    }
}

/// Compare per-level click yields with the no-attack model `1 - e^{-ηS}`.
pub fn decoy_yield_check(
    records: &[PulseRecord],
    eta: f64,
    tolerance_sigmas: f64,
) -> Result<YieldCheck> {
    check_range(
        "tolerance_sigmas",
        tolerance_sigmas,
        "(0,inf)",
        tolerance_sigmas > 0.0,
    )?;
    let mut levels: Vec<LevelYield> = Vec::new();
    for r in records {
        let i = match levels.iter().position(|l| l.s_level == r.s_level) {
            Some(i) => i,
            None => {
                levels.push(LevelYield {
                    s_level: r.s_level,
                    emitted: 0,
                    detected: 0,
                    observed: 0.0,
                    expected: expected_yield(r.s_level, eta),
                    z: 0.0,
                });
                levels.len() - 1
            }
        };
        levels[i].emitted += 1;
        levels[i].detected += r.detected.unwrap_or(false) as u64;
    }
    if levels.len() < 2 {
        return Err(Error::NoDecoyStructure {
            found: levels.len(),
        });
    }
    levels.sort_by(|a, b| b.s_level.total_cmp(&a.s_level));
    let mut alarm = false;
    for l in &mut levels {
        l.observed = l.detected as f64 / l.emitted as f64;
        let se = (l.expected * (1.0 - l.expected) / l.emitted as f64).sqrt();
        l.z = crate::stats::sigmas_off(l.observed, l.expected, se);
        alarm |= l.z.abs() > tolerance_sigmas;
    }
    Ok(YieldCheck {
        levels,
        alarm,
        tolerance_sigmas,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaggedFractionReport {
    /// Tagged share of Babe's clicks.
    pub tagged_fraction: f64,
    pub n_detected: u64,
    /// Fraction of emitted pulses with two or more photons.
    pub multi_photon_supply: f64,
    /// `η × P(n = 1)`: single photons expected to reach Babe.
    pub single_photon_throughput: f64,
    /// Multi-photon supply alone can cover the single-photon throughput.
    pub breach: bool,
}

pub fn tagged_fraction(records: &[PulseRecord], eta: f64) -> TaggedFractionReport {
    let n = records.len().max(1) as f64;
    let mut detected = 0u64;
    let mut tagged = 0u64;
    let mut multi = 0u64;
    let mut single = 0u64;
    for r in records {
        let k = r.realized_n.unwrap_or(0);
        multi += (k >= 2) as u64;
        single += (k == 1) as u64;
        if r.detected == Some(true) {
            detected += 1;
            tagged += r.tagged as u64;
        }
    }
    let supply = multi as f64 / n;
    let throughput = eta * single as f64 / n;
    TaggedFractionReport {
        tagged_fraction: if detected > 0 {
            tagged as f64 / detected as f64
        } else {
            0.0
        },
        n_detected: detected,
        multi_photon_supply: supply,
        single_photon_throughput: throughput,
        breach: supply >= throughput,
    }
}

/// Analytic breach condition for a Poisson source of mean `S`:
/// `(P(n>=2), η·P(n=1), P(n>=2) >= η·P(n=1))`.
pub fn breach_condition(s: f64, eta: f64) -> (f64, f64, bool) {
    let supply = multi_photon_probability(s);
    let throughput = eta * poisson_pmf(1, s);
    (supply, throughput, supply >= throughput)
}
