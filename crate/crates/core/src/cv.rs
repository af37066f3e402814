//! Gaussian quadrature channel for coherent-state CV-QKD.
//!
//! One real quadrature `m ~ N(0, V)` per channel use, in shot-noise units.
//!
//! Passive tap (beamsplitter with transmittance `T`):
//!
//! ```text
//! m_B = √T·m + n_B          m_E = √(1-T)·m + n_E      var n_E = 1
//! ```
//!
//! Heterodyne-resend near the transmitter:
//!
//! ```text
//! m_E = m + n_E  (var n_E = 2)      m_B = √T·m_E + n_B
//! ```
//!
//! and in both cases Adam's own estimate is `m_A = m + n_A`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::rng::TrialStreams;
use crate::stats::{sample_variance, CompensatedSum};

/// Default `var n_A` as a fraction of `V`.
pub const DEFAULT_NA_FRACTION: f64 = 0.01;

const BATCH: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvChannelParams {
    /// `T = |t|²`.
    pub transmittance: f64,
    /// `V`, variance of the modulated quadrature.
    pub modulation_variance: f64,
    pub var_n_a: f64,
    pub var_n_b: f64,
    pub var_n_e_passive: f64,
    pub var_n_e_het: f64,
    /// Absolute uncertainty of `T`.
    pub delta_t: f64,
}

impl CvChannelParams {
    /// Shot-noise-limited defaults with `var n_A = 0.01·V` and exactly known `T`.
    pub fn new(transmittance: f64, modulation_variance: f64) -> Self {
        Self {
            transmittance,
            modulation_variance,
            var_n_a: DEFAULT_NA_FRACTION * modulation_variance,
            var_n_b: 1.0,
            var_n_e_passive: 1.0,
            var_n_e_het: 2.0,
            delta_t: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.transmittance;
        check_range("T", t, "(0,1]", t > 0.0 && t <= 1.0)?;
        let v = self.modulation_variance;
        check_range("V", v, "(0,inf)", v > 0.0)?;
        for (name, x) in [
            ("var_nA", self.var_n_a),
            ("var_nB", self.var_n_b),
            ("var_nE_passive", self.var_n_e_passive),
            ("var_nE_het", self.var_n_e_het),
        ] {
            check_range(name, x, "[0,inf)", x >= 0.0)?;
        }
        check_range("delta_T", self.delta_t, "[0,T)", self.delta_t >= 0.0 && t - self.delta_t > 0.0)
    }

    fn amplitude(&self) -> f64 {
        self.transmittance.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CvScenario {
    Passive,
    HeterodyneResend,
}

/// One channel use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureTriple {
    pub m: f64,
    pub m_a: f64,
    pub m_b: f64,
    pub m_e: f64,
    pub scenario: CvScenario,
}

impl QuadratureTriple {
    pub fn is_finite(&self) -> bool {
        [self.m, self.m_a, self.m_b, self.m_e].iter().all(|x| x.is_finite())
    }

    fn values(&self) -> [f64; 4] {
        [self.m, self.m_a, self.m_b, self.m_e]
    }
}

fn gaussian<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    variance.sqrt() * z
}

/// `m_A = m + n_A`.
pub fn adam_estimate<R: Rng + ?Sized>(m: f64, params: &CvChannelParams, rng: &mut R) -> f64 {
    m + gaussian(params.var_n_a, rng)
}

fn passive_with_transmittance<R: Rng + ?Sized>(
    m: f64,
    transmittance: f64,
    params: &CvChannelParams,
    rng: &mut R,
) -> QuadratureTriple {
    let m_a = adam_estimate(m, params, rng);
    let m_b = transmittance.sqrt() * m + gaussian(params.var_n_b, rng);
    let m_e = (1.0 - transmittance).sqrt() * m + gaussian(params.var_n_e_passive, rng);
    QuadratureTriple {
        m,
        m_a,
        m_b,
        m_e,
        scenario: CvScenario::Passive,
    }
}

/// Beamsplitter tap: Eve homodynes the `1 - T` port.
pub fn sample_passive<R: Rng + ?Sized>(
    m: f64,
    params: &CvChannelParams,
    rng: &mut R,
) -> QuadratureTriple {
    passive_with_transmittance(m, params.transmittance, params, rng)
}

/// Eve heterodynes the full signal near Adam and resends her result.
pub fn sample_heterodyne_resend<R: Rng + ?Sized>(
    m: f64,
    params: &CvChannelParams,
    rng: &mut R,
) -> QuadratureTriple {
    let m_a = adam_estimate(m, params, rng);
    let m_e = m + gaussian(params.var_n_e_het, rng);
    let m_b = params.amplitude() * m_e + gaussian(params.var_n_b, rng);
    QuadratureTriple {
        m,
        m_a,
        m_b,
        m_e,
        scenario: CvScenario::HeterodyneResend,
    }
}

pub fn sample<R: Rng + ?Sized>(
    scenario: CvScenario,
    m: f64,
    params: &CvChannelParams,
    rng: &mut R,
) -> QuadratureTriple {
    match scenario {
        CvScenario::Passive => sample_passive(m, params, rng),
        CvScenario::HeterodyneResend => sample_heterodyne_resend(m, params, rng),
    }
}

/// Capacity of an additive Gaussian channel, `½·log₂(1 + S/N)` bits per use.
pub fn gaussian_mutual_info(signal_variance: f64, noise_variance: f64) -> Result<f64> {
    check_range(
        "noise_variance",
        noise_variance,
        "(0,inf)",
        noise_variance > 0.0,
    )?;
    check_range(
        "signal_variance",
        signal_variance,
        "[0,inf)",
        signal_variance >= 0.0,
    )?;
    Ok(0.5 * (signal_variance / noise_variance).ln_1p() / std::f64::consts::LN_2)
}

/// Mutual information of two jointly Gaussian variables, `-½·log₂(1-ρ²)`.
pub fn gaussian_mi_from_moments(var_x: f64, var_y: f64, cov: f64) -> f64 {
    let rho2 = (cov * cov / (var_x * var_y)).min(1.0);
    -0.5 * (-rho2).ln_1p() / std::f64::consts::LN_2
}

/// Index into the `(m, m_A, m_B, m_E)` covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quad {
    M = 0,
    MA = 1,
    MB = 2,
    ME = 3,
}

/// Second moments of `(m, m_A, m_B, m_E)` (all zero mean).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadCovariance {
    pub c: [[f64; 4]; 4],
}

impl QuadCovariance {
    /// Closed-form propagation of the channel equations.
    pub fn analytic(params: &CvChannelParams, scenario: CvScenario) -> Self {
        let v = params.modulation_variance;
        let t = params.transmittance;
        let a = t.sqrt();
        let mut c = [[0.0; 4]; 4];
        let (m, ma, mb, me) = (0, 1, 2, 3);
        c[m][m] = v;
        c[ma][ma] = v + params.var_n_a;
        c[m][ma] = v;
        match scenario {
            CvScenario::Passive => {
                let b = (1.0 - t).sqrt();
                c[mb][mb] = t * v + params.var_n_b;
                c[me][me] = (1.0 - t) * v + params.var_n_e_passive;
                c[m][mb] = a * v;
                c[m][me] = b * v;
                c[ma][mb] = a * v;
                c[ma][me] = b * v;
                c[mb][me] = a * b * v;
            }
            CvScenario::HeterodyneResend => {
                let ve = v + params.var_n_e_het;
                c[me][me] = ve;
                c[mb][mb] = t * ve + params.var_n_b;
                c[m][mb] = a * v;
                c[m][me] = v;
                c[ma][mb] = a * v;
                c[ma][me] = v;
                c[mb][me] = a * ve;
            }
        }
        for i in 0..4 {
            for j in 0..i {
                c[i][j] = c[j][i];
            }
        }
        Self { c }
    }

    pub fn var(&self, x: Quad) -> f64 {
        self.c[x as usize][x as usize]
    }

    pub fn cov(&self, x: Quad, y: Quad) -> f64 {
        self.c[x as usize][y as usize]
    }

    /// Mean-square error of the best linear estimate of `target` from `obs`.
    pub fn linear_mse(&self, target: Quad, obs: Quad) -> f64 {
        let c = self.cov(target, obs);
        (self.var(target) - c * c / self.var(obs)).max(0.0)
    }

    pub fn mutual_info(&self, x: Quad, y: Quad) -> f64 {
        gaussian_mi_from_moments(self.var(x), self.var(y), self.cov(x, y))
    }
}

/// Mergeable compensated sums of the pairwise products of a triple.
#[derive(Debug, Clone, Default)]
pub struct CvMoments {
    sums: [[CompensatedSum; 4]; 4],
    n: u64,
}

impl CvMoments {
    pub fn push(&mut self, triple: &QuadratureTriple) {
        let v = triple.values();
        for i in 0..4 {
            for j in i..4 {
                self.sums[i][j].add(v[i] * v[j]);
            }
        }
        self.n += 1;
    }

    pub fn merge(&mut self, other: &CvMoments) {
        for i in 0..4 {
            for j in i..4 {
                self.sums[i][j].merge(&other.sums[i][j]);
            }
        }
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    /// Empirical second moments about the known zero mean.
    pub fn covariance(&self) -> QuadCovariance {
        let n = self.n as f64;
        let mut c = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in i..4 {
                c[i][j] = self.sums[i][j].value() / n;
                c[j][i] = c[i][j];
            }
        }
        QuadCovariance { c }
    }
}

/// Monte Carlo value with its standard error and the closed-form reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McValue {
    pub value: f64,
    pub std_error: f64,
    pub analytic: f64,
}

impl McValue {
    pub fn sigmas_off(&self) -> f64 {
        crate::stats::sigmas_off(self.value, self.analytic, self.std_error)
    }
}

/// Who reconstructs what better, by MSE and by Gaussian mutual information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconciliationAdvantageReport {
    pub scenario: CvScenario,
    pub n_trials: u64,
    /// Direct reconciliation: Babe's and Eve's error about `m`.
    pub mse_b_of_m: McValue,
    pub mse_e_of_m: McValue,
    /// Reverse reconciliation: Adam's and Eve's error about `m_B`.
    pub mse_a_of_mb: McValue,
    pub mse_e_of_mb: McValue,
    pub var_mb: McValue,
    pub var_me: McValue,
    pub cov_m_mb: McValue,
    /// Bits per use, closed form. `A` is Adam's transmitted `m`.
    pub i_ab: f64,
    pub i_ae: f64,
    pub i_be: f64,
}

impl ReconciliationAdvantageReport {
    pub fn direct_rate(&self) -> f64 {
        self.i_ab - self.i_ae
    }

    pub fn reverse_rate(&self) -> f64 {
        self.i_ab - self.i_be
    }
}

/// Simulate `n_trials` channel uses and compare the users' and Eve's
/// linear estimation errors.
///
/// MSEs use the least-squares linear estimator fitted on the sample, so the
/// comparison does not assume the analytic model. Standard errors use the
/// Gaussian identity `Var(r²) = 2σ⁴` for the (Gaussian) residuals.
pub fn reconciliation_advantage(
    params: &CvChannelParams,
    scenario: CvScenario,
    n_trials: u64,
    streams: &TrialStreams,
) -> Result<ReconciliationAdvantageReport> {
    params.validate()?;
    if n_trials < 1000 {
        return Err(Error::Invalid(format!(
            "reconciliation_advantage needs n_trials >= 1000, got {n_trials}"
        )));
    }
    let n_batches = n_trials.div_ceil(BATCH);
    let sd_m = params.modulation_variance.sqrt();
    let parts: Vec<CvMoments> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = streams.stream(b, "cv.reconciliation");
            let len = BATCH.min(n_trials - b * BATCH);
            let mut acc = CvMoments::default();
            for _ in 0..len {
                let z: f64 = StandardNormal.sample(&mut rng);
                acc.push(&sample(scenario, sd_m * z, params, &mut rng));
            }
            acc
        })
        .collect();
    let mut moments = CvMoments::default();
    for p in &parts {
        moments.merge(p);
    }
    Ok(build_report(params, scenario, &moments))
}

fn build_report(
    params: &CvChannelParams,
    scenario: CvScenario,
    moments: &CvMoments,
) -> ReconciliationAdvantageReport {
    let emp = moments.covariance();
    let ana = QuadCovariance::analytic(params, scenario);
    let n = moments.count() as f64;
    let k = (2.0 / n).sqrt();
    let mse = |target, obs| {
        let value = emp.linear_mse(target, obs);
        McValue {
            value,
            std_error: value * k,
            analytic: ana.linear_mse(target, obs),
        }
    };
    let var = |x| {
        let value = emp.var(x);
        McValue {
            value,
            std_error: value * k,
            analytic: ana.var(x),
        }
    };
    let cov_m_mb = {
        let value = emp.cov(Quad::M, Quad::MB);
        McValue {
            value,
            std_error: ((emp.var(Quad::M) * emp.var(Quad::MB) + value * value) / n).sqrt(),
            analytic: ana.cov(Quad::M, Quad::MB),
        }
    };
    ReconciliationAdvantageReport {
        scenario,
        n_trials: moments.count(),
        mse_b_of_m: mse(Quad::M, Quad::MB),
        mse_e_of_m: mse(Quad::M, Quad::ME),
        mse_a_of_mb: mse(Quad::MB, Quad::MA),
        mse_e_of_mb: mse(Quad::MB, Quad::ME),
        var_mb: var(Quad::MB),
        var_me: var(Quad::ME),
        cov_m_mb,
        i_ab: ana.mutual_info(Quad::M, Quad::MB),
        i_ae: ana.mutual_info(Quad::M, Quad::ME),
        i_be: ana.mutual_info(Quad::MB, Quad::ME),
    }
}

/// The calibration set is this many times larger than each evaluation set,
/// so the threshold's own sampling error adds little to the false alarm.
const CALIBRATION_FACTOR: u64 = 4;

/// Channel hypotheses for the excess-noise test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseHypothesis {
    /// Passive loss with `T` drawn uniformly from `[T-δT, T+δT]` once per trial.
    PassiveUncertainLoss,
    /// Heterodyne-resend at the nominal `T`.
    HeterodyneResend,
}

/// Which tail of the statistic rejects the null.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tail {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRule {
    pub threshold: f64,
    pub tail: Tail,
}

impl DecisionRule {
    pub fn rejects(&self, stat: f64) -> bool {
        match self.tail {
            Tail::Upper => stat > self.threshold,
            Tail::Lower => stat < self.threshold,
        }
    }

    /// Largest-power rule whose rejection rate on `calibration` is at most `alpha`.
    pub fn calibrate(calibration: &[f64], alpha: f64, tail: Tail) -> Self {
        let mut sorted = calibration.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let keep = ((1.0 - alpha) * n as f64).ceil() as usize;
        let threshold = match tail {
            Tail::Upper => sorted[keep.clamp(1, n) - 1],
            Tail::Lower => sorted[(n - keep.clamp(1, n)).min(n - 1)],
        };
        Self { threshold, tail }
    }

    /// The same threshold with the accept/reject regions exchanged.
    pub fn complement(&self) -> Self {
        Self {
            threshold: self.threshold,
            tail: match self.tail {
                Tail::Upper => Tail::Lower,
                Tail::Lower => Tail::Upper,
            },
        }
    }

    pub fn rejection_rate(&self, stats: &[f64]) -> f64 {
        stats.iter().filter(|&&s| self.rejects(s)).count() as f64 / stats.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessNoiseOutcome {
    pub power: f64,
    pub false_alarm_achieved: f64,
    pub threshold: f64,
    pub n_trials: u64,
}

impl ExcessNoiseOutcome {
    pub fn power_std_error(&self) -> f64 {
        (self.power * (1.0 - self.power) / self.n_trials as f64).sqrt()
    }

    pub fn false_alarm_std_error(&self) -> f64 {
        (self.false_alarm_achieved * (1.0 - self.false_alarm_achieved) / self.n_trials as f64)
            .sqrt()
    }
}

/// Sample variance of `m_B` over one block of `n_pulses` channel uses.
pub fn variance_statistic<R: Rng + ?Sized>(
    hypothesis: NoiseHypothesis,
    params: &CvChannelParams,
    n_pulses: usize,
    rng: &mut R,
) -> f64 {
    let sd_m = params.modulation_variance.sqrt();
    let t_trial = match hypothesis {
        NoiseHypothesis::PassiveUncertainLoss if params.delta_t > 0.0 => {
            let lo = params.transmittance - params.delta_t;
            let hi = (params.transmittance + params.delta_t).min(1.0);
            rng.random_range(lo..=hi)
        }
        _ => params.transmittance,
    };
    let mut m_b = Vec::with_capacity(n_pulses);
    for _ in 0..n_pulses {
        let z: f64 = StandardNormal.sample(rng);
        let m = sd_m * z;
        let q = match hypothesis {
            NoiseHypothesis::PassiveUncertainLoss => {
                passive_with_transmittance(m, t_trial, params, rng)
            }
            NoiseHypothesis::HeterodyneResend => sample_heterodyne_resend(m, params, rng),
        };
        m_b.push(q.m_b);
    }
    sample_variance(&m_b)
}

fn statistics(
    hypothesis: NoiseHypothesis,
    params: &CvChannelParams,
    n_pulses: usize,
    n_trials: u64,
    streams: &TrialStreams,
    label: &str,
) -> Vec<f64> {
    (0..n_trials)
        .into_par_iter()
        .map(|i| variance_statistic(hypothesis, params, n_pulses, &mut streams.stream(i, label)))
        .collect()
}

/// Can the users tell heterodyne-resend from passive loss whose `T` is only
/// known to `±δT`, using the variance of Babe's results?
///
/// The threshold is the empirical `1-α` quantile of the null statistic on a
/// calibration set; false alarm and power are then measured on fresh trials.
pub fn excess_noise_test(
    params: &CvChannelParams,
    n_pulses: usize,
    alpha: f64,
    n_trials: u64,
    streams: &TrialStreams,
) -> Result<ExcessNoiseOutcome> {
    excess_noise_test_between(
        params,
        NoiseHypothesis::PassiveUncertainLoss,
        NoiseHypothesis::HeterodyneResend,
        Tail::Upper,
        n_pulses,
        alpha,
        n_trials,
        streams,
    )
}

/// [`excess_noise_test`] with explicit null/alternative and rejection tail.
#[allow(clippy::too_many_arguments)]
pub fn excess_noise_test_between(
    params: &CvChannelParams,
    null: NoiseHypothesis,
    alternative: NoiseHypothesis,
    tail: Tail,
    n_pulses: usize,
    alpha: f64,
    n_trials: u64,
    streams: &TrialStreams,
) -> Result<ExcessNoiseOutcome> {
    params.validate()?;
    check_range("alpha", alpha, "(0,1)", alpha > 0.0 && alpha < 1.0)?;
    if n_pulses < 100 {
        return Err(Error::Invalid(format!(
            "excess_noise_test needs n_pulses >= 100, got {n_pulses}"
        )));
    }
    if n_trials == 0 {
        return Err(Error::Invalid("excess_noise_test needs n_trials >= 1".into()));
    }
    let calibration = statistics(
        null,
        params,
        n_pulses,
        CALIBRATION_FACTOR * n_trials,
        streams,
        "cv.excess.calibrate",
    );
    let rule = DecisionRule::calibrate(&calibration, alpha, tail);
    let null_eval = statistics(null, params, n_pulses, n_trials, streams, "cv.excess.null");
    let alt_eval = statistics(alternative, params, n_pulses, n_trials, streams, "cv.excess.alt");
    Ok(ExcessNoiseOutcome {
        power: rule.rejection_rate(&alt_eval),
        false_alarm_achieved: rule.rejection_rate(&null_eval),
        threshold: rule.threshold,
        n_trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_trial_rng;

    #[test]
    fn lossless_noiseless_passive_is_identity() {
        let mut p = CvChannelParams::new(1.0, 25.0);
        p.var_n_a = 0.0;
        p.var_n_b = 0.0;
        p.var_n_e_passive = 0.0;
        let mut rng = derive_trial_rng(0, 0, "t");
        for m in [-3.0, 0.0, 1.5] {
            let q = sample_passive(m, &p, &mut rng);
            assert_eq!(q.m_b, m);
            assert_eq!(q.m_a, m);
        }
    }

    #[test]
    fn perfect_resend_reaches_babe() {
        let mut p = CvChannelParams::new(1.0, 25.0);
        p.var_n_b = 0.0;
        let mut rng = derive_trial_rng(0, 0, "t");
        let q = sample_heterodyne_resend(2.0, &p, &mut rng);
        assert_eq!(q.m_b, q.m_e);
    }

    #[test]
    fn default_adam_noise_is_one_percent_of_v() {
        assert_eq!(CvChannelParams::new(0.1, 25.0).var_n_a, 0.25);
    }

    #[test]
    fn validation_names_offending_field() {
        let err = CvChannelParams::new(0.0, 25.0).validate().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("`T`") && msg.contains("(0,1]"), "{msg}");
        let mut p = CvChannelParams::new(0.1, 25.0);
        p.delta_t = 0.1;
        assert!(p.validate().is_err());
    }

    #[test]
    fn mutual_info_examples() {
        assert_eq!(gaussian_mutual_info(0.0, 1.0).unwrap(), 0.0);
        assert!((gaussian_mutual_info(1.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let i = gaussian_mutual_info(2.5, 1.0).unwrap();
        assert!((i - 0.903_677_461_028_802_8).abs() < 1e-12, "{i}");
        assert!(gaussian_mutual_info(1.0, 0.0).is_err());
    }

    #[test]
    fn moment_mi_matches_snr_form() {
        let p = CvChannelParams::new(0.1, 25.0);
        let c = QuadCovariance::analytic(&p, CvScenario::HeterodyneResend);
        let snr = gaussian_mutual_info(0.1 * 25.0, 0.1 * 2.0 + 1.0).unwrap();
        assert!((c.mutual_info(Quad::M, Quad::MB) - snr).abs() < 1e-12);
    }

    #[test]
    fn reconciliation_needs_enough_trials() {
        let p = CvChannelParams::new(0.1, 25.0);
        assert!(reconciliation_advantage(&p, CvScenario::Passive, 999, &TrialStreams::new(1)).is_err());
    }

    #[test]
    fn decision_rule_calibration_bounds_rate() {
        let cal: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let rule = DecisionRule::calibrate(&cal, 0.05, Tail::Upper);
        assert!(rule.rejection_rate(&cal) <= 0.05);
        let rule = DecisionRule::calibrate(&cal, 0.05, Tail::Lower);
        assert!(rule.rejection_rate(&cal) <= 0.05);
    }

    #[test]
    fn excess_noise_rejects_bad_inputs() {
        let p = CvChannelParams::new(0.1, 25.0);
        let s = TrialStreams::new(0);
        assert!(excess_noise_test(&p, 99, 0.05, 10, &s).is_err());
        assert!(excess_noise_test(&p, 100, 1.0, 10, &s).is_err());
    }
}
