//! Scenario dispatch.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::config::{ConfigError, ScenarioConfig, ScenarioKind};
use super::report::{Metric, ScenarioReport, SweepTable};
use crate::bb84::{self, Bb84Config, DeletionPolicy};
use crate::cv::{self, CvChannelParams, CvScenario, McValue};
use crate::decoy::{self, DecoyAttack, DecoyScheme, NaivePnsPlan};
use crate::key_rate::{self, KeyRateInputs, KeyRateReport};
use crate::qubit::{self, Bb84Basis, EnsembleMember, MeasBasis};
use crate::rng::TrialStreams;
use crate::stats::Summary;

const BATCH: u64 = 4096;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error("no trials")]
    NoTrials,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot build thread pool: {0}")]
    ThreadPool(String),
}

/// Run a scenario (or its sweep) on `threads` workers, or on the global pool
/// when `threads` is `None`. The report does not depend on the thread count.
pub fn run_scenario(config: &ScenarioConfig, threads: Option<usize>) -> Result<ScenarioReport, RunError> {
    if config.n_trials == 0 {
        return Err(RunError::NoTrials);
    }
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| RunError::ThreadPool(e.to_string()))?
            .install(|| dispatch(config)),
        None => dispatch(config),
    }
}

fn dispatch(config: &ScenarioConfig) -> Result<ScenarioReport, RunError> {
    match &config.sweep {
        None => Ok(run_point(config)),
        Some(sweep) => {
            let mut report = ScenarioReport::new(config);
            let mut columns: Vec<String> = vec![sweep.key.clone()];
            let mut rows = Vec::new();
            for x in sweep.points() {
                let value = sweep.value(config.scenario, x);
                let mut point = config.with_parameter(&sweep.key, value)?;
                point.sweep = None;
                let r = run_point(&point);
                let tag = format!("{}={x}", sweep.key);
                report.errors.extend(r.errors.iter().map(|e| format!("{tag}: {e}")));
                report
                    .invariant_violations
                    .extend(r.invariant_violations.iter().map(|e| format!("{tag}: {e}")));
                for c in r.caveats {
                    report.add_caveat(c);
                }
                if r.metrics.is_empty() {
                    continue;
                }
                if columns.len() == 1 {
                    columns.extend(r.metrics.0.iter().map(|m| m.name.clone()));
                }
                let mut row = vec![x];
                row.extend(r.metrics.0.iter().map(|m| m.mean));
                rows.push(row);
            }
            report.sweep = Some(SweepTable {
                key: sweep.key.clone(),
                columns,
                rows,
            });
            Ok(report)
        }
    }
}

fn run_point(config: &ScenarioConfig) -> ScenarioReport {
    let mut report = ScenarioReport::new(config);
    let streams = TrialStreams::new(config.master_seed);
    let result = match config.scenario {
        ScenarioKind::CvPassive => run_cv(config, CvScenario::Passive, &streams, &mut report),
        ScenarioKind::CvHeterodyneResend => {
            run_cv(config, CvScenario::HeterodyneResend, &streams, &mut report)
        }
        ScenarioKind::CvExcessNoiseTest => run_excess_noise(config, &streams, &mut report),
        ScenarioKind::Bb84Prs => run_bb84(config, &streams, &mut report),
        ScenarioKind::DecoyPns => run_decoy_pns(config, &streams, &mut report),
        ScenarioKind::DecoyCbs => run_decoy_cbs(config, &streams, &mut report),
        ScenarioKind::KeyRateSweep => run_key_rate(config, &mut report),
        ScenarioKind::DeletionOptimizer => run_deletion(config, &streams, &mut report),
    };
    if let Err(e) = result {
        report.errors.push(e.to_string());
    }
    for m in &report.metrics.0 {
        if !m.mean.is_finite() {
            report
                .invariant_violations
                .push(format!("metric `{}` is not finite", m.name));
        }
    }
    report
}

fn mc_metric(name: &str, v: &McValue, n: u64) -> Metric {
    let se = v.std_error;
    Metric::new(
        name,
        Summary::with_std_error(v.value, se * se * n as f64, n, se),
        Some(v.analytic),
    )
}

fn proportion(name: &str, k: u64, n: u64, reference: Option<f64>) -> Metric {
    Metric::new(name, Summary::proportion(k, n), reference)
}

fn cv_params(config: &ScenarioConfig) -> CvChannelParams {
    let p = &config.parameters;
    let mut c = CvChannelParams::new(p.f64("T"), p.f64("V"));
    c.var_n_a = p.f64("var_nA");
    c.var_n_b = p.f64("var_nB");
    c.var_n_e_passive = p.f64("var_nE_passive");
    c.var_n_e_het = p.f64("var_nE_het");
    if p.get("delta_T").is_some() {
        c.delta_t = p.f64("delta_T");
    }
    c
}

fn run_cv(
    config: &ScenarioConfig,
    scenario: CvScenario,
    streams: &TrialStreams,
    report: &mut ScenarioReport,
) -> crate::Result<()> {
    let params = cv_params(config);
    let r = cv::reconciliation_advantage(&params, scenario, config.n_trials, streams)?;
    let n = r.n_trials;
    for (name, v) in [
        ("mse_b_of_m", &r.mse_b_of_m),
        ("mse_e_of_m", &r.mse_e_of_m),
        ("mse_a_of_mb", &r.mse_a_of_mb),
        ("mse_e_of_mb", &r.mse_e_of_mb),
        ("var_mb", &r.var_mb),
        ("var_me", &r.var_me),
        ("cov_m_mb", &r.cov_m_mb),
    ] {
        report.metrics.push(mc_metric(name, v, n));
        if name.starts_with("mse") && v.value < 0.0 {
            report
                .invariant_violations
                .push(format!("{name} is negative: {}", v.value));
        }
    }
    report.metrics.push(Metric::exact("i_ab", r.i_ab));
    report.metrics.push(Metric::exact("i_ae", r.i_ae));
    report.metrics.push(Metric::exact("i_be", r.i_be));
    let direct = key_rate::channel_rate(r.i_ab, r.i_ae)?;
    let reverse = key_rate::channel_rate(r.i_ab, r.i_be)?;
    report.metrics.push(Metric::exact("channel_rate", direct.rate));
    report.metrics.push(Metric::exact("reverse_rate", reverse.rate));
    for c in direct.caveats.into_iter().chain(reverse.caveats) {
        report.add_caveat(c);
    }
    Ok(())
}

fn run_excess_noise(
    config: &ScenarioConfig,
    streams: &TrialStreams,
    report: &mut ScenarioReport,
) -> crate::Result<()> {
    let params = cv_params(config);
    let p = &config.parameters;
    let alpha = p.f64("alpha");
    let n = config.n_trials;
    let out = cv::excess_noise_test(&params, p.u64("n_pulses") as usize, alpha, n, streams)?;
    let count = |rate: f64| (rate * n as f64).round() as u64;
    report
        .metrics
        .push(proportion("power", count(out.power), n, None));
    report.metrics.push(proportion(
        "false_alarm",
        count(out.false_alarm_achieved),
        n,
        Some(alpha),
    ));
    report.metrics.push(Metric::exact("threshold", out.threshold));
    let nuisance = params.delta_t * params.modulation_variance;
    let excess = 2.0 * params.transmittance;
    report.metrics.push(Metric::exact("nuisance_band", nuisance));
    report.metrics.push(Metric::exact("attack_excess", excess));
    Ok(())
}

fn bb84_config(config: &ScenarioConfig) -> Bb84Config {
    let p = &config.parameters;
    let angle = p.f64("attack_basis_angle");
    Bb84Config {
        n_sent: p.u64("n_sent"),
        eta: p.f64("eta"),
        attack_fraction: p.f64("attack_fraction"),
        attack_basis: if angle == MeasBasis::breidbart().angle {
            MeasBasis::breidbart()
        } else {
            MeasBasis::custom(angle)
        },
        deletion_policy: match p.str("deletion_policy") {
            "delete_bit_one" => DeletionPolicy::DeleteBitOne,
            "delete_low_confidence" => {
                DeletionPolicy::DeleteLowConfidence(p.f64("confidence_threshold"))
            }
            _ => DeletionPolicy::None,
        },
        check_fraction: p.f64("check_fraction"),
        qber_threshold: p.f64("qber_threshold"),
        intrinsic_error: p.f64("intrinsic_error"),
        match_arrival_rate: p.bool("match_arrival_rate"),
    }
}

fn run_bb84(
    config: &ScenarioConfig,
    streams: &TrialStreams,
    report: &mut ScenarioReport,
) -> crate::Result<()> {
    let cfg = bb84_config(config);
    cfg.validate()?;
    let expected = bb84::expected_statistics(&cfg)?;
    let sessions: Vec<(Option<String>, bb84::SessionTranscript)> = (0..config.n_trials)
        .into_par_iter()
        .map(|i| {
            let t = bb84::run_session(&cfg, &mut streams.stream(i, "bb84.session"))?;
            Ok((t.check_conservation().err().map(|e| e.to_string()), t.compact()))
        })
        .collect::<crate::Result<_>>()?;
    let mut transcripts = Vec::with_capacity(sessions.len());
    for (violation, t) in sessions {
        if let Some(v) = violation {
            report.invariant_violations.push(v);
        }
        transcripts.push(t);
    }
    let (mut sent, mut arrived, mut sifted, mut checked, mut errors, mut aborted) =
        (0, 0, 0, 0, 0, 0);
    for t in &transcripts {
        sent += t.counts.sent;
        arrived += t.counts.arrived;
        sifted += t.counts.sifted;
        checked += t.checked_positions.len() as u64;
        errors += t
            .checked_positions
            .iter()
            .filter(|&&i| t.sifted_key[i] != t.babe_sifted[i])
            .count() as u64;
        aborted += t.aborted as u64;
    }
    let attack = cfg.effective_attack();
    report
        .metrics
        .push(Metric::exact("attack_fraction", attack.attack_fraction));
    report.metrics.push(Metric::exact(
        "per_attacked_error",
        bb84::per_attacked_error(&cfg.attack_basis),
    ));
    report.metrics.push(proportion(
        "arrival_rate",
        arrived,
        sent,
        Some(expected.arrival_rate),
    ));
    report
        .metrics
        .push(proportion("sifted_rate", sifted, sent, Some(expected.sifted_rate)));
    if checked > 0 {
        report
            .metrics
            .push(proportion("qber", errors, checked, Some(expected.qber)));
    }
    report
        .metrics
        .push(proportion("abort_rate", aborted, config.n_trials, None));
    let bias = bb84::key_bias_report(&transcripts)?;
    let zeros = (bias.zero_fraction * bias.n_key_bits as f64).round() as u64;
    report.metrics.push(proportion(
        "zero_fraction",
        zeros,
        bias.n_key_bits,
        Some(expected.zero_fraction),
    ));
    report.metrics.push(Metric::exact("key_bits", bias.n_key_bits as f64));
    report.metrics.push(Metric::exact("bias_sigmas", bias.bias_sigmas));
    Ok(())
}

struct EnsembleOutcome {
    alarm: bool,
    emitted: [u64; 2],
    detected: [u64; 2],
    tagged_fraction: f64,
    violations: Vec<String>,
}

fn run_decoy_pns(
    config: &ScenarioConfig,
    streams: &TrialStreams,
    report: &mut ScenarioReport,
) -> crate::Result<()> {
    let p = &config.parameters;
    let (s_signal, s_decoy, p_signal) = (p.f64("s_signal"), p.f64("s_decoy"), p.f64("p_signal"));
    let eta = p.f64("eta");
    let aggression = p.f64("aggression");
    let tol = p.f64("tolerance_sigmas");
    let scheme = DecoyScheme::signal_and_decoy(s_signal, s_decoy, p_signal)?;
    let attack = DecoyAttack::NaivePns { aggression };
    let n_pulses = p.u64("n_pulses");
    let outcomes: Vec<EnsembleOutcome> = (0..config.n_trials)
        .into_par_iter()
        .map(|i| {
            let records = decoy::simulate_ensemble(&scheme, eta, &attack, n_pulses, streams, i)?;
            let mut violations = Vec::new();
            if let Some(r) = records.iter().find(|r| {
                (r.amplitude.norm_sqr() - r.s_level).abs() > 1e-9
                    || r.eve_split_photons > r.realized_n.unwrap_or(0)
            }) {
                violations.push(format!("ensemble {i}: inconsistent pulse {r:?}"));
            }
            let mut emitted = [0u64; 2];
            let mut detected = [0u64; 2];
            for r in &records {
                emitted[r.level] += 1;
                detected[r.level] += (r.detected == Some(true)) as u64;
            }
            let alarm = match decoy::decoy_yield_check(&records, eta, tol) {
                Ok(c) => c.alarm,
                // one level never emitted: nothing to compare
                Err(crate::Error::NoDecoyStructure { .. }) => false,
                Err(e) => return Err(e),
            };
            Ok(EnsembleOutcome {
                alarm,
                emitted,
                detected,
                tagged_fraction: decoy::tagged_fraction(&records, eta).tagged_fraction,
                violations,
            })
        })
        .collect::<crate::Result<_>>()?;
    let n = outcomes.len() as u64;
    let alarms = outcomes.iter().filter(|o| o.alarm).count() as u64;
    let tested = [s_signal, s_decoy].iter().filter(|&&s| s > 0.0).count();
    let nominal = decoy::YieldCheck::nominal_false_alarm(tested, tol);
    report.metrics.push(proportion(
        "alarm_rate",
        alarms,
        n,
        (aggression == 0.0).then_some(nominal),
    ));
    report.metrics.push(Metric::exact("nominal_false_alarm", nominal));
    for (level, name, s) in [(0, "yield_signal", s_signal), (1, "yield_decoy", s_decoy)] {
        let e: u64 = outcomes.iter().map(|o| o.emitted[level]).sum();
        let d: u64 = outcomes.iter().map(|o| o.detected[level]).sum();
        report.metrics.push(proportion(
            name,
            d,
            e,
            Some(decoy::expected_yield(s, eta)),
        ));
    }
    let tagged: Vec<f64> = outcomes.iter().map(|o| o.tagged_fraction).collect();
    report.metrics.push(Metric::new(
        "tagged_fraction",
        Summary::from_values(&tagged),
        Some(expected_tagged_fraction(&scheme, eta, aggression)),
    ));
    let plan = NaivePnsPlan::calibrate(&scheme, eta);
    report.metrics.push(Metric::exact("forward_multi", plan.forward_multi));
    report.metrics.push(Metric::exact("forward_single", plan.forward_single));
    let (supply, throughput, breach) = decoy::breach_condition(s_signal, eta);
    report.metrics.push(Metric::exact("multi_photon_supply", supply));
    report
        .metrics
        .push(Metric::exact("single_photon_throughput", throughput));
    report.metrics.push(Metric::exact("breach", breach as u8 as f64));
    for o in outcomes {
        report.invariant_violations.extend(o.violations);
    }
    Ok(())
}

/// Tagged share of Babe's clicks under the naive PNS attack.
fn expected_tagged_fraction(scheme: &DecoyScheme, eta: f64, aggression: f64) -> f64 {
    let plan = NaivePnsPlan::calibrate(scheme, eta);
    let (mut tagged, mut clicks) = (0.0, 0.0);
    for l in scheme.levels() {
        let s = l.mean_photons;
        let multi = decoy::multi_photon_probability(s);
        let single = decoy::poisson_pmf(1, s);
        tagged += l.probability * aggression * multi * plan.forward_multi;
        clicks += l.probability
            * ((1.0 - aggression) * decoy::expected_yield(s, eta)
                + aggression * (multi * plan.forward_multi + single * plan.forward_single));
    }
    if clicks > 0.0 {
        tagged / clicks
    } else {
        0.0
    }
}

fn run_decoy_cbs(
    config: &ScenarioConfig,
    streams: &TrialStreams,
    report: &mut ScenarioReport,
) -> crate::Result<()> {
    let p = &config.parameters;
    let (s_a, s_b, kappa) = (p.f64("s_a"), p.f64("s_b"), p.f64("kappa"));
    let priors = (p.f64("prior_a"), 1.0 - p.f64("prior_a"));
    let d = decoy::discriminate_levels_poisson(kappa, s_a, s_b, priors, config.n_trials, streams)?;
    let q = d.success;
    report.metrics.push(Metric::new(
        "lr_success",
        Summary::with_std_error(q, q * (1.0 - q), d.n_trials, d.std_error),
        Some(d.analytic),
    ));
    let amp = |s: f64| Complex64::new(s.sqrt(), 0.0);
    let split = decoy::helstrom_error(amp(kappa * s_a), amp(kappa * s_b), priors)?;
    let full = decoy::helstrom_error(amp(s_a), amp(s_b), priors)?;
    report.metrics.push(Metric::exact("lr_error", 1.0 - d.analytic));
    report.metrics.push(Metric::exact("helstrom_error_split", split));
    report.metrics.push(Metric::exact("helstrom_error_full", full));
    let cutoff = (kappa * s_a.max(s_b) + 20.0 * (kappa * s_a.max(s_b)).sqrt() + 60.0) as u64;
    let best_threshold = (0..=cutoff)
        .map(|t| decoy::threshold_rule_success(kappa, s_a, s_b, priors, t))
        .fold(0.0, f64::max);
    report
        .metrics
        .push(Metric::exact("best_threshold_success", best_threshold));
    if split > 1.0 - d.analytic + 1e-12 {
        report.invariant_violations.push(format!(
            "quantum bound {split} above counting error {}",
            1.0 - d.analytic
        ));
    }
    if best_threshold > d.analytic + 1e-12 {
        report.invariant_violations.push(format!(
            "threshold rule {best_threshold} beats likelihood ratio {}",
            d.analytic
        ));
    }
    Ok(())
}

fn run_key_rate(config: &ScenarioConfig, report: &mut ScenarioReport) -> crate::Result<()> {
    let p = &config.parameters;
    let r = KeyRateReport::evaluate(&KeyRateInputs {
        qber: p.f64("qber"),
        n_bits: p.u64("n_bits"),
        f_factor: p.f64("f_factor"),
        lambda: p.f64("lambda"),
    })?;
    report.metrics.push(Metric::exact("key_rate", r.rate));
    report.metrics.push(Metric::exact("leak_ec", r.leak_ec));
    report.metrics.push(Metric::exact("log2_ie", r.log2_ie));
    report.metrics.push(Metric::exact("log2_p1", r.log2_p1));
    let b = key_rate::counting_bounds(p.u64("n_total"), p.u64("n_checked"), p.f64("delta"))?;
    report
        .metrics
        .push(Metric::exact("classical_exponent", b.classical_exponent));
    report
        .metrics
        .push(Metric::exact("quantum_exponent", b.quantum_exponent));
    report
        .metrics
        .push(Metric::exact("classical_bound", b.classical_bound()));
    report.metrics.push(Metric::exact("quantum_bound", b.quantum_bound()));
    for c in r.caveats {
        report.add_caveat(c);
    }
    Ok(())
}

fn deletion_ensemble(name: &str) -> Vec<EnsembleMember> {
    match name {
        "b92" => vec![
            EnsembleMember {
                state: qubit::bb84_state(false, Bb84Basis::Z),
                prior: 0.5,
                bit: false,
            },
            EnsembleMember {
                state: qubit::bb84_state(false, Bb84Basis::X),
                prior: 0.5,
                bit: true,
            },
        ],
        _ => qubit::bb84_ensemble(),
    }
}

fn run_deletion(
    config: &ScenarioConfig,
    streams: &TrialStreams,
    report: &mut ScenarioReport,
) -> crate::Result<()> {
    let p = &config.parameters;
    let ensemble = deletion_ensemble(p.str("ensemble"));
    let grid = qubit::DeletionGrid {
        angles: p.u64("angles") as usize,
        thresholds: p.u64("thresholds") as usize,
    };
    let best = qubit::optimal_deletion_advantage(&ensemble, p.f64("deletion_budget"), grid)?;
    report
        .metrics
        .push(Metric::exact("success_prob", best.success_prob));
    report.metrics.push(Metric::exact("basis_angle", best.basis_angle));
    report.metrics.push(Metric::exact("threshold", best.threshold));
    report
        .metrics
        .push(Metric::exact("kept_fraction", best.kept_fraction));

    let basis = MeasBasis::custom(best.basis_angle);
    let table = qubit::OutcomeTable::new(&ensemble, &basis);
    let n = config.n_trials;
    let counts: Vec<(u64, u64)> = (0..n.div_ceil(BATCH))
        .into_par_iter()
        .map(|b| {
            let mut rng = streams.stream(b, "optimize.check");
            let (mut kept, mut right) = (0u64, 0u64);
            for _ in 0..BATCH.min(n - b * BATCH) {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut member = ensemble[ensemble.len() - 1];
                for m in &ensemble {
                    acc += m.prior;
                    if u < acc {
                        member = *m;
                        break;
                    }
                }
                let (p0, _) = qubit::born_probability(&member.state, &basis)
                    .expect("ensemble states are normalized");
                let outcome = !rng.random_bool(p0.clamp(0.0, 1.0));
                if best.kept_outcomes[outcome as usize] {
                    kept += 1;
                    right += (table.guess(outcome) == member.bit) as u64;
                }
            }
            (kept, right)
        })
        .collect();
    let kept: u64 = counts.iter().map(|c| c.0).sum();
    let right: u64 = counts.iter().map(|c| c.1).sum();
    report.metrics.push(proportion(
        "mc_kept_fraction",
        kept,
        n,
        Some(best.kept_fraction),
    ));
    if kept > 0 {
        report.metrics.push(proportion(
            "mc_success",
            right,
            kept,
            Some(best.success_prob),
        ));
    }
    Ok(())
}
