//! Invariants as property tests. Statistical properties run on a fixed
//! proptest seed so that a pass is reproducible.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use qkd_lab::bb84::{self, Bb84Config, DeletionPolicy};
use qkd_lab::cv::{self, CvChannelParams, CvScenario, Quad, QuadCovariance};
use qkd_lab::decoy::{self, DecoyAttack, DecoyScheme, PulseRecord};
use qkd_lab::key_rate;
use qkd_lab::qubit::{self, EnsembleMember, MeasBasis, QubitState};
use qkd_lab::rng::derive_trial_rng;
use qkd_lab::TrialStreams;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn fixed(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn unit_state() -> impl Strategy<Value = QubitState> {
    (0.0..PI, 0.0..2.0 * PI, 0.0..2.0 * PI).prop_map(|(t, p0, p1)| {
        QubitState::new(
            Complex64::from_polar((t / 2.0).cos(), p0),
            Complex64::from_polar((t / 2.0).sin(), p1),
        )
        .unwrap()
    })
}

// ---- qubits ----

proptest! {
    #![proptest_config(fixed(256))]

    #[test]
    fn born_probabilities_sum_to_one(s in unit_state(), a in 0.0..PI) {
        let (p0, p1) = qubit::born_probability(&s, &MeasBasis::custom(a)).unwrap();
        prop_assert!((0.0..=1.0).contains(&p0) && (0.0..=1.0).contains(&p1));
        prop_assert!((p0 + p1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deletion_free_optimum_is_grid_maximum(
        angles in prop::collection::vec(0.0..PI, 2..5),
        weights in prop::collection::vec(0.05..1.0f64, 4),
    ) {
        let total: f64 = weights[..angles.len()].iter().sum();
        let ensemble: Vec<EnsembleMember> = angles
            .iter()
            .enumerate()
            .map(|(i, &th)| EnsembleMember {
                state: QubitState::from_angle(th),
                prior: weights[i] / total,
                bit: i % 2 == 1,
            })
            .collect();
        let grid = qubit::DeletionGrid { angles: 180, thresholds: 20 };
        let got = qubit::optimal_deletion_advantage(&ensemble, 0.0, grid).unwrap();
        let mut best: f64 = 0.0;
        for k in 0..180 {
            let a = PI * k as f64 / 180.0;
            let mut joint = [[0.0; 2]; 2];
            for m in &ensemble {
                let th = angles[ensemble.iter().position(|e| e == m).unwrap()];
                let c = (th - a).cos().powi(2);
                joint[m.bit as usize][0] += m.prior * c;
                joint[m.bit as usize][1] += m.prior * (1.0 - c);
            }
            best = best.max(joint[0][0].max(joint[1][0]) + joint[0][1].max(joint[1][1]));
        }
        prop_assert!((got.success_prob - best).abs() < 1e-9, "{} vs {best}", got.success_prob);
        prop_assert!((got.kept_fraction - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(fixed(4))]

    #[test]
    fn measurement_frequencies_follow_born_rule(s in unit_state(), a in 0.0..PI, seed in any::<u64>()) {
        let basis = MeasBasis::custom(a);
        let (p0, p1) = qubit::born_probability(&s, &basis).unwrap();
        prop_assume!(p0.min(p1) > 1e-3);
        let mut rng = derive_trial_rng(seed, 0, "prop.born");
        let n = 1_000_000u64;
        let zeros = (0..n).filter(|_| !qubit::measure_and_resend(&s, &basis, &mut rng).0).count() as f64;
        let ones = n as f64 - zeros;
        let e0 = p0 * n as f64;
        let e1 = p1 * n as f64;
        let chi2 = (zeros - e0).powi(2) / e0 + (ones - e1).powi(2) / e1;
        prop_assert!(chi2 < ChiSquared::new(1.0).unwrap().inverse_cdf(0.99), "chi2 = {chi2}");
    }
}

#[test]
fn breidbart_success_is_exact() {
    let ens = qubit::bb84_ensemble();
    let best = qubit::optimal_deletion_advantage(&ens, 0.0, Default::default()).unwrap();
    assert!((best.success_prob - (PI / 8.0).cos().powi(2)).abs() < 1e-15);
}

// ---- CV channel ----

proptest! {
    #![proptest_config(fixed(24))]

    #[test]
    fn cv_moments_match_propagation(
        t in 0.02..1.0f64,
        v in 1.0..100.0f64,
        het in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let p = CvChannelParams::new(t, v);
        let scenario = if het { CvScenario::HeterodyneResend } else { CvScenario::Passive };
        let r = cv::reconciliation_advantage(&p, scenario, 20_000, &TrialStreams::new(seed)).unwrap();
        for m in [&r.var_mb, &r.var_me, &r.cov_m_mb] {
            prop_assert!(m.sigmas_off().abs() < 4.0, "{m:?}");
        }
    }

    #[test]
    fn mutual_info_is_monotone(s in 0.01..100.0f64, n in 0.01..100.0f64, ds in 0.001..10.0f64) {
        let base = cv::gaussian_mutual_info(s, n).unwrap();
        prop_assert!(cv::gaussian_mutual_info(s + ds, n).unwrap() > base);
        prop_assert!(cv::gaussian_mutual_info(s, n + ds).unwrap() < base);
    }
}

#[test]
fn heterodyne_resend_dominates_on_grid() {
    for i in 1..=20 {
        let t = 0.05 * i as f64;
        for v in [5.0, 10.0, 25.0, 50.0, 100.0] {
            let mut p = CvChannelParams::new(t, v);
            p.var_n_a = 0.0;
            let c = QuadCovariance::analytic(&p, CvScenario::HeterodyneResend);
            let i_ab = c.mutual_info(Quad::M, Quad::MB);
            let i_ae = c.mutual_info(Quad::M, Quad::ME);
            assert!(i_ae > i_ab, "T={t} V={v}");
            assert!(c.linear_mse(Quad::MB, Quad::ME) <= c.linear_mse(Quad::MB, Quad::MA));
            assert!(key_rate::channel_rate(i_ab, i_ae).unwrap().rate < 0.0);
        }
    }
}

#[test]
fn excess_noise_false_alarm_is_controlled() {
    for (i, (t, dt, v, n_pulses)) in [
        (0.1, 0.02, 25.0, 1000usize),
        (0.1, 0.0, 25.0, 1000),
        (0.3, 0.05, 10.0, 500),
        (0.5, 0.01, 50.0, 200),
    ]
    .into_iter()
    .enumerate()
    {
        let mut p = CvChannelParams::new(t, v);
        p.delta_t = dt;
        let out = cv::excess_noise_test(&p, n_pulses, 0.05, 2000, &TrialStreams::new(100 + i as u64)).unwrap();
        let se = (0.05 * 0.95 / 2000.0f64).sqrt();
        assert!(out.false_alarm_achieved <= 0.05 + 3.0 * se, "case {i}: {out:?}");
    }
}

// ---- BB84 ----

fn policy() -> impl Strategy<Value = DeletionPolicy> {
    prop_oneof![
        Just(DeletionPolicy::None),
        Just(DeletionPolicy::DeleteBitOne),
        (0.5..1.0f64).prop_map(DeletionPolicy::DeleteLowConfidence),
    ]
}

proptest! {
    #![proptest_config(fixed(64))]

    #[test]
    fn session_bookkeeping_is_conserved(
        n_sent in 1u64..3000,
        eta in 0.01..=1.0f64,
        f in 0.0..=1.0f64,
        a in 0.0..PI,
        deletion in policy(),
        check in 0.05..=1.0f64,
        eps in 0.0..0.2f64,
        matched in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let cfg = Bb84Config {
            n_sent,
            eta,
            attack_fraction: f,
            attack_basis: MeasBasis::custom(a),
            deletion_policy: deletion,
            check_fraction: check,
            intrinsic_error: eps,
            match_arrival_rate: matched,
            ..Default::default()
        };
        let t = bb84::run_session(&cfg, &mut derive_trial_rng(seed, 0, "prop.session")).unwrap();
        prop_assert!(t.check_conservation().is_ok());
        let c = t.counts;
        prop_assert_eq!(c.deleted + c.lost + c.arrived, c.sent);
        prop_assert!(c.sifted <= c.arrived);
        prop_assert_eq!(t.checked_positions.len() + t.key_positions.len(), t.sifted_key.len());
    }

    #[test]
    fn matched_arrival_rate_is_held(
        eta in 0.01..=1.0f64,
        f in 0.0..=1.0f64,
        deletion in policy(),
    ) {
        let cfg = Bb84Config {
            eta,
            attack_fraction: f,
            deletion_policy: deletion,
            match_arrival_rate: true,
            ..Default::default()
        };
        let e = bb84::expected_statistics(&cfg).unwrap();
        prop_assert!((e.arrival_rate - eta).abs() <= 0.05 * eta, "{} vs {eta}", e.arrival_rate);
    }
}

#[test]
fn interception_without_deletion_leaves_key_unbiased() {
    let mut within = 0;
    let runs = 60;
    for i in 0..runs {
        let cfg = Bb84Config {
            n_sent: 100_000,
            attack_fraction: 0.02 + 0.9 * i as f64 / runs as f64,
            deletion_policy: DeletionPolicy::None,
            qber_threshold: 1.0,
            ..Default::default()
        };
        let t = bb84::run_ensemble(&cfg, 1, &TrialStreams::new(i)).unwrap();
        let r = bb84::key_bias_report(&t).unwrap();
        within += (r.bias_sigmas.abs() <= 3.0) as usize;
    }
    assert!(within as f64 >= 0.95 * runs as f64, "{within}/{runs}");
}

#[test]
fn observed_qber_matches_composition() {
    for (i, (eta, f, deletion, eps)) in [
        (0.1, 0.08, DeletionPolicy::DeleteBitOne, 0.0),
        (0.1, 0.3, DeletionPolicy::None, 0.02),
        (0.5, 0.5, DeletionPolicy::DeleteLowConfidence(0.9), 0.01),
        (1.0, 0.2, DeletionPolicy::None, 0.05),
    ]
    .into_iter()
    .enumerate()
    {
        let cfg = Bb84Config {
            n_sent: 200_000,
            eta,
            attack_fraction: f,
            deletion_policy: deletion,
            intrinsic_error: eps,
            check_fraction: 1.0,
            qber_threshold: 1.0,
            ..Default::default()
        };
        let want = bb84::expected_statistics(&cfg).unwrap().qber;
        let t = bb84::run_ensemble(&cfg, 1, &TrialStreams::new(40 + i as u64)).unwrap();
        let n = t[0].checked_positions.len() as f64;
        let got = t[0].qber_observed.unwrap();
        let se = (want * (1.0 - want) / n).sqrt();
        assert!((got - want).abs() < 4.0 * se, "case {i}: {got} vs {want}");
    }
}

#[test]
fn tuned_attack_usually_passes_the_check() {
    // lossless channel, no deletion: QBER sits just below the threshold
    for eps in [0.01, 0.02, 0.04] {
        let f = bb84::max_attack_fraction(0.11 - eps, 0.25).unwrap();
        let cfg = Bb84Config {
            n_sent: 20_000,
            eta: 1.0,
            attack_fraction: f,
            intrinsic_error: eps,
            ..Default::default()
        };
        let t = bb84::run_ensemble(&cfg, 200, &TrialStreams::new(7)).unwrap();
        let aborted = t.iter().filter(|s| s.aborted).count();
        assert!(aborted < 100, "eps={eps}: {aborted}/200 aborted");
    }
}

// ---- decoy source ----

proptest! {
    #![proptest_config(fixed(256))]

    #[test]
    fn coherent_split_conserves_energy(s in 0.0..50.0f64, phase in 0.0..2.0 * PI, kappa in 0.0..=1.0f64) {
        let p = PulseRecord::new(0, s, phase);
        prop_assert!((p.amplitude.norm_sqr() - s).abs() < 1e-9);
        let out = decoy::coherent_split(&p, kappa).unwrap();
        let fwd = match out.forwarded {
            decoy::Forwarded::Amplitude(a) => a,
            other => panic!("{other:?}"),
        };
        prop_assert!((out.eve_split_amplitude.norm_sqr() + fwd.norm_sqr() - s).abs() < 1e-12 * s.max(1.0));
    }

    #[test]
    fn likelihood_ratio_beats_thresholds(
        kappa in 0.0..=1.0f64,
        sa in 0.0..5.0f64,
        sb in 0.0..5.0f64,
        pa in 0.05..0.95f64,
    ) {
        let lr = decoy::likelihood_ratio_success(kappa, sa, sb, (pa, 1.0 - pa));
        for tau in 0..40 {
            let t = decoy::threshold_rule_success(kappa, sa, sb, (pa, 1.0 - pa), tau);
            prop_assert!(t <= lr + 1e-12, "tau={tau}: {t} > {lr}");
        }
    }

    #[test]
    fn helstrom_bounds_counting(
        kappa in 0.0..=1.0f64,
        sa in 0.0..5.0f64,
        sb in 0.0..5.0f64,
        pa in 0.05..0.95f64,
    ) {
        let amp = |s: f64| Complex64::new((kappa * s).sqrt(), 0.0);
        let q = decoy::helstrom_error(amp(sa), amp(sb), (pa, 1.0 - pa)).unwrap();
        let lr = decoy::likelihood_ratio_success(kappa, sa, sb, (pa, 1.0 - pa));
        prop_assert!(q <= 1.0 - lr + 1e-12, "{q} > {}", 1.0 - lr);
    }

    #[test]
    fn lr_success_nondecreasing_in_kappa(k1 in 0.0..=1.0f64, k2 in 0.0..=1.0f64, sa in 0.0..4.0f64, sb in 0.0..4.0f64) {
        let (lo, hi) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
        let a = decoy::likelihood_ratio_success(lo, sa, sb, (0.5, 0.5));
        let b = decoy::likelihood_ratio_success(hi, sa, sb, (0.5, 0.5));
        prop_assert!(b >= a - 1e-12);
    }
}

#[test]
fn alarm_rate_is_monotone_in_aggression() {
    let scheme = DecoyScheme::signal_and_decoy(0.5, 0.1, 0.5).unwrap();
    let streams = TrialStreams::new(77);
    let ensembles = 40;
    let mut last = 0;
    for aggression in [0.0, 0.01, 0.02, 0.05, 0.1, 0.5, 1.0] {
        let attack = DecoyAttack::NaivePns { aggression };
        let alarms = (0..ensembles)
            .filter(|&i| {
                let recs = decoy::simulate_ensemble(&scheme, 0.1, &attack, 100_000, &streams, i).unwrap();
                decoy::decoy_yield_check(&recs, 0.1, 3.0).unwrap().alarm
            })
            .count();
        assert!(alarms >= last, "aggression {aggression}: {alarms} < {last}");
        last = alarms;
    }
    assert_eq!(last, ensembles as usize);
}

// ---- key rate ----

proptest! {
    #![proptest_config(fixed(256))]

    #[test]
    fn ideal_rate_strictly_decreasing(a in 0.0001..0.4999f64, b in 0.0001..0.4999f64) {
        prop_assume!((a - b).abs() > 1e-9);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(key_rate::key_rate_ideal(lo).unwrap() > key_rate::key_rate_ideal(hi).unwrap());
    }

    #[test]
    fn leak_linear_in_n_monotone_in_qber(
        f in 1.0..2.0f64,
        n in 1.0..1e6f64,
        k in 1.0..10.0f64,
        q1 in 0.0..=0.5f64,
        q2 in 0.0..=0.5f64,
    ) {
        let q = q1.min(q2);
        let a = key_rate::leak_ec(f, n, q).unwrap().bits;
        let b = key_rate::leak_ec(f, k * n, q).unwrap().bits;
        prop_assert!((b - k * a).abs() <= 1e-9 * b.abs().max(1.0));
        prop_assert!(key_rate::leak_ec(f, n, q1.max(q2)).unwrap().bits >= a);
    }

    #[test]
    fn quantum_exponent_is_half(n_total in 3u64..100_000, frac in 0.01..0.99f64, delta in 0.001..0.5f64) {
        let n = ((n_total as f64 * frac) as u64).clamp(1, n_total - 1);
        let b = key_rate::counting_bounds(n_total, n, delta).unwrap();
        prop_assert!((b.quantum_exponent / b.classical_exponent - 0.5).abs() < 1e-15);
        prop_assert!(b.classical_bound() <= b.quantum_bound());
    }
}

#[test]
fn ideal_rate_crosses_zero_between_010_and_012() {
    assert!(key_rate::key_rate_ideal(0.10).unwrap() > 0.0);
    assert!(key_rate::key_rate_ideal(0.12).unwrap() < 0.0);
}
