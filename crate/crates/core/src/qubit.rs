//! Two-level state algebra: the four BB84 states, measurement bases on the
//! real great circle, Born-rule probabilities and measure-and-resend.
//!
//! Bits are `bool` (`true` = 1). A basis at angle `a` has eigenstates
//! `(cos a, sin a)` for outcome 0 and `(-sin a, cos a)` for outcome 1, so the
//! Z basis sits at 0, X at π/4 and the Breidbart basis halfway, at π/8.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, FRAC_PI_8, PI};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};

/// Normalization tolerance for states and probability sums.
pub const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bb84Basis {
    Z,
    X,
}

impl Bb84Basis {
    pub fn from_bit(b: bool) -> Self {
        if b {
            Bb84Basis::X
        } else {
            Bb84Basis::Z
        }
    }

    pub fn meas_basis(self) -> MeasBasis {
        match self {
            Bb84Basis::Z => MeasBasis::z(),
            Bb84Basis::X => MeasBasis::x(),
        }
    }
}

/// A pure qubit state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    pub amp0: Complex64,
    pub amp1: Complex64,
}

impl QubitState {
    pub fn new(amp0: Complex64, amp1: Complex64) -> Result<Self> {
        let state = Self { amp0, amp1 };
        state.check_normalized()?;
        Ok(state)
    }

    /// Real state `(cos θ, sin θ)`.
    pub fn from_angle(theta: f64) -> Self {
        Self {
            amp0: Complex64::new(theta.cos(), 0.0),
            amp1: Complex64::new(theta.sin(), 0.0),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp0.norm_sqr() + self.amp1.norm_sqr()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    fn check_normalized(&self) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(Error::Unnormalized {
                norm: self.norm_sqr(),
            })
        }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &QubitState) -> Complex64 {
        self.amp0.conj() * other.amp0 + self.amp1.conj() * other.amp1
    }

    /// `|<self|other>|²`.
    pub fn overlap_prob(&self, other: &QubitState) -> f64 {
        self.inner(other).norm_sqr()
    }
}

/// The canonical BB84 state for `(bit, basis)`.
pub fn bb84_state(bit: bool, basis: Bb84Basis) -> QubitState {
    let (a0, a1) = match (basis, bit) {
        (Bb84Basis::Z, false) => (1.0, 0.0),
        (Bb84Basis::Z, true) => (0.0, 1.0),
        (Bb84Basis::X, false) => (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
        (Bb84Basis::X, true) => (FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    };
    QubitState {
        amp0: Complex64::new(a0, 0.0),
        amp1: Complex64::new(a1, 0.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisLabel {
    Z,
    X,
    Breidbart,
    Custom,
}

/// Projective measurement basis on the real great circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasBasis {
    pub angle: f64,
    pub label: BasisLabel,
}

impl MeasBasis {
    pub fn z() -> Self {
        Self {
            angle: 0.0,
            label: BasisLabel::Z,
        }
    }

    pub fn x() -> Self {
        Self {
            angle: FRAC_PI_4,
            label: BasisLabel::X,
        }
    }

    /// The intermediate basis between Z and X.
    pub fn breidbart() -> Self {
        Self {
            angle: FRAC_PI_8,
            label: BasisLabel::Breidbart,
        }
    }

    pub fn custom(angle: f64) -> Self {
        Self {
            angle,
            label: BasisLabel::Custom,
        }
    }

    pub fn eigenstate(&self, outcome: bool) -> QubitState {
        if outcome {
            QubitState::from_angle(self.angle + PI / 2.0)
        } else {
            QubitState::from_angle(self.angle)
        }
    }

    /// Outcome probabilities without the normalization check.
    fn probabilities(&self, state: &QubitState) -> (f64, f64) {
        let p0 = self.eigenstate(false).overlap_prob(state);
        let p1 = self.eigenstate(true).overlap_prob(state);
        let total = p0 + p1;
        let p0 = (p0 / total).clamp(0.0, 1.0);
        (p0, 1.0 - p0)
    }
}

/// Born-rule outcome probabilities `(p0, p1)` of measuring `state` in `basis`.
pub fn born_probability(state: &QubitState, basis: &MeasBasis) -> Result<(f64, f64)> {
    state.check_normalized()?;
    Ok(basis.probabilities(state))
}

/// Measure `state` in `basis` and prepare the eigenstate of the outcome.
pub fn measure_and_resend<R: Rng + ?Sized>(
    state: &QubitState,
    basis: &MeasBasis,
    rng: &mut R,
) -> (bool, QubitState) {
    debug_assert!(state.is_normalized());
    let (p0, _) = basis.probabilities(state);
    let outcome = rng.random::<f64>() >= p0;
    (outcome, basis.eigenstate(outcome))
}

/// One candidate state with its prior and the bit it encodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleMember {
    pub state: QubitState,
    pub prior: f64,
    pub bit: bool,
}

/// The four BB84 states with uniform priors.
pub fn bb84_ensemble() -> Vec<EnsembleMember> {
    let mut out = Vec::with_capacity(4);
    for basis in [Bb84Basis::Z, Bb84Basis::X] {
        for bit in [false, true] {
            out.push(EnsembleMember {
                state: bb84_state(bit, basis),
                prior: 0.25,
                bit,
            });
        }
    }
    out
}

/// Joint probabilities `P(bit, outcome)` for a measurement on an ensemble,
/// indexed `[bit][outcome]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeTable {
    pub joint: [[f64; 2]; 2],
}

impl OutcomeTable {
    pub fn new(ensemble: &[EnsembleMember], basis: &MeasBasis) -> Self {
        let mut joint = [[0.0; 2]; 2];
        for m in ensemble {
            let (p0, p1) = basis.probabilities(&m.state);
            joint[m.bit as usize][0] += m.prior * p0;
            joint[m.bit as usize][1] += m.prior * p1;
        }
        Self { joint }
    }

    pub fn outcome_mass(&self, outcome: bool) -> f64 {
        let k = outcome as usize;
        self.joint[0][k] + self.joint[1][k]
    }

    /// `max_b P(b, outcome)`: the mass guessed correctly on this outcome.
    pub fn correct_mass(&self, outcome: bool) -> f64 {
        let k = outcome as usize;
        self.joint[0][k].max(self.joint[1][k])
    }

    /// MAP bit guess for an outcome.
    pub fn guess(&self, outcome: bool) -> bool {
        let k = outcome as usize;
        self.joint[1][k] > self.joint[0][k]
    }

    /// Posterior probability that the MAP guess is right. Outcomes that never
    /// occur count as fully confident.
    pub fn confidence(&self, outcome: bool) -> f64 {
        let mass = self.outcome_mass(outcome);
        if mass <= 0.0 {
            1.0
        } else {
            self.correct_mass(outcome) / mass
        }
    }
}

fn check_ensemble(ensemble: &[EnsembleMember]) -> Result<()> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let sum: f64 = ensemble.iter().map(|m| m.prior).sum();
    if (sum - 1.0).abs() > 1e-9 || ensemble.iter().any(|m| m.prior < 0.0) {
        return Err(Error::BadPriors { sum });
    }
    for m in ensemble {
        m.state.check_normalized()?;
    }
    Ok(())
}

/// Grid sizes for [`optimal_deletion_advantage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeletionGrid {
    /// Measurement angles, spread uniformly over `[0, π)`.
    pub angles: usize,
    /// Confidence thresholds, spread uniformly over `[0.5, 1]`.
    pub thresholds: usize,
}

impl Default for DeletionGrid {
    fn default() -> Self {
        Self {
            angles: 720,
            thresholds: 100,
        }
    }
}

/// Best measurement and keep rule found by the grid search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeletionOptimum {
    pub basis_angle: f64,
    /// Outcomes with posterior confidence below this are deleted.
    pub threshold: f64,
    /// Which outcomes (`[0, 1]`) the rule keeps.
    pub kept_outcomes: [bool; 2],
    pub kept_fraction: f64,
    /// Probability of guessing the bit correctly, averaged over kept results.
    pub success_prob: f64,
}

/// Grid search for the best bit-guessing probability when a fraction
/// `deletion_budget` of measurement results may be discarded.
///
/// For each angle the rule "delete outcomes whose posterior confidence is
/// below `t`" is tried for every threshold `t`; rules keeping less than
/// `1 - deletion_budget` of the results are infeasible.
pub fn optimal_deletion_advantage(
    ensemble: &[EnsembleMember],
    deletion_budget: f64,
    grid: DeletionGrid,
) -> Result<DeletionOptimum> {
    check_ensemble(ensemble)?;
    check_range(
        "deletion_budget",
        deletion_budget,
        "[0,1)",
        (0.0..1.0).contains(&deletion_budget),
    )?;
    if grid.angles == 0 || grid.thresholds < 2 {
        return Err(Error::Invalid(
            "deletion grid needs >= 1 angle and >= 2 thresholds".into(),
        ));
    }
    let min_kept = 1.0 - deletion_budget;
    let mut best: Option<DeletionOptimum> = None;
    for i in 0..grid.angles {
        let angle = PI * i as f64 / grid.angles as f64;
        let table = OutcomeTable::new(ensemble, &MeasBasis::custom(angle));
        for j in 0..grid.thresholds {
            let threshold = 0.5 + 0.5 * j as f64 / (grid.thresholds - 1) as f64;
            let kept = [false, true].map(|k| table.confidence(k) >= threshold - 1e-12);
            let mut kept_mass = 0.0;
            let mut correct = 0.0;
            for k in [false, true] {
                if kept[k as usize] {
                    kept_mass += table.outcome_mass(k);
                    correct += table.correct_mass(k);
                }
            }
            if kept_mass <= 0.0 || kept_mass < min_kept - 1e-12 {
                continue;
            }
            let success_prob = correct / kept_mass;
            if best.is_none_or(|b| success_prob > b.success_prob + 1e-12) {
                best = Some(DeletionOptimum {
                    basis_angle: angle,
                    threshold,
                    kept_outcomes: kept,
                    kept_fraction: kept_mass,
                    success_prob,
                });
            }
        }
    }
    // threshold 0.5 keeps everything, so some rule is always feasible
    best.ok_or_else(|| Error::Invalid("no feasible keep rule".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_trial_rng;

    const COS2_PI_8: f64 = 0.853_553_390_593_273_8;

    #[test]
    fn bb84_states_match_definitions() {
        let s = bb84_state(false, Bb84Basis::Z);
        assert_eq!((s.amp0.re, s.amp1.re), (1.0, 0.0));
        let s = bb84_state(true, Bb84Basis::X);
        assert!((s.amp0.re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((s.amp1.re + FRAC_1_SQRT_2).abs() < 1e-15);
        let p = bb84_state(false, Bb84Basis::Z).overlap_prob(&bb84_state(false, Bb84Basis::X));
        assert!((p - 0.5).abs() < 1e-15);
    }

    #[test]
    fn born_examples() {
        let zero = bb84_state(false, Bb84Basis::Z);
        assert_eq!(born_probability(&zero, &MeasBasis::z()).unwrap(), (1.0, 0.0));
        let (p0, p1) = born_probability(&zero, &MeasBasis::breidbart()).unwrap();
        assert!((p0 - COS2_PI_8).abs() < 1e-12);
        assert!((p1 - (1.0 - COS2_PI_8)).abs() < 1e-12);
        let plus = bb84_state(false, Bb84Basis::X);
        let (p0, p1) = born_probability(&plus, &MeasBasis::z()).unwrap();
        assert!((p0 - 0.5).abs() < 1e-12 && (p1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unnormalized_state_is_rejected() {
        let bad = QubitState {
            amp0: Complex64::new(1.0, 0.0),
            amp1: Complex64::new(0.1, 0.0),
        };
        assert!(matches!(
            born_probability(&bad, &MeasBasis::z()),
            Err(Error::Unnormalized { .. })
        ));
        assert!(QubitState::new(bad.amp0, bad.amp1).is_err());
    }

    #[test]
    fn basis_states_are_orthonormal() {
        for b in [MeasBasis::z(), MeasBasis::x(), MeasBasis::breidbart(), MeasBasis::custom(1.234)] {
            let e0 = b.eigenstate(false);
            let e1 = b.eigenstate(true);
            assert!(e0.inner(&e1).norm() < 1e-12);
            assert!(e0.is_normalized() && e1.is_normalized());
        }
    }

    #[test]
    fn eigenstate_measurement_is_deterministic() {
        let mut rng = derive_trial_rng(1, 0, "t");
        let zero = bb84_state(false, Bb84Basis::Z);
        for _ in 0..100 {
            let (o, resent) = measure_and_resend(&zero, &MeasBasis::z(), &mut rng);
            assert!(!o);
            assert_eq!(resent.amp0.re, 1.0);
        }
    }

    #[test]
    fn complex_phases_do_not_change_probabilities() {
        let s = QubitState::new(
            Complex64::new(0.0, 1.0) * COS2_PI_8.sqrt(),
            Complex64::new(1.0, 0.0) * (1.0 - COS2_PI_8).sqrt(),
        )
        .unwrap();
        let (p0, _) = born_probability(&s, &MeasBasis::z()).unwrap();
        assert!((p0 - COS2_PI_8).abs() < 1e-12);
    }

    #[test]
    fn deletion_empty_ensemble_rejected() {
        assert_eq!(
            optimal_deletion_advantage(&[], 0.0, DeletionGrid::default()),
            Err(Error::EmptyEnsemble)
        );
    }

    #[test]
    fn deletion_budget_must_be_below_one() {
        assert!(optimal_deletion_advantage(&bb84_ensemble(), 1.0, DeletionGrid::default()).is_err());
    }

    #[test]
    fn bb84_optimum_is_breidbart() {
        let opt = optimal_deletion_advantage(&bb84_ensemble(), 0.0, DeletionGrid::default()).unwrap();
        assert!((opt.success_prob - COS2_PI_8).abs() < 1e-12);
        assert!((opt.basis_angle - FRAC_PI_8).abs() < 1e-12);
        assert_eq!(opt.kept_fraction, 1.0);
    }

    #[test]
    fn single_known_state_is_always_guessed() {
        let ens = [EnsembleMember {
            state: bb84_state(true, Bb84Basis::X),
            prior: 1.0,
            bit: true,
        }];
        for d in [0.0, 0.3, 0.9] {
            let opt = optimal_deletion_advantage(&ens, d, DeletionGrid::default()).unwrap();
            assert!((opt.success_prob - 1.0).abs() < 1e-12);
        }
    }
}
