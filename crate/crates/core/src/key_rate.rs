//! Closed-form key-rate, leakage and sampling-bound formulas.
//!
//! These are formulas, not security statements: every report produced here
//! carries caveat annotations that say what the number does not establish.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, check_range, Error, Result};

pub const CAVEAT_CHANNEL_MI: &str = "channel mutual information I(A;E) is not the mutual information I_E(K) Eve holds on the key; the formula assumes a constant channel and is meaningful for passive attacks only";
pub const CAVEAT_ASYMPTOTIC: &str = "asymptotic in key length; no finite-size correction";
pub const CAVEAT_CSS: &str = "rests on a nonconstructive CSS-code argument; not shown to hold for LDPC error correction or linear hashing";
pub const CAVEAT_SIDE_INFO: &str = "error-correction and privacy-amplification side information not accounted for";
pub const CAVEAT_NO_SECURITY_LEVEL: &str = "a rate without a stated security level; I_E -> 0 does not make the key close to uniform";
pub const CAVEAT_NEGATIVE: &str = "rate <= 0: no key";
pub const CAVEAT_F_RANGE: &str = "ECC inefficiency factor outside the customary [1,2] range";
pub const CAVEAT_P1_EXPONENT: &str = "p1 ~ 2^(-lambda n) taken as equality at the exponent level";

/// `h(p) = -p·log₂p - (1-p)·log₂(1-p)`, with `h(0) = h(1) = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    check_probability("p", p)?;
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

fn check_qber(qber: f64) -> Result<()> {
    check_range("qber", qber, "[0,0.5]", (0.0..=0.5).contains(&qber))
}

/// `R = 1 - 2·h(QBER)` bits per channel use; negative values are returned as-is.
pub fn key_rate_ideal(qber: f64) -> Result<f64> {
    check_qber(qber)?;
    Ok(1.0 - 2.0 * binary_entropy(qber)?)
}

/// A rate together with its annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedRate {
    pub rate: f64,
    pub caveats: Vec<String>,
}

/// `R = I(A;B) - I(A;E)`.
pub fn channel_rate(i_ab: f64, i_ae: f64) -> Result<AnnotatedRate> {
    check_range("i_ab", i_ab, "[0,inf)", i_ab >= 0.0)?;
    check_range("i_ae", i_ae, "[0,inf)", i_ae >= 0.0)?;
    let rate = i_ab - i_ae;
    let mut caveats = vec![CAVEAT_CHANNEL_MI.to_string(), CAVEAT_ASYMPTOTIC.to_string()];
    if rate <= 0.0 {
        caveats.push(CAVEAT_NEGATIVE.to_string());
    }
    Ok(AnnotatedRate { rate, caveats })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakEc {
    pub bits: f64,
    pub warnings: Vec<String>,
}

/// Error-correction leakage `f·n·h(QBER)`.
///
/// `f` outside `[1, 2]` is accepted with a warning.
pub fn leak_ec(f_factor: f64, n: f64, qber: f64) -> Result<LeakEc> {
    check_range("f", f_factor, "(0,inf)", f_factor > 0.0)?;
    check_range("n", n, "[0,inf)", n >= 0.0)?;
    let mut warnings = Vec::new();
    if !(1.0..=2.0).contains(&f_factor) {
        log::warn!("leak_ec: f = {f_factor} outside [1,2]");
        warnings.push(CAVEAT_F_RANGE.to_string());
    }
    Ok(LeakEc {
        bits: f_factor * n * binary_entropy(qber)?,
        warnings,
    })
}

/// Eve's mutual information and whole-key guessing probability in log₂ form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IeP1Profile {
    /// `log₂ I_E = -(λn - log₂n)`.
    pub log2_ie: f64,
    /// `log₂ p̄₁ = -λn`.
    pub log2_p1: f64,
    /// `log₂ 2⁻ⁿ`, the uniform-key guessing probability.
    pub log2_uniform: f64,
}

impl IeP1Profile {
    /// `log₂p̄₁ / log₂2⁻ⁿ`; equals `λ`.
    pub fn exponent_ratio(&self) -> f64 {
        self.log2_p1 / self.log2_uniform
    }
}

pub fn ie_p1_profile(lambda: f64, n: u64) -> Result<IeP1Profile> {
    check_range("lambda", lambda, "(0,inf)", lambda > 0.0)?;
    if n < 2 {
        return Err(Error::OutOfRange {
            name: "n",
            value: n as f64,
            allowed: "[2,inf)",
        });
    }
    let n = n as f64;
    Ok(IeP1Profile {
        log2_ie: -(lambda * n - n.log2()),
        log2_p1: -lambda * n,
        log2_uniform: -n,
    })
}

/// Tail-bound exponents (log₂ of the bound) for transferring an error count
/// from a checked sample to the whole sifted key.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountingBounds {
    pub classical_exponent: f64,
    pub quantum_exponent: f64,
}

impl CountingBounds {
    pub fn classical_bound(&self) -> f64 {
        self.classical_exponent.exp2()
    }

    pub fn quantum_bound(&self) -> f64 {
        self.quantum_exponent.exp2()
    }
}

/// Serfling's bound for sampling `n_checked` of `n_total` 0/1 items without
/// replacement:
///
/// ```text
/// P(sample mean - population mean >= δ) <= exp(-2·n·δ² / (1 - (n-1)/N))
/// ```
///
/// The quantum-counting exponent is half the classical one.
pub fn counting_bounds(n_total: u64, n_checked: u64, delta: f64) -> Result<CountingBounds> {
    if !(n_checked > 0 && n_checked < n_total) {
        return Err(Error::Invalid(format!(
            "counting_bounds needs 0 < n_checked < n_total, got {n_checked} of {n_total}"
        )));
    }
    check_range("delta", delta, "(0,1)", delta > 0.0 && delta < 1.0)?;
    let n = n_checked as f64;
    let fpc = 1.0 - (n - 1.0) / n_total as f64;
    let classical = -2.0 * n * delta * delta / fpc * std::f64::consts::LOG2_E;
    Ok(CountingBounds {
        classical_exponent: classical,
        quantum_exponent: classical / 2.0,
    })
}

/// Inputs for a composite [`KeyRateReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateInputs {
    pub qber: f64,
    pub n_bits: u64,
    pub f_factor: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub rate: f64,
    pub qber: f64,
    pub leak_ec: f64,
    pub ie_bound: f64,
    pub p1_bound: f64,
    pub log2_ie: f64,
    pub log2_p1: f64,
    pub caveats: Vec<String>,
}

impl KeyRateReport {
    pub fn evaluate(inputs: &KeyRateInputs) -> Result<Self> {
        let rate = key_rate_ideal(inputs.qber)?;
        let leak = leak_ec(inputs.f_factor, inputs.n_bits as f64, inputs.qber)?;
        let profile = ie_p1_profile(inputs.lambda, inputs.n_bits)?;
        let mut caveats: Vec<String> = [
            CAVEAT_ASYMPTOTIC,
            CAVEAT_CSS,
            CAVEAT_SIDE_INFO,
            CAVEAT_NO_SECURITY_LEVEL,
            CAVEAT_P1_EXPONENT,
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        if rate <= 0.0 {
            caveats.push(CAVEAT_NEGATIVE.to_string());
        }
        caveats.extend(leak.warnings);
        Ok(Self {
            rate,
            qber: inputs.qber,
            leak_ec: leak.bits,
            ie_bound: profile.log2_ie.exp2(),
            p1_bound: profile.log2_p1.exp2().min(1.0),
            log2_ie: profile.log2_ie,
            log2_p1: profile.log2_p1,
            caveats,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_examples() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.11).unwrap() - 0.4999).abs() < 1e-4);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
    }

    #[test]
    fn ideal_rate_examples() {
        assert_eq!(key_rate_ideal(0.0).unwrap(), 1.0);
        assert!((key_rate_ideal(0.11).unwrap() - 0.0002).abs() < 1e-4);
        assert!((key_rate_ideal(0.25).unwrap() + 0.6226).abs() < 1e-4);
        assert!(key_rate_ideal(0.6).is_err());
    }

    #[test]
    fn channel_rate_examples() {
        let r = channel_rate(1.0, 0.3).unwrap();
        assert!((r.rate - 0.7).abs() < 1e-15);
        assert!(r.caveats.iter().any(|c| c.contains("not the mutual information I_E(K)")));
        let r = channel_rate(0.4, 0.4).unwrap();
        assert_eq!(r.rate, 0.0);
        assert!(r.caveats.iter().any(|c| c == CAVEAT_NEGATIVE));
    }

    #[test]
    fn leak_examples() {
        let l = leak_ec(1.2, 1e4, 0.02).unwrap();
        assert!((l.bits - 1697.0).abs() < 1.0, "{}", l.bits);
        assert!(l.warnings.is_empty());
        assert_eq!(leak_ec(1.2, 1e4, 0.0).unwrap().bits, 0.0);
        assert_eq!(leak_ec(1.2, 0.0, 0.02).unwrap().bits, 0.0);
        let l = leak_ec(2.5, 100.0, 0.1).unwrap();
        assert_eq!(l.warnings.len(), 1);
        assert!(l.bits > 0.0);
    }

    #[test]
    fn profile_examples() {
        let p = ie_p1_profile(0.01, 10_000).unwrap();
        assert!((p.log2_ie + 86.71).abs() < 0.01, "{}", p.log2_ie);
        assert_eq!(p.log2_p1, -100.0);
        assert!((p.exponent_ratio() - 0.01).abs() < 1e-15);
        assert!(ie_p1_profile(0.01, 1).is_err());
        assert!(ie_p1_profile(0.0, 100).is_err());
    }

    #[test]
    fn counting_ratio_is_half() {
        let b = counting_bounds(1000, 200, 0.05).unwrap();
        assert_eq!(b.quantum_exponent / b.classical_exponent, 0.5);
        assert!(counting_bounds(100, 100, 0.1).is_err());
        assert!(counting_bounds(100, 0, 0.1).is_err());
        assert!(counting_bounds(100, 10, 0.0).is_err());
    }

    #[test]
    fn composite_report_carries_caveats() {
        let r = KeyRateReport::evaluate(&KeyRateInputs {
            qber: 0.02,
            n_bits: 10_000,
            f_factor: 1.2,
            lambda: 0.01,
        })
        .unwrap();
        assert!(r.rate > 0.0);
        assert!((0.0..=1.0).contains(&r.p1_bound));
        assert!(r.caveats.len() >= 4);
    }
}
