//! Scenario configuration: TOML loading, per-scenario parameter schemas,
//! defaults and the config hash.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn new(key: Option<&str>, message: impl Into<String>) -> Self {
        Self {
            key: key.map(str::to_string),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.key {
            Some(k) => write!(f, "config error at `{k}`: {}", self.message),
            None => write!(f, "config error: {}", self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    CvPassive,
    CvHeterodyneResend,
    CvExcessNoiseTest,
    Bb84Prs,
    DecoyPns,
    DecoyCbs,
    KeyRateSweep,
    DeletionOptimizer,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 8] = [
        ScenarioKind::CvPassive,
        ScenarioKind::CvHeterodyneResend,
        ScenarioKind::CvExcessNoiseTest,
        ScenarioKind::Bb84Prs,
        ScenarioKind::DecoyPns,
        ScenarioKind::DecoyCbs,
        ScenarioKind::KeyRateSweep,
        ScenarioKind::DeletionOptimizer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::CvPassive => "CvPassive",
            ScenarioKind::CvHeterodyneResend => "CvHeterodyneResend",
            ScenarioKind::CvExcessNoiseTest => "CvExcessNoiseTest",
            ScenarioKind::Bb84Prs => "Bb84Prs",
            ScenarioKind::DecoyPns => "DecoyPns",
            ScenarioKind::DecoyCbs => "DecoyCbs",
            ScenarioKind::KeyRateSweep => "KeyRateSweep",
            ScenarioKind::DeletionOptimizer => "DeletionOptimizer",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn default_trials(self) -> u64 {
        match self {
            ScenarioKind::CvPassive | ScenarioKind::CvHeterodyneResend => 100_000,
            ScenarioKind::CvExcessNoiseTest => 2000,
            ScenarioKind::Bb84Prs => 1,
            ScenarioKind::DecoyPns => 100,
            ScenarioKind::DecoyCbs => 1_000_000,
            ScenarioKind::KeyRateSweep => 1,
            ScenarioKind::DeletionOptimizer => 100_000,
        }
    }

    pub fn schema(self) -> Vec<ParamSpec> {
        schema(self)
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Some(OutputFormat::Json),
            "csv" => Some(OutputFormat::Csv),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputSpec {
    pub format: OutputFormat,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl ParamValue {
    /// Parse a command-line value: bool, then integer, then float, else string.
    pub fn parse_cli(s: &str) -> Self {
        if let Ok(b) = s.parse::<bool>() {
            ParamValue::Bool(b)
        } else if let Ok(i) = s.parse::<i64>() {
            ParamValue::Int(i)
        } else if let Ok(x) = s.parse::<f64>() {
            ParamValue::Float(x)
        } else {
            ParamValue::Str(s.to_string())
        }
    }

    fn type_name(&self) -> &'static str {
        match self {
            ParamValue::Bool(_) => "bool",
            ParamValue::Int(_) => "integer",
            ParamValue::Float(_) => "float",
            ParamValue::Str(_) => "string",
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Str(s) => write!(f, "{s:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum ParamKind {
    Float {
        lo: f64,
        hi: f64,
        lo_open: bool,
        hi_open: bool,
        range: &'static str,
    },
    Int {
        min: i64,
        max: i64,
        range: &'static str,
    },
    Bool,
    Choice(&'static [&'static str]),
}

impl ParamKind {
    const fn float(lo: f64, hi: f64, lo_open: bool, hi_open: bool, range: &'static str) -> Self {
        ParamKind::Float {
            lo,
            hi,
            lo_open,
            hi_open,
            range,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ParamKind::Float { range, .. } => format!("float in {range}"),
            ParamKind::Int { range, .. } => format!("integer in {range}"),
            ParamKind::Bool => "bool".into(),
            ParamKind::Choice(c) => format!("one of {}", c.join("|")),
        }
    }
}

#[derive(Clone, Copy)]
pub enum DefaultValue {
    Float(f64),
    Int(i64),
    Bool(bool),
    Str(&'static str),
    /// Computed from parameters listed earlier in the schema.
    Derived(fn(&Parameters) -> ParamValue),
}

#[derive(Clone, Copy)]
pub struct ParamSpec {
    pub key: &'static str,
    pub kind: ParamKind,
    pub default: DefaultValue,
    pub doc: &'static str,
}

impl fmt::Debug for ParamSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParamSpec")
            .field("key", &self.key)
            .field("kind", &self.kind)
            .finish()
    }
}

impl ParamSpec {
    fn check(&self, v: ParamValue) -> Result<ParamValue, ConfigError> {
        let key = Some(self.key);
        let wrong_type = |v: &ParamValue| {
            ConfigError::new(
                key,
                format!("expected {}, got {} {v}", self.kind.describe(), v.type_name()),
            )
        };
        match self.kind {
            ParamKind::Float {
                lo,
                hi,
                lo_open,
                hi_open,
                range,
            } => {
                let x = match v {
                    ParamValue::Float(x) => x,
                    ParamValue::Int(i) => i as f64,
                    ref other => return Err(wrong_type(other)),
                };
                let ok = x.is_finite()
                    && (if lo_open { x > lo } else { x >= lo })
                    && (if hi_open { x < hi } else { x <= hi });
                if !ok {
                    return Err(ConfigError::new(
                        key,
                        format!("`{}` = {x} is out of range {range}", self.key),
                    ));
                }
                Ok(ParamValue::Float(x))
            }
            ParamKind::Int { min, max, range } => {
                let i = match v {
                    ParamValue::Int(i) => i,
                    ParamValue::Float(x) if x.fract() == 0.0 && x.abs() < 9.0e15 => x as i64,
                    ref other => return Err(wrong_type(other)),
                };
                if i < min || i > max {
                    return Err(ConfigError::new(
                        key,
                        format!("`{}` = {i} is out of range {range}", self.key),
                    ));
                }
                Ok(ParamValue::Int(i))
            }
            ParamKind::Bool => match v {
                ParamValue::Bool(_) => Ok(v),
                ref other => Err(wrong_type(other)),
            },
            ParamKind::Choice(choices) => match v {
                ParamValue::Str(ref s) if choices.contains(&s.as_str()) => Ok(v),
                ref other => Err(wrong_type(other)),
            },
        }
    }
}

/// Validated parameters, complete for their scenario.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Parameters(BTreeMap<String, ParamValue>);

impl Parameters {
    pub fn get(&self, key: &str) -> Option<&ParamValue> {
        self.0.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &ParamValue)> {
        self.0.iter()
    }

    pub fn f64(&self, key: &str) -> f64 {
        match self.0.get(key) {
            Some(ParamValue::Float(x)) => *x,
            Some(ParamValue::Int(i)) => *i as f64,
            other => panic!("parameter `{key}` is not a number: {other:?}"),
        }
    }

    pub fn u64(&self, key: &str) -> u64 {
        match self.0.get(key) {
            Some(ParamValue::Int(i)) if *i >= 0 => *i as u64,
            other => panic!("parameter `{key}` is not a count: {other:?}"),
        }
    }

    pub fn bool(&self, key: &str) -> bool {
        match self.0.get(key) {
            Some(ParamValue::Bool(b)) => *b,
            other => panic!("parameter `{key}` is not a bool: {other:?}"),
        }
    }

    pub fn str(&self, key: &str) -> &str {
        match self.0.get(key) {
            Some(ParamValue::Str(s)) => s,
            other => panic!("parameter `{key}` is not a string: {other:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub scenario: ScenarioKind,
    pub master_seed: u64,
    pub n_trials: u64,
    pub parameters: Parameters,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    pub output: OutputSpec,
}

/// Grid sweep of one numeric parameter over `lo, lo+step, ..., hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub key: String,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

const MAX_SWEEP_POINTS: usize = 100_000;

impl SweepSpec {
    /// Parse `key=lo:hi:step`.
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        let bad = || ConfigError::new(Some("sweep"), format!("{s:?} is not key=lo:hi:step"));
        let (key, range) = s.split_once('=').ok_or_else(bad)?;
        let parts: Vec<f64> = range
            .split(':')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        match parts[..] {
            [lo, hi, step] => Ok(Self {
                key: key.trim().to_string(),
                lo,
                hi,
                step,
            }),
            _ => Err(bad()),
        }
    }

    pub fn points(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.lo + i as f64 * self.step).collect()
    }

    fn check(&self, scenario: ScenarioKind) -> Result<(), ConfigError> {
        let key = Some("sweep");
        let ok = self.lo.is_finite()
            && self.hi.is_finite()
            && self.step.is_finite()
            && self.step > 0.0
            && self.hi >= self.lo;
        if !ok {
            return Err(ConfigError::new(key, "need finite lo <= hi and step > 0"));
        }
        if (self.hi - self.lo) / self.step >= MAX_SWEEP_POINTS as f64 {
            return Err(ConfigError::new(key, format!("more than {MAX_SWEEP_POINTS} points")));
        }
        match scenario.schema().iter().find(|s| s.key == self.key) {
            Some(s) if matches!(s.kind, ParamKind::Float { .. } | ParamKind::Int { .. }) => Ok(()),
            Some(_) => Err(ConfigError::new(
                key,
                format!("parameter `{}` is not numeric", self.key),
            )),
            None => Err(ConfigError::new(
                key,
                format!("unknown parameter `{}` for {scenario}", self.key),
            )),
        }
    }

    pub fn value(&self, scenario: ScenarioKind, x: f64) -> ParamValue {
        match scenario.schema().iter().find(|s| s.key == self.key).map(|s| s.kind) {
            Some(ParamKind::Int { .. }) => ParamValue::Int(x.round() as i64),
            _ => ParamValue::Float(x),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    format: Option<String>,
    path: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: Option<u32>,
    scenario: Option<String>,
    master_seed: Option<u64>,
    n_trials: Option<u64>,
    #[serde(default)]
    parameters: BTreeMap<String, ParamValue>,
    sweep: Option<SweepSpec>,
    output: Option<RawOutput>,
}

/// Unvalidated configuration, used to apply command-line overrides before
/// validation.
#[derive(Debug, Clone, Default)]
pub struct ConfigDraft {
    pub schema_version: Option<u32>,
    pub scenario: Option<String>,
    pub master_seed: Option<u64>,
    pub n_trials: Option<u64>,
    pub parameters: BTreeMap<String, ParamValue>,
    pub sweep: Option<SweepSpec>,
    pub format: Option<String>,
    pub path: Option<PathBuf>,
}

impl ConfigDraft {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| ConfigError::new(None, e.message().to_string()))?;
        let out = raw.output.unwrap_or_default();
        Ok(Self {
            schema_version: raw.schema_version,
            scenario: raw.scenario,
            master_seed: raw.master_seed,
            n_trials: raw.n_trials,
            parameters: raw.parameters,
            sweep: raw.sweep,
            format: out.format,
            path: out.path,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(None, format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(self) -> Result<ScenarioConfig, ConfigError> {
        let version = self.schema_version.unwrap_or(SCHEMA_VERSION);
        if version != SCHEMA_VERSION {
            return Err(ConfigError::new(
                Some("schema_version"),
                format!("unsupported schema version {version}, expected {SCHEMA_VERSION}"),
            ));
        }
        let name = self
            .scenario
            .ok_or_else(|| ConfigError::new(Some("scenario"), "missing scenario"))?;
        let scenario = ScenarioKind::parse(&name).ok_or_else(|| {
            let all: Vec<_> = ScenarioKind::ALL.iter().map(|k| k.name()).collect();
            ConfigError::new(
                Some("scenario"),
                format!("unknown scenario {name:?}, expected one of {}", all.join("|")),
            )
        })?;
        let format = match self.format {
            None => OutputFormat::default(),
            Some(f) => OutputFormat::parse(&f).ok_or_else(|| {
                ConfigError::new(Some("output.format"), format!("{f:?} is not json|csv"))
            })?,
        };
        if let Some(sw) = &self.sweep {
            sw.check(scenario)?;
            for x in sw.points() {
                let mut p = self.parameters.clone();
                p.insert(sw.key.clone(), sw.value(scenario, x));
                validate_parameters(scenario, p)?;
            }
        }
        Ok(ScenarioConfig {
            schema_version: version,
            scenario,
            master_seed: self.master_seed.unwrap_or(0),
            n_trials: self.n_trials.unwrap_or(scenario.default_trials()),
            parameters: validate_parameters(scenario, self.parameters)?,
            sweep: self.sweep,
            output: OutputSpec {
                format,
                path: self.path,
            },
        })
    }
}

/// Check keys, types and ranges, and fill defaults.
pub fn validate_parameters(
    scenario: ScenarioKind,
    mut given: BTreeMap<String, ParamValue>,
) -> Result<Parameters, ConfigError> {
    let schema = scenario.schema();
    if let Some(k) = given.keys().find(|k| !schema.iter().any(|s| s.key == k.as_str())) {
        let known: Vec<_> = schema.iter().map(|s| s.key).collect();
        return Err(ConfigError::new(
            Some(k),
            format!(
                "unknown parameter for {scenario}; known: {}",
                known.join(", ")
            ),
        ));
    }
    let mut out = Parameters::default();
    for spec in &schema {
        let value = match given.remove(spec.key) {
            Some(v) => v,
            None => match spec.default {
                DefaultValue::Float(x) => ParamValue::Float(x),
                DefaultValue::Int(i) => ParamValue::Int(i),
                DefaultValue::Bool(b) => ParamValue::Bool(b),
                DefaultValue::Str(s) => ParamValue::Str(s.to_string()),
                DefaultValue::Derived(f) => f(&out),
            },
        };
        let value = spec.check(value)?;
        out.0.insert(spec.key.to_string(), value);
    }
    Ok(out)
}

impl ScenarioConfig {
    /// Default configuration of a scenario.
    pub fn defaults(scenario: ScenarioKind) -> Self {
        ConfigDraft {
            scenario: Some(scenario.name().to_string()),
            ..Default::default()
        }
        .validate()
        .expect("defaults are valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        ConfigDraft::from_toml_str(text)?.validate()
    }

    /// Canonical TOML echo; reloading it gives the same config.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Back to a draft, for overrides and re-validation.
    pub fn to_draft(&self) -> ConfigDraft {
        ConfigDraft {
            schema_version: Some(self.schema_version),
            scenario: Some(self.scenario.name().to_string()),
            master_seed: Some(self.master_seed),
            n_trials: Some(self.n_trials),
            parameters: self.parameters.0.clone(),
            sweep: self.sweep.clone(),
            format: Some(
                match self.output.format {
                    OutputFormat::Json => "json",
                    OutputFormat::Csv => "csv",
                }
                .into(),
            ),
            path: self.output.path.clone(),
        }
    }

    /// Return a copy with one parameter replaced and re-validated.
    pub fn with_parameter(&self, key: &str, value: ParamValue) -> Result<Self, ConfigError> {
        let mut d = self.to_draft();
        d.parameters.insert(key.to_string(), value);
        d.validate()
    }

    /// SHA-256 over the canonical JSON of everything except the output block.
    pub fn hash(&self) -> String {
        #[derive(Serialize)]
        struct Hashed<'a> {
            schema_version: u32,
            scenario: ScenarioKind,
            master_seed: u64,
            n_trials: u64,
            parameters: &'a Parameters,
            sweep: &'a Option<SweepSpec>,
        }
        let json = serde_json::to_string(&Hashed {
            schema_version: self.schema_version,
            scenario: self.scenario,
            master_seed: self.master_seed,
            n_trials: self.n_trials,
            parameters: &self.parameters,
            sweep: &self.sweep,
        })
        .expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(digest)
    }
}

/// Load and validate a config file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    ConfigDraft::from_path(path)?.validate()
}

const UNIT: ParamKind = ParamKind::float(0.0, 1.0, false, false, "[0,1]");
const OPEN_UNIT: ParamKind = ParamKind::float(0.0, 1.0, true, true, "(0,1)");
const TRANSMITTANCE: ParamKind = ParamKind::float(0.0, 1.0, true, false, "(0,1]");
const POSITIVE: ParamKind = ParamKind::float(0.0, f64::INFINITY, true, true, "(0,inf)");
const NON_NEGATIVE: ParamKind = ParamKind::float(0.0, f64::INFINITY, false, true, "[0,inf)");

fn spec(key: &'static str, kind: ParamKind, default: DefaultValue, doc: &'static str) -> ParamSpec {
    ParamSpec {
        key,
        kind,
        default,
        doc,
    }
}

fn cv_schema() -> Vec<ParamSpec> {
    use DefaultValue::*;
    vec![
        spec("T", TRANSMITTANCE, Float(0.1), "channel transmittance"),
        spec("V", POSITIVE, Float(25.0), "modulation variance"),
        spec(
            "var_nA",
            NON_NEGATIVE,
            Derived(|p| ParamValue::Float(crate::cv::DEFAULT_NA_FRACTION * p.f64("V"))),
            "Adam's estimation noise, default 0.01 V",
        ),
        spec("var_nB", NON_NEGATIVE, Float(1.0), "Babe's detection noise"),
        spec("var_nE_passive", NON_NEGATIVE, Float(1.0), "Eve's noise on the tapped arm"),
        spec("var_nE_het", NON_NEGATIVE, Float(2.0), "heterodyne noise"),
    ]
}

fn schema(kind: ScenarioKind) -> Vec<ParamSpec> {
    use DefaultValue::*;
    match kind {
        ScenarioKind::CvPassive | ScenarioKind::CvHeterodyneResend => cv_schema(),
        ScenarioKind::CvExcessNoiseTest => {
            let mut s = cv_schema();
            s.extend([
                spec(
                    "delta_T",
                    ParamKind::float(0.0, 1.0, false, true, "[0,1)"),
                    Float(0.02),
                    "half-width of the uncertainty band on T",
                ),
                spec(
                    "n_pulses",
                    ParamKind::Int {
                        min: 100,
                        max: 100_000_000,
                        range: "[100,1e8]",
                    },
                    Int(1000),
                    "pulses per test",
                ),
                spec("alpha", OPEN_UNIT, Float(0.05), "nominal false-alarm level"),
            ]);
            s
        }
        ScenarioKind::Bb84Prs => vec![
            spec(
                "n_sent",
                ParamKind::Int {
                    min: 1,
                    max: 1_000_000_000,
                    range: "[1,1e9]",
                },
                Int(400_000),
                "qubits per session",
            ),
            spec("eta", TRANSMITTANCE, Float(0.1), "channel transmittance"),
            spec(
                "attack_basis_angle",
                ParamKind::float(0.0, PI, false, true, "[0,pi)"),
                Float(PI / 8.0),
                "Eve's measurement angle",
            ),
            spec("qber_budget", UNIT, Float(0.02), "QBER Eve may add"),
            spec(
                "attack_fraction",
                UNIT,
                Derived(|p| {
                    let basis = crate::qubit::MeasBasis::custom(p.f64("attack_basis_angle"));
                    let e = crate::bb84::per_attacked_error(&basis);
                    ParamValue::Float(
                        crate::bb84::max_attack_fraction(p.f64("qber_budget"), e).unwrap_or(0.0),
                    )
                }),
                "fraction attacked, default from the QBER budget",
            ),
            spec(
                "deletion_policy",
                ParamKind::Choice(&["none", "delete_bit_one", "delete_low_confidence"]),
                Str("delete_bit_one"),
                "what Eve deletes",
            ),
            spec("confidence_threshold", UNIT, Float(0.9), "for delete_low_confidence"),
            spec(
                "check_fraction",
                TRANSMITTANCE,
                Float(0.5),
                "share of the sifted key disclosed",
            ),
            spec("qber_threshold", UNIT, Float(0.11), "abort above this QBER"),
            spec(
                "intrinsic_error",
                ParamKind::float(0.0, 0.5, false, false, "[0,0.5]"),
                Float(0.0),
                "detector flip probability",
            ),
            spec("match_arrival_rate", ParamKind::Bool, Bool(false), "hide deletions in loss"),
        ],
        ScenarioKind::DecoyPns => vec![
            spec("s_signal", POSITIVE, Float(0.5), "signal mean photon number"),
            spec("s_decoy", NON_NEGATIVE, Float(0.1), "decoy mean photon number"),
            spec("p_signal", OPEN_UNIT, Float(0.5), "probability of the signal level"),
            spec("eta", TRANSMITTANCE, Float(0.1), "channel transmittance"),
            spec("aggression", UNIT, Float(1.0), "share of pulses Eve attacks"),
            spec(
                "n_pulses",
                ParamKind::Int {
                    min: 1,
                    max: 1_000_000_000,
                    range: "[1,1e9]",
                },
                Int(100_000),
                "pulses per ensemble",
            ),
            spec("tolerance_sigmas", POSITIVE, Float(3.0), "alarm tolerance"),
        ],
        ScenarioKind::DecoyCbs => vec![
            spec("s_a", NON_NEGATIVE, Float(1.0), "first level"),
            spec("s_b", NON_NEGATIVE, Float(0.0), "second level"),
            spec("kappa", UNIT, Float(0.9), "split ratio"),
            spec("prior_a", UNIT, Float(0.5), "prior of the first level"),
        ],
        ScenarioKind::KeyRateSweep => vec![
            spec(
                "qber",
                ParamKind::float(0.0, 0.5, false, false, "[0,0.5]"),
                Float(0.02),
                "quantum bit error rate",
            ),
            spec(
                "n_bits",
                ParamKind::Int {
                    min: 1,
                    max: 1_000_000_000_000,
                    range: "[1,1e12]",
                },
                Int(10_000),
                "key length",
            ),
            spec("f_factor", POSITIVE, Float(1.2), "error-correction inefficiency"),
            spec("lambda", POSITIVE, Float(0.01), "exponent of p1"),
            spec(
                "n_total",
                ParamKind::Int {
                    min: 2,
                    max: 1_000_000_000_000,
                    range: "[2,1e12]",
                },
                Int(1000),
                "population for the counting bound",
            ),
            spec(
                "n_checked",
                ParamKind::Int {
                    min: 1,
                    max: 1_000_000_000_000,
                    range: "[1,1e12]",
                },
                Int(200),
                "sample size for the counting bound",
            ),
            spec("delta", OPEN_UNIT, Float(0.05), "deviation for the counting bound"),
        ],
        ScenarioKind::DeletionOptimizer => vec![
            spec(
                "ensemble",
                ParamKind::Choice(&["bb84", "b92"]),
                Str("bb84"),
                "states Eve faces",
            ),
            spec(
                "deletion_budget",
                ParamKind::float(0.0, 1.0, false, true, "[0,1)"),
                Float(0.0),
                "fraction of results Eve may discard",
            ),
            spec(
                "angles",
                ParamKind::Int {
                    min: 1,
                    max: 1_000_000,
                    range: "[1,1e6]",
                },
                Int(720),
                "angles on [0,pi)",
            ),
            spec(
                "thresholds",
                ParamKind::Int {
                    min: 2,
                    max: 1_000_000,
                    range: "[2,1e6]",
                },
                Int(100),
                "confidence thresholds on [0.5,1]",
            ),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_cv_config_gets_defaults() {
        let c = ScenarioConfig::from_toml_str(
            "scenario = \"CvHeterodyneResend\"\n[parameters]\nT = 0.1\nV = 25\n",
        )
        .unwrap();
        assert_eq!(c.parameters.f64("var_nB"), 1.0);
        assert_eq!(c.parameters.f64("var_nE_het"), 2.0);
        assert_eq!(c.parameters.f64("var_nA"), 0.25);
        assert_eq!(c.schema_version, SCHEMA_VERSION);
    }

    #[test]
    fn zero_transmittance_names_key_and_range() {
        let e = ScenarioConfig::from_toml_str("scenario = \"CvPassive\"\n[parameters]\nT = 0.0\n")
            .unwrap_err();
        assert_eq!(e.key.as_deref(), Some("T"));
        assert!(e.to_string().contains("(0,1]"), "{e}");
    }

    #[test]
    fn unknown_key_and_missing_scenario() {
        let e = ScenarioConfig::from_toml_str("scenario = \"CvPassive\"\n[parameters]\nTT = 0.1\n")
            .unwrap_err();
        assert_eq!(e.key.as_deref(), Some("TT"));
        let e = ScenarioConfig::from_toml_str("n_trials = 3\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("scenario"));
        assert!(ScenarioConfig::from_toml_str("scenario = \"CvPassive\"\nbogus = 1\n").is_err());
    }

    #[test]
    fn echo_round_trip_keeps_hash() {
        for kind in ScenarioKind::ALL {
            let c = ScenarioConfig::defaults(kind);
            let back = ScenarioConfig::from_toml_str(&c.to_toml_string()).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.hash(), c.hash());
        }
    }

    #[test]
    fn hash_tracks_meaningful_fields_only() {
        let c = ScenarioConfig::defaults(ScenarioKind::CvPassive);
        let mut d = c.clone();
        d.output.path = Some("elsewhere.json".into());
        assert_eq!(c.hash(), d.hash());
        d.master_seed += 1;
        assert_ne!(c.hash(), d.hash());
        let e = c.with_parameter("V", ParamValue::Float(26.0)).unwrap();
        assert_ne!(c.hash(), e.hash());
        let same = c.with_parameter("var_nA", ParamValue::Float(0.25)).unwrap();
        assert_eq!(c.hash(), same.hash());
    }

    #[test]
    fn sweep_grid() {
        let s = SweepSpec::parse("qber=0:0.25:0.01").unwrap();
        let pts = s.points();
        assert_eq!(pts.len(), 26);
        assert!((pts[25] - 0.25).abs() < 1e-12);
        assert!(SweepSpec::parse("qber=0:0.25").is_err());
        let mut d = ScenarioConfig::defaults(ScenarioKind::KeyRateSweep).to_draft();
        d.sweep = Some(SweepSpec::parse("qber=0:0.6:0.1").unwrap());
        assert_eq!(d.validate().unwrap_err().key.as_deref(), Some("qber"));
    }

    #[test]
    fn integers_accepted_for_floats() {
        let c = ScenarioConfig::from_toml_str("scenario = \"DecoyCbs\"\n[parameters]\ns_a = 1\n")
            .unwrap();
        assert_eq!(c.parameters.get("s_a"), Some(&ParamValue::Float(1.0)));
    }
}
