//! Scenario reports and their JSON/CSV emission.

use std::io::Write;
use std::path::Path;

use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

use super::config::{OutputFormat, ScenarioConfig};
use crate::stats::{sigmas_off, Summary};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metric {
    #[serde(skip)]
    pub name: String,
    pub mean: f64,
    pub variance: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: u64,
    pub analytic_ref: Option<f64>,
    /// `(mean - analytic_ref) / standard error`, when both exist.
    pub sigmas_off: Option<f64>,
}

impl Metric {
    pub fn new(name: &str, summary: Summary, analytic_ref: Option<f64>) -> Self {
        let se = summary.std_error();
        Self {
            name: name.to_string(),
            mean: summary.mean,
            variance: summary.variance,
            ci_lo: summary.ci_lo,
            ci_hi: summary.ci_hi,
            n: summary.n,
            analytic_ref,
            sigmas_off: analytic_ref.map(|r| sigmas_off(summary.mean, r, se)),
        }
    }

    pub fn exact(name: &str, value: f64) -> Self {
        Self::new(name, Summary::exact(value), None)
    }

    pub fn exact_with_ref(name: &str, value: f64, reference: f64) -> Self {
        Self::new(name, Summary::exact(value), Some(reference))
    }

    pub fn std_error(&self) -> f64 {
        (self.ci_hi - self.ci_lo) / (2.0 * crate::stats::Z95)
    }
}

/// Metrics in insertion order, serialized as a JSON object keyed by name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metrics(pub Vec<Metric>);

impl Metrics {
    pub fn push(&mut self, m: Metric) {
        self.0.push(m);
    }

    pub fn get(&self, name: &str) -> Option<&Metric> {
        self.0.iter().find(|m| m.name == name)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Serialize for Metrics {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for m in &self.0 {
            map.serialize_entry(&m.name, m)?;
        }
        map.end()
    }
}

/// One row per grid point: the swept value followed by each metric's mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub key: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SweepTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub config: ScenarioConfig,
    pub config_hash: String,
    pub n_trials: u64,
    pub metrics: Metrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepTable>,
    pub caveats: Vec<String>,
    pub errors: Vec<String>,
    pub invariant_violations: Vec<String>,
}

impl ScenarioReport {
    pub fn new(config: &ScenarioConfig) -> Self {
        Self {
            config: config.clone(),
            config_hash: config.hash(),
            n_trials: config.n_trials,
            metrics: Metrics::default(),
            sweep: None,
            caveats: Vec::new(),
            errors: Vec::new(),
            invariant_violations: Vec::new(),
        }
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.get(name)
    }

    pub fn add_caveat(&mut self, c: impl Into<String>) {
        let c = c.into();
        if !self.caveats.contains(&c) {
            self.caveats.push(c);
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Metrics table, or the sweep table when the report holds a sweep.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        match &self.sweep {
            Some(t) => {
                w.write_record(&t.columns).expect("in-memory write");
                for row in &t.rows {
                    w.write_record(row.iter().map(|x| fmt_num(*x)))
                        .expect("in-memory write");
                }
            }
            None => {
                w.write_record([
                    "name",
                    "mean",
                    "var",
                    "ci_lo",
                    "ci_hi",
                    "n",
                    "analytic_ref",
                    "sigmas_off",
                ])
                .expect("in-memory write");
                for m in &self.metrics.0 {
                    w.write_record([
                        m.name.clone(),
                        fmt_num(m.mean),
                        fmt_num(m.variance),
                        fmt_num(m.ci_lo),
                        fmt_num(m.ci_hi),
                        m.n.to_string(),
                        m.analytic_ref.map(fmt_num).unwrap_or_default(),
                        m.sigmas_off.map(fmt_num).unwrap_or_default(),
                    ])
                    .expect("in-memory write");
                }
            }
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => self.to_json(),
            OutputFormat::Csv => self.to_csv(),
        }
    }
}

/// 17 significant digits in scientific notation.
pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Write a report to a file, or to stdout when `destination` is `None`.
pub fn emit_report(
    report: &ScenarioReport,
    format: OutputFormat,
    destination: Option<&Path>,
) -> std::io::Result<()> {
    let text = report.render(format);
    match destination {
        Some(p) => std::fs::write(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ScenarioKind;

    #[test]
    fn number_format_has_17_digits() {
        assert_eq!(fmt_num(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_num(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_num(-2.5e-300), "-2.5000000000000000e-300");
        assert_eq!(fmt_num(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn csv_has_one_row_per_metric() {
        let mut r = ScenarioReport::new(&ScenarioConfig::defaults(ScenarioKind::KeyRateSweep));
        r.metrics.push(Metric::exact("a", 1.0));
        r.metrics.push(Metric::exact_with_ref("b", 0.5, 0.5));
        let csv = r.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "name,mean,var,ci_lo,ci_hi,n,analytic_ref,sigmas_off");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].ends_with(",1,,"));
        assert!(lines[2].starts_with("b,5.0000000000000000e-1,"));
    }

    #[test]
    fn json_metrics_are_keyed_by_name() {
        let mut r = ScenarioReport::new(&ScenarioConfig::defaults(ScenarioKind::KeyRateSweep));
        r.metrics.push(Metric::exact("key_rate", 0.7));
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["metrics"]["key_rate"]["mean"], 0.7);
        assert!(v["metrics"]["key_rate"]["analytic_ref"].is_null());
        assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
    }
}
