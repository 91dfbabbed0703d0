//! Run reports and their JSON/CSV emission.
//!
//! Output is byte-stable: object keys are sorted, floats are printed with 17
//! significant digits, and lines end in `\n`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use periodic_cert::theorem::{LabeledDegree, LabeledReport, SampleMargin};
use periodic_cert::{Certificate, MuScan, VerificationRow, VerificationTable};
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::config::ScenarioConfig;

pub const VERIFY_HEADER: [&str; 6] = ["epsilon", "mu", "found", "residual", "amplitude", "in_region"];
pub const MARGINS_HEADER: [&str; 10] =
    ["certificate", "boundary", "curve", "theta", "xi1", "xi2", "a1_defect", "eta1_gap_max", "eta1_gap_min", "eta2_gap_min"];
pub const MU_SCAN_HEADER: [&str; 8] =
    ["mu", "valid", "in_pulling_range", "a3_margin", "a4_margin", "degree_eta1", "degree_eta2", "degree_difference"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub curve: usize,
    pub theta: f64,
    pub xi: Vec<f64>,
    pub return_defect: f64,
    pub eta1_gap_max: f64,
    pub eta1_gap_min: f64,
    pub eta2_gap_max: f64,
    pub eta2_gap_min: f64,
    pub s_used: usize,
}

impl From<&SampleMargin<f64>> for SampleRecord {
    fn from(m: &SampleMargin<f64>) -> Self {
        Self {
            curve: m.curve,
            theta: m.theta,
            xi: m.xi.clone(),
            return_defect: m.return_defect,
            eta1_gap_max: m.eta1_gap_max,
            eta1_gap_min: m.eta1_gap_min,
            eta2_gap_max: m.eta2_gap_max,
            eta2_gap_min: m.eta2_gap_min,
            s_used: m.s_used,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub boundary: String,
    pub required: Vec<String>,
    pub a1_max_defect: f64,
    pub a2_max_gap: f64,
    pub a3_min_gap: f64,
    pub a4_min_gap: f64,
    pub a1_pass: bool,
    pub a2_pass: bool,
    pub a3_pass: bool,
    pub a4_pass: bool,
    pub boundary_samples: usize,
    pub s_samples: usize,
    pub tol_eq: f64,
    pub floor_neq: f64,
    pub samples: Vec<SampleRecord>,
}

impl From<&LabeledReport<f64>> for ConditionRecord {
    fn from(l: &LabeledReport<f64>) -> Self {
        let r = &l.report;
        Self {
            boundary: l.label.clone(),
            required: l.required.iter().map(|s| s.to_string()).collect(),
            a1_max_defect: r.a1_max_defect,
            a2_max_gap: r.a2_max_gap,
            a3_min_gap: r.a3_min_gap,
            a4_min_gap: r.a4_min_gap,
            a1_pass: r.a1_pass,
            a2_pass: r.a2_pass,
            a3_pass: r.a3_pass,
            a4_pass: r.a4_pass,
            boundary_samples: r.boundary_samples,
            s_samples: r.s_samples,
            tol_eq: r.tol_eq,
            floor_neq: r.floor_neq,
            samples: r.samples.iter().map(SampleRecord::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeRecord {
    pub map: String,
    pub degree: Option<i64>,
    pub boundary_margin: Option<f64>,
    pub samples_used: Option<usize>,
    pub refinements: Option<usize>,
    pub error: Option<String>,
}

impl From<&LabeledDegree<f64>> for DegreeRecord {
    fn from(d: &LabeledDegree<f64>) -> Self {
        Self {
            map: d.label.clone(),
            degree: d.result.as_ref().map(|r| r.degree),
            boundary_margin: d.result.as_ref().map(|r| r.boundary_margin),
            samples_used: d.result.as_ref().map(|r| r.samples_used),
            refinements: d.result.as_ref().map(|r| r.refinements),
            error: d.error.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateRecord {
    pub name: String,
    pub theorem: String,
    pub period: f64,
    pub delta: Option<f64>,
    pub mu: Option<f64>,
    pub valid: bool,
    pub predicted_degree: Option<i64>,
    pub failures: Vec<String>,
    pub conditions: Vec<ConditionRecord>,
    pub degrees: Vec<DegreeRecord>,
}

impl CertificateRecord {
    pub fn new(name: &str, cert: &Certificate<f64>) -> Self {
        Self {
            name: name.into(),
            theorem: cert.theorem.label().into(),
            period: cert.period,
            delta: cert.delta,
            mu: cert.mu,
            valid: cert.valid,
            predicted_degree: cert.predicted_degree,
            failures: cert.failures.clone(),
            conditions: cert.reports.iter().map(ConditionRecord::from).collect(),
            degrees: cert.degrees.iter().map(DegreeRecord::from).collect(),
        }
    }

    pub fn degree_of(&self, map: &str) -> Option<i64> {
        self.degrees.iter().find(|d| d.map == map).and_then(|d| d.degree)
    }

    pub fn condition(&self, boundary: &str) -> Option<&ConditionRecord> {
        self.conditions.iter().find(|c| c.boundary == boundary)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub certificate: String,
    pub epsilon: f64,
    pub epsilon_engine: f64,
    pub mu: Option<f64>,
    pub found: bool,
    pub residual: Option<f64>,
    pub amplitude: Option<f64>,
    pub in_region: Option<bool>,
    pub stable: Option<bool>,
    pub initial_state: Option<Vec<f64>>,
    pub liouville_defect: Option<f64>,
    pub seeds_tried: usize,
    pub seeds_converged: usize,
    pub verdict: String,
}

impl VerificationRecord {
    pub fn new(certificate: &str, epsilon: f64, row: &VerificationRow<f64>) -> Self {
        Self {
            certificate: certificate.into(),
            epsilon,
            epsilon_engine: row.epsilon,
            mu: row.mu,
            found: row.found,
            residual: row.residual,
            amplitude: row.amplitude,
            in_region: row.in_region,
            stable: row.stable,
            initial_state: row.initial_state.clone(),
            liouville_defect: row.liouville_defect,
            seeds_tried: row.seeds_tried,
            seeds_converged: row.seeds_converged,
            verdict: row.verdict.label().into(),
        }
    }

    /// Rows for one table; `physical` maps each engine `ε` back to the reported value.
    pub fn from_table(certificate: &str, physical: &[f64], table: &VerificationTable<f64>) -> Vec<Self> {
        table.rows.iter().zip(physical).map(|(row, &eps)| Self::new(certificate, eps, row)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuScanRecord {
    pub mu: f64,
    pub valid: bool,
    pub in_pulling_range: bool,
    pub a3_margin: f64,
    pub a4_margin: f64,
    pub degree_eta1: Option<i64>,
    pub degree_eta2: Option<i64>,
    pub degree_difference: Option<i64>,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullingRange {
    pub label: String,
    pub mu_hat: f64,
    pub interval: [f64; 2],
    pub base_degree_difference: Option<i64>,
}

pub fn mu_scan_records(scan: &MuScan<f64>) -> (Vec<MuScanRecord>, PullingRange) {
    let rows = scan
        .rows
        .iter()
        .map(|r| MuScanRecord {
            mu: r.mu,
            valid: r.certificate.valid,
            in_pulling_range: r.mu.abs() <= scan.mu_hat,
            a3_margin: r.a3_margin,
            a4_margin: r.a4_margin,
            degree_eta1: r.certificate.degrees.first().and_then(|d| d.result.as_ref()).map(|d| d.degree),
            degree_eta2: r.certificate.degrees.get(1).and_then(|d| d.result.as_ref()).map(|d| d.degree),
            degree_difference: r.degree_difference,
            failures: r.certificate.failures.clone(),
        })
        .collect();
    let range = PullingRange {
        label: "frequency pulling range".into(),
        mu_hat: scan.mu_hat,
        interval: [-scan.mu_hat, scan.mu_hat],
        base_degree_difference: scan.base.predicted_degree,
    };
    (rows, range)
}

/// `ε_engine = √ε` for the van der Pol normal form, with the powers echoed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalFormEcho {
    pub epsilon_physical: f64,
    pub epsilon_engine: f64,
    pub epsilon_engine_squared: f64,
    pub epsilon_engine_cubed: f64,
}

impl NormalFormEcho {
    pub fn new(physical: f64) -> Self {
        let root = physical.sqrt();
        Self { epsilon_physical: physical, epsilon_engine: root, epsilon_engine_squared: physical, epsilon_engine_cubed: physical * root }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub config: ScenarioConfig,
    pub normal_form: Vec<NormalFormEcho>,
    pub warnings: Vec<String>,
    pub certificates: Vec<CertificateRecord>,
    pub verification: Vec<VerificationRecord>,
    pub mu_scan: Vec<MuScanRecord>,
    pub frequency_pulling: Option<PullingRange>,
    pub errors: Vec<String>,
    /// Every certificate valid.
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

impl RunReport {
    pub fn certificate(&self, name: &str) -> Option<&CertificateRecord> {
        self.certificates.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// Pretty JSON with floats in `{:.16e}` form.
struct StableFormatter(PrettyFormatter<'static>);

impl Formatter for StableFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn end_object_key<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_key(w)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

pub fn to_json(report: &RunReport) -> anyhow::Result<String> {
    // a Value round-trip sorts object keys
    let value = serde_json::to_value(report)?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, StableFormatter(PrettyFormatter::with_indent(b"  ")));
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out)?)
}

pub fn from_json(text: &str) -> anyhow::Result<RunReport> {
    Ok(serde_json::from_str(text)?)
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> anyhow::Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn verify_csv(report: &RunReport) -> anyhow::Result<String> {
    let rows = report
        .verification
        .iter()
        .map(|r| {
            vec![
                float(r.epsilon),
                opt(r.mu, float),
                r.found.to_string(),
                opt(r.residual, float),
                opt(r.amplitude, float),
                opt(r.in_region, |b| b.to_string()),
            ]
        })
        .collect();
    csv_string(&VERIFY_HEADER, rows)
}

pub fn margins_csv(report: &RunReport) -> anyhow::Result<String> {
    let mut rows = Vec::new();
    for c in &report.certificates {
        for cond in &c.conditions {
            for s in &cond.samples {
                rows.push(vec![
                    c.name.clone(),
                    cond.boundary.clone(),
                    s.curve.to_string(),
                    float(s.theta),
                    s.xi.first().map_or(String::new(), |v| float(*v)),
                    s.xi.get(1).map_or(String::new(), |v| float(*v)),
                    float(s.return_defect),
                    float(s.eta1_gap_max),
                    float(s.eta1_gap_min),
                    float(s.eta2_gap_min),
                ]);
            }
        }
    }
    csv_string(&MARGINS_HEADER, rows)
}

pub fn mu_scan_csv(report: &RunReport) -> anyhow::Result<String> {
    let int = |v: Option<i64>| opt(v, |d| d.to_string());
    let rows = report
        .mu_scan
        .iter()
        .map(|r| {
            vec![
                float(r.mu),
                r.valid.to_string(),
                r.in_pulling_range.to_string(),
                float(r.a3_margin),
                float(r.a4_margin),
                int(r.degree_eta1),
                int(r.degree_eta2),
                int(r.degree_difference),
            ]
        })
        .collect();
    csv_string(&MU_SCAN_HEADER, rows)
}

/// Writes `report.json` or the three CSV tables into `dir`; returns the paths written.
pub fn emit_report(report: &RunReport, format: Format, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let files = match format {
        Format::Json => vec![("report.json", to_json(report)?)],
        Format::Csv => vec![("margins.csv", margins_csv(report)?), ("verify.csv", verify_csv(report)?), ("mu_scan.csv", mu_scan_csv(report)?)],
    };
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}
