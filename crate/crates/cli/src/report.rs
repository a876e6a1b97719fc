//! Report document and CSV traces.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use mechlab::attack::{Deviation, GainStats, ScanRow};
use mechlab::axioms::{AxiomReport, IndependenceMatrix};
use mechlab::theorem::{AveragingResult, InductionOutcome, LemmaTrace};
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;

pub const REPORT_SCHEMA: &str = "mechlab-report/1";
pub const CSV_VERSION: &str = "mechlab-csv v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSection {
    pub target: String,
    pub profiles_tested: usize,
    pub threshold: f64,
    pub worst: Option<Deviation>,
    pub stats: GainStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub section: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema: String,
    pub tool_version: String,
    pub command: String,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub axiom_reports: Vec<AxiomReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackSection>,
    #[serde(default)]
    pub lemma_traces: Vec<LemmaTrace>,
    #[serde(default)]
    pub averaging: Vec<AveragingResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub induction: Option<InductionOutcome>,
    #[serde(default)]
    pub skipped: Vec<Skipped>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub independence: Option<IndependenceMatrix>,
    /// Every assertion of the command held.
    pub passed: bool,
    /// Milliseconds per section; omitted in deterministic mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_unix_secs: Option<u64>,
}

impl ReportDocument {
    pub fn new(command: &str, scenario: ScenarioConfig) -> Self {
        ReportDocument {
            schema: REPORT_SCHEMA.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            scenario,
            warnings: vec![],
            axiom_reports: vec![],
            attack: None,
            lemma_traces: vec![],
            averaging: vec![],
            induction: None,
            skipped: vec![],
            independence: None,
            passed: true,
            timings_ms: None,
            generated_unix_secs: None,
        }
    }

    pub fn to_json(&self) -> anyhow::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Times named sections unless running deterministically.
pub struct Timer {
    enabled: bool,
    sections: BTreeMap<String, f64>,
}

impl Timer {
    pub fn new(enabled: bool) -> Self {
        Timer {
            enabled,
            sections: BTreeMap::new(),
        }
    }

    pub fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = std::time::Instant::now();
        let out = f();
        if self.enabled {
            *self.sections.entry(name.to_string()).or_default() +=
                start.elapsed().as_secs_f64() * 1e3;
        }
        out
    }

    pub fn finish(self, doc: &mut ReportDocument) {
        if self.enabled {
            doc.timings_ms = Some(self.sections);
            doc.generated_unix_secs = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .ok()
                .map(|d| d.as_secs());
        }
    }
}

/// `<dir>/<stem>.<suffix>.csv` next to the JSON report path.
pub fn csv_path(out: &Path, suffix: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    out.with_file_name(format!("{stem}.{suffix}.csv"))
}

/// Writes the version comment line followed by the header and rows.
pub fn write_csv(
    path: &Path,
    kind: &str,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> anyhow::Result<()> {
    let mut file =
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    writeln!(file, "# {CSV_VERSION} {kind}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_trace_csv(path: &Path, trace: &LemmaTrace) -> anyhow::Result<()> {
    write_csv(
        path,
        &format!("trace {} {}", trace.lemma, trace.mechanism),
        &[&trace.x_label, "computed", "reference", "slack"],
        trace.samples.iter().map(|s| {
            let x = if trace.x_label == "n" {
                format!("{}", s.x as usize)
            } else {
                num(s.x)
            };
            vec![x, num(s.computed), num(s.reference), num(s.slack)]
        }),
    )
}

pub fn write_gains_csv(path: &Path, target: &str, rows: &[ScanRow]) -> anyhow::Result<()> {
    write_csv(
        path,
        &format!("gains {target}"),
        &[
            "profile_index",
            "deviator",
            "searched_bid",
            "truthful_utility",
            "deviant_utility",
            "gain",
            "profile",
        ],
        rows.iter().map(|r| {
            let d = &r.deviation;
            vec![
                r.profile_index.to_string(),
                d.deviator.to_string(),
                num(d.searched_bid()),
                num(d.truthful_utility),
                num(d.deviant_utility),
                num(d.gain),
                d.profile.to_string(),
            ]
        }),
    )
}

pub fn write_axioms_csv(path: &Path, reports: &[AxiomReport]) -> anyhow::Result<()> {
    write_csv(
        path,
        "axioms",
        &[
            "axiom",
            "verdict",
            "violations",
            "worst_magnitude",
            "threshold",
            "profiles_tested",
        ],
        reports.iter().map(|r| {
            vec![
                r.axiom.to_string(),
                r.verdict.to_string(),
                r.violations.to_string(),
                num(r.worst_magnitude),
                num(r.threshold),
                r.profiles_tested.to_string(),
            ]
        }),
    )
}

pub fn write_matrix_csv(path: &Path, m: &IndependenceMatrix) -> anyhow::Result<()> {
    let mut header: Vec<&str> = vec!["mechanism"];
    header.extend(m.axioms.iter().map(|a| a.as_str()));
    header.push("expected");
    write_csv(
        path,
        "independence",
        &header,
        m.rows.iter().map(|row| {
            let mut rec = vec![row.mechanism.clone()];
            rec.extend(
                m.axioms
                    .iter()
                    .map(|a| row.verdict(*a).map_or("-".into(), |v| v.to_string())),
            );
            rec.push(
                match row.matches_expected {
                    Some(true) => "match",
                    Some(false) => "mismatch",
                    None => "n/a",
                }
                .into(),
            );
            rec
        }),
    )
}
