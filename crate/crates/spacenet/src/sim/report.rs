//! Machine-readable run reports and their JSON/CSV emitters.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::consensus::{SkipOutcome, ValidatorState, WeightDelta};
use crate::signal::HonestyLabel;

use super::SimError;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: u64,
    pub height: u64,
    pub blocks_committed: u64,
    pub skips: u64,
    pub slashed_tokens: f64,
    pub resyncs: u64,
    pub pod_total_loss: f64,
    pub anomalous: u64,
    pub flows_accepted: u64,
    pub flows_rejected: u64,
}

/// One ground-truth row of the per-epoch confusion matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionRow {
    pub epoch: u64,
    pub label: HonestyLabel,
    pub valid: u64,
    pub anomalous: u64,
}

impl ConfusionRow {
    pub fn population(&self) -> u64 {
        self.valid + self.anomalous
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub per_epoch: Vec<ConfusionRow>,
}

impl DetectionReport {
    fn pooled(&self, label: HonestyLabel) -> (u64, u64) {
        let mut valid = 0;
        let mut anomalous = 0;
        for row in self.per_epoch.iter().filter(|r| r.label == label) {
            valid += row.valid;
            anomalous += row.anomalous;
        }
        (valid, anomalous)
    }

    /// Share of misreporting receivers flagged anomalous, pooled over epochs.
    pub fn recall(&self) -> Option<f64> {
        let mut valid = 0;
        let mut anomalous = 0;
        for label in [HonestyLabel::RFraud, HonestyLabel::Corporate] {
            let (v, a) = self.pooled(label);
            valid += v;
            anomalous += a;
        }
        let total = valid + anomalous;
        (total > 0).then(|| anomalous as f64 / total as f64)
    }

    /// Share of honest receivers flagged anomalous, pooled over epochs.
    pub fn false_positive_rate(&self) -> Option<f64> {
        let (valid, anomalous) = self.pooled(HonestyLabel::Honest);
        let total = valid + anomalous;
        (total > 0).then(|| anomalous as f64 / total as f64)
    }

    /// Share of objectively impaired receivers flagged anomalous.
    pub fn objective_recall(&self) -> Option<f64> {
        let (valid, anomalous) = self.pooled(HonestyLabel::Objective);
        let total = valid + anomalous;
        (total > 0).then(|| anomalous as f64 / total as f64)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PofSummary {
    pub accepted: u64,
    pub rejected: BTreeMap<String, u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub kind: String,
    pub n: u64,
    pub packet_len: Option<u64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimReport {
    pub v: u32,
    pub scenario: String,
    pub seed: u64,
    pub epochs: u64,
    pub per_epoch: Vec<EpochRow>,
    pub detection: DetectionReport,
    pub pof: PofSummary,
    pub skip_outcomes: Vec<SkipOutcome>,
    /// Wall-clock rows; filled only by the bench harness, never by
    /// `simulate`, so simulation reports stay byte-reproducible.
    pub benchmarks: Vec<BenchRow>,
    pub validators: Vec<ValidatorState>,
    /// Cumulative ΔS per participant over the whole run.
    pub delta_s_totals: BTreeMap<String, WeightDelta>,
    pub final_height: u64,
}

impl SimReport {
    pub fn new(scenario: &str, seed: u64, epochs: u64) -> Self {
        Self {
            v: REPORT_SCHEMA_VERSION,
            scenario: scenario.to_string(),
            seed,
            epochs,
            per_epoch: Vec::new(),
            detection: DetectionReport::default(),
            pof: PofSummary::default(),
            skip_outcomes: Vec::new(),
            benchmarks: Vec::new(),
            validators: Vec::new(),
            delta_s_totals: BTreeMap::new(),
            final_height: 0,
        }
    }

    pub fn total_slashed(&self) -> f64 {
        self.per_epoch.iter().map(|r| r.slashed_tokens).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Flat-table CSV: epoch rows, confusion rows, and benchmark rows in
    /// labelled sections.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["section", "epoch", "label_or_kind", "a", "b", "c", "d"])
            .expect("csv record");
        for r in &self.per_epoch {
            w.write_record([
                "epoch".to_string(),
                r.epoch.to_string(),
                String::new(),
                r.height.to_string(),
                r.blocks_committed.to_string(),
                r.skips.to_string(),
                format!("{}", r.pod_total_loss),
            ])
            .expect("csv record");
        }
        for r in &self.detection.per_epoch {
            w.write_record([
                "confusion".to_string(),
                r.epoch.to_string(),
                format!("{:?}", r.label),
                r.valid.to_string(),
                r.anomalous.to_string(),
                String::new(),
                String::new(),
            ])
            .expect("csv record");
        }
        for b in &self.benchmarks {
            w.write_record([
                "bench".to_string(),
                String::new(),
                b.kind.clone(),
                b.n.to_string(),
                b.packet_len.map(|l| l.to_string()).unwrap_or_default(),
                format!("{}", b.seconds),
                String::new(),
            ])
            .expect("csv record");
        }
        String::from_utf8(w.into_inner().expect("csv flush")).expect("csv utf8")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown format {other:?} (expected json or csv)")),
        }
    }
}

/// Write the report to `path` in the requested format.
pub fn emit_report(report: &SimReport, format: ReportFormat, path: &Path) -> Result<(), SimError> {
    let body = match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Csv => report.to_csv(),
    };
    let mut f = std::fs::File::create(path)
        .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
    f.write_all(body.as_bytes())
        .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}
