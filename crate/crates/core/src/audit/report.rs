use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{AuditConfig, Regime};
use crate::attacks::AttackFamily;
use crate::data::DatasetSummary;
use crate::error::{Error, Result};
use crate::eval::{MetricsReport, Summary};
use crate::models::{GeneralizationReport, ModelKind};

/// One repetition of the seed sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub index: usize,
    pub seed: u64,
    pub population: usize,
    pub target_train: usize,
    pub target_test: usize,
    pub inference_members: usize,
    pub partition_file: String,
}

/// One (regime, kind, family, run) cell. Exactly one of `metrics` and
/// `error` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditCell {
    pub regime: Regime,
    pub kind: ModelKind,
    pub family: AttackFamily,
    pub run: usize,
    pub attack_seed: u64,
    pub generalization: Option<GeneralizationReport>,
    pub metrics: Option<MetricsReport>,
    pub roc_file: Option<String>,
    pub scores_file: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub error: Option<String>,
}

impl AuditCell {
    /// File-name stem: `<regime>_<kind>_<family>_s<run>`.
    pub fn stem(&self) -> String {
        format!("{}_{}_{}_s{}", self.regime, self.kind, self.family, self.run)
    }
}

/// Mean and spread over the seed sweep for one (regime, kind, family).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub regime: Regime,
    pub kind: ModelKind,
    pub family: AttackFamily,
    pub succeeded: usize,
    pub failed: usize,
    pub auc: Option<Summary>,
    /// At the first configured FPR level.
    pub tpr_at_fpr: Option<Summary>,
    pub advantage: Option<Summary>,
    pub recall: Option<Summary>,
    pub single_out_capture: Option<Summary>,
    pub gap: Option<Summary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptureRow {
    pub regime: Regime,
    pub kind: ModelKind,
    pub family: AttackFamily,
    /// Mean over runs with at least one single-out member.
    pub capture: Option<Summary>,
    pub recall: Option<Summary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleOutSection {
    pub qi_columns: Vec<String>,
    pub equivalence_classes: usize,
    pub n_single_outs: usize,
    pub single_out_indices: Vec<usize>,
    pub captures: Vec<CaptureRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferRow {
    pub family: AttackFamily,
    pub target: ModelKind,
    pub surrogate: ModelKind,
    pub baseline: bool,
    pub auc: Option<f64>,
    pub tpr_at_fpr: Option<f64>,
    pub advantage: Option<f64>,
    /// Highest AUC among the target's surrogates for this family.
    pub best_in_row: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub run_seed: u64,
    pub families: Vec<AttackFamily>,
    pub targets: Vec<ModelKind>,
    pub surrogates: Vec<ModelKind>,
    pub rows: Vec<TransferRow>,
}

impl TransferReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    /// `target,surrogate,baseline,auc,tpr_at_fpr,advantage,best_in_row,error`
    /// for one family.
    pub fn write_family_csv<W: Write>(&self, family: AttackFamily, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "target",
            "surrogate",
            "baseline",
            "auc",
            "tpr_at_fpr",
            "advantage",
            "best_in_row",
            "error",
        ])?;
        for r in self.rows.iter().filter(|r| r.family == family) {
            w.write_record([
                r.target.as_str().to_string(),
                r.surrogate.as_str().to_string(),
                u8::from(r.baseline).to_string(),
                opt(r.auc),
                opt(r.tpr_at_fpr),
                opt(r.advantage),
                u8::from(r.best_in_row).to_string(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub toolkit: String,
    pub config: AuditConfig,
    pub dataset: DatasetSummary,
    pub runs: Vec<RunInfo>,
    pub cells: Vec<AuditCell>,
    pub summary: Vec<CellSummary>,
    pub single_outs: Option<SingleOutSection>,
    pub transfer: Option<TransferReport>,
    pub failures: usize,
}

impl AuditReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// One row per cell.
    pub fn write_metrics_csv<W: Write>(&self, writer: W) -> Result<()> {
        let alpha = self.config.audit.alphas.first().copied().unwrap_or(0.01);
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "regime".to_string(),
            "kind".into(),
            "family".into(),
            "run".into(),
            "auc".into(),
            format!("tpr_at_fpr_{alpha}"),
            "advantage".into(),
            "accuracy".into(),
            "precision".into(),
            "recall".into(),
            "f1".into(),
            "single_out_capture".into(),
            "train_accuracy".into(),
            "test_accuracy".into(),
            "gap".into(),
            "error".into(),
        ])?;
        for c in &self.cells {
            let m = c.metrics.as_ref();
            let g = c.generalization.as_ref();
            w.write_record([
                c.regime.to_string(),
                c.kind.to_string(),
                c.family.to_string(),
                c.run.to_string(),
                opt(m.map(|m| m.auc)),
                opt(m.and_then(|m| m.tpr_at(alpha))),
                opt(m.map(|m| m.advantage)),
                opt(m.map(|m| m.accuracy)),
                opt(m.and_then(|m| m.precision)),
                opt(m.and_then(|m| m.recall)),
                opt(m.and_then(|m| m.f1)),
                opt(m.and_then(|m| m.single_out_capture)),
                opt(g.map(|g| g.train_accuracy)),
                opt(g.map(|g| g.test_accuracy)),
                opt(g.map(|g| g.gap)),
                c.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Plain-text table of the sweep summaries.
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "{} | dataset {} ({} rows, {} features, {} labels) | {} run(s)\n",
            self.toolkit,
            self.dataset.name,
            self.dataset.rows,
            self.dataset.features,
            self.dataset.labels,
            self.runs.len()
        );
        out.push_str(&format!(
            "{:<17} {:<23} {:<24} {:>15} {:>15} {:>15}\n",
            "regime", "kind", "family", "auc", "advantage", "tpr@fpr"
        ));
        let fmt = |s: &Option<Summary>| match s {
            Some(s) => format!("{:.3}±{:.3}", s.mean, s.std),
            None => "-".into(),
        };
        for s in &self.summary {
            out.push_str(&format!(
                "{:<17} {:<23} {:<24} {:>15} {:>15} {:>15}{}\n",
                s.regime.as_str(),
                s.kind.as_str(),
                s.family.as_str(),
                fmt(&s.auc),
                fmt(&s.advantage),
                fmt(&s.tpr_at_fpr),
                if s.failed > 0 {
                    format!("  ({} failed)", s.failed)
                } else {
                    String::new()
                }
            ));
        }
        if let Some(so) = &self.single_outs {
            out.push_str(&format!(
                "single-outs: {} of {} rows over {}\n",
                so.n_single_outs,
                self.dataset.rows,
                so.qi_columns.join(", ")
            ));
        }
        if self.failures > 0 {
            out.push_str(&format!("{} cell(s) failed\n", self.failures));
        }
        out
    }
}
