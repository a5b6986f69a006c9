use std::io::Write;

use serde::{Deserialize, Serialize};

use super::AttackFamily;
use crate::error::{Error, Result};

/// Decision rule applied to stored (member-oriented) scores: a record is
/// called a member when its score is at least the threshold of its class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    /// Threshold used for classes without their own entry.
    pub global: f64,
    /// Per-class thresholds; `None` falls back to `global`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_class: Vec<Option<f64>>,
}

impl ThresholdRule {
    pub fn single(beta: f64) -> Self {
        Self {
            global: beta,
            per_class: Vec::new(),
        }
    }

    pub fn threshold_for(&self, class: usize) -> f64 {
        self.per_class
            .get(class)
            .copied()
            .flatten()
            .unwrap_or(self.global)
    }

    /// `score >= threshold` (ties count as members).
    pub fn decide(&self, score: f64, class: usize) -> bool {
        score >= self.threshold_for(class)
    }
}

/// Scores and decisions of one attack on the inference set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub family: AttackFamily,
    /// Free-form target description, e.g. `central_weak/decision_tree`.
    pub target: String,
    pub seed: u64,
    /// Dataset row index of each scored record.
    pub record_ids: Vec<usize>,
    /// Higher means more likely a member.
    pub scores: Vec<f64>,
    pub predicted: Vec<bool>,
    pub truth: Vec<bool>,
    pub rule: ThresholdRule,
}

impl AttackResult {
    pub(crate) fn new(
        family: AttackFamily,
        target: impl Into<String>,
        seed: u64,
        record_ids: Vec<usize>,
        scores: Vec<f64>,
        predicted: Vec<bool>,
        truth: Vec<bool>,
        rule: ThresholdRule,
    ) -> Result<Self> {
        let n = record_ids.len();
        if scores.len() != n || predicted.len() != n || truth.len() != n {
            return Err(Error::Attack("result vectors have different lengths".into()));
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::Attack(format!("{family} produced a NaN score")));
        }
        Ok(Self {
            family,
            target: target.into(),
            seed,
            record_ids,
            scores,
            predicted,
            truth,
            rule,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// `record_id,score,predicted,member` with 0/1 bits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["record_id", "score", "predicted", "member"])?;
        for i in 0..self.len() {
            w.write_record([
                self.record_ids[i].to_string(),
                format!("{:e}", self.scores[i]),
                u8::from(self.predicted[i]).to_string(),
                u8::from(self.truth[i]).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_class_falls_back_to_global() {
        let r = ThresholdRule {
            global: 0.5,
            per_class: vec![Some(0.2), None],
        };
        assert!(r.decide(0.2, 0));
        assert!(!r.decide(0.4, 1));
        assert!(r.decide(0.5, 7));
    }

    #[test]
    fn csv_layout() {
        let r = AttackResult::new(
            AttackFamily::MetricLoss,
            "t",
            1,
            vec![4, 9],
            vec![-0.5, -2.0],
            vec![true, false],
            vec![true, true],
            ThresholdRule::single(-1.0),
        )
        .unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "record_id,score,predicted,member");
        assert_eq!(text.lines().nth(2).unwrap(), "9,-2e0,0,1");
        let back = AttackResult::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
