//! Attack evaluation: ROC curves, AUC, TPR at a fixed FPR, membership
//! advantage, confusion-matrix metrics and single-out capture.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attacks::{AttackFamily, AttackResult};
use crate::data::SingleOutReport;
use crate::error::{Error, Result};
use crate::seed;

/// Empirical ROC curve from a descending threshold sweep. The first point
/// is (0, 0) at threshold `+inf`, the last is (1, 1).
#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    /// A record is called a member when its score is at least the threshold.
    pub thresholds: Vec<f64>,
}

impl RocCurve {
    pub fn len(&self) -> usize {
        self.fpr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fpr.is_empty()
    }

    /// Trapezoidal area under the curve.
    pub fn area(&self) -> f64 {
        self.fpr
            .windows(2)
            .zip(self.tpr.windows(2))
            .map(|(f, t)| (f[1] - f[0]) * (t[0] + t[1]) / 2.0)
            .sum()
    }

    /// `fpr,tpr,threshold` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["fpr", "tpr", "threshold"])?;
        for i in 0..self.len() {
            w.write_record([
                self.fpr[i].to_string(),
                self.tpr[i].to_string(),
                format!("{:e}", self.thresholds[i]),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

fn class_sizes(truth: &[bool]) -> Result<(usize, usize)> {
    let pos = truth.iter().filter(|&&b| b).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Evaluation(
            "ground truth must contain both members and non-members".into(),
        ));
    }
    Ok((pos, neg))
}

fn check_lengths(scores: &[f64], truth: &[bool]) -> Result<()> {
    if scores.len() != truth.len() {
        return Err(Error::Evaluation("scores and truth differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Evaluation("NaN score".into()));
    }
    Ok(())
}

/// Tied scores form one step, so a group of ties moves the curve
/// diagonally.
pub fn roc_curve(scores: &[f64], truth: &[bool]) -> Result<RocCurve> {
    check_lengths(scores, truth)?;
    let (pos, neg) = class_sizes(truth)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut curve = RocCurve {
        fpr: vec![0.0],
        tpr: vec![0.0],
        thresholds: vec![f64::INFINITY],
    };
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if truth[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        curve.fpr.push(fp as f64 / neg as f64);
        curve.tpr.push(tp as f64 / pos as f64);
        curve.thresholds.push(s);
    }
    Ok(curve)
}

/// Probability that a random member outscores a random non-member, ties
/// counting one half (midrank statistic).
pub fn auc(scores: &[f64], truth: &[bool]) -> Result<f64> {
    check_lengths(scores, truth)?;
    let (pos, neg) = class_sizes(truth)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share their mean
        let mid = (i + 1 + j) as f64 / 2.0;
        rank_sum += mid * order[i..j].iter().filter(|&&k| truth[k]).count() as f64;
        i = j;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

pub fn roc_auc(result: &AttackResult) -> Result<(RocCurve, f64)> {
    Ok((
        roc_curve(&result.scores, &result.truth)?,
        auc(&result.scores, &result.truth)?,
    ))
}

/// Highest TPR over thresholds whose empirical FPR is at most `alpha`;
/// 0 when no threshold qualifies.
pub fn tpr_at_fpr(scores: &[f64], truth: &[bool], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Evaluation(format!("alpha {alpha} is outside (0, 1]")));
    }
    let curve = roc_curve(scores, truth)?;
    Ok(curve
        .fpr
        .iter()
        .zip(&curve.tpr)
        .filter(|(&f, _)| f <= alpha)
        .map(|(_, &t)| t)
        .fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn from_bits(predicted: &[bool], truth: &[bool]) -> Self {
        let mut c = Confusion::default();
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p, t) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// TPR minus FPR of the attack's own decisions.
pub fn advantage(result: &AttackResult) -> Result<f64> {
    class_sizes(&result.truth)?;
    let c = Confusion::from_bits(&result.predicted, &result.truth);
    Ok(c.tp as f64 / (c.tp + c.fn_) as f64 - c.fp as f64 / (c.fp + c.tn) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    /// Absent when nothing is called a member.
    pub precision: Option<f64>,
    /// Absent when there are no members.
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub counts: Confusion,
}

pub fn classification_metrics(predicted: &[bool], truth: &[bool]) -> Result<ClassificationMetrics> {
    if predicted.len() != truth.len() || truth.is_empty() {
        return Err(Error::Evaluation("bits must be nonempty and equally long".into()));
    }
    let c = Confusion::from_bits(predicted, truth);
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    Ok(ClassificationMetrics {
        accuracy: (c.tp + c.tn) as f64 / c.total() as f64,
        precision,
        recall,
        f1,
        counts: c,
    })
}

/// Fraction of inference members that are single-outs and were called
/// members; `None` when no inference member is a single-out.
pub fn single_out_capture_rate(result: &AttackResult, singles: &SingleOutReport) -> Option<f64> {
    let (mut hit, mut total) = (0usize, 0usize);
    for i in 0..result.len() {
        if result.truth[i] && singles.is_single_out(result.record_ids[i]) {
            total += 1;
            hit += usize::from(result.predicted[i]);
        }
    }
    ratio(hit, total)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

/// Percentile interval of the AUC over `resamples` bootstrap draws that
/// resample members and non-members separately.
pub fn bootstrap_auc_ci(scores: &[f64], truth: &[bool], resamples: usize, level: f64, seed: u64) -> Result<Interval> {
    check_lengths(scores, truth)?;
    class_sizes(truth)?;
    if resamples == 0 || !(level > 0.0 && level < 1.0) {
        return Err(Error::Evaluation("bootstrap needs resamples > 0 and level in (0, 1)".into()));
    }
    let ins: Vec<f64> = (0..scores.len()).filter(|&i| truth[i]).map(|i| scores[i]).collect();
    let outs: Vec<f64> = (0..scores.len()).filter(|&i| !truth[i]).map(|i| scores[i]).collect();
    let mut rng = seed::rng(seed::derive_seed(seed, &[seed::stage::BOOTSTRAP]));
    let mut s = Vec::with_capacity(scores.len());
    let mut t = Vec::with_capacity(scores.len());
    let mut aucs = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        s.clear();
        t.clear();
        for (side, member) in [(&ins, true), (&outs, false)] {
            for _ in 0..side.len() {
                s.push(side[rng.gen_range(0..side.len())]);
                t.push(member);
            }
        }
        aucs.push(auc(&s, &t)?);
    }
    aucs.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let at = |q: f64| aucs[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    Ok(Interval {
        low: at(tail),
        high: at(1.0 - tail),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TprAtFpr {
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// FPR levels for TPR@FPR.
    pub alphas: Vec<f64>,
    /// Bootstrap resamples for the AUC interval; 0 disables it.
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            alphas: vec![0.01],
            bootstrap: 0,
            seed: 0,
        }
    }
}

/// All metrics for one attack result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub family: AttackFamily,
    pub target: String,
    pub seed: u64,
    pub members: usize,
    pub nonmembers: usize,
    pub auc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auc_ci: Option<Interval>,
    pub tpr_at_fpr: Vec<TprAtFpr>,
    pub advantage: f64,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub single_out_capture: Option<f64>,
    pub counts: Confusion,
}

impl MetricsReport {
    pub fn tpr_at(&self, alpha: f64) -> Option<f64> {
        self.tpr_at_fpr.iter().find(|t| t.fpr == alpha).map(|t| t.tpr)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn evaluate(result: &AttackResult, opts: &EvalOptions, singles: Option<&SingleOutReport>) -> Result<MetricsReport> {
    let (members, nonmembers) = class_sizes(&result.truth)?;
    let auc_value = auc(&result.scores, &result.truth)?;
    let auc_ci = if opts.bootstrap > 0 {
        Some(bootstrap_auc_ci(&result.scores, &result.truth, opts.bootstrap, 0.95, opts.seed)?)
    } else {
        None
    };
    let tpr_at_fpr = opts
        .alphas
        .iter()
        .map(|&a| {
            Ok(TprAtFpr {
                fpr: a,
                tpr: tpr_at_fpr(&result.scores, &result.truth, a)?,
            })
        })
        .collect::<Result<_>>()?;
    let cls = classification_metrics(&result.predicted, &result.truth)?;
    Ok(MetricsReport {
        family: result.family,
        target: result.target.clone(),
        seed: result.seed,
        members,
        nonmembers,
        auc: auc_value,
        auc_ci,
        tpr_at_fpr,
        advantage: advantage(result)?,
        accuracy: cls.accuracy,
        precision: cls.precision,
        recall: cls.recall,
        f1: cls.f1,
        single_out_capture: singles.and_then(|s| single_out_capture_rate(result, s)),
        counts: cls.counts,
    })
}

/// Mean and sample standard deviation over a seed sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self {
            mean,
            std,
            n: values.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        let t = [true, true, false, false];
        assert_eq!(auc(&[0.9, 0.4, 0.8, 0.1], &t).unwrap(), 0.75);
        assert_eq!(auc(&[1.0, 1.0, 1.0, 1.0], &t).unwrap(), 0.5);
        assert_eq!(auc(&[3.0, 2.0, 1.0, 0.0], &t).unwrap(), 1.0);
        assert!(auc(&[1.0, 2.0], &[true, true]).is_err());
    }

    #[test]
    fn tpr_at_low_fpr() {
        let t = [true, true, false, false];
        let s = [3.0, 2.0, 1.0, 0.0];
        assert_eq!(tpr_at_fpr(&s, &t, 0.01).unwrap(), 1.0);
        assert_eq!(tpr_at_fpr(&[0.0, 1.0, 2.0, 3.0], &t, 0.01).unwrap(), 0.0);
        assert_eq!(tpr_at_fpr(&[0.0, 1.0, 2.0, 3.0], &t, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn curve_endpoints_and_area() {
        let t = [true, false, true, false, true];
        let s = [0.3, 0.3, 0.9, 0.1, 0.5];
        let c = roc_curve(&s, &t).unwrap();
        assert_eq!((c.fpr[0], c.tpr[0]), (0.0, 0.0));
        assert_eq!((*c.fpr.last().unwrap(), *c.tpr.last().unwrap()), (1.0, 1.0));
        assert!((c.area() - auc(&s, &t).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn eight_record_confusion() {
        let truth = [true, true, true, true, false, false, false, false];
        let pred = [true, true, true, false, true, false, false, false];
        let m = classification_metrics(&pred, &truth).unwrap();
        assert_eq!(m.counts, Confusion { tp: 3, fp: 1, tn: 3, fn_: 1 });
        assert_eq!(m.accuracy, 6.0 / 8.0);
        assert_eq!(m.precision, Some(0.75));
        assert_eq!(m.recall, Some(0.75));
        assert!((m.f1.unwrap() - 0.75).abs() < 1e-12);
        let none = classification_metrics(&[false; 8], &truth).unwrap();
        assert_eq!(none.precision, None);
        assert_eq!(none.recall, Some(0.0));
    }

    #[test]
    fn summary_statistics() {
        let s = Summary::of(&[1.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 2f64.sqrt()).abs() < 1e-12);
        assert!(Summary::of(&[]).is_none());
    }
}
