//! Metric attacks: threshold a single statistic of the target's output.
//! Thresholds come from the shadow model's train and held-out splits.

use serde::{Deserialize, Serialize};

use super::{AttackContext, AttackResult, AttackSpec, ThresholdRule, PROBABILITY_FLOOR};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{argmax, BlackBox};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricFamily {
    Correctness,
    Loss,
    Confidence,
    ModifiedEntropy,
}

impl MetricFamily {
    /// Whether small raw values indicate membership.
    pub fn member_if_low(&self) -> bool {
        matches!(self, MetricFamily::Loss | MetricFamily::ModifiedEntropy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ThresholdMethod {
    /// Per-class sweep maximizing shadow member/non-member accuracy.
    Sweep,
    /// Global threshold admitting the top `top` percent of shadow held-out
    /// scores.
    Percentile { top: f64 },
}

impl Default for ThresholdMethod {
    fn default() -> Self {
        ThresholdMethod::Sweep
    }
}

/// The raw statistic, before orientation.
pub fn metric_score(p: &[f64], y: usize, family: MetricFamily) -> f64 {
    let fl = |v: f64| v.max(PROBABILITY_FLOOR);
    match family {
        MetricFamily::Correctness => f64::from(u8::from(argmax(p) == y)),
        MetricFamily::Loss => -fl(p[y]).ln(),
        MetricFamily::Confidence => p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        MetricFamily::ModifiedEntropy => {
            let py = fl(p[y]);
            let rest: f64 = p
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != y)
                .map(|(_, &pi)| pi * fl(1.0 - pi).ln())
                .sum();
            -(1.0 - p[y]) * py.ln() - rest
        }
    }
}

/// Score as stored in results: higher means more likely a member.
pub fn stored_metric_score(p: &[f64], y: usize, family: MetricFamily) -> f64 {
    let s = metric_score(p, y, family);
    if family.member_if_low() {
        -s
    } else {
        s
    }
}

/// Best threshold separating `members` from `nonmembers` (member iff
/// score >= threshold), judged by balanced accuracy. Candidates are the
/// midpoints of consecutive distinct scores plus one point beyond each end;
/// the smallest maximizing candidate wins. `None` if a side is empty.
pub fn sweep_threshold(members: &[f64], nonmembers: &[f64]) -> Option<(f64, f64)> {
    if members.is_empty() || nonmembers.is_empty() {
        return None;
    }
    let mut ins = members.to_vec();
    let mut outs = nonmembers.to_vec();
    ins.sort_by(f64::total_cmp);
    outs.sort_by(f64::total_cmp);
    let mut all: Vec<f64> = ins.iter().chain(&outs).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();

    let mut candidates = Vec::with_capacity(all.len() + 1);
    candidates.push(all[0] - 1.0);
    candidates.extend(all.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    candidates.push(all[all.len() - 1] + 1.0);

    let at_least = |v: &[f64], t: f64| v.len() - v.partition_point(|&s| s < t);
    let mut best = (candidates[0], f64::NEG_INFINITY);
    for t in candidates {
        let tpr = at_least(&ins, t) as f64 / ins.len() as f64;
        let tnr = 1.0 - at_least(&outs, t) as f64 / outs.len() as f64;
        let acc = 0.5 * (tpr + tnr);
        if acc > best.1 {
            best = (t, acc);
        }
    }
    Some(best)
}

/// Threshold admitting the top `top` percent of `nonmembers`.
fn percentile_threshold(nonmembers: &[f64], top: f64) -> Result<f64> {
    if nonmembers.is_empty() {
        return Err(Error::Attack("percentile threshold needs held-out scores".into()));
    }
    if !(top > 0.0 && top <= 100.0) {
        return Err(Error::Attack(format!("percentile {top} is outside (0, 100]")));
    }
    let mut desc = nonmembers.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    let k = ((top / 100.0 * desc.len() as f64).ceil() as usize).clamp(1, desc.len());
    Ok(desc[k - 1])
}

/// Thresholds for stored scores of `family`, fitted on the shadow model's
/// train (member) and held-out (non-member) rows.
pub fn select_threshold(
    shadow: &dyn BlackBox,
    ds: &Dataset,
    shadow_train: &[usize],
    shadow_test: &[usize],
    family: MetricFamily,
    method: ThresholdMethod,
) -> Result<ThresholdRule> {
    let scored = |rows: &[usize]| -> Result<Vec<(f64, usize)>> {
        let proba = shadow.predict_many(ds, rows)?;
        Ok(rows
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let y = ds.label(r);
                (stored_metric_score(proba.row(i), y, family), y)
            })
            .collect())
    };
    let ins = scored(shadow_train)?;
    let outs = scored(shadow_test)?;
    let values = |v: &[(f64, usize)], class: Option<usize>| -> Vec<f64> {
        v.iter()
            .filter(|(_, y)| class.map_or(true, |c| c == *y))
            .map(|(s, _)| *s)
            .collect()
    };
    match method {
        ThresholdMethod::Percentile { top } => Ok(ThresholdRule::single(percentile_threshold(
            &values(&outs, None),
            top,
        )?)),
        ThresholdMethod::Sweep => {
            let (global, _) = sweep_threshold(&values(&ins, None), &values(&outs, None))
                .ok_or_else(|| Error::Attack("shadow splits must both be nonempty".into()))?;
            let per_class = (0..ds.n_classes())
                .map(|c| {
                    let a = values(&ins, Some(c));
                    let b = values(&outs, Some(c));
                    if a.len() + b.len() < 2 {
                        return None;
                    }
                    sweep_threshold(&a, &b).map(|(t, _)| t)
                })
                .collect();
            Ok(ThresholdRule { global, per_class })
        }
    }
}

pub fn run_metric_attack(ctx: &mut AttackContext, spec: &AttackSpec, family: MetricFamily) -> Result<AttackResult> {
    let kind = spec.surrogate(ctx.target_spec.kind);
    let shadow = ctx.shadow_model(kind, spec.seed)?;
    let rule = select_threshold(
        &shadow.model,
        ctx.ds,
        &shadow.train_rows,
        &shadow.test_rows,
        family,
        spec.threshold,
    )?;
    let rows = ctx.inference_rows().to_vec();
    let mut scores = Vec::with_capacity(rows.len());
    let mut predicted = Vec::with_capacity(rows.len());
    for (q, &r) in rows.iter().enumerate() {
        let y = ctx.ds.label(r);
        let s = stored_metric_score(ctx.inference_proba().row(q), y, family);
        predicted.push(rule.decide(s, y));
        scores.push(s);
    }
    AttackResult::new(
        spec.family,
        ctx.target_label.clone(),
        spec.seed,
        rows,
        scores,
        predicted,
        ctx.truth().to_vec(),
        rule,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_on_true_class() {
        let p = [0.0, 1.0, 0.0];
        assert_eq!(metric_score(&p, 1, MetricFamily::Loss), 0.0);
        assert_eq!(metric_score(&p, 1, MetricFamily::ModifiedEntropy), 0.0);
        assert_eq!(metric_score(&p, 1, MetricFamily::Correctness), 1.0);
        assert_eq!(metric_score(&p, 1, MetricFamily::Confidence), 1.0);
    }

    #[test]
    fn uniform_binary() {
        let p = [0.5, 0.5];
        let ln2 = 2f64.ln();
        assert!((metric_score(&p, 0, MetricFamily::Loss) - ln2).abs() < 1e-12);
        assert!((metric_score(&p, 0, MetricFamily::ModifiedEntropy) - ln2).abs() < 1e-12);
    }

    #[test]
    fn wrong_one_hot_hits_the_floor() {
        let p = [0.0, 1.0];
        assert_eq!(metric_score(&p, 0, MetricFamily::Correctness), 0.0);
        let me = metric_score(&p, 0, MetricFamily::ModifiedEntropy);
        let expected = -(1e-12f64).ln() - (1e-12f64).ln();
        assert!((me - expected).abs() < 1e-9);
        assert!(stored_metric_score(&p, 0, MetricFamily::Loss) < 0.0);
    }

    fn accuracy(ins: &[f64], outs: &[f64], t: f64) -> f64 {
        let tp = ins.iter().filter(|&&s| s >= t).count() as f64;
        let tn = outs.iter().filter(|&&s| s < t).count() as f64;
        (tp / ins.len() as f64 + tn / outs.len() as f64) / 2.0
    }

    #[test]
    fn sweep_matches_brute_force_on_six_points() {
        let ins = [0.9, 0.4, 0.7];
        let outs = [0.2, 0.5, 0.1];
        let all: Vec<f64> = ins.iter().chain(&outs).copied().collect();
        // every pairwise midpoint, plus both ends
        let mut best = f64::NEG_INFINITY;
        for a in &all {
            for b in &all {
                best = best.max(accuracy(&ins, &outs, (a + b) / 2.0));
            }
        }
        best = best.max(accuracy(&ins, &outs, -10.0)).max(accuracy(&ins, &outs, 10.0));
        let (t, acc) = sweep_threshold(&ins, &outs).unwrap();
        assert!((acc - best).abs() < 1e-12);
        assert!((accuracy(&ins, &outs, t) - best).abs() < 1e-12);
        assert!((t - 0.3).abs() < 1e-12);
        assert!((acc - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn separable_and_identical_cases() {
        // member-if-low raw scores, negated for storage
        let ins = [-0.1, -0.2];
        let outs = [-2.0, -3.0];
        assert_eq!(sweep_threshold(&ins, &outs).unwrap().1, 1.0);
        let (t, acc) = sweep_threshold(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(acc, 0.5);
        assert_eq!(t, 0.0);
    }

    #[test]
    fn percentile_admits_top_share() {
        let outs: Vec<f64> = (1..=20).map(f64::from).collect();
        let t = percentile_threshold(&outs, 10.0).unwrap();
        assert_eq!(t, 19.0);
        assert_eq!(outs.iter().filter(|&&s| s >= t).count(), 2);
        assert!(percentile_threshold(&outs, 0.0).is_err());
    }
}
