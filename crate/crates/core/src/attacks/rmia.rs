//! Relative membership inference: how often the target's likelihood ratio
//! for a query dominates that of population records by a factor `gamma`.

use super::reference::PoolMode;
use super::{AttackContext, AttackResult, AttackSpec, ThresholdRule, PROBABILITY_FLOOR};
use crate::error::{Error, Result};

/// Fraction of population records `z` with
/// `[p(x) / Pr(x)] * [Pr(z) / p(z)] >= gamma`, where `p` is the target's
/// true-class probability and `Pr` the reference average.
pub fn rmia_score(target_x: f64, pr_x: f64, target_z: &[f64], pr_z: &[f64], gamma: f64) -> f64 {
    if target_z.is_empty() {
        return 0.0;
    }
    let fl = |v: f64| v.max(PROBABILITY_FLOOR);
    let ratio_x = fl(target_x) / fl(pr_x);
    let hits = target_z
        .iter()
        .zip(pr_z)
        .filter(|(&tz, &pz)| ratio_x * (fl(pz) / fl(tz)) >= gamma)
        .count();
    hits as f64 / target_z.len() as f64
}

/// Offline correction of the OUT-only reference average.
fn offline_pr(pr_out: f64, a: f64) -> f64 {
    0.5 * ((1.0 + a) * pr_out + (1.0 - a))
}

pub fn run_rmia(ctx: &mut AttackContext, spec: &AttackSpec) -> Result<AttackResult> {
    let mode = spec
        .family
        .pool_mode()
        .ok_or_else(|| Error::Attack(format!("{} is not an RMIA family", spec.family)))?;
    if !(0.0..=1.0).contains(&spec.rmia_offline_a) || spec.rmia_gamma <= 0.0 {
        return Err(Error::Attack("rmia needs gamma > 0 and a in [0, 1]".into()));
    }
    if ctx.population_sample().is_empty() {
        return Err(Error::Attack("rmia needs a nonempty population sample".into()));
    }
    let kind = spec.surrogate(ctx.target_spec.kind);
    let pool = ctx.reference_pool(mode, kind, spec.n_references(), spec.pool_seed(mode))?;
    let n_models = pool.len() as f64;

    let z_rows = ctx.population_sample();
    let z_labels: Vec<usize> = z_rows.iter().map(|&r| ctx.ds.label(r)).collect();
    let target_z: Vec<f64> = z_labels
        .iter()
        .enumerate()
        .map(|(j, &y)| ctx.population_sample_proba().get(j, y))
        .collect();
    let pr_z: Vec<f64> = z_labels
        .iter()
        .enumerate()
        .map(|(j, &y)| {
            pool.models
                .iter()
                .map(|m| m.population_proba.get(j, y))
                .sum::<f64>()
                / n_models
        })
        .collect();

    let rows = ctx.inference_rows().to_vec();
    let rule = ThresholdRule::single(spec.rmia_beta);
    let mut scores = Vec::with_capacity(rows.len());
    let mut predicted = Vec::with_capacity(rows.len());
    for (q, &r) in rows.iter().enumerate() {
        let y = ctx.ds.label(r);
        let mean = pool.models.iter().map(|m| m.query_proba.get(q, y)).sum::<f64>() / n_models;
        let pr_x = match mode {
            PoolMode::Online => mean,
            PoolMode::Offline => offline_pr(mean, spec.rmia_offline_a),
        };
        let s = rmia_score(
            ctx.inference_proba().get(q, y),
            pr_x,
            &target_z,
            &pr_z,
            spec.rmia_gamma,
        );
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
    fn identical_probabilities_score_zero_at_gamma_two() {
        let z = [0.7, 0.7];
        assert_eq!(rmia_score(0.7, 0.7, &z, &z, 2.0), 0.0);
        assert_eq!(rmia_score(0.7, 0.7, &z, &z, 1.0), 1.0);
    }

    #[test]
    fn matches_brute_force_enumeration() {
        // three reference models, two population records
        let refs_x = [0.2, 0.4, 0.3];
        let pr_x = refs_x.iter().sum::<f64>() / 3.0;
        let target_x = 0.9;
        let refs_z = [[0.5, 0.6, 0.7], [0.1, 0.2, 0.3]];
        let pr_z: Vec<f64> = refs_z.iter().map(|r| r.iter().sum::<f64>() / 3.0).collect();
        let target_z = [0.6, 0.05];
        let lr: Vec<f64> = (0..2)
            .map(|j| (target_x / pr_x) * (pr_z[j] / target_z[j]))
            .collect();
        // lr = [3.0*0.6/0.6, 3.0*0.2/0.05] = [3, 12]
        for gamma in [1.0, 2.0, 3.0, 5.0, 13.0] {
            let expected = lr.iter().filter(|&&l| l >= gamma).count() as f64 / 2.0;
            assert_eq!(rmia_score(target_x, pr_x, &target_z, &pr_z, gamma), expected);
        }
    }

    #[test]
    fn offline_interpolation() {
        assert!((offline_pr(0.4, 0.3) - 0.5 * (1.3 * 0.4 + 0.7)).abs() < 1e-15);
        assert_eq!(offline_pr(0.4, 1.0), 0.4);
    }
}
