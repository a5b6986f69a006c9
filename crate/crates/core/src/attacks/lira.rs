//! Likelihood-ratio attack: per-query Gaussian fits of the log-odds
//! confidence under IN and OUT reference models.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::reference::{PoolMode, ReferencePool};
use super::{AttackContext, AttackResult, AttackSpec, ThresholdRule};
use crate::error::{Error, Result};

pub const VARIANCE_FLOOR: f64 = 1e-8;
const LOGIT_CLIP: f64 = 1e-6;

/// `log(p_y / (1 - p_y))` with `p_y` clipped into `[1e-6, 1 - 1e-6]`.
pub fn logit_confidence(p: &[f64], y: usize) -> f64 {
    let q = p[y].clamp(LOGIT_CLIP, 1.0 - LOGIT_CLIP);
    (q / (1.0 - q)).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianFit {
    /// Mean and unbiased variance (floored). Needs two or more values.
    pub fn fit(values: &[f64]) -> Option<Self> {
        if values.len() < 2 {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        Some(Self {
            mean,
            variance: var.max(VARIANCE_FLOOR),
        })
    }

    /// Mean of `values` with a variance supplied from elsewhere.
    pub fn with_variance(values: &[f64], variance: f64) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        Some(Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            variance: variance.max(VARIANCE_FLOOR),
        })
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let d = x - self.mean;
        -0.5 * (2.0 * std::f64::consts::PI * self.variance).ln() - d * d / (2.0 * self.variance)
    }

    pub fn z(&self, x: f64) -> f64 {
        (x - self.mean) / self.variance.sqrt()
    }
}

/// `ln Phi(z)` without overflow or early saturation.
fn ln_normal_cdf(z: f64) -> f64 {
    if z > 0.0 {
        (-0.5 * erfc(z / std::f64::consts::SQRT_2)).ln_1p()
    } else if z > -30.0 {
        (0.5 * erfc(-z / std::f64::consts::SQRT_2)).ln()
    } else {
        // Mills-ratio asymptote.
        -0.5 * z * z - (-z).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Natural log of the LiRA score. Online: log pdf ratio IN over OUT.
/// Offline: `ln Pr[Z <= phi]` for `Z ~ N(mu_out, var_out)`.
pub fn lira_log_score(phi: f64, fit_in: Option<&GaussianFit>, fit_out: &GaussianFit, mode: PoolMode) -> Result<f64> {
    match mode {
        PoolMode::Online => {
            let fit_in = fit_in
                .ok_or_else(|| Error::Attack("online LiRA needs an IN distribution".into()))?;
            Ok(fit_in.ln_pdf(phi) - fit_out.ln_pdf(phi))
        }
        PoolMode::Offline => Ok(ln_normal_cdf(fit_out.z(phi))),
    }
}

/// LiRA score on its natural scale: a likelihood ratio (online) or a CDF
/// value in `[0, 1]` (offline).
pub fn lira_score(phi: f64, fit_in: Option<&GaussianFit>, fit_out: &GaussianFit, mode: PoolMode) -> Result<f64> {
    lira_log_score(phi, fit_in, fit_out, mode).map(f64::exp)
}

/// Per-query confidences split by IN/OUT membership.
fn pool_logits(pool: &ReferencePool, q: usize, y: usize) -> (Vec<f64>, Vec<f64>) {
    let mut ins = Vec::new();
    let mut outs = Vec::new();
    for m in &pool.models {
        let phi = logit_confidence(m.query_proba.row(q), y);
        if m.query_in[q] {
            ins.push(phi);
        } else {
            outs.push(phi);
        }
    }
    (ins, outs)
}

fn global_variance(samples: &[Vec<f64>]) -> f64 {
    let fits: Vec<f64> = samples
        .iter()
        .filter_map(|s| GaussianFit::fit(s))
        .map(|f| f.variance)
        .collect();
    if fits.is_empty() {
        let all: Vec<f64> = samples.iter().flatten().copied().collect();
        GaussianFit::fit(&all).map_or(1.0, |f| f.variance)
    } else {
        fits.iter().sum::<f64>() / fits.len() as f64
    }
}

fn side_fit(values: &[f64], global: f64) -> Option<GaussianFit> {
    GaussianFit::fit(values).or_else(|| GaussianFit::with_variance(values, global))
}

/// Stores `ln(score)`: thresholds are `ln 1 = 0` online and `ln 0.5` offline.
pub fn run_lira(ctx: &mut AttackContext, spec: &AttackSpec) -> Result<AttackResult> {
    let mode = spec
        .family
        .pool_mode()
        .ok_or_else(|| Error::Attack(format!("{} is not a LiRA family", spec.family)))?;
    let kind = spec.surrogate(ctx.target_spec.kind);
    let pool = ctx.reference_pool(mode, kind, spec.n_references(), spec.pool_seed(mode))?;
    let rows = ctx.inference_rows().to_vec();
    let labels: Vec<usize> = rows.iter().map(|&r| ctx.ds.label(r)).collect();

    let (ins, outs): (Vec<Vec<f64>>, Vec<Vec<f64>>) = (0..rows.len())
        .map(|q| pool_logits(&pool, q, labels[q]))
        .unzip();
    let var_in = global_variance(&ins);
    let var_out = global_variance(&outs);

    let beta = match mode {
        PoolMode::Online => 0.0,
        PoolMode::Offline => 0.5f64.ln(),
    };
    let rule = ThresholdRule::single(beta);
    let mut scores = Vec::with_capacity(rows.len());
    for q in 0..rows.len() {
        let phi = logit_confidence(ctx.inference_proba().row(q), labels[q]);
        let fit_out = side_fit(&outs[q], var_out)
            .ok_or_else(|| Error::Attack(format!("query {} has no OUT models", rows[q])))?;
        let fit_in = side_fit(&ins[q], var_in);
        scores.push(lira_log_score(phi, fit_in.as_ref(), &fit_out, mode)?);
    }
    let predicted = scores
        .iter()
        .zip(&labels)
        .map(|(&s, &y)| rule.decide(s, y))
        .collect();
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
    fn logit_values() {
        assert_eq!(logit_confidence(&[0.5, 0.5], 0), 0.0);
        assert!((logit_confidence(&[0.1, 0.9], 1) - 9f64.ln()).abs() < 1e-12);
        let hi = logit_confidence(&[0.0, 1.0], 1);
        assert!(hi.is_finite() && (hi - ((1.0 - 1e-6) / 1e-6f64).ln()).abs() < 1e-6);
    }

    #[test]
    fn identical_fits_give_unit_ratio() {
        let f = GaussianFit::fit(&[0.0, 1.0, 2.0]).unwrap();
        for phi in [-3.0, 0.0, 5.0] {
            let s = lira_score(phi, Some(&f), &f, PoolMode::Online).unwrap();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn offline_median_is_half() {
        let f = GaussianFit::fit(&[-1.0, 1.0]).unwrap();
        let s = lira_score(0.0, None, &f, PoolMode::Offline).unwrap();
        assert!((s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn online_matches_direct_pdf_ratio() {
        let fin = GaussianFit::fit(&[2.0, 4.0]).unwrap();
        let fout = GaussianFit::with_variance(&[0.0, 0.0], 1.0).unwrap();
        assert_eq!(fin.mean, 3.0);
        assert_eq!(fin.variance, 2.0);
        let pdf = |x: f64, m: f64, v: f64| {
            (-(x - m) * (x - m) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
        };
        let expected = pdf(3.0, 3.0, 2.0) / pdf(3.0, 0.0, 1.0);
        let s = lira_score(3.0, Some(&fin), &fout, PoolMode::Online).unwrap();
        assert!((s - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn log_cdf_is_accurate_in_the_tails() {
        for z in [-40.0, -10.0, -1.0, 0.0, 1.0, 10.0] {
            let v = ln_normal_cdf(z);
            assert!(v.is_finite() && v <= 0.0);
        }
        assert!((ln_normal_cdf(0.0) - 0.5f64.ln()).abs() < 1e-15);
        // strictly increasing even where the CDF itself rounds to 1
        assert!(ln_normal_cdf(9.0) < ln_normal_cdf(10.0));
        assert!((ln_normal_cdf(-10.0) - (-53.23128515051247)).abs() < 1e-6);
    }

    #[test]
    fn variance_floor_applies() {
        let f = GaussianFit::fit(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(f.variance, VARIANCE_FLOOR);
    }
}
