//! Mixed naive Bayes: Gaussian likelihoods for numeric blocks and
//! Laplace-smoothed categorical likelihoods for one-hot blocks.

use serde::{Deserialize, Serialize};

use super::boosting::softmax;
use super::spec::ModelSpec;
use crate::data::{BlockEncoding, EncodedMatrix};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Likelihood {
    /// Column index with per-class mean and variance.
    Gaussian {
        col: usize,
        mean: Vec<f64>,
        var: Vec<f64>,
    },
    /// Column range with per-class log probabilities of each indicator.
    Categorical {
        start: usize,
        log_prob: Vec<Vec<f64>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayes {
    log_prior: Vec<f64>,
    features: Vec<Likelihood>,
}

impl NaiveBayes {
    pub(crate) fn fit(spec: &ModelSpec, data: &EncodedMatrix) -> Result<Self> {
        let var_smoothing = spec.params().f64("var_smoothing", 1e-9)?.max(0.0);
        let k = data.n_classes;
        let n = data.len();
        let mut counts = vec![0.0; k];
        for &y in &data.labels {
            counts[y] += 1.0;
        }
        // Absent classes get a pseudo-count prior; present ones share the rest.
        let absent = counts.iter().filter(|&&c| c == 0.0).count();
        let absent_prior = 1.0 / (n + k) as f64;
        let present_mass = 1.0 - absent as f64 * absent_prior;
        let log_prior = counts
            .iter()
            .map(|&c| {
                if c == 0.0 {
                    absent_prior.ln()
                } else {
                    (present_mass * c / n as f64).ln()
                }
            })
            .collect();

        let max_var = data
            .blocks
            .iter()
            .filter(|b| !b.is_one_hot())
            .map(|b| column_variance(data, b.range.start))
            .fold(0.0, f64::max);
        let epsilon = var_smoothing * max_var;

        let mut features = Vec::with_capacity(data.blocks.len());
        for block in &data.blocks {
            match &block.encoding {
                BlockEncoding::OneHot { .. } => {
                    let width = block.range.len();
                    let mut hits = vec![vec![0.0; width]; k];
                    for i in 0..n {
                        let row = &data.x.row(i)[block.range.clone()];
                        for (h, &v) in hits[data.labels[i]].iter_mut().zip(row) {
                            *h += v;
                        }
                    }
                    let log_prob = hits
                        .iter()
                        .zip(&counts)
                        .map(|(h, &c)| {
                            h.iter()
                                .map(|&x| ((x + 1.0) / (c + width as f64)).ln())
                                .collect()
                        })
                        .collect();
                    features.push(Likelihood::Categorical {
                        start: block.range.start,
                        log_prob,
                    });
                }
                _ => {
                    let col = block.range.start;
                    let mut sum = vec![0.0; k];
                    let mut sq = vec![0.0; k];
                    for i in 0..n {
                        let v = data.x.get(i, col);
                        sum[data.labels[i]] += v;
                        sq[data.labels[i]] += v * v;
                    }
                    let mut mean = vec![0.0; k];
                    let mut var = vec![1.0 + epsilon; k];
                    for c in 0..k {
                        if counts[c] > 0.0 {
                            mean[c] = sum[c] / counts[c];
                            var[c] = (sq[c] / counts[c] - mean[c] * mean[c]).max(0.0) + epsilon;
                        }
                        // Degenerate class with zero spread and no smoothing.
                        if var[c] <= 0.0 {
                            var[c] = f64::MIN_POSITIVE.sqrt();
                        }
                    }
                    features.push(Likelihood::Gaussian { col, mean, var });
                }
            }
        }
        Ok(Self {
            log_prior,
            features,
        })
    }

    pub(crate) fn predict_into(&self, x: &[f64], out: &mut [f64]) {
        let mut joint = self.log_prior.clone();
        for f in &self.features {
            match f {
                Likelihood::Gaussian { col, mean, var } => {
                    let v = x[*col];
                    for (c, j) in joint.iter_mut().enumerate() {
                        let d = v - mean[c];
                        *j -= 0.5 * ((2.0 * std::f64::consts::PI * var[c]).ln() + d * d / var[c]);
                    }
                }
                Likelihood::Categorical { start, log_prob } => {
                    for (c, j) in joint.iter_mut().enumerate() {
                        for (w, lp) in log_prob[c].iter().enumerate() {
                            if x[start + w] != 0.0 {
                                *j += x[start + w] * lp;
                            }
                        }
                    }
                }
            }
        }
        softmax(&joint, out);
    }
}

fn column_variance(data: &EncodedMatrix, col: usize) -> f64 {
    let n = data.len() as f64;
    let mean = (0..data.len()).map(|i| data.x.get(i, col)).sum::<f64>() / n;
    (0..data.len())
        .map(|i| (data.x.get(i, col) - mean).powi(2))
        .sum::<f64>()
        / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::models::ModelKind;

    #[test]
    fn gaussian_posterior_matches_hand_computation() {
        let x = Matrix::from_rows(&[vec![0.0], vec![2.0], vec![4.0], vec![8.0]]);
        let data = EncodedMatrix::from_parts(x, vec![0, 0, 1, 1], 2);
        let spec = ModelSpec::new(ModelKind::NaiveBayes).with("var_smoothing", 0.0);
        let nb = NaiveBayes::fit(&spec, &data).unwrap();
        let mut p = [0.0; 2];
        nb.predict_into(&[3.0], &mut p);
        // class 0: mean 1 var 1; class 1: mean 6 var 4
        let l0 = (-0.5 * (2.0f64 * std::f64::consts::PI).ln() - 0.5 * 4.0).exp();
        let l1 = (-0.5 * (8.0f64 * std::f64::consts::PI).ln() - 0.5 * 9.0 / 4.0).exp();
        assert!((p[0] - l0 / (l0 + l1)).abs() < 1e-12);
    }

    #[test]
    fn absent_class_keeps_small_prior() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]);
        let data = EncodedMatrix::from_parts(x, vec![0, 0, 1], 3);
        let nb = NaiveBayes::fit(&ModelSpec::new(ModelKind::NaiveBayes), &data).unwrap();
        let total: f64 = nb.log_prior.iter().map(|l| l.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((nb.log_prior[2].exp() - 1.0 / 6.0).abs() < 1e-12);
    }
}
