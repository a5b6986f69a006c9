//! Multinomial logistic regression.
//!
//! The objective is the mean cross-entropy plus `penalty / (C * n)`, which
//! matches the usual `C * sum(loss) + penalty` scaling. Smooth problems are
//! solved with L-BFGS; problems with an L1 component use proximal gradient
//! descent with a step of `1/L`.

use serde::{Deserialize, Serialize};

use super::boosting::softmax;
use super::spec::ModelSpec;
use crate::data::EncodedMatrix;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Solver {
    Lbfgs,
    Gradient,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct LrParams {
    /// Coefficient of `||w||^2 / 2` in the mean objective.
    pub l2: f64,
    /// Coefficient of `||w||_1` in the mean objective.
    pub l1: f64,
    pub solver: Solver,
    pub tol: f64,
    pub max_iter: usize,
}

impl LrParams {
    pub fn from_spec(spec: &ModelSpec, n: usize) -> Result<Self> {
        let p = spec.params();
        let penalty = p.text("penalty", "l2")?;
        let c = p.opt_f64("C", Some(1.0))?.unwrap_or(0.0);
        let l1_ratio = p.opt_f64("l1_ratio", None)?.unwrap_or(0.0);
        if !(0.0..=1.0).contains(&l1_ratio) {
            return Err(Error::ModelSpec("l1_ratio must lie in [0, 1]".into()));
        }
        if c < 0.0 {
            return Err(Error::ModelSpec("C must be non-negative".into()));
        }
        let strength = if c == 0.0 || penalty == "none" {
            0.0
        } else {
            1.0 / (c * n.max(1) as f64)
        };
        let (l2, l1) = match penalty.as_str() {
            "none" => (0.0, 0.0),
            "l2" => (strength, 0.0),
            "l1" => (0.0, strength),
            "elasticnet" => (strength * (1.0 - l1_ratio), strength * l1_ratio),
            other => return Err(Error::ModelSpec(format!("unknown penalty {other:?}"))),
        };
        let solver = match p.text("solver", "lbfgs")?.as_str() {
            "lbfgs" | "newton-cg" | "newton_cg" | "liblinear" => Solver::Lbfgs,
            "sag" | "saga" => Solver::Gradient,
            other => return Err(Error::ModelSpec(format!("unknown solver {other:?}"))),
        };
        Ok(Self {
            l2,
            l1,
            solver: if l1 > 0.0 { Solver::Gradient } else { solver },
            tol: p.f64("tol", 1e-4)?.max(0.0),
            max_iter: p.usize("max_iter", 100)?,
        })
    }
}

/// Fitted weights. Row `k` of `theta` is `[w_k, b_k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    n_classes: usize,
    n_features: usize,
    theta: Vec<f64>,
}

impl LogisticRegression {
    pub(crate) fn zeros(n_features: usize, n_classes: usize) -> Self {
        Self {
            n_classes,
            n_features,
            theta: vec![0.0; n_classes * (n_features + 1)],
        }
    }

    pub(crate) fn fit(spec: &ModelSpec, data: &EncodedMatrix) -> Result<Self> {
        let params = LrParams::from_spec(spec, data.len())?;
        let mut model = Self::zeros(data.n_features(), data.n_classes);
        let problem = Problem::new(data, params.l2);
        match params.solver {
            Solver::Lbfgs => lbfgs(&problem, &mut model.theta, params.tol, params.max_iter),
            Solver::Gradient => {
                let step = 1.0 / problem.lipschitz();
                let mut grad = vec![0.0; model.theta.len()];
                for _ in 0..params.max_iter {
                    problem.value_grad(&model.theta, &mut grad);
                    if problem.prox_step(&mut model.theta, &grad, step, params.l1) < params.tol {
                        break;
                    }
                }
            }
        }
        Ok(model)
    }

    /// `steps` plain gradient steps of size `1/L` on the unpenalized loss.
    pub(crate) fn gradient_steps(&mut self, data: &EncodedMatrix, steps: usize) {
        let problem = Problem::new(data, 0.0);
        let step = 1.0 / problem.lipschitz();
        let mut grad = vec![0.0; self.theta.len()];
        for _ in 0..steps {
            problem.value_grad(&self.theta, &mut grad);
            problem.prox_step(&mut self.theta, &grad, step, 0.0);
        }
    }

    pub(crate) fn parameters(&self) -> &[f64] {
        &self.theta
    }

    pub(crate) fn set_parameters(&mut self, theta: &[f64]) {
        self.theta.copy_from_slice(theta);
    }

    pub(crate) fn predict_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.n_features;
        let z: Vec<f64> = self
            .theta
            .chunks(d + 1)
            .map(|w| dot(&w[..d], x) + w[d])
            .collect();
        softmax(&z, out);
    }

    pub fn coefficients(&self) -> Matrix {
        let d = self.n_features;
        let rows: Vec<Vec<f64>> = self.theta.chunks(d + 1).map(|w| w[..d].to_vec()).collect();
        Matrix::from_rows(&rows)
    }

    pub fn intercepts(&self) -> Vec<f64> {
        let d = self.n_features;
        self.theta.chunks(d + 1).map(|w| w[d]).collect()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Problem<'a> {
    data: &'a EncodedMatrix,
    l2: f64,
    k: usize,
    d: usize,
}

impl<'a> Problem<'a> {
    fn new(data: &'a EncodedMatrix, l2: f64) -> Self {
        Self {
            data,
            l2,
            k: data.n_classes,
            d: data.n_features(),
        }
    }

    /// Smooth objective and its gradient (intercepts are not penalized).
    fn value_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let (k, d) = (self.k, self.d);
        let n = self.data.len() as f64;
        grad.fill(0.0);
        let mut z = vec![0.0; k];
        let mut p = vec![0.0; k];
        let mut loss = 0.0;
        for (i, &y) in self.data.labels.iter().enumerate() {
            let x = self.data.x.row(i);
            for (c, zc) in z.iter_mut().enumerate() {
                let w = &theta[c * (d + 1)..(c + 1) * (d + 1)];
                *zc = dot(&w[..d], x) + w[d];
            }
            softmax(&z, &mut p);
            loss -= p[y].max(1e-300).ln();
            for c in 0..k {
                let r = (p[c] - f64::from(u8::from(c == y))) / n;
                let g = &mut grad[c * (d + 1)..(c + 1) * (d + 1)];
                for (gj, xj) in g[..d].iter_mut().zip(x) {
                    *gj += r * xj;
                }
                g[d] += r;
            }
        }
        let mut value = loss / n;
        if self.l2 > 0.0 {
            for c in 0..k {
                for j in 0..d {
                    let w = theta[c * (d + 1) + j];
                    value += 0.5 * self.l2 * w * w;
                    grad[c * (d + 1) + j] += self.l2 * w;
                }
            }
        }
        value
    }

    /// Upper bound on the gradient's Lipschitz constant:
    /// `0.5 * lambda_max(X'X / n) + l2`, with the intercept column included.
    fn lipschitz(&self) -> f64 {
        let (n, d) = (self.data.len(), self.d);
        let mut v = vec![1.0 / ((d + 1) as f64).sqrt(); d + 1];
        let mut lambda = 0.0;
        for _ in 0..100 {
            let mut next = vec![0.0; d + 1];
            for i in 0..n {
                let x = self.data.x.row(i);
                let s = dot(&v[..d], x) + v[d];
                for (nj, xj) in next[..d].iter_mut().zip(x) {
                    *nj += s * xj;
                }
                next[d] += s;
            }
            next.iter_mut().for_each(|e| *e /= n as f64);
            let norm = dot(&next, &next).sqrt();
            if norm == 0.0 {
                break;
            }
            let converged = (norm - lambda).abs() <= 1e-10 * norm;
            lambda = norm;
            next.iter_mut().for_each(|e| *e /= norm);
            v = next;
            if converged {
                break;
            }
        }
        (0.5 * lambda + self.l2).max(1e-12)
    }

    /// One proximal gradient step; returns the gradient-mapping norm.
    fn prox_step(&self, theta: &mut [f64], grad: &[f64], step: f64, l1: f64) -> f64 {
        let d = self.d;
        let mut moved = 0.0;
        for (j, (t, g)) in theta.iter_mut().zip(grad).enumerate() {
            let mut next = *t - step * g;
            if l1 > 0.0 && j % (d + 1) != d {
                let thr = step * l1;
                next = next.signum() * (next.abs() - thr).max(0.0);
            }
            moved += (next - *t) * (next - *t);
            *t = next;
        }
        moved.sqrt() / step
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Limited-memory BFGS with Armijo backtracking. Stops when the largest
/// gradient component drops below `tol`.
fn lbfgs(problem: &Problem, theta: &mut [f64], tol: f64, max_iter: usize) {
    const MEMORY: usize = 10;
    let dim = theta.len();
    let mut grad = vec![0.0; dim];
    let mut value = problem.value_grad(theta, &mut grad);
    let mut history: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::with_capacity(MEMORY);
    let mut trial = vec![0.0; dim];
    let mut trial_grad = vec![0.0; dim];
    for _ in 0..max_iter {
        if max_abs(&grad) <= tol {
            break;
        }
        // two-loop recursion
        let mut q = grad.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.last() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|qi| *qi *= gamma);
        } else {
            let scale = 1.0 / problem.lipschitz();
            q.iter_mut().for_each(|qi| *qi *= scale);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&grad, &dir);
        if slope >= 0.0 {
            dir = grad.iter().map(|g| -g).collect();
            slope = -dot(&grad, &grad);
            history.clear();
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            for ((tr, th), di) in trial.iter_mut().zip(theta.iter()).zip(&dir) {
                *tr = th + t * di;
            }
            let v = problem.value_grad(&trial, &mut trial_grad);
            if v <= value + 1e-4 * t * slope {
                accepted = Some(v);
                break;
            }
            t *= 0.5;
        }
        let Some(new_value) = accepted else { break };
        let s: Vec<f64> = trial.iter().zip(theta.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = trial_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        theta.copy_from_slice(&trial);
        grad.copy_from_slice(&trial_grad);
        let prev = value;
        value = new_value;
        if sy > 1e-12 {
            if history.len() == MEMORY {
                history.remove(0);
            }
            history.push((s, y, 1.0 / sy));
        }
        if (prev - value).abs() <= 1e-15 * prev.abs().max(1.0) {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;

    fn noisy(n: usize) -> EncodedMatrix {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let a = (i as f64 * 0.731).sin();
            let b = (i as f64 * 0.377).cos();
            rows.push(vec![a, b]);
            labels.push(usize::from(a - 0.5 * b + 0.6 * (i as f64 * 2.1).sin() > 0.0));
        }
        EncodedMatrix::from_parts(Matrix::from_rows(&rows), labels, 2)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = noisy(50);
        let problem = Problem::new(&data, 0.3);
        let theta: Vec<f64> = (0..6).map(|i| 0.1 * i as f64 - 0.2).collect();
        let mut g = vec![0.0; 6];
        problem.value_grad(&theta, &mut g);
        for j in 0..6 {
            let h = 1e-6;
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[j] += h;
            dn[j] -= h;
            let mut scratch = vec![0.0; 6];
            let fd = (problem.value_grad(&up, &mut scratch) - problem.value_grad(&dn, &mut scratch))
                / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-7, "coord {j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn lbfgs_and_gradient_descent_agree() {
        let data = noisy(200);
        let a = LogisticRegression::fit(
            &ModelSpec::new(ModelKind::LogisticRegression)
                .with("tol", 1e-10)
                .with("max_iter", 500usize),
            &data,
        )
        .unwrap();
        let b = LogisticRegression::fit(
            &ModelSpec::new(ModelKind::LogisticRegression)
                .with("solver", "saga")
                .with("tol", 1e-9)
                .with("max_iter", 200_000usize),
            &data,
        )
        .unwrap();
        let mut pa = [0.0; 2];
        let mut pb = [0.0; 2];
        a.predict_into(&[0.3, -0.2], &mut pa);
        b.predict_into(&[0.3, -0.2], &mut pb);
        assert!((pa[1] - pb[1]).abs() < 1e-5, "{pa:?} vs {pb:?}");
    }

    #[test]
    fn strong_l1_zeroes_weights() {
        let data = noisy(100);
        let m = LogisticRegression::fit(
            &ModelSpec::new(ModelKind::LogisticRegression)
                .with("penalty", "elasticnet")
                .with("l1_ratio", 1.0)
                .with("C", 1e-4)
                .with("max_iter", 2000usize),
            &data,
        )
        .unwrap();
        assert!(m.coefficients().as_slice().iter().all(|w| *w == 0.0));
    }
}
