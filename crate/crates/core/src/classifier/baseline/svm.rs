//! One-vs-rest linear SVM with squared hinge loss and an l1 penalty on the
//! weights, fitted by accelerated proximal gradient (FISTA).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    /// Loss weight; the penalty is `||w||_1 + C * sum(sq_hinge)`.
    pub c: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            max_iter: 5000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    /// One weight vector per class.
    pub weights: Vec<Vec<f64>>,
    /// Unpenalized intercepts.
    pub bias: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest eigenvalue of `[X 1]^T [X 1]` by power iteration.
fn gram_spectral_norm(x: &[Vec<f64>]) -> f64 {
    let p = x[0].len() + 1;
    let mut gram = vec![0.0; p * p];
    for row in x {
        for i in 0..p {
            let xi = if i + 1 == p { 1.0 } else { row[i] };
            if xi == 0.0 {
                continue;
            }
            for j in 0..p {
                let xj = if j + 1 == p { 1.0 } else { row[j] };
                gram[i * p + j] += xi * xj;
            }
        }
    }
    let mut v = vec![1.0 / (p as f64).sqrt(); p];
    let mut lambda = 0.0;
    for _ in 0..200 {
        let w: Vec<f64> = (0..p).map(|i| dot(&gram[i * p..(i + 1) * p], &v)).collect();
        let norm = dot(&w, &w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        v = w.into_iter().map(|e| e / norm).collect();
    }
    lambda
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Binary fit with targets in {-1, +1}. Returns (weights, bias).
fn fit_binary(x: &[Vec<f64>], y: &[f64], lipschitz: f64, cfg: &SvmConfig) -> (Vec<f64>, f64) {
    let p = x[0].len();
    let step = 1.0 / lipschitz;
    let mut w = vec![0.0; p];
    let mut b = 0.0;
    let mut zw = w.clone();
    let mut zb = b;
    let mut t = 1.0f64;
    for _ in 0..cfg.max_iter {
        let mut gw = vec![0.0; p];
        let mut gb = 0.0;
        for (row, &yi) in x.iter().zip(y) {
            let margin = 1.0 - yi * (dot(&zw, row) + zb);
            if margin > 0.0 {
                let coef = -2.0 * cfg.c * yi * margin;
                gb += coef;
                for (g, xv) in gw.iter_mut().zip(row) {
                    *g += coef * xv;
                }
            }
        }
        let new_w: Vec<f64> = zw
            .iter()
            .zip(&gw)
            .map(|(z, g)| soft_threshold(z - step * g, step))
            .collect();
        let new_b = zb - step * gb;
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let momentum = (t - 1.0) / t_next;
        let mut change = (new_b - b).abs();
        let mut scale = new_b.abs();
        for i in 0..p {
            change = change.max((new_w[i] - w[i]).abs());
            scale = scale.max(new_w[i].abs());
            zw[i] = new_w[i] + momentum * (new_w[i] - w[i]);
        }
        zb = new_b + momentum * (new_b - b);
        w = new_w;
        b = new_b;
        t = t_next;
        if change <= cfg.tol * scale.max(1.0) {
            break;
        }
    }
    (w, b)
}

impl LinearSvm {
    pub fn fit(x: &[Vec<f64>], labels: &[usize], num_classes: usize, cfg: &SvmConfig) -> Result<Self> {
        super::check_training_data(x, labels, num_classes)?;
        if cfg.c.is_nan() || cfg.c <= 0.0 || cfg.max_iter == 0 {
            return Err(Error::InvalidArgument("svm: C and max_iter must be positive".into()));
        }
        let lipschitz = (2.0 * cfg.c * gram_spectral_norm(x)).max(f64::MIN_POSITIVE) * 1.001;
        let (weights, bias) = (0..num_classes)
            .map(|k| {
                let y: Vec<f64> = labels.iter().map(|&l| if l == k { 1.0 } else { -1.0 }).collect();
                fit_binary(x, &y, lipschitz, cfg)
            })
            .unzip();
        Ok(LinearSvm { weights, bias })
    }

    pub fn decision(&self, x: &[f64]) -> Vec<f64> {
        self.weights.iter().zip(&self.bias).map(|(w, b)| dot(w, x) + b).collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        crate::classifier::argmax(&self.decision(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_toy_is_fit_exactly() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..30 {
            let k = i % 3;
            let mut row = vec![0.0; 6];
            row[k] = 1.0;
            row[3 + (i % 2)] = 0.5;
            x.push(row);
            y.push(k);
        }
        let svm = LinearSvm::fit(&x, &y, 3, &SvmConfig::default()).unwrap();
        for (row, &label) in x.iter().zip(&y) {
            assert_eq!(svm.predict(row), label);
        }
    }

    #[test]
    fn penalty_zeroes_irrelevant_weights() {
        // Feature 1 is noise independent of the label.
        let x: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }, if (i / 2) % 2 == 0 { 0.3 } else { -0.3 }])
            .collect();
        let y: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let svm = LinearSvm::fit(&x, &y, 2, &SvmConfig::default()).unwrap();
        assert!(svm.weights[0][1].abs() < 1e-6);
        assert!(svm.weights[0][0] > 0.0 && svm.weights[1][0] < 0.0);
    }

    #[test]
    fn objective_not_improved_by_perturbation() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()]).collect();
        let y: Vec<f64> = (0..20).map(|i| if (i * 7) % 5 < 2 { 1.0 } else { -1.0 }).collect();
        let cfg = SvmConfig { max_iter: 50_000, tol: 1e-12, ..SvmConfig::default() };
        let l = 2.0 * gram_spectral_norm(&x) * 1.001;
        let (w, b) = fit_binary(&x, &y, l, &cfg);
        let objective = |w: &[f64], b: f64| {
            w.iter().map(|v| v.abs()).sum::<f64>()
                + x.iter()
                    .zip(&y)
                    .map(|(r, yi)| (1.0 - yi * (dot(w, r) + b)).max(0.0).powi(2))
                    .sum::<f64>()
        };
        let best = objective(&w, b);
        for d in [(1e-3, 0.0, 0.0), (-1e-3, 0.0, 0.0), (0.0, 1e-3, 0.0), (0.0, -1e-3, 0.0), (0.0, 0.0, 1e-3), (0.0, 0.0, -1e-3)] {
            let w2 = [w[0] + d.0, w[1] + d.1];
            assert!(objective(&w2, b + d.2) >= best - 1e-9);
        }
    }
}
