//! One-class SVM, ν formulation, solved with two-coordinate SMO steps.
//!
//! Dual: minimise `½ αᵀKα` subject to `0 ≤ αᵢ ≤ 1/(νn)` and `Σαᵢ = 1`.
//! The anomaly score is `ρ − Σ αᵢ K(xᵢ, x)`: positive outside the boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf,
    Poly,
    Sigmoid,
}

impl Kernel {
    pub fn parse(s: &str) -> Option<Kernel> {
        match s {
            "linear" => Some(Kernel::Linear),
            "rbf" => Some(Kernel::Rbf),
            "poly" => Some(Kernel::Poly),
            "sigmoid" => Some(Kernel::Sigmoid),
            _ => None,
        }
    }

    /// `gamma` is 1/d.
    pub fn eval(self, a: &[f64], b: &[f64], gamma: f64) -> f64 {
        let dot = || a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        match self {
            Kernel::Linear => dot(),
            Kernel::Rbf => (-gamma * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()).exp(),
            Kernel::Poly => (dot() + 1.0).powi(3),
            Kernel::Sigmoid => (gamma * dot() + 1.0).tanh(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneClassSvm {
    pub kernel: Kernel,
    pub gamma: f64,
    pub rho: f64,
    pub support: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
}

const TAU: f64 = 1e-12;

impl OneClassSvm {
    pub fn fit(x: &[Vec<f64>], kernel: Kernel, nu: f64, tol: f64, max_iter: usize) -> Result<OneClassSvm> {
        let n = x.len();
        if n < 2 {
            return Err(Error::Precondition("ocsvm needs at least 2 rows".into()));
        }
        let gamma = 1.0 / x[0].len() as f64;
        let c = 1.0 / (nu * n as f64);
        // libsvm-style start: fill the first ⌊νn⌋ coordinates to the bound
        let mut alpha = vec![0.0; n];
        let mut left = 1.0;
        for a in alpha.iter_mut() {
            let take = c.min(left);
            *a = take;
            left -= take;
            if left <= 0.0 {
                break;
            }
        }
        let column = |j: usize| -> Vec<f64> { x.iter().map(|r| kernel.eval(r, &x[j], gamma)).collect() };
        let diag: Vec<f64> = x.iter().map(|r| kernel.eval(r, r, gamma)).collect();
        let mut g = vec![0.0; n];
        for (j, &a) in alpha.iter().enumerate() {
            if a > 0.0 {
                for (gi, kij) in g.iter_mut().zip(column(j)) {
                    *gi += a * kij;
                }
            }
        }
        for _ in 0..max_iter {
            // i may grow (α < C, smallest gradient), j may shrink (α > 0, largest gradient)
            let mut i = usize::MAX;
            let mut j = usize::MAX;
            for k in 0..n {
                if alpha[k] < c && (i == usize::MAX || g[k] < g[i]) {
                    i = k;
                }
                if alpha[k] > 0.0 && (j == usize::MAX || g[k] > g[j]) {
                    j = k;
                }
            }
            if i == usize::MAX || j == usize::MAX || g[j] - g[i] < tol {
                break;
            }
            let ki = column(i);
            let kj = column(j);
            let curv = (diag[i] + diag[j] - 2.0 * ki[j]).max(TAU);
            let t = ((g[j] - g[i]) / curv).min(c - alpha[i]).min(alpha[j]);
            alpha[i] += t;
            alpha[j] -= t;
            for k in 0..n {
                g[k] += t * (ki[k] - kj[k]);
            }
        }
        let eps = 1e-12 * c;
        let free: Vec<f64> = (0..n).filter(|&k| alpha[k] > eps && alpha[k] < c - eps).map(|k| g[k]).collect();
        let rho = if free.is_empty() {
            let up = (0..n).filter(|&k| alpha[k] < c - eps).map(|k| g[k]).fold(f64::INFINITY, f64::min);
            let low = (0..n).filter(|&k| alpha[k] > eps).map(|k| g[k]).fold(f64::NEG_INFINITY, f64::max);
            match (up.is_finite(), low.is_finite()) {
                (true, true) => (up + low) / 2.0,
                (true, false) => up,
                _ => low,
            }
        } else {
            free.iter().sum::<f64>() / free.len() as f64
        };
        let keep: Vec<usize> = (0..n).filter(|&k| alpha[k] > 0.0).collect();
        Ok(OneClassSvm {
            kernel,
            gamma,
            rho,
            support: keep.iter().map(|&k| x[k].clone()).collect(),
            alpha: keep.iter().map(|&k| alpha[k]).collect(),
        })
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        let f: f64 = self
            .support
            .iter()
            .zip(&self.alpha)
            .map(|(s, a)| a * self.kernel.eval(s, row, self.gamma))
            .sum();
        self.rho - f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        let a = [1.0, 2.0];
        let b = [0.5, -1.0];
        assert_eq!(Kernel::Linear.eval(&a, &b, 0.5), -1.5);
        assert_eq!(Kernel::Poly.eval(&a, &b, 0.5), -0.125);
        assert!((Kernel::Rbf.eval(&a, &b, 0.5) - (-0.5f64 * 9.25).exp()).abs() < 1e-15);
        assert!((Kernel::Sigmoid.eval(&a, &b, 0.5) - 0.25f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn dual_constraints_hold_and_outlier_scores_high() {
        let mut x: Vec<Vec<f64>> = (0..30).map(|i| vec![0.5 + 0.01 * (i % 6) as f64, 0.5 + 0.01 * (i / 6) as f64]).collect();
        x.push(vec![0.52, 0.51]);
        let m = OneClassSvm::fit(&x, Kernel::Rbf, 0.2, 1e-6, 100_000).unwrap();
        let total: f64 = m.alpha.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        let c = 1.0 / (0.2 * x.len() as f64);
        assert!(m.alpha.iter().all(|&a| a > 0.0 && a <= c + 1e-12));
        assert!(m.score(&[3.0, 3.0]) > 0.0);
        assert!(m.score(&[3.0, 3.0]) > m.score(&[0.52, 0.52]));
    }

    #[test]
    fn nu_bounds_fraction_outside() {
        // at most a ν fraction of training rows may fall strictly outside
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.91).cos()]).collect();
        for nu in [0.1, 0.3, 0.5] {
            let m = OneClassSvm::fit(&x, Kernel::Rbf, nu, 1e-8, 200_000).unwrap();
            let outside = x.iter().filter(|r| m.score(r) > 1e-6).count();
            assert!(outside as f64 <= nu * 50.0 + 1e-9, "nu {nu}: {outside}");
        }
    }
}
