//! Reference solver for the linear SVM dual, used only by tests.
//!
//! Maximizes `sum(a) - a'Qa / 2` subject to `0 <= a <= C` and `y'a = 0`
//! with accelerated projected gradient ascent. The projection onto the
//! feasible set is found by bisection on the multiplier of the equality
//! constraint. Kernel values are computed from plain id sets, independent of
//! the crate's sparse vector code.

#![allow(dead_code)]

use std::collections::HashSet;

pub struct DualOracle {
    q: Vec<Vec<f64>>,
    y: Vec<f64>,
    c: f64,
}

impl DualOracle {
    pub fn new(points: &[(Vec<u32>, f64)], c: f64) -> Self {
        let sets: Vec<HashSet<u32>> = points.iter().map(|(ids, _)| ids.iter().copied().collect()).collect();
        let y: Vec<f64> = points.iter().map(|(_, y)| *y).collect();
        let n = points.len();
        let mut q = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let k = sets[i].intersection(&sets[j]).count() as f64;
                q[i][j] = y[i] * y[j] * k;
            }
        }
        Self { q, y, c }
    }

    pub fn objective(&self, a: &[f64]) -> f64 {
        let n = a.len();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += a[i] * a[j] * self.q[i][j];
            }
        }
        a.iter().sum::<f64>() - 0.5 * quad
    }

    fn gradient(&self, a: &[f64]) -> Vec<f64> {
        (0..a.len())
            .map(|i| 1.0 - (0..a.len()).map(|j| self.q[i][j] * a[j]).sum::<f64>())
            .collect()
    }

    fn project(&self, v: &[f64]) -> Vec<f64> {
        let clip = |x: f64| x.clamp(0.0, self.c);
        let balance = |lambda: f64| -> f64 {
            v.iter().zip(&self.y).map(|(vi, yi)| yi * clip(vi - lambda * yi)).sum()
        };
        let bound = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + self.c + 1.0;
        let (mut lo, mut hi) = (-bound, bound);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if balance(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lambda = 0.5 * (lo + hi);
        v.iter().zip(&self.y).map(|(vi, yi)| clip(vi - lambda * yi)).collect()
    }

    fn lipschitz(&self) -> f64 {
        // Power iteration on Q (positive semi-definite).
        let n = self.y.len();
        let mut v = vec![1.0; n];
        let mut eig = 1.0;
        for _ in 0..500 {
            let w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| self.q[i][j] * v[j]).sum()).collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 1.0;
            }
            eig = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v = w.iter().map(|x| x / norm).collect();
        }
        eig.max(1e-9) * 1.01
    }

    /// Returns the maximizing alphas and the objective value.
    pub fn solve(&self, iterations: usize) -> (Vec<f64>, f64) {
        let n = self.y.len();
        let step = 1.0 / self.lipschitz();
        let mut a = vec![0.0; n];
        let mut z = a.clone();
        let mut t = 1.0f64;
        for _ in 0..iterations {
            let g = self.gradient(&z);
            let next = self.project(&z.iter().zip(&g).map(|(zi, gi)| zi + step * gi).collect::<Vec<_>>());
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let momentum = (t - 1.0) / t_next;
            z = next.iter().zip(&a).map(|(n, p)| n + momentum * (n - p)).collect();
            // Restart when the objective drops.
            if self.objective(&next) < self.objective(&a) {
                z = next.clone();
                t = 1.0;
            } else {
                t = t_next;
            }
            let moved = next.iter().zip(&a).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            a = next;
            if moved < 1e-13 {
                break;
            }
        }
        let value = self.objective(&a);
        (a, value)
    }
}
