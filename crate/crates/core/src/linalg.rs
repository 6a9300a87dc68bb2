//! Symmetric tridiagonal matrices: products, direct solves and Sturm counts.

/// Symmetric tridiagonal matrix; `off[i]` couples rows `i` and `i + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(
            diag.len(),
            off.len() + 1,
            "off-diagonal length must be n - 1"
        );
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.off[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// `self + mu * other`.
    pub fn add_scaled(&self, other: &SymTridiag, mu: f64) -> SymTridiag {
        SymTridiag::new(
            self.diag
                .iter()
                .zip(&other.diag)
                .map(|(a, b)| a + mu * b)
                .collect(),
            self.off
                .iter()
                .zip(&other.off)
                .map(|(a, b)| a + mu * b)
                .collect(),
        )
    }

    /// Solves `A x = b` by `LDL^T` elimination. Returns `None` on a zero pivot.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        self.eliminate(b, false)
    }

    /// Like [`solve`](Self::solve) but returns `None` unless every pivot is
    /// positive, i.e. unless the matrix is positive definite.
    pub fn solve_spd(&self, b: &[f64]) -> Option<Vec<f64>> {
        self.eliminate(b, true)
    }

    fn eliminate(&self, b: &[f64], require_pd: bool) -> Option<Vec<f64>> {
        let n = self.len();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        let mut z = vec![0.0; n];
        for i in 0..n {
            let mut di = self.diag[i];
            let mut zi = b[i];
            if i > 0 {
                di -= l[i - 1] * self.off[i - 1];
                zi -= l[i - 1] * z[i - 1];
            }
            if di == 0.0 || !di.is_finite() || (require_pd && di <= 0.0) {
                return None;
            }
            d[i] = di;
            z[i] = zi;
            if i + 1 < n {
                l[i] = self.off[i] / di;
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            x[i] = z[i] / d[i];
            if i + 1 < n {
                x[i] -= l[i] * x[i + 1];
            }
        }
        Some(x)
    }

    /// Number of eigenvalues strictly below `lambda` (Sturm sequence count).
    pub fn count_below(&self, lambda: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.len() {
            let c = if i > 0 {
                self.off[i - 1] * self.off[i - 1]
            } else {
                0.0
            };
            q = self.diag[i] - lambda - if i > 0 { c / q } else { 0.0 };
            if q == 0.0 {
                q = -f64::EPSILON * (self.diag[i].abs() + lambda.abs() + 1.0);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Smallest eigenvalue by bisection on the Sturm count.
    pub fn smallest_eigenvalue(&self, tol: f64) -> f64 {
        let n = self.len();
        let radius = (0..n)
            .map(|i| {
                let mut r = 0.0;
                if i > 0 {
                    r += self.off[i - 1].abs();
                }
                if i + 1 < n {
                    r += self.off[i].abs();
                }
                r
            })
            .collect::<Vec<_>>();
        let mut lo = (0..n)
            .map(|i| self.diag[i] - radius[i])
            .fold(f64::INFINITY, f64::min);
        let mut hi = (0..n)
            .map(|i| self.diag[i] + radius[i])
            .fold(f64::NEG_INFINITY, f64::max);
        while hi - lo > tol * (1.0 + lo.abs().min(hi.abs())) {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymTridiag {
        SymTridiag::new(vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn solve_round_trip() {
        let a = laplacian(7).add_scaled(&SymTridiag::new(vec![1.0; 7], vec![0.0; 6]), 0.3);
        let x: Vec<f64> = (0..7).map(|i| (i as f64).sin()).collect();
        let b = a.apply(&x);
        let y = a.solve_spd(&b).unwrap();
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-13);
        }
        let indefinite =
            laplacian(7).add_scaled(&SymTridiag::new(vec![1.0; 7], vec![0.0; 6]), -1.3);
        assert!(indefinite.solve_spd(&b).is_none());
        assert!(indefinite.solve(&b).is_some());
    }

    #[test]
    fn laplacian_spectrum() {
        // eigenvalues 2 - 2 cos(k pi / (n + 1))
        let n = 50;
        let a = laplacian(n);
        let exact = 2.0 - 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        assert!((a.smallest_eigenvalue(1e-14) - exact).abs() < 1e-12);
        assert_eq!(a.count_below(4.0 + 1e-9), n);
        assert_eq!(a.count_below(0.0), 0);
    }
}
