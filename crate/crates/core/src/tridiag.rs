//! Symmetric tridiagonal matrices stored by diagonals, with a Thomas solve.

use serde::{Deserialize, Serialize};

/// Symmetric tridiagonal matrix: `diag` has length n, `off` has length n-1
/// and holds both the sub- and super-diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(
            diag.is_empty() && off.is_empty() || off.len() + 1 == diag.len(),
            "off-diagonal must have n-1 entries"
        );
        SymTridiag { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(x.len(), n);
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, xi)| d * xi).collect();
        for i in 0..n.saturating_sub(1) {
            y[i] += self.off[i] * x[i + 1];
            y[i + 1] += self.off[i] * x[i];
        }
        y
    }

    /// Returns A + s I.
    pub fn shifted(&self, s: f64) -> SymTridiag {
        SymTridiag {
            diag: self.diag.iter().map(|d| d + s).collect(),
            off: self.off.clone(),
        }
    }

    /// Solve A x = rhs by elimination without pivoting. Returns `None` when a
    /// pivot is not strictly positive (the matrix is not SPD).
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        solve_sym(&self.diag, &self.off, rhs)
    }

    /// Dense copy, for tests and small debugging dumps.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] = self.diag[i];
            if i + 1 < n {
                m[i][i + 1] = self.off[i];
                m[i + 1][i] = self.off[i];
            }
        }
        m
    }
}

/// Thomas algorithm for a symmetric tridiagonal system.
pub fn solve_sym(diag: &[f64], off: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    assert_eq!(rhs.len(), n);
    if n == 0 {
        return Some(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut pivot = diag[0];
    if !(pivot > 0.0) {
        return None;
    }
    x[0] = rhs[0] / pivot;
    for i in 1..n {
        c[i - 1] = off[i - 1] / pivot;
        pivot = diag[i] - off[i - 1] * c[i - 1];
        if !(pivot > 0.0) {
            return None;
        }
        x[i] = (rhs[i] - off[i - 1] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn solves_laplacian() {
        let a = SymTridiag::new(vec![2.0; 4], vec![-1.0; 3]);
        let x = a.solve(&[1.0, 0.0, 0.0, 1.0]).unwrap();
        for xi in x {
            assert!((xi - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let a = SymTridiag::new(vec![1.0, 1.0], vec![2.0]);
        assert!(a.solve(&[1.0, 1.0]).is_none());
    }

    proptest! {
        #[test]
        fn residual_small_for_dominant_systems(
            n in 1usize..40,
            seed in proptest::collection::vec(0.05f64..5.0, 80),
            rhs in proptest::collection::vec(-1.0f64..1.0, 40),
        ) {
            let off: Vec<f64> = (0..n.saturating_sub(1)).map(|i| -seed[i]).collect();
            let diag: Vec<f64> = (0..n)
                .map(|i| {
                    let l = if i > 0 { seed[i - 1] } else { 0.0 };
                    let r = if i + 1 < n { seed[i] } else { 0.0 };
                    l + r + seed[40 + i]
                })
                .collect();
            let a = SymTridiag::new(diag, off);
            let b = &rhs[..n];
            let x = a.solve(b).unwrap();
            let r = a.mul_vec(&x);
            for (ri, bi) in r.iter().zip(b) {
                prop_assert!((ri - bi).abs() < 1e-10);
            }
        }
    }
}
