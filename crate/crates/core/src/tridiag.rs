//! Thomas algorithm for tridiagonal systems.

/// Solves `A x = d` for tridiagonal `A` with sub-diagonal `lower`
/// (`lower[i]` couples rows `i+1` and `i`), diagonal `diag` and
/// super-diagonal `upper`. No pivoting; meant for diagonally dominant systems.
pub fn solve(lower: &[f64], diag: &[f64], upper: &[f64], d: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert!(n >= 1 && lower.len() + 1 == n && upper.len() + 1 == n && d.len() == n);
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut denom = diag[0];
    if n > 1 {
        c[0] = upper[0] / denom;
    }
    x[0] = d[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i - 1] * c[i - 1];
        if i < n - 1 {
            c[i] = upper[i] / denom;
        }
        x[i] = (d[i] - lower[i - 1] * x[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

/// A symmetric tridiagonal matrix with constant off-diagonal `-off`, factored
/// once and reused for many right-hand sides.
#[derive(Debug, Clone)]
pub struct FactoredTridiag {
    off: f64,
    // inverse pivots and forward multipliers of the LU factorization
    inv_pivot: Vec<f64>,
    mult: Vec<f64>,
}

impl FactoredTridiag {
    /// `diag` is the main diagonal; the two off-diagonals are both `-off`.
    pub fn new(diag: &[f64], off: f64) -> Self {
        let n = diag.len();
        let mut inv_pivot = vec![0.0; n];
        let mut mult = vec![0.0; n];
        let mut pivot = diag[0];
        inv_pivot[0] = 1.0 / pivot;
        for i in 1..n {
            // l_i = -off / pivot_{i-1}
            mult[i] = -off * inv_pivot[i - 1];
            pivot = diag[i] - mult[i] * (-off);
            inv_pivot[i] = 1.0 / pivot;
        }
        Self {
            off,
            inv_pivot,
            mult,
        }
    }

    pub fn len(&self) -> usize {
        self.inv_pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_pivot.is_empty()
    }

    /// Overwrites `rhs` with the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(rhs.len(), n);
        for i in 1..n {
            rhs[i] -= self.mult[i] * rhs[i - 1];
        }
        rhs[n - 1] *= self.inv_pivot[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = (rhs[i] + self.off * rhs[i + 1]) * self.inv_pivot[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matvec(lower: &[f64], diag: &[f64], upper: &[f64], x: &[f64]) -> Vec<f64> {
        let n = diag.len();
        (0..n)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    #[test]
    fn thomas_recovers_known_solution() {
        let diag = [4.0, 5.0, 3.5, 6.0, 4.5];
        let lower = [1.0, -1.5, 0.5, 2.0];
        let upper = [-1.0, 0.5, 1.5, -2.0];
        let x = [1.0, -2.0, 0.5, 3.0, -1.25];
        let d = matvec(&lower, &diag, &upper, &x);
        let got = solve(&lower, &diag, &upper, &d);
        for (a, b) in got.iter().zip(x.iter()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn factored_matches_thomas() {
        let diag = [3.0, 4.0, 4.0, 4.0, 3.0, 5.0];
        let off = 1.25;
        let f = FactoredTridiag::new(&diag, off);
        let d = [1.0, 0.0, -2.0, 3.0, 0.5, 1.0];
        let lower = vec![-off; 5];
        let want = solve(&lower, &diag, &lower, &d);
        let mut got = d.to_vec();
        f.solve_in_place(&mut got);
        for (a, b) in got.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn single_unknown() {
        assert_eq!(solve(&[], &[2.0], &[], &[3.0]), vec![1.5]);
    }
}
