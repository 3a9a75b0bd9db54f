//! Dense least-squares helpers on top of nalgebra's column-pivoted QR.
//!
//! Rank is decided from the singular values of the triangular factor with the
//! tolerance `eps * max(n, p) * sigma_max`.

use nalgebra::{DMatrix, DVector};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Column-pivoted QR of a tall matrix together with its rank diagnostics.
pub struct PivotedQr {
    q: Mat,
    r: Mat,
    /// `order[i]` is the original column sitting at pivot position `i`.
    order: Vec<usize>,
    singular_values: Vec<f64>,
    tol: f64,
    nrows: usize,
}

impl PivotedQr {
    pub fn new(x: &Mat) -> Self {
        let (n, p) = x.shape();
        if p == 0 {
            return PivotedQr {
                q: Mat::zeros(n, 0),
                r: Mat::zeros(0, 0),
                order: Vec::new(),
                singular_values: Vec::new(),
                tol: 0.0,
                nrows: n,
            };
        }
        let qr = x.clone().col_piv_qr();
        let mut idx = Mat::from_fn(1, p, |_, j| j as f64);
        qr.p().permute_columns(&mut idx);
        let order = idx.iter().map(|v| *v as usize).collect();
        let q = qr.q();
        let r = qr.r();
        let mut singular_values: Vec<f64> = r.clone().svd(false, false).singular_values.iter().copied().collect();
        singular_values.sort_by(|a, b| b.total_cmp(a));
        let smax = singular_values.first().copied().unwrap_or(0.0);
        let tol = f64::EPSILON * n.max(p) as f64 * smax;
        PivotedQr { q, r, order, singular_values, tol, nrows: n }
    }

    pub fn ncols(&self) -> usize {
        self.order.len()
    }

    pub fn rank(&self) -> usize {
        self.singular_values.iter().filter(|s| **s > self.tol).count()
    }

    pub fn is_full_rank(&self) -> bool {
        self.ncols() <= self.nrows && self.rank() == self.ncols()
    }

    /// Ratio of extreme singular values (infinite when rank deficient).
    pub fn condition_number(&self) -> f64 {
        match (self.singular_values.first(), self.singular_values.last()) {
            (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
            (Some(_), Some(_)) => f64::INFINITY,
            _ => 1.0,
        }
    }

    /// Original index of the first pivot column whose diagonal entry of `R`
    /// falls below the rank tolerance, if any.
    pub fn first_deficient_column(&self) -> Option<usize> {
        if self.is_full_rank() {
            return None;
        }
        let k = self.r.nrows().min(self.r.ncols());
        for i in 0..k {
            if self.r[(i, i)].abs() <= self.tol {
                return Some(self.order[i]);
            }
        }
        // More columns than rows, or the deficiency only shows in the singular values.
        self.order.get(k.min(self.order.len().saturating_sub(1))).copied()
    }

    /// Least-squares coefficients for every column of `b`. Assumes full column rank.
    pub fn solve(&self, b: &Mat) -> Option<Mat> {
        let p = self.ncols();
        if p == 0 {
            return Some(Mat::zeros(0, b.ncols()));
        }
        let c = self.q.tr_mul(b);
        let z = self.r.rows(0, p).into_owned().solve_upper_triangular(&c.rows(0, p).into_owned())?;
        let mut out = Mat::zeros(p, b.ncols());
        for (i, &col) in self.order.iter().enumerate() {
            out.set_row(col, &z.row(i));
        }
        Some(out)
    }

    /// `b - X * coef`, the least-squares residuals of `b` on the columns of X.
    pub fn residuals(&self, b: &Mat) -> Option<Mat> {
        if self.ncols() == 0 {
            return Some(b.clone());
        }
        let c = self.q.tr_mul(b);
        Some(b - &self.q * c)
    }
}

/// Condition number of a square matrix from its singular values.
pub fn condition_number(a: &Mat) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let hi = sv.max();
    let lo = sv.min();
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Solves `a x = b` for square `a` by LU with full pivoting.
pub fn solve_square(a: &Mat, b: &Vector) -> Option<Vector> {
    a.clone().full_piv_lu().solve(b)
}

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix plus its numerical rank.
pub fn pinv_symmetric(a: &Mat) -> (Mat, usize) {
    let n = a.nrows();
    if n == 0 {
        return (Mat::zeros(0, 0), 0);
    }
    let eig = a.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = f64::EPSILON * n as f64 * max;
    let mut out = Mat::zeros(n, n);
    let mut rank = 0;
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > tol && lambda > 0.0 {
            rank += 1;
            let v = eig.eigenvectors.column(i);
            out += (v * v.transpose()) / lambda;
        }
    }
    (out, rank)
}

pub fn max_abs(v: &Vector) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}
