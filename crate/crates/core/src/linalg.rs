//! Thin wrappers over nalgebra decompositions with the conventions used across the crate:
//! singular values sorted descending, symmetric eigenvalues sorted ascending.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Thin singular value decomposition `a = u * diag(s) * vt`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub vt: DMatrix<f64>,
}

pub fn svd(a: &DMatrix<f64>) -> Svd {
    let k = a.nrows().min(a.ncols());
    if k == 0 {
        return Svd { u: DMatrix::zeros(a.nrows(), 0), s: Vec::new(), vt: DMatrix::zeros(0, a.ncols()) };
    }
    let dec = a.clone().svd(true, true);
    let u = dec.u.expect("requested u");
    let vt = dec.v_t.expect("requested v_t");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| dec.singular_values[j].total_cmp(&dec.singular_values[i]));
    let s = order.iter().map(|&i| dec.singular_values[i]).collect();
    let u = DMatrix::from_fn(a.nrows(), k, |r, c| u[(r, order[c])]);
    let vt = DMatrix::from_fn(k, a.ncols(), |r, c| vt[(order[r], c)]);
    Svd { u, s, vt }
}

/// Thin QR: `q` is `m x min(m, n)` with orthonormal columns, `r` is `min(m, n) x n`.
pub fn qr_thin(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let dec = a.clone().qr();
    (dec.q(), dec.r())
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending, eigenvectors as columns.
pub fn sym_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let sym = (a + a.transpose()) * 0.5;
    let dec = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| dec.eigenvalues[i].total_cmp(&dec.eigenvalues[j]));
    let values = order.iter().map(|&i| dec.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| dec.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Minimum-norm least-squares solution of `a x = b` via the SVD.
///
/// Singular values below `rcond * s_max` are treated as zero. Returns the solution and
/// the numerical rank.
pub fn lstsq_min_norm(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> (DVector<f64>, usize) {
    let dec = svd(a);
    let smax = dec.s.first().copied().unwrap_or(0.0);
    let mut x = DVector::zeros(a.ncols());
    let mut rank = 0;
    for (k, &sk) in dec.s.iter().enumerate() {
        if sk <= rcond * smax || sk == 0.0 {
            break;
        }
        rank += 1;
        let coef = dec.u.column(k).dot(b) / sk;
        x += dec.vt.row(k).transpose() * coef;
    }
    (x, rank)
}

/// Least squares via Householder QR. Returns `None` when `a` has fewer rows than columns or
/// its `R` factor is numerically singular relative to `rcond`.
pub fn lstsq_qr(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> Option<DVector<f64>> {
    if a.nrows() < a.ncols() {
        return None;
    }
    let (q, r) = qr_thin(a);
    let diag_max = (0..r.ncols()).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if diag_max == 0.0 || (0..r.ncols()).any(|i| r[(i, i)].abs() <= rcond * diag_max) {
        return None;
    }
    let qtb = q.transpose() * b;
    r.solve_upper_triangular(&qtb)
}

/// Extends the orthonormal columns of `u` by `extra` random orthonormal columns.
///
/// Fails (returns fewer columns) only when the ambient dimension is exhausted.
pub fn extend_orthonormal<R: Rng + ?Sized>(u: &DMatrix<f64>, extra: usize, rng: &mut R) -> DMatrix<f64> {
    let n = u.nrows();
    let mut cols: Vec<DVector<f64>> = (0..u.ncols()).map(|c| u.column(c).into_owned()).collect();
    let target = (u.ncols() + extra).min(n);
    let mut attempts = 0;
    while cols.len() < target && attempts < 32 * (extra + 1) {
        attempts += 1;
        let mut v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        // two passes of Gram-Schmidt
        for _ in 0..2 {
            for c in &cols {
                let p = c.dot(&v);
                v.axpy(-p, c, 1.0);
            }
        }
        let nv = v.norm();
        if nv > 1e-8 {
            cols.push(v / nv);
        }
    }
    DMatrix::from_columns(&cols)
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn svd_is_sorted_and_reconstructs() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 7.0]);
        let d = svd(&a);
        assert!(d.s[0] >= d.s[1]);
        let rec = &d.u * DMatrix::from_diagonal(&DVector::from_vec(d.s.clone())) * &d.vt;
        assert!((rec - a).norm() < 1e-12);
    }

    #[test]
    fn eigen_ascending() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        let (vals, _) = sym_eigen(&a);
        assert_eq!(vals, vec![1.0, 4.0]);
    }

    #[test]
    fn min_norm_solution_of_underdetermined_system() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0]);
        let (x, rank) = lstsq_min_norm(&a, &b, 1e-12);
        assert_eq!(rank, 1);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        assert!(lstsq_qr(&a, &b, 1e-12).is_none());
    }

    #[test]
    fn extension_stays_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = DMatrix::from_column_slice(4, 1, &[1.0, 0.0, 0.0, 0.0]);
        let e = extend_orthonormal(&u, 2, &mut rng);
        assert_eq!(e.ncols(), 3);
        let g = e.transpose() * &e;
        assert!((g - DMatrix::identity(3, 3)).norm() < 1e-12);
    }
}
