//! Small dense linear algebra on evaluated matrices.

use nalgebra::{DMatrix, DVector};

/// Numerical rank with relative threshold `rtol` on the singular values.
pub fn rank(m: &DMatrix<f64>, rtol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > rtol * top).count()
}

/// Orthonormal basis (as columns) of the column space.
pub fn column_space(m: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let r = rank(m, rtol);
    let svd = m.clone().svd(true, false);
    let u = svd.u.unwrap();
    let order = sorted_order(&svd.singular_values);
    let mut out = DMatrix::zeros(m.nrows(), r);
    for (k, &i) in order[..r].iter().enumerate() {
        out.set_column(k, &u.column(i));
    }
    out
}

/// Orthonormal basis (as columns) of the kernel.
pub fn null_space(m: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let d = m.ncols();
    let r = rank(m, rtol);
    // pad to square so the SVD returns a full V
    let mut sq = DMatrix::zeros(d.max(m.nrows()), d);
    sq.rows_mut(0, m.nrows()).copy_from(m);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.unwrap();
    let order = sorted_order(&svd.singular_values);
    let mut out = DMatrix::zeros(d, d - r);
    for (k, &i) in order[r..].iter().enumerate() {
        out.set_column(k, &vt.row(i).transpose());
    }
    out
}

fn sorted_order(sv: &DVector<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..sv.len()).collect();
    idx.sort_by(|a, b| sv[*b].total_cmp(&sv[*a]));
    idx
}

/// Frobenius distance between orthogonal projectors onto two subspaces.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let pa = a * a.transpose();
    let pb = b * b.transpose();
    (pa - pb).norm()
}

/// Minimum-norm least-squares solution of `A x = b` and its residual `|A x - b|`.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>, rtol: f64) -> (DVector<f64>, f64) {
    let svd = a.clone().svd(true, true);
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = (rtol * top).max(f64::MIN_POSITIVE);
    let x = svd.solve(b, eps).expect("svd has u and v");
    let res = (a * &x - b).norm();
    (x, res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_and_image() {
        let j1 = DMatrix::from_row_slice(3, 3, &[0., 0., 0., 0., 0., 0., 1., 0., 0.]);
        let j2 = DMatrix::from_row_slice(3, 3, &[0., 0., 0., 1., 0., 0., 0., 2., 0.]);
        assert_eq!(rank(&j1, 1e-12), 1);
        assert_eq!(rank(&j2, 1e-12), 2);
        let k = null_space(&j1, 1e-12);
        assert_eq!(k.ncols(), 2);
        let im = column_space(&j2, 1e-12);
        assert!(subspace_distance(&k, &im) < 1e-12);
        assert!(subspace_distance(&null_space(&j2, 1e-12), &column_space(&j1, 1e-12)) < 1e-12);
    }

    #[test]
    fn min_norm() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let (x, r) = min_norm_solve(&a, &DVector::from_vec(vec![2.0]), 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12 && r < 1e-12);
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let (_, r) = min_norm_solve(&a, &DVector::from_vec(vec![0.0, 1.0]), 1e-12);
        assert!(r > 0.5);
    }
}
