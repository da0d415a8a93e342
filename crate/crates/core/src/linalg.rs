//! Dense linear-algebra helpers shared by the realization stages.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex<f64>>;

pub fn sym(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn skew(m: &Mat) -> Mat {
    (m - m.transpose()) * 0.5
}

pub fn fro(m: &Mat) -> f64 {
    m.norm()
}

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|x| Complex::new(x, 0.0))
}

fn to_faer<T: Copy>(m: &DMatrix<T>) -> faer::Mat<T> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> Mat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Singular value decomposition with descending singular values and
/// square orthogonal factors: `m = u * diag(s) * v^T` with `u` r×r, `v` c×c
/// and `s` of length min(r, c).
pub struct FullSvd {
    pub u: Mat,
    pub s: Vec<f64>,
    pub v: Mat,
}

impl FullSvd {
    pub fn new(m: &Mat) -> Self {
        let (r, c) = m.shape();
        let k = r.min(c);
        if k == 0 {
            return FullSvd {
                u: Mat::identity(r, r),
                s: Vec::new(),
                v: Mat::identity(c, c),
            };
        }
        match to_faer(m).svd() {
            Ok(svd) => {
                let s: Vec<f64> = (0..k).map(|i| svd.S()[i]).collect();
                FullSvd {
                    u: from_faer(svd.U()),
                    s,
                    v: from_faer(svd.V()),
                }
            }
            Err(_) => Self::fallback(m),
        }
    }

    fn fallback(m: &Mat) -> Self {
        let (r, c) = m.shape();
        let k = r.min(c);
        let svd = m.clone().svd(true, true);
        let u = svd.u.expect("u requested");
        let vt = svd.v_t.expect("v requested");
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let s: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
        let mut u_thin = Mat::zeros(r, k);
        let mut v_thin = Mat::zeros(c, k);
        for (dst, &src) in order.iter().enumerate() {
            u_thin.set_column(dst, &u.column(src));
            v_thin.set_column(dst, &vt.row(src).transpose());
        }
        FullSvd {
            u: complete_basis(&u_thin),
            s,
            v: complete_basis(&v_thin),
        }
    }

    pub fn max(&self) -> f64 {
        self.s.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.s.last().copied().unwrap_or(0.0)
    }

    pub fn rank(&self, threshold: f64) -> usize {
        self.s.iter().filter(|&&x| x > threshold).count()
    }
}

/// Extends orthonormal columns `q` (r×k) to a square orthogonal matrix whose
/// first k columns are exactly `q`.
pub fn complete_basis(q: &Mat) -> Mat {
    let (r, k) = q.shape();
    if k >= r {
        return q.columns(0, r).into_owned();
    }
    let mut aug = Mat::zeros(r, k + r);
    aug.view_mut((0, 0), (r, k)).copy_from(q);
    aug.view_mut((0, k), (r, r)).fill_with_identity();
    let full = aug.qr().q();
    let mut out = Mat::zeros(r, r);
    out.view_mut((0, 0), (r, k)).copy_from(q);
    // Gram-Schmidt order: columns k.. of the QR factor are orthogonal to q.
    out.view_mut((0, k), (r, r - k))
        .copy_from(&full.columns(k, r - k));
    out
}

/// Singular values in descending order.
pub fn svd_values(m: &Mat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s = to_faer(m)
        .singular_values()
        .unwrap_or_else(|_| m.clone().singular_values().iter().copied().collect());
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Singular values of a complex matrix in descending order.
pub fn csvd_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s = to_faer(m)
        .singular_values()
        .unwrap_or_else(|_| m.clone().singular_values().iter().copied().collect());
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Spectral norm.
pub fn norm2(m: &Mat) -> f64 {
    svd_values(m).first().copied().unwrap_or(0.0)
}

pub fn cnorm2(m: &CMat) -> f64 {
    csvd_values(m).first().copied().unwrap_or(0.0)
}

/// 2-norm condition number; infinite for singular or empty-rank matrices.
pub fn cond2(m: &Mat) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let s = svd_values(m);
    let smin = *s.last().unwrap();
    if smin == 0.0 {
        f64::INFINITY
    } else {
        s[0] / smin
    }
}

/// Eigen-decomposition of the symmetric part, eigenvalues ascending.
pub fn sym_eigen(m: &Mat) -> (Vec<f64>, Mat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), Mat::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(sym(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Smallest eigenvalue of the symmetric part; `+inf` for an empty matrix.
pub fn min_eig_sym(m: &Mat) -> f64 {
    sym_eigen(m).0.first().copied().unwrap_or(f64::INFINITY)
}

pub fn max_eig_sym(m: &Mat) -> f64 {
    sym_eigen(m).0.last().copied().unwrap_or(f64::NEG_INFINITY)
}

/// Frobenius-nearest positive semidefinite matrix to the symmetric part of `m`.
pub fn project_psd(m: &Mat) -> Mat {
    let n = m.nrows();
    if n == 0 {
        return m.clone();
    }
    let (vals, vecs) = sym_eigen(m);
    let clipped = DVector::from_iterator(n, vals.iter().map(|&x| x.max(0.0)));
    let scaled = &vecs * Mat::from_diagonal(&clipped);
    sym(&(scaled * vecs.transpose()))
}

/// Factor `F` with `F F^T = m` for a symmetric PSD `m` (negative eigenvalues
/// are clipped).
pub fn psd_factor(m: &Mat) -> Mat {
    let n = m.nrows();
    if n == 0 {
        return m.clone();
    }
    let (vals, vecs) = sym_eigen(m);
    let roots = DVector::from_iterator(n, vals.iter().map(|&x| x.max(0.0).sqrt()));
    vecs * Mat::from_diagonal(&roots)
}

/// Symmetric square root of a symmetric PSD matrix.
pub fn sqrtm_psd(m: &Mat) -> Mat {
    let n = m.nrows();
    if n == 0 {
        return m.clone();
    }
    let (vals, vecs) = sym_eigen(m);
    let roots = DVector::from_iterator(n, vals.iter().map(|&x| x.max(0.0).sqrt()));
    sym(&(&vecs * Mat::from_diagonal(&roots) * vecs.transpose()))
}

/// Eigenvalues of a general real matrix.
pub fn eigenvalues(m: &Mat) -> Vec<Complex<f64>> {
    if m.is_empty() {
        return Vec::new();
    }
    m.complex_eigenvalues().iter().copied().collect()
}

pub fn spectral_abscissa(m: &Mat) -> f64 {
    eigenvalues(m)
        .iter()
        .fold(f64::NEG_INFINITY, |acc, z| acc.max(z.re))
}

/// Solves `a x = b` by LU with partial pivoting; returns the solution and the
/// ratio of extreme pivot magnitudes as a cheap condition estimate.
pub fn csolve(a: &CMat, b: &CMat) -> (Option<CMat>, f64) {
    let n = a.nrows();
    if n == 0 {
        return (Some(CMat::zeros(0, b.ncols())), 1.0);
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let mut pmax = 0.0_f64;
    let mut pmin = f64::INFINITY;
    for i in 0..n {
        let p = u[(i, i)].norm();
        pmax = pmax.max(p);
        pmin = pmin.min(p);
    }
    let cond = if pmin == 0.0 { f64::INFINITY } else { pmax / pmin };
    (lu.solve(b), cond)
}

pub fn inverse(m: &Mat) -> Option<Mat> {
    if m.is_empty() {
        return Some(m.clone());
    }
    m.clone().try_inverse()
}

/// Least-squares solution of `a x = b` through the SVD with the given
/// relative singular value cutoff.
pub fn lstsq(a: &Mat, b: &Mat, rel_cut: f64) -> Mat {
    let svd = FullSvd::new(a);
    let (r, c) = a.shape();
    let thr = rel_cut * svd.max();
    let mut x = Mat::zeros(c, b.ncols());
    let utb = svd.u.transpose() * b;
    for (i, &s) in svd.s.iter().enumerate() {
        if s > thr && i < r {
            let row = utb.row(i) / s;
            for j in 0..c {
                let vij = svd.v[(j, i)];
                for k in 0..b.ncols() {
                    x[(j, k)] += vij * row[k];
                }
            }
        }
    }
    x
}

/// Assembles a 2×2 block matrix.
pub fn block2(a11: &Mat, a12: &Mat, a21: &Mat, a22: &Mat) -> Mat {
    let (r1, c1) = a11.shape();
    let (r2, c2) = a22.shape();
    let mut out = Mat::zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(a11);
    out.view_mut((0, c1), (r1, c2)).copy_from(a12);
    out.view_mut((r1, 0), (r2, c1)).copy_from(a21);
    out.view_mut((r1, c1), (r2, c2)).copy_from(a22);
    out
}

pub fn vstack(top: &Mat, bottom: &Mat) -> Mat {
    let c = top.ncols().max(bottom.ncols());
    let mut out = Mat::zeros(top.nrows() + bottom.nrows(), c);
    out.view_mut((0, 0), top.shape()).copy_from(top);
    out.view_mut((top.nrows(), 0), bottom.shape())
        .copy_from(bottom);
    out
}

pub fn hstack(left: &Mat, right: &Mat) -> Mat {
    let r = left.nrows().max(right.nrows());
    let mut out = Mat::zeros(r, left.ncols() + right.ncols());
    out.view_mut((0, 0), left.shape()).copy_from(left);
    out.view_mut((0, left.ncols()), right.shape())
        .copy_from(right);
    out
}

/// Relative rank threshold: `n · rank_tol · scale`.
pub fn rank_threshold(n: usize, rank_tol: f64, scale: f64) -> f64 {
    n.max(1) as f64 * rank_tol * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn full_svd_is_orthogonal_and_reconstructs() {
        let m = Mat::from_row_slice(4, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.5]);
        let svd = FullSvd::new(&m);
        assert_eq!(svd.u.shape(), (4, 4));
        assert_eq!(svd.v.shape(), (2, 2));
        let eye = &svd.u.transpose() * &svd.u;
        assert_abs_diff_eq!(eye, Mat::identity(4, 4), epsilon = 1e-12);
        let mut sig = Mat::zeros(4, 2);
        sig[(0, 0)] = svd.s[0];
        sig[(1, 1)] = svd.s[1];
        assert!(svd.s[0] >= svd.s[1]);
        assert_abs_diff_eq!(&svd.u * sig * svd.v.transpose(), m, epsilon = 1e-12);
    }

    #[test]
    fn complete_basis_keeps_leading_columns() {
        let q = Mat::from_column_slice(3, 1, &[0.0, 0.6, 0.8]);
        let full = complete_basis(&q);
        assert_abs_diff_eq!(full.column(0).into_owned(), q.column(0).into_owned());
        assert_abs_diff_eq!(full.transpose() * &full, Mat::identity(3, 3), epsilon = 1e-12);
    }

    #[test]
    fn psd_projection_clips() {
        let m = Mat::from_diagonal(&DVector::from_vec(vec![2.0, -1.0]));
        assert_abs_diff_eq!(
            project_psd(&m),
            Mat::from_diagonal(&DVector::from_vec(vec![2.0, 0.0])),
            epsilon = 1e-14
        );
    }

    #[test]
    fn lstsq_matches_exact_solve() {
        let a = Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let x = Mat::from_row_slice(2, 1, &[2.0, -1.0]);
        let b = &a * &x;
        assert_abs_diff_eq!(lstsq(&a, &b, 1e-14), x, epsilon = 1e-12);
    }
}
