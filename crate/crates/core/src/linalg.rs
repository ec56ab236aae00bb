//! Thin wrappers over the LAPACK routines the solvers need.
//!
//! All buffers handed to LAPACK are column-major; the returned `Array2`s use
//! Fortran layout and are safe to use with any ndarray operation.

use ndarray::{Array2, ShapeBuilder};
use ndarray_linalg::{EigValsh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

fn check(routine: &'static str, info: i32) -> Result<()> {
    if info == 0 {
        Ok(())
    } else {
        Err(Error::Lapack { routine, info })
    }
}

/// Ascending eigenvalues of a real symmetric matrix (lower triangle is read).
pub fn sym_eigvalsh(a: &Array2<f64>) -> Result<Vec<f64>> {
    if a.is_empty() {
        return Ok(Vec::new());
    }
    Ok(a.eigvalsh(UPLO::Lower)?.to_vec())
}

/// Gershgorin enclosure of a symmetric tridiagonal spectrum.
pub fn gershgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (lo, hi)
}

/// Number of eigenvalues strictly below `x` of the symmetric tridiagonal
/// matrix (`diag`, `off`), by Sylvester inertia of the LDLᵀ pivots.
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let coupling = if i > 0 { off[i - 1] * off[i - 1] / q } else { 0.0 };
        q = diag[i] - x - coupling;
        if q == 0.0 {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// k-th smallest eigenvalue (0-based) of a symmetric tridiagonal matrix by bisection.
pub fn tridiag_kth_eigenvalue(diag: &[f64], off: &[f64], k: usize) -> f64 {
    let (mut lo, mut hi) = gershgorin(diag, off);
    let scale = lo.abs().max(hi.abs()).max(1.0);
    lo -= 1e-12 * scale;
    hi += 1e-12 * scale;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Eigenpairs of a symmetric tridiagonal matrix with eigenvalue in (lower, upper].
/// Eigenvalues ascending; eigenvectors are the columns of the returned matrix.
pub fn tridiag_eig_range(
    diag: &[f64],
    off: &[f64],
    lower: f64,
    upper: f64,
    vectors: bool,
) -> Result<(Vec<f64>, Option<Array2<f64>>)> {
    let n = diag.len();
    if n == 0 {
        return Ok((Vec::new(), vectors.then(|| Array2::zeros((0, 0)))));
    }
    if upper <= lower {
        return Ok((Vec::new(), vectors.then(|| Array2::zeros((n, 0)))));
    }
    let expected = sturm_count(diag, off, upper) - sturm_count(diag, off, lower).min(n);
    let cols = (expected + 8).min(n).max(1);
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    let mut m = 0i32;
    let mut w = vec![0.0; n];
    let mut z = if vectors { vec![0.0; n * cols] } else { vec![0.0; 1] };
    let ldz = if vectors { n as i32 } else { 1 };
    let mut isuppz = vec![0i32; 2 * n];
    let lwork = (20 * n).max(1);
    let liwork = (10 * n).max(1);
    let mut work = vec![0.0; lwork];
    let mut iwork = vec![0i32; liwork];
    let mut info = 0;
    let jobz = if vectors { b'V' } else { b'N' };
    unsafe {
        lapack::dstevr(
            jobz, b'V', n as i32, &mut d, &mut e, lower, upper, 0, 0, 0.0, &mut m, &mut w, &mut z, ldz,
            &mut isuppz, &mut work, lwork as i32, &mut iwork, liwork as i32, &mut info,
        );
    }
    check("dstevr", info)?;
    let m = m as usize;
    if m > cols {
        return Err(Error::Lapack { routine: "dstevr", info: -100 });
    }
    w.truncate(m);
    let vecs = if vectors {
        z.truncate(n * m);
        Some(Array2::from_shape_vec((n, m).f(), z).expect("dstevr buffer shape"))
    } else {
        None
    };
    Ok((w, vecs))
}

/// Eigenpairs of a dense real symmetric matrix with eigenvalue in (lower, upper].
pub fn sym_eig_range(a: &Array2<f64>, lower: f64, upper: f64) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Shape(format!("expected square matrix, got {:?}", a.dim())));
    }
    if n == 0 || upper <= lower {
        return Ok((Vec::new(), Array2::zeros((n, 0))));
    }
    let mut buf: Vec<f64> = a.t().iter().copied().collect();
    let mut m = 0i32;
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n * n];
    let mut isuppz = vec![0i32; 2 * n];
    let mut info = 0;
    let mut wq = [0.0f64];
    let mut iwq = [0i32];
    unsafe {
        lapack::dsyevr(
            b'V', b'V', b'L', n as i32, &mut buf, n as i32, lower, upper, 0, 0, 0.0, &mut m, &mut w, &mut z,
            n as i32, &mut isuppz, &mut wq, -1, &mut iwq, -1, &mut info,
        );
    }
    check("dsyevr", info)?;
    let lwork = wq[0] as usize;
    let liwork = iwq[0] as usize;
    let mut work = vec![0.0; lwork];
    let mut iwork = vec![0i32; liwork];
    unsafe {
        lapack::dsyevr(
            b'V', b'V', b'L', n as i32, &mut buf, n as i32, lower, upper, 0, 0, 0.0, &mut m, &mut w, &mut z,
            n as i32, &mut isuppz, &mut work, lwork as i32, &mut iwork, liwork as i32, &mut info,
        );
    }
    check("dsyevr", info)?;
    let m = m as usize;
    w.truncate(m);
    z.truncate(n * m);
    Ok((w, Array2::from_shape_vec((n, m).f(), z).expect("dsyevr buffer shape")))
}

/// Unitary reduction K = Q T Qᴴ of a Hermitian matrix to real symmetric tridiagonal T.
#[derive(Debug, Clone)]
pub struct HermitianTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    pub q: Array2<C64>,
}

impl HermitianTridiagonal {
    pub fn new(k: &Array2<C64>) -> Result<Self> {
        let n = k.nrows();
        if k.ncols() != n {
            return Err(Error::Shape(format!("expected square matrix, got {:?}", k.dim())));
        }
        if n == 0 {
            return Ok(Self { diag: vec![], off: vec![], q: Array2::zeros((0, 0)) });
        }
        // Standard layout of Kᵀ is the column-major buffer of K.
        let mut a: Vec<C64> = k.t().iter().copied().collect();
        let mut d = vec![0.0; n];
        let mut e = vec![0.0; n.saturating_sub(1).max(1)];
        let mut tau = vec![C64::new(0.0, 0.0); n.saturating_sub(1).max(1)];
        let mut info = 0;
        let mut wq = [C64::new(0.0, 0.0)];
        unsafe {
            lapack::zhetrd(b'L', n as i32, &mut a, n as i32, &mut d, &mut e, &mut tau, &mut wq, -1, &mut info);
        }
        check("zhetrd", info)?;
        let lwork = (wq[0].re as usize).max(1);
        let mut work = vec![C64::new(0.0, 0.0); lwork];
        unsafe {
            lapack::zhetrd(
                b'L', n as i32, &mut a, n as i32, &mut d, &mut e, &mut tau, &mut work, lwork as i32, &mut info,
            );
        }
        check("zhetrd", info)?;
        unsafe {
            lapack::zungtr(b'L', n as i32, &mut a, n as i32, &tau, &mut wq, -1, &mut info);
        }
        check("zungtr", info)?;
        let lwork = (wq[0].re as usize).max(1);
        let mut work = vec![C64::new(0.0, 0.0); lwork];
        unsafe {
            lapack::zungtr(b'L', n as i32, &mut a, n as i32, &tau, &mut work, lwork as i32, &mut info);
        }
        check("zungtr", info)?;
        e.truncate(n - 1);
        let q = Array2::from_shape_vec((n, n).f(), a).expect("zungtr buffer shape");
        Ok(Self { diag: d, off: e, q })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }
}

/// Solves (T − z) X = B in place for real symmetric tridiagonal T.
/// `b` is column-major with `nrhs` columns of length `diag.len()`.
pub fn tridiag_shifted_solve(diag: &[f64], off: &[f64], z: C64, b: &mut [C64], nrhs: usize) -> Result<()> {
    let n = diag.len();
    debug_assert_eq!(b.len(), n * nrhs);
    let mut dl: Vec<C64> = off.iter().map(|&v| C64::new(v, 0.0)).collect();
    let mut du = dl.clone();
    let mut d: Vec<C64> = diag.iter().map(|&v| C64::new(v, 0.0) - z).collect();
    if dl.is_empty() {
        dl.push(C64::new(0.0, 0.0));
        du.push(C64::new(0.0, 0.0));
    }
    let mut info = 0;
    unsafe {
        lapack::zgtsv(n as i32, nrhs as i32, &mut dl, &mut d, &mut du, b, n as i32, &mut info);
    }
    check("zgtsv", info)
}

/// Solves A X = B for dense complex A; returns X.
pub fn dense_solve(a: &Array2<C64>, b: &Array2<C64>) -> Result<Array2<C64>> {
    let n = a.nrows();
    let nrhs = b.ncols();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::Shape(format!("solve {:?} with rhs {:?}", a.dim(), b.dim())));
    }
    let mut abuf: Vec<C64> = a.t().iter().copied().collect();
    let mut bbuf: Vec<C64> = b.t().iter().copied().collect();
    let mut ipiv = vec![0i32; n];
    let mut info = 0;
    unsafe {
        lapack::zgesv(n as i32, nrhs as i32, &mut abuf, n as i32, &mut ipiv, &mut bbuf, n as i32, &mut info);
    }
    check("zgesv", info)?;
    Ok(Array2::from_shape_vec((n, nrhs).f(), bbuf).expect("zgesv buffer shape"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn laplacian(n: usize) -> (Vec<f64>, Vec<f64>) {
        (vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn sturm_count_matches_closed_form_dirichlet_spectrum() {
        let n = 50;
        let (d, e) = laplacian(n);
        let exact: Vec<f64> =
            (1..=n).map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos()).collect();
        for x in [0.1, 1.01, 2.0 + 1e-3, 3.9] {
            let want = exact.iter().filter(|&&l| l < x).count();
            assert_eq!(sturm_count(&d, &e, x), want, "x={x}");
        }
        let k7 = tridiag_kth_eigenvalue(&d, &e, 7);
        assert!((k7 - exact[7]).abs() < 1e-12);
    }

    #[test]
    fn stevr_range_returns_orthonormal_vectors() {
        let (d, e) = laplacian(40);
        let (w, v) = tridiag_eig_range(&d, &e, -1.0, 1.0, true).unwrap();
        let v = v.unwrap();
        assert_eq!(w.len(), sturm_count(&d, &e, 1.0));
        let gram = v.t().dot(&v);
        for i in 0..w.len() {
            for j in 0..w.len() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn syevr_matches_eigvalsh() {
        let a = array![[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]];
        let all = sym_eigvalsh(&a).unwrap();
        let (w, v) = sym_eig_range(&a, -10.0, 2.5).unwrap();
        assert_eq!(w.len(), 2);
        for (x, y) in w.iter().zip(&all) {
            assert!((x - y).abs() < 1e-12);
        }
        let r = a.dot(&v.column(0)) - &v.column(0).mapv(|x| x * w[0]);
        assert!(r.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn hermitian_tridiagonal_reconstructs_matrix() {
        let i = C64::new(0.0, 1.0);
        let one = C64::new(1.0, 0.0);
        let k = array![
            [one * 2.0, one + i, i * 0.5],
            [one - i, one * -1.0, one * 0.3],
            [-i * 0.5, one * 0.3, one * 0.7]
        ];
        let red = HermitianTridiagonal::new(&k).unwrap();
        let n = 3;
        let mut t = Array2::<C64>::zeros((n, n));
        for j in 0..n {
            t[[j, j]] = C64::new(red.diag[j], 0.0);
            if j + 1 < n {
                t[[j, j + 1]] = C64::new(red.off[j], 0.0);
                t[[j + 1, j]] = C64::new(red.off[j], 0.0);
            }
        }
        let qh = red.q.t().mapv(|x| x.conj());
        let back = red.q.dot(&t).dot(&qh);
        for (x, y) in back.iter().zip(k.iter()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn shifted_tridiagonal_solve_agrees_with_dense() {
        let (d, e) = laplacian(6);
        let z = C64::new(0.7, 0.2);
        let mut a = Array2::<C64>::zeros((6, 6));
        for j in 0..6 {
            a[[j, j]] = C64::new(d[j], 0.0) - z;
            if j + 1 < 6 {
                a[[j, j + 1]] = C64::new(e[j], 0.0);
                a[[j + 1, j]] = C64::new(e[j], 0.0);
            }
        }
        let b = Array2::from_shape_fn((6, 2), |(i, j)| C64::new(i as f64 + 1.0, j as f64 - 0.5));
        let dense = dense_solve(&a, &b).unwrap();
        let mut buf: Vec<C64> = b.t().iter().copied().collect();
        tridiag_shifted_solve(&d, &e, z, &mut buf, 2).unwrap();
        let tri = Array2::from_shape_vec((6, 2).f(), buf).unwrap();
        for (x, y) in tri.iter().zip(dense.iter()) {
            assert!((x - y).norm() < 1e-12);
        }
    }
}
