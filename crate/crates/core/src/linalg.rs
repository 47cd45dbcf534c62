//! Thin wrappers over LAPACK factorizations plus a few small dense helpers.

use ndarray::{s, Array1, Array2, ArrayView2};
use ndarray_linalg::{Eigh, JobSvd, QR, SVDDC, SVD, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Result, TomoError};

/// Thin singular value decomposition `a = u · diag(s) · vt` with singular
/// values in descending order.
pub struct ThinSvd {
    pub u: Array2<C64>,
    pub s: Array1<f64>,
    pub vt: Array2<C64>,
}

pub fn svd_thin(a: ArrayView2<C64>) -> Result<ThinSvd> {
    let (m, n) = a.dim();
    let k = m.min(n);
    if k == 0 {
        return Ok(ThinSvd {
            u: Array2::zeros((m, 0)),
            s: Array1::zeros(0),
            vt: Array2::zeros((0, n)),
        });
    }
    let a = a.as_standard_layout();
    match a.svddc(JobSvd::Some) {
        Ok((Some(u), s, Some(vt))) => Ok(ThinSvd { u, s, vt }),
        _ => {
            // divide-and-conquer occasionally fails to converge on nearly
            // degenerate spectra; the QR-iteration driver is slower but sturdier
            let (u, s, vt) = a.svd(true, true)?;
            let u = u.ok_or_else(|| TomoError::Format("svd: missing U".into()))?;
            let vt = vt.ok_or_else(|| TomoError::Format("svd: missing Vt".into()))?;
            Ok(ThinSvd {
                u: u.slice(s![.., ..k]).to_owned(),
                s,
                vt: vt.slice(s![..k, ..]).to_owned(),
            })
        }
    }
}

/// Number of singular values to keep: at most `max_keep`, and drop those
/// below `rel_cutoff * s[0]`. Always keeps at least one.
pub fn truncation_rank(s: &Array1<f64>, max_keep: usize, rel_cutoff: f64) -> usize {
    if s.is_empty() {
        return 0;
    }
    let top = s[0];
    let mut keep = 0;
    for &v in s.iter() {
        if keep >= max_keep || v <= rel_cutoff * top {
            break;
        }
        keep += 1;
    }
    keep.max(1)
}

/// Thin QR: `a = q · r` with `q` of shape (m, min(m, n)).
pub fn qr_thin(a: ArrayView2<C64>) -> Result<(Array2<C64>, Array2<C64>)> {
    let (m, n) = a.dim();
    if m == 0 || n == 0 {
        return Ok((Array2::zeros((m, 0)), Array2::zeros((0, n))));
    }
    let a = a.as_standard_layout();
    Ok(a.qr()?)
}

/// Thin LQ: `a = l · q` with `q` having orthonormal rows.
pub fn lq_thin(a: ArrayView2<C64>) -> Result<(Array2<C64>, Array2<C64>)> {
    let at = a.t().mapv(|z| z.conj());
    let (q, r) = qr_thin(at.view())?;
    Ok((
        r.t().mapv(|z| z.conj()),
        q.t().mapv(|z| z.conj()),
    ))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(a: ArrayView2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let a = a.as_standard_layout();
    Ok(a.eigh(UPLO::Lower)?)
}

pub fn dagger(a: ArrayView2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

pub fn kron(a: ArrayView2<C64>, b: ArrayView2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            let mut blk = out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc]);
            blk.zip_mut_with(&b, |o, &v| *o = aij * v);
        }
    }
    out
}

pub fn identity(n: usize) -> Array2<C64> {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

pub fn trace(a: ArrayView2<C64>) -> C64 {
    a.diag().sum()
}

/// Frobenius norm of `a - b`, `max |a_ij - b_ij|`.
pub fn max_abs_diff(a: ArrayView2<C64>, b: ArrayView2<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest deviation from Hermiticity, `max |a_ij - conj(a_ji)|`.
pub fn hermiticity_defect(a: ArrayView2<C64>) -> f64 {
    let (n, _) = a.dim();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    worst
}

/// Lowest eigenpair of a Hermitian linear map given by `apply`, via Lanczos
/// with full reorthogonalization. `start` seeds the Krylov space.
pub fn lowest_eigenpair<F>(
    dim: usize,
    apply: F,
    start: &Array1<C64>,
    max_krylov: usize,
    tol: f64,
) -> Result<(f64, Array1<C64>)>
where
    F: Fn(&Array1<C64>) -> Array1<C64>,
{
    if dim == 0 {
        return Err(TomoError::Parameter("empty eigenproblem".into()));
    }
    let mut v0 = start.clone();
    let mut nrm = v0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if nrm < 1e-300 {
        v0 = Array1::from_elem(dim, C64::new(1.0, 0.0));
        nrm = (dim as f64).sqrt();
    }
    v0.mapv_inplace(|z| z / nrm);

    let kmax = max_krylov.min(dim).max(1);
    let mut basis: Vec<Array1<C64>> = vec![v0];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut best: Option<(f64, Array1<C64>)> = None;

    for j in 0..kmax {
        let mut w = apply(&basis[j]);
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        // full reorthogonalization, twice for stability
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                w.zip_mut_with(q, |wi, qi| *wi -= c * qi);
            }
        }
        let b = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

        // Ritz pair from the tridiagonal projection
        let k = alpha.len();
        let mut t = Array2::<C64>::zeros((k, k));
        for i in 0..k {
            t[[i, i]] = C64::new(alpha[i], 0.0);
            if i + 1 < k {
                t[[i, i + 1]] = C64::new(beta[i], 0.0);
                t[[i + 1, i]] = C64::new(beta[i], 0.0);
            }
        }
        let (vals, vecs) = eigh(t.view())?;
        let theta = vals[0];
        let resid = b * vecs[[k - 1, 0]].norm();
        let mut x = Array1::<C64>::zeros(dim);
        for (i, q) in basis.iter().enumerate() {
            let c = vecs[[i, 0]];
            x.zip_mut_with(q, |xi, qi| *xi += c * qi);
        }
        best = Some((theta, x));
        if resid < tol * theta.abs().max(1.0) || b < 1e-14 || j + 1 == kmax {
            break;
        }
        beta.push(b);
        basis.push(w.mapv(|z| z / b));
    }
    let (theta, mut x) = best.expect("at least one Lanczos step");
    let n = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    x.mapv_inplace(|z| z / n);
    Ok((theta, x))
}

fn dot(a: &Array1<C64>, b: &Array1<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}
