//! Dense reference implementation for small chains.
//!
//! Every quantity is computed from full state vectors and `2^N x 2^N`
//! matrices. Nothing here clamps or compresses, so results are the exact
//! values the tensor-network engine approximates.

use ndarray::{s, Array1, Array2, Axis};
use num_complex::Complex64 as C64;

use crate::error::{Result, TomoError};
use crate::linalg::{dagger, identity, kron, svd_thin, trace, truncation_rank};
use crate::povm::{Element, MeasurementRecord, PovmSet};
use crate::tensor_net::chain;
use crate::tensor_net::pauli::basis_matrix;
use crate::tensor_net::{Mpo, Mps};

pub const DEFAULT_DENSE_LIMIT: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    pub matrix: Array2<C64>,
    pub n: usize,
}

impl DenseOperator {
    pub fn new(matrix: Array2<C64>) -> Result<Self> {
        let (r, c) = matrix.dim();
        if r != c || !r.is_power_of_two() || r == 0 {
            return Err(TomoError::Dimension(format!("{r}x{c} is not a qubit-chain operator")));
        }
        Ok(DenseOperator {
            n: r.trailing_zeros() as usize,
            matrix,
        })
    }

    pub fn trace(&self) -> C64 {
        trace(self.matrix.view())
    }

    /// Squared Hilbert-Schmidt norm.
    pub fn norm_sq(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }
}

fn check_limit(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        return Err(TomoError::Capability(format!("{n} sites exceed the dense limit {limit}")));
    }
    Ok(())
}

/// Interleaved index `sum_k (2 s_k + t_k) 4^(N-1-k)` for row `s`, column `t`.
fn interleave(row: usize, col: usize, n: usize) -> usize {
    let mut idx = 0;
    for k in 0..n {
        let sh = n - 1 - k;
        idx = idx * 4 + 2 * ((row >> sh) & 1) + ((col >> sh) & 1);
    }
    idx
}

/// Applies a 4x4 map to every site index of a length-`4^N` vector.
fn per_site_map(v: &Array1<C64>, m: &Array2<C64>, n: usize) -> Array1<C64> {
    let mut t = v.clone();
    for k in 0..n {
        let a = 4usize.pow(k as u32);
        let b = 4usize.pow((n - k - 1) as u32);
        let cur = t.into_shape_with_order((a, 4, b)).expect("contiguous");
        let mut next = ndarray::Array3::<C64>::zeros((a, 4, b));
        for i in 0..4 {
            for j in 0..4 {
                let c = m[[i, j]];
                if c == C64::new(0.0, 0.0) {
                    continue;
                }
                let src = cur.index_axis(Axis(1), j);
                let mut dst = next.index_axis_mut(Axis(1), i);
                dst.scaled_add(c, &src);
            }
        }
        t = next.into_shape_with_order(a * 4 * b).expect("contiguous");
    }
    t
}

/// Dense operator from normalized-Pauli coefficients (first site most
/// significant).
pub fn dense_from_pauli_coefficients(c: &Array1<C64>, n: usize) -> Array2<C64> {
    // M[(s t), alpha] = P^alpha[s, t]
    let m = Array2::from_shape_fn((4, 4), |(st, al)| basis_matrix(al)[[st / 2, st % 2]]);
    let t = per_site_map(c, &m, n);
    let dim = 1 << n;
    Array2::from_shape_fn((dim, dim), |(r, col)| t[interleave(r, col, n)])
}

/// Coefficients `tr[P^(alpha) op]` in the normalized Pauli basis.
pub fn pauli_coefficients(op: &Array2<C64>) -> Result<Array1<C64>> {
    let d = DenseOperator::new(op.clone())?;
    let n = d.n;
    let dim = 1 << n;
    let mut t = Array1::<C64>::zeros(4usize.pow(n as u32));
    for r in 0..dim {
        for c in 0..dim {
            t[interleave(r, c, n)] = op[[r, c]];
        }
    }
    // M[alpha, (s t)] = P^alpha[t, s]
    let m = Array2::from_shape_fn((4, 4), |(al, st)| basis_matrix(al)[[st % 2, st / 2]]);
    Ok(per_site_map(&t, &m, n))
}

pub fn densify_mpo(mpo: &Mpo) -> Result<DenseOperator> {
    densify_mpo_with_limit(mpo, DEFAULT_DENSE_LIMIT)
}

pub fn densify_mpo_with_limit(mpo: &Mpo, limit: usize) -> Result<DenseOperator> {
    let n = mpo.n_sites();
    check_limit(n, limit)?;
    let c = chain::to_vector(mpo.sites());
    DenseOperator::new(dense_from_pauli_coefficients(&c, n))
}

pub fn densify_mps(mps: &Mps) -> Result<Array1<C64>> {
    check_limit(mps.n_sites(), DEFAULT_DENSE_LIMIT)?;
    Ok(mps.to_dense())
}

/// Successive-SVD factorization of a dense operator. Each of the `N - 1`
/// cuts may discard squared weight up to `tol^2 / (N - 1)`, so the
/// Hilbert-Schmidt reconstruction error is at most `tol`.
pub fn mpo_from_dense(op: &DenseOperator, tol: f64) -> Result<Mpo> {
    Ok(mpo_from_dense_capped(op, usize::MAX, tol)?.0)
}

/// As [`mpo_from_dense`] with bonds capped at `dmax`; also returns the exact
/// Hilbert-Schmidt fit error.
pub fn mpo_from_dense_capped(op: &DenseOperator, dmax: usize, tol: f64) -> Result<(Mpo, f64)> {
    let n = op.n;
    check_limit(n, DEFAULT_DENSE_LIMIT)?;
    let c = pauli_coefficients(&op.matrix)?;
    let budget = if n > 1 { tol * tol / (n - 1) as f64 } else { 0.0 };
    let mut sites = Vec::with_capacity(n);
    let mut rest = c.into_shape_with_order((1, 4usize.pow(n as u32))).expect("row");
    let mut discarded = 0.0;
    for _ in 0..n - 1 {
        let l = rest.nrows();
        let cols = rest.len() / (l * 4);
        let mat = rest
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((l * 4, cols))
            .expect("contiguous");
        let f = svd_thin(mat.view())?;
        let mut keep = truncation_rank(&f.s, dmax, 0.0);
        // Drop the smallest values while the tail stays within budget.
        let mut tail = f.s.iter().skip(keep).map(|v| v * v).sum::<f64>();
        while keep > 1 && tail + f.s[keep - 1] * f.s[keep - 1] <= budget {
            keep -= 1;
            tail += f.s[keep] * f.s[keep];
        }
        discarded += tail;
        let u = f.u.slice(s![.., ..keep]).to_owned();
        sites.push(u.into_shape_with_order((l, 4, keep)).expect("contiguous"));
        let mut svt = f.vt.slice(s![..keep, ..]).to_owned();
        for (i, mut row) in svt.axis_iter_mut(Axis(0)).enumerate() {
            let sv = f.s[i];
            row.mapv_inplace(|z| z * sv);
        }
        rest = svt;
    }
    let l = rest.nrows();
    sites.push(
        rest.as_standard_layout()
            .into_owned()
            .into_shape_with_order((l, 4, 1))
            .expect("contiguous"),
    );
    Ok((Mpo::pauli(sites)?, discarded.sqrt()))
}

/// Dense matrix of a POVM element.
pub fn element_matrix(povm: &PovmSet, label: &crate::povm::SettingLabel, j: usize) -> Result<Array2<C64>> {
    match povm.element(label, j)? {
        Element::Product(factors) => Ok(kron_all(&factors)),
        Element::Global { observable, sign } => {
            let o = kron_all(&observable.paulis(povm.n_sites()).iter().map(|p| p.matrix()).collect::<Vec<_>>());
            let dim = o.nrows();
            Ok((identity(dim) + o.mapv(|z| z * sign)).mapv(|z| z * 0.5))
        }
    }
}

pub fn kron_all(factors: &[Array2<C64>]) -> Array2<C64> {
    let mut m = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
    for f in factors {
        m = kron(m.view(), f.view());
    }
    m
}

/// All element matrices in setting order.
pub fn element_matrices(povm: &PovmSet) -> Result<Vec<Vec<Array2<C64>>>> {
    check_limit(povm.n_sites(), DEFAULT_DENSE_LIMIT)?;
    povm.settings()
        .iter()
        .map(|l| (0..l.n_outcomes()).map(|j| element_matrix(povm, l, j)).collect())
        .collect()
}

/// `Re tr[rho Pi]` for every element.
pub fn probabilities(povm: &PovmSet, rho: &Array2<C64>) -> Result<Vec<Vec<f64>>> {
    Ok(element_matrices(povm)?
        .iter()
        .map(|els| els.iter().map(|e| trace(rho.dot(e).view()).re).collect())
        .collect())
}

/// `sum_i n_i Pi_i / (M p_i)` without any floor.
pub fn dense_r(povm: &PovmSet, record: &MeasurementRecord, rho: &Array2<C64>) -> Result<Array2<C64>> {
    let els = element_matrices(povm)?;
    let total = record.weight_total();
    let dim = 1 << povm.n_sites();
    let mut r = Array2::<C64>::zeros((dim, dim));
    for (s, es) in record.settings.iter().zip(&els) {
        for (n, e) in s.values().iter().zip(es) {
            if *n <= 0.0 {
                continue;
            }
            let p = trace(rho.dot(e).view()).re;
            if !(p > 0.0) {
                return Err(TomoError::Numerical {
                    site: 0,
                    msg: format!("observed outcome has probability {p:e}; division by zero"),
                });
            }
            r.scaled_add(C64::new(n / (total * p), 0.0), e);
        }
    }
    Ok(r)
}

/// `R rho R / tr[R rho R]`.
pub fn dense_mle_step(rho: &DenseOperator, record: &MeasurementRecord, povm: &PovmSet) -> Result<DenseOperator> {
    let r = dense_r(povm, record, &rho.matrix)?;
    sandwich_normalized(&r, &rho.matrix)
}

/// Step with `(1 + eps R) / (1 + eps)` in place of `R`.
pub fn dense_diluted_step(
    rho: &DenseOperator,
    record: &MeasurementRecord,
    povm: &PovmSet,
    eps: f64,
) -> Result<DenseOperator> {
    let r = dense_r(povm, record, &rho.matrix)?;
    let dim = r.nrows();
    let rd = (identity(dim) + r.mapv(|z| z * eps)).mapv(|z| z / (1.0 + eps));
    sandwich_normalized(&rd, &rho.matrix)
}

fn sandwich_normalized(r: &Array2<C64>, rho: &Array2<C64>) -> Result<DenseOperator> {
    let out = r.dot(rho).dot(r);
    let tr = trace(out.view());
    if !(tr.norm() > 1e-300) {
        return Err(TomoError::Degenerate(format!("trace {tr}")));
    }
    DenseOperator::new(out.mapv(|z| z / tr))
}

/// `R psi / |R psi|` with probabilities taken from `|psi><psi|`.
pub fn dense_pure_step(psi: &Array1<C64>, record: &MeasurementRecord, povm: &PovmSet) -> Result<Array1<C64>> {
    let rho = outer(psi);
    let r = dense_r(povm, record, &rho)?;
    let v = r.dot(psi);
    let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(nrm > 1e-300) {
        return Err(TomoError::Degenerate("R psi vanishes".into()));
    }
    Ok(v.mapv(|z| z / nrm))
}

pub fn dense_log_likelihood(rho: &Array2<C64>, record: &MeasurementRecord, povm: &PovmSet, floor: f64) -> Result<f64> {
    let probs = probabilities(povm, rho)?;
    let values: Vec<Vec<f64>> = record.settings.iter().map(|s| s.values()).collect();
    Ok(crate::povm::log_likelihood_from(&values, &probs, floor))
}

pub fn outer(psi: &Array1<C64>) -> Array2<C64> {
    let col = psi.view().insert_axis(Axis(1));
    let row = psi.mapv(|z| z.conj()).insert_axis(Axis(0));
    col.dot(&row)
}

/// `|a - b|^2 / |a|^2` in the Hilbert-Schmidt norm.
pub fn hs_distance(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    let num: f64 = (a - b).iter().map(|z| z.norm_sqr()).sum();
    let den: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    num / den
}

pub fn fidelity_pure_mixed(psi: &Array1<C64>, rho: &Array2<C64>) -> f64 {
    let v = rho.dot(psi);
    psi.iter().zip(&v).map(|(a, b)| a.conj() * b).sum::<C64>().norm()
}

pub fn fidelity_pure_pure(a: &Array1<C64>, b: &Array1<C64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>().norm_sqr()
}

/// Dense `e^(-beta h) / Z` for Hermitian `h`.
pub fn thermal_matrix(h: &Array2<C64>, beta: f64) -> Result<Array2<C64>> {
    let (w, v) = crate::linalg::eigh(h.view())?;
    let e0 = w[0];
    let weights: Vec<f64> = w.iter().map(|&x| (-beta * (x - e0)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let mut scaled = v.clone();
    for (j, mut col) in scaled.axis_iter_mut(Axis(1)).enumerate() {
        let f = weights[j] / z;
        col.mapv_inplace(|x| x * f);
    }
    Ok(scaled.dot(&dagger(v.view())))
}
