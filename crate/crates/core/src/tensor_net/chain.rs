//! Operations on open-boundary chains of rank-3 site tensors
//! `(left bond, physical, right bond)`, shared by MPS and MPO.

use ndarray::{s, Array1, Array2, Array3, Axis};
use num_complex::Complex64 as C64;

use crate::error::{Result, TomoError};
use crate::linalg::{lq_thin, qr_thin, svd_thin, truncation_rank};

pub type Site = Array3<C64>;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Checks boundary bonds, adjacent bond agreement and a uniform physical
/// dimension.
pub fn validate(sites: &[Site]) -> Result<()> {
    let n = sites.len();
    if n == 0 {
        return Err(TomoError::Dimension("chain has no sites".into()));
    }
    let p = sites[0].dim().1;
    if sites[0].dim().0 != 1 || sites[n - 1].dim().2 != 1 {
        return Err(TomoError::Dimension("boundary bond dimensions must be 1".into()));
    }
    for (k, w) in sites.windows(2).enumerate() {
        if w[0].dim().2 != w[1].dim().0 {
            return Err(TomoError::Dimension(format!(
                "bond between sites {k} and {} mismatched: {} vs {}",
                k + 1,
                w[0].dim().2,
                w[1].dim().0
            )));
        }
    }
    if sites.iter().any(|a| a.dim().1 != p) {
        return Err(TomoError::Dimension("non-uniform physical dimension".into()));
    }
    Ok(())
}

/// Bond dimensions `D_1 .. D_{N+1}`.
pub fn bond_dims(sites: &[Site]) -> Vec<usize> {
    let mut out = Vec::with_capacity(sites.len() + 1);
    out.push(sites[0].dim().0);
    out.extend(sites.iter().map(|a| a.dim().2));
    out
}

pub fn max_bond(sites: &[Site]) -> usize {
    bond_dims(sites).into_iter().max().unwrap_or(1)
}

fn as_left_matrix(a: &Site) -> Array2<C64> {
    let (l, p, r) = a.dim();
    a.as_standard_layout()
        .to_owned()
        .into_shape_with_order((l * p, r))
        .expect("contiguous")
}

fn as_right_matrix(a: &Site) -> Array2<C64> {
    let (l, p, r) = a.dim();
    a.as_standard_layout()
        .to_owned()
        .into_shape_with_order((l, p * r))
        .expect("contiguous")
}

fn from_left_matrix(m: Array2<C64>, l: usize, p: usize) -> Site {
    let r = m.dim().1;
    m.as_standard_layout()
        .to_owned()
        .into_shape_with_order((l, p, r))
        .expect("contiguous")
}

fn from_right_matrix(m: Array2<C64>, p: usize, r: usize) -> Site {
    let l = m.dim().0;
    m.as_standard_layout()
        .to_owned()
        .into_shape_with_order((l, p, r))
        .expect("contiguous")
}

/// `m · A` contracting the left bond of `a`.
pub fn mul_left(m: &Array2<C64>, a: &Site) -> Site {
    let (_, p, r) = a.dim();
    from_right_matrix(m.dot(&as_right_matrix(a)), p, r)
}

/// `A · m` contracting the right bond of `a`.
pub fn mul_right(a: &Site, m: &Array2<C64>) -> Site {
    let (l, p, _) = a.dim();
    from_left_matrix(as_left_matrix(a).dot(m), l, p)
}

/// Left-orthonormalizes sites `0..upto` by successive QR, pushing the
/// remainder into site `upto`.
pub fn left_orthonormalize(sites: &mut [Site], upto: usize) -> Result<()> {
    for k in 0..upto.min(sites.len().saturating_sub(1)) {
        let (l, p, _) = sites[k].dim();
        let (q, r) = qr_thin(as_left_matrix(&sites[k]).view())?;
        sites[k] = from_left_matrix(q, l, p);
        sites[k + 1] = mul_left(&r, &sites[k + 1]);
    }
    Ok(())
}

/// Right-orthonormalizes sites `from+1..N` by successive LQ, pushing the
/// remainder into site `from`.
pub fn right_orthonormalize(sites: &mut [Site], from: usize) -> Result<()> {
    let n = sites.len();
    for k in (from + 1..n).rev() {
        let (_, p, r) = sites[k].dim();
        let (lm, q) = lq_thin(as_right_matrix(&sites[k]).view())?;
        sites[k] = from_right_matrix(q, p, r);
        sites[k - 1] = mul_right(&sites[k - 1], &lm);
    }
    Ok(())
}

/// Truncates a chain whose sites `1..N` are right-orthonormal by sweeping
/// SVDs from the left. Keeps at most `dmax` values per cut and drops those
/// below `rel_cutoff` times the largest. Returns the discarded squared
/// weight summed over cuts; the result is left-orthonormal with the norm in
/// the last site.
pub fn truncate_sweep(sites: &mut [Site], dmax: usize, rel_cutoff: f64) -> Result<f64> {
    let n = sites.len();
    let mut discarded = 0.0;
    for k in 0..n.saturating_sub(1) {
        let (l, p, _) = sites[k].dim();
        let f = svd_thin(as_left_matrix(&sites[k]).view())?;
        let keep = truncation_rank(&f.s, dmax, rel_cutoff);
        discarded += f.s.iter().skip(keep).map(|v| v * v).sum::<f64>();
        let u = f.u.slice(s![.., ..keep]).to_owned();
        let mut svt = f.vt.slice(s![..keep, ..]).to_owned();
        for (i, mut row) in svt.axis_iter_mut(Axis(0)).enumerate() {
            let sv = f.s[i];
            row.mapv_inplace(|z| z * sv);
        }
        sites[k] = from_left_matrix(u, l, p);
        sites[k + 1] = mul_left(&svt, &sites[k + 1]);
    }
    Ok(discarded)
}

/// Brings a chain to a minimal-bond, left-orthonormal form, dropping
/// singular values below `rel_cutoff` times the largest at each cut.
pub fn compress_exact(sites: &mut [Site], rel_cutoff: f64) -> Result<f64> {
    right_orthonormalize(sites, 0)?;
    truncate_sweep(sites, usize::MAX, rel_cutoff)
}

/// Full contraction `sum conj(bra) * ket` over all indices.
pub fn overlap(bra: &[Site], ket: &[Site]) -> Result<C64> {
    if bra.len() != ket.len() {
        return Err(TomoError::Dimension(format!(
            "site count {} vs {}",
            bra.len(),
            ket.len()
        )));
    }
    let mut env = Array2::from_elem((1, 1), ONE);
    for (b, a) in bra.iter().zip(ket) {
        if b.dim().1 != a.dim().1 {
            return Err(TomoError::Dimension("physical dimension mismatch".into()));
        }
        env = transfer(&env, b, a);
    }
    Ok(env[[0, 0]])
}

/// One step of the bra-ket transfer: `E'[b', a'] = sum conj(B[b,s,b']) E[b,a] A[a,s,a']`.
pub fn transfer(env: &Array2<C64>, b: &Site, a: &Site) -> Array2<C64> {
    let (bl, p, _) = b.dim();
    let ar = a.dim().2;
    let ea = env
        .dot(&as_right_matrix(a))
        .into_shape_with_order((bl * p, ar))
        .expect("contiguous");
    let bm = as_left_matrix(b).mapv(|z| z.conj());
    bm.t().dot(&ea)
}

pub fn norm_sq(sites: &[Site]) -> f64 {
    overlap(sites, sites).map(|z| z.re).unwrap_or(0.0)
}

/// Block-diagonal direct sum representing the sum of the two chains.
pub fn direct_sum(a: &[Site], b: &[Site]) -> Result<Vec<Site>> {
    let n = a.len();
    if n != b.len() {
        return Err(TomoError::Dimension(format!("site count {} vs {}", n, b.len())));
    }
    if n == 1 {
        if a[0].dim() != b[0].dim() {
            return Err(TomoError::Dimension("single-site shapes differ".into()));
        }
        return Ok(vec![&a[0] + &b[0]]);
    }
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let (al, p, ar) = a[k].dim();
        let (bl, pb, br) = b[k].dim();
        if p != pb {
            return Err(TomoError::Dimension("physical dimension mismatch".into()));
        }
        let site = if k == 0 {
            let mut t = Array3::zeros((1, p, ar + br));
            t.slice_mut(s![.., .., ..ar]).assign(&a[k]);
            t.slice_mut(s![.., .., ar..]).assign(&b[k]);
            t
        } else if k == n - 1 {
            let mut t = Array3::zeros((al + bl, p, 1));
            t.slice_mut(s![..al, .., ..]).assign(&a[k]);
            t.slice_mut(s![al.., .., ..]).assign(&b[k]);
            t
        } else {
            let mut t = Array3::zeros((al + bl, p, ar + br));
            t.slice_mut(s![..al, .., ..ar]).assign(&a[k]);
            t.slice_mut(s![al.., .., ar..]).assign(&b[k]);
            t
        };
        out.push(site);
    }
    Ok(out)
}

/// Reverses site order and transposes each site's bonds, so that sweeps
/// from the right can reuse left-to-right code.
pub fn reversed(sites: &[Site]) -> Vec<Site> {
    sites
        .iter()
        .rev()
        .map(|a| a.view().permuted_axes([2, 1, 0]).as_standard_layout().to_owned())
        .collect()
}

/// Scales the chain by `c`, spreading the factor evenly over the sites.
pub fn scale(sites: &mut [Site], c: C64) {
    if c == ZERO {
        sites[0].fill(ZERO);
        return;
    }
    let root = c.powf(1.0 / sites.len() as f64);
    for a in sites.iter_mut() {
        a.mapv_inplace(|z| z * root);
    }
}

/// Dense contraction into a vector over the physical indices, first site
/// most significant.
pub fn to_vector(sites: &[Site]) -> Array1<C64> {
    let mut acc = Array2::from_elem((1, 1), ONE); // (prefix, bond)
    for a in sites {
        let (_, p, r) = a.dim();
        let next = acc.dot(&as_right_matrix(a));
        let rows = next.dim().0;
        acc = next.into_shape_with_order((rows * p, r)).expect("contiguous");
    }
    acc.column(0).to_owned()
}

/// Sum over `k` of `|A_k|^2` deviations from left (`left = true`) or right
/// orthonormality, as the max entry of `sum A^dagger A - 1`.
pub fn gauge_defect(a: &Site, left: bool) -> f64 {
    let m = if left { as_left_matrix(a) } else { as_right_matrix(a).t().to_owned() };
    let g = m.t().mapv(|z| z.conj()).dot(&m);
    let n = g.dim().0;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { ONE } else { ZERO };
            worst = worst.max((g[[i, j]] - want).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_chain(n: usize, p: usize, d: usize, seed: u64) -> Vec<Site> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|k| {
                let l = if k == 0 { 1 } else { d };
                let r = if k == n - 1 { 1 } else { d };
                Array3::from_shape_fn((l, p, r), |_| {
                    C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
                })
            })
            .collect()
    }

    fn vec_diff(a: &Array1<C64>, b: &Array1<C64>) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn orthonormalization_preserves_vector() {
        let mut c = random_chain(5, 2, 3, 1);
        let v = to_vector(&c);
        left_orthonormalize(&mut c, 4).unwrap();
        assert!(vec_diff(&v, &to_vector(&c)) < 1e-10);
        for a in &c[..4] {
            assert!(gauge_defect(a, true) < 1e-12);
        }
        right_orthonormalize(&mut c, 0).unwrap();
        assert!(vec_diff(&v, &to_vector(&c)) < 1e-10);
        for a in &c[1..] {
            assert!(gauge_defect(a, false) < 1e-12);
        }
    }

    #[test]
    fn overlap_matches_dense() {
        let a = random_chain(4, 2, 3, 2);
        let b = random_chain(4, 2, 2, 3);
        let va = to_vector(&a);
        let vb = to_vector(&b);
        let dense: C64 = va.iter().zip(&vb).map(|(x, y)| x.conj() * y).sum();
        assert!((overlap(&a, &b).unwrap() - dense).norm() < 1e-10 * dense.norm().max(1.0));
    }

    #[test]
    fn direct_sum_adds_vectors() {
        let a = random_chain(4, 2, 2, 4);
        let b = random_chain(4, 2, 3, 5);
        let c = direct_sum(&a, &b).unwrap();
        assert_eq!(bond_dims(&c), vec![1, 5, 5, 5, 1]);
        let want = to_vector(&a) + to_vector(&b);
        assert!(vec_diff(&want, &to_vector(&c)) < 1e-10);
        let a1 = random_chain(1, 4, 1, 6);
        let b1 = random_chain(1, 4, 1, 7);
        let c1 = direct_sum(&a1, &b1).unwrap();
        assert!(vec_diff(&(to_vector(&a1) + to_vector(&b1)), &to_vector(&c1)) < 1e-14);
    }

    #[test]
    fn exact_compression_removes_redundant_bonds() {
        let a = random_chain(4, 2, 2, 8);
        let mut c = direct_sum(&a, &a).unwrap();
        let v = to_vector(&c);
        compress_exact(&mut c, 1e-13).unwrap();
        assert!(max_bond(&c) <= 2);
        assert!(vec_diff(&v, &to_vector(&c)) < 1e-9);
    }

    #[test]
    fn reversal_is_an_involution() {
        let a = random_chain(3, 2, 2, 9);
        let back = reversed(&reversed(&a));
        for (x, y) in a.iter().zip(&back) {
            assert_eq!(x, y);
        }
    }
}
