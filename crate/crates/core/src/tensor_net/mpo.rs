use ndarray::{Array2, Array3};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::chain::{self, Site};
use super::compress::{self, CompressOptions, CompressionReport, SweepKind};
use super::mps::Mps;
use super::pauli::{basis_matrix, OperatorBasis, FRAC_1_SQRT_2, SQRT_2};
use super::product::Product;
use crate::error::{Result, TomoError};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Matrix product operator stored as coefficient tensors `(D_k, d^2, D_{k+1})`
/// over a per-site orthonormal Hermitian operator basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Mpo {
    sites: Vec<Site>,
    basis: OperatorBasis,
}

/// A product observable: one `d x d` matrix per site.
pub type ProductObservable = [Array2<C64>];

impl Mpo {
    pub fn new(sites: Vec<Site>, basis: OperatorBasis) -> Result<Self> {
        chain::validate(&sites)?;
        if sites[0].dim().1 != 4 {
            return Err(TomoError::Dimension(format!(
                "Pauli-basis MPO needs 4 coefficients per site, got {}",
                sites[0].dim().1
            )));
        }
        Ok(Mpo { sites, basis })
    }

    pub fn pauli(sites: Vec<Site>) -> Result<Self> {
        Mpo::new(sites, OperatorBasis::NormalizedPauli)
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn into_sites(self) -> Vec<Site> {
        self.sites
    }

    pub fn basis(&self) -> OperatorBasis {
        self.basis
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    /// Physical dimension `d` of each site.
    pub fn phys_dim(&self) -> usize {
        2
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        chain::bond_dims(&self.sites)
    }

    pub fn max_bond(&self) -> usize {
        chain::max_bond(&self.sites)
    }

    fn check_compatible(&self, other: &Mpo) -> Result<()> {
        if self.basis != other.basis {
            return Err(TomoError::BasisMismatch(self.basis.id().into(), other.basis.id().into()));
        }
        if self.n_sites() != other.n_sites() {
            return Err(TomoError::Dimension(format!(
                "site count {} vs {}",
                self.n_sites(),
                other.n_sites()
            )));
        }
        Ok(())
    }

    /// Identity operator, bond dimension 1.
    pub fn identity(n: usize) -> Result<Self> {
        Mpo::uniform_product(n, &[C64::new(SQRT_2, 0.0), ZERO, ZERO, ZERO])
    }

    /// `1 / d^N`, bond dimension 1, trace one.
    pub fn completely_mixed(n: usize) -> Result<Self> {
        Mpo::uniform_product(n, &[C64::new(FRAC_1_SQRT_2, 0.0), ZERO, ZERO, ZERO])
    }

    /// Zero operator with bond dimension 1.
    pub fn zero(n: usize) -> Result<Self> {
        Mpo::uniform_product(n, &[ZERO; 4])
    }

    fn uniform_product(n: usize, coeffs: &[C64; 4]) -> Result<Self> {
        if n == 0 {
            return Err(TomoError::Dimension("no sites".into()));
        }
        let site = Array3::from_shape_fn((1, 4, 1), |(_, a, _)| coeffs[a]);
        Mpo::pauli(vec![site; n])
    }

    /// Tensor product of single-site operators (bond dimension 1).
    pub fn product_operator(ops: &ProductObservable) -> Result<Self> {
        let sites = ops
            .iter()
            .map(|m| {
                let c = super::pauli::coefficients_of(m);
                Array3::from_shape_fn((1, 4, 1), |(_, a, _)| c[a])
            })
            .collect();
        Mpo::pauli(sites)
    }

    /// Random MPO with Gaussian complex coefficients.
    pub fn random<R: Rng>(n: usize, d: usize, rng: &mut R) -> Result<Self> {
        let sites = (0..n)
            .map(|k| {
                let l = if k == 0 { 1 } else { d };
                let r = if k == n - 1 { 1 } else { d };
                Array3::from_shape_fn((l, 4, r), |_| {
                    C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
                })
            })
            .collect();
        Mpo::pauli(sites)
    }

    /// Random Hermitian MPO (real Pauli coefficients).
    pub fn random_hermitian<R: Rng>(n: usize, d: usize, rng: &mut R) -> Result<Self> {
        let sites = (0..n)
            .map(|k| {
                let l = if k == 0 { 1 } else { d };
                let r = if k == n - 1 { 1 } else { d };
                Array3::from_shape_fn((l, 4, r), |_| C64::new(StandardNormal.sample(rng), 0.0))
            })
            .collect();
        Mpo::pauli(sites)
    }

    /// `|psi><psi|`; bond dimensions square.
    pub fn from_mps(psi: &Mps) -> Result<Self> {
        if psi.phys_dim() != 2 {
            return Err(TomoError::Dimension("only qubit states convert to Pauli MPOs".into()));
        }
        let p: Vec<Array2<C64>> = (0..4).map(basis_matrix).collect();
        let sites = psi
            .sites()
            .iter()
            .map(|a| {
                let (l, _, r) = a.dim();
                let mut out = Array3::<C64>::zeros((l * l, 4, r * r));
                for i in 0..l {
                    for j in 0..l {
                        for u in 0..r {
                            for v in 0..r {
                                for s in 0..2 {
                                    let ket = a[[i, s, u]];
                                    for t in 0..2 {
                                        let x = ket * a[[j, t, v]].conj();
                                        for (al, pa) in p.iter().enumerate() {
                                            // tr[P |s><t|] = P[t, s]
                                            out[[i * l + j, al, u * r + v]] += x * pa[[t, s]];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                out
            })
            .collect();
        Mpo::pauli(sites)
    }

    /// `tr[rho Pi]` for a product observable `Pi = pi_1 x ... x pi_N`.
    pub fn expectation(&self, obs: &ProductObservable) -> Result<C64> {
        if obs.len() != self.n_sites() {
            return Err(TomoError::Dimension(format!(
                "observable has {} sites, operator {}",
                obs.len(),
                self.n_sites()
            )));
        }
        let weights: Vec<[C64; 4]> = obs
            .iter()
            .map(|m| {
                if m.dim() != (2, 2) {
                    return Err(TomoError::Dimension("observable factors must be 2x2".into()));
                }
                let mut w = [ZERO; 4];
                for (a, x) in w.iter_mut().enumerate() {
                    *x = (&basis_matrix(a) * &m.t()).sum();
                }
                Ok(w)
            })
            .collect::<Result<_>>()?;
        Ok(self.contract_weights(&weights))
    }

    /// `sum_alpha prod_k P_k[alpha_k] w_k[alpha_k]`, left to right.
    pub(crate) fn contract_weights(&self, weights: &[[C64; 4]]) -> C64 {
        let mut v = vec![C64::new(1.0, 0.0)];
        for (a, w) in self.sites.iter().zip(weights) {
            let (l, _, r) = a.dim();
            let mut next = vec![ZERO; r];
            for i in 0..l {
                if v[i] == ZERO {
                    continue;
                }
                for (al, wa) in w.iter().enumerate() {
                    if *wa == ZERO {
                        continue;
                    }
                    let c = v[i] * wa;
                    for j in 0..r {
                        next[j] += c * a[[i, al, j]];
                    }
                }
            }
            v = next;
        }
        v[0]
    }

    pub fn trace(&self) -> C64 {
        let w = [C64::new(SQRT_2, 0.0), ZERO, ZERO, ZERO];
        self.contract_weights(&vec![w; self.n_sites()])
    }

    /// Divides each site by the principal `N`-th root of the trace.
    pub fn normalize(&self) -> Result<Self> {
        let tr = self.trace();
        if !(tr.norm() >= 1e-300) || !tr.is_finite() {
            return Err(TomoError::Degenerate(format!("trace {tr}")));
        }
        let root = tr.powf(1.0 / self.n_sites() as f64);
        let sites = self.sites.iter().map(|a| a.mapv(|z| z / root)).collect();
        Ok(Mpo {
            sites,
            basis: self.basis,
        })
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut sites = self.sites.clone();
        chain::scale(&mut sites, c);
        Mpo {
            sites,
            basis: self.basis,
        }
    }

    /// Operator product `self · other`; bond dimensions multiply.
    pub fn multiply(&self, other: &Mpo) -> Result<Self> {
        self.check_compatible(other)?;
        let p = Product::operator_product(self.sites.clone(), other.sites.clone());
        Ok(Mpo {
            sites: p.materialize(),
            basis: self.basis,
        })
    }

    /// Operator sum by direct sum of the bond spaces.
    pub fn add(&self, other: &Mpo) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Mpo {
            sites: chain::direct_sum(&self.sites, &other.sites)?,
            basis: self.basis,
        })
    }

    /// Hilbert-Schmidt inner product `tr[self^dagger other]`.
    pub fn inner(&self, other: &Mpo) -> Result<C64> {
        self.check_compatible(other)?;
        chain::overlap(&self.sites, &other.sites)
    }

    /// Squared Hilbert-Schmidt norm `tr[rho^dagger rho]`.
    pub fn norm_sq(&self) -> f64 {
        chain::norm_sq(&self.sites)
    }

    pub fn k_normalize(&self, center: usize) -> Result<KNormalForm> {
        let n = self.n_sites();
        if center >= n {
            return Err(TomoError::Parameter(format!("center {center} out of range for {n} sites")));
        }
        let mut sites = self.sites.clone();
        chain::left_orthonormalize(&mut sites, center)?;
        chain::right_orthonormalize(&mut sites, center)?;
        let left_gauge = (0..n)
            .map(|k| k < center && chain::gauge_defect(&sites[k], true) <= 1e-10)
            .collect();
        let right_gauge = (0..n)
            .map(|k| k > center && chain::gauge_defect(&sites[k], false) <= 1e-10)
            .collect();
        Ok(KNormalForm {
            mpo: Mpo {
                sites,
                basis: self.basis,
            },
            center,
            left_gauge,
            right_gauge,
        })
    }

    pub fn compress(&self, dmax: usize, options: &CompressOptions) -> Result<(Mpo, CompressionReport)> {
        let (s, r) = compress::compress_chain(&self.sites, dmax, options, SweepKind::SingleSite)?;
        Ok((
            Mpo {
                sites: s,
                basis: self.basis,
            },
            r,
        ))
    }

    pub fn compress_two_site(&self, dmax: usize, options: &CompressOptions) -> Result<(Mpo, CompressionReport)> {
        let (s, r) = compress::compress_chain(&self.sites, dmax, options, SweepKind::TwoSite)?;
        Ok((
            Mpo {
                sites: s,
                basis: self.basis,
            },
            r,
        ))
    }

    /// Removes bond directions whose singular values fall below
    /// `rel_cutoff` times the largest; the operator is unchanged up to that
    /// cutoff.
    pub fn compress_lossless(&self, rel_cutoff: f64) -> Result<Mpo> {
        let mut sites = self.sites.clone();
        chain::compress_exact(&mut sites, rel_cutoff)?;
        Ok(Mpo {
            sites,
            basis: self.basis,
        })
    }

    /// Largest deviation of any coefficient from being real, which in the
    /// Pauli basis bounds the anti-Hermitian part.
    pub fn imag_defect(&self) -> f64 {
        self.sites
            .iter()
            .flat_map(|a| a.iter())
            .map(|z| z.im.abs())
            .fold(0.0, f64::max)
    }
}

/// MPO in mixed canonical form around `center`.
#[derive(Clone, Debug)]
pub struct KNormalForm {
    pub mpo: Mpo,
    pub center: usize,
    pub left_gauge: Vec<bool>,
    pub right_gauge: Vec<bool>,
}

impl KNormalForm {
    /// `tr[rho^dagger rho]` read off the center tensor.
    pub fn purity(&self) -> f64 {
        self.mpo.sites[self.center].iter().map(|z| z.norm_sqr()).sum()
    }

    /// All sites left of the center are left-normal and all sites right of
    /// it are right-normal.
    pub fn is_certified(&self) -> bool {
        (0..self.mpo.n_sites()).all(|k| {
            (k >= self.center || self.left_gauge[k]) && (k <= self.center || self.right_gauge[k])
        })
    }
}

/// Applies the operator `w` to `psi` explicitly; bond dimensions multiply.
pub fn apply(w: &Mpo, psi: &Mps) -> Result<Mps> {
    if w.n_sites() != psi.n_sites() {
        return Err(TomoError::Dimension("site count mismatch".into()));
    }
    let p = Product::action(w.sites.clone(), psi.sites().to_vec());
    p.validate()?;
    Ok(Mps::from_sites_unchecked(p.materialize()))
}

/// `<psi| w |psi>` without forming `w |psi>`.
pub fn sandwich_expectation(psi: &Mps, w: &Mpo) -> Result<C64> {
    let p = Product::action(w.sites.clone(), psi.sites().to_vec());
    super::product::overlap(psi.sites(), &p)
}
