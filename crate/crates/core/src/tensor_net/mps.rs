use ndarray::{Array1, Array3};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::chain::{self, Site};
use super::compress::{self, CompressOptions, CompressionReport, SweepKind};
use crate::error::{Result, TomoError};

/// Matrix product state: site tensors `(D_k, d, D_{k+1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mps {
    sites: Vec<Site>,
}

impl Mps {
    pub fn new(sites: Vec<Site>) -> Result<Self> {
        chain::validate(&sites)?;
        Ok(Mps { sites })
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn into_sites(self) -> Vec<Site> {
        self.sites
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn phys_dim(&self) -> usize {
        self.sites[0].dim().1
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        chain::bond_dims(&self.sites)
    }

    pub fn max_bond(&self) -> usize {
        chain::max_bond(&self.sites)
    }

    /// Product state from per-site amplitude vectors.
    pub fn product(states: &[Array1<C64>]) -> Result<Self> {
        if states.is_empty() {
            return Err(TomoError::Dimension("no sites".into()));
        }
        let sites = states
            .iter()
            .map(|v| Array3::from_shape_fn((1, v.len(), 1), |(_, s, _)| v[s]))
            .collect();
        Mps::new(sites)
    }

    /// Computational basis state; `bits[k]` selects the basis vector on site `k`.
    pub fn basis_state(bits: &[usize], d: usize) -> Result<Self> {
        let states: Vec<Array1<C64>> = bits
            .iter()
            .map(|&b| {
                let mut v = Array1::zeros(d);
                v[b] = C64::new(1.0, 0.0);
                v
            })
            .collect();
        Mps::product(&states)
    }

    /// Random normalized product state of qubits.
    pub fn random_product<R: Rng>(n: usize, rng: &mut R) -> Result<Self> {
        let states: Vec<Array1<C64>> = (0..n)
            .map(|_| {
                let v = Array1::from_shape_fn(2, |_| {
                    C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
                });
                let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                v.mapv(|z| z / nrm)
            })
            .collect();
        Mps::product(&states)
    }

    /// Random normalized MPS with Gaussian entries and bonds capped at `d`.
    pub fn random<R: Rng>(n: usize, phys: usize, d: usize, rng: &mut R) -> Result<Self> {
        let mut sites = Vec::with_capacity(n);
        for k in 0..n {
            let cap_l = phys.saturating_pow(k.min(n - k) as u32).min(d);
            let cap_r = phys.saturating_pow((k + 1).min(n - k - 1) as u32).min(d);
            let l = if k == 0 { 1 } else { cap_l };
            let r = if k == n - 1 { 1 } else { cap_r };
            sites.push(Array3::from_shape_fn((l, phys, r), |_| {
                C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
            }));
        }
        let mut m = Mps::new(sites)?;
        m.normalize()?;
        Ok(m)
    }

    pub fn norm_sq(&self) -> f64 {
        chain::norm_sq(&self.sites)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Mps) -> Result<C64> {
        chain::overlap(&self.sites, &other.sites)
    }

    /// Rescales to unit 2-norm; the state is left in left-canonical form.
    pub fn normalize(&mut self) -> Result<()> {
        let n = self.sites.len();
        chain::left_orthonormalize(&mut self.sites, n - 1)?;
        let nrm = self.sites[n - 1].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(nrm > 1e-300) || !nrm.is_finite() {
            return Err(TomoError::Degenerate(format!("state norm {nrm:e}")));
        }
        self.sites[n - 1].mapv_inplace(|z| z / nrm);
        Ok(())
    }

    pub fn to_dense(&self) -> Array1<C64> {
        chain::to_vector(&self.sites)
    }

    pub fn compress(&self, dmax: usize, options: &CompressOptions) -> Result<(Mps, CompressionReport)> {
        let (s, r) = compress::compress_chain(&self.sites, dmax, options, SweepKind::SingleSite)?;
        Ok((Mps { sites: s }, r))
    }

    pub fn compress_two_site(&self, dmax: usize, options: &CompressOptions) -> Result<(Mps, CompressionReport)> {
        let (s, r) = compress::compress_chain(&self.sites, dmax, options, SweepKind::TwoSite)?;
        Ok((Mps { sites: s }, r))
    }

    pub(crate) fn from_sites_unchecked(sites: Vec<Site>) -> Self {
        Mps { sites }
    }
}
