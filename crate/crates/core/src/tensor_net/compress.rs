//! Variational compression onto chains of bounded bond dimension by
//! alternating least squares over single (or pairs of) sites.
//!
//! Sweeps keep the approximation in mixed canonical form, so after each
//! update the distance to the target is `|T|^2 - |B_center|^2`.

use ndarray::{s, Axis};
use serde::{Deserialize, Serialize};

use super::chain::{self, Site};
use super::product::{self, Env, Product};
use crate::error::{Result, TomoError};
use crate::linalg::{qr_thin, svd_thin, truncation_rank};

/// Singular values below this fraction of the largest are treated as zero.
pub const SVD_CUTOFF: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressOptions {
    /// Convergence threshold on the change of the squared error between
    /// consecutive sweeps, relative to the squared norm of the target.
    pub tol: f64,
    /// Maximum number of sweeps; one sweep is a single pass in one direction.
    pub max_sweeps: usize,
    /// Relative squared error above which the compression is rejected.
    pub abort_threshold: Option<f64>,
}

impl Default for CompressOptions {
    fn default() -> Self {
        CompressOptions {
            tol: 1e-8,
            max_sweeps: 50,
            abort_threshold: Some(1e-2),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompressionReport {
    /// `|target - result|^2`, when the target norm is known.
    pub final_norm_error: Option<f64>,
    /// `|target|^2`, when known.
    pub target_norm_sq: Option<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// Squared error after each sweep (or `-|B|^2` when the target norm is
    /// unknown, which differs from the error by a constant).
    pub per_sweep_errors: Vec<f64>,
    /// Squared error after every site update, same convention.
    pub per_update_errors: Vec<f64>,
}

impl CompressionReport {
    pub fn relative_error(&self) -> Option<f64> {
        match (self.final_norm_error, self.target_norm_sq) {
            (Some(e), Some(t)) if t > 0.0 => Some(e / t),
            (Some(e), _) => Some(e),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    SingleSite,
    TwoSite,
}

/// Parameters of one variational run.
#[derive(Clone, Debug)]
pub struct SweepPlan {
    pub dmax: usize,
    pub options: CompressOptions,
    /// Number of leading two-site sweeps; the rest are single-site.
    pub two_site_sweeps: usize,
}

struct Oriented {
    product: Product,
}

/// Runs sweeps on `init`, which must be left-orthonormal with its norm in
/// the last site. Returns the result (mixed canonical with the center at one
/// end) and the report.
pub fn sweep(
    target: &Product,
    init: Vec<Site>,
    target_norm_sq: Option<f64>,
    plan: &SweepPlan,
) -> Result<(Vec<Site>, CompressionReport)> {
    target.validate()?;
    let n = target.n_sites();
    if init.len() != n {
        return Err(TomoError::Dimension("initial guess has wrong site count".into()));
    }
    if plan.dmax == 0 {
        return Err(TomoError::Parameter("bond dimension cap must be at least 1".into()));
    }
    let orientations = [
        Oriented {
            product: target.clone(),
        },
        Oriented {
            product: target.reversed(),
        },
    ];
    let mut report = CompressionReport {
        target_norm_sq,
        ..Default::default()
    };

    // `cur` indexes the orientation in which `bra` is left-orthonormal with
    // the center at its last site; `envs` are that orientation's left
    // environments.
    let mut cur = 0usize;
    let mut bra = init;
    let mut envs = product::left_envs(&orientations[0].product, &bra, n);
    let overlap0 = envs[n].mat[[0, 0]];
    let bra_sq = product::frob_sq(&bra[n - 1]);
    let mut prev = match target_norm_sq {
        Some(t) => t - 2.0 * overlap0.re + bra_sq,
        None => f64::INFINITY,
    };
    let scale = target_norm_sq.unwrap_or(bra_sq).abs().max(f64::MIN_POSITIVE);

    for s in 0..plan.options.max_sweeps.max(1) {
        let next = 1 - cur;
        let o = &orientations[next];
        let mut rbra = chain::reversed(&bra);
        let kind = if s < plan.two_site_sweeps && n > 1 {
            SweepKind::TwoSite
        } else {
            SweepKind::SingleSite
        };
        let (new_envs, norms) = half_sweep(&o.product, &mut rbra, &envs, kind, plan.dmax)?;
        for nb in &norms {
            report.per_update_errors.push(match target_norm_sq {
                Some(t) => t - nb,
                None => -nb,
            });
        }
        let last = *norms.last().expect("at least one update");
        let err = match target_norm_sq {
            Some(t) => t - last,
            None => -last,
        };
        report.per_sweep_errors.push(err);
        report.sweeps = s + 1;
        bra = rbra;
        envs = new_envs;
        cur = next;
        let delta = (prev - err).abs();
        prev = err;
        let final_kind = kind == SweepKind::SingleSite || plan.two_site_sweeps == usize::MAX;
        if final_kind && delta <= plan.options.tol * scale {
            report.converged = true;
            break;
        }
    }
    if cur == 1 {
        bra = chain::reversed(&bra);
    }
    if let Some(t) = target_norm_sq {
        let e = (t - product::frob_sq(center_site(&bra, cur))).max(0.0);
        report.final_norm_error = Some(e);
        if let Some(th) = plan.options.abort_threshold {
            let rel = if t > 0.0 { e / t } else { e };
            if rel > th {
                return Err(TomoError::CompressionFailure {
                    relative_error: rel,
                    threshold: th,
                });
            }
        }
    }
    Ok((bra, report))
}

fn center_site(sites: &[Site], orientation: usize) -> &Site {
    if orientation == 0 {
        &sites[sites.len() - 1]
    } else {
        &sites[0]
    }
}

/// One left-to-right pass in the given orientation. `other` holds the
/// environments of the opposite orientation, so the right environment of
/// site `k` is `other[n - 1 - k]`. Returns the new left environments and the
/// squared center norm after each update.
fn half_sweep(
    p: &Product,
    bra: &mut [Site],
    other: &[Env],
    kind: SweepKind,
    dmax: usize,
) -> Result<(Vec<Env>, Vec<f64>)> {
    let n = bra.len();
    let joins = product::joins(p);
    let mut envs: Vec<Env> = Vec::with_capacity(n);
    envs.push(Env::boundary(p.layers().len()));
    let mut norms = Vec::with_capacity(n);
    match kind {
        SweepKind::SingleSite => {
            for k in 0..n {
                let t = product::absorb(&envs[k], &product::column(p, k), joins);
                let b = product::solve_site(&t, &other[n - 1 - k]);
                norms.push(product::frob_sq(&b));
                if k + 1 < n {
                    let (l, ph, r) = b.dim();
                    let m = b.into_shape_with_order((l * ph, r)).expect("layout");
                    let (q, _) = qr_thin(m.view())?;
                    let kept = q.dim().1;
                    let q3 = q.into_shape_with_order((l, ph, kept)).expect("layout");
                    envs.push(product::close(&t, &q3));
                    bra[k] = q3;
                } else {
                    bra[k] = b;
                }
            }
        }
        SweepKind::TwoSite => {
            for k in 0..n - 1 {
                let t1 = product::absorb(&envs[k], &product::column(p, k), joins);
                let folded = product::fold_phys(&t1);
                let t2 = product::absorb(&folded, &product::column(p, k + 1), joins);
                let theta = product::solve_site(&t2, &other[n - 2 - k]); // [(x f1), f2, x'']
                let (x, f1) = (t1.data.dim().0, t1.data.dim().2);
                let (_, f2, xr) = theta.dim();
                let m = theta.into_shape_with_order((x * f1, f2 * xr)).expect("layout");
                let svd = svd_thin(m.view())?;
                let keep = truncation_rank(&svd.s, dmax, SVD_CUTOFF);
                let u = svd
                    .u
                    .slice(s![.., ..keep])
                    .to_owned()
                    .into_shape_with_order((x, f1, keep))
                    .expect("layout");
                let mut svt = svd.vt.slice(s![..keep, ..]).to_owned();
                for (i, mut row) in svt.axis_iter_mut(Axis(0)).enumerate() {
                    let sv = svd.s[i];
                    row.mapv_inplace(|z| z * sv);
                }
                norms.push(svd.s.iter().take(keep).map(|v| v * v).sum());
                envs.push(product::close(&t1, &u));
                bra[k] = u;
                bra[k + 1] = svt.into_shape_with_order((keep, f2, xr)).expect("layout");
            }
        }
    }
    Ok((envs, norms))
}

/// Left-orthonormal initial guess for an explicit target: right-normalize
/// then truncate left to right.
pub fn svd_initial_guess(target: &[Site], dmax: usize) -> Result<Vec<Site>> {
    let mut g = target.to_vec();
    chain::right_orthonormalize(&mut g, 0)?;
    chain::truncate_sweep(&mut g, dmax, SVD_CUTOFF)?;
    Ok(g)
}

/// Compresses an explicit chain to bond dimension `dmax`.
pub fn compress_chain(
    target: &[Site],
    dmax: usize,
    options: &CompressOptions,
    kind: SweepKind,
) -> Result<(Vec<Site>, CompressionReport)> {
    chain::validate(target)?;
    if dmax == 0 {
        return Err(TomoError::Parameter("bond dimension cap must be at least 1".into()));
    }
    let tns = chain::norm_sq(target);
    let init = svd_initial_guess(target, dmax)?;
    let plan = SweepPlan {
        dmax,
        options: options.clone(),
        two_site_sweeps: if kind == SweepKind::TwoSite { usize::MAX } else { 0 },
    };
    sweep(&Product::single(target.to_vec()), init, Some(tns), &plan)
}

/// Compresses a lazy product starting from `warm`, an approximation with
/// the right physical dimension. Bonds below the cap are first grown by a
/// two-site sweep.
pub fn compress_product(
    target: &Product,
    warm: &[Site],
    dmax: usize,
    target_norm_sq: Option<f64>,
    options: &CompressOptions,
) -> Result<(Vec<Site>, CompressionReport)> {
    let n = target.n_sites();
    let mut init = warm.to_vec();
    chain::left_orthonormalize(&mut init, n - 1)?;
    let bonds = chain::bond_dims(&init);
    let caps = reachable_bonds(target, dmax);
    let grow = bonds.iter().zip(&caps).any(|(b, c)| b < c);
    let plan = SweepPlan {
        dmax,
        options: options.clone(),
        two_site_sweeps: usize::from(grow),
    };
    sweep(target, init, target_norm_sq, &plan)
}

/// Largest useful bond at each cut: the cap, the explicit product bond, and
/// the full Hilbert-space bound from either end.
pub fn reachable_bonds(target: &Product, dmax: usize) -> Vec<usize> {
    let n = target.n_sites();
    let p = target.phys_dim();
    let explicit = target.explicit_bonds();
    (0..=n)
        .map(|c| {
            let side = c.min(n - c) as u32;
            let hilbert = p.checked_pow(side).unwrap_or(usize::MAX);
            dmax.min(explicit[c]).min(hilbert)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use num_complex::Complex64 as C64;
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

    fn dist_sq(a: &[Site], b: &[Site]) -> f64 {
        let va = chain::to_vector(a);
        let vb = chain::to_vector(b);
        va.iter().zip(&vb).map(|(x, y)| (x - y).norm_sqr()).sum()
    }

    #[test]
    fn lossless_compression_is_exact() {
        let t = random_chain(5, 4, 2, 11);
        let (c, rep) = compress_chain(&t, 2, &CompressOptions::default(), SweepKind::SingleSite).unwrap();
        assert!(rep.final_norm_error.unwrap() < 1e-10 * chain::norm_sq(&t));
        assert!(dist_sq(&t, &c) < 1e-10 * chain::norm_sq(&t));
    }

    #[test]
    fn reported_error_matches_true_distance() {
        let t = random_chain(5, 2, 4, 12);
        let opts = CompressOptions {
            abort_threshold: None,
            ..Default::default()
        };
        for kind in [SweepKind::SingleSite, SweepKind::TwoSite] {
            let (c, rep) = compress_chain(&t, 2, &opts, kind).unwrap();
            assert!(chain::max_bond(&c) <= 2);
            let d = dist_sq(&t, &c);
            assert!((d - rep.final_norm_error.unwrap()).abs() < 1e-8 * chain::norm_sq(&t), "{kind:?}");
        }
    }

    #[test]
    fn sweep_errors_do_not_increase() {
        let t = random_chain(6, 4, 5, 13);
        let opts = CompressOptions {
            abort_threshold: None,
            tol: 1e-14,
            max_sweeps: 10,
        };
        let (_, rep) = compress_chain(&t, 3, &opts, SweepKind::SingleSite).unwrap();
        for w in rep.per_update_errors.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * chain::norm_sq(&t));
        }
    }

    #[test]
    fn lazy_product_compression_matches_explicit() {
        let r = random_chain(4, 4, 2, 14);
        let rho = random_chain(4, 4, 2, 15);
        let p = Product::sandwich(r, rho.clone());
        let explicit = p.materialize();
        let tns = chain::norm_sq(&explicit);
        let opts = CompressOptions {
            abort_threshold: None,
            tol: 1e-12,
            max_sweeps: 30,
        };
        let (lazy, rep) = compress_product(&p, &rho, 16, Some(tns), &opts).unwrap();
        assert!(dist_sq(&lazy, &explicit) < 1e-9 * tns, "{:?}", rep.per_sweep_errors);
    }

    #[test]
    fn abort_threshold_triggers() {
        let t = random_chain(6, 4, 6, 16);
        let opts = CompressOptions {
            abort_threshold: Some(1e-6),
            ..Default::default()
        };
        let r = compress_chain(&t, 1, &opts, SweepKind::SingleSite);
        assert!(matches!(r, Err(TomoError::CompressionFailure { .. })));
    }
}
