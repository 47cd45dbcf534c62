//! Test-state factories: GHZ-type states, random nearest-neighbour
//! Hamiltonians, their thermal states and variational ground states.

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::Path;

use ndarray::{Array1, Array2, Array3, Array4};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::linalg::{identity, kron, lowest_eigenpair, lq_thin, qr_thin};
use crate::oracle::{self, DenseOperator, DEFAULT_DENSE_LIMIT};
use crate::povm::PauliSum;
use crate::tensor_net::chain::{self, Site};
use crate::tensor_net::pauli::basis_matrix;
use crate::tensor_net::{Mpo, Mps, Pauli};

/// `(|0..01..1> + e^{i phi} |1..10..0>) / sqrt 2` with bond dimension 2.
pub fn ghz_mps(n: usize, phi: f64) -> Result<Mps> {
    if n == 0 || n % 2 == 1 {
        return Err(TomoError::Parameter(format!("GHZ-type states need an even site count, got {n}")));
    }
    let half = n / 2;
    let phase = C64::from_polar(1.0, phi);
    let one = C64::new(1.0, 0.0);
    let mut sites = Vec::with_capacity(n);
    for k in 0..n {
        let (l, r) = (if k == 0 { 1 } else { 2 }, if k == n - 1 { 1 } else { 2 });
        let mut a = Array3::<C64>::zeros((l, 2, r));
        // Branch 0 reads 0 on the first half, branch 1 reads 1 there.
        let bit = |branch: usize| usize::from((k < half) == (branch == 1));
        for branch in 0..2 {
            let li = if l == 1 { 0 } else { branch };
            let ri = if r == 1 { 0 } else { branch };
            let mut v = one;
            if k == 0 {
                v = if branch == 0 { C64::new(FRAC_1_SQRT_2, 0.0) } else { phase * FRAC_1_SQRT_2 };
            }
            a[[li, bit(branch), ri]] = v;
        }
        sites.push(a);
    }
    Mps::new(sites)
}

/// `H = sum_i r_{i,i+1}` with Hermitian `4 x 4` terms.
#[derive(Clone, Debug, PartialEq)]
pub struct NearestNeighbourHamiltonian {
    pub n: usize,
    pub seed: Option<u64>,
    pub terms: Vec<Array2<C64>>,
}

#[derive(Serialize, Deserialize)]
struct HamiltonianFile {
    seed: Option<u64>,
    n: usize,
    /// Per term: 4 rows of 4 `[re, im]` pairs.
    terms: Vec<Vec<Vec<[f64; 2]>>>,
}

impl NearestNeighbourHamiltonian {
    pub fn new(terms: Vec<Array2<C64>>) -> Result<Self> {
        if terms.is_empty() {
            return Err(TomoError::Parameter("a nearest-neighbour Hamiltonian needs at least two sites".into()));
        }
        for (i, t) in terms.iter().enumerate() {
            if t.dim() != (4, 4) {
                return Err(TomoError::Dimension(format!("term {i} is not 4x4")));
            }
            if crate::linalg::hermiticity_defect(t.view()) > 1e-12 {
                return Err(TomoError::Parameter(format!("term {i} is not Hermitian")));
            }
        }
        Ok(NearestNeighbourHamiltonian {
            n: terms.len() + 1,
            seed: None,
            terms,
        })
    }

    /// MPO in the normalized Pauli basis.
    pub fn to_mpo(&self) -> Result<Mpo> {
        let mut sum = PauliSum::new(self.n);
        for (i, t) in self.terms.iter().enumerate() {
            // c[a, b] = tr[(sigma_a x sigma_b) r] / 4
            let mut coeffs = vec![C64::new(0.0, 0.0); 16];
            for a in Pauli::ALL {
                for b in Pauli::ALL {
                    let s = kron(a.matrix().view(), b.matrix().view());
                    let c: C64 = (&s.t() * t).sum() / 4.0;
                    coeffs[a.index() * 4 + b.index()] = c;
                }
            }
            sum.add_block(i, 2, &coeffs)?;
        }
        sum.to_mpo()
    }

    pub fn to_dense(&self) -> Result<Array2<C64>> {
        if self.n > DEFAULT_DENSE_LIMIT {
            return Err(TomoError::Capability(format!(
                "{} sites exceed the dense limit {DEFAULT_DENSE_LIMIT}",
                self.n
            )));
        }
        let dim = 1usize << self.n;
        let mut h = Array2::<C64>::zeros((dim, dim));
        for (i, t) in self.terms.iter().enumerate() {
            let left = identity(1 << i);
            let right = identity(1 << (self.n - i - 2));
            h = h + kron(kron(left.view(), t.view()).view(), right.view());
        }
        Ok(h)
    }

    pub fn to_json(&self) -> Result<String> {
        let f = HamiltonianFile {
            seed: self.seed,
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|t| {
                    t.rows()
                        .into_iter()
                        .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
                        .collect()
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&f)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: HamiltonianFile = serde_json::from_str(s)?;
        let terms = f
            .terms
            .iter()
            .map(|t| {
                if t.len() != 4 || t.iter().any(|r| r.len() != 4) {
                    return Err(TomoError::Format("terms must be 4x4".into()));
                }
                Ok(Array2::from_shape_fn((4, 4), |(i, j)| C64::new(t[i][j][0], t[i][j][1])))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut h = NearestNeighbourHamiltonian::new(terms)?;
        if h.n != f.n {
            return Err(TomoError::Format(format!("{} terms for {} sites", h.terms.len(), f.n)));
        }
        h.seed = f.seed;
        Ok(h)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        NearestNeighbourHamiltonian::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Random Hermitian terms whose independent entries have real and
/// imaginary parts drawn from the standard normal distribution (diagonal
/// entries are real).
pub fn random_hamiltonian(n: usize, seed: u64) -> Result<NearestNeighbourHamiltonian> {
    if n < 2 {
        return Err(TomoError::Parameter(format!("need at least two sites, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms = (0..n - 1)
        .map(|_| {
            let mut t = Array2::<C64>::zeros((4, 4));
            for i in 0..4 {
                t[[i, i]] = C64::new(StandardNormal.sample(&mut rng), 0.0);
                for j in i + 1..4 {
                    let z = C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
                    t[[i, j]] = z;
                    t[[j, i]] = z.conj();
                }
            }
            t
        })
        .collect();
    let mut h = NearestNeighbourHamiltonian::new(terms)?;
    h.seed = Some(seed);
    Ok(h)
}

#[derive(Clone, Debug)]
pub struct ThermalState {
    pub mpo: Mpo,
    /// Hilbert-Schmidt distance between the fitted MPO and the exact state.
    pub fit_error: f64,
}

/// `e^{-beta H} / Z` computed densely, then factorized with bonds capped at
/// `dmax_fit`.
pub fn thermal_state_dense(h: &NearestNeighbourHamiltonian, beta: f64, dmax_fit: usize) -> Result<ThermalState> {
    let hd = h.to_dense()?;
    let rho = oracle::thermal_matrix(&hd, beta)?;
    let (mpo, fit_error) = oracle::mpo_from_dense_capped(&DenseOperator::new(rho)?, dmax_fit, 1e-13)?;
    Ok(ThermalState { mpo, fit_error })
}

#[derive(Clone, Debug)]
pub struct GroundState {
    pub mps: Mps,
    pub energy: f64,
    /// Energy after every local update.
    pub energies: Vec<f64>,
}

/// Site operator `W[a, s, t, b]` from Pauli coefficients.
fn physical_site(w: &Site) -> Array4<C64> {
    let (l, _, r) = w.dim();
    let p: Vec<Array2<C64>> = (0..4).map(basis_matrix).collect();
    Array4::from_shape_fn((l, 2, 2, r), |(a, s, t, b)| (0..4).map(|al| w[[a, al, b]] * p[al][[s, t]]).sum())
}

/// `L'[b', a', b] = sum conj(A[x, s, b']) L[x, a, y] W[a, s, t, a'] A[y, t, b]`.
fn grow_left(env: &Array3<C64>, a: &Site, w: &Array4<C64>) -> Array3<C64> {
    let (dl, d, dr) = a.dim();
    let (wl, _, _, wr) = w.dim();
    let mut out = Array3::<C64>::zeros((dr, wr, dr));
    for x in 0..dl {
        for y in 0..dl {
            for aa in 0..wl {
                let e = env[[x, aa, y]];
                if e == C64::new(0.0, 0.0) {
                    continue;
                }
                for s in 0..d {
                    for t in 0..d {
                        for a2 in 0..wr {
                            let wv = w[[aa, s, t, a2]];
                            if wv == C64::new(0.0, 0.0) {
                                continue;
                            }
                            let f = e * wv;
                            for b1 in 0..dr {
                                let c = a[[x, s, b1]].conj() * f;
                                for b2 in 0..dr {
                                    out[[b1, a2, b2]] += c * a[[y, t, b2]];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn grow_right(env: &Array3<C64>, a: &Site, w: &Array4<C64>) -> Array3<C64> {
    let (dl, d, dr) = a.dim();
    let (wl, _, _, wr) = w.dim();
    let mut out = Array3::<C64>::zeros((dl, wl, dl));
    for x in 0..dr {
        for y in 0..dr {
            for a2 in 0..wr {
                let e = env[[x, a2, y]];
                if e == C64::new(0.0, 0.0) {
                    continue;
                }
                for s in 0..d {
                    for t in 0..d {
                        for aa in 0..wl {
                            let wv = w[[aa, s, t, a2]];
                            if wv == C64::new(0.0, 0.0) {
                                continue;
                            }
                            let f = e * wv;
                            for b1 in 0..dl {
                                let c = a[[b1, s, x]].conj() * f;
                                for b2 in 0..dl {
                                    out[[b1, aa, b2]] += c * a[[b2, t, y]];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Effective operator on one site tensor.
fn apply_local(l: &Array3<C64>, w: &Array4<C64>, r: &Array3<C64>, v: &Array1<C64>, shape: (usize, usize, usize)) -> Array1<C64> {
    let (dl, d, dr) = shape;
    let (wl, _, _, wr) = w.dim();
    let x = v.view().into_shape_with_order(shape).expect("site shape");
    let mut out = Array3::<C64>::zeros(shape);
    // tmp[b1, a, t, y] = sum_y0 L[b1, a, y0] x[y0, t, y]
    let mut tmp = Array4::<C64>::zeros((dl, wl, d, dr));
    for b1 in 0..dl {
        for a in 0..wl {
            for y0 in 0..dl {
                let e = l[[b1, a, y0]];
                if e == C64::new(0.0, 0.0) {
                    continue;
                }
                for t in 0..d {
                    for y in 0..dr {
                        tmp[[b1, a, t, y]] += e * x[[y0, t, y]];
                    }
                }
            }
        }
    }
    // tmp2[b1, s, a2, y] = sum_{a,t} W[a, s, t, a2] tmp[b1, a, t, y]
    let mut tmp2 = Array4::<C64>::zeros((dl, d, wr, dr));
    for a in 0..wl {
        for s in 0..d {
            for t in 0..d {
                for a2 in 0..wr {
                    let wv = w[[a, s, t, a2]];
                    if wv == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for b1 in 0..dl {
                        for y in 0..dr {
                            tmp2[[b1, s, a2, y]] += wv * tmp[[b1, a, t, y]];
                        }
                    }
                }
            }
        }
    }
    // out[b1, s, b2] = sum_{a2, y} tmp2[b1, s, a2, y] R[b2, a2, y]
    for b1 in 0..dl {
        for s in 0..d {
            for a2 in 0..wr {
                for y in 0..dr {
                    let c = tmp2[[b1, s, a2, y]];
                    if c == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for b2 in 0..dr {
                        out[[b1, s, b2]] += c * r[[b2, a2, y]];
                    }
                }
            }
        }
    }
    out.into_shape_with_order(dl * d * dr).expect("flat")
}

/// Single-site variational ground-state search with bond cap `dmax`,
/// starting from a seeded random MPS. One sweep is a left-to-right pass
/// followed by a right-to-left pass.
pub fn ground_state_search(h: &NearestNeighbourHamiltonian, dmax: usize, sweeps: usize, seed: u64) -> Result<GroundState> {
    if dmax == 0 {
        return Err(TomoError::Parameter("bond dimension cap must be at least 1".into()));
    }
    let n = h.n;
    let hmpo = h.to_mpo()?;
    let ws: Vec<Array4<C64>> = hmpo.sites().iter().map(physical_site).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sites = Mps::random(n, 2, dmax, &mut rng)?.into_sites();
    chain::right_orthonormalize(&mut sites, 0)?;
    let nrm = chain::norm_sq(&sites).sqrt();
    sites[0].mapv_inplace(|z| z / nrm);

    let boundary = Array3::from_elem((1, 1, 1), C64::new(1.0, 0.0));
    let mut right: Vec<Array3<C64>> = vec![boundary.clone(); n + 1];
    for k in (1..n).rev() {
        right[k] = grow_right(&right[k + 1], &sites[k], &ws[k]);
    }
    let mut left: Vec<Array3<C64>> = vec![boundary; n + 1];
    let mut energies = Vec::new();
    let mut energy = f64::INFINITY;

    let solve = |k: usize, l: &Array3<C64>, r: &Array3<C64>, site: &Site| -> Result<(f64, Site)> {
        let shape = site.dim();
        let dim = shape.0 * shape.1 * shape.2;
        let start = site.as_standard_layout().into_owned().into_shape_with_order(dim).expect("flat");
        let (e, v) = lowest_eigenpair(dim, |x| apply_local(l, &ws[k], r, x, shape), &start, 60, 1e-12)
            .map_err(|err| TomoError::Numerical {
                site: k,
                msg: err.to_string(),
            })?;
        if !e.is_finite() {
            return Err(TomoError::Numerical {
                site: k,
                msg: "non-finite eigenvalue".into(),
            });
        }
        Ok((e, v.into_shape_with_order(shape).expect("site shape")))
    };

    for _ in 0..sweeps.max(1) {
        for k in 0..n {
            let (e, b) = solve(k, &left[k], &right[k + 1], &sites[k])?;
            energy = e;
            energies.push(e);
            if k + 1 < n {
                let (dl, d, dr) = b.dim();
                let (q, rm) = qr_thin(b.into_shape_with_order((dl * d, dr)).expect("layout").view())?;
                let kept = q.ncols();
                sites[k] = q.as_standard_layout().into_owned().into_shape_with_order((dl, d, kept)).expect("layout");
                sites[k + 1] = chain::mul_left(&rm, &sites[k + 1]);
                left[k + 1] = grow_left(&left[k], &sites[k], &ws[k]);
            } else {
                sites[k] = b;
            }
        }
        for k in (0..n).rev() {
            let (e, b) = solve(k, &left[k], &right[k + 1], &sites[k])?;
            energy = e;
            energies.push(e);
            if k > 0 {
                let (dl, d, dr) = b.dim();
                let (lm, q) = lq_thin(b.into_shape_with_order((dl, d * dr)).expect("layout").view())?;
                let kept = q.nrows();
                sites[k] = q.as_standard_layout().into_owned().into_shape_with_order((kept, d, dr)).expect("layout");
                sites[k - 1] = chain::mul_right(&sites[k - 1], &lm);
                right[k] = grow_right(&right[k + 1], &sites[k], &ws[k]);
            } else {
                sites[k] = b;
            }
        }
    }
    let mut mps = Mps::new(sites)?;
    mps.normalize()?;
    Ok(GroundState { mps, energy, energies })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ghz_amplitudes() {
        let psi = ghz_mps(4, std::f64::consts::FRAC_PI_2).unwrap();
        let v = psi.to_dense();
        assert!((v[0b0011] - C64::new(FRAC_1_SQRT_2, 0.0)).norm() < 1e-14);
        assert!((v[0b1100] - C64::new(0.0, FRAC_1_SQRT_2)).norm() < 1e-14);
        let others: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0;
        assert!(others.abs() < 1e-14);
        assert_eq!(psi.max_bond(), 2);
    }

    #[test]
    fn odd_ghz_rejected() {
        assert!(ghz_mps(3, 0.0).is_err());
    }

    #[test]
    fn hamiltonian_mpo_matches_dense() {
        let h = random_hamiltonian(4, 11).unwrap();
        let dense = h.to_dense().unwrap();
        let got = oracle::densify_mpo(&h.to_mpo().unwrap()).unwrap();
        assert!(crate::linalg::max_abs_diff(got.matrix.view(), dense.view()) < 1e-12);
    }

    #[test]
    fn hamiltonian_file_round_trip() {
        let h = random_hamiltonian(3, 2).unwrap();
        let back = NearestNeighbourHamiltonian::from_json(&h.to_json().unwrap()).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn ground_state_matches_dense_minimum() {
        let h = random_hamiltonian(4, 3).unwrap();
        let gs = ground_state_search(&h, 4, 4, 1).unwrap();
        let (w, _) = crate::linalg::eigh(h.to_dense().unwrap().view()).unwrap();
        assert!((gs.energy - w[0]).abs() < 1e-8, "{} vs {}", gs.energy, w[0]);
    }
}
