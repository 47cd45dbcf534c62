use ndarray::{Array2, Axis};
use num_complex::Complex64 as C64;

use super::setting::{outcome_sign, PovmSet, SettingLabel};
use crate::error::{Result, TomoError};
use crate::tensor_net::pauli::{FRAC_1_SQRT_2, SQRT_2};
use crate::tensor_net::Mpo;

/// Trace vectors: `left[k]` contracts sites `0..k` with the trace weight,
/// `right[k]` contracts sites `k..N`.
fn trace_vectors(rho: &Mpo) -> (Vec<Vec<C64>>, Vec<Vec<C64>>) {
    let sites = rho.sites();
    let n = sites.len();
    let w = C64::new(SQRT_2, 0.0);
    let mut left = vec![vec![C64::new(1.0, 0.0)]];
    for a in sites {
        let prev = left.last().expect("non-empty");
        let (l, _, r) = a.dim();
        let mut next = vec![C64::new(0.0, 0.0); r];
        for i in 0..l {
            for (j, x) in next.iter_mut().enumerate() {
                *x += prev[i] * a[[i, 0, j]] * w;
            }
        }
        left.push(next);
    }
    let mut right = vec![Vec::new(); n + 1];
    right[n] = vec![C64::new(1.0, 0.0)];
    for k in (0..n).rev() {
        let a = &sites[k];
        let (l, _, r) = a.dim();
        let mut v = vec![C64::new(0.0, 0.0); l];
        for (i, x) in v.iter_mut().enumerate() {
            for j in 0..r {
                *x += a[[i, 0, j]] * w * right[k + 1][j];
            }
        }
        right[k] = v;
    }
    (left, right)
}

/// Pauli coefficients `C[a_1..a_R] = tr[P^(a) rho_block]` of the reduced
/// operator on the block starting at `k`, first index most significant.
fn block_coefficients(rho: &Mpo, left: &[C64], right: &[C64], k: usize, r: usize) -> Vec<C64> {
    let sites = rho.sites();
    let mut v = Array2::from_shape_vec((1, left.len()), left.to_vec()).expect("row vector");
    for a in &sites[k..k + r] {
        let (l, p, rr) = a.dim();
        let a = a.as_standard_layout();
        let mat = a
            .view()
            .into_shape_with_order((l, p * rr))
            .expect("contiguous site");
        let prod = v.dot(&mat);
        let rows = prod.nrows() * p;
        v = prod.into_shape_with_order((rows, rr)).expect("contiguous product");
    }
    v.axis_iter(Axis(0))
        .map(|row| row.iter().zip(right).map(|(x, y)| x * y).sum())
        .collect()
}

/// `tr[rho O]` for a product of Pauli matrices.
fn pauli_string_expectation(rho: &Mpo, letters: &[usize]) -> C64 {
    let weights: Vec<[C64; 4]> = letters
        .iter()
        .map(|&b| {
            let mut w = [C64::new(0.0, 0.0); 4];
            w[b] = C64::new(SQRT_2, 0.0);
            w
        })
        .collect();
    rho.contract_weights(&weights)
}

/// Outcome probabilities `tr[rho Pi]` for every setting of `povm`, in
/// setting order. No clamping is applied; values carry the real part of
/// the contraction.
pub fn setting_probabilities(povm: &PovmSet, rho: &Mpo) -> Result<Vec<Vec<f64>>> {
    let n = povm.n_sites();
    if rho.n_sites() != n {
        return Err(TomoError::Dimension(format!(
            "state has {} sites, POVM {}",
            rho.n_sites(),
            n
        )));
    }
    let r = povm.block_len();
    let (left, right) = trace_vectors(rho);
    let bases = povm.local.bases();
    let scale = FRAC_1_SQRT_2.powi(r as i32);
    let mut out = Vec::with_capacity(povm.n_settings());
    for k in 0..povm.local.n_blocks() {
        let c = block_coefficients(rho, &left[k], &right[k + r], k, r);
        for b in &bases {
            let letters: Vec<usize> = b.iter().map(|p| p.index()).collect();
            let probs = (0..1usize << r)
                .map(|j| {
                    // Only the identity and the measured letter contribute per site.
                    let mut acc = C64::new(0.0, 0.0);
                    for mask in 0..1usize << r {
                        let mut idx = 0;
                        let mut sign = 1.0;
                        for i in 0..r {
                            idx <<= 2;
                            if (mask >> (r - 1 - i)) & 1 == 1 {
                                idx |= letters[i];
                                sign *= outcome_sign(j, i, r);
                            }
                        }
                        acc += c[idx] * sign;
                    }
                    acc.re * scale
                })
                .collect();
            out.push(probs);
        }
    }
    if let Some(g) = &povm.ghz {
        let tr = rho.trace().re;
        for label in g.settings() {
            if let SettingLabel::Global { observable } = label {
                let letters: Vec<usize> = observable.paulis(n).iter().map(|p| p.index()).collect();
                let e = pauli_string_expectation(rho, &letters).re;
                out.push(vec![(tr + e) / 2.0, (tr - e) / 2.0]);
            }
        }
    }
    Ok(out)
}

/// `sum_i n_i log max(p_i, floor)`; `-inf` when `floor = 0` and an observed
/// outcome has zero probability.
pub fn log_likelihood_from(values: &[Vec<f64>], probs: &[Vec<f64>], floor: f64) -> f64 {
    let mut ll = 0.0;
    for (vs, ps) in values.iter().zip(probs) {
        for (&n, &p) in vs.iter().zip(ps) {
            if n > 0.0 {
                let q = p.max(floor);
                if q <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                ll += n * q.ln();
            }
        }
    }
    ll
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_net::Mps;

    #[test]
    fn mixed_state_gives_uniform_distributions() {
        let povm = PovmSet::local_with_ghz(4, 2).unwrap();
        let rho = Mpo::completely_mixed(4).unwrap();
        for p in setting_probabilities(&povm, &rho).unwrap() {
            let u = 1.0 / p.len() as f64;
            assert!(p.iter().all(|&x| (x - u).abs() < 1e-14));
        }
    }

    #[test]
    fn basis_state_z_setting_is_deterministic() {
        let povm = PovmSet::local(3, 2).unwrap();
        let psi = Mps::basis_state(&[0, 1, 0], 2).unwrap();
        let rho = Mpo::from_mps(&psi).unwrap();
        let probs = setting_probabilities(&povm, &rho).unwrap();
        let labels = povm.settings();
        let zz0 = labels
            .iter()
            .position(|l| l == &SettingLabel::Local { block_start: 0, basis: "ZZ".into() })
            .unwrap();
        // |01> on block 0: outcome (+1, -1) is index 1.
        assert!((probs[zz0][1] - 1.0).abs() < 1e-14);
        let zz1 = labels
            .iter()
            .position(|l| l == &SettingLabel::Local { block_start: 1, basis: "ZZ".into() })
            .unwrap();
        assert!((probs[zz1][2] - 1.0).abs() < 1e-14);
    }
}
