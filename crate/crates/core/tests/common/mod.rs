#![allow(dead_code)]

use mpo_tomo::oracle::{self, DenseOperator};
use mpo_tomo::povm::{MeasurementRecord, PovmKind, PovmSet, SettingRecord, Shots};
use mpo_tomo::sim::{self, State};
use mpo_tomo::tensor_net::{Mpo, Mps};
use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Full-rank random density operator `X X / tr[X X]` with `X` Hermitian of
/// bond dimension `d`.
pub fn random_state(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Mpo {
    let x = Mpo::random_hermitian(n, d, rng).unwrap();
    x.multiply(&x).unwrap().normalize().unwrap()
}

pub fn random_mps(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Mps {
    let mut psi = Mps::random(n, 2, d, rng).unwrap();
    psi.normalize().unwrap();
    psi
}

pub fn dense(m: &Mpo) -> Array2<C64> {
    oracle::densify_mpo(m).unwrap().matrix
}

pub fn dense_op(m: &Mpo) -> DenseOperator {
    oracle::densify_mpo(m).unwrap()
}

pub fn max_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    mpo_tomo::linalg::max_abs_diff(a.view(), b.view())
}

/// Uniformly random integer counts in `0..max` for every element.
pub fn random_counts(povm: &PovmSet, max: u64, rng: &mut ChaCha8Rng) -> MeasurementRecord {
    let settings = povm
        .settings()
        .into_iter()
        .map(|label| {
            let counts: Vec<u64> = (0..label.n_outcomes()).map(|_| rng.random_range(0..max)).collect();
            let mut counts = counts;
            if counts.iter().all(|&c| c == 0) {
                counts[0] = 1;
            }
            SettingRecord {
                label,
                shots: None,
                counts: Some(counts),
                probabilities: None,
            }
        })
        .collect::<Vec<_>>();
    // Per-setting totals differ, so the record declares no common shot count.
    let mut rec = MeasurementRecord {
        n_sites: povm.n_sites(),
        block_len: povm.block_len(),
        povm: kind(povm),
        shots: Shots::Finite(1),
        settings,
    };
    for s in &mut rec.settings {
        s.shots = Some(s.counts.as_ref().unwrap().iter().sum());
    }
    rec
}

pub fn kind(povm: &PovmSet) -> PovmKind {
    if povm.ghz.is_some() {
        PovmKind::LocalGhz
    } else {
        PovmKind::Local
    }
}

pub fn exact_record(state: State<'_>, povm: &PovmSet) -> MeasurementRecord {
    let d = sim::exact_distributions(state, povm).unwrap();
    sim::sample(&d, povm, Shots::Exact, 0).unwrap()
}

pub fn sampled_record(state: State<'_>, povm: &PovmSet, m: u64, seed: u64) -> MeasurementRecord {
    let d = sim::exact_distributions(state, povm).unwrap();
    sim::sample(&d, povm, Shots::Finite(m), seed).unwrap()
}

/// `sum_i n_i log p_i` evaluated directly from dense element matrices.
pub fn dense_ll(rho: &Array2<C64>, record: &MeasurementRecord, povm: &PovmSet) -> f64 {
    let els = oracle::element_matrices(povm).unwrap();
    let mut ll = 0.0;
    for (s, es) in record.settings.iter().zip(&els) {
        for (n, e) in s.values().iter().zip(es) {
            if *n > 0.0 {
                let p = rho.dot(e).diag().iter().sum::<C64>().re;
                ll += n * p.ln();
            }
        }
    }
    ll
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(a: &Array2<C64>) -> f64 {
    mpo_tomo::linalg::eigh(a.view()).unwrap().0[0]
}
