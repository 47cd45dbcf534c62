//! Exact outcome distributions and seeded multinomial sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TomoError};
use crate::povm::{setting_probabilities, MeasurementRecord, PovmKind, PovmSet, SettingLabel, SettingRecord, Shots};
use crate::tensor_net::{Mpo, Mps};

/// Negative probabilities down to this value are rounding noise and are
/// clamped to zero; anything lower marks an invalid state.
pub const NEGATIVE_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct SettingDistribution {
    pub label: SettingLabel,
    pub probabilities: Vec<f64>,
}

/// A state to measure.
#[derive(Clone, Copy, Debug)]
pub enum State<'a> {
    Mixed(&'a Mpo),
    Pure(&'a Mps),
}

pub fn exact_distributions(state: State<'_>, povm: &PovmSet) -> Result<Vec<SettingDistribution>> {
    let owned;
    let rho = match state {
        State::Mixed(m) => m,
        State::Pure(psi) => {
            owned = Mpo::from_mps(psi)?;
            &owned
        }
    };
    let probs = setting_probabilities(povm, rho)?;
    povm.settings()
        .into_iter()
        .zip(probs)
        .map(|(label, mut p)| {
            for (j, x) in p.iter_mut().enumerate() {
                if *x < -NEGATIVE_TOLERANCE || !x.is_finite() {
                    return Err(TomoError::InvalidState(format!(
                        "outcome {j} of {label:?} has probability {x:e}"
                    )));
                }
                *x = x.max(0.0);
            }
            let sum: f64 = p.iter().sum();
            if !(sum > 0.0) {
                return Err(TomoError::InvalidState(format!("{label:?} has no probability mass")));
            }
            p.iter_mut().for_each(|x| *x /= sum);
            Ok(SettingDistribution { label, probabilities: p })
        })
        .collect()
}

/// Draws `m` outcomes per setting by inverse-CDF sampling. Setting `i` uses
/// its own stream of a ChaCha8 generator seeded with `seed`, so records are
/// reproducible and independent of setting order. `Shots::Exact` stores
/// the probabilities themselves.
pub fn sample(dists: &[SettingDistribution], povm: &PovmSet, shots: Shots, seed: u64) -> Result<MeasurementRecord> {
    let labels = povm.settings();
    if labels.len() != dists.len() || labels.iter().zip(dists).any(|(l, d)| l != &d.label) {
        return Err(TomoError::Record("distributions do not match the POVM settings".into()));
    }
    let settings = dists
        .iter()
        .enumerate()
        .map(|(i, d)| match shots {
            Shots::Exact => SettingRecord {
                label: d.label.clone(),
                shots: None,
                counts: None,
                probabilities: Some(d.probabilities.clone()),
            },
            Shots::Finite(m) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let mut cdf = Vec::with_capacity(d.probabilities.len());
                let mut acc = 0.0;
                for &p in &d.probabilities {
                    acc += p;
                    cdf.push(acc);
                }
                let last = cdf.len() - 1;
                let mut counts = vec![0u64; cdf.len()];
                for _ in 0..m {
                    let u: f64 = rng.random::<f64>() * acc;
                    let j = cdf.iter().position(|&c| u < c).unwrap_or(last);
                    counts[j] += 1;
                }
                SettingRecord {
                    label: d.label.clone(),
                    shots: Some(m),
                    counts: Some(counts),
                    probabilities: None,
                }
            }
        })
        .collect();
    Ok(MeasurementRecord {
        n_sites: povm.n_sites(),
        block_len: povm.block_len(),
        povm: if povm.ghz.is_some() { PovmKind::LocalGhz } else { PovmKind::Local },
        shots,
        settings,
    })
}

/// `M`, the total number of shots; `None` for exact records, which are
/// weighted by their setting count instead.
pub fn total_shots(record: &MeasurementRecord) -> Option<u64> {
    record.total_shots()
}

/// `3^R m (N - R + 1) + K m` for `K` global settings.
pub fn expected_total_shots(povm: &PovmSet, m: u64) -> u64 {
    povm.n_settings() as u64 * m
}
