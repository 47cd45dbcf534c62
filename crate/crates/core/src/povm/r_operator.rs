use num_complex::Complex64 as C64;

use super::construction::{operator_valued_mpo, BlockTerm, PauliSum};
use super::probability::setting_probabilities;
use super::record::MeasurementRecord;
use super::setting::{projector, GlobalObservable, PovmSet, SettingLabel};
use crate::error::{Result, TomoError};
use crate::tensor_net::pauli::SQRT_2;
use crate::tensor_net::{Mpo, Pauli};

/// Default probability floor.
pub const DEFAULT_PROB_FLOOR: f64 = 1e-12;

/// Singular values below this fraction of the largest are dropped when R is
/// compressed after construction.
pub const R_COMPRESSION_CUTOFF: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RConstruction {
    /// Operator-valued matrices over the six single-qubit projectors.
    #[default]
    OperatorValued,
    /// Prefix-sharing chain over Pauli strings.
    PauliStrings,
}

#[derive(Clone, Copy, Debug)]
pub struct RBuildOptions {
    pub prob_floor: f64,
    pub construction: RConstruction,
    /// Remove numerically redundant bond directions after construction.
    pub compress: bool,
}

impl Default for RBuildOptions {
    fn default() -> Self {
        RBuildOptions {
            prob_floor: DEFAULT_PROB_FLOOR,
            construction: RConstruction::OperatorValued,
            compress: true,
        }
    }
}

/// The operator `R(rho) = sum_i n_i / (M p_i) Pi_i` as an MPO.
#[derive(Clone, Debug)]
pub struct ROperatorBuild {
    pub mpo: Mpo,
    pub dilution_epsilon: Option<f64>,
    pub clamp_floor: f64,
    /// Observed outcomes whose probability was not positive before clamping.
    pub clamped_outcomes: usize,
    /// Largest bond dimension straight out of the construction.
    pub precompression_bond: usize,
}

/// Per-element weights `n_i / (M max(p_i, floor))`, zero for unobserved
/// outcomes, plus the number of clamped observed outcomes.
pub fn element_weights(record: &MeasurementRecord, probs: &[Vec<f64>], floor: f64) -> Result<(Vec<Vec<f64>>, usize)> {
    let total = record.weight_total();
    if !(total > 0.0) {
        return Err(TomoError::Record("all counts are zero".into()));
    }
    if probs.len() != record.settings.len() {
        return Err(TomoError::Record("probability list does not match the record".into()));
    }
    let mut clamped = 0;
    let mut out = Vec::with_capacity(probs.len());
    for (s, ps) in record.settings.iter().zip(probs) {
        let vs = s.values();
        let mut ws = Vec::with_capacity(vs.len());
        for (&n, &p) in vs.iter().zip(ps) {
            if n <= 0.0 {
                ws.push(0.0);
                continue;
            }
            if p <= 0.0 {
                clamped += 1;
            }
            let q = p.max(floor);
            if !(q > 0.0) {
                return Err(TomoError::Numerical {
                    site: 0,
                    msg: format!("observed outcome has probability {p:e} and no floor is set"),
                });
            }
            ws.push(n / (total * q));
        }
        out.push(ws);
    }
    Ok((out, clamped))
}

/// The six projectors `(1 +- sigma_b)/2` ordered `X+, X-, Y+, Y-, Z+, Z-`.
fn projector_set() -> Vec<ndarray::Array2<C64>> {
    Pauli::NONTRIVIAL
        .iter()
        .flat_map(|&b| [projector(b, 1.0), projector(b, -1.0)])
        .collect()
}

fn local_r_mpo(povm: &PovmSet, weights: &[Vec<f64>], construction: RConstruction) -> Result<Mpo> {
    let n = povm.n_sites();
    let r = povm.block_len();
    let labels = povm.local.settings();
    match construction {
        RConstruction::OperatorValued => {
            let width = 6usize.pow(r as u32);
            let mut blocks: Vec<BlockTerm> = (0..povm.local.n_blocks())
                .map(|k| BlockTerm {
                    start: k,
                    coeffs: vec![C64::new(0.0, 0.0); width],
                })
                .collect();
            for (label, ws) in labels.iter().zip(weights) {
                let SettingLabel::Local { block_start, .. } = label else {
                    continue;
                };
                let bases = label.bases()?;
                for (j, &w) in ws.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let mut idx = 0;
                    for (i, b) in bases.iter().enumerate() {
                        let bit = (j >> (r - 1 - i)) & 1;
                        idx = idx * 6 + 2 * (b.index() - 1) + bit;
                    }
                    blocks[*block_start].coeffs[idx] += w;
                }
            }
            operator_valued_mpo(n, r, &projector_set(), &blocks)
        }
        RConstruction::PauliStrings => {
            let mut sum = PauliSum::new(n);
            for (label, ws) in labels.iter().zip(weights) {
                let SettingLabel::Local { block_start, .. } = label else {
                    continue;
                };
                let bases = label.bases()?;
                let mut coeffs = vec![C64::new(0.0, 0.0); 4usize.pow(r as u32)];
                for (j, &w) in ws.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    // Expand prod_i (1 + s_i sigma_{b_i}) / 2 over subsets.
                    for mask in 0..1usize << r {
                        let mut idx = 0;
                        let mut c = w;
                        for (i, b) in bases.iter().enumerate() {
                            idx <<= 2;
                            c *= 0.5;
                            if (mask >> (r - 1 - i)) & 1 == 1 {
                                idx |= b.index();
                                if (j >> (r - 1 - i)) & 1 == 1 {
                                    c = -c;
                                }
                            }
                        }
                        coeffs[idx] += c;
                    }
                }
                sum.add_block(*block_start, r, &coeffs)?;
            }
            sum.to_mpo()
        }
    }
}

fn finish(mpo: Mpo, compress: bool, floor: f64, clamped: usize) -> Result<ROperatorBuild> {
    let precompression_bond = mpo.max_bond();
    let mpo = if compress {
        mpo.compress_lossless(R_COMPRESSION_CUTOFF)?
    } else {
        mpo
    };
    Ok(ROperatorBuild {
        mpo,
        dilution_epsilon: None,
        clamp_floor: floor,
        clamped_outcomes: clamped,
        precompression_bond,
    })
}

/// `R_1 = sum over local elements`, from precomputed probabilities.
pub fn build_local_r_from(
    povm: &PovmSet,
    record: &MeasurementRecord,
    probs: &[Vec<f64>],
    opts: &RBuildOptions,
) -> Result<ROperatorBuild> {
    let (weights, clamped) = element_weights(record, probs, opts.prob_floor)?;
    let mpo = local_r_mpo(povm, &weights, opts.construction)?;
    finish(mpo, opts.compress, opts.prob_floor, clamped)
}

pub fn build_local_r(
    povm: &PovmSet,
    record: &MeasurementRecord,
    rho: &Mpo,
    opts: &RBuildOptions,
) -> Result<ROperatorBuild> {
    record.validate(povm)?;
    let probs = setting_probabilities(povm, rho)?;
    build_local_r_from(povm, record, &probs, opts)
}

/// `a 1 + c_1 X^N + c_2 Y X^(N-1)` as the sum of two bond-one terms.
fn global_r_mpo(n: usize, a: f64, c1: f64, c2: f64) -> Result<Mpo> {
    let ident = Mpo::identity(n)?.scaled(C64::new(a, 0.0));
    let mut sites = Vec::with_capacity(n);
    for k in 0..n {
        let mut s = ndarray::Array3::<C64>::zeros((1, 4, 1));
        if k == 0 {
            s[[0, Pauli::X.index(), 0]] = C64::new(SQRT_2 * c1, 0.0);
            s[[0, Pauli::Y.index(), 0]] = C64::new(SQRT_2 * c2, 0.0);
        } else {
            s[[0, Pauli::X.index(), 0]] = C64::new(SQRT_2, 0.0);
        }
        sites.push(s);
    }
    ident.add(&Mpo::pauli(sites)?)
}

/// `R_2 = sum over the global elements`, from precomputed probabilities.
/// The result has bond dimension exactly two.
pub fn build_global_r_from(
    povm: &PovmSet,
    record: &MeasurementRecord,
    probs: &[Vec<f64>],
    floor: f64,
) -> Result<ROperatorBuild> {
    if povm.ghz.is_none() {
        return Err(TomoError::Record("POVM has no global elements".into()));
    }
    let (weights, clamped) = element_weights(record, probs, floor)?;
    let (mut a, mut c1, mut c2) = (0.0, 0.0, 0.0);
    for (s, ws) in record.settings.iter().zip(&weights) {
        if let SettingLabel::Global { observable } = s.label {
            // (1 + O)/2 and (1 - O)/2.
            a += 0.5 * (ws[0] + ws[1]);
            let c = 0.5 * (ws[0] - ws[1]);
            match observable {
                GlobalObservable::XAll => c1 += c,
                GlobalObservable::YXRest => c2 += c,
            }
        }
    }
    let mpo = global_r_mpo(povm.n_sites(), a, c1, c2)?;
    finish(mpo, false, floor, clamped)
}

pub fn build_global_r(povm: &PovmSet, record: &MeasurementRecord, rho: &Mpo, floor: f64) -> Result<ROperatorBuild> {
    record.validate(povm)?;
    let probs = setting_probabilities(povm, rho)?;
    build_global_r_from(povm, record, &probs, floor)
}

/// Full `R = R_1 + R_2`; with global elements the bond dimension is that of
/// `R_1` plus two.
pub fn build_r_from(
    povm: &PovmSet,
    record: &MeasurementRecord,
    probs: &[Vec<f64>],
    opts: &RBuildOptions,
) -> Result<ROperatorBuild> {
    let local = build_local_r_from(povm, record, probs, opts)?;
    if povm.ghz.is_none() {
        return Ok(local);
    }
    let global = build_global_r_from(povm, record, probs, opts.prob_floor)?;
    Ok(ROperatorBuild {
        mpo: local.mpo.add(&global.mpo)?,
        dilution_epsilon: None,
        clamp_floor: opts.prob_floor,
        clamped_outcomes: local.clamped_outcomes + global.clamped_outcomes,
        precompression_bond: local.precompression_bond + global.precompression_bond,
    })
}

pub fn build_r(povm: &PovmSet, record: &MeasurementRecord, rho: &Mpo, opts: &RBuildOptions) -> Result<ROperatorBuild> {
    record.validate(povm)?;
    let probs = setting_probabilities(povm, rho)?;
    build_r_from(povm, record, &probs, opts)
}

/// `(1 + eps R) / (1 + eps)`; the bond dimension grows by one.
pub fn dilute(build: &ROperatorBuild, eps: f64) -> Result<ROperatorBuild> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(TomoError::Parameter(format!("dilution must be positive and finite, got {eps}")));
    }
    let n = build.mpo.n_sites();
    let ident = Mpo::identity(n)?.scaled(C64::new(1.0 / (1.0 + eps), 0.0));
    let scaled = build.mpo.scaled(C64::new(eps / (1.0 + eps), 0.0));
    Ok(ROperatorBuild {
        mpo: ident.add(&scaled)?,
        dilution_epsilon: Some(eps),
        ..build.clone()
    })
}
