//! Maximum-likelihood reconstruction by the fixed-point map
//! `rho -> N[R(rho) rho R(rho)]` and its pure-state analogue
//! `psi -> R(psi) psi / |R(psi) psi|`.

use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::povm::{
    build_r_from, dilute, log_likelihood_from, setting_probabilities, MeasurementRecord, PovmSet, RBuildOptions,
    RConstruction, ROperatorBuild, DEFAULT_PROB_FLOOR,
};
use crate::tensor_net::compress::{self, CompressOptions, CompressionReport, SweepKind};
use crate::tensor_net::product::Product;
use crate::tensor_net::{Mpo, Mps};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Mixed,
    Pure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionConfig {
    pub dmax: usize,
    pub max_iterations: usize,
    /// `eps` of the diluted map `(1 + eps R)/(1 + eps)`; off when `None`.
    pub dilution: Option<f64>,
    pub prob_floor: f64,
    /// Stop when `|dL| / |L|` drops below this.
    pub loglik_tol: f64,
    /// Seeds the initial state of pure-mode runs.
    pub seed: u64,
    pub mode: Mode,
    pub compress: CompressOptions,
    /// Products whose explicit bond dimension stays at or below this are
    /// formed explicitly and compressed from an SVD initial guess; larger
    /// ones are compressed directly from their factors, warm-started at the
    /// current iterate.
    pub explicit_bond_limit: usize,
    /// Sweep budget per step on the factorized path.
    pub lazy_sweeps: usize,
    pub r_construction: RConstruction,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        ReconstructionConfig {
            dmax: 16,
            max_iterations: 1000,
            dilution: None,
            prob_floor: DEFAULT_PROB_FLOOR,
            loglik_tol: 1e-10,
            seed: 0,
            mode: Mode::Mixed,
            compress: CompressOptions::default(),
            explicit_bond_limit: 128,
            lazy_sweeps: 2,
            r_construction: RConstruction::OperatorValued,
        }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dmax == 0 {
            return Err(TomoError::Parameter("bond dimension cap must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(TomoError::Parameter("iteration budget must be at least 1".into()));
        }
        if let Some(e) = self.dilution {
            if !(e > 0.0) || !e.is_finite() {
                return Err(TomoError::Parameter(format!("dilution must be positive, got {e}")));
            }
        }
        if !(self.prob_floor >= 0.0) {
            return Err(TomoError::Parameter("probability floor must be non-negative".into()));
        }
        Ok(())
    }

    fn r_options(&self) -> RBuildOptions {
        RBuildOptions {
            prob_floor: self.prob_floor,
            construction: self.r_construction,
            compress: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProductPath {
    Explicit,
    Factorized,
}

#[derive(Clone, Debug)]
pub struct StepReport {
    /// Log-likelihood of the input state.
    pub log_likelihood: f64,
    pub compression: CompressionReport,
    pub path: ProductPath,
    pub r_bond: usize,
    pub clamped_outcomes: usize,
}

fn values(record: &MeasurementRecord) -> Vec<Vec<f64>> {
    record.settings.iter().map(|s| s.values()).collect()
}

/// `sum_i n_i log max(p_i, floor)` at `rho`.
pub fn log_likelihood(record: &MeasurementRecord, povm: &PovmSet, rho: &Mpo, floor: f64) -> Result<f64> {
    let probs = setting_probabilities(povm, rho)?;
    Ok(log_likelihood_from(&values(record), &probs, floor))
}

pub fn log_likelihood_pure(record: &MeasurementRecord, povm: &PovmSet, psi: &Mps, floor: f64) -> Result<f64> {
    log_likelihood(record, povm, &Mpo::from_mps(psi)?, floor)
}

fn r_operator(
    record: &MeasurementRecord,
    povm: &PovmSet,
    probs: &[Vec<f64>],
    cfg: &ReconstructionConfig,
) -> Result<ROperatorBuild> {
    let build = build_r_from(povm, record, probs, &cfg.r_options())?;
    match cfg.dilution {
        Some(eps) => dilute(&build, eps),
        None => Ok(build),
    }
}

/// Compresses a product either explicitly or from its factors.
fn compress_target(
    target: Product,
    warm: &[crate::tensor_net::chain::Site],
    cfg: &ReconstructionConfig,
) -> Result<(Vec<crate::tensor_net::chain::Site>, CompressionReport, ProductPath)> {
    let explicit = target.explicit_bonds().into_iter().max().unwrap_or(1);
    if explicit <= cfg.explicit_bond_limit {
        let sites = target.materialize();
        let (s, r) = compress::compress_chain(&sites, cfg.dmax, &cfg.compress, SweepKind::SingleSite)?;
        Ok((s, r, ProductPath::Explicit))
    } else {
        let opts = CompressOptions {
            max_sweeps: cfg.lazy_sweeps.max(1),
            ..cfg.compress.clone()
        };
        let (s, r) = compress::compress_product(&target, warm, cfg.dmax, None, &opts)?;
        Ok((s, r, ProductPath::Factorized))
    }
}

fn mixed_step_with(
    rho: &Mpo,
    probs: &[Vec<f64>],
    record: &MeasurementRecord,
    povm: &PovmSet,
    cfg: &ReconstructionConfig,
) -> Result<(Mpo, StepReport)> {
    let ll = log_likelihood_from(&values(record), probs, cfg.prob_floor);
    let r = r_operator(record, povm, probs, cfg)?;
    let target = Product::sandwich(r.mpo.sites().to_vec(), rho.sites().to_vec());
    let (sites, report, path) = compress_target(target, rho.sites(), cfg)?;
    let next = Mpo::pauli(sites)?.normalize()?;
    Ok((
        next,
        StepReport {
            log_likelihood: ll,
            compression: report,
            path,
            r_bond: r.mpo.max_bond(),
            clamped_outcomes: r.clamped_outcomes,
        },
    ))
}

/// One step `rho -> N[R rho R]` compressed to `cfg.dmax`.
pub fn mixed_step(
    rho: &Mpo,
    record: &MeasurementRecord,
    povm: &PovmSet,
    cfg: &ReconstructionConfig,
) -> Result<(Mpo, StepReport)> {
    let probs = setting_probabilities(povm, rho)?;
    mixed_step_with(rho, &probs, record, povm, cfg)
}

fn pure_step_with(
    psi: &Mps,
    probs: &[Vec<f64>],
    record: &MeasurementRecord,
    povm: &PovmSet,
    cfg: &ReconstructionConfig,
) -> Result<(Mps, StepReport)> {
    let ll = log_likelihood_from(&values(record), probs, cfg.prob_floor);
    let r = r_operator(record, povm, probs, cfg)?;
    let target = Product::action(r.mpo.sites().to_vec(), psi.sites().to_vec());
    let (sites, report, path) = compress_target(target, psi.sites(), cfg)?;
    let mut next = Mps::new(sites)?;
    next.normalize()?;
    Ok((
        next,
        StepReport {
            log_likelihood: ll,
            compression: report,
            path,
            r_bond: r.mpo.max_bond(),
            clamped_outcomes: r.clamped_outcomes,
        },
    ))
}

/// One step `psi -> R psi / |R psi|` compressed to `cfg.dmax`.
pub fn pure_step(
    psi: &Mps,
    record: &MeasurementRecord,
    povm: &PovmSet,
    cfg: &ReconstructionConfig,
) -> Result<(Mps, StepReport)> {
    let probs = setting_probabilities(povm, &Mpo::from_mps(psi)?)?;
    pure_step_with(psi, &probs, record, povm, cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Log-likelihood of the iterate produced by this iteration.
    pub log_likelihood: f64,
    /// Relative squared compression error, when the target norm is known.
    pub compression_error: Option<f64>,
    /// `|tr rho - 1|` (mixed) or `|<psi|psi> - 1|` (pure) of the new iterate.
    pub trace_deviation: f64,
    pub wall_time_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub initial_log_likelihood: f64,
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn log_likelihoods(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.log_likelihood).collect()
    }

    /// Comma-separated export with a header row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,log_likelihood,compression_error,trace_deviation,ms\n");
        for r in &self.records {
            let ce = r.compression_error.map_or("nan".to_string(), |e| format!("{e:e}"));
            let _ = writeln!(
                s,
                "{},{:.17e},{},{:e},{:.3}",
                r.iter, r.log_likelihood, ce, r.trace_deviation, r.wall_time_ms
            );
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Converged,
    BudgetExhausted,
    /// Compression exceeded its error threshold; the estimate is the last
    /// accepted iterate.
    Aborted { relative_error: f64, threshold: f64 },
}

#[derive(Clone, Debug)]
pub enum Estimate {
    Mixed(Mpo),
    Pure(Mps),
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub estimate: Estimate,
    pub trace: IterationTrace,
    pub outcome: Outcome,
}

/// Random product state used to start pure-mode runs.
pub fn pure_initial_state(n: usize, seed: u64) -> Result<Mps> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mps::random_product(n, &mut rng)
}

fn converged(prev: f64, cur: f64, tol: f64) -> bool {
    let d = (cur - prev).abs();
    d == 0.0 || d < tol * cur.abs()
}

/// Iterates from the completely mixed state (mixed mode) or a seeded random
/// product state (pure mode) until the relative log-likelihood change falls
/// below `cfg.loglik_tol` or the budget runs out.
pub fn reconstruct(record: &MeasurementRecord, povm: &PovmSet, cfg: &ReconstructionConfig) -> Result<Reconstruction> {
    cfg.validate()?;
    record.validate(povm)?;
    let n = povm.n_sites();
    let vals = values(record);
    match cfg.mode {
        Mode::Mixed => {
            let init = Mpo::completely_mixed(n)?;
            run(init, record, povm, cfg, &vals, |s| Ok(s.clone()), mixed_step_with, |s| {
                (s.trace().re - 1.0).abs()
            })
            .map(|(s, trace, outcome)| Reconstruction {
                estimate: Estimate::Mixed(s),
                trace,
                outcome,
            })
        }
        Mode::Pure => {
            let init = pure_initial_state(n, cfg.seed)?;
            run(init, record, povm, cfg, &vals, Mpo::from_mps, pure_step_with, |s| {
                (s.norm_sq() - 1.0).abs()
            })
            .map(|(s, trace, outcome)| Reconstruction {
                estimate: Estimate::Pure(s),
                trace,
                outcome,
            })
        }
    }
}

type StepFn<S> = fn(&S, &[Vec<f64>], &MeasurementRecord, &PovmSet, &ReconstructionConfig) -> Result<(S, StepReport)>;

#[allow(clippy::too_many_arguments)]
fn run<S>(
    init: S,
    record: &MeasurementRecord,
    povm: &PovmSet,
    cfg: &ReconstructionConfig,
    vals: &[Vec<f64>],
    as_mpo: impl Fn(&S) -> Result<Mpo>,
    step: StepFn<S>,
    deviation: impl Fn(&S) -> f64,
) -> Result<(S, IterationTrace, Outcome)> {
    let mut state = init;
    let mut probs = setting_probabilities(povm, &as_mpo(&state)?)?;
    let mut ll = log_likelihood_from(vals, &probs, cfg.prob_floor);
    let mut trace = IterationTrace {
        initial_log_likelihood: ll,
        records: Vec::new(),
    };
    for it in 0..cfg.max_iterations {
        let t0 = Instant::now();
        let (next, report) = match step(&state, &probs, record, povm, cfg) {
            Ok(x) => x,
            Err(TomoError::CompressionFailure {
                relative_error,
                threshold,
            }) => {
                return Ok((
                    state,
                    trace,
                    Outcome::Aborted {
                        relative_error,
                        threshold,
                    },
                ))
            }
            Err(e) => return Err(e),
        };
        let next_probs = setting_probabilities(povm, &as_mpo(&next)?)?;
        let next_ll = log_likelihood_from(vals, &next_probs, cfg.prob_floor);
        trace.records.push(IterationRecord {
            iter: it + 1,
            log_likelihood: next_ll,
            compression_error: report.compression.relative_error(),
            trace_deviation: deviation(&next),
            wall_time_ms: t0.elapsed().as_secs_f64() * 1e3,
        });
        let done = converged(ll, next_ll, cfg.loglik_tol);
        state = next;
        probs = next_probs;
        ll = next_ll;
        if done {
            return Ok((state, trace, Outcome::Converged));
        }
    }
    Ok((state, trace, Outcome::BudgetExhausted))
}
