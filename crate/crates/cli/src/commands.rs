use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context;
use mpo_tomo::metrics;
use mpo_tomo::mle::{self, Estimate, Mode, Outcome, ReconstructionConfig};
use mpo_tomo::povm::{MeasurementRecord, PovmKind, PovmSet};
use mpo_tomo::sim::{self, State};
use mpo_tomo::states;
use mpo_tomo::tensor_net::io::{self, TensorNetwork};
use mpo_tomo::tensor_net::Mpo;
use serde::Serialize;

use crate::manifest::{ExperimentManifest, Kind};

/// Bad or missing arguments.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn need<T>(v: Option<T>, flag: &str) -> anyhow::Result<T> {
    v.ok_or_else(|| UsageError(format!("missing required flag --{flag}")).into())
}

const GROUND_SWEEPS: usize = 10;
const THERMAL_FIT_DMAX: usize = 16;
const GROUND_DMAX_CAP: usize = 32;

#[derive(Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: Option<u64>,
    parameters: &'a ExperimentManifest,
    #[serde(skip_serializing_if = "Option::is_none")]
    details: Option<serde_json::Value>,
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("provenance.json")
}

fn write_sidecar(
    out: &Path,
    command: &'static str,
    params: &ExperimentManifest,
    details: Option<serde_json::Value>,
) -> anyhow::Result<()> {
    let p = Provenance {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed: params.seed,
        parameters: params,
        details,
    };
    std::fs::write(sidecar_path(out), serde_json::to_string_pretty(&p)? + "\n")?;
    Ok(())
}

fn read_state(path: &Path) -> anyhow::Result<TensorNetwork> {
    io::read(path).with_context(|| format!("reading {}", path.display()))
}

pub fn generate(p: &ExperimentManifest) -> anyhow::Result<i32> {
    let kind = need(p.kind, "kind")?;
    let n = need(p.n, "n")?;
    let out = need(p.output.clone(), "out")?;
    let seed = p.seed.unwrap_or(0);
    let mut details = serde_json::Map::new();
    let net = match kind {
        Kind::Ghz => {
            let phi = p.phi.unwrap_or(std::f64::consts::FRAC_PI_2);
            TensorNetwork::Mps(states::ghz_mps(n, phi)?)
        }
        Kind::Thermal => {
            let beta = need(p.beta, "beta")?;
            let h = states::random_hamiltonian(n, seed)?;
            let th = states::thermal_state_dense(&h, beta, p.dmax.unwrap_or(THERMAL_FIT_DMAX))?;
            let hp = out.with_extension("hamiltonian.json");
            h.write(&hp)?;
            details.insert("fit_error".into(), th.fit_error.into());
            details.insert("hamiltonian".into(), hp.display().to_string().into());
            TensorNetwork::Mpo(th.mpo)
        }
        Kind::Ground => {
            let h = states::random_hamiltonian(n, seed)?;
            let dmax = p.dmax.unwrap_or_else(|| (1usize << (n / 2).min(10)).min(GROUND_DMAX_CAP));
            let gs = states::ground_state_search(&h, dmax, GROUND_SWEEPS, seed)?;
            let hp = out.with_extension("hamiltonian.json");
            h.write(&hp)?;
            details.insert("energy".into(), gs.energy.into());
            details.insert("hamiltonian".into(), hp.display().to_string().into());
            TensorNetwork::Mps(gs.mps)
        }
    };
    io::write(&out, &net)?;
    write_sidecar(&out, "generate", p, Some(details.into()))?;
    println!("wrote {} ({} sites)", out.display(), net.n_sites());
    Ok(0)
}

pub fn measure(p: &ExperimentManifest) -> anyhow::Result<i32> {
    let input = need(p.input.clone(), "in")?;
    let out = need(p.output.clone(), "out")?;
    let shots = need(p.m, "m")?;
    let r = p.r.unwrap_or(2);
    let net = read_state(&input)?;
    let n = net.n_sites();
    if let Some(want) = p.n {
        if want != n {
            return Err(UsageError(format!("--n {want} does not match the {n}-site state")).into());
        }
    }
    let povm = match p.povm.unwrap_or(PovmKind::Local) {
        PovmKind::Local => PovmSet::local(n, r)?,
        PovmKind::LocalGhz => PovmSet::local_with_ghz(n, r)?,
    };
    let state = match &net {
        TensorNetwork::Mps(m) => State::Pure(m),
        TensorNetwork::Mpo(m) => State::Mixed(m),
    };
    let dists = sim::exact_distributions(state, &povm)?;
    let record = sim::sample(&dists, &povm, shots, p.seed.unwrap_or(0))?;
    record.write(&out)?;
    write_sidecar(&out, "measure", p, None)?;
    println!("wrote {} ({} settings)", out.display(), record.settings.len());
    Ok(0)
}

pub fn trace_path(out: &Path) -> PathBuf {
    out.with_extension("trace.csv")
}

pub fn reconstruct(p: &ExperimentManifest) -> anyhow::Result<i32> {
    let input = need(p.input.clone(), "in")?;
    let out = need(p.output.clone(), "out")?;
    let record = MeasurementRecord::read(&input).with_context(|| format!("reading {}", input.display()))?;
    let povm = record.povm_set()?;
    let defaults = ReconstructionConfig::default();
    let cfg = ReconstructionConfig {
        dmax: p.dmax.unwrap_or(defaults.dmax),
        max_iterations: p.iterations.unwrap_or(defaults.max_iterations),
        dilution: p.epsilon,
        seed: p.seed.unwrap_or(0),
        mode: if p.pure.unwrap_or(false) { Mode::Pure } else { Mode::Mixed },
        ..defaults
    };
    let rec = mle::reconstruct(&record, &povm, &cfg)?;
    let net = match &rec.estimate {
        Estimate::Mixed(m) => TensorNetwork::Mpo(m.clone()),
        Estimate::Pure(m) => TensorNetwork::Mps(m.clone()),
    };
    io::write(&out, &net)?;
    std::fs::write(trace_path(&out), rec.trace.to_csv())?;
    let (status, code) = match rec.outcome {
        Outcome::Converged => ("converged".to_string(), 0),
        Outcome::BudgetExhausted => ("iteration budget exhausted".to_string(), 2),
        Outcome::Aborted {
            relative_error,
            threshold,
        } => (
            format!("compression aborted: relative error {relative_error:.3e} above {threshold:.3e}"),
            3,
        ),
    };
    let final_ll = rec
        .trace
        .records
        .last()
        .map_or(rec.trace.initial_log_likelihood, |r| r.log_likelihood);
    let details = serde_json::json!({
        "status": status,
        "iterations": rec.trace.len(),
        "log_likelihood": final_ll,
    });
    write_sidecar(&out, "reconstruct", p, Some(details))?;
    println!("{status} after {} iterations, log-likelihood {final_ll:.10e}", rec.trace.len());
    Ok(code)
}

#[derive(Debug, Serialize)]
pub struct EvaluationReport {
    pub hs_distance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<f64>,
    /// `pure-pure` or `pure-mixed`; absent when both states are mixed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity_kind: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_likelihood: Option<f64>,
}

fn as_mpo(net: &TensorNetwork) -> mpo_tomo::Result<Mpo> {
    match net {
        TensorNetwork::Mpo(m) => Ok(m.clone()),
        TensorNetwork::Mps(m) => Mpo::from_mps(m),
    }
}

pub fn evaluate_states(
    truth: &TensorNetwork,
    est: &TensorNetwork,
    record: Option<&MeasurementRecord>,
) -> anyhow::Result<EvaluationReport> {
    if truth.n_sites() != est.n_sites() {
        return Err(UsageError(format!(
            "truth has {} sites, estimate has {}",
            truth.n_sites(),
            est.n_sites()
        ))
        .into());
    }
    let rho_est = as_mpo(est)?;
    let hs_distance = metrics::hs_distance(&as_mpo(truth)?, &rho_est)?;
    let (fidelity, fidelity_kind) = match (truth, est) {
        (TensorNetwork::Mps(a), TensorNetwork::Mps(b)) => (Some(metrics::fidelity_pure_pure(a, b)?), Some("pure-pure")),
        (TensorNetwork::Mps(a), TensorNetwork::Mpo(b)) | (TensorNetwork::Mpo(b), TensorNetwork::Mps(a)) => {
            (Some(metrics::fidelity_pure_mixed(a, b)?), Some("pure-mixed"))
        }
        (TensorNetwork::Mpo(_), TensorNetwork::Mpo(_)) => (None, None),
    };
    let log_likelihood = match record {
        Some(r) => {
            let povm = r.povm_set()?;
            Some(mle::log_likelihood(r, &povm, &rho_est, 0.0)?)
        }
        None => None,
    };
    Ok(EvaluationReport {
        hs_distance,
        fidelity,
        fidelity_kind,
        log_likelihood,
    })
}

pub fn evaluate(p: &ExperimentManifest) -> anyhow::Result<i32> {
    let truth_path = need(p.truth.clone(), "truth")?;
    let est_path = need(p.input.clone(), "in")?;
    let truth = read_state(&truth_path)?;
    let est = read_state(&est_path)?;
    let record = match &p.counts {
        Some(c) => Some(MeasurementRecord::read(c).with_context(|| format!("reading {}", c.display()))?),
        None => None,
    };
    let report = evaluate_states(&truth, &est, record.as_ref())?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    if let Some(out) = &p.output {
        std::fs::write(out, &text)?;
    }
    print!("{text}");
    Ok(0)
}
