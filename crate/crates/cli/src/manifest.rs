use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use mpo_tomo::povm::{PovmKind, Shots};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Thermal,
    Ground,
    Ghz,
}

/// Experiment parameters. Every field is optional so that a manifest file
/// and command-line flags can be layered.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<Kind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Shots>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dmax: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pure: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub povm: Option<PovmKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<PathBuf>,
}

impl ExperimentManifest {
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overridden_by(self, over: ExperimentManifest) -> Self {
        ExperimentManifest {
            kind: over.kind.or(self.kind),
            n: over.n.or(self.n),
            r: over.r.or(self.r),
            m: over.m.or(self.m),
            beta: over.beta.or(self.beta),
            phi: over.phi.or(self.phi),
            dmax: over.dmax.or(self.dmax),
            iterations: over.iterations.or(self.iterations),
            epsilon: over.epsilon.or(self.epsilon),
            pure: over.pure.or(self.pure),
            seed: over.seed.or(self.seed),
            povm: over.povm.or(self.povm),
            input: over.input.or(self.input),
            output: over.output.or(self.output),
            truth: over.truth.or(self.truth),
            counts: over.counts.or(self.counts),
        }
    }
}

fn parse_shots(s: &str) -> Result<Shots, String> {
    s.parse().map_err(|e: mpo_tomo::TomoError| e.to_string())
}

fn parse_povm(s: &str) -> Result<PovmKind, String> {
    s.parse().map_err(|e: mpo_tomo::TomoError| e.to_string())
}

/// Flags shared by all subcommands.
#[derive(Clone, Debug, Default, Args)]
pub struct Flags {
    /// Manifest file; flags given on the command line take precedence.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: Option<Kind>,
    /// Number of sites.
    #[arg(long)]
    pub n: Option<usize>,
    /// Block length of the local POVM.
    #[arg(long)]
    pub r: Option<usize>,
    /// Shots per setting, or "inf" for exact probabilities.
    #[arg(long, value_parser = parse_shots)]
    pub m: Option<Shots>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub phi: Option<f64>,
    /// Bond dimension cap.
    #[arg(long)]
    pub dmax: Option<usize>,
    /// Iteration budget.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Dilution parameter; plain fixed-point iteration when absent.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Reconstruct a pure state.
    #[arg(long)]
    pub pure: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// local or local+ghz.
    #[arg(long, value_parser = parse_povm)]
    pub povm: Option<PovmKind>,
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Measurement record used to report the log-likelihood.
    #[arg(long)]
    pub counts: Option<PathBuf>,
}

impl Flags {
    /// The manifest file (if any) with these flags applied on top.
    pub fn resolve(&self) -> anyhow::Result<ExperimentManifest> {
        let base = match &self.manifest {
            Some(p) => ExperimentManifest::read(p)?,
            None => ExperimentManifest::default(),
        };
        let mut m = base.overridden_by(ExperimentManifest {
            kind: self.kind,
            n: self.n,
            r: self.r,
            m: self.m,
            beta: self.beta,
            phi: self.phi,
            dmax: self.dmax,
            iterations: self.iters,
            epsilon: self.epsilon,
            pure: self.pure.then_some(true),
            seed: self.seed,
            povm: self.povm,
            input: self.input.clone(),
            output: self.out.clone(),
            truth: self.truth.clone(),
            counts: self.counts.clone(),
        });
        // All randomness derives from one seed; record the default too.
        m.seed.get_or_insert(0);
        Ok(m)
    }
}
