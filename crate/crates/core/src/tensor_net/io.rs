//! Tensor files: a JSON manifest next to a raw blob of little-endian `f64`
//! pairs `(re, im)`, sites concatenated in order, each tensor row-major in
//! `(left bond, physical, right bond)`.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array3;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::chain::Site;
use super::mpo::Mpo;
use super::mps::Mps;
use super::pauli::OperatorBasis;
use crate::error::{Result, TomoError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorKind {
    Mps,
    Mpo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: TensorKind,
    pub n_sites: usize,
    /// Local Hilbert-space dimension `d`.
    pub phys_dim: usize,
    /// Operator basis identifier; `null` for states.
    pub basis: Option<String>,
    pub shapes: Vec<[usize; 3]>,
    /// Blob file name, relative to the manifest.
    pub data: String,
}

/// A state loaded from disk.
#[derive(Clone, Debug)]
pub enum TensorNetwork {
    Mps(Mps),
    Mpo(Mpo),
}

impl TensorNetwork {
    pub fn n_sites(&self) -> usize {
        match self {
            TensorNetwork::Mps(m) => m.n_sites(),
            TensorNetwork::Mpo(m) => m.n_sites(),
        }
    }

    pub fn kind(&self) -> TensorKind {
        match self {
            TensorNetwork::Mps(_) => TensorKind::Mps,
            TensorNetwork::Mpo(_) => TensorKind::Mpo,
        }
    }
}

/// Blob path for a manifest path: same stem, `.bin` extension.
pub fn blob_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

fn encode(sites: &[Site]) -> Vec<u8> {
    let total: usize = sites.iter().map(|a| a.len()).sum();
    let mut out = Vec::with_capacity(total * 16);
    for a in sites {
        for z in a.as_standard_layout().iter() {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out
}

fn decode(bytes: &[u8], shapes: &[[usize; 3]]) -> Result<Vec<Site>> {
    let need: usize = shapes.iter().map(|s| s[0] * s[1] * s[2] * 16).sum();
    if bytes.len() != need {
        return Err(TomoError::Format(format!(
            "blob has {} bytes, manifest needs {need}",
            bytes.len()
        )));
    }
    let mut off = 0;
    let mut sites = Vec::with_capacity(shapes.len());
    for s in shapes {
        let len = s[0] * s[1] * s[2];
        let data: Vec<C64> = (0..len)
            .map(|i| {
                let b = off + 16 * i;
                let re = f64::from_le_bytes(bytes[b..b + 8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(bytes[b + 8..b + 16].try_into().expect("8 bytes"));
                C64::new(re, im)
            })
            .collect();
        off += 16 * len;
        sites.push(
            Array3::from_shape_vec((s[0], s[1], s[2]), data)
                .map_err(|e| TomoError::Format(e.to_string()))?,
        );
    }
    Ok(sites)
}

fn shapes(sites: &[Site]) -> Vec<[usize; 3]> {
    sites
        .iter()
        .map(|a| {
            let (l, p, r) = a.dim();
            [l, p, r]
        })
        .collect()
}

/// Writes `manifest_path` and its blob.
pub fn write(manifest_path: &Path, net: &TensorNetwork) -> Result<()> {
    let (sites, kind, basis, d) = match net {
        TensorNetwork::Mps(m) => (m.sites(), TensorKind::Mps, None, m.phys_dim()),
        TensorNetwork::Mpo(m) => (m.sites(), TensorKind::Mpo, Some(m.basis().id().to_string()), m.phys_dim()),
    };
    let blob = blob_path(manifest_path);
    let manifest = Manifest {
        kind,
        n_sites: sites.len(),
        phys_dim: d,
        basis,
        shapes: shapes(sites),
        data: blob
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    fs::write(&blob, encode(sites))?;
    fs::write(manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

pub fn read(manifest_path: &Path) -> Result<TensorNetwork> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
    if manifest.shapes.len() != manifest.n_sites {
        return Err(TomoError::Format("shape list does not match n_sites".into()));
    }
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let bytes = fs::read(dir.join(&manifest.data))?;
    let sites = decode(&bytes, &manifest.shapes)?;
    match manifest.kind {
        TensorKind::Mps => {
            if sites.iter().any(|a| a.dim().1 != manifest.phys_dim) {
                return Err(TomoError::Format("physical dimension disagrees with manifest".into()));
            }
            Ok(TensorNetwork::Mps(Mps::new(sites)?))
        }
        TensorKind::Mpo => {
            let id = manifest.basis.as_deref().unwrap_or("");
            let basis = OperatorBasis::from_id(id)
                .ok_or_else(|| TomoError::Format(format!("unknown operator basis '{id}'")))?;
            if manifest.phys_dim != 2 {
                return Err(TomoError::Format("only qubit operators are supported".into()));
            }
            Ok(TensorNetwork::Mpo(Mpo::new(sites, basis)?))
        }
    }
}
