use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::linalg::identity;
use crate::tensor_net::Pauli;

/// The two global observables that fix the phase of GHZ-type states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalObservable {
    /// `X` on every site.
    XAll,
    /// `Y` on the first site, `X` on the rest.
    YXRest,
}

impl GlobalObservable {
    pub const ALL: [GlobalObservable; 2] = [GlobalObservable::XAll, GlobalObservable::YXRest];

    pub fn pauli_at(&self, site: usize) -> Pauli {
        match (self, site) {
            (GlobalObservable::YXRest, 0) => Pauli::Y,
            _ => Pauli::X,
        }
    }

    pub fn paulis(&self, n: usize) -> Vec<Pauli> {
        (0..n).map(|k| self.pauli_at(k)).collect()
    }
}

/// One measurement setting: a basis choice on a block, or a global
/// observable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SettingLabel {
    Local { block_start: usize, basis: String },
    Global { observable: GlobalObservable },
}

impl SettingLabel {
    pub fn local(block_start: usize, bases: &[Pauli]) -> Self {
        SettingLabel::Local {
            block_start,
            basis: bases.iter().map(|p| p.to_char()).collect(),
        }
    }

    /// Parsed basis letters of a local setting.
    pub fn bases(&self) -> Result<Vec<Pauli>> {
        match self {
            SettingLabel::Local { basis, .. } => basis
                .chars()
                .map(|c| match Pauli::from_char(c) {
                    Some(p) if p != Pauli::I => Ok(p),
                    _ => Err(TomoError::Record(format!("invalid basis letter '{c}' in '{basis}'"))),
                })
                .collect(),
            SettingLabel::Global { .. } => Err(TomoError::Record("global setting has no block basis".into())),
        }
    }

    pub fn n_outcomes(&self) -> usize {
        match self {
            SettingLabel::Local { basis, .. } => 1 << basis.len(),
            SettingLabel::Global { .. } => 2,
        }
    }

    pub fn is_global(&self) -> bool {
        matches!(self, SettingLabel::Global { .. })
    }
}

/// Eigenvalue sign of outcome `j` at block position `i` (first position is
/// the most significant bit; bit 0 means `+1`).
pub fn outcome_sign(j: usize, i: usize, r: usize) -> f64 {
    if (j >> (r - 1 - i)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Single-qubit projector `(1 + s sigma_b) / 2`.
pub fn projector(b: Pauli, sign: f64) -> Array2<C64> {
    (identity(2) + b.matrix().mapv(|z| z * sign)).mapv(|z| z * 0.5)
}

/// Measurements on every block of `r` consecutive sites in all `3^r`
/// product Pauli bases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalBlockPovm {
    pub n: usize,
    pub r: usize,
}

impl LocalBlockPovm {
    pub fn new(n: usize, r: usize) -> Result<Self> {
        if r == 0 || r > n {
            return Err(TomoError::Parameter(format!("block length {r} invalid for {n} sites")));
        }
        Ok(LocalBlockPovm { n, r })
    }

    pub fn n_blocks(&self) -> usize {
        self.n - self.r + 1
    }

    /// All bases over `{X,Y,Z}^r` in lexicographic order.
    pub fn bases(&self) -> Vec<Vec<Pauli>> {
        let mut out = vec![Vec::new()];
        for _ in 0..self.r {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<Pauli>| {
                    Pauli::NONTRIVIAL.iter().map(move |&p| {
                        let mut v = prefix.clone();
                        v.push(p);
                        v
                    })
                })
                .collect();
        }
        out
    }

    /// Settings ordered by block, then basis.
    pub fn settings(&self) -> Vec<SettingLabel> {
        let bases = self.bases();
        (0..self.n_blocks())
            .flat_map(|k| bases.iter().map(move |b| SettingLabel::local(k, b)))
            .collect()
    }

    /// Single-site factors of element `j` of the setting `(k, bases)`,
    /// identity off the block.
    pub fn element_factors(&self, block_start: usize, bases: &[Pauli], j: usize) -> Vec<Array2<C64>> {
        (0..self.n)
            .map(|site| {
                if site >= block_start && site < block_start + self.r {
                    let i = site - block_start;
                    projector(bases[i], outcome_sign(j, i, self.r))
                } else {
                    identity(2)
                }
            })
            .collect()
    }
}

/// The four global elements `(1 +- X^N)/4`, `(1 +- Y X^(N-1))/4`, handled as
/// two settings whose two outcomes `(1 +- O)/2` each sum to the identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalGhzPovm {
    pub n: usize,
}

impl GlobalGhzPovm {
    pub fn settings(&self) -> Vec<SettingLabel> {
        GlobalObservable::ALL
            .iter()
            .map(|&o| SettingLabel::Global { observable: o })
            .collect()
    }

    pub fn observable_factors(&self, o: GlobalObservable) -> Vec<Array2<C64>> {
        o.paulis(self.n).into_iter().map(|p| p.matrix()).collect()
    }
}

/// Complete measurement description.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PovmSet {
    pub local: LocalBlockPovm,
    pub ghz: Option<GlobalGhzPovm>,
}

impl PovmSet {
    pub fn local(n: usize, r: usize) -> Result<Self> {
        Ok(PovmSet {
            local: LocalBlockPovm::new(n, r)?,
            ghz: None,
        })
    }

    pub fn local_with_ghz(n: usize, r: usize) -> Result<Self> {
        Ok(PovmSet {
            local: LocalBlockPovm::new(n, r)?,
            ghz: Some(GlobalGhzPovm { n }),
        })
    }

    pub fn n_sites(&self) -> usize {
        self.local.n
    }

    pub fn block_len(&self) -> usize {
        self.local.r
    }

    /// Local settings followed by the global ones.
    pub fn settings(&self) -> Vec<SettingLabel> {
        let mut s = self.local.settings();
        if let Some(g) = &self.ghz {
            s.extend(g.settings());
        }
        s
    }

    pub fn n_settings(&self) -> usize {
        3usize.pow(self.local.r as u32) * self.local.n_blocks() + if self.ghz.is_some() { 2 } else { 0 }
    }

    /// Dense-free description of element `j` of a setting: either a product
    /// of single-site factors or `(1 + s O)/2` for a global observable `O`.
    pub fn element(&self, label: &SettingLabel, j: usize) -> Result<Element> {
        match label {
            SettingLabel::Local { block_start, .. } => {
                let bases = label.bases()?;
                if bases.len() != self.local.r || *block_start + self.local.r > self.local.n {
                    return Err(TomoError::Record(format!("setting {label:?} does not fit the POVM")));
                }
                Ok(Element::Product(self.local.element_factors(*block_start, &bases, j)))
            }
            SettingLabel::Global { observable } => {
                if self.ghz.is_none() {
                    return Err(TomoError::Record("global setting in a local-only POVM".into()));
                }
                Ok(Element::Global {
                    observable: *observable,
                    sign: if j == 0 { 1.0 } else { -1.0 },
                })
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum Element {
    Product(Vec<Array2<C64>>),
    Global { observable: GlobalObservable, sign: f64 },
}
