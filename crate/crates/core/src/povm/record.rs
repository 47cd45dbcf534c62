use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::setting::{PovmSet, SettingLabel};
use crate::error::{Result, TomoError};

/// Shots per setting: a finite count or the exact-probability limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shots {
    Finite(u64),
    Exact,
}

impl fmt::Display for Shots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shots::Finite(m) => write!(f, "{m}"),
            Shots::Exact => f.write_str("inf"),
        }
    }
}

impl FromStr for Shots {
    type Err = TomoError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(Shots::Exact);
        }
        match t.parse::<u64>() {
            Ok(m) if m >= 1 => Ok(Shots::Finite(m)),
            _ => Err(TomoError::Parameter(format!("shots must be a positive integer or \"inf\", got '{s}'"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ShotsRepr {
    Count(u64),
    Text(String),
}

impl Serialize for Shots {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Shots::Finite(m) => ShotsRepr::Count(*m),
            Shots::Exact => ShotsRepr::Text("inf".into()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match ShotsRepr::deserialize(d)? {
            ShotsRepr::Count(m) => Ok(Shots::Finite(m)),
            ShotsRepr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PovmKind {
    #[serde(rename = "local")]
    Local,
    #[serde(rename = "local+ghz")]
    LocalGhz,
}

impl FromStr for PovmKind {
    type Err = TomoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local" => Ok(PovmKind::Local),
            "local+ghz" => Ok(PovmKind::LocalGhz),
            _ => Err(TomoError::Parameter(format!("unknown POVM '{s}', expected local or local+ghz"))),
        }
    }
}

impl fmt::Display for PovmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PovmKind::Local => "local",
            PovmKind::LocalGhz => "local+ghz",
        })
    }
}

/// Outcomes of one setting. Exactly one of `counts` and `probabilities` is
/// present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingRecord {
    #[serde(flatten)]
    pub label: SettingLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<f64>>,
}

impl SettingRecord {
    /// `n_i` (finite shots) or `f_i` (exact mode) for each outcome.
    pub fn values(&self) -> Vec<f64> {
        match (&self.counts, &self.probabilities) {
            (Some(c), _) => c.iter().map(|&n| n as f64).collect(),
            (None, Some(p)) => p.clone(),
            (None, None) => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub n_sites: usize,
    pub block_len: usize,
    pub povm: PovmKind,
    pub shots: Shots,
    pub settings: Vec<SettingRecord>,
}

impl MeasurementRecord {
    pub fn povm_set(&self) -> Result<PovmSet> {
        match self.povm {
            PovmKind::Local => PovmSet::local(self.n_sites, self.block_len),
            PovmKind::LocalGhz => PovmSet::local_with_ghz(self.n_sites, self.block_len),
        }
    }

    pub fn is_exact(&self) -> bool {
        self.shots == Shots::Exact
    }

    /// `M`: total shots, or the number of settings in exact mode, so that
    /// every weight `n_i / M` is a frequency scaled by the setting share.
    pub fn weight_total(&self) -> f64 {
        match self.shots {
            Shots::Exact => self.settings.len() as f64,
            Shots::Finite(_) => self.settings.iter().map(|s| s.values().iter().sum::<f64>()).sum(),
        }
    }

    /// Total number of recorded shots; `None` in exact mode.
    pub fn total_shots(&self) -> Option<u64> {
        match self.shots {
            Shots::Exact => None,
            Shots::Finite(_) => Some(
                self.settings
                    .iter()
                    .map(|s| s.counts.as_ref().map_or(0, |c| c.iter().sum::<u64>()))
                    .sum(),
            ),
        }
    }

    /// Checks the record against the POVM layout and the count invariants.
    pub fn validate(&self, povm: &PovmSet) -> Result<()> {
        let labels = povm.settings();
        if labels.len() != self.settings.len() {
            return Err(TomoError::Record(format!(
                "record has {} settings, POVM expects {}",
                self.settings.len(),
                labels.len()
            )));
        }
        for (i, (s, l)) in self.settings.iter().zip(&labels).enumerate() {
            if &s.label != l {
                return Err(TomoError::Record(format!("setting {i} is {:?}, expected {l:?}", s.label)));
            }
            let k = l.n_outcomes();
            match (self.shots, &s.counts, &s.probabilities) {
                (Shots::Finite(m), Some(c), None) => {
                    if c.len() != k {
                        return Err(TomoError::Record(format!("setting {i}: {} counts, expected {k}", c.len())));
                    }
                    let sum: u64 = c.iter().sum();
                    if sum != s.shots.unwrap_or(m) {
                        return Err(TomoError::Record(format!("setting {i}: counts sum to {sum}, shots {m}")));
                    }
                }
                (Shots::Exact, None, Some(p)) => {
                    if p.len() != k {
                        return Err(TomoError::Record(format!(
                            "setting {i}: {} probabilities, expected {k}",
                            p.len()
                        )));
                    }
                    let sum: f64 = p.iter().sum();
                    if p.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > 1e-8 {
                        return Err(TomoError::Record(format!("setting {i}: probabilities invalid (sum {sum})")));
                    }
                }
                _ => {
                    return Err(TomoError::Record(format!(
                        "setting {i}: expected {} for shots = {}",
                        if self.is_exact() { "probabilities" } else { "counts" },
                        self.shots
                    )))
                }
            }
        }
        if self.weight_total() <= 0.0 {
            return Err(TomoError::Record("all counts are zero".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        MeasurementRecord::from_json(&std::fs::read_to_string(path)?)
    }
}
