//! Sweep configuration: built-in profiles, JSON config files and flag overrides.
//!
//! Every field of [`SweepConfig`] may appear in a config file; absent fields
//! take the profile default. Flags override the file.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context};
use scatbound_core::dual::DualOptions;
use scatbound_core::Polarization;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Built-in parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// δx = λ0/100 and 50 restarts.
    Paper,
    /// δx = λ0/50 and 8 restarts, sized for a single laptop core.
    Ci,
}

impl FromStr for Profile {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "paper" => Ok(Profile::Paper),
            "ci" => Ok(Profile::Ci),
            other => bail!("unknown profile `{other}` (expected `paper` or `ci`)"),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Paper => "paper",
            Profile::Ci => "ci",
        })
    }
}

/// Which α the dual program is solved at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMode {
    /// The provable budget α_ub.
    Ub,
    /// The local estimate α_loc; the resulting −d is not a certified bound.
    Loc,
    /// An explicit grid of α values.
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub profile: Profile,
    pub polarizations: Vec<Polarization>,
    /// Free-space wavelength λ0.
    pub wavelength: f64,
    /// Design-region radii R.
    pub radii: Vec<f64>,
    /// χ0 values; each cell optimizes over `[min(0, χ0), max(0, χ0)]`.
    pub contrasts: Vec<f64>,
    /// Pixel spacing δx.
    pub spacing: f64,
    pub restarts: usize,
    pub seed: u64,
    /// α used by `dual-at-alpha`; `bound` always uses α_ub.
    pub alpha: AlphaMode,
    /// Random structures per cell in the weak-duality check of `bound`; 0 disables it.
    pub weak_duality_samples: usize,
    pub dual: DualOptions,
}

/// Partial config as read from a file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub profile: Option<Profile>,
    pub polarizations: Option<Vec<Polarization>>,
    pub wavelength: Option<f64>,
    pub radii: Option<Vec<f64>>,
    pub contrasts: Option<Vec<f64>>,
    pub spacing: Option<f64>,
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
    pub alpha: Option<AlphaMode>,
    pub weak_duality_samples: Option<usize>,
    pub dual: Option<DualOptions>,
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub profile: Option<Profile>,
    pub seed: Option<u64>,
    pub polarizations: Option<Vec<Polarization>>,
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

impl SweepConfig {
    pub fn profile(profile: Profile) -> Self {
        let (spacing, restarts) = match profile {
            Profile::Paper => (0.01, 50),
            Profile::Ci => (0.02, 8),
        };
        Self {
            profile,
            polarizations: vec![Polarization::Te, Polarization::Tm],
            wavelength: 1.0,
            radii: vec![0.025, 0.05, 0.1],
            contrasts: linspace(-4.0, 4.0, 33),
            spacing,
            restarts,
            seed: 1,
            alpha: AlphaMode::List(vec![
                0.0, 0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0,
            ]),
            weak_duality_samples: 100,
            dual: DualOptions::default(),
        }
    }

    /// Profile defaults, then the file, then flags.
    pub fn resolve(file: Option<ConfigFile>, overrides: &Overrides) -> anyhow::Result<Self> {
        let file = file.unwrap_or_default();
        let profile = overrides.profile.or(file.profile).unwrap_or(Profile::Paper);
        let mut c = Self::profile(profile);
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = file.$f { c.$f = v; } )* };
        }
        take!(
            polarizations,
            wavelength,
            radii,
            contrasts,
            spacing,
            restarts,
            seed,
            alpha,
            weak_duality_samples,
            dual
        );
        if let Some(s) = overrides.seed {
            c.seed = s;
        }
        if let Some(p) = &overrides.polarizations {
            c.polarizations = p.clone();
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> anyhow::Result<ConfigFile> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let finite_pos = |x: f64| x.is_finite() && x > 0.0;
        if !finite_pos(self.spacing) {
            bail!("spacing must be positive, got {}", self.spacing);
        }
        if !finite_pos(self.wavelength) {
            bail!("wavelength must be positive, got {}", self.wavelength);
        }
        if self.restarts == 0 {
            bail!("restarts must be at least 1");
        }
        if self.polarizations.is_empty() || self.radii.is_empty() || self.contrasts.is_empty() {
            bail!("polarizations, radii and contrasts must be nonempty");
        }
        if let Some(r) = self
            .radii
            .iter()
            .find(|&&r| !(r.is_finite() && r >= self.spacing))
        {
            bail!("radius {r} is smaller than the spacing {}", self.spacing);
        }
        if let Some(c) = self.contrasts.iter().find(|c| !c.is_finite()) {
            bail!("contrast {c} is not finite");
        }
        if let AlphaMode::List(a) = &self.alpha {
            if a.is_empty() || a.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                bail!("α list must be nonempty, finite and nonnegative");
            }
        }
        if self.dual.max_iter == 0 || self.dual.stages == 0 || self.dual.memory == 0 {
            bail!("dual options must be positive");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding, hex.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// Short form of [`hash`](Self::hash) carried on every CSV row.
    pub fn short_hash(&self) -> String {
        self.hash()[..16].to_string()
    }
}

/// `[min(0, χ0), max(0, χ0)]`.
pub fn contrast_bounds(chi0: f64) -> (f64, f64) {
    (chi0.min(0.0), chi0.max(0.0))
}
