//! Run configuration: one TOML document, dotted-key overrides, and a hash of
//! the fully resolved configuration stamped on every artifact.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::symgroup::GroupSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub params: Vec<f64>,
}

/// A catalog group by name, or explicit generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    /// Catalog name; defaults to the model's own symmetry group.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub custom: Option<GroupSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_width: f64,
    pub n: usize,
    #[serde(default = "default_order")]
    pub order: usize,
}

fn default_order() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    /// Half-width of the plateau where `ψ = 1`.
    pub plateau: f64,
    pub t_c: f64,
    pub tau: f64,
    #[serde(default)]
    pub quad_step: Option<f64>,
    #[serde(default)]
    pub mirror: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitConfig {
    pub t_window: (f64, f64),
    #[serde(default = "default_seed_count")]
    pub seed_count: usize,
    #[serde(default = "default_orbit_seed")]
    pub rng_seed: u64,
    #[serde(default = "default_newton_tol")]
    pub tol: f64,
}

fn default_seed_count() -> usize {
    32
}
fn default_orbit_seed() -> u64 {
    0x0b17_5eed
}
fn default_newton_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeylConfig {
    /// Counting interval `[E₁, E₂]`.
    pub interval: (f64, f64),
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default = "default_mc_seed")]
    pub rng_seed: u64,
    /// Shell half-width for Liouville factors.
    #[serde(default = "default_shell")]
    pub shell: f64,
}

fn default_mc_samples() -> usize {
    1_000_000
}
fn default_mc_seed() -> u64 {
    0x11_0b11
}
fn default_shell() -> f64 {
    0.02
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompareMode {
    Weyl,
    Oscillating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_degen")]
    pub degen_tol: f64,
    #[serde(default = "default_invariance")]
    pub invariance_tol: f64,
    /// Expected error exponent in `compare`.
    #[serde(default = "default_exponent")]
    pub min_exponent: f64,
    /// Margin added around `ψ`'s support for the eigenvalue window.
    #[serde(default = "default_margin")]
    pub window_margin: f64,
}

fn default_degen() -> f64 {
    crate::qspec::DEGEN_TOL
}
fn default_invariance() -> f64 {
    1e-9
}
fn default_exponent() -> f64 {
    0.8
}
fn default_margin() -> f64 {
    0.05
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            degen_tol: default_degen(),
            invariance_tol: default_invariance(),
            min_exponent: default_exponent(),
            window_margin: default_margin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default = "default_group")]
    pub group: GroupConfig,
    pub grid: GridConfig,
    /// Strictly decreasing.
    pub h: Vec<f64>,
    pub energy: f64,
    pub delta_e: f64,
    #[serde(default)]
    pub windows: Option<WindowConfig>,
    #[serde(default)]
    pub orbits: Option<OrbitConfig>,
    #[serde(default)]
    pub weyl: Option<WeylConfig>,
    #[serde(default = "default_mode")]
    pub mode: CompareMode,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_group() -> GroupConfig {
    GroupConfig { name: None, custom: None }
}
fn default_mode() -> CompareMode {
    CompareMode::Oscillating
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: RunConfig = value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        if self.h.is_empty() {
            return Err(Error::Config("h schedule is empty".into()));
        }
        if self.h.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::Config("h values must be positive".into()));
        }
        if self.h.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("h schedule must be strictly decreasing".into()));
        }
        if !(self.delta_e > 0.0) {
            return Err(Error::Config("delta_e must be positive".into()));
        }
        if let Some(w) = &self.windows {
            if !(w.plateau >= 0.0 && w.plateau < self.delta_e) {
                return Err(Error::Config("windows.plateau must lie in [0, delta_e)".into()));
            }
        }
        if let Some(o) = &self.orbits {
            if o.t_window.0 < 0.0 || o.t_window.1 < o.t_window.0 {
                return Err(Error::Config("orbits.t_window must satisfy 0 ≤ lo ≤ hi".into()));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the resolved configuration. The output directory is
    /// left out: moving artifacts does not change what they contain.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        let json = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Replaces every RNG seed.
    pub fn reseed(&mut self, seed: u64) {
        if let Some(o) = &mut self.orbits {
            o.rng_seed = seed;
        }
        if let Some(w) = &mut self.weyl {
            w.rng_seed = seed;
        }
    }
}

/// `a.b.c=value`; the value is parsed as TOML, falling back to a string.
fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| Error::Config(format!("override '{spec}' is not key=value")))?;
    let value = parse_value(raw.trim());
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key '{key}'")));
    }
    let mut cur = root;
    for p in &parts[..parts.len() - 1] {
        let table = cur.as_table_mut().ok_or_else(|| Error::Config(format!("'{key}' crosses a non-table value")))?;
        cur = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
    }
    let table = cur.as_table_mut().ok_or_else(|| Error::Config(format!("'{key}' crosses a non-table value")))?;
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or(toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}
