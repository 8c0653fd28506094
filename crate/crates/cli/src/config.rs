//! JSON group configurations.

use std::fmt;

use chamberflow::moebius::MoebiusTransform;
use chamberflow::{Disk, ProductGroup, SchottkyFactor};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub factors: Vec<FactorSpec>,
    #[serde(default)]
    pub defaults: Defaults,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub disks: Vec<DiskSpec>,
    /// Explicit pairing maps `g_k` for some `k > 0`; the rest are canonical.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub generators: Vec<GeneratorSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskSpec {
    pub index: i32,
    pub center: f64,
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub index: i32,
    /// Rows `[[a, b], [c, d]]` of `z ↦ (az + b)/(cz + d)`.
    pub matrix: [[f64; 2]; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Defaults {
    /// Collocation degree for rank-one operators.
    pub degree: usize,
    /// Collocation degree per factor for dense product operators.
    pub product_degree: usize,
    /// Cover depth for locating boundary points.
    pub depth: usize,
    pub tolerance: f64,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults { degree: 24, product_degree: 8, depth: 12, tolerance: 1e-7 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Parses a configuration document. Syntax errors carry line and column;
/// disk entries with a non-finite center or a non-positive radius are named
/// by their position. Overlaps and index sets are checked by [`Config::group`].
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let config: Config =
        serde_json::from_str(text).map_err(|e| ConfigError(format!("config line {} column {}: {e}", e.line(), e.column())))?;
    if config.factors.is_empty() {
        return Err(ConfigError("config must list at least one factor".into()));
    }
    for (j, factor) in config.factors.iter().enumerate() {
        for (i, d) in factor.disks.iter().enumerate() {
            let entry = format!("factors[{j}].disks[{i}] (index {})", d.index);
            if !d.center.is_finite() {
                return Err(ConfigError(format!("{entry}: center must be finite, got {}", d.center)));
            }
            if !(d.radius > 0.0 && d.radius.is_finite()) {
                return Err(ConfigError(format!("{entry}: radius must be positive, got {}", d.radius)));
            }
        }
    }
    let d = &config.defaults;
    if !(d.tolerance > 0.0) {
        return Err(ConfigError(format!("defaults.tolerance must be positive, got {}", d.tolerance)));
    }
    if d.depth == 0 {
        return Err(ConfigError("defaults.depth must be at least 1".into()));
    }
    Ok(config)
}

impl Config {
    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    /// Canonical re-serialization; parsing it gives back an equal config.
    pub fn canonical(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn factor(&self, j: usize) -> chamberflow::Result<SchottkyFactor> {
        let spec = &self.factors[j];
        let disks = spec.disks.iter().map(|d| Disk::new(d.index, d.center, d.radius)).collect::<Result<Vec<_>, _>>()?;
        let explicit = spec
            .generators
            .iter()
            .map(|g| MoebiusTransform::from_rows(g.matrix).map(|m| (g.index, m)))
            .collect::<Result<Vec<_>, _>>()?;
        SchottkyFactor::with_generators(disks, &explicit)
    }

    pub fn group(&self) -> chamberflow::Result<ProductGroup> {
        ProductGroup::new((0..self.rank()).map(|j| self.factor(j)).collect::<Result<_, _>>()?)
    }
}
