//! Experiment configuration: presets, flat sectioned overrides and the
//! content hash recorded with every report row.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use sha1::{Digest, Sha1};

use crate::error::{Error, Result};
use crate::rng::SeedStream;
use crate::suite::TestPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Preset {
    Covariance,
    Spectral,
    Gibbs,
    FeynmanKac,
    Invariance,
    Nonlocalization,
    Tightness,
    All,
}

impl Preset {
    /// Every preset that runs a pipeline of its own, in execution order.
    pub const PIPELINES: [Preset; 7] = [
        Preset::Covariance,
        Preset::Spectral,
        Preset::Gibbs,
        Preset::FeynmanKac,
        Preset::Invariance,
        Preset::Nonlocalization,
        Preset::Tightness,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Covariance => "covariance",
            Preset::Spectral => "spectral",
            Preset::Gibbs => "gibbs",
            Preset::FeynmanKac => "feynman_kac",
            Preset::Invariance => "invariance",
            Preset::Nonlocalization => "nonlocalization",
            Preset::Tightness => "tightness",
            Preset::All => "all",
        }
    }

    pub fn expand(&self) -> Vec<Preset> {
        if *self == Preset::All {
            Self::PIPELINES.to_vec()
        } else {
            vec![*self]
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::PIPELINES
            .iter()
            .chain(&[Preset::All])
            .find(|p| p.name() == s.trim())
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown preset '{s}'")))
    }
}

/// Keys accepted in configuration files, as `section.key`.
pub const KNOWN_KEYS: &[&str] = &[
    "run.preset",
    "run.seed",
    "plan.n_values",
    "plan.sample_sizes",
    "plan.times",
    "plan.significance",
    "numerics.c0",
    "numerics.quartic",
    "numerics.box_length",
    "numerics.box_points",
    "numerics.dt",
    "numerics.dealias_fraction",
    "numerics.line_spacing",
    "numerics.line_margin",
    "numerics.partition_samples",
    "numerics.pcn_step",
    "numerics.pcn_burn_in",
    "numerics.pcn_thinning",
    "numerics.pcn_chains",
    "numerics.target_u_max",
    "numerics.target_n_u",
    "numerics.n_windows",
    "numerics.null_replications",
    "numerics.snapshots_per_unit",
    "numerics.small_mass",
    "numerics.proximity_ratio",
    "numerics.tightness_ratio",
    "covariance.replicas",
    "covariance.points",
    "covariance.half_width",
];

/// Parses `[section]` headers and `key = value` lines into `section.key`
/// entries. `#` starts a comment. Unknown keys are rejected by name.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected key = value, got '{line}'", lineno + 1)));
        };
        let key = if section.is_empty() { k.trim().to_string() } else { format!("{section}.{}", k.trim()) };
        check_key(&key)?;
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
        }
    }
    Ok(out)
}

fn check_key(key: &str) -> Result<()> {
    if KNOWN_KEYS.contains(&key) {
        Ok(())
    } else {
        Err(Error::Config(format!("unknown config key '{key}'")))
    }
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("bad value '{v}' for '{key}'")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_value(key, s)).collect()
}

/// Prior-covariance run settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceSettings {
    pub replicas: usize,
    pub points: usize,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    /// `section.key` overrides, all keys in [`KNOWN_KEYS`].
    pub overrides: BTreeMap<String, String>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(preset: Preset, output_dir: impl Into<PathBuf>, seed: u64) -> Self {
        Self { preset, overrides: BTreeMap::new(), output_dir: output_dir.into(), seed }
    }

    /// Adds overrides after checking every key and value.
    pub fn with_overrides(mut self, overrides: BTreeMap<String, String>) -> Result<Self> {
        for k in overrides.keys() {
            check_key(k)?;
        }
        self.overrides.extend(overrides);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for p in self.preset.expand() {
            self.plan_for(p)?;
        }
        self.covariance()?;
        Ok(())
    }

    /// `preset = ...` followed by the sorted overrides; the seed and output
    /// directory are not part of it.
    pub fn canonical_text(&self) -> String {
        let mut s = format!("preset = {}\n", self.preset);
        for (k, v) in &self.overrides {
            if k != "run.preset" && k != "run.seed" {
                s.push_str(&format!("{k} = {v}\n"));
            }
        }
        s
    }

    /// Git blob hash of [`Self::canonical_text`].
    pub fn config_hash(&self) -> String {
        git_blob_hash(self.canonical_text().as_bytes())
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.overrides.get(key).map(|v| parse_value(key, v)).transpose()
    }

    fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.overrides.get(key).map(|v| parse_list(key, v)).transpose()
    }

    pub fn covariance(&self) -> Result<CovarianceSettings> {
        let s = CovarianceSettings {
            replicas: self.get("covariance.replicas")?.unwrap_or(100_000),
            points: self.get("covariance.points")?.unwrap_or(101),
            half_width: self.get("covariance.half_width")?.unwrap_or(5.0),
        };
        if s.replicas < 2 || s.points < 2 || !(s.half_width > 0.0) {
            return Err(Error::Config("covariance needs replicas >= 2, points >= 2, half_width > 0".into()));
        }
        Ok(s)
    }

    /// The preset's default plan with the overrides applied.
    pub fn plan_for(&self, preset: Preset) -> Result<TestPlan> {
        let seeds = SeedStream::new(self.seed, 0);
        let (n_values, sizes, times) = match preset {
            Preset::FeynmanKac => (vec![1.0, 2.0, 4.0], vec![10_000], vec![0.5]),
            Preset::Invariance => (vec![2.0], vec![2000], vec![0.25, 1.0]),
            Preset::Tightness => (vec![1.0, 2.0, 4.0], vec![300], vec![0.5]),
            _ => (vec![1.0, 2.0, 4.0], vec![2000], vec![0.5]),
        };
        let mut plan = TestPlan {
            n_values: self.get_list("plan.n_values")?.unwrap_or(n_values),
            sample_sizes: self.get_list("plan.sample_sizes")?.unwrap_or(sizes),
            times: self.get_list("plan.times")?.unwrap_or(times),
            ..TestPlan::new(vec![1.0], vec![1], vec![0.0], seeds)?
        };
        if let Some(s) = self.get("plan.significance")? {
            plan.significance = s;
        }
        let n = &mut plan.numerics;
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.get(concat!("numerics.", stringify!($field)))? {
                    n.$field = v;
                })*
            };
        }
        set!(
            c0,
            quartic,
            box_length,
            box_points,
            dt,
            dealias_fraction,
            line_spacing,
            line_margin,
            partition_samples,
            target_u_max,
            target_n_u,
            n_windows,
            null_replications,
            snapshots_per_unit,
            small_mass,
            proximity_ratio,
            tightness_ratio
        );
        if let Some(v) = self.get("numerics.pcn_step")? {
            n.pcn.step = v;
        }
        if let Some(v) = self.get("numerics.pcn_burn_in")? {
            n.pcn.burn_in = v;
        }
        if let Some(v) = self.get("numerics.pcn_thinning")? {
            n.pcn.thinning = v;
        }
        if let Some(v) = self.get("numerics.pcn_chains")? {
            n.pcn.n_chains = v;
        }
        plan.validate().map_err(|e| Error::Config(e.to_string()))?;
        if plan.times.is_empty() {
            return Err(Error::Config("plan.times must not be empty".into()));
        }
        Ok(plan)
    }
}

/// `sha1("blob <len>\0" + content)` in hex.
pub fn git_blob_hash(content: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_matches_git() {
        // `printf 'hello\n' | git hash-object --stdin`
        assert_eq!(git_blob_hash(b"hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
        assert_eq!(git_blob_hash(b""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    }

    #[test]
    fn parses_sections_and_rejects_unknown_keys() {
        let m = parse_config_text("# c\n[plan]\nn_values = 1, 2\n[numerics]\ndt = 0.001 # fine\n").unwrap();
        assert_eq!(m["plan.n_values"], "1, 2");
        assert_eq!(m["numerics.dt"], "0.001");
        let e = parse_config_text("[plan]\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("plan.bogus"));
        assert!(parse_config_text("[plan]\nn_values\n").is_err());
    }

    #[test]
    fn overrides_reach_the_plan() {
        let mut o = BTreeMap::new();
        o.insert("plan.n_values".to_string(), "3".to_string());
        o.insert("numerics.pcn_step".to_string(), "0.3".to_string());
        let c = ExperimentConfig::new(Preset::Gibbs, "out", 1).with_overrides(o).unwrap();
        let p = c.plan_for(Preset::Gibbs).unwrap();
        assert_eq!(p.n_values, vec![3.0]);
        assert_eq!(p.numerics.pcn.step, 0.3);
        let mut bad = BTreeMap::new();
        bad.insert("plan.significance".to_string(), "0.5".to_string());
        assert!(ExperimentConfig::new(Preset::Gibbs, "out", 1).with_overrides(bad).is_err());
    }

    #[test]
    fn hash_ignores_seed() {
        let a = ExperimentConfig::new(Preset::All, "a", 1);
        let b = ExperimentConfig::new(Preset::All, "b", 2);
        assert_eq!(a.config_hash(), b.config_hash());
        assert_ne!(a.config_hash(), ExperimentConfig::new(Preset::Gibbs, "a", 1).config_hash());
    }

    #[test]
    fn preset_names_round_trip() {
        for p in Preset::PIPELINES.iter().chain(&[Preset::All]) {
            assert_eq!(p.name().parse::<Preset>().unwrap(), *p);
        }
        assert!("nope".parse::<Preset>().is_err());
    }
}
