//! Run configuration: JSON file merged with command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use fracap::cantor::CantorSpec;

/// Largest Cantor generation the capacity sweep hands to the dense LP.
pub const MAX_SWEEP_ATOMS: u128 = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    KernelValidate,
    CantorGrowth,
    CantorBlowup,
    SegmentBlowup,
    CapacitySweep,
    ContentVsCapacity,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::KernelValidate,
        Experiment::CantorGrowth,
        Experiment::CantorBlowup,
        Experiment::SegmentBlowup,
        Experiment::CapacitySweep,
        Experiment::ContentVsCapacity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::KernelValidate => "kernel-validate",
            Experiment::CantorGrowth => "cantor-growth",
            Experiment::CantorBlowup => "cantor-blowup",
            Experiment::SegmentBlowup => "segment-blowup",
            Experiment::CapacitySweep => "capacity-sweep",
            Experiment::ContentVsCapacity => "content-vs-capacity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }

    /// CSV stems an experiment writes.
    pub fn tables(self) -> &'static [&'static str] {
        match self {
            Experiment::KernelValidate => &["profile", "mass", "scaling"],
            Experiment::CantorGrowth => &["growth"],
            Experiment::CantorBlowup => &["blowup", "shells"],
            Experiment::SegmentBlowup => &["blowup", "shells"],
            Experiment::CapacitySweep => &["sweep"],
            Experiment::ContentVsCapacity => &["ratios"],
        }
    }

    fn defaults(self) -> Defaults {
        match self {
            Experiment::KernelValidate => Defaults { n: 1, s: 1.0, depth: 0, k: 0, samples: 50 },
            Experiment::CantorGrowth => Defaults { n: 1, s: 0.75, depth: 4, k: 1, samples: 0 },
            Experiment::CantorBlowup => Defaults { n: 1, s: 0.75, depth: 6, k: 1, samples: 0 },
            Experiment::SegmentBlowup => Defaults { n: 1, s: 1.0, depth: 8, k: 2, samples: 0 },
            Experiment::CapacitySweep => Defaults { n: 1, s: 1.0, depth: 4, k: 2, samples: 0 },
            Experiment::ContentVsCapacity => Defaults { n: 1, s: 0.75, depth: 4, k: 3, samples: 0 },
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

struct Defaults {
    n: usize,
    s: f64,
    depth: usize,
    k: usize,
    samples: usize,
}

/// Keys accepted in a `--config` file; every key is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub experiment: Option<Experiment>,
    pub n: Option<usize>,
    pub s: Option<f64>,
    pub depth: Option<usize>,
    pub k: Option<usize>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

impl PartialConfig {
    /// Fields set in `over` replace those in `self`.
    pub fn merge(self, over: PartialConfig) -> PartialConfig {
        PartialConfig {
            experiment: over.experiment.or(self.experiment),
            n: over.n.or(self.n),
            s: over.s.or(self.s),
            depth: over.depth.or(self.depth),
            k: over.k.or(self.k),
            samples: over.samples.or(self.samples),
            seed: over.seed.or(self.seed),
            output_dir: over.output_dir.or(self.output_dir),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub n: usize,
    pub s: f64,
    /// Deepest generation, level or shell count, per experiment.
    pub depth: usize,
    /// Starting generation, per experiment.
    pub k: usize,
    pub samples: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { field: field.to_string(), message: message.into() }
}

pub fn load_partial(path: &Path) -> Result<PartialConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid("config", format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        let msg = e.to_string();
        // serde names the offending key in its message
        let field = msg.split('`').nth(1).filter(|_| msg.starts_with("unknown field")).unwrap_or("config");
        invalid(field, format!("{}: {msg}", path.display()))
    })
}

fn check_range(field: &str, v: usize, lo: usize, hi: usize) -> Result<(), ConfigError> {
    if v < lo || v > hi {
        return Err(invalid(field, format!("{v} is outside {lo}..={hi}")));
    }
    Ok(())
}

impl RunConfig {
    /// Fills experiment defaults and validates ranges.
    pub fn resolve(p: PartialConfig) -> Result<RunConfig, ConfigError> {
        let experiment = p.experiment.ok_or_else(|| invalid("experiment", format!("missing; one of {}", Experiment::ALL.map(|e| e.name()).join(", "))))?;
        let d = experiment.defaults();
        let cfg = RunConfig {
            experiment,
            n: p.n.unwrap_or(d.n),
            s: p.s.unwrap_or(d.s),
            depth: p.depth.unwrap_or(d.depth),
            k: p.k.unwrap_or(d.k),
            samples: p.samples.unwrap_or(d.samples),
            seed: p.seed.unwrap_or(0),
            output_dir: p.output_dir.ok_or_else(|| invalid("output_dir", "missing; pass --out or set output_dir"))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !self.s.is_finite() || self.s <= 0.5 || self.s > 1.0 {
            return Err(invalid("s", format!("{} is outside (0.5, 1]", self.s)));
        }
        match self.experiment {
            Experiment::KernelValidate => {
                check_range("n", self.n, 1, 3)?;
                check_range("samples", self.samples, 1, 10_000)?;
            }
            Experiment::CantorGrowth => {
                check_range("n", self.n, 1, 2)?;
                check_range("depth", self.depth, 1, 5)?;
            }
            Experiment::CantorBlowup => {
                check_range("n", self.n, 1, 2)?;
                check_range("k", self.k, 1, 4)?;
                check_range("depth", self.depth, 2, 8)?;
                let spec = self.cantor(self.k + self.depth + 2)?;
                let per_level = (spec.children() as u128).pow(2) * spec.children() as u128;
                if per_level * (self.k + self.depth) as u128 > 2_000_000 {
                    return Err(invalid("depth", format!("refined measure would exceed 2,000,000 atoms ({} children per cube)", spec.children())));
                }
            }
            Experiment::SegmentBlowup => {
                if self.n != 1 {
                    return Err(invalid("n", "the segment experiment is defined for n = 1 only"));
                }
                if self.s != 1.0 {
                    return Err(invalid("s", "the segment experiment is defined for s = 1 only"));
                }
                check_range("k", self.k, 2, 10)?;
                check_range("depth", self.depth, 2, 16)?;
            }
            Experiment::CapacitySweep => {
                check_range("n", self.n, 1, 2)?;
                check_range("k", self.k, 1, 6)?;
                check_range("depth", self.depth, self.k, 6)?;
                let spec = self.cantor(self.depth)?;
                let atoms = spec.count(self.depth);
                if atoms > MAX_SWEEP_ATOMS {
                    return Err(invalid("depth", format!("generation {} has {atoms} atoms, above the dense LP limit {MAX_SWEEP_ATOMS}", self.depth)));
                }
            }
            Experiment::ContentVsCapacity => {
                check_range("n", self.n, 1, 2)?;
                check_range("k", self.k, 1, 3)?;
                check_range("depth", self.depth, 2, if self.n == 1 { 6 } else { 4 })?;
                let atoms = self.cantor(self.k)?.count(self.k);
                if atoms > MAX_SWEEP_ATOMS {
                    return Err(invalid("k", format!("generation {} has {atoms} atoms, above the dense LP limit {MAX_SWEEP_ATOMS}", self.k)));
                }
            }
        }
        Ok(())
    }

    pub fn cantor(&self, depth: usize) -> Result<CantorSpec, ConfigError> {
        CantorSpec::critical(self.n, self.s, depth).map_err(|e| invalid("s", e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn partial(e: Experiment) -> PartialConfig {
        PartialConfig { experiment: Some(e), output_dir: Some("out".into()), ..PartialConfig::default() }
    }

    #[test]
    fn defaults_are_valid() {
        for e in Experiment::ALL {
            let cfg = RunConfig::resolve(partial(e)).unwrap();
            assert_eq!(cfg.experiment, e);
            assert_eq!(Experiment::from_name(e.name()), Some(e));
        }
    }

    #[test]
    fn flags_override_file() {
        let file = PartialConfig { s: Some(0.8), depth: Some(3), ..partial(Experiment::CantorGrowth) };
        let flags = PartialConfig { s: Some(0.9), ..PartialConfig::default() };
        let cfg = RunConfig::resolve(file.merge(flags)).unwrap();
        assert_eq!((cfg.s, cfg.depth), (0.9, 3));
    }

    #[test]
    fn errors_name_the_field() {
        let bad = PartialConfig { s: Some(0.4), ..partial(Experiment::KernelValidate) };
        assert_eq!(RunConfig::resolve(bad).unwrap_err().field, "s");
        let bad = PartialConfig { depth: Some(9), ..partial(Experiment::CantorGrowth) };
        assert_eq!(RunConfig::resolve(bad).unwrap_err().field, "depth");
        let bad = PartialConfig { n: Some(2), ..partial(Experiment::SegmentBlowup) };
        assert_eq!(RunConfig::resolve(bad).unwrap_err().field, "n");
        assert_eq!(RunConfig::resolve(PartialConfig::default()).unwrap_err().field, "experiment");
    }

    #[test]
    fn sweep_rejects_large_generations() {
        let bad = PartialConfig { s: Some(0.75), depth: Some(4), ..partial(Experiment::CapacitySweep) };
        let err = RunConfig::resolve(bad).unwrap_err();
        assert_eq!(err.field, "depth");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"experiment":"cantor-growth","dept":3}"#).unwrap();
        assert_eq!(load_partial(&path).unwrap_err().field, "dept");
        std::fs::write(&path, r#"{"experiment":"cantor-growth","depth":3}"#).unwrap();
        assert_eq!(load_partial(&path).unwrap().depth, Some(3));
    }
}
