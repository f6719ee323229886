//! Run configuration: a versioned TOML document with one section per
//! experiment. Unknown keys are rejected; every field is validated before
//! any simulation starts.
//!
//! ```toml
//! schema_version = 1
//! experiment = "coherence"
//! seed = 7
//! masses = [0.38, 1.0, 1.0, 0.38]
//!
//! [lattice]
//! n = 5
//! m = 2
//! grid = { kind = "pattern", gaps = [1, 2] }
//!
//! [coherence]
//! betas = [6.0, 7.0, 8.0]
//! sizes = [24]
//! trials = 2000
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decoder::HdrgDecoder;
use crate::error::{Error, Result};
use crate::experiments::coherence::CoherenceConfig;
use crate::experiments::fit::Model;
use crate::experiments::single_pair::SinglePairConfig;
use crate::experiments::LatticeFamily;
use crate::kmc::Mode;
use crate::lattice::{validate_degeneracy, Lattice};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Validate,
    Coherence,
    SinglePair,
    Fit,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Validate => "validate",
            Experiment::Coherence => "coherence",
            Experiment::SinglePair => "single-pair",
            Experiment::Fit => "fit",
        }
    }
}

fn default_seed() -> u64 {
    1
}

fn default_masses() -> Vec<f64> {
    vec![0.38, 1.0, 1.0, 0.38]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub experiment: Experiment,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads; 0 uses every core. Does not affect results.
    #[serde(default)]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Energies `J_1 … J_{N−1}`.
    #[serde(default = "default_masses")]
    pub masses: Vec<f64>,
    pub lattice: LatticeFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coherence: Option<CoherenceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub single_pair: Option<SinglePairSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoherenceSection {
    pub betas: Vec<f64>,
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub threshold: f64,
    pub t0: f64,
    pub ratio: f64,
    pub max_time: f64,
    pub bootstrap: usize,
    pub stop_margin: f64,
    pub decoder: HdrgDecoder,
}

impl Default for CoherenceSection {
    fn default() -> Self {
        let c = CoherenceConfig::new(LatticeFamily::defect_free(5), Vec::new(), Vec::new(), Vec::new());
        Self {
            betas: Vec::new(),
            sizes: Vec::new(),
            trials: c.trials,
            threshold: c.threshold,
            t0: c.t0,
            ratio: c.ratio,
            max_time: c.max_time,
            bootstrap: c.bootstrap,
            stop_margin: c.stop_margin,
            decoder: c.decoder,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SinglePairSection {
    pub beta: f64,
    pub l: usize,
    pub t_max: f64,
    pub points: usize,
    pub samples: usize,
    pub mode: Mode,
}

impl Default for SinglePairSection {
    fn default() -> Self {
        Self {
            beta: 8.0,
            l: 24,
            t_max: 2000.0,
            points: 100,
            samples: 1000,
            mode: Mode::Restricted,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    /// Coherence-time CSV with columns `beta, L, tau, ...`.
    pub input: Option<PathBuf>,
    pub models: Vec<Model>,
    /// Lattice size used for the β models; defaults to the largest present.
    pub size: Option<usize>,
    /// Spatial dimension used when converting to entropic parameters.
    pub dimension: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            input: None,
            models: vec![Model::Arrhenius, Model::SuperExp, Model::PowerLaw],
            size: None,
            dimension: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    /// Sizes to check in addition to those used by other sections.
    pub sizes: Vec<usize>,
    /// Largest size for which the dense algebra audit is run.
    pub audit_max_l: usize,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            sizes: Vec::new(),
            audit_max_l: 16,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub masses: Option<Vec<f64>>,
    pub betas: Option<Vec<f64>>,
    pub sizes: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub threshold: Option<f64>,
    pub max_time: Option<f64>,
    pub beta: Option<f64>,
    pub l: Option<usize>,
    pub t_max: Option<f64>,
    pub samples: Option<usize>,
    pub input: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults used when no file is given.
    pub fn with_defaults(experiment: Experiment) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment,
            seed: default_seed(),
            workers: 0,
            output_dir: None,
            masses: default_masses(),
            lattice: LatticeFamily::defect_free(5),
            coherence: None,
            single_pair: None,
            fit: None,
            validate: None,
        }
    }

    /// Parse and validate.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg = Self::parse_unchecked(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse without semantic validation (schema violations still fail).
    pub fn parse_unchecked(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_unchecked(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.workers {
            self.workers = v;
        }
        if let Some(v) = &o.output_dir {
            self.output_dir = Some(v.clone());
        }
        if let Some(v) = &o.masses {
            self.masses = v.clone();
        }
        let touches_coherence = o.betas.is_some()
            || o.sizes.is_some()
            || o.trials.is_some()
            || o.threshold.is_some()
            || o.max_time.is_some();
        if touches_coherence || self.experiment == Experiment::Coherence {
            let c = self.coherence.get_or_insert_with(Default::default);
            if let Some(v) = &o.betas {
                c.betas = v.clone();
            }
            if let Some(v) = &o.sizes {
                c.sizes = v.clone();
            }
            if let Some(v) = o.trials {
                c.trials = v;
            }
            if let Some(v) = o.threshold {
                c.threshold = v;
            }
            if let Some(v) = o.max_time {
                c.max_time = v;
            }
        }
        let touches_pair = o.beta.is_some() || o.l.is_some() || o.t_max.is_some() || o.samples.is_some();
        if touches_pair || self.experiment == Experiment::SinglePair {
            let s = self.single_pair.get_or_insert_with(Default::default);
            if let Some(v) = o.beta {
                s.beta = v;
            }
            if let Some(v) = o.l {
                s.l = v;
            }
            if let Some(v) = o.t_max {
                s.t_max = v;
            }
            if let Some(v) = o.samples {
                s.samples = v;
            }
        }
        if o.input.is_some() || self.experiment == Experiment::Fit {
            let f = self.fit.get_or_insert_with(Default::default);
            if let Some(v) = &o.input {
                f.input = Some(v.clone());
            }
        }
    }

    pub fn coherence_config(&self) -> Result<CoherenceConfig> {
        let s = self
            .coherence
            .as_ref()
            .ok_or_else(|| Error::Config("missing [coherence] section".into()))?;
        Ok(CoherenceConfig {
            family: self.lattice.clone(),
            masses: self.masses.clone(),
            betas: s.betas.clone(),
            sizes: s.sizes.clone(),
            trials: s.trials,
            threshold: s.threshold,
            t0: s.t0,
            ratio: s.ratio,
            max_time: s.max_time,
            bootstrap: s.bootstrap,
            stop_margin: s.stop_margin,
            seed: self.seed,
            decoder: s.decoder,
        })
    }

    pub fn single_pair_config(&self) -> Result<SinglePairConfig> {
        let s = self
            .single_pair
            .as_ref()
            .ok_or_else(|| Error::Config("missing [single_pair] section".into()))?;
        Ok(SinglePairConfig {
            family: self.lattice.clone(),
            masses: self.masses.clone(),
            beta: s.beta,
            l: s.l,
            t_max: s.t_max,
            points: s.points,
            samples: s.samples,
            seed: self.seed,
            mode: s.mode,
        })
    }

    /// Every lattice size referenced by the config.
    pub fn sizes(&self) -> Vec<usize> {
        let mut out = BTreeSet::new();
        if let Some(c) = &self.coherence {
            out.extend(c.sizes.iter().copied());
        }
        if let Some(s) = &self.single_pair {
            out.insert(s.l);
        }
        if let Some(v) = &self.validate {
            out.extend(v.sizes.iter().copied());
        }
        out.into_iter().collect()
    }

    /// Semantic checks, including ground-state degeneracy at every size.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        for l in self.sizes() {
            let spec = self.lattice.spec(l);
            let report = validate_degeneracy(&spec)?;
            if !report.ok() {
                return Err(Error::Degeneracy(format!("L = {l}: {report}")));
            }
            Lattice::build(spec)?;
        }
        match self.experiment {
            Experiment::Validate => {
                if self.sizes().is_empty() {
                    return Err(Error::Config(
                        "nothing to validate: give sizes in [validate], [coherence] or [single_pair]".into(),
                    ));
                }
            }
            Experiment::Coherence => self.coherence_config()?.validate()?,
            Experiment::SinglePair => self.single_pair_config()?.validate()?,
            Experiment::Fit => {
                let f = self.fit.as_ref().ok_or_else(|| Error::Config("missing [fit] section".into()))?;
                if f.input.is_none() {
                    return Err(Error::Config("fit needs an input coherence-time CSV".into()));
                }
                if f.models.is_empty() {
                    return Err(Error::Config("fit needs at least one model".into()));
                }
                if !(f.dimension > 0.0) {
                    return Err(Error::Config("fit dimension must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Hash of everything that determines results; the worker count and
    /// output location are excluded.
    pub fn manifest_hash(&self) -> String {
        let mut canon = self.clone();
        canon.workers = 0;
        canon.output_dir = None;
        let json = serde_json::to_string(&canon).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }
}

/// Whether an error stems from the configuration rather than the run.
pub fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_) | Error::InvalidSpec(_) | Error::Degeneracy(_) | Error::InvalidParameter(_)
    )
}
