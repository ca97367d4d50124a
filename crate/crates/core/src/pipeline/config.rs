//! Run configuration.
//!
//! The file is TOML: top-level `key = value` pairs followed by sections.
//!
//! ```toml
//! seed = 0
//! out = "runs/planted"
//! jobs = 0
//!
//! [dataset]
//! synthetic = "planted-clique"   # or: path = "data", name = "IMDB-BINARY"
//! graphs = 100
//!
//! [augment]
//! properties = ["core", "truss"]
//! eps = 0.2                      # omitted: per-dataset default
//! f_kind = "square"
//! p_dr = 0.2
//!
//! [substructure]
//! clique_sizes = [3, 4, 5]
//! normalization = "log1p"
//!
//! [encoder]
//! epochs = 20
//! use_ogsn = true
//!
//! [eval]
//! folds = 10
//! repeats = 1
//! ```
//!
//! Every key is optional except the dataset source. The top-level `seed`
//! overrides `encoder.seed` and `eval.seed`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synthetic::SyntheticKind;
use crate::augment::FKind;
use crate::cohesion::Property;
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::substructure::SubstructureSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Featurization {
    #[default]
    Constant,
    /// One-hot degree capped at `max_degree`.
    Degree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Directory holding `<name>/<name>_A.txt` and friends.
    pub path: Option<PathBuf>,
    pub name: Option<String>,
    pub synthetic: Option<SyntheticKind>,
    /// Graph count for synthetic data.
    pub graphs: usize,
    /// Used for graphs without node labels.
    pub features: Featurization,
    pub max_degree: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            path: None,
            name: None,
            synthetic: None,
            graphs: 100,
            features: Featurization::Constant,
            max_degree: 10,
        }
    }
}

impl DatasetConfig {
    pub fn display_name(&self) -> String {
        match (&self.name, self.synthetic) {
            (Some(n), _) => n.clone(),
            (None, Some(k)) => k.as_str().to_string(),
            (None, None) => "unnamed".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub properties: Vec<Property>,
    pub eps: Option<f64>,
    pub f_kind: FKind,
    pub p_dr: f64,
    pub eta: Option<f64>,
    pub alpha: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            properties: vec![Property::Core, Property::Truss],
            eps: None,
            f_kind: FKind::Square,
            p_dr: 0.2,
            eta: None,
            alpha: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; `0` uses every core.
    pub jobs: usize,
    pub dataset: DatasetConfig,
    pub augment: AugmentConfig,
    pub substructure: SubstructureSpec,
    pub encoder: EncoderConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            out: PathBuf::from("out"),
            jobs: 0,
            dataset: DatasetConfig::default(),
            augment: AugmentConfig::default(),
            substructure: SubstructureSpec::default(),
            encoder: EncoderConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

const DEFAULT_EPS: f64 = 0.2;
const DEFAULT_ETA: f64 = 0.4;

/// Grid-searched `eps` for the node-dropping path on known benchmarks.
pub fn dataset_default_eps(name: &str) -> Option<f64> {
    Some(match name {
        "IMDB-BINARY" | "IMDB-B" => 0.2,
        "IMDB-MULTI" | "IMDB-M" => 0.4,
        "COLLAB" => 0.2,
        "REDDIT-BINARY" | "RDT-B" => 0.4,
        "reddit_threads" | "RDT-T" => 0.2,
        "ENZYMES" => 0.4,
        "PROTEINS" => 0.8,
        _ => return None,
    })
}

/// Grid-searched `eta` for the diffusion path on known benchmarks.
pub fn dataset_default_eta(name: &str) -> Option<f64> {
    Some(match name {
        "IMDB-BINARY" | "IMDB-B" | "IMDB-MULTI" | "IMDB-M" => 0.4,
        "COLLAB" => 0.2,
        "ENZYMES" => 0.6,
        "PROTEINS" => 0.8,
        _ => return None,
    })
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::parse("config", e.message().to_string()))?;
        cfg.resolved()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        // relative dataset/output paths are taken relative to the config file
        if let Some(dir) = path.parent() {
            if let Some(p) = &cfg.dataset.path {
                if p.is_relative() {
                    cfg.dataset.path = Some(dir.join(p));
                }
            }
            if cfg.out.is_relative() {
                cfg.out = dir.join(&cfg.out);
            }
        }
        Ok(cfg)
    }

    /// Applies the global seed and per-dataset defaults, then validates.
    pub fn resolved(mut self) -> Result<Self> {
        self.encoder.seed = self.seed;
        self.eval.seed = self.seed;
        let name = self.dataset.display_name();
        self.augment
            .eps
            .get_or_insert(dataset_default_eps(&name).unwrap_or(DEFAULT_EPS));
        self.augment
            .eta
            .get_or_insert(dataset_default_eta(&name).unwrap_or(DEFAULT_ETA));
        self.augment.properties.sort();
        self.augment.properties.dedup();
        self.validate()?;
        Ok(self)
    }

    pub fn eps(&self) -> f64 {
        self.augment.eps.unwrap_or(DEFAULT_EPS)
    }

    pub fn eta(&self) -> f64 {
        self.augment.eta.unwrap_or(DEFAULT_ETA)
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.augment;
        if a.properties.is_empty() {
            return Err(Error::Argument(
                "augment.properties must not be empty".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.eps()) {
            return Err(Error::Argument(format!(
                "augment.eps = {} outside [0, 1]",
                self.eps()
            )));
        }
        if !(0.0..1.0).contains(&a.p_dr) {
            return Err(Error::Argument(format!(
                "augment.p_dr = {} outside [0, 1)",
                a.p_dr
            )));
        }
        if self.eps() > 0.0 && a.p_dr == 0.0 {
            return Err(Error::Argument(
                "augment.eps > 0 needs augment.p_dr > 0".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.eta()) {
            return Err(Error::Argument(format!(
                "augment.eta = {} outside [0, 1]",
                self.eta()
            )));
        }
        if !(a.alpha > 0.0 && a.alpha <= 1.0) {
            return Err(Error::Argument(format!(
                "augment.alpha = {} outside (0, 1]",
                a.alpha
            )));
        }
        self.substructure.validate()?;
        self.encoder.validate()?;
        if self.eval.folds < 2 || self.eval.repeats == 0 {
            return Err(Error::Argument(
                "eval needs folds >= 2 and repeats >= 1".into(),
            ));
        }
        let d = &self.dataset;
        match (&d.path, d.synthetic) {
            (Some(_), Some(_)) => Err(Error::Argument(
                "dataset: give either path or synthetic, not both".into(),
            )),
            (None, None) => Err(Error::Argument(
                "dataset: one of path or synthetic is required".into(),
            )),
            (Some(_), None) if d.name.is_none() => {
                Err(Error::Argument("dataset.name is required with path".into()))
            }
            _ => Ok(()),
        }
    }

    /// Canonical TOML rendering, used verbatim in the run manifest.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_synthetic_config() {
        let cfg =
            PipelineConfig::from_toml("seed = 3\n[dataset]\nsynthetic = \"planted-clique\"\n")
                .unwrap();
        assert_eq!(cfg.encoder.seed, 3);
        assert_eq!(cfg.eval.seed, 3);
        assert_eq!(cfg.eps(), 0.2);
        assert_eq!(
            cfg.augment.properties,
            vec![Property::Core, Property::Truss]
        );
        let again = PipelineConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn dataset_defaults_apply() {
        let cfg =
            PipelineConfig::from_toml("[dataset]\npath = \"d\"\nname = \"PROTEINS\"\n").unwrap();
        assert_eq!(cfg.eps(), 0.8);
        assert_eq!(cfg.eta(), 0.8);
        let cfg = PipelineConfig::from_toml(
            "[dataset]\npath = \"d\"\nname = \"PROTEINS\"\n[augment]\neps = 0.1\n",
        )
        .unwrap();
        assert_eq!(cfg.eps(), 0.1);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "[dataset]\n",
            "[dataset]\nsynthetic = \"planted-clique\"\n[augment]\nproperties = []\n",
            "[dataset]\nsynthetic = \"planted-clique\"\n[augment]\neps = 2.0\n",
            "[dataset]\nsynthetic = \"planted-clique\"\n[encoder]\ntau = 0.0\n",
            "[dataset]\nsynthetic = \"planted-clique\"\nbogus = 1\n",
            "[dataset]\npath = \"x\"\n",
        ] {
            assert!(PipelineConfig::from_toml(text).is_err(), "{text}");
        }
    }
}
