//! Run configuration files and the bundled experiment presets.
//!
//! A configuration is a JSON document naming a dataset, a model, a prior and
//! sampler settings. Relative dataset paths are resolved against the
//! directory holding the configuration file.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::{self, Builtin};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{GaussianPrior, ModelSpec};
use crate::samplers::{Algorithm, CovarianceSpec, SamplerConfig, Variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSpec {
    Builtin(Builtin),
    Files { nodes: PathBuf, edges: PathBuf },
}

impl DatasetSpec {
    pub fn load(&self) -> Result<Graph> {
        match self {
            DatasetSpec::Builtin(b) => b.load(),
            DatasetSpec::Files { nodes, edges } => data::load_files(nodes, edges),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            DatasetSpec::Builtin(b) => b.name().to_string(),
            DatasetSpec::Files { edges, .. } => edges.display().to_string(),
        }
    }
}

/// Prior mean given as one value for every coordinate or as a full vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeanSpec {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSpec {
    pub mean: MeanSpec,
    pub covariance: CovarianceSpec,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            mean: MeanSpec::Scalar(0.0),
            covariance: CovarianceSpec::Scalar(100.0),
        }
    }
}

impl PriorSpec {
    pub fn build(&self, d: usize) -> Result<GaussianPrior> {
        let mean = match &self.mean {
            MeanSpec::Scalar(m) => DVector::from_element(d, *m),
            MeanSpec::Vector(v) if v.len() == d => DVector::from_column_slice(v),
            MeanSpec::Vector(v) => {
                return Err(Error::Dimension {
                    expected: d,
                    got: v.len(),
                })
            }
        };
        GaussianPrior::new(mean, self.covariance.to_matrix(d)?)
    }
}

/// Population size and length used for one adaptation scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantOverride {
    pub variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chains: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub main_iters: Option<usize>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_replicates() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dataset: DatasetSpec,
    pub model: ModelSpec,
    #[serde(default)]
    pub prior: PriorSpec,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Algorithms compared by `compare`; empty means the sampler's own.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<Algorithm>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<VariantOverride>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Reads a configuration file, or a bundled preset when `path` names one
    /// and no such file exists.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                return match preset(&path.to_string_lossy()) {
                    Some(p) => p,
                    None => Err(Error::io(path, e)),
                }
            }
        };
        let mut cfg = RunConfig::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let DatasetSpec::Files { nodes, edges } = &mut cfg.dataset {
            for p in [nodes, edges] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn load_graph(&self) -> Result<Graph> {
        self.dataset.load()
    }

    pub fn prior(&self) -> Result<GaussianPrior> {
        self.prior.build(self.model.dim())
    }

    /// Algorithms run by `compare`.
    pub fn algorithms(&self) -> Vec<Algorithm> {
        if self.variants.is_empty() {
            vec![self.sampler.algorithm()]
        } else {
            self.variants.clone()
        }
    }

    /// Sampler settings for `alg`, with any override for its variant applied.
    pub fn sampler_for(&self, alg: Algorithm) -> SamplerConfig {
        let mut s = self.sampler.clone();
        s.set_algorithm(alg);
        for o in self.overrides.iter().filter(|o| o.variant == alg.variant) {
            if let Some(c) = o.chains {
                s.chains = c;
            }
            if let Some(m) = o.main_iters {
                s.main_iters = m;
            }
        }
        s
    }

    /// Checks the model against `g` and every sampler setting that would run.
    pub fn validate(&self, g: &Graph) -> Result<()> {
        self.model.bind(g)?;
        self.prior()?;
        if self.replicates == 0 {
            return Err(Error::config("replicates must be at least 1"));
        }
        for alg in self.algorithms() {
            self.sampler_for(alg).validate(self.model.dim())?;
        }
        Ok(())
    }
}

/// Names of the bundled presets and their JSON text.
pub const PRESETS: [(&str, &str); 4] = [
    ("florentine", include_str!("../presets/florentine.json")),
    ("karate", include_str!("../presets/karate.json")),
    ("fauxmesa", include_str!("../presets/fauxmesa.json")),
    ("fauxmesa-smoke", include_str!("../presets/fauxmesa-smoke.json")),
];

pub fn preset(name: &str) -> Option<Result<RunConfig>> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| RunConfig::from_json(text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip() {
        for (name, text) in PRESETS {
            let cfg = RunConfig::from_json(text).unwrap();
            let back = RunConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(cfg, back, "{name}");
            assert_eq!(cfg.name.as_deref(), Some(name));
            let g = cfg.load_graph().unwrap();
            cfg.validate(&g).unwrap();
        }
    }

    #[test]
    fn preset_models() {
        let flo = preset("florentine").unwrap().unwrap();
        assert_eq!(flo.model.to_string(), "edges, kstar(2), kstar(3)");
        assert_eq!(flo.algorithms().len(), 8);
        let h = flo.sampler_for("aaea-2".parse().unwrap());
        assert_eq!((h.chains, h.main_iters), (24, 1000));
        let a = flo.sampler_for("ads-aea+dr".parse().unwrap());
        assert_eq!((a.chains, a.main_iters, a.aux_iters, a.gamma), (6, 4000, 50, 0.8));
        assert!(a.dr);

        let mesa = preset("fauxmesa").unwrap().unwrap();
        assert_eq!(mesa.model.dim(), 9);
        let v = mesa.sampler_for("aaea-1".parse().unwrap());
        assert_eq!(v.chains * v.main_iters, 60_000);
        let smoke = preset("fauxmesa-smoke").unwrap().unwrap();
        assert_eq!(smoke.sampler.chains * smoke.sampler.main_iters, 6000);
        assert_eq!(smoke.sampler.aux_iters, 1000);
        assert!(preset("nope").is_none());
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = RunConfig::from_json(r#"{"dataset": "karate", "model": ["edges"]}"#).unwrap();
        assert_eq!(cfg.prior, PriorSpec::default());
        assert_eq!(cfg.sampler, SamplerConfig::default());
        assert_eq!(cfg.replicates, 1);
        let p = cfg.prior().unwrap();
        assert_eq!(p.covariance()[(0, 0)], 100.0);
        assert!(RunConfig::from_json(r#"{"dataset": "karate", "model": ["edges"], "bogus": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"dataset": "nowhere", "model": ["edges"]}"#).is_err());
    }

    #[test]
    fn prior_spec_shapes() {
        let p = PriorSpec {
            mean: MeanSpec::Vector(vec![1.0, 2.0]),
            covariance: CovarianceSpec::Matrix(vec![vec![2.0, 0.5], vec![0.5, 1.0]]),
        };
        let g = p.build(2).unwrap();
        assert_eq!(g.mean()[1], 2.0);
        assert_eq!(g.covariance()[(0, 1)], 0.5);
        assert!(p.build(3).is_err());
    }

    #[test]
    fn validation_catches_missing_attributes() {
        let cfg =
            RunConfig::from_json(r#"{"dataset": "florentine", "model": ["edges", "nodefactor(grade,8)"]}"#).unwrap();
        let g = cfg.load_graph().unwrap();
        assert!(cfg.validate(&g).is_err());
    }

    #[test]
    fn file_paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("n.csv"), "node\na\nb\nc\n").unwrap();
        std::fs::write(dir.path().join("e.tsv"), "a\tb\n").unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(
            &path,
            r#"{"dataset": {"nodes": "n.csv", "edges": "e.tsv"}, "model": ["edges"]}"#,
        )
        .unwrap();
        let cfg = RunConfig::from_file(&path).unwrap();
        let g = cfg.load_graph().unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (3, 1));
        assert!(matches!(
            RunConfig::from_file(&dir.path().join("none.json")),
            Err(Error::Io { .. })
        ));
        assert!(RunConfig::from_file(Path::new("karate")).is_ok());
    }
}
