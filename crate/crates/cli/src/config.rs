use std::path::{Path, PathBuf};

use anyhow::Context;
use inkdx::cnn::BackendSpec;
use inkdx::dynamic::DynamicConfig;
use inkdx::evaluate::{EvalConfig, Experiment};
use inkdx::fixtures::PopulationParams;
use inkdx::render::{EdgeKernel, RenderConfig, RenderMode};
use inkdx::Error;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    OnnxFile,
    Stub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixtureSpec {
    pub n_per_class: usize,
    pub pd: PopulationParams,
    pub hc: PopulationParams,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            n_per_class: 36,
            pd: PopulationParams::parkinsonian(),
            hc: PopulationParams::healthy(),
        }
    }
}

/// Everything a run needs. Load order: defaults, then the config file, then
/// command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Manifest file, or a directory holding `manifest.json`. Defaults to
    /// `<out>/dataset`.
    pub dataset: Option<PathBuf>,
    pub fixture: FixtureSpec,
    pub backend: BackendKind,
    pub model: Option<PathBuf>,
    pub stub_seed: u64,
    pub modes: Vec<RenderMode>,
    pub render: RenderConfig,
    pub edge_kernel: EdgeKernel,
    pub dynamic: DynamicConfig,
    pub evaluate: EvalConfig,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            fixture: FixtureSpec::default(),
            backend: BackendKind::Stub,
            model: None,
            stub_seed: 0,
            modes: RenderMode::ALL.to_vec(),
            render: RenderConfig::default(),
            edge_kernel: EdgeKernel::default(),
            dynamic: DynamicConfig::default(),
            evaluate: EvalConfig::default(),
            seed: 0,
            jobs: None,
            out: PathBuf::from("inkdx-out"),
        }
    }
}

/// Flags shared by every subcommand; each one overrides the file value.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// JSON or TOML config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Manifest file or dataset directory.
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendKind>,
    /// ONNX backbone file (with `--backend onnx-file`).
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Render mode(s), comma separated: linked, velocity, enhanced.
    #[arg(long, global = true, value_delimiter = ',')]
    pub mode: Vec<String>,
    /// Comma-separated experiments, or `all`.
    #[arg(long, global = true)]
    pub experiments: Option<String>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Recompute cached artifacts.
    #[arg(long, global = true)]
    pub force: bool,
    /// Fit feature selection on all subjects before cross-validation.
    #[arg(long, global = true)]
    pub leaky: bool,
}

fn parse_file(path: &Path) -> inkdx::Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let is_toml = path.extension().is_some_and(|e| e == "toml");
    if is_toml {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    } else {
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

impl RunConfig {
    pub fn resolve(o: &Overrides) -> inkdx::Result<RunConfig> {
        let mut c = match &o.config {
            Some(p) => parse_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(d) = &o.dataset {
            c.dataset = Some(d.clone());
        }
        if let Some(b) = o.backend {
            c.backend = b;
        }
        if let Some(m) = &o.model {
            c.model = Some(m.clone());
        }
        if !o.mode.is_empty() {
            c.modes = o.mode.iter().map(|m| m.parse()).collect::<inkdx::Result<_>>()?;
        }
        if let Some(e) = &o.experiments {
            c.evaluate.experiments = Experiment::parse_list(e)?;
        }
        if let Some(s) = o.seed {
            c.seed = s;
        }
        if o.jobs.is_some() {
            c.jobs = o.jobs;
        }
        if let Some(out) = &o.out {
            c.out = out.clone();
        }
        if o.leaky {
            c.evaluate.leaky = true;
        }
        c.evaluate.seed = c.seed;
        c.modes.sort();
        c.modes.dedup();
        Ok(c)
    }

    pub fn validate(&self) -> inkdx::Result<()> {
        if self.modes.is_empty() {
            return Err(Error::Config("no render modes selected".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        self.render.validate()?;
        self.evaluate.validate()?;
        Ok(())
    }

    pub fn manifest_path(&self) -> PathBuf {
        match &self.dataset {
            Some(p) if p.is_dir() => p.join("manifest.json"),
            Some(p) => p.clone(),
            None => self.out.join("dataset").join("manifest.json"),
        }
    }

    /// Check the dataset and model exist before doing any work.
    pub fn check_inputs(&self, needs_model: bool) -> inkdx::Result<()> {
        if needs_model {
            self.backend_spec()?;
        }
        let m = self.manifest_path();
        if !m.is_file() {
            return Err(Error::InvalidManifest(format!("no manifest at {}", m.display())));
        }
        Ok(())
    }

    pub fn backend_spec(&self) -> inkdx::Result<BackendSpec> {
        match self.backend {
            BackendKind::Stub => Ok(BackendSpec::StubHash { seed: self.stub_seed }),
            BackendKind::OnnxFile => {
                let path = self
                    .model
                    .clone()
                    .ok_or_else(|| Error::Config("--backend onnx-file needs --model".into()))?;
                if !path.is_file() {
                    return Err(Error::ModelFileMissing(path));
                }
                Ok(BackendSpec::PretrainedBackbone { path })
            }
        }
    }

    pub fn to_json(&self) -> anyhow::Result<serde_json::Value> {
        serde_json::to_value(self).context("serializing config")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "seed = 7\nmodes = [\"linked\"]\n[evaluate]\nfolds = 5\n").unwrap();
        let o = Overrides {
            config: Some(p.clone()),
            ..Default::default()
        };
        let c = RunConfig::resolve(&o).unwrap();
        assert_eq!((c.seed, c.evaluate.seed, c.evaluate.folds), (7, 7, 5));
        assert_eq!(c.modes, [RenderMode::LinkedStatic]);
        let o = Overrides {
            config: Some(p),
            seed: Some(9),
            mode: vec!["enhanced".into(), "velocity".into()],
            ..Default::default()
        };
        let c = RunConfig::resolve(&o).unwrap();
        assert_eq!(c.evaluate.seed, 9);
        assert_eq!(c.modes, [RenderMode::VelocityPoints, RenderMode::EnhancedPoints]);
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.json");
        let c = RunConfig::default();
        std::fs::write(&p, serde_json::to_string(&c).unwrap()).unwrap();
        let o = Overrides {
            config: Some(p),
            ..Default::default()
        };
        assert_eq!(RunConfig::resolve(&o).unwrap(), c);
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.json");
        std::fs::write(&p, r#"{"sede": 1}"#).unwrap();
        let o = Overrides {
            config: Some(p),
            ..Default::default()
        };
        assert!(matches!(RunConfig::resolve(&o), Err(Error::Config(_))));
    }
}
