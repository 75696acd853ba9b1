//! Whole-run configuration and the run manifest.
//!
//! A manifest is itself a flat config: `run.*` metadata lines followed by the
//! fully resolved configuration, so it can be fed back to `--config`.

use std::path::{Path, PathBuf};

use crate::a3c::TrainerConfig;
use crate::config::{ConfigError, FlatConfig, FlatSection, FlatWriter};
use crate::env::EnvConfig;
use crate::nn::{ArchConfig, Descriptor};

pub const MANIFEST_FILE: &str = "manifest.cfg";

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub n_episodes: u64,
    pub base_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_episodes: 1000,
            base_seed: 1_000_000,
        }
    }
}

impl FlatSection for EvalConfig {
    fn read_section(&mut self, cfg: &mut FlatConfig) -> Result<(), ConfigError> {
        cfg.read("eval.n_episodes", &mut self.n_episodes)?;
        cfg.read("eval.base_seed", &mut self.base_seed)
    }

    fn write_section(&self, out: &mut FlatWriter) {
        out.put("eval.n_episodes", self.n_episodes);
        out.put("eval.base_seed", self.base_seed);
    }
}

/// Every section of a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub arch: ArchConfig,
    pub trainer: TrainerConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    /// Defaults overlaid with `path` (if any) and then with `key=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut flat = match path {
            Some(p) => FlatConfig::load(p)?,
            None => FlatConfig::default(),
        };
        for o in overrides {
            flat.set_override(o)?;
        }
        Self::from_flat(&mut flat)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_flat(&mut FlatConfig::parse(text)?)
    }

    pub fn from_flat(flat: &mut FlatConfig) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        cfg.read_section(flat)?;
        flat.ignore_prefix("run.");
        flat.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.env.validate()?;
        self.trainer.validate()?;
        self.descriptor().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.eval.n_episodes == 0 {
            return Err(ConfigError::Invalid("eval.n_episodes must be at least 1".into()));
        }
        Ok(())
    }

    pub fn descriptor(&self) -> Descriptor {
        Descriptor::for_env(&self.env, &self.arch)
    }

    pub fn to_text(&self) -> String {
        let mut w = FlatWriter::new();
        self.write_section(&mut w);
        w.finish()
    }
}

impl FlatSection for RunConfig {
    fn read_section(&mut self, cfg: &mut FlatConfig) -> Result<(), ConfigError> {
        self.env.read_section(cfg)?;
        self.arch.read_section(cfg)?;
        self.trainer.read_section(cfg)?;
        self.eval.read_section(cfg)
    }

    fn write_section(&self, out: &mut FlatWriter) {
        self.env.write_section(out);
        self.arch.write_section(out);
        self.trainer.write_section(out);
        self.eval.write_section(out);
    }
}

/// Identity, timing and artifacts of one run plus its resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub seed: u64,
    pub started: String,
    pub finished: Option<String>,
    /// Files the run read, such as evaluated checkpoints.
    pub inputs: Vec<PathBuf>,
    pub artifacts: Vec<PathBuf>,
    pub config: RunConfig,
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let mut w = FlatWriter::new();
        w.put("run.id", &self.run_id);
        w.put("run.command", &self.command);
        w.put("run.seed", self.seed);
        w.put("run.started", &self.started);
        if let Some(f) = &self.finished {
            w.put("run.finished", f);
        }
        for (i, p) in self.inputs.iter().enumerate() {
            w.put(&format!("run.input.{i}"), p.display());
        }
        for (i, a) in self.artifacts.iter().enumerate() {
            w.put(&format!("run.artifact.{i}"), a.display());
        }
        self.config.write_section(&mut w);
        w.finish()
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, self.to_text())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let mut cfg = RunConfig::default();
        cfg.trainer.total_episodes = 17;
        cfg.env.setting = crate::env::Setting::Basic;
        cfg.arch.use_lstm = false;
        let back = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn manifest_reloads_as_config() {
        let m = RunManifest {
            run_id: "20260101-000000-abcd".into(),
            command: "train".into(),
            seed: 9,
            started: "2026-01-01T00:00:00Z".into(),
            finished: Some("2026-01-01T00:01:00Z".into()),
            inputs: vec!["in.bin".into()],
            artifacts: vec!["final.bin".into()],
            config: RunConfig::default(),
        };
        assert_eq!(RunConfig::parse(&m.to_text()).unwrap(), m.config);
    }

    #[test]
    fn unknown_key_is_reported_with_line() {
        let err = RunConfig::parse("trainer.gamma = 0.9\ntrainer.gama = 0.9\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
        assert!(err.to_string().contains("trainer.gama"));
    }

    #[test]
    fn overrides_apply_after_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.cfg");
        std::fs::write(&p, "trainer.total_episodes = 5\n").unwrap();
        let cfg = RunConfig::load(Some(&p), &["trainer.total_episodes=10".into()]).unwrap();
        assert_eq!(cfg.trainer.total_episodes, 10);
        assert!(RunConfig::load(None, &["nope.key=1".into()]).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::parse("trainer.gamma = 1.5\n").is_err());
        assert!(RunConfig::parse("eval.n_episodes = 0\n").is_err());
    }
}
