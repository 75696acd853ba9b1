//! Advantage actor-critic training with parallel workers sharing one
//! parameter set and one RMSProp accumulator set.
//!
//! Two schedules are provided. `lockstep` (default) gives every worker the same
//! snapshot each round, collects all rollouts, then applies the gradients in
//! worker order; it reproduces bit-exactly for any worker count. `async` runs
//! free threads that snapshot and apply whenever they finish a rollout, with
//! each application serialized under one lock.

mod rollout;
mod train;


use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use thiserror::Error;

use crate::config::{ConfigError, FlatConfig, FlatSection, FlatWriter};
use crate::env::EnvError;
use crate::nn::{Gradients, NetworkParams, NnError, Tensor};

pub use rollout::{collect_rollout, rollout_gradients, ActionSelection, Rollout, RolloutStep};
pub use train::{checkpoint_name, episode_seed, splitmix64, train, worker_seed, FINAL_CHECKPOINT, METRICS_FILE, EpisodeRecord, TrainOptions, TrainOutcome};

#[derive(Debug, Error)]
pub enum A3cError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("environment: {0}")]
    Env(#[from] EnvError),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("worker {0} panicked")]
    WorkerPanic(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    Lockstep,
    Async,
}

impl FromStr for Schedule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lockstep" => Ok(Schedule::Lockstep),
            "async" => Ok(Schedule::Async),
            _ => Err(format!("expected `lockstep` or `async`, got `{s}`")),
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schedule::Lockstep => "lockstep",
            Schedule::Async => "async",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub gamma: f64,
    pub beta: f64,
    pub value_coef: f64,
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub rms_epsilon: f64,
    pub grad_clip: f64,
    pub n_workers: usize,
    pub rollout_len: usize,
    pub total_episodes: u64,
    /// Checkpoint every this many finished episodes; 0 disables periodic checkpoints.
    pub checkpoint_period: u64,
    pub seed: u64,
    pub schedule: Schedule,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            gamma: 0.99,
            beta: 0.01,
            value_coef: 0.5,
            learning_rate: 1e-4,
            rms_decay: 0.99,
            rms_epsilon: 1e-5,
            grad_clip: 40.0,
            n_workers: 8,
            rollout_len: 20,
            total_episodes: 1000,
            checkpoint_period: 100,
            seed: 0,
            schedule: Schedule::Lockstep,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("trainer.gamma must lie in (0, 1]");
        }
        if !(self.beta >= 0.0) {
            return bad("trainer.beta must be non-negative");
        }
        if !(self.value_coef >= 0.0) {
            return bad("trainer.value_coef must be non-negative");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("trainer.learning_rate must be non-negative");
        }
        if !(self.rms_decay >= 0.0 && self.rms_decay < 1.0) {
            return bad("trainer.rms_decay must lie in [0, 1)");
        }
        if !(self.rms_epsilon > 0.0) {
            return bad("trainer.rms_epsilon must be positive");
        }
        if !(self.grad_clip > 0.0) {
            return bad("trainer.grad_clip must be positive");
        }
        if self.n_workers == 0 {
            return bad("trainer.n_workers must be at least 1");
        }
        if self.rollout_len == 0 {
            return bad("trainer.rollout_len must be at least 1");
        }
        Ok(())
    }

    pub fn loss_weights(&self) -> crate::nn::LossWeights {
        crate::nn::LossWeights {
            beta: self.beta,
            value_coef: self.value_coef,
        }
    }
}

impl FlatSection for TrainerConfig {
    fn read_section(&mut self, cfg: &mut FlatConfig) -> Result<(), ConfigError> {
        cfg.read("trainer.gamma", &mut self.gamma)?;
        cfg.read("trainer.beta", &mut self.beta)?;
        cfg.read("trainer.value_coef", &mut self.value_coef)?;
        cfg.read("trainer.learning_rate", &mut self.learning_rate)?;
        cfg.read("trainer.rms_decay", &mut self.rms_decay)?;
        cfg.read("trainer.rms_epsilon", &mut self.rms_epsilon)?;
        cfg.read("trainer.grad_clip", &mut self.grad_clip)?;
        cfg.read("trainer.n_workers", &mut self.n_workers)?;
        cfg.read("trainer.rollout_len", &mut self.rollout_len)?;
        cfg.read("trainer.total_episodes", &mut self.total_episodes)?;
        cfg.read("trainer.checkpoint_period", &mut self.checkpoint_period)?;
        cfg.read("trainer.seed", &mut self.seed)?;
        cfg.read("trainer.schedule", &mut self.schedule)?;
        Ok(())
    }

    fn write_section(&self, out: &mut FlatWriter) {
        out.put("trainer.gamma", self.gamma);
        out.put("trainer.beta", self.beta);
        out.put("trainer.value_coef", self.value_coef);
        out.put("trainer.learning_rate", self.learning_rate);
        out.put("trainer.rms_decay", self.rms_decay);
        out.put("trainer.rms_epsilon", self.rms_epsilon);
        out.put("trainer.grad_clip", self.grad_clip);
        out.put("trainer.n_workers", self.n_workers);
        out.put("trainer.rollout_len", self.rollout_len);
        out.put("trainer.total_episodes", self.total_episodes);
        out.put("trainer.checkpoint_period", self.checkpoint_period);
        out.put("trainer.seed", self.seed);
        out.put("trainer.schedule", self.schedule);
    }
}

/// `G_t = r_t + γ G_{t+1}` with `G` after the last step equal to `bootstrap`.
pub fn compute_returns(rewards: &[f64], bootstrap: f64, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut g = bootstrap;
    for (o, &r) in out.iter_mut().zip(rewards).rev() {
        g = r + gamma * g;
        *o = g;
    }
    out
}

/// `A_t = G_t - V_t`.
pub fn compute_advantages(returns: &[f64], values: &[f64]) -> Result<Vec<f64>, A3cError> {
    if returns.len() != values.len() {
        return Err(A3cError::Usage(format!(
            "{} returns but {} values",
            returns.len(),
            values.len()
        )));
    }
    Ok(returns.iter().zip(values).map(|(g, v)| g - v).collect())
}

/// Mean-square accumulators, one per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub accumulators: Vec<Tensor>,
    pub decay: f64,
    pub epsilon: f64,
}

impl OptimizerState {
    pub fn new(params: &NetworkParams, decay: f64, epsilon: f64) -> Self {
        OptimizerState {
            accumulators: params.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect(),
            decay,
            epsilon,
        }
    }
}

/// `acc = d acc + (1-d) g²`; `θ -= lr g / sqrt(acc + ε)`.
pub fn apply_update(
    params: &mut NetworkParams,
    opt: &mut OptimizerState,
    grads: &Gradients,
    learning_rate: f64,
) -> Result<(), A3cError> {
    if !grads.matches(params) || opt.accumulators.len() != params.tensors.len() {
        return Err(A3cError::Usage("gradient shapes do not match parameters".into()));
    }
    let (d, eps) = (opt.decay, opt.epsilon);
    for ((p, acc), g) in params.tensors.iter_mut().zip(&mut opt.accumulators).zip(&grads.tensors) {
        if acc.shape() != p.shape() {
            return Err(A3cError::Usage("accumulator shapes do not match parameters".into()));
        }
        for ((pv, av), &gv) in p.data_mut().iter_mut().zip(acc.data_mut()).zip(g.data()) {
            *av = d * *av + (1.0 - d) * gv * gv;
            *pv -= learning_rate * gv / (*av + eps).sqrt();
        }
    }
    Ok(())
}

struct SharedInner {
    params: NetworkParams,
    opt: OptimizerState,
    version: u64,
}

/// Parameters and optimizer behind one lock: consistent snapshots, atomic updates.
pub struct SharedModel {
    inner: Mutex<SharedInner>,
}

impl SharedModel {
    pub fn new(params: NetworkParams, opt: OptimizerState) -> Self {
        SharedModel {
            inner: Mutex::new(SharedInner {
                params,
                opt,
                version: 0,
            }),
        }
    }

    /// Copy of the parameters with the number of updates applied so far.
    pub fn snapshot(&self) -> (u64, NetworkParams) {
        let g = self.inner.lock().expect("shared model lock poisoned");
        (g.version, g.params.clone())
    }

    /// Applies one gradient set; `observe` runs under the lock with the new version.
    pub fn apply(
        &self,
        grads: &Gradients,
        learning_rate: f64,
        observe: impl FnOnce(u64, &NetworkParams),
    ) -> Result<u64, A3cError> {
        let mut g = self.inner.lock().expect("shared model lock poisoned");
        let SharedInner { params, opt, version } = &mut *g;
        apply_update(params, opt, grads, learning_rate)?;
        *version += 1;
        observe(*version, params);
        Ok(*version)
    }

    pub fn into_parts(self) -> (NetworkParams, OptimizerState, u64) {
        let g = self.inner.into_inner().expect("shared model lock poisoned");
        (g.params, g.opt, g.version)
    }
}
