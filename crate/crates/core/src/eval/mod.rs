//! Seeded evaluation: episode statistics, winning rates, the ablation grid and
//! debug dumps of frames and convolution activations.


use std::fmt;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::a3c::splitmix64;
use crate::config::ConfigError;
use crate::env::{Env, EnvConfig, EnvError, Observation, Setting, StepResult};
use crate::nn::{conv_activations, forward, greedy_action, Descriptor, LstmState, NetInput, NetworkParams, NnError};
use crate::render::GrayscaleFrame;
use crate::sim::{ActionId, Winner};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("environment: {0}")]
    Env(#[from] EnvError),
    #[error("checkpoint descriptor `{checkpoint}` does not match the environment, which needs `{expected}`")]
    Mismatch { checkpoint: String, expected: String },
    #[error("usage error: {0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// How the agent picks actions during evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// Uniform over the action space, seeded from the episode seed.
    Random,
    /// Argmax of the network's policy, lowest index on ties.
    Greedy(NetworkParams),
}

impl Policy {
    /// Checks that the policy fits the environment's observation and action space.
    pub fn check(&self, env: &EnvConfig) -> Result<(), EvalError> {
        let Policy::Greedy(params) = self else { return Ok(()) };
        let have = params.descriptor();
        let expected = expected_descriptor(have, env);
        if *have != expected {
            return Err(EvalError::Mismatch {
                checkpoint: have.to_string(),
                expected: expected.to_string(),
            });
        }
        Ok(())
    }
}

/// `d` with every environment-derived field replaced by what `env` produces.
pub fn expected_descriptor(d: &Descriptor, env: &EnvConfig) -> Descriptor {
    Descriptor {
        in_channels: crate::render::FrameStack::DEPTH,
        in_height: env.render.height,
        in_width: env.render.width,
        info_dim: env.info_dim(),
        num_actions: env.num_actions(),
        ..d.clone()
    }
}

struct Actor<'a> {
    policy: &'a Policy,
    rng: ChaCha8Rng,
    state: Option<LstmState>,
}

impl<'a> Actor<'a> {
    fn new(policy: &'a Policy, seed: u64) -> Self {
        let state = match policy {
            Policy::Random => None,
            Policy::Greedy(p) => Some(LstmState::for_params(p)),
        };
        Actor {
            policy,
            rng: ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x00A2_5EEE_D00D)),
            state,
        }
    }

    fn act(&mut self, obs: &Observation, n_actions: usize) -> Result<usize, EvalError> {
        match self.policy {
            Policy::Random => Ok(self.rng.random_range(0..n_actions)),
            Policy::Greedy(p) => {
                let state = self.state.as_ref().expect("greedy actor carries a state");
                let out = forward(p, &NetInput::from(obs), state)?;
                let a = greedy_action(out.probs());
                self.state = Some(out.new_lstm_state);
                Ok(a)
            }
        }
    }
}

/// Outcome of one evaluation episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub seed: u64,
    pub total_reward: f64,
    /// Agent steps.
    pub length: u64,
    /// `Agent` only on a knockout of the opponent; timeouts are draws.
    pub winner: Winner,
    /// `(agent, opponent)` hit points at the end.
    pub final_hp: (u32, u32),
}

impl fmt::Display for EpisodeStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "seed {} winner {} reward {} length {} hp {}/{}",
            self.seed, self.winner, self.total_reward, self.length, self.final_hp.0, self.final_hp.1
        )
    }
}

/// Knockout-only result: anything short of a knockout counts as a draw.
pub fn ko_winner(hp_agent: u32, hp_opponent: u32) -> Winner {
    match (hp_agent, hp_opponent) {
        (a, 0) if a > 0 => Winner::Agent,
        (0, o) if o > 0 => Winner::Opponent,
        _ => Winner::Draw,
    }
}

/// Plays one episode from `seed`; `observer` sees every step after it is taken.
pub fn run_episode_with(
    policy: &Policy,
    env: &mut Env,
    seed: u64,
    mut observer: impl FnMut(&Env, ActionId, &StepResult),
) -> Result<EpisodeStats, EvalError> {
    policy.check(env.config())?;
    let space = env.action_space();
    let mut actor = Actor::new(policy, seed);
    let mut obs = env.reset(seed);
    let mut total_reward = 0.0;
    let mut length = 0;
    loop {
        let action = space[actor.act(&obs, space.len())?];
        let r = env.step(action)?;
        total_reward += r.reward;
        length += 1;
        observer(env, action, &r);
        if r.done {
            let d = &r.diagnostics;
            return Ok(EpisodeStats {
                seed,
                total_reward,
                length,
                winner: ko_winner(d.hp_agent, d.hp_opponent),
                final_hp: (d.hp_agent, d.hp_opponent),
            });
        }
        obs = r.observation;
    }
}

pub fn run_episode(policy: &Policy, env: &mut Env, seed: u64) -> Result<EpisodeStats, EvalError> {
    run_episode_with(policy, env, seed, |_, _, _| {})
}

/// Aggregate over seeds `base_seed..base_seed + n`.
#[derive(Debug, Clone, PartialEq)]
pub struct WinRate {
    pub episodes: Vec<EpisodeStats>,
    pub wins: u64,
    pub draws: u64,
    pub losses: u64,
}

impl WinRate {
    pub fn from_episodes(episodes: Vec<EpisodeStats>) -> Self {
        let count = |w: Winner| episodes.iter().filter(|e| e.winner == w).count() as u64;
        WinRate {
            wins: count(Winner::Agent),
            draws: count(Winner::Draw),
            losses: count(Winner::Opponent),
            episodes,
        }
    }

    pub fn n(&self) -> u64 {
        self.episodes.len() as u64
    }

    /// Wins over episodes; draws are not wins.
    pub fn wr(&self) -> f64 {
        if self.episodes.is_empty() {
            0.0
        } else {
            self.wins as f64 / self.n() as f64
        }
    }

    /// Per-episode CSV: `seed,total_reward,length,winner,hp_agent,hp_opponent`.
    pub fn write_episodes_csv(&self, path: &Path) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path)(e.into()))?;
        w.write_record(["seed", "total_reward", "length", "winner", "hp_agent", "hp_opponent"])
            .map_err(|e| io_err(path)(e.into()))?;
        for e in &self.episodes {
            w.write_record([
                e.seed.to_string(),
                e.total_reward.to_string(),
                e.length.to_string(),
                e.winner.to_string(),
                e.final_hp.0.to_string(),
                e.final_hp.1.to_string(),
            ])
            .map_err(|e| io_err(path)(e.into()))?;
        }
        w.flush().map_err(io_err(path))
    }
}

/// Runs `n_episodes` seeded episodes in parallel; results are ordered by seed.
pub fn winning_rate(policy: &Policy, env_cfg: &EnvConfig, n_episodes: u64, base_seed: u64) -> Result<WinRate, EvalError> {
    if n_episodes == 0 {
        return Err(EvalError::Usage("n_episodes must be at least 1".into()));
    }
    env_cfg.validate()?;
    policy.check(env_cfg)?;
    let episodes = (0..n_episodes)
        .into_par_iter()
        .map_init(
            || Env::new(env_cfg.clone()).expect("validated config"),
            |env, k| run_episode(policy, env, base_seed.wrapping_add(k)),
        )
        .collect::<Result<Vec<_>, _>>()?;
    Ok(WinRate::from_episodes(episodes))
}

/// Where an ablation row's policy comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySource {
    Random,
    Checkpoint(PathBuf),
}

/// One row of the ablation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationSpec {
    pub use_lstm: bool,
    pub use_info: bool,
    pub setting: Setting,
    pub source: PolicySource,
}

impl AblationSpec {
    pub fn label(&self) -> String {
        match (&self.source, self.use_lstm, self.use_info) {
            (PolicySource::Random, _, _) => "random".into(),
            (_, true, true) => "lstm+info".into(),
            (_, false, true) => "info".into(),
            (_, true, false) => "lstm".into(),
            (_, false, false) => "conv".into(),
        }
    }
}

/// Checkpoint file name of a grid row inside a grid directory.
pub fn grid_file(use_lstm: bool, use_info: bool) -> &'static str {
    match (use_lstm, use_info) {
        (true, true) => "lstm_info.bin",
        (false, true) => "info.bin",
        (true, false) => "lstm.bin",
        (false, false) => "conv.bin",
    }
}

/// The four flag combinations in table order followed by the random row.
pub fn ablation_grid(setting: Setting, checkpoint: impl Fn(bool, bool) -> PathBuf) -> Vec<AblationSpec> {
    let mut specs: Vec<AblationSpec> = [(true, true), (false, true), (true, false), (false, false)]
        .into_iter()
        .map(|(use_lstm, use_info)| AblationSpec {
            use_lstm,
            use_info,
            setting,
            source: PolicySource::Checkpoint(checkpoint(use_lstm, use_info)),
        })
        .collect();
    specs.push(AblationSpec {
        use_lstm: false,
        use_info: false,
        setting,
        source: PolicySource::Random,
    });
    specs
}

/// Result of one ablation row; `result` holds the failure message when the row could not run.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub row_id: String,
    pub spec: AblationSpec,
    pub n_episodes: u64,
    pub result: Result<(u64, u64, u64), String>,
}

impl AblationRow {
    pub fn wr(&self) -> Option<f64> {
        self.result
            .as_ref()
            .ok()
            .map(|&(w, _, _)| if self.n_episodes == 0 { 0.0 } else { w as f64 / self.n_episodes as f64 })
    }
}

impl fmt::Display for AblationRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<10} lstm={:<5} info={:<5} {:<8} ",
            self.row_id,
            self.spec.use_lstm,
            self.spec.use_info,
            self.spec.setting
        )?;
        match (&self.result, self.wr()) {
            (Ok((w, d, l)), Some(wr)) => write!(f, "WR {:.1}% ({w} wins, {d} draws, {l} losses)", 100.0 * wr),
            (Err(e), _) => write!(f, "failed: {e}"),
            _ => Ok(()),
        }
    }
}

fn run_spec(spec: &AblationSpec, env_base: &EnvConfig, n: u64, base_seed: u64) -> Result<(u64, u64, u64), EvalError> {
    let mut env_cfg = env_base.clone();
    env_cfg.setting = spec.setting;
    let policy = match &spec.source {
        PolicySource::Random => Policy::Random,
        PolicySource::Checkpoint(path) => {
            let params = NetworkParams::load(path)?;
            let d = params.descriptor();
            if d.use_lstm != spec.use_lstm || d.use_info != spec.use_info {
                return Err(EvalError::Usage(format!(
                    "{} has lstm={} info={}, row asks for lstm={} info={}",
                    path.display(),
                    d.use_lstm,
                    d.use_info,
                    spec.use_lstm,
                    spec.use_info
                )));
            }
            Policy::Greedy(params)
        }
    };
    let wr = winning_rate(&policy, &env_cfg, n, base_seed)?;
    Ok((wr.wins, wr.draws, wr.losses))
}

/// Evaluates every spec; a row that cannot run is reported and the suite continues.
pub fn ablation_suite(specs: &[AblationSpec], env_base: &EnvConfig, n_episodes: u64, base_seed: u64) -> Vec<AblationRow> {
    specs
        .iter()
        .map(|spec| AblationRow {
            row_id: spec.label(),
            spec: spec.clone(),
            n_episodes,
            result: run_spec(spec, env_base, n_episodes, base_seed).map_err(|e| e.to_string()),
        })
        .collect()
}

pub const RESULTS_HEADER: [&str; 9] = [
    "row_id", "use_lstm", "use_info", "setting", "n_episodes", "wins", "draws", "losses", "wr",
];

/// Results table; failed rows carry `NA` in the count and rate columns.
pub fn write_results_csv(path: &Path, rows: &[AblationRow]) -> Result<(), EvalError> {
    let err = |e: csv::Error| io_err(path)(e.into());
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(RESULTS_HEADER).map_err(err)?;
    for r in rows {
        let (wins, draws, losses, wr) = match (&r.result, r.wr()) {
            (Ok((a, b, c)), Some(wr)) => (a.to_string(), b.to_string(), c.to_string(), format!("{wr:.4}")),
            _ => ("NA".into(), "NA".into(), "NA".into(), "NA".into()),
        };
        w.write_record([
            r.row_id.clone(),
            r.spec.use_lstm.to_string(),
            r.spec.use_info.to_string(),
            r.spec.setting.to_string(),
            r.n_episodes.to_string(),
            wins,
            draws,
            losses,
            wr,
        ])
        .map_err(err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Rescales a map to `[0, 1]`; a constant map becomes mid-gray.
pub fn normalize_map(values: &[f64]) -> Vec<f32> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.5; values.len()];
    }
    values.iter().map(|v| ((v - lo) / (hi - lo)) as f32).collect()
}

/// Writes `conv{layer}_{map}.pgm` for every feature map of every conv layer.
pub fn dump_activations(params: &NetworkParams, observation: &Observation, out_dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let input = NetInput::from(observation);
    let mut written = Vec::new();
    for (l, (c, h, w, data)) in conv_activations(params, &input)?.into_iter().enumerate() {
        for m in 0..c {
            let frame = GrayscaleFrame {
                width: w,
                height: h,
                pixels: normalize_map(&data[m * h * w..(m + 1) * h * w]),
            };
            let path = out_dir.join(format!("conv{}_{m:02}.pgm", l + 1));
            frame.save_pgm(&path).map_err(io_err(&path))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Writes the observation's stacked frames as `frame{i}.pgm`, oldest first.
pub fn dump_frames(observation: &Observation, out_dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();
    for (i, f) in observation.frames.frames().iter().enumerate() {
        let path = out_dir.join(format!("frame{i}.pgm"));
        f.save_pgm(&path).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}
