use std::collections::VecDeque;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{mpsc, Mutex};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::rollout::{collect_rollout, rollout_gradients, ActionSelection};
use super::{apply_update, A3cError, OptimizerState, Schedule, SharedModel, TrainerConfig};
use crate::env::{Env, EnvConfig, Observation};
use crate::nn::{init_params, ArchConfig, Descriptor, Gradients, LstmState, NetworkParams};

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Environment seed of the `k`-th claimed training episode.
pub fn episode_seed(seed: u64, k: u64) -> u64 {
    splitmix64(seed ^ splitmix64(k.wrapping_add(1)))
}

/// Action-sampling RNG seed of worker `id`.
pub fn worker_seed(seed: u64, id: usize) -> u64 {
    splitmix64(seed.rotate_left(17) ^ (0x5EED_0000 + id as u64))
}

/// One row of the metrics log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    /// 1-based completion order.
    pub episode: u64,
    pub worker_id: usize,
    pub wall_ms: u64,
    pub reward: f64,
    pub length: u64,
    /// Mean reward over this and up to 99 preceding rows.
    pub ma_reward_100: f64,
}

#[derive(Default)]
pub struct TrainOptions<'a> {
    /// Record the parameter checksum after every update.
    pub record_checksums: bool,
    /// Called once per finished episode, in log order.
    pub on_episode: Option<&'a (dyn Fn(&EpisodeRecord) + Sync)>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    pub optimizer: OptimizerState,
    pub episodes: Vec<EpisodeRecord>,
    pub updates: u64,
    pub checkpoints: Vec<PathBuf>,
    /// `(version, checksum)` per update when requested.
    pub checksums: Vec<(u64, u64)>,
}

struct Progress {
    reward: f64,
    length: u64,
}

struct Worker {
    id: usize,
    env: Env,
    rng: ChaCha8Rng,
    obs: Option<Observation>,
    lstm: LstmState,
    episode: Option<Progress>,
}

impl Worker {
    fn start(&mut self, seed: u64, width: usize) {
        self.obs = Some(self.env.reset(seed));
        self.lstm = LstmState::zeros(width);
        self.episode = Some(Progress { reward: 0.0, length: 0 });
    }

    fn run_rollout(&mut self, snapshot: &NetworkParams, cfg: &TrainerConfig) -> Result<(Gradients, Option<Progress>), A3cError> {
        let obs = self.obs.take().expect("episode started");
        let lstm = std::mem::replace(&mut self.lstm, LstmState::zeros(0));
        let (rollout, next_obs, next_lstm) =
            collect_rollout(snapshot, &mut self.env, obs, lstm, cfg.rollout_len, ActionSelection::Sample, &mut self.rng)?;
        let progress = self.episode.as_mut().expect("episode started");
        progress.reward += rollout.rewards().iter().sum::<f64>();
        progress.length += rollout.len() as u64;
        let grads = rollout_gradients(snapshot, &rollout, cfg)?;
        let finished = if rollout.terminal {
            self.episode.take()
        } else {
            self.obs = Some(next_obs);
            self.lstm = next_lstm;
            None
        };
        Ok((grads, finished))
    }
}

struct Log<'a> {
    start: Instant,
    window: VecDeque<f64>,
    records: Vec<EpisodeRecord>,
    csv: Option<csv::Writer<File>>,
    csv_path: PathBuf,
    on_episode: Option<&'a (dyn Fn(&EpisodeRecord) + Sync)>,
}

impl Log<'_> {
    fn push(&mut self, worker_id: usize, p: Progress) -> Result<u64, A3cError> {
        if self.window.len() == 100 {
            self.window.pop_front();
        }
        self.window.push_back(p.reward);
        let rec = EpisodeRecord {
            episode: self.records.len() as u64 + 1,
            worker_id,
            wall_ms: self.start.elapsed().as_millis() as u64,
            reward: p.reward,
            length: p.length,
            ma_reward_100: self.window.iter().sum::<f64>() / self.window.len() as f64,
        };
        if let Some(w) = self.csv.as_mut() {
            let path = &self.csv_path;
            let io = |e: csv::Error| A3cError::Io {
                path: path.display().to_string(),
                source: e.into(),
            };
            w.write_record([
                rec.episode.to_string(),
                rec.worker_id.to_string(),
                rec.wall_ms.to_string(),
                rec.reward.to_string(),
                rec.length.to_string(),
                rec.ma_reward_100.to_string(),
            ])
            .map_err(io)?;
            w.flush().map_err(|e| A3cError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
        }
        if let Some(f) = self.on_episode {
            f(&rec);
        }
        self.records.push(rec);
        Ok(self.records.len() as u64)
    }
}

pub const METRICS_FILE: &str = "metrics.csv";
pub const FINAL_CHECKPOINT: &str = "final.bin";

pub fn checkpoint_name(episodes: u64) -> String {
    format!("checkpoint_{episodes:06}.bin")
}

fn save(params: &NetworkParams, dir: Option<&Path>, name: &str, out: &mut Vec<PathBuf>) -> Result<(), A3cError> {
    if let Some(dir) = dir {
        let path = dir.join(name);
        params.save(&path)?;
        out.push(path);
    }
    Ok(())
}

/// Trains until `total_episodes` episodes have finished. With `out_dir`, writes
/// `metrics.csv`, periodic checkpoints and `final.bin` there.
pub fn train(
    env_cfg: &EnvConfig,
    arch: &ArchConfig,
    cfg: &TrainerConfig,
    out_dir: Option<&Path>,
    options: TrainOptions<'_>,
) -> Result<TrainOutcome, A3cError> {
    cfg.validate()?;
    env_cfg.validate()?;
    let descriptor = Descriptor::for_env(env_cfg, arch);
    let params = init_params(&descriptor, cfg.seed)?;
    let opt = OptimizerState::new(&params, cfg.rms_decay, cfg.rms_epsilon);

    let mut csv = None;
    let csv_path = out_dir.map(|d| d.join(METRICS_FILE)).unwrap_or_default();
    if let Some(dir) = out_dir {
        let io = |source| A3cError::Io {
            path: dir.display().to_string(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(io)?;
        let file = File::create(&csv_path).map_err(|source| A3cError::Io {
            path: csv_path.display().to_string(),
            source,
        })?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["episode", "worker_id", "wall_ms", "reward", "length", "ma_reward_100"])
            .map_err(|e| A3cError::Io {
                path: csv_path.display().to_string(),
                source: e.into(),
            })?;
        csv = Some(w);
    }
    let log = Log {
        start: Instant::now(),
        window: VecDeque::with_capacity(100),
        records: Vec::new(),
        csv,
        csv_path,
        on_episode: options.on_episode,
    };
    let workers = (0..cfg.n_workers)
        .map(|id| {
            Ok(Worker {
                id,
                env: Env::new(env_cfg.clone())?,
                rng: ChaCha8Rng::seed_from_u64(worker_seed(cfg.seed, id)),
                obs: None,
                lstm: LstmState::zeros(0),
                episode: None,
            })
        })
        .collect::<Result<Vec<_>, A3cError>>()?;

    match cfg.schedule {
        Schedule::Lockstep => run_lockstep(params, opt, workers, cfg, out_dir, log, options.record_checksums),
        Schedule::Async => run_async(params, opt, workers, cfg, out_dir, log, options.record_checksums),
    }
}

fn due(cfg: &TrainerConfig, before: u64, after: u64) -> Option<u64> {
    if cfg.checkpoint_period == 0 || after / cfg.checkpoint_period == before / cfg.checkpoint_period {
        None
    } else {
        Some(after / cfg.checkpoint_period * cfg.checkpoint_period)
    }
}

fn run_lockstep(
    mut params: NetworkParams,
    mut opt: OptimizerState,
    mut workers: Vec<Worker>,
    cfg: &TrainerConfig,
    out_dir: Option<&Path>,
    mut log: Log<'_>,
    record: bool,
) -> Result<TrainOutcome, A3cError> {
    let width = params.descriptor().state_width();
    let mut claimed = 0u64;
    let mut updates = 0u64;
    let mut checkpoints = Vec::new();
    let mut checksums = Vec::new();
    loop {
        for w in workers.iter_mut() {
            if w.episode.is_none() && claimed < cfg.total_episodes {
                w.start(episode_seed(cfg.seed, claimed), width);
                claimed += 1;
            }
        }
        if workers.iter().all(|w| w.episode.is_none()) {
            break;
        }
        let snapshot = params.clone();
        let results: Vec<(usize, Result<(Gradients, Option<Progress>), A3cError>)> = workers
            .par_iter_mut()
            .filter(|w| w.episode.is_some())
            .map(|w| (w.id, w.run_rollout(&snapshot, cfg)))
            .collect();
        drop(snapshot);
        let before = log.records.len() as u64;
        for (id, r) in results {
            let (grads, finished) = r?;
            apply_update(&mut params, &mut opt, &grads, cfg.learning_rate)?;
            updates += 1;
            if record {
                checksums.push((updates, params.checksum()));
            }
            if let Some(p) = finished {
                log.push(id, p)?;
            }
        }
        if let Some(n) = due(cfg, before, log.records.len() as u64) {
            save(&params, out_dir, &checkpoint_name(n), &mut checkpoints)?;
        }
    }
    save(&params, out_dir, FINAL_CHECKPOINT, &mut checkpoints)?;
    Ok(TrainOutcome {
        params,
        optimizer: opt,
        episodes: log.records,
        updates,
        checkpoints,
        checksums,
    })
}

fn run_async(
    params: NetworkParams,
    opt: OptimizerState,
    workers: Vec<Worker>,
    cfg: &TrainerConfig,
    out_dir: Option<&Path>,
    mut log: Log<'_>,
    record: bool,
) -> Result<TrainOutcome, A3cError> {
    let width = params.descriptor().state_width();
    let shared = SharedModel::new(params, opt);
    let claimed = AtomicU64::new(0);
    let stop = AtomicBool::new(false);
    let checksums = Mutex::new(Vec::new());
    let mut checkpoints = Vec::new();
    let (tx, rx) = mpsc::channel::<(usize, Progress)>();

    let mut first_error: Option<A3cError> = None;
    std::thread::scope(|s| {
        let handles: Vec<_> = workers
            .into_iter()
            .map(|mut w| {
                let tx = tx.clone();
                let (shared, claimed, stop, checksums) = (&shared, &claimed, &stop, &checksums);
                s.spawn(move || -> Result<(), A3cError> {
                    while !stop.load(Ordering::Relaxed) {
                        if w.episode.is_none() {
                            let k = claimed.fetch_add(1, Ordering::SeqCst);
                            if k >= cfg.total_episodes {
                                break;
                            }
                            w.start(episode_seed(cfg.seed, k), width);
                        }
                        let (_, snapshot) = shared.snapshot();
                        let step = w.run_rollout(&snapshot, cfg).and_then(|(grads, finished)| {
                            shared.apply(&grads, cfg.learning_rate, |v, p| {
                                if record {
                                    checksums.lock().unwrap().push((v, p.checksum()));
                                }
                            })?;
                            Ok(finished)
                        });
                        match step {
                            Ok(Some(p)) => {
                                let _ = tx.send((w.id, p));
                            }
                            Ok(None) => {}
                            Err(e) => {
                                stop.store(true, Ordering::Relaxed);
                                return Err(e);
                            }
                        }
                    }
                    Ok(())
                })
            })
            .collect();
        drop(tx);
        for (id, p) in rx {
            let before = log.records.len() as u64;
            let res = log.push(id, p).and_then(|after| match due(cfg, before, after) {
                Some(n) => save(&shared.snapshot().1, out_dir, &checkpoint_name(n), &mut checkpoints),
                None => Ok(()),
            });
            if let Err(e) = res {
                stop.store(true, Ordering::Relaxed);
                first_error.get_or_insert(e);
            }
        }
        for (id, h) in handles.into_iter().enumerate() {
            match h.join() {
                Ok(Ok(())) => {}
                Ok(Err(e)) => {
                    first_error.get_or_insert(e);
                }
                Err(_) => {
                    first_error.get_or_insert(A3cError::WorkerPanic(id));
                }
            }
        }
    });
    if let Some(e) = first_error {
        return Err(e);
    }
    let (params, optimizer, updates) = shared.into_parts();
    save(&params, out_dir, FINAL_CHECKPOINT, &mut checkpoints)?;
    let mut checksums = checksums.into_inner().unwrap();
    checksums.sort_unstable();
    Ok(TrainOutcome {
        params,
        optimizer,
        episodes: log.records,
        updates,
        checkpoints,
        checksums,
    })
}
