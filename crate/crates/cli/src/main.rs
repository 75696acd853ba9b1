mod ascii;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use arena25::a3c::{EpisodeRecord, TrainOptions, METRICS_FILE};
use arena25::eval::{
    ablation_grid, ablation_suite, grid_file, run_episode_with, write_results_csv, AblationRow, AblationSpec,
    PolicySource, WinRate,
};
use arena25::{
    A3cError, ActionId, ConfigError, Env, EnvConfig, EvalError, NetworkParams, Policy, RunConfig, RunManifest, Setting,
};
use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};

const RUNS_DIR_VAR: &str = "ARENA25_RUNS_DIR";

#[derive(Parser)]
#[command(name = "arena25", version, about = "Train and evaluate actor-critic agents in a 2.5D fighting arena")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoints, metrics and a manifest to a run directory.
    Train(TrainArgs),
    /// Measure the winning rate of a checkpoint, the random policy or an ablation grid.
    Eval(EvalArgs),
    /// Print a match as ASCII frames.
    Spectate(SpectateArgs),
    /// Replay a newline-separated action script and print every step.
    InspectEnv(InspectArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set trainer.total_episodes=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, Failure> {
        Ok(RunConfig::load(self.config.as_deref(), &self.overrides)?)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Run directory; defaults to `<runs root>/<timestamp>-<seed>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress per-episode progress lines.
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyKind {
    Random,
    Checkpoint,
}

#[derive(Args)]
struct PolicyArgs {
    /// Checkpoint to play greedily.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// `random` plays uniformly at random; defaults to `checkpoint`.
    #[arg(long, value_enum)]
    policy: Option<PolicyKind>,
}

impl PolicyArgs {
    fn resolve(&self) -> Result<(Policy, Option<PathBuf>), Failure> {
        match (self.policy, &self.checkpoint) {
            (Some(PolicyKind::Random), None) => Ok((Policy::Random, None)),
            (Some(PolicyKind::Random), Some(_)) => Err(Failure::Usage("--policy random takes no --checkpoint".into())),
            (_, Some(p)) => {
                let params = NetworkParams::load(p).map_err(|e| Failure::Runtime(e.into()))?;
                Ok((Policy::Greedy(params), Some(p.clone())))
            }
            (_, None) => Err(Failure::Usage("give --checkpoint or --policy random".into())),
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    /// Directory holding the four grid checkpoints; evaluates the whole ablation grid.
    #[arg(long, conflicts_with_all = ["checkpoint", "policy"])]
    grid: Option<PathBuf>,
    /// basic or advanced; overrides the config's `setting`.
    #[arg(long)]
    setting: Option<Setting>,
    /// Number of episodes; overrides `eval.n_episodes`.
    #[arg(short = 'n', long)]
    n_episodes: Option<u64>,
    /// 100 episodes.
    #[arg(long, conflicts_with = "n_episodes")]
    quick: bool,
    /// First episode seed; overrides `eval.base_seed`.
    #[arg(long)]
    base_seed: Option<u64>,
    /// Run directory; defaults to `<runs root>/<timestamp>-<seed>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpectateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long)]
    setting: Option<Setting>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Frames per second; 0 prints every frame without pausing.
    #[arg(long, default_value_t = 0.0)]
    fps: f64,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    setting: Option<Setting>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// One action name per line (`idle`, `attack`, `combo:3`, ...); `#` starts a comment.
    script: PathBuf,
}

/// Exit 2 for bad input, 1 for runtime failures.
enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Config(_) | EvalError::Mismatch { .. } | EvalError::Usage(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<A3cError> for Failure {
    fn from(e: A3cError) -> Self {
        match e {
            A3cError::Config(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Spectate(a) => cmd_spectate(a),
        Command::InspectEnv(a) => cmd_inspect_env(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn runs_root() -> PathBuf {
    std::env::var_os(RUNS_DIR_VAR).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

/// Creates `out` or a fresh `<root>/<timestamp>-<short seed>` directory.
fn make_run_dir(out: Option<&Path>, seed: u64) -> anyhow::Result<PathBuf> {
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => {
            let base = format!("{}-{:08x}", Utc::now().format("%Y%m%d-%H%M%S"), seed as u32);
            let root = runs_root();
            let mut dir = root.join(&base);
            let mut n = 1;
            while dir.exists() {
                dir = root.join(format!("{base}-{n}"));
                n += 1;
            }
            dir
        }
    };
    fs::create_dir_all(&dir).with_context(|| format!("cannot create run directory {}", dir.display()))?;
    Ok(dir)
}

fn write_manifest(dir: &Path, m: &RunManifest) -> anyhow::Result<()> {
    m.write(dir)
        .map(|_| ())
        .with_context(|| format!("cannot write manifest in {}", dir.display()))
}

fn run_id(dir: &Path) -> String {
    dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn cmd_train(args: TrainArgs) -> Result<(), Failure> {
    let cfg = args.config.load()?;
    let dir = make_run_dir(args.out.as_deref(), cfg.trainer.seed)?;
    let mut manifest = RunManifest {
        run_id: run_id(&dir),
        command: "train".into(),
        seed: cfg.trainer.seed,
        started: now(),
        finished: None,
        inputs: Vec::new(),
        artifacts: Vec::new(),
        config: cfg.clone(),
    };
    write_manifest(&dir, &manifest)?;
    eprintln!("run directory {}", dir.display());
    eprintln!("model {}", cfg.descriptor());

    let total = cfg.trainer.total_episodes;
    let every = (total / 20).max(1);
    let report = move |r: &EpisodeRecord| {
        if r.episode % every == 0 || r.episode == total {
            eprintln!(
                "episode {}/{} worker {} reward {:+.3} length {} ma100 {:+.3}",
                r.episode, total, r.worker_id, r.reward, r.length, r.ma_reward_100
            );
        }
    };
    let options = TrainOptions {
        record_checksums: false,
        on_episode: if args.quiet { None } else { Some(&report) },
    };
    let outcome = arena25::train(&cfg.env, &cfg.arch, &cfg.trainer, Some(&dir), options)?;

    manifest.finished = Some(now());
    manifest.artifacts.push(PathBuf::from(METRICS_FILE));
    for c in &outcome.checkpoints {
        manifest.artifacts.push(c.strip_prefix(&dir).unwrap_or(c).to_path_buf());
    }
    write_manifest(&dir, &manifest)?;
    println!(
        "trained {} episodes ({} updates); final checkpoint {}",
        outcome.episodes.len(),
        outcome.updates,
        outcome.checkpoints.last().map(|p| p.display().to_string()).unwrap_or_default()
    );
    Ok(())
}

fn apply_setting(cfg: &mut RunConfig, setting: Option<Setting>) -> Result<(), Failure> {
    if let Some(s) = setting {
        cfg.env.setting = s;
        cfg.validate()?;
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), Failure> {
    let mut cfg = args.config.load()?;
    apply_setting(&mut cfg, args.setting)?;
    if let Some(n) = args.n_episodes {
        cfg.eval.n_episodes = n;
    } else if args.quick {
        cfg.eval.n_episodes = 100;
    }
    if let Some(s) = args.base_seed {
        cfg.eval.base_seed = s;
    }
    cfg.validate()?;
    let (n, base) = (cfg.eval.n_episodes, cfg.eval.base_seed);

    let (rows, single, inputs) = if let Some(grid) = &args.grid {
        let specs = ablation_grid(cfg.env.setting, |l, i| grid.join(grid_file(l, i)));
        let inputs = specs
            .iter()
            .filter_map(|s| match &s.source {
                PolicySource::Checkpoint(p) => Some(p.clone()),
                PolicySource::Random => None,
            })
            .collect();
        (ablation_suite(&specs, &cfg.env, n, base), None, inputs)
    } else {
        let (policy, path) = args.policy.resolve()?;
        policy.check(&cfg.env)?;
        let wr = arena25::winning_rate(&policy, &cfg.env, n, base)?;
        let (use_lstm, use_info) = match &policy {
            Policy::Greedy(p) => (p.descriptor().use_lstm, p.descriptor().use_info),
            Policy::Random => (false, false),
        };
        let spec = AblationSpec {
            use_lstm,
            use_info,
            setting: cfg.env.setting,
            source: path.clone().map_or(PolicySource::Random, PolicySource::Checkpoint),
        };
        let row = AblationRow {
            row_id: spec.label(),
            spec,
            n_episodes: n,
            result: Ok((wr.wins, wr.draws, wr.losses)),
        };
        (vec![row], Some(wr), path.into_iter().collect())
    };

    let dir = make_run_dir(args.out.as_deref(), base)?;
    let mut manifest = RunManifest {
        run_id: run_id(&dir),
        command: "eval".into(),
        seed: base,
        started: now(),
        finished: None,
        inputs,
        artifacts: vec![PathBuf::from("results.csv")],
        config: cfg.clone(),
    };
    write_results_csv(&dir.join("results.csv"), &rows)?;
    if let Some(wr) = &single {
        wr.write_episodes_csv(&dir.join("episodes.csv"))?;
        manifest.artifacts.push(PathBuf::from("episodes.csv"));
    }
    manifest.finished = Some(now());
    write_manifest(&dir, &manifest)?;

    match &single {
        Some(wr) => print_wr(wr, &cfg.env, base),
        None => rows.iter().for_each(|r| println!("{r}")),
    }
    println!("results written to {}", dir.display());
    if rows.iter().any(|r| r.result.is_err()) {
        return Err(Failure::Runtime(anyhow::anyhow!("some grid rows could not be evaluated")));
    }
    Ok(())
}

fn print_wr(wr: &WinRate, env: &EnvConfig, base: u64) {
    println!(
        "WR {:.1}% ({} wins, {} draws, {} losses over {} {} episodes, seeds {}..{})",
        100.0 * wr.wr(),
        wr.wins,
        wr.draws,
        wr.losses,
        wr.n(),
        env.setting,
        base,
        base + wr.n() - 1
    );
}

fn cmd_spectate(args: SpectateArgs) -> Result<(), Failure> {
    let mut cfg = args.config.load()?;
    apply_setting(&mut cfg, args.setting)?;
    if !(args.fps >= 0.0 && args.fps.is_finite()) {
        return Err(Failure::Usage("--fps must be a non-negative number".into()));
    }
    let (policy, _) = args.policy.resolve()?;
    policy.check(&cfg.env)?;
    let mut env = Env::new(cfg.env.clone())?;
    let pause = (args.fps > 0.0).then(|| Duration::from_secs_f64(1.0 / args.fps));
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let mut step = 0u64;
    let mut failed: Option<io::Error> = None;
    let stats = run_episode_with(&policy, &mut env, args.seed, |env, action, r| {
        step += 1;
        if failed.is_some() {
            return;
        }
        let frame = ascii::render(env.state(), &env.config().render);
        let d = &r.diagnostics;
        let res = writeln!(
            out,
            "step {step} frame {} action {action} reward {:+.3} hp {}/{}\n{frame}",
            d.frame_count, r.reward, d.hp_agent, d.hp_opponent
        )
        .and_then(|_| out.flush());
        if let Err(e) = res {
            failed = Some(e);
        }
        if let Some(p) = pause {
            std::thread::sleep(p);
        }
    })?;
    if let Some(e) = failed {
        if e.kind() != io::ErrorKind::BrokenPipe {
            return Err(Failure::Runtime(anyhow::Error::new(e).context("cannot write frames")));
        }
        return Ok(());
    }
    writeln!(out, "result {stats}").context("cannot write result")?;
    Ok(())
}

/// Parses a script into `(line number, action)` pairs, skipping blanks and comments.
fn parse_script(text: &str) -> Result<Vec<(usize, ActionId)>, Failure> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let a = line
            .parse::<ActionId>()
            .map_err(|e| Failure::Usage(format!("script line {}: unknown action `{line}`: {e}", i + 1)))?;
        out.push((i + 1, a));
    }
    Ok(out)
}

fn cmd_inspect_env(args: InspectArgs) -> Result<(), Failure> {
    let mut cfg = args.config.load()?;
    apply_setting(&mut cfg, args.setting)?;
    let text = fs::read_to_string(&args.script)
        .map_err(|e| Failure::Usage(format!("cannot read script {}: {e}", args.script.display())))?;
    let script = parse_script(&text)?;
    let mut env = Env::new(cfg.env.clone())?;
    let space = env.action_space();
    if let Some((line, a)) = script.iter().find(|(_, a)| !space.contains(a)) {
        return Err(Failure::Usage(format!(
            "script line {line}: action {a} is not in the {} action space",
            cfg.env.setting
        )));
    }
    env.reset(args.seed);
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let write_err = |e: io::Error| Failure::Runtime(anyhow::Error::new(e).context("cannot write output"));
    writeln!(out, "step,line,action,reward,hp_agent,hp_opponent,frame,info").map_err(write_err)?;
    for (step, (line, a)) in script.iter().enumerate() {
        let r = env.step(*a).map_err(|e| Failure::Runtime(e.into()))?;
        let d = &r.diagnostics;
        let info: Vec<String> = r.observation.info.to_vec().iter().map(|v| v.to_string()).collect();
        writeln!(
            out,
            "{},{line},{a},{},{},{},{},{}",
            step + 1,
            r.reward,
            d.hp_agent,
            d.hp_opponent,
            d.frame_count,
            info.join(" ")
        )
        .map_err(write_err)?;
        if r.done {
            if step + 1 < script.len() {
                eprintln!("episode finished at script line {line}; remaining lines ignored");
            }
            break;
        }
    }
    out.flush().map_err(write_err)?;
    Ok(())
}
