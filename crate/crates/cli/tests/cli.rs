use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use arena25::env::info_from_positions;
use arena25::eval::run_episode_with;
use arena25::render::project;
use arena25::{ActionId, Env, NetworkParams, Policy, RunConfig};

const SMALL: &str = "\
setting = basic
env.frame_width = 40
env.frame_height = 40
env.frame_margin = 2
env.sprite_width = 3
env.sprite_height = 6
match.max_episode_frames = 160
nn.conv = 4x8/4,6x4/2,6x3/1
nn.info_width = 12
nn.dense_width = 24
nn.lstm_width = 16
trainer.n_workers = 2
trainer.rollout_len = 8
trainer.checkpoint_period = 0
trainer.seed = 5
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_arena25"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .env("ARENA25_RUNS_DIR", dir.join("runs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_config(dir: &Path) -> PathBuf {
    let p = dir.join("small.cfg");
    std::fs::write(&p, SMALL).unwrap();
    p
}

fn train_to(dir: &Path, cfg: &Path, out: &str, episodes: u64) -> PathBuf {
    let o = run(
        dir,
        &[
            "train",
            "--quiet",
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            &format!("trainer.total_episodes={episodes}"),
            "--out",
            out,
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    dir.join(out)
}

#[test]
fn train_writes_manifest_metrics_and_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let o = run(
        tmp.path(),
        &["train", "--quiet", "--config", cfg.to_str().unwrap(), "--set", "trainer.total_episodes=10"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let runs: Vec<PathBuf> = std::fs::read_dir(tmp.path().join("runs")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(runs.len(), 1);
    let name = runs[0].file_name().unwrap().to_string_lossy().into_owned();
    assert!(name.ends_with("-00000005"), "{name}");
    let metrics = std::fs::read_to_string(runs[0].join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 11);
    assert!(runs[0].join("final.bin").exists());
    let manifests = std::fs::read_dir(&runs[0])
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("manifest"))
        .count();
    assert_eq!(manifests, 1);
    let manifest = std::fs::read_to_string(runs[0].join("manifest.cfg")).unwrap();
    assert!(manifest.contains("run.finished"));
    assert!(manifest.contains("trainer.total_episodes = 10"));
}

#[test]
fn unknown_config_key_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("bad.cfg");
    std::fs::write(&p, "trainer.gamma = 0.9\ntrainer.bogus = 1\n").unwrap();
    let o = run(tmp.path(), &["train", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("trainer.bogus"));
    assert!(stderr(&o).contains("line 2"));
    assert!(!tmp.path().join("runs").exists());
}

#[test]
fn identical_seeds_and_manifests_reproduce_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let a = train_to(tmp.path(), &cfg, "a", 4);
    let b = train_to(tmp.path(), &cfg, "b", 4);
    let ca = std::fs::read(a.join("final.bin")).unwrap();
    assert_eq!(ca, std::fs::read(b.join("final.bin")).unwrap());
    let c = train_to(tmp.path(), &a.join("manifest.cfg"), "c", 4);
    assert_eq!(ca, std::fs::read(c.join("final.bin")).unwrap());
}

#[test]
fn random_eval_prints_wr_and_is_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["eval", "--policy", "random", "--setting", "advanced", "-n", "100"];
    let mut outs = Vec::new();
    for out in ["e1", "e2"] {
        let mut a = args.to_vec();
        a.extend(["--out", out]);
        let o = run(tmp.path(), &a);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).starts_with("WR "), "{}", stdout(&o));
        outs.push(tmp.path().join(out));
    }
    let episodes = std::fs::read_to_string(outs[0].join("episodes.csv")).unwrap();
    assert_eq!(episodes.lines().count(), 101);
    for f in ["episodes.csv", "results.csv"] {
        assert_eq!(std::fs::read(outs[0].join(f)).unwrap(), std::fs::read(outs[1].join(f)).unwrap());
    }
    let results = std::fs::read_to_string(outs[0].join("results.csv")).unwrap();
    assert!(results.lines().nth(1).unwrap().starts_with("random,false,false,advanced,100,"));
}

#[test]
fn quick_mode_runs_hundred_episodes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["eval", "--policy", "random", "--quick", "--out", "q"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let episodes = std::fs::read_to_string(tmp.path().join("q/episodes.csv")).unwrap();
    assert_eq!(episodes.lines().count(), 101);
}

#[test]
fn incompatible_checkpoint_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let dir = train_to(tmp.path(), &cfg, "t", 1);
    let ckpt = dir.join("final.bin");
    let o = run(
        tmp.path(),
        &[
            "eval",
            "--config",
            cfg.to_str().unwrap(),
            "--setting",
            "advanced",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "-n",
            "3",
        ],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("actions 8") && stderr(&o).contains("actions 16"), "{}", stderr(&o));

    let ok = run(
        tmp.path(),
        &["eval", "--config", cfg.to_str().unwrap(), "--checkpoint", ckpt.to_str().unwrap(), "-n", "3", "--out", "ok"],
    );
    assert!(ok.status.success(), "{}", stderr(&ok));
}

#[test]
fn grid_eval_reports_missing_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let dir = train_to(tmp.path(), &cfg, "t", 1);
    let grid = tmp.path().join("grid");
    std::fs::create_dir(&grid).unwrap();
    std::fs::copy(dir.join("final.bin"), grid.join("lstm_info.bin")).unwrap();
    let o = run(
        tmp.path(),
        &["eval", "--config", cfg.to_str().unwrap(), "--grid", grid.to_str().unwrap(), "-n", "2", "--out", "g"],
    );
    assert_eq!(o.status.code(), Some(1));
    let results = std::fs::read_to_string(tmp.path().join("g/results.csv")).unwrap();
    assert_eq!(results.lines().count(), 6);
    assert!(results.lines().nth(1).unwrap().starts_with("lstm+info,true,true,basic,2,"));
    assert!(results.lines().nth(2).unwrap().contains("NA"));
}

#[test]
fn spectate_matches_episode_stats_and_projection() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["spectate", "--policy", "random", "--seed", "11", "--fps", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);

    let cfg = RunConfig::default();
    let mut env = Env::new(cfg.env.clone()).unwrap();
    let mut positions = Vec::new();
    let stats = run_episode_with(&Policy::Random, &mut env, 11, |env, _, _| {
        let s = env.state();
        positions.push((project(s.agent.pos, &s.config, &env.config().render), project(s.opponent.pos, &s.config, &env.config().render)));
    })
    .unwrap();
    assert_eq!(text.lines().last().unwrap(), format!("result {stats}"));

    let h = cfg.env.render.height;
    let lines: Vec<&str> = text.lines().collect();
    let headers: Vec<usize> = (0..lines.len()).filter(|&i| lines[i].starts_with("step ")).collect();
    assert_eq!(headers.len(), positions.len());
    for (&start, &((au, av), (ou, ov))) in headers.iter().zip(&positions) {
        let grid = &lines[start + 1..start + 1 + h];
        let glyph = |u: i64, v: i64| grid[v as usize].as_bytes()[u as usize] as char;
        if (au, av) == (ou, ov) {
            assert_eq!(glyph(au, av), '*');
        } else {
            assert_eq!(glyph(au, av), 'A');
            assert_eq!(glyph(ou, ov), 'O');
        }
    }
}

#[test]
fn inspect_env_prints_rows_matching_recomputed_info() {
    let tmp = tempfile::tempdir().unwrap();
    let script = tmp.path().join("s.txt");
    std::fs::write(&script, "idle\nidle\nidle\n").unwrap();
    let o = run(tmp.path(), &["inspect-env", script.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);

    let cfg = RunConfig::default().env;
    let mut env = Env::new(cfg.clone()).unwrap();
    env.reset(0);
    let mut history = Vec::new();
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[2], "idle");
        assert_eq!(cols[3].parse::<f64>().unwrap(), 0.0);
        let r = env.step(ActionId::IDLE).unwrap();
        history.push(ActionId::IDLE);
        let start = history.len().saturating_sub(cfg.history_len);
        let info = info_from_positions(
            &env.state().config,
            r.diagnostics.agent_pos,
            r.diagnostics.opponent_pos,
            &history[start..],
            cfg.history_len,
            cfg.num_actions(),
        );
        let printed: Vec<f64> = cols[7].split(' ').map(|v| v.parse().unwrap()).collect();
        assert_eq!(printed, info.to_vec());
    }
}

#[test]
fn inspect_env_rejects_bad_scripts_with_line_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let combo = tmp.path().join("c.txt");
    std::fs::write(&combo, "idle\n\ncombo:3\n").unwrap();
    let o = run(tmp.path(), &["inspect-env", "--setting", "basic", combo.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let unknown = tmp.path().join("u.txt");
    std::fs::write(&unknown, "idle\npunch\n").unwrap();
    let o = run(tmp.path(), &["inspect-env", unknown.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2") && stderr(&o).contains("punch"));
}

#[test]
fn commands_only_write_inside_their_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let before: Vec<_> = std::fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    let o = run(tmp.path(), &["train", "--quiet", "--config", cfg.to_str().unwrap(), "--set", "trainer.total_episodes=1"]);
    assert!(o.status.success());
    let o = run(tmp.path(), &["eval", "--policy", "random", "-n", "2"]);
    assert!(o.status.success());
    let mut after: Vec<_> = std::fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    after.retain(|n| !before.contains(n));
    assert_eq!(after, ["runs"]);
    let params = std::fs::read_dir(tmp.path().join("runs"))
        .unwrap()
        .filter_map(|e| NetworkParams::load(&e.unwrap().path().join("final.bin")).ok())
        .count();
    assert_eq!(params, 1);
}

#[test]
fn shipped_configs_load() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for f in ["basic.cfg", "advanced.cfg", "smoke.cfg"] {
        RunConfig::load(Some(&root.join(f)), &[]).unwrap_or_else(|e| panic!("{f}: {e}"));
    }
}
