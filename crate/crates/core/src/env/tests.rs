use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::opponent::OpponentKind;
use crate::sim::BasicAction;

fn idle_opponent(mut cfg: EnvConfig) -> EnvConfig {
    cfg.opponent.kind = OpponentKind::Idle;
    cfg
}

#[test]
fn reset_is_deterministic() {
    let mut env = Env::new(EnvConfig::default()).unwrap();
    let a = env.reset(3);
    let b = env.reset(3);
    assert_eq!(a, b);
    let mut other = Env::new(EnvConfig::default()).unwrap();
    assert_eq!(other.reset(3), a);
}

#[test]
fn reset_distance_matches_spawn_distance() {
    let cfg = EnvConfig::default();
    let mut env = Env::new(cfg.clone()).unwrap();
    let obs = env.reset(0);
    let m = &cfg.match_cfg;
    // spawns (100, 50, 0) and (300, 50, 0); diagonal over width, depth and jump apex 39
    let expected = 200.0 / (400.0f64 * 400.0 + 100.0 * 100.0 + 39.0 * 39.0).sqrt();
    assert_eq!(distance3(m.agent_spawn, m.opponent_spawn), 200.0);
    assert!((obs.info.distance - expected).abs() < 1e-15);
}

#[test]
fn reset_history_is_empty_and_stack_replicated() {
    let mut env = Env::new(EnvConfig::default()).unwrap();
    let obs = env.reset(1);
    assert!(obs.info.recent_actions.iter().all(|&v| v == 0.0));
    assert_eq!(obs.info.recent_actions.len(), 4 * 16);
    let f = obs.frames.frames();
    assert!(f.iter().all(|x| x == &f[0]));
    assert_eq!(obs.info.dim(), 9 + 4 * 16);
}

#[test]
fn scaled_reward_for_forty_hp() {
    let mut cfg = idle_opponent(EnvConfig::default());
    cfg.match_cfg.basic_attack_damage = 40;
    cfg.match_cfg.agent_spawn = Vec3::new(100.0, 50.0, 0.0);
    cfg.match_cfg.opponent_spawn = Vec3::new(120.0, 50.0, 0.0);
    let mut env = Env::new(cfg).unwrap();
    env.reset(0);
    let r = env.step(ActionId::Basic(BasicAction::Attack)).unwrap();
    assert_eq!(r.diagnostics.damage_dealt, 40);
    assert_eq!(r.reward, 1.0);
    assert!(!r.done);
}

#[test]
fn no_contact_no_reward() {
    let mut env = Env::new(idle_opponent(EnvConfig::default())).unwrap();
    env.reset(0);
    let r = env.step(ActionId::IDLE).unwrap();
    assert_eq!(r.reward, 0.0);
    assert!(!r.done);
    assert_eq!(r.diagnostics.frames_elapsed, 4);
    assert_eq!(r.diagnostics.frame_count, 4);
}

/// Walks toward an idle opponent and swings when close.
fn bully(env: &Env) -> ActionId {
    let s = env.state();
    let dx = s.opponent.pos.x - s.agent.pos.x;
    if dx.abs() > 30.0 {
        ActionId::Basic(if dx > 0.0 { BasicAction::Right } else { BasicAction::Left })
    } else {
        ActionId::Basic(BasicAction::Attack)
    }
}

#[test]
fn flawless_episode_totals_twelve_and_a_half() {
    let mut env = Env::new(idle_opponent(EnvConfig::default())).unwrap();
    env.reset(0);
    let mut total = 0.0;
    loop {
        let a = bully(&env);
        let r = env.step(a).unwrap();
        total += r.reward;
        if r.done {
            assert_eq!(r.diagnostics.winner, Some(Winner::Agent));
            assert_eq!(r.diagnostics.hp_opponent, 0);
            break;
        }
    }
    assert!((total - 12.5).abs() < 1e-9, "{total}");
}

#[test]
fn lifecycle_and_space_errors() {
    let mut basic = EnvConfig::default();
    basic.setting = Setting::Basic;
    let mut env = Env::new(basic).unwrap();
    assert_eq!(env.step(ActionId::IDLE).unwrap_err(), EnvError::NotReset);
    env.reset(0);
    assert_eq!(
        env.step(ActionId::Combo(3)).unwrap_err(),
        EnvError::OutOfSpace(ActionId::Combo(3), Setting::Basic)
    );

    let mut cfg = idle_opponent(EnvConfig::default());
    cfg.match_cfg.max_episode_frames = 8;
    let mut env = Env::new(cfg).unwrap();
    env.reset(0);
    env.step(ActionId::IDLE).unwrap();
    let last = env.step(ActionId::IDLE).unwrap();
    assert!(last.done);
    assert_eq!(last.diagnostics.winner, Some(Winner::Draw));
    assert_eq!(env.step(ActionId::IDLE).unwrap_err(), EnvError::EpisodeDone);
}

#[test]
fn advanced_combo_fires_through_step() {
    let mut cfg = idle_opponent(EnvConfig::default());
    cfg.match_cfg.agent_spawn = Vec3::new(100.0, 50.0, 0.0);
    cfg.match_cfg.opponent_spawn = Vec3::new(150.0, 50.0, 0.0);
    let mut env = Env::new(cfg).unwrap();
    env.reset(0);
    let r = env.step(ActionId::Combo(2)).unwrap();
    assert_eq!(r.diagnostics.combo_fired, Some(2));
    let r2 = env.step(ActionId::IDLE).unwrap();
    assert_eq!(r.diagnostics.damage_dealt + r2.diagnostics.damage_dealt, 35);
}

#[test]
fn info_examples() {
    let cfg = MatchConfig::default();
    let mut w = new_match(cfg.clone(), 0).unwrap();
    w.agent.pos = Vec3::new(120.0, 40.0, 0.0);
    w.opponent.pos = w.agent.pos;
    let f = build_info_features(&w, &[], 4, 16);
    assert_eq!(f.distance, 0.0);
    assert_eq!(f.agent_xz, f.opp_xz);
    assert_eq!(f.agent_height, f.opp_height);
    assert_eq!(f.agent_depth, f.opp_depth);

    w.agent.pos = Vec3::new(cfg.arena_width, cfg.arena_depth, 0.0);
    let f = build_info_features(&w, &[], 4, 16);
    assert_eq!(f.agent_xz, [1.0, 1.0]);

    let f = build_info_features(&w, &[ActionId::Basic(BasicAction::Attack)], 4, 16);
    for slot in 0..3 {
        assert!(f.history_block(slot).iter().all(|&v| v == 0.0));
    }
    let last = f.history_block(3);
    assert_eq!(last.iter().sum::<f64>(), 1.0);
    assert_eq!(last[BasicAction::Attack.index()], 1.0);
}

#[test]
fn action_space_layout() {
    let basic = action_space(Setting::Basic);
    let adv = action_space(Setting::Advanced);
    assert_eq!(basic.len(), 8);
    assert_eq!(adv.len(), 16);
    assert_eq!(&adv[..8], &basic[..]);
    assert!(basic.iter().zip(BasicAction::ALL).all(|(a, b)| *a == ActionId::Basic(b)));
}

#[test]
fn rule_opponent_uses_every_action() {
    let mut seen = [false; 16];
    let space = action_space(Setting::Advanced);
    let mut env = Env::new(EnvConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    'outer: for ep in 0..40 {
        env.reset(ep);
        for _ in 0..400 {
            let a = space[rng.random_range(0..space.len())];
            let r = env.step(a).unwrap();
            let last = env.opponent.last_action();
            seen[last.index()] = true;
            if seen.iter().all(|&s| s) {
                break 'outer;
            }
            if r.done {
                break;
            }
        }
    }
    assert!(seen.iter().all(|&s| s), "{seen:?}");
}

#[test]
fn trace_csv_has_header_and_rows() {
    let mut env = Env::new(EnvConfig::default()).unwrap();
    env.reset(0);
    let mut trace = EpisodeTrace::default();
    for _ in 0..3 {
        let r = env.step(ActionId::IDLE).unwrap();
        trace.record(ActionId::IDLE, &r);
    }
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "frame,action,reward,hp_agent,hp_opp");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("4,idle,0,"));
}

fn run_random_episode(setting: Setting, seed: u64, max_frames: u64) -> (f64, Vec<StepResult>, EnvConfig) {
    let mut cfg = EnvConfig::default();
    cfg.setting = setting;
    cfg.match_cfg.max_episode_frames = max_frames;
    let mut env = Env::new(cfg.clone()).unwrap();
    let space = env.action_space();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
    env.reset(seed);
    let mut total = 0.0;
    let mut steps = Vec::new();
    loop {
        let a = space[rng.random_range(0..space.len())];
        let before = env.history();
        let r = env.step(a).unwrap();
        let mut hist = before;
        hist.push(a);
        if hist.len() > cfg.history_len {
            hist.remove(0);
        }
        let recomputed = info_from_positions(
            &env.state().config,
            r.diagnostics.agent_pos,
            r.diagnostics.opponent_pos,
            &hist,
            cfg.history_len,
            space.len(),
        );
        assert_eq!(recomputed, r.observation.info);
        total += r.reward;
        let done = r.done;
        steps.push(r);
        if done {
            break;
        }
    }
    (total, steps, cfg)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn episode_reward_identity(seed in any::<u64>(), advanced in any::<bool>()) {
        let setting = if advanced { Setting::Advanced } else { Setting::Basic };
        let (total, steps, cfg) = run_random_episode(setting, seed, 3_000);
        let last = &steps.last().unwrap().diagnostics;
        let hp_max = cfg.match_cfg.hp_max as f64;
        let identity = cfg.reward_scale * ((hp_max - last.hp_opponent as f64) - (hp_max - last.hp_agent as f64));
        prop_assert!((total - identity).abs() < 1e-9);
        prop_assert!((-12.5..=12.5).contains(&total));
        prop_assert!(last.winner.is_some());
        for (i, s) in steps.iter().enumerate() {
            let bound = cfg.match_cfg.hp_max as f64 * cfg.reward_scale;
            prop_assert!(s.reward.abs() <= bound);
            if i + 1 < steps.len() {
                prop_assert_eq!(s.diagnostics.frames_elapsed, cfg.frame_skip);
            } else {
                prop_assert!(s.diagnostics.frames_elapsed <= cfg.frame_skip);
            }
        }
    }

    #[test]
    fn stepping_is_deterministic(seed in any::<u64>()) {
        let (ta, a, _) = run_random_episode(Setting::Advanced, seed, 800);
        let (tb, b, _) = run_random_episode(Setting::Advanced, seed, 800);
        prop_assert_eq!(ta.to_bits(), tb.to_bits());
        prop_assert_eq!(a, b);
    }
}
