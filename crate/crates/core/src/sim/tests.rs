use std::collections::VecDeque;

use proptest::prelude::*;

use super::*;

const A: BasicAction = BasicAction::Attack;

fn basic(b: BasicAction) -> ActionId {
    ActionId::Basic(b)
}

fn world_with(agent: Vec3, opponent: Vec3) -> WorldState {
    let cfg = MatchConfig {
        agent_spawn: Vec3::new(agent.x, agent.z, 0.0),
        opponent_spawn: Vec3::new(opponent.x, opponent.z, 0.0),
        ..MatchConfig::default()
    };
    let mut w = new_match(cfg, 0).unwrap();
    w.agent.pos = agent;
    w.opponent.pos = opponent;
    w
}

#[test]
fn new_match_sets_full_health() {
    let w = new_match(MatchConfig::default(), 7).unwrap();
    assert_eq!(w.agent.hp, 500);
    assert_eq!(w.opponent.hp, 500);
    assert_eq!(w.frame_count, 0);
    assert_eq!(w.agent.mp, w.config.mp_max);
    assert_eq!(w.agent.pos, w.config.agent_spawn);
    assert_eq!(new_match(MatchConfig::default(), 7).unwrap(), w);
}

#[test]
fn new_match_propagates_hp_max() {
    let cfg = MatchConfig {
        hp_max: 1,
        ..MatchConfig::default()
    };
    let w = new_match(cfg, 99).unwrap();
    assert_eq!((w.agent.hp, w.opponent.hp), (1, 1));
}

#[test]
fn new_match_rejects_bad_config() {
    let cfg = MatchConfig {
        walk_speed: -1.0,
        ..MatchConfig::default()
    };
    assert!(new_match(cfg, 0).is_err());
}

#[test]
fn idle_far_apart_is_quiet() {
    let mut w = new_match(MatchConfig::default(), 1).unwrap();
    let out = advance_frame(&mut w, ActionId::IDLE, ActionId::IDLE);
    assert_eq!(out.agent_hp_delta, 0);
    assert_eq!(out.opponent_hp_delta, 0);
    assert!(!out.terminal);
    assert_eq!(w.frame_count, 1);
}

/// Hand-written containment check for the default basic attack:
/// forward reach 40, depth reach 15, height tolerance 20.
fn oracle_basic_hit(attacker: Vec3, facing_right: bool, target: Vec3) -> bool {
    let forward = if facing_right {
        target.x - attacker.x
    } else {
        attacker.x - target.x
    };
    forward >= 0.0
        && forward <= 40.0
        && (target.z - attacker.z).abs() <= 15.0
        && (target.y - attacker.y).abs() <= 20.0
}

#[test]
fn basic_attack_in_range_deals_damage_on_startup_frame() {
    let agent = Vec3::new(100.0, 50.0, 0.0);
    let opp = Vec3::new(130.0, 55.0, 0.0);
    assert!(oracle_basic_hit(agent, true, opp));
    let mut w = world_with(agent, opp);
    let deltas: Vec<i32> = (0..4)
        .map(|_| advance_frame(&mut w, basic(A), ActionId::IDLE).opponent_hp_delta)
        .collect();
    // startup is 2 frames, so the hitbox goes live on the third
    assert_eq!(deltas, vec![0, 0, -20, 0]);
    assert_eq!(w.opponent.hp, 480);
    assert_eq!(w.opponent.hitstun_frames, 11);
}

#[test]
fn basic_attack_misses_outside_hitbox() {
    let agent = Vec3::new(100.0, 50.0, 0.0);
    for (opp, expect) in [
        (Vec3::new(141.0, 50.0, 0.0), false),
        (Vec3::new(140.0, 65.0, 0.0), true),
        (Vec3::new(140.0, 65.5, 0.0), false),
        (Vec3::new(100.0, 35.0, 0.0), true),
    ] {
        assert_eq!(oracle_basic_hit(agent, true, opp), expect);
        let mut w = world_with(agent, opp);
        let total: i32 = (0..3)
            .map(|_| advance_frame(&mut w, basic(A), ActionId::IDLE).opponent_hp_delta)
            .sum();
        assert_eq!(total != 0, expect, "opponent at {opp:?}");
    }
}

#[test]
fn hitbox_matches_oracle_on_grid() {
    let cfg = MatchConfig::default();
    let attacker = Vec3::new(200.0, 50.0, 0.0);
    for x in (150..=250).step_by(5) {
        for z in (30..=70).step_by(5) {
            for y in [0.0, 10.0, 20.0, 20.5, 35.0] {
                let t = Vec3::new(x as f64, z as f64, y);
                for (facing, right) in [(Facing::Right, true), (Facing::Left, false)] {
                    assert_eq!(
                        in_hitbox(attacker, facing, cfg.basic_attack_range, cfg.hit_height, t),
                        oracle_basic_hit(attacker, right, t),
                        "{t:?} {facing:?}"
                    );
                }
            }
        }
    }
}

#[test]
fn height_separation_defeats_attack_at_same_ground_point() {
    let agent = Vec3::new(100.0, 50.0, 0.0);
    let opp = Vec3::new(100.0, 50.0, 30.0);
    // once the opponent falls two frames it is at 28.5, still more than 20 above
    let falling = Vec3::new(100.0, 50.0, 28.5);
    assert!(!oracle_basic_hit(agent, true, falling));
    assert!(oracle_basic_hit(agent, true, Vec3::new(100.0, 50.0, 0.0)));
    let mut w = world_with(agent, opp);
    for _ in 0..3 {
        let out = advance_frame(&mut w, basic(A), ActionId::IDLE);
        assert_eq!((out.agent_hp_delta, out.opponent_hp_delta), (0, 0));
    }
}

#[test]
fn defend_blocks_basic_attack() {
    let mut w = world_with(Vec3::new(100.0, 50.0, 0.0), Vec3::new(120.0, 50.0, 0.0));
    let total: i32 = (0..4)
        .map(|_| advance_frame(&mut w, basic(A), basic(BasicAction::Defend)).opponent_hp_delta)
        .sum();
    assert_eq!(total, 0);
}

fn timed(seq: &[BasicAction], gap: u64) -> VecDeque<TimedInput> {
    seq.iter()
        .enumerate()
        .map(|(i, &action)| TimedInput {
            action,
            frame: 100 + i as u64 * gap,
        })
        .collect()
}

#[test]
fn explosion_trigger_is_recognised() {
    use BasicAction::*;
    let cfg = MatchConfig::default();
    let id = detect_combo(&timed(&[Defend, Up, Jump], 4), &cfg.combo_table, 20);
    assert_eq!(id, Some(1));
    assert_eq!(cfg.combo_table[1].trigger, [Defend, Up, Jump]);
    assert_eq!(detect_combo(&timed(&[Defend], 1), &cfg.combo_table, 20), None);
    // gap wider than the window
    assert_eq!(detect_combo(&timed(&[Defend, Up, Jump], 21), &cfg.combo_table, 20), None);
    assert_eq!(detect_combo(&timed(&[Defend, Up, Jump], 20), &cfg.combo_table, 20), Some(1));
    // only the most recent three count
    assert_eq!(
        detect_combo(&timed(&[Defend, Up, Jump, Idle], 2), &cfg.combo_table, 20),
        None
    );
}

#[test]
fn exhaustive_trigger_grammar() {
    let cfg = MatchConfig::default();
    let mut hits = 0;
    for a in BasicAction::ALL {
        for b in BasicAction::ALL {
            for c in BasicAction::ALL {
                let got = detect_combo(&timed(&[a, b, c], 3), &cfg.combo_table, 20);
                let grammar = a == BasicAction::Defend
                    && matches!(
                        b,
                        BasicAction::Up | BasicAction::Right | BasicAction::Down | BasicAction::Left
                    )
                    && matches!(c, BasicAction::Attack | BasicAction::Jump);
                assert_eq!(got.is_some(), grammar, "{a} {b} {c}");
                if grammar {
                    hits += 1;
                    let dir = [BasicAction::Up, BasicAction::Right, BasicAction::Down, BasicAction::Left]
                        .iter()
                        .position(|&d| d == b)
                        .unwrap();
                    let fin = usize::from(c == BasicAction::Jump);
                    assert_eq!(got, Some((dir * 2 + fin) as u8));
                }
            }
        }
    }
    assert_eq!(hits, 8);
}

#[test]
fn combo_entered_through_presses_fires() {
    use BasicAction::*;
    let mut w = world_with(Vec3::new(100.0, 50.0, 0.0), Vec3::new(140.0, 50.0, 0.0));
    let mut fired = None;
    for b in [Defend, Defend, Up, Up, Jump] {
        let out = advance_frame(&mut w, basic(b), ActionId::IDLE);
        fired = fired.or(out.combos_started[0]);
    }
    assert_eq!(fired, Some(1));
    assert!(w.agent.pos.y == 0.0, "explosion replaces the jump");
}

#[test]
fn combos_disabled_stay_basic() {
    use BasicAction::*;
    let mut cfg = MatchConfig::default();
    cfg.combos_enabled = false;
    let mut w = new_match(cfg, 0).unwrap();
    for b in [Defend, Up, Jump] {
        let out = advance_frame(&mut w, basic(b), basic(b));
        assert_eq!(out.combos_started, [None, None]);
    }
}

#[test]
fn jump_sets_impulse() {
    let mut w = new_match(MatchConfig::default(), 0).unwrap();
    execute_action(&mut w, Side::Agent, basic(BasicAction::Jump));
    assert_eq!(w.agent.vel.y, w.config.jump_impulse);
}

#[test]
fn hitstun_drops_input() {
    let mut w = new_match(MatchConfig::default(), 0).unwrap();
    w.agent.hitstun_frames = 5;
    let before = w.clone();
    for a in (0..16).map(|i| ActionId::from_index(i).unwrap()) {
        execute_action(&mut w, Side::Agent, a);
        assert_eq!(w, before);
    }
    advance_frame(&mut w, basic(BasicAction::Attack), ActionId::IDLE);
    assert!(w.agent.active_action.is_none());
    assert_eq!(w.agent.hitstun_frames, 4);
}

#[test]
fn combo_without_mp_degrades_to_idle() {
    let cfg = MatchConfig {
        mp_unconstrained: false,
        ..MatchConfig::default()
    };
    let mut w = new_match(cfg, 0).unwrap();
    w.agent.mp = 0;
    w.agent.vel.x = 4.0;
    execute_action(&mut w, Side::Agent, ActionId::Combo(3));
    assert!(w.agent.active_action.is_none());
    assert_eq!(w.agent.mp, 0);
    assert_eq!(w.agent.vel, Vec3::ZERO);
}

#[test]
fn combo_spends_mp_when_constrained() {
    let cfg = MatchConfig {
        mp_unconstrained: false,
        ..MatchConfig::default()
    };
    let mut w = new_match(cfg, 0).unwrap();
    execute_action(&mut w, Side::Agent, ActionId::Combo(3));
    assert_eq!(w.agent.mp, 500 - 75);
    assert!(w.agent.is_attacking());
}

#[test]
fn timeout_awards_more_hp_and_draws_ties() {
    let cfg = MatchConfig {
        max_episode_frames: 3,
        ..MatchConfig::default()
    };
    let mut w = new_match(cfg.clone(), 0).unwrap();
    let mut last = None;
    for _ in 0..3 {
        last = Some(advance_frame(&mut w, ActionId::IDLE, ActionId::IDLE));
    }
    assert_eq!(last.unwrap().winner, Some(Winner::Draw));
    let mut w = new_match(cfg, 0).unwrap();
    w.opponent.hp = 10;
    for _ in 0..3 {
        last = Some(advance_frame(&mut w, ActionId::IDLE, ActionId::IDLE));
    }
    assert!(last.unwrap().terminal);
    assert_eq!(last.unwrap().winner, Some(Winner::Agent));
}

#[test]
fn simultaneous_ko_is_draw() {
    let cfg = MatchConfig {
        hp_max: 20,
        agent_spawn: Vec3::new(100.0, 50.0, 0.0),
        opponent_spawn: Vec3::new(120.0, 50.0, 0.0),
        ..MatchConfig::default()
    };
    let mut w = new_match(cfg, 0).unwrap();
    let mut out = None;
    for _ in 0..3 {
        out = Some(advance_frame(&mut w, basic(A), basic(A)));
    }
    let out = out.unwrap();
    assert_eq!((out.agent_hp_delta, out.opponent_hp_delta), (-20, -20));
    assert_eq!(out.winner, Some(Winner::Draw));
}

fn action_strategy() -> impl Strategy<Value = ActionId> {
    (0usize..16).prop_map(|i| ActionId::from_index(i).unwrap())
}

fn close_config() -> MatchConfig {
    // start in range so random play produces contact
    MatchConfig {
        agent_spawn: Vec3::new(180.0, 50.0, 0.0),
        opponent_spawn: Vec3::new(210.0, 55.0, 0.0),
        max_episode_frames: 2_000,
        ..MatchConfig::default()
    }
}

proptest! {
    #[test]
    fn replay_is_bit_identical(seed in any::<u64>(),
                               actions in prop::collection::vec((action_strategy(), action_strategy()), 1..300)) {
        let mut a = new_match(close_config(), seed).unwrap();
        let mut b = new_match(close_config(), seed).unwrap();
        for &(x, y) in &actions {
            let oa = advance_frame(&mut a, x, y);
            let ob = advance_frame(&mut b, x, y);
            prop_assert_eq!(oa, ob);
            prop_assert_eq!(&a, &b);
        }
    }

    #[test]
    fn engine_invariants_hold(actions in prop::collection::vec((action_strategy(), action_strategy()), 1..600)) {
        let mut w = new_match(close_config(), 3).unwrap();
        let hp_max = w.config.hp_max as i64;
        let (mut taken_a, mut taken_o) = (0i64, 0i64);
        for &(x, y) in &actions {
            let (hp_a, hp_o) = (w.agent.hp, w.opponent.hp);
            let stunned = [w.agent.hitstun_frames > 0, w.opponent.hitstun_frames > 0];
            let out = advance_frame(&mut w, x, y);
            prop_assert!(w.agent.hp <= hp_a && w.opponent.hp <= hp_o);
            prop_assert!(out.agent_hp_delta <= 0 && out.opponent_hp_delta <= 0);
            taken_a -= out.agent_hp_delta as i64;
            taken_o -= out.opponent_hp_delta as i64;
            for (ch, was_stunned) in [&w.agent, &w.opponent].into_iter().zip(stunned) {
                prop_assert!((0.0..=w.config.arena_width).contains(&ch.pos.x));
                prop_assert!((0.0..=w.config.arena_depth).contains(&ch.pos.z));
                prop_assert!(ch.pos.y >= 0.0);
                if was_stunned {
                    prop_assert!(ch.active_action.is_none());
                }
            }
            let ended = w.agent.hp == 0 || w.opponent.hp == 0 || w.frame_count >= w.config.max_episode_frames;
            prop_assert_eq!(out.terminal, ended);
            if out.terminal {
                break;
            }
        }
        prop_assert_eq!(taken_a, hp_max - w.agent.hp as i64);
        prop_assert_eq!(taken_o, hp_max - w.opponent.hp as i64);
    }
}
