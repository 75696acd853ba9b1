use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ConfigError;

use super::types::*;
use super::MatchConfig;

fn spawn(pos: Vec3, facing: Facing, cfg: &MatchConfig, combos_enabled: bool) -> CharacterState {
    CharacterState {
        pos,
        vel: Vec3::ZERO,
        hp: cfg.hp_max,
        mp: cfg.mp_max,
        facing,
        active_action: None,
        hitstun_frames: 0,
        input_buffer: VecDeque::with_capacity(cfg.input_buffer_len),
        last_input: None,
        combos_enabled,
    }
}

pub fn new_match(config: MatchConfig, seed: u64) -> Result<WorldState, ConfigError> {
    config.validate()?;
    let (fa, fo) = if config.agent_spawn.x <= config.opponent_spawn.x {
        (Facing::Right, Facing::Left)
    } else {
        (Facing::Left, Facing::Right)
    };
    Ok(WorldState {
        agent: spawn(config.agent_spawn, fa, &config, config.combos_enabled),
        opponent: spawn(config.opponent_spawn, fo, &config, config.combos_enabled),
        frame_count: 0,
        rng_state: ChaCha8Rng::seed_from_u64(seed),
        config,
    })
}

/// Returns the combo whose trigger equals the three most recent presses, provided each
/// consecutive gap is at most `window_frames`.
pub fn detect_combo(
    input_buffer: &VecDeque<TimedInput>,
    combo_table: &[ComboSkill],
    window_frames: u32,
) -> Option<u8> {
    let n = input_buffer.len();
    if n < 3 {
        return None;
    }
    let tail = [input_buffer[n - 3], input_buffer[n - 2], input_buffer[n - 1]];
    let window = window_frames as u64;
    if tail[1].frame.saturating_sub(tail[0].frame) > window
        || tail[2].frame.saturating_sub(tail[1].frame) > window
    {
        return None;
    }
    let seq = [tail[0].action, tail[1].action, tail[2].action];
    combo_table.iter().find(|c| c.trigger == seq).map(|c| c.id)
}

fn action_duration(cfg: &MatchConfig, action: ActionId) -> Option<u32> {
    match action {
        ActionId::Basic(BasicAction::Attack) => Some(cfg.attack_frames),
        ActionId::Basic(BasicAction::Defend) => Some(cfg.defend_frames),
        ActionId::Combo(id) => cfg.combo(id).map(|c| cfg.combo_startup + c.effect_frames),
        ActionId::Basic(_) => None,
    }
}

fn install(ch: &mut CharacterState, action: ActionId, frames: u32) {
    ch.active_action = Some(ActiveAction {
        action,
        frames_remaining: frames,
        elapsed: 0,
        hit_landed: false,
    });
    if !ch.airborne() {
        ch.vel.x = 0.0;
        ch.vel.z = 0.0;
    }
}

/// Applies one frame of input to a character. Input is dropped while the
/// character is in hitstun or already committed to an action; a defend may be
/// cancelled into a combo.
pub fn execute_action(state: &mut WorldState, who: Side, action: ActionId) {
    let cfg = &state.config;
    let ch = match who {
        Side::Agent => &mut state.agent,
        Side::Opponent => &mut state.opponent,
    };
    if ch.hitstun_frames > 0 {
        return;
    }
    let busy = ch.active_action.is_some();
    match action {
        ActionId::Combo(id) => {
            let Some(combo) = cfg.combo(id) else { return };
            if ch.airborne() || (busy && !ch.is_defending()) {
                return;
            }
            if !cfg.mp_unconstrained {
                if ch.mp < combo.mp_cost {
                    // degrade to idle
                    if !busy {
                        ch.vel.x = 0.0;
                        ch.vel.z = 0.0;
                    }
                    return;
                }
                ch.mp -= combo.mp_cost;
            }
            install(ch, action, cfg.combo_startup + combo.effect_frames);
        }
        ActionId::Basic(b) => {
            if ch.airborne() {
                // only a jump attack can start in the air
                if b == BasicAction::Attack && !busy {
                    ch.active_action = Some(ActiveAction {
                        action,
                        frames_remaining: cfg.attack_frames,
                        elapsed: 0,
                        hit_landed: false,
                    });
                }
                return;
            }
            if busy {
                return;
            }
            let speed = cfg.walk_speed;
            match b {
                BasicAction::Idle => {
                    ch.vel.x = 0.0;
                    ch.vel.z = 0.0;
                }
                BasicAction::Up => {
                    ch.vel.x = 0.0;
                    ch.vel.z = speed;
                }
                BasicAction::Down => {
                    ch.vel.x = 0.0;
                    ch.vel.z = -speed;
                }
                BasicAction::Right => {
                    ch.vel.x = speed;
                    ch.vel.z = 0.0;
                }
                BasicAction::Left => {
                    ch.vel.x = -speed;
                    ch.vel.z = 0.0;
                }
                // horizontal momentum of the previous frame is kept through the jump
                BasicAction::Jump => ch.vel.y = cfg.jump_impulse,
                BasicAction::Attack | BasicAction::Defend => {
                    let frames = action_duration(cfg, action).unwrap_or(1);
                    install(ch, action, frames);
                }
            }
        }
    }
}

/// Registers a press in the input buffer and upgrades finishers to combos.
fn register_input(state: &mut WorldState, who: Side, action: ActionId) -> ActionId {
    let cfg = &state.config;
    let frame = state.frame_count;
    let ch = match who {
        Side::Agent => &mut state.agent,
        Side::Opponent => &mut state.opponent,
    };
    if ch.hitstun_frames > 0 {
        return action;
    }
    let b = match action {
        ActionId::Basic(b) => b,
        ActionId::Combo(_) => {
            ch.last_input = None;
            return action;
        }
    };
    if ch.last_input == Some(b) {
        return action;
    }
    ch.last_input = Some(b);
    ch.input_buffer.push_back(TimedInput { action: b, frame });
    while ch.input_buffer.len() > cfg.input_buffer_len {
        ch.input_buffer.pop_front();
    }
    if !ch.combos_enabled || !b.is_finisher() {
        return action;
    }
    match detect_combo(&ch.input_buffer, &cfg.combo_table, cfg.combo_window) {
        Some(id) => {
            ch.input_buffer.clear();
            ActionId::Combo(id)
        }
        None => action,
    }
}

fn integrate(ch: &mut CharacterState, cfg: &MatchConfig) {
    ch.pos.x += ch.vel.x;
    ch.pos.z += ch.vel.z;
    if ch.airborne() {
        ch.pos.y += ch.vel.y;
        ch.vel.y -= cfg.gravity;
        if ch.pos.y <= 0.0 {
            ch.pos.y = 0.0;
            ch.vel = Vec3::ZERO;
        }
    }
    clamp(ch, cfg);
}

fn clamp(ch: &mut CharacterState, cfg: &MatchConfig) {
    ch.pos.x = ch.pos.x.clamp(0.0, cfg.arena_width);
    ch.pos.z = ch.pos.z.clamp(0.0, cfg.arena_depth);
    ch.pos.y = ch.pos.y.max(0.0);
}

/// Hitbox reach `(forward, depth)` of the live part of an action, if any.
pub fn live_hitbox(cfg: &MatchConfig, active: &ActiveAction) -> Option<(f64, f64)> {
    match active.action {
        ActionId::Basic(BasicAction::Attack) if active.elapsed >= cfg.attack_startup => {
            Some(cfg.basic_attack_range)
        }
        ActionId::Combo(id) if active.elapsed >= cfg.combo_startup => {
            cfg.combo(id).map(|c| (c.range, c.range / 2.0))
        }
        _ => None,
    }
}

/// Axis-aligned containment of `target` in a hitbox extending `reach` in front of `attacker`.
pub fn in_hitbox(
    attacker: Vec3,
    facing: Facing,
    reach: (f64, f64),
    hit_height: f64,
    target: Vec3,
) -> bool {
    let forward = (target.x - attacker.x) * facing.sign();
    (0.0..=reach.0).contains(&forward)
        && (target.z - attacker.z).abs() <= reach.1
        && (target.y - attacker.y).abs() <= hit_height
}

struct Hit {
    damage: u32,
    hitstun: u32,
    knockback: f64,
}

fn resolve_hit(cfg: &MatchConfig, attacker: &CharacterState, target: &CharacterState) -> Option<Hit> {
    let active = attacker.active_action.as_ref()?;
    if active.hit_landed {
        return None;
    }
    let reach = live_hitbox(cfg, active)?;
    if !in_hitbox(attacker.pos, attacker.facing, reach, cfg.hit_height, target.pos) {
        return None;
    }
    let defending = target.is_defending();
    Some(match active.action {
        ActionId::Combo(id) => {
            let c = cfg.combo(id)?;
            Hit {
                damage: if defending { c.damage / 2 } else { c.damage },
                hitstun: cfg.combo_hitstun_frames,
                knockback: cfg.combo_knockback,
            }
        }
        _ if defending => Hit {
            damage: 0,
            hitstun: 0,
            knockback: 0.0,
        },
        _ => Hit {
            damage: cfg.basic_attack_damage,
            hitstun: cfg.hitstun_frames,
            knockback: cfg.knockback,
        },
    })
}

fn apply_hit(cfg: &MatchConfig, target: &mut CharacterState, push_dir: f64, hit: &Hit) -> u32 {
    let dealt = hit.damage.min(target.hp);
    target.hp -= dealt;
    if hit.hitstun > 0 {
        target.active_action = None;
        target.hitstun_frames = hit.hitstun;
        target.vel.x = 0.0;
        target.vel.z = 0.0;
    }
    target.pos.x += push_dir * hit.knockback;
    clamp(target, cfg);
    dealt
}

fn tick(ch: &mut CharacterState, was_hit: bool) {
    if !was_hit && ch.hitstun_frames > 0 {
        ch.hitstun_frames -= 1;
    }
    if let Some(a) = ch.active_action.as_mut() {
        a.elapsed += 1;
        a.frames_remaining = a.frames_remaining.saturating_sub(1);
        if a.frames_remaining == 0 {
            ch.active_action = None;
        }
    }
}

fn face_each_other(state: &mut WorldState) {
    let (ax, ox) = (state.agent.pos.x, state.opponent.pos.x);
    if ox > ax {
        state.agent.facing = Facing::Right;
        state.opponent.facing = Facing::Left;
    } else if ox < ax {
        state.agent.facing = Facing::Left;
        state.opponent.facing = Facing::Right;
    }
}

/// Whether a match in this state has ended, and who won.
pub fn match_result(state: &WorldState) -> Option<Winner> {
    let (a, o) = (state.agent.hp, state.opponent.hp);
    if a == 0 && o == 0 {
        Some(Winner::Draw)
    } else if o == 0 {
        Some(Winner::Agent)
    } else if a == 0 {
        Some(Winner::Opponent)
    } else if state.frame_count >= state.config.max_episode_frames {
        Some(match a.cmp(&o) {
            std::cmp::Ordering::Greater => Winner::Agent,
            std::cmp::Ordering::Less => Winner::Opponent,
            std::cmp::Ordering::Equal => Winner::Draw,
        })
    } else {
        None
    }
}

/// Advances the match by one fixed timestep.
pub fn advance_frame(
    state: &mut WorldState,
    agent_action: ActionId,
    opponent_action: ActionId,
) -> FrameOutcome {
    let agent_action = register_input(state, Side::Agent, agent_action);
    let opp_action = register_input(state, Side::Opponent, opponent_action);
    let started = |ch: &CharacterState| match ch.active_action {
        Some(ActiveAction { action: ActionId::Combo(id), elapsed: 0, .. }) => Some(id),
        _ => None,
    };

    execute_action(state, Side::Agent, agent_action);
    execute_action(state, Side::Opponent, opp_action);
    let combos_started = [started(&state.agent), started(&state.opponent)];

    let cfg = &state.config;
    integrate(&mut state.agent, cfg);
    integrate(&mut state.opponent, cfg);
    face_each_other(state);

    let cfg = &state.config;
    let on_opp = resolve_hit(cfg, &state.agent, &state.opponent);
    let on_agent = resolve_hit(cfg, &state.opponent, &state.agent);
    let agent_dir = state.agent.facing.sign();
    let opp_dir = state.opponent.facing.sign();
    let mut opp_loss = 0;
    let mut agent_loss = 0;
    if let Some(hit) = &on_opp {
        if let Some(a) = state.agent.active_action.as_mut() {
            a.hit_landed = true;
        }
        opp_loss = apply_hit(cfg, &mut state.opponent, agent_dir, hit);
    }
    if let Some(hit) = &on_agent {
        if let Some(a) = state.opponent.active_action.as_mut() {
            a.hit_landed = true;
        }
        agent_loss = apply_hit(cfg, &mut state.agent, opp_dir, hit);
    }
    tick(&mut state.agent, on_agent.as_ref().is_some_and(|h| h.hitstun > 0));
    tick(&mut state.opponent, on_opp.as_ref().is_some_and(|h| h.hitstun > 0));
    state.frame_count += 1;

    let winner = match_result(state);
    FrameOutcome {
        agent_hp_delta: -(agent_loss as i32),
        opponent_hp_delta: -(opp_loss as i32),
        terminal: winner.is_some(),
        winner,
        combos_started,
    }
}
