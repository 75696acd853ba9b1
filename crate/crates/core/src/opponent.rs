//! Scripted adversaries: the rule-based fighter used for training and
//! evaluation, plus idle and uniformly random controllers.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ConfigError, FlatConfig, FlatSection, FlatWriter};
use crate::sim::{distance3, in_hitbox, ActionId, BasicAction, CharacterState, InputScript, MatchConfig, WorldState};

#[derive(Debug, Clone, PartialEq)]
pub struct RulePolicyConfig {
    pub engage_distance: f64,
    pub combo_probability: f64,
    pub defend_probability: f64,
    /// Share of out-of-range decisions spent jumping.
    pub jump_probability: f64,
    /// Share of out-of-range decisions spent standing still.
    pub idle_probability: f64,
    pub decision_period: u32,
    pub seed: u64,
}

impl RulePolicyConfig {
    pub fn for_match(m: &MatchConfig) -> Self {
        let (dx, dz) = m.basic_attack_range;
        RulePolicyConfig {
            engage_distance: 1.5 * (dx * dx + dz * dz).sqrt(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, p) in [
            ("opponent.combo_probability", self.combo_probability),
            ("opponent.defend_probability", self.defend_probability),
            ("opponent.jump_probability", self.jump_probability),
            ("opponent.idle_probability", self.idle_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ConfigError::Invalid(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.jump_probability + self.idle_probability > 1.0 {
            return Err(ConfigError::Invalid(
                "opponent.jump_probability + opponent.idle_probability exceeds 1".into(),
            ));
        }
        if self.decision_period == 0 {
            return Err(ConfigError::Invalid("opponent.decision_period must be at least 1".into()));
        }
        if !(self.engage_distance > 0.0) {
            return Err(ConfigError::Invalid("opponent.engage_distance must be positive".into()));
        }
        Ok(())
    }
}

impl Default for RulePolicyConfig {
    fn default() -> Self {
        RulePolicyConfig {
            // 1.5 x the diagonal of the default (40, 15) basic attack reach
            engage_distance: 1.5 * 1825f64.sqrt(),
            combo_probability: 0.15,
            defend_probability: 0.3,
            jump_probability: 0.05,
            idle_probability: 0.05,
            decision_period: 4,
            seed: 0,
        }
    }
}

/// Decision rule of the scripted fighter, evaluated from the opponent's side.
///
/// Draws are consumed in a fixed order: one uniform for the defend check (only
/// when the agent is attacking nearby), then one uniform for the branch, then
/// a combo index when a combo is chosen.
pub fn select_action(state: &WorldState, cfg: &RulePolicyConfig, rng: &mut impl RngCore) -> ActionId {
    let me = &state.opponent;
    let them = &state.agent;
    let d = distance3(me.pos, them.pos);
    let in_range = d <= cfg.engage_distance;
    let threatened = them.is_attacking() && (in_range || within_reach(state, them, me));
    if threatened && rng.random::<f64>() < cfg.defend_probability {
        return ActionId::Basic(BasicAction::Defend);
    }
    let u = rng.random::<f64>();
    let dx = them.pos.x - me.pos.x;
    let dz = them.pos.z - me.pos.z;
    let along_x = if dx >= 0.0 { BasicAction::Right } else { BasicAction::Left };
    let along_z = if dz >= 0.0 { BasicAction::Up } else { BasicAction::Down };
    let step = state.config.walk_speed;
    if !in_range {
        let move_share = 1.0 - cfg.jump_probability - cfg.idle_probability;
        if u >= move_share + cfg.jump_probability {
            return ActionId::Basic(BasicAction::Idle);
        }
        if u >= move_share {
            return ActionId::Basic(BasicAction::Jump);
        }
        let axis_z = if dz.abs() < step {
            false
        } else if dx.abs() < step {
            true
        } else {
            // alternate axes between decisions
            (state.frame_count / cfg.decision_period as u64) % 2 == 1
        };
        return ActionId::Basic(if axis_z { along_z } else { along_x });
    }
    // line up in depth before swinging
    if dz.abs() > state.config.basic_attack_range.1 {
        return ActionId::Basic(along_z);
    }
    if me.combos_enabled && u < cfg.combo_probability {
        return ActionId::Combo(rng.random_range(0..8u8));
    }
    // close the gap to basic reach before swinging
    if dx.abs() > state.config.basic_attack_range.0 {
        return ActionId::Basic(along_x);
    }
    ActionId::Basic(BasicAction::Attack)
}

/// Whether `target` stands inside the full reach of `attacker`'s current action.
fn within_reach(state: &WorldState, attacker: &CharacterState, target: &CharacterState) -> bool {
    let cfg = &state.config;
    let reach = match attacker.active_action.as_ref().map(|a| a.action) {
        Some(ActionId::Combo(id)) => cfg.combo(id).map(|c| (c.range, c.range / 2.0)),
        Some(ActionId::Basic(BasicAction::Attack)) => Some(cfg.basic_attack_range),
        _ => None,
    };
    reach.is_some_and(|r| in_hitbox(attacker.pos, attacker.facing, r, cfg.hit_height, target.pos))
}

/// Uniform draw over `action_space`.
pub fn random_policy(action_space: &[ActionId], rng: &mut impl RngCore) -> ActionId {
    assert!(!action_space.is_empty(), "action space must be non-empty");
    action_space[rng.random_range(0..action_space.len())]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpponentKind {
    Rule,
    Idle,
    Random,
}

impl std::str::FromStr for OpponentKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rule" => Ok(OpponentKind::Rule),
            "idle" => Ok(OpponentKind::Idle),
            "random" => Ok(OpponentKind::Random),
            _ => Err("expected rule, idle or random".into()),
        }
    }
}

impl std::fmt::Display for OpponentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OpponentKind::Rule => "rule",
            OpponentKind::Idle => "idle",
            OpponentKind::Random => "random",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpponentConfig {
    pub kind: OpponentKind,
    pub rule: RulePolicyConfig,
}

impl Default for OpponentConfig {
    fn default() -> Self {
        OpponentConfig {
            kind: OpponentKind::Rule,
            rule: RulePolicyConfig::default(),
        }
    }
}

impl FlatSection for OpponentConfig {
    fn read_section(&mut self, cfg: &mut FlatConfig) -> Result<(), ConfigError> {
        cfg.read("opponent.kind", &mut self.kind)?;
        let r = &mut self.rule;
        cfg.read("opponent.engage_distance", &mut r.engage_distance)?;
        cfg.read("opponent.combo_probability", &mut r.combo_probability)?;
        cfg.read("opponent.defend_probability", &mut r.defend_probability)?;
        cfg.read("opponent.jump_probability", &mut r.jump_probability)?;
        cfg.read("opponent.idle_probability", &mut r.idle_probability)?;
        cfg.read("opponent.decision_period", &mut r.decision_period)?;
        cfg.read("opponent.seed", &mut r.seed)?;
        Ok(())
    }

    fn write_section(&self, out: &mut FlatWriter) {
        let r = &self.rule;
        out.put("opponent.kind", self.kind);
        out.put("opponent.engage_distance", r.engage_distance);
        out.put("opponent.combo_probability", r.combo_probability);
        out.put("opponent.defend_probability", r.defend_probability);
        out.put("opponent.jump_probability", r.jump_probability);
        out.put("opponent.idle_probability", r.idle_probability);
        out.put("opponent.decision_period", r.decision_period);
        out.put("opponent.seed", r.seed);
    }
}

/// Per-episode opponent: decides every `decision_period` frames and feeds the
/// engine one input per frame in between.
#[derive(Debug, Clone)]
pub struct OpponentController {
    config: OpponentConfig,
    rng: ChaCha8Rng,
    script: InputScript,
    frames_since_decision: u32,
    last_action: ActionId,
}

impl OpponentController {
    pub fn new(config: OpponentConfig, episode_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.rule.seed ^ episode_seed);
        rng.set_stream(1);
        OpponentController {
            config,
            rng,
            script: InputScript::idle(),
            frames_since_decision: 0,
            last_action: ActionId::IDLE,
        }
    }

    pub fn last_action(&self) -> ActionId {
        self.last_action
    }

    /// The engine input for the coming frame.
    pub fn next_input(&mut self, state: &WorldState) -> ActionId {
        let period = match self.config.kind {
            OpponentKind::Idle => return ActionId::IDLE,
            _ => self.config.rule.decision_period,
        };
        if self.frames_since_decision.is_multiple_of(period) {
            let action = match self.config.kind {
                OpponentKind::Rule => select_action(state, &self.config.rule, &mut self.rng),
                OpponentKind::Random => {
                    let space: Vec<ActionId> = (0..ActionId::COUNT).filter_map(ActionId::from_index).collect();
                    random_policy(&space, &mut self.rng)
                }
                OpponentKind::Idle => ActionId::IDLE,
            };
            self.last_action = action;
            self.script = InputScript::new(action, &state.config);
            self.frames_since_decision = 0;
        }
        self.frames_since_decision += 1;
        self.script.next_input()
    }
}
