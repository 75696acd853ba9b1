//! Gym-style environment around the engine: `reset`/`step`, frame skipping,
//! HP-difference rewards and observation assembly.

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use thiserror::Error;

use crate::config::{ConfigError, FlatConfig, FlatSection, FlatWriter};
use crate::opponent::{OpponentConfig, OpponentController};
use crate::render::{render_frame, FrameStack, RenderConfig};
use crate::sim::{
    advance_frame, distance3, new_match, ActionId, InputScript, MatchConfig, Vec3, Winner,
    WorldState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    /// The eight basic actions only.
    Basic,
    /// Basic actions plus the eight combo skills.
    Advanced,
}

impl FromStr for Setting {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "basic" => Ok(Setting::Basic),
            "advanced" => Ok(Setting::Advanced),
            _ => Err("expected basic or advanced".into()),
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::Basic => "basic",
            Setting::Advanced => "advanced",
        })
    }
}

/// Actions available to the agent, basic actions first.
pub fn action_space(setting: Setting) -> Vec<ActionId> {
    let n = match setting {
        Setting::Basic => 8,
        Setting::Advanced => ActionId::COUNT,
    };
    (0..n).filter_map(ActionId::from_index).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub setting: Setting,
    pub frame_skip: u32,
    pub reward_scale: f64,
    pub history_len: usize,
    pub render: RenderConfig,
    pub match_cfg: MatchConfig,
    pub opponent: OpponentConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            setting: Setting::Advanced,
            frame_skip: 4,
            reward_scale: 1.0 / 40.0,
            history_len: 4,
            render: RenderConfig::default(),
            match_cfg: MatchConfig::default(),
            opponent: OpponentConfig::default(),
        }
    }
}

impl EnvConfig {
    pub fn num_actions(&self) -> usize {
        action_space(self.setting).len()
    }

    pub fn info_dim(&self) -> usize {
        InfoFeatures::SCALARS + self.history_len * self.num_actions()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.frame_skip == 0 {
            return Err(ConfigError::Invalid("env.frame_skip must be at least 1".into()));
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return Err(ConfigError::Invalid("env.reward_scale must be positive".into()));
        }
        let r = &self.render;
        if r.width < 2 * r.margin + r.sprite_width || r.height < 2 * r.margin + 2 * r.sprite_height {
            return Err(ConfigError::Invalid("frame too small for sprites and margin".into()));
        }
        self.match_cfg.validate()?;
        self.opponent.rule.validate()
    }
}

impl FlatSection for EnvConfig {
    fn read_section(&mut self, cfg: &mut FlatConfig) -> Result<(), ConfigError> {
        cfg.read("setting", &mut self.setting)?;
        cfg.read("env.frame_skip", &mut self.frame_skip)?;
        cfg.read("env.reward_scale", &mut self.reward_scale)?;
        cfg.read("env.history_len", &mut self.history_len)?;
        cfg.read("env.frame_width", &mut self.render.width)?;
        cfg.read("env.frame_height", &mut self.render.height)?;
        cfg.read("env.frame_margin", &mut self.render.margin)?;
        cfg.read("env.sprite_width", &mut self.render.sprite_width)?;
        cfg.read("env.sprite_height", &mut self.render.sprite_height)?;
        self.match_cfg.read_section(cfg)?;
        self.opponent.read_section(cfg)
    }

    fn write_section(&self, out: &mut FlatWriter) {
        out.put("setting", self.setting);
        out.put("env.frame_skip", self.frame_skip);
        out.put("env.reward_scale", self.reward_scale);
        out.put("env.history_len", self.history_len);
        out.put("env.frame_width", self.render.width);
        out.put("env.frame_height", self.render.height);
        out.put("env.frame_margin", self.render.margin);
        out.put("env.sprite_width", self.render.sprite_width);
        out.put("env.sprite_height", self.render.sprite_height);
        self.match_cfg.write_section(out);
        self.opponent.write_section(out);
    }
}

/// Game-state features fed to the info branch of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoFeatures {
    pub agent_xz: [f64; 2],
    pub opp_xz: [f64; 2],
    pub agent_height: f64,
    pub opp_height: f64,
    pub agent_depth: f64,
    pub opp_depth: f64,
    pub distance: f64,
    /// `history_len` one-hot blocks of width `num_actions`, most recent last.
    pub recent_actions: Vec<f64>,
    pub num_actions: usize,
}

impl InfoFeatures {
    pub const SCALARS: usize = 9;

    pub fn dim(&self) -> usize {
        Self::SCALARS + self.recent_actions.len()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.agent_xz);
        v.extend_from_slice(&self.opp_xz);
        v.extend([
            self.agent_height,
            self.opp_height,
            self.agent_depth,
            self.opp_depth,
            self.distance,
        ]);
        v.extend_from_slice(&self.recent_actions);
        v
    }

    pub fn history_block(&self, slot: usize) -> &[f64] {
        &self.recent_actions[slot * self.num_actions..(slot + 1) * self.num_actions]
    }
}

/// Normalised positions plus the right-aligned one-hot action history.
pub fn build_info_features(
    state: &WorldState,
    history: &[ActionId],
    history_len: usize,
    num_actions: usize,
) -> InfoFeatures {
    info_from_positions(
        &state.config,
        state.agent.pos,
        state.opponent.pos,
        history,
        history_len,
        num_actions,
    )
}

/// Same as [`build_info_features`] from raw positions.
pub fn info_from_positions(
    cfg: &MatchConfig,
    a: Vec3,
    o: Vec3,
    history: &[ActionId],
    history_len: usize,
    num_actions: usize,
) -> InfoFeatures {
    assert!(history.len() <= history_len, "history longer than history_len");
    let apex = cfg.jump_apex();
    let diagonal = (cfg.arena_width.powi(2) + cfg.arena_depth.powi(2) + apex.powi(2)).sqrt();
    let norm_xz = |p: Vec3| [p.x / cfg.arena_width, p.z / cfg.arena_depth];
    let height = |p: Vec3| (p.y / apex).min(1.0);
    let mut recent = vec![0.0; history_len * num_actions];
    let offset = history_len - history.len();
    for (i, act) in history.iter().enumerate() {
        recent[(offset + i) * num_actions + act.index()] = 1.0;
    }
    InfoFeatures {
        agent_xz: norm_xz(a),
        opp_xz: norm_xz(o),
        agent_height: height(a),
        opp_height: height(o),
        agent_depth: a.z / cfg.arena_depth,
        opp_depth: o.z / cfg.arena_depth,
        distance: (distance3(a, o) / diagonal).min(1.0),
        recent_actions: recent,
        num_actions,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub frames: FrameStack,
    pub info: InfoFeatures,
}

/// Raw state after a step, sufficient to recompute the info features.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub hp_agent: u32,
    pub hp_opponent: u32,
    pub agent_pos: Vec3,
    pub opponent_pos: Vec3,
    pub frame_count: u64,
    pub frames_elapsed: u32,
    pub damage_dealt: u32,
    pub damage_taken: u32,
    pub combo_fired: Option<u8>,
    pub opponent_combo: Option<u8>,
    pub winner: Option<Winner>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub diagnostics: StepDiagnostics,
}

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("action {0} is not in the {1} action space")]
    OutOfSpace(ActionId, Setting),
    #[error("step called after the episode finished; call reset first")]
    EpisodeDone,
    #[error("step called before reset")]
    NotReset,
}

pub struct Env {
    config: EnvConfig,
    state: WorldState,
    stack: FrameStack,
    history: VecDeque<ActionId>,
    opponent: OpponentController,
    started: bool,
    done: bool,
}

impl Env {
    pub fn new(config: EnvConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let mut match_cfg = config.match_cfg.clone();
        match_cfg.combos_enabled = config.setting == Setting::Advanced;
        let state = new_match(match_cfg, 0)?;
        let stack = FrameStack::filled(render_frame(&state, &config.render));
        let opponent = OpponentController::new(config.opponent.clone(), 0);
        Ok(Env {
            history: VecDeque::with_capacity(config.history_len),
            config,
            state,
            stack,
            opponent,
            started: false,
            done: false,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn action_space(&self) -> Vec<ActionId> {
        action_space(self.config.setting)
    }

    pub fn num_actions(&self) -> usize {
        self.config.num_actions()
    }

    pub fn history(&self) -> Vec<ActionId> {
        self.history.iter().copied().collect()
    }

    pub fn reset(&mut self, seed: u64) -> Observation {
        let match_cfg = self.state.config.clone();
        self.state = new_match(match_cfg, seed).expect("config validated at construction");
        self.opponent = OpponentController::new(self.config.opponent.clone(), seed);
        self.stack = FrameStack::filled(render_frame(&self.state, &self.config.render));
        self.history.clear();
        self.started = true;
        self.done = false;
        self.observation()
    }

    /// Observation of the current state.
    pub fn observation(&self) -> Observation {
        let history: Vec<ActionId> = self.history.iter().copied().collect();
        Observation {
            frames: self.stack.clone(),
            info: build_info_features(&self.state, &history, self.config.history_len, self.num_actions()),
        }
    }

    pub fn step(&mut self, action: ActionId) -> Result<StepResult, EnvError> {
        if !self.started {
            return Err(EnvError::NotReset);
        }
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        if action.index() >= self.num_actions() {
            return Err(EnvError::OutOfSpace(action, self.config.setting));
        }
        let mut script = InputScript::new(action, &self.state.config);
        let (mut dealt, mut taken) = (0u32, 0u32);
        let mut combo_fired = None;
        let mut opponent_combo = None;
        let mut winner = None;
        let mut frames = 0;
        for _ in 0..self.config.frame_skip {
            let opp_input = self.opponent.next_input(&self.state);
            let out = advance_frame(&mut self.state, script.next_input(), opp_input);
            frames += 1;
            dealt += (-out.opponent_hp_delta) as u32;
            taken += (-out.agent_hp_delta) as u32;
            combo_fired = combo_fired.or(out.combos_started[0]);
            opponent_combo = opponent_combo.or(out.combos_started[1]);
            self.stack.push_frame(render_frame(&self.state, &self.config.render));
            if out.terminal {
                winner = out.winner;
                break;
            }
        }
        if self.history.len() == self.config.history_len {
            self.history.pop_front();
        }
        if self.config.history_len > 0 {
            self.history.push_back(action);
        }
        self.done = winner.is_some();
        let reward = self.config.reward_scale * (dealt as f64 - taken as f64);
        Ok(StepResult {
            observation: self.observation(),
            reward,
            done: self.done,
            diagnostics: StepDiagnostics {
                hp_agent: self.state.agent.hp,
                hp_opponent: self.state.opponent.hp,
                agent_pos: self.state.agent.pos,
                opponent_pos: self.state.opponent.pos,
                frame_count: self.state.frame_count,
                frames_elapsed: frames,
                damage_dealt: dealt,
                damage_taken: taken,
                combo_fired,
                opponent_combo,
                winner,
            },
        })
    }
}

/// Per-step debugging record exportable as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub frame: u64,
    pub action: ActionId,
    pub reward: f64,
    pub hp_agent: u32,
    pub hp_opp: u32,
}

#[derive(Debug, Clone, Default)]
pub struct EpisodeTrace {
    pub rows: Vec<TraceRow>,
}

impl EpisodeTrace {
    pub fn record(&mut self, action: ActionId, step: &StepResult) {
        self.rows.push(TraceRow {
            frame: step.diagnostics.frame_count,
            action,
            reward: step.reward,
            hp_agent: step.diagnostics.hp_agent,
            hp_opp: step.diagnostics.hp_opponent,
        });
    }

    pub fn write_csv(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["frame", "action", "reward", "hp_agent", "hp_opp"])?;
        for r in &self.rows {
            w.write_record([
                r.frame.to_string(),
                r.action.to_string(),
                r.reward.to_string(),
                r.hp_agent.to_string(),
                r.hp_opp.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Name of an action as accepted by scripts and shown in traces.
pub fn parse_action(s: &str) -> Result<ActionId, String> {
    s.trim().parse()
}

#[cfg(test)]
mod tests;
