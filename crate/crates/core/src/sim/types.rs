use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;

use super::MatchConfig;

/// World-space position or velocity. `x` runs along the screen, `z` is depth
/// into the screen and `y` is height above the floor.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub z: f64,
    pub y: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, z: 0.0, y: 0.0 };

    pub fn new(x: f64, z: f64, y: f64) -> Self {
        Vec3 { x, z, y }
    }
}

/// Euclidean distance over all three axes.
pub fn distance3(a: Vec3, b: Vec3) -> f64 {
    let dx = a.x - b.x;
    let dz = a.z - b.z;
    let dy = a.y - b.y;
    (dx * dx + dz * dz + dy * dy).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasicAction {
    Idle,
    Up,
    Right,
    Down,
    Left,
    Attack,
    Jump,
    Defend,
}

impl BasicAction {
    pub const ALL: [BasicAction; 8] = [
        BasicAction::Idle,
        BasicAction::Up,
        BasicAction::Right,
        BasicAction::Down,
        BasicAction::Left,
        BasicAction::Attack,
        BasicAction::Jump,
        BasicAction::Defend,
    ];
    pub const DIRECTIONS: [BasicAction; 4] = [
        BasicAction::Up,
        BasicAction::Right,
        BasicAction::Down,
        BasicAction::Left,
    ];
    pub const FINISHERS: [BasicAction; 2] = [BasicAction::Attack, BasicAction::Jump];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            BasicAction::Idle => "idle",
            BasicAction::Up => "up",
            BasicAction::Right => "right",
            BasicAction::Down => "down",
            BasicAction::Left => "left",
            BasicAction::Attack => "attack",
            BasicAction::Jump => "jump",
            BasicAction::Defend => "defend",
        }
    }

    pub fn is_direction(self) -> bool {
        Self::DIRECTIONS.contains(&self)
    }

    pub fn is_finisher(self) -> bool {
        Self::FINISHERS.contains(&self)
    }
}

impl fmt::Display for BasicAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BasicAction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BasicAction::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown basic action `{s}`"))
    }
}

/// The policy's output alphabet: 8 basic actions followed by 8 combo skills.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionId {
    Basic(BasicAction),
    Combo(u8),
}

impl ActionId {
    pub const COUNT: usize = 16;

    /// Position in the advanced action space (basic actions first).
    pub fn index(self) -> usize {
        match self {
            ActionId::Basic(b) => b.index(),
            ActionId::Combo(id) => 8 + id as usize,
        }
    }

    pub fn from_index(i: usize) -> Option<ActionId> {
        match i {
            0..=7 => Some(ActionId::Basic(BasicAction::ALL[i])),
            8..=15 => Some(ActionId::Combo((i - 8) as u8)),
            _ => None,
        }
    }

    pub fn is_combo(self) -> bool {
        matches!(self, ActionId::Combo(_))
    }

    pub const IDLE: ActionId = ActionId::Basic(BasicAction::Idle);
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionId::Basic(b) => write!(f, "{b}"),
            ActionId::Combo(id) => write!(f, "combo:{id}"),
        }
    }
}

impl FromStr for ActionId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(rest) = s.strip_prefix("combo:") {
            let id: u8 = rest
                .parse()
                .map_err(|_| format!("bad combo index `{rest}`"))?;
            if id >= 8 {
                return Err(format!("combo index {id} out of range 0..8"));
            }
            return Ok(ActionId::Combo(id));
        }
        s.parse::<BasicAction>().map(ActionId::Basic)
    }
}

/// A special attack entered as `defend → direction → finisher`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComboSkill {
    pub id: u8,
    pub trigger: [BasicAction; 3],
    pub damage: u32,
    /// Forward reach of the hitbox; depth reach is half of it.
    pub range: f64,
    pub mp_cost: u32,
    /// Frames during which the hitbox is live (after the shared startup).
    pub effect_frames: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Facing {
    Left,
    Right,
}

impl Facing {
    pub fn sign(self) -> f64 {
        match self {
            Facing::Left => -1.0,
            Facing::Right => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Agent,
    Opponent,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Agent => Side::Opponent,
            Side::Opponent => Side::Agent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Winner {
    Agent,
    Opponent,
    Draw,
}

impl fmt::Display for Winner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Winner::Agent => "agent",
            Winner::Opponent => "opponent",
            Winner::Draw => "draw",
        })
    }
}

/// An action occupying the character for a fixed number of frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveAction {
    pub action: ActionId,
    pub frames_remaining: u32,
    pub elapsed: u32,
    /// Attacks connect at most once per activation.
    pub hit_landed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimedInput {
    pub action: BasicAction,
    pub frame: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacterState {
    pub pos: Vec3,
    pub vel: Vec3,
    pub hp: u32,
    pub mp: u32,
    pub facing: Facing,
    pub active_action: Option<ActiveAction>,
    pub hitstun_frames: u32,
    /// Registered presses (an input repeated on consecutive frames counts once).
    pub input_buffer: VecDeque<TimedInput>,
    pub last_input: Option<BasicAction>,
    pub combos_enabled: bool,
}

impl CharacterState {
    pub fn airborne(&self) -> bool {
        self.pos.y > 0.0 || self.vel.y > 0.0
    }

    pub fn is_defending(&self) -> bool {
        matches!(
            self.active_action,
            Some(ActiveAction { action: ActionId::Basic(BasicAction::Defend), .. })
        )
    }

    /// True while an attack or combo is underway (startup included).
    pub fn is_attacking(&self) -> bool {
        matches!(
            self.active_action,
            Some(ActiveAction {
                action: ActionId::Basic(BasicAction::Attack) | ActionId::Combo(_),
                ..
            })
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub agent: CharacterState,
    pub opponent: CharacterState,
    pub frame_count: u64,
    /// Match-level random stream; physics itself is deterministic.
    pub rng_state: ChaCha8Rng,
    pub config: MatchConfig,
}

impl WorldState {
    pub fn side(&self, who: Side) -> &CharacterState {
        match who {
            Side::Agent => &self.agent,
            Side::Opponent => &self.opponent,
        }
    }

    pub fn side_mut(&mut self, who: Side) -> &mut CharacterState {
        match who {
            Side::Agent => &mut self.agent,
            Side::Opponent => &mut self.opponent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameOutcome {
    pub agent_hp_delta: i32,
    pub opponent_hp_delta: i32,
    pub terminal: bool,
    pub winner: Option<Winner>,
    /// Combo started this frame by (agent, opponent).
    pub combos_started: [Option<u8>; 2],
}
