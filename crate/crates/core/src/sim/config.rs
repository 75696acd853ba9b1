use std::collections::HashSet;

use crate::config::{parse_bool, ConfigError, FlatConfig, FlatSection, FlatWriter};

use super::types::{BasicAction, ComboSkill, Vec3};

/// Physical and rule constants of a match.
///
/// All speeds and accelerations are dyadic rationals by default, so engine
/// positions stay exactly representable and sums like `z + y` are exact.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchConfig {
    pub arena_width: f64,
    pub arena_depth: f64,
    pub hp_max: u32,
    pub mp_max: u32,
    pub mp_unconstrained: bool,
    pub gravity: f64,
    pub walk_speed: f64,
    pub jump_impulse: f64,
    pub basic_attack_damage: u32,
    /// Forward (x) and depth (z) reach of the basic attack hitbox.
    pub basic_attack_range: (f64, f64),
    /// Maximum height separation at which any hitbox connects.
    pub hit_height: f64,
    pub attack_frames: u32,
    pub attack_startup: u32,
    pub defend_frames: u32,
    pub combo_startup: u32,
    pub hitstun_frames: u32,
    pub combo_hitstun_frames: u32,
    pub knockback: f64,
    pub combo_knockback: f64,
    pub combo_window: u32,
    pub input_buffer_len: usize,
    pub combo_table: Vec<ComboSkill>,
    pub max_episode_frames: u64,
    pub agent_spawn: Vec3,
    pub opponent_spawn: Vec3,
    /// Combo skills exist for both fighters; cleared by the environment in the basic setting.
    pub combos_enabled: bool,
}

fn default_combo_table() -> Vec<ComboSkill> {
    use BasicAction::*;
    // (damage, range, mp_cost, effect_frames), ordered by direction then finisher
    let stats: [(u32, f64, u32, u32); 8] = [
        (40, 60.0, 50, 8),
        (60, 50.0, 100, 10),
        (35, 90.0, 50, 8),
        (50, 80.0, 75, 8),
        (25, 110.0, 50, 10),
        (45, 60.0, 75, 8),
        (30, 90.0, 50, 8),
        (20, 120.0, 25, 12),
    ];
    let dirs = [Up, Right, Down, Left];
    let fins = [Attack, Jump];
    stats
        .iter()
        .enumerate()
        .map(|(i, &(damage, range, mp_cost, effect_frames))| ComboSkill {
            id: i as u8,
            trigger: [Defend, dirs[i / 2], fins[i % 2]],
            damage,
            range,
            mp_cost,
            effect_frames,
        })
        .collect()
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            arena_width: 400.0,
            arena_depth: 100.0,
            hp_max: 500,
            mp_max: 500,
            mp_unconstrained: true,
            gravity: 0.5,
            walk_speed: 4.0,
            jump_impulse: 6.0,
            basic_attack_damage: 20,
            basic_attack_range: (40.0, 15.0),
            hit_height: 20.0,
            attack_frames: 8,
            attack_startup: 2,
            defend_frames: 8,
            combo_startup: 5,
            hitstun_frames: 12,
            combo_hitstun_frames: 16,
            knockback: 10.0,
            combo_knockback: 30.0,
            combo_window: 20,
            input_buffer_len: 8,
            combo_table: default_combo_table(),
            max_episode_frames: 12_000,
            agent_spawn: Vec3::new(100.0, 50.0, 0.0),
            opponent_spawn: Vec3::new(300.0, 50.0, 0.0),
            combos_enabled: true,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("match.arena_width", self.arena_width),
            ("match.arena_depth", self.arena_depth),
            ("match.gravity", self.gravity),
            ("match.walk_speed", self.walk_speed),
            ("match.jump_impulse", self.jump_impulse),
            ("match.basic_attack_range_x", self.basic_attack_range.0),
            ("match.basic_attack_range_z", self.basic_attack_range.1),
            ("match.hit_height", self.hit_height),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        let positive_ints = [
            ("match.hp_max", self.hp_max as u64),
            ("match.basic_attack_damage", self.basic_attack_damage as u64),
            ("match.attack_frames", self.attack_frames as u64),
            ("match.defend_frames", self.defend_frames as u64),
            ("match.combo_window", self.combo_window as u64),
            ("match.max_episode_frames", self.max_episode_frames),
            ("match.input_buffer_len", self.input_buffer_len as u64),
        ];
        for (name, v) in positive_ints {
            if v == 0 {
                return Err(ConfigError::Invalid(format!("{name} must be positive")));
            }
        }
        if self.input_buffer_len < 3 {
            return Err(ConfigError::Invalid("match.input_buffer_len must be at least 3".into()));
        }
        if self.attack_startup >= self.attack_frames {
            return Err(ConfigError::Invalid(
                "match.attack_startup must be shorter than match.attack_frames".into(),
            ));
        }
        if self.combo_table.len() != 8 {
            return Err(ConfigError::Invalid(format!(
                "combo table needs exactly 8 entries, found {}",
                self.combo_table.len()
            )));
        }
        let mut seen = HashSet::new();
        for (i, c) in self.combo_table.iter().enumerate() {
            if c.id as usize != i {
                return Err(ConfigError::Invalid(format!("combo {i} has id {}", c.id)));
            }
            let [a, b, f] = c.trigger;
            if a != BasicAction::Defend || !b.is_direction() || !f.is_finisher() {
                return Err(ConfigError::Invalid(format!(
                    "combo {i} trigger must be defend, direction, attack|jump"
                )));
            }
            if !seen.insert(c.trigger) {
                return Err(ConfigError::Invalid(format!("combo {i} duplicates another trigger")));
            }
            if c.damage == 0 || c.effect_frames == 0 || !(c.range.is_finite() && c.range > 0.0) {
                return Err(ConfigError::Invalid(format!(
                    "combo {i} needs positive damage, range and effect_frames"
                )));
            }
        }
        for (name, p) in [("agent", self.agent_spawn), ("opponent", self.opponent_spawn)] {
            if !(0.0..=self.arena_width).contains(&p.x)
                || !(0.0..=self.arena_depth).contains(&p.z)
                || p.y != 0.0
            {
                return Err(ConfigError::Invalid(format!(
                    "{name} spawn must lie on the arena floor"
                )));
            }
        }
        Ok(())
    }

    /// Highest point reached by a standing jump under the discrete integrator.
    pub fn jump_apex(&self) -> f64 {
        let mut y = 0.0;
        let mut vy = self.jump_impulse;
        let mut apex: f64 = 0.0;
        while vy > 0.0 {
            y += vy;
            vy -= self.gravity;
            apex = apex.max(y);
        }
        apex
    }

    pub fn combo(&self, id: u8) -> Option<&ComboSkill> {
        self.combo_table.get(id as usize)
    }
}

fn parse_trigger(s: &str) -> Result<[BasicAction; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err("trigger needs three comma-separated basic actions".into());
    }
    let mut out = [BasicAction::Idle; 3];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = p.parse()?;
    }
    Ok(out)
}

impl FlatSection for MatchConfig {
    fn read_section(&mut self, cfg: &mut FlatConfig) -> Result<(), ConfigError> {
        cfg.read("match.arena_width", &mut self.arena_width)?;
        cfg.read("match.arena_depth", &mut self.arena_depth)?;
        cfg.read("match.hp_max", &mut self.hp_max)?;
        cfg.read("match.mp_max", &mut self.mp_max)?;
        cfg.read_with("match.mp_unconstrained", &mut self.mp_unconstrained, parse_bool)?;
        cfg.read("match.gravity", &mut self.gravity)?;
        cfg.read("match.walk_speed", &mut self.walk_speed)?;
        cfg.read("match.jump_impulse", &mut self.jump_impulse)?;
        cfg.read("match.basic_attack_damage", &mut self.basic_attack_damage)?;
        cfg.read("match.basic_attack_range_x", &mut self.basic_attack_range.0)?;
        cfg.read("match.basic_attack_range_z", &mut self.basic_attack_range.1)?;
        cfg.read("match.hit_height", &mut self.hit_height)?;
        cfg.read("match.attack_frames", &mut self.attack_frames)?;
        cfg.read("match.attack_startup", &mut self.attack_startup)?;
        cfg.read("match.defend_frames", &mut self.defend_frames)?;
        cfg.read("match.combo_startup", &mut self.combo_startup)?;
        cfg.read("match.hitstun_frames", &mut self.hitstun_frames)?;
        cfg.read("match.combo_hitstun_frames", &mut self.combo_hitstun_frames)?;
        cfg.read("match.knockback", &mut self.knockback)?;
        cfg.read("match.combo_knockback", &mut self.combo_knockback)?;
        cfg.read("match.combo_window", &mut self.combo_window)?;
        cfg.read("match.input_buffer_len", &mut self.input_buffer_len)?;
        cfg.read("match.max_episode_frames", &mut self.max_episode_frames)?;
        cfg.read("match.agent_spawn_x", &mut self.agent_spawn.x)?;
        cfg.read("match.agent_spawn_z", &mut self.agent_spawn.z)?;
        cfg.read("match.opponent_spawn_x", &mut self.opponent_spawn.x)?;
        cfg.read("match.opponent_spawn_z", &mut self.opponent_spawn.z)?;
        for combo in self.combo_table.iter_mut() {
            let p = format!("match.combo.{}", combo.id);
            cfg.read_with(&format!("{p}.trigger"), &mut combo.trigger, parse_trigger)?;
            cfg.read(&format!("{p}.damage"), &mut combo.damage)?;
            cfg.read(&format!("{p}.range"), &mut combo.range)?;
            cfg.read(&format!("{p}.mp_cost"), &mut combo.mp_cost)?;
            cfg.read(&format!("{p}.effect_frames"), &mut combo.effect_frames)?;
        }
        Ok(())
    }

    fn write_section(&self, out: &mut FlatWriter) {
        out.put("match.arena_width", self.arena_width);
        out.put("match.arena_depth", self.arena_depth);
        out.put("match.hp_max", self.hp_max);
        out.put("match.mp_max", self.mp_max);
        out.put("match.mp_unconstrained", self.mp_unconstrained);
        out.put("match.gravity", self.gravity);
        out.put("match.walk_speed", self.walk_speed);
        out.put("match.jump_impulse", self.jump_impulse);
        out.put("match.basic_attack_damage", self.basic_attack_damage);
        out.put("match.basic_attack_range_x", self.basic_attack_range.0);
        out.put("match.basic_attack_range_z", self.basic_attack_range.1);
        out.put("match.hit_height", self.hit_height);
        out.put("match.attack_frames", self.attack_frames);
        out.put("match.attack_startup", self.attack_startup);
        out.put("match.defend_frames", self.defend_frames);
        out.put("match.combo_startup", self.combo_startup);
        out.put("match.hitstun_frames", self.hitstun_frames);
        out.put("match.combo_hitstun_frames", self.combo_hitstun_frames);
        out.put("match.knockback", self.knockback);
        out.put("match.combo_knockback", self.combo_knockback);
        out.put("match.combo_window", self.combo_window);
        out.put("match.input_buffer_len", self.input_buffer_len);
        out.put("match.max_episode_frames", self.max_episode_frames);
        out.put("match.agent_spawn_x", self.agent_spawn.x);
        out.put("match.agent_spawn_z", self.agent_spawn.z);
        out.put("match.opponent_spawn_x", self.opponent_spawn.x);
        out.put("match.opponent_spawn_z", self.opponent_spawn.z);
        for c in &self.combo_table {
            let p = format!("match.combo.{}", c.id);
            let t = c.trigger;
            out.put(&format!("{p}.trigger"), format!("{},{},{}", t[0], t[1], t[2]));
            out.put(&format!("{p}.damage"), c.damage);
            out.put(&format!("{p}.range"), c.range);
            out.put(&format!("{p}.mp_cost"), c.mp_cost);
            out.put(&format!("{p}.effect_frames"), c.effect_frames);
        }
    }
}
