//! Orthographic rasteriser for agent observations.
//!
//! Screen rows depend on `z + y` only, so a character standing deeper in the
//! arena and one jumping closer to the camera land on the same pixels.
//! Characters are flat intensity rectangles: the agent at 1.0, the opponent at
//! 0.6, live hitboxes at 0.8, background 0.

use std::io::{self, Write};
use std::path::Path;

use crate::sim::{live_hitbox, CharacterState, MatchConfig, Vec3, WorldState};

pub const AGENT_INTENSITY: f32 = 1.0;
pub const OPPONENT_INTENSITY: f32 = 0.6;
pub const EFFECT_INTENSITY: f32 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderConfig {
    pub width: usize,
    pub height: usize,
    pub margin: usize,
    pub sprite_width: usize,
    pub sprite_height: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            width: 80,
            height: 80,
            margin: 4,
            sprite_width: 4,
            sprite_height: 8,
        }
    }
}

/// Fixed scale/offset constants mapping world units to pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub su: f64,
    pub sv: f64,
    pub v0: f64,
}

impl Projection {
    /// Baseline sits `margin` pixels above the bottom edge; the top of a sprite at
    /// full depth and full jump height sits `margin` pixels below the top edge.
    pub fn new(arena: &MatchConfig, frame: &RenderConfig) -> Self {
        let v0 = (frame.height - 1 - frame.margin) as f64;
        let top = (frame.margin + frame.sprite_height - 1) as f64;
        let span = arena.arena_depth + arena.jump_apex();
        Projection {
            su: (frame.width - 1) as f64 / arena.arena_width,
            sv: (v0 - top) / span,
            v0,
        }
    }

    /// Pixel column and row of a world position (the sprite's bottom-centre anchor).
    pub fn project(&self, pos: Vec3) -> (i64, i64) {
        let u = (pos.x * self.su).round() as i64;
        let v = (self.v0 - (pos.z + pos.y) * self.sv).round() as i64;
        (u, v)
    }
}

pub fn project(pos: Vec3, arena: &MatchConfig, frame: &RenderConfig) -> (i64, i64) {
    Projection::new(arena, frame).project(pos)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrayscaleFrame {
    pub width: usize,
    pub height: usize,
    /// Row-major intensities in `[0, 1]`.
    pub pixels: Vec<f32>,
}

impl GrayscaleFrame {
    pub fn blank(width: usize, height: usize) -> Self {
        GrayscaleFrame {
            width,
            height,
            pixels: vec![0.0; width * height],
        }
    }

    pub fn get(&self, u: usize, v: usize) -> f32 {
        self.pixels[v * self.width + u]
    }

    /// Fills the inclusive rectangle, clipped to the frame.
    fn fill(&mut self, u0: i64, v0: i64, u1: i64, v1: i64, value: f32) {
        let (w, h) = (self.width as i64, self.height as i64);
        let (ua, ub) = (u0.min(u1).max(0), u0.max(u1).min(w - 1));
        let (va, vb) = (v0.min(v1).max(0), v0.max(v1).min(h - 1));
        for v in va..=vb {
            for u in ua..=ub {
                self.pixels[(v * w + u) as usize] = value;
            }
        }
    }

    /// Writes a plain (P2) portable graymap with maxval 255.
    pub fn write_pgm(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "P2")?;
        writeln!(out, "{} {}", self.width, self.height)?;
        writeln!(out, "255")?;
        for row in self.pixels.chunks(self.width) {
            let line: Vec<String> = row
                .iter()
                .map(|p| ((p.clamp(0.0, 1.0) * 255.0).round() as u8).to_string())
                .collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn save_pgm(&self, path: &Path) -> io::Result<()> {
        let mut f = io::BufWriter::new(std::fs::File::create(path)?);
        self.write_pgm(&mut f)?;
        f.flush()
    }
}

fn draw_effect(frame: &mut GrayscaleFrame, proj: &Projection, cfg: &MatchConfig, sprite_h: i64, ch: &CharacterState) {
    let Some(active) = ch.active_action.as_ref() else { return };
    let Some((reach, _)) = live_hitbox(cfg, active) else { return };
    let (u, v) = proj.project(ch.pos);
    let tip = ch.pos.x + ch.facing.sign() * reach;
    let u_tip = (tip * proj.su).round() as i64;
    let mid = v - sprite_h / 2;
    frame.fill(u, mid - 1, u_tip, mid, EFFECT_INTENSITY);
}

fn draw_sprite(frame: &mut GrayscaleFrame, proj: &Projection, rc: &RenderConfig, pos: Vec3, value: f32) {
    let (u, v) = proj.project(pos);
    let left = u - (rc.sprite_width / 2) as i64;
    frame.fill(
        left,
        v - rc.sprite_height as i64 + 1,
        left + rc.sprite_width as i64 - 1,
        v,
        value,
    );
}

/// Pure function of the world state.
pub fn render_frame(state: &WorldState, rc: &RenderConfig) -> GrayscaleFrame {
    let proj = Projection::new(&state.config, rc);
    let mut frame = GrayscaleFrame::blank(rc.width, rc.height);
    let sh = rc.sprite_height as i64;
    draw_effect(&mut frame, &proj, &state.config, sh, &state.opponent);
    draw_effect(&mut frame, &proj, &state.config, sh, &state.agent);
    draw_sprite(&mut frame, &proj, rc, state.opponent.pos, OPPONENT_INTENSITY);
    draw_sprite(&mut frame, &proj, rc, state.agent.pos, AGENT_INTENSITY);
    frame
}

/// The four most recent frames, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    frames: [GrayscaleFrame; 4],
}

impl FrameStack {
    pub const DEPTH: usize = 4;

    /// Stack holding four copies of `frame`.
    pub fn filled(frame: GrayscaleFrame) -> Self {
        FrameStack {
            frames: [frame.clone(), frame.clone(), frame.clone(), frame],
        }
    }

    pub fn from_frames(frames: [GrayscaleFrame; 4]) -> Self {
        FrameStack { frames }
    }

    /// Evicts the oldest frame and appends `frame` as the newest.
    pub fn push_frame(&mut self, frame: GrayscaleFrame) {
        self.frames.rotate_left(1);
        self.frames[3] = frame;
    }

    pub fn frames(&self) -> &[GrayscaleFrame; 4] {
        &self.frames
    }

    pub fn newest(&self) -> &GrayscaleFrame {
        &self.frames[3]
    }

    /// Channel-major copy `[4, height, width]` for the network.
    pub fn to_tensor_data(&self) -> Vec<f64> {
        self.frames
            .iter()
            .flat_map(|f| f.pixels.iter().map(|&p| p as f64))
            .collect()
    }
}
