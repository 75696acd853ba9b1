//! Deterministic fixed-timestep 2.5D fighting engine.
//!
//! Characters move on the `(x, z)` ground plane and jump along `y`. Each
//! frame: inputs are registered (presses only) and may complete a combo
//! trigger, actions are executed, bodies are integrated and clamped to the
//! arena, characters turn to face each other, then hitboxes are resolved
//! simultaneously for both sides.

mod config;
mod engine;
mod input;
mod types;

pub use config::MatchConfig;
pub use engine::{
    advance_frame, detect_combo, execute_action, in_hitbox, live_hitbox, match_result, new_match,
};
pub use input::InputScript;
pub use types::*;

#[cfg(test)]
mod tests;
