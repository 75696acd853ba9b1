//! A 2.5D fighting-game reinforcement learning stack: a deterministic engine
//! with orthographic rendering, a gym-style environment, a rule-based
//! opponent, a hand-differentiated recurrent actor-critic network, an
//! asynchronous advantage actor-critic trainer and an evaluation harness.

// negated float comparisons reject NaN in config validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod a3c;
pub mod config;
pub mod env;
pub mod eval;
pub mod nn;
pub mod opponent;
pub mod render;
pub mod run;
pub mod sim;

pub use a3c::{train, A3cError, Schedule, TrainerConfig};
pub use config::{ConfigError, FlatConfig};
pub use env::{Env, EnvConfig, EnvError, Observation, Setting};
pub use eval::{run_episode, winning_rate, EpisodeStats, EvalError, Policy};
pub use nn::{ArchConfig, Descriptor, NetworkParams, NnError};
pub use run::{RunConfig, RunManifest};
pub use sim::{ActionId, BasicAction, MatchConfig, Side, Vec3, Winner, WorldState};
