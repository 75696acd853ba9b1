use rand::RngCore;

use super::{compute_advantages, compute_returns, A3cError, TrainerConfig};
use crate::env::{Env, Observation};
use crate::nn::{backward, forward, greedy_action, sample_action, Gradients, LstmState, NetInput, NetworkParams, StepCache};
use crate::sim::ActionId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionSelection {
    Sample,
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutStep {
    pub observation: Observation,
    pub lstm_before: LstmState,
    pub action: usize,
    pub reward: f64,
    pub value: f64,
}

/// Up to `t_max` consecutive steps under one parameter snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub steps: Vec<RolloutStep>,
    pub caches: Vec<StepCache>,
    /// `V` of the state after the last step, 0 when that state is terminal.
    pub bootstrap_value: f64,
    pub terminal: bool,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.value).collect()
    }

    pub fn actions(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.action).collect()
    }
}

/// Steps `env` from `observation` for up to `t_max` actions, threading the
/// recurrent state. Returns the rollout, the next observation and the next state.
pub fn collect_rollout(
    params: &NetworkParams,
    env: &mut Env,
    observation: Observation,
    lstm: LstmState,
    t_max: usize,
    selection: ActionSelection,
    rng: &mut impl RngCore,
) -> Result<(Rollout, Observation, LstmState), A3cError> {
    let mut steps = Vec::with_capacity(t_max);
    let mut caches = Vec::with_capacity(t_max);
    let mut obs = observation;
    let mut state = lstm;
    let mut terminal = false;
    while steps.len() < t_max {
        let out = forward(params, &NetInput::from(&obs), &state)?;
        let a = match selection {
            ActionSelection::Sample => sample_action(out.probs(), rng),
            ActionSelection::Greedy => greedy_action(out.probs()),
        };
        let action = ActionId::from_index(a).ok_or_else(|| A3cError::Usage(format!("no action with index {a}")))?;
        let result = env.step(action)?;
        steps.push(RolloutStep {
            observation: obs,
            lstm_before: state,
            action: a,
            reward: result.reward,
            value: out.value,
        });
        caches.push(out.cache);
        state = out.new_lstm_state;
        obs = result.observation;
        if result.done {
            terminal = true;
            break;
        }
    }
    let bootstrap_value = if terminal {
        0.0
    } else {
        forward(params, &NetInput::from(&obs), &state)?.value
    };
    Ok((
        Rollout {
            steps,
            caches,
            bootstrap_value,
            terminal,
        },
        obs,
        state,
    ))
}

/// Returns, advantages and the clipped loss gradient for one rollout.
pub fn rollout_gradients(params: &NetworkParams, rollout: &Rollout, cfg: &TrainerConfig) -> Result<Gradients, A3cError> {
    let returns = compute_returns(&rollout.rewards(), rollout.bootstrap_value, cfg.gamma);
    let advantages = compute_advantages(&returns, &rollout.values())?;
    let mut g = backward(
        params,
        &rollout.caches,
        &rollout.actions(),
        &advantages,
        &returns,
        cfg.loss_weights(),
    )?;
    g.clip_global_norm(cfg.grad_clip);
    Ok(g)
}
