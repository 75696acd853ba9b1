//! Benchmark fixtures.

use arena25::nn::{init_params, NetInput};
use arena25::{ActionId, ArchConfig, Descriptor, Env, EnvConfig, NetworkParams, Observation};

/// Default advanced-setting environment after `steps` idle steps from seed 0.
pub fn warmed_env(steps: usize) -> (Env, Observation) {
    let mut env = Env::new(EnvConfig::default()).expect("default config is valid");
    let mut obs = env.reset(0);
    for _ in 0..steps {
        obs = env.step(ActionId::IDLE).expect("episode outlasts the warm-up").observation;
    }
    (env, obs)
}

/// Full-size network for the default environment.
pub fn default_params(use_lstm: bool, use_info: bool) -> NetworkParams {
    let arch = ArchConfig {
        use_lstm,
        use_info,
        ..ArchConfig::default()
    };
    init_params(&Descriptor::for_env(&EnvConfig::default(), &arch), 0).expect("default descriptor is valid")
}

/// `n` consecutive observations of an idle episode as network inputs.
pub fn idle_inputs(n: usize) -> Vec<NetInput> {
    let mut env = Env::new(EnvConfig::default()).expect("default config is valid");
    let mut obs = env.reset(1);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(NetInput::from(&obs));
        obs = env.step(ActionId::IDLE).expect("episode outlasts the inputs").observation;
    }
    out
}
