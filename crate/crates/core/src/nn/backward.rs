use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::descriptor::Descriptor;
use super::forward::{entropy, forward, LstmState, NetInput, StepCache};
use super::params::{init_params, Gradients, NetworkParams};
use super::tensor::{axpy, matvec_t, outer_acc};
use super::NnError;

/// Loss weights shared by the analytic and numeric paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub beta: f64,
    pub value_coef: f64,
}

/// `Σ_t [-ln π(a_t)·A_t - β·H(π_t) + c·(R_t - V_t)²]` from cached forward passes.
pub fn rollout_loss(caches: &[StepCache], actions: &[usize], advantages: &[f64], returns: &[f64], w: LossWeights) -> f64 {
    caches
        .iter()
        .enumerate()
        .map(|(t, c)| {
            let p = c.probs[actions[t]];
            -p.ln() * advantages[t] - w.beta * entropy(&c.probs) + w.value_coef * (returns[t] - c.value).powi(2)
        })
        .sum()
}

fn check_lengths(caches: usize, actions: usize, advantages: usize, returns: usize) -> Result<(), NnError> {
    if caches == 0 || caches != actions || caches != advantages || caches != returns {
        return Err(NnError::Usage(format!(
            "rollout length mismatch: {caches} caches, {actions} actions, {advantages} advantages, {returns} returns"
        )));
    }
    Ok(())
}

/// Gradient of [`rollout_loss`] with back-propagation through time over the
/// rollout. Advantages are constants; the state entering the first step is
/// treated as an input.
pub fn backward(
    params: &NetworkParams,
    caches: &[StepCache],
    actions: &[usize],
    advantages: &[f64],
    returns: &[f64],
    w: LossWeights,
) -> Result<Gradients, NnError> {
    check_lengths(caches.len(), actions.len(), advantages.len(), returns.len())?;
    let d = params.descriptor();
    let l = params.layout();
    let t = &params.tensors;
    let mut g = Gradients::zeros_like(params);
    let shapes = d.conv_shapes()?;
    let flat = d.flat_dim();
    let hw = d.state_width();
    let mut dh_next = vec![0.0; hw];
    let mut dc_next = vec![0.0; hw];

    for step in (0..caches.len()).rev() {
        let c = &caches[step];
        let a = actions[step];
        if a >= d.num_actions {
            return Err(NnError::Usage(format!("action index {a} out of range")));
        }
        let h = entropy(&c.probs);
        let adv = advantages[step];
        let dlogits: Vec<f64> = c
            .probs
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                let score = adv * (p - if j == a { 1.0 } else { 0.0 });
                let ent = if p > 0.0 { w.beta * p * (p.ln() + h) } else { 0.0 };
                score + ent
            })
            .collect();
        let dv = -2.0 * w.value_coef * (returns[step] - c.value);

        {
            let (pw, pb) = l.policy;
            let (dw, db) = two_mut(&mut g.tensors, pw, pb);
            outer_acc(dw, db, &dlogits, &c.head_in);
            let (vw, vb) = l.value;
            let (dw, db) = two_mut(&mut g.tensors, vw, vb);
            outer_acc(dw, db, &[dv], &c.head_in);
        }
        let mut dx = matvec_t(&t[l.policy.0], &dlogits);
        axpy(dv, t[l.value.0].data(), &mut dx);

        let mut dfc_h = match (l.lstm, c.lstm.as_ref()) {
            (Some((wx, wh, b)), Some(lc)) => {
                let mut dz = vec![0.0; 4 * hw];
                for j in 0..hw {
                    let dh = dx[j] + dh_next[j];
                    let (i, f, gg, o, tc) = (lc.i[j], lc.f[j], lc.g[j], lc.o[j], lc.tanh_c[j]);
                    let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
                    dz[j] = dc * gg * i * (1.0 - i);
                    dz[hw + j] = dc * lc.c_prev[j] * f * (1.0 - f);
                    dz[2 * hw + j] = dc * i * (1.0 - gg * gg);
                    dz[3 * hw + j] = dh * tc * o * (1.0 - o);
                    dc_next[j] = dc * f;
                }
                {
                    let (dwx, db) = two_mut(&mut g.tensors, wx, b);
                    outer_acc(dwx, db, &dz, &c.fc_h);
                }
                let dwh = g.tensors[wh].data_mut();
                for (r, &gr) in dz.iter().enumerate() {
                    if gr != 0.0 {
                        axpy(gr, &lc.h_prev, &mut dwh[r * hw..(r + 1) * hw]);
                    }
                }
                dh_next = matvec_t(&t[wh], &dz);
                matvec_t(&t[wx], &dz)
            }
            _ => dx,
        };

        mask_relu(&mut dfc_h, &c.fc_h);
        {
            let (fw, fb) = l.fc;
            let (dw, db) = two_mut(&mut g.tensors, fw, fb);
            outer_acc(dw, db, &dfc_h, &c.fc_in);
        }
        let dfc_in = matvec_t(&t[l.fc.0], &dfc_h);

        if let Some((iw, ib)) = l.info {
            let mut dinfo = dfc_in[flat..].to_vec();
            mask_relu(&mut dinfo, &c.info_h);
            let (dw, db) = two_mut(&mut g.tensors, iw, ib);
            outer_acc(dw, db, &dinfo, &c.info_in);
        }

        let mut dout = dfc_in[..flat].to_vec();
        for li in (0..d.convs.len()).rev() {
            let cc = &c.conv[li];
            mask_relu(&mut dout, &cc.out);
            let (filters, oh, ow) = shapes[li];
            let npos = oh * ow;
            let (wi, bi) = l.conv[li];
            let kk = t[wi].len() / filters;
            {
                let (dw, db) = two_mut(&mut g.tensors, wi, bi);
                let dwd = dw.data_mut();
                for o in 0..filters {
                    let go = &dout[o * npos..(o + 1) * npos];
                    let dwo = &mut dwd[o * kk..(o + 1) * kk];
                    let mut bsum = 0.0;
                    for (p, &gv) in go.iter().enumerate() {
                        if gv != 0.0 {
                            axpy(gv, &cc.patches[p * kk..(p + 1) * kk], dwo);
                            bsum += gv;
                        }
                    }
                    db.data_mut()[o] += bsum;
                }
            }
            if li == 0 {
                break;
            }
            let (pc, ph, pw) = shapes[li - 1];
            let spec = d.convs[li];
            let mut dprev = vec![0.0; pc * ph * pw];
            let mut dpatch = vec![0.0; kk];
            for oy in 0..oh {
                for ox in 0..ow {
                    let p = oy * ow + ox;
                    dpatch.iter_mut().for_each(|v| *v = 0.0);
                    let mut any = false;
                    for o in 0..filters {
                        let gv = dout[o * npos + p];
                        if gv != 0.0 {
                            axpy(gv, t[wi].row(o), &mut dpatch);
                            any = true;
                        }
                    }
                    if !any {
                        continue;
                    }
                    let k = spec.kernel;
                    let mut idx = 0;
                    for ch in 0..pc {
                        for ky in 0..k {
                            let base = ch * ph * pw + (oy * spec.stride + ky) * pw + ox * spec.stride;
                            for kx in 0..k {
                                dprev[base + kx] += dpatch[idx];
                                idx += 1;
                            }
                        }
                    }
                }
            }
            dout = dprev;
        }
    }
    Ok(g)
}

fn mask_relu(grad: &mut [f64], activated: &[f64]) {
    for (g, &a) in grad.iter_mut().zip(activated) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

fn two_mut<T>(v: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    assert!(a < b);
    let (lo, hi) = v.split_at_mut(b);
    (&mut lo[a], &mut hi[0])
}

/// Runs a rollout forward from `lstm0` and returns the caches.
pub fn forward_rollout(params: &NetworkParams, inputs: &[NetInput], lstm0: &LstmState) -> Result<Vec<StepCache>, NnError> {
    let mut state = lstm0.clone();
    let mut caches = Vec::with_capacity(inputs.len());
    for x in inputs {
        let out = forward(params, x, &state)?;
        state = out.new_lstm_state;
        caches.push(out.cache);
    }
    Ok(caches)
}

/// Worst relative error `|a - n| / max(|a|, |n|, 1e-6)` between analytic gradients
/// and central differences (step 1e-5) over every parameter, on random inputs.
pub fn gradient_check(descriptor: &Descriptor, seed: u64, rollout_len: usize) -> Result<f64, NnError> {
    let mut params = init_params(descriptor, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6772_6164);
    // Non-zero biases so every bias path is exercised away from its initial value.
    let bias_slots: Vec<usize> = (0..params.tensors.len())
        .filter(|&i| params.layout().names[i].ends_with(".b"))
        .collect();
    for i in bias_slots {
        for v in params.tensors[i].data_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
    }
    let d = params.descriptor().clone();
    let inputs: Vec<NetInput> = (0..rollout_len)
        .map(|_| NetInput {
            frames: (0..d.frame_len()).map(|_| rng.random::<f64>()).collect(),
            info: (0..if d.use_info { d.info_dim } else { 0 }).map(|_| rng.random::<f64>()).collect(),
        })
        .collect();
    let sw = d.state_width();
    let lstm0 = LstmState {
        hidden: (0..sw).map(|_| rng.random_range(-0.5..0.5)).collect(),
        cell: (0..sw).map(|_| rng.random_range(-0.5..0.5)).collect(),
    };
    let actions: Vec<usize> = (0..rollout_len).map(|_| rng.random_range(0..d.num_actions)).collect();
    let advantages: Vec<f64> = (0..rollout_len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let returns: Vec<f64> = (0..rollout_len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w = LossWeights {
        beta: 0.05,
        value_coef: 0.5,
    };

    let caches = forward_rollout(&params, &inputs, &lstm0)?;
    let grads = backward(&params, &caches, &actions, &advantages, &returns, w)?;
    let loss_at = |p: &NetworkParams| -> Result<f64, NnError> {
        let c = forward_rollout(p, &inputs, &lstm0)?;
        Ok(rollout_loss(&c, &actions, &advantages, &returns, w))
    };

    const STEP: f64 = 1e-5;
    let mut worst = 0.0f64;
    for ti in 0..params.tensors.len() {
        for k in 0..params.tensors[ti].len() {
            let orig = params.tensors[ti].data()[k];
            params.tensors[ti].data_mut()[k] = orig + STEP;
            let up = loss_at(&params)?;
            params.tensors[ti].data_mut()[k] = orig - STEP;
            let down = loss_at(&params)?;
            params.tensors[ti].data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let analytic = grads.tensors[ti].data()[k];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
