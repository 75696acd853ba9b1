use rand::{Rng, RngCore};

use super::params::NetworkParams;
use super::tensor::{dot, matvec, Tensor};
use super::NnError;
use crate::env::Observation;

/// Recurrent hidden and cell vectors; empty for networks without LSTM.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

impl LstmState {
    pub fn zeros(width: usize) -> Self {
        LstmState {
            hidden: vec![0.0; width],
            cell: vec![0.0; width],
        }
    }

    pub fn for_params(params: &NetworkParams) -> Self {
        Self::zeros(params.descriptor().state_width())
    }
}

/// Network input: channel-major frame stack and the info vector.
#[derive(Debug, Clone, PartialEq)]
pub struct NetInput {
    pub frames: Vec<f64>,
    pub info: Vec<f64>,
}

impl From<&Observation> for NetInput {
    fn from(obs: &Observation) -> Self {
        NetInput {
            frames: obs.frames.to_tensor_data(),
            info: obs.info.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvCache {
    /// Receptive-field patches, one row of `C*k*k` values per output position.
    pub patches: Vec<f64>,
    /// Rectified output `[filters, positions]`.
    pub out: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCache {
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

/// Activations retained for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCache {
    pub conv: Vec<ConvCache>,
    pub info_in: Vec<f64>,
    pub info_h: Vec<f64>,
    pub fc_in: Vec<f64>,
    pub fc_h: Vec<f64>,
    pub lstm: Option<LstmCache>,
    pub head_in: Vec<f64>,
    pub probs: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub logits: Vec<f64>,
    pub value: f64,
    pub new_lstm_state: LstmState,
    pub cache: StepCache,
}

impl ForwardOutput {
    pub fn probs(&self) -> &[f64] {
        &self.cache.probs
    }
}

pub fn relu_in_place(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Gathers `[positions, C*k*k]` patches from a `[C, H, W]` input.
pub(crate) fn im2col(input: &[f64], c: usize, h: usize, w: usize, k: usize, s: usize) -> (Vec<f64>, usize, usize) {
    let oh = (h - k) / s + 1;
    let ow = (w - k) / s + 1;
    let kk = c * k * k;
    let mut out = vec![0.0; oh * ow * kk];
    for oy in 0..oh {
        for ox in 0..ow {
            let row = &mut out[(oy * ow + ox) * kk..(oy * ow + ox + 1) * kk];
            let mut idx = 0;
            for ch in 0..c {
                let plane = &input[ch * h * w..(ch + 1) * h * w];
                for ky in 0..k {
                    let start = (oy * s + ky) * w + ox * s;
                    row[idx..idx + k].copy_from_slice(&plane[start..start + k]);
                    idx += k;
                }
            }
        }
    }
    (out, oh, ow)
}

fn conv_forward(patches: &[f64], npos: usize, w: &Tensor, b: &Tensor) -> Vec<f64> {
    let filters = w.shape()[0];
    let kk = w.len() / filters;
    let mut out = vec![0.0; filters * npos];
    for o in 0..filters {
        let wr = w.row(o);
        let bias = b.data()[o];
        let dst = &mut out[o * npos..(o + 1) * npos];
        for (p, d) in dst.iter_mut().enumerate() {
            *d = (dot(wr, &patches[p * kk..(p + 1) * kk]) + bias).max(0.0);
        }
    }
    out
}

/// One network step. Without LSTM the recurrent state passes through unchanged.
pub fn forward(params: &NetworkParams, input: &NetInput, lstm_in: &LstmState) -> Result<ForwardOutput, NnError> {
    let d = params.descriptor();
    let l = params.layout();
    let t = &params.tensors;
    if input.frames.len() != d.frame_len() {
        return Err(NnError::Shape(format!(
            "frame input has {} values, descriptor expects {}",
            input.frames.len(),
            d.frame_len()
        )));
    }
    if d.use_info && input.info.len() != d.info_dim {
        return Err(NnError::Shape(format!(
            "info input has {} values, descriptor expects {}",
            input.info.len(),
            d.info_dim
        )));
    }
    let sw = d.state_width();
    if lstm_in.hidden.len() != sw || lstm_in.cell.len() != sw {
        return Err(NnError::Shape(format!(
            "recurrent state width {}/{}, descriptor expects {sw}",
            lstm_in.hidden.len(),
            lstm_in.cell.len()
        )));
    }

    let mut conv: Vec<ConvCache> = Vec::with_capacity(d.convs.len());
    let (mut c, mut h, mut w) = (d.in_channels, d.in_height, d.in_width);
    for (li, spec) in d.convs.iter().enumerate() {
        let (patches, oh, ow) = {
            let src: &[f64] = if li == 0 { &input.frames } else { &conv[li - 1].out };
            im2col(src, c, h, w, spec.kernel, spec.stride)
        };
        let (wi, bi) = l.conv[li];
        let out = conv_forward(&patches, oh * ow, &t[wi], &t[bi]);
        conv.push(ConvCache { patches, out });
        c = spec.filters;
        h = oh;
        w = ow;
    }

    let mut fc_in = conv.last().unwrap().out.clone();
    let (info_in, info_h) = match l.info {
        Some((wi, bi)) => {
            let mut hdn = matvec(&t[wi], &t[bi], &input.info);
            relu_in_place(&mut hdn);
            fc_in.extend_from_slice(&hdn);
            (input.info.clone(), hdn)
        }
        None => (Vec::new(), Vec::new()),
    };
    let mut fc_h = matvec(&t[l.fc.0], &t[l.fc.1], &fc_in);
    relu_in_place(&mut fc_h);

    let (head_in, lstm, new_state) = match l.lstm {
        Some((wx, wh, b)) => {
            let hw = d.lstm_width;
            let zx = matvec(&t[wx], &t[b], &fc_h);
            let mut z = zx;
            for (r, zr) in z.iter_mut().enumerate() {
                *zr += dot(t[wh].row(r), &lstm_in.hidden);
            }
            let i: Vec<f64> = z[..hw].iter().map(|&v| sigmoid(v)).collect();
            let f: Vec<f64> = z[hw..2 * hw].iter().map(|&v| sigmoid(v)).collect();
            let g: Vec<f64> = z[2 * hw..3 * hw].iter().map(|v| v.tanh()).collect();
            let o: Vec<f64> = z[3 * hw..].iter().map(|&v| sigmoid(v)).collect();
            let cell: Vec<f64> = (0..hw).map(|j| f[j] * lstm_in.cell[j] + i[j] * g[j]).collect();
            let tanh_c: Vec<f64> = cell.iter().map(|v| v.tanh()).collect();
            let hidden: Vec<f64> = (0..hw).map(|j| o[j] * tanh_c[j]).collect();
            let cache = LstmCache {
                h_prev: lstm_in.hidden.clone(),
                c_prev: lstm_in.cell.clone(),
                i,
                f,
                g,
                o,
                tanh_c,
            };
            let state = LstmState {
                hidden: hidden.clone(),
                cell,
            };
            (hidden, Some(cache), state)
        }
        None => (fc_h.clone(), None, lstm_in.clone()),
    };

    let logits = matvec(&t[l.policy.0], &t[l.policy.1], &head_in);
    let value = dot(t[l.value.0].data(), &head_in) + t[l.value.1].data()[0];
    let probs = softmax(&logits);
    Ok(ForwardOutput {
        logits,
        value,
        new_lstm_state: new_state,
        cache: StepCache {
            conv,
            info_in,
            info_h,
            fc_in,
            fc_h,
            lstm,
            head_in,
            probs,
            value,
        },
    })
}

/// Conv feature maps `(channels, height, width, values)` after each rectified layer.
pub fn conv_activations(params: &NetworkParams, input: &NetInput) -> Result<Vec<(usize, usize, usize, Vec<f64>)>, NnError> {
    let out = forward(params, input, &LstmState::for_params(params))?;
    let shapes = params.descriptor().conv_shapes()?;
    Ok(out
        .cache
        .conv
        .into_iter()
        .zip(shapes)
        .map(|(c, (ch, h, w))| (ch, h, w, c.out))
        .collect())
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `-Σ p ln p` with `0 ln 0 = 0`.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
}

/// Inverse-CDF draw.
pub fn sample_action(probs: &[f64], rng: &mut impl RngCore) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Argmax with ties going to the lowest index.
pub fn greedy_action(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}
