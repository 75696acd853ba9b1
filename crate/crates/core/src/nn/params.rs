use std::io::{self, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::descriptor::{ConvSpec, Descriptor, Layout};
use super::tensor::Tensor;
use super::NnError;

/// Network weights θ with their architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    descriptor: Descriptor,
    layout: Layout,
    pub tensors: Vec<Tensor>,
}

/// Weights are drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
pub fn init_params(descriptor: &Descriptor, seed: u64) -> Result<NetworkParams, NnError> {
    let mut p = NetworkParams::zeros(descriptor)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<usize> = p
        .layout
        .names
        .iter()
        .enumerate()
        .filter(|(_, n)| n.ends_with(".w") || n.ends_with(".wx") || n.ends_with(".wh"))
        .map(|(i, _)| i)
        .collect();
    for i in weights {
        let shape = p.tensors[i].shape().to_vec();
        let fan_in: usize = shape[1..].iter().product();
        let bound = 1.0 / (fan_in as f64).sqrt();
        for v in p.tensors[i].data_mut() {
            *v = rng.random_range(-bound..bound);
        }
    }
    if let Some((_, _, b)) = p.layout.lstm {
        let h = descriptor.lstm_width;
        p.tensors[b].data_mut()[h..2 * h].fill(1.0);
    }
    Ok(p)
}

impl NetworkParams {
    pub fn zeros(descriptor: &Descriptor) -> Result<Self, NnError> {
        let layout = Layout::new(descriptor)?;
        let tensors = layout.shapes.iter().map(|s| Tensor::zeros(s)).collect();
        Ok(NetworkParams {
            descriptor: descriptor.clone(),
            layout,
            tensors,
        })
    }

    pub fn descriptor(&self) -> &Descriptor {
        &self.descriptor
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn param_count(&self) -> usize {
        self.layout.param_count()
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.layout.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.layout.names.iter().position(|n| n == name).map(|i| &mut self.tensors[i])
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// Order-sensitive 64-bit FNV-1a over every value's bits.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for t in &self.tensors {
            for v in t.data() {
                for byte in v.to_bits().to_le_bytes() {
                    h ^= byte as u64;
                    h = h.wrapping_mul(0x0100_0000_01b3);
                }
            }
        }
        h
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        let io_err = |source| NnError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut f = io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
        f.write_all(&self.to_bytes()).map_err(io_err)?;
        f.flush().map_err(io_err)
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|source| NnError::Io {
                path: path.display().to_string(),
                source,
            })?;
        Self::from_bytes(&bytes)
    }

    /// Layout: magic, version, descriptor block, then each tensor as
    /// `ndim, dims..., values` with little-endian `u32` headers and `f64` values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.param_count() * 8);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        put_u32(&mut out, CHECKPOINT_VERSION);
        let d = &self.descriptor;
        for v in [d.in_channels, d.in_height, d.in_width, d.convs.len()] {
            put_u32(&mut out, v as u32);
        }
        for c in &d.convs {
            for v in [c.filters, c.kernel, c.stride] {
                put_u32(&mut out, v as u32);
            }
        }
        for v in [d.info_dim, d.info_width, d.dense_width, d.lstm_width, d.num_actions] {
            put_u32(&mut out, v as u32);
        }
        out.push(d.use_lstm as u8);
        out.push(d.use_info as u8);
        put_u32(&mut out, self.tensors.len() as u32);
        for t in &self.tensors {
            put_u32(&mut out, t.shape().len() as u32);
            for &s in t.shape() {
                put_u32(&mut out, s as u32);
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NnError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(CHECKPOINT_MAGIC.len())? != CHECKPOINT_MAGIC {
            return Err(NnError::Format("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(NnError::Format(format!("unsupported checkpoint version {version}")));
        }
        let in_channels = r.usize()?;
        let in_height = r.usize()?;
        let in_width = r.usize()?;
        let n_convs = r.usize()?;
        if n_convs > 64 {
            return Err(NnError::Format(format!("implausible conv count {n_convs}")));
        }
        let mut convs = Vec::with_capacity(n_convs);
        for _ in 0..n_convs {
            convs.push(ConvSpec::new(r.usize()?, r.usize()?, r.usize()?));
        }
        let descriptor = Descriptor {
            in_channels,
            in_height,
            in_width,
            convs,
            info_dim: r.usize()?,
            info_width: r.usize()?,
            dense_width: r.usize()?,
            lstm_width: r.usize()?,
            num_actions: r.usize()?,
            use_lstm: r.flag()?,
            use_info: r.flag()?,
        };
        let mut params = NetworkParams::zeros(&descriptor)
            .map_err(|e| NnError::Format(format!("checkpoint descriptor invalid: {e}")))?;
        let count = r.usize()?;
        if count != params.tensors.len() {
            return Err(NnError::Format(format!(
                "expected {} tensors, found {count}",
                params.tensors.len()
            )));
        }
        for (i, t) in params.tensors.iter_mut().enumerate() {
            let ndim = r.usize()?;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim.min(8) {
                shape.push(r.usize()?);
            }
            if shape != t.shape() {
                return Err(NnError::Format(format!(
                    "tensor {} has shape {shape:?}, descriptor requires {:?}",
                    params.layout.names[i],
                    t.shape()
                )));
            }
            for v in t.data_mut() {
                *v = f64::from_le_bytes(r.take(8)?.try_into().unwrap());
            }
        }
        if r.pos != bytes.len() {
            return Err(NnError::Format("trailing bytes after last tensor".into()));
        }
        Ok(params)
    }
}

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"A25CKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(NnError::Format("checkpoint truncated".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize, NnError> {
        self.u32().map(|v| v as usize)
    }

    fn flag(&mut self) -> Result<bool, NnError> {
        match self.take(1)?[0] {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(NnError::Format(format!("invalid flag byte {b}"))),
        }
    }
}

/// Gradient tensors mirroring a parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Gradients {
            tensors: params.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect(),
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors.iter().map(Tensor::sum_squares).sum::<f64>().sqrt()
    }

    /// Rescales to `max_norm` if the global norm exceeds it; returns the norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            let s = max_norm / norm;
            for t in &mut self.tensors {
                t.data_mut().iter_mut().for_each(|v| *v *= s);
            }
        }
        norm
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    pub fn matches(&self, params: &NetworkParams) -> bool {
        self.tensors.len() == params.tensors.len()
            && self.tensors.iter().zip(&params.tensors).all(|(g, p)| g.shape() == p.shape())
    }
}
