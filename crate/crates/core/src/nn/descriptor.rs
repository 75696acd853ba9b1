use std::fmt;

use super::NnError;
use crate::config::{parse_bool, ConfigError, FlatConfig, FlatSection, FlatWriter};
use crate::env::EnvConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvSpec {
    pub const fn new(filters: usize, kernel: usize, stride: usize) -> Self {
        ConvSpec { filters, kernel, stride }
    }
}

fn format_convs(convs: &[ConvSpec]) -> String {
    convs
        .iter()
        .map(|c| format!("{}x{}/{}", c.filters, c.kernel, c.stride))
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_convs(s: &str) -> Result<Vec<ConvSpec>, String> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        let bad = || format!("`{part}` is not of the form FILTERSxKERNEL/STRIDE");
        let (f, rest) = part.split_once('x').ok_or_else(bad)?;
        let (k, st) = rest.split_once('/').ok_or_else(bad)?;
        let n = |v: &str| v.trim().parse::<usize>().map_err(|_| bad());
        out.push(ConvSpec::new(n(f)?, n(k)?, n(st)?));
    }
    if out.is_empty() {
        return Err("at least one conv layer is required".into());
    }
    Ok(out)
}

/// Complete architecture description; parameter shapes are a pure function of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Descriptor {
    pub in_channels: usize,
    pub in_height: usize,
    pub in_width: usize,
    pub convs: Vec<ConvSpec>,
    pub info_dim: usize,
    pub info_width: usize,
    pub dense_width: usize,
    pub lstm_width: usize,
    pub num_actions: usize,
    pub use_lstm: bool,
    pub use_info: bool,
}

impl Descriptor {
    /// Small network for gradient checks: 8x8 frames, LSTM width 8.
    pub fn mini(use_lstm: bool, use_info: bool) -> Self {
        Descriptor {
            in_channels: 4,
            in_height: 8,
            in_width: 8,
            convs: vec![ConvSpec::new(3, 4, 2), ConvSpec::new(4, 2, 1), ConvSpec::new(3, 2, 1)],
            info_dim: 6,
            info_width: 5,
            dense_width: 7,
            lstm_width: 8,
            num_actions: 5,
            use_lstm,
            use_info,
        }
    }

    pub fn for_env(env: &EnvConfig, arch: &ArchConfig) -> Self {
        Descriptor {
            in_channels: crate::render::FrameStack::DEPTH,
            in_height: env.render.height,
            in_width: env.render.width,
            convs: arch.convs.clone(),
            info_dim: env.info_dim(),
            info_width: arch.info_width,
            dense_width: arch.dense_width,
            lstm_width: arch.lstm_width,
            num_actions: env.num_actions(),
            use_lstm: arch.use_lstm,
            use_info: arch.use_info,
        }
    }

    /// `(channels, height, width)` after each conv layer.
    pub fn conv_shapes(&self) -> Result<Vec<(usize, usize, usize)>, NnError> {
        let (mut h, mut w) = (self.in_height, self.in_width);
        let mut out = Vec::with_capacity(self.convs.len());
        for (i, cv) in self.convs.iter().enumerate() {
            if cv.filters == 0 || cv.kernel == 0 || cv.stride == 0 {
                return Err(NnError::Config(format!("conv layer {} has a zero dimension", i + 1)));
            }
            if cv.kernel > h || cv.kernel > w {
                return Err(NnError::Config(format!(
                    "conv layer {}: kernel {} exceeds input {h}x{w}",
                    i + 1,
                    cv.kernel
                )));
            }
            h = (h - cv.kernel) / cv.stride + 1;
            w = (w - cv.kernel) / cv.stride + 1;
            out.push((cv.filters, h, w));
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.in_channels == 0 || self.in_height == 0 || self.in_width == 0 {
            return Err(NnError::Config("input dimensions must be positive".into()));
        }
        if self.convs.is_empty() {
            return Err(NnError::Config("at least one conv layer is required".into()));
        }
        self.conv_shapes()?;
        if self.dense_width == 0 || self.num_actions == 0 {
            return Err(NnError::Config("dense width and action count must be positive".into()));
        }
        if self.use_info && (self.info_dim == 0 || self.info_width == 0) {
            return Err(NnError::Config("info encoder needs positive input and width".into()));
        }
        if self.use_lstm && self.lstm_width == 0 {
            return Err(NnError::Config("lstm width must be positive".into()));
        }
        Ok(())
    }

    pub fn frame_len(&self) -> usize {
        self.in_channels * self.in_height * self.in_width
    }

    /// Flattened conv output size.
    pub fn flat_dim(&self) -> usize {
        let shapes = self.conv_shapes().expect("validated descriptor");
        let &(c, h, w) = shapes.last().unwrap();
        c * h * w
    }

    pub fn fc_input(&self) -> usize {
        self.flat_dim() + if self.use_info { self.info_width } else { 0 }
    }

    /// Width of the features feeding both heads.
    pub fn head_input(&self) -> usize {
        if self.use_lstm {
            self.lstm_width
        } else {
            self.dense_width
        }
    }

    /// Width of the recurrent state (0 without LSTM).
    pub fn state_width(&self) -> usize {
        if self.use_lstm {
            self.lstm_width
        } else {
            0
        }
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "in {}x{}x{} conv [{}] info {}",
            self.in_channels,
            self.in_height,
            self.in_width,
            format_convs(&self.convs),
            if self.use_info {
                format!("{}->{}", self.info_dim, self.info_width)
            } else {
                "off".into()
            }
        )?;
        write!(f, " fc {} lstm ", self.dense_width)?;
        if self.use_lstm {
            write!(f, "{}", self.lstm_width)?;
        } else {
            f.write_str("off")?;
        }
        write!(f, " actions {}", self.num_actions)
    }
}

/// Slot of each tensor in the flat parameter list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub conv: Vec<(usize, usize)>,
    pub info: Option<(usize, usize)>,
    pub fc: (usize, usize),
    /// `(wx, wh, b)`; gate rows ordered input, forget, candidate, output.
    pub lstm: Option<(usize, usize, usize)>,
    pub policy: (usize, usize),
    pub value: (usize, usize),
    pub names: Vec<String>,
    pub shapes: Vec<Vec<usize>>,
}

impl Layout {
    pub fn new(d: &Descriptor) -> Result<Self, NnError> {
        d.validate()?;
        let mut names = Vec::new();
        let mut shapes = Vec::new();
        let mut push = |name: String, shape: Vec<usize>| {
            names.push(name);
            shapes.push(shape);
            names.len() - 1
        };
        let mut conv = Vec::new();
        let mut cin = d.in_channels;
        for (i, cv) in d.convs.iter().enumerate() {
            let w = push(format!("conv{}.w", i + 1), vec![cv.filters, cin, cv.kernel, cv.kernel]);
            let b = push(format!("conv{}.b", i + 1), vec![cv.filters]);
            conv.push((w, b));
            cin = cv.filters;
        }
        let info = d.use_info.then(|| {
            let w = push("info.w".into(), vec![d.info_width, d.info_dim]);
            let b = push("info.b".into(), vec![d.info_width]);
            (w, b)
        });
        let fc_w = push("fc.w".into(), vec![d.dense_width, d.fc_input()]);
        let fc_b = push("fc.b".into(), vec![d.dense_width]);
        let lstm = d.use_lstm.then(|| {
            let h = d.lstm_width;
            let wx = push("lstm.wx".into(), vec![4 * h, d.dense_width]);
            let wh = push("lstm.wh".into(), vec![4 * h, h]);
            let b = push("lstm.b".into(), vec![4 * h]);
            (wx, wh, b)
        });
        let hin = d.head_input();
        let pw = push("policy.w".into(), vec![d.num_actions, hin]);
        let pb = push("policy.b".into(), vec![d.num_actions]);
        let vw = push("value.w".into(), vec![1, hin]);
        let vb = push("value.b".into(), vec![1]);
        Ok(Layout {
            conv,
            info,
            fc: (fc_w, fc_b),
            lstm,
            policy: (pw, pb),
            value: (vw, vb),
            names,
            shapes,
        })
    }

    pub fn param_count(&self) -> usize {
        self.shapes.iter().map(|s| s.iter().product::<usize>()).sum()
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }
}

/// Architecture keys under `nn.`; input and output sizes come from the environment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchConfig {
    pub use_lstm: bool,
    pub use_info: bool,
    pub convs: Vec<ConvSpec>,
    pub info_width: usize,
    pub dense_width: usize,
    pub lstm_width: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            use_lstm: true,
            use_info: true,
            convs: vec![ConvSpec::new(16, 8, 4), ConvSpec::new(32, 4, 2), ConvSpec::new(32, 3, 1)],
            info_width: 64,
            dense_width: 256,
            lstm_width: 256,
        }
    }
}

impl FlatSection for ArchConfig {
    fn read_section(&mut self, cfg: &mut FlatConfig) -> Result<(), ConfigError> {
        cfg.read_with("nn.use_lstm", &mut self.use_lstm, parse_bool)?;
        cfg.read_with("nn.use_info", &mut self.use_info, parse_bool)?;
        cfg.read_with("nn.conv", &mut self.convs, parse_convs)?;
        cfg.read("nn.info_width", &mut self.info_width)?;
        cfg.read("nn.dense_width", &mut self.dense_width)?;
        cfg.read("nn.lstm_width", &mut self.lstm_width)?;
        Ok(())
    }

    fn write_section(&self, out: &mut FlatWriter) {
        out.put("nn.use_lstm", self.use_lstm);
        out.put("nn.use_info", self.use_info);
        out.put("nn.conv", format_convs(&self.convs));
        out.put("nn.info_width", self.info_width);
        out.put("nn.dense_width", self.dense_width);
        out.put("nn.lstm_width", self.lstm_width);
    }
}
