//! Fully connected autoencoder `w(x; θ) = g(f(x; θ))` and its checkpoint format.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{jet_activation, jet_affine, jet_seed, Activation, Jet2};
use crate::error::{Error, Result};

/// Affine map of physical coordinates onto `[-1, 1]` per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub center: [f64; 2],
    pub half_width: [f64; 2],
}

impl Default for InputScaling {
    fn default() -> Self {
        InputScaling { center: [0.0, 0.0], half_width: [1.0, 1.0] }
    }
}

impl InputScaling {
    pub fn from_bbox(min: [f64; 2], max: [f64; 2]) -> Self {
        InputScaling {
            center: [0.5 * (min[0] + max[0]), 0.5 * (min[1] + max[1])],
            half_width: [0.5 * (max[0] - min[0]), 0.5 * (max[1] - min[1])],
        }
    }

    #[inline]
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        [(p[0] - self.center[0]) / self.half_width[0], (p[1] - self.center[1]) / self.half_width[1]]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Encoder widths followed by their mirror (bottleneck not repeated).
    Autoencoder,
    /// Encoder widths used as plain hidden layers.
    Mlp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub encoder: Vec<usize>,
    /// Overrides the mirrored decoder when set.
    #[serde(default)]
    pub decoder: Option<Vec<usize>>,
    pub activation: Activation,
    #[serde(default = "default_layout")]
    pub layout: Layout,
    #[serde(default)]
    pub scaling: InputScaling,
}

fn default_layout() -> Layout {
    Layout::Autoencoder
}

pub const INPUT_DIM: usize = 2;
pub const OUTPUT_DIM: usize = 1;

impl NetworkConfig {
    pub fn autoencoder(encoder: &[usize], activation: Activation) -> Self {
        NetworkConfig {
            encoder: encoder.to_vec(),
            decoder: None,
            activation,
            layout: Layout::Autoencoder,
            scaling: InputScaling::default(),
        }
    }

    pub fn mlp(hidden: &[usize], activation: Activation) -> Self {
        NetworkConfig { layout: Layout::Mlp, ..Self::autoencoder(hidden, activation) }
    }

    pub fn with_scaling(mut self, scaling: InputScaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn decoder_widths(&self) -> Vec<usize> {
        if let Some(d) = &self.decoder {
            return d.clone();
        }
        match self.layout {
            Layout::Mlp => Vec::new(),
            Layout::Autoencoder => {
                let k = self.encoder.len().saturating_sub(1);
                self.encoder[..k].iter().rev().copied().collect()
            }
        }
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        let mut h = self.encoder.clone();
        h.extend(self.decoder_widths());
        h
    }

    /// `(fan_in, fan_out)` of every layer including the affine output layer.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![INPUT_DIM];
        dims.extend(self.hidden_widths());
        dims.push(OUTPUT_DIM);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder.is_empty() {
            return Err(Error::InvalidConfig("encoder needs at least one layer".into()));
        }
        if self.hidden_widths().contains(&0) {
            return Err(Error::InvalidConfig("layer widths must be >= 1".into()));
        }
        let h = self.scaling.half_width;
        if !(h[0] > 0.0 && h[1] > 0.0) {
            return Err(Error::InvalidConfig("input scaling half-widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    /// `(fan_out, fan_in)`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    layers: Vec<DenseLayer>,
}

impl NetworkParams {
    pub fn from_layers(layers: Vec<DenseLayer>) -> Self {
        NetworkParams { layers }
    }

    pub fn zeros(cfg: &NetworkConfig) -> Self {
        let layers = cfg
            .layer_shapes()
            .into_iter()
            .map(|(i, o)| DenseLayer { weight: Array2::zeros((o, i)), bias: Array1::zeros(o) })
            .collect();
        NetworkParams { layers }
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Start index of every layer in the flattened vector.
    pub fn offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.layers
            .iter()
            .map(|l| {
                let o = off;
                off += l.weight.len() + l.bias.len();
                o
            })
            .collect()
    }

    /// Row-major weights then bias, layer by layer.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        for l in &self.layers {
            v.extend(l.weight.iter());
            v.extend(l.bias.iter());
        }
        v
    }

    pub fn unflatten(cfg: &NetworkConfig, flat: &[f64]) -> Result<Self> {
        let mut p = Self::zeros(cfg);
        p.assign(flat)?;
        Ok(p)
    }

    pub fn assign(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.len() {
            return Err(Error::Dimension(format!(
                "flat vector has {} entries, network has {}",
                flat.len(),
                self.len()
            )));
        }
        let mut it = flat.iter();
        for l in &mut self.layers {
            for w in l.weight.iter_mut() {
                *w = *it.next().unwrap();
            }
            for b in l.bias.iter_mut() {
                *b = *it.next().unwrap();
            }
        }
        Ok(())
    }
}

/// Glorot-uniform weights and zero biases, reproducible from `seed`.
pub fn init_params(cfg: &NetworkConfig, seed: u64) -> NetworkParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = cfg
        .layer_shapes()
        .into_iter()
        .map(|(fan_in, fan_out)| {
            let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weight = Array2::from_shape_simple_fn((fan_out, fan_in), || rng.gen_range(-s..=s));
            DenseLayer { weight, bias: Array1::zeros(fan_out) }
        })
        .collect();
    NetworkParams { layers }
}

/// `tanh(πu/2)` with its first and second derivatives.
pub fn scaled_tanh(u: f64) -> (f64, f64, f64) {
    let [v, d1, d2, _] = Activation::ScaledTanh.derivatives(u);
    (v, d1, d2)
}

/// Plain scalar evaluation.
pub fn forward(params: &NetworkParams, cfg: &NetworkConfig, x: [f64; 2]) -> Result<f64> {
    if !(x[0].is_finite() && x[1].is_finite()) {
        return Err(Error::NonFinite("network input".into()));
    }
    let xs = cfg.scaling.apply(x);
    let mut z = xs.to_vec();
    let n = params.layers.len();
    for (l, layer) in params.layers.iter().enumerate() {
        let (rows, cols) = layer.weight.dim();
        if cols != z.len() {
            return Err(Error::Dimension(format!("layer {l} expects {cols} inputs")));
        }
        let mut out = Vec::with_capacity(rows);
        for i in 0..rows {
            let mut acc = 0.0;
            for (k, zk) in z.iter().enumerate() {
                acc += layer.weight[[i, k]] * zk;
            }
            acc += layer.bias[i];
            if !acc.is_finite() {
                return Err(Error::NonFinite(format!("layer {l} pre-activation")));
            }
            out.push(if l + 1 == n { acc } else { cfg.activation.value(acc) });
        }
        z = out;
    }
    Ok(z[0])
}

/// Output value with first and second spatial derivatives at `x`.
pub fn forward_jet(params: &NetworkParams, cfg: &NetworkConfig, x: [f64; 2]) -> Result<Jet2> {
    if !(x[0].is_finite() && x[1].is_finite()) {
        return Err(Error::NonFinite("network input".into()));
    }
    let sc = &cfg.scaling;
    let (jx, jy) = jet_seed(x[0], x[1]);
    let mut z = vec![
        (jx - Jet2::constant(sc.center[0])) * (1.0 / sc.half_width[0]),
        (jy - Jet2::constant(sc.center[1])) * (1.0 / sc.half_width[1]),
    ];
    // match the plain path's value bit-for-bit
    let xs = sc.apply(x);
    z[0].v = xs[0];
    z[1].v = xs[1];
    let n = params.layers.len();
    for (l, layer) in params.layers.iter().enumerate() {
        let a = jet_affine(layer.weight.view(), layer.bias.view(), &z)?;
        if l + 1 == n {
            return a[0].check_finite("network output");
        }
        z = a.into_iter().map(|u| jet_activation(u, cfg.activation)).collect::<Result<_>>()?;
    }
    unreachable!("network has an output layer")
}

const MAGIC: &[u8; 4] = b"PLNT";
const VERSION: u32 = 1;

/// Writes a checkpoint.
///
/// Layout, all integers and floats little-endian:
///
/// | bytes | content                                   |
/// |-------|-------------------------------------------|
/// | 4     | magic `PLNT`                              |
/// | 4     | format version (u32, currently 1)         |
/// | 1     | activation tag (0 tanh, 1 scaled tanh)    |
/// | 1     | layout tag (0 autoencoder, 1 mlp)         |
/// | 8     | seed (u64)                                |
/// | 32    | input scaling: center x, y; half x, y     |
/// | 4     | hidden layer count `k` (u32)              |
/// | 4·k   | hidden widths (u32 each)                  |
/// | 8     | parameter count `p` (u64)                 |
/// | 8·p   | flattened parameters (f64)                |
pub fn write_checkpoint<W: Write>(mut out: W, cfg: &NetworkConfig, params: &NetworkParams, seed: u64) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&[cfg.activation.tag(), layout_tag(cfg.layout)])?;
    out.write_all(&seed.to_le_bytes())?;
    for v in cfg.scaling.center.iter().chain(&cfg.scaling.half_width) {
        out.write_all(&v.to_le_bytes())?;
    }
    let hidden = cfg.hidden_widths();
    out.write_all(&(hidden.len() as u32).to_le_bytes())?;
    for w in &hidden {
        out.write_all(&(*w as u32).to_le_bytes())?;
    }
    let flat = params.flatten();
    out.write_all(&(flat.len() as u64).to_le_bytes())?;
    for v in flat {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn layout_tag(l: Layout) -> u8 {
    match l {
        Layout::Autoencoder => 0,
        Layout::Mlp => 1,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub activation: Activation,
    pub seed: u64,
    pub scaling: InputScaling,
    pub hidden: Vec<usize>,
    pub params: Vec<f64>,
}

impl Checkpoint {
    /// Rebuilds parameters for `cfg`, failing if the header disagrees with it.
    pub fn params_for(&self, cfg: &NetworkConfig) -> Result<NetworkParams> {
        let expected = cfg.hidden_widths();
        if self.hidden != expected {
            return Err(Error::HeaderMismatch(format!(
                "checkpoint widths {:?}, config widths {:?}",
                self.hidden, expected
            )));
        }
        if self.activation != cfg.activation {
            return Err(Error::HeaderMismatch(format!(
                "checkpoint activation {:?}, config activation {:?}",
                self.activation, cfg.activation
            )));
        }
        NetworkParams::unflatten(cfg, &self.params)
    }
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Checkpoint("truncated file".into()),
        _ => Error::Io(e),
    })?;
    Ok(b)
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint> {
    if &take::<4>(&mut r)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(&mut r)?);
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let [act, _layout] = take::<2>(&mut r)?;
    let activation = Activation::from_tag(act).ok_or_else(|| Error::Checkpoint(format!("activation tag {act}")))?;
    let seed = u64::from_le_bytes(take(&mut r)?);
    let mut sc = [0.0; 4];
    for v in &mut sc {
        *v = f64::from_le_bytes(take(&mut r)?);
    }
    let k = u32::from_le_bytes(take(&mut r)?) as usize;
    if k > 1024 {
        return Err(Error::Checkpoint(format!("implausible layer count {k}")));
    }
    let hidden =
        (0..k).map(|_| take::<4>(&mut r).map(|b| u32::from_le_bytes(b) as usize)).collect::<Result<Vec<_>>>()?;
    let p = u64::from_le_bytes(take(&mut r)?) as usize;
    let mut params = Vec::with_capacity(p.min(1 << 24));
    for _ in 0..p {
        params.push(f64::from_le_bytes(take(&mut r)?));
    }
    Ok(Checkpoint {
        activation,
        seed,
        scaling: InputScaling { center: [sc[0], sc[1]], half_width: [sc[2], sc[3]] },
        hidden,
        params,
    })
}

pub fn save_checkpoint(path: &Path, cfg: &NetworkConfig, params: &NetworkParams, seed: u64) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, cfg, params, seed)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    read_checkpoint(bytes.as_slice())
}
