//! File formats and input encoders.
//!
//! # Raster files
//!
//! Text form (`.raster`):
//!
//! ```text
//! RASTER <channels> <steps>
//! 0110...   one line per step, one '0'/'1' character per channel
//! ```
//!
//! Packed form (`.rasterb`): magic `SNNR`, version byte `1`, then channels
//! and steps as little-endian `u32`, then one row per step of
//! `ceil(channels / 8)` bytes with channel `c` in bit `c % 8` of byte `c / 8`.
//!
//! # Weight files
//!
//! Magic `SNNW`, version byte `1`, word width in bits (`u8`), scale exponent
//! (`i8`), a reserved zero byte, rows and columns as little-endian `u32`,
//! then `rows * cols` little-endian `i32` values in row-major order. The
//! real value of a word is `raw * 2^-scale_exp`.
//!
//! # Rate encoding
//!
//! Channel `c` at step `t` spikes when draw `t * channels + c` of the
//! [`crate::rng`] stream for the sample's seed is below the channel's value.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fxp::{FxpFormat, FxpValue};
use crate::network::{LayerSpec, NetworkSpec, Propagation, WeightMatrix};
use crate::neuron::{NeuronModel, NeuronOrder, NeuronSpec, ResetMode};
use crate::quant::{self, FloatLayer, FloatNetwork, QuantWidths, Sample};
use crate::rng;
use crate::spikes::SpikeStream;

/// Independent Bernoulli draws per channel and step.
pub fn rate_encode(values: &[f64], n_steps: usize, seed: u64) -> Result<SpikeStream> {
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Usage(format!("rate {v} outside [0, 1]")));
    }
    let n = values.len();
    let bits = (0..n_steps * n)
        .map(|idx| rng::draw_unit(seed, idx as u64) < values[idx % n])
        .collect();
    SpikeStream::new(n, n_steps, bits)
}

// ---------------------------------------------------------------- rasters

const RASTER_HEADER: &str = "RASTER";
const RASTER_MAGIC: &[u8; 4] = b"SNNR";
const WEIGHT_MAGIC: &[u8; 4] = b"SNNW";
const FORMAT_VERSION: u8 = 1;

pub fn raster_to_string(stream: &SpikeStream) -> String {
    let mut out = String::with_capacity((stream.n_channels() + 1) * (stream.n_steps() + 1) + 24);
    out.push_str(&format!(
        "{RASTER_HEADER} {} {}\n",
        stream.n_channels(),
        stream.n_steps()
    ));
    for row in stream.steps() {
        out.extend(row.iter().map(|&b| if b { '1' } else { '0' }));
        out.push('\n');
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn raster_from_str(text: &str) -> Result<SpikeStream> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (channels, steps) = match fields.as_slice() {
        [tag, c, s] if *tag == RASTER_HEADER => (
            c.parse::<usize>()
                .map_err(|_| parse_err(1, format!("bad channel count `{c}`")))?,
            s.parse::<usize>()
                .map_err(|_| parse_err(1, format!("bad step count `{s}`")))?,
        ),
        _ => return Err(parse_err(1, "expected `RASTER <channels> <steps>`")),
    };
    let mut bits = Vec::with_capacity(channels * steps);
    for step in 0..steps {
        let line_no = step + 2;
        let row = lines
            .next()
            .ok_or_else(|| parse_err(line_no, format!("expected {steps} rows, found {step}")))?;
        if row.len() != channels {
            return Err(parse_err(
                line_no,
                format!("row has {} characters, expected {channels}", row.len()),
            ));
        }
        for (col, ch) in row.chars().enumerate() {
            match ch {
                '0' => bits.push(false),
                '1' => bits.push(true),
                other => {
                    return Err(parse_err(
                        line_no,
                        format!("invalid character `{other}` at column {}", col + 1),
                    ))
                }
            }
        }
    }
    for (extra, line) in lines.enumerate() {
        if !line.trim().is_empty() {
            return Err(parse_err(steps + 2 + extra, "unexpected data after the last row"));
        }
    }
    SpikeStream::new(channels, steps, bits)
}

pub fn raster_to_packed(stream: &SpikeStream) -> Vec<u8> {
    let row_bytes = stream.n_channels().div_ceil(8);
    let mut out = Vec::with_capacity(13 + row_bytes * stream.n_steps());
    out.extend_from_slice(RASTER_MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&(stream.n_channels() as u32).to_le_bytes());
    out.extend_from_slice(&(stream.n_steps() as u32).to_le_bytes());
    for row in stream.steps() {
        let mut packed = vec![0u8; row_bytes];
        for (c, &b) in row.iter().enumerate() {
            if b {
                packed[c / 8] |= 1 << (c % 8);
            }
        }
        out.extend_from_slice(&packed);
    }
    out
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

pub fn raster_from_packed(bytes: &[u8]) -> Result<SpikeStream> {
    if bytes.len() < 13 || &bytes[..4] != RASTER_MAGIC {
        return Err(parse_err(0, "not a packed raster"));
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(parse_err(0, format!("unsupported packed raster version {}", bytes[4])));
    }
    let channels = read_u32(bytes, 5) as usize;
    let steps = read_u32(bytes, 9) as usize;
    let row_bytes = channels.div_ceil(8);
    let payload = &bytes[13..];
    if payload.len() != row_bytes * steps {
        return Err(parse_err(
            0,
            format!("payload is {} bytes, expected {}", payload.len(), row_bytes * steps),
        ));
    }
    let mut bits = Vec::with_capacity(channels * steps);
    for row in payload.chunks(row_bytes.max(1)).take(steps) {
        bits.extend((0..channels).map(|c| row[c / 8] >> (c % 8) & 1 == 1));
    }
    SpikeStream::new(channels, steps, bits)
}

fn is_packed(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "rasterb")
}

/// Reads either raster form; `.rasterb` selects the packed one.
pub fn load_raster(path: &Path) -> Result<SpikeStream> {
    if is_packed(path) {
        raster_from_packed(&fs::read(path).map_err(|e| Error::io(path, e))?)
    } else {
        raster_from_str(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

pub fn store_raster(path: &Path, stream: &SpikeStream) -> Result<()> {
    let res = if is_packed(path) {
        fs::write(path, raster_to_packed(stream))
    } else {
        fs::write(path, raster_to_string(stream))
    };
    res.map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------- weights

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightFile {
    pub rows: usize,
    pub cols: usize,
    pub bits: u32,
    pub scale_exp: i8,
    pub values: Vec<i64>,
}

impl WeightFile {
    pub fn from_matrix(m: &WeightMatrix, scale_exp: i8) -> Self {
        Self {
            rows: m.rows(),
            cols: m.cols(),
            bits: m.format().bits(),
            scale_exp,
            values: m.as_slice().iter().map(|&v| v as i64).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fmt = FxpFormat::new(self.bits)?;
        if self.values.len() != self.rows * self.cols {
            return Err(Error::shape("weight payload", self.rows * self.cols, self.values.len()));
        }
        if let Some(&raw) = self.values.iter().find(|&&v| !fmt.contains(v)) {
            return Err(Error::OutOfRange { raw, bits: self.bits });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut out = Vec::with_capacity(16 + 4 * self.values.len());
        out.extend_from_slice(WEIGHT_MAGIC);
        out.push(FORMAT_VERSION);
        out.push(self.bits as u8);
        out.push(self.scale_exp as u8);
        out.push(0);
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        for &v in &self.values {
            out.extend_from_slice(&(v as i32).to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != WEIGHT_MAGIC {
            return Err(parse_err(0, "not a weight file"));
        }
        if bytes[4] != FORMAT_VERSION {
            return Err(parse_err(0, format!("unsupported weight file version {}", bytes[4])));
        }
        let rows = read_u32(bytes, 8) as usize;
        let cols = read_u32(bytes, 12) as usize;
        let payload = &bytes[16..];
        if payload.len() != 4 * rows * cols {
            return Err(parse_err(
                0,
                format!("payload is {} bytes, expected {}", payload.len(), 4 * rows * cols),
            ));
        }
        let file = Self {
            rows,
            cols,
            bits: bytes[5] as u32,
            scale_exp: bytes[6] as i8,
            values: payload
                .chunks_exact(4)
                .map(|c| i32::from_le_bytes(c.try_into().expect("4-byte chunk")) as i64)
                .collect(),
        };
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn store(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    /// Real values `raw * 2^-scale_exp`.
    pub fn to_reals(&self) -> Vec<f64> {
        let scale = (-(self.scale_exp as f64)).exp2();
        self.values.iter().map(|&v| v as f64 * scale).collect()
    }
}

// ---------------------------------------------------------------- configs

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    #[default]
    Rate,
    PopulationRank,
    Temporal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BitsConfig {
    pub neuron: u32,
    pub ff_weights: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fb_weights: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSource {
    /// Weight file path, relative to the config file.
    Path(String),
    /// Rows of weights, one row per neuron.
    Inline(Vec<Vec<f64>>),
    /// Deterministic pseudo-random weights, for sizing studies.
    Seeded { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    pub n_inputs: usize,
    pub n_neurons: usize,
    pub model: NeuronOrder,
    pub reset: ResetMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_shift: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_shift: Option<u32>,
    /// Real-valued threshold (float networks).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Raw threshold word (fixed networks).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_th: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_reset: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub immediate_current: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub recurrent: bool,
    pub weights_ff: WeightSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights_fb: Option<WeightSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub n_cycles: usize,
    #[serde(default)]
    pub propagation: Propagation,
    #[serde(default)]
    pub encoding: Encoding,
    pub bits: BitsConfig,
    pub layers: Vec<LayerConfig>,
}

fn default_name() -> String {
    "net".to_string()
}

impl NetworkConfig {
    pub fn widths(&self) -> QuantWidths {
        QuantWidths {
            neuron: self.bits.neuron,
            ff: self.bits.ff_weights,
            fb: self.bits.fb_weights.unwrap_or(self.bits.ff_weights),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    /// Real-valued parameters, to be quantized at the config's widths.
    Float(FloatNetwork),
    Fixed(NetworkSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedNetwork {
    pub config: NetworkConfig,
    pub network: Network,
}

impl LoadedNetwork {
    pub fn name(&self) -> &str {
        &self.config.name
    }

    /// A runnable spec; float networks are quantized at the configured widths.
    pub fn to_spec(&self) -> Result<NetworkSpec> {
        match &self.network {
            Network::Fixed(spec) => Ok(spec.clone()),
            Network::Float(net) => Ok(quant::quantize(net, self.config.widths())?.spec),
        }
    }

    pub fn float(&self) -> Option<&FloatNetwork> {
        match &self.network {
            Network::Float(net) => Some(net),
            Network::Fixed(_) => None,
        }
    }
}

pub fn load_network(path: &Path) -> Result<LoadedNetwork> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_network(&text, base)
}

/// Parses and fully validates a config; `base_dir` resolves weight file paths.
pub fn parse_network(text: &str, base_dir: &Path) -> Result<LoadedNetwork> {
    let config: NetworkConfig = serde_json::from_str(text).map_err(|e| Error::config("document", e.to_string()))?;
    let network = build_network(&config, base_dir)?;
    Ok(LoadedNetwork { config, network })
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Float,
    Fixed,
}

fn layer_kind(k: usize, l: &LayerConfig) -> Result<Kind> {
    let float = l.alpha.is_some() || l.beta.is_some() || l.threshold.is_some();
    let fixed = l.alpha_shift.is_some() || l.beta_shift.is_some() || l.v_th.is_some();
    match (float, fixed) {
        (true, false) => Ok(Kind::Float),
        (false, true) => Ok(Kind::Fixed),
        (true, true) => Err(Error::config(
            format!("layers[{k}]"),
            "mixes real constants (alpha/beta/threshold) with raw ones (alpha_shift/beta_shift/v_th)",
        )),
        (false, false) => Err(Error::config(
            format!("layers[{k}].threshold"),
            "missing threshold (`threshold` or `v_th`)",
        )),
    }
}

fn build_network(config: &NetworkConfig, base: &Path) -> Result<Network> {
    match config.encoding {
        Encoding::Rate => {}
        Encoding::PopulationRank => return Err(Error::UnsupportedEncoding("population_rank".into())),
        Encoding::Temporal => return Err(Error::UnsupportedEncoding("temporal".into())),
    }
    if config.layers.is_empty() {
        return Err(Error::config("layers", "network has no layers"));
    }
    if config.n_cycles == 0 {
        return Err(Error::config("n_cycles", "must be at least 1"));
    }
    let widths = config.widths();
    for (field, bits) in [
        ("bits.neuron", Some(config.bits.neuron)),
        ("bits.ff_weights", Some(config.bits.ff_weights)),
        ("bits.fb_weights", config.bits.fb_weights),
    ] {
        if let Some(b) = bits {
            FxpFormat::new(b).map_err(|e| Error::config(field, e.to_string()))?;
        }
    }
    let kinds = config
        .layers
        .iter()
        .enumerate()
        .map(|(k, l)| layer_kind(k, l))
        .collect::<Result<Vec<_>>>()?;
    let kind = kinds[0];
    if let Some(k) = kinds.iter().position(|&x| x != kind) {
        return Err(Error::config(
            format!("layers[{k}]"),
            "all layers must be either real-valued or raw",
        ));
    }

    for (k, l) in config.layers.iter().enumerate() {
        if k > 0 && l.n_inputs != config.layers[k - 1].n_neurons {
            return Err(Error::config(
                format!("layers[{k}].n_inputs"),
                format!(
                    "{} does not match the previous layer's {} neurons",
                    l.n_inputs,
                    config.layers[k - 1].n_neurons
                ),
            ));
        }
        match (l.recurrent, &l.weights_fb) {
            (true, None) => {
                return Err(Error::config(
                    format!("layers[{k}].weights_fb"),
                    "recurrent layer needs feedback weights",
                ))
            }
            (false, Some(_)) => {
                return Err(Error::config(
                    format!("layers[{k}].weights_fb"),
                    "set `recurrent: true` to use feedback weights",
                ))
            }
            _ => {}
        }
        if l.recurrent && config.bits.fb_weights.is_none() {
            return Err(Error::config("bits.fb_weights", "required by recurrent layers"));
        }
    }

    match kind {
        Kind::Float => {
            let layers = config
                .layers
                .iter()
                .enumerate()
                .map(|(k, l)| float_layer(k, l, base))
                .collect::<Result<Vec<_>>>()?;
            let net = FloatNetwork {
                layers,
                n_cycles: config.n_cycles,
                propagation: config.propagation,
            };
            net.validate()?;
            // reject configs whose quantization would fail later
            quant::quantize(&net, widths)?;
            Ok(Network::Float(net))
        }
        Kind::Fixed => {
            let neuron_fmt = FxpFormat::new(widths.neuron)?;
            let ff_fmt = FxpFormat::new(widths.ff)?;
            let fb_fmt = FxpFormat::new(widths.fb)?;
            let layers = config
                .layers
                .iter()
                .enumerate()
                .map(|(k, l)| fixed_layer(k, l, base, neuron_fmt, ff_fmt, fb_fmt))
                .collect::<Result<Vec<_>>>()?;
            Ok(Network::Fixed(NetworkSpec::new(
                layers,
                config.n_cycles,
                config.propagation,
            )?))
        }
    }
}

fn read_weights(field: &str, src: &WeightSource, rows: usize, cols: usize, base: &Path) -> Result<WeightData> {
    match src {
        WeightSource::Path(p) => {
            let path: PathBuf = base.join(p);
            let file = WeightFile::load(&path).map_err(|e| Error::config(field, e.to_string()))?;
            if (file.rows, file.cols) != (rows, cols) {
                return Err(Error::config(
                    field,
                    format!("{} is {}x{}, expected {rows}x{cols}", p, file.rows, file.cols),
                ));
            }
            Ok(WeightData::File(file))
        }
        WeightSource::Inline(m) => {
            if m.len() != rows {
                return Err(Error::config(field, format!("{} rows, expected {rows}", m.len())));
            }
            if let Some((r, row)) = m.iter().enumerate().find(|(_, row)| row.len() != cols) {
                return Err(Error::config(
                    format!("{field}[{r}]"),
                    format!("{} columns, expected {cols}", row.len()),
                ));
            }
            Ok(WeightData::Reals(m.concat()))
        }
        WeightSource::Seeded { seed } => Ok(WeightData::Seeded(*seed, rows * cols)),
    }
}

enum WeightData {
    File(WeightFile),
    Reals(Vec<f64>),
    Seeded(u64, usize),
}

fn float_layer(k: usize, l: &LayerConfig, base: &Path) -> Result<FloatLayer> {
    let at = |f: &str| format!("layers[{k}].{f}");
    let reals = |field: &str, src: &WeightSource, rows, cols| -> Result<Vec<f64>> {
        Ok(match read_weights(field, src, rows, cols, base)? {
            WeightData::File(f) => f.to_reals(),
            WeightData::Reals(v) => v,
            WeightData::Seeded(seed, n) => (0..n).map(|i| rng::draw_unit(seed, i as u64) * 2.0 - 1.0).collect(),
        })
    };
    let w_ff = reals(&at("weights_ff"), &l.weights_ff, l.n_neurons, l.n_inputs)?;
    let w_fb = l
        .weights_fb
        .as_ref()
        .map(|src| reals(&at("weights_fb"), src, l.n_neurons, l.n_neurons))
        .transpose()?;
    Ok(FloatLayer {
        n_inputs: l.n_inputs,
        n_neurons: l.n_neurons,
        model: NeuronModel::new(l.model, l.reset),
        alpha: l.alpha,
        beta: l.beta,
        v_th: l.threshold.ok_or_else(|| Error::config(at("threshold"), "missing"))?,
        v_reset: l.v_reset.unwrap_or(0.0),
        w_ff,
        w_fb,
        immediate_current: l.immediate_current,
    })
}

fn raw_int(field: &str, x: f64) -> Result<i64> {
    if x.fract() != 0.0 || !x.is_finite() {
        return Err(Error::config(field, format!("{x} is not an integer word")));
    }
    Ok(x as i64)
}

fn fixed_layer(
    k: usize,
    l: &LayerConfig,
    base: &Path,
    neuron_fmt: FxpFormat,
    ff_fmt: FxpFormat,
    fb_fmt: FxpFormat,
) -> Result<LayerSpec> {
    let at = |f: &str| format!("layers[{k}].{f}");
    let matrix = |field: &str, src: &WeightSource, rows, cols, fmt: FxpFormat| -> Result<WeightMatrix> {
        let values = match read_weights(field, src, rows, cols, base)? {
            WeightData::File(f) => f.values,
            WeightData::Reals(v) => v.iter().map(|&x| raw_int(field, x)).collect::<Result<_>>()?,
            WeightData::Seeded(seed, n) => {
                let span = (fmt.max() - fmt.min() + 1) as u64;
                (0..n)
                    .map(|i| fmt.min() + (rng::draw_u64(seed, i as u64) % span) as i64)
                    .collect()
            }
        };
        WeightMatrix::new(rows, cols, fmt, values).map_err(|e| Error::config(field, e.to_string()))
    };
    let w_ff = matrix(&at("weights_ff"), &l.weights_ff, l.n_neurons, l.n_inputs, ff_fmt)?;
    let w_fb = l
        .weights_fb
        .as_ref()
        .map(|src| matrix(&at("weights_fb"), src, l.n_neurons, l.n_neurons, fb_fmt))
        .transpose()?;
    let word =
        |field: &str, raw: i64| FxpValue::new(raw, neuron_fmt).map_err(|e| Error::config(at(field), e.to_string()));
    let v_th = word("v_th", l.v_th.ok_or_else(|| Error::config(at("v_th"), "missing"))?)?;
    let v_reset = word("v_reset", raw_int(&at("v_reset"), l.v_reset.unwrap_or(0.0))?)?;
    let neuron = NeuronSpec {
        model: NeuronModel::new(l.model, l.reset),
        alpha_shift: l.alpha_shift,
        beta_shift: l.beta_shift,
        v_th,
        v_reset,
        bits: neuron_fmt,
        immediate_current: l.immediate_current,
    };
    neuron.validate().map_err(|e| match e {
        Error::Config { field, message } => Error::config(at(&field), message),
        other => Error::config(at("model"), other.to_string()),
    })?;
    LayerSpec::new(neuron, w_ff, w_fb)
}

/// Writes `spec` as a raw config plus one weight file per matrix into `dir`,
/// returning the config path.
pub fn store_fixed_network(spec: &NetworkSpec, name: &str, scale_exp: i8, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let fb_bits = spec
        .layers
        .iter()
        .filter_map(|l| l.w_fb.as_ref().map(|w| w.format().bits()))
        .next();
    let mut layers = Vec::new();
    for (k, l) in spec.layers.iter().enumerate() {
        let ff_name = format!("{name}_l{}_ff.w", k + 1);
        WeightFile::from_matrix(&l.w_ff, scale_exp).store(&dir.join(&ff_name))?;
        let fb_name = l
            .w_fb
            .as_ref()
            .map(|w| {
                let n = format!("{name}_l{}_fb.w", k + 1);
                WeightFile::from_matrix(w, scale_exp).store(&dir.join(&n)).map(|_| n)
            })
            .transpose()?;
        layers.push(LayerConfig {
            n_inputs: l.n_inputs,
            n_neurons: l.n_neurons,
            model: l.neuron.model.order,
            reset: l.neuron.model.reset,
            alpha: None,
            beta: None,
            alpha_shift: l.neuron.alpha_shift,
            beta_shift: l.neuron.beta_shift,
            threshold: None,
            v_th: Some(l.neuron.v_th.raw() as i64),
            v_reset: (l.neuron.v_reset.raw() != 0).then_some(l.neuron.v_reset.raw() as f64),
            immediate_current: l.neuron.immediate_current,
            recurrent: l.is_recurrent(),
            weights_ff: WeightSource::Path(ff_name),
            weights_fb: fb_name.map(WeightSource::Path),
        });
    }
    let config = NetworkConfig {
        name: name.to_string(),
        n_cycles: spec.n_cycles,
        propagation: spec.propagation,
        encoding: Encoding::Rate,
        bits: BitsConfig {
            neuron: spec.layers[0].neuron.bits.bits(),
            ff_weights: spec.layers[0].w_ff.format().bits(),
            fb_weights: fb_bits,
        },
        layers,
    };
    let path = dir.join(format!("{name}.json"));
    let text = serde_json::to_string_pretty(&config)?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Real-valued config with inline weights, quantized at `widths` on load.
pub fn float_config(net: &FloatNetwork, name: &str, widths: QuantWidths) -> NetworkConfig {
    let rows = |w: &[f64], cols: usize| -> Vec<Vec<f64>> { w.chunks(cols.max(1)).map(<[f64]>::to_vec).collect() };
    let recurrent = net.layers.iter().any(|l| l.w_fb.is_some());
    NetworkConfig {
        name: name.to_string(),
        n_cycles: net.n_cycles,
        propagation: net.propagation,
        encoding: Encoding::Rate,
        bits: BitsConfig {
            neuron: widths.neuron,
            ff_weights: widths.ff,
            fb_weights: recurrent.then_some(widths.fb),
        },
        layers: net
            .layers
            .iter()
            .map(|l| LayerConfig {
                n_inputs: l.n_inputs,
                n_neurons: l.n_neurons,
                model: l.model.order,
                reset: l.model.reset,
                alpha: l.alpha,
                beta: l.beta,
                alpha_shift: None,
                beta_shift: None,
                threshold: Some(l.v_th),
                v_th: None,
                v_reset: (l.v_reset != 0.0).then_some(l.v_reset),
                immediate_current: l.immediate_current,
                recurrent: l.w_fb.is_some(),
                weights_ff: WeightSource::Inline(rows(&l.w_ff, l.n_inputs)),
                weights_fb: l.w_fb.as_ref().map(|w| WeightSource::Inline(rows(w, l.n_neurons))),
            })
            .collect(),
    }
}

// ---------------------------------------------------------------- datasets

/// Rasters of a directory, optionally labeled.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    pub inputs: Vec<SpikeStream>,
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn samples(&self) -> Option<Vec<Sample>> {
        self.labels.as_ref().map(|labels| {
            self.inputs
                .iter()
                .zip(labels)
                .map(|(input, &label)| Sample {
                    input: input.clone(),
                    label,
                })
                .collect()
        })
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct LabelRow {
    file: String,
    label: usize,
}

pub const LABELS_FILE: &str = "labels.csv";

/// Loads a dataset directory. With a `labels.csv` (`file,label`) only the
/// listed files are read, in that order; otherwise every `.raster` /
/// `.rasterb` file is read in name order, unlabeled.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let labels_path = dir.join(LABELS_FILE);
    let mut names = Vec::new();
    let mut labels = None;
    if labels_path.exists() {
        let mut reader =
            csv::Reader::from_path(&labels_path).map_err(|e| Error::io(&labels_path, std::io::Error::other(e)))?;
        let mut ls = Vec::new();
        for (i, row) in reader.deserialize::<LabelRow>().enumerate() {
            let row = row.map_err(|e| parse_err(i + 2, format!("{LABELS_FILE}: {e}")))?;
            names.push(row.file);
            ls.push(row.label);
        }
        labels = Some(ls);
    } else {
        let mut entries: Vec<String> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".raster") || n.ends_with(".rasterb"))
            .collect();
        entries.sort();
        names = entries;
    }
    let inputs = names
        .iter()
        .map(|n| load_raster(&dir.join(n)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { names, inputs, labels })
}

/// Writes rasters as `<prefix>_NNNN.raster` plus `labels.csv` when labels are given.
pub fn store_dataset(
    dir: &Path,
    prefix: &str,
    inputs: &[SpikeStream],
    labels: Option<&[usize]>,
) -> Result<Vec<PathBuf>> {
    store_dataset_as(dir, prefix, "raster", inputs, labels)
}

/// [`store_dataset`] with a chosen extension; `rasterb` selects the packed format.
pub fn store_dataset_as(
    dir: &Path,
    prefix: &str,
    extension: &str,
    inputs: &[SpikeStream],
    labels: Option<&[usize]>,
) -> Result<Vec<PathBuf>> {
    if labels.is_some_and(|l| l.len() != inputs.len()) {
        return Err(Error::shape("labels", inputs.len(), labels.map_or(0, <[usize]>::len)));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::with_capacity(inputs.len());
    let mut rows = Vec::new();
    for (i, input) in inputs.iter().enumerate() {
        let name = format!("{prefix}_{i:04}.{extension}");
        let path = dir.join(&name);
        store_raster(&path, input)?;
        if let Some(l) = labels {
            rows.push(LabelRow {
                file: name,
                label: l[i],
            });
        }
        paths.push(path);
    }
    if labels.is_some() {
        let path = dir.join(LABELS_FILE);
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
        for row in rows {
            w.serialize(row)
                .map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(paths)
}
