//! Analytic resource and timing models.
//!
//! Each weight memory is organized as one word per input index holding the
//! weights of every neuron of the layer side by side, so a layer with `n`
//! neurons and `b`-bit weights reads an `n * b`-bit word per input. The word
//! is striped across as many block RAMs as its width requires and the depth
//! is cascaded the same way. Memories are never packed together.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{CycleCosts, LayerActivity, NetworkSpec};

/// Geometry of one block RAM primitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BramModel {
    pub capacity_bits: u64,
    pub max_width: u64,
    pub max_depth_at_max_width: u64,
}

impl Default for BramModel {
    /// 36 Kb block, 512 x 72 in its widest configuration.
    fn default() -> Self {
        Self {
            capacity_bits: 36864,
            max_width: 72,
            max_depth_at_max_width: 512,
        }
    }
}

impl BramModel {
    pub fn validate(&self) -> Result<()> {
        if self.max_width == 0 || self.max_depth_at_max_width == 0 {
            return Err(Error::config("bram", "block width and depth must be positive"));
        }
        if self.max_width * self.max_depth_at_max_width > self.capacity_bits {
            return Err(Error::config(
                "bram",
                format!(
                    "{} x {} exceeds the {}-bit capacity",
                    self.max_depth_at_max_width, self.max_width, self.capacity_bits
                ),
            ));
        }
        Ok(())
    }
}

/// Blocks needed for a `depth` x `word_width_bits` memory.
pub fn bram_count(depth: u64, word_width_bits: u64, model: &BramModel) -> u64 {
    word_width_bits.div_ceil(model.max_width) * depth.div_ceil(model.max_depth_at_max_width)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Device {
    pub name: String,
    pub avail_bram: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avail_lut: Option<u64>,
    #[serde(default)]
    pub bram: BramModel,
}

impl Device {
    pub fn new(name: impl Into<String>, avail_bram: u64) -> Self {
        Self {
            name: name.into(),
            avail_bram,
            avail_lut: None,
            bram: BramModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviceCatalog {
    pub devices: Vec<Device>,
}

impl DeviceCatalog {
    pub fn builtin() -> Self {
        Self::from_json(include_str!("devices.json")).expect("built-in device catalog is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let catalog: Self = serde_json::from_str(text)?;
        for d in &catalog.devices {
            d.bram.validate()?;
        }
        Ok(catalog)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Case-insensitive lookup.
    pub fn find(&self, name: &str) -> Option<&Device> {
        self.devices.iter().find(|d| d.name.eq_ignore_ascii_case(name))
    }
}

/// Memory-relevant shape of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerGeometry {
    pub n_inputs: usize,
    pub n_neurons: usize,
    pub ff_bits: u32,
    /// Feedback weight width, present for recurrent layers.
    pub fb_bits: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub layers: Vec<LayerGeometry>,
    pub n_cycles: usize,
}

impl Geometry {
    pub fn of(spec: &NetworkSpec) -> Self {
        Self {
            layers: spec
                .layers
                .iter()
                .map(|l| LayerGeometry {
                    n_inputs: l.n_inputs,
                    n_neurons: l.n_neurons,
                    ff_bits: l.w_ff.format().bits(),
                    fb_bits: l.w_fb.as_ref().map(|w| w.format().bits()),
                })
                .collect(),
            n_cycles: spec.n_cycles,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryKind {
    Ff,
    Fb,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryEstimate {
    /// 1-based layer index.
    pub layer: usize,
    pub kind: MemoryKind,
    pub depth: u64,
    pub word_width: u64,
    pub brams: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisFigures {
    pub luts: u64,
    pub ffs: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub device: String,
    pub memories: Vec<MemoryEstimate>,
    pub total_bram: u64,
    pub total_weight_bits: u64,
    pub avail_bram: u64,
    pub fits: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub advisory: Option<String>,
    /// Logic figures copied from an external synthesis report, never estimated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthesis: Option<SynthesisFigures>,
}

impl ResourceReport {
    pub fn layer_brams(&self, layer: usize, kind: MemoryKind) -> u64 {
        self.memories
            .iter()
            .filter(|m| m.layer == layer && m.kind == kind)
            .map(|m| m.brams)
            .sum()
    }

    pub fn with_synthesis(mut self, luts: u64, ffs: u64) -> Self {
        self.synthesis = Some(SynthesisFigures { luts, ffs });
        self
    }
}

impl fmt::Display for ResourceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<6} {:<4} {:>7} {:>10} {:>6}",
            "layer", "mem", "depth", "width", "BRAM"
        )?;
        for m in &self.memories {
            let kind = match m.kind {
                MemoryKind::Ff => "ff",
                MemoryKind::Fb => "fb",
            };
            writeln!(
                f,
                "{:<6} {:<4} {:>7} {:>10} {:>6}",
                m.layer, kind, m.depth, m.word_width, m.brams
            )?;
        }
        writeln!(
            f,
            "total {} / {} BRAM on {} ({} weight bits) -> {}",
            self.total_bram,
            self.avail_bram,
            self.device,
            self.total_weight_bits,
            if self.fits { "fits" } else { "does not fit" }
        )?;
        if let Some(s) = &self.synthesis {
            writeln!(f, "synthesis: {} LUT, {} FF", s.luts, s.ffs)?;
        }
        if let Some(a) = &self.advisory {
            writeln!(f, "note: {a}")?;
        }
        Ok(())
    }
}

pub fn estimate_geometry(geometry: &Geometry, device: &Device) -> ResourceReport {
    let mut memories = Vec::new();
    let mut total_weight_bits = 0u64;
    for (k, l) in geometry.layers.iter().enumerate() {
        let mut push = |kind, depth: u64, word_width: u64| {
            total_weight_bits += depth * word_width;
            memories.push(MemoryEstimate {
                layer: k + 1,
                kind,
                depth,
                word_width,
                brams: bram_count(depth, word_width, &device.bram),
            });
        };
        push(
            MemoryKind::Ff,
            l.n_inputs as u64,
            (l.n_neurons as u64) * l.ff_bits as u64,
        );
        if let Some(fb) = l.fb_bits {
            push(MemoryKind::Fb, l.n_neurons as u64, (l.n_neurons as u64) * fb as u64);
        }
    }
    let total_bram = memories.iter().map(|m| m.brams).sum();
    let fits = total_bram <= device.avail_bram;
    ResourceReport {
        device: device.name.clone(),
        memories,
        total_bram,
        total_weight_bits,
        avail_bram: device.avail_bram,
        fits,
        advisory: (!fits).then(|| "weights exceed on-chip BRAM; consider external memory".to_string()),
        synthesis: None,
    }
}

pub fn estimate_network(spec: &NetworkSpec, device: &Device) -> ResourceReport {
    estimate_geometry(&Geometry::of(spec), device)
}

fn check_activity(geometry: &Geometry, activity: &[LayerActivity]) -> Result<()> {
    if activity.len() != geometry.layers.len() {
        return Err(Error::shape(
            "per-layer activity",
            geometry.layers.len(),
            activity.len(),
        ));
    }
    for (k, a) in activity.iter().enumerate() {
        for x in [Some(a.ff), a.fb, a.any].into_iter().flatten() {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::Usage(format!("layer {} activity {x} outside [0, 1]", k + 1)));
            }
        }
    }
    Ok(())
}

/// Expected cycles for one inference.
pub fn predict_cycles(geometry: &Geometry, activity: &[LayerActivity], costs: &CycleCosts) -> Result<f64> {
    check_activity(geometry, activity)?;
    let slowest = geometry
        .layers
        .iter()
        .zip(activity)
        .map(|(l, a)| {
            let fb = if l.fb_bits.is_some() { a.fb.unwrap_or(0.0) } else { 0.0 };
            let any = if l.fb_bits.is_some() {
                a.any_or_independent()
            } else {
                a.any.unwrap_or(a.ff)
            };
            a.ff * l.n_inputs as f64
                + fb * l.n_neurons as f64
                + any * costs.active as f64
                + (1.0 - any) * costs.idle as f64
        })
        .fold(0.0, f64::max);
    Ok(geometry.n_cycles as f64 * (costs.network as f64 + slowest))
}

/// Expected inference latency in seconds at clock `f_clk_hz`.
pub fn predict_latency(
    spec: &NetworkSpec,
    activity: &[LayerActivity],
    f_clk_hz: f64,
    costs: &CycleCosts,
) -> Result<f64> {
    predict_latency_geometry(&Geometry::of(spec), activity, f_clk_hz, costs)
}

pub fn predict_latency_geometry(
    geometry: &Geometry,
    activity: &[LayerActivity],
    f_clk_hz: f64,
    costs: &CycleCosts,
) -> Result<f64> {
    if f_clk_hz.is_nan() || f_clk_hz <= 0.0 {
        return Err(Error::Usage(format!(
            "clock frequency must be positive, got {f_clk_hz}"
        )));
    }
    Ok(predict_cycles(geometry, activity, costs)? / f_clk_hz)
}

/// Largest hidden layer `n_inputs - H - n_outputs` whose weights fit `device`.
/// With `fb_bits` set the hidden layer is recurrent.
pub fn max_hidden_neurons(
    device: &Device,
    n_inputs: usize,
    n_outputs: usize,
    ff_bits: u32,
    fb_bits: Option<u32>,
) -> usize {
    let fits = |h: usize| {
        let g = Geometry {
            layers: vec![
                LayerGeometry {
                    n_inputs,
                    n_neurons: h,
                    ff_bits,
                    fb_bits,
                },
                LayerGeometry {
                    n_inputs: h,
                    n_neurons: n_outputs,
                    ff_bits,
                    fb_bits: None,
                },
            ],
            n_cycles: 1,
        };
        estimate_geometry(&g, device).fits
    };
    if !fits(1) {
        return 0;
    }
    // BRAM use is monotone in h, so bisect.
    let (mut lo, mut hi) = (1usize, 2usize);
    while fits(hi) {
        lo = hi;
        hi *= 2;
        if hi > 1 << 24 {
            return lo;
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometry(layers: &[(usize, usize, u32, Option<u32>)], n_cycles: usize) -> Geometry {
        Geometry {
            layers: layers
                .iter()
                .map(|&(n_inputs, n_neurons, ff_bits, fb_bits)| LayerGeometry {
                    n_inputs,
                    n_neurons,
                    ff_bits,
                    fb_bits,
                })
                .collect(),
            n_cycles,
        }
    }

    #[test]
    fn bram_count_examples() {
        let m = BramModel::default();
        assert_eq!(bram_count(784, 128 * 4, &m), 16);
        assert_eq!(bram_count(128, 10 * 4, &m), 1);
        assert_eq!(bram_count(1, 1, &m), 1);
    }

    #[test]
    fn bram_model_validation() {
        assert!(BramModel::default().validate().is_ok());
        let bad = BramModel {
            capacity_bits: 1000,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn network_totals() {
        let dev = Device::new("XC7Z020", 140);
        let mnist = estimate_geometry(&geometry(&[(784, 128, 4, None), (128, 10, 4, None)], 100), &dev);
        assert_eq!(mnist.total_bram, 17);
        assert!(mnist.fits);
        let shd = estimate_geometry(&geometry(&[(700, 200, 6, Some(5)), (200, 20, 6, Some(5))], 100), &dev);
        assert_eq!(
            [
                shd.layer_brams(1, MemoryKind::Ff),
                shd.layer_brams(1, MemoryKind::Fb),
                shd.layer_brams(2, MemoryKind::Ff),
                shd.layer_brams(2, MemoryKind::Fb)
            ],
            [34, 14, 2, 2]
        );
        assert_eq!(shd.total_bram, 52);
        let none = estimate_geometry(&geometry(&[(2, 1, 4, None)], 1), &Device::new("empty", 0));
        assert!(!none.fits);
        assert!(none.advisory.is_some());
    }

    #[test]
    fn latency_examples() {
        let costs = CycleCosts::default();
        let mnist = geometry(&[(784, 128, 4, None), (128, 10, 4, None)], 100);
        let act = [LayerActivity::feed_forward(1.0), LayerActivity::feed_forward(1.0)];
        let t = predict_latency_geometry(&mnist, &act, 100e6, &costs).unwrap();
        assert!((t - 100.0 * (784.0 + 2.0 + 2.0) / 100e6).abs() < 1e-12);

        let idle = [LayerActivity::feed_forward(0.0), LayerActivity::feed_forward(0.0)];
        let t = predict_latency_geometry(&mnist, &idle, 100e6, &costs).unwrap();
        assert!((t - 100.0 * 3.0 / 100e6).abs() < 1e-15);

        assert!(predict_latency_geometry(&mnist, &act, 0.0, &costs).is_err());
        assert!(predict_latency_geometry(&mnist, &act[..1], 1.0, &costs).is_err());
        let bad = [LayerActivity::feed_forward(1.5), LayerActivity::feed_forward(0.0)];
        assert!(predict_latency_geometry(&mnist, &bad, 1.0, &costs).is_err());
    }

    #[test]
    fn bram_is_monotone() {
        let m = BramModel::default();
        for d in (1..3000).step_by(37) {
            for w in (1..2000).step_by(29) {
                let b = bram_count(d, w, &m);
                assert!(bram_count(d + 1, w, &m) >= b);
                assert!(bram_count(d, w + 1, &m) >= b);
            }
        }
    }

    #[test]
    fn catalog_lookup() {
        let cat = DeviceCatalog::builtin();
        assert_eq!(cat.find("xc7z020").unwrap().avail_bram, 140);
        assert_eq!(cat.find("XCZU3EG").unwrap().avail_bram, 216);
        assert!(cat.find("nope").is_none());
        assert!(DeviceCatalog::from_json(
            r#"[{"name":"x","avail_bram":1,"bram":{"capacity_bits":10,"max_width":72,"max_depth_at_max_width":512}}]"#
        )
        .is_err());
    }

    #[test]
    fn max_size_search() {
        let dev = DeviceCatalog::builtin().find("XC7Z020").unwrap().clone();
        let h = max_hidden_neurons(&dev, 784, 10, 4, None);
        assert_eq!(h, 1224);
        assert_eq!(max_hidden_neurons(&Device::new("tiny", 0), 784, 10, 4, None), 0);
    }
}
