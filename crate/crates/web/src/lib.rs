//! Browser bindings for the static demo page in `www/`.
//!
//! Every export takes a JSON request string and returns a JSON response
//! string, so the page needs no generated type glue. The plain Rust
//! functions behind the exports are usable and tested natively.

use serde::{Deserialize, Serialize};
use snnforge_core::estimate::{self, DeviceCatalog, Geometry, LayerGeometry, ResourceReport};
use snnforge_core::network::{LayerActivity, Simulator, WeightMatrix};
use snnforge_core::{
    codec, Error, FxpFormat, LayerSpec, NetworkSpec, NeuronModel, NeuronOrder, NeuronSpec, Propagation, ResetMode,
    Result, SimOptions,
};
use wasm_bindgen::prelude::*;

/// One neuron driven by a single rate-coded input through one weight.
#[derive(Debug, Clone, Deserialize)]
pub struct TraceRequest {
    pub model: NeuronOrder,
    pub reset: ResetMode,
    pub alpha_shift: Option<u32>,
    pub beta_shift: Option<u32>,
    pub v_th: i64,
    #[serde(default)]
    pub v_reset: i64,
    #[serde(default)]
    pub immediate_current: bool,
    pub bits: u32,
    pub weight: i64,
    /// Input spike probability per step.
    pub rate: f64,
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub input: Vec<bool>,
    /// Membrane after each step, after any reset.
    pub v: Vec<i32>,
    pub i: Vec<i32>,
    pub spikes: Vec<bool>,
    pub spike_count: usize,
}

pub fn trace(req: &TraceRequest) -> Result<Trace> {
    let fmt = FxpFormat::new(req.bits)?;
    let mut neuron = NeuronSpec::new(
        NeuronModel::new(req.model, req.reset),
        req.alpha_shift,
        req.beta_shift,
        req.v_th,
        fmt,
    )?
    .with_immediate_current(req.immediate_current);
    if req.reset == ResetMode::Static {
        neuron = neuron.with_reset_value(req.v_reset)?;
    }
    let w = WeightMatrix::new(1, 1, fmt, vec![fmt.saturate(req.weight) as i64])?;
    let spec = NetworkSpec::new(
        vec![LayerSpec::new(neuron, w, None)?],
        req.steps,
        Propagation::Pipelined,
    )?;
    let input = codec::rate_encode(&[req.rate], req.steps, req.seed)?;

    let mut sim = Simulator::new(&spec, SimOptions::default());
    let mut out = Trace {
        input: Vec::with_capacity(req.steps),
        v: Vec::with_capacity(req.steps),
        i: Vec::with_capacity(req.steps),
        spikes: Vec::with_capacity(req.steps),
        spike_count: 0,
    };
    for row in input.steps() {
        sim.step(row)?;
        let state = sim.layer_states(0)[0];
        let spike = sim.layer_outputs()[0][0];
        out.input.push(row[0]);
        out.v.push(state.v_m.raw());
        out.i.push(state.i_syn.raw());
        out.spikes.push(spike);
        out.spike_count += spike as usize;
    }
    Ok(out)
}

/// Network shape shared by the latency and BRAM requests.
#[derive(Debug, Clone, Deserialize)]
pub struct Topology {
    /// Layer widths including the input, e.g. `[784, 128, 10]`.
    pub widths: Vec<usize>,
    pub ff_bits: u32,
    /// Set to make every layer except the output recurrent.
    #[serde(default)]
    pub fb_bits: Option<u32>,
    #[serde(default = "default_cycles")]
    pub n_cycles: usize,
}

fn default_cycles() -> usize {
    100
}

impl Topology {
    fn geometry(&self) -> Result<Geometry> {
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return Err(Error::Usage("need at least two non-zero layer widths".into()));
        }
        let last = self.widths.len() - 2;
        let layers = self
            .widths
            .windows(2)
            .enumerate()
            .map(|(k, w)| LayerGeometry {
                n_inputs: w[0],
                n_neurons: w[1],
                ff_bits: self.ff_bits,
                fb_bits: if k < last { self.fb_bits } else { None },
            })
            .collect();
        Ok(Geometry {
            layers,
            n_cycles: self.n_cycles,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct LatencyRequest {
    #[serde(flatten)]
    pub topology: Topology,
    #[serde(default = "default_clock")]
    pub clock_mhz: f64,
    /// Feedback activity of recurrent layers, held fixed along the curve.
    #[serde(default)]
    pub fb_activity: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_clock() -> f64 {
    100.0
}

fn default_points() -> usize {
    21
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyCurve {
    pub activity: Vec<f64>,
    pub latency_us: Vec<f64>,
}

/// Predicted latency as the feed-forward activity of every layer goes from 0 to 1.
pub fn latency_curve(req: &LatencyRequest) -> Result<LatencyCurve> {
    let geometry = req.topology.geometry()?;
    let points = req.points.max(2);
    let costs = SimOptions::default().costs;
    let mut curve = LatencyCurve {
        activity: Vec::with_capacity(points),
        latency_us: Vec::with_capacity(points),
    };
    for p in 0..points {
        let a = p as f64 / (points - 1) as f64;
        let activity: Vec<LayerActivity> = geometry
            .layers
            .iter()
            .map(|l| match l.fb_bits {
                Some(_) => LayerActivity::recurrent(a, req.fb_activity),
                None => LayerActivity::feed_forward(a),
            })
            .collect();
        let t = estimate::predict_latency_geometry(&geometry, &activity, req.clock_mhz * 1e6, &costs)?;
        curve.activity.push(a);
        curve.latency_us.push(t * 1e6);
    }
    Ok(curve)
}

#[derive(Debug, Clone, Deserialize)]
pub struct BramRequest {
    #[serde(flatten)]
    pub topology: Topology,
    pub device: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BramEstimate {
    pub report: ResourceReport,
    /// Largest single hidden layer between the first and last widths.
    pub max_hidden_neurons: usize,
}

pub fn bram_estimate(req: &BramRequest) -> Result<BramEstimate> {
    let geometry = req.topology.geometry()?;
    let catalog = DeviceCatalog::builtin();
    let device = catalog
        .find(&req.device)
        .ok_or_else(|| Error::Usage(format!("unknown device `{}`", req.device)))?;
    let widths = &req.topology.widths;
    Ok(BramEstimate {
        report: estimate::estimate_geometry(&geometry, device),
        max_hidden_neurons: estimate::max_hidden_neurons(
            device,
            widths[0],
            widths[widths.len() - 1],
            req.topology.ff_bits,
            req.topology.fb_bits,
        ),
    })
}

pub fn device_names() -> Vec<String> {
    DeviceCatalog::builtin().devices.into_iter().map(|d| d.name).collect()
}

fn handle<Q: for<'de> Deserialize<'de>, R: Serialize>(
    request: &str,
    f: impl FnOnce(&Q) -> Result<R>,
) -> std::result::Result<String, String> {
    let q: Q = serde_json::from_str(request).map_err(|e| format!("bad request: {e}"))?;
    let r = f(&q).map_err(|e| e.to_string())?;
    serde_json::to_string(&r).map_err(|e| e.to_string())
}

/// JSON entry points without the JavaScript error wrapping.
pub mod json {
    use super::*;

    pub fn neuron_trace(request: &str) -> std::result::Result<String, String> {
        handle(request, trace)
    }

    pub fn latency_curve(request: &str) -> std::result::Result<String, String> {
        handle(request, super::latency_curve)
    }

    pub fn bram_estimate(request: &str) -> std::result::Result<String, String> {
        handle(request, super::bram_estimate)
    }
}

#[wasm_bindgen(js_name = neuronTrace)]
pub fn neuron_trace_js(request: &str) -> std::result::Result<String, JsError> {
    json::neuron_trace(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = latencyCurve)]
pub fn latency_curve_js(request: &str) -> std::result::Result<String, JsError> {
    json::latency_curve(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = bramEstimate)]
pub fn bram_estimate_js(request: &str) -> std::result::Result<String, JsError> {
    json::bram_estimate(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = deviceNames)]
pub fn device_names_js() -> String {
    serde_json::to_string(&device_names()).expect("names serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn if_neuron(weight: i64, v_th: i64) -> TraceRequest {
        TraceRequest {
            model: NeuronOrder::If,
            reset: ResetMode::Subtractive,
            alpha_shift: None,
            beta_shift: None,
            v_th,
            v_reset: 0,
            immediate_current: false,
            bits: 8,
            weight,
            rate: 1.0,
            steps: 6,
            seed: 0,
        }
    }

    #[test]
    fn integrator_fires_every_third_step() {
        // 2, 4, 6 > 5 fires and keeps 1, then 3, 5, 7 fires again
        let t = trace(&if_neuron(2, 5)).unwrap();
        assert_eq!(t.v, vec![2, 4, 1, 3, 5, 2]);
        assert_eq!(t.spikes, vec![false, false, true, false, false, true]);
        assert_eq!(t.spike_count, 2);
    }

    #[test]
    fn weights_saturate_to_the_neuron_width() {
        let mut req = if_neuron(1000, 127);
        req.steps = 3;
        let t = trace(&req).unwrap();
        assert_eq!(t.v, vec![127, 127, 127]);
        assert_eq!(t.spike_count, 0);
    }

    #[test]
    fn leaky_neuron_trace_decays_without_input() {
        let mut req = if_neuron(64, 100);
        req.model = NeuronOrder::Lif1;
        req.beta_shift = Some(1);
        req.rate = 0.0;
        let t = trace(&req).unwrap();
        assert!(t.v.iter().all(|&v| v == 0));
        assert!(t.input.iter().all(|&s| !s));
    }

    #[test]
    fn mnist_latency_curve_ends_at_full_activity() {
        let req: LatencyRequest =
            serde_json::from_str(r#"{"widths": [784, 128, 10], "ff_bits": 4, "points": 5}"#).unwrap();
        let c = latency_curve(&req).unwrap();
        assert_eq!(c.activity, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        // idle floor: 100 x (1 + 2) cycles at 100 MHz
        assert!((c.latency_us[0] - 3.0).abs() < 1e-9);
        // 100 x (784 + 2 + 2) cycles
        assert!((c.latency_us[4] - 788.0).abs() < 1e-9);
        assert!(c.latency_us.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn mnist_brams_on_the_zynq() {
        let req: BramRequest =
            serde_json::from_str(r#"{"widths": [784, 128, 10], "ff_bits": 4, "device": "xc7z020"}"#).unwrap();
        let est = bram_estimate(&req).unwrap();
        assert_eq!(est.report.total_bram, 17);
        assert!(est.report.fits);
        assert!(est.max_hidden_neurons >= 128);
    }

    #[test]
    fn json_entry_points_report_errors_as_text() {
        let out = json::latency_curve(r#"{"widths": [784, 10], "ff_bits": 4, "clock_mhz": 50}"#).unwrap();
        assert!(out.starts_with(r#"{"activity":"#));
        assert!(
            json::bram_estimate(r#"{"widths": [4, 4], "ff_bits": 4, "device": "none"}"#)
                .unwrap_err()
                .contains("unknown device")
        );
        assert!(json::neuron_trace("{}").unwrap_err().starts_with("bad request"));
        assert!(device_names().iter().any(|d| d == "XC7Z020"));
    }
}
