//! Float-to-fixed conversion and bit-width sweeps.
//!
//! A trained network is mapped onto integer words with one power-of-two
//! scale `2^f` shared by every weight, threshold and reset value, so the
//! membrane, weights and threshold keep a common interpretation. `f` is the
//! largest exponent for which every parameter still fits its own format.
//! Values are rounded to nearest (ties away from zero) and then saturated.
//! Decay constants are rounded to the nearest `1 - 2^-k`.

use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fxp::{FxpFormat, FxpValue, MAX_WIDTH};
use crate::network::{self, LayerSpec, NetworkSpec, Propagation, SimOptions, WeightMatrix};
use crate::neuron::{NeuronModel, NeuronOrder, NeuronSpec};
use crate::spikes::SpikeStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloatLayer {
    pub n_inputs: usize,
    pub n_neurons: usize,
    pub model: NeuronModel,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub v_th: f64,
    #[serde(default)]
    pub v_reset: f64,
    /// Row-major, `n_neurons x n_inputs`.
    pub w_ff: Vec<f64>,
    /// Row-major, `n_neurons x n_neurons`.
    pub w_fb: Option<Vec<f64>>,
    #[serde(default)]
    pub immediate_current: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloatNetwork {
    pub layers: Vec<FloatLayer>,
    pub n_cycles: usize,
    #[serde(default)]
    pub propagation: Propagation,
}

impl FloatNetwork {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::config("layers", "network has no layers"));
        }
        if self.n_cycles == 0 {
            return Err(Error::config("n_cycles", "must be at least 1"));
        }
        for (k, l) in self.layers.iter().enumerate() {
            let at = |f: &str| format!("layers[{k}].{f}");
            if k > 0 && l.n_inputs != self.layers[k - 1].n_neurons {
                return Err(Error::shape(
                    format!("layer {} inputs", k + 1),
                    self.layers[k - 1].n_neurons,
                    l.n_inputs,
                ));
            }
            if l.w_ff.len() != l.n_inputs * l.n_neurons {
                return Err(Error::shape(at("w_ff"), l.n_inputs * l.n_neurons, l.w_ff.len()));
            }
            if let Some(fb) = &l.w_fb {
                if fb.len() != l.n_neurons * l.n_neurons {
                    return Err(Error::shape(at("w_fb"), l.n_neurons * l.n_neurons, fb.len()));
                }
            }
            for (name, c) in [("alpha", l.alpha), ("beta", l.beta)] {
                if let Some(c) = c {
                    if !(c > 0.0 && c < 1.0) {
                        return Err(Error::config(at(name), format!("{c} outside (0, 1)")));
                    }
                }
            }
            let (alpha_ok, beta_ok) = match l.model.order {
                NeuronOrder::If => (l.alpha.is_none(), l.beta.is_none()),
                NeuronOrder::Lif1 => (l.alpha.is_none(), true),
                NeuronOrder::Lif2 => (true, true),
            };
            if !alpha_ok {
                return Err(Error::config(at("alpha"), "not used by this neuron model"));
            }
            if !beta_ok {
                return Err(Error::config(at("beta"), "not used by this neuron model"));
            }
            let all = l
                .w_ff
                .iter()
                .chain(l.w_fb.iter().flatten())
                .chain([&l.v_th, &l.v_reset]);
            if all.into_iter().any(|x| !x.is_finite()) {
                return Err(Error::config(at("weights"), "non-finite parameter"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuantWidths {
    pub neuron: u32,
    pub ff: u32,
    pub fb: u32,
}

impl QuantWidths {
    pub fn is_degenerate(&self) -> bool {
        self.neuron <= 1 || self.ff <= 1 || self.fb <= 1
    }
}

/// Nearest shift `k` such that `1 - 2^-k` approximates `c`, clamped to `[1, max_shift]`.
pub fn round_decay(c: f64, max_shift: u32) -> Result<u32> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::Usage(format!("decay constant {c} outside (0, 1)")));
    }
    let k = (-(1.0 - c).log2()).round();
    Ok((k as i64).clamp(1, max_shift.max(1) as i64) as u32)
}

/// The constant actually realized by a shift.
pub fn realized_decay(shift: u32) -> f64 {
    1.0 - (-(shift as f64)).exp2()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quantized {
    pub spec: NetworkSpec,
    /// Parameters were multiplied by `2^scale_exp` before rounding.
    pub scale_exp: i32,
    pub warnings: Vec<String>,
}

const SCALE_EXP_RANGE: (i32, i32) = (-60, 60);

/// Largest exponent that keeps every parameter inside its format, or `None`
/// when all parameters are zero.
pub fn select_scale_exp(net: &FloatNetwork, widths: QuantWidths) -> Option<i32> {
    let limit = |bits: u32| ((1i64 << (bits.clamp(1, MAX_WIDTH) - 1)) - 1).max(1) as f64;
    let mut best: Option<i32> = None;
    let mut constrain = |p: f64, bits: u32| {
        let a = p.abs();
        if a == 0.0 {
            return;
        }
        let lim = limit(bits);
        let mut f = (lim.log2() - a.log2()).floor() as i32;
        f = f.clamp(SCALE_EXP_RANGE.0, SCALE_EXP_RANGE.1);
        while f < SCALE_EXP_RANGE.1 && a * (f as f64 + 1.0).exp2() <= lim {
            f += 1;
        }
        while f > SCALE_EXP_RANGE.0 && a * (f as f64).exp2() > lim {
            f -= 1;
        }
        best = Some(best.map_or(f, |b| b.min(f)));
    };
    for l in &net.layers {
        l.w_ff.iter().for_each(|&w| constrain(w, widths.ff));
        l.w_fb.iter().flatten().for_each(|&w| constrain(w, widths.fb));
        constrain(l.v_th, widths.neuron);
        constrain(l.v_reset, widths.neuron);
    }
    best
}

fn to_raw(x: f64, scale: f64, fmt: FxpFormat) -> i64 {
    fmt.saturate((x * scale).round() as i64) as i64
}

pub fn quantize(net: &FloatNetwork, widths: QuantWidths) -> Result<Quantized> {
    net.validate()?;
    let mut warnings = Vec::new();
    let neuron_fmt = FxpFormat::new(widths.neuron)?;
    let ff_fmt = FxpFormat::new(widths.ff)?;
    let fb_fmt = FxpFormat::new(widths.fb)?;
    let scale_exp = select_scale_exp(net, widths).unwrap_or_else(|| {
        let msg = "all parameters are zero; using scale 1".to_string();
        warn!("{msg}");
        warnings.push(msg);
        0
    });
    let scale = (scale_exp as f64).exp2();

    let mut layers = Vec::with_capacity(net.layers.len());
    for l in &net.layers {
        let alpha_shift = l.alpha.map(|a| round_decay(a, widths.neuron)).transpose()?;
        let beta_shift = l.beta.map(|b| round_decay(b, widths.neuron)).transpose()?;
        let neuron = NeuronSpec {
            model: l.model,
            alpha_shift,
            beta_shift,
            v_th: FxpValue::saturating(to_raw(l.v_th, scale, neuron_fmt), neuron_fmt),
            v_reset: FxpValue::saturating(to_raw(l.v_reset, scale, neuron_fmt), neuron_fmt),
            bits: neuron_fmt,
            immediate_current: l.immediate_current,
        };
        let w_ff = WeightMatrix::new(
            l.n_neurons,
            l.n_inputs,
            ff_fmt,
            l.w_ff.iter().map(|&w| to_raw(w, scale, ff_fmt)).collect(),
        )?;
        let w_fb = l
            .w_fb
            .as_ref()
            .map(|fb| {
                WeightMatrix::new(
                    l.n_neurons,
                    l.n_neurons,
                    fb_fmt,
                    fb.iter().map(|&w| to_raw(w, scale, fb_fmt)).collect(),
                )
            })
            .transpose()?;
        layers.push(LayerSpec::new(neuron, w_ff, w_fb)?);
    }
    Ok(Quantized {
        spec: NetworkSpec::new(layers, net.n_cycles, net.propagation)?,
        scale_exp,
        warnings,
    })
}

/// One labeled inference sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub input: SpikeStream,
    pub label: usize,
}

/// Fraction of samples whose predicted class equals the label.
pub fn evaluate(spec: &NetworkSpec, samples: &[Sample], opts: &SimOptions) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Usage("evaluation set is empty".into()));
    }
    let inputs: Vec<SpikeStream> = samples.iter().map(|s| s.input.clone()).collect();
    let reports = network::run_batch(spec, &inputs, opts)?;
    let mut correct = 0usize;
    for (r, s) in reports.iter().zip(samples) {
        if r.classify()?.class == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepDim {
    Neuron,
    Ff,
    Fb,
    /// Joint grid over all three widths.
    Grid,
}

impl fmt::Display for SweepDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepDim::Neuron => "neuron",
            SweepDim::Ff => "ff",
            SweepDim::Fb => "fb",
            SweepDim::Grid => "grid",
        })
    }
}

impl std::str::FromStr for SweepDim {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neuron" => Ok(SweepDim::Neuron),
            "ff" => Ok(SweepDim::Ff),
            "fb" => Ok(SweepDim::Fb),
            "grid" => Ok(SweepDim::Grid),
            other => Err(Error::Usage(format!("unknown sweep dimension `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub dimension: SweepDim,
    pub neuron_bits: u32,
    pub ff_bits: u32,
    pub fb_bits: u32,
    pub accuracy: f64,
    /// A 1-bit format took part; such rows are reported but not meaningful.
    pub degenerate: bool,
}

impl SweepRow {
    fn widths(&self) -> QuantWidths {
        QuantWidths {
            neuron: self.neuron_bits,
            ff: self.ff_bits,
            fb: self.fb_bits,
        }
    }

    /// Width of the swept dimension.
    pub fn bits(&self) -> u32 {
        match self.dimension {
            SweepDim::Neuron | SweepDim::Grid => self.neuron_bits,
            SweepDim::Ff => self.ff_bits,
            SweepDim::Fb => self.fb_bits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub reference_accuracy: f64,
}

impl SweepResult {
    /// `dimension,bits,accuracy`; grid rows spell out all three widths as `n/ff/fb`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dimension,bits,accuracy\n");
        for r in &self.rows {
            let bits = match r.dimension {
                SweepDim::Grid => format!("{}/{}/{}", r.neuron_bits, r.ff_bits, r.fb_bits),
                _ => r.bits().to_string(),
            };
            out.push_str(&format!("{},{},{:.6}\n", r.dimension, bits, r.accuracy));
        }
        out
    }

    pub fn row(&self, widths: QuantWidths) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.widths() == widths)
    }
}

fn check_widths(widths: &[u32]) -> Result<()> {
    if widths.is_empty() {
        return Err(Error::Usage("width list is empty".into()));
    }
    if let Some(&w) = widths.iter().find(|&&w| !(1..=MAX_WIDTH).contains(&w)) {
        return Err(Error::InvalidWidth(w));
    }
    Ok(())
}

fn evaluate_points(
    net: &FloatNetwork,
    samples: &[Sample],
    points: Vec<QuantWidths>,
    opts: &SimOptions,
) -> Result<Vec<f64>> {
    let eval = |w: &QuantWidths| -> Result<f64> { evaluate(&quantize(net, *w)?.spec, samples, opts) };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        points.par_iter().map(eval).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        points.iter().map(eval).collect()
    }
}

/// One-at-a-time sweep of `dim` over `widths`, other widths held at `reference`.
pub fn sweep(
    net: &FloatNetwork,
    samples: &[Sample],
    dim: SweepDim,
    widths: &[u32],
    reference: QuantWidths,
    opts: &SimOptions,
) -> Result<SweepResult> {
    if samples.is_empty() {
        return Err(Error::Usage("evaluation set is empty".into()));
    }
    check_widths(widths)?;
    if dim == SweepDim::Grid {
        return sweep_grid(net, samples, widths, widths, widths, opts);
    }
    let mut unique: Vec<u32> = widths.to_vec();
    unique.sort_unstable_by(|a, b| b.cmp(a));
    unique.dedup();
    let points: Vec<QuantWidths> = unique
        .iter()
        .map(|&w| match dim {
            SweepDim::Neuron => QuantWidths { neuron: w, ..reference },
            SweepDim::Ff => QuantWidths { ff: w, ..reference },
            SweepDim::Fb => QuantWidths { fb: w, ..reference },
            SweepDim::Grid => unreachable!(),
        })
        .collect();
    let accuracies = evaluate_points(net, samples, points.clone(), opts)?;
    let rows: Vec<SweepRow> = points
        .iter()
        .zip(accuracies)
        .map(|(w, accuracy)| SweepRow {
            dimension: dim,
            neuron_bits: w.neuron,
            ff_bits: w.ff,
            fb_bits: w.fb,
            accuracy,
            degenerate: w.is_degenerate(),
        })
        .collect();
    // rows are sorted by descending width, so the first is the widest
    let reference_accuracy = rows[0].accuracy;
    Ok(SweepResult {
        rows,
        reference_accuracy,
    })
}

/// Full cartesian sweep; the reference point is the widest in every dimension.
pub fn sweep_grid(
    net: &FloatNetwork,
    samples: &[Sample],
    neuron: &[u32],
    ff: &[u32],
    fb: &[u32],
    opts: &SimOptions,
) -> Result<SweepResult> {
    if samples.is_empty() {
        return Err(Error::Usage("evaluation set is empty".into()));
    }
    for w in [neuron, ff, fb] {
        check_widths(w)?;
    }
    let sorted = |w: &[u32]| {
        let mut v = w.to_vec();
        v.sort_unstable_by(|a, b| b.cmp(a));
        v.dedup();
        v
    };
    let (neuron, ff, fb) = (sorted(neuron), sorted(ff), sorted(fb));
    let mut points = Vec::new();
    for &n in &neuron {
        for &f in &ff {
            for &b in &fb {
                points.push(QuantWidths {
                    neuron: n,
                    ff: f,
                    fb: b,
                });
            }
        }
    }
    let accuracies = evaluate_points(net, samples, points.clone(), opts)?;
    let rows: Vec<SweepRow> = points
        .iter()
        .zip(accuracies)
        .map(|(w, accuracy)| SweepRow {
            dimension: SweepDim::Grid,
            neuron_bits: w.neuron,
            ff_bits: w.ff,
            fb_bits: w.fb,
            accuracy,
            degenerate: w.is_degenerate(),
        })
        .collect();
    let reference_accuracy = rows[0].accuracy;
    Ok(SweepResult {
        rows,
        reference_accuracy,
    })
}

/// A small two-class task with hand-built weights.
///
/// Sixteen input channels form two groups of eight. A sample of class `k`
/// fires group `k` channels at rate 0.6 and the others at 0.05. Hidden
/// neurons 0..4 listen to group 0 and 4..8 to group 1 (excitatory inside
/// their group, inhibitory outside); output `k` is driven by the hidden
/// neurons of group `k`. Weights carry a small deterministic jitter so that
/// narrow formats actually lose information.
pub mod synthetic {
    use super::*;
    use crate::codec::rate_encode;
    use crate::neuron::ResetMode;
    use crate::rng::draw_unit;

    pub const N_CHANNELS: usize = 16;
    pub const N_HIDDEN: usize = 8;
    pub const N_CLASSES: usize = 2;
    pub const N_STEPS: usize = 40;

    fn jitter(seed: u64, index: usize) -> f64 {
        (draw_unit(seed, index as u64) - 0.5) * 0.1
    }

    pub fn network() -> FloatNetwork {
        let group = |c: usize, width: usize| c / width;
        let mut w1 = Vec::with_capacity(N_HIDDEN * N_CHANNELS);
        for h in 0..N_HIDDEN {
            for c in 0..N_CHANNELS {
                let base = if group(h, N_HIDDEN / 2) == group(c, N_CHANNELS / 2) {
                    0.4
                } else {
                    -0.2
                };
                w1.push(base + jitter(0x5EED_0001, h * N_CHANNELS + c));
            }
        }
        let mut w2 = Vec::with_capacity(N_CLASSES * N_HIDDEN);
        for k in 0..N_CLASSES {
            for h in 0..N_HIDDEN {
                let base = if group(h, N_HIDDEN / 2) == k { 0.6 } else { -0.4 };
                w2.push(base + jitter(0x5EED_0002, k * N_HIDDEN + h));
            }
        }
        let layer = |n_inputs, n_neurons, w_ff| FloatLayer {
            n_inputs,
            n_neurons,
            model: NeuronModel::new(NeuronOrder::Lif1, ResetMode::Subtractive),
            alpha: None,
            beta: Some(0.9),
            v_th: 1.0,
            v_reset: 0.0,
            w_ff,
            w_fb: None,
            immediate_current: false,
        };
        FloatNetwork {
            layers: vec![layer(N_CHANNELS, N_HIDDEN, w1), layer(N_HIDDEN, N_CLASSES, w2)],
            n_cycles: N_STEPS,
            propagation: Propagation::Pipelined,
        }
    }

    /// `n` samples alternating between the classes, encoded with seeds `seed + i`.
    pub fn samples(n: usize, seed: u64) -> Vec<Sample> {
        (0..n)
            .map(|i| {
                let label = i % N_CLASSES;
                let rates: Vec<f64> = (0..N_CHANNELS)
                    .map(|c| if c / (N_CHANNELS / 2) == label { 0.6 } else { 0.05 })
                    .collect();
                Sample {
                    input: rate_encode(&rates, N_STEPS, seed.wrapping_add(i as u64)).expect("rates are in [0, 1]"),
                    label,
                }
            })
            .collect()
    }

    pub const REFERENCE_WIDTHS: QuantWidths = QuantWidths {
        neuron: 6,
        ff: 4,
        fb: 4,
    };
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuron::ResetMode;
    use proptest::prelude::*;

    fn one_layer(w_ff: Vec<f64>, v_th: f64) -> FloatNetwork {
        FloatNetwork {
            layers: vec![FloatLayer {
                n_inputs: w_ff.len(),
                n_neurons: 1,
                model: NeuronModel::new(NeuronOrder::If, ResetMode::Subtractive),
                alpha: None,
                beta: None,
                v_th,
                v_reset: 0.0,
                w_ff,
                w_fb: None,
                immediate_current: false,
            }],
            n_cycles: 4,
            propagation: Propagation::Pipelined,
        }
    }

    #[test]
    fn round_decay_examples() {
        assert_eq!(round_decay(0.875, 8).unwrap(), 3);
        // -log2(0.1) = 3.32
        assert_eq!(round_decay(0.9, 8).unwrap(), 3);
        assert_eq!(round_decay(0.5, 8).unwrap(), 1);
        assert_eq!(round_decay(0.999999, 6).unwrap(), 6);
        assert_eq!(round_decay(0.01, 6).unwrap(), 1);
        assert!(round_decay(0.0, 8).is_err());
        assert!(round_decay(1.0, 8).is_err());
        assert!(round_decay(f64::NAN, 8).is_err());
        assert_eq!(realized_decay(3), 0.875);
    }

    #[test]
    fn quantize_examples() {
        let net = one_layer(vec![-1.0, 0.5, 0.25], 1.0);
        let q = quantize(
            &net,
            QuantWidths {
                neuron: 6,
                ff: 4,
                fb: 4,
            },
        )
        .unwrap();
        assert_eq!(q.scale_exp, 2);
        assert_eq!(q.spec.layers[0].w_ff.as_slice(), &[-4, 2, 1]);
        assert_eq!(q.spec.layers[0].neuron.v_th.raw(), 4);
    }

    #[test]
    fn out_of_format_weight_saturates() {
        // threshold pins the scale at 4; 10.0 * 4 does not fit 4 bits
        assert_eq!(to_raw(10.0, 4.0, FxpFormat::new(4).unwrap()), 7);
        assert_eq!(to_raw(-10.0, 4.0, FxpFormat::new(4).unwrap()), -8);
    }

    #[test]
    fn all_zero_network_warns() {
        let net = one_layer(vec![0.0, 0.0], 0.0);
        let q = quantize(
            &net,
            QuantWidths {
                neuron: 6,
                ff: 4,
                fb: 4,
            },
        )
        .unwrap();
        assert_eq!(q.scale_exp, 0);
        assert_eq!(q.warnings.len(), 1);
    }

    #[test]
    fn validation_errors() {
        let mut net = one_layer(vec![1.0], 1.0);
        net.layers[0].beta = Some(0.5);
        assert!(matches!(
            quantize(
                &net,
                QuantWidths {
                    neuron: 6,
                    ff: 4,
                    fb: 4
                }
            ),
            Err(Error::Config { .. })
        ));
        let mut net = one_layer(vec![1.0], 1.0);
        net.layers[0].model.order = NeuronOrder::Lif1;
        net.layers[0].beta = Some(1.5);
        assert!(quantize(
            &net,
            QuantWidths {
                neuron: 6,
                ff: 4,
                fb: 4
            }
        )
        .is_err());
        let net = one_layer(vec![f64::INFINITY], 1.0);
        assert!(net.validate().is_err());
        let net = one_layer(vec![1.0], 1.0);
        assert!(quantize(
            &net,
            QuantWidths {
                neuron: 33,
                ff: 4,
                fb: 4
            }
        )
        .is_err());
    }

    #[test]
    fn single_width_sweep_is_its_own_reference() {
        let net = synthetic::network();
        let samples = synthetic::samples(10, 1);
        let r = sweep(
            &net,
            &samples,
            SweepDim::Ff,
            &[16],
            synthetic::REFERENCE_WIDTHS,
            &SimOptions::default(),
        )
        .unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].accuracy, r.reference_accuracy);
        assert!(sweep(
            &net,
            &[],
            SweepDim::Ff,
            &[16],
            synthetic::REFERENCE_WIDTHS,
            &SimOptions::default()
        )
        .is_err());
        assert!(sweep(
            &net,
            &samples,
            SweepDim::Ff,
            &[],
            synthetic::REFERENCE_WIDTHS,
            &SimOptions::default()
        )
        .is_err());
        assert!(sweep(
            &net,
            &samples,
            SweepDim::Ff,
            &[40],
            synthetic::REFERENCE_WIDTHS,
            &SimOptions::default()
        )
        .is_err());
    }

    #[test]
    fn synthetic_task_degrades_gracefully() {
        let net = synthetic::network();
        let samples = synthetic::samples(60, 7);
        let r = sweep(
            &net,
            &samples,
            SweepDim::Ff,
            &[8, 4, 2],
            synthetic::REFERENCE_WIDTHS,
            &SimOptions::default(),
        )
        .unwrap();
        let acc = |bits| r.rows.iter().find(|row| row.ff_bits == bits).unwrap().accuracy;
        assert!(acc(4) >= 0.95, "4-bit accuracy {}", acc(4));
        assert!(acc(2) <= acc(8) + 0.02);
        assert_eq!(r.reference_accuracy, acc(8));
    }

    #[test]
    fn grid_sweep_and_csv() {
        let net = synthetic::network();
        let samples = synthetic::samples(6, 3);
        let r = sweep_grid(&net, &samples, &[6, 4], &[4], &[1], &SimOptions::default()).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(r.rows.iter().all(|row| row.degenerate));
        let csv = r.to_csv();
        assert!(csv.starts_with("dimension,bits,accuracy\ngrid,6/4/1,"));
    }

    proptest! {
        #[test]
        fn round_trip_error_is_half_a_step(ws in proptest::collection::vec(-3.0f64..3.0, 1..20), bits in 2u32..16) {
            let net = one_layer(ws.clone(), 0.5);
            let q = quantize(&net, QuantWidths { neuron: 16, ff: bits, fb: bits }).unwrap();
            let scale = (q.scale_exp as f64).exp2();
            for (k, &w) in ws.iter().enumerate() {
                let back = q.spec.layers[0].w_ff.as_slice()[k] as f64 / scale;
                prop_assert!((back - w).abs() <= 0.5 / scale + 1e-12);
            }
        }

        #[test]
        fn round_decay_is_monotone(a in 0.001f64..0.999, b in 0.001f64..0.999) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(round_decay(lo, 32).unwrap() <= round_decay(hi, 32).unwrap());
        }
    }
}
