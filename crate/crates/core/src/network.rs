//! Clock-driven multi-layer simulation with cycle accounting.
//!
//! Each layer updates all of its neurons in parallel and feeds input spikes
//! one at a time, so an active step costs one cycle per input (plus one per
//! feedback input when any feedback spike is present) and a handshake
//! overhead. A step with no spikes at all collapses into a single decay
//! cycle. Layers run concurrently, so a network step costs as much as its
//! slowest layer plus the network control unit's synchronization overhead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fxp::FxpFormat;
use crate::fxp::FxpValue;
use crate::neuron::{Kernel, NeuronSpec, NeuronState};
use crate::spikes::SpikeStream;

/// Row-major weights: one row per neuron, one column per input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    fmt: FxpFormat,
    data: Vec<i32>,
}

impl WeightMatrix {
    pub fn new(rows: usize, cols: usize, fmt: FxpFormat, data: Vec<i64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape("weight matrix", rows * cols, data.len()));
        }
        let data = data
            .into_iter()
            .map(|raw| {
                if fmt.contains(raw) {
                    Ok(raw as i32)
                } else {
                    Err(Error::OutOfRange { raw, bits: fmt.bits() })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows, cols, fmt, data })
    }

    pub fn zeros(rows: usize, cols: usize, fmt: FxpFormat) -> Self {
        Self {
            rows,
            cols,
            fmt,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, fmt: FxpFormat, mut f: impl FnMut(usize, usize) -> i64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(fmt.saturate(f(r, c)));
            }
        }
        Self { rows, cols, fmt, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn format(&self) -> FxpFormat {
        self.fmt
    }

    pub fn get(&self, row: usize, col: usize) -> i32 {
        self.data[row * self.cols + col]
    }

    pub fn value(&self, row: usize, col: usize) -> FxpValue {
        FxpValue::saturating(self.get(row, col) as i64, self.fmt)
    }

    pub fn row(&self, row: usize) -> &[i32] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[i32] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub n_inputs: usize,
    pub n_neurons: usize,
    pub neuron: NeuronSpec,
    pub w_ff: WeightMatrix,
    pub w_fb: Option<WeightMatrix>,
}

impl LayerSpec {
    pub fn new(neuron: NeuronSpec, w_ff: WeightMatrix, w_fb: Option<WeightMatrix>) -> Result<Self> {
        let layer = Self {
            n_inputs: w_ff.cols(),
            n_neurons: w_ff.rows(),
            neuron,
            w_ff,
            w_fb,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        self.neuron.validate()?;
        if self.w_ff.rows() != self.n_neurons {
            return Err(Error::shape(
                "feed-forward weight rows",
                self.n_neurons,
                self.w_ff.rows(),
            ));
        }
        if self.w_ff.cols() != self.n_inputs {
            return Err(Error::shape(
                "feed-forward weight columns",
                self.n_inputs,
                self.w_ff.cols(),
            ));
        }
        if let Some(fb) = &self.w_fb {
            if fb.rows() != self.n_neurons || fb.cols() != self.n_neurons {
                return Err(Error::shape(
                    "feedback weight matrix",
                    self.n_neurons * self.n_neurons,
                    fb.rows() * fb.cols(),
                ));
            }
        }
        Ok(())
    }

    pub fn is_recurrent(&self) -> bool {
        self.w_fb.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Propagation {
    /// Every layer consumes its predecessor's output from the previous step.
    #[default]
    Pipelined,
    /// Spikes traverse all layers within one step.
    Immediate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
    pub n_cycles: usize,
    #[serde(default)]
    pub propagation: Propagation,
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerSpec>, n_cycles: usize, propagation: Propagation) -> Result<Self> {
        let spec = Self {
            layers,
            n_cycles,
            propagation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::config("layers", "network has no layers"));
        }
        if self.n_cycles == 0 {
            return Err(Error::config("n_cycles", "must be at least 1"));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            layer.validate()?;
            if k > 0 && layer.n_inputs != self.layers[k - 1].n_neurons {
                return Err(Error::shape(
                    format!("layer {} inputs", k + 1),
                    self.layers[k - 1].n_neurons,
                    layer.n_inputs,
                ));
            }
        }
        Ok(())
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_inputs
    }

    pub fn n_outputs(&self) -> usize {
        self.layers.last().map_or(0, |l| l.n_neurons)
    }
}

/// Control overheads in clock cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleCosts {
    /// A layer step with no input or feedback spike: one decay cycle.
    pub idle: u64,
    /// Start/ready turnaround added to an active layer step.
    pub active: u64,
    /// Network control unit synchronization, once per step.
    pub network: u64,
}

impl Default for CycleCosts {
    fn default() -> Self {
        Self {
            idle: 1,
            active: 2,
            network: 2,
        }
    }
}

impl CycleCosts {
    /// Cycles a layer spends on one step given which spike groups were present.
    pub fn layer_step(&self, n_inputs: usize, n_feedback: usize, ff_active: bool, fb_active: bool) -> u64 {
        if !ff_active && !fb_active {
            return self.idle;
        }
        let mut cycles = self.active;
        if ff_active {
            cycles += n_inputs as u64;
        }
        if fb_active {
            cycles += n_feedback as u64;
        }
        cycles
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Accumulator {
    /// Saturate into the neuron width after every addition.
    #[default]
    Saturating,
    /// Sum exactly, saturate once at the end.
    Wide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOptions {
    pub costs: CycleCosts,
    pub accumulator: Accumulator,
    /// Collapse silent steps into a single decay (the layer OR-gate).
    pub skip_empty: bool,
    pub record_output: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            costs: CycleCosts::default(),
            accumulator: Accumulator::Saturating,
            skip_empty: true,
            record_output: false,
        }
    }
}

/// Fractions of steps in which a layer saw at least one spike.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerActivity {
    /// Feed-forward input.
    pub ff: f64,
    /// Feedback input, for recurrent layers.
    pub fb: Option<f64>,
    /// Either of the two. `None` means unknown; estimators then assume
    /// independence of the two groups.
    pub any: Option<f64>,
}

impl LayerActivity {
    pub fn feed_forward(ff: f64) -> Self {
        Self {
            ff,
            fb: None,
            any: Some(ff),
        }
    }

    pub fn recurrent(ff: f64, fb: f64) -> Self {
        Self {
            ff,
            fb: Some(fb),
            any: None,
        }
    }

    pub fn any_or_independent(&self) -> f64 {
        match (self.any, self.fb) {
            (Some(any), _) => any,
            (None, Some(fb)) => 1.0 - (1.0 - self.ff) * (1.0 - fb),
            (None, None) => self.ff,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub out_counts: Vec<u32>,
    pub predicted_cycles: u64,
    pub per_layer_activity: Vec<LayerActivity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_spikes: Option<SpikeStream>,
}

impl RunReport {
    pub fn latency_secs(&self, f_clk_hz: f64) -> f64 {
        self.predicted_cycles as f64 / f_clk_hz
    }

    pub fn classify(&self) -> Result<Classification> {
        classify(&self.out_counts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub class: usize,
    /// Every output counter was zero; `class` is then 0 by convention.
    pub no_activity: bool,
}

/// Most active output wins; ties go to the lowest index.
pub fn classify(counts: &[u32]) -> Result<Classification> {
    if counts.is_empty() {
        return Err(Error::Usage("cannot classify an empty counter bank".into()));
    }
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    Ok(Classification {
        class: best,
        no_activity: counts.iter().all(|&c| c == 0),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerStep {
    pub out_spikes: Vec<bool>,
    pub consumed_cycles: u64,
}

/// Updates one layer for one step. `states` is updated in place.
pub fn step_layer(
    layer: &LayerSpec,
    states: &mut [NeuronState],
    in_spikes: &[bool],
    fb_spikes: Option<&[bool]>,
    opts: &SimOptions,
) -> Result<LayerStep> {
    check_layer_io(layer, states.len(), in_spikes, fb_spikes)?;
    let kernel = Kernel::new(&layer.neuron);
    let fmt = kernel.format();
    for s in states.iter() {
        if s.v_m.format() != fmt || s.i_syn.format() != fmt {
            return Err(Error::FormatMismatch {
                left: fmt.bits(),
                right: s.v_m.format().bits(),
            });
        }
    }
    let mut v: Vec<i32> = states.iter().map(|s| s.v_m.raw()).collect();
    let mut i: Vec<i32> = states.iter().map(|s| s.i_syn.raw()).collect();
    let mut out = vec![false; layer.n_neurons];
    let cycles = advance_layer(layer, &kernel, &mut v, &mut i, in_spikes, fb_spikes, opts, &mut out);
    for (k, s) in states.iter_mut().enumerate() {
        s.v_m = FxpValue::saturating(v[k] as i64, fmt);
        s.i_syn = FxpValue::saturating(i[k] as i64, fmt);
    }
    Ok(LayerStep {
        out_spikes: out,
        consumed_cycles: cycles,
    })
}

fn check_layer_io(layer: &LayerSpec, n_states: usize, in_spikes: &[bool], fb_spikes: Option<&[bool]>) -> Result<()> {
    if n_states != layer.n_neurons {
        return Err(Error::shape("neuron states", layer.n_neurons, n_states));
    }
    if in_spikes.len() != layer.n_inputs {
        return Err(Error::shape("input spikes", layer.n_inputs, in_spikes.len()));
    }
    match (layer.is_recurrent(), fb_spikes) {
        (true, Some(fb)) if fb.len() != layer.n_neurons => {
            Err(Error::shape("feedback spikes", layer.n_neurons, fb.len()))
        }
        (true, None) => Err(Error::Usage("recurrent layer needs feedback spikes".into())),
        (false, Some(_)) => Err(Error::Usage("feedback spikes given to a feed-forward layer".into())),
        _ => Ok(()),
    }
}

#[allow(clippy::too_many_arguments)]
fn advance_layer(
    layer: &LayerSpec,
    kernel: &Kernel,
    v: &mut [i32],
    i: &mut [i32],
    in_spikes: &[bool],
    fb_spikes: Option<&[bool]>,
    opts: &SimOptions,
    out: &mut [bool],
) -> u64 {
    let fmt = kernel.format();
    let ff_active = in_spikes.iter().any(|&s| s);
    let fb_active = fb_spikes.is_some_and(|fb| fb.iter().any(|&s| s));
    let cycles = opts
        .costs
        .layer_step(layer.n_inputs, layer.n_neurons, ff_active, fb_active);

    let silent = !ff_active && !fb_active;
    for n in 0..layer.n_neurons {
        let input = if silent && opts.skip_empty {
            0
        } else {
            let ff = layer.w_ff.row(n).iter().zip(in_spikes);
            let fb = layer.w_fb.as_ref().zip(fb_spikes).map(|(w, s)| w.row(n).iter().zip(s));
            let gated = ff
                .chain(fb.into_iter().flatten())
                .map(|(&w, &s)| if s { fmt.saturate(w as i64) } else { 0 });
            match opts.accumulator {
                Accumulator::Saturating => gated.fold(0, |acc, w| fmt.add(acc, w)),
                Accumulator::Wide => fmt.saturate(gated.map(i64::from).sum()),
            }
        };
        let (vm, is) = kernel.integrate(v[n], i[n], input);
        let (vm, spike) = kernel.fire(vm);
        v[n] = vm;
        i[n] = is;
        out[n] = spike;
    }
    cycles
}

/// What happened in one network step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    pub layer_cycles: Vec<u64>,
    /// Slowest layer plus network overhead.
    pub cycles: u64,
}

/// Stateful stepper over a network; all state starts at zero.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    spec: &'a NetworkSpec,
    opts: SimOptions,
    kernels: Vec<Kernel>,
    v: Vec<Vec<i32>>,
    i: Vec<Vec<i32>>,
    outputs: Vec<Vec<bool>>,
    scratch: Vec<Vec<bool>>,
    steps: usize,
    cycles: u64,
    counts: Vec<u32>,
    active_ff: Vec<u64>,
    active_fb: Vec<u64>,
    active_any: Vec<u64>,
    recorded: Option<SpikeStream>,
}

impl<'a> Simulator<'a> {
    pub fn new(spec: &'a NetworkSpec, opts: SimOptions) -> Self {
        let sizes: Vec<usize> = spec.layers.iter().map(|l| l.n_neurons).collect();
        let zeros_i32 = || sizes.iter().map(|&n| vec![0; n]).collect::<Vec<_>>();
        let zeros_bool = || sizes.iter().map(|&n| vec![false; n]).collect::<Vec<_>>();
        let n_layers = spec.layers.len();
        Self {
            spec,
            opts,
            kernels: spec.layers.iter().map(|l| Kernel::new(&l.neuron)).collect(),
            v: zeros_i32(),
            i: zeros_i32(),
            outputs: zeros_bool(),
            scratch: zeros_bool(),
            steps: 0,
            cycles: 0,
            counts: vec![0; spec.n_outputs()],
            active_ff: vec![0; n_layers],
            active_fb: vec![0; n_layers],
            active_any: vec![0; n_layers],
            recorded: opts.record_output.then(|| SpikeStream::zeros(spec.n_outputs(), 0)),
        }
    }

    pub fn step(&mut self, input: &[bool]) -> Result<StepOutcome> {
        if input.len() != self.spec.n_inputs() {
            return Err(Error::shape("input spikes", self.spec.n_inputs(), input.len()));
        }
        let mut layer_cycles = Vec::with_capacity(self.spec.layers.len());
        for (k, layer) in self.spec.layers.iter().enumerate() {
            let mut out = std::mem::take(&mut self.scratch[k]);
            // Pipelined layers read last step's upstream output; immediate ones
            // read the output produced earlier in this step. Both live in
            // `outputs` until they are swapped with `scratch` at the end.
            let upstream: &[bool] = if k == 0 {
                input
            } else {
                match self.spec.propagation {
                    Propagation::Pipelined => &self.outputs[k - 1],
                    Propagation::Immediate => &self.scratch[k - 1],
                }
            };
            let feedback = layer.is_recurrent().then_some(self.outputs[k].as_slice());

            let ff_active = upstream.iter().any(|&s| s);
            let fb_active = feedback.is_some_and(|fb| fb.iter().any(|&s| s));
            self.active_ff[k] += ff_active as u64;
            self.active_fb[k] += fb_active as u64;
            self.active_any[k] += (ff_active || fb_active) as u64;

            let cycles = advance_layer(
                layer,
                &self.kernels[k],
                &mut self.v[k],
                &mut self.i[k],
                upstream,
                feedback,
                &self.opts,
                &mut out,
            );
            self.scratch[k] = out;
            layer_cycles.push(cycles);
        }
        std::mem::swap(&mut self.outputs, &mut self.scratch);

        let last = self.outputs.last().expect("validated network has layers");
        for (c, &s) in self.counts.iter_mut().zip(last) {
            *c += s as u32;
        }
        if let Some(rec) = &mut self.recorded {
            rec.push_step(last)?;
        }
        let cycles = layer_cycles.iter().copied().max().unwrap_or(0) + self.opts.costs.network;
        self.cycles += cycles;
        self.steps += 1;
        Ok(StepOutcome { layer_cycles, cycles })
    }

    /// Output spikes of every layer from the most recent step.
    pub fn layer_outputs(&self) -> &[Vec<bool>] {
        &self.outputs
    }

    pub fn layer_states(&self, layer: usize) -> Vec<NeuronState> {
        let fmt = self.kernels[layer].format();
        self.v[layer]
            .iter()
            .zip(&self.i[layer])
            .map(|(&v, &i)| NeuronState {
                v_m: FxpValue::saturating(v as i64, fmt),
                i_syn: FxpValue::saturating(i as i64, fmt),
            })
            .collect()
    }

    pub fn states(&self) -> Vec<Vec<NeuronState>> {
        (0..self.spec.layers.len()).map(|k| self.layer_states(k)).collect()
    }

    pub fn steps_done(&self) -> usize {
        self.steps
    }

    pub fn finish(self) -> RunReport {
        let steps = self.steps.max(1) as f64;
        let per_layer_activity = self
            .spec
            .layers
            .iter()
            .enumerate()
            .map(|(k, layer)| LayerActivity {
                ff: self.active_ff[k] as f64 / steps,
                fb: layer.is_recurrent().then(|| self.active_fb[k] as f64 / steps),
                any: Some(self.active_any[k] as f64 / steps),
            })
            .collect();
        RunReport {
            out_counts: self.counts,
            predicted_cycles: self.cycles,
            per_layer_activity,
            out_spikes: self.recorded,
        }
    }
}

/// Simulates a full inference of `spec.n_cycles` steps from the zero state.
pub fn run(spec: &NetworkSpec, input: &SpikeStream, opts: &SimOptions) -> Result<RunReport> {
    if input.n_channels() != spec.n_inputs() {
        return Err(Error::shape("input channels", spec.n_inputs(), input.n_channels()));
    }
    if input.n_steps() != spec.n_cycles {
        return Err(Error::shape("input steps", spec.n_cycles, input.n_steps()));
    }
    let mut sim = Simulator::new(spec, *opts);
    for row in input.steps() {
        sim.step(row)?;
    }
    Ok(sim.finish())
}

/// Runs independent inferences, in parallel when the `parallel` feature is on.
pub fn run_batch(spec: &NetworkSpec, inputs: &[SpikeStream], opts: &SimOptions) -> Result<Vec<RunReport>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        inputs.par_iter().map(|x| run(spec, x, opts)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        inputs.iter().map(|x| run(spec, x, opts)).collect()
    }
}

/// Per-layer activity averaged over a batch of inputs.
pub fn measure_activity(spec: &NetworkSpec, inputs: &[SpikeStream], opts: &SimOptions) -> Result<Vec<LayerActivity>> {
    if inputs.is_empty() {
        return Err(Error::Usage("activity needs at least one input".into()));
    }
    let reports = run_batch(spec, inputs, opts)?;
    Ok(mean_activity(&reports))
}

pub fn mean_activity(reports: &[RunReport]) -> Vec<LayerActivity> {
    let n = reports.len().max(1) as f64;
    let Some(first) = reports.first() else {
        return Vec::new();
    };
    (0..first.per_layer_activity.len())
        .map(|k| {
            let sum = |f: &dyn Fn(&LayerActivity) -> Option<f64>| -> Option<f64> {
                reports
                    .iter()
                    .map(|r| f(&r.per_layer_activity[k]))
                    .sum::<Option<f64>>()
                    .map(|s| s / n)
            };
            LayerActivity {
                ff: sum(&|a| Some(a.ff)).unwrap_or(0.0),
                fb: sum(&|a| a.fb),
                any: sum(&|a| a.any),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuron::{NeuronModel, NeuronOrder, ResetMode};

    fn fmt(bits: u32) -> FxpFormat {
        FxpFormat::new(bits).unwrap()
    }

    fn if_layer(weights: &[&[i64]], v_th: i64, fb: Option<&[&[i64]]>) -> LayerSpec {
        let rows = weights.len();
        let cols = weights[0].len();
        let neuron = NeuronSpec::new(
            NeuronModel::new(NeuronOrder::If, ResetMode::Subtractive),
            None,
            None,
            v_th,
            fmt(8),
        )
        .unwrap();
        let w_ff = WeightMatrix::new(rows, cols, fmt(4), weights.concat()).unwrap();
        let w_fb = fb.map(|m| WeightMatrix::new(rows, rows, fmt(4), m.concat()).unwrap());
        LayerSpec::new(neuron, w_ff, w_fb).unwrap()
    }

    #[test]
    fn silent_step_costs_one_cycle() {
        let neuron = NeuronSpec::new(
            NeuronModel::new(NeuronOrder::Lif1, ResetMode::Static),
            None,
            Some(1),
            50,
            fmt(8),
        )
        .unwrap();
        let layer = LayerSpec::new(neuron, WeightMatrix::zeros(2, 3, fmt(4)), None).unwrap();
        let mut states = vec![
            NeuronState {
                v_m: FxpValue::new(40, fmt(8)).unwrap(),
                ..NeuronState::zero(fmt(8))
            },
            NeuronState::zero(fmt(8)),
        ];
        let step = step_layer(&layer, &mut states, &[false; 3], None, &SimOptions::default()).unwrap();
        assert_eq!(step.consumed_cycles, 1);
        assert_eq!(step.out_spikes, vec![false, false]);
        assert_eq!(states[0].v_m.raw(), 20);
    }

    #[test]
    fn if_neuron_fires_on_second_step() {
        let layer = if_layer(&[&[3]], 5, None);
        let mut states = vec![NeuronState::zero(fmt(8))];
        let opts = SimOptions::default();
        let s1 = step_layer(&layer, &mut states, &[true], None, &opts).unwrap();
        assert_eq!((s1.out_spikes[0], states[0].v_m.raw()), (false, 3));
        assert_eq!(s1.consumed_cycles, 1 + 2);
        let s2 = step_layer(&layer, &mut states, &[true], None, &opts).unwrap();
        assert_eq!((s2.out_spikes[0], states[0].v_m.raw()), (true, 1));
    }

    #[test]
    fn feedback_term_is_accumulated() {
        let layer = if_layer(&[&[0], &[0]], 100, Some(&[&[0, 0], &[-4, 0]]));
        let mut states = vec![NeuronState::zero(fmt(8)); 2];
        let step = step_layer(
            &layer,
            &mut states,
            &[false],
            Some(&[true, false]),
            &SimOptions::default(),
        )
        .unwrap();
        assert_eq!(states[1].v_m.raw(), -4);
        assert_eq!(states[0].v_m.raw(), 0);
        // feedback only: n_neurons + handshake
        assert_eq!(step.consumed_cycles, 2 + 2);
    }

    #[test]
    fn step_layer_shape_errors() {
        let layer = if_layer(&[&[1, 1]], 5, None);
        let mut states = vec![NeuronState::zero(fmt(8))];
        let opts = SimOptions::default();
        assert!(matches!(
            step_layer(&layer, &mut states, &[true], None, &opts),
            Err(Error::Shape { .. })
        ));
        assert!(step_layer(&layer, &mut states, &[true, true], Some(&[true]), &opts).is_err());
        let rec = if_layer(&[&[1]], 5, Some(&[&[1]]));
        assert!(step_layer(&rec, &mut states, &[true], None, &opts).is_err());
        assert!(step_layer(&rec, &mut states, &[true], Some(&[true, false]), &opts).is_err());
    }

    #[test]
    fn saturating_and_wide_accumulators_differ() {
        // 7 + 7 + (-8) saturates at 7 after the second add in 4-bit-wide neurons.
        let neuron = NeuronSpec::new(
            NeuronModel::new(NeuronOrder::If, ResetMode::Static),
            None,
            None,
            7,
            fmt(4),
        )
        .unwrap();
        let layer = LayerSpec::new(neuron, WeightMatrix::new(1, 3, fmt(4), vec![7, 7, -8]).unwrap(), None).unwrap();
        let mut sat = vec![NeuronState::zero(fmt(4))];
        step_layer(&layer, &mut sat, &[true; 3], None, &SimOptions::default()).unwrap();
        let mut wide = vec![NeuronState::zero(fmt(4))];
        let opts = SimOptions {
            accumulator: Accumulator::Wide,
            ..Default::default()
        };
        step_layer(&layer, &mut wide, &[true; 3], None, &opts).unwrap();
        assert_eq!((sat[0].v_m.raw(), wide[0].v_m.raw()), (-1, 6));
    }

    #[test]
    fn zero_input_run() {
        let spec = NetworkSpec::new(
            vec![if_layer(&[&[1, 2], &[3, 4]], 5, None), if_layer(&[&[1, 1]], 5, None)],
            10,
            Propagation::Pipelined,
        )
        .unwrap();
        let report = run(&spec, &SpikeStream::zeros(2, 10), &SimOptions::default()).unwrap();
        assert_eq!(report.out_counts, vec![0]);
        assert_eq!(report.predicted_cycles, 10 * (1 + 2));
        assert!(report.per_layer_activity.iter().all(|a| a.ff == 0.0));
        assert!(report.classify().unwrap().no_activity);
    }

    #[test]
    fn run_rejects_shape_mismatch() {
        let spec = NetworkSpec::new(vec![if_layer(&[&[1, 2]], 5, None)], 4, Propagation::Pipelined).unwrap();
        assert!(run(&spec, &SpikeStream::zeros(3, 4), &SimOptions::default()).is_err());
        assert!(run(&spec, &SpikeStream::zeros(2, 5), &SimOptions::default()).is_err());
    }

    #[test]
    fn network_validation() {
        let a = if_layer(&[&[1, 2], &[3, 4]], 5, None);
        let b = if_layer(&[&[1, 1, 1]], 5, None);
        assert!(matches!(
            NetworkSpec::new(vec![a.clone(), b], 4, Propagation::Pipelined),
            Err(Error::Shape { .. })
        ));
        assert!(NetworkSpec::new(vec![a.clone()], 0, Propagation::Pipelined).is_err());
        assert!(NetworkSpec::new(vec![], 4, Propagation::Pipelined).is_err());
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&[0, 7, 3]).unwrap().class, 1);
        assert_eq!(
            classify(&[5, 5]).unwrap(),
            Classification {
                class: 0,
                no_activity: false
            }
        );
        assert_eq!(
            classify(&[0, 0, 0]).unwrap(),
            Classification {
                class: 0,
                no_activity: true
            }
        );
        assert!(classify(&[]).is_err());
    }

    #[test]
    fn activity_examples() {
        let spec = NetworkSpec::new(vec![if_layer(&[&[1; 4]], 100, None)], 8, Propagation::Pipelined).unwrap();
        let ones = SpikeStream::new(4, 8, vec![true; 32]).unwrap();
        let act = measure_activity(&spec, &[ones], &SimOptions::default()).unwrap();
        assert_eq!(act[0].ff, 1.0);
        let act = measure_activity(&spec, &[SpikeStream::zeros(4, 8)], &SimOptions::default()).unwrap();
        assert_eq!(act[0].ff, 0.0);
        assert!(measure_activity(&spec, &[], &SimOptions::default()).is_err());
    }

    #[test]
    fn independence_estimate_for_any_activity() {
        let a = LayerActivity::recurrent(0.5, 0.5);
        assert!((a.any_or_independent() - 0.75).abs() < 1e-12);
        assert_eq!(LayerActivity::feed_forward(0.3).any_or_independent(), 0.3);
    }
}
