//! Shared test helpers: a straightforward exact-integer reference simulator
//! and random network generators.
//!
//! The reference keeps every quantity in `i128`, recomputes each neuron from
//! the model equations on every step and only clamps where the datapath
//! defines a register width. It shares no code with the library simulator.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use snnforge_core::network::{Accumulator, LayerSpec, NetworkSpec, Propagation, WeightMatrix};
use snnforge_core::{FxpFormat, NeuronModel, NeuronOrder, NeuronSpec, ResetMode, SpikeStream};

pub fn clamp(x: i128, bits: u32) -> i128 {
    let hi = (1i128 << (bits - 1)) - 1;
    let lo = -(1i128 << (bits - 1));
    x.clamp(lo, hi)
}

/// `x - floor(x / 2^k)`.
pub fn leak(x: i128, k: u32) -> i128 {
    x - x.div_euclid(1i128 << k)
}

#[derive(Debug, Clone)]
struct RefLayer {
    n_in: usize,
    n: usize,
    bits: u32,
    second_order: bool,
    immediate: bool,
    alpha: Option<u32>,
    beta: Option<u32>,
    v_th: i128,
    v_reset: i128,
    subtractive: bool,
    w_ff: Vec<Vec<i128>>,
    w_fb: Option<Vec<Vec<i128>>>,
}

impl RefLayer {
    fn from_spec(l: &LayerSpec) -> Self {
        let n = &l.neuron;
        let matrix = |m: &WeightMatrix| -> Vec<Vec<i128>> {
            (0..m.rows())
                .map(|r| (0..m.cols()).map(|c| m.get(r, c) as i128).collect())
                .collect()
        };
        Self {
            n_in: l.n_inputs,
            n: l.n_neurons,
            bits: n.bits.bits(),
            second_order: n.model.order == NeuronOrder::Lif2 && n.alpha_shift.is_some(),
            immediate: n.immediate_current,
            alpha: n.alpha_shift,
            beta: if n.model.order == NeuronOrder::If {
                None
            } else {
                n.beta_shift
            },
            v_th: n.v_th.raw() as i128,
            v_reset: n.v_reset.raw() as i128,
            subtractive: n.model.reset == ResetMode::Subtractive,
            w_ff: matrix(&l.w_ff),
            w_fb: l.w_fb.as_ref().map(matrix),
        }
    }
}

/// Per-step snapshot of every layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefStep {
    pub spikes: Vec<Vec<bool>>,
    pub v: Vec<Vec<i128>>,
    pub i: Vec<Vec<i128>>,
}

pub struct Reference {
    layers: Vec<RefLayer>,
    immediate: bool,
    accumulator: Accumulator,
    v: Vec<Vec<i128>>,
    i: Vec<Vec<i128>>,
    out: Vec<Vec<bool>>,
}

impl Reference {
    pub fn new(spec: &NetworkSpec, accumulator: Accumulator) -> Self {
        let layers: Vec<RefLayer> = spec.layers.iter().map(RefLayer::from_spec).collect();
        let zeros = |l: &RefLayer| vec![0i128; l.n];
        Self {
            v: layers.iter().map(zeros).collect(),
            i: layers.iter().map(zeros).collect(),
            out: layers.iter().map(|l| vec![false; l.n]).collect(),
            immediate: spec.propagation == Propagation::Immediate,
            accumulator,
            layers,
        }
    }

    pub fn step(&mut self, input: &[bool]) -> RefStep {
        let previous = self.out.clone();
        for k in 0..self.layers.len() {
            let l = &self.layers[k];
            let upstream: Vec<bool> = if k == 0 {
                input.to_vec()
            } else if self.immediate {
                self.out[k - 1].clone()
            } else {
                previous[k - 1].clone()
            };
            assert_eq!(upstream.len(), l.n_in);
            let mut next = vec![false; l.n];
            for n in 0..l.n {
                let mut terms: Vec<i128> = Vec::new();
                for (c, &s) in upstream.iter().enumerate() {
                    if s {
                        terms.push(clamp(l.w_ff[n][c], l.bits));
                    }
                }
                if let Some(fb) = &l.w_fb {
                    for (c, &s) in previous[k].iter().enumerate() {
                        if s {
                            terms.push(clamp(fb[n][c], l.bits));
                        }
                    }
                }
                let x = match self.accumulator {
                    Accumulator::Saturating => terms.iter().fold(0, |acc, &t| clamp(acc + t, l.bits)),
                    Accumulator::Wide => clamp(terms.iter().sum(), l.bits),
                };
                let v_old = self.v[k][n];
                let i_old = self.i[k][n];
                let v_leaked = match l.beta {
                    Some(b) => leak(v_old, b),
                    None => v_old,
                };
                let (v_new, i_new) = if l.second_order {
                    let i_new = clamp(leak(i_old, l.alpha.unwrap()) + x, l.bits);
                    let drive = if l.immediate { i_new } else { i_old };
                    (clamp(v_leaked + drive, l.bits), i_new)
                } else {
                    (clamp(v_leaked + x, l.bits), i_old)
                };
                let fired = v_new > l.v_th;
                self.v[k][n] = match (fired, l.subtractive) {
                    (false, _) => v_new,
                    (true, true) => clamp(v_new - l.v_th, l.bits),
                    (true, false) => l.v_reset,
                };
                self.i[k][n] = i_new;
                next[n] = fired;
            }
            self.out[k] = next;
        }
        RefStep {
            spikes: self.out.clone(),
            v: self.v.clone(),
            i: self.i.clone(),
        }
    }

    pub fn run(spec: &NetworkSpec, input: &SpikeStream, accumulator: Accumulator) -> Vec<RefStep> {
        let mut r = Self::new(spec, accumulator);
        input.steps().map(|row| r.step(row)).collect()
    }
}

/// Output counts of the reference over a whole input.
pub fn reference_counts(spec: &NetworkSpec, input: &SpikeStream, accumulator: Accumulator) -> Vec<u32> {
    let mut counts = vec![0u32; spec.n_outputs()];
    for s in Reference::run(spec, input, accumulator) {
        for (c, &b) in counts.iter_mut().zip(s.spikes.last().unwrap()) {
            *c += b as u32;
        }
    }
    counts
}

pub struct NetShape {
    pub max_layers: usize,
    pub max_neurons: usize,
    pub neuron_bits: u32,
    pub max_weight_bits: u32,
    pub allow_recurrent: bool,
    pub nonnegative_threshold: bool,
}

fn random_neuron(rng: &mut ChaCha8Rng, shape: &NetShape, weight_scale: i64, fan_in: usize) -> NeuronSpec {
    let order = [NeuronOrder::If, NeuronOrder::Lif1, NeuronOrder::Lif2][rng.gen_range(0..3)];
    let reset = [ResetMode::Static, ResetMode::Subtractive][rng.gen_range(0..2)];
    let fmt = FxpFormat::new(shape.neuron_bits).unwrap();
    let shift = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.1) {
            rng.gen_range(1..=40)
        } else {
            rng.gen_range(1..=6)
        }
    };
    let beta = match order {
        NeuronOrder::If => None,
        _ => Some(shift(rng)),
    };
    let alpha = match order {
        NeuronOrder::Lif2 if rng.gen_bool(0.9) => Some(shift(rng)),
        _ => None,
    };
    let span = (weight_scale * fan_in.max(1) as i64 / 3).clamp(1, fmt.max());
    let lo = if shape.nonnegative_threshold { 0 } else { -span / 4 };
    let v_th = rng.gen_range(lo..=span);
    let mut n = NeuronSpec::new(NeuronModel::new(order, reset), alpha, beta, v_th, fmt).unwrap();
    if reset == ResetMode::Static && rng.gen_bool(0.5) {
        let r = rng.gen_range(-span / 2..=v_th.max(0));
        n = n.with_reset_value(r).unwrap();
    }
    if order == NeuronOrder::Lif2 {
        n = n.with_immediate_current(rng.gen_bool(0.3));
    }
    n
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bits: u32) -> WeightMatrix {
    let fmt = FxpFormat::new(bits).unwrap();
    // bias towards positive weights so that activity propagates
    WeightMatrix::from_fn(rows, cols, fmt, |_, _| {
        let w = rng.gen_range(fmt.min()..=fmt.max());
        if rng.gen_bool(0.3) {
            -w.abs() / 2
        } else {
            w.abs()
        }
    })
}

pub fn random_network(
    rng: &mut ChaCha8Rng,
    shape: &NetShape,
    n_cycles: usize,
    propagation: Propagation,
) -> NetworkSpec {
    let n_layers = rng.gen_range(1..=shape.max_layers);
    let mut n_in = rng.gen_range(1..=shape.max_neurons);
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let n = rng.gen_range(1..=shape.max_neurons);
        let ff_bits = rng.gen_range(2..=shape.max_weight_bits);
        let w_ff = random_matrix(rng, n, n_in, ff_bits);
        let w_fb = (shape.allow_recurrent && rng.gen_bool(0.4)).then(|| {
            let fb_bits = rng.gen_range(2..=shape.max_weight_bits);
            random_matrix(rng, n, n, fb_bits)
        });
        let scale = 1i64 << (ff_bits - 1);
        let neuron = random_neuron(rng, shape, scale, n_in);
        layers.push(LayerSpec::new(neuron, w_ff, w_fb).unwrap());
        n_in = n;
    }
    NetworkSpec::new(layers, n_cycles, propagation).unwrap()
}

pub fn random_input(rng: &mut ChaCha8Rng, channels: usize, steps: usize) -> SpikeStream {
    let p: f64 = rng.gen_range(0.05..0.7);
    let bits = (0..channels * steps).map(|_| rng.gen_bool(p)).collect();
    SpikeStream::new(channels, steps, bits).unwrap()
}
