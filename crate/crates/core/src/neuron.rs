//! Neuron update kernels: IF, first-order LIF and second-order LIF, each
//! with a static (hard) or subtractive reset.
//!
//! A step is split in two phases, mirroring the datapath: [`integrate`]
//! applies leak and the already-gated weighted input, then
//! [`fire_and_reset`] compares against the threshold (strictly greater) and
//! applies the reset to the stored state.
//!
//! Decay order within a step: the previous state is decayed first, then the
//! input is added.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fxp::{FxpFormat, FxpValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeuronOrder {
    /// Integrate-and-fire, no leak.
    If,
    /// First-order LIF: leaky membrane only.
    Lif1,
    /// Second-order LIF: leaky synaptic current feeding a leaky membrane.
    Lif2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResetMode {
    /// Membrane forced to `v_reset` on spike.
    Static,
    /// Threshold subtracted from the membrane on spike.
    Subtractive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NeuronModel {
    pub order: NeuronOrder,
    pub reset: ResetMode,
}

impl NeuronModel {
    pub const ALL: [NeuronModel; 6] = [
        NeuronModel::new(NeuronOrder::If, ResetMode::Static),
        NeuronModel::new(NeuronOrder::If, ResetMode::Subtractive),
        NeuronModel::new(NeuronOrder::Lif1, ResetMode::Static),
        NeuronModel::new(NeuronOrder::Lif1, ResetMode::Subtractive),
        NeuronModel::new(NeuronOrder::Lif2, ResetMode::Static),
        NeuronModel::new(NeuronOrder::Lif2, ResetMode::Subtractive),
    ];

    pub const fn new(order: NeuronOrder, reset: ResetMode) -> Self {
        Self { order, reset }
    }

    /// Short identifier used for generated entity names, e.g. `lif1_subtractive`.
    pub fn tag(&self) -> &'static str {
        match (self.order, self.reset) {
            (NeuronOrder::If, ResetMode::Static) => "if_static",
            (NeuronOrder::If, ResetMode::Subtractive) => "if_subtractive",
            (NeuronOrder::Lif1, ResetMode::Static) => "lif1_static",
            (NeuronOrder::Lif1, ResetMode::Subtractive) => "lif1_subtractive",
            (NeuronOrder::Lif2, ResetMode::Static) => "lif2_static",
            (NeuronOrder::Lif2, ResetMode::Subtractive) => "lif2_subtractive",
        }
    }
}

impl fmt::Display for NeuronModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Parameters shared by every neuron of a layer.
///
/// `alpha_shift` / `beta_shift` hold `k` for a decay factor `1 - 2^-k`. An
/// absent shift on a model that would use it stands for a zero constant and
/// is removed by [`reduce_model`]: LIF2 without `alpha_shift` is a LIF1, and
/// LIF1 without `beta_shift` is an IF.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeuronSpec {
    pub model: NeuronModel,
    pub alpha_shift: Option<u32>,
    pub beta_shift: Option<u32>,
    pub v_th: FxpValue,
    pub v_reset: FxpValue,
    pub bits: FxpFormat,
    /// Feed the freshly updated current into the membrane in the same step
    /// instead of the previous step's current (LIF2 only).
    #[serde(default)]
    pub immediate_current: bool,
}

impl NeuronSpec {
    /// A spec with `v_reset = 0` and registered (previous-step) current.
    pub fn new(
        model: NeuronModel,
        alpha_shift: Option<u32>,
        beta_shift: Option<u32>,
        v_th: i64,
        bits: FxpFormat,
    ) -> Result<Self> {
        let spec = Self {
            model,
            alpha_shift,
            beta_shift,
            v_th: FxpValue::new(v_th, bits)?,
            v_reset: FxpValue::zero(bits),
            bits,
            immediate_current: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_reset_value(mut self, v_reset: i64) -> Result<Self> {
        self.v_reset = FxpValue::new(v_reset, self.bits)?;
        Ok(self)
    }

    pub fn with_immediate_current(mut self, on: bool) -> Self {
        self.immediate_current = on;
        self
    }

    /// Checks the invariants that hold after model reduction.
    pub fn validate(&self) -> Result<()> {
        if self.model.order != NeuronOrder::Lif2 && self.alpha_shift.is_some() {
            return Err(Error::config(
                "alpha_shift",
                format!("not allowed for {} neurons", self.model.order_name()),
            ));
        }
        let reduced = reduce_model(self);
        let (needs_alpha, needs_beta) = match reduced.model.order {
            NeuronOrder::If => (false, false),
            NeuronOrder::Lif1 => (false, true),
            NeuronOrder::Lif2 => (true, true),
        };
        if reduced.alpha_shift.is_some() != needs_alpha {
            return Err(Error::config(
                "alpha_shift",
                format!("not allowed for {} neurons", self.model.order_name()),
            ));
        }
        if reduced.beta_shift.is_some() != needs_beta {
            return Err(Error::config(
                "beta_shift",
                format!("not allowed for {} neurons", self.model.order_name()),
            ));
        }
        for (field, shift) in [("alpha_shift", self.alpha_shift), ("beta_shift", self.beta_shift)] {
            if shift == Some(0) {
                return Err(Error::InvalidShift(0));
            }
            if let Some(k) = shift {
                if k > 63 {
                    return Err(Error::config(field, format!("shift {k} exceeds 63")));
                }
            }
        }
        for (field, v) in [("v_th", self.v_th), ("v_reset", self.v_reset)] {
            if v.format() != self.bits {
                return Err(Error::config(
                    field,
                    format!("{}-bit value in a {}-bit neuron", v.format().bits(), self.bits.bits()),
                ));
            }
        }
        Ok(())
    }
}

impl NeuronModel {
    fn order_name(&self) -> &'static str {
        match self.order {
            NeuronOrder::If => "IF",
            NeuronOrder::Lif1 => "LIF1",
            NeuronOrder::Lif2 => "LIF2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NeuronState {
    pub v_m: FxpValue,
    /// Synaptic current; stays zero for models without one.
    pub i_syn: FxpValue,
}

impl NeuronState {
    pub fn zero(bits: FxpFormat) -> Self {
        Self {
            v_m: FxpValue::zero(bits),
            i_syn: FxpValue::zero(bits),
        }
    }
}

/// Returns the simplest model with identical behavior.
pub fn reduce_model(spec: &NeuronSpec) -> NeuronSpec {
    let mut out = spec.clone();
    if out.model.order == NeuronOrder::Lif2 && out.alpha_shift.is_none() {
        out.model.order = NeuronOrder::Lif1;
        out.immediate_current = false;
    }
    if out.model.order == NeuronOrder::Lif1 && out.beta_shift.is_none() {
        out.model.order = NeuronOrder::If;
    }
    if out.model.order != NeuronOrder::Lif2 {
        out.alpha_shift = None;
        out.immediate_current = false;
    }
    out
}

/// Kernel over raw words, built from the reduced form of a spec.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Kernel {
    order: NeuronOrder,
    reset: ResetMode,
    alpha: u32,
    beta: u32,
    v_th: i32,
    v_reset: i32,
    fmt: FxpFormat,
    immediate: bool,
}

impl Kernel {
    pub(crate) fn new(spec: &NeuronSpec) -> Self {
        let spec = reduce_model(spec);
        Self {
            order: spec.model.order,
            reset: spec.model.reset,
            alpha: spec.alpha_shift.unwrap_or(0),
            beta: spec.beta_shift.unwrap_or(0),
            v_th: spec.v_th.raw(),
            v_reset: spec.v_reset.raw(),
            fmt: spec.bits,
            immediate: spec.immediate_current,
        }
    }

    pub(crate) fn format(&self) -> FxpFormat {
        self.fmt
    }

    /// Leak then add `input`; returns the new `(v_m, i_syn)`.
    #[inline]
    pub(crate) fn integrate(&self, v_m: i32, i_syn: i32, input: i32) -> (i32, i32) {
        let f = self.fmt;
        match self.order {
            NeuronOrder::If => (f.add(v_m, input), i_syn),
            NeuronOrder::Lif1 => (f.add(f.decay(v_m, self.beta), input), i_syn),
            NeuronOrder::Lif2 => {
                let i_next = f.add(f.decay(i_syn, self.alpha), input);
                let drive = if self.immediate { i_next } else { i_syn };
                (f.add(f.decay(v_m, self.beta), drive), i_next)
            }
        }
    }

    #[inline]
    pub(crate) fn fire(&self, v_m: i32) -> (i32, bool) {
        if v_m > self.v_th {
            let v = match self.reset {
                ResetMode::Static => self.v_reset,
                ResetMode::Subtractive => self.fmt.sub(v_m, self.v_th),
            };
            (v, true)
        } else {
            (v_m, false)
        }
    }
}

fn check_state(spec: &NeuronSpec, state: &NeuronState) -> Result<()> {
    for v in [state.v_m, state.i_syn] {
        if v.format() != spec.bits {
            return Err(Error::FormatMismatch {
                left: spec.bits.bits(),
                right: v.format().bits(),
            });
        }
    }
    Ok(())
}

/// Leak and accumulate one step of already weighted and summed input.
pub fn integrate(spec: &NeuronSpec, state: NeuronState, weighted_input: FxpValue) -> Result<NeuronState> {
    check_state(spec, &state)?;
    if weighted_input.format() != spec.bits {
        return Err(Error::FormatMismatch {
            left: spec.bits.bits(),
            right: weighted_input.format().bits(),
        });
    }
    let kernel = Kernel::new(spec);
    let (v, i) = kernel.integrate(state.v_m.raw(), state.i_syn.raw(), weighted_input.raw());
    Ok(NeuronState {
        v_m: FxpValue::saturating(v as i64, spec.bits),
        i_syn: FxpValue::saturating(i as i64, spec.bits),
    })
}

/// Threshold check and reset. The synaptic current is never reset.
pub fn fire_and_reset(spec: &NeuronSpec, state: NeuronState) -> (NeuronState, bool) {
    let kernel = Kernel::new(spec);
    let (v, spike) = kernel.fire(state.v_m.raw());
    (
        NeuronState {
            v_m: FxpValue::saturating(v as i64, state.v_m.format()),
            ..state
        },
        spike,
    )
}
