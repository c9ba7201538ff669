//! Narrow-width oracle runs, where saturation is the common case.

mod support;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snnforge_core::network::{self, Accumulator, Simulator};
use snnforge_core::{Propagation, SimOptions};
use support::{random_input, random_network, NetShape, Reference};

fn narrow() -> NetShape {
    NetShape {
        max_layers: 3,
        max_neurons: 8,
        neuron_bits: 4,
        max_weight_bits: 6,
        allow_recurrent: true,
        nonnegative_threshold: false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn narrow_networks_match_the_reference(seed in any::<u64>(), wide in any::<bool>(), immediate in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shape = narrow();
        shape.neuron_bits = rng.gen_range(2..=6);
        let steps = rng.gen_range(1..=20);
        let propagation = if immediate { Propagation::Immediate } else { Propagation::Pipelined };
        let spec = random_network(&mut rng, &shape, steps, propagation);
        let input = random_input(&mut rng, spec.n_inputs(), steps);
        let accumulator = if wide { Accumulator::Wide } else { Accumulator::Saturating };
        let opts = SimOptions { accumulator, ..SimOptions::default() };

        let mut sim = Simulator::new(&spec, opts);
        let expected = Reference::run(&spec, &input, accumulator);
        for (row, r) in input.steps().zip(&expected) {
            sim.step(row).unwrap();
            prop_assert_eq!(sim.layer_outputs(), r.spikes.as_slice());
            for k in 0..spec.layers.len() {
                let v: Vec<i128> = sim.layer_states(k).iter().map(|s| s.v_m.raw() as i128).collect();
                let i: Vec<i128> = sim.layer_states(k).iter().map(|s| s.i_syn.raw() as i128).collect();
                prop_assert_eq!(&v, &r.v[k]);
                prop_assert_eq!(&i, &r.i[k]);
            }
        }
        let report = network::run(&spec, &input, &opts).unwrap();
        prop_assert_eq!(report.out_counts, support::reference_counts(&spec, &input, accumulator));
    }
}
