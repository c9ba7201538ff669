//! Checks the shipped configurations and the cross-language parity fixture.

mod support;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use snnforge_core::codec::{self, WeightFile};
use snnforge_core::network::{self, Accumulator};
use snnforge_core::quant::synthetic;
use snnforge_core::SimOptions;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn expected_counts() -> BTreeMap<String, Vec<u32>> {
    let mut reader = csv::Reader::from_path(configs().join("toy/expected_counts.csv")).unwrap();
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            let counts = r.iter().skip(1).map(|c| c.parse().unwrap()).collect();
            (r[0].to_string(), counts)
        })
        .collect()
}

#[test]
fn toy_fixture_counts_match_the_exporter() {
    let spec = codec::load_network(&configs().join("toy/toy.json"))
        .unwrap()
        .to_spec()
        .unwrap();
    let data = codec::load_dataset(&configs().join("toy/rasters")).unwrap();
    let expected = expected_counts();
    assert_eq!(data.names.len(), expected.len());
    for (name, input) in data.names.iter().zip(&data.inputs) {
        let report = network::run(&spec, input, &SimOptions::default()).unwrap();
        assert_eq!(&report.out_counts, &expected[name], "{name}");
        assert_eq!(
            report.out_counts,
            support::reference_counts(&spec, input, Accumulator::Saturating)
        );
        // identity weights with a zero threshold relay every input spike
        let per_channel: Vec<u32> = (0..input.n_channels())
            .map(|c| input.steps().filter(|row| row[c]).count() as u32)
            .collect();
        assert_eq!(report.out_counts, per_channel, "{name}");
    }
}

#[test]
fn toy_weight_files_are_identities() {
    for k in 1..=2 {
        let w = WeightFile::load(&configs().join(format!("toy/toy_l{k}_ff.w"))).unwrap();
        assert_eq!((w.rows, w.cols), (4, 4));
        let unit = 1i64 << w.scale_exp;
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(w.values[r * 4 + c], if r == c { unit } else { 0 });
            }
        }
    }
}

#[test]
fn separable_config_is_the_synthetic_network() {
    let loaded = codec::load_network(&configs().join("separable.json")).unwrap();
    assert_eq!(loaded.float(), Some(&synthetic::network()));
}

#[test]
fn reference_configs_load() {
    for (name, widths) in [("mnist.json", vec![784, 128, 10]), ("shd.json", vec![700, 200, 20])] {
        let spec = codec::load_network(&configs().join(name)).unwrap().to_spec().unwrap();
        let mut shape = vec![spec.n_inputs()];
        shape.extend(spec.layers.iter().map(|l| l.n_neurons));
        assert_eq!(shape, widths, "{name}");
    }
}
