//! End-to-end runs of the `snnforge` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use snnforge_core::codec;
use snnforge_core::quant::synthetic;
use snnforge_core::SpikeStream;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn snnforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snnforge"))
        .args(args)
        .env_remove("SNNFORGE_DEVICES")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn validate_prints_topology() {
    let o = snnforge(&["validate", s(&configs().join("shd.json"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("700 inputs"), "{out}");
    assert!(out.contains("layer 2: lif2_subtractive 20 neurons"), "{out}");
}

#[test]
fn zero_raster_is_class_zero_with_no_activity() {
    let dir = tempfile::tempdir().unwrap();
    let raster = dir.path().join("zero.raster");
    codec::store_raster(&raster, &SpikeStream::zeros(784, 100)).unwrap();
    let o = snnforge(&["sim", s(&configs().join("mnist.json")), s(&raster)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("class 0") && out.contains("no-activity"), "{out}");
    assert!(out.contains("cycles 300"), "{out}");
}

#[test]
fn encoded_digit_runs_at_the_reported_latency() {
    let dir = tempfile::tempdir().unwrap();
    // a 28x28 ring, roughly the ink density of a handwritten zero
    let pixels: Vec<String> = (0..784)
        .map(|p| {
            let (r, c) = ((p / 28) as f64 - 13.5, (p % 28) as f64 - 13.5);
            let d = (r * r + c * c).sqrt();
            if (6.0..10.0).contains(&d) { "0.9" } else { "0" }.to_string()
        })
        .collect();
    let csv = dir.path().join("digit.csv");
    std::fs::write(&csv, format!("0,{}\n", pixels.join(","))).unwrap();
    let rasters = dir.path().join("rasters");
    let o = snnforge(&[
        "encode",
        s(&csv),
        "--labeled",
        "--steps",
        "100",
        "--seed",
        "3",
        "--out",
        s(&rasters),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let report = dir.path().join("report.json");
    let o = snnforge(&[
        "sim",
        s(&configs().join("mnist.json")),
        s(&rasters),
        "--report",
        s(&report),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let latency = read_json(&report)["samples"][0]["latency_us"].as_f64().unwrap();
    assert!((latency - 780.0).abs() / 780.0 < 0.05, "latency {latency} us");
    assert!(stdout(&o).contains("accuracy"));
}

#[test]
fn mismatched_raster_width_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let raster = dir.path().join("narrow.raster");
    codec::store_raster(&raster, &SpikeStream::zeros(700, 100)).unwrap();
    let o = snnforge(&["sim", s(&configs().join("mnist.json")), s(&raster)]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("expected 784") && err.contains("got 700"), "{err}");
}

#[test]
fn bad_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    let text = std::fs::read_to_string(configs().join("mnist.json"))
        .unwrap()
        .replace("\"n_inputs\": 128", "\"n_inputs\": 127");
    std::fs::write(&cfg, text).unwrap();
    let o = snnforge(&["validate", s(&cfg)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("layers[1]"), "{}", stderr(&o));

    std::fs::write(&cfg, "{ not json").unwrap();
    assert_eq!(snnforge(&["validate", s(&cfg)]).status.code(), Some(3));
}

#[test]
fn usage_errors_do_not_use_the_data_code() {
    let o = snnforge(&["sim"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(snnforge(&["--help"]).status.success());
}

#[test]
fn encode_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("v.csv");
    std::fs::write(&csv, "0.1,0.5,0.9\n0.3,0.3,0.3\n").unwrap();
    for (out, packed) in [("a", false), ("b", false), ("c", true)] {
        let mut args = vec!["encode", s(&csv), "--steps", "20", "--seed", "9", "--out"];
        let path = dir.path().join(out);
        args.push(s(&path));
        if packed {
            args.push("--packed");
        }
        assert!(snnforge(&args).status.success());
    }
    let a = codec::load_dataset(&dir.path().join("a")).unwrap();
    let b = codec::load_dataset(&dir.path().join("b")).unwrap();
    let c = codec::load_dataset(&dir.path().join("c")).unwrap();
    assert_eq!(a.inputs.len(), 2);
    assert_eq!(a.inputs, b.inputs);
    assert_eq!(a.inputs, c.inputs);
    assert_eq!(a.inputs[1], codec::rate_encode(&[0.3; 3], 20, 10).unwrap());
}

#[test]
fn encode_reads_labelled_images() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("img");
    std::fs::create_dir(&images).unwrap();
    for (name, level) in [("0_dark.png", 0u8), ("1_bright.png", 255)] {
        image::GrayImage::from_pixel(3, 2, image::Luma([level]))
            .save(images.join(name))
            .unwrap();
    }
    let out = dir.path().join("out");
    let o = snnforge(&["encode", s(&images), "--steps", "5", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let data = codec::load_dataset(&out).unwrap();
    assert_eq!(data.labels, Some(vec![0, 1]));
    assert_eq!(data.inputs[0].spike_count(), 0);
    assert_eq!(data.inputs[1].spike_count(), 30);
}

#[test]
fn sweep_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let samples = synthetic::samples(40, 77);
    let inputs: Vec<SpikeStream> = samples.iter().map(|s| s.input.clone()).collect();
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let data = dir.path().join("data");
    codec::store_dataset(&data, "s", &inputs, Some(&labels)).unwrap();

    let json = dir.path().join("sweep.json");
    let o = snnforge(&[
        "sweep",
        s(&configs().join("separable.json")),
        s(&data),
        "--dim",
        "ff",
        "--widths",
        "8,4,2",
        "--json",
        s(&json),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = stdout(&o);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "dimension,bits,accuracy");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("ff,4,"));
    let report = read_json(&json);
    assert_eq!(report["rows"].as_array().unwrap().len(), 3);
    assert_eq!(report["reference_accuracy"], report["rows"][0]["accuracy"]);

    // fixed-point configs cannot be swept
    let o = snnforge(&["sweep", s(&configs().join("mnist.json")), s(&data)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn estimate_reports_brams_and_latency() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("est.json");
    let o = snnforge(&["estimate", s(&configs().join("mnist.json")), "--json", s(&json)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_json(&json);
    assert_eq!(r["resources"]["total_bram"], 17);
    assert_eq!(r["predicted_cycles"].as_f64(), Some(78_800.0));

    let o = snnforge(&[
        "estimate",
        s(&configs().join("shd.json")),
        "--device",
        "xa7z020",
        "--activity",
        "0.48,0.93",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("52596 cycles"), "{}", stdout(&o));

    assert_eq!(
        snnforge(&["estimate", s(&configs().join("mnist.json")), "--device", "nope"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn device_catalog_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let catalog = dir.path().join("devices.json");
    std::fs::write(&catalog, r#"[{"name": "tiny", "avail_bram": 4}]"#).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_snnforge"))
        .args(["estimate", s(&configs().join("mnist.json")), "--device", "tiny"])
        .env("SNNFORGE_DEVICES", &catalog)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("tiny"), "{}", stdout(&o));
}

#[test]
fn hdl_writes_a_checked_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let stim = dir.path().join("stim.raster");
    codec::store_raster(&stim, &codec::rate_encode(&[0.5; 4], 20, 1).unwrap()).unwrap();
    let out = dir.path().join("hdl");
    let o = snnforge(&[
        "hdl",
        s(&configs().join("toy/toy.json")),
        "--out",
        s(&out),
        "--stimulus",
        s(&stim),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["toy_top.vhd", "toy_tb.vhd", "toy_l1_ff.mem", "toy_l2_ff.mem"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    assert!(stderr(&o).contains("lint clean"));
}

#[test]
fn quantized_config_runs_like_the_float_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q");
    let float_cfg = configs().join("separable.json");
    let o = snnforge(&["quantize", s(&float_cfg), "--out", s(&out), "--name", "sep"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fixed_cfg = out.join("sep.json");
    assert!(snnforge(&["validate", s(&fixed_cfg)]).status.success());

    let samples = synthetic::samples(6, 5);
    let data = dir.path().join("data");
    let inputs: Vec<SpikeStream> = samples.iter().map(|s| s.input.clone()).collect();
    codec::store_dataset(&data, "s", &inputs, None).unwrap();
    let a = snnforge(&["sim", s(&float_cfg), s(&data)]);
    let b = snnforge(&["sim", s(&fixed_cfg), s(&data)]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(stdout(&a), stdout(&b));
}
