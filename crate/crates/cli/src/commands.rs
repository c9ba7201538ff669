//! Subcommands other than `encode`.

use std::fs;
use std::path::Path;

use serde::Serialize;
use snnforge_core::codec::{self, Dataset, LoadedNetwork};
use snnforge_core::estimate::{self, DeviceCatalog, Geometry, ResourceReport};
use snnforge_core::hdlgen::{self, lint};
use snnforge_core::network::{self, LayerActivity};
use snnforge_core::quant::{self, QuantWidths, SweepDim, SweepResult};
use snnforge_core::{Error, NetworkSpec, Result, SimOptions};

use crate::{EstimateArgs, HdlArgs, QuantizeArgs, SimArgs, SweepArgs};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

/// A raster file becomes a one-sample dataset named after the file.
fn load_inputs(path: &Path) -> Result<Dataset> {
    if path.is_dir() {
        return codec::load_dataset(path);
    }
    let name = path
        .file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
    Ok(Dataset {
        names: vec![name],
        inputs: vec![codec::load_raster(path)?],
        labels: None,
    })
}

fn float_network(loaded: &LoadedNetwork) -> Result<&quant::FloatNetwork> {
    loaded.float().ok_or_else(|| Error::Config {
        field: "layers".into(),
        message: "this command needs real-valued weights; the config holds raw fixed-point weights".into(),
    })
}

pub fn validate(config: &Path) -> Result<()> {
    let loaded = codec::load_network(config)?;
    let spec = loaded.to_spec()?;
    let kind = if loaded.float().is_some() {
        "real-valued"
    } else {
        "fixed-point"
    };
    println!(
        "{}: {kind}, {} steps, {} propagation, {} inputs",
        loaded.name(),
        spec.n_cycles,
        format!("{:?}", spec.propagation).to_lowercase(),
        spec.n_inputs()
    );
    for (k, l) in spec.layers.iter().enumerate() {
        let n = &l.neuron;
        let fb = l
            .w_fb
            .as_ref()
            .map_or_else(String::new, |w| format!(", fb {} bits", w.format().bits()));
        println!(
            "  layer {}: {} {} neurons, {} bits, ff {} bits{fb}, v_th {}",
            k + 1,
            n.model,
            l.n_neurons,
            n.bits.bits(),
            l.w_ff.format().bits(),
            n.v_th.raw()
        );
    }
    Ok(())
}

pub fn quantize(args: QuantizeArgs) -> Result<()> {
    let loaded = codec::load_network(&args.config)?;
    let net = float_network(&loaded)?;
    let base = loaded.config.widths();
    let widths = QuantWidths {
        neuron: args.neuron_bits.unwrap_or(base.neuron),
        ff: args.ff_bits.unwrap_or(base.ff),
        fb: args.fb_bits.unwrap_or(base.fb),
    };
    let q = quant::quantize(net, widths)?;
    for w in &q.warnings {
        log::warn!("{w}");
    }
    let scale_exp = i8::try_from(q.scale_exp)
        .map_err(|_| Error::Usage(format!("scale exponent {} does not fit a weight file", q.scale_exp)))?;
    let name = args.name.unwrap_or_else(|| loaded.name().to_string());
    let path = codec::store_fixed_network(&q.spec, &name, scale_exp, &args.out)?;
    println!("scale 2^{}; wrote {}", q.scale_exp, path.display());
    Ok(())
}

#[derive(Serialize)]
struct SampleReport {
    name: String,
    class: usize,
    no_activity: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<usize>,
    out_counts: Vec<u32>,
    predicted_cycles: u64,
    latency_us: f64,
    per_layer_activity: Vec<LayerActivity>,
}

#[derive(Serialize)]
struct SimReport {
    network: String,
    propagation: snnforge_core::Propagation,
    clock_mhz: f64,
    samples: Vec<SampleReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    accuracy: Option<f64>,
    mean_latency_us: f64,
}

pub fn sim(args: SimArgs) -> Result<()> {
    let loaded = codec::load_network(&args.config)?;
    let mut spec = loaded.to_spec()?;
    if let Some(mode) = args.mode {
        spec.propagation = mode.into();
    }
    let data = load_inputs(&args.input)?;
    let opts = SimOptions {
        accumulator: args.accumulator.into(),
        skip_empty: !args.no_skip,
        ..SimOptions::default()
    };
    let reports = network::run_batch(&spec, &data.inputs, &opts)?;
    let f_clk = args.clock_mhz * 1e6;

    let mut samples = Vec::with_capacity(reports.len());
    for (k, (name, r)) in data.names.iter().zip(reports).enumerate() {
        let c = r.classify()?;
        let label = data.labels.as_ref().map(|l| l[k]);
        let latency_us = r.latency_secs(f_clk) * 1e6;
        println!(
            "{name}\tclass {}\tcycles {}\tlatency {latency_us:.1} us{}",
            c.class,
            r.predicted_cycles,
            if c.no_activity { "\tno-activity" } else { "" }
        );
        samples.push(SampleReport {
            name: name.clone(),
            class: c.class,
            no_activity: c.no_activity,
            label,
            out_counts: r.out_counts,
            predicted_cycles: r.predicted_cycles,
            latency_us,
            per_layer_activity: r.per_layer_activity,
        });
    }
    let accuracy = data.labels.as_ref().map(|_| {
        let correct = samples.iter().filter(|s| s.label == Some(s.class)).count();
        println!(
            "accuracy {:.4} ({correct}/{})",
            correct as f64 / samples.len() as f64,
            samples.len()
        );
        correct as f64 / samples.len() as f64
    });
    let mean_latency_us = samples.iter().map(|s| s.latency_us).sum::<f64>() / samples.len().max(1) as f64;
    println!("mean latency {mean_latency_us:.1} us at {} MHz", args.clock_mhz);

    if let Some(path) = &args.report {
        let report = SimReport {
            network: loaded.name().to_string(),
            propagation: spec.propagation,
            clock_mhz: args.clock_mhz,
            samples,
            accuracy,
            mean_latency_us,
        };
        write_json(path, &report)?;
    }
    Ok(())
}

/// `8,6,4` or `32-1` (either direction).
pub(crate) fn parse_widths(s: &str) -> Result<Vec<u32>> {
    let bad = || Error::Usage(format!("cannot parse width list `{s}`"));
    let num = |t: &str| t.trim().parse::<u32>().map_err(|_| bad());
    if let Some((a, b)) = s.split_once('-') {
        let (a, b) = (num(a)?, num(b)?);
        let (lo, hi) = (a.min(b), a.max(b));
        return Ok((lo..=hi).rev().collect());
    }
    s.split(',').map(num).collect()
}

#[derive(Serialize)]
struct SweepReport<'a> {
    network: &'a str,
    dimension: SweepDim,
    reference_widths: QuantWidths,
    samples: usize,
    #[serde(flatten)]
    result: &'a SweepResult,
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let loaded = codec::load_network(&args.config)?;
    let net = float_network(&loaded)?;
    let data = codec::load_dataset(&args.dataset)?;
    let samples = data
        .samples()
        .ok_or_else(|| Error::Usage(format!("{} has no labels.csv", args.dataset.display())))?;
    let widths = parse_widths(&args.widths)?;
    let dim: SweepDim = args.dim.into();
    let reference = loaded.config.widths();
    let result = quant::sweep(net, &samples, dim, &widths, reference, &SimOptions::default())?;

    let csv = result.to_csv();
    match &args.csv {
        Some(path) => fs::write(path, &csv).map_err(io_err(path))?,
        None => print!("{csv}"),
    }
    if let Some(path) = &args.json {
        let report = SweepReport {
            network: loaded.name(),
            dimension: dim,
            reference_widths: reference,
            samples: samples.len(),
            result: &result,
        };
        write_json(path, &report)?;
    }
    eprintln!("reference accuracy {:.4}", result.reference_accuracy);
    Ok(())
}

fn parse_activity(s: &str, spec: &NetworkSpec) -> Result<Vec<LayerActivity>> {
    let bad = || Error::Usage(format!("activity must be `FF` or `FF,FB` in [0, 1], got `{s}`"));
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    if parts.is_empty() || parts.len() > 2 || parts.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(bad());
    }
    Ok(spec
        .layers
        .iter()
        .map(|l| match (l.is_recurrent(), parts.get(1)) {
            (true, Some(&fb)) => LayerActivity::recurrent(parts[0], fb),
            (true, None) => LayerActivity::recurrent(parts[0], parts[0]),
            (false, _) => LayerActivity::feed_forward(parts[0]),
        })
        .collect())
}

#[derive(Serialize)]
struct EstimateReport {
    network: String,
    resources: ResourceReport,
    activity: Vec<LayerActivity>,
    activity_source: String,
    clock_mhz: f64,
    predicted_cycles: f64,
    latency_us: f64,
    /// Largest single hidden layer with this network's inputs, outputs and widths.
    max_hidden_neurons: usize,
}

pub fn estimate(args: EstimateArgs) -> Result<()> {
    let loaded = codec::load_network(&args.config)?;
    let spec = loaded.to_spec()?;
    let catalog = match &args.devices {
        Some(path) => DeviceCatalog::load(path)?,
        None => DeviceCatalog::builtin(),
    };
    let device = catalog.find(&args.device).ok_or_else(|| Error::Config {
        field: "device".into(),
        message: format!(
            "unknown device `{}`; known: {}",
            args.device,
            catalog
                .devices
                .iter()
                .map(|d| d.name.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    })?;
    let resources = estimate::estimate_network(&spec, device);

    let (activity, source) = match (&args.activity, &args.dataset) {
        (Some(a), _) => (parse_activity(a, &spec)?, format!("assumed {a}")),
        (None, Some(dir)) => {
            let data = codec::load_dataset(dir)?;
            let measured = network::measure_activity(&spec, &data.inputs, &SimOptions::default())?;
            (measured, format!("measured on {} samples", data.inputs.len()))
        }
        (None, None) => (
            parse_activity("1", &spec)?,
            "worst case (every step active)".to_string(),
        ),
    };
    let costs = SimOptions::default().costs;
    let cycles = estimate::predict_cycles(&Geometry::of(&spec), &activity, &costs)?;
    let latency_us = cycles / (args.clock_mhz * 1e6) * 1e6;
    let fb_bits = spec
        .layers
        .iter()
        .find_map(|l| l.w_fb.as_ref().map(|w| w.format().bits()));
    let max_hidden = estimate::max_hidden_neurons(
        device,
        spec.n_inputs(),
        spec.n_outputs(),
        spec.layers[0].w_ff.format().bits(),
        fb_bits,
    );

    print!("{resources}");
    println!("activity: {source}");
    println!(
        "predicted {cycles:.0} cycles, {latency_us:.1} us at {} MHz",
        args.clock_mhz
    );
    println!("largest single hidden layer on {}: {max_hidden} neurons", device.name);
    if let Some(path) = &args.json {
        let report = EstimateReport {
            network: loaded.name().to_string(),
            resources,
            activity,
            activity_source: source,
            clock_mhz: args.clock_mhz,
            predicted_cycles: cycles,
            latency_us,
            max_hidden_neurons: max_hidden,
        };
        write_json(path, &report)?;
    }
    Ok(())
}

pub fn hdl(args: HdlArgs) -> Result<()> {
    let loaded = codec::load_network(&args.config)?;
    let spec = loaded.to_spec()?;
    let name = args.name.unwrap_or_else(|| loaded.name().to_string());
    let bundle = match &args.stimulus {
        Some(path) => hdlgen::generate_with_stimulus(&spec, &name, &codec::load_raster(path)?)?,
        None => hdlgen::generate(&spec, &name)?,
    };
    let report = lint::check(&bundle)?;
    lint::check_memory_geometry(&bundle, &spec)?;
    let written = bundle.write_to(&args.out)?;
    for path in &written {
        println!("{}", path.display());
    }
    eprintln!(
        "{} files; lint clean: {} entities, {} instances, {} port widths checked",
        written.len(),
        report.entities,
        report.instances,
        report.checked_ports
    );
    Ok(())
}
