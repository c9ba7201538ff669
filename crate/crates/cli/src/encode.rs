//! `encode`: real-valued vectors or grayscale images to rate-coded rasters.
//!
//! Sample `i` is encoded with seed `seed + i`, so a dataset is reproducible
//! from its first seed alone.

use std::fs;
use std::path::{Path, PathBuf};

use snnforge_core::codec;
use snnforge_core::{Error, Result};

use crate::EncodeArgs;

struct Vectors {
    values: Vec<Vec<f64>>,
    labels: Option<Vec<usize>>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn read_csv(path: &Path, labeled: bool) -> Result<Vectors> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        })?;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        let mut fields = record.iter();
        if labeled {
            let label = fields.next().unwrap_or_default();
            labels.push(
                label
                    .parse()
                    .map_err(|_| parse_err(line, format!("bad label `{label}`")))?,
            );
        }
        let row = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| parse_err(line, format!("bad value `{f}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = values.first().map(Vec::len) {
            if row.len() != first {
                return Err(parse_err(
                    line,
                    format!("{} values, previous rows have {first}", row.len()),
                ));
            }
        }
        values.push(row);
    }
    Ok(Vectors {
        values,
        labels: labeled.then_some(labels),
    })
}

/// `3_foo.png` is labelled 3. Labels are kept only if every image has one.
fn read_images(dir: &Path) -> Result<Vectors> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "pgm" | "pnm"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Usage(format!("no PNG or PGM images in {}", dir.display())));
    }
    let mut values = Vec::with_capacity(paths.len());
    let mut labels = Vec::with_capacity(paths.len());
    for p in &paths {
        let img = image::open(p)
            .map_err(|e| Error::Io {
                path: p.clone(),
                source: std::io::Error::other(e),
            })?
            .to_luma8();
        values.push(img.pixels().map(|px| px.0[0] as f64 / 255.0).collect::<Vec<_>>());
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        labels.push(stem.split('_').next().and_then(|l| l.parse::<usize>().ok()));
    }
    let width = values[0].len();
    if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| v.len() != width) {
        return Err(Error::Shape {
            what: format!("pixels in {}", paths[i].display()),
            expected: width,
            actual: v.len(),
        });
    }
    let labels = labels.into_iter().collect::<Option<Vec<_>>>();
    Ok(Vectors { values, labels })
}

pub fn run(args: EncodeArgs) -> Result<()> {
    let vectors = if args.input.is_dir() {
        read_images(&args.input)?
    } else {
        read_csv(&args.input, args.labeled)?
    };
    let rasters = vectors
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| codec::rate_encode(v, args.steps, args.seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let ext = if args.packed { "rasterb" } else { "raster" };
    let paths = codec::store_dataset_as(&args.out, &args.prefix, ext, &rasters, vectors.labels.as_deref())?;
    eprintln!(
        "encoded {} samples x {} steps into {}{}",
        paths.len(),
        args.steps,
        args.out.display(),
        if vectors.labels.is_some() {
            " with labels.csv"
        } else {
            ""
        }
    );
    Ok(())
}
