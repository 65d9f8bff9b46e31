use std::io::{self, Write};
use std::path::PathBuf;

use nalgebra::Vector3;
use serde::Deserialize;

use wavelet_map::tree::WaveletOctree;
use wavelet_map::units::Length;

use super::{load_map, parse_length, split_unit};
use crate::error::{CliError, CliResult};
use crate::Globals;

#[derive(Debug, clap::Args)]
#[command(group = clap::ArgGroup::new("where").required(true))]
pub struct Args {
    /// Map file.
    map: PathBuf,
    /// CSV of query points with header `x,y,z`, in meters.
    #[arg(long, group = "where")]
    points: Option<PathBuf>,
    /// Axis-aligned plane such as `z=1.2m`, sampled over the map extent.
    #[arg(long, group = "where", value_parser = parse_slice)]
    slice: Option<Slice>,
    /// Sample spacing within the slice; defaults to the finest cell width.
    #[arg(long, value_parser = parse_length, requires = "slice")]
    step: Option<Length>,
    /// Output CSV; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
pub struct Slice {
    axis: usize,
    offset: f64,
}

fn parse_slice(text: &str) -> Result<Slice, String> {
    let (axis, value) = text
        .split_once('=')
        .ok_or_else(|| format!("expected AXIS=VALUE such as z=1.2m, got {text:?}"))?;
    let axis = match axis.trim() {
        "x" => 0,
        "y" => 1,
        "z" => 2,
        other => return Err(format!("unknown axis {other:?}; use x, y or z")),
    };
    let offset = parse_length(&split_unit(value))?.0;
    Ok(Slice { axis, offset })
}

#[derive(Deserialize)]
struct PointRow {
    x: f64,
    y: f64,
    z: f64,
}

fn read_points(path: &PathBuf) -> CliResult<Vec<Vector3<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::file(path, e))?;
    reader
        .deserialize::<PointRow>()
        .map(|row| {
            let row = row.map_err(|e| CliError::file(path, e))?;
            Ok(Vector3::new(row.x, row.y, row.z))
        })
        .collect()
}

/// Cell-centred sample points covering the map's cube in the slice plane.
fn slice_points(map: &WaveletOctree, slice: Slice, step: f64) -> CliResult<Vec<Vector3<f64>>> {
    let config = map.config();
    let lo = config.origin[slice.axis];
    let hi = lo + config.root_width();
    if !(slice.offset >= lo && slice.offset < hi) {
        return Err(CliError::input(format!(
            "slice at {} m lies outside the map extent [{lo}, {hi}) m",
            slice.offset
        )));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(CliError::input("--step must be positive"));
    }
    let count = (config.root_width() / step).round().max(1.0) as usize;
    let (u, v) = match slice.axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let mut points = Vec::with_capacity(count * count);
    for j in 0..count {
        for i in 0..count {
            let mut p = Vector3::zeros();
            p[slice.axis] = slice.offset;
            p[u] = config.origin[u] + (i as f64 + 0.5) * step;
            p[v] = config.origin[v] + (j as f64 + 0.5) * step;
            points.push(p);
        }
    }
    Ok(points)
}

pub fn run(globals: &Globals, args: Args) -> CliResult<()> {
    let map = load_map(&args.map)?;
    let points = match (&args.points, args.slice) {
        (Some(path), _) => read_points(path)?,
        (None, Some(slice)) => {
            let step = args.step.map_or(map.config().min_cell_width, |s| s.0);
            slice_points(&map, slice, step)?
        }
        (None, None) => unreachable!("clap requires one of --points or --slice"),
    };
    let values = globals.exec.map_slice(&points, |p| map.query_point(p).value());

    let sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(std::fs::File::create(path).map_err(|e| CliError::file(path, e))?),
        None => Box::new(io::stdout().lock()),
    };
    match write_rows(sink, &points, &values) {
        // A closed pipe (e.g. `| head`) just means nobody wants the rest.
        Err(e) if matches!(e.kind(), csv::ErrorKind::Io(io) if io.kind() == io::ErrorKind::BrokenPipe) => Ok(()),
        other => other.map_err(io_err),
    }
}

fn write_rows(sink: Box<dyn Write>, points: &[Vector3<f64>], values: &[Option<f64>]) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["x", "y", "z", "log_odds", "inside"])?;
    for (p, value) in points.iter().zip(values) {
        let log_odds = value.map(|v| v.to_string()).unwrap_or_default();
        writer
            .write_record([
                p.x.to_string(),
                p.y.to_string(),
                p.z.to_string(),
                log_odds,
                value.is_some().to_string(),
            ])?;
    }
    writer.flush()?;
    Ok(())
}

fn io_err(e: csv::Error) -> CliError {
    CliError::input(format!("writing query output: {e}"))
}
