use std::path::PathBuf;
use std::time::Instant;

use wavelet_map::eval::split_frames;
use wavelet_map::integrator::{integrate, integrate_naive, IntegrateError, IntegrationStats};
use wavelet_map::observation::Observation;
use wavelet_map::tree::WaveletOctree;
use wavelet_map::units::Length;

use super::{load_log, parse_length};
use crate::config::Mode;
use crate::error::{write_file, CliError, CliResult};
use crate::{usage, Globals};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Observation log; repeat for several sensors. Frames from all logs are
    /// merged in timestamp order.
    #[arg(long = "log", required = true)]
    logs: Vec<PathBuf>,
    /// Output map file.
    #[arg(long, short)]
    out: PathBuf,
    /// Integration method for every log, overriding the config.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Log-odds tolerance for early termination, overriding the config.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Finest update resolution such as `5cm`, overriding the config.
    #[arg(long, value_parser = parse_length)]
    resolution: Option<Length>,
    /// Leave out the frames `eval` holds out for testing.
    #[arg(long)]
    train_only: bool,
}

struct Job {
    obs: Observation,
    config: wavelet_map::integrator::IntegratorConfig,
    naive: bool,
}

/// Inputs were validated up front, so a map error here means the library
/// broke its own contract.
fn classify(err: IntegrateError, frame: usize) -> CliError {
    match err {
        IntegrateError::Map(e) => CliError::Invariant(format!("frame {frame}: {e}")),
        e => CliError::input(format!("frame {frame}: {e}")),
    }
}

pub fn run(globals: &Globals, args: Args) -> CliResult<()> {
    let config = globals.run_config()?;
    let map_config = config.map_config().map_err(CliError::input)?;

    // Load and check everything before touching the map.
    let mut jobs = Vec::new();
    for path in &args.logs {
        let log = load_log(path)?;
        let name = &log.header.sensor;
        if let Ok(sensor) = config.sensor(name) {
            if sensor.projection != log.header.projection {
                return Err(CliError::file(
                    path,
                    format!("projection differs from sensor {name:?} in the run config"),
                ));
            }
        }
        let mut entry = config.integrator(name);
        if let Some(mode) = args.mode {
            entry.mode = mode;
        }
        if let Some(eps) = args.epsilon {
            entry.epsilon = eps;
        }
        if args.resolution.is_some() {
            entry.resolution = args.resolution;
        }
        let integrator = entry.to_config(&map_config, globals.exec);
        if !(integrator.epsilon_thresh >= 0.0 && integrator.epsilon_thresh.is_finite()) {
            return Err(CliError::input(format!("epsilon must be finite and non-negative, got {}", integrator.epsilon_thresh)));
        }
        if map_config.depth_for_width(integrator.max_update_resolution).is_none() {
            return Err(CliError::input(format!(
                "resolution {} m is not the map cell width {} m times a power of two",
                integrator.max_update_resolution, map_config.min_cell_width
            )));
        }
        let frames: Vec<usize> = if args.train_only {
            split_frames(log.frames.len(), config.eval.test_every).0
        } else {
            (0..log.frames.len()).collect()
        };
        for i in frames {
            let obs = log.observation(i);
            obs.validate()
                .map_err(|e| CliError::file(path, format!("frame {i}: {e}")))?;
            jobs.push(Job {
                obs,
                config: integrator,
                naive: entry.mode == Mode::Naive,
            });
        }
    }
    // Stable, so frames with equal timestamps keep log order.
    jobs.sort_by(|a, b| a.obs.timestamp.total_cmp(&b.obs.timestamp));

    let mut map = WaveletOctree::new(map_config.clone()).map_err(|e| CliError::input(e.to_string()))?;
    let start = Instant::now();
    let mut totals = IntegrationStats::default();
    for (i, job) in jobs.iter().enumerate() {
        let result = if job.naive {
            integrate_naive(&mut map, &job.obs, &job.config)
        } else {
            integrate(&mut map, &job.obs, &job.config)
        };
        totals += result.map_err(|e| classify(e, i))?;
    }
    let wall = start.elapsed();
    if map_config.prune_threshold > 0.0 {
        map.prune_lossy();
    } else {
        map.prune();
    }

    let bytes = map.serialize();
    match WaveletOctree::deserialize(&bytes) {
        Ok(back) if back.serialize() == bytes => {}
        Ok(_) => return Err(CliError::Invariant("map does not survive a save/load round trip".into())),
        Err(e) => return Err(CliError::Invariant(format!("saved map fails to load: {e}"))),
    }
    write_file(&args.out, &bytes)?;

    let usage = usage::current();
    println!("frames,nodes,blocks_updated,nodes_visited,terminated_early,skipped_saturated,wall_s,cpu_s,map_bytes,peak_bytes");
    println!(
        "{},{},{},{},{},{},{:.6},{:.6},{},{}",
        jobs.len(),
        map.allocated_nodes(),
        totals.blocks_updated,
        totals.nodes_visited,
        totals.terminated_early,
        totals.skipped_saturated,
        wall.as_secs_f64(),
        usage.cpu.as_secs_f64(),
        bytes.len(),
        usage.peak_bytes,
    );
    Ok(())
}
