use std::path::PathBuf;

use wavelet_map::obslog::{Frame, LogHeader, ObservationLog};
use wavelet_map::sim::render_observation;

use crate::config::{load_scene, load_trajectory, noise_for};
use crate::error::{write_file, CliError, CliResult};
use crate::Globals;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Scene file, or `builtin:desk-flat` / `builtin:thin-poles`.
    #[arg(long)]
    scene: String,
    /// Trajectory file (orbit or waypoints).
    #[arg(long)]
    trajectory: PathBuf,
    /// Sensor name from the run config; optional when it defines only one.
    #[arg(long)]
    sensor: Option<String>,
    /// Output observation log.
    #[arg(long, short)]
    out: PathBuf,
}

pub fn run(globals: &Globals, args: Args) -> CliResult<()> {
    let config = globals.run_config()?;
    let name = match (&args.sensor, config.sensors.as_slice()) {
        (Some(name), _) => name.clone(),
        (None, [only]) => only.name.clone(),
        (None, []) => return Err(CliError::input("the run config defines no [[sensor]]")),
        (None, _) => return Err(CliError::input("the run config defines several sensors; pick one with --sensor")),
    };
    let sensor = config.sensor(&name).map_err(CliError::input)?;
    let scene = load_scene(&args.scene)?;
    let poses = load_trajectory(&args.trajectory)?.poses();
    let seed = globals.seed_or(config.seed);

    let mut log = ObservationLog::new(LogHeader {
        sensor: sensor.name.clone(),
        projection: sensor.projection,
        model: sensor.model,
    });
    for (i, (timestamp, body)) in poses.iter().enumerate() {
        // Each frame gets its own noise seed so frames are independent.
        let noise = noise_for(&sensor, seed.wrapping_add(i as u64))?;
        let pose = sensor.projection.sensor_pose(body);
        let obs = render_observation(&scene, &pose, &sensor.projection, &noise, &sensor.model, globals.exec);
        log.frames.push(Frame {
            timestamp: *timestamp,
            pose,
            data: obs.data,
        });
    }
    write_file(&args.out, &log.encode())?;
    eprintln!("wrote {} frames of {:?} to {}", log.frames.len(), sensor.name, args.out.display());
    Ok(())
}
