//! Run configuration, trajectory and scene files.
//!
//! ```toml
//! seed = 7
//!
//! [map]
//! min_cell_width = "5 cm"
//! origin = "-1.4 -1.4 -0.075 m"
//! tree_height = 8
//!
//! [[sensor]]
//! name = "lidar"
//! projection = { kind = "spherical", ... }
//! model = { sigma_theta = "0.5 deg", sigma_r = "3 cm" }
//! noise = { sigma_theta = "0 deg" }        # used by `simulate`
//!
//! [[integrator]]
//! sensor = "lidar"
//! mode = "beams"
//! epsilon = 0.1
//! resolution = "5 cm"
//!
//! [eval]
//! test_every = 20
//! band_edges = ["-0.1 m", "0.05 m", "0.2 m", "0.5 m", "2 m"]
//! ```

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::Deserialize;

use wavelet_map::beam_model::BeamModelParams;
use wavelet_map::config::{MapSpec, ModelSpec, NoiseSpecFile, ProjectionSpec};
use wavelet_map::eval::EvalConfig;
use wavelet_map::exec::Exec;
use wavelet_map::geometry::ProjectionModel;
use wavelet_map::integrator::{IntegratorConfig, IntegratorMode};
use wavelet_map::sim::{parse_scene, NoiseSpec, Scene, Trajectory};
use wavelet_map::tree::MapConfig;
use wavelet_map::units::{Angle, Duration, Length, Position};

use crate::error::{read_text, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Beams,
    Rays,
    /// Inverse model evaluated at every cell of the update resolution.
    Naive,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorEntry {
    pub name: String,
    pub projection: ProjectionSpec,
    pub model: ModelSpec,
    #[serde(default)]
    pub noise: Option<NoiseSpecFile>,
}

fn default_epsilon() -> f64 {
    0.1
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorEntry {
    pub sensor: String,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Defaults to the map's finest cell width.
    #[serde(default)]
    pub resolution: Option<Length>,
    #[serde(default = "default_true")]
    pub skip_saturated: bool,
    #[serde(default)]
    pub skip_saturated_occupied: bool,
}

fn default_test_every() -> usize {
    20
}
fn default_bands() -> Vec<Length> {
    EvalConfig::default().band_edges.into_iter().map(Length).collect()
}
fn default_samples() -> usize {
    4
}
fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalEntry {
    #[serde(default = "default_test_every")]
    pub test_every: usize,
    #[serde(default = "default_bands")]
    pub band_edges: Vec<Length>,
    #[serde(default = "default_samples")]
    pub samples_per_ray: usize,
    #[serde(default = "default_stride")]
    pub beam_stride: usize,
    /// Scene file for distance annotation, relative to the config file.
    #[serde(default)]
    pub scene: Option<String>,
}

impl Default for EvalEntry {
    fn default() -> Self {
        Self {
            test_every: default_test_every(),
            band_edges: default_bands(),
            samples_per_ray: default_samples(),
            beam_stride: default_stride(),
            scene: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub map: MapSpec,
    #[serde(default, rename = "sensor")]
    pub sensors: Vec<SensorEntry>,
    #[serde(default, rename = "integrator")]
    pub integrators: Vec<IntegratorEntry>,
    #[serde(default)]
    pub eval: EvalEntry,
    /// Directory of the file the config came from; relative paths resolve
    /// against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// A sensor with its parameters converted to library types.
pub struct Sensor {
    pub name: String,
    pub projection: ProjectionModel,
    pub model: BeamModelParams,
    pub noise: Option<NoiseSpecFile>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = read_text(path)?;
        let mut config: RunConfig = toml::from_str(&text).map_err(|e| CliError::file(path, e))?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.validate().map_err(|e| CliError::file(path, e))?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), String> {
        self.map_config()?;
        for (i, s) in self.sensors.iter().enumerate() {
            if self.sensors[..i].iter().any(|o| o.name == s.name) {
                return Err(format!("sensor {:?} defined twice", s.name));
            }
            self.sensor(&s.name)?;
        }
        for i in &self.integrators {
            if !self.sensors.iter().any(|s| s.name == i.sensor) {
                return Err(format!("integrator refers to unknown sensor {:?}", i.sensor));
            }
        }
        if self.eval.test_every == 0 {
            return Err("eval.test_every must be at least 1".into());
        }
        if self.eval.beam_stride == 0 {
            return Err("eval.beam_stride must be at least 1".into());
        }
        if self.eval.band_edges.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err("eval.band_edges must increase".into());
        }
        Ok(())
    }

    pub fn map_config(&self) -> Result<MapConfig, String> {
        self.map.to_config().map_err(|e| format!("[map]: {e}"))
    }

    pub fn sensor(&self, name: &str) -> Result<Sensor, String> {
        let entry = self
            .sensors
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| format!("no sensor named {name:?}"))?;
        Ok(Sensor {
            name: entry.name.clone(),
            projection: entry.projection.to_model().map_err(|e| format!("sensor {name:?}: {e}"))?,
            model: entry.model.to_params().map_err(|e| format!("sensor {name:?}: {e}"))?,
            noise: entry.noise.clone(),
        })
    }

    /// Integrator settings bound to `sensor`. Without an explicit entry the
    /// defaults apply at the map's finest resolution.
    pub fn integrator(&self, sensor: &str) -> IntegratorEntry {
        self.integrators.iter().find(|i| i.sensor == sensor).cloned().unwrap_or(IntegratorEntry {
            sensor: sensor.to_string(),
            mode: Mode::Beams,
            epsilon: default_epsilon(),
            resolution: None,
            skip_saturated: true,
            skip_saturated_occupied: false,
        })
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            test_every: self.eval.test_every,
            band_edges: self.eval.band_edges.iter().map(|l| l.0).collect(),
            free_samples_per_beam: self.eval.samples_per_ray,
            beam_stride: self.eval.beam_stride,
            seed: self.seed,
        }
    }

    pub fn resolve(&self, relative: &str) -> PathBuf {
        self.base_dir.join(relative)
    }
}

impl IntegratorEntry {
    pub fn to_config(&self, map: &MapConfig, exec: Exec) -> IntegratorConfig {
        IntegratorConfig {
            epsilon_thresh: self.epsilon,
            max_update_resolution: self.resolution.map_or(map.min_cell_width, |r| r.0),
            skip_saturated: self.skip_saturated,
            skip_saturated_occupied: self.skip_saturated_occupied,
            mode: match self.mode {
                Mode::Rays => IntegratorMode::Rays,
                Mode::Beams | Mode::Naive => IntegratorMode::Beams,
            },
            exec,
        }
    }
}

pub fn noise_for(sensor: &Sensor, seed: u64) -> CliResult<NoiseSpec> {
    match &sensor.noise {
        None => Ok(NoiseSpec { seed, ..NoiseSpec::noiseless() }),
        Some(spec) => spec
            .to_noise(seed)
            .map_err(|e| CliError::input(format!("sensor {:?} noise: {e}", sensor.name))),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Waypoint {
    position: Position,
    #[serde(default)]
    yaw: Angle,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum TrajectoryFile {
    Orbit {
        center: Position,
        radius: Length,
        #[serde(default)]
        pitch: Angle,
        frames: usize,
        frame_period: Duration,
    },
    Waypoints {
        #[serde(default)]
        pitch: Angle,
        frames: usize,
        frame_period: Duration,
        #[serde(rename = "waypoint")]
        waypoints: Vec<Waypoint>,
    },
}

/// Reads a trajectory file:
///
/// ```toml
/// kind = "waypoints"          # or "orbit" with center, radius
/// frames = 10
/// frame_period = "100 ms"
/// pitch = "-5 deg"
/// [[waypoint]]
/// position = "1 1 1.2 m"
/// yaw = "0 deg"
/// ```
pub fn load_trajectory(path: &Path) -> CliResult<Trajectory> {
    let text = read_text(path)?;
    let file: TrajectoryFile = toml::from_str(&text).map_err(|e| CliError::file(path, e))?;
    let trajectory = match file {
        TrajectoryFile::Orbit {
            center,
            radius,
            pitch,
            frames,
            frame_period,
        } => Trajectory::Orbit {
            center: center.0,
            radius: radius.0,
            pitch: pitch.0,
            frames,
            frame_period: frame_period.0,
        },
        TrajectoryFile::Waypoints {
            pitch,
            frames,
            frame_period,
            waypoints,
        } => {
            if waypoints.is_empty() {
                return Err(CliError::file(path, "at least one [[waypoint]] is required"));
            }
            Trajectory::Waypoints {
                points: waypoints.iter().map(|w| (w.position.0, w.yaw.0)).collect::<Vec<(Vector3<f64>, f64)>>(),
                pitch: pitch.0,
                frames,
                frame_period: frame_period.0,
            }
        }
    };
    Ok(trajectory)
}

/// A scene file path, or one of the bundled scenes as `builtin:desk-flat`
/// or `builtin:thin-poles`.
pub fn load_scene(spec: &str) -> CliResult<Scene> {
    match spec.strip_prefix("builtin:") {
        Some("desk-flat") => Ok(Scene::desk_flat()),
        Some("thin-poles") => Ok(Scene::thin_poles()),
        Some(other) => Err(CliError::input(format!(
            "unknown bundled scene {other:?} (have desk-flat, thin-poles)"
        ))),
        None => {
            let path = Path::new(spec);
            parse_scene(&read_text(path)?).map_err(|e| CliError::file(path, e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example(name: &str) -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
    }

    #[test]
    fn shipped_examples_load() {
        let config = RunConfig::load(&example("desk.toml")).unwrap();
        assert_eq!(config.sensors.len(), 2);
        for s in &config.sensors {
            config.sensor(&s.name).unwrap();
        }
        let map = config.map_config().unwrap();
        let lidar = config.integrator("lidar").to_config(&map, Exec::Sequential);
        assert_eq!(map.depth_for_width(lidar.max_update_resolution), Some(map.tree_height));
        assert_eq!(config.eval_config().band_edges.len(), 5);
        load_scene(config.eval.scene.as_deref().unwrap()).unwrap();
        for t in ["orbit.toml", "walk.toml"] {
            assert!(!load_trajectory(&example(t)).unwrap().poses().is_empty());
        }
    }

    #[test]
    fn unknown_keys_and_dangling_sensor_names_are_rejected() {
        let base = "[map]\nmin_cell_width = \"10 cm\"\norigin = \"0 0 0 m\"\ntree_height = 4\n";
        let parse = |extra: &str| -> Result<(), String> {
            let config: RunConfig = toml::from_str(&format!("{base}{extra}")).map_err(|e| e.to_string())?;
            config.validate()
        };
        parse("").unwrap();
        assert!(parse("[eval]\nbogus = 1\n").is_err());
        assert!(parse("[[integrator]]\nsensor = \"ghost\"\n").is_err());
        assert!(parse("[eval]\nband_edges = [\"1 m\", \"0.5 m\"]\n").is_err());
        assert!(parse("[eval]\nband_edges = [\"1\"]\n").is_err());
    }
}
