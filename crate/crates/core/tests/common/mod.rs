//! Fixtures shared by the integration and acceptance tests.
#![allow(dead_code)]

pub mod golden;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wavelet_map::beam_model::{BeamModelParams, RangeNoise};
use wavelet_map::exec::Exec;
use wavelet_map::geometry::{Pose, ProjectionKind, ProjectionModel};
use wavelet_map::observation::Observation;
use wavelet_map::sim::{render_observation, NoiseSpec, Scene, Trajectory};
use wavelet_map::tree::{MapConfig, NodePartition, WaveletOctree};

pub fn deg(v: f64) -> f64 {
    v.to_radians()
}

/// 360 degree scanner, 1 degree columns, 32 rows over +-30 degrees.
pub fn desk_lidar() -> ProjectionModel {
    ProjectionModel {
        kind: ProjectionKind::Spherical {
            azimuth_min: deg(-180.0),
            azimuth_max: deg(179.0),
            elevation_min: deg(-30.0),
            elevation_max: deg(30.0),
            width: 360,
            height: 32,
        },
        min_range: 0.2,
        max_range: 15.0,
    }
}

pub fn desk_camera() -> ProjectionModel {
    ProjectionModel {
        kind: ProjectionKind::Pinhole {
            fx: 60.0,
            fy: 60.0,
            cx: 39.5,
            cy: 29.5,
            width: 80,
            height: 60,
        },
        min_range: 0.1,
        max_range: 8.0,
    }
}

pub fn lidar_model() -> BeamModelParams {
    BeamModelParams {
        sigma_theta: deg(0.5),
        range_noise: RangeNoise::Constant(0.03),
        ..BeamModelParams::default()
    }
}

pub fn camera_model() -> BeamModelParams {
    BeamModelParams {
        sigma_theta: 0.01,
        range_noise: RangeNoise::Quadratic(0.005),
        ..BeamModelParams::default()
    }
}

/// Cube map covering the desk-flat room with the floor plane through the
/// middle of a cell layer.
pub fn desk_config(tree_height: u8, cell: f64) -> MapConfig {
    let root = cell * (1u64 << tree_height) as f64;
    MapConfig {
        min_cell_width: cell,
        origin: Vector3::new(5.0 - root / 2.0, 5.0 - root / 2.0, -1.5 * cell),
        tree_height,
        ..MapConfig::default()
    }
}

pub fn desk_map(tree_height: u8, cell: f64) -> WaveletOctree {
    WaveletOctree::new(desk_config(tree_height, cell)).unwrap()
}

/// Cube map with its minimum corner at the world origin.
pub fn room_config(tree_height: u8, cell: f64) -> MapConfig {
    MapConfig {
        min_cell_width: cell,
        origin: Vector3::zeros(),
        tree_height,
        ..MapConfig::default()
    }
}

pub fn room_map(tree_height: u8, cell: f64) -> WaveletOctree {
    WaveletOctree::new(room_config(tree_height, cell)).unwrap()
}

/// Orbit through free space in the middle of the desk-flat room.
pub fn desk_orbit(frames: usize) -> Vec<Pose> {
    Trajectory::Orbit {
        center: Vector3::new(5.0, 5.0, 1.2),
        radius: 2.5,
        pitch: 0.0,
        frames,
        frame_period: 0.1,
    }
    .poses()
    .into_iter()
    .map(|(_, p)| p)
    .collect()
}

/// Random poses at least `clearance` meters from every surface.
pub fn random_poses(scene: &Scene, count: usize, clearance: f64, seed: u64) -> Vec<Pose> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let p = Vector3::new(
            rng.random_range(scene.bounds_min.x + 1.0..scene.bounds_max.x - 1.0),
            rng.random_range(scene.bounds_min.y + 1.0..scene.bounds_max.y - 1.0),
            rng.random_range(0.5..2.5),
        );
        if scene.signed_distance(&p) < clearance {
            continue;
        }
        let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let pitch = rng.random_range(-0.3..0.3);
        out.push(Pose::from_position_ypr(p, yaw, pitch, 0.0));
    }
    out
}

pub fn render_all(
    scene: &Scene,
    poses: &[Pose],
    projection: &ProjectionModel,
    noise: &NoiseSpec,
    model: &BeamModelParams,
) -> Vec<Observation> {
    poses
        .iter()
        .enumerate()
        .map(|(i, pose)| {
            let noise = NoiseSpec {
                seed: noise.seed.wrapping_add(i as u64),
                ..*noise
            };
            let pose = projection.sensor_pose(pose);
            let mut obs = render_observation(scene, &pose, projection, &noise, model, Exec::Parallel);
            obs.timestamp = i as f64 * 0.1;
            obs
        })
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest gap between an allocated node's value and the mean of its
/// children's values, read through the public query interface.
pub fn hierarchy_error(map: &WaveletOctree) -> f64 {
    let height = map.config().tree_height;
    let mut partitions = Vec::new();
    map.for_each_node(|p, _, _| partitions.push(*p));
    let mut worst = 0.0f64;
    for p in partitions {
        if p.depth >= height {
            continue;
        }
        let parent = map.query_coarse(&p).unwrap();
        let mean = (0..8).map(|o| map.query_coarse(&p.child(o)).unwrap()).sum::<f64>() / 8.0;
        worst = worst.max((parent - mean).abs());
    }
    worst
}

/// Random partition of the map at a depth in `depths`.
pub fn random_partition(config: &MapConfig, depths: std::ops::RangeInclusive<u8>, rng: &mut impl Rng) -> NodePartition {
    let depth = rng.random_range(depths);
    let n = config.cells_per_side(depth) as u32;
    let index = [rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n)];
    NodePartition::new(config, depth, index)
}
