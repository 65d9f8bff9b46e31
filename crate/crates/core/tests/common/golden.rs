//! Canned inputs pinned byte for byte under `tests/golden/core`. Set
//! `UPDATE_GOLDEN=1` to rewrite the stored files after a deliberate format
//! change.

use std::path::PathBuf;

use nalgebra::Vector3;

use wavelet_map::beam_model::{BeamModelParams, RangeNoise};
use wavelet_map::exec::Exec;
use wavelet_map::geometry::{Pose, ProjectionKind, ProjectionModel};
use wavelet_map::integrator::{integrate, IntegratorConfig};
use wavelet_map::obslog::{Frame, LogHeader, ObservationLog};
use wavelet_map::observation::RangeData;
use wavelet_map::sim::{NoiseSpec, Scene};
use wavelet_map::tree::{NodePartition, WaveletOctree};

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/core")
}

fn tiny_camera() -> ProjectionModel {
    ProjectionModel {
        kind: ProjectionKind::Pinhole {
            fx: 2.0,
            fy: 2.0,
            cx: 1.5,
            cy: 1.0,
            width: 4,
            height: 3,
        },
        min_range: 0.1,
        max_range: 5.0,
    }
}

fn camera_log() -> ObservationLog {
    let mut log = ObservationLog::new(LogHeader {
        sensor: "tiny camera".into(),
        projection: tiny_camera(),
        model: BeamModelParams {
            sigma_theta: 0.05,
            range_noise: RangeNoise::Quadratic(0.01),
            ..BeamModelParams::default()
        },
    });
    for k in 0..2 {
        let mut ranges: Vec<f32> = (0..12).map(|i| 1.0 + 0.25 * i as f32 + k as f32).collect();
        ranges[3] = f32::NAN;
        ranges[7] = f32::INFINITY;
        log.frames.push(Frame {
            timestamp: 0.5 * k as f64,
            pose: Pose::from_position_ypr(Vector3::new(1.0, 2.0 + k as f64, 0.5), 0.25 * k as f64, -0.1, 0.05),
            data: RangeData::Image {
                width: 4,
                height: 3,
                ranges,
            },
        });
    }
    log
}

fn scanner_log() -> ObservationLog {
    let projection = ProjectionModel {
        kind: ProjectionKind::Spherical {
            azimuth_min: -1.0,
            azimuth_max: 1.0,
            elevation_min: -0.2,
            elevation_max: 0.2,
            width: 8,
            height: 2,
        },
        min_range: 0.2,
        max_range: 12.0,
    };
    let mut log = ObservationLog::new(LogHeader {
        sensor: "tiny scanner".into(),
        projection,
        model: BeamModelParams {
            sigma_theta: 0.01,
            range_noise: RangeNoise::Constant(0.02),
            miss_as_free: true,
            ..BeamModelParams::default()
        },
    });
    log.frames.push(Frame {
        timestamp: 3.0,
        pose: Pose::from_position_ypr(Vector3::new(-0.5, 0.0, 1.5), 1.0, 0.0, 0.0),
        data: RangeData::Image {
            width: 8,
            height: 2,
            ranges: (0..16).map(|i| 0.5 + 0.75 * i as f32).collect(),
        },
    });
    log
}

fn points_log() -> ObservationLog {
    let mut log = ObservationLog::new(LogHeader {
        sensor: "point cloud".into(),
        projection: tiny_camera(),
        model: BeamModelParams::default(),
    });
    for k in 0..2 {
        let points = (0..5)
            .map(|i| {
                let t = i as f32 + k as f32;
                [0.1 * t - 0.2, 0.05 * t, 1.0 + 0.3 * t]
            })
            .collect();
        log.frames.push(Frame {
            timestamp: 10.0 + k as f64,
            pose: Pose::identity(),
            data: RangeData::Points(points),
        });
    }
    log
}

pub fn canned_logs() -> Vec<(&'static str, ObservationLog)> {
    vec![
        ("camera.wvlg", camera_log()),
        ("scanner.wvlg", scanner_log()),
        ("points.wvlg", points_log()),
    ]
}

fn sparse_map() -> WaveletOctree {
    let mut map = super::room_map(3, 0.5);
    let config = map.config().clone();
    for (i, value) in [(0u32, 1.5), (3, -2.0), (7, 0.75)] {
        let leaf = NodePartition::new(&config, 3, [i, 7 - i, i / 2]);
        map.set_leaf(&leaf, value).unwrap();
    }
    map
}

fn desk_snapshot() -> WaveletOctree {
    let scene = Scene::desk_flat();
    let projection = super::desk_lidar();
    let poses = super::desk_orbit(2);
    let frames = super::render_all(&scene, &poses, &projection, &NoiseSpec::noiseless(), &super::lidar_model());
    let mut map = super::desk_map(4, 0.625);
    let cfg = IntegratorConfig {
        max_update_resolution: 0.625,
        exec: Exec::Sequential,
        ..IntegratorConfig::default()
    };
    for obs in &frames {
        integrate(&mut map, obs, &cfg).unwrap();
    }
    map.prune();
    map
}

pub fn canned_maps() -> Vec<(&'static str, WaveletOctree)> {
    vec![
        ("empty.wvmp", super::room_map(4, 0.25)),
        ("sparse.wvmp", sparse_map()),
        ("desk.wvmp", desk_snapshot()),
    ]
}

/// Every canned input with its freshly encoded bytes.
pub fn encoded() -> Vec<(&'static str, Vec<u8>)> {
    let logs = canned_logs().into_iter().map(|(n, l)| (n, l.encode()));
    let maps = canned_maps().into_iter().map(|(n, m)| (n, m.serialize()));
    logs.chain(maps).collect()
}

/// Compares each encoding with its stored file, rewriting the file instead
/// when `UPDATE_GOLDEN` is set. Returns the names that differ.
pub fn check_or_update() -> Vec<String> {
    let dir = golden_dir();
    let update = std::env::var_os("UPDATE_GOLDEN").is_some_and(|v| v != "0");
    let mut mismatched = Vec::new();
    for (name, bytes) in encoded() {
        let path = dir.join(name);
        if update {
            std::fs::create_dir_all(&dir).unwrap();
            std::fs::write(&path, &bytes).unwrap();
        } else if std::fs::read(&path).ok().as_deref() != Some(bytes.as_slice()) {
            mismatched.push(name.to_string());
        }
    }
    mismatched
}
