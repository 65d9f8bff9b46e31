use std::collections::HashMap;

use nalgebra::Vector3;

use crate::beam_model::{range_profile, BeamKind};
use crate::geometry::angle_between;
use crate::observation::Observation;
use crate::tree::{CoefficientUpdate, MapConfig, WaveletOctree};

use super::beams::BeamTable;
use super::{update_depth, IntegrateError, IntegrationStats, IntegratorConfig};

/// Cells at `depth` crossed by the segment `origin + t * dir`, `t` in
/// `[0, t_max]`, in traversal order. `dir` need not be normalized.
pub fn voxel_traversal(
    config: &MapConfig,
    depth: u8,
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    t_max: f64,
) -> Vec<[u32; 3]> {
    let width = config.cell_width(depth);
    let cells = config.cells_per_side(depth) as i64;
    let root_width = config.root_width();

    // Clip the segment to the root cube.
    let (mut t0, mut t1) = (0.0f64, t_max);
    for k in 0..3 {
        let lo = config.origin[k];
        let hi = lo + root_width;
        if dir[k] == 0.0 {
            if origin[k] < lo || origin[k] > hi {
                return Vec::new();
            }
        } else {
            let (a, b) = ((lo - origin[k]) / dir[k], (hi - origin[k]) / dir[k]);
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    if !(t0 <= t1) {
        return Vec::new();
    }

    let start = origin + dir * t0;
    let mut index = [0i64; 3];
    let mut step = [0i64; 3];
    let mut t_next = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for k in 0..3 {
        let rel = (start[k] - config.origin[k]) / width;
        index[k] = (rel.floor() as i64).clamp(0, cells - 1);
        if dir[k] > 0.0 {
            step[k] = 1;
            let boundary = config.origin[k] + (index[k] + 1) as f64 * width;
            t_next[k] = (boundary - origin[k]) / dir[k];
            t_delta[k] = width / dir[k];
        } else if dir[k] < 0.0 {
            step[k] = -1;
            let boundary = config.origin[k] + index[k] as f64 * width;
            t_next[k] = (boundary - origin[k]) / dir[k];
            t_delta[k] = -width / dir[k];
        }
    }

    let mut out = Vec::new();
    loop {
        out.push([index[0] as u32, index[1] as u32, index[2] as u32]);
        let axis = (0..3)
            .min_by(|&a, &b| t_next[a].partial_cmp(&t_next[b]).unwrap())
            .unwrap();
        if t_next[axis] > t1 {
            break;
        }
        index[axis] += step[axis];
        if index[axis] < 0 || index[axis] >= cells {
            break;
        }
        t_next[axis] += t_delta[axis];
    }
    out
}

/// Ray-casting baseline: every valid beam updates the cells it crosses at
/// the update resolution using the range-only profile, up to three range
/// deviations past the hit. Where beams share a cell the beam whose direction
/// is angularly closest to the cell center wins.
pub fn integrate_rays(
    map: &mut WaveletOctree,
    observation: &Observation,
    config: &IntegratorConfig,
) -> Result<IntegrationStats, IntegrateError> {
    observation.validate()?;
    let depth = update_depth(map, config)?;
    let table = BeamTable::new(observation);
    let map_config = map.config().clone();
    let pose = &observation.pose;
    let projection = &observation.projection;
    let params = &table.params;
    let origin = pose.translation;

    // Per-beam candidate cell values, computed independently.
    let per_beam = config.exec.map_slice(table.measurements(), |m| {
        let (r_end, free_only) = match m.kind {
            BeamKind::Invalid => return Vec::new(),
            BeamKind::Miss { max_range } => {
                if !params.miss_as_free {
                    return Vec::new();
                }
                (max_range, true)
            }
            BeamKind::Hit { z } => (z + 3.0 * params.sigma_r(z), false),
        };
        let dir_world = pose.rotation * m.direction;
        let t_end = r_end / projection.range_along(&m.direction, 1.0);
        voxel_traversal(&map_config, depth, &origin, &dir_world, t_end)
            .into_iter()
            .filter_map(|cell| {
                let center = map_config.origin
                    + Vector3::new(cell[0] as f64 + 0.5, cell[1] as f64 + 0.5, cell[2] as f64 + 0.5)
                        * map_config.cell_width(depth);
                let local = pose.to_sensor(&center);
                let r = projection.range_of(&local);
                let s = if free_only {
                    if r >= r_end {
                        return None;
                    }
                    0.0
                } else {
                    let z = m.z_r;
                    0.5 + range_profile((r - z) / params.sigma_r(z))
                };
                Some((cell, angle_between(&local, &m.direction), params.logodds(s)))
            })
            .collect::<Vec<_>>()
    });

    let mut best: HashMap<[u32; 3], (f64, f64)> = HashMap::new();
    for cells in &per_beam {
        for &(cell, angle, value) in cells {
            match best.get(&cell) {
                Some(&(a, _)) if a <= angle => {}
                _ => {
                    best.insert(cell, (angle, value));
                }
            }
        }
    }
    let cells: Vec<([u32; 3], f64)> = best.into_iter().map(|(c, (_, v))| (c, v)).collect();
    let stats = IntegrationStats {
        nodes_visited: per_beam.iter().map(|c| c.len() as u64).sum(),
        blocks_updated: cells.len() as u64,
        outside_map: cells.is_empty(),
        ..Default::default()
    };
    let update = CoefficientUpdate::from_sparse(depth, &cells);
    if !update.is_zero() {
        map.apply_update_block(&map.root_partition(), &update)?;
    }
    Ok(stats)
}
