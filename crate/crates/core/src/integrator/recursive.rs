use crate::beam_model::{classify_update, epsilon_max, UpdateType};
use crate::geometry::partition_to_sensor;
use crate::haar::NUM_CHILDREN;
use crate::observation::Observation;
use crate::tree::{CoefficientUpdate, MapCursor, NodePartition, WaveletOctree};

use super::beams::BeamTable;
use super::{update_depth, IntegrateError, IntegrationStats, IntegratorConfig, SATURATION_TOLERANCE};

/// Partitions shallower than this are expanded in parallel.
const PARALLEL_DEPTH: u8 = 2;

struct Walk<'a> {
    map: &'a WaveletOctree,
    obs: &'a Observation,
    table: BeamTable,
    config: &'a IntegratorConfig,
    update_depth: u8,
    lateral_reach: f64,
}

impl Walk<'_> {
    fn visit(&self, partition: &NodePartition, cursor: &MapCursor) -> (CoefficientUpdate, IntegrationStats) {
        let mut stats = IntegrationStats {
            nodes_visited: 1,
            ..Default::default()
        };
        let proj = partition_to_sensor(&self.obs.pose, &self.obs.projection, partition);
        let summary = if proj.behind_sensor {
            Default::default()
        } else if proj.straddles_origin {
            self.table.summary(&self.obs.projection.full_window())
        } else {
            let window = self
                .obs
                .projection
                .beam_window(&proj.center_sensor, proj.theta_radius + self.lateral_reach);
            self.table.summary(&window)
        };
        let class = classify_update(&proj, &summary);
        let cfg = self.map.config();

        match class {
            UpdateType::FullyUnobserved => {
                stats.unobserved = 1;
                return (CoefficientUpdate::uniform(0.0), stats);
            }
            UpdateType::FreeOrUnobserved
                if self.config.skip_saturated
                    && self.map.max_value(cursor) <= cfg.clamp_lo as f64 + SATURATION_TOLERANCE =>
            {
                stats.skipped_saturated = 1;
                return (CoefficientUpdate::uniform(0.0), stats);
            }
            UpdateType::PossiblyOccupied
                if self.config.skip_saturated_occupied
                    && summary.misses == 0
                    && !proj.straddles_origin
                    && proj.r_min >= summary.max_hit_range
                    && self.map.min_value(cursor) >= cfg.clamp_hi as f64 - SATURATION_TOLERANCE =>
            {
                // Every point is at or beyond all hits, so no update is negative.
                stats.skipped_saturated = 1;
                return (CoefficientUpdate::uniform(0.0), stats);
            }
            _ => {}
        }

        let at_resolution = partition.depth >= self.update_depth;
        let terminate = at_resolution || {
            let eps = epsilon_max(&proj, class, &summary, &self.table.params);
            eps.is_finite() && {
                let s_center = self.table.probability_at(&proj.center_sensor);
                self.table.params.logodds_deviation(s_center, eps) < self.config.epsilon_thresh
            }
        };
        if terminate {
            stats.blocks_updated = 1;
            stats.terminated_early = !at_resolution as u64;
            let value = self.table.logodds_at(&proj.center_sensor);
            return (CoefficientUpdate::uniform(value), stats);
        }

        let child = |o: usize| self.visit(&partition.child(o), &self.map.child_cursor(cursor, o));
        let results = if partition.depth < PARALLEL_DEPTH {
            self.config.exec.map_range(NUM_CHILDREN, child)
        } else {
            (0..NUM_CHILDREN).map(child).collect()
        };
        let mut updates: [CoefficientUpdate; NUM_CHILDREN] = Default::default();
        for (o, (update, child_stats)) in results.into_iter().enumerate() {
            updates[o] = update;
            stats += child_stats;
        }
        (CoefficientUpdate::from_children(updates), stats)
    }
}

/// Integrates one observation with adaptive-resolution updates.
pub fn integrate_recursive(
    map: &mut WaveletOctree,
    observation: &Observation,
    config: &IntegratorConfig,
) -> Result<IntegrationStats, IntegrateError> {
    observation.validate()?;
    let depth = update_depth(map, config)?;
    let root = map.root_partition();
    let (update, stats) = {
        let walk = Walk {
            map,
            obs: observation,
            table: BeamTable::new(observation),
            config,
            update_depth: depth,
            lateral_reach: 6.0 * observation.model.sigma_theta,
        };
        walk.visit(&root, &map.root_cursor())
    };
    let stats = IntegrationStats {
        outside_map: stats.unobserved == 1 && stats.nodes_visited == 1,
        ..stats
    };
    if !update.is_zero() {
        map.apply_update_block(&root, &update)?;
    }
    Ok(stats)
}
