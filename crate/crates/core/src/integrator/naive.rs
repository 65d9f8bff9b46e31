use crate::geometry::partition_to_sensor;
use crate::haar::NUM_CHILDREN;
use crate::observation::Observation;
use crate::tree::{CoefficientUpdate, NodePartition, WaveletOctree};

use super::beams::BeamTable;
use super::{update_depth, IntegrateError, IntegrationStats, IntegratorConfig};

/// Reference integrator: evaluates the inverse model at the center of every
/// cell of the update resolution. Regions beyond the reach of every beam
/// (where the model is exactly zero) are skipped wholesale.
pub fn integrate_naive(
    map: &mut WaveletOctree,
    observation: &Observation,
    config: &IntegratorConfig,
) -> Result<IntegrationStats, IntegrateError> {
    observation.validate()?;
    let depth = update_depth(map, config)?;
    let table = BeamTable::new(observation);

    let visit = |partition: &NodePartition| -> (CoefficientUpdate, IntegrationStats) {
        fn go(
            partition: &NodePartition,
            obs: &Observation,
            table: &BeamTable,
            depth: u8,
        ) -> (CoefficientUpdate, IntegrationStats) {
            let mut stats = IntegrationStats {
                nodes_visited: 1,
                ..Default::default()
            };
            let proj = partition_to_sensor(&obs.pose, &obs.projection, partition);
            if proj.behind_sensor || proj.r_min >= table.reach {
                stats.unobserved = 1;
                return (CoefficientUpdate::uniform(0.0), stats);
            }
            if partition.depth >= depth {
                stats.blocks_updated = 1;
                return (CoefficientUpdate::uniform(table.logodds_at(&proj.center_sensor)), stats);
            }
            let mut updates: [CoefficientUpdate; NUM_CHILDREN] = Default::default();
            for (o, slot) in updates.iter_mut().enumerate() {
                let (u, s) = go(&partition.child(o), obs, table, depth);
                *slot = u;
                stats += s;
            }
            (CoefficientUpdate::from_children(updates), stats)
        }
        go(partition, observation, &table, depth)
    };

    let root = map.root_partition();
    let (update, stats) = if depth == 0 {
        visit(&root)
    } else {
        let results = config.exec.map_range(NUM_CHILDREN, |o| visit(&root.child(o)));
        let mut stats = IntegrationStats {
            nodes_visited: 1,
            ..Default::default()
        };
        let mut updates: [CoefficientUpdate; NUM_CHILDREN] = Default::default();
        for (o, (u, s)) in results.into_iter().enumerate() {
            updates[o] = u;
            stats += s;
        }
        (CoefficientUpdate::from_children(updates), stats)
    };
    if !update.is_zero() {
        map.apply_update_block(&root, &update)?;
    }
    Ok(stats)
}
