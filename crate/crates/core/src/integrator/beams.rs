use nalgebra::Vector3;

use crate::beam_model::{inverse_model, BeamMeasurement, BeamModelParams, BeamSummary};
use crate::geometry::{BeamIndex, BeamWindow, ProjectionModel};
use crate::observation::Observation;

/// Range-minimum style table over one row of values.
struct SparseTable {
    levels: Vec<Vec<f64>>,
    op: fn(f64, f64) -> f64,
}

impl SparseTable {
    fn new(values: Vec<f64>, op: fn(f64, f64) -> f64) -> Self {
        let mut levels = vec![values];
        let mut span = 1;
        while 2 * span <= levels[0].len() {
            let prev = levels.last().unwrap();
            let next = (0..prev.len() - span).map(|i| op(prev[i], prev[i + span])).collect::<Vec<_>>();
            levels.push(next);
            span *= 2;
        }
        Self { levels, op }
    }

    /// Combined value over the inclusive range `a..=b`.
    fn query(&self, a: usize, b: usize) -> f64 {
        let len = b - a + 1;
        let k = (usize::BITS - 1 - len.leading_zeros()) as usize;
        (self.op)(self.levels[k][a], self.levels[k][b + 1 - (1 << k)])
    }
}

struct RowIndex {
    hits: Vec<u32>,
    misses: Vec<u32>,
    inactive: Vec<u32>,
    min_free: SparseTable,
    max_active: SparseTable,
    max_hit: SparseTable,
}

impl RowIndex {
    fn summary(&self, a: usize, b: usize) -> BeamSummary {
        BeamSummary {
            hits: self.hits[b + 1] - self.hits[a],
            misses: self.misses[b + 1] - self.misses[a],
            inactive: self.inactive[b + 1] - self.inactive[a],
            min_free_until: self.min_free.query(a, b),
            max_active_until: self.max_active.query(a, b),
            max_hit_range: self.max_hit.query(a, b),
        }
    }
}

/// Per-beam measurements of one observation plus per-row indexes for fast
/// aggregation over beam windows.
pub(crate) struct BeamTable {
    pub projection: ProjectionModel,
    pub params: BeamModelParams,
    width: usize,
    measurements: Vec<BeamMeasurement>,
    rows: Vec<RowIndex>,
    /// Largest range coordinate at which any beam is active.
    pub reach: f64,
}

impl BeamTable {
    pub fn new(obs: &Observation) -> Self {
        let projection = obs.projection;
        let params = obs.model;
        let width = projection.width() as usize;
        let image = obs.range_image();
        let measurements: Vec<BeamMeasurement> = image
            .iter()
            .enumerate()
            .map(|(i, &z)| {
                let beam = BeamIndex {
                    col: (i % width) as u32,
                    row: (i / width) as u32,
                };
                BeamMeasurement::new(z, beam, &projection)
            })
            .collect();
        let mut reach = f64::NEG_INFINITY;
        let rows = measurements
            .chunks(width)
            .map(|row| {
                let summaries: Vec<BeamSummary> =
                    row.iter().map(|m| BeamSummary::of_beam(params.extent(m.kind))).collect();
                let prefix = |f: fn(&BeamSummary) -> u32| {
                    let mut acc = vec![0u32; summaries.len() + 1];
                    for (i, s) in summaries.iter().enumerate() {
                        acc[i + 1] = acc[i] + f(s);
                    }
                    acc
                };
                for s in &summaries {
                    reach = reach.max(s.max_active_until);
                }
                RowIndex {
                    hits: prefix(|s| s.hits),
                    misses: prefix(|s| s.misses),
                    inactive: prefix(|s| s.inactive),
                    min_free: SparseTable::new(summaries.iter().map(|s| s.min_free_until).collect(), f64::min),
                    max_active: SparseTable::new(summaries.iter().map(|s| s.max_active_until).collect(), f64::max),
                    max_hit: SparseTable::new(summaries.iter().map(|s| s.max_hit_range).collect(), f64::max),
                }
            })
            .collect();
        Self {
            projection,
            params,
            width,
            measurements,
            rows,
            reach,
        }
    }

    pub fn measurements(&self) -> &[BeamMeasurement] {
        &self.measurements
    }

    pub fn summary(&self, window: &BeamWindow) -> BeamSummary {
        let mut acc = BeamSummary::default();
        for (row, spans) in &window.rows {
            let index = &self.rows[*row as usize];
            for &(a, b) in spans.iter().flatten() {
                acc = acc.merge(&index.summary(a as usize, b as usize));
            }
        }
        acc
    }

    /// Occupancy probability at a sensor-frame point.
    pub fn probability_at(&self, p: &Vector3<f64>) -> f64 {
        match self.projection.project(p) {
            None => 0.5,
            Some(c) => {
                let m = &self.measurements[c.beam.row as usize * self.width + c.beam.col as usize];
                inverse_model(&c, m, &self.params)
            }
        }
    }

    pub fn logodds_at(&self, p: &Vector3<f64>) -> f64 {
        self.params.logodds(self.probability_at(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_table_matches_scan() {
        let values: Vec<f64> = (0..37).map(|i| ((i * 7919) % 23) as f64 - 11.0).collect();
        let min = SparseTable::new(values.clone(), f64::min);
        let max = SparseTable::new(values.clone(), f64::max);
        for a in 0..values.len() {
            for b in a..values.len() {
                let slice = &values[a..=b];
                assert_eq!(min.query(a, b), slice.iter().cloned().fold(f64::INFINITY, f64::min));
                assert_eq!(max.query(a, b), slice.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
            }
        }
    }
}
