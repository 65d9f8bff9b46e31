//! Map quality against scene ground truth.
//!
//! Test points come from held-out frames: each valid hit contributes an
//! occupied sample at its end point and free samples drawn uniformly along
//! the beam up to three range deviations short of the hit. Points are
//! scored by the map's log-odds (zero where unknown) and summarized by ROC
//! AUC and by accuracy in bands of distance to the nearest surface.

use std::io::{self, Write};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::beam_model::BeamKind;
use crate::exec::Exec;
use crate::geometry::BeamIndex;
use crate::observation::Observation;
use crate::sim::Scene;
use crate::tree::WaveletOctree;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Every `test_every`-th frame (the last of each group) is held out.
    pub test_every: usize,
    /// Lower edges of the distance bands in meters, increasing. The last
    /// band is open-ended.
    pub band_edges: Vec<f64>,
    pub free_samples_per_beam: usize,
    /// Use every `beam_stride`-th beam of a test frame.
    pub beam_stride: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            test_every: 20,
            band_edges: vec![-0.1, 0.05, 0.2, 0.5, 2.0],
            free_samples_per_beam: 4,
            beam_stride: 1,
            seed: 0,
        }
    }
}

/// Splits frame indices into (train, test).
pub fn split_frames(frame_count: usize, test_every: usize) -> (Vec<usize>, Vec<usize>) {
    let n = test_every.max(1);
    if n == 1 {
        return ((0..frame_count).collect(), Vec::new());
    }
    (0..frame_count).partition(|i| i % n != n - 1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestPoint {
    pub position: Vector3<f64>,
    pub occupied: bool,
    /// Signed distance to the nearest scene surface.
    pub distance: f64,
}

/// Draws labelled points from held-out observations: each hit endpoint is
/// occupied, and free points are drawn uniformly along the beam up to three
/// range deviations before the hit (or up to the maximum range for a miss).
/// Free samples inside solids and samples outside the scene bounds are
/// dropped.
pub fn sample_test_points(scene: &Scene, test_frames: &[Observation], config: &EvalConfig) -> Vec<TestPoint> {
    let mut out = Vec::new();
    for (frame_index, obs) in test_frames.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(frame_index as u64);
        let image = obs.range_image();
        let width = obs.projection.width() as usize;
        for (i, &z) in image.iter().enumerate().step_by(config.beam_stride.max(1)) {
            let beam = BeamIndex {
                col: (i % width) as u32,
                row: (i / width) as u32,
            };
            let at = |r: f64| obs.pose.to_world(&obs.projection.beam_endpoint(beam, r));
            // Misses contribute free samples up to the maximum range.
            let free_end = match BeamKind::from_reading(z, &obs.projection) {
                BeamKind::Invalid => continue,
                BeamKind::Miss { max_range } => max_range,
                BeamKind::Hit { z } => {
                    let hit = at(z);
                    if scene.contains(&hit) {
                        out.push(TestPoint {
                            position: hit,
                            occupied: true,
                            distance: scene.signed_distance(&hit),
                        });
                    }
                    z - 3.0 * obs.model.sigma_r(z)
                }
            };
            if free_end <= obs.projection.min_range {
                continue;
            }
            for _ in 0..config.free_samples_per_beam {
                let r = rng.random_range(obs.projection.min_range..free_end);
                let p = at(r);
                let distance = scene.signed_distance(&p);
                if distance > 0.0 && scene.contains(&p) {
                    out.push(TestPoint {
                        position: p,
                        occupied: false,
                        distance,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub false_positive_rate: f64,
    pub true_positive_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandStats {
    pub lower: f64,
    pub upper: f64,
    pub occupied: usize,
    pub free: usize,
    pub correct: usize,
}

impl BandStats {
    pub fn count(&self) -> usize {
        self.occupied + self.free
    }

    pub fn accuracy(&self) -> f64 {
        if self.count() == 0 {
            f64::NAN
        } else {
            self.correct as f64 / self.count() as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub auc: f64,
    pub roc: Vec<RocPoint>,
    /// Threshold maximizing TPR - FPR; a point is occupied iff its score is
    /// at least this.
    pub threshold: f64,
    pub bands: Vec<BandStats>,
    pub occupied: usize,
    pub free: usize,
    pub unknown: usize,
}

/// Area under the ROC curve with ties counted as one half.
pub fn roc_auc(scores: &[(f64, bool)]) -> f64 {
    let (positives, negatives) = scores.iter().fold((0usize, 0usize), |(p, n), s| if s.1 { (p + 1, n) } else { (p, n + 1) });
    if positives == 0 || negatives == 0 {
        return f64::NAN;
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // Sum over positives of (negatives below + half the tied negatives).
    let (mut below, mut total, mut i) = (0usize, 0.0, 0);
    while i < sorted.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0usize, 0usize);
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            if sorted[j].1 {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        total += pos as f64 * (below as f64 + 0.5 * neg as f64);
        below += neg;
        i = j;
    }
    total / (positives as f64 * negatives as f64)
}

fn roc_curve(scores: &[(f64, bool)]) -> Vec<RocPoint> {
    let positives = scores.iter().filter(|s| s.1).count().max(1) as f64;
    let negatives = scores.iter().filter(|s| !s.1).count().max(1) as f64;
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut curve = vec![RocPoint {
        threshold: f64::INFINITY,
        false_positive_rate: 0.0,
        true_positive_rate: 0.0,
    }];
    let (mut tp, mut fp, mut i) = (0usize, 0usize, 0);
    while i < sorted.len() {
        let t = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == t {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        curve.push(RocPoint {
            threshold: t,
            false_positive_rate: fp as f64 / negatives,
            true_positive_rate: tp as f64 / positives,
        });
    }
    curve
}

fn band_index(edges: &[f64], distance: f64) -> usize {
    // Distances below the first edge count toward the first band.
    edges.iter().rposition(|&e| distance >= e).unwrap_or(0)
}

/// Scores test points against the map.
pub fn evaluate(map: &WaveletOctree, points: &[TestPoint], config: &EvalConfig, exec: Exec) -> EvalReport {
    let scores: Vec<f64> = exec.map_slice(points, |p| map.query_point(&p.position).value().unwrap_or(0.0));
    let labelled: Vec<(f64, bool)> = scores.iter().zip(points).map(|(&s, p)| (s, p.occupied)).collect();
    let roc = roc_curve(&labelled);
    let threshold = roc
        .iter()
        .skip(1)
        .max_by(|a, b| {
            (a.true_positive_rate - a.false_positive_rate)
                .partial_cmp(&(b.true_positive_rate - b.false_positive_rate))
                .unwrap()
                // Prefer the larger threshold on ties.
                .then(a.threshold.partial_cmp(&b.threshold).unwrap())
        })
        .map(|p| p.threshold)
        .unwrap_or(0.0);

    let edges = &config.band_edges;
    let mut bands: Vec<BandStats> = edges
        .iter()
        .enumerate()
        .map(|(i, &lower)| BandStats {
            lower,
            upper: edges.get(i + 1).copied().unwrap_or(f64::INFINITY),
            occupied: 0,
            free: 0,
            correct: 0,
        })
        .collect();
    let mut unknown = 0;
    for (&score, p) in scores.iter().zip(points) {
        if score == 0.0 {
            unknown += 1;
        }
        if bands.is_empty() {
            continue;
        }
        let band = &mut bands[band_index(edges, p.distance)];
        if p.occupied {
            band.occupied += 1;
        } else {
            band.free += 1;
        }
        let predicted = score >= threshold;
        if score != 0.0 && predicted == p.occupied {
            band.correct += 1;
        }
    }
    EvalReport {
        auc: roc_auc(&labelled),
        roc,
        threshold,
        bands,
        occupied: points.iter().filter(|p| p.occupied).count(),
        free: points.iter().filter(|p| !p.occupied).count(),
        unknown,
    }
}

pub fn write_roc_csv(mut w: impl Write, report: &EvalReport) -> io::Result<()> {
    writeln!(w, "threshold,false_positive_rate,true_positive_rate")?;
    for p in &report.roc {
        writeln!(w, "{},{},{}", p.threshold, p.false_positive_rate, p.true_positive_rate)?;
    }
    Ok(())
}

pub fn write_bands_csv(mut w: impl Write, report: &EvalReport) -> io::Result<()> {
    writeln!(w, "lower_m,upper_m,occupied,free,correct,accuracy")?;
    for b in &report.bands {
        writeln!(w, "{},{},{},{},{},{}", b.lower, b.upper, b.occupied, b.free, b.correct, b.accuracy())?;
    }
    Ok(())
}

pub fn write_summary_csv(mut w: impl Write, report: &EvalReport) -> io::Result<()> {
    writeln!(w, "auc,threshold,occupied,free,unknown")?;
    writeln!(w, "{},{},{},{},{}", report.auc, report.threshold, report.occupied, report.free, report.unknown)
}
