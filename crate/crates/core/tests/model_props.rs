mod common;

use nalgebra::Vector3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use wavelet_map::beam_model::{
    inverse_model_logodds, occupancy_probability, BeamMeasurement, BeamModelParams, RangeNoise, MAX_LATERAL_SLOPE,
    MAX_RANGE_SLOPE,
};
use wavelet_map::geometry::{BeamIndex, Pose, ProjectionKind, ProjectionModel, SensorCoords};
use wavelet_map::integrator::{integrate, integrate_naive, IntegratorConfig};
use wavelet_map::observation::{Observation, RangeData};

fn params(sigma_r: f64) -> BeamModelParams {
    BeamModelParams {
        sigma_theta: 0.01,
        range_noise: RangeNoise::Constant(sigma_r),
        ..BeamModelParams::default()
    }
}

fn one_pixel() -> ProjectionModel {
    ProjectionModel {
        kind: ProjectionKind::Pinhole {
            fx: 1.0,
            fy: 1.0,
            cx: 0.0,
            cy: 0.0,
            width: 1,
            height: 1,
        },
        min_range: 0.1,
        max_range: 20.0,
    }
}

/// Mean log-odds at range `r` over noisy readings of a surface at `surface`.
fn mean_logodds(r: f64, surface: f64, sigma_r: f64, draws: usize, seed: u64) -> f64 {
    let projection = one_pixel();
    let model = params(sigma_r);
    let noise = Normal::new(0.0, sigma_r).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beam = BeamIndex { col: 0, row: 0 };
    let x = SensorCoords { r, theta: 0.0, beam };
    let total: f64 = (0..draws)
        .map(|_| {
            let reading = BeamMeasurement::new(surface + noise.sample(&mut rng), beam, &projection);
            inverse_model_logodds(&x, &reading, &model)
        })
        .sum();
    total / draws as f64
}

#[test]
fn repeated_noisy_views_settle_near_zero_on_the_surface() {
    let (surface, sigma) = (5.0, 0.05);
    let draws = 10_000;
    let on = mean_logodds(surface, surface, sigma, draws, 1);
    let free = mean_logodds(surface - sigma, surface, sigma, draws, 2);
    let behind = mean_logodds(surface + 0.1 * sigma, surface, sigma, draws, 3);
    // The range profile is not odd about the surface, so the limit sits a
    // little below zero at the surface and crosses it just behind.
    assert!(on.abs() < 0.2, "surface mean {on}");
    assert!(behind >= 0.0, "behind mean {behind}");
    assert!(free < -1.0, "free mean {free}");
    assert!(free < on && on < behind);
}

#[test]
fn occupancy_is_continuous_on_a_fine_grid() {
    let step = 1e-3;
    let slack = 1e-12;
    let (v_lo, v_hi, w_lo, w_hi) = (-3.5, 6.5, -6.5, 6.5);
    let nv = ((v_hi - v_lo) / step) as usize;
    let nw = ((w_hi - w_lo) / step) as usize;
    let mut worst_v: f64 = 0.0;
    let mut worst_w: f64 = 0.0;
    // Every seventh row and column keeps the sweep short.
    for j in (0..=nw).step_by(7) {
        let w = w_lo + j as f64 * step;
        let mut prev = occupancy_probability(v_lo, w);
        for i in 1..=nv {
            let s = occupancy_probability(v_lo + i as f64 * step, w);
            worst_v = worst_v.max((s - prev).abs());
            prev = s;
        }
    }
    for i in (0..=nv).step_by(7) {
        let v = v_lo + i as f64 * step;
        let mut prev = occupancy_probability(v, w_lo);
        for j in 1..=nw {
            let s = occupancy_probability(v, w_lo + j as f64 * step);
            worst_w = worst_w.max((s - prev).abs());
            prev = s;
        }
    }
    assert!(worst_v <= step * MAX_RANGE_SLOPE + slack, "range jump {worst_v}");
    assert!(worst_w <= step * MAX_LATERAL_SLOPE + slack, "lateral jump {worst_w}");
}

#[test]
fn all_invalid_observation_is_a_no_op() {
    let mut map = common::room_map(5, 0.25);
    let before = map.serialize();
    let (width, height) = (16, 12);
    let obs = Observation {
        timestamp: 0.0,
        pose: Pose::from_position_ypr(Vector3::new(4.0, 4.0, 4.0), 0.3, 0.0, 0.0),
        projection: ProjectionModel {
            kind: ProjectionKind::Pinhole {
                fx: 10.0,
                fy: 10.0,
                cx: 7.5,
                cy: 5.5,
                width,
                height,
            },
            min_range: 0.1,
            max_range: 10.0,
        },
        data: RangeData::Image {
            width,
            height,
            ranges: vec![f32::NAN; (width * height) as usize],
        },
        model: params(0.05),
    };
    let cfg = IntegratorConfig {
        max_update_resolution: 0.25,
        ..IntegratorConfig::default()
    };
    let stats = integrate(&mut map, &obs, &cfg).unwrap();
    assert_eq!(stats.nodes_visited, 1);
    assert_eq!(map.serialize(), before);
    integrate_naive(&mut map, &obs, &cfg).unwrap();
    assert_eq!(map.serialize(), before);
}

proptest! {
    #[test]
    fn probability_stays_in_the_unit_interval(v in -10.0f64..10.0, w in -10.0f64..10.0) {
        let s = occupancy_probability(v, w);
        prop_assert!((0.0..=1.0).contains(&s));
        // Far from the beam or far behind the surface nothing is known.
        if w.abs() >= 6.0 || v >= 6.0 {
            prop_assert_eq!(s, 0.5);
        }
    }

    #[test]
    fn probability_is_even_in_the_lateral_offset(v in -10.0f64..10.0, w in 0.0f64..10.0) {
        prop_assert!((occupancy_probability(v, w) - occupancy_probability(v, -w)).abs() <= 1e-15);
    }

    #[test]
    fn widening_the_offset_never_strengthens_evidence(v in -10.0f64..10.0, w in 0.0f64..6.0, dw in 0.0f64..3.0) {
        let near = (occupancy_probability(v, w) - 0.5).abs();
        let far = (occupancy_probability(v, w + dw) - 0.5).abs();
        prop_assert!(far <= near + 1e-15);
    }

    #[test]
    fn logodds_updates_respect_the_clamp(s in 0.0f64..=1.0) {
        let p = params(0.05);
        let l = p.logodds(s);
        prop_assert!(l >= p.update_lo && l <= p.update_hi);
    }
}
