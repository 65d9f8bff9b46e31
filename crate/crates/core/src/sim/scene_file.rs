//! TOML scene description. Every quantity carries its unit:
//!
//! ```toml
//! [bounds]
//! min = "0 0 0 m"
//! max = "10 10 4 m"
//!
//! [[primitive]]
//! kind = "box"            # box | sphere | cylinder | plane
//! center = "2 2 0.5 m"
//! half_extents = "0.5 0.8 0.5 m"
//! rotation = "0 0 20 deg" # roll pitch yaw, optional
//! ```

use nalgebra::UnitQuaternion;
use serde::Deserialize;
use thiserror::Error;

use super::{Primitive, Scene, SceneError};
use crate::units::{Angles, Direction, Length, Position};

#[derive(Debug, Error)]
pub enum SceneFileError {
    #[error("scene file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("scene file: {0}")]
    Invalid(#[from] SceneError),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    bounds: Bounds,
    #[serde(default, rename = "primitive")]
    primitives: Vec<PrimitiveSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Bounds {
    min: Position,
    max: Position,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum PrimitiveSpec {
    Box {
        center: Position,
        half_extents: Position,
        rotation: Option<Angles>,
    },
    Sphere {
        center: Position,
        radius: Length,
    },
    Cylinder {
        center: Position,
        radius: Length,
        half_height: Length,
        rotation: Option<Angles>,
    },
    Plane {
        point: Position,
        normal: Direction,
    },
}

fn rotation(angles: Option<Angles>) -> UnitQuaternion<f64> {
    let a = angles.unwrap_or_default().0;
    UnitQuaternion::from_euler_angles(a.x, a.y, a.z)
}

pub fn parse_scene(text: &str) -> Result<Scene, SceneFileError> {
    let file: SceneFile = toml::from_str(text)?;
    let primitives = file
        .primitives
        .into_iter()
        .map(|spec| match spec {
            PrimitiveSpec::Box {
                center,
                half_extents,
                rotation: r,
            } => Primitive::Cuboid {
                center: center.0,
                half_extents: half_extents.0,
                rotation: rotation(r),
            },
            PrimitiveSpec::Sphere { center, radius } => Primitive::Sphere {
                center: center.0,
                radius: radius.0,
            },
            PrimitiveSpec::Cylinder {
                center,
                radius,
                half_height,
                rotation: r,
            } => Primitive::Cylinder {
                center: center.0,
                radius: radius.0,
                half_height: half_height.0,
                rotation: rotation(r),
            },
            PrimitiveSpec::Plane { point, normal } => Primitive::Plane {
                point: point.0,
                normal: normal.0,
            },
        })
        .collect();
    Ok(Scene::new(file.bounds.min.0, file.bounds.max.0, primitives)?)
}
