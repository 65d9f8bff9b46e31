//! Quantity strings for configuration files: one or more numbers followed by
//! a unit, e.g. `"5 cm"`, `"0.3 deg"`, `"1 2 0.5 m"`, `"0.002 1/m"`.
//! Values are converted to SI (meters, radians, seconds). A missing or
//! mismatched unit is an error.

use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Angle,
    InverseLength,
    Time,
    Dimensionless,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::Length => "length (m, cm, mm, km)",
            Dimension::Angle => "angle (rad, mrad, deg)",
            Dimension::InverseLength => "inverse length (1/m, 1/cm, 1/mm)",
            Dimension::Time => "time (s, ms, us)",
            Dimension::Dimensionless => "a plain number",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("cannot read {text:?} as {expected}: {reason}")]
pub struct UnitError {
    pub text: String,
    pub expected: Dimension,
    pub reason: String,
}

fn unit_factor(unit: &str, dim: Dimension) -> Option<f64> {
    match (dim, unit) {
        (Dimension::Length, "m") => Some(1.0),
        (Dimension::Length, "cm") => Some(0.01),
        (Dimension::Length, "mm") => Some(0.001),
        (Dimension::Length, "km") => Some(1000.0),
        (Dimension::Angle, "rad") => Some(1.0),
        (Dimension::Angle, "mrad") => Some(0.001),
        (Dimension::Angle, "deg") => Some(std::f64::consts::PI / 180.0),
        (Dimension::InverseLength, "1/m") => Some(1.0),
        (Dimension::InverseLength, "1/cm") => Some(100.0),
        (Dimension::InverseLength, "1/mm") => Some(1000.0),
        (Dimension::Time, "s") => Some(1.0),
        (Dimension::Time, "ms") => Some(0.001),
        (Dimension::Time, "us") => Some(1e-6),
        (Dimension::Dimensionless, "1") => Some(1.0),
        _ => None,
    }
}

/// Parses `count` numbers followed by a unit of dimension `dim`.
pub fn parse_values(text: &str, dim: Dimension, count: usize) -> Result<Vec<f64>, UnitError> {
    let err = |reason: String| UnitError {
        text: text.to_string(),
        expected: dim,
        reason,
    };
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let numeric = tokens.iter().take_while(|t| t.parse::<f64>().is_ok()).count();
    let unit_tokens = &tokens[numeric..];
    let factor = match (unit_tokens, dim) {
        ([], Dimension::Dimensionless) => 1.0,
        ([], _) => return Err(err("missing unit".into())),
        ([unit], _) => unit_factor(unit, dim).ok_or_else(|| err(format!("unknown unit {unit:?}")))?,
        _ => return Err(err("expected numbers followed by a single unit".into())),
    };
    if numeric != count {
        return Err(err(format!("expected {count} number(s), found {numeric}")));
    }
    tokens[..numeric]
        .iter()
        .map(|t| {
            let v: f64 = t.parse().unwrap();
            if v.is_finite() {
                Ok(v * factor)
            } else {
                Err(err("value is not finite".into()))
            }
        })
        .collect()
}

pub fn parse_scalar(text: &str, dim: Dimension) -> Result<f64, UnitError> {
    Ok(parse_values(text, dim, 1)?[0])
}

pub fn parse_vector3(text: &str, dim: Dimension) -> Result<Vector3<f64>, UnitError> {
    let v = parse_values(text, dim, 3)?;
    Ok(Vector3::new(v[0], v[1], v[2]))
}

fn si_unit(dim: Dimension) -> &'static str {
    match dim {
        Dimension::Length => "m",
        Dimension::Angle => "rad",
        Dimension::InverseLength => "1/m",
        Dimension::Time => "s",
        Dimension::Dimensionless => "",
    }
}

/// Lossless text form in SI units.
pub fn format_scalar(value: f64, dim: Dimension) -> String {
    format!("{value} {}", si_unit(dim)).trim_end().to_string()
}

pub fn format_vector3(v: &Vector3<f64>, dim: Dimension) -> String {
    format!("{} {} {} {}", v.x, v.y, v.z, si_unit(dim)).trim_end().to_string()
}

macro_rules! scalar_quantity {
    ($(#[$doc:meta])* $name:ident, $dim:expr) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
        pub struct $name(pub f64);

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                parse_scalar(&text, $dim).map($name).map_err(serde::de::Error::custom)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&format_scalar(self.0, $dim))
            }
        }
    };
}

macro_rules! vector_quantity {
    ($(#[$doc:meta])* $name:ident, $dim:expr) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Default)]
        pub struct $name(pub Vector3<f64>);

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                parse_vector3(&text, $dim).map($name).map_err(serde::de::Error::custom)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&format_vector3(&self.0, $dim))
            }
        }
    };
}

scalar_quantity!(
    /// Length in meters.
    Length,
    Dimension::Length
);
scalar_quantity!(
    /// Angle in radians.
    Angle,
    Dimension::Angle
);
scalar_quantity!(
    /// Inverse length in 1/m.
    InverseLength,
    Dimension::InverseLength
);
scalar_quantity!(
    /// Duration in seconds.
    Duration,
    Dimension::Time
);
vector_quantity!(
    /// Position or extent in meters.
    Position,
    Dimension::Length
);
vector_quantity!(
    /// Roll, pitch, yaw in radians.
    Angles,
    Dimension::Angle
);
vector_quantity!(
    /// Unitless direction.
    Direction,
    Dimension::Dimensionless
);
