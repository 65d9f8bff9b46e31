//! Binary observation log (little-endian):
//!
//! ```text
//! "WVLG"              4 bytes
//! version             u16 (= 1)
//! header length       u32
//! header              UTF-8 TOML: sensor name, frame count, projection, model
//! frames              repeated `frame_count` times:
//!   timestamp         f64 seconds
//!   rotation          4 x f64 quaternion (w, x, y, z), sensor to world
//!   translation       3 x f64 meters
//!   payload kind      u8: 0 = range image, 1 = point list
//!   image             u32 width, u32 height, width*height x f32 ranges
//!   points            u32 count, count x 3 x f32 sensor-frame coordinates
//! ```
//!
//! Image ranges use `NaN` for invalid readings and `+inf` for no return.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ModelSpec, ProjectionSpec};
use crate::geometry::{Pose, ProjectionModel};
use crate::beam_model::BeamModelParams;
use crate::observation::{Observation, RangeData};

pub const LOG_MAGIC: [u8; 4] = *b"WVLG";
pub const LOG_FORMAT_VERSION: u16 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogError {
    #[error("bad magic at offset {offset}")]
    BadMagic { offset: usize },
    #[error("unsupported log version {version} at offset {offset}")]
    UnsupportedVersion { offset: usize, version: u16 },
    #[error("truncated log at offset {offset}")]
    Truncated { offset: usize },
    #[error("invalid header: {0}")]
    Header(String),
    #[error("invalid frame {frame} at offset {offset}: {reason}")]
    Frame { frame: usize, offset: usize, reason: String },
    #[error("{count} trailing bytes at offset {offset}")]
    TrailingBytes { offset: usize, count: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogHeader {
    pub sensor: String,
    pub projection: ProjectionModel,
    pub model: BeamModelParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub timestamp: f64,
    pub pose: Pose,
    pub data: RangeData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationLog {
    pub header: LogHeader,
    pub frames: Vec<Frame>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderText {
    sensor: String,
    frame_count: u64,
    projection: ProjectionSpec,
    model: ModelSpec,
}

impl ObservationLog {
    pub fn new(header: LogHeader) -> Self {
        Self {
            header,
            frames: Vec::new(),
        }
    }

    pub fn observation(&self, index: usize) -> Observation {
        let f = &self.frames[index];
        Observation {
            timestamp: f.timestamp,
            pose: f.pose,
            projection: self.header.projection,
            data: f.data.clone(),
            model: self.header.model,
        }
    }

    pub fn observations(&self) -> impl Iterator<Item = Observation> + '_ {
        (0..self.frames.len()).map(|i| self.observation(i))
    }

    pub fn encode(&self) -> Vec<u8> {
        let header = toml::to_string(&HeaderText {
            sensor: self.header.sensor.clone(),
            frame_count: self.frames.len() as u64,
            projection: ProjectionSpec::from_model(&self.header.projection),
            model: ModelSpec::from_params(&self.header.model),
        })
        .expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(&LOG_MAGIC);
        out.extend_from_slice(&LOG_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        for f in &self.frames {
            out.extend_from_slice(&f.timestamp.to_le_bytes());
            let q = f.pose.rotation.quaternion();
            for v in [q.w, q.i, q.j, q.k] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for v in f.pose.translation.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            match &f.data {
                RangeData::Image { width, height, ranges } => {
                    out.push(0);
                    out.extend_from_slice(&width.to_le_bytes());
                    out.extend_from_slice(&height.to_le_bytes());
                    for r in ranges {
                        out.extend_from_slice(&r.to_le_bytes());
                    }
                }
                RangeData::Points(points) => {
                    out.push(1);
                    out.extend_from_slice(&(points.len() as u32).to_le_bytes());
                    for p in points {
                        for v in p {
                            out.extend_from_slice(&v.to_le_bytes());
                        }
                    }
                }
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, LogError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != LOG_MAGIC {
            return Err(LogError::BadMagic { offset: 0 });
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != LOG_FORMAT_VERSION {
            return Err(LogError::UnsupportedVersion { offset: 4, version });
        }
        let len = u32::from_le_bytes(r.array()?) as usize;
        let text = std::str::from_utf8(r.take(len)?).map_err(|e| LogError::Header(e.to_string()))?;
        let header: HeaderText = toml::from_str(text).map_err(|e| LogError::Header(e.to_string()))?;
        let projection = header.projection.to_model().map_err(|e| LogError::Header(e.to_string()))?;
        let model = header.model.to_params().map_err(|e| LogError::Header(e.to_string()))?;

        let mut frames = Vec::new();
        let mut last_time = f64::NEG_INFINITY;
        for frame in 0..header.frame_count as usize {
            let offset = r.pos;
            let bad = |reason: &str| LogError::Frame {
                frame,
                offset,
                reason: reason.to_string(),
            };
            let timestamp = r.f64()?;
            let q = [r.f64()?, r.f64()?, r.f64()?, r.f64()?];
            let t = Vector3::new(r.f64()?, r.f64()?, r.f64()?);
            if !timestamp.is_finite() || !q.iter().all(|v| v.is_finite()) || !t.iter().all(|v| v.is_finite()) {
                return Err(bad("non-finite timestamp or pose"));
            }
            if timestamp < last_time {
                return Err(bad("timestamps are not in order"));
            }
            last_time = timestamp;
            let pose = Pose::from_components(q[0], q[1], q[2], q[3], t).map_err(|e| bad(&e.to_string()))?;
            let data = match r.array::<1>()?[0] {
                0 => {
                    let width = u32::from_le_bytes(r.array()?);
                    let height = u32::from_le_bytes(r.array()?);
                    if (width, height) != (projection.width(), projection.height()) {
                        return Err(bad("image size does not match the projection"));
                    }
                    let n = width as usize * height as usize;
                    let raw = r.take(4 * n)?;
                    let ranges = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
                    RangeData::Image { width, height, ranges }
                }
                1 => {
                    let n = u32::from_le_bytes(r.array()?) as usize;
                    let raw = r.take(12 * n)?;
                    let points: Vec<[f32; 3]> = raw
                        .chunks_exact(12)
                        .map(|c| std::array::from_fn(|k| f32::from_le_bytes(c[4 * k..4 * k + 4].try_into().unwrap())))
                        .collect();
                    if !points.iter().flatten().all(|v| v.is_finite()) {
                        return Err(bad("non-finite point"));
                    }
                    RangeData::Points(points)
                }
                _ => return Err(bad("unknown payload kind")),
            };
            frames.push(Frame { timestamp, pose, data });
        }
        if r.pos != bytes.len() {
            return Err(LogError::TrailingBytes {
                offset: r.pos,
                count: bytes.len() - r.pos,
            });
        }
        Ok(Self {
            header: LogHeader {
                sensor: header.sensor,
                projection,
                model,
            },
            frames,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LogError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            None => Err(LogError::Truncated { offset: self.pos }),
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
        }
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], LogError> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    fn f64(&mut self) -> Result<f64, LogError> {
        Ok(f64::from_le_bytes(self.array()?))
    }
}
