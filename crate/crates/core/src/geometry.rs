//! Sensor poses, projection models and the mapping of world points and
//! octree partitions into sensor coordinates `(r, theta)`.
//!
//! For the spherical model `r` is the range and `theta` the great-circle angle
//! (radians) to the nearest beam of the image grid. For the pinhole model `r`
//! is the depth along the optical axis and `theta` the distance to the nearest
//! pixel center in normalized image coordinates (pixel offset divided by the
//! focal length), which is a small-angle offset in radians.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

use crate::tree::NodePartition;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid projection model: {0}")]
    InvalidProjection(String),
    #[error("pose rotation is not a unit quaternion (norm {0})")]
    NonUnitRotation(f64),
}

/// Rigid transform from the sensor frame into the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Builds a pose from raw quaternion components, checking the norm.
    pub fn from_components(w: f64, x: f64, y: f64, z: f64, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let q = nalgebra::Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if !((norm - 1.0).abs() <= 1e-9) {
            return Err(GeometryError::NonUnitRotation(norm));
        }
        Ok(Self {
            rotation: UnitQuaternion::new_unchecked(q),
            translation,
        })
    }

    /// Pose at `translation` looking along the yaw/pitch given in radians.
    pub fn from_position_ypr(translation: Vector3<f64>, yaw: f64, pitch: f64, roll: f64) -> Self {
        Self {
            rotation: UnitQuaternion::from_euler_angles(roll, pitch, yaw),
            translation,
        }
    }

    pub fn to_sensor(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.inverse_transform_vector(&(world - self.translation))
    }

    pub fn to_world(&self, local: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * local + self.translation
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

/// Image coordinates of one beam.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BeamIndex {
    pub col: u32,
    pub row: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProjectionKind {
    /// Beams on a regular azimuth (columns) by elevation (rows) grid with
    /// inclusive end points.
    Spherical {
        azimuth_min: f64,
        azimuth_max: f64,
        elevation_min: f64,
        elevation_max: f64,
        width: u32,
        height: u32,
    },
    /// Camera frame: x right, y down, z forward. Pixel centers sit at integer
    /// image coordinates.
    Pinhole {
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionModel {
    pub kind: ProjectionKind,
    pub min_range: f64,
    pub max_range: f64,
}

/// Coordinates of a point relative to the observation's beam grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorCoords {
    pub r: f64,
    pub theta: f64,
    pub beam: BeamIndex,
}

/// Per-row column span of candidate beams. `cols` may hold two spans when the
/// window wraps around a full-circle azimuth grid.
/// Inclusive column range within one row.
pub type ColumnSpan = (u32, u32);

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BeamWindow {
    pub rows: Vec<(u32, [Option<ColumnSpan>; 2])>,
}

impl BeamWindow {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn for_each(&self, mut f: impl FnMut(BeamIndex)) {
        for (row, spans) in &self.rows {
            for &(a, b) in spans.iter().flatten() {
                for col in a..=b {
                    f(BeamIndex { col, row: *row });
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.rows
            .iter()
            .map(|(_, spans)| spans.iter().flatten().map(|(a, b)| (b - a + 1) as usize).sum::<usize>())
            .sum()
    }
}

/// Conservative image of a cubic partition in sensor coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionProjection {
    /// Range coordinate of the partition center.
    pub center_r: f64,
    /// Interval containing the range coordinate of every point in the cube.
    pub r_min: f64,
    pub r_max: f64,
    /// Largest `theta` offset between the center's projection and the
    /// projection of any point of the cube (tight where cheap).
    pub theta_radius: f64,
    /// Half extent along `r` used by the error bound.
    pub v_hr: f64,
    /// Half extent along `theta` used by the error bound.
    pub v_htheta: f64,
    /// Sensor-frame center of the partition.
    pub center_sensor: Vector3<f64>,
    /// The cube contains the sensor origin (or crosses the pinhole image
    /// plane), so no finite angular bound exists.
    pub straddles_origin: bool,
    /// Every point of the cube is behind the pinhole image plane.
    pub behind_sensor: bool,
    /// No point of the cube lies within the image footprint and range limits.
    pub fully_outside: bool,
    /// The `r` and `theta` offsets vary independently over the cube (pinhole)
    /// instead of sharing one ball of radius `v_hr`.
    pub independent_extents: bool,
}

fn wrap_angle(a: f64) -> f64 {
    let mut x = (a + PI).rem_euclid(TAU) - PI;
    if x <= -PI {
        x += TAU;
    }
    x
}

/// Great-circle angle between two (not necessarily unit) vectors.
pub fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

impl ProjectionModel {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |s: &str| Err(GeometryError::InvalidProjection(s.to_string()));
        if !(self.min_range > 0.0 && self.max_range > self.min_range && self.max_range.is_finite()) {
            return bad("ranges must satisfy max_range > min_range > 0");
        }
        match self.kind {
            ProjectionKind::Spherical {
                azimuth_min,
                azimuth_max,
                elevation_min,
                elevation_max,
                width,
                height,
            } => {
                if width == 0 || height == 0 {
                    return bad("image dimensions must be at least 1");
                }
                if !(azimuth_max >= azimuth_min && azimuth_max - azimuth_min < TAU) {
                    return bad("azimuth extent must be in [0, 2*pi)");
                }
                if !(elevation_min >= -PI / 2.0 && elevation_max <= PI / 2.0 && elevation_max >= elevation_min) {
                    return bad("elevation extent must lie in [-pi/2, pi/2]");
                }
            }
            ProjectionKind::Pinhole {
                fx,
                fy,
                cx,
                cy,
                width,
                height,
            } => {
                if width == 0 || height == 0 {
                    return bad("image dimensions must be at least 1");
                }
                if !(fx > 0.0 && fy > 0.0 && cx.is_finite() && cy.is_finite()) {
                    return bad("focal lengths must be positive");
                }
            }
        }
        Ok(())
    }

    pub fn width(&self) -> u32 {
        match self.kind {
            ProjectionKind::Spherical { width, .. } | ProjectionKind::Pinhole { width, .. } => width,
        }
    }

    pub fn height(&self) -> u32 {
        match self.kind {
            ProjectionKind::Spherical { height, .. } | ProjectionKind::Pinhole { height, .. } => height,
        }
    }

    pub fn num_beams(&self) -> usize {
        self.width() as usize * self.height() as usize
    }

    pub fn is_pinhole(&self) -> bool {
        matches!(self.kind, ProjectionKind::Pinhole { .. })
    }

    /// Sensor frame relative to a body frame with x forward, y left, z up.
    /// Spherical sensors share the body axes; pinhole sensors use the optical
    /// convention (z forward, x right, y down).
    pub fn body_mount(&self) -> Pose {
        if self.is_pinhole() {
            let m = Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0);
            Pose::new(UnitQuaternion::from_matrix(&m), Vector3::zeros())
        } else {
            Pose::identity()
        }
    }

    /// Sensor pose for a body pose.
    pub fn sensor_pose(&self, body: &Pose) -> Pose {
        body.compose(&self.body_mount())
    }

    fn azimuth_step(&self) -> f64 {
        match self.kind {
            ProjectionKind::Spherical {
                azimuth_min,
                azimuth_max,
                width,
                ..
            } if width > 1 => (azimuth_max - azimuth_min) / (width - 1) as f64,
            _ => 0.0,
        }
    }

    fn elevation_step(&self) -> f64 {
        match self.kind {
            ProjectionKind::Spherical {
                elevation_min,
                elevation_max,
                height,
                ..
            } if height > 1 => (elevation_max - elevation_min) / (height - 1) as f64,
            _ => 0.0,
        }
    }

    /// True if the azimuth grid closes on itself (360 degree scanner).
    pub fn wraps_azimuth(&self) -> bool {
        match self.kind {
            ProjectionKind::Spherical {
                azimuth_min,
                azimuth_max,
                width,
                ..
            } => width > 1 && (azimuth_max - azimuth_min) + self.azimuth_step() >= TAU - 1e-9,
            _ => false,
        }
    }

    fn column_azimuth(&self, col: u32) -> f64 {
        match self.kind {
            ProjectionKind::Spherical {
                azimuth_min,
                azimuth_max,
                width,
                ..
            } => {
                if width == 1 {
                    0.5 * (azimuth_min + azimuth_max)
                } else {
                    azimuth_min + col as f64 * self.azimuth_step()
                }
            }
            _ => unreachable!("spherical only"),
        }
    }

    fn row_elevation(&self, row: u32) -> f64 {
        match self.kind {
            ProjectionKind::Spherical {
                elevation_min,
                elevation_max,
                height,
                ..
            } => {
                if height == 1 {
                    0.5 * (elevation_min + elevation_max)
                } else {
                    elevation_min + row as f64 * self.elevation_step()
                }
            }
            _ => unreachable!("spherical only"),
        }
    }

    /// Unit direction of a beam in the sensor frame.
    pub fn beam_direction(&self, beam: BeamIndex) -> Vector3<f64> {
        match self.kind {
            ProjectionKind::Spherical { .. } => {
                let (az, el) = (self.column_azimuth(beam.col), self.row_elevation(beam.row));
                Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
            }
            ProjectionKind::Pinhole { fx, fy, cx, cy, .. } => {
                Vector3::new((beam.col as f64 - cx) / fx, (beam.row as f64 - cy) / fy, 1.0).normalize()
            }
        }
    }

    /// Sensor-frame endpoint of a beam with measured range coordinate `r`.
    pub fn beam_endpoint(&self, beam: BeamIndex, r: f64) -> Vector3<f64> {
        match self.kind {
            ProjectionKind::Spherical { .. } => self.beam_direction(beam) * r,
            ProjectionKind::Pinhole { fx, fy, cx, cy, .. } => {
                Vector3::new((beam.col as f64 - cx) / fx, (beam.row as f64 - cy) / fy, 1.0) * r
            }
        }
    }

    /// Range coordinate of a sensor-frame point.
    pub fn range_of(&self, p: &Vector3<f64>) -> f64 {
        match self.kind {
            ProjectionKind::Spherical { .. } => p.norm(),
            ProjectionKind::Pinhole { .. } => p.z,
        }
    }

    /// Range coordinate of a hit at distance `t` along the sensor-frame unit
    /// direction `dir`.
    pub fn range_along(&self, dir: &Vector3<f64>, t: f64) -> f64 {
        match self.kind {
            ProjectionKind::Spherical { .. } => t,
            ProjectionKind::Pinhole { .. } => t * dir.z,
        }
    }

    /// Projects a sensor-frame point onto the beam grid.
    pub fn project(&self, p: &Vector3<f64>) -> Option<SensorCoords> {
        match self.kind {
            ProjectionKind::Spherical { .. } => {
                let r = p.norm();
                if !(r > 0.0) || !r.is_finite() {
                    return None;
                }
                let (beam, theta) = self.nearest_spherical_beam(p);
                Some(SensorCoords { r, theta, beam })
            }
            ProjectionKind::Pinhole {
                fx,
                fy,
                cx,
                cy,
                width,
                height,
            } => {
                if !(p.z > 0.0) || !p.z.is_finite() {
                    return None;
                }
                let (nx, ny) = (p.x / p.z, p.y / p.z);
                let (u, v) = (fx * nx + cx, fy * ny + cy);
                let col = u.round().clamp(0.0, (width - 1) as f64);
                let row = v.round().clamp(0.0, (height - 1) as f64);
                let du = (col - cx) / fx - nx;
                let dv = (row - cy) / fy - ny;
                Some(SensorCoords {
                    r: p.z,
                    theta: du.hypot(dv),
                    beam: BeamIndex {
                        col: col as u32,
                        row: row as u32,
                    },
                })
            }
        }
    }

    /// Columns in one row closest in azimuth to `az`; the best one is among
    /// the returned candidates.
    fn candidate_columns(&self, az: f64) -> [u32; 3] {
        let width = self.width();
        if width == 1 {
            return [0; 3];
        }
        let step = self.azimuth_step();
        let ProjectionKind::Spherical {
            azimuth_min,
            azimuth_max,
            ..
        } = self.kind
        else {
            unreachable!()
        };
        let nearest = if self.wraps_azimuth() {
            let rel = (az - azimuth_min).rem_euclid(TAU);
            ((rel / step).round() as i64).rem_euclid(width as i64)
        } else {
            let center = 0.5 * (azimuth_min + azimuth_max);
            let half = 0.5 * (azimuth_max - azimuth_min);
            let rel = wrap_angle(az - center).clamp(-half, half);
            (((rel + half) / step).round() as i64).clamp(0, width as i64 - 1)
        };
        let w = width as i64;
        let pick = |c: i64| {
            if self.wraps_azimuth() {
                c.rem_euclid(w) as u32
            } else {
                c.clamp(0, w - 1) as u32
            }
        };
        [pick(nearest - 1), pick(nearest), pick(nearest + 1)]
    }

    /// Exact nearest beam by great-circle angle.
    fn nearest_spherical_beam(&self, p: &Vector3<f64>) -> (BeamIndex, f64) {
        let height = self.height();
        let az = p.y.atan2(p.x);
        let el = (p.z / p.norm()).clamp(-1.0, 1.0).asin();
        let el_step = self.elevation_step();
        let start = if height == 1 {
            0
        } else {
            let el0 = self.row_elevation(0);
            (((el - el0) / el_step).round() as i64).clamp(0, height as i64 - 1) as u32
        };

        let mut best = (BeamIndex { col: 0, row: start }, f64::INFINITY);
        let visit_row = |row: u32, best: &mut (BeamIndex, f64)| {
            for col in self.candidate_columns(az) {
                let beam = BeamIndex { col, row };
                let angle = angle_between(p, &self.beam_direction(beam));
                if angle < best.1 || (angle == best.1 && beam < best.0) {
                    *best = (beam, angle);
                }
            }
        };
        visit_row(start, &mut best);
        // Expand outwards; the angle to any beam in a row is at least the
        // elevation difference to that row.
        let (mut down, mut up) = (start as i64 - 1, start as i64 + 1);
        loop {
            let down_gap = if down >= 0 { el - self.row_elevation(down as u32) } else { f64::INFINITY };
            let up_gap = if up < height as i64 { self.row_elevation(up as u32) - el } else { f64::INFINITY };
            let (gap, row) = if down_gap <= up_gap { (down_gap, down) } else { (up_gap, up) };
            if !gap.is_finite() || gap > best.1 {
                break;
            }
            visit_row(row as u32, &mut best);
            if row == down {
                down -= 1;
            } else {
                up += 1;
            }
        }
        best
    }

    /// Candidate beams whose direction lies within `radius` (theta units) of
    /// the sensor-frame direction `center`. A superset is returned.
    pub fn beam_window(&self, center: &Vector3<f64>, radius: f64) -> BeamWindow {
        match self.kind {
            ProjectionKind::Spherical { .. } => self.spherical_window(center, radius),
            ProjectionKind::Pinhole {
                fx,
                fy,
                cx,
                cy,
                width,
                height,
            } => {
                if !(center.z > 0.0) || !radius.is_finite() {
                    return self.full_window();
                }
                let (nx, ny) = (center.x / center.z, center.y / center.z);
                let lo_col = ((nx - radius) * fx + cx).ceil().max(0.0);
                let hi_col = ((nx + radius) * fx + cx).floor().min((width - 1) as f64);
                let lo_row = ((ny - radius) * fy + cy).ceil().max(0.0);
                let hi_row = ((ny + radius) * fy + cy).floor().min((height - 1) as f64);
                if lo_col > hi_col || lo_row > hi_row {
                    return BeamWindow::default();
                }
                BeamWindow {
                    rows: (lo_row as u32..=hi_row as u32)
                        .map(|r| (r, [Some((lo_col as u32, hi_col as u32)), None]))
                        .collect(),
                }
            }
        }
    }

    pub fn full_window(&self) -> BeamWindow {
        BeamWindow {
            rows: (0..self.height())
                .map(|r| (r, [Some((0, self.width() - 1)), None]))
                .collect(),
        }
    }

    fn spherical_window(&self, center: &Vector3<f64>, radius: f64) -> BeamWindow {
        if !(center.norm() > 0.0) || !(radius < PI) {
            return self.full_window();
        }
        let c = center.normalize();
        let el_c = c.z.clamp(-1.0, 1.0).asin();
        let az_c = c.y.atan2(c.x);
        let mut rows = Vec::new();
        for row in 0..self.height() {
            let el = self.row_elevation(row);
            if (el - el_c).abs() > radius {
                continue;
            }
            // Largest azimuth offset within `radius` on this row.
            let denom = el_c.cos() * el.cos();
            let num = radius.cos() - el_c.sin() * el.sin();
            let max_daz = if denom <= 1e-12 {
                PI
            } else {
                let ratio = num / denom;
                if ratio <= -1.0 {
                    PI
                } else {
                    ratio.min(1.0).acos()
                }
            };
            if let Some(spans) = self.azimuth_spans(az_c, max_daz + 1e-12) {
                rows.push((row, spans));
            }
        }
        BeamWindow { rows }
    }

    /// Column spans with azimuth within `half_width` of `az_c`.
    fn azimuth_spans(&self, az_c: f64, half_width: f64) -> Option<[Option<(u32, u32)>; 2]> {
        let width = self.width();
        if width == 1 {
            let d = wrap_angle(self.column_azimuth(0) - az_c).abs();
            return (d <= half_width).then_some([Some((0, 0)), None]);
        }
        if half_width >= PI {
            return Some([Some((0, width - 1)), None]);
        }
        let ProjectionKind::Spherical { azimuth_min, .. } = self.kind else {
            unreachable!()
        };
        let step = self.azimuth_step();
        let start = az_c - half_width;
        if self.wraps_azimuth() {
            let first = ((start - azimuth_min).rem_euclid(TAU) / step).ceil() as i64;
            let count = ((2.0 * half_width) / step).floor() as i64 + 1;
            let count = count.min(width as i64);
            let first = first.rem_euclid(width as i64);
            let last = first + count - 1;
            if last < width as i64 {
                return Some([Some((first as u32, last as u32)), None]);
            }
            return Some([
                Some((first as u32, width - 1)),
                Some((0, (last - width as i64) as u32)),
            ]);
        }
        // Non-wrapping grid: express the window relative to the grid center
        // so windows that cross the +-pi seam are handled.
        let center = azimuth_min + 0.5 * step * (width - 1) as f64;
        let rel = wrap_angle(az_c - center);
        let grid_half = 0.5 * step * (width - 1) as f64;
        let a = rel - half_width + grid_half;
        let b = rel + half_width + grid_half;
        let mut spans: [Option<(u32, u32)>; 2] = [None, None];
        let mut n = 0;
        // The window may also reach the grid from the far side of the seam.
        for shift in [-TAU, 0.0, TAU] {
            let (lo, hi) = (a + shift, b + shift);
            let first = (lo / step).ceil().max(0.0);
            let last = (hi / step).floor().min((width - 1) as f64);
            if first <= last && n < 2 {
                spans[n] = Some((first as u32, last as u32));
                n += 1;
            }
        }
        (n > 0).then_some(spans)
    }

    /// Whether a sensor-frame direction falls inside the image footprint
    /// (expanded by half a pixel).
    fn direction_in_footprint(&self, p: &Vector3<f64>) -> bool {
        match self.kind {
            ProjectionKind::Spherical {
                azimuth_min,
                azimuth_max,
                elevation_min,
                elevation_max,
                ..
            } => {
                let n = p.norm();
                if n == 0.0 {
                    return true;
                }
                let el = (p.z / n).asin();
                let (hs_az, hs_el) = (0.5 * self.azimuth_step(), 0.5 * self.elevation_step());
                if el < elevation_min - hs_el || el > elevation_max + hs_el {
                    return false;
                }
                if self.wraps_azimuth() {
                    return true;
                }
                let center = 0.5 * (azimuth_min + azimuth_max);
                let rel = wrap_angle(p.y.atan2(p.x) - center).abs();
                rel <= 0.5 * (azimuth_max - azimuth_min) + hs_az
            }
            ProjectionKind::Pinhole {
                fx,
                fy,
                cx,
                cy,
                width,
                height,
            } => {
                if p.z <= 0.0 {
                    return false;
                }
                let (u, v) = (fx * p.x / p.z + cx, fy * p.y / p.z + cy);
                u >= -0.5 && u <= width as f64 - 0.5 && v >= -0.5 && v <= height as f64 - 0.5
            }
        }
    }
}

/// Maps a world point into sensor coordinates relative to the nearest beam.
/// Returns `None` for points at the sensor origin or behind a pinhole camera.
pub fn to_sensor_coords(pose: &Pose, projection: &ProjectionModel, world_point: &Vector3<f64>) -> Option<SensorCoords> {
    if !world_point.iter().all(|x| x.is_finite()) {
        return None;
    }
    projection.project(&pose.to_sensor(world_point))
}

/// Conservative bounds on the sensor coordinates of every point in a
/// partition.
pub fn partition_to_sensor(pose: &Pose, projection: &ProjectionModel, partition: &NodePartition) -> PartitionProjection {
    let center = pose.to_sensor(&partition.center);
    let h = partition.half_diagonal();
    match projection.kind {
        ProjectionKind::Spherical { .. } => {
            let d = center.norm();
            let straddles = d <= h;
            let (r_min, r_max) = ((d - h).max(0.0), d + h);
            let (theta_radius, v_htheta) = if straddles {
                (PI, f64::INFINITY)
            } else {
                ((h / d).asin(), h / (d - h))
            };
            let fully_outside = !straddles
                && (r_min > projection.max_range || !spherical_cone_touches_footprint(projection, &center, theta_radius));
            PartitionProjection {
                center_r: d,
                r_min,
                r_max,
                theta_radius,
                v_hr: h,
                v_htheta,
                center_sensor: center,
                straddles_origin: straddles,
                behind_sensor: false,
                fully_outside,
                independent_extents: false,
            }
        }
        ProjectionKind::Pinhole { .. } => {
            let corners = partition.corners().map(|c| pose.to_sensor(&c));
            let z_min = corners.iter().map(|c| c.z).fold(f64::INFINITY, f64::min);
            let z_max = corners.iter().map(|c| c.z).fold(f64::NEG_INFINITY, f64::max);
            let behind = z_max <= 0.0;
            let straddles = !behind && z_min <= 0.0;
            let v_hr = (z_max - center.z).max(center.z - z_min);
            let (theta_radius, v_htheta) = if behind || straddles {
                (f64::INFINITY, f64::INFINITY)
            } else {
                // Perspective maps the cube onto the convex hull of its
                // projected corners.
                let (nx, ny) = (center.x / center.z, center.y / center.z);
                let radius = corners
                    .iter()
                    .map(|c| (c.x / c.z - nx).hypot(c.y / c.z - ny))
                    .fold(0.0, f64::max);
                (radius, radius)
            };
            let fully_outside = behind
                || (!straddles && (z_min > projection.max_range || !pinhole_hull_touches_footprint(projection, &corners)));
            PartitionProjection {
                center_r: center.z,
                r_min: z_min,
                r_max: z_max,
                theta_radius,
                v_hr,
                v_htheta,
                center_sensor: center,
                straddles_origin: straddles,
                behind_sensor: behind,
                fully_outside,
                independent_extents: true,
            }
        }
    }
}

fn spherical_cone_touches_footprint(projection: &ProjectionModel, center: &Vector3<f64>, radius: f64) -> bool {
    let ProjectionKind::Spherical {
        azimuth_min,
        azimuth_max,
        elevation_min,
        elevation_max,
        ..
    } = projection.kind
    else {
        unreachable!()
    };
    if projection.direction_in_footprint(center) {
        return true;
    }
    let c = center.normalize();
    let el = c.z.clamp(-1.0, 1.0).asin();
    let hs_el = 0.5 * projection.elevation_step();
    if el - radius > elevation_max + hs_el || el + radius < elevation_min - hs_el {
        return false;
    }
    if projection.wraps_azimuth() || radius >= PI / 2.0 - el.abs() {
        return true;
    }
    // Azimuth half-width of the cone at its widest elevation.
    let daz = (radius.sin() / el.cos()).min(1.0).asin();
    let mid = 0.5 * (azimuth_min + azimuth_max);
    let rel = wrap_angle(c.y.atan2(c.x) - mid).abs();
    rel <= 0.5 * (azimuth_max - azimuth_min) + 0.5 * projection.azimuth_step() + daz
}

fn pinhole_hull_touches_footprint(projection: &ProjectionModel, corners: &[Vector3<f64>; 8]) -> bool {
    let ProjectionKind::Pinhole {
        fx,
        fy,
        cx,
        cy,
        width,
        height,
    } = projection.kind
    else {
        unreachable!()
    };
    let us = corners.iter().map(|c| fx * c.x / c.z + cx);
    let vs = corners.iter().map(|c| fy * c.y / c.z + cy);
    let (u_lo, u_hi) = us.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), u| (a.min(u), b.max(u)));
    let (v_lo, v_hi) = vs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    u_hi >= -0.5 && u_lo <= width as f64 - 0.5 && v_hi >= -0.5 && v_lo <= height as f64 - 0.5
}
