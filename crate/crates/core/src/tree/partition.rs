use nalgebra::Vector3;

use super::MapConfig;

/// The cubic region of space owned by one octree node.
///
/// `depth` 0 is the root cell; `depth == tree_height` is a finest-resolution
/// cell. `index` holds the integer cell coordinates at that depth, relative to
/// the root's minimum corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodePartition {
    pub depth: u8,
    pub index: [u32; 3],
    pub center: Vector3<f64>,
    pub width: f64,
}

impl NodePartition {
    pub fn root(config: &MapConfig) -> Self {
        Self::new(config, 0, [0, 0, 0])
    }

    pub fn new(config: &MapConfig, depth: u8, index: [u32; 3]) -> Self {
        let width = config.cell_width(depth);
        let center = config.origin
            + Vector3::new(
                (index[0] as f64 + 0.5) * width,
                (index[1] as f64 + 0.5) * width,
                (index[2] as f64 + 0.5) * width,
            );
        Self {
            depth,
            index,
            center,
            width,
        }
    }

    /// Partition at `depth` containing `point`, or `None` outside the root.
    pub fn containing(config: &MapConfig, point: &Vector3<f64>, depth: u8) -> Option<Self> {
        let cells = config.cells_per_side(depth);
        let width = config.cell_width(depth);
        let mut index = [0u32; 3];
        for axis in 0..3 {
            let rel = (point[axis] - config.origin[axis]) / width;
            if !(rel >= 0.0 && rel < cells as f64) {
                return None;
            }
            index[axis] = (rel.floor() as u64).min(cells - 1) as u32;
        }
        Some(Self::new(config, depth, index))
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.width
    }

    /// Half of the cube's space diagonal.
    pub fn half_diagonal(&self) -> f64 {
        0.5 * 3f64.sqrt() * self.width
    }

    pub fn min_corner(&self) -> Vector3<f64> {
        self.center - Vector3::repeat(self.half_width())
    }

    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let h = self.half_width();
        std::array::from_fn(|o| {
            self.center
                + Vector3::new(
                    if o & 1 != 0 { h } else { -h },
                    if o & 2 != 0 { h } else { -h },
                    if o & 4 != 0 { h } else { -h },
                )
        })
    }

    pub fn child(&self, octant: usize) -> Self {
        let quarter = 0.25 * self.width;
        let offset = Vector3::new(
            if octant & 1 != 0 { quarter } else { -quarter },
            if octant & 2 != 0 { quarter } else { -quarter },
            if octant & 4 != 0 { quarter } else { -quarter },
        );
        Self {
            depth: self.depth + 1,
            index: std::array::from_fn(|k| 2 * self.index[k] + ((octant >> k) & 1) as u32),
            center: self.center + offset,
            width: 0.5 * self.width,
        }
    }

    /// Octant of the child at `depth + 1` on the path towards `descendant`.
    pub fn octant_towards(&self, descendant: &NodePartition) -> usize {
        debug_assert!(descendant.depth > self.depth);
        let shift = descendant.depth - self.depth - 1;
        (0..3)
            .map(|k| (((descendant.index[k] >> shift) & 1) as usize) << k)
            .sum()
    }

    pub fn contains(&self, point: &Vector3<f64>) -> bool {
        let h = self.half_width();
        (0..3).all(|k| (point[k] - self.center[k]).abs() <= h)
    }

    /// True if `other` lies inside this partition (or equals it).
    pub fn is_ancestor_of(&self, other: &NodePartition) -> bool {
        if other.depth < self.depth {
            return false;
        }
        let shift = other.depth - self.depth;
        (0..3).all(|k| other.index[k] >> shift == self.index[k])
    }
}
