use crate::haar::{self, DetailBlock, NUM_CHILDREN, NUM_DETAILS};

/// A measurement update expressed in wavelet coefficients for one partition:
/// the update's mean over the partition plus an optional detail subtree.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoefficientUpdate {
    pub scale: f64,
    pub(crate) node: Option<Box<UpdateNode>>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct UpdateNode {
    pub details: DetailBlock,
    pub children: [Option<Box<UpdateNode>>; NUM_CHILDREN],
}

impl CoefficientUpdate {
    /// The same value everywhere in the partition.
    pub fn uniform(value: f64) -> Self {
        Self {
            scale: value,
            node: None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.scale == 0.0 && self.node.is_none()
    }

    pub fn is_uniform(&self) -> bool {
        self.node.is_none()
    }

    /// Forward-lifts eight child updates into their parent. Children with no
    /// structure and equal values collapse into a uniform update.
    pub fn from_children(children: [CoefficientUpdate; NUM_CHILDREN]) -> Self {
        let scales: [f64; NUM_CHILDREN] = std::array::from_fn(|o| children[o].scale);
        let (scale, details) = haar::lift_forward_3d(&scales);
        let has_structure = children.iter().any(|c| c.node.is_some());
        if !has_structure && details.iter().all(|&d| d == 0.0) {
            return Self::uniform(scale);
        }
        let [c0, c1, c2, c3, c4, c5, c6, c7] = children;
        Self {
            scale,
            node: Some(Box::new(UpdateNode {
                details,
                children: [c0.node, c1.node, c2.node, c3.node, c4.node, c5.node, c6.node, c7.node],
            })),
        }
    }

    /// Compresses a dense cube of `side^3` values (`side` a power of two),
    /// indexed `x + side * (y + side * z)`.
    pub fn from_dense(side: usize, values: &[f64]) -> Self {
        assert!(side.is_power_of_two() && values.len() == side * side * side);
        fn build(values: &[f64], side: usize, origin: [usize; 3], span: usize) -> CoefficientUpdate {
            if span == 1 {
                return CoefficientUpdate::uniform(values[origin[0] + side * (origin[1] + side * origin[2])]);
            }
            let half = span / 2;
            let children = std::array::from_fn(|o| {
                let child_origin =
                    std::array::from_fn(|k| origin[k] + if (o >> k) & 1 != 0 { half } else { 0 });
                build(values, side, child_origin, half)
            });
            CoefficientUpdate::from_children(children)
        }
        build(values, side, [0, 0, 0], side)
    }

    /// Builds an update `depth` levels deep from sparse cell values. Cells
    /// are given by their integer coordinates inside the partition; missing
    /// cells are zero. Duplicate cells keep the last value.
    pub fn from_sparse(depth: u8, cells: &[([u32; 3], f64)]) -> Self {
        let mut keyed: Vec<(u64, f64)> = cells.iter().map(|(c, v)| (morton_key(*c, depth), *v)).collect();
        keyed.sort_by_key(|e| e.0);
        keyed.dedup_by(|later, earlier| {
            if later.0 == earlier.0 {
                earlier.1 = later.1;
                true
            } else {
                false
            }
        });
        fn build(entries: &[(u64, f64)], levels_left: u8) -> CoefficientUpdate {
            if entries.is_empty() {
                return CoefficientUpdate::uniform(0.0);
            }
            if levels_left == 0 {
                return CoefficientUpdate::uniform(entries[0].1);
            }
            let shift = 3 * (levels_left as u32 - 1);
            let mut start = 0;
            let children = std::array::from_fn(|o| {
                let end = start + entries[start..].partition_point(|e| ((e.0 >> shift) & 7) as usize <= o);
                let child = build(&entries[start..end], levels_left - 1);
                start = end;
                child
            });
            CoefficientUpdate::from_children(children)
        }
        build(&keyed, depth)
    }

    /// Number of levels of detail below the partition.
    pub fn depth(&self) -> usize {
        fn depth_of(node: &Option<Box<UpdateNode>>) -> usize {
            match node {
                None => 0,
                Some(n) => 1 + n.children.iter().map(depth_of).max().unwrap_or(0),
            }
        }
        depth_of(&self.node)
    }

    /// Number of detail nodes in the update.
    pub fn node_count(&self) -> usize {
        fn count(node: &Option<Box<UpdateNode>>) -> usize {
            match node {
                None => 0,
                Some(n) => 1 + n.children.iter().map(count).sum::<usize>(),
            }
        }
        count(&self.node)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        fn scale_node(node: &UpdateNode, factor: f64) -> UpdateNode {
            UpdateNode {
                details: node.details.map(|d| d * factor),
                children: std::array::from_fn(|o| {
                    node.children[o].as_ref().map(|c| Box::new(scale_node(c, factor)))
                }),
            }
        }
        Self {
            scale: self.scale * factor,
            node: self.node.as_ref().map(|n| Box::new(scale_node(n, factor))),
        }
    }

    /// Reconstructed value of the update at a descendant leaf, given the
    /// octant path from the partition downwards.
    pub fn value_along(&self, path: &[usize]) -> f64 {
        let mut value = self.scale;
        let mut node = self.node.as_deref();
        for &octant in path {
            match node {
                None => break,
                Some(n) => {
                    value = haar::reconstruct_child(value, &n.details, octant);
                    node = n.children[octant].as_deref();
                }
            }
        }
        value
    }
}

/// Interleaves the low `depth` bits of the coordinates, most significant
/// level first, so sorting by key groups cells by octant at every level.
fn morton_key(cell: [u32; 3], depth: u8) -> u64 {
    let mut key = 0u64;
    for level in (0..depth as u32).rev() {
        for axis in (0..3).rev() {
            key = (key << 1) | ((cell[axis] >> level) & 1) as u64;
        }
    }
    key
}

impl UpdateNode {
    #[allow(dead_code)]
    pub fn zero() -> Self {
        Self {
            details: [0.0; NUM_DETAILS],
            children: Default::default(),
        }
    }
}
