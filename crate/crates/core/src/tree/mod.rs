//! The occupancy map: an octree of Haar detail coefficients.
//!
//! The root carries the mean log-odds of the whole root cell. Every allocated
//! node carries the seven detail coefficients that split its cell into eight
//! children. Unallocated subtrees are implicitly zero-detail, so their region
//! is uniform at the value reconstructed from the ancestors. Leaf values are
//! clamped to `[clamp_lo, clamp_hi]` whenever an update is applied, and the
//! touched nodes are re-lifted on the way back up so every coarse coefficient
//! stays the exact mean of its region.

mod partition;
mod serialize;
mod update;

use nalgebra::Vector3;
use thiserror::Error;

use crate::haar::{self, DetailBlock, NUM_CHILDREN, NUM_DETAILS};

pub use partition::NodePartition;
pub use serialize::{DecodeError, MAP_FORMAT_VERSION, MAP_MAGIC};
pub use update::CoefficientUpdate;
pub(crate) use update::UpdateNode;

pub(crate) const NO_NODE: u32 = u32::MAX;

/// Largest supported tree height.
pub const MAX_TREE_HEIGHT: u8 = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct MapConfig {
    /// Width of the finest cells, meters.
    pub min_cell_width: f64,
    /// Minimum corner of the root cell, meters.
    pub origin: Vector3<f64>,
    /// Number of levels below the root.
    pub tree_height: u8,
    pub clamp_lo: f32,
    pub clamp_hi: f32,
    /// Magnitude below which [`WaveletOctree::prune_lossy`] zeroes details.
    pub prune_threshold: f32,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            min_cell_width: 0.05,
            origin: Vector3::zeros(),
            tree_height: 8,
            clamp_lo: -2.0,
            clamp_hi: 4.0,
            prune_threshold: 0.0,
        }
    }
}

impl MapConfig {
    pub fn validate(&self) -> Result<(), MapError> {
        let bad = |reason: &str| Err(MapError::InvalidConfig(reason.to_string()));
        if !(self.min_cell_width.is_finite() && self.min_cell_width > 0.0) {
            return bad("min_cell_width must be positive");
        }
        if !self.origin.iter().all(|x| x.is_finite()) {
            return bad("origin must be finite");
        }
        if self.tree_height == 0 || self.tree_height > MAX_TREE_HEIGHT {
            return bad("tree_height must be in 1..=20");
        }
        if !(self.clamp_lo < 0.0 && self.clamp_hi > 0.0)
            || !self.clamp_lo.is_finite()
            || !self.clamp_hi.is_finite()
        {
            return bad("clamp bounds must satisfy clamp_lo < 0 < clamp_hi");
        }
        if !(self.prune_threshold >= 0.0) {
            return bad("prune_threshold must be non-negative");
        }
        Ok(())
    }

    pub fn cell_width(&self, depth: u8) -> f64 {
        self.min_cell_width * 2f64.powi(self.tree_height as i32 - depth as i32)
    }

    pub fn root_width(&self) -> f64 {
        self.cell_width(0)
    }

    pub fn cells_per_side(&self, depth: u8) -> u64 {
        1u64 << depth
    }

    /// Depth whose cells have width `width`, if `width` is `min_cell_width * 2^k`.
    pub fn depth_for_width(&self, width: f64) -> Option<u8> {
        (0..=self.tree_height)
            .find(|&d| (self.cell_width(d) - width).abs() <= 1e-9 * width.max(1.0))
    }

    pub fn contains(&self, point: &Vector3<f64>) -> bool {
        let w = self.root_width();
        (0..3).all(|k| {
            let rel = point[k] - self.origin[k];
            rel >= 0.0 && rel < w
        })
    }

    /// Clamps a log-odds value to the configured range.
    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(self.clamp_lo as f64, self.clamp_hi as f64)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("invalid map config: {0}")]
    InvalidConfig(String),
    #[error("point {0:?} lies outside the map's root cell")]
    OutOfBounds([f64; 3]),
    #[error("partition depth {depth} exceeds tree height {height}")]
    DepthOutOfRange { depth: u8, height: u8 },
    #[error("update reaches depth {depth}, beyond tree height {height}")]
    UpdateTooDeep { depth: usize, height: u8 },
    #[error("partition index {0:?} lies outside the root cell")]
    PartitionOutOfBounds([u32; 3]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct NodeRecord {
    pub details: [f32; NUM_DETAILS],
    pub children: [u32; NUM_CHILDREN],
    /// Minimum and maximum leaf value in this node's region, relative to the
    /// node's own scale coefficient. Relative storage keeps them valid when a
    /// uniform offset is added to the region.
    pub min_rel: f32,
    pub max_rel: f32,
}

impl NodeRecord {
    fn empty() -> Self {
        Self {
            details: [0.0; NUM_DETAILS],
            children: [NO_NODE; NUM_CHILDREN],
            min_rel: 0.0,
            max_rel: 0.0,
        }
    }

    pub fn child_mask(&self) -> u8 {
        self.children
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != NO_NODE)
            .fold(0u8, |m, (i, _)| m | (1 << i))
    }

    pub fn details_f64(&self) -> DetailBlock {
        self.details.map(f64::from)
    }

    fn is_leaf_like(&self) -> bool {
        self.children.iter().all(|&c| c == NO_NODE) && self.details.iter().all(|&d| d == 0.0)
    }
}

/// Result of a point query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointQuery {
    /// Reconstructed log-odds at the finest resolution (0.0 means unknown).
    Value(f64),
    OutOfBounds,
}

impl PointQuery {
    pub fn value(self) -> Option<f64> {
        match self {
            PointQuery::Value(v) => Some(v),
            PointQuery::OutOfBounds => None,
        }
    }
}

/// Read-only position in the tree: a node (possibly unallocated) together
/// with the reconstructed scale coefficient of its partition.
#[derive(Debug, Clone, Copy)]
pub struct MapCursor {
    pub(crate) node: u32,
    pub value: f64,
}

impl MapCursor {
    pub fn is_allocated(&self) -> bool {
        self.node != NO_NODE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapStats {
    pub allocated_nodes: usize,
    pub coefficient_bytes: usize,
    pub dense_voxel_count: u64,
    /// Allocated nodes per depth, index 0 = root.
    pub depth_histogram: Vec<usize>,
}

impl MapStats {
    /// Bytes a dense 32-bit grid at the finest resolution would use, divided
    /// by the coefficient bytes actually stored.
    pub fn compression_ratio(&self) -> f64 {
        (self.dense_voxel_count as f64 * 4.0) / self.coefficient_bytes as f64
    }
}

#[derive(Debug, Clone)]
pub struct WaveletOctree {
    config: MapConfig,
    root_scale: f32,
    root: u32,
    nodes: Vec<NodeRecord>,
    free: Vec<u32>,
}

impl PartialEq for WaveletOctree {
    /// Structural equality: same config, root scale bits and node coefficients
    /// (bit-exact) in the same shape. Pool layout is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.config.min_cell_width == other.config.min_cell_width
            && self.config.origin == other.config.origin
            && self.config.tree_height == other.config.tree_height
            && self.config.clamp_lo.to_bits() == other.config.clamp_lo.to_bits()
            && self.config.clamp_hi.to_bits() == other.config.clamp_hi.to_bits()
            && self.root_scale.to_bits() == other.root_scale.to_bits()
            && self.subtree_eq(self.root, other, other.root)
    }
}

impl WaveletOctree {
    pub fn new(config: MapConfig) -> Result<Self, MapError> {
        config.validate()?;
        Ok(Self {
            config,
            root_scale: 0.0,
            root: NO_NODE,
            nodes: Vec::new(),
            free: Vec::new(),
        })
    }

    pub fn config(&self) -> &MapConfig {
        &self.config
    }

    pub fn root_scale(&self) -> f32 {
        self.root_scale
    }

    pub fn root_partition(&self) -> NodePartition {
        NodePartition::root(&self.config)
    }

    pub fn allocated_nodes(&self) -> usize {
        self.nodes.len() - self.free.len()
    }

    fn subtree_eq(&self, a: u32, other: &Self, b: u32) -> bool {
        match (a == NO_NODE, b == NO_NODE) {
            (true, true) => true,
            (false, false) => {
                let (na, nb) = (&self.nodes[a as usize], &other.nodes[b as usize]);
                na.details
                    .iter()
                    .zip(&nb.details)
                    .all(|(x, y)| x.to_bits() == y.to_bits())
                    && (0..NUM_CHILDREN)
                        .all(|o| self.subtree_eq(na.children[o], other, nb.children[o]))
            }
            _ => false,
        }
    }

    fn alloc(&mut self) -> u32 {
        if let Some(index) = self.free.pop() {
            self.nodes[index as usize] = NodeRecord::empty();
            index
        } else {
            self.nodes.push(NodeRecord::empty());
            (self.nodes.len() - 1) as u32
        }
    }

    // ---- queries ----------------------------------------------------------

    pub fn root_cursor(&self) -> MapCursor {
        MapCursor {
            node: self.root,
            value: self.root_scale as f64,
        }
    }

    /// Cursor of child `octant` below `cursor`.
    pub fn child_cursor(&self, cursor: &MapCursor, octant: usize) -> MapCursor {
        if cursor.node == NO_NODE {
            return MapCursor {
                node: NO_NODE,
                value: cursor.value,
            };
        }
        let node = &self.nodes[cursor.node as usize];
        MapCursor {
            node: node.children[octant],
            value: haar::reconstruct_child(cursor.value, &node.details_f64(), octant),
        }
    }

    /// Largest leaf value within the cursor's partition.
    pub fn max_value(&self, cursor: &MapCursor) -> f64 {
        if cursor.node == NO_NODE {
            cursor.value
        } else {
            cursor.value + self.nodes[cursor.node as usize].max_rel as f64
        }
    }

    /// Smallest leaf value within the cursor's partition.
    pub fn min_value(&self, cursor: &MapCursor) -> f64 {
        if cursor.node == NO_NODE {
            cursor.value
        } else {
            cursor.value + self.nodes[cursor.node as usize].min_rel as f64
        }
    }

    /// Cursor for an arbitrary partition.
    pub fn cursor_at(&self, partition: &NodePartition) -> Result<MapCursor, MapError> {
        self.check_partition(partition)?;
        let root = self.root_partition();
        let mut cursor = self.root_cursor();
        let mut current = root;
        while current.depth < partition.depth {
            let octant = current.octant_towards(partition);
            cursor = self.child_cursor(&cursor, octant);
            current = current.child(octant);
            if !cursor.is_allocated() {
                break;
            }
        }
        Ok(cursor)
    }

    fn check_partition(&self, partition: &NodePartition) -> Result<(), MapError> {
        if partition.depth > self.config.tree_height {
            return Err(MapError::DepthOutOfRange {
                depth: partition.depth,
                height: self.config.tree_height,
            });
        }
        let cells = self.config.cells_per_side(partition.depth);
        if partition.index.iter().any(|&i| i as u64 >= cells) {
            return Err(MapError::PartitionOutOfBounds(partition.index));
        }
        Ok(())
    }

    /// Finest-resolution log-odds at `point`.
    pub fn query_point(&self, point: &Vector3<f64>) -> PointQuery {
        match NodePartition::containing(&self.config, point, self.config.tree_height) {
            Some(leaf) => PointQuery::Value(self.query_leaf(&leaf)),
            None => PointQuery::OutOfBounds,
        }
    }

    /// Value of a finest-resolution cell, clamped into the map bounds.
    pub fn query_leaf(&self, leaf: &NodePartition) -> f64 {
        let cursor = self.cursor_at(leaf).expect("leaf partition within the tree");
        self.config.clamp(cursor.value)
    }

    /// Mean log-odds (scale coefficient) of a partition.
    pub fn query_coarse(&self, partition: &NodePartition) -> Result<f64, MapError> {
        Ok(self.cursor_at(partition)?.value)
    }

    /// Depth of the implicit leaf containing `point`: the depth at which the
    /// stored structure ends and the region becomes uniform.
    pub fn leaf_depth(&self, point: &Vector3<f64>) -> Result<u8, MapError> {
        let leaf = NodePartition::containing(&self.config, point, self.config.tree_height)
            .ok_or(MapError::OutOfBounds([point.x, point.y, point.z]))?;
        let mut current = self.root_partition();
        let mut node = self.root;
        while node != NO_NODE {
            let octant = current.octant_towards(&leaf);
            node = self.nodes[node as usize].children[octant];
            current = current.child(octant);
        }
        Ok(current.depth)
    }

    // ---- mutation ---------------------------------------------------------

    /// Writes `value` into a finest-resolution cell (clamped).
    pub fn set_leaf(&mut self, leaf: &NodePartition, value: f64) -> Result<(), MapError> {
        if leaf.depth != self.config.tree_height {
            return Err(MapError::DepthOutOfRange {
                depth: leaf.depth,
                height: self.config.tree_height,
            });
        }
        let current = self.cursor_at(leaf)?.value;
        self.apply_update_block(leaf, &CoefficientUpdate::uniform(value - current))
    }

    /// Adds a compressed update for `partition` coefficient-wise, then clamps
    /// the affected leaves and re-lifts every touched ancestor.
    pub fn apply_update_block(
        &mut self,
        partition: &NodePartition,
        update: &CoefficientUpdate,
    ) -> Result<(), MapError> {
        self.check_partition(partition)?;
        let reach = partition.depth as usize + update.depth();
        if reach > self.config.tree_height as usize {
            return Err(MapError::UpdateTooDeep {
                depth: reach,
                height: self.config.tree_height,
            });
        }
        if update.is_zero() {
            return Ok(());
        }

        // Walk down to the partition, allocating the path.
        let root = self.root_partition();
        if self.root == NO_NODE && partition.depth > 0 {
            self.root = self.alloc();
        }
        let mut path: Vec<(u32, usize, f64)> = Vec::with_capacity(partition.depth as usize);
        let mut current = root;
        let mut node = self.root;
        let mut value = self.root_scale as f64;
        while current.depth < partition.depth {
            let octant = current.octant_towards(partition);
            let details = self.nodes[node as usize].details_f64();
            path.push((node, octant, value));
            value = haar::reconstruct_child(value, &details, octant);
            let mut child = self.nodes[node as usize].children[octant];
            if child == NO_NODE && current.depth + 1 < partition.depth {
                child = self.alloc();
                self.nodes[node as usize].children[octant] = child;
            }
            node = child;
            current = current.child(octant);
        }

        let merged = self.merge(node, value, update.scale, update.node.as_deref(), partition.depth);
        if let Some(&(parent, octant, _)) = path.last() {
            self.nodes[parent as usize].children[octant] = merged.node;
        } else {
            self.root = merged.node;
        }

        // Re-lift the ancestors from the bottom up.
        let mut child_value = merged.value;
        let mut child_range = (merged.min, merged.max);
        for &(parent, octant, parent_value) in path.iter().rev() {
            let record = self.nodes[parent as usize];
            let mut values = haar::lift_backward_3d(parent_value, &record.details_f64());
            values[octant] = child_value;
            let (new_value, details) = haar::lift_forward_3d(&values);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for (o, &v) in values.iter().enumerate() {
                let (cmin, cmax) = if o == octant {
                    child_range
                } else {
                    self.child_range(record.children[o], v)
                };
                lo = lo.min(cmin);
                hi = hi.max(cmax);
            }
            let rec = &mut self.nodes[parent as usize];
            rec.details = details.map(|d| d as f32);
            rec.min_rel = (lo - new_value) as f32;
            rec.max_rel = (hi - new_value) as f32;
            child_value = new_value;
            child_range = (lo, hi);
        }
        self.root_scale = child_value as f32;
        Ok(())
    }

    fn child_range(&self, node: u32, value: f64) -> (f64, f64) {
        if node == NO_NODE {
            (value, value)
        } else {
            let rec = &self.nodes[node as usize];
            (value + rec.min_rel as f64, value + rec.max_rel as f64)
        }
    }

    /// Merges an update (uniform part `offset` plus optional detail subtree)
    /// into the subtree rooted at `node` whose current scale is `value`.
    fn merge(
        &mut self,
        node: u32,
        value: f64,
        offset: f64,
        update: Option<&UpdateNode>,
        depth: u8,
    ) -> Merged {
        let height = self.config.tree_height;
        if update.is_none() {
            if offset == 0.0 {
                let (min, max) = self.child_range(node, value);
                return Merged {
                    value,
                    node,
                    min,
                    max,
                };
            }
            if node == NO_NODE || depth == height {
                let v = self.config.clamp(value + offset);
                return Merged {
                    value: v,
                    node,
                    min: v,
                    max: v,
                };
            }
            // A uniform offset leaves the details untouched unless clamping binds.
            let rec = &self.nodes[node as usize];
            let (min, max) = (value + rec.min_rel as f64, value + rec.max_rel as f64);
            if min + offset >= self.config.clamp_lo as f64 && max + offset <= self.config.clamp_hi as f64 {
                return Merged {
                    value: value + offset,
                    node,
                    min: min + offset,
                    max: max + offset,
                };
            }
        }

        let node = if node == NO_NODE { self.alloc() } else { node };
        let record = self.nodes[node as usize];
        let values = haar::lift_backward_3d(value, &record.details_f64());
        let (offsets, child_updates): ([f64; NUM_CHILDREN], [Option<&UpdateNode>; NUM_CHILDREN]) =
            match update {
                Some(u) => (
                    haar::lift_backward_3d(offset, &u.details),
                    std::array::from_fn(|o| u.children[o].as_deref()),
                ),
                None => ([offset; NUM_CHILDREN], [None; NUM_CHILDREN]),
            };

        let mut new_values = [0.0; NUM_CHILDREN];
        let mut new_children = [NO_NODE; NUM_CHILDREN];
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for o in 0..NUM_CHILDREN {
            let child = self.merge(record.children[o], values[o], offsets[o], child_updates[o], depth + 1);
            new_values[o] = child.value;
            new_children[o] = child.node;
            lo = lo.min(child.min);
            hi = hi.max(child.max);
        }
        let (new_value, details) = haar::lift_forward_3d(&new_values);
        let rec = &mut self.nodes[node as usize];
        rec.details = details.map(|d| d as f32);
        rec.children = new_children;
        rec.min_rel = (lo - new_value) as f32;
        rec.max_rel = (hi - new_value) as f32;
        Merged {
            value: new_value,
            node,
            min: lo,
            max: hi,
        }
    }

    // ---- maintenance ------------------------------------------------------

    /// Removes allocated subtrees whose details are all exactly zero. Never
    /// changes a query result. Returns the number of nodes released.
    pub fn prune(&mut self) -> usize {
        self.prune_with_threshold(0.0)
    }

    /// Zeroes details with magnitude below `config.prune_threshold`, then
    /// prunes losslessly.
    pub fn prune_lossy(&mut self) -> usize {
        let threshold = self.config.prune_threshold;
        self.prune_with_threshold(threshold)
    }

    fn prune_with_threshold(&mut self, threshold: f32) -> usize {
        let before = self.allocated_nodes();
        let root = self.root;
        let value = self.root_scale as f64;
        self.root = self.prune_rec(root, value, threshold).0;
        before - self.allocated_nodes()
    }

    /// Returns the surviving node index and the region's absolute (min, max).
    fn prune_rec(&mut self, node: u32, value: f64, threshold: f32) -> (u32, f64, f64) {
        if node == NO_NODE {
            return (NO_NODE, value, value);
        }
        if threshold > 0.0 {
            for d in self.nodes[node as usize].details.iter_mut() {
                if d.abs() < threshold {
                    *d = 0.0;
                }
            }
        }
        let record = self.nodes[node as usize];
        let values = haar::lift_backward_3d(value, &record.details_f64());
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut children = record.children;
        for o in 0..NUM_CHILDREN {
            let (c, cmin, cmax) = self.prune_rec(record.children[o], values[o], threshold);
            children[o] = c;
            lo = lo.min(cmin);
            hi = hi.max(cmax);
        }
        let rec = &mut self.nodes[node as usize];
        rec.children = children;
        rec.min_rel = (lo - value) as f32;
        rec.max_rel = (hi - value) as f32;
        if rec.is_leaf_like() {
            self.free.push(node);
            (NO_NODE, value, value)
        } else {
            (node, lo, hi)
        }
    }

    pub fn stats(&self) -> MapStats {
        let mut histogram = vec![0usize; self.config.tree_height as usize];
        let mut stack = Vec::new();
        if self.root != NO_NODE {
            stack.push((self.root, 0usize));
        }
        let mut count = 0;
        while let Some((node, depth)) = stack.pop() {
            count += 1;
            histogram[depth] += 1;
            for &c in &self.nodes[node as usize].children {
                if c != NO_NODE {
                    stack.push((c, depth + 1));
                }
            }
        }
        debug_assert_eq!(count, self.allocated_nodes());
        let side = self.config.cells_per_side(self.config.tree_height);
        MapStats {
            allocated_nodes: count,
            coefficient_bytes: 4 * (1 + NUM_DETAILS * count),
            dense_voxel_count: side * side * side,
            depth_histogram: histogram,
        }
    }

    /// Calls `visit(partition, node_scale, details)` for every allocated node
    /// in depth-first pre-order.
    pub fn for_each_node(&self, mut visit: impl FnMut(&NodePartition, f64, &DetailBlock)) {
        fn walk(
            map: &WaveletOctree,
            node: u32,
            partition: NodePartition,
            value: f64,
            visit: &mut dyn FnMut(&NodePartition, f64, &DetailBlock),
        ) {
            if node == NO_NODE {
                return;
            }
            let rec = &map.nodes[node as usize];
            let details = rec.details_f64();
            visit(&partition, value, &details);
            let values = haar::lift_backward_3d(value, &details);
            for o in 0..NUM_CHILDREN {
                walk(map, rec.children[o], partition.child(o), values[o], visit);
            }
        }
        walk(self, self.root, self.root_partition(), self.root_scale as f64, &mut visit);
    }

    /// Materializes the finest-resolution grid, indexed `x + n * (y + n * z)`.
    /// Intended for small maps (tests, slice export).
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.config.cells_per_side(self.config.tree_height) as usize;
        let mut grid = vec![0.0; n * n * n];
        let height = self.config.tree_height;
        fn fill(map: &WaveletOctree, cursor: MapCursor, p: NodePartition, grid: &mut [f64], n: usize, height: u8) {
            if !cursor.is_allocated() || p.depth == height {
                let span = 1usize << (height - p.depth);
                let v = map.config.clamp(cursor.value);
                let base = p.index.map(|i| i as usize * span);
                for z in base[2]..base[2] + span {
                    for y in base[1]..base[1] + span {
                        let row = n * (y + n * z);
                        grid[row + base[0]..row + base[0] + span].fill(v);
                    }
                }
                return;
            }
            for o in 0..NUM_CHILDREN {
                fill(map, map.child_cursor(&cursor, o), p.child(o), grid, n, height);
            }
        }
        fill(self, self.root_cursor(), self.root_partition(), &mut grid, n, height);
        grid
    }
}

struct Merged {
    value: f64,
    node: u32,
    min: f64,
    max: f64,
}
