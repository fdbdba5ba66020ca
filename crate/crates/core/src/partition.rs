//! Random partitions of a cell.
//!
//! A partition grows one split at a time. Each step picks a leaf (uniformly,
//! or by a plurality vote of `t` sampled training points), then cuts it
//! either along a uniformly drawn axis at a uniform ratio of the leaf's
//! extent, or along a hyperplane with a uniform random normal through the
//! centroid of the voters. The target values are never consulted.
//!
//! Leaf ids are stable: splitting leaf `i` keeps id `i` for the lower part
//! and gives the upper part the next free id, so after `p` splits the leaves
//! are exactly `0..=p`.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::geometry::{AxisBox, Cell};
use crate::params::{Geometry, LeafChoice};
use crate::rng::RandomStream;
use crate::scalar::{dot, Scalar};

/// Attempts at drawing an oblique normal before falling back to an
/// axis-aligned hyperplane.
pub const OBLIQUE_RETRIES: usize = 16;

const RATIO_RETRIES: usize = 16;

/// Relative margin added on every side of the training bounding box.
pub const ROOT_MARGIN: f64 = 0.05;

/// Cut `leaf_id` along `dim` at `lower + ratio * extent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSplit<T> {
    pub leaf_id: usize,
    pub dim: usize,
    pub ratio: T,
}

/// Cut `leaf_id` by the hyperplane `normal . x + offset = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObliqueSplit<T> {
    pub leaf_id: usize,
    pub normal: Vec<T>,
    pub offset: T,
}

impl<T: Scalar> ObliqueSplit<T> {
    /// The hyperplane with `normal` passing through `centroid`.
    pub fn through(leaf_id: usize, normal: Vec<T>, centroid: &[T]) -> Self {
        let offset = -dot(&normal, centroid);
        ObliqueSplit {
            leaf_id,
            normal,
            offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Split<T> {
    Axis(AxisSplit<T>),
    Oblique(ObliqueSplit<T>),
}

impl<T: Scalar> Split<T> {
    pub fn leaf_id(&self) -> usize {
        match self {
            Split::Axis(s) => s.leaf_id,
            Split::Oblique(s) => s.leaf_id,
        }
    }

    /// One trace line: `leaf,dim,ratio` or `leaf,w1;w2;...,offset`.
    pub fn trace_line(&self) -> String {
        match self {
            Split::Axis(s) => format!("{},{},{}", s.leaf_id, s.dim, s.ratio),
            Split::Oblique(s) => {
                let normal: Vec<String> = s.normal.iter().map(|w| w.to_string()).collect();
                format!("{},{},{}", s.leaf_id, normal.join(";"), s.offset)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node<T> {
    Leaf(usize),
    Axis {
        dim: usize,
        cut: T,
        left: usize,
        right: usize,
    },
    Oblique {
        normal: Vec<T>,
        offset: T,
        left: usize,
        right: usize,
    },
}

/// Serialized form: the root and the split sequence, which replays exactly.
#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct PartitionRecord<T> {
    root: Cell<T>,
    geometry: Geometry,
    splits: Vec<Split<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
#[serde(try_from = "PartitionRecord<T>", into = "PartitionRecord<T>")]
pub struct PartitionTree<T> {
    root: Cell<T>,
    geometry: Geometry,
    splits: Vec<Split<T>>,
    leaves: Vec<Cell<T>>,
    nodes: Vec<Node<T>>,
    leaf_node: Vec<usize>,
}

impl<T: Scalar> TryFrom<PartitionRecord<T>> for PartitionTree<T> {
    type Error = Error;

    fn try_from(r: PartitionRecord<T>) -> Result<Self> {
        PartitionTree::replay(r.root, r.geometry, r.splits)
    }
}

impl<T: Scalar> From<PartitionTree<T>> for PartitionRecord<T> {
    fn from(t: PartitionTree<T>) -> Self {
        PartitionRecord {
            root: t.root,
            geometry: t.geometry,
            splits: t.splits,
        }
    }
}

impl<T: Scalar> PartitionTree<T> {
    /// A single-leaf partition of `root`. Oblique partitions of a box root
    /// treat it as a polytope without faces.
    pub fn new(root: Cell<T>, geometry: Geometry) -> Self {
        let root = match (geometry, root.as_box()) {
            (Geometry::Oblique, Some(b)) => Cell::polytope(root.id, b.clone()),
            _ => root,
        };
        let mut leaf = root.clone();
        leaf.id = 0;
        PartitionTree {
            root,
            geometry,
            splits: Vec::new(),
            leaves: vec![leaf],
            nodes: vec![Node::Leaf(0)],
            leaf_node: vec![0],
        }
    }

    /// Rebuilds a partition from its split sequence.
    pub fn replay(root: Cell<T>, geometry: Geometry, splits: Vec<Split<T>>) -> Result<Self> {
        let mut tree = PartitionTree::new(root, geometry);
        for split in splits {
            match split {
                Split::Axis(s) => tree.apply_axis_split(s)?,
                Split::Oblique(s) => tree.apply_oblique_split(s)?,
            };
        }
        Ok(tree)
    }

    pub fn root(&self) -> &Cell<T> {
        &self.root
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn dim(&self) -> usize {
        self.root.dim()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn split_count(&self) -> usize {
        self.splits.len()
    }

    pub fn leaves(&self) -> &[Cell<T>] {
        &self.leaves
    }

    pub fn leaf(&self, id: usize) -> Option<&Cell<T>> {
        self.leaves.get(id)
    }

    pub fn splits(&self) -> &[Split<T>] {
        &self.splits
    }

    pub fn trace(&self) -> Vec<String> {
        self.splits.iter().map(Split::trace_line).collect()
    }

    /// Id of the leaf containing `x`. Points outside the root still reach a
    /// leaf; callers clamp first when that matters.
    #[inline]
    pub fn locate(&self, x: &[T]) -> usize {
        self.locate_from(0, x)
    }

    /// Largest L1 diameter of a leaf (bounding box for polytopes).
    pub fn max_leaf_l1_diameter(&self) -> T {
        self.leaves
            .iter()
            .map(|c| c.bounds().l1_diameter())
            .fold(T::zero(), T::max)
    }

    fn check_leaf(&self, leaf_id: usize) -> Result<()> {
        if leaf_id >= self.leaves.len() {
            return Err(Error::invalid(format!(
                "leaf {leaf_id} does not exist ({} leaves)",
                self.leaves.len()
            )));
        }
        Ok(())
    }

    fn attach(
        &mut self,
        leaf_id: usize,
        node: impl FnOnce(usize, usize) -> Node<T>,
        cells: (Cell<T>, Cell<T>),
    ) -> usize {
        let new_id = self.leaves.len();
        let (mut lower, mut upper) = cells;
        lower.id = leaf_id;
        upper.id = new_id;
        let left = self.nodes.len();
        let right = left + 1;
        self.nodes.push(Node::Leaf(leaf_id));
        self.nodes.push(Node::Leaf(new_id));
        let at = self.leaf_node[leaf_id];
        self.nodes[at] = node(left, right);
        self.leaf_node[leaf_id] = left;
        self.leaf_node.push(right);
        self.leaves[leaf_id] = lower;
        self.leaves.push(upper);
        new_id
    }

    /// Cuts a box leaf. Returns the id of the new (upper) leaf.
    pub fn apply_axis_split(&mut self, split: AxisSplit<T>) -> Result<usize> {
        if self.geometry != Geometry::AxisParallel {
            return Err(Error::invalid("axis split on an oblique partition"));
        }
        self.check_leaf(split.leaf_id)?;
        if !(split.ratio > T::zero() && split.ratio < T::one()) {
            return Err(Error::invalid(format!(
                "split ratio {} outside (0, 1)",
                split.ratio
            )));
        }
        let leaf = &self.leaves[split.leaf_id];
        let b = leaf
            .as_box()
            .ok_or_else(|| Error::invalid("axis split on a non-box leaf"))?;
        if split.dim >= b.dim() {
            return Err(Error::invalid(format!(
                "split dimension {} out of range",
                split.dim
            )));
        }
        let cut = b.lower[split.dim] + split.ratio * b.extent(split.dim);
        if !(cut > b.lower[split.dim] && cut < b.upper[split.dim]) {
            return Err(Error::Numeric(format!(
                "cut {cut} is not inside ({}, {})",
                b.lower[split.dim], b.upper[split.dim]
            )));
        }
        let (lo, hi) = b.cut(split.dim, cut);
        let dim = split.dim;
        let id = split.leaf_id;
        self.splits.push(Split::Axis(split));
        Ok(self.attach(
            id,
            |left, right| Node::Axis {
                dim,
                cut,
                left,
                right,
            },
            (Cell::boxed(id, lo), Cell::boxed(0, hi)),
        ))
    }

    /// Cuts a leaf by a hyperplane. The lower leaf keeps the side
    /// `normal . x + offset <= 0`. Returns the id of the new leaf.
    pub fn apply_oblique_split(&mut self, split: ObliqueSplit<T>) -> Result<usize> {
        if self.geometry != Geometry::Oblique {
            return Err(Error::invalid(
                "oblique split on an axis-parallel partition",
            ));
        }
        self.check_leaf(split.leaf_id)?;
        let leaf = &self.leaves[split.leaf_id];
        if split.normal.len() != leaf.dim() {
            return Err(Error::invalid("normal has the wrong dimension"));
        }
        if !hyperplane_crosses(leaf.bounds(), &split.normal, split.offset) {
            return Err(Error::invalid(format!(
                "hyperplane misses leaf {}",
                split.leaf_id
            )));
        }
        let cells = leaf.cut_oblique(&split.normal, split.offset);
        let normal = split.normal.clone();
        let offset = split.offset;
        let id = split.leaf_id;
        self.splits.push(Split::Oblique(split));
        Ok(self.attach(
            id,
            |left, right| Node::Oblique {
                normal,
                offset,
                left,
                right,
            },
            cells,
        ))
    }
}

fn hyperplane_crosses<T: Scalar>(b: &AxisBox<T>, normal: &[T], offset: T) -> bool {
    let (lo, hi) = b.affine_range(normal, offset);
    lo < T::zero() && hi > T::zero()
}

/// Bounding box of `data` with `ROOT_MARGIN` of the extent added on each
/// side. A dimension with zero extent gets a margin of
/// `max(ROOT_MARGIN * |v|, 0.5)`.
pub fn root_box<T: Scalar>(data: &Dataset<T>) -> Result<AxisBox<T>> {
    let (mut lo, mut hi) = data
        .feature_range()
        .ok_or_else(|| Error::invalid("cannot bound an empty dataset"))?;
    let margin = T::lit(ROOT_MARGIN);
    for (l, h) in lo.iter_mut().zip(hi.iter_mut()) {
        let extent = *h - *l;
        let pad = if extent > T::zero() {
            margin * extent
        } else {
            (margin * l.abs()).max(T::lit(0.5))
        };
        *l -= pad;
        *h += pad;
    }
    AxisBox::new(lo, hi)
}

/// Uniform leaf choice.
pub fn choose_leaf_uniform<T: Scalar>(tree: &PartitionTree<T>, stream: &mut RandomStream) -> usize {
    stream.index(tree.leaf_count())
}

/// Plurality leaf among `t` points drawn with replacement from the rows
/// `pool` of `data`. Ties go to the smaller leaf id.
pub fn choose_leaf_adaptive<T: Scalar>(
    tree: &PartitionTree<T>,
    data: &Dataset<T>,
    pool: &[usize],
    t: usize,
    stream: &mut RandomStream,
) -> Result<usize> {
    if pool.is_empty() {
        return Err(Error::invalid(
            "adaptive leaf choice needs samples in the root",
        ));
    }
    let votes = draw_voters(pool.len(), t, stream);
    let leaves: Vec<usize> = votes
        .iter()
        .map(|&v| tree.locate(data.row(pool[v])))
        .collect();
    Ok(plurality(tree.leaf_count(), &leaves))
}

fn draw_voters(pool_len: usize, t: usize, stream: &mut RandomStream) -> Vec<usize> {
    (0..t).map(|_| stream.index(pool_len)).collect()
}

/// Most frequent leaf; the smallest id wins ties.
pub fn plurality(leaf_count: usize, votes: &[usize]) -> usize {
    let mut counts = vec![0usize; leaf_count];
    for &v in votes {
        counts[v] += 1;
    }
    let mut best = 0;
    for (leaf, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = leaf;
        }
    }
    best
}

/// Stage-two split count: `min(round(pro * samples), cap)`.
pub fn split_budget(cell_sample_count: usize, pro: f64, cap: usize) -> usize {
    let wanted = (pro * cell_sample_count as f64).round() as usize;
    wanted.min(cap)
}

/// A partition together with the data rows that fall in each leaf.
#[derive(Debug, Clone)]
pub struct GrownPartition<T> {
    pub tree: PartitionTree<T>,
    /// `members[leaf]` lists the row indices of the growing data in `leaf`.
    pub members: Vec<Vec<usize>>,
}

/// Grows partitions while tracking which pooled rows lie in each leaf, so
/// that votes and centroid lookups never re-locate points.
struct Grower<'a, T> {
    tree: PartitionTree<T>,
    data: &'a Dataset<T>,
    pool: &'a [usize],
    /// Pool positions per leaf.
    members: Vec<Vec<usize>>,
    leaf_of: Vec<usize>,
}

impl<'a, T: Scalar> Grower<'a, T> {
    fn new(root: Cell<T>, geometry: Geometry, data: &'a Dataset<T>, pool: &'a [usize]) -> Self {
        Grower {
            tree: PartitionTree::new(root, geometry),
            data,
            pool,
            members: vec![(0..pool.len()).collect()],
            leaf_of: vec![0; pool.len()],
        }
    }

    fn row(&self, pos: usize) -> &'a [T] {
        self.data.row(self.pool[pos])
    }

    /// Picks the leaf to split and the centroid hint for oblique cuts.
    fn choose(
        &self,
        choice: LeafChoice,
        t: usize,
        stream: &mut RandomStream,
    ) -> Result<(usize, Option<Vec<T>>)> {
        match choice {
            LeafChoice::Uniform => {
                let leaf = choose_leaf_uniform(&self.tree, stream);
                Ok((leaf, self.centroid(self.members[leaf].iter().copied())))
            }
            LeafChoice::Adaptive => {
                if self.pool.is_empty() {
                    return Err(Error::invalid(
                        "adaptive leaf choice needs samples in the root",
                    ));
                }
                let votes = draw_voters(self.pool.len(), t, stream);
                let leaves: Vec<usize> = votes.iter().map(|&v| self.leaf_of[v]).collect();
                let leaf = plurality(self.tree.leaf_count(), &leaves);
                let inside = votes
                    .iter()
                    .zip(&leaves)
                    .filter(|(_, &l)| l == leaf)
                    .map(|(&v, _)| v);
                let centroid = self
                    .centroid(inside)
                    .or_else(|| self.centroid(self.members[leaf].iter().copied()));
                Ok((leaf, centroid))
            }
        }
    }

    fn centroid(&self, positions: impl Iterator<Item = usize>) -> Option<Vec<T>> {
        let d = self.tree.dim();
        let mut sum = vec![T::zero(); d];
        let mut n = 0usize;
        for pos in positions {
            for (s, &v) in sum.iter_mut().zip(self.row(pos)) {
                *s += v;
            }
            n += 1;
        }
        (n > 0).then(|| {
            let n = T::from_usize_lossy(n);
            sum.into_iter().map(|s| s / n).collect()
        })
    }

    fn step(&mut self, choice: LeafChoice, t: usize, stream: &mut RandomStream) -> Result<()> {
        let (leaf, centroid) = self.choose(choice, t, stream)?;
        let split = match self.draw(leaf, centroid, stream) {
            Ok(split) => split,
            // A leaf squeezed to rounding width: cut the widest leaf instead.
            Err(Error::Numeric(_)) => self.draw(self.widest_leaf(), None, stream)?,
            Err(e) => return Err(e),
        };
        let leaf = split.leaf_id();
        let split_node = self.tree.leaf_node[leaf];
        let new_leaf = match split {
            Split::Axis(s) => self.tree.apply_axis_split(s)?,
            Split::Oblique(s) => self.tree.apply_oblique_split(s)?,
        };
        self.reassign(leaf, new_leaf, split_node);
        Ok(())
    }

    fn draw(
        &self,
        leaf: usize,
        centroid: Option<Vec<T>>,
        stream: &mut RandomStream,
    ) -> Result<Split<T>> {
        match self.tree.geometry() {
            Geometry::AxisParallel => self.draw_axis(leaf, stream).map(Split::Axis),
            Geometry::Oblique => self
                .draw_oblique(leaf, centroid, stream)
                .map(Split::Oblique),
        }
    }

    /// Leaf with the largest bounding-box L1 diameter, ties to the smaller id.
    fn widest_leaf(&self) -> usize {
        let mut best = (0, T::neg_infinity());
        for (i, c) in self.tree.leaves.iter().enumerate() {
            let d = c.bounds().l1_diameter();
            if d > best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    fn draw_axis(&self, leaf: usize, stream: &mut RandomStream) -> Result<AxisSplit<T>> {
        let b = self.tree.leaves[leaf].bounds();
        let dim = stream.index(b.dim());
        for _ in 0..RATIO_RETRIES {
            let ratio = T::lit(stream.open_unit());
            let cut = b.lower[dim] + ratio * b.extent(dim);
            if ratio > T::zero() && ratio < T::one() && cut > b.lower[dim] && cut < b.upper[dim] {
                return Ok(AxisSplit {
                    leaf_id: leaf,
                    dim,
                    ratio,
                });
            }
        }
        Err(Error::Numeric(format!(
            "leaf {leaf} is too thin to cut in dimension {dim}"
        )))
    }

    fn draw_oblique(
        &self,
        leaf: usize,
        centroid: Option<Vec<T>>,
        stream: &mut RandomStream,
    ) -> Result<ObliqueSplit<T>> {
        let b = self.tree.leaves[leaf].bounds();
        let d = b.dim();
        let centroid = centroid.unwrap_or_else(|| b.center());
        for _ in 0..OBLIQUE_RETRIES {
            let normal: Vec<T> = (0..d)
                .map(|_| T::lit(2.0 * stream.uniform() - 1.0))
                .collect();
            let split = ObliqueSplit::through(leaf, normal, &centroid);
            if hyperplane_crosses(b, &split.normal, split.offset) {
                return Ok(split);
            }
        }
        // Axis-aligned hyperplane inside the bounding box.
        let dim = stream.index(d);
        for _ in 0..RATIO_RETRIES {
            let cut = b.lower[dim] + T::lit(stream.open_unit()) * b.extent(dim);
            if cut > b.lower[dim] && cut < b.upper[dim] {
                let mut normal = vec![T::zero(); d];
                normal[dim] = T::one();
                return Ok(ObliqueSplit {
                    leaf_id: leaf,
                    normal,
                    offset: -cut,
                });
            }
        }
        Err(Error::Numeric(format!("leaf {leaf} is too thin to cut")))
    }

    /// Moves the pooled points of `leaf` that now belong to `new_leaf`;
    /// `split_node` is the node that held `leaf` before the cut.
    fn reassign(&mut self, leaf: usize, new_leaf: usize, split_node: usize) {
        let old = std::mem::take(&mut self.members[leaf]);
        let mut keep = Vec::with_capacity(old.len());
        let mut moved = Vec::new();
        for pos in old {
            if self.tree.locate_from(split_node, self.row(pos)) == leaf {
                keep.push(pos);
            } else {
                self.leaf_of[pos] = new_leaf;
                moved.push(pos);
            }
        }
        self.members[leaf] = keep;
        self.members.push(moved);
    }

    fn grow(
        &mut self,
        splits: usize,
        choice: LeafChoice,
        t: usize,
        stream: &mut RandomStream,
    ) -> Result<()> {
        for _ in 0..splits {
            self.step(choice, t, stream)?;
        }
        Ok(())
    }

    fn finish(self) -> GrownPartition<T> {
        let pool = self.pool;
        let members = self
            .members
            .into_iter()
            .map(|ps| ps.into_iter().map(|p| pool[p]).collect())
            .collect();
        GrownPartition {
            tree: self.tree,
            members,
        }
    }
}

impl<T: Scalar> PartitionTree<T> {
    #[inline]
    fn locate_from(&self, start: usize, x: &[T]) -> usize {
        let mut node = start;
        loop {
            match &self.nodes[node] {
                Node::Leaf(id) => return *id,
                Node::Axis {
                    dim,
                    cut,
                    left,
                    right,
                } => node = if x[*dim] <= *cut { *left } else { *right },
                Node::Oblique {
                    normal,
                    offset,
                    left,
                    right,
                } => {
                    node = if dot(normal, x) + *offset <= T::zero() {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }
}

/// Stage one: `m - 1` adaptive splits of the inflated bounding box of
/// `data`, voting with `t` points drawn from all rows.
pub fn build_stage_one<T: Scalar>(
    data: &Dataset<T>,
    m: usize,
    t: usize,
    geometry: Geometry,
    stream: &mut RandomStream,
) -> Result<GrownPartition<T>> {
    if m == 0 {
        return Err(Error::invalid("at least one cell is required"));
    }
    let root = Cell::boxed(0, root_box(data)?);
    let pool: Vec<usize> = (0..data.len()).collect();
    let mut grower = Grower::new(root, geometry, data, &pool);
    grower.grow(m - 1, LeafChoice::Adaptive, t, stream)?;
    let grown = grower.finish();
    Ok(grown)
}

/// Stage two: `p` splits of `cell`, choosing leaves by `choice` among the
/// rows `rows` of `data` (which must lie in `cell`).
#[allow(clippy::too_many_arguments)]
pub fn build_stage_two<T: Scalar>(
    cell: &Cell<T>,
    data: &Dataset<T>,
    rows: &[usize],
    p: usize,
    t: usize,
    choice: LeafChoice,
    geometry: Geometry,
    stream: &mut RandomStream,
) -> Result<GrownPartition<T>> {
    let mut grower = Grower::new(cell.clone(), geometry, data, rows);
    grower.grow(p, choice, t, stream)?;
    Ok(grower.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_tree(d: usize) -> PartitionTree<f64> {
        PartitionTree::new(Cell::boxed(0, AxisBox::unit(d)), Geometry::AxisParallel)
    }

    fn boxes(tree: &PartitionTree<f64>) -> Vec<(Vec<f64>, Vec<f64>)> {
        tree.leaves()
            .iter()
            .map(|c| (c.bounds().lower.clone(), c.bounds().upper.clone()))
            .collect()
    }

    #[test]
    fn axis_split_on_unit_square() {
        let mut t = unit_tree(2);
        let new = t
            .apply_axis_split(AxisSplit {
                leaf_id: 0,
                dim: 0,
                ratio: 0.3,
            })
            .unwrap();
        assert_eq!(new, 1);
        assert_eq!(
            boxes(&t),
            vec![
                (vec![0.0, 0.0], vec![0.3, 1.0]),
                (vec![0.3, 0.0], vec![1.0, 1.0])
            ]
        );
        assert_eq!(t.locate(&[0.3, 0.5]), 0);
        assert_eq!(t.locate(&[0.31, 0.5]), 1);
    }

    #[test]
    fn axis_split_cut_position() {
        let b = AxisBox::new(vec![2.0, 0.0], vec![4.0, 1.0]).unwrap();
        let mut t = PartitionTree::new(Cell::boxed(0, b), Geometry::AxisParallel);
        t.apply_axis_split(AxisSplit {
            leaf_id: 0,
            dim: 0,
            ratio: 0.5,
        })
        .unwrap();
        assert_eq!(t.leaf(0).unwrap().bounds().upper[0], 3.0);
    }

    #[test]
    fn axis_split_errors() {
        let mut t = unit_tree(2);
        for ratio in [0.0, 1.0, 1.5] {
            assert!(t
                .apply_axis_split(AxisSplit {
                    leaf_id: 0,
                    dim: 0,
                    ratio
                })
                .is_err());
        }
        assert!(t
            .apply_axis_split(AxisSplit {
                leaf_id: 3,
                dim: 0,
                ratio: 0.5
            })
            .is_err());
        assert!(t
            .apply_oblique_split(ObliqueSplit {
                leaf_id: 0,
                normal: vec![1.0, 0.0],
                offset: -0.5
            })
            .is_err());
        assert_eq!(t.leaf_count(), 1);
    }

    fn oblique_square() -> PartitionTree<f64> {
        PartitionTree::new(Cell::boxed(0, AxisBox::unit(2)), Geometry::Oblique)
    }

    #[test]
    fn oblique_axis_aligned_case() {
        let mut t = oblique_square();
        t.apply_oblique_split(ObliqueSplit::through(0, vec![1.0, 0.0], &[0.5, 0.5]))
            .unwrap();
        assert_eq!(t.locate(&[0.49, 0.9]), 0);
        assert_eq!(t.locate(&[0.5, 0.1]), 0);
        assert_eq!(t.locate(&[0.51, 0.1]), 1);
        assert!(t.leaf(0).unwrap().contains(&[0.5, 0.1]));
        assert!(!t.leaf(1).unwrap().contains(&[0.5, 0.1]));
    }

    #[test]
    fn oblique_diagonal_case() {
        let mut t = oblique_square();
        t.apply_oblique_split(ObliqueSplit::through(0, vec![1.0, 1.0], &[0.5, 0.5]))
            .unwrap();
        assert_eq!(t.locate(&[0.1, 0.1]), 0);
        assert_eq!(t.locate(&[0.9, 0.9]), 1);
        assert!(t.leaf(0).unwrap().contains(&[0.1, 0.1]));
        assert!(t.leaf(1).unwrap().contains(&[0.9, 0.9]));
    }

    #[test]
    fn oblique_miss_is_rejected() {
        let mut t = oblique_square();
        let err = t.apply_oblique_split(ObliqueSplit {
            leaf_id: 0,
            normal: vec![1.0, 0.0],
            offset: -2.0,
        });
        assert!(err.is_err());
    }

    #[test]
    fn leaf_choice_rules() {
        let t = unit_tree(1);
        let mut s = RandomStream::new(3);
        assert_eq!(choose_leaf_uniform(&t, &mut s), 0);
        assert_eq!(plurality(2, &[0, 1, 1, 0, 0, 1]), 0);
        assert_eq!(plurality(3, &[2, 2, 2]), 2);
        assert_eq!(plurality(3, &[1, 2, 2, 1]), 1);
    }

    #[test]
    fn uniform_choice_is_reproducible_and_flat() {
        let mut t = unit_tree(1);
        for _ in 0..3 {
            t.apply_axis_split(AxisSplit {
                leaf_id: 0,
                dim: 0,
                ratio: 0.5,
            })
            .unwrap();
        }
        let a = choose_leaf_uniform(&t, &mut RandomStream::new(11));
        let b = choose_leaf_uniform(&t, &mut RandomStream::new(11));
        assert_eq!(a, b);

        let n = 100_000;
        let mut counts = [0usize; 4];
        let mut s = RandomStream::new(12);
        for _ in 0..n {
            counts[choose_leaf_uniform(&t, &mut s)] += 1;
        }
        // Chi-square with 3 degrees of freedom; 16.27 is the 0.001 quantile.
        let expected = n as f64 / 4.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 16.27, "chi2 = {chi2}");
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn adaptive_choice_unanimous_vote() {
        let mut t = unit_tree(1);
        t.apply_axis_split(AxisSplit {
            leaf_id: 0,
            dim: 0,
            ratio: 0.5,
        })
        .unwrap();
        t.apply_axis_split(AxisSplit {
            leaf_id: 1,
            dim: 0,
            ratio: 0.5,
        })
        .unwrap();
        // Leaves: 0 = [0, .5], 1 = (.5, .75], 2 = (.75, 1].
        let data = Dataset::new(vec![0.8, 0.9, 0.95], vec![0.0; 3], 1).unwrap();
        let leaf =
            choose_leaf_adaptive(&t, &data, &[0, 1, 2], 7, &mut RandomStream::new(0)).unwrap();
        assert_eq!(leaf, 2);
        assert!(choose_leaf_adaptive(&t, &data, &[], 7, &mut RandomStream::new(0)).is_err());
    }

    #[test]
    fn budget_examples() {
        assert_eq!(split_budget(100, 0.2, 1000), 20);
        assert_eq!(split_budget(0, 0.5, 10), 0);
        assert_eq!(split_budget(100, 0.5, 10), 10);
    }

    fn grid_data(n: usize) -> Dataset<f64> {
        let mut f = Vec::new();
        for i in 0..n {
            for j in 0..n {
                f.push(i as f64 / n as f64);
                f.push(j as f64 / n as f64);
            }
        }
        Dataset::new(f, vec![0.0; n * n], 2).unwrap()
    }

    #[test]
    fn stage_one_counts_and_membership() {
        let data = grid_data(20);
        for geometry in [Geometry::AxisParallel, Geometry::Oblique] {
            let one = build_stage_one(&data, 1, 5, geometry, &mut RandomStream::new(1)).unwrap();
            assert_eq!(one.tree.leaf_count(), 1);
            let g = build_stage_one(&data, 5, 5, geometry, &mut RandomStream::new(1)).unwrap();
            assert_eq!(g.tree.split_count(), 4);
            assert_eq!(g.tree.leaf_count(), 5);
            let mut seen = vec![0usize; data.len()];
            for (leaf, rows) in g.members.iter().enumerate() {
                for &r in rows {
                    assert_eq!(g.tree.locate(data.row(r)), leaf);
                    assert!(g.tree.leaf(leaf).unwrap().contains(data.row(r)));
                    seen[r] += 1;
                }
            }
            assert!(seen.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn stage_two_counts() {
        let cell = Cell::boxed(0, AxisBox::<f64>::unit(2));
        let data = grid_data(10);
        let rows: Vec<usize> = (0..data.len()).collect();
        let mut s = RandomStream::new(2);
        let g = build_stage_two(
            &cell,
            &data,
            &rows,
            0,
            5,
            LeafChoice::Adaptive,
            Geometry::AxisParallel,
            &mut s,
        )
        .unwrap();
        assert_eq!(g.tree.leaves()[0].bounds(), cell.bounds());
        let g = build_stage_two(
            &cell,
            &data,
            &rows,
            3,
            5,
            LeafChoice::Adaptive,
            Geometry::AxisParallel,
            &mut s,
        )
        .unwrap();
        assert_eq!(g.tree.leaf_count(), 4);
        let vol: f64 = g.tree.leaves().iter().map(|c| c.bounds().volume()).sum();
        assert!((vol - 1.0).abs() < 1e-12);
    }

    #[test]
    fn replay_reproduces_partition() {
        let data = grid_data(12);
        for geometry in [Geometry::AxisParallel, Geometry::Oblique] {
            let g = build_stage_one(&data, 9, 3, geometry, &mut RandomStream::new(4)).unwrap();
            let again =
                PartitionTree::replay(g.tree.root().clone(), geometry, g.tree.splits().to_vec())
                    .unwrap();
            assert_eq!(again, g.tree);
        }
    }
}
