//! Countable compacta of Cantor-Bendixson rank at most one.
//!
//! A space is an ordered list of blocks. A `seq` block is a convergent
//! sequence `b_0, b_1, ...` together with its limit `b_inf`; a `fin k` block
//! is `k` isolated points. Every point except a sequence limit is isolated.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::report::Report;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum BlockKind {
    Finite(u64),
    Seq,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Block {
    pub id: String,
    pub kind: BlockKind,
}

impl Block {
    pub fn seq(id: &str) -> Self {
        Block {
            id: id.to_string(),
            kind: BlockKind::Seq,
        }
    }

    pub fn finite(id: &str, size: u64) -> Self {
        Block {
            id: id.to_string(),
            kind: BlockKind::Finite(size),
        }
    }

    pub fn is_seq(&self) -> bool {
        self.kind == BlockKind::Seq
    }
}

/// Position inside a block: a finite index or the limit of a sequence block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Index {
    At(u64),
    Inf,
}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Index::At(i) => write!(f, "{i}"),
            Index::Inf => f.write_str("inf"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Point {
    pub block: String,
    pub index: Index,
}

impl Point {
    pub fn at(block: &str, index: u64) -> Self {
        Point {
            block: block.to_string(),
            index: Index::At(index),
        }
    }

    pub fn inf(block: &str) -> Self {
        Point {
            block: block.to_string(),
            index: Index::Inf,
        }
    }

    pub fn is_limit(&self) -> bool {
        self.index == Index::Inf
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.block, self.index)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Space {
    blocks: Vec<Block>,
}

/// Lists every invariant violation of a prospective block list.
pub fn validate_space(blocks: &[Block]) -> Report {
    let mut report = Report::new();
    if blocks.is_empty() {
        report.fail("space", "space has no blocks");
    }
    let mut seen = BTreeSet::new();
    for block in blocks {
        if block.id.is_empty() {
            report.fail("space", "empty block id");
        } else if !seen.insert(block.id.as_str()) {
            report
                .fail("space", "duplicate id")
                .add("block", block.id.clone());
        }
        if block.kind == BlockKind::Finite(0) {
            report
                .fail("space", "empty block")
                .add("block", block.id.clone());
        }
    }
    if report.clauses.is_empty() {
        report.pass("space", "blocks valid");
    }
    report
}

impl Space {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        let report = validate_space(&blocks);
        if !report.is_ok() {
            let msg: Vec<String> = report.failures().map(render_failure).collect();
            return Err(Error::InvalidSpace(msg.join("; ")));
        }
        Ok(Space { blocks })
    }

    pub fn shared(blocks: Vec<Block>) -> Result<Arc<Self>> {
        Space::new(blocks).map(Arc::new)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, id: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.id == id)
    }

    pub fn block_position(&self, id: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.id == id)
    }

    pub fn require_block(&self, id: &str) -> Result<&Block> {
        self.block(id)
            .ok_or_else(|| Error::UnknownBlock(id.to_string()))
    }

    pub fn seq_blocks(&self) -> impl Iterator<Item = &Block> {
        self.blocks.iter().filter(|b| b.is_seq())
    }

    pub fn contains(&self, point: &Point) -> bool {
        match (self.block(&point.block), point.index) {
            (Some(b), Index::Inf) => b.is_seq(),
            (Some(b), Index::At(i)) => match b.kind {
                BlockKind::Seq => true,
                BlockKind::Finite(size) => i < size,
            },
            (None, _) => false,
        }
    }

    pub fn check_point(&self, point: &Point) -> Result<()> {
        if self.contains(point) {
            Ok(())
        } else {
            Err(Error::UnknownPoint(point.to_string()))
        }
    }

    /// Points of finite blocks and limits of sequence blocks.
    pub fn anchor_points(&self) -> Vec<Point> {
        let mut points = Vec::new();
        for block in &self.blocks {
            match block.kind {
                BlockKind::Finite(size) => {
                    points.extend((0..size).map(|i| Point::at(&block.id, i)));
                }
                BlockKind::Seq => points.push(Point::inf(&block.id)),
            }
        }
        points
    }

    /// Every point with finite index below `horizon` on sequence blocks, plus
    /// all anchor points.
    pub fn points_below(&self, horizon: u64) -> Vec<Point> {
        let mut points = Vec::new();
        for block in &self.blocks {
            match block.kind {
                BlockKind::Finite(size) => {
                    points.extend((0..size).map(|i| Point::at(&block.id, i)));
                }
                BlockKind::Seq => {
                    points.extend((0..horizon).map(|i| Point::at(&block.id, i)));
                    points.push(Point::inf(&block.id));
                }
            }
        }
        points
    }

    /// Total number of points, `None` when the space is infinite.
    pub fn cardinality(&self) -> Option<u64> {
        let mut total = 0;
        for block in &self.blocks {
            match block.kind {
                BlockKind::Finite(size) => total += size,
                BlockKind::Seq => return None,
            }
        }
        Some(total)
    }

    fn fresh_id(&self, base: &str) -> String {
        if self.block(base).is_none() {
            return base.to_string();
        }
        (1..)
            .map(|n| format!("{base}{n}"))
            .find(|id| self.block(id).is_none())
            .unwrap()
    }

    /// The space with one isolated point added, and that point.
    pub fn adjoin_point(&self) -> (Space, Point) {
        let id = self.fresh_id("z");
        let mut blocks = self.blocks.clone();
        blocks.push(Block::finite(&id, 1));
        (Space { blocks }, Point::at(&id, 0))
    }

    /// `self x {0, 1}`: every block duplicated as `id@0` and `id@1`.
    pub fn product_with_two(&self) -> Space {
        let mut blocks = Vec::with_capacity(2 * self.blocks.len());
        for layer in 0..2 {
            for block in &self.blocks {
                blocks.push(Block {
                    id: layer_id(&block.id, layer),
                    kind: block.kind,
                });
            }
        }
        Space { blocks }
    }
}

/// Block id of layer `layer` in a product with two.
pub fn layer_id(id: &str, layer: u8) -> String {
    format!("{id}@{layer}")
}

/// The point `(p, layer)` of a product with two.
pub fn layer_point(point: &Point, layer: u8) -> Point {
    Point {
        block: layer_id(&point.block, layer),
        index: point.index,
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for block in &self.blocks {
            match block.kind {
                BlockKind::Seq => write!(f, " block {} seq;", block.id)?,
                BlockKind::Finite(n) => write!(f, " block {} fin {};", block.id, n)?,
            }
        }
        f.write_str(" }")
    }
}

pub(crate) fn render_failure(clause: &crate::report::Clause) -> String {
    let mut s = clause.clause.clone();
    for (k, v) in &clause.values {
        s.push_str(&format!(" ({k} {v})"));
    }
    s
}

/// How the points of one subspace block sit inside the ambient block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum BlockPlacement {
    /// Subspace index `i` is ambient index `indices[i]`.
    Finite(Vec<Index>),
    /// Subspace index `i < below.len()` is `below[i]`; later indices walk the
    /// ambient offsets `start + q * period + offsets[s]`; limit maps to limit.
    Periodic {
        below: Vec<u64>,
        start: u64,
        period: u64,
        offsets: Vec<u64>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlockEmbedding {
    pub block: String,
    pub ambient: String,
    pub placement: BlockPlacement,
}

/// Order-preserving inclusion of a closed subspace into its ambient space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PointEmbedding {
    pub blocks: Vec<BlockEmbedding>,
}

impl BlockEmbedding {
    pub fn map_index(&self, index: Index) -> Option<Index> {
        match (&self.placement, index) {
            (BlockPlacement::Finite(list), Index::At(i)) => list.get(i as usize).copied(),
            (BlockPlacement::Finite(_), Index::Inf) => None,
            (BlockPlacement::Periodic { .. }, Index::Inf) => Some(Index::Inf),
            (
                BlockPlacement::Periodic {
                    below,
                    start,
                    period,
                    offsets,
                },
                Index::At(i),
            ) => {
                let j = below.len() as u64;
                if i < j {
                    Some(Index::At(below[i as usize]))
                } else {
                    let len = offsets.len() as u64;
                    let q = (i - j) / len;
                    let s = (i - j) % len;
                    Some(Index::At(start + q * period + offsets[s as usize]))
                }
            }
        }
    }

    pub fn inverse_index(&self, index: Index) -> Option<Index> {
        match (&self.placement, index) {
            (BlockPlacement::Finite(list), idx) => list
                .iter()
                .position(|&x| x == idx)
                .map(|p| Index::At(p as u64)),
            (BlockPlacement::Periodic { .. }, Index::Inf) => Some(Index::Inf),
            (
                BlockPlacement::Periodic {
                    below,
                    start,
                    period,
                    offsets,
                },
                Index::At(n),
            ) => {
                if n < *start {
                    below
                        .iter()
                        .position(|&x| x == n)
                        .map(|p| Index::At(p as u64))
                } else {
                    let q = (n - start) / period;
                    let o = (n - start) % period;
                    let s = offsets.iter().position(|&x| x == o)? as u64;
                    Some(Index::At(below.len() as u64 + q * offsets.len() as u64 + s))
                }
            }
        }
    }
}

impl PointEmbedding {
    fn block_for(&self, sub_block: &str) -> Option<&BlockEmbedding> {
        self.blocks.iter().find(|b| b.block == sub_block)
    }

    /// Subspace point to ambient point.
    pub fn map(&self, point: &Point) -> Option<Point> {
        let be = self.block_for(&point.block)?;
        Some(Point {
            block: be.ambient.clone(),
            index: be.map_index(point.index)?,
        })
    }

    /// Ambient point to subspace point, if it lies in the subspace.
    pub fn inverse(&self, point: &Point) -> Option<Point> {
        self.blocks
            .iter()
            .filter(|b| b.ambient == point.block)
            .find_map(|b| {
                b.inverse_index(point.index).map(|index| Point {
                    block: b.block.clone(),
                    index,
                })
            })
    }
}
