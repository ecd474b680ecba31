//! Subsets of desk-class spaces.
//!
//! On a sequence block a subset's trace is an eventually periodic set of
//! indices (finite sets and cofinite tails are the special cases) plus a flag
//! for the limit point. Traces are kept in a canonical form, so equality of
//! subsets is structural.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_integer::Integer;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::space::Block;
use crate::space::{
    BlockEmbedding, BlockKind, BlockPlacement, Index, Point, PointEmbedding, Space,
};

/// An eventually periodic set of natural numbers.
///
/// `i >= start` is a member iff `i % period` is in `residues`; members below
/// `start` are listed in `below`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct IndexSet {
    start: u64,
    period: u64,
    residues: BTreeSet<u64>,
    below: BTreeSet<u64>,
}

impl Default for IndexSet {
    fn default() -> Self {
        IndexSet::empty()
    }
}

impl IndexSet {
    pub fn empty() -> Self {
        IndexSet {
            start: 0,
            period: 1,
            residues: BTreeSet::new(),
            below: BTreeSet::new(),
        }
    }

    pub fn all() -> Self {
        IndexSet::from_threshold(0)
    }

    pub fn finite<I: IntoIterator<Item = u64>>(items: I) -> Self {
        IndexSet {
            start: 0,
            period: 1,
            residues: BTreeSet::new(),
            below: BTreeSet::new(),
        }
        .with_below(items)
    }

    fn with_below<I: IntoIterator<Item = u64>>(self, items: I) -> Self {
        let below: BTreeSet<u64> = items.into_iter().collect();
        let start = below.iter().next_back().map_or(0, |m| m + 1);
        IndexSet {
            start,
            below,
            ..self
        }
        .normalized()
    }

    /// `{i : i >= threshold}`.
    pub fn from_threshold(threshold: u64) -> Self {
        IndexSet {
            start: threshold,
            period: 1,
            residues: [0].into(),
            below: BTreeSet::new(),
        }
        .normalized()
    }

    /// `{i >= threshold} ∪ extras`.
    pub fn cofinite(threshold: u64, extras: impl IntoIterator<Item = u64>) -> Self {
        IndexSet::from_threshold(threshold).union(&IndexSet::finite(extras))
    }

    /// `{a*k + b : k >= 0}` for `b >= 0`.
    pub fn progression(a: u64, b: u64) -> Self {
        IndexSet::all().affine_image(a, b)
    }

    /// Raw constructor; the result is normalized.
    pub fn periodic(
        start: u64,
        period: u64,
        residues: impl IntoIterator<Item = u64>,
        below: impl IntoIterator<Item = u64>,
    ) -> Self {
        assert!(period >= 1);
        IndexSet {
            start,
            period,
            residues: residues.into_iter().map(|r| r % period).collect(),
            below: below.into_iter().filter(|&i| i < start).collect(),
        }
        .normalized()
    }

    pub fn start(&self) -> u64 {
        self.start
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn residues(&self) -> &BTreeSet<u64> {
        &self.residues
    }

    pub fn below(&self) -> &BTreeSet<u64> {
        &self.below
    }

    fn pattern(&self, i: u64) -> bool {
        self.residues.contains(&(i % self.period))
    }

    pub fn contains(&self, i: u64) -> bool {
        if i >= self.start {
            self.pattern(i)
        } else {
            self.below.contains(&i)
        }
    }

    fn normalized(mut self) -> Self {
        let period = self.period;
        for d in 1..=period {
            if period % d != 0 {
                continue;
            }
            if (0..period).all(|r| self.residues.contains(&r) == self.residues.contains(&(r % d))) {
                self.residues = self.residues.iter().copied().filter(|&r| r < d).collect();
                self.period = d;
                break;
            }
        }
        while self.start > 0 {
            let i = self.start - 1;
            if self.pattern(i) == self.below.contains(&i) {
                self.below.remove(&i);
                self.start -= 1;
            } else {
                break;
            }
        }
        self
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty() && self.below.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.residues.is_empty()
    }

    /// All indices from some point on.
    pub fn is_cofinite(&self) -> bool {
        self.residues.len() as u64 == self.period
    }

    pub fn is_all(&self) -> bool {
        self.is_cofinite() && self.start == 0
    }

    fn combine(&self, other: &IndexSet, op: impl Fn(bool, bool) -> bool) -> IndexSet {
        let period = self.period.lcm(&other.period);
        let start = self.start.max(other.start);
        let residues = (0..period)
            .filter(|&r| op(self.pattern(r), other.pattern(r)))
            .collect();
        let below = (0..start)
            .filter(|&i| op(self.contains(i), other.contains(i)))
            .collect();
        IndexSet {
            start,
            period,
            residues,
            below,
        }
        .normalized()
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        self.combine(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &IndexSet) -> IndexSet {
        self.combine(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &IndexSet) -> IndexSet {
        self.combine(other, |a, b| a && !b)
    }

    pub fn complement(&self) -> IndexSet {
        IndexSet::all().difference(self)
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.difference(other).is_empty()
    }

    /// Members below `bound`, ascending.
    pub fn members_below(&self, bound: u64) -> impl Iterator<Item = u64> + '_ {
        (0..bound).filter(move |&i| self.contains(i))
    }

    /// Number of members below `bound`.
    pub fn count_below(&self, bound: u64) -> u64 {
        self.members_below(bound).count() as u64
    }

    pub fn first(&self) -> Option<u64> {
        if let Some(&b) = self.below.iter().next() {
            return Some(b);
        }
        if self.residues.is_empty() {
            return None;
        }
        (self.start..self.start + self.period).find(|&i| self.pattern(i))
    }

    /// Largest member for finite sets.
    pub fn largest(&self) -> Option<u64> {
        if self.is_finite() {
            self.below.iter().next_back().copied()
        } else {
            None
        }
    }

    /// `{k >= 0 : a*k + b >= 0 and a*k + b ∈ self}` for `a >= 1`.
    pub fn affine_preimage(&self, a: u64, b: i64) -> IndexSet {
        assert!(a >= 1);
        let (a_i, start_i) = (a as i128, self.start as i128);
        let b_i = b as i128;
        // least k >= 0 with a*k + b >= start
        let k_start = if b_i >= start_i {
            0
        } else {
            (start_i - b_i + a_i - 1) / a_i
        } as u64;
        let period = self.period;
        let residues = (0..period)
            .filter(|&kappa| {
                let v = (a_i * kappa as i128 + b_i).rem_euclid(period as i128) as u64;
                self.residues.contains(&v)
            })
            .collect();
        let below = (0..k_start)
            .filter(|&k| {
                let v = a_i * k as i128 + b_i;
                v >= 0 && self.contains(v as u64)
            })
            .collect();
        IndexSet {
            start: k_start,
            period,
            residues,
            below,
        }
        .normalized()
    }

    /// `{d*k + r : k ∈ self}` for `d >= 1`.
    pub fn affine_image(&self, d: u64, r: u64) -> IndexSet {
        assert!(d >= 1);
        let period = d * self.period;
        let residues = self
            .residues
            .iter()
            .map(|&rho| (d * rho + r) % period)
            .collect();
        let start = d * self.start + r;
        let below = self.below.iter().map(|&i| d * i + r).collect();
        IndexSet {
            start,
            period,
            residues,
            below,
        }
        .normalized()
    }

    /// Progressions `(a, b)` with `{a*k + b : k >= 0}` whose union with the
    /// finite part equals the periodic part of the set.
    pub fn progressions(&self) -> Vec<(u64, u64)> {
        self.residues
            .iter()
            .map(|&r| {
                let first = (self.start..self.start + self.period)
                    .find(|&i| i % self.period == r)
                    .unwrap();
                (self.period, first)
            })
            .collect()
    }
}

/// Trace of a subset on one block.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Trace {
    pub indices: IndexSet,
    pub inf: bool,
}

impl Trace {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty() && !self.inf
    }

    pub fn contains(&self, index: Index) -> bool {
        match index {
            Index::Inf => self.inf,
            Index::At(i) => self.indices.contains(i),
        }
    }

    fn is_closed(&self) -> bool {
        self.indices.is_finite() || self.inf
    }

    fn is_open(&self) -> bool {
        !self.inf || self.indices.is_cofinite()
    }
}

/// A subset of a space: one trace per block, empty traces omitted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Subset {
    traces: BTreeMap<String, Trace>,
}

impl Subset {
    pub fn empty() -> Self {
        Subset::default()
    }

    pub fn whole(space: &Space) -> Self {
        let mut s = Subset::empty();
        for block in space.blocks() {
            s.set_trace(&block.id, whole_trace(block));
        }
        s
    }

    pub fn from_points<'a, I: IntoIterator<Item = &'a Point>>(points: I) -> Self {
        let mut s = Subset::empty();
        for p in points {
            s.insert(p);
        }
        s
    }

    pub fn point(p: &Point) -> Self {
        Subset::from_points([p])
    }

    /// Whole block `id`.
    pub fn block(space: &Space, id: &str) -> Result<Self> {
        let block = space.require_block(id)?;
        let mut s = Subset::empty();
        s.set_trace(id, whole_trace(block));
        Ok(s)
    }

    pub fn traces(&self) -> &BTreeMap<String, Trace> {
        &self.traces
    }

    pub fn trace(&self, block: &str) -> Trace {
        self.traces.get(block).cloned().unwrap_or_default()
    }

    pub fn set_trace(&mut self, block: &str, trace: Trace) {
        if trace.is_empty() {
            self.traces.remove(block);
        } else {
            self.traces.insert(block.to_string(), trace);
        }
    }

    pub fn insert(&mut self, p: &Point) {
        let mut t = self.trace(&p.block);
        match p.index {
            Index::Inf => t.inf = true,
            Index::At(i) => t.indices = t.indices.union(&IndexSet::finite([i])),
        }
        self.set_trace(&p.block, t);
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.traces
            .get(&p.block)
            .is_some_and(|t| t.contains(p.index))
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// Checks that every trace refers to an existing block and fits it.
    pub fn validate(&self, space: &Space) -> Result<()> {
        for (id, t) in &self.traces {
            let block = space.require_block(id)?;
            if let BlockKind::Finite(size) = block.kind {
                if t.inf {
                    return Err(Error::InvalidSubset(format!(
                        "limit point on finite block {id}"
                    )));
                }
                if !t.indices.is_finite() || t.indices.largest().is_some_and(|m| m >= size) {
                    return Err(Error::InvalidSubset(format!(
                        "index out of range on block {id}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn zip(&self, other: &Subset, op: impl Fn(&Trace, &Trace) -> Trace) -> Subset {
        let keys: BTreeSet<&String> = self.traces.keys().chain(other.traces.keys()).collect();
        let mut out = Subset::empty();
        for k in keys {
            let t = op(&self.trace(k), &other.trace(k));
            out.set_trace(k, t);
        }
        out
    }

    pub fn union(&self, other: &Subset) -> Subset {
        self.zip(other, |a, b| Trace {
            indices: a.indices.union(&b.indices),
            inf: a.inf || b.inf,
        })
    }

    pub fn intersection(&self, other: &Subset) -> Subset {
        self.zip(other, |a, b| Trace {
            indices: a.indices.intersection(&b.indices),
            inf: a.inf && b.inf,
        })
    }

    pub fn difference(&self, other: &Subset) -> Subset {
        self.zip(other, |a, b| Trace {
            indices: a.indices.difference(&b.indices),
            inf: a.inf && !b.inf,
        })
    }

    pub fn complement(&self, space: &Space) -> Subset {
        Subset::whole(space).difference(self)
    }

    pub fn is_subset(&self, other: &Subset) -> bool {
        self.difference(other).is_empty()
    }

    /// Smallest closed superset: infinite traces gain their limit point.
    pub fn closure(&self, space: &Space) -> Result<Subset> {
        self.validate(space)?;
        let mut out = self.clone();
        for t in out.traces.values_mut() {
            if !t.indices.is_finite() {
                t.inf = true;
            }
        }
        Ok(out)
    }

    pub fn interior(&self, space: &Space) -> Result<Subset> {
        self.validate(space)?;
        let mut out = Subset::empty();
        for (id, t) in &self.traces {
            let mut t = t.clone();
            if t.inf && !t.indices.is_cofinite() {
                t.inf = false;
            }
            out.set_trace(id, t);
        }
        Ok(out)
    }

    pub fn is_closed(&self) -> bool {
        self.traces.values().all(Trace::is_closed)
    }

    pub fn is_open(&self) -> bool {
        self.traces.values().all(Trace::is_open)
    }

    pub fn is_clopen(&self) -> bool {
        self.is_closed() && self.is_open()
    }

    /// First point in canonical order, isolated points before limits.
    pub fn first_isolated_point(&self) -> Option<Point> {
        self.traces
            .iter()
            .find_map(|(id, t)| t.indices.first().map(|i| Point::at(id, i)))
    }

    /// All points, when the subset is finite.
    pub fn finite_points(&self) -> Option<Vec<Point>> {
        let mut out = Vec::new();
        for (id, t) in &self.traces {
            if !t.indices.is_finite() {
                return None;
            }
            out.extend(t.indices.below().iter().map(|&i| Point::at(id, i)));
            if t.inf {
                out.push(Point::inf(id));
            }
        }
        Some(out)
    }
}

fn whole_trace(block: &Block) -> Trace {
    match block.kind {
        BlockKind::Finite(size) => Trace {
            indices: IndexSet::finite(0..size),
            inf: false,
        },
        BlockKind::Seq => Trace {
            indices: IndexSet::all(),
            inf: true,
        },
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut items = Vec::new();
        for (id, t) in &self.traces {
            for &i in t.indices.below() {
                items.push(format!("{id}:{i}"));
            }
            for (a, b) in t.indices.progressions() {
                items.push(format!(
                    "{id}[{}]",
                    crate::template::affine_text(a, b as i64)
                ));
            }
            if t.inf {
                items.push(format!("{id}:inf"));
            }
        }
        if items.is_empty() {
            f.write_str("{ }")
        } else {
            write!(f, "{{ {} }}", items.join(", "))
        }
    }
}

/// A closed subset as a space of its own, with its inclusion map.
pub fn closed_subspace(space: &Space, subset: &Subset) -> Result<(Space, PointEmbedding)> {
    subset.validate(space)?;
    if !subset.is_closed() {
        return Err(Error::NotClosed(subset.to_string()));
    }
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut blocks = Vec::new();
    let mut embeddings = Vec::new();
    for block in space.blocks() {
        let t = subset.trace(&block.id);
        if t.is_empty() {
            continue;
        }
        if t.indices.is_finite() {
            let mut list: Vec<Index> = t.indices.below().iter().map(|&i| Index::At(i)).collect();
            if t.inf {
                list.push(Index::Inf);
            }
            blocks.push(Block::finite(&block.id, list.len() as u64));
            embeddings.push(BlockEmbedding {
                block: block.id.clone(),
                ambient: block.id.clone(),
                placement: BlockPlacement::Finite(list),
            });
        } else {
            let s = &t.indices;
            let offsets = (0..s.period())
                .filter(|&o| s.contains(s.start() + o))
                .collect();
            blocks.push(Block::seq(&block.id));
            embeddings.push(BlockEmbedding {
                block: block.id.clone(),
                ambient: block.id.clone(),
                placement: BlockPlacement::Periodic {
                    below: s.below().iter().copied().collect(),
                    start: s.start(),
                    period: s.period(),
                    offsets,
                },
            });
        }
    }
    Ok((Space::new(blocks)?, PointEmbedding { blocks: embeddings }))
}
