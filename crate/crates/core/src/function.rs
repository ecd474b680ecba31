//! Eventually constant continuous functions.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::Q;
use crate::space::{BlockKind, Index, Point, PointEmbedding, Space};
use crate::subset::{IndexSet, Subset, Trace};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BlockValues {
    Finite(Vec<Q>),
    /// Value `tail` everywhere (limit included) except at the listed indices.
    Seq {
        exceptions: BTreeMap<u64, Q>,
        tail: Q,
    },
}

/// A continuous function on a desk-class space, in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Func {
    space: Arc<Space>,
    blocks: Vec<BlockValues>,
}

impl Func {
    pub fn constant(space: &Arc<Space>, c: Q) -> Self {
        let blocks = space
            .blocks()
            .iter()
            .map(|b| match b.kind {
                BlockKind::Finite(n) => BlockValues::Finite(vec![c.clone(); n as usize]),
                BlockKind::Seq => BlockValues::Seq {
                    exceptions: BTreeMap::new(),
                    tail: c.clone(),
                },
            })
            .collect();
        Func {
            space: space.clone(),
            blocks,
        }
    }

    pub fn zero(space: &Arc<Space>) -> Self {
        Func::constant(space, Q::zero())
    }

    pub fn one(space: &Arc<Space>) -> Self {
        Func::constant(space, Q::one())
    }

    /// Builds a function from per-block values aligned with the space's
    /// blocks; redundant exceptions are dropped.
    pub fn from_blocks(space: &Arc<Space>, blocks: Vec<BlockValues>) -> Result<Self> {
        if blocks.len() != space.blocks().len() {
            return Err(Error::SpaceMismatch("block count differs".into()));
        }
        for (b, v) in space.blocks().iter().zip(&blocks) {
            let ok = match (b.kind, v) {
                (BlockKind::Finite(n), BlockValues::Finite(vals)) => vals.len() as u64 == n,
                (BlockKind::Seq, BlockValues::Seq { .. }) => true,
                _ => false,
            };
            if !ok {
                return Err(Error::SpaceMismatch(format!(
                    "values do not fit block {}",
                    b.id
                )));
            }
        }
        let mut f = Func {
            space: space.clone(),
            blocks,
        };
        f.canonicalize();
        Ok(f)
    }

    /// Sets the value at one isolated point (or the tail, for a limit point).
    pub fn with_value(mut self, p: &Point, value: Q) -> Result<Self> {
        self.space.check_point(p)?;
        let pos = self.space.block_position(&p.block).unwrap();
        match (&mut self.blocks[pos], p.index) {
            (BlockValues::Finite(vals), Index::At(i)) => vals[i as usize] = value,
            (BlockValues::Seq { tail, .. }, Index::Inf) => *tail = value,
            (BlockValues::Seq { exceptions, .. }, Index::At(i)) => {
                exceptions.insert(i, value);
            }
            _ => unreachable!("checked point"),
        }
        self.canonicalize();
        Ok(self)
    }

    fn canonicalize(&mut self) {
        for v in &mut self.blocks {
            if let BlockValues::Seq { exceptions, tail } = v {
                exceptions.retain(|_, x| x != tail);
            }
        }
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn blocks(&self) -> &[BlockValues] {
        &self.blocks
    }

    pub fn block_values(&self, id: &str) -> Option<&BlockValues> {
        self.space.block_position(id).map(|i| &self.blocks[i])
    }

    pub fn eval(&self, p: &Point) -> Result<Q> {
        self.space.check_point(p)?;
        Ok(self.value(p))
    }

    /// Value at a point known to be in the space.
    pub fn value(&self, p: &Point) -> Q {
        let pos = self
            .space
            .block_position(&p.block)
            .unwrap_or_else(|| panic!("point {p} outside the function's space"));
        match (&self.blocks[pos], p.index) {
            (BlockValues::Finite(vals), Index::At(i)) => vals[i as usize].clone(),
            (BlockValues::Seq { tail, .. }, Index::Inf) => tail.clone(),
            (BlockValues::Seq { exceptions, tail }, Index::At(i)) => {
                exceptions.get(&i).unwrap_or(tail).clone()
            }
            (BlockValues::Finite(_), Index::Inf) => panic!("limit point on finite block"),
        }
    }

    /// Largest exceptional index on a sequence block.
    pub fn last_exception(&self, block: &str) -> Option<u64> {
        match self.block_values(block)? {
            BlockValues::Seq { exceptions, .. } => exceptions.keys().next_back().copied(),
            BlockValues::Finite(_) => None,
        }
    }

    /// One past the largest exceptional index over all blocks.
    pub fn horizon(&self) -> u64 {
        self.space
            .blocks()
            .iter()
            .filter_map(|b| self.last_exception(&b.id))
            .max()
            .map_or(0, |m| m + 1)
    }

    /// Every value the function takes.
    pub fn values(&self) -> impl Iterator<Item = &Q> {
        self.blocks
            .iter()
            .flat_map(|v| -> Box<dyn Iterator<Item = &Q>> {
                match v {
                    BlockValues::Finite(vals) => Box::new(vals.iter()),
                    BlockValues::Seq { exceptions, tail } => {
                        Box::new(exceptions.values().chain(std::iter::once(tail)))
                    }
                }
            })
    }

    /// Supremum norm; attained.
    pub fn norm(&self) -> Q {
        self.values().map(|v| v.abs()).max().unwrap_or_else(Q::zero)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values().all(|v| !v.is_negative())
    }

    fn check_same_space(&self, other: &Func) -> Result<()> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch(
                "functions live on different spaces".into(),
            ));
        }
        Ok(())
    }

    fn zip_with(&self, other: &Func, op: impl Fn(&Q, &Q) -> Q) -> Result<Func> {
        self.check_same_space(other)?;
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(x, y)| match (x, y) {
                (BlockValues::Finite(a), BlockValues::Finite(b)) => {
                    BlockValues::Finite(a.iter().zip(b).map(|(u, v)| op(u, v)).collect())
                }
                (
                    BlockValues::Seq {
                        exceptions: ea,
                        tail: ta,
                    },
                    BlockValues::Seq {
                        exceptions: eb,
                        tail: tb,
                    },
                ) => {
                    let exceptions = ea
                        .keys()
                        .chain(eb.keys())
                        .map(|&i| (i, op(ea.get(&i).unwrap_or(ta), eb.get(&i).unwrap_or(tb))))
                        .collect();
                    BlockValues::Seq {
                        exceptions,
                        tail: op(ta, tb),
                    }
                }
                _ => unreachable!("same space"),
            })
            .collect();
        let mut f = Func {
            space: self.space.clone(),
            blocks,
        };
        f.canonicalize();
        Ok(f)
    }

    pub fn map(&self, op: impl Fn(&Q) -> Q) -> Func {
        let blocks = self
            .blocks
            .iter()
            .map(|v| match v {
                BlockValues::Finite(a) => BlockValues::Finite(a.iter().map(&op).collect()),
                BlockValues::Seq { exceptions, tail } => BlockValues::Seq {
                    exceptions: exceptions.iter().map(|(&i, x)| (i, op(x))).collect(),
                    tail: op(tail),
                },
            })
            .collect();
        let mut f = Func {
            space: self.space.clone(),
            blocks,
        };
        f.canonicalize();
        f
    }

    pub fn add(&self, other: &Func) -> Result<Func> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, c: &Q) -> Func {
        self.map(|x| c * x)
    }

    pub fn pointwise_mul(&self, other: &Func) -> Result<Func> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn reciprocal(&self) -> Result<Func> {
        for (b, v) in self.space.blocks().iter().zip(&self.blocks) {
            let zero_at = match v {
                BlockValues::Finite(vals) => vals
                    .iter()
                    .position(Zero::is_zero)
                    .map(|i| Point::at(&b.id, i as u64)),
                BlockValues::Seq { exceptions, tail } => {
                    if tail.is_zero() {
                        Some(Point::inf(&b.id))
                    } else {
                        exceptions
                            .iter()
                            .find(|(_, x)| x.is_zero())
                            .map(|(&i, _)| Point::at(&b.id, i))
                    }
                }
            };
            if let Some(p) = zero_at {
                return Err(Error::ZeroValue(p.to_string()));
            }
        }
        Ok(self.map(|x| x.recip()))
    }

    /// Indicator of a clopen set.
    pub fn clopen_bump(space: &Arc<Space>, set: &Subset) -> Result<Func> {
        set.validate(space)?;
        if !set.is_clopen() {
            return Err(Error::NotClopen(set.to_string()));
        }
        let blocks = space
            .blocks()
            .iter()
            .map(|b| {
                let t = set.trace(&b.id);
                match b.kind {
                    BlockKind::Finite(n) => BlockValues::Finite(
                        (0..n)
                            .map(|i| {
                                if t.indices.contains(i) {
                                    Q::one()
                                } else {
                                    Q::zero()
                                }
                            })
                            .collect(),
                    ),
                    BlockKind::Seq => indicator_block(&t),
                }
            })
            .collect();
        Func::from_blocks(space, blocks)
    }

    /// `{p : value(p) >= threshold}`, a closed set.
    pub fn superlevel(&self, threshold: &Q) -> Subset {
        let mut out = Subset::empty();
        for (b, v) in self.space.blocks().iter().zip(&self.blocks) {
            let trace = match v {
                BlockValues::Finite(vals) => Trace {
                    indices: IndexSet::finite(
                        (0..vals.len() as u64).filter(|&i| &vals[i as usize] >= threshold),
                    ),
                    inf: false,
                },
                BlockValues::Seq { exceptions, tail } => {
                    let hits = exceptions
                        .iter()
                        .filter(|(_, x)| *x >= threshold)
                        .map(|(&i, _)| i);
                    let misses = exceptions
                        .iter()
                        .filter(|(_, x)| *x < threshold)
                        .map(|(&i, _)| i);
                    if tail >= threshold {
                        Trace {
                            indices: IndexSet::all().difference(&IndexSet::finite(misses)),
                            inf: true,
                        }
                    } else {
                        Trace {
                            indices: IndexSet::finite(hits),
                            inf: false,
                        }
                    }
                }
            };
            out.set_trace(&b.id, trace);
        }
        out
    }

    /// Restriction to a closed subspace given by its inclusion map.
    pub fn pull_back(&self, subspace: &Arc<Space>, embedding: &PointEmbedding) -> Result<Func> {
        let mut blocks = Vec::new();
        for b in subspace.blocks() {
            let be = embedding
                .blocks
                .iter()
                .find(|e| e.block == b.id)
                .ok_or_else(|| Error::UnknownBlock(b.id.clone()))?;
            let ambient = |index: Index| Point {
                block: be.ambient.clone(),
                index: be.map_index(index).expect("embedded point"),
            };
            blocks.push(match b.kind {
                BlockKind::Finite(n) => BlockValues::Finite(
                    (0..n).map(|i| self.value(&ambient(Index::At(i)))).collect(),
                ),
                BlockKind::Seq => {
                    let tail = self.value(&Point::inf(&be.ambient));
                    let mut exceptions = BTreeMap::new();
                    if let Some(BlockValues::Seq { exceptions: ex, .. }) =
                        self.block_values(&be.ambient)
                    {
                        for (&n, x) in ex {
                            if let Some(Index::At(i)) = be.inverse_index(Index::At(n)) {
                                exceptions.insert(i, x.clone());
                            }
                        }
                    }
                    BlockValues::Seq { exceptions, tail }
                }
            });
        }
        Func::from_blocks(subspace, blocks)
    }
}

fn indicator_block(t: &Trace) -> BlockValues {
    let (inside, outside) = (Q::one(), Q::zero());
    if t.inf {
        // cofinite with limit: tail 1, finitely many zeros below start
        let start = t.indices.start();
        let exceptions = (0..start)
            .filter(|&i| !t.indices.contains(i))
            .map(|i| (i, outside.clone()))
            .collect();
        BlockValues::Seq {
            exceptions,
            tail: inside,
        }
    } else {
        BlockValues::Seq {
            exceptions: t
                .indices
                .below()
                .iter()
                .map(|&i| (i, inside.clone()))
                .collect(),
            tail: outside,
        }
    }
}

impl fmt::Display for Func {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (b, v) in self.space.blocks().iter().zip(&self.blocks) {
            match v {
                BlockValues::Finite(vals) => {
                    let list: Vec<String> = vals.iter().map(ToString::to_string).collect();
                    write!(f, " {}: [{}];", b.id, list.join(", "))?;
                }
                BlockValues::Seq { exceptions, tail } => {
                    write!(f, " {}: tail {}", b.id, tail)?;
                    if !exceptions.is_empty() {
                        let list: Vec<String> = exceptions
                            .iter()
                            .map(|(i, x)| format!("{i}: {x}"))
                            .collect();
                        write!(f, " except {{{}}}", list.join(", "))?;
                    }
                    f.write_str(";")?;
                }
            }
        }
        f.write_str(" }")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, q};
    use crate::space::Block;

    fn space_a() -> Arc<Space> {
        Space::shared(vec![Block::seq("A")]).unwrap()
    }

    #[test]
    fn eval_exception_and_tail() {
        let s = space_a();
        let g = Func::constant(&s, int(2))
            .with_value(&Point::at("A", 3), int(5))
            .unwrap();
        assert_eq!(g.eval(&Point::at("A", 3)).unwrap(), int(5));
        assert_eq!(g.eval(&Point::at("A", 9)).unwrap(), int(2));
        assert_eq!(g.eval(&Point::inf("A")).unwrap(), int(2));
        assert!(g.eval(&Point::at("B", 0)).is_err());
    }

    #[test]
    fn norms() {
        let s = space_a();
        assert_eq!(Func::one(&s).norm(), int(1));
        let g = Func::constant(&s, q(1, 5))
            .with_value(&Point::at("A", 0), q(-3, 5))
            .unwrap();
        assert_eq!(g.norm(), q(3, 5));
    }

    #[test]
    fn algebra() {
        let s = space_a();
        let g = Func::constant(&s, int(2))
            .with_value(&Point::at("A", 1), int(-1))
            .unwrap();
        assert_eq!(g.add(&g.scale(&int(-1))).unwrap(), Func::zero(&s));
        assert_eq!(Func::one(&s).pointwise_mul(&g).unwrap(), g);
        assert_eq!(
            Func::constant(&s, int(2)).reciprocal().unwrap(),
            Func::constant(&s, q(1, 2))
        );
        let h = Func::one(&s)
            .with_value(&Point::at("A", 2), int(0))
            .unwrap();
        assert!(matches!(h.reciprocal(), Err(Error::ZeroValue(_))));
    }

    #[test]
    fn canonical_form_drops_redundant_exceptions() {
        let s = space_a();
        let g = Func::one(&s)
            .with_value(&Point::at("A", 2), int(1))
            .unwrap();
        assert_eq!(g, Func::one(&s));
    }

    #[test]
    fn clopen_bumps() {
        let s = space_a();
        let single = Subset::point(&Point::at("A", 0));
        let b = Func::clopen_bump(&s, &single).unwrap();
        assert_eq!(b.value(&Point::at("A", 0)), int(1));
        assert_eq!(b.value(&Point::inf("A")), int(0));
        let mut tail = Subset::empty();
        tail.set_trace(
            "A",
            Trace {
                indices: IndexSet::from_threshold(4),
                inf: true,
            },
        );
        let b = Func::clopen_bump(&s, &tail).unwrap();
        assert_eq!(b.value(&Point::at("A", 3)), int(0));
        assert_eq!(b.value(&Point::at("A", 4)), int(1));
        assert_eq!(b.norm(), int(1));
        assert_eq!(
            Func::clopen_bump(&s, &Subset::whole(&s)).unwrap(),
            Func::one(&s)
        );
        assert!(Func::clopen_bump(&s, &Subset::point(&Point::inf("A"))).is_err());
    }

    #[test]
    fn superlevel_set_is_closed() {
        let s = space_a();
        let h = Func::constant(&s, q(1, 2))
            .with_value(&Point::at("A", 0), int(1))
            .unwrap();
        let top = h.superlevel(&q(3, 4));
        assert_eq!(top, Subset::point(&Point::at("A", 0)));
        assert_eq!(h.superlevel(&q(1, 4)), Subset::whole(&s));
    }
}
