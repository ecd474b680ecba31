//! Seeded generators of small kernels, measure paths and functions.
//!
//! Every generator draws from a caller-supplied [`ChaCha8Rng`], so a seed
//! determines the whole sample. Template kernels are built limit-first: the
//! limit row is drawn, then each residue class splits every limit atom into
//! moving atoms converging to it. This makes weak* continuity hold by
//! construction.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::function::{BlockValues, Func};
use crate::kernel::{Kernel, RowTemplate};
use crate::measure::{Meas, MeasPath};
use crate::rational::{q, Q};
use crate::reductions::envelope;
use crate::space::{Block, BlockKind, Index, Point, Space};
use crate::template::{ResidueClass, Target};

pub const DEFAULT_SEED: u64 = 0x5eed;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sign discipline of generated rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Signs {
    /// Probability rows: positive unital kernels.
    Probability,
    /// Signed rows whose moving atoms share the sign of their limit atom;
    /// the envelope is then continuous and never zero.
    Coherent,
    /// Anything, including cancelling pairs with a vanishing limit.
    Mixed,
}

#[derive(Clone, Debug)]
pub struct Shape {
    pub domain_blocks: usize,
    pub codomain_blocks: usize,
    /// Largest modulus of the residue classes on a codomain block.
    pub classes: u64,
    pub signs: Signs,
    /// Adds a codomain copy of the domain with rows `±δ_x`, which makes the
    /// kernel an isomorphic embedding.
    pub copy_of_domain: bool,
    /// Domain blocks are finite of size one or two, or sequences.
    pub max_finite: u64,
}

impl Shape {
    pub fn positive_unital() -> Self {
        Shape {
            domain_blocks: 3,
            codomain_blocks: 3,
            classes: 3,
            signs: Signs::Probability,
            copy_of_domain: false,
            max_finite: 2,
        }
    }

    pub fn coherent_embedding() -> Self {
        Shape {
            domain_blocks: 2,
            codomain_blocks: 2,
            classes: 2,
            signs: Signs::Coherent,
            copy_of_domain: true,
            max_finite: 2,
        }
    }

    pub fn general() -> Self {
        Shape {
            domain_blocks: 2,
            codomain_blocks: 2,
            classes: 3,
            signs: Signs::Mixed,
            copy_of_domain: false,
            max_finite: 2,
        }
    }
}

const DENOMINATORS: [i64; 4] = [1, 2, 3, 4];

/// A rational in `[lo, hi]` with a small denominator.
pub fn rational_in(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> Q {
    let d = *DENOMINATORS.choose(rng).unwrap();
    q(rng.gen_range(lo * d..=hi * d), d)
}

fn nonzero(rng: &mut ChaCha8Rng) -> Q {
    loop {
        let x = rational_in(rng, -1, 1);
        if !x.is_zero() {
            return x;
        }
    }
}

/// Splits `total` into `parts` positive shares.
fn shares(rng: &mut ChaCha8Rng, total: &Q, parts: usize) -> Vec<Q> {
    let cuts: Vec<i64> = (0..parts).map(|_| rng.gen_range(1..=3)).collect();
    let sum: i64 = cuts.iter().sum();
    cuts.iter().map(|&c| total * q(c, sum)).collect()
}

pub fn random_space(
    rng: &mut ChaCha8Rng,
    prefix: &str,
    max_blocks: usize,
    max_finite: u64,
) -> Arc<Space> {
    let n = rng.gen_range(1..=max_blocks.max(1));
    let blocks = (0..n)
        .map(|i| {
            let id = format!("{prefix}{i}");
            if rng.gen_bool(0.6) {
                Block::seq(&id)
            } else {
                Block::finite(&id, rng.gen_range(1..=max_finite.max(1)))
            }
        })
        .collect();
    Arc::new(Space::new(blocks).expect("generated blocks are distinct and nonempty"))
}

fn random_point(rng: &mut ChaCha8Rng, space: &Space) -> Point {
    let points = space.points_below(3);
    points.choose(rng).unwrap().clone()
}

/// A row measure on at most three points: a probability measure, a nonzero
/// signed measure of variation at most one, or any such signed measure.
pub fn random_row(rng: &mut ChaCha8Rng, space: &Arc<Space>, signs: Signs) -> Meas {
    let n = rng.gen_range(1..=3usize);
    let mut points: BTreeSet<Point> = BTreeSet::new();
    for _ in 0..n {
        points.insert(random_point(rng, space));
    }
    let weights = shares(rng, &Q::one(), points.len());
    let atoms = points.into_iter().zip(weights).map(|(p, w)| match signs {
        Signs::Probability => (p, w),
        _ => {
            if rng.gen_bool(0.5) {
                (p, -w)
            } else {
                (p, w)
            }
        }
    });
    Meas::from_atoms(space, atoms).expect("points drawn from the space")
}

/// Moving atoms converging to `limit`, one residue class worth.
fn class_atoms(
    rng: &mut ChaCha8Rng,
    space: &Space,
    limit: &Meas,
    signs: Signs,
) -> Vec<(Target, Q)> {
    let mut atoms: Vec<(Target, Q)> = Vec::new();
    let mut used: BTreeSet<Target> = BTreeSet::new();
    let fresh = |rng: &mut ChaCha8Rng, block: &str, used: &mut BTreeSet<Target>| loop {
        let t = if rng.gen_bool(0.25) {
            Target::Fixed(Point::inf(block))
        } else {
            Target::indexed(block, rng.gen_range(1..=2), rng.gen_range(-1..=2))
        };
        if used.insert(t.clone()) {
            return t;
        }
    };
    let mut totals: BTreeMap<String, Q> = BTreeMap::new();
    for (p, w) in limit.atoms() {
        match p.index {
            Index::Inf => {
                totals.insert(p.block.clone(), w.clone());
            }
            Index::At(_) => {
                used.insert(Target::Fixed(p.clone()));
                atoms.push((Target::Fixed(p.clone()), w.clone()));
            }
        }
    }
    if signs == Signs::Mixed {
        for b in space.seq_blocks() {
            if !totals.contains_key(&b.id) && rng.gen_bool(0.3) {
                totals.insert(b.id.clone(), Q::zero());
            }
        }
    }
    for (block, total) in totals {
        let parts: Vec<Q> = if total.is_zero() {
            let x = nonzero(rng);
            vec![x.clone(), -x]
        } else if signs == Signs::Mixed && rng.gen_bool(0.3) {
            let x = loop {
                let x = nonzero(rng);
                if x != total {
                    break x;
                }
            };
            vec![x.clone(), &total - x]
        } else {
            let n = rng.gen_range(1..=2);
            shares(rng, &total, n)
        };
        for w in parts {
            let t = fresh(rng, &block, &mut used);
            atoms.push((t, w));
        }
    }
    atoms
}

fn signed_copy(
    rng: &mut ChaCha8Rng,
    domain: &Arc<Space>,
    rows: &mut BTreeMap<Point, Meas>,
    templates: &mut Vec<RowTemplate>,
) -> Vec<Block> {
    let mut blocks = Vec::new();
    for b in domain.blocks() {
        let id = format!("c{}", b.id);
        let sign = if rng.gen_bool(0.5) {
            Q::one()
        } else {
            -Q::one()
        };
        match b.kind {
            BlockKind::Finite(n) => {
                for i in 0..n {
                    let m =
                        Meas::from_atoms(domain, [(Point::at(&b.id, i), sign.clone())]).unwrap();
                    rows.insert(Point::at(&id, i), m);
                }
            }
            BlockKind::Seq => {
                let m = Meas::from_atoms(domain, [(Point::inf(&b.id), sign.clone())]).unwrap();
                rows.insert(Point::inf(&id), m);
                templates.push(RowTemplate::new(
                    &id,
                    ResidueClass::new(1, 0, 0),
                    vec![(Target::indexed(&b.id, 1, 0), sign)],
                ));
            }
        }
        blocks.push(Block { id, kind: b.kind });
    }
    blocks
}

/// A valid template kernel of the given shape. Coherent kernels are redrawn
/// until sporadic collisions leave no zero row.
pub fn random_kernel(rng: &mut ChaCha8Rng, shape: &Shape) -> Kernel {
    loop {
        let k = draw_kernel(rng, shape);
        if shape.signs != Signs::Coherent || {
            let e = envelope(&k);
            e.continuous && e.strictly_positive
        } {
            return k;
        }
    }
}

fn draw_kernel(rng: &mut ChaCha8Rng, shape: &Shape) -> Kernel {
    let domain = random_space(rng, "x", shape.domain_blocks, shape.max_finite);
    let codomain_draft = random_space(rng, "y", shape.codomain_blocks, 2);
    let mut rows = BTreeMap::new();
    let mut templates = Vec::new();
    let mut blocks = codomain_draft.blocks().to_vec();
    for b in codomain_draft.blocks() {
        match b.kind {
            BlockKind::Finite(n) => {
                for i in 0..n {
                    rows.insert(Point::at(&b.id, i), random_row(rng, &domain, shape.signs));
                }
            }
            BlockKind::Seq => {
                let limit = if shape.signs == Signs::Mixed && rng.gen_bool(0.2) {
                    Meas::zero(&domain)
                } else {
                    random_row(rng, &domain, shape.signs)
                };
                rows.insert(Point::inf(&b.id), limit.clone());
                let d = rng.gen_range(1..=shape.classes.max(1));
                for r in 0..d {
                    let atoms = class_atoms(rng, &domain, &limit, shape.signs);
                    let defined = atoms
                        .iter()
                        .map(|(t, _)| t.nonnegative_from())
                        .max()
                        .unwrap_or(0);
                    let start = rng.gen_range(0..=1).max(defined);
                    for k in 0..start {
                        rows.insert(
                            Point::at(&b.id, d * k + r),
                            random_row(rng, &domain, shape.signs),
                        );
                    }
                    templates.push(RowTemplate::new(
                        &b.id,
                        ResidueClass::new(d, r, start),
                        atoms,
                    ));
                }
                if rng.gen_bool(0.3) {
                    rows.insert(
                        Point::at(&b.id, rng.gen_range(0..6)),
                        random_row(rng, &domain, shape.signs),
                    );
                }
            }
        }
    }
    if shape.copy_of_domain {
        blocks.extend(signed_copy(rng, &domain, &mut rows, &mut templates));
    }
    let codomain = Arc::new(Space::new(blocks).expect("copy blocks carry a distinct prefix"));
    Kernel::with_filled_rows(&domain, &codomain, rows, templates)
        .expect("generated kernels are valid")
}

/// A path with `||mu_n|| <= 1` for every `n`; with `unit` the moving atoms
/// share the sign of their limit atom and the variation is exactly one.
pub fn random_meas_path(rng: &mut ChaCha8Rng, space: &Arc<Space>, unit: bool) -> MeasPath {
    loop {
        let limit = random_row(
            rng,
            space,
            if unit { Signs::Coherent } else { Signs::Mixed },
        );
        let signs = if unit { Signs::Coherent } else { Signs::Mixed };
        let mut atoms = class_atoms(rng, space, &limit, signs);
        let variation: Q = atoms.iter().map(|(_, w)| w.abs()).sum();
        if variation.is_zero() {
            continue;
        }
        if !unit && variation > Q::one() {
            atoms.iter_mut().for_each(|(_, w)| *w = &*w / &variation);
        }
        if !unit && rng.gen_bool(0.3) {
            let c = q(rng.gen_range(1..=3), 4);
            atoms.iter_mut().for_each(|(_, w)| *w = &*w * &c);
        }
        let start = atoms
            .iter()
            .map(|(t, _)| t.nonnegative_from())
            .max()
            .unwrap_or(0);
        return MeasPath::with_symbolic_limit(space, start, atoms)
            .expect("atoms are distinct and nonzero");
    }
}

/// A function with values in `[lo, hi]` and at most three exceptions per
/// sequence block.
pub fn random_function(rng: &mut ChaCha8Rng, space: &Arc<Space>, lo: i64, hi: i64) -> Func {
    let blocks = space
        .blocks()
        .iter()
        .map(|b| match b.kind {
            BlockKind::Finite(n) => {
                BlockValues::Finite((0..n).map(|_| rational_in(rng, lo, hi)).collect())
            }
            BlockKind::Seq => {
                let n = rng.gen_range(0..=3);
                let exceptions = (0..n)
                    .map(|_| (rng.gen_range(0..5), rational_in(rng, lo, hi)))
                    .collect();
                BlockValues::Seq {
                    exceptions,
                    tail: rational_in(rng, lo, hi),
                }
            }
        })
        .collect();
    Func::from_blocks(space, blocks).expect("blocks aligned with the space")
}

/// A function with `0 <= g <= 1`.
pub fn random_unit_function(rng: &mut ChaCha8Rng, space: &Arc<Space>) -> Func {
    random_function(rng, space, 0, 1)
}

/// A small kernel whose window-one problem has at most `max_vars` variables.
pub fn random_small_kernel(rng: &mut ChaCha8Rng, max_vars: u64) -> Kernel {
    loop {
        let k = random_kernel(rng, &Shape::general());
        let vars: u64 = k
            .domain()
            .blocks()
            .iter()
            .map(|b| match b.kind {
                BlockKind::Finite(n) => n,
                BlockKind::Seq => 2,
            })
            .sum();
        if vars <= max_vars && !k.operator_norm().is_zero() {
            return k;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        let a = random_kernel(&mut rng(7), &Shape::general());
        let b = random_kernel(&mut rng(7), &Shape::general());
        assert_eq!(a, b);
    }

    #[test]
    fn kernel_shapes_hold() {
        let mut r = rng(1);
        for _ in 0..100 {
            let k = random_kernel(&mut r, &Shape::positive_unital());
            assert!(k.is_positive() && k.is_unital(), "{k}");
            let s = random_kernel(&mut r, &Shape::coherent_embedding());
            let e = envelope(&s);
            assert!(e.continuous && e.strictly_positive, "{s}\n{e}");
            random_kernel(&mut r, &Shape::general());
        }
    }

    #[test]
    fn paths_have_bounded_variation() {
        let mut r = rng(2);
        let space = Arc::new(Space::new(vec![Block::seq("A"), Block::finite("B", 2)]).unwrap());
        for _ in 0..200 {
            let unit = r.gen_bool(0.5);
            let p = random_meas_path(&mut r, &space, unit);
            for n in p.start()..p.start() + 6 {
                assert!(p.at(n).unwrap().norm() <= Q::one());
            }
            if unit {
                assert_eq!(p.eventual_norm(), Q::one());
                assert_eq!(p.declared_limit().norm(), Q::one());
            }
        }
    }
}
