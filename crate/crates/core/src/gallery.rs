//! Built-in instances.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::function::{BlockValues, Func};
use crate::kernel::{Kernel, RowTemplate};
use crate::measure::Meas;
use crate::rational::{int, q, Q};
use crate::space::{Block, BlockKind, Point, Space};
use crate::template::{ResidueClass, Target};

/// The bundled problem file for [`ex52`], with its witness and settings.
pub const EX52_FILE: &str = include_str!("../data/ex52.ck");

fn build(
    domain: &Arc<Space>,
    codomain: &Arc<Space>,
    rows: Vec<(Point, Meas)>,
    templates: Vec<RowTemplate>,
) -> Kernel {
    Kernel::new(domain, codomain, rows.into_iter().collect(), templates)
        .expect("gallery kernel is valid")
}

fn meas(space: &Arc<Space>, atoms: &[(Point, Q)]) -> Meas {
    Meas::from_atoms(space, atoms.iter().cloned()).expect("gallery measure is valid")
}

/// Two convergent sequences `X`, `Y` mapped into one sequence `Z`:
/// `Z:0 -> f(Y:inf)`, `Z:2k+1 -> (f(X:k) + f(Y:inf))/2`,
/// `Z:2k -> (f(X:inf) + f(Y:k-1))/2` for `k >= 1`.
pub fn ex52() -> Kernel {
    let k = Space::shared(vec![Block::seq("X"), Block::seq("Y")]).unwrap();
    let l = Space::shared(vec![Block::seq("Z")]).unwrap();
    let half = q(1, 2);
    let rows = vec![
        (Point::at("Z", 0), meas(&k, &[(Point::inf("Y"), int(1))])),
        (
            Point::inf("Z"),
            meas(
                &k,
                &[
                    (Point::inf("X"), half.clone()),
                    (Point::inf("Y"), half.clone()),
                ],
            ),
        ),
    ];
    let templates = vec![
        RowTemplate::new(
            "Z",
            ResidueClass::new(2, 1, 0),
            vec![
                (Target::indexed("X", 1, 0), half.clone()),
                (Target::Fixed(Point::inf("Y")), half.clone()),
            ],
        ),
        RowTemplate::new(
            "Z",
            ResidueClass::new(2, 0, 1),
            vec![
                (Target::Fixed(Point::inf("X")), half.clone()),
                (Target::indexed("Y", 1, -1), half),
            ],
        ),
    ];
    build(&k, &l, rows, templates)
}

/// Minimizer of `||Tg||` for [`ex52`]: `-3/5` on `X`, `1` at `Y:0`, `1/5`
/// elsewhere on `Y`.
pub fn ex52_witness() -> Func {
    let t = ex52();
    Func::from_blocks(
        t.domain(),
        vec![
            BlockValues::Seq {
                exceptions: BTreeMap::new(),
                tail: q(-3, 5),
            },
            BlockValues::Seq {
                exceptions: [(0, int(1))].into(),
                tail: q(1, 5),
            },
        ],
    )
    .unwrap()
}

/// `Tg = g` on any space.
pub fn identity(space: &Arc<Space>) -> Kernel {
    let mut rows = Vec::new();
    let mut templates = Vec::new();
    for b in space.blocks() {
        match b.kind {
            BlockKind::Finite(n) => {
                for i in 0..n {
                    let p = Point::at(&b.id, i);
                    rows.push((p.clone(), meas(space, &[(p, Q::one())])));
                }
            }
            BlockKind::Seq => {
                let lim = Point::inf(&b.id);
                rows.push((lim.clone(), meas(space, &[(lim, Q::one())])));
                templates.push(RowTemplate::new(
                    &b.id,
                    ResidueClass::new(1, 0, 0),
                    vec![(Target::indexed(&b.id, 1, 0), Q::one())],
                ));
            }
        }
    }
    build(space, space, rows, templates)
}

/// `ν_{B:k} = δ_{A:k} - δ_{A:k+1}`, `ν_{B:inf} = 0`: norm 2, envelope not
/// continuous at `B:inf`.
pub fn cancellation() -> Kernel {
    let a = Space::shared(vec![Block::seq("A")]).unwrap();
    let b = Space::shared(vec![Block::seq("B")]).unwrap();
    let rows = vec![(Point::inf("B"), Meas::zero(&a))];
    let templates = vec![RowTemplate::new(
        "B",
        ResidueClass::new(1, 0, 0),
        vec![
            (Target::indexed("A", 1, 0), int(1)),
            (Target::indexed("A", 1, 1), int(-1)),
        ],
    )];
    build(&a, &b, rows, templates)
}

/// `K = {a, b}`, `L = {y1, y2}`, `ν_{y1} = (δ_a - δ_b)/2`,
/// `ν_{y2} = (δ_a + δ_b)/2`.
pub fn two_point_signed() -> Kernel {
    let k = Space::shared(vec![Block::finite("a", 1), Block::finite("b", 1)]).unwrap();
    let l = Space::shared(vec![Block::finite("y1", 1), Block::finite("y2", 1)]).unwrap();
    let (a, b) = (Point::at("a", 0), Point::at("b", 0));
    let half = q(1, 2);
    let rows = vec![
        (
            Point::at("y1", 0),
            meas(&k, &[(a.clone(), half.clone()), (b.clone(), -half.clone())]),
        ),
        (
            Point::at("y2", 0),
            meas(&k, &[(a, half.clone()), (b, half)]),
        ),
    ];
    build(&k, &l, rows, Vec::new())
}

/// The zero operator.
pub fn zero(domain: &Arc<Space>, codomain: &Arc<Space>) -> Kernel {
    let mut rows = Vec::new();
    let mut templates = Vec::new();
    for b in codomain.blocks() {
        match b.kind {
            BlockKind::Finite(n) => {
                rows.extend((0..n).map(|i| (Point::at(&b.id, i), Meas::zero(domain))))
            }
            BlockKind::Seq => {
                rows.push((Point::inf(&b.id), Meas::zero(domain)));
                templates.push(RowTemplate::new(
                    &b.id,
                    ResidueClass::new(1, 0, 0),
                    Vec::new(),
                ));
            }
        }
    }
    build(domain, codomain, rows, templates)
}

/// `(1 - λ) g(y) + λ g(Y:inf)` on the domain of [`ex52`]; positive and
/// unital for `0 <= λ <= 1`.
pub fn mixture(lambda: &Q) -> Kernel {
    let k = ex52().domain().clone();
    let keep = Q::one() - lambda;
    let y_inf = Point::inf("Y");
    let mut rows = Vec::new();
    let mut templates = Vec::new();
    for id in ["X", "Y"] {
        let lim = Point::inf(id);
        rows.push((
            lim.clone(),
            meas(&k, &[(lim, keep.clone()), (y_inf.clone(), lambda.clone())]),
        ));
        let atoms = [
            (Target::indexed(id, 1, 0), keep.clone()),
            (Target::Fixed(y_inf.clone()), lambda.clone()),
        ]
        .into_iter()
        .filter(|(_, w)| !w.is_zero())
        .collect();
        templates.push(RowTemplate::new(id, ResidueClass::new(1, 0, 0), atoms));
    }
    build(&k, &k, rows, templates)
}
