//! Embedding constants `inf { ||Tg|| : ||g|| = 1 }` over windowed functions,
//! computed exactly by sign-fixed linear programs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::function::{BlockValues, Func};
use crate::kernel::Kernel;
use crate::lp::{lp_minimax, Affine, MinimaxProblem};
use crate::measure::Meas;
use crate::rational::Q;
use crate::report::Report;
use crate::space::{BlockKind, Index, Point};
use crate::template::Target;

/// Largest lattice the exhaustive oracle will enumerate.
pub const ORACLE_LIMIT: u128 = 20_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variable {
    /// `g(block:index)` for an index inside the window.
    Exception { block: String, index: u64 },
    /// `g` beyond the window and at the limit point.
    Tail { block: String },
    /// `g(block:index)` on a finite block.
    Value { block: String, index: u64 },
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variable::Exception { block, index } | Variable::Value { block, index } => {
                write!(f, "{block}:{index}")
            }
            Variable::Tail { block } => write!(f, "tail_{block}"),
        }
    }
}

/// The finite minimax problem over functions whose exceptions lie below the
/// window.
#[derive(Clone, Debug)]
pub struct WindowProblem<'a> {
    kernel: &'a Kernel,
    window: u64,
    variables: Vec<Variable>,
    functionals: Vec<Affine>,
}

impl<'a> WindowProblem<'a> {
    pub fn new(kernel: &'a Kernel, window: u64) -> Result<Self> {
        let dom = kernel.domain();
        let mut variables = Vec::new();
        for b in dom.blocks() {
            match b.kind {
                BlockKind::Seq => {
                    for index in 0..window {
                        variables.push(Variable::Exception {
                            block: b.id.clone(),
                            index,
                        });
                    }
                    variables.push(Variable::Tail {
                        block: b.id.clone(),
                    });
                }
                BlockKind::Finite(n) => {
                    for index in 0..n {
                        variables.push(Variable::Value {
                            block: b.id.clone(),
                            index,
                        });
                    }
                }
            }
        }
        let mut problem = WindowProblem {
            kernel,
            window,
            variables,
            functionals: Vec::new(),
        };
        let mut seen = BTreeSet::new();
        let mut push = |problem: &mut WindowProblem, m: &Meas| {
            let f = problem.functional(m);
            if seen.insert(f.coeffs.clone()) {
                problem.functionals.push(f);
            }
        };
        for m in kernel.rows().values() {
            push(&mut problem, m);
        }
        for t in kernel.templates() {
            // beyond this k every indexed atom sits past the window and the
            // row evaluates like the limit row
            let past_window = |k: u64| {
                t.atoms.iter().all(|(target, _)| match target {
                    Target::Fixed(_) => true,
                    Target::Indexed { a, b, .. } => {
                        *a as i128 * k as i128 + *b as i128 >= window as i128
                    }
                })
            };
            let mut k = t.effective_start();
            while !past_window(k) {
                let p = Point::at(&t.block, t.class.index(k));
                if !kernel.rows().contains_key(&p) {
                    let m = t.instantiate(dom, k)?;
                    push(&mut problem, &m);
                }
                k += 1;
            }
        }
        Ok(problem)
    }

    fn var_of(&self, p: &Point) -> usize {
        let target = match (
            self.kernel.domain().block(&p.block).map(|b| b.kind),
            p.index,
        ) {
            (Some(BlockKind::Finite(_)), Index::At(i)) => Variable::Value {
                block: p.block.clone(),
                index: i,
            },
            (_, Index::At(i)) if i < self.window => Variable::Exception {
                block: p.block.clone(),
                index: i,
            },
            _ => Variable::Tail {
                block: p.block.clone(),
            },
        };
        self.variables
            .iter()
            .position(|v| *v == target)
            .expect("variable of a domain point")
    }

    fn functional(&self, m: &Meas) -> Affine {
        let mut coeffs = vec![Q::zero(); self.variables.len()];
        for (p, w) in m.atoms() {
            coeffs[self.var_of(p)] += w;
        }
        Affine {
            coeffs,
            constant: Q::zero(),
        }
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn functionals(&self) -> &[Affine] {
        &self.functionals
    }

    /// Pairs whose total deviation the tie-break minimizes: each exception
    /// against its block's tail, and each tail against the pinned variable.
    fn deviation_pairs(&self, pinned: usize) -> Vec<(usize, usize)> {
        let tails = self
            .variables
            .iter()
            .enumerate()
            .filter(|(i, v)| *i != pinned && matches!(v, Variable::Tail { .. }))
            .map(|(i, _)| (i, pinned));
        self.variables
            .iter()
            .enumerate()
            .filter_map(|(i, v)| match v {
                Variable::Exception { block, .. } => {
                    let tail = self
                        .variables
                        .iter()
                        .position(|w| {
                            *w == Variable::Tail {
                                block: block.clone(),
                            }
                        })
                        .unwrap();
                    Some((i, tail))
                }
                _ => None,
            })
            .chain(tails)
            .collect()
    }

    /// The function with the given variable values.
    pub fn to_func(&self, values: &[Q]) -> Result<Func> {
        let dom = self.kernel.domain();
        let mut by_var: BTreeMap<&Variable, &Q> = BTreeMap::new();
        for (v, x) in self.variables.iter().zip(values) {
            by_var.insert(v, x);
        }
        let blocks = dom
            .blocks()
            .iter()
            .map(|b| match b.kind {
                BlockKind::Finite(n) => BlockValues::Finite(
                    (0..n)
                        .map(|index| {
                            by_var[&Variable::Value {
                                block: b.id.clone(),
                                index,
                            }]
                                .clone()
                        })
                        .collect(),
                ),
                BlockKind::Seq => BlockValues::Seq {
                    exceptions: (0..self.window)
                        .map(|index| {
                            let v = Variable::Exception {
                                block: b.id.clone(),
                                index,
                            };
                            (index, by_var[&v].clone())
                        })
                        .collect(),
                    tail: by_var[&Variable::Tail {
                        block: b.id.clone(),
                    }]
                        .clone(),
                },
            })
            .collect();
        Func::from_blocks(dom, blocks)
    }

    /// `max_j |functional_j(g)|`, which equals `||Tg||` for windowed `g`.
    pub fn objective(&self, values: &[Q]) -> Q {
        self.functionals
            .iter()
            .map(|f| f.eval(values).abs())
            .max()
            .unwrap_or_else(Q::zero)
    }
}

/// An upper bound `m̂` for the embedding constant with a norm-one witness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstantEstimate {
    pub value: Q,
    pub witness: Func,
    pub window: u64,
}

impl ConstantEstimate {
    /// `1/m̂`, the matching lower bound for `||T⁻¹||`; `None` when `m̂ = 0`.
    pub fn inverse_bound(&self) -> Option<Q> {
        (!self.value.is_zero()).then(|| self.value.recip())
    }
}

/// Minimum of `||Tg||` over windowed `g` with `||g|| = 1`.
///
/// One LP per (variable, sign) with that variable pinned to the sign; the
/// subproblems run in parallel and the first minimum in (variable, +1, -1)
/// order wins.
pub fn embedding_constant(kernel: &Kernel, window: u64) -> Result<ConstantEstimate> {
    let problem = WindowProblem::new(kernel, window)?;
    let n = problem.variables.len();
    let jobs: Vec<(usize, Q)> = (0..n)
        .flat_map(|i| [(i, Q::one()), (i, -Q::one())])
        .collect();
    let results: Vec<Result<(Q, Vec<Q>)>> = jobs
        .par_iter()
        .map(|(i, s)| {
            lp_minimax(&MinimaxProblem {
                rows: problem.functionals.clone(),
                lower: vec![-Q::one(); n],
                upper: vec![Q::one(); n],
                pinned: (*i, s.clone()),
                tie_break: problem.deviation_pairs(*i),
            })
        })
        .collect();
    let mut best: Option<(Q, Vec<Q>)> = None;
    for r in results {
        let (v, g) = r?;
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, g));
        }
    }
    let (value, g) = best.ok_or(Error::Infeasible)?;
    let witness = problem.to_func(&g)?;
    debug_assert_eq!(witness.norm(), Q::one());
    Ok(ConstantEstimate {
        value,
        witness,
        window,
    })
}

/// Exhaustive minimum of `||Tg||` over windowed `g` with values in
/// `{-1, -(q-1)/q, ..., 1}` and `||g|| = 1`.
pub fn lattice_oracle(kernel: &Kernel, window: u64, denominator: u64) -> Result<Q> {
    if denominator == 0 {
        return Err(Error::InstanceTooLarge(
            "denominator must be positive".into(),
        ));
    }
    let problem = WindowProblem::new(kernel, window)?;
    let n = problem.variables.len() as u32;
    let side = 2 * denominator as u128 + 1;
    let size = side.checked_pow(n).filter(|&s| s <= ORACLE_LIMIT);
    if size.is_none() {
        return Err(Error::InstanceTooLarge(format!(
            "{side}^{n} lattice points exceed {ORACLE_LIMIT}"
        )));
    }
    // common denominator of all coefficients
    let lcm = problem
        .functionals
        .iter()
        .flat_map(|f| f.coeffs.iter())
        .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
    let rows: Vec<Vec<i128>> = problem
        .functionals
        .iter()
        .map(|f| {
            f.coeffs
                .iter()
                .map(|c| (c * Q::from_integer(lcm.clone())).to_integer().to_i128())
                .collect::<Option<Vec<i128>>>()
        })
        .collect::<Option<_>>()
        .ok_or_else(|| Error::InstanceTooLarge("coefficients overflow i128".into()))?;
    let d = denominator as i128;
    let n = n as usize;
    let best = (0..side as i128)
        .into_par_iter()
        .map(|first| {
            let mut v = vec![-d; n];
            v[0] = first - d;
            let mut best = i128::MAX;
            loop {
                if v.iter().any(|x| x.abs() == d) {
                    let worst = rows
                        .iter()
                        .map(|r| r.iter().zip(&v).map(|(a, x)| a * x).sum::<i128>().abs())
                        .max()
                        .unwrap_or(0);
                    best = best.min(worst);
                }
                // odometer over coordinates 1..n
                let mut i = 1;
                while i < n {
                    if v[i] < d {
                        v[i] += 1;
                        break;
                    }
                    v[i] = -d;
                    i += 1;
                }
                if i >= n {
                    return best;
                }
            }
        })
        .min()
        .unwrap_or(i128::MAX);
    Ok(Q::new(BigInt::from(best), lcm * BigInt::from(denominator)))
}

/// Checks `||Tg|| >= m ||g||` for every probe. A violating probe yields an
/// improved estimate (the best one is returned).
pub fn norming_check(
    kernel: &Kernel,
    m: &Q,
    probes: &[Func],
) -> Result<(Report, Option<ConstantEstimate>)> {
    const ANCHOR: &str = "norming";
    let mut report = Report::new();
    let mut improved: Option<ConstantEstimate> = None;
    for (i, g) in probes.iter().enumerate() {
        let norm = g.norm();
        if norm.is_zero() {
            report
                .pass(ANCHOR, format!("probe {i} is zero"))
                .add("probe", g.to_string());
            continue;
        }
        let tg = kernel.apply(g)?;
        let lhs = tg.norm();
        let rhs = m * &norm;
        let ok = lhs >= rhs;
        report
            .check(ANCHOR, format!("probe {i}: ||Tg|| >= m ||g||"), ok)
            .add("||Tg||", lhs.to_string())
            .add("m ||g||", rhs.to_string());
        if !ok {
            let value = &lhs / &norm;
            if improved.as_ref().is_none_or(|e| value < e.value) {
                improved = Some(ConstantEstimate {
                    value,
                    witness: g.scale(&norm.recip()),
                    window: g.horizon(),
                });
            }
        }
    }
    Ok((report, improved))
}
