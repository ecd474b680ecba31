//! Seeded property suites over random instances.
//!
//! Instances are drawn sequentially from one generator, so a seed fixes the
//! sample; checks then run in parallel and are collected in draw order. A
//! failing instance is reported in file syntax.

use num_traits::{One, Zero};
use rand::Rng;
use rayon::prelude::*;

use crate::constructions::{check_phi_r, phi_r};
use crate::format::{serialize, ProblemFile};
use crate::kernel::Kernel;
use crate::measure::check_variation_semicontinuity;
use crate::norms::{embedding_constant, lattice_oracle};
use crate::random::{self, Shape};
use crate::rational::{q, Q};
use crate::reductions::{adjoin_and_lift, envelope, positive_reduction};
use crate::report::{Clause, Report, Verdict};
use crate::space::{layer_point, Point, Space};

/// Failures shown per suite; the count covers all of them.
const SHOWN_FAILURES: usize = 3;

fn kernel_text(k: &Kernel) -> String {
    serialize(&ProblemFile::from_kernel("T", k))
}

fn tally(anchor: &str, label: &str, outcomes: Vec<Result<(), String>>) -> Report {
    let failures: Vec<String> = outcomes.into_iter().filter_map(|r| r.err()).collect();
    let total_failed = failures.len();
    let mut report = Report::new();
    let verdict = if failures.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let mut clause = Clause::new(anchor, label, verdict).with("failures", total_failed.to_string());
    for (i, f) in failures.into_iter().take(SHOWN_FAILURES).enumerate() {
        clause = clause.with(&format!("counterexample {}", i + 1), f);
    }
    report.push(clause);
    report
}

fn with_count(mut r: Report, count: usize, seed: u64) -> Report {
    for c in &mut r.clauses {
        c.values.insert(0, ("instances".into(), count.to_string()));
        c.values.insert(1, ("seed".into(), seed.to_string()));
    }
    r
}

/// `phi_r` is usc with closed image for random positive unital kernels at
/// `r = 1/4, 1/2, 3/4`.
pub fn phi_r_suite(seed: u64, count: usize) -> Report {
    let mut rng = random::rng(seed);
    let kernels: Vec<Kernel> = (0..count)
        .map(|_| random::random_kernel(&mut rng, &Shape::positive_unital()))
        .collect();
    let outcomes = kernels
        .par_iter()
        .map(|k| {
            for r in [q(1, 4), q(1, 2), q(3, 4)] {
                let checked = phi_r(k, &r).map(|m| check_phi_r(&m));
                match checked {
                    Ok(rep) if rep.is_ok() => {}
                    Ok(rep) => return Err(format!("r = {r}\n{rep}{}", kernel_text(k))),
                    Err(e) => return Err(format!("r = {r}: {e}\n{}", kernel_text(k))),
                }
            }
            Ok(())
        })
        .collect();
    with_count(
        tally(
            "phi_r",
            "usc with closed image at r = 1/4, 1/2, 3/4",
            outcomes,
        ),
        count,
        seed,
    )
}

/// Both variation inequalities along random paths with `||mu_n|| <= 1`;
/// unit-norm paths also converge in variation.
pub fn semicontinuity_suite(seed: u64, count: usize) -> Report {
    let mut rng = random::rng(seed);
    let cases: Vec<_> = (0..count)
        .map(|_| {
            let space = random::random_space(&mut rng, "x", 3, 2);
            let unit = rng.gen_bool(0.5);
            let path = random::random_meas_path(&mut rng, &space, unit);
            let g = random::random_unit_function(&mut rng, &space);
            (space, unit, path, g)
        })
        .collect();
    let units = cases.iter().filter(|c| c.1).count();
    let outcomes = cases
        .par_iter()
        .map(|(space, unit, path, g)| {
            let report = check_variation_semicontinuity(path, g).map_err(|e| e.to_string())?;
            let continuity = report
                .clauses
                .iter()
                .any(|c| c.clause.starts_with("unit-norm continuity"));
            if !report.is_ok() || (*unit && !continuity) {
                return Err(format!(
                    "space K {space}\npath {:?}\ng = {g}\n{report}",
                    path.atoms()
                ));
            }
            Ok(())
        })
        .collect();
    let mut r = with_count(
        tally(
            "variation-semicontinuity",
            "both inequalities hold",
            outcomes,
        ),
        count,
        seed,
    );
    r.clauses[0]
        .values
        .push(("unit-norm paths".into(), units.to_string()));
    r
}

/// Points of `space` up to `horizon` on every sequence block.
fn sample_points(space: &Space, horizon: u64) -> Vec<Point> {
    space.points_below(horizon)
}

fn max_horizon(k: &Kernel) -> u64 {
    k.codomain()
        .blocks()
        .iter()
        .map(|b| k.horizon(&b.id))
        .max()
        .unwrap_or(0)
}

/// Random signed embeddings with continuous positive envelope reduce to
/// positive kernels on `L x 2` with constant at least `m/2`, and the layers
/// recombine to `T / e^T`.
pub fn reduction_suite(seed: u64, count: usize, window: u64) -> Report {
    let mut rng = random::rng(seed);
    let cases: Vec<_> = (0..count)
        .map(|_| {
            let k = random::random_kernel(&mut rng, &Shape::coherent_embedding());
            let g = random::random_function(&mut rng, k.domain(), -1, 1);
            (k, g)
        })
        .collect();
    let outcomes = cases
        .par_iter()
        .map(|(k, g)| {
            let fail = |what: String| Err(format!("{what}\n{}", kernel_text(k)));
            let t = k.scale(&k.operator_norm().recip());
            let m = embedding_constant(&t, window)
                .map_err(|e| e.to_string())?
                .value;
            if m.is_zero() {
                return fail("generated kernel is not an embedding".into());
            }
            let red = match positive_reduction(&t, &m, window) {
                Ok(r) => r,
                Err(e) => return fail(e.to_string()),
            };
            if !red.report.is_ok() || !red.kernel.is_positive() {
                return fail(red.report.to_string());
            }
            let ms = &red.constant;
            if ms < &(&m / Q::from_integer(2.into())) {
                return fail(format!("m(S) = {ms} < m/2 with m = {m}"));
            }
            let tg = red.scaled.apply(g).map_err(|e| e.to_string())?;
            for y in sample_points(red.scaled.codomain(), max_horizon(&red.scaled) + 3) {
                let plus = red
                    .kernel
                    .row(&layer_point(&y, 0))
                    .map_err(|e| e.to_string())?;
                let minus = red
                    .kernel
                    .row(&layer_point(&y, 1))
                    .map_err(|e| e.to_string())?;
                let split = plus
                    .sub(&minus)
                    .map_err(|e| e.to_string())?
                    .eval(g)
                    .map_err(|e| e.to_string())?;
                if split != tg.value(&y) {
                    return fail(format!("duality fails at {y} for g = {g}"));
                }
            }
            Ok(())
        })
        .collect();
    with_count(
        tally(
            "positive-reduction",
            "S positive, m(S) >= m/2, layers recombine",
            outcomes,
        ),
        count,
        seed,
    )
}

/// Adjoining a point adds exactly one to the envelope, pointwise.
pub fn lift_suite(seed: u64, count: usize, window: u64) -> Report {
    let mut rng = random::rng(seed);
    let kernels: Vec<Kernel> = (0..count)
        .map(|_| random::random_kernel(&mut rng, &Shape::general()))
        .collect();
    let outcomes = kernels
        .par_iter()
        .map(|k| {
            let fail = |what: String| Err(format!("{what}\n{}", kernel_text(k)));
            let m = embedding_constant(k, window)
                .map_err(|e| e.to_string())?
                .value;
            let lift = match adjoin_and_lift(k, &m, window) {
                Ok(l) => l,
                Err(e) => return fail(e.to_string()),
            };
            if !lift.report.is_ok() {
                return fail(lift.report.to_string());
            }
            let (before, after) = (envelope(k), envelope(&lift.kernel));
            for y in sample_points(k.codomain(), max_horizon(&lift.kernel) + 3) {
                let direct = lift.kernel.row(&y).map_err(|e| e.to_string())?.norm();
                if after.value(&y) != before.value(&y) + Q::one() || direct != after.value(&y) {
                    return fail(format!(
                        "envelope at {y}: {} before, {} after",
                        before.value(&y),
                        after.value(&y)
                    ));
                }
            }
            Ok(())
        })
        .collect();
    with_count(
        tally("lift", "envelope of the lift = envelope + 1", outcomes),
        count,
        seed,
    )
}

/// True when every value of `g` is a multiple of `1/denominator`.
fn on_lattice(values: impl Iterator<Item = Q>, denominator: u64) -> bool {
    let d = Q::from_integer(denominator.into());
    values.map(|v| v * &d).all(|x| x.is_integer())
}

/// `lp_minimax <= lattice_oracle` on small kernels, with equality when the
/// minimizer lies on the lattice; identity kernels give exactly 1.
pub fn oracle_suite(seed: u64, count: usize, denominator: u64) -> Report {
    let mut rng = random::rng(seed);
    let kernels: Vec<Kernel> = (0..count)
        .map(|_| random::random_small_kernel(&mut rng, 6))
        .collect();
    let identities: Vec<Kernel> = (0..count.div_ceil(10))
        .map(|_| {
            let s = random::random_space(&mut rng, "x", 3, 2);
            crate::gallery::identity(&s)
        })
        .collect();
    let window = 1;
    let mut on_grid = 0usize;
    let results: Vec<(Result<(), String>, bool)> = kernels
        .par_iter()
        .map(|k| {
            let est = match embedding_constant(k, window) {
                Ok(e) => e,
                Err(e) => return (Err(format!("{e}\n{}", kernel_text(k))), false),
            };
            let oracle = match lattice_oracle(k, window, denominator) {
                Ok(o) => o,
                Err(e) => return (Err(format!("{e}\n{}", kernel_text(k))), false),
            };
            let grid = on_lattice(est.witness.values().cloned(), denominator);
            let ok = est.value <= oracle && (!grid || est.value == oracle);
            if ok {
                (Ok(()), grid)
            } else {
                let msg = format!(
                    "lp {} oracle {oracle} witness {}\n{}",
                    est.value,
                    est.witness,
                    kernel_text(k)
                );
                (Err(msg), grid)
            }
        })
        .collect();
    let mut outcomes = Vec::new();
    for (r, grid) in results {
        on_grid += grid as usize;
        outcomes.push(r);
    }
    let mut report = with_count(
        tally(
            "norms",
            "lp_minimax <= lattice oracle, equal on the lattice",
            outcomes,
        ),
        count,
        seed,
    );
    report.clauses[0]
        .values
        .push(("minimizers on the lattice".into(), on_grid.to_string()));
    let id_outcomes = identities
        .par_iter()
        .map(|k| {
            let lp = embedding_constant(k, window)
                .map_err(|e| e.to_string())?
                .value;
            let oracle = lattice_oracle(k, window, 1).map_err(|e| e.to_string())?;
            if lp == Q::one() && oracle == Q::one() {
                Ok(())
            } else {
                Err(format!("lp {lp} oracle {oracle}\n{}", kernel_text(k)))
            }
        })
        .collect();
    report.extend(with_count(
        tally("norms", "identity kernels have constant 1", id_outcomes),
        identities.len(),
        seed,
    ));
    report
}

/// Instance counts of the full suite.
#[derive(Clone, Copy, Debug)]
pub struct Counts {
    pub phi_r: usize,
    pub paths: usize,
    pub reductions: usize,
    pub lifts: usize,
    pub oracle: usize,
}

impl Default for Counts {
    fn default() -> Self {
        Counts {
            phi_r: 500,
            paths: 1000,
            reductions: 200,
            lifts: 200,
            oracle: 100,
        }
    }
}

/// Every suite, each from its own seed derived from `seed`.
pub fn run(seed: u64, counts: Counts) -> Report {
    let mut report = Report::new();
    report.extend(phi_r_suite(seed, counts.phi_r));
    report.extend(semicontinuity_suite(seed.wrapping_add(1), counts.paths));
    report.extend(reduction_suite(seed.wrapping_add(2), counts.reductions, 1));
    report.extend(lift_suite(seed.wrapping_add(3), counts.lifts, 1));
    report.extend(oracle_suite(seed.wrapping_add(4), counts.oracle, 2));
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        let counts = Counts {
            phi_r: 20,
            paths: 40,
            reductions: 10,
            lifts: 10,
            oracle: 5,
        };
        let r = run(11, counts);
        assert!(r.is_ok(), "{r}");
    }
}
