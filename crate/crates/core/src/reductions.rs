//! Envelopes, normalization to unital kernels, the positive reduction onto
//! `L x 2`, the one-point lift, and the pipeline that chains them.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};

use crate::constructions::{
    filtration, pi_base, top_level_witness, CiWitness, Filtration, PiBaseElement,
};
use crate::error::{assertion, Error, Result};
use crate::function::{BlockValues, Func};
use crate::kernel::{Kernel, RowTemplate};
use crate::measure::Meas;
use crate::norms::embedding_constant;
use crate::rational::Q;
use crate::report::{Clause, Report, Verdict};
use crate::space::{layer_id, layer_point, BlockKind, Index, Point, PointEmbedding, Space};
use crate::subset::Subset;
use crate::template::{ResidueClass, Target};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EnvelopeBlock {
    Finite(Vec<Q>),
    Seq {
        /// Values at explicit rows.
        explicit: BTreeMap<u64, Q>,
        /// Eventual value along each residue class.
        class_tails: Vec<(ResidueClass, Q)>,
        limit: Q,
    },
}

/// `y -> ||ν_y||`, not assumed continuous.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    space: Arc<Space>,
    pub blocks: Vec<EnvelopeBlock>,
    pub lsc: bool,
    pub continuous: bool,
    pub strictly_positive: bool,
    pub min: Q,
}

pub fn envelope(kernel: &Kernel) -> Envelope {
    let cod = kernel.codomain();
    let mut blocks = Vec::new();
    let (mut lsc, mut continuous) = (true, true);
    let mut all_values: Vec<Q> = Vec::new();
    for b in cod.blocks() {
        match b.kind {
            BlockKind::Finite(n) => {
                let vals: Vec<Q> = (0..n)
                    .map(|i| {
                        kernel
                            .rows()
                            .get(&Point::at(&b.id, i))
                            .map_or_else(Q::zero, Meas::norm)
                    })
                    .collect();
                all_values.extend(vals.iter().cloned());
                blocks.push(EnvelopeBlock::Finite(vals));
            }
            BlockKind::Seq => {
                let explicit: BTreeMap<u64, Q> = kernel
                    .rows()
                    .iter()
                    .filter(|(p, _)| p.block == b.id)
                    .filter_map(|(p, m)| match p.index {
                        Index::At(i) => Some((i, m.norm())),
                        Index::Inf => None,
                    })
                    .collect();
                let class_tails: Vec<(ResidueClass, Q)> = kernel
                    .templates_of(&b.id)
                    .map(|t| (t.class, t.variation()))
                    .collect();
                let limit = kernel
                    .rows()
                    .get(&Point::inf(&b.id))
                    .map_or_else(Q::zero, Meas::norm);
                for (_, tail) in &class_tails {
                    lsc &= &limit <= tail;
                    continuous &= &limit == tail;
                }
                all_values.extend(explicit.values().cloned());
                all_values.extend(class_tails.iter().map(|(_, v)| v.clone()));
                all_values.push(limit.clone());
                blocks.push(EnvelopeBlock::Seq {
                    explicit,
                    class_tails,
                    limit,
                });
            }
        }
    }
    let min = all_values.into_iter().min().unwrap_or_else(Q::zero);
    Envelope {
        space: cod.clone(),
        blocks,
        lsc,
        continuous,
        strictly_positive: min.is_positive(),
        min,
    }
}

impl Envelope {
    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn value(&self, y: &Point) -> Q {
        let pos = self
            .space
            .block_position(&y.block)
            .expect("point of the codomain");
        match (&self.blocks[pos], y.index) {
            (EnvelopeBlock::Finite(vals), Index::At(i)) => vals[i as usize].clone(),
            (EnvelopeBlock::Seq { limit, .. }, Index::Inf) => limit.clone(),
            (
                EnvelopeBlock::Seq {
                    explicit,
                    class_tails,
                    ..
                },
                Index::At(n),
            ) => explicit.get(&n).cloned().unwrap_or_else(|| {
                class_tails
                    .iter()
                    .find(|(c, _)| c.matches(n))
                    .map(|(_, v)| v.clone())
                    .unwrap_or_else(Q::zero)
            }),
            (EnvelopeBlock::Finite(_), Index::Inf) => unreachable!("limit point on finite block"),
        }
    }

    /// One past every explicit index.
    fn horizon(&self) -> u64 {
        self.blocks
            .iter()
            .filter_map(|b| match b {
                EnvelopeBlock::Seq { explicit, .. } => explicit.keys().next_back().map(|i| i + 1),
                EnvelopeBlock::Finite(_) => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// `self(y) + c = other(y)` at every point: explicit indices, every class
    /// beyond both horizons, and limits.
    pub fn is_shift_of(&self, other: &Envelope, c: &Q) -> bool {
        if self.space != other.space {
            return false;
        }
        let horizon = self.horizon().max(other.horizon());
        let mut moduli = 1u64;
        for b in self.blocks.iter().chain(&other.blocks) {
            if let EnvelopeBlock::Seq { class_tails, .. } = b {
                for (cl, _) in class_tails {
                    moduli = num_integer::lcm(moduli, cl.modulus);
                }
            }
        }
        let starts = self
            .blocks
            .iter()
            .chain(&other.blocks)
            .filter_map(|b| match b {
                EnvelopeBlock::Seq { class_tails, .. } => {
                    class_tails.iter().map(|(cl, _)| cl.first_index() + 1).max()
                }
                EnvelopeBlock::Finite(_) => None,
            })
            .max()
            .unwrap_or(0);
        let points = self.space.points_below(horizon.max(starts) + moduli);
        points.iter().all(|p| other.value(p) + c == self.value(p))
    }

    /// The envelope as a function, when it is continuous.
    pub fn to_func(&self) -> Result<Func> {
        if !self.continuous {
            return Err(Error::Hypothesis("envelope is not continuous".into()));
        }
        let blocks = self
            .blocks
            .iter()
            .map(|b| match b {
                EnvelopeBlock::Finite(v) => BlockValues::Finite(v.clone()),
                EnvelopeBlock::Seq {
                    explicit, limit, ..
                } => BlockValues::Seq {
                    exceptions: explicit.clone(),
                    tail: limit.clone(),
                },
            })
            .collect();
        Func::from_blocks(&self.space, blocks)
    }
}

impl fmt::Display for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (b, v) in self.space.blocks().iter().zip(&self.blocks) {
            match v {
                EnvelopeBlock::Finite(vals) => {
                    let items: Vec<String> = vals.iter().map(ToString::to_string).collect();
                    write!(f, " {}: [{}];", b.id, items.join(", "))?;
                }
                EnvelopeBlock::Seq {
                    explicit,
                    class_tails,
                    limit,
                } => {
                    let ex: Vec<String> =
                        explicit.iter().map(|(i, x)| format!("{i}: {x}")).collect();
                    let tails: Vec<String> = class_tails
                        .iter()
                        .map(|(c, x)| format!("{c}: {x}"))
                        .collect();
                    write!(
                        f,
                        " {}: explicit {{{}}} classes {{{}}} limit {};",
                        b.id,
                        ex.join(", "),
                        tails.join(", "),
                        limit
                    )?;
                }
            }
        }
        f.write_str(" }")
    }
}

/// Envelope flags as report clauses.
pub fn envelope_report(env: &Envelope) -> Report {
    const ANCHOR: &str = "envelope";
    let mut report = Report::new();
    report
        .check(ANCHOR, "lower semicontinuous", env.lsc)
        .add("envelope", env.to_string());
    report.push(
        Clause::new(
            ANCHOR,
            "continuous",
            if env.continuous {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
        )
        .with("continuous", env.continuous.to_string()),
    );
    report.push(Clause::new(ANCHOR, "minimum", Verdict::Pass).with("min", env.min.to_string()));
    report
}

#[derive(Clone, Debug)]
pub struct Normalized {
    /// `{y : T1(y) >= m}` for the norm-one rescaling of the input.
    pub l0: Subset,
    pub embedding: PointEmbedding,
    /// Positive unital kernel `C(K) -> C(L0)`.
    pub kernel: Kernel,
    pub report: Report,
}

/// Rescales a positive kernel to norm one, restricts the codomain to
/// `L0 = {T1_K >= m}` and divides by `T1_K` there. `m` refers to the norm-one
/// rescaling.
pub fn normalize_positive(kernel: &Kernel, m: &Q, window: u64) -> Result<Normalized> {
    const ANCHOR: &str = "normalization";
    if !kernel.is_positive() {
        return Err(Error::NotPositive);
    }
    if !m.is_positive() || m > &Q::one() {
        return Err(Error::ThresholdOutOfRange(m.to_string()));
    }
    let norm = kernel.operator_norm();
    if norm.is_zero() {
        return Err(Error::Hypothesis("zero kernel".into()));
    }
    let t1 = kernel.scale(&norm.recip());
    let h = t1.apply(&Func::one(t1.domain()))?;
    let l0 = h.superlevel(m);
    if l0.is_empty() {
        return Err(assertion(
            "normalization: L0 nonempty",
            format!("constant {m} exceeds sup T1 = {}", h.norm()),
        ));
    }
    let (restricted, embedding) = t1.restrict_codomain(&l0)?;
    let h0 = h.pull_back(restricted.codomain(), &embedding)?;
    let s = restricted.scale_by_function(&h0.reciprocal()?)?;
    let mut report = Report::new();
    report
        .pass(ANCHOR, "L0 = {T1 >= m}")
        .add("L0", l0.to_string());
    report.check(ANCHOR, "S unital", s.is_unital());
    report.check(ANCHOR, "S positive", s.is_positive());
    let ms = embedding_constant(&s, window)?;
    report
        .check(ANCHOR, "embedding constant of S >= m", &ms.value >= m)
        .add("m(S)", ms.value.to_string())
        .add("m", m.to_string());
    Ok(Normalized {
        l0,
        embedding,
        kernel: s,
        report,
    })
}

#[derive(Clone, Debug)]
pub struct PositiveReduction {
    /// `T' = T / e^T`, with unit-variation rows.
    pub scaled: Kernel,
    /// Positive kernel `C(K) -> C(L x 2)`.
    pub kernel: Kernel,
    /// Embedding constant of `kernel` at the working window.
    pub constant: Q,
    pub report: Report,
}

fn split_row(m: &Meas) -> (Meas, Meas) {
    let j = m.jordan();
    (j.plus, j.minus)
}

/// `S` with `ν^S_(y,0) = ν'^+_y` and `ν^S_(y,1) = ν'^-_y` for `T' = T / e^T`.
/// Requires a continuous, strictly positive envelope.
pub fn positive_reduction(kernel: &Kernel, m: &Q, window: u64) -> Result<PositiveReduction> {
    const ANCHOR: &str = "positive-reduction";
    let env = envelope(kernel);
    if !env.continuous || !env.strictly_positive {
        return Err(Error::Hypothesis(format!(
            "envelope must be continuous and positive (continuous: {}, min: {}); use adjoin_and_lift",
            env.continuous, env.min
        )));
    }
    let scaled = kernel.scale_by_function(&env.to_func()?.reciprocal()?)?;
    let mut report = Report::new();
    let env1 = envelope(&scaled);
    report
        .check(
            ANCHOR,
            "envelope of T' is 1",
            env1.is_shift_of(
                &envelope(&crate::gallery::zero(scaled.domain(), scaled.codomain())),
                &Q::one(),
            ) && env1.continuous,
        )
        .add("envelope", env1.to_string());

    let dom = scaled.domain();
    let cod = Arc::new(scaled.codomain().product_with_two());
    let mut rows = BTreeMap::new();
    for (y, m) in scaled.rows() {
        let (plus, minus) = split_row(m);
        rows.insert(layer_point(y, 0), plus);
        rows.insert(layer_point(y, 1), minus);
    }
    let mut templates = Vec::new();
    for t in scaled.templates() {
        for (layer, keep) in [(0u8, true), (1u8, false)] {
            let atoms = t
                .atoms
                .iter()
                .filter(|(_, w)| w.is_positive() == keep)
                .map(|(x, w)| (x.clone(), w.abs()))
                .collect();
            templates.push(RowTemplate::new(&layer_id(&t.block, layer), t.class, atoms));
        }
    }
    let s = Kernel::with_filled_rows(dom, &cod, rows, templates)?;
    report.check(ANCHOR, "S positive", s.is_positive());
    let ms = embedding_constant(&s, window)?;
    let half = m / Q::from_integer(2.into());
    report
        .check(ANCHOR, "embedding constant of S >= m/2", ms.value >= half)
        .add("m(S)", ms.value.to_string())
        .add("m/2", half.to_string());
    Ok(PositiveReduction {
        scaled,
        kernel: s,
        constant: ms.value,
        report,
    })
}

#[derive(Clone, Debug)]
pub struct Lift {
    /// The adjoined isolated point of `K + 1`.
    pub point: Point,
    pub kernel: Kernel,
    pub report: Report,
}

/// `Sf = T(f|K) + f(z) 1_L` on `C(K + 1)`.
pub fn adjoin_and_lift(kernel: &Kernel, m: &Q, window: u64) -> Result<Lift> {
    const ANCHOR: &str = "lift";
    let (space, z) = kernel.domain().adjoin_point();
    let dom = Arc::new(space);
    let one = Q::one();
    let mut rows = BTreeMap::new();
    for (y, m) in kernel.rows() {
        rows.insert(y.clone(), m.transfer(&dom)?.add(&Meas::dirac(&dom, &z)?)?);
    }
    let templates = kernel
        .templates()
        .iter()
        .map(|t| {
            let mut atoms = t.atoms.clone();
            atoms.push((Target::Fixed(z.clone()), one.clone()));
            RowTemplate::new(&t.block, t.class, atoms)
        })
        .collect();
    let s = Kernel::new(&dom, kernel.codomain(), rows, templates)?;
    let mut report = Report::new();
    let (before, after) = (envelope(kernel), envelope(&s));
    report
        .check(
            ANCHOR,
            "envelope of S = envelope of T + 1",
            after.is_shift_of(&before, &one),
        )
        .add("envelope", after.to_string());
    // The m/2 bound uses a point where the envelope of T vanishes.
    if before.min.is_zero() {
        let ms = embedding_constant(&s, window)?;
        let half = m / Q::from_integer(2.into());
        report
            .check(ANCHOR, "embedding constant of S >= m/2", ms.value >= half)
            .add("m(S)", ms.value.to_string())
            .add("m/2", half.to_string());
    } else {
        report.push(
            Clause::new(ANCHOR, "embedding constant of S >= m/2", Verdict::Skipped)
                .with("reason", "envelope of T has no zero")
                .with("min", before.min.to_string()),
        );
    }
    Ok(Lift {
        point: z,
        kernel: s,
        report,
    })
}

/// Everything the pipeline produced, stage by stage.
#[derive(Clone, Debug, Default)]
pub struct PipelineReport {
    pub report: Report,
    /// The positive unital kernel the filtration was built from.
    pub unital: Option<Kernel>,
    pub constant: Option<Q>,
    pub filtration: Option<Filtration>,
    pub top: Option<CiWitness>,
    pub samples: Vec<(Subset, PiBaseElement)>,
}

fn record<T>(report: &mut Report, anchor: &str, stage: &str, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            report.fail(anchor, stage).add("error", e.to_string());
            None
        }
    }
}

/// Lift if the envelope vanishes somewhere, reduce to a positive kernel,
/// normalize, then build the filtration and its witnesses.
pub fn pipeline(kernel: &Kernel, window: u64, search_bound: u64) -> PipelineReport {
    const ANCHOR: &str = "pipeline";
    let mut out = PipelineReport::default();
    let skip = |out: &mut PipelineReport, from: &str| {
        out.report.push(Clause::new(
            ANCHOR,
            format!("remaining stages after {from}"),
            Verdict::Skipped,
        ));
    };
    let norm = kernel.operator_norm();
    out.report
        .pass(ANCHOR, "operator norm")
        .add("||T||", norm.to_string());
    if norm.is_zero() {
        out.report.fail(ANCHOR, "nonzero operator");
        return out;
    }
    let mut current = kernel.scale(&norm.recip());
    let Some(est) = record(
        &mut out.report,
        ANCHOR,
        "embedding constant",
        embedding_constant(&current, window),
    ) else {
        return out;
    };
    out.report
        .check(ANCHOR, "embedding at this window", est.value.is_positive())
        .add("m", est.value.to_string())
        .add("window", window.to_string());
    let mut m = est.value;

    let mut env = envelope(&current);
    out.report.extend(envelope_report(&env));
    if env.min.is_zero() {
        let Some(lift) = record(
            &mut out.report,
            "lift",
            "adjoin and lift",
            adjoin_and_lift(&current, &m, window),
        ) else {
            return out;
        };
        out.report.extend(lift.report);
        current = lift.kernel;
        m = match record(
            &mut out.report,
            ANCHOR,
            "embedding constant",
            embedding_constant(&current, window),
        ) {
            Some(e) => e.value,
            None => return out,
        };
        env = envelope(&current);
        out.report.extend(envelope_report(&env));
    }
    out.report.check(
        ANCHOR,
        "envelope continuous (reduction hypothesis)",
        env.continuous,
    );
    if !env.continuous {
        skip(&mut out, "discontinuous envelope");
        return out;
    }
    if !current.is_positive() {
        let Some(red) = record(
            &mut out.report,
            "positive-reduction",
            "reduce",
            positive_reduction(&current, &m, window),
        ) else {
            return out;
        };
        out.report.extend(red.report);
        current = red.kernel;
    }
    let norm = current.operator_norm();
    current = current.scale(&norm.recip());
    m = match record(
        &mut out.report,
        ANCHOR,
        "embedding constant",
        embedding_constant(&current, window),
    ) {
        Some(e) => e.value,
        None => return out,
    };
    let Some(normalized) = record(
        &mut out.report,
        "normalization",
        "normalize",
        normalize_positive(&current, &m, window),
    ) else {
        return out;
    };
    out.report.extend(normalized.report);
    let unital = normalized.kernel;
    let Some(est) = record(
        &mut out.report,
        ANCHOR,
        "embedding constant of the unital kernel",
        embedding_constant(&unital, window),
    ) else {
        return out;
    };
    out.report
        .pass(ANCHOR, "working constant")
        .add("m", est.value.to_string())
        .add("witness", est.witness.to_string());
    out.constant = Some(est.value.clone());
    let Some(f) = record(
        &mut out.report,
        "filtration",
        "filtration",
        filtration(&unital, &est.value),
    ) else {
        out.unital = Some(unital);
        return out;
    };
    out.report.extend(f.report.clone());
    if let Some(top) = record(
        &mut out.report,
        "top-level witness",
        "top-level witness",
        top_level_witness(&unital, &f),
    ) {
        let clause = out
            .report
            .pass("top-level witness", "continuous surjection onto K_p");
        clause
            .add("source", top.source.to_string())
            .add("target", top.target.to_string());
        out.top = Some(top);
    }
    let dom = unital.domain().clone();
    let mut samples = vec![Subset::whole(&dom)];
    for b in dom.blocks() {
        if let Ok(s) = Subset::block(&dom, &b.id) {
            if !samples.contains(&s) {
                samples.push(s);
            }
        }
    }
    for w in samples {
        if let Some(el) = record(
            &mut out.report,
            "pi-base",
            "pi-base element",
            pi_base(&unital, &f, &w, search_bound),
        ) {
            out.report
                .pass("pi-base", "clopen U ⊆ W with closure a continuous image")
                .add("W", w.to_string())
                .add("level", el.level.to_string())
                .add("U", el.set.to_string());
            out.samples.push((w, el));
        }
    }
    out.filtration = Some(f);
    out.unital = Some(unital);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;
    use crate::rational::{int, q};

    #[test]
    fn envelopes() {
        let e = envelope(&gallery::ex52());
        assert!(e.continuous && e.lsc && e.strictly_positive);
        assert_eq!(e.min, int(1));
        let c = envelope(&gallery::cancellation());
        assert!(c.lsc && !c.continuous);
        assert_eq!(c.min, int(0));
        assert_eq!(c.value(&Point::at("B", 5)), int(2));
        assert_eq!(c.value(&Point::inf("B")), int(0));
    }

    #[test]
    fn lift_adds_one() {
        let t = gallery::cancellation();
        let lift = adjoin_and_lift(&t, &q(1, 2), 1).unwrap();
        let e = envelope(&lift.kernel);
        assert_eq!(e.value(&Point::at("B", 0)), int(3));
        assert_eq!(e.value(&Point::inf("B")), int(1));
        assert!(lift.report.clauses[0].verdict == Verdict::Pass);
    }

    #[test]
    fn ex52_normalization_is_identity() {
        let t = gallery::ex52();
        let n = normalize_positive(&t, &q(1, 5), 2).unwrap();
        assert!(n.report.is_ok(), "{}", n.report);
        assert_eq!(n.l0, Subset::whole(t.codomain()));
        let half = t.scale(&q(1, 2));
        let n2 = normalize_positive(&half, &q(1, 5), 2).unwrap();
        assert!(n2.report.is_ok());
    }

    #[test]
    fn two_point_signed_reduction() {
        let t = gallery::two_point_signed();
        let r = positive_reduction(&t, &q(1, 2), 0).unwrap();
        assert!(r.report.is_ok(), "{}", r.report);
        let s = &r.kernel;
        let a = Point::at("a", 0);
        let b = Point::at("b", 0);
        let dom = s.domain();
        assert_eq!(
            s.row(&Point::at("y1@0", 0)).unwrap(),
            Meas::from_atoms(dom, [(a.clone(), q(1, 2))]).unwrap()
        );
        assert_eq!(
            s.row(&Point::at("y1@1", 0)).unwrap(),
            Meas::from_atoms(dom, [(b.clone(), q(1, 2))]).unwrap()
        );
        assert_eq!(
            s.row(&Point::at("y2@0", 0)).unwrap(),
            Meas::from_atoms(dom, [(a, q(1, 2)), (b, q(1, 2))]).unwrap()
        );
        assert!(s.row(&Point::at("y2@1", 0)).unwrap().is_zero());
    }

    #[test]
    fn pipelines() {
        let ex = pipeline(&gallery::ex52(), 2, 64);
        assert!(ex.report.is_ok(), "{}", ex.report);
        assert_eq!(ex.filtration.as_ref().unwrap().p, 3);
        let two = pipeline(&gallery::two_point_signed(), 1, 64);
        assert!(two.report.is_ok(), "{}", two.report);
        assert_eq!(two.filtration.as_ref().unwrap().p, 1);
        let cancel = pipeline(&gallery::cancellation(), 1, 64);
        assert!(!cancel.report.is_ok());
        assert!(cancel
            .report
            .clauses
            .iter()
            .any(|c| c.verdict == Verdict::Skipped));
    }
}
