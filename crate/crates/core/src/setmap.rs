//! Finite-valued set maps `L -> [K]^{<=p}` in the same explicit-plus-template
//! presentation as kernels.
//!
//! Upper semicontinuity is decided symbolically. Near a limit point `b:inf`
//! of `L` the only points are the tails of the classes of `b`, whose values
//! are instantiated templates. A template value converges (in the Vietoris
//! sense) to the set of its target limits, so `φ` is usc at `b:inf` iff every
//! such limit lies in `φ(b:inf)`. Every other point of `L` is isolated.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_integer::Integer;

use crate::error::{Error, Result};
use crate::report::Report;
use crate::space::{BlockKind, Index, Point, Space};
use crate::subset::{IndexSet, Subset};
use crate::template::{partition_defect, raised_start, ResidueClass, Target};

const ANCHOR: &str = "set map";

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SetTemplate {
    pub block: String,
    pub class: ResidueClass,
    pub targets: Vec<Target>,
}

impl SetTemplate {
    pub fn new(block: &str, class: ResidueClass, targets: Vec<Target>) -> Self {
        SetTemplate {
            block: block.to_string(),
            class,
            targets,
        }
    }

    pub fn effective_start(&self) -> u64 {
        raised_start(&self.class, self.targets.iter())
    }

    pub fn instantiate(&self, k: u64) -> Option<BTreeSet<Point>> {
        self.targets.iter().map(|t| t.at(k)).collect()
    }

    pub fn limits(&self) -> BTreeSet<Point> {
        self.targets.iter().map(Target::limit).collect()
    }
}

impl fmt::Display for SetTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let targets: Vec<String> = self.targets.iter().map(ToString::to_string).collect();
        write!(
            f,
            "template {} {} = {{ {} }}",
            self.block,
            self.class,
            targets.join(", ")
        )
    }
}

pub(crate) fn render_points(points: &BTreeSet<Point>) -> String {
    if points.is_empty() {
        return "{ }".to_string();
    }
    let items: Vec<String> = points.iter().map(ToString::to_string).collect();
    format!("{{ {} }}", items.join(", "))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetMap {
    domain: Arc<Space>,
    codomain: Arc<Space>,
    bound: u64,
    values: BTreeMap<Point, BTreeSet<Point>>,
    templates: Vec<SetTemplate>,
}

/// Union of all values of a set map, with its closedness and ontoness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageUnion {
    pub set: Subset,
    pub closed: bool,
    pub onto: bool,
    /// Limits of indexed families; the union is closed iff it contains them.
    pub family_limits: BTreeSet<Point>,
}

/// A convergent subsequence `x_{α q + β}` of a parametric sequence together
/// with rows `y_q` satisfying `x_{α q + β} ∈ φ(y_q)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subsequence {
    /// The subsequence of the input, as a target in `q`.
    pub xs: Target,
    /// The matching points of `L`, as a target in `q`.
    pub ys: Target,
    pub limit: Point,
    pub y_limit: Point,
}

impl SetMap {
    pub fn new(
        domain: &Arc<Space>,
        codomain: &Arc<Space>,
        bound: u64,
        values: BTreeMap<Point, BTreeSet<Point>>,
        templates: Vec<SetTemplate>,
    ) -> Result<Self> {
        let m = SetMap::unvalidated(domain, codomain, bound, values, templates);
        let report = validate_setmap(&m);
        if report.is_ok() {
            Ok(m)
        } else {
            Err(Error::InvalidSetMap(report))
        }
    }

    pub fn unvalidated(
        domain: &Arc<Space>,
        codomain: &Arc<Space>,
        bound: u64,
        values: BTreeMap<Point, BTreeSet<Point>>,
        templates: Vec<SetTemplate>,
    ) -> Self {
        SetMap {
            domain: domain.clone(),
            codomain: codomain.clone(),
            bound,
            values,
            templates,
        }
    }

    /// Like [`SetMap::new`], instantiating values skipped by raised starts.
    pub fn with_filled_values(
        domain: &Arc<Space>,
        codomain: &Arc<Space>,
        bound: u64,
        mut values: BTreeMap<Point, BTreeSet<Point>>,
        templates: Vec<SetTemplate>,
    ) -> Result<Self> {
        for t in &templates {
            for k in t.class.start..t.effective_start() {
                let p = Point::at(&t.block, t.class.index(k));
                if !values.contains_key(&p) {
                    let v = t.instantiate(k).ok_or_else(|| {
                        Error::InvalidSetMap({
                            let mut r = Report::new();
                            r.fail(ANCHOR, "negative target index")
                                .add("point", p.to_string());
                            r
                        })
                    })?;
                    values.insert(p, v);
                }
            }
        }
        SetMap::new(domain, codomain, bound, values, templates)
    }

    pub fn domain(&self) -> &Arc<Space> {
        &self.domain
    }

    pub fn codomain(&self) -> &Arc<Space> {
        &self.codomain
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn values(&self) -> &BTreeMap<Point, BTreeSet<Point>> {
        &self.values
    }

    pub fn templates(&self) -> &[SetTemplate] {
        &self.templates
    }

    pub fn templates_of<'a>(
        &'a self,
        block: &'a str,
    ) -> impl Iterator<Item = &'a SetTemplate> + 'a {
        self.templates.iter().filter(move |t| t.block == block)
    }

    /// Parameters of a template's class that are not overridden by explicit
    /// values, from its effective start on.
    fn live_parameters(&self, t: &SetTemplate) -> IndexSet {
        let overridden = self
            .values
            .keys()
            .filter(|p| p.block == t.block)
            .filter_map(|p| match p.index {
                Index::At(n) => t.class.parameter(n),
                Index::Inf => None,
            });
        IndexSet::from_threshold(t.effective_start()).difference(&IndexSet::finite(overridden))
    }

    pub fn value(&self, y: &Point) -> Result<BTreeSet<Point>> {
        self.domain.check_point(y)?;
        if let Some(v) = self.values.get(y) {
            return Ok(v.clone());
        }
        if let Index::At(n) = y.index {
            for t in self.templates_of(&y.block) {
                if let Some(k) = t.class.parameter(n) {
                    if let Some(v) = t.instantiate(k) {
                        return Ok(v);
                    }
                }
            }
        }
        Err(Error::UnknownPoint(format!("{y} has no value")))
    }

    /// Every value has at most one point.
    pub fn is_single_valued(&self) -> bool {
        self.values.values().all(|v| v.len() <= 1)
            && self.templates.iter().all(|t| t.targets.len() <= 1)
    }

    /// `{y : φ(y) nonempty}`.
    pub fn support(&self) -> Subset {
        self.preimage_unchecked(&Subset::whole(&self.codomain))
    }

    pub fn image_union(&self) -> ImageUnion {
        let mut set = Subset::empty();
        for v in self.values.values() {
            for p in v {
                set.insert(p);
            }
        }
        let mut family_limits = BTreeSet::new();
        for t in &self.templates {
            let live = self.live_parameters(t);
            for target in &t.targets {
                match target {
                    Target::Fixed(p) => {
                        if !live.is_empty() {
                            set.insert(p);
                        }
                    }
                    Target::Indexed { block, a, b } => {
                        family_limits.insert(target.limit());
                        let s = t.effective_start();
                        let shifted = live.affine_preimage(1, s as i64);
                        let first = (*a as i128 * s as i128 + *b as i128) as u64;
                        let hits = shifted.affine_image(*a, first);
                        let mut trace = set.trace(block);
                        trace.indices = trace.indices.union(&hits);
                        set.set_trace(block, trace);
                    }
                }
            }
        }
        let closed = set.is_closed();
        let onto = set == Subset::whole(&self.codomain);
        ImageUnion {
            set,
            closed,
            onto,
            family_limits,
        }
    }

    fn preimage_unchecked(&self, f: &Subset) -> Subset {
        let mut out = Subset::empty();
        for (y, v) in &self.values {
            if v.iter().any(|p| f.contains(p)) {
                out.insert(y);
            }
        }
        for t in &self.templates {
            let mut ks = IndexSet::empty();
            for target in &t.targets {
                let hit = match target {
                    Target::Fixed(p) if f.contains(p) => IndexSet::all(),
                    Target::Fixed(_) => IndexSet::empty(),
                    Target::Indexed { block, a, b } => {
                        f.trace(block).indices.affine_preimage(*a, *b)
                    }
                };
                ks = ks.union(&hit);
            }
            let ks = ks.intersection(&self.live_parameters(t));
            let rows = ks.affine_image(t.class.modulus, t.class.residue);
            let mut trace = out.trace(&t.block);
            trace.indices = trace.indices.union(&rows);
            out.set_trace(&t.block, trace);
        }
        out
    }

    /// `φ⁻¹[F] = {y : φ(y) ∩ F ≠ ∅}` for closed `F`.
    pub fn preimage(&self, f: &Subset) -> Result<Subset> {
        f.validate(&self.codomain)?;
        if !f.is_closed() {
            return Err(Error::NotClosed(f.to_string()));
        }
        Ok(self.preimage_unchecked(f))
    }

    /// `ψ(y) = φ(y) ∩ F` for closed `F`, in template form.
    pub fn restrict(&self, f: &Subset) -> Result<SetMap> {
        f.validate(&self.codomain)?;
        if !f.is_closed() {
            return Err(Error::NotClosed(f.to_string()));
        }
        let keep = |v: &BTreeSet<Point>| -> BTreeSet<Point> {
            v.iter().filter(|p| f.contains(p)).cloned().collect()
        };
        let mut values: BTreeMap<Point, BTreeSet<Point>> = self
            .values
            .iter()
            .map(|(y, v)| (y.clone(), keep(v)))
            .collect();
        let mut templates = Vec::new();
        for t in &self.templates {
            // membership of each target, as a set of parameters
            let memberships: Vec<IndexSet> = t
                .targets
                .iter()
                .map(|target| match target {
                    Target::Fixed(p) if f.contains(p) => IndexSet::all(),
                    Target::Fixed(_) => IndexSet::empty(),
                    Target::Indexed { block, a, b } => {
                        f.trace(block).indices.affine_preimage(*a, *b)
                    }
                })
                .collect();
            let period = memberships.iter().fold(1u64, |acc, s| acc.lcm(&s.period()));
            let k1 = memberships
                .iter()
                .map(IndexSet::start)
                .fold(t.effective_start(), u64::max);
            // values below the split point are materialized
            for k in t.class.start..k1 {
                let y = Point::at(&t.block, t.class.index(k));
                if !values.contains_key(&y) {
                    values.insert(y.clone(), keep(&self.value(&y)?));
                }
            }
            let d = t.class.modulus;
            let modulus = d * period;
            for j in 0..period {
                let k = k1 + j;
                let rho = d * k + t.class.residue;
                let (start, residue) = (rho / modulus, rho % modulus);
                let targets = t
                    .targets
                    .iter()
                    .zip(&memberships)
                    .filter(|(_, s)| s.contains(k))
                    .map(|(target, _)| match target {
                        Target::Fixed(p) => Target::Fixed(p.clone()),
                        Target::Indexed { block, a, b } => Target::Indexed {
                            block: block.clone(),
                            a: a * period,
                            b: (*a * k) as i64 + b - (a * period * start) as i64,
                        },
                    })
                    .collect();
                templates.push(SetTemplate::new(
                    &t.block,
                    ResidueClass::new(modulus, residue, start),
                    targets,
                ));
            }
        }
        SetMap::with_filled_values(&self.domain, &self.codomain, self.bound, values, templates)
    }

    /// Constructive subsequence extraction for an onto usc map: finds rows
    /// `y_q` covering a subsequence of `xs` and the limits of both.
    pub fn extract_convergent_subsequence(&self, xs: &Target) -> Result<Subsequence> {
        xs.check(&self.codomain).map_err(Error::InvalidPath)?;
        match xs {
            Target::Fixed(p) => {
                let y = self
                    .values
                    .iter()
                    .find(|(_, v)| v.contains(p))
                    .map(|(y, _)| y.clone())
                    .or_else(|| {
                        self.templates.iter().find_map(|t| {
                            let k = self.live_parameters(t).first()?;
                            t.instantiate(k)?
                                .contains(p)
                                .then(|| Point::at(&t.block, t.class.index(k)))
                        })
                    })
                    .ok_or_else(|| Error::NotCovered(p.to_string()))?;
                Ok(Subsequence {
                    xs: xs.clone(),
                    ys: Target::Fixed(y.clone()),
                    limit: p.clone(),
                    y_limit: y,
                })
            }
            Target::Indexed { block, a, b } => {
                let s = xs.nonnegative_from();
                let first = (*a as i128 * s as i128 + *b as i128) as u64;
                let wanted = IndexSet::from_threshold(0).affine_image(*a, first);
                for t in &self.templates {
                    let live = self.live_parameters(t);
                    for target in &t.targets {
                        let Target::Indexed {
                            block: tb,
                            a: ta,
                            b: tbb,
                        } = target
                        else {
                            continue;
                        };
                        if tb != block {
                            continue;
                        }
                        let ts = t.effective_start();
                        let tfirst = (*ta as i128 * ts as i128 + *tbb as i128) as u64;
                        let covered = live.affine_preimage(1, ts as i64).affine_image(*ta, tfirst);
                        let common = covered.intersection(&wanted);
                        if common.is_finite() {
                            continue;
                        }
                        let (period, n0) = common.progressions()[0];
                        // n = n0 + period*q hits x at k and the row at k'
                        let xk = Target::indexed(
                            block,
                            period / a,
                            ((n0 as i128 - *b as i128) / *a as i128) as i64,
                        );
                        let kp0 = (n0 as i128 - *tbb as i128) / *ta as i128;
                        let d = t.class.modulus as i128;
                        let ys = Target::indexed(
                            &t.block,
                            (d * (period / ta) as i128) as u64,
                            (d * kp0 + t.class.residue as i128) as i64,
                        );
                        let limit = Point::inf(block);
                        let y_limit = Point::inf(&t.block);
                        let at_limit = self.value(&y_limit)?;
                        if !at_limit.contains(&limit) {
                            return Err(Error::Hypothesis(format!(
                                "limit {limit} not in φ({y_limit}) = {}",
                                render_points(&at_limit)
                            )));
                        }
                        return Ok(Subsequence {
                            xs: xk,
                            ys,
                            limit,
                            y_limit,
                        });
                    }
                }
                Err(Error::NotCovered(xs.to_string()))
            }
        }
    }
}

impl fmt::Display for SetMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "setmap : {} -> {} bound {} {{",
            self.domain, self.codomain, self.bound
        )?;
        for (y, v) in &self.values {
            writeln!(f, "  value {y} = {};", render_points(v))?;
        }
        for t in &self.templates {
            writeln!(f, "  {t};")?;
        }
        f.write_str("}")
    }
}

/// Coverage, normal form and the cardinality bound.
pub fn validate_setmap(map: &SetMap) -> Report {
    let mut report = Report::new();
    let (dom, cod) = (&map.domain, &map.codomain);
    let mut ok = true;
    if map.bound == 0 {
        ok = false;
        report.fail(ANCHOR, "bound must be positive");
    }
    for (y, v) in &map.values {
        if !dom.contains(y) {
            ok = false;
            report
                .fail(ANCHOR, "value point outside domain")
                .add("point", y.to_string());
        }
        if let Some(p) = v.iter().find(|p| !cod.contains(p)) {
            ok = false;
            report
                .fail(ANCHOR, "value outside codomain")
                .add("point", p.to_string());
        }
        if v.len() as u64 > map.bound {
            ok = false;
            report
                .fail(ANCHOR, "value exceeds bound")
                .add("point", y.to_string())
                .add("value", render_points(v));
        }
    }
    let mut seen = BTreeSet::new();
    for t in &map.templates {
        let label = t.to_string();
        if !dom.block(&t.block).is_some_and(|b| b.is_seq()) {
            ok = false;
            report
                .fail(ANCHOR, "template on unknown or finite block")
                .add("template", &label);
            continue;
        }
        if !t.class.is_well_formed() || !seen.insert((t.block.clone(), t.class)) {
            ok = false;
            report
                .fail(ANCHOR, "malformed or duplicate residue class")
                .add("template", &label);
            continue;
        }
        let mut targets = BTreeSet::new();
        for target in &t.targets {
            if let Err(msg) = target.check(cod) {
                ok = false;
                report
                    .fail(ANCHOR, "invalid target")
                    .add("template", &label)
                    .add("reason", msg);
            }
            if !targets.insert(target) {
                ok = false;
                report
                    .fail(ANCHOR, "duplicate target")
                    .add("template", &label);
            }
        }
        if t.targets.len() as u64 > map.bound {
            ok = false;
            report
                .fail(ANCHOR, "value exceeds bound")
                .add("template", &label);
        }
    }
    if !ok {
        return report;
    }
    for b in dom.blocks() {
        match b.kind {
            BlockKind::Finite(n) => {
                for i in 0..n {
                    let p = Point::at(&b.id, i);
                    if !map.values.contains_key(&p) {
                        ok = false;
                        report
                            .fail(ANCHOR, "missing explicit value")
                            .add("point", p.to_string());
                    }
                }
            }
            BlockKind::Seq => {
                let classes: Vec<ResidueClass> = map.templates_of(&b.id).map(|t| t.class).collect();
                if let Some(defect) = partition_defect(&classes) {
                    ok = false;
                    report
                        .fail(ANCHOR, "residue classes do not partition")
                        .add("block", &b.id)
                        .add("defect", defect);
                }
                if !map.values.contains_key(&Point::inf(&b.id)) {
                    ok = false;
                    report
                        .fail(ANCHOR, "missing limit value")
                        .add("point", Point::inf(&b.id).to_string());
                }
                for t in map.templates_of(&b.id) {
                    for k in t.class.start..t.effective_start() {
                        let p = Point::at(&b.id, t.class.index(k));
                        if !map.values.contains_key(&p) {
                            ok = false;
                            report
                                .fail(ANCHOR, "missing explicit value")
                                .add("point", p.to_string());
                        }
                    }
                    for k in 0..t.class.start {
                        let p = Point::at(&b.id, t.class.index(k));
                        if !map.values.contains_key(&p) {
                            ok = false;
                            report
                                .fail(ANCHOR, "missing explicit value")
                                .add("point", p.to_string());
                        }
                    }
                }
            }
        }
    }
    if ok {
        report.pass(ANCHOR, "coverage and bound");
    }
    report
}

/// Symbolic upper semicontinuity: every fixed target and every limit of an
/// indexed target of a class lies in the value at the block's limit point.
pub fn check_usc(map: &SetMap) -> Report {
    const USC: &str = "usc";
    let mut report = Report::new();
    let mut ok = true;
    for b in map.domain.seq_blocks() {
        let limit_value = map
            .values
            .get(&Point::inf(&b.id))
            .cloned()
            .unwrap_or_default();
        for t in map.templates_of(&b.id) {
            let missing: BTreeSet<Point> = t
                .limits()
                .into_iter()
                .filter(|p| !limit_value.contains(p))
                .collect();
            if !missing.is_empty() {
                ok = false;
                report
                    .fail(USC, "class limit outside the value at the block limit")
                    .add("block", &b.id)
                    .add("class", t.class.to_string())
                    .add("missing", render_points(&missing))
                    .add("template", t.to_string());
            }
        }
    }
    if ok {
        report.pass(USC, "upper semicontinuity");
    }
    report
}

/// Single-valued on its support, usc, and onto `target`: a continuous
/// surjection from the support onto `target`.
pub fn check_continuous_onto(map: &SetMap, target: &Subset) -> Report {
    const CONT: &str = "continuous image";
    let mut report = Report::new();
    report.check(CONT, "single-valued", map.is_single_valued());
    report.extend(check_usc(map));
    let image = map.image_union();
    report
        .check(CONT, "onto target", &image.set == target)
        .add("image", image.set.to_string())
        .add("target", target.to_string());
    let support = map.support();
    report
        .check(CONT, "source closed", support.is_closed())
        .add("source", support.to_string());
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Block;
    use crate::subset::Trace;

    fn pts(items: &[Point]) -> BTreeSet<Point> {
        items.iter().cloned().collect()
    }

    fn identity_map() -> SetMap {
        let a = Space::shared(vec![Block::seq("A")]).unwrap();
        let values = [(Point::inf("A"), pts(&[Point::inf("A")]))].into();
        let templates = vec![SetTemplate::new(
            "A",
            ResidueClass::new(1, 0, 0),
            vec![Target::indexed("A", 1, 0)],
        )];
        SetMap::new(&a, &a, 1, values, templates).unwrap()
    }

    #[test]
    fn identity_is_usc_and_onto() {
        let m = identity_map();
        assert!(check_usc(&m).is_ok());
        let img = m.image_union();
        assert!(img.closed && img.onto);
        let lim = Subset::point(&Point::inf("A"));
        assert_eq!(m.preimage(&lim).unwrap(), lim);
        let s = m
            .extract_convergent_subsequence(&Target::indexed("A", 1, 0))
            .unwrap();
        assert_eq!(s.xs, Target::indexed("A", 1, 0));
        assert_eq!(s.limit, Point::inf("A"));
        let c = m
            .extract_convergent_subsequence(&Target::Fixed(Point::at("A", 0)))
            .unwrap();
        assert_eq!(c.limit, Point::at("A", 0));
    }

    #[test]
    fn fixed_target_outside_limit_value_is_not_usc() {
        let a = Space::shared(vec![Block::seq("A")]).unwrap();
        let b = Space::shared(vec![Block::seq("B")]).unwrap();
        let values = [(Point::inf("B"), pts(&[Point::at("A", 1)]))].into();
        let templates = vec![SetTemplate::new(
            "B",
            ResidueClass::new(1, 0, 0),
            vec![Target::Fixed(Point::at("A", 0))],
        )];
        let m = SetMap::new(&b, &a, 1, values, templates).unwrap();
        let r = check_usc(&m);
        assert!(!r.is_ok());
        assert_eq!(r.clauses[0].values[2].1, "{ A:0 }");
    }

    #[test]
    fn restriction_splits_classes() {
        let m = identity_map();
        let a = m.codomain().clone();
        let mut evens = Subset::empty();
        evens.set_trace(
            "A",
            Trace {
                indices: IndexSet::progression(2, 0),
                inf: true,
            },
        );
        let r = m.restrict(&evens).unwrap();
        assert!(check_usc(&r).is_ok());
        for n in 0..10 {
            let y = Point::at("A", n);
            let expect: BTreeSet<Point> = m
                .value(&y)
                .unwrap()
                .into_iter()
                .filter(|p| evens.contains(p))
                .collect();
            assert_eq!(r.value(&y).unwrap(), expect);
        }
        assert_eq!(r.image_union().set, evens);
        assert_eq!(
            m.restrict(&Subset::whole(&a)).unwrap().image_union(),
            m.image_union()
        );
        let empty = m.restrict(&Subset::empty()).unwrap();
        assert!(empty.image_union().set.is_empty());
    }
}
