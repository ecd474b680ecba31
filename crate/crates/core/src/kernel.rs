//! Operators `C(K) -> C(L)` presented as weak*-continuous measure-valued
//! kernels `y -> T*δ_y`.
//!
//! Every point of `L` without a template (finite blocks, limit points, indices
//! below a template's start) carries an explicit row. A template describes
//! the rows of one residue class of a sequence block. Explicit rows override
//! templates at finitely many indices.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::function::{BlockValues, Func};
use crate::measure::{instantiate_atoms, limit_of_atoms, Meas};
use crate::rational::Q;
use crate::report::Report;
use crate::space::{BlockKind, BlockPlacement, Index, Point, PointEmbedding, Space};
use crate::subset::{closed_subspace, Subset};
use crate::template::{partition_defect, raised_start, ResidueClass, Target};

const ANCHOR: &str = "kernel";

/// Rows at indices `class.index(k)`, `k >= class.start`, of block `block`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RowTemplate {
    pub block: String,
    pub class: ResidueClass,
    pub atoms: Vec<(Target, Q)>,
}

impl RowTemplate {
    pub fn new(block: &str, class: ResidueClass, atoms: Vec<(Target, Q)>) -> Self {
        RowTemplate {
            block: block.to_string(),
            class,
            atoms,
        }
    }

    /// Start raised past sporadic collisions and negative indices.
    pub fn effective_start(&self) -> u64 {
        raised_start(&self.class, self.atoms.iter().map(|(t, _)| t))
    }

    /// Variation of every instantiated row beyond the effective start.
    pub fn variation(&self) -> Q {
        self.atoms.iter().map(|(_, w)| w.abs()).sum()
    }

    pub fn mass(&self) -> Q {
        self.atoms.iter().map(|(_, w)| w).sum()
    }

    pub fn instantiate(&self, domain: &Arc<Space>, k: u64) -> Result<Meas> {
        instantiate_atoms(domain, self.atoms.iter().map(|(t, w)| (t, w)), k)
    }

    pub fn limit(&self, domain: &Arc<Space>) -> Result<Meas> {
        limit_of_atoms(domain, self.atoms.iter().map(|(t, w)| (t, w)))
    }

    /// Least `k` from which every indexed atom lands beyond `g`'s exceptions.
    fn stable_for(&self, g: &Func) -> u64 {
        let mut k = self.effective_start();
        for (t, _) in &self.atoms {
            if let Target::Indexed { block, a, b } = t {
                if let Some(e) = g.last_exception(block) {
                    let need = e as i128 + 1 - *b as i128;
                    if need > 0 {
                        k = k.max((need as u64).div_ceil(*a));
                    }
                }
            }
        }
        k
    }

    fn scaled(&self, c: &Q) -> RowTemplate {
        let atoms = if c.is_zero() {
            Vec::new()
        } else {
            self.atoms.iter().map(|(t, w)| (t.clone(), c * w)).collect()
        };
        RowTemplate {
            atoms,
            ..self.clone()
        }
    }
}

impl fmt::Display for RowTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let atoms: Vec<String> = self
            .atoms
            .iter()
            .map(|(t, w)| format!("{t}: {w}"))
            .collect();
        write!(
            f,
            "template {} {} = {{ {} }}",
            self.block,
            self.class,
            atoms.join(", ")
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Kernel {
    domain: Arc<Space>,
    codomain: Arc<Space>,
    rows: BTreeMap<Point, Meas>,
    templates: Vec<RowTemplate>,
}

impl Kernel {
    /// Builds and validates a kernel.
    pub fn new(
        domain: &Arc<Space>,
        codomain: &Arc<Space>,
        rows: BTreeMap<Point, Meas>,
        templates: Vec<RowTemplate>,
    ) -> Result<Self> {
        let k = Kernel::unvalidated(domain, codomain, rows, templates);
        k.validated()
    }

    /// Builds a kernel without checking it; see [`validate_kernel`].
    pub fn unvalidated(
        domain: &Arc<Space>,
        codomain: &Arc<Space>,
        rows: BTreeMap<Point, Meas>,
        templates: Vec<RowTemplate>,
    ) -> Self {
        Kernel {
            domain: domain.clone(),
            codomain: codomain.clone(),
            rows,
            templates,
        }
    }

    /// Like [`Kernel::new`], but rows skipped by raised template starts are
    /// instantiated from the templates instead of being demanded.
    pub fn with_filled_rows(
        domain: &Arc<Space>,
        codomain: &Arc<Space>,
        mut rows: BTreeMap<Point, Meas>,
        templates: Vec<RowTemplate>,
    ) -> Result<Self> {
        for t in &templates {
            for k in t.class.start..t.effective_start() {
                let p = Point::at(&t.block, t.class.index(k));
                if !rows.contains_key(&p) {
                    rows.insert(p, t.instantiate(domain, k)?);
                }
            }
        }
        Kernel::new(domain, codomain, rows, templates)
    }

    pub fn validated(self) -> Result<Self> {
        let report = validate_kernel(&self);
        if report.is_ok() {
            Ok(self)
        } else {
            Err(Error::InvalidKernel(report))
        }
    }

    pub fn domain(&self) -> &Arc<Space> {
        &self.domain
    }

    pub fn codomain(&self) -> &Arc<Space> {
        &self.codomain
    }

    pub fn rows(&self) -> &BTreeMap<Point, Meas> {
        &self.rows
    }

    pub fn templates(&self) -> &[RowTemplate] {
        &self.templates
    }

    pub fn templates_of<'a>(
        &'a self,
        block: &'a str,
    ) -> impl Iterator<Item = &'a RowTemplate> + 'a {
        self.templates.iter().filter(move |t| t.block == block)
    }

    /// One past the largest index of `block` with an explicit or skipped row.
    pub fn horizon(&self, block: &str) -> u64 {
        let explicit = self
            .rows
            .keys()
            .filter(|p| p.block == block)
            .filter_map(|p| match p.index {
                Index::At(i) => Some(i + 1),
                Index::Inf => None,
            })
            .max()
            .unwrap_or(0);
        self.templates_of(block)
            .map(|t| t.class.index(t.effective_start()))
            .fold(explicit, u64::max)
    }

    /// The measure `T*δ_y`.
    pub fn row(&self, y: &Point) -> Result<Meas> {
        self.codomain.check_point(y)?;
        if let Some(m) = self.rows.get(y) {
            return Ok(m.clone());
        }
        if let Index::At(n) = y.index {
            for t in self.templates_of(&y.block) {
                if let Some(k) = t.class.parameter(n) {
                    return t.instantiate(&self.domain, k);
                }
            }
        }
        let mut report = Report::new();
        report
            .fail(ANCHOR, "missing explicit row")
            .add("point", y.to_string());
        Err(Error::InvalidKernel(report))
    }

    /// `Tg`, with `(Tg)(y) = ν_y(g)`.
    pub fn apply(&self, g: &Func) -> Result<Func> {
        if **g.space() != *self.domain {
            return Err(Error::SpaceMismatch(
                "function is not on the kernel's domain".into(),
            ));
        }
        let mut blocks = Vec::new();
        for b in self.codomain.blocks() {
            blocks.push(match b.kind {
                BlockKind::Finite(n) => BlockValues::Finite(
                    (0..n)
                        .map(|i| Ok(self.row(&Point::at(&b.id, i))?.eval_unchecked(g)))
                        .collect::<Result<_>>()?,
                ),
                BlockKind::Seq => {
                    let tail = self.row(&Point::inf(&b.id))?.eval_unchecked(g);
                    let horizon = self
                        .templates_of(&b.id)
                        .map(|t| t.class.index(t.stable_for(g)))
                        .fold(self.horizon(&b.id), u64::max);
                    let mut exceptions = BTreeMap::new();
                    for n in 0..horizon {
                        exceptions.insert(n, self.row(&Point::at(&b.id, n))?.eval_unchecked(g));
                    }
                    BlockValues::Seq { exceptions, tail }
                }
            });
        }
        Func::from_blocks(&self.codomain, blocks)
    }

    /// `T*μ = Σ μ(y) ν_y`.
    pub fn adjoint(&self, mu: &Meas) -> Result<Meas> {
        if **mu.space() != *self.codomain {
            return Err(Error::SpaceMismatch(
                "measure is not on the kernel's codomain".into(),
            ));
        }
        let mut atoms = Vec::new();
        for (y, w) in mu.atoms() {
            for (p, v) in self.row(y)?.atoms() {
                atoms.push((p.clone(), w * v));
            }
        }
        Meas::from_atoms(&self.domain, atoms)
    }

    /// Atom-wise positivity.
    pub fn is_positive(&self) -> bool {
        self.rows.values().all(Meas::is_nonnegative)
            && self
                .templates
                .iter()
                .all(|t| t.atoms.iter().all(|(_, w)| w.is_positive()))
    }

    /// Every row has total mass one.
    pub fn is_unital(&self) -> bool {
        self.rows.values().all(|m| m.mass().is_one())
            && self.templates.iter().all(|t| t.mass().is_one())
    }

    /// `sup_y ||ν_y||`; template variation is constant along its class.
    pub fn operator_norm(&self) -> Q {
        self.rows
            .values()
            .map(Meas::norm)
            .chain(self.templates.iter().map(RowTemplate::variation))
            .max()
            .unwrap_or_else(Q::zero)
    }

    /// Every row rescaled: `ν_y -> c ν_y`.
    pub fn scale(&self, c: &Q) -> Kernel {
        Kernel {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            rows: self
                .rows
                .iter()
                .map(|(p, m)| (p.clone(), m.scale(c)))
                .collect(),
            templates: self.templates.iter().map(|t| t.scaled(c)).collect(),
        }
    }

    /// `T'g = h·Tg`, i.e. `ν'_y = h(y) ν_y`.
    pub fn scale_by_function(&self, h: &Func) -> Result<Kernel> {
        if **h.space() != *self.codomain {
            return Err(Error::SpaceMismatch(
                "scaling function is not on the codomain".into(),
            ));
        }
        let mut rows: BTreeMap<Point, Meas> = self
            .rows
            .iter()
            .map(|(p, m)| (p.clone(), m.scale(&h.value(p))))
            .collect();
        let mut templates = Vec::new();
        for b in self.codomain.seq_blocks() {
            let tail = h.value(&Point::inf(&b.id));
            if let Some(BlockValues::Seq { exceptions, .. }) = h.block_values(&b.id) {
                for (&n, x) in exceptions {
                    let p = Point::at(&b.id, n);
                    if !rows.contains_key(&p) {
                        rows.insert(p.clone(), self.row(&p)?.scale(x));
                    }
                }
            }
            for t in self.templates_of(&b.id) {
                templates.push(t.scaled(&tail));
            }
        }
        Kernel::with_filled_rows(&self.domain, &self.codomain, rows, templates)
    }

    /// The kernel `ν'_y = ν_y` for `y` in a closed subset `L0` of the
    /// codomain, re-presented on `L0` as a space of its own.
    pub fn restrict_codomain(&self, subset: &Subset) -> Result<(Kernel, PointEmbedding)> {
        let (sub, embedding) = closed_subspace(&self.codomain, subset)?;
        let sub = Arc::new(sub);
        let mut rows = BTreeMap::new();
        let mut templates = Vec::new();
        for (b, be) in sub.blocks().iter().zip(&embedding.blocks) {
            let ambient = |i: Index| Point {
                block: be.ambient.clone(),
                index: be.map_index(i).expect("embedded index"),
            };
            match &be.placement {
                BlockPlacement::Finite(list) => {
                    for i in 0..list.len() as u64 {
                        rows.insert(Point::at(&b.id, i), self.row(&ambient(Index::At(i)))?);
                    }
                }
                BlockPlacement::Periodic {
                    below,
                    start,
                    period,
                    offsets,
                } => {
                    rows.insert(Point::inf(&b.id), self.row(&Point::inf(&be.ambient))?);
                    let block_templates: Vec<&RowTemplate> =
                        self.templates_of(&be.ambient).collect();
                    let big = block_templates
                        .iter()
                        .fold(*period, |acc, t| acc.lcm(&t.class.modulus));
                    let reps = big / period;
                    let len = offsets.len() as u64;
                    let modulus = len * reps;
                    let first = below.len() as u64;
                    let ambient_horizon = self.horizon(&be.ambient);
                    let mut sub_horizon = 0u64;
                    for j in 0..reps {
                        for (s, &o) in offsets.iter().enumerate() {
                            let base_index = start + j * period + o;
                            let t = block_templates
                                .iter()
                                .find(|t| t.class.matches(base_index))
                                .ok_or_else(|| Error::InvalidKernel(validate_kernel(self)))?;
                            let d = t.class.modulus;
                            let step = big / d;
                            let rho = first + j * len + s as u64;
                            let (base, residue) = (rho / modulus, rho % modulus);
                            let c0 = (base_index - t.class.residue) / d;
                            // q' = q'' - base counts periods of `big` past base_index
                            let lag = t.class.start.saturating_sub(c0).div_ceil(step);
                            let atoms = t
                                .atoms
                                .iter()
                                .map(|(target, w)| {
                                    let target = match target {
                                        Target::Fixed(p) => Target::Fixed(p.clone()),
                                        Target::Indexed { block, a, b } => Target::Indexed {
                                            block: block.clone(),
                                            a: a * step,
                                            b: (*a * c0) as i64 + b - (a * step * base) as i64,
                                        },
                                    };
                                    (target, w.clone())
                                })
                                .collect();
                            let nt = RowTemplate::new(
                                &b.id,
                                ResidueClass::new(modulus, residue, base + lag),
                                atoms,
                            );
                            sub_horizon = sub_horizon.max(nt.class.index(nt.effective_start()));
                            templates.push(nt);
                        }
                    }
                    // explicit rows wherever the ambient kernel has them or the
                    // new templates start late
                    let mut i = 0u64;
                    loop {
                        let n = match be.map_index(Index::At(i)) {
                            Some(Index::At(n)) => n,
                            _ => unreachable!("periodic placement"),
                        };
                        if i >= sub_horizon && n >= ambient_horizon {
                            break;
                        }
                        let p = Point::at(&be.ambient, n);
                        if i < sub_horizon || self.rows.contains_key(&p) {
                            rows.insert(Point::at(&b.id, i), self.row(&p)?);
                        }
                        i += 1;
                    }
                }
            }
        }
        let kernel = Kernel::new(&self.domain, &sub, rows, templates)?;
        Ok((kernel, embedding))
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "kernel : {} -> {} {{", self.domain, self.codomain)?;
        for (p, m) in &self.rows {
            writeln!(f, "  row {p} = {m};")?;
        }
        for t in &self.templates {
            writeln!(f, "  {t};")?;
        }
        f.write_str("}")
    }
}

/// Checks coverage, normal form and weak* continuity; reports every failure.
pub fn validate_kernel(kernel: &Kernel) -> Report {
    let mut report = Report::new();
    let (dom, cod) = (&kernel.domain, &kernel.codomain);
    let mut coverage_ok = true;
    let mut normal_ok = true;
    let mut continuity_ok = true;

    for (p, m) in &kernel.rows {
        if !cod.contains(p) {
            coverage_ok = false;
            report
                .fail(ANCHOR, "row point outside codomain")
                .add("point", p.to_string());
        }
        if **m.space() != **dom {
            coverage_ok = false;
            report
                .fail(ANCHOR, "row measure outside domain")
                .add("point", p.to_string());
        }
    }

    let mut seen_classes: BTreeSet<(String, ResidueClass)> = BTreeSet::new();
    for t in &kernel.templates {
        let label = t.to_string();
        match cod.block(&t.block) {
            Some(b) if b.is_seq() => {}
            _ => {
                normal_ok = false;
                report
                    .fail(ANCHOR, "template on unknown or finite block")
                    .add("template", &label);
                continue;
            }
        }
        if !t.class.is_well_formed() {
            normal_ok = false;
            report
                .fail(ANCHOR, "malformed residue class")
                .add("template", &label);
            continue;
        }
        if !seen_classes.insert((t.block.clone(), t.class)) {
            normal_ok = false;
            report
                .fail(ANCHOR, "duplicate residue class")
                .add("template", &label);
        }
        let mut targets = BTreeSet::new();
        for (target, w) in &t.atoms {
            if let Err(msg) = target.check(dom) {
                normal_ok = false;
                report
                    .fail(ANCHOR, "invalid target")
                    .add("template", &label)
                    .add("reason", msg);
            }
            if w.is_zero() {
                normal_ok = false;
                report.fail(ANCHOR, "zero weight").add("template", &label);
            }
            if !targets.insert(target.clone()) {
                normal_ok = false;
                report
                    .fail(ANCHOR, "duplicate target")
                    .add("template", &label)
                    .add("target", target.to_string());
            }
        }
    }
    if !normal_ok {
        report.fail(ANCHOR, "normal form");
        return report;
    }

    for b in cod.blocks() {
        match b.kind {
            BlockKind::Finite(n) => {
                for i in 0..n {
                    let p = Point::at(&b.id, i);
                    if !kernel.rows.contains_key(&p) {
                        coverage_ok = false;
                        report
                            .fail(ANCHOR, "missing explicit row")
                            .add("point", p.to_string());
                    }
                }
            }
            BlockKind::Seq => {
                let classes: Vec<ResidueClass> =
                    kernel.templates_of(&b.id).map(|t| t.class).collect();
                if let Some(defect) = partition_defect(&classes) {
                    coverage_ok = false;
                    report
                        .fail(ANCHOR, "residue classes do not partition")
                        .add("block", &b.id)
                        .add("defect", defect);
                }
                let limit_point = Point::inf(&b.id);
                let limit_row = kernel.rows.get(&limit_point);
                if limit_row.is_none() {
                    coverage_ok = false;
                    report
                        .fail(ANCHOR, "missing limit row")
                        .add("point", limit_point.to_string());
                }
                // indices below every class start and skipped by raised starts
                let horizon = kernel.horizon(&b.id);
                for n in 0..horizon {
                    let p = Point::at(&b.id, n);
                    if kernel.rows.contains_key(&p) {
                        continue;
                    }
                    let covered = kernel.templates_of(&b.id).any(|t| {
                        t.class
                            .parameter(n)
                            .is_some_and(|k| k >= t.effective_start())
                    });
                    if !covered {
                        coverage_ok = false;
                        let clause = report.fail(ANCHOR, "missing explicit row");
                        clause.add("point", p.to_string());
                        if let Some(t) = kernel.templates_of(&b.id).find(|t| t.class.matches(n)) {
                            if t.class.parameter(n).is_some() {
                                clause.add("raised start", t.effective_start().to_string());
                            }
                        }
                    }
                }
                for t in kernel.templates_of(&b.id) {
                    let limit = match t.limit(dom) {
                        Ok(m) => m,
                        Err(_) => continue,
                    };
                    if let Some(row) = limit_row {
                        if &limit != row {
                            continuity_ok = false;
                            report
                                .fail(ANCHOR, "weak* discontinuity")
                                .add("block", t.block.clone())
                                .add(
                                    "class",
                                    format!("({},{})", t.class.modulus, t.class.residue),
                                )
                                .add("template", t.to_string())
                                .add("template limit", limit.to_string())
                                .add("limit row", row.to_string());
                        }
                    }
                }
            }
        }
    }
    if coverage_ok {
        report.pass(ANCHOR, "coverage");
    }
    report.pass(ANCHOR, "normal form");
    if continuity_ok {
        report.pass(ANCHOR, "weak* continuity");
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, q};
    use crate::space::Block;

    fn ex52() -> Kernel {
        let k = Space::shared(vec![Block::seq("X"), Block::seq("Y")]).unwrap();
        let l = Space::shared(vec![Block::seq("Z")]).unwrap();
        let half = q(1, 2);
        let mut rows = BTreeMap::new();
        rows.insert(
            Point::at("Z", 0),
            Meas::dirac(&k, &Point::inf("Y")).unwrap(),
        );
        rows.insert(
            Point::inf("Z"),
            Meas::from_atoms(
                &k,
                [
                    (Point::inf("X"), half.clone()),
                    (Point::inf("Y"), half.clone()),
                ],
            )
            .unwrap(),
        );
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
        Kernel::new(&k, &l, rows, templates).unwrap()
    }

    #[test]
    fn ex52_rows() {
        let t = ex52();
        let k = t.domain().clone();
        assert_eq!(
            t.row(&Point::at("Z", 0)).unwrap(),
            Meas::dirac(&k, &Point::inf("Y")).unwrap()
        );
        let z3 = Meas::from_atoms(
            &k,
            [(Point::at("X", 1), q(1, 2)), (Point::inf("Y"), q(1, 2))],
        )
        .unwrap();
        assert_eq!(t.row(&Point::at("Z", 3)).unwrap(), z3);
        let z2 = Meas::from_atoms(
            &k,
            [(Point::inf("X"), q(1, 2)), (Point::at("Y", 0), q(1, 2))],
        )
        .unwrap();
        assert_eq!(t.row(&Point::at("Z", 2)).unwrap(), z2);
        assert!(t.is_positive() && t.is_unital());
        assert_eq!(t.operator_norm(), int(1));
        assert_eq!(t.apply(&Func::one(&k)).unwrap(), Func::one(t.codomain()));
    }

    #[test]
    fn ex52_adjoint() {
        let t = ex52();
        let (k, l) = (t.domain().clone(), t.codomain().clone());
        let mu = Meas::from_atoms(
            &l,
            [(Point::at("Z", 1), int(1)), (Point::inf("Z"), int(-1))],
        )
        .unwrap();
        let expect = Meas::from_atoms(
            &k,
            [(Point::at("X", 0), q(1, 2)), (Point::inf("X"), q(-1, 2))],
        )
        .unwrap();
        assert_eq!(t.adjoint(&mu).unwrap(), expect);
    }

    #[test]
    fn discontinuous_template_is_reported() {
        let t = ex52();
        let mut rows = t.rows().clone();
        rows.insert(
            Point::inf("Z"),
            Meas::dirac(t.domain(), &Point::inf("Y")).unwrap(),
        );
        let bad = Kernel::unvalidated(t.domain(), t.codomain(), rows, t.templates().to_vec());
        let report = validate_kernel(&bad);
        assert!(report.failures().any(|c| c.clause == "weak* discontinuity"));
    }

    #[test]
    fn colliding_atoms_demand_explicit_row() {
        let k = Space::shared(vec![Block::seq("X")]).unwrap();
        let l = Space::shared(vec![Block::seq("Z")]).unwrap();
        let atoms = vec![
            (Target::indexed("X", 1, 0), q(1, 2)),
            (Target::indexed("X", 2, -1), q(1, 2)),
        ];
        let templates = vec![RowTemplate::new("Z", ResidueClass::new(1, 0, 0), atoms)];
        let mut rows = BTreeMap::new();
        rows.insert(Point::inf("Z"), Meas::dirac(&k, &Point::inf("X")).unwrap());
        let bad = Kernel::unvalidated(&k, &l, rows.clone(), templates.clone());
        let report = validate_kernel(&bad);
        let missing: Vec<_> = report
            .failures()
            .filter(|c| c.clause == "missing explicit row")
            .map(|c| c.values[0].1.clone())
            .collect();
        // k = 0 has a negative index, k = 1 is the collision
        assert_eq!(missing, ["Z:0", "Z:1"]);
        assert!(Kernel::new(&k, &l, rows.clone(), templates.clone()).is_err());
        rows.insert(
            Point::at("Z", 0),
            Meas::dirac(&k, &Point::at("X", 0)).unwrap(),
        );
        let filled = Kernel::with_filled_rows(&k, &l, rows, templates).unwrap();
        assert_eq!(
            filled.row(&Point::at("Z", 1)).unwrap(),
            Meas::dirac(&k, &Point::at("X", 1)).unwrap()
        );
    }

    #[test]
    fn cancellation_kernel_norm() {
        let a = Space::shared(vec![Block::seq("A")]).unwrap();
        let b = Space::shared(vec![Block::seq("B")]).unwrap();
        let atoms = vec![
            (Target::indexed("A", 1, 0), int(1)),
            (Target::indexed("A", 1, 1), int(-1)),
        ];
        let mut rows = BTreeMap::new();
        rows.insert(Point::inf("B"), Meas::zero(&a));
        let t = Kernel::new(
            &a,
            &b,
            rows,
            vec![RowTemplate::new("B", ResidueClass::new(1, 0, 0), atoms)],
        )
        .unwrap();
        assert_eq!(t.operator_norm(), int(2));
        let g = Func::zero(&a)
            .with_value(&Point::at("A", 3), int(1))
            .unwrap();
        let tg = t.apply(&g).unwrap();
        assert_eq!(tg.value(&Point::at("B", 2)), int(-1));
        assert_eq!(tg.value(&Point::at("B", 3)), int(1));
        assert_eq!(tg.value(&Point::at("B", 9)), int(0));
    }

    #[test]
    fn scale_by_function_patches_exceptions() {
        let t = ex52();
        let l = t.codomain().clone();
        let h = Func::constant(&l, q(1, 2))
            .with_value(&Point::at("Z", 5), int(3))
            .unwrap();
        let s = t.scale_by_function(&h).unwrap();
        assert_eq!(s.operator_norm(), int(3));
        assert_eq!(
            s.row(&Point::at("Z", 5)).unwrap(),
            t.row(&Point::at("Z", 5)).unwrap().scale(&int(3))
        );
        assert_eq!(
            s.row(&Point::at("Z", 7)).unwrap(),
            t.row(&Point::at("Z", 7)).unwrap().scale(&q(1, 2))
        );
        assert_eq!(
            t.scale_by_function(&Func::one(&l))
                .unwrap()
                .apply(&Func::one(t.domain()))
                .unwrap(),
            Func::one(&l)
        );
    }

    #[test]
    fn restriction_to_even_indices() {
        use crate::subset::{IndexSet, Trace};
        let t = ex52();
        let mut evens = Subset::empty();
        evens.set_trace(
            "Z",
            Trace {
                indices: IndexSet::progression(2, 0),
                inf: true,
            },
        );
        let (r, emb) = t.restrict_codomain(&evens).unwrap();
        for i in 0..12 {
            let sub_point = Point::at("Z", i);
            let amb = emb.map(&sub_point).unwrap();
            assert_eq!(amb, Point::at("Z", 2 * i));
            assert_eq!(r.row(&sub_point).unwrap(), t.row(&amb).unwrap());
        }
        assert_eq!(
            r.row(&Point::inf("Z")).unwrap(),
            t.row(&Point::inf("Z")).unwrap()
        );
        let mut tail = Subset::empty();
        tail.set_trace(
            "Z",
            Trace {
                indices: IndexSet::cofinite(7, [2]),
                inf: true,
            },
        );
        let (r, emb) = t.restrict_codomain(&tail).unwrap();
        for i in 0..15 {
            let p = Point::at("Z", i);
            assert_eq!(r.row(&p).unwrap(), t.row(&emb.map(&p).unwrap()).unwrap());
        }
    }
}
