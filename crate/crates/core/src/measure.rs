//! Finitely supported signed atomic measures and parametric measure paths.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::function::Func;
use crate::rational::Q;
use crate::report::Report;
use crate::space::{Point, Space};
use crate::template::Target;

/// Atoms at distinct points with nonzero rational weights.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Meas {
    space: Arc<Space>,
    atoms: BTreeMap<Point, Q>,
}

/// Jordan decomposition `mu = plus - minus`, `abs = plus + minus`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Jordan {
    pub plus: Meas,
    pub minus: Meas,
    pub abs: Meas,
    pub norm: Q,
}

impl Meas {
    pub fn zero(space: &Arc<Space>) -> Self {
        Meas {
            space: space.clone(),
            atoms: BTreeMap::new(),
        }
    }

    pub fn dirac(space: &Arc<Space>, p: &Point) -> Result<Self> {
        Meas::from_atoms(space, [(p.clone(), Q::one())])
    }

    /// Merges atoms at equal points and drops zero weights.
    pub fn from_atoms<I: IntoIterator<Item = (Point, Q)>>(
        space: &Arc<Space>,
        atoms: I,
    ) -> Result<Self> {
        let mut merged: BTreeMap<Point, Q> = BTreeMap::new();
        for (p, w) in atoms {
            space.check_point(&p)?;
            *merged.entry(p).or_insert_with(Q::zero) += w;
        }
        merged.retain(|_, w| !w.is_zero());
        Ok(Meas {
            space: space.clone(),
            atoms: merged,
        })
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn atoms(&self) -> &BTreeMap<Point, Q> {
        &self.atoms
    }

    pub fn weight(&self, p: &Point) -> Q {
        self.atoms.get(p).cloned().unwrap_or_else(Q::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `mu(g) = sum of weight * g(point)`.
    pub fn eval(&self, g: &Func) -> Result<Q> {
        if **g.space() != *self.space {
            return Err(Error::SpaceMismatch(
                "measure and function spaces differ".into(),
            ));
        }
        Ok(self.eval_unchecked(g))
    }

    pub(crate) fn eval_unchecked(&self, g: &Func) -> Q {
        self.atoms.iter().map(|(p, w)| w * g.value(p)).sum()
    }

    /// Total variation `sum |w|`.
    pub fn norm(&self) -> Q {
        self.atoms.values().map(|w| w.abs()).sum()
    }

    /// Total mass `mu(1)`.
    pub fn mass(&self) -> Q {
        self.atoms.values().sum()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.atoms.values().all(|w| w.is_positive())
    }

    pub fn jordan(&self) -> Jordan {
        let part = |keep: fn(&Q) -> bool| Meas {
            space: self.space.clone(),
            atoms: self
                .atoms
                .iter()
                .filter(|(_, w)| keep(w))
                .map(|(p, w)| (p.clone(), w.abs()))
                .collect(),
        };
        let plus = part(|w| w.is_positive());
        let minus = part(|w| w.is_negative());
        let abs = part(|_| true);
        Jordan {
            plus,
            minus,
            norm: self.norm(),
            abs,
        }
    }

    pub fn scale(&self, c: &Q) -> Meas {
        if c.is_zero() {
            return Meas::zero(&self.space);
        }
        Meas {
            space: self.space.clone(),
            atoms: self.atoms.iter().map(|(p, w)| (p.clone(), c * w)).collect(),
        }
    }

    pub fn add(&self, other: &Meas) -> Result<Meas> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch(
                "measures live on different spaces".into(),
            ));
        }
        Meas::from_atoms(
            &self.space,
            self.atoms
                .iter()
                .chain(&other.atoms)
                .map(|(p, w)| (p.clone(), w.clone())),
        )
    }

    pub fn sub(&self, other: &Meas) -> Result<Meas> {
        self.add(&other.scale(&-Q::one()))
    }

    /// The same atoms viewed on a larger space.
    pub fn transfer(&self, space: &Arc<Space>) -> Result<Meas> {
        Meas::from_atoms(
            space,
            self.atoms.iter().map(|(p, w)| (p.clone(), w.clone())),
        )
    }

    /// Pushes atoms through a point map into another space.
    pub fn push_forward(&self, space: &Arc<Space>, f: impl Fn(&Point) -> Point) -> Result<Meas> {
        Meas::from_atoms(space, self.atoms.iter().map(|(p, w)| (f(p), w.clone())))
    }
}

impl fmt::Display for Meas {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("{ }");
        }
        let items: Vec<String> = self
            .atoms
            .iter()
            .map(|(p, w)| format!("{p}: {w}"))
            .collect();
        write!(f, "{{ {} }}", items.join(", "))
    }
}

/// Weak* limit of a parametric family of atoms: each atom lands on its
/// target's limit point; weights at equal points merge.
pub fn limit_of_atoms<'a, I>(space: &Arc<Space>, atoms: I) -> Result<Meas>
where
    I: IntoIterator<Item = (&'a Target, &'a Q)>,
{
    Meas::from_atoms(
        space,
        atoms.into_iter().map(|(t, w)| (t.limit(), w.clone())),
    )
}

/// Instantiates parametric atoms at parameter `k`.
pub fn instantiate_atoms<'a, I>(space: &Arc<Space>, atoms: I, k: u64) -> Result<Meas>
where
    I: IntoIterator<Item = (&'a Target, &'a Q)>,
{
    let mut out = Vec::new();
    for (t, w) in atoms {
        let p = t
            .at(k)
            .ok_or_else(|| Error::InvalidPath(format!("target {t} negative at k = {k}")))?;
        out.push((p, w.clone()));
    }
    Meas::from_atoms(space, out)
}

/// The sequence `mu_n` for `n >= start`, with a declared weak* limit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasPath {
    space: Arc<Space>,
    start: u64,
    atoms: Vec<(Target, Q)>,
    limit: Meas,
}

impl MeasPath {
    pub fn new(
        space: &Arc<Space>,
        start: u64,
        atoms: Vec<(Target, Q)>,
        limit: Meas,
    ) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for (t, w) in &atoms {
            t.check(space).map_err(Error::InvalidPath)?;
            if w.is_zero() {
                return Err(Error::InvalidPath(format!("zero weight on {t}")));
            }
            if !seen.insert(t.clone()) {
                return Err(Error::InvalidPath(format!("duplicate target {t}")));
            }
            if t.nonnegative_from() > start {
                return Err(Error::InvalidPath(format!(
                    "target {t} negative before n = {start}"
                )));
            }
        }
        if limit.space() != space {
            return Err(Error::SpaceMismatch(
                "declared limit lives elsewhere".into(),
            ));
        }
        let path = MeasPath {
            space: space.clone(),
            start,
            atoms,
            limit,
        };
        if path_limit(&path)? != path.limit {
            return Err(Error::InvalidPath(format!(
                "declared limit {} differs from symbolic limit",
                path.limit
            )));
        }
        Ok(path)
    }

    /// Path whose declared limit is its symbolic limit.
    pub fn with_symbolic_limit(
        space: &Arc<Space>,
        start: u64,
        atoms: Vec<(Target, Q)>,
    ) -> Result<Self> {
        let limit = limit_of_atoms(space, atoms.iter().map(|(t, w)| (t, w)))?;
        MeasPath::new(space, start, atoms, limit)
    }

    pub fn start(&self) -> u64 {
        self.start
    }

    pub fn atoms(&self) -> &[(Target, Q)] {
        &self.atoms
    }

    pub fn declared_limit(&self) -> &Meas {
        &self.limit
    }

    pub fn at(&self, n: u64) -> Result<Meas> {
        instantiate_atoms(&self.space, self.atoms.iter().map(|(t, w)| (t, w)), n)
    }

    /// Index from which atoms hit pairwise distinct points.
    pub fn collision_free_from(&self) -> u64 {
        let class = crate::template::ResidueClass::new(1, 0, self.start);
        crate::template::raised_start(&class, self.atoms.iter().map(|(t, _)| t))
    }

    /// Index from which `mu_n(g)` and `|mu_n|(g)` are constant.
    pub fn stable_from(&self, g: &Func) -> u64 {
        let mut n = self.collision_free_from();
        for (t, _) in &self.atoms {
            if let Target::Indexed { block, a, b } = t {
                if let Some(e) = g.last_exception(block) {
                    // need a*n + b > e
                    let need = e as i128 + 1 - *b as i128;
                    let k = if need <= 0 {
                        0
                    } else {
                        (need as u64).div_ceil(*a)
                    };
                    n = n.max(k);
                }
            }
        }
        n
    }

    /// Eventual variation `||mu_n||` (constant beyond collisions).
    pub fn eventual_norm(&self) -> Q {
        self.atoms.iter().map(|(_, w)| w.abs()).sum()
    }

    /// `lim |mu_n|(g)`; each atom settles at its target's limit value.
    pub fn limit_abs_eval(&self, g: &Func) -> Q {
        self.atoms
            .iter()
            .map(|(t, w)| w.abs() * g.value(&t.limit()))
            .sum()
    }

    /// `lim mu_n(g)`.
    pub fn limit_eval(&self, g: &Func) -> Q {
        self.atoms
            .iter()
            .map(|(t, w)| w * g.value(&t.limit()))
            .sum()
    }
}

/// Symbolic weak* limit of a path.
pub fn path_limit(path: &MeasPath) -> Result<Meas> {
    limit_of_atoms(&path.space, path.atoms.iter().map(|(t, w)| (t, w)))
}

/// Checks both semicontinuity inequalities for the variation along a path:
/// `|mu|(g) <= lim |mu_n|(g)` for `g >= 0`, and
/// `|mu|(g) >= |mu|(K) + lim |mu_n|(g) - 1` for `0 <= g <= 1`,
/// where every `||mu_n|| <= 1`. Preconditions are reported as failures.
pub fn check_variation_semicontinuity(path: &MeasPath, g: &Func) -> Result<Report> {
    const ANCHOR: &str = "variation-semicontinuity";
    if **g.space() != *path.space {
        return Err(Error::SpaceMismatch(
            "path and function spaces differ".into(),
        ));
    }
    let mut report = Report::new();
    let mu = path_limit(path)?;
    let abs_mu = mu.jordan().abs;
    let lhs = abs_mu.eval_unchecked(g);
    let lim = path.limit_abs_eval(g);
    let n_norm = path.eventual_norm();
    let unit_ball = n_norm <= Q::one();
    let g_nonneg = g.is_nonnegative();
    let g_below_one = g.values().all(|v| v <= &Q::one());

    report
        .check(
            ANCHOR,
            "declared limit equals symbolic limit",
            mu == path.limit,
        )
        .add("limit", mu.to_string());
    report
        .check(ANCHOR, "precondition ||mu_n|| <= 1", unit_ball)
        .add("||mu_n||", n_norm.to_string());
    if g_nonneg {
        report
            .check(
                ANCHOR,
                "lower semicontinuity |mu|(g) <= lim |mu_n|(g)",
                lhs <= lim,
            )
            .add("|mu|(g)", lhs.to_string())
            .add("lim |mu_n|(g)", lim.to_string());
    } else {
        report.fail(ANCHOR, "precondition g >= 0");
    }
    if g_nonneg && g_below_one && unit_ball {
        let rhs = abs_mu.mass() + &lim - Q::one();
        report
            .check(
                ANCHOR,
                "upper bound |mu|(g) >= |mu|(K) + lim |mu_n|(g) - 1",
                lhs >= rhs,
            )
            .add("|mu|(g)", lhs.to_string())
            .add("|mu|(K) + lim |mu_n|(g) - 1", rhs.to_string());
        if abs_mu.mass() == Q::one() && n_norm == Q::one() {
            report
                .check(
                    ANCHOR,
                    "unit-norm continuity |mu_n|(g) -> |mu|(g)",
                    lhs == lim,
                )
                .add("|mu|(g)", lhs.to_string())
                .add("lim |mu_n|(g)", lim.to_string());
        }
    } else if !(g_nonneg && g_below_one) {
        report.fail(ANCHOR, "precondition 0 <= g <= 1");
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, q};
    use crate::space::Block;

    fn space() -> Arc<Space> {
        Space::shared(vec![Block::seq("A"), Block::seq("Y")]).unwrap()
    }

    #[test]
    fn dirac_evaluates_point() {
        let s = space();
        let g = Func::constant(&s, int(3))
            .with_value(&Point::at("A", 0), int(7))
            .unwrap();
        let d = Meas::dirac(&s, &Point::at("A", 0)).unwrap();
        assert_eq!(d.eval(&g).unwrap(), int(7));
    }

    #[test]
    fn jordan_examples() {
        let s = space();
        let (a, b) = (Point::at("A", 0), Point::at("A", 1));
        let mu = Meas::from_atoms(&s, [(a.clone(), int(1)), (b.clone(), int(-1))]).unwrap();
        let j = mu.jordan();
        assert_eq!(j.plus, Meas::dirac(&s, &a).unwrap());
        assert_eq!(j.minus, Meas::dirac(&s, &b).unwrap());
        assert_eq!(j.norm, int(2));
        let nonneg = Meas::from_atoms(&s, [(a.clone(), q(1, 3))]).unwrap();
        assert!(nonneg.jordan().minus.is_zero());
        assert_eq!(nonneg.jordan().abs, nonneg);
        let cancel = Meas::from_atoms(&s, [(a.clone(), q(1, 2)), (a, q(-1, 2))]).unwrap();
        assert!(cancel.is_zero());
        assert_eq!(cancel.norm(), int(0));
    }

    #[test]
    fn path_limits() {
        let s = space();
        let constant =
            MeasPath::with_symbolic_limit(&s, 0, vec![(Target::Fixed(Point::inf("Y")), int(1))])
                .unwrap();
        assert_eq!(
            path_limit(&constant).unwrap(),
            Meas::dirac(&s, &Point::inf("Y")).unwrap()
        );
        let cancel = MeasPath::with_symbolic_limit(
            &s,
            0,
            vec![
                (Target::indexed("A", 1, 0), int(1)),
                (Target::indexed("A", 1, 1), int(-1)),
            ],
        )
        .unwrap();
        assert!(path_limit(&cancel).unwrap().is_zero());
        // oracle: g(A_n) - g(A_{n+1}) vanishes eventually
        let g = Func::zero(&s)
            .with_value(&Point::at("A", 2), int(5))
            .unwrap();
        let n = cancel.stable_from(&g);
        assert_eq!(cancel.at(n).unwrap().eval(&g).unwrap(), int(0));
        let odd = MeasPath::with_symbolic_limit(
            &s,
            0,
            vec![
                (Target::indexed("A", 1, 0), q(1, 2)),
                (Target::Fixed(Point::inf("Y")), q(1, 2)),
            ],
        )
        .unwrap();
        let expect =
            Meas::from_atoms(&s, [(Point::inf("A"), q(1, 2)), (Point::inf("Y"), q(1, 2))]).unwrap();
        assert_eq!(path_limit(&odd).unwrap(), expect);
    }

    #[test]
    fn wrong_declared_limit_is_rejected() {
        let s = space();
        let zero = Meas::zero(&s);
        let atoms = vec![(Target::indexed("A", 1, 0), int(1))];
        assert!(MeasPath::new(&s, 0, atoms, zero).is_err());
    }

    #[test]
    fn semicontinuity_on_cancellation_path() {
        let s = space();
        let one = Func::one(&s);
        let full = MeasPath::with_symbolic_limit(
            &s,
            0,
            vec![
                (Target::indexed("A", 1, 0), int(1)),
                (Target::indexed("A", 1, 1), int(-1)),
            ],
        )
        .unwrap();
        let report = check_variation_semicontinuity(&full, &one).unwrap();
        assert!(!report.is_ok(), "norm 2 path must fail the precondition");
        let half = MeasPath::with_symbolic_limit(
            &s,
            0,
            vec![
                (Target::indexed("A", 1, 0), q(1, 2)),
                (Target::indexed("A", 1, 1), q(-1, 2)),
            ],
        )
        .unwrap();
        let report = check_variation_semicontinuity(&half, &one).unwrap();
        assert!(report.is_ok(), "{report}");
        let upper = report
            .clauses
            .iter()
            .find(|c| c.clause.starts_with("upper bound"))
            .unwrap();
        assert_eq!(upper.values[0].1, "0");
        assert_eq!(upper.values[1].1, "0");
    }

    #[test]
    fn constant_path_is_an_equality_case() {
        let s = space();
        let atoms = vec![
            (Target::Fixed(Point::at("A", 0)), q(1, 3)),
            (Target::Fixed(Point::inf("Y")), q(-2, 3)),
        ];
        let path = MeasPath::with_symbolic_limit(&s, 0, atoms).unwrap();
        let g = Func::constant(&s, q(1, 2))
            .with_value(&Point::at("A", 0), int(1))
            .unwrap();
        let report = check_variation_semicontinuity(&path, &g).unwrap();
        assert!(report.is_ok());
        let cont = report
            .clauses
            .iter()
            .find(|c| c.clause.starts_with("unit-norm"))
            .unwrap();
        assert_eq!(cont.values[0].1, cont.values[1].1);
    }
}
