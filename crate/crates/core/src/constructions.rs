//! Set maps from positive unital kernels, the threshold filtration and the
//! continuous-image witnesses built on it.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive};

use crate::error::{assertion, Error, Result};
use crate::kernel::Kernel;
use crate::measure::Meas;
use crate::rational::Q;
use crate::report::Report;
use crate::setmap::{check_continuous_onto, check_usc, SetMap, SetTemplate};
use crate::space::{Index, Point, PointEmbedding, Space};
use crate::subset::{closed_subspace, IndexSet, Subset, Trace};

/// Default bound on the tail index searched by [`local_witness`].
pub const DEFAULT_SEARCH_BOUND: u64 = 64;

fn heavy_atoms(m: &Meas, r: &Q) -> BTreeSet<Point> {
    m.atoms()
        .iter()
        .filter(|(_, w)| *w >= r)
        .map(|(p, _)| p.clone())
        .collect()
}

fn require_positive_unital(kernel: &Kernel) -> Result<()> {
    if !kernel.is_positive() {
        return Err(Error::NotPositive);
    }
    if !kernel.is_unital() {
        return Err(Error::NotUnital);
    }
    Ok(())
}

/// `φ_r(y) = {x : ν_y({x}) >= r}`, with bound `floor(1/r)`.
pub fn phi_r(kernel: &Kernel, r: &Q) -> Result<SetMap> {
    require_positive_unital(kernel)?;
    if !r.is_positive() || r > &Q::one() {
        return Err(Error::ThresholdOutOfRange(r.to_string()));
    }
    let bound = r.recip().floor().to_integer().to_u64().unwrap_or(u64::MAX);
    let values: BTreeMap<Point, BTreeSet<Point>> = kernel
        .rows()
        .iter()
        .map(|(y, m)| (y.clone(), heavy_atoms(m, r)))
        .collect();
    let templates = kernel
        .templates()
        .iter()
        .map(|t| {
            let targets = t
                .atoms
                .iter()
                .filter(|(_, w)| w >= r)
                .map(|(x, _)| x.clone())
                .collect();
            SetTemplate::new(&t.block, t.class, targets)
        })
        .collect();
    let map =
        SetMap::with_filled_values(kernel.codomain(), kernel.domain(), bound, values, templates)?;
    let report = check_phi_r(&map);
    if let Some(c) = report.failures().next() {
        return Err(assertion(&format!("phi_r: {}", c.clause), map.to_string()));
    }
    Ok(map)
}

/// The two structural properties of `φ_r`: usc and closed image.
pub fn check_phi_r(map: &SetMap) -> Report {
    let mut report = check_usc(map);
    let image = map.image_union();
    report
        .check("phi_r", "image union closed", image.closed)
        .add("image", image.set.to_string());
    report
}

/// Verifies that `φ_m` is onto; uncovered points mean `m` exceeds the true
/// embedding constant.
pub fn check_onto_at_m(kernel: &Kernel, m: &Q) -> Result<Report> {
    let map = phi_r(kernel, m)?;
    let image = map.image_union();
    let mut report = Report::new();
    let clause = report.check("phi_r", "onto at the working constant", image.onto);
    clause.add("m", m.to_string());
    if !image.onto {
        let uncovered = image.set.complement(kernel.domain());
        clause.add("uncovered", uncovered.to_string()).add(
            "hint",
            "the constant exceeds the true one; increase the window",
        );
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Filtration {
    pub p: u32,
    /// `m_i = 2^(i-1) m` for `i = 1..=p`.
    pub thresholds: Vec<Q>,
    /// `K_1 ⊇ ... ⊇ K_p`.
    pub chain: Vec<Subset>,
    pub report: Report,
}

impl Filtration {
    /// `K_i` for `1 <= i <= p + 1`, with `K_{p+1} = ∅`.
    pub fn level(&self, i: usize) -> Subset {
        if i >= 1 && i <= self.chain.len() {
            self.chain[i - 1].clone()
        } else {
            Subset::empty()
        }
    }

    pub fn threshold(&self, i: usize) -> &Q {
        &self.thresholds[i - 1]
    }
}

/// Least `p` with `2^p > 1/m`.
pub fn filtration_depth(m: &Q) -> u32 {
    let inv = m.recip();
    let mut p = 0u32;
    while Q::from_integer(BigInt::one() << p) <= inv {
        p += 1;
    }
    p
}

/// `K_i = ⋃_y φ_{m_i}(y)` at the doubling thresholds `m_i = 2^(i-1) m`.
pub fn filtration(kernel: &Kernel, m: &Q) -> Result<Filtration> {
    require_positive_unital(kernel)?;
    if !m.is_positive() || m > &Q::one() {
        return Err(Error::ThresholdOutOfRange(m.to_string()));
    }
    const ANCHOR: &str = "filtration";
    let p = filtration_depth(m);
    let mut report = Report::new();
    report
        .pass(ANCHOR, "least p with 2^p > 1/m")
        .add("p", p.to_string())
        .add("m", m.to_string());
    let mut thresholds = Vec::new();
    let mut chain: Vec<Subset> = Vec::new();
    for i in 1..=p {
        let mi = m * Q::from_integer(BigInt::one() << (i - 1));
        let map = phi_r(kernel, &mi)?;
        let image = map.image_union();
        report
            .check(ANCHOR, format!("K_{i} closed"), image.closed)
            .add("m_i", mi.to_string())
            .add("K_i", image.set.to_string());
        if let Some(prev) = chain.last() {
            report.check(
                ANCHOR,
                format!("K_{i} ⊆ K_{}", i - 1),
                image.set.is_subset(prev),
            );
        }
        thresholds.push(mi);
        chain.push(image.set);
    }
    report
        .check(
            ANCHOR,
            "K_1 = K",
            chain.first() == Some(&Subset::whole(kernel.domain())),
        )
        .add("K_1", chain[0].to_string());
    if let Some(c) = report.failures().next() {
        return Err(assertion(
            &format!("{ANCHOR}: {}", c.clause),
            crate::space::render_failure(c),
        ));
    }
    Ok(Filtration {
        p,
        thresholds,
        chain,
        report,
    })
}

/// A continuous surjection from a closed subspace of `L` onto a closed
/// subset of `K`.
#[derive(Clone, Debug)]
pub struct CiWitness {
    /// Closed subset of `L` on which the map is defined.
    pub source: Subset,
    pub source_space: Arc<Space>,
    pub embedding: PointEmbedding,
    /// Single-valued on `source`, empty elsewhere.
    pub map: SetMap,
    pub target: Subset,
    pub report: Report,
}

impl CiWitness {
    fn build(anchor: &str, map: SetMap, target: Subset) -> Result<CiWitness> {
        let source = map.support();
        let report = check_continuous_onto(&map, &target);
        if let Some(c) = report.failures().next() {
            return Err(assertion(
                &format!("{anchor}: {}", c.clause),
                crate::space::render_failure(c),
            ));
        }
        let (space, embedding) = closed_subspace(map.domain(), &source)?;
        Ok(CiWitness {
            source,
            source_space: Arc::new(space),
            embedding,
            map,
            target,
            report,
        })
    }

    /// The image of a source point.
    pub fn image(&self, y: &Point) -> Result<Option<Point>> {
        Ok(self.map.value(y)?.into_iter().next())
    }
}

/// `ψ = φ_{m_p}` restricted to `K_p`: single-valued since `m_p > 1/2`, and a
/// continuous surjection from `L_0 = ψ⁻¹[K_p]` onto `K_p`.
pub fn top_level_witness(kernel: &Kernel, f: &Filtration) -> Result<CiWitness> {
    let top = f.level(f.p as usize);
    let psi = phi_r(kernel, f.threshold(f.p as usize))?.restrict(&top)?;
    if !psi.is_single_valued() {
        return Err(assertion(
            "top-level witness: single-valued",
            psi.to_string(),
        ));
    }
    CiWitness::build("top-level witness", psi, top)
}

#[derive(Clone, Debug)]
pub struct LocalWitness {
    pub level: usize,
    pub point: Point,
    /// Clopen neighbourhood of `point` meeting each restricted value at most once.
    pub neighbourhood: Subset,
    pub witness: CiWitness,
}

fn tail_neighbourhood(block: &str, from: u64) -> Subset {
    let mut s = Subset::empty();
    s.set_trace(
        block,
        Trace {
            indices: IndexSet::from_threshold(from),
            inf: true,
        },
    );
    s
}

/// For `x ∈ K_i \ K_{i+1}`, a clopen `U ∋ x` with `closure(U) ∩ K_i` a
/// continuous image of a closed subspace of `L`.
pub fn local_witness(
    kernel: &Kernel,
    f: &Filtration,
    i: usize,
    x: &Point,
    search_bound: u64,
) -> Result<LocalWitness> {
    if i == 0 || i > f.p as usize {
        return Err(Error::Hypothesis(format!("level {i} outside 1..={}", f.p)));
    }
    let (ki, next) = (f.level(i), f.level(i + 1));
    if !ki.contains(x) || next.contains(x) {
        return Err(Error::Hypothesis(format!(
            "{x} is not in K_{i} \\ K_{}",
            i + 1
        )));
    }
    let psi = phi_r(kernel, f.threshold(i))?.restrict(&ki)?;
    let candidates: Vec<Subset> = match x.index {
        Index::At(_) => vec![Subset::point(x)],
        Index::Inf => (0..=search_bound)
            .map(|n| tail_neighbourhood(&x.block, n))
            .collect(),
    };
    for h in candidates {
        let target = h.intersection(&ki);
        let rho = psi.restrict(&target)?;
        if rho.is_single_valued() {
            let witness = CiWitness::build("local witness", rho, target)?;
            return Ok(LocalWitness {
                level: i,
                point: x.clone(),
                neighbourhood: h,
                witness,
            });
        }
    }
    Err(Error::SearchBoundExceeded {
        bound: search_bound,
        point: x.to_string(),
    })
}

#[derive(Clone, Debug)]
pub struct PiBaseElement {
    pub level: usize,
    /// Nonempty clopen `U ⊆ W` whose closure carries the witness.
    pub set: Subset,
    pub witness: CiWitness,
}

/// Finds a nonempty clopen `U ⊆ W` with `closure(U)` a continuous image of a
/// closed subspace of `L`, from the least level `i` where `W ∩ (K_i \ K_{i+1})`
/// has interior.
pub fn pi_base(
    kernel: &Kernel,
    f: &Filtration,
    w: &Subset,
    search_bound: u64,
) -> Result<PiBaseElement> {
    let space = kernel.domain();
    w.validate(space)?;
    if w.is_empty() || !w.is_clopen() {
        return Err(Error::NotClopen(w.to_string()));
    }
    for i in 1..=f.p as usize {
        let band = w.intersection(&f.level(i).difference(&f.level(i + 1)));
        let interior = band.interior(space)?;
        if interior.is_empty() {
            continue;
        }
        if interior.is_clopen() {
            let psi = phi_r(kernel, f.threshold(i))?.restrict(&f.level(i))?;
            let rho = psi.restrict(&interior)?;
            if rho.is_single_valued() {
                let witness = CiWitness::build("pi-base", rho, interior.clone())?;
                return Ok(PiBaseElement {
                    level: i,
                    set: interior,
                    witness,
                });
            }
        }
        let x = interior.first_isolated_point().ok_or_else(|| {
            assertion("pi-base: isolated point in open set", interior.to_string())
        })?;
        let local = local_witness(kernel, f, i, &x, search_bound)?;
        let set = local.neighbourhood.intersection(w);
        let target = set.closure(space)?.intersection(&f.level(i));
        let rho = local.witness.map.restrict(&target)?;
        let witness = CiWitness::build("pi-base", rho, target)?;
        return Ok(PiBaseElement {
            level: i,
            set,
            witness,
        });
    }
    Err(assertion("pi-base: some level has interior", w.to_string()))
}

/// With `m > 1/2` the filtration has one level and the top-level witness maps
/// a closed subspace of `L` onto all of `K`.
pub fn surjection_witness(kernel: &Kernel, m: &Q) -> Result<(Filtration, CiWitness)> {
    if m * Q::from_integer(2.into()) <= Q::one() {
        return Err(Error::Hypothesis(format!("constant {m} is not above 1/2")));
    }
    let f = filtration(kernel, m)?;
    let w = top_level_witness(kernel, &f)?;
    Ok((f, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;
    use crate::rational::{int, q};

    fn pts(items: &[Point]) -> BTreeSet<Point> {
        items.iter().cloned().collect()
    }

    #[test]
    fn depth() {
        assert_eq!(filtration_depth(&q(1, 5)), 3);
        assert_eq!(filtration_depth(&int(1)), 1);
        assert_eq!(filtration_depth(&q(1, 2)), 2);
        assert_eq!(filtration_depth(&q(3, 5)), 1);
    }

    #[test]
    fn ex52_phi() {
        let t = gallery::ex52();
        let phi = phi_r(&t, &q(1, 5)).unwrap();
        assert_eq!(phi.bound(), 5);
        assert_eq!(
            phi.value(&Point::at("Z", 0)).unwrap(),
            pts(&[Point::inf("Y")])
        );
        assert_eq!(
            phi.value(&Point::at("Z", 3)).unwrap(),
            pts(&[Point::at("X", 1), Point::inf("Y")])
        );
        assert_eq!(
            phi.value(&Point::at("Z", 4)).unwrap(),
            pts(&[Point::inf("X"), Point::at("Y", 1)])
        );
        assert!(phi.image_union().onto);
        let phi = phi_r(&t, &q(4, 5)).unwrap();
        let img = phi.image_union();
        assert_eq!(img.set, Subset::point(&Point::inf("Y")));
        assert!(img.closed && !img.onto);
        let preimage = phi_r(&t, &q(2, 5))
            .unwrap()
            .preimage(&Subset::point(&Point::inf("X")))
            .unwrap();
        let mut expect = Subset::empty();
        expect.set_trace(
            "Z",
            Trace {
                indices: IndexSet::periodic(2, 2, [0], []),
                inf: true,
            },
        );
        assert_eq!(preimage, expect);
    }

    #[test]
    fn ex52_filtration_and_witnesses() {
        let t = gallery::ex52();
        let f = filtration(&t, &q(1, 5)).unwrap();
        let k = Subset::whole(t.domain());
        assert_eq!(f.p, 3);
        assert_eq!(
            f.chain,
            vec![k.clone(), k.clone(), Subset::point(&Point::inf("Y"))]
        );
        let top = top_level_witness(&t, &f).unwrap();
        assert_eq!(top.source, Subset::point(&Point::at("Z", 0)));
        assert_eq!(
            top.image(&Point::at("Z", 0)).unwrap(),
            Some(Point::inf("Y"))
        );
        let local = local_witness(&t, &f, 2, &Point::at("X", 0), 64).unwrap();
        assert_eq!(local.neighbourhood, Subset::point(&Point::at("X", 0)));
        assert_eq!(local.witness.source, Subset::point(&Point::at("Z", 1)));
        let local = local_witness(&t, &f, 2, &Point::inf("X"), 64).unwrap();
        assert_eq!(local.neighbourhood, tail_neighbourhood("X", 0));
        let pb = pi_base(&t, &f, &k, 64).unwrap();
        assert_eq!((pb.level, pb.set), (2, Subset::point(&Point::at("X", 0))));
        let onto = check_onto_at_m(&t, &q(3, 5)).unwrap();
        assert!(!onto.is_ok());
    }

    #[test]
    fn identity_fast_path() {
        let k = gallery::ex52().domain().clone();
        let id = gallery::identity(&k);
        let (f, w) = surjection_witness(&id, &int(1)).unwrap();
        assert_eq!(f.p, 1);
        assert_eq!(w.target, Subset::whole(&k));
        assert_eq!(w.source, Subset::whole(&k));
        let pb = pi_base(&id, &f, &tail_neighbourhood("Y", 3), 64).unwrap();
        assert_eq!(pb.set, tail_neighbourhood("Y", 3));
    }
}
