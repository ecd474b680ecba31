use std::sync::Arc;

use ck_embed::constructions::{check_phi_r, phi_r};
use ck_embed::format::{parse, serialize, ProblemFile};
use ck_embed::norms::embedding_constant;
use ck_embed::random::{self, Shape, Signs};
use ck_embed::rational::q;
use ck_embed::reductions::{envelope, normalize_positive};
use ck_embed::setmap::check_usc;
use ck_embed::{
    closed_subspace, BlockKind, Func, IndexSet, Kernel, Meas, Point, Space, Subset, Trace, Q,
};
use num_traits::{One, Signed};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_trace(rng: &mut ChaCha8Rng, kind: &BlockKind) -> Trace {
    match kind {
        BlockKind::Finite(n) => Trace {
            indices: IndexSet::finite((0..*n).filter(|_| rng.gen_bool(0.5))),
            inf: false,
        },
        BlockKind::Seq => {
            let start = rng.gen_range(0..4);
            let period = rng.gen_range(1..=3);
            let residues: Vec<u64> = (0..period).filter(|_| rng.gen_bool(0.4)).collect();
            let below: Vec<u64> = (0..start).filter(|_| rng.gen_bool(0.5)).collect();
            Trace {
                indices: IndexSet::periodic(start, period, residues, below),
                inf: rng.gen_bool(0.5),
            }
        }
    }
}

fn random_subset(rng: &mut ChaCha8Rng, space: &Space) -> Subset {
    let mut s = Subset::empty();
    for b in space.blocks() {
        s.set_trace(&b.id, random_trace(rng, &b.kind));
    }
    s
}

fn sample(space: &Space) -> Vec<Point> {
    space.points_below(12)
}

fn positive_kernel(rng: &mut ChaCha8Rng) -> Kernel {
    random::random_kernel(rng, &Shape::positive_unital())
}

fn general_kernel(rng: &mut ChaCha8Rng) -> Kernel {
    random::random_kernel(rng, &Shape::general())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closure_is_idempotent_and_monotone(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let space = random::random_space(&mut rng, "x", 3, 3);
        let a = random_subset(&mut rng, &space);
        let b = a.union(&random_subset(&mut rng, &space));
        let ca = a.closure(&space).unwrap();
        prop_assert_eq!(ca.closure(&space).unwrap(), ca.clone());
        prop_assert!(a.is_subset(&ca));
        prop_assert!(ca.is_subset(&b.closure(&space).unwrap()));
    }

    #[test]
    fn clopen_sets_are_fixed_by_closure(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let space = random::random_space(&mut rng, "x", 3, 3);
        let a = random_subset(&mut rng, &space);
        if a.is_clopen() {
            let c = a.complement(&space);
            prop_assert_eq!(a.closure(&space).unwrap(), a.clone());
            prop_assert_eq!(c.closure(&space).unwrap(), c);
        }
        let open = a.interior(&space).unwrap();
        prop_assert!(open.is_open() && open.is_subset(&a));
    }

    #[test]
    fn closed_subspace_embeds_back(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let space = random::random_space(&mut rng, "x", 3, 3);
        let f = random_subset(&mut rng, &space).closure(&space).unwrap();
        prop_assume!(!f.is_empty());
        let (sub, emb) = closed_subspace(&space, &f).unwrap();
        prop_assert!(Space::new(sub.blocks().to_vec()).is_ok());
        for p in sample(&space) {
            match emb.inverse(&p) {
                Some(s) => {
                    prop_assert!(f.contains(&p));
                    prop_assert_eq!(emb.map(&s), Some(p));
                }
                None => prop_assert!(!f.contains(&p)),
            }
        }
        for s in sample(&sub) {
            let p = emb.map(&s).unwrap();
            prop_assert_eq!(emb.inverse(&p), Some(s));
        }
    }

    #[test]
    fn jordan_decomposition_splits_the_variation(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let space = random::random_space(&mut rng, "x", 3, 3);
        let mu = random::random_row(&mut rng, &space, Signs::Mixed).scale(&q(rng.gen_range(1..5), 2));
        let g = random::random_function(&mut rng, &space, -2, 2);
        let j = mu.jordan();
        prop_assert_eq!(&j.norm, &mu.norm());
        prop_assert_eq!(mu.norm(), j.plus.norm() + j.minus.norm());
        prop_assert!(j.plus.atoms().keys().all(|p| !j.minus.atoms().contains_key(p)));
        let value = mu.eval(&g).unwrap();
        prop_assert_eq!(&value, &(j.plus.eval(&g).unwrap() - j.minus.eval(&g).unwrap()));
        prop_assert!(value.abs() <= mu.norm() * g.norm());
    }

    #[test]
    fn adjoint_is_dual_to_apply(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let t = general_kernel(&mut rng);
        let g = random::random_function(&mut rng, t.domain(), -2, 2);
        let mu = random::random_row(&mut rng, t.codomain(), Signs::Mixed);
        let tg = t.apply(&g).unwrap();
        prop_assert_eq!(t.adjoint(&mu).unwrap().eval(&g).unwrap(), mu.eval(&tg).unwrap());
        prop_assert!(tg.norm() <= t.operator_norm() * g.norm());
        for b in t.codomain().seq_blocks() {
            let lim = Point::inf(&b.id);
            prop_assert_eq!(tg.value(&lim), t.row(&lim).unwrap().eval(&g).unwrap());
        }
    }

    #[test]
    fn positive_kernels_are_dominated_by_their_unit_image(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let t = positive_kernel(&mut rng).scale(&q(3, 2));
        let g = random::random_function(&mut rng, t.domain(), -1, 1);
        let (tg, t1) = (t.apply(&g).unwrap(), t.apply(&Func::one(t.domain())).unwrap());
        for y in sample(t.codomain()) {
            prop_assert!(tg.value(&y).abs() <= t1.value(&y) * g.norm());
        }
    }

    #[test]
    fn rows_are_weak_star_continuous(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let t = general_kernel(&mut rng);
        for tpl in t.templates() {
            let lim = t.row(&Point::inf(&tpl.block)).unwrap();
            prop_assert_eq!(tpl.limit(t.domain()).unwrap(), lim.clone());
            let g = random::random_function(&mut rng, t.domain(), -1, 1);
            let k = tpl.effective_start() + g.horizon() + 8;
            let far: Meas = tpl.instantiate(t.domain(), k).unwrap();
            prop_assert_eq!(far.eval(&g).unwrap(), lim.eval(&g).unwrap());
        }
    }

    #[test]
    fn envelope_is_lower_semicontinuous(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let t = general_kernel(&mut rng);
        let env = envelope(&t);
        for y in sample(t.codomain()) {
            prop_assert_eq!(env.value(&y), t.row(&y).unwrap().norm());
        }
        for b in t.codomain().seq_blocks() {
            let at_limit = env.value(&Point::inf(&b.id));
            let far = t.horizon(&b.id) + 6;
            for n in far..far + 6 {
                prop_assert!(at_limit <= env.value(&Point::at(&b.id, n)));
            }
        }
    }

    #[test]
    fn phi_r_shrinks_as_r_grows(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let t = positive_kernel(&mut rng);
        let (low, high) = (phi_r(&t, &q(1, 4)).unwrap(), phi_r(&t, &q(1, 2)).unwrap());
        for y in sample(t.codomain()) {
            prop_assert!(high.value(&y).unwrap().is_subset(&low.value(&y).unwrap()));
        }
    }

    #[test]
    fn usc_maps_restrict_to_usc_maps(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let t = positive_kernel(&mut rng);
        let map = phi_r(&t, &q(1, 3)).unwrap();
        let checked = check_phi_r(&map);
        prop_assert!(checked.is_ok(), "{}", checked);
        let f = random_subset(&mut rng, t.domain()).closure(t.domain()).unwrap();
        let restricted = map.restrict(&f).unwrap();
        let usc = check_usc(&restricted);
        prop_assert!(usc.is_ok(), "{}", usc);
        prop_assert!(map.preimage(&f).unwrap().is_closed());
    }

    #[test]
    fn file_format_round_trips(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let t = general_kernel(&mut rng);
        let text = serialize(&ProblemFile::from_kernel("T", &t));
        let parsed = parse(&text).unwrap();
        prop_assert_eq!(&parsed.kernel().unwrap().kernel, &t);
        prop_assert_eq!(serialize(&parsed), text);
    }

    #[test]
    fn normalization_is_unital_and_positive(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let t = positive_kernel(&mut rng).scale(&q(rng.gen_range(1..4), 3));
        let m = embedding_constant(&t.scale(&t.operator_norm().recip()), 1).unwrap().value;
        if m > Q::from_integer(0.into()) {
            let n = normalize_positive(&t, &m, 1).unwrap();
            prop_assert!(n.kernel.is_unital() && n.kernel.is_positive());
            prop_assert!(n.report.is_ok(), "{}", n.report);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn constant_is_monotone_in_the_window(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let t = random::random_small_kernel(&mut rng, 4);
        let mut previous: Option<Q> = None;
        for window in 0..=2 {
            let est = embedding_constant(&t, window).unwrap();
            prop_assert_eq!(est.witness.norm(), Q::one());
            prop_assert_eq!(t.apply(&est.witness).unwrap().norm(), est.value.clone());
            if let Some(p) = &previous {
                prop_assert!(&est.value <= p, "window {}: {} > {}", window, est.value, p);
            }
            previous = Some(est.value);
        }
    }

    #[test]
    fn constant_scales_with_the_kernel(seed in any::<u64>(), pick in 0usize..3) {
        let mut rng = random::rng(seed);
        let t = random::random_small_kernel(&mut rng, 5);
        let c = [q(-2, 1), q(1, 3), q(3, 2)][pick].clone();
        let scaled = t.scale_by_function(&Func::constant(t.codomain(), c.clone())).unwrap();
        let (m, ms) = (embedding_constant(&t, 1).unwrap().value, embedding_constant(&scaled, 1).unwrap().value);
        prop_assert_eq!(ms, c.abs() * m);
    }
}

#[test]
fn identity_has_constant_one_on_every_window() {
    let space: Arc<Space> = ck_embed::gallery::ex52().domain().clone();
    let id = ck_embed::gallery::identity(&space);
    for window in 0..=2 {
        assert_eq!(embedding_constant(&id, window).unwrap().value, Q::one());
    }
}
