use proptest::prelude::*;

use lshlab_core::hash::{
    bit_sampling_family, exact_sensitivity, minhash_family, parity_family, random_table_family, trivial_family,
    FamilyDescriptor, HashFamily, HashFunction, Rho,
};
use lshlab_core::index::{IndexParams, NNIndex};
use lshlab_core::sampling::{jaccard_distance, mc_stability};
use lshlab_core::spectral::{family_k, family_spectrum, stability, SpectrumMode};
use lshlab_core::Point;

fn point_strategy(d: usize) -> impl Strategy<Value = Point> {
    proptest::collection::vec(any::<bool>(), d).prop_map(|bits| Point::from_bits(&bits).unwrap())
}

fn permutations(n: usize) -> Vec<Vec<u32>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, (n - 1) as u32);
            out.push(q);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn powering_multiplies_collision_probabilities(
        d in 2usize..=6,
        labels in 2u64..=3,
        functions in 1usize..=3,
        seed in any::<u64>(),
        k in 1usize..=3,
        xs in proptest::collection::vec(any::<bool>(), 6),
        ys in proptest::collection::vec(any::<bool>(), 6),
    ) {
        let base = random_table_family(d, labels, functions, seed).unwrap();
        let powered = base.power(k).unwrap();
        let x = Point::from_bits(&xs[..d]).unwrap();
        let y = Point::from_bits(&ys[..d]).unwrap();
        let (bh, bt) = base.collision_count(&x, &y).unwrap();
        let (ph, pt) = powered.collision_count(&x, &y).unwrap();
        // exact rational equality: ph / pt == (bh / bt)^k
        prop_assert_eq!(ph as u128 * (bt as u128).pow(k as u32), (bh as u128).pow(k as u32) * pt as u128);
    }

    #[test]
    fn descriptors_round_trip(d in 1usize..=12, order in 1usize..=3, k in 1usize..=3, seed in any::<u64>()) {
        let descriptors = vec![
            FamilyDescriptor::BitSampling { d },
            FamilyDescriptor::Parity { d, order: order.min(d) },
            FamilyDescriptor::MinHash { d },
            FamilyDescriptor::RandomTables { d: d.min(6), labels: 3, functions: 2, seed },
            FamilyDescriptor::Power { base: Box::new(FamilyDescriptor::BitSampling { d }), k },
        ];
        for desc in descriptors {
            let back = FamilyDescriptor::from_json(&desc.to_json()).unwrap();
            prop_assert_eq!(&back, &desc);
            let a = HashFamily::from_descriptor(&desc).unwrap();
            let b = HashFamily::from_descriptor(&back).unwrap();
            prop_assert_eq!(a.sample(seed, 3), b.sample(seed, 3));
        }
    }

    #[test]
    fn index_answers_are_verified_and_capped(
        seed in any::<u64>(),
        points in proptest::collection::vec(point_strategy(24), 1..60),
        query in point_strategy(24),
        k in 1usize..=6,
        tables in 1usize..=6,
    ) {
        let family = bit_sampling_family(24).unwrap();
        let params = IndexParams::new(2.0, 4.0, k, tables, 0.1, seed).unwrap();
        let n = points.len();
        let index = NNIndex::build(points.clone(), &family, params).unwrap();
        prop_assert_eq!(index.stats().entries, n * tables);
        let res = index.query(&query).unwrap();
        prop_assert!(res.candidates_examined <= 3 * tables);
        if let Some(hit) = res.hit {
            prop_assert!(hit.distance <= 4);
            prop_assert_eq!(points[hit.id as usize].distance(&query), hit.distance);
        }
        for (i, p) in points.iter().enumerate().take(5) {
            // a stored point is always found unless the candidate cap runs out first
            let res = index.query(p).unwrap();
            match res.hit {
                Some(hit) => {
                    prop_assert!(hit.distance <= 4);
                    prop_assert!(hit.id as usize == i || points[hit.id as usize].distance(p) <= 4);
                }
                None => prop_assert_eq!(res.candidates_examined, 3 * tables),
            }
        }
    }

    #[test]
    fn stability_is_nonincreasing_in_noise(d in 1usize..=7, labels in 2u64..=5, seed in any::<u64>()) {
        let family = random_table_family(d, labels, 3, seed).unwrap();
        let spectrum = family_spectrum(&family, SpectrumMode::Exact).unwrap();
        let mut prev = stability(&spectrum, 1.0).unwrap();
        prop_assert!((prev - 1.0).abs() < 1e-12);
        for i in (0..10).rev() {
            let s = stability(&spectrum, i as f64 / 10.0).unwrap();
            prop_assert!(s <= prev + 1e-12);
            prev = s;
        }
    }
}

#[test]
fn minhash_collides_with_jaccard_probability() {
    for d in 1..=6usize {
        let perms = permutations(d);
        let functions: Vec<HashFunction> = perms
            .iter()
            .map(|p| HashFunction::minhash_from_permutation(p).unwrap())
            .collect();
        for xi in 0..1u64 << d {
            for yi in 0..1u64 << d {
                let x = Point::from_index(d, xi).unwrap();
                let y = Point::from_index(d, yi).unwrap();
                let hits = functions
                    .iter()
                    .filter(|h| h.evaluate(&x).unwrap() == h.evaluate(&y).unwrap())
                    .count();
                let (inter, union) = x.intersection_union(&y);
                // hits / d! == inter / union, with empty-vs-empty colliding always
                if union == 0 {
                    assert_eq!(hits, perms.len());
                } else {
                    assert_eq!(hits * union, inter * perms.len(), "d={d} x={x} y={y}");
                    assert!((1.0 - hits as f64 / perms.len() as f64 - jaccard_distance(&x, &y)).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn trivial_family_has_q_zero() {
    for d in 2..=8 {
        for r in 1..d {
            let family = trivial_family(d, r).unwrap();
            let profile = exact_sensitivity(&family, r, r + 1).unwrap();
            assert_eq!(profile.q, 0.0);
            assert!(profile.p > 0.0);
            assert!(matches!(profile.rho, Rho::Undefined { .. }));
        }
    }
}

#[test]
fn monte_carlo_matches_exact_stability() {
    let families = [
        bit_sampling_family(10).unwrap(),
        parity_family(8, 2).unwrap(),
        random_table_family(6, 4, 3, 11).unwrap(),
    ];
    for (i, family) in families.iter().enumerate() {
        for t in [0.1, 0.7] {
            let exact = family_k(family, t).unwrap();
            let mc = mc_stability(family, (-t).exp(), 20_000, 100 + i as u64).unwrap();
            assert!(
                mc.agrees_with(exact, 4.0),
                "family {i} t={t}: {} vs {exact}",
                mc.estimate
            );
        }
    }
}

#[test]
fn minhash_monte_carlo_sensitivity() {
    // MinHash has no finite support, so exact enumeration is refused
    let family = minhash_family(40).unwrap();
    assert!(exact_sensitivity(&family, 1, 2).is_err());
    assert!(family.sample(1, 0) != family.sample(1, 1));
}
