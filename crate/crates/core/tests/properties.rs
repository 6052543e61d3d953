use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dskp_core::chi::{chi_solution_via_limit, chi_solution_via_recurrence, random_aztec_weights};
use dskp_core::cwgraph::{aztec, aztec_apex, gauge_flip, is_kasteleyn, kasteleyn_orientation, Weights};
use dskp_core::dimer::{ratio_function_y, z_det, z_oriented};
use dskp_core::field::{random_rational, rat, Field, Rational};
use dskp_core::forests::{det_c_identity, quadrangulate_aztec};
use dskp_core::lattice::{evolve_at, ChiVariant, HeightFunction, InitialData, Recurrence};
use dskp_core::limitshape::rho_exact;
use dskp_core::projective::ProjectiveValue as PV;

fn seeded_data(r: i32, seed: u64) -> InitialData<Rational> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    InitialData::from_fn(HeightFunction::flat(r), |_, _| PV::Finite(random_rational(&mut rng, 25, 5)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn y_equals_evolve(seed in any::<u64>(), k in 1usize..=3) {
        let data = seeded_data(k as i32 + 2, seed);
        let g = aztec(k).unwrap();
        let a: Weights<PV<Rational>> =
            g.faces.iter().map(|f| (f.label, data.get(f.label.0, f.label.1).unwrap().clone())).collect();
        let x = evolve_at(&data, Recurrence::Dskp, aztec_apex(k));
        prop_assume!(x.is_ok());
        prop_assert_eq!(ratio_function_y(&g, &a).unwrap(), x.unwrap());
    }

    #[test]
    fn y_is_invariant_under_affine_maps(seed in any::<u64>(), s in 1i64..9, t in -9i64..9) {
        let g = aztec(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Weights<PV<Rational>> = g.faces.iter().map(|f| (f.label, PV::Finite(random_rational(&mut rng, 25, 5)))).collect();
        let map = |x: &PV<Rational>| x.mul(&PV::Finite(rat(s, 1))).unwrap().add(&PV::Finite(rat(t, 1))).unwrap();
        let b: Weights<PV<Rational>> = a.iter().map(|(&v, x)| (v, map(x))).collect();
        prop_assert_eq!(ratio_function_y(&g, &b).unwrap(), map(&ratio_function_y(&g, &a).unwrap()));
    }

    #[test]
    fn gauge_flip_keeps_z_up_to_sign(seed in any::<u64>(), v in 0usize..12) {
        let g = aztec(2).unwrap();
        let phi = kasteleyn_orientation(&g).unwrap();
        let flipped = gauge_flip(&g, &phi, v % g.vertices.len());
        prop_assert!(is_kasteleyn(&g, &flipped));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Weights<Rational> = g.faces.iter().map(|f| (f.label, random_rational(&mut rng, 25, 5))).collect();
        let (z1, z2) = (z_oriented(&g, &a, &phi).unwrap(), z_oriented(&g, &a, &flipped).unwrap());
        prop_assert!(z1 == z2 || z1 == z2.neg());
        let d = z_det(&g, &a).unwrap();
        prop_assert!(z1 == d || z1 == d.neg());
    }

    #[test]
    fn c_identity(seed in any::<u64>(), k in 1usize..=2) {
        let q = quadrangulate_aztec(k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Weights<Rational> = q.faces.iter().map(|f| (f.label, random_rational(&mut rng, 25, 5))).collect();
        let r = det_c_identity(&q, &a).unwrap();
        prop_assert!(r.blocks_match);
        prop_assert!(r.det_k == r.det_c || r.det_k == r.det_c.neg());
    }

    #[test]
    fn rho_is_even_in_each_coordinate(i in -6i32..=6, j in -6i32..=6, k in 0i32..=8, num in 1i64..30) {
        let q = rat(num, 10);
        prop_assume!(num != 10);
        let r = rho_exact(i, j, k, &q).unwrap();
        prop_assert_eq!(&r, &rho_exact(-i, j, k, &q).unwrap());
        prop_assert_eq!(&r, &rho_exact(i, -j, k, &q).unwrap());
        if i.abs() + j.abs() > k || (i + j + k) % 2 != 0 {
            prop_assert!(r.is_zero());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn chi_limit_equals_recurrence(seed in any::<u64>(), which in 0usize..3) {
        let v = [ChiVariant::Chi3, ChiVariant::Chi4, ChiVariant::Chi5][which];
        let a = random_aztec_weights(1, seed).unwrap();
        let x = chi_solution_via_recurrence(v, 1, &a);
        prop_assume!(x.is_ok());
        prop_assert_eq!(chi_solution_via_limit(v, 1, &a).unwrap(), x.unwrap());
    }
}
