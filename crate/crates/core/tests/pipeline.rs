//! Cross-module agreement: symbolic reductions against exact measures, and
//! lattice thresholds against group membership.

use bernstein_workbench::affine_apartment::{Apartment, Point, RootSystemSpec, SystemName, Window};
use bernstein_workbench::convex_combinatorics::{convex_hull, upsilon, SubComplex};
use bernstein_workbench::moy_prasad_lattices::lattice_spec;
use bernstein_workbench::rational::{q, qi, Q};
use bernstein_workbench::sl2_padic_engine::{
    apply_projector, apply_reduced_projector, member_group, random_element, GroupSpec, Level, Mat2, DEFAULT_BUDGET, R,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn a1(m: u32, lo: i64, hi: i64) -> Apartment {
    Apartment::build(RootSystemSpec::new(SystemName::A1, 0).unwrap(), m, Window::ints(1, lo, hi).unwrap()).unwrap()
}

#[test]
fn reduced_projector_matches_full_projector() {
    let apt = a1(1, -5, 5);
    let lv = Level::new(3, 3).unwrap();
    let x = Point(vec![Q::from_integer(0)]);
    for (r, s) in [(0, 1), (1, 1), (0, 2)] {
        let mut seeds: Vec<usize> = upsilon(&apt, &x, qi(s)).unwrap().into_iter().collect();
        seeds.push(apt.vertex_index(&x).unwrap());
        let sigma = convex_hull(&apt, seeds);
        let target = GroupSpec { t: qi(0), r: qi(r + s), strict: true };
        let full = apply_projector(&apt, &sigma, qi(r), &target, &lv, DEFAULT_BUDGET).unwrap();
        let reduced = apply_reduced_projector(&apt, &sigma, qi(r), qi(s), qi(0), &lv, DEFAULT_BUDGET).unwrap();
        assert!(full.same_weights(&reduced), "r={r} s={s}");
        assert_eq!(full.total_mass(), R::from_integer(1));
    }
}

#[test]
fn projector_on_larger_complex_stabilizes() {
    let apt = a1(2, -5, 5);
    let lv = Level::new(2, 3).unwrap();
    let target = GroupSpec { t: q(1, 2), r: qi(1), strict: true };
    let a = apply_projector(&apt, &SubComplex::in_int_box(&apt, 0, 1), qi(1), &target, &lv, DEFAULT_BUDGET).unwrap();
    let b = apply_projector(&apt, &SubComplex::in_int_box(&apt, -1, 2), qi(1), &target, &lv, DEFAULT_BUDGET).unwrap();
    assert!(a.same_weights(&b));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]
    #[test]
    fn group_thresholds_come_from_lattice_thresholds(tn in -8i64..9, rn in 0i64..8, strict: bool, seed: u64) {
        let spec = GroupSpec { t: q(tn, 4), r: q(rn, 4), strict };
        let lat = lattice_spec(&RootSystemSpec::new(SystemName::A1, 0).unwrap(), &Point(vec![spec.t]), spec.r, strict).unwrap();
        let th = spec.thresholds();
        prop_assert_eq!(Some(th.b), lat.threshold(&[1]));
        prop_assert_eq!(Some(th.c), lat.threshold(&[-1]));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_element(&spec, 5, 3, &mut rng);
        prop_assert!(member_group(&g, &spec, 5));
        let outside = Mat2::upper(bernstein_workbench::sl2_padic_engine::p_pow(5, th.b - 1));
        prop_assert!(!member_group(&outside, &spec, 5));
    }
}
