use super::*;
use crate::algebra::BlockAlgebra;
use crate::cpmap::CpMap;
use crate::error::Error;
use crate::fixtures::{
    example_2_1, fixture_rng, random_extension_fixture, scalar_multiplication,
    split_block_fixture,
};
use crate::modules::ConcreteModule;
use crate::numerics::{c64, CMatrix, Tolerance};

fn tol() -> Tolerance {
    Tolerance::default()
}

#[test]
fn scalar_identity_is_semi_phi_with_zero_margin() {
    let (map, phi) = scalar_multiplication(1.0);
    let report = is_completely_semi_phi(&map, &phi, &tol()).unwrap();
    assert!(report.holds);
    assert!(report.margin.abs() < 1e-12);
}

#[test]
fn doubling_violates_semi_phi() {
    let (map, phi) = scalar_multiplication(2.0);
    let report = is_completely_semi_phi(&map, &phi, &tol()).unwrap();
    assert!(!report.holds);
    assert!((report.margin + 3.0).abs() < 1e-12);
}

#[test]
fn doubling_witness_is_four_against_one() {
    let (map, phi) = scalar_multiplication(2.0);
    let w = semiphi_witness(&map, &phi, &tol()).unwrap();
    assert!((w.lhs - 4.0).abs() < 1e-12);
    assert!((w.rhs - 1.0).abs() < 1e-12);
    assert!((w.reevaluate_gap(&map, &phi).unwrap() - 3.0).abs() < 1e-12);
}

#[test]
fn no_witness_when_inequality_holds() {
    let (map, phi) = scalar_multiplication(0.5);
    assert_eq!(semiphi_witness(&map, &phi, &tol()), Err(Error::NoViolation));
}

#[test]
fn top_corner_is_phi_map_on_f() {
    for n in 1..=3 {
        let ex = example_2_1(n);
        let report = is_phi_map(&ex.map, &ex.phi, &tol()).unwrap();
        assert!(report.holds, "n = {n}");
        assert!(is_nondegenerate(&ex.map, &tol()));
    }
}

#[test]
fn zero_extension_of_corner_is_not_phi_map() {
    let ex = example_2_1(2);
    let report = is_phi_map(&ex.map_on_e, &ex.phi, &tol()).unwrap();
    assert!(!report.holds);
    let fail = report.first_failure.unwrap();
    assert!(fail.deviation > 0.5);
}

#[test]
fn phi_map_rejects_mismatched_dimensions() {
    let ex = example_2_1(2);
    let phi = CpMap::identity(BlockAlgebra::full(2));
    let map = ModuleMap::zero(ex.f.clone(), 3, 2);
    assert!(matches!(
        is_phi_map(&map, &phi, &tol()),
        Err(Error::ShapeMismatch(_))
    ));
}

#[test]
fn degenerate_when_range_misses_a_direction() {
    let e = ConcreteModule::full(BlockAlgebra::full(1), 1);
    let map = ModuleMap::from_fn(e, 1, 2, |x| {
        let mut v = CMatrix::zeros(2, 1);
        v[(0, 0)] = x[(0, 0)];
        v
    })
    .unwrap();
    assert!(!is_nondegenerate(&map, &tol()));
}

#[test]
fn ksgns_of_identity_on_column_space() {
    let e = ConcreteModule::full(BlockAlgebra::full(1), 2);
    let phi = CpMap::identity(BlockAlgebra::full(1));
    let kc = ksgns(&phi, &e, &tol()).unwrap();
    assert_eq!(kc.space_dim(), 2);
    // Φ_φ is an isometry C^2 -> C^2 on the basis vectors.
    let cols = kc.map.range_columns();
    assert!((cols.adjoint() * &cols - CMatrix::identity(2, 2)).norm() < 1e-12);
}

#[test]
fn ksgns_of_zero_map_is_zero_dimensional() {
    let e = ConcreteModule::full(BlockAlgebra::full(2), 1);
    let phi = CpMap::zero(BlockAlgebra::full(2), 3);
    let kc = ksgns(&phi, &e, &tol()).unwrap();
    assert_eq!(kc.space_dim(), 0);
    assert!(kc.map.values().iter().all(|v| v.shape() == (0, 3)));
}

#[test]
fn ksgns_reproduces_phi_on_inner_products() {
    let ex = split_block_fixture(2);
    let kc = ksgns(&ex.phi, &ex.e, &tol()).unwrap();
    for x in ex.e.basis() {
        for y in ex.e.basis() {
            let lhs = kc.evaluate(x).adjoint() * kc.evaluate(y);
            let rhs = ex.phi.apply_matrix(&(x.adjoint() * y));
            assert!((lhs - rhs).norm() < 1e-10);
        }
    }
}

#[test]
fn obstruction_of_corner_example_is_one() {
    let ex = example_2_1(2);
    let report = phi_extension_obstruction(&ex.phi, &ex.f, &ex.e, &tol()).unwrap();
    assert!(!report.vanishes);
    assert!((report.norm - 1.0).abs() < 1e-10);
    assert_eq!(report.complement.dim(), 4);
}

#[test]
fn obstruction_vanishes_when_phi_kills_the_complement_block() {
    let ex = split_block_fixture(2);
    let report = phi_extension_obstruction(&ex.phi, &ex.f, &ex.e, &tol()).unwrap();
    assert!(report.vanishes);
    assert!(report.norm < 1e-12);
}

#[test]
fn obstruction_is_zero_for_full_submodule() {
    let ex = example_2_1(2);
    let report = phi_extension_obstruction(&ex.phi, &ex.e, &ex.e, &tol()).unwrap();
    assert!(report.vanishes);
    assert!(report.complement.is_zero());
}

#[test]
fn scalar_corner_extends_by_zero() {
    let ex = example_2_1(1);
    let result = extend_semi_phi(&ex.map, &ex.e, &ex.phi, &tol()).unwrap();
    assert!(result.phi_prime.max_distance(&ex.map_on_e).unwrap() < 1e-10);
    assert!(result.report.input_is_phi_map);
    assert!(!result.report.obstruction_vanishes);
    assert!(result.report.complement_image_norm.is_none());
    assert!(result.report.s0_norm <= 1.0 + 1e-9);
}

#[test]
fn corner_extension_matches_zero_extension() {
    let ex = example_2_1(3);
    let result = extend_semi_phi(&ex.map, &ex.e, &ex.phi, &tol()).unwrap();
    assert!(result.phi_prime.max_distance(&ex.map_on_e).unwrap() < 1e-9);
    assert!(result.report.semi_phi_holds);
}

#[test]
fn extension_from_whole_module_is_the_map_itself() {
    let ex = split_block_fixture(2);
    let result = extend_semi_phi(&ex.map_on_e, &ex.e, &ex.phi, &tol()).unwrap();
    assert!(result.phi_prime.max_distance(&ex.map_on_e).unwrap() < 1e-10);
    assert!(result.complement.is_zero());
}

#[test]
fn split_block_extension_is_a_phi_map() {
    let ex = split_block_fixture(1);
    let result = extend_semi_phi(&ex.map, &ex.e, &ex.phi, &tol()).unwrap();
    assert!(result.report.obstruction_vanishes);
    assert!(result.report.complement_image_norm.unwrap() < 1e-10);
    assert!(result.report.phi_identity_defect.unwrap() < 1e-10);
    assert!(is_phi_map(&result.phi_prime, &ex.phi, &tol()).unwrap().holds);
}

#[test]
fn extension_refuses_non_semi_phi_input() {
    let (map, phi) = scalar_multiplication(2.0);
    let e = map.domain().clone();
    assert!(matches!(
        extend_semi_phi(&map, &e, &phi, &tol()),
        Err(Error::NotSemiPhi(m)) if m < -2.0
    ));
}

#[test]
fn extension_refuses_non_submodule() {
    let ex = example_2_1(1);
    let f = ex.e.clone();
    let map = ModuleMap::zero(f, 1, 1);
    assert!(matches!(
        extend_semi_phi(&map, &ex.f, &ex.phi, &tol()),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn extension_from_zero_submodule_is_zero() {
    let ex = example_2_1(2);
    let zero = ConcreteModule::zero(ex.e.algebra().clone(), 4);
    let map = ModuleMap::zero(zero, 2, 2);
    let result = extend_semi_phi(&map, &ex.e, &ex.phi, &tol()).unwrap();
    assert!(result.report.empty_submodule);
    assert!(result.phi_prime.value_scale() < 1e-12);
}

#[test]
fn extension_with_zero_phi_is_zero() {
    let ex = example_2_1(2);
    let phi = CpMap::zero(ex.e.algebra().clone(), 2);
    let map = ModuleMap::zero(ex.f.clone(), 2, 2);
    let result = extend_semi_phi(&map, &ex.e, &phi, &tol()).unwrap();
    assert!(result.report.zero_phi);
    assert!(result.phi_prime.value_scale() < 1e-12);
}

#[test]
fn contracted_input_extends_with_contraction() {
    let ex = example_2_1(2);
    let half = ModuleMap::new(
        ex.f.clone(),
        2,
        2,
        ex.map.values().iter().map(|v| v * c64(0.5, 0.0)).collect(),
    )
    .unwrap();
    let result = extend_semi_phi(&half, &ex.e, &ex.phi, &tol()).unwrap();
    assert!((result.report.s0_norm - 0.5).abs() < 1e-10);
    assert!(!result.report.input_is_phi_map);
}

#[test]
fn uniqueness_against_zero_extension() {
    let ex = split_block_fixture(2);
    let result = extend_semi_phi(&ex.map, &ex.e, &ex.phi, &tol()).unwrap();
    assert!(compare_extensions(&ex.map_on_e, &result, &ex.phi, &tol()).unwrap());
}

#[test]
fn perturbed_gamma_fails_restriction_precondition() {
    let ex = split_block_fixture(2);
    let result = extend_semi_phi(&ex.map, &ex.e, &ex.phi, &tol()).unwrap();
    let values = ex
        .map_on_e
        .values()
        .iter()
        .map(|v| v * c64(1.0 + 1e-2, 0.0))
        .collect();
    let gamma = ModuleMap::new(ex.e.clone(), 2, 2, values).unwrap();
    assert!(matches!(
        compare_extensions(&gamma, &result, &ex.phi, &tol()),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn canonical_extension_on_split_blocks() {
    let ex = split_block_fixture(2);
    let canonical = canonical_compacts_extension(&ex.map, &ex.e, &ex.phi, &tol()).unwrap();
    assert!(canonical.max_distance(&ex.map_on_e).unwrap() < 1e-10);
}

#[test]
fn canonical_extension_refuses_nonzero_obstruction() {
    let ex = example_2_1(2);
    assert!(matches!(
        canonical_compacts_extension(&ex.map, &ex.e, &ex.phi, &tol()),
        Err(Error::ObstructionNonzero(n)) if (n - 1.0).abs() < 1e-9
    ));
}

#[test]
fn construct_rejects_domain_outside_e() {
    let ex = example_2_1(1);
    let other = ConcreteModule::full(BlockAlgebra::full(1), 2);
    let bigger = ConcreteModule::new(
        other.algebra().clone(),
        2,
        vec![CMatrix::identity(2, 1)],
    )
    .unwrap();
    let map = ModuleMap::zero(bigger, 1, 1);
    let small_e = ex.f.clone();
    assert!(construct(&map, &small_e, &ex.phi, &tol()).is_ok());
    let map = ModuleMap::zero(ex.e.clone(), 1, 1);
    assert!(matches!(
        construct(&map, &small_e, &ex.phi, &tol()),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn random_fixtures_extend_and_certify() {
    for i in 0..10 {
        let mut rng = fixture_rng(7, i);
        let fx = random_extension_fixture(&mut rng, &tol());
        let result = extend_semi_phi(&fx.map, &fx.e, &fx.phi, &tol()).unwrap();
        let scale = fx.map.value_scale().max(1.0);
        assert!(result.report.restriction_error <= cert_threshold(&tol(), scale));
        assert!(result.report.semi_phi_holds);
    }
}
