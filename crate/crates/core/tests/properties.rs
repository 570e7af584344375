use proptest::prelude::*;

use fbl_core::dsl::parse;
use fbl_core::engine::{fbl_norm, moduli_norm};
use fbl_core::expr::LatticeExpr;
use fbl_core::extension::{extension_constant, SubspaceSpec};
use fbl_core::lattice::GeneratorBinding;
use fbl_core::linear_map::LinearMap;
use fbl_core::optimize::OptimizerConfig;
use fbl_core::space::{Exponent, SpaceSpec};

fn exponent() -> impl Strategy<Value = Exponent> {
    prop_oneof![
        Just(Exponent::ONE),
        Just(Exponent::TWO),
        (1.0..5.0f64).prop_map(|r| Exponent::new(r).unwrap()),
        Just(Exponent::Inf),
    ]
}

fn vectors(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0..1.0f64, d), n)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn estimates_are_ordered(r in exponent(), p in exponent(), xs in vectors(3, 3), a in prop::collection::vec(0.0..2.0f64, 3)) {
        let est = moduli_norm(&SpaceSpec::new(r, 3).unwrap(), &xs, &a, p, &OptimizerConfig::quick()).unwrap();
        prop_assert!(est.lower >= 0.0);
        prop_assert!(est.lower <= est.upper * (1.0 + 1e-9) + 1e-12, "{} > {}", est.lower, est.upper);
    }

    #[test]
    fn norm_is_positively_homogeneous(r in exponent(), xs in vectors(2, 2), c in 0.1..10.0f64) {
        let b = GeneratorBinding::new(SpaceSpec::new(r, 2).unwrap(), xs).unwrap();
        let e = parse("max(abs(d0), 2*abs(d1)) - pos(d0 - d1)").unwrap();
        let cfg = OptimizerConfig::quick();
        let base = fbl_norm(&e, &b, Exponent::ONE, &cfg).unwrap();
        let scaled = fbl_norm(&e.clone().scale(c), &b, Exponent::ONE, &cfg).unwrap();
        // both are valid bounds on the same quantity after rescaling
        prop_assert!(scaled.lower <= c * base.upper * (1.0 + 1e-9) + 1e-12);
        prop_assert!(c * base.lower <= scaled.upper * (1.0 + 1e-9) + 1e-12);
        let neg = fbl_norm(&-e, &b, Exponent::ONE, &cfg).unwrap();
        prop_assert!(neg.lower <= base.upper * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn extension_constant_is_at_least_one(r in exponent(), p in prop_oneof![Just(1.0), Just(2.0), Just(f64::INFINITY)], basis in vectors(1, 3), m in vectors(2, 1)) {
        prop_assume!(basis[0].iter().any(|t| t.abs() > 1e-3));
        prop_assume!(m.iter().flatten().any(|t| t.abs() > 1e-3));
        let sub = SubspaceSpec::completed(SpaceSpec::new(r, 3).unwrap(), basis).unwrap();
        let p = Exponent::new(p).unwrap();
        let t = LinearMap::new(m, SpaceSpec::ell(2.0, 1), SpaceSpec::new(p, 2).unwrap()).unwrap();
        let est = extension_constant(&sub, &t, p, &OptimizerConfig::quick()).unwrap();
        prop_assert!(est.lower >= 1.0 - 1e-12);
        prop_assert!(est.upper >= est.lower - 1e-9);
        // a one-dimensional subspace is always 1-complemented by Hahn-Banach
        prop_assert!(est.upper <= 1.0 + 1e-3, "upper {}", est.upper);
    }

    #[test]
    fn zero_expression_has_zero_norm(r in exponent(), xs in vectors(2, 2)) {
        let b = GeneratorBinding::new(SpaceSpec::new(r, 2).unwrap(), xs).unwrap();
        let e = LatticeExpr::gen(0).abs() - LatticeExpr::gen(0).abs();
        let est = fbl_norm(&e, &b, Exponent::TWO, &OptimizerConfig::quick()).unwrap();
        prop_assert!(est.upper.abs() <= 1e-12);
    }
}
