//! Regular and quotient capsules over the larger symmetric groups, where
//! no irrep table is bundled: the group law alone carries the layers.

use equivar::group::{SemidirectElement, StabilizerGroup};
use equivar::nn::pool::quotient_pool;
use equivar::nn::transform::transform_induced;
use equivar::nn::{
    Boundary, Capsule, FeatureMap, FiberType, LayerSpec, Network, NetworkSpec, NonlinKind,
    PoolKind,
};
use equivar::verify::verify_network;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn s4_regular_capsule_network_verifies() {
    let s4 = StabilizerGroup::build("S4").unwrap();
    let input = FiberType::input(s4.clone(), 1);
    let reg = FiberType::new(vec![(Capsule::regular(s4.clone()), 1)]).unwrap();
    // pointwise layers keep the intertwiner systems small at |H| = 24
    let spec = NetworkSpec {
        map_window: 3,
        boundary: Boundary::Cyclic,
        layers: vec![
            LayerSpec {
                window: 1,
                in_fiber: input.clone(),
                out_fiber: reg.clone(),
                nonlin: Some(NonlinKind::Relu),
                pool: None,
            },
            LayerSpec {
                window: 1,
                in_fiber: reg.clone(),
                out_fiber: reg,
                nonlin: Some(NonlinKind::Relu),
                pool: Some(PoolKind::FiberMax),
            },
        ],
        n_classes: 2,
    };
    let net = Network::synthesize(spec, input, 2).unwrap();
    let report = verify_network(&net, 5).unwrap();
    assert!(report.passed(), "{:?}", report.checks);
}

#[test]
fn s4_quotient_pooling_over_the_klein_subgroup() {
    let s4 = StabilizerGroup::build("S4").unwrap();
    // V = {e, (12)(34), (13)(24), (14)(23)} is normal in S4
    let klein: Vec<usize> = ["e", "(12)(34)", "(13)(24)", "(14)(23)"]
        .iter()
        .map(|l| s4.element_labels.iter().position(|x| x == l).unwrap())
        .collect();
    let q = s4.cosets(&klein).unwrap();
    assert_eq!(q.len(), 6);
    assert!(q.is_normal(&s4));

    let fiber = FiberType::new(vec![(Capsule::regular(s4.clone()), 1)]).unwrap();
    let mut f = FeatureMap::zeros(3, fiber, Boundary::Cyclic).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    f.fill_random_integers(&mut rng, -9, 9);
    let pooled = quotient_pool(&f, &klein).unwrap();
    assert_eq!(pooled.channels(), 6);
    // exact equivariance on integer data, exhaustive over the stabilizer
    for h in 0..s4.order {
        let g = SemidirectElement::new(vec![1, 0, -1, 0], h);
        let lhs = quotient_pool(&transform_induced(&f, &g).unwrap(), &klein).unwrap();
        let rhs = transform_induced(&pooled, &g).unwrap();
        assert_eq!(lhs.max_abs_diff(&rhs), 0.0, "h={h}");
    }
}
