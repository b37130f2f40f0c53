//! Property-based invariants over randomized inputs.

use std::sync::Arc;

use proptest::prelude::*;

use equivar::grid;
use equivar::group::{SemidirectElement, StabilizerGroup};
use equivar::hom::{assemble, intertwiner_basis, BankLayout, FiberLayoutEntry, FilterBankParams};
use equivar::io;
use equivar::linalg::Mat;
use equivar::nn::nonlin::apply_nonlinearity;
use equivar::nn::transform::transform_induced;
use equivar::nn::{Boundary, Capsule, FeatureMap, FiberType, NonlinKind};
use equivar::rep::{multiplicity, IrrepTable, Representation};

fn group(name: &str) -> Arc<StabilizerGroup> {
    StabilizerGroup::build(name).unwrap()
}

fn group_strategy() -> impl Strategy<Value = Arc<StabilizerGroup>> {
    prop_oneof![
        Just(group("C4")),
        Just(group("D4")),
        Just(group("S2")),
        Just(group("S3")),
        Just(group("S4")),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Semidirect composition agrees with the homogeneous matrix product,
    /// inverses invert, and the point action is a group action.
    #[test]
    fn semidirect_matches_matrix_oracle(
        g in group_strategy(),
        ta in proptest::collection::vec(-6i64..=6, 6),
        tb in proptest::collection::vec(-6i64..=6, 6),
        ha in 0usize..24,
        hb in 0usize..24,
        x in proptest::collection::vec(-4i64..=4, 6),
    ) {
        let n = g.n;
        let a = SemidirectElement::new(ta[..n].to_vec(), ha % g.order);
        let b = SemidirectElement::new(tb[..n].to_vec(), hb % g.order);
        let prod = g.compose(&a, &b).unwrap();
        let ma = g.to_homogeneous(&a).unwrap();
        let mb = g.to_homogeneous(&b).unwrap();
        prop_assert_eq!(ma.matmul(&mb), g.to_homogeneous(&prod).unwrap());

        let ainv = g.inverse_element(&a).unwrap();
        prop_assert_eq!(g.compose(&a, &ainv).unwrap(), g.identity_element());

        let x = x[..n].to_vec();
        let via_prod = g.act_on_point(&prod, &x).unwrap();
        let nested = g.act_on_point(&a, &g.act_on_point(&b, &x).unwrap()).unwrap();
        prop_assert_eq!(via_prod, nested);
    }

    /// Element-wise nonlinearities commute exactly with the induced action
    /// on permutation capsules, for integer-valued maps.
    #[test]
    fn relu_commutes_exactly_on_permutation_capsules(
        name in prop_oneof![Just("C4"), Just("D4"), Just("S2"), Just("S3")],
        seed in 0u64..1000,
        h in 0usize..8,
        tx in -3i64..=3,
        ty in -3i64..=3,
    ) {
        let g = group(name);
        let fiber = FiberType::new(vec![(Capsule::regular(g.clone()), 1)]).unwrap();
        let mut f = FeatureMap::zeros(5, fiber, Boundary::Cyclic).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        f.fill_random_integers(&mut rng, -5, 5);
        let mut t = vec![0i64; g.n];
        t[0] = tx;
        if g.n > 1 { t[1] = ty; }
        let u = SemidirectElement::new(t, h % g.order);
        let lhs = apply_nonlinearity(&transform_induced(&f, &u).unwrap(), NonlinKind::Relu, &[]).unwrap();
        let rhs = transform_induced(&apply_nonlinearity(&f, NonlinKind::Relu, &[]).unwrap(), &u).unwrap();
        prop_assert_eq!(lhs.max_abs_diff(&rhs), 0.0);
    }

    /// Assembled banks are linear in the parameters.
    #[test]
    fn assembly_is_linear(
        alpha in -2.0f64..2.0,
        beta in -2.0f64..2.0,
        seed in 0u64..1000,
    ) {
        let d4 = group("D4");
        let pi = Representation::filter_space(3, &Representation::trivial(d4.clone())).unwrap();
        let table = IrrepTable::for_group(&d4).unwrap();
        let rho = Representation::direct_sum(&[(&table.irreps[0], 1), (&table.irreps[4], 1)]).unwrap();
        let basis = intertwiner_basis(&pi, &rho).unwrap();
        let layout = BankLayout {
            window: 3,
            spatial_dim: 2,
            input: vec![FiberLayoutEntry { dim: 1, mult: 1 }],
            output: vec![FiberLayoutEntry { dim: 3, mult: 1 }],
        };
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            Mat::from_fn(basis.dim(), 1, |_, _| rand::Rng::random::<f64>(rng) - 0.5)
        };
        let p1 = draw(&mut rng);
        let p2 = draw(&mut rng);
        let combo = Mat::from_fn(basis.dim(), 1, |r, c| alpha * p1.at(r, c) + beta * p2.at(r, c));
        let run = |phi: Mat| {
            assemble(
                &layout,
                &[vec![intertwiner_basis(&pi, &rho).unwrap()]],
                &FilterBankParams { blocks: vec![vec![phi]] },
                0,
            ).unwrap().kernel
        };
        let (k1, k2, kc) = (run(p1), run(p2), run(combo));
        for i in 0..kc.data().len() {
            let expect = alpha * k1.data()[i] + beta * k2.data()[i];
            prop_assert!((kc.data()[i] - expect).abs() < 1e-12);
        }
    }

    /// Feature-map CSV serialization round-trips bit-exactly for values
    /// that print exactly (the writer uses shortest round-trip floats).
    #[test]
    fn feature_map_csv_round_trip(
        seed in 0u64..1000,
        channels in 1usize..4,
    ) {
        let s2 = group("S2");
        let fiber = FiberType::input(s2, channels);
        let mut f = FeatureMap::zeros(5, fiber.clone(), Boundary::Cyclic).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        f.fill_random(&mut rng);
        let text = io::feature_map_to_csv(&f);
        let back = io::feature_map_from_csv(&text, fiber, Boundary::Cyclic).unwrap();
        prop_assert_eq!(back.max_abs_diff(&f), 0.0);
    }

    /// Multiplicities are additive over direct sums for every bundled
    /// table, including the normalized complex-type entry of C4.
    #[test]
    fn multiplicity_additivity(
        name in prop_oneof![Just("C4"), Just("D4"), Just("S2"), Just("S3")],
        pick in proptest::collection::vec(0usize..5, 3),
    ) {
        let g = group(name);
        let table = IrrepTable::for_group(&g).unwrap();
        let parts: Vec<&Representation> = pick
            .iter()
            .map(|&i| &table.irreps[i % table.len()])
            .collect();
        let a = Representation::direct_sum(&[(parts[0], 1), (parts[1], 1)]).unwrap();
        let b = Representation::direct_sum(&[(parts[2], 1)]).unwrap();
        let ab = Representation::direct_sum(&[(&a, 1), (&b, 1)]).unwrap();
        let ta = multiplicity(&a, &table).unwrap();
        let tb = multiplicity(&b, &table).unwrap();
        let tab = multiplicity(&ab, &table).unwrap();
        for i in 0..table.len() {
            prop_assert_eq!(tab.0[i], ta.0[i] + tb.0[i]);
        }
    }
}

#[test]
fn regular_rep_multiplicities_match_irrep_dims() {
    // m_i * endo_i = dim_i holds for every bundled table; endo is 1
    // everywhere except the rotation irrep of C4
    for name in ["C4", "D4", "S2", "S3"] {
        let g = group(name);
        let table = IrrepTable::for_group(&g).unwrap();
        let reg = Representation::regular(g);
        let tv = multiplicity(&reg, &table).unwrap();
        for i in 0..table.len() {
            assert_eq!(
                tv.0[i] * table.endo_dims[i],
                table.irreps[i].dim,
                "{name} irrep {i}"
            );
        }
    }
    // and literally m_i = dim_i for the absolutely irreducible tables
    for name in ["D4", "S2", "S3"] {
        let g = group(name);
        let table = IrrepTable::for_group(&g).unwrap();
        let tv = multiplicity(&Representation::regular(g), &table).unwrap();
        let dims: Vec<usize> = table.irreps.iter().map(|r| r.dim).collect();
        assert_eq!(tv.0, dims, "{name}");
    }
}

#[test]
fn isotypic_reassembly_round_trips() {
    for name in ["C4", "D4", "S2", "S3"] {
        let g = group(name);
        let table = IrrepTable::for_group(&g).unwrap();
        let p = Representation::filter_space(3, &Representation::trivial(g.clone())).unwrap();
        let dec = equivar::rep::isotypic_decompose(&p, &table).unwrap();
        for h in 0..g.order {
            let back = dec
                .change_of_basis_inv
                .matmul(&dec.block_matrix(&table, h))
                .matmul(&dec.change_of_basis);
            assert!(back.max_abs_diff(p.mat(h)) < 1e-8, "{name} h={h}");
        }
    }
    let _ = grid::window_cells(3, 2);
}
