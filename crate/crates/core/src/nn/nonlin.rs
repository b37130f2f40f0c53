//! Admissible nonlinearities and their post-activation capsules.
//!
//! Admissibility is structural: element-wise ReLU needs permutation
//! capsules, the concatenated variant needs monomial capsules, and norm
//! nonlinearities need orthogonal ones. Applying a nonlinearity may
//! change the fiber type (CReLU doubles every capsule).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rep::Representation;

use super::{Capsule, CapsuleKind, FeatureMap, FiberType};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinKind {
    Relu,
    CRelu,
    NormRelu,
}

impl NonlinKind {
    pub fn name(&self) -> &'static str {
        match self {
            NonlinKind::Relu => "relu",
            NonlinKind::CRelu => "crelu",
            NonlinKind::NormRelu => "norm_relu",
        }
    }
}

/// Norm output collapses to zero below this radius.
pub const NORM_EPS: f64 = 1e-12;

/// The capsule the nonlinearity's output transforms by, or an
/// admissibility error.
pub fn post_activation_capsule(c: &Capsule, kind: NonlinKind) -> Result<Capsule> {
    let fail = || Error::Inadmissible {
        nonlin: kind.name().into(),
        capsule: c.kind.label(),
    };
    match kind {
        NonlinKind::Relu => {
            if !c.rep.flags.permutation {
                return Err(fail());
            }
            Ok(c.clone())
        }
        NonlinKind::NormRelu => {
            if !c.rep.flags.orthogonal {
                return Err(fail());
            }
            Ok(c.clone())
        }
        NonlinKind::CRelu => {
            if !c.rep.flags.monomial {
                return Err(fail());
            }
            let group = c.group().clone();
            let d = c.dim();
            let mut mats = Vec::with_capacity(group.order);
            for h in 0..group.order {
                let m = c.rep.mat(h);
                let mut out = Mat::zeros(2 * d, 2 * d);
                for i in 0..d {
                    for j in 0..d {
                        let v = m.at(i, j);
                        if v > 0.5 {
                            // positive routing keeps the (+,-) pair order
                            out.set(2 * i, 2 * j, 1.0);
                            out.set(2 * i + 1, 2 * j + 1, 1.0);
                        } else if v < -0.5 {
                            // a sign flip swaps the pair members
                            out.set(2 * i, 2 * j + 1, 1.0);
                            out.set(2 * i + 1, 2 * j, 1.0);
                        }
                    }
                }
                mats.push(out);
            }
            let rep = Representation::new(group, mats, format!("crelu({})", c.rep.basis_label))?;
            debug_assert!(rep.flags.permutation);
            Ok(Capsule {
                kind: CapsuleKind::PostCRelu(Box::new(c.kind.clone())),
                rep,
            })
        }
    }
}

/// Maps a whole fiber type through the nonlinearity.
pub fn post_fiber(fiber: &FiberType, kind: NonlinKind) -> Result<FiberType> {
    let entries = fiber
        .entries
        .iter()
        .map(|(c, m)| Ok((post_activation_capsule(c, kind)?, *m)))
        .collect::<Result<Vec<_>>>()?;
    FiberType::new(entries)
}

/// Applies the nonlinearity. `norm_biases` holds one learned bias per
/// capsule copy and is only read for `NormRelu`.
pub fn apply_nonlinearity(
    f: &FeatureMap,
    kind: NonlinKind,
    norm_biases: &[f64],
) -> Result<FeatureMap> {
    let out_fiber = post_fiber(&f.fiber, kind)?;
    match kind {
        NonlinKind::Relu => {
            let mut out = f.clone();
            for v in out.data_mut() {
                *v = v.max(0.0);
            }
            Ok(out)
        }
        NonlinKind::CRelu => {
            let mut out = FeatureMap::zeros(f.window, out_fiber, f.boundary)?;
            out.approximate = f.approximate;
            let cells = f.cells();
            for k in 0..f.channels() {
                for x in 0..cells {
                    let v = f.at(k, x);
                    out.set(2 * k, x, v.max(0.0));
                    out.set(2 * k + 1, x, (-v).max(0.0));
                }
            }
            Ok(out)
        }
        NonlinKind::NormRelu => {
            let layout = f.fiber.copy_layout();
            if norm_biases.len() != layout.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} norm biases for {} capsule copies",
                    norm_biases.len(),
                    layout.len()
                )));
            }
            let mut out = f.clone();
            let cells = f.cells();
            for (copy, &(_, _, off, d)) in layout.iter().enumerate() {
                let b = norm_biases[copy];
                for x in 0..cells {
                    let r2: f64 = (0..d).map(|c| f.at(off + c, x).powi(2)).sum();
                    let r = r2.sqrt();
                    let scale = if r <= NORM_EPS {
                        0.0
                    } else {
                        (r - b).max(0.0) / r
                    };
                    for c in 0..d {
                        out.set(off + c, x, scale * f.at(off + c, x));
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Reverse-mode step through the nonlinearity. Returns the gradient with
/// respect to the input and, for `NormRelu`, the per-copy bias gradients.
pub fn nonlin_backward(
    input: &FeatureMap,
    dout: &FeatureMap,
    kind: NonlinKind,
    norm_biases: &[f64],
) -> Result<(FeatureMap, Vec<f64>)> {
    let mut din = FeatureMap::zeros(input.window, input.fiber.clone(), input.boundary)?;
    let cells = input.cells();
    match kind {
        NonlinKind::Relu => {
            for k in 0..input.channels() {
                for x in 0..cells {
                    // subgradient 0 at exactly 0
                    if input.at(k, x) > 0.0 {
                        din.set(k, x, dout.at(k, x));
                    }
                }
            }
            Ok((din, Vec::new()))
        }
        NonlinKind::CRelu => {
            for k in 0..input.channels() {
                for x in 0..cells {
                    let v = input.at(k, x);
                    let mut g = 0.0;
                    if v > 0.0 {
                        g += dout.at(2 * k, x);
                    }
                    if -v > 0.0 {
                        g -= dout.at(2 * k + 1, x);
                    }
                    din.set(k, x, g);
                }
            }
            Ok((din, Vec::new()))
        }
        NonlinKind::NormRelu => {
            let layout = input.fiber.copy_layout();
            let mut dbias = vec![0.0; layout.len()];
            for (copy, &(_, _, off, d)) in layout.iter().enumerate() {
                let b = norm_biases[copy];
                for x in 0..cells {
                    let v: Vec<f64> = (0..d).map(|c| input.at(off + c, x)).collect();
                    let r = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                    if r <= NORM_EPS || r - b <= 0.0 {
                        continue;
                    }
                    let g: Vec<f64> = (0..d).map(|c| dout.at(off + c, x)).collect();
                    let vdotg: f64 = v.iter().zip(&g).map(|(a, c)| a * c).sum();
                    // out = (1 - b/r) v
                    for c in 0..d {
                        let grad = (1.0 - b / r) * g[c] + (b / (r * r * r)) * vdotg * v[c];
                        din.set(off + c, x, grad);
                    }
                    dbias[copy] -= vdotg / r;
                }
            }
            Ok((din, dbias))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::StabilizerGroup;
    use crate::nn::{Boundary, Capsule, FiberType};
    use crate::rep::IrrepTable;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn relu_keeps_nonnegative_maps() {
        let s2 = StabilizerGroup::build("S2").unwrap();
        let fiber = FiberType::new(vec![(Capsule::regular(s2), 1)]).unwrap();
        let mut f = FeatureMap::zeros(3, fiber, Boundary::Cyclic).unwrap();
        for (i, v) in f.data_mut().iter_mut().enumerate() {
            *v = i as f64;
        }
        let out = apply_nonlinearity(&f, NonlinKind::Relu, &[]).unwrap();
        assert_eq!(out.max_abs_diff(&f), 0.0);
    }

    #[test]
    fn crelu_splits_signs() {
        let s2 = StabilizerGroup::build("S2").unwrap();
        let fiber = FiberType::input(s2, 1);
        let mut f = FeatureMap::zeros(3, fiber, Boundary::Cyclic).unwrap();
        f.set(0, 0, 3.0);
        f.set(0, 1, -2.0);
        let out = apply_nonlinearity(&f, NonlinKind::CRelu, &[]).unwrap();
        assert_eq!(out.channels(), 2);
        assert_eq!((out.at(0, 0), out.at(1, 0)), (3.0, 0.0));
        assert_eq!((out.at(0, 1), out.at(1, 1)), (0.0, 2.0));
    }

    #[test]
    fn relu_on_sign_irrep_is_inadmissible() {
        let d4 = StabilizerGroup::build("D4").unwrap();
        let table = IrrepTable::for_group(&d4).unwrap();
        let b1 = Capsule::irrep(&table, table.irrep_index("B1").unwrap()).unwrap();
        assert!(matches!(
            post_activation_capsule(&b1, NonlinKind::Relu),
            Err(Error::Inadmissible { .. })
        ));
        // but the concatenated variant is fine: sign matrices are monomial
        assert!(post_activation_capsule(&b1, NonlinKind::CRelu).is_ok());
    }

    #[test]
    fn norm_relu_needs_orthogonal_capsules() {
        let s3 = StabilizerGroup::build("S3").unwrap();
        let table = IrrepTable::for_group(&s3).unwrap();
        let vs = Capsule::irrep(&table, table.irrep_index("Vs").unwrap()).unwrap();
        // the bundled standard-representation basis is not orthogonal
        assert!(post_activation_capsule(&vs, NonlinKind::NormRelu).is_err());
        let reg = Capsule::regular(s3);
        assert!(post_activation_capsule(&reg, NonlinKind::NormRelu).is_ok());
    }

    #[test]
    fn crelu_commutes_with_monomial_capsules_exactly() {
        let d4 = StabilizerGroup::build("D4").unwrap();
        let table = IrrepTable::for_group(&d4).unwrap();
        let e_caps = Capsule::irrep(&table, table.irrep_index("E").unwrap()).unwrap();
        let post = post_activation_capsule(&e_caps, NonlinKind::CRelu).unwrap();
        assert!(post.rep.flags.permutation);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let crelu = |v: &[f64]| -> Vec<f64> {
            v.iter().flat_map(|x| [x.max(0.0), (-x).max(0.0)]).collect()
        };
        for _ in 0..1000 {
            let v: Vec<f64> = (0..2).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let h = rng.random_range(0..8);
            let lhs = crelu(&e_caps.rep.mat(h).mul_vec(&v));
            let rhs = post.rep.mat(h).mul_vec(&crelu(&v));
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn norm_relu_rescales_along_the_input_direction() {
        let d4 = StabilizerGroup::build("D4").unwrap();
        let table = IrrepTable::for_group(&d4).unwrap();
        let e_caps = Capsule::irrep(&table, table.irrep_index("E").unwrap()).unwrap();
        let fiber = FiberType::new(vec![(e_caps, 1)]).unwrap();
        let mut f = FeatureMap::zeros(3, fiber, Boundary::Cyclic).unwrap();
        f.set(0, 0, 3.0);
        f.set(1, 0, 4.0);
        let out = apply_nonlinearity(&f, NonlinKind::NormRelu, &[1.0]).unwrap();
        // r = 5, eta = 4, direction preserved
        assert!((out.at(0, 0) - 3.0 * 4.0 / 5.0).abs() < 1e-12);
        assert!((out.at(1, 0) - 4.0 * 4.0 / 5.0).abs() < 1e-12);
        // below the bias the output vanishes
        let damp = apply_nonlinearity(&f, NonlinKind::NormRelu, &[9.0]).unwrap();
        assert_eq!(damp.at(0, 0), 0.0);
        assert_eq!(damp.at(1, 0), 0.0);
    }

    #[test]
    fn norm_relu_commutes_with_orthogonal_capsules() {
        let d4 = StabilizerGroup::build("D4").unwrap();
        let table = IrrepTable::for_group(&d4).unwrap();
        let e_caps = Capsule::irrep(&table, table.irrep_index("E").unwrap()).unwrap();
        let fiber = FiberType::new(vec![(e_caps.clone(), 1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut f = FeatureMap::zeros(3, fiber.clone(), Boundary::Cyclic).unwrap();
        f.fill_random(&mut rng);
        for h in 0..8 {
            let g = crate::group::SemidirectElement::stabilizer(2, h);
            let tf = crate::nn::transform::transform_induced(&f, &g).unwrap();
            let lhs = apply_nonlinearity(&tf, NonlinKind::NormRelu, &[0.3]).unwrap();
            let rhs = crate::nn::transform::transform_induced(
                &apply_nonlinearity(&f, NonlinKind::NormRelu, &[0.3]).unwrap(),
                &g,
            )
            .unwrap();
            assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }
    }

    #[test]
    fn basis_dependence_with_a_genuine_involution() {
        // conjugating the swap representation by a non-orthogonal basis
        // changes what ReLU does to it
        let s2 = StabilizerGroup::build("S2").unwrap();
        let reg = Representation::regular(s2);
        let a = Mat::from_rows(&[vec![1.0, 1.0], vec![2.0, 1.0]]);
        let conj = reg.conjugated(&a).unwrap();
        let x = vec![-2.0, 5.0];
        let xp = a.inverse().unwrap().mul_vec(&x);
        let relu = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|t| t.max(0.0)).collect() };
        let lhs = relu(reg.mat(1).mul_vec(&x));
        let rhs = relu(conj.mat(1).mul_vec(&xp));
        // same abstract representation, different basis, different output
        assert_ne!(lhs, rhs);
        // and the conjugate really is a homomorphism (sanity)
        assert!(
            conj.mat(1)
                .matmul(conj.mat(1))
                .max_abs_diff(&Mat::identity(2))
                .abs()
                < 1e-12
        );
    }
}
