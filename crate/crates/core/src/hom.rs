//! Intertwiner spaces `Hom_H(pi, rho)` and steerable filter-bank assembly.
//!
//! A filter bank intertwines the filter-space representation `pi` of the
//! input fiber with the output fiber representation `rho`: it satisfies
//! `rho(h) Psi = Psi pi(h)` for every stabilizer element. The basis of
//! that space is the right null space of the stacked generator
//! constraints, computed by SVD; generator-only constraints are then
//! validated against the whole group.

use crate::error::{Error, Result};
use crate::linalg::{null_space, Mat};
use crate::rep::{IrrepTable, Representation, TypeVector};

/// Relative singular-value cutoff for the null space.
const NULL_TOL: f64 = 1e-8;
/// Absolute residual allowed when validating basis elements on the group.
const VALIDATE_TOL: f64 = 1e-9;

/// Orthonormal basis of `Hom_H(pi, rho)`, stored as `dim(rho) x dim(pi)`
/// matrices.
pub struct IntertwinerBasis {
    pub pi_dim: usize,
    pub rho_dim: usize,
    pub basis: Vec<Mat>,
}

impl IntertwinerBasis {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

/// Computes a basis of the intertwiner space between `pi` and `rho`.
///
/// The constraints are built from the group's generators only; every
/// basis element is afterwards checked against all elements, and any
/// violation is a hard error rather than a warning. An empty basis is a
/// valid result.
pub fn intertwiner_basis(pi: &Representation, rho: &Representation) -> Result<IntertwinerBasis> {
    let group = pi.group();
    if !group.same_context(rho.group()) {
        return Err(Error::ContextMismatch(
            "intertwiner across different groups".into(),
        ));
    }
    let n = pi.dim;
    let e = rho.dim;
    let unknowns = e * n;

    let gens: Vec<usize> = group.generators.clone();
    let basis_vecs: Vec<Vec<f64>> = if gens.is_empty() {
        // trivial group: every linear map intertwines
        (0..unknowns)
            .map(|i| {
                let mut v = vec![0.0; unknowns];
                v[i] = 1.0;
                v
            })
            .collect()
    } else {
        // vec(B) row-major; rho(h) B - B pi(h) = 0 becomes
        // (rho(h) (x) I - I (x) pi(h)^T) vec(B) = 0
        let eye_n = Mat::identity(n);
        let eye_e = Mat::identity(e);
        let mut stacked = Mat::zeros(gens.len() * unknowns, unknowns);
        for (gi, &h) in gens.iter().enumerate() {
            let lhs = rho.mat(h).kron(&eye_n);
            let rhs = eye_e.kron(&pi.mat(h).transpose());
            let row0 = gi * unknowns;
            for r in 0..unknowns {
                for c in 0..unknowns {
                    stacked.set(row0 + r, c, lhs.at(r, c) - rhs.at(r, c));
                }
            }
        }
        null_space(&stacked, NULL_TOL)
    };

    let mut basis = Vec::with_capacity(basis_vecs.len());
    for v in basis_vecs {
        let mut b = Mat::from_fn(e, n, |r, c| v[r * n + c]);
        // fix the overall sign so the first significant entry is positive
        if let Some(first) = b.data().iter().find(|x| x.abs() > 1e-9) {
            if *first < 0.0 {
                b = b.scaled(-1.0);
            }
        }
        basis.push(b);
    }

    // generator constraints suffice mathematically; failure here means a
    // broken table, so it is fatal
    for b in &basis {
        for h in 0..group.order {
            let lhs = rho.mat(h).matmul(b);
            let rhs = b.matmul(pi.mat(h));
            let diff = lhs.max_abs_diff(&rhs);
            if diff > VALIDATE_TOL {
                return Err(Error::InconsistentRepresentation(format!(
                    "intertwiner basis violates the constraint at {} by {diff:e}",
                    group.element_labels[h]
                )));
            }
        }
    }
    Ok(IntertwinerBasis {
        pi_dim: n,
        rho_dim: e,
        basis,
    })
}

/// `dim Hom` from type vectors: `sum_i m_i m_i' s_i`, where `s_i` is the
/// endomorphism dimension of the i-th irrep (1 for every absolutely
/// irreducible entry).
pub fn dim_hom(ta: &TypeVector, tb: &TypeVector, table: &IrrepTable) -> usize {
    ta.0.iter()
        .zip(&tb.0)
        .zip(&table.endo_dims)
        .map(|((a, b), s)| a * b * s)
        .sum()
}

/// `dim Hom` straight from characters: `<chi_pi, chi_rho>`. Valid for any
/// real representations of the same group, no irrep table needed.
pub fn dim_hom_from_characters(pi: &Representation, rho: &Representation) -> Result<usize> {
    if !pi.group().same_context(rho.group()) {
        return Err(Error::ContextMismatch(
            "characters across different groups".into(),
        ));
    }
    let order = pi.group().order as f64;
    let a = pi.character();
    let b = rho.character();
    let raw: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / order;
    let rounded = raw.round();
    if (raw - rounded).abs() > 1e-6 || rounded < 0.0 {
        return Err(Error::InconsistentRepresentation(format!(
            "non-integer intertwiner dimension {raw}"
        )));
    }
    Ok(rounded as usize)
}

/// Parameter efficiency `mu = dim(pi) dim(rho) / dim Hom(pi, rho)`.
pub fn parameter_efficiency(pi_dim: usize, rho_dim: usize, hom_dim: usize) -> Result<f64> {
    if hom_dim == 0 {
        return Err(Error::UndefinedEfficiency);
    }
    Ok((pi_dim * rho_dim) as f64 / hom_dim as f64)
}

// ---------------------------------------------------------------------------
// filter banks
// ---------------------------------------------------------------------------

/// Dense convolution kernel of shape `K' x K x s^n`.
#[derive(Clone)]
pub struct PlanarKernel {
    pub out_channels: usize,
    pub in_channels: usize,
    pub window: usize,
    pub spatial_dim: usize,
    data: Vec<f64>,
}

impl PlanarKernel {
    pub fn zeros(
        out_channels: usize,
        in_channels: usize,
        window: usize,
        spatial_dim: usize,
    ) -> Self {
        let cells = window.pow(spatial_dim as u32);
        PlanarKernel {
            out_channels,
            in_channels,
            window,
            spatial_dim,
            data: vec![0.0; out_channels * in_channels * cells],
        }
    }

    pub fn cells(&self) -> usize {
        self.window.pow(self.spatial_dim as u32)
    }

    #[inline]
    pub fn at(&self, out_c: usize, in_c: usize, cell: usize) -> f64 {
        self.data[(out_c * self.in_channels + in_c) * self.cells() + cell]
    }

    #[inline]
    pub fn set(&mut self, out_c: usize, in_c: usize, cell: usize, v: f64) {
        let cells = self.cells();
        self.data[(out_c * self.in_channels + in_c) * cells + cell] = v;
    }

    #[inline]
    pub fn add(&mut self, out_c: usize, in_c: usize, cell: usize, v: f64) {
        let cells = self.cells();
        self.data[(out_c * self.in_channels + in_c) * cells + cell] += v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Flattens to the `K' x (cells * K)` intertwiner matrix, cell-major
    /// like the filter-space representation.
    pub fn as_constraint_matrix(&self) -> Mat {
        let cells = self.cells();
        Mat::from_fn(self.out_channels, cells * self.in_channels, |r, col| {
            let cell = col / self.in_channels;
            let k = col % self.in_channels;
            self.at(r, k, cell)
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Channel layout of a fiber as (capsule dimension, multiplicity) runs.
#[derive(Clone, Debug)]
pub struct FiberLayoutEntry {
    pub dim: usize,
    pub mult: usize,
}

/// Shapes needed to assemble a filter bank, independent of capsules.
#[derive(Clone, Debug)]
pub struct BankLayout {
    pub window: usize,
    pub spatial_dim: usize,
    pub input: Vec<FiberLayoutEntry>,
    pub output: Vec<FiberLayoutEntry>,
}

impl BankLayout {
    pub fn in_channels(&self) -> usize {
        self.input.iter().map(|e| e.dim * e.mult).sum()
    }

    pub fn out_channels(&self) -> usize {
        self.output.iter().map(|e| e.dim * e.mult).sum()
    }
}

/// Learnable coefficients: one matrix per capsule pair `(i, j)` of shape
/// `dim Hom(pi_i, rho_j) x (m_i * n_j)`; column `a * n_j + b` feeds input
/// copy `a` and output copy `b`.
pub struct FilterBankParams {
    pub blocks: Vec<Vec<Mat>>,
}

/// A kernel tensor assembled from intertwiner bases; satisfies the
/// equivariance constraint by construction.
pub struct AssembledFilterBank {
    pub kernel: PlanarKernel,
    pub provenance: u64,
}

/// Assembles the superblock kernel `K' x K x s^n` from per-pair bases and
/// parameters. Equivalent capsules sit adjacent: channel order within the
/// fiber is capsule-copy major, capsule-channel minor.
pub fn assemble(
    layout: &BankLayout,
    bases: &[Vec<IntertwinerBasis>],
    params: &FilterBankParams,
    provenance: u64,
) -> Result<AssembledFilterBank> {
    let cells = layout.window.pow(layout.spatial_dim as u32);
    let k_in = layout.in_channels();
    let k_out = layout.out_channels();
    if bases.len() != layout.input.len() || params.blocks.len() != layout.input.len() {
        return Err(Error::ShapeMismatch("bank bases/params rows".into()));
    }
    let mut kernel = PlanarKernel::zeros(k_out, k_in, layout.window, layout.spatial_dim);

    let mut in_off = 0usize;
    for (i, ie) in layout.input.iter().enumerate() {
        if bases[i].len() != layout.output.len() || params.blocks[i].len() != layout.output.len() {
            return Err(Error::ShapeMismatch("bank bases/params columns".into()));
        }
        let mut out_off = 0usize;
        for (j, oe) in layout.output.iter().enumerate() {
            let basis = &bases[i][j];
            let phi = &params.blocks[i][j];
            if basis.pi_dim != cells * ie.dim || basis.rho_dim != oe.dim {
                return Err(Error::ShapeMismatch(format!(
                    "basis ({i},{j}) has shape {}x{}, expected {}x{}",
                    basis.rho_dim,
                    basis.pi_dim,
                    oe.dim,
                    cells * ie.dim
                )));
            }
            if phi.rows() != basis.dim() || phi.cols() != ie.mult * oe.mult {
                return Err(Error::ShapeMismatch(format!(
                    "parameter block ({i},{j}) has shape {}x{}, expected {}x{}",
                    phi.rows(),
                    phi.cols(),
                    basis.dim(),
                    ie.mult * oe.mult
                )));
            }
            for a in 0..ie.mult {
                for b in 0..oe.mult {
                    let col = a * oe.mult + b;
                    for (p, bmat) in basis.basis.iter().enumerate() {
                        let w = phi.at(p, col);
                        if w == 0.0 {
                            continue;
                        }
                        for cj in 0..oe.dim {
                            for cell in 0..cells {
                                for ci in 0..ie.dim {
                                    kernel.add(
                                        out_off + b * oe.dim + cj,
                                        in_off + a * ie.dim + ci,
                                        cell,
                                        w * bmat.at(cj, cell * ie.dim + ci),
                                    );
                                }
                            }
                        }
                    }
                }
            }
            out_off += oe.dim * oe.mult;
        }
        in_off += ie.dim * ie.mult;
    }
    Ok(AssembledFilterBank { kernel, provenance })
}

/// Largest relative violation of `rho(h) Psi = Psi pi(h)` over the group,
/// with `pi` the filter-space representation of the full input fiber and
/// `rho` the full output fiber representation.
pub fn constraint_residual(
    kernel: &PlanarKernel,
    pi: &Representation,
    rho: &Representation,
) -> f64 {
    let psi = kernel.as_constraint_matrix();
    let scale = psi.max_abs().max(1e-30);
    let mut worst = 0.0f64;
    for h in 0..pi.group().order {
        let lhs = rho.mat(h).matmul(&psi);
        let rhs = psi.matmul(pi.mat(h));
        worst = worst.max(lhs.max_abs_diff(&rhs));
    }
    worst / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::StabilizerGroup;
    use crate::rep::{multiplicity, IrrepTable, Representation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn g(name: &str) -> Arc<StabilizerGroup> {
        StabilizerGroup::build(name).unwrap()
    }

    fn pi0(group: &Arc<StabilizerGroup>, s: usize) -> Representation {
        Representation::filter_space(s, &Representation::trivial(group.clone())).unwrap()
    }

    fn rep_of_type(group: &str, mults: &[usize]) -> Representation {
        let group = g(group);
        let table = IrrepTable::for_group(&group).unwrap();
        let parts: Vec<(&Representation, usize)> = table
            .irreps
            .iter()
            .zip(mults)
            .map(|(r, &m)| (r, m))
            .collect();
        Representation::direct_sum(&parts).unwrap()
    }

    #[test]
    fn schur_same_irrep_gives_scalars() {
        let d4 = g("D4");
        let table = IrrepTable::for_group(&d4).unwrap();
        for irrep in &table.irreps {
            let basis = intertwiner_basis(irrep, irrep).unwrap();
            assert_eq!(basis.dim(), 1, "{}", irrep.basis_label);
        }
        // one-dimensional case: the basis is exactly {[1]}
        let a1 = &table.irreps[0];
        let basis = intertwiner_basis(a1, a1).unwrap();
        assert!((basis.basis[0].at(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn schur_distinct_irreps_give_zero() {
        let d4 = g("D4");
        let table = IrrepTable::for_group(&d4).unwrap();
        let a1 = table.irrep_index("A1").unwrap();
        let b1 = table.irrep_index("B1").unwrap();
        let basis = intertwiner_basis(&table.irreps[a1], &table.irreps[b1]).unwrap();
        assert_eq!(basis.dim(), 0);
    }

    #[test]
    fn c4_rotation_irrep_has_two_self_intertwiners() {
        let c4 = g("C4");
        let table = IrrepTable::for_group(&c4).unwrap();
        let e = table.irrep_index("E").unwrap();
        let basis = intertwiner_basis(&table.irreps[e], &table.irreps[e]).unwrap();
        assert_eq!(basis.dim(), 2);
        assert_eq!(
            dim_hom_from_characters(&table.irreps[e], &table.irreps[e]).unwrap(),
            2
        );
    }

    #[test]
    fn d4_worked_example_dimension_ten() {
        let d4 = g("D4");
        let table = IrrepTable::for_group(&d4).unwrap();
        let pi = pi0(&d4, 3);
        let rho = rep_of_type("D4", &[2, 1, 1, 1, 1]);
        assert_eq!(rho.dim, 7);

        let basis = intertwiner_basis(&pi, &rho).unwrap();
        assert_eq!(basis.dim(), 10);
        assert_eq!(dim_hom_from_characters(&pi, &rho).unwrap(), 10);

        let ta = multiplicity(&pi, &table).unwrap();
        let tb = multiplicity(&rho, &table).unwrap();
        assert_eq!(dim_hom(&ta, &tb, &table), 10);
    }

    #[test]
    fn dim_hom_of_zero_type_is_zero() {
        let d4 = g("D4");
        let table = IrrepTable::for_group(&d4).unwrap();
        let ta = TypeVector(vec![3, 0, 1, 1, 2]);
        let tb = TypeVector(vec![0, 0, 0, 0, 0]);
        assert_eq!(dim_hom(&ta, &tb, &table), 0);
    }

    #[test]
    fn regular_to_regular_is_unconstrained_gcnn_count() {
        // filter space with a regular fiber against a regular output over
        // D4: dim Hom = s^2 |H| = 72, the free G-CNN filter count
        let d4 = g("D4");
        let reg = Representation::regular(d4.clone());
        let pi = Representation::filter_space(3, &reg).unwrap();
        let basis = intertwiner_basis(&pi, &reg).unwrap();
        assert_eq!(basis.dim(), 72);
        assert_eq!(dim_hom_from_characters(&pi, &reg).unwrap(), 72);
        let mu = parameter_efficiency(pi.dim, reg.dim, basis.dim()).unwrap();
        assert_eq!(mu, 8.0);
    }

    #[test]
    fn efficiency_examples() {
        assert_eq!(parameter_efficiency(1, 1, 1).unwrap(), 1.0);
        assert_eq!(parameter_efficiency(9, 7, 10).unwrap(), 6.3);
        assert!(matches!(
            parameter_efficiency(9, 7, 0),
            Err(Error::UndefinedEfficiency)
        ));
    }

    #[test]
    fn basis_is_orthonormal_and_projector_fixed() {
        let d4 = g("D4");
        let pi = pi0(&d4, 3);
        let rho = rep_of_type("D4", &[2, 1, 1, 1, 1]);
        let basis = intertwiner_basis(&pi, &rho).unwrap();
        for (i, a) in basis.basis.iter().enumerate() {
            for (j, b) in basis.basis.iter().enumerate() {
                let dot = a.frob_dot(b);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-9);
            }
        }
        // averaging projector B -> (1/|H|) sum_h rho(h)^-1 B pi(h) fixes the basis
        let order = d4.order;
        for b in &basis.basis {
            let mut acc = Mat::zeros(b.rows(), b.cols());
            for h in 0..order {
                let hinv = d4.inv(h);
                let term = rho.mat(hinv).matmul(b).matmul(pi.mat(h));
                acc = acc.add(&term);
            }
            acc = acc.scaled(1.0 / order as f64);
            assert!(acc.max_abs_diff(b) < 1e-9);
        }
    }

    #[test]
    fn assembly_matches_selected_basis_element() {
        let d4 = g("D4");
        let triv = Representation::trivial(d4.clone());
        let pi = pi0(&d4, 3);
        let rho = rep_of_type("D4", &[2, 1, 1, 1, 1]);
        let basis = intertwiner_basis(&pi, &rho).unwrap();
        let layout = BankLayout {
            window: 3,
            spatial_dim: 2,
            input: vec![FiberLayoutEntry { dim: 1, mult: 1 }],
            output: vec![FiberLayoutEntry { dim: 7, mult: 1 }],
        };

        // zero parameters give the zero kernel
        let zero = FilterBankParams {
            blocks: vec![vec![Mat::zeros(basis.dim(), 1)]],
        };
        let bank = assemble(
            &layout,
            &[vec![intertwiner_basis(&pi, &rho).unwrap()]],
            &zero,
            0,
        )
        .unwrap();
        assert_eq!(bank.kernel.max_abs(), 0.0);

        // a unit vector selects one basis element
        for k in [0usize, 3, 9] {
            let mut phi = Mat::zeros(basis.dim(), 1);
            phi.set(k, 0, 1.0);
            let bank = assemble(
                &layout,
                &[vec![intertwiner_basis(&pi, &rho).unwrap()]],
                &FilterBankParams {
                    blocks: vec![vec![phi]],
                },
                0,
            )
            .unwrap();
            let psi = bank.kernel.as_constraint_matrix();
            assert!(psi.max_abs_diff(&basis.basis[k]) < 1e-12);
        }
        let _ = triv;
    }

    #[test]
    fn assembled_bank_satisfies_the_constraint() {
        let d4 = g("D4");
        let pi = pi0(&d4, 3);
        let rho = rep_of_type("D4", &[2, 1, 1, 1, 1]);
        let basis = intertwiner_basis(&pi, &rho).unwrap();
        assert_eq!(basis.dim(), 10);
        let layout = BankLayout {
            window: 3,
            spatial_dim: 2,
            input: vec![FiberLayoutEntry { dim: 1, mult: 1 }],
            output: vec![FiberLayoutEntry { dim: 7, mult: 1 }],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let phi = Mat::from_fn(10, 1, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let bank = assemble(
                &layout,
                &[vec![intertwiner_basis(&pi, &rho).unwrap()]],
                &FilterBankParams {
                    blocks: vec![vec![phi]],
                },
                0,
            )
            .unwrap();
            assert_eq!(bank.kernel.out_channels, 7);
            assert_eq!(bank.kernel.in_channels, 1);
            assert!(constraint_residual(&bank.kernel, &pi, &rho) < 1e-9);
        }
    }

    #[test]
    fn assembly_is_linear_in_parameters() {
        let d4 = g("D4");
        let pi = pi0(&d4, 3);
        let rho = rep_of_type("D4", &[2, 1, 1, 1, 1]);
        let layout = BankLayout {
            window: 3,
            spatial_dim: 2,
            input: vec![FiberLayoutEntry { dim: 1, mult: 1 }],
            output: vec![FiberLayoutEntry { dim: 7, mult: 1 }],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p1 = Mat::from_fn(10, 1, |_, _| rng.random::<f64>() - 0.5);
        let p2 = Mat::from_fn(10, 1, |_, _| rng.random::<f64>() - 0.5);
        let (alpha, beta) = (0.75, -1.25);
        let combo = Mat::from_fn(10, 1, |r, c| alpha * p1.at(r, c) + beta * p2.at(r, c));

        let bank = |phi: Mat| {
            assemble(
                &layout,
                &[vec![intertwiner_basis(&pi, &rho).unwrap()]],
                &FilterBankParams {
                    blocks: vec![vec![phi]],
                },
                0,
            )
            .unwrap()
            .kernel
        };
        let k1 = bank(p1);
        let k2 = bank(p2);
        let kc = bank(combo);
        for i in 0..kc.data().len() {
            let expect = alpha * k1.data()[i] + beta * k2.data()[i];
            assert!((kc.data()[i] - expect).abs() < 1e-12);
        }
    }
}
