//! Representations of stabilizer groups as explicit matrix families.
//!
//! Everything is real-valued. The bundled irrep tables follow the printed
//! dihedral and symmetric-group tables; the `S_3` standard representation
//! is realized in the basis `(e1 - e3, e1 - e2)`, which reproduces the
//! printed columns for `(12)`, `(23)` and the 3-cycles while keeping the
//! family an actual homomorphism.
//!
//! One wrinkle worth knowing about: the two-dimensional rotation irrep of
//! `C4` is irreducible over the reals but has a two-dimensional
//! endomorphism algebra (all rotations commute with it). Multiplicities
//! are therefore normalized by `<chi_i, chi_i>`, and intertwiner-space
//! dimensions carry that factor; for `D4`, `S2` and `S3` every irrep is
//! absolutely irreducible and the factor is 1 everywhere.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid;
use crate::group::{QuotientSpace, StabilizerGroup};
use crate::linalg::{Mat, SpanTracker};

/// Structural properties of a matrix family, verified entry-wise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RepFlags {
    pub permutation: bool,
    pub monomial: bool,
    pub orthogonal: bool,
}

/// A representation: one real matrix per group element.
#[derive(Clone)]
pub struct Representation {
    group: Arc<StabilizerGroup>,
    pub dim: usize,
    mats: Vec<Mat>,
    pub flags: RepFlags,
    pub basis_label: String,
}

const HOM_TOL: f64 = 1e-10;

impl Representation {
    /// Wraps a matrix family, verifying the identity and homomorphism laws
    /// and deriving the structural flags.
    pub fn new(
        group: Arc<StabilizerGroup>,
        mats: Vec<Mat>,
        basis_label: impl Into<String>,
    ) -> Result<Self> {
        if mats.len() != group.order {
            return Err(Error::InconsistentRepresentation(format!(
                "expected {} matrices, got {}",
                group.order,
                mats.len()
            )));
        }
        let dim = mats[0].rows();
        for m in &mats {
            if m.rows() != dim || m.cols() != dim {
                return Err(Error::InconsistentRepresentation(
                    "ragged matrix family".into(),
                ));
            }
        }
        if mats[0].max_abs_diff(&Mat::identity(dim)) > HOM_TOL {
            return Err(Error::InconsistentRepresentation(
                "identity element is not mapped to the identity matrix".into(),
            ));
        }
        // exhaustive pair check at desk scale, generator spot check beyond
        let exhaustive = group.order * group.order * dim * dim * dim <= 200_000_000;
        let pairs: Vec<(usize, usize)> = if exhaustive {
            (0..group.order)
                .flat_map(|a| (0..group.order).map(move |b| (a, b)))
                .collect()
        } else {
            group
                .generators
                .iter()
                .flat_map(|&a| (0..group.order).map(move |b| (a, b)))
                .collect()
        };
        for (a, b) in pairs {
            let prod = mats[a].matmul(&mats[b]);
            if prod.max_abs_diff(&mats[group.mul(a, b)]) > HOM_TOL {
                return Err(Error::InconsistentRepresentation(format!(
                    "homomorphism fails at {} * {}",
                    group.element_labels[a], group.element_labels[b]
                )));
            }
        }
        let flags = derive_flags(&mats);
        Ok(Representation {
            group,
            dim,
            mats,
            flags,
            basis_label: basis_label.into(),
        })
    }

    pub fn group(&self) -> &Arc<StabilizerGroup> {
        &self.group
    }

    pub fn mat(&self, h: usize) -> &Mat {
        &self.mats[h]
    }

    /// Per-element traces, indexed like the group's element table.
    pub fn character(&self) -> Vec<f64> {
        self.mats.iter().map(|m| m.trace()).collect()
    }

    /// One-dimensional all-ones representation.
    pub fn trivial(group: Arc<StabilizerGroup>) -> Representation {
        let mats = vec![Mat::identity(1); group.order];
        Representation {
            group,
            dim: 1,
            mats,
            flags: RepFlags {
                permutation: true,
                monomial: true,
                orthogonal: true,
            },
            basis_label: "trivial".into(),
        }
    }

    /// Regular representation: `rho(h) e_g = e_{hg}`.
    pub fn regular(group: Arc<StabilizerGroup>) -> Representation {
        let o = group.order;
        let mats: Vec<Mat> = (0..o)
            .map(|h| {
                let mut m = Mat::zeros(o, o);
                for g in 0..o {
                    m.set(group.mul(h, g), g, 1.0);
                }
                m
            })
            .collect();
        Representation {
            group,
            dim: o,
            mats,
            flags: RepFlags {
                permutation: true,
                monomial: true,
                orthogonal: true,
            },
            basis_label: "regular".into(),
        }
    }

    /// Quotient representation on the left cosets of a subgroup:
    /// `rho(h) e_{gK} = e_{hgK}`. With `K = {e}` this is the regular
    /// representation; with `K = H` it is trivial.
    pub fn quotient(group: Arc<StabilizerGroup>, quotient: &QuotientSpace) -> Representation {
        let d = quotient.len();
        let mats: Vec<Mat> = (0..group.order)
            .map(|h| {
                let mut m = Mat::zeros(d, d);
                for (c, &rep) in quotient.representatives.iter().enumerate() {
                    m.set(quotient.rep_of[group.mul(h, rep)], c, 1.0);
                }
                m
            })
            .collect();
        Representation {
            group,
            dim: d,
            mats,
            flags: RepFlags {
                permutation: true,
                monomial: true,
                orthogonal: true,
            },
            basis_label: "quotient".into(),
        }
    }

    /// Block-diagonal direct sum with multiplicities.
    pub fn direct_sum(parts: &[(&Representation, usize)]) -> Result<Representation> {
        let group = parts
            .first()
            .map(|(r, _)| r.group.clone())
            .ok_or_else(|| Error::InconsistentRepresentation("empty direct sum".into()))?;
        for (r, _) in parts {
            if !r.group.same_context(&group) {
                return Err(Error::ContextMismatch("direct sum across groups".into()));
            }
        }
        let dim: usize = parts.iter().map(|(r, m)| r.dim * m).sum();
        if dim == 0 {
            return Err(Error::InconsistentRepresentation(
                "zero-dimensional direct sum".into(),
            ));
        }
        let mut mats = Vec::with_capacity(group.order);
        for h in 0..group.order {
            let mut m = Mat::zeros(dim, dim);
            let mut off = 0;
            for (r, mult) in parts {
                for _ in 0..*mult {
                    let b = r.mat(h);
                    for i in 0..r.dim {
                        for j in 0..r.dim {
                            m.set(off + i, off + j, b.at(i, j));
                        }
                    }
                    off += r.dim;
                }
            }
            mats.push(m);
        }
        let flags = derive_flags(&mats);
        Ok(Representation {
            group,
            dim,
            mats,
            flags,
            basis_label: "direct_sum".into(),
        })
    }

    /// The representation of `H` on filters over an odd centered window
    /// with fibers transforming by `fiber`: spatial cells are permuted by
    /// `h^{-1}` while every fiber is hit by `fiber(h)`. With the trivial
    /// fiber this is the plain filter-space action `pi_0`.
    ///
    /// Flattening is cell-major: coordinate `(cell, channel)` lives at
    /// index `cell * K + channel`.
    pub fn filter_space(s: usize, fiber: &Representation) -> Result<Representation> {
        grid::check_window(s)?;
        let group = fiber.group.clone();
        let n = group.n;
        let k = fiber.dim;
        let cells = grid::window_cells(s, n);
        let dim = cells.len() * k;
        let mut mats = Vec::with_capacity(group.order);
        for h in 0..group.order {
            let mut m = Mat::zeros(dim, dim);
            let fib = fiber.mat(h);
            for (ci, cell) in cells.iter().enumerate() {
                let moved = group.act_point(h, cell)?;
                let xi = grid::cell_index_checked(&moved, s).ok_or_else(|| {
                    Error::InconsistentRepresentation(
                        "stabilizer moved a window cell outside the window".into(),
                    )
                })?;
                for a in 0..k {
                    for b in 0..k {
                        let v = fib.at(a, b);
                        if v != 0.0 {
                            m.set(xi * k + a, ci * k + b, v);
                        }
                    }
                }
            }
            mats.push(m);
        }
        let flags = derive_flags(&mats);
        Ok(Representation {
            group,
            dim,
            mats,
            flags,
            basis_label: format!("filter{}^{}({})", s, n, fiber.basis_label),
        })
    }

    /// Conjugated copy `A rho A^{-1}` in a new basis.
    pub fn conjugated(&self, a: &Mat) -> Result<Representation> {
        let ainv = a
            .inverse()
            .ok_or_else(|| Error::InconsistentRepresentation("singular change of basis".into()))?;
        let mats: Vec<Mat> = self
            .mats
            .iter()
            .map(|m| a.matmul(m).matmul(&ainv))
            .collect();
        let flags = derive_flags(&mats);
        Ok(Representation {
            group: self.group.clone(),
            dim: self.dim,
            mats,
            flags,
            basis_label: format!("{}@conj", self.basis_label),
        })
    }
}

fn derive_flags(mats: &[Mat]) -> RepFlags {
    let tol = 1e-10;
    let dim = mats[0].rows();
    let mut permutation = true;
    let mut monomial = true;
    let mut orthogonal = true;
    for m in mats {
        if monomial {
            'struct_check: for r in 0..dim {
                let mut nz = 0;
                for c in 0..dim {
                    let v = m.at(r, c);
                    if v.abs() > tol {
                        nz += 1;
                        if (v.abs() - 1.0).abs() > tol {
                            monomial = false;
                            permutation = false;
                            break 'struct_check;
                        }
                        if v < 0.0 {
                            permutation = false;
                        }
                    }
                }
                if nz != 1 {
                    monomial = false;
                    permutation = false;
                    break;
                }
            }
            if monomial {
                for c in 0..dim {
                    let nz = (0..dim).filter(|&r| m.at(r, c).abs() > tol).count();
                    if nz != 1 {
                        monomial = false;
                        permutation = false;
                        break;
                    }
                }
            }
        }
        if orthogonal {
            let gram = m.transpose().matmul(m);
            if gram.max_abs_diff(&Mat::identity(dim)) > tol {
                orthogonal = false;
            }
        }
        if !monomial && !orthogonal {
            break;
        }
    }
    // permutation implies monomial implies orthogonal for exact families;
    // keep the flags consistent even under tolerance quirks
    if permutation {
        monomial = true;
    }
    if monomial {
        orthogonal = true;
    }
    RepFlags {
        permutation,
        monomial,
        orthogonal,
    }
}

// ---------------------------------------------------------------------------
// irrep tables
// ---------------------------------------------------------------------------

/// The bundled irreducible representations of a group, with characters.
pub struct IrrepTable {
    pub group: Arc<StabilizerGroup>,
    pub irreps: Vec<Representation>,
    pub labels: Vec<String>,
    /// Real endomorphism dimension of each irrep (`<chi_i, chi_i>`): 1 for
    /// absolutely irreducible entries, 2 for the rotation irrep of `C4`.
    pub endo_dims: Vec<usize>,
}

impl IrrepTable {
    /// Hardcoded tables for `C4`, `D4`, `S2` and `S3`. Other groups get a
    /// `NoIrrepTable` error; their regular and quotient capsules remain
    /// available.
    pub fn for_group(group: &Arc<StabilizerGroup>) -> Result<IrrepTable> {
        let (labels, raw): (Vec<&str>, Vec<Vec<Mat>>) = match group.name.as_str() {
            "C4" => c4_table(),
            "D4" => d4_table(),
            "S2" => s2_table(),
            "S3" => s3_table(),
            _ => return Err(Error::NoIrrepTable(group.name.clone())),
        };
        let mut irreps = Vec::new();
        for (label, mats) in labels.iter().zip(raw) {
            irreps.push(Representation::new(
                group.clone(),
                mats,
                format!("irrep:{label}"),
            )?);
        }
        let order = group.order as f64;
        let endo_dims: Vec<usize> = irreps
            .iter()
            .map(|r| {
                let chi = r.character();
                let s: f64 = chi.iter().map(|x| x * x).sum::<f64>() / order;
                s.round() as usize
            })
            .collect();
        Ok(IrrepTable {
            group: group.clone(),
            irreps,
            labels: labels.iter().map(|s| s.to_string()).collect(),
            endo_dims,
        })
    }

    pub fn len(&self) -> usize {
        self.irreps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.irreps.is_empty()
    }

    /// Character table rows aligned with `labels`.
    pub fn characters(&self) -> Vec<Vec<f64>> {
        self.irreps.iter().map(|r| r.character()).collect()
    }

    pub fn irrep_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

fn m1(v: f64) -> Mat {
    Mat::from_rows(&[vec![v]])
}

fn m2(rows: [[f64; 2]; 2]) -> Mat {
    Mat::from_rows(&[rows[0].to_vec(), rows[1].to_vec()])
}

fn signs(vals: &[f64]) -> Vec<Mat> {
    vals.iter().map(|&v| m1(v)).collect()
}

fn c4_table() -> (Vec<&'static str>, Vec<Vec<Mat>>) {
    let rot = |k: usize| {
        let (c, s) = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][k];
        m2([[c, -s], [s, c]])
    };
    (
        vec!["A", "B", "E"],
        vec![
            signs(&[1.0, 1.0, 1.0, 1.0]),
            signs(&[1.0, -1.0, 1.0, -1.0]),
            (0..4).map(rot).collect(),
        ],
    )
}

fn d4_table() -> (Vec<&'static str>, Vec<Vec<Mat>>) {
    let rot = |k: usize| {
        let (c, s) = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][k];
        m2([[c, -s], [s, c]])
    };
    let mir = m2([[-1.0, 0.0], [0.0, 1.0]]);
    let mut e_mats: Vec<Mat> = (0..4).map(rot).collect();
    for k in 0..4 {
        e_mats.push(mir.matmul(&rot(k)));
    }
    (
        vec!["A1", "A2", "B1", "B2", "E"],
        vec![
            signs(&[1.0; 8]),
            signs(&[1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0]),
            signs(&[1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0]),
            signs(&[1.0, -1.0, 1.0, -1.0, -1.0, 1.0, -1.0, 1.0]),
            e_mats,
        ],
    )
}

fn s2_table() -> (Vec<&'static str>, Vec<Vec<Mat>>) {
    (
        vec!["id", "sgn"],
        vec![signs(&[1.0, 1.0]), signs(&[1.0, -1.0])],
    )
}

/// Element order e, (12), (13), (23), (123), (132). The standard
/// representation is written in the basis `(e1 - e3, e1 - e2)`.
fn s3_table() -> (Vec<&'static str>, Vec<Vec<Mat>>) {
    let vs = vec![
        m2([[1.0, 0.0], [0.0, 1.0]]),
        m2([[1.0, 0.0], [-1.0, -1.0]]),
        m2([[-1.0, -1.0], [0.0, 1.0]]),
        m2([[0.0, 1.0], [1.0, 0.0]]),
        m2([[0.0, 1.0], [-1.0, -1.0]]),
        m2([[-1.0, -1.0], [1.0, 0.0]]),
    ];
    (
        vec!["id", "sgn", "Vs"],
        vec![
            signs(&[1.0; 6]),
            signs(&[1.0, -1.0, -1.0, -1.0, 1.0, 1.0]),
            vs,
        ],
    )
}

// ---------------------------------------------------------------------------
// multiplicities and the isotypic decomposition
// ---------------------------------------------------------------------------

/// Multiplicity vector aligned with an irrep table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeVector(pub Vec<usize>);

impl TypeVector {
    pub fn dim(&self, table: &IrrepTable) -> usize {
        self.0
            .iter()
            .zip(&table.irreps)
            .map(|(m, r)| m * r.dim)
            .sum()
    }
}

/// Character-formula multiplicities `m_i = <chi_rep, chi_i> / <chi_i, chi_i>`,
/// rounded to integers; a rounding residual above 1e-6 is an error.
pub fn multiplicity(rep: &Representation, table: &IrrepTable) -> Result<TypeVector> {
    if !rep.group().same_context(&table.group) {
        return Err(Error::ContextMismatch(
            "representation and table disagree on group".into(),
        ));
    }
    let order = table.group.order as f64;
    let chi = rep.character();
    let mut mults = Vec::with_capacity(table.len());
    for (irrep, &endo) in table.irreps.iter().zip(&table.endo_dims) {
        let ci = irrep.character();
        let raw: f64 = chi.iter().zip(&ci).map(|(a, b)| a * b).sum::<f64>() / order;
        let normalized = raw / endo as f64;
        let rounded = normalized.round();
        if (normalized - rounded).abs() > 1e-6 || rounded < 0.0 {
            return Err(Error::InconsistentRepresentation(format!(
                "non-integer multiplicity {normalized} for irrep {}",
                irrep.basis_label
            )));
        }
        mults.push(rounded as usize);
    }
    let tv = TypeVector(mults);
    if tv.dim(table) != rep.dim {
        return Err(Error::InconsistentRepresentation(format!(
            "type vector dimension {} does not match representation dimension {}",
            tv.dim(table),
            rep.dim
        )));
    }
    Ok(tv)
}

/// Change of basis together with the block structure it produces.
pub struct IsotypicDecomposition {
    /// `A` with `A rep(h) A^{-1}` block diagonal for every `h`.
    pub change_of_basis: Mat,
    pub change_of_basis_inv: Mat,
    /// `(irrep index, copy index, offset into the block diagonal)`.
    pub block_layout: Vec<(usize, usize, usize)>,
    pub type_vector: TypeVector,
}

impl IsotypicDecomposition {
    /// The block-diagonal matrix the decomposition maps `rep(h)` to.
    pub fn block_matrix(&self, table: &IrrepTable, h: usize) -> Mat {
        let dim: usize = self
            .block_layout
            .iter()
            .map(|&(i, _, _)| table.irreps[i].dim)
            .sum();
        let mut m = Mat::zeros(dim, dim);
        for &(i, _, off) in &self.block_layout {
            let b = table.irreps[i].mat(h);
            for r in 0..b.rows() {
                for c in 0..b.cols() {
                    m.set(off + r, off + c, b.at(r, c));
                }
            }
        }
        m
    }
}

const DECOMP_TOL: f64 = 1e-8;

/// Explicit isotypic decomposition: produces `A` such that
/// `A rep(h) A^{-1}` equals the block-diagonal stack of table matrices,
/// in irrep order with copies adjacent, verified for every element.
///
/// The basis is built from the row-alignment operators
/// `Q_k = (d/|H|) sum_h irrep(h^{-1})[0][k] rep(h)`; applying all `Q_k`
/// to a seed vector from the image of `Q_0` yields one copy whose block
/// equals the table matrices exactly, not merely up to isomorphism.
pub fn isotypic_decompose(
    rep: &Representation,
    table: &IrrepTable,
) -> Result<IsotypicDecomposition> {
    let tv = multiplicity(rep, table)?;
    let group = &table.group;
    let order = group.order;
    let dim = rep.dim;

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(dim);
    let mut layout = Vec::new();
    let mut offset = 0usize;

    for (i, irrep) in table.irreps.iter().enumerate() {
        let m_i = tv.0[i];
        if m_i == 0 {
            continue;
        }
        let d = irrep.dim;
        let scale = d as f64 / order as f64;
        let q: Vec<Mat> = (0..d)
            .map(|k| {
                let mut acc = Mat::zeros(dim, dim);
                for h in 0..order {
                    let w = irrep.mat(group.inv(h)).at(0, k) * scale;
                    if w == 0.0 {
                        continue;
                    }
                    let rm = rep.mat(h);
                    for r in 0..dim {
                        for c in 0..dim {
                            acc.add_at(r, c, w * rm.at(r, c));
                        }
                    }
                }
                acc
            })
            .collect();

        let mut copies: Vec<Vec<Vec<f64>>> = Vec::new();
        let mut tracker = SpanTracker::new(1e-7);
        let try_seed =
            |seed: &[f64], tracker: &mut SpanTracker, copies: &mut Vec<Vec<Vec<f64>>>| {
                if copies.len() == m_i {
                    return;
                }
                let copy: Vec<Vec<f64>> = q.iter().map(|qk| qk.mul_vec(seed)).collect();
                let mut probe = tracker.clone();
                if copy.iter().all(|v| probe.try_add(v)) {
                    *tracker = probe;
                    copies.push(copy);
                }
            };
        for col in 0..dim {
            let seed = q[0].col_vec(col);
            try_seed(&seed, &mut tracker, &mut copies);
            if copies.len() == m_i {
                break;
            }
        }
        if copies.len() < m_i {
            // deterministic random fallback, retried across seeds
            let mut rng = ChaCha8Rng::seed_from_u64(0x150_717C);
            for _ in 0..64 {
                let mut v = vec![0.0; dim];
                for x in &mut v {
                    *x = rng.random::<f64>() - 0.5;
                }
                let seed = q[0].mul_vec(&v);
                try_seed(&seed, &mut tracker, &mut copies);
                if copies.len() == m_i {
                    break;
                }
            }
        }
        if copies.len() < m_i {
            return Err(Error::DecompositionFailed(format!(
                "found {} of {} copies of irrep {}",
                copies.len(),
                m_i,
                table.labels[i]
            )));
        }

        // canonical form: unit leading vector with positive first
        // coordinate, copies ordered by that coordinate's index
        for copy in &mut copies {
            let norm: f64 = copy[0].iter().map(|x| x * x).sum::<f64>().sqrt();
            let first = copy[0]
                .iter()
                .find(|x| x.abs() > 1e-9 * norm)
                .copied()
                .unwrap_or(1.0);
            let s = if first < 0.0 { -1.0 / norm } else { 1.0 / norm };
            for v in copy.iter_mut() {
                for x in v.iter_mut() {
                    *x *= s;
                }
            }
        }
        copies.sort_by_key(|copy| {
            copy[0]
                .iter()
                .position(|x| x.abs() > 1e-9)
                .unwrap_or(usize::MAX)
        });

        for (a, copy) in copies.into_iter().enumerate() {
            layout.push((i, a, offset));
            offset += d;
            columns.extend(copy);
        }
    }

    if offset != dim {
        return Err(Error::DecompositionFailed(
            "isotypic components do not fill the space".into(),
        ));
    }
    let s_mat = Mat::from_fn(dim, dim, |r, c| columns[c][r]);
    let a = s_mat
        .inverse()
        .ok_or_else(|| Error::DecompositionFailed("candidate basis is singular".into()))?;

    let decomp = IsotypicDecomposition {
        change_of_basis: a,
        change_of_basis_inv: s_mat,
        block_layout: layout,
        type_vector: tv,
    };
    for h in 0..order {
        let lhs = decomp
            .change_of_basis
            .matmul(rep.mat(h))
            .matmul(&decomp.change_of_basis_inv);
        let rhs = decomp.block_matrix(table, h);
        if lhs.max_abs_diff(&rhs) > DECOMP_TOL {
            return Err(Error::DecompositionFailed(format!(
                "blocks deviate by {} at element {}",
                lhs.max_abs_diff(&rhs),
                group.element_labels[h]
            )));
        }
    }
    Ok(decomp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::StabilizerGroup;

    fn g(name: &str) -> Arc<StabilizerGroup> {
        StabilizerGroup::build(name).unwrap()
    }

    fn pi0(group: &Arc<StabilizerGroup>, s: usize) -> Representation {
        Representation::filter_space(s, &Representation::trivial(group.clone())).unwrap()
    }

    #[test]
    fn regular_rep_of_s2_is_the_swap() {
        let s2 = g("S2");
        let reg = Representation::regular(s2);
        assert_eq!(reg.dim, 2);
        assert!(reg.flags.permutation);
        let swap = reg.mat(1);
        assert_eq!(swap.at(0, 1), 1.0);
        assert_eq!(swap.at(1, 0), 1.0);
        assert_eq!(swap.at(0, 0), 0.0);
    }

    #[test]
    fn regular_types_match_irrep_dimensions() {
        // D4: (1,1,1,1,2); S3: (1,1,2)
        let d4 = g("D4");
        let table = IrrepTable::for_group(&d4).unwrap();
        let reg = Representation::regular(d4);
        assert_eq!(multiplicity(&reg, &table).unwrap().0, vec![1, 1, 1, 1, 2]);
        assert_eq!(reg.dim, 8);

        let s3 = g("S3");
        let table = IrrepTable::for_group(&s3).unwrap();
        let reg = Representation::regular(s3);
        assert_eq!(multiplicity(&reg, &table).unwrap().0, vec![1, 1, 2]);
        assert_eq!(reg.dim, 6);
    }

    #[test]
    fn quotient_of_trivial_subgroup_is_regular() {
        let s3 = g("S3");
        let q = s3.cosets(&[0]).unwrap();
        let quot = Representation::quotient(s3.clone(), &q);
        let reg = Representation::regular(s3);
        for h in 0..6 {
            assert_eq!(quot.mat(h).max_abs_diff(reg.mat(h)), 0.0);
        }
    }

    #[test]
    fn quotient_by_whole_group_is_trivial() {
        let d4 = g("D4");
        let q = d4.cosets(&(0..8).collect::<Vec<_>>()).unwrap();
        let quot = Representation::quotient(d4, &q);
        assert_eq!(quot.dim, 1);
        for h in 0..8 {
            assert_eq!(quot.mat(h).at(0, 0), 1.0);
        }
    }

    #[test]
    fn s3_mod_a3_behaves_like_s2() {
        let s3 = g("S3");
        let q = s3.cosets(&[0, 4, 5]).unwrap();
        let quot = Representation::quotient(s3, &q);
        assert_eq!(quot.dim, 2);
        let swap = Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        for h in 1..4 {
            assert_eq!(quot.mat(h).max_abs_diff(&swap), 0.0, "transposition {h}");
        }
        for h in [0usize, 4, 5] {
            assert_eq!(quot.mat(h).max_abs_diff(&Mat::identity(2)), 0.0, "even {h}");
        }
    }

    #[test]
    fn table_dimension_sums() {
        for (name, expect) in [("D4", 8), ("S3", 6), ("S2", 2)] {
            let table = IrrepTable::for_group(&g(name)).unwrap();
            let total: usize = table.irreps.iter().map(|r| r.dim * r.dim).sum();
            assert_eq!(total, expect, "{name}");
        }
    }

    #[test]
    fn character_orthogonality() {
        for name in ["D4", "S2", "S3", "C4"] {
            let group = g(name);
            let table = IrrepTable::for_group(&group).unwrap();
            let order = group.order as f64;
            for i in 0..table.len() {
                for j in 0..table.len() {
                    let ci = table.irreps[i].character();
                    let cj = table.irreps[j].character();
                    let dot: f64 = ci.iter().zip(&cj).map(|(a, b)| a * b).sum::<f64>() / order;
                    let expect = if i == j {
                        table.endo_dims[i] as f64
                    } else {
                        0.0
                    };
                    assert!((dot - expect).abs() < 1e-12, "{name} {i} {j}");
                }
            }
        }
    }

    #[test]
    fn printed_table_entries() {
        let d4 = g("D4");
        let table = IrrepTable::for_group(&d4).unwrap();
        let b1 = table.irrep_index("B1").unwrap();
        assert_eq!(table.irreps[b1].mat(1).at(0, 0), -1.0);

        let s3 = g("S3");
        let table = IrrepTable::for_group(&s3).unwrap();
        let vs = table.irrep_index("Vs").unwrap();
        let at23 = table.irreps[vs].mat(3);
        assert_eq!(at23.at(0, 0), 0.0);
        assert_eq!(at23.at(0, 1), 1.0);
        assert_eq!(at23.at(1, 0), 1.0);
        assert_eq!(at23.at(1, 1), 0.0);
        // trivial irrep is [1] everywhere, for every group
        for name in ["C4", "D4", "S2", "S3"] {
            let table = IrrepTable::for_group(&g(name)).unwrap();
            for h in 0..table.group.order {
                assert_eq!(table.irreps[0].mat(h).at(0, 0), 1.0);
            }
        }
    }

    #[test]
    fn pi0_characters_match_hand_counts() {
        let d4 = g("D4");
        let p = pi0(&d4, 3);
        let chi = p.character();
        assert_eq!(chi[0], 9.0);
        assert_eq!(chi[4], 3.0); // reflection m fixes one column of cells

        let s3 = g("S3");
        let p = pi0(&s3, 3);
        let chi = p.character();
        assert_eq!(chi[0], 27.0);
        for h in 1..4 {
            assert_eq!(chi[h], 9.0, "transpositions fix 9 cells");
        }
        for h in 4..6 {
            assert_eq!(chi[h], 3.0, "3-cycles fix the diagonal");
        }
    }

    #[test]
    fn pi0_multiplicities_match_hand_computed_types() {
        let d4 = g("D4");
        let table = IrrepTable::for_group(&d4).unwrap();
        let tv = multiplicity(&pi0(&d4, 3), &table).unwrap();
        assert_eq!(tv.0, vec![3, 0, 1, 1, 2]);

        let s2 = g("S2");
        let table = IrrepTable::for_group(&s2).unwrap();
        let tv = multiplicity(&pi0(&s2, 3), &table).unwrap();
        assert_eq!(tv.0, vec![6, 3]);

        let s3 = g("S3");
        let table = IrrepTable::for_group(&s3).unwrap();
        let tv = multiplicity(&pi0(&s3, 3), &table).unwrap();
        assert_eq!(tv.0, vec![10, 1, 8]);
    }

    #[test]
    fn multiplicity_is_additive_over_direct_sums() {
        let d4 = g("D4");
        let table = IrrepTable::for_group(&d4).unwrap();
        let reg = Representation::regular(d4.clone());
        let p = pi0(&d4, 3);
        let sum = Representation::direct_sum(&[(&reg, 1), (&p, 1)]).unwrap();
        let ta = multiplicity(&reg, &table).unwrap();
        let tb = multiplicity(&p, &table).unwrap();
        let tc = multiplicity(&sum, &table).unwrap();
        for i in 0..table.len() {
            assert_eq!(tc.0[i], ta.0[i] + tb.0[i]);
        }
    }

    #[test]
    fn characters_are_class_functions() {
        for name in ["C4", "D4", "S2", "S3"] {
            let group = g(name);
            let p = pi0(&group, 3);
            let chi = p.character();
            for a in 0..group.order {
                for t in 0..group.order {
                    let conj = group.mul(group.mul(t, a), group.inv(t));
                    assert!((chi[a] - chi[conj]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn filter_space_of_single_cell_is_the_fiber() {
        let d4 = g("D4");
        let reg = Representation::regular(d4);
        let fs = Representation::filter_space(1, &reg).unwrap();
        assert_eq!(fs.dim, reg.dim);
        for h in 0..8 {
            assert_eq!(fs.mat(h).max_abs_diff(reg.mat(h)), 0.0);
        }
    }

    #[test]
    fn filter_space_dims() {
        let d4 = g("D4");
        assert_eq!(pi0(&d4, 3).dim, 9);
        let s3 = g("S3");
        assert_eq!(pi0(&s3, 3).dim, 27);
        let reg = Representation::regular(d4);
        assert_eq!(Representation::filter_space(3, &reg).unwrap().dim, 72);
        assert!(Representation::filter_space(4, &reg).is_err());
    }

    #[test]
    fn trivial_decomposition_is_identity() {
        let d4 = g("D4");
        let table = IrrepTable::for_group(&d4).unwrap();
        let triv = Representation::trivial(d4);
        let dec = isotypic_decompose(&triv, &table).unwrap();
        assert_eq!(dec.block_layout, vec![(0, 0, 0)]);
        assert!((dec.change_of_basis.at(0, 0).abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn d4_filter_space_blocks_in_table_order() {
        let d4 = g("D4");
        let table = IrrepTable::for_group(&d4).unwrap();
        let p = pi0(&d4, 3);
        let dec = isotypic_decompose(&p, &table).unwrap();
        let kinds: Vec<usize> = dec.block_layout.iter().map(|&(i, _, _)| i).collect();
        // A1, A1, A1, B1, B2, E, E
        assert_eq!(kinds, vec![0, 0, 0, 2, 3, 4, 4]);
        // reassembling reproduces the representation
        for h in 0..8 {
            let back = dec
                .change_of_basis_inv
                .matmul(&dec.block_matrix(&table, h))
                .matmul(&dec.change_of_basis);
            assert!(back.max_abs_diff(p.mat(h)) < 1e-8);
        }
    }

    #[test]
    fn s3_filter_space_block_counts() {
        let s3 = g("S3");
        let table = IrrepTable::for_group(&s3).unwrap();
        let p = pi0(&s3, 3);
        let dec = isotypic_decompose(&p, &table).unwrap();
        let mut counts = [0usize; 3];
        for &(i, _, _) in &dec.block_layout {
            counts[i] += 1;
        }
        assert_eq!(counts, [10, 1, 8]);
    }

    #[test]
    fn decomposition_handles_the_c4_rotation_irrep() {
        // pi0 over C4 contains the complex-type irrep twice
        let c4 = g("C4");
        let table = IrrepTable::for_group(&c4).unwrap();
        let p = pi0(&c4, 3);
        let tv = multiplicity(&p, &table).unwrap();
        assert_eq!(tv.0, vec![3, 2, 2]);
        let dec = isotypic_decompose(&p, &table).unwrap();
        for h in 0..4 {
            let lhs = dec
                .change_of_basis
                .matmul(p.mat(h))
                .matmul(&dec.change_of_basis_inv);
            assert!(lhs.max_abs_diff(&dec.block_matrix(&table, h)) < 1e-8);
        }
    }

    #[test]
    fn homomorphism_holds_for_every_bundled_irrep() {
        for name in ["C4", "D4", "S2", "S3"] {
            let group = g(name);
            let table = IrrepTable::for_group(&group).unwrap();
            for irrep in &table.irreps {
                for a in 0..group.order {
                    for b in 0..group.order {
                        let prod = irrep.mat(a).matmul(irrep.mat(b));
                        assert!(
                            prod.max_abs_diff(irrep.mat(group.mul(a, b))) < 1e-12,
                            "{name} {}",
                            irrep.basis_label
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn no_table_for_large_symmetric_groups() {
        let s4 = g("S4");
        assert!(matches!(
            IrrepTable::for_group(&s4),
            Err(Error::NoIrrepTable(_))
        ));
        // regular capsules still work there
        let reg = Representation::regular(s4);
        assert_eq!(reg.dim, 24);
        assert!(reg.flags.permutation);
    }
}
