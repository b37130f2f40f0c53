//! Steerable feature maps, equivariant layers and desk-scale networks.

pub mod conv;
pub mod network;
pub mod nonlin;
pub mod pool;
pub mod train;
pub mod transform;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid;
use crate::group::StabilizerGroup;
use crate::linalg::Mat;
use crate::rep::{IrrepTable, Representation};

pub use conv::convolve;
pub use network::{LayerSpec, Network, NetworkSpec, PoolKind};
pub use nonlin::{apply_nonlinearity, NonlinKind};
pub use pool::{fiber_max_pool, quotient_pool};
pub use transform::{transform_induced, transform_input};

// ---------------------------------------------------------------------------
// capsules and fiber types
// ---------------------------------------------------------------------------

/// What a capsule is, structurally; determines admissible nonlinearities
/// and how the capsule serializes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CapsuleKind {
    Trivial,
    Regular,
    /// Quotient by the given subgroup (sorted element indices).
    Quotient(Vec<usize>),
    /// Irrep of the bundled table, by index.
    Irrep(usize),
    /// Post-activation capsule of a concatenated nonlinearity.
    PostCRelu(Box<CapsuleKind>),
}

impl CapsuleKind {
    pub fn label(&self) -> String {
        match self {
            CapsuleKind::Trivial => "trivial".into(),
            CapsuleKind::Regular => "regular".into(),
            CapsuleKind::Quotient(sub) => {
                let items: Vec<String> = sub.iter().map(|i| i.to_string()).collect();
                format!("quotient[{}]", items.join(" "))
            }
            CapsuleKind::Irrep(i) => format!("irrep{i}"),
            CapsuleKind::PostCRelu(inner) => format!("crelu({})", inner.label()),
        }
    }
}

/// A representation with a fixed basis: the unit fiber types are built
/// from. The basis matters for nonlinearities, so the kind travels with
/// the matrices.
#[derive(Clone)]
pub struct Capsule {
    pub kind: CapsuleKind,
    pub rep: Representation,
}

impl Capsule {
    pub fn trivial(group: Arc<StabilizerGroup>) -> Capsule {
        Capsule {
            kind: CapsuleKind::Trivial,
            rep: Representation::trivial(group),
        }
    }

    pub fn regular(group: Arc<StabilizerGroup>) -> Capsule {
        Capsule {
            kind: CapsuleKind::Regular,
            rep: Representation::regular(group),
        }
    }

    pub fn quotient(group: Arc<StabilizerGroup>, subgroup: &[usize]) -> Result<Capsule> {
        let q = group.cosets(subgroup)?;
        let rep = Representation::quotient(group, &q);
        Ok(Capsule {
            kind: CapsuleKind::Quotient(q.subgroup.clone()),
            rep,
        })
    }

    pub fn irrep(table: &IrrepTable, index: usize) -> Result<Capsule> {
        let rep = table
            .irreps
            .get(index)
            .ok_or_else(|| Error::Parse(format!("irrep index {index} out of range")))?
            .clone();
        Ok(Capsule {
            kind: CapsuleKind::Irrep(index),
            rep,
        })
    }

    pub fn dim(&self) -> usize {
        self.rep.dim
    }

    pub fn group(&self) -> &Arc<StabilizerGroup> {
        self.rep.group()
    }
}

/// Ordered list of (capsule, multiplicity) pairs; the channel layout is
/// capsule-copy major, capsule-channel minor.
#[derive(Clone)]
pub struct FiberType {
    pub entries: Vec<(Capsule, usize)>,
}

impl FiberType {
    pub fn new(entries: Vec<(Capsule, usize)>) -> Result<FiberType> {
        if entries.is_empty() {
            return Err(Error::ShapeMismatch(
                "fiber type needs at least one capsule".into(),
            ));
        }
        let group = entries[0].0.group().clone();
        for (c, m) in &entries {
            if *m == 0 {
                return Err(Error::ShapeMismatch(
                    "capsule multiplicity must be positive".into(),
                ));
            }
            if !c.group().same_context(&group) {
                return Err(Error::ContextMismatch("fiber mixes groups".into()));
            }
        }
        Ok(FiberType { entries })
    }

    /// `K` copies of the trivial capsule: the fiber of a raw input map.
    pub fn input(group: Arc<StabilizerGroup>, channels: usize) -> FiberType {
        FiberType {
            entries: vec![(Capsule::trivial(group), channels)],
        }
    }

    pub fn group(&self) -> &Arc<StabilizerGroup> {
        self.entries[0].0.group()
    }

    pub fn channels(&self) -> usize {
        self.entries.iter().map(|(c, m)| c.dim() * m).sum()
    }

    /// Total number of capsule copies across entries.
    pub fn copies(&self) -> usize {
        self.entries.iter().map(|(_, m)| m).sum()
    }

    /// Channel offset of each entry's block.
    pub fn entry_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.entries.len());
        let mut off = 0;
        for (c, m) in &self.entries {
            offsets.push(off);
            off += c.dim() * m;
        }
        offsets
    }

    /// Iterates `(entry index, copy index, channel offset, capsule dim)`.
    pub fn copy_layout(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut out = Vec::new();
        let mut off = 0;
        for (e, (c, m)) in self.entries.iter().enumerate() {
            for a in 0..*m {
                out.push((e, a, off, c.dim()));
                off += c.dim();
            }
        }
        out
    }

    /// Block fiber matrix of a stabilizer element, without the
    /// re-validation cost of building a full `Representation`.
    pub fn block_mat(&self, h: usize) -> Mat {
        let k = self.channels();
        let mut m = Mat::zeros(k, k);
        let mut off = 0;
        for (c, mult) in &self.entries {
            let b = c.rep.mat(h);
            for _ in 0..*mult {
                for i in 0..c.dim() {
                    for j in 0..c.dim() {
                        let v = b.at(i, j);
                        if v != 0.0 {
                            m.set(off + i, off + j, v);
                        }
                    }
                }
                off += c.dim();
            }
        }
        m
    }

    /// Full validated block representation; used by verification paths.
    pub fn block_rep(&self) -> Result<Representation> {
        let parts: Vec<(&Representation, usize)> =
            self.entries.iter().map(|(c, m)| (&c.rep, *m)).collect();
        Representation::direct_sum(&parts)
    }

    pub fn same_shape(&self, other: &FiberType) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((ca, ma), (cb, mb))| ca.kind == cb.kind && ma == mb)
    }

    pub fn describe(&self) -> String {
        let parts: Vec<String> = self
            .entries
            .iter()
            .map(|(c, m)| format!("{}x{}", m, c.kind.label()))
            .collect();
        parts.join(" + ")
    }

    pub fn all_permutation(&self) -> bool {
        self.entries.iter().all(|(c, _)| c.rep.flags.permutation)
    }
}

// ---------------------------------------------------------------------------
// feature maps
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Cyclic,
    Zero,
}

/// Dense feature map over a centered window of `Z^n` with a typed fiber.
#[derive(Clone)]
pub struct FeatureMap {
    pub window: usize,
    pub boundary: Boundary,
    pub fiber: FiberType,
    /// `[channel][cell]`, cells in canonical window order.
    data: Vec<f64>,
    /// Set when a zero-boundary transform dropped support at the edge.
    pub approximate: bool,
}

impl FeatureMap {
    pub fn zeros(window: usize, fiber: FiberType, boundary: Boundary) -> Result<FeatureMap> {
        grid::check_window(window)?;
        let n = fiber.group().n;
        let cells = window.pow(n as u32);
        let k = fiber.channels();
        Ok(FeatureMap {
            window,
            boundary,
            fiber,
            data: vec![0.0; k * cells],
            approximate: false,
        })
    }

    pub fn group(&self) -> &Arc<StabilizerGroup> {
        self.fiber.group()
    }

    pub fn spatial_dim(&self) -> usize {
        self.group().n
    }

    pub fn cells(&self) -> usize {
        self.window.pow(self.spatial_dim() as u32)
    }

    pub fn channels(&self) -> usize {
        self.fiber.channels()
    }

    #[inline]
    pub fn at(&self, k: usize, cell: usize) -> f64 {
        self.data[k * self.cells() + cell]
    }

    #[inline]
    pub fn set(&mut self, k: usize, cell: usize, v: f64) {
        let cells = self.cells();
        self.data[k * cells + cell] = v;
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        let cells = self.cells();
        &self.data[k * cells..(k + 1) * cells]
    }

    pub fn channel_mut(&mut self, k: usize) -> &mut [f64] {
        let cells = self.cells();
        &mut self.data[k * cells..(k + 1) * cells]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill_random(&mut self, rng: &mut impl rand::Rng) {
        for v in &mut self.data {
            *v = rng.random::<f64>() * 2.0 - 1.0;
        }
    }

    pub fn fill_random_integers(&mut self, rng: &mut impl rand::Rng, lo: i64, hi: i64) {
        for v in &mut self.data {
            *v = rng.random_range(lo..=hi) as f64;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &FeatureMap) -> f64 {
        assert_eq!(
            self.data.len(),
            other.data.len(),
            "feature map shape mismatch"
        );
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Scale-free residual `||a - b||_inf / max(||b||_inf, 1e-30)`.
pub fn relative_residual(a: &FeatureMap, b: &FeatureMap) -> f64 {
    a.max_abs_diff(b) / b.max_abs().max(1e-30)
}
