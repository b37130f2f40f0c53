//! Group-convolutional networks: feature maps living on `G = Z^n ⋊ H`,
//! the two group-convolution forms, filter-bank expansion for planar
//! routines, group/coset pooling, and the reshape identifying all of it
//! with regular-capsule steerable networks.

use crate::error::{Error, Result};
use crate::grid;
use crate::group::{QuotientSpace, SemidirectElement, StabilizerGroup};
use crate::hom::PlanarKernel;
use crate::nn::{Boundary, Capsule, FeatureMap, FiberType};
use std::sync::Arc;

/// What the stabilizer axis of a `GFeatureMap` indexes.
#[derive(Clone)]
pub enum StabAxis {
    /// One slice per stabilizer element.
    Full,
    /// One slice per coset, after coset pooling.
    Quotient(QuotientSpace),
}

/// Dense feature map on the group: channels x stabilizer slices x cells.
#[derive(Clone)]
pub struct GFeatureMap {
    group: Arc<StabilizerGroup>,
    pub window: usize,
    pub boundary: Boundary,
    pub channels: usize,
    pub axis: StabAxis,
    data: Vec<f64>,
}

impl GFeatureMap {
    pub fn zeros(
        group: Arc<StabilizerGroup>,
        channels: usize,
        window: usize,
        boundary: Boundary,
    ) -> Result<GFeatureMap> {
        grid::check_window(window)?;
        let cells = window.pow(group.n as u32);
        let slices = group.order;
        Ok(GFeatureMap {
            group,
            window,
            boundary,
            channels,
            axis: StabAxis::Full,
            data: vec![0.0; channels * slices * cells],
        })
    }

    pub fn group(&self) -> &Arc<StabilizerGroup> {
        &self.group
    }

    pub fn slices(&self) -> usize {
        match &self.axis {
            StabAxis::Full => self.group.order,
            StabAxis::Quotient(q) => q.len(),
        }
    }

    pub fn cells(&self) -> usize {
        self.window.pow(self.group.n as u32)
    }

    #[inline]
    pub fn at(&self, k: usize, slice: usize, cell: usize) -> f64 {
        self.data[(k * self.slices() + slice) * self.cells() + cell]
    }

    #[inline]
    pub fn set(&mut self, k: usize, slice: usize, cell: usize, v: f64) {
        let s = self.slices();
        let c = self.cells();
        self.data[(k * s + slice) * c + cell] = v;
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

    pub fn max_abs_diff(&self, other: &GFeatureMap) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Filters on the group: `K' x K x |H| x s^n`.
#[derive(Clone)]
pub struct GKernel {
    pub out_channels: usize,
    pub in_channels: usize,
    pub window: usize,
    pub spatial_dim: usize,
    pub stab: usize,
    data: Vec<f64>,
}

impl GKernel {
    pub fn zeros(
        out_channels: usize,
        in_channels: usize,
        stab: usize,
        window: usize,
        spatial_dim: usize,
    ) -> GKernel {
        let cells = window.pow(spatial_dim as u32);
        GKernel {
            out_channels,
            in_channels,
            window,
            spatial_dim,
            stab,
            data: vec![0.0; out_channels * in_channels * stab * cells],
        }
    }

    pub fn cells(&self) -> usize {
        self.window.pow(self.spatial_dim as u32)
    }

    #[inline]
    pub fn at(&self, ko: usize, ki: usize, t: usize, cell: usize) -> f64 {
        self.data[((ko * self.in_channels + ki) * self.stab + t) * self.cells() + cell]
    }

    #[inline]
    pub fn set(&mut self, ko: usize, ki: usize, t: usize, cell: usize, v: f64) {
        let s = self.stab;
        let c = self.cells();
        self.data[((ko * self.in_channels + ki) * s + t) * c + cell] = v;
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

// ---------------------------------------------------------------------------
// transforms
// ---------------------------------------------------------------------------

/// Left translation of a map on the group:
/// `[T_g f](h', x) = f(h^{-1} h', h^{-1}(x - t))` for `g = (t, h)`; on a
/// quotient axis the slice part acts on cosets instead.
pub fn gfm_transform(f: &GFeatureMap, g: &SemidirectElement) -> Result<GFeatureMap> {
    let group = f.group().clone();
    let ginv = group.inverse_element(g)?;
    let mut out = f.clone();
    let cells = grid::window_cells(f.window, group.n);
    let hinv = ginv.stab;
    let slice_src: Vec<usize> = match &f.axis {
        StabAxis::Full => (0..group.order).map(|h| group.mul(hinv, h)).collect(),
        StabAxis::Quotient(q) => (0..q.len())
            .map(|c| q.rep_of[group.mul(hinv, q.representatives[c])])
            .collect(),
    };
    // spatial preimage per output cell
    let mut src_cell = Vec::with_capacity(cells.len());
    for cell in &cells {
        let y = group.act_on_point(&ginv, cell)?;
        let idx = match f.boundary {
            Boundary::Cyclic => Some(grid::cell_index_wrapped(&y, f.window)),
            Boundary::Zero => grid::cell_index_checked(&y, f.window),
        };
        src_cell.push(idx);
    }
    for k in 0..f.channels {
        for (s_out, &s_in) in slice_src.iter().enumerate() {
            for (xi, slot) in src_cell.iter().enumerate() {
                let v = match slot {
                    Some(yi) => f.at(k, s_in, *yi),
                    None => 0.0,
                };
                out.set(k, s_out, xi, v);
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// group convolution
// ---------------------------------------------------------------------------

/// First-layer group convolution of a planar map with planar filters:
/// `[f * psi](th) = sum_y f(y) psi((th)^{-1} y)`, evaluated directly.
pub fn gconv_first(f: &FeatureMap, filters: &PlanarKernel) -> Result<GFeatureMap> {
    let group = f.group().clone();
    if filters.in_channels != f.channels() {
        return Err(Error::ChannelMismatch {
            expected: filters.in_channels,
            got: f.channels(),
        });
    }
    if filters.spatial_dim != group.n {
        return Err(Error::DimensionMismatch {
            expected: group.n,
            got: filters.spatial_dim,
        });
    }
    let mut out = GFeatureMap::zeros(group.clone(), filters.out_channels, f.window, f.boundary)?;
    let offsets = grid::window_cells(filters.window, group.n);
    let table = crate::nn::conv::source_table(f.window, group.n, filters.window, f.boundary);
    let supp = offsets.len();
    // per stabilizer slice: the filter evaluated at h^{-1} u
    for h in 0..group.order {
        let hinv = group.inv(h);
        let mut perm = Vec::with_capacity(supp);
        for off in &offsets {
            let moved = group.act_point(hinv, off)?;
            perm.push(grid::cell_index(&moved, filters.window));
        }
        for ko in 0..filters.out_channels {
            for ki in 0..f.channels() {
                let src = f.channel(ki);
                for x in 0..f.cells() {
                    let row = &table[x * supp..(x + 1) * supp];
                    let mut acc = 0.0;
                    for (u, slot) in row.iter().enumerate() {
                        if let Some(y) = slot {
                            acc += filters.at(ko, ki, perm[u]) * src[*y];
                        }
                    }
                    if ki == 0 {
                        out.set(ko, h, x, acc);
                    } else {
                        let prev = out.at(ko, h, x);
                        out.set(ko, h, x, prev + acc);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Higher-layer group convolution:
/// `[f * psi](g) = sum_{h in G} f(h) psi(g^{-1} h)` with the sum truncated
/// to the filter support.
pub fn gconv_higher(f: &GFeatureMap, filters: &GKernel) -> Result<GFeatureMap> {
    let group = f.group().clone();
    if !matches!(f.axis, StabAxis::Full) {
        return Err(Error::ShapeMismatch(
            "gconv_higher needs a full stabilizer axis".into(),
        ));
    }
    if filters.in_channels != f.channels {
        return Err(Error::ChannelMismatch {
            expected: filters.in_channels,
            got: f.channels,
        });
    }
    if filters.stab != group.order {
        return Err(Error::ShapeMismatch(format!(
            "filter stabilizer extent {} does not match |H| = {}",
            filters.stab, group.order
        )));
    }
    let mut out = GFeatureMap::zeros(group.clone(), filters.out_channels, f.window, f.boundary)?;
    let offsets = grid::window_cells(filters.window, group.n);
    let supp = offsets.len();
    let table = crate::nn::conv::source_table(f.window, group.n, filters.window, f.boundary);
    for sp in 0..group.order {
        let spinv = group.inv(sp);
        // cell permutation u -> phi(sp^{-1}) u and slice map t -> sp^{-1} t
        let mut perm = Vec::with_capacity(supp);
        for off in &offsets {
            let moved = group.act_point(spinv, off)?;
            perm.push(grid::cell_index(&moved, filters.window));
        }
        for ko in 0..filters.out_channels {
            for x in 0..f.cells() {
                let row = &table[x * supp..(x + 1) * supp];
                let mut acc = 0.0;
                for t in 0..group.order {
                    let tbar = group.mul(spinv, t);
                    for ki in 0..f.channels {
                        for (u, slot) in row.iter().enumerate() {
                            if let Some(y) = slot {
                                acc += f.at(ki, t, *y) * filters.at(ko, ki, tbar, perm[u]);
                            }
                        }
                    }
                }
                out.set(ko, sp, x, acc);
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// filter expansion
// ---------------------------------------------------------------------------

/// Expanded first-layer bank: planar kernel with output channels
/// `(i, s')` flattened stabilizer-fastest, holding `psi_i(s'^{-1} u)`.
pub fn expand_first(filters: &PlanarKernel, group: &Arc<StabilizerGroup>) -> Result<PlanarKernel> {
    if filters.spatial_dim != group.n {
        return Err(Error::DimensionMismatch {
            expected: group.n,
            got: filters.spatial_dim,
        });
    }
    let o = group.order;
    let mut out = PlanarKernel::zeros(
        filters.out_channels * o,
        filters.in_channels,
        filters.window,
        filters.spatial_dim,
    );
    let offsets = grid::window_cells(filters.window, group.n);
    for sp in 0..o {
        let spinv = group.inv(sp);
        for (u, off) in offsets.iter().enumerate() {
            let moved = group.act_point(spinv, off)?;
            let src = grid::cell_index(&moved, filters.window);
            for i in 0..filters.out_channels {
                for k in 0..filters.in_channels {
                    out.set(i * o + sp, k, u, filters.at(i, k, src));
                }
            }
        }
    }
    Ok(out)
}

/// Expanded higher-layer bank, following the index map
/// `F+[i, s', j, t, u] = F[i, j, s'^{-1} t, phi(s'^{-1}) u]`, reshaped to
/// a planar kernel over regular-capsule channels.
pub struct ExpandedFilterBank {
    pub base: GKernel,
    pub expanded: PlanarKernel,
}

pub fn expand_filter_bank(
    filters: &GKernel,
    group: &Arc<StabilizerGroup>,
) -> Result<ExpandedFilterBank> {
    if filters.stab != group.order {
        return Err(Error::ShapeMismatch(format!(
            "filter stabilizer extent {} does not match |H| = {}",
            filters.stab, group.order
        )));
    }
    if filters.spatial_dim != group.n {
        return Err(Error::DimensionMismatch {
            expected: group.n,
            got: filters.spatial_dim,
        });
    }
    let o = group.order;
    let mut out = PlanarKernel::zeros(
        filters.out_channels * o,
        filters.in_channels * o,
        filters.window,
        filters.spatial_dim,
    );
    let offsets = grid::window_cells(filters.window, group.n);
    for sp in 0..o {
        let spinv = group.inv(sp);
        let mut perm = Vec::with_capacity(offsets.len());
        for off in &offsets {
            let moved = group.act_point(spinv, off)?;
            perm.push(grid::cell_index(&moved, filters.window));
        }
        for t in 0..o {
            let tbar = group.mul(spinv, t);
            for i in 0..filters.out_channels {
                for j in 0..filters.in_channels {
                    for (u, &src) in perm.iter().enumerate() {
                        out.set(i * o + sp, j * o + t, u, filters.at(i, j, tbar, src));
                    }
                }
            }
        }
    }
    Ok(ExpandedFilterBank {
        base: filters.clone(),
        expanded: out,
    })
}

// ---------------------------------------------------------------------------
// pooling on the group
// ---------------------------------------------------------------------------

/// Max pooling over a transformed neighborhood of the identity:
/// `Pf(g) = max_{x in gU} f(x)`. `U` is a list of (stabilizer element,
/// offset) pairs.
pub fn group_pool(f: &GFeatureMap, neighborhood: &[(usize, Vec<i64>)]) -> Result<GFeatureMap> {
    let group = f.group().clone();
    if !matches!(f.axis, StabAxis::Full) {
        return Err(Error::ShapeMismatch(
            "group_pool needs a full stabilizer axis".into(),
        ));
    }
    if neighborhood.is_empty() {
        return Err(Error::ShapeMismatch("empty pooling neighborhood".into()));
    }
    let mut out = f.clone();
    let cells = grid::window_cells(f.window, group.n);
    for s in 0..group.order {
        // g = (x, s); gu = (x + phi(s) v, s sigma)
        let targets: Vec<(usize, Vec<i64>)> = neighborhood
            .iter()
            .map(|(sigma, v)| Ok((group.mul(s, *sigma), group.act_point(s, v)?)))
            .collect::<Result<Vec<_>>>()?;
        for (xi, cell) in cells.iter().enumerate() {
            for k in 0..f.channels {
                let mut best = f64::NEG_INFINITY;
                for (slice, shift) in &targets {
                    let p: Vec<i64> = cell.iter().zip(shift).map(|(a, b)| a + b).collect();
                    let idx = match f.boundary {
                        Boundary::Cyclic => Some(grid::cell_index_wrapped(&p, f.window)),
                        Boundary::Zero => grid::cell_index_checked(&p, f.window),
                    };
                    match idx {
                        Some(y) => best = best.max(f.at(k, *slice, y)),
                        None => {
                            return Err(Error::ShapeMismatch(
                                "pooling neighborhood leaves the window".into(),
                            ))
                        }
                    }
                }
                out.set(k, s, xi, best);
            }
        }
    }
    Ok(out)
}

/// Result of coset pooling: a planar map when pooling by the whole
/// stabilizer, otherwise a map on `G/K`.
pub enum CosetPooled {
    Planar(FeatureMap),
    OnQuotient(GFeatureMap),
}

/// Coset pooling by a stabilizer subgroup `K`: one output per coset, the
/// max over that coset's slices. With `K = H` the output is a plain
/// feature map on `Z^n`.
pub fn coset_pool(f: &GFeatureMap, subgroup: &[usize]) -> Result<CosetPooled> {
    let group = f.group().clone();
    if !matches!(f.axis, StabAxis::Full) {
        return Err(Error::ShapeMismatch(
            "coset_pool needs a full stabilizer axis".into(),
        ));
    }
    let q = group.cosets(subgroup)?;
    let cells = f.cells();
    if q.len() == 1 {
        let fiber = FiberType::input(group.clone(), f.channels);
        let mut out = FeatureMap::zeros(f.window, fiber, f.boundary)?;
        for k in 0..f.channels {
            for x in 0..cells {
                let mut best = f.at(k, 0, x);
                for t in 1..group.order {
                    best = best.max(f.at(k, t, x));
                }
                out.set(k, x, best);
            }
        }
        return Ok(CosetPooled::Planar(out));
    }
    let mut out = GFeatureMap {
        group: group.clone(),
        window: f.window,
        boundary: f.boundary,
        channels: f.channels,
        axis: StabAxis::Quotient(q.clone()),
        data: vec![0.0; f.channels * q.len() * cells],
    };
    for k in 0..f.channels {
        for (ci, coset) in q.cosets.iter().enumerate() {
            for x in 0..cells {
                let mut best = f.at(k, coset[0], x);
                for &t in &coset[1..] {
                    best = best.max(f.at(k, t, x));
                }
                out.set(k, ci, x, best);
            }
        }
    }
    Ok(CosetPooled::OnQuotient(out))
}

// ---------------------------------------------------------------------------
// the steerable bridge
// ---------------------------------------------------------------------------

/// Reshapes the stabilizer axis into regular-capsule channels: steerable
/// channel `k |H| + idx(h)` reads G-map channel `k`, slice `h`.
pub fn to_steerable(f: &GFeatureMap) -> Result<FeatureMap> {
    let group = f.group().clone();
    if !matches!(f.axis, StabAxis::Full) {
        return Err(Error::ShapeMismatch(
            "to_steerable needs a full stabilizer axis".into(),
        ));
    }
    let fiber = FiberType::new(vec![(Capsule::regular(group.clone()), f.channels)])?;
    let mut out = FeatureMap::zeros(f.window, fiber, f.boundary)?;
    let o = group.order;
    for k in 0..f.channels {
        for t in 0..o {
            for x in 0..f.cells() {
                out.set(k * o + t, x, f.at(k, t, x));
            }
        }
    }
    Ok(out)
}

/// Inverse reshape. Fails when the channel count is not a multiple of the
/// stabilizer order.
pub fn from_steerable(f: &FeatureMap) -> Result<GFeatureMap> {
    let group = f.group().clone();
    let o = group.order;
    if !f.channels().is_multiple_of(o) {
        return Err(Error::ChannelMismatch {
            expected: (f.channels() / o.max(1)) * o,
            got: f.channels(),
        });
    }
    let channels = f.channels() / o;
    let mut out = GFeatureMap::zeros(group, channels, f.window, f.boundary)?;
    for k in 0..channels {
        for t in 0..o {
            for x in 0..f.cells() {
                out.set(k, t, x, f.at(k * o + t, x));
            }
        }
    }
    Ok(out)
}
