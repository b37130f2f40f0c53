//! Cross-correlation-style convolution of feature maps with filter banks:
//! `out(x)_k' = sum_{u,k} K[k'][k](u) f_k(x + u)`.

use crate::error::{Error, Result};
use crate::grid;
use crate::hom::PlanarKernel;

use super::{Boundary, FeatureMap, FiberType};

/// Source-cell lookup table: for every output cell and window offset, the
/// flat input cell (or `None` outside a zero boundary).
pub(crate) fn source_table(
    window: usize,
    n: usize,
    s: usize,
    boundary: Boundary,
) -> Vec<Option<usize>> {
    let cells = grid::window_cells(window, n);
    let offsets = grid::window_cells(s, n);
    let mut table = Vec::with_capacity(cells.len() * offsets.len());
    let mut shifted = vec![0i64; n];
    for cell in &cells {
        for off in &offsets {
            for ((d, a), b) in shifted.iter_mut().zip(cell).zip(off) {
                *d = a + b;
            }
            let idx = match boundary {
                Boundary::Cyclic => Some(grid::cell_index_wrapped(&shifted, window)),
                Boundary::Zero => grid::cell_index_checked(&shifted, window),
            };
            table.push(idx);
        }
    }
    table
}

/// Convolves a feature map with a filter bank. The output fiber type is
/// supplied by the caller (the layer knows it; the kernel only knows
/// channel counts).
pub fn convolve(f: &FeatureMap, kernel: &PlanarKernel, out_fiber: FiberType) -> Result<FeatureMap> {
    let group = f.group();
    if kernel.in_channels != f.channels() {
        return Err(Error::ChannelMismatch {
            expected: kernel.in_channels,
            got: f.channels(),
        });
    }
    if out_fiber.channels() != kernel.out_channels {
        return Err(Error::ChannelMismatch {
            expected: kernel.out_channels,
            got: out_fiber.channels(),
        });
    }
    if kernel.spatial_dim != group.n {
        return Err(Error::DimensionMismatch {
            expected: group.n,
            got: kernel.spatial_dim,
        });
    }
    if kernel.window > f.window {
        return Err(Error::WindowSize(kernel.window));
    }
    let mut out = FeatureMap::zeros(f.window, out_fiber, f.boundary)?;
    out.approximate = f.approximate;

    let cells = out.cells();
    let supp = kernel.cells();
    let table = source_table(f.window, group.n, kernel.window, f.boundary);
    for ko in 0..kernel.out_channels {
        let dst = out.channel_mut(ko);
        for ki in 0..kernel.in_channels {
            let src = f.channel(ki);
            for (x, d) in dst.iter_mut().enumerate().take(cells) {
                let row = &table[x * supp..(x + 1) * supp];
                let mut acc = 0.0;
                for (u, slot) in row.iter().enumerate() {
                    if let Some(y) = slot {
                        acc += kernel.at(ko, ki, u) * src[*y];
                    }
                }
                *d += acc;
            }
        }
    }
    Ok(out)
}

/// Gradient of the loss with respect to the kernel:
/// `dK[k'][k](u) = sum_x dout_k'(x) f_k(x + u)`.
pub fn convolve_backward_kernel(
    f: &FeatureMap,
    dout: &FeatureMap,
    s: usize,
) -> Result<PlanarKernel> {
    let n = f.spatial_dim();
    let mut dk = PlanarKernel::zeros(dout.channels(), f.channels(), s, n);
    let supp = dk.cells();
    let table = source_table(f.window, n, s, f.boundary);
    for ko in 0..dout.channels() {
        let g = dout.channel(ko);
        for ki in 0..f.channels() {
            let src = f.channel(ki);
            for (x, gv) in g.iter().enumerate() {
                if *gv == 0.0 {
                    continue;
                }
                let row = &table[x * supp..(x + 1) * supp];
                for (u, slot) in row.iter().enumerate() {
                    if let Some(y) = slot {
                        dk.add(ko, ki, u, gv * src[*y]);
                    }
                }
            }
        }
    }
    Ok(dk)
}

/// Gradient of the loss with respect to the input feature map:
/// `din_k(y) += K[k'][k](u) dout_k'(x)` for `y = x + u`.
pub fn convolve_backward_input(
    kernel: &PlanarKernel,
    dout: &FeatureMap,
    in_fiber: FiberType,
) -> Result<FeatureMap> {
    let n = dout.spatial_dim();
    let mut din = FeatureMap::zeros(dout.window, in_fiber, dout.boundary)?;
    let supp = kernel.cells();
    let table = source_table(dout.window, n, kernel.window, dout.boundary);
    for ko in 0..kernel.out_channels {
        let g = dout.channel(ko);
        for ki in 0..kernel.in_channels {
            let acc = din.channel_mut(ki);
            for (x, gv) in g.iter().enumerate() {
                if *gv == 0.0 {
                    continue;
                }
                let row = &table[x * supp..(x + 1) * supp];
                for (u, slot) in row.iter().enumerate() {
                    if let Some(y) = slot {
                        acc[*y] += kernel.at(ko, ki, u) * gv;
                    }
                }
            }
        }
    }
    Ok(din)
}
