//! The group actions on feature maps: spatial transport and the induced
//! representation.

use crate::error::{Error, Result};
use crate::grid;
use crate::group::SemidirectElement;

use super::{Boundary, FeatureMap};

/// Spatial transport only: `[pi_0(g) f](x) = f(g^{-1} x)`. Layer-0
/// semantics, every channel carried along unchanged.
pub fn transform_input(f: &FeatureMap, g: &SemidirectElement) -> Result<FeatureMap> {
    transform_impl(f, g, false)
}

/// Induced representation: cells move by `g^{-1}` and every fiber is hit
/// by the block fiber matrix of the stabilizer part,
/// `[pi'(th) f](x) = rho(h) f((th)^{-1} x)`.
pub fn transform_induced(f: &FeatureMap, g: &SemidirectElement) -> Result<FeatureMap> {
    transform_impl(f, g, true)
}

fn transform_impl(f: &FeatureMap, g: &SemidirectElement, with_fiber: bool) -> Result<FeatureMap> {
    let group = f.group().clone();
    if g.translation.len() != group.n {
        return Err(Error::DimensionMismatch {
            expected: group.n,
            got: g.translation.len(),
        });
    }
    let ginv = group.inverse_element(g)?;
    let w = f.window;
    let cells = grid::window_cells(w, group.n);
    let k = f.channels();
    let mut out = FeatureMap::zeros(w, f.fiber.clone(), f.boundary)?;
    out.approximate = f.approximate;

    // source cell per output cell, or None when it leaves the window
    let mut src = Vec::with_capacity(cells.len());
    for cell in &cells {
        let y = group.act_on_point(&ginv, cell)?;
        let idx = match f.boundary {
            Boundary::Cyclic => Some(grid::cell_index_wrapped(&y, w)),
            Boundary::Zero => grid::cell_index_checked(&y, w),
        };
        if idx.is_none() {
            out.approximate = true;
        }
        src.push(idx);
    }

    if with_fiber {
        let fiber_mat = f.fiber.block_mat(g.stab);
        let mut moved = vec![0.0; k];
        for (xi, s) in src.iter().enumerate() {
            let Some(yi) = s else { continue };
            for (ch, mv) in moved.iter_mut().enumerate() {
                *mv = f.at(ch, *yi);
            }
            for r in 0..k {
                let row = fiber_mat.row(r);
                let mut acc = 0.0;
                for (c, &m) in row.iter().enumerate() {
                    if m != 0.0 {
                        acc += m * moved[c];
                    }
                }
                out.set(r, xi, acc);
            }
        }
    } else {
        for (xi, s) in src.iter().enumerate() {
            let Some(yi) = s else { continue };
            for ch in 0..k {
                out.set(ch, xi, f.at(ch, *yi));
            }
        }
    }
    Ok(out)
}
