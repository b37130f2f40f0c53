//! Index arithmetic for centered, odd-sized windows on `Z^n`.
//!
//! A window of size `w` in dimension `n` covers the cells
//! `{-c, .., c}^n` with `c = (w - 1) / 2`. Cells are enumerated row-major
//! with the first coordinate varying slowest, which fixes the flattening
//! used by feature maps, filter-space representations and filter banks
//! alike.

use crate::error::{Error, Result};

pub fn check_window(w: usize) -> Result<()> {
    if w == 0 || w.is_multiple_of(2) {
        return Err(Error::WindowSize(w));
    }
    Ok(())
}

/// All cell coordinates of a centered window, in canonical order.
pub fn window_cells(w: usize, n: usize) -> Vec<Vec<i64>> {
    let c = (w as i64 - 1) / 2;
    let mut cells = Vec::with_capacity(w.pow(n as u32));
    let mut cur = vec![-c; n];
    loop {
        cells.push(cur.clone());
        // odometer increment, last coordinate fastest
        let mut k = n;
        loop {
            if k == 0 {
                return cells;
            }
            k -= 1;
            if cur[k] < c {
                cur[k] += 1;
                for v in cur.iter_mut().skip(k + 1) {
                    *v = -c;
                }
                break;
            }
        }
    }
}

/// Flat index of a cell that is known to lie inside the window.
pub fn cell_index(coords: &[i64], w: usize) -> usize {
    let c = (w as i64 - 1) / 2;
    let mut idx = 0usize;
    for &x in coords {
        debug_assert!(-c <= x && x <= c);
        idx = idx * w + (x + c) as usize;
    }
    idx
}

/// Flat index with cyclic wrap-around of every coordinate.
pub fn cell_index_wrapped(coords: &[i64], w: usize) -> usize {
    let wi = w as i64;
    let c = (wi - 1) / 2;
    let mut idx = 0usize;
    for &x in coords {
        let r = (((x + c) % wi) + wi) % wi;
        idx = idx * w + r as usize;
    }
    idx
}

/// Flat index, or `None` when some coordinate falls outside the window.
pub fn cell_index_checked(coords: &[i64], w: usize) -> Option<usize> {
    let c = (w as i64 - 1) / 2;
    let mut idx = 0usize;
    for &x in coords {
        if x < -c || x > c {
            return None;
        }
        idx = idx * w + (x + c) as usize;
    }
    Some(idx)
}
