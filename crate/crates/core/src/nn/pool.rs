//! Fiber-wise pooling: capsule max pooling to trivial outputs and
//! quotient pooling over cosets of a subgroup.

use crate::error::{Error, Result};

use super::{Capsule, CapsuleKind, FeatureMap, FiberType};

/// Fiber type after max pooling: every selected capsule collapses to one
/// trivial channel per copy.
pub fn fiber_pool_fiber(fiber: &FiberType, selection: Option<&[usize]>) -> Result<FiberType> {
    let group = fiber.group().clone();
    let selected = |e: usize| selection.is_none_or(|s| s.contains(&e));
    let mut entries = Vec::new();
    for (e, (c, m)) in fiber.entries.iter().enumerate() {
        if selected(e) {
            if !c.rep.flags.permutation {
                return Err(Error::Inadmissible {
                    nonlin: "fiber_max_pool".into(),
                    capsule: c.kind.label(),
                });
            }
            entries.push((Capsule::trivial(group.clone()), *m));
        } else {
            entries.push((c.clone(), *m));
        }
    }
    FiberType::new(entries)
}

/// Max over each selected capsule copy's channels; non-selected entries
/// pass through. Exact on any input since only comparisons happen.
pub fn fiber_max_pool(f: &FeatureMap, selection: Option<&[usize]>) -> Result<FeatureMap> {
    let out_fiber = fiber_pool_fiber(&f.fiber, selection)?;
    let mut out = FeatureMap::zeros(f.window, out_fiber, f.boundary)?;
    out.approximate = f.approximate;
    let selected = |e: usize| selection.is_none_or(|s| s.contains(&e));
    let cells = f.cells();
    let mut out_ch = 0usize;
    let mut in_off = 0usize;
    for (e, (c, m)) in f.fiber.entries.iter().enumerate() {
        let d = c.dim();
        for copy in 0..*m {
            let base = in_off + copy * d;
            if selected(e) {
                for x in 0..cells {
                    let mut best = f.at(base, x);
                    for ch in 1..d {
                        best = best.max(f.at(base + ch, x));
                    }
                    out.set(out_ch, x, best);
                }
                out_ch += 1;
            } else {
                for ch in 0..d {
                    for x in 0..cells {
                        out.set(out_ch + ch, x, f.at(base + ch, x));
                    }
                }
                out_ch += d;
            }
        }
        in_off += d * m;
    }
    Ok(out)
}

/// Routes pooled gradients back to the arg-max channel of each copy, ties
/// broken toward the lowest channel index.
pub fn fiber_max_pool_backward(
    input: &FeatureMap,
    dout: &FeatureMap,
    selection: Option<&[usize]>,
) -> Result<FeatureMap> {
    let mut din = FeatureMap::zeros(input.window, input.fiber.clone(), input.boundary)?;
    let selected = |e: usize| selection.is_none_or(|s| s.contains(&e));
    let cells = input.cells();
    let mut out_ch = 0usize;
    let mut in_off = 0usize;
    for (e, (c, m)) in input.fiber.entries.iter().enumerate() {
        let d = c.dim();
        for copy in 0..*m {
            let base = in_off + copy * d;
            if selected(e) {
                for x in 0..cells {
                    let mut arg = 0usize;
                    let mut best = input.at(base, x);
                    for ch in 1..d {
                        let v = input.at(base + ch, x);
                        if v > best {
                            best = v;
                            arg = ch;
                        }
                    }
                    din.set(base + arg, x, dout.at(out_ch, x));
                }
                out_ch += 1;
            } else {
                for ch in 0..d {
                    for x in 0..cells {
                        din.set(base + ch, x, dout.at(out_ch + ch, x));
                    }
                }
                out_ch += d;
            }
        }
        in_off += d * m;
    }
    Ok(din)
}

/// Fiber type after quotient pooling by a subgroup: regular capsules
/// become quotient capsules.
pub fn quotient_pool_fiber(fiber: &FiberType, subgroup: &[usize]) -> Result<FiberType> {
    let group = fiber.group().clone();
    let mut entries = Vec::new();
    for (c, m) in &fiber.entries {
        if c.kind != CapsuleKind::Regular {
            return Err(Error::Inadmissible {
                nonlin: "quotient_pool".into(),
                capsule: c.kind.label(),
            });
        }
        entries.push((Capsule::quotient(group.clone(), subgroup)?, *m));
    }
    FiberType::new(entries)
}

/// Per capsule copy, the `hK` output coordinate is the max over the
/// channels indexed by elements of the coset `hK`; the result transforms
/// by the quotient representation.
pub fn quotient_pool(f: &FeatureMap, subgroup: &[usize]) -> Result<FeatureMap> {
    let group = f.group().clone();
    let q = group.cosets(subgroup)?;
    let out_fiber = quotient_pool_fiber(&f.fiber, subgroup)?;
    let mut out = FeatureMap::zeros(f.window, out_fiber, f.boundary)?;
    out.approximate = f.approximate;
    let cells = f.cells();
    let layout = f.fiber.copy_layout();
    let n_cosets = q.len();
    for (copy, &(_, _, off, d)) in layout.iter().enumerate() {
        debug_assert_eq!(d, group.order);
        for (ci, coset) in q.cosets.iter().enumerate() {
            for x in 0..cells {
                let mut best = f.at(off + coset[0], x);
                for &e in &coset[1..] {
                    best = best.max(f.at(off + e, x));
                }
                out.set(copy * n_cosets + ci, x, best);
            }
        }
    }
    Ok(out)
}

/// Arg-max gradient routing for quotient pooling.
pub fn quotient_pool_backward(
    input: &FeatureMap,
    dout: &FeatureMap,
    subgroup: &[usize],
) -> Result<FeatureMap> {
    let group = input.group().clone();
    let q = group.cosets(subgroup)?;
    let mut din = FeatureMap::zeros(input.window, input.fiber.clone(), input.boundary)?;
    let cells = input.cells();
    let layout = input.fiber.copy_layout();
    let n_cosets = q.len();
    for (copy, &(_, _, off, _)) in layout.iter().enumerate() {
        for (ci, coset) in q.cosets.iter().enumerate() {
            for x in 0..cells {
                let mut arg = coset[0];
                let mut best = input.at(off + coset[0], x);
                for &e in &coset[1..] {
                    let v = input.at(off + e, x);
                    if v > best {
                        best = v;
                        arg = e;
                    }
                }
                din.set(off + arg, x, dout.at(copy * n_cosets + ci, x));
            }
        }
    }
    Ok(din)
}
