//! Dense `f64` matrices sized for desk-scale representation theory.
//!
//! Hand-rolled on purpose: every matrix in this crate is small (a few
//! hundred rows at most) and the one numerically delicate routine, the
//! null-space SVD, wants explicit control over its zero threshold.

use std::fmt;

#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows.min(12) {
            write!(f, "  ")?;
            for c in 0..self.cols.min(12) {
                write!(f, "{:9.4} ", self.at(r, c))?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.set(r, c, f(r, c));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn add_at(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] += v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn col_vec(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.at(r, c)).collect()
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(r, k);
                if a == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "mul_vec shape mismatch");
        let mut out = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = self.row(r);
            out[r] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.at(r, c));
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Mat {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (v, w) in out.data.iter_mut().zip(&other.data) {
            *v += w;
        }
        out
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (v, w) in out.data.iter_mut().zip(&other.data) {
            *v -= w;
        }
        out
    }

    pub fn frob_dot(&self, other: &Mat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.frob_dot(self).sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn trace(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        (0..self.rows).map(|i| self.at(i, i)).sum()
    }

    /// Gauss-Jordan inverse with partial pivoting. `None` for singular input.
    pub fn inverse(&self) -> Option<Mat> {
        assert_eq!(self.rows, self.cols, "inverse of non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Mat::identity(n);
        for col in 0..n {
            let mut pivot = col;
            let mut best = a.at(col, col).abs();
            for r in (col + 1)..n {
                let v = a.at(r, col).abs();
                if v > best {
                    best = v;
                    pivot = r;
                }
            }
            if best < 1e-12 {
                return None;
            }
            if pivot != col {
                for c in 0..n {
                    let (x, y) = (a.at(col, c), a.at(pivot, c));
                    a.set(col, c, y);
                    a.set(pivot, c, x);
                    let (x, y) = (inv.at(col, c), inv.at(pivot, c));
                    inv.set(col, c, y);
                    inv.set(pivot, c, x);
                }
            }
            let d = a.at(col, col);
            for c in 0..n {
                a.set(col, c, a.at(col, c) / d);
                inv.set(col, c, inv.at(col, c) / d);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a.at(r, col);
                if f == 0.0 {
                    continue;
                }
                for c in 0..n {
                    a.set(r, c, a.at(r, c) - f * a.at(col, c));
                    inv.set(r, c, inv.at(r, c) - f * inv.at(col, c));
                }
            }
        }
        Some(inv)
    }

    /// Kronecker product `self (x) other`.
    pub fn kron(&self, other: &Mat) -> Mat {
        let mut out = Mat::zeros(self.rows * other.rows, self.cols * other.cols);
        for r1 in 0..self.rows {
            for c1 in 0..self.cols {
                let a = self.at(r1, c1);
                if a == 0.0 {
                    continue;
                }
                for r2 in 0..other.rows {
                    for c2 in 0..other.cols {
                        out.set(
                            r1 * other.rows + r2,
                            c1 * other.cols + c2,
                            a * other.at(r2, c2),
                        );
                    }
                }
            }
        }
        out
    }
}

/// Thin SVD result; `v` holds right singular vectors as columns, aligned
/// with `singular` in descending order.
pub struct Svd {
    pub singular: Vec<f64>,
    pub v: Mat,
}

/// One-sided Jacobi SVD. Orthogonalizes the columns of `a` by right
/// rotations; the accumulated rotations give the right singular vectors.
/// Columns are kept contiguous and their norms cached, so converged
/// sweeps only cost one dot product per pair.
pub fn jacobi_svd(a: &Mat) -> Svd {
    let m = a.rows();
    let n = a.cols();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|c| a.col_vec(c)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|c| {
            let mut e = vec![0.0; n];
            e[c] = 1.0;
            e
        })
        .collect();
    let mut norms2: Vec<f64> = cols
        .iter()
        .map(|col| col.iter().map(|x| x * x).sum())
        .collect();
    // Rotation threshold: converged when every column pair is orthogonal
    // to this relative level.Ively degenerate spectra (integer constraint
    // matrices have heavily clustered singular values) never settle at
    // machine epsilon, so the threshold sits three decades above it; the
    // null-space cutoff at 1e-8 has orders of magnitude of headroom.
    let total: f64 = norms2.iter().sum();
    let eps = 1e-13;
    let tol2 = eps * eps * total.max(1e-300);

    let rotate = |acol: &mut [f64], bcol: &mut [f64], cs: f64, sn: f64| {
        for (x, y) in acol.iter_mut().zip(bcol.iter_mut()) {
            let (a0, b0) = (*x, *y);
            *x = cs * a0 - sn * b0;
            *y = sn * a0 + cs * b0;
        }
    };

    let mut sweeps_used = 0;
    for _sweep in 0..64 {
        sweeps_used += 1;
        // refresh cached norms; incremental updates drift over a sweep
        for (c, col) in cols.iter().enumerate() {
            norms2[c] = col.iter().map(|x| x * x).sum();
        }
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = norms2[p];
                let beta = norms2[q];
                if alpha <= tol2 && beta <= tol2 {
                    continue;
                }
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                let (head, tail) = cols.split_at_mut(q);
                rotate(&mut head[p], &mut tail[0], cs, sn);
                let (head, tail) = vcols.split_at_mut(q);
                rotate(&mut head[p], &mut tail[0], cs, sn);
                norms2[p] = alpha - t * gamma;
                norms2[q] = beta + t * gamma;
            }
        }
        if !rotated {
            break;
        }
    }
    if std::env::var_os("EQUIVAR_SVD_TRACE").is_some() {
        eprintln!("jacobi_svd {}x{}: {} sweeps", m, n, sweeps_used);
    }

    let _ = m;
    let mut order: Vec<usize> = (0..n).collect();
    let sigmas: Vec<f64> = cols
        .iter()
        .map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&i, &j| sigmas[j].partial_cmp(&sigmas[i]).unwrap());
    let singular: Vec<f64> = order.iter().map(|&i| sigmas[i]).collect();
    let v_sorted = Mat::from_fn(n, n, |r, c| vcols[order[c]][r]);
    Svd {
        singular,
        v: v_sorted,
    }
}

/// Orthonormal basis of the right null space of `a`: singular directions
/// whose singular value is at most `rel_tol` times the largest one.
pub fn null_space(a: &Mat, rel_tol: f64) -> Vec<Vec<f64>> {
    let svd = jacobi_svd(a);
    let smax = svd.singular.first().copied().unwrap_or(0.0);
    let cut = rel_tol * smax;
    let mut basis = Vec::new();
    for (i, &s) in svd.singular.iter().enumerate() {
        if s <= cut {
            basis.push(svd.v.col_vec(i));
        }
    }
    basis
}

/// Incremental Gram-Schmidt span tracker used to pick linearly
/// independent vectors deterministically.
#[derive(Clone)]
pub struct SpanTracker {
    ortho: Vec<Vec<f64>>,
    tol: f64,
}

impl SpanTracker {
    pub fn new(tol: f64) -> Self {
        SpanTracker {
            ortho: Vec::new(),
            tol,
        }
    }

    pub fn len(&self) -> usize {
        self.ortho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ortho.is_empty()
    }

    /// Residual norm of `v` against the tracked span.
    pub fn residual_norm(&self, v: &[f64]) -> f64 {
        self.residual(v).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn residual(&self, v: &[f64]) -> Vec<f64> {
        let mut r = v.to_vec();
        // two passes of classical Gram-Schmidt for numerical stability
        for _ in 0..2 {
            for b in &self.ortho {
                let d: f64 = r.iter().zip(b).map(|(a, c)| a * c).sum();
                for (x, c) in r.iter_mut().zip(b) {
                    *x -= d * c;
                }
            }
        }
        r
    }

    /// Adds `v` to the span when it is independent; returns whether it was added.
    pub fn try_add(&mut self, v: &[f64]) -> bool {
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if scale == 0.0 {
            return false;
        }
        let r = self.residual(v);
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= self.tol * scale.max(1.0) {
            return false;
        }
        self.ortho.push(r.iter().map(|x| x / norm).collect());
        true
    }
}
