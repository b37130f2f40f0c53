//! Exact arithmetic for stabilizer groups and semidirect products `Z^n ⋊ H`.
//!
//! A stabilizer group is stored as an element table with an exact integer
//! multiplication table, derived by closing the generator matrices of the
//! grid action under multiplication. No floating point enters the group
//! law. Elements of the semidirect product are (translation, stabilizer
//! index) pairs composing by `(n1,h1)(n2,h2) = (n1 + φ(h1)n2, h1h2)`.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// integer matrices for the grid action
// ---------------------------------------------------------------------------

/// Square integer matrix acting on grid points.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct IntMat {
    n: usize,
    data: Vec<i64>,
}

impl IntMat {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![0; n * n];
        for i in 0..n {
            data[i * n + i] = 1;
        }
        IntMat { n, data }
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            assert_eq!(row.len(), n, "square matrix expected");
            data.extend_from_slice(row);
        }
        IntMat { n, data }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> i64 {
        self.data[r * self.n + c]
    }

    pub fn matmul(&self, other: &IntMat) -> IntMat {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = vec![0i64; n * n];
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a == 0 {
                    continue;
                }
                for c in 0..n {
                    out[r * n + c] += a * other.data[k * n + c];
                }
            }
        }
        IntMat { n, data: out }
    }

    pub fn mul_vec(&self, v: &[i64]) -> Result<Vec<i64>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        let mut out = vec![0i64; self.n];
        for r in 0..self.n {
            let mut acc: i64 = 0;
            for c in 0..self.n {
                let term = self
                    .at(r, c)
                    .checked_mul(v[c])
                    .ok_or(Error::TranslationOverflow)?;
                acc = acc.checked_add(term).ok_or(Error::TranslationOverflow)?;
            }
            out[r] = acc;
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// stabilizer groups
// ---------------------------------------------------------------------------

/// Finite group of grid symmetries fixing the origin, with exact tables.
#[derive(Debug)]
pub struct StabilizerGroup {
    pub name: String,
    pub order: usize,
    /// Dimension of the grid the group acts on.
    pub n: usize,
    mul: Vec<Vec<usize>>,
    inv: Vec<usize>,
    pub generators: Vec<usize>,
    pub element_labels: Vec<String>,
    point_maps: Vec<IntMat>,
}

/// JSON shape of `group dump`.
#[derive(Serialize, Deserialize)]
pub struct GroupDump {
    pub name: String,
    pub order: usize,
    pub element_labels: Vec<String>,
    pub mul_table: Vec<Vec<usize>>,
}

impl StabilizerGroup {
    /// Builds one of the supported stabilizer groups.
    ///
    /// Supported names: `C4`, `D4`, and `S1`..`S6`. Irrep tables exist for
    /// C4, D4, S2 and S3 only; the larger symmetric groups still provide
    /// the exact group law needed by regular and quotient capsules.
    pub fn build(name: &str) -> Result<Arc<StabilizerGroup>> {
        let canonical: Vec<(String, IntMat)> = match name {
            "C4" => rotation_elements(false),
            "D4" => rotation_elements(true),
            "S1" | "S2" | "S3" | "S4" | "S5" | "S6" => {
                let n: usize = name[1..].parse().unwrap();
                symmetric_elements(n)
            }
            _ => return Err(Error::UnsupportedGroup(name.to_string())),
        };
        let n = canonical[0].1.size();
        let order = canonical.len();
        let labels: Vec<String> = canonical.iter().map(|(l, _)| l.clone()).collect();
        let mats: Vec<IntMat> = canonical.into_iter().map(|(_, m)| m).collect();

        let mut index: HashMap<IntMat, usize> = HashMap::new();
        for (i, m) in mats.iter().enumerate() {
            if index.insert(m.clone(), i).is_some() {
                return Err(Error::InconsistentRepresentation(format!(
                    "duplicate element matrix in {name}"
                )));
            }
        }

        let generators = generator_indices(name, &mats, &index);
        closure_check(&mats, &generators, &index, name)?;

        let mut mul = vec![vec![0usize; order]; order];
        for a in 0..order {
            for b in 0..order {
                let prod = mats[a].matmul(&mats[b]);
                mul[a][b] = *index.get(&prod).ok_or_else(|| {
                    Error::InconsistentRepresentation(format!("{name} not closed under product"))
                })?;
            }
        }
        let mut inv = vec![0usize; order];
        for a in 0..order {
            let mut found = None;
            for b in 0..order {
                if mul[a][b] == 0 && mul[b][a] == 0 {
                    found = Some(b);
                    break;
                }
            }
            inv[a] = found.ok_or_else(|| {
                Error::InconsistentRepresentation(format!("{name} element without inverse"))
            })?;
        }

        let group = StabilizerGroup {
            name: name.to_string(),
            order,
            n,
            mul,
            inv,
            generators,
            element_labels: labels,
            point_maps: mats,
        };
        group.validate()?;
        Ok(Arc::new(group))
    }

    fn validate(&self) -> Result<()> {
        let o = self.order;
        let bad = |msg: String| Err(Error::InconsistentRepresentation(msg));
        if self.point_maps[0] != IntMat::identity(self.n) {
            return bad(format!("{}: element 0 is not the identity", self.name));
        }
        // Latin square
        for a in 0..o {
            let mut seen_row = vec![false; o];
            let mut seen_col = vec![false; o];
            for b in 0..o {
                seen_row[self.mul[a][b]] = true;
                seen_col[self.mul[b][a]] = true;
            }
            if seen_row.iter().any(|s| !s) || seen_col.iter().any(|s| !s) {
                return bad(format!(
                    "{}: multiplication table is not a Latin square",
                    self.name
                ));
            }
        }
        for a in 0..o {
            if self.mul[self.inv[a]][a] != 0 {
                return bad(format!("{}: inverse table broken at {a}", self.name));
            }
        }
        // associativity is exhaustively checkable at desk-scale orders
        if o <= 48 {
            for a in 0..o {
                for b in 0..o {
                    for c in 0..o {
                        if self.mul[self.mul[a][b]][c] != self.mul[a][self.mul[b][c]] {
                            return bad(format!("{}: associativity fails", self.name));
                        }
                    }
                }
            }
        }
        // the grid action must be a homomorphism
        for a in 0..o {
            for b in 0..o {
                let prod = self.point_maps[a].matmul(&self.point_maps[b]);
                if prod != self.point_maps[self.mul[a][b]] {
                    return bad(format!("{}: grid action is not a homomorphism", self.name));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.mul[a][b]
    }

    #[inline]
    pub fn inv(&self, a: usize) -> usize {
        self.inv[a]
    }

    pub fn identity(&self) -> usize {
        0
    }

    pub fn mul_table(&self) -> &[Vec<usize>] {
        &self.mul
    }

    pub fn point_map(&self, h: usize) -> &IntMat {
        &self.point_maps[h]
    }

    /// Applies the grid action of stabilizer element `h` to a point.
    pub fn act_point(&self, h: usize, x: &[i64]) -> Result<Vec<i64>> {
        self.point_maps[h].mul_vec(x)
    }

    pub fn dump(&self) -> GroupDump {
        GroupDump {
            name: self.name.clone(),
            order: self.order,
            element_labels: self.element_labels.clone(),
            mul_table: self.mul.clone(),
        }
    }

    /// Checks a group-context match between two values built on possibly
    /// different `Arc` instances of the same group.
    pub fn same_context(&self, other: &StabilizerGroup) -> bool {
        self.name == other.name && self.order == other.order && self.n == other.n
    }

    // -- semidirect product ------------------------------------------------

    pub fn identity_element(&self) -> SemidirectElement {
        SemidirectElement {
            translation: vec![0; self.n],
            stab: 0,
        }
    }

    fn check_dim(&self, e: &SemidirectElement) -> Result<()> {
        if e.translation.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: e.translation.len(),
            });
        }
        if e.stab >= self.order {
            return Err(Error::ContextMismatch(format!(
                "stabilizer index {} out of range for {}",
                e.stab, self.name
            )));
        }
        Ok(())
    }

    /// `(n1,h1)(n2,h2) = (n1 + φ(h1) n2, h1 h2)`.
    pub fn compose(
        &self,
        a: &SemidirectElement,
        b: &SemidirectElement,
    ) -> Result<SemidirectElement> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        let moved = self.act_point(a.stab, &b.translation)?;
        let mut t = Vec::with_capacity(self.n);
        for (x, y) in a.translation.iter().zip(&moved) {
            t.push(x.checked_add(*y).ok_or(Error::TranslationOverflow)?);
        }
        Ok(SemidirectElement {
            translation: t,
            stab: self.mul(a.stab, b.stab),
        })
    }

    /// `(n,h)^{-1} = (-φ(h^{-1}) n, h^{-1})`.
    pub fn inverse_element(&self, a: &SemidirectElement) -> Result<SemidirectElement> {
        self.check_dim(a)?;
        let hinv = self.inv(a.stab);
        let moved = self.act_point(hinv, &a.translation)?;
        Ok(SemidirectElement {
            translation: moved.iter().map(|v| -v).collect(),
            stab: hinv,
        })
    }

    /// Action of `g = (t, h)` on a grid point: `φ(h) x + t`.
    pub fn act_on_point(&self, g: &SemidirectElement, x: &[i64]) -> Result<Vec<i64>> {
        self.check_dim(g)?;
        let mut y = self.act_point(g.stab, x)?;
        for (v, t) in y.iter_mut().zip(&g.translation) {
            *v = v.checked_add(*t).ok_or(Error::TranslationOverflow)?;
        }
        Ok(y)
    }

    /// Homogeneous `(n+1) x (n+1)` matrix form of a semidirect element.
    pub fn to_homogeneous(&self, g: &SemidirectElement) -> Result<IntMat> {
        self.check_dim(g)?;
        let n = self.n;
        let map = &self.point_maps[g.stab];
        let mut rows = Vec::with_capacity(n + 1);
        for r in 0..n {
            let mut row: Vec<i64> = (0..n).map(|c| map.at(r, c)).collect();
            row.push(g.translation[r]);
            rows.push(row);
        }
        let mut last = vec![0i64; n + 1];
        last[n] = 1;
        rows.push(last);
        Ok(IntMat::from_rows(&rows))
    }

    // -- subgroups and cosets ----------------------------------------------

    /// Verifies that the element set is a subgroup (identity, closure,
    /// inverses).
    pub fn check_subgroup(&self, set: &[usize]) -> Result<Vec<usize>> {
        let mut elems: Vec<usize> = set.to_vec();
        elems.sort_unstable();
        elems.dedup();
        if elems.iter().any(|&e| e >= self.order) {
            return Err(Error::NotASubgroup("element index out of range".into()));
        }
        if !elems.contains(&0) {
            return Err(Error::NotASubgroup("missing identity".into()));
        }
        let member = |x: usize| elems.binary_search(&x).is_ok();
        for &a in &elems {
            if !member(self.inv(a)) {
                return Err(Error::NotASubgroup(format!(
                    "not closed under inverse at {}",
                    self.element_labels[a]
                )));
            }
            for &b in &elems {
                if !member(self.mul(a, b)) {
                    return Err(Error::NotASubgroup(format!(
                        "not closed under product at {} * {}",
                        self.element_labels[a], self.element_labels[b]
                    )));
                }
            }
        }
        Ok(elems)
    }

    /// Left cosets `gK`, ordered by their smallest element index.
    pub fn cosets(&self, subgroup: &[usize]) -> Result<QuotientSpace> {
        let k = self.check_subgroup(subgroup)?;
        let mut rep_of = vec![usize::MAX; self.order];
        let mut cosets: Vec<Vec<usize>> = Vec::new();
        let mut representatives = Vec::new();
        for g in 0..self.order {
            if rep_of[g] != usize::MAX {
                continue;
            }
            let mut coset: Vec<usize> = k.iter().map(|&x| self.mul(g, x)).collect();
            coset.sort_unstable();
            let idx = cosets.len();
            for &e in &coset {
                rep_of[e] = idx;
            }
            representatives.push(g);
            cosets.push(coset);
        }
        debug_assert_eq!(cosets.len() * k.len(), self.order);
        Ok(QuotientSpace {
            subgroup: k,
            cosets,
            rep_of,
            representatives,
        })
    }
}

/// Partition of a stabilizer group into left cosets of a subgroup.
#[derive(Debug, Clone)]
pub struct QuotientSpace {
    pub subgroup: Vec<usize>,
    pub cosets: Vec<Vec<usize>>,
    /// element index -> coset index
    pub rep_of: Vec<usize>,
    /// smallest element of each coset
    pub representatives: Vec<usize>,
}

impl QuotientSpace {
    pub fn len(&self) -> usize {
        self.cosets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cosets.is_empty()
    }

    /// Left and right cosets coincide exactly when the subgroup is normal.
    pub fn is_normal(&self, group: &StabilizerGroup) -> bool {
        for g in 0..group.order {
            let mut right: Vec<usize> = self.subgroup.iter().map(|&k| group.mul(k, g)).collect();
            right.sort_unstable();
            if right != self.cosets[self.rep_of[g]] {
                return false;
            }
        }
        true
    }
}

/// Element of `Z^n ⋊ H`: an integer translation plus a stabilizer index.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SemidirectElement {
    pub translation: Vec<i64>,
    pub stab: usize,
}

impl SemidirectElement {
    pub fn new(translation: Vec<i64>, stab: usize) -> Self {
        SemidirectElement { translation, stab }
    }

    /// Pure translation.
    pub fn translation(t: Vec<i64>) -> Self {
        SemidirectElement {
            translation: t,
            stab: 0,
        }
    }

    /// Pure stabilizer transform.
    pub fn stabilizer(n: usize, h: usize) -> Self {
        SemidirectElement {
            translation: vec![0; n],
            stab: h,
        }
    }
}

// ---------------------------------------------------------------------------
// construction helpers
// ---------------------------------------------------------------------------

fn rot90() -> IntMat {
    IntMat::from_rows(&[vec![0, -1], vec![1, 0]])
}

fn mirror() -> IntMat {
    IntMat::from_rows(&[vec![-1, 0], vec![0, 1]])
}

/// C4 as `r^k`; D4 additionally has `m r^k`, matching the column order of
/// the dihedral irrep table.
fn rotation_elements(with_mirror: bool) -> Vec<(String, IntMat)> {
    let r = rot90();
    let mut out = Vec::new();
    let mut cur = IntMat::identity(2);
    for k in 0..4 {
        let label = match k {
            0 => "e".to_string(),
            1 => "r".to_string(),
            k => format!("r{k}"),
        };
        out.push((label, cur.clone()));
        cur = r.matmul(&cur);
    }
    if with_mirror {
        let m = mirror();
        let mut cur = IntMat::identity(2);
        for k in 0..4 {
            let label = if k == 0 {
                "m".to_string()
            } else {
                format!("mr{k}")
            };
            let label = if k == 1 { "mr".to_string() } else { label };
            out.push((label, m.matmul(&cur)));
            cur = rot90().matmul(&cur);
        }
    }
    out
}

fn perm_matrix(perm: &[usize]) -> IntMat {
    let n = perm.len();
    let mut rows = vec![vec![0i64; n]; n];
    for (j, &img) in perm.iter().enumerate() {
        rows[img][j] = 1;
    }
    IntMat::from_rows(&rows)
}

fn cycle_label(perm: &[usize]) -> String {
    let n = perm.len();
    let mut seen = vec![false; n];
    let mut label = String::new();
    for start in 0..n {
        if seen[start] || perm[start] == start {
            seen[start] = true;
            continue;
        }
        let mut cyc = vec![start];
        seen[start] = true;
        let mut cur = perm[start];
        while cur != start {
            seen[cur] = true;
            cyc.push(cur);
            cur = perm[cur];
        }
        label.push('(');
        for v in cyc {
            label.push_str(&(v + 1).to_string());
        }
        label.push(')');
    }
    if label.is_empty() {
        label.push('e');
    }
    label
}

fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    permute_rec(&mut cur, 0, &mut out);
    out
}

fn permute_rec(cur: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == cur.len() {
        out.push(cur.clone());
        return;
    }
    for i in k..cur.len() {
        cur.swap(k, i);
        permute_rec(cur, k + 1, out);
        cur.swap(k, i);
    }
}

/// Elements of `S_n` ordered by (number of moved points, cycle label), so
/// the identity comes first, then transpositions, then longer cycles. For
/// `S_3` this reproduces the order e, (12), (13), (23), (123), (132).
fn symmetric_elements(n: usize) -> Vec<(String, IntMat)> {
    assert!((1..=6).contains(&n));
    let mut perms = all_permutations(n);
    let moved = |p: &[usize]| p.iter().enumerate().filter(|(i, &v)| *i != v).count();
    perms.sort_by_key(|p| (moved(p), cycle_label(p)));
    perms
        .into_iter()
        .map(|p| (cycle_label(&p), perm_matrix(&p)))
        .collect()
}

fn generator_indices(name: &str, mats: &[IntMat], index: &HashMap<IntMat, usize>) -> Vec<usize> {
    match name {
        "C4" => vec![index[&rot90()]],
        "D4" => vec![index[&rot90()], index[&mirror()]],
        "S1" => vec![],
        _ => {
            let n = mats[0].size();
            // transposition (12) and the full cycle (12..n)
            let mut swap: Vec<usize> = (0..n).collect();
            swap.swap(0, 1);
            let mut cyc: Vec<usize> = (1..n).collect();
            cyc.push(0);
            let mut gens = vec![index[&perm_matrix(&swap)]];
            if n > 2 {
                gens.push(index[&perm_matrix(&cyc)]);
            }
            gens
        }
    }
}

/// Breadth-first closure from the generators must reproduce the whole
/// element table; catches typos in the canonical element lists.
fn closure_check(
    mats: &[IntMat],
    generators: &[usize],
    index: &HashMap<IntMat, usize>,
    name: &str,
) -> Result<()> {
    let mut reached = vec![false; mats.len()];
    reached[0] = true;
    let mut frontier = vec![0usize];
    while let Some(a) = frontier.pop() {
        for &g in generators {
            let prod = mats[a].matmul(&mats[g]);
            let idx = *index.get(&prod).ok_or_else(|| {
                Error::InconsistentRepresentation(format!("{name}: generator escapes table"))
            })?;
            if !reached[idx] {
                reached[idx] = true;
                frontier.push(idx);
            }
        }
    }
    if reached.iter().any(|r| !r) && !generators.is_empty() {
        return Err(Error::InconsistentRepresentation(format!(
            "{name}: generators do not generate the group"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
