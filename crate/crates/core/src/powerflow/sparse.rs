//! Sparse complex matrix storage and an LU factorization tuned for
//! admittance matrices: structurally symmetric, diagonally strong, so the
//! factorization runs without numerical pivoting after a minimum-degree
//! symmetric reordering.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::cmp::Reverse;

use num_complex::Complex64;

/// Row-oriented sparse matrix under construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    rows: Vec<BTreeMap<usize, Complex64>>,
}

impl SparseMatrix {
    pub fn new(n: usize) -> Self {
        SparseMatrix { n, rows: vec![BTreeMap::new(); n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn add(&mut self, r: usize, c: usize, v: Complex64) {
        *self.rows[r].entry(c).or_insert(Complex64::new(0.0, 0.0)) += v;
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.rows[r].get(&c).copied().unwrap_or_default()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.rows[r].iter().map(|(&c, &v)| (c, v))
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(BTreeMap::len).sum()
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|(&c, &v)| v * x[c]).sum())
            .collect()
    }

    /// True when the nonzero pattern equals its transpose.
    pub fn is_structurally_symmetric(&self) -> bool {
        self.rows
            .iter()
            .enumerate()
            .all(|(r, row)| row.keys().all(|&c| self.rows[c].contains_key(&r)))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("matrix is numerically singular at original row {row} (pivot magnitude {pivot:e})")]
pub struct SingularMatrix {
    pub row: usize,
    pub pivot: f64,
}

/// `P A Pᵀ = L U` with unit-diagonal `L`.
#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    /// perm[k] = original index eliminated at step k
    perm: Vec<usize>,
    /// Column k of L below the diagonal: (row, value), in permuted indices.
    lower: Vec<Vec<(usize, Complex64)>>,
    /// Row k of U right of the diagonal.
    upper: Vec<Vec<(usize, Complex64)>>,
    diag: Vec<Complex64>,
}

fn minimum_degree_order(a: &SparseMatrix) -> Vec<usize> {
    let n = a.n;
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for r in 0..n {
        for (c, _) in a.row(r) {
            if c != r {
                adj[r].insert(c);
                adj[c].insert(r);
            }
        }
    }
    let mut eliminated = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..n).map(|i| Reverse((adj[i].len(), i))).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != adj[v].len() {
            continue;
        }
        eliminated[v] = true;
        order.push(v);
        let nbrs: Vec<usize> = adj[v].iter().copied().collect();
        for &u in &nbrs {
            adj[u].remove(&v);
        }
        for (i, &u) in nbrs.iter().enumerate() {
            for &w in &nbrs[i + 1..] {
                if adj[u].insert(w) {
                    adj[w].insert(u);
                }
            }
        }
        for &u in &nbrs {
            heap.push(Reverse((adj[u].len(), u)));
        }
        adj[v].clear();
    }
    order
}

impl SparseLu {
    pub fn factor(a: &SparseMatrix) -> Result<SparseLu, SingularMatrix> {
        let n = a.n;
        let perm = minimum_degree_order(a);
        let mut inv = vec![0usize; n];
        for (k, &p) in perm.iter().enumerate() {
            inv[p] = k;
        }
        let scale = (0..n)
            .flat_map(|r| a.row(r).map(|(_, v)| v.norm()))
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut rows: Vec<BTreeMap<usize, Complex64>> = vec![BTreeMap::new(); n];
        for r in 0..n {
            for (c, v) in a.row(r) {
                let (pr, pc) = (inv[r], inv[c]);
                *rows[pr].entry(pc).or_default() += v;
                rows[pc].entry(pr).or_default();
            }
        }
        let mut lower = vec![Vec::new(); n];
        let mut upper = vec![Vec::new(); n];
        let mut diag = vec![Complex64::default(); n];
        for k in 0..n {
            let row_k = std::mem::take(&mut rows[k]);
            let pivot = row_k.get(&k).copied().unwrap_or_default();
            if pivot.norm() <= 1e-15 * scale {
                return Err(SingularMatrix { row: perm[k], pivot: pivot.norm() });
            }
            diag[k] = pivot;
            let right: Vec<(usize, Complex64)> = row_k.range(k + 1..).map(|(&c, &v)| (c, v)).collect();
            for &(j, _) in &right {
                // structural symmetry: row j holds the column-k entry
                let Some(ajk) = rows[j].remove(&k) else { continue };
                let l = ajk / pivot;
                if l == Complex64::default() {
                    for &(m, _) in &right {
                        rows[j].entry(m).or_default();
                    }
                    continue;
                }
                lower[k].push((j, l));
                for &(m, ukm) in &right {
                    *rows[j].entry(m).or_default() -= l * ukm;
                }
            }
            upper[k] = right;
        }
        Ok(SparseLu { n, perm, lower, upper, diag })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut y: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for k in 0..self.n {
            let yk = y[k];
            if yk != Complex64::default() {
                for &(j, l) in &self.lower[k] {
                    y[j] -= l * yk;
                }
            }
        }
        for k in (0..self.n).rev() {
            let mut acc = y[k];
            for &(m, u) in &self.upper[k] {
                acc -= u * y[m];
            }
            y[k] = acc / self.diag[k];
        }
        let mut x = vec![Complex64::default(); self.n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }

    /// Stored factor entries, a fill measure.
    pub fn nnz(&self) -> usize {
        self.n + self.lower.iter().map(Vec::len).sum::<usize>() + self.upper.iter().map(Vec::len).sum::<usize>()
    }
}

/// Inverse of a small dense complex matrix by Gauss-Jordan with partial
/// pivoting. `None` when singular.
pub fn invert_dense(m: &[Vec<Complex64>]) -> Option<Vec<Vec<Complex64>>> {
    let n = m.len();
    let mut a: Vec<Vec<Complex64>> = m.to_vec();
    let mut inv: Vec<Vec<Complex64>> =
        (0..n).map(|i| (0..n).map(|j| if i == j { Complex64::new(1.0, 0.0) } else { Complex64::default() }).collect()).collect();
    let scale = m.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))?;
        if a[piv][col].norm() <= 1e-14 * scale {
            return None;
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col];
        for j in 0..n {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                if f != Complex64::default() {
                    for j in 0..n {
                        let (acj, icj) = (a[col][j], inv[col][j]);
                        a[i][j] -= f * acj;
                        inv[i][j] -= f * icj;
                    }
                }
            }
        }
    }
    Some(inv)
}
