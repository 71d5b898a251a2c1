//! Sparse symmetric positive-definite direct solver.
//!
//! Rows are reordered by reverse Cuthill-McKee, the matrix is Jacobi-scaled to
//! unit diagonal and factored as `L L^T` in variable-band (skyline) storage.
//! Pivots of the scaled matrix below [`PIVOT_TOLERANCE`] flag a
//! mechanism: a zero-energy mode the constraints failed to remove.

use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};

pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Symmetric matrix assembled entry by entry; only the lower triangle is kept.
#[derive(Clone, Debug)]
pub struct SparseSymmetric {
    rows: Vec<BTreeMap<usize, f64>>,
}

impl SparseSymmetric {
    pub fn new(n: usize) -> Self {
        SparseSymmetric { rows: vec![BTreeMap::new(); n] }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Adds `value` at `(i, j)`; `(j, i)` is implied.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (r, c) = if j > i { (j, i) } else { (i, j) };
        *self.rows[r].entry(c).or_insert(0.0) += value;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if j > i { (j, i) } else { (i, j) };
        self.rows[r].get(&c).copied().unwrap_or(0.0)
    }

    pub fn nonzeros(&self) -> usize {
        self.rows.iter().map(|r| 2 * r.len()).sum::<usize>() - self.rows.len()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        for (r, row) in self.rows.iter().enumerate() {
            for (&c, &v) in row {
                y[r] += v * x[c];
                if c != r {
                    y[c] += v * x[r];
                }
            }
        }
        y
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.dim()];
        for (r, row) in self.rows.iter().enumerate() {
            for &c in row.keys() {
                if c != r {
                    adj[r].push(c);
                    adj[c].push(r);
                }
            }
        }
        adj
    }
}

/// Reverse Cuthill-McKee ordering; returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            next.dedup();
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

#[derive(Clone, Debug)]
pub struct SkylineCholesky {
    perm: Vec<usize>,
    scale: Vec<f64>,
    first: Vec<usize>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(matrix: &SparseSymmetric) -> Result<Self> {
        let n = matrix.dim();
        let perm = reverse_cuthill_mckee(&matrix.adjacency());
        let mut inverse = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }

        let mut scale = vec![0.0; n];
        for (old, s) in scale.iter_mut().enumerate() {
            let d = matrix.get(old, old);
            if !d.is_finite() {
                return Err(Error::NumericalFailure(format!("non-finite diagonal at dof {old}")));
            }
            if d <= 0.0 {
                return Err(Error::Mechanism { dof: old, pivot: d });
            }
            *s = 1.0 / d.sqrt();
        }

        let mut first: Vec<usize> = (0..n).collect();
        for (r, row) in matrix.rows.iter().enumerate() {
            for &c in row.keys() {
                let (i, j) = (inverse[r], inverse[c]);
                let (hi, lo) = if i > j { (i, j) } else { (j, i) };
                first[hi] = first[hi].min(lo);
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for i in 0..n {
            offsets.push(offsets[i] + i - first[i] + 1);
        }
        let mut values = vec![0.0; offsets[n]];
        for (r, row) in matrix.rows.iter().enumerate() {
            for (&c, &v) in row {
                let (i, j) = (inverse[r], inverse[c]);
                let (hi, lo) = if i > j { (i, j) } else { (j, i) };
                values[offsets[hi] + lo - first[hi]] = v * scale[r] * scale[c];
            }
        }

        for i in 0..n {
            let row_i = offsets[i];
            for j in first[i]..i {
                let row_j = offsets[j];
                let k0 = first[i].max(first[j]);
                let mut sum = values[row_i + j - first[i]];
                for k in k0..j {
                    sum -= values[row_i + k - first[i]] * values[row_j + k - first[j]];
                }
                values[row_i + j - first[i]] = sum / values[row_j + j - first[j]];
            }
            let mut d = values[row_i + i - first[i]];
            for k in first[i]..i {
                let l = values[row_i + k - first[i]];
                d -= l * l;
            }
            if !d.is_finite() {
                return Err(Error::NumericalFailure(format!("non-finite pivot at dof {}", perm[i])));
            }
            if d <= PIVOT_TOLERANCE {
                return Err(Error::Mechanism { dof: perm[i], pivot: d });
            }
            values[row_i + i - first[i]] = d.sqrt();
        }
        Ok(SkylineCholesky { perm, scale, first, offsets, values })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Stored entries of the factor (envelope size).
    pub fn envelope(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: rhs.len() });
        }
        let mut y: Vec<f64> = self.perm.iter().map(|&old| rhs[old] * self.scale[old]).collect();
        // forward: L z = y
        for i in 0..n {
            let row = self.offsets[i];
            let mut sum = y[i];
            for k in self.first[i]..i {
                sum -= self.values[row + k - self.first[i]] * y[k];
            }
            y[i] = sum / self.values[row + i - self.first[i]];
        }
        // backward: L^T x = z, column-oriented over the row storage
        for i in (0..n).rev() {
            let row = self.offsets[i];
            y[i] /= self.values[row + i - self.first[i]];
            let xi = y[i];
            for k in self.first[i]..i {
                y[k] -= self.values[row + k - self.first[i]] * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new] * self.scale[old];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("solution contains non-finite values".into()));
        }
        Ok(x)
    }
}
