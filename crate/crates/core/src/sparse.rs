//! Coordinate-pair (COO) sparse matrices and the sparse-dense products the
//! follow strategies are built from. Sparse-sparse products are not
//! provided.

use ndarray::{Array2, ArrayView2, ArrayViewMut2, Zip};

use crate::error::{KbError, Result};

/// Sparse matrix as a row-major sorted list of unique `(row, col)` pairs with
/// a parallel weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CooMatrix {
    n_rows: usize,
    n_cols: usize,
    ind: Vec<(usize, usize)>,
    w: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transpose {
    No,
    Yes,
}

impl CooMatrix {
    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        CooMatrix {
            n_rows,
            n_cols,
            ind: Vec::new(),
            w: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        CooMatrix {
            n_rows: n,
            n_cols: n,
            ind: (0..n).map(|i| (i, i)).collect(),
            w: vec![1.0; n],
        }
    }

    /// Validating constructor: entries may come in any order but must be
    /// unique and in bounds.
    pub fn new(n_rows: usize, n_cols: usize, ind: Vec<(usize, usize)>, w: Vec<f64>) -> Result<Self> {
        if ind.len() != w.len() {
            return Err(KbError::InvalidMatrix(format!(
                "{} index pairs but {} weights",
                ind.len(),
                w.len()
            )));
        }
        if let Some(&(i, j)) = ind.iter().find(|&&(i, j)| i >= n_rows || j >= n_cols) {
            return Err(KbError::InvalidMatrix(format!(
                "entry ({i}, {j}) outside {n_rows}x{n_cols}"
            )));
        }
        let mut entries: Vec<_> = ind.into_iter().zip(w).collect();
        entries.sort_by_key(|e| e.0);
        if let Some(pair) = entries.windows(2).find(|p| p[0].0 == p[1].0) {
            return Err(KbError::InvalidMatrix(format!("duplicate entry {:?}", pair[0].0)));
        }
        let (ind, w) = entries.into_iter().unzip();
        Ok(CooMatrix { n_rows, n_cols, ind, w })
    }

    /// Builds a matrix from possibly repeated entries, summing duplicates.
    pub fn from_summed(n_rows: usize, n_cols: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(i, j, _)) = entries.iter().find(|&&(i, j, _)| i >= n_rows || j >= n_cols) {
            return Err(KbError::InvalidMatrix(format!(
                "entry ({i}, {j}) outside {n_rows}x{n_cols}"
            )));
        }
        entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut ind: Vec<(usize, usize)> = Vec::with_capacity(entries.len());
        let mut w: Vec<f64> = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            match ind.last() {
                Some(&last) if last == (i, j) => *w.last_mut().expect("parallel") += v,
                _ => {
                    ind.push((i, j));
                    w.push(v);
                }
            }
        }
        Ok(CooMatrix { n_rows, n_cols, ind, w })
    }

    pub(crate) fn from_sorted_unchecked(n_rows: usize, n_cols: usize, ind: Vec<(usize, usize)>, w: Vec<f64>) -> Self {
        debug_assert!(ind.windows(2).all(|p| p[0] < p[1]));
        debug_assert!(ind.iter().all(|&(i, j)| i < n_rows && j < n_cols));
        CooMatrix { n_rows, n_cols, ind, w }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn nnz(&self) -> usize {
        self.ind.len()
    }

    /// The `N x 2` index list.
    pub fn indices(&self) -> &[(usize, usize)] {
        &self.ind
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.ind.iter().zip(&self.w).map(|(&(i, j), &v)| (i, j, v))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.ind.binary_search(&(i, j)) {
            Ok(k) => self.w[k],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> CooMatrix {
        let mut entries: Vec<_> = self.iter().map(|(i, j, v)| ((j, i), v)).collect();
        entries.sort_unstable_by_key(|e| e.0);
        let (ind, w) = entries.into_iter().unzip();
        CooMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            ind,
            w,
        }
    }

    /// Rows `range` as a new matrix with rebased row indices.
    pub fn row_slice(&self, rows: std::ops::Range<usize>) -> CooMatrix {
        let lo = self.ind.partition_point(|&(i, _)| i < rows.start);
        let hi = self.ind.partition_point(|&(i, _)| i < rows.end);
        CooMatrix {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            ind: self.ind[lo..hi].iter().map(|&(i, j)| (i - rows.start, j)).collect(),
            w: self.w[lo..hi].to_vec(),
        }
    }

    /// Stacks matrices with equal column counts vertically.
    pub fn vstack(parts: &[CooMatrix]) -> Result<CooMatrix> {
        let n_cols = parts.first().map_or(0, |p| p.n_cols);
        let mut out = CooMatrix::empty(0, n_cols);
        for p in parts {
            if p.n_cols != n_cols {
                return Err(KbError::dims(format!("vstack: {} vs {} columns", p.n_cols, n_cols)));
            }
            out.ind.extend(p.ind.iter().map(|&(i, j)| (i + out.n_rows, j)));
            out.w.extend_from_slice(&p.w);
            out.n_rows += p.n_rows;
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut d = Array2::zeros((self.n_rows, self.n_cols));
        for (i, j, v) in self.iter() {
            d[[i, j]] = v;
        }
        d
    }

    fn op_shape(&self, trans: Transpose) -> (usize, usize) {
        match trans {
            Transpose::No => (self.n_rows, self.n_cols),
            Transpose::Yes => (self.n_cols, self.n_rows),
        }
    }
}

/// `op(a) * x` with `a` sparse on the left.
pub fn spmm(a: &CooMatrix, trans: Transpose, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (rows, inner) = a.op_shape(trans);
    if x.nrows() != inner {
        return Err(KbError::dims(format!(
            "spmm: op(a) is {rows}x{inner}, x is {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    let mut out = Array2::zeros((rows, x.ncols()));
    for (i, j, v) in a.iter() {
        let (dst, src) = match trans {
            Transpose::No => (i, j),
            Transpose::Yes => (j, i),
        };
        let src_row = x.row(src);
        let mut dst_row = out.row_mut(dst);
        dst_row.scaled_add(v, &src_row);
    }
    Ok(out)
}

/// `x * op(a)` with `x` dense on the left.
pub fn dense_sparse(x: ArrayView2<'_, f64>, a: &CooMatrix, trans: Transpose) -> Result<Array2<f64>> {
    let (_, cols) = a.op_shape(trans);
    let mut out = Array2::zeros((x.nrows(), cols));
    dense_sparse_acc(x, a, trans, 1.0, out.view_mut())?;
    Ok(out)
}

/// `out += alpha * x * op(a)`.
pub fn dense_sparse_acc(
    x: ArrayView2<'_, f64>,
    a: &CooMatrix,
    trans: Transpose,
    alpha: f64,
    mut out: ArrayViewMut2<'_, f64>,
) -> Result<()> {
    let (inner, cols) = a.op_shape(trans);
    if x.ncols() != inner || out.ncols() != cols || out.nrows() != x.nrows() {
        return Err(KbError::dims(format!(
            "dense_sparse: x is {}x{}, op(a) is {inner}x{cols}, out is {}x{}",
            x.nrows(),
            x.ncols(),
            out.nrows(),
            out.ncols()
        )));
    }
    for (xr, mut or) in x.rows().into_iter().zip(out.rows_mut()) {
        match (xr.as_slice(), or.as_slice_mut()) {
            (Some(xs), Some(os)) => row_kernel(xs, a, trans, alpha, os),
            _ => {
                let xs = xr.to_vec();
                let mut os = or.to_vec();
                row_kernel(&xs, a, trans, alpha, &mut os);
                or.assign(&ndarray::ArrayView1::from(&os));
            }
        }
    }
    Ok(())
}

#[inline]
fn row_kernel(x: &[f64], a: &CooMatrix, trans: Transpose, alpha: f64, out: &mut [f64]) {
    match trans {
        Transpose::No => {
            for (&(i, j), &v) in a.ind.iter().zip(&a.w) {
                out[j] += alpha * v * x[i];
            }
        }
        Transpose::Yes => {
            for (&(i, j), &v) in a.ind.iter().zip(&a.w) {
                out[i] += alpha * v * x[j];
            }
        }
    }
}

pub fn hadamard(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if a.dim() != b.dim() {
        return Err(KbError::dims(format!("hadamard: {:?} vs {:?}", a.dim(), b.dim())));
    }
    Ok(Zip::from(&a).and(&b).map_collect(|&x, &y| x * y))
}
