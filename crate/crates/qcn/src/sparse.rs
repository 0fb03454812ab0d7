//! Compressed-sparse-row complex matrices.
//!
//! Operators on the tensor-product space are extremely sparse (a handful of
//! nonzeros per row), while density matrices are generically dense. The
//! kernels here therefore come in two families: sparse-sparse algebra used
//! when assembling generators, and sparse-dense products used in the hot
//! path of the master-equation right-hand side.

use ndarray::Array2;
use num_complex::Complex64 as C64;

/// Square complex matrix in CSR form.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl CsrMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, row_ptr: vec![0; dim + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: (0..=dim).collect(),
            cols: (0..dim).collect(),
            vals: vec![C64::new(1.0, 0.0); dim],
        }
    }

    /// Build from (row, col, value) triplets. Duplicates are summed; exact
    /// zeros are dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_unstable_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut vals: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut prev: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet out of bounds");
            if prev == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                prev = Some((r, c));
            }
            row_ptr[r + 1] = cols.len();
        }
        for i in 1..=dim {
            if row_ptr[i] < row_ptr[i - 1] {
                row_ptr[i] = row_ptr[i - 1];
            }
        }
        let mut m = Self { dim, row_ptr, cols, vals };
        m.prune();
        m
    }

    /// Drop entries that are exactly zero.
    fn prune(&mut self) {
        let mut row_ptr = vec![0usize; self.dim + 1];
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let v = self.vals[k];
                if v.re != 0.0 || v.im != 0.0 {
                    cols.push(self.cols[k]);
                    vals.push(v);
                }
            }
            row_ptr[i + 1] = cols.len();
        }
        self.row_ptr = row_ptr;
        self.cols = cols;
        self.vals = vals;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[C64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let mut row_ptr = vec![0usize; self.dim + 1];
        let mut cols = Vec::with_capacity(self.nnz() + other.nnz());
        let mut vals = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.dim {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let (c, v) = if q >= cb.len() || (p < ca.len() && ca[p] < cb[q]) {
                    let r = (ca[p], va[p]);
                    p += 1;
                    r
                } else if p >= ca.len() || cb[q] < ca[p] {
                    let r = (cb[q], vb[q]);
                    q += 1;
                    r
                } else {
                    let r = (ca[p], va[p] + vb[q]);
                    p += 1;
                    q += 1;
                    r
                };
                if v.re != 0.0 || v.im != 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr[i + 1] = cols.len();
        }
        Self { dim: self.dim, row_ptr, cols, vals }
    }

    pub fn scaled(&self, s: C64) -> Self {
        let mut out = self.clone();
        for v in &mut out.vals {
            *v *= s;
        }
        out.prune();
        out
    }

    /// Sparse-sparse product via a dense accumulator per row.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let d = self.dim;
        let mut acc = vec![C64::new(0.0, 0.0); d];
        let mut touched: Vec<usize> = Vec::with_capacity(16);
        let mut row_ptr = vec![0usize; d + 1];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..d {
            let (ca, va) = self.row(i);
            for (&k, &v) in ca.iter().zip(va) {
                let (cb, vb) = other.row(k);
                for (&j, &w) in cb.iter().zip(vb) {
                    if acc[j].re == 0.0 && acc[j].im == 0.0 {
                        touched.push(j);
                    }
                    acc[j] += v * w;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                let v = acc[j];
                if v.re != 0.0 || v.im != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
                acc[j] = C64::new(0.0, 0.0);
            }
            touched.clear();
            row_ptr[i + 1] = cols.len();
        }
        Self { dim: d, row_ptr, cols, vals }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        let mut counts = vec![0usize; d + 1];
        for &c in &self.cols {
            counts[c + 1] += 1;
        }
        for i in 0..d {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; self.nnz()];
        let mut vals = vec![C64::new(0.0, 0.0); self.nnz()];
        let mut next = counts.clone();
        for (i, j, v) in self.iter() {
            let p = next[j];
            cols[p] = i;
            vals[p] = v.conj();
            next[j] += 1;
        }
        Self { dim: d, row_ptr: counts, cols, vals }
    }

    /// Kronecker product; `self` is the slow (leftmost) factor.
    pub fn kron(&self, other: &Self) -> Self {
        let d = self.dim * other.dim;
        let mut row_ptr = vec![0usize; d + 1];
        let mut cols = Vec::with_capacity(self.nnz() * other.nnz());
        let mut vals = Vec::with_capacity(self.nnz() * other.nnz());
        for ia in 0..self.dim {
            let (ca, va) = self.row(ia);
            for ib in 0..other.dim {
                let (cb, vb) = other.row(ib);
                for (&ja, &a) in ca.iter().zip(va) {
                    for (&jb, &b) in cb.iter().zip(vb) {
                        cols.push(ja * other.dim + jb);
                        vals.push(a * b);
                    }
                }
                row_ptr[ia * other.dim + ib + 1] = cols.len();
            }
        }
        Self { dim: d, row_ptr, cols, vals }
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut out = Array2::zeros((self.dim, self.dim));
        for (i, j, v) in self.iter() {
            out[(i, j)] += v;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.add(&self.adjoint().scaled(C64::new(-1.0, 0.0))).max_abs() <= tol
    }

    /// tr(self · rho), with `rho` dense row-major.
    pub fn expect(&self, rho: &Array2<C64>) -> C64 {
        let r = rho.as_slice().expect("contiguous density matrix");
        let d = self.dim;
        let mut acc = C64::new(0.0, 0.0);
        for (i, j, v) in self.iter() {
            acc += v * r[j * d + i];
        }
        acc
    }

    /// out += coef · (self · rho)
    pub fn acc_mul_left(&self, rho: &Array2<C64>, coef: C64, out: &mut Array2<C64>) {
        let d = self.dim;
        let r = rho.as_slice().expect("contiguous rho");
        let o = out.as_slice_mut().expect("contiguous out");
        for i in 0..d {
            let (cols, vals) = (
                &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]],
                &self.vals[self.row_ptr[i]..self.row_ptr[i + 1]],
            );
            let orow = &mut o[i * d..(i + 1) * d];
            for (&k, &v) in cols.iter().zip(vals) {
                let s = coef * v;
                let rrow = &r[k * d..(k + 1) * d];
                for (oj, rj) in orow.iter_mut().zip(rrow) {
                    *oj += s * rj;
                }
            }
        }
    }

    /// out += coef · (rho · self)
    pub fn acc_mul_right(&self, rho: &Array2<C64>, coef: C64, out: &mut Array2<C64>) {
        let d = self.dim;
        let r = rho.as_slice().expect("contiguous rho");
        let o = out.as_slice_mut().expect("contiguous out");
        for i in 0..d {
            let rrow = &r[i * d..(i + 1) * d];
            let orow = &mut o[i * d..(i + 1) * d];
            for (k, &rk) in rrow.iter().enumerate() {
                if rk.re == 0.0 && rk.im == 0.0 {
                    continue;
                }
                let s = coef * rk;
                let (cols, vals) = (
                    &self.cols[self.row_ptr[k]..self.row_ptr[k + 1]],
                    &self.vals[self.row_ptr[k]..self.row_ptr[k + 1]],
                );
                for (&j, &v) in cols.iter().zip(vals) {
                    orow[j] += s * v;
                }
            }
        }
    }

    /// out = self · rho
    pub fn mul_left_into(&self, rho: &Array2<C64>, out: &mut Array2<C64>) {
        out.fill(C64::new(0.0, 0.0));
        self.acc_mul_left(rho, C64::new(1.0, 0.0), out);
    }
}
