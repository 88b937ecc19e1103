//! Compressed sparse rows and a Jacobi-preconditioned conjugate gradient.
//!
//! Reductions are accumulated over fixed-size chunks and summed in order, so
//! results do not depend on the number of worker threads.

use rayon::prelude::*;

const CHUNK: usize = 8192;

#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

/// Incremental row-by-row builder. Rows must be pushed in order.
#[derive(Debug, Default)]
pub struct CsrBuilder {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    scratch: Vec<(u32, f64)>,
}

impl CsrBuilder {
    pub fn with_capacity(rows: usize, nnz: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(rows + 1);
        row_ptr.push(0);
        Self { row_ptr, cols: Vec::with_capacity(nnz), vals: Vec::with_capacity(nnz), scratch: Vec::new() }
    }

    /// Append a row from unsorted entries; duplicate columns are summed.
    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        self.scratch.clear();
        self.scratch.extend(entries.into_iter().map(|(c, v)| (c as u32, v)));
        self.scratch.sort_unstable_by_key(|e| e.0);
        let mut last: Option<u32> = None;
        for &(c, v) in &self.scratch {
            if last == Some(c) {
                *self.vals.last_mut().unwrap() += v;
            } else {
                self.cols.push(c);
                self.vals.push(v);
                last = Some(c);
            }
        }
        self.row_ptr.push(self.cols.len());
    }

    pub fn build(self) -> CsrMatrix {
        let n = self.row_ptr.len() - 1;
        CsrMatrix { n, row_ptr: self.row_ptr, cols: self.cols, vals: self.vals }
    }
}

impl CsrMatrix {
    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().map(|&c| c as usize).zip(self.vals[r].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).find(|&(c, _)| c == i).map_or(0.0, |(_, v)| v)).collect()
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        y.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, out)| {
            let base = ci * CHUNK;
            for (o, yi) in out.iter_mut().enumerate() {
                let i = base + o;
                let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
                let mut acc = 0.0;
                for k in a..b {
                    acc += self.vals[k] * x[self.cols[k] as usize];
                }
                *yi = acc;
            }
        });
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| {
            self.row(i).all(|(j, v)| {
                let vt = self.row(j).find(|&(c, _)| c == i).map_or(0.0, |(_, v)| v);
                (v - vt).abs() <= tol * v.abs().max(vt.abs())
            })
        })
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> =
        a.par_chunks(CHUNK).zip(b.par_chunks(CHUNK)).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum()).collect();
    partial.iter().sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Debug)]
pub struct PcgOutcome {
    pub iterations: usize,
    /// ‖b − Ax‖ / ‖b‖ from the recurrence at exit.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Solve `A x = b` for SPD `A`, starting from the contents of `x`.
pub fn pcg(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> PcgOutcome {
    let n = a.nrows();
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return PcgOutcome { iterations: 0, relative_residual: 0.0, converged: true };
    }

    let mut r = a.mul_vec(x);
    r.par_iter_mut().zip(b.par_iter()).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = norm(&r) / b_norm;
    let mut it = 0;

    while rel > tol && it < max_iter {
        a.mul_vec_into(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        x.par_iter_mut().zip(p.par_iter()).for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut().zip(ap.par_iter()).for_each(|(ri, api)| *ri -= alpha * api);
        z.par_iter_mut().zip(r.par_iter().zip(inv_diag.par_iter())).for_each(|(zi, (ri, di))| *zi = ri * di);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(z.par_iter()).for_each(|(pi, zi)| *pi = zi + beta * *pi);
        rel = norm(&r) / b_norm;
        it += 1;
    }
    PcgOutcome { iterations: it, relative_residual: rel, converged: rel <= tol }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1D Dirichlet Laplacian.
    fn laplacian(n: usize) -> CsrMatrix {
        let mut b = CsrBuilder::with_capacity(n, 3 * n);
        for i in 0..n {
            let mut row = vec![(i, 2.0)];
            if i > 0 {
                row.push((i - 1, -1.0));
            }
            if i + 1 < n {
                row.push((i + 1, -1.0));
            }
            b.push_row(row);
        }
        b.build()
    }

    #[test]
    fn builder_merges_duplicates() {
        let mut b = CsrBuilder::with_capacity(1, 4);
        b.push_row([(2, 1.0), (0, 3.0), (2, 0.5)]);
        let m = b.build();
        assert_eq!(m.row(0).collect::<Vec<_>>(), vec![(0, 3.0), (2, 1.5)]);
    }

    #[test]
    fn solves_laplacian_against_exact_solution() {
        let n = 200;
        let a = laplacian(n);
        assert!(a.is_symmetric(0.0));
        let exact: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.1).sin()).collect();
        let b = a.mul_vec(&exact);
        let mut x = vec![0.0; n];
        let out = pcg(&a, &b, &mut x, 1e-12, 10_000);
        assert!(out.converged);
        let err = x.iter().zip(&exact).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "max error {err}");
    }

    #[test]
    fn true_residual_meets_tolerance() {
        let n = 500;
        let a = laplacian(n);
        let b: Vec<f64> = (0..n).map(|i| if i == n / 3 { 1.0 } else { 0.0 }).collect();
        let mut x = vec![0.0; n];
        let out = pcg(&a, &b, &mut x, 1e-8, 10_000);
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        assert!(out.converged);
        assert!(norm(&r) / norm(&b) < 2e-8);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = laplacian(10);
        let mut x = vec![1.0; 10];
        let out = pcg(&a, &[0.0; 10], &mut x, 1e-8, 100);
        assert!(out.converged);
        assert!(x.iter().all(|&v| v == 0.0));
    }
}
