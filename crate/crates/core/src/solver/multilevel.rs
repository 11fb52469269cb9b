//! Aggregation multigrid preconditioner.
//!
//! Coarse levels are built algebraically: nodes are grouped along strong
//! couplings (`-a_ij >= STRENGTH * max_k -a_ik`). The piecewise-constant
//! interpolation over the aggregates is smoothed by one damped Jacobi step
//! on the strong couplings, and the coarse operator is the Galerkin product
//! `P' A P`. Regions that the smoothness weights lock together therefore
//! collapse into a handful of coarse unknowns regardless of their shape.
//! Nodes whose diagonal dwarfs their couplings are left out of every
//! aggregate: smoothing alone resolves them.
//!
//! One application is a symmetric V-cycle ending in a dense Cholesky solve,
//! or in symmetric Gauss-Seidel sweeps if coarsening stalls early.
//! The pixel grid is smoothed red-black (red then black before the coarse
//! correction, black then red after), coarse levels with forward and then
//! backward Gauss-Seidel. Pre- and post-smoothers are adjoint, so the
//! preconditioner is symmetric positive definite as conjugate gradients
//! requires.

use std::cell::RefCell;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::grid::{GridOperator, Stencil};

/// Couplings at least this fraction of the row's strongest one are strong.
const STRENGTH: f64 = 0.9;
/// `a_ii >= DOMINANCE * sum_j |a_ij|` marks a node as needing no coarse help.
const DOMINANCE: f64 = 5.0;
const COARSEST_NODES: usize = 600;
/// Above this size a stalled coarsest level is relaxed instead of factored.
const DENSE_LIMIT: usize = 1500;
/// Forward sweeps (and as many backward ones) on a relaxed coarsest level.
const COARSEST_SWEEPS: usize = 4;
const MAX_LEVELS: usize = 30;
const NO_AGGREGATE: u32 = u32::MAX;

/// Symmetric matrix split into its diagonal and off-diagonal CSR part.
#[derive(Clone, Debug)]
pub(crate) struct Csr {
    diag: Vec<f64>,
    inv_diag: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl Csr {
    fn len(&self) -> usize {
        self.diag.len()
    }

    fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[s..e], &self.vals[s..e])
    }

    pub fn from_grid(op: &GridOperator) -> Self {
        let (w, n) = (op.width, op.len());
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(4 * n);
        let mut vals = Vec::with_capacity(4 * n);
        row_ptr.push(0);
        for p in 0..n {
            let x = p % w;
            let mut push = |j: usize, v: f64| {
                if v != 0.0 {
                    cols.push(j as u32);
                    vals.push(v);
                }
            };
            if p >= w {
                push(p - w, op.south[p - w]);
            }
            if x > 0 {
                push(p - 1, op.east[p - 1]);
            }
            if x + 1 < w {
                push(p + 1, op.east[p]);
            }
            if p + w < n {
                push(p + w, op.south[p]);
            }
            row_ptr.push(cols.len());
        }
        Self {
            inv_diag: op.diag.iter().map(|d| 1.0 / d).collect(),
            diag: op.diag.clone(),
            row_ptr,
            cols,
            vals,
        }
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j as usize)] = v;
            }
        }
        m
    }

    #[inline]
    fn off_diag_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(&j, &v)| v * x[j as usize]).sum()
    }

    fn forward_gauss_seidel(&self, b: &[f64], x: &mut [f64]) {
        for i in 0..self.len() {
            x[i] = (b[i] - self.off_diag_dot(i, x)) * self.inv_diag[i];
        }
    }

    fn backward_gauss_seidel(&self, b: &[f64], x: &mut [f64]) {
        for i in (0..self.len()).rev() {
            x[i] = (b[i] - self.off_diag_dot(i, x)) * self.inv_diag[i];
        }
    }

    fn residual(&self, b: &[f64], x: &[f64], out: &mut [f64]) {
        for i in 0..self.len() {
            out[i] = b[i] - self.diag[i] * x[i] - self.off_diag_dot(i, x);
        }
    }

    /// Fine-to-coarse map grouping nodes along strong couplings.
    fn aggregate(&self) -> (Vec<u32>, usize) {
        let n = self.len();
        let mut agg = vec![NO_AGGREGATE; n];
        let mut strong: Vec<Vec<u32>> = Vec::with_capacity(n);
        let mut active = vec![false; n];
        for i in 0..n {
            let (cols, vals) = self.row(i);
            let total: f64 = vals.iter().map(|v| v.abs()).sum();
            let max = vals.iter().map(|v| -v).fold(0.0, f64::max);
            active[i] = self.diag[i] < DOMINANCE * total && max > 0.0;
            strong.push(
                cols.iter()
                    .zip(vals)
                    .filter(|(_, &v)| -v >= STRENGTH * max && -v > 0.0)
                    .map(|(&j, _)| j)
                    .collect(),
            );
        }
        let mut count = 0u32;

        // Seeds whose whole strong neighbourhood is still free.
        for i in 0..n {
            if !active[i] || agg[i] != NO_AGGREGATE {
                continue;
            }
            if strong[i].iter().all(|&j| agg[j as usize] == NO_AGGREGATE) {
                agg[i] = count;
                for &j in &strong[i] {
                    if active[j as usize] {
                        agg[j as usize] = count;
                    }
                }
                count += 1;
            }
        }
        // Attach leftovers to the neighbouring aggregate they couple to most.
        let seeded = agg.clone();
        for i in 0..n {
            if !active[i] || agg[i] != NO_AGGREGATE {
                continue;
            }
            let (cols, vals) = self.row(i);
            let best = cols
                .iter()
                .zip(vals)
                .filter(|(&j, _)| seeded[j as usize] != NO_AGGREGATE)
                .min_by(|a, b| a.1.total_cmp(b.1));
            if let Some((&j, _)) = best {
                agg[i] = seeded[j as usize];
            }
        }
        // Whatever is left forms aggregates with its free strong neighbours.
        for i in 0..n {
            if !active[i] || agg[i] != NO_AGGREGATE {
                continue;
            }
            agg[i] = count;
            for &j in &strong[i] {
                if active[j as usize] && agg[j as usize] == NO_AGGREGATE {
                    agg[j as usize] = count;
                }
            }
            count += 1;
        }
        // Number aggregates in order of first appearance so coarse levels
        // keep the fine level's memory locality.
        let mut order = vec![NO_AGGREGATE; count as usize];
        let mut next = 0u32;
        for a in agg.iter_mut().filter(|a| **a != NO_AGGREGATE) {
            let slot = &mut order[*a as usize];
            if *slot == NO_AGGREGATE {
                *slot = next;
                next += 1;
            }
            *a = *slot;
        }
        (agg, count as usize)
    }

    fn is_strong(v: f64, row_max: f64) -> bool {
        -v > 0.0 && -v >= STRENGTH * row_max
    }

    fn row_max_coupling(vals: &[f64]) -> f64 {
        vals.iter().map(|v| -v).fold(0.0, f64::max)
    }

    /// `(I - omega D_F^-1 A_F) tentative`, where `A_F` keeps only strong
    /// couplings and lumps the weak ones into its diagonal `D_F` so row
    /// sums are unchanged.
    fn smooth_prolongation(&self, tentative: &Prolongation) -> Prolongation {
        let n = self.len();
        let filtered_diag: Vec<f64> = (0..n)
            .map(|i| {
                let (_, vals) = self.row(i);
                let max = Self::row_max_coupling(vals);
                self.diag[i] + vals.iter().filter(|&&v| !Self::is_strong(v, max)).sum::<f64>()
            })
            .collect();
        // Gershgorin bound on the spectral radius of D_F^-1 A_F.
        let radius = (0..n)
            .map(|i| {
                let (_, vals) = self.row(i);
                let max = Self::row_max_coupling(vals);
                let off: f64 = vals.iter().filter(|&&v| Self::is_strong(v, max)).map(|v| v.abs()).sum();
                1.0 + off / filtered_diag[i]
            })
            .fold(1.0, f64::max);
        let omega = 4.0 / (3.0 * radius);

        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(4 * n);
        let mut vals = Vec::with_capacity(4 * n);
        let mut entries: Vec<(u32, f64)> = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            entries.clear();
            let mut add = |c: u32, v: f64| match entries.iter_mut().find(|e| e.0 == c) {
                Some(e) => e.1 += v,
                None => entries.push((c, v)),
            };
            let (tc, tv) = tentative.row(i);
            for (&c, &v) in tc.iter().zip(tv) {
                add(c, (1.0 - omega) * v);
            }
            let (rc, rv) = self.row(i);
            let max = Self::row_max_coupling(rv);
            for (&j, &a) in rc.iter().zip(rv) {
                if !Self::is_strong(a, max) {
                    continue;
                }
                let scale = -omega * a / filtered_diag[i];
                let (tc, tv) = tentative.row(j as usize);
                for (&c, &v) in tc.iter().zip(tv) {
                    add(c, scale * v);
                }
            }
            entries.sort_unstable_by_key(|e| e.0);
            for &(c, v) in entries.iter().filter(|e| e.1 != 0.0) {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Prolongation {
            row_ptr,
            cols,
            vals,
            coarse_len: tentative.coarse_len,
        }
    }

    /// Galerkin product `P' A P`.
    fn galerkin(&self, p: &Prolongation) -> Csr {
        let nc = p.coarse_len;
        let (t_ptr, t_rows, t_vals) = p.transpose();
        let mut diag = vec![0.0; nc];
        let mut row_ptr = Vec::with_capacity(nc + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut slot = vec![usize::MAX; nc];
        let mut touched: Vec<u32> = Vec::new();
        let mut acc: Vec<f64> = Vec::new();
        row_ptr.push(0);
        for ci in 0..nc {
            touched.clear();
            acc.clear();
            let mut add = |cj: u32, v: f64, diag: &mut f64| {
                if cj as usize == ci {
                    *diag += v;
                    return;
                }
                let s = &mut slot[cj as usize];
                if *s == usize::MAX {
                    *s = acc.len();
                    touched.push(cj);
                    acc.push(0.0);
                }
                acc[*s] += v;
            };
            for k in t_ptr[ci]..t_ptr[ci + 1] {
                // Row i of A P, weighted by P[i, ci].
                let (i, pi) = (t_rows[k] as usize, t_vals[k]);
                let (pc, pv) = p.row(i);
                for (&cj, &v) in pc.iter().zip(pv) {
                    add(cj, pi * self.diag[i] * v, &mut diag[ci]);
                }
                let (rc, rv) = self.row(i);
                for (&j, &a) in rc.iter().zip(rv) {
                    let (pc, pv) = p.row(j as usize);
                    for (&cj, &v) in pc.iter().zip(pv) {
                        add(cj, pi * a * v, &mut diag[ci]);
                    }
                }
            }
            let mut order: Vec<usize> = (0..touched.len()).collect();
            order.sort_unstable_by_key(|&k| touched[k]);
            for k in order {
                cols.push(touched[k]);
                vals.push(acc[k]);
            }
            for &cj in &touched {
                slot[cj as usize] = usize::MAX;
            }
            row_ptr.push(cols.len());
        }
        Csr {
            inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
            diag,
            row_ptr,
            cols,
            vals,
        }
    }
}

/// Coarse-to-fine interpolation, one sparse row per fine node.
#[derive(Clone, Debug)]
struct Prolongation {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    coarse_len: usize,
}

impl Prolongation {
    /// Piecewise-constant interpolation over aggregates.
    fn tentative(agg: &[u32], coarse_len: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(agg.len() + 1);
        let mut cols = Vec::with_capacity(agg.len());
        row_ptr.push(0);
        for &a in agg {
            if a != NO_AGGREGATE {
                cols.push(a);
            }
            row_ptr.push(cols.len());
        }
        Self {
            vals: vec![1.0; cols.len()],
            row_ptr,
            cols,
            coarse_len,
        }
    }

    fn fine_len(&self) -> usize {
        self.row_ptr.len() - 1
    }

    fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[s..e], &self.vals[s..e])
    }

    /// Column-wise layout: for each coarse node, the fine nodes it feeds.
    fn transpose(&self) -> (Vec<usize>, Vec<u32>, Vec<f64>) {
        let mut ptr = vec![0usize; self.coarse_len + 1];
        for &c in &self.cols {
            ptr[c as usize + 1] += 1;
        }
        for c in 0..self.coarse_len {
            ptr[c + 1] += ptr[c];
        }
        let mut next = ptr.clone();
        let mut rows = vec![0u32; self.cols.len()];
        let mut vals = vec![0.0; self.cols.len()];
        for i in 0..self.fine_len() {
            let (rc, rv) = self.row(i);
            for (&c, &v) in rc.iter().zip(rv) {
                let k = &mut next[c as usize];
                rows[*k] = i as u32;
                vals[*k] = v;
                *k += 1;
            }
        }
        (ptr, rows, vals)
    }

    /// `out = P' r`.
    fn restrict(&self, r: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &ri) in r.iter().enumerate() {
            let (rc, rv) = self.row(i);
            for (&c, &v) in rc.iter().zip(rv) {
                out[c as usize] += v * ri;
            }
        }
    }

    /// `x += P e`.
    fn prolong_add(&self, e: &[f64], x: &mut [f64]) {
        for (i, xi) in x.iter_mut().enumerate() {
            let (rc, rv) = self.row(i);
            *xi += rc.iter().zip(rv).map(|(&c, &v)| v * e[c as usize]).sum::<f64>();
        }
    }

    #[cfg(test)]
    fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.fine_len(), self.coarse_len);
        for i in 0..self.fine_len() {
            let (rc, rv) = self.row(i);
            for (&c, &v) in rc.iter().zip(rv) {
                m[(i, c as usize)] = v;
            }
        }
        m
    }
}

enum Smoother {
    Grid(Stencil),
    General(Csr),
}

impl Smoother {
    fn pre(&self, b: &[f64], x: &mut [f64]) {
        match self {
            Smoother::Grid(op) => {
                op.color_sweep(b, x, 0);
                op.color_sweep(b, x, 1);
            }
            Smoother::General(m) => m.forward_gauss_seidel(b, x),
        }
    }

    fn post(&self, b: &[f64], x: &mut [f64]) {
        match self {
            Smoother::Grid(op) => {
                op.color_sweep(b, x, 1);
                op.color_sweep(b, x, 0);
            }
            Smoother::General(m) => m.backward_gauss_seidel(b, x),
        }
    }

    fn residual(&self, b: &[f64], x: &[f64], out: &mut [f64]) {
        match self {
            Smoother::Grid(op) => op.residual_after_sweep(b, x, out, 0),
            Smoother::General(m) => m.residual(b, x, out),
        }
    }
}

struct Level {
    smoother: Smoother,
    prolongation: Prolongation,
}

/// Per-level work vectors: residual, coarse right-hand side, coarse solution.
struct Scratch {
    residual: Vec<f64>,
    coarse_rhs: Vec<f64>,
    coarse_sol: Vec<f64>,
}

enum Coarsest {
    Dense(Cholesky<f64, Dyn>),
    /// Coarsening stalled while the matrix was still too big to factor.
    Relaxed(Csr),
}

impl Coarsest {
    fn solve(&self, b: &[f64], x: &mut [f64]) {
        match self {
            Coarsest::Dense(chol) => {
                x.copy_from_slice(chol.solve(&DVector::from_column_slice(b)).as_slice());
            }
            Coarsest::Relaxed(m) => {
                x.iter_mut().for_each(|v| *v = 0.0);
                for _ in 0..COARSEST_SWEEPS {
                    m.forward_gauss_seidel(b, x);
                }
                for _ in 0..COARSEST_SWEEPS {
                    m.backward_gauss_seidel(b, x);
                }
            }
        }
    }
}

pub(crate) struct Hierarchy {
    levels: Vec<Level>,
    coarsest: Coarsest,
    scratch: Vec<RefCell<Scratch>>,
}

impl Hierarchy {
    pub fn build(fine: &GridOperator) -> Self {
        let mut levels = Vec::new();
        let mut current = Csr::from_grid(fine);
        while current.len() > COARSEST_NODES && levels.len() < MAX_LEVELS {
            let (agg, nc) = current.aggregate();
            // Stalled coarsening: fall back to the dense solve.
            if nc == 0 || nc * 10 > current.len() * 9 {
                break;
            }
            let tentative = Prolongation::tentative(&agg, nc);
            let prolongation = current.smooth_prolongation(&tentative);
            let coarse = current.galerkin(&prolongation);
            let matrix = std::mem::replace(&mut current, coarse);
            let smoother = if levels.is_empty() {
                Smoother::Grid(Stencil::new(fine))
            } else {
                Smoother::General(matrix)
            };
            levels.push(Level { smoother, prolongation });
        }
        let coarsest = if current.len() <= DENSE_LIMIT {
            Coarsest::Dense(
                current
                    .to_dense()
                    .cholesky()
                    .expect("Galerkin operators of an SPD matrix stay SPD"),
            )
        } else {
            Coarsest::Relaxed(current)
        };
        let scratch = levels
            .iter()
            .map(|l| {
                RefCell::new(Scratch {
                    residual: vec![0.0; l.prolongation.fine_len()],
                    coarse_rhs: vec![0.0; l.prolongation.coarse_len],
                    coarse_sol: vec![0.0; l.prolongation.coarse_len],
                })
            })
            .collect();
        Self {
            levels,
            coarsest,
            scratch,
        }
    }

    /// `z = M^-1 r` for one V-cycle `M^-1`.
    pub fn v_cycle(&self, r: &[f64], z: &mut [f64]) {
        self.cycle(0, r, z);
    }

    fn cycle(&self, level: usize, b: &[f64], x: &mut [f64]) {
        let Some(Level { smoother, prolongation }) = self.levels.get(level) else {
            self.coarsest.solve(b, x);
            return;
        };
        let mut guard = self.scratch[level].borrow_mut();
        let Scratch {
            residual,
            coarse_rhs,
            coarse_sol,
        } = &mut *guard;

        x.iter_mut().for_each(|v| *v = 0.0);
        smoother.pre(b, x);
        smoother.residual(b, x, residual);
        prolongation.restrict(residual, coarse_rhs);
        self.cycle(level + 1, coarse_rhs, coarse_sol);
        prolongation.prolong_add(coarse_sol, x);
        smoother.post(b, x);
    }
}
