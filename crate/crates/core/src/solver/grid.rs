use nalgebra::DMatrix;
use rayon::prelude::*;

/// Symmetric five-point operator on a `width x height` grid: the diagonal
/// plus the coupling of each node to its right (`east`) and bottom
/// (`south`) neighbour, row-major. Couplings that would leave the grid are
/// zero.
#[derive(Clone, Debug)]
pub(crate) struct GridOperator {
    pub width: usize,
    pub height: usize,
    pub diag: Vec<f64>,
    pub east: Vec<f64>,
    pub south: Vec<f64>,
}

impl GridOperator {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        if lo == hi {
            self.diag[lo]
        } else if hi == lo + 1 && hi % self.width != 0 {
            self.east[lo]
        } else if hi == lo + self.width {
            self.south[lo]
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let w = self.width;
        let mut m = DMatrix::zeros(n, n);
        for p in 0..n {
            m[(p, p)] = self.diag[p];
            if (p + 1) % w != 0 {
                m[(p, p + 1)] = self.east[p];
                m[(p + 1, p)] = self.east[p];
            }
            if p + w < n {
                m[(p, p + w)] = self.south[p];
                m[(p + w, p)] = self.south[p];
            }
        }
        m
    }

    /// Off-diagonal part of row `p` applied to `x`.
    #[inline]
    fn neighbours(&self, p: usize, i: usize, x: &[f64]) -> f64 {
        let w = self.width;
        let mut acc = 0.0;
        if i + 1 < w {
            acc += self.east[p] * x[p + 1];
        }
        if i > 0 {
            acc += self.east[p - 1] * x[p - 1];
        }
        if p + w < x.len() {
            acc += self.south[p] * x[p + w];
        }
        if p >= w {
            acc += self.south[p - w] * x[p - w];
        }
        acc
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let w = self.width;
        assert!(x.len() == self.len() && out.len() == self.len(), "vector length mismatch");
        out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
            let base = y * w;
            for (i, o) in row.iter_mut().enumerate() {
                let p = base + i;
                *o = self.diag[p] * x[p] + self.neighbours(p, i, x);
            }
        });
    }
}

/// [`GridOperator`] laid out for smoothing: every node stores all four
/// couplings, zero where the neighbour would be off the grid, so a border
/// node can read a clamped neighbour index without branching.
#[derive(Clone, Debug)]
pub(crate) struct Stencil {
    width: usize,
    height: usize,
    inv_diag: Vec<f64>,
    diag: Vec<f64>,
    west: Vec<f64>,
    east: Vec<f64>,
    north: Vec<f64>,
    south: Vec<f64>,
}

impl Stencil {
    pub fn new(op: &GridOperator) -> Self {
        let (w, n) = (op.width, op.len());
        Self {
            width: w,
            height: op.height,
            inv_diag: op.diag.iter().map(|d| 1.0 / d).collect(),
            diag: op.diag.clone(),
            west: (0..n).map(|p| if p % w == 0 { 0.0 } else { op.east[p - 1] }).collect(),
            east: op.east.clone(),
            north: (0..n).map(|p| if p < w { 0.0 } else { op.south[p - w] }).collect(),
            south: op.south.clone(),
        }
    }

    /// Offsets to the north and south neighbours of row `y`, clamped to the
    /// row itself at the grid border.
    #[inline(always)]
    fn row_offsets(&self, y: usize) -> (usize, usize) {
        let up = if y > 0 { self.width } else { 0 };
        let down = if y + 1 < self.height { self.width } else { 0 };
        (up, down)
    }

    #[inline(always)]
    fn off_diagonal(&self, x: &[f64], p: usize, i: usize, up: usize, down: usize) -> f64 {
        let left = usize::from(i > 0);
        let right = usize::from(i + 1 < self.width);
        self.west[p] * x[p - left] + self.east[p] * x[p + right] + self.north[p] * x[p - up] + self.south[p] * x[p + down]
    }

    /// Gauss-Seidel update of every node with `(x + y) % 2 == color`.
    /// Nodes of one color only couple to the other color, so the order
    /// within the sweep does not matter.
    pub fn color_sweep(&self, b: &[f64], x: &mut [f64], color: usize) {
        let w = self.width;
        for y in 0..self.height {
            let (up, down) = self.row_offsets(y);
            let base = y * w;
            for i in ((color + y) % 2..w).step_by(2) {
                let p = base + i;
                x[p] = (b[p] - self.off_diagonal(x, p, i, up, down)) * self.inv_diag[p];
            }
        }
    }

    /// `out = b - A x`, assuming the nodes of color `1 - color` were the
    /// last ones relaxed: their residual is zero by construction and only
    /// nodes of `color` are evaluated.
    pub fn residual_after_sweep(&self, b: &[f64], x: &[f64], out: &mut [f64], color: usize) {
        let w = self.width;
        for y in 0..self.height {
            let (up, down) = self.row_offsets(y);
            let base = y * w;
            let first = (color + y) % 2;
            for i in 0..w {
                let p = base + i;
                out[p] = if i % 2 == first {
                    b[p] - self.diag[p] * x[p] - self.off_diagonal(x, p, i, up, down)
                } else {
                    0.0
                };
            }
        }
    }
}
