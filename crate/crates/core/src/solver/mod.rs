//! Sparse weighted-least-squares system on a pixel grid.
//!
//! Minimizing
//!
//! ```text
//! sum_p (L_p - L'_p)^2 + lambda * (wx_p * (dx L)_p^2 + wy_p * (dy L)_p^2)
//! ```
//!
//! with forward differences (zero across the last column/row) leads to the
//! normal equations `(I + lambda * (Dx' Wx Dx + Dy' Wy Dy)) L = L'`. The
//! matrix is a weighted graph Laplacian on the 4-connected grid plus the
//! identity, so it is symmetric, strictly diagonally dominant and an
//! M-matrix. Its inverse is nonnegative with unit row sums, which keeps the
//! solution inside the range of the right-hand side.
//!
//! Edge weights of real photos span ten or more orders of magnitude, so the
//! default preconditioner is a multilevel one (see [`multilevel`]); plain
//! Jacobi scaling is kept for comparison and small systems.

mod grid;
pub mod multilevel;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::ScalarField;

pub(crate) use grid::GridOperator;
use multilevel::Hierarchy;

/// Largest system `solve_dense_oracle` accepts.
pub const DENSE_ORACLE_LIMIT: usize = 4096;

// Fixed chunking keeps parallel reductions bitwise reproducible.
const REDUCE_CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Preconditioner {
    /// Diagonal scaling.
    Jacobi,
    /// One symmetric V-cycle over 2x2 aggregates.
    #[default]
    Multilevel,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    /// Stop once `|Ax - b| / |b|` drops to this value.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub preconditioner: Preconditioner,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-5,
            max_iterations: 5000,
            preconditioner: Preconditioner::Multilevel,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "solver tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "solver needs at least one iteration".into(),
            ));
        }
        Ok(())
    }
}

/// Five-point symmetric system plus its right-hand side.
#[derive(Clone, Debug)]
pub struct SparseSystem {
    op: GridOperator,
    rhs: Vec<f64>,
}

/// Builds the normal equations for the given data term and edge weights.
///
/// `wx` at pixel p weights the edge to its right neighbour, `wy` the edge to
/// its bottom neighbour. Weights on the last column (`wx`) or last row
/// (`wy`) have no edge and are ignored.
pub fn assemble(
    initial: &ScalarField,
    wx: &ScalarField,
    wy: &ScalarField,
    lambda: f64,
) -> Result<SparseSystem> {
    if !initial.same_dims(wx) || !initial.same_dims(wy) {
        return Err(Error::InvalidArgument(format!(
            "field dimensions differ: initial {:?}, wx {:?}, wy {:?}",
            initial.dims(),
            wx.dims(),
            wy.dims()
        )));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    if wx.as_slice().iter().chain(wy.as_slice()).any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidArgument(
            "smoothness weights must be finite and nonnegative".into(),
        ));
    }

    let (w, h) = initial.dims();
    let n = w * h;
    let mut diag = vec![1.0; n];
    let mut east = vec![0.0; n];
    let mut south = vec![0.0; n];
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            if x + 1 < w {
                let c = lambda * wx.get(x, y);
                east[p] = -c;
                diag[p] += c;
                diag[p + 1] += c;
            }
            if y + 1 < h {
                let c = lambda * wy.get(x, y);
                south[p] = -c;
                diag[p] += c;
                diag[p + w] += c;
            }
        }
    }
    Ok(SparseSystem {
        op: GridOperator {
            width: w,
            height: h,
            diag,
            east,
            south,
        },
        rhs: initial.as_slice().to_vec(),
    })
}

impl SparseSystem {
    pub fn dimension(&self) -> usize {
        self.op.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.op.width, self.op.height)
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Matrix entry `A[i][j]`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.op.entry(i, j)
    }

    /// Expands the matrix into dense form.
    pub fn to_dense(&self) -> DMatrix<f64> {
        self.op.to_dense()
    }

    /// `out = A * x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.op.apply(x, out)
    }

    fn relative_residual(&self, x: &[f64], scratch: &mut [f64], rhs_norm: f64) -> f64 {
        self.apply(x, scratch);
        let sq: f64 = chunked_sum(scratch, &self.rhs, |a, b| (b - a) * (b - a));
        sq.sqrt() / rhs_norm
    }
}

/// Convergence record of one solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final `|Ax - b| / |b|`, measured on the returned vector.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub field: ScalarField,
    pub stats: SolveStats,
}

fn chunked_sum(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64 + Sync) -> f64 {
    let partials: Vec<f64> = a
        .par_chunks(REDUCE_CHUNK)
        .zip(b.par_chunks(REDUCE_CHUNK))
        .map(|(ca, cb)| ca.iter().zip(cb).map(|(&x, &y)| f(x, y)).sum())
        .collect();
    partials.into_iter().sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    chunked_sum(a, b, |x, y| x * y)
}

enum Precond {
    Jacobi(Vec<f64>),
    Multilevel(Hierarchy),
}

impl Precond {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Precond::Jacobi(inv_diag) => z
                .par_iter_mut()
                .zip(r.par_iter().zip(inv_diag.par_iter()))
                .for_each(|(zi, (ri, di))| *zi = ri * di),
            Precond::Multilevel(h) => h.v_cycle(r, z),
        }
    }
}

/// Preconditioned conjugate gradients starting from `x0 = b`.
///
/// The result is projected onto `[min b, max b]`, the range the exact
/// solution is known to occupy; convergence is judged on the projected
/// vector.
pub fn solve_cg(system: &SparseSystem, settings: &SolverSettings) -> Result<Solution> {
    settings.validate()?;
    let (w, h) = system.dims();
    let n = system.dimension();
    let b = &system.rhs;
    let rhs_norm = dot(b, b).sqrt();
    if rhs_norm == 0.0 {
        return Ok(Solution {
            field: ScalarField::filled(w, h, 0.0),
            stats: SolveStats {
                iterations: 0,
                residual: 0.0,
            },
        });
    }
    let lo = b.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = b.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut x = b.clone();
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut clipped = vec![0.0; n];

    // x0 = b already lies in [lo, hi]; when it is accurate enough (e.g. a
    // constant right-hand side) skip building the preconditioner.
    let initial = system.relative_residual(&x, &mut q, rhs_norm);
    if initial <= settings.tolerance {
        return Ok(Solution {
            field: ScalarField::from_vec(w, h, x)?,
            stats: SolveStats {
                iterations: 0,
                residual: initial,
            },
        });
    }

    let precond = match settings.preconditioner {
        Preconditioner::Jacobi => Precond::Jacobi(system.op.diag.iter().map(|d| 1.0 / d).collect()),
        Preconditioner::Multilevel => Precond::Multilevel(Hierarchy::build(&system.op)),
    };

    let restart = |x: &[f64], r: &mut [f64], z: &mut [f64], p: &mut [f64], q: &mut [f64]| {
        system.apply(x, q);
        r.par_iter_mut()
            .zip(b.par_iter().zip(q.par_iter()))
            .for_each(|(ri, (bi, qi))| *ri = bi - qi);
        precond.apply(r, z);
        p.copy_from_slice(z);
        dot(r, z)
    };
    let mut rz = restart(&x, &mut r, &mut z, &mut p, &mut q);
    let mut best = f64::INFINITY;
    let mut iterations = 0;

    loop {
        let estimate = dot(&r, &r).sqrt() / rhs_norm;
        if estimate <= settings.tolerance {
            clipped
                .par_iter_mut()
                .zip(x.par_iter())
                .for_each(|(c, v)| *c = v.clamp(lo, hi));
            let residual = system.relative_residual(&clipped, &mut q, rhs_norm);
            best = best.min(residual);
            if residual <= settings.tolerance {
                return Ok(Solution {
                    field: ScalarField::from_vec(w, h, clipped)?,
                    stats: SolveStats {
                        iterations,
                        residual,
                    },
                });
            }
            // The recursive residual drifted or the projection cost too
            // much; resync with the true residual and keep going.
            rz = restart(&x, &mut r, &mut z, &mut p, &mut q);
        }
        if iterations >= settings.max_iterations {
            let residual = system.relative_residual(&x, &mut q, rhs_norm);
            return Err(Error::NotConverged {
                iterations,
                residual: best.min(residual),
            });
        }
        iterations += 1;

        system.apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            // Only reachable through round-off once the residual is ~0.
            rz = restart(&x, &mut r, &mut z, &mut p, &mut q);
            continue;
        }
        let alpha = rz / pq;
        x.par_iter_mut()
            .zip(p.par_iter())
            .for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut()
            .zip(q.par_iter())
            .for_each(|(ri, qi)| *ri -= alpha * qi);
        precond.apply(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        p.par_iter_mut()
            .zip(z.par_iter())
            .for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
}

/// Direct solve through a dense Cholesky factorization. Test oracle only.
pub fn solve_dense_oracle(system: &SparseSystem) -> Result<ScalarField> {
    let n = system.dimension();
    if n > DENSE_ORACLE_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "dense oracle limited to {DENSE_ORACLE_LIMIT} unknowns, got {n}"
        )));
    }
    let a = system.to_dense();
    let b = DVector::from_column_slice(&system.rhs);
    let x = match a.clone().cholesky() {
        Some(chol) => chol.solve(&b),
        None => a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::InvalidArgument("singular system".into()))?,
    };
    let (w, h) = system.dims();
    ScalarField::from_vec(w, h, x.as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(rng: &mut ChaCha8Rng, w: usize, h: usize, lo: f64, hi: f64) -> ScalarField {
        ScalarField::from_fn(w, h, |_, _| rng.random_range(lo..hi))
    }

    fn max_abs(a: &ScalarField, b: &ScalarField) -> f64 {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Independent dense construction: identity plus lambda times the
    /// weighted graph Laplacian, built edge by edge.
    fn hand_dense(w: usize, h: usize, wx: &ScalarField, wy: &ScalarField, lambda: f64) -> Vec<Vec<f64>> {
        let n = w * h;
        let mut m = vec![vec![0.0; n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let mut edge = |a: usize, b: usize, weight: f64| {
            m[a][a] += lambda * weight;
            m[b][b] += lambda * weight;
            m[a][b] -= lambda * weight;
            m[b][a] -= lambda * weight;
        };
        for y in 0..h {
            for x in 0..w {
                if x + 1 < w {
                    edge(y * w + x, y * w + x + 1, wx.get(x, y));
                }
                if y + 1 < h {
                    edge(y * w + x, (y + 1) * w + x, wy.get(x, y));
                }
            }
        }
        m
    }

    #[test]
    fn zero_lambda_gives_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let init = random_field(&mut rng, 4, 3, 0.0, 1.0);
        let wts = random_field(&mut rng, 4, 3, 0.0, 10.0);
        let sys = assemble(&init, &wts, &wts, 0.0).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                assert_eq!(sys.entry(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(sys.rhs(), init.as_slice());
        let sol = solve_cg(&sys, &SolverSettings::default()).unwrap();
        assert_eq!(sol.field, init);
        assert_eq!(sol.stats.iterations, 0);
    }

    #[test]
    fn single_pixel_system() {
        let f = ScalarField::filled(1, 1, 0.37);
        let one = ScalarField::filled(1, 1, 5.0);
        let sys = assemble(&f, &one, &one, 0.15).unwrap();
        assert_eq!(sys.dimension(), 1);
        assert_eq!(sys.entry(0, 0), 1.0);
        assert_eq!(solve_cg(&sys, &SolverSettings::default()).unwrap().field, f);
        assert_eq!(solve_dense_oracle(&sys).unwrap(), f);
    }

    #[test]
    fn three_by_three_matches_hand_assembly() {
        let init = ScalarField::from_fn(3, 3, |x, y| (x + 3 * y) as f64 / 9.0);
        let uniform = ScalarField::filled(3, 3, 2.5);
        let lambda = 0.15;
        let sys = assemble(&init, &uniform, &uniform, lambda).unwrap();
        let expect = hand_dense(3, 3, &uniform, &uniform, lambda);
        let dense = sys.to_dense();
        for i in 0..9 {
            for j in 0..9 {
                assert_eq!(sys.entry(i, j), expect[i][j], "entry ({i},{j})");
                assert_eq!(dense[(i, j)], expect[i][j]);
            }
        }
        // Corner has 2 neighbours, edge 3, centre 4.
        assert!((expect[0][0] - (1.0 + 2.0 * lambda * 2.5)).abs() < 1e-15);
        assert!((expect[4][4] - (1.0 + 4.0 * lambda * 2.5)).abs() < 1e-15);
    }

    #[test]
    fn random_weights_match_hand_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (w, h) = (5, 4);
        let init = random_field(&mut rng, w, h, 0.0, 1.0);
        let wx = random_field(&mut rng, w, h, 0.0, 10.0);
        let wy = random_field(&mut rng, w, h, 0.0, 10.0);
        let sys = assemble(&init, &wx, &wy, 0.3).unwrap();
        let expect = hand_dense(w, h, &wx, &wy, 0.3);
        for i in 0..w * h {
            for j in 0..w * h {
                assert!((sys.entry(i, j) - expect[i][j]).abs() < 1e-13);
                assert_eq!(sys.entry(i, j), sys.entry(j, i));
            }
        }
    }

    #[test]
    fn two_pixel_closed_form() {
        let (a, b, wt, lambda) = (0.2, 0.9, 4.0, 0.15);
        let init = ScalarField::from_vec(2, 1, vec![a, b]).unwrap();
        let wx = ScalarField::from_vec(2, 1, vec![wt, 123.0]).unwrap();
        let wy = ScalarField::filled(2, 1, 55.0);
        let sys = assemble(&init, &wx, &wy, lambda).unwrap();
        // [(1+c, -c), (-c, 1+c)] x = (a, b), c = lambda * w.
        let c = lambda * wt;
        let det = (1.0 + c) * (1.0 + c) - c * c;
        let x0 = ((1.0 + c) * a + c * b) / det;
        let x1 = (c * a + (1.0 + c) * b) / det;
        let dense = solve_dense_oracle(&sys).unwrap();
        assert!((dense.get(0, 0) - x0).abs() < 1e-14);
        assert!((dense.get(1, 0) - x1).abs() < 1e-14);
    }

    #[test]
    fn constant_rhs_is_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let init = ScalarField::filled(7, 5, 0.42);
        let wx = random_field(&mut rng, 7, 5, 0.0, 1e6);
        let wy = random_field(&mut rng, 7, 5, 0.0, 1e6);
        let sys = assemble(&init, &wx, &wy, 0.15).unwrap();
        let sol = solve_cg(&sys, &SolverSettings::default()).unwrap();
        assert_eq!(sol.field, init);
    }

    #[test]
    fn cg_matches_dense_on_random_6x6() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let init = random_field(&mut rng, 6, 6, 0.0, 1.0);
        let wx = random_field(&mut rng, 6, 6, 0.0, 10.0);
        let wy = random_field(&mut rng, 6, 6, 0.0, 10.0);
        let sys = assemble(&init, &wx, &wy, 0.15).unwrap();
        let dense = solve_dense_oracle(&sys).unwrap();
        for preconditioner in [Preconditioner::Jacobi, Preconditioner::Multilevel] {
            let tight = SolverSettings {
                tolerance: 1e-10,
                preconditioner,
                ..Default::default()
            };
            let cg = solve_cg(&sys, &tight).unwrap();
            assert!(cg.stats.residual <= 1e-10);
            assert!(max_abs(&cg.field, &dense) <= 1e-6);
        }
    }

    #[test]
    fn default_tolerance_residual_is_honoured() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let init = random_field(&mut rng, 20, 17, 0.0, 1.0);
        let wx = random_field(&mut rng, 20, 17, 0.0, 1e4);
        let wy = random_field(&mut rng, 20, 17, 0.0, 1e4);
        let sys = assemble(&init, &wx, &wy, 0.15).unwrap();
        let sol = solve_cg(&sys, &SolverSettings::default()).unwrap();
        let mut ax = vec![0.0; sys.dimension()];
        sys.apply(sol.field.as_slice(), &mut ax);
        let num: f64 = ax.iter().zip(sys.rhs()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = sys.rhs().iter().map(|b| b * b).sum::<f64>().sqrt();
        assert!(num / den <= 1e-5);
        assert!((num / den - sol.stats.residual).abs() < 1e-12);
    }

    #[test]
    fn transpose_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let init = random_field(&mut rng, 9, 6, 0.0, 1.0);
        let wx = random_field(&mut rng, 9, 6, 0.0, 10.0);
        let wy = random_field(&mut rng, 9, 6, 0.0, 10.0);
        let settings = SolverSettings {
            tolerance: 1e-10,
            ..Default::default()
        };
        let a = solve_cg(&assemble(&init, &wx, &wy, 0.15).unwrap(), &settings).unwrap();
        let b = solve_cg(
            &assemble(&init.transpose(), &wy.transpose(), &wx.transpose(), 0.15).unwrap(),
            &settings,
        )
        .unwrap();
        assert!(max_abs(&a.field.transpose(), &b.field) < 1e-8);
    }

    #[test]
    fn total_variation_decreases_with_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let init = random_field(&mut rng, 12, 12, 0.0, 1.0);
        let wx = random_field(&mut rng, 12, 12, 0.1, 10.0);
        let wy = random_field(&mut rng, 12, 12, 0.1, 10.0);
        let mut last = f64::INFINITY;
        for lambda in [0.0, 0.15, 1.5, 15.0] {
            let sys = assemble(&init, &wx, &wy, lambda).unwrap();
            let tv = solve_dense_oracle(&sys).unwrap().mean_total_variation();
            assert!(tv <= last, "tv {tv} > {last} at lambda {lambda}");
            last = tv;
        }
    }

    #[test]
    fn argument_errors() {
        let a = ScalarField::filled(3, 3, 0.5);
        let b = ScalarField::filled(3, 2, 1.0);
        assert!(matches!(assemble(&a, &b, &a, 0.1), Err(Error::InvalidArgument(_))));
        assert!(matches!(assemble(&a, &a, &a, -0.1), Err(Error::InvalidArgument(_))));
        let neg = ScalarField::filled(3, 3, -1.0);
        assert!(matches!(assemble(&a, &neg, &a, 0.1), Err(Error::InvalidArgument(_))));

        let big = ScalarField::filled(65, 64, 0.5);
        let sys = assemble(&big, &big, &big, 0.1).unwrap();
        assert!(matches!(solve_dense_oracle(&sys), Err(Error::InvalidArgument(_))));

        let bad = SolverSettings {
            tolerance: 0.0,
            max_iterations: 10,
            ..Default::default()
        };
        assert!(solve_cg(&sys, &bad).is_err());
    }

    #[test]
    fn reports_non_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let init = random_field(&mut rng, 30, 30, 0.0, 1.0);
        let wx = random_field(&mut rng, 30, 30, 0.0, 1e5);
        let wy = random_field(&mut rng, 30, 30, 0.0, 1e5);
        let sys = assemble(&init, &wx, &wy, 0.15).unwrap();
        let settings = SolverSettings {
            tolerance: 1e-12,
            max_iterations: 2,
            ..Default::default()
        };
        match solve_cg(&sys, &settings) {
            Err(Error::NotConverged {
                iterations,
                residual,
            }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 1e-12 && residual.is_finite());
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn solves_are_bitwise_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let init = random_field(&mut rng, 101, 77, 0.0, 1.0);
        let wx = random_field(&mut rng, 101, 77, 0.0, 100.0);
        let wy = random_field(&mut rng, 101, 77, 0.0, 100.0);
        let sys = assemble(&init, &wx, &wy, 0.15).unwrap();
        let a = solve_cg(&sys, &SolverSettings::default()).unwrap();
        let b = solve_cg(&sys, &SolverSettings::default()).unwrap();
        assert_eq!(a.field, b.field);
    }

    #[test]
    fn multilevel_matches_dense_on_high_contrast_weights() {
        // Large weights in blocks with weak seams, like flat regions of a photo.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (w, h) = (50, 41);
        let init = random_field(&mut rng, w, h, 0.0, 1.0);
        let block = |x: usize, y: usize| (x / 7 + y / 5) % 3;
        let wx = ScalarField::from_fn(w, h, |x, y| if block(x, y) == block(x + 1, y) { 1e8 } else { 1e-2 });
        let wy = ScalarField::from_fn(w, h, |x, y| if block(x, y) == block(x, y + 1) { 1e8 } else { 1e-2 });
        let sys = assemble(&init, &wx, &wy, 0.15).unwrap();
        let dense = solve_dense_oracle(&sys).unwrap();
        let settings = SolverSettings { tolerance: 1e-7, ..Default::default() };
        let sol = solve_cg(&sys, &settings).unwrap();
        assert!(sol.stats.iterations < 200, "{} iterations", sol.stats.iterations);
        assert!(max_abs(&sol.field, &dense) <= 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn maximum_principle(seed in any::<u64>(), w in 1usize..14, h in 1usize..14, scale in 0.0f64..6.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let hi = 10f64.powf(scale);
            let init = random_field(&mut rng, w, h, 0.0, 1.0);
            let wx = random_field(&mut rng, w, h, 0.0, hi);
            let wy = random_field(&mut rng, w, h, 0.0, hi);
            let sys = assemble(&init, &wx, &wy, 0.15).unwrap();
            let sol = solve_cg(&sys, &SolverSettings::default()).unwrap();
            prop_assert!(sol.field.min_value() >= init.min_value() - 1e-8);
            prop_assert!(sol.field.max_value() <= init.max_value() + 1e-8);
            prop_assert!(sol.stats.residual <= 1e-5);
        }
    }
}
