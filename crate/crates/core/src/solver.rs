//! Equality-constrained ℓ1 minimization (basis pursuit) and an exhaustive
//! sparsest-solution oracle.
//!
//! [`BasisPursuit`] runs ADMM on
//!
//! ```text
//! minimize ‖z‖₁  subject to  x = z,  A x = b
//! ```
//!
//! where the `x`-step is the exact projection onto `{x : A x = b}` through a
//! precomputed pseudo-inverse and the `z`-step is soft thresholding. Every few
//! iterations the support of `z` is polished by a least-squares solve on the
//! selected columns, which also yields a dual candidate. Termination is
//! certified by a duality gap: any `y` with `‖Aᵀy‖∞ ≤ 1` gives the lower bound
//! `bᵀy` on the optimal ℓ1 norm.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::analysis::best_s_term_error;
use crate::chebmat::SensingMatrix;
use crate::error::{Error, Result};
use crate::par;
use crate::subsets::{binomial, unrank_combination};

/// Default cap on the number of supports scanned by [`l0_oracle`].
pub const DEFAULT_SUPPORT_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpOptions {
    /// Absolute residual tolerance; `None` means `1e-8 · max(1, ‖b‖₂)`.
    pub feas_tol: Option<f64>,
    /// Relative duality-gap tolerance.
    pub opt_tol: f64,
    pub max_iter: usize,
}

impl Default for BpOptions {
    fn default() -> Self {
        BpOptions {
            feas_tol: None,
            opt_tol: 1e-9,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryResult {
    /// Solution in the original (unscaled) basis.
    pub coefficients: Vec<f64>,
    /// Solution in the coordinates of the matrix that was solved.
    pub normalized_coefficients: Vec<f64>,
    /// `‖A c − b‖₂` on the solved matrix.
    pub residual_l2: f64,
    /// `‖c‖₁` of `normalized_coefficients`.
    pub l1_norm: f64,
    /// Certified upper bound on `l1_norm` minus the optimum.
    pub duality_gap: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

/// A basis-pursuit solver bound to one matrix; reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct BasisPursuit {
    a: DMatrix<f64>,
    pinv: DMatrix<f64>,
    scaling: Vec<f64>,
}

// Base cadence of step-size adaptation and certificate checks.
const CHECK_EVERY: usize = 10;
const RHO_INIT: f64 = 1.0;
const RELAX: f64 = 1.6;
// Gram eigenvalues below this fraction of the largest count as zero.
const PINV_CUT: f64 = 1e-12;

impl BasisPursuit {
    /// Prepares the solver. The matrix is used as given; pass a
    /// column-normalized matrix to minimize ℓ1 in the normalized basis.
    pub fn new(a: &SensingMatrix) -> Result<Self> {
        let (m, n) = (a.rows(), a.cols());
        if m == 0 || n == 0 {
            return Err(Error::InvalidArgument("matrix must be non-empty".into()));
        }
        let e = a.entries().clone();
        if e.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
        }
        let pinv = pseudo_inverse(&e);
        Ok(BasisPursuit {
            a: e,
            pinv,
            scaling: a.column_scaling().to_vec(),
        })
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn solve(&self, b: &[f64], opts: &BpOptions) -> Result<RecoveryResult> {
        let (m, n) = (self.rows(), self.cols());
        if b.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: b.len(),
            });
        }
        if b.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("sample vector has non-finite entries".into()));
        }
        let b = DVector::from_column_slice(b);
        let bnorm = b.norm();
        let feas_tol = opts.feas_tol.unwrap_or(1e-8 * bnorm.max(1.0));

        if bnorm == 0.0 {
            return Ok(self.finish(DVector::zeros(n), &b, 0.0, 0, SolveStatus::Converged));
        }

        let x0 = &self.pinv * &b;
        let r0 = (&self.a * &x0 - &b).norm();
        let scale = x0.amax();
        if r0 > feas_tol || scale == 0.0 {
            return Ok(self.finish(x0, &b, f64::INFINITY, 0, SolveStatus::Infeasible));
        }

        // work with ‖x0‖∞ = 1 so thresholds are scale-free
        let bh = &b / scale;
        let feas_h = feas_tol / scale;
        let mut state = Admm::new(&self.a, &self.pinv, &bh, x0 / scale);
        let mut best: Option<(f64, DVector<f64>)> = None;
        let mut lower = f64::NEG_INFINITY;
        let mut status = SolveStatus::MaxIterations;
        let mut iterations = opts.max_iter;

        let mut next_check = CHECK_EVERY;
        for it in 1..=opts.max_iter {
            state.step();
            if it % CHECK_EVERY == 0 {
                state.adapt_rho();
            }
            if it < next_check && it != opts.max_iter {
                continue;
            }
            // certificate checks thin out geometrically on long runs
            next_check = it + CHECK_EVERY.max(it / 10 / CHECK_EVERY * CHECK_EVERY);
            // projected primal candidate
            let xz = state.projected_z();
            self.offer(&mut best, xz, &bh, feas_h);
            let ya = state.admm_dual();
            lower = lower.max(self.dual_bound(&ya, &bh));
            // support polish, on the full support and without its small entries
            if let Some((xp, y, q)) = self.polish(&state.z, &bh, feas_h) {
                self.offer(&mut best, xp, &bh, feas_h);
                lower = lower.max(self.dual_bound(&y, &bh));
                // ADMM dual corrected to satisfy the support equations exactly
                let yc = &ya - &q * q.tr_mul(&ya) + y;
                lower = lower.max(self.dual_bound(&yc, &bh));
            }
            if let Some((upper, _)) = &best {
                if upper - lower <= opts.opt_tol * (1.0 + upper) {
                    status = SolveStatus::Converged;
                    iterations = it;
                    break;
                }
            }
        }

        let (upper, x) = match best {
            Some(b) => b,
            None => {
                let x = state.projected_z();
                (x.lp_norm(1), x)
            }
        };
        let gap = (upper - lower).max(0.0) * scale;
        Ok(self.finish(x * scale, &b, gap, iterations, status))
    }

    fn finish(
        &self,
        c: DVector<f64>,
        b: &DVector<f64>,
        gap: f64,
        iterations: usize,
        status: SolveStatus,
    ) -> RecoveryResult {
        let residual_l2 = (&self.a * &c - b).norm();
        let coefficients = c
            .iter()
            .zip(&self.scaling)
            .map(|(x, s)| x * s)
            .collect();
        RecoveryResult {
            coefficients,
            l1_norm: c.lp_norm(1),
            normalized_coefficients: c.as_slice().to_vec(),
            residual_l2,
            duality_gap: gap,
            iterations,
            status,
        }
    }

    fn offer(&self, best: &mut Option<(f64, DVector<f64>)>, x: DVector<f64>, b: &DVector<f64>, feas: f64) {
        if (&self.a * &x - b).norm() > feas {
            return;
        }
        let l1 = x.lp_norm(1);
        if best.as_ref().is_none_or(|(v, _)| l1 < *v) {
            *best = Some((l1, x));
        }
    }

    /// `bᵀy` after rescaling `y` into the dual-feasible set `‖Aᵀy‖∞ ≤ 1`.
    fn dual_bound(&self, y: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let g = self.a.tr_mul(y);
        let s = g.amax().max(1.0);
        b.dot(y) / s
    }

    /// Least squares on the support of `z`; returns the fitted vector and the
    /// minimum-norm `y` with `A_Tᵀ y = sign(x_T)`, and the orthonormal basis
    /// of the range of `A_T`.
    fn polish(
        &self,
        z: &DVector<f64>,
        b: &DVector<f64>,
        feas: f64,
    ) -> Option<(DVector<f64>, DVector<f64>, DMatrix<f64>)> {
        let support: Vec<usize> = z
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect();
        let k = support.len();
        if k == 0 || k > self.rows() {
            return None;
        }
        let sub = self.a.select_columns(&support);
        let (xt, q, r) = least_squares(sub, b)?;
        let mut x = DVector::zeros(self.cols());
        for (&i, &v) in support.iter().zip(xt.iter()) {
            x[i] = v;
        }
        if (&self.a * &x - b).norm() > feas {
            return None;
        }
        let sgn = xt.map(|v| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 });
        let w = r.transpose().solve_lower_triangular(&sgn)?;
        Some((x, &q * w, q))
    }
}

/// Moore–Penrose inverse through the eigendecomposition of the smaller Gram
/// matrix, then two Newton–Schulz refinements `X ← 2X − XAX`.
fn pseudo_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let wide = a.nrows() <= a.ncols();
    let gram = if wide { a * a.transpose() } else { a.tr_mul(a) };
    let eig = gram.symmetric_eigen();
    let lmax = eig.eigenvalues.max();
    let inv = eig.eigenvalues.map(|l| if l > PINV_CUT * lmax { 1.0 / l } else { 0.0 });
    let v = &eig.eigenvectors;
    let core = v * DMatrix::from_diagonal(&inv) * v.transpose();
    let mut x = if wide { a.tr_mul(&core) } else { core * a.transpose() };
    for _ in 0..2 {
        let ax = a * &x;
        x = &x * 2.0 - &x * ax;
    }
    x
}

/// Thin-QR least squares. Returns `None` when the columns are numerically
/// dependent.
fn least_squares(
    sub: DMatrix<f64>,
    b: &DVector<f64>,
) -> Option<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let qr = sub.qr();
    let (q, r) = qr.unpack();
    let diag = r.diagonal().map(f64::abs);
    let dmax = diag.max();
    if !(dmax > 0.0) || diag.min() <= 1e-10 * dmax {
        return None;
    }
    let x = r.solve_upper_triangular(&q.tr_mul(b))?;
    Some((x, q, r))
}

struct Admm<'a> {
    a: &'a DMatrix<f64>,
    pinv: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    z: DVector<f64>,
    z_prev: DVector<f64>,
    u: DVector<f64>,
    x: DVector<f64>,
    rho: f64,
}

impl<'a> Admm<'a> {
    fn new(a: &'a DMatrix<f64>, pinv: &'a DMatrix<f64>, b: &'a DVector<f64>, x0: DVector<f64>) -> Self {
        let n = x0.len();
        Admm {
            a,
            pinv,
            b,
            z: x0.clone(),
            z_prev: x0.clone(),
            u: DVector::zeros(n),
            x: x0,
            rho: RHO_INIT,
        }
    }

    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        let r = self.a * v - self.b;
        v - self.pinv * r
    }

    fn step(&mut self) {
        let v = &self.z - &self.u;
        self.x = self.project(&v);
        let w = &self.x * RELAX + &self.z * (1.0 - RELAX) + &self.u;
        let t = 1.0 / self.rho;
        std::mem::swap(&mut self.z_prev, &mut self.z);
        self.z = w.map(|v| soft_threshold(v, t));
        self.u = w - &self.z;
    }

    fn projected_z(&self) -> DVector<f64> {
        self.project(&self.z)
    }

    /// Least-squares fit of `Aᵀy ≈ ρu`, the multiplier of `x = z`.
    fn admm_dual(&self) -> DVector<f64> {
        self.pinv.tr_mul(&(&self.u * self.rho))
    }

    /// Residual balancing; `u` is rescaled so `ρu` is unchanged.
    fn adapt_rho(&mut self) {
        let primal = (&self.x - &self.z).norm();
        let dual = self.rho * (&self.z - &self.z_prev).norm();
        let factor = if primal > 10.0 * dual {
            2.0
        } else if dual > 10.0 * primal {
            0.5
        } else {
            return;
        };
        self.rho *= factor;
        self.u /= factor;
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// One-shot basis pursuit on `a`.
pub fn basis_pursuit(a: &SensingMatrix, b: &[f64], opts: &BpOptions) -> Result<RecoveryResult> {
    BasisPursuit::new(a)?.solve(b, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L0Solution {
    /// Column indices, ascending.
    pub support: Vec<usize>,
    /// Coefficients in the coordinates of the given matrix.
    pub coefficients: Vec<f64>,
}

pub fn l0_oracle(a: &SensingMatrix, b: &[f64], s: usize) -> Result<Option<L0Solution>> {
    l0_oracle_with_cap(a, b, s, DEFAULT_SUPPORT_CAP)
}

/// Sparsest representation of `b` with at most `s` columns, by exhaustive
/// search. Supports are visited by size, then lexicographically; the first
/// with least-squares residual `≤ 1e-8 ‖b‖₂` wins.
pub fn l0_oracle_with_cap(
    a: &SensingMatrix,
    b: &[f64],
    s: usize,
    cap: u128,
) -> Result<Option<L0Solution>> {
    let (m, n) = (a.rows(), a.cols());
    if b.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: b.len(),
        });
    }
    let s = s.min(n);
    let total: u128 = (1..=s).map(|k| binomial(n as u64, k as u64)).sum();
    if total > cap {
        return Err(Error::SizeLimit {
            what: "candidate supports",
            cardinality: total,
            cap,
        });
    }
    let b = DVector::from_column_slice(b);
    let tol = 1e-8 * b.norm();
    if b.norm() == 0.0 {
        return Ok(Some(L0Solution {
            support: Vec::new(),
            coefficients: vec![0.0; n],
        }));
    }
    let e = a.entries();
    for k in 1..=s.min(m) {
        let count = binomial(n as u64, k as u64) as usize;
        let hit = par::find_map_first(count, |rank| {
            let t = unrank_combination(n, k, rank as u128);
            let (x, _, _) = least_squares(e.select_columns(&t), &b)?;
            let res = (e.select_columns(&t) * &x - &b).norm();
            (res <= tol).then_some((t, x))
        });
        if let Some((support, x)) = hit {
            let mut coefficients = vec![0.0; n];
            for (&i, &v) in support.iter().zip(x.iter()) {
                coefficients[i] = v;
            }
            return Ok(Some(L0Solution {
                support,
                coefficients,
            }));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecoveryError {
    pub abs_l2: f64,
    pub rel_l2: f64,
    /// `σ_{s,1}(c_true) / √s`, the best-term side of the stability estimate.
    pub best_term_rhs: f64,
}

pub fn recovery_error(c_hat: &[f64], c_true: &[f64], s: usize) -> Result<RecoveryError> {
    if c_hat.len() != c_true.len() {
        return Err(Error::DimensionMismatch {
            expected: c_true.len(),
            got: c_hat.len(),
        });
    }
    if s == 0 {
        return Err(Error::InvalidArgument("sparsity s must be >= 1".into()));
    }
    let abs_l2 = c_hat
        .iter()
        .zip(c_true)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let true_norm = c_true.iter().map(|x| x * x).sum::<f64>().sqrt();
    let rel_l2 = if true_norm > 0.0 {
        abs_l2 / true_norm
    } else if abs_l2 == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(RecoveryError {
        abs_l2,
        rel_l2,
        best_term_rhs: best_s_term_error(c_true, s) / (s as f64).sqrt(),
    })
}
