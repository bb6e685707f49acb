//! Unisolvence checks for sparse interpolation in one-dimensional bases.
//!
//! A point set is unisolvent for `s`-sparse interpolation exactly when every
//! `2s` columns of the collocation matrix `[B_j(x_k)]` are linearly
//! independent. Everything here is brute force and meant for small `N`.
//!
//! Basis functions are indexed from 1 (`B_1, …, B_N`), as are the column
//! subsets reported as witnesses.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::chebmat::chebyshev_1d;
use crate::error::{Error, Result};
use crate::par;
use crate::rng;
use crate::subsets::{binomial, unrank_combination};

/// Default cap on the number of column subsets examined.
pub const DEFAULT_SUBSET_CAP: u128 = 1_000_000;

/// Probe determinants at or below this magnitude count as vanishing.
pub const DET_ZERO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BasisKind {
    /// `x^{j-1}`
    Monomial { n: usize },
    /// `T_{j-1}(x)`
    Chebyshev1D { n: usize },
    /// `exp(λ_j x)`
    Exponential { lambdas: Vec<f64> },
    /// `x^{λ_j}`
    PowerFunction { lambdas: Vec<f64> },
    /// `1 / (x + λ_j)`
    CauchyKernel { lambdas: Vec<f64> },
    /// Indicator of `[j, j+1)`.
    BSplineOrder1 { n: usize },
}

/// A closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisSpec {
    kind: BasisKind,
    domain: Interval,
}

impl BasisSpec {
    pub fn monomial(n: usize) -> Result<Self> {
        Self::new(BasisKind::Monomial { n }, Interval { lo: -1.0, hi: 1.0 })
    }

    pub fn chebyshev(n: usize) -> Result<Self> {
        Self::new(BasisKind::Chebyshev1D { n }, Interval { lo: -1.0, hi: 1.0 })
    }

    pub fn exponential(lambdas: Vec<f64>) -> Result<Self> {
        Self::new(BasisKind::Exponential { lambdas }, Interval { lo: -1.0, hi: 1.0 })
    }

    pub fn power_function(lambdas: Vec<f64>) -> Result<Self> {
        Self::new(BasisKind::PowerFunction { lambdas }, Interval { lo: 0.5, hi: 2.0 })
    }

    pub fn cauchy_kernel(lambdas: Vec<f64>) -> Result<Self> {
        Self::new(BasisKind::CauchyKernel { lambdas }, Interval { lo: 0.5, hi: 2.0 })
    }

    /// Order-1 B-splines on `[1, N+1]`.
    pub fn bspline(n: usize) -> Result<Self> {
        Self::new(
            BasisKind::BSplineOrder1 { n },
            Interval {
                lo: 1.0,
                hi: n as f64 + 1.0,
            },
        )
    }

    pub fn new(kind: BasisKind, domain: Interval) -> Result<Self> {
        if !(domain.lo.is_finite() && domain.hi.is_finite() && domain.lo < domain.hi) {
            return Err(Error::InvalidArgument(format!(
                "domain [{}, {}] is not a bounded interval",
                domain.lo, domain.hi
            )));
        }
        match &kind {
            BasisKind::Monomial { n } | BasisKind::Chebyshev1D { n } | BasisKind::BSplineOrder1 { n } => {
                if *n == 0 {
                    return Err(Error::InvalidArgument("basis needs N >= 1".into()));
                }
            }
            BasisKind::Exponential { lambdas }
            | BasisKind::PowerFunction { lambdas }
            | BasisKind::CauchyKernel { lambdas } => {
                if lambdas.is_empty() || lambdas.iter().any(|l| !l.is_finite()) {
                    return Err(Error::InvalidArgument("lambdas must be finite and non-empty".into()));
                }
                if lambdas.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidArgument("lambdas must be strictly increasing".into()));
                }
            }
        }
        match &kind {
            BasisKind::PowerFunction { .. } if domain.lo <= 0.0 => {
                return Err(Error::InvalidArgument("power functions need a domain inside (0, inf)".into()));
            }
            BasisKind::CauchyKernel { lambdas } => {
                if lambdas[0] < 0.0 {
                    return Err(Error::InvalidArgument("Cauchy kernel needs lambda_1 >= 0".into()));
                }
                if domain.lo <= 0.0 {
                    return Err(Error::InvalidArgument("Cauchy kernel needs a domain inside (0, inf)".into()));
                }
            }
            _ => {}
        }
        Ok(BasisSpec { kind, domain })
    }

    pub fn with_domain(self, lo: f64, hi: f64) -> Result<Self> {
        Self::new(self.kind, Interval { lo, hi })
    }

    pub fn kind(&self) -> &BasisKind {
        &self.kind
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    /// Number of basis functions `N`.
    pub fn len(&self) -> usize {
        match &self.kind {
            BasisKind::Monomial { n } | BasisKind::Chebyshev1D { n } | BasisKind::BSplineOrder1 { n } => *n,
            BasisKind::Exponential { lambdas }
            | BasisKind::PowerFunction { lambdas }
            | BasisKind::CauchyKernel { lambdas } => lambdas.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `B_j(x)` for `1 <= j <= N`.
    pub fn eval(&self, j: usize, x: f64) -> Result<f64> {
        if j == 0 || j > self.len() {
            return Err(Error::InvalidArgument(format!(
                "basis index {j} outside 1..={}",
                self.len()
            )));
        }
        if !(x >= self.domain.lo && x <= self.domain.hi) {
            return Err(Error::OutOfBasisDomain {
                value: x,
                lo: self.domain.lo,
                hi: self.domain.hi,
            });
        }
        Ok(match &self.kind {
            BasisKind::Monomial { .. } => x.powi(j as i32 - 1),
            BasisKind::Chebyshev1D { .. } => chebyshev_1d(j as u32 - 1, x),
            BasisKind::Exponential { lambdas } => (lambdas[j - 1] * x).exp(),
            BasisKind::PowerFunction { lambdas } => x.powf(lambdas[j - 1]),
            BasisKind::CauchyKernel { lambdas } => 1.0 / (x + lambdas[j - 1]),
            BasisKind::BSplineOrder1 { .. } => {
                let lo = j as f64;
                if lo <= x && x < lo + 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }

    /// `[B_j(x_k)]` with one row per point.
    pub fn collocation_matrix(&self, points: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.len();
        let mut out = DMatrix::zeros(points.len(), n);
        for (k, &x) in points.iter().enumerate() {
            for j in 1..=n {
                out[(k, j - 1)] = self.eval(j, x)?;
            }
        }
        Ok(out)
    }
}

/// Convenience for [`BasisSpec::eval`].
pub fn eval_basis(spec: &BasisSpec, j: usize, x: f64) -> Result<f64> {
    spec.eval(j, x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnisolvenceVerdict {
    pub unisolvent: bool,
    /// First rank-deficient column subset in lexicographic order (1-based).
    pub witness: Option<Vec<usize>>,
    pub reason: Option<String>,
}

/// Numerical rank test: `σ_min > 1e-10 · σ_max · max(rows, cols)`.
fn full_column_rank(sub: DMatrix<f64>) -> bool {
    let (r, c) = sub.shape();
    let sv = sub.singular_values();
    let smax = sv.max();
    smax > 0.0 && sv.min() > 1e-10 * smax * r.max(c) as f64
}

pub fn is_unisolvent(spec: &BasisSpec, points: &[f64], s: usize) -> Result<UnisolvenceVerdict> {
    let a = spec.collocation_matrix(points)?;
    unisolvent_matrix_with_cap(&a, s, DEFAULT_SUBSET_CAP)
}

/// Rank criterion on an explicit collocation matrix: every `min(2s, N)`
/// columns must be linearly independent.
pub fn unisolvent_matrix_with_cap(a: &DMatrix<f64>, s: usize, cap: u128) -> Result<UnisolvenceVerdict> {
    let (m, n) = a.shape();
    let k = (2 * s).min(n);
    if k == 0 {
        return Ok(UnisolvenceVerdict {
            unisolvent: true,
            witness: None,
            reason: Some("s = 0 is vacuous".into()),
        });
    }
    if m < k {
        return Ok(UnisolvenceVerdict {
            unisolvent: false,
            witness: None,
            reason: Some(format!("m < 2s ({m} points, need {k})")),
        });
    }
    let count = binomial(n as u64, k as u64);
    if count > cap {
        return Err(Error::SizeLimit {
            what: "column subsets",
            cardinality: count,
            cap,
        });
    }
    let witness = par::find_map_first(count as usize, |rank| {
        let t = unrank_combination(n, k, rank as u128);
        (!full_column_rank(a.select_columns(&t))).then_some(t)
    });
    Ok(match witness {
        Some(t) => UnisolvenceVerdict {
            unisolvent: false,
            reason: Some("rank-deficient column subset".into()),
            witness: Some(t.into_iter().map(|i| i + 1).collect()),
        },
        None => UnisolvenceVerdict {
            unisolvent: true,
            witness: None,
            reason: None,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub all_nonzero: bool,
    pub min_abs_det: f64,
    pub trials: usize,
    /// The first configuration whose determinant vanished.
    pub witness_points: Option<Vec<f64>>,
}

/// `det[B_j(x_k)]` for the functions in `t` (1-based) at the given points.
pub fn collocation_determinant(spec: &BasisSpec, t: &[usize], points: &[f64]) -> Result<f64> {
    if t.len() != points.len() {
        return Err(Error::DimensionMismatch {
            expected: t.len(),
            got: points.len(),
        });
    }
    let mut a = DMatrix::zeros(t.len(), t.len());
    for (k, &x) in points.iter().enumerate() {
        for (c, &j) in t.iter().enumerate() {
            a[(k, c)] = spec.eval(j, x)?;
        }
    }
    Ok(a.determinant())
}

/// Sorted distinct uniform draws from the domain.
fn draw_distinct(spec: &BasisSpec, count: usize, rng: &mut rng::StreamRng) -> Vec<f64> {
    let Interval { lo, hi } = spec.domain;
    let min_gap = 1e-9 * (hi - lo);
    loop {
        let mut pts: Vec<f64> = (0..count).map(|_| rng.random_range(lo..hi)).collect();
        pts.sort_by(f64::total_cmp);
        if pts.windows(2).all(|w| w[1] - w[0] > min_gap) {
            return pts;
        }
    }
}

/// Random search for a vanishing collocation determinant of the subsystem
/// `t`. A `false` verdict is a certified counterexample to the Chebyshev
/// property; `true` is only evidence.
pub fn chebyshev_system_probe(spec: &BasisSpec, t: &[usize], trials: usize, seed: u64) -> Result<ProbeReport> {
    if t.iter().any(|&j| j == 0 || j > spec.len()) {
        return Err(Error::InvalidArgument("subset index outside 1..=N".into()));
    }
    let mut rng = rng::stream(seed);
    let mut min_abs_det = f64::INFINITY;
    let mut witness = None;
    for _ in 0..trials {
        let pts = draw_distinct(spec, t.len(), &mut rng);
        let det = collocation_determinant(spec, t, &pts)?.abs();
        min_abs_det = min_abs_det.min(det);
        if det <= DET_ZERO && witness.is_none() {
            witness = Some(pts);
        }
    }
    Ok(ProbeReport {
        all_nonzero: witness.is_none(),
        min_abs_det,
        trials,
        witness_points: witness,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnisolventSearch {
    pub points: Option<Vec<f64>>,
    pub attempts_used: usize,
}

/// Draws `2s` random distinct points per attempt until the rank criterion
/// passes.
pub fn find_unisolvent_points(spec: &BasisSpec, s: usize, attempts: usize, seed: u64) -> Result<UnisolventSearch> {
    if s == 0 {
        return Ok(UnisolventSearch {
            points: Some(Vec::new()),
            attempts_used: 0,
        });
    }
    for attempt in 0..attempts {
        let mut rng = rng::stream(rng::derive_seed(seed, attempt as u64, 0));
        let pts = draw_distinct(spec, 2 * s, &mut rng);
        if is_unisolvent(spec, &pts, s)?.unisolvent {
            return Ok(UnisolventSearch {
                points: Some(pts),
                attempts_used: attempt + 1,
            });
        }
    }
    Ok(UnisolventSearch {
        points: None,
        attempts_used: attempts,
    })
}
