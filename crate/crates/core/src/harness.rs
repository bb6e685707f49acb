//! Randomized success-rate experiments: plant a random `s`-sparse
//! coefficient vector, sample it at the design points, recover it by basis
//! pursuit, and count exact recoveries per sparsity level.
//!
//! Every trial draws from its own ChaCha8 stream seeded by
//! `master_seed ⊕ hash(s, trial)`, and outcomes are aggregated in index
//! order, so a report depends only on its configuration and never on the
//! number of worker threads.

use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::analysis::mutual_incoherence;
use crate::chebmat::{assemble, SensingMatrix};
use crate::error::{Error, Result};
use crate::indexsets::{enumerate, MultiIndexSet, SpaceKind};
use crate::par;
use crate::rng::{self, StreamRng};
use crate::sampling::{deterministic_points, modulus_for_point_count, random_points, PointSet};
use crate::solver::{BasisPursuit, BpOptions, SolveStatus};

const POINT_SALT: u64 = 0x5EED_0F90_1475_7000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    Deterministic,
    Random,
}

impl std::fmt::Display for Sampling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sampling::Deterministic => "det",
            Sampling::Random => "rand",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub space: SpaceKind,
    pub d: usize,
    pub q: u32,
    pub m: usize,
    pub sampling: Sampling,
    pub s_min: usize,
    pub s_max: usize,
    pub trials_per_s: usize,
    pub master_seed: u64,
    pub success_rel_tol: f64,
    /// Draw fresh random points for every trial instead of once per config.
    pub redraw_per_trial: bool,
    #[serde(skip)]
    pub solver: BpOptions,
}

impl ExperimentConfig {
    /// Defaults: sparsities `1..=m/2`, 100 trials each, seed 0, success at
    /// relative ℓ2 error `1e-3`.
    pub fn new(space: SpaceKind, d: usize, q: u32, m: usize, sampling: Sampling) -> Self {
        ExperimentConfig {
            space,
            d,
            q,
            m,
            sampling,
            s_min: 1,
            s_max: (m / 2).max(1),
            trials_per_s: 100,
            master_seed: 0,
            success_rel_tol: 1e-3,
            redraw_per_trial: false,
            solver: BpOptions::default(),
        }
    }

    pub fn with_sparsity(mut self, s_min: usize, s_max: usize) -> Self {
        self.s_min = s_min;
        self.s_max = s_max;
        self
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials_per_s = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    /// Checks the configuration and enumerates its index set.
    pub fn validate(&self) -> Result<MultiIndexSet> {
        if self.d == 0 || self.m == 0 {
            return Err(Error::InvalidArgument("d and m must be >= 1".into()));
        }
        if self.sampling == Sampling::Deterministic {
            modulus_for_point_count(self.m as u64)?;
        }
        if self.s_min == 0 || self.s_min > self.s_max {
            return Err(Error::InvalidArgument(format!(
                "sparsity range {}..={} must satisfy 1 <= smin <= smax",
                self.s_min, self.s_max
            )));
        }
        if !(self.success_rel_tol > 0.0) {
            return Err(Error::InvalidArgument("success tolerance must be positive".into()));
        }
        let set = enumerate(self.space, self.q, self.d)?;
        if self.s_max > set.len() {
            return Err(Error::InvalidArgument(format!(
                "smax = {} exceeds the basis size N = {}",
                self.s_max,
                set.len()
            )));
        }
        Ok(set)
    }

    fn points(&self, seed: u64) -> Result<PointSet> {
        match self.sampling {
            Sampling::Deterministic => {
                deterministic_points(modulus_for_point_count(self.m as u64)?, self.d)
            }
            Sampling::Random => random_points(self.m, self.d, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsityRow {
    pub s: usize,
    pub trials: usize,
    pub successes: usize,
    pub rate: Option<f64>,
    pub mean_rel_err: Option<f64>,
    pub solver_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub basis_size: usize,
    /// Coherence of the shared matrix; absent when points are redrawn.
    pub coherence: Option<f64>,
    pub rows: Vec<SparsityRow>,
    pub wall_time_secs: f64,
}

impl ExperimentReport {
    pub fn row(&self, s: usize) -> Option<&SparsityRow> {
        self.rows.iter().find(|r| r.s == s)
    }

    /// `#`-prefixed config echo, then `s,trials,successes,rate,mean_rel_err,solver_failures`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let c = &self.config;
        writeln!(out, "# space={} d={} q={} m={} N={}", c.space, c.d, c.q, c.m, self.basis_size)?;
        writeln!(out, "# sampling={} redraw_per_trial={}", c.sampling, c.redraw_per_trial)?;
        writeln!(out, "# smin={} smax={} trials={} seed={}", c.s_min, c.s_max, c.trials_per_s, c.master_seed)?;
        writeln!(out, "# success_rel_tol={:e}", c.success_rel_tol)?;
        if let Some(mu) = self.coherence {
            writeln!(out, "# coherence={mu:.16e}")?;
        }
        writeln!(out, "s,trials,successes,rate,mean_rel_err,solver_failures")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.s,
                r.trials,
                r.successes,
                opt(r.rate),
                opt(r.mean_rel_err),
                r.solver_failures
            )?;
        }
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// Paired deterministic/random curves in one table.
pub fn write_plot_csv<W: Write>(det: &ExperimentReport, rand: &ExperimentReport, mut out: W) -> Result<()> {
    let c = &det.config;
    writeln!(out, "# space={} d={} q={} m={} N={}", c.space, c.d, c.q, c.m, det.basis_size)?;
    writeln!(out, "# trials={} seed={}", c.trials_per_s, c.master_seed)?;
    writeln!(out, "s,det_rate,rand_rate,det_mean_rel_err,rand_mean_rel_err")?;
    for (a, b) in det.rows.iter().zip(&rand.rows) {
        writeln!(
            out,
            "{},{},{},{},{}",
            a.s,
            opt(a.rate),
            opt(b.rate),
            opt(a.mean_rel_err),
            opt(b.mean_rel_err)
        )?;
    }
    Ok(())
}

/// Uniform random size-`s` support (partial Fisher–Yates) carrying i.i.d.
/// standard normal values.
pub fn draw_sparse_truth<R: Rng + ?Sized>(n: usize, s: usize, rng: &mut R) -> Result<Vec<f64>> {
    if s == 0 || s > n {
        return Err(Error::InvalidArgument(format!("sparsity s = {s} must lie in 1..={n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..s {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut c = vec![0.0; n];
    for &i in &idx[..s] {
        c[i] = StandardNormal.sample(rng);
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub success: bool,
    pub rel_err: f64,
    pub status: SolveStatus,
}

/// One planted-recovery trial on a prepared (normalized) matrix.
pub fn run_trial(
    solver: &BasisPursuit,
    s: usize,
    rng: &mut StreamRng,
    success_rel_tol: f64,
    opts: &BpOptions,
) -> Result<TrialOutcome> {
    let c0 = draw_sparse_truth(solver.cols(), s, rng)?;
    let b = solver.matrix() * DVector::from_column_slice(&c0);
    let r = solver.solve(b.as_slice(), opts)?;
    let err = r
        .normalized_coefficients
        .iter()
        .zip(&c0)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let rel_err = err / c0.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(TrialOutcome {
        success: rel_err <= success_rel_tol,
        rel_err,
        status: r.status,
    })
}

/// The normalized design matrix for `config`.
pub fn design_matrix(config: &ExperimentConfig, set: &MultiIndexSet, point_seed: u64) -> Result<SensingMatrix> {
    assemble(&config.points(point_seed)?, set)?.normalize_columns()
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let set = config.validate()?;
    let shared_seed = rng::derive_seed(config.master_seed ^ POINT_SALT, u64::MAX, 0);
    let redraw = config.redraw_per_trial && config.sampling == Sampling::Random;

    let (shared, coherence) = if redraw {
        (None, None)
    } else {
        let a = design_matrix(config, &set, shared_seed)?;
        let mu = mutual_incoherence(&a).ok().map(|r| r.mu);
        (Some(BasisPursuit::new(&a)?), mu)
    };

    let levels = config.s_max - config.s_min + 1;
    let trials = config.trials_per_s;
    let outcomes: Vec<Option<TrialOutcome>> = par::map_collect(levels * trials, |job| {
        let s = config.s_min + job / trials;
        let t = (job % trials) as u64;
        let mut stream = rng::stream(rng::derive_seed(config.master_seed, s as u64, t));
        let local;
        let solver = match &shared {
            Some(bp) => bp,
            None => {
                let seed = rng::derive_seed(config.master_seed ^ POINT_SALT, s as u64, t);
                local = design_matrix(config, &set, seed).and_then(|a| BasisPursuit::new(&a)).ok()?;
                &local
            }
        };
        run_trial(solver, s, &mut stream, config.success_rel_tol, &config.solver).ok()
    });

    let rows = (0..levels)
        .map(|level| {
            let chunk = &outcomes[level * trials..(level + 1) * trials];
            let successes = chunk.iter().flatten().filter(|o| o.success).count();
            let solver_failures = chunk
                .iter()
                .filter(|o| o.is_none_or(|o| o.status != SolveStatus::Converged))
                .count();
            let err_sum: f64 = chunk.iter().map(|o| o.map_or(f64::INFINITY, |o| o.rel_err)).sum();
            SparsityRow {
                s: config.s_min + level,
                trials,
                successes,
                rate: (trials > 0).then(|| successes as f64 / trials as f64),
                mean_rel_err: (trials > 0).then(|| err_sum / trials as f64),
                solver_failures,
            }
        })
        .collect();

    Ok(ExperimentReport {
        config: config.clone(),
        basis_size: set.len(),
        coherence,
        rows,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}
