//! Coherence, restricted-isometry constants, best s-term errors, exponential
//! sums, and the closed-form coherence bounds for the deterministic design.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::chebmat::{SensingMatrix, DEGENERATE_NORM};
use crate::error::{Error, Result};
use crate::indexsets::{tp_cardinality, td_cardinality};
use crate::par;
use crate::sampling::is_prime;
use crate::subsets::{binomial, unrank_combination};

/// Default cap on the number of subsets scanned by [`exact_rip_constant`].
pub const DEFAULT_SUBSET_CAP: u128 = 1_000_000;

/// A theoretical bound, or the hypothesis that rules it out.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "value", rename_all = "lowercase")]
pub enum Bound {
    Applicable(f64),
    Inapplicable(String),
}

impl Bound {
    pub fn value(&self) -> Option<f64> {
        match self {
            Bound::Applicable(v) => Some(*v),
            Bound::Inapplicable(_) => None,
        }
    }

    pub fn is_applicable(&self) -> bool {
        matches!(self, Bound::Applicable(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherenceReport {
    pub mu: f64,
    pub argmax_pair: (usize, usize),
    pub theoretical_bound: Option<f64>,
    pub bound_applicable: bool,
    /// Why the bound does not apply, when it does not.
    pub inapplicable_reason: Option<String>,
}

impl CoherenceReport {
    pub fn with_bound(mut self, bound: &Bound) -> Self {
        match bound {
            Bound::Applicable(v) => {
                self.theoretical_bound = Some(*v);
                self.bound_applicable = true;
                self.inapplicable_reason = None;
            }
            Bound::Inapplicable(why) => {
                self.theoretical_bound = None;
                self.bound_applicable = false;
                self.inapplicable_reason = Some(why.clone());
            }
        }
        self
    }
}

fn checked_norms(a: &SensingMatrix) -> Result<Vec<f64>> {
    let norms = a.column_norms();
    if let Some((k, &norm)) = norms
        .iter()
        .enumerate()
        .find(|(_, &n)| !(n >= DEGENERATE_NORM))
    {
        return Err(Error::DegenerateColumn {
            column: k,
            label: a.labels()[k].to_string(),
            norm,
        });
    }
    Ok(norms)
}

/// Largest normalized inner product between distinct columns, by brute force.
pub fn mutual_incoherence(a: &SensingMatrix) -> Result<CoherenceReport> {
    let n = a.cols();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "coherence needs at least two columns".into(),
        ));
    }
    let norms = checked_norms(a)?;
    let e = a.entries();

    // (value, k, j); ties resolve to the lexicographically smallest pair
    let better = |x: (f64, usize, usize), y: (f64, usize, usize)| {
        if y.0 > x.0 || (y.0 == x.0 && (y.1, y.2) < (x.1, x.2)) {
            y
        } else {
            x
        }
    };
    let best = par::map_reduce(
        n - 1,
        (-1.0, usize::MAX, usize::MAX),
        |k| {
            let ck = e.column(k);
            let mut local = (-1.0, usize::MAX, usize::MAX);
            for j in k + 1..n {
                let v = ck.dot(&e.column(j)).abs() / (norms[k] * norms[j]);
                local = better(local, (v, k, j));
            }
            local
        },
        better,
    );
    Ok(CoherenceReport {
        mu: best.0.clamp(0.0, 1.0),
        argmax_pair: (best.1, best.2),
        theoretical_bound: None,
        bound_applicable: false,
        inapplicable_reason: Some("no bound requested".into()),
    })
}

fn common_hypotheses(modulus: u64, q: u32, columns: u128) -> Option<String> {
    if !is_prime(modulus) {
        return Some(format!("M = {modulus} is not prime"));
    }
    if columns < 2 {
        return Some("index set has fewer than two columns".into());
    }
    if (modulus as u128) < 2 * q as u128 + 1 {
        return Some(format!("M >= 2q+1 violated ({modulus} < {})", 2 * q as u64 + 1));
    }
    None
}

/// `2^a·d / (√M − 2^a(d−1))`, the shared shape of both coherence bounds.
fn coherence_bound_value(modulus: u64, d: usize, a: u32) -> f64 {
    let root = (modulus as f64).sqrt();
    let pow = 2f64.powi(a as i32);
    let denom = 1.0 - pow * (d as f64 - 1.0) / root;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    pow * d as f64 / (root * denom)
}

/// Coherence bound for the tensor-product matrix on the deterministic design,
/// valid when `M` is prime and `M >= max(2q+1, (2^d(d−1))²)`.
pub fn coherence_bound_tp(modulus: u64, d: usize, q: u32) -> Bound {
    if let Some(why) = common_hypotheses(modulus, q, tp_cardinality(q, d)) {
        return Bound::Inapplicable(why);
    }
    let threshold = (2f64.powi(d as i32) * (d as f64 - 1.0)).powi(2);
    if (modulus as f64) < threshold {
        return Bound::Inapplicable(format!(
            "M >= (2^d(d-1))^2 violated ({modulus} < {threshold})"
        ));
    }
    Bound::Applicable(coherence_bound_value(modulus, d, d as u32))
}

/// Coherence bound for the total-degree matrix on the deterministic design,
/// valid when `d >= q`, `M` is prime and `M >= max(2q+1, (2^q(d−1))²)`.
pub fn coherence_bound_td(modulus: u64, d: usize, q: u32) -> Bound {
    if (d as u64) < q as u64 {
        return Bound::Inapplicable(format!("d >= q violated ({d} < {q})"));
    }
    if let Some(why) = common_hypotheses(modulus, q, td_cardinality(q, d)) {
        return Bound::Inapplicable(why);
    }
    let threshold = (2f64.powi(q as i32) * (d as f64 - 1.0)).powi(2);
    if (modulus as f64) < threshold {
        return Bound::Inapplicable(format!(
            "M >= (2^q(d-1))^2 violated ({modulus} < {threshold})"
        ));
    }
    Bound::Applicable(coherence_bound_value(modulus, d, q))
}

/// Gershgorin bound `δ_s <= (s−1)·μ`.
pub fn rip_bound_from_coherence(mu: f64, s: usize) -> f64 {
    s.saturating_sub(1) as f64 * mu
}

pub fn exact_rip_constant(a: &SensingMatrix, s: usize) -> Result<f64> {
    exact_rip_constant_with_cap(a, s, DEFAULT_SUBSET_CAP)
}

/// Exact restricted-isometry constant of order `s` by scanning column
/// subsets and taking Grammian eigenvalue extremes.
///
/// Only subsets of size exactly `min(s, N)` are visited: by eigenvalue
/// interlacing every smaller Grammian has its spectrum inside that of a
/// containing one.
pub fn exact_rip_constant_with_cap(a: &SensingMatrix, s: usize, cap: u128) -> Result<f64> {
    let n = a.cols();
    let k = s.min(n);
    if k == 0 {
        return Ok(0.0);
    }
    let count = binomial(n as u64, k as u64);
    if count > cap {
        return Err(Error::SizeLimit {
            what: "column subsets",
            cardinality: count,
            cap,
        });
    }
    let gram = a.entries().tr_mul(a.entries());
    let delta = par::map_reduce(
        count as usize,
        0.0f64,
        |rank| {
            let t = unrank_combination(n, k, rank as u128);
            let sub = DMatrix::from_fn(k, k, |i, j| gram[(t[i], t[j])]);
            let eig = SymmetricEigen::new(sub).eigenvalues;
            let hi = eig.max();
            let lo = eig.min();
            (hi - 1.0).max(1.0 - lo)
        },
        f64::max,
    );
    Ok(delta)
}

/// `σ_{s,1}(c)`: ℓ1 mass outside the `s` largest-magnitude entries.
pub fn best_s_term_error(c: &[f64], s: usize) -> f64 {
    let mut mags: Vec<f64> = c.iter().map(|x| x.abs()).collect();
    mags.sort_by(|x, y| y.total_cmp(x));
    mags.iter().skip(s).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeilCheck {
    pub magnitude: f64,
    pub bound: f64,
    pub holds: bool,
    pub degree: usize,
}

/// `|Σ_{x=1}^p exp(2πi f(x)/p)|` against `(deg f − 1)√p`, where
/// `f(x) = m_1 x + … + m_d x^d` and `coeffs = [m_1, …, m_d]`.
pub fn weil_sum_check(coeffs: &[i64], p: u64) -> Result<WeilCheck> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    let residues: Vec<u64> = coeffs
        .iter()
        .map(|&c| c.rem_euclid(p as i64) as u64)
        .collect();
    if residues.iter().all(|&r| r == 0) {
        return Err(Error::Inapplicable(format!(
            "every coefficient is divisible by p = {p}"
        )));
    }
    let degree = coeffs.iter().rposition(|&c| c != 0).map_or(0, |i| i + 1);
    let modulus = p as u128;
    let (mut re, mut im) = (0.0f64, 0.0f64);
    for x in 1..=p {
        // Horner on m_d x^{d-1} + … + m_1, then one more factor of x
        let mut acc: u128 = 0;
        for &r in residues.iter().rev() {
            acc = (acc * x as u128 + r as u128) % modulus;
        }
        acc = acc * x as u128 % modulus;
        let theta = 2.0 * std::f64::consts::PI * acc as f64 / p as f64;
        re += theta.cos();
        im += theta.sin();
    }
    let magnitude = re.hypot(im);
    let bound = (degree as f64 - 1.0) * (p as f64).sqrt();
    Ok(WeilCheck {
        magnitude,
        bound,
        holds: magnitude <= bound + 1e-9,
        degree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chebmat::assemble;
    use crate::indexsets::{enumerate_td, enumerate_tp};
    use crate::sampling::deterministic_points;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn dense(rows: usize, cols: usize, data: &[f64]) -> SensingMatrix {
        SensingMatrix::from_dense(DMatrix::from_row_slice(rows, cols, data))
    }

    fn random_normalized(m: usize, n: usize, seed: u64) -> SensingMatrix {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = crate::rng::stream(seed);
        let e = DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng));
        SensingMatrix::from_dense(e).normalize_columns().unwrap()
    }

    #[test]
    fn coherence_examples() {
        let id = SensingMatrix::from_dense(DMatrix::identity(5, 5));
        assert_eq!(mutual_incoherence(&id).unwrap().mu, 0.0);

        let twins = dense(3, 2, &[1.0, 1.0, 2.0, 2.0, -1.0, -1.0]);
        let r = mutual_incoherence(&twins).unwrap();
        assert_abs_diff_eq!(r.mu, 1.0, epsilon = 1e-15);
        assert_eq!(r.argmax_pair, (0, 1));

        assert!(mutual_incoherence(&dense(2, 1, &[1.0, 0.0])).is_err());
        assert!(matches!(
            mutual_incoherence(&dense(2, 2, &[1.0, 0.0, 1.0, 0.0])),
            Err(Error::DegenerateColumn { column: 1, .. })
        ));
    }

    #[test]
    fn coherence_fig1_left_fixture() {
        let a = assemble(&deterministic_points(97, 2).unwrap(), &enumerate_tp(9, 2).unwrap()).unwrap();
        let r = mutual_incoherence(&a).unwrap();
        // brute-force oracle: explicit normalized Gram matrix
        let norms = a.column_norms();
        let g = a.entries().tr_mul(a.entries());
        let mut oracle: f64 = 0.0;
        for k in 0..a.cols() {
            for j in 0..a.cols() {
                if k != j {
                    oracle = oracle.max(g[(k, j)].abs() / (norms[k] * norms[j]));
                }
            }
        }
        assert_abs_diff_eq!(r.mu, oracle, epsilon = 1e-14);
        let (k, j) = r.argmax_pair;
        assert_abs_diff_eq!(g[(k, j)].abs() / (norms[k] * norms[j]), r.mu, epsilon = 1e-15);
        // frozen regression value
        assert_abs_diff_eq!(r.mu, FIG1_LEFT_MU, epsilon = 1e-12);
    }

    // independent numpy computation (arccos form of T_n)
    const FIG1_LEFT_MU: f64 = 0.451_661_222_199_203_6;

    #[test]
    fn coherence_is_scale_invariant() {
        let a = random_normalized(6, 9, 3);
        let mut e = a.entries().clone();
        e.column_mut(4).scale_mut(7.3);
        let b = SensingMatrix::from_dense(e);
        let (ma, mb) = (mutual_incoherence(&a).unwrap().mu, mutual_incoherence(&b).unwrap().mu);
        assert!((ma - mb).abs() <= 1e-12);
    }

    #[test]
    fn tp_bound_examples() {
        let v = coherence_bound_tp(17, 2, 2).value().unwrap();
        let expected = 8.0 / (17f64.sqrt() * (1.0 - 4.0 / 17f64.sqrt()));
        assert_abs_diff_eq!(v, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 8.0 / (17f64.sqrt() - 4.0), epsilon = 1e-9);
        let a = assemble(&deterministic_points(17, 2).unwrap(), &enumerate_tp(2, 2).unwrap()).unwrap();
        assert!(mutual_incoherence(&a).unwrap().mu <= v + 1e-9);

        match coherence_bound_tp(13, 2, 2) {
            Bound::Inapplicable(why) => assert!(why.contains("(2^d(d-1))^2")),
            b => panic!("unexpected {b:?}"),
        }
        assert_abs_diff_eq!(coherence_bound_tp(101, 1, 5).value().unwrap(), 2.0 / 101f64.sqrt(), epsilon = 1e-15);
        assert!(!coherence_bound_tp(91, 1, 5).is_applicable());
        assert!(!coherence_bound_tp(7, 1, 5).is_applicable());
    }

    #[test]
    fn td_bound_examples() {
        assert!(!coherence_bound_td(5179, 10, 3).is_applicable());
        assert!(is_prime(5189));
        let v = coherence_bound_td(5189, 10, 3).value().unwrap();
        let a = assemble(&deterministic_points(5189, 10).unwrap(), &enumerate_td(3, 10).unwrap()).unwrap();
        let r = mutual_incoherence(&a).unwrap().with_bound(&coherence_bound_td(5189, 10, 3));
        assert!(r.bound_applicable);
        assert!(r.mu <= v + 1e-9, "mu = {}, bound = {v}", r.mu);

        match coherence_bound_td(101, 2, 3) {
            Bound::Inapplicable(why) => assert!(why.contains("d >= q")),
            b => panic!("unexpected {b:?}"),
        }
        match coherence_bound_td(101, 3, 0) {
            Bound::Inapplicable(why) => assert!(why.contains("fewer than two")),
            b => panic!("unexpected {b:?}"),
        }
    }

    #[test]
    fn rip_bound_examples() {
        assert_abs_diff_eq!(rip_bound_from_coherence(0.1, 3), 0.2);
        assert_eq!(rip_bound_from_coherence(0.77, 1), 0.0);
        assert_eq!(rip_bound_from_coherence(0.0, 10), 0.0);
    }

    #[test]
    fn exact_rip_examples() {
        let id = SensingMatrix::from_dense(DMatrix::identity(6, 6));
        for s in 0..=6 {
            assert_abs_diff_eq!(exact_rip_constant(&id, s).unwrap(), 0.0, epsilon = 1e-15);
        }
        let a = random_normalized(5, 8, 21);
        assert!(exact_rip_constant(&a, 1).unwrap() <= 1e-14);
        let mu = mutual_incoherence(&a).unwrap().mu;
        assert_abs_diff_eq!(exact_rip_constant(&a, 2).unwrap(), mu, epsilon = 1e-10);
        for s in 3..=4 {
            assert!(exact_rip_constant(&a, s).unwrap() <= rip_bound_from_coherence(mu, s) + 1e-9);
        }
        let wide = random_normalized(3, 60, 1);
        assert!(matches!(
            exact_rip_constant_with_cap(&wide, 5, 1000),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn best_term_examples() {
        let c = [3.0, -1.0, 0.5];
        assert_abs_diff_eq!(best_s_term_error(&c, 1), 1.5);
        assert_abs_diff_eq!(best_s_term_error(&c, 2), 0.5);
        assert_eq!(best_s_term_error(&c, 3), 0.0);
        assert_eq!(best_s_term_error(&c, 0), 4.5);
    }

    #[test]
    fn weil_examples() {
        let w = weil_sum_check(&[1], 5).unwrap();
        assert!(w.magnitude < 1e-12);
        assert_eq!(w.bound, 0.0);
        assert!(w.holds);

        let w = weil_sum_check(&[0, 1], 5).unwrap();
        assert_abs_diff_eq!(w.magnitude, 5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(w.bound, 5f64.sqrt(), epsilon = 1e-15);
        assert!(w.holds);

        let w = weil_sum_check(&[1, 0, 1], 7).unwrap();
        assert!(w.magnitude <= 2.0 * 7f64.sqrt());
        assert!(w.holds);

        assert!(matches!(weil_sum_check(&[5, 10], 5), Err(Error::Inapplicable(_))));
        assert!(matches!(weil_sum_check(&[1], 9), Err(Error::NotPrime(9))));
        // negative coefficients reduce like their residues
        let a = weil_sum_check(&[-1, 3], 11).unwrap();
        let b = weil_sum_check(&[10, 3], 11).unwrap();
        assert_abs_diff_eq!(a.magnitude, b.magnitude, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn best_term_monotone(c in prop::collection::vec(-10.0f64..10.0, 0..12)) {
            let nnz = c.iter().filter(|x| **x != 0.0).count();
            let mut prev = f64::INFINITY;
            for s in 0..=c.len() + 1 {
                let e = best_s_term_error(&c, s);
                prop_assert!(e <= prev + 1e-12);
                prop_assert_eq!(e == 0.0, s >= nnz);
                prev = e;
            }
        }

        #[test]
        fn coherence_in_unit_interval(seed in any::<u64>()) {
            let a = random_normalized(4, 7, seed);
            let r = mutual_incoherence(&a).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.mu));
            prop_assert!(r.argmax_pair.0 < r.argmax_pair.1);
        }
    }
}
