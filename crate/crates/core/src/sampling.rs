//! Interpolation point sets: the deterministic power-map cosine design for a
//! prime modulus, and uniform random points on the cube.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Where a point set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    /// `x_j = cos(2π (j, j², …, j^d) / M)` for `j = 0..=M/2`.
    Deterministic { modulus: u64 },
    /// i.i.d. uniform on `[-1, 1]^d` from a ChaCha8 stream with this seed.
    Random { seed: u64 },
    /// Loaded from a file.
    External,
}

/// `m` points in `[-1, 1]^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    d: usize,
    coords: Vec<f64>,
    provenance: Provenance,
}

impl PointSet {
    /// Wraps externally supplied points. Every coordinate must lie in `[-1, 1]`.
    pub fn from_rows(d: usize, rows: &[Vec<f64>]) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension d must be >= 1".into()));
        }
        let mut coords = Vec::with_capacity(rows.len() * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            for &x in row {
                if !(-1.0..=1.0).contains(&x) {
                    return Err(Error::Domain { value: x });
                }
            }
            coords.extend_from_slice(row);
        }
        Ok(PointSet {
            d,
            coords,
            provenance: Provenance::External,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.coords[j * self.d..(j + 1) * self.d]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.d)
    }

    /// Writes `x1,…,xd` then one row per point, 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record((1..=self.d).map(|t| format!("x{t}")))?;
        for p in self.iter() {
            w.write_record(p.iter().map(|&x| format_f64(x)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let d = r.headers()?.len();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            rows.push(
                rec.iter()
                    .map(parse_f64)
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        PointSet::from_rows(d, &rows)
    }
}

/// Decimal rendering with 17 significant digits; round-trips every f64.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("not a number: {s:?}")))
}

/// `base^exp mod modulus` by square-and-multiply with exact 128-bit products.
pub fn pow_mod(base: u64, mut exp: u64, modulus: u64) -> u64 {
    if modulus == 1 {
        return 0;
    }
    let m = modulus as u128;
    let mut b = base as u128 % m;
    let mut acc: u128 = 1;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        exp >>= 1;
    }
    acc as u64
}

/// Deterministic Miller–Rabin; exact for all `n < 2^64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in SMALL {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d % 2 == 0 {
        d /= 2;
        r += 1;
    }
    'witness: for a in SMALL {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = ((x as u128 * x as u128) % n as u128) as u64;
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Point count `floor(M/2) + 1` of the deterministic design.
pub fn point_count_for_modulus(modulus: u64) -> u64 {
    modulus / 2 + 1
}

/// The prime `M = 2m - 1` whose deterministic design has exactly `m` points.
pub fn modulus_for_point_count(m: u64) -> Result<u64> {
    if m < 2 {
        return Err(Error::InvalidArgument("point count m must be >= 2".into()));
    }
    let candidate = 2 * m - 1;
    if is_prime(candidate) {
        return Ok(candidate);
    }
    let below = (2..m).rev().find(|&k| is_prime(2 * k - 1));
    let above = (m + 1..).find(|&k| is_prime(2 * k - 1)).expect("primes are unbounded");
    Err(Error::NoModulus {
        m,
        candidate,
        below,
        above,
    })
}

/// `cos(2π r / M)` for every residue `r`.
pub(crate) fn cosine_table(modulus: u64) -> Vec<f64> {
    (0..modulus)
        .map(|r| (2.0 * PI * r as f64 / modulus as f64).cos())
        .collect()
}

/// Residues `j^t mod M` for `t = 1..=d`.
pub(crate) fn power_residues(j: u64, d: usize, modulus: u64) -> Vec<u64> {
    let mut out = Vec::with_capacity(d);
    let mut acc = 1u64 % modulus;
    for _ in 0..d {
        acc = ((acc as u128 * j as u128) % modulus as u128) as u64;
        out.push(acc);
    }
    out
}

/// The deterministic design for prime modulus `M` in dimension `d`.
pub fn deterministic_points(modulus: u64, d: usize) -> Result<PointSet> {
    if !is_prime(modulus) {
        return Err(Error::NotPrime(modulus));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("dimension d must be >= 1".into()));
    }
    let table = cosine_table(modulus);
    let m = point_count_for_modulus(modulus);
    let mut coords = Vec::with_capacity(m as usize * d);
    for j in 0..m {
        coords.extend(power_residues(j, d, modulus).into_iter().map(|r| table[r as usize]));
    }
    Ok(PointSet {
        d,
        coords,
        provenance: Provenance::Deterministic { modulus },
    })
}

/// `m` i.i.d. uniform points on `[-1, 1]^d` from a ChaCha8 stream.
pub fn random_points(m: usize, d: usize, seed: u64) -> Result<PointSet> {
    if m == 0 || d == 0 {
        return Err(Error::InvalidArgument("m and d must be >= 1".into()));
    }
    let mut rng = rng::stream(seed);
    let coords = (0..m * d).map(|_| rng.random_range(-1.0..=1.0)).collect();
    Ok(PointSet {
        d,
        coords,
        provenance: Provenance::Random { seed },
    })
}

/// Checks `cos(2π j^k / M) == cos(2π (M-j)^k / M)` for `k = 1..=d`,
/// `j = 0..=M/2`, with exact modular reduction before the cosine.
pub fn verify_cosine_symmetry(modulus: u64, d: usize) -> bool {
    let table = cosine_table(modulus);
    (0..=modulus / 2).all(|j| {
        let mirror = (modulus - j) % modulus;
        power_residues(j, d, modulus)
            .into_iter()
            .zip(power_residues(mirror, d, modulus))
            .all(|(a, b)| (table[a as usize] - table[b as usize]).abs() <= 1e-12)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_bigint::BigUint;
    use proptest::prelude::*;

    fn trial_division(n: u64) -> bool {
        n >= 2 && (2..).take_while(|k| k * k <= n).all(|k| n % k != 0)
    }

    #[test]
    fn primality_examples() {
        assert!(is_prime(97));
        assert!(!is_prime(91));
        assert!(!is_prime(1));
        assert!(is_prime(2));
        assert!(is_prime((1u64 << 61) - 1));
        assert!(!is_prime(3_215_031_751)); // strong pseudoprime to bases 2, 3, 5, 7
        assert!(is_prime(9_223_372_036_854_775_783)); // largest prime below 2^63
    }

    #[test]
    fn primality_matches_trial_division() {
        for n in 0..20_000 {
            assert_eq!(is_prime(n), trial_division(n), "n = {n}");
        }
    }

    #[test]
    fn modulus_inversion() {
        assert_eq!(modulus_for_point_count(49).unwrap(), 97);
        assert_eq!(modulus_for_point_count(69).unwrap(), 137);
        assert_eq!(modulus_for_point_count(2).unwrap(), 3);
        match modulus_for_point_count(50) {
            Err(Error::NoModulus {
                candidate,
                below,
                above,
                ..
            }) => {
                assert_eq!(candidate, 99);
                assert_eq!(below, Some(49));
                assert_eq!(above, 51);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(modulus_for_point_count(1).is_err());
    }

    #[test]
    fn deterministic_small_cases() {
        let p = deterministic_points(5, 2).unwrap();
        assert_eq!(p.len(), 3);
        let c1 = (2.0 * PI / 5.0).cos();
        let c2 = (4.0 * PI / 5.0).cos();
        let c4 = (8.0 * PI / 5.0).cos();
        assert_eq!(p.point(0), &[1.0, 1.0]);
        assert_abs_diff_eq!(p.point(1)[0], c1, epsilon = 1e-15);
        assert_abs_diff_eq!(p.point(1)[1], c1, epsilon = 1e-15);
        assert_abs_diff_eq!(p.point(2)[0], c2, epsilon = 1e-15);
        assert_abs_diff_eq!(p.point(2)[1], c4, epsilon = 1e-15);
        assert_abs_diff_eq!(p.point(1)[0], 0.309_016_994_374_947_4, epsilon = 1e-15);
        assert_abs_diff_eq!(p.point(2)[0], -0.809_016_994_374_947_5, epsilon = 1e-15);

        let p = deterministic_points(3, 1).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.point(0), &[1.0]);
        assert_abs_diff_eq!(p.point(1)[0], -0.5, epsilon = 1e-15);

        let p = deterministic_points(97, 6).unwrap();
        assert_eq!(p.len(), 49);
        assert!(p.point(0).iter().all(|&x| x == 1.0));
        assert_eq!(p, deterministic_points(97, 6).unwrap());
        assert_eq!(p.provenance(), Provenance::Deterministic { modulus: 97 });
    }

    #[test]
    fn deterministic_rejects_composite_modulus() {
        assert_eq!(deterministic_points(91, 2), Err(Error::NotPrime(91)));
    }

    #[test]
    fn random_points_contract() {
        let a = random_points(4, 2, 11).unwrap();
        let b = random_points(4, 2, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_points(4, 2, 12).unwrap());

        let one = random_points(1, 3, 5).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one.point(0).iter().all(|x| (-1.0..=1.0).contains(x)));

        let big = random_points(100_000, 1, 2024).unwrap();
        let mean = big.iter().map(|p| p[0]).sum::<f64>() / big.len() as f64;
        assert!(mean.abs() < 0.02, "mean = {mean}");
    }

    #[test]
    fn cosine_symmetry_examples() {
        assert!(verify_cosine_symmetry(97, 4));
        assert!(verify_cosine_symmetry(5, 3));
        assert!(verify_cosine_symmetry(7, 1));
    }

    #[test]
    fn csv_round_trip() {
        let p = deterministic_points(13, 3).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x1,x2,x3\n"));
        assert_eq!(text.lines().count(), 8);
        let back = PointSet::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), p.len());
        assert!(back.iter().zip(p.iter()).all(|(a, b)| a == b));
    }

    proptest! {
        #[test]
        fn pow_mod_matches_bigint(j in 0u64..100_000, t in 0u64..40, m in 2u64..1_000_000) {
            let expected = BigUint::from(j).modpow(&BigUint::from(t), &BigUint::from(m));
            prop_assert_eq!(BigUint::from(pow_mod(j, t, m)), expected);
            let residues = power_residues(j, t as usize, m);
            for (k, r) in residues.iter().enumerate() {
                let e = BigUint::from(j).modpow(&BigUint::from(k as u64 + 1), &BigUint::from(m));
                prop_assert_eq!(BigUint::from(*r), e);
            }
        }
    }
}
