//! Tensorized Chebyshev evaluation and interpolation-matrix assembly.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::indexsets::{MultiIndex, MultiIndexSet};
use crate::par;
use crate::sampling::{self, format_f64, parse_f64, PointSet, Provenance};

/// Default upper bound on `rows * cols` for assembled matrices.
pub const DEFAULT_ENTRY_CAP: u128 = 100_000_000;

/// Coordinates may overshoot `[-1, 1]` by this much before being rejected.
const DOMAIN_SLACK: f64 = 1e-12;

/// Columns with norm below this are treated as zero.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// `T_k(x)` by the three-term recurrence.
pub fn chebyshev_1d(k: u32, x: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for _ in 1..k {
                let next = 2.0 * x * cur - prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// `T_0(x), …, T_max(x)`.
fn chebyshev_table(max: u32, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max as usize + 1);
    out.push(1.0);
    if max >= 1 {
        out.push(x);
    }
    for k in 2..=max as usize {
        let next = 2.0 * x * out[k - 1] - out[k - 2];
        out.push(next);
    }
    out
}

fn clamp_coordinate(x: f64) -> Result<f64> {
    if !(-1.0 - DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&x) {
        return Err(Error::Domain { value: x });
    }
    Ok(x.clamp(-1.0, 1.0))
}

/// `Φ_n(x) = Π_t T_{n_t}(x_t)`.
pub fn cheb_eval(n: &MultiIndex, x: &[f64]) -> Result<f64> {
    if n.dim() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: n.dim(),
            got: x.len(),
        });
    }
    let mut acc = 1.0;
    for (&k, &xt) in n.entries().iter().zip(x) {
        acc *= chebyshev_1d(k, clamp_coordinate(xt)?);
    }
    Ok(acc)
}

/// A dense interpolation matrix with its column labels and the diagonal
/// scaling applied so far (`A_current = A_original · diag(column_scaling)`).
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    entries: DMatrix<f64>,
    column_scaling: Vec<f64>,
    labels: Vec<MultiIndex>,
    points: Option<PointSet>,
}

impl SensingMatrix {
    /// Wraps a raw matrix; columns are labelled `0, 1, …` as 1-D indices.
    pub fn from_dense(entries: DMatrix<f64>) -> Self {
        let labels = (0..entries.ncols() as u32)
            .map(|k| MultiIndex::new(vec![k]).expect("non-empty"))
            .collect();
        Self::with_labels(entries, labels).expect("label count matches")
    }

    pub fn with_labels(entries: DMatrix<f64>, labels: Vec<MultiIndex>) -> Result<Self> {
        if labels.len() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.ncols(),
                got: labels.len(),
            });
        }
        Ok(SensingMatrix {
            column_scaling: vec![1.0; entries.ncols()],
            entries,
            labels,
            points: None,
        })
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn column_scaling(&self) -> &[f64] {
        &self.column_scaling
    }

    pub fn labels(&self) -> &[MultiIndex] {
        &self.labels
    }

    pub fn points(&self) -> Option<&PointSet> {
        self.points.as_ref()
    }

    pub fn column_norms(&self) -> Vec<f64> {
        self.entries.column_iter().map(|c| c.norm()).collect()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        self.column_norms().iter().all(|n| (n - 1.0).abs() <= tol)
    }

    /// Rescales every column to unit ℓ2 norm and records the scaling.
    pub fn normalize_columns(&self) -> Result<SensingMatrix> {
        let norms = self.column_norms();
        if let Some((k, &norm)) = norms
            .iter()
            .enumerate()
            .find(|(_, &n)| !(n >= DEGENERATE_NORM) || !n.is_finite())
        {
            return Err(Error::DegenerateColumn {
                column: k,
                label: self.labels[k].to_string(),
                norm,
            });
        }
        let mut entries = self.entries.clone();
        for (mut col, &n) in entries.column_iter_mut().zip(&norms) {
            col /= n;
        }
        let column_scaling = self
            .column_scaling
            .iter()
            .zip(&norms)
            .map(|(s, n)| s / n)
            .collect();
        Ok(SensingMatrix {
            entries,
            column_scaling,
            labels: self.labels.clone(),
            points: self.points.clone(),
        })
    }

    /// Maps coefficients of this matrix back to the unscaled basis.
    pub fn to_original_coefficients(&self, c: &[f64]) -> Vec<f64> {
        c.iter()
            .zip(&self.column_scaling)
            .map(|(x, s)| x * s)
            .collect()
    }

    /// Maps unscaled-basis coefficients to coefficients of this matrix.
    pub fn from_original_coefficients(&self, c: &[f64]) -> Vec<f64> {
        c.iter()
            .zip(&self.column_scaling)
            .map(|(x, s)| x / s)
            .collect()
    }

    /// Header of `n1|…|nd` labels, then one row per matrix row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.labels.iter().map(|l| l.to_string()))?;
        for row in self.entries.row_iter() {
            w.write_record(row.iter().map(|&x| format_f64(x)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<SensingMatrix> {
        let mut r = csv::Reader::from_reader(input);
        let labels = r
            .headers()?
            .iter()
            .map(|h| h.parse::<MultiIndex>())
            .collect::<Result<Vec<_>>>()?;
        let ncols = labels.len();
        let mut data = Vec::new();
        let mut nrows = 0;
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != ncols {
                return Err(Error::DimensionMismatch {
                    expected: ncols,
                    got: rec.len(),
                });
            }
            for f in rec.iter() {
                data.push(parse_f64(f)?);
            }
            nrows += 1;
        }
        SensingMatrix::with_labels(DMatrix::from_row_slice(nrows, ncols, &data), labels)
    }
}

/// Assembles the unnormalized matrix `[Φ_n(x_j)]` with the default entry cap.
pub fn assemble(points: &PointSet, index_set: &MultiIndexSet) -> Result<SensingMatrix> {
    assemble_with_cap(points, index_set, DEFAULT_ENTRY_CAP)
}

pub fn assemble_with_cap(
    points: &PointSet,
    index_set: &MultiIndexSet,
    cap: u128,
) -> Result<SensingMatrix> {
    if points.dim() != index_set.dim() {
        return Err(Error::DimensionMismatch {
            expected: index_set.dim(),
            got: points.dim(),
        });
    }
    let (m, n) = (points.len(), index_set.len());
    let size = m as u128 * n as u128;
    if size > cap {
        return Err(Error::SizeLimit {
            what: "matrix entries",
            cardinality: size,
            cap,
        });
    }

    let rows: Vec<Vec<f64>> = match points.provenance() {
        Provenance::Deterministic { modulus } => {
            let table = sampling::cosine_table(modulus);
            par::map_collect(m, |j| {
                deterministic_row(j as u64, modulus, &table, index_set, points.dim())
            })
        }
        _ => {
            let max_deg = index_set.iter().map(|k| k.max_degree()).max().unwrap_or(0);
            let rows = par::map_collect(m, |j| -> Result<Vec<f64>> {
                let tables = points
                    .point(j)
                    .iter()
                    .map(|&x| Ok(chebyshev_table(max_deg, clamp_coordinate(x)?)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(index_set
                    .iter()
                    .map(|k| {
                        k.entries()
                            .iter()
                            .zip(&tables)
                            .map(|(&deg, tab)| tab[deg as usize])
                            .product()
                    })
                    .collect())
            });
            rows.into_iter().collect::<Result<Vec<_>>>()?
        }
    };

    let entries = DMatrix::from_fn(m, n, |j, k| rows[j][k]);
    Ok(SensingMatrix {
        column_scaling: vec![1.0; n],
        entries,
        labels: index_set.indices().to_vec(),
        points: Some(points.clone()),
    })
}

/// Row `j` of the deterministic design: `Π_t cos(2π (n_t · j^t mod M) / M)`,
/// with every phase reduced exactly before the table lookup.
pub(crate) fn deterministic_row(
    j: u64,
    modulus: u64,
    table: &[f64],
    index_set: &MultiIndexSet,
    d: usize,
) -> Vec<f64> {
    let residues = sampling::power_residues(j, d, modulus);
    index_set
        .iter()
        .map(|k| {
            k.entries()
                .iter()
                .zip(&residues)
                .map(|(&deg, &r)| {
                    let phase = (deg as u128 * r as u128 % modulus as u128) as usize;
                    table[phase]
                })
                .product()
        })
        .collect()
}

/// Lower bound `M/2^{e+1} - (d-1)√M/2` on deterministic column norms²,
/// where `e` is `d` for tensor-product sets.
pub fn column_norm_lower_bound(modulus: u64, d: usize, exponent: u32) -> f64 {
    let m = modulus as f64;
    m / 2f64.powi(exponent as i32 + 1) - (d as f64 - 1.0) * m.sqrt() / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indexsets::{enumerate_td, enumerate_tp};
    use crate::sampling::{deterministic_points, random_points};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec()).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(cheb_eval(&mi(&[0, 0, 0]), &[0.3, -0.9, 1.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(cheb_eval(&mi(&[1]), &[0.3]).unwrap(), 0.3);
        let x = [(PI / 5.0).cos(), (PI / 3.0).cos()];
        let expected = (2.0 * PI / 5.0).cos() * (PI / 3.0).cos();
        assert_abs_diff_eq!(cheb_eval(&mi(&[2, 1]), &x).unwrap(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, 0.154_508_497_187_473_7, epsilon = 1e-15);
    }

    #[test]
    fn eval_domain_handling() {
        assert_eq!(cheb_eval(&mi(&[3]), &[1.0 + 1e-13]).unwrap(), 1.0);
        assert!(matches!(
            cheb_eval(&mi(&[3]), &[1.0 + 1e-9]),
            Err(Error::Domain { .. })
        ));
        assert!(cheb_eval(&mi(&[3, 1]), &[0.5]).is_err());
    }

    #[test]
    fn recurrence_matches_cosine_form() {
        for k in 0..40 {
            for i in 0..=50 {
                let theta = PI * i as f64 / 50.0;
                let x = theta.cos();
                assert_abs_diff_eq!(chebyshev_1d(k, x), (k as f64 * theta).cos(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn assemble_small_deterministic() {
        let a = assemble(&deterministic_points(5, 1).unwrap(), &enumerate_tp(1, 1).unwrap()).unwrap();
        assert_eq!((a.rows(), a.cols()), (3, 2));
        let c = a.entries();
        for j in 0..3 {
            assert_eq!(c[(j, 0)], 1.0);
        }
        assert_abs_diff_eq!(c[(1, 1)], (2.0 * PI / 5.0).cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(c[(2, 1)], (4.0 * PI / 5.0).cos(), epsilon = 1e-15);
    }

    #[test]
    fn zero_index_gives_ones_column() {
        let pts = random_points(7, 3, 1).unwrap();
        let a = assemble(&pts, &enumerate_tp(0, 3).unwrap()).unwrap();
        assert_eq!(a.cols(), 1);
        assert!(a.entries().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn two_evaluation_routes_agree() {
        let pts = deterministic_points(37, 3).unwrap();
        let set = enumerate_tp(2, 3).unwrap();
        let a = assemble(&pts, &set).unwrap();
        for j in 0..pts.len() {
            for (k, n) in set.iter().enumerate() {
                let direct = cheb_eval(n, pts.point(j)).unwrap();
                assert!((a.entries()[(j, k)] - direct).abs() <= 1e-12);
            }
        }
        // the generic recurrence path on the same coordinates
        let rows: Vec<Vec<f64>> = pts.iter().map(|p| p.to_vec()).collect();
        let external = PointSet::from_rows(3, &rows).unwrap();
        let b = assemble(&external, &set).unwrap();
        assert!((a.entries() - b.entries()).amax() <= 1e-12);
    }

    #[test]
    fn entries_bounded_by_one() {
        let a = assemble(&deterministic_points(61, 4).unwrap(), &enumerate_td(3, 4).unwrap()).unwrap();
        assert!(a.entries().iter().all(|x| x.abs() <= 1.0));
        let b = assemble(&random_points(20, 4, 3).unwrap(), &enumerate_td(5, 4).unwrap()).unwrap();
        assert!(b.entries().iter().all(|x| x.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn full_residue_rows_mirror() {
        for modulus in [3u64, 5, 7, 11, 13, 31, 53, 97, 101] {
            let set = enumerate_tp(2, 3).unwrap();
            let table = sampling::cosine_table(modulus);
            let rows: Vec<_> = (0..modulus)
                .map(|j| deterministic_row(j, modulus, &table, &set, 3))
                .collect();
            for j in 1..modulus as usize {
                let mirror = modulus as usize - j;
                for (x, y) in rows[j].iter().zip(&rows[mirror]) {
                    assert!((x - y).abs() <= 1e-12, "M={modulus} j={j}");
                }
            }
        }
    }

    #[test]
    fn dimension_and_size_checks() {
        let pts = random_points(3, 2, 0).unwrap();
        assert!(matches!(
            assemble(&pts, &enumerate_tp(1, 3).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            assemble_with_cap(&pts, &enumerate_tp(1, 2).unwrap(), 11),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn normalize_examples() {
        let a = SensingMatrix::from_dense(DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 4.0, 2.0]));
        let n = a.normalize_columns().unwrap();
        let e = n.entries();
        assert_abs_diff_eq!(e[(0, 0)], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(e[(1, 0)], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(e[(0, 1)], 0.0);
        assert_abs_diff_eq!(e[(1, 1)], 1.0);
        assert_abs_diff_eq!(n.column_scaling()[0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(n.column_scaling()[1], 0.5, epsilon = 1e-15);

        let id = SensingMatrix::from_dense(DMatrix::identity(3, 3));
        let n = id.normalize_columns().unwrap();
        assert_eq!(n.entries(), id.entries());
        assert_eq!(n.column_scaling(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn normalize_is_idempotent_and_reports_degenerate_columns() {
        let a = assemble(&random_points(9, 2, 4).unwrap(), &enumerate_tp(3, 2).unwrap()).unwrap();
        let n1 = a.normalize_columns().unwrap();
        let n2 = n1.normalize_columns().unwrap();
        assert!((n1.entries() - n2.entries()).amax() <= 1e-12);
        assert!(n2.column_norms().iter().all(|x| (x - 1.0).abs() <= 1e-12));
        assert!(n1.column_scaling().iter().all(|&s| s > 0.0 && s.is_finite()));

        let z = SensingMatrix::with_labels(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]),
            vec![mi(&[0, 0]), mi(&[2, 1])],
        )
        .unwrap();
        match z.normalize_columns() {
            Err(Error::DegenerateColumn { column, label, .. }) => {
                assert_eq!(column, 1);
                assert_eq!(label, "2|1");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn coefficient_mapping_preserves_samples() {
        let a = assemble(&random_points(6, 2, 9).unwrap(), &enumerate_td(2, 2).unwrap()).unwrap();
        let n = a.normalize_columns().unwrap();
        let c_norm = nalgebra::DVector::from_fn(n.cols(), |k, _| k as f64 - 2.5);
        let c_orig = nalgebra::DVector::from_vec(n.to_original_coefficients(c_norm.as_slice()));
        assert!((n.entries() * &c_norm - a.entries() * &c_orig).amax() < 1e-12);
        let back = n.from_original_coefficients(c_orig.as_slice());
        assert!(back.iter().zip(c_norm.iter()).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn column_norm_bound_fig1_left() {
        let a = assemble(&deterministic_points(97, 2).unwrap(), &enumerate_tp(9, 2).unwrap()).unwrap();
        let bound = column_norm_lower_bound(97, 2, 2);
        assert_abs_diff_eq!(bound, 97.0 / 8.0 - 97f64.sqrt() / 2.0, epsilon = 1e-12);
        assert!(a.column_norms().iter().all(|n| n * n >= bound));
    }

    #[test]
    fn matrix_csv_round_trip() {
        let a = assemble(&deterministic_points(11, 2).unwrap(), &enumerate_td(2, 2).unwrap()).unwrap();
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("0|0,0|1,0|2,1|0,1|1,2|0\n"));
        let b = SensingMatrix::read_csv(buf.as_slice()).unwrap();
        assert_eq!(b.entries(), a.entries());
        assert_eq!(b.labels(), a.labels());
    }
}
