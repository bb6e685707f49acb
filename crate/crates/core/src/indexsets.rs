//! Tensor-product and total-degree multi-index sets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subsets::binomial;

/// Default upper bound on the number of enumerated indices.
pub const DEFAULT_INDEX_CAP: u128 = 10_000_000;

/// A vector of per-coordinate polynomial degrees.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument(
                "multi-index must have at least one entry".into(),
            ));
        }
        Ok(MultiIndex(entries))
    }

    pub fn zero(d: usize) -> Self {
        MultiIndex(vec![0; d.max(1)])
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Total degree `|n|`.
    pub fn total_degree(&self) -> u64 {
        self.0.iter().map(|&e| e as u64).sum()
    }

    pub fn max_degree(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }
}

/// `n1|n2|...|nd`, the column-label format used in matrix CSV files.
impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl FromStr for MultiIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let entries = s
            .trim()
            .split('|')
            .map(|t| {
                t.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::Parse(format!("bad multi-index entry {t:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        MultiIndex::new(entries)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    /// `max_j n_j <= q`
    Tp,
    /// `|n| <= q`
    Td,
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpaceKind::Tp => "tp",
            SpaceKind::Td => "td",
        })
    }
}

/// An enumerated index set in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiIndexSet {
    kind: SpaceKind,
    q: u32,
    d: usize,
    indices: Vec<MultiIndex>,
}

impl MultiIndexSet {
    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn degree(&self) -> u32 {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MultiIndex> {
        self.indices.iter()
    }

    /// Membership by the defining inequality, without scanning.
    pub fn contains(&self, n: &MultiIndex) -> Result<bool> {
        if n.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: n.dim(),
            });
        }
        Ok(match self.kind {
            SpaceKind::Tp => n.max_degree() <= self.q,
            SpaceKind::Td => n.total_degree() <= self.q as u64,
        })
    }

    /// Position of `n` in the enumeration, if present.
    pub fn position(&self, n: &MultiIndex) -> Option<usize> {
        self.indices.binary_search(n).ok()
    }
}

/// `(q+1)^d`, saturating.
pub fn tp_cardinality(q: u32, d: usize) -> u128 {
    let base = q as u128 + 1;
    let mut acc: u128 = 1;
    for _ in 0..d {
        acc = match acc.checked_mul(base) {
            Some(v) => v,
            None => return u128::MAX,
        };
    }
    acc
}

/// `binom(q+d, d)`, saturating.
pub fn td_cardinality(q: u32, d: usize) -> u128 {
    binomial(q as u64 + d as u64, d as u64)
}

pub fn enumerate(kind: SpaceKind, q: u32, d: usize) -> Result<MultiIndexSet> {
    enumerate_with_cap(kind, q, d, DEFAULT_INDEX_CAP)
}

pub fn enumerate_tp(q: u32, d: usize) -> Result<MultiIndexSet> {
    enumerate(SpaceKind::Tp, q, d)
}

pub fn enumerate_td(q: u32, d: usize) -> Result<MultiIndexSet> {
    enumerate(SpaceKind::Td, q, d)
}

pub fn enumerate_with_cap(kind: SpaceKind, q: u32, d: usize, cap: u128) -> Result<MultiIndexSet> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension d must be >= 1".into()));
    }
    let cardinality = match kind {
        SpaceKind::Tp => tp_cardinality(q, d),
        SpaceKind::Td => td_cardinality(q, d),
    };
    if cardinality > cap {
        return Err(Error::SizeLimit {
            what: "multi-index set",
            cardinality,
            cap,
        });
    }

    let mut indices = Vec::with_capacity(cardinality as usize);
    let mut cur = vec![0u32; d];
    // running prefix sums are cheap to recompute at these sizes
    loop {
        indices.push(MultiIndex(cur.clone()));
        // rightmost position that can still be incremented
        let mut advanced = false;
        for pos in (0..d).rev() {
            let can = match kind {
                SpaceKind::Tp => cur[pos] < q,
                SpaceKind::Td => {
                    let prefix: u64 = cur[..=pos].iter().map(|&e| e as u64).sum();
                    prefix < q as u64
                }
            };
            if can {
                cur[pos] += 1;
                cur[pos + 1..].iter_mut().for_each(|e| *e = 0);
                advanced = true;
                break;
            }
        }
        if !advanced {
            break;
        }
    }
    debug_assert_eq!(indices.len() as u128, cardinality);
    Ok(MultiIndexSet {
        kind,
        q,
        d,
        indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec()).unwrap()
    }

    #[test]
    fn figure_configurations() {
        assert_eq!(enumerate_tp(9, 2).unwrap().len(), 100);
        assert_eq!(enumerate_tp(6, 3).unwrap().len(), 343);
        assert_eq!(enumerate_td(3, 10).unwrap().len(), 286);
        assert_eq!(enumerate_td(2, 30).unwrap().len(), 496);
    }

    #[test]
    fn trivial_sets() {
        let s = enumerate_tp(0, 3).unwrap();
        assert_eq!(s.indices(), &[mi(&[0, 0, 0])]);
        let s = enumerate_td(1, 1).unwrap();
        assert_eq!(s.indices(), &[mi(&[0]), mi(&[1])]);
    }

    #[test]
    fn lexicographic_order() {
        let s = enumerate_td(2, 2).unwrap();
        let got: Vec<_> = s.iter().map(|n| n.entries().to_vec()).collect();
        assert_eq!(
            got,
            vec![
                vec![0, 0],
                vec![0, 1],
                vec![0, 2],
                vec![1, 0],
                vec![1, 1],
                vec![2, 0]
            ]
        );
    }

    #[test]
    fn contains_examples() {
        let td = enumerate_td(2, 3).unwrap();
        let tp = enumerate_tp(2, 3).unwrap();
        assert!(!td.contains(&mi(&[1, 1, 1])).unwrap());
        assert!(td.contains(&mi(&[0, 2, 0])).unwrap());
        assert!(tp.contains(&mi(&[1, 1, 1])).unwrap());
        assert!(matches!(
            td.contains(&mi(&[1, 1])),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn cap_is_enforced() {
        match enumerate_tp(9, 8) {
            Err(Error::SizeLimit { cardinality, .. }) => assert_eq!(cardinality, 100_000_000),
            other => panic!("expected size-limit error, got {other:?}"),
        }
        assert!(enumerate_with_cap(SpaceKind::Td, 3, 10, 285).is_err());
        assert!(enumerate_with_cap(SpaceKind::Td, 3, 10, 286).is_ok());
    }

    #[test]
    fn label_round_trip() {
        let n = mi(&[3, 0, 12]);
        assert_eq!(n.to_string(), "3|0|12");
        assert_eq!("3|0|12".parse::<MultiIndex>().unwrap(), n);
        assert!("3|x".parse::<MultiIndex>().is_err());
    }

    proptest! {
        #[test]
        fn cardinalities_and_membership(q in 0u32..6, d in 1usize..6) {
            let tp = enumerate_tp(q, d).unwrap();
            let td = enumerate_td(q, d).unwrap();
            prop_assert_eq!(tp.len() as u128, (q as u128 + 1).pow(d as u32));
            // binom(q+d, d) via the product formula, independent of subsets::binomial
            let mut b: u128 = 1;
            for i in 1..=d as u128 {
                b = b * (q as u128 + i) / i;
            }
            prop_assert_eq!(td.len() as u128, b);
            if d >= 2 && q >= 1 {
                prop_assert!(td.len() < tp.len());
            }
            // strictly increasing => sorted, no duplicates
            prop_assert!(tp.indices().windows(2).all(|w| w[0] < w[1]));
            prop_assert!(td.indices().windows(2).all(|w| w[0] < w[1]));
            for n in td.iter() {
                prop_assert!(td.contains(n).unwrap());
                prop_assert!(tp.contains(n).unwrap());
                prop_assert!(tp.position(n).is_some());
            }
            // every member of the bounding box passing the predicate is enumerated
            for n in tp.iter() {
                prop_assert!(tp.contains(n).unwrap());
                prop_assert_eq!(td.contains(n).unwrap(), td.position(n).is_some());
            }
        }
    }
}
