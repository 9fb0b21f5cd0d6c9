//! Veronese posets: nonnegative integer vectors with coordinate sum divisible
//! by a modulus, ordered coordinatewise. The pinched variant removes the
//! all-ones vector from the ground set, which also removes it as an allowed
//! difference in the order relation.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poset::{GradedPoset, PosetError};

/// Inclusive dimension bounds for lattice vectors.
pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 16;

/// Default cap on interval ground-set size.
pub const DEFAULT_ELEMENT_BUDGET: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum VeroneseError {
    #[error("dimension {got} outside supported range {MIN_DIM}..={MAX_DIM}")]
    Dimension { got: usize },
    #[error("modulus must be positive")]
    Modulus,
    #[error("vector {vector} has {got} coordinates, expected {expected}")]
    VectorLength { vector: String, got: usize, expected: usize },
    #[error("vector {vector} is not a member of {space}")]
    NotMember { vector: String, space: String },
    #[error("interval would exceed {budget} elements")]
    IntervalTooLarge { budget: usize },
    #[error("cannot parse vector from {text:?}: {reason}")]
    Parse { text: String, reason: String },
    #[error("poset: {0}")]
    Poset(#[from] PosetError),
}

/// A vector of nonnegative coordinates; the payload type of Veronese posets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeVector(pub Vec<u32>);

impl LatticeVector {
    pub fn new(coords: Vec<u32>) -> Result<Self, VeroneseError> {
        if coords.len() < MIN_DIM || coords.len() > MAX_DIM {
            return Err(VeroneseError::Dimension { got: coords.len() });
        }
        Ok(LatticeVector(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        LatticeVector(vec![0; dim])
    }

    pub fn all_ones(dim: usize) -> Self {
        LatticeVector(vec![1; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[u32] {
        &self.0
    }

    pub fn sum(&self) -> u64 {
        self.0.iter().map(|&c| c as u64).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// Coordinatewise sum.
    pub fn plus(&self, other: &LatticeVector) -> LatticeVector {
        debug_assert_eq!(self.dim(), other.dim());
        LatticeVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Coordinatewise difference, `None` unless `other <= self` coordinatewise.
    pub fn minus(&self, other: &LatticeVector) -> Option<LatticeVector> {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<u32>>>()
            .map(LatticeVector)
    }

    pub fn dominates(&self, other: &LatticeVector) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a >= b)
    }

    /// True when some coordinate at 1-indexed position >= `start` is nonzero.
    pub fn has_support_from(&self, start: usize) -> bool {
        start <= self.dim() && self.0[start - 1..].iter().any(|&c| c != 0)
    }

    /// First 1-indexed nonzero position, if any.
    pub fn first_support(&self) -> Option<usize> {
        self.0.iter().position(|&c| c != 0).map(|i| i + 1)
    }

    /// Truncation to the first `len` coordinates.
    pub fn truncate(&self, len: usize) -> LatticeVector {
        LatticeVector(self.0[..len].to_vec())
    }

    /// Zero-pad on the right up to `dim` coordinates.
    pub fn pad(&self, dim: usize) -> LatticeVector {
        let mut coords = self.0.clone();
        coords.resize(dim, 0);
        LatticeVector(coords)
    }
}

impl fmt::Display for LatticeVector {
    /// Digit string when all coordinates fit one digit, else comma-separated.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.iter().all(|&c| c <= 9) {
            for c in &self.0 {
                write!(f, "{c}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
            write!(f, "{}", parts.join(","))
        }
    }
}

impl FromStr for LatticeVector {
    type Err = VeroneseError;

    /// Parses the comma-separated form accepted on the command line.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let coords = s
            .split(',')
            .map(|p| p.trim().parse::<u32>())
            .collect::<Result<Vec<u32>, _>>()
            .map_err(|e| VeroneseError::Parse { text: s.to_string(), reason: e.to_string() })?;
        LatticeVector::new(coords)
    }
}

/// Translation `x + by`, used to re-root an interval at its bottom.
pub fn translate(x: &LatticeVector, by: &LatticeVector) -> LatticeVector {
    x.plus(by)
}

/// Inverse translation `x - by`.
pub fn untranslate(x: &LatticeVector, by: &LatticeVector) -> Option<LatticeVector> {
    x.minus(by)
}

/// Lexicographic comparison of coordinate sequences.
pub fn lex_cmp(a: &LatticeVector, b: &LatticeVector) -> Ordering {
    a.0.cmp(&b.0)
}

/// The three-block order used for pinched atom lists: vectors with nonzero
/// last coordinate other than `1...102` come first (lexicographically), then
/// `1...102`, then vectors with zero last coordinate (lexicographically).
pub fn specific_cmp(a: &LatticeVector, b: &LatticeVector) -> Ordering {
    fn block(v: &LatticeVector) -> u8 {
        let n = v.dim();
        if v.0[n - 1] == 0 {
            2
        } else if *v == ones_with_suffix(n, &[0, 2]) {
            1
        } else {
            0
        }
    }
    block(a).cmp(&block(b)).then_with(|| lex_cmp(a, b))
}

/// Ones followed by an explicit suffix, e.g. suffix `[0, 2]` gives `1...102`.
pub fn ones_with_suffix(dim: usize, suffix: &[u32]) -> LatticeVector {
    debug_assert!(suffix.len() <= dim);
    let mut coords = vec![1u32; dim];
    coords[dim - suffix.len()..].copy_from_slice(suffix);
    LatticeVector(coords)
}

/// An explicit prefix followed by ones, e.g. prefix `[2, 0]` gives `201...1`.
pub fn prefix_with_ones(dim: usize, prefix: &[u32]) -> LatticeVector {
    debug_assert!(prefix.len() <= dim);
    let mut coords = vec![1u32; dim];
    coords[..prefix.len()].copy_from_slice(prefix);
    LatticeVector(coords)
}

/// A family of Veronese posets sharing one ground-set rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VeroneseSpace {
    /// Vectors of length `dim` with coordinate sum divisible by `modulus`.
    Plain { modulus: u32, dim: usize },
    /// Vectors of length `dim` with sum divisible by `dim`, excluding the
    /// all-ones vector; differences equal to all-ones are excluded too.
    Pinched { dim: usize },
}

impl fmt::Display for VeroneseSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VeroneseSpace::Plain { modulus, dim } => write!(f, "V_{{{modulus},{dim}}}"),
            VeroneseSpace::Pinched { dim } => write!(f, "pinched V_{dim}"),
        }
    }
}

impl VeroneseSpace {
    pub fn plain(modulus: u32, dim: usize) -> Result<Self, VeroneseError> {
        if !(MIN_DIM..=MAX_DIM).contains(&dim) {
            return Err(VeroneseError::Dimension { got: dim });
        }
        if modulus == 0 {
            return Err(VeroneseError::Modulus);
        }
        Ok(VeroneseSpace::Plain { modulus, dim })
    }

    pub fn pinched(dim: usize) -> Result<Self, VeroneseError> {
        if !(MIN_DIM..=MAX_DIM).contains(&dim) {
            return Err(VeroneseError::Dimension { got: dim });
        }
        Ok(VeroneseSpace::Pinched { dim })
    }

    pub fn dim(&self) -> usize {
        match *self {
            VeroneseSpace::Plain { dim, .. } | VeroneseSpace::Pinched { dim } => dim,
        }
    }

    pub fn modulus(&self) -> u32 {
        match *self {
            VeroneseSpace::Plain { modulus, .. } => modulus,
            VeroneseSpace::Pinched { dim } => dim as u32,
        }
    }

    pub fn is_member(&self, v: &LatticeVector) -> bool {
        if v.dim() != self.dim() {
            return false;
        }
        if v.sum() % self.modulus() as u64 != 0 {
            return false;
        }
        match self {
            VeroneseSpace::Plain { .. } => true,
            VeroneseSpace::Pinched { dim } => *v != LatticeVector::all_ones(*dim),
        }
    }

    fn require_member(&self, v: &LatticeVector) -> Result<(), VeroneseError> {
        if self.is_member(v) {
            Ok(())
        } else {
            Err(VeroneseError::NotMember { vector: v.to_string(), space: self.to_string() })
        }
    }

    /// Order relation: the difference must again satisfy the ground-set rule.
    pub fn leq(&self, a: &LatticeVector, b: &LatticeVector) -> Result<bool, VeroneseError> {
        self.require_member(a)?;
        self.require_member(b)?;
        let diff = match b.minus(a) {
            Some(d) => d,
            None => return Ok(false),
        };
        Ok(match self {
            VeroneseSpace::Plain { .. } => true,
            VeroneseSpace::Pinched { dim } => diff != LatticeVector::all_ones(*dim),
        })
    }

    pub fn rank(&self, v: &LatticeVector) -> Result<u64, VeroneseError> {
        self.require_member(v)?;
        Ok(v.sum() / self.modulus() as u64)
    }

    /// The closed interval `[0, z]` as a graded poset with vector payloads.
    pub fn build_interval(&self, z: &LatticeVector) -> Result<GradedPoset, VeroneseError> {
        self.build_interval_with_budget(z, DEFAULT_ELEMENT_BUDGET)
    }

    pub fn build_interval_with_budget(
        &self,
        z: &LatticeVector,
        budget: usize,
    ) -> Result<GradedPoset, VeroneseError> {
        self.require_member(z)?;
        let box_size: u128 = z.0.iter().map(|&c| c as u128 + 1).product();
        if box_size > budget as u128 * self.modulus() as u128 {
            return Err(VeroneseError::IntervalTooLarge { budget });
        }

        let mut ground: Vec<LatticeVector> = Vec::new();
        let zero = LatticeVector::zeros(self.dim());
        for_each_box_point(z, |v| {
            if self.is_member(v)
                && self.leq(&zero, v).unwrap_or(false)
                && self.leq(v, z).unwrap_or(false)
            {
                ground.push(v.clone());
            }
        });
        if ground.len() > budget {
            return Err(VeroneseError::IntervalTooLarge { budget });
        }

        let mut by_rank: Vec<Vec<usize>> = Vec::new();
        for (i, v) in ground.iter().enumerate() {
            let r = (v.sum() / self.modulus() as u64) as usize;
            if by_rank.len() <= r {
                by_rank.resize(r + 1, Vec::new());
            }
            by_rank[r].push(i);
        }
        let mut covers = Vec::new();
        for pair in by_rank.windows(2) {
            for &lo in &pair[0] {
                for &hi in &pair[1] {
                    if self.leq(&ground[lo], &ground[hi]).unwrap_or(false) {
                        covers.push((lo, hi));
                    }
                }
            }
        }
        let payloads: Vec<Vec<u32>> = ground.into_iter().map(|v| v.0).collect();
        let (poset, _) = GradedPoset::build(payloads, &covers)?;
        Ok(poset)
    }
}

/// Visits every point of the coordinatewise box `[0, z]`.
fn for_each_box_point(z: &LatticeVector, mut f: impl FnMut(&LatticeVector)) {
    let dim = z.dim();
    let mut cur = LatticeVector::zeros(dim);
    loop {
        f(&cur);
        let mut pos = dim;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            if cur.0[pos] < z.0[pos] {
                cur.0[pos] += 1;
                break;
            }
            cur.0[pos] = 0;
        }
    }
}

/// All rank-1 elements of a pinched Veronese poset, with the derived
/// sublists and orders the shelling construction works with.
#[derive(Debug, Clone)]
pub struct AtomCatalog {
    dim: usize,
    all_lex: Vec<LatticeVector>,
}

impl AtomCatalog {
    pub fn new(dim: usize) -> Result<Self, VeroneseError> {
        if !(MIN_DIM..=MAX_DIM).contains(&dim) {
            return Err(VeroneseError::Dimension { got: dim });
        }
        let mut all_lex = Vec::new();
        let ones = LatticeVector::all_ones(dim);
        enumerate_compositions(dim as u64, dim, &mut |v| {
            if *v != ones {
                all_lex.push(v.clone());
            }
        });
        Ok(AtomCatalog { dim, all_lex })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Every atom, lexicographically ascending.
    pub fn all_lex(&self) -> &[LatticeVector] {
        &self.all_lex
    }

    pub fn len(&self) -> usize {
        self.all_lex.len()
    }

    pub fn is_empty(&self) -> bool {
        self.all_lex.is_empty()
    }

    /// Atoms with some nonzero coordinate at 1-indexed position >= `start`,
    /// lexicographically ascending.
    pub fn with_support_from(&self, start: usize) -> Vec<LatticeVector> {
        self.all_lex.iter().filter(|a| a.has_support_from(start)).cloned().collect()
    }

    /// Atoms with nonzero last coordinate, except `1...102`; the leading
    /// block of the specific order.
    pub fn specific_block(&self) -> Vec<LatticeVector> {
        let excluded = ones_with_suffix(self.dim, &[0, 2]);
        self.all_lex
            .iter()
            .filter(|a| a.0[self.dim - 1] != 0 && **a != excluded)
            .cloned()
            .collect()
    }

    /// Every atom in the specific order.
    pub fn all_specific(&self) -> Vec<LatticeVector> {
        let mut atoms = self.all_lex.clone();
        atoms.sort_by(specific_cmp);
        atoms
    }
}

/// Visits vectors of the given length with coordinate sum `total`, in
/// lexicographic order.
fn enumerate_compositions(total: u64, len: usize, f: &mut impl FnMut(&LatticeVector)) {
    let mut cur = vec![0u32; len];
    fn rec(cur: &mut Vec<u32>, pos: usize, remaining: u64, f: &mut impl FnMut(&LatticeVector)) {
        if pos + 1 == cur.len() {
            cur[pos] = remaining as u32;
            let v = LatticeVector(cur.clone());
            f(&v);
            return;
        }
        for c in 0..=remaining {
            cur[pos] = c as u32;
            rec(cur, pos + 1, remaining - c, f);
        }
        cur[pos] = 0;
    }
    rec(&mut cur, 0, total, f);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(coords: &[u32]) -> LatticeVector {
        LatticeVector::new(coords.to_vec()).unwrap()
    }

    #[test]
    fn membership_rules() {
        let plain = VeroneseSpace::plain(2, 3).unwrap();
        assert!(!plain.is_member(&lv(&[1, 1, 1])));
        assert!(plain.is_member(&lv(&[1, 1, 0])));
        let pinched = VeroneseSpace::pinched(4).unwrap();
        assert!(!pinched.is_member(&lv(&[1, 1, 1, 1])));
        assert!(pinched.is_member(&lv(&[2, 0, 1, 1])));
        assert!(pinched.is_member(&lv(&[0, 0, 0, 0])));
        assert!(!pinched.is_member(&lv(&[1, 0, 0, 0])));
    }

    #[test]
    fn pinched_order_excludes_all_ones_difference() {
        let pinched = VeroneseSpace::pinched(4).unwrap();
        let zero = LatticeVector::zeros(4);
        let z = lv(&[1, 1, 1, 5]);
        let x = lv(&[0, 0, 0, 4]);
        assert!(pinched.leq(&zero, &x).unwrap());
        assert!(!pinched.leq(&x, &z).unwrap(), "difference is the all-ones vector");
        assert!(pinched.leq(&zero, &z).unwrap());
        // Transitivity is safe: the removed difference has rank one, so a
        // strictly intermediate element cannot exist. Spot-check by brute
        // force on a small interval.
        let iv = pinched.build_interval(&lv(&[2, 2, 2, 2])).unwrap();
        for x in iv.ids() {
            for y in iv.ids() {
                for w in iv.ids() {
                    if iv.leq(x, y) && iv.leq(y, w) {
                        assert!(iv.leq(x, w));
                    }
                }
            }
        }
    }

    #[test]
    fn rank_is_sum_over_modulus() {
        let plain = VeroneseSpace::plain(3, 3).unwrap();
        assert_eq!(plain.rank(&lv(&[6, 2, 1])).unwrap(), 3);
        let pinched = VeroneseSpace::pinched(4).unwrap();
        assert_eq!(pinched.rank(&lv(&[2, 3, 3, 4])).unwrap(), 3);
    }

    #[test]
    fn interval_excludes_pinched_complement() {
        let pinched = VeroneseSpace::pinched(4).unwrap();
        let iv = pinched.build_interval(&lv(&[1, 1, 1, 5])).unwrap();
        assert!(iv.id_by_payload(&[0, 0, 0, 4]).is_none());
        assert!(iv.id_by_payload(&[1, 1, 1, 1]).is_none());
        assert!(iv.id_by_payload(&[1, 1, 0, 2]).is_some());
        // Independent element count: box points satisfying all constraints.
        let mut expected = 0u32;
        let ones = LatticeVector::all_ones(4);
        for_each_box_point(&lv(&[1, 1, 1, 5]), |v| {
            let diff = lv(&[1, 1, 1, 5]).minus(v).unwrap();
            if v.sum() % 4 == 0 && *v != ones && diff != ones {
                expected += 1;
            }
        });
        assert_eq!(iv.len() as u32, expected);
    }

    #[test]
    fn plain_unit_interval_is_a_lattice() {
        let plain = VeroneseSpace::plain(1, 3).unwrap();
        let iv = plain.build_interval(&lv(&[2, 1, 1])).unwrap();
        assert_eq!(iv.len(), 12);
        // Meet and join are coordinatewise min and max; check the modular
        // rank identity on all pairs.
        for x in iv.ids() {
            for y in iv.ids() {
                let (px, py) = (iv.payload(x), iv.payload(y));
                let join: Vec<u32> = px.iter().zip(py).map(|(a, b)| *a.max(b)).collect();
                let meet: Vec<u32> = px.iter().zip(py).map(|(a, b)| *a.min(b)).collect();
                let j = iv.id_by_payload(&join).unwrap();
                let m = iv.id_by_payload(&meet).unwrap();
                assert!(iv.leq(m, x) && iv.leq(m, y));
                assert!(iv.leq(x, j) && iv.leq(y, j));
                assert_eq!(iv.rank(x) + iv.rank(y), iv.rank(j) + iv.rank(m));
            }
        }
    }

    #[test]
    fn atom_catalog_counts() {
        // Atom count is C(2n-1, n) - 1.
        let expected = [(2usize, 2usize), (3, 9), (4, 34), (5, 125), (6, 461)];
        for (n, count) in expected {
            let catalog = AtomCatalog::new(n).unwrap();
            assert_eq!(catalog.len(), count, "dimension {n}");
        }
    }

    #[test]
    fn atom_catalog_sublists_n4() {
        let catalog = AtomCatalog::new(4).unwrap();
        let tail = catalog.with_support_from(4);
        assert_eq!(tail.len(), 19);
        let specific = catalog.specific_block();
        assert_eq!(specific.len(), 18);
        // The specific block plus 1102 is exactly the nonzero-last-coordinate list.
        let mut rejoined = specific.clone();
        rejoined.push(ones_with_suffix(4, &[0, 2]));
        rejoined.sort();
        assert_eq!(rejoined, tail);
    }

    #[test]
    fn lex_order_endpoints() {
        for n in 4..=6 {
            let catalog = AtomCatalog::new(n).unwrap();
            let atoms = catalog.all_lex();
            let mut first = vec![0u32; n];
            first[n - 1] = n as u32;
            assert_eq!(atoms[0].coords(), &first[..]);
            let mut second = vec![0u32; n];
            second[n - 2] = 1;
            second[n - 1] = n as u32 - 1;
            assert_eq!(atoms[1].coords(), &second[..]);
            let mut last = vec![0u32; n];
            last[0] = n as u32;
            assert_eq!(atoms[atoms.len() - 1].coords(), &last[..]);
            let mut second_last = vec![0u32; n];
            second_last[0] = n as u32 - 1;
            second_last[1] = 1;
            assert_eq!(atoms[atoms.len() - 2].coords(), &second_last[..]);
        }
    }

    #[test]
    fn frozen_atom_listings_n4() {
        let catalog = AtomCatalog::new(4).unwrap();
        let lex: Vec<String> = catalog.all_lex().iter().map(|a| a.to_string()).collect();
        assert_eq!(
            lex.join(" "),
            "0004 0013 0022 0031 0040 0103 0112 0121 0130 0202 0211 0220 0301 0310 0400 \
             1003 1012 1021 1030 1102 1120 1201 1210 1300 2002 2011 2020 2101 2110 2200 \
             3001 3010 3100 4000"
        );
        let specific: Vec<String> = catalog.all_specific().iter().map(|a| a.to_string()).collect();
        assert_eq!(
            specific.join(" "),
            "0004 0013 0022 0031 0103 0112 0121 0202 0211 0301 1003 1012 1021 1201 2002 \
             2011 2101 3001 1102 0040 0130 0220 0310 0400 1030 1120 1210 1300 2020 2110 \
             2200 3010 3100 4000"
        );
    }

    #[test]
    fn specific_order_block_boundaries() {
        for n in 4..=6 {
            let catalog = AtomCatalog::new(n).unwrap();
            let order = catalog.all_specific();
            let block = catalog.specific_block();
            assert_eq!(&order[..block.len()], &block[..]);
            assert_eq!(order[block.len()], ones_with_suffix(n, &[0, 2]));
            let tail = &order[block.len() + 1..];
            assert!(tail.iter().all(|a| a.coords()[n - 1] == 0));
            assert!(tail.windows(2).all(|w| lex_cmp(&w[0], &w[1]) == Ordering::Less));
        }
    }

    #[test]
    fn display_and_parse() {
        assert_eq!(lv(&[1, 1, 0, 2]).to_string(), "1102");
        assert_eq!(lv(&[12, 0, 3]).to_string(), "12,0,3");
        let parsed: LatticeVector = "2,3,3,4".parse().unwrap();
        assert_eq!(parsed, lv(&[2, 3, 3, 4]));
        assert!("2,x,3,4".parse::<LatticeVector>().is_err());
        assert!("7".parse::<LatticeVector>().is_err());
    }

    #[test]
    fn pattern_helpers() {
        assert_eq!(ones_with_suffix(4, &[0, 2]), lv(&[1, 1, 0, 2]));
        assert_eq!(ones_with_suffix(5, &[2, 0, 1]), lv(&[1, 1, 2, 0, 1]));
        assert_eq!(prefix_with_ones(4, &[2, 0]), lv(&[2, 0, 1, 1]));
        assert_eq!(prefix_with_ones(6, &[2, 0]), lv(&[2, 0, 1, 1, 1, 1]));
    }

    #[test]
    fn interval_gradedness_nontrivial() {
        let pinched = VeroneseSpace::pinched(4).unwrap();
        for z in [lv(&[2, 2, 2, 2]), lv(&[2, 3, 3, 4]), lv(&[0, 4, 4, 4])] {
            let iv = pinched.build_interval(&z).unwrap();
            assert_eq!(iv.height().unwrap() as u64, pinched.rank(&z).unwrap());
        }
    }
}
