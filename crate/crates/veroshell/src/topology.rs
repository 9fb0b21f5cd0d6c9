//! Rational homology of order complexes at desk scale.
//!
//! The order complex of a bounded graded poset is built on the proper part
//! (everything strictly between bottom and top); its faces are the chains.
//! Reduced Betti numbers are computed exactly: the empty face and dimension
//! zero by counting, dimension-one boundary rank by union-find, and higher
//! boundary ranks by sparse integer elimination. Exactness matters because
//! the Cohen-Macaulay check certifies vanishing, never just samples it.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::poset::{ElementId, GradedPoset, PosetError};

/// Default cap on the number of faces of one order complex.
pub const DEFAULT_FACE_BUDGET: usize = 10_000;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("order complex exceeds the face budget of {budget}")]
    FaceBudget { budget: usize },
    #[error("reduced homology needs an interval of rank at least one")]
    RankZero,
    #[error("poset: {0}")]
    Poset(#[from] PosetError),
}

/// A witness that a poset is not Cohen-Macaulay: the open interval between
/// `x` and `y` has a nonvanishing reduced Betti number below its top
/// dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CmViolation {
    pub x: ElementId,
    pub y: ElementId,
    pub dim: i64,
    pub betti: u64,
}

/// Faces of the order complex of the proper part, grouped by dimension
/// (index `k` holds the dimension-`k` faces, each a rank-ascending chain).
/// The empty face is implicit. An empty outer vector means the proper part
/// is empty and the complex is `{empty face}`.
pub fn order_complex_faces(
    poset: &GradedPoset,
    budget: usize,
) -> Result<Vec<Vec<Vec<ElementId>>>, TopologyError> {
    let height = poset.height()? as i64;
    if height < 1 {
        return Err(TopologyError::RankZero);
    }
    let proper: Vec<ElementId> = poset
        .ids()
        .filter(|&id| poset.rank(id) >= 1 && (poset.rank(id) as i64) < height)
        .collect();
    let above: Vec<Vec<ElementId>> = proper
        .iter()
        .map(|&e| proper.iter().copied().filter(|&f| f != e && poset.leq(e, f)).collect())
        .collect();
    let index_of: HashMap<ElementId, usize> =
        proper.iter().enumerate().map(|(i, &e)| (e, i)).collect();

    let top_dim = (height - 2).max(-1);
    let mut faces: Vec<Vec<Vec<ElementId>>> = vec![Vec::new(); (top_dim + 1).max(0) as usize];
    let mut total = 0usize;
    // Chains are generated in ascending id order; ids ascend with rank, so
    // each stored face is rank-sorted.
    let mut stack: Vec<ElementId> = Vec::new();
    fn extend(
        stack: &mut Vec<ElementId>,
        choices: &[ElementId],
        above: &[Vec<ElementId>],
        index_of: &HashMap<ElementId, usize>,
        faces: &mut [Vec<Vec<ElementId>>],
        total: &mut usize,
        budget: usize,
    ) -> Result<(), TopologyError> {
        for &e in choices {
            stack.push(e);
            *total += 1;
            if *total > budget {
                return Err(TopologyError::FaceBudget { budget });
            }
            faces[stack.len() - 1].push(stack.clone());
            extend(stack, &above[index_of[&e]], above, index_of, faces, total, budget)?;
            stack.pop();
        }
        Ok(())
    }
    extend(&mut stack, &proper, &above, &index_of, &mut faces, &mut total, budget)?;
    Ok(faces)
}

/// Exact rank of an integer matrix given as sparse rows.
fn exact_rank(mut rows: Vec<BTreeMap<usize, BigInt>>) -> usize {
    fn normalize(row: &mut BTreeMap<usize, BigInt>) {
        let mut g = BigInt::zero();
        for v in row.values() {
            g = num_integer_gcd(&g, v);
        }
        if g > BigInt::from(1) {
            for v in row.values_mut() {
                *v = &*v / &g;
            }
        }
    }
    fn num_integer_gcd(a: &BigInt, b: &BigInt) -> BigInt {
        let (mut a, mut b) = (a.abs(), b.abs());
        while !b.is_zero() {
            let r = &a % &b;
            a = b;
            b = r;
        }
        a
    }

    let mut rank = 0;
    loop {
        let Some(pos) = (0..rows.len())
            .filter(|&i| !rows[i].is_empty())
            .min_by_key(|&i| rows[i].len())
        else {
            break;
        };
        let pivot = rows.swap_remove(pos);
        rank += 1;
        let (&pc, pcoef) = pivot.iter().next().expect("pivot row is nonempty");
        let pcoef = pcoef.clone();
        for row in rows.iter_mut() {
            let Some(coef) = row.remove(&pc) else { continue };
            // row := pcoef * row - coef * pivot, which zeroes column pc.
            for v in row.values_mut() {
                *v = &*v * &pcoef;
            }
            for (c, v) in pivot.iter() {
                if *c == pc {
                    continue;
                }
                let delta = v * &coef;
                let entry = row.entry(*c).or_insert_with(BigInt::zero);
                *entry = &*entry - delta;
                if entry.is_zero() {
                    row.remove(c);
                }
            }
            normalize(row);
        }
    }
    rank
}

/// Rank of the dimension-one boundary map: vertices minus connected
/// components of the one-skeleton, isolated vertices included.
fn edge_boundary_rank(vertices: &[Vec<ElementId>], edges: &[Vec<ElementId>]) -> usize {
    let index_of: HashMap<ElementId, usize> =
        vertices.iter().enumerate().map(|(i, f)| (f[0], i)).collect();
    let mut parent: Vec<usize> = (0..vertices.len()).collect();
    fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut components = vertices.len();
    for e in edges {
        let (a, b) = (find(&mut parent, index_of[&e[0]]), find(&mut parent, index_of[&e[1]]));
        if a != b {
            parent[a] = b;
            components -= 1;
        }
    }
    vertices.len() - components
}

/// Boundary rank in dimension `k >= 2`: one sparse row per `k`-face with
/// alternating-sign entries over its facets.
fn high_boundary_rank(faces_prev: &[Vec<ElementId>], faces: &[Vec<ElementId>]) -> usize {
    let index_of: HashMap<&[ElementId], usize> =
        faces_prev.iter().enumerate().map(|(i, f)| (f.as_slice(), i)).collect();
    let rows: Vec<BTreeMap<usize, BigInt>> = faces
        .iter()
        .map(|face| {
            let mut row = BTreeMap::new();
            for i in 0..face.len() {
                let mut sub = face.clone();
                sub.remove(i);
                let col = index_of[sub.as_slice()];
                let sign = if i % 2 == 0 { 1 } else { -1 };
                row.insert(col, BigInt::from(sign));
            }
            row
        })
        .collect();
    exact_rank(rows)
}

/// Reduced rational Betti numbers of the order complex of the proper part,
/// as a map from dimension (starting at -1) to the Betti number. Every
/// dimension up to `height - 2` is present, zeros included.
pub fn reduced_betti(
    poset: &GradedPoset,
    face_budget: usize,
) -> Result<BTreeMap<i64, u64>, TopologyError> {
    let faces = order_complex_faces(poset, face_budget)?;
    let top_dim = faces.len() as i64 - 1;
    let mut betti = BTreeMap::new();
    if top_dim < 0 {
        // The complex is {empty face}: one generator in dimension -1.
        betti.insert(-1, 1);
        return Ok(betti);
    }
    betti.insert(-1, 0);

    // ranks[k] = rank of the boundary map from dimension k to k-1.
    let mut ranks = vec![0usize; faces.len() + 1];
    ranks[0] = 1;
    if faces.len() >= 2 {
        ranks[1] = edge_boundary_rank(&faces[0], &faces[1]);
    }
    if faces.len() > 2 {
        let high: Vec<usize> = (2..faces.len())
            .into_par_iter()
            .map(|k| high_boundary_rank(&faces[k - 1], &faces[k]))
            .collect();
        ranks[2..faces.len()].copy_from_slice(&high);
    }

    for k in 0..faces.len() {
        let b = faces[k].len() - ranks[k] - ranks[k + 1];
        betti.insert(k as i64, b as u64);
    }
    Ok(betti)
}

/// Alternating sum of reduced Betti numbers; equals the Mobius value of
/// the interval whose proper part the complex triangulates.
pub fn reduced_euler_characteristic(betti: &BTreeMap<i64, u64>) -> i64 {
    betti
        .iter()
        .map(|(&d, &b)| {
            let sign = if d.rem_euclid(2) == 0 { 1 } else { -1 };
            sign * b as i64
        })
        .sum()
}

/// Checks every interval of length at least two: each open interval must
/// have vanishing reduced homology below its top dimension. Returns the
/// lexicographically first violation, or `None` when the poset is
/// Cohen-Macaulay over the rationals.
pub fn is_cohen_macaulay(
    poset: &GradedPoset,
    face_budget: usize,
) -> Result<Option<CmViolation>, TopologyError> {
    let pairs: Vec<(ElementId, ElementId)> = poset
        .ids()
        .flat_map(|x| poset.ids().map(move |y| (x, y)))
        .filter(|&(x, y)| x != y && poset.leq(x, y) && poset.rank(y) - poset.rank(x) >= 2)
        .collect();
    let violations: Vec<CmViolation> = pairs
        .par_iter()
        .map(|&(x, y)| -> Result<Option<CmViolation>, TopologyError> {
            let (interval, _) = poset.closed_interval(x, y)?;
            let betti = reduced_betti(&interval, face_budget)?;
            let top_dim = (poset.rank(y) - poset.rank(x)) as i64 - 2;
            for (&d, &b) in &betti {
                if d < top_dim && b > 0 {
                    return Ok(Some(CmViolation { x, y, dim: d, betti: b }));
                }
            }
            Ok(None)
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(violations.into_iter().min_by_key(|v| (v.x, v.y, v.dim)))
}
