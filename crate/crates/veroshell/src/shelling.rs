//! Shelling orders on the maximal chains of a graded poset: verification,
//! certificates, a brute-force search used as a fallback and as an oracle,
//! and the two label-driven chain orders that seed the recursive
//! construction.
//!
//! Throughout, an order is a sequence of maximal chains (each listed bottom
//! to top by element id). The shelling condition checked everywhere: for
//! every chain `c` and every earlier chain `c'`, some chain `c*` before `c`
//! agrees with `c` at all levels but one, and that level's element is not
//! on `c'`. Because chains in a graded poset with a top are pure and hit
//! every rank, "agrees at all levels but one" is a per-level bucket lookup
//! and membership tests reduce to same-level equality.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poset::{Chain, ElementId, GradedPoset, PosetError, DEFAULT_CHAIN_BUDGET};
use crate::veronese::{LatticeVector, VeroneseError, VeroneseSpace};

#[derive(Debug, Error)]
pub enum ShellingError {
    #[error("poset has no top element; chain orders are only checked below a top")]
    MissingTop,
    #[error("chain {index} is not a maximal chain from bottom to top")]
    ChainNotMaximal { index: usize },
    #[error("chain {index} repeats an earlier chain")]
    DuplicateChain { index: usize },
    #[error("order lists {got} chains but the poset has {expected} maximal chains")]
    WrongChainCount { got: usize, expected: u64 },
    #[error("atom list is not a duplicate-free list of rank-1 elements")]
    BadAtomList,
    #[error("chain {index} starts at an atom outside the given atom order")]
    AtomOutsideOrder { index: usize },
    #[error("chain {index} breaks the atom grouping: its atom precedes chain {prev}'s atom")]
    AtomOrderBroken { index: usize, prev: usize },
    #[error(
        "shelling violated: chain {later} and earlier chain {earlier} admit no \
         one-level swap to a chain before {later} that avoids chain {earlier}"
    )]
    Violation { later: usize, earlier: usize },
    #[error("modulus {modulus} does not divide the coordinate sum {sum}")]
    IndivisibleSum { modulus: u32, sum: u64 },
    #[error("poset: {0}")]
    Poset(#[from] PosetError),
    #[error("veronese: {0}")]
    Veronese(#[from] VeroneseError),
}

#[derive(Debug, Error)]
pub enum BruteForceError {
    #[error("no shelling order exists ({nodes} search nodes explored)")]
    NoShellingExists { nodes: u64 },
    #[error("search exceeded the node budget of {budget}")]
    NodeBudget { budget: u64 },
    #[error("search exceeded the time limit")]
    TimeLimit,
    #[error(transparent)]
    Structural(#[from] ShellingError),
}

/// Serialized chain order, bound to its poset by content hash. `witnesses`
/// is present on certificates: one `[later, earlier, swap]` triple per pair,
/// where `swap` indexes a chain before `later` differing from it at exactly
/// one level that avoids `earlier`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShellingDocument {
    pub poset: String,
    pub chains: Vec<Chain>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<Vec<[usize; 3]>>,
}

/// Checks that `order` lists every maximal chain exactly once; returns the
/// common chain length. Rank-0 posets accept `[]` or `[[bottom]]`.
fn validate_order(poset: &GradedPoset, order: &[Chain]) -> Result<usize, ShellingError> {
    let top = poset.top().ok_or(ShellingError::MissingTop)?;
    let height = poset.height()? as usize;
    if height == 0 {
        let ok = order.is_empty() || (order.len() == 1 && order[0] == vec![poset.bottom()]);
        return if ok {
            Ok(1)
        } else {
            Err(ShellingError::WrongChainCount { got: order.len(), expected: 1 })
        };
    }
    let len = height + 1;
    let mut seen: HashMap<&[ElementId], usize> = HashMap::with_capacity(order.len());
    for (index, chain) in order.iter().enumerate() {
        let maximal = chain.len() == len
            && chain[0] == poset.bottom()
            && chain[len - 1] == top
            && chain.windows(2).all(|w| poset.covers(w[0], w[1]));
        if !maximal {
            return Err(ShellingError::ChainNotMaximal { index });
        }
        if seen.insert(chain.as_slice(), index).is_some() {
            return Err(ShellingError::DuplicateChain { index });
        }
    }
    let expected = poset.count_maximal_chains()?;
    if order.len() as u64 != expected {
        return Err(ShellingError::WrongChainCount { got: order.len(), expected });
    }
    Ok(len)
}

/// For each chain and interior level, the earliest prior chain equal to it
/// at every other level, if one exists. Interior levels are `1..len-1`;
/// entries for the two endpoint levels stay `None`.
pub(crate) fn swap_witnesses(order: &[Chain], len: usize) -> Vec<Vec<Option<usize>>> {
    let mut witnesses = vec![vec![None; len]; order.len()];
    if len < 3 {
        return witnesses;
    }
    // One bucket map per interior level, keyed by the chain with that level
    // blanked out. Ascending insertion keeps the stored index minimal.
    let mut buckets: Vec<HashMap<Chain, usize>> = vec![HashMap::new(); len];
    for (i, chain) in order.iter().enumerate() {
        for t in 1..len - 1 {
            let mut hole = chain.clone();
            hole[t] = usize::MAX;
            match buckets[t].entry(hole) {
                std::collections::hash_map::Entry::Occupied(e) => {
                    witnesses[i][t] = Some(*e.get());
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(i);
                }
            }
        }
    }
    witnesses
}

/// First shelling violation under the swap-witness table, if any: a pair
/// `(later, earlier)` such that `earlier` matches `later` on every level
/// that has a prior swap. Matching on all such levels leaves no admissible
/// swap avoiding `earlier`.
fn find_violation(order: &[Chain], len: usize, witnesses: &[Vec<Option<usize>>]) -> Option<(usize, usize)> {
    if len < 3 {
        return None;
    }
    (1..order.len())
        .into_par_iter()
        .filter_map(|i| {
            let chain = &order[i];
            let swap_ok: Vec<usize> =
                (1..len - 1).filter(|&t| witnesses[i][t].is_some()).collect();
            (0..i)
                .find(|&j| swap_ok.iter().all(|&t| order[j][t] == chain[t]))
                .map(|j| (i, j))
        })
        .min()
}

/// Verifies that `order` is a shelling of the full set of maximal chains.
pub fn verify_shelling(poset: &GradedPoset, order: &[Chain]) -> Result<(), ShellingError> {
    let len = validate_order(poset, order)?;
    let witnesses = swap_witnesses(order, len);
    match find_violation(order, len, &witnesses) {
        None => Ok(()),
        Some((later, earlier)) => Err(ShellingError::Violation { later, earlier }),
    }
}

/// Verifies a shelling that additionally keeps chains grouped by their
/// atom (the rank-1 element), consistent with `atom_order`.
pub fn verify_a_shelling(
    poset: &GradedPoset,
    order: &[Chain],
    atom_order: &[ElementId],
) -> Result<(), ShellingError> {
    let mut position: HashMap<ElementId, usize> = HashMap::with_capacity(atom_order.len());
    for (pos, &a) in atom_order.iter().enumerate() {
        if poset.rank(a) != 1 || position.insert(a, pos).is_some() {
            return Err(ShellingError::BadAtomList);
        }
    }
    let len = validate_order(poset, order)?;
    if len >= 2 {
        let mut prev: Option<(usize, usize)> = None;
        for (index, chain) in order.iter().enumerate() {
            let pos = *position
                .get(&chain[1])
                .ok_or(ShellingError::AtomOutsideOrder { index })?;
            if let Some((prev_index, prev_pos)) = prev {
                if pos < prev_pos {
                    return Err(ShellingError::AtomOrderBroken { index, prev: prev_index });
                }
            }
            prev = Some((index, pos));
        }
    }
    let witnesses = swap_witnesses(order, len);
    match find_violation(order, len, &witnesses) {
        None => Ok(()),
        Some((later, earlier)) => Err(ShellingError::Violation { later, earlier }),
    }
}

/// Verifies `order` and packages it with one swap witness per chain pair.
pub fn shelling_certificate(
    poset: &GradedPoset,
    order: &[Chain],
) -> Result<ShellingDocument, ShellingError> {
    let len = validate_order(poset, order)?;
    let witnesses = swap_witnesses(order, len);
    if let Some((later, earlier)) = find_violation(order, len, &witnesses) {
        return Err(ShellingError::Violation { later, earlier });
    }
    let mut triples = Vec::new();
    for i in 1..order.len() {
        let swap_ok: Vec<usize> = (1..len.saturating_sub(1))
            .filter(|&t| witnesses[i][t].is_some())
            .collect();
        for j in 0..i {
            if len >= 3 {
                let t = swap_ok
                    .iter()
                    .copied()
                    .find(|&t| order[i][t] != order[j][t])
                    .expect("verified order has a swap for every pair");
                triples.push([i, j, witnesses[i][t].unwrap()]);
            }
        }
    }
    Ok(ShellingDocument {
        poset: poset.content_hash(),
        chains: order.to_vec(),
        witnesses: Some(triples),
    })
}

/// Counts chains whose every interior level has a prior swap. For a
/// verified shelling these are the chains whose attachment closes a top
/// dimensional cycle, so the count equals the top reduced Betti number.
pub fn homology_facet_count(poset: &GradedPoset, order: &[Chain]) -> Result<usize, ShellingError> {
    let len = validate_order(poset, order)?;
    let witnesses = swap_witnesses(order, len);
    Ok(order
        .iter()
        .enumerate()
        .filter(|&(i, _)| (1..len.saturating_sub(1)).all(|t| witnesses[i][t].is_some()))
        .count())
}

/// Searches for a shelling order by backtracking over chain placements.
/// `node_budget` caps recursion entries. Distinguishes "no order exists"
/// from running out of budget or time.
pub fn brute_force_shelling(
    poset: &GradedPoset,
    node_budget: u64,
    time_limit: Option<Duration>,
) -> Result<Vec<Chain>, BruteForceError> {
    let chains = poset.enumerate_maximal_chains(DEFAULT_CHAIN_BUDGET).map_err(ShellingError::from)?;
    let len = validate_order(poset, &chains).map_err(BruteForceError::Structural)?;
    if chains.len() <= 1 || len < 3 {
        // Zero or one interior level: any order works, including this one.
        return Ok(chains);
    }

    struct Search<'a> {
        chains: &'a [Chain],
        len: usize,
        placed: Vec<usize>,
        used: Vec<bool>,
        buckets: HashMap<(usize, Chain), u32>,
        nodes: u64,
        node_budget: u64,
        deadline: Option<Instant>,
    }

    impl Search<'_> {
        fn hole(&self, chain_index: usize, t: usize) -> (usize, Chain) {
            let mut hole = self.chains[chain_index].clone();
            hole[t] = usize::MAX;
            (t, hole)
        }

        /// A candidate may follow the placed prefix iff every placed chain
        /// differs from it at some interior level that currently has a
        /// placed bucket neighbor.
        fn placeable(&self, candidate: usize) -> bool {
            let chain = &self.chains[candidate];
            let swap_ok: Vec<usize> = (1..self.len - 1)
                .filter(|&t| self.buckets.get(&self.hole(candidate, t)).is_some())
                .collect();
            self.placed.iter().all(|&j| {
                let earlier = &self.chains[j];
                swap_ok.iter().any(|&t| earlier[t] != chain[t])
            })
        }

        fn place(&mut self, candidate: usize) {
            for t in 1..self.len - 1 {
                *self.buckets.entry(self.hole(candidate, t)).or_insert(0) += 1;
            }
            self.placed.push(candidate);
            self.used[candidate] = true;
        }

        fn unplace(&mut self, candidate: usize) {
            self.placed.pop();
            self.used[candidate] = false;
            for t in 1..self.len - 1 {
                let key = self.hole(candidate, t);
                let count = self.buckets.get_mut(&key).unwrap();
                *count -= 1;
                if *count == 0 {
                    self.buckets.remove(&key);
                }
            }
        }

        fn dfs(&mut self) -> Result<bool, BruteForceError> {
            self.nodes += 1;
            if self.nodes > self.node_budget {
                return Err(BruteForceError::NodeBudget { budget: self.node_budget });
            }
            if let Some(deadline) = self.deadline {
                if Instant::now() > deadline {
                    return Err(BruteForceError::TimeLimit);
                }
            }
            if self.placed.len() == self.chains.len() {
                return Ok(true);
            }
            for candidate in 0..self.chains.len() {
                if self.used[candidate] || !self.placeable(candidate) {
                    continue;
                }
                self.place(candidate);
                if self.dfs()? {
                    return Ok(true);
                }
                self.unplace(candidate);
            }
            Ok(false)
        }
    }

    let mut search = Search {
        chains: &chains,
        len,
        placed: Vec::with_capacity(chains.len()),
        used: vec![false; chains.len()],
        buckets: HashMap::new(),
        nodes: 0,
        node_budget,
        deadline: time_limit.map(|d| Instant::now() + d),
    };
    if search.dfs()? {
        Ok(search.placed.iter().map(|&i| chains[i].clone()).collect())
    } else {
        Err(BruteForceError::NoShellingExists { nodes: search.nodes })
    }
}

/// The index of the single coordinate that grows along a unit cover step.
fn step_index(poset: &GradedPoset, lo: ElementId, hi: ElementId) -> u32 {
    let (a, b) = (poset.payload(lo), poset.payload(hi));
    for (idx, (x, y)) in a.iter().zip(b).enumerate() {
        if y == &(x + 1) {
            return idx as u32;
        }
    }
    unreachable!("cover step in a unit-modulus box changes one coordinate by one");
}

/// Builds the box `[0, z]` with sum-graded covers and orders its maximal
/// chains lexicographically by the word of incremented coordinate indices.
/// The ordering makes every chain's minimal new face explicit, so it is a
/// shelling; tests verify that directly.
pub fn el_shelling_divisibility(
    z: &LatticeVector,
) -> Result<(GradedPoset, Vec<Chain>), ShellingError> {
    let space = VeroneseSpace::plain(1, z.dim())?;
    let poset = space.build_interval(z)?;
    let mut chains = poset.enumerate_maximal_chains(DEFAULT_CHAIN_BUDGET)?;
    let mut keyed: Vec<(Vec<u32>, Chain)> = chains
        .drain(..)
        .map(|c| {
            let word: Vec<u32> = c.windows(2).map(|w| step_index(&poset, w[0], w[1])).collect();
            (word, c)
        })
        .collect();
    keyed.sort();
    debug_assert!(keyed.windows(2).all(|w| w[0].0 != w[1].0), "label words are distinct");
    Ok((poset, keyed.into_iter().map(|(_, c)| c).collect()))
}

/// Builds the interval `[0, z]` with ranks divisible by `m` and orders its
/// maximal chains by the concatenation of per-step sorted index words: the
/// lexicographically least unit-box word refining each selected chain.
pub fn rank_selected_shelling(
    z: &LatticeVector,
    m: u32,
) -> Result<(GradedPoset, Vec<Chain>), ShellingError> {
    if m == 0 || z.sum() % m as u64 != 0 {
        return Err(ShellingError::IndivisibleSum { modulus: m, sum: z.sum() });
    }
    let space = VeroneseSpace::plain(m, z.dim())?;
    let poset = space.build_interval(z)?;
    let mut chains = poset.enumerate_maximal_chains(DEFAULT_CHAIN_BUDGET)?;
    let mut keyed: Vec<(Vec<u32>, Chain)> = chains
        .drain(..)
        .map(|c| {
            let mut word = Vec::new();
            for w in c.windows(2) {
                let (a, b) = (poset.payload(w[0]), poset.payload(w[1]));
                for (idx, (x, y)) in a.iter().zip(b).enumerate() {
                    for _ in *x..*y {
                        word.push(idx as u32);
                    }
                }
            }
            (word, c)
        })
        .collect();
    keyed.sort();
    debug_assert!(keyed.windows(2).all(|w| w[0].0 != w[1].0), "step words are distinct");
    Ok((poset, keyed.into_iter().map(|(_, c)| c).collect()))
}
