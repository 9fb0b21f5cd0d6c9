//! Composable constructions that extend, append to, and restrict shelling
//! orders, plus the side conditions that keep each construction valid.
//!
//! All three constructions grow (or shrink) a grouped shelling of the
//! subposet generated by an ordered list of atoms:
//!
//! * [`combine_by_intervals`] adds one atom by splitting every new maximal
//!   chain at the highest "residue" element it touches (an element above the
//!   new atom that the established atoms do not generate), then stitching a
//!   shelling of the interval below the split to a grouped shelling of the
//!   generated part above it.
//! * [`append_interval_tail`] adds one atom by appending a grouped shelling
//!   of the full upper interval over it, chain by chain.
//! * [`restrict_to_atoms`] drops atoms, keeping the subsequence of chains
//!   whose atom survives.
//!
//! Each construction takes a `check` flag. When set, every structural
//! precondition is verified and the first failure is reported; when clear
//! the order is assembled as given. The module also provides recursive atom
//! orderings, verification of lexicographic edge labelings, and a
//! certificate that a given chain order cannot arise from any such labeling.

use std::collections::{BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::poset::{Chain, ElementId, GradedPoset, PosetError, DEFAULT_CHAIN_BUDGET};
use crate::shelling::{swap_witnesses, verify_a_shelling, verify_shelling, ShellingError};

#[derive(Debug, Error)]
pub enum CriteriaError {
    #[error("poset has no top element")]
    MissingTop,
    #[error("element {id} is not an atom")]
    NotAnAtom { id: ElementId },
    #[error("atom list has duplicates or contains the new atom")]
    BadAtomList,
    #[error("base order is not a grouped shelling: {source}")]
    Base {
        #[source]
        source: ShellingError,
    },
    #[error("lower order under {q} is not a shelling: {source}")]
    Lower {
        q: ElementId,
        #[source]
        source: ShellingError,
    },
    #[error("upper order over {q} is not a grouped shelling: {source}")]
    Upper {
        q: ElementId,
        #[source]
        source: ShellingError,
    },
    #[error("chain uses element {id} outside the expected subposet")]
    ChainEscapes { id: ElementId },
    #[error("block for {q} is malformed: {reason}")]
    MalformedBlock { q: ElementId, reason: &'static str },
    #[error("blocks {got:?} do not match the residue elements {expected:?}")]
    BlockSetMismatch { expected: Vec<ElementId>, got: Vec<ElementId> },
    #[error("upper atoms at {q} differ from the derived set")]
    UpperAtomsMismatch { q: ElementId },
    #[error("generated cover {p} of {q} cannot fall to {q_lower} through the generated part")]
    EdgeFalling { p: ElementId, q: ElementId, q_lower: ElementId },
    #[error("a chain through the new atom never meets a residue element")]
    ChainMissesResidue,
    #[error("cover {v} of {q} sits under residue element {above}, leaking chains between blocks")]
    ResidueLeak { q: ElementId, v: ElementId, above: ElementId },
    #[error("combined order would have {got} chains, extended subposet has {expected}")]
    CombinedCount { got: u64, expected: u64 },
    #[error("appended chain {index} has no swap below its first generated element")]
    NoEarlySwap { index: usize },
    #[error("kept atoms are not a subsequence of the atom order")]
    KeptNotSubsequence,
    #[error("dropped atom {b} shares cover {p} with the kept part, but no earlier kept atom sits under {p}")]
    RestrictionBlocked { b: ElementId, p: ElementId },
    #[error(transparent)]
    Poset(#[from] PosetError),
}

/// Membership mask of the subposet generated by `atoms`: the bottom plus
/// every element weakly above at least one listed atom.
pub fn generated_mask(poset: &GradedPoset, atoms: &[ElementId]) -> Vec<bool> {
    let mut mask = vec![false; poset.len()];
    mask[poset.bottom()] = true;
    for x in poset.ids() {
        if atoms.iter().any(|&b| poset.leq(b, x)) {
            mask[x] = true;
        }
    }
    mask
}

fn validate_atoms(
    poset: &GradedPoset,
    atoms: &[ElementId],
    new_atom: ElementId,
) -> Result<(), CriteriaError> {
    let mut seen = HashSet::with_capacity(atoms.len());
    for &a in atoms {
        if a >= poset.len() || poset.rank(a) != 1 {
            return Err(CriteriaError::NotAnAtom { id: a });
        }
        if !seen.insert(a) {
            return Err(CriteriaError::BadAtomList);
        }
    }
    if new_atom >= poset.len() || poset.rank(new_atom) != 1 {
        return Err(CriteriaError::NotAnAtom { id: new_atom });
    }
    if seen.contains(&new_atom) {
        return Err(CriteriaError::BadAtomList);
    }
    Ok(())
}

fn reverse_map(map_to_parent: &[ElementId]) -> HashMap<ElementId, ElementId> {
    map_to_parent.iter().enumerate().map(|(sub, &parent)| (parent, sub)).collect()
}

fn map_chain(
    rev: &HashMap<ElementId, ElementId>,
    chain: &[ElementId],
) -> Result<Chain, CriteriaError> {
    chain
        .iter()
        .map(|&x| rev.get(&x).copied().ok_or(CriteriaError::ChainEscapes { id: x }))
        .collect()
}

fn map_chains(
    rev: &HashMap<ElementId, ElementId>,
    chains: &[Chain],
) -> Result<Vec<Chain>, CriteriaError> {
    chains.iter().map(|c| map_chain(rev, c)).collect()
}

/// Verifies that `base` is a grouped shelling of the subposet of `poset`
/// generated by `atoms`, with chains given in parent-poset ids.
fn verify_grouped_base(
    poset: &GradedPoset,
    atoms: &[ElementId],
    base: &[Chain],
) -> Result<(), CriteriaError> {
    let (sub, map) = poset.atom_generated_subposet(atoms)?;
    let rev = reverse_map(&map);
    let chains = map_chains(&rev, base)?;
    let atom_ids = atoms
        .iter()
        .map(|a| rev.get(a).copied().ok_or(CriteriaError::ChainEscapes { id: *a }))
        .collect::<Result<Vec<_>, _>>()?;
    verify_a_shelling(&sub, &chains, &atom_ids)
        .map_err(|source| CriteriaError::Base { source })
}

/// The residue structure of `poset` relative to `atoms` and `new_atom`:
/// the elements weakly above `new_atom` that no established atom generates,
/// and, for each, the covers with no residue element weakly above them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecompositionContext {
    /// Residue elements in rank-then-id order. Always contains `new_atom`.
    pub residue: Vec<ElementId>,
    /// For `residue[k]`, its covers outside the shadow of the residue,
    /// in id order. Chains leaving `residue[k]` for good must start here.
    pub upper_atoms: Vec<Vec<ElementId>>,
}

/// Computes the residue elements and their outward covers directly from the
/// poset. Closed-form descriptions of the same data can be checked against
/// this function.
pub fn compute_context(
    poset: &GradedPoset,
    atoms: &[ElementId],
    new_atom: ElementId,
) -> Result<DecompositionContext, CriteriaError> {
    validate_atoms(poset, atoms, new_atom)?;
    let mask = generated_mask(poset, atoms);
    // Canonical ids ascend by (rank, payload), so id order is rank order.
    let residue: Vec<ElementId> =
        poset.ids().filter(|&x| poset.leq(new_atom, x) && !mask[x]).collect();
    let upper_atoms = residue
        .iter()
        .map(|&q| {
            poset
                .upper_covers(q)
                .iter()
                .copied()
                .filter(|&u| !residue.iter().any(|&r| poset.leq(u, r)))
                .collect()
        })
        .collect();
    Ok(DecompositionContext { residue, upper_atoms })
}

/// Checks that every generated cover of a residue element can follow it one
/// step down: for each `p` in the generated part covering a residue element
/// `q`, and each cover step from `q` down to the bottom or to another
/// residue element `q_lower`, some generated `p_mid` satisfies
/// `p` covers `p_mid` covers `q_lower`.
pub fn check_edge_falling(
    poset: &GradedPoset,
    mask: &[bool],
    residue: &[ElementId],
) -> Result<(), CriteriaError> {
    let in_residue: HashSet<ElementId> = residue.iter().copied().collect();
    let bottom = poset.bottom();
    for &q in residue {
        for &p in poset.upper_covers(q) {
            if !mask[p] {
                continue;
            }
            for &q_lower in poset.lower_covers(q) {
                if q_lower != bottom && !in_residue.contains(&q_lower) {
                    continue;
                }
                let ok = poset
                    .lower_covers(p)
                    .iter()
                    .any(|&pm| mask[pm] && poset.covers(q_lower, pm));
                if !ok {
                    return Err(CriteriaError::EdgeFalling { p, q, q_lower });
                }
            }
        }
    }
    Ok(())
}

/// One residue element's contribution to [`combine_by_intervals`]: a
/// shelling of the interval from the new atom up to `q`, and a grouped
/// shelling of the part of `[q, top]` generated by `upper_atoms`.
#[derive(Debug, Clone)]
pub struct DecompositionBlock {
    pub q: ElementId,
    /// Shelling of `[new_atom, q]`; each chain runs from the new atom to `q`.
    pub lower: Vec<Chain>,
    /// Atom order over `q` for the upper subposet. Every entry covers `q`
    /// and has no residue element weakly above it. Empty exactly when `q`
    /// is the top.
    pub upper_atoms: Vec<ElementId>,
    /// Grouped shelling of the subposet of `[q, top]` generated by
    /// `upper_atoms`; each chain runs from `q` to the top.
    pub upper: Vec<Chain>,
}

/// Extends a grouped shelling by one atom via interval decomposition.
///
/// Every maximal chain through the new atom splits at the highest residue
/// element it touches; the block for that element contributes the chain as
/// bottom + lower part + upper part. The combined order lists `base` first,
/// then each block's product order (lower outer, upper inner), blocks
/// ascending by rank then id. Residue elements whose outward cover set is
/// empty contribute no chains and take no block.
pub fn combine_by_intervals(
    poset: &GradedPoset,
    atoms: &[ElementId],
    new_atom: ElementId,
    base: &[Chain],
    blocks: &[DecompositionBlock],
    check: bool,
) -> Result<Vec<Chain>, CriteriaError> {
    let top = poset.top().ok_or(CriteriaError::MissingTop)?;
    validate_atoms(poset, atoms, new_atom)?;

    let mut ordered: Vec<&DecompositionBlock> = blocks.iter().collect();
    ordered.sort_by_key(|b| (poset.rank(b.q), b.q));
    for pair in ordered.windows(2) {
        if pair[0].q == pair[1].q {
            return Err(CriteriaError::MalformedBlock { q: pair[0].q, reason: "duplicate block" });
        }
    }
    for b in &ordered {
        if b.lower.is_empty() {
            return Err(CriteriaError::MalformedBlock { q: b.q, reason: "empty lower order" });
        }
        for low in &b.lower {
            if low.first() != Some(&new_atom) || low.last() != Some(&b.q) {
                return Err(CriteriaError::MalformedBlock {
                    q: b.q,
                    reason: "lower chain endpoints",
                });
            }
        }
        if b.q == top {
            if !b.upper_atoms.is_empty() || b.upper != vec![vec![top]] {
                return Err(CriteriaError::MalformedBlock {
                    q: b.q,
                    reason: "top block must carry the trivial upper chain",
                });
            }
        } else {
            if b.upper_atoms.is_empty() || b.upper.is_empty() {
                return Err(CriteriaError::MalformedBlock { q: b.q, reason: "empty upper order" });
            }
            for up in &b.upper {
                if up.first() != Some(&b.q) || up.last() != Some(&top) {
                    return Err(CriteriaError::MalformedBlock {
                        q: b.q,
                        reason: "upper chain endpoints",
                    });
                }
            }
        }
    }

    if check {
        verify_grouped_base(poset, atoms, base)?;
        let ctx = compute_context(poset, atoms, new_atom)?;

        // Blocks must cover exactly the residue elements that contribute
        // chains: the top if present, plus those with outward covers.
        let expected: Vec<ElementId> = ctx
            .residue
            .iter()
            .zip(&ctx.upper_atoms)
            .filter(|&(&r, ua)| r == top || !ua.is_empty())
            .map(|(&r, _)| r)
            .collect();
        let got: Vec<ElementId> = ordered.iter().map(|b| b.q).collect();
        if got != expected {
            return Err(CriteriaError::BlockSetMismatch { expected, got });
        }
        for b in &ordered {
            let k = ctx.residue.iter().position(|&r| r == b.q).expect("block set checked");
            let mut listed = b.upper_atoms.clone();
            listed.sort_unstable();
            if listed != ctx.upper_atoms[k] {
                return Err(CriteriaError::UpperAtomsMismatch { q: b.q });
            }
        }

        let mask = generated_mask(poset, atoms);
        check_edge_falling(poset, &mask, &ctx.residue)?;

        // Split integrity: each chain through the new atom has a highest
        // residue element, and its next step leaves the residue's shadow.
        let in_residue: HashSet<ElementId> = ctx.residue.iter().copied().collect();
        let through =
            poset.enumerate_chains_between(new_atom, top, None, DEFAULT_CHAIN_BUDGET)?;
        for chain in &through {
            let hit = chain
                .iter()
                .rposition(|x| in_residue.contains(x))
                .ok_or(CriteriaError::ChainMissesResidue)?;
            if hit + 1 < chain.len() {
                let v = chain[hit + 1];
                if let Some(&above) = ctx.residue.iter().find(|&&r| poset.leq(v, r)) {
                    return Err(CriteriaError::ResidueLeak { q: chain[hit], v, above });
                }
            }
        }

        for b in &ordered {
            let (iv, map) = poset.closed_interval(new_atom, b.q)?;
            let rev = reverse_map(&map);
            let lows = map_chains(&rev, &b.lower)?;
            verify_shelling(&iv, &lows)
                .map_err(|source| CriteriaError::Lower { q: b.q, source })?;

            let (iv2, map2) = poset.closed_interval(b.q, top)?;
            let rev2 = reverse_map(&map2);
            let ua_iv = b
                .upper_atoms
                .iter()
                .map(|u| rev2.get(u).copied().ok_or(CriteriaError::ChainEscapes { id: *u }))
                .collect::<Result<Vec<_>, _>>()?;
            let (sub, map3) = iv2.atom_generated_subposet(&ua_iv)?;
            let rev3 = reverse_map(&map3);
            let ups = map_chains(&rev3, &map_chains(&rev2, &b.upper)?)?;
            let ua_sub = ua_iv
                .iter()
                .map(|u| rev3.get(u).copied().ok_or(CriteriaError::ChainEscapes { id: *u }))
                .collect::<Result<Vec<_>, _>>()?;
            verify_a_shelling(&sub, &ups, &ua_sub)
                .map_err(|source| CriteriaError::Upper { q: b.q, source })?;
        }

        let mut extended = atoms.to_vec();
        extended.push(new_atom);
        let ext_mask = generated_mask(poset, &extended);
        let expected_count = poset.count_chains_between(poset.bottom(), top, Some(&ext_mask));
        let got_count = base.len() as u64
            + ordered.iter().map(|b| (b.lower.len() * b.upper.len()) as u64).sum::<u64>();
        if got_count != expected_count {
            return Err(CriteriaError::CombinedCount { got: got_count, expected: expected_count });
        }
    }

    let bottom = poset.bottom();
    let mut out = base.to_vec();
    for b in &ordered {
        for low in &b.lower {
            for up in &b.upper {
                let mut chain = Vec::with_capacity(1 + low.len() + up.len() - 1);
                chain.push(bottom);
                chain.extend_from_slice(low);
                chain.extend_from_slice(&up[1..]);
                out.push(chain);
            }
        }
    }
    Ok(out)
}

/// Extends a grouped shelling by one atom by appending the whole chain fan
/// of the upper interval `[new_atom, top]`.
///
/// Every maximal chain through the new atom is the bottom followed by a
/// maximal chain of that interval, so `upper` (a grouped shelling of the
/// full interval, with `upper_atoms` naming its atom order) splices on
/// wholesale. The side condition: an appended chain whose second element
/// the established atoms generate swaps straight into the base at the atom
/// level; every other appended chain must admit a swap to an earlier
/// appended chain strictly below its first generated element.
pub fn append_interval_tail(
    poset: &GradedPoset,
    atoms: &[ElementId],
    new_atom: ElementId,
    base: &[Chain],
    upper_atoms: &[ElementId],
    upper: &[Chain],
    check: bool,
) -> Result<Vec<Chain>, CriteriaError> {
    let top = poset.top().ok_or(CriteriaError::MissingTop)?;
    validate_atoms(poset, atoms, new_atom)?;
    if upper.is_empty() {
        return Err(CriteriaError::MalformedBlock { q: new_atom, reason: "empty upper order" });
    }
    for up in upper {
        if up.first() != Some(&new_atom) || up.last() != Some(&top) {
            return Err(CriteriaError::MalformedBlock {
                q: new_atom,
                reason: "upper chain endpoints",
            });
        }
    }

    if check {
        verify_grouped_base(poset, atoms, base)?;
        let (iv, map) = poset.closed_interval(new_atom, top)?;
        let rev = reverse_map(&map);
        let ups = map_chains(&rev, upper)?;
        let ua = upper_atoms
            .iter()
            .map(|u| rev.get(u).copied().ok_or(CriteriaError::ChainEscapes { id: *u }))
            .collect::<Result<Vec<_>, _>>()?;
        verify_a_shelling(&iv, &ups, &ua)
            .map_err(|source| CriteriaError::Upper { q: new_atom, source })?;

        let mask = generated_mask(poset, atoms);
        let len = upper[0].len();
        let witnesses = swap_witnesses(upper, len);
        for (index, chain) in upper.iter().enumerate() {
            if chain.len() < 2 || mask[chain[1]] {
                continue;
            }
            let first_generated =
                chain.iter().position(|&x| mask[x]).unwrap_or(chain.len());
            let limit = first_generated.min(len - 1);
            if !(1..limit).any(|t| witnesses[index][t].is_some()) {
                return Err(CriteriaError::NoEarlySwap { index });
            }
        }
    }

    let bottom = poset.bottom();
    let mut out = base.to_vec();
    for up in upper {
        let mut chain = Vec::with_capacity(up.len() + 1);
        chain.push(bottom);
        chain.extend_from_slice(up);
        out.push(chain);
    }
    Ok(out)
}

/// Restricts a grouped shelling to the chains whose atom lies in `kept`.
///
/// `kept` must be a subsequence of `atoms` (order induced). The subsequence
/// of a grouped shelling stays grouped; it stays a shelling outright when
/// `kept` is a prefix, and otherwise under the replacement condition: every
/// cover that a dropped atom shares with the kept part must also cover a
/// kept atom listed earlier than the dropped one.
pub fn restrict_to_atoms(
    poset: &GradedPoset,
    atoms: &[ElementId],
    kept: &[ElementId],
    base: &[Chain],
    check: bool,
) -> Result<Vec<Chain>, CriteriaError> {
    for &a in atoms {
        if a >= poset.len() || poset.rank(a) != 1 {
            return Err(CriteriaError::NotAnAtom { id: a });
        }
    }
    let kept_set: HashSet<ElementId> = kept.iter().copied().collect();
    if kept_set.len() != kept.len() {
        return Err(CriteriaError::KeptNotSubsequence);
    }
    let induced: Vec<ElementId> =
        atoms.iter().copied().filter(|a| kept_set.contains(a)).collect();
    if induced != kept {
        return Err(CriteriaError::KeptNotSubsequence);
    }

    if check {
        verify_grouped_base(poset, atoms, base)?;
        let is_prefix = atoms[..kept.len()] == *kept;
        if !is_prefix {
            let kept_mask = generated_mask(poset, kept);
            for (bpos, &b) in atoms.iter().enumerate() {
                if kept_set.contains(&b) {
                    continue;
                }
                for &p in poset.upper_covers(b) {
                    if !kept_mask[p] {
                        continue;
                    }
                    let ok = atoms[..bpos]
                        .iter()
                        .any(|&b2| kept_set.contains(&b2) && poset.covers(b2, p));
                    if !ok {
                        return Err(CriteriaError::RestrictionBlocked { b, p });
                    }
                }
            }
        }
    }

    Ok(base
        .iter()
        .filter(|c| c.len() >= 2 && kept_set.contains(&c[1]))
        .cloned()
        .collect())
}

/// One node of a recursive atom ordering for the interval from `floor` to
/// the top: the atom order chosen at the floor, and one child per atom for
/// the interval above it, in the same indexing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecursiveAtomOrder {
    pub atoms: Vec<ElementId>,
    pub children: Vec<RecursiveAtomOrder>,
}

#[derive(Debug, Error)]
pub enum RaoError {
    #[error("node at floor {floor} lists a wrong atom set")]
    AtomSetMismatch { floor: ElementId },
    #[error("node at floor {floor} has {children} children for {atoms} atoms")]
    ArityMismatch { floor: ElementId, atoms: usize, children: usize },
    #[error("atoms over earlier siblings must head the order at floor {floor}")]
    PrefixViolated { floor: ElementId },
    #[error(
        "at floor {floor}: {earlier} and {later} share bound {bound}, but no cover of {later} \
         under that bound sits over an earlier atom"
    )]
    CommonBound { floor: ElementId, earlier: ElementId, later: ElementId, bound: ElementId },
    #[error("no recursive atom ordering exists")]
    NotFound,
    #[error("search exceeded {budget} nodes")]
    Budget { budget: u64 },
}

/// Verifies a recursive atom ordering: at every node, atoms lying over an
/// earlier sibling of the floor head the order, and any two atoms with a
/// common upper bound admit, under that bound, a cover of the later atom
/// that also sits over some earlier atom.
pub fn verify_recursive_atom_ordering(
    poset: &GradedPoset,
    tree: &RecursiveAtomOrder,
) -> Result<(), RaoError> {
    verify_rao_node(poset, poset.bottom(), &BTreeSet::new(), tree)
}

fn verify_rao_node(
    poset: &GradedPoset,
    floor: ElementId,
    required_first: &BTreeSet<ElementId>,
    node: &RecursiveAtomOrder,
) -> Result<(), RaoError> {
    let actual: BTreeSet<ElementId> = poset.upper_covers(floor).iter().copied().collect();
    let listed: BTreeSet<ElementId> = node.atoms.iter().copied().collect();
    if listed != actual || listed.len() != node.atoms.len() {
        return Err(RaoError::AtomSetMismatch { floor });
    }
    if node.children.len() != node.atoms.len() {
        return Err(RaoError::ArityMismatch {
            floor,
            atoms: node.atoms.len(),
            children: node.children.len(),
        });
    }
    if required_first.len() > node.atoms.len() {
        return Err(RaoError::PrefixViolated { floor });
    }
    let head: BTreeSet<ElementId> =
        node.atoms[..required_first.len()].iter().copied().collect();
    if &head != required_first {
        return Err(RaoError::PrefixViolated { floor });
    }
    for j in 1..node.atoms.len() {
        let later = node.atoms[j];
        for i in 0..j {
            let earlier = node.atoms[i];
            for y in poset.ids() {
                if !(poset.leq(earlier, y) && poset.leq(later, y)) {
                    continue;
                }
                let ok = poset.upper_covers(later).iter().any(|&z| {
                    poset.leq(z, y) && node.atoms[..j].iter().any(|&am| poset.leq(am, z))
                });
                if !ok {
                    return Err(RaoError::CommonBound { floor, earlier, later, bound: y });
                }
            }
        }
    }
    for (i, child) in node.children.iter().enumerate() {
        let ai = node.atoms[i];
        let req: BTreeSet<ElementId> = poset
            .upper_covers(ai)
            .iter()
            .copied()
            .filter(|&z| node.atoms[..i].iter().any(|&aj| poset.leq(aj, z)))
            .collect();
        verify_rao_node(poset, ai, &req, child)?;
    }
    Ok(())
}

/// Searches for a recursive atom ordering by backtracking, memoized on
/// (floor, required head set). `budget` caps total search nodes.
pub fn find_recursive_atom_ordering(
    poset: &GradedPoset,
    budget: u64,
) -> Result<RecursiveAtomOrder, RaoError> {
    let mut nodes = 0u64;
    let mut memo = HashMap::new();
    match search_rao(poset, poset.bottom(), &BTreeSet::new(), budget, &mut nodes, &mut memo)? {
        Some(tree) => Ok(tree),
        None => Err(RaoError::NotFound),
    }
}

type RaoMemo = HashMap<(ElementId, Vec<ElementId>), Option<RecursiveAtomOrder>>;

fn search_rao(
    poset: &GradedPoset,
    floor: ElementId,
    required: &BTreeSet<ElementId>,
    budget: u64,
    nodes: &mut u64,
    memo: &mut RaoMemo,
) -> Result<Option<RecursiveAtomOrder>, RaoError> {
    let key = (floor, required.iter().copied().collect::<Vec<_>>());
    if let Some(hit) = memo.get(&key) {
        return Ok(hit.clone());
    }
    let cands = poset.upper_covers(floor).to_vec();
    let result =
        extend_rao(poset, floor, required, &cands, &mut Vec::new(), budget, nodes, memo)?;
    memo.insert(key, result.clone());
    Ok(result)
}

#[allow(clippy::too_many_arguments)]
fn extend_rao(
    poset: &GradedPoset,
    floor: ElementId,
    required: &BTreeSet<ElementId>,
    cands: &[ElementId],
    chosen: &mut Vec<ElementId>,
    budget: u64,
    nodes: &mut u64,
    memo: &mut RaoMemo,
) -> Result<Option<RecursiveAtomOrder>, RaoError> {
    *nodes += 1;
    if *nodes > budget {
        return Err(RaoError::Budget { budget });
    }
    if chosen.len() == cands.len() {
        let mut children = Vec::with_capacity(chosen.len());
        for (i, &ai) in chosen.iter().enumerate() {
            let req: BTreeSet<ElementId> = poset
                .upper_covers(ai)
                .iter()
                .copied()
                .filter(|&z| chosen[..i].iter().any(|&aj| poset.leq(aj, z)))
                .collect();
            match search_rao(poset, ai, &req, budget, nodes, memo)? {
                Some(child) => children.push(child),
                None => return Ok(None),
            }
        }
        return Ok(Some(RecursiveAtomOrder { atoms: chosen.clone(), children }));
    }
    for &a in cands {
        if chosen.contains(&a) {
            continue;
        }
        if chosen.len() < required.len() && !required.contains(&a) {
            continue;
        }
        let pair_ok = chosen.iter().all(|&earlier| {
            poset.ids().all(|y| {
                if !(poset.leq(earlier, y) && poset.leq(a, y)) {
                    return true;
                }
                poset.upper_covers(a).iter().any(|&z| {
                    poset.leq(z, y) && chosen.iter().any(|&am| poset.leq(am, z))
                })
            })
        });
        if !pair_ok {
            continue;
        }
        chosen.push(a);
        if let Some(tree) =
            extend_rao(poset, floor, required, cands, chosen, budget, nodes, memo)?
        {
            return Ok(Some(tree));
        }
        chosen.pop();
    }
    Ok(None)
}

#[derive(Debug, Error)]
pub enum ElError {
    #[error("cover ({lo}, {hi}) has no label")]
    MissingLabel { lo: ElementId, hi: ElementId },
    #[error("interval [{x}, {y}] has no weakly increasing chain")]
    NoIncreasing { x: ElementId, y: ElementId },
    #[error("interval [{x}, {y}] has more than one weakly increasing chain")]
    ManyIncreasing { x: ElementId, y: ElementId },
    #[error("the increasing chain of [{x}, {y}] is not strictly lex-least")]
    NotLexLeast { x: ElementId, y: ElementId },
    #[error(transparent)]
    Poset(#[from] PosetError),
}

/// Checks an edge labeling for the lexicographic chain property: every
/// interval has exactly one weakly increasing maximal chain, and that
/// chain's label word is strictly lex-smaller than every other's.
pub fn verify_el_labeling(
    poset: &GradedPoset,
    labels: &HashMap<(ElementId, ElementId), i64>,
    chain_budget: u64,
) -> Result<(), ElError> {
    for (lo, hi) in poset.cover_pairs() {
        if !labels.contains_key(&(lo, hi)) {
            return Err(ElError::MissingLabel { lo, hi });
        }
    }
    for x in poset.ids() {
        for y in poset.ids() {
            if x == y || !poset.leq(x, y) {
                continue;
            }
            let chains = poset.enumerate_chains_between(x, y, None, chain_budget)?;
            let words: Vec<Vec<i64>> = chains
                .iter()
                .map(|c| c.windows(2).map(|w| labels[&(w[0], w[1])]).collect())
                .collect();
            let mut rising =
                words.iter().enumerate().filter(|(_, w)| w.windows(2).all(|p| p[0] <= p[1]));
            let (lead, lead_word) = match rising.next() {
                Some(hit) => hit,
                None => return Err(ElError::NoIncreasing { x, y }),
            };
            if rising.next().is_some() {
                return Err(ElError::ManyIncreasing { x, y });
            }
            for (k, word) in words.iter().enumerate() {
                if k != lead && word <= lead_word {
                    return Err(ElError::NotLexLeast { x, y });
                }
            }
        }
    }
    Ok(())
}

/// A pair of cover edges out of `base` that the chain order forces to carry
/// equal labels although a two-middle diamond forces them distinct.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElObstruction {
    pub base: ElementId,
    pub first: ElementId,
    pub second: ElementId,
}

/// Looks for proof that no lexicographic edge labeling lists the maximal
/// chains compatibly with `order`.
///
/// Listing chains in label-word order forces, at each pair's first
/// divergence, the earlier chain's edge label to be at most the later
/// chain's. Independently, when exactly two elements sit between some `x`
/// and a common bound, the two cover edges out of `x` must carry distinct
/// labels. A cycle of forced inequalities through such a pair is a
/// contradiction. `None` means no contradiction was found, not that a
/// labeling exists.
pub fn el_consistency_obstruction(
    poset: &GradedPoset,
    order: &[Chain],
) -> Option<ElObstruction> {
    let pairs = poset.cover_pairs();
    let index: HashMap<(ElementId, ElementId), usize> =
        pairs.iter().enumerate().map(|(k, &e)| (e, k)).collect();

    let mut edge_sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); pairs.len()];
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            let (a, b) = (&order[i], &order[j]);
            let limit = a.len().min(b.len());
            let Some(t) = (0..limit).find(|&t| a[t] != b[t]) else { continue };
            if t == 0 {
                continue;
            }
            let (Some(&ea), Some(&eb)) =
                (index.get(&(a[t - 1], a[t])), index.get(&(b[t - 1], b[t])))
            else {
                continue;
            };
            edge_sets[ea].insert(eb);
        }
    }
    let adj: Vec<Vec<usize>> = edge_sets.into_iter().map(|s| s.into_iter().collect()).collect();

    let mut distinct: Vec<(usize, usize, ElementId, ElementId, ElementId)> = Vec::new();
    for x in poset.ids() {
        let ups = poset.upper_covers(x);
        for ui in 0..ups.len() {
            for vi in ui + 1..ups.len() {
                let (u, v) = (ups[ui], ups[vi]);
                let closes_two_middle_diamond = poset.upper_covers(u).iter().any(|&y| {
                    poset.covers(v, y)
                        && ups.iter().filter(|&&m| poset.covers(m, y)).count() == 2
                });
                if closes_two_middle_diamond {
                    distinct.push((index[&(x, u)], index[&(x, v)], x, u, v));
                }
            }
        }
    }

    let comp = tarjan_scc(&adj);
    distinct
        .iter()
        .find(|&&(e1, e2, ..)| comp[e1] == comp[e2])
        .map(|&(_, _, base, first, second)| ElObstruction { base, first, second })
}

/// Strongly connected components; returns a component id per node.
fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut comp = vec![usize::MAX; n];
    let mut index = vec![usize::MAX; n];
    let mut low = vec![usize::MAX; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut counter = 0usize;
    let mut components = 0usize;

    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut frames: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&(v, cursor)) = frames.last() {
            if cursor < adj[v].len() {
                frames.last_mut().expect("frame present").1 += 1;
                let w = adj[v][cursor];
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    frames.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                frames.pop();
                if let Some(&(parent, _)) = frames.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("scc stack nonempty");
                        on_stack[w] = false;
                        comp[w] = components;
                        if w == v {
                            break;
                        }
                    }
                    components += 1;
                }
            }
        }
    }
    comp
}

/// Named elements of [`interleaving_demo`].
#[derive(Debug, Clone, Copy)]
pub struct DemoIds {
    pub old_atom: ElementId,
    pub new_atom: ElementId,
    /// Residue elements in rank order: the new atom, two middles that both
    /// cover it, and two upper elements each covering both middles.
    pub q: [ElementId; 5],
    pub b2: ElementId,
    pub c2: ElementId,
    pub s: ElementId,
    pub top: ElementId,
}

/// A small graded poset whose combined order interleaves the two middle
/// residue elements across the two upper ones. The interleaving pins the
/// two cover labels out of the new atom to equal values in any compatible
/// lexicographic labeling, while a two-middle diamond forces them apart, so
/// the combined order is a shelling no such labeling can produce.
pub fn interleaving_demo() -> (GradedPoset, DemoIds) {
    let payloads: Vec<Vec<u32>> = vec![
        vec![0, 0], // bottom
        vec![1, 0], // established atom
        vec![1, 1], // new atom, q[0]
        vec![2, 0], // b2
        vec![2, 1], // c2
        vec![2, 2], // q[1]
        vec![2, 3], // q[2]
        vec![3, 0], // s
        vec![3, 1], // q[3]
        vec![3, 2], // q[4]
        vec![4, 0], // top
    ];
    let covers = [
        (0, 1),
        (0, 2),
        (1, 3),
        (1, 4),
        (2, 4),
        (2, 5),
        (2, 6),
        (3, 7),
        (4, 7),
        (5, 7),
        (5, 8),
        (5, 9),
        (6, 7),
        (6, 8),
        (6, 9),
        (7, 10),
        (8, 10),
        (9, 10),
    ];
    let (poset, perm) = GradedPoset::build(payloads, &covers).expect("demo poset is well formed");
    let ids = DemoIds {
        old_atom: perm[1],
        new_atom: perm[2],
        q: [perm[2], perm[5], perm[6], perm[8], perm[9]],
        b2: perm[3],
        c2: perm[4],
        s: perm[7],
        top: perm[10],
    };
    (poset, ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shelling::el_shelling_divisibility;
    use crate::veronese::{LatticeVector, VeroneseSpace};

    fn box_poset(coords: &[u32]) -> GradedPoset {
        let space = VeroneseSpace::plain(1, coords.len()).expect("valid dimension");
        space.build_interval(&LatticeVector::new(coords.to_vec()).unwrap()).unwrap()
    }

    fn demo_blocks(d: &DemoIds) -> Vec<DecompositionBlock> {
        let [q1, q2, q3, q4, q5] = d.q;
        vec![
            DecompositionBlock {
                q: q1,
                lower: vec![vec![q1]],
                upper_atoms: vec![d.c2],
                upper: vec![vec![q1, d.c2, d.s, d.top]],
            },
            DecompositionBlock {
                q: q2,
                lower: vec![vec![q1, q2]],
                upper_atoms: vec![d.s],
                upper: vec![vec![q2, d.s, d.top]],
            },
            DecompositionBlock {
                q: q3,
                lower: vec![vec![q1, q3]],
                upper_atoms: vec![d.s],
                upper: vec![vec![q3, d.s, d.top]],
            },
            DecompositionBlock {
                q: q4,
                lower: vec![vec![q1, q2, q4], vec![q1, q3, q4]],
                upper_atoms: vec![d.top],
                upper: vec![vec![q4, d.top]],
            },
            DecompositionBlock {
                q: q5,
                lower: vec![vec![q1, q2, q5], vec![q1, q3, q5]],
                upper_atoms: vec![d.top],
                upper: vec![vec![q5, d.top]],
            },
        ]
    }

    fn demo_base(poset: &GradedPoset, d: &DemoIds) -> Vec<Chain> {
        let bottom = poset.bottom();
        vec![
            vec![bottom, d.old_atom, d.b2, d.s, d.top],
            vec![bottom, d.old_atom, d.c2, d.s, d.top],
        ]
    }

    #[test]
    fn demo_context_matches_hand_computation() {
        let (poset, d) = interleaving_demo();
        let ctx = compute_context(&poset, &[d.old_atom], d.new_atom).unwrap();
        assert_eq!(ctx.residue, d.q.to_vec());
        assert_eq!(
            ctx.upper_atoms,
            vec![vec![d.c2], vec![d.s], vec![d.s], vec![d.top], vec![d.top]]
        );
    }

    #[test]
    fn demo_combination_shells_but_defeats_edge_labelings() {
        let (poset, d) = interleaving_demo();
        let base = demo_base(&poset, &d);
        let blocks = demo_blocks(&d);
        let order =
            combine_by_intervals(&poset, &[d.old_atom], d.new_atom, &base, &blocks, true)
                .unwrap();
        assert_eq!(order.len(), 9);
        verify_shelling(&poset, &order).unwrap();
        verify_a_shelling(&poset, &order, &[d.old_atom, d.new_atom]).unwrap();

        // The four chains through the upper residue elements interleave the
        // two middles.
        let [q1, q2, q3, q4, q5] = d.q;
        let bottom = poset.bottom();
        let pos = |target: &[ElementId]| {
            order.iter().position(|c| c == target).expect("chain present")
        };
        let p1 = pos(&[bottom, q1, q2, q4, d.top]);
        let p2 = pos(&[bottom, q1, q3, q4, d.top]);
        let p3 = pos(&[bottom, q1, q2, q5, d.top]);
        let p4 = pos(&[bottom, q1, q3, q5, d.top]);
        assert!(p1 < p2 && p2 < p3 && p3 < p4);

        let hit = el_consistency_obstruction(&poset, &order).expect("order defeats labelings");
        assert_eq!(hit.base, q1);
        assert_eq!((hit.first.min(hit.second), hit.first.max(hit.second)), (q2, q3));
    }

    #[test]
    fn lexicographic_orders_show_no_obstruction() {
        let (poset, order) =
            el_shelling_divisibility(&LatticeVector::new(vec![2, 1, 1]).unwrap()).unwrap();
        assert_eq!(el_consistency_obstruction(&poset, &order), None);
    }

    #[test]
    fn edge_falling_violation_is_reported_and_real() {
        // Two disjoint paths: bottom < new_atom < q < top and
        // bottom < b < w < top. The generated cover `top` of `q` cannot
        // fall to the new atom, and indeed no shelling order exists.
        let payloads = vec![
            vec![0u32, 0],
            vec![1, 0], // b
            vec![1, 1], // new atom
            vec![2, 0], // w over b
            vec![2, 1], // q over the new atom
            vec![3, 0], // top
        ];
        let covers = [(0, 1), (0, 2), (1, 3), (2, 4), (3, 5), (4, 5)];
        let (poset, perm) = GradedPoset::build(payloads, &covers).unwrap();
        let (b, new_atom, q, top) = (perm[1], perm[2], perm[4], perm[5]);

        let mask = generated_mask(&poset, &[b]);
        let err = check_edge_falling(&poset, &mask, &[new_atom, q]).unwrap_err();
        match err {
            CriteriaError::EdgeFalling { p, q: qq, q_lower } => {
                assert_eq!((p, qq, q_lower), (top, q, new_atom));
            }
            other => panic!("expected an edge-falling report, got {other:?}"),
        }

        let blocks = vec![DecompositionBlock {
            q,
            lower: vec![vec![new_atom, q]],
            upper_atoms: vec![top],
            upper: vec![vec![q, top]],
        }];
        let base = vec![vec![poset.bottom(), b, perm[3], top]];
        let err =
            combine_by_intervals(&poset, &[b], new_atom, &base, &blocks, true).unwrap_err();
        assert!(matches!(err, CriteriaError::EdgeFalling { .. }));

        // Without checks the order assembles, and the verifier rejects it.
        let order =
            combine_by_intervals(&poset, &[b], new_atom, &base, &blocks, false).unwrap();
        assert!(verify_shelling(&poset, &order).is_err());
    }

    #[test]
    fn appending_the_upper_fan_extends_a_box_shelling() {
        let poset = box_poset(&[1, 1, 1]);
        let id = |p: &[u32]| poset.id_by_payload(p).unwrap();
        let (a100, a010, a001) = (id(&[1, 0, 0]), id(&[0, 1, 0]), id(&[0, 0, 1]));
        let (_, el_order) =
            el_shelling_divisibility(&LatticeVector::new(vec![1, 1, 1]).unwrap()).unwrap();
        let base: Vec<Chain> =
            el_order.iter().filter(|c| c[1] != a001).cloned().collect();
        let upper = vec![
            vec![a001, id(&[0, 1, 1]), id(&[1, 1, 1])],
            vec![a001, id(&[1, 0, 1]), id(&[1, 1, 1])],
        ];
        let upper_atoms = vec![id(&[0, 1, 1]), id(&[1, 0, 1])];

        let order = append_interval_tail(
            &poset,
            &[a100, a010],
            a001,
            &base,
            &upper_atoms,
            &upper,
            true,
        )
        .unwrap();
        assert_eq!(order.len(), 6);
        verify_a_shelling(&poset, &order, &[a100, a010, a001]).unwrap();

        // An upper order that breaks its own atom grouping is rejected.
        let err = append_interval_tail(
            &poset,
            &[a100, a010],
            a001,
            &base,
            &[id(&[1, 0, 1]), id(&[0, 1, 1])],
            &upper,
            true,
        )
        .unwrap_err();
        assert!(matches!(err, CriteriaError::Upper { .. }));
    }

    #[test]
    fn appended_chains_need_an_early_swap() {
        // Same two-path poset as the edge-falling test: the single appended
        // chain's second element is not generated and has no swap below its
        // first generated element.
        let payloads = vec![
            vec![0u32, 0],
            vec![1, 0],
            vec![1, 1],
            vec![2, 0],
            vec![2, 1],
            vec![3, 0],
        ];
        let covers = [(0, 1), (0, 2), (1, 3), (2, 4), (3, 5), (4, 5)];
        let (poset, perm) = GradedPoset::build(payloads, &covers).unwrap();
        let (b, new_atom, w, q, top) = (perm[1], perm[2], perm[3], perm[4], perm[5]);
        let base = vec![vec![poset.bottom(), b, w, top]];
        let err = append_interval_tail(
            &poset,
            &[b],
            new_atom,
            &base,
            &[q],
            &[vec![new_atom, q, top]],
            true,
        )
        .unwrap_err();
        assert!(matches!(err, CriteriaError::NoEarlySwap { index: 0 }));
    }

    #[test]
    fn restriction_keeps_prefixes_and_gates_non_prefixes() {
        let poset = box_poset(&[1, 1, 1]);
        let id = |p: &[u32]| poset.id_by_payload(p).unwrap();
        let atoms = [id(&[1, 0, 0]), id(&[0, 1, 0]), id(&[0, 0, 1])];
        let (_, el_order) =
            el_shelling_divisibility(&LatticeVector::new(vec![1, 1, 1]).unwrap()).unwrap();

        let kept = [atoms[0], atoms[1]];
        let out = restrict_to_atoms(&poset, &atoms, &kept, &el_order, true).unwrap();
        assert_eq!(out, el_order[..4].to_vec());

        let kept = [atoms[0], atoms[2]];
        let err = restrict_to_atoms(&poset, &atoms, &kept, &el_order, true).unwrap_err();
        match err {
            CriteriaError::RestrictionBlocked { b, p } => {
                assert_eq!(b, atoms[1]);
                assert_eq!(p, id(&[0, 1, 1]));
            }
            other => panic!("expected a blocked restriction, got {other:?}"),
        }

        let err = restrict_to_atoms(&poset, &atoms, &[atoms[1], atoms[0]], &el_order, true)
            .unwrap_err();
        assert!(matches!(err, CriteriaError::KeptNotSubsequence));
    }

    #[test]
    fn recursive_atom_orderings_are_found_and_verified() {
        let poset = box_poset(&[1, 1, 1]);
        let tree = find_recursive_atom_ordering(&poset, 100_000).unwrap();
        verify_recursive_atom_ordering(&poset, &tree).unwrap();

        let mut broken = tree.clone();
        broken.atoms.pop();
        broken.children.pop();
        assert!(matches!(
            verify_recursive_atom_ordering(&poset, &broken),
            Err(RaoError::AtomSetMismatch { .. })
        ));
    }

    #[test]
    fn disconnected_proper_part_has_no_recursive_atom_ordering() {
        let payloads = vec![
            vec![0u32, 0],
            vec![1, 0],
            vec![1, 1],
            vec![2, 0],
            vec![2, 1],
            vec![3, 0],
        ];
        let covers = [(0, 1), (0, 2), (1, 3), (2, 4), (3, 5), (4, 5)];
        let (poset, _) = GradedPoset::build(payloads, &covers).unwrap();
        assert!(matches!(
            find_recursive_atom_ordering(&poset, 100_000),
            Err(RaoError::NotFound)
        ));
    }

    #[test]
    fn coordinate_labels_on_boxes_pass_the_labeling_check() {
        let poset = box_poset(&[2, 1, 1]);
        let labels: HashMap<(ElementId, ElementId), i64> = poset
            .cover_pairs()
            .into_iter()
            .map(|(lo, hi)| {
                let idx = poset
                    .payload(hi)
                    .iter()
                    .zip(poset.payload(lo))
                    .position(|(a, b)| a != b)
                    .expect("cover step changes a coordinate");
                ((lo, hi), idx as i64)
            })
            .collect();
        verify_el_labeling(&poset, &labels, DEFAULT_CHAIN_BUDGET).unwrap();
    }

    #[test]
    fn degenerate_labelings_are_rejected() {
        let poset = box_poset(&[1, 1]);
        let constant: HashMap<(ElementId, ElementId), i64> =
            poset.cover_pairs().into_iter().map(|e| (e, 0)).collect();
        assert!(matches!(
            verify_el_labeling(&poset, &constant, DEFAULT_CHAIN_BUDGET),
            Err(ElError::ManyIncreasing { .. })
        ));

        let falling: HashMap<(ElementId, ElementId), i64> = poset
            .cover_pairs()
            .into_iter()
            .map(|(lo, hi)| ((lo, hi), -(poset.rank(hi) as i64)))
            .collect();
        assert!(matches!(
            verify_el_labeling(&poset, &falling, DEFAULT_CHAIN_BUDGET),
            Err(ElError::NoIncreasing { .. })
        ));
    }

    #[test]
    fn block_bookkeeping_is_checked() {
        let (poset, d) = interleaving_demo();
        let base = demo_base(&poset, &d);

        let mut missing = demo_blocks(&d);
        missing.pop();
        let err =
            combine_by_intervals(&poset, &[d.old_atom], d.new_atom, &base, &missing, true)
                .unwrap_err();
        assert!(matches!(err, CriteriaError::BlockSetMismatch { .. }));

        let mut wrong_atoms = demo_blocks(&d);
        wrong_atoms[1].upper_atoms = vec![d.q[3]];
        wrong_atoms[1].upper = vec![vec![d.q[1], d.q[3], d.top]];
        let err =
            combine_by_intervals(&poset, &[d.old_atom], d.new_atom, &base, &wrong_atoms, true)
                .unwrap_err();
        assert!(matches!(err, CriteriaError::UpperAtomsMismatch { .. }));
    }
}
