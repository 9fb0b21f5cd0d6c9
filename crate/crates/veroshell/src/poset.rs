//! Finite graded posets with a unique bottom element, stored by explicit
//! cover relations. Element ids are canonical: sorted by (rank, payload).

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Index of an element inside one `GradedPoset`.
pub type ElementId = usize;

/// A maximal chain, as element ids from bottom to top.
pub type Chain = Vec<ElementId>;

/// Default cap on the number of maximal chains an enumeration may produce.
pub const DEFAULT_CHAIN_BUDGET: u64 = 5_000_000;

#[derive(Debug, Error)]
pub enum PosetError {
    #[error("poset has no elements")]
    Empty,
    #[error("payload length mismatch: element {index} has {got} coordinates, expected {expected}")]
    PayloadLength { index: usize, got: usize, expected: usize },
    #[error("duplicate payload at elements {first} and {second}")]
    DuplicatePayload { first: usize, second: usize },
    #[error("cover ({lo}, {hi}) references an unknown element")]
    CoverOutOfRange { lo: usize, hi: usize },
    #[error("cover ({lo}, {hi}) is a self-loop or duplicate")]
    BadCover { lo: usize, hi: usize },
    #[error("not graded: expected a unique minimal element, found {count}")]
    BottomNotUnique { count: usize },
    #[error("not graded: element {index} is not reachable from the bottom")]
    Unreachable { index: usize },
    #[error("not graded: cover ({lo}, {hi}) spans ranks {lo_rank} -> {hi_rank}")]
    RankSkip { lo: usize, hi: usize, lo_rank: u32, hi_rank: u32 },
    #[error("declared bottom {declared} does not match detected bottom {detected}")]
    BottomMismatch { declared: usize, detected: usize },
    #[error("declared top {declared:?} does not match detected top {detected:?}")]
    TopMismatch { declared: Option<usize>, detected: Option<usize> },
    #[error("operation requires a top element")]
    MissingTop,
    #[error("element id {id} out of range")]
    UnknownElement { id: usize },
    #[error("elements {x} and {y} are not comparable")]
    NotComparable { x: usize, y: usize },
    #[error("chain budget exceeded: poset has {count} maximal chains, budget {budget}")]
    ChainBudget { count: u64, budget: u64 },
    #[error("atom list contains id {id} which is not an atom")]
    NotAnAtom { id: usize },
    #[error("json: {0}")]
    Json(String),
}

/// Dense bit matrix; row x holds the ids reachable from x going up (including x).
#[derive(Debug, Clone)]
struct BitMatrix {
    words_per_row: usize,
    bits: Vec<u64>,
}

impl BitMatrix {
    fn new(rows: usize, cols: usize) -> Self {
        let words_per_row = cols.div_ceil(64);
        BitMatrix { words_per_row, bits: vec![0; rows * words_per_row] }
    }

    #[inline]
    fn set(&mut self, row: usize, col: usize) {
        self.bits[row * self.words_per_row + col / 64] |= 1u64 << (col % 64);
    }

    #[inline]
    fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.words_per_row + col / 64] >> (col % 64) & 1 == 1
    }

    fn or_row_into(&mut self, src: usize, dst: usize) {
        let w = self.words_per_row;
        let (s, d) = (src * w, dst * w);
        for i in 0..w {
            let v = self.bits[s + i];
            self.bits[d + i] |= v;
        }
    }
}

/// A finite graded poset with unique bottom (rank 0) and optional top.
///
/// Covers are stored in both directions and sorted; ids are assigned
/// canonically by (rank, payload), so rebuilding the same poset from any
/// permutation of its input yields identical ids.
#[derive(Debug, Clone)]
pub struct GradedPoset {
    payload_len: usize,
    payloads: Vec<Vec<u32>>,
    rank: Vec<u32>,
    upper: Vec<Vec<ElementId>>,
    lower: Vec<Vec<ElementId>>,
    bottom: ElementId,
    top: Option<ElementId>,
    up_closure: BitMatrix,
    by_payload: HashMap<Vec<u32>, ElementId>,
}

/// Serialized form: ids are positions in `elements`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosetFile {
    pub n: usize,
    pub elements: Vec<Vec<u32>>,
    pub covers: Vec<(usize, usize)>,
    pub bottom: usize,
    pub top: Option<usize>,
}

impl GradedPoset {
    /// Builds a graded poset from payloads and cover pairs `(lo, hi)`.
    ///
    /// Rejects inputs that are not graded: the bottom must be unique, every
    /// element reachable from it, and every cover must raise rank by exactly
    /// one (equivalently, longest and shortest cover paths from the bottom
    /// agree everywhere). Returns the poset and the id permutation
    /// `new_id = perm[input_index]`.
    pub fn build(
        elements: Vec<Vec<u32>>,
        covers: &[(usize, usize)],
    ) -> Result<(Self, Vec<ElementId>), PosetError> {
        if elements.is_empty() {
            return Err(PosetError::Empty);
        }
        let payload_len = elements[0].len();
        for (i, e) in elements.iter().enumerate() {
            if e.len() != payload_len {
                return Err(PosetError::PayloadLength { index: i, got: e.len(), expected: payload_len });
            }
        }
        let m = elements.len();
        let mut seen: HashMap<&[u32], usize> = HashMap::with_capacity(m);
        for (i, e) in elements.iter().enumerate() {
            if let Some(&first) = seen.get(e.as_slice()) {
                return Err(PosetError::DuplicatePayload { first, second: i });
            }
            seen.insert(e.as_slice(), i);
        }

        let mut upper = vec![Vec::new(); m];
        let mut lower = vec![Vec::new(); m];
        for &(lo, hi) in covers {
            if lo >= m || hi >= m {
                return Err(PosetError::CoverOutOfRange { lo, hi });
            }
            if lo == hi || upper[lo].contains(&hi) {
                return Err(PosetError::BadCover { lo, hi });
            }
            upper[lo].push(hi);
            lower[hi].push(lo);
        }

        let minimals: Vec<usize> = (0..m).filter(|&i| lower[i].is_empty()).collect();
        if minimals.len() != 1 {
            return Err(PosetError::BottomNotUnique { count: minimals.len() });
        }
        let bottom_in = minimals[0];

        // Shortest cover-path distance from the bottom is the candidate rank.
        let mut rank = vec![u32::MAX; m];
        rank[bottom_in] = 0;
        let mut queue = std::collections::VecDeque::from([bottom_in]);
        while let Some(x) = queue.pop_front() {
            for &y in &upper[x] {
                if rank[y] == u32::MAX {
                    rank[y] = rank[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        if let Some(i) = (0..m).find(|&i| rank[i] == u32::MAX) {
            return Err(PosetError::Unreachable { index: i });
        }
        for &(lo, hi) in covers {
            if rank[hi] != rank[lo] + 1 {
                return Err(PosetError::RankSkip { lo, hi, lo_rank: rank[lo], hi_rank: rank[hi] });
            }
        }

        let maximals: Vec<usize> = (0..m).filter(|&i| upper[i].is_empty()).collect();
        let top_in = if maximals.len() == 1 { Some(maximals[0]) } else { None };

        // Canonical ids: sort by (rank, payload).
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| rank[a].cmp(&rank[b]).then_with(|| elements[a].cmp(&elements[b])));
        let mut perm = vec![0usize; m];
        for (new, &old) in order.iter().enumerate() {
            perm[old] = new;
        }

        let mut payloads = vec![Vec::new(); m];
        let mut new_rank = vec![0u32; m];
        for (old, e) in elements.into_iter().enumerate() {
            new_rank[perm[old]] = rank[old];
            payloads[perm[old]] = e;
        }
        let mut new_upper = vec![Vec::new(); m];
        let mut new_lower = vec![Vec::new(); m];
        for old in 0..m {
            for &hi in &upper[old] {
                new_upper[perm[old]].push(perm[hi]);
            }
            for &lo in &lower[old] {
                new_lower[perm[old]].push(perm[lo]);
            }
        }
        for v in new_upper.iter_mut().chain(new_lower.iter_mut()) {
            v.sort_unstable();
        }

        let mut up_closure = BitMatrix::new(m, m);
        // Process top-down so each row already holds its upper covers' closures.
        for id in (0..m).rev() {
            up_closure.set(id, id);
            let ups: Vec<ElementId> = new_upper[id].clone();
            for y in ups {
                up_closure.or_row_into(y, id);
            }
        }

        let by_payload = payloads.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();

        Ok((
            GradedPoset {
                payload_len,
                payloads,
                rank: new_rank,
                upper: new_upper,
                lower: new_lower,
                bottom: perm[bottom_in],
                top: top_in.map(|t| perm[t]),
                up_closure,
                by_payload,
            },
            perm,
        ))
    }

    pub fn len(&self) -> usize {
        self.payloads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payloads.is_empty()
    }

    pub fn payload_len(&self) -> usize {
        self.payload_len
    }

    pub fn bottom(&self) -> ElementId {
        self.bottom
    }

    pub fn top(&self) -> Option<ElementId> {
        self.top
    }

    pub fn rank(&self, id: ElementId) -> u32 {
        self.rank[id]
    }

    /// Rank of the top element.
    pub fn height(&self) -> Result<u32, PosetError> {
        self.top.map(|t| self.rank[t]).ok_or(PosetError::MissingTop)
    }

    pub fn payload(&self, id: ElementId) -> &[u32] {
        &self.payloads[id]
    }

    pub fn id_by_payload(&self, payload: &[u32]) -> Option<ElementId> {
        self.by_payload.get(payload).copied()
    }

    pub fn upper_covers(&self, id: ElementId) -> &[ElementId] {
        &self.upper[id]
    }

    pub fn lower_covers(&self, id: ElementId) -> &[ElementId] {
        &self.lower[id]
    }

    pub fn ids(&self) -> impl Iterator<Item = ElementId> {
        0..self.payloads.len()
    }

    /// `x <= y` in the partial order.
    pub fn leq(&self, x: ElementId, y: ElementId) -> bool {
        self.up_closure.get(x, y)
    }

    pub fn covers(&self, lo: ElementId, hi: ElementId) -> bool {
        self.upper[lo].binary_search(&hi).is_ok()
    }

    /// Rank-1 elements; equivalently the upper covers of the bottom.
    pub fn atoms(&self) -> &[ElementId] {
        &self.upper[self.bottom]
    }

    /// All cover pairs `(lo, hi)`, sorted.
    pub fn cover_pairs(&self) -> Vec<(ElementId, ElementId)> {
        let mut out = Vec::new();
        for lo in self.ids() {
            for &hi in &self.upper[lo] {
                out.push((lo, hi));
            }
        }
        out
    }

    /// The subposet generated by a set of atoms: the bottom plus every
    /// element lying above at least one listed atom. Returns the poset and
    /// the map `sub_id -> parent_id`.
    ///
    /// The empty atom list yields the one-element poset on the bottom.
    pub fn atom_generated_subposet(
        &self,
        atoms: &[ElementId],
    ) -> Result<(GradedPoset, Vec<ElementId>), PosetError> {
        for &a in atoms {
            if a >= self.len() {
                return Err(PosetError::UnknownElement { id: a });
            }
            if self.rank[a] != 1 {
                return Err(PosetError::NotAnAtom { id: a });
            }
        }
        let member = self.atom_generated_ground(atoms);
        self.subposet_from_mask(&member)
    }

    /// Membership mask of the atom-generated subposet inside `self`.
    pub fn atom_generated_ground(&self, atoms: &[ElementId]) -> Vec<bool> {
        let mut member = vec![false; self.len()];
        member[self.bottom] = true;
        for id in self.ids() {
            if atoms.iter().any(|&a| self.leq(a, id)) {
                member[id] = true;
            }
        }
        member
    }

    /// Induced subposet on a mask whose non-bottom part is up-closed, as in
    /// atom-generated subposets: covers between masked non-bottom elements
    /// are inherited, and the bottom covers exactly the masked rank-1
    /// elements.
    fn subposet_from_mask(&self, member: &[bool]) -> Result<(GradedPoset, Vec<ElementId>), PosetError> {
        let ids: Vec<ElementId> = self.ids().filter(|&i| member[i]).collect();
        let index_of: HashMap<ElementId, usize> =
            ids.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let mut covers = Vec::new();
        for (k, &id) in ids.iter().enumerate() {
            if id == self.bottom {
                continue;
            }
            let mut has_lower = false;
            for &lo in &self.lower[id] {
                if member[lo] {
                    has_lower = true;
                    if lo != self.bottom {
                        covers.push((index_of[&lo], k));
                    }
                }
            }
            if !has_lower || self.lower[id].contains(&self.bottom) {
                covers.push((index_of[&self.bottom], k));
            }
        }
        let payloads: Vec<Vec<u32>> = ids.iter().map(|&i| self.payloads[i].clone()).collect();
        let (sub, perm) = GradedPoset::build(payloads, &covers)?;
        let mut map = vec![0; ids.len()];
        for (input_idx, &parent) in ids.iter().enumerate() {
            map[perm[input_idx]] = parent;
        }
        Ok((sub, map))
    }

    /// The closed interval `[x, y]`, re-graded so `x` has rank 0. Returns the
    /// poset and the map `interval_id -> parent_id`.
    pub fn closed_interval(
        &self,
        x: ElementId,
        y: ElementId,
    ) -> Result<(GradedPoset, Vec<ElementId>), PosetError> {
        if x >= self.len() || y >= self.len() {
            return Err(PosetError::UnknownElement { id: x.max(y) });
        }
        if !self.leq(x, y) {
            return Err(PosetError::NotComparable { x, y });
        }
        let ids: Vec<ElementId> =
            self.ids().filter(|&z| self.leq(x, z) && self.leq(z, y)).collect();
        let index_of: HashMap<ElementId, usize> =
            ids.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let mut covers = Vec::new();
        for (k, &id) in ids.iter().enumerate() {
            for &hi in &self.upper[id] {
                if let Some(&kk) = index_of.get(&hi) {
                    covers.push((k, kk));
                }
            }
        }
        let payloads: Vec<Vec<u32>> = ids.iter().map(|&i| self.payloads[i].clone()).collect();
        let (sub, perm) = GradedPoset::build(payloads, &covers)?;
        let mut map = vec![0; ids.len()];
        for (input_idx, &parent) in ids.iter().enumerate() {
            map[perm[input_idx]] = parent;
        }
        Ok((sub, map))
    }

    /// Number of maximal (bottom-to-top) chains, via path counting.
    pub fn count_maximal_chains(&self) -> Result<u64, PosetError> {
        let top = self.top.ok_or(PosetError::MissingTop)?;
        Ok(self.count_chains_between(self.bottom, top, None))
    }

    /// Path count from `lo` to `hi` along covers, optionally restricted to a mask.
    pub fn count_chains_between(&self, lo: ElementId, hi: ElementId, mask: Option<&[bool]>) -> u64 {
        let inside = |id: ElementId| mask.map_or(true, |m| m[id]);
        if !inside(lo) || !inside(hi) || !self.leq(lo, hi) {
            return 0;
        }
        let mut ways: HashMap<ElementId, u64> = HashMap::new();
        ways.insert(lo, 1);
        let mut ids: Vec<ElementId> = self
            .ids()
            .filter(|&z| inside(z) && self.leq(lo, z) && self.leq(z, hi))
            .collect();
        ids.sort_by_key(|&z| self.rank[z]);
        for &z in &ids {
            let w = match ways.get(&z) {
                Some(&w) => w,
                None => continue,
            };
            for &up in &self.upper[z] {
                if inside(up) && self.leq(up, hi) {
                    *ways.entry(up).or_insert(0) += w;
                }
            }
        }
        ways.get(&hi).copied().unwrap_or(0)
    }

    /// All maximal chains from bottom to top, in canonical order
    /// (lexicographic by id sequence). Fails if the count exceeds `budget`.
    pub fn enumerate_maximal_chains(&self, budget: u64) -> Result<Vec<Chain>, PosetError> {
        let top = self.top.ok_or(PosetError::MissingTop)?;
        self.enumerate_chains_between(self.bottom, top, None, budget)
    }

    /// Saturated chains from `lo` to `hi` (inclusive), canonical order,
    /// optionally restricted to a mask.
    pub fn enumerate_chains_between(
        &self,
        lo: ElementId,
        hi: ElementId,
        mask: Option<&[bool]>,
        budget: u64,
    ) -> Result<Vec<Chain>, PosetError> {
        let count = self.count_chains_between(lo, hi, mask);
        if count > budget {
            return Err(PosetError::ChainBudget { count, budget });
        }
        let inside = |id: ElementId| mask.map_or(true, |m| m[id]);
        let mut out = Vec::with_capacity(count as usize);
        if count == 0 {
            return Ok(out);
        }
        let mut stack: Chain = vec![lo];
        // Iterative DFS; `cursor[d]` is the next upper-cover index to try.
        let mut cursor: Vec<usize> = vec![0];
        loop {
            let cur = *stack.last().unwrap();
            if cur == hi {
                out.push(stack.clone());
                stack.pop();
                cursor.pop();
                if stack.is_empty() {
                    break;
                }
                continue;
            }
            let ups = &self.upper[cur];
            let mut advanced = false;
            while cursor.last().map_or(false, |&c| c < ups.len()) {
                let next = ups[*cursor.last().unwrap()];
                *cursor.last_mut().unwrap() += 1;
                if inside(next) && self.leq(next, hi) {
                    stack.push(next);
                    cursor.push(0);
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                stack.pop();
                cursor.pop();
                if stack.is_empty() {
                    break;
                }
            }
        }
        debug_assert_eq!(out.len() as u64, count);
        Ok(out)
    }

    /// Moebius function of the interval `[x, y]`.
    pub fn mobius(&self, x: ElementId, y: ElementId) -> Result<i64, PosetError> {
        if x >= self.len() || y >= self.len() {
            return Err(PosetError::UnknownElement { id: x.max(y) });
        }
        if !self.leq(x, y) {
            return Err(PosetError::NotComparable { x, y });
        }
        let mut ids: Vec<ElementId> =
            self.ids().filter(|&z| self.leq(x, z) && self.leq(z, y)).collect();
        ids.sort_by_key(|&z| self.rank[z]);
        let mut mu: HashMap<ElementId, i64> = HashMap::new();
        for &z in &ids {
            if z == x {
                mu.insert(z, 1);
                continue;
            }
            let mut acc = 0i64;
            for &w in &ids {
                if w != z && self.leq(w, z) {
                    acc += mu[&w];
                }
            }
            mu.insert(z, -acc);
        }
        Ok(mu[&y])
    }

    /// Serialized form with canonical ids.
    pub fn to_file(&self) -> PosetFile {
        PosetFile {
            n: self.payload_len,
            elements: self.payloads.clone(),
            covers: self.cover_pairs(),
            bottom: self.bottom,
            top: self.top,
        }
    }

    /// Rebuilds a poset from its serialized form, revalidating gradedness and
    /// the declared bottom/top.
    pub fn from_file(file: PosetFile) -> Result<Self, PosetError> {
        let declared_bottom = file.bottom;
        let declared_top = file.top;
        let (poset, perm) = GradedPoset::build(file.elements, &file.covers)?;
        if declared_bottom >= poset.len() {
            return Err(PosetError::UnknownElement { id: declared_bottom });
        }
        if perm[declared_bottom] != poset.bottom {
            return Err(PosetError::BottomMismatch {
                declared: declared_bottom,
                detected: poset.bottom,
            });
        }
        let mapped_top = match declared_top {
            Some(t) => {
                if t >= poset.len() {
                    return Err(PosetError::UnknownElement { id: t });
                }
                Some(perm[t])
            }
            None => None,
        };
        if mapped_top != poset.top {
            return Err(PosetError::TopMismatch { declared: mapped_top, detected: poset.top });
        }
        Ok(poset)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("poset serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, PosetError> {
        let file: PosetFile =
            serde_json::from_str(text).map_err(|e| PosetError::Json(e.to_string()))?;
        GradedPoset::from_file(file)
    }

    /// Hex SHA-256 of the canonical JSON serialization. Stable across runs;
    /// used to bind shelling files to the poset they certify.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_json().as_bytes());
        let digest = hasher.finalize();
        let mut out = String::with_capacity(64);
        for b in digest {
            write!(out, "{b:02x}").unwrap();
        }
        out
    }

    /// GraphViz rendering, one subgraph per rank, edges pointing upward.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph poset {\n  rankdir=BT;\n  node [shape=box];\n");
        let max_rank = self.rank.iter().copied().max().unwrap_or(0);
        for r in 0..=max_rank {
            let _ = write!(s, "  {{ rank=same;");
            for id in self.ids().filter(|&i| self.rank[i] == r) {
                let label: Vec<String> =
                    self.payloads[id].iter().map(|c| c.to_string()).collect();
                let _ = write!(s, " e{id} [label=\"{}\"];", label.join(","));
            }
            s.push_str(" }\n");
        }
        for (lo, hi) in self.cover_pairs() {
            let _ = writeln!(s, "  e{lo} -> e{hi};");
        }
        s.push_str("}\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 0 < {a, b} < 1: the rank-2 diamond.
    pub fn diamond() -> GradedPoset {
        let elements = vec![vec![0], vec![1], vec![2], vec![3]];
        let covers = [(0, 1), (0, 2), (1, 3), (2, 3)];
        GradedPoset::build(elements, &covers).unwrap().0
    }

    /// Two disjoint length-3 chains sharing bottom and top.
    pub fn broken_diamond() -> GradedPoset {
        let elements = vec![vec![0], vec![1], vec![2], vec![3], vec![4], vec![5]];
        let covers = [(0, 1), (0, 2), (1, 3), (2, 4), (3, 5), (4, 5)];
        GradedPoset::build(elements, &covers).unwrap().0
    }

    /// Boolean lattice on 3 atoms; payload = characteristic vector.
    pub fn boolean_3() -> GradedPoset {
        let elements: Vec<Vec<u32>> = (0u32..8)
            .map(|m| vec![m & 1, (m >> 1) & 1, (m >> 2) & 1])
            .collect();
        let mut covers = Vec::new();
        for lo in 0u32..8 {
            for bit in 0..3 {
                if lo >> bit & 1 == 0 {
                    covers.push((lo as usize, (lo | 1 << bit) as usize));
                }
            }
        }
        GradedPoset::build(elements, &covers).unwrap().0
    }

    #[test]
    fn diamond_structure() {
        let p = diamond();
        assert_eq!(p.len(), 4);
        assert_eq!(p.bottom(), 0);
        assert_eq!(p.top(), Some(3));
        assert_eq!(p.height().unwrap(), 2);
        assert_eq!(p.atoms(), &[1, 2]);
        assert!(p.leq(0, 3));
        assert!(p.leq(1, 3));
        assert!(!p.leq(1, 2));
        assert_eq!(p.count_maximal_chains().unwrap(), 2);
        let chains = p.enumerate_maximal_chains(10).unwrap();
        assert_eq!(chains, vec![vec![0, 1, 3], vec![0, 2, 3]]);
    }

    #[test]
    fn canonical_ids_stable_under_permutation() {
        let elements = vec![vec![3u32], vec![0], vec![2], vec![1]];
        // bottom = [0] at index 1; covers in permuted indexing.
        let covers = [(1, 3), (1, 2), (3, 0), (2, 0)];
        let (p, perm) = GradedPoset::build(elements, &covers).unwrap();
        assert_eq!(p.payload(0), &[0]);
        assert_eq!(p.payload(1), &[1]);
        assert_eq!(p.payload(3), &[3]);
        assert_eq!(perm[1], 0);
        let q = diamond();
        assert_eq!(p.content_hash(), q.content_hash());
    }

    #[test]
    fn rejects_rank_skip() {
        // 0 covers both an atom and the top: longest/shortest paths disagree.
        let elements = vec![vec![0], vec![1], vec![2]];
        let covers = [(0, 1), (1, 2), (0, 2)];
        let err = GradedPoset::build(elements, &covers).unwrap_err();
        assert!(matches!(err, PosetError::RankSkip { .. }));
    }

    #[test]
    fn rejects_two_minimals() {
        let elements = vec![vec![0], vec![1], vec![2]];
        let covers = [(0, 2), (1, 2)];
        let err = GradedPoset::build(elements, &covers).unwrap_err();
        assert!(matches!(err, PosetError::BottomNotUnique { count: 2 }));
    }

    #[test]
    fn boolean_3_chain_count_matches_enumeration() {
        let p = boolean_3();
        assert_eq!(p.count_maximal_chains().unwrap(), 6);
        let chains = p.enumerate_maximal_chains(100).unwrap();
        assert_eq!(chains.len(), 6);
        for c in &chains {
            assert_eq!(c.len(), 4);
            assert_eq!(c[0], p.bottom());
            assert_eq!(Some(*c.last().unwrap()), p.top());
            for w in c.windows(2) {
                assert!(p.covers(w[0], w[1]));
            }
        }
        // Canonical order is lexicographic by id sequence.
        let mut sorted = chains.clone();
        sorted.sort();
        assert_eq!(chains, sorted);
    }

    #[test]
    fn chain_budget_is_enforced() {
        let p = boolean_3();
        let err = p.enumerate_maximal_chains(5).unwrap_err();
        assert!(matches!(err, PosetError::ChainBudget { count: 6, budget: 5 }));
    }

    #[test]
    fn mobius_values() {
        let p = diamond();
        assert_eq!(p.mobius(0, 3).unwrap(), 1);
        assert_eq!(p.mobius(0, 1).unwrap(), -1);
        assert_eq!(p.mobius(0, 0).unwrap(), 1);
        let b = boolean_3();
        let (bottom, top) = (b.bottom(), b.top().unwrap());
        assert_eq!(b.mobius(bottom, top).unwrap(), -1);
        let bd = broken_diamond();
        assert_eq!(bd.mobius(0, 5).unwrap(), 1);
    }

    #[test]
    fn atom_generated_subposet_of_boolean() {
        let p = boolean_3();
        let atoms = p.atoms();
        // Single atom: bottom, the atom, everything above it.
        let (sub, map) = p.atom_generated_subposet(&[atoms[0]]).unwrap();
        assert_eq!(sub.len(), 5);
        assert_eq!(sub.atoms().len(), 1);
        for id in sub.ids() {
            assert_eq!(sub.payload(id), p.payload(map[id]));
        }
        // Empty atom set: just the bottom.
        let (sub, _) = p.atom_generated_subposet(&[]).unwrap();
        assert_eq!(sub.len(), 1);
        assert_eq!(sub.top(), Some(sub.bottom()));
    }

    #[test]
    fn closed_interval_regrades() {
        let p = boolean_3();
        let a = p.atoms()[0];
        let top = p.top().unwrap();
        let (iv, map) = p.closed_interval(a, top).unwrap();
        assert_eq!(iv.len(), 4);
        assert_eq!(iv.rank(iv.bottom()), 0);
        assert_eq!(iv.height().unwrap(), 2);
        assert_eq!(iv.payload(iv.bottom()), p.payload(a));
        assert_eq!(map[iv.bottom()], a);
    }

    #[test]
    fn json_round_trip_preserves_hash() {
        let p = boolean_3();
        let text = p.to_json();
        let q = GradedPoset::from_json(&text).unwrap();
        assert_eq!(p.content_hash(), q.content_hash());
        assert_eq!(p.to_json(), q.to_json());
    }

    #[test]
    fn from_file_rejects_wrong_bottom() {
        let p = diamond();
        let mut file = p.to_file();
        file.bottom = 1;
        assert!(matches!(
            GradedPoset::from_file(file),
            Err(PosetError::BottomMismatch { .. })
        ));
    }

    #[test]
    fn dot_export_mentions_every_cover() {
        let p = diamond();
        let dot = p.to_dot();
        assert_eq!(dot.matches(" -> ").count(), 4);
        assert!(dot.contains("rank=same"));
    }

    #[test]
    fn single_element_poset() {
        let (p, _) = GradedPoset::build(vec![vec![7]], &[]).unwrap();
        assert_eq!(p.bottom(), 0);
        assert_eq!(p.top(), Some(0));
        assert_eq!(p.height().unwrap(), 0);
        let chains = p.enumerate_maximal_chains(10).unwrap();
        assert_eq!(chains, vec![vec![0]]);
        assert_eq!(p.mobius(0, 0).unwrap(), 1);
    }
}
