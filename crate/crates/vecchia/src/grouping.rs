//! Automatic grouping of observations into blocks.
//!
//! A block's likelihood contribution can be computed from one factorization
//! of the covariance of `U_k`, the union of its members' conditioning sets.
//! Every member `i` then effectively conditions on the expanded set
//! `Jbar_i = { j in U_k : j <= i }`, which contains `J_i`, so grouping never
//! worsens the approximation. The greedy sweep below accepts a merge only
//! when `|U_k union U_k'|^2 <= |U_k|^2 + |U_k'|^2`, so the `sum_k |U_k|^2`
//! memory footprint never grows either.

use crate::error::{Error, Result};
use crate::neighbor::NeighborSets;

/// A partition of the ordered positions `0..n` into blocks, with the
/// per-block neighbor unions `U_k` and per-position expanded conditioning
/// sets `Jbar_i` they induce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    blocks: Vec<Vec<usize>>,
    unions: Vec<Vec<usize>>,
    expanded: Vec<Vec<usize>>,
    block_of: Vec<usize>,
}

/// Summary statistics of a partition (counts and conditioning-set sizes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupStats {
    pub num_blocks: usize,
    pub mean_union: f64,
    pub max_union: usize,
    pub mean_expanded: f64,
    pub max_expanded: usize,
}

impl BlockPartition {
    /// Build the union and expanded sets for an arbitrary partition of
    /// `0..n`. Blocks must be disjoint and cover every position.
    pub fn from_blocks(mut blocks: Vec<Vec<usize>>, sets: &NeighborSets) -> Result<Self> {
        let n = sets.n();
        blocks.retain(|b| !b.is_empty());
        let mut block_of = vec![usize::MAX; n];
        for (k, b) in blocks.iter_mut().enumerate() {
            b.sort_unstable();
            for &i in b.iter() {
                if i >= n || block_of[i] != usize::MAX {
                    return Err(Error::InvalidArgument(format!(
                        "blocks must partition 0..{n}; position {i} repeated or out of range"
                    )));
                }
                block_of[i] = k;
            }
        }
        if block_of.contains(&usize::MAX) {
            return Err(Error::InvalidArgument(format!(
                "blocks must cover every position 0..{n}"
            )));
        }
        let unions: Vec<Vec<usize>> = blocks
            .iter()
            .map(|b| {
                let mut u: Vec<usize> = Vec::new();
                for &i in b {
                    u = merge_sorted(&u, sets.set(i));
                }
                u
            })
            .collect();
        let expanded = expand(&blocks, &unions, sets, n)?;
        Ok(Self {
            blocks,
            unions,
            expanded,
            block_of,
        })
    }

    /// Trivial partition: every position its own block (`Jbar_i = J_i`).
    pub fn singletons(sets: &NeighborSets) -> Self {
        let n = sets.n();
        Self::from_blocks((0..n).map(|i| vec![i]).collect(), sets)
            .expect("singleton partition is always valid")
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Sorted union `U_k` of block `k`.
    pub fn union(&self, k: usize) -> &[usize] {
        &self.unions[k]
    }

    /// Expanded conditioning set `Jbar_i` (sorted, ends in `i`).
    pub fn expanded(&self, i: usize) -> &[usize] {
        &self.expanded[i]
    }

    pub fn expanded_sets(&self) -> &[Vec<usize>] {
        &self.expanded
    }

    pub fn block_of(&self, i: usize) -> usize {
        self.block_of[i]
    }

    /// The expanded sets as plain conditioning sets, evaluable through the
    /// ungrouped code path (`Jbar` is itself a valid neighbor system).
    pub fn to_expanded_neighbor_sets(&self) -> NeighborSets {
        NeighborSets::from_sets(self.expanded.clone())
            .expect("expanded sets satisfy the neighbor-set invariants")
    }

    /// `sum_k |U_k|^2`, the grouped memory footprint.
    pub fn memory_cost(&self) -> usize {
        self.unions.iter().map(|u| u.len() * u.len()).sum()
    }

    pub fn stats(&self) -> GroupStats {
        let n = self.expanded.len().max(1);
        let k = self.blocks.len().max(1);
        GroupStats {
            num_blocks: self.blocks.len(),
            mean_union: self.unions.iter().map(Vec::len).sum::<usize>() as f64 / k as f64,
            max_union: self.unions.iter().map(Vec::len).max().unwrap_or(0),
            mean_expanded: self.expanded.iter().map(Vec::len).sum::<usize>() as f64 / n as f64,
            max_expanded: self.expanded.iter().map(Vec::len).max().unwrap_or(0),
        }
    }
}

fn expand(
    blocks: &[Vec<usize>],
    unions: &[Vec<usize>],
    sets: &NeighborSets,
    n: usize,
) -> Result<Vec<Vec<usize>>> {
    let mut expanded = vec![Vec::new(); n];
    for (b, u) in blocks.iter().zip(unions) {
        for &i in b {
            let end = u.partition_point(|&j| j <= i);
            let jbar = u[..end].to_vec();
            // J_i <= Jbar_i grounds the KL monotonicity guarantee; a violation
            // would mean the union bookkeeping is broken.
            if !is_subset(sets.set(i), &jbar) || jbar.last() != Some(&i) {
                return Err(Error::InvalidArgument(format!(
                    "internal consistency violation: J_{i} not contained in its expanded set"
                )));
            }
            expanded[i] = jbar;
        }
    }
    Ok(expanded)
}

/// Greedy grouping sweep over neighbor ranks.
///
/// Starting from singletons, for each rank `l = 1..=m` and each position
/// `i`, the block containing `i` proposes absorbing the block containing
/// `i`'s `l`-th nearest neighbor; the merge is kept when the squared union
/// size does not exceed the sum of the squared sizes. Positions with fewer
/// than `l` neighbors are skipped. At most `n * m` comparisons.
pub fn group_blocks(sets: &NeighborSets, m: usize) -> BlockPartition {
    let n = sets.n();
    let mut block_of: Vec<usize> = (0..n).collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut unions: Vec<Vec<usize>> = (0..n).map(|i| sets.set(i).to_vec()).collect();
    #[cfg(debug_assertions)]
    let mut total_cost: i64 = unions.iter().map(|u| (u.len() * u.len()) as i64).sum();
    for l in 0..m {
        for i in 0..n {
            let Some(&j) = sets.ranked(i).get(l) else {
                continue;
            };
            let k = block_of[i];
            let kp = block_of[j];
            if k == kp {
                continue;
            }
            let (a, b) = (&unions[k], &unions[kp]);
            let merged = merged_len(a, b);
            if merged * merged <= a.len() * a.len() + b.len() * b.len() {
                #[cfg(debug_assertions)]
                {
                    total_cost +=
                        (merged * merged) as i64 - (a.len() * a.len() + b.len() * b.len()) as i64;
                }
                unions[k] = merge_sorted(a, b);
                unions[kp].clear();
                let moved = std::mem::take(&mut members[kp]);
                for &x in &moved {
                    block_of[x] = k;
                }
                members[k].extend(moved);
            }
        }
    }
    #[cfg(debug_assertions)]
    debug_assert!(
        total_cost <= sets.memory_cost() as i64,
        "accepted merges may never grow the memory footprint"
    );
    let blocks: Vec<Vec<usize>> = members.into_iter().filter(|b| !b.is_empty()).collect();
    BlockPartition::from_blocks(blocks, sets).expect("greedy sweep yields a valid partition")
}

fn merged_len(a: &[usize], b: &[usize]) -> usize {
    let (mut ia, mut ib, mut len) = (0, 0, 0);
    while ia < a.len() && ib < b.len() {
        match a[ia].cmp(&b[ib]) {
            std::cmp::Ordering::Less => ia += 1,
            std::cmp::Ordering::Greater => ib += 1,
            std::cmp::Ordering::Equal => {
                ia += 1;
                ib += 1;
            }
        }
        len += 1;
    }
    len + (a.len() - ia) + (b.len() - ib)
}

fn merge_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut ia, mut ib) = (0, 0);
    while ia < a.len() && ib < b.len() {
        match a[ia].cmp(&b[ib]) {
            std::cmp::Ordering::Less => {
                out.push(a[ia]);
                ia += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[ib]);
                ib += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[ia]);
                ia += 1;
                ib += 1;
            }
        }
    }
    out.extend_from_slice(&a[ia..]);
    out.extend_from_slice(&b[ib..]);
    out
}

fn is_subset(sub: &[usize], sup: &[usize]) -> bool {
    let mut it = sup.iter();
    sub.iter().all(|x| it.any(|y| y == x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{LocationSet, Metric};
    use crate::neighbor::nn_ordered_fast;
    use crate::ordering::order_random;

    /// Consecutive conditioning on a line: J_i = {i-m, ..., i}.
    fn chain_sets(n: usize, m: usize) -> NeighborSets {
        NeighborSets::from_sets(
            (0..n)
                .map(|i| (i.saturating_sub(m)..=i).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_observation_single_block() {
        let sets = NeighborSets::from_sets(vec![vec![0]]).unwrap();
        let part = group_blocks(&sets, 5);
        assert_eq!(part.num_blocks(), 1);
        assert_eq!(part.blocks()[0], vec![0]);
        assert_eq!(part.expanded(0), &[0]);
    }

    #[test]
    fn skip_pair_merge_accepted_iff_m_above_three() {
        // Two observations i and i+2 with consecutive conditioning share
        // m - 1 neighbors; joining them costs (m+3)^2 against 2(m+1)^2,
        // acceptable exactly when m > 3. Only those two positions carry
        // neighbors here so no other merge interferes.
        for (m, expect_merge) in [(2usize, false), (3, false), (4, true), (6, true)] {
            let n = 2 * m + 8;
            let i = m + 2;
            let mut sets: Vec<Vec<usize>> = (0..n).map(|p| vec![p]).collect();
            sets[i] = (i - m..=i).collect();
            sets[i + 2] = (i + 2 - m..=i + 2).collect();
            let sets = NeighborSets::from_sets(sets).unwrap();
            let part = group_blocks(&sets, m);
            let same = part.block_of(i) == part.block_of(i + 2);
            assert_eq!(same, expect_merge, "m = {m}");
            if expect_merge {
                let k = part.block_of(i);
                assert_eq!(part.union(k).len(), m + 3);
                // the later member conditions on the full union
                assert_eq!(part.expanded(i + 2).len(), m + 3);
                assert_eq!(part.expanded(i).len(), m + 1);
            }
        }
    }

    #[test]
    fn singleton_partition_reproduces_neighbor_sets() {
        let sets = chain_sets(12, 3);
        let part = BlockPartition::singletons(&sets);
        for i in 0..12 {
            assert_eq!(part.expanded(i), sets.set(i));
        }
        assert_eq!(part.memory_cost(), sets.memory_cost());
    }

    #[test]
    fn merged_identical_neighbor_sets_strictly_improve_memory() {
        // positions 2 and 3 share every neighbor below them; grouping them
        // costs one union instead of two overlapping sets
        let sets =
            NeighborSets::from_sets(vec![vec![0], vec![0, 1], vec![0, 1, 2], vec![0, 1, 2, 3]])
                .unwrap();
        let part = BlockPartition::from_blocks(vec![vec![0], vec![1], vec![2, 3]], &sets).unwrap();
        let k = part.block_of(2);
        assert_eq!(part.union(k).len(), 4);
        assert!(part.memory_cost() < sets.memory_cost());
    }

    #[test]
    fn grouping_never_worsens_memory_and_respects_containment() {
        let locs = LocationSet::regular_grid(&[15, 15]).unwrap();
        let perm = order_random(locs.len(), 99);
        let sets = nn_ordered_fast(&locs, &perm, 8, Metric::Full).unwrap();
        let part = group_blocks(&sets, 8);
        assert!(part.memory_cost() <= sets.memory_cost());
        for i in 0..sets.n() {
            let jbar = part.expanded(i);
            assert!(is_subset(sets.set(i), jbar), "containment at {i}");
            assert_eq!(*jbar.last().unwrap(), i);
            assert!(jbar.iter().all(|&j| j <= i));
        }
        // max(U_k) = max(B_k)
        for k in 0..part.num_blocks() {
            assert_eq!(part.union(k).last(), part.blocks()[k].last());
        }
        // blocks partition 0..n
        let mut seen = vec![false; sets.n()];
        for b in part.blocks() {
            for &i in b {
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn rebuilding_expanded_sets_is_idempotent() {
        let locs = LocationSet::regular_grid(&[10, 10]).unwrap();
        let perm = order_random(locs.len(), 5);
        let sets = nn_ordered_fast(&locs, &perm, 6, Metric::Full).unwrap();
        let part = group_blocks(&sets, 6);
        let rebuilt = BlockPartition::from_blocks(part.blocks().to_vec(), &sets).unwrap();
        assert_eq!(part, rebuilt);
    }

    #[test]
    fn frozen_reference_statistics_on_a_grid() {
        // Regression freeze of the sweep's output on a 30x30 grid with exact
        // MMD ordering (values recorded from the first verified run). The
        // squared acceptance rule lets the nested conditioning sets of early
        // positions coalesce into one prefix block that grows until
        // |U| = ((m+1)^2 - 1)/2 + 1, so the largest union is 61 at m = 10
        // and 481 at m = 30 independent of n.
        let locs = LocationSet::regular_grid(&[30, 30]).unwrap();
        let perm = crate::ordering::order_mmd_exact(&locs, Metric::Full, None).unwrap();
        for (m, blocks, mean_u, max_u) in [
            (10usize, 300usize, 15.986667, 61usize),
            (30, 42, 79.785714, 481),
        ] {
            let sets = nn_ordered_fast(&locs, &perm, m, Metric::Full).unwrap();
            let part = group_blocks(&sets, m);
            let stats = part.stats();
            assert_eq!(stats.num_blocks, blocks, "m={m}");
            assert!(
                (stats.mean_union - mean_u).abs() < 1e-4,
                "m={m}: {}",
                stats.mean_union
            );
            assert_eq!(stats.max_union, max_u, "m={m}");
            assert_eq!(stats.max_union, ((m + 1) * (m + 1) - 1) / 2 + 1);
            assert!(part.memory_cost() <= sets.memory_cost());
        }
    }

    #[test]
    fn from_blocks_rejects_non_partitions() {
        let sets = chain_sets(4, 1);
        assert!(BlockPartition::from_blocks(vec![vec![0, 1], vec![1, 2, 3]], &sets).is_err());
        assert!(BlockPartition::from_blocks(vec![vec![0, 1]], &sets).is_err());
        assert!(BlockPartition::from_blocks(vec![vec![0, 1, 2, 3, 4]], &sets).is_err());
    }
}
