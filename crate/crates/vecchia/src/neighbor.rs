//! Ordered nearest-neighbor search: for each position `i` in an ordering,
//! the `m` nearest points among positions `0..i`.
//!
//! [`nn_ordered_brute`] is the quadratic oracle. [`nn_ordered_fast`] answers
//! the same query through a kd-tree over all points: it asks for the `2m`
//! nearest overall, keeps the points that already have `m` earlier-ordered
//! candidates, and doubles the request (`4m`, `8m`, ...) for the rest,
//! falling back to a scan of everything once the request covers all points.
//! Both break distance ties by the smaller ordered position, so their
//! outputs are identical set-for-set.

use std::cmp::Ordering as CmpOrdering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::covariance::{LocationSet, Metric};
use crate::error::{Error, Result};
use crate::ordering::Permutation;

/// Per-position conditioning sets `J_i` in ordering space.
///
/// `set(i)` is strictly increasing with last element `i` (every observation
/// neighbors itself); `ranked(i)` holds the same neighbors without `i`,
/// nearest first, which is the order the grouping sweep consumes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborSets {
    sets: Vec<Vec<usize>>,
    ranked: Vec<Vec<usize>>,
}

impl NeighborSets {
    /// Build from sorted sets alone. Rank order is taken as descending index
    /// (for a sorted 1-D ordering that coincides with distance rank).
    pub fn from_sets(sets: Vec<Vec<usize>>) -> Result<Self> {
        let ranked = sets
            .iter()
            .map(|s| {
                let mut r: Vec<usize> = s[..s.len().saturating_sub(1)].to_vec();
                r.reverse();
                r
            })
            .collect();
        let out = Self { sets, ranked };
        out.validate()?;
        Ok(out)
    }

    /// Build from rank-ordered neighbor lists (nearest first, self excluded).
    pub fn from_ranked(ranked: Vec<Vec<usize>>) -> Result<Self> {
        let sets = ranked
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut s = r.clone();
                s.push(i);
                s.sort_unstable();
                s
            })
            .collect();
        let out = Self { sets, ranked };
        out.validate()?;
        Ok(out)
    }

    fn validate(&self) -> Result<()> {
        for (i, s) in self.sets.iter().enumerate() {
            let ok = s.last() == Some(&i) && s.windows(2).all(|w| w[0] < w[1]);
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "conditioning set {i} must be strictly increasing, bounded by {i}, and end \
                     in {i}: {s:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.sets.len()
    }

    /// Sorted conditioning set of position `i`, self included.
    pub fn set(&self, i: usize) -> &[usize] {
        &self.sets[i]
    }

    /// Neighbors of `i` (self excluded), nearest first.
    pub fn ranked(&self, i: usize) -> &[usize] {
        &self.ranked[i]
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    /// `sum_i |J_i|^2`, the memory cost of the ungrouped factorization.
    pub fn memory_cost(&self) -> usize {
        self.sets.iter().map(|s| s.len() * s.len()).sum()
    }
}

/// Brute-force ordered nearest neighbors: `O(n^2 log n)` oracle.
pub fn nn_ordered_brute(
    locs: &LocationSet,
    perm: &Permutation,
    m: usize,
    metric: Metric,
) -> Result<NeighborSets> {
    check_args(locs, perm, m)?;
    let n = perm.len();
    let mut ranked = Vec::with_capacity(n);
    let mut cand: Vec<(f64, usize)> = Vec::new();
    for i in 0..n {
        cand.clear();
        let oi = perm.original(i);
        for j in 0..i {
            cand.push((locs.dist2(oi, perm.original(j), metric), j));
        }
        cand.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cand.truncate(m);
        ranked.push(cand.iter().map(|&(_, j)| j).collect());
    }
    NeighborSets::from_ranked(ranked)
}

/// Ordered nearest neighbors via kd-tree with doubling candidate counts.
/// Identical output to [`nn_ordered_brute`].
pub fn nn_ordered_fast(
    locs: &LocationSet,
    perm: &Permutation,
    m: usize,
    metric: Metric,
) -> Result<NeighborSets> {
    Ok(nn_ordered_fast_stats(locs, perm, m, metric)?.0)
}

/// Same as [`nn_ordered_fast`] but also reports, for each position, how many
/// doubling rounds the search needed (0 when the position resolves without
/// touching the tree, 1 when the initial `2m` request sufficed, ...).
pub fn nn_ordered_fast_stats(
    locs: &LocationSet,
    perm: &Permutation,
    m: usize,
    metric: Metric,
) -> Result<(NeighborSets, SearchStats)> {
    check_args(locs, perm, m)?;
    let m_per: Vec<usize> = vec![m; perm.len()];
    nn_ordered_fast_with_m(locs, perm, &m_per, metric)
}

/// Generalization used for joint observation/prediction sequences: position
/// `i` requests `m_per[i]` previous neighbors.
pub fn nn_ordered_fast_with_m(
    locs: &LocationSet,
    perm: &Permutation,
    m_per: &[usize],
    metric: Metric,
) -> Result<(NeighborSets, SearchStats)> {
    let n = perm.len();
    if n != locs.len() {
        return Err(Error::DimensionMismatch(format!(
            "permutation of length {n} over {} locations",
            locs.len()
        )));
    }
    if m_per.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} neighbor counts for {n} positions",
            m_per.len()
        )));
    }
    if let Some(&bad) = m_per.iter().find(|&&v| v == 0) {
        return Err(Error::InvalidArgument(format!(
            "neighbor count must be positive, got {bad}"
        )));
    }
    let tree = KdTree::build(locs, metric);
    let results: Vec<(Vec<usize>, u32)> = (0..n)
        .into_par_iter()
        .map_init(
            || (BinaryHeap::new(), Vec::new()),
            |(heap, scratch), i| {
                let m = m_per[i];
                if i <= m {
                    // every previous point participates; sort them directly
                    let oi = perm.original(i);
                    let mut cand: Vec<(f64, usize)> = (0..i)
                        .map(|j| (locs.dist2(oi, perm.original(j), metric), j))
                        .collect();
                    cand.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    return (cand.into_iter().map(|(_, j)| j).collect(), 0);
                }
                let query = perm.original(i);
                let mut k = 2 * m;
                let mut rounds = 1u32;
                loop {
                    k = k.min(n);
                    tree.knn(query, k, perm.inverse(), heap, scratch);
                    let prev = scratch.iter().filter(|&&(_, pos)| pos < i).count();
                    if prev >= m || k == n {
                        let sel: Vec<usize> = scratch
                            .iter()
                            .filter(|&&(_, pos)| pos < i)
                            .take(m)
                            .map(|&(_, pos)| pos)
                            .collect();
                        return (sel, rounds);
                    }
                    k *= 2;
                    rounds += 1;
                }
            },
        )
        .collect();
    let mut ranked = Vec::with_capacity(n);
    let mut rounds = Vec::with_capacity(n);
    for (r, c) in results {
        ranked.push(r);
        rounds.push(c);
    }
    Ok((NeighborSets::from_ranked(ranked)?, SearchStats { rounds }))
}

/// Doubling-round accounting from [`nn_ordered_fast_stats`].
#[derive(Debug, Clone)]
pub struct SearchStats {
    pub rounds: Vec<u32>,
}

impl SearchStats {
    /// Fraction of tree-querying positions at or after `from` resolved by
    /// the first `2m` round. Early positions rarely have `m` predecessors
    /// among their `2m` nearest, so the fraction climbs with `from`.
    pub fn first_round_fraction_from(&self, from: usize) -> f64 {
        let queried = self.rounds[from.min(self.rounds.len())..]
            .iter()
            .filter(|&&r| r > 0)
            .count();
        if queried == 0 {
            return 1.0;
        }
        self.rounds[from.min(self.rounds.len())..]
            .iter()
            .filter(|&&r| r == 1)
            .count() as f64
            / queried as f64
    }
}

fn check_args(locs: &LocationSet, perm: &Permutation, m: usize) -> Result<()> {
    if perm.len() != locs.len() {
        return Err(Error::DimensionMismatch(format!(
            "permutation of length {} over {} locations",
            perm.len(),
            locs.len()
        )));
    }
    if m == 0 {
        return Err(Error::InvalidArgument(
            "neighbor count m must be positive".into(),
        ));
    }
    Ok(())
}

/// Max-heap entry ordered lexicographically by (distance, tie key); the heap
/// keeps the current k best, so the top is the worst of them.
#[derive(PartialEq)]
struct HeapEntry {
    d2: f64,
    key: usize,
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<CmpOrdering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> CmpOrdering {
        self.d2.total_cmp(&other.d2).then(self.key.cmp(&other.key))
    }
}

/// Static kd-tree over the metric coordinates of every location. Built once
/// per location set; queries are read-only and thread-safe. Median-split
/// layout: the point of each subrange sits at its midpoint, split axes cycle
/// with depth.
struct KdTree {
    pts: Vec<f64>, // gathered metric coordinates, slot-major
    ids: Vec<usize>,
    slot_of: Vec<usize>,
    d: usize,
}

impl KdTree {
    fn build(locs: &LocationSet, metric: Metric) -> Self {
        let axes: Vec<usize> = locs.metric_axes(metric).collect();
        let d = axes.len();
        let n = locs.len();
        let mut ids: Vec<usize> = (0..n).collect();
        let coord = |i: usize, ax: usize| locs.point(i)[axes[ax]];
        let mut stack = vec![(0usize, n, 0usize)];
        while let Some((lo, hi, depth)) = stack.pop() {
            if hi.saturating_sub(lo) <= 1 {
                continue;
            }
            let ax = depth % d;
            let mid = (lo + hi) / 2;
            ids[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
                coord(a, ax).total_cmp(&coord(b, ax)).then(a.cmp(&b))
            });
            stack.push((lo, mid, depth + 1));
            stack.push((mid + 1, hi, depth + 1));
        }
        let mut pts = vec![0.0; n * d];
        let mut slot_of = vec![0usize; n];
        for (slot, &id) in ids.iter().enumerate() {
            slot_of[id] = slot;
            for ax in 0..d {
                pts[slot * d + ax] = coord(id, ax);
            }
        }
        Self {
            pts,
            ids,
            slot_of,
            d,
        }
    }

    /// k nearest points to the location with original index `query`, ties by
    /// ascending `tie_key[original]`. `out` receives (distance^2, tie key)
    /// pairs sorted ascending.
    fn knn(
        &self,
        query: usize,
        k: usize,
        tie_key: &[usize],
        heap: &mut BinaryHeap<HeapEntry>,
        out: &mut Vec<(f64, usize)>,
    ) {
        heap.clear();
        let slot = self.slot_of[query];
        let q = self.pts[slot * self.d..(slot + 1) * self.d].to_vec();
        self.search(0, self.ids.len(), 0, &q, k, tie_key, heap);
        out.clear();
        out.extend(heap.drain().map(|e| (e.d2, e.key)));
        out.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        lo: usize,
        hi: usize,
        depth: usize,
        q: &[f64],
        k: usize,
        tie_key: &[usize],
        heap: &mut BinaryHeap<HeapEntry>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let ax = depth % self.d;
        let p = &self.pts[mid * self.d..(mid + 1) * self.d];
        let mut d2 = 0.0;
        for (a, b) in q.iter().zip(p) {
            let diff = a - b;
            d2 += diff * diff;
        }
        let entry = HeapEntry {
            d2,
            key: tie_key[self.ids[mid]],
        };
        if heap.len() < k {
            heap.push(entry);
        } else if let Some(top) = heap.peek() {
            if entry.cmp(top) == CmpOrdering::Less {
                heap.pop();
                heap.push(entry);
            }
        }
        if hi - lo == 1 {
            return;
        }
        let diff = q[ax] - p[ax];
        let (near, far) = if diff <= 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, depth + 1, q, k, tie_key, heap);
        // descend into the far side unless it lies strictly outside the worst
        // kept distance; equality may still hide a better tie key
        let axis_d2 = diff * diff;
        if heap.len() < k || heap.peek().is_some_and(|t| axis_d2 <= t.d2) {
            self.search(far.0, far.1, depth + 1, q, k, tie_key, heap);
        }
    }
}
