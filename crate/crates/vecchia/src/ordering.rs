//! Orderings of the observation indices.
//!
//! The quality of the ordered-conditional approximation depends on the
//! permutation defining "previous". Besides the classic sorted-coordinate
//! default, this module provides middle-out, completely random, exact
//! maximum-minimum-distance (MMD), and a grid-based approximate MMD that runs
//! in `O(n log n)`.
//!
//! Ties are always broken by the lowest original index, which makes every
//! scheme deterministic (random ordering is deterministic given its seed).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::covariance::{LocationSet, Metric};
use crate::error::{Error, Result};

/// A bijection on `0..n`. `forward[k]` is the original index of the point at
/// ordered position `k`; `inverse` maps original index to position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        let forward: Vec<usize> = (0..n).collect();
        Self {
            inverse: forward.clone(),
            forward,
        }
    }

    /// Validates that `forward` is a bijection and builds the inverse.
    pub fn from_forward(forward: Vec<usize>) -> Result<Self> {
        let n = forward.len();
        let mut inverse = vec![usize::MAX; n];
        for (pos, &orig) in forward.iter().enumerate() {
            if orig >= n || inverse[orig] != usize::MAX {
                return Err(Error::InvalidArgument(format!(
                    "forward array is not a bijection on 0..{n}"
                )));
            }
            inverse[orig] = pos;
        }
        Ok(Self { forward, inverse })
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }

    /// Original index of the point at ordered position `pos`.
    pub fn original(&self, pos: usize) -> usize {
        self.forward[pos]
    }

    /// Ordered position of original index `orig`.
    pub fn position(&self, orig: usize) -> usize {
        self.inverse[orig]
    }

    /// Gather `data` into ordering space: `out[pos] = data[forward[pos]]`.
    pub fn permute<T: Copy>(&self, data: &[T]) -> Vec<T> {
        self.forward.iter().map(|&i| data[i]).collect()
    }

    /// Scatter ordering-space `data` back: `out[forward[pos]] = data[pos]`.
    pub fn unpermute<T: Copy + Default>(&self, data: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); data.len()];
        for (pos, &orig) in self.forward.iter().enumerate() {
            out[orig] = data[pos];
        }
        out
    }
}

/// Sort key for [`order_sorted_coordinate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// A single coordinate axis.
    Coord(usize),
    /// The sum of all coordinates (equivalent to sorting on one axis in a
    /// frame rotated by pi/4 in two dimensions).
    Sum,
}

/// Ascending sort on one coordinate or on the coordinate sum.
pub fn order_sorted_coordinate(locs: &LocationSet, axis: Axis) -> Result<Permutation> {
    let key: Box<dyn Fn(usize) -> f64> = match axis {
        Axis::Coord(ax) => {
            if ax >= locs.dim() {
                return Err(Error::InvalidArgument(format!(
                    "axis {ax} out of range for dimension {}",
                    locs.dim()
                )));
            }
            Box::new(move |i| locs.point(i)[ax])
        }
        Axis::Sum => Box::new(move |i| locs.point(i).iter().sum()),
    };
    let mut forward: Vec<usize> = (0..locs.len()).collect();
    forward.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
    Permutation::from_forward(forward)
}

/// Ascending sort on distance to `center` (default: coordinate mean).
pub fn order_middle_out(
    locs: &LocationSet,
    metric: Metric,
    center: Option<&[f64]>,
) -> Result<Permutation> {
    let center = resolve_center(locs, metric, center)?;
    let mut forward: Vec<usize> = (0..locs.len()).collect();
    let d2 = |i: usize| dist2_to(locs, metric, i, &center);
    forward.sort_by(|&a, &b| d2(a).total_cmp(&d2(b)).then(a.cmp(&b)));
    Permutation::from_forward(forward)
}

/// Uniform random permutation via Fisher-Yates, seeded and reproducible.
pub fn order_random(n: usize, seed: u64) -> Permutation {
    let mut forward: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    forward.shuffle(&mut rng);
    Permutation::from_forward(forward).expect("shuffle preserves the bijection")
}

/// Exact maximum-minimum-distance ordering.
///
/// The first point minimizes distance to the center; each following point
/// maximizes its minimum distance to everything already selected. Runs in
/// `O(n^2)` by caching each point's current minimum distance.
pub fn order_mmd_exact(
    locs: &LocationSet,
    metric: Metric,
    center: Option<&[f64]>,
) -> Result<Permutation> {
    let n = locs.len();
    if n == 0 {
        return Ok(Permutation::identity(0));
    }
    let center = resolve_center(locs, metric, center)?;
    let mut start = 0usize;
    let mut best = f64::INFINITY;
    for i in 0..n {
        let d = dist2_to(locs, metric, i, &center);
        if d < best {
            best = d;
            start = i;
        }
    }
    let mut forward = Vec::with_capacity(n);
    forward.push(start);
    let mut min_d2: Vec<f64> = (0..n).map(|i| locs.dist2(i, start, metric)).collect();
    let mut selected = vec![false; n];
    selected[start] = true;
    for _ in 1..n {
        let mut pick = usize::MAX;
        let mut best = f64::NEG_INFINITY;
        for i in 0..n {
            if !selected[i] && min_d2[i] > best {
                best = min_d2[i];
                pick = i;
            }
        }
        selected[pick] = true;
        forward.push(pick);
        for i in 0..n {
            if !selected[i] {
                min_d2[i] = min_d2[i].min(locs.dist2(i, pick, metric));
            }
        }
    }
    Permutation::from_forward(forward)
}

/// Number of grid boxes above which the box centers are themselves ordered
/// by the approximate algorithm rather than exact MMD.
pub const AMMD_RECURSION_THRESHOLD: usize = 4096;

/// Grid-accelerated approximate MMD ordering.
///
/// The domain's bounding box is cut into roughly `n / points_per_box` grid
/// boxes (per-dimension counts proportional to the side lengths; assignment
/// is a constant-time rounding per point). Box centers are ordered by MMD,
/// then the boxes are cycled in that order, each visit emitting the not yet
/// ordered point of the box with the largest minimum distance to the points
/// already selected in the box's 3^d Moore neighborhood. Boxes that run out
/// of points are skipped; cycling continues until every point is ordered.
///
/// With a single box the procedure degenerates to [`order_mmd_exact`], which
/// is called directly in that case.
pub fn order_ammd(
    locs: &LocationSet,
    metric: Metric,
    points_per_box: usize,
) -> Result<Permutation> {
    if points_per_box == 0 {
        return Err(Error::InvalidArgument(
            "points_per_box must be positive".into(),
        ));
    }
    let n = locs.len();
    if n == 0 {
        return Ok(Permutation::identity(0));
    }
    let axes: Vec<usize> = locs.metric_axes(metric).collect();
    let d = axes.len();
    if d > 4 {
        return Err(Error::InvalidArgument(format!(
            "approximate MMD supports up to 4 metric dimensions, got {d}"
        )));
    }
    // Bounding box along the metric axes.
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for i in 0..n {
        let p = locs.point(i);
        for (k, &ax) in axes.iter().enumerate() {
            lo[k] = lo[k].min(p[ax]);
            hi[k] = hi[k].max(p[ax]);
        }
    }
    let lengths: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| b - a).collect();
    let target_boxes = n.div_ceil(points_per_box);
    let counts = box_counts(&lengths, target_boxes);
    let total_boxes: usize = counts.iter().product();
    if total_boxes <= 1 {
        return order_mmd_exact(locs, metric, None);
    }

    // Assign points to boxes by rounding.
    let box_coord = |i: usize| -> Vec<usize> {
        let p = locs.point(i);
        axes.iter()
            .enumerate()
            .map(|(k, &ax)| {
                if lengths[k] <= 0.0 {
                    0
                } else {
                    let f = (p[ax] - lo[k]) / lengths[k] * counts[k] as f64;
                    (f as usize).min(counts[k] - 1)
                }
            })
            .collect()
    };
    let linear = |c: &[usize]| -> usize {
        let mut id = 0;
        for (k, &ck) in c.iter().enumerate() {
            id = id * counts[k] + ck;
        }
        id
    };
    let mut unordered: Vec<Vec<usize>> = vec![Vec::new(); total_boxes];
    for i in 0..n {
        unordered[linear(&box_coord(i))].push(i);
    }

    // Order the non-empty boxes by (A)MMD on their cell centers.
    let occupied: Vec<usize> = (0..total_boxes)
        .filter(|&b| !unordered[b].is_empty())
        .collect();
    let mut center_coords = Vec::with_capacity(occupied.len() * d);
    for &b in &occupied {
        let mut rem = b;
        let mut coord = vec![0usize; d];
        for k in (0..d).rev() {
            coord[k] = rem % counts[k];
            rem /= counts[k];
        }
        for k in 0..d {
            let step = if lengths[k] <= 0.0 {
                0.0
            } else {
                lengths[k] / counts[k] as f64
            };
            center_coords.push(lo[k] + (coord[k] as f64 + 0.5) * step);
        }
    }
    let centers = LocationSet::from_flat(center_coords, d)?;
    let box_perm = if occupied.len() > AMMD_RECURSION_THRESHOLD {
        order_ammd(&centers, Metric::Full, points_per_box)?
    } else {
        order_mmd_exact(&centers, Metric::Full, None)?
    };
    let box_order: Vec<usize> = box_perm.forward().iter().map(|&k| occupied[k]).collect();

    // Moore neighborhood (3^d boxes) of a linear box id.
    let neighbors_of = |b: usize| -> Vec<usize> {
        let mut rem = b;
        let mut coord = vec![0usize; d];
        for k in (0..d).rev() {
            coord[k] = rem % counts[k];
            rem /= counts[k];
        }
        let mut out = Vec::with_capacity(3usize.pow(d as u32));
        let mut offs = vec![-1i64; d];
        'outer: loop {
            let mut c = vec![0usize; d];
            let mut ok = true;
            for k in 0..d {
                let v = coord[k] as i64 + offs[k];
                if v < 0 || v >= counts[k] as i64 {
                    ok = false;
                    break;
                }
                c[k] = v as usize;
            }
            if ok {
                out.push(linear(&c));
            }
            for k in (0..d).rev() {
                offs[k] += 1;
                if offs[k] <= 1 {
                    continue 'outer;
                }
                offs[k] = -1;
            }
            break;
        }
        out
    };

    let mut selected_in: Vec<Vec<usize>> = vec![Vec::new(); total_boxes];
    let mut forward = Vec::with_capacity(n);
    let mut remaining = n;
    while remaining > 0 {
        for &b in &box_order {
            if unordered[b].is_empty() {
                continue;
            }
            let nbrs = neighbors_of(b);
            // Largest minimum distance to selected points in the
            // neighborhood; empty neighborhoods compare as infinity and fall
            // back to the lowest-index rule.
            let mut pick_slot = 0usize;
            let mut pick_idx = usize::MAX;
            let mut pick_d2 = f64::NEG_INFINITY;
            for (slot, &i) in unordered[b].iter().enumerate() {
                let mut min_d2 = f64::INFINITY;
                for &nb in &nbrs {
                    for &s in &selected_in[nb] {
                        min_d2 = min_d2.min(locs.dist2(i, s, metric));
                    }
                }
                if min_d2 > pick_d2 || (min_d2 == pick_d2 && i < pick_idx) {
                    pick_d2 = min_d2;
                    pick_idx = i;
                    pick_slot = slot;
                }
            }
            unordered[b].swap_remove(pick_slot);
            selected_in[b].push(pick_idx);
            forward.push(pick_idx);
            remaining -= 1;
        }
    }
    Permutation::from_forward(forward)
}

/// Per-dimension box counts, proportional to bounding-box side lengths with
/// product close to `target`. Degenerate (zero-length) dimensions get one box.
fn box_counts(lengths: &[f64], target: usize) -> Vec<usize> {
    let active: Vec<f64> = lengths.iter().copied().filter(|&l| l > 0.0).collect();
    if active.is_empty() {
        return vec![1; lengths.len()];
    }
    let volume: f64 = active.iter().product();
    let scale = (target as f64 / volume).powf(1.0 / active.len() as f64);
    lengths
        .iter()
        .map(|&l| {
            if l > 0.0 {
                ((l * scale).round() as usize).max(1)
            } else {
                1
            }
        })
        .collect()
}

fn resolve_center(locs: &LocationSet, metric: Metric, center: Option<&[f64]>) -> Result<Vec<f64>> {
    let want = locs.metric_axes(metric).len();
    match center {
        Some(c) if c.len() == want => Ok(c.to_vec()),
        Some(c) => Err(Error::DimensionMismatch(format!(
            "center has dimension {}, metric uses {want}",
            c.len()
        ))),
        None => Ok(locs.mean_point(metric)),
    }
}

fn dist2_to(locs: &LocationSet, metric: Metric, i: usize, target: &[f64]) -> f64 {
    let p = locs.point(i);
    locs.metric_axes(metric)
        .zip(target)
        .map(|(ax, t)| {
            let d = p[ax] - t;
            d * d
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> LocationSet {
        LocationSet::from_flat(points.to_vec(), 1).unwrap()
    }

    /// Brute-force restatement of the MMD recursion, used as an oracle: at
    /// every step scan all unselected points and recompute the full minimum.
    fn mmd_brute(locs: &LocationSet, metric: Metric) -> Vec<usize> {
        let n = locs.len();
        let center = locs.mean_point(metric);
        let mut selected: Vec<usize> = Vec::new();
        let mut pool: Vec<usize> = (0..n).collect();
        let first = *pool
            .iter()
            .min_by(|&&a, &&b| {
                dist2_to(locs, metric, a, &center)
                    .total_cmp(&dist2_to(locs, metric, b, &center))
                    .then(a.cmp(&b))
            })
            .unwrap();
        selected.push(first);
        pool.retain(|&i| i != first);
        while !pool.is_empty() {
            let mut best_i = usize::MAX;
            let mut best = f64::NEG_INFINITY;
            for &i in &pool {
                let d = selected
                    .iter()
                    .map(|&s| locs.dist2(i, s, metric))
                    .fold(f64::INFINITY, f64::min);
                if d > best {
                    best = d;
                    best_i = i;
                }
            }
            selected.push(best_i);
            pool.retain(|&i| i != best_i);
        }
        selected
    }

    #[test]
    fn sorted_coordinate_one_dimension() {
        let locs = line(&[0.3, 0.1, 0.2]);
        let p = order_sorted_coordinate(&locs, Axis::Coord(0)).unwrap();
        assert_eq!(p.forward(), &[1, 2, 0]);
        let sorted = line(&[0.1, 0.2, 0.3]);
        let p = order_sorted_coordinate(&sorted, Axis::Coord(0)).unwrap();
        assert_eq!(p.forward(), Permutation::identity(3).forward());
    }

    #[test]
    fn coordinate_sum_matches_rotated_frame() {
        // Sorting on x+y equals sorting on the first coordinate after a
        // pi/4 rotation; checked on generic-position random points.
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let coords: Vec<f64> = (0..160)
            .map(|_| rand::Rng::random::<f64>(&mut rng))
            .collect();
        let locs = LocationSet::from_flat(coords.clone(), 2).unwrap();
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let rotated: Vec<f64> = coords
            .chunks(2)
            .flat_map(|p| [c * p[0] + c * p[1], -c * p[0] + c * p[1]])
            .collect();
        let rot = LocationSet::from_flat(rotated, 2).unwrap();
        let a = order_sorted_coordinate(&locs, Axis::Sum).unwrap();
        let b = order_sorted_coordinate(&rot, Axis::Coord(0)).unwrap();
        assert_eq!(a.forward(), b.forward());
    }

    #[test]
    fn middle_out_center_first_and_tie_break() {
        // plus-sign: center + four arms at equal distance
        let locs = LocationSet::from_rows(&[
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![0.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, -1.0],
        ])
        .unwrap();
        let p = order_middle_out(&locs, Metric::Full, None).unwrap();
        assert_eq!(p.forward()[0], 2, "center point first");
        assert_eq!(p.forward(), &[2, 0, 1, 3, 4], "arms in index order");
        // all equidistant from center: identity by tie-break
        let square = LocationSet::from_rows(&[
            vec![1.0, 1.0],
            vec![1.0, -1.0],
            vec![-1.0, 1.0],
            vec![-1.0, -1.0],
        ])
        .unwrap();
        let p = order_middle_out(&square, Metric::Full, None).unwrap();
        assert_eq!(p.forward(), Permutation::identity(4).forward());
    }

    #[test]
    fn random_ordering_deterministic_and_uniform() {
        assert_eq!(order_random(1, 9).forward(), &[0]);
        let a = order_random(40, 1234);
        let b = order_random(40, 1234);
        assert_eq!(a.forward(), b.forward());
        assert_ne!(order_random(40, 1235).forward(), a.forward());

        // chi-square style check: all 24 permutations of n=4 appear with
        // frequency 1/24 within 3 binomial standard deviations (fixed seed).
        let trials = 100_000;
        let mut counts = std::collections::HashMap::new();
        for t in 0..trials {
            *counts
                .entry(order_random(4, 500_000 + t).forward().to_vec())
                .or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 24);
        let p = 1.0 / 24.0;
        let sd = (p * (1.0 - p) / trials as f64).sqrt();
        for (perm, c) in counts {
            let freq = c as f64 / trials as f64;
            assert!((freq - p).abs() <= 3.0 * sd, "{perm:?}: freq {freq}");
        }
    }

    #[test]
    fn mmd_two_points_nearest_center_first() {
        // two points are always equidistant from their mean, so pass an
        // explicit center to make "nearer the center" meaningful
        let locs = line(&[0.0, 0.9]);
        let p = order_mmd_exact(&locs, Metric::Full, Some(&[0.7])).unwrap();
        assert_eq!(p.forward(), &[1, 0]);
        // with the default mean center the tie goes to the lower index
        let p = order_mmd_exact(&locs, Metric::Full, None).unwrap();
        assert_eq!(p.forward(), &[0, 1]);
    }

    #[test]
    fn mmd_square_corners_with_center() {
        // Unit-square corners plus the exact center. The center is selected
        // first; every corner is then equidistant from it (and stays tied on
        // the running minimum), so the corners follow in index order.
        let locs = LocationSet::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            vec![0.5, 0.5],
        ])
        .unwrap();
        let p = order_mmd_exact(&locs, Metric::Full, None).unwrap();
        assert_eq!(p.forward(), mmd_brute(&locs, Metric::Full).as_slice());
        assert_eq!(p.forward()[0], 4);
        assert_eq!(p.forward(), &[4, 0, 1, 2, 3]);
    }

    #[test]
    fn mmd_matches_brute_force_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        for trial in 0..20 {
            let n = 5 + (trial * 7) % 40;
            let d = 1 + trial % 3;
            let coords: Vec<f64> = (0..n * d)
                .map(|_| rand::Rng::random::<f64>(&mut rng))
                .collect();
            let locs = LocationSet::from_flat(coords, d).unwrap();
            let fast = order_mmd_exact(&locs, Metric::Full, None).unwrap();
            assert_eq!(
                fast.forward(),
                mmd_brute(&locs, Metric::Full).as_slice(),
                "trial {trial}"
            );
        }
    }

    #[test]
    fn mmd_prefix_swap_property() {
        // Swapping element k with any later element never increases the
        // minimum pairwise distance of the first k points.
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let n = 10;
        let coords: Vec<f64> = (0..n * 2)
            .map(|_| rand::Rng::random::<f64>(&mut rng))
            .collect();
        let locs = LocationSet::from_flat(coords, 2).unwrap();
        let p = order_mmd_exact(&locs, Metric::Full, None).unwrap();
        let fwd = p.forward();
        let min_pairwise = |ids: &[usize]| -> f64 {
            let mut best = f64::INFINITY;
            for a in 0..ids.len() {
                for b in (a + 1)..ids.len() {
                    best = best.min(locs.dist2(ids[a], ids[b], Metric::Full));
                }
            }
            best
        };
        for k in 2..=n {
            let base = min_pairwise(&fwd[..k]);
            for later in k..n {
                let mut swapped = fwd[..k].to_vec();
                swapped[k - 1] = fwd[later];
                assert!(
                    min_pairwise(&swapped) <= base + 1e-15,
                    "k={k} later={later}"
                );
            }
        }
    }

    #[test]
    fn mmd_prefix_spread_nonincreasing_on_grid() {
        let locs = LocationSet::regular_grid(&[8, 8]).unwrap();
        let p = order_mmd_exact(&locs, Metric::Full, None).unwrap();
        let fwd = p.forward();
        let mut prev = f64::INFINITY;
        for k in 2..=fwd.len() {
            let mut min_d = f64::INFINITY;
            let new = fwd[k - 1];
            for &old in &fwd[..k - 1] {
                min_d = min_d.min(locs.dist2(new, old, Metric::Full));
            }
            // min pairwise of prefix k = min(previous, distance of new point)
            let cur = prev.min(min_d);
            assert!(cur <= prev + 1e-15);
            prev = cur;
        }
    }

    #[test]
    fn ammd_single_box_equals_exact() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let coords: Vec<f64> = (0..12 * 2)
            .map(|_| rand::Rng::random::<f64>(&mut rng))
            .collect();
        let locs = LocationSet::from_flat(coords, 2).unwrap();
        let ammd = order_ammd(&locs, Metric::Full, 16).unwrap();
        let exact = order_mmd_exact(&locs, Metric::Full, None).unwrap();
        assert_eq!(ammd.forward(), exact.forward());
    }

    #[test]
    fn ammd_valid_bijection_and_deterministic() {
        let locs = LocationSet::regular_grid(&[20, 20]).unwrap();
        let a = order_ammd(&locs, Metric::Full, 16).unwrap();
        let b = order_ammd(&locs, Metric::Full, 16).unwrap();
        assert_eq!(a.forward(), b.forward());
        // bijection is validated by the constructor; double-check round trip
        for i in 0..locs.len() {
            assert_eq!(a.position(a.original(i)), i);
        }
    }

    #[test]
    fn ammd_prefix_spread_close_to_exact() {
        // Frozen quality floor: on a 20x20 grid the first 50 AMMD points
        // reach at least 0.7x the minimum pairwise distance of the first 50
        // exact-MMD points (measured ratio at freeze time: ~0.8).
        let locs = LocationSet::regular_grid(&[20, 20]).unwrap();
        let ammd = order_ammd(&locs, Metric::Full, 16).unwrap();
        let exact = order_mmd_exact(&locs, Metric::Full, None).unwrap();
        let min_pairwise = |ids: &[usize]| -> f64 {
            let mut best = f64::INFINITY;
            for a in 0..ids.len() {
                for b in (a + 1)..ids.len() {
                    best = best.min(locs.distance(ids[a], ids[b], Metric::Full));
                }
            }
            best
        };
        let ra = min_pairwise(&ammd.forward()[..50]);
        let re = min_pairwise(&exact.forward()[..50]);
        assert!(ra >= 0.7 * re, "AMMD spread {ra} vs exact {re}");
    }

    #[test]
    fn permutation_validation() {
        assert!(Permutation::from_forward(vec![0, 2, 1]).is_ok());
        assert!(Permutation::from_forward(vec![0, 0, 1]).is_err());
        assert!(Permutation::from_forward(vec![0, 3, 1]).is_err());
        let p = Permutation::from_forward(vec![2, 0, 1]).unwrap();
        let data = [10.0, 11.0, 12.0];
        let perm = p.permute(&data);
        assert_eq!(perm, vec![12.0, 10.0, 11.0]);
        assert_eq!(p.unpermute(&perm), data.to_vec());
    }
}
