//! Exact brute-force nearest-neighbor search.
//!
//! Points are held column-major so the distance from one query to every
//! reference point is a sequence of contiguous passes, one per feature.
//! Distance ties are broken by reference row index (smaller is nearer).

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{LabeledDataset, Subspace};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Column-major copy of a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct PointColumns {
    m: usize,
    d: usize,
    data: Vec<f64>,
}

impl PointColumns {
    pub fn from_matrix(points: &Matrix) -> Self {
        let (m, d) = (points.rows(), points.cols());
        let mut data = vec![0.0; m * d];
        for i in 0..m {
            for (c, v) in points.row(i).iter().enumerate() {
                data[c * m + i] = *v;
            }
        }
        Self { m, d, data }
    }

    /// The rows of `data` (all of them, or those listed) restricted to `s`.
    pub fn from_dataset(data: &LabeledDataset, s: &Subspace, rows: Option<&[usize]>) -> Self {
        let d = s.len();
        let m = rows.map_or(data.n(), <[usize]>::len);
        let mut out = vec![0.0; m * d];
        for (c, &j) in s.indices().iter().enumerate() {
            let col = &mut out[c * m..(c + 1) * m];
            match rows {
                Some(rows) => {
                    for (slot, &i) in col.iter_mut().zip(rows) {
                        *slot = data.value(i, j);
                    }
                }
                None => {
                    for (i, slot) in col.iter_mut().enumerate() {
                        *slot = data.value(i, j);
                    }
                }
            }
        }
        Self { m, d, data: out }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.d).map(|c| self.data[c * self.m + i]));
    }

    /// `out[j] = ‖point − x_j‖²` for every stored point `j`, summed over
    /// coordinates in order.
    pub fn squared_distances(&self, point: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(point.len(), self.d);
        out.clear();
        out.resize(self.m, 0.0);
        #[cfg(all(feature = "std", target_arch = "x86_64"))]
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2.
            unsafe { distances_avx2(&self.data, self.m, point, out) };
            return;
        }
        distances_generic(&self.data, self.m, point, out);
    }
}

impl PointColumns {
    /// Squared distances from several stored points (at most
    /// [`QUERY_BATCH`]) to every stored point; row `b` of `out` (length
    /// `queries.len() · len()`) belongs to `queries[b]`. Each entry equals
    /// what [`squared_distances`](Self::squared_distances) gives.
    pub fn squared_distances_from_rows(&self, queries: &[usize], q: &mut Vec<f64>, out: &mut Vec<f64>) {
        assert!(queries.len() <= QUERY_BATCH);
        q.clear();
        for &i in queries {
            q.extend((0..self.d).map(|c| self.data[c * self.m + i]));
        }
        // every entry is overwritten by the first coordinate pass
        out.resize(queries.len() * self.m, 0.0);
        if self.d == 0 {
            out.fill(0.0);
            return;
        }
        #[cfg(all(feature = "std", target_arch = "x86_64"))]
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2.
            unsafe { batch_avx2(&self.data, self.m, self.d, q, out) };
            return;
        }
        batch_generic(&self.data, self.m, self.d, q, out);
    }
}

/// Largest query batch for [`PointColumns::squared_distances_from_rows`].
pub const QUERY_BATCH: usize = 4;
const TILE: usize = 256;

#[cfg(all(feature = "std", target_arch = "x86_64"))]
#[target_feature(enable = "avx2")]
unsafe fn batch_avx2(data: &[f64], m: usize, d: usize, q: &[f64], out: &mut [f64]) {
    batch_generic(data, m, d, q, out)
}

#[inline(always)]
fn batch_generic(data: &[f64], m: usize, d: usize, q: &[f64], out: &mut [f64]) {
    let nq = if d == 0 { 0 } else { q.len() / d };
    let mut start = 0;
    while start < m {
        let end = (start + TILE).min(m);
        let col = |c: usize| &data[c * m + start..c * m + end];
        for b in 0..nq {
            let qb = &q[b * d..(b + 1) * d];
            let acc = &mut out[b * m + start..b * m + end];
            // first coordinate assigns: 0 + x² == x² exactly
            for (a, v) in acc.iter_mut().zip(col(0)) {
                let diff = v - qb[0];
                *a = diff * diff;
            }
            let mut c = 1;
            while c + 4 <= d {
                let (c0, c1, c2, c3) = (col(c), col(c + 1), col(c + 2), col(c + 3));
                let (q0, q1, q2, q3) = (qb[c], qb[c + 1], qb[c + 2], qb[c + 3]);
                for j in 0..acc.len() {
                    let (a, bb, e, f) = (c0[j] - q0, c1[j] - q1, c2[j] - q2, c3[j] - q3);
                    acc[j] = acc[j] + a * a + bb * bb + e * e + f * f;
                }
                c += 4;
            }
            while c < d {
                let qc = qb[c];
                for (a, v) in acc.iter_mut().zip(col(c)) {
                    let diff = v - qc;
                    *a += diff * diff;
                }
                c += 1;
            }
        }
        start = end;
    }
}

// Separate multiplies and adds (no FMA) keep the AVX2 build bit-identical
// to the generic one.
#[cfg(all(feature = "std", target_arch = "x86_64"))]
#[target_feature(enable = "avx2")]
unsafe fn distances_avx2(data: &[f64], m: usize, point: &[f64], out: &mut [f64]) {
    distances_generic(data, m, point, out)
}

#[inline(always)]
fn distances_generic(data: &[f64], m: usize, point: &[f64], out: &mut [f64]) {
    let d = point.len();
    let out = &mut out[..m];
    let col = |c: usize| &data[c * m..(c + 1) * m];
    let mut c = 0;
    // four coordinates per pass; same left-to-right sum as one at a time
    while c + 4 <= d {
        let (c0, c1, c2, c3) = (col(c), col(c + 1), col(c + 2), col(c + 3));
        let (q0, q1, q2, q3) = (point[c], point[c + 1], point[c + 2], point[c + 3]);
        for j in 0..m {
            let (a, b, e, f) = (c0[j] - q0, c1[j] - q1, c2[j] - q2, c3[j] - q3);
            out[j] = out[j] + a * a + b * b + e * e + f * f;
        }
        c += 4;
    }
    while c < d {
        let q = point[c];
        for (acc, v) in out.iter_mut().zip(col(c)) {
            let diff = v - q;
            *acc += diff * diff;
        }
        c += 1;
    }
}

/// Indices of the `k` smallest entries of `dist` ordered by (distance, index),
/// skipping `exclude`. `top` is reused scratch and holds the result.
pub fn nearest_k(dist: &[f64], k: usize, exclude: Option<usize>, top: &mut Vec<(f64, usize)>) {
    top.clear();
    if k == 0 {
        return;
    }
    let n = dist.len();
    if k + 1 > LANES || n < 8 * LANES {
        nearest_k_scan(dist, k, exclude, top);
        return;
    }
    // Each lane minimum is a distinct entry, so the (k+1)-th smallest of
    // them bounds the k-th smallest non-excluded entry.
    let mut mins = lane_minima(dist);
    let (_, &mut bound, _) = mins.select_nth_unstable_by(k, f64::total_cmp);
    let skip = exclude.unwrap_or(usize::MAX);
    for (c, chunk) in dist.chunks(16).enumerate() {
        let mut hit = false;
        for &v in chunk {
            hit |= v <= bound;
        }
        if hit {
            for (o, &dj) in chunk.iter().enumerate() {
                let j = c * 16 + o;
                if dj <= bound && j != skip {
                    top.push((dj, j));
                }
            }
        }
    }
    top.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    top.truncate(k);
}

/// Minimum ignoring NaN (`+∞` if there is none). Eight independent lanes so
/// the loop vectorizes.
const LANES: usize = 64;

/// Minimum over each residue class `j mod LANES`, ignoring NaN.
#[inline]
fn lane_minima(values: &[f64]) -> [f64; LANES] {
    let mut lanes = [f64::INFINITY; LANES];
    let chunks = values.chunks_exact(LANES);
    let rest = chunks.remainder();
    for chunk in chunks {
        for (lo, &v) in lanes.iter_mut().zip(chunk) {
            *lo = if v < *lo { v } else { *lo };
        }
    }
    for (lo, &v) in lanes.iter_mut().zip(rest) {
        *lo = if v < *lo { v } else { *lo };
    }
    lanes
}

fn nearest_k_scan(dist: &[f64], k: usize, exclude: Option<usize>, top: &mut Vec<(f64, usize)>) {
    let mut j = 0;
    while top.len() < k && j < dist.len() {
        if Some(j) != exclude {
            insert_sorted(top, dist[j], j);
        }
        j += 1;
    }
    if top.len() < k {
        return;
    }
    let mut worst = top[k - 1].0;
    for (j, &dj) in dist.iter().enumerate().skip(j) {
        // strict: an equal distance at a larger index loses
        if dj < worst && Some(j) != exclude {
            top.pop();
            insert_sorted(top, dj, j);
            worst = top[k - 1].0;
        }
    }
}

#[inline]
fn insert_sorted(top: &mut Vec<(f64, usize)>, dj: f64, j: usize) {
    // indices arrive in increasing order, so an equal distance goes after
    let pos = top.partition_point(|&(d, _)| d <= dj);
    top.insert(pos, (dj, j));
}

/// For each point, the Euclidean distance to its `k`-th nearest other point.
pub fn kth_nn_distance_within(points: &Matrix, k: usize) -> Result<Vec<f64>> {
    let m = points.rows();
    if k == 0 || k + 1 > m {
        return Err(Error::KTooLarge { k, max: m.saturating_sub(1) });
    }
    let cols = PointColumns::from_matrix(points);
    Ok(kth_within_columns(&cols, k))
}

pub(crate) fn kth_within_columns(cols: &PointColumns, k: usize) -> Vec<f64> {
    let mut dist = Vec::new();
    let mut top = Vec::with_capacity(k + 1);
    let mut q = Vec::new();
    (0..cols.len())
        .map(|i| {
            cols.point(i, &mut q);
            cols.squared_distances(&q, &mut dist);
            nearest_k(&dist, k, Some(i), &mut top);
            libm::sqrt(top[k - 1].0)
        })
        .collect()
}

/// For each query, the Euclidean distance to its `k`-th nearest reference point.
pub fn kth_nn_distance_between(queries: &Matrix, references: &Matrix, k: usize) -> Result<Vec<f64>> {
    if queries.cols() != references.cols() {
        return Err(Error::DimensionMismatch { expected: references.cols(), got: queries.cols() });
    }
    if k == 0 || k > references.rows() {
        return Err(Error::KTooLarge { k, max: references.rows() });
    }
    let q = PointColumns::from_matrix(queries);
    let r = PointColumns::from_matrix(references);
    Ok(kth_between_columns(&q, &r, k))
}

pub(crate) fn kth_between_columns(queries: &PointColumns, refs: &PointColumns, k: usize) -> Vec<f64> {
    let mut dist = Vec::new();
    let mut top = Vec::with_capacity(k + 1);
    let mut q = Vec::new();
    (0..queries.len())
        .map(|i| {
            queries.point(i, &mut q);
            refs.squared_distances(&q, &mut dist);
            nearest_k(&dist, k, None, &mut top);
            libm::sqrt(top[k - 1].0)
        })
        .collect()
}

/// Majority vote of the first `k` neighbor labels. An exact tie (even `k`)
/// goes to class 1 only when `ones_preferred`.
#[inline]
pub fn knn_vote(ones: usize, k: usize, ones_preferred: bool) -> u8 {
    match (2 * ones).cmp(&k) {
        core::cmp::Ordering::Greater => 1,
        core::cmp::Ordering::Less => 0,
        core::cmp::Ordering::Equal => ones_preferred as u8,
    }
}

/// Outcome of a leave-one-out pass over a grid of `k` values.
#[derive(Debug, Clone, PartialEq)]
pub struct LooOutcome {
    /// Misclassification counts per grid entry (partial if `complete` is false).
    pub errors: Vec<usize>,
    pub rows_evaluated: usize,
    pub complete: bool,
}

impl LooOutcome {
    /// Grid position with the fewest errors; ties go to the earlier entry.
    pub fn best(&self) -> (usize, usize) {
        let mut best = (0, usize::MAX);
        for (pos, &e) in self.errors.iter().enumerate() {
            if e < best.1 {
                best = (pos, e);
            }
        }
        best
    }
}

/// Leave-one-out k-NN misclassification counts for every `k` in `grid`.
///
/// When `cutoff` is set the pass stops as soon as every grid entry has more
/// than `cutoff` errors; the counts are then lower bounds.
pub fn loo_knn_counts(
    cols: &PointColumns,
    labels: &[u8],
    grid: &[usize],
    ones_preferred: bool,
    cutoff: Option<usize>,
) -> Result<LooOutcome> {
    loo_knn_counts_with(cols, labels, grid, ones_preferred, cutoff, None)
}

/// Per-row record of how often a row was misclassified in earlier
/// leave-one-out passes. Rows that fail often are visited first, which makes
/// hopeless subspaces reach the cutoff sooner; complete counts are unaffected.
#[derive(Debug, Clone)]
pub struct RowTally {
    order: Vec<usize>,
    misses: Vec<u32>,
    visits: Vec<u32>,
    dirty: bool,
}

impl RowTally {
    pub fn new(n: usize) -> Self {
        Self { order: (0..n).collect(), misses: vec![0; n], visits: vec![0; n], dirty: false }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Current visiting order: decreasing smoothed miss rate, then index.
    pub fn order(&mut self) -> &[usize] {
        if self.dirty {
            let (misses, visits) = (&self.misses, &self.visits);
            // (m+1)/(v+2) compared exactly by cross-multiplying
            let rate = |i: usize| (misses[i] as u64 + 1, visits[i] as u64 + 2);
            self.order.sort_unstable_by(|&a, &b| {
                let ((ma, va), (mb, vb)) = (rate(a), rate(b));
                (mb * va).cmp(&(ma * vb)).then(a.cmp(&b))
            });
            self.dirty = false;
        }
        &self.order
    }

    fn record(&mut self, row: usize, missed: bool) {
        self.visits[row] += 1;
        self.misses[row] += missed as u32;
        self.dirty = true;
    }
}

/// [`loo_knn_counts`] visiting rows in the tally's order and updating it.
/// A row counts as missed when the smallest grid `k` misclassifies it.
pub fn loo_knn_counts_with(
    cols: &PointColumns,
    labels: &[u8],
    grid: &[usize],
    ones_preferred: bool,
    cutoff: Option<usize>,
    mut tally: Option<&mut RowTally>,
) -> Result<LooOutcome> {
    let n = cols.len();
    debug_assert_eq!(labels.len(), n);
    let kmax = grid.iter().copied().max().unwrap_or(0);
    if grid.is_empty() || grid.contains(&0) || kmax + 1 > n {
        return Err(Error::KTooLarge { k: kmax, max: n.saturating_sub(1) });
    }
    if tally.as_ref().is_some_and(|t| t.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: tally.map_or(0, |t| t.len()) });
    }
    let kmin_pos = (0..grid.len()).min_by_key(|&g| grid[g]).unwrap_or(0);
    let order: Option<Vec<usize>> = tally.as_mut().map(|t| t.order().to_vec());
    let mut errors = vec![0usize; grid.len()];
    let mut dist = Vec::with_capacity(QUERY_BATCH * n);
    let mut top = Vec::with_capacity(kmax + 1);
    let mut q = Vec::with_capacity(QUERY_BATCH * cols.dim());
    let mut batch = [0usize; QUERY_BATCH];
    for step in 0..n {
        let i = order.as_ref().map_or(step, |o| o[step]);
        let slot = step % QUERY_BATCH;
        if slot == 0 {
            let len = QUERY_BATCH.min(n - step);
            for (b, x) in batch[..len].iter_mut().enumerate() {
                *x = order.as_ref().map_or(step + b, |o| o[step + b]);
            }
            cols.squared_distances_from_rows(&batch[..len], &mut q, &mut dist);
        }
        nearest_k(&dist[slot * n..(slot + 1) * n], kmax, Some(i), &mut top);
        for (g, (slot, &k)) in errors.iter_mut().zip(grid).enumerate() {
            let ones = top[..k].iter().filter(|&&(_, j)| labels[j] == 1).count();
            let wrong = knn_vote(ones, k, ones_preferred) != labels[i];
            *slot += wrong as usize;
            if g == kmin_pos {
                if let Some(t) = tally.as_mut() {
                    t.record(i, wrong);
                }
            }
        }
        if let Some(c) = cutoff {
            if errors.iter().all(|&e| e > c) {
                return Ok(LooOutcome { errors, rows_evaluated: step + 1, complete: false });
            }
        }
    }
    Ok(LooOutcome { errors, rows_evaluated: n, complete: true })
}

pub fn loo_knn_error(restricted: &LabeledDataset, k: usize) -> Result<f64> {
    let cols = PointColumns::from_dataset(restricted, &Subspace::full(restricted.p()), None);
    let ones = restricted.labels().iter().filter(|&&y| y == 1).count();
    let ones_preferred = 2 * ones > restricted.n();
    let out = loo_knn_counts(&cols, restricted.labels(), &[k], ones_preferred, None)?;
    Ok(out.errors[0] as f64 / restricted.n() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(values: &[f64]) -> Matrix {
        Matrix::from_row_major(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn within_hand_values() {
        let d = kth_nn_distance_within(&col(&[0.0, 1.0, 3.0]), 1).unwrap();
        assert_eq!(d, vec![1.0, 1.0, 2.0]);
        let far = kth_nn_distance_within(&col(&[0.0, 1.0, 3.0]), 2).unwrap();
        assert_eq!(far, vec![3.0, 2.0, 3.0]);
        assert_eq!(kth_nn_distance_within(&col(&[0.0, 1.0, 3.0]), 3), Err(Error::KTooLarge { k: 3, max: 2 }));
    }

    #[test]
    fn between_includes_every_reference() {
        let d = kth_nn_distance_between(&col(&[0.0, 1.0]), &col(&[10.0, 11.0]), 1).unwrap();
        assert_eq!(d, vec![10.0, 9.0]);
        let d = kth_nn_distance_between(&col(&[0.0]), &col(&[0.0, 2.0]), 2).unwrap();
        assert_eq!(d, vec![2.0]);
        assert!(kth_nn_distance_between(&col(&[0.0]), &col(&[0.0, 2.0]), 3).is_err());
    }

    #[test]
    fn ties_break_by_index() {
        let mut top = Vec::new();
        nearest_k(&[1.0, 0.5, 1.0, 0.5], 3, None, &mut top);
        assert_eq!(top.iter().map(|t| t.1).collect::<Vec<_>>(), vec![1, 3, 0]);
        nearest_k(&[1.0, 0.5, 1.0, 0.5], 2, Some(1), &mut top);
        assert_eq!(top.iter().map(|t| t.1).collect::<Vec<_>>(), vec![3, 0]);
    }

    #[test]
    fn loo_separated_clusters() {
        let values = [0.0, 0.1, 0.2, 10.0, 10.1, 10.2];
        let d = LabeledDataset::new(values.to_vec(), 1, vec![0, 0, 0, 1, 1, 1]).unwrap();
        assert_eq!(loo_knn_error(&d, 1).unwrap(), 0.0);
        let same = LabeledDataset::new(values.to_vec(), 1, vec![1; 6]).unwrap();
        assert_eq!(loo_knn_error(&same, 3).unwrap(), 0.0);
        assert_eq!(loo_knn_error(&d, 6), Err(Error::KTooLarge { k: 6, max: 5 }));
    }

    #[test]
    fn vote_ties() {
        assert_eq!(knn_vote(2, 3, false), 1);
        assert_eq!(knn_vote(1, 3, true), 0);
        assert_eq!(knn_vote(2, 4, true), 1);
        assert_eq!(knn_vote(2, 4, false), 0);
    }

    #[test]
    fn cutoff_stops_early() {
        let values: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let labels = (0..20).map(|i| (i % 2) as u8).collect::<Vec<_>>();
        let d = LabeledDataset::new(values, 1, labels.clone()).unwrap();
        let cols = PointColumns::from_dataset(&d, &Subspace::full(1), None);
        let full = loo_knn_counts(&cols, &labels, &[1], false, None).unwrap();
        assert_eq!(full.errors, vec![20]);
        let cut = loo_knn_counts(&cols, &labels, &[1], false, Some(3)).unwrap();
        assert!(!cut.complete);
        assert_eq!(cut.rows_evaluated, 4);
    }
}
