//! Point-process mapping and fully autonomous DBSCAN.
//!
//! Busy cells become 2-D points, the frequency axis is compressed by a
//! scaling factor `delta` so Euclidean distances are meaningful, and DBSCAN
//! runs with both of its parameters derived from the data: the minimum
//! cluster size from the logarithm of the point count, and the scan radius
//! from the knee of the sorted distance-to-mu-th-neighbor curve. No manual
//! inputs anywhere.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::collections::VecDeque;

use crate::detection::{GridKind, OccupancyGrid};
use crate::error::{Error, Result};

/// Which plane a point set lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    /// Raw grid indices `(n, k)` of busy cells.
    TimeFrequency,
    /// After `g(x) = (x_t, delta * x_f)`.
    Mapped,
    /// Mapped points carrying cluster labels (0 = noise).
    Clustered,
}

/// DBSCAN parameters. `min_points` counts the point itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    /// Minimum neighbors (including self) within `radius` for a core point.
    pub min_points: u32,
    /// Neighborhood radius in mapped-plane units.
    pub radius: f64,
    /// Frequency scaling factor used by the mapping, in `(0, 1)`.
    pub scaling: f64,
}

impl DbscanParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_points == 0 {
            return Err(Error::InvalidArgument("min_points must be >= 1".into()));
        }
        if !(self.radius > 0.0) {
            return Err(Error::InvalidArgument("radius must be > 0".into()));
        }
        check_delta(self.scaling)?;
        Ok(())
    }
}

/// Parameters chosen by the autonomous pipeline, kept for the run manifest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutoParams {
    pub min_points: u32,
    pub epsilon: f64,
    pub delta: f64,
    /// Set when the distance curve had no usable knee (constant or linear).
    pub degenerate_knee: bool,
}

/// A set of 2-D points with an optional cluster labeling.
#[derive(Debug, Clone)]
pub struct PointSet {
    /// `(t, f)` coordinates; grid indices in time-frequency space, scaled
    /// in mapped space.
    pub points: Vec<(f64, f64)>,
    pub space: Space,
    /// Per-point cluster ids, 0 = noise; present iff `space == Clustered`.
    pub labels: Option<Vec<u32>>,
    /// Number of clusters `N` (labels run 1..=N).
    pub n_clusters: u32,
    /// Parameters recorded by [`auto_cluster`].
    pub chosen: Option<AutoParams>,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points carrying a given cluster label.
    pub fn cluster(&self, id: u32) -> Vec<(f64, f64)> {
        match &self.labels {
            Some(labels) => self
                .points
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == id)
                .map(|(p, _)| *p)
                .collect(),
            None => Vec::new(),
        }
    }

    /// Number of points labeled noise.
    pub fn noise_count(&self) -> usize {
        self.labels.as_ref().map_or(0, |l| l.iter().filter(|&&x| x == 0).count())
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// One point per busy cell, at integer coordinates `(n, k)`, scanned in
/// row-major order so downstream labeling is deterministic.
pub fn grid_to_points(grid: &OccupancyGrid) -> Result<PointSet> {
    if grid.kind != GridKind::Observed {
        return Err(Error::InvalidArgument("clustering expects the observed grid B".into()));
    }
    let mut points = Vec::with_capacity(grid.ones());
    for n in 0..grid.rows() {
        let row = grid.bits.row(n);
        for (k, &b) in row.iter().enumerate() {
            if b != 0 {
                points.push((n as f64, k as f64));
            }
        }
    }
    Ok(PointSet {
        points,
        space: Space::TimeFrequency,
        labels: None,
        n_clusters: 0,
        chosen: None,
    })
}

/// Map `(n, k) -> (n, delta * k)`.
pub fn map_to_euclidean(pts: &PointSet, delta: f64) -> Result<PointSet> {
    check_delta(delta)?;
    if pts.space != Space::TimeFrequency {
        return Err(Error::InvalidArgument("points are not in time-frequency space".into()));
    }
    Ok(PointSet {
        points: pts.points.iter().map(|&(t, f)| (t, delta * f)).collect(),
        space: Space::Mapped,
        labels: None,
        n_clusters: 0,
        chosen: None,
    })
}

/// Inverse of [`map_to_euclidean`]; exact on points produced by it.
pub fn map_to_time_frequency(pts: &PointSet, delta: f64) -> Result<PointSet> {
    check_delta(delta)?;
    if pts.space == Space::TimeFrequency {
        return Err(Error::InvalidArgument("points are already in time-frequency space".into()));
    }
    Ok(PointSet {
        points: pts.points.iter().map(|&(t, f)| (t, f / delta)).collect(),
        space: Space::TimeFrequency,
        labels: pts.labels.clone(),
        n_clusters: pts.n_clusters,
        chosen: pts.chosen,
    })
}

/// `mu = floor(ln N_p)`, clamped to at least 1.
pub fn min_points_heuristic(pts: &PointSet) -> Result<u32> {
    if pts.is_empty() {
        return Err(Error::InsufficientData("no points to cluster".into()));
    }
    Ok(((pts.len() as f64).ln().floor() as u32).max(1))
}

/// Uniform bucket index over the mapped plane for exact radius queries.
struct BucketIndex<'a> {
    points: &'a [(f64, f64)],
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<u32>>,
}

impl<'a> BucketIndex<'a> {
    fn build(points: &'a [(f64, f64)], cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (i, &(x, y)) in points.iter().enumerate() {
            buckets
                .entry(((x / cell).floor() as i64, (y / cell).floor() as i64))
                .or_default()
                .push(i as u32);
        }
        Self { points, cell, buckets }
    }

    /// Candidate point indices from the buckets within `reach` cells of
    /// `p`. Falls back to every point when scanning that many buckets
    /// would cost more than a linear pass.
    fn candidates(&self, p: (f64, f64), reach: i64, skip: Option<usize>, out: &mut Vec<u32>) {
        out.clear();
        let cells = (2 * reach + 1).saturating_mul(2 * reach + 1) as usize;
        if cells >= self.buckets.len() || cells >= self.points.len() {
            out.extend(
                (0..self.points.len() as u32).filter(|&j| Some(j as usize) != skip),
            );
            return;
        }
        let cx = (p.0 / self.cell).floor() as i64;
        let cy = (p.1 / self.cell).floor() as i64;
        for bx in cx - reach..=cx + reach {
            for by in cy - reach..=cy + reach {
                if let Some(ids) = self.buckets.get(&(bx, by)) {
                    out.extend(ids.iter().copied().filter(|&j| Some(j as usize) != skip));
                }
            }
        }
    }

    /// Indices of all points within Euclidean distance `r` of `p`
    /// (inclusive), in ascending index order.
    fn within(&self, p: (f64, f64), r: f64) -> Vec<u32> {
        let reach = (r / self.cell).ceil() as i64;
        let r2 = r * r;
        let mut cand = Vec::new();
        self.candidates(p, reach, None, &mut cand);
        let mut out: Vec<u32> = cand
            .into_iter()
            .filter(|&i| {
                let (x, y) = self.points[i as usize];
                let dx = x - p.0;
                let dy = y - p.1;
                dx * dx + dy * dy <= r2
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Exact distance from point `i` to its `k`-th nearest neighbor,
    /// excluding itself. Expands the search radius until `k` neighbors are
    /// provably inside it.
    fn kth_neighbor_distance(&self, i: usize, k: usize) -> f64 {
        let p = self.points[i];
        let mut r = self.cell.max(f64::MIN_POSITIVE);
        let mut cand = Vec::new();
        loop {
            let reach = (r / self.cell).ceil() as i64;
            self.candidates(p, reach, Some(i), &mut cand);
            let exhaustive = cand.len() == self.points.len() - 1;
            if cand.len() >= k {
                let mut d2s: Vec<f64> = cand
                    .iter()
                    .map(|&j| {
                        let (x, y) = self.points[j as usize];
                        let dx = x - p.0;
                        let dy = y - p.1;
                        dx * dx + dy * dy
                    })
                    .collect();
                d2s.select_nth_unstable_by(k - 1, f64::total_cmp);
                let d = d2s[k - 1].sqrt();
                // trust the answer once the k-th neighbor provably lies
                // inside the scanned square, or nothing was left unscanned
                if d <= r || exhaustive {
                    return d;
                }
            }
            r *= 2.0;
        }
    }
}

/// Pick a bucket size that keeps occupancy per bucket reasonable.
fn knn_cell_size(points: &[(f64, f64)], k: usize) -> f64 {
    let n = points.len() as f64;
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in points {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    let span = (xmax - xmin).max(ymax - ymin);
    if span <= 0.0 {
        return 1.0; // all points coincide; any cell size works
    }
    let area = (xmax - xmin) * (ymax - ymin);
    if area > 0.0 {
        (area * k as f64 / n).sqrt().max(span * 1e-9)
    } else {
        // collinear set: bucket along the occupied axis
        (span * k as f64 / n).max(span * 1e-9)
    }
}

/// Distance from every point to its `mu`-th nearest neighbor (excluding
/// itself), sorted ascending.
pub fn knn_distance_curve(pts: &PointSet, mu: u32) -> Result<Vec<f64>> {
    let k = mu as usize;
    if pts.len() <= k {
        return Err(Error::InsufficientData(format!(
            "{} points cannot have a {k}-th neighbor",
            pts.len()
        )));
    }
    let index = BucketIndex::build(&pts.points, knn_cell_size(&pts.points, k));
    let mut curve: Vec<f64> = {
        use rayon::prelude::*;
        (0..pts.len())
            .into_par_iter()
            .map(|i| index.kth_neighbor_distance(i, k))
            .collect()
    };
    curve.sort_by(f64::total_cmp);
    Ok(curve)
}

/// A knee selected from a sorted distance curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knee {
    /// Curve value at the knee: the chosen scan radius.
    pub epsilon: f64,
    /// Index of the knee in the curve.
    pub index: usize,
    /// Set when the curve is constant or a straight line (no curvature);
    /// the midpoint value is returned in that case.
    pub degenerate: bool,
}

/// Value furthest from the chord joining the first and last curve points.
/// Ties break toward the smaller index, i.e. the tighter radius.
pub fn knee_point(curve: &[f64]) -> Result<Knee> {
    if curve.len() < 3 {
        return Err(Error::InsufficientData("knee detection needs >= 3 curve points".into()));
    }
    if curve.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("curve must be non-decreasing".into()));
    }
    let n = curve.len();
    let y0 = curve[0];
    let y1 = curve[n - 1];
    let dx = (n - 1) as f64;
    let dy = y1 - y0;
    // perpendicular distance to the chord, up to a constant factor
    let mut best = 0.0f64;
    let mut best_idx = 0usize;
    for (i, &y) in curve.iter().enumerate() {
        let d = (dy * i as f64 - dx * (y - y0)).abs();
        if d > best {
            best = d;
            best_idx = i;
        }
    }
    let scale = dx.hypot(dy).max(1.0) * (y1.abs().max(1.0));
    if best <= 1e-12 * scale {
        let mid = n / 2;
        return Ok(Knee { epsilon: curve[mid], index: mid, degenerate: true });
    }
    Ok(Knee { epsilon: curve[best_idx], index: best_idx, degenerate: false })
}

const UNVISITED: u32 = u32::MAX;
const NOISE: u32 = 0;

/// Classic DBSCAN over mapped points.
///
/// Core points have at least `min_points` neighbors within `radius`
/// (counting themselves, inclusive distance). Clusters are labeled 1..=N in
/// first-discovery order; noise keeps label 0. Seeds are visited in input
/// order and neighbor lists in ascending index order, so the labeling is a
/// pure function of the input ordering.
pub fn dbscan(pts: &PointSet, params: &DbscanParams) -> Result<PointSet> {
    params.validate()?;
    if pts.space != Space::Mapped {
        return Err(Error::InvalidArgument("dbscan expects mapped-space points".into()));
    }
    let index = BucketIndex::build(&pts.points, params.radius.max(1e-12));
    let labels = dbscan_labels(pts.len(), params.min_points as usize, |i| {
        index.within(pts.points[i], params.radius)
    });
    let n_clusters = labels.iter().copied().max().unwrap_or(0);
    Ok(PointSet {
        points: pts.points.clone(),
        space: Space::Clustered,
        labels: Some(labels),
        n_clusters,
        chosen: pts.chosen,
    })
}

/// Label propagation shared by the production path and the quadratic
/// reference used in tests: identical given identical neighbor queries.
pub(crate) fn dbscan_labels<F>(n: usize, min_points: usize, mut neighbors: F) -> Vec<u32>
where
    F: FnMut(usize) -> Vec<u32>,
{
    let mut labels = vec![UNVISITED; n];
    let mut cluster = 0u32;
    let mut queue = VecDeque::new();
    for i in 0..n {
        if labels[i] != UNVISITED {
            continue;
        }
        let seeds = neighbors(i);
        if seeds.len() < min_points {
            labels[i] = NOISE;
            continue;
        }
        cluster += 1;
        labels[i] = cluster;
        queue.clear();
        queue.extend(seeds);
        while let Some(j) = queue.pop_front() {
            let j = j as usize;
            if labels[j] == NOISE {
                labels[j] = cluster; // border point reached from a core
                continue;
            }
            if labels[j] != UNVISITED {
                continue;
            }
            labels[j] = cluster;
            let nj = neighbors(j);
            if nj.len() >= min_points {
                queue.extend(nj);
            }
        }
    }
    labels
}

/// The full autonomous pipeline: points, mapping, `mu` heuristic, `mu`-NN
/// curve, knee radius, DBSCAN. Chosen parameters are recorded on the result.
///
/// Degenerate grids (fewer than 3 busy cells, or too few points for a
/// `mu`-th neighbor) yield an all-noise clustering with zero clusters
/// rather than an error.
pub fn auto_cluster(grid: &OccupancyGrid, delta: f64) -> Result<PointSet> {
    let tf = grid_to_points(grid)?;
    let mapped = map_to_euclidean(&tf, delta)?;
    let all_noise = |mapped: &PointSet, mu: u32| PointSet {
        points: mapped.points.clone(),
        space: Space::Clustered,
        labels: Some(vec![NOISE; mapped.len()]),
        n_clusters: 0,
        chosen: Some(AutoParams { min_points: mu, epsilon: 0.0, delta, degenerate_knee: true }),
    };
    if mapped.len() < 3 {
        return Ok(all_noise(&mapped, 1));
    }
    let mu = min_points_heuristic(&mapped)?;
    if mapped.len() <= mu as usize {
        return Ok(all_noise(&mapped, mu));
    }
    let curve = knn_distance_curve(&mapped, mu)?;
    let knee = match knee_point(&curve) {
        Ok(k) => k,
        Err(_) => return Ok(all_noise(&mapped, mu)),
    };
    if knee.epsilon <= 0.0 {
        // an all-coincident prefix can put the knee at distance zero; fall
        // back to the smallest positive curve value
        let eps = curve.iter().copied().find(|&d| d > 0.0);
        match eps {
            None => return Ok(all_noise(&mapped, mu)),
            Some(e) => {
                let params = DbscanParams { min_points: mu, radius: e, scaling: delta };
                let mut out = dbscan(&mapped, &params)?;
                out.chosen = Some(AutoParams {
                    min_points: mu,
                    epsilon: e,
                    delta,
                    degenerate_knee: true,
                });
                return Ok(out);
            }
        }
    }
    let params = DbscanParams { min_points: mu, radius: knee.epsilon, scaling: delta };
    let mut out = dbscan(&mapped, &params)?;
    out.chosen = Some(AutoParams {
        min_points: mu,
        epsilon: knee.epsilon,
        delta,
        degenerate_knee: knee.degenerate,
    });
    Ok(out)
}
