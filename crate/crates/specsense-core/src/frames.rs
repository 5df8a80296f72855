//! From clusters to frames: quartile-fence outlier filtering, void
//! reinforcement, the estimated occupancy matrix and duty cycles.
//!
//! Each cluster's extent per axis is `kappa * (Q3 - Q1)` centered at the
//! quartile midpoint (`kappa = 2` recovers the full side length of an
//! ideally uniform rectangle). Points outside the box are outliers and are
//! dropped; every grid cell inside the box is then assumed busy, so frames
//! come out as solid rectangles and the cluster count is preserved.
//!
//! Quartiles use the mid-distribution convention: the empirical CDF gets a
//! half-step jump at each distinct value and is interpolated linearly
//! between them. On a complete rectangle of cells this yields the exact
//! side length for every width/parity, which plain order-statistic
//! interpolation does not.

use serde::{Deserialize, Serialize};

use crate::clustering::{PointSet, Space};
use crate::detection::{GridKind, OccupancyGrid};
use crate::error::{Error, Result};
use crate::grid::Matrix;

/// Relative slack used when snapping box edges to the cell lattice.
const EDGE_TOL: f64 = 1e-9;

/// Mid-distribution quantile of `values` at probability `p`.
///
/// Builds the CDF knots `(v_i, (count_below + count_at / 2) / n)` over the
/// distinct values and interpolates linearly between them, clamping outside
/// the knot range. Exact quartiles for uniformly occupied cell lattices.
pub fn mid_quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientData("quantile of an empty set".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("quantile level {p} outside [0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    // distinct values with mid-step CDF levels
    let mut knots: Vec<(f64, f64)> = Vec::new();
    let mut i = 0usize;
    let mut below = 0usize;
    while i < sorted.len() {
        let v = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == v {
            j += 1;
        }
        let count = j - i;
        knots.push((v, (below as f64 + count as f64 / 2.0) / n));
        below += count;
        i = j;
    }
    if p <= knots[0].1 {
        return Ok(knots[0].0);
    }
    if p >= knots[knots.len() - 1].1 {
        return Ok(knots[knots.len() - 1].0);
    }
    let pos = knots.partition_point(|&(_, f)| f < p);
    let (v1, f1) = knots[pos - 1];
    let (v2, f2) = knots[pos];
    Ok(v1 + (p - f1) / (f2 - f1) * (v2 - v1))
}

/// Axis-aligned frame box in the clustering plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    /// Box center per axis (quartile midpoint).
    pub center: (f64, f64),
    /// Full extent `kappa * (Q3 - Q1)` per axis; 0 flags a degenerate axis.
    pub extent: (f64, f64),
}

impl BoundingBox {
    pub fn t_lo(&self) -> f64 {
        self.center.0 - self.extent.0 / 2.0
    }

    pub fn t_hi(&self) -> f64 {
        self.center.0 + self.extent.0 / 2.0
    }

    pub fn f_lo(&self) -> f64 {
        self.center.1 - self.extent.1 / 2.0
    }

    pub fn f_hi(&self) -> f64 {
        self.center.1 + self.extent.1 / 2.0
    }

    /// True when either axis collapsed to zero interquartile range.
    pub fn degenerate(&self) -> bool {
        self.extent.0 == 0.0 || self.extent.1 == 0.0
    }

    fn contains(&self, p: (f64, f64)) -> bool {
        p.0 >= self.t_lo() && p.0 <= self.t_hi() && p.1 >= self.f_lo() && p.1 <= self.f_hi()
    }
}

/// Per-axis quartile box of a cluster with multiplier `kappa`.
///
/// A single-point or single-value axis yields zero extent; the caller
/// widens such axes to one cell at reinforcement time.
pub fn tukey_bounds(points: &[(f64, f64)], kappa: f64) -> Result<BoundingBox> {
    if points.is_empty() {
        return Err(Error::InsufficientData("empty cluster".into()));
    }
    if kappa <= 0.0 {
        return Err(Error::InvalidArgument("kappa must be positive".into()));
    }
    let ts: Vec<f64> = points.iter().map(|p| p.0).collect();
    let fs: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (tq1, tq3) = (mid_quantile(&ts, 0.25)?, mid_quantile(&ts, 0.75)?);
    let (fq1, fq3) = (mid_quantile(&fs, 0.25)?, mid_quantile(&fs, 0.75)?);
    Ok(BoundingBox {
        center: ((tq1 + tq3) / 2.0, (fq1 + fq3) / 2.0),
        extent: (kappa * (tq3 - tq1), kappa * (fq3 - fq1)),
    })
}

/// Retain exactly the points inside the box (inclusive edges); both axes
/// are filtered independently. Returns the retained points and the number
/// of outliers dropped.
pub fn filter_outliers(points: &[(f64, f64)], bounds: &BoundingBox) -> (Vec<(f64, f64)>, usize) {
    let retained: Vec<(f64, f64)> = points.iter().copied().filter(|&p| bounds.contains(p)).collect();
    let removed = points.len() - retained.len();
    (retained, removed)
}

/// Every lattice cell center inside the box, on a lattice of the given
/// steps per axis. A degenerate axis contributes the single cell nearest
/// the box center, so no frame has zero area.
pub fn reinforce(bounds: &BoundingBox, steps: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    if !(steps.0 > 0.0 && steps.1 > 0.0) {
        return Err(Error::InvalidArgument("lattice steps must be positive".into()));
    }
    let (t_lo, t_hi) = axis_cells(bounds.t_lo(), bounds.t_hi(), bounds.center.0, steps.0);
    let (f_lo, f_hi) = axis_cells(bounds.f_lo(), bounds.f_hi(), bounds.center.1, steps.1);
    let mut out = Vec::with_capacity(((t_hi - t_lo + 1) * (f_hi - f_lo + 1)).max(0) as usize);
    for ti in t_lo..=t_hi {
        for fi in f_lo..=f_hi {
            out.push((ti as f64 * steps.0, fi as f64 * steps.1));
        }
    }
    Ok(out)
}

/// Inclusive lattice index range covered by `[lo, hi]` on an axis of the
/// given step; collapses to the cell nearest `center` when empty.
fn axis_cells(lo: f64, hi: f64, center: f64, step: f64) -> (i64, i64) {
    let tol = EDGE_TOL * step.max(1.0);
    let a = ((lo - tol) / step).ceil() as i64;
    let b = ((hi + tol) / step).floor() as i64;
    if a > b {
        let c = (center / step).round() as i64;
        (c, c)
    } else {
        (a, b)
    }
}

/// One detected transmission frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// Cluster label this frame came from (1..=N).
    pub cluster_id: u32,
    /// Inclusive row range of the reinforced box, grid cells.
    pub row_span: (usize, usize),
    /// Inclusive column range of the reinforced box, grid cells.
    pub col_span: (usize, usize),
    /// Box center on the physical time axis, seconds.
    pub centroid_time_s: f64,
    /// Box center on the physical frequency axis, Hz.
    pub centroid_freq_hz: f64,
    /// Time-on-air: row count times the time resolution, seconds.
    pub toa_s: f64,
    /// Bandwidth: column count times the frequency resolution, Hz.
    pub bandwidth_hz: f64,
    /// Number of grid cells in the reinforced box.
    pub point_count: usize,
}

impl Frame {
    pub fn rows(&self) -> usize {
        self.row_span.1 - self.row_span.0 + 1
    }

    pub fn cols(&self) -> usize {
        self.col_span.1 - self.col_span.0 + 1
    }

    fn intersects(&self, other: &Frame) -> bool {
        self.row_span.0 <= other.row_span.1
            && other.row_span.0 <= self.row_span.1
            && self.col_span.0 <= other.col_span.1
            && other.col_span.0 <= self.col_span.1
    }
}

/// All frames recovered from one capture, with the grid geometry needed to
/// interpret them physically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameSet {
    pub frames: Vec<Frame>,
    /// Time resolution of the source grid, seconds per row.
    pub time_resolution: f64,
    /// Frequency resolution of the source grid, Hz per column.
    pub freq_resolution: f64,
    /// Total capture span in seconds.
    pub time_span: f64,
    /// Band edges `(low, high)` in Hz.
    pub band: (f64, f64),
}

impl FrameSet {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Output of [`estimate_occupancy`].
#[derive(Debug, Clone)]
pub struct SenseEstimate {
    /// Estimated occupancy matrix `O` (union of reinforced frame boxes).
    pub grid: OccupancyGrid,
    pub frames: FrameSet,
    /// Cluster-id pairs whose reinforced boxes overlap on the grid.
    pub overlaps: Vec<(u32, u32)>,
    /// Clusters dropped because filtering removed every point.
    pub dropped: Vec<u32>,
}

/// Per cluster: quartile box, outlier filter, reinforcement; the union of
/// the reinforced boxes mapped back to grid cells is the estimated
/// occupancy `O`. Overlapping boxes set cells once; the pair is recorded.
pub fn estimate_occupancy(
    clustered: &PointSet,
    source: &OccupancyGrid,
    delta: f64,
    kappa: f64,
) -> Result<SenseEstimate> {
    if clustered.space != Space::Clustered {
        return Err(Error::InvalidArgument("estimate_occupancy expects clustered points".into()));
    }
    let labels = clustered
        .labels
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("clustered point set has no labels".into()))?;
    let rows = source.rows();
    let cols = source.cols();
    let mut bits = Matrix::<u8>::zeros(rows, cols);
    let mut frames = Vec::new();
    let mut dropped = Vec::new();

    for id in 1..=clustered.n_clusters {
        let pts: Vec<(f64, f64)> = clustered
            .points
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == id)
            .map(|(p, _)| *p)
            .collect();
        if pts.is_empty() {
            dropped.push(id);
            continue;
        }
        let bounds = tukey_bounds(&pts, kappa)?;
        let (retained, _removed) = filter_outliers(&pts, &bounds);
        if retained.is_empty() {
            dropped.push(id);
            continue;
        }
        // reinforced box on the (1, delta) mapped lattice, mapped back to
        // integer grid cells and clamped to the capture extent
        let (n_lo, n_hi) = axis_cells(bounds.t_lo(), bounds.t_hi(), bounds.center.0, 1.0);
        let (k_lo, k_hi) = axis_cells(bounds.f_lo(), bounds.f_hi(), bounds.center.1, delta);
        let n_lo = n_lo.clamp(0, rows as i64 - 1) as usize;
        let n_hi = n_hi.clamp(0, rows as i64 - 1) as usize;
        let k_lo = k_lo.clamp(0, cols as i64 - 1) as usize;
        let k_hi = k_hi.clamp(0, cols as i64 - 1) as usize;
        for n in n_lo..=n_hi {
            let row = bits.row_mut(n);
            for cell in &mut row[k_lo..=k_hi] {
                *cell = 1;
            }
        }
        let n_cells = n_hi - n_lo + 1;
        let k_cells = k_hi - k_lo + 1;
        frames.push(Frame {
            cluster_id: id,
            row_span: (n_lo, n_hi),
            col_span: (k_lo, k_hi),
            centroid_time_s: source.time_axis.value(n_lo)
                + (n_cells as f64 - 1.0) / 2.0 * source.time_axis.step,
            centroid_freq_hz: source.freq_axis.value(k_lo)
                + (k_cells as f64 - 1.0) / 2.0 * source.freq_axis.step,
            toa_s: n_cells as f64 * source.time_axis.step,
            bandwidth_hz: k_cells as f64 * source.freq_axis.step,
            point_count: n_cells * k_cells,
        });
    }

    let mut overlaps = Vec::new();
    for i in 0..frames.len() {
        for j in i + 1..frames.len() {
            if frames[i].intersects(&frames[j]) {
                overlaps.push((frames[i].cluster_id, frames[j].cluster_id));
            }
        }
    }

    Ok(SenseEstimate {
        grid: OccupancyGrid {
            bits,
            threshold: source.threshold,
            kind: GridKind::Estimated,
            time_axis: source.time_axis,
            freq_axis: source.freq_axis,
            time_span: source.time_span,
        },
        frames: FrameSet {
            frames,
            time_resolution: source.time_axis.step,
            freq_resolution: source.freq_axis.step,
            time_span: source.time_span,
            band: source.band(),
        },
        overlaps,
        dropped,
    })
}

/// Per-bin and overall duty cycle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DutyCycle {
    /// Fraction of rows busy per frequency bin.
    pub per_bin: Vec<f64>,
    /// Mean of the per-bin duty cycles.
    pub overall: f64,
}

/// Fraction of time each frequency bin is busy, and the band average.
pub fn duty_cycle(grid: &OccupancyGrid) -> Result<DutyCycle> {
    let rows = grid.rows();
    let cols = grid.cols();
    if rows == 0 || cols == 0 {
        return Err(Error::Degenerate("duty cycle of an empty grid is undefined".into()));
    }
    let mut per_bin = vec![0.0f64; cols];
    for n in 0..rows {
        for (k, &b) in grid.bits.row(n).iter().enumerate() {
            if b != 0 {
                per_bin[k] += 1.0;
            }
        }
    }
    for v in &mut per_bin {
        *v /= rows as f64;
    }
    let overall = per_bin.iter().sum::<f64>() / cols as f64;
    Ok(DutyCycle { per_bin, overall })
}

/// Joint bandwidth and time-on-air density estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointHistogram {
    /// Bandwidth bin edges, Hz (length = bins + 1).
    pub bandwidth_edges: Vec<f64>,
    /// Time-on-air bin edges, seconds.
    pub toa_edges: Vec<f64>,
    /// Density per (bandwidth bin, ToA bin); integrates to 1 over bin areas.
    pub density: Vec<Vec<f64>>,
}

/// Normalized 2-D histogram of `(bandwidth, ToA)` over the frame set.
///
/// Edges are either supplied or derived from the data extent with the given
/// bin counts (the top edge is widened a hair so maxima land inside).
pub fn frame_statistics(
    frames: &FrameSet,
    bandwidth_edges: Option<Vec<f64>>,
    toa_edges: Option<Vec<f64>>,
    bins: (usize, usize),
) -> Result<JointHistogram> {
    if frames.is_empty() {
        return Err(Error::InsufficientData("histogram of an empty frame set".into()));
    }
    let bw: Vec<f64> = frames.frames.iter().map(|f| f.bandwidth_hz).collect();
    let toa: Vec<f64> = frames.frames.iter().map(|f| f.toa_s).collect();
    let bw_edges = match bandwidth_edges {
        Some(e) => validated_edges(e)?,
        None => auto_edges(&bw, bins.0),
    };
    let toa_edges = match toa_edges {
        Some(e) => validated_edges(e)?,
        None => auto_edges(&toa, bins.1),
    };
    let nb = bw_edges.len() - 1;
    let nt = toa_edges.len() - 1;
    let mut counts = vec![vec![0usize; nt]; nb];
    let mut total = 0usize;
    for (b, t) in bw.iter().zip(toa.iter()) {
        if let (Some(i), Some(j)) = (bin_of(&bw_edges, *b), bin_of(&toa_edges, *t)) {
            counts[i][j] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::Degenerate("no frames fall inside the histogram edges".into()));
    }
    let density = counts
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, &c)| {
                    let area = (bw_edges[i + 1] - bw_edges[i]) * (toa_edges[j + 1] - toa_edges[j]);
                    c as f64 / (total as f64 * area)
                })
                .collect()
        })
        .collect();
    Ok(JointHistogram { bandwidth_edges: bw_edges, toa_edges, density })
}

fn validated_edges(edges: Vec<f64>) -> Result<Vec<f64>> {
    if edges.len() < 2 || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("histogram edges must be strictly increasing".into()));
    }
    Ok(edges)
}

fn auto_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let bins = bins.max(1);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(lo.abs().max(1e-12) * 1e-9);
    let hi = lo + span * (1.0 + 1e-9);
    (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect()
}

fn bin_of(edges: &[f64], v: f64) -> Option<usize> {
    if v < edges[0] || v >= edges[edges.len() - 1] {
        return None;
    }
    Some(edges.partition_point(|&e| e <= v) - 1)
}
