//! Distances, brute-force nearest neighbors, and nearest-neighbor distance
//! ratios.
//!
//! Every row of a distance computation is evaluated independently in a fixed
//! feature order, so the parallel and sequential paths produce bit-identical
//! results and `d(i, j) == d(j, i)` exactly.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Smallest number of distinct observations any estimator can work with.
pub const MIN_POINTS: usize = 3;

/// An `n × D` matrix of observations with optional column names.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    data: Array2<f64>,
    col_names: Option<Vec<String>>,
}

impl PointCloud {
    pub fn new(data: Array2<f64>, col_names: Option<Vec<String>>) -> Result<Self> {
        if let Some((idx, _)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: idx.0,
                col: idx.1,
            });
        }
        if let Some(names) = &col_names {
            if names.len() != data.ncols() {
                return Err(Error::DimensionMismatch(format!(
                    "{} column names for {} columns",
                    names.len(),
                    data.ncols()
                )));
            }
        }
        Ok(Self { data, col_names })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch(format!(
                "row {bad} has {} values, expected {ncols}",
                rows[bad].len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((rows.len(), ncols), flat)
            .expect("shape checked above");
        Self::new(data, None)
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn col_names(&self) -> Option<&[String]> {
        self.col_names.as_deref()
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn into_parts(self) -> (Array2<f64>, Option<Vec<String>>) {
        (self.data, self.col_names)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Manhattan,
    Canberra,
    /// Distances are supplied by the caller as a matrix.
    Precomputed,
}

impl Metric {
    fn eval(self, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::Canberra => a
                .iter()
                .zip(b)
                .map(|(x, y)| {
                    let den = x.abs() + y.abs();
                    if den == 0.0 {
                        0.0
                    } else {
                        (x - y).abs() / den
                    }
                })
                .sum(),
            Metric::Precomputed => unreachable!("precomputed distances are never evaluated"),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::Manhattan => "manhattan",
            Metric::Canberra => "canberra",
            Metric::Precomputed => "precomputed",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" => Ok(Metric::Euclidean),
            "manhattan" => Ok(Metric::Manhattan),
            "canberra" => Ok(Metric::Canberra),
            "precomputed" => Ok(Metric::Precomputed),
            other => Err(invalid(format!("unknown metric '{other}'"))),
        }
    }
}

/// A validated square distance matrix: symmetric, zero diagonal, finite and
/// nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix(Array2<f64>);

impl DistanceMatrix {
    pub fn new(mat: Array2<f64>) -> Result<Self> {
        let n = mat.nrows();
        if mat.ncols() != n {
            return Err(Error::InvalidDistanceMatrix(format!(
                "matrix is {}x{}, not square",
                n,
                mat.ncols()
            )));
        }
        for i in 0..n {
            if mat[[i, i]] != 0.0 {
                return Err(Error::InvalidDistanceMatrix(format!(
                    "diagonal entry {i} is {}",
                    mat[[i, i]]
                )));
            }
            for j in 0..i {
                let v = mat[[i, j]];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidDistanceMatrix(format!(
                        "entry ({i}, {j}) = {v} is not a finite nonnegative distance"
                    )));
                }
                if v != mat[[j, i]] {
                    return Err(Error::InvalidDistanceMatrix(format!(
                        "entries ({i}, {j}) and ({j}, {i}) differ"
                    )));
                }
            }
        }
        Ok(Self(mat))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// Where distances come from: raw observations under a metric, or a
/// caller-supplied matrix (which takes precedence over any observations).
#[derive(Debug, Clone, Copy)]
pub enum Input<'a> {
    Points(&'a PointCloud, Metric),
    Distances(&'a DistanceMatrix),
}

/// Result of dropping exact duplicate rows.
#[derive(Debug, Clone)]
pub struct Deduplicated {
    pub cloud: PointCloud,
    /// Original row index of every kept row, ascending.
    pub kept_rows: Vec<usize>,
    pub removed: usize,
}

/// Drops rows that repeat an earlier row exactly, keeping first occurrences
/// in their original order.
pub fn deduplicate(x: &PointCloud) -> Result<Deduplicated> {
    let mut seen: HashSet<Vec<u64>> = HashSet::with_capacity(x.nrows());
    let mut kept_rows = Vec::with_capacity(x.nrows());
    for (i, row) in x.data.outer_iter().enumerate() {
        // `+ 0.0` folds -0.0 into 0.0; they are the same coordinate.
        let key: Vec<u64> = row.iter().map(|v| (v + 0.0).to_bits()).collect();
        if seen.insert(key) {
            kept_rows.push(i);
        }
    }
    let removed = x.nrows() - kept_rows.len();
    if kept_rows.len() < MIN_POINTS {
        return Err(Error::TooFewPoints {
            remaining: kept_rows.len(),
            required: MIN_POINTS,
        });
    }
    if removed > 0 {
        log::warn!(
            "Duplicates are present and will be removed. Original sample size: {}. New sample size: {}.",
            x.nrows(),
            kept_rows.len()
        );
    }
    let data = x.data.select(Axis(0), &kept_rows);
    Ok(Deduplicated {
        cloud: PointCloud {
            data,
            col_names: x.col_names.clone(),
        },
        kept_rows,
        removed,
    })
}

fn check_metric(metric: Metric) -> Result<()> {
    if metric == Metric::Precomputed {
        Err(invalid(
            "the precomputed metric needs a distance matrix, not observations",
        ))
    } else {
        Ok(())
    }
}

fn distance_row(x: &PointCloud, metric: Metric, i: usize) -> Vec<f64> {
    let a = x.data.row(i);
    x.data
        .outer_iter()
        .map(|b| metric.eval(a, b))
        .collect()
}

/// Full pairwise distance matrix of `x` under `metric`.
pub fn distance_matrix(x: &PointCloud, metric: Metric) -> Result<DistanceMatrix> {
    check_metric(metric)?;
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| distance_row(x, metric, i))
        .collect();
    let mut mat = Array2::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            mat[[i, j]] = if i == j { 0.0 } else { v };
        }
    }
    Ok(DistanceMatrix(mat))
}

/// Sorted nearest-neighbor distances and identities, one row per point.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbors {
    pub dist: Array2<f64>,
    pub index: Array2<usize>,
}

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

fn select_row(i: usize, row: &[f64], k: usize) -> Result<Vec<(f64, usize)>> {
    let mut cand: Vec<(f64, usize)> = row
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, &d)| (d, j))
        .collect();
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, by_distance_then_index);
        cand.truncate(k);
    }
    cand.sort_unstable_by(by_distance_then_index);
    if let Some(&(d, j)) = cand.first() {
        if d == 0.0 {
            return Err(Error::ZeroDistance { i, j });
        }
    }
    Ok(cand)
}

fn assemble(rows: Vec<Vec<(f64, usize)>>, k: usize) -> Neighbors {
    let n = rows.len();
    let mut dist = Array2::zeros((n, k));
    let mut index = Array2::zeros((n, k));
    for (i, row) in rows.into_iter().enumerate() {
        for (l, (d, j)) in row.into_iter().enumerate() {
            dist[[i, l]] = d;
            index[[i, l]] = j;
        }
    }
    Neighbors { dist, index }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k + 1 > n {
        return Err(invalid(format!(
            "neighbor order {k} must lie in 1..={}",
            n.saturating_sub(1)
        )));
    }
    Ok(())
}

/// The `k` nearest neighbors of every point, ascending by distance with ties
/// broken by lower index.
pub fn knn(dist: &DistanceMatrix, k: usize) -> Result<Neighbors> {
    let n = dist.n();
    check_k(n, k)?;
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = dist.0.row(i);
            let row = row.as_slice().map(<[f64]>::to_vec).unwrap_or_else(|| row.to_vec());
            select_row(i, &row, k)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(rows, k))
}

/// Same as [`knn`] but evaluates one distance row at a time, never
/// materializing the `n × n` matrix.
pub fn knn_points(x: &PointCloud, metric: Metric, k: usize) -> Result<Neighbors> {
    check_metric(metric)?;
    let n = x.nrows();
    check_k(n, k)?;
    let rows = (0..n)
        .into_par_iter()
        .map(|i| select_row(i, &distance_row(x, metric, i), k))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(rows, k))
}

/// Binary neighborhood matrix `N^(q)` stored as neighbor lists: row `i`
/// holds the `q` nearest neighbors of `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    neighbors: Array2<usize>,
}

impl Adjacency {
    pub fn from_neighbors(neighbors: Array2<usize>) -> Result<Self> {
        let n = neighbors.nrows();
        for (i, row) in neighbors.outer_iter().enumerate() {
            let mut seen = HashSet::new();
            for &j in row {
                if j >= n || j == i || !seen.insert(j) {
                    return Err(invalid(format!("row {i} of the neighbor lists is invalid")));
                }
            }
        }
        Ok(Self { neighbors })
    }

    pub fn q(&self) -> usize {
        self.neighbors.ncols()
    }

    pub fn n(&self) -> usize {
        self.neighbors.nrows()
    }

    pub fn neighbors(&self) -> &Array2<usize> {
        &self.neighbors
    }

    /// Lists, for every point `i`, the points that have `i` among their
    /// neighbors (the columns of `N^(q)`).
    pub fn reverse(&self) -> Vec<Vec<usize>> {
        let mut rev = vec![Vec::new(); self.n()];
        for (l, row) in self.neighbors.outer_iter().enumerate() {
            for &i in row {
                rev[i].push(l);
            }
        }
        rev
    }

    pub fn to_dense(&self) -> Array2<u8> {
        let n = self.n();
        let mut out = Array2::zeros((n, n));
        for (i, row) in self.neighbors.outer_iter().enumerate() {
            for &j in row {
                out[[i, j]] = 1;
            }
        }
        out
    }
}

/// Options for [`compute_mus`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MusOptions {
    pub n1: usize,
    pub n2: usize,
    pub with_adjacency: bool,
    pub q: usize,
}

impl Default for MusOptions {
    fn default() -> Self {
        Self {
            n1: 1,
            n2: 2,
            with_adjacency: false,
            q: 3,
        }
    }
}

/// Ratios `μ_i = r_{i,n2} / r_{i,n1}` and the neighbor data behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSet {
    pub mus: Vec<f64>,
    pub n1: usize,
    pub n2: usize,
    /// `n × n2` sorted neighbor distances.
    pub nn_dist: Array2<f64>,
    /// `n × n2` neighbor identities matching `nn_dist`.
    pub nn_index: Array2<usize>,
    pub adjacency: Option<Adjacency>,
    pub removed_duplicates: usize,
    /// Original row of every retained observation.
    pub kept_rows: Vec<usize>,
}

impl RatioSet {
    pub fn n(&self) -> usize {
        self.mus.len()
    }
}

/// Runs the nearest-neighbor search behind every estimator: deduplicates
/// observations (matrix input is used as given), finds the
/// `max(n2, q)` nearest neighbors, and forms the ratios.
pub fn compute_mus(input: Input<'_>, opts: &MusOptions) -> Result<RatioSet> {
    if opts.n1 == 0 || opts.n1 >= opts.n2 {
        return Err(invalid(format!(
            "neighbor orders must satisfy 1 <= n1 < n2, got n1={}, n2={}",
            opts.n1, opts.n2
        )));
    }
    if opts.with_adjacency && opts.q == 0 {
        return Err(invalid("q must be at least 1"));
    }
    let k = if opts.with_adjacency {
        opts.n2.max(opts.q)
    } else {
        opts.n2
    };

    let (neighbors, removed, kept_rows) = match input {
        Input::Points(x, metric) => {
            check_metric(metric)?;
            let dedup = deduplicate(x)?;
            let n = dedup.cloud.nrows();
            check_orders(n, opts)?;
            let nb = knn_points(&dedup.cloud, metric, k)?;
            (nb, dedup.removed, dedup.kept_rows)
        }
        Input::Distances(d) => {
            let n = d.n();
            if n < MIN_POINTS {
                return Err(Error::TooFewPoints {
                    remaining: n,
                    required: MIN_POINTS,
                });
            }
            check_orders(n, opts)?;
            (knn(d, k)?, 0, (0..n).collect())
        }
    };

    let mus = neighbors
        .dist
        .outer_iter()
        .map(|r| r[opts.n2 - 1] / r[opts.n1 - 1])
        .collect();
    let adjacency = if opts.with_adjacency {
        let lists = neighbors
            .index
            .slice(ndarray::s![.., ..opts.q])
            .to_owned();
        Some(Adjacency { neighbors: lists })
    } else {
        None
    };
    let cols = ndarray::s![.., ..opts.n2];
    Ok(RatioSet {
        mus,
        n1: opts.n1,
        n2: opts.n2,
        nn_dist: neighbors.dist.slice(cols).to_owned(),
        nn_index: neighbors.index.slice(cols).to_owned(),
        adjacency,
        removed_duplicates: removed,
        kept_rows,
    })
}

fn check_orders(n: usize, opts: &MusOptions) -> Result<()> {
    if opts.n2 > n - 1 {
        return Err(invalid(format!(
            "n2={} exceeds n-1={} for this dataset",
            opts.n2,
            n - 1
        )));
    }
    if opts.with_adjacency && opts.q > n - 1 {
        return Err(invalid(format!("q={} exceeds n-1={}", opts.q, n - 1)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn line(xs: &[f64]) -> PointCloud {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        PointCloud::from_rows(&rows).unwrap()
    }

    #[test]
    fn dedup_five_rows_to_three() {
        let x = PointCloud::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![1.0, 2.0, 3.0],
            vec![1.0, 4.0, 3.0],
            vec![1.0, 4.0, 3.0],
            vec![1.0, 4.0, 5.0],
        ])
        .unwrap();
        let d = deduplicate(&x).unwrap();
        assert_eq!(d.removed, 2);
        assert_eq!(d.kept_rows, vec![0, 2, 4]);
        assert_eq!(d.cloud.data().row(1).to_vec(), vec![1.0, 4.0, 3.0]);
    }

    #[test]
    fn dedup_no_duplicates_is_identity() {
        let x = line(&[0.0, 1.0, 3.0]);
        let d = deduplicate(&x).unwrap();
        assert_eq!(d.removed, 0);
        assert_eq!(d.cloud, x);
    }

    #[test]
    fn dedup_too_few_left() {
        let x = line(&[2.0, 2.0, 2.0, 2.0, 5.0, 7.0]);
        assert_eq!(deduplicate(&x).unwrap().removed, 3);
        let x = PointCloud::from_rows(&[
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![0.0, 2.0],
        ])
        .unwrap();
        assert!(matches!(
            deduplicate(&x),
            Err(Error::TooFewPoints { remaining: 2, .. })
        ));
    }

    #[test]
    fn rejects_non_finite() {
        let err = PointCloud::new(array![[1.0, f64::NAN]], None).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 0, col: 1 }));
    }

    #[test]
    fn metric_examples() {
        let d = distance_matrix(&line(&[0.0, 3.0]), Metric::Euclidean).unwrap();
        assert_eq!(d.as_array()[[0, 1]], 3.0);
        let x = PointCloud::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let d = distance_matrix(&x, Metric::Manhattan).unwrap();
        assert_eq!(d.as_array()[[1, 0]], 2.0);
        let d = distance_matrix(&line(&[1.0, 3.0]), Metric::Canberra).unwrap();
        assert_relative_eq!(d.as_array()[[0, 1]], 0.5);
    }

    #[test]
    fn canberra_zero_over_zero_is_zero() {
        let x = PointCloud::from_rows(&[vec![0.0, 1.0], vec![0.0, 3.0]]).unwrap();
        let d = distance_matrix(&x, Metric::Canberra).unwrap();
        assert_relative_eq!(d.as_array()[[0, 1]], 0.5);
    }

    #[test]
    fn precomputed_metric_needs_matrix() {
        assert!(distance_matrix(&line(&[0.0, 1.0, 2.0]), Metric::Precomputed).is_err());
    }

    #[test]
    fn knn_line_example() {
        let d = distance_matrix(&line(&[0.0, 1.0, 3.0]), Metric::Euclidean).unwrap();
        let nb = knn(&d, 2).unwrap();
        assert_eq!(nb.dist, array![[1.0, 3.0], [1.0, 2.0], [2.0, 3.0]]);
        assert_eq!(nb.index, array![[1, 2], [0, 2], [1, 0]]);
    }

    #[test]
    fn knn_ties_break_by_index() {
        let s = 2.0;
        let d = DistanceMatrix::new(array![[0.0, s, s], [s, 0.0, s], [s, s, 0.0]]).unwrap();
        let nb = knn(&d, 2).unwrap();
        assert_eq!(nb.dist, array![[s, s], [s, s], [s, s]]);
        assert_eq!(nb.index, array![[1, 2], [0, 2], [0, 1]]);
    }

    #[test]
    fn knn_rejects_zero_distance() {
        let x = line(&[0.0, 0.0, 1.0]);
        let d = distance_matrix(&x, Metric::Euclidean).unwrap();
        assert!(matches!(knn(&d, 1), Err(Error::ZeroDistance { .. })));
    }

    #[test]
    fn knn_order_bounds() {
        let d = distance_matrix(&line(&[0.0, 1.0, 3.0]), Metric::Euclidean).unwrap();
        assert!(knn(&d, 0).is_err());
        assert!(knn(&d, 3).is_err());
    }

    #[test]
    fn distance_matrix_validation() {
        assert!(DistanceMatrix::new(array![[0.0, 1.0], [2.0, 0.0]]).is_err());
        assert!(DistanceMatrix::new(array![[1.0, 1.0], [1.0, 0.0]]).is_err());
        assert!(DistanceMatrix::new(array![[0.0, -1.0], [-1.0, 0.0]]).is_err());
        assert!(DistanceMatrix::new(array![[0.0, 1.0, 2.0]]).is_err());
    }

    #[test]
    fn mus_line_example() {
        let x = line(&[0.0, 1.0, 3.0]);
        let r = compute_mus(Input::Points(&x, Metric::Euclidean), &MusOptions::default()).unwrap();
        assert_eq!(r.mus, vec![3.0, 2.0, 1.5]);
        assert_eq!(r.removed_duplicates, 0);
    }

    #[test]
    fn adjacency_line_example() {
        let x = line(&[0.0, 1.0, 3.0]);
        let opts = MusOptions {
            with_adjacency: true,
            q: 1,
            ..MusOptions::default()
        };
        let r = compute_mus(Input::Points(&x, Metric::Euclidean), &opts).unwrap();
        let adj = r.adjacency.unwrap();
        assert_eq!(adj.to_dense(), array![[0, 1, 0], [1, 0, 0], [0, 1, 0]]);
        assert_eq!(adj.reverse(), vec![vec![1], vec![0, 2], vec![]]);
    }

    #[test]
    fn equal_neighbor_distances_give_unit_ratio() {
        let x = line(&[-1.0, 0.0, 1.0]);
        let r = compute_mus(Input::Points(&x, Metric::Euclidean), &MusOptions::default()).unwrap();
        assert_eq!(r.mus[1], 1.0);
    }

    #[test]
    fn invalid_orders() {
        let x = line(&[0.0, 1.0, 3.0, 7.0]);
        let input = Input::Points(&x, Metric::Euclidean);
        for (n1, n2) in [(0, 2), (2, 2), (3, 2), (1, 4)] {
            let opts = MusOptions {
                n1,
                n2,
                ..MusOptions::default()
            };
            assert!(compute_mus(input, &opts).unwrap_err().is_usage());
        }
        let opts = MusOptions {
            n1: 2,
            n2: 3,
            ..MusOptions::default()
        };
        assert!(compute_mus(input, &opts).is_ok());
    }

    #[test]
    fn duplicates_dropped_before_ratios() {
        let x = line(&[0.0, 0.0, 1.0, 3.0, 3.0]);
        let r = compute_mus(Input::Points(&x, Metric::Euclidean), &MusOptions::default()).unwrap();
        assert_eq!(r.removed_duplicates, 2);
        assert_eq!(r.kept_rows, vec![0, 2, 3]);
        assert_eq!(r.mus, vec![3.0, 2.0, 1.5]);
    }
}
