//! Postprocessing of mixture chains: observation-level dimension chains,
//! posterior similarity, and hierarchical clustering on it.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{deduplicate, knn, knn_points, Input};
use crate::hidalgo::HidalgoChains;

/// Probabilities of the quantile columns in [`summarize_ids`].
pub const SUMMARY_PROBS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// Column names of [`summarize_ids`] output.
pub const SUMMARY_COLUMNS: [&str; 6] = ["mean", "q05", "q25", "q50", "q75", "q95"];

/// Maps component chains to observations: `out[t][i] = d_{z_i(t)}(t)`.
/// Labels are 1-based.
pub fn fix_label_switching(labels: &Array2<u32>, id_raw: &Array2<f64>) -> Result<Array2<f64>> {
    if labels.nrows() != id_raw.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} label draws but {} dimension draws",
            labels.nrows(),
            id_raw.nrows()
        )));
    }
    let k = id_raw.ncols();
    let mut out = Array2::zeros(labels.dim());
    for ((t, i), &l) in labels.indexed_iter() {
        if l == 0 || l as usize > k {
            return Err(invalid(format!("label {l} at draw {t} is outside 1..={k}")));
        }
        out[[t, i]] = id_raw[[t, l as usize - 1]];
    }
    Ok(out)
}

/// Sample quantile with linear interpolation between order statistics
/// (type 7). `sorted` must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn column_summary(col: ArrayView1<'_, f64>) -> [f64; 6] {
    let mut v = col.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let mut out = [mean, 0.0, 0.0, 0.0, 0.0, 0.0];
    for (slot, &p) in out[1..].iter_mut().zip(&SUMMARY_PROBS) {
        *slot = quantile_sorted(&v, p);
    }
    out
}

/// Per-observation mean and 5/25/50/75/95% quantiles of a `T × n` chain
/// matrix, one row per observation.
pub fn summarize_ids(id_postpr: &Array2<f64>) -> Result<Array2<f64>> {
    if id_postpr.nrows() == 0 {
        return Err(invalid("no retained draws to summarize"));
    }
    let rows: Vec<[f64; 6]> = (0..id_postpr.ncols())
        .into_par_iter()
        .map(|i| column_summary(id_postpr.column(i)))
        .collect();
    let mut out = Array2::zeros((rows.len(), 6));
    for (i, r) in rows.iter().enumerate() {
        out.row_mut(i).iter_mut().zip(r).for_each(|(d, s)| *d = *s);
    }
    Ok(out)
}

/// Fraction of draws in which each pair of observations shares a label.
pub fn posterior_similarity(labels: &Array2<u32>) -> Result<Array2<f64>> {
    let (t, n) = labels.dim();
    if t == 0 {
        return Err(invalid("no retained draws"));
    }
    // Observation-major copy so each pair compares two contiguous slices.
    let by_obs: Vec<Vec<u32>> = labels.axis_iter(Axis(1)).map(|c| c.to_vec()).collect();
    let upper: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = &by_obs[i];
            (i + 1..n)
                .map(|j| a.iter().zip(&by_obs[j]).filter(|(x, y)| x == y).count() as u32)
                .collect()
        })
        .collect();
    let mut psm = Array2::from_elem((n, n), 1.0);
    let tf = t as f64;
    for (i, row) in upper.iter().enumerate() {
        for (off, &c) in row.iter().enumerate() {
            let j = i + 1 + off;
            let v = c as f64 / tf;
            psm[[i, j]] = v;
            psm[[j, i]] = v;
        }
    }
    Ok(psm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Average,
    Complete,
    Single,
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Linkage::Average => "average",
            Linkage::Complete => "complete",
            Linkage::Single => "single",
        })
    }
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "average" => Ok(Linkage::Average),
            "complete" => Ok(Linkage::Complete),
            "single" => Ok(Linkage::Single),
            other => Err(invalid(format!("unknown linkage '{other}'"))),
        }
    }
}

impl Linkage {
    /// Lance-Williams update of the distance from `m` to the union of
    /// clusters `a` and `b`.
    fn update(self, d_am: f64, d_bm: f64, size_a: usize, size_b: usize) -> f64 {
        match self {
            Linkage::Average => {
                (size_a as f64 * d_am + size_b as f64 * d_bm) / (size_a + size_b) as f64
            }
            Linkage::Complete => d_am.max(d_bm),
            Linkage::Single => d_am.min(d_bm),
        }
    }
}

/// Agglomerative clustering on `1 − psm`, stopped at `k` clusters.
///
/// At each step the closest pair of clusters merges; equal distances go to
/// the lexicographically smallest pair of cluster indices, where a cluster
/// is indexed by its smallest member. Output labels run over `1..=k` in
/// order of first appearance.
pub fn cluster_from_psm(psm: &Array2<f64>, k: usize, linkage: Linkage) -> Result<Vec<usize>> {
    let n = psm.nrows();
    if psm.ncols() != n {
        return Err(Error::DimensionMismatch("similarity matrix is not square".into()));
    }
    if k == 0 || k > n {
        return Err(invalid(format!("number of clusters must lie in 1..={n}, got {k}")));
    }
    let mut dist: Vec<f64> = psm.iter().map(|s| 1.0 - s).collect();
    let at = |i: usize, j: usize| i * n + j;
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    // Nearest active neighbor with a larger index, for every active cluster.
    let mut nn: Vec<Option<(f64, usize)>> = vec![None; n];

    let nearest_above = |dist: &[f64], active: &[bool], a: usize| -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for b in a + 1..n {
            if active[b] && best.is_none_or(|(d, _)| dist[at(a, b)] < d) {
                best = Some((dist[at(a, b)], b));
            }
        }
        best
    };
    for a in 0..n {
        nn[a] = nearest_above(&dist, &active, a);
    }

    for _ in 0..n - k {
        let (i, j) = {
            let mut best: Option<(f64, usize, usize)> = None;
            for a in 0..n {
                if let (true, Some((d, b))) = (active[a], nn[a]) {
                    if best.is_none_or(|(bd, _, _)| d < bd) {
                        best = Some((d, a, b));
                    }
                }
            }
            let (_, a, b) = best.expect("at least two active clusters");
            (a, b)
        };
        for m in 0..n {
            if active[m] && m != i && m != j {
                let v = linkage.update(dist[at(i, m)], dist[at(j, m)], size[i], size[j]);
                dist[at(i, m)] = v;
                dist[at(m, i)] = v;
            }
        }
        active[j] = false;
        size[i] += size[j];
        let moved = std::mem::take(&mut members[j]);
        members[i].extend(moved);
        nn[j] = None;

        for a in 0..n {
            if !active[a] {
                continue;
            }
            match nn[a] {
                _ if a == i => nn[a] = nearest_above(&dist, &active, a),
                Some((_, b)) if b == i || b == j => nn[a] = nearest_above(&dist, &active, a),
                Some((d, b)) if a < i => {
                    let di = dist[at(a, i)];
                    if di < d || (di == d && i < b) {
                        nn[a] = Some((di, i));
                    }
                }
                None if a < i => nn[a] = Some((dist[at(a, i)], i)),
                _ => {}
            }
        }
    }

    let mut cluster_of = vec![0usize; n];
    for (c, m) in members.iter().enumerate() {
        for &p in m {
            cluster_of[p] = c;
        }
    }
    let mut relabel: BTreeMap<usize, usize> = BTreeMap::new();
    Ok(cluster_of
        .into_iter()
        .map(|c| {
            let next = relabel.len() + 1;
            *relabel.entry(c).or_insert(next)
        })
        .collect())
}

/// Size of each cluster `1..=k`.
pub fn cluster_frequencies(labels: &[usize], k: usize) -> Vec<usize> {
    let mut out = vec![0; k];
    for &l in labels {
        out[l - 1] += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: String,
    pub n: usize,
    /// Mean of the observations' posterior means.
    pub mean: f64,
    /// Median of the observations' posterior medians.
    pub median: f64,
    /// Standard deviation over all draws of all observations in the class.
    pub sd: f64,
}

/// Dimension summaries stratified by an external class label, sorted by
/// class.
pub fn id_by_class(id_postpr: &Array2<f64>, class: &[String]) -> Result<Vec<ClassSummary>> {
    if class.len() != id_postpr.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} class labels for {} observations",
            class.len(),
            id_postpr.ncols()
        )));
    }
    let summary = summarize_ids(id_postpr)?;
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in class.iter().enumerate() {
        groups.entry(c.as_str()).or_default().push(i);
    }
    Ok(groups
        .into_iter()
        .map(|(c, idx)| {
            let nc = idx.len() as f64;
            let mean = idx.iter().map(|&i| summary[[i, 0]]).sum::<f64>() / nc;
            let mut medians: Vec<f64> = idx.iter().map(|&i| summary[[i, 3]]).collect();
            medians.sort_unstable_by(f64::total_cmp);
            let pooled = idx.iter().flat_map(|&i| id_postpr.column(i).to_vec());
            let count = (id_postpr.nrows() * idx.len()) as f64;
            let ss: f64 = pooled.map(|v| (v - mean) * (v - mean)).sum();
            let sd = if count > 1.0 { (ss / (count - 1.0)).sqrt() } else { 0.0 };
            ClassSummary {
                class: c.to_string(),
                n: idx.len(),
                mean,
                median: quantile_sorted(&medians, 0.5),
                sd,
            }
        })
        .collect())
}

/// Row `i` holds the running means `r_i(j) = (1/j) Σ_{l≤j} r_{i,l}` of the
/// sorted distances from point `i` to all others. Observations are
/// deduplicated first.
pub fn nn_distance_profile(input: Input<'_>) -> Result<Array2<f64>> {
    let neighbors = match input {
        Input::Points(x, metric) => {
            let dedup = deduplicate(x)?;
            knn_points(&dedup.cloud, metric, dedup.cloud.nrows() - 1)?
        }
        Input::Distances(d) => knn(d, d.n().saturating_sub(1))?,
    };
    let mut out = neighbors.dist;
    for mut row in out.outer_iter_mut() {
        let mut cum = 0.0;
        for (j, v) in row.iter_mut().enumerate() {
            cum += *v;
            *v = cum / (j + 1) as f64;
        }
    }
    Ok(out)
}

/// Everything derived from one set of chains.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub id_postpr: Array2<f64>,
    pub id_summary: Array2<f64>,
    pub psm: Array2<f64>,
    pub clusters: Option<Vec<usize>>,
    pub linkage: Linkage,
    pub k_clusters: Option<usize>,
}

impl PosteriorSummary {
    pub fn from_chains(
        chains: &HidalgoChains,
        k_clusters: Option<usize>,
        linkage: Linkage,
    ) -> Result<Self> {
        let id_postpr = fix_label_switching(&chains.membership_labels, &chains.id_raw)?;
        let id_summary = summarize_ids(&id_postpr)?;
        let psm = posterior_similarity(&chains.membership_labels)?;
        let clusters = k_clusters
            .map(|k| cluster_from_psm(&psm, k, linkage))
            .transpose()?;
        Ok(Self {
            id_postpr,
            id_summary,
            psm,
            clusters,
            linkage,
            k_clusters,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{distance_matrix, Metric, PointCloud};
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn label_switching_hand_example() {
        let z = array![[1u32, 2, 1], [2, 2, 1]];
        let d = array![[1.0, 5.0], [2.0, 6.0]];
        let out = fix_label_switching(&z, &d).unwrap();
        assert_eq!(out, array![[1.0, 5.0, 1.0], [6.0, 6.0, 2.0]]);
    }

    #[test]
    fn label_switching_single_component() {
        let z = Array2::from_elem((3, 4), 1u32);
        let d = array![[1.0], [2.0], [3.0]];
        let out = fix_label_switching(&z, &d).unwrap();
        for i in 0..4 {
            assert_eq!(out.column(i).to_vec(), vec![1.0, 2.0, 3.0]);
        }
    }

    #[test]
    fn label_switching_rejects_bad_labels() {
        assert!(fix_label_switching(&array![[3u32]], &array![[1.0, 2.0]]).is_err());
        assert!(fix_label_switching(&array![[0u32]], &array![[1.0]]).is_err());
    }

    #[test]
    fn summary_examples() {
        let chain = Array2::from_shape_fn((100, 1), |(t, _)| (t + 1) as f64);
        let s = summarize_ids(&chain).unwrap();
        assert_relative_eq!(s[[0, 0]], 50.5);
        assert_relative_eq!(s[[0, 3]], 50.5);
        assert_relative_eq!(s[[0, 1]], 5.95, max_relative = 1e-12);
        let s = summarize_ids(&Array2::from_elem((7, 2), 2.5)).unwrap();
        assert!(s.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn psm_hand_example() {
        let z = array![[1u32, 1, 2], [1, 2, 2]];
        let p = posterior_similarity(&z).unwrap();
        assert_eq!(p, array![[1.0, 0.5, 0.0], [0.5, 1.0, 0.5], [0.0, 0.5, 1.0]]);
    }

    #[test]
    fn psm_identical_draws_are_binary() {
        let z = array![[1u32, 2, 1, 3], [1, 2, 1, 3]];
        let p = posterior_similarity(&z).unwrap();
        assert!(p.iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(p.diag().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn clusters_recover_blocks() {
        let mut psm = Array2::zeros((6, 6));
        for &(a, b) in &[(0, 2), (2, 4), (0, 4), (1, 3), (3, 5), (1, 5)] {
            psm[[a, b]] = 1.0;
            psm[[b, a]] = 1.0;
        }
        psm.diag_mut().fill(1.0);
        for link in [Linkage::Average, Linkage::Complete, Linkage::Single] {
            let l = cluster_from_psm(&psm, 2, link).unwrap();
            assert_eq!(l, vec![1, 2, 1, 2, 1, 2]);
        }
        let l = cluster_from_psm(&psm, 6, Linkage::Average).unwrap();
        assert_eq!(l, vec![1, 2, 3, 4, 5, 6]);
        assert!(cluster_from_psm(&psm, 7, Linkage::Average).is_err());
        assert!(cluster_from_psm(&psm, 0, Linkage::Average).is_err());
    }

    #[test]
    fn clusters_tie_break_lowest_pair() {
        // All off-diagonal similarities equal: merges proceed (0,1), then
        // ({0,1},2), leaving 3 alone at k = 2.
        let mut psm = Array2::from_elem((4, 4), 0.5);
        psm.diag_mut().fill(1.0);
        let l = cluster_from_psm(&psm, 2, Linkage::Average).unwrap();
        assert_eq!(l, vec![1, 1, 1, 2]);
        let l = cluster_from_psm(&psm, 3, Linkage::Single).unwrap();
        assert_eq!(l, vec![1, 1, 2, 3]);
    }

    #[test]
    fn average_linkage_matches_naive() {
        // Naive O(n³) average linkage on a fixed matrix.
        let n = 9;
        let psm = Array2::from_shape_fn((n, n), |(i, j)| {
            if i == j {
                1.0
            } else {
                let (a, b) = (i.min(j) as f64, i.max(j) as f64);
                (a * 7.0 + b * 3.0).sin().abs() * 0.9
            }
        });
        for k in 1..=n {
            let got = cluster_from_psm(&psm, k, Linkage::Average).unwrap();
            let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
            while clusters.len() > k {
                let mut best = (f64::INFINITY, 0, 0);
                for a in 0..clusters.len() {
                    for b in a + 1..clusters.len() {
                        let mut s = 0.0;
                        for &p in &clusters[a] {
                            for &q in &clusters[b] {
                                s += 1.0 - psm[[p, q]];
                            }
                        }
                        let d = s / (clusters[a].len() * clusters[b].len()) as f64;
                        if d < best.0 - 1e-12 {
                            best = (d, a, b);
                        }
                    }
                }
                let moved = clusters.remove(best.2);
                clusters[best.1].extend(moved);
            }
            let mut expect = vec![0; n];
            let mut order = Vec::new();
            for (c, m) in clusters.iter().enumerate() {
                for &p in m {
                    expect[p] = c;
                }
            }
            let labels: Vec<usize> = expect
                .iter()
                .map(|c| {
                    if let Some(pos) = order.iter().position(|o| o == c) {
                        pos + 1
                    } else {
                        order.push(*c);
                        order.len()
                    }
                })
                .collect();
            assert_eq!(got, labels, "k = {k}");
        }
    }

    #[test]
    fn by_class_examples() {
        let chain = array![[1.0, 2.0, 3.0, 4.0], [2.0, 3.0, 4.0, 5.0]];
        let one = id_by_class(&chain, &vec!["x".to_string(); 4]).unwrap();
        assert_eq!(one.len(), 1);
        assert_relative_eq!(one[0].mean, 3.0);
        let pooled = [1.0, 2.0, 3.0, 4.0, 2.0, 3.0, 4.0, 5.0];
        let var = pooled.iter().map(|v| (v - 3.0f64).powi(2)).sum::<f64>() / 7.0;
        assert_relative_eq!(one[0].sd, var.sqrt());

        let twin = array![[1.0, 1.0, 2.0, 2.0], [3.0, 3.0, 4.0, 4.0]];
        let cls: Vec<String> = ["a", "b", "a", "b"].iter().map(|s| s.to_string()).collect();
        let rows = id_by_class(&twin, &cls).unwrap();
        assert_eq!(rows[0].mean, rows[1].mean);
        assert_eq!(rows[0].median, rows[1].median);
        assert_eq!(rows[0].sd, rows[1].sd);
        assert!(id_by_class(&twin, &cls[..3]).is_err());
    }

    #[test]
    fn profile_examples() {
        let x = PointCloud::from_rows(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        let p = nn_distance_profile(Input::Points(&x, Metric::Euclidean)).unwrap();
        assert_eq!(p.row(0).to_vec(), vec![1.0, 2.0]);
        let s = 1.5;
        let x = PointCloud::from_rows(&[
            vec![0.0, 0.0],
            vec![s, 0.0],
            vec![s / 2.0, s * 3f64.sqrt() / 2.0],
        ])
        .unwrap();
        let d = distance_matrix(&x, Metric::Euclidean).unwrap();
        let mut dm = d.into_inner();
        dm.mapv_inplace(|v| if v > 0.0 { s } else { 0.0 });
        let d = crate::geometry::DistanceMatrix::new(dm).unwrap();
        let p = nn_distance_profile(Input::Distances(&d)).unwrap();
        assert!(p.iter().all(|&v| v == s));
    }
}
