//! Seeded synthetic benchmarks with known intrinsic dimension.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{PointCloud, MIN_POINTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Swissroll,
    HyperCube,
    GaussMix,
    Pareto,
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorKind::Swissroll => "swissroll",
            GeneratorKind::HyperCube => "hypercube",
            GeneratorKind::GaussMix => "gaussmix",
            GeneratorKind::Pareto => "pareto",
        })
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "swissroll" => Ok(GeneratorKind::Swissroll),
            "hypercube" => Ok(GeneratorKind::HyperCube),
            "gaussmix" => Ok(GeneratorKind::GaussMix),
            "pareto" => Ok(GeneratorKind::Pareto),
            other => Err(invalid(format!("unknown dataset kind '{other}'"))),
        }
    }
}

/// A generated point cloud with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub cloud: PointCloud,
    /// Generating component of every row, when there is more than one.
    pub class: Option<Vec<String>>,
    /// True dimension of each class (one entry for homogeneous data).
    pub true_id: Vec<f64>,
}

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn check_n(n: usize) -> Result<()> {
    if n < MIN_POINTS {
        return Err(invalid(format!("n must be at least {MIN_POINTS}, got {n}")));
    }
    Ok(())
}

fn names(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|j| format!("{prefix}{j}")).collect()
}

/// The map `(x, y) ↦ (x cos x, y, x sin x)`.
pub fn swissroll_map(x: f64, y: f64) -> [f64; 3] {
    [x * x.cos(), y, x * x.sin()]
}

/// `n` points on a Swiss roll, with `x, y ~ U(0, 10)`.
pub fn swissroll(n: usize, seed: u64) -> Result<Dataset> {
    check_n(n)?;
    let mut r = rng(seed);
    let mut data = Array2::zeros((n, 3));
    for mut row in data.outer_iter_mut() {
        let x = r.random::<f64>() * 10.0;
        let y = r.random::<f64>() * 10.0;
        for (d, v) in row.iter_mut().zip(swissroll_map(x, y)) {
            *d = v;
        }
    }
    Ok(Dataset {
        cloud: PointCloud::new(data, Some(vec!["x".into(), "y".into(), "z".into()]))?,
        class: None,
        true_id: vec![2.0],
    })
}

/// `n` points uniform on the unit 5-cube, padded with three zero columns.
pub fn hypercube(n: usize, seed: u64) -> Result<Dataset> {
    check_n(n)?;
    let mut r = rng(seed);
    let mut data = Array2::zeros((n, 8));
    for mut row in data.outer_iter_mut() {
        for v in row.iter_mut().take(5) {
            *v = r.random::<f64>();
        }
    }
    Ok(Dataset {
        cloud: PointCloud::new(data, Some(names("V", 8)))?,
        class: None,
        true_id: vec![5.0],
    })
}

/// Three Gaussian blocks of `n_per` rows in five dimensions: a line
/// `(v, 3v, 0, 0, 0)` with `v ~ N(-5, 1)`, a standard 3-d normal padded with
/// zeros, and a 5-d normal centered at 5. Classes are `A`, `B`, `C`.
pub fn gaussmix(n_per: usize, seed: u64) -> Result<Dataset> {
    if n_per < 1 || 3 * n_per < MIN_POINTS {
        return Err(invalid(format!("n_per must be at least 1, got {n_per}")));
    }
    let mut r = rng(seed);
    let a = Normal::new(-5.0, 1.0).expect("valid normal");
    let b = Normal::new(0.0, 1.0).expect("valid normal");
    let c = Normal::new(5.0, 1.0).expect("valid normal");
    let mut data = Array2::zeros((3 * n_per, 5));
    for i in 0..n_per {
        let v = a.sample(&mut r);
        data[[i, 0]] = v;
        data[[i, 1]] = 3.0 * v;
    }
    for i in n_per..2 * n_per {
        for j in 0..3 {
            data[[i, j]] = b.sample(&mut r);
        }
    }
    for i in 2 * n_per..3 * n_per {
        for j in 0..5 {
            data[[i, j]] = c.sample(&mut r);
        }
    }
    let class = ["A", "B", "C"]
        .iter()
        .flat_map(|c| std::iter::repeat_n(c.to_string(), n_per))
        .collect();
    Ok(Dataset {
        cloud: PointCloud::new(data, Some(names("V", 5)))?,
        class: Some(class),
        true_id: vec![1.0, 3.0, 5.0],
    })
}

/// Inverse Pareto(1, d) CDF evaluated at the upper-tail probability `u`.
pub fn pareto_from_uniform(u: f64, d: f64) -> f64 {
    u.powf(-1.0 / d)
}

/// `n` i.i.d. Pareto(1, d) ratios by inverse-CDF sampling.
pub fn pareto_ratios(n: usize, d: f64, seed: u64) -> Result<Vec<f64>> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(invalid(format!("d must be positive, got {d}")));
    }
    let mut r = rng(seed);
    Ok((0..n)
        .map(|_| pareto_from_uniform(1.0 - r.random::<f64>(), d))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn swissroll_map_examples() {
        assert_eq!(swissroll_map(0.0, 5.0), [0.0, 5.0, 0.0]);
        let ds = swissroll(200, 3).unwrap();
        for row in ds.cloud.data().outer_iter() {
            let x = (row[0] * row[0] + row[2] * row[2]).sqrt();
            assert!((0.0..10.0).contains(&x));
            assert_relative_eq!(row[0], x * x.cos(), epsilon = 1e-9);
        }
    }

    #[test]
    fn hypercube_shape() {
        let ds = hypercube(10_000, 4).unwrap();
        let x = ds.cloud.data();
        assert_eq!(x.ncols(), 8);
        assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
        for j in 5..8 {
            assert!(x.column(j).iter().all(|&v| v == 0.0));
        }
        for j in 0..5 {
            let m = x.column(j).mean().unwrap();
            assert!((m - 0.5).abs() < 0.01, "{m}");
        }
        assert_eq!(ds.cloud.col_names().unwrap()[7], "V8");
    }

    #[test]
    fn gaussmix_blocks() {
        let ds = gaussmix(500, 5).unwrap();
        let x = ds.cloud.data();
        assert_eq!(x.dim(), (1500, 5));
        for i in 0..500 {
            assert_eq!(x[[i, 1]], 3.0 * x[[i, 0]]);
            assert!((2..5).all(|j| x[[i, j]] == 0.0));
        }
        let class = ds.class.unwrap();
        assert_eq!((class[0].as_str(), class[500].as_str(), class[1499].as_str()), ("A", "B", "C"));
    }

    #[test]
    fn pareto_examples() {
        assert_eq!(pareto_from_uniform(0.5, 1.0), 2.0);
        let mus = pareto_ratios(1_000_000, 3.0, 9).unwrap();
        assert!(mus.iter().all(|&m| m >= 1.0));
        let mut s = mus.clone();
        s.sort_unstable_by(f64::total_cmp);
        let med = s[s.len() / 2];
        assert!((med / 2f64.powf(1.0 / 3.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn seeds_are_deterministic_and_distinct() {
        assert_eq!(swissroll(50, 1).unwrap(), swissroll(50, 1).unwrap());
        assert_ne!(swissroll(50, 1).unwrap(), swissroll(50, 2).unwrap());
        assert_eq!(pareto_ratios(10, 2.0, 8).unwrap(), pareto_ratios(10, 2.0, 8).unwrap());
    }
}
