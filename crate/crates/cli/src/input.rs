//! Loading observations, distance matrices and ratios from CSV.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use idim_core::io::read_numeric_csv_path;
use idim_core::{DistanceMatrix, Input, Metric, PointCloud};

use crate::args::DataArgs;
use crate::UsageError;

/// Data read according to a [`DataArgs`].
pub enum Loaded {
    Points(PointCloud, Metric),
    Distances(DistanceMatrix),
}

impl Loaded {
    pub fn as_input(&self) -> Input<'_> {
        match self {
            Loaded::Points(x, m) => Input::Points(x, *m),
            Loaded::Distances(d) => Input::Distances(d),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Loaded::Points(x, _) => x.nrows(),
            Loaded::Distances(d) => d.n(),
        }
    }
}

impl DataArgs {
    /// The file that will be read, if any.
    pub fn path(&self) -> Option<&Path> {
        self.input.as_deref().or(self.dist.as_deref())
    }

    pub fn require_path(&self) -> Result<PathBuf> {
        self.path()
            .map(Path::to_path_buf)
            .ok_or_else(|| UsageError::new("one of --input or --dist is required").into())
    }

    pub fn check_metric(&self) -> Result<()> {
        if self.input.is_some() && self.metric == Metric::Precomputed {
            return Err(UsageError::new("--metric precomputed needs --dist").into());
        }
        Ok(())
    }

    pub fn load(&self) -> Result<Loaded> {
        if let Some(path) = &self.input {
            let t = read_numeric_csv_path(path, self.header, &self.drop_col)
                .with_context(|| format!("reading {}", path.display()))?;
            let cloud = PointCloud::new(t.data, t.col_names)?;
            Ok(Loaded::Points(cloud, self.metric))
        } else if let Some(path) = &self.dist {
            let t = read_numeric_csv_path(path, self.header, &self.drop_col)
                .with_context(|| format!("reading {}", path.display()))?;
            Ok(Loaded::Distances(DistanceMatrix::new(t.data)?))
        } else {
            Err(UsageError::new("one of --input or --dist is required").into())
        }
    }
}

/// Reads ratios from a CSV: the `mu` column when there is one, otherwise
/// the only column.
pub fn read_mus(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let first = text.lines().next().unwrap_or("");
    let has_header = first
        .split(',')
        .any(|f| f.trim().parse::<f64>().is_err());
    let t = idim_core::io::read_numeric_csv(text.as_bytes(), has_header, &[])
        .with_context(|| format!("reading {}", path.display()))?;
    let col = match &t.col_names {
        Some(names) => match names.iter().position(|n| n == "mu") {
            Some(j) => j,
            None if names.len() == 1 => 0,
            None => anyhow::bail!("{} has no 'mu' column", path.display()),
        },
        None if t.data.ncols() == 1 => 0,
        None => anyhow::bail!("{} must have a single column or a 'mu' column", path.display()),
    };
    Ok(t.data.column(col).to_vec())
}

/// Splits `file.csv[:column]`.
pub fn split_class_spec(spec: &str) -> (PathBuf, String) {
    match spec.rsplit_once(':') {
        Some((path, col)) if !col.is_empty() && !col.contains(['/', '\\']) => {
            (PathBuf::from(path), col.to_string())
        }
        _ => (PathBuf::from(spec), "class".to_string()),
    }
}
