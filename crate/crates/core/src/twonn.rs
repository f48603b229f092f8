//! Homogeneous intrinsic dimension from second-to-first neighbor ratios.
//!
//! Under local homogeneity the ratios follow a Pareto(1, d) law, so `ln μ` is
//! exponential with rate `d`. The three estimators below fit that law by
//! least squares on the linearized CDF, by maximum likelihood, and by a
//! conjugate Gamma prior.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::MIN_POINTS;
use crate::special::{gamma_quantile, inv_gamma_quantile, ln_gamma_pdf, student_t_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    LinFit,
    #[default]
    Mle,
    Bayes,
}

impl Method {
    /// Long name used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Method::LinFit => "Least Square Estimation",
            Method::Mle => "MLE",
            Method::Bayes => "Bayesian Estimation",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::LinFit => "linfit",
            Method::Mle => "mle",
            Method::Bayes => "bayes",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linfit" => Ok(Method::LinFit),
            "mle" => Ok(Method::Mle),
            "bayes" => Ok(Method::Bayes),
            other => Err(invalid(format!("unknown method '{other}'"))),
        }
    }
}

/// Tuning shared by the three estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoNNOptions {
    /// Confidence level, or credible mass for the Bayesian fit.
    pub alpha: f64,
    pub c_trimmed: f64,
    /// Use `n - 1` rather than `n` in the MLE numerator.
    pub unbiased: bool,
    pub a_d: f64,
    pub b_d: f64,
}

impl Default for TwoNNOptions {
    fn default() -> Self {
        Self {
            alpha: 0.95,
            c_trimmed: 0.01,
            unbiased: true,
            a_d: 0.001,
            b_d: 0.001,
        }
    }
}

impl TwoNNOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        check_trim(self.c_trimmed)?;
        if !(self.a_d > 0.0 && self.a_d.is_finite() && self.b_d > 0.0 && self.b_d.is_finite()) {
            return Err(invalid(format!(
                "prior parameters must be positive, got a_d={}, b_d={}",
                self.a_d, self.b_d
            )));
        }
        Ok(())
    }
}

/// Conjugate posterior `Gamma(shape, rate)` and its point summaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesPosterior {
    pub a_d: f64,
    pub b_d: f64,
    pub shape: f64,
    pub rate: f64,
    pub mean: f64,
    pub median: f64,
    pub mode: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FitExtras {
    LinFit {
        /// Fitted `(ln μ_(i), -ln(1 - i/(n+1)))` pairs.
        points: Vec<(f64, f64)>,
        slope_se: f64,
    },
    Mle {
        unbiased: bool,
        sum_log_mu: f64,
    },
    Bayes(BayesPosterior),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoNNFit {
    pub method: Method,
    /// Slope, MLE, or posterior mean.
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    pub c_trimmed: f64,
    pub n_original: usize,
    pub n_used: usize,
    pub extras: FitExtras,
}

impl TwoNNFit {
    pub fn posterior(&self) -> Option<&BayesPosterior> {
        match &self.extras {
            FitExtras::Bayes(p) => Some(p),
            _ => None,
        }
    }
}

fn check_trim(c: f64) -> Result<()> {
    if !(0.0..1.0).contains(&c) {
        return Err(invalid(format!("c_trimmed must lie in [0, 1), got {c}")));
    }
    Ok(())
}

fn check_mus(mus: &[f64]) -> Result<()> {
    if let Some((i, m)) = mus.iter().enumerate().find(|(_, m)| !(m.is_finite() && **m >= 1.0)) {
        return Err(Error::InvalidRatios(format!(
            "ratio {i} is {m}; ratios must be finite and at least 1"
        )));
    }
    Ok(())
}

/// Number of ratios removed by trimming a sample of size `n` at level `c`.
pub fn n_trimmed(n: usize, c: f64) -> usize {
    // The relative fudge keeps products such as 1000 * 0.001 from landing
    // just below an integer.
    let raw = n as f64 * c;
    ((raw * (1.0 + 4.0 * f64::EPSILON)).floor() as usize).min(n)
}

/// Drops the `⌊n·c⌋` largest ratios; the others keep their order. Among
/// equal values the later ones go first.
pub fn trim(mus: &[f64], c_trimmed: f64) -> Result<Vec<f64>> {
    check_trim(c_trimmed)?;
    let n = mus.len();
    let drop = n_trimmed(n, c_trimmed);
    if n - drop < MIN_POINTS {
        return Err(Error::TooFewPoints {
            remaining: n - drop,
            required: MIN_POINTS,
        });
    }
    if drop == 0 {
        return Ok(mus.to_vec());
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| mus[a].total_cmp(&mus[b]).then(a.cmp(&b)));
    let mut keep = vec![true; n];
    for &i in &order[n - drop..] {
        keep[i] = false;
    }
    Ok(mus
        .iter()
        .zip(keep)
        .filter_map(|(&m, k)| k.then_some(m))
        .collect())
}

fn prepare(mus: &[f64], opts: &TwoNNOptions) -> Result<Vec<f64>> {
    opts.validate()?;
    check_mus(mus)?;
    trim(mus, opts.c_trimmed)
}

/// Least-squares slope through the origin of the linearized Pareto CDF.
pub fn twonn_linfit(mus: &[f64], opts: &TwoNNOptions) -> Result<TwoNNFit> {
    let mut kept = prepare(mus, opts)?;
    kept.sort_unstable_by(f64::total_cmp);
    let n = kept.len();
    let points: Vec<(f64, f64)> = kept
        .iter()
        .enumerate()
        .map(|(i, &m)| (m.ln(), -(-((i + 1) as f64) / (n + 1) as f64).ln_1p()))
        .collect();
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidRatios(
            "all ratios equal 1; the slope is undefined".into(),
        ));
    }
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    let slope = sxy / sxx;
    let rss: f64 = points.iter().map(|(x, y)| (y - slope * x).powi(2)).sum();
    let se = (rss / (n - 1) as f64 / sxx).sqrt();
    let t = student_t_quantile((1.0 + opts.alpha) / 2.0, (n - 1) as f64);
    Ok(TwoNNFit {
        method: Method::LinFit,
        estimate: slope,
        lower: slope - t * se,
        upper: slope + t * se,
        alpha: opts.alpha,
        c_trimmed: opts.c_trimmed,
        n_original: mus.len(),
        n_used: n,
        extras: FitExtras::LinFit {
            points,
            slope_se: se,
        },
    })
}

/// Maximum likelihood estimate with the exact interval implied by
/// `d·S ~ Gamma(n, 1)`.
pub fn twonn_mle(mus: &[f64], opts: &TwoNNOptions) -> Result<TwoNNFit> {
    let kept = prepare(mus, opts)?;
    let n = kept.len() as f64;
    let s: f64 = kept.iter().map(|m| m.ln()).sum();
    if s <= 0.0 {
        return Err(Error::InvalidRatios(
            "all ratios equal 1; the likelihood has no maximum".into(),
        ));
    }
    let estimate = if opts.unbiased { (n - 1.0) / s } else { n / s };
    let q_hi = inv_gamma_quantile((1.0 + opts.alpha) / 2.0, n, n - 1.0);
    let q_lo = inv_gamma_quantile((1.0 - opts.alpha) / 2.0, n, n - 1.0);
    Ok(TwoNNFit {
        method: Method::Mle,
        estimate,
        lower: estimate / q_hi,
        upper: estimate / q_lo,
        alpha: opts.alpha,
        c_trimmed: opts.c_trimmed,
        n_original: mus.len(),
        n_used: kept.len(),
        extras: FitExtras::Mle {
            unbiased: opts.unbiased,
            sum_log_mu: s,
        },
    })
}

/// Conjugate `Gamma(a_d, b_d)` update with an equal-tailed credible
/// interval.
pub fn twonn_bayes(mus: &[f64], opts: &TwoNNOptions) -> Result<TwoNNFit> {
    let kept = prepare(mus, opts)?;
    let s: f64 = kept.iter().map(|m| m.ln()).sum();
    let shape = opts.a_d + kept.len() as f64;
    let rate = opts.b_d + s;
    let post = BayesPosterior {
        a_d: opts.a_d,
        b_d: opts.b_d,
        shape,
        rate,
        mean: shape / rate,
        median: gamma_quantile(0.5, shape, rate),
        mode: if shape > 1.0 { (shape - 1.0) / rate } else { 0.0 },
    };
    Ok(TwoNNFit {
        method: Method::Bayes,
        estimate: post.mean,
        lower: gamma_quantile((1.0 - opts.alpha) / 2.0, shape, rate),
        upper: gamma_quantile((1.0 + opts.alpha) / 2.0, shape, rate),
        alpha: opts.alpha,
        c_trimmed: opts.c_trimmed,
        n_original: mus.len(),
        n_used: kept.len(),
        extras: FitExtras::Bayes(post),
    })
}

pub fn twonn(mus: &[f64], method: Method, opts: &TwoNNOptions) -> Result<TwoNNFit> {
    match method {
        Method::LinFit => twonn_linfit(mus, opts),
        Method::Mle => twonn_mle(mus, opts),
        Method::Bayes => twonn_bayes(mus, opts),
    }
}

/// Support for evaluating prior and posterior densities. Unset bounds
/// default to the posterior mean ± 8 standard deviations (clipped at zero),
/// and the default step splits the range into 400 intervals.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GridSpec {
    pub low: Option<f64>,
    pub high: Option<f64>,
    pub by: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub x: Vec<f64>,
    pub prior: Vec<f64>,
    pub posterior: Vec<f64>,
}

const GRID_INTERVALS: f64 = 400.0;
const MAX_GRID_POINTS: usize = 1_000_000;

pub fn density_grid(post: &BayesPosterior, spec: &GridSpec) -> Result<DensityGrid> {
    let sd = post.shape.sqrt() / post.rate;
    let high = spec.high.unwrap_or(post.mean + 8.0 * sd);
    let mut low = spec.low.unwrap_or(post.mean - 8.0 * sd);
    if spec.low.is_none() && low <= 0.0 {
        low = high / GRID_INTERVALS;
    }
    if !(low.is_finite() && high.is_finite() && low > 0.0 && low < high) {
        return Err(invalid(format!(
            "density support must satisfy 0 < low < high, got [{low}, {high}]"
        )));
    }
    let by = spec.by.unwrap_or((high - low) / GRID_INTERVALS);
    if !(by > 0.0 && by.is_finite()) {
        return Err(invalid(format!("grid step must be positive, got {by}")));
    }
    let steps = ((high - low) / by * (1.0 + 4.0 * f64::EPSILON)).floor() as usize;
    if steps >= MAX_GRID_POINTS {
        return Err(invalid("density grid is too fine"));
    }
    let x: Vec<f64> = (0..=steps).map(|i| low + i as f64 * by).collect();
    let dens = |shape, rate| -> Vec<f64> {
        x.iter()
            .map(|&v| ln_gamma_pdf(v, shape, rate).exp())
            .collect()
    };
    Ok(DensityGrid {
        prior: dens(post.a_d, post.b_d),
        posterior: dens(post.shape, post.rate),
        x,
    })
}
