//! Heterogeneous intrinsic dimension: a finite mixture of Pareto kernels
//! with a neighborhood-coherence penalty, fit by Gibbs sampling.
//!
//! Labels are 0-based inside the sampler and 1-based in [`HidalgoChains`].
//! Mixture weights are carried as logarithms so that components with
//! negligible mass under a sparse Dirichlet prior never underflow to zero.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::geometry::{compute_mus, Adjacency, Input, MusOptions, RatioSet};
use crate::special::{ln_choose, ln_gamma_p, log_sum_exp, truncated_gamma_inverse};

/// Name of the generator recorded alongside every run.
pub const RNG_NAME: &str = "ChaCha20Rng::seed_from_u64";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum PriorType {
    #[serde(rename = "conjugate")]
    Conjugate,
    #[serde(rename = "truncated")]
    Truncated,
    #[default]
    #[serde(rename = "truncated-pointmass")]
    TruncatedPointMass,
}

impl PriorType {
    pub fn label(self) -> &'static str {
        match self {
            PriorType::Conjugate => "Conjugate",
            PriorType::Truncated => "Truncated",
            PriorType::TruncatedPointMass => "Truncated_PointMass",
        }
    }
}

impl fmt::Display for PriorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriorType::Conjugate => "conjugate",
            PriorType::Truncated => "truncated",
            PriorType::TruncatedPointMass => "truncated-pointmass",
        })
    }
}

impl FromStr for PriorType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "conjugate" => Ok(PriorType::Conjugate),
            "truncated" => Ok(PriorType::Truncated),
            "truncated-pointmass" => Ok(PriorType::TruncatedPointMass),
            other => Err(invalid(format!("unknown prior type '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HidalgoConfig {
    /// Upper bound on the number of occupied components.
    pub k: usize,
    pub q: usize,
    /// Probability that a neighbor shares the point's component.
    pub xi: f64,
    pub alpha_dirichlet: f64,
    pub a0_d: f64,
    pub b0_d: f64,
    pub prior_type: PriorType,
    /// Nominal dimension bounding `d` under the truncated priors.
    pub nominal_dim: Option<usize>,
    /// Prior probability of `d = D` under the point-mass prior.
    pub pi_mass: f64,
    pub nsim: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    #[serde(skip)]
    pub verbose: bool,
}

impl Default for HidalgoConfig {
    fn default() -> Self {
        Self {
            k: 10,
            q: 3,
            xi: 0.75,
            alpha_dirichlet: 0.05,
            a0_d: 1.0,
            b0_d: 1.0,
            prior_type: PriorType::Conjugate,
            nominal_dim: None,
            pi_mass: 0.5,
            nsim: 2000,
            burn_in: 2000,
            thinning: 5,
            seed: 1,
            verbose: false,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {v}")))
    }
}

impl HidalgoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.5 && self.xi < 1.0) {
            return Err(invalid(format!("xi must lie in (0.5, 1), got {}", self.xi)));
        }
        self.validate_sampler()
    }

    /// Every check except the open bound on `xi`, which the sampler itself
    /// relaxes to `[0.5, 1)`.
    fn validate_sampler(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("K must be at least 1"));
        }
        if self.q == 0 {
            return Err(invalid("q must be at least 1"));
        }
        positive("alpha_dirichlet", self.alpha_dirichlet)?;
        positive("a0_d", self.a0_d)?;
        positive("b0_d", self.b0_d)?;
        if self.nsim == 0 || self.thinning == 0 {
            return Err(invalid("nsim and thinning must be at least 1"));
        }
        if !self.nsim.is_multiple_of(self.thinning) {
            return Err(invalid(format!(
                "nsim ({}) must be divisible by thinning ({})",
                self.nsim, self.thinning
            )));
        }
        if self.prior_type != PriorType::Conjugate {
            match self.nominal_dim {
                Some(d) if d >= 1 => {}
                _ => {
                    return Err(invalid(format!(
                        "the {} prior needs a nominal dimension D >= 1",
                        self.prior_type
                    )))
                }
            }
        }
        if self.prior_type == PriorType::TruncatedPointMass
            && !(self.pi_mass > 0.0 && self.pi_mass < 1.0)
        {
            return Err(invalid(format!("pi_mass must lie in (0, 1), got {}", self.pi_mass)));
        }
        Ok(())
    }

    /// Number of retained draws.
    pub fn retained(&self) -> usize {
        self.nsim / self.thinning
    }

    fn upper(&self) -> f64 {
        self.nominal_dim.map_or(f64::INFINITY, |d| d as f64)
    }
}

/// Retained draws. Row `t` of every matrix belongs to the same iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct HidalgoChains {
    /// `T × K` mixture weights.
    pub cluster_prob: Array2<f64>,
    /// `T × n` labels in `1..=K`.
    pub membership_labels: Array2<u32>,
    /// `T × K` component dimensions.
    pub id_raw: Array2<f64>,
    pub config: HidalgoConfig,
    pub elapsed_secs: f64,
    /// Ratios the chain was fit to.
    pub mus: Vec<f64>,
    /// Original row of every observation after duplicate removal.
    pub kept_rows: Vec<usize>,
}

impl HidalgoChains {
    pub fn n(&self) -> usize {
        self.membership_labels.ncols()
    }

    pub fn draws(&self) -> usize {
        self.membership_labels.nrows()
    }
}

/// `ln d − (d + 1) ln μ`, the log Pareto(1, d) density at `μ`.
pub fn log_likelihood_term(mu: f64, d: f64) -> f64 {
    d.ln() - (d + 1.0) * mu.ln()
}

/// `ln Z(ζ, N)`: log normalizer of the neighbor-choice likelihood for a
/// point whose component has `n_k` members (itself included) among `n`,
/// with `q` neighbors each.
pub fn ln_neighborhood_norm_z(zeta: f64, n_k: usize, n: usize, q: usize) -> Result<f64> {
    if !(zeta > 0.0 && zeta <= 0.5) {
        return Err(invalid(format!("zeta must lie in (0, 0.5], got {zeta}")));
    }
    if n_k == 0 || n_k > n || q == 0 || q >= n {
        return Err(invalid(format!(
            "invalid counts: N={n_k}, n={n}, q={q}"
        )));
    }
    Ok(ln_z_unchecked(zeta.ln(), (-zeta).ln_1p(), n_k, n, q))
}

pub fn neighborhood_norm_z(zeta: f64, n_k: usize, n: usize, q: usize) -> Result<f64> {
    ln_neighborhood_norm_z(zeta, n_k, n, q).map(f64::exp)
}

fn ln_z_unchecked(ln_zeta: f64, ln_one_minus: f64, n_k: usize, n: usize, q: usize) -> f64 {
    let terms: Vec<f64> = (0..=q.min(n_k - 1))
        .map(|m| {
            ln_choose(n_k - 1, m)
                + ln_choose(n - n_k, q - m)
                + m as f64 * ln_one_minus
                + (q - m) as f64 * ln_zeta
        })
        .collect();
    log_sum_exp(&terms)
}

/// Log of a Gamma(shape, 1) draw, accurate even when the draw itself would
/// underflow (small shapes).
fn ln_gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        Gamma::new(shape, 1.0).expect("positive shape").sample(rng).ln()
    } else {
        let g = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
        let u: f64 = 1.0 - rng.random::<f64>();
        g.ln() + u.ln() / shape
    }
}

/// Log mixture weights drawn from `Dirichlet(alpha + counts)`.
pub fn sample_ln_weights<R: Rng + ?Sized>(counts: &[usize], alpha: f64, rng: &mut R) -> Vec<f64> {
    let mut lg: Vec<f64> = counts
        .iter()
        .map(|&c| ln_gamma_draw(alpha + c as f64, rng))
        .collect();
    let total = log_sum_exp(&lg);
    lg.iter_mut().for_each(|v| *v -= total);
    lg
}

/// Mixture weights drawn from `Dirichlet(alpha + n_k)`, where `n_k` counts
/// the 1-based labels `z` equal to `k`.
pub fn sample_weights<R: Rng + ?Sized>(z: &[u32], alpha: f64, k: usize, rng: &mut R) -> Vec<f64> {
    let mut counts = vec![0usize; k];
    for &l in z {
        counts[l as usize - 1] += 1;
    }
    weights_from_logs(&sample_ln_weights(&counts, alpha, rng))
}

fn weights_from_logs(ln_pi: &[f64]) -> Vec<f64> {
    let w: Vec<f64> = ln_pi.iter().map(|v| v.exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// `ln C_{a,b,D}`, the log normalizer of Gamma(a, b) truncated to `(0, D]`.
pub fn ln_truncated_norm(a: f64, b: f64, upper: f64) -> f64 {
    ln_gamma_p(a, b * upper) + ln_gamma(a) - a * b.ln()
}

/// Posterior probability of `d_k = D` under the point-mass prior, for a
/// component with `n_k` members and `s_k = Σ ln μ` over them.
pub fn point_mass_probability(n_k: usize, s_k: f64, cfg: &HidalgoConfig) -> f64 {
    let (ln_cont, ln_point) = point_mass_log_weights(n_k, s_k, cfg);
    let lse = log_sum_exp(&[ln_cont, ln_point]);
    (ln_point - lse).exp()
}

fn point_mass_log_weights(n_k: usize, s_k: f64, cfg: &HidalgoConfig) -> (f64, f64) {
    let d = cfg.upper();
    let a_star = cfg.a0_d + n_k as f64;
    let b_star = cfg.b0_d + s_k;
    let ln_cont = (-cfg.pi_mass).ln_1p() + ln_truncated_norm(a_star, b_star, d)
        - ln_truncated_norm(cfg.a0_d, cfg.b0_d, d);
    let ln_point = cfg.pi_mass.ln() + n_k as f64 * d.ln() - d * s_k;
    (ln_cont, ln_point)
}

/// Draws `d_k` from its full conditional given `n_k` members with
/// `s_k = Σ ln μ`. An empty component draws from the prior.
pub fn sample_d<R: Rng + ?Sized>(n_k: usize, s_k: f64, cfg: &HidalgoConfig, rng: &mut R) -> f64 {
    let a_star = cfg.a0_d + n_k as f64;
    let b_star = cfg.b0_d + s_k;
    let truncated = |rng: &mut R| {
        let u = 1.0 - rng.random::<f64>();
        truncated_gamma_inverse(u, a_star, b_star, cfg.upper())
    };
    match cfg.prior_type {
        PriorType::Conjugate => Gamma::new(a_star, 1.0 / b_star)
            .expect("positive posterior parameters")
            .sample(rng),
        PriorType::Truncated => truncated(rng),
        PriorType::TruncatedPointMass => {
            let p_point = point_mass_probability(n_k, s_k, cfg);
            if rng.random::<f64>() < p_point {
                cfg.upper()
            } else {
                truncated(rng)
            }
        }
    }
}

/// The data side of the model: log ratios, neighbor lists, and the table of
/// `ln Z(ζ, N)` for `N = 1..=n`.
#[derive(Debug, Clone)]
pub struct Model {
    ln_mu: Vec<f64>,
    forward: Vec<Vec<usize>>,
    reverse: Vec<Vec<usize>>,
    /// `ln(ζ₁ / ζ₀)`.
    ln_odds: f64,
    /// Index `N` holds `ln Z(ζ, N)`; index 0 is unused.
    ln_z: Vec<f64>,
}

impl Model {
    /// `xi` may sit on the closed lower bound 0.5, where the neighborhood
    /// term becomes uninformative.
    pub fn new(mus: &[f64], adjacency: &Adjacency, xi: f64) -> Result<Self> {
        let n = mus.len();
        if !(0.5..1.0).contains(&xi) {
            return Err(invalid(format!("xi must lie in [0.5, 1), got {xi}")));
        }
        if adjacency.n() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} ratios but {} adjacency rows",
                n,
                adjacency.n()
            )));
        }
        if let Some((i, m)) = mus.iter().enumerate().find(|(_, m)| !(m.is_finite() && **m >= 1.0)) {
            return Err(Error::InvalidRatios(format!("ratio {i} is {m}")));
        }
        let q = adjacency.q();
        if q >= n {
            return Err(invalid(format!("q={q} must be below n={n}")));
        }
        let zeta = 1.0 - xi;
        let (ln_zeta, ln_one_minus) = (zeta.ln(), xi.ln());
        let mut ln_z = vec![f64::NAN; n + 1];
        for (nk, slot) in ln_z.iter_mut().enumerate().skip(1) {
            *slot = ln_z_unchecked(ln_zeta, ln_one_minus, nk, n, q);
        }
        Ok(Self {
            ln_mu: mus.iter().map(|m| m.ln()).collect(),
            forward: adjacency.neighbors().outer_iter().map(|r| r.to_vec()).collect(),
            reverse: adjacency.reverse(),
            ln_odds: ln_one_minus - ln_zeta,
            ln_z,
        })
    }

    pub fn n(&self) -> usize {
        self.ln_mu.len()
    }

    /// Unnormalized log full-conditional weights of `z_i = k` for every `k`.
    /// `counts` are component sizes including observation `i` itself.
    fn log_weights(
        &self,
        i: usize,
        z: &[usize],
        counts: &[usize],
        d: &[f64],
        ln_pi: &[f64],
        out: &mut [f64],
    ) {
        let k_max = d.len();
        let mut same = [0usize; 16];
        let mut same_vec;
        let same: &mut [usize] = if k_max <= same.len() {
            &mut same[..k_max]
        } else {
            same_vec = vec![0usize; k_max];
            &mut same_vec
        };
        for &l in self.forward[i].iter().chain(&self.reverse[i]) {
            same[z[l]] += 1;
        }
        let ln_mu = self.ln_mu[i];
        for k in 0..k_max {
            let others = counts[k] - usize::from(z[i] == k);
            let ln_z_next = self.ln_z[others + 1];
            let mut w = ln_pi[k] + d[k].ln() - (d[k] + 1.0) * ln_mu - ln_z_next
                + same[k] as f64 * self.ln_odds;
            if others > 0 {
                w += others as f64 * (self.ln_z[others] - ln_z_next);
            }
            out[k] = w;
        }
    }

    /// Normalized full conditional of the 0-based label of observation `i`
    /// given the other labels `z` (0-based), dimensions `d`, and weights `pi`.
    pub fn full_conditional(&self, i: usize, z: &[usize], d: &[f64], pi: &[f64]) -> Vec<f64> {
        let mut counts = vec![0usize; d.len()];
        for &l in z {
            counts[l] += 1;
        }
        let ln_pi: Vec<f64> = pi.iter().map(|p| p.ln()).collect();
        let mut lw = vec![0.0; d.len()];
        self.log_weights(i, z, &counts, d, &ln_pi, &mut lw);
        let total = log_sum_exp(&lw);
        lw.iter().map(|v| (v - total).exp()).collect()
    }
}

/// Inverse-CDF draw from unnormalized log weights.
fn sample_log_categorical<R: Rng + ?Sized>(lw: &[f64], rng: &mut R) -> usize {
    let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut cum = 0.0;
    let mut cdf = [0.0f64; 16];
    let mut cdf_vec;
    let cdf: &mut [f64] = if lw.len() <= cdf.len() {
        &mut cdf[..lw.len()]
    } else {
        cdf_vec = vec![0.0; lw.len()];
        &mut cdf_vec
    };
    for (c, &w) in cdf.iter_mut().zip(lw) {
        cum += (w - max).exp();
        *c = cum;
    }
    let u = rng.random::<f64>() * cum;
    cdf.iter().position(|&c| u < c).unwrap_or(lw.len() - 1)
}

/// Samples the 0-based label of observation `i` from its full conditional.
pub fn sample_membership<R: Rng + ?Sized>(
    model: &Model,
    i: usize,
    z: &[usize],
    d: &[f64],
    pi: &[f64],
    rng: &mut R,
) -> usize {
    let probs = model.full_conditional(i, z, d, pi);
    let lw: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
    sample_log_categorical(&lw, rng)
}

/// One Gibbs chain: owns its state and generator.
pub struct Sampler {
    model: Model,
    cfg: HidalgoConfig,
    rng: ChaCha20Rng,
    z: Vec<usize>,
    counts: Vec<usize>,
    d: Vec<f64>,
    ln_pi: Vec<f64>,
    scratch: Vec<f64>,
}

impl Sampler {
    /// Initializes labels uniformly at random, then draws `d` and `π` from
    /// their priors. Accepts `xi = 0.5`, unlike [`HidalgoConfig::validate`].
    pub fn new(mus: &[f64], adjacency: &Adjacency, cfg: &HidalgoConfig) -> Result<Self> {
        cfg.validate_sampler()?;
        if adjacency.q() != cfg.q {
            return Err(invalid(format!(
                "adjacency has q={} but the configuration asks for q={}",
                adjacency.q(),
                cfg.q
            )));
        }
        let model = Model::new(mus, adjacency, cfg.xi)?;
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        let k = cfg.k;
        let z: Vec<usize> = (0..model.n()).map(|_| rng.random_range(0..k)).collect();
        let mut counts = vec![0usize; k];
        z.iter().for_each(|&l| counts[l] += 1);
        let d = (0..k).map(|_| sample_d(0, 0.0, cfg, &mut rng)).collect();
        let ln_pi = sample_ln_weights(&vec![0; k], cfg.alpha_dirichlet, &mut rng);
        Ok(Self {
            model,
            cfg: cfg.clone(),
            rng,
            z,
            counts,
            d,
            ln_pi,
            scratch: vec![0.0; k],
        })
    }

    /// One full sweep: weights, then labels in index order, then dimensions.
    pub fn sweep(&mut self) {
        self.ln_pi = sample_ln_weights(&self.counts, self.cfg.alpha_dirichlet, &mut self.rng);
        for i in 0..self.model.n() {
            self.model.log_weights(
                i,
                &self.z,
                &self.counts,
                &self.d,
                &self.ln_pi,
                &mut self.scratch,
            );
            let new = sample_log_categorical(&self.scratch, &mut self.rng);
            let old = self.z[i];
            if new != old {
                self.counts[old] -= 1;
                self.counts[new] += 1;
                self.z[i] = new;
            }
        }
        let mut sums = vec![0.0; self.cfg.k];
        for (&l, &lm) in self.z.iter().zip(&self.model.ln_mu) {
            sums[l] += lm;
        }
        for k in 0..self.cfg.k {
            self.d[k] = sample_d(self.counts[k], sums[k], &self.cfg, &mut self.rng);
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.z
    }

    pub fn dims(&self) -> &[f64] {
        &self.d
    }

    pub fn weights(&self) -> Vec<f64> {
        weights_from_logs(&self.ln_pi)
    }

    /// Runs burn-in plus `nsim` sweeps, keeping every `thinning`-th draw.
    pub fn run(mut self) -> (Array2<f64>, Array2<u32>, Array2<f64>) {
        let (k, n) = (self.cfg.k, self.model.n());
        let t_keep = self.cfg.retained();
        let mut pi_out = Array2::zeros((t_keep, k));
        let mut z_out = Array2::zeros((t_keep, n));
        let mut d_out = Array2::zeros((t_keep, k));
        let total = self.cfg.burn_in + self.cfg.nsim;
        let report_every = (total / 10).max(1);
        let mut t = 0;
        for it in 0..total {
            self.sweep();
            if self.cfg.verbose && (it + 1) % report_every == 0 {
                log::info!("iteration {}/{}", it + 1, total);
            }
            if it >= self.cfg.burn_in && (it + 1 - self.cfg.burn_in).is_multiple_of(self.cfg.thinning) {
                for (dst, v) in pi_out.row_mut(t).iter_mut().zip(self.weights()) {
                    *dst = v;
                }
                for (dst, &l) in z_out.row_mut(t).iter_mut().zip(&self.z) {
                    *dst = l as u32 + 1;
                }
                for (dst, &v) in d_out.row_mut(t).iter_mut().zip(&self.d) {
                    *dst = v;
                }
                t += 1;
            }
        }
        (pi_out, z_out, d_out)
    }
}

/// Fits the mixture to precomputed ratios; `ratios` must carry an
/// adjacency of order `cfg.q`.
pub fn run_hidalgo_on_ratios(ratios: &RatioSet, cfg: &HidalgoConfig) -> Result<HidalgoChains> {
    cfg.validate()?;
    let adjacency = ratios
        .adjacency
        .as_ref()
        .ok_or_else(|| invalid("ratios were computed without an adjacency matrix"))?;
    let start = Instant::now();
    let sampler = Sampler::new(&ratios.mus, adjacency, cfg)?;
    let (cluster_prob, membership_labels, id_raw) = sampler.run();
    Ok(HidalgoChains {
        cluster_prob,
        membership_labels,
        id_raw,
        config: cfg.clone(),
        elapsed_secs: start.elapsed().as_secs_f64(),
        mus: ratios.mus.clone(),
        kept_rows: ratios.kept_rows.clone(),
    })
}

/// Computes first/second neighbor ratios and the `q`-neighbor adjacency,
/// then runs the sampler.
pub fn run_hidalgo(input: Input<'_>, cfg: &HidalgoConfig) -> Result<HidalgoChains> {
    cfg.validate()?;
    let ratios = compute_mus(
        input,
        &MusOptions {
            n1: 1,
            n2: 2,
            with_adjacency: true,
            q: cfg.q,
        },
    )?;
    run_hidalgo_on_ratios(&ratios, cfg)
}
