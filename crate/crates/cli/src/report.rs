//! Console reports and machine-readable encodings of fits.

use idim_core::io::{fmt_g, round_sig};
use idim_core::posterior::ClassSummary;
use idim_core::{FitExtras, HidalgoConfig, Method, PriorType, TwoNNFit};
use serde_json::{json, Value};

use crate::output::{kable, num, percent};

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

pub fn twonn_text(fit: &TwoNNFit) -> String {
    let mut s = String::from("Model: TWO-NN\n");
    s.push_str(&format!("Method: {}\n", fit.method.label()));
    s.push_str(&format!(
        "Sample size: {}, Obs. used: {}. Trimming proportion: {}\n",
        fit.n_original,
        fit.n_used,
        percent(fit.c_trimmed)
    ));
    match &fit.extras {
        FitExtras::Bayes(post) => {
            let tail = (1.0 - fit.alpha) / 2.0;
            s.push_str(&format!("Prior d ~ Gamma({}, {})\n", num(post.a_d), num(post.b_d)));
            s.push_str(&format!(
                "Credible interval quantiles: {}, {}\n",
                percent(tail),
                percent(1.0 - tail)
            ));
            s.push_str("Posterior ID estimates:\n\n");
            s.push_str(&kable(
                &strings(&["Lower Bound", "Mean", "Median", "Mode", "Upper Bound"]),
                &[vec![
                    num(fit.lower),
                    num(post.mean),
                    num(post.median),
                    num(post.mode),
                    num(fit.upper),
                ]],
            ));
        }
        _ => {
            s.push_str(&format!("ID estimates (confidence level: {})\n\n", num(fit.alpha)));
            s.push_str(&kable(
                &strings(&["Lower Bound", "Estimate", "Upper Bound"]),
                &[vec![num(fit.lower), num(fit.estimate), num(fit.upper)]],
            ));
        }
    }
    s
}

/// A single JSON object with `estimate`, `interval` and `config` keys.
pub fn twonn_json(fit: &TwoNNFit, config: Value) -> Value {
    let mut v = json!({
        "model": "TWO-NN",
        "method": fit.method.to_string(),
        "estimate": round_sig(fit.estimate),
        "interval": {
            "lower": round_sig(fit.lower),
            "upper": round_sig(fit.upper),
            "level": fit.alpha,
        },
        "n_original": fit.n_original,
        "n_used": fit.n_used,
        "config": config,
    });
    match &fit.extras {
        FitExtras::Bayes(p) => {
            v["posterior"] = json!({
                "shape": round_sig(p.shape),
                "rate": round_sig(p.rate),
                "mean": round_sig(p.mean),
                "median": round_sig(p.median),
                "mode": round_sig(p.mode),
            });
        }
        FitExtras::LinFit { slope_se, .. } => {
            v["slope_se"] = json!(round_sig(*slope_se));
        }
        FitExtras::Mle { sum_log_mu, .. } => {
            v["sum_log_mu"] = json!(round_sig(*sum_log_mu));
        }
    }
    v
}

pub fn twonn_csv(fit: &TwoNNFit) -> String {
    let mut header = strings(&[
        "method",
        "n_original",
        "n_used",
        "c_trimmed",
        "alpha",
        "lower",
        "estimate",
        "upper",
    ]);
    let mut row = vec![
        fit.method.to_string(),
        fit.n_original.to_string(),
        fit.n_used.to_string(),
        fmt_g(fit.c_trimmed),
        fmt_g(fit.alpha),
        fmt_g(fit.lower),
        fmt_g(fit.estimate),
        fmt_g(fit.upper),
    ];
    if let FitExtras::Bayes(p) = &fit.extras {
        header.extend(strings(&["median", "mode", "shape", "rate"]));
        row.extend([p.median, p.mode, p.shape, p.rate].map(fmt_g));
    }
    format!("{}\n{}\n", header.join(","), row.join(","))
}

/// Elapsed wall time in the largest unit that keeps the value above one.
pub fn elapsed(secs: f64) -> String {
    let (v, unit) = if secs < 60.0 {
        (secs, "secs")
    } else if secs < 3600.0 {
        (secs / 60.0, "mins")
    } else {
        (secs / 3600.0, "hours")
    };
    format!("{} {}", idim_core::io::fmt_sig(v, 6), unit)
}

pub fn hidalgo_text(cfg: &HidalgoConfig, elapsed_secs: f64) -> String {
    let mut prior = format!("Prior d ~ Gamma({}, {}), type = {}", num(cfg.a0_d), num(cfg.b0_d), cfg.prior_type.label());
    if cfg.prior_type != PriorType::Conjugate {
        if let Some(d) = cfg.nominal_dim {
            prior.push_str(&format!(", D = {d}"));
        }
    }
    format!(
        "Model: Hidalgo\n\
         Method: {}\n\
         {prior}\n\
         Prior on mixture weights: Dirichlet({}) with {} mixture components\n\
         MCMC details:\n\
         Total iterations: {}, Burn in: {}, Elapsed time: {}\n",
        Method::Bayes.label(),
        num(cfg.alpha_dirichlet),
        cfg.k,
        cfg.nsim + cfg.burn_in,
        cfg.burn_in,
        elapsed(elapsed_secs)
    )
}

pub fn clustering_text(linkage: &str, freqs: &[usize]) -> String {
    let headers: Vec<String> = (1..=freqs.len()).map(|c| format!("Cluster {c}")).collect();
    let row: Vec<String> = freqs.iter().map(|f| f.to_string()).collect();
    format!(
        "Estimated clustering solution summary:\n\n\
         Method: dendrogram ({linkage} linkage).\n\
         Retrieved clusters: {}.\n\
         Clustering frequencies:\n\n{}",
        freqs.len(),
        kable(&headers, &[row])
    )
}

pub fn class_text(rows: &[ClassSummary]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.class.clone(), r.n.to_string(), num(r.mean), num(r.median), num(r.sd)])
        .collect();
    kable(&strings(&["class", "n", "mean", "median", "sd"]), &body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use idim_core::twonn::{twonn_mle, TwoNNOptions};

    #[test]
    fn mle_block_layout() {
        let mus: Vec<f64> = (1..=20).map(|i| 1.0 + i as f64 / 10.0).collect();
        let fit = twonn_mle(&mus, &TwoNNOptions::default()).unwrap();
        let text = twonn_text(&fit);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "Model: TWO-NN");
        assert_eq!(lines[1], "Method: MLE");
        assert_eq!(lines[2], "Sample size: 20, Obs. used: 20. Trimming proportion: 1%");
        assert_eq!(lines[3], "ID estimates (confidence level: 0.95)");
        assert_eq!(lines[5], "| Lower Bound| Estimate| Upper Bound|");
    }

    #[test]
    fn elapsed_units() {
        assert_eq!(elapsed(41.11144), "41.1114 secs");
        assert_eq!(elapsed(73.734), "1.2289 mins");
    }

    #[test]
    fn hidalgo_block() {
        let cfg = HidalgoConfig {
            prior_type: PriorType::TruncatedPointMass,
            nominal_dim: Some(5),
            ..HidalgoConfig::default()
        };
        let text = hidalgo_text(&cfg, 73.734);
        assert!(text.contains("type = Truncated_PointMass"));
        assert!(text.contains("Dirichlet(0.05) with 10 mixture components"));
        assert!(text.ends_with("Total iterations: 4000, Burn in: 2000, Elapsed time: 1.2289 mins\n"));
    }
}
