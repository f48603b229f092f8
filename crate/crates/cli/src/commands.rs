//! One function per subcommand.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use idim_core::datasets::{self, GeneratorKind};
use idim_core::io::{fmt_g, read_numeric_csv_path, read_string_column, write_matrix};
use idim_core::posterior::{cluster_frequencies, id_by_class, SUMMARY_COLUMNS};
use idim_core::twonn::{density_grid, GridSpec};
use idim_core::{
    compute_mus, nn_distance_profile, run_hidalgo, twonn, FitExtras, HidalgoChains, HidalgoConfig,
    MusOptions, PosteriorSummary, TwoNNOptions,
};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::{
    DataArgs, GenerateArgs, HidalgoArgs, MusArgs, OutputFormat, SummarizeArgs, TwonnArgs,
};
use crate::output::{write_atomic, RunManifest};
use crate::report;
use crate::UsageError;

fn matrix_csv(header: Option<&[String]>, data: &Array2<f64>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_matrix(&mut buf, header, data)?;
    Ok(buf)
}

fn names(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|j| format!("{prefix}{j}")).collect()
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Prepends a column of one-based row numbers.
fn with_index(rows: &[usize], data: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((data.nrows(), data.ncols() + 1));
    for (i, row) in data.outer_iter().enumerate() {
        out[[i, 0]] = (rows[i] + 1) as f64;
        out.row_mut(i).slice_mut(ndarray::s![1..]).assign(&row);
    }
    out
}

/// Collects output files and their manifest entries.
struct Outputs<F: Serialize> {
    manifest: RunManifest<F>,
    start: Instant,
}

impl<F: Serialize> Outputs<F> {
    fn new(subcommand: &'static str, flags: F) -> Self {
        Self {
            manifest: RunManifest::new(subcommand, flags),
            start: Instant::now(),
        }
    }

    fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_atomic(path, bytes)?;
        self.manifest.outputs.push(path.display().to_string());
        Ok(())
    }

    fn finish(mut self, path: &Path) -> Result<()> {
        self.manifest.elapsed_secs = self.start.elapsed().as_secs_f64();
        self.manifest.write(path)
    }
}

/// `<file>.manifest.json` next to a single-file output.
fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    let mut out = Outputs::new("generate", &args);
    out.manifest.seed = Some(args.seed);
    let bytes = if args.kind == GeneratorKind::Pareto {
        let d = args
            .d
            .ok_or_else(|| UsageError::new("--kind pareto needs --d"))?;
        let mus = datasets::pareto_ratios(args.n, d, args.seed)?;
        let col = Array2::from_shape_vec((mus.len(), 1), mus).expect("one column");
        matrix_csv(Some(&["mu".to_string()]), &col)?
    } else {
        let ds = match args.kind {
            GeneratorKind::Swissroll => datasets::swissroll(args.n, args.seed)?,
            GeneratorKind::HyperCube => datasets::hypercube(args.n, args.seed)?,
            GeneratorKind::GaussMix => datasets::gaussmix(args.n, args.seed)?,
            GeneratorKind::Pareto => unreachable!(),
        };
        let mut header: Vec<String> = ds.cloud.col_names().map(<[String]>::to_vec).unwrap_or_default();
        let mut text = String::new();
        if let Some(class) = &ds.class {
            header.push("class".into());
            text.push_str(&header.join(","));
            text.push('\n');
            for (row, c) in ds.cloud.data().outer_iter().zip(class) {
                let cells: Vec<String> = row.iter().map(|&v| fmt_g(v)).collect();
                text.push_str(&cells.join(","));
                text.push(',');
                text.push_str(&quote(c));
                text.push('\n');
            }
            text.into_bytes()
        } else {
            matrix_csv(Some(&header), ds.cloud.data())?
        }
    };
    out.write(&args.out, &bytes)?;
    log::info!("wrote {}", args.out.display());
    out.finish(&sidecar(&args.out))
}

pub fn mus(args: MusArgs) -> Result<()> {
    args.data.check_metric()?;
    let opts = MusOptions {
        n1: args.n1,
        n2: args.n2,
        with_adjacency: args.adjacency,
        q: args.q,
    };
    if opts.n1 == 0 || opts.n2 <= opts.n1 {
        return Err(UsageError::new("need 1 <= n1 < n2").into());
    }
    if opts.with_adjacency && opts.q == 0 {
        return Err(UsageError::new("q must be at least 1").into());
    }
    let path = args.data.require_path()?;
    let mut out = Outputs::new("mus", &args);
    out.manifest.add_input(&path)?;
    let loaded = args.data.load()?;
    let ratios = compute_mus(loaded.as_input(), &opts)?;

    let mus = Array2::from_shape_vec((ratios.n(), 1), ratios.mus.clone()).expect("one column");
    let table = with_index(&ratios.kept_rows, &mus);
    let header = ["index".to_string(), "mu".to_string()];
    out.write(&args.out_dir.join("mus.csv"), &matrix_csv(Some(&header), &table)?)?;
    if let Some(adj) = &ratios.adjacency {
        let dense = adj.to_dense().mapv(f64::from);
        out.write(&args.out_dir.join("adjacency.csv"), &matrix_csv(None, &dense)?)?;
    }
    log::info!("computed {} ratios", ratios.n());
    out.finish(&args.out_dir.join("manifest.json"))
}

pub fn twonn_cmd(args: TwonnArgs) -> Result<()> {
    let opts = TwoNNOptions {
        alpha: args.alpha,
        c_trimmed: args.c_trimmed,
        unbiased: args.unbiased,
        a_d: args.a_d,
        b_d: args.b_d,
    };
    opts.validate()?;
    if args.plot_data.is_some() && args.method == idim_core::Method::Mle {
        return Err(UsageError::new("--plot-data needs --method linfit or bayes").into());
    }
    let mut out = Outputs::new("twonn", &args);
    let mus = if let Some(path) = &args.mus {
        out.manifest.add_input(path)?;
        crate::input::read_mus(path)?
    } else {
        args.data.check_metric()?;
        let path = args
            .data
            .path()
            .map(Path::to_path_buf)
            .ok_or_else(|| UsageError::new("one of --input, --dist or --mus is required"))?;
        out.manifest.add_input(&path)?;
        let loaded = args.data.load()?;
        compute_mus(loaded.as_input(), &MusOptions::default())?.mus
    };
    let fit = twonn(&mus, args.method, &opts)?;

    let config = json!({
        "method": args.method.to_string(),
        "alpha": args.alpha,
        "c_trimmed": args.c_trimmed,
        "unbiased": args.unbiased,
        "a_d": args.a_d,
        "b_d": args.b_d,
        "metric": if args.mus.is_some() { None } else { Some(args.data.metric.to_string()) },
    });
    let rendered = match args.output {
        OutputFormat::Text => report::twonn_text(&fit),
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&report::twonn_json(&fit, config))?;
            s.push('\n');
            s
        }
        OutputFormat::Csv => report::twonn_csv(&fit),
    };
    match &args.out {
        Some(path) => {
            out.write(path, rendered.as_bytes())?;
            if args.output != OutputFormat::Text {
                print!("{}", report::twonn_text(&fit));
            } else {
                print!("{rendered}");
            }
        }
        None => print!("{rendered}"),
    }

    if let Some(path) = &args.plot_data {
        let bytes = match &fit.extras {
            FitExtras::LinFit { points, .. } => {
                let flat: Vec<f64> = points.iter().flat_map(|&(x, y)| [x, y]).collect();
                let m = Array2::from_shape_vec((points.len(), 2), flat).expect("two columns");
                matrix_csv(Some(&["x".into(), "y".into()]), &m)?
            }
            FitExtras::Bayes(post) => {
                let spec = GridSpec {
                    low: args.plot_low,
                    high: args.plot_upp,
                    by: args.plot_by,
                };
                let g = density_grid(post, &spec)?;
                let mut m = Array2::zeros((g.x.len(), 3));
                for i in 0..g.x.len() {
                    m[[i, 0]] = g.x[i];
                    m[[i, 1]] = g.prior[i];
                    m[[i, 2]] = g.posterior[i];
                }
                matrix_csv(Some(&["x".into(), "prior".into(), "posterior".into()]), &m)?
            }
            FitExtras::Mle { .. } => unreachable!("rejected above"),
        };
        out.write(path, &bytes)?;
    }

    if let Some(first) = out.manifest.outputs.first().cloned() {
        out.finish(&sidecar(Path::new(&first)))?;
    }
    Ok(())
}

/// Run metadata stored in `config.json`, enough for `summarize` to rebuild
/// the chains.
#[derive(Debug, Serialize, Deserialize)]
struct RunConfig {
    config: HidalgoConfig,
    data: DataArgs,
    n_original: usize,
    n: usize,
    draws: usize,
    /// One-based rows of the input that entered the model.
    kept_rows: Vec<usize>,
}

pub fn hidalgo(args: HidalgoArgs, quiet: bool) -> Result<()> {
    let cfg = HidalgoConfig {
        k: args.k,
        q: args.q,
        xi: args.xi,
        alpha_dirichlet: args.alpha_dirichlet,
        a0_d: args.a0_d,
        b0_d: args.b0_d,
        prior_type: args.prior,
        nominal_dim: args.nominal_dim,
        pi_mass: args.pi_mass,
        nsim: args.nsim,
        burn_in: args.burn_in,
        thinning: args.thinning,
        seed: args.seed,
        verbose: !quiet,
    };
    cfg.validate()?;
    args.data.check_metric()?;
    let path = args.data.require_path()?;
    let mut out = Outputs::new("hidalgo", &args);
    out.manifest.seed = Some(args.seed);
    out.manifest.add_input(&path)?;
    let loaded = args.data.load()?;
    let chains = run_hidalgo(loaded.as_input(), &cfg)?;

    let dir = &args.out_dir;
    let k = cfg.k;
    out.write(
        &dir.join("cluster_prob.csv"),
        &matrix_csv(Some(&names("pi", k)), &chains.cluster_prob)?,
    )?;
    let obs: Vec<String> = chains.kept_rows.iter().map(|r| format!("obs{}", r + 1)).collect();
    out.write(
        &dir.join("membership_labels.csv"),
        &matrix_csv(Some(&obs), &chains.membership_labels.mapv(f64::from))?,
    )?;
    out.write(&dir.join("id_raw.csv"), &matrix_csv(Some(&names("d", k)), &chains.id_raw)?)?;
    let run = RunConfig {
        config: cfg.clone(),
        data: args.data.clone(),
        n_original: loaded.n(),
        n: chains.n(),
        draws: chains.draws(),
        kept_rows: chains.kept_rows.iter().map(|r| r + 1).collect(),
    };
    let mut cfg_text = serde_json::to_string_pretty(&run)?;
    cfg_text.push('\n');
    out.write(&dir.join("config.json"), cfg_text.as_bytes())?;
    print!("{}", report::hidalgo_text(&cfg, chains.elapsed_secs));
    out.finish(&dir.join("manifest.json"))
}

fn read_chain(path: &Path) -> Result<Array2<f64>> {
    Ok(read_numeric_csv_path(path, true, &[])
        .with_context(|| format!("reading {}", path.display()))?
        .data)
}

fn load_chains(dir: &Path) -> Result<(HidalgoChains, RunConfig)> {
    let cfg_path = dir.join("config.json");
    let text = std::fs::read_to_string(&cfg_path)
        .with_context(|| format!("reading {}", cfg_path.display()))?;
    let run: RunConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", cfg_path.display()))?;
    let cluster_prob = read_chain(&dir.join("cluster_prob.csv"))?;
    let labels = read_chain(&dir.join("membership_labels.csv"))?;
    let id_raw = read_chain(&dir.join("id_raw.csv"))?;
    if labels.ncols() != run.n || labels.nrows() != run.draws || id_raw.nrows() != run.draws {
        anyhow::bail!("chain files in {} do not match config.json", dir.display());
    }
    if labels.iter().any(|&z| z < 1.0 || z > run.config.k as f64 || z.fract() != 0.0) {
        anyhow::bail!("membership labels must be integers in 1..={}", run.config.k);
    }
    let chains = HidalgoChains {
        cluster_prob,
        membership_labels: labels.mapv(|z| z as u32),
        id_raw,
        config: run.config.clone(),
        elapsed_secs: 0.0,
        mus: Vec::new(),
        kept_rows: run.kept_rows.iter().map(|r| r - 1).collect(),
    };
    Ok((chains, run))
}

/// Aligns class labels with the modeled rows. A file covering every input
/// row is subset to the rows that survived deduplication.
fn align_classes(labels: Vec<String>, run: &RunConfig) -> Result<Vec<String>> {
    if labels.len() == run.n {
        Ok(labels)
    } else if labels.len() == run.n_original {
        Ok(run.kept_rows.iter().map(|&r| labels[r - 1].clone()).collect())
    } else {
        Err(idim_core::Error::DimensionMismatch(format!(
            "{} class labels for {} observations",
            labels.len(),
            run.n_original
        ))
        .into())
    }
}

pub fn summarize(args: SummarizeArgs) -> Result<()> {
    if args.k_clusters == Some(0) {
        return Err(UsageError::new("--k-clusters must be at least 1").into());
    }
    let out_dir = args.out_dir.clone().unwrap_or_else(|| args.run_dir.clone());
    let mut out = Outputs::new("summarize", &args);
    for f in ["config.json", "membership_labels.csv", "id_raw.csv", "cluster_prob.csv"] {
        out.manifest.add_input(&args.run_dir.join(f))?;
    }
    let (chains, run) = load_chains(&args.run_dir)?;
    let summary = PosteriorSummary::from_chains(&chains, args.k_clusters, args.linkage)?;
    let rows = &chains.kept_rows;

    let mut header = vec!["index".to_string()];
    header.extend(SUMMARY_COLUMNS.iter().map(|s| s.to_string()));
    out.write(
        &out_dir.join("id_summary.csv"),
        &matrix_csv(Some(&header), &with_index(rows, &summary.id_summary))?,
    )?;
    out.write(&out_dir.join("psm.csv"), &matrix_csv(None, &summary.psm)?)?;

    if let (Some(k), Some(clusters)) = (summary.k_clusters, &summary.clusters) {
        let col = Array2::from_shape_fn((clusters.len(), 1), |(i, _)| clusters[i] as f64);
        out.write(
            &out_dir.join("clusters.csv"),
            &matrix_csv(Some(&["index".into(), "cluster".into()]), &with_index(rows, &col))?,
        )?;
        print!(
            "{}",
            report::clustering_text(&summary.linkage.to_string(), &cluster_frequencies(clusters, k))
        );
    }

    if let Some(spec) = &args.class {
        let (path, column) = crate::input::split_class_spec(spec);
        out.manifest.add_input(&path)?;
        let labels = read_string_column(&path, &column)
            .with_context(|| format!("reading {}", path.display()))?;
        let classes = align_classes(labels, &run)?;
        let table = id_by_class(&summary.id_postpr, &classes)?;
        let mut text = String::from("class,n,mean,median,sd\n");
        for r in &table {
            text.push_str(&format!(
                "{},{},{},{},{}\n",
                quote(&r.class),
                r.n,
                fmt_g(r.mean),
                fmt_g(r.median),
                fmt_g(r.sd)
            ));
        }
        out.write(&out_dir.join("id_by_class.csv"), text.as_bytes())?;
        if summary.clusters.is_some() {
            println!();
        }
        print!("{}", report::class_text(&table));
    }

    if !args.no_profile {
        let data = if args.input.is_some() || args.dist.is_some() {
            DataArgs {
                input: args.input.clone(),
                dist: args.dist.clone(),
                ..run.data.clone()
            }
        } else {
            run.data.clone()
        };
        match data.path() {
            Some(p) if p.exists() => {
                let loaded = data.load()?;
                let profile = nn_distance_profile(loaded.as_input())?;
                out.write(&out_dir.join("nn_profile.csv"), &matrix_csv(None, &profile)?)?;
            }
            Some(p) => log::warn!(
                "{} is not available; skipping the distance profile",
                p.display()
            ),
            None => log::warn!("no input recorded; skipping the distance profile"),
        }
    }
    out.finish(&out_dir.join("summarize.manifest.json"))
}
