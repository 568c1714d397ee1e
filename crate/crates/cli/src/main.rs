use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use palace_cli::config::{ExperimentConfig, KernelSpec, SigmaSpec};
use palace_cli::experiment::{
    self, diagrams_from_clouds, labels_of, run_audit_bound, run_audit_ni, run_certify_report,
    run_domain_inflation, run_selector_sweep, BoundAuditArgs, CertifyArgs, InflationConfig,
    SweepConfig,
};
use palace_cli::report::{fmt_f64, fmt_pct, write_csv, write_manifest};
use palace_cli::synth::gen_annulus_dataset;

use palace_core::cover::TauStrategy;
use palace_core::diagram::{read_diagrams, write_diagrams, PersistenceDiagram};
use palace_core::embed::{embed_batch, write_matrix_csv};
use palace_core::kernel::{bandwidth_quantile, gram};
use palace_core::rips::{read_clouds, write_clouds};
use palace_core::svm::cv::{
    place_on_training, CvConfig, PlacementScheme, PlacementSpec, SigmaSelect, TauSource,
};

#[derive(Parser)]
#[command(name = "palace", version, about = "Adaptive landmark embeddings of persistence diagrams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    ClassAwareFps,
    GlobalFps,
    OffsetGrid,
    UniformGrid,
}

impl SchemeArg {
    fn to_scheme(self) -> PlacementScheme {
        match self {
            SchemeArg::ClassAwareFps => PlacementScheme::ClassAwareFps,
            SchemeArg::GlobalFps => PlacementScheme::GlobalFps,
            SchemeArg::OffsetGrid => PlacementScheme::OffsetGrid,
            SchemeArg::UniformGrid => PlacementScheme::UniformGrid,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TauArg {
    MedianHalfPersistence,
    CrossClassQuantile,
    MeanStrongestFeature,
    Fixed,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DimsArg {
    Combined,
    H0,
    H1,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic 4-class annulus point clouds.
    Gen {
        #[arg(long, default_value = "clouds.jsonl")]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        per_class: usize,
        #[arg(long, default_value_t = 60)]
        n_points: usize,
        #[arg(long, default_value_t = 0.08)]
        noise: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Vietoris-Rips persistence of point clouds into a diagram file.
    Persist {
        #[arg(long)]
        clouds: PathBuf,
        #[arg(long, default_value = "diagrams.jsonl")]
        out: PathBuf,
        #[arg(long, default_value_t = 30)]
        n_max: usize,
        /// Map values onto the alpha-complex scale (squared half-distance).
        #[arg(long, default_value_t = false)]
        alpha_scale: bool,
        #[arg(long, value_enum, default_value_t = DimsArg::Combined)]
        dims: DimsArg,
    },
    /// Place landmarks on a diagram file and write the configuration.
    Place {
        #[arg(long)]
        diagrams: PathBuf,
        #[arg(long, default_value = "config.json")]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        k: usize,
        #[arg(long, default_value_t = 0.75)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = SchemeArg::ClassAwareFps)]
        scheme: SchemeArg,
        #[arg(long, value_enum, default_value_t = TauArg::MedianHalfPersistence)]
        tau_strategy: TauArg,
        /// Tau value for --tau-strategy fixed.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Embed diagrams through a configuration into a CSV matrix.
    Embed {
        #[arg(long)]
        diagrams: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "embedding.csv")]
        out: PathBuf,
    },
    /// Landmark-kernel gram matrix of embedded diagrams.
    Gram {
        #[arg(long)]
        diagrams: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "gram.csv")]
        out: PathBuf,
        #[arg(long)]
        sigma: Option<f64>,
        /// Bandwidth as this quantile of pairwise embedding distances.
        #[arg(long, default_value_t = 0.25)]
        quantile: f64,
    },
    /// Nested cross-validation with per-fold landmark re-placement.
    Train {
        #[arg(long)]
        diagrams: PathBuf,
        #[arg(long, default_value = "cv.csv")]
        out: PathBuf,
        /// JSON experiment config; flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long, value_delimiter = ',')]
        c_grid: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        sigma_grid: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        q_grid: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value_t = SchemeArg::ClassAwareFps)]
        scheme: SchemeArg,
        #[arg(long, value_enum, default_value_t = KernelSpec::Lk)]
        kernel: KernelSpec,
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Closed-form selector sweep over (K, alpha) candidates.
    Select {
        #[arg(long)]
        diagrams: PathBuf,
        #[arg(long, default_value = "selectors.csv")]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "50,100,200")]
        k_grid: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.75,1.0,1.5")]
        alpha_grid: Vec<f64>,
        #[arg(long, default_value_t = 0.25)]
        sigma_quantile: f64,
        #[arg(long, default_value_t = 50)]
        tau_pairs: usize,
        #[arg(long, default_value_t = 0.1)]
        tau_quantile: f64,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Certificate-firing report for the nearest-centroid classifier.
    Certify {
        #[arg(long)]
        diagrams: PathBuf,
        #[arg(long, default_value = "certificates.csv")]
        out: PathBuf,
        #[arg(long, default_value = "synthetic")]
        dataset_name: String,
        #[arg(long, default_value_t = 50)]
        k: usize,
        #[arg(long, default_value_t = 0.75)]
        alpha: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Non-interference audit over sampled cross-class pairs.
    AuditNi {
        #[arg(long)]
        diagrams: PathBuf,
        #[arg(long, default_value = "audit_ni.csv")]
        out: PathBuf,
        #[arg(long, default_value_t = 2000)]
        pairs: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Certificate-bound audit: embedded distance against rho_nu.
    AuditBound {
        #[arg(long)]
        diagrams: PathBuf,
        #[arg(long, default_value = "audit_bound.csv")]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        k: usize,
        #[arg(long, default_value_t = 0.75)]
        alpha: f64,
        #[arg(long, default_value_t = 0.25)]
        tau_quantile: f64,
        #[arg(long, default_value_t = 2000)]
        pairs: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// The domain-inflation experiment: uniform grid vs FPS placement.
    BenchInflate {
        #[arg(long, default_value = "inflation.csv")]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        per_class: usize,
        #[arg(long, default_value_t = 60)]
        n_points: usize,
        #[arg(long, default_value_t = 0.08)]
        noise: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 11)]
        k: usize,
        #[arg(long, default_value_t = 0.75)]
        alpha: f64,
        #[arg(long, default_value_t = 30)]
        n_max: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,8")]
        ells: Vec<f64>,
    },
}

fn load_labeled(path: &PathBuf) -> Result<(Vec<PersistenceDiagram>, Vec<usize>)> {
    let read = read_diagrams(path).with_context(|| format!("reading {}", path.display()))?;
    if read.dropped_infinite > 0 {
        eprintln!(
            "warning: dropped {} infinite-death points at ingestion",
            read.dropped_infinite
        );
    }
    let labels = labels_of(&read.diagrams)?;
    Ok((read.diagrams, labels))
}

fn tau_source(arg: TauArg, fixed: Option<f64>, seed: u64) -> Result<TauSource> {
    Ok(match arg {
        TauArg::MedianHalfPersistence => {
            TauSource::Strategy(TauStrategy::MedianHalfPersistence)
        }
        TauArg::CrossClassQuantile => TauSource::Strategy(TauStrategy::CrossClassQuantile {
            q: 0.25,
            n_pairs: 2000,
            seed,
        }),
        TauArg::MeanStrongestFeature => {
            TauSource::Strategy(TauStrategy::MeanStrongestFeature)
        }
        TauArg::Fixed => TauSource::Fixed(
            fixed.context("--tau is required with --tau-strategy fixed")?,
        ),
    })
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen { out, per_class, n_points, noise, seed } => {
            let clouds = gen_annulus_dataset(per_class, n_points, noise, seed);
            write_clouds(&clouds, &out)?;
            write_manifest(
                &out,
                "gen",
                serde_json::json!({
                    "per_class": per_class, "n_points": n_points,
                    "noise": noise, "seed": seed,
                }),
            )?;
            println!("wrote {} clouds to {}", clouds.len(), out.display());
        }
        Command::Persist { clouds, out, n_max, alpha_scale, dims } => {
            let cs = read_clouds(&clouds)?;
            let per_cloud = diagrams_from_clouds(&cs, n_max, alpha_scale)?;
            let diagrams: Vec<PersistenceDiagram> = match dims {
                DimsArg::Combined => per_cloud.into_iter().map(|c| c.combined).collect(),
                DimsArg::H1 => per_cloud.into_iter().map(|c| c.h1).collect(),
                DimsArg::H0 => {
                    // recompute without the merge to hand back H0 alone
                    let redo = diagrams_from_clouds(&cs, usize::MAX, alpha_scale)?;
                    redo.into_iter()
                        .map(|c| {
                            let mut h0 = c.combined;
                            h0.points.retain(|p| p.birth == 0.0);
                            h0.tag = "rips-h0".into();
                            h0
                        })
                        .collect()
                }
            };
            write_diagrams(&diagrams, &out)?;
            write_manifest(
                &out,
                "persist",
                serde_json::json!({
                    "clouds": clouds.display().to_string(), "n_max": n_max,
                    "alpha_scale": alpha_scale,
                }),
            )?;
            println!("wrote {} diagrams to {}", diagrams.len(), out.display());
        }
        Command::Place { diagrams, out, k, alpha, scheme, tau_strategy, tau } => {
            let (ds, labels) = load_labeled(&diagrams)?;
            let spec = PlacementSpec {
                scheme: scheme.to_scheme(),
                k,
                alpha,
                tau: tau_source(tau_strategy, tau, 42)?,
                pad: 1.05,
            };
            let config = place_on_training(&ds, &labels, &spec)?;
            config.write_file(&out)?;
            write_manifest(
                &out,
                "place",
                serde_json::json!({ "k": k, "alpha": alpha, "realized_k": config.len() }),
            )?;
            println!(
                "placed {} landmarks (tau = {:.6}) into {}",
                config.len(),
                config.tau,
                out.display()
            );
        }
        Command::Embed { diagrams, config, out } => {
            let read = read_diagrams(&diagrams)?;
            let cfg = palace_core::cover::LandmarkConfiguration::read_file(&config)?;
            let embeds = embed_batch(&read.diagrams, &cfg);
            write_matrix_csv(&embeds, &out)?;
            write_manifest(&out, "embed", serde_json::json!({ "k": cfg.len() }))?;
            println!("wrote {} x {} embedding matrix to {}", embeds.len(), cfg.len(), out.display());
        }
        Command::Gram { diagrams, config, out, sigma, quantile } => {
            let read = read_diagrams(&diagrams)?;
            let cfg = palace_core::cover::LandmarkConfiguration::read_file(&config)?;
            let embeds = embed_batch(&read.diagrams, &cfg);
            let sigma = match sigma {
                Some(s) => s,
                None => bandwidth_quantile(&embeds, quantile)?,
            };
            let g = gram(&embeds, sigma)?;
            g.write_csv_with_sidecar(&out)?;
            write_manifest(&out, "gram", serde_json::json!({ "sigma": sigma }))?;
            println!("wrote {}x{} gram (sigma = {sigma:.6}) to {}", g.m, g.m, out.display());
        }
        Command::Train {
            diagrams,
            out,
            config,
            k,
            alpha,
            folds,
            seeds,
            c_grid,
            sigma_grid,
            q_grid,
            scheme,
            kernel,
            n_max,
        } => {
            let (mut ds, labels) = load_labeled(&diagrams)?;
            let mut exp = match config {
                Some(p) => ExperimentConfig::from_file(&p)?,
                None => ExperimentConfig::default(),
            };
            if let Some(k) = k {
                exp.k = k;
            }
            if let Some(a) = alpha {
                exp.alpha = a;
            }
            if let Some(f) = folds {
                exp.outer_folds = f;
            }
            if let Some(s) = seeds {
                exp.seeds = s;
            }
            if let Some(c) = c_grid {
                exp.c_grid = c;
            }
            if let Some(sg) = sigma_grid {
                exp.sigma = SigmaSpec::Grid { values: sg };
            }
            if let Some(qg) = q_grid {
                exp.sigma = SigmaSpec::Quantiles { values: qg };
            }
            if let Some(n) = n_max {
                exp.n_max = n;
            }
            exp.validate()?;
            for d in &mut ds {
                *d = palace_core::diagram::top_persistence_filter(d, exp.n_max);
            }
            let spec = PlacementSpec {
                scheme: scheme.to_scheme(),
                k: exp.k,
                alpha: exp.alpha,
                tau: exp.tau.to_source(),
                pad: 1.05,
            };
            let cv = CvConfig {
                outer_folds: exp.outer_folds,
                seeds: exp.seeds.clone(),
                sigma: exp.sigma.to_select(),
                c_grid: exp.c_grid.clone(),
                inner_folds: 3,
                tol: 1e-4,
                kernel: kernel.to_choice(),
            };
            let outcome = experiment::run_cv(&ds, &labels, &experiment::CvRunArgs {
                placement: spec,
                cv,
            })?;
            let rows: Vec<Vec<String>> = outcome
                .records
                .iter()
                .map(|r| {
                    vec![
                        r.seed.to_string(),
                        r.fold.to_string(),
                        fmt_f64(r.sigma_or_q),
                        fmt_f64(r.c),
                        fmt_pct(100.0 * r.train_acc),
                        fmt_pct(100.0 * r.test_acc),
                    ]
                })
                .collect();
            write_csv(&out, &["seed", "fold", "sigma_or_q", "C", "train_acc", "test_acc"], &rows)?;
            write_manifest(&out, "train", serde_json::to_value(&exp)?)?;
            println!(
                "cv accuracy {:.2} +/- {:.2} %, records in {}",
                100.0 * outcome.mean,
                100.0 * outcome.std,
                out.display()
            );
        }
        Command::Select {
            diagrams,
            out,
            k_grid,
            alpha_grid,
            sigma_quantile,
            tau_pairs,
            tau_quantile,
            folds,
            seed,
        } => {
            let (ds, labels) = load_labeled(&diagrams)?;
            let cfg = SweepConfig {
                k_grid: k_grid.clone(),
                alpha_grid: alpha_grid.clone(),
                sigma_quantile,
                tau_pairs,
                tau_quantile,
                seed,
                cv: CvConfig {
                    outer_folds: folds,
                    seeds: vec![seed],
                    sigma: SigmaSelect::Quantiles(vec![sigma_quantile]),
                    c_grid: vec![1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0],
                    inner_folds: 3,
                    tol: 1e-4,
                    kernel: palace_core::svm::cv::KernelChoice::Landmark,
                },
            };
            let outcome = run_selector_sweep(&ds, &labels, &cfg)?;
            let rows: Vec<Vec<String>> = outcome
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.candidate_id.clone(),
                        fmt_f64(r.report.gamma_hat),
                        fmt_f64(r.report.score),
                        fmt_f64(r.report.fisher_ker),
                        fmt_f64(r.report.rho_mah),
                        fmt_f64(r.report.tau_hat),
                        fmt_f64(r.report.rho_nu_hat),
                        fmt_pct(100.0 * r.cv_accuracy),
                    ]
                })
                .collect();
            write_csv(
                &out,
                &[
                    "candidate_id",
                    "gamma_hat",
                    "score",
                    "fisher_ker",
                    "rho_mah",
                    "tau_hat",
                    "rho_nu_hat",
                    "cv_accuracy",
                ],
                &rows,
            )?;
            let sp_path = out.with_extension("spearman.csv");
            let sp_rows: Vec<Vec<String>> = outcome
                .spearman
                .iter()
                .map(|(name, rho)| vec![name.to_string(), fmt_f64(*rho)])
                .collect();
            write_csv(&sp_path, &["selector", "spearman_vs_cv_accuracy"], &sp_rows)?;
            write_manifest(
                &out,
                "select",
                serde_json::json!({
                    "k_grid": k_grid, "alpha_grid": alpha_grid, "seed": seed,
                    "sigma_quantile": sigma_quantile,
                    "tau_pairs": tau_pairs, "tau_quantile": tau_quantile,
                }),
            )?;
            for (name, rho) in &outcome.spearman {
                println!("spearman[{name}] = {rho:+.3}");
            }
            println!("sweep rows in {}", out.display());
        }
        Command::Certify { diagrams, out, dataset_name, k, alpha, delta, folds, seed } => {
            let (ds, labels) = load_labeled(&diagrams)?;
            let args = CertifyArgs {
                dataset_name,
                k,
                alpha,
                delta,
                folds,
                seed,
                tau: TauSource::Strategy(TauStrategy::MedianHalfPersistence),
            };
            let rows = run_certify_report(&ds, &labels, &args)?;
            let csv_rows: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.dataset.clone(),
                        r.mode.clone(),
                        fmt_pct(r.fired_pct),
                        fmt_pct(r.nc_accuracy_on_fired),
                        fmt_f64(r.r_m),
                        fmt_f64(r.half_delta),
                    ]
                })
                .collect();
            write_csv(
                &out,
                &["dataset", "mode", "fired_pct", "nc_accuracy_on_fired", "r_m", "half_delta"],
                &csv_rows,
            )?;
            write_manifest(
                &out,
                "certify",
                serde_json::json!({ "k": k, "alpha": alpha, "delta": delta, "seed": seed }),
            )?;
            for r in &rows {
                println!(
                    "{} {}: fired {:.1}% (r_m {:.4} vs half-gap {:.4})",
                    r.dataset, r.mode, r.fired_pct, r.r_m, r.half_delta
                );
            }
        }
        Command::AuditNi { diagrams, out, pairs, seed } => {
            let (ds, labels) = load_labeled(&diagrams)?;
            let (rows, summary) = run_audit_ni(&ds, &labels, pairs, seed);
            let csv_rows: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.i.to_string(),
                        r.j.to_string(),
                        r.status.clone(),
                        fmt_f64(r.d),
                        fmt_f64(r.min_cross_ratio),
                        r.passes.to_string(),
                        r.within_scale_ok.to_string(),
                    ]
                })
                .collect();
            write_csv(
                &out,
                &["i", "j", "status", "d", "min_cross_ratio", "passes", "within_scale_ok"],
                &csv_rows,
            )?;
            write_manifest(&out, "audit-ni", serde_json::json!({ "pairs": pairs, "seed": seed }))?;
            println!(
                "audited {}/{} pairs: pass {:.2}%, median cross ratio {:.3}",
                summary.auditable, summary.sampled, summary.pass_pct, summary.median_ratio
            );
        }
        Command::AuditBound { diagrams, out, k, alpha, tau_quantile, pairs, seed } => {
            let (ds, labels) = load_labeled(&diagrams)?;
            let args = BoundAuditArgs {
                k,
                alpha,
                tau_quantile,
                tau_pairs: pairs,
                n_pairs: pairs,
                seed,
            };
            let outcome = run_audit_bound(&ds, &labels, &args)?;
            let s = outcome.summary;
            write_csv(
                &out,
                &["n_tau", "bound_pct", "p25", "p50", "p75", "min", "tau"],
                &[vec![
                    s.n_tau.to_string(),
                    fmt_pct(s.bound_pct),
                    fmt_f64(s.p25),
                    fmt_f64(s.p50),
                    fmt_f64(s.p75),
                    fmt_f64(s.min),
                    fmt_f64(outcome.tau),
                ]],
            )?;
            write_manifest(
                &out,
                "audit-bound",
                serde_json::json!({ "k": k, "alpha": alpha, "tau_quantile": tau_quantile, "seed": seed }),
            )?;
            println!(
                "bound holds on {:.2}% of {} tau-separated pairs (median ratio {:.2})",
                s.bound_pct, s.n_tau, s.p50
            );
        }
        Command::BenchInflate { out, per_class, n_points, noise, seed, k, alpha, n_max, ells } => {
            let cfg = InflationConfig {
                per_class,
                n_points,
                noise_sd: noise,
                seed,
                target_budget: k,
                alpha,
                n_max,
                ells: ells.clone(),
                ..InflationConfig::default()
            };
            let rows = run_domain_inflation(&cfg)?;
            let csv_rows: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        fmt_f64(r.ell),
                        fmt_pct(r.l_domain),
                        fmt_pct(r.uniform_mean),
                        fmt_pct(r.uniform_std),
                        fmt_pct(r.fps_mean),
                        fmt_pct(r.fps_std),
                        fmt_pct(r.delta),
                    ]
                })
                .collect();
            write_csv(
                &out,
                &["ell", "L", "uniform_acc", "uniform_std", "fps_acc", "fps_std", "delta"],
                &csv_rows,
            )?;
            write_manifest(&out, "bench-inflate", serde_json::to_value(&cfg)?)?;
            println!("ell    L      uniform          non-uniform");
            for r in &rows {
                println!(
                    "{:<5} {:<6.2} {:>5.1} +/- {:<5.1} {:>5.1} +/- {:<5.1}  (delta {:+.1})",
                    r.ell, r.l_domain, r.uniform_mean, r.uniform_std, r.fps_mean, r.fps_std, r.delta
                );
            }
        }
    }
    Ok(())
}
