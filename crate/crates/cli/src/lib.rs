//! `sgl`: batch pipeline for lag-aware causal classification of lake
//! time series. Subcommands cover dataset synthesis, raw-observation
//! preprocessing, causal discovery, model training, and the three
//! evaluation protocols.

mod config;

pub use config::{EvalSection, RunConfig};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sgl_core::causal::{discover_parents, pool_lakes, save_graph};
use sgl_core::classify::{fit_pipeline, PipelineConfig, Variant};
use sgl_core::dataset::{load_dataset, save_dataset, Format};
use sgl_core::eval::{evaluate_protocol, EvalConfig, Protocol};
use sgl_core::preprocess::{densify_dataset, read_meta_csv, read_sparse_csv};
use sgl_core::synth::generate;
use sgl_core::vars::{Region, VariableId};
use sgl_core::Dataset64;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Parser)]
#[command(
    name = "sgl",
    about = "Lag-aware causal discovery and convolutional-transform classification for lake time series",
    version
)]
struct Cli {
    /// Config file (TOML or JSON); flags override file values.
    #[arg(long, global = true, env = "SGL_CONFIG")]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true, env = "SGL_SEED")]
    seed: Option<u64>,
    /// Worker threads (0 = library default); outputs are identical for any
    /// worker count.
    #[arg(long, global = true, env = "SGL_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic dataset plus its ground-truth graph.
    Synth(SynthArgs),
    /// Densify raw sparse observations into the canonical dataset CSV.
    Preprocess(PreprocessArgs),
    /// Discover lagged causal parents and write the graph JSON.
    Discover(DiscoverArgs),
    /// Fit a pipeline variant on a full dataset and save the model artifact.
    Train(TrainArgs),
    /// Run an evaluation protocol over both variants and write the report.
    Evaluate(EvaluateArgs),
    /// Render a saved report JSON as an aligned text table.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Lakes per class per region.
    #[arg(long)]
    lakes_per_class: Option<usize>,
    /// Regions to generate (default: all six).
    #[arg(long, value_delimiter = ',')]
    regions: Option<Vec<String>>,
    /// Strength of the planted region-specific spurious coupling.
    #[arg(long)]
    spurious_strength: Option<f64>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "synth-out")]
    out: PathBuf,
    /// Dataset format: csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Raw observation CSV: lake_id,day,variable,value,zenith_deg.
    #[arg(long)]
    raw: PathBuf,
    /// Optional metadata CSV: lake_id,region,year,label,area_m2,elevation_m.
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Output dense dataset CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiscoverArgs {
    /// Input dataset (csv or json by extension).
    #[arg(long)]
    data: PathBuf,
    /// Discovery scope: `all` or `region=CW`.
    #[arg(long, default_value = "all")]
    scope: String,
    #[arg(long)]
    tau_max: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Target variables (comma separated).
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<String>>,
    /// Cap on lakes pooled per region (defaults from config).
    #[arg(long)]
    lakes_per_region: Option<usize>,
    /// Output graph JSON.
    #[arg(long, default_value = "graph.json")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Pipeline variant: causal or baseline.
    #[arg(long, default_value = "causal")]
    variant: String,
    /// Output model JSON.
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    data: PathBuf,
    /// Protocol: global, region-id, or region-ood.
    #[arg(long)]
    protocol: String,
    /// Restrict region-id to one region.
    #[arg(long)]
    region: Option<String>,
    /// Restrict region-ood to one train region.
    #[arg(long)]
    train_region: Option<String>,
    /// Number of repeated splits (mean and spread reported).
    #[arg(long)]
    repeats: Option<usize>,
    /// Output report JSON.
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Report JSON produced by `evaluate`.
    #[arg(long)]
    input: PathBuf,
    /// Optional output path for the rendered table.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes the resolved config next to a primary artifact so every run is
/// reproducible from its outputs.
fn write_config_echo(primary: &Path, cfg: &RunConfig) -> Result<()> {
    let mut name = primary.file_name().unwrap_or_default().to_os_string();
    name.push(".run.json");
    let path = primary.with_file_name(name);
    write_text(&path, &cfg.to_json())
}

fn load_run_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    let cfg = cfg.resolve()?;
    if cfg.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build_global()
            .context("initializing worker pool")?;
    }
    log::info!("resolved config: {}", cfg.to_json());
    Ok(cfg)
}

fn parse_regions(names: &[String]) -> Result<Vec<Region>> {
    names.iter().map(|n| Region::from_str(n).map_err(|e| anyhow!(e))).collect()
}

fn cmd_synth(cfg: RunConfig, args: SynthArgs) -> Result<()> {
    let mut scfg = cfg.synth.clone();
    if let Some(n) = args.lakes_per_class {
        scfg.lakes_per_class_per_region = n;
    }
    if let Some(regions) = &args.regions {
        scfg.regions = parse_regions(regions)?;
    }
    if let Some(s) = args.spurious_strength {
        scfg.spurious_strength = s;
    }
    scfg.validate().map_err(|e| anyhow!(e))?;
    let format: Format = args.format.parse().map_err(|e: sgl_core::Error| anyhow!(e))?;

    let (ds, truth) = generate(&scfg).map_err(|e| anyhow!(e))?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let data_path = args.out.join(format!("dataset.{format}"));
    save_dataset(&ds, &data_path, format).map_err(|e| anyhow!(e))?;
    let truth_path = args.out.join("truth.json");
    save_graph(&truth, &truth_path).map_err(|e| anyhow!(e))?;
    let mut echo_cfg = cfg.clone();
    echo_cfg.synth = scfg.clone();
    write_config_echo(&data_path, &echo_cfg)?;

    let per_region = 4 * scfg.lakes_per_class_per_region;
    println!(
        "wrote {} lakes ({} regions x {} per region) to {}",
        ds.len(),
        scfg.regions.len(),
        per_region,
        data_path.display()
    );
    println!("ground-truth graph: {}", truth_path.display());
    Ok(())
}

fn cmd_preprocess(cfg: RunConfig, args: PreprocessArgs) -> Result<()> {
    let raw_text = std::fs::read_to_string(&args.raw)
        .with_context(|| format!("reading {}", args.raw.display()))?;
    let obs = read_sparse_csv::<f64>(&raw_text).map_err(|e| anyhow!(e))?;
    let meta = match &args.meta {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            read_meta_csv(&text).map_err(|e| anyhow!(e))?
        }
        None => {
            log::warn!("no metadata file given; region/year/label default per lake");
            Default::default()
        }
    };
    let (ds, dropped) = densify_dataset(&obs, &meta, &cfg.preprocess).map_err(|e| anyhow!(e))?;
    for lake in &dropped {
        log::warn!("lake {lake} dropped: no observations left after filtering");
    }
    save_dataset(&ds, &args.out, Format::Csv).map_err(|e| anyhow!(e))?;
    write_config_echo(&args.out, &cfg)?;
    println!(
        "densified {} lakes ({} dropped) into {}",
        ds.len(),
        dropped.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_discover(cfg: RunConfig, args: DiscoverArgs) -> Result<()> {
    let ds: Dataset64 =
        load_dataset(&args.data, Format::from_path(&args.data)).map_err(|e| anyhow!(e))?;
    let mut dcfg = cfg.pipeline.discovery.clone();
    if let Some(tau) = args.tau_max {
        dcfg.tau_max = tau;
    }
    if let Some(alpha) = args.alpha {
        dcfg.alpha = alpha;
    }
    if let Some(targets) = &args.targets {
        dcfg.targets = targets
            .iter()
            .map(|t| VariableId::from_str(t).map_err(|e| anyhow!(e)))
            .collect::<Result<_>>()?;
    }
    dcfg.validate().map_err(|e| anyhow!(e))?;

    let scope_ds = match args.scope.as_str() {
        "all" => ds,
        other => match other.strip_prefix("region=") {
            Some(name) => {
                let region = Region::from_str(name).map_err(|e| anyhow!(e))?;
                let filtered = ds.filter_region(region);
                if filtered.is_empty() {
                    bail!("region {region} absent from dataset");
                }
                filtered
            }
            None => bail!("scope must be `all` or `region=<NAME>`"),
        },
    };
    let per_region = args.lakes_per_region.unwrap_or(match args.scope.as_str() {
        "all" => cfg.pipeline.discovery_lakes_per_region_global,
        _ => cfg.pipeline.discovery_lakes_per_region_regional,
    });
    let sample = sgl_core::classify::discovery_sample(&scope_ds, per_region, cfg.pipeline.seed);
    log::info!("pooling {} of {} lakes for discovery", sample.len(), scope_ds.len());
    let panel = pool_lakes(&sample, &dcfg).map_err(|e| anyhow!(e))?;
    let graph = discover_parents(&panel, &dcfg).map_err(|e| anyhow!(e))?;
    save_graph(&graph, &args.out).map_err(|e| anyhow!(e))?;
    write_config_echo(&args.out, &cfg)?;
    for (target, links) in &graph.targets {
        let rendered: Vec<String> =
            links.iter().map(|l| format!("{}@-{}", l.var, l.lag)).collect();
        println!("{target}: {}", rendered.join(", "));
    }
    println!("graph written to {}", args.out.display());
    Ok(())
}

fn cmd_train(cfg: RunConfig, args: TrainArgs) -> Result<()> {
    let ds: Dataset64 =
        load_dataset(&args.data, Format::from_path(&args.data)).map_err(|e| anyhow!(e))?;
    let variant = match args.variant.as_str() {
        "causal" => Variant::Causal,
        "baseline" => Variant::Baseline,
        other => bail!("unknown variant `{other}` (causal|baseline)"),
    };
    let pcfg = PipelineConfig { variant, ..cfg.pipeline.clone() };
    let fit = fit_pipeline(&ds, &pcfg).map_err(|e| anyhow!(e))?;
    write_text(&args.out, &fit.to_json())?;
    write_config_echo(&args.out, &cfg)?;
    println!(
        "trained {} variant on {} lakes; {} channels, {} features, alpha {}",
        args.variant,
        ds.len(),
        fit.channel_spec.len(),
        fit.model.weights.nrows(),
        fit.model.chosen_alpha
    );
    println!("model written to {}", args.out.display());
    Ok(())
}

fn cmd_evaluate(cfg: RunConfig, args: EvaluateArgs) -> Result<()> {
    let ds: Dataset64 =
        load_dataset(&args.data, Format::from_path(&args.data)).map_err(|e| anyhow!(e))?;
    let protocol = match args.protocol.as_str() {
        "global" => Protocol::Global,
        "region-id" => Protocol::RegionId,
        "region-ood" => Protocol::RegionOod,
        other => bail!("unknown protocol `{other}` (global|region-id|region-ood)"),
    };
    let region = match (protocol, &args.region, &args.train_region) {
        (Protocol::Global, None, None) => None,
        (Protocol::RegionId, r, None) => {
            r.as_ref().map(|n| Region::from_str(n)).transpose().map_err(|e| anyhow!(e))?
        }
        (Protocol::RegionOod, None, r) => {
            r.as_ref().map(|n| Region::from_str(n)).transpose().map_err(|e| anyhow!(e))?
        }
        _ => bail!("--region applies to region-id, --train-region to region-ood"),
    };
    let ecfg = EvalConfig {
        ratio: cfg.eval.ratio,
        repeats: args.repeats.unwrap_or(cfg.eval.repeats),
        pipeline: cfg.pipeline.clone(),
    };
    let report = evaluate_protocol(&ds, protocol, region, &ecfg).map_err(|e| anyhow!(e))?;
    write_text(&args.out, &report.to_json())?;
    write_config_echo(&args.out, &cfg)?;
    print!("{}", report.to_table());
    println!("report written to {}", args.out.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let report: sgl_core::eval::EvalReport =
        serde_json::from_str(&text).context("parsing report JSON")?;
    let table = report.to_table();
    if let Some(out) = &args.out {
        write_text(out, &table)?;
    }
    print!("{table}");
    Ok(())
}

/// CLI entry point: parses arguments, dispatches, and maps errors to a
/// nonzero exit code.
pub fn run() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = (|| -> Result<()> {
        if let Command::Report(ref args) = cli.command {
            return cmd_report(ReportArgs { input: args.input.clone(), out: args.out.clone() })
        }
        let cfg = load_run_config(&cli)?;
        match cli.command {
            Command::Synth(args) => cmd_synth(cfg, args),
            Command::Preprocess(args) => cmd_preprocess(cfg, args),
            Command::Discover(args) => cmd_discover(cfg, args),
            Command::Train(args) => cmd_train(cfg, args),
            Command::Evaluate(args) => cmd_evaluate(cfg, args),
            Command::Report(_) => unreachable!(),
        }
    })();
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
