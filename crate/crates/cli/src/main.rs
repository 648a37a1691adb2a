//! `uvgs`: map Gaussian splat sets onto fixed-budget UV grids and measure
//! how well the budget is used.

mod manifest;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use uvgs_core::bench::{rows_to_csv, time_pipeline};
use uvgs_core::formats::{render_reports, write_heatmap, write_report, write_tensor};
use uvgs_core::packing::DEFAULT_CHANNELS;
use uvgs_core::ply::load_ply_with_stats;
use uvgs_core::synth::OpacityDistribution;
use uvgs_core::{
    compare, discretize, generate, k_sweep, map_set, pack, read_tensor, utilization, write_ply, Channel, GaussianSet,
    GridConfig, HeatmapMode, MappingConfig, OriginPolicy, ReportFormat, Strategy, SynthKind, SynthSpec, UvTensor,
};

use manifest::{
    default_manifest_path, peak_rss_kib, HeatmapOutput, InputDescriptor, Measurements, Outputs, ReportOutput,
    RunManifest,
};

#[derive(Parser)]
#[command(name = "uvgs", version, about = "Capacity-aware UV mapping of 3D Gaussian splats")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Map a set onto a UV tensor and write it with a run manifest.
    Map(MapArgs),
    /// Print the utilization report of a tensor.
    Stats {
        tensor: PathBuf,
        #[arg(long, default_value = "json", value_parser = parse_format)]
        format: ReportFormat,
    },
    /// Write a PGM occupancy heatmap of a tensor.
    Heatmap {
        tensor: PathBuf,
        #[arg(long, default_value = "raw", value_parser = parse_mode)]
        mode: HeatmapMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run all three mappings on one set under the same grid.
    Compare(CompareArgs),
    /// Generate a synthetic set and write it as PLY.
    Synth {
        #[command(flatten)]
        spec: SynthArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time mapping and packing over a list of set sizes; CSV on stdout.
    Bench(BenchArgs),
    /// Re-run a `map` manifest.
    Replay {
        manifest: PathBuf,
        /// Write outputs here instead of the recorded paths.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Input PLY file.
    #[arg(required_unless_present = "synth", conflicts_with = "synth")]
    input: Option<PathBuf>,
    /// Generate the input from a TOML synth spec instead of reading a PLY.
    #[arg(long, value_name = "SPEC.toml")]
    synth: Option<PathBuf>,
    /// Override the seed of the synth spec.
    #[arg(long, requires = "synth")]
    seed: Option<u64>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 512)]
    height: usize,
    #[arg(long, default_value_t = 512)]
    width: usize,
    /// Per-slot capacity.
    #[arg(short = 'K', long = "capacity", default_value_t = 1)]
    k: usize,
    /// Comma-separated channel groups (position, scale, rotation, opacity, dc, appearance) or `auto`.
    #[arg(long, default_value = "auto")]
    channels: String,
}

#[derive(Args)]
struct MappingArgs {
    /// Histogram bins per angle for `he`.
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u32).range(2..))]
    he_bins: u32,
    /// Direction center; defaults to the policy recorded in the input, else `centroid`.
    #[arg(long, value_parser = parse_center)]
    center: Option<OriginPolicy>,
}

#[derive(Args)]
struct MapArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "ot", value_parser = parse_strategy)]
    mapping: Strategy,
    #[command(flatten)]
    mapping_args: MappingArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Output tensor (UVGT).
    #[arg(long)]
    out: PathBuf,
    /// Manifest path; defaults to `<out>.manifest.json`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Also write a heatmap.
    #[arg(long)]
    heatmap: Option<PathBuf>,
    #[arg(long, default_value = "raw", value_parser = parse_mode)]
    heatmap_mode: HeatmapMode,
    /// Also write the utilization report.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value = "json", value_parser = parse_format)]
    report_format: ReportFormat,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    mapping_args: MappingArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Report these capacities instead of `-K`, one row per mapping and K.
    #[arg(long, value_delimiter = ',')]
    k_sweep: Vec<usize>,
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: ReportFormat,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Read the spec from a TOML file; the other spec flags are then ignored.
    #[arg(long, value_name = "SPEC.toml")]
    spec: Option<PathBuf>,
    /// `uniform`, `vmf` or `shell`.
    #[arg(long, default_value = "vmf")]
    kind: String,
    #[arg(long, default_value_t = 50_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    clusters: usize,
    #[arg(long, default_value_t = 50.0)]
    kappa: f64,
    /// Shell axis scales, `a,b,c`.
    #[arg(long, value_delimiter = ',', default_value = "1,1,1")]
    axes: Vec<f64>,
    /// `const:<c>` or `uniform:<lo>:<hi>`.
    #[arg(long, default_value = "uniform:-4:4", value_parser = parse_opacity)]
    opacity: OpacityDistribution,
    #[arg(long, default_value_t = 3)]
    appearance_width: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated set sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, default_value = "ot", value_parser = parse_strategy)]
    mapping: Strategy,
    #[command(flatten)]
    mapping_args: MappingArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    clusters: usize,
    #[arg(long, default_value_t = 50.0)]
    kappa: f64,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    Strategy::parse(s).ok_or_else(|| format!("unknown mapping '{s}' (expected spherical, he or ot)"))
}

fn parse_center(s: &str) -> Result<OriginPolicy, String> {
    OriginPolicy::parse(s).ok_or_else(|| format!("unknown center '{s}' (expected origin or centroid)"))
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    ReportFormat::parse(s).ok_or_else(|| format!("unknown format '{s}' (expected json or csv)"))
}

fn parse_mode(s: &str) -> Result<HeatmapMode, String> {
    HeatmapMode::parse(s).ok_or_else(|| format!("unknown mode '{s}' (expected raw or retained)"))
}

fn parse_opacity(s: &str) -> Result<OpacityDistribution, String> {
    OpacityDistribution::parse(s).ok_or_else(|| format!("bad opacity '{s}' (expected const:<c> or uniform:<lo>:<hi>)"))
}

/// A failed run: usage errors exit with 2, everything else with 1.
enum Failure {
    Usage(String),
    Stage { stage: &'static str, error: anyhow::Error },
}

type Outcome<T = ()> = Result<T, Failure>;

trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> StageExt<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Outcome<T> {
        self.map_err(|e| Failure::Stage { stage, error: e.into() })
    }
}

fn channel_layout(spec: &str, appearance_width: usize) -> Outcome<Vec<Channel>> {
    if spec == "auto" {
        let mut layout = DEFAULT_CHANNELS.to_vec();
        if appearance_width < 3 {
            layout.retain(|c| *c != Channel::AppearanceDc);
        }
        return Ok(layout);
    }
    spec.split(',')
        .map(|name| Channel::parse(name.trim()).ok_or_else(|| Failure::Usage(format!("unknown channel '{name}'"))))
        .collect()
}

fn grid_config(args: &GridArgs, k: usize, appearance_width: usize) -> Outcome<GridConfig> {
    let grid =
        GridConfig::new(args.height, args.width, k).with_channels(channel_layout(&args.channels, appearance_width)?);
    grid.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(grid)
}

fn mapping_config(args: &MappingArgs, strategy: Strategy, set: &GaussianSet) -> MappingConfig {
    MappingConfig::new(strategy)
        .with_he_bins(args.he_bins as usize)
        .with_origin_policy(args.center.unwrap_or(set.origin_policy))
}

fn describe_input(args: &InputArgs) -> Outcome<InputDescriptor> {
    match (&args.input, &args.synth) {
        (Some(path), _) => {
            let path = std::fs::canonicalize(path).unwrap_or_else(|_| path.clone());
            Ok(InputDescriptor::Ply { path })
        }
        (None, Some(spec_path)) => {
            let mut spec = SynthSpec::from_file(spec_path).stage("parse")?;
            if let Some(seed) = args.seed {
                spec.seed = seed;
            }
            Ok(InputDescriptor::Synth { spec })
        }
        (None, None) => Err(Failure::Usage("an input PLY or --synth spec is required".into())),
    }
}

fn load_input(input: &InputDescriptor) -> Outcome<GaussianSet> {
    match input {
        InputDescriptor::Ply { path } => {
            let (set, stats) =
                load_ply_with_stats(path).with_context(|| format!("reading {}", path.display())).stage("parse")?;
            log::info!(
                "read {} gaussians from {} ({} values repaired)",
                set.len(),
                path.display(),
                stats.repaired_values
            );
            Ok(set)
        }
        InputDescriptor::Synth { spec } => generate(spec).stage("parse"),
    }
}

fn run_pipeline(set: &GaussianSet, mapping: &MappingConfig, grid: &GridConfig) -> Outcome<UvTensor> {
    let uv = map_set(set, mapping).stage("map")?;
    pack(set, &discretize(&uv, grid), grid, mapping.strategy).stage("pack")
}

fn write_outputs(tensor: &UvTensor, outputs: &Outputs) -> Outcome {
    let with_path = |p: &Path| format!("writing {}", p.display());
    write_tensor(tensor, &outputs.tensor).with_context(|| with_path(&outputs.tensor)).stage("write")?;
    if let Some(h) = &outputs.heatmap {
        write_heatmap(tensor, &h.path, h.mode).with_context(|| with_path(&h.path)).stage("write")?;
    }
    if let Some(r) = &outputs.report {
        write_report(&[utilization(tensor)], &r.path, r.format).with_context(|| with_path(&r.path)).stage("write")?;
    }
    Ok(())
}

fn cmd_map(args: MapArgs) -> Outcome {
    let start = Instant::now();
    let input = describe_input(&args.input)?;
    let set = load_input(&input)?;
    let mapping = mapping_config(&args.mapping_args, args.mapping, &set);
    let grid = grid_config(&args.grid, args.grid.k, set.appearance_width())?;
    let tensor = run_pipeline(&set, &mapping, &grid)?;
    let outputs = Outputs {
        tensor: args.out.clone(),
        heatmap: args.heatmap.map(|path| HeatmapOutput { path, mode: args.heatmap_mode }),
        report: args.report.map(|path| ReportOutput { path, format: args.report_format }),
    };
    write_outputs(&tensor, &outputs)?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        input,
        mapping,
        grid,
        outputs,
        measurements: Measurements { wall_seconds: start.elapsed().as_secs_f64(), peak_rss_kib: peak_rss_kib() },
    };
    let path = args.manifest.unwrap_or_else(|| default_manifest_path(&args.out));
    manifest.save(&path).stage("write")?;
    log::info!("wrote {} and {}", args.out.display(), path.display());
    Ok(())
}

fn cmd_replay(manifest: &Path, out_dir: Option<&Path>) -> Outcome {
    let mut m = RunManifest::load(manifest).stage("parse")?;
    if let Some(dir) = out_dir {
        m = m.relocated(dir);
    }
    if m.tool_version != env!("CARGO_PKG_VERSION") {
        log::warn!("manifest written by version {}, replaying with {}", m.tool_version, env!("CARGO_PKG_VERSION"));
    }
    let set = load_input(&m.input)?;
    m.grid.validate().stage("pack")?;
    let tensor = run_pipeline(&set, &m.mapping, &m.grid)?;
    write_outputs(&tensor, &m.outputs)
}

fn print(text: &str) -> Outcome {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes()).and_then(|_| out.flush()).context("writing to stdout").stage("write")
}

fn cmd_stats(tensor: &Path, format: ReportFormat) -> Outcome {
    let t = read_tensor(tensor).with_context(|| format!("reading {}", tensor.display())).stage("parse")?;
    print(&render_reports(&[utilization(&t)], format))
}

fn cmd_heatmap(tensor: &Path, mode: HeatmapMode, out: &Path) -> Outcome {
    let t = read_tensor(tensor).with_context(|| format!("reading {}", tensor.display())).stage("parse")?;
    write_heatmap(&t, out, mode).with_context(|| format!("writing {}", out.display())).stage("write")
}

fn cmd_compare(args: CompareArgs) -> Outcome {
    if args.k_sweep.contains(&0) {
        return Err(Failure::Usage("--k-sweep values must be >= 1".into()));
    }
    let set = load_input(&describe_input(&args.input)?)?;
    let mapping = mapping_config(&args.mapping_args, Strategy::RankOt, &set);
    let grid = grid_config(&args.grid, args.grid.k, set.appearance_width())?;
    let reports = if args.k_sweep.is_empty() {
        compare(&set, &mapping, &grid, &Strategy::ALL).stage("map")?
    } else {
        let mut rows = Vec::new();
        for s in Strategy::ALL {
            let uv = map_set(&set, &mapping.with_strategy(s)).stage("map")?;
            rows.extend(k_sweep(&set, &uv, &grid, &args.k_sweep));
        }
        rows
    };
    match &args.out {
        Some(path) => write_report(&reports, path, args.format)
            .with_context(|| format!("writing {}", path.display()))
            .stage("write"),
        None => print(&render_reports(&reports, args.format)),
    }
}

fn synth_spec(args: &SynthArgs) -> Outcome<SynthSpec> {
    if let Some(path) = &args.spec {
        return SynthSpec::from_file(path).stage("parse");
    }
    let kind = match args.kind.as_str() {
        "uniform" => SynthKind::UniformSphere,
        "vmf" => SynthKind::VmfClusters { clusters: args.clusters, kappa: args.kappa, means: Vec::new() },
        "shell" => {
            let axes: [f64; 3] = args
                .axes
                .as_slice()
                .try_into()
                .map_err(|_| Failure::Usage("--axes takes exactly three values".into()))?;
            SynthKind::AnisotropicShell { axes }
        }
        other => return Err(Failure::Usage(format!("unknown synth kind '{other}' (expected uniform, vmf or shell)"))),
    };
    let spec = SynthSpec {
        opacity: args.opacity,
        appearance_width: args.appearance_width,
        ..SynthSpec::new(kind, args.n, args.seed)
    };
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(spec)
}

fn cmd_synth(args: &SynthArgs, out: &Path) -> Outcome {
    let spec = synth_spec(args)?;
    let set = generate(&spec).stage("synth")?;
    write_ply(&set, out).with_context(|| format!("writing {}", out.display())).stage("write")
}

fn cmd_bench(args: BenchArgs) -> Outcome {
    let template = SynthSpec::vmf(args.clusters, args.kappa, 1, args.seed);
    let mapping = MappingConfig::new(args.mapping)
        .with_he_bins(args.mapping_args.he_bins as usize)
        .with_origin_policy(args.mapping_args.center.unwrap_or_default());
    let grid = grid_config(&args.grid, args.grid.k, template.appearance_width)?;
    let rows = time_pipeline(&args.n, &template, &mapping, &grid, args.repeats).stage("bench")?;
    print(&rows_to_csv(&rows))
}

fn configure_threads() -> Outcome {
    let Ok(value) = std::env::var("UVGS_THREADS") else { return Ok(()) };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Failure::Usage(format!("UVGS_THREADS must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| anyhow!(e)).stage("setup")
}

fn run(cli: Cli) -> Outcome {
    configure_threads()?;
    match cli.command {
        Command::Map(args) => cmd_map(args),
        Command::Stats { tensor, format } => cmd_stats(&tensor, format),
        Command::Heatmap { tensor, mode, out } => cmd_heatmap(&tensor, mode, &out),
        Command::Compare(args) => cmd_compare(args),
        Command::Synth { spec, out } => cmd_synth(&spec, &out),
        Command::Bench(args) => cmd_bench(args),
        Command::Replay { manifest, out_dir } => cmd_replay(&manifest, out_dir.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("uvgs: usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Stage { stage, error }) => {
            eprintln!("uvgs: {stage} failed: {error:#}");
            ExitCode::from(1)
        }
    }
}
