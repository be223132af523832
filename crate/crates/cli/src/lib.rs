//! Command-line front end: sweeps, figure presets, Monte-Carlo stacks,
//! reconstruction and validation.

pub mod config;
pub mod output;
pub mod presets;
pub mod sweep;
pub mod validate;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use config::FileConfig;
use ghostsnr::protocols::ProtocolKind;
use ghostsnr::simulator::{
    empirical_snr, normalize_frames, read_stack, reconstruct, sample_stack, write_stack, write_stack_csv,
    NormalizationRegion,
};
use ghostsnr::SourceKind;
use presets::Figure;
use sweep::{run_sweep, Axis, RunMode};
use validate::Suite;

#[derive(Debug, Parser)]
#[command(
    name = "ghostsnr",
    version,
    about = "Signal-to-noise analysis of ghost-imaging protocols"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML configuration file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Frames per experiment.
    #[arg(long, global = true)]
    pub frames: Option<u64>,
    /// Output file (standard output when omitted).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for the simulator. Results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<RunMode>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep one parameter and tabulate SNR per protocol and source.
    Sweep(SweepArgs),
    /// Regenerate the data of one published SNR figure.
    Figure {
        #[arg(value_enum)]
        figure: Figure,
        /// Monte-Carlo replicas per point.
        #[arg(long)]
        replicas: Option<u32>,
    },
    /// Sample a frame stack and write it in the binary container format.
    Simulate {
        /// Also write the stack as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Reconstruct ghost images from a stack and report their SNR.
    Reconstruct(ReconstructArgs),
    /// Run validation suites and print a JSON report.
    Validate {
        /// Suites to run (all when omitted).
        #[arg(long = "suite", value_enum)]
        suites: Vec<Suite>,
        /// Illumination window of the asymptotic slope fit, as `LOW,HIGH`.
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
    },
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: Option<Axis>,
    /// Comma-separated, strictly increasing values.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub protocols: Option<Vec<ProtocolKind>>,
    #[arg(long, value_delimiter = ',')]
    pub sources: Option<Vec<SourceKind>>,
    #[arg(long)]
    pub replicas: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Normalize {
    None,
    /// Each frame's mean over the whole reference grid.
    Grid,
    /// Each frame's mean over the cells the object blocks.
    Blocked,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Stack written by `simulate`.
    pub stack: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub protocols: Option<Vec<ProtocolKind>>,
    #[arg(long, value_enum, default_value = "none")]
    pub normalize: Normalize,
    /// Where to write the per-cell images as CSV.
    #[arg(long)]
    pub images: Option<PathBuf>,
}

/// Resolved settings shared by every subcommand.
struct Settings {
    file: FileConfig,
    seed: u64,
    mode: RunMode,
    replicas: u32,
    out: Option<PathBuf>,
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LOW,HIGH")?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok((parse(lo)?, parse(hi)?))
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Runs the command and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let g = cli.global;
    let file = match &g.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    if let Some(n) = g.workers.or(file.workers) {
        ensure!(n >= 1, "--workers must be at least 1");
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let ctx = Settings {
        seed: g.seed.or(file.seed).unwrap_or(0),
        mode: g.mode.or(file.mode).unwrap_or_default(),
        replicas: file.replicas.unwrap_or(10),
        out: g.out.clone(),
        file,
    };
    match cli.command {
        Command::Sweep(args) => cmd_sweep(&ctx, g.frames, args),
        Command::Figure { figure, replicas } => cmd_figure(&ctx, g.frames, figure, replicas),
        Command::Simulate { csv } => cmd_simulate(&ctx, g.frames, csv.as_deref()),
        Command::Reconstruct(args) => cmd_reconstruct(&ctx, args),
        Command::Validate { suites, window } => cmd_validate(&ctx, suites, window),
    }
}

fn cmd_sweep(ctx: &Settings, frames: Option<u64>, args: SweepArgs) -> Result<i32> {
    let fixed = ctx.file.params(frames)?;
    let mut file = ctx.file.clone();
    let section = file.sweep.get_or_insert_with(Default::default);
    if let Some(axis) = args.axis {
        section.axis = Some(axis);
    }
    if let Some(values) = args.values {
        section.values = Some(values);
        section.log_range = None;
    }
    if let Some(p) = args.protocols {
        section.protocols = Some(p);
    }
    if let Some(s) = args.sources {
        section.sources = Some(s);
    }
    let spec = file.sweep(fixed, ctx.mode, args.replicas.unwrap_or(ctx.replicas), ctx.seed)?;
    let rows = run_sweep(&spec)?;
    let mut out = open_out(ctx.out.as_deref())?;
    output::write_metadata(&mut out, ctx.seed, &[("spec", serde_json::to_value(&spec)?)])?;
    output::write_sweep(&mut out, &rows)?;
    out.flush()?;
    info!("{} rows", rows.len());
    Ok(0)
}

fn cmd_figure(ctx: &Settings, frames: Option<u64>, figure: Figure, replicas: Option<u32>) -> Result<i32> {
    let mut specs = presets::preset(figure, ctx.mode, replicas.unwrap_or(ctx.replicas), ctx.seed)?;
    if let Some(k) = frames {
        for s in &mut specs {
            s.fixed.frames = k;
        }
    }
    let mut out = open_out(ctx.out.as_deref())?;
    output::write_metadata(
        &mut out,
        ctx.seed,
        &[
            ("figure", figure.name().into()),
            ("series", serde_json::to_value(&specs)?),
        ],
    )?;
    let mut rows = Vec::new();
    for spec in &specs {
        rows.extend(run_sweep(spec)?);
    }
    output::write_sweep(&mut out, &rows)?;
    out.flush()?;
    Ok(0)
}

fn cmd_simulate(ctx: &Settings, frames: Option<u64>, csv: Option<&Path>) -> Result<i32> {
    let params = ctx.file.params(frames)?;
    let mask = ctx.file.mask(&params)?;
    let path = ctx
        .out
        .as_deref()
        .context("simulate writes a binary stack; give --out")?;
    info!(
        "sampling {} frames on a {}x{} grid (R = {}, M = {}) with seed {}",
        params.frames,
        mask.width(),
        mask.height(),
        params.resolution_cells,
        params.modes_per_pixel,
        ctx.seed
    );
    let stack = sample_stack(&params, &mask, ctx.seed)?;
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    write_stack(&stack, &mut w)?;
    w.flush()?;
    if let Some(csv) = csv {
        write_stack_csv(
            &stack,
            File::create(csv).with_context(|| format!("creating {}", csv.display()))?,
        )?;
    }
    Ok(0)
}

fn cmd_reconstruct(ctx: &Settings, args: ReconstructArgs) -> Result<i32> {
    let file = File::open(&args.stack).with_context(|| format!("opening {}", args.stack.display()))?;
    let mut stack = read_stack(BufReader::new(file))?;
    stack = match args.normalize {
        Normalize::None => stack,
        Normalize::Grid => normalize_frames(&stack, &NormalizationRegion::WholeGrid)?,
        Normalize::Blocked => normalize_frames(&stack, &NormalizationRegion::Cells(stack.mask.out_cells()))?,
    };
    let kinds = args.protocols.unwrap_or_else(|| ProtocolKind::ALL.to_vec());
    let mut images_out = args.images.as_deref().map(|p| open_out(Some(p))).transpose()?;
    if let Some(w) = images_out.as_mut() {
        output::write_metadata(w, stack.seed, &[("params", serde_json::to_value(stack.params)?)])?;
        output::write_image_header(w)?;
    }
    let mut reports = Vec::new();
    for kind in kinds {
        let image = reconstruct(&stack, kind)?;
        if let Some(w) = images_out.as_mut() {
            output::write_image_rows(w, &image)?;
        }
        reports.push(empirical_snr(&image, &stack.mask)?);
    }
    if let Some(mut w) = images_out {
        w.flush()?;
    }
    let mut out = open_out(ctx.out.as_deref())?;
    output::write_metadata(
        &mut out,
        stack.seed,
        &[
            ("params", serde_json::to_value(stack.params)?),
            ("normalized", stack.is_normalized().into()),
        ],
    )?;
    output::write_reports(&mut out, &reports)?;
    out.flush()?;
    Ok(0)
}

fn cmd_validate(ctx: &Settings, suites: Vec<Suite>, window: Option<(f64, f64)>) -> Result<i32> {
    let (file_suites, mut opts) = ctx.file.validate_options(ctx.seed);
    let suites = if suites.is_empty() { file_suites } else { suites };
    if let Some(w) = window {
        opts.window = w;
    }
    ensure!(
        opts.window.0 > 0.0 && opts.window.0 < opts.window.1,
        "invalid window {:?}",
        opts.window
    );
    let report = validate::validate(&suites, &opts)?;
    let mut out = open_out(ctx.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    out.flush()?;
    for s in &report.suites {
        let status = if s.passed { "pass" } else { "FAIL" };
        eprintln!(
            "{:?}: {status} ({} checks, {:.1} s)",
            s.suite,
            s.checks.len(),
            s.seconds
        );
        if let Some(w) = s.worst().filter(|_| !s.passed) {
            eprintln!(
                "  worst: {} measured {} expected {} ({:?})",
                w.name, w.measured, w.expected, w.unit
            );
        }
    }
    Ok(if report.passed { 0 } else { 1 })
}
