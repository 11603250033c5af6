//! Command-line front end: field generation, fitting, extraction, the
//! piecewise-linear reference, and set comparison, with stable file formats.

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use splinecp::io::{self, CpHeader, CpRecord};
use splinecp::metrics::{align, PointRecord};
use splinecp::pl::{pl_critical_points, sample_grid};
use splinecp::synthetic::{schwefel_field, SchwefelSpec, TestFieldKind};
use splinecp::{extract_all, fit_adaptive, fit_fixed, NewtonConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "splinecp",
    version,
    about = "Tensor-product B-spline fitting and continuous-domain critical point extraction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Schwefel raster.
    GenSchwefel(GenSchwefelArgs),
    /// Generate one of the built-in analytic test fields.
    Gen(GenArgs),
    /// Fit a spline model to a gridded field.
    Fit(FitArgs),
    /// Extract critical points from a model in the continuous domain.
    Extract(ExtractArgs),
    /// Extract piecewise-linear critical points from a sampled model grid.
    PlExtract(PlExtractArgs),
    /// Align two critical-point files and report the Jaccard index.
    Compare(CompareArgs),
    /// Sample a model onto a grid for external plotting tools.
    DumpGrid(DumpGridArgs),
}

#[derive(Args)]
struct GenSchwefelArgs {
    /// Domain parameter: the nominal extent is [-((k+1/2)pi)^2, ((k+1/2)pi)^2].
    #[arg(long, default_value_t = 16)]
    k: u32,
    /// Explicit per-axis domain `LO HI`, overriding the k-derived extent.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    domain: Option<Vec<f64>>,
    /// Samples per axis: one shared value or one per axis.
    #[arg(long, num_args = 1.., required = true)]
    samples: Vec<usize>,
    /// Dimension when a single --samples value is given.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    /// One of bump, bowl, saddle, ramp, const.
    #[arg(long)]
    kind: String,
    #[arg(long, num_args = 1.., required = true)]
    samples: Vec<usize>,
    /// Per-axis domain `LO HI`, shared by every axis.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [0.0, 1.0],
          allow_negative_numbers = true)]
    domain: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    field: PathBuf,
    #[arg(long, default_value_t = 3)]
    degree: usize,
    /// Control points per axis for a fixed-layout fit.
    #[arg(long, num_args = 1.., conflicts_with = "adaptive")]
    controls: Option<Vec<usize>>,
    /// Refine knots until --tol is met.
    #[arg(long)]
    adaptive: bool,
    /// Maximum pointwise error target for --adaptive.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long, default_value_t = 20)]
    max_rounds: usize,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ExtractArgs {
    model: PathBuf,
    /// Gradient-norm convergence threshold.
    #[arg(long, default_value_t = 1e-7)]
    eps: f64,
    #[arg(long, default_value_t = 20)]
    max_iter: usize,
    /// Hessian-determinant degeneracy floor.
    #[arg(long, default_value_t = 1e-13)]
    delta: f64,
    /// Escape radius in span diagonals.
    #[arg(long, default_value_t = 5.0)]
    xi_factor: f64,
    /// Duplicate radius in parameter coordinates.
    #[arg(long, default_value_t = 1e-4)]
    tau: f64,
    /// Initial points per axis (default: degree + 1).
    #[arg(long)]
    init_per_axis: Option<usize>,
    /// Worker threads (default: SPLINECP_THREADS or the hardware cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(short, long)]
    output: PathBuf,
    /// Print extraction statistics as a key=value block.
    #[arg(long)]
    stats: bool,
    /// Print the span-filtration summary line.
    #[arg(long)]
    report_filtration: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PlExtractArgs {
    model: PathBuf,
    /// Base sampling resolution per axis: one shared value or one per axis.
    #[arg(long, num_args = 1.., required = true)]
    resolution: Vec<usize>,
    /// Total-volume upsampling ratio (e.g. 100 doubles 2-D axes tenfold).
    #[arg(long, default_value_t = 1.0)]
    ratio: f64,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CompareArgs {
    file_a: PathBuf,
    file_b: PathBuf,
    /// Match radius in units of one grid cell.
    #[arg(long, default_value_t = 1.0)]
    threshold_cells: f64,
    /// Physical cell size per axis, overriding the files' `cells` headers.
    #[arg(long, num_args = 1..)]
    cells: Option<Vec<f64>>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct DumpGridArgs {
    model: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    resolution: Vec<usize>,
    #[arg(short, long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own message; exit code 1 is "usage"
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify_error(&e))
        }
    }
}

/// 1 usage, 2 I/O or format, 3 numerical failure.
fn classify_error(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match e.downcast_ref::<splinecp::Error>() {
        Some(splinecp::Error::Io(_)) | Some(splinecp::Error::Format { .. }) => 2,
        Some(_) => 3,
        None => {
            if e.downcast_ref::<std::io::Error>().is_some() {
                2
            } else {
                3
            }
        }
    }
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::GenSchwefel(args) => gen_schwefel(args),
        Command::Gen(args) => gen(args),
        Command::Fit(args) => fit(args),
        Command::Extract(args) => extract(args),
        Command::PlExtract(args) => pl_extract(args),
        Command::Compare(args) => compare(args),
        Command::DumpGrid(args) => dump_grid(args),
    }
}

fn expand_per_axis(values: &[usize], dim: usize, what: &str) -> anyhow::Result<Vec<usize>> {
    if values.len() == 1 {
        Ok(vec![values[0]; dim])
    } else if values.len() == dim {
        Ok(values.to_vec())
    } else {
        Err(usage(format!(
            "--{what} takes one value or one per axis ({dim}), got {}",
            values.len()
        )))
    }
}

fn thread_pool(threads: Option<usize>) -> anyhow::Result<(rayon::ThreadPool, usize)> {
    let n = match threads {
        Some(n) if n > 0 => n,
        Some(_) => return Err(usage("--threads must be positive")),
        None => match std::env::var("SPLINECP_THREADS") {
            Ok(v) => v
                .parse()
                .map_err(|_| usage(format!("SPLINECP_THREADS=`{v}` is not a thread count")))?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .context("building thread pool")?;
    Ok((pool, n))
}

fn gen_schwefel(args: GenSchwefelArgs) -> anyhow::Result<()> {
    let dim = if args.samples.len() > 1 {
        args.samples.len()
    } else {
        args.dim
    };
    let samples = expand_per_axis(&args.samples, dim, "samples")?;
    let spec = SchwefelSpec {
        dim,
        k: args.k,
        samples: samples.clone(),
    };
    let domain = match &args.domain {
        Some(d) => (d[0], d[1]),
        None => spec.domain(),
    };
    println!(
        "# config subcommand=gen-schwefel k={} domain={},{} samples={samples:?} output={}",
        args.k,
        domain.0,
        domain.1,
        args.output.display()
    );
    let field = schwefel_field(domain, &samples)?;
    io::write_grid(&field, &args.output)?;
    println!("wrote {} samples to {}", field.values().len(), args.output.display());
    Ok(())
}

fn gen(args: GenArgs) -> anyhow::Result<()> {
    let kind = TestFieldKind::parse(&args.kind)
        .ok_or_else(|| usage(format!("unknown --kind `{}`", args.kind)))?;
    let dim = if args.samples.len() > 1 {
        args.samples.len()
    } else {
        args.dim
    };
    if kind == TestFieldKind::Saddle && dim < 2 {
        return Err(usage("--kind saddle needs at least 2 dimensions"));
    }
    let samples = expand_per_axis(&args.samples, dim, "samples")?;
    let extents = vec![(args.domain[0], args.domain[1]); dim];
    println!(
        "# config subcommand=gen kind={} domain={},{} samples={samples:?} output={}",
        kind.name(),
        args.domain[0],
        args.domain[1],
        args.output.display()
    );
    let field = splinecp::synthetic::test_field(kind, &samples, &extents)?;
    io::write_grid(&field, &args.output)?;
    println!("wrote {} samples to {}", field.values().len(), args.output.display());
    Ok(())
}

fn fit(args: FitArgs) -> anyhow::Result<()> {
    let field = io::read_field(&args.field)?;
    let (model, report) = if args.adaptive {
        println!(
            "# config subcommand=fit field={} degree={} adaptive tol={} max_rounds={} output={}",
            args.field.display(),
            args.degree,
            args.tol,
            args.max_rounds,
            args.output.display()
        );
        fit_adaptive(&field, args.degree, args.tol, args.max_rounds)?
    } else {
        let controls = args
            .controls
            .as_deref()
            .ok_or_else(|| usage("pass --controls N.. or --adaptive"))?;
        let controls = expand_per_axis(controls, field.dim(), "controls")?;
        println!(
            "# config subcommand=fit field={} degree={} controls={controls:?} output={}",
            args.field.display(),
            args.degree,
            args.output.display()
        );
        fit_fixed(&field, args.degree, &controls)?
    };
    io::write_model(&model, &args.output)?;
    if args.json {
        let json = serde_json::json!({
            "rms": report.rms,
            "max_error": report.max_error,
            "rounds": report.rounds,
            "control_dims": report.control_dims,
            "rms_history": report.rms_history,
            "model": args.output.display().to_string(),
        });
        println!("{json}");
    } else {
        println!(
            "fit: rms={:e} max_error={:e} rounds={} controls={:?}",
            report.rms, report.max_error, report.rounds, report.control_dims
        );
        println!("wrote model to {}", args.output.display());
    }
    Ok(())
}

fn newton_config(args: &ExtractArgs) -> NewtonConfig {
    NewtonConfig {
        eps: args.eps,
        max_iter: args.max_iter,
        delta: args.delta,
        xi_factor: args.xi_factor,
        tau: args.tau,
        init_per_axis: args.init_per_axis,
    }
}

fn extract(args: ExtractArgs) -> anyhow::Result<()> {
    let model = io::read_model(&args.model)?;
    let cfg = newton_config(&args);
    let (pool, threads) = thread_pool(args.threads)?;
    let max_degree = (0..model.dim()).map(|l| model.degree(l)).max().unwrap();
    println!(
        "# config subcommand=extract model={} eps={:e} max_iter={} delta={:e} xi_factor={} \
         tau={:e} init_per_axis={} threads={threads} output={}",
        args.model.display(),
        cfg.eps,
        cfg.max_iter,
        cfg.delta,
        cfg.xi_factor,
        cfg.tau,
        cfg.init_count(max_degree),
        args.output.display()
    );
    let (points, filtration, stats) = pool.install(|| extract_all(&model, &cfg))?;

    let records: Vec<CpRecord> = points.iter().map(CpRecord::from_critical_point).collect();
    let header = CpHeader {
        method: "cpe".into(),
        dim: model.dim(),
        model_hash: io::model_hash(&model),
        extents: model.extents().to_vec(),
        cells: None,
        config: vec![
            ("eps".into(), format!("{:e}", cfg.eps)),
            ("max_iter".into(), cfg.max_iter.to_string()),
            ("delta".into(), format!("{:e}", cfg.delta)),
            ("xi_factor".into(), format!("{}", cfg.xi_factor)),
            ("tau".into(), format!("{:e}", cfg.tau)),
            ("init_per_axis".into(), cfg.init_count(max_degree).to_string()),
        ],
    };
    io::write_cpoints(&header, &records, &args.output)?;

    let mut counts = std::collections::BTreeMap::new();
    for p in &points {
        *counts.entry(p.morse_type.label()).or_insert(0usize) += 1;
    }
    if args.json {
        let json = serde_json::json!({
            "count": points.len(),
            "types": counts,
            "filtration": {
                "total": filtration.total,
                "evaluated": filtration.evaluated(),
                "evaluated_pct": filtration.evaluated_pct(),
                "skipped": filtration.skipped,
                "skipped_pct": filtration.skipped_pct(),
            },
            "stats": {
                "spans_processed": stats.spans_processed,
                "newton_iterations": stats.newton_iterations,
                "exhausted": stats.exhausted,
                "avg_iterations": stats.avg_iterations,
                "avg_grad_norm": stats.avg_grad_norm,
                "filtration_seconds": stats.filtration_time.as_secs_f64(),
                "newton_seconds": stats.newton_time.as_secs_f64(),
                "dedup_seconds": stats.dedup_time.as_secs_f64(),
            },
            "output": args.output.display().to_string(),
        });
        println!("{json}");
        return Ok(());
    }
    if args.report_filtration {
        println!(
            "filtration: total={} evaluated={} evaluated_pct={:.2} skipped={} skipped_pct={:.2}",
            filtration.total,
            filtration.evaluated(),
            filtration.evaluated_pct(),
            filtration.skipped,
            filtration.skipped_pct()
        );
    }
    if args.stats {
        println!("spans_total={}", stats.spans_total);
        println!("spans_processed={}", stats.spans_processed);
        println!("newton_iterations={}", stats.newton_iterations);
        println!("exhausted={}", stats.exhausted);
        println!("abandoned_degenerate={}", stats.abandoned_degenerate);
        println!("abandoned_escaped={}", stats.abandoned_escaped);
        println!("avg_iterations={}", stats.avg_iterations);
        println!("avg_grad_norm={:e}", stats.avg_grad_norm);
        println!("filtration_seconds={}", stats.filtration_time.as_secs_f64());
        println!("newton_seconds={}", stats.newton_time.as_secs_f64());
        println!("dedup_seconds={}", stats.dedup_time.as_secs_f64());
    }
    let types: Vec<String> = counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!(
        "extracted {} critical points ({}) to {}",
        points.len(),
        types.join(" "),
        args.output.display()
    );
    Ok(())
}

fn pl_extract(args: PlExtractArgs) -> anyhow::Result<()> {
    let model = io::read_model(&args.model)?;
    let d = model.dim();
    let base = expand_per_axis(&args.resolution, d, "resolution")?;
    if args.ratio <= 0.0 {
        return Err(usage("--ratio must be positive"));
    }
    let per_axis_factor = args.ratio.powf(1.0 / d as f64).round().max(1.0) as usize;
    let resolution: Vec<usize> = base.iter().map(|&r| r * per_axis_factor).collect();
    let (pool, threads) = thread_pool(args.threads)?;
    println!(
        "# config subcommand=pl-extract model={} resolution={resolution:?} ratio={} \
         threads={threads} output={}",
        args.model.display(),
        args.ratio,
        args.output.display()
    );
    let (grid, points) = pool.install(|| -> splinecp::Result<_> {
        let grid = sample_grid(&model, &resolution)?;
        let points = pl_critical_points(&grid)?;
        Ok((grid, points))
    })?;
    let records: Vec<CpRecord> = points
        .iter()
        .map(|p| CpRecord::from_pl_point(p, d))
        .collect();
    let cells: Vec<f64> = grid
        .extents()
        .iter()
        .zip(grid.dims())
        .map(|(&(lo, hi), &m)| (hi - lo) / (m - 1) as f64)
        .collect();
    let header = CpHeader {
        method: "pl".into(),
        dim: d,
        model_hash: io::model_hash(&model),
        extents: model.extents().to_vec(),
        cells: Some(cells),
        config: vec![
            ("resolution".into(), format!("{resolution:?}")),
            ("ratio".into(), args.ratio.to_string()),
        ],
    };
    io::write_cpoints(&header, &records, &args.output)?;
    if args.json {
        let json = serde_json::json!({
            "count": points.len(),
            "resolution": resolution,
            "output": args.output.display().to_string(),
        });
        println!("{json}");
    } else {
        println!(
            "extracted {} PL critical points to {}",
            points.len(),
            args.output.display()
        );
    }
    Ok(())
}

fn compare(args: CompareArgs) -> anyhow::Result<()> {
    let a = io::read_cpoints(&args.file_a)?;
    let b = io::read_cpoints(&args.file_b)?;
    if a.header.dim != b.header.dim {
        return Err(usage(format!(
            "dimension mismatch: {} vs {}",
            a.header.dim, b.header.dim
        )));
    }
    let cells = match &args.cells {
        Some(c) if c.len() == a.header.dim => c.clone(),
        Some(c) if c.len() == 1 => vec![c[0]; a.header.dim],
        Some(c) => {
            return Err(usage(format!(
                "--cells takes 1 or {} values, got {}",
                a.header.dim,
                c.len()
            )))
        }
        None => a
            .header
            .cells
            .clone()
            .or_else(|| b.header.cells.clone())
            .ok_or_else(|| {
                usage("neither file records grid cells; pass --cells explicitly")
            })?,
    };
    if cells.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(usage(format!("grid cells must be positive and finite, got {cells:?}")));
    }
    if args.threshold_cells <= 0.0 {
        return Err(usage("--threshold-cells must be positive"));
    }
    println!(
        "# config subcommand=compare a={} b={} threshold_cells={} cells={cells:?}",
        args.file_a.display(),
        args.file_b.display(),
        args.threshold_cells
    );
    let to_points = |f: &io::CpFile| -> Vec<PointRecord> {
        f.records
            .iter()
            .map(|r| PointRecord {
                position: r.physical.clone(),
                morse_type: r.morse_type,
            })
            .collect()
    };
    let report = align(&to_points(&a), &to_points(&b), &cells, args.threshold_cells);
    if args.json {
        let json = serde_json::json!({
            "size_a": report.size_a,
            "size_b": report.size_b,
            "aligned": report.aligned,
            "aligned_same_type": report.aligned_same_type,
            "jaccard": report.jaccard,
            "threshold_cells": report.threshold,
        });
        println!("{json}");
    } else {
        println!(
            "compare: |A|={} |B|={} aligned={} aligned_same_type={} jaccard={:.4}",
            report.size_a, report.size_b, report.aligned, report.aligned_same_type, report.jaccard
        );
    }
    Ok(())
}

fn dump_grid(args: DumpGridArgs) -> anyhow::Result<()> {
    let model = io::read_model(&args.model)?;
    let d = model.dim();
    let resolution = expand_per_axis(&args.resolution, d, "resolution")?;
    println!(
        "# config subcommand=dump-grid model={} resolution={resolution:?} output={}",
        args.model.display(),
        args.output.display()
    );
    let grid = sample_grid(&model, &resolution)?;
    let field = splinecp::GridScalarField::new(
        grid.dims().to_vec(),
        grid.extents().to_vec(),
        grid.values().to_vec(),
    )?;
    if d <= 2 {
        io::write_csv(&field, &args.output)?;
    } else {
        io::write_grid(&field, &args.output)?;
    }
    println!("wrote {} samples to {}", field.values().len(), args.output.display());
    Ok(())
}
