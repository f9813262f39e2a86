//! `apn`: evaluation, fitting demo, kernel inspection, mask rendering and
//! tile planning on top of `apn-core`.
//!
//! Exit status is 0 on success, 1 on data errors and 2 on usage errors.

mod parse;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::builder::TypedValueParser;
use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};

use apn_core::eval::{evaluate, Metric};
use apn_core::fit::{fit_points, FitConfig, StepRule};
use apn_core::format::sig6;
use apn_core::geometry::{BoxParams, OrientedBox, Point2};
use apn_core::ingest::{parse_annotation, parse_detections, plan_tiles, DEFAULT_STRIDE, DEFAULT_WINDOW};
use apn_core::loss::{soft_contains, KernelConfig, DEFAULT_K, DEFAULT_POINTS_PER_BOX};
use apn_core::mask::{mask_for_roi, render_mask};

use parse::BoxArg;

#[derive(Debug, Parser)]
#[command(
    name = "apn",
    version,
    about = "Oriented-box losses, masks and rotated mAP evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StepRuleArg {
    Normalized,
    Raw,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score DOTA-format detections against ground truth (VOC07/VOC12 mAP).
    Eval {
        /// Directory of annotation files, one `<image_id>.txt` per image.
        #[arg(long)]
        gt: PathBuf,
        /// Directory of detection files, one `<class>.txt` per class.
        #[arg(long)]
        dets: PathBuf,
        #[arg(long, default_value = "voc07", value_parser = parse::metric)]
        metric: Metric,
        /// Comma-separated IoU thresholds, or `0.5:0.95`.
        #[arg(long, default_value = "0.5", value_parser = parse::iou_list)]
        iou: parse::Thresholds,
        /// Write the key=value report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pull random points into a target box by descending the box-point loss.
    Fit {
        /// Target box `cx,cy,w,h,theta`.
        #[arg(long, value_parser = parse::box_arg, allow_hyphen_values = true)]
        target: BoxArg,
        #[arg(long, default_value_t = DEFAULT_POINTS_PER_BOX, value_parser = clap::value_parser!(u32).range(1..).map(|v| v as usize))]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_K, value_parser = parse::positive_f64)]
        k: f64,
        /// Initial step length (default: a tenth of the target diagonal).
        #[arg(long, value_parser = parse::non_negative_f64)]
        lr: Option<f64>,
        #[arg(long, default_value_t = 2000)]
        iters: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0.05, value_parser = parse::non_negative_f64)]
        tolerance: f64,
        #[arg(long, value_enum, default_value_t = StepRuleArg::Normalized)]
        step_rule: StepRuleArg,
        /// Write the per-iteration loss as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Read theta in degrees.
        #[arg(long)]
        degrees: bool,
    },
    /// Sample the smooth containment kernel on a grid around a box (CSV).
    Kernel {
        #[arg(long = "box", value_parser = parse::box_arg, allow_hyphen_values = true)]
        bbox: BoxArg,
        /// Samples per axis.
        #[arg(long, default_value_t = 21, value_parser = clap::value_parser!(u32).range(2..).map(|v| v as usize))]
        grid: usize,
        #[arg(long, default_value_t = DEFAULT_K, value_parser = parse::positive_f64)]
        k: f64,
        /// Sampled window as a multiple of the box's bounding rectangle.
        #[arg(long, default_value_t = 2.0, value_parser = parse::positive_f64)]
        span: f64,
        #[arg(long)]
        degrees: bool,
    },
    /// Render the coarse mask of a ground-truth box inside a RoI.
    Rasterize {
        #[arg(long, value_parser = parse::box_arg, allow_hyphen_values = true)]
        gt: BoxArg,
        #[arg(long, value_parser = parse::box_arg, allow_hyphen_values = true)]
        roi: BoxArg,
        /// Grid size `h,w`.
        #[arg(long, default_value = "7,7", value_parser = parse::grid_size)]
        size: (usize, usize),
        #[arg(long)]
        degrees: bool,
    },
    /// List the crop windows for a large image.
    Tile {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        width: u32,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        height: u32,
        #[arg(long, default_value_t = DEFAULT_WINDOW, value_parser = clap::value_parser!(u32).range(1..))]
        window: u32,
        #[arg(long, default_value_t = DEFAULT_STRIDE, value_parser = clap::value_parser!(u32).range(1..))]
        stride: u32,
        #[arg(long, default_value = "image")]
        image_id: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Eval {
            gt,
            dets,
            metric,
            iou,
            out,
        } => cmd_eval(&gt, &dets, metric, &iou.0, out.as_deref()),
        Command::Fit {
            target,
            n,
            k,
            lr,
            iters,
            seed,
            tolerance,
            step_rule,
            trace,
            degrees,
        } => {
            let cfg = FitConfig {
                n_points: n,
                k,
                step_size: lr,
                max_iters: iters,
                seed,
                tolerance,
                step_rule: match step_rule {
                    StepRuleArg::Normalized => StepRule::PerPointNormalized,
                    StepRuleArg::Raw => StepRule::Raw,
                },
            };
            cmd_fit(build_box(target, degrees, "target")?, &cfg, trace.as_deref())
        }
        Command::Kernel {
            bbox,
            grid,
            k,
            span,
            degrees,
        } => cmd_kernel(&build_box(bbox, degrees, "box")?, grid, KernelConfig::new(k)?, span),
        Command::Rasterize { gt, roi, size, degrees } => {
            let gt = build_box(gt, degrees, "gt")?;
            let roi = build_box(roi, degrees, "roi")?;
            print!("{}", render_mask(&mask_for_roi(&gt, &roi, size)?));
            Ok(())
        }
        Command::Tile {
            width,
            height,
            window,
            stride,
            image_id,
        } => {
            if stride > window {
                Cli::command()
                    .error(
                        ErrorKind::ValueValidation,
                        format!("--stride {stride} exceeds --window {window}"),
                    )
                    .exit();
            }
            print!("{}", plan_tiles(width, height, window, stride)?.to_text(&image_id));
            Ok(())
        }
    }
}

fn build_box(arg: BoxArg, degrees: bool, what: &str) -> Result<OrientedBox> {
    let theta = if degrees { arg.theta.to_radians() } else { arg.theta };
    let params = BoxParams::new(arg.cx, arg.cy, arg.w, arg.h, theta).with_context(|| format!("--{what}"))?;
    OrientedBox::from_params(params).with_context(|| format!("--{what}"))
}

/// Sorted `*.txt` files in `dir`.
fn text_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).with_context(|| format!("cannot read directory {}", dir.display()))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.with_context(|| format!("cannot list {}", dir.display()))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "txt") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn file_stem(path: &Path) -> Result<String> {
    match path.file_stem().and_then(|s| s.to_str()) {
        Some(s) if !s.is_empty() => Ok(s.to_string()),
        _ => bail!("{}: file name is not a usable identifier", path.display()),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn cmd_eval(gt_dir: &Path, det_dir: &Path, metric: Metric, iou: &[f64], out: Option<&Path>) -> Result<()> {
    let mut gts = Vec::new();
    for path in text_files(gt_dir)? {
        let image_id = file_stem(&path)?;
        let parsed = parse_annotation(&read_text(&path)?, &image_id).with_context(|| path.display().to_string())?;
        gts.extend(parsed.records);
    }

    let mut dets = Vec::new();
    let det_files = text_files(det_dir)?;
    if det_files.is_empty() {
        eprintln!("warning: no detection files in {}", det_dir.display());
    }
    for path in det_files {
        let stem = file_stem(&path)?;
        let class_id = stem.strip_prefix("Task1_").unwrap_or(&stem);
        let parsed = parse_detections(&read_text(&path)?, class_id).with_context(|| path.display().to_string())?;
        for w in &parsed.warnings {
            eprintln!("warning: {}: {w}", path.display());
        }
        dets.extend(parsed.records);
    }

    let report = evaluate(&dets, &gts, iou, metric).context("evaluation failed")?;
    print!("{}", report.to_text());
    if let Some(out) = out {
        fs::write(out, report.to_key_value()).with_context(|| format!("cannot write {}", out.display()))?;
    }
    Ok(())
}

fn cmd_fit(target: OrientedBox, cfg: &FitConfig, trace_path: Option<&Path>) -> Result<()> {
    let trace = fit_points(&target, cfg)?;
    let initial = trace.losses.first().copied().unwrap_or(trace.final_loss);
    println!("initial_loss={}", sig6(initial));
    println!("final_loss={}", sig6(trace.final_loss));
    println!("converged={}", trace.converged);
    println!("iterations={}", trace.losses.len());
    println!("point,x,y");
    for (i, p) in trace.final_points.iter().enumerate() {
        println!("{i},{},{}", sig6(p.x), sig6(p.y));
    }
    if let Some(path) = trace_path {
        fs::write(path, trace.to_csv()).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn cmd_kernel(b: &OrientedBox, grid: usize, cfg: KernelConfig, span: f64) -> Result<()> {
    let (lo, hi) = b.bounds();
    let center = (lo + hi).scale(0.5);
    let half = (hi - lo).scale(0.5 * span);
    let (x0, y0) = (center.x - half.x, center.y - half.y);
    let step = |extent: f64| 2.0 * extent / (grid - 1) as f64;
    let (dx, dy) = (step(half.x), step(half.y));

    let mut out = String::from("x,y,value\n");
    for row in 0..grid {
        let y = y0 + row as f64 * dy;
        for col in 0..grid {
            let x = x0 + col as f64 * dx;
            let v = soft_contains(Point2::new(x, y), b, cfg);
            out.push_str(&format!("{},{},{}\n", sig6(x), sig6(y), sig6(v)));
        }
    }
    print!("{out}");
    Ok(())
}
