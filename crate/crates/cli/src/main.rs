//! `spherefield` command-line tool.
//!
//! stdout carries only `key=value` results; diagnostics and errors go to
//! stderr. Exit codes: 0 success, 1 config or argument error, 2 data error,
//! 3 training divergence.

mod errmap;
mod manifest;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use spherefield::data_io::{self, CHECKPOINT_MAGIC, FIELD_MAGIC};
use spherefield::healpix;
use spherefield::tasks::{self, ExperimentConfig, FieldDataset, Geometry};
use spherefield::{Error, SphericalPoint};

use manifest::RunManifest;

const CHECKPOINT_FILE: &str = "checkpoint.sfc";
const HISTORY_FILE: &str = "history.csv";
const MANIFEST_FILE: &str = "manifest.toml";
const METRICS_FILE: &str = "metrics.txt";
const RESULTS_FILE: &str = "results.csv";
const ERROR_MAP_FILE: &str = "error_map.pgm";

#[derive(Parser)]
#[command(name = "spherefield", version, about = "Hybrid neural fields on the sphere")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Global {
    /// Overrides the seed of the experiment config (train) or the synthesis seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for evaluation. Training is always single-threaded.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Repeat for more detail on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a field file.
    Train {
        /// Experiment config (TOML), or a manifest written by an earlier run.
        #[arg(long)]
        config: PathBuf,
        /// Field file (binary field format).
        #[arg(long)]
        data: PathBuf,
        /// Output directory for checkpoint, history and manifest.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on a field file.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write a grayscale |prediction - target| image.
        #[arg(long)]
        error_map: bool,
        /// Snapshot rendered in the error map.
        #[arg(long, default_value_t = 0)]
        snapshot: usize,
    },
    /// Write a band-limited random field.
    Synth {
        /// `equirect:<n_lat>x<n_lon>` or `healpix:<n_side>`.
        #[arg(long, value_parser = parse_geometry)]
        geometry: Geometry,
        #[arg(long, default_value_t = 20)]
        l_max: usize,
        /// Spectral slope: degree-l coefficients have std (l+1)^(-alpha).
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1)]
        snapshots: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert `lat_deg,lon_deg,value[,snapshot]` CSV to a field file.
    ImportCsv {
        #[arg(long, value_parser = parse_geometry)]
        geometry: Geometry,
        input: PathBuf,
        output: PathBuf,
    },
    /// Print the HEALPix ring index of the pixel containing a point.
    #[command(allow_negative_numbers = true)]
    Ang2pix { n_side: usize, lat_deg: f64, lon_deg: f64 },
    /// Describe a field or checkpoint file.
    Info { path: PathBuf },
}

fn parse_geometry(s: &str) -> Result<Geometry, String> {
    let bad = || format!("expected equirect:<n_lat>x<n_lon> or healpix:<n_side>, got {s:?}");
    let (kind, dims) = s.split_once(':').ok_or_else(bad)?;
    match kind {
        "equirect" => {
            let (a, b) = dims.split_once('x').ok_or_else(bad)?;
            Ok(Geometry::Equirect {
                n_lat_pts: a.parse().map_err(|_| bad())?,
                n_lon_pts: b.parse().map_err(|_| bad())?,
            })
        }
        "healpix" => Ok(Geometry::Healpix {
            n_side: dims.parse().map_err(|_| bad())?,
        }),
        _ => Err(bad()),
    }
}

/// A failed command: exit code plus a one-line reason.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Self {
            code: 1,
            message: format!("config error: {e}"),
        }
    }

    fn data(e: impl std::fmt::Display) -> Self {
        Self {
            code: 2,
            message: format!("data error: {e}"),
        }
    }

    /// Classifies a library error raised while processing data.
    fn from_lib(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::GeometryMismatch(_) => Self::config(e),
            Error::Divergence(_) => Self {
                code: 3,
                message: format!("divergence: {e}"),
            },
            _ => Self::data(e),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.global.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();

    let g = cli.global;
    let result = match cli.command {
        Command::Train { config, data, out } => cmd_train(&g, &config, &data, &out),
        Command::Eval {
            checkpoint,
            data,
            out,
            error_map,
            snapshot,
        } => cmd_eval(&g, &checkpoint, &data, &out, error_map.then_some(snapshot)),
        Command::Synth {
            geometry,
            l_max,
            alpha,
            snapshots,
            out,
        } => cmd_synth(&g, geometry, l_max, alpha, snapshots, &out),
        Command::ImportCsv {
            geometry,
            input,
            output,
        } => cmd_import_csv(geometry, &input, &output),
        Command::Ang2pix {
            n_side,
            lat_deg,
            lon_deg,
        } => cmd_ang2pix(n_side, lat_deg, lon_deg),
        Command::Info { path } => cmd_info(&path),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let one_line = f.message.split_whitespace().collect::<Vec<_>>().join(" ");
            eprintln!("spherefield: {one_line}");
            ExitCode::from(f.code)
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CmdResult {
    fs::write(path, bytes).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> CmdResult {
    fs::create_dir_all(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

/// Reads an experiment config, accepting a run manifest in its place.
fn read_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    if let Some(m) = RunManifest::parse(&text).map_err(Failure::config)? {
        m.config.validate().map_err(Failure::config)?;
        return Ok(m.config);
    }
    ExperimentConfig::from_toml(&text).map_err(Failure::config)
}

fn cmd_train(g: &Global, config_path: &Path, data_path: &Path, out: &Path) -> CmdResult {
    let started = manifest::now();
    let mut cfg = read_config(config_path)?;
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    let ds = data_io::load_field(data_path).map_err(Failure::data)?;
    cfg.check_dataset(&ds.geometry(), ds.channels())
        .map_err(Failure::config)?;
    let (train_set, eval_set) = tasks::task_sets(&cfg, &ds).map_err(Failure::from_lib)?;
    info!(
        "training on {} samples, evaluating on {}, {} steps",
        train_set.len(),
        eval_set.len(),
        cfg.steps
    );
    let outcome = tasks::train(&cfg, &train_set, &eval_set).map_err(Failure::from_lib)?;
    for row in &outcome.history {
        info!("step {} loss {:.6e} wpsnr {:.3}", row.step, row.loss, row.report.wpsnr);
    }

    create_dir(out)?;
    let ckpt = data_io::encode_checkpoint(&outcome.best, &cfg.model, Some(ds.geometry()), Some(&outcome.optimizer));
    write_file(&out.join(CHECKPOINT_FILE), &ckpt)?;
    let mut history = Vec::new();
    tasks::write_history_csv(&outcome.history, &mut history).map_err(Failure::data)?;
    write_file(&out.join(HISTORY_FILE), &history)?;
    let m = RunManifest::new(
        "train",
        cfg,
        vec![config_path.into(), data_path.into()],
        vec![out.join(CHECKPOINT_FILE), out.join(HISTORY_FILE)],
        g.threads,
        started,
    );
    write_file(&out.join(MANIFEST_FILE), m.to_toml().as_bytes())?;

    let best = outcome.best_row();
    println!("best_step={}", best.step);
    println!("{}", best.report);
    println!("checkpoint={}", out.join(CHECKPOINT_FILE).display());
    Ok(())
}

fn all_samples(ds: &FieldDataset, with_time: bool) -> spherefield::Result<tasks::SampleSet> {
    let all: Vec<(usize, usize)> = (0..ds.snapshots())
        .flat_map(|s| (0..ds.n_points()).map(move |i| (s, i)))
        .collect();
    ds.select(&all, with_time)
}

fn cmd_eval(g: &Global, ckpt_path: &Path, data_path: &Path, out: &Path, error_map: Option<usize>) -> CmdResult {
    let ckpt = data_io::load_checkpoint(ckpt_path).map_err(Failure::data)?;
    let ds = data_io::load_field(data_path).map_err(Failure::data)?;
    let model = ckpt.model;
    model
        .encoder_config
        .check_geometry(&ds.geometry())
        .map_err(Failure::config)?;
    if model.output_dim() != ds.channels() {
        return Err(Failure::config(format!(
            "geometry mismatch: model predicts {} channels, data has {}",
            model.output_dim(),
            ds.channels()
        )));
    }
    if let Some(s) = error_map {
        if s >= ds.snapshots() {
            return Err(Failure::config(format!("snapshot {s} outside 0..{}", ds.snapshots())));
        }
    }
    let set = all_samples(&ds, model.with_time).map_err(Failure::from_lib)?;
    let threads = g.threads.max(1);
    let report = tasks::evaluate_parallel(&model, &set, threads).map_err(Failure::from_lib)?;

    create_dir(out)?;
    write_file(&out.join(METRICS_FILE), format!("{report}\n").as_bytes())?;
    let results = out.join(RESULTS_FILE);
    let fresh = !results.exists();
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&results)
        .map_err(|e| Failure::data(format!("{}: {e}", results.display())))?;
    let mut row = String::new();
    if fresh {
        row.push_str("checkpoint,data,n_points,wrmse,wmae,wpsnr\n");
    }
    row.push_str(&format!(
        "{},{},{},{},{},{}\n",
        ckpt_path.display(),
        data_path.display(),
        report.n_points,
        report.wrmse,
        report.wmae,
        report.wpsnr
    ));
    f.write_all(row.as_bytes())
        .map_err(|e| Failure::data(format!("{}: {e}", results.display())))?;

    println!("{report}");
    if let Some(s) = error_map {
        let img = errmap::render(&model, &ds, s, threads).map_err(Failure::from_lib)?;
        let path = out.join(ERROR_MAP_FILE);
        write_file(&path, &img.to_pgm())?;
        println!("error_map={}", path.display());
        println!("error_map_width={}", img.width);
        println!("error_map_height={}", img.height);
        println!("error_map_max_abs={}", img.max_abs);
    }
    Ok(())
}

fn cmd_synth(g: &Global, geometry: Geometry, l_max: usize, alpha: f64, snapshots: usize, out: &Path) -> CmdResult {
    geometry.validate().map_err(Failure::config)?;
    if snapshots == 0 {
        return Err(Failure::config("snapshots must be positive"));
    }
    if !alpha.is_finite() {
        return Err(Failure::config("alpha must be finite"));
    }
    let seed = g.seed.unwrap_or(0);
    let ds = data_io::synth_series(geometry, seed, l_max, alpha, snapshots).map_err(Failure::from_lib)?;
    data_io::save_field(&ds, out).map_err(Failure::data)?;
    println!("path={}", out.display());
    println!("points={}", ds.n_points());
    println!("snapshots={}", ds.snapshots());
    println!("seed={seed}");
    Ok(())
}

fn cmd_import_csv(geometry: Geometry, input: &Path, output: &Path) -> CmdResult {
    geometry.validate().map_err(Failure::config)?;
    let ds = data_io::import_csv(input, geometry).map_err(Failure::data)?;
    data_io::save_field(&ds, output).map_err(Failure::data)?;
    println!("path={}", output.display());
    println!("points={}", ds.n_points());
    println!("snapshots={}", ds.snapshots());
    Ok(())
}

fn cmd_ang2pix(n_side: usize, lat_deg: f64, lon_deg: f64) -> CmdResult {
    let usage = "usage: spherefield ang2pix <N_SIDE> <LAT_DEG> <LON_DEG>";
    healpix::check_n_side(n_side).map_err(|e| Failure::config(format!("{e}; {usage}")))?;
    let p = SphericalPoint::from_degrees(lat_deg, lon_deg).map_err(|e| Failure::config(format!("{e}; {usage}")))?;
    let pix = healpix::ang2pix(n_side, &p).map_err(Failure::config)?;
    println!("{pix}");
    Ok(())
}

fn cmd_info(path: &Path) -> CmdResult {
    let bytes = fs::read(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    if bytes.starts_with(FIELD_MAGIC) {
        let ds = data_io::decode_field(&bytes).map_err(Failure::data)?;
        println!("kind=field");
        println!("geometry={}", ds.geometry());
        println!("points={}", ds.n_points());
        println!("channels={}", ds.channels());
        println!("snapshots={}", ds.snapshots());
    } else if bytes.starts_with(CHECKPOINT_MAGIC) {
        let c = data_io::decode_checkpoint(&bytes).map_err(Failure::data)?;
        println!("kind=checkpoint");
        if let Some(geom) = c.geometry {
            println!("geometry={geom}");
        }
        println!("params={}", c.model.param_count());
        println!("input_dim={}", c.model.input_dim());
        println!("output_dim={}", c.model.output_dim());
        println!("with_time={}", c.model.with_time);
        if let Some(opt) = &c.optimizer {
            println!("optimizer_steps={}", opt.steps_taken());
        }
    } else {
        return Err(Failure::data(format!("{}: unrecognized file magic", path.display())));
    }
    Ok(())
}
