//! Command-line front end.
//!
//! Output directory precedence: `--out`, then `output_dir` in the `[run]` section,
//! then the `CTAOI_OUT_DIR` environment variable, then `./ctaoi-out`.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::codes::{generate_s_sequence, SSequence};
use crate::config::RunConfig;
use crate::demux::InverseKind;
use crate::error::{Error, Result};
use crate::pipeline::{extract_profile_with, multiplexing_advantage, ReferenceRate, Reconstructor, SnrReport};
use crate::plot::{advantage_svg, map_csv, pgm};
use crate::simulator::{scan_2d, simulate_stream};
use crate::stream_file::{read_binary, write_binary};

pub const OUT_DIR_ENV: &str = "CTAOI_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "ctaoi-out";
pub const MANIFEST: &str = "manifest.ini";
/// Lower clip of the decibel-scale map image.
pub const DB_FLOOR: f64 = -40.0;

#[derive(Debug, Parser)]
#[command(name = "ctaoi", version, about = "Coded-transmission acousto-optic imaging workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write an order-N S-sequence as `N:bits` and verify it after writing.
    GenCode {
        order: u64,
        /// Output file; defaults to `s_sequence_<N>.txt` in the output directory.
        #[arg(short, long)]
        file: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate an acquisition and write `stream.bin`, `profile.csv` and the manifest.
    Simulate(RunArgs),
    /// Reconstruct a depth profile from a stream file.
    Demux {
        input: PathBuf,
        /// Output CSV; defaults to `profile.csv` in the output directory.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "spectral")]
        solver: InverseKind,
        /// Write the demultiplexed modulated signal instead of its envelope.
        #[arg(long)]
        signal: bool,
    },
    /// Coded against single-pulse SNR over code orders: CSV and SVG chart.
    SnrSweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated code orders, overriding `experiment.orders`.
        #[arg(long)]
        orders: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        /// `matched` or `max-rate`.
        #[arg(long)]
        reference: Option<ReferenceRate>,
    },
    /// Raster scan of the transducer: map CSV and graymap images.
    Scan2d(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Configuration file; built-in defaults when omitted.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn output_dir(flag: Option<&Path>, cfg: Option<&RunConfig>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(dir) = cfg.and_then(|c| c.output_dir.as_ref()) {
        return PathBuf::from(dir);
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_OUT_DIR),
    }
}

fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => fs::read_to_string(path)?.parse::<RunConfig>()?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.acquisition.seed = seed;
    }
    Ok(cfg)
}

fn prepare(dir: &Path, cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(MANIFEST), cfg.to_string())?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenCode { order, file, out } => gen_code(order, file, out),
        Command::Simulate(args) => simulate(&args),
        Command::Demux {
            input,
            output,
            out,
            solver,
            signal,
        } => demux(&input, output, out, solver, signal),
        Command::SnrSweep {
            run,
            orders,
            trials,
            reference,
        } => snr_sweep(&run, orders, trials, reference),
        Command::Scan2d(args) => scan(&args),
    }
}

fn gen_code(order: u64, file: Option<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    let n = usize::try_from(order).map_err(|_| Error::InvalidOrder(order))?;
    let seq = generate_s_sequence(n)?;
    let path = match file {
        Some(f) => f,
        None => {
            let dir = output_dir(out.as_deref(), None);
            fs::create_dir_all(&dir)?;
            dir.join(format!("s_sequence_{n}.txt"))
        }
    };
    fs::write(&path, format!("{seq}\n"))?;
    let back: SSequence = fs::read_to_string(&path)?.trim().parse()?;
    if back != seq || !back.satisfies_identity() {
        return Err(Error::InvalidSequence(format!(
            "{} failed the S-matrix check after writing",
            path.display()
        )));
    }
    println!("{} order={n} weight={}", path.display(), seq.weight());
    Ok(())
}

fn simulate(args: &RunArgs) -> Result<()> {
    let cfg = load_config(args)?;
    cfg.validate()?;
    let dir = output_dir(args.out.as_deref(), Some(&cfg));
    let stream = simulate_stream(&cfg.acquisition, &cfg.phantom)?;
    let profile = Reconstructor::new(&cfg.acquisition, cfg.experiment.solver)?.profile(&stream)?;
    prepare(&dir, &cfg)?;
    write_binary(&stream, BufWriter::new(fs::File::create(dir.join("stream.bin"))?))?;
    fs::write(dir.join("profile.csv"), profile.to_csv())?;
    println!(
        "{}: {} samples, {} depth bins",
        dir.display(),
        stream.samples.len(),
        profile.len()
    );
    Ok(())
}

fn demux(
    input: &Path,
    output: Option<PathBuf>,
    out: Option<PathBuf>,
    solver: InverseKind,
    signal: bool,
) -> Result<()> {
    let stream = read_binary(BufReader::new(fs::File::open(input)?))?;
    stream.config.validate()?;
    let recon = Reconstructor::new(&stream.config, solver)?.reconstruct(&stream)?;
    let profile = if signal {
        recon.signal
    } else {
        extract_profile_with(&recon.signal, recon.f_us_hz, recon.f_s_hz)?
    };
    let path = match output {
        Some(p) => p,
        None => {
            let dir = output_dir(out.as_deref(), None);
            fs::create_dir_all(&dir)?;
            dir.join("profile.csv")
        }
    };
    fs::write(&path, profile.to_csv())?;
    println!("{}: {} depth bins", path.display(), profile.len());
    Ok(())
}

fn snr_sweep(
    args: &RunArgs,
    orders: Option<String>,
    trials: Option<usize>,
    reference: Option<ReferenceRate>,
) -> Result<()> {
    let mut cfg = load_config(args)?;
    if let Some(raw) = orders {
        let parsed: Vec<usize> = raw
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad code order `{s}`")))
            })
            .collect::<Result<_>>()?;
        if parsed.is_empty() {
            return Err(Error::InvalidConfig("--orders must list at least one code order".into()));
        }
        cfg.experiment.orders = parsed;
    }
    if let Some(t) = trials {
        cfg.experiment.trials = t;
    }
    if let Some(r) = reference {
        cfg.experiment.reference = r;
    }
    cfg.validate()?;
    let dir = output_dir(args.out.as_deref(), Some(&cfg));
    let run = multiplexing_advantage(
        &cfg.acquisition,
        &cfg.phantom,
        &cfg.experiment.orders,
        &cfg.experiment.snr_options(),
        cfg.experiment.reference,
    )?;
    prepare(&dir, &cfg)?;
    fs::write(dir.join("advantage.csv"), run.curve.to_csv())?;
    fs::write(dir.join("advantage.svg"), advantage_svg(&run.curve))?;
    let mut reports = format!("order_n,{}\n", SnrReport::CSV_HEADER);
    for (n, r) in run.curve.orders.iter().zip(run.coded.iter().zip(&run.single)) {
        reports.push_str(&format!("{n},{}\n{n},{}\n", r.0.csv_row(), r.1.csv_row()));
    }
    fs::write(dir.join("snr_reports.csv"), reports)?;
    for ((n, m), t) in run
        .curve
        .orders
        .iter()
        .zip(&run.curve.measured_gain)
        .zip(&run.curve.theoretical_gain)
    {
        println!("N={n}: measured gain {m:.3}, theory {t:.3}");
    }
    Ok(())
}

fn scan(args: &RunArgs) -> Result<()> {
    let cfg = load_config(args)?;
    cfg.validate()?;
    let dir = output_dir(args.out.as_deref(), Some(&cfg));
    let map = scan_2d(&cfg.acquisition, &cfg.phantom, &cfg.scan, cfg.experiment.solver)?;
    let (nx, ny) = (cfg.scan.nx, cfg.scan.ny);
    let (xs, ys) = (cfg.scan.xs(), cfg.scan.ys());
    let norm = map.normalized();
    prepare(&dir, &cfg)?;
    fs::write(dir.join("map.csv"), map_csv(&norm, &xs, &ys))?;
    fs::write(dir.join("map_db.csv"), map_csv(&map.normalized_db(DB_FLOOR), &xs, &ys))?;
    fs::write(dir.join("map.pgm"), pgm(&norm, nx, ny, 0.0, 1.0))?;
    fs::write(dir.join("map_db.pgm"), pgm(&map.normalized_db(DB_FLOOR), nx, ny, DB_FLOOR, 0.0))?;
    println!("{}: {nx}x{ny} map, SNR {:.2}", dir.display(), map.snr());
    Ok(())
}
