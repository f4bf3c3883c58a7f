use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use confseq_core::ConfidenceState;
use confseq_harness::experiments::{self, CURVE_TIMES};
use confseq_harness::generate::generate;
use confseq_harness::track::{track, TrackOptions};
use confseq_harness::{parse_methods, selftest, Cell, Dist, ExperimentConfig, Format, TableWriter};

#[derive(Parser)]
#[command(name = "confseq", version, about = "Confidence sequences for bounded means from betting wealth")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// bern:P, beta:A,B or file:PATH
    #[arg(long, default_value = "bern:0.25")]
    dist: Dist,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Order of the lower-bound mixtures named `lbup` or `hybrid`.
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Rounds of exact mixture before the hybrid switches.
    #[arg(long = "t-switch", default_value_t = 50)]
    t_switch: u64,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded stream of observations, one per line.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        horizon: usize,
    },
    /// Log wealth over a grid of candidate means at selected rounds.
    WealthCurve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 500)]
        horizon: usize,
        #[arg(long, default_value = "hr,up,lbup1,lbup2,lbup3")]
        methods: String,
        #[arg(long, default_value_t = 512)]
        grid: usize,
        /// Rounds to report (comma separated).
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<u64>>,
    },
    /// Running intervals averaged over seeds, with cumulative update time.
    Widths {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2000)]
        horizon: usize,
        #[arg(long, default_value = "hr,up,lbup1,lbup3,hybrid")]
        methods: String,
        /// Number of seeds, starting at --seed.
        #[arg(long, default_value_t = 5)]
        replicates: usize,
    },
    /// Monte Carlo rate at which the true mean leaves the interval.
    Coverage {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        horizon: usize,
        #[arg(long, default_value = "hr,up,lbup3,hybrid")]
        methods: String,
        #[arg(long, default_value_t = 1000)]
        replicates: usize,
        /// True mean, for sources where it is not implied.
        #[arg(long)]
        mu: Option<f64>,
    },
    /// Stream observations from a file or stdin and emit the interval after each.
    Track {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "lbup")]
        methods: String,
        /// Input file (stdin when absent).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Restore from and save to this file.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Mean per-update time at increasing rounds, with log-log slopes.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "up,lbup3")]
        methods: String,
        #[arg(long, value_delimiter = ',', default_value = "1000,3000,10000,30000,100000")]
        times: Vec<u64>,
        /// Consecutive updates timed at each round.
        #[arg(long, default_value_t = 50)]
        reps: usize,
    },
    /// Quick cross-checks between independent computations.
    Selftest,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn config(c: &Common, horizon: usize, methods: &str, replicates: usize, grid: usize) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig {
        dist: c.dist.clone(),
        horizon,
        delta: c.delta,
        methods: parse_methods(methods, c.n, c.t_switch)?,
        seeds: ExperimentConfig::seed_range(c.seed, replicates),
        n_lbup: c.n,
        t_switch: c.t_switch,
        m_grid: grid,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate { common, horizon } => {
            let y = generate(&common.dist, horizon, common.seed)?;
            let mut w = TableWriter::new(output(&common.out)?, common.format, &["y"])?;
            for v in y {
                w.row(&[Cell::Float(v)])?;
            }
            w.flush()?;
        }
        Command::WealthCurve { common, horizon, methods, grid, times } => {
            let cfg = config(&common, horizon, &methods, 1, grid)?;
            let rows = experiments::wealth_curve(&cfg, times.as_deref().unwrap_or(&CURVE_TIMES))?;
            let mut w = TableWriter::new(output(&common.out)?, common.format, &["t", "m", "method", "log_wealth"])?;
            for r in rows {
                w.row(&[r.t.into(), r.m.into(), r.method.into(), r.log_wealth.into()])?;
            }
            w.flush()?;
        }
        Command::Widths { common, horizon, methods, replicates } => {
            let cfg = config(&common, horizon, &methods, replicates, 2)?;
            let rows = experiments::run_widths(&cfg)?;
            let mut w =
                TableWriter::new(output(&common.out)?, common.format, &["t", "method", "low", "high", "elapsed_ns"])?;
            for r in rows {
                w.row(&[r.t.into(), r.method.into(), r.low.into(), r.high.into(), r.elapsed_ns.into()])?;
            }
            w.flush()?;
        }
        Command::Coverage { common, horizon, methods, replicates, mu } => {
            let cfg = config(&common, horizon, &methods, replicates, 2)?;
            let rows = experiments::coverage_mc(&cfg, mu)?;
            let mut w = TableWriter::new(
                output(&common.out)?,
                common.format,
                &["method", "replicates", "miscovered", "rate", "ci_low", "ci_high"],
            )?;
            for r in rows {
                w.row(&[
                    r.method.into(),
                    (r.replicates as u64).into(),
                    (r.miscovered as u64).into(),
                    r.rate.into(),
                    r.ci_low.into(),
                    r.ci_high.into(),
                ])?;
            }
            w.flush()?;
        }
        Command::Track { common, methods, input, checkpoint } => {
            let mut m = parse_methods(&methods, common.n, common.t_switch)?;
            if m.len() != 1 {
                bail!("track follows exactly one method");
            }
            let fresh = ConfidenceState::new(m.remove(0), common.delta)?;
            let reader: Box<dyn BufRead> = match &input {
                Some(p) => Box::new(BufReader::new(
                    File::open(p).with_context(|| format!("opening {}", p.display()))?,
                )),
                None => Box::new(BufReader::new(io::stdin().lock())),
            };
            let opts = TrackOptions {
                format: common.format,
                checkpoint,
            };
            let summary = track(reader, output(&common.out)?, fresh, &opts)?;
            if summary.skipped > 0 {
                log::warn!("{} malformed records skipped in total", summary.skipped);
            }
        }
        Command::Bench { common, methods, times, reps } => {
            let methods = parse_methods(&methods, common.n, common.t_switch)?;
            let rows = experiments::bench(&methods, &times, &common.dist, common.seed, reps)?;
            let mut w = TableWriter::new(output(&common.out)?, common.format, &["method", "t", "ns_per_step"])?;
            for r in &rows {
                w.row(&[r.method.clone().into(), r.t.into(), r.ns_per_step.into()])?;
            }
            w.flush()?;
            for m in &methods {
                let pts: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| r.method == m.label())
                    .map(|r| (r.t as f64, r.ns_per_step))
                    .collect();
                if pts.len() >= 2 {
                    eprintln!("{}: log-log slope {:.3}", m.label(), experiments::loglog_slope(&pts));
                }
            }
        }
        Command::Selftest => {
            let mut ok = true;
            for c in selftest::run_all() {
                println!("{} {} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
