mod config;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use covlab::report::{read_window_csv, write_all, write_derived, Echo, WINDOWS_FILE};
use covlab::{estimate, run_backtest, Error, EstimatorId, SymmetricMatrix};
use serde_json::json;

use config::{load_config, Campaign, CliResult};

/// Base price for panels rebuilt from returns, and the label of the day
/// before the first synthetic return.
const START_PRICE: f64 = 100.0;
const START_DATE: &str = "1996-12-31";

#[derive(Parser)]
#[command(name = "covlab", version, about = "Filtered covariance estimators and minimum-variance backtests")]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

/// Flags override the config file key of the same name.
#[derive(Args, Default)]
struct Flags {
    /// Flat `key = value` config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Price CSV (`date,<tickers>[,index]`) or `synthetic`
    #[arg(long, global = true)]
    data: Option<String>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated estimator ids
    #[arg(long, global = true)]
    estimators: Option<String>,
    /// Comma-separated horizons in trading days
    #[arg(long, global = true)]
    horizons: Option<String>,
    /// Comma-separated constraint modes: unconstrained, long_only
    #[arg(long, global = true)]
    modes: Option<String>,
    /// Seed for the synthetic generator
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Weight fraction for the N_q concentration metric
    #[arg(long, global = true)]
    q: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic price panel and its true covariance
    Generate,
    /// Run one estimator on one window
    Estimate {
        /// First day of the estimation window (default: the last `len` days)
        #[arg(long)]
        start: Option<usize>,
        /// Window length in days
        #[arg(long)]
        len: Option<usize>,
    },
    /// Run the rolling-window campaign and write all reports
    Backtest,
    /// Re-render summaries and plot data from a per-window CSV
    Report {
        /// Per-window CSV (default: <out>/windows.csv)
        #[arg(long)]
        windows: Option<PathBuf>,
    },
}

impl Flags {
    fn settings(&self) -> CliResult<BTreeMap<String, String>> {
        let mut map = match &self.config {
            Some(path) => load_config(path)?,
            None => BTreeMap::new(),
        };
        let mut set = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                map.insert(k.to_string(), v);
            }
        };
        set("data", self.data.clone());
        set("out", self.out.as_ref().map(|p| p.display().to_string()));
        set("estimators", self.estimators.clone());
        set("horizons", self.horizons.clone());
        set("modes", self.modes.clone());
        set("seed", self.seed.map(|v| v.to_string()));
        set("workers", self.workers.map(|v| v.to_string()));
        set("q", self.q.map(|v| v.to_string()));
        Ok(map)
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let f = File::create(path).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_echo(w: &mut impl Write, echo: &Echo) -> CliResult<()> {
    for (k, v) in echo {
        writeln!(w, "# {k} = {v}")?;
    }
    Ok(())
}

/// Square matrix with ticker labels on both axes.
fn write_labelled_matrix(path: &Path, echo: &Echo, tickers: &[String], m: &SymmetricMatrix) -> CliResult<()> {
    let mut w = create(path)?;
    write_echo(&mut w, echo)?;
    writeln!(w, "ticker,{}", tickers.join(","))?;
    for (i, t) in tickers.iter().enumerate() {
        let row: Vec<String> = m.row(i).iter().map(|x| x.to_string()).collect();
        writeln!(w, "{t},{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_generate(c: &Campaign) -> CliResult<u8> {
    let generated = c.synthetic.generate()?;
    let echo = c.data_echo();
    let prices = generated.returns.to_prices(START_PRICE, START_DATE);
    let panel_path = c.out.join("prices.csv");
    let mut w = create(&panel_path)?;
    write_echo(&mut w, &echo)?;
    prices.write_csv(&mut w)?;
    w.flush()?;
    let cov_path = c.out.join("true_covariance.csv");
    write_labelled_matrix(&cov_path, &echo, generated.returns.tickers(), &generated.true_covariance)?;
    println!(
        "wrote {} ({} assets × {} days) and {}",
        panel_path.display(),
        prices.n_assets(),
        prices.n_days(),
        cov_path.display()
    );
    Ok(0)
}

fn cmd_estimate(c: &Campaign, start: Option<usize>, len: Option<usize>) -> CliResult<u8> {
    let id: EstimatorId = match c.backtest.estimators.as_slice() {
        [id] => *id,
        _ => return Err("estimate takes exactly one id in --estimators".into()),
    };
    let panel = c.load_returns()?;
    let len = len.unwrap_or(c.window_len);
    if len < 2 || len > panel.n_days() {
        return Err(format!("window length {len} must lie in [2, {}]", panel.n_days()).into());
    }
    let start = start.or(c.window_start).unwrap_or(panel.n_days() - len);
    if start + len > panel.n_days() {
        return Err(format!("window {start}..{} exceeds the {} available days", start + len, panel.n_days()).into());
    }
    let (matrix, diagnostics, fallback) = match estimate(id, &panel, start..start + len) {
        Ok(e) => (e.matrix, serde_json::to_value(&e.diagnostics)?, false),
        Err(Error::AllEigenvaluesClipped { lambda_max, fallback }) => {
            log::warn!("{id}: every eigenvalue below {lambda_max}; writing the diagonal fallback");
            (*fallback, json!({ "lambda_max": lambda_max, "all_clipped": true }), true)
        }
        Err(e) => return Err(e.into()),
    };
    let mut echo = c.data_echo();
    echo.push(("estimator".into(), id.to_string()));
    echo.push(("window_start".into(), start.to_string()));
    echo.push(("window_len".into(), len.to_string()));

    let cov_path = c.out.join(format!("covariance_{id}.csv"));
    write_labelled_matrix(&cov_path, &echo, panel.tickers(), &matrix)?;
    let diag_path = c.out.join(format!("diagnostics_{id}.json"));
    let config: serde_json::Map<String, serde_json::Value> = echo.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    let doc = json!({
        "config": config,
        "estimator": id.as_str(),
        "window": { "start": start, "len": len, "first_date": panel.dates()[start], "last_date": panel.dates()[start + len - 1] },
        "n_assets": panel.n_assets(),
        "diagnostics": diagnostics,
    });
    let mut w = create(&diag_path)?;
    serde_json::to_writer_pretty(&mut w, &doc)?;
    writeln!(w)?;
    w.flush()?;
    println!("wrote {} and {}", cov_path.display(), diag_path.display());
    Ok(if fallback { 2 } else { 0 })
}

fn cmd_backtest(c: &Campaign) -> CliResult<u8> {
    let panel = c.load_returns()?;
    log::info!(
        "{} assets × {} days, {} estimators, horizons {:?}",
        panel.n_assets(),
        panel.n_days(),
        c.backtest.estimators.len(),
        c.backtest.horizons
    );
    let report = run_backtest(&panel, &c.backtest, c.workers)?;
    let written = write_all(&c.out, &c.echo(), &report.results, &report.failures)?;
    println!(
        "{} window results, {} failed windows, {} cells; wrote {} files to {}",
        report.results.len(),
        report.failures.len(),
        report.summaries.len(),
        written.len(),
        c.out.display()
    );
    Ok(if report.failures.is_empty() { 0 } else { 2 })
}

fn cmd_report(c: &Campaign, windows: Option<PathBuf>) -> CliResult<u8> {
    let path = windows.unwrap_or_else(|| c.out.join(WINDOWS_FILE));
    let f = File::open(&path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let table = read_window_csv(f)?;
    let written = write_derived(&c.out, &table.echo, &table.results, &table.failures)?;
    println!("re-rendered {} files into {}", written.len(), c.out.display());
    Ok(if table.failures.is_empty() { 0 } else { 2 })
}

fn run(cli: Cli) -> CliResult<u8> {
    let campaign = Campaign::from_settings(&cli.flags.settings()?)?;
    match cli.command {
        Command::Generate => cmd_generate(&campaign),
        Command::Estimate { start, len } => cmd_estimate(&campaign, start, len),
        Command::Backtest => cmd_backtest(&campaign),
        Command::Report { windows } => cmd_report(&campaign, windows),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
