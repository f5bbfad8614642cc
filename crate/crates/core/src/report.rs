//! Report files: per-window CSV (the raw record, re-readable), summary
//! tables, JSON with full test detail, and plot-ready series.
//!
//! Every file starts with the campaign settings as `# key = value` lines.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::backtest::{summarize, BacktestConfig, CellSummary, MeanSe, WindowFailure, WindowResult};
use crate::error::{Error, Result};
use crate::stats::TTest;

pub const WINDOWS_FILE: &str = "windows.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const JSON_FILE: &str = "report.json";
pub const PLOT_RISK_FILE: &str = "plot_risk_vs_horizon.csv";
pub const PLOT_TIMESERIES_FILE: &str = "plot_risk_timeseries.csv";
pub const PLOT_SHORT_FILE: &str = "plot_short_ratio_vs_horizon.csv";

/// Ordered `key = value` settings echoed into every output.
pub type Echo = Vec<(String, String)>;

impl BacktestConfig {
    pub fn echo(&self) -> Echo {
        let join = |v: Vec<String>| v.join(",");
        vec![
            (
                "estimators".into(),
                join(self.estimators.iter().map(|e| e.to_string()).collect()),
            ),
            (
                "horizons".into(),
                join(self.horizons.iter().map(|h| h.to_string()).collect()),
            ),
            (
                "modes".into(),
                join(self.modes.iter().map(|m| m.to_string()).collect()),
            ),
            ("q".into(), self.q.to_string()),
            ("days_per_year".into(), self.days_per_year.to_string()),
            (
                "restarts".into(),
                join(self.restarts.iter().map(|(h, o)| format!("{h}:{o}")).collect()),
            ),
            ("rank_tol".into(), self.rank_tol.to_string()),
        ]
    }
}

fn write_echo<W: Write>(w: &mut W, echo: &Echo) -> Result<()> {
    for (k, v) in echo {
        writeln!(w, "# {k} = {v}")?;
    }
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

const WINDOW_COLUMNS: [&str; 17] = [
    "estimator",
    "mode",
    "horizon",
    "t0",
    "status",
    "predicted_risk",
    "realized_risk",
    "reliability_abs",
    "reliability_rel",
    "n_eff",
    "n_q",
    "short_ratio",
    "alpha",
    "iterations",
    "kkt_residual",
    "weights",
    "reason",
];

/// One row per window and estimator; failed windows carry the reason.
/// Weights are one `;`-separated column.
pub fn write_window_csv<W: Write>(
    mut w: W,
    echo: &Echo,
    results: &[WindowResult],
    failures: &[WindowFailure],
) -> Result<()> {
    write_echo(&mut w, echo)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(WINDOW_COLUMNS)?;
    for r in results {
        let weights: Vec<String> = r.weights.iter().map(|x| x.to_string()).collect();
        out.write_record([
            r.estimator.to_string(),
            r.mode.to_string(),
            r.horizon.to_string(),
            r.t0.to_string(),
            "ok".into(),
            r.predicted_risk.to_string(),
            r.realized_risk.to_string(),
            r.reliability_abs.to_string(),
            r.reliability_rel.to_string(),
            r.n_eff.to_string(),
            r.n_q.to_string(),
            r.short_ratio.to_string(),
            opt(r.alpha),
            r.iterations.to_string(),
            r.kkt_residual.to_string(),
            weights.join(";"),
            String::new(),
        ])?;
    }
    for f in failures {
        let mut row = vec![
            f.estimator.to_string(),
            f.mode.to_string(),
            f.horizon.to_string(),
            f.t0.to_string(),
            "failed".into(),
        ];
        row.extend(std::iter::repeat_n(String::new(), 11));
        row.push(f.reason.clone());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Contents of a per-window CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowTable {
    pub echo: Echo,
    pub results: Vec<WindowResult>,
    pub failures: Vec<WindowFailure>,
}

pub fn read_window_csv<R: Read>(mut r: R) -> Result<WindowTable> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let echo: Echo = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| {
            let (k, v) = l.trim_start_matches('#').split_once('=')?;
            Some((k.trim().to_string(), v.trim().to_string()))
        })
        .collect();

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.iter().ne(WINDOW_COLUMNS) {
        return Err(Error::Malformed {
            row: 0,
            column: "header".into(),
            value: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = k + 1;
        let field = |i: usize| rec.get(i).unwrap_or("");
        fn parse<T: std::str::FromStr>(s: &str, row: usize, col: &str) -> Result<T> {
            s.parse().map_err(|_| Error::Malformed {
                row,
                column: col.into(),
                value: s.into(),
            })
        }
        let num = |i: usize| parse::<f64>(field(i), row, WINDOW_COLUMNS[i]);
        let int = |i: usize| parse::<usize>(field(i), row, WINDOW_COLUMNS[i]);
        let estimator = field(0).parse()?;
        let mode = field(1).parse()?;
        let horizon = int(2)?;
        let t0 = int(3)?;
        match field(4) {
            "ok" => {
                let alpha = match field(12) {
                    "" => None,
                    _ => Some(num(12)?),
                };
                let weights = field(15)
                    .split(';')
                    .map(|s| parse::<f64>(s, row, "weights"))
                    .collect::<Result<Vec<_>>>()?;
                results.push(WindowResult {
                    estimator,
                    mode,
                    horizon,
                    t0,
                    predicted_risk: num(5)?,
                    realized_risk: num(6)?,
                    reliability_abs: num(7)?,
                    reliability_rel: num(8)?,
                    n_eff: num(9)?,
                    n_q: int(10)?,
                    short_ratio: num(11)?,
                    alpha,
                    iterations: int(13)?,
                    kkt_residual: num(14)?,
                    weights,
                });
            }
            "failed" => failures.push(WindowFailure {
                estimator,
                mode,
                horizon,
                t0,
                reason: field(16).to_string(),
            }),
            other => {
                return Err(Error::Malformed {
                    row,
                    column: "status".into(),
                    value: other.into(),
                })
            }
        }
    }
    Ok(WindowTable {
        echo,
        results,
        failures,
    })
}

fn mean_se_cells(m: Option<&MeanSe>) -> [String; 2] {
    match m {
        Some(m) => [m.mean.to_string(), m.se.to_string()],
        None => [String::new(), String::new()],
    }
}

fn test_cells(t: Option<&TTest>) -> [String; 3] {
    match t {
        Some(t) => [t.t.to_string(), t.p_value.to_string(), t.stars.clone()],
        None => [String::new(), String::new(), String::new()],
    }
}

/// Table layout: one row per estimator in group order, mean and standard
/// error for each metric, then t statistic, p-value and stars per test.
pub fn write_summary_csv<W: Write>(mut w: W, echo: &Echo, summaries: &[CellSummary]) -> Result<()> {
    write_echo(&mut w, echo)?;
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = ["mode", "horizon", "group", "estimator", "n_windows", "n_failed"]
        .map(String::from)
        .to_vec();
    for m in [
        "predicted_risk",
        "realized_risk",
        "relative_risk",
        "reliability_abs",
        "reliability_rel",
        "n_eff",
        "n_q",
        "short_ratio",
        "alpha",
    ] {
        header.push(m.to_string());
        header.push(format!("{m}_se"));
    }
    for t in ["risk", "reliability", "n_eff"] {
        header.push(format!("{t}_t"));
        header.push(format!("{t}_p"));
        header.push(format!("{t}_stars"));
    }
    out.write_record(&header)?;
    for s in summaries {
        let mut row = vec![
            s.mode.to_string(),
            s.horizon.to_string(),
            s.estimator.group().to_string(),
            s.estimator.to_string(),
            s.n_windows.to_string(),
            s.n_failed.to_string(),
        ];
        for m in [
            Some(&s.predicted_risk),
            Some(&s.realized_risk),
            s.relative_risk.as_ref(),
            Some(&s.reliability_abs),
            Some(&s.reliability_rel),
            Some(&s.n_eff),
            Some(&s.n_q),
            Some(&s.short_ratio),
            s.alpha.as_ref(),
        ] {
            row.extend(mean_se_cells(m));
        }
        for t in [&s.risk_test, &s.reliability_test, &s.n_eff_test] {
            row.extend(test_cells(t.as_ref()));
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonReport<'a> {
    metadata: JsonMetadata<'a>,
    summaries: &'a [CellSummary],
    failures: &'a [WindowFailure],
}

#[derive(Serialize)]
struct JsonMetadata<'a> {
    settings: BTreeMap<&'a str, &'a str>,
    t_test: &'static str,
    risk_units: &'static str,
    n_results: usize,
    n_failures: usize,
}

pub fn write_json<W: Write>(
    w: W,
    echo: &Echo,
    n_results: usize,
    summaries: &[CellSummary],
    failures: &[WindowFailure],
) -> Result<()> {
    let report = JsonReport {
        metadata: JsonMetadata {
            settings: echo.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect(),
            t_test: "two-sided",
            risk_units: "annualized percent",
            n_results,
            n_failures: failures.len(),
        },
        summaries,
        failures,
    };
    serde_json::to_writer_pretty(w, &report)?;
    Ok(())
}

/// `(mode, estimator, horizon, mean, se)` for one metric.
fn write_by_horizon<W: Write>(
    mut w: W,
    echo: &Echo,
    column: &str,
    summaries: &[CellSummary],
    metric: fn(&CellSummary) -> MeanSe,
) -> Result<()> {
    write_echo(&mut w, echo)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["mode", "estimator", "horizon", column, &format!("{column}_se")])?;
    let mut rows: Vec<&CellSummary> = summaries.iter().collect();
    rows.sort_by_key(|s| (s.mode, s.estimator.rank(), s.horizon));
    for s in rows {
        let m = metric(s);
        out.write_record([
            s.mode.to_string(),
            s.estimator.to_string(),
            s.horizon.to_string(),
            m.mean.to_string(),
            m.se.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Realized risk of every window against its rebalancing day.
fn write_timeseries<W: Write>(mut w: W, echo: &Echo, results: &[WindowResult]) -> Result<()> {
    write_echo(&mut w, echo)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["mode", "horizon", "estimator", "t0", "realized_risk"])?;
    let mut rows: Vec<&WindowResult> = results.iter().collect();
    rows.sort_by_key(|r| (r.mode, r.horizon, r.estimator.rank(), r.t0));
    for r in rows {
        out.write_record([
            r.mode.to_string(),
            r.horizon.to_string(),
            r.estimator.to_string(),
            r.t0.to_string(),
            r.realized_risk.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Name of the per-(mode, horizon) table, e.g. `summary_long_only_T250.csv`.
pub fn cell_summary_file(mode: &str, horizon: usize) -> String {
    format!("summary_{mode}_T{horizon}.csv")
}

/// Writes everything derived from the window table into `dir` and returns
/// the paths written.
pub fn write_derived(dir: &Path, echo: &Echo, results: &[WindowResult], failures: &[WindowFailure]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let summaries = summarize(results, failures);
    let mut written = Vec::new();
    let mut record = |name: String| written.push(dir.join(name));

    let mut f = create(dir, SUMMARY_FILE)?;
    write_summary_csv(&mut f, echo, &summaries)?;
    f.flush()?;
    record(SUMMARY_FILE.into());

    let mut cells: BTreeMap<(crate::optimizer::ConstraintMode, usize), Vec<CellSummary>> = BTreeMap::new();
    for s in &summaries {
        cells.entry((s.mode, s.horizon)).or_default().push(s.clone());
    }
    for ((mode, horizon), rows) in &cells {
        let name = cell_summary_file(mode.as_str(), *horizon);
        let mut f = create(dir, &name)?;
        write_summary_csv(&mut f, echo, rows)?;
        f.flush()?;
        record(name);
    }

    let mut f = create(dir, JSON_FILE)?;
    write_json(&mut f, echo, results.len(), &summaries, failures)?;
    f.flush()?;
    record(JSON_FILE.into());

    let mut f = create(dir, PLOT_RISK_FILE)?;
    write_by_horizon(&mut f, echo, "realized_risk", &summaries, |s| s.realized_risk)?;
    f.flush()?;
    record(PLOT_RISK_FILE.into());

    let mut f = create(dir, PLOT_SHORT_FILE)?;
    write_by_horizon(&mut f, echo, "short_ratio", &summaries, |s| s.short_ratio)?;
    f.flush()?;
    record(PLOT_SHORT_FILE.into());

    let mut f = create(dir, PLOT_TIMESERIES_FILE)?;
    write_timeseries(&mut f, echo, results)?;
    f.flush()?;
    record(PLOT_TIMESERIES_FILE.into());

    Ok(written)
}

/// Per-window CSV plus everything derived from it.
pub fn write_all(dir: &Path, echo: &Echo, results: &[WindowResult], failures: &[WindowFailure]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut f = create(dir, WINDOWS_FILE)?;
    write_window_csv(&mut f, echo, results, failures)?;
    f.flush()?;
    let mut written = vec![dir.join(WINDOWS_FILE)];
    written.extend(write_derived(dir, echo, results, failures)?);
    Ok(written)
}
