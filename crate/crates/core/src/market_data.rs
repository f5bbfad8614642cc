//! Price/return panels: CSV ingestion, a seeded one-factor generator, and
//! the back-to-back estimation/holding window schedule.

use std::fs::File;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;

/// Column header that marks the reference index series in a price CSV.
pub const INDEX_COLUMN: &str = "index";

/// Trading-day approximations of 1, 2, 3, 6, 9, 12 and 24 months.
pub const STANDARD_HORIZONS: [usize; 7] = [20, 40, 60, 125, 187, 250, 500];

/// Close prices, one row per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    pub tickers: Vec<String>,
    pub dates: Vec<String>,
    pub prices: Vec<Vec<f64>>,
    pub index_prices: Option<Vec<f64>>,
}

impl PricePanel {
    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    /// Writes `date,<tickers...>[,index]` with one row per day.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["date".to_string()];
        header.extend(self.tickers.iter().cloned());
        if self.index_prices.is_some() {
            header.push(INDEX_COLUMN.to_string());
        }
        out.write_record(&header)?;
        for (t, date) in self.dates.iter().enumerate() {
            let mut record = vec![date.clone()];
            record.extend(self.prices.iter().map(|p| p[t].to_string()));
            if let Some(idx) = &self.index_prices {
                record.push(idx[t].to_string());
            }
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Daily simple returns, one row per asset, plus an optional index series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnPanel {
    tickers: Vec<String>,
    dates: Vec<String>,
    returns: Vec<Vec<f64>>,
    index_returns: Option<Vec<f64>>,
}

impl ReturnPanel {
    pub fn new(
        tickers: Vec<String>,
        dates: Vec<String>,
        returns: Vec<Vec<f64>>,
        index_returns: Option<Vec<f64>>,
    ) -> Result<Self> {
        let l = dates.len();
        if l < 2 {
            return Err(Error::InvalidDimension(format!(
                "return panel needs at least 2 days, got {l}"
            )));
        }
        if tickers.len() != returns.len() {
            return Err(Error::DimensionMismatch {
                expected: tickers.len(),
                actual: returns.len(),
            });
        }
        let all_rows = returns.iter().chain(index_returns.iter());
        for (i, row) in all_rows.enumerate() {
            if row.len() != l {
                return Err(Error::DimensionMismatch {
                    expected: l,
                    actual: row.len(),
                });
            }
            if let Some(t) = row.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite { row: i, col: t });
            }
        }
        Ok(Self {
            tickers,
            dates,
            returns,
            index_returns,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn series(&self, asset: usize) -> &[f64] {
        &self.returns[asset]
    }

    pub fn index_returns(&self) -> Option<&[f64]> {
        self.index_returns.as_deref()
    }

    /// Slices of every asset's returns over `range`.
    pub fn window(&self, range: Range<usize>) -> Vec<&[f64]> {
        self.returns.iter().map(|r| &r[range.clone()]).collect()
    }

    pub fn index_window(&self, range: Range<usize>) -> Option<&[f64]> {
        self.index_returns.as_ref().map(|r| &r[range])
    }

    /// Compounds returns forward from `start` to rebuild a price panel whose
    /// first date is an extra leading day label.
    pub fn to_prices(&self, start: f64, first_date: &str) -> PricePanel {
        let compound = |r: &[f64]| {
            let mut p = Vec::with_capacity(r.len() + 1);
            p.push(start);
            for x in r {
                let last = *p.last().unwrap();
                p.push(last * (1.0 + x));
            }
            p
        };
        let mut dates = vec![first_date.to_string()];
        dates.extend(self.dates.iter().cloned());
        PricePanel {
            tickers: self.tickers.clone(),
            dates,
            prices: self.returns.iter().map(|r| compound(r)).collect(),
            index_prices: self.index_returns.as_deref().map(compound),
        }
    }
}

pub fn load_price_csv(path: impl AsRef<Path>) -> Result<PricePanel> {
    read_price_csv(File::open(path)?)
}

/// Parses a `date,<ticker>,...` price table. A column named `index` is
/// taken as the reference index rather than an asset. Lines starting with
/// `#` are skipped.
pub fn read_price_csv<R: Read>(reader: R) -> Result<PricePanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.first().map(|h| h.to_ascii_lowercase()) != Some("date".into()) {
        return Err(Error::InvalidDimension(
            "price csv header must start with `date`".into(),
        ));
    }
    let columns = &header[1..];
    if columns.is_empty() {
        return Err(Error::InvalidDimension("price csv has no tickers".into()));
    }
    let index_col = columns.iter().position(|c| c == INDEX_COLUMN);

    let mut dates: Vec<String> = Vec::new();
    let mut by_column: Vec<Vec<f64>> = vec![Vec::new(); columns.len()];
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let row = row + 1;
        let date = record.get(0).unwrap_or("").to_string();
        if date.is_empty() {
            return Err(Error::MissingCell {
                row,
                column: "date".into(),
            });
        }
        if let Some(previous) = dates.last() {
            if date.as_str() <= previous.as_str() {
                return Err(Error::UnsortedDates {
                    row,
                    previous: previous.clone(),
                    date,
                });
            }
        }
        for (c, name) in columns.iter().enumerate() {
            let cell = record.get(c + 1).unwrap_or("");
            if cell.is_empty() {
                return Err(Error::MissingCell {
                    row,
                    column: name.clone(),
                });
            }
            let value: f64 = cell.parse().map_err(|_| Error::Malformed {
                row,
                column: name.clone(),
                value: cell.to_string(),
            })?;
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositivePrice {
                    ticker: name.clone(),
                    date: date.clone(),
                    value,
                });
            }
            by_column[c].push(value);
        }
        dates.push(date);
    }

    let mut tickers = Vec::new();
    let mut prices = Vec::new();
    let mut index_prices = None;
    for (c, (name, series)) in columns.iter().zip(by_column).enumerate() {
        if Some(c) == index_col {
            index_prices = Some(series);
        } else {
            tickers.push(name.clone());
            prices.push(series);
        }
    }
    Ok(PricePanel {
        tickers,
        dates,
        prices,
        index_prices,
    })
}

/// Simple daily returns `p[t+1]/p[t] − 1`.
pub fn to_returns(panel: &PricePanel) -> Result<ReturnPanel> {
    let ratio = |p: &Vec<f64>| p.windows(2).map(|w| w[1] / w[0] - 1.0).collect::<Vec<_>>();
    ReturnPanel::new(
        panel.tickers.clone(),
        panel.dates.iter().skip(1).cloned().collect(),
        panel.prices.iter().map(ratio).collect(),
        panel.index_prices.as_ref().map(ratio),
    )
}

/// Weekday labels starting at 1997-01-02.
pub fn business_dates(n: usize) -> Vec<String> {
    let mut d = NaiveDate::from_ymd_opt(1997, 1, 2).expect("valid date");
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d.format("%Y-%m-%d").to_string());
        }
        d += Duration::days(1);
    }
    out
}

/// Draws `r_i(t) = β_i f(t) + ε_i(t)` with Gaussian factor and noise.
/// The factor series becomes the panel's index.
pub fn synthesize_factor_panel(
    n_assets: usize,
    n_days: usize,
    betas: &[f64],
    factor_vol: f64,
    idio_vols: &[f64],
    seed: u64,
) -> Result<ReturnPanel> {
    if n_assets == 0 || n_days < 2 {
        return Err(Error::InvalidDimension(format!(
            "need at least one asset and two days, got {n_assets}×{n_days}"
        )));
    }
    if betas.len() != n_assets || idio_vols.len() != n_assets {
        return Err(Error::InvalidDimension(format!(
            "expected {n_assets} betas and idiosyncratic vols, got {} and {}",
            betas.len(),
            idio_vols.len()
        )));
    }
    if !(factor_vol >= 0.0) || !factor_vol.is_finite() {
        return Err(Error::InvalidParameter {
            name: "factor_vol".into(),
            reason: format!("must be a non-negative number, got {factor_vol}"),
        });
    }
    if let Some(v) = idio_vols.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "idio_vol".into(),
            reason: format!("must be a non-negative number, got {v}"),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut returns = vec![Vec::with_capacity(n_days); n_assets];
    let mut factor = Vec::with_capacity(n_days);
    for _ in 0..n_days {
        let z: f64 = StandardNormal.sample(&mut rng);
        let f = factor_vol * z;
        factor.push(f);
        for (i, row) in returns.iter_mut().enumerate() {
            let eps: f64 = StandardNormal.sample(&mut rng);
            row.push(betas[i] * f + idio_vols[i] * eps);
        }
    }
    let tickers = (0..n_assets).map(|i| format!("A{i:03}")).collect();
    ReturnPanel::new(tickers, business_dates(n_days), returns, Some(factor))
}

/// Population covariance of the one-factor model.
pub fn factor_model_covariance(betas: &[f64], factor_vol: f64, idio_vols: &[f64]) -> SymmetricMatrix {
    let var_f = factor_vol * factor_vol;
    SymmetricMatrix::from_fn(betas.len(), |i, j| {
        let common = var_f * betas[i] * betas[j];
        if i == j {
            common + idio_vols[i] * idio_vols[i]
        } else {
            common
        }
    })
}

/// Parameter ranges for a synthetic one-factor panel. Betas and
/// idiosyncratic vols are drawn uniformly from their ranges with the same
/// seed that drives the return draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_assets: usize,
    pub n_days: usize,
    pub factor_vol: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub idio_vol_min: f64,
    pub idio_vol_max: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_assets: 90,
            n_days: 2761,
            factor_vol: 0.01,
            beta_min: 0.5,
            beta_max: 1.5,
            idio_vol_min: 0.01,
            idio_vol_max: 0.025,
            seed: 42,
        }
    }
}

/// A generated panel together with the model that produced it.
#[derive(Debug, Clone)]
pub struct SyntheticPanel {
    pub returns: ReturnPanel,
    pub betas: Vec<f64>,
    pub idio_vols: Vec<f64>,
    pub true_covariance: SymmetricMatrix,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, ok: bool, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name: name.into(),
                    reason: reason.into(),
                })
            }
        };
        check("n_assets", self.n_assets >= 1, "must be at least 1")?;
        check("n_days", self.n_days >= 2, "must be at least 2")?;
        check("factor_vol", self.factor_vol >= 0.0, "must be non-negative")?;
        check("beta_min", self.beta_min.is_finite(), "must be finite")?;
        check("beta_max", self.beta_max >= self.beta_min, "must be >= beta_min")?;
        check("idio_vol_min", self.idio_vol_min >= 0.0, "must be non-negative")?;
        check(
            "idio_vol_max",
            self.idio_vol_max >= self.idio_vol_min,
            "must be >= idio_vol_min",
        )
    }

    pub fn generate(&self) -> Result<SyntheticPanel> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x9e37_79b9_7f4a_7c15);
        let draw = |lo: f64, hi: f64, rng: &mut ChaCha8Rng| {
            if hi > lo {
                Uniform::new(lo, hi).expect("valid range").sample(rng)
            } else {
                lo
            }
        };
        let betas: Vec<f64> = (0..self.n_assets)
            .map(|_| draw(self.beta_min, self.beta_max, &mut rng))
            .collect();
        let idio_vols: Vec<f64> = (0..self.n_assets)
            .map(|_| draw(self.idio_vol_min, self.idio_vol_max, &mut rng))
            .collect();
        let returns = synthesize_factor_panel(
            self.n_assets,
            self.n_days,
            &betas,
            self.factor_vol,
            &idio_vols,
            self.seed,
        )?;
        let true_covariance = factor_model_covariance(&betas, self.factor_vol, &idio_vols);
        Ok(SyntheticPanel {
            returns,
            betas,
            idio_vols,
            true_covariance,
        })
    }
}

/// One estimation window followed immediately by an equally long holding window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPair {
    pub estimation: Range<usize>,
    pub holding: Range<usize>,
    /// First holding day (the rebalancing date).
    pub t0: usize,
}

impl WindowPair {
    pub fn len(&self) -> usize {
        self.estimation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimation.is_empty()
    }
}

/// Back-to-back, non-overlapping window pairs of length `window` starting at
/// `offset`: `floor((n_days − offset)/window) − 1` of them.
pub fn make_windows(n_days: usize, window: usize, offset: usize) -> Result<Vec<WindowPair>> {
    if window < 2 {
        return Err(Error::InvalidParameter {
            name: "window".into(),
            reason: format!("must be at least 2, got {window}"),
        });
    }
    let blocks = n_days.saturating_sub(offset) / window;
    if blocks < 2 {
        return Err(Error::WindowTooLong {
            window,
            available: n_days,
            offset,
        });
    }
    Ok((0..blocks - 1)
        .map(|k| {
            let start = offset + k * window;
            let t0 = start + window;
            WindowPair {
                estimation: start..t0,
                holding: t0..t0 + window,
                t0,
            }
        })
        .collect())
}
