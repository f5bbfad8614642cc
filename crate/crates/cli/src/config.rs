use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use covlab::estimator::parse_estimator_list;
use covlab::market_data::{load_price_csv, to_returns};
use covlab::report::Echo;
use covlab::{BacktestConfig, ConstraintMode, ReturnPanel, SyntheticSpec};

pub type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

pub const KEYS: [&str; 20] = [
    "data",
    "out",
    "estimators",
    "horizons",
    "modes",
    "seed",
    "workers",
    "q",
    "days_per_year",
    "rank_tol",
    "restarts",
    "n_assets",
    "n_days",
    "factor_vol",
    "beta_min",
    "beta_max",
    "idio_vol_min",
    "idio_vol_max",
    "window_start",
    "window_len",
];

pub const SYNTHETIC: &str = "synthetic";

/// Reads `key = value` lines. Blank lines and `#` comments are ignored.
pub fn parse_config(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected `key = value`, got `{raw}`", lineno + 1))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(format!("config line {}: unknown key `{key}`; valid: {}", lineno + 1, KEYS.join(", ")).into());
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    parse_config(&text)
}

fn parse<T: FromStr>(key: &str, value: &str) -> CliResult<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| format!("invalid `{key}` value `{value}`: {e}").into())
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> CliResult<Vec<T>>
where
    T::Err: Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

/// Everything one invocation needs, after config file and flags are merged.
#[derive(Debug, Clone)]
pub struct Campaign {
    /// Price CSV path, or `None` for the synthetic generator.
    pub data: Option<PathBuf>,
    pub synthetic: SyntheticSpec,
    pub backtest: BacktestConfig,
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub window_start: Option<usize>,
    pub window_len: usize,
}

impl Campaign {
    pub fn from_settings(settings: &BTreeMap<String, String>) -> CliResult<Self> {
        let get = |k: &str| settings.get(k).map(String::as_str);
        let mut synthetic = SyntheticSpec::default();
        let mut backtest = BacktestConfig::default();

        let data = match get("data") {
            None | Some(SYNTHETIC) | Some("") => None,
            Some(path) => Some(PathBuf::from(path)),
        };
        if let Some(v) = get("estimators") {
            backtest.estimators = parse_estimator_list(v)?;
            if backtest.estimators.is_empty() {
                return Err("invalid parameter `estimators`: at least one estimator is required".into());
            }
        }
        if let Some(v) = get("horizons") {
            backtest.horizons = parse_list("horizons", v)?;
        }
        if let Some(v) = get("modes") {
            let mut modes: Vec<ConstraintMode> = Vec::new();
            for m in parse_list("modes", v)? {
                if !modes.contains(&m) {
                    modes.push(m);
                }
            }
            backtest.modes = modes;
        }
        if let Some(v) = get("q") {
            backtest.q = parse("q", v)?;
        }
        if let Some(v) = get("days_per_year") {
            backtest.days_per_year = parse("days_per_year", v)?;
        }
        if let Some(v) = get("rank_tol") {
            backtest.rank_tol = parse("rank_tol", v)?;
        }
        if let Some(v) = get("restarts") {
            backtest.restarts = if v == "none" {
                Vec::new()
            } else {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|pair| {
                        let (h, o) = pair
                            .split_once(':')
                            .ok_or_else(|| format!("invalid `restarts` entry `{pair}`: expected horizon:offset"))?;
                        Ok((parse("restarts", h)?, parse("restarts", o)?))
                    })
                    .collect::<CliResult<_>>()?
            };
        }
        backtest.validate()?;

        if let Some(v) = get("seed") {
            synthetic.seed = parse("seed", v)?;
        }
        if let Some(v) = get("n_assets") {
            synthetic.n_assets = parse("n_assets", v)?;
        }
        if let Some(v) = get("n_days") {
            synthetic.n_days = parse("n_days", v)?;
        }
        if let Some(v) = get("factor_vol") {
            synthetic.factor_vol = parse("factor_vol", v)?;
        }
        if let Some(v) = get("beta_min") {
            synthetic.beta_min = parse("beta_min", v)?;
        }
        if let Some(v) = get("beta_max") {
            synthetic.beta_max = parse("beta_max", v)?;
        }
        if let Some(v) = get("idio_vol_min") {
            synthetic.idio_vol_min = parse("idio_vol_min", v)?;
        }
        if let Some(v) = get("idio_vol_max") {
            synthetic.idio_vol_max = parse("idio_vol_max", v)?;
        }
        synthetic.validate()?;

        let workers = match get("workers") {
            Some(v) => {
                let w: usize = parse("workers", v)?;
                if w == 0 {
                    return Err("invalid parameter `workers`: must be at least 1".into());
                }
                Some(w)
            }
            None => None,
        };
        Ok(Self {
            data,
            synthetic,
            backtest,
            out: PathBuf::from(get("out").unwrap_or("out")),
            workers,
            window_start: get("window_start").map(|v| parse("window_start", v)).transpose()?,
            window_len: get("window_len").map(|v| parse("window_len", v)).transpose()?.unwrap_or(250),
        })
    }

    pub fn load_returns(&self) -> CliResult<ReturnPanel> {
        match &self.data {
            Some(path) => {
                let prices = load_price_csv(path).map_err(|e| format!("{}: {e}", path.display()))?;
                Ok(to_returns(&prices)?)
            }
            None => Ok(self.synthetic.generate()?.returns),
        }
    }

    /// Settings that determine the data, echoed ahead of every output.
    pub fn data_echo(&self) -> Echo {
        match &self.data {
            Some(path) => vec![("data".into(), path.display().to_string())],
            None => {
                let s = &self.synthetic;
                vec![
                    ("data".into(), SYNTHETIC.into()),
                    ("seed".into(), s.seed.to_string()),
                    ("n_assets".into(), s.n_assets.to_string()),
                    ("n_days".into(), s.n_days.to_string()),
                    ("factor_vol".into(), s.factor_vol.to_string()),
                    ("beta_min".into(), s.beta_min.to_string()),
                    ("beta_max".into(), s.beta_max.to_string()),
                    ("idio_vol_min".into(), s.idio_vol_min.to_string()),
                    ("idio_vol_max".into(), s.idio_vol_max.to_string()),
                ]
            }
        }
    }

    pub fn echo(&self) -> Echo {
        let mut echo = self.data_echo();
        echo.extend(self.backtest.echo());
        echo
    }
}
