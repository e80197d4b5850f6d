//! Return and price series: ingestion, cleaning, persistence.
//!
//! Zero returns are removed at ingestion and counted, so every downstream
//! statistic sees nonzero values only. Dates are optional; all statistics
//! are order-based.

use std::fmt;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding;

/// Whether stored returns are simple (p_t/p_{t-1} - 1) or log returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReturnKind {
    #[default]
    Simple,
    Log,
}

impl fmt::Display for ReturnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReturnKind::Simple => write!(f, "simple"),
            ReturnKind::Log => write!(f, "log"),
        }
    }
}

/// Dated sequence of nonzero daily returns with provenance metadata.
#[derive(Debug, Clone)]
pub struct ReturnSeries {
    values: Vec<f64>,
    dates: Option<Vec<NaiveDate>>,
    pub source_label: String,
    pub zeros_removed: usize,
    pub kind: ReturnKind,
}

impl ReturnSeries {
    /// Build a series from already-clean values. Fails on zero or non-finite
    /// entries, empty input or non-increasing dates. (A single price pair
    /// yields a one-return series, so nonempty is the structural floor;
    /// statistics impose their own length preconditions.)
    pub fn new(
        values: Vec<f64>,
        dates: Option<Vec<NaiveDate>>,
        source_label: impl Into<String>,
        zeros_removed: usize,
        kind: ReturnKind,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite return at index {i}")));
            }
            if *v == 0.0 {
                return Err(Error::invalid(format!("zero return at index {i}")));
            }
        }
        if let Some(d) = &dates {
            if d.len() != values.len() {
                return Err(Error::LengthMismatch {
                    left: d.len(),
                    right: values.len(),
                });
            }
            if d.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid("dates not strictly increasing"));
            }
        }
        Ok(Self {
            values,
            dates,
            source_label: source_label.into(),
            zeros_removed,
            kind,
        })
    }

    /// Build from raw values: zeros are dropped (and counted), non-finite
    /// values are rejected.
    pub fn from_raw(
        values: Vec<f64>,
        dates: Option<Vec<NaiveDate>>,
        source_label: impl Into<String>,
        kind: ReturnKind,
    ) -> Result<Self> {
        if let Some(d) = &dates {
            if d.len() != values.len() {
                return Err(Error::LengthMismatch {
                    left: d.len(),
                    right: values.len(),
                });
            }
        }
        let mut kept = Vec::with_capacity(values.len());
        let mut kept_dates = dates.as_ref().map(|_| Vec::with_capacity(values.len()));
        let mut zeros = 0usize;
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite return at index {i}")));
            }
            if *v == 0.0 {
                zeros += 1;
                continue;
            }
            kept.push(*v);
            if let (Some(kd), Some(d)) = (&mut kept_dates, &dates) {
                kd.push(d[i]);
            }
        }
        Self::new(kept, kept_dates, source_label, zeros, kind)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dates(&self) -> Option<&[NaiveDate]> {
        self.dates.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Positive price path, optionally dated.
#[derive(Debug, Clone)]
pub struct PriceSeries {
    prices: Vec<f64>,
    dates: Option<Vec<NaiveDate>>,
    pub source_label: String,
}

impl PriceSeries {
    pub fn new(
        prices: Vec<f64>,
        dates: Option<Vec<NaiveDate>>,
        source_label: impl Into<String>,
    ) -> Result<Self> {
        if prices.len() < 2 {
            return Err(Error::EmptySeries);
        }
        for (i, p) in prices.iter().enumerate() {
            if !p.is_finite() || *p <= 0.0 {
                return Err(Error::invalid(format!("non-positive price at index {i}")));
            }
        }
        if let Some(d) = &dates {
            if d.len() != prices.len() {
                return Err(Error::LengthMismatch {
                    left: d.len(),
                    right: prices.len(),
                });
            }
            if d.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid("dates not strictly increasing"));
            }
        }
        Ok(Self {
            prices,
            dates,
            source_label: source_label.into(),
        })
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// Convert prices to returns; zero returns are dropped and counted.
pub fn to_returns(prices: &PriceSeries, kind: ReturnKind) -> Result<ReturnSeries> {
    let p = prices.prices();
    let mut vals = Vec::with_capacity(p.len() - 1);
    for w in p.windows(2) {
        let r = match kind {
            ReturnKind::Simple => w[1] / w[0] - 1.0,
            ReturnKind::Log => (w[1] / w[0]).ln(),
        };
        vals.push(r);
    }
    // return at step t carries the date of the later price
    let dates = prices.dates.as_ref().map(|d| d[1..].to_vec());
    ReturnSeries::from_raw(vals, dates, prices.source_label.clone(), kind)
}

/// Cyclic rotation by a uniform random offset: embeds the observed stretch
/// in a stationary process by periodic extension with a random origin.
/// Dates are dropped (a rotation has no calendar meaning).
pub fn stationary_embed(series: &ReturnSeries, seed: u64) -> ReturnSeries {
    let n = series.len();
    let mut rng = seeding::rng_for(seed, &[0x0e]);
    let offset = rng.random_range(0..n);
    let mut vals = Vec::with_capacity(n);
    vals.extend_from_slice(&series.values[offset..]);
    vals.extend_from_slice(&series.values[..offset]);
    ReturnSeries {
        values: vals,
        dates: None,
        source_label: format!("{}[embed+{}]", series.source_label, offset),
        zeros_removed: series.zeros_removed,
        kind: series.kind,
    }
}

/// CSV layout expected by `load_series`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadFormat {
    /// Decide from the header names.
    #[default]
    Auto,
    Returns,
    Prices,
}

#[derive(Debug, Clone)]
pub struct CsvSpec {
    pub format: LoadFormat,
    pub delimiter: u8,
}

impl Default for CsvSpec {
    fn default() -> Self {
        Self {
            format: LoadFormat::Auto,
            delimiter: b',',
        }
    }
}

#[derive(Debug, Clone)]
pub enum Loaded {
    Returns(ReturnSeries),
    Prices(PriceSeries),
}

const DATE_FORMATS: [&str; 3] = ["%Y-%m-%d", "%d.%m.%Y", "%m/%d/%Y"];

fn parse_date(s: &str, row: u64) -> Result<NaiveDate> {
    for f in DATE_FORMATS {
        if let Ok(d) = NaiveDate::parse_from_str(s, f) {
            return Ok(d);
        }
    }
    Err(Error::Parse {
        row,
        msg: format!("unparseable date {s:?}"),
    })
}

fn parse_num(s: &str, row: u64) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse {
        row,
        msg: format!("unparseable number {s:?}"),
    })
}

/// Load a CSV with a header row. Accepted layouts: single value column,
/// or (date, value). The value column is identified from the header
/// (`price`/`close` vs `return`/`ret`/`value`) unless the format is forced.
pub fn load_series(path: &Path, spec: &CsvSpec) -> Result<Loaded> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_path(path)?;

    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 1,
            msg: e.to_string(),
        })?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();

    let date_col = headers
        .iter()
        .position(|h| h.contains("date") || h.contains("day") || h == "time");
    let value_col = match headers.len() {
        0 => return Err(Error::EmptySeries),
        1 => 0,
        _ => {
            let named = headers.iter().position(|h| {
                h.contains("price") || h.contains("close") || h.contains("return") || h.contains("ret") || h == "value"
            });
            match named {
                Some(c) if Some(c) != date_col => c,
                _ => {
                    // fall back: the first non-date column
                    (0..headers.len())
                        .find(|c| Some(*c) != date_col)
                        .ok_or_else(|| Error::invalid("no value column found"))?
                }
            }
        }
    };

    let is_price = match spec.format {
        LoadFormat::Prices => true,
        LoadFormat::Returns => false,
        LoadFormat::Auto => {
            let h = &headers[value_col];
            if h.contains("price") || h.contains("close") {
                true
            } else if h.contains("return") || h.contains("ret") || h == "value" || headers.len() == 1 {
                false
            } else {
                return Err(Error::Config(format!(
                    "cannot infer series kind from header {h:?}; pass an explicit format"
                )));
            }
        }
    };

    let mut values = Vec::new();
    let mut dates: Option<Vec<NaiveDate>> = date_col.map(|_| Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            row: e
                .position()
                .map(|p| p.line())
                .unwrap_or(0),
            msg: e.to_string(),
        })?;
        let row = rec.position().map(|p| p.line()).unwrap_or(0);
        if let (Some(dc), Some(ds)) = (date_col, dates.as_mut()) {
            ds.push(parse_date(rec.get(dc).unwrap_or(""), row)?);
        }
        values.push(parse_num(rec.get(value_col).unwrap_or(""), row)?);
    }
    if values.is_empty() {
        return Err(Error::EmptySeries);
    }

    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".to_string());

    if is_price {
        Ok(Loaded::Prices(PriceSeries::new(values, dates, label)?))
    } else {
        Ok(Loaded::Returns(ReturnSeries::from_raw(
            values,
            dates,
            label,
            ReturnKind::Simple,
        )?))
    }
}

/// Persist a return series as CSV. Values are written with Rust's shortest
/// round-trip float formatting, so reloading yields bit-identical values.
pub fn save_returns(series: &ReturnSeries, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    match series.dates() {
        Some(dates) => {
            writeln!(f, "date,return")?;
            for (d, v) in dates.iter().zip(series.values()) {
                writeln!(f, "{d},{v}")?;
            }
        }
        None => {
            writeln!(f, "return")?;
            for v in series.values() {
                writeln!(f, "{v}")?;
            }
        }
    }
    f.flush()?;
    Ok(())
}

/// Persist a batch of simulated paths in long format (run_id,t,value).
pub fn save_runs_long(paths: &[ReturnSeries], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "run_id,t,value")?;
    for (run, s) in paths.iter().enumerate() {
        for (t, v) in s.values().iter().enumerate() {
            writeln!(f, "{},{},{}", run, t + 1, v)?;
        }
    }
    f.flush()?;
    Ok(())
}
