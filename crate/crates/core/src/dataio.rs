//! Price-series ingestion, synthetic price generation, and schedule output.
//!
//! # Formats
//!
//! Price files are CSV with a header of either `timestamp,buy,sell` or
//! `timestamp,price` (sell derived as `eta * price`). Timestamps are RFC 3339
//! instants, strictly increasing and uniformly spaced.
//!
//! Schedule files are CSV with columns
//! `t,timestamp,buy,sell,mu,x,level,action`, one row per period, where
//! `level` is the level at the end of the period and `action` is `buy`,
//! `sell` or `hold`. Numbers are written in shortest round-trip form, so a
//! written file re-reads bit-for-bit.
//!
//! The JSON summary carries `schema_version: 1`.
//!
//! # Synthetic prices
//!
//! [`generate_prices`] produces 48 periods per day:
//! `base - daily*cos(2*pi*h/48) + weekly*sin(2*pi*t/336) + noise`, floored at
//! 5% of `base`, with `sell = eta * buy`. Noise is Gaussian with standard
//! deviation `noise`, drawn from ChaCha8 seeded by `seed` (rand_chacha's
//! `seed_from_u64`), so a seed fixes the series on every platform.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{DateTime, FixedOffset, TimeDelta};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{MuCertificate, Schedule, SegmentEnd};

pub const PERIODS_PER_DAY: usize = 48;
pub const SCHEMA_VERSION: u32 = 1;

/// Start of every synthetic series (a Sunday, midnight UTC).
pub const SYNTHETIC_EPOCH: &str = "2024-01-07T00:00:00Z";

pub fn default_period() -> TimeDelta {
    TimeDelta::minutes(30)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceRecord {
    pub timestamp: DateTime<FixedOffset>,
    pub buy: f64,
    pub sell: f64,
}

/// Uniformly spaced buy/sell prices, one record per period.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    period: TimeDelta,
    records: Vec<PriceRecord>,
}

impl PriceSeries {
    pub fn new(records: Vec<PriceRecord>, period: TimeDelta) -> Result<Self> {
        validate_records(&records, period, |i| Some(i as u64 + 1))?;
        Ok(Self { period, records })
    }

    pub fn period(&self) -> TimeDelta {
        self.period
    }

    pub fn records(&self) -> &[PriceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Copy with every sell price multiplied by `eta`.
    pub fn with_sell_scaled(&self, eta: f64) -> Self {
        Self {
            period: self.period,
            records: self
                .records
                .iter()
                .map(|r| PriceRecord {
                    sell: r.sell * eta,
                    ..*r
                })
                .collect(),
        }
    }

    /// The first `n` periods.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            period: self.period,
            records: self.records[..n.min(self.records.len())].to_vec(),
        }
    }
}

fn validate_records(
    records: &[PriceRecord],
    period: TimeDelta,
    line_of: impl Fn(usize) -> Option<u64>,
) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Validation {
            line: None,
            msg: "price series is empty".into(),
        });
    }
    if period <= TimeDelta::zero() {
        return Err(Error::Validation {
            line: None,
            msg: "period length must be positive".into(),
        });
    }
    for (i, r) in records.iter().enumerate() {
        if !(r.buy.is_finite() && r.sell.is_finite()) {
            return Err(Error::Validation {
                line: line_of(i),
                msg: "prices must be finite".into(),
            });
        }
        if r.buy < r.sell {
            return Err(Error::Validation {
                line: line_of(i),
                msg: format!("buy price {} below sell price {}", r.buy, r.sell),
            });
        }
        if i > 0 {
            let step = r.timestamp - records[i - 1].timestamp;
            if step <= TimeDelta::zero() {
                return Err(Error::Validation {
                    line: line_of(i),
                    msg: "timestamps must be strictly increasing".into(),
                });
            }
            if step != period {
                return Err(Error::Validation {
                    line: line_of(i),
                    msg: format!(
                        "gap of {} minutes, expected {}",
                        step.num_minutes(),
                        period.num_minutes()
                    ),
                });
            }
        }
    }
    Ok(())
}

/// Reads a price CSV. For single-price files `eta` derives the sell column;
/// it is ignored when the file carries both columns.
pub fn read_prices<R: Read>(source: R, eta: f64) -> Result<PriceSeries> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidEfficiency(eta));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    let two_column = match cols.as_slice() {
        ["timestamp", "buy", "sell"] => true,
        ["timestamp", "price"] => false,
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: format!(
                    "expected header `timestamp,buy,sell` or `timestamp,price`, got `{}`",
                    cols.join(",")
                ),
            })
        }
    };

    let mut records = Vec::new();
    let mut lines = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(e, 0))?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(i).unwrap_or("");
        let timestamp = DateTime::parse_from_rfc3339(field(0)).map_err(|e| Error::Parse {
            line,
            msg: format!("bad timestamp `{}`: {e}", field(0)),
        })?;
        let number = |i: usize| {
            f64::from_str(field(i)).map_err(|e| Error::Parse {
                line,
                msg: format!("bad number `{}`: {e}", field(i)),
            })
        };
        let (buy, sell) = if two_column {
            (number(1)?, number(2)?)
        } else {
            let price = number(1)?;
            (price, eta * price)
        };
        records.push(PriceRecord {
            timestamp,
            buy,
            sell,
        });
        lines.push(line);
    }
    let period = match records.as_slice() {
        [a, b, ..] => b.timestamp - a.timestamp,
        _ => default_period(),
    };
    validate_records(&records, period, |i| lines.get(i).copied())?;
    Ok(PriceSeries { period, records })
}

fn csv_error(e: csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse {
            line,
            msg: format!("{kind:?}"),
        },
    }
}

pub fn write_prices<W: Write>(sink: W, prices: &PriceSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["timestamp", "buy", "sell"])
        .map_err(io_error)?;
    for r in prices.records() {
        w.write_record([
            r.timestamp.to_rfc3339(),
            r.buy.to_string(),
            r.sell.to_string(),
        ])
        .map_err(io_error)?;
    }
    w.flush()?;
    Ok(())
}

fn io_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Io(std::io::Error::other(format!("{kind:?}"))),
    }
}

/// Parameters of the synthetic daily-cycle price generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub days: u32,
    pub base: f64,
    pub daily_amplitude: f64,
    pub weekly_amplitude: f64,
    pub noise_std: f64,
    pub seed: u64,
    pub eta: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            days: 7,
            base: 50.0,
            daily_amplitude: 20.0,
            weekly_amplitude: 5.0,
            noise_std: 3.0,
            seed: 42,
            eta: 1.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation { line: None, msg });
        if self.days == 0 {
            return bad("synthetic series needs at least one day".into());
        }
        if !(self.base > 0.0 && self.base.is_finite()) {
            return bad(format!("base price must be positive, got {}", self.base));
        }
        for (name, v) in [
            ("daily amplitude", self.daily_amplitude),
            ("weekly amplitude", self.weekly_amplitude),
            ("noise", self.noise_std),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidEfficiency(self.eta));
        }
        Ok(())
    }
}

/// Parses `key=value` pairs separated by commas, e.g.
/// `days=7,base=50,daily=20,weekly=5,noise=3,seed=42,eta=0.75`. Missing keys
/// keep their defaults.
impl FromStr for SyntheticSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut spec = Self::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(|| Error::Parse {
                line: 0,
                msg: format!("expected key=value, got `{part}`"),
            })?;
            let num = || {
                value.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: 0,
                    msg: format!("bad value for `{key}`: {e}"),
                })
            };
            let int = || {
                value.trim().parse::<u64>().map_err(|e| Error::Parse {
                    line: 0,
                    msg: format!("bad value for `{key}`: {e}"),
                })
            };
            match key.trim() {
                "days" => {
                    spec.days = u32::try_from(int()?).map_err(|_| Error::Parse {
                        line: 0,
                        msg: "days out of range".into(),
                    })?
                }
                "base" => spec.base = num()?,
                "daily" => spec.daily_amplitude = num()?,
                "weekly" => spec.weekly_amplitude = num()?,
                "noise" => spec.noise_std = num()?,
                "seed" => spec.seed = int()?,
                "eta" => spec.eta = num()?,
                other => {
                    return Err(Error::Parse {
                        line: 0,
                        msg: format!("unknown synthetic key `{other}`"),
                    })
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

pub fn generate_prices(spec: &SyntheticSpec) -> Result<PriceSeries> {
    spec.validate()?;
    let epoch = DateTime::parse_from_rfc3339(SYNTHETIC_EPOCH).expect("valid epoch");
    let period = default_period();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::Validation {
        line: None,
        msg: e.to_string(),
    })?;
    let floor = 0.05 * spec.base;
    let n = spec.days as usize * PERIODS_PER_DAY;
    let week = (7 * PERIODS_PER_DAY) as f64;
    let records = (0..n)
        .map(|t| {
            let hour = (t % PERIODS_PER_DAY) as f64;
            let daily = -spec.daily_amplitude * (2.0 * PI * hour / PERIODS_PER_DAY as f64).cos();
            let weekly = spec.weekly_amplitude * (2.0 * PI * t as f64 / week).sin();
            let eps = if spec.noise_std > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            let buy = (spec.base + daily + weekly + eps).max(floor);
            PriceRecord {
                timestamp: epoch + period * t as i32,
                buy,
                sell: spec.eta * buy,
            }
        })
        .collect();
    PriceSeries::new(records, period)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Buy,
    Sell,
    Hold,
}

impl Action {
    pub fn of(x: f64, tol_x: f64) -> Self {
        if x > tol_x {
            Self::Buy
        } else if x < -tol_x {
            Self::Sell
        } else {
            Self::Hold
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Buy => "buy",
            Self::Sell => "sell",
            Self::Hold => "hold",
        }
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "buy" => Ok(Self::Buy),
            "sell" => Ok(Self::Sell),
            "hold" => Ok(Self::Hold),
            other => Err(Error::Parse {
                line: 0,
                msg: format!("unknown action `{other}`"),
            }),
        }
    }
}

pub const SCHEDULE_COLUMNS: [&str; 8] = [
    "t",
    "timestamp",
    "buy",
    "sell",
    "mu",
    "x",
    "level",
    "action",
];

/// Writes the per-period schedule CSV.
pub fn write_schedule<W: Write>(
    sink: W,
    schedule: &Schedule,
    certificate: &MuCertificate,
    prices: &PriceSeries,
    tol_x: f64,
) -> Result<()> {
    let horizon = schedule.horizon();
    if prices.len() != horizon || certificate.mu.len() != horizon {
        return Err(Error::Validation {
            line: None,
            msg: format!(
                "length mismatch: {horizon} flows, {} prices, {} multipliers",
                prices.len(),
                certificate.mu.len()
            ),
        });
    }
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(SCHEDULE_COLUMNS).map_err(io_error)?;
    for t in 1..=horizon {
        let r = &prices.records()[t - 1];
        let x = schedule.flows[t - 1];
        w.write_record([
            t.to_string(),
            r.timestamp.to_rfc3339(),
            r.buy.to_string(),
            r.sell.to_string(),
            certificate.mu[t - 1].to_string(),
            x.to_string(),
            schedule.levels[t].to_string(),
            Action::of(x, tol_x).as_str().to_string(),
        ])
        .map_err(io_error)?;
    }
    w.flush()?;
    Ok(())
}

/// A schedule CSV read back in.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleFile {
    pub schedule: Schedule,
    pub mu: Vec<f64>,
    pub prices: PriceSeries,
    pub actions: Vec<Action>,
}

/// Reads a schedule CSV. Levels and flows are taken verbatim from their
/// columns; `start_level` supplies `S_0`.
pub fn read_schedule<R: Read>(source: R, start_level: f64) -> Result<ScheduleFile> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    if headers.iter().collect::<Vec<_>>() != SCHEDULE_COLUMNS {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `{}`", SCHEDULE_COLUMNS.join(",")),
        });
    }
    let mut levels = vec![start_level];
    let mut flows = Vec::new();
    let mut mu = Vec::new();
    let mut records = Vec::new();
    let mut actions = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(e, 0))?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(i).unwrap_or("");
        let number = |i: usize| {
            f64::from_str(field(i)).map_err(|e| Error::Parse {
                line,
                msg: format!(
                    "bad number `{}` in column `{}`: {e}",
                    field(i),
                    SCHEDULE_COLUMNS[i]
                ),
            })
        };
        let t: usize = field(0).parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad period index `{}`", field(0)),
        })?;
        if t != flows.len() + 1 {
            return Err(Error::Validation {
                line: Some(line),
                msg: format!("expected period {}, got {t}", flows.len() + 1),
            });
        }
        let timestamp = DateTime::parse_from_rfc3339(field(1)).map_err(|e| Error::Parse {
            line,
            msg: format!("bad timestamp `{}`: {e}", field(1)),
        })?;
        records.push(PriceRecord {
            timestamp,
            buy: number(2)?,
            sell: number(3)?,
        });
        mu.push(number(4)?);
        flows.push(number(5)?);
        levels.push(number(6)?);
        actions.push(field(7).parse().map_err(|e: Error| match e {
            Error::Parse { msg, .. } => Error::Parse { line, msg },
            other => other,
        })?);
    }
    let period = match records.as_slice() {
        [a, b, ..] => b.timestamp - a.timestamp,
        _ => default_period(),
    };
    let prices = PriceSeries::new(records, period)?;
    Ok(ScheduleFile {
        schedule: Schedule { levels, flows },
        mu,
        prices,
        actions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PinLabel {
    Full,
    Empty,
    Terminal,
}

impl From<SegmentEnd> for PinLabel {
    fn from(e: SegmentEnd) -> Self {
        match e {
            SegmentEnd::Full => Self::Full,
            SegmentEnd::Empty => Self::Empty,
            SegmentEnd::Terminal => Self::Terminal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub start: usize,
    pub end: usize,
    pub mu: f64,
    pub pin: PinLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonStats {
    pub max: usize,
    pub mean: f64,
}

/// JSON run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub objective: f64,
    pub profit: f64,
    pub segments: Vec<SegmentSummary>,
    pub horizon_stats: HorizonStats,
}

impl Summary {
    pub fn new(objective: f64, certificate: &MuCertificate) -> Self {
        let (max, mean) = certificate.horizon_stats();
        Self {
            schema_version: SCHEMA_VERSION,
            objective,
            profit: -objective,
            segments: certificate
                .segments()
                .map(|s| SegmentSummary {
                    start: s.start,
                    end: s.end,
                    mu: s.mu,
                    pin: s.end_kind.into(),
                })
                .collect(),
            horizon_stats: HorizonStats { max, mean },
        }
    }
}

pub fn write_summary<W: Write>(mut sink: W, summary: &Summary) -> Result<()> {
    serde_json::to_writer_pretty(&mut sink, summary)?;
    sink.write_all(b"\n")?;
    Ok(())
}

pub fn read_summary<R: Read>(source: R) -> Result<Summary> {
    Ok(serde_json::from_reader(source)?)
}
