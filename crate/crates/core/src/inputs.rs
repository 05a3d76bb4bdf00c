//! Time series ingestion and the cost derivations behind the technology tables.
//!
//! Every sample of a [`TimeSeries`] stands for the average over `step_hours`
//! hours. Energy sums are therefore `Σ value · step_hours`, which keeps annual
//! totals comparable when a horizon is subsampled.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HOURS_PER_YEAR: f64 = 8760.0;

/// Physical unit attached to a series. Units are declared, never inferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Mw,
    Kw,
    Mwh,
    EurPerMwh,
    EurPerKwh,
    Fraction,
}

impl Unit {
    fn is_quantity(self) -> bool {
        matches!(self, Unit::Mw | Unit::Kw | Unit::Mwh)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    unit: Unit,
    step_hours: f64,
    start_index: usize,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, unit: Unit, step_hours: f64) -> Result<Self> {
        Self::with_start(values, unit, step_hours, 0)
    }

    pub fn with_start(
        values: Vec<f64>,
        unit: Unit,
        step_hours: f64,
        start_index: usize,
    ) -> Result<Self> {
        if !(step_hours.is_finite() && step_hours > 0.0) {
            return Err(Error::TimeSeries(format!(
                "step width must be positive, got {step_hours}"
            )));
        }
        // allow for rounding in the product, e.g. 2920 samples of 3 h
        if values.len() as f64 * step_hours > HOURS_PER_YEAR + 1e-9 {
            return Err(Error::TimeSeries(format!(
                "{} samples of {step_hours} h exceed one year",
                values.len()
            )));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::TimeSeries(format!("sample {i} is not finite")));
            }
            if unit == Unit::Fraction && !(0.0..=1.0).contains(&v) {
                return Err(Error::TimeSeries(format!(
                    "capacity factor {v} at sample {i} outside [0, 1]"
                )));
            }
            if unit.is_quantity() && v < 0.0 {
                return Err(Error::TimeSeries(format!(
                    "negative quantity {v} at sample {i}"
                )));
            }
        }
        Ok(TimeSeries {
            values,
            unit,
            step_hours,
            start_index,
        })
    }

    /// Constant series, mostly for tests and toy systems.
    pub fn constant(value: f64, len: usize, unit: Unit, step_hours: f64) -> Result<Self> {
        Self::new(vec![value; len], unit, step_hours)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn step_hours(&self) -> f64 {
        self.step_hours
    }

    pub fn start_index(&self) -> usize {
        self.start_index
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Hour-of-year of sample `i`.
    pub fn hour_of(&self, i: usize) -> f64 {
        self.start_index as f64 + i as f64 * self.step_hours
    }

    /// `Σ value · Δ`: energy for power series, full-load hours for capacity factors.
    pub fn weighted_sum(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.step_hours
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Keep every `factor`-th sample; the step width grows by the same factor.
    /// A trailing partial block is dropped.
    pub fn subsample(&self, factor: usize) -> Result<Self> {
        if factor < 1 {
            return Err(Error::InvalidInput(
                "subsample factor must be at least 1".into(),
            ));
        }
        let values = self.values.iter().step_by(factor).copied().collect();
        Self::with_start(
            values,
            self.unit,
            self.step_hours * factor as f64,
            self.start_index,
        )
    }

    /// Rescale so that `weighted_sum()` equals `target`.
    pub fn scaled_to_sum(&self, target: f64) -> Result<Self> {
        let sum = self.weighted_sum();
        if sum <= 0.0 {
            return Err(Error::TimeSeries("cannot rescale an all-zero series".into()));
        }
        let factor = target / sum;
        Self::with_start(
            self.values.iter().map(|v| v * factor).collect(),
            self.unit,
            self.step_hours,
            self.start_index,
        )
    }

    pub fn map(&self, unit: Unit, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::with_start(
            self.values.iter().map(|&v| f(v)).collect(),
            unit,
            self.step_hours,
            self.start_index,
        )
    }

    pub(crate) fn check_same_horizon(&self, other: &TimeSeries, what: &str) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::HorizonMismatch {
                what: what.to_string(),
                expected: self.len(),
                found: other.len(),
            });
        }
        if (self.step_hours - other.step_hours).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "{what}: step width {} h differs from {} h",
                other.step_hours, self.step_hours
            )));
        }
        Ok(())
    }
}

/// Read a `hour,value` CSV with one header row.
///
/// The first `hour` entry becomes the series' start index.
pub fn load_timeseries(path: &Path, unit: Unit, step_hours: f64) -> Result<TimeSeries> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut values = Vec::new();
    let mut start_index = None;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if record.len() != 2 {
            return Err(parse_err(format!(
                "expected 2 fields (hour,value), found {}",
                record.len()
            )));
        }
        if start_index.is_none() {
            let hour: usize = record[0]
                .parse()
                .map_err(|_| parse_err(format!("hour {:?} is not an integer", &record[0])))?;
            start_index = Some(hour);
        }
        let value: f64 = record[1]
            .parse()
            .map_err(|_| parse_err(format!("value {:?} is not a number", &record[1])))?;
        if !value.is_finite() {
            return Err(parse_err(format!("value {value} is not finite")));
        }
        if unit == Unit::Fraction && !(0.0..=1.0).contains(&value) {
            return Err(parse_err(format!("capacity factor {value} outside [0, 1]")));
        }
        values.push(value);
    }
    TimeSeries::with_start(values, unit, step_hours, start_index.unwrap_or(0))
}

/// Write a series in the same `hour,value` format `load_timeseries` reads.
pub fn write_timeseries(path: &Path, ts: &TimeSeries) -> Result<()> {
    use std::io::Write;
    let mut out = String::from("hour,value\n");
    for (i, v) in ts.values().iter().enumerate() {
        out.push_str(&format!("{},{}\n", ts.hour_of(i), v));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

/// Raw investment parameters of one technology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostInputs {
    /// EUR per kW, or per kWh for storage energy.
    pub overnight_cost: f64,
    pub lifetime_years: u32,
    pub interest_rate: f64,
    pub vat_rate: f64,
    /// EUR per kW and year; not part of the annuity.
    pub annual_fixed_cost: f64,
}

impl CostInputs {
    pub fn validate(&self) -> Result<()> {
        if self.lifetime_years < 1 {
            return Err(Error::InvalidInput("lifetime must be at least one year".into()));
        }
        if !(self.interest_rate >= 0.0 && self.vat_rate >= 0.0) {
            return Err(Error::InvalidInput("rates must be non-negative".into()));
        }
        if !(self.overnight_cost >= 0.0 && self.annual_fixed_cost >= 0.0) {
            return Err(Error::InvalidInput("costs must be non-negative".into()));
        }
        Ok(())
    }
}

/// Capital recovery factor `r / (1 - (1+r)^-n)`, `1/n` for a zero rate.
pub fn capital_recovery_factor(lifetime_years: u32, interest_rate: f64) -> f64 {
    let n = lifetime_years as f64;
    if interest_rate == 0.0 {
        1.0 / n
    } else {
        interest_rate / (1.0 - (1.0 + interest_rate).powf(-n))
    }
}

/// Annualized investment cost including VAT, EUR per kW (or kWh) and year.
pub fn annualized_cost(c: &CostInputs) -> f64 {
    c.overnight_cost * (1.0 + c.vat_rate) * capital_recovery_factor(c.lifetime_years, c.interest_rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalTechInputs {
    pub thermal_efficiency: f64,
    /// t CO2 per MWh thermal.
    pub carbon_content: f64,
    /// EUR per MWh thermal.
    pub fuel_price: f64,
    /// EUR per t CO2.
    pub co2_price: f64,
}

/// Short-run marginal cost in EUR per MWh electric.
pub fn marginal_cost(t: &ThermalTechInputs) -> Result<f64> {
    if !(t.thermal_efficiency > 0.0 && t.thermal_efficiency <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "thermal efficiency {} outside (0, 1]",
            t.thermal_efficiency
        )));
    }
    if t.fuel_price < 0.0 || t.co2_price < 0.0 || t.carbon_content < 0.0 {
        return Err(Error::InvalidInput("fuel and carbon prices must be non-negative".into()));
    }
    Ok((t.fuel_price + t.co2_price * t.carbon_content) / t.thermal_efficiency)
}
