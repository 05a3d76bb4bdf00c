//! Deterministic desk-scale stand-ins for the measured input profiles.
//!
//! All shapes are closed-form sinusoids of hour-of-day, day-of-year and a few
//! incommensurate "weather" periods, so runs need no external files and no RNG.
//! Profiles are generated hourly; callers subsample them like ingested data.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::inputs::{TimeSeries, Unit, HOURS_PER_YEAR};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HouseholdShape {
    pub hours: usize,
    /// Annual household consumption in kWh (scaled pro rata for shorter horizons).
    pub annual_demand_kwh: f64,
    /// Annual PV full-load hours (scaled pro rata for shorter horizons).
    pub pv_full_load_hours: f64,
}

impl Default for HouseholdShape {
    fn default() -> Self {
        HouseholdShape {
            hours: 8760,
            annual_demand_kwh: 5000.0,
            pv_full_load_hours: 1090.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemShape {
    pub hours: usize,
    /// Annual non-prosumage demand in MWh.
    pub annual_demand_mwh: f64,
    pub onshore_full_load_hours: f64,
    pub offshore_full_load_hours: f64,
    pub ror_full_load_hours: f64,
    pub pv_full_load_hours: f64,
}

impl Default for SystemShape {
    fn default() -> Self {
        SystemShape {
            hours: 8760,
            annual_demand_mwh: 540.0e6,
            onshore_full_load_hours: 1950.0,
            offshore_full_load_hours: 3700.0,
            ror_full_load_hours: 4400.0,
            pv_full_load_hours: 1090.0,
        }
    }
}

pub struct SystemProfiles {
    pub demand: TimeSeries,
    pub onshore: TimeSeries,
    pub offshore: TimeSeries,
    pub pv: TimeSeries,
    pub ror: TimeSeries,
}

impl SystemProfiles {
    pub fn subsample(&self, factor: usize) -> Result<Self> {
        Ok(SystemProfiles {
            demand: self.demand.subsample(factor)?,
            onshore: self.onshore.subsample(factor)?,
            offshore: self.offshore.subsample(factor)?,
            pv: self.pv.subsample(factor)?,
            ror: self.ror.subsample(factor)?,
        })
    }
}

fn day_and_hour(h: usize) -> (f64, f64) {
    ((h / 24) as f64, (h % 24) as f64)
}

fn seasonal(day: f64, peak_day: f64) -> f64 {
    (2.0 * PI * (day - peak_day) / 365.0).cos()
}

fn bump(x: f64, centre: f64, width: f64) -> f64 {
    (-((x - centre) / width).powi(2)).exp()
}

/// Unscaled clear-sky-times-cloudiness PV shape; exactly zero outside daylight.
fn pv_shape(h: usize) -> f64 {
    let (day, hour) = day_and_hour(h);
    let day_length = 12.0 + 4.2 * seasonal(day, 172.0);
    let sunrise = 12.0 - day_length / 2.0;
    let t = hour + 0.5 - sunrise;
    if t <= 0.0 || t >= day_length {
        return 0.0;
    }
    let elevation = (PI * t / day_length).sin().powf(1.3);
    let amplitude = 0.55 + 0.25 * seasonal(day, 172.0);
    let clouds = 0.62
        + 0.30 * (2.0 * PI * day / 9.7 + 1.3 * (2.0 * PI * day / 23.3).sin()).sin()
        + 0.08 * (2.0 * PI * day / 3.1).cos();
    amplitude * clouds.clamp(0.15, 1.0) * elevation
}

fn scale_fraction(raw: Vec<f64>, full_load_hours: f64) -> Result<TimeSeries> {
    let sum: f64 = raw.iter().sum();
    let factor = if sum > 0.0 { full_load_hours / sum } else { 0.0 };
    TimeSeries::new(
        raw.into_iter().map(|v| (v * factor).min(1.0)).collect(),
        Unit::Fraction,
        1.0,
    )
}

/// Household demand in kW and PV capacity factor, hourly.
pub fn synthetic_profiles(shape: &HouseholdShape) -> Result<(TimeSeries, TimeSeries)> {
    let share = shape.hours as f64 / HOURS_PER_YEAR;

    let raw_demand: Vec<f64> = (0..shape.hours)
        .map(|h| {
            let (day, hour) = day_and_hour(h);
            let daily = 0.45
                + 0.45 * bump(hour, 7.5, 1.6)
                + 0.35 * bump(hour, 12.5, 2.0)
                + 1.05 * bump(hour, 19.5, 2.3)
                - 0.15 * bump(hour, 3.5, 2.0);
            let weekly = if (h / 24) % 7 >= 5 { 1.08 } else { 1.0 };
            daily * weekly * (1.0 + 0.22 * seasonal(day, 15.0))
        })
        .collect();
    let demand = TimeSeries::new(raw_demand, Unit::Kw, 1.0)?
        .scaled_to_sum(shape.annual_demand_kwh * share)?;

    let pv = scale_fraction(
        (0..shape.hours).map(pv_shape).collect(),
        shape.pv_full_load_hours * share,
    )?;
    Ok((demand, pv))
}

fn wind_shape(h: usize, phase: f64, mean: f64) -> f64 {
    let (day, hour) = day_and_hour(h);
    let t = h as f64;
    let synoptic = (2.0 * PI * t / (24.0 * 4.3) + phase).sin()
        * (0.6 + 0.4 * (2.0 * PI * t / (24.0 * 11.7) + 0.7 * phase).sin())
        + 0.35 * (2.0 * PI * t / (24.0 * 2.1) + 1.9 * phase).sin();
    let v = mean * (1.0 + 0.35 * seasonal(day, 15.0))
        + 0.55 * mean * synoptic
        + 0.06 * mean * (2.0 * PI * (hour - 15.0) / 24.0).cos();
    v.max(0.03 * mean)
}

/// Non-prosumage demand (MW) and renewable capacity factors, hourly.
pub fn synthetic_system_profiles(shape: &SystemShape) -> Result<SystemProfiles> {
    let share = shape.hours as f64 / HOURS_PER_YEAR;
    let raw_demand: Vec<f64> = (0..shape.hours)
        .map(|h| {
            let (day, hour) = day_and_hour(h);
            let daily = 0.80 + 0.16 * bump(hour, 11.0, 3.5) + 0.14 * bump(hour, 18.5, 2.5)
                - 0.06 * bump(hour, 3.0, 2.0);
            let weekly = if (h / 24) % 7 >= 5 { 0.88 } else { 1.0 };
            daily * weekly * (1.0 + 0.09 * seasonal(day, 15.0))
        })
        .collect();
    let demand = TimeSeries::new(raw_demand, Unit::Mw, 1.0)?
        .scaled_to_sum(shape.annual_demand_mwh * share)?;

    let onshore = scale_fraction(
        (0..shape.hours).map(|h| wind_shape(h, 0.0, 1.0)).collect(),
        shape.onshore_full_load_hours * share,
    )?;
    let offshore = scale_fraction(
        (0..shape.hours).map(|h| wind_shape(h, 0.4, 1.0) + 0.35).collect(),
        shape.offshore_full_load_hours * share,
    )?;
    let ror = scale_fraction(
        (0..shape.hours)
            .map(|h| 1.0 + 0.25 * seasonal(day_and_hour(h).0, 130.0))
            .collect(),
        shape.ror_full_load_hours * share,
    )?;
    let pv = scale_fraction(
        (0..shape.hours).map(pv_shape).collect(),
        shape.pv_full_load_hours * share,
    )?;
    Ok(SystemProfiles {
        demand,
        onshore,
        offshore,
        pv,
        ror,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn household_demand_sums_to_five_mwh() {
        let (d, _) = synthetic_profiles(&HouseholdShape::default()).unwrap();
        let annual = d.mean() * HOURS_PER_YEAR;
        assert!((annual - 5000.0).abs() <= 5.0, "{annual}");
    }

    #[test]
    fn pv_full_load_hours_match() {
        let (_, pv) = synthetic_profiles(&HouseholdShape::default()).unwrap();
        let flh = pv.weighted_sum();
        assert!((flh - 1090.0).abs() <= 10.9, "{flh}");
        assert!(pv.max() <= 1.0);
    }

    #[test]
    fn no_sun_at_midnight() {
        let (_, pv) = synthetic_profiles(&HouseholdShape::default()).unwrap();
        for day in 0..365 {
            assert_eq!(pv.values()[day * 24], 0.0);
        }
    }

    #[test]
    fn subsampled_pv_energy_close_to_hourly() {
        let (_, pv) = synthetic_profiles(&HouseholdShape::default()).unwrap();
        let sub = pv.subsample(2).unwrap();
        let rel = (sub.weighted_sum() - pv.weighted_sum()).abs() / pv.weighted_sum();
        assert!(rel < 0.02, "{rel}");
    }

    #[test]
    fn system_profiles_are_valid_fractions() {
        let s = synthetic_system_profiles(&SystemShape::default()).unwrap();
        for ts in [&s.onshore, &s.offshore, &s.pv, &s.ror] {
            assert_eq!(ts.len(), 8760);
            assert!(ts.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
        assert!((s.demand.weighted_sum() - 540.0e6).abs() < 1.0);
    }
}
