//! Coupling the household and the power sector.
//!
//! Fixed tariffs need one household solve followed by one dispatch solve.
//!
//! Real-time components are cleared in one of two ways. `BestResponse`
//! iterates the two problems: the household answers a price guess, dispatch
//! prices the resulting exchange, and the guess moves a damped step towards
//! the new prices until the largest hourly change is within tolerance. A
//! single household type facing an LP is a bang-bang responder, so this loop
//! often cycles. `JointClearing` instead puts N households and the power
//! sector into one LP whose balance duals are the wholesale prices. The
//! household pays the dual on its exchange directly; fixed tariff components
//! enter as `rate − p` on top of it, and only that guess `p` is iterated. A
//! fully real-time tariff therefore clears in one solve.

use serde::{Deserialize, Serialize};

use crate::dispatch::{
    add_dispatch, check_dispatch_kkt, extract_dispatch, solve_dispatch, BalanceCoupling, DispatchParams,
    DispatchSolution, HouseholdExchange,
};
use crate::error::{Error, Result};
use crate::household::{
    add_household, check_household_kkt, extract_household, resolve_tariff, solve_household, EnergyCharge, FeedIn,
    HouseholdSolution, ProsumageParams, Tariff, TariffPrices,
};
use crate::inputs::{TimeSeries, Unit};
use crate::kkt::KktReport;
use crate::lp::{solve_lp, LinearProgram, DEFAULT_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RtpMethod {
    #[default]
    JointClearing,
    BestResponse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EquilibriumConfig {
    pub damping: f64,
    pub max_iterations: usize,
    /// EUR/kWh.
    pub price_tolerance: f64,
    pub kkt_tolerance: f64,
    pub method: RtpMethod,
}

impl Default for EquilibriumConfig {
    fn default() -> Self {
        EquilibriumConfig {
            damping: 0.5,
            max_iterations: 50,
            price_tolerance: 1e-4,
            kkt_tolerance: 1e-6,
            method: RtpMethod::JointClearing,
        }
    }
}

impl EquilibriumConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!("damping {} outside (0, 1]", self.damping)));
        }
        if self.max_iterations < 1 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.price_tolerance > 0.0 && self.kkt_tolerance > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// One pass of household and dispatch solves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `max_h |new − used|` before damping, EUR/kWh.
    pub max_price_change: f64,
    pub z_pro: f64,
    pub z_sys: f64,
    pub hh_kkt_residual: f64,
    pub disp_kkt_residual: f64,
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub tariff: Tariff,
    pub n_households: u64,
    pub household: HouseholdSolution,
    pub dispatch: DispatchSolution,
    pub exchange: HouseholdExchange,
    /// Wholesale prices the household responded to (EUR/kWh); `None` for fixed tariffs.
    pub prices_used: Option<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub hh_kkt: KktReport,
    pub disp_kkt: KktReport,
    pub history: Vec<IterationRecord>,
    /// Smallest period after which the price response repeats, when the loop did not settle.
    pub cycle_length: Option<usize>,
    /// Range of the price change over the second half of a non-converged run.
    pub residual_band: Option<(f64, f64)>,
    pub price_tolerance: f64,
    pub kkt_tolerance: f64,
}

impl ScenarioResult {
    pub fn hh_kkt_residual(&self) -> f64 {
        self.hh_kkt.max_residual()
    }

    pub fn disp_kkt_residual(&self) -> f64 {
        self.disp_kkt.max_residual()
    }
}

fn price_series_kwh(prices: &[f64], step_hours: f64) -> Result<TimeSeries> {
    TimeSeries::new(prices.to_vec(), Unit::EurPerKwh, step_hours)
}

/// Demand-weighted mean wholesale price (EUR/kWh) without prosumage exchange.
pub fn calibrate_energy_charge(p: &DispatchParams) -> Result<f64> {
    let sol = solve_dispatch(p, &HouseholdExchange::zeros(p.horizon()))?;
    Ok(weighted_mean_price(&sol.canonical_prices, p.demand.values()) / 1000.0)
}

fn weighted_mean_price(prices: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    prices.iter().zip(weights).map(|(p, w)| p * w).sum::<f64>() / total
}

fn check_horizons(p_hh: &ProsumageParams, p_disp: &DispatchParams) -> Result<()> {
    if p_hh.horizon() != p_disp.horizon() {
        return Err(Error::HorizonMismatch {
            what: "household profiles".into(),
            expected: p_disp.horizon(),
            found: p_hh.horizon(),
        });
    }
    if (p_hh.step_hours() - p_disp.step_hours()).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "household step {} h differs from system step {} h",
            p_hh.step_hours(),
            p_disp.step_hours()
        )));
    }
    Ok(())
}

struct Pass {
    household: HouseholdSolution,
    dispatch: DispatchSolution,
    exchange: HouseholdExchange,
    hh_kkt: KktReport,
    disp_kkt: KktReport,
}

fn pass(
    tariff: &Tariff,
    p_hh: &ProsumageParams,
    p_disp: &DispatchParams,
    prices: Option<&TimeSeries>,
) -> Result<Pass> {
    let household = solve_household(p_hh, tariff, prices)?;
    let hh_kkt = check_household_kkt(p_hh, tariff, prices, &household);
    let exchange = HouseholdExchange {
        purchases_mw: household.aggregate_purchases_mw(p_hh.n_households),
        feed_in_mw: household.aggregate_feed_in_mw(p_hh.n_households),
    };
    let dispatch = solve_dispatch(p_disp, &exchange)?;
    let disp_kkt = check_dispatch_kkt(p_disp, &exchange, &dispatch);
    Ok(Pass {
        household,
        dispatch,
        exchange,
        hh_kkt,
        disp_kkt,
    })
}

/// True if some tariff component is a fixed rate while another is real-time,
/// so the joint LP needs a guess of the wholesale price.
fn mixes_fixed_and_real_time(t: &Tariff) -> bool {
    matches!(t.energy_charge, EnergyCharge::Fixed { .. }) || matches!(t.feed_in, FeedIn::Fixed { .. })
}

/// Household prices on top of the wholesale price the joint LP charges
/// through the balance row, given a guess `p` (EUR/kWh) of that price.
fn joint_costs(t: &Tariff, p: &[f64]) -> TariffPrices {
    let energy_charge = p
        .iter()
        .map(|p| match t.energy_charge {
            EnergyCharge::Fixed { rate } => rate - p,
            EnergyCharge::RealTime => 0.0,
        })
        .collect();
    let feed_in = p
        .iter()
        .map(|p| match t.feed_in {
            FeedIn::Fixed { rate } => rate - p,
            FeedIn::RealTime | FeedIn::Prohibited => 0.0,
            FeedIn::RealTimePlusPremium { premium } => premium,
        })
        .collect();
    TariffPrices { energy_charge, feed_in }
}

/// Household block and power sector in one LP. Returns the pass and the
/// balance duals in EUR/kWh.
fn joint_pass(
    tariff: &Tariff,
    p_hh: &ProsumageParams,
    p_disp: &DispatchParams,
    guess: &[f64],
) -> Result<(Pass, Vec<f64>)> {
    let n_hh = p_hh.n_households as f64;
    let mut lp = LinearProgram::new();
    let hh_layout = add_household(&mut lp, p_hh, tariff, &joint_costs(tariff, guess), None, n_hh)?;
    let coupling = BalanceCoupling {
        purchases: hh_layout.em,
        feed_in: hh_layout.gpm,
        mw_per_kw: n_hh / 1000.0,
    };
    let disp_layout = add_dispatch(&mut lp, p_disp, p_disp.demand.values(), Some(coupling))?;
    let sol = solve_lp(&lp, DEFAULT_TOLERANCE);
    if !sol.is_optimal() {
        return Err(Error::NotOptimal {
            problem: "joint household and dispatch".into(),
            status: sol.status.to_string(),
        });
    }
    let n = p_hh.horizon();
    let mu: Vec<f64> = sol.duals[disp_layout.balance..disp_layout.balance + n]
        .iter()
        .map(|y| y / 1000.0)
        .collect();
    let series = price_series_kwh(&mu, p_hh.step_hours())?;
    let prices = resolve_tariff(tariff, Some(&series), n)?;
    let household = extract_household(&hh_layout, &lp, p_hh, tariff, prices, &sol, n_hh)?;
    let hh_kkt = check_household_kkt(p_hh, tariff, Some(&series), &household);
    let exchange = HouseholdExchange {
        purchases_mw: household.aggregate_purchases_mw(p_hh.n_households),
        feed_in_mw: household.aggregate_feed_in_mw(p_hh.n_households),
    };
    let load = (0..n)
        .map(|h| p_disp.demand.values()[h] + exchange.purchases_mw[h] - exchange.feed_in_mw[h])
        .collect();
    let dispatch = extract_dispatch(&disp_layout, p_disp, load, &sol, false)?;
    let disp_kkt = check_dispatch_kkt(p_disp, &exchange, &dispatch);
    Ok((
        Pass {
            household,
            dispatch,
            exchange,
            hh_kkt,
            disp_kkt,
        },
        mu,
    ))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn solve_scenario(
    tariff: &Tariff,
    p_hh: &ProsumageParams,
    p_disp: &DispatchParams,
    cfg: &EquilibriumConfig,
) -> Result<ScenarioResult> {
    cfg.validate()?;
    tariff.validate()?;
    p_hh.validate()?;
    p_disp.validate()?;
    check_horizons(p_hh, p_disp)?;
    let dt = p_hh.step_hours();

    let finish = |pass: Pass, prices_used: Option<Vec<f64>>, history: Vec<IterationRecord>, converged: bool| {
        let kkt_ok = pass.hh_kkt.passes(cfg.kkt_tolerance) && pass.disp_kkt.passes(cfg.kkt_tolerance);
        ScenarioResult {
            tariff: *tariff,
            n_households: p_hh.n_households,
            household: pass.household,
            dispatch: pass.dispatch,
            exchange: pass.exchange,
            prices_used,
            iterations: history.len(),
            converged: converged && kkt_ok,
            hh_kkt: pass.hh_kkt,
            disp_kkt: pass.disp_kkt,
            history,
            cycle_length: None,
            residual_band: None,
            price_tolerance: cfg.price_tolerance,
            kkt_tolerance: cfg.kkt_tolerance,
        }
    };
    let record = |iteration: usize, change: f64, pass: &Pass| IterationRecord {
        iteration,
        max_price_change: change,
        z_pro: pass.household.z_pro,
        z_sys: pass.dispatch.z_sys,
        hh_kkt_residual: pass.hh_kkt.max_residual(),
        disp_kkt_residual: pass.disp_kkt.max_residual(),
    };

    if !tariff.uses_real_time_prices() {
        let first = pass(tariff, p_hh, p_disp, None)?;
        let history = vec![record(1, 0.0, &first)];
        return Ok(finish(first, None, history, true));
    }

    // start from the no-prosumage prices
    let calibration = solve_dispatch(p_disp, &HouseholdExchange::zeros(p_disp.horizon()))?;
    let mut used: Vec<f64> = calibration.canonical_prices.iter().map(|p| p / 1000.0).collect();
    let mut history = Vec::new();
    let mut recent: Vec<Vec<f64>> = Vec::new();
    let mut best: Option<(f64, Pass, Vec<f64>)> = None;
    // joint clearing only: set after the guess was replaced by the duals outright
    let mut snapped = false;

    for iteration in 1..=cfg.max_iterations {
        let (current, new) = match cfg.method {
            RtpMethod::BestResponse => {
                let series = price_series_kwh(&used, dt)?;
                let current = pass(tariff, p_hh, p_disp, Some(&series))?;
                let new: Vec<f64> = current.dispatch.canonical_prices.iter().map(|p| p / 1000.0).collect();
                (current, new)
            }
            RtpMethod::JointClearing => joint_pass(tariff, p_hh, p_disp, &used)?,
        };
        let joint = cfg.method == RtpMethod::JointClearing;
        let change = if joint && !mixes_fixed_and_real_time(tariff) {
            0.0
        } else {
            max_abs_diff(&new, &used)
        };
        history.push(record(iteration, change, &current));
        log::debug!("iteration {iteration}: max price change {change:.3e} EUR/kWh");

        let settled = if joint {
            change == 0.0 || (snapped && change <= cfg.price_tolerance)
        } else {
            change <= cfg.price_tolerance
        };
        if settled {
            // in the joint LP the household paid the duals themselves
            let prices_used = if joint { new } else { used };
            return Ok(finish(current, Some(prices_used), history, true));
        }
        if best.as_ref().is_none_or(|b| change < b.0) {
            let prices_used = if joint { new.clone() } else { used.clone() };
            best = Some((change, current, prices_used));
        }
        recent.push(new.clone());
        if recent.len() > 12 {
            recent.remove(0);
        }
        if joint && change <= cfg.price_tolerance {
            used = new;
            snapped = true;
        } else {
            snapped = false;
            used = used
                .iter()
                .zip(&new)
                .map(|(u, n)| cfg.damping * n + (1.0 - cfg.damping) * u)
                .collect();
        }
    }

    let (_, best_pass, best_used) = best.expect("at least one iteration");
    let mut result = finish(best_pass, Some(best_used), history, false);
    result.cycle_length = cycle_length(&recent, cfg.price_tolerance);
    let tail = &result.history[result.history.len() / 2..];
    result.residual_band = Some(tail.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), r| {
        (lo.min(r.max_price_change), hi.max(r.max_price_change))
    }));
    log::warn!(
        "real-time pricing did not converge in {} iterations (cycle {:?})",
        cfg.max_iterations,
        result.cycle_length
    );
    Ok(result)
}

/// Smallest k such that the latest price response matches the one k steps earlier.
fn cycle_length(recent: &[Vec<f64>], tolerance: f64) -> Option<usize> {
    let last = recent.last()?;
    (1..recent.len()).find(|&k| max_abs_diff(last, &recent[recent.len() - 1 - k]) <= tolerance)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointReport {
    pub conditions: KktReport,
    /// `max_h |t_h − λ_h|` in EUR/kWh; `None` when no tariff component is real-time.
    pub coupling_residual: Option<f64>,
    pub coupling_within_tolerance: Option<bool>,
}

impl JointReport {
    pub fn max_residual(&self) -> f64 {
        self.conditions.max_residual()
    }
}

/// Both agents' conditions plus, with real-time pricing, the identity between
/// the prices the household faced and the wholesale prices its response produced.
pub fn joint_kkt_report(result: &ScenarioResult) -> JointReport {
    let mut conditions = KktReport::default();
    conditions.extend_prefixed("household.", &result.hh_kkt);
    conditions.extend_prefixed("dispatch.", &result.disp_kkt);
    let coupling_residual = result.prices_used.as_ref().map(|used| {
        let lambda: Vec<f64> = result.dispatch.canonical_prices.iter().map(|p| p / 1000.0).collect();
        if used.len() != lambda.len() {
            f64::INFINITY
        } else {
            max_abs_diff(used, &lambda)
        }
    });
    JointReport {
        conditions,
        coupling_within_tolerance: coupling_residual.map(|r| r <= result.price_tolerance),
        coupling_residual,
    }
}
