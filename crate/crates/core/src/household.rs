//! The prosumage household: PV and battery sizing plus hourly dispatch against
//! a retail tariff, solved for one representative household in kW, kWh and EUR.
//!
//! Rows are written so that each LP dual is directly the multiplier of the
//! corresponding household condition in EUR/kWh:
//!
//! ```text
//! balance   Δ(G_pro2pro + STO_out + E_m2pro)               = Δ d
//! pv        Δ(φ N_pv − G_pro2pro − G_pro2m − CU − STO_in)   = 0
//! storage   L_{h-1} + Δ a STO_in − Δ b STO_out − L_h        = 0    a = (1+η)/2, b = 2/(1+η)
//! level     N_E − L_h                                       ≥ 0
//! charge    Δ(N_P − STO_in)                                 ≥ 0
//! discharge Δ(N_P − STO_out)                                ≥ 0
//! feed-in   Δ(f N_pv − G_pro2m)                             ≥ 0    only with a cap
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inputs::{annualized_cost, TimeSeries, Unit, HOURS_PER_YEAR};
use crate::kkt::{KktBuilder, KktReport};
use crate::lp::{solve_lp, LinearProgram, LpSolution, Relation, VarId, DEFAULT_TOLERANCE};
use crate::presets;

/// Reduced cost below which a capacity sitting at a bound is flagged as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnergyCharge {
    Fixed { rate: f64 },
    RealTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeedIn {
    Fixed { rate: f64 },
    RealTime,
    RealTimePlusPremium { premium: f64 },
    Prohibited,
}

/// Retail tariff and feed-in remuneration, all in EUR/kWh except the fixed
/// charge (EUR/year).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tariff {
    pub energy_charge: EnergyCharge,
    pub other_charge: f64,
    pub fixed_charge: f64,
    pub feed_in: FeedIn,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feed_in_cap_fraction: Option<f64>,
}

impl Tariff {
    pub fn validate(&self) -> Result<()> {
        let mut charges = vec![("other_charge", self.other_charge), ("fixed_charge", self.fixed_charge)];
        if let EnergyCharge::Fixed { rate } = self.energy_charge {
            charges.push(("energy_charge", rate));
        }
        match self.feed_in {
            FeedIn::Fixed { rate } => charges.push(("feed_in", rate)),
            FeedIn::RealTimePlusPremium { premium } => charges.push(("feed_in premium", premium)),
            _ => {}
        }
        for (name, v) in charges {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidInput(format!("tariff {name} = {v} must be a non-negative number")));
            }
        }
        if let Some(f) = self.feed_in_cap_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidInput(format!("feed-in cap fraction {f} outside (0, 1]")));
            }
        }
        Ok(())
    }

    pub fn uses_real_time_prices(&self) -> bool {
        matches!(self.energy_charge, EnergyCharge::RealTime)
            || matches!(self.feed_in, FeedIn::RealTime | FeedIn::RealTimePlusPremium { .. })
    }

    pub fn feed_in_allowed(&self) -> bool {
        !matches!(self.feed_in, FeedIn::Prohibited)
    }
}

/// Hour-by-hour energy charge and feed-in price (EUR/kWh) implied by a tariff.
#[derive(Debug, Clone, PartialEq)]
pub struct TariffPrices {
    pub energy_charge: Vec<f64>,
    /// Zero when feed-in is prohibited.
    pub feed_in: Vec<f64>,
}

/// Wholesale price at sample `i` in EUR/kWh.
fn price_kwh(prices: &TimeSeries, i: usize) -> f64 {
    match prices.unit() {
        Unit::EurPerMwh => prices.values()[i] / 1000.0,
        _ => prices.values()[i],
    }
}

pub fn resolve_tariff(t: &Tariff, prices: Option<&TimeSeries>, horizon: usize) -> Result<TariffPrices> {
    let series = if t.uses_real_time_prices() {
        let p = prices.ok_or(Error::MissingPrices)?;
        if !matches!(p.unit(), Unit::EurPerKwh | Unit::EurPerMwh) {
            return Err(Error::InvalidInput(format!("price series has unit {:?}", p.unit())));
        }
        if p.len() != horizon {
            return Err(Error::HorizonMismatch {
                what: "price series".into(),
                expected: horizon,
                found: p.len(),
            });
        }
        Some(p)
    } else {
        None
    };
    let rtp = |i: usize| series.map_or(0.0, |p| price_kwh(p, i));
    let energy_charge = (0..horizon)
        .map(|i| match t.energy_charge {
            EnergyCharge::Fixed { rate } => rate,
            EnergyCharge::RealTime => rtp(i),
        })
        .collect();
    let feed_in = (0..horizon)
        .map(|i| match t.feed_in {
            FeedIn::Fixed { rate } => rate,
            FeedIn::RealTime => rtp(i),
            FeedIn::RealTimePlusPremium { premium } => rtp(i) + premium,
            FeedIn::Prohibited => 0.0,
        })
        .collect();
    Ok(TariffPrices { energy_charge, feed_in })
}

/// Household cost data (annualized, EUR per kW, kWh and year) and profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProsumageParams {
    pub c_inv_pv: f64,
    pub c_fix_pv: f64,
    pub c_inv_sto_e: f64,
    pub c_inv_sto_p: f64,
    pub c_fix_sto: f64,
    pub eta_sto: f64,
    pub m_pv: f64,
    /// kW per household.
    pub demand: TimeSeries,
    pub pv_cf: TimeSeries,
    pub n_households: u64,
}

impl ProsumageParams {
    /// Default cost and efficiency data with the given profiles.
    pub fn with_default_costs(demand: TimeSeries, pv_cf: TimeSeries) -> Self {
        let (pv, power, energy) = presets::household_annuities();
        ProsumageParams {
            c_inv_pv: pv,
            c_fix_pv: presets::PV_FIXED_COST,
            c_inv_sto_e: energy,
            c_inv_sto_p: power,
            c_fix_sto: presets::STORAGE_FIXED_COST,
            eta_sto: presets::STORAGE_EFFICIENCY,
            m_pv: presets::PV_LIMIT_KW,
            demand,
            pv_cf,
            n_households: presets::N_HOUSEHOLDS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c_inv_pv", self.c_inv_pv),
            ("c_fix_pv", self.c_fix_pv),
            ("c_inv_sto_e", self.c_inv_sto_e),
            ("c_inv_sto_p", self.c_inv_sto_p),
            ("c_fix_sto", self.c_fix_sto),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidInput(format!("{name} = {v} must be non-negative")));
            }
        }
        if !(self.eta_sto > 0.0 && self.eta_sto <= 1.0) {
            return Err(Error::InvalidInput(format!("storage efficiency {} outside (0, 1]", self.eta_sto)));
        }
        if !(self.m_pv.is_finite() && self.m_pv > 0.0) {
            return Err(Error::InvalidInput(format!("PV limit {} must be positive", self.m_pv)));
        }
        if self.n_households == 0 {
            return Err(Error::InvalidInput("n_households must be positive".into()));
        }
        if self.demand.unit() != Unit::Kw {
            return Err(Error::InvalidInput("household demand must be in kW".into()));
        }
        if self.pv_cf.unit() != Unit::Fraction {
            return Err(Error::InvalidInput("PV availability must be a fraction".into()));
        }
        self.demand.check_same_horizon(&self.pv_cf, "PV availability")
    }

    pub fn horizon(&self) -> usize {
        self.demand.len()
    }

    pub fn step_hours(&self) -> f64 {
        self.demand.step_hours()
    }

    pub fn charge_factor(&self) -> f64 {
        (1.0 + self.eta_sto) / 2.0
    }

    pub fn discharge_factor(&self) -> f64 {
        2.0 / (1.0 + self.eta_sto)
    }

    pub fn pv_capacity_cost(&self) -> f64 {
        self.c_inv_pv + self.c_fix_pv
    }

    pub fn energy_capacity_cost(&self) -> f64 {
        self.c_inv_sto_e + self.c_fix_sto / 2.0
    }

    pub fn power_capacity_cost(&self) -> f64 {
        self.c_inv_sto_p + self.c_fix_sto / 2.0
    }
}

/// Household capacities in kW (PV, storage power) and kWh (storage energy).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capacities {
    pub n_pv: f64,
    pub n_sto_e: f64,
    pub n_sto_p: f64,
}

/// Multipliers of the household problem in EUR/kWh (capacity rows in EUR/kWh of capacity).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HouseholdDuals {
    pub energy_balance: Vec<f64>,
    pub pv_balance: Vec<f64>,
    pub storage_balance: Vec<f64>,
    pub level_cap: Vec<f64>,
    pub charge_cap: Vec<f64>,
    pub discharge_cap: Vec<f64>,
    /// Empty without a feed-in cap.
    pub feed_in_cap: Vec<f64>,
    /// EUR/kW on the PV limit.
    pub pv_limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HouseholdSolution {
    pub n_pv: f64,
    pub n_sto_e: f64,
    pub n_sto_p: f64,
    pub step_hours: f64,
    pub demand: Vec<f64>,
    /// `φ_h · N_pv`.
    pub pv_available: Vec<f64>,
    pub g_pro2pro: Vec<f64>,
    pub g_pro2m: Vec<f64>,
    pub cu: Vec<f64>,
    pub sto_in: Vec<f64>,
    pub sto_out: Vec<f64>,
    pub sto_level: Vec<f64>,
    pub e_m2pro: Vec<f64>,
    pub prices: TariffPrices,
    /// EUR/year including the fixed charge.
    pub z_pro: f64,
    pub duals: HouseholdDuals,
    /// Capacity variables at a bound with a reduced cost below [`DEGENERACY_THRESHOLD`].
    pub near_degenerate: Vec<String>,
}

impl HouseholdSolution {
    pub fn horizon(&self) -> usize {
        self.demand.len()
    }

    pub fn capacities(&self) -> Capacities {
        Capacities {
            n_pv: self.n_pv,
            n_sto_e: self.n_sto_e,
            n_sto_p: self.n_sto_p,
        }
    }

    pub fn pv_generation(&self) -> f64 {
        self.pv_available.iter().sum::<f64>() * self.step_hours
    }

    pub fn total_demand(&self) -> f64 {
        self.demand.iter().sum::<f64>() * self.step_hours
    }

    /// Aggregate grid purchases in MW for `n` households.
    pub fn aggregate_purchases_mw(&self, n: u64) -> Vec<f64> {
        self.e_m2pro.iter().map(|v| v * n as f64 / 1000.0).collect()
    }

    /// Aggregate feed-in in MW for `n` households.
    pub fn aggregate_feed_in_mw(&self, n: u64) -> Vec<f64> {
        self.g_pro2m.iter().map(|v| v * n as f64 / 1000.0).collect()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub(crate) n: usize,
    gpp: usize,
    pub(crate) gpm: usize,
    cu: usize,
    sin: usize,
    sout: usize,
    lvl: usize,
    pub(crate) em: usize,
    n_pv: VarId,
    n_e: VarId,
    n_p: VarId,
    balance: usize,
    pv: usize,
    storage: usize,
    level: usize,
    charge: usize,
    discharge: usize,
    feed_in_cap: Option<usize>,
}

/// The household LP plus the bookkeeping to read a solution back.
#[derive(Debug, Clone)]
pub struct HouseholdLp {
    pub lp: LinearProgram,
    /// Fixed charge, added to the LP objective to obtain the bill.
    pub constant: f64,
    layout: Layout,
    prices: TariffPrices,
}

pub fn build_household_lp(p: &ProsumageParams, t: &Tariff, prices: Option<&TimeSeries>) -> Result<HouseholdLp> {
    build(p, t, prices, None)
}

fn build(
    p: &ProsumageParams,
    t: &Tariff,
    prices: Option<&TimeSeries>,
    fixed: Option<Capacities>,
) -> Result<HouseholdLp> {
    p.validate()?;
    t.validate()?;
    let tp = resolve_tariff(t, prices, p.horizon())?;
    let mut lp = LinearProgram::new();
    let layout = add_household(&mut lp, p, t, &tp, fixed, 1.0)?;
    Ok(HouseholdLp {
        lp,
        constant: t.fixed_charge,
        layout,
        prices: tp,
    })
}

/// Append the household's variables and rows to `lp`. `costs` are the hourly
/// energy charge and feed-in price entering the objective; every cost is
/// multiplied by `cost_scale`, which scales the row duals by the same factor.
pub(crate) fn add_household(
    lp: &mut LinearProgram,
    p: &ProsumageParams,
    t: &Tariff,
    costs: &TariffPrices,
    fixed: Option<Capacities>,
    cost_scale: f64,
) -> Result<Layout> {
    let n = p.horizon();
    let dt = p.step_hours();
    let (a, b) = (p.charge_factor(), p.discharge_factor());
    let d = p.demand.values();
    let phi = p.pv_cf.values();
    let s = cost_scale;

    let block = |lp: &mut LinearProgram, name: &str, upper: f64, cost: &dyn Fn(usize) -> f64| -> Result<usize> {
        let start = lp.num_variables();
        for h in 0..n {
            lp.add_variable(format!("{name}[{h}]"), 0.0, upper, s * cost(h))?;
        }
        Ok(start)
    };
    let inf = f64::INFINITY;
    let gpp = block(lp, "g_pro2pro", inf, &|_| 0.0)?;
    let gpm_upper = if t.feed_in_allowed() { inf } else { 0.0 };
    let gpm = block(lp, "g_pro2m", gpm_upper, &|h| -dt * costs.feed_in[h])?;
    let cu = block(lp, "cu_pro", inf, &|_| 0.0)?;
    let sin = block(lp, "sto_in", inf, &|_| 0.0)?;
    let sout = block(lp, "sto_out", inf, &|_| 0.0)?;
    let lvl = block(lp, "sto_level", inf, &|_| 0.0)?;
    let em = block(lp, "e_m2pro", inf, &|h| dt * (costs.energy_charge[h] + t.other_charge))?;

    let (pv_lo, pv_hi, e_lo, e_hi, p_lo, p_hi) = match fixed {
        Some(c) => (c.n_pv, c.n_pv, c.n_sto_e, c.n_sto_e, c.n_sto_p, c.n_sto_p),
        None => (0.0, p.m_pv, 0.0, inf, 0.0, inf),
    };
    let n_pv = lp.add_variable("n_pv", pv_lo, pv_hi, s * p.pv_capacity_cost())?;
    let n_e = lp.add_variable("n_sto_e", e_lo, e_hi, s * p.energy_capacity_cost())?;
    let n_p = lp.add_variable("n_sto_p", p_lo, p_hi, s * p.power_capacity_cost())?;
    let v = |base: usize, h: usize| VarId(base + h);

    let balance = lp.num_constraints();
    for h in 0..n {
        lp.add_constraint(
            format!("energy_balance[{h}]"),
            [(v(gpp, h), dt), (v(sout, h), dt), (v(em, h), dt)],
            Relation::Eq,
            dt * d[h],
        )?;
    }
    let pv = lp.num_constraints();
    for h in 0..n {
        lp.add_constraint(
            format!("pv_balance[{h}]"),
            [
                (n_pv, dt * phi[h]),
                (v(gpp, h), -dt),
                (v(gpm, h), -dt),
                (v(cu, h), -dt),
                (v(sin, h), -dt),
            ],
            Relation::Eq,
            0.0,
        )?;
    }
    let storage = lp.num_constraints();
    for h in 0..n {
        let mut row = vec![(v(sin, h), dt * a), (v(sout, h), -dt * b), (v(lvl, h), -1.0)];
        if h > 0 {
            row.push((v(lvl, h - 1), 1.0));
        }
        lp.add_constraint(format!("storage_balance[{h}]"), row, Relation::Eq, 0.0)?;
    }
    let level = lp.num_constraints();
    for h in 0..n {
        lp.add_constraint(format!("level_cap[{h}]"), [(n_e, 1.0), (v(lvl, h), -1.0)], Relation::Ge, 0.0)?;
    }
    let charge = lp.num_constraints();
    for h in 0..n {
        lp.add_constraint(format!("charge_cap[{h}]"), [(n_p, dt), (v(sin, h), -dt)], Relation::Ge, 0.0)?;
    }
    let discharge = lp.num_constraints();
    for h in 0..n {
        lp.add_constraint(format!("discharge_cap[{h}]"), [(n_p, dt), (v(sout, h), -dt)], Relation::Ge, 0.0)?;
    }
    let feed_in_cap = match (t.feed_in_cap_fraction, t.feed_in_allowed()) {
        (Some(f), true) => {
            let start = lp.num_constraints();
            for h in 0..n {
                lp.add_constraint(
                    format!("feed_in_cap[{h}]"),
                    [(n_pv, dt * f), (v(gpm, h), -dt)],
                    Relation::Ge,
                    0.0,
                )?;
            }
            Some(start)
        }
        _ => None,
    };

    Ok(Layout {
        n,
        gpp,
        gpm,
        cu,
        sin,
        sout,
        lvl,
        em,
        n_pv,
        n_e,
        n_p,
        balance,
        pv,
        storage,
        level,
        charge,
        discharge,
        feed_in_cap,
    })
}

/// Annual bill of a household schedule under the given hourly prices, EUR.
fn bill(p: &ProsumageParams, t: &Tariff, prices: &TariffPrices, x: &HouseholdSolution) -> f64 {
    let dt = p.step_hours();
    let energy: f64 = (0..x.horizon())
        .map(|h| dt * x.e_m2pro[h] * (prices.energy_charge[h] + t.other_charge) - dt * x.g_pro2m[h] * prices.feed_in[h])
        .sum();
    energy
        + x.n_pv * p.pv_capacity_cost()
        + x.n_sto_e * p.energy_capacity_cost()
        + x.n_sto_p * p.power_capacity_cost()
        + t.fixed_charge
}

/// Read the household block of an optimal LP solution back. Duals and reduced
/// costs are divided by `cost_scale`; the bill is priced at `prices`.
pub(crate) fn extract_household(
    layout: &Layout,
    lp: &LinearProgram,
    p: &ProsumageParams,
    t: &Tariff,
    prices: TariffPrices,
    sol: &LpSolution,
    cost_scale: f64,
) -> Result<HouseholdSolution> {
    if !sol.is_optimal() {
        return Err(Error::NotOptimal {
            problem: "household".into(),
            status: sol.status.to_string(),
        });
    }
    let l = layout;
    let n = l.n;
    let x = &sol.primal;
    let y = &sol.duals;
    let take = |base: usize| x[base..base + n].iter().map(|v| v.max(0.0)).collect::<Vec<_>>();
    let rows = |base: usize| y[base..base + n].iter().map(|v| v / cost_scale).collect::<Vec<_>>();

    let n_pv = x[l.n_pv.0].max(0.0);
    let n_sto_e = x[l.n_e.0].max(0.0);
    let n_sto_p = x[l.n_p.0].max(0.0);
    let at_limit = (n_pv - p.m_pv).abs() <= 1e-9 * (1.0 + p.m_pv);
    let pv_limit = if at_limit {
        (-sol.reduced_costs[l.n_pv.0] / cost_scale).max(0.0)
    } else {
        0.0
    };

    let mut near_degenerate = Vec::new();
    for (name, var, value) in [("n_pv", l.n_pv, n_pv), ("n_sto_e", l.n_e, n_sto_e), ("n_sto_p", l.n_p, n_sto_p)] {
        let bounds = &lp.variables()[var.0];
        let at_bound = (value - bounds.lower).abs() <= 1e-9 || (value - bounds.upper).abs() <= 1e-9;
        let rc = sol.reduced_costs[var.0] / cost_scale;
        if at_bound && bounds.lower < bounds.upper && rc.abs() < DEGENERACY_THRESHOLD {
            near_degenerate.push(name.to_string());
        }
    }

    let mut out = HouseholdSolution {
        n_pv,
        n_sto_e,
        n_sto_p,
        step_hours: p.step_hours(),
        demand: p.demand.values().to_vec(),
        pv_available: p.pv_cf.values().iter().map(|phi| phi * n_pv).collect(),
        g_pro2pro: take(l.gpp),
        g_pro2m: take(l.gpm),
        cu: take(l.cu),
        sto_in: take(l.sin),
        sto_out: take(l.sout),
        sto_level: take(l.lvl),
        e_m2pro: take(l.em),
        prices,
        z_pro: 0.0,
        duals: HouseholdDuals {
            energy_balance: rows(l.balance),
            pv_balance: rows(l.pv),
            storage_balance: rows(l.storage),
            level_cap: rows(l.level),
            charge_cap: rows(l.charge),
            discharge_cap: rows(l.discharge),
            feed_in_cap: l.feed_in_cap.map(rows).unwrap_or_default(),
            pv_limit,
        },
        near_degenerate,
    };
    out.z_pro = bill(p, t, &out.prices, &out);
    Ok(out)
}

impl HouseholdLp {
    /// Read primal values and multipliers back from an optimal LP solution.
    pub fn extract(&self, p: &ProsumageParams, t: &Tariff, sol: &LpSolution) -> Result<HouseholdSolution> {
        extract_household(&self.layout, &self.lp, p, t, self.prices.clone(), sol, 1.0)
    }
}

pub fn solve_household(p: &ProsumageParams, t: &Tariff, prices: Option<&TimeSeries>) -> Result<HouseholdSolution> {
    let hh = build(p, t, prices, None)?;
    let sol = solve_lp(&hh.lp, DEFAULT_TOLERANCE);
    hh.extract(p, t, &sol)
}

/// Dispatch-only variant: capacities are fixed and only hourly flows are optimized.
pub fn solve_household_fixed(
    p: &ProsumageParams,
    t: &Tariff,
    prices: Option<&TimeSeries>,
    capacities: Capacities,
) -> Result<HouseholdSolution> {
    for v in [capacities.n_pv, capacities.n_sto_e, capacities.n_sto_p] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidInput(format!("fixed capacity {v} must be non-negative")));
        }
    }
    let hh = build(p, t, prices, Some(capacities))?;
    let sol = solve_lp(&hh.lp, DEFAULT_TOLERANCE);
    hh.extract(p, t, &sol)
}

/// Evaluate every stationarity, complementarity and feasibility condition of
/// the household problem at `sol`. Hourly conditions are per unit of energy.
pub fn check_household_kkt(
    p: &ProsumageParams,
    t: &Tariff,
    prices: Option<&TimeSeries>,
    sol: &HouseholdSolution,
) -> KktReport {
    let mut k = KktBuilder::default();
    let n = p.horizon();
    let tp = match resolve_tariff(t, prices, n) {
        Ok(tp) if sol.horizon() == n => tp,
        _ => {
            k.equality("tariff_and_horizon", None, f64::INFINITY, 0.0);
            return k.finish();
        }
    };
    let dt = p.step_hours();
    let (a, b) = (p.charge_factor(), p.discharge_factor());
    let phi = p.pv_cf.values();
    let d = p.demand.values();
    let du = &sol.duals;
    let cap = t.feed_in_cap_fraction.filter(|_| t.feed_in_allowed());
    let lcap = |h: usize| if cap.is_some() { du.feed_in_cap[h] } else { 0.0 };

    for h in 0..n {
        let lb = du.energy_balance[h];
        let lpv = du.pv_balance[h];
        let ls = du.storage_balance[h];
        let ls_next = if h + 1 < n { du.storage_balance[h + 1] } else { 0.0 };
        let (li, lo, ll) = (du.charge_cap[h], du.discharge_cap[h], du.level_cap[h]);
        let retail = tp.energy_charge[h] + t.other_charge;

        k.pair("stationarity_e_m2pro", Some(h), retail - lb, retail.abs().max(lb.abs()), sol.e_m2pro[h]);
        k.pair("stationarity_g_pro2pro", Some(h), lpv - lb, lpv.abs().max(lb.abs()), sol.g_pro2pro[h]);
        if t.feed_in_allowed() {
            let fit = tp.feed_in[h];
            let s = -fit + lpv + lcap(h);
            k.pair("stationarity_g_pro2m", Some(h), s, fit.abs().max(lpv.abs()).max(lcap(h).abs()), sol.g_pro2m[h]);
        }
        k.pair("stationarity_curtailment", Some(h), lpv, 0.0, sol.cu[h]);
        k.pair(
            "stationarity_sto_in",
            Some(h),
            lpv - a * ls + li,
            lpv.abs().max((a * ls).abs()).max(li.abs()),
            sol.sto_in[h],
        );
        k.pair(
            "stationarity_sto_out",
            Some(h),
            -lb + b * ls + lo,
            lb.abs().max((b * ls).abs()).max(lo.abs()),
            sol.sto_out[h],
        );
        k.pair(
            "stationarity_sto_level",
            Some(h),
            ll + ls - ls_next,
            ll.abs().max(ls.abs()).max(ls_next.abs()),
            sol.sto_level[h],
        );

        k.pair("complementarity_level_cap", Some(h), sol.n_sto_e - sol.sto_level[h], sol.n_sto_e, ll);
        k.pair("complementarity_charge_cap", Some(h), sol.n_sto_p - sol.sto_in[h], sol.n_sto_p, li);
        k.pair("complementarity_discharge_cap", Some(h), sol.n_sto_p - sol.sto_out[h], sol.n_sto_p, lo);
        if let Some(f) = cap {
            k.pair("complementarity_feed_in_cap", Some(h), f * sol.n_pv - sol.g_pro2m[h], f * sol.n_pv, du.feed_in_cap[h]);
        }

        let terms = [sol.g_pro2pro[h], sol.sto_out[h], sol.e_m2pro[h], d[h]];
        k.equality(
            "energy_balance",
            Some(h),
            sol.g_pro2pro[h] + sol.sto_out[h] + sol.e_m2pro[h] - d[h],
            crate::kkt::abs_max(&terms),
        );
        let gen = phi[h] * sol.n_pv;
        let terms = [gen, sol.g_pro2pro[h], sol.g_pro2m[h], sol.cu[h], sol.sto_in[h]];
        k.equality(
            "pv_balance",
            Some(h),
            gen - sol.g_pro2pro[h] - sol.g_pro2m[h] - sol.cu[h] - sol.sto_in[h],
            crate::kkt::abs_max(&terms),
        );
        let prev = if h > 0 { sol.sto_level[h - 1] } else { 0.0 };
        let terms = [prev, dt * a * sol.sto_in[h], dt * b * sol.sto_out[h], sol.sto_level[h]];
        k.equality(
            "storage_balance",
            Some(h),
            prev + dt * a * sol.sto_in[h] - dt * b * sol.sto_out[h] - sol.sto_level[h],
            crate::kkt::abs_max(&terms),
        );
        if !t.feed_in_allowed() {
            k.equality("no_feed_in", Some(h), sol.g_pro2m[h], 0.0);
        }
    }

    let sum_level: f64 = du.level_cap.iter().sum();
    let ce = p.energy_capacity_cost();
    k.pair(
        "stationarity_n_sto_e",
        None,
        ce - sum_level,
        ce.max(du.level_cap.iter().map(|v| v.abs()).sum()),
        sol.n_sto_e,
    );
    let sum_power: f64 = dt * du.charge_cap.iter().zip(&du.discharge_cap).map(|(i, o)| i + o).sum::<f64>();
    let cp = p.power_capacity_cost();
    k.pair(
        "stationarity_n_sto_p",
        None,
        cp - sum_power,
        cp.max(dt * du.charge_cap.iter().chain(&du.discharge_cap).map(|v| v.abs()).sum::<f64>()),
        sol.n_sto_p,
    );
    let pv_value: f64 = dt * phi.iter().zip(&du.pv_balance).map(|(f, l)| f * l).sum::<f64>();
    let pv_value_abs: f64 = dt * phi.iter().zip(&du.pv_balance).map(|(f, l)| (f * l).abs()).sum::<f64>();
    let (cap_value, cap_value_abs) = match cap {
        Some(f) => (
            f * dt * du.feed_in_cap.iter().sum::<f64>(),
            f * dt * du.feed_in_cap.iter().map(|v| v.abs()).sum::<f64>(),
        ),
        None => (0.0, 0.0),
    };
    let cpv = p.pv_capacity_cost();
    k.pair(
        "stationarity_n_pv",
        None,
        cpv - pv_value - cap_value + du.pv_limit,
        cpv.max(pv_value_abs).max(cap_value_abs).max(du.pv_limit.abs()),
        sol.n_pv,
    );
    k.pair("complementarity_pv_limit", None, p.m_pv - sol.n_pv, p.m_pv, du.pv_limit);
    k.finish()
}

/// Levelized cost of PV electricity in EUR/kWh, from annual full-load hours.
pub fn lcoe_pv(p: &ProsumageParams) -> f64 {
    let horizon_hours = p.pv_cf.len() as f64 * p.pv_cf.step_hours();
    let flh = p.pv_cf.weighted_sum() * HOURS_PER_YEAR / horizon_hours;
    if flh > 0.0 {
        p.pv_capacity_cost() / flh
    } else {
        f64::INFINITY
    }
}

/// Levelized cost of storage in EUR/kWh: one full cycle per day, power rated
/// at a quarter of the energy capacity, losses charged to the delivered energy.
pub fn lcos(p: &ProsumageParams) -> f64 {
    (p.energy_capacity_cost() + p.power_capacity_cost() / 4.0) / (365.0 * p.eta_sto)
}

/// PV LCOE from the default cost table for a given number of full-load hours.
pub fn default_lcoe(full_load_hours: f64) -> f64 {
    (annualized_cost(&presets::pv_cost_inputs()) + presets::PV_FIXED_COST) / full_load_hours
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Investment incentive area for PV and batteries.
///
/// A battery pays when the retail price exceeds the value of the stored
/// energy's alternative use (the larger of feed-in and own generation cost)
/// by more than the storage cost.
pub fn classify_regime(lcoe_pv: f64, lcos: f64, retail_volumetric: f64, fit: f64) -> Regime {
    if lcoe_pv >= fit.max(retail_volumetric) {
        Regime::A
    } else if fit > lcoe_pv && fit >= retail_volumetric {
        Regime::B
    } else if retail_volumetric - fit.max(lcoe_pv) > lcos {
        if fit >= lcoe_pv {
            Regime::F
        } else {
            Regime::E
        }
    } else if fit >= lcoe_pv {
        Regime::C
    } else {
        Regime::D
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::VERIFY_TOLERANCE;

    fn series(values: &[f64], unit: Unit) -> TimeSeries {
        TimeSeries::new(values.to_vec(), unit, 1.0).unwrap()
    }

    fn toy(pv_cost: f64, demand: &[f64], phi: &[f64]) -> ProsumageParams {
        ProsumageParams {
            c_inv_pv: pv_cost,
            c_fix_pv: 0.0,
            c_inv_sto_e: 1e3,
            c_inv_sto_p: 1e3,
            c_fix_sto: 0.0,
            eta_sto: 0.92,
            m_pv: 10.0,
            demand: series(demand, Unit::Kw),
            pv_cf: series(phi, Unit::Fraction),
            n_households: 1,
        }
    }

    fn volumetric(retail: f64, feed_in: FeedIn) -> Tariff {
        Tariff {
            energy_charge: EnergyCharge::Fixed { rate: 0.05 },
            other_charge: retail - 0.05,
            fixed_charge: 0.0,
            feed_in,
            feed_in_cap_fraction: None,
        }
    }

    /// Best PV size on a 0.01 kW grid when PV serves demand directly and any
    /// surplus is sold at `fit` (storage excluded).
    fn grid_search(p: &ProsumageParams, retail: f64, fit: f64) -> (f64, f64) {
        let mut best = (0.0, f64::INFINITY);
        for i in 0..=((p.m_pv * 100.0).round() as usize) {
            let n = i as f64 * 0.01;
            let mut z = p.pv_capacity_cost() * n;
            for (d, phi) in p.demand.values().iter().zip(p.pv_cf.values()) {
                let gen = phi * n;
                z += retail * (d - gen).max(0.0) - fit * (gen - d).max(0.0);
            }
            if z < best.1 - 1e-12 {
                best = (n, z);
            }
        }
        best
    }

    #[test]
    fn two_hour_toy_installs_one_kw() {
        let p = toy(0.10, &[1.0, 1.0], &[1.0, 0.0]);
        let t = volumetric(0.30, FeedIn::Prohibited);
        let sol = solve_household(&p, &t, None).unwrap();
        let (n_oracle, z_oracle) = grid_search(&p, 0.30, 0.0);
        assert!((sol.n_pv - n_oracle).abs() <= 0.01, "{} vs {n_oracle}", sol.n_pv);
        assert!((sol.z_pro - z_oracle).abs() <= 1e-6, "{} vs {z_oracle}", sol.z_pro);
        assert!((sol.z_pro - 0.40).abs() <= 1e-6);
        assert!(sol.e_m2pro[0].abs() < 1e-7 && (sol.e_m2pro[1] - 1.0).abs() < 1e-7);
        assert!(check_household_kkt(&p, &t, None, &sol).passes(VERIFY_TOLERANCE));
    }

    #[test]
    fn expensive_pv_leaves_a_pure_consumer() {
        let p = toy(0.50, &[1.0, 1.0], &[1.0, 0.0]);
        let t = volumetric(0.30, FeedIn::Prohibited);
        let sol = solve_household(&p, &t, None).unwrap();
        let (n_oracle, z_oracle) = grid_search(&p, 0.30, 0.0);
        assert_eq!(n_oracle, 0.0);
        assert!(sol.n_pv.abs() <= 1e-9);
        assert!((sol.z_pro - z_oracle).abs() <= 1e-6 && (sol.z_pro - 0.60).abs() <= 1e-6);
    }

    #[test]
    fn zero_demand_without_feed_in_income_costs_only_the_fixed_charge() {
        let p = toy(0.10, &[0.0, 0.0, 0.0], &[0.5, 1.0, 0.0]);
        let mut t = volumetric(0.30, FeedIn::Fixed { rate: 0.0 });
        t.fixed_charge = 250.0;
        let sol = solve_household(&p, &t, None).unwrap();
        assert_eq!(sol.capacities(), Capacities { n_pv: 0.0, n_sto_e: 0.0, n_sto_p: 0.0 });
        assert!((sol.z_pro - 250.0).abs() <= 1e-9);
    }

    #[test]
    fn rtp_without_prices_is_rejected() {
        let p = toy(0.10, &[1.0], &[1.0]);
        let t = Tariff { feed_in: FeedIn::RealTime, ..volumetric(0.30, FeedIn::Prohibited) };
        assert!(matches!(build_household_lp(&p, &t, None), Err(Error::MissingPrices)));
        let short = TimeSeries::new(vec![0.04, 0.04], Unit::EurPerKwh, 1.0).unwrap();
        assert!(matches!(
            build_household_lp(&p, &t, Some(&short)),
            Err(Error::HorizonMismatch { .. })
        ));
    }

    #[test]
    fn storage_shifts_midday_surplus_to_the_evening() {
        // Cheap storage, no feed-in: the oracle is exact because PV is free.
        let mut p = toy(0.0, &[0.0, 1.0], &[1.0, 0.0]);
        p.c_inv_sto_e = 0.01;
        p.c_inv_sto_p = 0.01;
        p.m_pv = 5.0;
        let t = volumetric(0.30, FeedIn::Prohibited);
        let sol = solve_household(&p, &t, None).unwrap();
        let (a, b) = (p.charge_factor(), p.discharge_factor());
        // deliver 1 kWh in hour 2: level 1·b, charge b/a, power rating b/a
        let expected = 0.01 * b + 0.01 * (b / a);
        assert!((sol.z_pro - expected).abs() <= 1e-7, "{} vs {expected}", sol.z_pro);
        assert!(sol.e_m2pro.iter().all(|v| v.abs() < 1e-7));
        assert!(check_household_kkt(&p, &t, None, &sol).passes(VERIFY_TOLERANCE));
    }

    #[test]
    fn feed_in_cap_limits_exports() {
        let p = toy(0.02, &[0.2, 0.2, 0.2], &[0.0, 1.0, 0.5]);
        let mut t = volumetric(0.30, FeedIn::Fixed { rate: 0.08 });
        t.feed_in_cap_fraction = Some(0.5);
        let sol = solve_household(&p, &t, None).unwrap();
        assert!((sol.n_pv - 10.0).abs() < 1e-9);
        for g in &sol.g_pro2m {
            assert!(*g <= 0.5 * sol.n_pv + 1e-9);
        }
        assert!(check_household_kkt(&p, &t, None, &sol).passes(VERIFY_TOLERANCE));
    }

    #[test]
    fn regime_examples() {
        assert_eq!(classify_regime(0.075, 0.12, 0.30, 0.08), Regime::F);
        assert_eq!(classify_regime(0.075, 0.12, 0.30, 0.04), Regime::E);
        assert_eq!(classify_regime(0.075, 0.12, 0.15, 0.08), Regime::C);
        assert_eq!(classify_regime(0.075, 0.12, 0.15, 0.00), Regime::D);
        assert_eq!(classify_regime(0.40, 0.12, 0.30, 0.08), Regime::A);
        assert_eq!(classify_regime(0.075, 0.12, 0.30, 0.35), Regime::B);
    }

    #[test]
    fn default_lcoe_is_near_seven_and_a_half_cents() {
        let lcoe = default_lcoe(1090.0);
        assert!((lcoe - 0.075).abs() < 0.001, "{lcoe}");
    }

    #[test]
    fn tariff_validation_names_the_field() {
        let t = volumetric(0.30, FeedIn::Fixed { rate: -0.1 });
        let msg = t.validate().unwrap_err().to_string();
        assert!(msg.contains("feed_in"), "{msg}");
        let t = Tariff { feed_in_cap_fraction: Some(1.5), ..volumetric(0.30, FeedIn::Prohibited) };
        assert!(t.validate().is_err());
    }
}
