//! Power-sector dispatch with exogenous capacities, in MW, MWh and EUR/MWh.
//!
//! ```text
//! balance    Δ(Σ G_con + Σ G_res + Σ STO_out − Σ STO_in + LL) = Δ(d + E_m2pro − G_pro2m)
//! renewable  Δ(G_res + CU_res)                               = Δ φ n
//! storage    L_{h-1} + Δ a STO_in − Δ b STO_out − L_h        = 0
//! ```
//!
//! Generation, storage power and level limits are variable bounds; their
//! multipliers are recovered from reduced costs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inputs::{TimeSeries, Unit};
use crate::kkt::{abs_max, KktBuilder, KktReport};
use crate::lp::{solve_lp, LinearProgram, LpSolution, Relation, VarId, DEFAULT_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConventionalTech {
    pub name: String,
    /// EUR/MWh.
    pub marginal_cost: f64,
    pub capacity_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewableTech {
    pub name: String,
    pub capacity_mw: f64,
    pub cf: TimeSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageTech {
    pub name: String,
    pub efficiency: f64,
    pub energy_mwh: f64,
    pub power_mw: f64,
}

impl StorageTech {
    fn charge_factor(&self) -> f64 {
        (1.0 + self.efficiency) / 2.0
    }

    fn discharge_factor(&self) -> f64 {
        2.0 / (1.0 + self.efficiency)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchParams {
    pub conventional: Vec<ConventionalTech>,
    pub renewables: Vec<RenewableTech>,
    pub storage: Vec<StorageTech>,
    /// Non-prosumage demand in MW.
    pub demand: TimeSeries,
    /// EUR/MWh; `None` removes the lost-load slack.
    pub voll: Option<f64>,
}

impl DispatchParams {
    pub fn validate(&self) -> Result<()> {
        if self.demand.unit() != Unit::Mw {
            return Err(Error::InvalidInput("system demand must be in MW".into()));
        }
        for c in &self.conventional {
            if !(c.capacity_mw.is_finite() && c.capacity_mw >= 0.0) {
                return Err(Error::InvalidInput(format!("{}: capacity {} MW", c.name, c.capacity_mw)));
            }
            if !(c.marginal_cost.is_finite() && c.marginal_cost >= 0.0) {
                return Err(Error::InvalidInput(format!("{}: marginal cost {}", c.name, c.marginal_cost)));
            }
        }
        for r in &self.renewables {
            if !(r.capacity_mw.is_finite() && r.capacity_mw >= 0.0) {
                return Err(Error::InvalidInput(format!("{}: capacity {} MW", r.name, r.capacity_mw)));
            }
            if r.cf.unit() != Unit::Fraction {
                return Err(Error::InvalidInput(format!("{}: availability must be a fraction", r.name)));
            }
            self.demand.check_same_horizon(&r.cf, &r.name)?;
        }
        for s in &self.storage {
            if !(s.efficiency > 0.0 && s.efficiency <= 1.0) {
                return Err(Error::InvalidInput(format!("{}: efficiency {} outside (0, 1]", s.name, s.efficiency)));
            }
            if !(s.energy_mwh.is_finite() && s.energy_mwh >= 0.0 && s.power_mw.is_finite() && s.power_mw >= 0.0) {
                return Err(Error::InvalidInput(format!("{}: capacities must be non-negative", s.name)));
            }
        }
        if let Some(v) = self.voll {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("value of lost load {v} must be positive")));
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.demand.len()
    }

    pub fn step_hours(&self) -> f64 {
        self.demand.step_hours()
    }
}

/// Aggregate household exchange with the grid, MW per hour.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HouseholdExchange {
    pub purchases_mw: Vec<f64>,
    pub feed_in_mw: Vec<f64>,
}

impl HouseholdExchange {
    pub fn zeros(horizon: usize) -> Self {
        HouseholdExchange {
            purchases_mw: vec![0.0; horizon],
            feed_in_mw: vec![0.0; horizon],
        }
    }
}

/// Load the system must serve each hour: `d + E_m2pro − G_pro2m`.
fn net_load(p: &DispatchParams, hh: &HouseholdExchange) -> Result<Vec<f64>> {
    let n = p.horizon();
    for (what, v) in [("household purchases", &hh.purchases_mw), ("household feed-in", &hh.feed_in_mw)] {
        if v.len() != n {
            return Err(Error::HorizonMismatch {
                what: what.into(),
                expected: n,
                found: v.len(),
            });
        }
    }
    Ok((0..n)
        .map(|h| p.demand.values()[h] + hh.purchases_mw[h] - hh.feed_in_mw[h])
        .collect())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DispatchDuals {
    /// Value of renewable availability per technology and hour, EUR/MWh.
    pub renewable: Vec<Vec<f64>>,
    pub storage_balance: Vec<Vec<f64>>,
    pub conventional_cap: Vec<Vec<f64>>,
    pub charge_cap: Vec<Vec<f64>>,
    pub discharge_cap: Vec<Vec<f64>>,
    pub level_cap: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchSolution {
    pub step_hours: f64,
    /// `d + E_m2pro − G_pro2m`, MW.
    pub load: Vec<f64>,
    pub g_con: Vec<Vec<f64>>,
    pub g_res: Vec<Vec<f64>>,
    pub cu_res: Vec<Vec<f64>>,
    pub sto_in: Vec<Vec<f64>>,
    pub sto_out: Vec<Vec<f64>>,
    pub sto_level: Vec<Vec<f64>>,
    pub lost_load: Vec<f64>,
    /// Balance-row duals, EUR/MWh.
    pub prices: Vec<f64>,
    /// Duals with degenerate storage-idle hours replaced by the merit-order price.
    pub canonical_prices: Vec<f64>,
    pub degenerate: Vec<bool>,
    pub z_sys: f64,
    pub duals: DispatchDuals,
}

impl DispatchSolution {
    pub fn horizon(&self) -> usize {
        self.load.len()
    }

    pub fn total_lost_load(&self) -> f64 {
        self.lost_load.iter().sum::<f64>() * self.step_hours
    }

    pub fn storage_active(&self, h: usize) -> bool {
        self.sto_in.iter().chain(&self.sto_out).any(|s| s[h] > ACTIVITY_TOLERANCE)
    }
}

const ACTIVITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    n: usize,
    g_con: Vec<usize>,
    g_res: Vec<usize>,
    cu_res: Vec<usize>,
    sin: Vec<usize>,
    sout: Vec<usize>,
    lvl: Vec<usize>,
    lost: Option<usize>,
    pub(crate) balance: usize,
    renewable: Vec<usize>,
    storage: Vec<usize>,
}

/// Household purchase and feed-in variables (kW per household) entering the
/// balance rows with `mw_per_kw` MW per kW.
pub(crate) struct BalanceCoupling {
    pub(crate) purchases: usize,
    pub(crate) feed_in: usize,
    pub(crate) mw_per_kw: f64,
}

#[derive(Debug, Clone)]
pub struct DispatchLp {
    pub lp: LinearProgram,
    load: Vec<f64>,
    layout: Layout,
}

pub fn build_dispatch_lp(p: &DispatchParams, hh: &HouseholdExchange) -> Result<DispatchLp> {
    p.validate()?;
    let load = net_load(p, hh)?;
    let mut lp = LinearProgram::new();
    let layout = add_dispatch(&mut lp, p, &load, None)?;
    Ok(DispatchLp { lp, load, layout })
}

/// Append the dispatch variables and rows to `lp`, serving `load` (MW) plus
/// the coupled household exchange if any.
pub(crate) fn add_dispatch(
    lp: &mut LinearProgram,
    p: &DispatchParams,
    load: &[f64],
    coupling: Option<BalanceCoupling>,
) -> Result<Layout> {
    let n = p.horizon();
    let dt = p.step_hours();
    let block = |lp: &mut LinearProgram, name: &str, upper: f64, cost: f64| -> Result<usize> {
        let start = lp.num_variables();
        for h in 0..n {
            lp.add_variable(format!("{name}[{h}]"), 0.0, upper, cost)?;
        }
        Ok(start)
    };
    let inf = f64::INFINITY;

    let mut g_con = Vec::new();
    for c in &p.conventional {
        g_con.push(block(lp, &format!("g_con_{}", c.name), c.capacity_mw, dt * c.marginal_cost)?);
    }
    let (mut g_res, mut cu_res) = (Vec::new(), Vec::new());
    for r in &p.renewables {
        g_res.push(block(lp, &format!("g_res_{}", r.name), inf, 0.0)?);
        cu_res.push(block(lp, &format!("cu_res_{}", r.name), inf, 0.0)?);
    }
    let (mut sin, mut sout, mut lvl) = (Vec::new(), Vec::new(), Vec::new());
    for s in &p.storage {
        sin.push(block(lp, &format!("sto_in_{}", s.name), s.power_mw, 0.0)?);
        sout.push(block(lp, &format!("sto_out_{}", s.name), s.power_mw, 0.0)?);
        lvl.push(block(lp, &format!("sto_level_{}", s.name), s.energy_mwh, 0.0)?);
    }
    let lost = match p.voll {
        Some(voll) => Some(block(lp, "lost_load", inf, dt * voll)?),
        None => None,
    };
    let v = |base: usize, h: usize| VarId(base + h);

    let balance = lp.num_constraints();
    for h in 0..n {
        let mut row: Vec<(VarId, f64)> = Vec::new();
        row.extend(g_con.iter().map(|&b| (v(b, h), dt)));
        row.extend(g_res.iter().map(|&b| (v(b, h), dt)));
        row.extend(sout.iter().map(|&b| (v(b, h), dt)));
        row.extend(sin.iter().map(|&b| (v(b, h), -dt)));
        if let Some(b) = lost {
            row.push((v(b, h), dt));
        }
        if let Some(c) = &coupling {
            row.push((v(c.purchases, h), -dt * c.mw_per_kw));
            row.push((v(c.feed_in, h), dt * c.mw_per_kw));
        }
        lp.add_constraint(format!("balance[{h}]"), row, Relation::Eq, dt * load[h])?;
    }
    let mut renewable = Vec::new();
    for (i, r) in p.renewables.iter().enumerate() {
        renewable.push(lp.num_constraints());
        for h in 0..n {
            lp.add_constraint(
                format!("res_split_{}[{h}]", r.name),
                [(v(g_res[i], h), dt), (v(cu_res[i], h), dt)],
                Relation::Eq,
                dt * r.cf.values()[h] * r.capacity_mw,
            )?;
        }
    }
    let mut storage = Vec::new();
    for (i, s) in p.storage.iter().enumerate() {
        storage.push(lp.num_constraints());
        for h in 0..n {
            let mut row = vec![
                (v(sin[i], h), dt * s.charge_factor()),
                (v(sout[i], h), -dt * s.discharge_factor()),
                (v(lvl[i], h), -1.0),
            ];
            if h > 0 {
                row.push((v(lvl[i], h - 1), 1.0));
            }
            lp.add_constraint(format!("storage_{}[{h}]", s.name), row, Relation::Eq, 0.0)?;
        }
    }
    Ok(Layout {
        n,
        g_con,
        g_res,
        cu_res,
        sin,
        sout,
        lvl,
        lost,
        balance,
        renewable,
        storage,
    })
}

fn interior(x: f64, upper: f64) -> bool {
    let tol = 1e-7 * (1.0 + upper.abs());
    x > tol && x < upper - tol
}

/// Read the dispatch block of an optimal LP solution back. `load` is the
/// total load served, household exchange included. With `canonical` set,
/// degenerate storage-idle hours get the merit-order price as canonical
/// price; otherwise canonical prices are the duals themselves.
pub(crate) fn extract_dispatch(
    layout: &Layout,
    p: &DispatchParams,
    load: Vec<f64>,
    sol: &LpSolution,
    canonical: bool,
) -> Result<DispatchSolution> {
    if !sol.is_optimal() {
        return Err(Error::NotOptimal {
            problem: "dispatch".into(),
            status: sol.status.to_string(),
        });
    }
    let l = layout;
    let n = l.n;
    let dt = p.step_hours();
    let x = &sol.primal;
    let rc = &sol.reduced_costs;
    let take = |base: usize| x[base..base + n].iter().map(|v| v.max(0.0)).collect::<Vec<_>>();
    let rows = |base: usize| sol.duals[base..base + n].to_vec();
    // multiplier of an upper bound: −d where the variable sits at it
    let upper_mult = |base: usize, upper: f64, scale: f64| -> Vec<f64> {
        (0..n)
            .map(|h| {
                let at = (x[base + h] - upper).abs() <= 1e-9 * (1.0 + upper.abs());
                if at {
                    (-rc[base + h] / scale).max(0.0)
                } else {
                    0.0
                }
            })
            .collect()
    };

    let g_con: Vec<Vec<f64>> = l.g_con.iter().map(|&b| take(b)).collect();
    let g_res: Vec<Vec<f64>> = l.g_res.iter().map(|&b| take(b)).collect();
    let cu_res: Vec<Vec<f64>> = l.cu_res.iter().map(|&b| take(b)).collect();
    let sto_in: Vec<Vec<f64>> = l.sin.iter().map(|&b| take(b)).collect();
    let sto_out: Vec<Vec<f64>> = l.sout.iter().map(|&b| take(b)).collect();
    let lost_load = l.lost.map(take).unwrap_or_else(|| vec![0.0; n]);
    let prices = rows(l.balance);

    let mut degenerate = vec![false; n];
    let mut canonical_prices = prices.clone();
    for h in 0..n {
        let marginal_con = p
            .conventional
            .iter()
            .zip(&g_con)
            .any(|(c, g)| interior(g[h], c.capacity_mw));
        let marginal_res = g_res.iter().zip(&cu_res).any(|(g, c)| g[h] > 1e-7 && c[h] > 1e-7);
        let shedding = lost_load[h] > 1e-7;
        let storage_active = sto_in.iter().chain(&sto_out).any(|s| s[h] > ACTIVITY_TOLERANCE);
        degenerate[h] = !(marginal_con || marginal_res || shedding);
        if canonical && degenerate[h] && !storage_active {
            canonical_prices[h] = merit_order_price(p, load[h], h);
        }
    }

    let duals = DispatchDuals {
        renewable: l.renewable.iter().map(|&b| rows(b).into_iter().map(|y| -y).collect()).collect(),
        storage_balance: l.storage.iter().map(|&b| rows(b)).collect(),
        conventional_cap: l
            .g_con
            .iter()
            .zip(&p.conventional)
            .map(|(&b, c)| upper_mult(b, c.capacity_mw, dt))
            .collect(),
        charge_cap: l.sin.iter().zip(&p.storage).map(|(&b, s)| upper_mult(b, s.power_mw, dt)).collect(),
        discharge_cap: l.sout.iter().zip(&p.storage).map(|(&b, s)| upper_mult(b, s.power_mw, dt)).collect(),
        level_cap: l.lvl.iter().zip(&p.storage).map(|(&b, s)| upper_mult(b, s.energy_mwh, 1.0)).collect(),
    };
    let z_sys = dt
        * (p.conventional
            .iter()
            .zip(&g_con)
            .map(|(c, g)| c.marginal_cost * g.iter().sum::<f64>())
            .sum::<f64>()
            + p.voll.unwrap_or(0.0) * lost_load.iter().sum::<f64>());

    if lost_load.iter().sum::<f64>() > 1e-6 {
        log::warn!("dispatch sheds {:.3} MWh of load", lost_load.iter().sum::<f64>() * dt);
    }
    Ok(DispatchSolution {
        step_hours: dt,
        load,
        g_con,
        g_res,
        cu_res,
        sto_in,
        sto_out,
        sto_level: l.lvl.iter().map(|&b| take(b)).collect(),
        lost_load,
        prices,
        canonical_prices,
        degenerate,
        z_sys,
        duals,
    })
}

impl DispatchLp {
    pub fn extract(&self, p: &DispatchParams, sol: &LpSolution) -> Result<DispatchSolution> {
        extract_dispatch(&self.layout, p, self.load.clone(), sol, true)
    }
}

pub fn solve_dispatch(p: &DispatchParams, hh: &HouseholdExchange) -> Result<DispatchSolution> {
    let d = build_dispatch_lp(p, hh)?;
    let sol = solve_lp(&d.lp, DEFAULT_TOLERANCE);
    d.extract(p, &sol)
}

/// Marginal cost of the cheapest dispatchable technology with spare capacity
/// once renewables available in `hour` are used; zero when renewables alone
/// exceed `load_mw`, the value of lost load when nothing is left.
pub fn merit_order_price(p: &DispatchParams, load_mw: f64, hour: usize) -> f64 {
    let renewable: f64 = p.renewables.iter().map(|r| r.capacity_mw * r.cf.values()[hour]).sum();
    let mut residual = load_mw - renewable;
    if residual < 0.0 {
        return 0.0;
    }
    let mut order: Vec<&ConventionalTech> = p.conventional.iter().collect();
    order.sort_by(|a, b| a.marginal_cost.total_cmp(&b.marginal_cost));
    for c in order {
        if residual < c.capacity_mw {
            return c.marginal_cost;
        }
        residual -= c.capacity_mw;
    }
    p.voll.unwrap_or(f64::INFINITY)
}

/// Evaluate the dispatch optimality system at `sol`, per MWh.
pub fn check_dispatch_kkt(p: &DispatchParams, hh: &HouseholdExchange, sol: &DispatchSolution) -> KktReport {
    let mut k = KktBuilder::default();
    let n = p.horizon();
    let load = match net_load(p, hh) {
        Ok(l) if sol.horizon() == n => l,
        _ => {
            k.equality("horizon", None, f64::INFINITY, 0.0);
            return k.finish();
        }
    };
    let dt = p.step_hours();
    let du = &sol.duals;
    k.declare("stationarity_sto_in");
    k.declare("complementarity_sto_level_cap");

    for h in 0..n {
        let lb = sol.prices[h];
        for (i, c) in p.conventional.iter().enumerate() {
            let lc = du.conventional_cap[i][h];
            let g = sol.g_con[i][h];
            k.pair(
                "stationarity_g_con",
                Some(h),
                c.marginal_cost - lb + lc,
                c.marginal_cost.max(lb.abs()).max(lc),
                g,
            );
            k.pair("complementarity_con_cap", Some(h), c.capacity_mw - g, c.capacity_mw, lc);
        }
        for (i, r) in p.renewables.iter().enumerate() {
            let lr = du.renewable[i][h];
            k.pair("stationarity_g_res", Some(h), lr - lb, lr.abs().max(lb.abs()), sol.g_res[i][h]);
            k.pair("stationarity_cu_res", Some(h), lr, 0.0, sol.cu_res[i][h]);
            let avail = r.cf.values()[h] * r.capacity_mw;
            k.equality(
                "renewable_split",
                Some(h),
                sol.g_res[i][h] + sol.cu_res[i][h] - avail,
                abs_max(&[sol.g_res[i][h], sol.cu_res[i][h], avail]),
            );
        }
        for (i, s) in p.storage.iter().enumerate() {
            let (a, b) = (s.charge_factor(), s.discharge_factor());
            let ls = du.storage_balance[i][h];
            let ls_next = if h + 1 < n { du.storage_balance[i][h + 1] } else { 0.0 };
            let (li, lo, ll) = (du.charge_cap[i][h], du.discharge_cap[i][h], du.level_cap[i][h]);
            let (si, so, sl) = (sol.sto_in[i][h], sol.sto_out[i][h], sol.sto_level[i][h]);
            k.pair("stationarity_sto_in", Some(h), lb - a * ls + li, lb.abs().max((a * ls).abs()).max(li), si);
            k.pair("stationarity_sto_out", Some(h), -lb + b * ls + lo, lb.abs().max((b * ls).abs()).max(lo), so);
            k.pair(
                "stationarity_sto_level",
                Some(h),
                ls - ls_next + ll,
                ls.abs().max(ls_next.abs()).max(ll),
                sl,
            );
            k.pair("complementarity_sto_in_cap", Some(h), s.power_mw - si, s.power_mw, li);
            k.pair("complementarity_sto_out_cap", Some(h), s.power_mw - so, s.power_mw, lo);
            k.pair("complementarity_sto_level_cap", Some(h), s.energy_mwh - sl, s.energy_mwh, ll);
            let prev = if h > 0 { sol.sto_level[i][h - 1] } else { 0.0 };
            k.equality(
                "storage_balance",
                Some(h),
                prev + dt * a * si - dt * b * so - sl,
                abs_max(&[prev, dt * a * si, dt * b * so, sl]),
            );
        }
        match p.voll {
            Some(voll) => k.pair("stationarity_lost_load", Some(h), voll - lb, voll.max(lb.abs()), sol.lost_load[h]),
            None => k.equality("no_lost_load", Some(h), sol.lost_load[h], 0.0),
        }

        let supply: f64 = sol.g_con.iter().chain(&sol.g_res).chain(&sol.sto_out).map(|g| g[h]).sum::<f64>()
            - sol.sto_in.iter().map(|s| s[h]).sum::<f64>()
            + sol.lost_load[h];
        let scale = sol
            .g_con
            .iter()
            .chain(&sol.g_res)
            .chain(&sol.sto_out)
            .chain(&sol.sto_in)
            .map(|g| g[h].abs())
            .fold(load[h].abs().max(p.demand.values()[h]), f64::max);
        k.equality("market_clearing", Some(h), supply - load[h], scale);
    }
    k.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::VERIFY_TOLERANCE;

    fn demand(values: &[f64]) -> TimeSeries {
        TimeSeries::new(values.to_vec(), Unit::Mw, 1.0).unwrap()
    }

    fn con(name: &str, cost: f64, cap: f64) -> ConventionalTech {
        ConventionalTech {
            name: name.into(),
            marginal_cost: cost,
            capacity_mw: cap,
        }
    }

    fn system(techs: Vec<ConventionalTech>, d: &[f64]) -> DispatchParams {
        DispatchParams {
            conventional: techs,
            renewables: vec![],
            storage: vec![],
            demand: demand(d),
            voll: Some(3000.0),
        }
    }

    fn solve(p: &DispatchParams) -> DispatchSolution {
        let hh = HouseholdExchange::zeros(p.horizon());
        let sol = solve_dispatch(p, &hh).unwrap();
        let kkt = check_dispatch_kkt(p, &hh, &sol);
        assert!(kkt.passes(VERIFY_TOLERANCE), "{kkt}");
        sol
    }

    #[test]
    fn single_technology_sets_the_price() {
        for dt in [1.0, 4.0] {
            let mut p = system(vec![con("lignite", 38.8, 20.0)], &[10.0]);
            p.demand = TimeSeries::new(vec![10.0], Unit::Mw, dt).unwrap();
            let sol = solve(&p);
            assert!((sol.g_con[0][0] - 10.0).abs() < 1e-9);
            assert!((sol.prices[0] - 38.8).abs() < 1e-9);
            assert!((sol.z_sys - 388.0 * dt).abs() < 1e-6);
        }
    }

    #[test]
    fn shortage_sheds_load_at_voll() {
        let sol = solve(&system(vec![con("lignite", 38.8, 5.0)], &[8.0]));
        assert!((sol.lost_load[0] - 3.0).abs() < 1e-9);
        assert!((sol.prices[0] - 3000.0).abs() < 1e-6);
    }

    #[test]
    fn zero_demand_costs_nothing() {
        let sol = solve(&system(vec![con("lignite", 38.8, 5.0)], &[0.0, 0.0]));
        assert_eq!(sol.z_sys, 0.0);
        assert!(sol.g_con[0].iter().all(|g| *g == 0.0));
    }

    #[test]
    fn expensive_unit_is_marginal() {
        let p = system(vec![con("cheap", 38.8, 5.0), con("expensive", 77.39, 10.0)], &[8.0]);
        let sol = solve(&p);
        assert!((sol.g_con[0][0] - 5.0).abs() < 1e-9);
        assert!((sol.g_con[1][0] - 3.0).abs() < 1e-9);
        assert!((sol.prices[0] - 77.39).abs() < 1e-9);
        assert_eq!(merit_order_price(&p, 8.0, 0), 77.39);
        assert!(!sol.degenerate[0]);
    }

    #[test]
    fn renewable_surplus_is_free() {
        let mut p = system(vec![con("lignite", 38.8, 5.0)], &[4.0]);
        p.renewables.push(RenewableTech {
            name: "wind".into(),
            capacity_mw: 10.0,
            cf: TimeSeries::new(vec![0.6], Unit::Fraction, 1.0).unwrap(),
        });
        let sol = solve(&p);
        assert!(sol.prices[0].abs() < 1e-9);
        assert!((sol.cu_res[0][0] - 2.0).abs() < 1e-9);
        assert_eq!(merit_order_price(&p, 4.0, 0), 0.0);
    }

    #[test]
    fn merit_order_bands() {
        let p = system(vec![con("ocgt", 77.39, 10.0), con("lignite", 38.8, 5.0)], &[0.0]);
        assert_eq!(merit_order_price(&p, 3.0, 0), 38.8);
        assert_eq!(merit_order_price(&p, 7.0, 0), 77.39);
        assert_eq!(merit_order_price(&p, 20.0, 0), 3000.0);
    }

    #[test]
    fn degenerate_hour_gets_the_merit_order_price() {
        // demand exactly at the lignite limit: any price in [38.8, 77.39] is a valid dual
        let p = system(vec![con("lignite", 38.8, 5.0), con("ocgt", 77.39, 10.0)], &[5.0]);
        let sol = solve(&p);
        assert!(sol.degenerate[0]);
        assert!(sol.prices[0] >= 38.8 - 1e-9 && sol.prices[0] <= 77.39 + 1e-9);
        assert_eq!(sol.canonical_prices[0], 77.39);
    }

    #[test]
    fn storage_moves_energy_to_the_expensive_hour() {
        let mut p = system(vec![con("cheap", 10.0, 10.0), con("peaker", 100.0, 10.0)], &[5.0, 5.0, 14.0]);
        p.storage.push(StorageTech {
            name: "phs".into(),
            efficiency: 0.8,
            energy_mwh: 20.0,
            power_mw: 5.0,
        });
        let sol = solve(&p);
        assert!((sol.sto_out[0][2] - 4.0).abs() < 1e-9);
        assert!(sol.g_con[1][2] < 1e-6);
        // charging spans the two cheap hours, so the peak price is the loss-adjusted cheap price
        let (a, b) = (0.9, 2.0 / 1.8);
        assert!((sol.prices[2] - 10.0 * b / a).abs() < 1e-6, "{:?}", sol.prices);
    }

    #[test]
    fn perturbed_price_violates_marginal_stationarity() {
        let p = system(vec![con("cheap", 38.8, 5.0), con("expensive", 77.39, 10.0)], &[8.0]);
        let hh = HouseholdExchange::zeros(1);
        let mut sol = solve_dispatch(&p, &hh).unwrap();
        sol.prices[0] += 1.0;
        let kkt = check_dispatch_kkt(&p, &hh, &sol);
        let c = kkt.get("stationarity_g_con").unwrap();
        assert!(c.max_residual > 1e-3, "{kkt}");
    }

    #[test]
    fn household_exchange_shifts_the_load() {
        let p = system(vec![con("lignite", 38.8, 20.0)], &[10.0]);
        let hh = HouseholdExchange {
            purchases_mw: vec![3.0],
            feed_in_mw: vec![5.0],
        };
        let sol = solve_dispatch(&p, &hh).unwrap();
        assert!((sol.g_con[0][0] - 8.0).abs() < 1e-9);
        assert!(check_dispatch_kkt(&p, &hh, &sol).passes(VERIFY_TOLERANCE));
    }
}
