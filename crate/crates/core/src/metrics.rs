//! Indicators reported per scenario: self-consumption and autarky, the annual
//! bill by component, the household's residual load and its peaks.
//!
//! Everything here is per household in kW, kWh and EUR unless the name says
//! otherwise.

use serde::Serialize;

use crate::equilibrium::ScenarioResult;
use crate::household::{classify_regime, lcoe_pv, lcos, FeedIn, HouseholdSolution, ProsumageParams, Regime, Tariff};

/// Net exchange below this magnitude (kW) counts as a zero-exchange hour.
pub const ZERO_EXCHANGE_KW: f64 = 1e-3;

fn sum_energy(values: &[f64], dt: f64) -> f64 {
    values.iter().sum::<f64>() * dt
}

/// Share of available PV energy used on-site, directly or through the battery.
/// Returns `(rate, zero_generation)`; the rate is 0 when nothing is generated.
pub fn self_consumption_rate(sol: &HouseholdSolution) -> (f64, bool) {
    let generation = sol.pv_generation();
    if generation <= 0.0 {
        return (0.0, true);
    }
    let own = sum_energy(&sol.g_pro2pro, sol.step_hours) + sum_energy(&sol.sto_in, sol.step_hours);
    (own / generation, false)
}

/// Share of demand covered by own generation. Returns `(rate, zero_demand)`.
pub fn autarky_rate(sol: &HouseholdSolution) -> (f64, bool) {
    let demand = sol.total_demand();
    if demand <= 0.0 {
        return (0.0, true);
    }
    let own = sum_energy(&sol.g_pro2pro, sol.step_hours) + sum_energy(&sol.sto_out, sol.step_hours);
    (own / demand, false)
}

/// Autarky as one minus the grid's share of demand.
pub fn autarky_rate_from_grid(sol: &HouseholdSolution) -> f64 {
    let demand = sol.total_demand();
    if demand <= 0.0 {
        return 0.0;
    }
    1.0 - sum_energy(&sol.e_m2pro, sol.step_hours) / demand
}

/// Annual bill components, EUR/year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bill {
    pub investment_pv: f64,
    pub investment_sto: f64,
    pub grid_cost_energy: f64,
    pub grid_cost_other: f64,
    pub grid_cost_fixed: f64,
    pub feed_in_revenue: f64,
    pub net_total: f64,
}

/// Bill at the prices stored in the solution.
pub fn bill_decomposition(sol: &HouseholdSolution, p: &ProsumageParams, t: &Tariff) -> Bill {
    let dt = sol.step_hours;
    let weighted = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * dt;
    let investment_pv = sol.n_pv * p.pv_capacity_cost();
    let investment_sto = sol.n_sto_e * p.energy_capacity_cost() + sol.n_sto_p * p.power_capacity_cost();
    let grid_cost_energy = weighted(&sol.e_m2pro, &sol.prices.energy_charge);
    let grid_cost_other = sum_energy(&sol.e_m2pro, dt) * t.other_charge;
    let feed_in_revenue = weighted(&sol.g_pro2m, &sol.prices.feed_in);
    Bill {
        investment_pv,
        investment_sto,
        grid_cost_energy,
        grid_cost_other,
        grid_cost_fixed: t.fixed_charge,
        feed_in_revenue,
        net_total: investment_pv + investment_sto + grid_cost_energy + grid_cost_other + t.fixed_charge
            - feed_in_revenue,
    }
}

/// Hourly net grid exchange `E_m2pro − G_pro2m` sorted in descending order, kW.
pub fn residual_load_duration_curve(sol: &HouseholdSolution) -> Vec<f64> {
    let mut net: Vec<f64> = sol.e_m2pro.iter().zip(&sol.g_pro2m).map(|(e, g)| e - g).collect();
    net.sort_by(|a, b| b.total_cmp(a));
    net
}

/// `(peak grid purchase, peak feed-in)` in kW.
pub fn peaks(sol: &HouseholdSolution) -> (f64, f64) {
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    (max(&sol.e_m2pro), max(&sol.g_pro2m))
}

/// Volumetric non-energy charges plus the fixed charge, EUR/year.
pub fn non_energy_contribution(sol: &HouseholdSolution, t: &Tariff) -> f64 {
    sum_energy(&sol.e_m2pro, sol.step_hours) * t.other_charge + t.fixed_charge
}

/// Fractions of hours with positive, zero and negative net exchange.
pub fn exchange_hour_shares(rldc: &[f64]) -> (f64, f64, f64) {
    if rldc.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let n = rldc.len() as f64;
    let positive = rldc.iter().filter(|v| **v > ZERO_EXCHANGE_KW).count() as f64;
    let negative = rldc.iter().filter(|v| **v < -ZERO_EXCHANGE_KW).count() as f64;
    (positive / n, (n - positive - negative) / n, negative / n)
}

/// Volume-weighted mean of `prices` over `volumes`, or `None` without volume.
fn volume_weighted(prices: &[f64], volumes: &[f64]) -> Option<f64> {
    let total: f64 = volumes.iter().sum();
    (total > 0.0).then(|| prices.iter().zip(volumes).map(|(p, v)| p * v).sum::<f64>() / total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub sc_rate: f64,
    pub autarky_rate: f64,
    pub autarky_rate_from_grid: f64,
    pub zero_generation: bool,
    pub zero_demand: bool,
    pub pv_capacity: f64,
    pub storage_energy: f64,
    pub storage_power: f64,
    pub bill: Bill,
    pub z_pro: f64,
    pub rldc: Vec<f64>,
    pub positive_hours_share: f64,
    pub zero_hours_share: f64,
    pub negative_hours_share: f64,
    pub peak_demand: f64,
    pub peak_feed_in: f64,
    pub non_energy_contribution: f64,
    /// Shares of available PV energy going to direct use, storage, the grid and curtailment.
    pub pv_direct_share: f64,
    pub pv_storage_share: f64,
    pub pv_feed_in_share: f64,
    pub pv_curtailed_share: f64,
    /// Purchase-weighted energy charge and feed-in-weighted remuneration, EUR/kWh.
    pub mean_purchase_price: Option<f64>,
    pub mean_feed_in_price: Option<f64>,
    pub regime: Regime,
    pub grid_purchases_kwh: f64,
    pub feed_in_kwh: f64,
    pub curtailment_kwh: f64,
    pub aggregate_peak_purchases_mw: f64,
    pub aggregate_peak_feed_in_mw: f64,
    pub aggregate_net_exchange_mwh: f64,
    pub system_cost: f64,
    pub lost_load_mwh: f64,
}

impl MetricsReport {
    /// `Σ rldc · Δ`, kWh.
    pub fn rldc_energy(&self, step_hours: f64) -> f64 {
        self.rldc.iter().sum::<f64>() * step_hours
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn compute_metrics(result: &ScenarioResult, p: &ProsumageParams) -> MetricsReport {
    let sol = &result.household;
    let t = &result.tariff;
    let dt = sol.step_hours;
    let (sc_rate, zero_generation) = self_consumption_rate(sol);
    let (autarky, zero_demand) = autarky_rate(sol);
    let rldc = residual_load_duration_curve(sol);
    let (positive, zero, negative) = exchange_hour_shares(&rldc);
    let (peak_demand, peak_feed_in) = peaks(sol);
    let generation = sol.pv_generation();
    let share = |v: &[f64]| {
        if generation > 0.0 {
            sum_energy(v, dt) / generation
        } else {
            0.0
        }
    };
    let retail = mean(&sol.prices.energy_charge) + t.other_charge;
    let fit = match t.feed_in {
        FeedIn::Prohibited => 0.0,
        _ => mean(&sol.prices.feed_in),
    };
    let n = result.n_households as f64;
    let grid_purchases_kwh = sum_energy(&sol.e_m2pro, dt);
    let feed_in_kwh = sum_energy(&sol.g_pro2m, dt);
    MetricsReport {
        sc_rate,
        autarky_rate: autarky,
        autarky_rate_from_grid: autarky_rate_from_grid(sol),
        zero_generation,
        zero_demand,
        pv_capacity: sol.n_pv,
        storage_energy: sol.n_sto_e,
        storage_power: sol.n_sto_p,
        bill: bill_decomposition(sol, p, t),
        z_pro: sol.z_pro,
        rldc,
        positive_hours_share: positive,
        zero_hours_share: zero,
        negative_hours_share: negative,
        peak_demand,
        peak_feed_in,
        non_energy_contribution: non_energy_contribution(sol, t),
        pv_direct_share: share(&sol.g_pro2pro),
        pv_storage_share: share(&sol.sto_in),
        pv_feed_in_share: share(&sol.g_pro2m),
        pv_curtailed_share: share(&sol.cu),
        mean_purchase_price: volume_weighted(&sol.prices.energy_charge, &sol.e_m2pro),
        mean_feed_in_price: volume_weighted(&sol.prices.feed_in, &sol.g_pro2m),
        regime: classify_regime(lcoe_pv(p), lcos(p), retail, fit),
        grid_purchases_kwh,
        feed_in_kwh,
        curtailment_kwh: sum_energy(&sol.cu, dt),
        aggregate_peak_purchases_mw: peak_demand * n / 1000.0,
        aggregate_peak_feed_in_mw: peak_feed_in * n / 1000.0,
        aggregate_net_exchange_mwh: (grid_purchases_kwh - feed_in_kwh) * n / 1000.0,
        system_cost: result.dispatch.z_sys,
        lost_load_mwh: result.dispatch.total_lost_load(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::household::{EnergyCharge, HouseholdDuals, TariffPrices};

    fn consumer(demand: Vec<f64>, rate: f64) -> HouseholdSolution {
        let n = demand.len();
        HouseholdSolution {
            n_pv: 0.0,
            n_sto_e: 0.0,
            n_sto_p: 0.0,
            step_hours: 1.0,
            pv_available: vec![0.0; n],
            g_pro2pro: vec![0.0; n],
            g_pro2m: vec![0.0; n],
            cu: vec![0.0; n],
            sto_in: vec![0.0; n],
            sto_out: vec![0.0; n],
            sto_level: vec![0.0; n],
            e_m2pro: demand.clone(),
            demand,
            prices: TariffPrices {
                energy_charge: vec![rate; n],
                feed_in: vec![0.0; n],
            },
            z_pro: 0.0,
            duals: HouseholdDuals::default(),
            near_degenerate: vec![],
        }
    }

    fn tariff(energy: f64, other: f64, fixed: f64) -> Tariff {
        Tariff {
            energy_charge: EnergyCharge::Fixed { rate: energy },
            other_charge: other,
            fixed_charge: fixed,
            feed_in: FeedIn::Prohibited,
            feed_in_cap_fraction: None,
        }
    }

    fn params(n: usize) -> ProsumageParams {
        use crate::inputs::{TimeSeries, Unit};
        ProsumageParams::with_default_costs(
            TimeSeries::constant(1.0, n, Unit::Kw, 1.0).unwrap(),
            TimeSeries::constant(0.0, n, Unit::Fraction, 1.0).unwrap(),
        )
    }

    #[test]
    fn pure_consumer_pays_volumetric_times_demand() {
        // 5 MWh spread over 1000 hours
        let sol = consumer(vec![5.0; 1000], 0.05);
        let b = bill_decomposition(&sol, &params(1000), &tariff(0.05, 0.25, 0.0));
        assert!((b.net_total - 1500.0).abs() < 1e-9);
        assert!((non_energy_contribution(&sol, &tariff(0.05, 0.25, 0.0)) - 1250.0).abs() < 1e-9);
    }

    #[test]
    fn zero_solution_pays_fixed_charge_only_components() {
        let mut sol = consumer(vec![5.0; 1000], 0.05);
        sol.e_m2pro = vec![0.0; 1000];
        let b = bill_decomposition(&sol, &params(1000), &tariff(0.05, 0.10, 250.0));
        assert_eq!(b.net_total, 250.0);
        assert_eq!(non_energy_contribution(&sol, &tariff(0.05, 0.0, 750.0)), 750.0);
    }

    #[test]
    fn consumer_rates_are_zero_and_generation_is_flagged() {
        let sol = consumer(vec![0.3, 0.7, 0.5], 0.05);
        assert_eq!(self_consumption_rate(&sol), (0.0, true));
        assert_eq!(autarky_rate(&sol), (0.0, false));
        assert_eq!(autarky_rate_from_grid(&sol), 0.0);
        assert_eq!(residual_load_duration_curve(&sol), vec![0.7, 0.5, 0.3]);
    }

    #[test]
    fn idle_household_has_a_flat_zero_curve() {
        let sol = consumer(vec![0.0; 4], 0.05);
        assert_eq!(autarky_rate(&sol), (0.0, true));
        assert!(residual_load_duration_curve(&sol).iter().all(|v| *v == 0.0));
        assert_eq!(exchange_hour_shares(&residual_load_duration_curve(&sol)), (0.0, 1.0, 0.0));
    }

    #[test]
    fn rates_of_a_hand_built_prosumer() {
        let mut sol = consumer(vec![1.0, 1.0], 0.0);
        sol.n_pv = 2.0;
        sol.pv_available = vec![4.0, 0.0];
        sol.g_pro2pro = vec![1.0, 0.0];
        sol.sto_in = vec![1.0, 0.0];
        sol.sto_out = vec![0.0, 0.5];
        sol.g_pro2m = vec![1.5, 0.0];
        sol.cu = vec![0.5, 0.0];
        sol.e_m2pro = vec![0.0, 0.5];
        assert_eq!(self_consumption_rate(&sol).0, 0.5);
        assert_eq!(autarky_rate(&sol).0, 0.75);
        assert_eq!(autarky_rate_from_grid(&sol), 0.75);
        assert_eq!(peaks(&sol), (0.5, 1.5));
        assert_eq!(exchange_hour_shares(&residual_load_duration_curve(&sol)), (0.5, 0.0, 0.5));
    }
}
