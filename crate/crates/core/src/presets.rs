//! Default technology data: household investment costs, thermal plant
//! parameters and the 2030 power-sector capacity mix.

use crate::dispatch::{ConventionalTech, DispatchParams, RenewableTech, StorageTech};
use crate::error::Result;
use crate::inputs::{annualized_cost, marginal_cost, CostInputs, ThermalTechInputs};
use crate::synthetic::SystemProfiles;

pub const INTEREST_RATE: f64 = 0.04;
pub const VAT_RATE: f64 = 0.19;

/// EUR per kW and year.
pub const PV_FIXED_COST: f64 = 17.0;
/// EUR per kW and year, split equally between the energy and power rating.
pub const STORAGE_FIXED_COST: f64 = 10.0;
pub const STORAGE_EFFICIENCY: f64 = 0.92;
/// kW per household.
pub const PV_LIMIT_KW: f64 = 10.0;
pub const N_HOUSEHOLDS: u64 = 1_000_000;

pub const CO2_PRICE: f64 = 29.4;
pub const DEFAULT_VOLL: f64 = 3000.0;
pub const PUMPED_HYDRO_EFFICIENCY: f64 = 0.8;

pub fn pv_cost_inputs() -> CostInputs {
    CostInputs {
        overnight_cost: 850.0,
        lifetime_years: 25,
        interest_rate: INTEREST_RATE,
        vat_rate: VAT_RATE,
        annual_fixed_cost: PV_FIXED_COST,
    }
}

pub fn storage_power_cost_inputs() -> CostInputs {
    CostInputs {
        overnight_cost: 140.0,
        lifetime_years: 15,
        interest_rate: INTEREST_RATE,
        vat_rate: VAT_RATE,
        annual_fixed_cost: STORAGE_FIXED_COST / 2.0,
    }
}

pub fn storage_energy_cost_inputs() -> CostInputs {
    CostInputs {
        overnight_cost: 205.0,
        lifetime_years: 15,
        interest_rate: INTEREST_RATE,
        vat_rate: VAT_RATE,
        annual_fixed_cost: STORAGE_FIXED_COST / 2.0,
    }
}

/// Annualized household investment costs `(pv, storage power, storage energy)`.
pub fn household_annuities() -> (f64, f64, f64) {
    (
        annualized_cost(&pv_cost_inputs()),
        annualized_cost(&storage_power_cost_inputs()),
        annualized_cost(&storage_energy_cost_inputs()),
    )
}

fn thermal(fuel_price: f64, carbon_content: f64, thermal_efficiency: f64) -> ThermalTechInputs {
    ThermalTechInputs {
        thermal_efficiency,
        carbon_content,
        fuel_price,
        co2_price: CO2_PRICE,
    }
}

/// Fuel price (EUR/MWh_th), carbon content (t/MWh_th) and efficiency per dispatchable technology.
pub fn thermal_technologies() -> Vec<(&'static str, ThermalTechInputs)> {
    vec![
        ("lignite", thermal(5.6, 0.311, 0.38)),
        ("hardcoal", thermal(8.4, 0.26, 0.43)),
        ("ccgt", thermal(26.4, 0.155, 0.542)),
        ("ocgt", thermal(26.4, 0.155, 0.40)),
        ("oil", thermal(48.3, 0.216, 0.35)),
        ("bio", thermal(10.0, 0.0, 0.487)),
    ]
}

/// Installed 2030 capacities in MW.
pub fn conventional_capacities_mw() -> Vec<(&'static str, f64)> {
    vec![
        ("lignite", 9_400.0),
        ("hardcoal", 9_800.0),
        ("ccgt", 20_400.0),
        ("ocgt", 10_200.0),
        ("oil", 1_200.0),
        ("bio", 6_000.0),
    ]
}

pub fn renewable_capacities_mw() -> Vec<(&'static str, f64)> {
    vec![
        ("onshore_wind", 81_500.0),
        ("offshore_wind", 17_000.0),
        ("pv", 91_300.0),
        ("run_of_river", 5_600.0),
    ]
}

/// Pumped hydro `(power MW, energy MWh)`.
pub fn pumped_hydro_capacity() -> (f64, f64) {
    (11_600.0, 69_600.0)
}

/// Default power sector on the given demand and availability profiles.
pub fn default_dispatch_params(profiles: &SystemProfiles) -> Result<DispatchParams> {
    let thermal = thermal_technologies();
    let mut conventional = Vec::new();
    for (name, capacity_mw) in conventional_capacities_mw() {
        let inputs = thermal.iter().find(|t| t.0 == name).map(|t| t.1).expect("capacity without cost data");
        conventional.push(ConventionalTech {
            name: name.to_string(),
            marginal_cost: marginal_cost(&inputs)?,
            capacity_mw,
        });
    }
    let renewables = renewable_capacities_mw()
        .into_iter()
        .map(|(name, capacity_mw)| {
            let cf = match name {
                "onshore_wind" => &profiles.onshore,
                "offshore_wind" => &profiles.offshore,
                "pv" => &profiles.pv,
                _ => &profiles.ror,
            };
            RenewableTech {
                name: name.to_string(),
                capacity_mw,
                cf: cf.clone(),
            }
        })
        .collect();
    let (power_mw, energy_mwh) = pumped_hydro_capacity();
    Ok(DispatchParams {
        conventional,
        renewables,
        storage: vec![StorageTech {
            name: "pumped_hydro".into(),
            efficiency: PUMPED_HYDRO_EFFICIENCY,
            energy_mwh,
            power_mw,
        }],
        demand: profiles.demand.clone(),
        voll: Some(DEFAULT_VOLL),
    })
}
