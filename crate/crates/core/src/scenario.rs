//! Scenario configuration, the built-in tariff catalog and the batch runner.
//!
//! A scenario is one TOML file:
//!
//! ```toml
//! name = "Retail_30 FIT_8"
//! subsample = 2
//!
//! [tariff]
//! other_charge = 0.25
//! fixed_charge = 0.0
//! energy_charge = { kind = "fixed", rate = 0.05 }
//! feed_in = { kind = "fixed", rate = 0.08 }
//! # feed_in_cap_fraction = 0.5
//!
//! [data]
//! # dir = "profiles"            files named as in DATA_FILES; missing ones are synthesized
//! # household_demand = "load.csv"
//!
//! [household]
//! n_households = 1000000
//!
//! [system]
//! voll = 3000.0
//!
//! [equilibrium]
//! method = "joint_clearing"
//! ```
//!
//! Every table and key except `name` and `tariff` is optional. Relative data
//! paths are resolved against the directory of the file that names them.

use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dispatch::DispatchParams;
use crate::equilibrium::{calibrate_energy_charge, joint_kkt_report, solve_scenario, EquilibriumConfig, ScenarioResult};
use crate::error::{Error, Result};
use crate::household::{EnergyCharge, FeedIn, ProsumageParams, Tariff};
use crate::inputs::{load_timeseries, TimeSeries, Unit, HOURS_PER_YEAR};
use crate::metrics::{compute_metrics, MetricsReport};
use crate::presets;
use crate::synthetic::{synthetic_profiles, synthetic_system_profiles, HouseholdShape, SystemProfiles, SystemShape};

/// Environment variable overriding the number of concurrent scenarios.
pub const WORKERS_ENV: &str = "PROSUMAGE_WORKERS";

/// Upper bound accepted for any tariff component in EUR/kWh.
pub const MAX_TARIFF: f64 = 10.0;

/// File names looked up in `data.dir`, with the unit each file is read in.
pub const DATA_FILES: [(&str, Unit); 7] = [
    ("household_demand.csv", Unit::Kw),
    ("household_pv_cf.csv", Unit::Fraction),
    ("system_demand.csv", Unit::Mw),
    ("onshore_wind_cf.csv", Unit::Fraction),
    ("offshore_wind_cf.csv", Unit::Fraction),
    ("system_pv_cf.csv", Unit::Fraction),
    ("run_of_river_cf.csv", Unit::Fraction),
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub household_demand: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub household_pv_cf: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_demand: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub onshore_wind_cf: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offshore_wind_cf: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_pv_cf: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_of_river_cf: Option<PathBuf>,
}

impl DataConfig {
    fn explicit(&self) -> [(&'static str, &Option<PathBuf>); 7] {
        [
            ("household_demand", &self.household_demand),
            ("household_pv_cf", &self.household_pv_cf),
            ("system_demand", &self.system_demand),
            ("onshore_wind_cf", &self.onshore_wind_cf),
            ("offshore_wind_cf", &self.offshore_wind_cf),
            ("system_pv_cf", &self.system_pv_cf),
            ("run_of_river_cf", &self.run_of_river_cf),
        ]
    }

    fn explicit_mut(&mut self) -> [&mut Option<PathBuf>; 8] {
        [
            &mut self.dir,
            &mut self.household_demand,
            &mut self.household_pv_cf,
            &mut self.system_demand,
            &mut self.onshore_wind_cf,
            &mut self.offshore_wind_cf,
            &mut self.system_pv_cf,
            &mut self.run_of_river_cf,
        ]
    }

    /// Path and unit of every profile that comes from a file, keyed by field name.
    pub fn resolved(&self) -> Vec<(&'static str, PathBuf, Unit)> {
        let mut out = Vec::new();
        for ((field, path), (file, unit)) in self.explicit().into_iter().zip(DATA_FILES) {
            if let Some(p) = path {
                out.push((field, p.clone(), unit));
            } else if let Some(dir) = &self.dir {
                let candidate = dir.join(file);
                if candidate.is_file() {
                    out.push((field, candidate, unit));
                }
            }
        }
        out
    }

    /// Make relative paths relative to `base`.
    pub fn rebase(&mut self, base: &Path) {
        for p in self.explicit_mut().into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HouseholdConfig {
    pub n_households: u64,
    /// kW.
    pub pv_limit: f64,
    pub storage_efficiency: f64,
    /// Demand is rescaled so that the modelled hours carry this annual total (kWh).
    pub annual_demand_kwh: f64,
}

impl Default for HouseholdConfig {
    fn default() -> Self {
        HouseholdConfig {
            n_households: presets::N_HOUSEHOLDS,
            pv_limit: presets::PV_LIMIT_KW,
            storage_efficiency: presets::STORAGE_EFFICIENCY,
            annual_demand_kwh: 5000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// EUR/MWh.
    pub voll: f64,
    pub allow_lost_load: bool,
    /// Multipliers on the default capacity mix.
    pub conventional_scale: f64,
    pub renewable_scale: f64,
    pub storage_scale: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            voll: presets::DEFAULT_VOLL,
            allow_lost_load: true,
            conventional_scale: 1.0,
            renewable_scale: 1.0,
            storage_scale: 1.0,
        }
    }
}

fn default_subsample() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Keep every n-th hour; each sample then stands for n hours.
    #[serde(default = "default_subsample")]
    pub subsample: usize,
    pub tariff: Tariff,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub household: HouseholdConfig,
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub equilibrium: EquilibriumConfig,
}

impl ScenarioConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario configs always serialize")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// File-system friendly version of the name.
    pub fn slug(&self) -> String {
        slug(&self.name)
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_toml().as_bytes()))
    }
}

pub fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_-+.".contains(c) { c } else { '_' })
        .collect()
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Read a scenario file; relative data paths are resolved against its directory.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = ScenarioConfig::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    cfg.data.rebase(path.parent().unwrap_or(Path::new(".")));
    Ok(cfg)
}

fn volumetric(name: &str, energy: EnergyCharge, other: f64, fixed: f64, feed_in: FeedIn) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        subsample: 2,
        tariff: Tariff {
            energy_charge: energy,
            other_charge: other,
            fixed_charge: fixed,
            feed_in,
            feed_in_cap_fraction: None,
        },
        data: DataConfig::default(),
        household: HouseholdConfig::default(),
        system: SystemConfig::default(),
        equilibrium: EquilibriumConfig::default(),
    }
}

/// The sixteen tariff scenarios: volumetric retail with falling feed-in
/// tariffs, fixed-part retail tariffs, and real-time pricing variants.
pub fn builtin_catalog() -> Vec<ScenarioConfig> {
    let te = EnergyCharge::Fixed { rate: 0.05 };
    let fit = |rate| FeedIn::Fixed { rate };
    let mut cap = volumetric("Retail_30 FIT_8 Cap", te, 0.25, 0.0, fit(0.08));
    cap.tariff.feed_in_cap_fraction = Some(0.5);
    vec![
        volumetric("Retail_30 FIT_8", te, 0.25, 0.0, fit(0.08)),
        volumetric("Retail_30 FIT_6", te, 0.25, 0.0, fit(0.06)),
        volumetric("Retail_30 FIT_4", te, 0.25, 0.0, fit(0.04)),
        volumetric("Retail_30 FIT_2", te, 0.25, 0.0, fit(0.02)),
        volumetric("Retail_30 FIT_0", te, 0.25, 0.0, FeedIn::Prohibited),
        cap,
        volumetric("Retail_25 FIT_8", te, 0.20, 250.0, fit(0.08)),
        volumetric("Retail_20 FIT_8", te, 0.15, 500.0, fit(0.08)),
        volumetric("Retail_15 FIT_8", te, 0.10, 750.0, fit(0.08)),
        volumetric("Retail_25 FIT_0", te, 0.20, 250.0, FeedIn::Prohibited),
        volumetric("Retail_20 FIT_0", te, 0.15, 500.0, FeedIn::Prohibited),
        volumetric("Retail_15 FIT_0", te, 0.10, 750.0, FeedIn::Prohibited),
        volumetric("Retail_30 FIT_RTP", te, 0.25, 0.0, FeedIn::RealTime),
        volumetric("Retail_RTP FIT_5", EnergyCharge::RealTime, 0.25, 0.0, fit(0.05)),
        volumetric("Retail_RTP FIT_RTP", EnergyCharge::RealTime, 0.25, 0.0, FeedIn::RealTime),
        volumetric(
            "Retail_RTP FIT_RTP+3",
            EnergyCharge::RealTime,
            0.25,
            0.0,
            FeedIn::RealTimePlusPremium { premium: 0.03 },
        ),
    ]
}

/// Catalog entry by name; "baseline" is accepted for the first one.
pub fn find_builtin(name: &str) -> Option<ScenarioConfig> {
    let catalog = builtin_catalog();
    if name.eq_ignore_ascii_case("baseline") {
        return catalog.into_iter().next();
    }
    catalog.into_iter().find(|c| c.name == name || c.slug() == name)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    /// Dotted key path of the offending entry.
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn diag(field: impl Into<String>, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        field: field.into(),
        message: message.into(),
    }
}

/// Parse and check a scenario file without solving anything.
pub fn validate_config(path: &Path) -> Vec<Diagnostic> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return vec![diag(path.display().to_string(), e.to_string())],
    };
    match ScenarioConfig::from_toml(&text) {
        Ok(mut cfg) => {
            cfg.data.rebase(path.parent().unwrap_or(Path::new(".")));
            check_config(&cfg)
        }
        Err(e) => vec![diag("(file)", e.to_string())],
    }
}

/// Checks on an already parsed configuration.
pub fn check_config(cfg: &ScenarioConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if cfg.name.trim().is_empty() {
        out.push(diag("name", "must not be empty"));
    }
    if cfg.subsample < 1 {
        out.push(diag("subsample", "must be at least 1"));
    }

    let t = &cfg.tariff;
    let mut charges = vec![("tariff.other_charge", t.other_charge)];
    if let EnergyCharge::Fixed { rate } = t.energy_charge {
        charges.push(("tariff.energy_charge.rate", rate));
    }
    match t.feed_in {
        FeedIn::Fixed { rate } => charges.push(("tariff.feed_in.rate", rate)),
        FeedIn::RealTimePlusPremium { premium } => charges.push(("tariff.feed_in.premium", premium)),
        _ => {}
    }
    for (field, v) in charges {
        if !(v.is_finite() && (0.0..=MAX_TARIFF).contains(&v)) {
            out.push(diag(field, format!("{v} EUR/kWh outside [0, {MAX_TARIFF}]")));
        }
    }
    if !(t.fixed_charge.is_finite() && t.fixed_charge >= 0.0) {
        out.push(diag("tariff.fixed_charge", format!("{} EUR/year must be non-negative", t.fixed_charge)));
    }
    if let Some(f) = t.feed_in_cap_fraction {
        if !(f > 0.0 && f <= 1.0) {
            out.push(diag("tariff.feed_in_cap_fraction", format!("{f} outside (0, 1]")));
        }
        if !t.feed_in_allowed() {
            out.push(diag("tariff.feed_in_cap_fraction", "set although feed-in is prohibited"));
        }
    }

    let h = &cfg.household;
    if h.n_households < 1 {
        out.push(diag("household.n_households", "must be at least 1"));
    }
    if !(h.pv_limit.is_finite() && h.pv_limit >= 0.0) {
        out.push(diag("household.pv_limit", format!("{} must be non-negative", h.pv_limit)));
    }
    if !(h.storage_efficiency > 0.0 && h.storage_efficiency <= 1.0) {
        out.push(diag("household.storage_efficiency", format!("{} outside (0, 1]", h.storage_efficiency)));
    }
    if !(h.annual_demand_kwh.is_finite() && h.annual_demand_kwh > 0.0) {
        out.push(diag("household.annual_demand_kwh", format!("{} must be positive", h.annual_demand_kwh)));
    }

    let s = &cfg.system;
    if !(s.voll.is_finite() && s.voll > 0.0) {
        out.push(diag("system.voll", format!("{} must be positive", s.voll)));
    }
    for (field, v) in [
        ("system.conventional_scale", s.conventional_scale),
        ("system.renewable_scale", s.renewable_scale),
        ("system.storage_scale", s.storage_scale),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            out.push(diag(field, format!("{v} must be non-negative")));
        }
    }
    if let Err(e) = cfg.equilibrium.validate() {
        out.push(diag("equilibrium", e.to_string()));
    }

    if let Some(dir) = &cfg.data.dir {
        if !dir.is_dir() {
            out.push(diag("data.dir", format!("{} is not a directory", dir.display())));
        }
    }
    let mut lengths: Vec<(&str, usize)> = Vec::new();
    for (field, path, unit) in cfg.data.resolved() {
        let key = format!("data.{field}");
        if !path.is_file() {
            out.push(diag(key, format!("{} does not exist", path.display())));
            continue;
        }
        match load_timeseries(&path, unit, 1.0) {
            Ok(ts) => lengths.push((field, ts.len())),
            Err(e) => out.push(diag(key, e.to_string())),
        }
    }
    if let Some(&(first, n)) = lengths.first() {
        for &(field, m) in &lengths[1..] {
            if m != n {
                out.push(diag(
                    format!("data.{field}"),
                    format!("horizon mismatch: {m} samples, {first} has {n}"),
                ));
            }
        }
    }
    out
}

/// Checks across a batch: duplicate names plus every config's own diagnostics,
/// prefixed with the scenario name.
pub fn check_batch(configs: &[ScenarioConfig]) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for c in configs {
        if !seen.insert(c.name.clone()) {
            out.push(diag("name", format!("duplicate scenario name {:?}", c.name)));
        }
        for d in check_config(c) {
            out.push(diag(format!("{}: {}", c.name, d.field), d.message));
        }
    }
    out
}

/// Household and power-sector inputs of a scenario at its resolution.
pub fn build_inputs(cfg: &ScenarioConfig) -> Result<(ProsumageParams, DispatchParams)> {
    let mut loaded: Vec<(&str, TimeSeries)> = Vec::new();
    for (field, path, unit) in cfg.data.resolved() {
        loaded.push((field, load_timeseries(&path, unit, 1.0)?));
    }
    let hours = loaded.first().map_or(HOURS_PER_YEAR as usize, |(_, ts)| ts.len());
    for (field, ts) in &loaded {
        if ts.len() != hours {
            return Err(Error::HorizonMismatch {
                what: field.to_string(),
                expected: hours,
                found: ts.len(),
            });
        }
    }
    let take = |field: &str| loaded.iter().find(|(f, _)| *f == field).map(|(_, ts)| ts.clone());

    let h = &cfg.household;
    let (syn_demand, syn_pv) = synthetic_profiles(&HouseholdShape {
        hours,
        annual_demand_kwh: h.annual_demand_kwh,
        ..HouseholdShape::default()
    })?;
    // scaled after subsampling so the modelled hours carry the annual total
    let demand = take("household_demand")
        .unwrap_or(syn_demand)
        .subsample(cfg.subsample)?
        .scaled_to_sum(h.annual_demand_kwh * hours as f64 / HOURS_PER_YEAR)?;
    let pv_cf = take("household_pv_cf").unwrap_or(syn_pv);

    let syn = synthetic_system_profiles(&SystemShape {
        hours,
        ..SystemShape::default()
    })?;
    let profiles = SystemProfiles {
        demand: take("system_demand").unwrap_or(syn.demand),
        onshore: take("onshore_wind_cf").unwrap_or(syn.onshore),
        offshore: take("offshore_wind_cf").unwrap_or(syn.offshore),
        pv: take("system_pv_cf").unwrap_or(syn.pv),
        ror: take("run_of_river_cf").unwrap_or(syn.ror),
    }
    .subsample(cfg.subsample)?;

    let mut p_hh =
        ProsumageParams::with_default_costs(demand, pv_cf.subsample(cfg.subsample)?);
    p_hh.n_households = h.n_households;
    p_hh.m_pv = h.pv_limit;
    p_hh.eta_sto = h.storage_efficiency;

    let s = &cfg.system;
    let mut p_disp = presets::default_dispatch_params(&profiles)?;
    for c in &mut p_disp.conventional {
        c.capacity_mw *= s.conventional_scale;
    }
    for r in &mut p_disp.renewables {
        r.capacity_mw *= s.renewable_scale;
    }
    for st in &mut p_disp.storage {
        st.power_mw *= s.storage_scale;
        st.energy_mwh *= s.storage_scale;
    }
    p_disp.voll = s.allow_lost_load.then_some(s.voll);
    Ok((p_hh, p_disp))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioStatus {
    Ok,
    NotConverged,
    KktFailed,
    Failed,
}

impl fmt::Display for ScenarioStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioStatus::Ok => "ok",
            ScenarioStatus::NotConverged => "not_converged",
            ScenarioStatus::KktFailed => "kkt_failed",
            ScenarioStatus::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub name: String,
    pub config_hash: String,
    pub status: ScenarioStatus,
    pub converged: bool,
    pub iterations: usize,
    pub hh_kkt_residual: Option<f64>,
    pub disp_kkt_residual: Option<f64>,
    pub coupling_residual: Option<f64>,
    pub price_tolerance: f64,
    pub kkt_tolerance: f64,
    pub calibrated_energy_charge: Option<f64>,
    pub error: Option<String>,
    pub files: Vec<OutputFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    /// SHA-256 over the scenario config hashes in batch order.
    pub batch_hash: String,
    pub scenarios: Vec<ManifestEntry>,
}

pub struct ScenarioRun {
    pub config: ScenarioConfig,
    pub entry: ManifestEntry,
    pub outcome: Option<(ScenarioResult, MetricsReport, ProsumageParams)>,
}

pub struct BatchReport {
    pub manifest: Manifest,
    pub runs: Vec<ScenarioRun>,
}

impl BatchReport {
    pub fn all_ok(&self) -> bool {
        self.manifest.scenarios.iter().all(|s| s.status == ScenarioStatus::Ok)
    }

    /// 0 when every scenario solved and verified, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.all_ok() {
            0
        } else {
            1
        }
    }

    pub fn summary_table(&self) -> String {
        let mut s = format!(
            "{:<24} {:<14} {:>5} {:>10} {:>10} {:>8} {:>8} {:>9}\n",
            "scenario", "status", "iter", "hh_kkt", "disp_kkt", "N_pv", "N_E", "bill"
        );
        for run in &self.runs {
            let e = &run.entry;
            let fmt_res = |r: Option<f64>| r.map_or("-".to_string(), |v| format!("{v:.2e}"));
            let (npv, ne, bill) = match &run.outcome {
                Some((_, m, _)) => (
                    format!("{:.2}", m.pv_capacity),
                    format!("{:.2}", m.storage_energy),
                    format!("{:.1}", m.bill.net_total),
                ),
                None => ("-".into(), "-".into(), "-".into()),
            };
            let _ = writeln!(
                s,
                "{:<24} {:<14} {:>5} {:>10} {:>10} {:>8} {:>8} {:>9}",
                e.name,
                e.status.to_string(),
                e.iterations,
                fmt_res(e.hh_kkt_residual),
                fmt_res(e.disp_kkt_residual),
                npv,
                ne,
                bill
            );
        }
        s
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BatchOptions {
    /// Concurrent scenarios; `None` reads [`WORKERS_ENV`] and falls back to the core count.
    pub workers: Option<usize>,
}

fn worker_count(opts: &BatchOptions) -> usize {
    opts.workers
        .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok()))
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Format a float so that identical values always give identical text.
fn num(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

struct Csv {
    text: String,
}

impl Csv {
    fn new(header: &[&str]) -> Self {
        Csv {
            text: header.join(",") + "\n",
        }
    }

    fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<OutputFile> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(OutputFile {
        path: name.to_string(),
        sha256: hex(&Sha256::digest(contents.as_bytes())),
    })
}

fn household_csv(r: &ScenarioResult, p: &ProsumageParams) -> String {
    let x = &r.household;
    let mut c = Csv::new(&[
        "hour", "pv_gen", "g_pro2pro", "g_pro2m", "cu", "sto_in", "sto_out", "sto_level", "e_m2pro",
    ]);
    for h in 0..x.horizon() {
        c.row(&[
            num(p.demand.hour_of(h)),
            num(x.pv_available[h]),
            num(x.g_pro2pro[h]),
            num(x.g_pro2m[h]),
            num(x.cu[h]),
            num(x.sto_in[h]),
            num(x.sto_out[h]),
            num(x.sto_level[h]),
            num(x.e_m2pro[h]),
        ]);
    }
    c.text
}

fn summary_csv(r: &ScenarioResult) -> String {
    let x = &r.household;
    let mut c = Csv::new(&["n_pv", "n_sto_e", "n_sto_p", "z_pro", "z_sys", "near_degenerate"]);
    c.row(&[
        num(x.n_pv),
        num(x.n_sto_e),
        num(x.n_sto_p),
        num(x.z_pro),
        num(r.dispatch.z_sys),
        x.near_degenerate.join(";"),
    ]);
    c.text
}

fn dispatch_csv(r: &ScenarioResult, p: &ProsumageParams, p_disp: &DispatchParams) -> String {
    let d = &r.dispatch;
    let mut c = Csv::new(&["hour", "tech", "generation_mw"]);
    for h in 0..d.horizon() {
        let hour = num(p.demand.hour_of(h));
        for (tech, g) in p_disp.conventional.iter().zip(&d.g_con) {
            c.row(&[hour.clone(), tech.name.clone(), num(g[h])]);
        }
        for (tech, g) in p_disp.renewables.iter().zip(&d.g_res) {
            c.row(&[hour.clone(), tech.name.clone(), num(g[h])]);
        }
        for (tech, (sin, sout)) in p_disp.storage.iter().zip(d.sto_in.iter().zip(&d.sto_out)) {
            c.row(&[hour.clone(), tech.name.clone(), num(sout[h] - sin[h])]);
        }
        c.row(&[hour.clone(), "lost_load".into(), num(d.lost_load[h])]);
        c.row(&[hour, "prosumage_net_feed_in".into(), num(r.exchange.feed_in_mw[h] - r.exchange.purchases_mw[h])]);
    }
    c.text
}

fn prices_csv(r: &ScenarioResult, p: &ProsumageParams) -> String {
    let d = &r.dispatch;
    let mut c = Csv::new(&["hour", "price_eur_mwh", "canonical_price_eur_mwh", "degenerate"]);
    for h in 0..d.horizon() {
        c.row(&[
            num(p.demand.hour_of(h)),
            num(d.prices[h]),
            num(d.canonical_prices[h]),
            d.degenerate[h].to_string(),
        ]);
    }
    c.text
}

fn convergence_csv(r: &ScenarioResult) -> String {
    let mut c = Csv::new(&[
        "iteration",
        "max_price_change",
        "z_pro",
        "z_sys",
        "hh_kkt_residual",
        "disp_kkt_residual",
    ]);
    for it in &r.history {
        c.row(&[
            it.iteration.to_string(),
            num(it.max_price_change),
            num(it.z_pro),
            num(it.z_sys),
            num(it.hh_kkt_residual),
            num(it.disp_kkt_residual),
        ]);
    }
    c.text
}

fn kkt_csv(r: &ScenarioResult) -> String {
    let joint = joint_kkt_report(r);
    let mut c = Csv::new(&["condition", "max_residual", "worst_index", "count"]);
    for cond in &joint.conditions.conditions {
        c.row(&[
            cond.name.clone(),
            num(cond.max_residual),
            cond.worst_index.map_or(String::new(), |i| i.to_string()),
            cond.count.to_string(),
        ]);
    }
    if let Some(res) = joint.coupling_residual {
        c.row(&["price_coupling".into(), num(res), String::new(), r.dispatch.horizon().to_string()]);
    }
    c.text
}

fn rldc_csv(m: &MetricsReport) -> String {
    let mut c = Csv::new(&["rank", "kw"]);
    for (i, v) in m.rldc.iter().enumerate() {
        c.row(&[(i + 1).to_string(), num(*v)]);
    }
    c.text
}

const METRICS_HEADER: [&str; 36] = [
    "scenario",
    "status",
    "sc_rate",
    "autarky_rate",
    "autarky_rate_from_grid",
    "zero_generation",
    "zero_demand",
    "pv_capacity",
    "storage_energy",
    "storage_power",
    "investment_pv",
    "investment_sto",
    "grid_cost_energy",
    "grid_cost_other",
    "grid_cost_fixed",
    "feed_in_revenue",
    "net_total",
    "z_pro",
    "positive_hours_share",
    "zero_hours_share",
    "negative_hours_share",
    "peak_demand",
    "peak_feed_in",
    "non_energy_contribution",
    "pv_direct_share",
    "pv_storage_share",
    "pv_feed_in_share",
    "pv_curtailed_share",
    "mean_purchase_price",
    "mean_feed_in_price",
    "regime",
    "grid_purchases_kwh",
    "feed_in_kwh",
    "curtailment_kwh",
    "aggregate_peak_feed_in_mw",
    "lost_load_mwh",
];

fn metrics_row(name: &str, status: ScenarioStatus, m: &MetricsReport) -> Vec<String> {
    let opt = |v: Option<f64>| v.map_or(String::new(), num);
    vec![
        name.to_string(),
        status.to_string(),
        num(m.sc_rate),
        num(m.autarky_rate),
        num(m.autarky_rate_from_grid),
        m.zero_generation.to_string(),
        m.zero_demand.to_string(),
        num(m.pv_capacity),
        num(m.storage_energy),
        num(m.storage_power),
        num(m.bill.investment_pv),
        num(m.bill.investment_sto),
        num(m.bill.grid_cost_energy),
        num(m.bill.grid_cost_other),
        num(m.bill.grid_cost_fixed),
        num(m.bill.feed_in_revenue),
        num(m.bill.net_total),
        num(m.z_pro),
        num(m.positive_hours_share),
        num(m.zero_hours_share),
        num(m.negative_hours_share),
        num(m.peak_demand),
        num(m.peak_feed_in),
        num(m.non_energy_contribution),
        num(m.pv_direct_share),
        num(m.pv_storage_share),
        num(m.pv_feed_in_share),
        num(m.pv_curtailed_share),
        opt(m.mean_purchase_price),
        opt(m.mean_feed_in_price),
        m.regime.to_string(),
        num(m.grid_purchases_kwh),
        num(m.feed_in_kwh),
        num(m.curtailment_kwh),
        num(m.aggregate_peak_feed_in_mw),
        num(m.lost_load_mwh),
    ]
}

/// Solve one scenario and compute its metrics without writing anything.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(ScenarioResult, MetricsReport, ProsumageParams, DispatchParams, f64)> {
    let (p_hh, p_disp) = build_inputs(cfg)?;
    let calibrated = calibrate_energy_charge(&p_disp)?;
    let result = solve_scenario(&cfg.tariff, &p_hh, &p_disp, &cfg.equilibrium)?;
    let metrics = compute_metrics(&result, &p_hh);
    Ok((result, metrics, p_hh, p_disp, calibrated))
}

fn status_of(r: &ScenarioResult) -> ScenarioStatus {
    let tol = r.kkt_tolerance;
    if r.hh_kkt.max_residual() > tol || r.disp_kkt.max_residual() > tol {
        ScenarioStatus::KktFailed
    } else if !r.converged {
        ScenarioStatus::NotConverged
    } else {
        ScenarioStatus::Ok
    }
}

fn execute(cfg: &ScenarioConfig, out: &Path) -> ScenarioRun {
    let mut entry = ManifestEntry {
        name: cfg.name.clone(),
        config_hash: cfg.hash(),
        status: ScenarioStatus::Failed,
        converged: false,
        iterations: 0,
        hh_kkt_residual: None,
        disp_kkt_residual: None,
        coupling_residual: None,
        price_tolerance: cfg.equilibrium.price_tolerance,
        kkt_tolerance: cfg.equilibrium.kkt_tolerance,
        calibrated_energy_charge: None,
        error: None,
        files: Vec::new(),
    };
    let solved = run_scenario(cfg).and_then(|(result, metrics, p_hh, p_disp, calibrated)| {
        let slug = cfg.slug();
        let files = [
            (format!("household_{slug}.csv"), household_csv(&result, &p_hh)),
            (format!("summary_{slug}.csv"), summary_csv(&result)),
            (format!("dispatch_{slug}.csv"), dispatch_csv(&result, &p_hh, &p_disp)),
            (format!("prices_{slug}.csv"), prices_csv(&result, &p_hh)),
            (format!("convergence_{slug}.csv"), convergence_csv(&result)),
            (format!("kkt_{slug}.csv"), kkt_csv(&result)),
            (format!("rldc_{slug}.csv"), rldc_csv(&metrics)),
        ];
        for (name, text) in &files {
            entry.files.push(write_file(out, name, text)?);
        }
        Ok((result, metrics, p_hh, calibrated))
    });
    match solved {
        Ok((result, metrics, p_hh, calibrated)) => {
            entry.status = status_of(&result);
            entry.converged = result.converged;
            entry.iterations = result.iterations;
            entry.hh_kkt_residual = Some(result.hh_kkt.max_residual());
            entry.disp_kkt_residual = Some(result.disp_kkt.max_residual());
            entry.coupling_residual = joint_kkt_report(&result).coupling_residual;
            entry.calibrated_energy_charge = Some(calibrated);
            if entry.status != ScenarioStatus::Ok {
                log::warn!("{}: {}", cfg.name, entry.status);
            } else {
                log::info!("{}: solved in {} iteration(s)", cfg.name, entry.iterations);
            }
            ScenarioRun {
                config: cfg.clone(),
                entry,
                outcome: Some((result, metrics, p_hh)),
            }
        }
        Err(e) => {
            log::error!("{}: {e}", cfg.name);
            entry.error = Some(e.to_string());
            ScenarioRun {
                config: cfg.clone(),
                entry,
                outcome: None,
            }
        }
    }
}

/// Solve every scenario concurrently, writing per-scenario CSVs, `metrics.csv`
/// and `manifest.json` into `out`. A failing scenario is recorded and the
/// others still run; only an unusable output directory is an error.
pub fn run_batch(configs: &[ScenarioConfig], out: &Path, opts: &BatchOptions) -> Result<BatchReport> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let probe = out.join(".write_test");
    std::fs::write(&probe, b"").map_err(|e| Error::io(out, e))?;
    let _ = std::fs::remove_file(&probe);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(opts))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let runs: Vec<ScenarioRun> = pool.install(|| configs.par_iter().map(|c| execute(c, out)).collect());

    let mut metrics = Csv::new(&METRICS_HEADER);
    for run in &runs {
        if let Some((_, m, _)) = &run.outcome {
            metrics.row(&metrics_row(&run.entry.name, run.entry.status, m));
        }
    }
    write_file(out, "metrics.csv", &metrics.text)?;

    let mut batch = Sha256::new();
    for c in configs {
        batch.update(c.hash().as_bytes());
    }
    let manifest = Manifest {
        batch_hash: hex(&batch.finalize()),
        scenarios: runs.iter().map(|r| r.entry.clone()).collect(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))? + "\n";
    write_file(out, "manifest.json", &json)?;
    Ok(BatchReport { manifest, runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_sixteen_unique_entries() {
        let c = builtin_catalog();
        assert_eq!(c.len(), 16);
        assert!(check_batch(&c).is_empty());
        let cap = c.iter().find(|s| s.name == "Retail_30 FIT_8 Cap").unwrap();
        assert_eq!(cap.tariff.feed_in_cap_fraction, Some(0.5));
        let r25 = c.iter().find(|s| s.name == "Retail_25 FIT_8").unwrap();
        assert_eq!(r25.tariff.other_charge, 0.20);
        assert_eq!(r25.tariff.fixed_charge, 250.0);
    }

    #[test]
    fn every_entry_survives_a_toml_round_trip() {
        for c in builtin_catalog() {
            let text = c.to_toml();
            assert_eq!(ScenarioConfig::from_toml(&text).unwrap(), c, "{text}");
        }
    }

    #[test]
    fn minimal_file_takes_defaults() {
        let cfg = ScenarioConfig::from_toml(
            r#"
name = "x"
[tariff]
other_charge = 0.25
fixed_charge = 0
energy_charge = { kind = "real_time" }
feed_in = { kind = "prohibited" }
"#,
        )
        .unwrap();
        assert_eq!(cfg.subsample, 1);
        assert_eq!(cfg.household, HouseholdConfig::default());
        assert!(check_config(&cfg).is_empty());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ScenarioConfig::from_toml("name = \"x\"\nsubsampel = 2\n").unwrap_err();
        assert!(err.to_string().contains("subsampel"), "{err}");
    }

    #[test]
    fn negative_tariff_names_the_field() {
        let mut cfg = builtin_catalog().remove(0);
        cfg.tariff.other_charge = -0.1;
        let d = check_config(&cfg);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].field, "tariff.other_charge");
    }

    #[test]
    fn baseline_alias_and_slug() {
        assert_eq!(find_builtin("baseline").unwrap().name, "Retail_30 FIT_8");
        assert_eq!(slug("Retail_RTP FIT_RTP+3"), "Retail_RTP_FIT_RTP+3");
        assert_eq!(find_builtin("Retail_RTP_FIT_RTP+3").unwrap().name, "Retail_RTP FIT_RTP+3");
    }
}
