//! Residual bookkeeping shared by the household and dispatch optimality checks.
//!
//! Every condition is scaled before it is compared with a tolerance:
//! complementarity pairs `s ≥ 0 ⊥ x ≥ 0` use the min-map
//! `|min(s/σ_s, x/(1+|x|))|` (zero iff both are feasible and one is zero) and
//! equalities use `|lhs − rhs|/σ`, where each σ is one plus the largest
//! magnitude entering the expression.

use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionSummary {
    pub name: String,
    pub max_residual: f64,
    /// Hour (or other index) of the worst instance, when the family is indexed.
    pub worst_index: Option<usize>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct KktReport {
    pub conditions: Vec<ConditionSummary>,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.conditions
            .iter()
            .map(|c| c.max_residual)
            .fold(0.0, f64::max)
    }

    /// Worst-offending condition family, if any condition was evaluated.
    pub fn worst(&self) -> Option<&ConditionSummary> {
        self.conditions
            .iter()
            .max_by(|a, b| a.max_residual.total_cmp(&b.max_residual))
    }

    pub fn get(&self, name: &str) -> Option<&ConditionSummary> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_residual() <= tolerance
    }

    /// Append another report's families under a prefix.
    pub fn extend_prefixed(&mut self, prefix: &str, other: &KktReport) {
        for c in &other.conditions {
            self.conditions.push(ConditionSummary {
                name: format!("{prefix}{}", c.name),
                ..c.clone()
            });
        }
    }
}

impl fmt::Display for KktReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.conditions {
            match c.worst_index {
                Some(i) => writeln!(f, "{:<36} {:>12.3e}  (at {i}, n={})", c.name, c.max_residual, c.count)?,
                None => writeln!(f, "{:<36} {:>12.3e}  (n={})", c.name, c.max_residual, c.count)?,
            }
        }
        Ok(())
    }
}

#[derive(Default)]
pub(crate) struct KktBuilder {
    report: KktReport,
}

impl KktBuilder {
    fn record(&mut self, name: &str, index: Option<usize>, residual: f64) {
        let residual = if residual.is_nan() { f64::INFINITY } else { residual };
        let entry = match self.report.conditions.iter_mut().rev().find(|c| c.name == name) {
            Some(e) => e,
            None => {
                self.report.conditions.push(ConditionSummary {
                    name: name.to_string(),
                    max_residual: 0.0,
                    worst_index: None,
                    count: 0,
                });
                self.report.conditions.last_mut().unwrap()
            }
        };
        entry.count += 1;
        if entry.count == 1 || residual > entry.max_residual {
            entry.max_residual = residual;
            entry.worst_index = index;
        }
    }

    /// Register a family with no instances so it still shows up as vacuous.
    pub(crate) fn declare(&mut self, name: &str) {
        if !self.report.conditions.iter().any(|c| c.name == name) {
            self.report.conditions.push(ConditionSummary {
                name: name.to_string(),
                max_residual: 0.0,
                worst_index: None,
                count: 0,
            });
        }
    }

    /// `s ≥ 0 ⊥ x ≥ 0` with `scale` the magnitude of the terms in `s`.
    pub(crate) fn pair(&mut self, name: &str, index: Option<usize>, s: f64, scale: f64, x: f64) {
        let a = s / (1.0 + scale);
        let b = x / (1.0 + x.abs());
        self.record(name, index, a.min(b).abs());
    }

    /// `lhs − rhs = 0`.
    pub(crate) fn equality(&mut self, name: &str, index: Option<usize>, diff: f64, scale: f64) {
        self.record(name, index, diff.abs() / (1.0 + scale));
    }

    pub(crate) fn finish(self) -> KktReport {
        self.report
    }
}

pub(crate) fn abs_max(values: &[f64]) -> f64 {
    values.iter().map(|v| v.abs()).fold(0.0, f64::max)
}
