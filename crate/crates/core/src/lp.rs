//! Sparse linear programs and their primal-dual solutions.
//!
//! Problems are always minimisations. Sign conventions of the returned
//! multipliers:
//!
//! * `duals[i]` is the sensitivity of the optimal objective to the right-hand
//!   side of constraint `i` (`∂z/∂b_i`): non-positive on active `≤` rows,
//!   non-negative on active `≥` rows, free on equalities;
//! * `reduced_costs[j] = c_j − Σ_i a_ij · duals[i]`: non-negative at a lower
//!   bound, non-positive at an upper bound, zero for basic variables.
//!
//! The simplex itself runs in HiGHS. This module equilibrates the problem
//! before handing it over (power-of-two row then column max-abs scaling, so
//! scaling is exact), unscales the answer and re-verifies primal feasibility,
//! dual sign conditions and the duality gap on the original data. A solution
//! that fails that check is returned with [`LpStatus::NumericalFailure`].
//! Returned duals are one valid dual vertex; degenerate problems can have
//! others.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;

use highs::{ColProblem, HighsModelStatus, Sense};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-7;

/// Relative bound on primal residual and duality gap for an accepted optimum.
pub const VERIFY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    /// Sorted by variable index, no repeats.
    pub coeffs: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, a)| a * x[v.0]).sum()
    }

    /// Signed slack, non-negative when satisfied (zero for equalities at feasibility).
    pub fn slack(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.relation {
            Relation::Le => self.rhs - act,
            Relation::Ge => act - self.rhs,
            Relation::Eq => -(act - self.rhs).abs(),
        }
    }
}

/// A minimisation problem `min cᵀx s.t. rows, l ≤ x ≤ u`.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    names: HashSet<String>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        cost: f64,
    ) -> Result<VarId> {
        let name = name.into();
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(Error::MalformedLp(format!(
                "variable {name}: bounds [{lower}, {upper}] are empty"
            )));
        }
        if lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(Error::MalformedLp(format!(
                "variable {name}: infinite bound on the wrong side"
            )));
        }
        if !cost.is_finite() {
            return Err(Error::MalformedLp(format!("variable {name}: cost {cost}")));
        }
        if !self.names.insert(name.clone()) {
            return Err(Error::MalformedLp(format!("duplicate variable name {name}")));
        }
        self.variables.push(Variable {
            name,
            lower,
            upper,
            cost,
        });
        Ok(VarId(self.variables.len() - 1))
    }

    /// Add a row. Repeated variables in `coeffs` are summed.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: impl IntoIterator<Item = (VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> Result<RowId> {
        let name = name.into();
        if !rhs.is_finite() {
            return Err(Error::MalformedLp(format!("constraint {name}: rhs {rhs}")));
        }
        let mut row: Vec<(VarId, f64)> = coeffs.into_iter().collect();
        row.sort_by_key(|&(v, _)| v);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(row.len());
        for (v, a) in row {
            if v.0 >= self.variables.len() {
                return Err(Error::MalformedLp(format!(
                    "constraint {name}: unknown variable index {}",
                    v.0
                )));
            }
            if !a.is_finite() {
                return Err(Error::MalformedLp(format!(
                    "constraint {name}: coefficient {a} on {}",
                    self.variables[v.0].name
                )));
            }
            match merged.last_mut() {
                Some((last, sum)) if *last == v => *sum += a,
                _ => merged.push((v, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        self.constraints.push(Constraint {
            name,
            coeffs: merged,
            relation,
            rhs,
        });
        Ok(RowId(self.constraints.len() - 1))
    }

    pub fn set_cost(&mut self, var: VarId, cost: f64) {
        self.variables[var.0].cost = cost;
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        let v = &mut self.variables[var.0];
        v.lower = lower;
        v.upper = upper;
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.variables.iter().zip(x).map(|(v, xi)| v.cost * xi).sum()
    }

    /// `c − Aᵀy` evaluated on the original data.
    pub fn reduced_costs_for(&self, duals: &[f64]) -> Vec<f64> {
        let mut d: Vec<f64> = self.variables.iter().map(|v| v.cost).collect();
        for (row, &y) in self.constraints.iter().zip(duals) {
            for &(v, a) in &row.coeffs {
                d[v.0] -= a * y;
            }
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::NumericalFailure => "numerical failure",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveDiagnostics {
    /// Largest row or bound violation, relative to `1 + |rhs|`.
    pub max_primal_residual: f64,
    /// Largest sign violation of a dual or reduced cost.
    pub max_dual_infeasibility: f64,
    /// `|primal − dual objective| / (1 + |objective|)`.
    pub duality_gap: f64,
    pub iterations: i64,
    pub message: Option<String>,
}

/// Primal-dual pair. Vectors are empty unless the status is optimal or a
/// numerical failure (in which case they hold the rejected point).
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub diagnostics: SolveDiagnostics,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    fn without_point(status: LpStatus, message: impl Into<String>) -> Self {
        LpSolution {
            status,
            primal: Vec::new(),
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            objective: f64::NAN,
            diagnostics: SolveDiagnostics {
                message: Some(message.into()),
                ..Default::default()
            },
        }
    }
}

fn pow2_scale(max_abs: f64) -> f64 {
    if max_abs > 0.0 && max_abs.is_finite() {
        (-max_abs.log2().round()).exp2()
    } else {
        1.0
    }
}

struct Scaling {
    row: Vec<f64>,
    col: Vec<f64>,
}

fn equilibrate(lp: &LinearProgram) -> Scaling {
    let row: Vec<f64> = lp
        .constraints
        .iter()
        .map(|c| pow2_scale(c.coeffs.iter().map(|&(_, a)| a.abs()).fold(0.0, f64::max)))
        .collect();
    let mut col_max = vec![0.0f64; lp.variables.len()];
    for (c, r) in lp.constraints.iter().zip(&row) {
        for &(v, a) in &c.coeffs {
            col_max[v.0] = col_max[v.0].max((a * r).abs());
        }
    }
    Scaling {
        row,
        col: col_max.into_iter().map(pow2_scale).collect(),
    }
}

/// Solve with no rows: every variable sits at its cheaper bound.
fn solve_bounds_only(lp: &LinearProgram) -> LpSolution {
    let mut x = Vec::with_capacity(lp.variables.len());
    for v in &lp.variables {
        let value = if v.cost > 0.0 {
            v.lower
        } else if v.cost < 0.0 {
            v.upper
        } else if v.lower.is_finite() {
            v.lower
        } else if v.upper.is_finite() {
            v.upper
        } else {
            0.0
        };
        if !value.is_finite() {
            return LpSolution::without_point(
                LpStatus::Unbounded,
                format!("variable {} unbounded in its improving direction", v.name),
            );
        }
        x.push(value);
    }
    let objective = lp.objective_at(&x);
    LpSolution {
        status: LpStatus::Optimal,
        reduced_costs: lp.variables.iter().map(|v| v.cost).collect(),
        primal: x,
        duals: Vec::new(),
        objective,
        diagnostics: SolveDiagnostics::default(),
    }
}

fn run_highs(
    lp: &LinearProgram,
    scaling: &Scaling,
    tolerance: f64,
    presolve: bool,
) -> std::result::Result<highs::SolvedModel, String> {
    let mut pb = ColProblem::default();
    let rows: Vec<highs::Row> = lp
        .constraints
        .iter()
        .zip(&scaling.row)
        .map(|(c, r)| {
            let b = c.rhs * r;
            match c.relation {
                Relation::Le => pb.add_row(f64::NEG_INFINITY..=b),
                Relation::Ge => pb.add_row(b..=f64::INFINITY),
                Relation::Eq => pb.add_row(b..=b),
            }
        })
        .collect();

    let mut columns: Vec<Vec<(highs::Row, f64)>> = vec![Vec::new(); lp.variables.len()];
    for ((c, r), &row) in lp.constraints.iter().zip(&scaling.row).zip(&rows) {
        for &(v, a) in &c.coeffs {
            columns[v.0].push((row, a * r * scaling.col[v.0]));
        }
    }
    for ((v, s), entries) in lp.variables.iter().zip(&scaling.col).zip(columns) {
        pb.add_column(v.cost * s, (v.lower / s)..=(v.upper / s), entries);
    }

    let mut model = pb.try_optimise(Sense::Minimise).map_err(|e| format!("{e:?}"))?;
    model.make_quiet();
    let opts: [(&str, &str); 2] = [("parallel", "off"), ("solver", "simplex")];
    for (k, v) in opts {
        model.try_set_option(k, v).map_err(|e| format!("{k}: {e:?}"))?;
    }
    model
        .try_set_option("presolve", if presolve { "on" } else { "off" })
        .map_err(|e| format!("{e:?}"))?;
    model.try_set_option("threads", 1).map_err(|e| format!("{e:?}"))?;
    model.try_set_option("random_seed", 0).map_err(|e| format!("{e:?}"))?;
    model
        .try_set_option("primal_feasibility_tolerance", tolerance)
        .map_err(|e| format!("{e:?}"))?;
    model
        .try_set_option("dual_feasibility_tolerance", tolerance)
        .map_err(|e| format!("{e:?}"))?;
    model.try_solve().map_err(|e| format!("{e:?}"))
}

/// Solve `lp` to optimality with the given feasibility/optimality tolerance
/// (absolute, on the equilibrated data).
pub fn solve_lp(lp: &LinearProgram, tolerance: f64) -> LpSolution {
    if lp.constraints.is_empty() {
        return solve_bounds_only(lp);
    }
    let scaling = equilibrate(lp);

    let mut solved = match run_highs(lp, &scaling, tolerance, true) {
        Ok(s) => s,
        Err(msg) => return LpSolution::without_point(LpStatus::NumericalFailure, msg),
    };
    if solved.status() == HighsModelStatus::UnboundedOrInfeasible {
        // presolve cannot tell the two apart; the plain simplex certifies one
        solved = match run_highs(lp, &scaling, tolerance, false) {
            Ok(s) => s,
            Err(msg) => return LpSolution::without_point(LpStatus::NumericalFailure, msg),
        };
    }
    match solved.status() {
        HighsModelStatus::Optimal => {}
        HighsModelStatus::Infeasible => {
            return LpSolution::without_point(LpStatus::Infeasible, "primal infeasible")
        }
        HighsModelStatus::Unbounded => {
            return LpSolution::without_point(LpStatus::Unbounded, "objective unbounded below")
        }
        other => {
            return LpSolution::without_point(
                LpStatus::NumericalFailure,
                format!("solver stopped with status {other:?}"),
            )
        }
    }

    let raw = solved.get_solution();
    let primal: Vec<f64> = raw
        .columns()
        .iter()
        .zip(&scaling.col)
        .map(|(x, s)| x * s)
        .collect();
    let duals: Vec<f64> = raw
        .dual_rows()
        .iter()
        .zip(&scaling.row)
        .map(|(y, r)| y * r)
        .collect();
    let reduced_costs: Vec<f64> = raw
        .dual_columns()
        .iter()
        .zip(&scaling.col)
        .map(|(d, s)| d / s)
        .collect();
    let objective = lp.objective_at(&primal);

    let mut diagnostics = verify(lp, &primal, &duals, &reduced_costs, objective);
    diagnostics.iterations = solved.simplex_iteration_count();
    let ok = diagnostics.max_primal_residual <= VERIFY_TOLERANCE
        && diagnostics.duality_gap <= VERIFY_TOLERANCE
        && diagnostics.max_dual_infeasibility <= VERIFY_TOLERANCE * (1.0 + max_abs_cost(lp));
    let status = if ok {
        LpStatus::Optimal
    } else {
        diagnostics.message = Some(format!(
            "verification failed: primal residual {:.3e}, duality gap {:.3e}, dual infeasibility {:.3e}",
            diagnostics.max_primal_residual, diagnostics.duality_gap, diagnostics.max_dual_infeasibility
        ));
        LpStatus::NumericalFailure
    };
    LpSolution {
        status,
        primal,
        duals,
        reduced_costs,
        objective,
        diagnostics,
    }
}

fn max_abs_cost(lp: &LinearProgram) -> f64 {
    lp.variables.iter().map(|v| v.cost.abs()).fold(0.0, f64::max)
}

fn verify(
    lp: &LinearProgram,
    x: &[f64],
    y: &[f64],
    d: &[f64],
    objective: f64,
) -> SolveDiagnostics {
    let mut primal_res = 0.0f64;
    let mut dual_inf = 0.0f64;
    let mut dual_obj = 0.0;

    for (c, &yi) in lp.constraints.iter().zip(y) {
        let viol = match c.relation {
            Relation::Eq => (c.activity(x) - c.rhs).abs(),
            _ => (-c.slack(x)).max(0.0),
        };
        primal_res = primal_res.max(viol / (1.0 + c.rhs.abs()));
        let sign_viol = match c.relation {
            Relation::Le => yi.max(0.0),
            Relation::Ge => (-yi).max(0.0),
            Relation::Eq => 0.0,
        };
        dual_inf = dual_inf.max(sign_viol);
        dual_obj += c.rhs * yi;
    }
    for ((v, &xj), &dj) in lp.variables.iter().zip(x).zip(d) {
        let below = (v.lower - xj).max(0.0) / (1.0 + v.lower.abs().min(1e300));
        let above = (xj - v.upper).max(0.0) / (1.0 + v.upper.abs().min(1e300));
        primal_res = primal_res.max(below).max(above);
        if dj > 0.0 {
            if v.lower.is_finite() {
                dual_obj += dj * v.lower;
            } else {
                dual_inf = dual_inf.max(dj);
                dual_obj += dj * xj;
            }
        } else if dj < 0.0 {
            if v.upper.is_finite() {
                dual_obj += dj * v.upper;
            } else {
                dual_inf = dual_inf.max(-dj);
                dual_obj += dj * xj;
            }
        }
    }
    SolveDiagnostics {
        max_primal_residual: primal_res,
        max_dual_infeasibility: dual_inf,
        duality_gap: (objective - dual_obj).abs() / (1.0 + objective.abs()),
        iterations: 0,
        message: None,
    }
}

/// Largest complementary-slackness violation of an optimal pair: over variables
/// `|d_j · (x_j − active bound)|`, over inequality rows `|y_i · slack_i|`,
/// divided by `1 + Σ_j |c_j x_j|`.
pub fn complementarity_residual(lp: &LinearProgram, sol: &LpSolution) -> f64 {
    if lp.variables.is_empty() {
        return 0.0;
    }
    let x = &sol.primal;
    let mut worst = 0.0f64;
    for ((v, &xj), &dj) in lp.variables.iter().zip(x).zip(&sol.reduced_costs) {
        let distance = if dj > 0.0 {
            if v.lower.is_finite() {
                xj - v.lower
            } else {
                1.0 + xj.abs()
            }
        } else if dj < 0.0 {
            if v.upper.is_finite() {
                v.upper - xj
            } else {
                1.0 + xj.abs()
            }
        } else {
            0.0
        };
        worst = worst.max((dj * distance).abs());
    }
    for (c, &yi) in lp.constraints.iter().zip(&sol.duals) {
        if c.relation != Relation::Eq {
            worst = worst.max((yi * c.slack(x)).abs());
        }
    }
    let mass: f64 = lp
        .variables
        .iter()
        .zip(x)
        .map(|(v, xj)| (v.cost * xj).abs())
        .sum();
    worst / (1.0 + mass)
}

fn write_term(out: &mut String, coef: f64, name: &str, first: bool) {
    if coef < 0.0 {
        out.push_str(&format!(" - {} {}", -coef, name));
    } else if first {
        out.push_str(&format!(" {coef} {name}"));
    } else {
        out.push_str(&format!(" + {coef} {name}"));
    }
}

/// Dump in CPLEX LP text format: one objective line, one line per constraint,
/// one line per non-default bound.
pub fn write_lp_format<W: Write>(lp: &LinearProgram, mut w: W) -> std::io::Result<()> {
    let mut out = String::from("Minimize\n obj:");
    let mut first = true;
    for v in &lp.variables {
        if v.cost != 0.0 {
            write_term(&mut out, v.cost, &v.name, first);
            first = false;
        }
    }
    if first {
        out.push_str(" 0");
    }
    out.push_str("\nSubject To\n");
    for c in &lp.constraints {
        out.push_str(&format!(" {}:", c.name));
        if c.coeffs.is_empty() {
            out.push_str(" 0");
        }
        for (k, &(v, a)) in c.coeffs.iter().enumerate() {
            write_term(&mut out, a, &lp.variables[v.0].name, k == 0);
        }
        out.push_str(&format!(" {} {}\n", c.relation, c.rhs));
    }
    out.push_str("Bounds\n");
    for v in &lp.variables {
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (true, true) if v.lower == v.upper => {
                out.push_str(&format!(" {} = {}\n", v.name, v.lower))
            }
            (true, true) => out.push_str(&format!(" {} <= {} <= {}\n", v.lower, v.name, v.upper)),
            (true, false) if v.lower == 0.0 => {}
            (true, false) => out.push_str(&format!(" {} >= {}\n", v.name, v.lower)),
            (false, true) => out.push_str(&format!(" -inf <= {} <= {}\n", v.name, v.upper)),
            (false, false) => out.push_str(&format!(" {} free\n", v.name)),
        }
    }
    out.push_str("End\n");
    w.write_all(out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bounded_variable() {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", f64::NEG_INFINITY, f64::INFINITY, 1.0).unwrap();
        lp.add_constraint("lower", [(x, 1.0)], Relation::Ge, 3.0).unwrap();
        let sol = solve_lp(&lp, DEFAULT_TOLERANCE);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.primal[0] - 3.0).abs() < 1e-9);
        assert!((sol.duals[0] - 1.0).abs() < 1e-9);
        assert!(sol.reduced_costs[0].abs() < 1e-9);
    }

    #[test]
    fn degenerate_face_returns_a_vertex() {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", 0.0, 1.0, -1.0).unwrap();
        let y = lp.add_variable("y", 0.0, 1.0, -1.0).unwrap();
        lp.add_constraint("sum", [(x, 1.0), (y, 1.0)], Relation::Le, 1.0).unwrap();
        let sol = solve_lp(&lp, DEFAULT_TOLERANCE);
        assert!(sol.is_optimal());
        assert!((sol.objective + 1.0).abs() < 1e-9);
        assert!(sol.diagnostics.duality_gap <= 1e-6);
        let on_vertex = |v: f64| v.abs() < 1e-9 || (v - 1.0).abs() < 1e-9;
        assert!(on_vertex(sol.primal[0]) && on_vertex(sol.primal[1]));
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", 0.0, 1.0, 1.0).unwrap();
        lp.add_constraint("c", [(x, 1.0)], Relation::Ge, 2.0).unwrap();
        assert_eq!(solve_lp(&lp, DEFAULT_TOLERANCE).status, LpStatus::Infeasible);

        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", 0.0, f64::INFINITY, -1.0).unwrap();
        let y = lp.add_variable("y", 0.0, f64::INFINITY, 0.0).unwrap();
        lp.add_constraint("c", [(x, 1.0), (y, -1.0)], Relation::Le, 1.0).unwrap();
        assert_eq!(solve_lp(&lp, DEFAULT_TOLERANCE).status, LpStatus::Unbounded);
    }

    #[test]
    fn rejects_malformed_input() {
        let mut lp = LinearProgram::new();
        lp.add_variable("x", 0.0, 1.0, 0.0).unwrap();
        assert!(lp.add_variable("x", 0.0, 1.0, 0.0).is_err());
        assert!(lp.add_variable("y", 2.0, 1.0, 0.0).is_err());
        assert!(lp.add_variable("z", 0.0, 1.0, f64::NAN).is_err());
        assert!(lp
            .add_constraint("c", [(VarId(0), f64::INFINITY)], Relation::Le, 1.0)
            .is_err());
        assert!(lp.add_constraint("c", [(VarId(7), 1.0)], Relation::Le, 1.0).is_err());
    }

    #[test]
    fn empty_lp_has_zero_residual() {
        let lp = LinearProgram::new();
        let sol = solve_lp(&lp, DEFAULT_TOLERANCE);
        assert!(sol.is_optimal());
        assert_eq!(sol.objective, 0.0);
        assert_eq!(complementarity_residual(&lp, &sol), 0.0);
    }

    #[test]
    fn perturbing_a_binding_row_breaks_complementarity() {
        // max x + 2y s.t. x + y <= 4, x + 3y <= 6
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", 0.0, f64::INFINITY, -1.0).unwrap();
        let y = lp.add_variable("y", 0.0, f64::INFINITY, -2.0).unwrap();
        lp.add_constraint("a", [(x, 1.0), (y, 1.0)], Relation::Le, 4.0).unwrap();
        lp.add_constraint("b", [(x, 1.0), (y, 3.0)], Relation::Le, 6.0).unwrap();
        let sol = solve_lp(&lp, DEFAULT_TOLERANCE);
        assert!(sol.is_optimal());
        assert!(complementarity_residual(&lp, &sol) <= 1e-6);
        let mut bad = sol.clone();
        bad.primal[0] -= 0.1;
        assert!(complementarity_residual(&lp, &bad) > 1e-3);
    }

    #[test]
    fn repeated_coefficients_are_summed() {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", 0.0, 10.0, 1.0).unwrap();
        lp.add_constraint("c", [(x, 1.0), (x, 1.0)], Relation::Ge, 4.0).unwrap();
        assert_eq!(lp.constraints()[0].coeffs, vec![(x, 2.0)]);
        let sol = solve_lp(&lp, DEFAULT_TOLERANCE);
        assert!((sol.primal[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn lp_dump_lists_every_row() {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", 0.0, 5.0, 2.0).unwrap();
        let y = lp.add_variable("y", f64::NEG_INFINITY, f64::INFINITY, -1.0).unwrap();
        lp.add_constraint("c1", [(x, 1.0), (y, -1.0)], Relation::Le, 4.0).unwrap();
        lp.add_constraint("c2", [(y, 1.0)], Relation::Eq, 1.0).unwrap();
        let mut buf = Vec::new();
        write_lp_format(&lp, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "Minimize\n obj: 2 x - 1 y\nSubject To\n c1: 1 x - 1 y <= 4\n c2: 1 y = 1\nBounds\n 0 <= x <= 5\n y free\nEnd\n"
        );
    }
}
