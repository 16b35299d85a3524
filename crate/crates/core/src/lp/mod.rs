//! Linear programs and the solver contract used by the per-slot relaxations.
//!
//! Two backends satisfy the same contract: a dense two-phase simplex with
//! Bland's rule ([`dense`]) and a sparse revised simplex adapter
//! ([`sparse`]). [`Backend::Auto`] picks the dense one for small programs.

pub mod dense;
pub mod sparse;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Primal feasibility tolerance every optimal solution is checked against.
pub const FEAS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("variable {0} has lower bound above upper bound")]
    Bounds(String),
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("{0} references undeclared variable {1}")]
    UnknownVar(String, usize),
}

/// A maximisation LP: `max c·x  s.t.  A x (<=|=|>=) b,  l <= x <= u`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    vars: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<f64>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, obj: f64) -> VarId {
        self.vars.push(Variable { name: name.into(), lower, upper });
        self.objective.push(obj);
        VarId(self.vars.len() - 1)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        self.constraints.push(Constraint { name: name.into(), terms, relation, rhs });
        self.constraints.len() - 1
    }

    pub fn set_objective(&mut self, var: VarId, coeff: f64) {
        self.objective[var.0] = coeff;
    }

    pub fn objective_coeff(&self, var: VarId) -> f64 {
        self.objective[var.0]
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        for (v, c) in self.vars.iter().zip(&self.objective) {
            if v.lower > v.upper || v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(LpError::Bounds(v.name.clone()));
            }
            if v.lower.is_nan() || v.upper.is_nan() || !c.is_finite() {
                return Err(LpError::NonFinite(v.name.clone()));
            }
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(LpError::NonFinite(c.name.clone()));
            }
            for &(v, a) in &c.terms {
                if v.0 >= self.vars.len() {
                    return Err(LpError::UnknownVar(c.name.clone(), v.0));
                }
                if !a.is_finite() {
                    return Err(LpError::NonFinite(c.name.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, x)| c * x).sum()
    }

    /// Largest violation of any bound or row by `values`.
    pub fn max_infeasibility(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &x) in self.vars.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        for c in &self.constraints {
            let lhs: f64 = c.terms.iter().map(|&(v, a)| a * values[v.0]).sum();
            let gap = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(gap);
        }
        worst
    }

    /// CPLEX-style LP text: objective row, constraint rows, bounds.
    pub fn to_lp_text(&self) -> String {
        let name = |i: usize| sanitize(&self.vars[i].name, i);
        let expr = |terms: &mut dyn Iterator<Item = (usize, f64)>| {
            let mut s = String::new();
            for (i, c) in terms {
                let sign = if c < 0.0 { "-" } else { "+" };
                let _ = write!(s, " {sign} {} {}", c.abs(), name(i));
            }
            if s.is_empty() {
                s.push_str(" 0");
            }
            s
        };
        let mut out = String::from("Maximize\n obj:");
        out += &expr(&mut self.objective.iter().copied().enumerate().filter(|(_, c)| *c != 0.0));
        out += "\nSubject To\n";
        for (k, c) in self.constraints.iter().enumerate() {
            let rel = match c.relation {
                Relation::Le => "<=",
                Relation::Ge => ">=",
                Relation::Eq => "=",
            };
            let _ = writeln!(
                out,
                " {}:{} {rel} {}",
                sanitize(&c.name, k),
                expr(&mut c.terms.iter().map(|&(v, a)| (v.0, a))),
                c.rhs
            );
        }
        out += "Bounds\n";
        for (i, v) in self.vars.iter().enumerate() {
            let lo = if v.lower == f64::NEG_INFINITY { "-inf".to_string() } else { v.lower.to_string() };
            let hi = if v.upper == f64::INFINITY { "+inf".to_string() } else { v.upper.to_string() };
            let _ = writeln!(out, " {lo} <= {} <= {hi}", name(i));
        }
        out += "End\n";
        out
    }
}

fn sanitize(name: &str, idx: usize) -> String {
    let cleaned: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.[]".contains(c) { c } else { '_' })
        .collect();
    if cleaned.is_empty() || cleaned.starts_with(|c: char| c.is_ascii_digit()) {
        format!("x{idx}_{cleaned}")
    } else {
        cleaned
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    SolverFailure(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }

    fn without_values(status: LpStatus) -> Self {
        LpSolution { status, values: Vec::new(), objective: f64::NAN }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Dense,
    Sparse,
    #[default]
    Auto,
}

/// Tableau cell count above which [`Backend::Auto`] switches to sparse.
const DENSE_CELL_LIMIT: usize = 250_000;

pub fn solve(lp: &LinearProgram) -> LpSolution {
    solve_with(lp, Backend::Auto)
}

pub fn solve_with(lp: &LinearProgram, backend: Backend) -> LpSolution {
    if let Err(e) = lp.validate() {
        return LpSolution::without_values(LpStatus::SolverFailure(e.to_string()));
    }
    let backend = match backend {
        Backend::Auto => {
            let rows = lp.num_constraints() + lp.vars.iter().filter(|v| v.upper.is_finite()).count();
            let cols = lp.num_vars() + 2 * rows;
            if rows.saturating_mul(cols) <= DENSE_CELL_LIMIT {
                Backend::Dense
            } else {
                Backend::Sparse
            }
        }
        b => b,
    };
    let sol = match backend {
        Backend::Sparse => sparse::solve(lp),
        _ => dense::solve(lp),
    };
    certify(lp, sol)
}

/// Rejects any "optimal" answer that is not primal feasible.
fn certify(lp: &LinearProgram, mut sol: LpSolution) -> LpSolution {
    if sol.status == LpStatus::Optimal {
        let scale = 1.0 + lp.constraints.iter().map(|c| c.rhs.abs()).fold(0.0, f64::max);
        let infeas = lp.max_infeasibility(&sol.values);
        if infeas > FEAS_TOL * scale {
            sol.status = LpStatus::SolverFailure(format!("solution infeasible by {infeas:e}"));
        } else {
            // clamp tiny bound excursions so downstream code sees in-range values
            for (x, v) in sol.values.iter_mut().zip(&lp.vars) {
                *x = x.clamp(v.lower, v.upper);
            }
            sol.objective = lp.evaluate(&sol.values);
        }
    }
    sol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp_text_has_sections() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, f64::INFINITY, 1.0);
        lp.add_constraint("cap", vec![(x, 1.0)], Relation::Le, 3.0);
        let text = lp.to_lp_text();
        assert!(text.starts_with("Maximize\n obj: + 1 x"));
        assert!(text.contains("cap: + 1 x <= 3"));
        assert!(text.contains("0 <= x <= +inf"));
        assert!(text.ends_with("End\n"));
    }

    #[test]
    fn invalid_lp_reports_failure() {
        let mut lp = LinearProgram::new();
        lp.add_var("x", 2.0, 1.0, 1.0);
        assert!(matches!(solve(&lp).status, LpStatus::SolverFailure(_)));
    }
}
