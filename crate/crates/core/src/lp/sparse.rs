//! Adapter onto the `microlp` sparse revised simplex.

use std::collections::BTreeMap;

use microlp::{ComparisonOp, Error, OptimizationDirection, Problem, SolutionStatus, SolveOutcome};

use super::{LinearProgram, LpSolution, LpStatus, Relation};

pub fn solve(lp: &LinearProgram) -> LpSolution {
    let fail = |status| LpSolution { status, values: Vec::new(), objective: f64::NAN };

    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = lp
        .vars()
        .iter()
        .zip(lp.objective())
        .map(|(v, &c)| problem.add_var(c, (v.lower, v.upper)))
        .collect();
    for c in lp.constraints() {
        // microlp rejects repeated indices within one row
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for &(v, a) in &c.terms {
            *merged.entry(v.0).or_default() += a;
        }
        let expr: Vec<_> = merged.into_iter().filter(|(_, a)| *a != 0.0).map(|(i, a)| (vars[i], a)).collect();
        let op = match c.relation {
            Relation::Le => ComparisonOp::Le,
            Relation::Ge => ComparisonOp::Ge,
            Relation::Eq => ComparisonOp::Eq,
        };
        if expr.is_empty() {
            let ok = match c.relation {
                Relation::Le => 0.0 <= c.rhs + 1e-9,
                Relation::Ge => 0.0 >= c.rhs - 1e-9,
                Relation::Eq => c.rhs.abs() <= 1e-9,
            };
            if !ok {
                return fail(LpStatus::Infeasible);
            }
            continue;
        }
        problem.add_constraint(expr, op, c.rhs);
    }

    match problem.solve() {
        Ok(SolveOutcome::Solution(sol)) if sol.status() == SolutionStatus::Optimal => {
            let values: Vec<f64> = vars.iter().map(|&v| sol.var_value_raw(v)).collect();
            let objective = lp.evaluate(&values);
            LpSolution { status: LpStatus::Optimal, values, objective }
        }
        Ok(SolveOutcome::Solution(_)) => fail(LpStatus::SolverFailure("optimality not proven".into())),
        Ok(SolveOutcome::Interrupted(_)) => fail(LpStatus::SolverFailure("solve interrupted".into())),
        Err(Error::Infeasible) => fail(LpStatus::Infeasible),
        Err(Error::Unbounded) => fail(LpStatus::Unbounded),
        Err(e) => fail(LpStatus::SolverFailure(e.to_string())),
    }
}
