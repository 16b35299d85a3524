// Expected values computed independently with scipy.optimize.linprog (HiGHS).

use ringsched::lp::{LinearProgram, LpStatus, Relation};

pub struct HandLp {
    pub name: &'static str,
    pub lp: LinearProgram,
    pub status: LpStatus,
    pub objective: Option<f64>,
}

type Row<'a> = (&'a [(usize, f64)], Relation, f64);

fn build(vars: &[(f64, f64, f64)], cons: &[Row]) -> LinearProgram {
    let mut lp = LinearProgram::new();
    let ids: Vec<_> = vars.iter().enumerate().map(|(i, &(lo, hi, c))| lp.add_var(format!("x{i}"), lo, hi, c)).collect();
    for (k, (terms, rel, rhs)) in cons.iter().enumerate() {
        lp.add_constraint(format!("c{k}"), terms.iter().map(|&(i, a)| (ids[i], a)).collect(), *rel, *rhs);
    }
    lp
}

pub fn hand_lps() -> Vec<HandLp> {
    vec![
        HandLp {
            name: "single_bound",
            lp: build(&[(0.0, 4.0, 1.0)], &[]),
            status: LpStatus::Optimal,
            objective: Some(4.0),
        },
        HandLp {
            name: "two_var_textbook",
            lp: build(&[(0.0, f64::INFINITY, 3.0), (0.0, f64::INFINITY, 2.0)], &[(&[(0, 1.0), (1, 1.0)], Relation::Le, 4.0), (&[(0, 1.0), (1, 3.0)], Relation::Le, 6.0), (&[(0, 1.0)], Relation::Le, 3.0)]),
            status: LpStatus::Optimal,
            objective: Some(11.0),
        },
        HandLp {
            name: "two_var_vertex",
            lp: build(&[(0.0, f64::INFINITY, 1.0), (0.0, f64::INFINITY, 1.0)], &[(&[(0, 1.0), (1, 2.0)], Relation::Le, 4.0), (&[(0, 3.0), (1, 1.0)], Relation::Le, 6.0)]),
            status: LpStatus::Optimal,
            objective: Some(2.7999999999999994),
        },
        HandLp {
            name: "infeasible_band",
            lp: build(&[(0.0, f64::INFINITY, 1.0), (0.0, f64::INFINITY, 1.0)], &[(&[(0, 1.0), (1, 1.0)], Relation::Le, 1.0), (&[(0, 1.0), (1, 1.0)], Relation::Ge, 3.0)]),
            status: LpStatus::Infeasible,
            objective: None,
        },
        HandLp {
            name: "unbounded_ray",
            lp: build(&[(0.0, f64::INFINITY, 1.0), (0.0, f64::INFINITY, 1.0)], &[(&[(0, 1.0), (1, -1.0)], Relation::Le, 1.0)]),
            status: LpStatus::Unbounded,
            objective: None,
        },
        HandLp {
            name: "mixed_relations",
            lp: build(&[(0.0, f64::INFINITY, 2.0), (0.0, f64::INFINITY, 3.0), (0.0, f64::INFINITY, 1.0)], &[(&[(0, 1.0), (1, 1.0), (2, 1.0)], Relation::Eq, 10.0), (&[(0, 1.0), (1, -1.0)], Relation::Ge, 2.0), (&[(2, 1.0)], Relation::Le, 3.0)]),
            status: LpStatus::Optimal,
            objective: Some(24.0),
        },
        HandLp {
            name: "negative_bounds",
            lp: build(&[(-5.0, 5.0, -1.0), (-5.0, 5.0, -1.0)], &[(&[(0, 1.0), (1, 1.0)], Relation::Ge, -3.0)]),
            status: LpStatus::Optimal,
            objective: Some(3.0),
        },
        HandLp {
            name: "free_variable",
            lp: build(&[(f64::NEG_INFINITY, f64::INFINITY, 1.0), (0.0, f64::INFINITY, 0.0)], &[(&[(0, 1.0), (1, 1.0)], Relation::Le, 5.0), (&[(0, 1.0), (1, -2.0)], Relation::Le, 1.0)]),
            status: LpStatus::Optimal,
            objective: Some(3.6666666666666665),
        },
        HandLp {
            name: "degenerate_vertex",
            lp: build(&[(0.0, f64::INFINITY, 1.0), (0.0, f64::INFINITY, 1.0)], &[(&[(0, 1.0)], Relation::Le, 1.0), (&[(1, 1.0)], Relation::Le, 1.0), (&[(0, 1.0), (1, 1.0)], Relation::Le, 2.0), (&[(0, 2.0), (1, 1.0)], Relation::Le, 3.0), (&[(0, 1.0), (1, 2.0)], Relation::Le, 3.0)]),
            status: LpStatus::Optimal,
            objective: Some(2.0),
        },
        HandLp {
            name: "klee_minty_3",
            lp: build(&[(0.0, f64::INFINITY, 100.0), (0.0, f64::INFINITY, 10.0), (0.0, f64::INFINITY, 1.0)], &[(&[(0, 1.0)], Relation::Le, 1.0), (&[(0, 20.0), (1, 1.0)], Relation::Le, 100.0), (&[(0, 200.0), (1, 20.0), (2, 1.0)], Relation::Le, 10000.0)]),
            status: LpStatus::Optimal,
            objective: Some(10000.0),
        },
        HandLp {
            name: "minimise_cover",
            lp: build(&[(0.0, f64::INFINITY, -2.0), (0.0, f64::INFINITY, -3.0)], &[(&[(0, 1.0), (1, 1.0)], Relation::Ge, 4.0), (&[(0, 1.0), (1, 3.0)], Relation::Ge, 6.0)]),
            status: LpStatus::Optimal,
            objective: Some(-9.0),
        },
        HandLp {
            name: "infeasible_bounds",
            lp: build(&[(0.0, 1.0, 1.0)], &[(&[(0, 1.0)], Relation::Ge, 2.0)]),
            status: LpStatus::Infeasible,
            objective: None,
        },
        HandLp {
            name: "unbounded_equality",
            lp: build(&[(0.0, f64::INFINITY, 1.0), (0.0, f64::INFINITY, 0.0)], &[(&[(0, 1.0), (1, -1.0)], Relation::Eq, 0.0)]),
            status: LpStatus::Unbounded,
            objective: None,
        },
        HandLp {
            name: "zero_objective",
            lp: build(&[(0.0, f64::INFINITY, 0.0), (0.0, f64::INFINITY, 0.0)], &[(&[(0, 1.0), (1, 1.0)], Relation::Le, 3.0)]),
            status: LpStatus::Optimal,
            objective: Some(-0.0),
        },
        HandLp {
            name: "transportation",
            lp: build(&[(0.0, f64::INFINITY, -4.0), (0.0, f64::INFINITY, -6.0), (0.0, f64::INFINITY, -5.0), (0.0, f64::INFINITY, -3.0)], &[(&[(0, 1.0), (1, 1.0)], Relation::Le, 30.0), (&[(2, 1.0), (3, 1.0)], Relation::Le, 40.0), (&[(0, 1.0), (2, 1.0)], Relation::Ge, 25.0), (&[(1, 1.0), (3, 1.0)], Relation::Ge, 35.0)]),
            status: LpStatus::Optimal,
            objective: Some(-205.0),
        },
        HandLp {
            name: "diet",
            lp: build(&[(0.0, f64::INFINITY, -0.6), (0.0, f64::INFINITY, -0.35), (0.0, f64::INFINITY, -0.5)], &[(&[(0, 5.0), (1, 7.0), (2, 4.0)], Relation::Ge, 8.0), (&[(0, 4.0), (1, 2.0), (2, 8.0)], Relation::Ge, 15.0), (&[(0, 2.0), (1, 1.0), (2, 1.0)], Relation::Ge, 3.0)]),
            status: LpStatus::Optimal,
            objective: Some(-1.2),
        },
        HandLp {
            name: "dense_6x5",
            lp: build(&[(0.0, f64::INFINITY, 5.0), (0.0, f64::INFINITY, 4.0), (0.0, f64::INFINITY, 3.0), (0.0, f64::INFINITY, 7.0), (0.0, f64::INFINITY, 2.0)], &[(&[(0, 2.0), (1, 3.0), (2, 1.0), (3, 4.0), (4, 1.0)], Relation::Le, 20.0), (&[(0, 4.0), (1, 1.0), (2, 2.0), (3, 1.0), (4, 3.0)], Relation::Le, 18.0), (&[(0, 3.0), (1, 4.0), (2, 2.0), (3, 2.0), (4, 2.0)], Relation::Le, 25.0), (&[(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0), (4, 1.0)], Relation::Le, 9.0), (&[(0, 1.0), (3, 3.0)], Relation::Le, 12.0), (&[(1, 2.0), (2, 1.0), (4, 4.0)], Relation::Le, 16.0)]),
            status: LpStatus::Optimal,
            objective: Some(42.71428571428571),
        },
        HandLp {
            name: "redundant_equalities",
            lp: build(&[(0.0, 5.0, 1.0), (0.0, 5.0, -1.0)], &[(&[(0, 1.0), (1, 1.0)], Relation::Eq, 2.0), (&[(0, 2.0), (1, 2.0)], Relation::Eq, 4.0)]),
            status: LpStatus::Optimal,
            objective: Some(2.0),
        },
        HandLp {
            name: "box_knapsack",
            lp: build(&[(0.0, 1.0, 5.0), (0.0, 1.0, 4.0), (0.0, 1.0, 3.0)], &[(&[(0, 1.0), (1, 1.0), (2, 1.0)], Relation::Le, 2.0)]),
            status: LpStatus::Optimal,
            objective: Some(9.0),
        },
        HandLp {
            name: "infeasible_equalities",
            lp: build(&[(0.0, f64::INFINITY, 1.0), (0.0, f64::INFINITY, 1.0)], &[(&[(0, 1.0), (1, 1.0)], Relation::Eq, 1.0), (&[(0, 1.0), (1, 1.0)], Relation::Eq, 2.0)]),
            status: LpStatus::Infeasible,
            objective: None,
        },
    ]
}
