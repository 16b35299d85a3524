//! Dense two-phase tableau simplex with Bland's anti-cycling rule.
//!
//! Entering and leaving candidates are always the lowest-indexed eligible
//! columns/basic variables, so repeated solves of one program land on the
//! same vertex.

use super::{LinearProgram, LpSolution, LpStatus, Relation};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;

/// How an original variable is expressed in nonnegative tableau columns:
/// `x = offset + Σ coeff · column`.
struct VarMap {
    offset: f64,
    cols: Vec<(usize, f64)>,
}

struct Tableau {
    rows: usize,
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    obj: Vec<f64>,
}

enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width - 1)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.data[r * w + c];
        for j in 0..w {
            self.data[r * w + j] /= p;
        }
        let pivot_row: Vec<f64> = self.data[r * w..(r + 1) * w].to_vec();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.data[i * w + c];
            if f != 0.0 {
                let row = &mut self.data[i * w..(i + 1) * w];
                for (x, &pr) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * pr;
                }
                row[c] = 0.0;
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (x, &pr) in self.obj.iter_mut().zip(&pivot_row) {
                *x -= f * pr;
            }
            self.obj[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Sets the reduced-cost row for maximising `cost · columns`.
    fn price(&mut self, cost: &[f64]) {
        let w = self.width;
        self.obj = vec![0.0; w];
        for (o, c) in self.obj.iter_mut().zip(&cost[..w - 1]) {
            *o = -c;
        }
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..w {
                    self.obj[j] += cb * self.data[i * w + j];
                }
            }
        }
    }

    fn run(&mut self, allowed: &[bool], max_iter: usize) -> Outcome {
        for _ in 0..max_iter {
            let Some(enter) = (0..self.width - 1).find(|&j| allowed[j] && self.obj[j] < -COST_TOL) else {
                return Outcome::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, enter);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Outcome::Unbounded,
                Some((r, _)) => self.pivot(r, enter),
            }
        }
        Outcome::IterationLimit
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.width;
        self.data.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.rows -= 1;
    }
}

pub fn solve(lp: &LinearProgram) -> LpSolution {
    let fail = |status| LpSolution { status, values: Vec::new(), objective: f64::NAN };

    // map variables onto nonnegative columns
    let mut maps = Vec::with_capacity(lp.num_vars());
    let mut ncols = 0usize;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for v in lp.vars() {
        let (lo, hi) = (v.lower, v.upper);
        let map = if lo.is_finite() {
            let c = ncols;
            ncols += 1;
            if hi.is_finite() {
                bound_rows.push((c, hi - lo));
            }
            VarMap { offset: lo, cols: vec![(c, 1.0)] }
        } else if hi.is_finite() {
            let c = ncols;
            ncols += 1;
            VarMap { offset: hi, cols: vec![(c, -1.0)] }
        } else {
            ncols += 2;
            VarMap { offset: 0.0, cols: vec![(ncols - 2, 1.0), (ncols - 1, -1.0)] }
        };
        maps.push(map);
    }

    // rows as (dense coefficients over structural columns, relation, rhs)
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for c in lp.constraints() {
        let mut coeffs = vec![0.0; ncols];
        let mut rhs = c.rhs;
        for &(v, a) in &c.terms {
            let m = &maps[v.0];
            rhs -= a * m.offset;
            for &(col, k) in &m.cols {
                coeffs[col] += a * k;
            }
        }
        rows.push((coeffs, c.relation, rhs));
    }
    for &(col, ub) in &bound_rows {
        let mut coeffs = vec![0.0; ncols];
        coeffs[col] = 1.0;
        rows.push((coeffs, Relation::Le, ub));
    }
    for (coeffs, rel, rhs) in rows.iter_mut() {
        if *rhs < 0.0 {
            coeffs.iter_mut().for_each(|x| *x = -*x);
            *rhs = -*rhs;
            *rel = match *rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let art_start = ncols + n_slack;
    let width = art_start + n_art + 1;
    let mut tab = Tableau { rows: m, width, data: vec![0.0; m * width], basis: vec![0; m], obj: Vec::new() };
    let (mut s, mut a) = (ncols, art_start);
    for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        tab.data[i * width..i * width + ncols].copy_from_slice(coeffs);
        tab.data[i * width + width - 1] = *rhs;
        match rel {
            Relation::Le => {
                tab.data[i * width + s] = 1.0;
                tab.basis[i] = s;
                s += 1;
            }
            Relation::Ge => {
                tab.data[i * width + s] = -1.0;
                tab.data[i * width + a] = 1.0;
                tab.basis[i] = a;
                s += 1;
                a += 1;
            }
            Relation::Eq => {
                tab.data[i * width + a] = 1.0;
                tab.basis[i] = a;
                a += 1;
            }
        }
    }

    let max_iter = 50_000 + 50 * (m + width);
    let all_allowed = vec![true; width - 1];
    if n_art > 0 {
        let mut cost = vec![0.0; width - 1];
        cost[art_start..art_start + n_art].iter_mut().for_each(|c| *c = -1.0);
        tab.price(&cost);
        match tab.run(&all_allowed, max_iter) {
            Outcome::Optimal => {}
            Outcome::Unbounded => return fail(LpStatus::SolverFailure("phase one unbounded".into())),
            Outcome::IterationLimit => return fail(LpStatus::SolverFailure("iteration limit in phase one".into())),
        }
        let scale = 1.0 + rows.iter().map(|r| r.2).fold(0.0, f64::max);
        if tab.obj[width - 1] < -1e-7 * scale {
            return fail(LpStatus::Infeasible);
        }
        // drive zero-level artificials out of the basis, dropping redundant rows
        let mut r = 0;
        while r < tab.rows {
            if tab.basis[r] >= art_start {
                match (0..art_start).find(|&j| tab.at(r, j).abs() > PIVOT_TOL) {
                    Some(j) => {
                        tab.pivot(r, j);
                        r += 1;
                    }
                    None => tab.remove_row(r),
                }
            } else {
                r += 1;
            }
        }
    }

    let mut cost = vec![0.0; width - 1];
    for (map, &c) in maps.iter().zip(lp.objective()) {
        for &(col, k) in &map.cols {
            cost[col] += c * k;
        }
    }
    let mut allowed = all_allowed;
    allowed[art_start..].iter_mut().for_each(|x| *x = false);
    tab.price(&cost);
    match tab.run(&allowed, max_iter) {
        Outcome::Optimal => {}
        Outcome::Unbounded => return fail(LpStatus::Unbounded),
        Outcome::IterationLimit => return fail(LpStatus::SolverFailure("iteration limit in phase two".into())),
    }

    let mut colval = vec![0.0; width - 1];
    for i in 0..tab.rows {
        colval[tab.basis[i]] = tab.rhs(i);
    }
    let values: Vec<f64> = maps
        .iter()
        .map(|m| m.offset + m.cols.iter().map(|&(c, k)| k * colval[c]).sum::<f64>())
        .collect();
    let objective = lp.evaluate(&values);
    LpSolution { status: LpStatus::Optimal, values, objective }
}
