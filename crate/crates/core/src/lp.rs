//! Dense two-phase simplex for the small linear programs this crate solves.
//!
//! Problems here are tiny (a handful of variables, tens of rows), so a
//! textbook tableau with Bland's anti-cycling rule beats pulling in a
//! solver: every pivot is deterministic, and the two tolerances below are
//! the only numeric knobs in play.

use crate::error::Error;

/// Entries smaller than this never serve as pivots.
pub const PIVOT_TOL: f64 = 1e-10;

/// Residual infeasibility (phase-1 objective) below this counts as feasible.
pub const PHASE1_TOL: f64 = 1e-8;

/// Maximize `objective . x` subject to `a . x <= b` for each constraint row
/// and `x >= 0` componentwise.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<(Vec<f64>, f64)>,
}

/// Result of solving a [`LinearProgram`].
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, point: Vec<f64> },
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_cols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.n_cols - 1]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let scale = self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v /= scale;
        }
        let pivot_row = self.rows[row].clone();
        for (i, r) in self.rows.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let factor = r[col];
            if factor != 0.0 {
                for (v, pv) in r.iter_mut().zip(pivot_row.iter()) {
                    *v -= factor * pv;
                }
            }
        }
        self.basis[row] = col;
    }

    /// Runs simplex minimizing `costs . all_vars` with Bland's rule.
    /// Returns false when an improving column has no positive entry
    /// (the problem is unbounded in that direction).
    fn minimize(&mut self, costs: &[f64]) -> bool {
        loop {
            // Reduced costs relative to the current basis.
            let mut reduced = costs.to_vec();
            for (i, &b) in self.basis.iter().enumerate() {
                let cb = costs[b];
                if cb != 0.0 {
                    for (j, r) in reduced.iter_mut().enumerate() {
                        *r -= cb * self.rows[i][j];
                    }
                }
            }
            // Bland: lowest-index improving column.
            let Some(col) = (0..self.n_cols - 1).find(|&j| reduced[j] < -PIVOT_TOL) else {
                return true;
            };
            // Ratio test; ties go to the lowest basis variable index.
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - PIVOT_TOL
                                || (ratio < lr + PIVOT_TOL && self.basis[i] < self.basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            match leave {
                Some((row, _)) => self.pivot(row, col),
                None => return false,
            }
        }
    }
}

/// Solves the program; `Err` is reserved for malformed input and internal
/// inconsistencies, while infeasible/unbounded are ordinary outcomes.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome, Error> {
    let k = lp.objective.len();
    if k == 0 {
        return Err(Error::DimensionMismatch("objective has no variables".into()));
    }
    if lp.objective.iter().any(|v| !v.is_finite()) {
        return Err(Error::ParamRange("objective has non-finite entries".into()));
    }
    for (a, b) in &lp.constraints {
        if a.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "constraint row has {} entries, expected {}",
                a.len(),
                k
            )));
        }
        if a.iter().any(|v| !v.is_finite()) || !b.is_finite() {
            return Err(Error::ParamRange("constraint has non-finite entries".into()));
        }
    }

    let n_rows = lp.constraints.len();
    // Columns: k structural, n_rows slacks, then one artificial per
    // negative-rhs row, then the rhs.
    let art_rows: Vec<usize> = (0..n_rows)
        .filter(|&i| lp.constraints[i].1 < 0.0)
        .collect();
    let n_art = art_rows.len();
    let n_cols = k + n_rows + n_art + 1;

    let mut t = Tableau {
        rows: Vec::with_capacity(n_rows),
        basis: Vec::with_capacity(n_rows),
        n_cols,
    };
    let mut next_art = k + n_rows;
    for (i, (a, b)) in lp.constraints.iter().enumerate() {
        let mut row = vec![0.0; n_cols];
        let flip = *b < 0.0;
        let sign = if flip { -1.0 } else { 1.0 };
        for (j, &v) in a.iter().enumerate() {
            row[j] = sign * v;
        }
        row[k + i] = sign; // slack keeps the row an equality
        row[n_cols - 1] = sign * b;
        if flip {
            row[next_art] = 1.0;
            t.basis.push(next_art);
            next_art += 1;
        } else {
            t.basis.push(k + i);
        }
        t.rows.push(row);
    }

    // Phase 1: minimize the artificial total.
    if n_art > 0 {
        let mut costs = vec![0.0; n_cols];
        for c in costs.iter_mut().take(k + n_rows + n_art).skip(k + n_rows) {
            *c = 1.0;
        }
        if !t.minimize(&costs) {
            return Err(Error::Lp("phase 1 cannot be unbounded".into()));
        }
        let residual: f64 = t
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= k + n_rows)
            .map(|(i, _)| t.rhs(i))
            .sum();
        if residual > PHASE1_TOL {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive leftover (degenerate) artificials out of the basis.
        for i in 0..t.rows.len() {
            if t.basis[i] >= k + n_rows {
                if let Some(col) =
                    (0..k + n_rows).find(|&j| t.rows[i][j].abs() > PIVOT_TOL)
                {
                    t.pivot(i, col);
                }
                // A row with no eligible pivot is redundant; its artificial
                // sits at zero and never re-enters because phase 2 costs
                // keep artificial columns forbidden below.
            }
        }
    }

    // Phase 2: minimize the negated objective; artificials are locked out
    // with a prohibitive cost in case any linger basic at level zero.
    let mut costs = vec![0.0; n_cols];
    for (j, &c) in lp.objective.iter().enumerate() {
        costs[j] = -c;
    }
    let lock = 1.0
        + lp.objective.iter().map(|c| c.abs()).sum::<f64>()
        + lp.constraints
            .iter()
            .map(|(a, b)| a.iter().map(|v| v.abs()).sum::<f64>() + b.abs())
            .sum::<f64>();
    for c in costs.iter_mut().take(k + n_rows + n_art).skip(k + n_rows) {
        *c = lock * 1e6;
    }
    if !t.minimize(&costs) {
        return Ok(LpOutcome::Unbounded);
    }

    let mut point = vec![0.0; k];
    for (i, &b) in t.basis.iter().enumerate() {
        if b < k {
            point[b] = t.rhs(i);
        }
    }
    // Clamp the tiny negatives simplex arithmetic can leave behind.
    for v in point.iter_mut() {
        if *v < 0.0 && *v > -PHASE1_TOL {
            *v = 0.0;
        }
    }
    let value = lp
        .objective
        .iter()
        .zip(point.iter())
        .map(|(&c, &x)| c * x)
        .sum();
    Ok(LpOutcome::Optimal { value, point })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn optimal(lp: &LinearProgram) -> (f64, Vec<f64>) {
        match solve_lp(lp).expect("well-formed program") {
            LpOutcome::Optimal { value, point } => (value, point),
            other => panic!("expected optimal outcome, got {other:?}"),
        }
    }

    #[test]
    fn box_corner_optimum() {
        let lp = LinearProgram {
            objective: vec![1.0, 1.0],
            constraints: vec![(vec![1.0, 0.0], 1.0), (vec![0.0, 1.0], 1.0)],
        };
        let (value, point) = optimal(&lp);
        assert!((value - 2.0).abs() < 1e-9);
        assert!((point[0] - 1.0).abs() < 1e-9 && (point[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible() {
        // x <= 1 and x >= 2 cannot both hold.
        let lp = LinearProgram {
            objective: vec![1.0],
            constraints: vec![(vec![1.0], 1.0), (vec![-1.0], -2.0)],
        };
        assert_eq!(solve_lp(&lp).unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let lp = LinearProgram {
            objective: vec![1.0],
            constraints: vec![(vec![-1.0], 0.0)],
        };
        assert_eq!(solve_lp(&lp).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn region_lp_from_hand_worked_example() {
        // Maximize 0.1(0 - p2) + 0.9(1 - p3) over [0,1]^3 cut by the
        // halfspace where the costly action stays preferred. The constant
        // 0.9 is added outside the solver.
        let lp = LinearProgram {
            objective: vec![0.0, -0.1, -0.9],
            constraints: vec![
                (vec![1.0, 0.0, 0.0], 1.0),
                (vec![0.0, 1.0, 0.0], 1.0),
                (vec![0.0, 0.0, 1.0], 1.0),
                (vec![0.5, -0.1, -0.4], -0.25),
            ],
        };
        let (value, point) = optimal(&lp);
        assert!((0.9 + value - 0.4625).abs() < 1e-9, "value was {}", 0.9 + value);
        assert!((point[0] - 0.0).abs() < 1e-9);
        assert!((point[1] - 1.0).abs() < 1e-9);
        assert!((point[2] - 0.375).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs_rows_need_phase_one() {
        // Feasible region: x + y >= 1 inside the unit box; maximize -x - y.
        let lp = LinearProgram {
            objective: vec![-1.0, -1.0],
            constraints: vec![
                (vec![1.0, 0.0], 1.0),
                (vec![0.0, 1.0], 1.0),
                (vec![-1.0, -1.0], -1.0),
            ],
        };
        let (value, point) = optimal(&lp);
        assert!((value + 1.0).abs() < 1e-9);
        assert!((point[0] + point[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn redundant_equality_like_rows_are_handled() {
        // Two opposite rows pin x = 0.5 exactly; the second needs an
        // artificial and leaves a degenerate basis behind.
        let lp = LinearProgram {
            objective: vec![1.0, 0.0],
            constraints: vec![
                (vec![1.0, 0.0], 0.5),
                (vec![-1.0, 0.0], -0.5),
                (vec![0.0, 1.0], 2.0),
            ],
        };
        let (value, point) = optimal(&lp);
        assert!((value - 0.5).abs() < 1e-9);
        assert!((point[0] - 0.5).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        // Programs with non-negative rhs are feasible at the origin, so the
        // solver must report Optimal or Unbounded and any optimum must be
        // feasible and at least as good as the origin.
        #[test]
        fn optimum_is_feasible_and_beats_origin(
            obj in proptest::collection::vec(-2.0..2.0f64, 3),
            rows in proptest::collection::vec(
                (proptest::collection::vec(-1.0..1.0f64, 3), 0.0..2.0f64), 1..6),
            cap in 1.0..4.0f64,
        ) {
            // A global cap keeps everything bounded.
            let mut constraints = rows;
            constraints.push((vec![1.0, 1.0, 1.0], cap));
            let lp = LinearProgram { objective: obj.clone(), constraints };
            match solve_lp(&lp).unwrap() {
                LpOutcome::Optimal { value, point } => {
                    for (a, b) in &lp.constraints {
                        let lhs: f64 = a.iter().zip(&point).map(|(x, y)| x * y).sum();
                        prop_assert!(lhs <= b + 1e-7, "violated row: {} > {}", lhs, b);
                    }
                    for &x in &point {
                        prop_assert!(x >= -1e-9);
                    }
                    prop_assert!(value >= -1e-9, "origin is feasible with value 0");
                }
                LpOutcome::Unbounded => prop_assert!(false, "capped program is bounded"),
                LpOutcome::Infeasible => prop_assert!(false, "origin is feasible"),
            }
        }
    }
}
