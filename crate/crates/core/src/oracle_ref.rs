//! Reference exact solver: the true optimal bounded contract, computed
//! with full knowledge of the instance.
//!
//! Two independent routes are kept side by side on purpose: a per-action
//! linear program (exact) and a brute-force grid scan (approximate).
//! Audits compare learned contracts against the LP route, and tests compare
//! the two routes against each other.

use crate::error::Error;
use crate::lp::{solve_lp, LinearProgram, LpOutcome};
use crate::model::{principal_utility, principal_value, Contract, Instance};

/// Grid scans refuse to evaluate more points than this.
pub const GRID_BUDGET: u128 = 50_000_000;

/// The exact optimum over the box `[0, bound]^m`.
#[derive(Debug, Clone)]
pub struct OptResult {
    /// Maximum principal utility.
    pub value: f64,
    /// A contract attaining it.
    pub contract: Contract,
    /// The action that contract induces.
    pub action: usize,
    /// Per-action LP values; `None` marks actions no bounded contract
    /// can make a best response.
    pub region_values: Vec<Option<f64>>,
}

/// Solves one LP per action: maximize the principal's expected value while
/// keeping that action weakly preferred by the agent, inside the box.
///
/// The overall optimum is the best of the per-action values; ties go to the
/// lowest action index. The realized utility of the returned contract equals
/// the LP value because best-response ties break in the principal's favour.
pub fn solve_opt(inst: &Instance, bound: f64) -> Result<OptResult, Error> {
    let violations = crate::model::validate_instance(inst);
    if !violations.is_empty() {
        return Err(Error::InvalidInstance(violations));
    }
    if !bound.is_finite() || bound < 1.0 {
        return Err(Error::ParamRange(format!(
            "bound B = {bound} must be finite and at least 1"
        )));
    }
    let n = inst.n_actions();
    let m = inst.n_outcomes();
    let mut region_values: Vec<Option<f64>> = Vec::with_capacity(n);
    let mut best: Option<(f64, Vec<f64>, usize)> = None;
    for a in 0..n {
        let mut constraints: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n - 1 + m);
        for b in 0..n {
            if b == a {
                continue;
            }
            // Keep action a weakly preferred to b.
            let row: Vec<f64> = (0..m)
                .map(|w| inst.distributions[b][w] - inst.distributions[a][w])
                .collect();
            constraints.push((row, inst.costs[b] - inst.costs[a]));
        }
        for w in 0..m {
            let mut row = vec![0.0; m];
            row[w] = 1.0;
            constraints.push((row, bound));
        }
        // Maximize sum_w F[a][w] (r[w] - p[w]); the reward part is constant.
        let objective: Vec<f64> = (0..m).map(|w| -inst.distributions[a][w]).collect();
        let reward_part = principal_value(inst, a, &vec![0.0; m]);
        match solve_lp(&LinearProgram { objective, constraints })? {
            LpOutcome::Optimal { value, point } => {
                let total = reward_part + value;
                region_values.push(Some(total));
                let improves = match &best {
                    None => true,
                    Some((v, _, _)) => total > *v,
                };
                if improves {
                    best = Some((total, point, a));
                }
            }
            LpOutcome::Infeasible => region_values.push(None),
            LpOutcome::Unbounded => {
                return Err(Error::Lp(
                    "per-action program over a box cannot be unbounded".into(),
                ))
            }
        }
    }
    let (value, point, action) = best.ok_or_else(|| {
        Error::Lp("no action is implementable, yet a zero-cost action exists".into())
    })?;
    let contract = Contract::new(point)?;
    debug_assert!(
        (principal_utility(inst, &contract) - value).abs() < 1e-7,
        "realized utility must match the winning LP value"
    );
    Ok(OptResult { value, contract, action, region_values })
}

/// Brute-force maximum of the true principal utility over the grid
/// `{0, step, 2*step, ...}^m` capped at `bound` per coordinate.
pub fn grid_opt(inst: &Instance, bound: f64, step: f64) -> Result<(f64, Contract), Error> {
    let violations = crate::model::validate_instance(inst);
    if !violations.is_empty() {
        return Err(Error::InvalidInstance(violations));
    }
    if !step.is_finite() || step <= 0.0 {
        return Err(Error::ParamRange(format!("grid step {step} must be positive")));
    }
    if !bound.is_finite() || bound < 1.0 {
        return Err(Error::ParamRange(format!(
            "bound B = {bound} must be finite and at least 1"
        )));
    }
    let m = inst.n_outcomes();
    let per_dim = (bound / step + 1e-9).floor() as u128 + 1;
    let total = per_dim.checked_pow(m as u32).unwrap_or(u128::MAX);
    if total > GRID_BUDGET {
        return Err(Error::GridBudget(total, GRID_BUDGET));
    }
    let mut indices = vec![0u128; m];
    let mut payments = vec![0.0; m];
    let mut best_value = f64::NEG_INFINITY;
    let mut best_point = payments.clone();
    loop {
        for (w, &i) in indices.iter().enumerate() {
            payments[w] = (i as f64) * step;
        }
        let p = Contract::new(payments.clone())?;
        let value = principal_utility(inst, &p);
        // Strict improvement keeps the lexicographically first argmax.
        if value > best_value {
            best_value = value;
            best_point = payments.clone();
        }
        // Odometer increment, last coordinate fastest.
        let mut pos = m;
        loop {
            if pos == 0 {
                return Ok((best_value, Contract::new(best_point)?));
            }
            pos -= 1;
            indices[pos] += 1;
            if indices[pos] < per_dim {
                break;
            }
            indices[pos] = 0;
        }
    }
}
