//! Explore-then-commit regret experiment over a known instance.
//!
//! The learner explores with its sampling budget capped at the horizon,
//! then commits to the learned contract for the remaining rounds. Regret
//! is measured against the best bounded contract computed by the exact
//! reference solver. When the derived sample counts exceed the horizon the
//! whole run degenerates into exploration at the zero contract.
//!
//! Accounting is white-box: each round contributes the expected utility
//! of the contract in force that round, not the realized reward, so the
//! regret curve carries no sampling noise.

use crate::driver::{
    compute_params_with_overrides, discover_and_cover, MixMode, Overrides,
};
use crate::environment::{Environment, OutcomeSampler};
use crate::error::Error;
use crate::model::{principal_utility, Contract, Instance};
use crate::oracle_ref::solve_opt;

/// Accuracy targets are clamped strictly below 1; the schedule exceeds 1
/// at short horizons where no nontrivial accuracy is achievable.
pub const MAX_RHO: f64 = 1.0 - 1e-12;

/// Accuracy schedule `m^(n/5) B^(3/5) m n^(8/5) T^(-1/5)`, unclamped.
pub fn theorem_rho(m: usize, n: usize, bound: f64, horizon: u64) -> f64 {
    let m_f = m as f64;
    let n_f = n as f64;
    let t = horizon as f64;
    m_f.powf(n_f / 5.0) * bound.powf(3.0 / 5.0) * m_f * n_f.powf(8.0 / 5.0) * t.powf(-1.0 / 5.0)
}

/// Result of one explore-then-commit run.
#[derive(Debug)]
pub struct RegretOutcome {
    pub horizon: u64,
    /// Value of the best bounded contract.
    pub opt: f64,
    /// Accuracy target the parameters were derived from.
    pub rho_used: f64,
    /// Learned contract; `None` when the budget ran out first.
    pub learned: Option<Contract>,
    /// True value of the learned contract.
    pub learned_value: Option<f64>,
    /// Rounds spent exploring (at most the horizon).
    pub exploration_rounds: u64,
    /// The budget ran out before a covering pass completed.
    pub all_exploration: bool,
    /// Covering passes aborted by merges (0 when learning incomplete).
    pub restarts: u64,
    /// Expected principal utility of the contract in force each round,
    /// exactly `horizon` entries; constant within one sampling block.
    pub per_round: Vec<f64>,
    /// `horizon * opt` minus the per-round utility total.
    pub cumulative_regret: f64,
}

/// Runs one experiment. `rho` defaults to the clamped schedule value for
/// the horizon; `overrides` and `mix` pass through to the derivation.
pub fn run_regret(
    instance: &Instance,
    horizon: u64,
    delta: f64,
    bound: f64,
    rho: Option<f64>,
    mix: MixMode,
    overrides: Overrides,
    seed: u64,
) -> Result<RegretOutcome, Error> {
    if horizon == 0 {
        return Err(Error::ParamRange("horizon must be at least 1".into()));
    }
    let m = instance.n_outcomes();
    let n = instance.n_actions();
    let rho_used = match rho {
        Some(r) => r,
        None => theorem_rho(m, n, bound, horizon).min(MAX_RHO),
    };
    let mut params = compute_params_with_overrides(rho_used, delta, bound, m, n, mix, overrides)?;
    params.round_cap = horizon;

    let opt = solve_opt(instance, bound)?.value;
    let mut env = Environment::new(instance.clone(), seed)?.with_trace();

    let mut learned = None;
    let mut learned_value = None;
    let mut all_exploration = false;
    let mut restarts = 0;
    if params.q >= horizon {
        // The first oracle query alone would exhaust the horizon: the run
        // is a single exploration block at the zero contract, truncated.
        env.estimate(&Contract::zero(m), horizon)?;
        all_exploration = true;
    } else {
        match discover_and_cover(&mut env, &instance.rewards, &params, None) {
            Ok(out) => {
                learned_value = Some(principal_utility(instance, &out.result.contract));
                learned = Some(out.result.contract);
                restarts = out.restarts;
            }
            Err(Error::BudgetExceeded { .. }) => all_exploration = true,
            Err(e) => return Err(e),
        }
    }
    let exploration_rounds = env.rounds_used().min(horizon);

    if let Some(p) = &learned {
        let remaining = horizon.saturating_sub(env.rounds_used());
        if remaining > 0 {
            env.estimate(p, remaining)?;
        }
    }

    // Expected utility of each block's contract, repeated for its rounds:
    // the trace records the true best response, so u(p^t) is exact.
    let trace = env.trace().expect("tracing was enabled");
    let mut per_round = Vec::with_capacity(horizon as usize);
    'expand: for entry in trace {
        let u: f64 = instance.distributions[entry.action]
            .iter()
            .zip(instance.rewards.iter().zip(&entry.payments))
            .map(|(f, (r, p))| f * (r - p))
            .sum();
        for _ in 0..entry.rounds {
            per_round.push(u);
            if per_round.len() as u64 == horizon {
                break 'expand;
            }
        }
    }
    if per_round.len() as u64 != horizon {
        return Err(Error::Geometry(format!(
            "trace covers {} of {horizon} rounds",
            per_round.len()
        )));
    }
    let total: f64 = per_round.iter().sum();
    let cumulative_regret = horizon as f64 * opt - total;

    Ok(RegretOutcome {
        horizon,
        opt,
        rho_used,
        learned,
        learned_value,
        exploration_rounds,
        all_exploration,
        restarts,
        per_round,
        cumulative_regret,
    })
}

/// Per-round series as CSV with a running regret column.
pub fn per_round_csv(outcome: &RegretOutcome) -> String {
    let mut s = String::from("t,u_t,cumulative_regret\n");
    let mut cum = 0.0;
    for (i, u) in outcome.per_round.iter().enumerate() {
        cum += outcome.opt - u;
        s.push_str(&format!("{},{u},{cum}\n", i + 1));
    }
    s
}
