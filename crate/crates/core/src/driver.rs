//! Parameter derivation and the outer learning loop.
//!
//! From a target accuracy `rho` and failure probability `delta` the driver
//! derives the estimation tolerance `eps`, the bisection resolution `eta`,
//! the per-estimate failure budget `alpha`, the per-query sample count `q`,
//! and the mixing weight applied to the final contract. Covering passes are
//! restarted until one completes, then the final contract is extracted.

use crate::action_oracle::MetaActionRegistry;
use crate::environment::OutcomeSampler;
use crate::error::Error;
use crate::find_contract::{find_contract, FindContractResult};
use crate::try_cover::{try_cover, Cover, CoverSnapshot};

/// Sample counts above this are refused outright; nothing that large can
/// run, so surfacing the magnitude beats silently looping.
const Q_LIMIT: f64 = 9.0e18;

/// How the mixing weight for the final contract is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MixMode {
    /// The best-response slack the covering guarantees,
    /// `27 B eps m n^2 + 2 n eta sqrt(m)`, from the derived base values.
    Gamma,
    /// The derived base estimation tolerance itself.
    Eps,
    /// An explicit weight.
    Value(f64),
}

/// Optional replacements for individual derived parameters. A replaced
/// `eps` re-derives `eta` (and through it `alpha` and `q`) unless those
/// are themselves replaced.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub eps: Option<f64>,
    pub eta: Option<f64>,
    pub alpha: Option<f64>,
    pub q: Option<u64>,
}

/// Everything the learning loop needs to run.
#[derive(Debug, Clone)]
pub struct Params {
    /// Target suboptimality of the learned contract.
    pub rho: f64,
    /// Allowed failure probability.
    pub delta: f64,
    /// Per-outcome payment bound of the output box.
    pub bound: f64,
    /// Number of outcomes.
    pub m: usize,
    /// Upper bound on the number of actions.
    pub n_bound: usize,
    /// Estimation tolerance: clusters match within `2 * eps` per outcome.
    pub eps: f64,
    /// Bisection stops when the bracket is shorter than this.
    pub eta: f64,
    /// Failure probability budget of a single estimate.
    pub alpha: f64,
    /// Environment rounds per oracle query.
    pub q: u64,
    /// Mixing weight: the final contract moves `sqrt(mix)` toward rewards.
    pub mix: f64,
    /// Hard cap on total environment rounds.
    pub round_cap: u64,
    /// The replacements this was derived with, kept for reporting.
    pub overrides: Overrides,
}

impl Params {
    /// Direct constructor for experiments and white-box tests: uses the
    /// given knobs verbatim, no mixing, no round cap.
    pub fn explicit(bound: f64, m: usize, n_bound: usize, eps: f64, eta: f64, q: u64) -> Self {
        Self {
            rho: 0.0,
            delta: 0.0,
            bound,
            m,
            n_bound,
            eps,
            eta,
            alpha: 0.0,
            q,
            mix: 0.0,
            round_cap: u64::MAX,
            overrides: Overrides::default(),
        }
    }
}

/// Binomial coefficient as a float; large inputs saturate toward infinity,
/// which downstream turns into a refused sample count.
fn binomial(a: u64, b: u64) -> f64 {
    if b > a {
        return 0.0;
    }
    let b = b.min(a - b);
    let mut r = 1.0;
    for i in 0..b {
        r = r * ((a - i) as f64) / ((i + 1) as f64);
    }
    r
}

/// Samples per query so one frequency estimate is within `eps` of the true
/// distribution in every coordinate except with probability `alpha`.
pub fn hoeffding_q(eps: f64, alpha: f64, m: usize) -> Result<u64, Error> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::ParamRange(format!("eps must be positive, got {eps}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::ParamRange(format!("alpha must be in (0, 1), got {alpha}")));
    }
    if m == 0 {
        return Err(Error::ParamRange("m must be at least 1".into()));
    }
    let raw = 1.0 / (2.0 * eps * eps) * (2.0 * m as f64 / alpha).ln();
    if !raw.is_finite() || raw > Q_LIMIT {
        return Err(Error::BudgetAstronomical(raw));
    }
    Ok(raw.ceil() as u64)
}

/// Derives all learning parameters from the accuracy target.
pub fn compute_params(
    rho: f64,
    delta: f64,
    bound: f64,
    m: usize,
    n_bound: usize,
    mix: MixMode,
) -> Result<Params, Error> {
    compute_params_with_overrides(rho, delta, bound, m, n_bound, mix, Overrides::default())
}

/// Derivation with individual parameters replaced. Replacements cascade:
/// a replaced `eps` feeds the derived `eta`, which feeds `alpha`, which
/// feeds `q`. The mixing weight in `Gamma` and `Eps` modes always comes
/// from the (`rho`, `delta`)-derived base values, not the replacements,
/// so aggressive experiment tolerances do not inflate the final blend.
pub fn compute_params_with_overrides(
    rho: f64,
    delta: f64,
    bound: f64,
    m: usize,
    n_bound: usize,
    mix: MixMode,
    overrides: Overrides,
) -> Result<Params, Error> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::ParamRange(format!("rho must be in (0, 1), got {rho}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::ParamRange(format!("delta must be in (0, 1), got {delta}")));
    }
    if !(bound >= 1.0) || !bound.is_finite() {
        return Err(Error::ParamRange(format!("bound must be at least 1, got {bound}")));
    }
    if m == 0 || n_bound == 0 {
        return Err(Error::ParamRange("m and n_bound must be at least 1".into()));
    }

    let m_f = m as f64;
    let n_f = n_bound as f64;
    let eps_base = rho * rho / (1024.0 * bound * m_f.powi(2) * n_f.powi(2));
    let eta_base = eps_base * m_f.sqrt() * n_f / 2.0;
    let mix = match mix {
        MixMode::Gamma => {
            27.0 * bound * eps_base * m_f * n_f * n_f + 2.0 * n_f * eta_base * m_f.sqrt()
        }
        MixMode::Eps => eps_base,
        MixMode::Value(v) => {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::ParamRange(format!(
                    "mix weight must be nonnegative, got {v}"
                )));
            }
            v
        }
    };

    let eps = overrides.eps.unwrap_or(eps_base);
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::ParamRange(format!("eps must be in (0, 1), got {eps}")));
    }
    let eta = overrides.eta.unwrap_or(eps * m_f.sqrt() * n_f / 2.0);
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::ParamRange(format!("eta must be positive, got {eta}")));
    }
    let alpha = match overrides.alpha {
        Some(a) => a,
        None => {
            delta
                / (2.0
                    * n_f.powi(3)
                    * ((2.0 * bound * m_f / eta).ln()
                        + binomial((m + n_bound + 1) as u64, m as u64)))
        }
    };
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::ParamRange(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let q = match overrides.q {
        Some(q) => {
            if q == 0 {
                return Err(Error::ParamRange("q must be at least 1".into()));
            }
            q
        }
        None => hoeffding_q(eps, alpha, m)?,
    };

    Ok(Params {
        rho,
        delta,
        bound,
        m,
        n_bound,
        eps,
        eta,
        alpha,
        q,
        mix,
        round_cap: DEFAULT_ROUND_CAP,
        overrides,
    })
}

/// Default hard cap on committed environment rounds.
pub const DEFAULT_ROUND_CAP: u64 = 1_000_000_000;

/// Result of a complete learning run.
#[derive(Debug)]
pub struct LearnOutcome {
    /// The extracted contract and its per-region diagnostics.
    pub result: FindContractResult,
    /// The covering the contract was extracted from.
    pub cover: Cover,
    /// Final cluster registry.
    pub registry: MetaActionRegistry,
    /// Covering passes aborted by merges before one completed.
    pub restarts: u64,
    /// Total environment rounds consumed.
    pub rounds: u64,
    /// Total oracle queries issued.
    pub oracle_calls: u64,
}

/// Runs the full learner: covering passes restart until one completes,
/// then the final contract is extracted from the cover.
pub fn discover_and_cover(
    sampler: &mut dyn OutcomeSampler,
    rewards: &[f64],
    params: &Params,
    mut cover_trace: Option<&mut Vec<CoverSnapshot>>,
) -> Result<LearnOutcome, Error> {
    if rewards.len() != params.m {
        return Err(Error::DimensionMismatch(format!(
            "{} rewards for {} outcomes",
            rewards.len(),
            params.m
        )));
    }
    for r in rewards {
        if !(0.0..=1.0).contains(r) || !r.is_finite() {
            return Err(Error::ParamRange(format!("rewards must lie in [0, 1], got {r}")));
        }
    }

    let mut registry = MetaActionRegistry::new();
    let mut restarts = 0u64;
    let cover = loop {
        let trace = cover_trace.as_mut().map(|v| &mut **v);
        match try_cover(&mut registry, sampler, params, trace)? {
            Some(cover) => break cover,
            None => restarts += 1,
        }
    };
    let result = find_contract(&cover, rewards, params)?;
    Ok(LearnOutcome {
        result,
        cover,
        rounds: sampler.rounds_used(),
        oracle_calls: registry.query_count(),
        registry,
        restarts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::ExactSampler;
    use crate::model::tests::e1;

    #[test]
    fn derived_parameters_match_hand_computed_values() {
        // (rho, delta, bound, m, n) -> (eps, eta, alpha, q)
        let cases = [
            (0.5, 0.1, 1.0, 1, 1, 0.000244140625, 0.0001220703125, 0.00393574951020044, 52267749),
            (
                0.25,
                0.05,
                2.0,
                3,
                2,
                8.477105034722222e-07,
                1.468277662123682e-06,
                8.700778302714282e-05,
                7751926932699,
            ),
            (
                0.9,
                0.5,
                1.0,
                2,
                3,
                2.1972656250000003e-05,
                4.661104270516794e-05,
                0.0003512621660478657,
                9673071722,
            ),
            (
                0.1,
                0.01,
                5.0,
                2,
                2,
                1.2207031250000003e-07,
                1.72633491500622e-07,
                2.1877757563711744e-05,
                406556719879406,
            ),
            (
                0.75,
                0.2,
                1.5,
                4,
                1,
                2.288818359375e-05,
                2.288818359375e-05,
                0.0035499014075669614,
                7368519376,
            ),
        ];
        for (rho, delta, bound, m, n, eps, eta, alpha, q) in cases {
            let p = compute_params(rho, delta, bound, m, n, MixMode::Gamma).unwrap();
            assert_eq!(p.eps, eps, "eps for rho={rho}");
            assert_eq!(p.eta, eta, "eta for rho={rho}");
            assert_eq!(p.alpha, alpha, "alpha for rho={rho}");
            assert_eq!(p.q, q, "q for rho={rho}");
        }
    }

    #[test]
    fn sample_count_matches_the_hoeffding_bound() {
        assert_eq!(hoeffding_q(0.1, 0.05, 3).unwrap(), 240);
        assert!(hoeffding_q(0.0, 0.05, 3).is_err());
        assert!(hoeffding_q(0.1, 1.0, 3).is_err());
        let err = hoeffding_q(1e-12, 0.05, 3).unwrap_err();
        assert!(matches!(err, Error::BudgetAstronomical(_)));
    }

    #[test]
    fn replaced_eps_cascades_into_eta_alpha_and_q() {
        let ov = Overrides { eps: Some(0.01), ..Default::default() };
        let p = compute_params_with_overrides(0.5, 0.1, 1.0, 4, 2, MixMode::Gamma, ov).unwrap();
        assert_eq!(p.eps, 0.01);
        assert_eq!(p.eta, 0.01 * 2.0 * 2.0 / 2.0);
        // eta feeds alpha, and (eps, alpha) feed q.
        assert_eq!(p.q, hoeffding_q(p.eps, p.alpha, 4).unwrap());

        let ov = Overrides { eps: Some(0.01), eta: Some(1e-4), q: Some(500), ..Default::default() };
        let p = compute_params_with_overrides(0.5, 0.1, 1.0, 4, 2, MixMode::Gamma, ov).unwrap();
        assert_eq!(p.eta, 1e-4);
        assert_eq!(p.q, 500);
    }

    #[test]
    fn astronomical_budgets_error_only_when_q_is_derived() {
        let err = compute_params(1e-5, 0.1, 1.0, 3, 2, MixMode::Gamma).unwrap_err();
        assert!(matches!(err, Error::BudgetAstronomical(_)));
        let ov = Overrides { q: Some(100), ..Default::default() };
        let p = compute_params_with_overrides(1e-5, 0.1, 1.0, 3, 2, MixMode::Gamma, ov).unwrap();
        assert_eq!(p.q, 100);
    }

    #[test]
    fn mixing_weight_ignores_replacements() {
        // The blend weight comes from the accuracy target, not from
        // experiment tolerances.
        let ov = Overrides { eps: Some(0.005), q: Some(100_000), ..Default::default() };
        let p =
            compute_params_with_overrides(0.15, 0.1, 1.0, 3, 2, MixMode::Gamma, ov).unwrap();
        assert_eq!(p.mix, 0.00020507812500000002);
        let p = compute_params_with_overrides(0.15, 0.1, 1.0, 3, 2, MixMode::Eps, ov).unwrap();
        assert_eq!(p.mix, 6.103515625e-07);
        let p =
            compute_params_with_overrides(0.15, 0.1, 1.0, 3, 2, MixMode::Value(0.04), ov).unwrap();
        assert_eq!(p.mix, 0.04);
    }

    #[test]
    fn parameter_ranges_are_enforced() {
        assert!(compute_params(0.0, 0.1, 1.0, 3, 2, MixMode::Gamma).is_err());
        assert!(compute_params(1.0, 0.1, 1.0, 3, 2, MixMode::Gamma).is_err());
        assert!(compute_params(0.5, 0.0, 1.0, 3, 2, MixMode::Gamma).is_err());
        assert!(compute_params(0.5, 0.1, 0.5, 3, 2, MixMode::Gamma).is_err());
        assert!(compute_params(0.5, 0.1, 1.0, 0, 2, MixMode::Gamma).is_err());
        assert!(compute_params(0.5, 0.1, 1.0, 3, 2, MixMode::Value(-0.1)).is_err());
    }

    #[test]
    fn full_run_learns_the_costly_action_contract() {
        let mut params = Params::explicit(3.0, 3, 2, 1e-6, 1e-6, 10);
        params.mix = 0.04;
        let mut sampler = ExactSampler::new(e1()).unwrap();
        let out = discover_and_cover(&mut sampler, &[0.0, 0.0, 1.0], &params, None).unwrap();

        assert_eq!(out.restarts, 2);
        assert_eq!(out.registry.len(), 2);
        assert!(out.rounds > 0);
        assert!(out.oracle_calls > 0);

        // Best region pays on the middle outcome; the blend then moves
        // weight 0.2 toward the rewards.
        let p = out.result.contract.payments();
        assert!((p[0] - 0.0).abs() < 0.01);
        assert!((p[1] - 2.0).abs() < 0.01);
        assert!((p[2] - 0.2).abs() < 1e-9);
        assert!((out.result.empirical_value - 0.65).abs() < 1e-3);
        assert_eq!(out.result.mix_applied, 0.2);
    }

    #[test]
    fn cover_trace_is_forwarded() {
        let params = Params::explicit(1.0, 3, 2, 1e-6, 1e-6, 10);
        let mut sampler = ExactSampler::new(e1()).unwrap();
        let mut trace = Vec::new();
        discover_and_cover(&mut sampler, &[0.0, 0.0, 1.0], &params, Some(&mut trace)).unwrap();
        assert!(!trace.is_empty());
    }

    #[test]
    fn reward_validation() {
        let params = Params::explicit(1.0, 3, 2, 1e-6, 1e-6, 10);
        let mut sampler = ExactSampler::new(e1()).unwrap();
        assert!(discover_and_cover(&mut sampler, &[0.0, 1.0], &params, None).is_err());
        assert!(discover_and_cover(&mut sampler, &[0.0, 2.0, 1.0], &params, None).is_err());
    }
}
