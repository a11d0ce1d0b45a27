//! Instance generators: seeded random instances with separated actions,
//! and the two-action hardness family with a closed-form optimum.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::model::Instance;

/// Full-matrix redraw attempts before giving up on the separation target.
const REJECTION_ATTEMPTS: usize = 10_000;

/// Draws a random instance whose action distributions are pairwise at least
/// `min_sep` apart in l-infinity.
///
/// Rows are Dirichlet(1,...,1) (normalized exponentials); the whole matrix
/// is redrawn until the separation holds. Costs are uniform with one
/// uniformly chosen action forced free; rewards are uniform.
pub fn gen_random(n: usize, m: usize, seed: u64, min_sep: f64) -> Result<Instance, Error> {
    if n == 0 || m == 0 {
        return Err(Error::ParamRange("need at least one action and one outcome".into()));
    }
    if !(0.0..=2.0).contains(&min_sep) {
        return Err(Error::ParamRange(format!(
            "min_sep = {min_sep} must lie in [0, 2]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut distributions: Option<Vec<Vec<f64>>> = None;
    for _ in 0..REJECTION_ATTEMPTS {
        let candidate: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..m)
                    .map(|_| -(1.0 - rng.random::<f64>()).ln())
                    .collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / total).collect()
            })
            .collect();
        let separated = (0..n).all(|a| {
            (a + 1..n).all(|b| {
                crate::geometry::linf_distance(&candidate[a], &candidate[b]) >= min_sep
            })
        });
        if separated {
            distributions = Some(candidate);
            break;
        }
    }
    let distributions = distributions.ok_or_else(|| {
        Error::RejectionBudget(format!(
            "no {n}x{m} distribution matrix with pairwise separation {min_sep} \
             found in {REJECTION_ATTEMPTS} attempts"
        ))
    })?;
    let mut costs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let free_action = rng.random_range(0..n);
    costs[free_action] = 0.0;
    let rewards: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    Instance::new(distributions, costs, rewards)
}

/// The two-action, three-outcome hardness family.
///
/// Action 0 is free with distribution (1/2, 0, 1/2); action 1 costs 1/4
/// with distribution (0, eps_h, 1 - eps_h); rewards are (0, 0, 1). For any
/// bound B >= 1/(4 eps_h) the optimum is 3/4 - eps_h, attained by paying
/// 1/(4 eps_h) on the middle (zero-reward) outcome.
///
/// The regime where learning is provably expensive needs
/// `eps_h < 1/80`; pass `strict_range = false` to build wider test
/// fixtures (any eps_h in (0, 1)).
pub fn gen_hardness(eps_h: f64, strict_range: bool) -> Result<Instance, Error> {
    if strict_range {
        if !(eps_h > 0.0 && eps_h < 1.0 / 80.0) {
            return Err(Error::ParamRange(format!(
                "eps_h = {eps_h} must lie in (0, 1/80) for the hardness regime"
            )));
        }
    } else if !(eps_h > 0.0 && eps_h < 1.0) {
        return Err(Error::ParamRange(format!(
            "eps_h = {eps_h} must lie in (0, 1)"
        )));
    }
    Instance::new(
        vec![vec![0.5, 0.0, 0.5], vec![0.0, eps_h, 1.0 - eps_h]],
        vec![0.0, 0.25],
        vec![0.0, 0.0, 1.0],
    )
}
