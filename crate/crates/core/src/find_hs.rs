//! Separating-halfspace estimation by bisection between two regions.
//!
//! Given a region with at least one known member contract and an outside
//! point, bisect the segment between them until the bracket is shorter than
//! `eta`. The midpoint then sits near the true indifference boundary, which
//! pins the unknown cost difference between the two meta-actions; relaxing
//! the resulting separating halfspace by the slack `y` makes it a certified
//! outer bound for the region despite estimation noise.

use crate::action_oracle::{query, MetaActionRegistry, MetaId};
use crate::environment::OutcomeSampler;
use crate::error::Error;
use crate::geometry::{l2_distance, midpoint, Halfspace};
use crate::try_cover::{contract_from_point, TryCoverState};
use crate::driver::Params;

/// Slack absorbing anchor noise and bisection error:
/// `18 B eps m n^2 + 2 n eta sqrt(m)`.
pub fn y_slack(bound: f64, eps: f64, m: usize, n: usize, eta: f64) -> f64 {
    let m_f = m as f64;
    let n_f = n as f64;
    18.0 * bound * eps * m_f * n_f * n_f + 2.0 * n_f * eta * m_f.sqrt()
}

/// A freshly estimated separating halfspace.
#[derive(Debug, Clone)]
pub struct HalfspaceEstimate {
    /// Contains the queried region (already relaxed by the slack).
    pub halfspace: Halfspace,
    /// The meta-action on the far side of the boundary.
    pub other_meta: MetaId,
    /// Estimated cost difference `c(d_i) - c(other_meta)`.
    pub delta_cost: f64,
    /// Final bisection midpoint (near the indifference boundary).
    pub midpoint: Vec<f64>,
}

/// Bisects between region `d_i`'s first stored contract and the outside
/// point `p`; returns `None` when any oracle query merged clusters (the
/// covering pass must restart).
///
/// Newly reached regions discovered by interior midpoints are seeded into
/// the covering state; the two endpoint queries are charged but seed
/// nothing (they only re-establish which side each endpoint is on).
pub fn find_hs(
    state: &mut TryCoverState,
    reg: &mut MetaActionRegistry,
    sampler: &mut dyn OutcomeSampler,
    d_i: MetaId,
    p: &[f64],
    params: &Params,
) -> Result<Option<HalfspaceEstimate>, Error> {
    let mut p1 = state
        .lower
        .get(&d_i)
        .and_then(|hull| hull.first())
        .ok_or_else(|| {
            Error::Geometry(format!("meta-action {d_i} has no stored contract to bisect from"))
        })?
        .clone();
    let mut p2 = p.to_vec();

    let Some(mut d_j) = query(
        reg,
        sampler,
        &contract_from_point(&p1)?,
        params.q,
        params.eps,
        params.round_cap,
    )?
    else {
        return Ok(None);
    };
    let Some(mut d_k) = query(
        reg,
        sampler,
        &contract_from_point(&p2)?,
        params.q,
        params.eps,
        params.round_cap,
    )?
    else {
        return Ok(None);
    };

    while l2_distance(&p1, &p2) > params.eta {
        let mid = midpoint(&p1, &p2);
        let Some(d) = query(
            reg,
            sampler,
            &contract_from_point(&mid)?,
            params.q,
            params.eps,
            params.round_cap,
        )?
        else {
            return Ok(None);
        };
        state.seed_discovered(d, &mid);
        if state.known_neighbors(d_i).contains(&d) {
            p1 = mid;
            d_j = d;
        } else {
            p2 = mid;
            d_k = d;
        }
    }

    let near_boundary = midpoint(&p1, &p2);
    let f_j = reg.anchor(d_j)?.to_vec();
    let f_k = reg.anchor(d_k)?.to_vec();
    let step: f64 = f_j
        .iter()
        .zip(f_k.iter())
        .zip(near_boundary.iter())
        .map(|((&a, &b), &x)| (a - b) * x)
        .sum();
    // The midpoint pins c(d_j) - c(d_k); chain through the stored estimate
    // for (d_i, d_j) when the bracket's inner side drifted off d_i itself.
    let delta_cost = if d_j == d_i {
        step
    } else {
        let prior = state.delta_costs.get(&(d_i, d_j)).copied().ok_or_else(|| {
            Error::Geometry(format!(
                "no stored cost estimate for meta-action pair ({d_i}, {d_j})"
            ))
        })?;
        prior + step
    };

    let f_i = reg.anchor(d_i)?;
    let normal: Vec<f64> = f_i.iter().zip(f_k.iter()).map(|(&a, &b)| a - b).collect();
    let y = y_slack(params.bound, params.eps, params.m, params.n_bound, params.eta);
    let halfspace = Halfspace::new(normal, delta_cost - y);
    if halfspace.is_degenerate() {
        return Err(Error::Geometry(format!(
            "degenerate separating normal between meta-actions {d_i} and {d_k}"
        )));
    }
    state.delta_costs.insert((d_i, d_k), delta_cost);
    state.halfspaces.insert((d_i, d_k), halfspace.clone());
    Ok(Some(HalfspaceEstimate {
        halfspace,
        other_meta: d_k,
        delta_cost,
        midpoint: near_boundary,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::ExactSampler;
    use crate::model::tests::e1;
    use crate::model::Contract;

    fn desk_params(eps: f64, eta: f64) -> Params {
        Params::explicit(1.0, 3, 2, eps, eta, 100)
    }

    /// Registry with E1's two meta-actions established via exact queries.
    fn e1_registry(sampler: &mut ExactSampler, params: &Params) -> (MetaActionRegistry, MetaId, MetaId) {
        let mut reg = MetaActionRegistry::new();
        let origin = Contract::zero(3);
        let far = Contract::new(vec![0.0, 3.0, 0.0]).unwrap();
        assert_eq!(
            query(&mut reg, sampler, &origin, params.q, params.eps, params.round_cap).unwrap(),
            None
        );
        let d0 = reg.ids().next().unwrap();
        assert_eq!(
            query(&mut reg, sampler, &far, params.q, params.eps, params.round_cap).unwrap(),
            None
        );
        let d1 = reg.ids().max().unwrap();
        assert_ne!(d0, d1);
        (reg, d0, d1)
    }

    #[test]
    fn bisection_localizes_the_indifference_boundary() {
        let params = desk_params(1e-6, 1e-6);
        let mut sampler = ExactSampler::new(e1()).unwrap();
        let (mut reg, d0, d1) = e1_registry(&mut sampler, &params);
        let mut state = TryCoverState::new(reg.ids(), &params).unwrap();
        state.seed_discovered(d0, &[0.0, 0.0, 0.0]);

        let calls_before = reg.query_count();
        let est = find_hs(
            &mut state,
            &mut reg,
            &mut sampler,
            d0,
            &[0.0, 3.0, 0.0],
            &params,
        )
        .unwrap()
        .expect("no merges under exact sampling");

        // The endpoints plus one call per halving of the bracket length 3.
        let calls = reg.query_count() - calls_before;
        let bound = 2 + ((3.0_f64 * 2.0_f64.sqrt() / params.eta).log2()).ceil() as u64;
        assert!(calls <= bound, "{calls} oracle calls exceed the bound {bound}");

        // The midpoint pins the true indifference payment 2.5 on w1, so
        // the estimated cost difference is c(a1) - c(a2) = -0.25.
        assert_eq!(est.other_meta, d1);
        assert!((est.midpoint[1] - 2.5).abs() < 1e-3);
        assert!((est.delta_cost + 0.25).abs() < 1e-4);

        // Separating halfspace keeps region points, drops the far side.
        assert!(est.halfspace.contains(&[0.0, 0.0, 0.0], 0.0));
        assert!(!est.halfspace.contains(&[0.0, 3.0, 0.0], 0.0));
        assert_eq!(state.delta_costs.get(&(d0, d1)), Some(&est.delta_cost));
        assert!(state.halfspaces.contains_key(&(d0, d1)));

        // Interior midpoints seeded the far region for later processing.
        assert!(!state.lower.get(&d1).unwrap().is_empty());
        assert!(state.pending.contains(&d1));
    }

    #[test]
    fn slack_formula_matches_hand_values() {
        assert!((y_slack(1.0, 0.01, 3, 2, 0.001) - 2.1669282032302757).abs() < 1e-12);
        assert_eq!(y_slack(1.0, 1.0, 1, 1, 0.0), 18.0);
    }

    #[test]
    fn missing_chained_cost_estimate_is_an_internal_error() {
        use crate::action_oracle::tests::ScriptedSampler;
        // Two clusters far apart; every find_hs query answers with the
        // second cluster, so the bracket's inner side is never d0 and the
        // (d0, d1) chain lookup fails.
        let fa = vec![0.3, 0.7];
        let fb = vec![0.8, 0.2];
        let params = Params::explicit(1.0, 2, 2, 0.1, 1e-3, 10);
        let mut s = ScriptedSampler::new(vec![fa.clone(), fb.clone(), fb.clone(), fb]);
        let mut reg = MetaActionRegistry::new();
        let p0 = Contract::zero(2);
        assert_eq!(query(&mut reg, &mut s, &p0, 10, 0.1, u64::MAX).unwrap(), None);
        let d0 = reg.ids().next().unwrap();
        assert_eq!(query(&mut reg, &mut s, &p0, 10, 0.1, u64::MAX).unwrap(), None);
        let mut state = TryCoverState::new(reg.ids(), &params).unwrap();
        state.seed_discovered(d0, &[0.0, 0.0]);
        let err = find_hs(&mut state, &mut reg, &mut s, d0, &[0.0, 0.0], &params).unwrap_err();
        assert!(matches!(err, Error::Geometry(_)), "got {err:?}");
    }

    #[test]
    fn merge_during_bisection_aborts_cleanly() {
        use crate::action_oracle::tests::ScriptedSampler;
        // Clusters at 0.3 and 0.6 (eps = 0.1): the midpoint probe at 0.45
        // matches both and merges them.
        let params = Params::explicit(1.0, 2, 2, 0.1, 1e-3, 10);
        let mut s = ScriptedSampler::new(vec![
            vec![0.3, 0.7],
            vec![0.6, 0.4],
            vec![0.3, 0.7],
            vec![0.6, 0.4],
            vec![0.45, 0.55],
        ]);
        let mut reg = MetaActionRegistry::new();
        let p0 = Contract::zero(2);
        query(&mut reg, &mut s, &p0, 10, 0.1, u64::MAX).unwrap();
        let d0 = reg.ids().next().unwrap();
        query(&mut reg, &mut s, &p0, 10, 0.1, u64::MAX).unwrap();
        let mut state = TryCoverState::new(reg.ids(), &params).unwrap();
        state.seed_discovered(d0, &[0.0, 0.0]);
        let got = find_hs(&mut state, &mut reg, &mut s, d0, &[1.0, 0.0], &params).unwrap();
        assert!(got.is_none(), "a merge mid-bisection must abort the pass");
        assert_eq!(reg.len(), 1, "the two clusters merged");
    }
}
