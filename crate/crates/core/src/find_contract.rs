//! Final contract extraction from a finished cover.
//!
//! Each covered region contributes one candidate: the contract maximizing
//! the region's estimated principal value (anchor-weighted rewards minus
//! payments) over the region's outer bound intersected with the output
//! box. The best candidate is then mixed toward the reward vector, which
//! turns the candidate's approximate incentives into strict ones at a
//! small value cost.

use std::collections::BTreeMap;

use crate::action_oracle::MetaId;
use crate::driver::Params;
use crate::error::Error;
use crate::lp::{solve_lp, LinearProgram, LpOutcome};
use crate::model::Contract;
use crate::try_cover::Cover;

/// The extracted contract plus per-region diagnostics.
#[derive(Debug, Clone)]
pub struct FindContractResult {
    /// Final contract after mixing.
    pub contract: Contract,
    /// Winning region's optimizer before mixing.
    pub base: Contract,
    /// Winning region.
    pub meta: MetaId,
    /// Estimated principal value of the winning region's optimizer.
    pub empirical_value: f64,
    /// Mixing weight actually applied, `sqrt(mix)` clamped to [0, 1].
    pub mix_applied: f64,
    /// Estimated value per region; `None` for regions never reached or
    /// with an infeasible bound.
    pub region_values: BTreeMap<MetaId, Option<f64>>,
}

/// Optimizes every covered region and mixes the winner toward rewards.
pub fn find_contract(
    cover: &Cover,
    rewards: &[f64],
    params: &Params,
) -> Result<FindContractResult, Error> {
    let m = params.m;
    if rewards.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "{} rewards for {} outcomes",
            rewards.len(),
            m
        )));
    }

    let mut region_values: BTreeMap<MetaId, Option<f64>> = BTreeMap::new();
    let mut best: Option<(MetaId, f64, Vec<f64>)> = None;
    for (d, hull) in &cover.regions {
        if hull.is_empty() {
            region_values.insert(*d, None);
            continue;
        }
        let anchor = cover.anchors.get(d).ok_or_else(|| {
            Error::Geometry(format!("covered meta-action {d} has no anchor"))
        })?;
        let upper = cover
            .uppers
            .get(d)
            .ok_or_else(|| Error::Geometry(format!("covered meta-action {d} has no bound")))?;

        // Maximize anchor . (r - p) = anchor . r - anchor . p over the
        // region's outer bound clipped to the output box.
        let mut constraints = upper.rows().to_vec();
        for w in 0..m {
            let mut row = vec![0.0; m];
            row[w] = 1.0;
            constraints.push((row, params.bound));
        }
        let objective: Vec<f64> = anchor.iter().map(|a| -a).collect();
        let fixed: f64 = anchor.iter().zip(rewards).map(|(a, r)| a * r).sum();
        match solve_lp(&LinearProgram { objective, constraints })? {
            LpOutcome::Optimal { value, point } => {
                let empirical = fixed + value;
                region_values.insert(*d, Some(empirical));
                let better = match &best {
                    Some((_, v, _)) => empirical > *v,
                    None => true,
                };
                if better {
                    best = Some((*d, empirical, point));
                }
            }
            LpOutcome::Infeasible => {
                region_values.insert(*d, None);
            }
            LpOutcome::Unbounded => {
                return Err(Error::Lp(format!(
                    "region {d} optimization unbounded despite box rows"
                )));
            }
        }
    }

    let (meta, empirical_value, point) = best.ok_or_else(|| {
        Error::Geometry("no covered region admits a feasible contract".into())
    })?;
    let base = Contract::new(point)?;
    let mix_applied = params.mix.sqrt().clamp(0.0, 1.0);
    let blended: Vec<f64> = base
        .payments()
        .iter()
        .zip(rewards)
        .map(|(p, r)| (1.0 - mix_applied) * p + mix_applied * r)
        .collect();
    let contract = Contract::new(blended)?;
    Ok(FindContractResult {
        contract,
        base,
        meta,
        empirical_value,
        mix_applied,
        region_values,
    })
}

/// White-box audit: how far the returned contract falls short of the best
/// bounded contract, computed with full knowledge of the instance.
pub fn suboptimality_audit(
    instance: &crate::model::Instance,
    returned: &Contract,
    bound: f64,
) -> Result<f64, Error> {
    let opt = crate::oracle_ref::solve_opt(instance, bound)?.value;
    Ok(opt - crate::model::principal_utility(instance, returned))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::Params;
    use crate::geometry::{PointHull, Polytope};
    use crate::model::tests::e1;
    use crate::model::ContractSpace;
    use crate::try_cover::tests::exact_cover;

    const E1_REWARDS: [f64; 3] = [0.0, 0.0, 1.0];

    #[test]
    fn tight_box_prefers_the_free_action() {
        // With per-outcome payments capped at 1 the costly action cannot
        // be induced profitably: its best value is 0.4625 against 0.5 for
        // paying nothing.
        let params = Params::explicit(1.0, 3, 2, 1e-6, 1e-6, 10);
        let (cover, _, _) = exact_cover(e1(), &params);
        let out = find_contract(&cover, &E1_REWARDS, &params).unwrap();

        assert_eq!(out.contract.payments(), &[0.0, 0.0, 0.0]);
        assert_eq!(out.base.payments(), out.contract.payments());
        assert!((out.empirical_value - 0.5).abs() < 1e-6);
        assert_eq!(out.mix_applied, 0.0);

        // The costly region's bound is relaxed by the slack y, which
        // inflates its value by about 2.25 * y over the true 0.4625.
        let mut values: Vec<f64> = out.region_values.values().map(|v| v.unwrap()).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((values[0] - 0.4625).abs() < 2e-3);
        assert!((values[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn wide_box_pays_for_the_costly_action_and_mixes() {
        let mut params = Params::explicit(3.0, 3, 2, 1e-6, 1e-6, 10);
        params.mix = 0.04;
        let (cover, _, _) = exact_cover(e1(), &params);
        let out = find_contract(&cover, &E1_REWARDS, &params).unwrap();

        // Winner pays ~2.5 on the middle outcome (the relaxed cut moves
        // it inward by ~10 y), then moves weight sqrt(0.04) = 0.2 toward
        // the rewards.
        assert!((out.base.payments()[1] - 2.5).abs() < 0.01);
        assert!((out.empirical_value - 0.65).abs() < 1e-3);
        assert_eq!(out.mix_applied, 0.2);
        let p = out.contract.payments();
        assert!((p[0] - 0.0).abs() < 0.01);
        assert!((p[1] - 2.0).abs() < 0.01);
        assert!((p[2] - 0.2).abs() < 1e-9);

        let winner = out.region_values[&out.meta].unwrap();
        assert_eq!(winner, out.empirical_value);
    }

    #[test]
    fn full_mix_returns_the_reward_vector() {
        let mut params = Params::explicit(1.0, 3, 2, 1e-6, 1e-6, 10);
        params.mix = 4.0; // sqrt clamps to 1
        let (cover, _, _) = exact_cover(e1(), &params);
        let out = find_contract(&cover, &E1_REWARDS, &params).unwrap();
        assert_eq!(out.mix_applied, 1.0);
        assert_eq!(out.contract.payments(), &E1_REWARDS);
    }

    #[test]
    fn unreached_regions_are_skipped_and_all_skipped_errors() {
        let params = Params::explicit(1.0, 2, 1, 1e-6, 1e-6, 10);
        let space = ContractSpace::simplex(2, 1.0).unwrap();
        let cover = Cover {
            regions: [(7, PointHull::empty())].into(),
            uppers: [(7, Polytope::from_space(&space))].into(),
            anchors: [(7, vec![0.5, 0.5])].into(),
            halfspaces: BTreeMap::new(),
            delta_costs: BTreeMap::new(),
        };
        let err = find_contract(&cover, &[0.0, 1.0], &params).unwrap_err();
        assert!(matches!(err, Error::Geometry(_)));
    }

    #[test]
    fn reward_dimension_is_checked() {
        let params = Params::explicit(1.0, 3, 2, 1e-6, 1e-6, 10);
        let (cover, _, _) = exact_cover(e1(), &params);
        assert!(find_contract(&cover, &[0.0, 1.0], &params).is_err());
    }

    #[test]
    fn audit_measures_distance_to_the_best_bounded_contract() {
        // The origin is optimal over [0,1]^3, so its audit is zero; paying
        // everything on the last outcome forfeits the full 0.5.
        let zero = Contract::zero(3);
        assert!(suboptimality_audit(&e1(), &zero, 1.0).unwrap().abs() < 1e-9);
        let bad = Contract::new(vec![0.0, 0.0, 1.0]).unwrap();
        assert!((suboptimality_audit(&e1(), &bad, 1.0).unwrap() - 0.5).abs() < 1e-9);
    }
}
