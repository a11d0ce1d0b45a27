//! Region covering: one pass of the discovery loop.
//!
//! Per reachable meta-action the pass maintains an inner bound (the hull of
//! contracts the oracle answered with that meta-action) and an outer bound
//! (the search simplex cut by estimated separating halfspaces). Vertices of
//! the outer bound are queried in lexicographic order: a same-side answer
//! grows the inner hull, a far-side answer triggers a bisection that cuts
//! the outer bound. A region is covered when the two bounds coincide. Any
//! oracle merge aborts the pass so the caller can restart with the enlarged
//! cluster registry.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::action_oracle::{query, MetaActionRegistry, MetaId};
use crate::driver::Params;
use crate::environment::OutcomeSampler;
use crate::error::Error;
use crate::find_hs::find_hs;
use crate::geometry::{hull_equals_polytope, Halfspace, PointHull, Polytope};
use crate::model::{Contract, ContractSpace};

/// Vertex coordinates this far below zero are solver noise, not geometry.
pub(crate) const CLAMP_TOL: f64 = 1e-7;

/// Builds a contract from a candidate point, zeroing coordinates just
/// below zero left by the vertex solver. Anything more negative is a real
/// failure.
pub fn contract_from_point(p: &[f64]) -> Result<Contract, Error> {
    let mut payments = p.to_vec();
    for x in payments.iter_mut() {
        if *x < 0.0 {
            if *x < -CLAMP_TOL {
                return Err(Error::Geometry(format!(
                    "candidate contract has negative payment {x}"
                )));
            }
            *x = 0.0;
        }
    }
    Contract::new(payments)
}

/// Working state of one covering pass.
#[derive(Debug)]
pub struct TryCoverState {
    /// Inner bound per meta-action: contracts it was answered at.
    pub lower: BTreeMap<MetaId, PointHull>,
    /// Outer bound per meta-action: the search space cut by halfspaces.
    pub upper: BTreeMap<MetaId, Polytope>,
    /// Meta-actions already separated from the key, plus the key itself.
    pub known: BTreeMap<MetaId, BTreeSet<MetaId>>,
    /// Estimated separating halfspaces keyed by (region, far side).
    pub halfspaces: BTreeMap<(MetaId, MetaId), Halfspace>,
    /// Estimated cost differences `c(d_i) - c(d_k)` for the same keys.
    pub delta_costs: BTreeMap<(MetaId, MetaId), f64>,
    /// Discovered regions whose bounds do not coincide yet.
    pub pending: BTreeSet<MetaId>,
}

impl TryCoverState {
    /// Fresh state over the given meta-actions: empty inner hulls, whole
    /// search simplex as every outer bound.
    pub fn new(ids: impl Iterator<Item = MetaId>, params: &Params) -> Result<Self, Error> {
        let space = ContractSpace::simplex(params.m, params.bound)?;
        let mut lower = BTreeMap::new();
        let mut upper = BTreeMap::new();
        let mut known = BTreeMap::new();
        for d in ids {
            lower.insert(d, PointHull::empty());
            upper.insert(d, Polytope::from_space(&space));
            known.insert(d, BTreeSet::from([d]));
        }
        Ok(Self {
            lower,
            upper,
            known,
            halfspaces: BTreeMap::new(),
            delta_costs: BTreeMap::new(),
            pending: BTreeSet::new(),
        })
    }

    /// Records that contract `p` was answered by `d`; the first sighting
    /// of a region stores the contract and queues the region for covering.
    pub fn seed_discovered(&mut self, d: MetaId, p: &[f64]) {
        let hull = self
            .lower
            .get_mut(&d)
            .expect("answered meta-action existed when the pass started");
        if hull.is_empty() {
            hull.add(p);
            self.pending.insert(d);
        }
    }

    /// Meta-actions known separated from `d`, including `d` itself.
    pub fn known_neighbors(&self, d: MetaId) -> &BTreeSet<MetaId> {
        &self.known[&d]
    }
}

/// A finished covering: per discovered meta-action the inner and outer
/// bounds coincide, and the halfspace estimates backing the cuts are kept
/// for auditing.
#[derive(Debug, Clone)]
pub struct Cover {
    /// Inner bounds; empty for meta-actions never answered this pass.
    pub regions: BTreeMap<MetaId, PointHull>,
    /// Matching outer bounds.
    pub uppers: BTreeMap<MetaId, Polytope>,
    /// Representative outcome distribution per meta-action.
    pub anchors: BTreeMap<MetaId, Vec<f64>>,
    /// Estimated separating halfspaces keyed by (region, far side).
    pub halfspaces: BTreeMap<(MetaId, MetaId), Halfspace>,
    /// Estimated cost differences for the same keys.
    pub delta_costs: BTreeMap<(MetaId, MetaId), f64>,
}

/// One observation of the pass, taken whenever a region starts processing.
#[derive(Debug, Clone, Serialize)]
pub struct CoverSnapshot {
    /// Region about to be processed.
    pub active: MetaId,
    /// Regions discovered but not finished, in id order.
    pub pending: Vec<MetaId>,
    /// Stored contract count per region.
    pub lower_sizes: BTreeMap<MetaId, usize>,
    /// Constraint rows per region's outer bound.
    pub upper_rows: BTreeMap<MetaId, usize>,
    /// Environment rounds consumed so far.
    pub rounds: u64,
}

fn snapshot_of(state: &TryCoverState, active: MetaId, rounds: u64) -> CoverSnapshot {
    CoverSnapshot {
        active,
        pending: state.pending.iter().copied().collect(),
        lower_sizes: state.lower.iter().map(|(d, h)| (*d, h.len())).collect(),
        upper_rows: state.upper.iter().map(|(d, p)| (*d, p.rows().len())).collect(),
        rounds,
    }
}

/// Runs one covering pass. Returns `None` when an oracle query merged
/// clusters, which invalidates the pass; the enlarged registry is kept and
/// the caller restarts. Returns a [`Cover`] once every discovered region's
/// bounds coincide.
pub fn try_cover(
    reg: &mut MetaActionRegistry,
    sampler: &mut dyn OutcomeSampler,
    params: &Params,
    mut snapshots: Option<&mut Vec<CoverSnapshot>>,
) -> Result<Option<Cover>, Error> {
    let ids: Vec<MetaId> = reg.ids().collect();
    let mut state = TryCoverState::new(ids.into_iter(), params)?;

    let origin = Contract::zero(params.m);
    let Some(first) = query(reg, sampler, &origin, params.q, params.eps, params.round_cap)?
    else {
        return Ok(None);
    };
    state.seed_discovered(first, origin.payments());

    while let Some(&d_i) = state.pending.iter().next() {
        if let Some(snap) = snapshots.as_deref_mut() {
            snap.push(snapshot_of(&state, d_i, sampler.rounds_used()));
        }
        // Shrink the outer bound and grow the inner hull until they agree.
        'cover: loop {
            let equal = {
                let hull = &state.lower[&d_i];
                let poly = state.upper.get_mut(&d_i).expect("region has an outer bound");
                hull_equals_polytope(hull, poly)?
            };
            if equal {
                break 'cover;
            }
            let verts = state
                .upper
                .get_mut(&d_i)
                .expect("region has an outer bound")
                .vertices()?
                .to_vec();
            if verts.is_empty() {
                return Err(Error::Geometry(format!(
                    "outer bound of meta-action {d_i} lost all vertices"
                )));
            }
            for v in &verts {
                let contract = contract_from_point(v)?;
                let Some(d_j) =
                    query(reg, sampler, &contract, params.q, params.eps, params.round_cap)?
                else {
                    return Ok(None);
                };
                let point = contract.payments().to_vec();
                state.seed_discovered(d_j, &point);
                if state.known_neighbors(d_i).contains(&d_j) {
                    state
                        .lower
                        .get_mut(&d_i)
                        .expect("region has an inner bound")
                        .add(&point);
                } else {
                    let Some(est) = find_hs(&mut state, reg, sampler, d_i, &point, params)?
                    else {
                        return Ok(None);
                    };
                    let outer = state.upper.get_mut(&d_i).expect("region has an outer bound");
                    *outer = outer.intersect(&est.halfspace);
                    state
                        .known
                        .get_mut(&d_i)
                        .expect("region has a neighbor set")
                        .insert(est.other_meta);
                    // The outer bound changed: the remaining vertices are
                    // stale, re-enumerate before consuming more.
                    continue 'cover;
                }
            }
        }
        state.pending.remove(&d_i);
    }

    let mut anchors = BTreeMap::new();
    for d in reg.ids() {
        anchors.insert(d, reg.anchor(d)?.to_vec());
    }
    Ok(Some(Cover {
        regions: state.lower,
        uppers: state.upper,
        anchors,
        halfspaces: state.halfspaces,
        delta_costs: state.delta_costs,
    }))
}

/// Reference region polytope from known distributions and costs: where `d`
/// beats every other meta-action by cost-adjusted expected payment.
pub fn region_reference(
    anchors: &BTreeMap<MetaId, Vec<f64>>,
    costs: &BTreeMap<MetaId, f64>,
    d: MetaId,
    space: &ContractSpace,
) -> Result<Polytope, Error> {
    let f_d = anchors
        .get(&d)
        .ok_or_else(|| Error::Geometry(format!("unknown meta-action {d}")))?;
    let c_d = costs
        .get(&d)
        .ok_or_else(|| Error::Geometry(format!("no cost for meta-action {d}")))?;
    let mut poly = Polytope::from_space(space);
    for (e, f_e) in anchors {
        if *e == d {
            continue;
        }
        let c_e = costs
            .get(e)
            .ok_or_else(|| Error::Geometry(format!("no cost for meta-action {e}")))?;
        let normal: Vec<f64> = f_d.iter().zip(f_e).map(|(a, b)| a - b).collect();
        poly = poly.intersect(&Halfspace::new(normal, c_d - c_e));
    }
    Ok(poly)
}
