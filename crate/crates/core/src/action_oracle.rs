//! Meta-action bookkeeping over noisy outcome estimates.
//!
//! The learner cannot tell two actions apart whose outcome distributions
//! differ by less than the estimation noise, so it reasons about
//! *meta-actions*: clusters of empirical distributions that have matched
//! each other within tolerance. A query either lands in exactly one known
//! cluster (the cluster absorbs the new estimate) or the cluster structure
//! was wrong, in which case the involved clusters merge into a fresh one
//! and the caller must restart its covering pass.

use std::collections::{BTreeMap, BTreeSet};

use crate::environment::{Environment, OutcomeSampler, TraceEntry};
use crate::error::Error;
use crate::geometry::linf_distance;
use crate::model::Contract;

/// Identifier of a meta-action. Fresh ids are never reused, so merged
/// (retired) ids stay distinguishable from live ones in traces.
pub type MetaId = u64;

/// One cluster: every empirical distribution associated so far, plus the
/// index of its fixed representative (anchor).
#[derive(Debug, Clone)]
pub struct MetaEntry {
    dists: Vec<Vec<f64>>,
    anchor: usize,
}

impl MetaEntry {
    pub fn dists(&self) -> &[Vec<f64>] {
        &self.dists
    }

    /// The representative empirical distribution, fixed at creation.
    pub fn anchor(&self) -> &[f64] {
        &self.dists[self.anchor]
    }
}

/// All live meta-actions, keyed by id in creation order.
#[derive(Debug, Clone, Default)]
pub struct MetaActionRegistry {
    next_id: MetaId,
    entries: BTreeMap<MetaId, MetaEntry>,
    bot_count: u64,
    query_count: u64,
}

impl MetaActionRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ids(&self) -> impl Iterator<Item = MetaId> + '_ {
        self.entries.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, d: MetaId) -> Result<&MetaEntry, Error> {
        self.entries
            .get(&d)
            .ok_or_else(|| Error::IndexOutOfRange(format!("no live meta-action {d}")))
    }

    /// The representative empirical distribution of `d`.
    pub fn anchor(&self, d: MetaId) -> Result<&[f64], Error> {
        Ok(self.entry(d)?.anchor())
    }

    /// How many queries ended in a merge (the restart signal).
    pub fn bot_count(&self) -> u64 {
        self.bot_count
    }

    /// Total queries answered, merges included.
    pub fn query_count(&self) -> u64 {
        self.query_count
    }
}

/// One oracle query: estimate outcome frequencies at `p` over `q` rounds
/// and resolve them against the registry.
///
/// Returns the unique matching meta-action, or `None` after a merge (zero
/// or several clusters matched within `2 * eps`); merged clusters are
/// replaced by one fresh cluster anchored at the new estimate.
///
/// Errors with [`Error::BudgetExceeded`] when `round_cap` rounds were
/// already consumed before this query; a block that crosses the cap is
/// allowed to finish so estimates are never truncated.
pub fn query(
    reg: &mut MetaActionRegistry,
    sampler: &mut dyn OutcomeSampler,
    p: &Contract,
    q: u64,
    eps: f64,
    round_cap: u64,
) -> Result<Option<MetaId>, Error> {
    if sampler.rounds_used() >= round_cap {
        return Err(Error::BudgetExceeded { rounds: sampler.rounds_used(), cap: round_cap });
    }
    let freqs = sampler.estimate(p, q)?;
    reg.query_count += 1;
    let matches: Vec<MetaId> = reg
        .entries
        .iter()
        .filter(|(_, entry)| {
            entry
                .dists
                .iter()
                .any(|f| linf_distance(f, &freqs) <= 2.0 * eps)
        })
        .map(|(&d, _)| d)
        .collect();
    if matches.len() == 1 {
        let d = matches[0];
        reg.entries
            .get_mut(&d)
            .expect("matched id is live")
            .dists
            .push(freqs);
        return Ok(Some(d));
    }
    // Merge every matched cluster (possibly none) into a fresh one.
    let mut dists = Vec::new();
    for d in &matches {
        dists.extend(reg.entries.remove(d).expect("matched id is live").dists);
    }
    let anchor = dists.len();
    dists.push(freqs);
    let fresh = reg.next_id;
    reg.next_id += 1;
    reg.entries.insert(fresh, MetaEntry { dists, anchor });
    reg.bot_count += 1;
    Ok(None)
}

/// White-box: the true actions whose estimates fed meta-action `d`.
///
/// Reconstructed by matching the registry's stored estimates against the
/// environment trace bitwise; both sides store the identical vector, so
/// exact equality is the right join key.
pub fn associated_actions(
    reg: &MetaActionRegistry,
    d: MetaId,
    env: &Environment,
) -> Result<BTreeSet<usize>, Error> {
    let trace = env.trace().ok_or(Error::TraceDisabled)?;
    Ok(associated_actions_in_trace(reg.entry(d)?, trace))
}

fn associated_actions_in_trace(entry: &MetaEntry, trace: &[TraceEntry]) -> BTreeSet<usize> {
    let mut actions = BTreeSet::new();
    for t in trace {
        if entry.dists.iter().any(|f| f == &t.freqs) {
            actions.insert(t.action);
        }
    }
    actions
}

/// White-box: the meta-action's implicit cost, defined as the cheapest true
/// cost among its associated actions.
pub fn meta_cost_estimate(
    reg: &MetaActionRegistry,
    d: MetaId,
    env: &Environment,
) -> Result<f64, Error> {
    let actions = associated_actions(reg, d, env)?;
    actions
        .iter()
        .map(|&a| env.instance().costs[a])
        .min_by(|a, b| a.partial_cmp(b).expect("costs are finite"))
        .ok_or_else(|| {
            Error::Geometry(format!(
                "meta-action {d} has no estimates matching the trace"
            ))
        })
}
