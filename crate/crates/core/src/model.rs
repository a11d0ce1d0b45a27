//! Ground-truth problem data and the agent's exact best-response rule.
//!
//! An instance is a finite hidden-action problem: `n` actions, `m` outcomes,
//! one outcome distribution and one cost per action, one reward per outcome.
//! A contract pays the agent per observed outcome. All learning code treats
//! the distributions and costs as unknown; only this module and the
//! environment touch them directly.

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Absolute tolerance under which two agent utilities count as tied.
///
/// Ties are broken in the principal's favour, then by lowest action index,
/// so best responses are deterministic even on knife-edge contracts.
pub const TIE_TOL: f64 = 1e-9;

/// Tolerance for distribution row sums and entry range checks.
pub const DIST_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Instance
// ---------------------------------------------------------------------------

/// A hidden-action principal-agent problem.
///
/// Row `a` of `distributions` is the outcome distribution of action `a`;
/// `costs[a]` is the agent's cost for it (at least one action is free);
/// `rewards[w]` is the principal's reward when outcome `w` occurs.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub distributions: Vec<Vec<f64>>,
    pub costs: Vec<f64>,
    pub rewards: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct InstanceJson {
    n: usize,
    m: usize,
    #[serde(rename = "F")]
    f: Vec<Vec<f64>>,
    c: Vec<f64>,
    r: Vec<f64>,
}

impl Instance {
    /// Builds a validated instance; returns every violation if there are any.
    pub fn new(
        distributions: Vec<Vec<f64>>,
        costs: Vec<f64>,
        rewards: Vec<f64>,
    ) -> Result<Self, Error> {
        let inst = Self { distributions, costs, rewards };
        let violations = validate_instance(&inst);
        if violations.is_empty() {
            Ok(inst)
        } else {
            Err(Error::InvalidInstance(violations))
        }
    }

    /// Builds without validation. For constructing deliberately broken
    /// instances in tests; everything else goes through [`Instance::new`].
    pub fn new_unchecked(
        distributions: Vec<Vec<f64>>,
        costs: Vec<f64>,
        rewards: Vec<f64>,
    ) -> Self {
        Self { distributions, costs, rewards }
    }

    pub fn n_actions(&self) -> usize {
        self.costs.len()
    }

    pub fn n_outcomes(&self) -> usize {
        self.rewards.len()
    }

    /// Parses the on-disk schema `{"n", "m", "F", "c", "r"}`, rejecting
    /// shape mismatches and validation failures.
    pub fn from_json_str(s: &str) -> Result<Self, Error> {
        let raw: InstanceJson = serde_json::from_str(s)?;
        if raw.f.len() != raw.n {
            return Err(Error::DimensionMismatch(format!(
                "F has {} rows but n = {}",
                raw.f.len(),
                raw.n
            )));
        }
        if raw.c.len() != raw.n {
            return Err(Error::DimensionMismatch(format!(
                "c has {} entries but n = {}",
                raw.c.len(),
                raw.n
            )));
        }
        if raw.r.len() != raw.m {
            return Err(Error::DimensionMismatch(format!(
                "r has {} entries but m = {}",
                raw.r.len(),
                raw.m
            )));
        }
        if let Some(row) = raw.f.iter().find(|row| row.len() != raw.m) {
            return Err(Error::DimensionMismatch(format!(
                "F row has {} entries but m = {}",
                row.len(),
                raw.m
            )));
        }
        Instance::new(raw.f, raw.c, raw.r)
    }

    /// Serializes to the on-disk schema `{"n", "m", "F", "c", "r"}`.
    pub fn to_json_string(&self) -> Result<String, Error> {
        let raw = InstanceJson {
            n: self.n_actions(),
            m: self.n_outcomes(),
            f: self.distributions.clone(),
            c: self.costs.clone(),
            r: self.rewards.clone(),
        };
        Ok(serde_json::to_string_pretty(&raw)?)
    }
}

/// Returns every validation violation, empty when the instance is well formed.
pub fn validate_instance(inst: &Instance) -> Vec<String> {
    let mut violations = Vec::new();
    let n = inst.distributions.len();
    let m = inst.rewards.len();
    if n == 0 {
        violations.push("instance has no actions".to_string());
    }
    if m == 0 {
        violations.push("instance has no outcomes".to_string());
    }
    if inst.costs.len() != n {
        violations.push(format!(
            "costs has {} entries but there are {} distribution rows",
            inst.costs.len(),
            n
        ));
    }
    for (a, row) in inst.distributions.iter().enumerate() {
        if row.len() != m {
            violations.push(format!(
                "distribution row {} has {} entries, expected {}",
                a,
                row.len(),
                m
            ));
            continue;
        }
        let mut sum = 0.0;
        for (w, &f) in row.iter().enumerate() {
            if !f.is_finite() || f < -DIST_TOL || f > 1.0 + DIST_TOL {
                violations.push(format!(
                    "distribution entry F[{a}][{w}] = {f} is outside [0, 1]"
                ));
            }
            sum += f;
        }
        if (sum - 1.0).abs() > DIST_TOL {
            violations.push(format!(
                "distribution row {a} sums to {sum}, expected 1 within {DIST_TOL}"
            ));
        }
    }
    for (a, &c) in inst.costs.iter().enumerate() {
        if !c.is_finite() || !(0.0..=1.0).contains(&c) {
            violations.push(format!("cost c[{a}] = {c} is outside [0, 1]"));
        }
    }
    if !inst.costs.is_empty() && !inst.costs.iter().any(|&c| c == 0.0) {
        violations.push("no action has cost exactly 0".to_string());
    }
    for (w, &r) in inst.rewards.iter().enumerate() {
        if !r.is_finite() || !(0.0..=1.0).contains(&r) {
            violations.push(format!("reward r[{w}] = {r} is outside [0, 1]"));
        }
    }
    violations
}

// ---------------------------------------------------------------------------
// Contract
// ---------------------------------------------------------------------------

/// A payment scheme: one non-negative, finite payment per outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Contract {
    payments: Vec<f64>,
}

impl Contract {
    /// Rejects negative or non-finite payments.
    pub fn new(payments: Vec<f64>) -> Result<Self, Error> {
        if let Some((w, &p)) = payments
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::ParamRange(format!(
                "payment p[{w}] = {p} must be finite and non-negative"
            )));
        }
        Ok(Self { payments })
    }

    /// The all-zero contract over `m` outcomes.
    pub fn zero(m: usize) -> Self {
        Self { payments: vec![0.0; m] }
    }

    pub fn payments(&self) -> &[f64] {
        &self.payments
    }

    pub fn dim(&self) -> usize {
        self.payments.len()
    }
}

// ---------------------------------------------------------------------------
// Contract space
// ---------------------------------------------------------------------------

/// Which bounded region of payment space a polytope models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    /// The learner's search region `{p >= 0 : sum(p) <= m * bound}`.
    Simplex,
    /// The output region `[0, bound]^m`.
    Box,
}

/// A bounded region of payment space, described by its facets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractSpace {
    pub bound: f64,
    pub dimension: usize,
    pub kind: SpaceKind,
}

impl ContractSpace {
    /// The scaled simplex `{p >= 0 : sum(p) <= m * bound}` the learner
    /// searches; its l1 cap dominates the box `[0, bound]^m`.
    pub fn simplex(dimension: usize, bound: f64) -> Result<Self, Error> {
        Self::build(dimension, bound, SpaceKind::Simplex)
    }

    /// The axis-aligned box `[0, bound]^m` that returned contracts live in.
    pub fn bounded_box(dimension: usize, bound: f64) -> Result<Self, Error> {
        Self::build(dimension, bound, SpaceKind::Box)
    }

    fn build(dimension: usize, bound: f64, kind: SpaceKind) -> Result<Self, Error> {
        if dimension == 0 {
            return Err(Error::ParamRange("dimension must be at least 1".into()));
        }
        if !bound.is_finite() || bound < 1.0 {
            return Err(Error::ParamRange(format!(
                "bound B = {bound} must be finite and at least 1"
            )));
        }
        Ok(Self { bound, dimension, kind })
    }

    /// Total payment cap of the simplex form, `m * bound`.
    pub fn l1_cap(&self) -> f64 {
        self.dimension as f64 * self.bound
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        if p.len() != self.dimension {
            return false;
        }
        if p.iter().any(|&x| !x.is_finite() || x < -tol) {
            return false;
        }
        match self.kind {
            SpaceKind::Simplex => p.iter().sum::<f64>() <= self.l1_cap() + tol,
            SpaceKind::Box => p.iter().all(|&x| x <= self.bound + tol),
        }
    }
}

// ---------------------------------------------------------------------------
// Utilities of the two players
// ---------------------------------------------------------------------------

/// Expected payment minus cost for one action under contract `p`.
pub fn agent_utility(inst: &Instance, action: usize, p: &Contract) -> Result<f64, Error> {
    if action >= inst.n_actions() {
        return Err(Error::IndexOutOfRange(format!(
            "action {action} out of range for {} actions",
            inst.n_actions()
        )));
    }
    if p.dim() != inst.n_outcomes() {
        return Err(Error::DimensionMismatch(format!(
            "contract has {} payments but instance has {} outcomes",
            p.dim(),
            inst.n_outcomes()
        )));
    }
    Ok(agent_value(inst, action, p.payments()))
}

/// Slice-level agent utility; callers guarantee dimensions.
pub(crate) fn agent_value(inst: &Instance, action: usize, p: &[f64]) -> f64 {
    dot(&inst.distributions[action], p) - inst.costs[action]
}

/// Slice-level expected principal value `sum_w F[a][w] * (r[w] - p[w])`.
pub(crate) fn principal_value(inst: &Instance, action: usize, p: &[f64]) -> f64 {
    inst.distributions[action]
        .iter()
        .zip(inst.rewards.iter().zip(p.iter()))
        .map(|(&f, (&r, &pw))| f * (r - pw))
        .sum()
}

/// Expected principal value if `action` were played under contract `p`.
pub fn principal_value_for(inst: &Instance, action: usize, p: &Contract) -> Result<f64, Error> {
    if action >= inst.n_actions() {
        return Err(Error::IndexOutOfRange(format!(
            "action {action} out of range for {} actions",
            inst.n_actions()
        )));
    }
    if p.dim() != inst.n_outcomes() {
        return Err(Error::DimensionMismatch(format!(
            "contract has {} payments but instance has {} outcomes",
            p.dim(),
            inst.n_outcomes()
        )));
    }
    Ok(principal_value(inst, action, p.payments()))
}

/// The action the agent actually plays under `p`.
///
/// Maximizes agent utility; utilities within [`TIE_TOL`] of the maximum are
/// tied and broken first toward the higher principal value, then toward the
/// lower action index.
pub fn best_response(inst: &Instance, p: &Contract) -> usize {
    assert_eq!(
        p.dim(),
        inst.n_outcomes(),
        "contract dimension must match the instance's outcome count"
    );
    assert!(inst.n_actions() > 0, "instance must have at least one action");
    let utils: Vec<f64> = (0..inst.n_actions())
        .map(|a| agent_value(inst, a, p.payments()))
        .collect();
    let top = utils.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut best = None;
    let mut best_value = f64::NEG_INFINITY;
    for a in 0..inst.n_actions() {
        if top - utils[a] > TIE_TOL {
            continue;
        }
        let value = principal_value(inst, a, p.payments());
        // Strict improvement keeps the lowest index among value ties.
        if best.is_none() || value > best_value {
            best = Some(a);
            best_value = value;
        }
    }
    best.expect("at least one action attains the maximum utility")
}

/// Expected principal value under the agent's best response to `p`.
pub fn principal_utility(inst: &Instance, p: &Contract) -> f64 {
    principal_value(inst, best_response(inst, p), p.payments())
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(&a, &b)| a * b).sum()
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
