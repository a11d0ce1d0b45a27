//! The simulated interaction: the principal commits to a contract, the
//! hidden agent best-responds, one outcome is drawn.
//!
//! Learning code only ever sees outcome draws (through
//! [`OutcomeSampler::estimate`]); the instance inside the environment is
//! reachable only through explicitly white-box accessors used by audits
//! and tests.

use std::collections::BTreeSet;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::model::{best_response, Contract, Instance};

/// One block of identical-contract rounds in the interaction log.
///
/// A single committed round has `rounds == 1` and one-hot `freqs`; an
/// estimation block compresses `rounds` draws into their frequency vector.
#[derive(Debug, Clone)]
pub struct TraceEntry {
    pub payments: Vec<f64>,
    /// True best response the agent played for this block (white-box data).
    pub action: usize,
    pub rounds: u64,
    pub freqs: Vec<f64>,
}

/// What the learner is allowed to do: hold a contract fixed for `q` rounds
/// and receive the empirical outcome frequencies.
pub trait OutcomeSampler {
    fn estimate(&mut self, p: &Contract, q: u64) -> Result<Vec<f64>, Error>;

    /// Total rounds consumed so far.
    fn rounds_used(&self) -> u64;
}

// ---------------------------------------------------------------------------
// Environment
// ---------------------------------------------------------------------------

/// Seeded simulator of a hidden-action instance.
pub struct Environment {
    instance: Instance,
    rng: ChaCha8Rng,
    rounds: u64,
    trace: Option<Vec<TraceEntry>>,
}

impl Environment {
    /// Validates the instance and fixes the outcome stream by `seed`.
    pub fn new(instance: Instance, seed: u64) -> Result<Self, Error> {
        let violations = crate::model::validate_instance(&instance);
        if !violations.is_empty() {
            return Err(Error::InvalidInstance(violations));
        }
        Ok(Self {
            instance,
            rng: ChaCha8Rng::seed_from_u64(seed),
            rounds: 0,
            trace: None,
        })
    }

    /// Enables the interaction log (required by audits and regret runs).
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    /// Plays one round: the agent best-responds, one outcome is drawn.
    pub fn commit(&mut self, p: &Contract) -> Result<usize, Error> {
        self.check_dims(p)?;
        let action = best_response(&self.instance, p);
        let outcome = self.sample_outcome(action);
        self.rounds += 1;
        if let Some(trace) = &mut self.trace {
            let mut freqs = vec![0.0; self.instance.n_outcomes()];
            freqs[outcome] = 1.0;
            trace.push(TraceEntry {
                payments: p.payments().to_vec(),
                action,
                rounds: 1,
                freqs,
            });
        }
        Ok(outcome)
    }

    pub fn rounds_used(&self) -> u64 {
        self.rounds
    }

    /// The full interaction log, if tracing was enabled.
    pub fn trace(&self) -> Option<&[TraceEntry]> {
        self.trace.as_deref()
    }

    /// White-box accessor for audits and tests; learning code never calls it.
    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    /// White-box helper: the set of true best responses across `contracts`.
    pub fn true_actions_for<'a, I>(&self, contracts: I) -> Result<BTreeSet<usize>, Error>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut actions = BTreeSet::new();
        for p in contracts {
            let contract = Contract::new(p.to_vec())?;
            self.check_dims(&contract)?;
            actions.insert(best_response(&self.instance, &contract));
        }
        Ok(actions)
    }

    fn check_dims(&self, p: &Contract) -> Result<(), Error> {
        if p.dim() != self.instance.n_outcomes() {
            return Err(Error::DimensionMismatch(format!(
                "contract has {} payments but instance has {} outcomes",
                p.dim(),
                self.instance.n_outcomes()
            )));
        }
        Ok(())
    }

    /// Inverse-CDF draw in outcome order; the last bucket absorbs any
    /// floating-point slack in the row sum.
    fn sample_outcome(&mut self, action: usize) -> usize {
        let u: f64 = self.rng.random();
        let row = &self.instance.distributions[action];
        let mut acc = 0.0;
        for (w, &f) in row.iter().enumerate() {
            acc += f;
            if u < acc {
                return w;
            }
        }
        row.len() - 1
    }
}

impl OutcomeSampler for Environment {
    /// Exactly equivalent to `q` commits at `p`: the best response is
    /// resolved once (the contract is fixed for the whole block) and `q`
    /// outcomes are drawn from the same stream `commit` would use.
    fn estimate(&mut self, p: &Contract, q: u64) -> Result<Vec<f64>, Error> {
        if q == 0 {
            return Err(Error::ParamRange("estimate needs q >= 1 rounds".into()));
        }
        self.check_dims(p)?;
        let action = best_response(&self.instance, p);
        let m = self.instance.n_outcomes();
        let mut counts = vec![0u64; m];
        for _ in 0..q {
            counts[self.sample_outcome(action)] += 1;
        }
        self.rounds += q;
        let freqs: Vec<f64> = counts.iter().map(|&c| c as f64 / q as f64).collect();
        if let Some(trace) = &mut self.trace {
            trace.push(TraceEntry {
                payments: p.payments().to_vec(),
                action,
                rounds: q,
                freqs: freqs.clone(),
            });
        }
        Ok(freqs)
    }

    fn rounds_used(&self) -> u64 {
        self.rounds
    }
}

// ---------------------------------------------------------------------------
// Exact sampler
// ---------------------------------------------------------------------------

/// Noise-free sampler: estimates return the true outcome distribution of
/// the best response while still charging `q` rounds.
///
/// Used by white-box tests that pin exact values (bisection localization,
/// call counts) where real sampling noise would drown the tolerances.
pub struct ExactSampler {
    instance: Instance,
    rounds: u64,
    trace: Vec<TraceEntry>,
}

impl ExactSampler {
    pub fn new(instance: Instance) -> Result<Self, Error> {
        let violations = crate::model::validate_instance(&instance);
        if !violations.is_empty() {
            return Err(Error::InvalidInstance(violations));
        }
        Ok(Self { instance, rounds: 0, trace: Vec::new() })
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }
}

impl OutcomeSampler for ExactSampler {
    fn estimate(&mut self, p: &Contract, q: u64) -> Result<Vec<f64>, Error> {
        if q == 0 {
            return Err(Error::ParamRange("estimate needs q >= 1 rounds".into()));
        }
        if p.dim() != self.instance.n_outcomes() {
            return Err(Error::DimensionMismatch(format!(
                "contract has {} payments but instance has {} outcomes",
                p.dim(),
                self.instance.n_outcomes()
            )));
        }
        let action = best_response(&self.instance, p);
        let freqs = self.instance.distributions[action].clone();
        self.rounds += q;
        self.trace.push(TraceEntry {
            payments: p.payments().to_vec(),
            action,
            rounds: q,
            freqs: freqs.clone(),
        });
        Ok(freqs)
    }

    fn rounds_used(&self) -> u64 {
        self.rounds
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
