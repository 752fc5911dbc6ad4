//! Bounded policy synthesis: candidate-plan search over growing horizons,
//! branch completion over all observations, and prefix blocking.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use num_traits::Zero;
use serde::Serialize;

use crate::belief::{belief_update, observation_probability, Belief};
use crate::encoding::Encoder;
use crate::error::{DecodeError, SynthesisError};
use crate::model::Pomdp;
use crate::objective::SafeReachObjective;
use crate::plan::{goal_index, CandidatePlan};
use crate::policy::PolicyTree;
use crate::solver::{extract_plan, SatResult, SessionFactory};
use crate::validate::validate_policy;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SynthesisStats {
    /// Satisfiability checks issued, across all recursion levels.
    pub solver_calls: u64,
    /// Sat results, i.e. candidate plans extracted.
    pub plans_checked: u64,
    /// Policy-generation rounds (candidate plans handed to branch completion).
    pub interactions: u64,
    pub blockings: u64,
    pub sessions: u64,
    /// Horizon at which the top-level search succeeded.
    pub final_horizon: Option<usize>,
    pub memo_hits: u64,
    /// Observations skipped because they have probability zero.
    pub skipped_observations: u64,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl SynthesisStats {
    pub fn wall_time_s(&self) -> f64 {
        self.wall_time.as_secs_f64()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    /// A satisfiability check returned a candidate (truncated at its goal
    /// index).
    Candidate {
        session: u64,
        horizon: usize,
        plan: CandidatePlan,
    },
    /// A prefix of `plan` through `fail_step` was blocked.
    Blocked {
        session: u64,
        horizon: usize,
        plan: CandidatePlan,
        fail_step: usize,
    },
    Unsat {
        session: u64,
        horizon: usize,
    },
    /// The session's scope for `horizon` was popped.
    Popped {
        session: u64,
        horizon: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthesisConfig {
    pub horizon: usize,
    /// Reuse recursive results for equal `(belief, remaining steps)`.
    pub memoize: bool,
    pub validate: bool,
    pub record_trace: bool,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            horizon: 10,
            memoize: false,
            validate: true,
            record_trace: true,
        }
    }
}

pub struct Synthesizer<'a, F: SessionFactory + ?Sized> {
    model: &'a Pomdp,
    objective: &'a SafeReachObjective,
    factory: &'a F,
    memoize: bool,
    record_trace: bool,
    pub stats: SynthesisStats,
    pub trace: Vec<TraceEvent>,
    memo: HashMap<(Belief, usize), Option<PolicyTree>>,
}

impl<'a, F: SessionFactory + ?Sized> Synthesizer<'a, F> {
    pub fn new(model: &'a Pomdp, objective: &'a SafeReachObjective, factory: &'a F) -> Self {
        Self {
            model,
            objective,
            factory,
            memoize: false,
            record_trace: true,
            stats: SynthesisStats::default(),
            trace: Vec::new(),
            memo: HashMap::new(),
        }
    }

    pub fn memoize(mut self, on: bool) -> Self {
        self.memoize = on;
        self
    }

    pub fn record_trace(mut self, on: bool) -> Self {
        self.record_trace = on;
        self
    }

    fn note(&mut self, event: TraceEvent) {
        if self.record_trace {
            self.trace.push(event);
        }
    }

    /// Searches for a policy from `b_init` at step `s` using at most `h - s`
    /// steps on every branch.
    pub fn bps(&mut self, b_init: &Belief, s: usize, h: usize) -> Result<Option<PolicyTree>, SynthesisError> {
        Ok(self.bps_at(b_init, s, h)?.map(|(tree, _)| tree))
    }

    /// Like [`Self::bps`] but also returns the horizon at which the search
    /// succeeded.
    pub fn bps_at(
        &mut self,
        b_init: &Belief,
        s: usize,
        h: usize,
    ) -> Result<Option<(PolicyTree, usize)>, SynthesisError> {
        if s > h {
            return Err(SynthesisError::Input(format!(
                "start step {s} exceeds horizon bound {h}"
            )));
        }
        if self.memoize {
            if let Some(hit) = self.memo.get(&(b_init.clone(), h - s)) {
                self.stats.memo_hits += 1;
                return Ok(hit.clone().map(|t| {
                    let depth = t.depth();
                    (t, s + depth)
                }));
            }
        }
        let result = self.search(b_init, s, h)?;
        if self.memoize {
            self.memo
                .insert((b_init.clone(), h - s), result.as_ref().map(|(t, _)| t.clone()));
        }
        Ok(result)
    }

    fn search(&mut self, b_init: &Belief, s: usize, h: usize) -> Result<Option<(PolicyTree, usize)>, SynthesisError> {
        let session_id = self.stats.sessions;
        self.stats.sessions += 1;
        let mut session = self.factory.open(self.model, self.objective)?;
        let enc = Encoder::new(self.model, self.objective, s);
        session.assert(&enc.initial(b_init))?;
        for k in s..=h {
            if k > s {
                session.assert(&enc.transition(k))?;
            }
            session.push()?;
            session.assert(&enc.goal(k))?;
            loop {
                self.stats.solver_calls += 1;
                let model = match session.check()? {
                    SatResult::Unsat => {
                        self.note(TraceEvent::Unsat {
                            session: session_id,
                            horizon: k,
                        });
                        break;
                    }
                    SatResult::Unknown(reason) => {
                        return Err(SynthesisError::Unknown {
                            horizon: k,
                            start: s,
                            reason,
                            stats: Box::new(self.stats.clone()),
                        })
                    }
                    SatResult::Sat(model) => model,
                };
                self.stats.plans_checked += 1;
                let mut plan = extract_plan(&model, &enc.vars_through(k), self.model)?;
                let end = goal_index(&plan, self.objective).ok_or_else(|| DecodeError {
                    step: k,
                    msg: format!(
                        "candidate does not satisfy the objective: {}",
                        plan.describe(self.model)
                    ),
                })?;
                plan.truncate_to(end);
                self.note(TraceEvent::Candidate {
                    session: session_id,
                    horizon: k,
                    plan: plan.clone(),
                });
                // Branches are bounded by the current horizon `k`.
                match self.policy_generation(&plan, k)? {
                    Ok(tree) => return Ok(Some((tree, k))),
                    Err(fail_step) => {
                        self.stats.blockings += 1;
                        self.note(TraceEvent::Blocked {
                            session: session_id,
                            horizon: k,
                            plan: plan.clone(),
                            fail_step,
                        });
                        session.assert(&enc.blocking(&plan, fail_step))?;
                    }
                }
            }
            session.pop()?;
            self.note(TraceEvent::Popped {
                session: session_id,
                horizon: k,
            });
        }
        Ok(None)
    }

    /// Completes `plan` into a policy by solving every off-plan observation
    /// branch, from the last step backwards. On failure returns the step
    /// whose branch could not be solved.
    pub fn policy_generation(
        &mut self,
        plan: &CandidatePlan,
        h: usize,
    ) -> Result<Result<PolicyTree, usize>, SynthesisError> {
        self.stats.interactions += 1;
        let last = plan.beliefs.last().expect("non-empty plan");
        let mut subtree = PolicyTree::leaf(last.clone(), self.objective.is_goal(last));
        for i in (plan.start_step + 1..=plan.end_step()).rev() {
            let prev = plan.belief_at(i - 1);
            let a = plan.action_at(i);
            let mut node = PolicyTree {
                belief: prev.clone(),
                action: Some(a),
                children: Default::default(),
                goal_reached: false,
            };
            node.children.insert(plan.observation_at(i), subtree);
            for o in 0..self.model.num_observations() {
                if o == plan.observation_at(i) {
                    continue;
                }
                if observation_probability(prev, a, o, self.model).is_zero() {
                    self.stats.skipped_observations += 1;
                    continue;
                }
                let branch = belief_update(prev, a, o, self.model).expect("positive observation probability");
                match self.bps(&branch, i, h)? {
                    Some(tree) => {
                        node.children.insert(o, tree);
                    }
                    None => return Ok(Err(i)),
                }
            }
            subtree = node;
        }
        Ok(Ok(subtree))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Valid,
    NoPolicyWithinBound,
    Error,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Valid => "Valid",
            Verdict::NoPolicyWithinBound => "NoPolicyWithinBound",
            Verdict::Error => "Error",
        }
    }
}

#[derive(Debug)]
pub struct SynthesisOutcome {
    pub policy: Option<PolicyTree>,
    pub stats: SynthesisStats,
    pub verdict: Verdict,
    pub error: Option<String>,
    pub trace: Vec<TraceEvent>,
}

/// Runs the search from step 0 and validates the resulting policy.
pub fn synthesis_run<F: SessionFactory + ?Sized>(
    model: &Pomdp,
    initial: &Belief,
    objective: &SafeReachObjective,
    factory: &F,
    config: &SynthesisConfig,
) -> SynthesisOutcome {
    let started = Instant::now();
    let mut synth = Synthesizer::new(model, objective, factory)
        .memoize(config.memoize)
        .record_trace(config.record_trace);
    let result = synth.bps_at(initial, 0, config.horizon);
    let mut stats = synth.stats;
    let trace = synth.trace;
    let (policy, verdict, error) = match result {
        Ok(Some((tree, k))) => {
            stats.final_horizon = Some(k);
            let problem = if tree.belief != *initial {
                Some("policy root differs from the initial belief".to_string())
            } else if config.validate {
                let report = validate_policy(&tree, model, objective, config.horizon);
                report
                    .counterexample
                    .map(|c| format!("synthesized policy failed validation: {c}"))
            } else {
                None
            };
            match problem {
                None => (Some(tree), Verdict::Valid, None),
                Some(msg) => (Some(tree), Verdict::Error, Some(msg)),
            }
        }
        Ok(None) => (None, Verdict::NoPolicyWithinBound, None),
        Err(e) => (None, Verdict::Error, Some(e.to_string())),
    };
    stats.wall_time = started.elapsed();
    SynthesisOutcome {
        policy,
        stats,
        verdict,
        error,
        trace,
    }
}
