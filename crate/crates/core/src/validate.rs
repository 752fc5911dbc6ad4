//! Independent policy checking: exhaustive branch enumeration with exact
//! beliefs, and Monte Carlo execution.

use std::fmt;

use num_traits::Zero;
use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::belief::{belief_update, observation_probability};
use crate::model::Pomdp;
use crate::objective::SafeReachObjective;
use crate::plan::{plan_satisfies, CandidatePlan};
use crate::policy::PolicyTree;
use crate::rational::{to_f64, Prob};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    /// A positive-probability observation has no child.
    MissingBranch,
    /// A child for an observation that cannot occur, or children on a leaf.
    SpuriousBranch,
    /// A stored belief differs from the exact update.
    BeliefMismatch,
    /// An action is used where it is not available.
    Unavailable,
    /// A path is longer than the horizon bound.
    ExceedsHorizon,
    /// A complete path does not satisfy the objective.
    ObjectiveViolated,
    /// An action or observation index outside the model.
    BadIndex,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub kind: ViolationKind,
    /// The offending path, with exactly recomputed beliefs.
    pub plan: CandidatePlan,
    pub detail: String,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} after {} step(s): {}", self.kind, self.plan.len(), self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub valid: bool,
    /// Root-to-leaf paths checked before stopping.
    pub paths: usize,
    pub counterexample: Option<Counterexample>,
}

/// Checks every root-to-leaf path of `policy` against `obj` within `h` steps,
/// recomputing every belief from the root.
pub fn validate_policy(policy: &PolicyTree, m: &Pomdp, obj: &SafeReachObjective, h: usize) -> ValidationReport {
    let mut walker = Walker { m, obj, h, paths: 0 };
    let mut plan = CandidatePlan::empty(0, policy.belief.clone());
    let counterexample = walker.walk(policy, &mut plan).err();
    ValidationReport {
        valid: counterexample.is_none(),
        paths: walker.paths,
        counterexample,
    }
}

struct Walker<'a> {
    m: &'a Pomdp,
    obj: &'a SafeReachObjective,
    h: usize,
    paths: usize,
}

impl Walker<'_> {
    fn walk(&mut self, node: &PolicyTree, plan: &mut CandidatePlan) -> Result<(), Counterexample> {
        let fail = |kind, plan: &CandidatePlan, detail: String| Counterexample {
            kind,
            plan: plan.clone(),
            detail,
        };
        let b = plan.beliefs.last().expect("non-empty").clone();
        if node.belief != b {
            return Err(fail(
                ViolationKind::BeliefMismatch,
                plan,
                format!("stored {} but exact belief is {b}", node.belief),
            ));
        }
        let Some(a) = node.action else {
            if !node.children.is_empty() {
                return Err(fail(ViolationKind::SpuriousBranch, plan, "leaf has children".into()));
            }
            self.paths += 1;
            if !plan_satisfies(plan, self.obj) {
                return Err(fail(
                    ViolationKind::ObjectiveViolated,
                    plan,
                    format!("path ends in {b} without safely reaching the goal"),
                ));
            }
            return Ok(());
        };
        if a >= self.m.num_actions() {
            return Err(fail(ViolationKind::BadIndex, plan, format!("action index {a}")));
        }
        if plan.len() + 1 > self.h {
            return Err(fail(
                ViolationKind::ExceedsHorizon,
                plan,
                format!(
                    "action {} at depth {} exceeds bound {}",
                    self.m.action_name(a),
                    plan.len() + 1,
                    self.h
                ),
            ));
        }
        if !b.allows(self.m, a) {
            return Err(fail(
                ViolationKind::Unavailable,
                plan,
                format!("action {} unavailable in {b}", self.m.action_name(a)),
            ));
        }
        if let Some(&o) = node.children.keys().find(|&&o| o >= self.m.num_observations()) {
            return Err(fail(ViolationKind::BadIndex, plan, format!("observation index {o}")));
        }
        for o in 0..self.m.num_observations() {
            let possible = !observation_probability(&b, a, o, self.m).is_zero();
            match (possible, node.children.get(&o)) {
                (false, None) => {}
                (false, Some(_)) => {
                    return Err(fail(
                        ViolationKind::SpuriousBranch,
                        plan,
                        format!(
                            "observation {} cannot follow {}",
                            self.m.observation_name(o),
                            self.m.action_name(a)
                        ),
                    ))
                }
                (true, child) => {
                    let next = belief_update(&b, a, o, self.m).expect("possible observation");
                    plan.push(a, o, next);
                    let result = match child {
                        Some(child) => self.walk(child, plan),
                        None => Err(fail(
                            ViolationKind::MissingBranch,
                            plan,
                            format!("no child for observation {}", self.m.observation_name(o)),
                        )),
                    };
                    plan.actions.pop();
                    plan.observations.pop();
                    plan.beliefs.pop();
                    result?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EpisodeTrace {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub observations: Vec<usize>,
    pub reached_goal: bool,
    pub visited_unsafe: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub episodes: usize,
    pub goal_count: usize,
    pub unsafe_count: usize,
    pub goal_freq: f64,
    pub unsafe_visit_freq: f64,
    /// Wilson 95% intervals.
    pub goal_interval: (f64, f64),
    pub unsafe_interval: (f64, f64),
    pub traces: Vec<EpisodeTrace>,
}

/// Wilson score interval at z = 1.96.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

fn sampler(probs: impl IntoIterator<Item = Prob>) -> WeightedIndex<f64> {
    WeightedIndex::new(probs.into_iter().map(|p| to_f64(&p))).expect("distribution with positive mass")
}

/// Executes `policy` on hidden states sampled from its root belief.
///
/// An episode reaches the goal when it visits a state of the goal
/// predicates, and is unsafe when it visits a state bounded by the safe
/// predicates. The first `keep_traces` episodes are returned in full.
pub fn simulate(
    policy: &PolicyTree,
    m: &Pomdp,
    obj: &SafeReachObjective,
    episodes: usize,
    seed: u64,
    keep_traces: usize,
) -> SimulationReport {
    assert!(episodes >= 1, "at least one episode");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let goal_states = obj.goal_states();
    let unsafe_states = obj.unsafe_states();
    let initial = sampler(policy.belief.probs().iter().cloned());
    let mut goal_count = 0;
    let mut unsafe_count = 0;
    let mut traces = Vec::new();
    for episode in 0..episodes {
        let mut state = initial.sample(&mut rng);
        let mut trace = EpisodeTrace {
            states: vec![state],
            actions: Vec::new(),
            observations: Vec::new(),
            reached_goal: false,
            visited_unsafe: false,
        };
        let mut node = policy;
        while let Some(a) = node.action {
            let successors = m.successors(state, a);
            let pick = sampler(successors.iter().map(|(_, p)| p.clone())).sample(&mut rng);
            state = successors[pick].0;
            let o = sampler(m.observation_dist(state, a).iter().cloned()).sample(&mut rng);
            trace.states.push(state);
            trace.actions.push(a);
            trace.observations.push(o);
            node = node
                .children
                .get(&o)
                .unwrap_or_else(|| panic!("sampled observation {o} has no branch in the policy"));
        }
        trace.reached_goal = trace.states.iter().any(|s| goal_states.contains(s));
        trace.visited_unsafe = trace.states.iter().any(|s| unsafe_states.contains(s));
        goal_count += usize::from(trace.reached_goal);
        unsafe_count += usize::from(trace.visited_unsafe);
        if episode < keep_traces {
            traces.push(trace);
        }
    }
    SimulationReport {
        episodes,
        goal_count,
        unsafe_count,
        goal_freq: goal_count as f64 / episodes as f64,
        unsafe_visit_freq: unsafe_count as f64 / episodes as f64,
        goal_interval: wilson_interval(goal_count, episodes),
        unsafe_interval: wilson_interval(unsafe_count, episodes),
        traces,
    }
}
