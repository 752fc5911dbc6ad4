//! Exact bounded search over action/observation sequences.
//!
//! Interprets the structural side of each assertion instead of its term:
//! the initial belief fixes `b_s`, transitions fix the unfolding length `k`,
//! goal assertions require the first safe goal index to lie within their
//! bound, and blocking assertions forbid an action after a fixed prefix.
//! Sequences are explored depth-first with actions, then observations, in
//! ascending index order, so the first model found is deterministic.

use std::collections::{BTreeSet, HashSet};

use super::{SatResult, SolverSession};
use crate::belief::{belief_update, unnormalized_update, Belief};
use crate::encoding::{Assertion, Assignment, Structure, Value, Var};
use crate::error::SolverError;
use crate::model::Pomdp;
use crate::objective::SafeReachObjective;
use crate::plan::CandidatePlan;
use crate::rational::Prob;

pub struct EnumerativeSession<'m> {
    model: &'m Pomdp,
    objective: &'m SafeReachObjective,
    frames: Vec<Vec<Structure>>,
}

impl<'m> EnumerativeSession<'m> {
    pub fn new(model: &'m Pomdp, objective: &'m SafeReachObjective) -> Self {
        Self {
            model,
            objective,
            frames: vec![Vec::new()],
        }
    }

    fn problem(&self) -> Result<Option<Problem>, SolverError> {
        let mut initial: Option<(usize, &Belief)> = None;
        let mut transitions = BTreeSet::new();
        let mut goals = Vec::new();
        let mut blocks = Vec::new();
        for structure in self.frames.iter().flatten() {
            match structure {
                Structure::Initial { step, belief } => match initial {
                    None => initial = Some((*step, belief)),
                    Some((s, _)) if s != *step => {
                        return Err(SolverError::Unsupported("initial beliefs at different steps".into()))
                    }
                    Some((_, b)) if b != belief => return Ok(None),
                    Some(_) => {}
                },
                Structure::Transition { step } => {
                    transitions.insert(*step);
                }
                Structure::Goal { from, to } => goals.push((*from, *to)),
                Structure::Blocking { prefix, action } => blocks.push((prefix, *action)),
            }
        }
        let (start, belief) = initial.ok_or_else(|| SolverError::Unsupported("no initial belief asserted".into()))?;
        let horizon = transitions.last().copied().unwrap_or(start).max(start);
        if !transitions.iter().copied().eq(start + 1..=horizon) {
            return Err(SolverError::Unsupported(format!(
                "transition steps {transitions:?} do not cover {}..={horizon}",
                start + 1
            )));
        }
        let mut goal_bound = None;
        for (from, to) in goals {
            if from != start || to > horizon {
                return Err(SolverError::Unsupported(format!(
                    "goal over steps {from}..={to} outside the unfolding {start}..={horizon}"
                )));
            }
            goal_bound = Some(goal_bound.map_or(to, |b: usize| b.min(to)));
        }
        // A blocking constraint on another initial belief, or on an action
        // beyond the unfolding, is satisfied by the free variables.
        let blocks = blocks
            .into_iter()
            .filter(|(prefix, _)| {
                prefix.start_step == start && &prefix.beliefs[0] == belief && prefix.end_step() < horizon
            })
            .map(|(prefix, action)| (prefix.clone(), action))
            .collect();
        Ok(Some(Problem {
            start,
            initial: belief.clone(),
            horizon,
            goal_bound,
            blocks,
        }))
    }
}

struct Problem {
    start: usize,
    initial: Belief,
    horizon: usize,
    goal_bound: Option<usize>,
    blocks: Vec<(CandidatePlan, usize)>,
}

struct Search<'a> {
    model: &'a Pomdp,
    objective: &'a SafeReachObjective,
    problem: &'a Problem,
    /// `(step, belief, goal pending)` nodes known to have no completion.
    dead_ends: HashSet<(usize, Belief, bool)>,
}

impl Search<'_> {
    /// Extends `path` (ending at step `j`) to the full horizon.
    /// `pending` is true while a goal constraint is asserted and no goal
    /// belief has been seen yet.
    fn extend(&mut self, path: &mut CandidatePlan, pending: bool, live: &[usize]) -> bool {
        let j = path.end_step();
        let b = path.beliefs.last().expect("non-empty").clone();
        let mut pending = pending;
        if pending {
            if self.objective.is_goal(&b) {
                pending = false;
            } else if !self.objective.is_safe(&b) || self.problem.goal_bound == Some(j) {
                return false;
            }
        }
        if j == self.problem.horizon {
            return !pending;
        }
        let key = (j, b.clone(), pending);
        if live.is_empty() && self.dead_ends.contains(&key) {
            return false;
        }
        for a in 0..self.model.num_actions() {
            if !b.allows(self.model, a) {
                continue;
            }
            let blocked = live.iter().any(|&i| {
                let (prefix, action) = &self.problem.blocks[i];
                prefix.end_step() == j && *action == a
            });
            if blocked {
                continue;
            }
            for o in 0..self.model.num_observations() {
                let Some(next) = belief_update(&b, a, o, self.model) else {
                    continue;
                };
                let still_live: Vec<usize> = live
                    .iter()
                    .copied()
                    .filter(|&i| {
                        let (prefix, _) = &self.problem.blocks[i];
                        prefix.end_step() > j
                            && prefix.action_at(j + 1) == a
                            && prefix.observation_at(j + 1) == o
                            && prefix.belief_at(j + 1) == &next
                    })
                    .collect();
                path.push(a, o, next);
                if self.extend(path, pending, &still_live) {
                    return true;
                }
                path.actions.pop();
                path.observations.pop();
                path.beliefs.pop();
            }
        }
        if live.is_empty() {
            self.dead_ends.insert(key);
        }
        false
    }
}

/// Full model for `plan`: beliefs, selectors, and the auxiliary
/// unnormalized masses and denominators of each transition.
pub fn plan_assignment(plan: &CandidatePlan, m: &Pomdp) -> Assignment {
    let mut model = Assignment::new();
    for (offset, b) in plan.beliefs.iter().enumerate() {
        let step = plan.start_step + offset;
        for (state, p) in b.probs().iter().enumerate() {
            model.insert(Var::Belief { step, state }, Value::Real(p.clone()));
        }
    }
    for i in plan.start_step + 1..=plan.end_step() {
        let (a, o) = (plan.action_at(i), plan.observation_at(i));
        model.insert(Var::Action { step: i }, Value::Int(a as i64));
        model.insert(Var::Observation { step: i }, Value::Int(o as i64));
        let u = unnormalized_update(plan.belief_at(i - 1), a, o, m);
        let d: Prob = u.iter().sum();
        for (state, p) in u.into_iter().enumerate() {
            model.insert(Var::Unnorm { step: i, state }, Value::Real(p));
        }
        model.insert(Var::Denom { step: i }, Value::Real(d));
    }
    model
}

impl SolverSession for EnumerativeSession<'_> {
    fn push(&mut self) -> Result<(), SolverError> {
        self.frames.push(Vec::new());
        Ok(())
    }

    fn pop(&mut self) -> Result<(), SolverError> {
        if self.frames.len() <= 1 {
            return Err(SolverError::EmptyStack);
        }
        self.frames.pop();
        Ok(())
    }

    fn assert(&mut self, assertion: &Assertion) -> Result<(), SolverError> {
        self.frames
            .last_mut()
            .expect("base frame")
            .push(assertion.structure.clone());
        Ok(())
    }

    fn check(&mut self) -> Result<SatResult, SolverError> {
        let Some(problem) = self.problem()? else {
            return Ok(SatResult::Unsat);
        };
        let mut search = Search {
            model: self.model,
            objective: self.objective,
            problem: &problem,
            dead_ends: HashSet::new(),
        };
        let mut path = CandidatePlan::empty(problem.start, problem.initial.clone());
        let live: Vec<usize> = (0..problem.blocks.len()).collect();
        if search.extend(&mut path, problem.goal_bound.is_some(), &live) {
            Ok(SatResult::Sat(plan_assignment(&path, self.model)))
        } else {
            Ok(SatResult::Unsat)
        }
    }

    fn depth(&self) -> usize {
        self.frames.len() - 1
    }
}
