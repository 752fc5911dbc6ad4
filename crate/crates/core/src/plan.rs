//! Bounded belief-space plans.

use crate::belief::{belief_update, Belief};
use crate::model::Pomdp;
use crate::objective::SafeReachObjective;

/// `(b_s, a_{s+1}, o_{s+1}, b_{s+1}, …, a_k, o_k, b_k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CandidatePlan {
    pub start_step: usize,
    pub beliefs: Vec<Belief>,
    pub actions: Vec<usize>,
    pub observations: Vec<usize>,
}

impl CandidatePlan {
    pub fn empty(start_step: usize, initial: Belief) -> Self {
        Self {
            start_step,
            beliefs: vec![initial],
            actions: Vec::new(),
            observations: Vec::new(),
        }
    }

    /// Number of actions in the plan.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Absolute index of the last step, `k`.
    pub fn end_step(&self) -> usize {
        self.start_step + self.len()
    }

    /// Belief at absolute step `i`.
    pub fn belief_at(&self, i: usize) -> &Belief {
        &self.beliefs[i - self.start_step]
    }

    /// Action `a_i` at absolute step `i` (`i > start_step`).
    pub fn action_at(&self, i: usize) -> usize {
        self.actions[i - self.start_step - 1]
    }

    pub fn observation_at(&self, i: usize) -> usize {
        self.observations[i - self.start_step - 1]
    }

    pub fn push(&mut self, a: usize, o: usize, b: Belief) {
        self.actions.push(a);
        self.observations.push(o);
        self.beliefs.push(b);
    }

    /// Keeps steps `start_step..=end` only.
    pub fn truncate_to(&mut self, end: usize) {
        let len = end - self.start_step;
        self.actions.truncate(len);
        self.observations.truncate(len);
        self.beliefs.truncate(len + 1);
    }

    /// Checks lengths and that each belief follows from its predecessor.
    /// Returns the first offending absolute step on failure.
    pub fn check_consistent(&self, m: &Pomdp) -> Result<(), usize> {
        if self.beliefs.len() != self.actions.len() + 1 || self.actions.len() != self.observations.len() {
            return Err(self.start_step);
        }
        for i in 0..self.actions.len() {
            let next = belief_update(&self.beliefs[i], self.actions[i], self.observations[i], m);
            if next.as_ref() != Some(&self.beliefs[i + 1]) {
                return Err(self.start_step + i + 1);
            }
        }
        Ok(())
    }

    pub fn describe(&self, m: &Pomdp) -> String {
        let mut out = format!("[{}] {}", self.start_step, self.beliefs[0]);
        for i in 0..self.actions.len() {
            out.push_str(&format!(
                " --{}/{}--> {}",
                m.action_name(self.actions[i]),
                m.observation_name(self.observations[i]),
                self.beliefs[i + 1]
            ));
        }
        out
    }
}

/// Absolute step of the first goal belief reached with every earlier belief
/// safe, i.e. the first satisfied disjunct of the bounded goal formula.
pub fn goal_index(plan: &CandidatePlan, obj: &SafeReachObjective) -> Option<usize> {
    for (offset, b) in plan.beliefs.iter().enumerate() {
        if obj.is_goal(b) {
            return Some(plan.start_step + offset);
        }
        if !obj.is_safe(b) {
            return None;
        }
    }
    None
}

pub fn plan_satisfies(plan: &CandidatePlan, obj: &SafeReachObjective) -> bool {
    goal_index(plan, obj).is_some()
}
