//! Finite POMDP model with exact transition and observation functions.

use std::collections::HashMap;

use num_traits::{One, Zero};

use crate::error::ModelError;
use crate::rational::{format_prob, is_probability, Prob};

/// A discrete POMDP `(S, A, T, O, Z)` with optional per-state action
/// availability.
///
/// Transitions are stored sparsely per `(s, a)`; observation distributions
/// are stored densely per `(s', a)` since `|O|` is small in practice.
#[derive(Debug, Clone, PartialEq)]
pub struct Pomdp {
    states: Vec<String>,
    actions: Vec<String>,
    observations: Vec<String>,
    /// `transition[s][a]` = sorted list of `(s', p)` with `p > 0`.
    transition: Vec<Vec<Vec<(usize, Prob)>>>,
    /// `observe[s'][a][o]` = `Z(s', a, o)`.
    observe: Vec<Vec<Vec<Prob>>>,
    /// `available[s][a]`; `None` when every action is available everywhere.
    available: Option<Vec<Vec<bool>>>,
}

impl Pomdp {
    pub fn builder(
        states: impl IntoIterator<Item = impl Into<String>>,
        actions: impl IntoIterator<Item = impl Into<String>>,
        observations: impl IntoIterator<Item = impl Into<String>>,
    ) -> PomdpBuilder {
        PomdpBuilder::new(
            states.into_iter().map(Into::into).collect(),
            actions.into_iter().map(Into::into).collect(),
            observations.into_iter().map(Into::into).collect(),
        )
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn num_observations(&self) -> usize {
        self.observations.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn observations(&self) -> &[String] {
        &self.observations
    }

    pub fn state_name(&self, s: usize) -> &str {
        &self.states[s]
    }

    pub fn action_name(&self, a: usize) -> &str {
        &self.actions[a]
    }

    pub fn observation_name(&self, o: usize) -> &str {
        &self.observations[o]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|s| s == name)
    }

    pub fn observation_index(&self, name: &str) -> Option<usize> {
        self.observations.iter().position(|s| s == name)
    }

    /// Successors of `s` under `a` with positive probability.
    pub fn successors(&self, s: usize, a: usize) -> &[(usize, Prob)] {
        &self.transition[s][a]
    }

    pub fn transition_prob(&self, s: usize, a: usize, next: usize) -> Prob {
        self.transition[s][a]
            .iter()
            .find(|(t, _)| *t == next)
            .map(|(_, p)| p.clone())
            .unwrap_or_else(Prob::zero)
    }

    pub fn observation_prob(&self, next: usize, a: usize, o: usize) -> &Prob {
        &self.observe[next][a][o]
    }

    pub fn observation_dist(&self, next: usize, a: usize) -> &[Prob] {
        &self.observe[next][a]
    }

    pub fn has_availability(&self) -> bool {
        self.available.is_some()
    }

    pub fn is_available(&self, s: usize, a: usize) -> bool {
        self.available.as_ref().is_none_or(|av| av[s][a])
    }

    /// True when action `a` is available in every state of the model.
    pub fn is_unrestricted(&self, a: usize) -> bool {
        (0..self.num_states()).all(|s| self.is_available(s, a))
    }

    /// Predecessor lists: `result[a][s']` = `(s, T(s,a,s'))` with `T > 0`.
    pub fn predecessors(&self) -> Vec<Vec<Vec<(usize, Prob)>>> {
        let mut preds = vec![vec![Vec::new(); self.num_states()]; self.num_actions()];
        for (s, rows) in self.transition.iter().enumerate() {
            for (a, row) in rows.iter().enumerate() {
                for (next, p) in row {
                    preds[a][*next].push((s, p.clone()));
                }
            }
        }
        preds
    }
}

/// Incremental construction of a [`Pomdp`]; `build` checks every invariant.
#[derive(Debug, Clone)]
pub struct PomdpBuilder {
    states: Vec<String>,
    actions: Vec<String>,
    observations: Vec<String>,
    transition: HashMap<(usize, usize), Vec<Prob>>,
    observe: HashMap<(usize, usize), Vec<Prob>>,
    available: Option<Vec<Vec<bool>>>,
    errors: Vec<ModelError>,
}

impl PomdpBuilder {
    fn new(states: Vec<String>, actions: Vec<String>, observations: Vec<String>) -> Self {
        Self {
            states,
            actions,
            observations,
            transition: HashMap::new(),
            observe: HashMap::new(),
            available: None,
            errors: Vec::new(),
        }
    }

    fn lookup(&mut self, kind: &'static str, names: &[String], name: &str, at: &str) -> Option<usize> {
        let found = names.iter().position(|n| n == name);
        if found.is_none() {
            self.errors.push(ModelError::UnknownIdentifier {
                kind,
                name: name.to_string(),
                at: at.to_string(),
            });
        }
        found
    }

    /// Sets `T(s, a, s') = p`.
    pub fn transition(mut self, s: &str, a: &str, next: &str, p: Prob) -> Self {
        self.add_transition(s, a, next, p, "transition");
        self
    }

    pub fn add_transition(&mut self, s: &str, a: &str, next: &str, p: Prob, at: &str) {
        let states = self.states.clone();
        let actions = self.actions.clone();
        let (Some(si), Some(ai), Some(ni)) = (
            self.lookup("state", &states, s, at),
            self.lookup("action", &actions, a, at),
            self.lookup("state", &states, next, at),
        ) else {
            return;
        };
        let n = self.states.len();
        let row = self.transition.entry((si, ai)).or_insert_with(|| vec![Prob::zero(); n]);
        row[ni] = p;
    }

    pub fn add_transition_index(&mut self, s: usize, a: usize, next: usize, p: Prob) {
        let n = self.states.len();
        let row = self.transition.entry((s, a)).or_insert_with(|| vec![Prob::zero(); n]);
        row[next] += p;
    }

    /// Sets `Z(s', a, o) = p`.
    pub fn observation(mut self, next: &str, a: &str, o: &str, p: Prob) -> Self {
        self.add_observation(next, a, o, p, "observation");
        self
    }

    pub fn add_observation(&mut self, next: &str, a: &str, o: &str, p: Prob, at: &str) {
        let states = self.states.clone();
        let actions = self.actions.clone();
        let observations = self.observations.clone();
        let (Some(si), Some(ai), Some(oi)) = (
            self.lookup("state", &states, next, at),
            self.lookup("action", &actions, a, at),
            self.lookup("observation", &observations, o, at),
        ) else {
            return;
        };
        self.add_observation_index(si, ai, oi, p);
    }

    pub fn add_observation_index(&mut self, next: usize, a: usize, o: usize, p: Prob) {
        let n = self.observations.len();
        let row = self.observe.entry((next, a)).or_insert_with(|| vec![Prob::zero(); n]);
        row[o] = p;
    }

    /// Restricts the actions available in state `s`.
    pub fn availability(mut self, s: &str, actions: &[&str]) -> Self {
        let names: Vec<String> = actions.iter().map(|a| a.to_string()).collect();
        self.add_availability(s, &names, "availability");
        self
    }

    pub fn add_availability(&mut self, s: &str, actions: &[String], at: &str) {
        let states = self.states.clone();
        let all_actions = self.actions.clone();
        let Some(si) = self.lookup("state", &states, s, at) else {
            return;
        };
        let mut row = vec![false; all_actions.len()];
        for a in actions {
            if let Some(ai) = self.lookup("action", &all_actions, a, at) {
                row[ai] = true;
            }
        }
        self.set_availability_index(si, row);
    }

    pub fn set_availability_index(&mut self, s: usize, row: Vec<bool>) {
        let (n, m) = (self.states.len(), self.actions.len());
        let table = self.available.get_or_insert_with(|| vec![vec![true; m]; n]);
        table[s] = row;
    }

    pub fn build(self) -> Result<Pomdp, ModelError> {
        if let Some(first) = self.errors.into_iter().next() {
            return Err(first);
        }
        for (kind, names) in [
            ("state", &self.states),
            ("action", &self.actions),
            ("observation", &self.observations),
        ] {
            if names.is_empty() {
                return Err(ModelError::Empty { kind });
            }
            for (i, name) in names.iter().enumerate() {
                if names[..i].contains(name) {
                    return Err(ModelError::Duplicate {
                        kind,
                        name: name.clone(),
                    });
                }
            }
        }
        let (ns, na) = (self.states.len(), self.actions.len());
        let mut transition = vec![vec![Vec::new(); na]; ns];
        let mut observe = vec![vec![Vec::new(); na]; ns];
        for s in 0..ns {
            for a in 0..na {
                let at = format!("T({}, {})", self.states[s], self.actions[a]);
                let row = self
                    .transition
                    .get(&(s, a))
                    .ok_or_else(|| ModelError::MissingDistribution { at: at.clone() })?;
                check_distribution(row, &at)?;
                transition[s][a] = row
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| !p.is_zero())
                    .map(|(t, p)| (t, p.clone()))
                    .collect();

                let at = format!("Z({}, {})", self.states[s], self.actions[a]);
                let row = self
                    .observe
                    .get(&(s, a))
                    .ok_or_else(|| ModelError::MissingDistribution { at: at.clone() })?;
                check_distribution(row, &at)?;
                observe[s][a] = row.clone();
            }
        }
        let available = self.available;
        if let Some(table) = &available {
            for (s, row) in table.iter().enumerate() {
                if !row.iter().any(|&x| x) {
                    return Err(ModelError::NoActionAvailable {
                        state: self.states[s].clone(),
                    });
                }
            }
        }
        Ok(Pomdp {
            states: self.states,
            actions: self.actions,
            observations: self.observations,
            transition,
            observe,
            available,
        })
    }
}

fn check_distribution(row: &[Prob], at: &str) -> Result<(), ModelError> {
    if let Some(bad) = row.iter().find(|p| !is_probability(p)) {
        return Err(ModelError::OutOfRange {
            at: at.to_string(),
            value: format_prob(bad),
        });
    }
    let total: Prob = row.iter().sum();
    if !total.is_one() {
        return Err(ModelError::BadSum {
            at: at.to_string(),
            sum: format_prob(&total),
        });
    }
    Ok(())
}
