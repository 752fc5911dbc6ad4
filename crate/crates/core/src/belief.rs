//! Beliefs and the exact belief-space transition.

use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::model::Pomdp;
use crate::rational::{format_prob, Prob};

/// A probability distribution over the states of a model, indexed by state
/// order. Entries are non-negative and sum to exactly one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Belief(Vec<Prob>);

impl Belief {
    /// Wraps `probs`, checking non-negativity and the unit sum.
    pub fn new(probs: Vec<Prob>) -> Result<Self, String> {
        if probs.is_empty() {
            return Err("belief over zero states".into());
        }
        if let Some(p) = probs.iter().find(|p| p.is_negative()) {
            return Err(format!("negative belief entry {}", format_prob(p)));
        }
        let total: Prob = probs.iter().sum();
        if !total.is_one() {
            return Err(format!("belief entries sum to {}", format_prob(&total)));
        }
        Ok(Self(probs))
    }

    pub fn point(num_states: usize, state: usize) -> Self {
        let mut probs = vec![Prob::zero(); num_states];
        probs[state] = Prob::one();
        Self(probs)
    }

    pub fn uniform_over(num_states: usize, support: &[usize]) -> Self {
        let mut probs = vec![Prob::zero(); num_states];
        let p = Prob::new(1.into(), (support.len() as i64).into());
        for &s in support {
            probs[s] = p.clone();
        }
        Self(probs)
    }

    pub fn probs(&self) -> &[Prob] {
        &self.0
    }

    pub fn get(&self, s: usize) -> &Prob {
        &self.0[s]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, p)| !p.is_zero()).map(|(s, _)| s)
    }

    /// Total mass on the given states.
    pub fn mass<'a>(&self, states: impl IntoIterator<Item = &'a usize>) -> Prob {
        states.into_iter().map(|&s| &self.0[s]).sum()
    }

    /// True when every state in the support allows action `a`.
    pub fn allows(&self, model: &Pomdp, a: usize) -> bool {
        self.support().all(|s| model.is_available(s, a))
    }
}

impl fmt::Display for Belief {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", format_prob(p))?;
        }
        write!(f, ")")
    }
}

/// Predicted next-state distribution `Σ_s T(s,a,s') b(s)` before observing.
fn predict(b: &Belief, a: usize, m: &Pomdp) -> Vec<Prob> {
    let mut next = vec![Prob::zero(); m.num_states()];
    for s in b.support() {
        let weight = b.get(s);
        for (t, p) in m.successors(s, a) {
            next[*t] += p * weight;
        }
    }
    next
}

/// Unnormalized posterior `Z(s',a,o) Σ_s T(s,a,s') b(s)` for every `s'`.
pub fn unnormalized_update(b: &Belief, a: usize, o: usize, m: &Pomdp) -> Vec<Prob> {
    predict(b, a, m)
        .into_iter()
        .enumerate()
        .map(|(t, p)| {
            if p.is_zero() {
                p
            } else {
                p * m.observation_prob(t, a, o)
            }
        })
        .collect()
}

/// Probability of observing `o` after taking `a` from `b`.
pub fn observation_probability(b: &Belief, a: usize, o: usize, m: &Pomdp) -> Prob {
    unnormalized_update(b, a, o, m).into_iter().sum()
}

/// The full observation distribution after taking `a` from `b`.
pub fn observation_distribution(b: &Belief, a: usize, m: &Pomdp) -> Vec<Prob> {
    let predicted = predict(b, a, m);
    (0..m.num_observations())
        .map(|o| {
            predicted
                .iter()
                .enumerate()
                .filter(|(_, p)| !p.is_zero())
                .map(|(t, p)| p * m.observation_prob(t, a, o))
                .sum()
        })
        .collect()
}

/// Exact Bayesian update. Returns `None` when `o` has zero probability after
/// `a` from `b`, in which case the branch cannot occur.
pub fn belief_update(b: &Belief, a: usize, o: usize, m: &Pomdp) -> Option<Belief> {
    let unnormalized = unnormalized_update(b, a, o, m);
    let denom: Prob = unnormalized.iter().sum();
    if denom.is_zero() {
        return None;
    }
    Some(Belief(unnormalized.into_iter().map(|u| u / &denom).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::pickup::build_pickup_example;
    use crate::rational::prob;

    fn b(entries: &[(i64, i64)]) -> Belief {
        Belief::new(entries.iter().map(|&(n, d)| prob(n, d)).collect()).unwrap()
    }

    #[test]
    fn pickup_posterior_goldens() {
        let ex = build_pickup_example();
        let m = &ex.model;
        let (al, ar) = (m.action_index("a_L").unwrap(), m.action_index("a_R").unwrap());
        let (pos, neg) = (
            m.observation_index("o_pos").unwrap(),
            m.observation_index("o_neg").unwrap(),
        );
        let init = &ex.initial;
        assert_eq!(
            belief_update(init, al, pos, m).unwrap(),
            b(&[(0, 1), (1, 25), (24, 25)])
        );
        assert_eq!(
            belief_update(init, al, neg, m).unwrap(),
            b(&[(0, 1), (7, 25), (18, 25)])
        );
        let right = b(&[(1, 20), (1, 10), (17, 20)]);
        assert_eq!(belief_update(init, ar, pos, m).unwrap(), right);
        assert_eq!(belief_update(init, ar, neg, m).unwrap(), right);
        assert_eq!(observation_probability(init, al, pos, m), prob(3, 4));
        assert_eq!(observation_probability(init, al, neg, m), prob(1, 4));
        assert_eq!(observation_probability(init, ar, pos, m), prob(4, 5));
        assert_eq!(observation_probability(init, ar, neg, m), prob(1, 5));
    }

    #[test]
    fn identity_on_self_loop() {
        let m = Pomdp::builder(["x", "y"], ["stay"], ["o"])
            .transition("x", "stay", "x", prob(1, 1))
            .transition("y", "stay", "y", prob(1, 1))
            .observation("x", "stay", "o", prob(1, 1))
            .observation("y", "stay", "o", prob(1, 1))
            .build()
            .unwrap();
        let point = Belief::point(2, 1);
        assert_eq!(belief_update(&point, 0, 0, &m).unwrap(), point);
    }

    #[test]
    fn impossible_observation() {
        let ex = build_pickup_example();
        let m = &ex.model;
        // Observations from the absorbing goal state under a_R are (4/5, 1/5);
        // build a model where one observation is ruled out entirely.
        let m2 = Pomdp::builder(["x"], ["a"], ["seen", "never"])
            .transition("x", "a", "x", prob(1, 1))
            .observation("x", "a", "seen", prob(1, 1))
            .build()
            .unwrap();
        assert!(belief_update(&Belief::point(1, 0), 0, 1, &m2).is_none());
        assert_eq!(observation_probability(&Belief::point(1, 0), 0, 1, &m2), prob(0, 1));
        assert_eq!(m.num_observations(), 2);
    }

    #[test]
    fn rejects_invalid_beliefs() {
        assert!(Belief::new(vec![prob(1, 2), prob(1, 3)]).is_err());
        assert!(Belief::new(vec![prob(3, 2), prob(-1, 2)]).is_err());
        assert!(Belief::new(vec![]).is_err());
    }

    #[test]
    fn display_uses_exact_fractions() {
        assert_eq!(b(&[(1, 20), (1, 10), (17, 20)]).to_string(), "(1/20, 1/10, 17/20)");
    }
}
