//! Safe-reachability objectives as conjunctions of linear belief thresholds.

use std::fmt;
use std::str::FromStr;

use num_traits::One;

use crate::belief::Belief;
use crate::rational::{format_prob, is_probability, Prob};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparator {
    Gt,
    Lt,
    Ge,
    Le,
}

impl Comparator {
    pub fn holds(self, lhs: &Prob, rhs: &Prob) -> bool {
        match self {
            Comparator::Gt => lhs > rhs,
            Comparator::Lt => lhs < rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Le => lhs <= rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Gt => ">",
            Comparator::Lt => "<",
            Comparator::Ge => ">=",
            Comparator::Le => "<=",
        }
    }

    /// Lower-bounding comparators (`>`, `>=`) describe "at least" masses.
    pub fn is_lower_bound(self) -> bool {
        matches!(self, Comparator::Gt | Comparator::Ge)
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Comparator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            ">" => Ok(Comparator::Gt),
            "<" => Ok(Comparator::Lt),
            ">=" | "≥" => Ok(Comparator::Ge),
            "<=" | "≤" => Ok(Comparator::Le),
            other => Err(format!("unknown comparator `{other}`")),
        }
    }
}

/// `(Σ_{s ∈ states} b(s)) <cmp> threshold`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LinearBeliefPredicate {
    states: Vec<usize>,
    comparator: Comparator,
    threshold: Prob,
}

impl LinearBeliefPredicate {
    pub fn new(mut states: Vec<usize>, comparator: Comparator, threshold: Prob) -> Result<Self, String> {
        states.sort_unstable();
        states.dedup();
        if states.is_empty() {
            return Err("predicate over an empty state set".into());
        }
        if !is_probability(&threshold) {
            return Err(format!("threshold {} outside [0, 1]", format_prob(&threshold)));
        }
        Ok(Self {
            states,
            comparator,
            threshold,
        })
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn comparator(&self) -> Comparator {
        self.comparator
    }

    pub fn threshold(&self) -> &Prob {
        &self.threshold
    }

    pub fn eval(&self, b: &Belief) -> bool {
        self.comparator.holds(&b.mass(&self.states), &self.threshold)
    }
}

pub fn eval_predicate(p: &LinearBeliefPredicate, b: &Belief) -> bool {
    p.eval(b)
}

/// Goal set (`Dest`) and safe set (`Safe`), each a conjunction of predicates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SafeReachObjective {
    pub goal: Vec<LinearBeliefPredicate>,
    pub safe: Vec<LinearBeliefPredicate>,
}

impl SafeReachObjective {
    pub fn new(goal: Vec<LinearBeliefPredicate>, safe: Vec<LinearBeliefPredicate>) -> Self {
        Self { goal, safe }
    }

    pub fn is_goal(&self, b: &Belief) -> bool {
        self.goal.iter().all(|p| p.eval(b))
    }

    pub fn is_safe(&self, b: &Belief) -> bool {
        self.safe.iter().all(|p| p.eval(b))
    }

    /// States whose mass the goal predicates push up.
    pub fn goal_states(&self) -> Vec<usize> {
        union_states(self.goal.iter().filter(|p| p.comparator.is_lower_bound()))
    }

    /// States whose mass the safe predicates bound from above.
    pub fn unsafe_states(&self) -> Vec<usize> {
        union_states(self.safe.iter().filter(|p| !p.comparator.is_lower_bound()))
    }

    /// Sufficient syntactic check that every goal belief is safe.
    ///
    /// Each safe predicate must follow from a single goal predicate: either
    /// the two are identical, or the goal bounds mass on a set `G` from below,
    /// the safe predicate bounds mass on a disjoint set `U` from above, and
    /// `1 - t_goal <= t_safe` (tightened for strictness).
    pub fn goal_within_safe(&self) -> bool {
        self.safe.iter().all(|safe| {
            self.goal.iter().any(|goal| {
                if goal == safe {
                    return true;
                }
                if !goal.comparator.is_lower_bound() || safe.comparator.is_lower_bound() {
                    return false;
                }
                if goal.states.iter().any(|s| safe.states.contains(s)) {
                    return false;
                }
                // Σ_U ≤ 1 - Σ_G, and Σ_G (>|>=) t_goal.
                let bound = Prob::one() - &goal.threshold;
                match (goal.comparator, safe.comparator) {
                    (Comparator::Gt, Comparator::Lt) => bound <= safe.threshold,
                    (Comparator::Gt, Comparator::Le) => bound <= safe.threshold,
                    (Comparator::Ge, Comparator::Lt) => bound < safe.threshold,
                    (Comparator::Ge, Comparator::Le) => bound <= safe.threshold,
                    _ => false,
                }
            })
        })
    }

    /// Largest state index referenced, for compatibility checks.
    pub fn max_state(&self) -> Option<usize> {
        self.goal
            .iter()
            .chain(&self.safe)
            .flat_map(|p| p.states.iter().copied())
            .max()
    }
}

fn union_states<'a>(preds: impl Iterator<Item = &'a LinearBeliefPredicate>) -> Vec<usize> {
    let mut out: Vec<usize> = preds.flat_map(|p| p.states.iter().copied()).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// `Σ b(s) > threshold` over a state set; the common goal form.
pub fn above(states: Vec<usize>, threshold: Prob) -> LinearBeliefPredicate {
    LinearBeliefPredicate::new(states, Comparator::Gt, threshold).expect("valid predicate")
}

/// `Σ b(s) < threshold` over a state set; the common safety form.
pub fn below(states: Vec<usize>, threshold: Prob) -> LinearBeliefPredicate {
    LinearBeliefPredicate::new(states, Comparator::Lt, threshold).expect("valid predicate")
}

impl fmt::Display for LinearBeliefPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sum{:?} {} {}",
            self.states,
            self.comparator,
            format_prob(&self.threshold)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::prob;
    use proptest::prelude::*;

    fn belief(entries: &[(i64, i64)]) -> Belief {
        Belief::new(entries.iter().map(|&(n, d)| prob(n, d)).collect()).unwrap()
    }

    #[test]
    fn pickup_thresholds() {
        let goal = above(vec![2], prob(4, 5));
        assert!(!goal.eval(&belief(&[(0, 1), (7, 25), (18, 25)])));
        assert!(goal.eval(&belief(&[(1, 20), (1, 10), (17, 20)])));
        let safe = below(vec![1], prob(1, 5));
        assert!(safe.eval(&belief(&[(0, 1), (0, 1), (1, 1)])));
    }

    #[test]
    fn boundary_is_strict() {
        let goal = above(vec![0], prob(1, 2));
        assert!(!goal.eval(&belief(&[(1, 2), (1, 2)])));
        let weak = LinearBeliefPredicate::new(vec![0], Comparator::Ge, prob(1, 2)).unwrap();
        assert!(weak.eval(&belief(&[(1, 2), (1, 2)])));
    }

    #[test]
    fn rejects_bad_predicates() {
        assert!(LinearBeliefPredicate::new(vec![], Comparator::Gt, prob(1, 2)).is_err());
        assert!(LinearBeliefPredicate::new(vec![0], Comparator::Gt, prob(3, 2)).is_err());
    }

    #[test]
    fn containment_check() {
        let obj = SafeReachObjective::new(vec![above(vec![2], prob(4, 5))], vec![below(vec![1], prob(1, 5))]);
        assert!(obj.goal_within_safe());
        let loose = SafeReachObjective::new(vec![above(vec![2], prob(1, 2))], vec![below(vec![1], prob(1, 5))]);
        assert!(!loose.goal_within_safe());
    }

    proptest! {
        #[test]
        fn monotone_in_threshold(n in 0i64..=20, t in 0i64..=20, lower in 0i64..=20) {
            let b = belief(&[(n, 20), (20 - n, 20)]);
            let p = above(vec![0], prob(t, 20));
            let lowered = above(vec![0], prob(t.min(lower), 20));
            if p.eval(&b) {
                prop_assert!(lowered.eval(&b));
            }
        }
    }
}
