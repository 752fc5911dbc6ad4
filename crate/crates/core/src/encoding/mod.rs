//! Symbolic encoding of the goal-constrained belief space over a bounded
//! horizon: initial belief, transition unfolding, the bounded
//! safe-reachability formula, and prefix-blocking constraints.
//!
//! The belief update is encoded without division. For step `i`:
//!
//! ```text
//! u_i(s') = Z(s', a_i, o_i) · Σ_s T(s, a_i, s') · b_{i-1}(s)
//! d_i     = Σ_{s'} u_i(s'),   d_i > 0
//! b_i(s') · d_i = u_i(s')
//! ```
//!
//! where the model constants are selected by if-then-else chains over the
//! integer selectors `a_i` and `o_i`.

pub mod term;

use crate::belief::Belief;
use crate::model::Pomdp;
use crate::objective::{Comparator, LinearBeliefPredicate, SafeReachObjective};
use crate::plan::CandidatePlan;
use crate::rational::Prob;

pub use term::{Assignment, Sort, Term, Value, Var};

/// Variable handles for one step of the unfolding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepVars {
    pub step: usize,
    pub belief_vars: Vec<Var>,
    /// `None` at the start step.
    pub action_var: Option<Var>,
    pub observation_var: Option<Var>,
}

impl StepVars {
    pub fn start(step: usize, num_states: usize) -> Self {
        Self {
            step,
            belief_vars: belief_vars(step, num_states),
            action_var: None,
            observation_var: None,
        }
    }

    pub fn transition(step: usize, num_states: usize) -> Self {
        Self {
            step,
            belief_vars: belief_vars(step, num_states),
            action_var: Some(Var::Action { step }),
            observation_var: Some(Var::Observation { step }),
        }
    }

    fn belief_terms(&self) -> impl Iterator<Item = Term> + '_ {
        self.belief_vars.iter().map(|v| Term::var(*v))
    }
}

fn belief_vars(step: usize, num_states: usize) -> Vec<Var> {
    (0..num_states).map(|state| Var::Belief { step, state }).collect()
}

/// `b_s = b_init`, componentwise.
pub fn initial_constraint(vars: &StepVars, b_init: &Belief) -> Term {
    belief_equal(vars, b_init)
}

fn belief_equal(vars: &StepVars, b: &Belief) -> Term {
    Term::and(
        vars.belief_terms()
            .zip(b.probs())
            .map(|(v, p)| Term::eq(v, Term::real(p.clone())))
            .collect(),
    )
}

/// `b_i = T_B(b_{i-1}, a_i, o_i)` in division-free form, plus selector
/// domains, redundant simplex constraints and action availability.
pub fn transition_constraint(prev: &StepVars, cur: &StepVars, m: &Pomdp) -> Term {
    transition_with_predecessors(prev, cur, m, &m.predecessors())
}

fn transition_with_predecessors(prev: &StepVars, cur: &StepVars, m: &Pomdp, preds: &[Vec<Vec<(usize, Prob)>>]) -> Term {
    assert_eq!(cur.step, prev.step + 1, "transition between non-adjacent steps");
    let i = cur.step;
    let a_var = Term::var(cur.action_var.expect("transition step has an action"));
    let o_var = Term::var(cur.observation_var.expect("transition step has an observation"));
    let (na, no) = (m.num_actions(), m.num_observations());
    let mut parts = vec![
        Term::le(Term::int(0), a_var.clone()),
        Term::lt(a_var.clone(), Term::int(na)),
        Term::le(Term::int(0), o_var.clone()),
        Term::lt(o_var.clone(), Term::int(no)),
    ];

    let d = Term::var(Var::Denom { step: i });
    let mut u_terms = Vec::with_capacity(m.num_states());
    for next in 0..m.num_states() {
        let u = Term::var(Var::Unnorm { step: i, state: next });
        let per_action: Vec<Term> = preds
            .iter()
            .enumerate()
            .map(|(a, by_next)| {
                let predicted = Term::add(
                    by_next[next]
                        .iter()
                        .map(|(s, p)| Term::mul(vec![Term::real(p.clone()), Term::var(prev.belief_vars[*s])]))
                        .collect(),
                );
                let per_obs: Vec<Term> = (0..no)
                    .map(|o| {
                        Term::mul(vec![
                            Term::real(m.observation_prob(next, a, o).clone()),
                            predicted.clone(),
                        ])
                    })
                    .collect();
                select(&o_var, per_obs)
            })
            .collect();
        parts.push(Term::eq(u.clone(), select(&a_var, per_action)));
        let b = Term::var(cur.belief_vars[next]);
        parts.push(Term::eq(Term::mul(vec![b.clone(), d.clone()]), u.clone()));
        parts.push(Term::le(Term::real(Prob::from_integer(0.into())), b));
        u_terms.push(u);
    }
    parts.push(Term::eq(d.clone(), Term::add(u_terms)));
    parts.push(Term::lt(Term::real(Prob::from_integer(0.into())), d));
    parts.push(Term::eq(
        Term::add(cur.belief_terms().collect()),
        Term::real(Prob::from_integer(1.into())),
    ));

    for a in 0..na {
        if m.is_unrestricted(a) {
            continue;
        }
        let allowed: Vec<Term> = (0..m.num_states())
            .filter(|&s| m.is_available(s, a))
            .map(|s| Term::var(prev.belief_vars[s]))
            .collect();
        parts.push(Term::implies(
            Term::eq(a_var.clone(), Term::int(a)),
            Term::eq(Term::add(allowed), Term::real(Prob::from_integer(1.into()))),
        ));
    }
    Term::and(parts)
}

/// If-then-else chain `ite(sel = 0, t0, ite(sel = 1, t1, … t_{n-1}))`.
fn select(selector: &Term, mut branches: Vec<Term>) -> Term {
    let mut acc = branches.pop().expect("at least one branch");
    while let Some(branch) = branches.pop() {
        let index = branches.len();
        acc = Term::ite(Term::eq(selector.clone(), Term::int(index)), branch, acc);
    }
    acc
}

pub fn predicate_term(p: &LinearBeliefPredicate, vars: &StepVars) -> Term {
    let mass = Term::add(p.states().iter().map(|&s| Term::var(vars.belief_vars[s])).collect());
    let t = Term::real(p.threshold().clone());
    match p.comparator() {
        Comparator::Gt => Term::lt(t, mass),
        Comparator::Ge => Term::le(t, mass),
        Comparator::Lt => Term::lt(mass, t),
        Comparator::Le => Term::le(mass, t),
    }
}

fn in_set(preds: &[LinearBeliefPredicate], vars: &StepVars) -> Term {
    Term::and(preds.iter().map(|p| predicate_term(p, vars)).collect())
}

/// `∨_{i=s}^{k} (b_i ∈ Dest ∧ ∧_{j=s}^{i-1} b_j ∈ Safe)` over `vars[s..=k]`.
pub fn goal_constraint(vars: &[StepVars], obj: &SafeReachObjective) -> Term {
    let mut disjuncts = Vec::with_capacity(vars.len());
    let mut safe_prefix = Vec::with_capacity(vars.len());
    for step in vars {
        let mut conj = safe_prefix.clone();
        conj.push(in_set(&obj.goal, step));
        disjuncts.push(Term::and(conj));
        safe_prefix.push(in_set(&obj.safe, step));
    }
    Term::or(disjuncts)
}

/// Negated prefix of `plan` through action `a_i`:
/// `¬(b_s = b_s^σ ∧ a_i = a_i^σ ∧ ∧_{m=s+1}^{i-1}(a_m = a_m^σ ∧ o_m = o_m^σ ∧ b_m = b_m^σ))`.
///
/// The belief equalities for `m > s` are implied by the action and
/// observation equalities but are kept so the formula is exactly the
/// textbook prefix.
pub fn blocking_constraint(plan: &CandidatePlan, fail_step: usize) -> Term {
    let s = plan.start_step;
    assert!(
        fail_step > s && fail_step <= plan.end_step(),
        "fail step {fail_step} outside {}..={}",
        s + 1,
        plan.end_step()
    );
    let n = plan.beliefs[0].len();
    let mut conj = vec![belief_equal(&StepVars::start(s, n), plan.belief_at(s))];
    conj.push(Term::eq(
        Term::var(Var::Action { step: fail_step }),
        Term::int(plan.action_at(fail_step)),
    ));
    for m in s + 1..fail_step {
        conj.push(Term::eq(
            Term::var(Var::Action { step: m }),
            Term::int(plan.action_at(m)),
        ));
        conj.push(Term::eq(
            Term::var(Var::Observation { step: m }),
            Term::int(plan.observation_at(m)),
        ));
        conj.push(belief_equal(&StepVars::transition(m, n), plan.belief_at(m)));
    }
    Term::negate(Term::and(conj))
}

/// The structural meaning of an assertion, interpreted directly by the
/// enumerative backend.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Structure {
    Initial {
        step: usize,
        belief: Belief,
    },
    Transition {
        step: usize,
    },
    Goal {
        from: usize,
        to: usize,
    },
    /// Blocks every plan sharing `prefix` (steps `s..i-1`) and taking
    /// `action` at step `i`.
    Blocking {
        prefix: CandidatePlan,
        action: usize,
    },
}

/// A constraint in both symbolic and structural form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assertion {
    pub term: Term,
    pub structure: Structure,
}

/// Builds the assertions for one synthesis problem starting at step `start`.
#[derive(Debug, Clone)]
pub struct Encoder<'m> {
    model: &'m Pomdp,
    objective: &'m SafeReachObjective,
    start: usize,
    preds: Vec<Vec<Vec<(usize, Prob)>>>,
}

impl<'m> Encoder<'m> {
    pub fn new(model: &'m Pomdp, objective: &'m SafeReachObjective, start: usize) -> Self {
        Self {
            model,
            objective,
            start,
            preds: model.predecessors(),
        }
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn step_vars(&self, step: usize) -> StepVars {
        let n = self.model.num_states();
        if step == self.start {
            StepVars::start(step, n)
        } else {
            StepVars::transition(step, n)
        }
    }

    /// Step variables for `start..=k`.
    pub fn vars_through(&self, k: usize) -> Vec<StepVars> {
        (self.start..=k).map(|i| self.step_vars(i)).collect()
    }

    pub fn initial(&self, b_init: &Belief) -> Assertion {
        Assertion {
            term: initial_constraint(&self.step_vars(self.start), b_init),
            structure: Structure::Initial {
                step: self.start,
                belief: b_init.clone(),
            },
        }
    }

    pub fn transition(&self, k: usize) -> Assertion {
        assert!(k > self.start);
        Assertion {
            term: transition_with_predecessors(&self.step_vars(k - 1), &self.step_vars(k), self.model, &self.preds),
            structure: Structure::Transition { step: k },
        }
    }

    pub fn goal(&self, k: usize) -> Assertion {
        Assertion {
            term: goal_constraint(&self.vars_through(k), self.objective),
            structure: Structure::Goal {
                from: self.start,
                to: k,
            },
        }
    }

    pub fn blocking(&self, plan: &CandidatePlan, fail_step: usize) -> Assertion {
        let term = blocking_constraint(plan, fail_step);
        let mut prefix = plan.clone();
        prefix.truncate_to(fail_step - 1);
        Assertion {
            term,
            structure: Structure::Blocking {
                action: plan.action_at(fail_step),
                prefix,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::pickup::build_pickup_example;
    use crate::rational::prob;

    #[test]
    fn initial_equalities() {
        let ex = build_pickup_example();
        let t = initial_constraint(&StepVars::start(0, 3), &ex.initial);
        assert_eq!(t.to_smtlib(), "(and (= b_0_0 1.0) (= b_0_1 0.0) (= b_0_2 0.0))");
        let uniform = Belief::uniform_over(2, &[0, 1]);
        let t = initial_constraint(&StepVars::start(5, 2), &uniform);
        assert_eq!(t.to_smtlib(), "(and (= b_5_0 (/ 1.0 2.0)) (= b_5_1 (/ 1.0 2.0)))");
    }

    #[test]
    fn goal_single_disjunct() {
        let ex = build_pickup_example();
        let t = goal_constraint(&[StepVars::start(2, 3)], &ex.objective);
        assert_eq!(t.to_smtlib(), "(< (/ 4.0 5.0) b_2_2)");
    }

    #[test]
    fn goal_two_steps() {
        let ex = build_pickup_example();
        let t = goal_constraint(&[StepVars::start(0, 3), StepVars::transition(1, 3)], &ex.objective);
        assert_eq!(
            t.to_smtlib(),
            "(or (< (/ 4.0 5.0) b_0_2) (and (< b_0_1 (/ 1.0 5.0)) (< (/ 4.0 5.0) b_1_2)))"
        );
    }

    #[test]
    fn blocking_first_action() {
        let ex = build_pickup_example();
        let m = &ex.model;
        let mut plan = CandidatePlan::empty(0, ex.initial.clone());
        let b1 = crate::belief::belief_update(&ex.initial, 0, 0, m).unwrap();
        plan.push(0, 0, b1);
        let t = blocking_constraint(&plan, 1);
        assert_eq!(
            t.to_smtlib(),
            "(not (and (= b_0_0 1.0) (= b_0_1 0.0) (= b_0_2 0.0) (= a_1 0)))"
        );
    }

    #[test]
    fn deterministic_construction() {
        let ex = build_pickup_example();
        let enc = Encoder::new(&ex.model, &ex.objective, 0);
        let a = enc.transition(1);
        let b = Encoder::new(&ex.model, &ex.objective, 0).transition(1);
        assert_eq!(a, b);
        assert_eq!(a.term.to_smtlib(), b.term.to_smtlib());
        assert_eq!(a.term.sort(), Ok(Sort::Bool));
    }

    #[test]
    fn one_state_transition_fixes_belief() {
        let m = Pomdp::builder(["only"], ["a", "b"], ["x", "y"])
            .transition("only", "a", "only", prob(1, 1))
            .transition("only", "b", "only", prob(1, 1))
            .observation("only", "a", "x", prob(1, 3))
            .observation("only", "a", "y", prob(2, 3))
            .observation("only", "b", "x", prob(1, 1))
            .build()
            .unwrap();
        let t = transition_constraint(&StepVars::start(0, 1), &StepVars::transition(1, 1), &m);
        let mut model = Assignment::new();
        model.insert(Var::Belief { step: 0, state: 0 }, Value::Real(prob(1, 1)));
        model.insert(Var::Belief { step: 1, state: 0 }, Value::Real(prob(1, 1)));
        model.insert(Var::Action { step: 1 }, Value::Int(0));
        model.insert(Var::Observation { step: 1 }, Value::Int(1));
        model.insert(Var::Unnorm { step: 1, state: 0 }, Value::Real(prob(2, 3)));
        model.insert(Var::Denom { step: 1 }, Value::Real(prob(2, 3)));
        assert_eq!(t.eval(&model), Ok(Value::Bool(true)));
        // `y` cannot be observed after `b`, so the denominator must vanish.
        model.insert(Var::Action { step: 1 }, Value::Int(1));
        model.insert(Var::Unnorm { step: 1, state: 0 }, Value::Real(prob(0, 1)));
        model.insert(Var::Denom { step: 1 }, Value::Real(prob(0, 1)));
        assert_eq!(t.eval(&model), Ok(Value::Bool(false)));
    }
}
