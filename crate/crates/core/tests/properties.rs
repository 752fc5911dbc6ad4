//! Property tests over seeded random models, each checked against an
//! oracle that does not share code with the component under test.

mod common;

use bps_core::belief::{belief_update, observation_probability};
use bps_core::encoding::{Encoder, Value};
use bps_core::plan::{goal_index, plan_satisfies};
use bps_core::rational::prob;
use bps_core::solver::enumerative::EnumerativeSession;
use bps_core::solver::extract_plan;
use bps_core::synthesis::TraceEvent;
use bps_core::{
    simulate, synthesis_run, validate_policy, Backend, Belief, Prob, Problem, SatResult, SolverSession,
    SynthesisConfig, SynthesisOutcome, Verdict,
};
use num_traits::Zero;
use proptest::prelude::*;

fn enum_run(p: &Problem, h: usize, memoize: bool) -> SynthesisOutcome {
    let config = SynthesisConfig {
        horizon: h,
        memoize,
        ..SynthesisConfig::default()
    };
    synthesis_run(&p.model, &p.initial, &p.objective, &Backend::Enumerative, &config)
}

/// Session holding `Φ_k` for the problem's initial belief.
fn phi<'m>(p: &'m Problem, k: usize) -> (EnumerativeSession<'m>, Encoder<'m>) {
    let enc = Encoder::new(&p.model, &p.objective, 0);
    let mut s = EnumerativeSession::new(&p.model, &p.objective);
    s.assert(&enc.initial(&p.initial)).unwrap();
    for i in 1..=k {
        s.assert(&enc.transition(i)).unwrap();
    }
    s.assert(&enc.goal(k)).unwrap();
    (s, enc)
}

/// Every belief reachable from the initial one in at most `depth` steps.
fn reachable(p: &Problem, depth: usize) -> Vec<Belief> {
    let mut out = vec![p.initial.clone()];
    let mut frontier = out.clone();
    for _ in 0..depth {
        let mut next = Vec::new();
        for b in &frontier {
            for a in 0..p.model.num_actions() {
                for o in 0..p.model.num_observations() {
                    if let Some(n) = belief_update(b, a, o, &p.model) {
                        next.push(n);
                    }
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn observation_probabilities_sum_to_one(seed in any::<u64>()) {
        let p = common::random_problem(seed);
        for b in reachable(&p, 2) {
            for a in 0..p.model.num_actions() {
                let total: Prob = (0..p.model.num_observations())
                    .map(|o| observation_probability(&b, a, o, &p.model))
                    .sum();
                prop_assert_eq!(total, prob(1, 1));
            }
        }
    }

    #[test]
    fn update_matches_matrix_form(seed in any::<u64>()) {
        let p = common::random_problem(seed);
        let m = &p.model;
        let n = m.num_states();
        for b in reachable(&p, 2) {
            for a in 0..m.num_actions() {
                for o in 0..m.num_observations() {
                    let mut u = vec![Prob::zero(); n];
                    for (t, ut) in u.iter_mut().enumerate() {
                        for s in 0..n {
                            *ut += m.observation_prob(t, a, o) * m.transition_prob(s, a, t) * b.get(s);
                        }
                    }
                    let d: Prob = u.iter().sum();
                    match belief_update(&b, a, o, m) {
                        None => prop_assert!(d.is_zero()),
                        Some(next) => {
                            prop_assert!(next.probs().iter().all(|x| *x >= Prob::zero()));
                            prop_assert_eq!(next.probs().iter().sum::<Prob>(), prob(1, 1));
                            let expected: Vec<Prob> = u.iter().map(|x| x / &d).collect();
                            prop_assert_eq!(next.probs(), expected.as_slice());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn synthesis_matches_brute_force(seed in any::<u64>(), h in 0usize..=4) {
        let p = common::random_problem(seed);
        let out = enum_run(&p, h, false);
        let depth = common::min_depth(&p, h);
        prop_assert!(out.stats.plans_checked <= out.stats.solver_calls);
        match depth {
            None => prop_assert_eq!(out.verdict, Verdict::NoPolicyWithinBound),
            Some(d) => {
                prop_assert_eq!(out.verdict, Verdict::Valid, "{:?}", out.error);
                prop_assert_eq!(out.stats.final_horizon, Some(d));
                let policy = out.policy.unwrap();
                prop_assert!(validate_policy(&policy, &p.model, &p.objective, h).valid);
                prop_assert!(common::executes_correctly(&policy, &p.model, &p.objective, h));
                prop_assert!(policy.depth() <= d);
            }
        }
    }

    #[test]
    fn synthesis_is_deterministic(seed in any::<u64>()) {
        let p = common::random_problem(seed);
        let h = common::random_horizon(seed);
        let (a, b) = (enum_run(&p, h, false), enum_run(&p, h, false));
        let (mut sa, mut sb) = (a.stats, b.stats);
        sa.wall_time = Default::default();
        sb.wall_time = Default::default();
        prop_assert_eq!(sa, sb);
        prop_assert_eq!(a.policy, b.policy);
        prop_assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn memoization_keeps_verdict(seed in any::<u64>()) {
        let p = common::random_problem(seed);
        let h = common::random_horizon(seed);
        let (plain, memo) = (enum_run(&p, h, false), enum_run(&p, h, true));
        prop_assert_eq!(plain.verdict, memo.verdict);
        prop_assert_eq!(plain.stats.final_horizon, memo.stats.final_horizon);
        if let Some(policy) = memo.policy {
            prop_assert!(validate_policy(&policy, &p.model, &p.objective, h).valid);
        }
    }

    #[test]
    fn sat_models_satisfy_the_encoding(seed in any::<u64>(), k in 0usize..=3) {
        let p = common::random_problem(seed);
        let (mut s, enc) = phi(&p, k);
        let mut asserts = vec![enc.initial(&p.initial)];
        asserts.extend((1..=k).map(|i| enc.transition(i)));
        asserts.push(enc.goal(k));
        if let SatResult::Sat(model) = s.check().unwrap() {
            for a in &asserts {
                prop_assert_eq!(a.term.eval(&model).unwrap(), Value::Bool(true));
            }
            let plan = extract_plan(&model, &enc.vars_through(k), &p.model).unwrap();
            prop_assert!(plan.check_consistent(&p.model).is_ok());
            prop_assert!(plan_satisfies(&plan, &p.objective));
            for i in 1..=k {
                let o = plan.observation_at(i);
                prop_assert!(!observation_probability(plan.belief_at(i - 1), plan.action_at(i), o, &p.model).is_zero());
            }
        }
    }

    #[test]
    fn goal_constraint_monotone_in_horizon(seed in any::<u64>(), k in 0usize..=3) {
        let p = common::random_problem(seed);
        let sat_k = matches!(phi(&p, k).0.check().unwrap(), SatResult::Sat(_));
        let sat_next = matches!(phi(&p, k + 1).0.check().unwrap(), SatResult::Sat(_));
        prop_assert!(!sat_k || sat_next);
    }

    #[test]
    fn popped_scope_has_no_effect(seed in any::<u64>(), k in 1usize..=3, fail in 0usize..3) {
        let p = common::random_problem(seed);
        let (mut s, enc) = phi(&p, k);
        let before = s.check().unwrap();
        let SatResult::Sat(model) = &before else { return Ok(()) };
        let plan = extract_plan(model, &enc.vars_through(k), &p.model).unwrap();
        s.push().unwrap();
        s.assert(&enc.blocking(&plan, 1 + fail % k)).unwrap();
        let blocked = s.check().unwrap();
        if let SatResult::Sat(other) = &blocked {
            let alt = extract_plan(other, &enc.vars_through(k), &p.model).unwrap();
            let f = 1 + fail % k;
            let same_prefix = (1..=f).all(|i| alt.action_at(i) == plan.action_at(i))
                && (1..f).all(|i| alt.observation_at(i) == plan.observation_at(i));
            prop_assert!(!same_prefix);
        }
        s.pop().unwrap();
        prop_assert_eq!(s.check().unwrap(), before);
        prop_assert_eq!(s.depth(), 0);
    }

    #[test]
    fn no_blocked_prefix_reappears_within_a_horizon(seed in any::<u64>()) {
        let p = common::random_problem(seed);
        let out = enum_run(&p, common::random_horizon(seed), false);
        let mut blocked: Vec<(u64, usize, bps_core::CandidatePlan, usize)> = Vec::new();
        for event in &out.trace {
            match event {
                TraceEvent::Blocked { session, horizon, plan, fail_step } => {
                    blocked.push((*session, *horizon, plan.clone(), *fail_step));
                }
                TraceEvent::Popped { session, horizon } => {
                    blocked.retain(|(s, h, _, _)| (s, h) != (session, horizon));
                }
                TraceEvent::Candidate { session, horizon, plan } => {
                    for (s, h, prior, f) in &blocked {
                        if (s, h) != (session, horizon) || plan.end_step() < *f {
                            continue;
                        }
                        let shares = (prior.start_step + 1..=*f).all(|i| plan.action_at(i) == prior.action_at(i))
                            && (prior.start_step + 1..*f).all(|i| plan.observation_at(i) == prior.observation_at(i));
                        prop_assert!(!shares, "candidate repeats a blocked prefix");
                    }
                }
                TraceEvent::Unsat { .. } => {}
            }
        }
    }

    #[test]
    fn simulated_beliefs_stay_safe_until_goal(seed in any::<u64>()) {
        let p = common::random_problem(seed);
        let h = common::random_horizon(seed);
        let Some(policy) = enum_run(&p, h, false).policy else { return Ok(()) };
        let report = simulate(&policy, &p.model, &p.objective, 50, seed, 50);
        for trace in &report.traces {
            let mut b = policy.belief.clone();
            for (&a, &o) in trace.actions.iter().zip(&trace.observations) {
                if p.objective.is_goal(&b) {
                    break;
                }
                prop_assert!(p.objective.is_safe(&b));
                b = belief_update(&b, a, o, &p.model).expect("sampled observation is possible");
            }
            prop_assert!(p.objective.is_goal(&b));
        }
    }
}

#[test]
fn goal_index_truncation_keeps_satisfaction() {
    for seed in 0..64 {
        let p = common::random_problem(seed);
        let (mut s, enc) = phi(&p, 3);
        if let SatResult::Sat(model) = s.check().unwrap() {
            let mut plan = extract_plan(&model, &enc.vars_through(3), &p.model).unwrap();
            let end = goal_index(&plan, &p.objective).unwrap();
            plan.truncate_to(end);
            assert!(plan_satisfies(&plan, &p.objective));
            assert_eq!(goal_index(&plan, &p.objective), Some(end));
        }
    }
}
