//! Shared fixtures: seeded random models and brute-force oracles that do not
//! go through the synthesis code.

#![allow(dead_code)]

use bps_core::belief::{belief_update, observation_probability};
use bps_core::objective::{below, Comparator, LinearBeliefPredicate};
use bps_core::rational::prob;
use bps_core::{Belief, PolicyTree, Pomdp, Problem, SafeReachObjective};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random distribution over `n` outcomes with support of size at most
/// `max_support` and small denominators.
fn random_dist(rng: &mut ChaCha8Rng, n: usize, max_support: usize) -> Vec<bps_core::Prob> {
    let k = rng.gen_range(1..=max_support.min(n));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let weights: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=4)).collect();
    let total: i64 = weights.iter().sum();
    let mut out = vec![prob(0, 1); n];
    for (i, w) in idx.into_iter().take(k).zip(weights) {
        out[i] = prob(w, total);
    }
    out
}

/// Random problem with `|S| ≤ 5`, `|A| ≤ 3`, `|O| ≤ 2`. The last state is
/// the goal; with three or more states the one before it is unsafe.
pub fn random_problem(seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ns = rng.gen_range(2..=5);
    let na = rng.gen_range(1..=3);
    let no = rng.gen_range(1..=2);
    let states: Vec<String> = (0..ns).map(|i| format!("s{i}")).collect();
    let actions: Vec<String> = (0..na).map(|i| format!("a{i}")).collect();
    let observations: Vec<String> = (0..no).map(|i| format!("o{i}")).collect();
    let mut b = Pomdp::builder(states, actions, observations);
    let goal = ns - 1;
    let absorbing_goal = rng.gen_bool(0.5);
    for s in 0..ns {
        for a in 0..na {
            let row = if s == goal && absorbing_goal {
                let mut row = vec![prob(0, 1); ns];
                row[goal] = prob(1, 1);
                row
            } else {
                random_dist(&mut rng, ns, 2)
            };
            for (t, p) in row.into_iter().enumerate() {
                b.add_transition_index(s, a, t, p);
            }
            for (o, p) in random_dist(&mut rng, no, 2).into_iter().enumerate() {
                b.add_observation_index(s, a, o, p);
            }
        }
    }
    if na > 1 && rng.gen_bool(0.25) {
        let s = rng.gen_range(0..ns);
        let mut row = vec![true; na];
        row[rng.gen_range(0..na)] = false;
        b.set_availability_index(s, row);
    }
    let model = b.build().expect("random model is well formed");

    let threshold = [prob(1, 2), prob(3, 4), prob(9, 10), prob(1, 1)][rng.gen_range(0..4)].clone();
    let goal_pred = if rng.gen_bool(0.5) {
        LinearBeliefPredicate::new(vec![goal], Comparator::Ge, threshold).unwrap()
    } else {
        LinearBeliefPredicate::new(vec![goal], Comparator::Gt, threshold.clone() * prob(9, 10)).unwrap()
    };
    let safe = if ns >= 3 {
        let bound = [prob(1, 4), prob(1, 2), prob(1, 1)][rng.gen_range(0..3)].clone();
        vec![below(vec![ns - 2], bound)]
    } else {
        Vec::new()
    };
    let initial = if ns > 2 && rng.gen_bool(0.3) {
        Belief::uniform_over(ns, &[0, 1])
    } else {
        Belief::point(ns, 0)
    };
    Problem {
        name: format!("random-{seed}"),
        model,
        initial,
        objective: SafeReachObjective::new(vec![goal_pred], safe),
    }
}

/// Horizon bound for a random problem, in `1..=4`.
pub fn random_horizon(seed: u64) -> usize {
    1 + (seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) >> 62) as usize
}

/// AND-OR search: is there a policy reaching the goal from `b` within
/// `steps` actions on every branch, with every belief before the goal safe?
pub fn solvable(m: &Pomdp, obj: &SafeReachObjective, b: &Belief, steps: usize) -> bool {
    if obj.is_goal(b) {
        return true;
    }
    if !obj.is_safe(b) || steps == 0 {
        return false;
    }
    (0..m.num_actions()).filter(|&a| b.allows(m, a)).any(|a| {
        (0..m.num_observations()).all(|o| match belief_update(b, a, o, m) {
            None => true,
            Some(next) => solvable(m, obj, &next, steps - 1),
        })
    })
}

/// Least depth `≤ h` of a valid policy, by brute force.
pub fn min_depth(p: &Problem, h: usize) -> Option<usize> {
    (0..=h).find(|&d| solvable(&p.model, &p.objective, &p.initial, d))
}

/// Re-executes the actions of `tree` from its root belief, recomputing every
/// posterior, and reports whether each branch reaches the goal safely within
/// `h` steps, safe before it. Stored beliefs are ignored.
pub fn executes_correctly(tree: &PolicyTree, m: &Pomdp, obj: &SafeReachObjective, h: usize) -> bool {
    fn go(node: &PolicyTree, b: &Belief, m: &Pomdp, obj: &SafeReachObjective, left: usize) -> bool {
        if obj.is_goal(b) {
            return true;
        }
        let Some(a) = node.action else {
            return false;
        };
        if !obj.is_safe(b) || left == 0 || !b.allows(m, a) {
            return false;
        }
        (0..m.num_observations()).all(|o| {
            if observation_probability(b, a, o, m) == prob(0, 1) {
                return true;
            }
            let next = belief_update(b, a, o, m).expect("positive probability");
            match node.children.get(&o) {
                Some(child) => go(child, &next, m, obj, left - 1),
                None => false,
            }
        })
    }
    go(tree, &tree.belief, m, obj, h)
}

/// Every single-action mutation of `tree`, as `(path, new action, tree)`.
pub fn action_mutations(tree: &PolicyTree, num_actions: usize) -> Vec<(Vec<usize>, usize, PolicyTree)> {
    let mut out = Vec::new();
    for path in tree.internal_paths() {
        let current = tree.node_at(&path).and_then(|n| n.action).expect("internal node");
        for a in (0..num_actions).filter(|&a| a != current) {
            let mut mutated = tree.clone();
            mutated.node_at_mut(&path).expect("path exists").action = Some(a);
            out.push((path.clone(), a, mutated));
        }
    }
    out
}
