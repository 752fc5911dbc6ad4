//! The three-state pick-up decision: left hand is likelier to grab the cup
//! but its failure observation leaves the robot too uncertain.

use crate::belief::Belief;
use crate::model::Pomdp;
use crate::objective::{above, below, SafeReachObjective};
use crate::rational::prob;

use super::Problem;

pub const READY: &str = "s_ready";
pub const UNSAFE: &str = "s_unsafe";
pub const GOAL: &str = "s_goal";

/// States `(s_ready, s_unsafe, s_goal)`, actions `(a_L, a_R)`,
/// observations `(o_pos, o_neg)`. The unsafe and goal states are absorbing.
/// Goal: `b(s_goal) > 4/5`; safe: `b(s_unsafe) < 1/5`.
pub fn build_pickup_example() -> Problem {
    let (pos, neg) = ("o_pos", "o_neg");
    let mut b = Pomdp::builder([READY, UNSAFE, GOAL], ["a_L", "a_R"], [pos, neg])
        .transition(READY, "a_L", UNSAFE, prob(1, 10))
        .transition(READY, "a_L", GOAL, prob(9, 10))
        .transition(READY, "a_R", READY, prob(1, 20))
        .transition(READY, "a_R", UNSAFE, prob(1, 10))
        .transition(READY, "a_R", GOAL, prob(17, 20));
    for a in ["a_L", "a_R"] {
        b = b
            .transition(UNSAFE, a, UNSAFE, prob(1, 1))
            .transition(GOAL, a, GOAL, prob(1, 1));
    }
    // Observation probabilities label the edges into each successor.
    b = b
        .observation(UNSAFE, "a_L", pos, prob(3, 10))
        .observation(UNSAFE, "a_L", neg, prob(7, 10))
        .observation(GOAL, "a_L", pos, prob(4, 5))
        .observation(GOAL, "a_L", neg, prob(1, 5))
        // Never a successor under a_L.
        .observation(READY, "a_L", pos, prob(4, 5))
        .observation(READY, "a_L", neg, prob(1, 5));
    for s in [READY, UNSAFE, GOAL] {
        b = b
            .observation(s, "a_R", pos, prob(4, 5))
            .observation(s, "a_R", neg, prob(1, 5));
    }
    let model = b.build().expect("pick-up model is well formed");
    let objective = SafeReachObjective::new(vec![above(vec![2], prob(4, 5))], vec![below(vec![1], prob(1, 5))]);
    Problem {
        name: "pickup".into(),
        initial: Belief::point(3, 0),
        model,
        objective,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{belief_update, observation_distribution};

    #[test]
    fn left_positive_posterior() {
        let ex = build_pickup_example();
        let b = belief_update(&ex.initial, 0, 0, &ex.model).unwrap();
        assert_eq!(b.probs(), &[prob(0, 1), prob(1, 25), prob(24, 25)]);
    }

    #[test]
    fn right_hand_observations() {
        let ex = build_pickup_example();
        for s in 0..3 {
            assert_eq!(ex.model.observation_dist(s, 1), &[prob(4, 5), prob(1, 5)]);
        }
        assert_eq!(
            observation_distribution(&ex.initial, 1, &ex.model),
            vec![prob(4, 5), prob(1, 5)]
        );
    }

    #[test]
    fn goal_is_safe() {
        assert!(build_pickup_example().objective.goal_within_safe());
    }
}
