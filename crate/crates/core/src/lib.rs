//! Policy synthesis for partially observable Markov decision processes with
//! safe-reachability objectives over beliefs.
//!
//! Candidate plans are found by a satisfiability search over a bounded
//! unfolding of the belief space, completed into observation-branching
//! policies, and refuted by prefix-blocking constraints when a branch has no
//! solution. All probabilities are exact rationals.

pub mod belief;
pub mod cli;
pub mod domains;
pub mod encoding;
pub mod error;
pub mod io;
pub mod model;
pub mod objective;
pub mod plan;
pub mod policy;
pub mod rational;
pub mod solver;
pub mod synthesis;
pub mod validate;

pub use belief::{belief_update, observation_probability, Belief};
pub use domains::{build_kitchen, build_pickup_example, KitchenConfig, Problem};
pub use error::{DecodeError, ModelError, SolverError, SynthesisError};
pub use model::{Pomdp, PomdpBuilder};
pub use objective::{Comparator, LinearBeliefPredicate, SafeReachObjective};
pub use plan::{goal_index, plan_satisfies, CandidatePlan};
pub use policy::PolicyTree;
pub use rational::Prob;
pub use solver::{Backend, SatResult, SessionFactory, SmtConfig, SolverSession};
pub use synthesis::{synthesis_run, SynthesisConfig, SynthesisOutcome, SynthesisStats, Synthesizer, Verdict};
pub use validate::{simulate, validate_policy, SimulationReport, ValidationReport};
