//! Incremental satisfiability backends with push/pop scopes.

pub mod differential;
pub mod enumerative;
pub mod sexp;
pub mod smtlib;

use crate::belief::{belief_update, Belief};
use crate::encoding::{Assertion, Assignment, StepVars, Value, Var};
use crate::error::{DecodeError, SolverError};
use crate::model::Pomdp;
use crate::objective::SafeReachObjective;
use crate::plan::CandidatePlan;
use crate::rational::{format_prob, Prob};

pub use differential::DifferentialSession;
pub use enumerative::EnumerativeSession;
pub use smtlib::{SmtConfig, SmtSession};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult {
    Sat(Assignment),
    Unsat,
    Unknown(String),
}

impl SatResult {
    pub fn verdict(&self) -> &'static str {
        match self {
            SatResult::Sat(_) => "sat",
            SatResult::Unsat => "unsat",
            SatResult::Unknown(_) => "unknown",
        }
    }
}

/// A stack of assertion frames. The bottom frame is permanent.
pub trait SolverSession {
    fn push(&mut self) -> Result<(), SolverError>;
    fn pop(&mut self) -> Result<(), SolverError>;
    fn assert(&mut self, assertion: &Assertion) -> Result<(), SolverError>;
    fn check(&mut self) -> Result<SatResult, SolverError>;
    /// Number of open `push` frames.
    fn depth(&self) -> usize;
}

/// Opens one session per synthesis problem.
pub trait SessionFactory {
    fn open<'m>(
        &self,
        model: &'m Pomdp,
        objective: &'m SafeReachObjective,
    ) -> Result<Box<dyn SolverSession + 'm>, SolverError>;

    fn name(&self) -> String;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Backend {
    Enumerative,
    SmtLib(SmtConfig),
    /// Runs the external solver and checks every verdict against the
    /// enumerative backend.
    Differential(SmtConfig),
}

impl Backend {
    pub fn incremental(&self) -> bool {
        match self {
            Backend::Enumerative => true,
            Backend::SmtLib(c) | Backend::Differential(c) => c.incremental,
        }
    }
}

impl SessionFactory for Backend {
    fn open<'m>(
        &self,
        model: &'m Pomdp,
        objective: &'m SafeReachObjective,
    ) -> Result<Box<dyn SolverSession + 'm>, SolverError> {
        Ok(match self {
            Backend::Enumerative => Box::new(EnumerativeSession::new(model, objective)),
            Backend::SmtLib(config) => Box::new(SmtSession::new(config.clone())?),
            Backend::Differential(config) => Box::new(DifferentialSession::new(
                Box::new(SmtSession::new(config.clone())?),
                Box::new(EnumerativeSession::new(model, objective)),
            )),
        })
    }

    fn name(&self) -> String {
        match self {
            Backend::Enumerative => "enum".into(),
            Backend::SmtLib(_) => "smtlib".into(),
            Backend::Differential(_) => "diff".into(),
        }
    }
}

fn real_value(model: &Assignment, v: Var) -> Result<Prob, DecodeError> {
    match model.get(&v) {
        Some(Value::Real(p)) => Ok(p.clone()),
        Some(Value::Int(i)) => Ok(Prob::from_integer((*i).into())),
        Some(Value::Algebraic(text)) => Err(DecodeError {
            step: v.step(),
            msg: format!("{v} has irrational value {text}"),
        }),
        Some(Value::Bool(_)) => Err(DecodeError {
            step: v.step(),
            msg: format!("{v} is boolean"),
        }),
        None => Err(DecodeError {
            step: v.step(),
            msg: format!("{v} is unassigned"),
        }),
    }
}

fn index_value(model: &Assignment, v: Var, bound: usize) -> Result<usize, DecodeError> {
    let raw = match model.get(&v) {
        Some(Value::Int(i)) => *i,
        other => {
            return Err(DecodeError {
                step: v.step(),
                msg: format!("{v} has non-integer value {other:?}"),
            })
        }
    };
    usize::try_from(raw)
        .ok()
        .filter(|&i| i < bound)
        .ok_or_else(|| DecodeError {
            step: v.step(),
            msg: format!("{v} = {raw} outside 0..{bound}"),
        })
}

fn decode_belief(model: &Assignment, vars: &StepVars) -> Result<Belief, DecodeError> {
    let probs = vars
        .belief_vars
        .iter()
        .map(|&v| real_value(model, v))
        .collect::<Result<Vec<_>, _>>()?;
    Belief::new(probs).map_err(|msg| DecodeError { step: vars.step, msg })
}

/// Decodes a Sat model over `vars` (steps `s..=k`) into a candidate plan and
/// re-checks every belief against the exact update.
pub fn extract_plan(model: &Assignment, vars: &[StepVars], m: &Pomdp) -> Result<CandidatePlan, DecodeError> {
    let first = vars.first().ok_or_else(|| DecodeError {
        step: 0,
        msg: "no step variables".into(),
    })?;
    let mut plan = CandidatePlan::empty(first.step, decode_belief(model, first)?);
    for step in &vars[1..] {
        let (Some(a_var), Some(o_var)) = (step.action_var, step.observation_var) else {
            return Err(DecodeError {
                step: step.step,
                msg: "missing selector variables".into(),
            });
        };
        let a = index_value(model, a_var, m.num_actions())?;
        let o = index_value(model, o_var, m.num_observations())?;
        let claimed = decode_belief(model, step)?;
        let prev = plan.beliefs.last().expect("non-empty plan");
        if !prev.allows(m, a) {
            return Err(DecodeError {
                step: step.step,
                msg: format!("action {} is not available in {prev}", m.action_name(a)),
            });
        }
        let exact = belief_update(prev, a, o, m).ok_or_else(|| DecodeError {
            step: step.step,
            msg: format!(
                "observation {} is impossible after {}",
                m.observation_name(o),
                m.action_name(a)
            ),
        })?;
        if exact != claimed {
            let diff: Vec<String> = exact
                .probs()
                .iter()
                .zip(claimed.probs())
                .map(|(e, c)| format_prob(&(e - c)))
                .filter(|d| d != "0")
                .collect();
            return Err(DecodeError {
                step: step.step,
                msg: format!("solver belief {claimed} differs from exact update {exact} (deltas {diff:?})"),
            });
        }
        plan.push(a, o, exact);
    }
    Ok(plan)
}
