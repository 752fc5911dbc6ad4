//! Runs two backends in lockstep and fails on any verdict disagreement.

use super::{SatResult, SolverSession};
use crate::encoding::Assertion;
use crate::error::SolverError;

pub struct DifferentialSession<'m> {
    primary: Box<dyn SolverSession + 'm>,
    oracle: Box<dyn SolverSession + 'm>,
    checks: u64,
}

impl<'m> DifferentialSession<'m> {
    pub fn new(primary: Box<dyn SolverSession + 'm>, oracle: Box<dyn SolverSession + 'm>) -> Self {
        Self {
            primary,
            oracle,
            checks: 0,
        }
    }
}

impl SolverSession for DifferentialSession<'_> {
    fn push(&mut self) -> Result<(), SolverError> {
        self.primary.push()?;
        self.oracle.push()
    }

    fn pop(&mut self) -> Result<(), SolverError> {
        self.primary.pop()?;
        self.oracle.pop()
    }

    fn assert(&mut self, assertion: &Assertion) -> Result<(), SolverError> {
        self.primary.assert(assertion)?;
        self.oracle.assert(assertion)
    }

    /// Returns the primary result. An unknown from the primary is passed
    /// through without comparison.
    fn check(&mut self) -> Result<SatResult, SolverError> {
        self.checks += 1;
        let primary = self.primary.check()?;
        if matches!(primary, SatResult::Unknown(_)) {
            return Ok(primary);
        }
        let oracle = self.oracle.check()?;
        if primary.verdict() != oracle.verdict() {
            return Err(SolverError::Disagreement {
                check: self.checks,
                primary: primary.verdict().into(),
                oracle: oracle.verdict().into(),
            });
        }
        Ok(primary)
    }

    fn depth(&self) -> usize {
        self.primary.depth()
    }
}
