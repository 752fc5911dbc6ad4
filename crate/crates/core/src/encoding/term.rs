//! Backend-independent constraint AST.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::rational::{format_prob, Prob};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sort {
    Bool,
    Real,
    Int,
}

/// Solver variables. Names are fixed functions of `(kind, step, index)` so
/// model values parse back unambiguously.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    /// `b_<i>_<s>`: belief in state `s` at step `i`.
    Belief { step: usize, state: usize },
    /// `u_<i>_<s>`: unnormalized posterior mass.
    Unnorm { step: usize, state: usize },
    /// `d_<i>`: normalization denominator.
    Denom { step: usize },
    /// `a_<i>`: action selector.
    Action { step: usize },
    /// `o_<i>`: observation selector.
    Observation { step: usize },
}

impl Var {
    pub fn sort(self) -> Sort {
        match self {
            Var::Belief { .. } | Var::Unnorm { .. } | Var::Denom { .. } => Sort::Real,
            Var::Action { .. } | Var::Observation { .. } => Sort::Int,
        }
    }

    pub fn step(self) -> usize {
        match self {
            Var::Belief { step, .. }
            | Var::Unnorm { step, .. }
            | Var::Denom { step }
            | Var::Action { step }
            | Var::Observation { step } => step,
        }
    }

    pub fn parse(name: &str) -> Option<Var> {
        let mut parts = name.split('_');
        let kind = parts.next()?;
        let step: usize = parts.next()?.parse().ok()?;
        let index: Option<usize> = match parts.next() {
            Some(p) => Some(p.parse().ok()?),
            None => None,
        };
        if parts.next().is_some() {
            return None;
        }
        match (kind, index) {
            ("b", Some(state)) => Some(Var::Belief { step, state }),
            ("u", Some(state)) => Some(Var::Unnorm { step, state }),
            ("d", None) => Some(Var::Denom { step }),
            ("a", None) => Some(Var::Action { step }),
            ("o", None) => Some(Var::Observation { step }),
            _ => None,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Belief { step, state } => write!(f, "b_{step}_{state}"),
            Var::Unnorm { step, state } => write!(f, "u_{step}_{state}"),
            Var::Denom { step } => write!(f, "d_{step}"),
            Var::Action { step } => write!(f, "a_{step}"),
            Var::Observation { step } => write!(f, "o_{step}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Bool(bool),
    Real(Prob),
    Int(i64),
    Var(Var),
    Add(Vec<Term>),
    Mul(Vec<Term>),
    Eq(Box<Term>, Box<Term>),
    Le(Box<Term>, Box<Term>),
    Lt(Box<Term>, Box<Term>),
    Not(Box<Term>),
    And(Vec<Term>),
    Or(Vec<Term>),
    Ite(Box<Term>, Box<Term>, Box<Term>),
}

/// A concrete value in a model.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Bool(bool),
    Real(Prob),
    Int(i64),
    /// A solver value with no rational representation, kept verbatim.
    Algebraic(String),
}

impl Value {
    pub fn as_real(&self) -> Option<&Prob> {
        match self {
            Value::Real(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }
}

pub type Assignment = BTreeMap<Var, Value>;

// Smart constructors fold constants so that ASTs stay small.
impl Term {
    pub fn var(v: Var) -> Term {
        Term::Var(v)
    }

    pub fn real(p: Prob) -> Term {
        Term::Real(p)
    }

    pub fn int(i: usize) -> Term {
        Term::Int(i as i64)
    }

    pub fn add(terms: Vec<Term>) -> Term {
        let mut constant = Prob::zero();
        let mut rest = Vec::new();
        for t in terms {
            match t {
                Term::Real(p) => constant += p,
                Term::Add(inner) => rest.extend(inner),
                other => rest.push(other),
            }
        }
        if !constant.is_zero() || rest.is_empty() {
            rest.push(Term::Real(constant));
        }
        if rest.len() == 1 {
            rest.pop().unwrap()
        } else {
            Term::Add(rest)
        }
    }

    pub fn mul(terms: Vec<Term>) -> Term {
        let mut constant = Prob::one();
        let mut rest = Vec::new();
        for t in terms {
            match t {
                Term::Real(p) => constant *= p,
                other => rest.push(other),
            }
        }
        if constant.is_zero() {
            return Term::Real(constant);
        }
        if !constant.is_one() || rest.is_empty() {
            rest.insert(0, Term::Real(constant));
        }
        if rest.len() == 1 {
            rest.pop().unwrap()
        } else {
            Term::Mul(rest)
        }
    }

    pub fn eq(lhs: Term, rhs: Term) -> Term {
        Term::Eq(Box::new(lhs), Box::new(rhs))
    }

    pub fn le(lhs: Term, rhs: Term) -> Term {
        Term::Le(Box::new(lhs), Box::new(rhs))
    }

    pub fn lt(lhs: Term, rhs: Term) -> Term {
        Term::Lt(Box::new(lhs), Box::new(rhs))
    }

    pub fn negate(t: Term) -> Term {
        match t {
            Term::Bool(b) => Term::Bool(!b),
            Term::Not(inner) => *inner,
            other => Term::Not(Box::new(other)),
        }
    }

    pub fn and(terms: Vec<Term>) -> Term {
        let mut rest = Vec::new();
        for t in terms {
            match t {
                Term::Bool(true) => {}
                Term::Bool(false) => return Term::Bool(false),
                Term::And(inner) => rest.extend(inner),
                other => rest.push(other),
            }
        }
        match rest.len() {
            0 => Term::Bool(true),
            1 => rest.pop().unwrap(),
            _ => Term::And(rest),
        }
    }

    pub fn or(terms: Vec<Term>) -> Term {
        let mut rest = Vec::new();
        for t in terms {
            match t {
                Term::Bool(false) => {}
                Term::Bool(true) => return Term::Bool(true),
                Term::Or(inner) => rest.extend(inner),
                other => rest.push(other),
            }
        }
        match rest.len() {
            0 => Term::Bool(false),
            1 => rest.pop().unwrap(),
            _ => Term::Or(rest),
        }
    }

    pub fn implies(lhs: Term, rhs: Term) -> Term {
        Term::or(vec![Term::negate(lhs), rhs])
    }

    pub fn ite(cond: Term, then: Term, otherwise: Term) -> Term {
        match cond {
            Term::Bool(true) => then,
            Term::Bool(false) => otherwise,
            _ if then == otherwise => then,
            cond => Term::Ite(Box::new(cond), Box::new(then), Box::new(otherwise)),
        }
    }

    /// Infers the sort, rejecting ill-typed terms.
    pub fn sort(&self) -> Result<Sort, String> {
        match self {
            Term::Bool(_) => Ok(Sort::Bool),
            Term::Real(_) => Ok(Sort::Real),
            Term::Int(_) => Ok(Sort::Int),
            Term::Var(v) => Ok(v.sort()),
            Term::Add(ts) | Term::Mul(ts) => {
                for t in ts {
                    if t.sort()? != Sort::Real {
                        return Err(format!("arithmetic over non-real operand `{t}`"));
                    }
                }
                Ok(Sort::Real)
            }
            Term::Eq(l, r) => {
                let (ls, rs) = (l.sort()?, r.sort()?);
                if ls != rs {
                    return Err(format!("equality between {ls:?} and {rs:?} in `{self}`"));
                }
                Ok(Sort::Bool)
            }
            Term::Le(l, r) | Term::Lt(l, r) => {
                let (ls, rs) = (l.sort()?, r.sort()?);
                if ls != rs || ls == Sort::Bool {
                    return Err(format!("comparison between {ls:?} and {rs:?} in `{self}`"));
                }
                Ok(Sort::Bool)
            }
            Term::Not(t) => {
                if t.sort()? != Sort::Bool {
                    return Err(format!("negation of non-boolean `{t}`"));
                }
                Ok(Sort::Bool)
            }
            Term::And(ts) | Term::Or(ts) => {
                for t in ts {
                    if t.sort()? != Sort::Bool {
                        return Err(format!("connective over non-boolean `{t}`"));
                    }
                }
                Ok(Sort::Bool)
            }
            Term::Ite(c, t, e) => {
                if c.sort()? != Sort::Bool {
                    return Err(format!("non-boolean condition `{c}`"));
                }
                let (ts, es) = (t.sort()?, e.sort()?);
                if ts != es {
                    return Err(format!("ite branches of sorts {ts:?} and {es:?}"));
                }
                Ok(ts)
            }
        }
    }

    pub fn free_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Term::Bool(_) | Term::Real(_) | Term::Int(_) => {}
            Term::Var(v) => {
                out.insert(*v);
            }
            Term::Add(ts) | Term::Mul(ts) | Term::And(ts) | Term::Or(ts) => ts.iter().for_each(|t| t.free_vars(out)),
            Term::Eq(l, r) | Term::Le(l, r) | Term::Lt(l, r) => {
                l.free_vars(out);
                r.free_vars(out);
            }
            Term::Not(t) => t.free_vars(out),
            Term::Ite(c, t, e) => {
                c.free_vars(out);
                t.free_vars(out);
                e.free_vars(out);
            }
        }
    }

    /// Evaluates under a total assignment of the free variables.
    pub fn eval(&self, model: &Assignment) -> Result<Value, String> {
        let real = |t: &Term| match t.eval(model)? {
            Value::Real(r) => Ok(r),
            Value::Int(i) => Ok(Prob::from_integer(i.into())),
            v => Err(format!("expected number, got {v:?}")),
        };
        let boolean = |t: &Term| match t.eval(model)? {
            Value::Bool(b) => Ok(b),
            v => Err(format!("expected boolean, got {v:?}")),
        };
        Ok(match self {
            Term::Bool(b) => Value::Bool(*b),
            Term::Real(p) => Value::Real(p.clone()),
            Term::Int(i) => Value::Int(*i),
            Term::Var(v) => model.get(v).cloned().ok_or_else(|| format!("unassigned {v}"))?,
            Term::Add(ts) => Value::Real(ts.iter().map(real).sum::<Result<Prob, _>>()?),
            Term::Mul(ts) => Value::Real(ts.iter().map(real).product::<Result<Prob, _>>()?),
            Term::Eq(l, r) => Value::Bool(l.eval(model)? == r.eval(model)?),
            Term::Le(l, r) => Value::Bool(real(l)? <= real(r)?),
            Term::Lt(l, r) => Value::Bool(real(l)? < real(r)?),
            Term::Not(t) => Value::Bool(!boolean(t)?),
            Term::And(ts) => {
                let mut all = true;
                for t in ts {
                    all &= boolean(t)?;
                }
                Value::Bool(all)
            }
            Term::Or(ts) => {
                let mut any = false;
                for t in ts {
                    any |= boolean(t)?;
                }
                Value::Bool(any)
            }
            Term::Ite(c, t, e) => {
                if boolean(c)? {
                    t.eval(model)?
                } else {
                    e.eval(model)?
                }
            }
        })
    }

    /// SMT-LIB 2 rendering.
    pub fn write_smtlib(&self, out: &mut String) {
        fn list(out: &mut String, head: &str, ts: &[Term]) {
            out.push('(');
            out.push_str(head);
            for t in ts {
                out.push(' ');
                t.write_smtlib(out);
            }
            out.push(')');
        }
        fn bin(out: &mut String, head: &str, l: &Term, r: &Term) {
            out.push('(');
            out.push_str(head);
            out.push(' ');
            l.write_smtlib(out);
            out.push(' ');
            r.write_smtlib(out);
            out.push(')');
        }
        match self {
            Term::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Term::Real(p) => write_real(out, p),
            Term::Int(i) if *i < 0 => out.push_str(&format!("(- {})", -i)),
            Term::Int(i) => out.push_str(&i.to_string()),
            Term::Var(v) => out.push_str(&v.to_string()),
            Term::Add(ts) => list(out, "+", ts),
            Term::Mul(ts) => list(out, "*", ts),
            Term::Eq(l, r) => bin(out, "=", l, r),
            Term::Le(l, r) => bin(out, "<=", l, r),
            Term::Lt(l, r) => bin(out, "<", l, r),
            Term::Not(t) => {
                out.push_str("(not ");
                t.write_smtlib(out);
                out.push(')');
            }
            Term::And(ts) => list(out, "and", ts),
            Term::Or(ts) => list(out, "or", ts),
            Term::Ite(c, t, e) => {
                out.push_str("(ite ");
                c.write_smtlib(out);
                out.push(' ');
                t.write_smtlib(out);
                out.push(' ');
                e.write_smtlib(out);
                out.push(')');
            }
        }
    }

    pub fn to_smtlib(&self) -> String {
        let mut out = String::new();
        self.write_smtlib(&mut out);
        out
    }

    /// Rough node count, for diagnostics.
    pub fn size(&self) -> usize {
        match self {
            Term::Bool(_) | Term::Real(_) | Term::Int(_) | Term::Var(_) => 1,
            Term::Add(ts) | Term::Mul(ts) | Term::And(ts) | Term::Or(ts) => {
                1 + ts.iter().map(Term::size).sum::<usize>()
            }
            Term::Eq(l, r) | Term::Le(l, r) | Term::Lt(l, r) => 1 + l.size() + r.size(),
            Term::Not(t) => 1 + t.size(),
            Term::Ite(c, t, e) => 1 + c.size() + t.size() + e.size(),
        }
    }
}

fn write_real(out: &mut String, p: &Prob) {
    let negative = p.is_negative();
    let abs = p.abs();
    if negative {
        out.push_str("(- ");
    }
    if abs.is_integer() {
        out.push_str(&format!("{}.0", abs.numer()));
    } else {
        out.push_str(&format!("(/ {}.0 {}.0)", abs.numer(), abs.denom()));
    }
    if negative {
        out.push(')');
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Real(p) => write!(f, "{}", format_prob(p)),
            other => f.write_str(&other.to_smtlib()),
        }
    }
}
