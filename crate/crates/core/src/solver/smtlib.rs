//! External SMT solver driven over the SMT-LIB 2 text protocol.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use num_traits::Zero;

use super::sexp::{self, paren_balance, Sexp};
use super::{SatResult, SolverSession};
use crate::encoding::{Assertion, Assignment, Sort, Value, Var};
use crate::error::SolverError;
use crate::rational::{parse_prob, Prob};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmtConfig {
    /// Program and arguments; the solver must read commands from stdin.
    pub command: Vec<String>,
    pub timeout: Duration,
    /// When false, every check replays all live assertions into a fresh
    /// solver process.
    pub incremental: bool,
    pub seed: Option<u64>,
    pub logic: String,
    /// Lower every sat model to the lexicographically least selector
    /// sequence `(a_1, o_1, a_2, o_2, ...)`, so candidates do not depend on
    /// solver state or mode.
    pub canonical: bool,
    /// Appends every command sent to any solver process to this file.
    pub transcript: Option<PathBuf>,
}

impl Default for SmtConfig {
    fn default() -> Self {
        Self {
            command: vec!["z3".into(), "-in".into()],
            timeout: Duration::from_secs(60),
            incremental: true,
            seed: None,
            logic: "QF_NIRA".into(),
            canonical: true,
            transcript: None,
        }
    }
}

impl SmtConfig {
    /// Splits a command line such as `"z3 -in"` on whitespace.
    pub fn with_command_line(mut self, line: &str) -> Result<Self, String> {
        let command: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        if command.is_empty() {
            return Err("empty solver command".into());
        }
        self.command = command;
        Ok(self)
    }

    fn preamble(&self) -> String {
        let mut out = String::from("(set-option :print-success false)\n(set-option :produce-models true)\n");
        if let Some(seed) = self.seed {
            out.push_str(&format!("(set-option :random-seed {seed})\n"));
        }
        out.push_str(&format!("(set-logic {})\n", self.logic));
        out
    }
}

struct Process {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
    log: Option<File>,
}

impl Process {
    fn spawn(config: &SmtConfig) -> Result<Self, SolverError> {
        let (program, args) = config
            .command
            .split_first()
            .ok_or_else(|| SolverError::Process("empty solver command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| SolverError::Process(format!("cannot start `{}`: {e}", config.command.join(" "))))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let log = match &config.transcript {
            Some(path) => {
                let mut file = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| SolverError::Process(format!("cannot open transcript {}: {e}", path.display())))?;
                let _ = writeln!(file, "; new solver process");
                Some(file)
            }
            None => None,
        };
        let mut process = Self {
            child,
            stdin,
            lines,
            log,
        };
        process.send(&config.preamble())?;
        Ok(process)
    }

    fn send(&mut self, text: &str) -> Result<(), SolverError> {
        if let Some(log) = &mut self.log {
            let _ = log.write_all(text.as_bytes());
        }
        self.stdin
            .write_all(text.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| SolverError::Process(format!("write to solver failed: {e}")))
    }

    /// Reads one complete s-expression or atom. `Ok(None)` on timeout.
    fn read_response(&mut self, deadline: Instant) -> Result<Option<String>, String> {
        let mut text = String::new();
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(remaining) {
                Ok(line) => {
                    if !text.is_empty() {
                        text.push('\n');
                    }
                    text.push_str(&line);
                    if !text.trim().is_empty() && paren_balance(&text) <= 0 {
                        return Ok(Some(text.trim().to_string()));
                    }
                }
                Err(RecvTimeoutError::Timeout) => return Ok(None),
                Err(RecvTimeoutError::Disconnected) => {
                    let status = self.child.try_wait().ok().flatten();
                    return Err(match status {
                        Some(status) => format!("solver exited ({status})"),
                        None => "solver closed its output".to_string(),
                    });
                }
            }
        }
    }

    fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for Process {
    fn drop(&mut self) {
        let _ = self.send("(exit)\n");
        self.kill();
    }
}

#[derive(Debug, Default)]
struct Frame {
    commands: Vec<String>,
    declared: Vec<Var>,
}

/// One solver process (or, in non-incremental mode, a replay log) with a
/// scope stack mirrored on our side so declarations follow push/pop.
pub struct SmtSession {
    config: SmtConfig,
    process: Option<Process>,
    frames: Vec<Frame>,
    declared: BTreeSet<Var>,
    dead: bool,
}

impl SmtSession {
    pub fn new(config: SmtConfig) -> Result<Self, SolverError> {
        let process = if config.incremental {
            Some(Process::spawn(&config)?)
        } else {
            None
        };
        Ok(Self {
            config,
            process,
            frames: vec![Frame::default()],
            declared: BTreeSet::new(),
            dead: false,
        })
    }

    fn alive(&self) -> Result<(), SolverError> {
        if self.dead {
            Err(SolverError::Dead)
        } else {
            Ok(())
        }
    }

    fn send(&mut self, text: &str) -> Result<(), SolverError> {
        if let Some(process) = &mut self.process {
            if let Err(e) = process.send(text) {
                self.dead = true;
                return Err(e);
            }
        }
        Ok(())
    }

    fn replay_script(&self) -> String {
        let mut script = String::new();
        for frame in &self.frames {
            for command in &frame.commands {
                script.push_str(command);
            }
        }
        script
    }

    /// Gives up on `process` after a timeout or crash. An incremental session
    /// cannot recover its solver state, so it becomes dead.
    fn abandon(&mut self, process: &mut Process, reason: String) -> SatResult {
        process.kill();
        self.dead = self.config.incremental;
        SatResult::Unknown(reason)
    }

    fn run_check(&mut self, process: &mut Process) -> Result<SatResult, SolverError> {
        let deadline = Instant::now() + self.config.timeout;
        process.send("(check-sat)\n")?;
        let verdict = match process.read_response(deadline) {
            Ok(Some(text)) => text,
            Ok(None) => return Ok(self.abandon(process, format!("timeout after {:?}", self.config.timeout))),
            Err(reason) => return Ok(self.abandon(process, reason)),
        };
        match verdict.as_str() {
            "sat" => {}
            "unsat" => return Ok(SatResult::Unsat),
            "unknown" => return Ok(SatResult::Unknown("solver returned unknown".into())),
            other => {
                self.dead = true;
                return Err(SolverError::Protocol(format!(
                    "unexpected check-sat response `{other}`"
                )));
            }
        }
        let vars: Vec<Var> = self.declared.iter().copied().collect();
        if vars.is_empty() {
            return Ok(SatResult::Sat(Assignment::new()));
        }
        let names: Vec<String> = vars.iter().map(Var::to_string).collect();
        process.send(&format!("(get-value ({}))\n", names.join(" ")))?;
        let response = match process.read_response(deadline) {
            Ok(Some(text)) => text,
            Ok(None) => return Ok(self.abandon(process, "timeout while reading model".into())),
            Err(reason) => return Ok(self.abandon(process, reason)),
        };
        match parse_values(&response, &self.declared) {
            Ok(model) => Ok(SatResult::Sat(model)),
            Err(e) => {
                self.dead = true;
                Err(SolverError::Protocol(e))
            }
        }
    }
    /// Checks the live assertions plus `extra`, which is scoped to this
    /// check only.
    fn check_with(&mut self, extra: &str) -> Result<SatResult, SolverError> {
        self.alive()?;
        let result = if self.config.incremental {
            let mut process = self.process.take().ok_or(SolverError::Dead)?;
            let scoped = !extra.is_empty();
            let result = (|| {
                if scoped {
                    process.send(&format!("(push 1)\n{extra}"))?;
                }
                let result = self.run_check(&mut process)?;
                if scoped && !self.dead {
                    process.send("(pop 1)\n")?;
                }
                Ok(result)
            })();
            if result.is_ok() && !self.dead {
                self.process = Some(process);
            }
            result
        } else {
            let mut process = Process::spawn(&self.config)?;
            process.send(&self.replay_script())?;
            process.send(extra)?;
            self.run_check(&mut process)
        };
        if result.is_err() {
            self.dead = true;
        }
        result
    }

    /// Fixes selectors one at a time to their least satisfiable value.
    fn canonicalize(&mut self, mut model: Assignment) -> Result<SatResult, SolverError> {
        let mut selectors: Vec<Var> = self
            .declared
            .iter()
            .copied()
            .filter(|v| v.sort() == Sort::Int)
            .collect();
        selectors.sort_by_key(|v| (v.step(), matches!(v, Var::Observation { .. })));
        let mut fixed = String::new();
        for var in selectors {
            let current = match model.get(&var) {
                Some(Value::Int(n)) => *n,
                other => return Err(SolverError::Protocol(format!("selector {var} has value {other:?}"))),
            };
            for v in 0..current {
                let probe = format!("{fixed}(assert (= {var} {v}))\n");
                match self.check_with(&probe)? {
                    SatResult::Sat(lower) => {
                        model = lower;
                        break;
                    }
                    SatResult::Unsat => {}
                    unknown @ SatResult::Unknown(_) => return Ok(unknown),
                }
            }
            let value = match model.get(&var) {
                Some(Value::Int(n)) => *n,
                other => return Err(SolverError::Protocol(format!("selector {var} has value {other:?}"))),
            };
            fixed.push_str(&format!("(assert (= {var} {value}))\n"));
        }
        Ok(SatResult::Sat(model))
    }
}

impl SolverSession for SmtSession {
    fn push(&mut self) -> Result<(), SolverError> {
        self.alive()?;
        self.send("(push 1)\n")?;
        self.frames.push(Frame::default());
        Ok(())
    }

    fn pop(&mut self) -> Result<(), SolverError> {
        self.alive()?;
        if self.frames.len() <= 1 {
            return Err(SolverError::EmptyStack);
        }
        self.send("(pop 1)\n")?;
        let frame = self.frames.pop().expect("checked depth");
        for v in frame.declared {
            self.declared.remove(&v);
        }
        Ok(())
    }

    fn assert(&mut self, assertion: &Assertion) -> Result<(), SolverError> {
        self.alive()?;
        match assertion.term.sort() {
            Ok(Sort::Bool) => {}
            Ok(other) => return Err(SolverError::Sort(format!("assertion has sort {other:?}"))),
            Err(e) => return Err(SolverError::Sort(e)),
        }
        let mut vars = BTreeSet::new();
        assertion.term.free_vars(&mut vars);
        let mut text = String::new();
        let mut fresh = Vec::new();
        for v in vars {
            if self.declared.insert(v) {
                let sort = match v.sort() {
                    Sort::Real => "Real",
                    Sort::Int => "Int",
                    Sort::Bool => "Bool",
                };
                text.push_str(&format!("(declare-const {v} {sort})\n"));
                fresh.push(v);
            }
        }
        text.push_str("(assert ");
        assertion.term.write_smtlib(&mut text);
        text.push_str(")\n");
        let frame = self.frames.last_mut().expect("base frame");
        frame.declared.extend(fresh);
        frame.commands.push(text.clone());
        self.send(&text)
    }

    fn check(&mut self) -> Result<SatResult, SolverError> {
        let result = self.check_with("")?;
        match result {
            SatResult::Sat(model) if self.config.canonical => self.canonicalize(model),
            other => Ok(other),
        }
    }

    fn depth(&self) -> usize {
        self.frames.len() - 1
    }
}

fn parse_values(text: &str, declared: &BTreeSet<Var>) -> Result<Assignment, String> {
    if text.starts_with("(error") {
        return Err(format!("solver error: {text}"));
    }
    let parsed = sexp::parse(text)?;
    let pairs = parsed
        .as_list()
        .ok_or_else(|| format!("get-value response is not a list: {text}"))?;
    let mut model = Assignment::new();
    for pair in pairs {
        let [name, value] = pair.as_list().ok_or("malformed get-value pair")? else {
            return Err(format!("malformed get-value pair `{pair}`"));
        };
        let name = name.as_atom().ok_or("non-symbol in get-value")?;
        let var = Var::parse(name).ok_or_else(|| format!("unknown variable `{name}` in model"))?;
        let value = match var.sort() {
            Sort::Int => Value::Int(parse_int(value).ok_or_else(|| format!("{var}: bad integer `{value}`"))?),
            Sort::Real => match parse_real(value) {
                Some(p) => Value::Real(p),
                None => Value::Algebraic(value.to_string()),
            },
            Sort::Bool => match value.as_atom() {
                Some("true") => Value::Bool(true),
                Some("false") => Value::Bool(false),
                _ => return Err(format!("{var}: bad boolean `{value}`")),
            },
        };
        model.insert(var, value);
    }
    if let Some(missing) = declared.iter().find(|v| !model.contains_key(v)) {
        return Err(format!("model omits {missing}"));
    }
    Ok(model)
}

fn parse_int(value: &Sexp) -> Option<i64> {
    match value {
        Sexp::Atom(a) => a.parse().ok(),
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(minus), inner] if minus == "-" => parse_int(inner).map(|i| -i),
            _ => None,
        },
    }
}

/// Exact value of a numeral, decimal, `(- x)` or `(/ x y)`; `None` for
/// anything else (e.g. algebraic numbers).
fn parse_real(value: &Sexp) -> Option<Prob> {
    match value {
        Sexp::Atom(a) => parse_prob(a).ok(),
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(op), inner] if op == "-" => parse_real(inner).map(|p| -p),
            [Sexp::Atom(op), num, den] if op == "/" => {
                let den = parse_real(den)?;
                if den.is_zero() {
                    return None;
                }
                Some(parse_real(num)? / den)
            }
            _ => None,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::prob;

    #[test]
    fn parses_values_exactly() {
        let declared: BTreeSet<Var> = [
            Var::Belief { step: 1, state: 1 },
            Var::Action { step: 1 },
            Var::Denom { step: 1 },
        ]
        .into_iter()
        .collect();
        let model = parse_values("((b_1_1 (/ 1.0 25.0))\n (a_1 1)\n (d_1 (- 0.5)))", &declared).unwrap();
        assert_eq!(model[&Var::Belief { step: 1, state: 1 }], Value::Real(prob(1, 25)));
        assert_eq!(model[&Var::Action { step: 1 }], Value::Int(1));
        assert_eq!(model[&Var::Denom { step: 1 }], Value::Real(prob(-1, 2)));
    }

    #[test]
    fn keeps_algebraic_values_verbatim() {
        let declared: BTreeSet<Var> = [Var::Denom { step: 2 }].into_iter().collect();
        let model = parse_values("((d_2 (root-obj (+ (^ x 2) (- 2)) 2)))", &declared).unwrap();
        assert!(matches!(model[&Var::Denom { step: 2 }], Value::Algebraic(_)));
    }

    #[test]
    fn rejects_incomplete_models() {
        let declared: BTreeSet<Var> = [Var::Denom { step: 2 }, Var::Action { step: 2 }].into_iter().collect();
        assert!(parse_values("((d_2 1.0))", &declared).is_err());
        assert!(parse_values("(error \"boom\")", &declared).is_err());
    }

    #[test]
    fn command_line_split() {
        let c = SmtConfig::default()
            .with_command_line("cvc5 --lang smt2 --incremental")
            .unwrap();
        assert_eq!(c.command.len(), 4);
        assert!(SmtConfig::default().with_command_line("  ").is_err());
    }
}
