//! File formats: JSON models, objectives, policies and plans (rationals as
//! `"p/q"` strings), DOT export of policy trees, and the stats CSV.

use std::collections::BTreeMap;
use std::io::Write;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value as Json};

use crate::belief::Belief;
use crate::domains::Problem;
use crate::model::Pomdp;
use crate::objective::{LinearBeliefPredicate, SafeReachObjective};
use crate::plan::CandidatePlan;
use crate::policy::PolicyTree;
use crate::rational::{format_prob, parse_prob, Prob};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{file}: JSON syntax error at line {line}, column {column}: {msg}")]
    Syntax {
        file: String,
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("{file}: {at}: {msg}")]
    Invalid { file: String, at: String, msg: String },
}

fn syntax(file: &str, e: serde_json::Error) -> FormatError {
    FormatError::Syntax {
        file: file.to_string(),
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    }
}

fn invalid(file: &str, at: impl Into<String>, msg: impl Into<String>) -> FormatError {
    FormatError::Invalid {
        file: file.to_string(),
        at: at.into(),
        msg: msg.into(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionRow {
    s: String,
    a: String,
    to: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservationRow {
    s: String,
    a: String,
    obs: BTreeMap<String, String>,
}

/// On-disk model. Rows with `"s": "*"` or `"a": "*"` apply to every state or
/// action; a later row for the same pair replaces an earlier one.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    states: Vec<String>,
    actions: Vec<String>,
    observations: Vec<String>,
    transitions: Vec<TransitionRow>,
    observation_model: Vec<ObservationRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    availability: Option<BTreeMap<String, Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_belief: Option<BTreeMap<String, String>>,
}

fn expand(pattern: &str, names: &[String], file: &str, at: &str, kind: &str) -> Result<Vec<usize>, FormatError> {
    if pattern == "*" {
        return Ok((0..names.len()).collect());
    }
    names
        .iter()
        .position(|n| n == pattern)
        .map(|i| vec![i])
        .ok_or_else(|| invalid(file, at, format!("unknown {kind} `{pattern}`")))
}

fn rational(text: &str, file: &str, at: &str) -> Result<Prob, FormatError> {
    parse_prob(text).map_err(|msg| invalid(file, at, msg))
}

/// Dense distribution over `names` from a sparse `name -> "p/q"` map.
fn distribution(
    entries: &BTreeMap<String, String>,
    names: &[String],
    kind: &str,
    file: &str,
    at: &str,
) -> Result<Vec<Prob>, FormatError> {
    let mut row = vec![Prob::zero(); names.len()];
    for (name, value) in entries {
        let here = format!("{at}.{name}");
        let i = names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| invalid(file, &here, format!("unknown {kind} `{name}`")))?;
        row[i] = rational(value, file, &here)?;
    }
    Ok(row)
}

/// Parses a model file; `file` names the source in diagnostics.
pub fn parse_model(text: &str, file: &str) -> Result<(Pomdp, Option<Belief>), FormatError> {
    let raw: ModelFile = serde_json::from_str(text).map_err(|e| syntax(file, e))?;
    let na = raw.actions.len();
    let mut transitions: BTreeMap<(usize, usize), Vec<Prob>> = BTreeMap::new();
    for (i, row) in raw.transitions.iter().enumerate() {
        let at = format!("transitions[{i}]");
        let dist = distribution(&row.to, &raw.states, "state", file, &format!("{at}.to"))?;
        for s in expand(&row.s, &raw.states, file, &format!("{at}.s"), "state")? {
            for a in expand(&row.a, &raw.actions, file, &format!("{at}.a"), "action")? {
                transitions.insert((s, a), dist.clone());
            }
        }
    }
    let mut observations: BTreeMap<(usize, usize), Vec<Prob>> = BTreeMap::new();
    for (i, row) in raw.observation_model.iter().enumerate() {
        let at = format!("observation_model[{i}]");
        let dist = distribution(&row.obs, &raw.observations, "observation", file, &format!("{at}.obs"))?;
        for s in expand(&row.s, &raw.states, file, &format!("{at}.s"), "state")? {
            for a in expand(&row.a, &raw.actions, file, &format!("{at}.a"), "action")? {
                observations.insert((s, a), dist.clone());
            }
        }
    }
    let mut builder = Pomdp::builder(raw.states.clone(), raw.actions.clone(), raw.observations.clone());
    for ((s, a), dist) in transitions {
        for (t, p) in dist.into_iter().enumerate() {
            builder.add_transition_index(s, a, t, p);
        }
    }
    for ((s, a), dist) in observations {
        for (o, p) in dist.into_iter().enumerate() {
            builder.add_observation_index(s, a, o, p);
        }
    }
    if let Some(table) = &raw.availability {
        for (state, actions) in table {
            let at = format!("availability.{state}");
            let s = expand(state, &raw.states, file, &at, "state")?;
            let mut row = vec![false; na];
            for action in actions {
                for a in expand(action, &raw.actions, file, &at, "action")? {
                    row[a] = true;
                }
            }
            for s in s {
                builder.set_availability_index(s, row.clone());
            }
        }
    }
    let model = builder.build().map_err(|e| invalid(file, "model", e.to_string()))?;
    let initial = match &raw.initial_belief {
        None => None,
        Some(entries) => {
            let probs = distribution(entries, &raw.states, "state", file, "initial_belief")?;
            Some(Belief::new(probs).map_err(|msg| invalid(file, "initial_belief", msg))?)
        }
    };
    Ok((model, initial))
}

fn sparse(probs: &[Prob], names: &[String]) -> BTreeMap<String, String> {
    probs
        .iter()
        .zip(names)
        .filter(|(p, _)| !p.is_zero())
        .map(|(p, n)| (n.clone(), format_prob(p)))
        .collect()
}

/// Serializes a model with one explicit row per `(state, action)`.
pub fn model_to_json(m: &Pomdp, initial: Option<&Belief>) -> Json {
    let mut transitions = Vec::new();
    let mut observation_model = Vec::new();
    for s in 0..m.num_states() {
        for a in 0..m.num_actions() {
            transitions.push(TransitionRow {
                s: m.state_name(s).into(),
                a: m.action_name(a).into(),
                to: m
                    .successors(s, a)
                    .iter()
                    .map(|(t, p)| (m.state_name(*t).to_string(), format_prob(p)))
                    .collect(),
            });
            observation_model.push(ObservationRow {
                s: m.state_name(s).into(),
                a: m.action_name(a).into(),
                obs: sparse(m.observation_dist(s, a), m.observations()),
            });
        }
    }
    let availability = m.has_availability().then(|| {
        (0..m.num_states())
            .map(|s| {
                let actions = (0..m.num_actions())
                    .filter(|&a| m.is_available(s, a))
                    .map(|a| m.action_name(a).to_string())
                    .collect();
                (m.state_name(s).to_string(), actions)
            })
            .collect()
    });
    let file = ModelFile {
        states: m.states().to_vec(),
        actions: m.actions().to_vec(),
        observations: m.observations().to_vec(),
        transitions,
        observation_model,
        availability,
        initial_belief: initial.map(|b| sparse(b.probs(), m.states())),
    };
    serde_json::to_value(file).expect("model serializes")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredicateEntry {
    states: Vec<String>,
    cmp: String,
    threshold: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectiveFile {
    goal: Vec<PredicateEntry>,
    #[serde(default)]
    safe: Vec<PredicateEntry>,
}

pub fn parse_objective(text: &str, file: &str, m: &Pomdp) -> Result<SafeReachObjective, FormatError> {
    let raw: ObjectiveFile = serde_json::from_str(text).map_err(|e| syntax(file, e))?;
    let convert = |entries: &[PredicateEntry], section: &str| -> Result<Vec<LinearBeliefPredicate>, FormatError> {
        entries
            .iter()
            .enumerate()
            .map(|(i, entry)| {
                let at = format!("{section}[{i}]");
                let states = entry
                    .states
                    .iter()
                    .map(|name| {
                        m.state_index(name)
                            .ok_or_else(|| invalid(file, format!("{at}.states"), format!("unknown state `{name}`")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let cmp = entry
                    .cmp
                    .parse()
                    .map_err(|msg: String| invalid(file, format!("{at}.cmp"), msg))?;
                let threshold = rational(&entry.threshold, file, &format!("{at}.threshold"))?;
                LinearBeliefPredicate::new(states, cmp, threshold).map_err(|msg| invalid(file, &at, msg))
            })
            .collect()
    };
    Ok(SafeReachObjective::new(
        convert(&raw.goal, "goal")?,
        convert(&raw.safe, "safe")?,
    ))
}

pub fn objective_to_json(obj: &SafeReachObjective, m: &Pomdp) -> Json {
    let convert = |preds: &[LinearBeliefPredicate]| -> Vec<PredicateEntry> {
        preds
            .iter()
            .map(|p| PredicateEntry {
                states: p.states().iter().map(|&s| m.state_name(s).to_string()).collect(),
                cmp: p.comparator().symbol().to_string(),
                threshold: format_prob(p.threshold()),
            })
            .collect()
    };
    serde_json::to_value(ObjectiveFile {
        goal: convert(&obj.goal),
        safe: convert(&obj.safe),
    })
    .expect("objective serializes")
}

fn belief_json(b: &Belief, m: &Pomdp) -> Json {
    let map: Map<String, Json> = sparse(b.probs(), m.states())
        .into_iter()
        .map(|(k, v)| (k, Json::String(v)))
        .collect();
    Json::Object(map)
}

fn parse_belief(value: &Json, m: &Pomdp, file: &str, at: &str) -> Result<Belief, FormatError> {
    let entries: BTreeMap<String, String> =
        serde_json::from_value(value.clone()).map_err(|e| invalid(file, at, e.to_string()))?;
    let probs = distribution(&entries, m.states(), "state", file, at)?;
    Belief::new(probs).map_err(|msg| invalid(file, at, msg))
}

pub fn policy_to_json(tree: &PolicyTree, m: &Pomdp) -> Json {
    let children: Map<String, Json> = tree
        .children
        .iter()
        .map(|(&o, child)| (m.observation_name(o).to_string(), policy_to_json(child, m)))
        .collect();
    json!({
        "belief": belief_json(&tree.belief, m),
        "action": tree.action.map(|a| m.action_name(a).to_string()),
        "goal_reached": tree.goal_reached,
        "children": children,
    })
}

pub fn parse_policy(text: &str, file: &str, m: &Pomdp) -> Result<PolicyTree, FormatError> {
    let value: Json = serde_json::from_str(text).map_err(|e| syntax(file, e))?;
    policy_from_json(&value, m, file, "policy")
}

fn policy_from_json(value: &Json, m: &Pomdp, file: &str, at: &str) -> Result<PolicyTree, FormatError> {
    let obj = value
        .as_object()
        .ok_or_else(|| invalid(file, at, "policy node must be an object"))?;
    if let Some(key) = obj
        .keys()
        .find(|k| !["belief", "action", "goal_reached", "children"].contains(&k.as_str()))
    {
        return Err(invalid(file, at, format!("unknown field `{key}`")));
    }
    let belief = parse_belief(
        obj.get("belief").ok_or_else(|| invalid(file, at, "missing `belief`"))?,
        m,
        file,
        &format!("{at}.belief"),
    )?;
    let action = match obj.get("action") {
        None | Some(Json::Null) => None,
        Some(Json::String(name)) => Some(
            m.action_index(name)
                .ok_or_else(|| invalid(file, format!("{at}.action"), format!("unknown action `{name}`")))?,
        ),
        Some(_) => return Err(invalid(file, format!("{at}.action"), "expected string or null")),
    };
    let goal_reached = match obj.get("goal_reached") {
        None => false,
        Some(v) => v
            .as_bool()
            .ok_or_else(|| invalid(file, format!("{at}.goal_reached"), "expected boolean"))?,
    };
    let mut children = BTreeMap::new();
    if let Some(kids) = obj.get("children") {
        let kids = kids
            .as_object()
            .ok_or_else(|| invalid(file, format!("{at}.children"), "expected object"))?;
        for (name, child) in kids {
            let here = format!("{at}.children.{name}");
            let o = m
                .observation_index(name)
                .ok_or_else(|| invalid(file, &here, format!("unknown observation `{name}`")))?;
            children.insert(o, policy_from_json(child, m, file, &here)?);
        }
    }
    Ok(PolicyTree {
        belief,
        action,
        children,
        goal_reached,
    })
}

pub fn plan_to_json(plan: &CandidatePlan, m: &Pomdp) -> Json {
    json!({
        "start_step": plan.start_step,
        "beliefs": plan.beliefs.iter().map(|b| belief_json(b, m)).collect::<Vec<_>>(),
        "actions": plan.actions.iter().map(|&a| m.action_name(a)).collect::<Vec<_>>(),
        "observations": plan.observations.iter().map(|&o| m.observation_name(o)).collect::<Vec<_>>(),
    })
}

/// Problem bundle: model with initial belief, and objective.
pub fn problem_to_json(p: &Problem) -> (Json, Json) {
    (
        model_to_json(&p.model, Some(&p.initial)),
        objective_to_json(&p.objective, &p.model),
    )
}

fn dot_escape(text: &str) -> String {
    text.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering: one box per belief node labelled with its action,
/// edges labelled with observations.
pub fn policy_to_dot(tree: &PolicyTree, m: &Pomdp) -> String {
    fn node(tree: &PolicyTree, m: &Pomdp, id: &mut usize, out: &mut String) -> usize {
        let me = *id;
        *id += 1;
        let action = tree
            .action
            .map_or(if tree.goal_reached { "goal" } else { "stop" }.to_string(), |a| {
                m.action_name(a).to_string()
            });
        let shape = if tree.action.is_some() { "box" } else { "ellipse" };
        out.push_str(&format!(
            "  n{me} [shape={shape}, label=\"{}\\n{}\"];\n",
            dot_escape(&tree.belief.to_string()),
            dot_escape(&action)
        ));
        for (&o, child) in &tree.children {
            let c = node(child, m, id, out);
            out.push_str(&format!(
                "  n{me} -> n{c} [label=\"{}\"];\n",
                dot_escape(m.observation_name(o))
            ));
        }
        me
    }
    let mut out = String::from("digraph policy {\n  rankdir=TB;\n");
    node(tree, m, &mut 0, &mut out);
    out.push_str("}\n");
    out
}

/// One row of the benchmark/statistics CSV, in column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub domain: String,
    #[serde(rename = "M")]
    pub obstacles: Option<usize>,
    #[serde(rename = "N")]
    pub cells: Option<usize>,
    pub h: usize,
    pub backend: String,
    pub incremental: bool,
    pub verdict: String,
    pub solver_calls: u64,
    pub plans_checked: u64,
    pub interactions: u64,
    pub final_horizon: Option<usize>,
    pub wall_time_s: f64,
}

pub const STATS_COLUMNS: [&str; 12] = [
    "domain",
    "M",
    "N",
    "h",
    "backend",
    "incremental",
    "verdict",
    "solver_calls",
    "plans_checked",
    "interactions",
    "final_horizon",
    "wall_time_s",
];

pub fn write_stats<W: Write>(rows: &[StatsRow], out: W) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    if rows.is_empty() {
        writer.write_record(STATS_COLUMNS)?;
    }
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::pickup::build_pickup_example;
    use crate::domains::{build_kitchen, KitchenConfig};

    #[test]
    fn model_round_trip() {
        for p in [
            build_pickup_example(),
            build_kitchen(&KitchenConfig::default()).unwrap(),
        ] {
            let (model_json, objective_json) = problem_to_json(&p);
            let text = serde_json::to_string_pretty(&model_json).unwrap();
            let (model, initial) = parse_model(&text, "m.json").unwrap();
            assert_eq!(model, p.model);
            assert_eq!(initial.as_ref(), Some(&p.initial));
            let again = serde_json::to_string_pretty(&model_to_json(&model, initial.as_ref())).unwrap();
            assert_eq!(again, text);
            let objective = parse_objective(&objective_json.to_string(), "o.json", &model).unwrap();
            assert_eq!(objective, p.objective);
        }
    }

    #[test]
    fn wildcards_and_overrides() {
        let text = r#"{
            "states": ["x", "y"], "actions": ["go", "stay"], "observations": ["z"],
            "transitions": [
                {"s": "*", "a": "*", "to": {"x": "1"}},
                {"s": "x", "a": "go", "to": {"y": "0.5", "x": "1/2"}}
            ],
            "observation_model": [{"s": "*", "a": "*", "obs": {"z": "1"}}]
        }"#;
        let (m, initial) = parse_model(text, "w.json").unwrap();
        assert!(initial.is_none());
        assert_eq!(m.successors(0, 0).len(), 2);
        assert_eq!(m.successors(1, 0).len(), 1);
    }

    #[test]
    fn errors_carry_locations() {
        let err = parse_model("{\n  \"states\": [1]\n}", "bad.json").unwrap_err();
        assert!(matches!(err, FormatError::Syntax { line: 2, .. }), "{err}");
        let text = r#"{"states": ["x"], "actions": ["a"], "observations": ["z"],
            "transitions": [{"s": "x", "a": "a", "to": {"q": "1"}}],
            "observation_model": [{"s": "x", "a": "a", "obs": {"z": "1"}}]}"#;
        let err = parse_model(text, "bad.json").unwrap_err().to_string();
        assert!(err.contains("transitions[0].to.q"), "{err}");
        let text = r#"{"states": ["x"], "actions": ["a"], "observations": ["z"],
            "transitions": [{"s": "x", "a": "a", "to": {"x": "3/10"}}],
            "observation_model": [{"s": "x", "a": "a", "obs": {"z": "1"}}]}"#;
        let err = parse_model(text, "bad.json").unwrap_err().to_string();
        assert!(err.contains("sum"), "{err}");
    }

    #[test]
    fn policy_round_trip_and_dot() {
        let ex = build_pickup_example();
        let mut root = PolicyTree::leaf(ex.initial.clone(), false);
        root.action = Some(1);
        for o in 0..2 {
            let b = crate::belief::belief_update(&ex.initial, 1, o, &ex.model).unwrap();
            root.children.insert(o, PolicyTree::leaf(b, true));
        }
        let text = policy_to_json(&root, &ex.model).to_string();
        assert!(text.contains("\"17/20\""));
        assert_eq!(parse_policy(&text, "p.json", &ex.model).unwrap(), root);
        let dot = policy_to_dot(&root, &ex.model);
        assert_eq!(dot.matches("->").count(), 2);
        assert!(dot.contains("a_R"));
    }

    #[test]
    fn stats_header_order() {
        let mut out = Vec::new();
        write_stats(&[], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().trim(), STATS_COLUMNS.join(","));
        let row = StatsRow {
            domain: "pickup".into(),
            obstacles: None,
            cells: None,
            h: 3,
            backend: "enum".into(),
            incremental: true,
            verdict: "Valid".into(),
            solver_calls: 5,
            plans_checked: 3,
            interactions: 3,
            final_horizon: Some(1),
            wall_time_s: 0.5,
        };
        let mut out = Vec::new();
        write_stats(&[row], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with(&STATS_COLUMNS.join(",")), "{text}");
        assert!(text.contains("pickup,,,3,enum,true,Valid,5,3,3,1,0.5"), "{text}");
    }
}
