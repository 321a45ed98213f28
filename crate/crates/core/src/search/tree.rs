//! Tree JSON. Nodes carry `smiles, cost_usd_per_g, depth, subtrees`; each
//! `subtrees` element is an edge object `reaction_smiles, temperature,
//! enzyme, score, rule, label` whose child node sits under `subtree`.

use std::fmt::Write as _;

use serde::ser::{Serialize, Serializer};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::chem::parse_smiles_set;

use super::{Enzyme, SearchEdge, SearchNode};

const KELVIN_OFFSET: f64 = 273.15;
const DEPRECATED_KEYS: [&str; 2] = ["type_dis", "buyable"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemperatureUnit {
    #[default]
    Celsius,
    Kelvin,
}

impl TemperatureUnit {
    fn emit(self, c: f64) -> f64 {
        match self {
            TemperatureUnit::Celsius => c,
            TemperatureUnit::Kelvin => c + KELVIN_OFFSET,
        }
    }

    fn read(self, t: f64) -> f64 {
        match self {
            TemperatureUnit::Celsius => t,
            TemperatureUnit::Kelvin => t - KELVIN_OFFSET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("tree JSON at {path}: {msg}")]
pub struct FormatError {
    /// JSONPath-style location, e.g. `$.subtrees[0].rule`.
    pub path: String,
    pub msg: String,
}

impl Serialize for Enzyme {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Enzyme::Synthetic => s.serialize_u64(0),
            Enzyme::Id(id) => s.serialize_str(id),
        }
    }
}

#[derive(serde::Serialize)]
struct NodeOut<'a> {
    smiles: &'a str,
    cost_usd_per_g: f64,
    depth: usize,
    subtrees: Vec<EdgeOut<'a>>,
}

#[derive(serde::Serialize)]
struct EdgeOut<'a> {
    reaction_smiles: &'a str,
    temperature: f64,
    enzyme: &'a Enzyme,
    score: f64,
    rule: &'a str,
    label: usize,
    subtree: NodeOut<'a>,
}

fn node_out(n: &SearchNode, unit: TemperatureUnit) -> NodeOut<'_> {
    NodeOut {
        smiles: n.molecule_set.canonical_key(),
        cost_usd_per_g: n.cost_usd_per_g,
        depth: n.depth,
        subtrees: n
            .subtrees
            .iter()
            .map(|(e, c)| EdgeOut {
                reaction_smiles: &e.reaction_smiles,
                temperature: unit.emit(e.temperature_c),
                enzyme: &e.enzyme,
                score: e.score,
                rule: &e.rule,
                label: e.label,
                subtree: node_out(c, unit),
            })
            .collect(),
    }
}

/// UTF-8, 2-space indent, fixed key order, trailing newline.
pub fn serialize_tree(root: &SearchNode, unit: TemperatureUnit) -> String {
    let mut s = serde_json::to_string_pretty(&node_out(root, unit)).expect("finite tree serializes");
    s.push('\n');
    s
}

struct Reader {
    unit: TemperatureUnit,
}

fn err(path: &str, msg: impl Into<String>) -> FormatError {
    FormatError {
        path: path.to_string(),
        msg: msg.into(),
    }
}

fn object<'v>(v: &'v Value, path: &str) -> Result<&'v Map<String, Value>, FormatError> {
    v.as_object().ok_or_else(|| err(path, "expected an object"))
}

fn field<'v>(o: &'v Map<String, Value>, key: &str, path: &str) -> Result<&'v Value, FormatError> {
    o.get(key).ok_or_else(|| err(path, format!("missing key {key:?}")))
}

fn number(o: &Map<String, Value>, key: &str, path: &str) -> Result<f64, FormatError> {
    let p = format!("{path}.{key}");
    field(o, key, path)?
        .as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| err(&p, "expected a finite number"))
}

fn count(o: &Map<String, Value>, key: &str, path: &str) -> Result<usize, FormatError> {
    let p = format!("{path}.{key}");
    field(o, key, path)?
        .as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| err(&p, "expected a non-negative integer"))
}

fn text<'v>(o: &'v Map<String, Value>, key: &str, path: &str) -> Result<&'v str, FormatError> {
    let p = format!("{path}.{key}");
    field(o, key, path)?
        .as_str()
        .ok_or_else(|| err(&p, "expected a string"))
}

fn check_keys(o: &Map<String, Value>, allowed: &[&str], path: &str) -> Result<(), FormatError> {
    for k in o.keys() {
        if !allowed.contains(&k.as_str()) && !DEPRECATED_KEYS.contains(&k.as_str()) {
            return Err(err(path, format!("unknown key {k:?}")));
        }
    }
    Ok(())
}

impl Reader {
    fn node(&self, v: &Value, path: &str, expected_depth: Option<usize>) -> Result<SearchNode, FormatError> {
        let o = object(v, path)?;
        check_keys(o, &["smiles", "cost_usd_per_g", "depth", "subtrees"], path)?;
        let smiles = text(o, "smiles", path)?;
        let set = parse_smiles_set(smiles).map_err(|e| err(&format!("{path}.smiles"), e.to_string()))?;
        let cost = number(o, "cost_usd_per_g", path)?;
        if cost < 0.0 {
            return Err(err(&format!("{path}.cost_usd_per_g"), "cost must be non-negative"));
        }
        let depth = count(o, "depth", path)?;
        if let Some(d) = expected_depth {
            if d != depth {
                return Err(err(&format!("{path}.depth"), format!("expected depth {d}, found {depth}")));
            }
        }
        let sp = format!("{path}.subtrees");
        let list = field(o, "subtrees", path)?
            .as_array()
            .ok_or_else(|| err(&sp, "expected an array"))?;
        let subtrees = list
            .iter()
            .enumerate()
            .map(|(i, e)| self.edge(e, &format!("{sp}[{i}]"), depth + 1))
            .collect::<Result<_, _>>()?;
        Ok(SearchNode {
            molecule_set: set,
            cost_usd_per_g: cost,
            depth,
            subtrees,
            solved: false,
        })
    }

    fn edge(&self, v: &Value, path: &str, child_depth: usize) -> Result<(SearchEdge, SearchNode), FormatError> {
        let o = object(v, path)?;
        check_keys(
            o,
            &["reaction_smiles", "temperature", "enzyme", "score", "rule", "label", "subtree"],
            path,
        )?;
        let enzyme = match field(o, "enzyme", path)? {
            Value::Number(n) if n.as_u64() == Some(0) => Enzyme::Synthetic,
            Value::String(s) => Enzyme::Id(s.clone()),
            _ => return Err(err(&format!("{path}.enzyme"), "expected 0 or an identifier string")),
        };
        let edge = SearchEdge {
            reaction_smiles: text(o, "reaction_smiles", path)?.to_string(),
            temperature_c: self.unit.read(number(o, "temperature", path)?),
            enzyme,
            score: number(o, "score", path)?,
            rule: text(o, "rule", path)?.to_string(),
            label: count(o, "label", path)?,
            template_id: None,
            components: None,
        };
        let child = self.node(field(o, "subtree", path)?, &format!("{path}.subtree"), Some(child_depth))?;
        Ok((edge, child))
    }
}

/// Parse a tree. Deprecated keys `type_dis` and `buyable` are dropped;
/// any other unknown key is an error. `solved` flags start false.
pub fn deserialize_tree(text: &str, unit: TemperatureUnit) -> Result<SearchNode, FormatError> {
    let v: Value = serde_json::from_str(text).map_err(|e| err("$", e.to_string()))?;
    Reader { unit }.node(&v, "$", None)
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering: node label = set key and cost, edge label = rule
/// id (or edge label when unknown) and temperature in Celsius.
pub fn to_dot(root: &SearchNode) -> String {
    fn walk(n: &SearchNode, id: &mut usize, out: &mut String) -> usize {
        let me = *id;
        *id += 1;
        let _ = writeln!(
            out,
            "  n{me} [label=\"{}\\n${}/g\"{}];",
            dot_escape(n.molecule_set.canonical_key()),
            n.cost_usd_per_g,
            if n.solved { ", style=filled, fillcolor=palegreen" } else { "" }
        );
        for (e, c) in &n.subtrees {
            let child = walk(c, id, out);
            let rule = e.template_id.map_or_else(|| format!("edge {}", e.label), |t| format!("rule {t}"));
            let _ = writeln!(out, "  n{me} -> n{child} [label=\"{rule}\\n{} C\"];", e.temperature_c);
        }
        me
    }
    let mut out = String::from("digraph search_tree {\n  node [shape=box];\n");
    walk(root, &mut 0, &mut out);
    out.push_str("}\n");
    out
}
