//! Action transition graphs: decoding, validation and queries.
//!
//! A graph document is a JSON object of the form
//!
//! ```json
//! {
//!   "name": "doctor",
//!   "start_node": "Welcome",
//!   "final_node": "End",
//!   "starting_utterance": "Hello, how can I help you?",
//!   "edges": { "Welcome": { "BookAppointment": "AskDocName" }, "AskDocName": { "Done": "End" } },
//!   "function_calls": {
//!     "SearchList": { "handler": "fixture", "name": "doctor_directory",
//!                     "data_ref": "data/doctors.json", "filter": ["gender"] }
//!   }
//! }
//! ```
//!
//! `edges` maps every non-final node to its available actions and each action to
//! its target node, so it carries both the action relation and the transition
//! function. The node set is inferred from `edges`, the transition targets, and
//! the start/final nodes.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

macro_rules! identifier {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl PartialEq<str> for $name {
            fn eq(&self, other: &str) -> bool {
                self.0 == other
            }
        }

        impl PartialEq<&str> for $name {
            fn eq(&self, other: &&str) -> bool {
                self.0 == *other
            }
        }
    };
}

identifier!(
    /// A dialogue state in an action transition graph.
    NodeId
);
identifier!(
    /// A user intent that moves the dialogue between nodes.
    ActionId
);

/// Stable machine-readable diagnostic codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Code {
    MalformedJson,
    MissingField,
    WrongType,
    DuplicateAction,
    DuplicateNode,
    InvalidIdentifier,
    InvalidFunctionCall,
    FinalHasEdges,
    FinalUnreachable,
    DeadEnd,
    UnknownTarget,
    FcallUnknownAction,
    StartEqFinal,
    EmptyActionSet,
    FixtureUnresolved,
    UnreachableNode,
}

impl Code {
    pub const fn as_str(self) -> &'static str {
        match self {
            Code::MalformedJson => "E_MALFORMED_JSON",
            Code::MissingField => "E_MISSING_FIELD",
            Code::WrongType => "E_WRONG_TYPE",
            Code::DuplicateAction => "E_DUPLICATE_ACTION",
            Code::DuplicateNode => "E_DUPLICATE_NODE",
            Code::InvalidIdentifier => "E_INVALID_IDENTIFIER",
            Code::InvalidFunctionCall => "E_INVALID_FCALL",
            Code::FinalHasEdges => "E_FINAL_HAS_EDGES",
            Code::FinalUnreachable => "E_FINAL_UNREACHABLE",
            Code::DeadEnd => "E_DEAD_END",
            Code::UnknownTarget => "E_UNKNOWN_TARGET",
            Code::FcallUnknownAction => "E_FCALL_UNKNOWN_ACTION",
            Code::StartEqFinal => "E_START_EQ_FINAL",
            Code::EmptyActionSet => "E_EMPTY_ACTIONSET",
            Code::FixtureUnresolved => "E_FIXTURE_UNRESOLVED",
            Code::UnreachableNode => "W_UNREACHABLE_NODE",
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Code {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

/// One finding about a graph document: what, where and a human-readable message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub code: Code,
    pub location: String,
    pub message: String,
}

impl Diagnostic {
    fn new(code: Code, location: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code,
            location: location.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.code, self.location, self.message)
    }
}

/// Decoding failure; carries every problem found in the document.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("graph document rejected: {}", .diagnostics.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
pub struct GraphParseError {
    pub diagnostics: Vec<Diagnostic>,
}

impl GraphParseError {
    pub fn codes(&self) -> Vec<Code> {
        self.diagnostics.iter().map(|d| d.code).collect()
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Parse(#[from] GraphParseError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("node {0} is the final node and has no available actions")]
    FinalNodeQuery(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("no transition from {node} on action {action}")]
    UndefinedTransition { node: NodeId, action: ActionId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum HttpMethod {
    Get,
    Post,
}

impl fmt::Display for HttpMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HttpMethod::Get => "GET",
            HttpMethod::Post => "POST",
        })
    }
}

/// Records bundled with a fixture-backed function call.
#[derive(Debug, Clone, PartialEq)]
pub enum FixtureData {
    Unresolved,
    Loaded(Arc<Vec<Map<String, Value>>>),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionHandler {
    /// Answers from a JSON array of flat records. `filter` lists record fields
    /// whose value is chosen from the persona preferences and the user utterance.
    Fixture {
        data_ref: String,
        filter: Vec<String>,
        data: FixtureData,
    },
    /// Calls a remote endpoint. `url` may contain `{placeholders}`.
    Http { url: String, method: HttpMethod },
}

/// The API bound to a function-call action.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionCallSpec {
    pub name: String,
    pub handler: FunctionHandler,
}

impl FunctionCallSpec {
    pub fn handler_kind(&self) -> &'static str {
        match self.handler {
            FunctionHandler::Fixture { .. } => "fixture",
            FunctionHandler::Http { .. } => "http",
        }
    }

    fn to_value(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("handler".into(), Value::from(self.handler_kind()));
        obj.insert("name".into(), Value::from(self.name.clone()));
        match &self.handler {
            FunctionHandler::Fixture {
                data_ref, filter, ..
            } => {
                obj.insert("data_ref".into(), Value::from(data_ref.clone()));
                if !filter.is_empty() {
                    obj.insert("filter".into(), Value::from(filter.clone()));
                }
            }
            FunctionHandler::Http { url, method } => {
                obj.insert("url".into(), Value::from(url.clone()));
                obj.insert(
                    "method".into(),
                    serde_json::to_value(method).expect("method serializes"),
                );
            }
        }
        Value::Object(obj)
    }
}

/// One step of a navigation trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub from: NodeId,
    pub action: ActionId,
    pub to: NodeId,
}

impl TraceStep {
    pub fn new(
        from: impl Into<NodeId>,
        action: impl Into<ActionId>,
        to: impl Into<NodeId>,
    ) -> Self {
        Self {
            from: from.into(),
            action: action.into(),
            to: to.into(),
        }
    }
}

/// A decoded action transition graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionTransitionGraph {
    name: String,
    start: NodeId,
    final_node: NodeId,
    starting_utterance: String,
    edges: BTreeMap<NodeId, BTreeMap<ActionId, NodeId>>,
    function_calls: BTreeMap<ActionId, FunctionCallSpec>,
    nodes: BTreeSet<NodeId>,
    actions: BTreeSet<ActionId>,
}

impl ActionTransitionGraph {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn start(&self) -> &NodeId {
        &self.start
    }

    pub fn final_node(&self) -> &NodeId {
        &self.final_node
    }

    pub fn starting_utterance(&self) -> &str {
        &self.starting_utterance
    }

    pub fn nodes(&self) -> &BTreeSet<NodeId> {
        &self.nodes
    }

    pub fn actions(&self) -> &BTreeSet<ActionId> {
        &self.actions
    }

    /// Adjacency form: node -> action -> target.
    pub fn edges(&self) -> &BTreeMap<NodeId, BTreeMap<ActionId, NodeId>> {
        &self.edges
    }

    pub fn function_calls(&self) -> &BTreeMap<ActionId, FunctionCallSpec> {
        &self.function_calls
    }

    pub fn function_call(&self, action: &str) -> Option<&FunctionCallSpec> {
        self.function_calls.get(action)
    }

    pub fn is_function_call(&self, action: &str) -> bool {
        self.function_calls.contains_key(action)
    }

    /// All `(node, action, target)` triples of the transition function.
    pub fn transitions(&self) -> impl Iterator<Item = (&NodeId, &ActionId, &NodeId)> {
        self.edges
            .iter()
            .flat_map(|(v, out)| out.iter().map(move |(a, w)| (v, a, w)))
    }

    /// The actions available at `node`.
    pub fn available_actions(&self, node: &str) -> Result<BTreeSet<ActionId>, GraphError> {
        if node == self.final_node.as_str() {
            return Err(GraphError::FinalNodeQuery(self.final_node.clone()));
        }
        if !self.nodes.contains(node) {
            return Err(GraphError::UnknownNode(node.into()));
        }
        Ok(self
            .edges
            .get(node)
            .map(|out| out.keys().cloned().collect())
            .unwrap_or_default())
    }

    pub fn transition_step(&self, node: &str, action: &str) -> Result<NodeId, GraphError> {
        self.edges
            .get(node)
            .and_then(|out| out.get(action))
            .cloned()
            .ok_or_else(|| GraphError::UndefinedTransition {
                node: node.into(),
                action: action.into(),
            })
    }

    /// Breadth-first closure of the start node under the transition function.
    pub fn reachable_nodes(&self) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([self.start.clone()]);
        seen.insert(self.start.clone());
        while let Some(v) = queue.pop_front() {
            if let Some(out) = self.edges.get(&v) {
                for w in out.values() {
                    if seen.insert(w.clone()) {
                        queue.push_back(w.clone());
                    }
                }
            }
        }
        seen
    }

    /// Actions available at some reachable node.
    pub fn reachable_actions(&self) -> BTreeSet<ActionId> {
        let reachable = self.reachable_nodes();
        self.edges
            .iter()
            .filter(|(v, _)| reachable.contains(*v))
            .flat_map(|(_, out)| out.keys().cloned())
            .collect()
    }

    /// Whether `trace` is a walk from the start node along defined transitions.
    pub fn is_valid_trace(&self, trace: &[TraceStep]) -> bool {
        let Some(first) = trace.first() else {
            return true;
        };
        if first.from != self.start {
            return false;
        }
        let steps_ok = trace.iter().all(|step| {
            self.transition_step(step.from.as_str(), step.action.as_str())
                .map(|to| to == step.to)
                .unwrap_or(false)
        });
        steps_ok && trace.windows(2).all(|w| w[0].to == w[1].from)
    }

    /// Load fixture records for every fixture-backed function call. `load`
    /// maps a `data_ref` to the file's text.
    pub fn resolve_fixtures<F>(&mut self, mut load: F)
    where
        F: FnMut(&str) -> Result<String, String>,
    {
        for spec in self.function_calls.values_mut() {
            if let FunctionHandler::Fixture { data_ref, data, .. } = &mut spec.handler {
                *data = match load(data_ref).and_then(|text| parse_fixture_records(&text)) {
                    Ok(records) => FixtureData::Loaded(Arc::new(records)),
                    Err(msg) => FixtureData::Failed(msg),
                };
            }
        }
    }

    /// Serialize back into the graph document format.
    pub fn to_json(&self) -> String {
        let mut obj = Map::new();
        obj.insert("name".into(), Value::from(self.name.clone()));
        obj.insert("start_node".into(), Value::from(self.start.as_str()));
        obj.insert("final_node".into(), Value::from(self.final_node.as_str()));
        obj.insert(
            "starting_utterance".into(),
            Value::from(self.starting_utterance.clone()),
        );
        let edges: Map<String, Value> = self
            .edges
            .iter()
            .map(|(v, out)| {
                let out: Map<String, Value> = out
                    .iter()
                    .map(|(a, w)| (a.to_string(), Value::from(w.as_str())))
                    .collect();
                (v.to_string(), Value::Object(out))
            })
            .collect();
        obj.insert("edges".into(), Value::Object(edges));
        let fcalls: Map<String, Value> = self
            .function_calls
            .iter()
            .map(|(a, spec)| (a.to_string(), spec.to_value()))
            .collect();
        obj.insert("function_calls".into(), Value::Object(fcalls));
        serde_json::to_string_pretty(&Value::Object(obj)).expect("graph serializes")
    }
}

fn parse_fixture_records(text: &str) -> Result<Vec<Map<String, Value>>, String> {
    let value: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let Value::Array(items) = value else {
        return Err("fixture data must be a JSON array of records".into());
    };
    items
        .into_iter()
        .enumerate()
        .map(|(i, item)| match item {
            Value::Object(record) => Ok(record),
            _ => Err(format!("fixture record {i} is not an object")),
        })
        .collect()
}

/// Validation outcome. A graph is accepted iff `errors` is empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<Diagnostic>,
    pub warnings: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn error_codes(&self) -> BTreeSet<Code> {
        self.errors.iter().map(|d| d.code).collect()
    }

    pub fn warning_codes(&self) -> BTreeSet<Code> {
        self.warnings.iter().map(|d| d.code).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.errors {
            writeln!(f, "error: {d}")?;
        }
        for d in &self.warnings {
            writeln!(f, "warning: {d}")?;
        }
        write!(
            f,
            "{} error(s), {} warning(s)",
            self.errors.len(),
            self.warnings.len()
        )
    }
}

/// Check a decoded graph against every structural rule. Never fails; all
/// findings land in the report.
pub fn validate_graph(g: &ActionTransitionGraph) -> ValidationReport {
    let mut report = ValidationReport::default();
    let err = |code, loc: String, msg: String| Diagnostic::new(code, loc, msg);

    if g.start == g.final_node {
        report.errors.push(err(
            Code::StartEqFinal,
            "start_node".into(),
            format!("start and final node are both {}", g.start),
        ));
    }

    if g.edges.contains_key(&g.final_node) {
        report.errors.push(err(
            Code::FinalHasEdges,
            format!("edges.{}", g.final_node),
            format!("final node {} must not have outgoing actions", g.final_node),
        ));
    }

    for (v, out) in &g.edges {
        if out.is_empty() {
            report.errors.push(err(
                Code::EmptyActionSet,
                format!("edges.{v}"),
                format!("node {v} lists no actions"),
            ));
        }
    }

    for (v, a, w) in g.transitions() {
        if *w != g.final_node && !g.edges.contains_key(w) {
            report.errors.push(err(
                Code::UnknownTarget,
                format!("edges.{v}.{a}"),
                format!("target {w} is neither the final node nor declared in edges"),
            ));
        }
    }

    for (a, spec) in &g.function_calls {
        if !g.actions.contains(a) {
            report.errors.push(err(
                Code::FcallUnknownAction,
                format!("function_calls.{a}"),
                format!("function call bound to unknown action {a}"),
            ));
        }
        if let FunctionHandler::Fixture { data_ref, data, .. } = &spec.handler {
            let problem = match data {
                FixtureData::Loaded(_) => None,
                FixtureData::Unresolved => Some("was never loaded".to_string()),
                FixtureData::Failed(msg) => Some(msg.clone()),
            };
            if let Some(problem) = problem {
                report.errors.push(err(
                    Code::FixtureUnresolved,
                    format!("function_calls.{a}.data_ref"),
                    format!("fixture {data_ref}: {problem}"),
                ));
            }
        }
    }

    let reachable = g.reachable_nodes();
    let final_reachable = reachable.contains(&g.final_node);
    if !final_reachable {
        report.errors.push(err(
            Code::FinalUnreachable,
            "final_node".into(),
            format!(
                "final node {} is not reachable from {}",
                g.final_node, g.start
            ),
        ));
    }

    let coreachable = nodes_reaching(g, &g.final_node);
    for v in &reachable {
        if *v == g.final_node {
            continue;
        }
        match g.edges.get(v) {
            // Already reported as E_EMPTY_ACTIONSET.
            Some(out) if out.is_empty() => {}
            None => report.errors.push(err(
                Code::DeadEnd,
                format!("node {v}"),
                format!("reachable node {v} has no available actions"),
            )),
            Some(_) if final_reachable && !coreachable.contains(v) => report.errors.push(err(
                Code::DeadEnd,
                format!("node {v}"),
                format!("the final node cannot be reached from {v}"),
            )),
            Some(_) => {}
        }
    }

    for v in g.nodes.difference(&reachable) {
        report.warnings.push(err(
            Code::UnreachableNode,
            format!("node {v}"),
            format!("node {v} is not reachable from {}", g.start),
        ));
    }

    report
}

fn nodes_reaching(g: &ActionTransitionGraph, target: &NodeId) -> BTreeSet<NodeId> {
    let mut reverse: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
    for (v, _, w) in g.transitions() {
        reverse.entry(w).or_default().push(v);
    }
    let mut seen = BTreeSet::from([target.clone()]);
    let mut queue = VecDeque::from([target]);
    while let Some(w) = queue.pop_front() {
        for v in reverse.get(w).into_iter().flatten() {
            if seen.insert((*v).clone()) {
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Decode a graph document. Semantic checks are left to [`validate_graph`];
/// fixture data stays unresolved until [`ActionTransitionGraph::resolve_fixtures`].
pub fn parse_graph(document: &str) -> Result<ActionTransitionGraph, GraphParseError> {
    let root: Value = serde_json::from_str(document).map_err(|e| GraphParseError {
        diagnostics: vec![Diagnostic::new(Code::MalformedJson, "$", e.to_string())],
    })?;
    let mut diags = Vec::new();
    let Some(obj) = root.as_object() else {
        return Err(GraphParseError {
            diagnostics: vec![Diagnostic::new(
                Code::WrongType,
                "$",
                "graph document must be a JSON object",
            )],
        });
    };

    // serde_json keeps only the last of duplicated keys, so rescan the raw text.
    if let Ok(probe) = serde_json::from_str::<DuplicateProbe>(document) {
        for node in probe.edges.duplicate_nodes {
            diags.push(Diagnostic::new(
                Code::DuplicateNode,
                format!("edges.{node}"),
                format!("node {node} is listed more than once"),
            ));
        }
        for (node, action) in probe.edges.duplicate_actions {
            diags.push(Diagnostic::new(
                Code::DuplicateAction,
                format!("edges.{node}.{action}"),
                format!("action {action} is listed more than once under {node}"),
            ));
        }
    }

    let name = take_str(obj, "name", &mut diags);
    let start = take_str(obj, "start_node", &mut diags);
    let final_node = take_str(obj, "final_node", &mut diags);
    let starting_utterance = take_str(obj, "starting_utterance", &mut diags);
    for (field, value) in [
        ("name", &name),
        ("start_node", &start),
        ("final_node", &final_node),
    ] {
        if let Some(v) = value {
            check_identifier(v, field, &mut diags);
        }
    }

    let mut edges = BTreeMap::new();
    match obj.get("edges") {
        None => diags.push(missing("edges")),
        Some(Value::Object(nodes)) => {
            for (v, out) in nodes {
                let path = format!("edges.{v}");
                check_identifier(v, &path, &mut diags);
                let Some(out) = out.as_object() else {
                    diags.push(wrong_type(&path, "an object of action -> target"));
                    continue;
                };
                let mut actions = BTreeMap::new();
                for (a, w) in out {
                    let path = format!("edges.{v}.{a}");
                    check_identifier(a, &path, &mut diags);
                    match w.as_str() {
                        Some(w) => {
                            check_identifier(w, &path, &mut diags);
                            actions.insert(ActionId::from(a.as_str()), NodeId::from(w));
                        }
                        None => diags.push(wrong_type(&path, "a target node string")),
                    }
                }
                edges.insert(NodeId::from(v.as_str()), actions);
            }
        }
        Some(_) => diags.push(wrong_type("edges", "an object")),
    }

    let mut function_calls = BTreeMap::new();
    match obj.get("function_calls") {
        None => diags.push(missing("function_calls")),
        Some(Value::Object(calls)) => {
            for (a, spec) in calls {
                let path = format!("function_calls.{a}");
                check_identifier(a, &path, &mut diags);
                if let Some(spec) = parse_function_call(spec, &path, &mut diags) {
                    function_calls.insert(ActionId::from(a.as_str()), spec);
                }
            }
        }
        Some(_) => diags.push(wrong_type("function_calls", "an object")),
    }

    if !diags.is_empty() {
        return Err(GraphParseError { diagnostics: diags });
    }
    let (Some(name), Some(start), Some(final_node), Some(starting_utterance)) =
        (name, start, final_node, starting_utterance)
    else {
        unreachable!("missing fields are reported as diagnostics");
    };
    let start = NodeId::from(start);
    let final_node = NodeId::from(final_node);

    let mut nodes: BTreeSet<NodeId> = edges.keys().cloned().collect();
    nodes.extend(
        edges
            .values()
            .flat_map(|out: &BTreeMap<ActionId, NodeId>| out.values().cloned()),
    );
    nodes.insert(start.clone());
    nodes.insert(final_node.clone());
    let actions = edges.values().flat_map(|out| out.keys().cloned()).collect();

    Ok(ActionTransitionGraph {
        name,
        start,
        final_node,
        starting_utterance,
        edges,
        function_calls,
        nodes,
        actions,
    })
}

/// Read, decode and resolve fixtures relative to the graph file's directory.
pub fn load_graph(path: impl AsRef<Path>) -> Result<ActionTransitionGraph, LoadError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut graph = parse_graph(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    graph.resolve_fixtures(|data_ref| {
        std::fs::read_to_string(base.join(data_ref)).map_err(|e| e.to_string())
    });
    Ok(graph)
}

fn missing(field: &str) -> Diagnostic {
    Diagnostic::new(
        Code::MissingField,
        field,
        format!("required field `{field}` is missing"),
    )
}

fn wrong_type(path: &str, expected: &str) -> Diagnostic {
    Diagnostic::new(Code::WrongType, path, format!("expected {expected}"))
}

fn take_str(obj: &Map<String, Value>, field: &str, diags: &mut Vec<Diagnostic>) -> Option<String> {
    match obj.get(field) {
        None => {
            diags.push(missing(field));
            None
        }
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            diags.push(wrong_type(field, "a string"));
            None
        }
    }
}

fn check_identifier(id: &str, path: &str, diags: &mut Vec<Diagnostic>) {
    if id.trim().is_empty() {
        diags.push(Diagnostic::new(
            Code::InvalidIdentifier,
            path,
            format!("identifier {id:?} is empty or whitespace-only"),
        ));
    }
}

fn parse_function_call(
    spec: &Value,
    path: &str,
    diags: &mut Vec<Diagnostic>,
) -> Option<FunctionCallSpec> {
    let Some(obj) = spec.as_object() else {
        diags.push(wrong_type(path, "a function call object"));
        return None;
    };
    let field = |key: &str, diags: &mut Vec<Diagnostic>| -> Option<String> {
        match obj.get(key) {
            None => {
                diags.push(missing(&format!("{path}.{key}")));
                None
            }
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                diags.push(wrong_type(&format!("{path}.{key}"), "a string"));
                None
            }
        }
    };
    let kind = field("handler", diags)?;
    let name = field("name", diags)?;
    check_identifier(&name, &format!("{path}.name"), diags);
    let has = |key: &str| obj.contains_key(key);
    match kind.as_str() {
        "fixture" => {
            if has("url") || has("method") {
                diags.push(Diagnostic::new(
                    Code::InvalidFunctionCall,
                    path,
                    "fixture handlers take `data_ref`, not `url`/`method`",
                ));
                return None;
            }
            let data_ref = field("data_ref", diags)?;
            let filter = match obj.get("filter") {
                None => Vec::new(),
                Some(Value::Array(items)) => {
                    let fields: Option<Vec<String>> = items
                        .iter()
                        .map(|v| v.as_str().map(str::to_string))
                        .collect();
                    match fields {
                        Some(fields) => fields,
                        None => {
                            diags.push(wrong_type(
                                &format!("{path}.filter"),
                                "an array of field names",
                            ));
                            return None;
                        }
                    }
                }
                Some(_) => {
                    diags.push(wrong_type(
                        &format!("{path}.filter"),
                        "an array of field names",
                    ));
                    return None;
                }
            };
            Some(FunctionCallSpec {
                name,
                handler: FunctionHandler::Fixture {
                    data_ref,
                    filter,
                    data: FixtureData::Unresolved,
                },
            })
        }
        "http" => {
            if has("data_ref") || has("filter") {
                diags.push(Diagnostic::new(
                    Code::InvalidFunctionCall,
                    path,
                    "http handlers take `url`/`method`, not `data_ref`/`filter`",
                ));
                return None;
            }
            let url = field("url", diags)?;
            let method = match obj.get("method") {
                None => HttpMethod::Get,
                Some(Value::String(m)) if m.eq_ignore_ascii_case("get") => HttpMethod::Get,
                Some(Value::String(m)) if m.eq_ignore_ascii_case("post") => HttpMethod::Post,
                Some(_) => {
                    diags.push(wrong_type(&format!("{path}.method"), "\"GET\" or \"POST\""));
                    return None;
                }
            };
            Some(FunctionCallSpec {
                name,
                handler: FunctionHandler::Http { url, method },
            })
        }
        other => {
            diags.push(Diagnostic::new(
                Code::InvalidFunctionCall,
                format!("{path}.handler"),
                format!("unknown handler kind {other:?}; expected \"fixture\" or \"http\""),
            ));
            None
        }
    }
}

#[derive(Deserialize)]
struct DuplicateProbe {
    #[serde(default)]
    edges: EdgeDuplicates,
}

#[derive(Default)]
struct EdgeDuplicates {
    duplicate_nodes: Vec<String>,
    duplicate_actions: Vec<(String, String)>,
}

struct ActionKeys {
    duplicates: Vec<String>,
}

impl<'de> Deserialize<'de> for ActionKeys {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> serde::de::Visitor<'de> for V {
            type Value = ActionKeys;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object of action -> target")
            }
            fn visit_map<A: serde::de::MapAccess<'de>>(
                self,
                mut map: A,
            ) -> Result<ActionKeys, A::Error> {
                let mut seen = BTreeSet::new();
                let mut duplicates = Vec::new();
                while let Some((key, _)) = map.next_entry::<String, serde::de::IgnoredAny>()? {
                    if !seen.insert(key.clone()) {
                        duplicates.push(key);
                    }
                }
                Ok(ActionKeys { duplicates })
            }
        }
        d.deserialize_map(V)
    }
}

impl<'de> Deserialize<'de> for EdgeDuplicates {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> serde::de::Visitor<'de> for V {
            type Value = EdgeDuplicates;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object of node -> actions")
            }
            fn visit_map<A: serde::de::MapAccess<'de>>(
                self,
                mut map: A,
            ) -> Result<EdgeDuplicates, A::Error> {
                let mut out = EdgeDuplicates::default();
                let mut seen = BTreeSet::new();
                while let Some((node, actions)) = map.next_entry::<String, ActionKeys>()? {
                    out.duplicate_actions
                        .extend(actions.duplicates.into_iter().map(|a| (node.clone(), a)));
                    if !seen.insert(node.clone()) {
                        out.duplicate_nodes.push(node);
                    }
                }
                Ok(out)
            }
        }
        d.deserialize_map(V)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIN: &str = r#"{"name":"min","start_node":"S","final_node":"F","starting_utterance":"Hi","edges":{"S":{"Done":"F"}},"function_calls":{}}"#;

    fn graph(edges: &str) -> ActionTransitionGraph {
        parse_graph(&format!(
            r#"{{"name":"t","start_node":"S","final_node":"F","starting_utterance":"Hi","edges":{edges},"function_calls":{{}}}}"#
        ))
        .unwrap()
    }

    fn ids<T: From<&'static str> + Ord>(items: &[&'static str]) -> BTreeSet<T> {
        items.iter().map(|s| T::from(*s)).collect()
    }

    #[test]
    fn minimal_graph_decodes() {
        let g = parse_graph(MIN).unwrap();
        assert_eq!(g.nodes(), &ids::<NodeId>(&["S", "F"]));
        assert_eq!(g.actions(), &ids::<ActionId>(&["Done"]));
        assert_eq!(g.start(), "S");
        assert_eq!(g.final_node(), "F");
        let report = validate_graph(&g);
        assert!(
            report.errors.is_empty() && report.warnings.is_empty(),
            "{report}"
        );
    }

    #[test]
    fn missing_final_node_is_reported_with_path() {
        let doc = MIN.replace(r#""final_node":"F","#, "");
        let err = parse_graph(&doc).unwrap_err();
        assert_eq!(err.diagnostics.len(), 1);
        assert_eq!(err.diagnostics[0].code, Code::MissingField);
        assert_eq!(err.diagnostics[0].location, "final_node");
    }

    #[test]
    fn malformed_json() {
        let err = parse_graph("{\"name\": ").unwrap_err();
        assert_eq!(err.codes(), vec![Code::MalformedJson]);
    }

    #[test]
    fn wrong_field_type() {
        let doc = MIN.replace(r#""start_node":"S""#, r#""start_node":3"#);
        let err = parse_graph(&doc).unwrap_err();
        assert_eq!(err.codes(), vec![Code::WrongType]);
        assert_eq!(err.diagnostics[0].location, "start_node");
    }

    #[test]
    fn duplicate_action_under_one_node() {
        let doc = MIN.replace(r#"{"Done":"F"}"#, r#"{"Done":"F","Done":"S"}"#);
        let err = parse_graph(&doc).unwrap_err();
        assert_eq!(err.codes(), vec![Code::DuplicateAction]);
        assert_eq!(err.diagnostics[0].location, "edges.S.Done");
    }

    #[test]
    fn whitespace_identifiers_rejected() {
        let doc = MIN.replace(r#""Done":"F""#, r#""  ":"F""#);
        assert_eq!(
            parse_graph(&doc).unwrap_err().codes(),
            vec![Code::InvalidIdentifier]
        );
    }

    #[test]
    fn function_call_with_both_kinds_rejected() {
        let doc = MIN.replace(
            r#""function_calls":{}"#,
            r#""function_calls":{"Done":{"handler":"fixture","name":"x","data_ref":"d.json","url":"http://x"}}"#,
        );
        assert_eq!(
            parse_graph(&doc).unwrap_err().codes(),
            vec![Code::InvalidFunctionCall]
        );
    }

    #[test]
    fn final_with_edges() {
        let g = graph(r#"{"S":{"Done":"F"},"F":{"Again":"S"}}"#);
        assert_eq!(
            validate_graph(&g).error_codes(),
            BTreeSet::from([Code::FinalHasEdges])
        );
    }

    #[test]
    fn orphan_target_is_a_dead_end() {
        // S -Done-> F, S -Stray-> Orphan; Orphan is reachable but has no actions.
        let g = graph(r#"{"S":{"Done":"F","Stray":"Orphan"}}"#);
        assert!(g.reachable_nodes().contains("Orphan"));
        let codes = validate_graph(&g).error_codes();
        assert!(codes.contains(&Code::DeadEnd), "{codes:?}");
    }

    #[test]
    fn trap_cycle_is_a_dead_end() {
        let g = graph(r#"{"S":{"Done":"F","Go":"A"},"A":{"Next":"B"},"B":{"Back":"A"}}"#);
        let report = validate_graph(&g);
        assert_eq!(report.error_codes(), BTreeSet::from([Code::DeadEnd]));
        assert_eq!(report.errors.len(), 2);
    }

    #[test]
    fn unreachable_node_is_only_a_warning() {
        let g = graph(r#"{"S":{"Done":"F"},"X":{"Done":"F"}}"#);
        let report = validate_graph(&g);
        assert!(report.is_ok());
        assert_eq!(
            report.warning_codes(),
            BTreeSet::from([Code::UnreachableNode])
        );
        assert!(!g.reachable_nodes().contains("X"));
    }

    #[test]
    fn queries_on_minimal_graph() {
        let g = parse_graph(MIN).unwrap();
        assert_eq!(g.available_actions("S").unwrap(), ids(&["Done"]));
        assert_eq!(
            g.available_actions("F").unwrap_err(),
            GraphError::FinalNodeQuery("F".into())
        );
        assert_eq!(
            g.available_actions("Q").unwrap_err(),
            GraphError::UnknownNode("Q".into())
        );
        assert_eq!(g.transition_step("S", "Done").unwrap(), "F");
        assert!(matches!(
            g.transition_step("S", "Nope"),
            Err(GraphError::UndefinedTransition { .. })
        ));
        assert_eq!(g.reachable_nodes(), ids(&["S", "F"]));
    }

    #[test]
    fn trace_checks() {
        let g = parse_graph(MIN).unwrap();
        assert!(g.is_valid_trace(&[TraceStep::new("S", "Done", "F")]));
        assert!(!g.is_valid_trace(&[TraceStep::new("F", "Done", "F")]));
        assert!(!g.is_valid_trace(&[TraceStep::new("S", "Done", "S")]));
        let g = graph(r#"{"S":{"Go":"A","Done":"F"},"A":{"Back":"S"}}"#);
        assert!(g.is_valid_trace(&[
            TraceStep::new("S", "Go", "A"),
            TraceStep::new("A", "Back", "S"),
            TraceStep::new("S", "Done", "F"),
        ]));
        assert!(!g.is_valid_trace(&[
            TraceStep::new("S", "Go", "A"),
            TraceStep::new("S", "Done", "F"),
        ]));
    }

    #[test]
    fn round_trip_through_json() {
        let g = parse_graph(MIN).unwrap();
        assert_eq!(parse_graph(&g.to_json()).unwrap(), g);
    }

    #[test]
    fn unresolved_fixture_fails_validation() {
        let doc = MIN.replace(
            r#""function_calls":{}"#,
            r#""function_calls":{"Done":{"handler":"fixture","name":"x","data_ref":"d.json"}}"#,
        );
        let mut g = parse_graph(&doc).unwrap();
        assert_eq!(
            validate_graph(&g).error_codes(),
            BTreeSet::from([Code::FixtureUnresolved])
        );
        g.resolve_fixtures(|_| Ok(r#"[{"a":1}]"#.into()));
        assert!(validate_graph(&g).is_ok());
        g.resolve_fixtures(|_| Ok(r#"{"a":1}"#.into()));
        assert!(!validate_graph(&g).is_ok());
    }
}
