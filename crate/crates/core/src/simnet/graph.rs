use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::compliance::ConsumerPolicy;
use crate::engine::{OperatorKind, OperatorSpec, Value};
use crate::hierarchy::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Smartness {
    L1,
    L2,
    L3,
}

/// How a sensing object draws values for one attribute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum ValueGen {
    /// float in `[lo, hi)`
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// integer in `[lo, hi]`
    IntRange {
        lo: i64,
        hi: i64,
    },
    Constant {
        value: Value,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensingAttribute {
    pub name: String,
    pub category: NodeId,
    /// Name of a preference declared in the scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pp: Option<String>,
    pub values: ValueGen,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensingConfig {
    pub attributes: Vec<SensingAttribute>,
    /// Tuples per second per sensing object; the workload rate if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum NodeRole {
    Sensing(SensingConfig),
    Processor { operator: OperatorSpec },
    Consumer { policy: ConsumerPolicy },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    pub smartness: Smartness,
    #[serde(flatten)]
    pub role: NodeRole,
}

impl NodeSpec {
    pub fn role_name(&self) -> &'static str {
        match self.role {
            NodeRole::Sensing(_) => "sensing",
            NodeRole::Processor { .. } => "processor",
            NodeRole::Consumer { .. } => "consumer",
        }
    }

    pub fn operator(&self) -> Option<&OperatorSpec> {
        match &self.role {
            NodeRole::Processor { operator } => Some(operator),
            _ => None,
        }
    }
}

/// Smart-object network: one node per sensing object cluster, operator or
/// consumer. The inputs of a node are ordered by edge declaration order;
/// for a join the first is the left input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryGraph {
    pub name: String,
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Some(n) => write!(f, "node `{n}`: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl QueryGraph {
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Predecessors of every node, in edge order. Unknown endpoints are
    /// skipped.
    pub fn inputs(&self) -> Vec<Vec<usize>> {
        let idx = self.index();
        let mut inputs = vec![Vec::new(); self.nodes.len()];
        for (a, b) in &self.edges {
            if let (Some(&i), Some(&j)) = (idx.get(a.as_str()), idx.get(b.as_str())) {
                inputs[j].push(i);
            }
        }
        inputs
    }

    /// Successors of every node as `(node, input port)`, in edge order.
    pub fn outputs(&self) -> Vec<Vec<(usize, usize)>> {
        let idx = self.index();
        let mut ports = vec![0usize; self.nodes.len()];
        let mut outputs = vec![Vec::new(); self.nodes.len()];
        for (a, b) in &self.edges {
            if let (Some(&i), Some(&j)) = (idx.get(a.as_str()), idx.get(b.as_str())) {
                outputs[i].push((j, ports[j]));
                ports[j] += 1;
            }
        }
        outputs
    }

    fn index(&self) -> HashMap<&str, usize> {
        self.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect()
    }

    /// Kahn order, ties broken by declaration order. `None` on a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let outputs = self.outputs();
        let mut indeg = vec![0usize; self.nodes.len()];
        for outs in &outputs {
            for &(j, _) in outs {
                indeg[j] += 1;
            }
        }
        let mut ready: VecDeque<usize> = (0..self.nodes.len()).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(i) = ready.pop_front() {
            order.push(i);
            for &(j, _) in &outputs[i] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.push_back(j);
                }
            }
        }
        (order.len() == self.nodes.len()).then_some(order)
    }

    pub fn count_operators(&self, kind: OperatorKind) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.operator().is_some_and(|o| o.kind() == kind))
            .count()
    }
}

/// Every structural and role constraint the graph breaks; empty when valid.
pub fn validate_graph(g: &QueryGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |node: Option<&str>, message: String| {
        out.push(Violation {
            node: node.map(str::to_string),
            message,
        })
    };
    let mut seen = HashMap::new();
    for n in &g.nodes {
        if n.id.is_empty() {
            push(None, "empty node id".into());
        }
        if seen.insert(n.id.as_str(), ()).is_some() {
            push(Some(&n.id), "duplicate node id".into());
        }
    }
    for (a, b) in &g.edges {
        for end in [a, b] {
            if g.index_of(end).is_none() {
                push(None, format!("edge ({a}, {b}) references unknown node `{end}`"));
            }
        }
    }
    if g.topological_order().is_none() {
        push(None, "graph has a cycle".into());
    }
    let inputs = g.inputs();
    let outputs = g.outputs();
    let mut consumers = 0;
    for (i, n) in g.nodes.iter().enumerate() {
        let (indeg, outdeg) = (inputs[i].len(), outputs[i].len());
        let id = Some(n.id.as_str());
        match &n.role {
            NodeRole::Sensing(cfg) => {
                if n.smartness != Smartness::L1 {
                    push(id, "sensing node must be L1".into());
                }
                if indeg != 0 {
                    push(id, format!("sensing in-degree {indeg}, expected 0"));
                }
                if cfg.attributes.is_empty() {
                    push(id, "sensing node emits no attributes".into());
                }
                if cfg.rate.is_some_and(|r| !(r > 0.0 && r.is_finite())) {
                    push(id, "sensing rate must be positive".into());
                }
            }
            NodeRole::Processor { operator } => {
                let kind = operator.kind();
                if kind.is_windowed() && n.smartness != Smartness::L3 {
                    push(id, format!("window op needs L3 ({kind} on {:?})", n.smartness));
                }
                if n.smartness == Smartness::L1 {
                    push(id, "processor needs L2 or L3".into());
                }
                let want = if kind == OperatorKind::Join { 2 } else { 1 };
                if indeg != want {
                    push(id, format!("{kind} in-degree {indeg}, expected {want}"));
                }
                if let Err(e) = operator.validate() {
                    push(id, format!("operator: {e}"));
                }
            }
            NodeRole::Consumer { .. } => {
                consumers += 1;
                if n.smartness != Smartness::L3 {
                    push(id, "consumer node must be L3".into());
                }
                if outdeg != 0 {
                    push(id, format!("consumer out-degree {outdeg}, expected 0"));
                }
                if indeg == 0 {
                    push(id, "consumer has no input".into());
                }
            }
        }
    }
    if consumers == 0 {
        push(None, "graph has no consumer".into());
    }
    out
}
