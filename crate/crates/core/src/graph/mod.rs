//! Static computational graph of spiking-network building blocks.
//!
//! A [`Graph`] is an arena of [`GraphModule`]s (units of computation) and
//! [`GraphNode`]s (the connectors between them). Connecting two modules merges
//! the source module's output nodes with the destination module's input nodes,
//! so a node is shared by every module that reads or writes it.
//!
//! Holders ([`ModuleKind::Holder`]) only record a boundary of nodes around a
//! subgraph. They are never registered on nodes, so node-level traversal sees
//! straight through them.

pub mod description;
mod matrix;

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

pub use description::{
    build_network, parse_network, LayerDescription, LinearWeightsDescription, NetworkDescription,
};
pub use matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

/// Module identifier. Ids are assigned in creation order and double as the
/// traversal tie-breaker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModuleId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for ModuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("construction error: {0}")]
    Construction(String),
    #[error("connection error: {0}")]
    Connection(String),
    #[error("encapsulation error: {0}")]
    Encapsulation(String),
    #[error("cycle among modules: {}", .0.join(", "))]
    Cycle(Vec<String>),
    #[error("graph integrity error: {0}")]
    Integrity(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub id: NodeId,
    pub source_modules: Vec<ModuleId>,
    pub sink_modules: Vec<ModuleId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModuleKind {
    LinearWeights,
    LifNeurons,
    Holder,
}

/// LIF layer parameters. `tau_syn` is neuron-major: entry `i * S + s` is
/// neuron `i`, synapse channel `s`. The same layout is used for the layer's
/// input nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct LifParams {
    pub tau_mem: Vec<f64>,
    pub tau_syn: Vec<f64>,
    pub threshold: Vec<f64>,
    pub bias: Vec<f64>,
    /// Recurrent weights, `N × N·S`.
    pub w_rec: Option<Matrix>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HolderKind {
    Plain,
    Sequential,
    Residual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolderInfo {
    pub kind: HolderKind,
    /// Modules (including nested holders) this holder was composed from.
    pub enclosed: Vec<ModuleId>,
    /// Residual skip pairs `(input index, output index)`.
    pub skip_pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Linear(Matrix),
    Lif { params: LifParams, synapses: usize },
    Holder(HolderInfo),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphModule {
    pub id: ModuleId,
    pub name: String,
    pub input_nodes: Vec<NodeId>,
    pub output_nodes: Vec<NodeId>,
    pub payload: Payload,
}

impl GraphModule {
    pub fn kind(&self) -> ModuleKind {
        match self.payload {
            Payload::Linear(_) => ModuleKind::LinearWeights,
            Payload::Lif { .. } => ModuleKind::LifNeurons,
            Payload::Holder(_) => ModuleKind::Holder,
        }
    }

    pub fn is_holder(&self) -> bool {
        self.kind() == ModuleKind::Holder
    }

    pub fn arity(&self) -> (usize, usize) {
        (self.input_nodes.len(), self.output_nodes.len())
    }

    pub fn holder_info(&self) -> Option<&HolderInfo> {
        match &self.payload {
            Payload::Holder(info) => Some(info),
            _ => None,
        }
    }
}

/// Mutable graph under construction.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Option<GraphNode>>,
    modules: Vec<GraphModule>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn module(&self, id: ModuleId) -> &GraphModule {
        &self.modules[id.0]
    }

    /// Panics if the node was merged away.
    pub fn node(&self, id: NodeId) -> &GraphNode {
        self.nodes[id.0]
            .as_ref()
            .unwrap_or_else(|| panic!("node {id} was merged away"))
    }

    pub fn modules(&self) -> impl Iterator<Item = &GraphModule> {
        self.modules.iter()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &GraphNode> {
        self.nodes.iter().flatten()
    }

    fn new_node(&mut self) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Some(GraphNode {
            id,
            source_modules: Vec::new(),
            sink_modules: Vec::new(),
        }));
        id
    }

    fn node_mut(&mut self, id: NodeId) -> &mut GraphNode {
        self.nodes[id.0].as_mut().expect("live node")
    }

    fn next_module_id(&self) -> ModuleId {
        ModuleId(self.modules.len())
    }

    /// Adds a non-holder module with fresh boundary nodes and registers it on them.
    fn add_factory_module(
        &mut self,
        prefix: &str,
        n_in: usize,
        n_out: usize,
        payload: Payload,
    ) -> ModuleId {
        let id = self.next_module_id();
        let input_nodes: Vec<NodeId> = (0..n_in).map(|_| self.new_node()).collect();
        let output_nodes: Vec<NodeId> = (0..n_out).map(|_| self.new_node()).collect();
        for &n in &input_nodes {
            self.node_mut(n).sink_modules.push(id);
        }
        for &n in &output_nodes {
            self.node_mut(n).source_modules.push(id);
        }
        self.modules.push(GraphModule {
            id,
            name: format!("{prefix}{}", id.0),
            input_nodes,
            output_nodes,
            payload,
        });
        id
    }

    fn add_holder(
        &mut self,
        prefix: &str,
        input_nodes: Vec<NodeId>,
        output_nodes: Vec<NodeId>,
        info: HolderInfo,
    ) -> ModuleId {
        let id = self.next_module_id();
        self.modules.push(GraphModule {
            id,
            name: format!("{prefix}{}", id.0),
            input_nodes,
            output_nodes,
            payload: Payload::Holder(info),
        });
        id
    }

    /// Creates a weight module: one input node per row, one output node per column.
    pub fn make_linear(&mut self, weights: Matrix) -> Result<ModuleId, GraphError> {
        if weights.is_empty() {
            return Err(GraphError::Construction(
                "linear weight matrix must be non-empty".into(),
            ));
        }
        if weights.values().iter().any(|w| !w.is_finite()) {
            return Err(GraphError::Construction(
                "linear weights must be finite".into(),
            ));
        }
        let (rows, cols) = (weights.rows(), weights.cols());
        Ok(self.add_factory_module("linear", rows, cols, Payload::Linear(weights)))
    }

    /// Creates a LIF layer with `n` neurons and `synapses` input channels per neuron.
    pub fn make_lif(
        &mut self,
        params: LifParams,
        n: usize,
        synapses: usize,
    ) -> Result<ModuleId, GraphError> {
        let err = |m: String| Err(GraphError::Construction(m));
        if n == 0 {
            return err("LIF layer needs at least one neuron".into());
        }
        if !(1..=2).contains(&synapses) {
            return err(format!("synapse channel count must be 1 or 2, got {synapses}"));
        }
        for (name, len, want) in [
            ("tau_mem", params.tau_mem.len(), n),
            ("tau_syn", params.tau_syn.len(), n * synapses),
            ("threshold", params.threshold.len(), n),
            ("bias", params.bias.len(), n),
        ] {
            if len != want {
                return err(format!("{name} has length {len}, expected {want}"));
            }
        }
        if let Some(bad) = params
            .tau_mem
            .iter()
            .chain(&params.tau_syn)
            .find(|t| !(t.is_finite() && **t > 0.0))
        {
            return err(format!("time constants must be positive, got {bad}"));
        }
        if let Some(bad) = params.threshold.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return err(format!("thresholds must be positive, got {bad}"));
        }
        if params.bias.iter().any(|b| !b.is_finite()) {
            return err("biases must be finite".into());
        }
        if let Some(w) = &params.w_rec {
            if w.rows() != n || w.cols() != n * synapses {
                return err(format!(
                    "recurrent matrix is {}x{}, expected {}x{}",
                    w.rows(),
                    w.cols(),
                    n,
                    n * synapses
                ));
            }
        }
        Ok(self.add_factory_module(
            "lif",
            n * synapses,
            n,
            Payload::Lif { params, synapses },
        ))
    }

    /// Merges `src`'s output nodes into `dst`'s input nodes pairwise.
    pub fn connect_modules(&mut self, src: ModuleId, dst: ModuleId) -> Result<(), GraphError> {
        let (s, d) = (self.module(src), self.module(dst));
        if s.output_nodes.len() != d.input_nodes.len() {
            return Err(GraphError::Connection(format!(
                "{} has {} outputs but {} has {} inputs",
                s.name,
                s.output_nodes.len(),
                d.name,
                d.input_nodes.len()
            )));
        }
        let pairs: Vec<(NodeId, NodeId)> = s
            .output_nodes
            .iter()
            .copied()
            .zip(d.input_nodes.iter().copied())
            .collect();
        for (keep, drop) in pairs {
            self.merge_nodes(keep, drop);
        }
        Ok(())
    }

    fn merge_nodes(&mut self, keep: NodeId, drop: NodeId) {
        if keep == drop {
            return;
        }
        let dropped = self.nodes[drop.0].take().expect("live node");
        let kept = self.node_mut(keep);
        for m in dropped.source_modules {
            if !kept.source_modules.contains(&m) {
                kept.source_modules.push(m);
            }
        }
        for m in dropped.sink_modules {
            if !kept.sink_modules.contains(&m) {
                kept.sink_modules.push(m);
            }
        }
        for module in &mut self.modules {
            for n in module.input_nodes.iter_mut().chain(module.output_nodes.iter_mut()) {
                if *n == drop {
                    *n = keep;
                }
            }
        }
    }

    /// Wraps the subgraph between `input_nodes` and `output_nodes` in a holder.
    pub fn as_graph_holder(
        &mut self,
        input_nodes: Vec<NodeId>,
        output_nodes: Vec<NodeId>,
    ) -> Result<ModuleId, GraphError> {
        self.holder_checked("holder", input_nodes, output_nodes, HolderKind::Plain, Vec::new())
    }

    /// Encapsulates an existing module's boundary.
    pub fn wrap_module(&mut self, module: ModuleId) -> Result<ModuleId, GraphError> {
        let m = self.module(module);
        let (ins, outs) = (m.input_nodes.clone(), m.output_nodes.clone());
        self.holder_checked("holder", ins, outs, HolderKind::Plain, vec![module])
    }

    fn holder_checked(
        &mut self,
        prefix: &str,
        input_nodes: Vec<NodeId>,
        output_nodes: Vec<NodeId>,
        kind: HolderKind,
        enclosed: Vec<ModuleId>,
    ) -> Result<ModuleId, GraphError> {
        for &n in input_nodes.iter().chain(&output_nodes) {
            if self.nodes.get(n.0).is_none_or(Option::is_none) {
                return Err(GraphError::Encapsulation(format!("node {n} does not exist")));
            }
        }
        let reached = self.reachable_nodes(&input_nodes);
        if let Some(n) = output_nodes.iter().find(|n| !reached.contains(n)) {
            return Err(GraphError::Encapsulation(format!(
                "output node {n} is not reachable from the holder inputs"
            )));
        }
        let info = HolderInfo {
            kind,
            enclosed,
            skip_pairs: Vec::new(),
        };
        Ok(self.add_holder(prefix, input_nodes, output_nodes, info))
    }

    fn reachable_nodes(&self, start: &[NodeId]) -> HashSet<NodeId> {
        let mut seen: HashSet<NodeId> = start.iter().copied().collect();
        let mut queue: VecDeque<NodeId> = start.iter().copied().collect();
        while let Some(n) = queue.pop_front() {
            for &m in &self.node(n).sink_modules {
                for &out in &self.module(m).output_nodes {
                    if seen.insert(out) {
                        queue.push_back(out);
                    }
                }
            }
        }
        seen
    }

    /// Connects `modules` pairwise in order and wraps the chain in a holder.
    pub fn compose_sequential(&mut self, modules: &[ModuleId]) -> Result<ModuleId, GraphError> {
        let (first, last) = match (modules.first(), modules.last()) {
            (Some(f), Some(l)) => (*f, *l),
            _ => {
                return Err(GraphError::Construction(
                    "sequential composition needs at least one module".into(),
                ))
            }
        };
        for (stage, pair) in modules.windows(2).enumerate() {
            let (a, b) = (self.module(pair[0]), self.module(pair[1]));
            if a.output_nodes.len() != b.input_nodes.len() {
                return Err(GraphError::Connection(format!(
                    "stage {}: {} has {} outputs but {} has {} inputs",
                    stage + 1,
                    a.name,
                    a.output_nodes.len(),
                    b.name,
                    b.input_nodes.len()
                )));
            }
        }
        for pair in modules.windows(2) {
            self.connect_modules(pair[0], pair[1])?;
        }
        let ins = self.module(first).input_nodes.clone();
        let outs = self.module(last).output_nodes.clone();
        self.holder_checked(
            "sequential",
            ins,
            outs,
            HolderKind::Sequential,
            modules.to_vec(),
        )
    }

    /// Wraps `body` with an identity skip path from input `i` to output `i`.
    pub fn compose_residual(&mut self, body: ModuleId) -> Result<ModuleId, GraphError> {
        let b = self.module(body);
        if b.input_nodes.len() != b.output_nodes.len() {
            return Err(GraphError::Construction(format!(
                "residual body {} has {} inputs but {} outputs",
                b.name,
                b.input_nodes.len(),
                b.output_nodes.len()
            )));
        }
        let (ins, outs) = (b.input_nodes.clone(), b.output_nodes.clone());
        let pairs = (0..ins.len()).map(|i| (i, i)).collect();
        let id = self.holder_checked("residual", ins, outs, HolderKind::Residual, vec![body])?;
        if let Payload::Holder(info) = &mut self.modules[id.0].payload {
            info.skip_pairs = pairs;
        }
        Ok(id)
    }

    /// Number of holder levels from `id` down to its innermost enclosed holder.
    pub fn holder_depth(&self, id: ModuleId) -> usize {
        match self.module(id).holder_info() {
            None => 0,
            Some(info) => {
                1 + info
                    .enclosed
                    .iter()
                    .map(|&m| self.holder_depth(m))
                    .max()
                    .unwrap_or(0)
            }
        }
    }

    /// Deterministic topological listing of the non-holder modules under `root`,
    /// with their longest-path depth.
    ///
    /// A holder root covers everything reachable from its inputs, stopping at its
    /// output nodes. Any other root covers everything downstream of its inputs.
    /// Order is by depth, then creation id.
    pub fn traverse(&self, root: ModuleId) -> Result<Vec<(ModuleId, usize)>, GraphError> {
        let r = self.module(root);
        let stop: HashSet<NodeId> = if r.is_holder() {
            r.output_nodes.iter().copied().collect()
        } else {
            HashSet::new()
        };

        let mut members = BTreeSet::new();
        let mut seen_nodes: HashSet<NodeId> = r.input_nodes.iter().copied().collect();
        let mut queue: VecDeque<NodeId> = r.input_nodes.iter().copied().collect();
        while let Some(n) = queue.pop_front() {
            if stop.contains(&n) {
                continue;
            }
            for &m in &self.node(n).sink_modules {
                if members.insert(m) {
                    for &out in &self.module(m).output_nodes {
                        if seen_nodes.insert(out) {
                            queue.push_back(out);
                        }
                    }
                }
            }
        }

        let successors = |m: ModuleId| -> BTreeSet<ModuleId> {
            self.module(m)
                .output_nodes
                .iter()
                .filter(|n| !stop.contains(n))
                .flat_map(|&n| self.node(n).sink_modules.iter().copied())
                .filter(|s| members.contains(s))
                .collect()
        };

        let mut indegree: std::collections::BTreeMap<ModuleId, usize> =
            members.iter().map(|&m| (m, 0)).collect();
        for &m in &members {
            for s in successors(m) {
                *indegree.get_mut(&s).unwrap() += 1;
            }
        }
        let mut depth: std::collections::BTreeMap<ModuleId, usize> =
            members.iter().map(|&m| (m, 0)).collect();
        let mut ready: BTreeSet<ModuleId> = indegree
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&m, _)| m)
            .collect();
        let mut order = Vec::with_capacity(members.len());
        while let Some(m) = ready.pop_first() {
            order.push(m);
            for s in successors(m) {
                let d = depth[&m] + 1;
                let entry = depth.get_mut(&s).unwrap();
                *entry = (*entry).max(d);
                let deg = indegree.get_mut(&s).unwrap();
                *deg -= 1;
                if *deg == 0 {
                    ready.insert(s);
                }
            }
        }
        if order.len() != members.len() {
            let done: HashSet<ModuleId> = order.iter().copied().collect();
            let stuck = members
                .iter()
                .filter(|m| !done.contains(m))
                .map(|&m| self.module(m).name.clone())
                .collect();
            return Err(GraphError::Cycle(stuck));
        }
        let mut out: Vec<(ModuleId, usize)> = order.into_iter().map(|m| (m, depth[&m])).collect();
        out.sort_by_key(|&(m, d)| (d, m));
        Ok(out)
    }

    /// Checks node/module referential integrity for every non-holder module.
    pub fn audit(&self) -> Result<(), GraphError> {
        let bad = |m: String| Err(GraphError::Integrity(m));
        for (i, slot) in self.nodes.iter().enumerate() {
            let Some(node) = slot else { continue };
            if node.id.0 != i {
                return bad(format!("node slot {i} holds id {}", node.id));
            }
            for &m in &node.sink_modules {
                if !self.module(m).input_nodes.contains(&node.id) {
                    return bad(format!("{} lists {m} as sink but not vice versa", node.id));
                }
            }
            for &m in &node.source_modules {
                if !self.module(m).output_nodes.contains(&node.id) {
                    return bad(format!("{} lists {m} as source but not vice versa", node.id));
                }
            }
        }
        for module in &self.modules {
            for &n in module.input_nodes.iter().chain(&module.output_nodes) {
                if self.nodes.get(n.0).is_none_or(Option::is_none) {
                    return bad(format!("{} references dead node {n}", module.name));
                }
            }
            if module.is_holder() {
                continue;
            }
            for &n in &module.input_nodes {
                if !self.node(n).sink_modules.contains(&module.id) {
                    return bad(format!("{} input {n} does not list it as sink", module.name));
                }
            }
            for &n in &module.output_nodes {
                if !self.node(n).source_modules.contains(&module.id) {
                    return bad(format!("{} output {n} does not list it as source", module.name));
                }
            }
        }
        Ok(())
    }

    /// Ends the construction phase. The root's boundary defines the network's
    /// input channels and output neurons.
    pub fn finalize(self, root: ModuleId) -> Result<Network, GraphError> {
        self.audit()?;
        Ok(Network { graph: self, root })
    }
}

/// A finalized, immutable graph with a designated root module.
#[derive(Debug, Clone)]
pub struct Network {
    graph: Graph,
    root: ModuleId,
}

impl Network {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn root(&self) -> ModuleId {
        self.root
    }

    pub fn root_module(&self) -> &GraphModule {
        self.graph.module(self.root)
    }

    pub fn traverse(&self) -> Result<Vec<(ModuleId, usize)>, GraphError> {
        self.graph.traverse(self.root)
    }
}
