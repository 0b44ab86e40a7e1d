//! Lowering of a finalized graph onto the core's dense parameter layout.
//!
//! Hidden neurons are numbered layer by layer in traversal order. Every
//! hidden-to-hidden linear stage lands as a rectangular block inside the single
//! `H × H` recurrent matrix, a layer's own recurrent payload lands on its
//! diagonal block, the stage reading network inputs becomes `w_in` and the
//! stage feeding the output layer becomes `w_out`. Residual skip paths become
//! aliases from the layer before the residual block onto the block's last layer.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{HolderKind, ModuleId, ModuleKind, Network, NodeId, Payload};
use crate::limits::{
    Limit, MAX_HIDDEN_NEURONS, MAX_HIDDEN_SYNAPSES, MAX_INPUT_CHANNELS, MAX_OUTPUT_NEURONS,
};
use crate::ParseError;

/// Mapped, pre-quantization network.
///
/// Synapse-indexed tensors always carry two channel slices; when `S == 1` the
/// second slice is all zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloatSpecification {
    pub dt: f64,
    #[serde(rename = "C")]
    pub channels: usize,
    #[serde(rename = "H")]
    pub hidden: usize,
    #[serde(rename = "O")]
    pub outputs: usize,
    #[serde(rename = "S")]
    pub synapses: usize,
    /// `C × H × 2`
    pub w_in: Vec<Vec<[f64; 2]>>,
    /// `H × H × 2`, indexed `[source][target][channel]`
    pub w_rec: Vec<Vec<[f64; 2]>>,
    /// `H × O`
    pub w_out: Vec<Vec<f64>>,
    pub tau_mem_hid: Vec<f64>,
    pub tau_syn_hid: Vec<[f64; 2]>,
    pub threshold_hid: Vec<f64>,
    pub bias_hid: Vec<f64>,
    pub tau_mem_out: Vec<f64>,
    pub tau_syn_out: Vec<f64>,
    pub threshold_out: Vec<f64>,
    pub bias_out: Vec<f64>,
    /// Alias target of each hidden neuron.
    pub aliases: Vec<Option<usize>>,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid specification: {0}")]
pub struct SpecError(pub String);

impl FloatSpecification {
    /// Zero network with the given dimensions and uniform parameters.
    pub fn zeros(dt: f64, channels: usize, hidden: usize, outputs: usize, synapses: usize) -> Self {
        Self {
            dt,
            channels,
            hidden,
            outputs,
            synapses,
            w_in: vec![vec![[0.0; 2]; hidden]; channels],
            w_rec: vec![vec![[0.0; 2]; hidden]; hidden],
            w_out: vec![vec![0.0; outputs]; hidden],
            tau_mem_hid: vec![dt; hidden],
            tau_syn_hid: vec![[dt; 2]; hidden],
            threshold_hid: vec![1.0; hidden],
            bias_hid: vec![0.0; hidden],
            tau_mem_out: vec![dt; outputs],
            tau_syn_out: vec![dt; outputs],
            threshold_out: vec![1.0; outputs],
            bias_out: vec![0.0; outputs],
            aliases: vec![None; hidden],
        }
    }

    /// Shape and domain checks.
    pub fn check(&self) -> Result<(), SpecError> {
        let fail = |m: String| Err(SpecError(m));
        let (c, h, o) = (self.channels, self.hidden, self.outputs);
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return fail(format!("dt must be positive, got {}", self.dt));
        }
        if !(1..=MAX_HIDDEN_SYNAPSES).contains(&self.synapses) {
            return fail(format!("S must be 1 or 2, got {}", self.synapses));
        }
        if c > MAX_INPUT_CHANNELS || h > MAX_HIDDEN_NEURONS || o > MAX_OUTPUT_NEURONS {
            return fail(format!(
                "dimensions C={c}, H={h}, O={o} exceed {MAX_INPUT_CHANNELS}/{MAX_HIDDEN_NEURONS}/{MAX_OUTPUT_NEURONS}"
            ));
        }
        let shape = |name: &str, rows: usize, want_rows: usize, cols: Vec<usize>, want_cols: usize| {
            if rows != want_rows || cols.iter().any(|&n| n != want_cols) {
                Err(SpecError(format!("{name} must be {want_rows}x{want_cols}")))
            } else {
                Ok(())
            }
        };
        shape("w_in", self.w_in.len(), c, self.w_in.iter().map(Vec::len).collect(), h)?;
        shape("w_rec", self.w_rec.len(), h, self.w_rec.iter().map(Vec::len).collect(), h)?;
        shape("w_out", self.w_out.len(), h, self.w_out.iter().map(Vec::len).collect(), o)?;
        for (name, len, want) in [
            ("tau_mem_hid", self.tau_mem_hid.len(), h),
            ("tau_syn_hid", self.tau_syn_hid.len(), h),
            ("threshold_hid", self.threshold_hid.len(), h),
            ("bias_hid", self.bias_hid.len(), h),
            ("aliases", self.aliases.len(), h),
            ("tau_mem_out", self.tau_mem_out.len(), o),
            ("tau_syn_out", self.tau_syn_out.len(), o),
            ("threshold_out", self.threshold_out.len(), o),
            ("bias_out", self.bias_out.len(), o),
        ] {
            if len != want {
                return fail(format!("{name} has length {len}, expected {want}"));
            }
        }
        let weights = self
            .w_in
            .iter()
            .chain(&self.w_rec)
            .flatten()
            .flatten()
            .chain(self.w_out.iter().flatten());
        if weights.clone().any(|w| !w.is_finite()) {
            return fail("weights must be finite".into());
        }
        if self.synapses == 1 && self.w_in.iter().chain(&self.w_rec).flatten().any(|w| w[1] != 0.0) {
            return fail("S = 1 but the second synapse slice is non-zero".into());
        }
        let taus = self
            .tau_mem_hid
            .iter()
            .chain(self.tau_syn_hid.iter().flatten())
            .chain(&self.tau_mem_out)
            .chain(&self.tau_syn_out);
        if let Some(t) = taus.clone().find(|t| !(t.is_finite() && **t > 0.0)) {
            return fail(format!("time constants must be positive, got {t}"));
        }
        if let Some(t) = self
            .threshold_hid
            .iter()
            .chain(&self.threshold_out)
            .find(|t| !(t.is_finite() && **t > 0.0))
        {
            return fail(format!("thresholds must be positive, got {t}"));
        }
        if self.bias_hid.iter().chain(&self.bias_out).any(|b| !b.is_finite()) {
            return fail("biases must be finite".into());
        }
        if let Some((i, t)) = self
            .aliases
            .iter()
            .enumerate()
            .find_map(|(i, a)| a.filter(|&t| t >= h).map(|t| (i, t)))
        {
            return fail(format!("alias of hidden neuron {i} targets {t}, outside 0..{h}"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("specification serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ParseError> {
        let spec: Self = serde_json::from_str(text)
            .map_err(|e| ParseError::from_json("float specification", &e))?;
        spec.check()
            .map_err(|e| ParseError::new("float specification", e.0))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum DesignRule {
    /// Starts with weights and alternates weights / neurons on every path.
    R1,
    /// Input channel count.
    R2,
    /// Hidden neuron count.
    R3,
    /// Output neuron count.
    R4,
    /// Synapse channels per neuron.
    R5,
    /// Aliases (residual skips).
    R6,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleViolation {
    pub rule: DesignRule,
    pub message: String,
    pub subject: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DesignRuleReport {
    pub violations: Vec<RuleViolation>,
}

impl DesignRuleReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, rule: DesignRule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    fn push(&mut self, rule: DesignRule, subject: impl Into<String>, message: impl Into<String>) {
        self.violations.push(RuleViolation {
            rule,
            message: message.into(),
            subject: subject.into(),
        });
    }
}

impl fmt::Display for DesignRuleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "[{:?}] {}: {}", v.rule, v.subject, v.message)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("network is not mappable:\n{0}")]
    DesignRules(DesignRuleReport),
    #[error("dt must be positive, got {0}")]
    InvalidDt(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Source {
    Channel(usize),
    Hidden(usize),
}

#[derive(Debug, Default)]
struct Layout {
    members: HashSet<ModuleId>,
    order: Vec<ModuleId>,
    input_channel: HashMap<NodeId, usize>,
    /// Hidden LIF layers in traversal order: (module, first neuron index).
    hidden_layers: Vec<(ModuleId, usize)>,
    hidden_base: HashMap<ModuleId, usize>,
    outputs: Vec<(ModuleId, usize)>,
    output_index: HashMap<(ModuleId, usize), usize>,
    hidden: usize,
    synapses: usize,
    aliases: BTreeMap<usize, usize>,
}

fn synapses_of(net: &Network, m: ModuleId) -> usize {
    match &net.graph().module(m).payload {
        Payload::Lif { synapses, .. } => *synapses,
        _ => 1,
    }
}

fn analyze(net: &Network) -> (Layout, DesignRuleReport) {
    use DesignRule::*;
    let g = net.graph();
    let root = net.root_module();
    let mut report = DesignRuleReport::default();
    let mut layout = Layout::default();

    let order: Vec<ModuleId> = match net.traverse() {
        Ok(o) => o.into_iter().map(|(m, _)| m).collect(),
        Err(e) => {
            report.push(R1, &root.name, e.to_string());
            return (layout, report);
        }
    };
    let members: HashSet<ModuleId> = order.iter().copied().collect();
    let kind = |m: ModuleId| g.module(m).kind();
    let name = |m: ModuleId| g.module(m).name.clone();
    let sinks = |n: NodeId| -> Vec<ModuleId> {
        g.node(n)
            .sink_modules
            .iter()
            .copied()
            .filter(|m| members.contains(m))
            .collect()
    };
    let sources = |n: NodeId| -> Vec<ModuleId> {
        g.node(n)
            .source_modules
            .iter()
            .copied()
            .filter(|m| members.contains(m))
            .collect()
    };

    // network inputs
    for (c, &n) in root.input_nodes.iter().enumerate() {
        layout.input_channel.entry(n).or_insert(c);
    }
    if root.input_nodes.len() > MAX_INPUT_CHANNELS {
        report.push(
            R2,
            &root.name,
            format!(
                "{}: network has {} input channels, limit {MAX_INPUT_CHANNELS}",
                Limit::InputChannels.row_name(),
                root.input_nodes.len()
            ),
        );
    }
    let mut flagged = HashSet::new();
    for &n in &root.input_nodes {
        for m in sinks(n) {
            if kind(m) != ModuleKind::LinearWeights && flagged.insert(m) {
                report.push(
                    R1,
                    name(m),
                    "reads network inputs directly; the network must begin with a weight layer",
                );
            }
        }
    }

    // alternation along every edge
    let root_outputs: HashSet<NodeId> = root.output_nodes.iter().copied().collect();
    for &m in &order {
        let mut succ: Vec<ModuleId> = g
            .module(m)
            .output_nodes
            .iter()
            .filter(|n| !root_outputs.contains(n) || !root.is_holder())
            .flat_map(|&n| sinks(n))
            .collect();
        succ.sort();
        succ.dedup();
        for s in succ {
            if kind(s) == kind(m) {
                report.push(
                    R1,
                    name(m),
                    format!(
                        "feeds {} directly; weight layers and LIF layers must alternate",
                        name(s)
                    ),
                );
            }
        }
    }

    // output neurons
    let mut output_modules: Vec<ModuleId> = Vec::new();
    for (o, &n) in root.output_nodes.iter().enumerate() {
        let src = sources(n);
        match src.as_slice() {
            [m] if kind(*m) == ModuleKind::LifNeurons => {
                let p = g.module(*m).output_nodes.iter().position(|&x| x == n).unwrap();
                layout.output_index.insert((*m, p), layout.outputs.len());
                layout.outputs.push((*m, p));
                if !output_modules.contains(m) {
                    output_modules.push(*m);
                }
            }
            _ => report.push(
                R1,
                &root.name,
                format!("network output {o} is not produced by a single LIF layer"),
            ),
        }
    }
    for &m in &output_modules {
        if g.module(m).output_nodes.iter().any(|n| !root_outputs.contains(n)) {
            report.push(R1, name(m), "output layer is only partially exposed as network outputs");
        }
    }
    if layout.outputs.len() > MAX_OUTPUT_NEURONS {
        report.push(
            R4,
            &root.name,
            format!(
                "{}: network has {} output neurons, limit {MAX_OUTPUT_NEURONS}",
                Limit::OutputNeurons.row_name(),
                layout.outputs.len()
            ),
        );
    }
    if root.output_nodes.is_empty() {
        report.push(R4, &root.name, "network has no output neurons");
    }

    // hidden layers
    for &m in &order {
        if kind(m) == ModuleKind::LifNeurons && !output_modules.contains(&m) {
            layout.hidden_base.insert(m, layout.hidden);
            layout.hidden_layers.push((m, layout.hidden));
            layout.hidden += g.module(m).output_nodes.len();
        }
    }
    if layout.hidden > MAX_HIDDEN_NEURONS {
        report.push(
            R3,
            &root.name,
            format!(
                "{}: network has {} hidden neurons, limit {MAX_HIDDEN_NEURONS}",
                Limit::HiddenNeurons.row_name(),
                layout.hidden
            ),
        );
    }
    if layout.hidden_layers.is_empty() {
        report.push(R1, &root.name, "network needs a hidden LIF layer before the output layer");
    }
    layout.synapses = layout
        .hidden_layers
        .iter()
        .map(|&(m, _)| synapses_of(net, m))
        .max()
        .unwrap_or(1);
    for &(m, _) in &layout.hidden_layers {
        let s = synapses_of(net, m);
        if s > MAX_HIDDEN_SYNAPSES {
            report.push(
                R5,
                name(m),
                format!("{}: {s} synapse channels", Limit::HiddenInputSynapses.row_name()),
            );
        }
    }
    for &m in &output_modules {
        let s = synapses_of(net, m);
        if s != 1 {
            report.push(
                R5,
                name(m),
                format!(
                    "{}: output layer has {s} synapse channels, limit 1",
                    Limit::OutputInputSynapses.row_name()
                ),
            );
        }
        if let Payload::Lif { params, .. } = &g.module(m).payload {
            if params.w_rec.is_some() {
                report.push(
                    R5,
                    name(m),
                    "output layer carries recurrent weights; output neurons only take hidden-layer input",
                );
            }
        }
    }

    // weight stage sources
    for &m in &order {
        if kind(m) != ModuleKind::LinearWeights {
            continue;
        }
        let module = g.module(m);
        let mut from_channels = false;
        for (r, &n) in module.input_nodes.iter().enumerate() {
            if layout.input_channel.contains_key(&n) {
                from_channels = true;
                continue;
            }
            let src = sources(n);
            let driven = src.iter().any(|s| layout.hidden_base.contains_key(s));
            if !driven && !src.iter().any(|s| kind(*s) == ModuleKind::LinearWeights) {
                report.push(R1, name(m), format!("input row {r} is not driven by a LIF layer"));
            }
        }
        if from_channels {
            let hits_output = module
                .output_nodes
                .iter()
                .flat_map(|&n| sinks(n))
                .any(|s| output_modules.contains(&s));
            if hits_output {
                report.push(
                    R1,
                    name(m),
                    "connects network inputs straight to output neurons; a hidden layer is required",
                );
            }
        }
    }

    // residual skips become aliases
    let mut alias_requests: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for holder in g.modules() {
        let Some(info) = holder.holder_info() else { continue };
        if info.kind != HolderKind::Residual {
            continue;
        }
        let inside = holder.input_nodes.iter().any(|&n| !sinks(n).is_empty());
        if !inside {
            continue;
        }
        let hname = holder.name.clone();
        let unique = |mods: Vec<ModuleId>| -> Option<ModuleId> {
            let mut mods = mods;
            mods.sort();
            mods.dedup();
            (mods.len() == 1).then(|| mods[0])
        };
        let first = unique(holder.input_nodes.iter().flat_map(|&n| sinks(n)).collect());
        let last = unique(holder.output_nodes.iter().flat_map(|&n| sources(n)).collect());
        let feeder = unique(holder.input_nodes.iter().flat_map(|&n| sources(n)).collect());
        let (Some(first), Some(last)) = (first, last) else {
            report.push(R6, &hname, "residual body must start and end with a single LIF layer");
            continue;
        };
        if kind(first) != ModuleKind::LifNeurons || kind(last) != ModuleKind::LifNeurons {
            report.push(R6, &hname, "residual body must start and end with a LIF layer");
            continue;
        }
        if synapses_of(net, first) != 1 {
            report.push(R6, &hname, "residual body input layer must use one synapse channel");
            continue;
        }
        let Some(target_base) = layout.hidden_base.get(&last).copied() else {
            report.push(
                R6,
                &hname,
                format!(
                    "{}: residual output would alias onto output neurons",
                    Limit::AliasTargets.row_name()
                ),
            );
            continue;
        };
        let source_layer = feeder
            .filter(|&f| kind(f) == ModuleKind::LinearWeights)
            .and_then(|f| unique(g.module(f).input_nodes.iter().flat_map(|&n| sources(n)).collect()))
            .filter(|p| layout.hidden_base.contains_key(p));
        let Some(source_layer) = source_layer else {
            report.push(
                R6,
                &hname,
                "residual block must be fed by one weight layer reading one hidden LIF layer",
            );
            continue;
        };
        let source_size = g.module(source_layer).output_nodes.len();
        if source_size != holder.output_nodes.len() {
            report.push(
                R6,
                &hname,
                format!(
                    "skip source {} has {source_size} neurons but the residual block has {} outputs",
                    name(source_layer),
                    holder.output_nodes.len()
                ),
            );
            continue;
        }
        let source_base = layout.hidden_base[&source_layer];
        let last_outputs = &g.module(last).output_nodes;
        for &(i, o) in &info.skip_pairs {
            let pos = last_outputs
                .iter()
                .position(|&n| n == holder.output_nodes[o])
                .unwrap();
            alias_requests
                .entry(source_base + i)
                .or_default()
                .push(target_base + pos);
        }
    }
    for (src, targets) in alias_requests {
        if targets.len() > 1 {
            report.push(
                R6,
                format!("hidden neuron {src}"),
                format!(
                    "{}: needs {} alias targets, limit 1",
                    Limit::AliasTargets.row_name(),
                    targets.len()
                ),
            );
        }
        layout.aliases.insert(src, targets[0]);
    }

    layout.members = members;
    layout.order = order;
    (layout, report)
}

/// Design-rule check. An empty report means [`map_graph`] will succeed.
pub fn check_design_rules(net: &Network) -> DesignRuleReport {
    analyze(net).1
}

/// Lowers `net` into a dense float specification with timestep `dt`.
pub fn map_graph(net: &Network, dt: f64) -> Result<FloatSpecification, MappingError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(MappingError::InvalidDt(dt));
    }
    let (layout, report) = analyze(net);
    if !report.is_empty() {
        return Err(MappingError::DesignRules(report));
    }
    let g = net.graph();
    let mut spec = FloatSpecification::zeros(
        dt,
        net.root_module().input_nodes.len(),
        layout.hidden,
        layout.outputs.len(),
        layout.synapses,
    );

    for &(m, base) in &layout.hidden_layers {
        let Payload::Lif { params, synapses } = &g.module(m).payload else { unreachable!() };
        let s = *synapses;
        for i in 0..g.module(m).output_nodes.len() {
            let h = base + i;
            spec.tau_mem_hid[h] = params.tau_mem[i];
            spec.tau_syn_hid[h] = [params.tau_syn[i * s], params.tau_syn[i * s + s - 1]];
            spec.threshold_hid[h] = params.threshold[i];
            spec.bias_hid[h] = params.bias[i];
        }
        if let Some(w) = &params.w_rec {
            for j in 0..w.rows() {
                for col in 0..w.cols() {
                    spec.w_rec[base + j][base + col / s][col % s] += w.get(j, col);
                }
            }
        }
    }
    for (o, &(m, p)) in layout.outputs.iter().enumerate() {
        let Payload::Lif { params, .. } = &g.module(m).payload else { unreachable!() };
        spec.tau_mem_out[o] = params.tau_mem[p];
        spec.tau_syn_out[o] = params.tau_syn[p];
        spec.threshold_out[o] = params.threshold[p];
        spec.bias_out[o] = params.bias[p];
    }

    let members = &layout.members;
    for &m in &layout.order {
        let module = g.module(m);
        let Payload::Linear(w) = &module.payload else { continue };
        for (r, &in_node) in module.input_nodes.iter().enumerate() {
            let sources: Vec<Source> = if let Some(&c) = layout.input_channel.get(&in_node) {
                vec![Source::Channel(c)]
            } else {
                g.node(in_node)
                    .source_modules
                    .iter()
                    .filter_map(|src| {
                        let base = layout.hidden_base.get(src)?;
                        let pos = g.module(*src).output_nodes.iter().position(|&n| n == in_node)?;
                        Some(Source::Hidden(base + pos))
                    })
                    .collect()
            };
            for (k, &out_node) in module.output_nodes.iter().enumerate() {
                let value = w.get(r, k);
                for &sink in g.node(out_node).sink_modules.iter().filter(|s| members.contains(s)) {
                    let sink_mod = g.module(sink);
                    let s_count = synapses_of(net, sink);
                    for (p, _) in sink_mod.input_nodes.iter().enumerate().filter(|(_, &n)| n == out_node) {
                        for &src in &sources {
                            if let Some(&base) = layout.hidden_base.get(&sink) {
                                let (i, s) = (base + p / s_count, p % s_count);
                                match src {
                                    Source::Channel(c) => spec.w_in[c][i][s] += value,
                                    Source::Hidden(j) => spec.w_rec[j][i][s] += value,
                                }
                            } else if let Some(&o) = layout.output_index.get(&(sink, p)) {
                                if let Source::Hidden(j) = src {
                                    spec.w_out[j][o] += value;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    for (&src, &dst) in &layout.aliases {
        spec.aliases[src] = Some(dst);
    }
    Ok(spec)
}
